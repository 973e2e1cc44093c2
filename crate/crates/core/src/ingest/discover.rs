use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::catalog::Era;
use crate::error::{Error, Result};
use crate::model::{HazardCategory, MAX_YEAR, MIN_YEAR};
use crate::store::PartitionKey;

pub const SIDECAR_SUFFIX: &str = ".meta.json";

/// Chooses the reporting-format era for a file from its reporting year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EraRule {
    pub ssd2_from_year: i32,
}

impl Default for EraRule {
    fn default() -> Self {
        EraRule { ssd2_from_year: 2015 }
    }
}

impl EraRule {
    pub fn era_for(&self, year: i32) -> Era {
        if year >= self.ssd2_from_year {
            Era::Ssd2
        } else {
            Era::Ssd1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileManifestEntry {
    pub path: PathBuf,
    /// Path relative to the discovery root, `/`-separated.
    pub rel_path: String,
    pub hazard: HazardCategory,
    pub country: String,
    pub year: i32,
    pub era: Era,
    pub size_bytes: u64,
}

impl FileManifestEntry {
    pub fn key(&self) -> PartitionKey {
        PartitionKey {
            hazard: self.hazard,
            country: self.country.clone(),
            year: self.year,
        }
    }

    pub fn is_gzip(&self) -> bool {
        self.rel_path.to_ascii_lowercase().ends_with(".gz")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub rel_path: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<FileManifestEntry>,
    pub skipped: Vec<SkippedFile>,
}

#[derive(Debug, Default, Deserialize)]
struct Sidecar {
    hazard: Option<String>,
    country: Option<String>,
    year: Option<i32>,
    era: Option<String>,
}

/// Lists ingestible files under `root`, sorted by relative path. Files named
/// `<HAZARD>_<COUNTRY>_<YEAR>[_<suffix>].csv[.gz]` are recognized; a
/// `<file>.meta.json` sidecar may supply or override hazard, country, year
/// and era. Everything else is recorded as skipped.
pub fn discover_files(root: &Path, era_rule: EraRule) -> Result<Manifest> {
    let meta = std::fs::metadata(root).map_err(|e| Error::io(root, e))?;
    if !meta.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotADirectory, "not a directory"),
        ));
    }

    let mut manifest = Manifest::default();
    let walker = WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.'));
    for entry in walker {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(path, e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk error")))
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        let rel_path = relative(root, path);
        let name = entry.file_name().to_string_lossy().to_string();
        if name.ends_with(SIDECAR_SUFFIX) {
            continue;
        }
        let lower = name.to_ascii_lowercase();
        let stem = if let Some(s) = lower.strip_suffix(".csv.gz") {
            &name[..s.len()]
        } else if let Some(s) = lower.strip_suffix(".csv") {
            &name[..s.len()]
        } else {
            manifest.skipped.push(SkippedFile {
                rel_path,
                reason: "not a .csv or .csv.gz file".into(),
            });
            continue;
        };

        let sidecar_path = PathBuf::from(format!("{}{}", path.display(), SIDECAR_SUFFIX));
        let sidecar = if sidecar_path.is_file() {
            let text = std::fs::read_to_string(&sidecar_path).map_err(|e| Error::io(&sidecar_path, e))?;
            match serde_json::from_str::<Sidecar>(&text) {
                Ok(s) => s,
                Err(e) => {
                    manifest.skipped.push(SkippedFile {
                        rel_path,
                        reason: format!("unreadable sidecar: {e}"),
                    });
                    continue;
                }
            }
        } else {
            Sidecar::default()
        };

        match classify(stem, &sidecar, era_rule) {
            Ok((hazard, country, year, era)) => {
                let size_bytes = entry.metadata().map(|m| m.len()).unwrap_or(0);
                manifest.entries.push(FileManifestEntry {
                    path: path.to_path_buf(),
                    rel_path,
                    hazard,
                    country,
                    year,
                    era,
                    size_bytes,
                });
            }
            Err(reason) => manifest.skipped.push(SkippedFile { rel_path, reason }),
        }
    }
    manifest.entries.sort_by(|a, b| a.rel_path.cmp(&b.rel_path));
    manifest.skipped.sort_by(|a, b| a.rel_path.cmp(&b.rel_path));
    Ok(manifest)
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn classify(
    stem: &str,
    sidecar: &Sidecar,
    era_rule: EraRule,
) -> std::result::Result<(HazardCategory, String, i32, Era), String> {
    let parts: Vec<&str> = stem.split('_').collect();
    let from_name = |i: usize| parts.get(i).copied().filter(|_| parts.len() >= 3);

    let hazard_text = sidecar.hazard.as_deref().or(from_name(0));
    let hazard = hazard_text
        .and_then(HazardCategory::from_code)
        .ok_or_else(|| format!("no hazard category (expected CC, PEST or VMPR) in {stem:?}"))?;

    let country = sidecar
        .country
        .clone()
        .or(from_name(1).map(str::to_string))
        .map(|c| c.trim().to_ascii_uppercase())
        .filter(|c| (2..=3).contains(&c.len()) && c.chars().all(|ch| ch.is_ascii_alphabetic()))
        .ok_or_else(|| format!("no country code in {stem:?}"))?;

    let year = sidecar
        .year
        .or_else(|| from_name(2).and_then(|y| y.parse::<i32>().ok()))
        .filter(|y| (MIN_YEAR..=MAX_YEAR).contains(&i64::from(*y)))
        .ok_or_else(|| format!("no reporting year in {stem:?}"))?;

    let era = match sidecar.era.as_deref() {
        Some(e) => Era::parse(e).ok_or_else(|| format!("unknown era {e:?} in sidecar"))?,
        None => era_rule.era_for(year),
    };
    Ok((hazard, country, year, era))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch(dir: &Path, name: &str, body: &str) {
        let p = dir.join(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).unwrap();
        }
        std::fs::write(p, body).unwrap();
    }

    #[test]
    fn parses_conventional_names() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "PEST_DE_2017.csv", "a\n");
        let m = discover_files(dir.path(), EraRule::default()).unwrap();
        assert_eq!(m.entries.len(), 1);
        let e = &m.entries[0];
        assert_eq!((e.hazard, e.country.as_str(), e.year), (HazardCategory::PesticideResidues, "DE", 2017));
        assert_eq!(e.era, Era::Ssd2);
        assert!(m.skipped.is_empty());
    }

    #[test]
    fn empty_dir_gives_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = discover_files(dir.path(), EraRule::default()).unwrap();
        assert!(m.entries.is_empty() && m.skipped.is_empty());
    }

    #[test]
    fn skips_unparsable_names() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "notes.txt", "x");
        touch(dir.path(), "random.csv", "x");
        touch(dir.path(), "CC_FR_2012_part2.csv.gz", "x");
        let m = discover_files(dir.path(), EraRule::default()).unwrap();
        assert_eq!(m.entries.len(), 1);
        assert_eq!(m.entries[0].era, Era::Ssd1);
        assert!(m.entries[0].is_gzip());
        let skipped: Vec<_> = m.skipped.iter().map(|s| s.rel_path.as_str()).collect();
        assert_eq!(skipped, ["notes.txt", "random.csv"]);
    }

    #[test]
    fn sidecar_overrides() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "sub/export_0001.csv", "x");
        touch(
            dir.path(),
            "sub/export_0001.csv.meta.json",
            r#"{"hazard":"VMPR","country":"nl","year":2019,"era":"SSD1"}"#,
        );
        let m = discover_files(dir.path(), EraRule::default()).unwrap();
        assert_eq!(m.entries.len(), 1);
        let e = &m.entries[0];
        assert_eq!(e.rel_path, "sub/export_0001.csv");
        assert_eq!((e.hazard, e.country.as_str(), e.year, e.era), (HazardCategory::VMPR, "NL", 2019, Era::Ssd1));
    }

    #[test]
    fn missing_root_is_fatal() {
        assert!(matches!(
            discover_files(Path::new("/definitely/not/here"), EraRule::default()),
            Err(Error::Io { .. })
        ));
    }
}
