//! Command-line surface: argument types, run configuration and the
//! subcommand drivers. The binary only parses arguments, sets up logging and
//! turns the outcome into a process exit code.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analytics::{chord_edges_csv, run_suite, standard_suite, Dataset, ReportParams, ReportRequest, REPORT_NAMES};
use crate::catalog::{load_catalogue, CatalogueKind, Catalogues, GroupingDictionary};
use crate::error::{Error, Result};
use crate::ingest::{discover_files, EraRule, IngestContext, Manifest};
use crate::pipeline::{ingest_corpus, with_pool, IngestOptions};
use crate::plot::{plot_kind, render_svg};
use crate::report::{compare_suites, AggregateReport, FLOAT_TOLERANCE};
use crate::schema::{Schema, SynonymTable};
use crate::store::validate::validate_store;
use crate::store::Store;
use crate::synth::{generate_corpus, oracle_aggregate, CorpusPlan};

pub const STORE_ENV: &str = "CHEFS_STORE";
pub const DEFAULT_OUTPUT: &str = "out";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

/// Exit status for a fatal error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::SchemaConflict { .. } => EXIT_SCHEMA,
        _ => EXIT_IO,
    }
}

#[derive(Debug, Parser)]
#[command(name = "chefs", version, about = "Ingest, validate and summarize long-format food-safety monitoring data")]
pub struct Cli {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags mirroring [`RunConfig`] keys; any flag given wins over the file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Store root; defaults to $CHEFS_STORE.
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    /// Catalogue file as KIND=PATH (PARAM, MATRIX_FOODEX, MATRIX_FOODEX2, COUNTRY).
    #[arg(long = "catalogue", value_name = "KIND=PATH", global = true)]
    pub catalogues: Vec<String>,
    #[arg(long, global = true)]
    pub synonyms: Option<PathBuf>,
    #[arg(long, global = true)]
    pub dictionary: Option<PathBuf>,
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    #[arg(long, global = true)]
    pub year_min: Option<i32>,
    #[arg(long, global = true)]
    pub year_max: Option<i32>,
    #[arg(long, global = true)]
    pub min_samples: Option<u64>,
    #[arg(long, global = true)]
    pub top: Option<usize>,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Worker threads; 0 means one per core.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Discover input files and write a new store.
    Ingest {
        /// Replace an existing store.
        #[arg(long)]
        overwrite: bool,
    },
    /// Compare every stored partition with its source files.
    Validate,
    /// Compute one report and write it as CSV and JSON.
    Report {
        name: String,
        #[command(flatten)]
        params: ReportArgs,
    },
    /// Compute one report and draw it as SVG.
    Plot {
        name: String,
        #[command(flatten)]
        params: ReportArgs,
    },
    /// Synthetic corpora with known answers.
    Synth {
        #[command(subcommand)]
        command: SynthCommand,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub hazard: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long)]
    pub n2: Option<usize>,
    #[arg(long)]
    pub level: Option<usize>,
    #[arg(long)]
    pub within: Option<String>,
    #[arg(long)]
    pub group_by: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlanScale {
    Small,
    Desk,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Write a corpus into the input root and its ledger into the output dir.
    Generate {
        /// JSON corpus plan; overrides --seed and --scale.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = PlanScale::Small)]
        scale: PlanScale,
    },
    /// Recompute the standard reports from the input files alone.
    Oracle {
        /// Also compare with reports computed from the store; exit 3 on any difference.
        #[arg(long)]
        check: bool,
    },
}

/// Everything a run depends on. Paths are checked before any work starts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub store: Option<PathBuf>,
    /// Catalogue kind to CSV path.
    pub catalogues: BTreeMap<String, PathBuf>,
    pub synonyms: Option<PathBuf>,
    pub dictionary: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub year_min: Option<i32>,
    pub year_max: Option<i32>,
    pub min_samples: Option<u64>,
    pub top: Option<usize>,
    pub output: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json(origin, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    /// File keys, then flags; the store falls back to `env_store`.
    pub fn resolve(args: &ConfigArgs, env_store: Option<PathBuf>) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(p) => Self::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! over {
            ($($f:ident),*) => {$(if args.$f.is_some() { cfg.$f = args.$f.clone(); })*};
        }
        over!(input, store, synonyms, dictionary, schema, year_min, year_max, min_samples, top, output, jobs);
        for entry in &args.catalogues {
            let (kind, path) = entry
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("--catalogue expects KIND=PATH, got {entry:?}")))?;
            cfg.catalogues.insert(kind.trim().to_ascii_uppercase(), PathBuf::from(path));
        }
        if cfg.store.is_none() {
            cfg.store = env_store;
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        for kind in self.catalogues.keys() {
            if CatalogueKind::parse(kind).is_none() {
                return Err(Error::InvalidConfig(format!("unknown catalogue kind {kind:?}")));
            }
        }
        let files = self
            .catalogues
            .values()
            .chain(&self.synonyms)
            .chain(&self.dictionary)
            .chain(&self.schema);
        for p in files {
            if !p.is_file() {
                return Err(Error::io(p, std::io::Error::new(std::io::ErrorKind::NotFound, "file not found")));
            }
        }
        if let (Some(lo), Some(hi)) = (self.year_min, self.year_max) {
            if lo > hi {
                return Err(Error::InvalidConfig(format!("year_min {lo} > year_max {hi}")));
            }
        }
        Ok(())
    }

    /// The configuration as embedded in outputs. Parallelism is left out
    /// because it never changes results.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("jobs");
        }
        v
    }

    pub fn jobs(&self) -> usize {
        self.jobs.unwrap_or(0)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
    }

    pub fn input_root(&self) -> Result<&Path> {
        let p = self.input.as_deref().ok_or_else(|| Error::InvalidConfig("no input root (--input)".into()))?;
        if !p.is_dir() {
            return Err(Error::io(p, std::io::Error::new(std::io::ErrorKind::NotFound, "input root not found")));
        }
        Ok(p)
    }

    pub fn store_root(&self) -> Result<&Path> {
        self.store
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig(format!("no store root (--store or ${STORE_ENV})")))
    }

    pub fn ingest_context(&self) -> Result<IngestContext> {
        let mut catalogues = Catalogues::new();
        for (kind, path) in &self.catalogues {
            let kind = CatalogueKind::parse(kind).expect("checked in resolve");
            catalogues.add(load_catalogue(path, kind)?)?;
        }
        Ok(IngestContext {
            schema: match &self.schema {
                Some(p) => Schema::load(p)?,
                None => Schema::builtin(),
            },
            synonyms: match &self.synonyms {
                Some(p) => SynonymTable::load(p)?,
                None => SynonymTable::builtin(),
            },
            catalogues,
        })
    }

    pub fn grouping_dictionary(&self) -> Result<GroupingDictionary> {
        match &self.dictionary {
            Some(p) => GroupingDictionary::load(p),
            None => Ok(GroupingDictionary::builtin()),
        }
    }

    pub fn report_params(&self, args: &ReportArgs) -> ReportParams {
        ReportParams {
            hazard: args.hazard.clone(),
            n: args.n,
            n1: args.n1,
            n2: args.n2,
            level: args.level,
            within: args.within.clone(),
            min_samples: self.min_samples,
            top: self.top,
            year_min: self.year_min,
            year_max: self.year_max,
            group_by: args.group_by.clone(),
        }
    }
}

/// A report file as written to disk: the data plus its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub config: serde_json::Value,
    pub store_checksum: String,
    pub report: AggregateReport,
}

/// File stem for a report: name plus sorted parameters.
pub fn report_stem(report: &AggregateReport) -> String {
    let mut stem = report.name.clone();
    for (k, v) in &report.params {
        let v: String = v
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
            .collect();
        stem.push_str(&format!("__{k}-{v}"));
    }
    stem
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    write(path, text)
}

/// Writes CSV and JSON for `report` under `dir`; trade links also get a chord edge list.
pub fn write_report(dir: &Path, report: &AggregateReport, cfg: &RunConfig, store_checksum: &str) -> Result<Vec<PathBuf>> {
    let stem = report_stem(report);
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    write(&csv_path, report.to_csv())?;
    write_json(
        &json_path,
        &ReportEnvelope {
            config: cfg.echo(),
            store_checksum: store_checksum.to_string(),
            report: report.clone(),
        },
    )?;
    let mut paths = vec![csv_path, json_path];
    if report.name == "trade_links" {
        let p = dir.join(format!("{stem}.chord.csv"));
        write(&p, chord_edges_csv(report))?;
        paths.push(p);
    }
    Ok(paths)
}

/// Runs a parsed command line and returns the exit status. Fatal errors
/// are returned for the caller to map with [`exit_code`].
pub fn execute(cli: &Cli) -> Result<i32> {
    let cfg = RunConfig::resolve(&cli.config, std::env::var_os(STORE_ENV).map(PathBuf::from))?;
    match &cli.command {
        Command::Ingest { overwrite } => cmd_ingest(&cfg, *overwrite),
        Command::Validate => cmd_validate(&cfg),
        Command::Report { name, params } => cmd_report(&cfg, name, params),
        Command::Plot { name, params } => cmd_plot(&cfg, name, params),
        Command::Synth { command } => match command {
            SynthCommand::Generate { plan, seed, scale } => cmd_synth_generate(&cfg, plan.as_deref(), *seed, *scale),
            SynthCommand::Oracle { check } => cmd_synth_oracle(&cfg, *check),
        },
    }
}

fn discover(cfg: &RunConfig) -> Result<Manifest> {
    discover_files(cfg.input_root()?, EraRule::default())
}

pub fn cmd_ingest(cfg: &RunConfig, overwrite: bool) -> Result<i32> {
    let input = cfg.input_root()?;
    let store_root = cfg.store_root()?;
    let ctx = cfg.ingest_context()?;
    let manifest = discover(cfg)?;
    tracing::info!(input = %input.display(), files = manifest.entries.len(), skipped = manifest.skipped.len(), "discovered");
    let report = ingest_corpus(&manifest, &ctx, store_root, IngestOptions { jobs: cfg.jobs(), overwrite })?;
    tracing::info!(checksum = %report.store_checksum, partitions = report.partitions, "store committed");
    write_json(&cfg.output_dir().join("ingest_report.json"), &report)?;

    let t = &report.totals;
    println!("files       {}", report.files.len());
    println!("partitions  {}", report.partitions);
    println!("rows read   {}", t.rows_read);
    println!("malformed   {}", t.rows_malformed);
    println!("duplicates  {}", t.duplicates_removed);
    println!("samples     {}", t.samples_emitted);
    println!("results     {}", t.results_emitted);
    println!("checksum    {}", report.store_checksum);
    if !report.all_conserved() {
        tracing::error!("row conservation failed");
        return Ok(EXIT_VALIDATION);
    }
    Ok(EXIT_OK)
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<i32> {
    let store = Store::open(cfg.store_root()?)?;
    let out = cfg.output_dir().join("validation");
    if store.is_empty() {
        write_json(&out.join("summary.json"), &serde_json::json!({ "partitions": 0, "mismatches": 0 }))?;
        println!("empty store: nothing to validate");
        return Ok(EXIT_OK);
    }
    let ctx = cfg.ingest_context()?;
    let manifest = discover(cfg)?;
    let reports = with_pool(cfg.jobs(), || validate_store(&store, &manifest.entries, &ctx))??;
    let mut mismatches = 0;
    let mut dirty = 0;
    for (key, r) in &reports {
        mismatches += r.mismatch_count;
        if !r.is_clean() {
            dirty += 1;
            tracing::warn!(partition = %key, mismatches = r.mismatch_count, checksum_failures = r.checksum_failures.len(), "partition differs from sources");
        }
        write_json(&out.join(format!("{}.json", key.to_string().replace('/', "_"))), r)?;
    }
    write_json(
        &out.join("summary.json"),
        &serde_json::json!({ "partitions": reports.len(), "dirty_partitions": dirty, "mismatches": mismatches }),
    )?;
    println!("partitions  {}", reports.len());
    println!("mismatches  {mismatches}");
    Ok(if dirty == 0 { EXIT_OK } else { EXIT_VALIDATION })
}

fn load_dataset(cfg: &RunConfig) -> Result<(Store, Dataset)> {
    let store = Store::open(cfg.store_root()?)?;
    let dict = cfg.grouping_dictionary()?;
    let ds = with_pool(cfg.jobs(), || Dataset::load(&store, dict))??;
    Ok((store, ds))
}

fn compute(cfg: &RunConfig, name: &str, args: &ReportArgs) -> Result<(Store, AggregateReport)> {
    if !REPORT_NAMES.contains(&name) {
        return Err(Error::UnknownReport {
            name: name.to_string(),
            available: REPORT_NAMES.iter().map(|s| s.to_string()).collect(),
        });
    }
    let request = ReportRequest::parse(name, &cfg.report_params(args))?;
    let (store, ds) = load_dataset(cfg)?;
    let report = with_pool(cfg.jobs(), || ds.run(&request))?;
    Ok((store, report))
}

pub fn cmd_report(cfg: &RunConfig, name: &str, args: &ReportArgs) -> Result<i32> {
    let (store, report) = compute(cfg, name, args)?;
    let paths = write_report(&cfg.output_dir().join("reports"), &report, cfg, &store.checksum())?;
    for p in &paths {
        tracing::info!(path = %p.display(), rows = report.rows.len(), "report written");
    }
    print!("{}", report.to_display_table());
    Ok(EXIT_OK)
}

pub fn cmd_plot(cfg: &RunConfig, name: &str, args: &ReportArgs) -> Result<i32> {
    if REPORT_NAMES.contains(&name) && plot_kind(name).is_none() {
        return Err(Error::Unplottable(name.to_string()));
    }
    let (_, report) = compute(cfg, name, args)?;
    let svg = render_svg(&report)?;
    let path = cfg.output_dir().join("plots").join(format!("{}.svg", report_stem(&report)));
    write(&path, svg)?;
    tracing::info!(path = %path.display(), rows = report.rows.len(), "plot written");
    println!("{}", path.display());
    Ok(EXIT_OK)
}

pub fn cmd_synth_generate(cfg: &RunConfig, plan: Option<&Path>, seed: u64, scale: PlanScale) -> Result<i32> {
    let plan = match plan {
        Some(p) => CorpusPlan::from_json(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
        None => match scale {
            PlanScale::Small => CorpusPlan::small(seed),
            PlanScale::Desk => CorpusPlan::desk_scale(seed),
        },
    };
    let input = cfg.input.as_deref().ok_or_else(|| Error::InvalidConfig("no input root (--input)".into()))?;
    let dict = cfg.grouping_dictionary()?;
    let (corpus, ledger) = generate_corpus(&plan, input, &dict)?;
    let out = cfg.output_dir();
    write(&out.join("ledger.json"), ledger.to_json())?;
    write(&out.join("plan.json"), plan.to_json())?;
    tracing::info!(files = corpus.files.len(), results = ledger.totals.results, "corpus generated");
    println!("files       {}", corpus.files.len());
    println!("rows        {}", ledger.totals.rows_read);
    println!("results     {}", ledger.totals.results);
    println!("samples     {}", ledger.totals.samples);
    Ok(EXIT_OK)
}

pub fn cmd_synth_oracle(cfg: &RunConfig, check: bool) -> Result<i32> {
    let ctx = cfg.ingest_context()?;
    let dict = cfg.grouping_dictionary()?;
    let suite = standard_suite();
    let oracle = oracle_aggregate(cfg.input_root()?, &ctx, &dict, &suite)?;
    let dir = cfg.output_dir().join("oracle");
    for r in &oracle.reports {
        write_report(&dir, r, cfg, "")?;
    }
    write_json(&dir.join("files.json"), &oracle.files)?;
    println!("results     {}", oracle.truth.results.len());
    println!("samples     {}", oracle.truth.samples.len());
    if !check {
        return Ok(EXIT_OK);
    }
    let (_, ds) = load_dataset(cfg)?;
    let engine = with_pool(cfg.jobs(), || run_suite(&ds, &suite))?;
    let diffs = compare_suites(&oracle.reports, &engine, FLOAT_TOLERANCE);
    for d in &diffs {
        tracing::warn!(report = %d.report, detail = %d.detail, "engine differs from oracle");
    }
    println!("differences {}", diffs.len());
    Ok(if diffs.is_empty() { EXIT_OK } else { EXIT_VALIDATION })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"store": "a", "year_min": 2001, "top": 5, "jobs": 2}"#).unwrap();
        let args = ConfigArgs {
            config: Some(path),
            store: Some("b".into()),
            top: Some(7),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&args, Some("env".into())).unwrap();
        assert_eq!(cfg.store, Some(PathBuf::from("b")));
        assert_eq!(cfg.year_min, Some(2001));
        assert_eq!(cfg.top, Some(7));
        assert!(cfg.echo().get("jobs").is_none());
    }

    #[test]
    fn env_store_is_the_fallback() {
        let cfg = RunConfig::resolve(&ConfigArgs::default(), Some("env".into())).unwrap();
        assert_eq!(cfg.store, Some(PathBuf::from("env")));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"stroe": "x"}"#, Path::new("c.json")).is_err());
    }

    #[test]
    fn missing_reference_file_fails_early() {
        let args = ConfigArgs {
            synonyms: Some("/nonexistent/syn.csv".into()),
            ..Default::default()
        };
        assert_eq!(exit_code(&RunConfig::resolve(&args, None).unwrap_err()), EXIT_IO);
    }
}
