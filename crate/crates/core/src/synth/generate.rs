use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ledger::{FileTruth, Ledger, Truth, TruthResult, TruthSample};
use super::plan::{CorpusPlan, FilePlan, PlantedLink, SchemaVariant};
use crate::catalog::{Era, GroupingDictionary};
use crate::error::{Error, Result};
use crate::ingest::EraRule;
use crate::model::{HazardCategory, SamplingStrategy};

/// Evaluation codes as printed, with their canonical form and whether they
/// are above legal limits.
const NONCOMPLIANT_CODES: [&str; 4] = [
    "Greater than max permissible quantities",
    "Non-compliant",
    "Detected",
    "Unsatisfactory",
];

/// (printed code, relative weight)
const OTHER_CODES: [(&str, u32); 7] = [
    ("Less than or equal to max permissible quantities", 40),
    ("Not detected", 30),
    ("Compliant", 10),
    ("Compliant due to measurement uncertainty", 2),
    ("Result not evaluated", 10),
    ("Acceptable", 4),
    ("Satisfactory", 4),
];

const UNKNOWN_CODES: [&str; 3] = ["pending review", "see remarks", "NA"];

/// (printed strategy, parsed strategy, relative weight)
const STRATEGIES: [(&str, SamplingStrategy, u32); 11] = [
    ("Objective sampling", SamplingStrategy::Objective, 35),
    ("random sampling", SamplingStrategy::Objective, 10),
    ("Selective sampling", SamplingStrategy::Selective, 15),
    ("risk-based sampling", SamplingStrategy::Selective, 5),
    ("Suspect sampling", SamplingStrategy::Suspect, 6),
    ("Convenient sampling", SamplingStrategy::Convenient, 4),
    ("Other", SamplingStrategy::Other, 3),
    ("Not specified", SamplingStrategy::NotSpecified, 5),
    ("", SamplingStrategy::NotSpecified, 3),
    ("N/A", SamplingStrategy::NotSpecified, 2),
    ("census sampling", SamplingStrategy::NotSpecified, 1),
];

const UNKNOWN_ORIGIN_CELLS: [&str; 5] = ["", "NA", "UNKNOWN", "unknown", "null"];

/// Canonical variables a file may carry, in default column order.
const COLUMNS: [Col; 16] = [
    Col::SampleCode,
    Col::SamplingCountry,
    Col::Origin,
    Col::ProductId,
    Col::ProductName,
    Col::Year,
    Col::Date,
    Col::Strategy,
    Col::ContaminantId,
    Col::ContaminantName,
    Col::Value,
    Col::Loq,
    Col::Unit,
    Col::Eval,
    Col::AnalysisDate,
    Col::Extra,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Col {
    SampleCode,
    SamplingCountry,
    Origin,
    ProductId,
    ProductName,
    Year,
    Date,
    Strategy,
    ContaminantId,
    ContaminantName,
    Value,
    Loq,
    Unit,
    Eval,
    AnalysisDate,
    Extra,
}

impl Col {
    fn present(self, v: &SchemaVariant) -> bool {
        match self {
            Col::SampleCode => v.sample_code,
            Col::SamplingCountry => !v.drop_sampling_country,
            Col::Origin => !v.drop_origin,
            Col::ProductName | Col::ContaminantName => !v.drop_names,
            Col::Year => !v.date_only,
            Col::Extra => v.extra_column,
            _ => true,
        }
    }

    fn header(self, era: Era, v: &SchemaVariant) -> &'static str {
        if v.canonical_headers {
            return match self {
                Col::SampleCode => "Sample_Code",
                Col::SamplingCountry => "SAMPLING_COUNTRY",
                Col::Origin => "origin_country",
                Col::ProductId => "Product_ID",
                Col::ProductName => "product_full_name",
                Col::Year => "Sampling_Year",
                Col::Date => "sampling_date",
                Col::Strategy => "sampling_strategy",
                Col::ContaminantId => "CONTAMINANT_ID",
                Col::ContaminantName => "contaminant_full_name",
                Col::Value => "result_value",
                Col::Loq => "LOQ",
                Col::Unit => "result_unit",
                Col::Eval => "Eval_Code",
                Col::AnalysisDate => "analysis_date",
                Col::Extra => "lab_remark",
            };
        }
        let ssd2 = era == Era::Ssd2;
        let alt = v.alt_synonyms;
        match self {
            Col::SampleCode => {
                if ssd2 && !alt {
                    "sampCode"
                } else {
                    "sampId"
                }
            }
            Col::SamplingCountry => {
                if ssd2 && alt {
                    "sampCountryCode"
                } else {
                    "sampCountry"
                }
            }
            Col::Origin => {
                if ssd2 && alt {
                    "origCountryCode"
                } else {
                    "origCountry"
                }
            }
            Col::ProductId => {
                if ssd2 {
                    "sampMatCode"
                } else {
                    "prodCode"
                }
            }
            Col::ProductName => {
                if ssd2 {
                    "sampMatText"
                } else {
                    "prodName"
                }
            }
            Col::Year => "sampY",
            Col::Date => "sampDate",
            Col::Strategy => "sampStrategy",
            Col::ContaminantId => "paramCode",
            Col::ContaminantName => {
                if ssd2 {
                    "paramText"
                } else {
                    "paramName"
                }
            }
            Col::Value => "resVal",
            Col::Loq => "resLOQ",
            Col::Unit => "resUnit",
            Col::Eval => {
                if alt {
                    "evalcode_id"
                } else {
                    "evalCode"
                }
            }
            Col::AnalysisDate => "analysisDate",
            Col::Extra => "labRemark",
        }
    }
}

/// Sample-level cells as written, plus the truth they decode to.
#[derive(Debug, Clone)]
struct SampleSpec {
    cells: HashMap<Col, String>,
    truth: TruthSample,
    hazards: Vec<HazardCategory>,
}

/// One emitted data row and, for well-formed unique rows, its truth.
struct Row {
    cells: Vec<String>,
}

/// Files written by the generator and the truth behind them.
#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub root: PathBuf,
    pub files: Vec<PathBuf>,
    pub truth: Truth,
}

fn weighted<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T], weight: impl Fn(&T) -> u32) -> &'a T {
    let total: u32 = items.iter().map(&weight).sum();
    let mut pick = rng.gen_range(0..total);
    for it in items {
        let w = weight(it);
        if pick < w {
            return it;
        }
        pick -= w;
    }
    unreachable!("weights are positive")
}

/// Random case and padding that canonicalization must undo.
fn decorate(rng: &mut ChaCha8Rng, code: &str) -> String {
    let mut s = match rng.gen_range(0..6) {
        0 => code.to_uppercase(),
        1 => code.to_lowercase(),
        2 => code.replace(' ', "  "),
        _ => code.to_string(),
    };
    if rng.gen_bool(0.1) {
        s = format!(" {s} ");
    }
    s
}

fn canonical(code: &str) -> String {
    code.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn random_date(rng: &mut ChaCha8Rng, year: i32) -> String {
    let month = rng.gen_range(1..=12);
    let day = rng.gen_range(1..=28);
    format!("{year:04}-{month:02}-{day:02}")
}

struct Generator<'a> {
    plan: &'a CorpusPlan,
    rng: ChaCha8Rng,
    era_rule: EraRule,
    truth: Truth,
    strings: HashMap<String, Arc<str>>,
    /// Code-keyed samples available for reuse, by (country, year, signature).
    shared: HashMap<(String, i32, (bool, bool, bool, bool, bool)), Vec<usize>>,
    specs: Vec<SampleSpec>,
    /// Canonical-cell rows of earlier files, per partition, for cross-file
    /// duplicates.
    partition_rows: HashMap<(HazardCategory, String, i32), Vec<HashMap<Col, String>>>,
    next_code: u64,
}

impl<'a> Generator<'a> {
    fn intern(&mut self, s: &str) -> Arc<str> {
        if let Some(a) = self.strings.get(s) {
            return a.clone();
        }
        let a: Arc<str> = Arc::from(s);
        self.strings.insert(s.to_string(), a.clone());
        a
    }

    fn new_sample(&mut self, file: &FilePlan, rel_path: &str, origin: Option<&str>) -> SampleSpec {
        let v = &file.variant;
        let rng = &mut self.rng;
        let plan = self.plan;
        let mut cells = HashMap::new();

        let key = if v.sample_code {
            self.next_code += 1;
            let code = format!("S{:x}-{:07}", plan.seed, self.next_code);
            cells.insert(Col::SampleCode, code.clone());
            code
        } else {
            // content-keyed; the key only has to be unique in the truth
            format!("{rel_path}#{}", self.specs.len())
        };

        let country = file.country.clone();
        if !v.drop_sampling_country {
            let cell = if rng.gen_bool(0.1) { country.to_lowercase() } else { country.clone() };
            cells.insert(Col::SamplingCountry, cell);
        }

        let origin_truth = if v.drop_origin {
            crate::model::UNKNOWN_COUNTRY.to_string()
        } else {
            let (cell, truth) = match origin {
                Some(o) => (o.to_string(), o.to_string()),
                None => {
                    let u: f64 = rng.gen();
                    if u < plan.unknown_origin_rate {
                        let c = UNKNOWN_ORIGIN_CELLS[rng.gen_range(0..UNKNOWN_ORIGIN_CELLS.len())];
                        (c.to_string(), crate::model::UNKNOWN_COUNTRY.to_string())
                    } else if u < plan.unknown_origin_rate + plan.foreign_origin_rate {
                        let foreign: Vec<&String> = plan.countries.iter().filter(|c| **c != country).collect();
                        match foreign.choose(rng) {
                            Some(c) => ((*c).clone(), (*c).clone()),
                            None => (country.clone(), country.clone()),
                        }
                    } else {
                        (country.clone(), country.clone())
                    }
                }
            };
            let cell = if rng.gen_bool(0.05) { cell.to_lowercase() } else { cell };
            cells.insert(Col::Origin, cell);
            truth
        };

        // skewed product choice so rankings have a head and a tail
        let u: f64 = rng.gen();
        let product = &plan.products[((u * u) * plan.products.len() as f64) as usize];
        cells.insert(Col::ProductId, product.id.clone());
        let product_name = if v.drop_names {
            product.id.clone()
        } else {
            cells.insert(Col::ProductName, product.full_name.clone());
            product.full_name.clone()
        };

        let sample_year = if rng.gen_bool(0.1) { file.year - 1 } else { file.year };
        // content-keyed files keep every sample dated so neighbours differ
        let undated = v.sample_code && rng.gen_bool(plan.undated_rate);
        let year = if undated {
            if !v.date_only {
                cells.insert(Col::Year, String::new());
            }
            cells.insert(Col::Date, String::new());
            None
        } else {
            if !v.date_only {
                cells.insert(Col::Year, sample_year.to_string());
            }
            let with_date = v.date_only || !v.sample_code || rng.gen_bool(0.5);
            let date = if with_date {
                let mut d = random_date(rng, sample_year);
                if !v.sample_code {
                    if let Some(prev) = self.specs.last().and_then(|s| s.cells.get(&Col::Date)) {
                        while d == *prev {
                            d = random_date(rng, sample_year);
                        }
                    }
                }
                if rng.gen_bool(0.05) {
                    d.push_str("T10:30:00");
                }
                d
            } else {
                String::new()
            };
            cells.insert(Col::Date, date);
            Some(sample_year)
        };

        let (text, strategy, _) = *weighted(rng, &STRATEGIES, |s| s.2);
        cells.insert(Col::Strategy, text.to_string());

        SampleSpec {
            cells,
            truth: TruthSample {
                key,
                product_id: product.id.clone(),
                product_name,
                origin: origin_truth,
                sampling_country: country,
                year,
                strategy,
            },
            hazards: Vec::new(),
        }
    }

    fn eval_code(&mut self, force: Option<bool>) -> (String, String) {
        let rng = &mut self.rng;
        let nc = match force {
            Some(f) => f,
            None => {
                if rng.gen_bool(self.plan.unknown_eval_rate) {
                    let c = UNKNOWN_CODES[rng.gen_range(0..UNKNOWN_CODES.len())];
                    let canon = if c == "NA" { String::new() } else { canonical(c) };
                    return (c.to_string(), canon);
                }
                rng.gen_bool(self.plan.noncompliance_rate)
            }
        };
        let printed = if nc {
            NONCOMPLIANT_CODES[rng.gen_range(0..NONCOMPLIANT_CODES.len())]
        } else {
            weighted(rng, &OTHER_CODES, |c| c.1).0
        };
        (decorate(rng, printed), canonical(printed))
    }

    /// Emits the result rows of one sample; `nc_plan` forces sample-level
    /// compliance (Some(true): first result non-compliant, Some(false):
    /// none).
    fn sample_rows(
        &mut self,
        file: &FilePlan,
        spec_index: usize,
        n: usize,
        nc_plan: Option<bool>,
        out: &mut Vec<HashMap<Col, String>>,
    ) {
        let h = file.hazard;
        let plan = self.plan;
        let pool: Vec<usize> = (0..plan.contaminants.len())
            .filter(|&i| plan.contaminants[i].hazards.contains(&h))
            .collect();
        let picks = rand::seq::index::sample(&mut self.rng, pool.len(), n.min(pool.len()));
        for (j, pi) in picks.into_iter().enumerate() {
            let c = &plan.contaminants[pool[pi]];
            let force = match nc_plan {
                Some(true) => Some(j == 0),
                Some(false) => Some(false),
                None => None,
            };
            let (printed, canon) = self.eval_code(force);
            let rng = &mut self.rng;
            let mut cells = self.specs[spec_index].cells.clone();
            cells.insert(Col::ContaminantId, c.id.clone());
            let cname = if file.variant.drop_names {
                c.id.clone()
            } else {
                cells.insert(Col::ContaminantName, c.full_name.clone());
                c.full_name.clone()
            };
            let value = if rng.gen_bool(0.02) {
                "<LOQ".to_string()
            } else {
                format!("{:.4}", rng.gen_range(0.0..5.0f64))
            };
            cells.insert(Col::Value, value);
            cells.insert(Col::Loq, ["0.01", "0.005", "0.1"][rng.gen_range(0..3)].to_string());
            cells.insert(Col::Unit, "mg/kg".to_string());
            cells.insert(Col::Eval, printed);
            cells.insert(Col::AnalysisDate, random_date(rng, file.year));
            if file.variant.extra_column {
                let remark = if rng.gen_bool(0.3) { "re-analysed" } else { "" };
                cells.insert(Col::Extra, remark.to_string());
            }
            let hazard = h;
            let result = TruthResult {
                sample: spec_index,
                hazard,
                contaminant_id: self.intern(&c.id),
                contaminant_name: self.intern(&cname),
                eval: self.intern(&canon),
            };
            self.truth.results.push(result);
            out.push(cells);
        }
    }

    fn file(&mut self, file: &FilePlan, root: &Path, planted: &[&PlantedLink]) -> Result<(PathBuf, FileTruth)> {
        let rel_path = file.file_name();
        let era = self.era_rule.era_for(file.year);
        let v = file.variant.clone();
        let mut columns: Vec<Col> = COLUMNS.into_iter().filter(|c| c.present(&v)).collect();
        if v.shuffle_columns {
            columns.shuffle(&mut self.rng);
        }

        let dups = (file.rows as f64 * self.plan.duplicate_rate).round() as u64;
        let malformed = (file.rows as f64 * self.plan.malformed_rate).round() as u64;
        let unique_budget = file.rows - dups - malformed;
        let max_per = self.plan.max_results_per_sample[file.hazard.index()] as u64;

        let mut unique: Vec<HashMap<Col, String>> = Vec::new();
        let results_before = self.truth.results.len();

        for link in planted {
            for i in 0..link.samples {
                let spec = self.new_sample(file, &rel_path, Some(&link.origin));
                let idx = self.push_spec(spec, file);
                let n = self.rng.gen_range(1..=max_per) as usize;
                self.sample_rows(file, idx, n, Some(i < link.noncompliant_samples), &mut unique);
            }
        }
        let planted_rows = unique.len() as u64;
        let share_key = (file.country.clone(), file.year, v.sample_signature());
        while (unique.len() as u64) < planted_rows + unique_budget {
            let left = planted_rows + unique_budget - unique.len() as u64;
            let n = self.rng.gen_range(1..=max_per).min(left) as usize;
            let reuse = if v.sample_code && self.rng.gen_bool(self.plan.shared_sample_rate) {
                self.shared
                    .get(&share_key)
                    .and_then(|c| c.iter().copied().find(|&i| !self.specs[i].hazards.contains(&file.hazard)))
            } else {
                None
            };
            let idx = match reuse {
                Some(i) => {
                    self.specs[i].hazards.push(file.hazard);
                    i
                }
                None => {
                    let spec = self.new_sample(file, &rel_path, None);
                    self.push_spec(spec, file)
                }
            };
            if reuse.is_none() && v.sample_code {
                self.shared.entry(share_key.clone()).or_default().push(idx);
            }
            self.sample_rows(file, idx, n, None, &mut unique);
        }
        debug_assert_eq!(self.truth.results.len() - results_before, unique.len());

        // insertions after a unique-row index (usize::MAX = before the first row)
        let mut inserts: Vec<(usize, Vec<String>)> = Vec::new();
        let render = |cells: &HashMap<Col, String>| -> Vec<String> {
            columns.iter().map(|c| cells.get(c).cloned().unwrap_or_default()).collect()
        };
        let pkey = (file.hazard, file.country.clone(), file.year);
        let earlier = self.partition_rows.get(&pkey).map(|r| r.len()).unwrap_or(0);
        let mut dups_written = 0u64;
        for _ in 0..dups {
            if unique.is_empty() {
                break;
            }
            dups_written += 1;
            if v.sample_code && earlier > 0 && self.rng.gen_bool(0.3) {
                let src = &self.partition_rows[&pkey][self.rng.gen_range(0..earlier)];
                let at = self.rng.gen_range(0..unique.len());
                inserts.push((at, render(src)));
            } else {
                let i = self.rng.gen_range(0..unique.len());
                let at = if v.sample_code { self.rng.gen_range(i..unique.len()) } else { i };
                inserts.push((at, render(&unique[i])));
            }
        }
        for _ in 0..malformed {
            let at = if unique.is_empty() { usize::MAX } else { self.rng.gen_range(0..unique.len()) };
            let mut cells = if unique.is_empty() {
                vec![String::new(); columns.len()]
            } else {
                render(&unique[self.rng.gen_range(0..unique.len())])
            };
            match self.rng.gen_range(0..4) {
                0 => {
                    let p = columns.iter().position(|c| *c == Col::ContaminantId).expect("contaminant column");
                    cells[p] = String::new();
                }
                1 => {
                    let p = columns.iter().position(|c| *c == Col::ProductId).expect("product column");
                    cells[p] = "NA".into();
                }
                2 => {
                    cells.pop();
                }
                _ => cells.push("stray".into()),
            }
            inserts.push((at, cells));
        }
        inserts.sort_by_key(|(at, _)| if *at == usize::MAX { 0 } else { *at + 1 });

        let header: Vec<&str> = columns.iter().map(|c| c.header(era, &v)).collect();
        let mut rows: Vec<Row> = Vec::with_capacity(file.rows as usize);
        let mut ins = inserts.into_iter().peekable();
        while let Some((at, _)) = ins.peek() {
            if *at != usize::MAX {
                break;
            }
            rows.push(Row { cells: ins.next().expect("peeked").1 });
        }
        for (i, cells) in unique.iter().enumerate() {
            rows.push(Row { cells: render(cells) });
            while ins.peek().is_some_and(|(at, _)| *at == i) {
                rows.push(Row { cells: ins.next().expect("peeked").1 });
            }
        }
        if v.sample_code {
            self.partition_rows.entry(pkey).or_default().extend(unique.iter().cloned());
        }

        let path = root.join(&rel_path);
        write_file(&path, &header, &rows, &v)?;
        let key = crate::store::PartitionKey {
            hazard: file.hazard,
            country: file.country.clone(),
            year: file.year,
        };
        Ok((
            path,
            FileTruth {
                rel_path,
                partition: key.to_string(),
                rows_read: rows.len() as u64,
                rows_malformed: malformed,
                duplicates_removed: dups_written,
                results_emitted: unique.len() as u64,
            },
        ))
    }

    fn push_spec(&mut self, mut spec: SampleSpec, file: &FilePlan) -> usize {
        spec.hazards.push(file.hazard);
        self.truth.samples.push(spec.truth.clone());
        self.specs.push(spec);
        self.specs.len() - 1
    }
}

fn write_file(path: &Path, header: &[&str], rows: &[Row], v: &SchemaVariant) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    if v.bom {
        buf.extend_from_slice("\u{feff}".as_bytes());
    }
    {
        let mut w = csv::WriterBuilder::new()
            .flexible(true)
            .terminator(if v.crlf { csv::Terminator::CRLF } else { csv::Terminator::Any(b'\n') })
            .from_writer(&mut buf);
        w.write_record(header).map_err(|e| Error::csv(path, e))?;
        for r in rows {
            w.write_record(&r.cells).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    if v.gzip {
        let mut gz = flate2::write::GzEncoder::new(out, flate2::Compression::fast());
        gz.write_all(&buf).map_err(|e| Error::io(path, e))?;
        out = gz.finish().map_err(|e| Error::io(path, e))?;
    } else {
        out.write_all(&buf).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Writes the corpus described by `plan` into `out_dir` (created if needed;
/// must not already hold corpus files) and returns the files, the truth and
/// the ledger. Same plan, same bytes.
pub fn generate_corpus(plan: &CorpusPlan, out_dir: &Path, dictionary: &GroupingDictionary) -> Result<(GeneratedCorpus, Ledger)> {
    plan.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut order: Vec<&FilePlan> = plan.files.iter().collect();
    order.sort_by(|a, b| (a.hazard, &a.country, a.year, a.file_name()).cmp(&(b.hazard, &b.country, b.year, b.file_name())));
    for f in &order {
        let p = out_dir.join(f.file_name());
        if p.exists() {
            return Err(Error::InvalidPlan(format!("{} already exists", p.display())));
        }
    }

    let mut g = Generator {
        plan,
        rng: ChaCha8Rng::seed_from_u64(plan.seed),
        era_rule: EraRule::default(),
        truth: Truth::default(),
        strings: HashMap::new(),
        shared: HashMap::new(),
        specs: Vec::new(),
        partition_rows: HashMap::new(),
        next_code: 0,
    };
    let mut files = Vec::new();
    let mut file_truths = Vec::new();
    for f in order {
        let planted: Vec<&PlantedLink> = if f.suffix.is_none() {
            plan.planted_links
                .iter()
                .filter(|l| l.hazard == f.hazard && l.destination == f.country && l.year == f.year)
                .collect()
        } else {
            Vec::new()
        };
        let (path, t) = g.file(f, out_dir, &planted)?;
        files.push(path);
        file_truths.push(t);
    }
    let truth = g.truth;
    let ledger = Ledger::build(plan.seed, file_truths, &truth, dictionary);
    Ok((
        GeneratedCorpus {
            root: out_dir.to_path_buf(),
            files,
            truth,
        },
        ledger,
    ))
}
