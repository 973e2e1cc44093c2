//! Acceptance run: one PASS/FAIL line per criterion, written straight to
//! stdout so it survives output capture. Exits nonzero if any criterion fails.
//!
//! `CHEFS_ACCEPTANCE_CORPORA` lowers the number of full-size corpora for
//! quick local runs (default 10). `CHEFS_SMOKE_FILE` points the optional
//! real-file smoke check at a published monitoring file.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chefs::analytics::{run_suite, standard_suite, Dataset, ReportRequest, StrategyGrouping};
use chefs::catalog::GroupingDictionary;
use chefs::ingest::{discover_files, EraRule, IngestContext, Manifest};
use chefs::model::{canonicalize_code, classify_canonical, ComplianceClass, HazardCategory, KNOWN_EVALUATION_CODES};
use chefs::pipeline::{ingest_corpus, with_pool, IngestOptions, IngestReport};
use chefs::report::{compare_suites, round_preserving_sum, AggregateReport, FLOAT_TOLERANCE};
use chefs::store::validate::validate_store;
use chefs::store::{sha256_hex, Store, CORE_RESULTS};
use chefs::synth::{generate_corpus, ledger_requests, oracle_aggregate, CorpusPlan, FilePlan, Ledger, PlantedLink, SchemaVariant};
use rand::seq::SliceRandom;
use rand::SeedableRng;

type Outcome = Result<String, String>;

const CORPUS_BUDGET: Duration = Duration::from_secs(300);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

struct Built {
    _dir: tempfile::TempDir,
    input: PathBuf,
    store: PathBuf,
    ledger: Ledger,
    manifest: Manifest,
    ingest: IngestReport,
}

fn build(plan: &CorpusPlan, jobs: usize) -> Result<Built, String> {
    let dir = tempfile::tempdir().map_err(e2s)?;
    let input = dir.path().join("input");
    let store = dir.path().join("store");
    let (_, ledger) = generate_corpus(plan, &input, &GroupingDictionary::builtin()).map_err(e2s)?;
    let manifest = discover_files(&input, EraRule::default()).map_err(e2s)?;
    let ingest = ingest_corpus(&manifest, &IngestContext::default(), &store, IngestOptions { jobs, overwrite: false }).map_err(e2s)?;
    Ok(Built {
        _dir: dir,
        input,
        store,
        ledger,
        manifest,
        ingest,
    })
}

fn engine_reports(store: &Path, requests: &[ReportRequest], jobs: usize) -> Result<Vec<AggregateReport>, String> {
    let store = Store::open(store).map_err(e2s)?;
    with_pool(jobs, || -> Result<_, String> {
        let ds = Dataset::load(&store, GroupingDictionary::builtin()).map_err(e2s)?;
        Ok(run_suite(&ds, requests))
    })
    .map_err(e2s)?
}

fn first_diffs(diffs: &[chefs::report::ReportDiff]) -> String {
    diffs.iter().take(3).map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}

fn oracle_equivalence() -> Outcome {
    let corpora: u64 = std::env::var("CHEFS_ACCEPTANCE_CORPORA").ok().and_then(|v| v.parse().ok()).unwrap_or(10);
    let suite = standard_suite();
    let mut rows = 0u64;
    let mut slowest = Duration::ZERO;
    let mut phases = String::new();
    for seed in 1..=corpora {
        let started = Instant::now();
        let plan = CorpusPlan::desk_scale(seed);
        let b = build(&plan, 0)?;
        let built = started.elapsed();
        let engine = engine_reports(&b.store, &suite, 0)?;
        let analysed = started.elapsed();
        let oracle = oracle_aggregate(&b.input, &IngestContext::default(), &GroupingDictionary::builtin(), &suite).map_err(e2s)?;
        let elapsed = started.elapsed();
        if elapsed > slowest {
            slowest = elapsed;
            phases = format!(
                "generate+ingest {:.1}s, reports {:.1}s, oracle {:.1}s",
                built.as_secs_f64(),
                (analysed - built).as_secs_f64(),
                (elapsed - analysed).as_secs_f64()
            );
        }

        let diffs = compare_suites(&oracle.reports, &engine, FLOAT_TOLERANCE);
        ensure(diffs.is_empty(), || format!("seed {seed}: engine vs oracle: {}", first_diffs(&diffs)))?;
        let facts: Vec<AggregateReport> = engine.iter().filter(|r| r.name != "sparsity_matrix").cloned().collect();
        let ledger_diffs = compare_suites(&b.ledger.reports, &facts, FLOAT_TOLERANCE);
        ensure(ledger_diffs.is_empty(), || format!("seed {seed}: engine vs ledger: {}", first_diffs(&ledger_diffs)))?;
        ensure(oracle.files == b.ledger.files, || format!("seed {seed}: oracle file counts differ from ledger"))?;
        for (f, t) in b.ingest.files.iter().zip(&b.ledger.files) {
            let s = &f.stats;
            let same = f.rel_path == t.rel_path
                && s.rows_read == t.rows_read
                && s.rows_malformed == t.rows_malformed
                && s.duplicates_removed == t.duplicates_removed
                && s.results_emitted == t.results_emitted;
            ensure(same, || format!("seed {seed}: ingest stats for {} differ from ledger", f.rel_path))?;
        }
        ensure(b.ingest.files.len() == b.ledger.files.len(), || format!("seed {seed}: file count"))?;
        ensure(elapsed < CORPUS_BUDGET, || format!("seed {seed}: took {elapsed:?}"))?;
        rows += b.ledger.totals.rows_read;
    }
    Ok(format!(
        "{corpora} corpora, {rows} rows, {} reports each, slowest {:.1}s ({phases})",
        suite.len(),
        slowest.as_secs_f64()
    ))
}

fn classification() -> Outcome {
    let mut tally: BTreeMap<ComplianceClass, usize> = BTreeMap::new();
    for code in KNOWN_EVALUATION_CODES {
        *tally.entry(classify_canonical(&canonicalize_code(code))).or_default() += 1;
    }
    let want = [
        (ComplianceClass::NonCompliant, 4),
        (ComplianceClass::Compliant, 3),
        (ComplianceClass::NotEvaluated, 1),
        (ComplianceClass::NotDetected, 1),
        (ComplianceClass::OtherKnown, 2),
    ];
    ensure(tally == want.into_iter().collect(), || format!("partition {tally:?}"))?;
    let nc: BTreeSet<String> = KNOWN_EVALUATION_CODES
        .iter()
        .filter(|c| classify_canonical(&canonicalize_code(c)) == ComplianceClass::NonCompliant)
        .map(|c| canonicalize_code(c))
        .collect();
    let expected_nc: BTreeSet<String> = ["greater than max permissible quantities", "non-compliant", "detected", "unsatisfactory"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    ensure(nc == expected_nc, || format!("non-compliant codes {nc:?}"))?;

    use proptest::prelude::*;
    use proptest::test_runner::{Config, TestRunner};
    let mut runner = TestRunner::new(Config {
        cases: 2000,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (0..KNOWN_EVALUATION_CODES.len(), proptest::collection::vec(any::<bool>(), 64), "[ \t]{0,3}", "[ \t]{0,3}", 1..4usize);
    runner
        .run(&strategy, |(i, flips, lead, trail, gap)| {
            let code = KNOWN_EVALUATION_CODES[i];
            let cased: String = code
                .chars()
                .zip(flips.iter().cycle())
                .map(|(c, &up)| if up { c.to_ascii_uppercase() } else { c.to_ascii_lowercase() })
                .collect();
            let spaced = format!("{lead}{}{trail}", cased.split(' ').collect::<Vec<_>>().join(&" ".repeat(gap)));
            let want = classify_canonical(&canonicalize_code(code));
            prop_assert_eq!(classify_canonical(&canonicalize_code(&spaced)), want);
            Ok(())
        })
        .map_err(|e| format!("property: {e}"))?;
    Ok("4/3/1/1/2 partition; 2000 randomized spellings agree".into())
}

fn round_trip() -> Outcome {
    let b = build(&CorpusPlan::small(11), 0)?;
    let ctx = IngestContext::default();
    let store = Store::open(&b.store).map_err(e2s)?;
    let clean = validate_store(&store, &b.manifest.entries, &ctx).map_err(e2s)?;
    let mismatches: u64 = clean.values().map(|r| r.mismatch_count).sum();
    let compared: u64 = clean.values().map(|r| r.cells_compared).sum();
    ensure(mismatches == 0 && clean.values().all(|r| r.is_clean()), || format!("{mismatches} mismatches on a clean store"))?;
    ensure(compared > 0, || "nothing compared".into())?;

    // change one stored result_value
    let partition = &store.partitions[store.partitions.len() / 2];
    let results = partition.read_results().map_err(e2s)?;
    let target = results.len() / 2;
    let victim = &results[target];
    let source = victim.source.clone().ok_or("stored result has no source reference")?;
    let path = partition.table_path(CORE_RESULTS);
    let mut rdr = csv::Reader::from_path(&path).map_err(e2s)?;
    let headers = rdr.headers().map_err(e2s)?.clone();
    let col = headers.iter().position(|h| h == "result_value").ok_or("no result_value column")?;
    let mut records: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>().map_err(e2s)?;
    let mut cells: Vec<String> = records[target].iter().map(str::to_string).collect();
    cells[col] = "987654.321".into();
    records[target] = csv::StringRecord::from(cells);
    let mut w = csv::Writer::from_path(&path).map_err(e2s)?;
    w.write_record(&headers).map_err(e2s)?;
    for r in &records {
        w.write_record(r).map_err(e2s)?;
    }
    w.flush().map_err(e2s)?;
    drop(w);

    let store = Store::open(&b.store).map_err(e2s)?;
    let dirty = validate_store(&store, &b.manifest.entries, &ctx).map_err(e2s)?;
    let found: Vec<_> = dirty.values().flat_map(|r| r.mismatches.iter()).collect();
    let total: u64 = dirty.values().map(|r| r.mismatch_count).sum();
    ensure(total == 1, || format!("{total} mismatches after one mutation: {found:?}"))?;
    let m = found[0];
    ensure(m.file == source.file && m.row == source.row && m.column == "result_value", || {
        format!("reported {}:{}:{}, mutated {}:{}:result_value", m.file, m.row, m.column, source.file, source.row)
    })?;
    Ok(format!("{compared} cells clean; mutation found at {}:{} result_value", m.file, m.row))
}

fn digest_dir(root: &Path) -> Result<String, String> {
    let mut files: Vec<(String, String)> = Vec::new();
    for e in walkdir::WalkDir::new(root).sort_by_file_name() {
        let e = e.map_err(e2s)?;
        if e.file_type().is_file() {
            let rel = e.path().strip_prefix(root).map_err(e2s)?.to_string_lossy().into_owned();
            files.push((rel, sha256_hex(&std::fs::read(e.path()).map_err(e2s)?)));
        }
    }
    Ok(sha256_hex(format!("{files:?}").as_bytes()))
}

fn determinism() -> Outcome {
    let mut plan = CorpusPlan::desk_scale(4);
    for f in &mut plan.files {
        f.rows /= 10;
    }
    let dir = tempfile::tempdir().map_err(e2s)?;
    let input = dir.path().join("input");
    generate_corpus(&plan, &input, &GroupingDictionary::builtin()).map_err(e2s)?;
    let manifest = discover_files(&input, EraRule::default()).map_err(e2s)?;
    let suite = standard_suite();
    let mut reference: Option<(String, String)> = None;
    let mut runs = 0;
    for trial in 0..5u64 {
        for jobs in [1usize, 4, 16] {
            let mut shuffled = manifest.clone();
            shuffled.entries.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(trial * 100 + jobs as u64));
            let store = dir.path().join(format!("store-{trial}-{jobs}"));
            ingest_corpus(&shuffled, &IngestContext::default(), &store, IngestOptions { jobs, overwrite: false }).map_err(e2s)?;
            let reports: String = engine_reports(&store, &suite, jobs)?.iter().map(|r| r.to_json()).collect();
            let got = (digest_dir(&store)?, sha256_hex(reports.as_bytes()));
            match &reference {
                None => reference = Some(got),
                Some(r) => ensure(*r == got, || format!("trial {trial} jobs {jobs} differs"))?,
            }
            std::fs::remove_dir_all(&store).map_err(e2s)?;
            runs += 1;
        }
    }
    Ok(format!("{runs} runs over {} files byte-identical", manifest.entries.len()))
}

fn grouping() -> Outcome {
    let dict = GroupingDictionary::builtin();
    let worked = dict.assign("mtx::all lists::food::eggs and egg products::whole eggs", HazardCategory::PesticideResidues);
    ensure(worked.name() == "Eggs and Egg products", || format!("worked example gave {worked}"))?;
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/grouping_names.csv");
    let mut rdr = csv::Reader::from_path(&fixtures).map_err(e2s)?;
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(e2s)?;
        let got = dict.assign(&rec[0], HazardCategory::ChemicalContaminants);
        ensure(got.name() == &rec[1], || format!("{:?} gave {:?}, expected {:?}", &rec[0], got.name(), &rec[1]))?;
        n += 1;
    }
    ensure(n == 20, || format!("{n} fixtures, expected 20"))?;
    Ok(format!("worked example and {n} fixture names match"))
}

fn link(origin: &str, destination: &str, hazard: HazardCategory, year: i32, samples: u64, nc: u64) -> PlantedLink {
    PlantedLink {
        origin: origin.into(),
        destination: destination.into(),
        hazard,
        year,
        samples,
        noncompliant_samples: nc,
    }
}

fn trade_links() -> Outcome {
    use HazardCategory::*;
    let mut plan = CorpusPlan::small(21);
    plan.unknown_origin_rate = 0.0;
    plan.foreign_origin_rate = 0.0;
    plan.undated_rate = 0.0;
    plan.shared_sample_rate = 0.0;
    plan.max_results_per_sample = [3, 3, 3];
    let file = |hazard, country: &str, year| FilePlan {
        hazard,
        country: country.into(),
        year,
        rows: 1500,
        suffix: None,
        variant: SchemaVariant {
            sample_code: true,
            ..Default::default()
        },
    };
    plan.files = vec![
        file(PesticideResidues, "DE", 2019),
        file(ChemicalContaminants, "DE", 2019),
        file(ChemicalContaminants, "FR", 2018),
        file(VMPR, "IT", 2020),
        file(PesticideResidues, "NL", 2021),
    ];
    plan.planted_links = vec![
        link("CN", "DE", PesticideResidues, 2019, 180, 45),
        link("CN", "DE", ChemicalContaminants, 2019, 30, 0),
        link("TR", "DE", PesticideResidues, 2019, 120, 30),
        link("KH", "FR", ChemicalContaminants, 2018, 140, 35),
        link("US", "FR", ChemicalContaminants, 2018, 100, 40),
        link("BR", "IT", VMPR, 2020, 5200, 52),
        link("IN", "IT", VMPR, 2020, 5000, 50),
        link("ES", "NL", PesticideResidues, 2021, 150, 30),
        link("BE", "NL", PesticideResidues, 2021, 150, 30),
    ];
    plan.validate().map_err(e2s)?;
    let b = build(&plan, 0)?;

    // (origin, destination, samples, noncompliant) in the documented order:
    // ratio desc, samples desc, origin asc, destination asc
    let at_100 = [
        ("KH", "FR", 140, 35),
        ("TR", "DE", 120, 30),
        ("CN", "DE", 210, 45),
        ("BE", "NL", 150, 30),
        ("ES", "NL", 150, 30),
        ("BR", "IT", 5200, 52),
        ("IN", "IT", 5000, 50),
    ];
    let at_5000 = [("BR", "IT", 5200, 52)];
    let requests: Vec<ReportRequest> = [100u64, 5000]
        .into_iter()
        .map(|min_samples| ReportRequest::TradeLinks {
            min_samples,
            top_n: 20,
            year_min: Some(2000),
            year_max: Some(2024),
        })
        .collect();
    let reports = engine_reports(&b.store, &requests, 0)?;
    for ((report, expected), threshold) in reports.iter().zip([&at_100[..], &at_5000[..]]).zip([100u64, 5000]) {
        let col = |n: &str| report.column(n).ok_or(format!("no column {n}"));
        let (o, d, s, nc, r) = (col("origin")?, col("destination")?, col("samples")?, col("noncompliant_samples")?, col("noncompliance_ratio")?);
        let got: Vec<(String, String, i64, i64)> = report
            .rows
            .iter()
            .map(|row| (row[o].to_cell(), row[d].to_cell(), row[s].as_i64().unwrap_or(-1), row[nc].as_i64().unwrap_or(-1)))
            .collect();
        let want: Vec<(String, String, i64, i64)> = expected.iter().map(|&(a, b, s, n)| (a.into(), b.into(), s, n)).collect();
        ensure(got == want, || format!("threshold {threshold}: got {got:?}"))?;
        for row in &report.rows {
            ensure(row[o] != row[d], || "self-link".into())?;
            ensure(row[s].as_i64().unwrap_or(0) as u64 > threshold, || "row at or below threshold".into())?;
            let ratio = row[nc].as_f64().unwrap_or(0.0) / row[s].as_f64().unwrap_or(1.0);
            ensure((row[r].as_f64().unwrap_or(-1.0) - ratio).abs() <= 1e-12, || "ratio".into())?;
        }
    }
    let ledger_diffs = compare_suites(&b.ledger.reports, &engine_reports(&b.store, &ledger_requests(), 0)?, FLOAT_TOLERANCE);
    ensure(ledger_diffs.is_empty(), || first_diffs(&ledger_diffs))?;
    Ok(format!("{} pairs above 100, {} above 5000, order and counts as planted", at_100.len(), at_5000.len()))
}

fn conservation() -> Outcome {
    let mut plan = CorpusPlan::desk_scale(7);
    for f in &mut plan.files {
        f.rows /= 10;
    }
    let b = build(&plan, 0)?;
    for f in &b.ingest.files {
        let s = &f.stats;
        ensure(s.results_emitted + s.duplicates_removed + s.rows_malformed == s.rows_read, || {
            format!("{}: {} + {} + {} != {}", f.rel_path, s.results_emitted, s.duplicates_removed, s.rows_malformed, s.rows_read)
        })?;
    }
    let store = Store::open(&b.store).map_err(e2s)?;
    let grand = store.total_results() as i64;
    let requests = [
        ReportRequest::CountryStats { top_n: 1000 },
        ReportRequest::EvaluationSummary,
        ReportRequest::SamplingStrategyBreakdown { group_by: StrategyGrouping::Overall },
        ReportRequest::SamplingStrategyBreakdown { group_by: StrategyGrouping::PerYear },
        ReportRequest::SamplingStrategyBreakdown { group_by: StrategyGrouping::PerCountryHazard },
    ];
    let reports = engine_reports(&b.store, &requests, 0)?;
    let int = |r: &AggregateReport, row: &[chefs::report::Value], c: &str| r.column(c).and_then(|i| row[i].as_i64()).unwrap_or(-1);

    let countries = &reports[0];
    let mut sum = 0;
    for row in &countries.rows {
        let total = int(countries, row, "total_results");
        let parts = int(countries, row, "cc_results") + int(countries, row, "pest_results") + int(countries, row, "vmpr_results");
        ensure(total == parts, || format!("country hazard split {parts} != {total}"))?;
        sum += total;
    }
    ensure(sum == grand, || format!("country totals {sum} != {grand}"))?;
    let per_hazard: i64 = HazardCategory::ALL
        .iter()
        .map(|h| {
            store
                .partitions
                .iter()
                .filter(|p| p.key.hazard == *h)
                .map(|p| p.manifest.row_counts.core_results as i64)
                .sum::<i64>()
        })
        .sum();
    ensure(per_hazard == grand, || format!("per-hazard {per_hazard} != {grand}"))?;
    let evals: i64 = reports[1].rows.iter().map(|row| int(&reports[1], row, "results")).sum();
    ensure(evals == grand, || format!("evaluation totals {evals} != {grand}"))?;

    let mut groups_checked = 0;
    for r in &reports[2..] {
        let key_cols: Vec<usize> = ["hazard", "year", "sampling_country"].iter().filter_map(|c| r.column(c)).collect();
        let share = r.column("sample_share").ok_or("no sample_share")?;
        let mut groups: BTreeMap<Vec<String>, Vec<f64>> = BTreeMap::new();
        for row in &r.rows {
            let key = key_cols.iter().map(|&c| row[c].to_cell()).collect();
            groups.entry(key).or_default().push(row[share].as_f64().unwrap_or(0.0) * 100.0);
        }
        for (key, pcts) in groups {
            let total: f64 = round_preserving_sum(&pcts, 2).iter().sum();
            ensure((total - 100.0).abs() <= 0.01, || format!("{key:?}: percentages sum to {total}"))?;
            groups_checked += 1;
        }
    }
    Ok(format!(
        "{} files conserved; hazard and country totals = {grand}; {groups_checked} strategy groups sum to 100%",
        b.ingest.files.len()
    ))
}

fn smoke() -> Option<Outcome> {
    let file = PathBuf::from(std::env::var_os("CHEFS_SMOKE_FILE")?);
    Some((|| {
        let dir = tempfile::tempdir().map_err(e2s)?;
        let input = dir.path().join("input");
        std::fs::create_dir_all(&input).map_err(e2s)?;
        let name = file.file_name().ok_or("smoke file has no name")?;
        std::fs::copy(&file, input.join(name)).map_err(e2s)?;
        let manifest = discover_files(&input, EraRule::default()).map_err(e2s)?;
        ensure(manifest.entries.len() == 1, || "smoke file name must follow HAZ_CC_YEAR.csv".into())?;
        let ctx = IngestContext::default();
        let store_root = dir.path().join("store");
        let ingest = ingest_corpus(&manifest, &ctx, &store_root, IngestOptions::default()).map_err(e2s)?;
        ensure(ingest.all_conserved(), || "row conservation".into())?;
        let store = Store::open(&store_root).map_err(e2s)?;
        let samples = store.sample_index().map_err(e2s)?;
        for p in &store.partitions {
            for r in p.read_results().map_err(e2s)? {
                ensure(samples.contains_key(&r.sample_id), || format!("result {} has no sample", r.result_id.0))?;
            }
        }
        let unknown = engine_reports(&store_root, &[ReportRequest::EvaluationSummary], 0)?.remove(0);
        let class = unknown.column("compliance_class").ok_or("no class column")?;
        let code = unknown.column("eval_code").ok_or("no code column")?;
        let unknown_codes: Vec<String> =
            unknown.rows.iter().filter(|r| r[class].to_cell() == "Unknown").map(|r| r[code].to_cell()).collect();
        let validation = validate_store(&store, &manifest.entries, &ctx).map_err(e2s)?;
        ensure(validation.values().all(|r| r.is_clean()), || "round-trip validation failed".into())?;
        Ok(format!(
            "{} results in {} samples; unknown codes reported: {unknown_codes:?}",
            store.total_results(),
            store.total_samples()
        ))
    })())
}

fn main() {
    let criteria: [(u8, &str, fn() -> Outcome); 7] = [
        (1, "oracle equivalence", oracle_equivalence),
        (2, "classification partition", classification),
        (3, "round-trip validation", round_trip),
        (4, "determinism", determinism),
        (5, "grouping fidelity", grouping),
        (6, "trade-link contract", trade_links),
        (7, "conservation", conservation),
    ];
    let mut out = std::io::stdout().lock();
    let mut failed = 0;
    for (id, name, run) in criteria {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => writeln!(out, "PASS {id} {name}: {detail} ({secs:.1}s)"),
            Err(why) => {
                failed += 1;
                writeln!(out, "FAIL {id} {name}: {why} ({secs:.1}s)")
            }
        }
        .expect("stdout");
        out.flush().expect("stdout");
    }
    match smoke() {
        None => writeln!(out, "SKIP 8 real-file smoke: CHEFS_SMOKE_FILE not set"),
        Some(Ok(detail)) => writeln!(out, "PASS 8 real-file smoke: {detail}"),
        Some(Err(why)) => writeln!(out, "FAIL 8 real-file smoke: {why}"),
    }
    .expect("stdout");
    if failed > 0 {
        std::process::exit(1);
    }
}
