use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chefs::report::AggregateReport;
use chefs::synth::Ledger;

fn chefs(args: &[&str], store: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_chefs"));
    cmd.args(args).env_remove("RUST_LOG");
    match store {
        Some(s) => cmd.env("CHEFS_STORE", s),
        None => cmd.env_remove("CHEFS_STORE"),
    };
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Env {
    dir: tempfile::TempDir,
    input: PathBuf,
    store: PathBuf,
    out: PathBuf,
}

/// Generates the small corpus and ingests it through the binary.
fn ingested(seed: &str) -> Env {
    let dir = tempfile::tempdir().unwrap();
    let (input, store, out) = (dir.path().join("in"), dir.path().join("store"), dir.path().join("out"));
    let o = chefs(&["synth", "generate", "--seed", seed, "--input", s(&input), "--output", s(&out)], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = chefs(&["ingest", "--input", s(&input), "--output", s(&out)], Some(&store));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    Env { dir, input, store, out }
}

fn read_report(json: &Path) -> (serde_json::Value, AggregateReport) {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    let report = AggregateReport::from_json(&v["report"].to_string()).unwrap();
    (v, report)
}

fn single(dir: &Path, ext: &str) -> PathBuf {
    let mut found: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(ext) && !p.to_string_lossy().ends_with(&format!(".chord{ext}")))
        .collect();
    assert_eq!(found.len(), 1, "{found:?}");
    found.remove(0)
}

#[test]
fn ingest_stats_match_ledger_and_logs_are_json() {
    let env = ingested("5");
    let ledger = Ledger::from_json(&std::fs::read_to_string(env.out.join("ledger.json")).unwrap()).unwrap();
    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(env.out.join("ingest_report.json")).unwrap()).unwrap();
    let totals = &stats["totals"];
    assert_eq!(totals["rows_read"], ledger.totals.rows_read);
    assert_eq!(totals["rows_malformed"], ledger.totals.rows_malformed);
    assert_eq!(totals["duplicates_removed"], ledger.totals.duplicates_removed);
    assert_eq!(totals["results_emitted"], ledger.totals.results);
    assert_eq!(totals["samples_emitted"], ledger.totals.samples);

    let o = chefs(&["validate", "--input", s(&env.input), "--output", s(&env.out)], Some(&env.store));
    assert_eq!(code(&o), 0);
    for line in String::from_utf8_lossy(&o.stderr).lines() {
        serde_json::from_str::<serde_json::Value>(line).expect("log lines are JSON");
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("mismatches  0"));
}

#[test]
fn colliding_headers_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    std::fs::create_dir_all(&input).unwrap();
    std::fs::write(input.join("PEST_DE_2019.csv"), "sampCountry,sampling_country,prodCode,paramCode\nDE,DE,P1,C1\n").unwrap();
    let o = chefs(&["ingest", "--input", s(&input), "--store", s(&dir.path().join("st"))], None);
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_input_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = chefs(&["ingest", "--input", s(&dir.path().join("nope")), "--store", s(&dir.path().join("st"))], None);
    assert_eq!(code(&o), 1);
}

#[test]
fn corrupted_store_cell_exit_3() {
    let env = ingested("6");
    let part = walkdir::WalkDir::new(&env.store)
        .into_iter()
        .map(|e| e.unwrap().into_path())
        .find(|p| p.ends_with("core_results.csv"))
        .unwrap();
    let text = std::fs::read_to_string(&part).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let col = lines[0].split(',').position(|h| h == "contaminant_id").unwrap();
    let mut cells: Vec<String> = lines[1].split(',').map(str::to_string).collect();
    cells[col] = "TAMPERED".into();
    lines[1] = cells.join(",");
    std::fs::write(&part, lines.join("\n") + "\n").unwrap();

    let o = chefs(&["validate", "--input", s(&env.input), "--output", s(&env.out)], Some(&env.store));
    assert_eq!(code(&o), 3);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(env.out.join("validation/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["mismatches"], 1);
}

#[test]
fn empty_store_validates() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("st");
    std::fs::create_dir_all(&store).unwrap();
    let o = chefs(&["validate", "--output", s(&dir.path().join("out"))], Some(&store));
    assert_eq!(code(&o), 0);
}

#[test]
fn reports_carry_provenance_and_follow_contracts() {
    let env = ingested("7");
    let reports = env.out.join("reports");

    let o = chefs(&["report", "top_contaminants", "--hazard", "CC", "--n", "10", "--output", s(&env.out)], Some(&env.store));
    assert_eq!(code(&o), 0);
    let (envelope, top) = read_report(&single(&reports, ".json"));
    assert!(envelope["config"].is_object() && envelope["config"].get("jobs").is_none());
    assert_eq!(envelope["store_checksum"].as_str().unwrap().len(), 64);
    assert_eq!(top.rows.len(), 10);
    let counts: Vec<i64> = top.column_values("total_results").iter().map(|v| v.as_i64().unwrap()).collect();
    assert!(counts.windows(2).all(|w| w[0] >= w[1]));

    let ledger = Ledger::from_json(&std::fs::read_to_string(env.out.join("ledger.json")).unwrap()).unwrap();
    let vmpr = env.dir.path().join("vmpr");
    let o = chefs(&["report", "yearly_trend", "--hazard", "VMPR", "--output", s(&vmpr)], Some(&env.store));
    assert_eq!(code(&o), 0);
    let (_, trend) = read_report(&single(&vmpr.join("reports"), ".json"));
    let expected = ledger.report("yearly_trend", &trend.params).cloned().unwrap_or_else(|| {
        // the ledger holds the all-hazard trend; filter it down
        let all = ledger.reports.iter().find(|r| r.name == "yearly_trend").unwrap();
        let h = all.column("hazard").unwrap();
        let mut r = all.clone();
        r.params = trend.params.clone();
        r.rows.retain(|row| row[h].to_cell() == "VMPR");
        r
    });
    assert!(!trend.rows.is_empty());
    expected.compare(&trend, 1e-12).unwrap();

    let trade = env.dir.path().join("trade");
    let o = chefs(&["report", "trade_links", "--min-samples", "5000", "--top", "20", "--output", s(&trade)], Some(&env.store));
    assert_eq!(code(&o), 0);
    let (_, links) = read_report(&single(&trade.join("reports"), ".json"));
    assert!(links.rows.len() <= 20);
    let (o_col, d_col) = (links.column("origin").unwrap(), links.column("destination").unwrap());
    assert!(links.rows.iter().all(|r| r[o_col] != r[d_col]));

    let o = chefs(&["report", "no_such_report"], Some(&env.store));
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("country_stats"));
}

#[test]
fn reports_are_identical_across_runs_and_jobs() {
    let env = ingested("8");
    let mut bytes = Vec::new();
    let out = env.dir.path().join("rep");
    for jobs in ["1", "4", "1"] {
        let o = chefs(&["report", "country_stats", "--jobs", jobs, "--output", s(&out)], Some(&env.store));
        assert_eq!(code(&o), 0);
        let dir = out.join("reports");
        bytes.push((std::fs::read(single(&dir, ".csv")).unwrap(), std::fs::read(single(&dir, ".json")).unwrap()));
    }
    assert_eq!(bytes[0], bytes[1]);
    assert_eq!(bytes[0], bytes[2]);
}

fn attr(tag: &str, name: &str) -> Option<String> {
    let start = tag.find(&format!(" {name}=\""))? + name.len() + 3;
    Some(tag[start..].split('"').next()?.to_string())
}

#[test]
fn plots_embed_scrapable_values() {
    let env = ingested("9");
    let o = chefs(&["report", "top_contaminants", "--output", s(&env.out)], Some(&env.store));
    assert_eq!(code(&o), 0);
    let (_, top) = read_report(&single(&env.out.join("reports"), ".json"));
    let o = chefs(&["plot", "top_contaminants", "--output", s(&env.out)], Some(&env.store));
    assert_eq!(code(&o), 0);
    let svg = std::fs::read_to_string(single(&env.out.join("plots"), ".svg")).unwrap();
    let bars: Vec<String> = svg.lines().filter(|l| l.starts_with("<rect class=\"bar\"")).filter_map(|l| attr(l, "data-value")).collect();
    let expected: Vec<String> = top.column_values("total_results").iter().map(|v| v.to_cell()).collect();
    assert_eq!(bars.len(), 10);
    assert_eq!(bars, expected);

    let trend_out = env.dir.path().join("trend");
    let o = chefs(&["report", "yearly_trend", "--output", s(&trend_out)], Some(&env.store));
    assert_eq!(code(&o), 0);
    let (_, trend) = read_report(&single(&trend_out.join("reports"), ".json"));
    let o = chefs(&["plot", "yearly_trend", "--output", s(&trend_out)], Some(&env.store));
    assert_eq!(code(&o), 0);
    let svg = std::fs::read_to_string(single(&trend_out.join("plots"), ".svg")).unwrap();
    let lines: Vec<&str> = svg.lines().filter(|l| l.starts_with("<polyline")).collect();
    let series: std::collections::BTreeSet<String> = trend.column_values("hazard").iter().map(|v| v.to_cell()).collect();
    assert_eq!(lines.len(), series.len());
    let points: usize = lines.iter().map(|l| attr(l, "points").unwrap().split(' ').count()).sum();
    assert_eq!(points, trend.rows.len());

    let empty_out = env.dir.path().join("empty");
    let o = chefs(&["plot", "trade_links", "--min-samples", "1000000", "--output", s(&empty_out)], Some(&env.store));
    assert_eq!(code(&o), 0);
    assert!(std::fs::read_to_string(single(&empty_out.join("plots"), ".svg")).unwrap().contains("no data"));

    let o = chefs(&["plot", "sparsity_matrix"], Some(&env.store));
    assert_eq!(code(&o), 1);
}

#[test]
fn oracle_check_agrees_with_store() {
    let env = ingested("10");
    let o = chefs(&["synth", "oracle", "--check", "--input", s(&env.input), "--output", s(&env.out)], Some(&env.store));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("differences 0"));
}

#[test]
fn config_file_keys_apply_and_flags_win() {
    let env = ingested("12");
    let cfg = env.dir.path().join("run.json");
    std::fs::write(
        &cfg,
        serde_json::json!({ "store": "/nonexistent/store", "top": 2, "output": s(&env.dir.path().join("from_file")) }).to_string(),
    )
    .unwrap();
    let o = chefs(&["report", "country_stats", "--config", s(&cfg), "--store", s(&env.store)], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (envelope, report) = read_report(&single(&env.dir.path().join("from_file/reports"), ".json"));
    assert!(report.rows.len() <= 2);
    assert_eq!(envelope["config"]["store"], s(&env.store));
}
