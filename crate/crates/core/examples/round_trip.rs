//! Ingest, validate against the sources, then tamper with one stored cell
//! and show where validation points.
//!
//! cargo run --example round_trip

use chefs::catalog::GroupingDictionary;
use chefs::ingest::{discover_files, EraRule, IngestContext};
use chefs::pipeline::{ingest_corpus, IngestOptions};
use chefs::store::validate::validate_store;
use chefs::store::{Store, CORE_RESULTS};
use chefs::synth::{generate_corpus, CorpusPlan};

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let (input, root) = (dir.path().join("input"), dir.path().join("store"));
    generate_corpus(&CorpusPlan::small(2), &input, &GroupingDictionary::builtin())?;
    let manifest = discover_files(&input, EraRule::default())?;
    let ctx = IngestContext::default();
    ingest_corpus(&manifest, &ctx, &root, IngestOptions::default())?;

    let store = Store::open(&root)?;
    for (key, r) in validate_store(&store, &manifest.entries, &ctx)? {
        println!("{key}: {} rows, {} cells, {} mismatches", r.rows_compared, r.cells_compared, r.mismatch_count);
    }

    let table = store.partitions[0].table_path(CORE_RESULTS);
    let text = std::fs::read_to_string(&table)?;
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let col = lines[0].split(',').position(|h| h == "loq").expect("loq column");
    let mut cells: Vec<&str> = lines[1].split(',').collect();
    cells[col] = "42";
    lines[1] = cells.join(",");
    std::fs::write(&table, lines.join("\n") + "\n")?;

    let store = Store::open(&root)?;
    for r in validate_store(&store, &manifest.entries, &ctx)?.values() {
        for m in &r.mismatches {
            println!("mismatch {}:{} {} source={:?} stored={:?}", m.file, m.row, m.column, m.source, m.stored);
        }
        if !r.checksum_failures.is_empty() {
            println!("checksum failures in {}: {:?}", r.partition, r.checksum_failures);
        }
    }
    Ok(())
}
