//! Generate a small synthetic corpus, ingest it and print per-file counters.
//!
//! cargo run --example ingest_corpus

use chefs::catalog::GroupingDictionary;
use chefs::ingest::{discover_files, EraRule, IngestContext};
use chefs::pipeline::{ingest_corpus, IngestOptions};
use chefs::synth::{generate_corpus, CorpusPlan};

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("input");
    generate_corpus(&CorpusPlan::small(1), &input, &GroupingDictionary::builtin())?;

    let manifest = discover_files(&input, EraRule::default())?;
    let report = ingest_corpus(&manifest, &IngestContext::default(), &dir.path().join("store"), IngestOptions::default())?;

    println!("{:<32} {:>6} {:>6} {:>6} {:>7}", "file", "read", "bad", "dups", "results");
    for f in &report.files {
        let s = &f.stats;
        println!("{:<32} {:>6} {:>6} {:>6} {:>7}", f.rel_path, s.rows_read, s.rows_malformed, s.duplicates_removed, s.results_emitted);
    }
    println!("store checksum {}", report.store_checksum);
    Ok(())
}
