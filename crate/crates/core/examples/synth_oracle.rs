//! Generate a corpus, then check the ledger, the file-level oracle and the
//! store-backed engine against each other.
//!
//! cargo run --release --example synth_oracle [seed]

use chefs::analytics::{run_suite, standard_suite, Dataset};
use chefs::catalog::GroupingDictionary;
use chefs::ingest::{discover_files, EraRule, IngestContext};
use chefs::pipeline::{ingest_corpus, IngestOptions};
use chefs::report::{compare_suites, FLOAT_TOLERANCE};
use chefs::store::Store;
use chefs::synth::{generate_corpus, oracle_aggregate, CorpusPlan};

fn main() -> anyhow::Result<()> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let dir = tempfile::tempdir()?;
    let (input, root) = (dir.path().join("input"), dir.path().join("store"));
    let dict = GroupingDictionary::builtin();
    let (corpus, ledger) = generate_corpus(&CorpusPlan::small(seed), &input, &dict)?;
    println!("{} files, {} results, {} samples", corpus.files.len(), ledger.totals.results, ledger.totals.samples);

    let ctx = IngestContext::default();
    ingest_corpus(&discover_files(&input, EraRule::default())?, &ctx, &root, IngestOptions::default())?;
    let suite = standard_suite();
    let engine = run_suite(&Dataset::load(&Store::open(&root)?, dict.clone())?, &suite);
    let oracle = oracle_aggregate(&input, &ctx, &dict, &suite)?;

    let diffs = compare_suites(&oracle.reports, &engine, FLOAT_TOLERANCE);
    println!("{} reports compared, {} differences", suite.len(), diffs.len());
    for d in diffs.iter().take(5) {
        println!("  {d}");
    }
    Ok(())
}
