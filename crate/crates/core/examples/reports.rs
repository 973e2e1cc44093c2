//! Run a few analytics reports over a freshly ingested corpus.
//!
//! cargo run --example reports

use chefs::analytics::{Dataset, ReportParams, ReportRequest};
use chefs::catalog::GroupingDictionary;
use chefs::ingest::{discover_files, EraRule, IngestContext};
use chefs::pipeline::{ingest_corpus, IngestOptions};
use chefs::store::Store;
use chefs::synth::{generate_corpus, CorpusPlan};

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let (input, root) = (dir.path().join("input"), dir.path().join("store"));
    generate_corpus(&CorpusPlan::small(3), &input, &GroupingDictionary::builtin())?;
    let manifest = discover_files(&input, EraRule::default())?;
    ingest_corpus(&manifest, &IngestContext::default(), &root, IngestOptions::default())?;

    let ds = Dataset::load(&Store::open(&root)?, GroupingDictionary::builtin())?;
    let params = ReportParams {
        hazard: Some("PEST".into()),
        n: Some(5),
        ..Default::default()
    };
    for name in ["top_contaminants", "yearly_trend", "evaluation_summary", "product_category_stats"] {
        let report = ds.run(&ReportRequest::parse(name, &params)?);
        println!("== {} {:?}", report.name, report.params);
        print!("{}", report.to_display_table());
    }
    Ok(())
}
