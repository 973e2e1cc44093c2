//! Render a trend, a ranking and the trade chord as SVG files.
//!
//! cargo run --example plot [out_dir]

use chefs::analytics::{Dataset, ReportParams, ReportRequest};
use chefs::catalog::GroupingDictionary;
use chefs::ingest::{discover_files, EraRule, IngestContext};
use chefs::pipeline::{ingest_corpus, IngestOptions};
use chefs::plot::render_svg;
use chefs::store::Store;
use chefs::synth::{generate_corpus, CorpusPlan};

fn main() -> anyhow::Result<()> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "plots".into()));
    std::fs::create_dir_all(&out)?;
    let dir = tempfile::tempdir()?;
    let (input, root) = (dir.path().join("input"), dir.path().join("store"));
    generate_corpus(&CorpusPlan::small(4), &input, &GroupingDictionary::builtin())?;
    ingest_corpus(&discover_files(&input, EraRule::default())?, &IngestContext::default(), &root, IngestOptions::default())?;
    let ds = Dataset::load(&Store::open(&root)?, GroupingDictionary::builtin())?;

    let params = ReportParams {
        min_samples: Some(1),
        ..Default::default()
    };
    for name in ["yearly_trend", "country_stats", "trade_links"] {
        let report = ds.run(&ReportRequest::parse(name, &params)?);
        let path = out.join(format!("{name}.svg"));
        std::fs::write(&path, render_svg(&report)?)?;
        println!("{} ({} rows)", path.display(), report.rows.len());
    }
    Ok(())
}
