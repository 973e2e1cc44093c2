//! Descriptive aggregates over a loaded store.
//!
//! Each operation is a parallel fold into hash maps merged with a
//! commutative (total, noncompliant) monoid, followed by a total sort, so the
//! output never depends on thread scheduling.

mod dataset;
mod ops;
mod request;

pub use dataset::*;
pub use ops::{cmp_ratio, overlap_report, Counts, ALL, UNPARSED};
pub use request::*;

use crate::report::AggregateReport;

/// Runs every request against the dataset.
pub fn run_suite(ds: &Dataset, requests: &[ReportRequest]) -> Vec<AggregateReport> {
    requests.iter().map(|r| ds.run(r)).collect()
}

/// Chord edge list for a trade_links report: `origin,destination,samples,noncompliant,pct`.
pub fn chord_edges_csv(report: &AggregateReport) -> String {
    let mut out = String::from("origin,destination,samples,noncompliant,pct\n");
    let idx = |c: &str| report.column(c).expect("trade_links column");
    let (o, d, s, n, r) = (idx("origin"), idx("destination"), idx("samples"), idx("noncompliant_samples"), idx("noncompliance_ratio"));
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in &report.rows {
        let pct = row[r].as_f64().unwrap_or(0.0) * 100.0;
        w.write_record([row[o].to_cell(), row[d].to_cell(), row[s].to_cell(), row[n].to_cell(), pct.to_string()])
            .expect("in-memory write");
    }
    out.push_str(std::str::from_utf8(&w.into_inner().expect("in-memory writer")).expect("utf-8"));
    out
}
