//! Minimal SVG renderings of reports.
//!
//! Trends become line charts, rankings become bar charts of the first ten
//! rows, and trade links become a chord edge bundle. Every mark carries its
//! data as attributes so tests can scrape values back out.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::error::{Error, Result};
use crate::report::{AggregateReport, Value};

pub const MAX_BARS: usize = 10;
const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

/// Reports that can be drawn, with the chart used for each.
pub fn plot_kind(name: &str) -> Option<&'static str> {
    Some(match name {
        "yearly_trend" | "unknown_origin_trend" => "line",
        "top_contaminants"
        | "country_stats"
        | "product_category_stats"
        | "ontology_group_stats"
        | "evaluation_summary"
        | "sampling_strategy_breakdown"
        | "results_per_sample_distribution" => "bar",
        "trade_links" => "chord",
        _ => return None,
    })
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn open_svg(report: &AggregateReport, kind: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" data-report="{}" data-kind="{kind}" data-rows="{}">"##,
        escape(&report.name),
        report.rows.len()
    );
    let params: Vec<String> = report.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let title = if params.is_empty() {
        report.name.clone()
    } else {
        format!("{} ({})", report.name, params.join(", "))
    };
    let _ = writeln!(s, r##"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"##, WIDTH / 2.0, escape(&title));
    s
}

fn no_data(report: &AggregateReport, kind: &str) -> String {
    let mut s = open_svg(report, kind);
    let _ = writeln!(
        s,
        r##"<text class="no-data" x="{}" y="{}" text-anchor="middle" font-size="20">no data</text>"##,
        WIDTH / 2.0,
        HEIGHT / 2.0
    );
    s.push_str("</svg>\n");
    s
}

fn col(report: &AggregateReport, name: &str) -> Result<usize> {
    report
        .column(name)
        .ok_or_else(|| Error::InvalidParameter(format!("{} has no column {name:?}", report.name)))
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(0.0)
}

/// Renders `report` as an SVG document.
pub fn render_svg(report: &AggregateReport) -> Result<String> {
    let kind = plot_kind(&report.name).ok_or_else(|| Error::Unplottable(report.name.clone()))?;
    if report.rows.is_empty() {
        return Ok(no_data(report, kind));
    }
    match kind {
        "line" => line_chart(report),
        "bar" => bar_chart(report),
        _ => chord_chart(report),
    }
}

fn line_chart(report: &AggregateReport) -> Result<String> {
    let year = col(report, "year")?;
    let (series_col, value) = if report.name == "yearly_trend" {
        (Some(col(report, "hazard")?), col(report, "total_results")?)
    } else {
        (None, col(report, "unknown_origin_samples")?)
    };
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for row in &report.rows {
        let name = series_col.map_or_else(|| "all".to_string(), |c| row[c].to_cell());
        series.entry(name).or_default().push((num(&row[year]), num(&row[value])));
    }
    let xs = report.rows.iter().map(|r| num(&r[year]));
    let (x_lo, x_hi) = xs.fold((f64::MAX, f64::MIN), |(lo, hi), x| (lo.min(x), hi.max(x)));
    let y_hi = report.rows.iter().map(|r| num(&r[value])).fold(0.0, f64::max).max(1.0);
    let sx = |x: f64| {
        let span = (x_hi - x_lo).max(1.0);
        MARGIN + (x - x_lo) / span * (WIDTH - 2.0 * MARGIN)
    };
    let sy = |y: f64| HEIGHT - MARGIN - y / y_hi * (HEIGHT - 2.0 * MARGIN);

    let mut s = open_svg(report, "line");
    axes(&mut s);
    const COLOURS: [&str; 4] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a"];
    for (i, (name, points)) in series.iter().enumerate() {
        let coords: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r##"<polyline class="series" data-series="{}" data-points="{}" fill="none" stroke="{}" stroke-width="2" points="{}"/>"##,
            escape(name),
            points.len(),
            COLOURS[i % COLOURS.len()],
            coords.join(" ")
        );
        for &(x, y) in points {
            let _ = writeln!(
                s,
                r##"<circle class="point" data-series="{}" data-x="{x}" data-value="{y}" cx="{:.2}" cy="{:.2}" r="3"/>"##,
                escape(name),
                sx(x),
                sy(y)
            );
        }
    }
    let _ = writeln!(s, r##"<text x="{:.2}" y="{}" font-size="12">{x_lo}</text>"##, MARGIN, HEIGHT - MARGIN + 18.0);
    let _ = writeln!(s, r##"<text x="{:.2}" y="{}" text-anchor="end" font-size="12">{x_hi}</text>"##, WIDTH - MARGIN, HEIGHT - MARGIN + 18.0);
    s.push_str("</svg>\n");
    Ok(s)
}

fn axes(s: &mut String) {
    let _ = writeln!(
        s,
        r##"<path class="axes" d="M{MARGIN},{MARGIN} V{} H{}" stroke="black" fill="none"/>"##,
        HEIGHT - MARGIN,
        WIDTH - MARGIN
    );
}

fn bar_label(report: &AggregateReport, row: &[Value]) -> Result<String> {
    let cell = |name: &str| -> Result<String> { Ok(row[col(report, name)?].to_cell()) };
    Ok(match report.name.as_str() {
        "top_contaminants" => cell("contaminant_name")?,
        "country_stats" => cell("sampling_country")?,
        "product_category_stats" => cell("category")?,
        "ontology_group_stats" => cell("group")?,
        "evaluation_summary" => cell("eval_code")?,
        "results_per_sample_distribution" => format!("{} {}", cell("section")?, cell("key")?),
        _ => {
            let parts: Vec<String> = ["hazard", "year", "sampling_country", "strategy"]
                .iter()
                .map(|c| cell(c))
                .collect::<Result<_>>()?;
            parts.into_iter().filter(|p| p != crate::analytics::ALL).collect::<Vec<_>>().join(" ")
        }
    })
}

fn bar_value_column(name: &str) -> &'static str {
    match name {
        "evaluation_summary" => "results",
        "sampling_strategy_breakdown" | "results_per_sample_distribution" => "samples",
        _ => "total_results",
    }
}

fn bar_chart(report: &AggregateReport) -> Result<String> {
    let value = col(report, bar_value_column(&report.name))?;
    let rows = &report.rows[..report.rows.len().min(MAX_BARS)];
    let max = rows.iter().map(|r| num(&r[value])).fold(0.0, f64::max).max(1.0);
    let band = (HEIGHT - 2.0 * MARGIN) / rows.len() as f64;
    let left = 260.0;
    let mut s = open_svg(report, "bar");
    for (i, row) in rows.iter().enumerate() {
        let label = bar_label(report, row)?;
        let v = num(&row[value]);
        let y = MARGIN + i as f64 * band;
        let w = v / max * (WIDTH - left - MARGIN);
        let _ = writeln!(
            s,
            r##"<rect class="bar" data-label="{}" data-value="{}" x="{left}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4477aa"/>"##,
            escape(&label),
            row[value].to_cell(),
            y,
            w,
            band * 0.8
        );
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{:.2}" text-anchor="end" font-size="11">{}</text>"##,
            left - 6.0,
            y + band * 0.5,
            escape(&truncate(&label, 40))
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn truncate(s: &str, n: usize) -> String {
    if s.chars().count() <= n {
        s.to_string()
    } else {
        let mut t: String = s.chars().take(n - 1).collect();
        t.push('…');
        t
    }
}

fn chord_chart(report: &AggregateReport) -> Result<String> {
    let (o, d, n, nc, r) = (
        col(report, "origin")?,
        col(report, "destination")?,
        col(report, "samples")?,
        col(report, "noncompliant_samples")?,
        col(report, "noncompliance_ratio")?,
    );
    let mut nodes: Vec<String> = report.rows.iter().flat_map(|row| [row[o].to_cell(), row[d].to_cell()]).collect();
    nodes.sort();
    nodes.dedup();
    let (cx, cy, radius) = (WIDTH / 2.0, HEIGHT / 2.0 + 10.0, HEIGHT / 2.0 - MARGIN);
    let pos: BTreeMap<&str, (f64, f64)> = nodes
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let a = std::f64::consts::TAU * i as f64 / nodes.len() as f64;
            (c.as_str(), (cx + radius * a.cos(), cy + radius * a.sin()))
        })
        .collect();
    let max = report.rows.iter().map(|r| num(&r[n])).fold(0.0, f64::max).max(1.0);

    let mut s = open_svg(report, "chord");
    for row in &report.rows {
        let (a, b) = (row[o].to_cell(), row[d].to_cell());
        let ((x1, y1), (x2, y2)) = (pos[a.as_str()], pos[b.as_str()]);
        let _ = writeln!(
            s,
            r##"<path class="edge" data-origin="{}" data-destination="{}" data-samples="{}" data-noncompliant="{}" data-pct="{}" d="M{x1:.2},{y1:.2} Q{cx:.2},{cy:.2} {x2:.2},{y2:.2}" fill="none" stroke="#cc3311" stroke-opacity="0.6" stroke-width="{:.2}"/>"##,
            escape(&a),
            escape(&b),
            row[n].to_cell(),
            row[nc].to_cell(),
            num(&row[r]) * 100.0,
            1.0 + 9.0 * num(&row[n]) / max
        );
    }
    for (c, (x, y)) in &pos {
        let _ = writeln!(
            s,
            r##"<circle class="node" data-country="{}" cx="{x:.2}" cy="{y:.2}" r="6" fill="#222"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"##,
            escape(c),
            x + (x - cx) * 0.08,
            y + (y - cy) * 0.08 + 4.0,
            escape(c)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn trend() -> AggregateReport {
        let mut r = AggregateReport::new(
            "yearly_trend",
            BTreeMap::new(),
            &["year", "hazard", "total_results", "noncompliant_results", "noncompliance_ratio"],
        );
        for (y, h, n) in [(2012, "CC", 5), (2013, "CC", 7), (2012, "PEST", 3), (2013, "PEST", 4), (2014, "PEST", 9)] {
            r.push(vec![y.into(), h.into(), n.into(), 0u64.into(), 0.0.into()]);
        }
        r
    }

    #[test]
    fn line_has_one_polyline_per_series() {
        let svg = render_svg(&trend()).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches(r##"class="point""##).count(), 5);
        assert!(svg.contains(r##"data-series="PEST" data-points="3""##));
    }

    #[test]
    fn empty_report_says_no_data() {
        let r = AggregateReport::new("trade_links", BTreeMap::new(), &["origin"]);
        assert!(render_svg(&r).unwrap().contains("no data"));
    }

    #[test]
    fn unplottable_is_an_error() {
        let r = AggregateReport::new("sparsity_matrix", BTreeMap::new(), &["file"]);
        assert!(matches!(render_svg(&r), Err(Error::Unplottable(_))));
    }

    #[test]
    fn labels_are_escaped() {
        assert_eq!(escape(r##"a<b & "c""##), "a&lt;b &amp; &quot;c&quot;");
    }
}
