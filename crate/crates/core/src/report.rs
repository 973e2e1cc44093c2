//! Typed tabular reports with CSV/JSON serialization and tolerant comparison.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for comparing derived fractions.
pub const FLOAT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl Value {
    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Float(f) => Some(*f),
            Value::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Equal, with floats compared to a relative tolerance.
    pub fn approx_eq(&self, other: &Value, rel: f64) -> bool {
        match (self, other) {
            (Value::Float(a), Value::Float(b)) => floats_close(*a, *b, rel),
            _ => self == other,
        }
    }

    /// Cell text at full precision.
    pub fn to_cell(&self) -> String {
        self.to_string()
    }

    /// Cell text for people: floats with two decimals.
    pub fn to_display(&self) -> String {
        match self {
            Value::Float(f) => format!("{f:.2}"),
            other => other.to_string(),
        }
    }
}

pub fn floats_close(a: f64, b: f64, rel: f64) -> bool {
    if a == b {
        return true;
    }
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= rel * scale
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Text(s) => f.write_str(s),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i64)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<i32> for Value {
    fn from(v: i32) -> Self {
        Value::Int(i64::from(v))
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

/// `num / den`, or 0 when `den` is 0.
pub fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `100 * num / den`, or 0 when `den` is 0.
pub fn percent(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub name: String,
    pub params: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

/// First difference found between two reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportDiff {
    pub report: String,
    pub detail: String,
}

impl fmt::Display for ReportDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.report, self.detail)
    }
}

impl AggregateReport {
    pub fn new(name: &str, params: BTreeMap<String, String>, columns: &[&str]) -> Self {
        AggregateReport {
            name: name.to_string(),
            params,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in {}", self.name);
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of one column, top to bottom.
    pub fn column_values(&self, name: &str) -> Vec<&Value> {
        match self.column(name) {
            Some(i) => self.rows.iter().map(|r| &r[i]).collect(),
            None => Vec::new(),
        }
    }

    /// Header plus rows, LF-terminated, floats at full precision.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Value::to_cell)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("<report>", e))
    }

    /// Compares with `other`: names, params, columns and shape exactly,
    /// floats within `rel`.
    pub fn compare(&self, other: &AggregateReport, rel: f64) -> std::result::Result<(), ReportDiff> {
        let diff = |detail: String| ReportDiff {
            report: self.name.clone(),
            detail,
        };
        if self.name != other.name {
            return Err(diff(format!("name {:?} vs {:?}", self.name, other.name)));
        }
        if self.params != other.params {
            return Err(diff(format!("params {:?} vs {:?}", self.params, other.params)));
        }
        if self.columns != other.columns {
            return Err(diff(format!("columns {:?} vs {:?}", self.columns, other.columns)));
        }
        if self.rows.len() != other.rows.len() {
            return Err(diff(format!("{} rows vs {}", self.rows.len(), other.rows.len())));
        }
        for (i, (a, b)) in self.rows.iter().zip(&other.rows).enumerate() {
            for (j, (x, y)) in a.iter().zip(b).enumerate() {
                if !x.approx_eq(y, rel) {
                    return Err(diff(format!("row {i} column {}: {x:?} vs {y:?}", self.columns[j])));
                }
            }
        }
        Ok(())
    }

    /// Plain-text table with two-decimal floats.
    pub fn to_display_table(&self) -> String {
        let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(Value::to_display).collect()).collect();
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.len()).collect();
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |vals: &[String]| {
            vals.iter()
                .zip(&widths)
                .map(|(v, w)| format!("{v:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = String::new();
        out.push_str(&line(&self.columns));
        out.push('\n');
        for row in &cells {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }
}

/// Compares two report lists pairwise by name.
pub fn compare_suites(a: &[AggregateReport], b: &[AggregateReport], rel: f64) -> Vec<ReportDiff> {
    let mut diffs = Vec::new();
    let bmap: BTreeMap<(&str, String), &AggregateReport> =
        b.iter().map(|r| ((r.name.as_str(), format!("{:?}", r.params)), r)).collect();
    for r in a {
        match bmap.get(&(r.name.as_str(), format!("{:?}", r.params))) {
            Some(other) => {
                if let Err(d) = r.compare(other, rel) {
                    diffs.push(d);
                }
            }
            None => diffs.push(ReportDiff {
                report: r.name.clone(),
                detail: format!("missing counterpart for params {:?}", r.params),
            }),
        }
    }
    if a.len() != b.len() {
        diffs.push(ReportDiff {
            report: "*".into(),
            detail: format!("{} reports vs {}", a.len(), b.len()),
        });
    }
    diffs
}

/// Rounds percentages to `decimals` so that they sum to exactly the rounded
/// total (largest-remainder method). Ties go to the earlier entry.
pub fn round_preserving_sum(values: &[f64], decimals: u32) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let scale = 10f64.powi(decimals as i32);
    let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
    let target = scaled.iter().sum::<f64>().round() as i64;
    let mut floors: Vec<i64> = scaled.iter().map(|v| v.floor() as i64).collect();
    let mut short = target - floors.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - scaled[a].floor();
        let rb = scaled[b] - scaled[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(values.len() * 2) {
        if short <= 0 {
            break;
        }
        floors[i] += 1;
        short -= 1;
    }
    floors.into_iter().map(|f| f as f64 / scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_keeps_full_precision() {
        let mut r = AggregateReport::new("t", BTreeMap::new(), &["a", "b", "c"]);
        r.push(vec![Value::Int(3), Value::Float(1.0 / 3.0), "x,y".into()]);
        assert_eq!(r.to_csv(), "a,b,c\n3,0.3333333333333333,\"x,y\"\n");
        assert!(r.to_display_table().contains("0.33"));
        let back = AggregateReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn compare_uses_relative_tolerance() {
        let mut a = AggregateReport::new("t", BTreeMap::new(), &["f"]);
        a.push(vec![Value::Float(0.1 + 0.2)]);
        let mut b = a.clone();
        b.rows[0][0] = Value::Float(0.3);
        assert!(a.compare(&b, FLOAT_TOLERANCE).is_ok());
        b.rows[0][0] = Value::Float(0.3001);
        assert!(a.compare(&b, FLOAT_TOLERANCE).is_err());
    }

    #[test]
    fn largest_remainder_sums_to_hundred() {
        let v = [100.0 / 3.0, 100.0 / 3.0, 100.0 / 3.0];
        let r = round_preserving_sum(&v, 2);
        assert_eq!(r, [33.34, 33.33, 33.33]);
    }

    proptest! {
        #[test]
        fn rounded_shares_sum_to_hundred(counts in proptest::collection::vec(1u64..10_000, 1..8)) {
            let total: u64 = counts.iter().sum();
            let pcts: Vec<f64> = counts.iter().map(|&c| percent(c, total)).collect();
            let rounded = round_preserving_sum(&pcts, 2);
            let sum: f64 = rounded.iter().sum();
            prop_assert!((sum - 100.0).abs() <= 0.01 + 1e-9);
        }
    }
}
