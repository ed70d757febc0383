//! Corpus score tables.
//!
//! One CSV holds every metric: a `mean` row per (metric, method) followed by
//! the per-scene rows, with one column per EV pair.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::metrics::MetricsReport;
use crate::pipeline::Method;
use crate::scalar::CompensatedSum;

pub const SUMMARY_SCENE: &str = "mean";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MaxSatCosine,
    Ciede2000Hue,
    Tmqi,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::MaxSatCosine, Metric::Ciede2000Hue, Metric::Tmqi];

    pub fn name(self) -> &'static str {
        match self {
            Metric::MaxSatCosine => "max_sat_cosine",
            Metric::Ciede2000Hue => "ciede2000_hue",
            Metric::Tmqi => "tmqi",
        }
    }

    pub fn of(self, r: &MetricsReport) -> Option<f64> {
        match self {
            Metric::MaxSatCosine => r.cosine_similarity_mean,
            Metric::Ciede2000Hue => Some(r.ciede2000_hue_mean),
            Metric::Tmqi => Some(r.tmqi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub scene: String,
    pub ev_low: f64,
    pub ev_high: f64,
    pub method: Method,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EvPair {
    pub low: f64,
    pub high: f64,
}

impl EvPair {
    pub fn label(&self) -> String {
        if self.low == -self.high {
            format!("±{}EV", self.high)
        } else {
            format!("{}/{:+}EV", self.low, self.high)
        }
    }

    fn key(&self) -> (u64, u64) {
        (self.low.to_bits(), self.high.to_bits())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub metric: Metric,
    pub method: Method,
    pub scene: String,
    /// One cell per column of [`ReportTable::columns`]; `None` when absent.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub columns: Vec<EvPair>,
    pub rows: Vec<ReportRow>,
}

impl ReportTable {
    pub fn summary(&self, metric: Metric, method: Method) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.method == method && r.scene == SUMMARY_SCENE)
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["metric".to_string(), "method".into(), "scene".into()];
        h.extend(self.columns.iter().map(EvPair::label));
        h
    }
}

fn method_rank(m: Method) -> usize {
    Method::ALL.iter().position(|&x| x == m).unwrap_or(usize::MAX)
}

/// Builds the table with unrounded means over scenes.
pub fn summarize(entries: &[ReportEntry]) -> Result<ReportTable, IoError> {
    if entries.is_empty() {
        return Err(IoError::NoResults);
    }
    let mut columns: Vec<EvPair> = Vec::new();
    for e in entries {
        if !(e.ev_low < e.ev_high) {
            return Err(IoError::Invalid(format!("scene {}: ev pair {} / {}", e.scene, e.ev_low, e.ev_high)));
        }
        let p = EvPair { low: e.ev_low, high: e.ev_high };
        if !columns.iter().any(|c| c.key() == p.key()) {
            columns.push(p);
        }
    }
    columns.sort_by(|a, b| {
        (a.high - a.low)
            .total_cmp(&(b.high - b.low))
            .then(a.low.total_cmp(&b.low))
    });
    let col_of = |e: &ReportEntry| {
        columns
            .iter()
            .position(|c| c.key() == (e.ev_low.to_bits(), e.ev_high.to_bits()))
            .expect("column collected above")
    };

    let mut methods = BTreeSet::new();
    let mut scenes: BTreeSet<&str> = BTreeSet::new();
    let mut cells: BTreeMap<(usize, &str, usize), &MetricsReport> = BTreeMap::new();
    for e in entries {
        methods.insert(method_rank(e.method));
        scenes.insert(&e.scene);
        if cells.insert((method_rank(e.method), &e.scene, col_of(e)), &e.report).is_some() {
            return Err(IoError::Invalid(format!(
                "duplicate result for scene {} at {} ({})",
                e.scene,
                columns[col_of(e)].label(),
                e.method
            )));
        }
    }

    let mut rows = Vec::new();
    for metric in Metric::ALL {
        for &m in &methods {
            let method = Method::ALL[m];
            let mut per_scene = Vec::new();
            let mut sums = vec![CompensatedSum::new(); columns.len()];
            for &scene in &scenes {
                let values: Vec<Option<f64>> = (0..columns.len())
                    .map(|c| cells.get(&(m, scene, c)).and_then(|r| metric.of(r)))
                    .collect();
                for (s, v) in sums.iter_mut().zip(&values) {
                    if let Some(v) = v {
                        s.add(*v);
                    }
                }
                if values.iter().any(Option::is_some) {
                    per_scene.push(ReportRow {
                        metric,
                        method,
                        scene: scene.to_string(),
                        values,
                    });
                }
            }
            rows.push(ReportRow {
                metric,
                method,
                scene: SUMMARY_SCENE.into(),
                values: sums.iter().map(CompensatedSum::mean).collect(),
            });
            rows.extend(per_scene);
        }
    }
    Ok(ReportTable { columns, rows })
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_default()
}

/// Writes the table as CSV. Nothing is created when `entries` is empty.
pub fn write_report(entries: &[ReportEntry], path: impl AsRef<Path>) -> Result<ReportTable, IoError> {
    let table = summarize(entries)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(table.header())?;
    for row in &table.rows {
        let mut rec = vec![row.metric.name().to_string(), row.method.name().to_string(), row.scene.clone()];
        rec.extend(row.values.iter().map(|&v| cell(v)));
        w.write_record(rec)?;
    }
    let bytes = w.into_inner().map_err(|e| IoError::Io(e.into_error()))?;
    File::create(path.as_ref())?.write_all(&bytes)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(cos: f64, hue: f64, q: f64) -> MetricsReport {
        MetricsReport {
            cosine_similarity_mean: Some(cos),
            ciede2000_hue_mean: hue,
            tmqi: q,
            tmqi_structural: q,
            tmqi_naturalness: q,
            pixel_count: 16,
            skipped_achromatic: 0,
        }
    }

    fn entry(scene: &str, ev: f64, method: Method, r: MetricsReport) -> ReportEntry {
        ReportEntry {
            scene: scene.into(),
            ev_low: -ev,
            ev_high: ev,
            method,
            report: r,
        }
    }

    fn read(path: &Path) -> Vec<Vec<String>> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
        r.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
    }

    #[test]
    fn one_scene_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        let entries = vec![
            entry("a", 1.0, Method::Conventional, report(0.9, 2.0, 0.8)),
            entry("a", 1.0, Method::Proposed, report(0.95, 1.5, 0.79)),
        ];
        write_report(&entries, &path).unwrap();
        let rows = read(&path);
        assert_eq!(rows[0], ["metric", "method", "scene", "±1EV"]);
        let summaries: Vec<_> = rows[1..].iter().filter(|r| r[2] == SUMMARY_SCENE).collect();
        assert_eq!(summaries.len(), 6);
        for metric in Metric::ALL {
            assert_eq!(summaries.iter().filter(|r| r[0] == metric.name()).count(), 2);
        }
        assert!(rows.iter().all(|r| r.len() == 4));
        assert_eq!(rows[1], ["max_sat_cosine", "conventional", "mean", "0.9000"]);
    }

    #[test]
    fn means_match_scene_rows() {
        let mut entries = Vec::new();
        for (i, scene) in ["s0", "s1", "s2"].into_iter().enumerate() {
            for ev in [1.0, 2.0, 3.0, 4.0] {
                for m in Method::ALL {
                    let k = i as f64 + ev * 0.1 + if m == Method::Proposed { 0.01 } else { 0.0 };
                    entries.push(entry(scene, ev, m, report(0.5 + k / 10.0, k, 0.3 + k / 7.0)));
                }
            }
        }
        entries.reverse();
        let table = summarize(&entries).unwrap();
        assert_eq!(table.header()[3..], ["±1EV", "±2EV", "±3EV", "±4EV"]);
        for row in table.rows.iter().filter(|r| r.scene == SUMMARY_SCENE) {
            let scenes: Vec<_> = table
                .rows
                .iter()
                .filter(|r| r.metric == row.metric && r.method == row.method && r.scene != SUMMARY_SCENE)
                .collect();
            assert_eq!(scenes.len(), 3);
            for c in 0..4 {
                let mean = scenes.iter().map(|r| r.values[c].unwrap()).sum::<f64>() / 3.0;
                assert!((row.values[c].unwrap() - mean).abs() < 1e-12);
            }
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_report(&entries, &path).unwrap();
        let rows = read(&path);
        for (csv_row, row) in rows[1..].iter().zip(&table.rows) {
            for (s, v) in csv_row[3..].iter().zip(&row.values) {
                assert_eq!(*s, format!("{:.4}", v.unwrap()));
            }
        }
    }

    #[test]
    fn empty_input_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("none.csv");
        assert!(matches!(write_report(&[], &path), Err(IoError::NoResults)));
        assert!(!path.exists());
    }

    #[test]
    fn duplicates_and_bad_pairs_are_rejected() {
        let e = entry("a", 1.0, Method::Proposed, report(0.9, 1.0, 0.5));
        assert!(summarize(&[e.clone(), e.clone()]).is_err());
        let bad = ReportEntry { ev_low: 1.0, ev_high: 1.0, ..e };
        assert!(summarize(&[bad]).is_err());
    }

    #[test]
    fn asymmetric_labels() {
        assert_eq!(EvPair { low: -2.0, high: 1.0 }.label(), "-2/+1EV");
        assert_eq!(EvPair { low: -1.5, high: 1.5 }.label(), "±1.5EV");
    }

    #[test]
    fn missing_cosine_leaves_blank_cell() {
        let mut r = report(0.0, 0.0, 0.5);
        r.cosine_similarity_mean = None;
        let t = summarize(&[entry("g", 2.0, Method::Proposed, r)]).unwrap();
        let row = t.summary(Metric::MaxSatCosine, Method::Proposed).unwrap();
        assert_eq!(row.values, vec![None]);
        assert_eq!(cell(row.values[0]), "");
    }
}
