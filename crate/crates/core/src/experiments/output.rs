use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentError;

/// Column header of every result CSV.
pub const CSV_HEADER: [&str; 7] = ["metric", "env", "algorithm", "seed", "run", "episode_or_x", "value"];

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub env: String,
    pub algorithm: String,
    pub seed: u64,
    pub run: u32,
    pub episode_or_x: f64,
    pub value: f64,
}

pub fn write_rows(path: &Path, rows: &[MetricRow]) -> Result<(), ExperimentError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| ExperimentError::Csv(e.to_string()))?;
    super::write_file(path, &bytes)
}

pub fn read_rows(path: &Path) -> Result<Vec<MetricRow>, ExperimentError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| ExperimentError::Csv(format!("{}: {e}", path.display())))?;
    let headers = r.headers()?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(ExperimentError::Csv(format!("{}: unexpected header {:?}", path.display(), headers)));
    }
    r.deserialize().map(|row| row.map_err(ExperimentError::from)).collect()
}

/// Linearly interpolated percentile `q` in `[0, 100]` of `values`.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Mean with a 90% interval from the 5th and 95th percentiles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub p5: f64,
    pub p95: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            p5: percentile(values, 5.0),
            p95: percentile(values, 95.0),
            n: values.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    #[serde(flatten)]
    pub summary: Summary,
}

/// Aggregate of one `(metric, env, algorithm, seed)` group across runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub metric: String,
    pub env: String,
    pub algorithm: String,
    pub seed: u64,
    /// Across-run summary at every x.
    pub curve: Vec<CurvePoint>,
    /// Across-run summary of each run's mean over its last `window` x values.
    pub final_window: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub window: usize,
    pub groups: Vec<GroupReport>,
}

type GroupKey = (String, String, String, u64);

/// Groups rows by metric, env, algorithm and seed, then summarises across runs.
pub fn aggregate(rows: &[MetricRow], window: usize) -> Report {
    let mut groups: BTreeMap<GroupKey, BTreeMap<u32, Vec<(f64, f64)>>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.metric.clone(), r.env.clone(), r.algorithm.clone(), r.seed))
            .or_default()
            .entry(r.run)
            .or_default()
            .push((r.episode_or_x, r.value));
    }
    let groups = groups
        .into_iter()
        .map(|((metric, env, algorithm, seed), runs)| {
            let mut by_x: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
            let mut finals = Vec::with_capacity(runs.len());
            for mut points in runs.into_values() {
                points.sort_by(|a, b| a.0.total_cmp(&b.0));
                for &(x, v) in &points {
                    by_x.entry(ordered(x)).or_insert_with(|| (x, Vec::new())).1.push(v);
                }
                let tail = &points[points.len() - points.len().min(window.max(1))..];
                finals.push(tail.iter().map(|p| p.1).sum::<f64>() / tail.len() as f64);
            }
            let curve = by_x.into_values().map(|(x, vs)| CurvePoint { x, summary: Summary::of(&vs) }).collect();
            GroupReport { metric, env, algorithm, seed, curve, final_window: Summary::of(&finals) }
        })
        .collect();
    Report { window, groups }
}

/// Order-preserving integer image of a finite float.
fn ordered(x: f64) -> u64 {
    let bits = x.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(metric: &str, run: u32, x: f64, value: f64) -> MetricRow {
        MetricRow {
            metric: metric.into(),
            env: "mudworld".into(),
            algorithm: "focused-vic".into(),
            seed: 3,
            run,
            episode_or_x: x,
            value,
        }
    }

    #[test]
    fn percentiles_interpolate() {
        let v: Vec<f64> = (0..=10).map(f64::from).collect();
        assert_eq!(percentile(&v, 5.0), 0.5);
        assert_eq!(percentile(&v, 95.0), 9.5);
        assert_eq!(percentile(&[2.0], 95.0), 2.0);
        assert_eq!(percentile(&[3.0, 1.0], 50.0), 2.0);
    }

    #[test]
    fn constant_returns_have_degenerate_interval() {
        let rows: Vec<_> = (0..5).flat_map(|run| (0..10).map(move |e| row("return", run, e as f64, 1.0))).collect();
        let report = aggregate(&rows, 3);
        let g = &report.groups[0];
        assert_eq!(g.final_window, Summary { mean: 1.0, p5: 1.0, p95: 1.0, n: 5 });
        assert!(g.curve.iter().all(|p| p.summary.mean == 1.0 && p.summary.p5 == 1.0 && p.summary.p95 == 1.0));
    }

    #[test]
    fn tail_window_and_grouping() {
        let mut rows = vec![row("return", 0, 0.0, 0.0), row("return", 0, 1.0, 1.0), row("return", 1, 0.0, 0.0), row("return", 1, 1.0, 0.0)];
        rows.push(row("steps", 0, 0.0, 7.0));
        let report = aggregate(&rows, 1);
        assert_eq!(report.groups.len(), 2);
        let g = &report.groups[0];
        assert_eq!(g.metric, "return");
        assert_eq!(g.final_window.mean, 0.5);
        assert_eq!(g.curve.len(), 2);
        assert_eq!(g.curve[1].summary.mean, 0.5);
    }

    #[test]
    fn csv_round_trip_keeps_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let rows = vec![row("coverage", 2, 1.0, 0.125), row("coverage", 2, 2.0, 1.0 / 3.0)];
        write_rows(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("metric,env,algorithm,seed,run,episode_or_x,value\n"));
        assert_eq!(read_rows(&path).unwrap(), rows);
    }

    #[test]
    fn negative_x_orders_correctly() {
        assert!(ordered(-1.0) < ordered(0.0));
        assert!(ordered(0.0) < ordered(0.5));
        assert!(ordered(-2.0) < ordered(-1.0));
    }
}
