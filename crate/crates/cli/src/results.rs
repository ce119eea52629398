use std::path::Path;

use rfdl_core::data::write_atomic;
use serde::{Deserialize, Serialize};

/// One (sweep point, split) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub sweep: String,
    pub value: f64,
    pub split: usize,
    pub accuracy: Option<f64>,
    pub train_time_s: f64,
    pub test_time_s: f64,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

/// Mean, sample standard deviation and best accuracy of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub sweep: String,
    pub value: f64,
    pub runs: usize,
    pub failed: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub best: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub splits: Vec<SplitRecord>,
    pub aggregates: Vec<Aggregate>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

impl ResultRecord {
    /// Sorts by (sweep, value, split) and aggregates each sweep point.
    pub fn from_splits(mut splits: Vec<SplitRecord>) -> Self {
        splits.sort_by(|a, b| a.sweep.cmp(&b.sweep).then(a.value.total_cmp(&b.value)).then(a.split.cmp(&b.split)));
        let mut aggregates: Vec<Aggregate> = Vec::new();
        for group in splits.chunk_by(|a, b| a.sweep == b.sweep && a.value == b.value) {
            let accs: Vec<f64> = group.iter().filter_map(|s| s.accuracy).collect();
            let (mean, std) = if accs.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(&accs);
                (Some(m), Some(s))
            };
            aggregates.push(Aggregate {
                sweep: group[0].sweep.clone(),
                value: group[0].value,
                runs: group.len(),
                failed: group.len() - accs.len(),
                mean,
                std,
                best: accs.iter().copied().reduce(f64::max),
            });
        }
        Self { splits, aggregates }
    }

    /// `results.json`, `results.csv` (aggregates) and, with `sweep`,
    /// `sweep.csv` (one row per run).
    pub fn write(&self, out: &Path, sweep: bool) -> anyhow::Result<()> {
        write_atomic(&out.join("results.json"), serde_json::to_string_pretty(self)?.as_bytes())?;
        write_atomic(&out.join("results.csv"), &to_csv(&self.aggregates)?)?;
        if sweep {
            write_atomic(&out.join("sweep.csv"), &to_csv(&self.splits)?)?;
        }
        Ok(())
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    Ok(w.into_inner()?)
}
