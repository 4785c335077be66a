//! JSON-serializable evaluation report: one record per (domain, fold, UPL)
//! cell plus fold-ordered paired vectors for significance testing.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub domain: String,
    pub fold: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upl: Option<u32>,
    pub metric: String,
    pub value: f64,
    /// Number of pairs (MAE) or evaluated users (MAP) behind the value.
    pub n: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub records: Vec<MetricRecord>,
}

/// Key identifying one paired series: (domain, upl, metric).
pub type SeriesKey = (String, Option<u32>, String);

impl EvalReport {
    pub fn push(&mut self, record: MetricRecord) {
        self.records.push(record);
    }

    /// Fold-ordered metric vectors, one per (domain, upl, metric) cell;
    /// these are the paired samples for the signed-rank test.
    pub fn paired_series(&self) -> BTreeMap<SeriesKey, Vec<f64>> {
        let mut map: BTreeMap<SeriesKey, Vec<(u32, f64)>> = BTreeMap::new();
        for r in &self.records {
            map.entry((r.domain.clone(), r.upl, r.metric.clone()))
                .or_default()
                .push((r.fold, r.value));
        }
        map.into_iter()
            .map(|(key, mut folds)| {
                folds.sort_by_key(|&(fold, _)| fold);
                (key, folds.into_iter().map(|(_, v)| v).collect())
            })
            .collect()
    }

    /// Mean and standard deviation across folds per cell.
    pub fn summary(&self) -> BTreeMap<SeriesKey, (f64, f64, usize)> {
        self.paired_series()
            .into_iter()
            .map(|(key, values)| {
                let n = values.len();
                let mean = values.iter().sum::<f64>() / n as f64;
                let var = if n > 1 {
                    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
                } else {
                    0.0
                };
                (key, (mean, var.sqrt(), n))
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        std::fs::write(path, json).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(e.to_string()))
    }
}
