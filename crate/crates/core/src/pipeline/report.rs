use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::predictor::Notice;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub test_accuracy: f64,
    /// Accuracy of the combined ensemble on the selection hold-out rows.
    pub holdout_accuracy: f64,
    pub num_labeled: usize,
    pub num_query: usize,
    /// Pool predictor ids, aligned with `weights`.
    pub predictors: Vec<String>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedNotice {
    pub seed: u64,
    #[serde(flatten)]
    pub notice: Notice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPredictor {
    pub seed: u64,
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub num_tables: usize,
    pub seeds: Vec<SeedResult>,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub std: f64,
    pub std_err: f64,
    pub notices: Vec<SeedNotice>,
    pub skipped: Vec<SkippedPredictor>,
    /// Wall-clock seconds per stage, summed over seeds.
    pub timings: Vec<StageTiming>,
}

/// Mean, sample standard deviation and standard error of `values`.
pub fn summarize(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    (mean, std, std / (n as f64).sqrt())
}

impl MetricsReport {
    pub fn new(
        dataset: String,
        num_tables: usize,
        seeds: Vec<SeedResult>,
        notices: Vec<SeedNotice>,
        skipped: Vec<SkippedPredictor>,
        timings: Vec<StageTiming>,
    ) -> Self {
        let acc: Vec<f64> = seeds.iter().map(|s| s.test_accuracy).collect();
        let (mean, std, std_err) = summarize(&acc);
        Self { dataset, num_tables, seeds, mean, std, std_err, notices, skipped, timings }
    }

    /// The report with timings removed, for equality checks across runs.
    pub fn without_timings(&self) -> Self {
        Self { timings: Vec::new(), ..self.clone() }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,test_accuracy,holdout_accuracy,num_labeled,num_query,pool_size,skipped\n");
        for s in &self.seeds {
            let skipped = self.skipped.iter().filter(|k| k.seed == s.seed).count();
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.seed,
                s.test_accuracy,
                s.holdout_accuracy,
                s.num_labeled,
                s.num_query,
                s.predictors.len(),
                skipped
            )
            .expect("write to string");
        }
        out
    }

    /// Writes the JSON report at `path` and the CSV next to it.
    pub fn write(&self, path: &Path) -> Result<(), PipelineError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| PipelineError::Io { path: dir.to_path_buf(), source: e })?;
        }
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, json).map_err(|e| PipelineError::Io { path: path.to_path_buf(), source: e })?;
        let csv = path.with_extension("csv");
        std::fs::write(&csv, self.to_csv()).map_err(|e| PipelineError::Io { path: csv, source: e })?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(seed: u64, acc: f64) -> SeedResult {
        SeedResult {
            seed,
            test_accuracy: acc,
            holdout_accuracy: acc,
            num_labeled: 1,
            num_query: 1,
            predictors: vec!["a".into()],
            weights: vec![1.0],
        }
    }

    #[test]
    fn statistics() {
        let (mean, std, se) = summarize(&[0.7, 0.8, 0.9]);
        assert!((mean - 0.8).abs() < 1e-12);
        assert!((std - 0.1).abs() < 1e-12);
        assert!((se - 0.1 / 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(summarize(&[0.5]), (0.5, 0.0, 0.0));
    }

    #[test]
    fn json_and_csv_round_trip() {
        let r = MetricsReport::new("d".into(), 4, vec![seed(0, 0.5), seed(1, 0.75)], vec![], vec![], vec![]);
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("out/report.json");
        r.write(&path).unwrap();
        let back: MetricsReport = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, r);
        let csv = std::fs::read_to_string(tmp.path().join("out/report.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(2).unwrap().starts_with("1,0.75,"));
    }
}
