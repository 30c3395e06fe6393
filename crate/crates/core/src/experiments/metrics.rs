//! AUC, timing summaries and the results record shared by all studies.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ExperimentError, Result};

/// Probability that a random positive outscores a random negative, ties
/// counted one half, via average ranks.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(ExperimentError::Metric(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(ExperimentError::Metric(format!("non-finite score {s}")));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(ExperimentError::Metric(format!("label {l} is not 0/1")));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(ExperimentError::Metric(
            "AUC needs both positive and negative labels".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&t| labels[t] == 1).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Median of per-epoch times, skipping the first (warm-up) epoch when there
/// is more than one.
pub fn median_epoch_time(times: &[f64]) -> f64 {
    let mut t: Vec<f64> = if times.len() > 1 {
        times[1..].to_vec()
    } else {
        times.to_vec()
    };
    if t.is_empty() {
        return 0.0;
    }
    t.sort_by(f64::total_cmp);
    let m = t.len() / 2;
    if t.len() % 2 == 1 {
        t[m]
    } else {
        0.5 * (t[m - 1] + t[m])
    }
}

/// One run of one model on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRecord {
    pub experiment: String,
    pub model: String,
    pub seed: u64,
    /// The effective configuration of the run.
    pub config: serde_json::Value,
    pub metrics: BTreeMap<String, f64>,
    /// Total wall time of the run in seconds.
    pub wall_s: f64,
    /// Median per-epoch training time in seconds.
    pub epoch_wall_s: f64,
    /// Forward passes of the inner model per input (1 unless frame averaging).
    pub calls: u64,
    /// Seconds since the Unix epoch when the run finished.
    pub timestamp: u64,
}

pub const CSV_HEADER: &str = "experiment,model,seed,metric,value,wall_s,calls";

impl ResultsRecord {
    pub fn new(experiment: &str, model: &str, seed: u64, config: serde_json::Value) -> Self {
        ResultsRecord {
            experiment: experiment.to_string(),
            model: model.to_string(),
            seed,
            config,
            metrics: BTreeMap::new(),
            wall_s: 0.0,
            epoch_wall_s: 0.0,
            calls: 1,
            timestamp: 0,
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    /// Errors if any metric or timing is not finite.
    pub fn validate(&self) -> Result<()> {
        for (k, v) in &self.metrics {
            if !v.is_finite() {
                return Err(ExperimentError::Metric(format!("metric {k} = {v} is not finite")));
            }
        }
        if !self.wall_s.is_finite() || !self.epoch_wall_s.is_finite() {
            return Err(ExperimentError::Metric("non-finite wall time".into()));
        }
        Ok(())
    }

    pub fn stamp_now(&mut self) {
        self.timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
    }

    /// Zeroes wall times and the timestamp so identical runs serialize identically.
    pub fn strip_timing(&mut self) {
        self.wall_s = 0.0;
        self.epoch_wall_s = 0.0;
        self.timestamp = 0;
        self.metrics.retain(|k, _| !k.ends_with("_s"));
    }

    /// One CSV row per metric, without the header.
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metrics {
            writeln!(
                s,
                "{},{},{},{},{},{},{}",
                self.experiment, self.model, self.seed, k, v, self.wall_s, self.calls
            )
            .expect("write to string");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct count over all positive/negative pairs.
    fn auc_pairs(scores: &[f64], labels: &[u8]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li == 1 && lj == 0 {
                    den += 1.0;
                    num += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8, 0.1], &[1, 1, 0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 0.8, 0.3], &[1, 0, 1]).unwrap(), 0.5);
        assert_eq!(auc(&[0.4; 6], &[1, 0, 1, 0, 0, 1]).unwrap(), 0.5);
        assert!(auc(&[0.1, 0.2], &[1, 1]).is_err());
        assert!(auc(&[0.1], &[1, 0]).is_err());
        assert!(auc(&[f64::NAN, 0.2], &[1, 0]).is_err());
    }

    #[test]
    fn auc_matches_pair_count() {
        let mut r = crate::rng::seeded(0);
        use rand::Rng;
        for _ in 0..200 {
            let n = r.random_range(2..40);
            // coarse scores to force ties
            let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..5) as f64).collect();
            let mut labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
            labels[0] = 0;
            labels[1] = 1;
            let a = auc(&scores, &labels).unwrap();
            assert!((a - auc_pairs(&scores, &labels)).abs() < 1e-12);
        }
    }

    #[test]
    fn median_skips_warmup() {
        assert_eq!(median_epoch_time(&[10.0, 1.0, 3.0, 2.0]), 2.0);
        assert_eq!(median_epoch_time(&[10.0, 1.0, 3.0]), 2.0);
        assert_eq!(median_epoch_time(&[4.0]), 4.0);
        assert_eq!(median_epoch_time(&[]), 0.0);
    }

    #[test]
    fn record_csv_and_validation() {
        let mut r = ResultsRecord::new("linkpred", "signeq", 3, serde_json::json!({"k": 16}));
        r.set("test_auc", 0.75);
        r.set("epoch_s", 0.1);
        r.wall_s = 2.5;
        assert_eq!(
            r.csv_rows(),
            "linkpred,signeq,3,epoch_s,0.1,2.5,1\nlinkpred,signeq,3,test_auc,0.75,2.5,1\n"
        );
        assert!(r.validate().is_ok());
        r.strip_timing();
        assert_eq!(r.csv_rows(), "linkpred,signeq,3,test_auc,0.75,0,1\n");
        let j = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<ResultsRecord>(&j).unwrap(), r);
        r.set("bad", f64::INFINITY);
        assert!(r.validate().is_err());
    }
}
