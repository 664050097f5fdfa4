//! Finite joint batch-size laws and the completion-set quantities derived from them.

use serde::{Deserialize, Serialize};

use crate::cyclic::{pred, span};
use crate::error::{PollingError, Result};

pub const MAX_SUPPORT: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub k: Vec<u32>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSupport {
    n: usize,
    entries: Vec<BatchEntry>,
    mean: Vec<f64>,
    // factorial cross moments: E(K_i K_j) off the diagonal, E(K_i²) - E(K_i) on it
    cross: Vec<Vec<f64>>,
    // completion[start][end] = P(last member served at `end` when service starts at `start`)
    completion: Vec<Vec<f64>>,
    // cond_mean[start][end][l] = E(K_l | completion set (start, end))
    cond_mean: Vec<Vec<Vec<f64>>>,
    cumulative: Vec<f64>,
}

/// Queue holding the last member of `k` when service order starts at `start`.
pub fn last_queue(k: &[u32], start: usize) -> Option<usize> {
    let n = k.len();
    span(start, pred(start, n), n).filter(|&q| k[q] > 0).last()
}

impl BatchSupport {
    pub fn new(n: usize, entries: Vec<BatchEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(PollingError::EmptyBatchSupport);
        }
        if entries.len() > MAX_SUPPORT {
            return Err(PollingError::InvalidBatchSupport(format!(
                "{} support points exceed the limit of {MAX_SUPPORT}",
                entries.len()
            )));
        }
        let mut total = 0.0;
        for e in &entries {
            if e.k.len() != n {
                return Err(PollingError::InvalidBatchSupport(format!(
                    "batch vector {:?} has length {}, expected {n}",
                    e.k,
                    e.k.len()
                )));
            }
            if e.k.iter().all(|&x| x == 0) {
                return Err(PollingError::InvalidBatchSupport("zero batch vector in support".into()));
            }
            if !(e.p.is_finite() && e.p > 0.0) {
                return Err(PollingError::InvalidBatchSupport(format!(
                    "probability {} of {:?} is not positive",
                    e.p, e.k
                )));
            }
            total += e.p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(PollingError::InvalidBatchSupport(format!(
                "probabilities sum to {total}, not 1"
            )));
        }

        let mut mean = vec![0.0; n];
        let mut cross = vec![vec![0.0; n]; n];
        let mut completion = vec![vec![0.0; n]; n];
        let mut weighted = vec![vec![vec![0.0; n]; n]; n];
        for e in &entries {
            for i in 0..n {
                let ki = e.k[i] as f64;
                mean[i] += e.p * ki;
                for j in 0..n {
                    let kj = e.k[j] as f64;
                    cross[i][j] += e.p * if i == j { ki * (ki - 1.0) } else { ki * kj };
                }
            }
            for start in 0..n {
                let end = last_queue(&e.k, start).expect("nonzero batch");
                completion[start][end] += e.p;
                for l in 0..n {
                    weighted[start][end][l] += e.p * e.k[l] as f64;
                }
            }
        }
        let cond_mean = (0..n)
            .map(|s| {
                (0..n)
                    .map(|e| {
                        let pr = completion[s][e];
                        weighted[s][e].iter().map(|&w| if pr > 0.0 { w / pr } else { 0.0 }).collect()
                    })
                    .collect()
            })
            .collect();
        let mut acc = 0.0;
        let cumulative = entries
            .iter()
            .map(|e| {
                acc += e.p;
                acc
            })
            .collect();
        Ok(BatchSupport { n, entries, mean, cross, completion, cond_mean, cumulative })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[BatchEntry] {
        &self.entries
    }

    /// E(K_i).
    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    /// E(K_ij): E(K_i K_j) for i ≠ j and E(K_i²) - E(K_i) for i = j.
    pub fn factorial_cross(&self, i: usize, j: usize) -> f64 {
        self.cross[i][j]
    }

    /// E(K_ij)/E(K_j): expected batch-mates in queue i seen by a customer of queue j.
    /// Zero when queue j never receives customers.
    pub fn batch_mates(&self, i: usize, j: usize) -> f64 {
        if self.mean[j] > 0.0 {
            self.cross[i][j] / self.mean[j]
        } else {
            0.0
        }
    }

    pub fn completion_probability(&self, start: usize, end: usize) -> f64 {
        self.completion[start][end]
    }

    pub fn conditional_mean(&self, l: usize, start: usize, end: usize) -> Result<f64> {
        if self.completion[start][end] > 0.0 {
            Ok(self.cond_mean[start][end][l])
        } else {
            Err(PollingError::EmptyConditioningSet { start, end })
        }
    }

    /// Vector of conditional means E(K_l | completion set), all l.
    pub fn conditional_means(&self, start: usize, end: usize) -> Result<&[f64]> {
        if self.completion[start][end] > 0.0 {
            Ok(&self.cond_mean[start][end])
        } else {
            Err(PollingError::EmptyConditioningSet { start, end })
        }
    }

    /// Joint PGF E(Π z_l^{K_l}).
    pub fn pgf(&self, z: &[f64]) -> f64 {
        self.entries.iter().map(|e| e.p * monomial(&e.k, z)).sum()
    }

    /// 1 - PGF at z, exact at z = 1 regardless of probability rounding.
    pub fn pgf_complement(&self, z: &[f64]) -> f64 {
        self.entries.iter().map(|e| e.p * (1.0 - monomial(&e.k, z))).sum()
    }

    /// Marginal PGF of K_j at x.
    pub fn marginal_pgf(&self, j: usize, x: f64) -> f64 {
        self.entries.iter().map(|e| e.p * x.powi(e.k[j] as i32)).sum()
    }

    /// PGF conditioned on the completion set (start, end). Coordinates outside the
    /// span start..end are ignored since those counts are zero on the set.
    pub fn conditional_pgf(&self, z: &[f64], start: usize, end: usize) -> Result<f64> {
        let pr = self.completion[start][end];
        if pr <= 0.0 {
            return Err(PollingError::EmptyConditioningSet { start, end });
        }
        let mut sum = 0.0;
        for e in &self.entries {
            if last_queue(&e.k, start) == Some(end) {
                sum += e.p * span(start, end, self.n).map(|l| z[l].powi(e.k[l] as i32)).product::<f64>();
            }
        }
        Ok(sum / pr)
    }

    /// Index of the support entry selected by a uniform draw `u` in [0, 1).
    pub fn select(&self, u: f64) -> usize {
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.entries.len() - 1)
    }
}

#[inline]
pub fn monomial(k: &[u32], z: &[f64]) -> f64 {
    k.iter().zip(z).map(|(&kl, &zl)| if kl == 0 { 1.0 } else { zl.powi(kl as i32) }).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn support(n: usize, pts: &[(&[u32], f64)]) -> BatchSupport {
        BatchSupport::new(n, pts.iter().map(|(k, p)| BatchEntry { k: k.to_vec(), p: *p }).collect()).unwrap()
    }

    #[test]
    fn sym_pair() {
        let b = support(2, &[(&[1, 1], 1.0)]);
        assert_eq!(b.completion_probability(0, 1), 1.0);
        assert_eq!(b.completion_probability(0, 0), 0.0);
        assert_eq!(b.completion_probability(1, 0), 1.0);
        assert_eq!(b.conditional_mean(0, 0, 1).unwrap(), 1.0);
        assert_eq!(b.conditional_mean(1, 0, 1).unwrap(), 1.0);
        assert_eq!(b.pgf(&[0.5, 0.5]), 0.25);
        assert_eq!(b.conditional_pgf(&[0.5, 0.5], 0, 1).unwrap(), 0.25);
        assert_eq!(b.factorial_cross(0, 0), 0.0);
        assert_eq!(b.factorial_cross(0, 1), 1.0);
        assert!(matches!(b.conditional_mean(0, 0, 0), Err(PollingError::EmptyConditioningSet { .. })));
    }

    #[test]
    fn single_queue_batches() {
        let b = support(3, &[(&[1, 0, 0], 1.0)]);
        assert_eq!(b.completion_probability(0, 0), 1.0);
        assert_eq!(b.completion_probability(0, 1), 0.0);
        assert_eq!(b.completion_probability(0, 2), 0.0);
    }

    #[test]
    fn unit_batches() {
        let t = 1.0 / 3.0;
        let b = support(3, &[(&[1, 0, 0], t), (&[0, 1, 0], t), (&[0, 0, 1], 1.0 - 2.0 * t)]);
        for e in 0..3 {
            assert!((b.completion_probability(0, e) - t).abs() < 1e-15);
        }
        assert_eq!(b.conditional_mean(1, 0, 1).unwrap(), 1.0);
        assert!((b.pgf(&[0.2, 1.0, 1.0]) - 2.2 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn model_c_conditioning() {
        let b = support(3, &[(&[1, 1, 0], 0.8), (&[1, 0, 3], 0.2)]);
        assert!((b.conditional_mean(0, 0, 2).unwrap() - 1.0).abs() < 1e-14);
        assert!((b.conditional_mean(2, 0, 2).unwrap() - 3.0).abs() < 1e-14);
        assert_eq!(b.conditional_pgf(&[0.5, 0.5, 0.3], 0, 1).unwrap(), 0.25);
        assert!((b.mean(1) - 0.8).abs() < 1e-15 && (b.mean(2) - 0.6).abs() < 1e-15);
        // start at queue 3: (1,1,0) ends at queue 2, (1,0,3) ends at queue 1
        assert!((b.completion_probability(2, 1) - 0.8).abs() < 1e-15);
        assert!((b.completion_probability(2, 0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_supports() {
        assert!(matches!(BatchSupport::new(2, vec![]), Err(PollingError::EmptyBatchSupport)));
        let zero = vec![BatchEntry { k: vec![0, 0], p: 1.0 }];
        assert!(BatchSupport::new(2, zero).is_err());
        let short = vec![BatchEntry { k: vec![1, 0], p: 0.9 }];
        assert!(BatchSupport::new(2, short).is_err());
    }

    #[test]
    fn selection_follows_cumulative() {
        let b = support(2, &[(&[1, 0], 0.25), (&[0, 1], 0.75)]);
        assert_eq!(b.select(0.0), 0);
        assert_eq!(b.select(0.2499), 0);
        assert_eq!(b.select(0.25), 1);
        assert_eq!(b.select(0.999_999), 1);
    }
}
