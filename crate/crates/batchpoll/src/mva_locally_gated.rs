//! Mean value analysis for locally-gated service.
//!
//! Here θ_j pairs the visit of queue j with the switch-over that follows it.
//! Customers arriving at the queue being visited wait before the gate; the
//! unknowns are the before-gate means E(L̃_i | θ_j) and the behind-gate means
//! E(L̂_i | θ_i).

use crate::batch::last_queue;
use crate::cyclic::{pred, span, span_excl, succ};
use crate::error::Result;
use crate::linalg::System;
use crate::model::PollingModel;
use crate::MeanAnalysis;

/// Mean of a service in queue j plus all descendants served before the server
/// starts queue i.
pub fn descendant_service_mean_lg(model: &PollingModel, j: usize, i: usize) -> f64 {
    grow(model, j, i, model.service(j).mean())
}

pub fn descendant_service_residual_mean_lg(model: &PollingModel, j: usize, i: usize) -> f64 {
    grow(model, j, i, model.service(j).residual_mean())
}

pub fn descendant_switch_mean_lg(model: &PollingModel, j: usize, i: usize) -> f64 {
    grow(model, j, i, model.switch(j).mean())
}

pub fn descendant_switch_residual_mean_lg(model: &PollingModel, j: usize, i: usize) -> f64 {
    grow(model, j, i, model.switch(j).residual_mean())
}

fn grow(model: &PollingModel, j: usize, i: usize, x: f64) -> f64 {
    let n = model.n();
    if i == succ(j, n) {
        return x;
    }
    x * span_excl(succ(j, n), i, n).map(|l| 1.0 + model.rho(l)).product::<f64>()
}

#[derive(Debug, Clone)]
pub struct LocallyGatedMva {
    model: PollingModel,
    mean_cycle: f64,
    visit: Vec<f64>,
    theta: Vec<f64>,
    before_gate: Vec<Vec<f64>>,
    behind_gate: Vec<f64>,
    mean_len: Vec<f64>,
    wait: Vec<f64>,
}

struct Affine {
    c: f64,
    coef: Vec<f64>,
}

pub fn solve_stationary_lg(model: &PollingModel) -> Result<LocallyGatedMva> {
    let n = model.n();
    let ec = model.mean_cycle();
    let visit: Vec<f64> = (0..n).map(|j| model.mean_visit(j)).collect();
    let theta: Vec<f64> = (0..n).map(|j| visit[j] + model.switch(j).mean()).collect();
    let mut mva = LocallyGatedMva {
        model: model.clone(),
        mean_cycle: ec,
        visit,
        theta,
        before_gate: vec![vec![0.0; n]; n],
        behind_gate: vec![0.0; n],
        mean_len: vec![0.0; n],
        wait: vec![0.0; n],
    };
    let it = |i: usize, j: usize| i * n + j;
    let ih = |i: usize| n * n + i;
    let mut sys = System::new(n * n + n);
    for i in 0..n {
        let lam_i = model.arrival_rate(i);
        for j in 0..n {
            let row = it(i, j);
            let tot: f64 = span(i, j, n).map(|l| mva.theta[l]).sum();
            for l in span(i, j, n) {
                sys.add(row, it(i, l), mva.theta[l] / tot);
            }
            let r = mva.residual(i, j, Some(i));
            for (col, c) in r.coef.iter().enumerate() {
                sys.add(row, col, -lam_i * c);
            }
            sys.add_rhs(row, lam_i * r.c);
        }
        let row = ih(i);
        for j in 0..n {
            sys.add(row, it(i, j), (1.0 - model.rho(i)) * mva.theta[j] / ec);
        }
        sys.add(row, ih(i), mva.theta[i] / ec);
        let r = mva.residual(i, pred(i, n), Some(i));
        for (col, c) in r.coef.iter().enumerate() {
            sys.add(row, col, -lam_i * c);
        }
        sys.add_rhs(row, lam_i * r.c + 0.5 * model.rho(i) * model.batch().batch_mates(i, i));
    }
    let x = sys.solve()?;
    for i in 0..n {
        for j in 0..n {
            mva.before_gate[i][j] = x[it(i, j)];
        }
        mva.behind_gate[i] = x[ih(i)];
    }
    for i in 0..n {
        let before: f64 = (0..n).map(|j| mva.theta[j] / ec * mva.before_gate[i][j]).sum();
        mva.mean_len[i] = before + mva.theta[i] / ec * mva.behind_gate[i];
        let r = mva.residual(i, pred(i, n), Some(i));
        let b = model.service(i).mean();
        mva.wait[i] = (before + 0.5 * model.batch().batch_mates(i, i)) * b + mva.eval(&r, &x);
    }
    Ok(mva)
}

impl LocallyGatedMva {
    fn eval(&self, r: &Affine, x: &[f64]) -> f64 {
        r.c + r.coef.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    fn unknowns(&self) -> Vec<f64> {
        let mut x: Vec<f64> = self.before_gate.iter().flatten().copied().collect();
        x.extend_from_slice(&self.behind_gate);
        x
    }

    /// Residual time from an arbitrary point of θ_a..θ_e until the server starts
    /// queue e+1. With a tagged queue, batch-mates of a customer arriving at that
    /// queue are included.
    fn residual(&self, a: usize, e: usize, tag: Option<usize>) -> Affine {
        let m = &self.model;
        let n = m.n();
        let end = succ(e, n);
        let mut out = Affine { c: 0.0, coef: vec![0.0; n * n + n] };
        let tot: f64 = span(a, e, n).map(|l| self.theta[l]).sum();
        if tot <= 0.0 {
            return out;
        }
        for l in span(a, e, n) {
            let w = self.theta[l] / tot;
            let (bl, sl) = (m.service(l), m.switch(l));
            out.c += (self.visit[l] * (grow(m, l, end, bl.residual_mean()) + grow(m, l, end, sl.mean()))
                + sl.mean() * grow(m, l, end, sl.residual_mean()))
                / tot;
            out.coef[n * n + l] += w * grow(m, l, end, bl.mean());
            if l == e {
                continue;
            }
            for q in span_excl(succ(l, n), end, n) {
                let d = grow(m, q, end, m.service(q).mean());
                out.coef[q * n + l] += w * d;
                out.c += w * (grow(m, q, end, m.switch(q).mean())
                    + tag.map_or(0.0, |t| m.batch().batch_mates(q, t)) * d);
            }
        }
        out
    }

    pub fn model(&self) -> &PollingModel {
        &self.model
    }

    pub fn mean_cycle(&self) -> f64 {
        self.mean_cycle
    }

    pub fn intervisit_mean(&self, j: usize) -> f64 {
        self.theta[j]
    }

    /// E(L̃_i | θ_j).
    pub fn before_gate(&self, i: usize, j: usize) -> f64 {
        self.before_gate[i][j]
    }

    /// E(L̂_i | θ_i).
    pub fn behind_gate(&self, i: usize) -> f64 {
        self.behind_gate[i]
    }

    /// E(L̄_i | θ_j): before-gate plus, for j = i, behind-gate customers.
    pub fn conditional_length(&self, i: usize, j: usize) -> f64 {
        self.before_gate[i][j] + if i == j { self.behind_gate[i] } else { 0.0 }
    }

    /// Expected time from an arbitrary point of θ_a..θ_e until the server starts queue e+1.
    pub fn residual_span(&self, a: usize, e: usize) -> f64 {
        self.eval(&self.residual(a, e, None), &self.unknowns())
    }

    /// Mean batch sojourn given arrival in θ_j1 and last member at `end`, for
    /// (possibly fractional) member counts `k`. Service order starts at j1+1.
    pub fn conditioned_sojourn(&self, j1: usize, end: usize, k: &[f64]) -> f64 {
        let m = &self.model;
        let n = m.n();
        if self.theta[j1] <= 0.0 {
            return 0.0;
        }
        let j = succ(j1, n);
        let (b1, s1) = (m.service(j1), m.switch(j1));
        let mut t = (self.visit[j1] * (grow(m, j1, end, b1.residual_mean()) + grow(m, j1, end, s1.mean()))
            + s1.mean() * grow(m, j1, end, s1.residual_mean()))
            / self.theta[j1]
            + self.behind_gate[j1] * grow(m, j1, end, b1.mean());
        for q in span_excl(j, end, n) {
            t += (self.before_gate[q][j1] + k[q]) * grow(m, q, end, m.service(q).mean())
                + grow(m, q, end, m.switch(q).mean());
        }
        t + (self.before_gate[end][j1] + k[end]) * m.service(end).mean()
    }
}

impl MeanAnalysis for LocallyGatedMva {
    fn model(&self) -> &PollingModel {
        &self.model
    }

    fn mean_batch_sojourn_specific(&self, k: &[u32]) -> Result<f64> {
        crate::check_batch(&self.model, k)?;
        let kf: Vec<f64> = k.iter().map(|&x| x as f64).collect();
        let n = self.model.n();
        Ok((0..n)
            .map(|j1| {
                let end = last_queue(k, succ(j1, n)).expect("checked nonzero");
                self.theta[j1] / self.mean_cycle * self.conditioned_sojourn(j1, end, &kf)
            })
            .sum())
    }

    fn mean_batch_sojourn(&self) -> f64 {
        let n = self.model.n();
        let b = self.model.batch();
        let mut tot = 0.0;
        for j1 in 0..n {
            let j = succ(j1, n);
            for end in 0..n {
                let p = b.completion_probability(j, end);
                if p > 0.0 {
                    let km = b.conditional_means(j, end).expect("positive probability");
                    tot += self.theta[j1] / self.mean_cycle * p * self.conditioned_sojourn(j1, end, km);
                }
            }
        }
        tot
    }

    fn mean_wait(&self, i: usize) -> f64 {
        self.wait[i]
    }

    fn mean_queue_length(&self, i: usize) -> f64 {
        self.mean_len[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;

    #[test]
    fn descendant_means() {
        let m = builtin::sym2(0.2, 1.0, 1.0).unwrap();
        assert_eq!(descendant_service_mean_lg(&m, 0, 1), 1.0);
        assert!((descendant_service_mean_lg(&m, 0, 0) - 1.2).abs() < 1e-12);
        let a = builtin::model_a(0.5).unwrap();
        assert!((descendant_service_mean_lg(&a, 0, 2) - (1.0 + a.rho(1))).abs() < 1e-12);
    }

    #[test]
    fn sym_matches_closed_form() {
        let m = builtin::sym2(0.2, 1.0, 1.0).unwrap();
        let s = solve_stationary_lg(&m).unwrap();
        assert!((s.behind_gate(0) - 0.192 / 0.72).abs() < 1e-12);
        assert!((s.mean_batch_sojourn() - 19.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn low_load_limit() {
        let m = builtin::sym2(1e-9, 1.0, 1.0).unwrap();
        let s = solve_stationary_lg(&m).unwrap();
        for i in 0..2 {
            assert!(s.behind_gate(i).abs() < 1e-7);
            for j in 0..2 {
                assert!(s.before_gate(i, j).abs() < 1e-7);
            }
        }
        assert!((s.mean_batch_sojourn_specific(&[1, 1]).unwrap() - 4.0).abs() < 1e-6);
    }

    #[test]
    fn little_and_aggregation() {
        let m = builtin::model_a(0.5).unwrap();
        let s = solve_stationary_lg(&m).unwrap();
        for i in 0..3 {
            let lw = m.arrival_rate(i) * s.mean_wait(i);
            assert!((lw - s.mean_queue_length(i)).abs() <= 1e-9 * lw);
        }
        let agg: f64 = m
            .batch()
            .entries()
            .iter()
            .map(|e| e.p * s.mean_batch_sojourn_specific(&e.k).unwrap())
            .sum();
        assert!((agg - s.mean_batch_sojourn()).abs() < 1e-12 * agg);
    }
}
