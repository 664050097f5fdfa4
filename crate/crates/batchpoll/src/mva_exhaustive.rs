//! Mean value analysis for exhaustive service.
//!
//! The intervisit period θ_j pairs the switch-over into queue j with the visit of
//! queue j. Unknowns are the mean queue lengths E(L̄_i | θ_j), excluding any
//! customer in service.

use crate::batch::last_queue;
use crate::cyclic::{pred, span, span_excl, succ};
use crate::error::Result;
use crate::linalg::System;
use crate::model::PollingModel;
use crate::MeanAnalysis;

/// Mean of a service in queue j plus all descendants served before the server
/// starts queue i. Equal to the plain mean when i = j.
pub fn descendant_service_mean(model: &PollingModel, j: usize, i: usize) -> f64 {
    bm(model, j, i, model.service(j).mean())
}

pub fn descendant_service_residual_mean(model: &PollingModel, j: usize, i: usize) -> f64 {
    bm(model, j, i, model.service(j).residual_mean())
}

/// Service in queue j with all descendants served during one full cycle of visits
/// starting at queue j.
pub fn descendant_service_mean_full_cycle(model: &PollingModel, j: usize) -> f64 {
    let n = model.n();
    model.service(j).mean() / (0..n).map(|l| 1.0 - model.rho(l)).product::<f64>()
}

/// Switch-over after queue j plus descendants served before the server starts queue i.
pub fn descendant_switch_mean(model: &PollingModel, j: usize, i: usize) -> f64 {
    sm(model, j, i, model.switch(j).mean())
}

pub fn descendant_switch_residual_mean(model: &PollingModel, j: usize, i: usize) -> f64 {
    sm(model, j, i, model.switch(j).residual_mean())
}

fn bm(model: &PollingModel, j: usize, i: usize, x: f64) -> f64 {
    if i == j {
        return x;
    }
    x / span_excl(j, i, model.n()).map(|l| 1.0 - model.rho(l)).product::<f64>()
}

fn sm(model: &PollingModel, j: usize, i: usize, x: f64) -> f64 {
    let n = model.n();
    if i == succ(j, n) {
        return x;
    }
    x / span_excl(succ(j, n), i, n).map(|l| 1.0 - model.rho(l)).product::<f64>()
}

#[derive(Debug, Clone)]
pub struct ExhaustiveMva {
    model: PollingModel,
    mean_cycle: f64,
    visit: Vec<f64>,
    theta: Vec<f64>,
    cond_len: Vec<Vec<f64>>,
    mean_len: Vec<f64>,
    wait: Vec<f64>,
}

// Affine expression c + Σ coef·x over the unknowns.
struct Affine {
    c: f64,
    coef: Vec<f64>,
}

pub fn solve_stationary(model: &PollingModel) -> Result<ExhaustiveMva> {
    let n = model.n();
    let ec = model.mean_cycle();
    let visit: Vec<f64> = (0..n).map(|j| model.mean_visit(j)).collect();
    let theta: Vec<f64> = (0..n).map(|j| model.switch(pred(j, n)).mean() + visit[j]).collect();
    let mut mva = ExhaustiveMva {
        model: model.clone(),
        mean_cycle: ec,
        visit,
        theta,
        cond_len: vec![vec![0.0; n]; n],
        mean_len: vec![0.0; n],
        wait: vec![0.0; n],
    };

    let idx = |i: usize, j: usize| i * n + j;
    let mut sys = System::new(n * n);
    for i in 0..n {
        let lam_i = model.arrival_rate(i);
        for j in (0..n).filter(|&j| j != i) {
            let row = idx(i, j);
            let a = succ(i, n);
            let tot: f64 = span(a, j, n).map(|l| mva.theta[l]).sum();
            for l in span(a, j, n) {
                sys.add(row, idx(i, l), mva.theta[l] / tot);
            }
            let r = mva.residual(a, j, Some(i));
            for (col, c) in r.coef.iter().enumerate() {
                sys.add(row, col, -lam_i * c);
            }
            sys.add_rhs(row, lam_i * r.c);
        }
        let row = idx(i, i);
        for j in 0..n {
            sys.add(row, idx(i, j), mva.theta[j] / ec);
        }
        let (cst, far, r) = mva.wait_terms(i);
        let f = lam_i / (1.0 - model.rho(i));
        for (col, c) in r.coef.iter().enumerate() {
            sys.add(row, col, -f * far * c);
        }
        sys.add_rhs(row, f * cst);
    }
    let x = sys.solve()?;
    for i in 0..n {
        for j in 0..n {
            mva.cond_len[i][j] = x[idx(i, j)];
        }
        mva.mean_len[i] = (0..n).map(|j| mva.theta[j] / ec * x[idx(i, j)]).sum();
        let (cst, far, r) = mva.wait_terms(i);
        let dot: f64 = r.coef.iter().zip(&x).map(|(c, v)| c * v).sum();
        mva.wait[i] = (cst + far * dot) / (1.0 - model.rho(i));
    }
    Ok(mva)
}

impl ExhaustiveMva {
    fn rate_mates(&self, q: usize, tag: Option<usize>) -> f64 {
        tag.map_or(0.0, |t| self.model.batch().batch_mates(q, t))
    }

    /// Residual time from an arbitrary point of the span θ_a..θ_e until the server
    /// starts queue e+1, as an affine function of the unknowns. With a tagged queue,
    /// batch-mates of a customer arriving at that queue are included.
    fn residual(&self, a: usize, e: usize, tag: Option<usize>) -> Affine {
        let m = &self.model;
        let n = m.n();
        let end = succ(e, n);
        let mut out = Affine { c: 0.0, coef: vec![0.0; n * n] };
        let tot: f64 = span(a, e, n).map(|l| self.theta[l]).sum();
        if tot <= 0.0 {
            return out;
        }
        for l in span(a, e, n) {
            let w = self.theta[l] / tot;
            let pl = pred(l, n);
            out.c += (self.visit[l] * bm(m, l, end, m.service(l).residual_mean())
                + m.switch(pl).mean() * sm(m, pl, end, m.switch(pl).residual_mean()))
                / tot;
            for q in span(l, e, n) {
                let d = bm(m, q, end, m.service(q).mean());
                out.coef[q * n + l] += w * d;
                out.c += w * self.rate_mates(q, tag) * d;
            }
            for q in span_excl(l, e, n) {
                out.c += w * sm(m, q, end, m.switch(q).mean());
            }
        }
        out
    }

    // Waiting time of a customer at queue i is (cst + far·(residual·x)) / (1 - ρ_i).
    fn wait_terms(&self, i: usize) -> (f64, f64, Affine) {
        let m = &self.model;
        let n = m.n();
        let ec = self.mean_cycle;
        let pi = pred(i, n);
        let r = self.residual(succ(i, n), pi, Some(i));
        let far = 1.0 - self.theta[i] / ec;
        let s_prev = m.switch(pi);
        let cst = 0.5 * m.batch().batch_mates(i, i) * m.service(i).mean()
            + m.rho(i) * m.service(i).residual_mean()
            + s_prev.mean() / ec * s_prev.residual_mean()
            + far * (r.c + s_prev.mean());
        (cst, far, r)
    }

    pub fn model(&self) -> &PollingModel {
        &self.model
    }

    pub fn mean_cycle(&self) -> f64 {
        self.mean_cycle
    }

    /// E(θ_j).
    pub fn intervisit_mean(&self, j: usize) -> f64 {
        self.theta[j]
    }

    /// E(L̄_i | θ_j).
    pub fn conditional_length(&self, i: usize, j: usize) -> f64 {
        self.cond_len[i][j]
    }

    /// Expected time from an arbitrary point of θ_a..θ_e until the server starts queue e+1.
    pub fn residual_span(&self, a: usize, e: usize) -> f64 {
        let r = self.residual(a, e, None);
        let n = self.model.n();
        r.c + (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| r.coef[i * n + j] * self.cond_len[i][j]).sum::<f64>()
    }

    /// Mean batch sojourn given arrival in θ_j and last member at `end`, for
    /// (possibly fractional) member counts `k`.
    pub fn conditioned_sojourn(&self, j: usize, end: usize, k: &[f64]) -> f64 {
        let m = &self.model;
        let n = m.n();
        if self.theta[j] <= 0.0 {
            return 0.0;
        }
        let pj = pred(j, n);
        let mut t = (self.visit[j] * bm(m, j, end, m.service(j).residual_mean())
            + m.switch(pj).mean() * sm(m, pj, end, m.switch(pj).residual_mean()))
            / self.theta[j];
        for l in span(j, end, n) {
            t += (self.cond_len[l][j] + k[l]) * bm(m, l, end, m.service(l).mean());
        }
        for q in span_excl(j, end, n) {
            t += sm(m, q, end, m.switch(q).mean());
        }
        t
    }
}

impl MeanAnalysis for ExhaustiveMva {
    fn model(&self) -> &PollingModel {
        &self.model
    }

    fn mean_batch_sojourn_specific(&self, k: &[u32]) -> Result<f64> {
        crate::check_batch(&self.model, k)?;
        let kf: Vec<f64> = k.iter().map(|&x| x as f64).collect();
        let n = self.model.n();
        Ok((0..n)
            .map(|j| {
                let end = last_queue(k, j).expect("checked nonzero");
                self.theta[j] / self.mean_cycle * self.conditioned_sojourn(j, end, &kf)
            })
            .sum())
    }

    fn mean_batch_sojourn(&self) -> f64 {
        let n = self.model.n();
        let b = self.model.batch();
        let mut tot = 0.0;
        for j in 0..n {
            for end in 0..n {
                let p = b.completion_probability(j, end);
                if p > 0.0 {
                    let km = b.conditional_means(j, end).expect("positive probability");
                    tot += self.theta[j] / self.mean_cycle * p * self.conditioned_sojourn(j, end, km);
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
