//! Globally-gated service: all gates close when the server starts queue 1, so
//! every batch is completed within the cycle after the one it arrives in.

use crate::batch::{last_queue, monomial};
use crate::error::{PollingError, Result};
use crate::model::PollingModel;
use crate::transform::PgfEvalResult;
use crate::MeanAnalysis;

pub const CYCLE_TOL: f64 = 1e-14;
pub const CYCLE_CAP: usize = 100_000;
// Below this gap the difference quotient is replaced by the midpoint derivative,
// whose error is of order gap² times the third moment.
const PR_TAYLOR_BAND: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgCycle {
    pub mean_cycle: f64,
    pub second_moment: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct GloballyGated {
    model: PollingModel,
    cycle: GgCycle,
}

/// E(C²) for the cycle that starts at the visit beginning of queue 1.
pub fn cycle_second_moment(model: &PollingModel) -> GgCycle {
    let n = model.n();
    let cq = model.cycle();
    let ec = cq.mean_cycle;
    let rho = model.total_load();
    let b = model.batch();
    let own: f64 = (0..n).map(|j| model.arrival_rate(j) * model.service(j).second_moment()).sum();
    let mut pairs = 0.0;
    for i in 0..n {
        for j in 0..n {
            pairs += b.factorial_cross(i, j) * model.service(i).mean() * model.service(j).mean();
        }
    }
    let num = cq.second_moment_switch_total
        + 2.0 * rho * cq.mean_switch_total * ec
        + own * ec
        + model.lambda() * pairs * ec;
    let second_moment = num / (1.0 - rho * rho);
    GgCycle { mean_cycle: ec, second_moment, residual: second_moment / (2.0 * ec) }
}

pub fn analyze(model: &PollingModel) -> GloballyGated {
    GloballyGated { model: model.clone(), cycle: cycle_second_moment(model) }
}

impl GloballyGated {
    pub fn model(&self) -> &PollingModel {
        &self.model
    }

    pub fn cycle(&self) -> GgCycle {
        self.cycle
    }

    /// Mean sojourn of a batch whose last member sits at `end`, for fractional counts `k`.
    pub fn conditioned_sojourn(&self, end: usize, k: &[f64]) -> f64 {
        let m = &self.model;
        let before: f64 = (0..end).map(|j| m.rho(j)).sum();
        (1.0 + 2.0 * before + m.rho(end)) * self.cycle.residual
            + (0..end).map(|j| m.switch(j).mean()).sum::<f64>()
            + (0..=end).map(|j| k[j] * m.service(j).mean()).sum::<f64>()
    }

    /// C̃(ω) by unrolling C̃(ω) = S̃(ω) C̃(f(ω)), f(ω) = λ(1 - K̃(B̃_1(ω), …, B̃_N(ω))).
    pub fn cycle_lst(&self, w: f64) -> Result<PgfEvalResult> {
        self.model.require_transforms()?;
        self.cycle_lst_inner(w).map(|(r, _)| r)
    }

    /// Cycle transform and its derivative in ω.
    pub fn cycle_lst_with_derivative(&self, w: f64) -> Result<(f64, f64)> {
        self.model.require_transforms()?;
        self.cycle_lst_inner(w).map(|(r, d)| (r.value, d))
    }

    fn cycle_lst_inner(&self, w: f64) -> Result<(PgfEvalResult, f64)> {
        let m = &self.model;
        let n = m.n();
        let mut g = w;
        let mut dg = 1.0;
        let mut log_sum = 0.0f64;
        let mut dlog = 0.0;
        let mut z = vec![0.0; n];
        let mut dz = vec![0.0; n];
        for it in 0..CYCLE_CAP {
            if g.abs() < CYCLE_TOL {
                let value = log_sum.exp();
                let res = PgfEvalResult { value, iterations: it, residual: g.abs() };
                return Ok((res, value * dlog));
            }
            for j in 0..n {
                let s = m.switch(j);
                let v = s.lst(g);
                log_sum += v.ln();
                dlog += s.lst_derivative(g) / v * dg;
                z[j] = m.service(j).lst(g);
                dz[j] = m.service(j).lst_derivative(g) * dg;
            }
            let (kz, dk) = pgf_and_directional(m, &z, &dz);
            g = m.lambda() * (1.0 - kz);
            dg = -m.lambda() * dk;
        }
        Err(PollingError::NonConvergence { what: "cycle transform", iterations: CYCLE_CAP })
    }

    // E[exp(-wp C^P - wr C^R)] for the joint past and residual cycle.
    fn cycle_past_residual(&self, wp: f64, wr: f64) -> Result<f64> {
        let ec = self.cycle.mean_cycle;
        let d = wp - wr;
        if d.abs() < PR_TAYLOR_BAND {
            let (_, dc) = self.cycle_lst_with_derivative(0.5 * (wp + wr))?;
            return Ok(-dc / ec);
        }
        let cr = self.cycle_lst(wr)?.value;
        let cp = self.cycle_lst(wp)?.value;
        Ok((cr - cp) / (ec * d))
    }

    // The factor shared by all batches whose last member is at `end`, and the
    // vector at which their members' counts are evaluated.
    fn kernel(&self, end: usize, w: f64) -> Result<(f64, Vec<f64>)> {
        let m = &self.model;
        let n = m.n();
        let mut z = vec![1.0; n];
        for (j, zj) in z.iter_mut().enumerate().take(end) {
            *zj = m.service(j).lst(w);
        }
        let before = m.batch().pgf(&z);
        z[end] = m.service(end).lst(w);
        let through = m.batch().pgf(&z);
        let wp = m.lambda() * (1.0 - through);
        let wr = w + m.lambda() * (1.0 - before);
        let switches: f64 = (0..end).map(|j| m.switch(j).lst(w)).product();
        Ok((self.cycle_past_residual(wp, wr)? * switches, z))
    }

    /// Sojourn-time transform of a batch `k`.
    pub fn sojourn_lst_gg(&self, k: &[u32], w: f64) -> Result<f64> {
        crate::check_batch(&self.model, k)?;
        self.model.require_transforms()?;
        if w == 0.0 {
            return Ok(1.0);
        }
        let end = last_queue(k, 0).expect("checked nonzero");
        let (base, z) = self.kernel(end, w)?;
        Ok(base * monomial(k, &z))
    }

    /// Sojourn-time transform of an arbitrary batch.
    pub fn sojourn_lst_gg_arbitrary(&self, w: f64) -> Result<f64> {
        self.model.require_transforms()?;
        if w == 0.0 {
            return Ok(1.0);
        }
        let b = self.model.batch();
        let mut tot = 0.0;
        for end in 0..self.model.n() {
            let p = b.completion_probability(0, end);
            if p > 0.0 {
                let (base, z) = self.kernel(end, w)?;
                tot += p * base * b.conditional_pgf(&z, 0, end)?;
            }
        }
        Ok(tot)
    }
}

// K̃(z) and its derivative along dz.
fn pgf_and_directional(m: &PollingModel, z: &[f64], dz: &[f64]) -> (f64, f64) {
    let mut val = 0.0;
    let mut der = 0.0;
    for e in m.batch().entries() {
        let mono = monomial(&e.k, z);
        val += e.p * mono;
        for (l, &kl) in e.k.iter().enumerate() {
            if kl == 0 {
                continue;
            }
            let rest: f64 = e
                .k
                .iter()
                .zip(z)
                .enumerate()
                .filter(|&(q, _)| q != l)
                .map(|(_, (&kq, &zq))| zq.powi(kq as i32))
                .product();
            der += e.p * kl as f64 * z[l].powi(kl as i32 - 1) * rest * dz[l];
        }
    }
    (val, der)
}

impl MeanAnalysis for GloballyGated {
    fn model(&self) -> &PollingModel {
        &self.model
    }

    fn mean_batch_sojourn_specific(&self, k: &[u32]) -> Result<f64> {
        crate::check_batch(&self.model, k)?;
        let end = last_queue(k, 0).expect("checked nonzero");
        let kf: Vec<f64> = k.iter().map(|&x| x as f64).collect();
        Ok(self.conditioned_sojourn(end, &kf))
    }

    fn mean_batch_sojourn(&self) -> f64 {
        let b = self.model.batch();
        (0..self.model.n())
            .filter(|&end| b.completion_probability(0, end) > 0.0)
            .map(|end| {
                let km = b.conditional_means(0, end).expect("positive probability");
                b.completion_probability(0, end) * self.conditioned_sojourn(end, km)
            })
            .sum()
    }

    /// A customer of queue i waits for the rest of the current cycle, the work
    /// gated at queues before i, the switch-overs up to i, and the work ahead of
    /// it at queue i, including its own batch-mates.
    fn mean_wait(&self, i: usize) -> f64 {
        let m = &self.model;
        let b = m.batch();
        let before: f64 = (0..i).map(|j| m.rho(j)).sum();
        (1.0 + 2.0 * before + m.rho(i)) * self.cycle.residual
            + (0..i).map(|j| m.switch(j).mean() + b.batch_mates(j, i) * m.service(j).mean()).sum::<f64>()
            + 0.5 * b.batch_mates(i, i) * m.service(i).mean()
    }

    fn mean_queue_length(&self, i: usize) -> f64 {
        self.model.arrival_rate(i) * self.mean_wait(i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::dist::Dist;
    use crate::model::Discipline;

    #[test]
    fn sym_mean_sojourn() {
        let m = builtin::sym2(0.2, 1.0, 1.0).unwrap();
        let g = analyze(&m);
        let r: f64 = 0.4;
        let want = (0.5 * r * r - 0.5 * r * r + 3.0 * r + 5.5 * r + 4.0 + 5.0) / (2.0 * (1.0 + r) * (1.0 - r));
        assert!((g.mean_batch_sojourn() - want).abs() < 1e-12);
        assert!((g.mean_batch_sojourn_specific(&[1, 1]).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn zero_load_cycle() {
        let m = builtin::sym2(0.0, 1.0, 1.0).unwrap();
        let g = analyze(&m).cycle();
        let es2 = m.cycle().second_moment_switch_total;
        assert!((g.second_moment - es2).abs() < 1e-12);
        assert!((g.residual - es2 / 4.0).abs() < 1e-12);
        let t = analyze(&m).mean_batch_sojourn_specific(&[1, 0]).unwrap();
        assert!((t - (es2 / 4.0 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn deterministic_switch_residual() {
        let base = builtin::sym2(0.0, 1.0, 1.0).unwrap();
        let m = PollingModel::new(
            0.0,
            base.batch().clone(),
            vec![Dist::exponential(1.0).unwrap(); 2],
            vec![Dist::deterministic(0.7).unwrap(); 2],
            Discipline::GloballyGated,
        )
        .unwrap();
        assert!((analyze(&m).cycle().residual - 0.7).abs() < 1e-12);
    }

    #[test]
    fn cycle_transform_normalized_and_mean() {
        let m = builtin::sym2(0.2, 1.0, 1.0).unwrap();
        let g = analyze(&m);
        assert_eq!(g.cycle_lst(0.0).unwrap().value, 1.0);
        let h = 1e-5;
        let d = (g.cycle_lst(h).unwrap().value - g.cycle_lst(0.0).unwrap().value) / h;
        assert!((-d - m.mean_cycle()).abs() < 1e-4 * m.mean_cycle());
        let (v, dv) = g.cycle_lst_with_derivative(0.3).unwrap();
        let fd = (g.cycle_lst(0.3 + 1e-6).unwrap().value - g.cycle_lst(0.3 - 1e-6).unwrap().value) / 2e-6;
        assert!((dv - fd).abs() < 1e-7);
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn past_residual_continuous() {
        let g = analyze(&builtin::model_a(0.4).unwrap());
        let a = g.cycle_past_residual(0.3, 0.3).unwrap();
        for gap in [1e-9, 1e-6, 2e-5, 5e-5] {
            let b = g.cycle_past_residual(0.3, 0.3 + gap).unwrap();
            let c = g.cycle_past_residual(0.3 + gap, 0.3).unwrap();
            let mid = g.cycle_past_residual(0.3 + 0.5 * gap, 0.3 + 0.5 * gap).unwrap();
            assert!((b - c).abs() < 1e-8, "gap {gap}");
            assert!((b - mid).abs() < 1e-8, "gap {gap}");
            assert!((a - b).abs() < gap, "gap {gap}");
        }
    }
}
