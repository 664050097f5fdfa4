//! Pointwise transform evaluation for exhaustive and locally-gated service.
//!
//! Queue-length PGFs at visit beginnings are evaluated by unrolling the laws of
//! motion backwards through the cycle until the argument reaches the all-ones
//! vector. Sojourn-time transforms condition on the period the server is in when
//! the batch arrives.
//!
//! Busy periods with marked arrivals are computed as joint fixed points, so that
//! the arrivals to other queues during a busy period respect the correlation
//! inside each batch.

use crate::batch::{last_queue, monomial};
use crate::cyclic::{pred, span, span_len, succ};
use crate::error::{PollingError, Result};
use crate::model::{Discipline, PollingModel};

pub const FIXED_POINT_TOL: f64 = 1e-14;
pub const FIXED_POINT_CAP: usize = 1_000_000;
pub const UNROLL_TOL: f64 = 1e-14;
/// Below this distance a full cycle without progress counts as converged.
pub const UNROLL_STALL_TOL: f64 = 1e-10;
pub const UNROLL_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgfEvalResult {
    pub value: f64,
    pub iterations: usize,
    /// Distance of the final unrolled argument from the all-ones vector.
    pub residual: f64,
}

/// Server location at a batch arrival. `Switch(q)` is the switch-over from queue q to q+1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Period {
    Visit(usize),
    Switch(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescendantVectors {
    /// Coordinates j..i hold B̃_{l,i}(ω), the rest are 1.
    pub b: Vec<f64>,
    /// Coordinates j..i-1 hold B̃_{l,i-1}(ω), coordinate i holds B̃_i(ω).
    pub b_star: Vec<f64>,
}

// Backward sweep from queue `end`: states[t] has the t queues end, end-1, ...
// filled with their descendant transforms through the visit of `end`.
struct Chain {
    end: usize,
    states: Vec<Vec<f64>>,
}

impl Chain {
    fn steps_to(&self, l: usize) -> usize {
        let n = self.states[0].len();
        (self.end + n - l) % n
    }

    /// Vector with coordinates l+1..end filled.
    fn after(&self, l: usize) -> &[f64] {
        &self.states[self.steps_to(l)]
    }

    /// Vector with coordinates l..end filled.
    fn from(&self, l: usize) -> &[f64] {
        &self.states[self.steps_to(l) + 1]
    }

    fn value(&self, l: usize) -> f64 {
        self.from(l)[l]
    }
}

#[derive(Debug, Clone)]
pub struct TransformEngine {
    model: PollingModel,
    mean_cycle: f64,
}

impl TransformEngine {
    pub fn new(model: &PollingModel) -> Result<Self> {
        model.require_transforms()?;
        if model.discipline() == Discipline::GloballyGated {
            return Err(PollingError::InvalidModel(
                "globally-gated transforms are provided by the globally_gated module".into(),
            ));
        }
        Ok(TransformEngine { model: model.clone(), mean_cycle: model.mean_cycle() })
    }

    pub fn model(&self) -> &PollingModel {
        &self.model
    }

    fn exhaustive(&self) -> bool {
        self.model.discipline() == Discipline::Exhaustive
    }

    // λ(1 - K̃(z))
    fn arr(&self, z: &[f64]) -> f64 {
        self.model.lambda() * self.model.batch().pgf_complement(z)
    }

    /// Busy-period transform of queue j in isolation.
    pub fn busy_period_lst(&self, j: usize, w: f64) -> Result<f64> {
        if w == 0.0 {
            return Ok(1.0);
        }
        let m = &self.model;
        let lam = m.lambda();
        fixed_point(|x| m.service(j).lst(w + lam - lam * m.batch().marginal_pgf(j, x)))
    }

    /// E[exp(-w BP_j) Π_{l≠j} z_l^{N_l}], with N_l the arrivals to queue l during
    /// a busy period of queue j started by one customer. Coordinate j of `z` is ignored.
    pub fn marked_busy_period_lst(&self, j: usize, w: f64, z: &[f64]) -> Result<f64> {
        let m = &self.model;
        let lam = m.lambda();
        let mut y = z.to_vec();
        fixed_point(|x| {
            y[j] = x;
            m.service(j).lst(w + lam - lam * m.batch().pgf(&y))
        })
    }

    // Replaces coordinate q by the per-customer PGF of what one customer of queue q
    // leaves behind elsewhere when the visit of q is completed.
    fn visit_map(&self, q: usize, z: &mut [f64]) -> Result<()> {
        z[q] = if self.model.arrival_rate(q) == 0.0 {
            1.0
        } else if self.exhaustive() {
            self.marked_busy_period_lst(q, 0.0, z)?
        } else {
            self.model.service(q).lst(self.arr(z))
        };
        Ok(())
    }

    /// PGF of the queue lengths at the beginning of a visit to queue i. A gate
    /// coordinate beyond the first N entries is accepted and ignored.
    pub fn visit_begin_pgf(&self, i: usize, z: &[f64]) -> Result<PgfEvalResult> {
        let n = self.model.n();
        let mut z: Vec<f64> = (0..n)
            .map(|l| if self.model.arrival_rate(l) > 0.0 { z[l] } else { 1.0 })
            .collect();
        let mut log_prod = 0.0f64;
        let mut q = pred(i, n);
        let mut cycle_start = f64::INFINITY;
        for it in 0..UNROLL_CAP {
            let dist = z.iter().fold(0.0f64, |d, v| d.max((1.0 - v).abs()));
            let stalled = it % n == 0 && dist >= cycle_start && dist < UNROLL_STALL_TOL;
            if dist < UNROLL_TOL || stalled {
                return Ok(PgfEvalResult { value: log_prod.exp(), iterations: it, residual: dist });
            }
            if it % n == 0 {
                cycle_start = dist;
            }
            log_prod += self.model.switch(q).lst(self.arr(&z)).ln();
            self.visit_map(q, &mut z)?;
            q = pred(q, n);
        }
        Err(PollingError::NonConvergence { what: "cycle unrolling", iterations: UNROLL_CAP })
    }

    /// PGF at the completion of a visit to queue i. For locally-gated service `zg`
    /// marks customers that arrived at queue i during the visit.
    pub fn visit_complete_pgf(&self, i: usize, z: &[f64], zg: f64) -> Result<f64> {
        let n = self.model.n();
        let mut y = z[..n].to_vec();
        if self.exhaustive() {
            self.visit_map(i, &mut y)?;
        } else {
            y[i] = zg;
            y[i] = self.model.service(i).lst(self.arr(&y));
        }
        Ok(self.visit_begin_pgf(i, &y)?.value)
    }

    /// PGF at the beginning of the switch-over that follows the visit to queue i.
    pub fn switch_begin_pgf(&self, i: usize, z: &[f64]) -> Result<f64> {
        self.visit_complete_pgf(i, z, z[i])
    }

    // Numerator and denominator of the service-beginning PGF, without the z_i factor.
    fn service_begin_parts(&self, i: usize, z: &[f64], zg: f64) -> Result<(f64, f64)> {
        let m = &self.model;
        let n = m.n();
        let mut y = z[..n].to_vec();
        if !self.exhaustive() {
            y[i] = zg;
        }
        let bi = m.service(i).lst(self.arr(&y));
        let num = self.visit_complete_pgf(i, z, zg)? - self.visit_begin_pgf(i, z)?.value;
        let den = m.arrival_rate(i) * self.mean_cycle * (bi - z[i]);
        Ok((num, den))
    }

    // (LC^V - LB^V) / (λ_i E(C) (B̃_i(a) - z_i)), extrapolated across the
    // removable singularity where the denominator vanishes.
    fn service_ratio(&self, i: usize, z: &[f64], zg: f64) -> Result<f64> {
        let (num, den) = self.service_begin_parts(i, z, zg)?;
        if den.abs() > 1e-7 {
            return Ok(num / den);
        }
        let at = |d: f64| -> Result<f64> {
            let mut y = z.to_vec();
            y[i] += d;
            let (a, b) = self.service_begin_parts(i, &y, zg)?;
            Ok(a / b)
        };
        let delta = 1e-4;
        let wide = 0.5 * (at(delta)? + at(-delta)?);
        let narrow = 0.5 * (at(0.5 * delta)? + at(-0.5 * delta)?);
        Ok((4.0 * narrow - wide) / 3.0)
    }

    /// PGF of the queue lengths at a service beginning in queue i, the customer
    /// entering service included.
    pub fn service_begin_pgf(&self, i: usize, z: &[f64], zg: f64) -> Result<f64> {
        Ok(z[i] * self.service_ratio(i, z, zg)?)
    }

    /// PGF of the queue lengths at a service completion in queue i.
    pub fn service_complete_pgf(&self, i: usize, z: &[f64], zg: f64) -> Result<f64> {
        let n = self.model.n();
        let mut y = z[..n].to_vec();
        if !self.exhaustive() {
            y[i] = zg;
        }
        Ok(self.service_ratio(i, z, zg)? * self.model.service(i).lst(self.arr(&y)))
    }

    /// Joint PGF of the numbers of customers in each queue at an arbitrary time,
    /// assembled from the service-completion PGFs.
    pub fn stationary_queue_pgf(&self, z: &[f64]) -> Result<f64> {
        let a = self.arr(z);
        if a <= 0.0 {
            return Ok(1.0);
        }
        let n = self.model.n();
        let mut tot = 0.0;
        for i in 0..n {
            let lam_i = self.model.arrival_rate(i);
            if lam_i > 0.0 {
                tot += lam_i * (1.0 - z[i]) * self.service_complete_pgf(i, z, z[i])?;
            }
        }
        Ok(tot / a)
    }

    /// The same joint PGF assembled by conditioning on the period the server is in.
    pub fn stationary_queue_pgf_by_periods(&self, z: &[f64]) -> Result<f64> {
        let a = self.arr(z);
        if a <= 0.0 {
            return Ok(1.0);
        }
        let m = &self.model;
        let mut tot = 0.0;
        for i in 0..m.n() {
            if m.rho(i) > 0.0 {
                let b = m.service(i);
                tot += m.mean_visit(i) * self.service_begin_pgf(i, z, z[i])? * (1.0 - b.lst(a)) / (b.mean() * a);
            }
            let s = m.switch(i);
            if s.mean() > 0.0 {
                tot += s.mean() * self.switch_begin_pgf(i, z)? * (1.0 - s.lst(a)) / (s.mean() * a);
            }
        }
        Ok(tot / self.mean_cycle)
    }

    fn chain(&self, end: usize, w: f64) -> Result<Chain> {
        let m = &self.model;
        let n = m.n();
        let mut states = Vec::with_capacity(n + 1);
        let mut z = vec![1.0; n];
        states.push(z.clone());
        let mut l = end;
        for _ in 0..n {
            let v = if self.exhaustive() {
                self.marked_busy_period_lst(l, w, &z)?
            } else {
                m.service(l).lst(w + self.arr(&z))
            };
            z[l] = v;
            states.push(z.clone());
            l = pred(l, n);
        }
        Ok(Chain { end, states })
    }

    /// B̃_{j,i}(ω): a service at queue j plus all descendants served before or
    /// during the next visit to queue i.
    pub fn descendant_scalar(&self, j: usize, i: usize, w: f64) -> Result<f64> {
        Ok(self.chain(i, w)?.value(j))
    }

    /// The vectors B_{j,i} and B*_{j,i}.
    pub fn descendant_lst(&self, j: usize, i: usize, w: f64) -> Result<DescendantVectors> {
        let n = self.model.n();
        let ones = vec![1.0; n];
        let b = if j == succ(i, n) { ones.clone() } else { self.chain(i, w)?.from(j).to_vec() };
        let pi = pred(i, n);
        let mut b_star = if j == i { ones } else { self.chain(pi, w)?.from(j).to_vec() };
        b_star[i] = self.model.service(i).lst(w);
        Ok(DescendantVectors { b, b_star })
    }

    /// S̃_{l,e}(ω): the switch-over after queue l plus descendants served before or
    /// during the next visit to queue e.
    pub fn switch_descendant_lst(&self, l: usize, e: usize, w: f64) -> Result<f64> {
        let c = self.chain(e, w)?;
        Ok(self.model.switch(l).lst(w + self.arr(c.after(l))))
    }

    fn start_of(&self, period: Period) -> usize {
        let n = self.model.n();
        match period {
            Period::Visit(q) if self.exhaustive() => q,
            Period::Visit(q) | Period::Switch(q) => succ(q, n),
        }
    }

    fn period_weight(&self, period: Period) -> f64 {
        match period {
            Period::Visit(q) => self.model.mean_visit(q),
            Period::Switch(q) => self.model.switch(q).mean(),
        }
    }

    // Transform factor shared by every batch arriving in `period` whose last member is
    // served at `end`, and the vector y such that the batch contributes Π y_l^{k_l}.
    fn period_kernel(&self, period: Period, end: usize, w: f64) -> Result<(f64, Vec<f64>)> {
        let m = &self.model;
        let n = m.n();
        let start = self.start_of(period);
        let e = pred(end, n);
        let chain = self.chain(e, w)?;
        let b_end = m.service(end).lst(w);
        let switch_chain = |from: usize, len: usize| -> f64 {
            span(from, e, n)
                .take(len)
                .map(|l| m.switch(l).lst(w + self.arr(chain.after(l))))
                .product()
        };

        match period {
            Period::Visit(q) if !self.exhaustive() => {
                let full = span_len(q, e, n);
                let y_res = chain.after(q).to_vec();
                let mut y = chain.from(q).to_vec();
                let zg = if end == q { b_end } else { 1.0 };
                if end != q {
                    y[end] = b_end;
                }
                let mut y_past = y.clone();
                y_past[q] = zg;
                let kernel = self.service_ratio(q, &y, zg)?
                    * m.service(q).past_residual_lst(self.arr(&y_past), w + self.arr(&y_res))
                    * switch_chain(q, full);
                Ok((kernel, y_past))
            }
            _ => {
                let len = if end == start { 0 } else { span_len(start, e, n) };
                let y_res = chain.states[len].clone();
                let mut y = y_res.clone();
                y[end] = b_end;
                let chain_len = (end + n - start) % n;
                let switches = switch_chain(start, chain_len);
                let kernel = match period {
                    Period::Visit(q) => {
                        self.service_ratio(q, &y, y[q])?
                            * m.service(q).past_residual_lst(self.arr(&y), w + self.arr(&y_res))
                    }
                    Period::Switch(q) => {
                        self.switch_begin_pgf(q, &y)?
                            * m.switch(q).past_residual_lst(self.arr(&y), w + self.arr(&y_res))
                    }
                };
                Ok((kernel * switches, y))
            }
        }
    }

    /// Sojourn-time transform of batch `k` given that it arrives during `period`.
    pub fn conditioned_sojourn_lst(&self, k: &[u32], period: Period, w: f64) -> Result<f64> {
        crate::check_batch(&self.model, k)?;
        let n = self.model.n();
        let q = match period {
            Period::Visit(q) | Period::Switch(q) => q,
        };
        if q >= n {
            return Err(PollingError::InvalidModel(format!("period index {q} out of range")));
        }
        if w == 0.0 {
            return Ok(1.0);
        }
        let end = last_queue(k, self.start_of(period)).expect("checked nonzero");
        let (kernel, y) = self.period_kernel(period, end, w)?;
        Ok(kernel * monomial(k, &y))
    }

    fn periods(&self) -> impl Iterator<Item = (Period, f64)> + '_ {
        (0..self.model.n())
            .flat_map(|q| [Period::Visit(q), Period::Switch(q)])
            .map(|p| (p, self.period_weight(p) / self.mean_cycle))
            .filter(|&(_, wt)| wt > 0.0)
    }

    /// Sojourn-time transform of batch `k`.
    pub fn sojourn_lst(&self, k: &[u32], w: f64) -> Result<f64> {
        crate::check_batch(&self.model, k)?;
        if w == 0.0 {
            return Ok(1.0);
        }
        let mut tot = 0.0;
        for (p, wt) in self.periods() {
            tot += wt * self.conditioned_sojourn_lst(k, p, w)?;
        }
        Ok(tot)
    }

    /// Sojourn-time transform of an arbitrary batch, summed over completion sets.
    pub fn sojourn_lst_arbitrary(&self, w: f64) -> Result<f64> {
        if w == 0.0 {
            return Ok(1.0);
        }
        let b = self.model.batch();
        let n = self.model.n();
        let mut tot = 0.0;
        for (p, wt) in self.periods() {
            let start = self.start_of(p);
            for end in 0..n {
                let pr = b.completion_probability(start, end);
                if pr > 0.0 {
                    let (kernel, y) = self.period_kernel(p, end, w)?;
                    tot += wt * pr * kernel * b.conditional_pgf(&y, start, end)?;
                }
            }
        }
        Ok(tot)
    }

    /// Sojourn-time transform of an arbitrary batch, summed over support points.
    pub fn sojourn_lst_by_support(&self, w: f64) -> Result<f64> {
        let mut tot = 0.0;
        for e in self.model.batch().entries() {
            tot += e.p * self.sojourn_lst(&e.k, w)?;
        }
        Ok(tot)
    }
}

// Monotone iteration from 0. Stops once the step is below the tolerance and the
// geometric tail bound d·r/(1-r) is too, or the iterate stalls at rounding level.
fn fixed_point(mut f: impl FnMut(f64) -> f64) -> Result<f64> {
    let mut x = 0.0;
    let mut prev = f64::INFINITY;
    for _ in 0..FIXED_POINT_CAP {
        let nx = f(x);
        let d = (nx - x).abs();
        if d <= 4.0 * f64::EPSILON * nx.abs() {
            return Ok(nx);
        }
        let r = (d / prev).min(0.999_999);
        if d < FIXED_POINT_TOL && d * r / (1.0 - r) < 0.1 * FIXED_POINT_TOL {
            return Ok(nx);
        }
        prev = d;
        x = nx;
    }
    Err(PollingError::NonConvergence { what: "busy-period fixed point", iterations: FIXED_POINT_CAP })
}
