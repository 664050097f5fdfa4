//! Closed-form mean batch sojourn times of the symmetric two-queue model with
//! paired arrivals and exponential service and switch-over times.

use crate::model::Discipline;

/// E(T) for total load `rho`, service mean `b` and switch-over mean `s`.
pub fn mean_batch_sojourn(discipline: Discipline, rho: f64, b: f64, s: f64) -> f64 {
    let r2 = rho * rho;
    let r3 = r2 * rho;
    match discipline {
        Discipline::Exhaustive => (0.25 * r2 * b - 0.25 * r2 * s - rho * s + 2.0 * b + 2.0 * s) / (1.0 - rho),
        Discipline::LocallyGated => {
            (-0.125 * r3 * b + 0.125 * r3 * s + 0.25 * r2 * b - 0.5 * r2 * s + 0.5 * rho * b + rho * s
                + 2.0 * b
                + 2.0 * s)
                / ((1.0 + 0.5 * rho) * (1.0 - rho))
        }
        Discipline::GloballyGated => {
            (0.5 * r2 * b - 0.5 * r2 * s + 3.0 * rho * b + 5.5 * rho * s + 4.0 * b + 5.0 * s)
                / (2.0 * (1.0 + rho) * (1.0 - rho))
        }
    }
}
