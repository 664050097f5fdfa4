//! Built-in models: the symmetric two-queue family and the three-queue models a, b, c.

use crate::batch::{BatchEntry, BatchSupport};
use crate::dist::Dist;
use crate::error::{PollingError, Result};
use crate::model::{Discipline, PollingModel};

pub const BUILTIN_IDS: [&str; 4] = ["sym2", "model_a", "model_b", "model_c"];

fn support(n: usize, pts: &[(&[u32], f64)]) -> Result<BatchSupport> {
    BatchSupport::new(n, pts.iter().map(|(k, p)| BatchEntry { k: k.to_vec(), p: *p }).collect())
}

/// Two queues, every batch is one customer per queue, exponential service mean `b`
/// and exponential switch-over mean `s`. `lambda` is the batch rate.
pub fn sym2(lambda: f64, b: f64, s: f64) -> Result<PollingModel> {
    PollingModel::new(
        lambda,
        support(2, &[(&[1, 1], 1.0)])?,
        vec![Dist::exponential(b)?, Dist::exponential(b)?],
        vec![Dist::exponential(s)?, Dist::exponential(s)?],
        Discipline::Exhaustive,
    )
}

/// Short switch-overs, correlated batches; λ chosen for total load `rho`.
pub fn model_a(rho: f64) -> Result<PollingModel> {
    let m = PollingModel::new(
        0.0,
        support(3, &[(&[1, 1, 0], 0.25), (&[3, 0, 1], 0.75)])?,
        vec![Dist::exponential(1.0)?; 3],
        vec![Dist::exponential(0.1)?; 3],
        Discipline::Exhaustive,
    )?;
    m.with_load(rho)
}

/// Single-customer arrivals spread evenly, service and switch-over both mean 1.
pub fn model_b(rho: f64) -> Result<PollingModel> {
    let t = 1.0 / 3.0;
    let m = PollingModel::new(
        0.0,
        support(3, &[(&[1, 0, 0], t), (&[0, 1, 0], t), (&[0, 0, 1], 1.0 - 2.0 * t)])?,
        vec![Dist::exponential(1.0)?; 3],
        vec![Dist::exponential(1.0)?; 3],
        Discipline::Exhaustive,
    )?;
    m.with_load(rho)
}

/// Service means 0.1, 0.4, 0.9 each with second moment 1 (two-point laws matching
/// both moments), deterministic unit switch-overs.
pub fn model_c(rho: f64) -> Result<PollingModel> {
    let m = PollingModel::new(
        0.0,
        support(3, &[(&[1, 1, 0], 0.8), (&[1, 0, 3], 0.2)])?,
        vec![
            Dist::fit_two_point(0.1, 1.0)?,
            Dist::fit_two_point(0.4, 1.0)?,
            Dist::fit_two_point(0.9, 1.0)?,
        ],
        vec![Dist::deterministic(1.0)?; 3],
        Discipline::Exhaustive,
    )?;
    m.with_load(rho)
}

/// Single queue with batches of one or two customers, exponential service mean 0.5
/// and exponential vacations mean 1 (load 0.5 at λ = 2/3).
pub fn vacation_queue() -> Result<PollingModel> {
    PollingModel::new(
        2.0 / 3.0,
        support(1, &[(&[1], 0.5), (&[2], 0.5)])?,
        vec![Dist::exponential(0.5)?],
        vec![Dist::exponential(1.0)?],
        Discipline::Exhaustive,
    )
}

/// Looks up a built-in id. `rho` rescales λ to that total load; without it `sym2`
/// uses λ = 0.2 and the three-queue models use load 0.6.
pub fn by_id(id: &str, rho: Option<f64>) -> Result<PollingModel> {
    let default_rho = 0.6;
    match id {
        "sym2" => {
            let m = sym2(0.2, 1.0, 1.0)?;
            match rho {
                Some(r) => m.with_load(r),
                None => Ok(m),
            }
        }
        "model_a" => model_a(rho.unwrap_or(default_rho)),
        "model_b" => model_b(rho.unwrap_or(default_rho)),
        "model_c" => model_c(rho.unwrap_or(default_rho)),
        "vacation" => match rho {
            Some(r) => vacation_queue()?.with_load(r),
            None => vacation_queue(),
        },
        other => Err(PollingError::Config(format!("unknown built-in model '{other}'"))),
    }
}
