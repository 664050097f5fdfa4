//! Batch-arrival polling systems: mean value analysis, transform evaluation and
//! simulation for exhaustive, locally-gated and globally-gated service.

pub mod batch;
pub mod builtin;
pub mod cyclic;
pub mod dist;
pub mod error;
pub mod globally_gated;
pub mod linalg;
pub mod model;
pub mod mva_exhaustive;
pub mod mva_locally_gated;
pub mod numdiff;
pub mod sim;
pub mod symmetric;
pub mod transform;

pub use batch::{BatchEntry, BatchSupport};
pub use dist::{Dist, Family};
pub use error::{PollingError, Result};
pub use model::{Discipline, ModelConfig, PollingModel};

/// Mean performance measures shared by the three analytic solvers.
pub trait MeanAnalysis {
    fn model(&self) -> &PollingModel;
    /// E(T_k) for the batch `k`.
    fn mean_batch_sojourn_specific(&self, k: &[u32]) -> Result<f64>;
    /// E(T) of an arbitrary batch.
    fn mean_batch_sojourn(&self) -> f64;
    /// E(W_i) of an arbitrary customer of queue i.
    fn mean_wait(&self, i: usize) -> f64;
    /// E(L̄_i), the time-average number waiting in queue i, excluding the customer in service.
    fn mean_queue_length(&self, i: usize) -> f64;
}

pub(crate) fn check_batch(model: &PollingModel, k: &[u32]) -> Result<()> {
    if k.len() != model.n() {
        return Err(PollingError::InvalidBatch(format!(
            "batch has {} entries, model has {} queues",
            k.len(),
            model.n()
        )));
    }
    if k.iter().all(|&x| x == 0) {
        return Err(PollingError::InvalidBatch("batch is empty".into()));
    }
    Ok(())
}

/// Runs the mean value analysis matching the model's discipline.
pub fn solve_means(model: &PollingModel) -> Result<Box<dyn MeanAnalysis + Send + Sync>> {
    Ok(match model.discipline() {
        Discipline::Exhaustive => Box::new(mva_exhaustive::solve_stationary(model)?),
        Discipline::LocallyGated => Box::new(mva_locally_gated::solve_stationary_lg(model)?),
        Discipline::GloballyGated => Box::new(globally_gated::analyze(model)),
    })
}

/// Sojourn-time transform of an arbitrary batch under the model's discipline.
pub fn sojourn_lst_arbitrary(model: &PollingModel, w: f64) -> Result<f64> {
    match model.discipline() {
        Discipline::GloballyGated => {
            model.require_transforms()?;
            globally_gated::analyze(model).sojourn_lst_gg_arbitrary(w)
        }
        _ => transform::TransformEngine::new(model)?.sojourn_lst_arbitrary(w),
    }
}

/// Sojourn-time transform of batch `k` under the model's discipline.
pub fn sojourn_lst(model: &PollingModel, k: &[u32], w: f64) -> Result<f64> {
    match model.discipline() {
        Discipline::GloballyGated => {
            model.require_transforms()?;
            globally_gated::analyze(model).sojourn_lst_gg(k, w)
        }
        _ => transform::TransformEngine::new(model)?.sojourn_lst(k, w),
    }
}

/// Mean batch sojourn times of a model under all three disciplines.
#[derive(Debug, Clone, PartialEq)]
pub struct DisciplineComparison {
    pub mean_sojourn: [f64; 3],
    /// Every discipline within 1e-9 relative of the smallest mean.
    pub argmin: Vec<Discipline>,
}

pub fn compare_disciplines(model: &PollingModel) -> Result<DisciplineComparison> {
    let mut mean_sojourn = [0.0; 3];
    for (slot, d) in mean_sojourn.iter_mut().zip(Discipline::ALL) {
        *slot = solve_means(&model.with_discipline(d))?.mean_batch_sojourn();
    }
    let best = mean_sojourn.iter().copied().fold(f64::INFINITY, f64::min);
    let argmin = Discipline::ALL
        .into_iter()
        .zip(mean_sojourn)
        .filter(|&(_, v)| v - best <= 1e-9 * best)
        .map(|(d, _)| d)
        .collect();
    Ok(DisciplineComparison { mean_sojourn, argmin })
}
