//! The polling model: queues, batch arrivals, distributions and discipline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::batch::{BatchEntry, BatchSupport};
use crate::dist::Dist;
use crate::error::{PollingError, Result};

pub const MAX_QUEUES: usize = 64;
pub const STABILITY_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discipline {
    Exhaustive,
    LocallyGated,
    GloballyGated,
}

impl Discipline {
    pub const ALL: [Discipline; 3] =
        [Discipline::Exhaustive, Discipline::LocallyGated, Discipline::GloballyGated];

    pub fn short_name(self) -> &'static str {
        match self {
            Discipline::Exhaustive => "ex",
            Discipline::LocallyGated => "lg",
            Discipline::GloballyGated => "gg",
        }
    }
}

impl fmt::Display for Discipline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Discipline::Exhaustive => "exhaustive",
            Discipline::LocallyGated => "locally-gated",
            Discipline::GloballyGated => "globally-gated",
        })
    }
}

impl FromStr for Discipline {
    type Err = PollingError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ex" | "exhaustive" => Ok(Discipline::Exhaustive),
            "lg" | "locally_gated" | "gated" => Ok(Discipline::LocallyGated),
            "gg" | "globally_gated" => Ok(Discipline::GloballyGated),
            other => Err(PollingError::Config(format!("unknown discipline '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleQuantities {
    pub mean_cycle: f64,
    pub mean_switch_total: f64,
    pub second_moment_switch_total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PollingModel {
    lambda: f64,
    batch: BatchSupport,
    service: Vec<Dist>,
    switch: Vec<Dist>,
    discipline: Discipline,
    rho: Vec<f64>,
    rho_total: f64,
}

impl PollingModel {
    pub fn new(
        lambda: f64,
        batch: BatchSupport,
        service: Vec<Dist>,
        switch: Vec<Dist>,
        discipline: Discipline,
    ) -> Result<Self> {
        let n = batch.n();
        if n == 0 || n > MAX_QUEUES {
            return Err(PollingError::InvalidModel(format!("queue count {n} outside 1..={MAX_QUEUES}")));
        }
        if service.len() != n || switch.len() != n {
            return Err(PollingError::InvalidModel(format!(
                "expected {n} service and switch-over laws, got {} and {}",
                service.len(),
                switch.len()
            )));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(PollingError::InvalidModel(format!("arrival rate {lambda} must be nonnegative")));
        }
        for d in &service {
            if d.mean() <= 0.0 {
                return Err(PollingError::InvalidDistribution("service times must have positive mean".into()));
            }
        }
        if switch.iter().map(Dist::mean).sum::<f64>() <= 0.0 {
            return Err(PollingError::InvalidModel("total switch-over time must have positive mean".into()));
        }
        let rho: Vec<f64> = (0..n).map(|i| lambda * batch.mean(i) * service[i].mean()).collect();
        let rho_total: f64 = rho.iter().sum();
        if rho_total >= 1.0 - STABILITY_MARGIN {
            return Err(PollingError::Unstable(rho_total));
        }
        Ok(PollingModel { lambda, batch, service, switch, discipline, rho, rho_total })
    }

    /// Re-checks every invariant; returns an equal model on success.
    pub fn validate(&self) -> Result<Self> {
        let batch = BatchSupport::new(self.n(), self.batch.entries().to_vec())?;
        PollingModel::new(self.lambda, batch, self.service.clone(), self.switch.clone(), self.discipline)
    }

    pub fn n(&self) -> usize {
        self.service.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn batch(&self) -> &BatchSupport {
        &self.batch
    }

    pub fn service(&self, i: usize) -> &Dist {
        &self.service[i]
    }

    pub fn switch(&self, i: usize) -> &Dist {
        &self.switch[i]
    }

    pub fn discipline(&self) -> Discipline {
        self.discipline
    }

    /// Customer arrival rate at queue i, λE(K_i).
    pub fn arrival_rate(&self, i: usize) -> f64 {
        self.lambda * self.batch.mean(i)
    }

    pub fn rho(&self, i: usize) -> f64 {
        self.rho[i]
    }

    pub fn total_load(&self) -> f64 {
        self.rho_total
    }

    /// Per-queue loads and their sum.
    pub fn utilization(&self) -> (Vec<f64>, f64) {
        (self.rho.clone(), self.rho_total)
    }

    pub fn cycle(&self) -> CycleQuantities {
        let means: Vec<f64> = self.switch.iter().map(Dist::mean).collect();
        let es: f64 = means.iter().sum();
        let own: f64 = self.switch.iter().map(Dist::second_moment).sum();
        let sq: f64 = means.iter().map(|m| m * m).sum();
        CycleQuantities {
            mean_cycle: es / (1.0 - self.rho_total),
            mean_switch_total: es,
            second_moment_switch_total: own + es * es - sq,
        }
    }

    pub fn mean_cycle(&self) -> f64 {
        self.cycle().mean_cycle
    }

    /// Mean visit time of queue i, ρ_i E(C).
    pub fn mean_visit(&self, i: usize) -> f64 {
        self.rho[i] * self.mean_cycle()
    }

    /// Whether every distribution has a closed-form transform and a sampler.
    pub fn has_transforms(&self) -> bool {
        self.service.iter().chain(&self.switch).all(Dist::has_transform)
    }

    pub fn require_transforms(&self) -> Result<()> {
        if self.has_transforms() {
            Ok(())
        } else {
            Err(PollingError::TransformUnavailable("model"))
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        PollingModel::new(lambda, self.batch.clone(), self.service.clone(), self.switch.clone(), self.discipline)
    }

    /// Rescales λ so that the total load equals `rho`.
    pub fn with_load(&self, rho: f64) -> Result<Self> {
        let per_unit: f64 = (0..self.n()).map(|i| self.batch.mean(i) * self.service[i].mean()).sum();
        self.with_lambda(rho / per_unit)
    }

    pub fn with_discipline(&self, discipline: Discipline) -> Self {
        PollingModel { discipline, ..self.clone() }
    }

    /// Relabels queues so that the current queue `shift` becomes the first.
    pub fn rotated(&self, shift: usize) -> Result<Self> {
        let n = self.n();
        let rot = |v: &[Dist]| (0..n).map(|t| v[(t + shift) % n].clone()).collect::<Vec<_>>();
        let entries = self
            .batch
            .entries()
            .iter()
            .map(|e| BatchEntry { k: (0..n).map(|t| e.k[(t + shift) % n]).collect(), p: e.p })
            .collect();
        PollingModel::new(
            self.lambda,
            BatchSupport::new(n, entries)?,
            rot(&self.service),
            rot(&self.switch),
            self.discipline,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistConfig {
    pub family: String,
    pub mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_moment: Option<f64>,
}

impl DistConfig {
    pub fn build(&self) -> Result<Dist> {
        let need_m2 = || {
            self.second_moment.ok_or_else(|| {
                PollingError::Config(format!("family '{}' needs second_moment", self.family))
            })
        };
        match self.family.to_ascii_lowercase().replace('-', "_").as_str() {
            "exponential" | "exp" => Dist::exponential(self.mean),
            "deterministic" | "det" => Dist::deterministic(self.mean),
            "erlang" => {
                let shape = self.shape.ok_or_else(|| PollingError::Config("erlang needs shape".into()))?;
                Dist::erlang(shape, self.mean)
            }
            "two_point" => Dist::fit_two_point(self.mean, need_m2()?),
            "moments" | "moments_only" => Dist::moments_only(self.mean, need_m2()?),
            other => Err(PollingError::Config(format!("unknown distribution family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueueConfig {
    pub service: DistConfig,
    pub switch: DistConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n: usize,
    pub lambda: f64,
    #[serde(default)]
    pub discipline: Option<String>,
    pub queues: Vec<QueueConfig>,
    pub batch: Vec<BatchEntry>,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| PollingError::Config(e.to_string()))
    }

    pub fn build(&self) -> Result<PollingModel> {
        if self.queues.len() != self.n {
            return Err(PollingError::Config(format!(
                "n = {} but {} queues listed",
                self.n,
                self.queues.len()
            )));
        }
        let discipline = match &self.discipline {
            Some(d) => d.parse()?,
            None => Discipline::Exhaustive,
        };
        let service = self.queues.iter().map(|q| q.service.build()).collect::<Result<Vec<_>>>()?;
        let switch = self.queues.iter().map(|q| q.switch.build()).collect::<Result<Vec<_>>>()?;
        let batch = BatchSupport::new(self.n, self.batch.clone())?;
        PollingModel::new(self.lambda, batch, service, switch, discipline)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;

    #[test]
    fn sym_load_and_cycle() {
        let m = builtin::sym2(0.2, 1.0, 1.0).unwrap();
        let (r, tot) = m.utilization();
        assert!((r[0] - 0.2).abs() < 1e-15 && (r[1] - 0.2).abs() < 1e-15);
        assert!((tot - 0.4).abs() < 1e-15);
        assert!((m.mean_cycle() - 2.0 / 0.6).abs() < 1e-12);
        assert!(matches!(m.with_lambda(0.5), Err(PollingError::Unstable(r)) if (r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn zero_rate_and_cycle_limits() {
        let m = builtin::sym2(0.2, 1.0, 1.0).unwrap().with_lambda(0.0).unwrap();
        assert_eq!(m.utilization().1, 0.0);
        assert_eq!(m.mean_cycle(), 2.0);
        let c = m.cycle();
        assert!((c.second_moment_switch_total - (2.0 + 2.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn table_models() {
        let c = builtin::model_c(0.48).unwrap();
        assert!((c.lambda() - 0.5).abs() < 1e-12);
        assert!((c.total_load() - 0.48).abs() < 1e-12);
        let a = builtin::model_a(0.5).unwrap();
        assert!((a.mean_cycle() - 0.6).abs() < 1e-12);
        assert!(builtin::model_b(0.6).is_ok());
    }

    #[test]
    fn validate_is_idempotent() {
        let m = builtin::model_a(0.3).unwrap();
        assert_eq!(m.validate().unwrap(), m);
        assert_eq!(m.validate().unwrap().validate().unwrap(), m);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"n":2,"lambda":0.2,"discipline":"gg",
            "queues":[{"service":{"family":"exponential","mean":1.0},"switch":{"family":"exponential","mean":1.0}},
                      {"service":{"family":"erlang","mean":1.0,"shape":2},"switch":{"family":"deterministic","mean":0.5}}],
            "batch":[{"k":[1,1],"p":0.5},{"k":[2,0],"p":0.5}]}"#;
        let m = ModelConfig::from_json(text).unwrap().build().unwrap();
        assert_eq!(m.discipline(), Discipline::GloballyGated);
        assert!((m.total_load() - 0.2 * (1.5 + 0.5)).abs() < 1e-12);
        let bad = text.replace("0.5},{\"k\":[2,0]", "0.4},{\"k\":[2,0]");
        assert!(ModelConfig::from_json(&bad).unwrap().build().is_err());
    }

    #[test]
    fn rotation_moves_first_queue() {
        let m = builtin::model_c(0.5).unwrap();
        let r = m.rotated(2).unwrap();
        assert_eq!(r.service(0), m.service(2));
        assert_eq!(r.batch().mean(0), m.batch().mean(2));
        assert!((r.total_load() - m.total_load()).abs() < 1e-12);
    }
}
