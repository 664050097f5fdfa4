//! Discrete-event simulation of the polling system with replication-based
//! confidence intervals.
//!
//! The event loop follows the server: arrivals are generated lazily and merged
//! whenever the clock advances, so queue-length integrals are exact. Time
//! averages are taken over the window between the arrivals of the first and the
//! last recorded batch; the run continues until every recorded batch is complete.

use std::collections::VecDeque;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{PollingError, Result};
use crate::model::{Discipline, PollingModel};

pub const CONFIDENCE: f64 = 0.99;

const ARRIVAL_STREAM: u64 = 0;
const BATCH_STREAM: u64 = 1;
const SERVICE_STREAM: u64 = 2;
const SWITCH_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub replications: usize,
    pub batches_per_replication: usize,
    pub warmup_fraction: f64,
    pub seed: u64,
    #[serde(default)]
    pub lst_probe_points: Vec<f64>,
    #[serde(default)]
    pub pgf_probe_points: Vec<Vec<f64>>,
    #[serde(default)]
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            replications: 20,
            batches_per_replication: 200_000,
            warmup_fraction: 0.1,
            seed: 1,
            lst_probe_points: Vec::new(),
            pgf_probe_points: Vec::new(),
            trace: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.replications < 2 {
            return Err(PollingError::Config("at least two replications are needed".into()));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(PollingError::Config("warmup fraction must lie in [0, 1)".into()));
        }
        if self.batches_per_replication <= self.warmup_batches() {
            return Err(PollingError::Config("no batches left after warmup".into()));
        }
        if self.lst_probe_points.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(PollingError::Config("transform probes must be finite and nonnegative".into()));
        }
        for z in &self.pgf_probe_points {
            if z.len() != n || z.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(PollingError::Config(format!("PGF probes need {n} coordinates in [0, 1]")));
            }
        }
        Ok(())
    }

    fn warmup_batches(&self) -> usize {
        (self.warmup_fraction * self.batches_per_replication as f64).floor() as usize
    }
}

/// Replication mean with a Student-t confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ci {
    pub mean: f64,
    pub half_width: f64,
    pub replications: usize,
}

impl Ci {
    pub fn from_samples(xs: &[f64], level: f64) -> Ci {
        let r = xs.len();
        let mean = xs.iter().sum::<f64>() / r as f64;
        if r < 2 {
            return Ci { mean, half_width: f64::INFINITY, replications: r };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (r - 1) as f64).expect("valid degrees of freedom");
        let q = t.inverse_cdf(0.5 + 0.5 * level);
        Ci { mean, half_width: q * (var / r as f64).sqrt(), replications: r }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower() <= x && x <= self.upper()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub discipline: Discipline,
    pub mean_t: Ci,
    pub mean_w: Vec<Ci>,
    /// Time-average number waiting, excluding the customer in service.
    pub mean_l: Vec<Ci>,
    /// Time-average number present, including the customer in service.
    pub mean_in_system: Vec<Ci>,
    pub busy_fraction: Vec<Ci>,
    pub mean_c: Ci,
    pub cycle_residual: Ci,
    pub empirical_lst: Vec<(f64, Ci)>,
    pub cycle_lst: Vec<(f64, Ci)>,
    pub class_mean_t: Vec<(Vec<u32>, Ci)>,
    /// E[Π z_j^{L_j}] at visit beginnings of the first queue.
    pub visit_begin_pgf: Vec<(Vec<f64>, Ci)>,
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub replication: usize,
    pub batch_id: usize,
    pub arrival_time: f64,
    pub completion_time: f64,
    pub sojourn: f64,
    /// Queue of the last served member, counted from 1.
    pub last_queue: usize,
}

pub fn write_trace_csv<W: Write>(out: W, records: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(|e| PollingError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| PollingError::Io(e.to_string()))
}

#[derive(Debug, Clone, Copy)]
struct Customer {
    batch: usize,
    arrival: f64,
}

#[derive(Debug, Clone, Copy)]
struct BatchRecord {
    arrival: f64,
    remaining: u32,
    class: usize,
}

#[derive(Debug, Clone, Default)]
struct RepStats {
    sojourn_sum: f64,
    sojourn_count: usize,
    wait_sum: Vec<f64>,
    wait_count: Vec<usize>,
    area_wait: Vec<f64>,
    area_system: Vec<f64>,
    busy: Vec<f64>,
    window: f64,
    cycle_sum: f64,
    cycle_sq: f64,
    cycle_count: usize,
    lst_sum: Vec<f64>,
    cycle_lst_sum: Vec<f64>,
    class_sum: Vec<f64>,
    class_count: Vec<usize>,
    pgf_sum: Vec<f64>,
    pgf_count: usize,
    trace: Vec<TraceRecord>,
}

struct Replication<'a> {
    model: &'a PollingModel,
    cfg: &'a SimConfig,
    rep: usize,
    arrival_rng: ChaCha8Rng,
    batch_rng: ChaCha8Rng,
    service_rng: ChaCha8Rng,
    switch_rng: ChaCha8Rng,
    interarrival: Exp<f64>,
    now: f64,
    next_arrival: f64,
    queues: Vec<VecDeque<Customer>>,
    serving: Option<usize>,
    batches: Vec<BatchRecord>,
    first_recorded: usize,
    end_recorded: usize,
    window_open: Option<f64>,
    window_closed: bool,
    outstanding: usize,
    stats: RepStats,
}

fn mix(seed: u64, rep: u64) -> u64 {
    let mut x = seed ^ rep.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn stream(seed: u64, rep: usize, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, rep as u64));
    rng.set_stream(id);
    rng
}

impl<'a> Replication<'a> {
    fn new(model: &'a PollingModel, cfg: &'a SimConfig, rep: usize) -> Self {
        let n = model.n();
        let mut arrival_rng = stream(cfg.seed, rep, ARRIVAL_STREAM);
        let interarrival = Exp::new(model.lambda()).expect("positive rate");
        let next_arrival = interarrival.sample(&mut arrival_rng);
        let stats = RepStats {
            wait_sum: vec![0.0; n],
            wait_count: vec![0; n],
            area_wait: vec![0.0; n],
            area_system: vec![0.0; n],
            busy: vec![0.0; n],
            lst_sum: vec![0.0; cfg.lst_probe_points.len()],
            cycle_lst_sum: vec![0.0; cfg.lst_probe_points.len()],
            class_sum: vec![0.0; model.batch().entries().len()],
            class_count: vec![0; model.batch().entries().len()],
            pgf_sum: vec![0.0; cfg.pgf_probe_points.len()],
            ..RepStats::default()
        };
        Replication {
            model,
            cfg,
            rep,
            arrival_rng,
            batch_rng: stream(cfg.seed, rep, BATCH_STREAM),
            service_rng: stream(cfg.seed, rep, SERVICE_STREAM),
            switch_rng: stream(cfg.seed, rep, SWITCH_STREAM),
            interarrival,
            now: 0.0,
            next_arrival,
            queues: vec![VecDeque::new(); n],
            serving: None,
            batches: Vec::with_capacity(cfg.batches_per_replication + 1024),
            first_recorded: cfg.warmup_batches(),
            end_recorded: cfg.batches_per_replication,
            window_open: None,
            window_closed: false,
            outstanding: cfg.batches_per_replication - cfg.warmup_batches(),
            stats,
        }
    }

    fn in_window(&self) -> bool {
        self.window_open.is_some() && !self.window_closed
    }

    fn recorded(&self, batch: usize) -> bool {
        (self.first_recorded..self.end_recorded).contains(&batch)
    }

    fn integrate_to(&mut self, t: f64) {
        if self.in_window() {
            let dt = t - self.now;
            for (i, q) in self.queues.iter().enumerate() {
                let waiting = q.len() as f64;
                let in_service = if self.serving == Some(i) { 1.0 } else { 0.0 };
                self.stats.area_wait[i] += waiting * dt;
                self.stats.area_system[i] += (waiting + in_service) * dt;
                self.stats.busy[i] += in_service * dt;
            }
        }
        self.now = t;
    }

    fn arrive(&mut self) {
        let id = self.batches.len();
        if id == self.first_recorded {
            self.window_open = Some(self.now);
        }
        if id == self.end_recorded {
            self.window_closed = true;
            self.stats.window = self.now - self.window_open.expect("window opened");
        }
        let class = self.model.batch().select(rand::Rng::random::<f64>(&mut self.batch_rng));
        let k = &self.model.batch().entries()[class].k;
        let size: u32 = k.iter().sum();
        for (q, &c) in k.iter().enumerate() {
            for _ in 0..c {
                self.queues[q].push_back(Customer { batch: id, arrival: self.now });
            }
        }
        self.batches.push(BatchRecord { arrival: self.now, remaining: size, class });
        self.next_arrival = self.now + self.interarrival.sample(&mut self.arrival_rng);
    }

    /// Moves the clock to `t`, processing every arrival on the way.
    fn advance(&mut self, t: f64) {
        while self.next_arrival <= t {
            let a = self.next_arrival;
            self.integrate_to(a);
            self.arrive();
        }
        self.integrate_to(t);
    }

    fn serve_one(&mut self, q: usize) {
        let c = self.queues[q].pop_front().expect("nonempty queue");
        let start = self.now;
        let x = self.model.service(q).sample(&mut self.service_rng);
        self.serving = Some(q);
        self.advance(start + x);
        self.serving = None;
        let recorded = self.recorded(c.batch);
        if recorded {
            self.stats.wait_sum[q] += start - c.arrival;
            self.stats.wait_count[q] += 1;
        }
        let b = &mut self.batches[c.batch];
        b.remaining -= 1;
        if b.remaining == 0 && recorded {
            let (arrival, class) = (b.arrival, b.class);
            let t = self.now - arrival;
            self.stats.sojourn_sum += t;
            self.stats.sojourn_count += 1;
            self.stats.class_sum[class] += t;
            self.stats.class_count[class] += 1;
            for (s, w) in self.stats.lst_sum.iter_mut().zip(&self.cfg.lst_probe_points) {
                *s += (-w * t).exp();
            }
            if self.cfg.trace {
                self.stats.trace.push(TraceRecord {
                    replication: self.rep,
                    batch_id: c.batch,
                    arrival_time: arrival,
                    completion_time: self.now,
                    sojourn: t,
                    last_queue: q + 1,
                });
            }
            self.outstanding -= 1;
        }
    }

    fn record_cycle_start(&mut self, last: &mut Option<f64>) {
        if self.in_window() {
            if let Some(prev) = *last {
                let c = self.now - prev;
                self.stats.cycle_sum += c;
                self.stats.cycle_sq += c * c;
                self.stats.cycle_count += 1;
                for (s, w) in self.stats.cycle_lst_sum.iter_mut().zip(&self.cfg.lst_probe_points) {
                    *s += (-w * c).exp();
                }
            }
            for (s, z) in self.stats.pgf_sum.iter_mut().zip(&self.cfg.pgf_probe_points) {
                *s += self.queues.iter().zip(z).map(|(q, z)| z.powi(q.len() as i32)).product::<f64>();
            }
            self.stats.pgf_count += 1;
            *last = Some(self.now);
        } else {
            *last = None;
        }
    }

    fn run(mut self) -> RepStats {
        let n = self.model.n();
        let discipline = self.model.discipline();
        let mut gates = vec![0usize; n];
        let mut last_cycle = None;
        while self.outstanding > 0 {
            for i in 0..n {
                self.advance(self.now);
                if i == 0 {
                    self.record_cycle_start(&mut last_cycle);
                    if discipline == Discipline::GloballyGated {
                        for (g, q) in gates.iter_mut().zip(&self.queues) {
                            *g = q.len();
                        }
                    }
                }
                match discipline {
                    Discipline::Exhaustive => {
                        while !self.queues[i].is_empty() {
                            self.serve_one(i);
                        }
                    }
                    Discipline::LocallyGated => {
                        for _ in 0..self.queues[i].len() {
                            self.serve_one(i);
                        }
                    }
                    Discipline::GloballyGated => {
                        for _ in 0..gates[i] {
                            self.serve_one(i);
                        }
                    }
                }
                let s = self.model.switch(i).sample(&mut self.switch_rng);
                self.advance(self.now + s);
            }
        }
        self.stats
    }
}

/// Simulates `model` under its own discipline.
pub fn run(model: &PollingModel, cfg: &SimConfig) -> Result<SimEstimate> {
    cfg.validate(model.n())?;
    if !model.has_transforms() {
        return Err(PollingError::Config("moments-only distributions cannot be sampled".into()));
    }
    if model.lambda() <= 0.0 {
        return Err(PollingError::Config("simulation needs a positive arrival rate".into()));
    }
    let reps: Vec<RepStats> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| Replication::new(model, cfg, r).run())
        .collect();
    Ok(aggregate(model, cfg, reps))
}

fn aggregate(model: &PollingModel, cfg: &SimConfig, reps: Vec<RepStats>) -> SimEstimate {
    let n = model.n();
    let ci = |f: &dyn Fn(&RepStats) -> f64| {
        let xs: Vec<f64> = reps.iter().map(f).filter(|x| x.is_finite()).collect();
        Ci::from_samples(&xs, CONFIDENCE)
    };
    let per_queue = |f: &dyn Fn(&RepStats, usize) -> f64| (0..n).map(|i| ci(&|r| f(r, i))).collect::<Vec<_>>();
    let empirical_lst = cfg
        .lst_probe_points
        .iter()
        .enumerate()
        .map(|(j, &w)| (w, ci(&|r| r.lst_sum[j] / r.sojourn_count as f64)))
        .collect();
    let cycle_lst = cfg
        .lst_probe_points
        .iter()
        .enumerate()
        .map(|(j, &w)| (w, ci(&|r| r.cycle_lst_sum[j] / r.cycle_count as f64)))
        .collect();
    let class_mean_t = model
        .batch()
        .entries()
        .iter()
        .enumerate()
        .map(|(c, e)| (e.k.clone(), ci(&|r| r.class_sum[c] / r.class_count[c] as f64)))
        .collect();
    let visit_begin_pgf = cfg
        .pgf_probe_points
        .iter()
        .enumerate()
        .map(|(j, z)| (z.clone(), ci(&|r| r.pgf_sum[j] / r.pgf_count as f64)))
        .collect();
    SimEstimate {
        discipline: model.discipline(),
        mean_t: ci(&|r| r.sojourn_sum / r.sojourn_count as f64),
        mean_w: per_queue(&|r, i| r.wait_sum[i] / r.wait_count[i] as f64),
        mean_l: per_queue(&|r, i| r.area_wait[i] / r.window),
        mean_in_system: per_queue(&|r, i| r.area_system[i] / r.window),
        busy_fraction: per_queue(&|r, i| r.busy[i] / r.window),
        mean_c: ci(&|r| r.cycle_sum / r.cycle_count as f64),
        cycle_residual: ci(&|r| r.cycle_sq / (2.0 * r.cycle_sum)),
        empirical_lst,
        cycle_lst,
        class_mean_t,
        visit_begin_pgf,
        trace: reps.into_iter().flat_map(|r| r.trace).collect(),
    }
}
