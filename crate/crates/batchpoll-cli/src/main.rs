use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use batchpoll::sim::{self, SimConfig};
use batchpoll::{builtin, compare_disciplines, solve_means, symmetric, Discipline, PollingError, PollingModel};
use clap::{Args, Parser, Subcommand};

mod table;

use table::{fmt_num, Table};

#[derive(Parser)]
#[command(name = "batchpoll", version, about = "Batch-arrival polling systems: analysis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean waiting times, queue lengths and batch sojourn times
    Solve {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Discrete-event simulation with 99% confidence intervals
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = 200_000)]
        batches: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        warmup: f64,
        /// Transform arguments at which E[exp(-ωT)] is estimated
        #[arg(long, value_delimiter = ',')]
        omega: Vec<f64>,
        /// Write per-batch records of the measured batches to this CSV file
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Batch sojourn-time transform E[exp(-ωT)]
    Lst {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        omega: Vec<f64>,
        /// Batch vector such as 1,0,3; defaults to an arbitrary batch
        #[arg(long, value_delimiter = ',')]
        batch: Option<Vec<u32>>,
    },
    #[command(subcommand)]
    Experiment(Experiment),
}

#[derive(Subcommand)]
enum Experiment {
    /// Symmetric two-queue model: closed forms against the solvers
    Sym2 {
        #[command(flatten)]
        grid: SymGrid,
    },
    /// Symmetric two-queue model: best discipline per (b, s)
    Region {
        #[command(flatten)]
        grid: SymGrid,
    },
    /// Models a, b and c over a load grid
    ModelsAbc {
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        rho_grid: Vec<f64>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// JSON model file or built-in id (sym2, model_a, model_b, model_c, vacation)
    #[arg(long)]
    model: String,
    /// ex, lg or gg; overrides the discipline in the model file
    #[arg(long)]
    discipline: Option<Discipline>,
    /// Rescale the arrival rate to this total load
    #[arg(long)]
    rho: Option<f64>,
    /// Relabel queues so that queue 1 becomes queue 1 + rotate
    #[arg(long, default_value_t = 0)]
    rotate: usize,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SymGrid {
    /// Total arrival rate Λ; batches arrive at rate Λ/2
    #[arg(long, default_value_t = 0.4)]
    lambda: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,2,4")]
    b_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,2,4")]
    s_grid: Vec<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn load(args: &ModelArgs) -> Result<PollingModel, PollingError> {
    let path = Path::new(&args.model);
    let mut model = if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| PollingError::Io(e.to_string()))?;
        let m = batchpoll::ModelConfig::from_json(&text)?.build()?;
        match args.rho {
            Some(r) => m.with_load(r)?,
            None => m,
        }
    } else {
        builtin::by_id(&args.model, args.rho)?
    };
    if let Some(d) = args.discipline {
        model = model.with_discipline(d);
    }
    if args.rotate > 0 {
        model = model.rotated(args.rotate)?;
    }
    Ok(model)
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>, PollingError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| PollingError::Io(e.to_string()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn batch_label(k: &[u32]) -> String {
    k.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
}

fn names(ds: &[Discipline]) -> String {
    ds.iter().map(|d| d.short_name()).collect::<Vec<_>>().join("|")
}

fn solve(args: &ModelArgs) -> Result<(), PollingError> {
    let model = load(args)?;
    let a = solve_means(&model)?;
    let d = model.discipline().to_string();
    let mut t = Table::new(&["discipline", "quantity", "target", "value"]);
    t.row(vec![d.clone(), "rho".into(), "all".into(), fmt_num(model.total_load())]);
    t.row(vec![d.clone(), "E(C)".into(), "all".into(), fmt_num(model.mean_cycle())]);
    for i in 0..model.n() {
        t.row(vec![d.clone(), "E(W)".into(), format!("Q{}", i + 1), fmt_num(a.mean_wait(i))]);
    }
    for i in 0..model.n() {
        t.row(vec![d.clone(), "E(L)".into(), format!("Q{}", i + 1), fmt_num(a.mean_queue_length(i))]);
    }
    for e in model.batch().entries() {
        let v = a.mean_batch_sojourn_specific(&e.k)?;
        t.row(vec![d.clone(), "E(T_k)".into(), batch_label(&e.k), fmt_num(v)]);
    }
    t.row(vec![d, "E(T)".into(), "all".into(), fmt_num(a.mean_batch_sojourn())]);
    t.write(sink(&args.output)?)
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    args: &ModelArgs,
    reps: usize,
    batches: usize,
    seed: u64,
    warmup: f64,
    omega: &[f64],
    trace: &Option<PathBuf>,
) -> Result<(), PollingError> {
    let model = load(args)?;
    let cfg = SimConfig {
        replications: reps,
        batches_per_replication: batches,
        warmup_fraction: warmup,
        seed,
        lst_probe_points: omega.to_vec(),
        pgf_probe_points: Vec::new(),
        trace: trace.is_some(),
    };
    let est = sim::run(&model, &cfg)?;
    let mut t = Table::new(&["quantity", "target", "mean", "half_width"]);
    let mut push = |q: &str, target: String, ci: &sim::Ci| {
        t.row(vec![q.into(), target, fmt_num(ci.mean), fmt_num(ci.half_width)]);
    };
    push("E(T)", "all".into(), &est.mean_t);
    push("E(C)", "all".into(), &est.mean_c);
    push("E(C_res)", "all".into(), &est.cycle_residual);
    for i in 0..model.n() {
        push("E(W)", format!("Q{}", i + 1), &est.mean_w[i]);
        push("E(L)", format!("Q{}", i + 1), &est.mean_l[i]);
        push("busy", format!("Q{}", i + 1), &est.busy_fraction[i]);
    }
    for (k, ci) in &est.class_mean_t {
        push("E(T_k)", batch_label(k), ci);
    }
    for (w, ci) in &est.empirical_lst {
        push("LST", fmt_num(*w), ci);
    }
    if let Some(p) = trace {
        let f = File::create(p).map_err(|e| PollingError::Io(e.to_string()))?;
        sim::write_trace_csv(BufWriter::new(f), &est.trace)?;
    }
    t.write(sink(&args.output)?)
}

fn lst(args: &ModelArgs, omega: &[f64], batch: &Option<Vec<u32>>) -> Result<(), PollingError> {
    let model = load(args)?;
    if omega.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(PollingError::Config("ω must be finite and nonnegative".into()));
    }
    let mut t = Table::new(&["omega", "value"]);
    for &w in omega {
        let v = match batch {
            Some(k) => batchpoll::sojourn_lst(&model, k, w)?,
            None => batchpoll::sojourn_lst_arbitrary(&model, w)?,
        };
        t.row(vec![fmt_num(w), fmt_num(v)]);
    }
    t.write(sink(&args.output)?)
}

fn check_grid(grid: &SymGrid) -> Result<(), PollingError> {
    let bad = |v: &[f64]| v.is_empty() || v.iter().any(|x| !x.is_finite() || *x <= 0.0);
    if bad(&grid.b_grid) || bad(&grid.s_grid) || !(grid.lambda.is_finite() && grid.lambda > 0.0) {
        return Err(PollingError::Config("grids must be nonempty with positive entries, Λ > 0".into()));
    }
    Ok(())
}

fn sym2(grid: &SymGrid) -> Result<(), PollingError> {
    check_grid(grid)?;
    let mut t = Table::new(&[
        "Lambda", "b", "s", "rho", "closed_ex", "closed_lg", "closed_gg", "ex", "lg", "gg", "argmin", "status",
    ]);
    for &b in &grid.b_grid {
        for &s in &grid.s_grid {
            let rho = grid.lambda * b;
            let mut row = vec![fmt_num(grid.lambda), fmt_num(b), fmt_num(s), fmt_num(rho)];
            match builtin::sym2(grid.lambda / 2.0, b, s) {
                Err(PollingError::Unstable(_)) => {
                    row.extend(std::iter::repeat_n(String::new(), 7));
                    row.push("unstable".into());
                }
                Err(e) => return Err(e),
                Ok(m) => {
                    let cmp = compare_disciplines(&m)?;
                    let closed = Discipline::ALL.map(|d| symmetric::mean_batch_sojourn(d, rho, b, s));
                    let mismatch = closed.iter().zip(cmp.mean_sojourn).any(|(c, v)| (c - v).abs() > 1e-9 * c.abs());
                    row.extend(closed.iter().map(|v| fmt_num(*v)));
                    row.extend(cmp.mean_sojourn.iter().map(|v| fmt_num(*v)));
                    row.push(names(&cmp.argmin));
                    row.push(if mismatch { "mismatch" } else { "ok" }.into());
                }
            }
            t.row(row);
        }
    }
    t.write(sink(&grid.output)?)
}

fn region(grid: &SymGrid) -> Result<(), PollingError> {
    check_grid(grid)?;
    let mut t = Table::new(&["Lambda", "b", "s", "rho", "argmin"]);
    for &b in &grid.b_grid {
        for &s in &grid.s_grid {
            let rho = grid.lambda * b;
            let best = match builtin::sym2(grid.lambda / 2.0, b, s) {
                Err(PollingError::Unstable(_)) => "unstable".to_string(),
                Err(e) => return Err(e),
                Ok(m) => names(&compare_disciplines(&m)?.argmin),
            };
            t.row(vec![fmt_num(grid.lambda), fmt_num(b), fmt_num(s), fmt_num(rho), best]);
        }
    }
    t.write(sink(&grid.output)?)
}

fn models_abc(rho_grid: &[f64], output: &Option<PathBuf>) -> Result<(), PollingError> {
    if rho_grid.is_empty() || rho_grid.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
        return Err(PollingError::Config("ρ grid must be nonempty and inside (0, 1)".into()));
    }
    let mut t = Table::new(&["model", "rho", "ex", "lg", "gg", "argmin"]);
    for id in ["model_a", "model_b", "model_c"] {
        for &rho in rho_grid {
            let cmp = compare_disciplines(&builtin::by_id(id, Some(rho))?)?;
            let mut row = vec![id.to_string(), fmt_num(rho)];
            row.extend(cmp.mean_sojourn.iter().map(|v| fmt_num(*v)));
            row.push(names(&cmp.argmin));
            t.row(row);
        }
    }
    t.write(sink(output)?)
}

fn exit_code(e: &PollingError) -> u8 {
    match e {
        PollingError::Unstable(_) => 3,
        PollingError::NonConvergence { .. } | PollingError::SingularSystem => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { model } => solve(model),
        Command::Simulate { model, reps, batches, seed, warmup, omega, trace } => {
            simulate(model, *reps, *batches, *seed, *warmup, omega, trace)
        }
        Command::Lst { model, omega, batch } => lst(model, omega, batch),
        Command::Experiment(Experiment::Sym2 { grid }) => sym2(grid),
        Command::Experiment(Experiment::Region { grid }) => region(grid),
        Command::Experiment(Experiment::ModelsAbc { rho_grid, output }) => models_abc(rho_grid, output),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
