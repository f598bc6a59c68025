//! `sem`: equilibria, simulations, audits, the studies and the session service.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sem_core::audit::audit_trace;
use sem_core::demand::ShockKind;
use sem_core::equilibrium::{solve, EquilibriumResult, Fundamentals, SolverConfig};
use sem_core::market::{parse_market_spec, MarketSpec};
use sem_core::mechanism::{run, Mechanism, RunTrace};
use sem_experiments::convergence::{convergence_study, ConvergenceConfig};
use sem_experiments::perturbation::{perturbation_study, PerturbationConfig};
use sem_experiments::report::{emit_table1, write_convergence, write_perturbation, write_runs, write_traces};
use sem_experiments::table1::{parse_seed_block, table1, RunSummary, Table1Config, FOSTER};

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "sem", version, about = "Sequential equilibrium mechanism for online matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Shock {
    Ntb,
    Rtb,
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    Sem,
    SdRtb,
    Omniscient,
}

impl From<MechanismArg> for Mechanism {
    fn from(m: MechanismArg) -> Mechanism {
        match m {
            MechanismArg::Sem => Mechanism::Sem,
            MechanismArg::SdRtb => Mechanism::SdRtb,
            MechanismArg::Omniscient => Mechanism::Omniscient,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium of one period at full supply.
    Solve {
        market: PathBuf,
        #[arg(long, default_value_t = 1)]
        period: usize,
        /// Overrides the market's shock kind.
        #[arg(long, value_enum)]
        shock: Option<Shock>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs a mechanism on replicas of a market and writes one trace per seed.
    Simulate {
        market: PathBuf,
        #[arg(long, value_enum, default_value = "sem")]
        mechanism: MechanismArg,
        #[arg(short, long, default_value_t = 1)]
        n: u64,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy, envy and efficiency verdicts for a trace.
    Audit {
        trace: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Placement rates of the mechanism and the serial-dictatorship baseline.
    Table1 {
        #[command(flatten)]
        study: StudyArgs,
        #[arg(long)]
        traces: bool,
    },
    /// Distance to the offline lotteries as the market grows.
    Converge {
        #[command(flatten)]
        study: StudyArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,5,10,25,50,100")]
        replicas: Vec<u64>,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
    },
    /// Price stability under perturbed arrival rates.
    Perturb {
        #[arg(long, default_value = "results/perturbation")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 100)]
        markets: usize,
        #[arg(long, default_value_t = 100)]
        perturbations: usize,
        #[arg(long, default_value_t = 0.025)]
        epsilon: f64,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
    },
    /// HTTP session service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Sessions are logged here and replayed on start; in memory if unset.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long, env = "SEM_TOKEN")]
        token: Option<String>,
    },
}

#[derive(clap::Args)]
struct StudyArgs {
    /// Market file; the foster market if unset.
    #[arg(long)]
    market: Option<PathBuf>,
    /// File with one seed per line; the committed block if unset.
    #[arg(long)]
    seed_block: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
}

impl StudyArgs {
    fn market(&self) -> CliResult<MarketSpec> {
        match &self.market {
            Some(p) => load_market(p),
            None => Ok(parse_market_spec(FOSTER)?),
        }
    }

    fn seeds(&self, fallback: Vec<u64>) -> CliResult<Vec<u64>> {
        match &self.seed_block {
            Some(p) => Ok(parse_seed_block(&fs::read_to_string(p)?)?),
            None => Ok(fallback),
        }
    }

    fn out_dir(&self, default: &str) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn load_market(path: &Path) -> CliResult<MarketSpec> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(parse_market_spec(&text)?)
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent() {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text)?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveDocument<'a> {
    market: &'a str,
    period: usize,
    objects: &'a [String],
    supply: Vec<f64>,
    demanders: Vec<DemanderRow>,
    #[serde(flatten)]
    result: EquilibriumResult,
}

#[derive(Serialize)]
struct DemanderRow {
    ty: String,
    period: usize,
    mass: f64,
    budget: f64,
}

fn solve_cmd(market: &Path, period: usize, shock: Option<Shock>, seed: u64, tol: f64, out: Option<&Path>) -> CliResult<()> {
    let mut spec = load_market(market)?;
    if let Some(s) = shock {
        spec.shock.kind = match s {
            Shock::Ntb => ShockKind::Ntb,
            Shock::Rtb => ShockKind::Rtb,
        };
    }
    let cfg = SolverConfig { tol, seed, ..SolverConfig::precise() };
    let supply: Vec<f64> = spec.objects.supply().iter().map(|&s| s as f64).collect();
    let f = Fundamentals::from_spec(&spec, period, &supply, None)?;
    let result = solve(&f, &cfg.shocks(&spec), &cfg)?;
    let demanders = f
        .demanders
        .iter()
        .map(|d| DemanderRow { ty: spec.types[d.ty].id.clone(), period: d.period, mass: d.mass, budget: d.budget })
        .collect();
    let converged = result.converged;
    let doc = SolveDocument { market: &spec.name, period, objects: spec.objects.names(), supply, demanders, result };
    emit(out, &serde_json::to_string_pretty(&doc)?)?;
    if !converged {
        return Err("solver did not converge".into());
    }
    Ok(())
}

fn simulate_cmd(market: &Path, mechanism: Mechanism, n: u64, seeds: &[u64], out: &Path) -> CliResult<()> {
    let spec = load_market(market)?.replicate(n)?;
    let cfg = SolverConfig::precise();
    let mut runs = Vec::with_capacity(seeds.len());
    let mut traces: Vec<RunTrace> = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let start = std::time::Instant::now();
        let trace = run(&spec, mechanism, seed, &cfg)?;
        runs.push(RunSummary {
            mechanism,
            n,
            seed,
            placement_rate: trace.placement_rate()?,
            residuals: trace.periods.iter().filter_map(|p| p.clearing_error).collect(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        traces.push(trace);
    }
    write_traces(out, &runs, &traces)?;
    write_runs(&runs, fs::File::create(out.join("runs.csv"))?)?;
    for r in &runs {
        eprintln!("{} n={} seed={} placement_rate={:.4}", r.mechanism.name(), r.n, r.seed, r.placement_rate);
    }
    Ok(())
}

fn audit_cmd(trace: &Path, out: Option<&Path>) -> CliResult<bool> {
    let t = RunTrace::from_json(&fs::read_to_string(trace)?)?;
    let report = audit_trace(&t)?;
    emit(out, &serde_json::to_string_pretty(&report)?)?;
    Ok(report.greedy && report.envy_free && report.efficiency.is_efficient())
}

fn table1_cmd(study: &StudyArgs, traces: bool) -> CliResult<()> {
    let base = Table1Config::standard()?;
    let cfg = Table1Config {
        market: study.market()?,
        seeds: study.seeds(base.seeds.clone())?,
        workers: study.workers,
        keep_traces: traces,
        ..base
    };
    let t = table1(&cfg)?;
    let dir = study.out_dir("results/table1");
    emit_table1(&dir, &t)?;
    for c in &t.cells {
        eprintln!("{:<7} n={:<3} mean={:.3} sd={:.3}", c.mechanism.name(), c.n, c.mean, c.sd);
    }
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn converge_cmd(study: &StudyArgs, replicas: Vec<u64>, epsilon: f64) -> CliResult<()> {
    let cfg = ConvergenceConfig {
        market: study.market()?,
        replicas,
        seeds: study.seeds((1..=10).collect())?,
        solver: SolverConfig::precise(),
        epsilon,
        workers: study.workers,
    };
    let report = convergence_study(&cfg)?;
    let dir = study.out_dir("results/convergence");
    fs::create_dir_all(&dir)?;
    write_convergence(&report, fs::File::create(dir.join("convergence.csv"))?)?;
    for r in &report.rows {
        eprintln!("n={:<4} median={:.4} tail={:.2}", r.n, r.median, r.tail);
    }
    Ok(())
}

fn perturb_cmd(out_dir: &Path, cfg: PerturbationConfig) -> CliResult<()> {
    let (reports, summary) = perturbation_study(&cfg)?;
    fs::create_dir_all(out_dir)?;
    write_perturbation(&reports, &summary, fs::File::create(out_dir.join("perturbation.csv"))?)?;
    eprintln!(
        "distance {:.4}, ties preserved {:.4} over {} markets, clearing {:.4}, failures {}",
        summary.average_distance, summary.preserved_ties, summary.markets_with_ties, summary.average_clearing_error, summary.failures
    );
    Ok(())
}

fn serve_cmd(addr: SocketAddr, data_dir: Option<&Path>, token: Option<String>) -> CliResult<()> {
    let config = sem_service::Config { token, solver: None };
    let state = match data_dir {
        Some(d) => sem_service::AppState::persistent(d, config).map_err(|e| e.message)?,
        None => sem_service::AppState::in_memory(config),
    };
    let rt = tokio::runtime::Runtime::new()?;
    eprintln!("listening on http://{addr}");
    rt.block_on(sem_service::serve(addr, state))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { market, period, shock, seed, tol, out } => solve_cmd(&market, period, shock, seed, tol, out.as_deref()),
        Command::Simulate { market, mechanism, n, seeds, out } => simulate_cmd(&market, mechanism.into(), n, &seeds, &out),
        Command::Audit { trace, out } => match audit_cmd(&trace, out.as_deref()) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(2),
            Err(e) => Err(e),
        },
        Command::Table1 { study, traces } => table1_cmd(&study, traces),
        Command::Converge { study, replicas, epsilon } => converge_cmd(&study, replicas, epsilon),
        Command::Perturb { out_dir, markets, perturbations, epsilon, seed, workers } => {
            let cfg = PerturbationConfig { markets, perturbations, epsilon, seed, workers, ..PerturbationConfig::standard() };
            perturb_cmd(&out_dir, cfg)
        }
        Command::Serve { port, host, data_dir, token } => serve_cmd(SocketAddr::new(host, port), data_dir.as_deref(), token),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
