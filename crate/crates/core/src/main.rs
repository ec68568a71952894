//! Command-line front end: single runs, CSV sweeps, tiny-instance
//! verification, Monte Carlo checks and constant fitting.
//!
//! Exit codes: 0 success, 1 reliability violation, 2 configuration error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use macsched::adversary::{AdversaryKind, AdversarySpec, CrashSchedule};
use macsched::harness::{
    self, build_env, parse_algorithm, rows_to_csv, AdversaryConfig, JobsSpec, ScenarioConfig,
    SweepConfig, CSV_HEADER,
};
use macsched::oracle::{self, BoundKind, ExhaustiveOptions};
use macsched::sim::AlgorithmKind;

#[derive(Parser)]
#[command(
    name = "macsched",
    version,
    about = "Crash-prone shared-channel job scheduling simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its result row(s).
    Run(RunArgs),
    /// Run a config grid and write a CSV.
    Sweep {
        /// JSON sweep config (see README for the schema).
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Exhaustive adversary search on a tiny instance.
    Verify(VerifyArgs),
    /// Monte Carlo checks.
    #[command(subcommand)]
    Mc(McCommand),
    /// Fit the bound constant over a results CSV.
    Fit {
        /// Bound kind: preemptive, nonpreemptive or randomized.
        #[arg(long)]
        kind: String,
        /// Results CSV produced by `run --out` or `sweep`.
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// scatri, deftri or ranscatri.
    #[arg(long)]
    algo: Option<String>,
    /// preemptive or nonpreemptive; defaults to the algorithm's mode.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    machines: Option<u32>,
    /// Job generator, e.g. unit:6, equal:3,2, one_long:16,64, uniform:10,1,8.
    #[arg(long)]
    jobs: Option<JobsSpec>,
    /// none | silencer | leader_hunter | random:P | schedule:FILE.
    #[arg(long)]
    adversary: Option<String>,
    /// Adversary budget.
    #[arg(long)]
    f: Option<u32>,
    #[arg(long)]
    round_limit: Option<u64>,
    /// JSON scenario config; replaces the individual flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds for the run (comma-separated).
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Shorthand for a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the rows to this CSV file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the line-delimited trace of the (last) run here.
    #[arg(long)]
    export_trace: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    algo: String,
    #[arg(long)]
    machines: u32,
    #[arg(long)]
    jobs: JobsSpec,
    /// Adversary budget to search over.
    #[arg(long, default_value_t = 0)]
    f: u32,
    #[arg(long, default_value_t = 5_000_000)]
    node_cap: u64,
    /// Merge converging branches (cross-checked against plain enumeration).
    #[arg(long, default_value_t = false)]
    memoize: bool,
    /// For ranscatri: seeds per enumerated schedule.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// For ranscatri: schedule rounds are drawn from 1..=WINDOW;
    /// 0 derives the window from a failure-free run.
    #[arg(long, default_value_t = 0)]
    rounds_window: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Subcommand)]
enum McCommand {
    /// Election success rate in isolation.
    Mix {
        /// Original machine count (sets the toss denominator).
        #[arg(long)]
        m: u32,
        /// Scale level.
        #[arg(long)]
        i: u32,
        /// Operational machines actually participating.
        #[arg(long)]
        operational: u32,
        /// Total task count (sets the success threshold).
        #[arg(long)]
        l: u64,
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Tail of the leader-crash hypergeometric.
    Hyper {
        #[arg(long)]
        total: u32,
        #[arg(long)]
        leaders: u32,
        #[arg(long)]
        crashed: u32,
        #[arg(long)]
        threshold: u32,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn parse_adversary(kind: &str, f: u32) -> Result<AdversaryConfig, String> {
    match kind.split_once(':') {
        None => match kind {
            "none" => Ok(AdversaryConfig::None),
            "silencer" => Ok(AdversaryConfig::Silencer { f }),
            "leader_hunter" => Ok(AdversaryConfig::LeaderHunter { f }),
            other => Err(format!("unknown adversary `{other}`")),
        },
        Some(("random", p)) => {
            let p: f64 = p.parse().map_err(|_| format!("bad probability `{p}`"))?;
            Ok(AdversaryConfig::Random { f, p, seed: 0 })
        }
        Some(("schedule", path)) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
            let schedule = CrashSchedule::parse(&text).map_err(|e| e.to_string())?;
            let crashes = schedule.entries().iter().map(|&(m, r)| (m.0, r)).collect();
            Ok(AdversaryConfig::Schedule { f, crashes })
        }
        Some((other, _)) => Err(format!("unknown adversary `{other}`")),
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, String> {
    let (algo, machines, jobs, adversary, round_limit, mut seeds, cfg_out) = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let cfg: ScenarioConfig =
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            let algo = parse_algorithm(&cfg.algorithm).map_err(|e| e.to_string())?;
            harness::check_mode(algo, &cfg.mode).map_err(|e| e.to_string())?;
            (
                algo,
                cfg.machines,
                cfg.jobs,
                cfg.adversary,
                cfg.round_limit,
                cfg.seeds.expand(),
                cfg.out,
            )
        }
        None => {
            let algo_name = args
                .algo
                .as_ref()
                .ok_or("--algo is required without --config")?;
            let algo = parse_algorithm(algo_name).map_err(|e| e.to_string())?;
            harness::check_mode(algo, &args.mode).map_err(|e| e.to_string())?;
            let machines = args.machines.ok_or("--machines is required")?;
            let jobs = args.jobs.clone().ok_or("--jobs is required")?;
            let f = args.f.unwrap_or(0);
            let adversary = parse_adversary(args.adversary.as_deref().unwrap_or("none"), f)?;
            (
                algo,
                machines,
                jobs,
                adversary,
                args.round_limit,
                Vec::new(),
                None,
            )
        }
    };

    if !args.seeds.is_empty() {
        seeds = args.seeds.clone();
    }
    if let Some(s) = args.seed {
        seeds = vec![s];
    }
    if seeds.is_empty() {
        seeds = vec![0];
    }

    let mut rows = Vec::new();
    let mut last_trace = None;
    for &seed in &seeds {
        let env = build_env(algo, machines, &jobs, &adversary, seed, round_limit)
            .map_err(|e| e.to_string())?;
        let (row, trace) = harness::run_once(&env).map_err(|e| e.to_string())?;
        rows.push(row);
        last_trace = Some(trace);
    }

    println!("{CSV_HEADER}");
    for row in &rows {
        println!("{}", row.to_csv_line());
    }
    if let Some(path) = args.out.or(cfg_out) {
        fs::write(&path, rows_to_csv(&rows)).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if let Some(path) = args.export_trace {
        let trace = last_trace.expect("at least one seed ran");
        fs::write(&path, trace.export_lines()).map_err(|e| format!("{}: {e}", path.display()))?;
    }

    if rows.iter().all(|r| r.reliable) {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("reliability violation");
        Ok(ExitCode::from(1))
    }
}

fn cmd_sweep(config: PathBuf, out: PathBuf) -> Result<ExitCode, String> {
    let text = fs::read_to_string(&config).map_err(|e| format!("{}: {e}", config.display()))?;
    let cfg: SweepConfig =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", config.display()))?;
    let rows = harness::sweep(&cfg).map_err(|e| e.to_string())?;
    fs::write(&out, rows_to_csv(&rows)).map_err(|e| format!("{}: {e}", out.display()))?;
    eprintln!("wrote {} rows to {}", rows.len(), out.display());
    if rows.iter().all(|r| r.reliable) {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("reliability violation in at least one cell");
        Ok(ExitCode::from(1))
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, String> {
    let algo = parse_algorithm(&args.algo).map_err(|e| e.to_string())?;
    let mut env = build_env(
        algo,
        args.machines,
        &args.jobs,
        &AdversaryConfig::None,
        args.seed,
        None,
    )
    .map_err(|e| e.to_string())?;
    env.adversary = AdversarySpec::new(args.f, AdversaryKind::None);
    env.validate().map_err(|e| e.to_string())?;

    let report = if algo == AlgorithmKind::RanScaTri {
        let window = if args.rounds_window > 0 {
            args.rounds_window
        } else {
            let free = macsched::algorithms::run(&env).map_err(|e| e.to_string())?;
            free.round_count() + 2 * u64::from(args.f) + 2
        };
        oracle::exhaustive_nonadaptive(&env, args.f, window, args.seeds)
            .map_err(|e| e.to_string())?
    } else {
        let opts = ExhaustiveOptions {
            node_cap: args.node_cap,
            memoize: args.memoize,
        };
        oracle::exhaustive_worst_case(&env, &opts).map_err(|e| e.to_string())?
    };
    println!(
        "max_work={} all_reliable={} leaves={} nodes={}",
        report.max_work, report.all_reliable, report.leaves, report.nodes
    );
    Ok(if report.all_reliable {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_mc(cmd: McCommand) -> Result<ExitCode, String> {
    println!("estimate,stderr,bound,samples");
    match cmd {
        McCommand::Mix {
            m,
            i,
            operational,
            l,
            trials,
            seed,
        } => {
            let rate = oracle::mc_mix_and_test(i, l, m, operational, trials, seed)
                .map_err(|e| e.to_string())?;
            let se = (rate * (1.0 - rate) / trials as f64).sqrt();
            // Empirical acceptance threshold; the analysis fixes only the
            // limit behavior, not the constant.
            println!("{rate:.6},{se:.6},0.95,{trials}");
        }
        McCommand::Hyper {
            total,
            leaders,
            crashed,
            threshold,
            samples,
            seed,
        } => {
            let est =
                oracle::mc_hypergeometric_tail(total, leaders, crashed, threshold, samples, seed)
                    .map_err(|e| e.to_string())?;
            let se = (est * (1.0 - est) / samples as f64).sqrt();
            let bound = (-f64::from(leaders) / 8.0).exp();
            println!("{est:.6},{se:.6},{bound:.6},{samples}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_fit(kind: String, input: PathBuf) -> Result<ExitCode, String> {
    let kind = match kind.as_str() {
        "preemptive" | "pre" => BoundKind::Preemptive,
        "nonpreemptive" | "nonpre" => BoundKind::NonPreemptive,
        "randomized" | "rand" => BoundKind::Randomized,
        other => return Err(format!("unknown bound kind `{other}`")),
    };
    let text = fs::read_to_string(&input).map_err(|e| format!("{}: {e}", input.display()))?;
    let rows = harness::parse_csv(&text).map_err(|e| e.to_string())?;
    let c = harness::fit_rows(&rows, kind).map_err(|e| e.to_string())?;
    println!("{c:.6}");
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep { config, out } => cmd_sweep(config, out),
        Command::Verify(args) => cmd_verify(args),
        Command::Mc(cmd) => cmd_mc(cmd),
        Command::Fit { kind, input } => cmd_fit(kind, input),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
