//! Scenario configuration, job-set generators, batch sweeps and CSV output.
//!
//! Configs are JSON with unknown keys rejected (typos fail fast). Sweeps are
//! pure: the output equals the concatenation of the per-cell runs in
//! deterministic order (grid axes in declared order, then seeds), so a rerun
//! of the same config is byte-identical.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{AdversaryKind, AdversarySpec, CrashSchedule};
use crate::algorithms;
use crate::jobs::{JobSet, MachineId};
use crate::oracle::{bound_eval, BoundKind, BoundParams, OracleError};
use crate::rng::derive_rng;
use crate::sim::{AlgorithmKind, ConfigError, SimEnv, SimError};
use crate::trace::{total_work, verify_reliability, ExecutionTrace};

pub const CSV_HEADER: &str =
    "algo,m,n,L,alpha,f,adversary,seed,work,rounds,reliable,bound_pre,bound_nonpre,bound_rand";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse: {0}")]
    Parse(String),
}

/// Job-set shapes the generator knows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JobsSpec {
    /// `n` unit-length jobs.
    Unit { n: u32 },
    /// `n` jobs of length `len`.
    Equal { n: u32, len: u32 },
    /// `n - 1` unit jobs plus one of length `alpha` (id `n`).
    OneLong { n: u32, alpha: u32 },
    /// `n` lengths drawn independently and uniformly from `lo..=hi`.
    Uniform { n: u32, lo: u32, hi: u32 },
}

impl fmt::Display for JobsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JobsSpec::Unit { n } => write!(f, "unit:{n}"),
            JobsSpec::Equal { n, len } => write!(f, "equal:{n},{len}"),
            JobsSpec::OneLong { n, alpha } => write!(f, "one_long:{n},{alpha}"),
            JobsSpec::Uniform { n, lo, hi } => write!(f, "uniform:{n},{lo},{hi}"),
        }
    }
}

impl FromStr for JobsSpec {
    type Err = ConfigError;

    /// CLI syntax: `unit:N`, `equal:N,LEN`, `one_long:N,ALPHA`,
    /// `uniform:N,LO,HI`.
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let bad = |m: String| ConfigError::BadJobs(m);
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| bad(format!("`{s}`: expected kind:params")))?;
        let nums: Vec<u32> = rest
            .split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| bad(format!("bad number `{p}` in `{s}`")))
            })
            .collect::<Result<_, _>>()?;
        match (kind, nums.as_slice()) {
            ("unit", [n]) => Ok(JobsSpec::Unit { n: *n }),
            ("equal", [n, len]) => Ok(JobsSpec::Equal { n: *n, len: *len }),
            ("one_long", [n, alpha]) => Ok(JobsSpec::OneLong {
                n: *n,
                alpha: *alpha,
            }),
            ("uniform", [n, lo, hi]) => Ok(JobsSpec::Uniform {
                n: *n,
                lo: *lo,
                hi: *hi,
            }),
            _ => Err(bad(format!("`{s}`: unknown kind or wrong arity"))),
        }
    }
}

const JOB_GEN_SALT: u64 = 0x6a6f_6273;

/// Deterministic job-set generation; ids are `1..=n` in generation order.
pub fn generate_jobs(spec: &JobsSpec, seed: u64) -> Result<JobSet, ConfigError> {
    let lengths: Vec<u32> = match *spec {
        JobsSpec::Unit { n } => {
            if n < 1 {
                return Err(ConfigError::BadJobs("unit: n must be >= 1".into()));
            }
            vec![1; n as usize]
        }
        JobsSpec::Equal { n, len } => {
            if n < 1 || len < 1 {
                return Err(ConfigError::BadJobs(
                    "equal: need n >= 1 and len >= 1".into(),
                ));
            }
            vec![len; n as usize]
        }
        JobsSpec::OneLong { n, alpha } => {
            if n < 1 || alpha < 1 {
                return Err(ConfigError::BadJobs(
                    "one_long: need n >= 1 and alpha >= 1".into(),
                ));
            }
            let mut v = vec![1; (n - 1) as usize];
            v.push(alpha);
            v
        }
        JobsSpec::Uniform { n, lo, hi } => {
            if n < 1 || lo < 1 || lo > hi {
                return Err(ConfigError::BadJobs(
                    "uniform: need n >= 1, 1 <= lo <= hi".into(),
                ));
            }
            let mut rng = derive_rng(seed, JOB_GEN_SALT, 0);
            (0..n).map(|_| rng.gen_range(lo..=hi)).collect()
        }
    };
    JobSet::from_lengths(&lengths).map_err(|e| ConfigError::BadJobs(e.to_string()))
}

/// Adversary selection in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversaryConfig {
    None,
    Silencer { f: u32 },
    LeaderHunter { f: u32 },
    Random { f: u32, p: f64, seed: u64 },
    Schedule { f: u32, crashes: Vec<(u32, u64)> },
}

impl AdversaryConfig {
    pub fn budget(&self) -> u32 {
        match self {
            AdversaryConfig::None => 0,
            AdversaryConfig::Silencer { f }
            | AdversaryConfig::LeaderHunter { f }
            | AdversaryConfig::Random { f, .. }
            | AdversaryConfig::Schedule { f, .. } => *f,
        }
    }

    pub fn to_spec(&self) -> Result<AdversarySpec, ConfigError> {
        Ok(match self {
            AdversaryConfig::None => AdversarySpec::none(),
            AdversaryConfig::Silencer { f } => AdversarySpec::new(*f, AdversaryKind::Silencer),
            AdversaryConfig::LeaderHunter { f } => {
                AdversarySpec::new(*f, AdversaryKind::LeaderHunter)
            }
            AdversaryConfig::Random { f, p, seed } => {
                AdversarySpec::new(*f, AdversaryKind::Random { p: *p, seed: *seed })
            }
            AdversaryConfig::Schedule { f, crashes } => {
                let entries = crashes.iter().map(|&(m, r)| (MachineId(m), r)).collect();
                AdversarySpec::new(*f, AdversaryKind::Schedule(CrashSchedule::new(entries)?))
            }
        })
    }
}

/// Seed expansion: an explicit list or `base + 0..count`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range { base: u64, count: u64 },
}

impl SeedSpec {
    pub fn expand(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Range { base, count } => (0..*count).map(|k| base + k).collect(),
        }
    }
}

/// One scenario: a single algorithm/instance, possibly many seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub algorithm: String,
    /// Optional; must match the algorithm's mode when given.
    #[serde(default)]
    pub mode: Option<String>,
    pub machines: u32,
    pub jobs: JobsSpec,
    pub adversary: AdversaryConfig,
    pub seeds: SeedSpec,
    #[serde(default)]
    pub round_limit: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// A sweep: the cartesian product of the listed axes, crossed with seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub algorithm: String,
    #[serde(default)]
    pub mode: Option<String>,
    pub machines: Vec<u32>,
    pub jobs: Vec<JobsSpec>,
    pub adversary: Vec<AdversaryConfig>,
    pub seeds: SeedSpec,
    #[serde(default)]
    pub round_limit: Option<u64>,
}

pub fn parse_algorithm(name: &str) -> Result<AlgorithmKind, ConfigError> {
    match name {
        "scatri" => Ok(AlgorithmKind::ScaTri),
        "deftri" => Ok(AlgorithmKind::DefTri),
        "ranscatri" => Ok(AlgorithmKind::RanScaTri),
        other => Err(ConfigError::Invalid(format!(
            "unknown algorithm `{other}` (expected scatri, deftri or ranscatri)"
        ))),
    }
}

/// Non-preemptive jobs cannot run under a preemptive scheduler and vice
/// versa; an explicit `mode` must therefore name the algorithm's own.
pub fn check_mode(algorithm: AlgorithmKind, mode: &Option<String>) -> Result<(), ConfigError> {
    if let Some(mode) = mode {
        let required = algorithm.natural_mode().name();
        if mode != required {
            return Err(ConfigError::Invalid(format!(
                "{} requires {required} mode, got {mode}",
                algorithm.name()
            )));
        }
    }
    Ok(())
}

/// One output row of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub algo: String,
    pub machines: u32,
    pub jobs: u32,
    pub total_len: u64,
    pub max_len: u32,
    pub faults: u32,
    pub adversary: String,
    pub seed: u64,
    pub work: u64,
    pub rounds: u64,
    pub reliable: bool,
    pub bound_pre: f64,
    pub bound_nonpre: f64,
    pub bound_rand: f64,
}

impl ResultRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:.4},{:.4},{:.4}",
            self.algo,
            self.machines,
            self.jobs,
            self.total_len,
            self.max_len,
            self.faults,
            self.adversary,
            self.seed,
            self.work,
            self.rounds,
            self.reliable,
            self.bound_pre,
            self.bound_nonpre,
            self.bound_rand
        )
    }

    pub fn parse_csv_line(line: &str) -> Result<Self, HarnessError> {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 14 {
            return Err(HarnessError::Parse(format!(
                "expected 14 fields, got {}",
                parts.len()
            )));
        }
        let num = |i: usize| -> Result<u64, HarnessError> {
            parts[i]
                .parse()
                .map_err(|_| HarnessError::Parse(format!("bad number `{}`", parts[i])))
        };
        let float = |i: usize| -> Result<f64, HarnessError> {
            parts[i]
                .parse()
                .map_err(|_| HarnessError::Parse(format!("bad float `{}`", parts[i])))
        };
        Ok(ResultRow {
            algo: parts[0].to_string(),
            machines: num(1)? as u32,
            jobs: num(2)? as u32,
            total_len: num(3)?,
            max_len: num(4)? as u32,
            faults: num(5)? as u32,
            adversary: parts[6].to_string(),
            seed: num(7)?,
            work: num(8)?,
            rounds: num(9)?,
            reliable: parts[10]
                .parse()
                .map_err(|_| HarnessError::Parse(format!("bad bool `{}`", parts[10])))?,
            bound_pre: float(11)?,
            bound_nonpre: float(12)?,
            bound_rand: float(13)?,
        })
    }
}

/// Build the environment for one cell.
pub fn build_env(
    algorithm: AlgorithmKind,
    machines: u32,
    jobs_spec: &JobsSpec,
    adversary: &AdversaryConfig,
    seed: u64,
    round_limit: Option<u64>,
) -> Result<SimEnv, ConfigError> {
    let jobs = generate_jobs(jobs_spec, seed)?;
    let mut env = SimEnv::new(machines, jobs, algorithm, adversary.to_spec()?, seed)?;
    if let Some(limit) = round_limit {
        env = env.with_round_limit(limit);
    }
    Ok(env)
}

/// Run one environment and summarize it as a row; the row is a pure function
/// of the environment.
pub fn run_once(env: &SimEnv) -> Result<(ResultRow, ExecutionTrace), HarnessError> {
    let trace = algorithms::run(env)?;
    let work = total_work(&trace).expect("runs complete");
    let verdict = verify_reliability(&trace, &env.jobs, env.mode);
    let params = BoundParams::from_jobs(env.machine_count, &env.jobs, env.adversary.budget, 1.0);
    // The non-preemptive bound is undefined for empty job sets; report 0.
    let bound_nonpre = if env.jobs.is_empty() {
        0.0
    } else {
        bound_eval(BoundKind::NonPreemptive, &params)?
    };
    Ok((
        ResultRow {
            algo: env.algorithm.name().to_string(),
            machines: env.machine_count,
            jobs: env.jobs.count(),
            total_len: env.jobs.total_len(),
            max_len: env.jobs.max_len(),
            faults: env.adversary.budget,
            adversary: env.adversary.kind.name().to_string(),
            seed: env.seed,
            work,
            rounds: trace.round_count(),
            reliable: verdict.reliable,
            bound_pre: bound_eval(BoundKind::Preemptive, &params)?,
            bound_nonpre,
            bound_rand: bound_eval(BoundKind::Randomized, &params)?,
        },
        trace,
    ))
}

/// Expand a sweep config into rows: grid axes in declared order
/// (machines, jobs, adversary), then seeds.
pub fn sweep(config: &SweepConfig) -> Result<Vec<ResultRow>, HarnessError> {
    let algorithm = parse_algorithm(&config.algorithm)?;
    check_mode(algorithm, &config.mode)?;
    let seeds = config.seeds.expand();
    if seeds.is_empty() {
        return Err(HarnessError::Config(ConfigError::Invalid(
            "seed list is empty".into(),
        )));
    }
    let mut rows = Vec::new();
    for &m in &config.machines {
        for jobs_spec in &config.jobs {
            for adversary in &config.adversary {
                for &seed in &seeds {
                    let env =
                        build_env(algorithm, m, jobs_spec, adversary, seed, config.round_limit)?;
                    let (row, _) = run_once(&env)?;
                    rows.push(row);
                }
            }
        }
    }
    Ok(rows)
}

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>, HarnessError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(HarnessError::Parse(format!(
                "missing or mismatched header: {other:?}"
            )))
        }
    }
    lines.map(ResultRow::parse_csv_line).collect()
}

/// Fit the scaling constant over the reliable rows of a results file.
/// Unreliable rows are a contract violation and rejected.
pub fn fit_rows(rows: &[ResultRow], kind: BoundKind) -> Result<f64, HarnessError> {
    if let Some(bad) = rows.iter().find(|r| !r.reliable) {
        return Err(HarnessError::Parse(format!(
            "row with seed {} is unreliable; fitting requires reliable runs only",
            bad.seed
        )));
    }
    let runs: Vec<(u64, BoundParams)> = rows
        .iter()
        .map(|r| {
            (
                r.work,
                BoundParams {
                    machines: r.machines,
                    jobs: r.jobs,
                    total_len: r.total_len,
                    max_len: r.max_len,
                    faults: r.faults,
                    constant: 1.0,
                },
            )
        })
        .collect();
    Ok(crate::oracle::fit_constant(&runs, kind)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_reference_values() {
        let js = generate_jobs(&JobsSpec::Unit { n: 3 }, 0).unwrap();
        assert_eq!((js.count(), js.total_len(), js.max_len()), (3, 3, 1));

        let js = generate_jobs(&JobsSpec::OneLong { n: 4, alpha: 7 }, 0).unwrap();
        let lengths: Vec<u32> = js.jobs().iter().map(|j| j.length).collect();
        assert_eq!(lengths, [1, 1, 1, 7]);
        assert_eq!(js.max_len(), 7);

        assert!(generate_jobs(&JobsSpec::Unit { n: 0 }, 0).is_err());
        assert!(generate_jobs(&JobsSpec::Uniform { n: 5, lo: 9, hi: 3 }, 0).is_err());
    }

    #[test]
    fn uniform_generation_is_deterministic() {
        let spec = JobsSpec::Uniform {
            n: 100,
            lo: 1,
            hi: 8,
        };
        let a = generate_jobs(&spec, 42).unwrap();
        let b = generate_jobs(&spec, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_jobs(&spec, 43).unwrap();
        assert_ne!(a, c);
        assert!(a.jobs().iter().all(|j| (1..=8).contains(&j.length)));
    }

    #[test]
    fn jobs_spec_cli_round_trip() {
        for s in ["unit:3", "equal:3,2", "one_long:4,7", "uniform:100,1,8"] {
            let spec: JobsSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("unit".parse::<JobsSpec>().is_err());
        assert!("equal:1".parse::<JobsSpec>().is_err());
        assert!("weird:1,2".parse::<JobsSpec>().is_err());
    }

    #[test]
    fn run_once_matches_hand_simulations() {
        let env = build_env(
            AlgorithmKind::ScaTri,
            3,
            &JobsSpec::Unit { n: 6 },
            &AdversaryConfig::None,
            1,
            None,
        )
        .unwrap();
        let (row, _) = run_once(&env).unwrap();
        assert_eq!(row.work, 9);
        assert!(row.reliable);

        let env = build_env(
            AlgorithmKind::DefTri,
            2,
            &JobsSpec::Equal { n: 3, len: 2 },
            &AdversaryConfig::None,
            1,
            None,
        )
        .unwrap();
        let (row, _) = run_once(&env).unwrap();
        assert_eq!(row.work, 8);
    }

    #[test]
    fn ranscatri_delegation_matches_scatri_row() {
        // m^2 <= L: identical run apart from the algorithm label.
        let mk = |algo| {
            build_env(
                algo,
                2,
                &JobsSpec::Unit { n: 9 },
                &AdversaryConfig::None,
                5,
                None,
            )
            .unwrap()
        };
        let (a, _) = run_once(&mk(AlgorithmKind::RanScaTri)).unwrap();
        let (b, _) = run_once(&mk(AlgorithmKind::ScaTri)).unwrap();
        assert_eq!(a.work, b.work);
        assert_eq!(a.rounds, b.rounds);
        assert_eq!(a.reliable, b.reliable);
        assert_eq!(
            (a.bound_pre, a.bound_nonpre, a.bound_rand),
            (b.bound_pre, b.bound_nonpre, b.bound_rand)
        );
    }

    #[test]
    fn sweep_counts_and_determinism() {
        let config = SweepConfig {
            algorithm: "scatri".into(),
            mode: None,
            machines: vec![2, 3],
            jobs: vec![JobsSpec::Unit { n: 4 }, JobsSpec::Unit { n: 6 }],
            adversary: vec![AdversaryConfig::None],
            seeds: SeedSpec::Range { base: 10, count: 3 },
            round_limit: None,
        };
        let rows = sweep(&config).unwrap();
        assert_eq!(rows.len(), 12);
        let again = sweep(&config).unwrap();
        let text = rows_to_csv(&rows);
        assert_eq!(text, rows_to_csv(&again));
        // Parsing keeps the emitted (4-decimal) precision: idempotent.
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(rows_to_csv(&parsed), text);
        assert_eq!(parsed.len(), rows.len());
    }

    #[test]
    fn csv_header_is_stable() {
        assert_eq!(
            CSV_HEADER,
            "algo,m,n,L,alpha,f,adversary,seed,work,rounds,reliable,bound_pre,bound_nonpre,bound_rand"
        );
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let json = r#"{
            "algorithm": "scatri",
            "machines": [2],
            "jobs": [{"kind": "unit", "n": 2}],
            "adversary": [{"kind": "none"}],
            "seeds": [1],
            "typo_field": true
        }"#;
        assert!(serde_json::from_str::<SweepConfig>(json).is_err());
    }

    #[test]
    fn scenario_config_parses() {
        let json = r#"{
            "algorithm": "deftri",
            "machines": 4,
            "jobs": {"kind": "equal", "n": 3, "len": 2},
            "adversary": {"kind": "silencer", "f": 2},
            "seeds": {"base": 7, "count": 2}
        }"#;
        let cfg: ScenarioConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.seeds.expand(), vec![7, 8]);
        assert_eq!(cfg.adversary.budget(), 2);
    }

    #[test]
    fn fitting_rejects_unreliable_rows() {
        let env = build_env(
            AlgorithmKind::ScaTri,
            3,
            &JobsSpec::Unit { n: 6 },
            &AdversaryConfig::None,
            1,
            None,
        )
        .unwrap();
        let (mut row, _) = run_once(&env).unwrap();
        assert!(fit_rows(std::slice::from_ref(&row), BoundKind::Preemptive).is_ok());
        row.reliable = false;
        assert!(fit_rows(&[row], BoundKind::Preemptive).is_err());
    }
}
