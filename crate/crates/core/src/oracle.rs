//! Independent verification: exhaustive adversary search on tiny instances,
//! Monte Carlo checks of the probabilistic claims, work-bound evaluation and
//! constant fitting.
//!
//! The exhaustive oracle brute-forces every adaptive adversary decision tree:
//! at each round it branches over every subset of running machines within the
//! remaining budget, forks the engine state, and checks every leaf trace with
//! the trace-based verifiers. It applies only to the deterministic
//! schedulers. An optional state-memoization mode merges branches that reach
//! identical engine states (histories that converge have identical futures);
//! the plain enumeration stays the soundness baseline and the test suite
//! cross-checks the two on the smallest instances.

use std::collections::{BTreeSet, HashMap};
use std::hash::{Hash, Hasher};

use rand::Rng;
use thiserror::Error;

use crate::adversary::{AdversaryKind, AdversarySpec, CrashSchedule};
use crate::algorithms::{self, AlgoMachine};
use crate::jobs::{JobSet, MachineId};
use crate::rng::derive_rng;
use crate::sim::{AlgorithmKind, Program, SimEnv, SimError, Simulation};
use crate::trace::{total_work, verify_reliability, Terminal};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance too large: {nodes} nodes explored, cap is {cap}")]
    InstanceTooLarge { nodes: u64, cap: u64 },
    #[error("exhaustive search requires a deterministic algorithm")]
    RandomizedAlgorithm,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
}

/// Parameters of the closed-form work bounds, plus the fitted constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub machines: u32,
    pub jobs: u32,
    pub total_len: u64,
    pub max_len: u32,
    pub faults: u32,
    pub constant: f64,
}

impl BoundParams {
    pub fn from_jobs(machines: u32, jobs: &JobSet, faults: u32, constant: f64) -> Self {
        BoundParams {
            machines,
            jobs: jobs.count(),
            total_len: jobs.total_len(),
            max_len: jobs.max_len(),
            faults,
            constant,
        }
    }
}

/// Which closed-form bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundKind {
    Preemptive,
    NonPreemptive,
    Randomized,
}

impl BoundKind {
    pub fn name(&self) -> &'static str {
        match self {
            BoundKind::Preemptive => "preemptive",
            BoundKind::NonPreemptive => "nonpreemptive",
            BoundKind::Randomized => "randomized",
        }
    }
}

/// Evaluate a work bound at the given parameters.
///
/// - preemptive: `L + C (m sqrt(L) + m min(f, L) + m alpha)`
/// - non-preemptive: `L + C ((L/n) m sqrt(n) + alpha m min(f, n))`
/// - randomized: `C (L + m sqrt(L) + m alpha)`
pub fn bound_eval(kind: BoundKind, p: &BoundParams) -> Result<f64, OracleError> {
    let m = f64::from(p.machines);
    let l = p.total_len as f64;
    let alpha = f64::from(p.max_len);
    let f = f64::from(p.faults);
    let c = p.constant;
    match kind {
        BoundKind::Preemptive => Ok(l + c * (m * l.sqrt() + m * f.min(l) + m * alpha)),
        BoundKind::NonPreemptive => {
            if p.jobs == 0 {
                return Err(OracleError::InvalidParams(
                    "non-preemptive bound needs at least one job".into(),
                ));
            }
            let n = f64::from(p.jobs);
            Ok(l + c * ((l / n) * m * n.sqrt() + alpha * m * f.min(n)))
        }
        BoundKind::Randomized => Ok(c * (l + m * l.sqrt() + m * alpha)),
    }
}

/// The overhead term of a bound: `bound_eval` with `C = 1` minus the additive
/// `L` term (for the randomized kind, the whole `C = 1` bound).
pub fn bound_overhead(kind: BoundKind, p: &BoundParams) -> Result<f64, OracleError> {
    let unit = BoundParams {
        constant: 1.0,
        ..*p
    };
    let full = bound_eval(kind, &unit)?;
    Ok(match kind {
        BoundKind::Randomized => full,
        _ => full - p.total_len as f64,
    })
}

/// Fit the witness constant over a set of reliable runs: the max over runs of
/// `(work - L) / overhead` (worst case, so the max ratio is the constant).
pub fn fit_constant(runs: &[(u64, BoundParams)], kind: BoundKind) -> Result<f64, OracleError> {
    if runs.is_empty() {
        return Err(OracleError::EmptyInput("no runs to fit"));
    }
    let mut worst: f64 = 0.0;
    for (work, p) in runs {
        let overhead = bound_overhead(kind, p)?;
        let numer = match kind {
            BoundKind::Randomized => *work as f64,
            _ => *work as f64 - p.total_len as f64,
        };
        worst = worst.max(numer / overhead);
    }
    Ok(worst)
}

/// The count of jobs longer than twice the average never exceeds half the
/// jobs. Holds for every job set; exercised as a property of the statistics
/// pipeline. Integer-exact: counts `len * n > 2L` strictly.
pub fn fact31_check(jobs: &JobSet) -> bool {
    let n = u64::from(jobs.count());
    if n == 0 {
        return true;
    }
    let twice_total = 2 * jobs.total_len();
    let count = jobs
        .jobs()
        .iter()
        .filter(|j| u64::from(j.length) * n > twice_total)
        .count() as u64;
    2 * count <= n
}

#[derive(Debug, Clone, Copy)]
pub struct ExhaustiveOptions {
    pub node_cap: u64,
    /// Merge branches whose engine states coincide. Sound for deterministic
    /// programs (their future depends only on the state); the plain
    /// enumeration is kept as the cross-check baseline.
    pub memoize: bool,
}

impl Default for ExhaustiveOptions {
    fn default() -> Self {
        ExhaustiveOptions {
            node_cap: 5_000_000,
            memoize: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExhaustiveReport {
    pub max_work: u64,
    pub all_reliable: bool,
    pub leaves: u64,
    pub nodes: u64,
}

struct Search<'a> {
    env: &'a SimEnv,
    opts: ExhaustiveOptions,
    nodes: u64,
    leaves: u64,
    memo: HashMap<u64, (u64, bool)>,
}

fn state_digest(sim: &Simulation<AlgoMachine>, budget: u32) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    budget.hash(&mut h);
    for m in sim.running_machines() {
        m.hash(&mut h);
        sim.program(m).hash(&mut h);
    }
    for m in 1..=sim.trace().machine_count {
        sim.trace()
            .terminal
            .contains_key(&MachineId(m))
            .hash(&mut h);
    }
    h.finish()
}

impl<'a> Search<'a> {
    /// Returns (max future work, all leaves reliable) from this state.
    fn explore(&mut self, sim: &Simulation<AlgoMachine>) -> Result<(u64, bool), OracleError> {
        self.nodes += 1;
        if self.nodes > self.opts.node_cap {
            return Err(OracleError::InstanceTooLarge {
                nodes: self.nodes,
                cap: self.opts.node_cap,
            });
        }
        if sim.is_complete() {
            self.leaves += 1;
            let trace = sim.trace();
            let reliable = if self.opts.memoize {
                // State-based verdict (past-independent): all non-crashed
                // machines halted and the surviving views hold no jobs.
                let halted_ok = trace.machines().all(|m| trace.terminal.contains_key(&m));
                let views_empty = trace
                    .machines()
                    .filter(|m| matches!(trace.terminal.get(m), Some(Terminal::Halted(_))))
                    .all(|m| {
                        sim.program(m)
                            .view()
                            .map(|v| v.jobs_done())
                            .unwrap_or(false)
                    });
                halted_ok && views_empty
            } else {
                verify_reliability(trace, &self.env.jobs, self.env.mode).reliable
            };
            // Future work is zero at a leaf; the caller adds its own credits.
            return Ok((0, reliable));
        }

        let digest = if self.opts.memoize {
            Some(state_digest(sim, sim.budget_left()))
        } else {
            None
        };
        if let Some(d) = digest {
            if let Some(&hit) = self.memo.get(&d) {
                return Ok(hit);
            }
        }

        let running = sim.running_machines();
        let budget = sim.budget_left().min(running.len() as u32);
        let intents = sim.compute_intents();

        let mut best = 0u64;
        let mut all_reliable = true;
        // Every subset of running machines within the remaining budget,
        // including the empty set, in deterministic mask order.
        for mask in 0u64..(1u64 << running.len()) {
            if mask.count_ones() > budget {
                continue;
            }
            let crashes: BTreeSet<MachineId> = running
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &m)| m)
                .collect();
            let credit = (running.len() - crashes.len()) as u64;
            let mut fork = sim.clone();
            fork.apply_round(intents.clone(), &crashes)?;
            let (future, reliable) = self.explore(&fork)?;
            best = best.max(credit + future);
            all_reliable &= reliable;
        }

        if let Some(d) = digest {
            self.memo.insert(d, (best, all_reliable));
        }
        Ok((best, all_reliable))
    }
}

/// Enumerate every adaptive adversary decision tree against a deterministic
/// scheduler: per round, every crash subset within the remaining budget.
/// Returns the worst-case work and whether every leaf was reliable.
/// `env.adversary` supplies only the budget; its kind is ignored.
pub fn exhaustive_worst_case(
    env: &SimEnv,
    opts: &ExhaustiveOptions,
) -> Result<ExhaustiveReport, OracleError> {
    if env.algorithm == AlgorithmKind::RanScaTri {
        return Err(OracleError::RandomizedAlgorithm);
    }
    let sim =
        algorithms::new_simulation(env).map_err(|e| OracleError::InvalidParams(e.to_string()))?;
    let mut search = Search {
        env,
        opts: *opts,
        nodes: 0,
        leaves: 0,
        memo: HashMap::new(),
    };
    let (max_work, all_reliable) = search.explore(&sim)?;
    Ok(ExhaustiveReport {
        max_work,
        all_reliable,
        leaves: search.leaves,
        nodes: search.nodes,
    })
}

/// Run the randomized scheduler under every non-adaptive schedule with at
/// most `budget` crashes placed in rounds `1..=round_window` (plus the empty
/// schedule), `seeds_per_schedule` seeds each.
pub fn exhaustive_nonadaptive(
    env_base: &SimEnv,
    budget: u32,
    round_window: u64,
    seeds_per_schedule: u64,
) -> Result<ExhaustiveReport, OracleError> {
    let m = env_base.machine_count;
    let mut schedules: Vec<Vec<(MachineId, u64)>> = vec![vec![]];
    // Subsets of machines of size up to the budget, each crossed with every
    // round assignment in the window.
    for mask in 1u64..(1u64 << m) {
        if mask.count_ones() > budget {
            continue;
        }
        let members: Vec<MachineId> = (0..m)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| MachineId(i + 1))
            .collect();
        let k = members.len();
        let mut rounds = vec![1u64; k];
        loop {
            schedules.push(
                members
                    .iter()
                    .copied()
                    .zip(rounds.iter().copied())
                    .collect(),
            );
            // Odometer over round assignments.
            let mut i = 0;
            while i < k {
                rounds[i] += 1;
                if rounds[i] <= round_window {
                    break;
                }
                rounds[i] = 1;
                i += 1;
            }
            if i == k {
                break;
            }
        }
    }

    let mut max_work = 0u64;
    let mut all_reliable = true;
    let mut leaves = 0u64;
    for schedule in &schedules {
        let crash = CrashSchedule::new(schedule.clone())
            .map_err(|e| OracleError::InvalidParams(e.to_string()))?;
        for s in 0..seeds_per_schedule {
            let mut env = env_base.clone();
            env.adversary = AdversarySpec::new(budget, AdversaryKind::Schedule(crash.clone()));
            env.seed = derive_rng(env_base.seed, leaves, s).gen();
            env.validate()
                .map_err(|e| OracleError::InvalidParams(e.to_string()))?;
            let trace = algorithms::run(&env)?;
            max_work = max_work.max(total_work(&trace).expect("complete"));
            all_reliable &= verify_reliability(&trace, &env.jobs, env.mode).reliable;
            leaves += 1;
        }
    }
    Ok(ExhaustiveReport {
        max_work,
        all_reliable,
        leaves,
        nodes: leaves,
    })
}

/// Estimate the tail of the leader-crash hypergeometric: draw `crashed`
/// machines uniformly from `total` containing `leaders` marked ones, and
/// return the fraction of samples in which at least `threshold` marked
/// machines fell.
pub fn mc_hypergeometric_tail(
    total: u32,
    leaders: u32,
    crashed: u32,
    threshold: u32,
    samples: u64,
    seed: u64,
) -> Result<f64, OracleError> {
    if leaders > total || crashed > total {
        return Err(OracleError::InvalidParams(format!(
            "leaders {leaders} and crashed {crashed} must not exceed total {total}"
        )));
    }
    if samples == 0 {
        return Err(OracleError::EmptyInput("zero samples"));
    }
    // Machines 0..leaders are the marked ones; a partial Fisher-Yates draws
    // the crash set.
    let mut pool: Vec<u32> = (0..total).collect();
    let mut hits = 0u64;
    for trial in 0..samples {
        let mut rng = derive_rng(seed, 0x9c0f, trial);
        for (i, v) in pool.iter_mut().enumerate() {
            *v = i as u32;
        }
        let mut marked = 0u32;
        for i in 0..crashed as usize {
            let j = rng.gen_range(i..total as usize);
            pool.swap(i, j);
            if pool[i] < leaders {
                marked += 1;
            }
        }
        if marked >= threshold {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples as f64)
}

/// Success rate of the isolated election over `operational` machines.
///
/// The election's analysis applies when the operational count sits in the
/// band `(coin/2, coin]` around the toss denominator `coin = ceil(m/2^i)`;
/// other inputs are rejected.
pub fn mc_mix_and_test(
    scale: u32,
    total_tasks: u64,
    machine_count: u32,
    operational: u32,
    trials: u64,
    seed: u64,
) -> Result<f64, OracleError> {
    let coin = crate::rng::ceil_div_pow2(machine_count, scale);
    if !(operational <= coin && 2 * operational > coin) {
        return Err(OracleError::InvalidParams(format!(
            "operational count {operational} outside the ({}, {coin}] band",
            coin / 2
        )));
    }
    if operational == 0 || trials == 0 {
        return Err(OracleError::EmptyInput("zero machines or trials"));
    }
    let mut successes = 0u64;
    for trial in 0..trials {
        let trial_seed: u64 = derive_rng(seed, 0x3a7e, trial).gen();
        let (ok, _) = algorithms::run_mix_and_test(
            scale,
            total_tasks,
            machine_count,
            operational,
            trial_seed,
        )?;
        if ok {
            successes += 1;
        }
    }
    Ok(successes as f64 / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::lone_broadcast_probability;

    fn tiny_env(m: u32, lengths: &[u32], algorithm: AlgorithmKind, f: u32) -> SimEnv {
        SimEnv::new(
            m,
            JobSet::from_lengths(lengths).unwrap(),
            algorithm,
            AdversarySpec::new(f, AdversaryKind::None),
            1,
        )
        .unwrap()
    }

    #[test]
    fn bound_eval_reference_values() {
        let p = BoundParams {
            machines: 4,
            jobs: 16,
            total_len: 16,
            max_len: 1,
            faults: 2,
            constant: 1.0,
        };
        assert_eq!(bound_eval(BoundKind::Preemptive, &p).unwrap(), 44.0);

        let p = BoundParams {
            machines: 4,
            jobs: 4,
            total_len: 16,
            max_len: 4,
            faults: 2,
            constant: 1.0,
        };
        assert_eq!(bound_eval(BoundKind::NonPreemptive, &p).unwrap(), 80.0);

        let p = BoundParams {
            machines: 4,
            jobs: 16,
            total_len: 16,
            max_len: 1,
            faults: 0,
            constant: 1.0,
        };
        assert_eq!(bound_eval(BoundKind::Randomized, &p).unwrap(), 36.0);
    }

    #[test]
    fn bound_eval_rejects_empty_nonpreemptive() {
        let p = BoundParams {
            machines: 4,
            jobs: 0,
            total_len: 0,
            max_len: 0,
            faults: 0,
            constant: 1.0,
        };
        assert!(bound_eval(BoundKind::NonPreemptive, &p).is_err());
    }

    #[test]
    fn bound_eval_monotone_in_each_parameter() {
        let base = BoundParams {
            machines: 8,
            jobs: 16,
            total_len: 64,
            max_len: 8,
            faults: 4,
            constant: 1.0,
        };
        for kind in [
            BoundKind::Preemptive,
            BoundKind::NonPreemptive,
            BoundKind::Randomized,
        ] {
            let v = bound_eval(kind, &base).unwrap();
            let mut bigger = base;
            bigger.machines += 1;
            assert!(bound_eval(kind, &bigger).unwrap() >= v, "{kind:?} machines");
            let mut bigger = base;
            bigger.total_len += 16;
            assert!(
                bound_eval(kind, &bigger).unwrap() >= v,
                "{kind:?} total_len"
            );
            let mut bigger = base;
            bigger.max_len += 1;
            assert!(bound_eval(kind, &bigger).unwrap() >= v, "{kind:?} max_len");
            let mut bigger = base;
            bigger.faults += 1;
            assert!(bound_eval(kind, &bigger).unwrap() >= v, "{kind:?} faults");
        }
    }

    #[test]
    fn fit_constant_zero_when_work_is_l() {
        let p = BoundParams {
            machines: 4,
            jobs: 4,
            total_len: 16,
            max_len: 4,
            faults: 0,
            constant: 1.0,
        };
        assert_eq!(
            fit_constant(&[(16, p)], BoundKind::Preemptive).unwrap(),
            0.0
        );
        assert!(fit_constant(&[], BoundKind::Preemptive).is_err());
    }

    #[test]
    fn fit_constant_is_scale_free() {
        // Runs whose overhead ratio is identical fit the same constant.
        let p1 = BoundParams {
            machines: 4,
            jobs: 4,
            total_len: 16,
            max_len: 1,
            faults: 0,
            constant: 1.0,
        };
        let o1 = bound_overhead(BoundKind::Preemptive, &p1).unwrap();
        let p2 = BoundParams {
            machines: 8,
            jobs: 8,
            total_len: 64,
            max_len: 1,
            faults: 0,
            constant: 1.0,
        };
        let o2 = bound_overhead(BoundKind::Preemptive, &p2).unwrap();
        let runs = [(16 + (2.0 * o1) as u64, p1), (64 + (2.0 * o2) as u64, p2)];
        let c = fit_constant(&runs, BoundKind::Preemptive).unwrap();
        assert!((c - 2.0).abs() < 0.01, "got {c}");
    }

    #[test]
    fn fact31_reference_values() {
        let js = JobSet::from_lengths(&[1, 1, 1, 5]).unwrap();
        assert!(fact31_check(&js));
        let js = JobSet::from_lengths(&[3, 3, 3]).unwrap();
        assert!(fact31_check(&js));
    }

    #[test]
    fn exhaustive_no_budget_matches_single_run() {
        let env = tiny_env(2, &[1, 1], AlgorithmKind::ScaTri, 0);
        let report = exhaustive_worst_case(&env, &ExhaustiveOptions::default()).unwrap();
        assert_eq!(report.leaves, 1);
        let trace = algorithms::run(&env).unwrap();
        assert_eq!(report.max_work, total_work(&trace).unwrap());
        assert!(report.all_reliable);
    }

    #[test]
    fn exhaustive_scatri_survives_one_crash() {
        let env = tiny_env(2, &[1, 1], AlgorithmKind::ScaTri, 1);
        let report = exhaustive_worst_case(&env, &ExhaustiveOptions::default()).unwrap();
        assert!(report.all_reliable);
        assert!(report.leaves > 1);
    }

    #[test]
    fn exhaustive_deftri_worst_case_dominates_failure_free() {
        let env = tiny_env(2, &[2, 2], AlgorithmKind::DefTri, 1);
        let report = exhaustive_worst_case(&env, &ExhaustiveOptions::default()).unwrap();
        assert!(report.all_reliable);
        let free =
            total_work(&algorithms::run(&tiny_env(2, &[2, 2], AlgorithmKind::DefTri, 0)).unwrap())
                .unwrap();
        assert!(report.max_work >= free);
    }

    #[test]
    fn sampled_adversaries_never_beat_the_exhaustive_worst_case() {
        // Randomly sampled compliant adversaries are a subset of the
        // enumerated decision trees.
        let env = tiny_env(3, &[2, 1, 1], AlgorithmKind::ScaTri, 2);
        let cap = exhaustive_worst_case(&env, &ExhaustiveOptions::default()).unwrap().max_work;
        for seed in 0..30u64 {
            let mut sampled = env.clone();
            sampled.adversary =
                AdversarySpec::new(2, AdversaryKind::Random { p: 0.3, seed });
            let work = total_work(&algorithms::run(&sampled).unwrap()).unwrap();
            assert!(work <= cap, "seed {seed}: sampled {work} > exhaustive {cap}");
        }
        let mut silenced = env.clone();
        silenced.adversary = AdversarySpec::new(2, AdversaryKind::Silencer);
        let work = total_work(&algorithms::run(&silenced).unwrap()).unwrap();
        assert!(work <= cap, "silencer {work} > exhaustive {cap}");
    }

    #[test]
    fn exhaustive_rejects_randomized() {
        let env = tiny_env(2, &[1], AlgorithmKind::RanScaTri, 0);
        assert!(matches!(
            exhaustive_worst_case(&env, &ExhaustiveOptions::default()),
            Err(OracleError::RandomizedAlgorithm)
        ));
    }

    #[test]
    fn exhaustive_node_cap_errors() {
        let env = tiny_env(3, &[1, 1, 1, 1, 1], AlgorithmKind::ScaTri, 2);
        let opts = ExhaustiveOptions {
            node_cap: 10,
            memoize: false,
        };
        assert!(matches!(
            exhaustive_worst_case(&env, &opts),
            Err(OracleError::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn memoized_search_agrees_with_plain() {
        for lengths in [&[1u32, 1][..], &[2, 1][..], &[3][..]] {
            for algo in [AlgorithmKind::ScaTri, AlgorithmKind::DefTri] {
                for f in 0..=1 {
                    let env = tiny_env(2, lengths, algo, f);
                    let plain = exhaustive_worst_case(
                        &env,
                        &ExhaustiveOptions {
                            memoize: false,
                            ..Default::default()
                        },
                    )
                    .unwrap();
                    let memo = exhaustive_worst_case(
                        &env,
                        &ExhaustiveOptions {
                            memoize: true,
                            ..Default::default()
                        },
                    )
                    .unwrap();
                    assert_eq!(plain.max_work, memo.max_work, "{lengths:?} {algo:?} f={f}");
                    assert_eq!(plain.all_reliable, memo.all_reliable);
                }
            }
        }
    }

    #[test]
    fn hypergeometric_trivial_cases() {
        // Impossible event: threshold above the marked count.
        let p = mc_hypergeometric_tail(16, 4, 8, 5, 2000, 1).unwrap();
        assert_eq!(p, 0.0);
        // Everything crashes: every marked machine falls.
        let p = mc_hypergeometric_tail(16, 4, 16, 4, 2000, 1).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn estimator_converges_with_more_samples() {
        // Doubling samples moves the estimate by at most 3 binomial standard
        // errors (seeded regression; the parameters put p well inside (0,1)).
        let p1 = mc_hypergeometric_tail(100, 30, 50, 18, 20_000, 77).unwrap();
        let p2 = mc_hypergeometric_tail(100, 30, 50, 18, 40_000, 77).unwrap();
        let se = (p2 * (1.0 - p2) / 20_000.0).sqrt();
        assert!((p1 - p2).abs() <= 3.0 * se, "p1={p1} p2={p2} se={se}");
    }

    #[test]
    fn election_estimator_converges_with_more_trials() {
        // Same seeded regression for the election-rate estimator, tuned to a
        // mid-range success probability (operational count at the low edge
        // of the band).
        let p1 = mc_mix_and_test(0, 625, 64, 33, 100, 5).unwrap();
        let p2 = mc_mix_and_test(0, 625, 64, 33, 200, 5).unwrap();
        assert!(p1 > 0.0 && p1 < 1.0, "want a mid-range rate, got {p1}");
        let se = (p2 * (1.0 - p2) / 100.0).sqrt();
        assert!((p1 - p2).abs() <= 3.0 * se, "p1={p1} p2={p2} se={se}");
    }

    #[test]
    fn election_band_check() {
        // The band is (coin/2, coin] around coin = ceil(m/2^i).
        assert!(mc_mix_and_test(0, 16, 64, 64, 1, 1).is_ok());
        assert!(mc_mix_and_test(0, 16, 64, 32, 1, 1).is_err());
        assert!(mc_mix_and_test(1, 16, 64, 20, 1, 1).is_ok()); // coin 32, band (16,32]
        assert!(mc_mix_and_test(1, 16, 64, 16, 1, 1).is_err());
    }

    #[test]
    fn lone_machine_election_rate_is_zero() {
        let rate = mc_mix_and_test(2, 4, 4, 1, 50, 3).unwrap();
        assert_eq!(rate, 0.0);
    }

    #[test]
    fn per_round_heard_probability_bounds() {
        // x machines tossing at 1/x: at least 1/e.
        for x in 1..=4096u32 {
            assert!(
                lone_broadcast_probability(x, x) >= 1.0 / std::f64::consts::E,
                "x={x}"
            );
        }
        // Anywhere in the (x/2, x] band: at least 1/(2 sqrt(e)).
        let floor = 1.0 / (2.0 * std::f64::consts::E.sqrt());
        for x in 2..=512u32 {
            for m in (x / 2 + 1)..=x {
                assert!(lone_broadcast_probability(m, x) >= floor, "m={m} x={x}");
            }
        }
    }
}
