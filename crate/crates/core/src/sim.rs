//! The round-synchronous execution engine.
//!
//! One round proceeds in a fixed order:
//!
//! 1. every running machine computes its transmission intent (possibly none);
//! 2. the adversary observes the full history plus this round's intents and
//!    picks crashes within its remaining budget;
//! 3. intents of crashed machines are suppressed;
//! 4. the channel resolves the surviving intents;
//! 5. the outcome is delivered to all running machines;
//! 6. one unit of work accrues to every machine that was running at the start
//!    of the round and not crashed during it;
//! 7. voluntary halts are applied at the round boundary.
//!
//! Local computation between rounds consumes no time; only rounds advance the
//! clock. Per-machine randomness derives from `(seed, machine id, round)`, so
//! a run is a pure function of its environment.

use std::collections::BTreeSet;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adversary::{AdversarySpec, AdversaryState, Observation};
use crate::channel::{resolve_channel, ChannelOutcome, Payload, TransmissionIntent};
use crate::jobs::{JobSet, MachineId};
use crate::rng::derive_rng;
use crate::trace::{ExecutionTrace, RoundRecord, Terminal};
use crate::view::LocalView;

/// Which scheduler drives the machines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlgorithmKind {
    ScaTri,
    DefTri,
    RanScaTri,
}

impl AlgorithmKind {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmKind::ScaTri => "scatri",
            AlgorithmKind::DefTri => "deftri",
            AlgorithmKind::RanScaTri => "ranscatri",
        }
    }

    /// The execution mode this algorithm requires.
    pub fn natural_mode(&self) -> ExecMode {
        match self {
            AlgorithmKind::DefTri => ExecMode::NonPreemptive,
            _ => ExecMode::Preemptive,
        }
    }
}

/// Whether jobs may be split across attempts and machines at task
/// granularity, or must complete in one uninterrupted attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecMode {
    Preemptive,
    NonPreemptive,
}

impl ExecMode {
    pub fn name(&self) -> &'static str {
        match self {
            ExecMode::Preemptive => "preemptive",
            ExecMode::NonPreemptive => "nonpreemptive",
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("round limit {limit} exceeded at round {round}: likely non-termination")]
    RoundLimitExceeded { limit: u64, round: u64 },
    #[error("protocol violation at round {round}: {what}")]
    ProtocolViolation { round: u64, what: String },
    #[error("adversary violation at round {round}: {what}")]
    AdversaryViolation { round: u64, what: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("machine count must be at least 1")]
    NoMachines,
    #[error("adversary budget {f} must satisfy 0 <= f <= m-1 = {max}")]
    BudgetTooLarge { f: u32, max: u32 },
    #[error("{algorithm} requires {required} mode, got {given}")]
    ModeMismatch {
        algorithm: &'static str,
        required: &'static str,
        given: &'static str,
    },
    #[error("ranscatri requires a non-adaptive adversary (none or a fixed schedule)")]
    AdaptiveAdversary,
    #[error("invalid crash schedule: {0}")]
    BadSchedule(String),
    #[error("invalid jobs: {0}")]
    BadJobs(String),
    #[error("{0}")]
    Invalid(String),
}

/// Default safety cutoff: generous for every scheduler; breaching it signals
/// a non-termination bug rather than an adversary victory.
pub fn default_round_limit(machine_count: u32, jobs: &JobSet) -> u64 {
    let m = u64::from(machine_count);
    64 * (jobs.total_len() + m * u64::from(jobs.max_len()) + m + 1)
}

/// A complete simulation environment; identical environments produce
/// bit-identical traces.
#[derive(Debug, Clone)]
pub struct SimEnv {
    pub machine_count: u32,
    pub jobs: JobSet,
    pub algorithm: AlgorithmKind,
    pub mode: ExecMode,
    pub adversary: AdversarySpec,
    pub seed: u64,
    pub round_limit: u64,
}

impl SimEnv {
    pub fn new(
        machine_count: u32,
        jobs: JobSet,
        algorithm: AlgorithmKind,
        adversary: AdversarySpec,
        seed: u64,
    ) -> Result<Self, ConfigError> {
        let round_limit = default_round_limit(machine_count, &jobs);
        let env = SimEnv {
            machine_count,
            jobs,
            algorithm,
            mode: algorithm.natural_mode(),
            adversary,
            seed,
            round_limit,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn with_round_limit(mut self, limit: u64) -> Self {
        self.round_limit = limit;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.machine_count == 0 {
            return Err(ConfigError::NoMachines);
        }
        if self.adversary.budget > self.machine_count - 1 {
            return Err(ConfigError::BudgetTooLarge {
                f: self.adversary.budget,
                max: self.machine_count - 1,
            });
        }
        let required = self.algorithm.natural_mode();
        if self.mode != required {
            return Err(ConfigError::ModeMismatch {
                algorithm: self.algorithm.name(),
                required: required.name(),
                given: self.mode.name(),
            });
        }
        if self.algorithm == AlgorithmKind::RanScaTri && self.adversary.kind.is_adaptive() {
            return Err(ConfigError::AdaptiveAdversary);
        }
        self.adversary.validate(self.machine_count)?;
        Ok(())
    }
}

/// The per-machine replicated state machine driven by the engine.
///
/// `intent` is a pure function of the current state plus the round's derived
/// randomness; all state transitions happen in `absorb`, which is called
/// exactly once per round for every machine that survived it.
pub trait Program: Clone {
    /// True when the machine halts at the current round boundary.
    fn wants_halt(&self) -> bool;
    /// The transmission attempt for the upcoming round, if any.
    fn intent(&self, round: u64, rng: &mut ChaCha8Rng) -> Option<Payload>;
    /// Deliver the channel outcome of `round`.
    fn absorb(&mut self, round: u64, outcome: &ChannelOutcome) -> Result<(), SimError>;
    /// The replicated view, when the program keeps one (used by invariant
    /// checks; all running machines must agree at round boundaries).
    fn view(&self) -> Option<&LocalView> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Ongoing,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MachineStatus {
    Running,
    Done,
}

/// Engine state for one run. Cloneable so verification oracles can fork the
/// execution at decision points.
#[derive(Debug, Clone)]
pub struct Simulation<P: Program> {
    seed: u64,
    round_limit: u64,
    rounds_done: u64,
    budget_left: u32,
    programs: Vec<P>,
    status: Vec<MachineStatus>,
    trace: ExecutionTrace,
}

impl<P: Program> Simulation<P> {
    /// Build a simulation over `programs` (machine `k+1` runs `programs[k]`).
    /// `initial_crashes` are applied before round 1, then machines already
    /// satisfied halt at round 0.
    pub fn new(
        seed: u64,
        round_limit: u64,
        budget: u32,
        programs: Vec<P>,
        initial_crashes: &[MachineId],
    ) -> Self {
        let count = programs.len() as u32;
        let mut sim = Simulation {
            seed,
            round_limit,
            rounds_done: 0,
            budget_left: budget,
            status: vec![MachineStatus::Running; programs.len()],
            programs,
            trace: ExecutionTrace::new(count),
        };
        let mut crashed: Vec<MachineId> = initial_crashes.to_vec();
        crashed.sort();
        crashed.dedup();
        for m in crashed {
            if sim.is_running(m) && sim.budget_left > 0 {
                sim.set_terminal(m, Terminal::Crashed(0));
                sim.budget_left -= 1;
                sim.trace.initial_crashes.push(m);
            }
        }
        for m in sim.running_machines() {
            if sim.programs[(m.0 - 1) as usize].wants_halt() {
                sim.set_terminal(m, Terminal::Halted(0));
                sim.trace.initial_halts.push(m);
            }
        }
        sim
    }

    fn idx(m: MachineId) -> usize {
        (m.0 - 1) as usize
    }

    fn is_running(&self, m: MachineId) -> bool {
        self.status[Self::idx(m)] == MachineStatus::Running
    }

    fn set_terminal(&mut self, m: MachineId, t: Terminal) {
        self.status[Self::idx(m)] = MachineStatus::Done;
        self.trace.terminal.insert(m, t);
    }

    pub fn running_machines(&self) -> Vec<MachineId> {
        (1..=self.trace.machine_count)
            .map(MachineId)
            .filter(|&m| self.is_running(m))
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.status.iter().all(|&s| s == MachineStatus::Done)
    }

    pub fn rounds_done(&self) -> u64 {
        self.rounds_done
    }

    pub fn budget_left(&self) -> u32 {
        self.budget_left
    }

    pub fn trace(&self) -> &ExecutionTrace {
        &self.trace
    }

    pub fn into_trace(self) -> ExecutionTrace {
        self.trace
    }

    pub fn program(&self, m: MachineId) -> &P {
        &self.programs[Self::idx(m)]
    }

    /// Views of all running machines, for replicated-state checks.
    pub fn running_views(&self) -> Vec<(MachineId, &LocalView)> {
        self.running_machines()
            .into_iter()
            .filter_map(|m| self.program(m).view().map(|v| (m, v)))
            .collect()
    }

    /// Step 1 of the upcoming round: intents of all running machines,
    /// ascending by machine id.
    pub fn compute_intents(&self) -> Vec<TransmissionIntent> {
        let round = self.rounds_done + 1;
        let mut intents = Vec::new();
        for m in self.running_machines() {
            let mut rng = derive_rng(self.seed, u64::from(m.0), round);
            if let Some(payload) = self.program(m).intent(round, &mut rng) {
                intents.push(TransmissionIntent { sender: m, payload });
            }
        }
        intents
    }

    /// Steps 2-7 of the upcoming round, with the crash set already chosen.
    pub fn apply_round(
        &mut self,
        intents: Vec<TransmissionIntent>,
        crashes: &BTreeSet<MachineId>,
    ) -> Result<StepStatus, SimError> {
        let round = self.rounds_done + 1;
        if round > self.round_limit {
            return Err(SimError::RoundLimitExceeded {
                limit: self.round_limit,
                round,
            });
        }
        if crashes.len() as u32 > self.budget_left {
            return Err(SimError::AdversaryViolation {
                round,
                what: format!(
                    "{} crashes requested with budget {} left",
                    crashes.len(),
                    self.budget_left
                ),
            });
        }
        for &m in crashes {
            if !self.is_running(m) {
                return Err(SimError::AdversaryViolation {
                    round,
                    what: format!("machine {m} is not running"),
                });
            }
        }

        let survivors: Vec<TransmissionIntent> = intents
            .iter()
            .filter(|i| !crashes.contains(&i.sender))
            .cloned()
            .collect();
        for &m in crashes {
            self.set_terminal(m, Terminal::Crashed(round));
            self.budget_left -= 1;
        }

        let outcome = resolve_channel(&survivors);
        let mut halts = Vec::new();
        for m in self.running_machines() {
            self.programs[Self::idx(m)].absorb(round, &outcome)?;
        }
        for m in self.running_machines() {
            if self.program(m).wants_halt() {
                halts.push(m);
            }
        }
        for &m in &halts {
            self.set_terminal(m, Terminal::Halted(round));
        }

        self.trace.rounds.push(RoundRecord {
            round,
            intents,
            crashes: crashes.iter().copied().collect(),
            outcome,
            halts,
        });
        self.rounds_done = round;
        Ok(if self.is_complete() {
            StepStatus::Complete
        } else {
            StepStatus::Ongoing
        })
    }

    /// One full round driven by an adversary strategy.
    pub fn step<A: AdversaryState>(&mut self, adversary: &mut A) -> Result<StepStatus, SimError> {
        let intents = self.compute_intents();
        let running = self.running_machines();
        let crashes = adversary.decide(&Observation {
            round: self.rounds_done + 1,
            trace: &self.trace,
            intents: &intents,
            running: &running,
            budget_left: self.budget_left,
        });
        self.apply_round(intents, &crashes)
    }

    /// Drive to completion.
    pub fn run<A: AdversaryState>(&mut self, adversary: &mut A) -> Result<(), SimError> {
        while !self.is_complete() {
            self.step(adversary)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::AdversaryKind;
    use crate::trace::{total_work, work_from_ledger};

    /// Test-only scripted machine: optionally broadcasts a token at one
    /// round, halts after a fixed number of rounds.
    #[derive(Debug, Clone)]
    struct Scripted {
        broadcast_at: Option<u64>,
        halt_after: u64,
        rounds_seen: u64,
    }

    impl Scripted {
        fn new(broadcast_at: Option<u64>, halt_after: u64) -> Self {
            Scripted {
                broadcast_at,
                halt_after,
                rounds_seen: 0,
            }
        }
    }

    impl Program for Scripted {
        fn wants_halt(&self) -> bool {
            self.rounds_seen >= self.halt_after
        }
        fn intent(&self, round: u64, _rng: &mut ChaCha8Rng) -> Option<Payload> {
            (self.broadcast_at == Some(round)).then_some(Payload::Token)
        }
        fn absorb(&mut self, _round: u64, _outcome: &ChannelOutcome) -> Result<(), SimError> {
            self.rounds_seen += 1;
            Ok(())
        }
    }

    fn run_scripted(programs: Vec<Scripted>, budget: u32, kind: AdversaryKind) -> ExecutionTrace {
        let mut sim = Simulation::new(1, 1000, budget, programs, &[]);
        let mut adv = AdversarySpec { budget, kind }.build();
        sim.run(&mut adv).unwrap();
        sim.into_trace()
    }

    #[test]
    fn silencer_crashes_lone_broadcaster() {
        // Machine 2 is the only broadcaster in round 1; a silencer with
        // budget 1 crashes it and the channel stays silent.
        let programs = vec![
            Scripted::new(None, 2),
            Scripted::new(Some(1), 2),
            Scripted::new(None, 2),
        ];
        let trace = run_scripted(programs, 1, AdversaryKind::Silencer);
        assert_eq!(trace.rounds[0].crashes, vec![MachineId(2)]);
        assert_eq!(trace.rounds[0].outcome, ChannelOutcome::Silence);
        assert_eq!(trace.terminal[&MachineId(2)], Terminal::Crashed(1));
    }

    #[test]
    fn idle_round_credits_all_running() {
        let programs = vec![Scripted::new(None, 1), Scripted::new(None, 1)];
        let trace = run_scripted(programs, 0, AdversaryKind::None);
        assert_eq!(trace.round_count(), 1);
        assert_eq!(total_work(&trace).unwrap(), 2);
        assert_eq!(work_from_ledger(&trace), 2);
    }

    #[test]
    fn crashed_machine_earns_prior_rounds_only() {
        // 2 machines over 3 rounds; machine 1 crashed in round 2.
        // Hand-computed sum over machines of (terminal - start):
        // machine 1 contributes 1, machine 2 contributes 3.
        use crate::adversary::CrashSchedule;
        let programs = vec![Scripted::new(None, 3), Scripted::new(None, 3)];
        let schedule = CrashSchedule::new(vec![(MachineId(1), 2)]).unwrap();
        let trace = run_scripted(programs, 1, AdversaryKind::Schedule(schedule));
        assert_eq!(total_work(&trace).unwrap(), 4);
        assert_eq!(work_from_ledger(&trace), 4);
        assert_eq!(trace.terminal[&MachineId(1)], Terminal::Crashed(2));
    }

    #[test]
    fn immediate_halt_costs_nothing() {
        let programs = vec![Scripted::new(None, 0)];
        let trace = run_scripted(programs, 0, AdversaryKind::None);
        assert_eq!(trace.round_count(), 0);
        assert_eq!(trace.initial_halts, vec![MachineId(1)]);
        assert_eq!(total_work(&trace).unwrap(), 0);
    }

    #[test]
    fn round_limit_breach_aborts() {
        #[derive(Debug, Clone)]
        struct Forever;
        impl Program for Forever {
            fn wants_halt(&self) -> bool {
                false
            }
            fn intent(&self, _round: u64, _rng: &mut ChaCha8Rng) -> Option<Payload> {
                None
            }
            fn absorb(&mut self, _r: u64, _o: &ChannelOutcome) -> Result<(), SimError> {
                Ok(())
            }
        }
        let mut sim = Simulation::new(1, 5, 0, vec![Forever], &[]);
        let mut adv = AdversarySpec::none().build();
        let err = sim.run(&mut adv).unwrap_err();
        assert!(matches!(
            err,
            SimError::RoundLimitExceeded { limit: 5, round: 6 }
        ));
    }

    #[test]
    fn misbehaving_adversary_is_rejected() {
        struct Rogue;
        impl AdversaryState for Rogue {
            fn decide(&mut self, _obs: &Observation<'_>) -> BTreeSet<MachineId> {
                // Always targets machine 1, even after it crashed.
                BTreeSet::from([MachineId(1)])
            }
        }
        let programs = vec![Scripted::new(None, 5), Scripted::new(None, 5)];
        let mut sim = Simulation::new(1, 100, 2, programs, &[]);
        let mut adv = Rogue;
        sim.step(&mut adv).unwrap(); // crashes machine 1
        let err = sim.step(&mut adv).unwrap_err();
        assert!(matches!(err, SimError::AdversaryViolation { round: 2, .. }));
    }

    #[test]
    fn budget_overrun_is_rejected() {
        struct Greedy;
        impl AdversaryState for Greedy {
            fn decide(&mut self, _obs: &Observation<'_>) -> BTreeSet<MachineId> {
                BTreeSet::from([MachineId(1), MachineId(2)])
            }
        }
        let programs = vec![Scripted::new(None, 5), Scripted::new(None, 5)];
        let mut sim = Simulation::new(1, 100, 1, programs, &[]);
        let err = sim.step(&mut Greedy).unwrap_err();
        assert!(matches!(err, SimError::AdversaryViolation { round: 1, .. }));
    }
}
