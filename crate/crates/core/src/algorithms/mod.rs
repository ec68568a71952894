//! The schedulers, as replicated per-machine programs over the engine.

pub mod random;
pub mod triangle;

pub use random::{mix_and_test_rounds, ConfirmWork, MixAndTest, RanScaTri};
pub use triangle::TriangleSched;

use rand_chacha::ChaCha8Rng;

use crate::channel::{ChannelOutcome, Payload};
use crate::jobs::{JobSet, MachineId};
use crate::sim::{AlgorithmKind, ConfigError, ExecMode, Program, SimEnv, SimError, Simulation};
use crate::trace::ExecutionTrace;
use crate::view::LocalView;

/// A machine running whichever scheduler the environment selects.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AlgoMachine {
    Tri(TriangleSched),
    Rst(Box<RanScaTri>),
}

impl Program for AlgoMachine {
    fn wants_halt(&self) -> bool {
        match self {
            AlgoMachine::Tri(p) => p.wants_halt(),
            AlgoMachine::Rst(p) => p.wants_halt(),
        }
    }
    fn intent(&self, round: u64, rng: &mut ChaCha8Rng) -> Option<Payload> {
        match self {
            AlgoMachine::Tri(p) => p.intent(round, rng),
            AlgoMachine::Rst(p) => p.intent(round, rng),
        }
    }
    fn absorb(&mut self, round: u64, outcome: &ChannelOutcome) -> Result<(), SimError> {
        match self {
            AlgoMachine::Tri(p) => p.absorb(round, outcome),
            AlgoMachine::Rst(p) => p.absorb(round, outcome),
        }
    }
    fn view(&self) -> Option<&LocalView> {
        match self {
            AlgoMachine::Tri(p) => p.view(),
            AlgoMachine::Rst(p) => p.view(),
        }
    }
}

/// Build the engine state for an environment without running it.
pub fn new_simulation(env: &SimEnv) -> Result<Simulation<AlgoMachine>, ConfigError> {
    env.validate()?;
    let programs: Vec<AlgoMachine> = (1..=env.machine_count)
        .map(|k| {
            let me = MachineId(k);
            match env.algorithm {
                AlgorithmKind::ScaTri => AlgoMachine::Tri(TriangleSched::new(
                    me,
                    env.machine_count,
                    &env.jobs,
                    ExecMode::Preemptive,
                )),
                AlgorithmKind::DefTri => AlgoMachine::Tri(TriangleSched::new(
                    me,
                    env.machine_count,
                    &env.jobs,
                    ExecMode::NonPreemptive,
                )),
                AlgorithmKind::RanScaTri => {
                    AlgoMachine::Rst(Box::new(RanScaTri::new(me, env.machine_count, &env.jobs)))
                }
            }
        })
        .collect();
    Ok(Simulation::new(
        env.seed,
        env.round_limit,
        env.adversary.budget,
        programs,
        &env.adversary.initial_crashes(),
    ))
}

/// Run an environment to completion.
pub fn run(env: &SimEnv) -> Result<ExecutionTrace, SimError> {
    let mut sim = new_simulation(env).map_err(|e| SimError::ProtocolViolation {
        round: 0,
        what: e.to_string(),
    })?;
    let mut adv = env.adversary.build();
    sim.run(&mut adv)?;
    Ok(sim.into_trace())
}

/// Run an environment, asserting after every round that all running machines
/// hold equal local views (all information flows through the one channel).
pub fn run_with_view_check(env: &SimEnv) -> Result<ExecutionTrace, SimError> {
    let mut sim = new_simulation(env).map_err(|e| SimError::ProtocolViolation {
        round: 0,
        what: e.to_string(),
    })?;
    let mut adv = env.adversary.build();
    while !sim.is_complete() {
        sim.step(&mut adv)?;
        let views = sim.running_views();
        if let Some(((first_m, first), rest)) = views.split_first() {
            for (m, v) in rest {
                if *v != *first {
                    return Err(SimError::ProtocolViolation {
                        round: sim.rounds_done(),
                        what: format!("views of machines {first_m} and {m} diverged"),
                    });
                }
            }
        }
    }
    Ok(sim.into_trace())
}

/// One isolated election over `operational` machines (ids `1..=operational`),
/// with the toss denominator derived from `machine_count` and `scale`.
/// Returns the election verdict plus the trace.
pub fn run_mix_and_test(
    scale: u32,
    total_tasks: u64,
    machine_count: u32,
    operational: u32,
    seed: u64,
) -> Result<(bool, ExecutionTrace), SimError> {
    let sqrt_l = crate::rng::isqrt_ceil(total_tasks);
    let probes: Vec<random::MatProbe> = (1..=operational)
        .map(|k| random::MatProbe::new(MachineId(k), operational, machine_count, scale, sqrt_l))
        .collect();
    let rounds = mix_and_test_rounds(sqrt_l, crate::rng::ceil_log2(machine_count));
    let mut sim = Simulation::new(seed, u64::from(rounds) + 1, 0, probes, &[]);
    let mut adv = crate::adversary::AdversarySpec::none().build();
    sim.run(&mut adv)?;
    let trace = sim.into_trace();
    let heard = trace
        .rounds
        .iter()
        .filter(|r| matches!(r.outcome, ChannelOutcome::Delivered { .. }))
        .count() as u32;
    Ok((heard >= sqrt_l, trace))
}

/// One isolated work-confirmation run: `participants` machines (ids
/// `1..=participants`) each hold all of `jobs` performed locally and loop
/// until a broadcast is heard. Returns the rounds used plus the trace.
pub fn run_confirm_work(
    machine_count: u32,
    participants: u32,
    jobs: &JobSet,
    seed: u64,
    round_limit: u64,
) -> Result<(u64, ExecutionTrace), SimError> {
    let probes: Vec<random::ConfirmProbe> = (1..=participants)
        .map(|k| random::ConfirmProbe::new(MachineId(k), participants, machine_count, jobs))
        .collect();
    let mut sim = Simulation::new(seed, round_limit, 0, probes, &[]);
    let mut adv = crate::adversary::AdversarySpec::none().build();
    sim.run(&mut adv)?;
    let trace = sim.into_trace();
    Ok((trace.round_count(), trace))
}

/// Probability that exactly one of `contenders` machines tossing at
/// `1/denominator` is heard in a round.
pub fn lone_broadcast_probability(contenders: u32, denominator: u32) -> f64 {
    let p = 1.0 / f64::from(denominator);
    f64::from(contenders) * p * (1.0 - p).powi(contenders as i32 - 1)
}
