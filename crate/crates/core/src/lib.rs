//! Round-synchronous simulation of crash-prone machines performing jobs over a
//! shared broadcast channel without collision detection.
//!
//! A message is heard by everyone iff exactly one machine transmits in a round;
//! two or more simultaneous transmissions are indistinguishable from silence.
//! Machines are identical, start together, and may be crashed by an adversary
//! with a bounded number of failures. The cost measure is *work*: every
//! operational, unhalted machine accrues one unit per round, idle or not.
//!
//! The crate provides:
//!
//! - a deterministic, seedable execution engine ([`sim`]) with full traces,
//! - triangle-shaped epoch packing and execution ([`tapebb`]),
//! - three schedulers ([`algorithms`]): `scatri` (preemptive), `deftri`
//!   (non-preemptive) and `ranscatri` (randomized, preemptive),
//! - crash adversaries ([`adversary`]): fixed schedules and online strategies,
//! - verification oracles ([`oracle`]): exhaustive adversary search on tiny
//!   instances, Monte Carlo tail checks, work-bound evaluation and fitting,
//! - an experiment harness ([`harness`]): job generators, scenario configs,
//!   CSV sweeps.

pub mod adversary;
pub mod algorithms;
pub mod channel;
pub mod harness;
pub mod jobs;
pub mod oracle;
pub mod rng;
pub mod sim;
pub mod tapebb;
pub mod trace;
pub mod view;

pub use channel::{resolve_channel, ChannelOutcome, Payload, TransmissionIntent};
pub use jobs::{JobId, JobSet, JobSpec, MachineId, TaskRef};
pub use sim::{AlgorithmKind, ExecMode, SimEnv, SimError};
pub use trace::{total_work, verify_reliability, ExecutionTrace, ReliabilityVerdict, Terminal};
