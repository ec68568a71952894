//! Execution traces: the round-by-round record of a run and the verdicts
//! derived from it (work, reliability).
//!
//! The trace is the source of truth. Work and reliability are computed from
//! recorded events only, never from algorithm-internal state, so they double
//! as an independent check on the schedulers.
//!
//! Round numbering: rounds are 1-based. A machine that halts at the end of
//! round `r` has terminal `Halted(r)` and contributed `r` units of work.
//! A machine crashed during round `r` has terminal `Crashed(r)` and
//! contributed `r - 1` units: its step in the crash round is destroyed.
//! `Halted(0)` / `Crashed(0)` mean the machine never executed a round.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::channel::{ChannelOutcome, Payload, TransmissionIntent};
use crate::jobs::{JobId, JobSet, MachineId};
use crate::sim::ExecMode;

/// Terminal state of one machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Terminal {
    /// Halted voluntarily at the end of the given round (final; no restarts).
    Halted(u64),
    /// Crashed by the adversary during the given round.
    Crashed(u64),
}

/// Everything that happened in one round.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RoundRecord {
    pub round: u64,
    /// Intents as computed by the machines, before crash suppression,
    /// ascending by sender.
    pub intents: Vec<TransmissionIntent>,
    /// Crashes applied this round, ascending.
    pub crashes: Vec<MachineId>,
    pub outcome: ChannelOutcome,
    /// Machines that halted at the end of this round, ascending.
    pub halts: Vec<MachineId>,
}

/// Complete record of a simulation run.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExecutionTrace {
    pub machine_count: u32,
    /// Machines crashed before round 1 (scheduled at round 0), ascending.
    pub initial_crashes: Vec<MachineId>,
    /// Machines that halted before round 1, ascending.
    pub initial_halts: Vec<MachineId>,
    pub rounds: Vec<RoundRecord>,
    /// Terminal state per machine; machines still running are absent.
    pub terminal: BTreeMap<MachineId, Terminal>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("trace incomplete: machine {0} has no terminal state")]
    Incomplete(MachineId),
}

impl ExecutionTrace {
    pub fn new(machine_count: u32) -> Self {
        ExecutionTrace {
            machine_count,
            initial_crashes: Vec::new(),
            initial_halts: Vec::new(),
            rounds: Vec::new(),
            terminal: BTreeMap::new(),
        }
    }

    pub fn machines(&self) -> impl Iterator<Item = MachineId> {
        (1..=self.machine_count).map(MachineId)
    }

    /// All machines have reached a terminal state.
    pub fn is_complete(&self) -> bool {
        self.terminal.len() == self.machine_count as usize
    }

    /// Total rounds elapsed.
    pub fn round_count(&self) -> u64 {
        self.rounds.len() as u64
    }

    /// Number of crashes applied over the whole run.
    pub fn crash_count(&self) -> u32 {
        self.terminal
            .values()
            .filter(|t| matches!(t, Terminal::Crashed(_)))
            .count() as u32
    }

    /// Line-delimited export: `round,event_kind,machine,detail` with
    /// `event_kind` one of `intent|crash|deliver|silence|halt`. Stable across
    /// runs with an identical environment.
    pub fn export_lines(&self) -> String {
        let mut out = String::new();
        for &m in &self.initial_crashes {
            let _ = writeln!(out, "0,crash,{m},");
        }
        for &m in &self.initial_halts {
            let _ = writeln!(out, "0,halt,{m},");
        }
        for rec in &self.rounds {
            let r = rec.round;
            for intent in &rec.intents {
                let _ = writeln!(
                    out,
                    "{r},intent,{},{}",
                    intent.sender,
                    intent.payload.describe()
                );
            }
            for &m in &rec.crashes {
                let _ = writeln!(out, "{r},crash,{m},");
            }
            match &rec.outcome {
                ChannelOutcome::Silence => {
                    let _ = writeln!(out, "{r},silence,-,");
                }
                ChannelOutcome::Delivered { sender, payload } => {
                    let _ = writeln!(out, "{r},deliver,{sender},{}", payload.describe());
                }
            }
            for &m in &rec.halts {
                let _ = writeln!(out, "{r},halt,{m},");
            }
        }
        out
    }
}

/// Work contributed by one terminal machine.
fn machine_work(t: Terminal) -> u64 {
    match t {
        Terminal::Halted(r) => r,
        Terminal::Crashed(r) => r.saturating_sub(1),
    }
}

/// Total work of a complete trace: the sum over machines of rounds survived
/// unhalted, under the crash-round-excluded convention.
pub fn total_work(trace: &ExecutionTrace) -> Result<u64, TraceError> {
    for m in trace.machines() {
        if !trace.terminal.contains_key(&m) {
            return Err(TraceError::Incomplete(m));
        }
    }
    Ok(trace.terminal.values().map(|&t| machine_work(t)).sum())
}

/// Recount work from the per-round ledger: one credit per (machine, round)
/// where the machine was running at round start and not crashed during the
/// round. Used to cross-check [`total_work`].
pub fn work_from_ledger(trace: &ExecutionTrace) -> u64 {
    let mut alive: BTreeSet<MachineId> = trace.machines().collect();
    for &m in &trace.initial_crashes {
        alive.remove(&m);
    }
    for &m in &trace.initial_halts {
        alive.remove(&m);
    }
    let mut credits = 0u64;
    for rec in &trace.rounds {
        credits += alive.iter().filter(|m| !rec.crashes.contains(m)).count() as u64;
        for m in rec.crashes.iter().chain(rec.halts.iter()) {
            alive.remove(m);
        }
    }
    credits
}

/// The reliability verdict for one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReliabilityVerdict {
    pub reliable: bool,
    pub unperformed_jobs: BTreeSet<JobId>,
    pub non_halting_machines: BTreeSet<MachineId>,
}

/// Check the two reliability conditions against a trace.
///
/// A job counts as performed iff its completion was announced on the channel:
///
/// - preemptive: every task of its chain appears in delivered `TaskConfirm`
///   payloads, in chain order across the whole run (out-of-order confirmations
///   do not count);
/// - non-preemptive: the job id appears in a delivered `JobConfirm` payload,
///   i.e. some machine completed the whole job and confirmed it before any
///   crash it may suffer.
///
/// Every machine that did not crash must have halted.
pub fn verify_reliability(
    trace: &ExecutionTrace,
    jobs: &JobSet,
    mode: ExecMode,
) -> ReliabilityVerdict {
    let mut unperformed: BTreeSet<JobId> = jobs.jobs().iter().map(|j| j.id).collect();
    match mode {
        ExecMode::Preemptive => {
            // Next confirmable task index per job.
            let mut next: BTreeMap<JobId, u32> = jobs.jobs().iter().map(|j| (j.id, 1)).collect();
            for rec in &trace.rounds {
                if let ChannelOutcome::Delivered {
                    payload: Payload::TaskConfirm(tasks),
                    ..
                } = &rec.outcome
                {
                    for t in tasks {
                        if let Some(n) = next.get_mut(&t.job) {
                            if t.index == *n {
                                *n += 1;
                            }
                        }
                    }
                }
            }
            for job in jobs.jobs() {
                if next[&job.id] > job.length {
                    unperformed.remove(&job.id);
                }
            }
        }
        ExecMode::NonPreemptive => {
            for rec in &trace.rounds {
                if let ChannelOutcome::Delivered {
                    payload: Payload::JobConfirm(ids),
                    ..
                } = &rec.outcome
                {
                    for id in ids {
                        unperformed.remove(id);
                    }
                }
            }
        }
    }

    let non_halting: BTreeSet<MachineId> = trace
        .machines()
        .filter(|m| {
            !matches!(
                trace.terminal.get(m),
                Some(Terminal::Halted(_) | Terminal::Crashed(_))
            )
        })
        .collect();

    ReliabilityVerdict {
        reliable: unperformed.is_empty() && non_halting.is_empty(),
        unperformed_jobs: unperformed,
        non_halting_machines: non_halting,
    }
}
