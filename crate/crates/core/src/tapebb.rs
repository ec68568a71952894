//! Task-performing epochs: deterministic triangle packing and execution.
//!
//! An epoch assigns work to the first `d` machines of the list. The machine
//! of column `j` may perform up to `j * phi` task-units during rounds
//! `1..=j*phi` of the epoch and broadcasts its confirmations in the last
//! round of phase `j` (round `j * phi`). Capacities thus grow with the
//! broadcast slot and sum to `phi * d(d+1)/2` — the triangle. Every column
//! machine broadcasts at its slot even when it has nothing assigned, so
//! silence at a slot unambiguously identifies a crashed machine.
//!
//! Packing is deterministic: jobs are ordered ascending by
//! `(remaining length, id)` — the shortest first, ties to lower ids — the
//! r-th job forms the base of column r, and leftover capacity is filled by
//! sweeping columns in descending residual order. Preemptive packing
//! truncates jobs to fit (longer jobs get trimmed across epochs);
//! non-preemptive packing places whole jobs only. A job never spans two
//! columns within an epoch, which keeps each confirmed set a chain prefix.
//!
//! The long-job layout handles few-but-long jobs: one whole job per machine,
//! phase length 1, machine `k` broadcasting at the first round `>= len_k`
//! congruent to `k (mod d)` — collision-free with a deterministic slot for
//! crash detection at most `d-1` rounds after the job completes.

use std::fmt::Write as _;

use thiserror::Error;

use crate::adversary::AdversarySpec;
use crate::channel::{ChannelOutcome, Payload};
use crate::jobs::{JobId, MachineId, TaskRef};
use crate::sim::{Program, SimError, Simulation};
use crate::trace::ExecutionTrace;

/// Packing input: the outstanding chain suffix of one job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Outstanding {
    pub job: JobId,
    /// First unperformed task index, 1-based.
    pub next_task: u32,
    pub tasks_left: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlanMode {
    Preemptive,
    NonPreemptive,
    LongJob,
}

impl PlanMode {
    pub fn name(&self) -> &'static str {
        match self {
            PlanMode::Preemptive => "preemptive",
            PlanMode::NonPreemptive => "nonpreemptive",
            PlanMode::LongJob => "longjob",
        }
    }
}

/// A contiguous run of tasks of one job assigned to one column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Segment {
    pub job: JobId,
    /// First task index of the run, 1-based within the job chain.
    pub first_task: u32,
    pub tasks: u32,
}

impl Segment {
    pub fn task_refs(&self) -> impl Iterator<Item = TaskRef> + '_ {
        (0..self.tasks).map(|k| TaskRef {
            job: self.job,
            index: self.first_task + k,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Column {
    pub machine: MachineId,
    /// Round within the epoch at which this column broadcasts, 1-based.
    pub slot: u32,
    /// Maximum task-units this column may perform.
    pub capacity: u32,
    pub segments: Vec<Segment>,
}

impl Column {
    pub fn assigned_units(&self) -> u32 {
        self.segments.iter().map(|s| s.tasks).sum()
    }
}

/// One epoch's assignment of task segments (or whole jobs) to machine
/// columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TrianglePlan {
    pub mode: PlanMode,
    /// Epoch length in phases (`d`, the number of columns).
    pub epoch_len: u32,
    /// Phase length in rounds.
    pub phase_len: u32,
    /// Total rounds the epoch lasts. Epochs never end early.
    pub duration: u32,
    pub columns: Vec<Column>,
}

impl TrianglePlan {
    /// The column scheduled to broadcast in the given epoch round, if any.
    pub fn column_at_slot(&self, round_in_epoch: u32) -> Option<&Column> {
        self.columns.iter().find(|c| c.slot == round_in_epoch)
    }

    pub fn column_of(&self, machine: MachineId) -> Option<&Column> {
        self.columns.iter().find(|c| c.machine == machine)
    }

    /// Total task-units assigned across all columns.
    pub fn assigned_units(&self) -> u64 {
        self.columns
            .iter()
            .map(|c| u64::from(c.assigned_units()))
            .sum()
    }

    /// Human-readable dump, one column per line, for golden tests.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "plan mode={} d={} phi={} rounds={}",
            self.mode.name(),
            self.epoch_len,
            self.phase_len,
            self.duration
        );
        for (i, col) in self.columns.iter().enumerate() {
            let segs: Vec<String> = col
                .segments
                .iter()
                .map(|s| format!("j{}:{}-{}", s.job, s.first_task, s.first_task + s.tasks - 1))
                .collect();
            let _ = writeln!(
                out,
                "col {}: machine={} slot={} cap={} segs=[{}]",
                i + 1,
                col.machine,
                col.slot,
                col.capacity,
                segs.join(",")
            );
        }
        out
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PackError {
    #[error("epoch length must be at least 1")]
    EmptyEpoch,
    #[error("epoch length {d} exceeds available machines {machines}")]
    NotEnoughMachines { d: u32, machines: u32 },
    #[error("phase length must be at least 1")]
    ZeroPhase,
    #[error("long-job layout needs at least one job")]
    NoJobs,
}

fn sorted_by_shortest(outstanding: &[Outstanding]) -> Vec<Outstanding> {
    let mut sorted = outstanding.to_vec();
    sorted.sort_by_key(|o| (o.tasks_left, o.job));
    sorted
}

fn empty_columns(machines: &[MachineId], d: u32, phi: u32) -> Vec<Column> {
    (1..=d)
        .map(|j| Column {
            machine: machines[(j - 1) as usize],
            slot: j * phi,
            capacity: j * phi,
            segments: Vec::new(),
        })
        .collect()
}

fn check_geometry(machines: &[MachineId], d: u32, phi: u32) -> Result<(), PackError> {
    if d == 0 {
        return Err(PackError::EmptyEpoch);
    }
    if phi == 0 {
        return Err(PackError::ZeroPhase);
    }
    if d as usize > machines.len() {
        return Err(PackError::NotEnoughMachines {
            d,
            machines: machines.len() as u32,
        });
    }
    Ok(())
}

/// Index of the column with the largest residual capacity, ties to the lower
/// column index. None if every column is full.
fn best_residual(columns: &[Column]) -> Option<usize> {
    let mut best: Option<(u32, usize)> = None;
    for (i, col) in columns.iter().enumerate() {
        let residual = col.capacity - col.assigned_units();
        if residual == 0 {
            continue;
        }
        match best {
            Some((r, _)) if r >= residual => {}
            _ => best = Some((residual, i)),
        }
    }
    best.map(|(_, i)| i)
}

/// Pack chain prefixes into a triangle, trimming jobs to fit.
///
/// Base layer: the r-th shortest job goes to column r, truncated to the
/// column capacity. Sweep: while capacity and jobs remain, the column with
/// the most residual room receives the next job's remaining prefix, truncated
/// to the residual. Longer jobs end up trimmed preferentially.
pub fn pack_preemptive(
    outstanding: &[Outstanding],
    machines: &[MachineId],
    d: u32,
    phi: u32,
) -> Result<TrianglePlan, PackError> {
    check_geometry(machines, d, phi)?;
    let sorted = sorted_by_shortest(outstanding);
    let mut columns = empty_columns(machines, d, phi);

    let base = (d as usize).min(sorted.len());
    for (r, job) in sorted.iter().take(base).enumerate() {
        let take = job.tasks_left.min(columns[r].capacity);
        if take > 0 {
            columns[r].segments.push(Segment {
                job: job.job,
                first_task: job.next_task,
                tasks: take,
            });
        }
    }
    let mut queue = sorted[base..].iter();
    while let Some(i) = best_residual(&columns) {
        let Some(job) = queue.next() else { break };
        let residual = columns[i].capacity - columns[i].assigned_units();
        let take = job.tasks_left.min(residual);
        columns[i].segments.push(Segment {
            job: job.job,
            first_task: job.next_task,
            tasks: take,
        });
    }

    Ok(TrianglePlan {
        mode: PlanMode::Preemptive,
        epoch_len: d,
        phase_len: phi,
        duration: d * phi,
        columns,
    })
}

/// Pack whole jobs into a triangle; jobs fitting nowhere stay unassigned
/// for later epochs.
pub fn pack_nonpreemptive(
    outstanding: &[Outstanding],
    machines: &[MachineId],
    d: u32,
    phi: u32,
) -> Result<TrianglePlan, PackError> {
    check_geometry(machines, d, phi)?;
    let sorted = sorted_by_shortest(outstanding);
    let mut columns = empty_columns(machines, d, phi);

    // Base layer: whole job r to column r when it fits; skipped jobs join
    // the sweep queue in sorted order.
    let base = (d as usize).min(sorted.len());
    let mut queue: Vec<&Outstanding> = Vec::new();
    for (r, job) in sorted.iter().take(base).enumerate() {
        if job.tasks_left <= columns[r].capacity {
            columns[r].segments.push(Segment {
                job: job.job,
                first_task: job.next_task,
                tasks: job.tasks_left,
            });
        } else {
            queue.push(job);
        }
    }
    queue.extend(sorted[base..].iter());

    for job in queue {
        let Some(i) = best_residual(&columns) else {
            break;
        };
        let residual = columns[i].capacity - columns[i].assigned_units();
        if job.tasks_left <= residual {
            columns[i].segments.push(Segment {
                job: job.job,
                first_task: job.next_task,
                tasks: job.tasks_left,
            });
        }
        // Otherwise the job fits nowhere (no column has more room than the
        // best residual) and is deferred to a later epoch.
    }

    Ok(TrianglePlan {
        mode: PlanMode::NonPreemptive,
        epoch_len: d,
        phase_len: phi,
        duration: d * phi,
        columns,
    })
}

/// One whole job per machine for few-but-long jobs. Machine `k` performs its
/// job and broadcasts at the first round `>= len` congruent to `k (mod d)`;
/// the epoch lasts until the last scheduled broadcast.
pub fn pack_longjob(
    outstanding: &[Outstanding],
    machines: &[MachineId],
    d: u32,
) -> Result<TrianglePlan, PackError> {
    if outstanding.is_empty() {
        return Err(PackError::NoJobs);
    }
    check_geometry(machines, d, 1)?;
    let sorted = sorted_by_shortest(outstanding);
    debug_assert!(
        d as usize <= sorted.len(),
        "caller sets d = min(jobs, machines)"
    );

    let mut columns = Vec::new();
    let mut duration = 0;
    for k in 1..=d {
        let job = &sorted[(k - 1) as usize];
        let len = job.tasks_left;
        let rem = len % d;
        let target = k % d;
        let slot = len + (target + d - rem) % d;
        duration = duration.max(slot);
        columns.push(Column {
            machine: machines[(k - 1) as usize],
            slot,
            capacity: slot,
            segments: vec![Segment {
                job: job.job,
                first_task: job.next_task,
                tasks: len,
            }],
        });
    }

    Ok(TrianglePlan {
        mode: PlanMode::LongJob,
        epoch_len: d,
        phase_len: 1,
        duration,
        columns,
    })
}

/// What one epoch produced, as every surviving machine folds it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct EpochOutcome {
    /// Confirmed tasks (preemptive modes), in delivery order.
    pub confirmed_tasks: Vec<TaskRef>,
    /// Confirmed whole jobs (non-preemptive modes), in delivery order.
    pub confirmed_jobs: Vec<JobId>,
    /// Machines whose scheduled slot stayed silent.
    pub detected_crashes: Vec<MachineId>,
    /// Successful broadcasts heard during the epoch.
    pub broadcasts_heard: u32,
    pub rounds_elapsed: u32,
}

/// Per-machine execution state of one epoch. All running machines hold the
/// same plan; the deterministic slot schedule makes silences unambiguous.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EpochExec {
    plan: TrianglePlan,
    me: MachineId,
    rounds_done: u32,
    outcome: EpochOutcome,
}

impl EpochExec {
    pub fn new(plan: TrianglePlan, me: MachineId) -> Self {
        EpochExec {
            plan,
            me,
            rounds_done: 0,
            outcome: EpochOutcome::default(),
        }
    }

    pub fn plan(&self) -> &TrianglePlan {
        &self.plan
    }

    pub fn is_done(&self) -> bool {
        self.rounds_done >= self.plan.duration
    }

    /// Broadcast at my slot: everything my column holds. By the slot round
    /// the whole assignment has been performed (capacity never exceeds the
    /// slot), so the confirmation covers every assigned unit. Columns with
    /// nothing assigned still announce themselves, keeping crash detection
    /// complete.
    pub fn intent(&self) -> Option<Payload> {
        let next = self.rounds_done + 1;
        let col = self.plan.column_of(self.me)?;
        if col.slot != next {
            return None;
        }
        Some(match self.plan.mode {
            PlanMode::Preemptive => {
                Payload::TaskConfirm(col.segments.iter().flat_map(|s| s.task_refs()).collect())
            }
            PlanMode::NonPreemptive | PlanMode::LongJob => {
                Payload::JobConfirm(col.segments.iter().map(|s| s.job).collect())
            }
        })
    }

    pub fn absorb(&mut self, outcome: &ChannelOutcome) -> Result<(), String> {
        let round = self.rounds_done + 1;
        let scheduled = self.plan.column_at_slot(round);
        match outcome {
            ChannelOutcome::Silence => {
                if let Some(col) = scheduled {
                    // Deterministic schedule: silence at a slot means the
                    // scheduled machine is gone.
                    self.outcome.detected_crashes.push(col.machine);
                }
            }
            ChannelOutcome::Delivered { sender, payload } => {
                let Some(col) = scheduled else {
                    return Err(format!(
                        "unscheduled sender {sender} at epoch round {round}"
                    ));
                };
                if *sender != col.machine {
                    return Err(format!(
                        "epoch round {round}: heard {sender}, expected {}",
                        col.machine
                    ));
                }
                self.outcome.broadcasts_heard += 1;
                match payload {
                    Payload::TaskConfirm(tasks) => {
                        let assigned: Vec<TaskRef> =
                            col.segments.iter().flat_map(|s| s.task_refs()).collect();
                        for t in tasks {
                            if !assigned.contains(t) {
                                return Err(format!(
                                    "machine {sender} confirmed unassigned task {t}"
                                ));
                            }
                        }
                        self.outcome.confirmed_tasks.extend(tasks.iter().copied());
                    }
                    Payload::JobConfirm(jobs) => {
                        for j in jobs {
                            if !col.segments.iter().any(|s| s.job == *j) {
                                return Err(format!(
                                    "machine {sender} confirmed unassigned job {j}"
                                ));
                            }
                        }
                        self.outcome.confirmed_jobs.extend(jobs.iter().copied());
                    }
                    Payload::Token => {
                        return Err(format!("bare token from {sender} inside an epoch"));
                    }
                }
            }
        }
        self.rounds_done = round;
        if self.is_done() {
            self.outcome.rounds_elapsed = self.plan.duration;
        }
        Ok(())
    }

    pub fn into_outcome(self) -> EpochOutcome {
        debug_assert!(self.is_done());
        self.outcome
    }
}

/// Wrapper that runs exactly one epoch on the engine, then halts.
#[derive(Debug, Clone)]
struct OneEpoch {
    exec: EpochExec,
}

impl Program for OneEpoch {
    fn wants_halt(&self) -> bool {
        self.exec.is_done()
    }
    fn intent(&self, _round: u64, _rng: &mut rand_chacha::ChaCha8Rng) -> Option<Payload> {
        self.exec.intent()
    }
    fn absorb(&mut self, round: u64, outcome: &ChannelOutcome) -> Result<(), SimError> {
        self.exec
            .absorb(outcome)
            .map_err(|what| SimError::ProtocolViolation { round, what })
    }
}

/// Execute one epoch in isolation: every listed machine participates (those
/// without a column just listen and accrue idle work), the adversary applies,
/// and all survivors halt at the epoch boundary.
pub fn run_epoch(
    plan: &TrianglePlan,
    machines: &[MachineId],
    adversary: &AdversarySpec,
    seed: u64,
) -> Result<(EpochOutcome, ExecutionTrace), SimError> {
    assert!(
        machines.windows(2).all(|w| w[0].0 + 1 == w[1].0)
            && machines.first().map(|m| m.0) == Some(1),
        "standalone epochs run on machines 1..=m"
    );
    let programs: Vec<OneEpoch> = machines
        .iter()
        .map(|&m| OneEpoch {
            exec: EpochExec::new(plan.clone(), m),
        })
        .collect();
    let mut sim = Simulation::new(
        seed,
        u64::from(plan.duration) + 1,
        adversary.budget,
        programs,
        &adversary.initial_crashes(),
    );
    let mut adv = adversary.build();
    sim.run(&mut adv)?;

    // Replicated folds: every survivor computed the same outcome.
    let outcome = machines
        .iter()
        .find(|&&m| matches!(sim.trace().terminal.get(&m), Some(Terminal::Halted(_))))
        .map(|&m| sim.program(m).exec.clone().into_outcome())
        .unwrap_or_default();
    Ok((outcome, sim.into_trace()))
}

use crate::trace::Terminal;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{AdversaryKind, CrashSchedule};
    use crate::trace::total_work;
    use proptest::prelude::*;

    fn units(n: u32) -> Vec<Outstanding> {
        (1..=n)
            .map(|i| Outstanding {
                job: JobId(i),
                next_task: 1,
                tasks_left: 1,
            })
            .collect()
    }

    fn jobs(lengths: &[u32]) -> Vec<Outstanding> {
        lengths
            .iter()
            .enumerate()
            .map(|(i, &l)| Outstanding {
                job: JobId(i as u32 + 1),
                next_task: 1,
                tasks_left: l,
            })
            .collect()
    }

    fn machines(m: u32) -> Vec<MachineId> {
        (1..=m).map(MachineId).collect()
    }

    fn col_units(plan: &TrianglePlan, j: usize) -> Vec<(u32, u32, u32)> {
        plan.columns[j]
            .segments
            .iter()
            .map(|s| (s.job.0, s.first_task, s.tasks))
            .collect()
    }

    #[test]
    fn preemptive_trims_the_longest() {
        // lengths 1,2,4 into d=3, phi=1: 6 of 6 capacity used, the length-4
        // job contributes only its first three tasks.
        let plan = pack_preemptive(&jobs(&[1, 2, 4]), &machines(3), 3, 1).unwrap();
        assert_eq!(col_units(&plan, 0), vec![(1, 1, 1)]);
        assert_eq!(col_units(&plan, 1), vec![(2, 1, 2)]);
        assert_eq!(col_units(&plan, 2), vec![(3, 1, 3)]);
        assert_eq!(plan.assigned_units(), 6);
    }

    #[test]
    fn preemptive_fewer_jobs_than_columns() {
        let plan = pack_preemptive(&jobs(&[1]), &machines(2), 2, 1).unwrap();
        assert_eq!(col_units(&plan, 0), vec![(1, 1, 1)]);
        assert!(plan.columns[1].segments.is_empty());
    }

    #[test]
    fn preemptive_unit_jobs_fill_the_triangle() {
        let plan = pack_preemptive(&units(6), &machines(3), 3, 1).unwrap();
        assert_eq!(plan.columns[0].segments.len(), 1);
        assert_eq!(plan.columns[1].segments.len(), 2);
        assert_eq!(plan.columns[2].segments.len(), 3);
        assert_eq!(plan.assigned_units(), 6);
    }

    #[test]
    fn preemptive_errors_without_machines() {
        assert_eq!(
            pack_preemptive(&units(3), &machines(2), 3, 1).unwrap_err(),
            PackError::NotEnoughMachines { d: 3, machines: 2 }
        );
    }

    #[test]
    fn preemptive_empty_table_gives_empty_columns() {
        let plan = pack_preemptive(&[], &machines(3), 3, 1).unwrap();
        assert!(plan.columns.iter().all(|c| c.segments.is_empty()));
    }

    #[test]
    fn nonpreemptive_whole_jobs_only() {
        // lengths 1,3 into caps 2 and 4: both whole.
        let plan = pack_nonpreemptive(&jobs(&[1, 3]), &machines(2), 2, 2).unwrap();
        assert_eq!(col_units(&plan, 0), vec![(1, 1, 1)]);
        assert_eq!(col_units(&plan, 1), vec![(2, 1, 3)]);
    }

    #[test]
    fn nonpreemptive_defers_oversized_jobs() {
        // A length-5 job fits neither cap 2 nor cap 4.
        let plan = pack_nonpreemptive(&jobs(&[5]), &machines(2), 2, 2).unwrap();
        assert_eq!(plan.assigned_units(), 0);
    }

    #[test]
    fn nonpreemptive_equal_lengths_fill_columns_exactly() {
        // n jobs of length phi with n >= d(d+1)/2: column j holds exactly j.
        for d in 1..=4u32 {
            let n = d * (d + 1) / 2;
            let phi = 3;
            let input = jobs(&vec![phi; n as usize]);
            let plan = pack_nonpreemptive(&input, &machines(d), d, phi).unwrap();
            for j in 0..d as usize {
                assert_eq!(plan.columns[j].segments.len(), j + 1, "d={d} col={}", j + 1);
            }
        }
    }

    #[test]
    fn longjob_slot_formula() {
        // One length-8 job, d=1: slot 8, epoch 8.
        let plan = pack_longjob(&jobs(&[8]), &machines(4), 1).unwrap();
        assert_eq!(plan.columns[0].slot, 8);
        assert_eq!(plan.duration, 8);

        // Two length-2 jobs, d=2: slots 3 and 2, epoch 3.
        let plan = pack_longjob(&jobs(&[2, 2]), &machines(2), 2).unwrap();
        assert_eq!(plan.columns[0].slot, 3);
        assert_eq!(plan.columns[1].slot, 2);
        assert_eq!(plan.duration, 3);

        // One unit job, one machine.
        let plan = pack_longjob(&jobs(&[1]), &machines(1), 1).unwrap();
        assert_eq!(plan.columns[0].slot, 1);
        assert_eq!(plan.duration, 1);

        assert_eq!(
            pack_longjob(&[], &machines(1), 1).unwrap_err(),
            PackError::NoJobs
        );
    }

    #[test]
    fn plan_render_golden() {
        let plan = pack_preemptive(&jobs(&[1, 2, 4]), &machines(3), 3, 1).unwrap();
        assert_eq!(
            plan.render(),
            "plan mode=preemptive d=3 phi=1 rounds=3\n\
             col 1: machine=1 slot=1 cap=1 segs=[j1:1-1]\n\
             col 2: machine=2 slot=2 cap=2 segs=[j2:1-2]\n\
             col 3: machine=3 slot=3 cap=3 segs=[j3:1-3]\n"
        );
    }

    #[test]
    fn failure_free_epoch_confirms_all_and_generates_mdphi_work() {
        let plan = pack_preemptive(&units(6), &machines(3), 3, 1).unwrap();
        let (outcome, trace) = run_epoch(&plan, &machines(3), &AdversarySpec::none(), 0).unwrap();
        assert_eq!(outcome.confirmed_tasks.len(), 6);
        assert_eq!(outcome.detected_crashes.len(), 0);
        assert_eq!(outcome.rounds_elapsed, 3);
        assert_eq!(total_work(&trace).unwrap(), 9);
    }

    #[test]
    fn crashed_column_is_detected_and_its_tasks_stay_outstanding() {
        // Machine of column 2 crashed in round 1: silence at its slot,
        // detected; its two unit tasks stay outstanding; columns 1 and 3
        // confirm.
        let plan = pack_preemptive(&units(6), &machines(3), 3, 1).unwrap();
        let victim = plan.columns[1].machine;
        let schedule = CrashSchedule::new(vec![(victim, 1)]).unwrap();
        let adv = AdversarySpec::new(1, AdversaryKind::Schedule(schedule));
        let (outcome, _) = run_epoch(&plan, &machines(3), &adv, 0).unwrap();
        assert_eq!(outcome.detected_crashes, vec![victim]);
        assert_eq!(outcome.confirmed_tasks.len(), 4);
        assert_eq!(outcome.broadcasts_heard, 2);
    }

    #[test]
    fn empty_plan_idles_for_the_whole_epoch() {
        let plan = pack_preemptive(&[], &machines(3), 2, 2).unwrap();
        let (outcome, trace) = run_epoch(&plan, &machines(3), &AdversarySpec::none(), 0).unwrap();
        assert_eq!(outcome.confirmed_tasks.len(), 0);
        assert_eq!(outcome.detected_crashes.len(), 0);
        assert_eq!(outcome.rounds_elapsed, 4);
        // 3 machines idle for d*phi = 4 rounds.
        assert_eq!(total_work(&trace).unwrap(), 12);
    }

    #[test]
    fn unscheduled_sender_is_a_protocol_violation() {
        let plan = pack_preemptive(&units(3), &machines(2), 2, 1).unwrap();
        let mut exec = EpochExec::new(plan, MachineId(1));
        // Round 1's slot belongs to machine 1; machine 2 speaking is a bug.
        let err = exec
            .absorb(&ChannelOutcome::Delivered {
                sender: MachineId(2),
                payload: Payload::Token,
            })
            .unwrap_err();
        assert!(err.contains("heard 2"));
    }

    proptest! {
        // Capacity: assigned units never exceed phi * d(d+1)/2, per-column
        // assignments fit capacity, chains stay prefix-contiguous, packing is
        // deterministic, and a job never spans two columns.
        #[test]
        fn packing_respects_geometry(
            lengths in proptest::collection::vec(1u32..9, 0..12),
            d in 1u32..6,
            phi in 1u32..4,
            preemptive in proptest::bool::ANY,
        ) {
            let input = jobs(&lengths);
            let ms = machines(8);
            let plan = if preemptive {
                pack_preemptive(&input, &ms, d, phi).unwrap()
            } else {
                pack_nonpreemptive(&input, &ms, d, phi).unwrap()
            };
            let again = if preemptive {
                pack_preemptive(&input, &ms, d, phi).unwrap()
            } else {
                pack_nonpreemptive(&input, &ms, d, phi).unwrap()
            };
            prop_assert_eq!(&plan, &again);
            prop_assert_eq!(plan.columns.len(), d as usize);
            let mut seen_jobs = std::collections::BTreeSet::new();
            for col in &plan.columns {
                prop_assert!(col.assigned_units() <= col.capacity);
                for s in &col.segments {
                    prop_assert_eq!(s.first_task, 1); // fresh jobs: prefixes start at 1
                    prop_assert!(seen_jobs.insert(s.job), "job {} spans columns", s.job);
                }
            }
            let cap: u64 = u64::from(phi) * u64::from(d) * u64::from(d + 1) / 2;
            prop_assert!(plan.assigned_units() <= cap);
        }
    }
}
