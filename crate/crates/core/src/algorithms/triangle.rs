//! The two deterministic schedulers, expressed as one per-machine program.
//!
//! Both loop until the job list empties: compute the epoch length
//! `d = ceil(m / 2^scale)` (clamped to the machines still believed
//! operational), check whether enough jobs exist to fill a triangle of
//! `d(d+1)/2` slots, and either run an epoch or shrink. Consecutive triangle
//! capacities shrink by at most a factor of four, so only a constant number
//! of reduced epochs is ever needed per scale level.
//!
//! Preemptive (`scatri`): phase length 1, jobs trimmed to fit, epoch when
//! `|jobs| >= d(d+1)/2`, otherwise shrink.
//!
//! Non-preemptive (`deftri`): when `|jobs| >= d(d+1)/2` the phase length is
//! pumped to the current average job length (so whole jobs fill the
//! triangle); with few jobs but many outstanding tasks it switches to the
//! long-job layout (one job per machine, phase 1); with few tasks it shrinks.
//! A crashed performer loses its whole job: nothing was confirmed, so the
//! job simply stays outstanding.

use rand_chacha::ChaCha8Rng;

use crate::channel::{ChannelOutcome, Payload};
use crate::jobs::{JobSet, MachineId};
use crate::rng::ceil_div_pow2;
use crate::sim::{ExecMode, Program, SimError};
use crate::tapebb::{
    pack_longjob, pack_nonpreemptive, pack_preemptive, EpochExec, EpochOutcome, TrianglePlan,
};
use crate::view::LocalView;

fn triangle_slots(d: u32) -> u64 {
    u64::from(d) * u64::from(d + 1) / 2
}

/// Per-machine replicated program for `scatri` and `deftri`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TriangleSched {
    me: MachineId,
    /// Original machine count; epoch lengths scale down from it.
    total_machines: u32,
    mode: ExecMode,
    view: LocalView,
    epoch: Option<EpochExec>,
}

impl TriangleSched {
    pub fn new(me: MachineId, machine_count: u32, jobs: &JobSet, mode: ExecMode) -> Self {
        Self::from_view(me, machine_count, mode, LocalView::new(machine_count, jobs))
    }

    /// Resume scheduling over an inherited view (delegation path); the scale
    /// restarts at 0 on the current lists.
    pub fn from_view(
        me: MachineId,
        machine_count: u32,
        mode: ExecMode,
        mut view: LocalView,
    ) -> Self {
        view.scale = 0;
        let mut sched = TriangleSched {
            me,
            total_machines: machine_count,
            mode,
            view,
            epoch: None,
        };
        sched.epoch = sched.schedule_next();
        sched
    }

    pub fn local_view(&self) -> &LocalView {
        &self.view
    }

    /// Zero-round local computation between epochs: shrink until a plan is
    /// feasible, or stop when no jobs remain.
    fn schedule_next(&mut self) -> Option<EpochExec> {
        loop {
            if self.view.jobs_done() {
                return None;
            }
            let d = ceil_div_pow2(self.total_machines, self.view.scale)
                .min(self.view.machines.len() as u32);
            let jobs = self.view.job_count();
            let plan = match self.mode {
                ExecMode::Preemptive => {
                    if jobs >= triangle_slots(d) {
                        self.make_plan(d, 1, PackKind::Preemptive)
                    } else {
                        self.view.scale += 1;
                        continue;
                    }
                }
                ExecMode::NonPreemptive => {
                    if jobs >= triangle_slots(d) {
                        // Pump the phase to the current average job length.
                        let tasks = self.view.task_count();
                        let phi = tasks.div_ceil(jobs) as u32;
                        self.make_plan(d, phi, PackKind::NonPreemptive)
                    } else if self.view.task_count() < triangle_slots(d) {
                        self.view.scale += 1;
                        continue;
                    } else {
                        // Few jobs, many tasks: long-job layout.
                        let d_long = (jobs as u32).min(self.view.machines.len() as u32);
                        self.make_plan(d_long, 1, PackKind::LongJob)
                    }
                }
            };
            return Some(EpochExec::new(plan, self.me));
        }
    }

    fn make_plan(&mut self, d: u32, phi: u32, kind: PackKind) -> TrianglePlan {
        let outstanding = self.view.outstanding();
        let plan = match kind {
            PackKind::Preemptive => pack_preemptive(&outstanding, &self.view.machines, d, phi),
            PackKind::NonPreemptive => {
                pack_nonpreemptive(&outstanding, &self.view.machines, d, phi)
            }
            PackKind::LongJob => pack_longjob(&outstanding, &self.view.machines, d),
        }
        .expect("scheduler feeds the packer valid geometry");
        self.view.epoch_len = plan.epoch_len;
        self.view.phase_len = plan.phase_len;
        plan
    }

    fn fold(&mut self, outcome: EpochOutcome) {
        self.view.apply_confirmed_tasks(&outcome.confirmed_tasks);
        self.view.apply_confirmed_jobs(&outcome.confirmed_jobs);
        self.view.remove_machines(&outcome.detected_crashes);
    }
}

enum PackKind {
    Preemptive,
    NonPreemptive,
    LongJob,
}

impl Program for TriangleSched {
    fn wants_halt(&self) -> bool {
        self.epoch.is_none()
    }

    fn intent(&self, _round: u64, _rng: &mut ChaCha8Rng) -> Option<Payload> {
        self.epoch.as_ref().and_then(|e| e.intent())
    }

    fn absorb(&mut self, round: u64, outcome: &ChannelOutcome) -> Result<(), SimError> {
        let epoch = self
            .epoch
            .as_mut()
            .expect("running machines are always inside an epoch");
        epoch
            .absorb(outcome)
            .map_err(|what| SimError::ProtocolViolation { round, what })?;
        if epoch.is_done() {
            let done = self.epoch.take().expect("just observed").into_outcome();
            self.fold(done);
            self.epoch = self.schedule_next();
        }
        Ok(())
    }

    fn view(&self) -> Option<&LocalView> {
        Some(&self.view)
    }
}
