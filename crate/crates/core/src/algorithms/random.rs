//! The randomized preemptive scheduler and its two subroutines.
//!
//! Against a non-adaptive adversary, randomly elected leaders cannot be
//! targeted: the crash order is fixed before round 0, so wiping out the
//! leader prefix costs the adversary a proportional share of all machines.
//!
//! Branch structure, decided from the instance parameters before round 1:
//!
//! - `m^2 <= L`: the machine pool is small relative to the work; the
//!   deterministic triangle scheduler is already optimal here, delegate.
//! - `log2(m) > exp(sqrt(L)/32)`: degenerate many-machines/few-tasks case;
//!   every machine performs everything silently, then a single successful
//!   broadcast (the work-confirmation loop) ends the run.
//! - otherwise: per scale level, an election (`mix-and-test`) draws about
//!   `ceil(sqrt(L))` leaders to the front of the machine list, then triangle
//!   epochs of length `ceil(sqrt(L))` run over the leader prefix while they
//!   stay productive (at least a quarter of the expected broadcasts heard).
//!   A quiet epoch repeats the election at the same level; a failed election
//!   shrinks the level. As soon as `ceil(m/2^i) <= ceil(sqrt(L))` the
//!   residual instance is delegated to the deterministic scheduler.
//!
//! Election rounds: every machine not yet promoted in this invocation
//! broadcasts its id with probability `1/contenders`; a delivery promotes the
//! sender, decrements the contender estimate and counts as one heard
//! broadcast. With `x` contenders tossing at `1/x` a round is heard with
//! probability `(1 - 1/x)^(x-1) >= 1/e`, and at least `1/(2*sqrt(e))`
//! anywhere in the `(x/2, x]` band, so the round budget is sized at
//! `2*sqrt(e)` times the `ceil(sqrt(L)) + log2(m)` heard-broadcast target;
//! an in-band election then succeeds with overwhelming probability.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{ChannelOutcome, Payload};
use crate::jobs::{JobSet, MachineId};
use crate::rng::{ceil_div_pow2, ceil_log2, isqrt_ceil};
use crate::sim::{ExecMode, Program, SimError};
use crate::tapebb::{pack_preemptive, EpochExec};
use crate::view::LocalView;

use super::triangle::TriangleSched;

/// Rounds granted to one election.
pub fn mix_and_test_rounds(sqrt_l: u32, log2_m: u32) -> u32 {
    let two_sqrt_e = 2.0 * std::f64::consts::E.sqrt();
    (two_sqrt_e * f64::from(sqrt_l + log2_m)).ceil() as u32
}

/// One election in progress.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MixAndTest {
    pub scale: u32,
    pub rounds_total: u32,
    pub rounds_done: u32,
    pub heard: u32,
    /// Machines promoted during this invocation; they stop tossing.
    pub elected: Vec<MachineId>,
}

impl MixAndTest {
    pub fn new(scale: u32, machine_count: u32, sqrt_l: u32, view: &mut LocalView) -> Self {
        view.contenders = ceil_div_pow2(machine_count, scale);
        MixAndTest {
            scale,
            rounds_total: mix_and_test_rounds(sqrt_l, ceil_log2(machine_count)),
            rounds_done: 0,
            heard: 0,
            elected: Vec::new(),
        }
    }

    pub fn wants_toss(&self, me: MachineId) -> bool {
        !self.elected.contains(&me)
    }

    /// Fold one round's outcome; true when the invocation has finished.
    pub fn absorb(&mut self, outcome: &ChannelOutcome, view: &mut LocalView) -> bool {
        if let ChannelOutcome::Delivered { sender, .. } = outcome {
            view.promote(*sender);
            self.elected.push(*sender);
            view.contenders = view.contenders.saturating_sub(1).max(1);
            self.heard += 1;
        }
        self.rounds_done += 1;
        self.rounds_done >= self.rounds_total
    }

    pub fn succeeded(&self, sqrt_l: u32) -> bool {
        self.heard >= sqrt_l
    }
}

/// The work-confirmation loop: every participant holds all tasks performed
/// locally and tosses to be the one to announce it. The scale cycles through
/// `0..=ceil(log2 m)` and wraps, so a round with an in-band toss probability
/// comes around every cycle regardless of the survivor count.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConfirmWork {
    pub scale: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Phase {
    /// Performing every task locally; no transmissions.
    Silent {
        rounds_left: u64,
    },
    Confirm(ConfirmWork),
    Election(MixAndTest),
    Epoch(EpochExec),
    Done,
}

/// Per-machine program for the randomized scheduler.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RanScaTri {
    me: MachineId,
    machine_count: u32,
    /// `ceil(sqrt(L))` of the original task total, frozen at start.
    sqrt_l: u32,
    log2_m: u32,
    /// Current scale level of the main loop.
    scale: u32,
    view: LocalView,
    phase: Phase,
    /// Set once the residual instance is handed to the deterministic
    /// scheduler; from then on this program is exactly a `TriangleSched`.
    delegated: Option<TriangleSched>,
}

impl RanScaTri {
    pub fn new(me: MachineId, machine_count: u32, jobs: &JobSet) -> Self {
        let total = jobs.total_len();
        let mut prog = RanScaTri {
            me,
            machine_count,
            sqrt_l: isqrt_ceil(total),
            log2_m: ceil_log2(machine_count),
            scale: 0,
            view: LocalView::new(machine_count, jobs),
            phase: Phase::Done,
            delegated: None,
        };

        if jobs.is_empty() {
            return prog;
        }
        let m = u64::from(machine_count);
        if m * m <= total {
            prog.delegate();
        } else if f64::from(machine_count).log2() > ((total as f64).sqrt() / 32.0).exp() {
            prog.phase = Phase::Silent { rounds_left: total };
        } else {
            prog.phase = prog.scale_phase(0);
        }
        prog
    }

    fn delegate(&mut self) {
        let view = self.view.clone();
        self.delegated = Some(TriangleSched::from_view(
            self.me,
            self.machine_count,
            ExecMode::Preemptive,
            view,
        ));
    }

    /// Move to scale `i`: delegate once the estimate drops to the leader
    /// count, otherwise start an election at this scale.
    fn scale_phase(&mut self, scale: u32) -> Phase {
        if ceil_div_pow2(self.machine_count, scale) <= self.sqrt_l {
            self.delegate();
            Phase::Done
        } else {
            self.scale = scale;
            self.view.scale = scale;
            Phase::Election(MixAndTest::new(
                scale,
                self.machine_count,
                self.sqrt_l,
                &mut self.view,
            ))
        }
    }

    /// Triangle epoch over the leader prefix of the machine list.
    fn epoch_phase(&mut self) -> Phase {
        let d = self.sqrt_l.min(self.view.machines.len() as u32);
        let plan = pack_preemptive(&self.view.outstanding(), &self.view.machines, d, 1)
            .expect("leader prefix is long enough by construction");
        self.view.epoch_len = plan.epoch_len;
        self.view.phase_len = plan.phase_len;
        Phase::Epoch(EpochExec::new(plan, self.me))
    }

    pub fn local_view(&self) -> &LocalView {
        self.delegated
            .as_ref()
            .map(|d| d.local_view())
            .unwrap_or(&self.view)
    }
}

impl Program for RanScaTri {
    fn wants_halt(&self) -> bool {
        match &self.delegated {
            Some(inner) => inner.wants_halt(),
            None => matches!(self.phase, Phase::Done),
        }
    }

    fn intent(&self, round: u64, rng: &mut ChaCha8Rng) -> Option<Payload> {
        if let Some(inner) = &self.delegated {
            return inner.intent(round, rng);
        }
        match &self.phase {
            Phase::Silent { .. } | Phase::Done => None,
            Phase::Confirm(cw) => {
                let contenders = ceil_div_pow2(self.machine_count, cw.scale);
                rng.gen_bool(1.0 / f64::from(contenders))
                    .then(|| Payload::TaskConfirm(self.view.outstanding_tasks()))
            }
            Phase::Election(mat) => (mat.wants_toss(self.me)
                && rng.gen_bool(1.0 / f64::from(self.view.contenders)))
            .then_some(Payload::Token),
            Phase::Epoch(exec) => exec.intent(),
        }
    }

    fn absorb(&mut self, round: u64, outcome: &ChannelOutcome) -> Result<(), SimError> {
        if let Some(inner) = &mut self.delegated {
            return inner.absorb(round, outcome);
        }
        let phase = std::mem::replace(&mut self.phase, Phase::Done);
        self.phase = match phase {
            Phase::Done => Phase::Done,
            Phase::Silent { rounds_left } => {
                if !matches!(outcome, ChannelOutcome::Silence) {
                    return Err(SimError::ProtocolViolation {
                        round,
                        what: "delivery during the silent all-tasks phase".into(),
                    });
                }
                if rounds_left == 1 {
                    Phase::Confirm(ConfirmWork { scale: 0 })
                } else {
                    Phase::Silent {
                        rounds_left: rounds_left - 1,
                    }
                }
            }
            Phase::Confirm(mut cw) => match outcome {
                ChannelOutcome::Delivered { .. } => {
                    // Whoever was heard performed everything; that is common
                    // knowledge, so everyone clears the job list and halts.
                    self.view.remaining.clear();
                    Phase::Done
                }
                ChannelOutcome::Silence => {
                    cw.scale = if cw.scale >= self.log2_m {
                        0
                    } else {
                        cw.scale + 1
                    };
                    Phase::Confirm(cw)
                }
            },
            Phase::Election(mut mat) => {
                if let ChannelOutcome::Delivered { payload, .. } = outcome {
                    if !matches!(payload, Payload::Token) {
                        return Err(SimError::ProtocolViolation {
                            round,
                            what: "non-token delivery during an election".into(),
                        });
                    }
                }
                if mat.absorb(outcome, &mut self.view) {
                    if mat.succeeded(self.sqrt_l) {
                        self.epoch_phase()
                    } else {
                        self.scale_phase(mat.scale + 1)
                    }
                } else {
                    Phase::Election(mat)
                }
            }
            Phase::Epoch(mut exec) => {
                exec.absorb(outcome)
                    .map_err(|what| SimError::ProtocolViolation { round, what })?;
                if exec.is_done() {
                    let done = exec.into_outcome();
                    self.view.apply_confirmed_tasks(&done.confirmed_tasks);
                    self.view.remove_machines(&done.detected_crashes);
                    if self.view.jobs_done() {
                        Phase::Done
                    } else if 4 * u64::from(done.broadcasts_heard) >= u64::from(self.sqrt_l) {
                        // Productive epoch: keep the leaders working.
                        self.epoch_phase()
                    } else {
                        // Too quiet: re-elect at the current scale.
                        Phase::Election(MixAndTest::new(
                            self.scale,
                            self.machine_count,
                            self.sqrt_l,
                            &mut self.view,
                        ))
                    }
                } else {
                    Phase::Epoch(exec)
                }
            }
        };
        Ok(())
    }

    fn view(&self) -> Option<&LocalView> {
        Some(self.local_view())
    }
}

impl ConfirmWork {
    /// Current toss denominator given the original machine count.
    pub fn contenders(&self, machine_count: u32) -> u32 {
        ceil_div_pow2(machine_count, self.scale)
    }
}

/// Standalone election probe: runs exactly one mix-and-test invocation over
/// machines `1..=operational`, then halts. Used to measure the election's
/// success rate in isolation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MatProbe {
    me: MachineId,
    view: LocalView,
    mat: MixAndTest,
    finished: bool,
}

impl MatProbe {
    pub fn new(
        me: MachineId,
        operational: u32,
        machine_count: u32,
        scale: u32,
        sqrt_l: u32,
    ) -> Self {
        let empty = JobSet::from_lengths(&[]).expect("empty job set");
        let mut view = LocalView::new(operational, &empty);
        let mat = MixAndTest::new(scale, machine_count, sqrt_l, &mut view);
        MatProbe {
            me,
            view,
            mat,
            finished: false,
        }
    }

    pub fn heard(&self) -> u32 {
        self.mat.heard
    }

    /// Machines promoted during the invocation, in election order.
    pub fn elected(&self) -> &[MachineId] {
        &self.mat.elected
    }
}

impl Program for MatProbe {
    fn wants_halt(&self) -> bool {
        self.finished
    }
    fn intent(&self, _round: u64, rng: &mut ChaCha8Rng) -> Option<Payload> {
        (self.mat.wants_toss(self.me) && rng.gen_bool(1.0 / f64::from(self.view.contenders)))
            .then_some(Payload::Token)
    }
    fn absorb(&mut self, _round: u64, outcome: &ChannelOutcome) -> Result<(), SimError> {
        if self.mat.absorb(outcome, &mut self.view) {
            self.finished = true;
        }
        Ok(())
    }
    fn view(&self) -> Option<&LocalView> {
        Some(&self.view)
    }
}

/// Standalone work-confirmation probe: the machine holds all tasks performed
/// locally and loops until some broadcast is heard.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConfirmProbe {
    me: MachineId,
    machine_count: u32,
    log2_m: u32,
    view: LocalView,
    cw: ConfirmWork,
    finished: bool,
}

impl ConfirmProbe {
    pub fn new(me: MachineId, participants: u32, machine_count: u32, jobs: &JobSet) -> Self {
        ConfirmProbe {
            me,
            machine_count,
            log2_m: ceil_log2(machine_count),
            view: LocalView::new(participants, jobs),
            cw: ConfirmWork { scale: 0 },
            finished: false,
        }
    }
}

impl Program for ConfirmProbe {
    fn wants_halt(&self) -> bool {
        self.finished
    }
    fn intent(&self, _round: u64, rng: &mut ChaCha8Rng) -> Option<Payload> {
        rng.gen_bool(1.0 / f64::from(self.cw.contenders(self.machine_count)))
            .then(|| Payload::TaskConfirm(self.view.outstanding_tasks()))
    }
    fn absorb(&mut self, _round: u64, outcome: &ChannelOutcome) -> Result<(), SimError> {
        match outcome {
            ChannelOutcome::Delivered { .. } => {
                self.view.remaining.clear();
                self.finished = true;
            }
            ChannelOutcome::Silence => {
                self.cw.scale = if self.cw.scale >= self.log2_m {
                    0
                } else {
                    self.cw.scale + 1
                };
            }
        }
        Ok(())
    }
    fn view(&self) -> Option<&LocalView> {
        Some(&self.view)
    }
}
