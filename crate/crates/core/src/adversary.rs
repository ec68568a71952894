//! Crash-failure strategies.
//!
//! A non-adaptive adversary fixes its `(machine, round)` crashes before round
//! 1 and never consults the execution. Adaptive strategies observe the full
//! trace prefix *and the current round's intents* before deciding — crashing
//! after seeing who transmits is exactly the power the worst-case analyses
//! assume. Adaptive strategies never read private machine state: everything
//! they use is reconstructible from the public channel history.

use std::collections::BTreeSet;

use rand::Rng;

use crate::channel::{ChannelOutcome, TransmissionIntent};
use crate::jobs::MachineId;
use crate::rng::derive_rng;
use crate::sim::ConfigError;
use crate::trace::ExecutionTrace;

/// A fixed list of `(machine, round)` crashes, machines distinct.
/// Round 0 means the machine is crashed before the first round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrashSchedule {
    entries: Vec<(MachineId, u64)>,
}

impl CrashSchedule {
    pub fn new(mut entries: Vec<(MachineId, u64)>) -> Result<Self, ConfigError> {
        entries.sort();
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(ConfigError::BadSchedule(format!(
                    "machine {} scheduled twice; machines neither restart nor crash twice",
                    pair[0].0
                )));
            }
        }
        Ok(CrashSchedule { entries })
    }

    pub fn entries(&self) -> &[(MachineId, u64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Machines scheduled to crash in the given round.
    pub fn due(&self, round: u64) -> impl Iterator<Item = MachineId> + '_ {
        self.entries
            .iter()
            .filter(move |&&(_, r)| r == round)
            .map(|&(m, _)| m)
    }

    /// Parse the `machine,round` line format.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (m, r) = line.split_once(',').ok_or_else(|| {
                ConfigError::BadSchedule(format!("line {}: expected `machine,round`", lineno + 1))
            })?;
            let machine: u32 = m.trim().parse().map_err(|_| {
                ConfigError::BadSchedule(format!("line {}: bad machine id `{m}`", lineno + 1))
            })?;
            let round: u64 = r.trim().parse().map_err(|_| {
                ConfigError::BadSchedule(format!("line {}: bad round `{r}`", lineno + 1))
            })?;
            entries.push((MachineId(machine), round));
        }
        Self::new(entries)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (m, r) in &self.entries {
            out.push_str(&format!("{m},{r}\n"));
        }
        out
    }
}

/// Check a schedule against a budget and machine count.
pub fn validate_schedule(
    schedule: &CrashSchedule,
    budget: u32,
    machine_count: u32,
) -> Result<(), ConfigError> {
    if budget > machine_count.saturating_sub(1) {
        return Err(ConfigError::BudgetTooLarge {
            f: budget,
            max: machine_count.saturating_sub(1),
        });
    }
    if schedule.len() as u32 > budget {
        return Err(ConfigError::BadSchedule(format!(
            "{} crashes scheduled but budget is {budget}",
            schedule.len()
        )));
    }
    for &(m, _) in schedule.entries() {
        if m.0 == 0 || m.0 > machine_count {
            return Err(ConfigError::BadSchedule(format!(
                "machine {m} outside 1..={machine_count}"
            )));
        }
    }
    Ok(())
}

/// Strategy selector.
#[derive(Debug, Clone, PartialEq)]
pub enum AdversaryKind {
    /// Never crashes anything.
    None,
    /// Non-adaptive: fixed `(machine, round)` crashes.
    Schedule(CrashSchedule),
    /// Crashes any machine that wants to broadcast as a single one.
    Silencer,
    /// Crashes the head of the (publicly reconstructible) machine list
    /// whenever it is about to broadcast.
    LeaderHunter,
    /// Crashes each running machine independently with probability `p`
    /// per round until the budget runs out.
    Random { p: f64, seed: u64 },
}

impl AdversaryKind {
    /// Adaptive strategies decide online from the observed execution.
    pub fn is_adaptive(&self) -> bool {
        !matches!(self, AdversaryKind::None | AdversaryKind::Schedule(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            AdversaryKind::None => "none",
            AdversaryKind::Schedule(_) => "schedule",
            AdversaryKind::Silencer => "silencer",
            AdversaryKind::LeaderHunter => "leader_hunter",
            AdversaryKind::Random { .. } => "random",
        }
    }
}

/// Budget plus strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarySpec {
    pub budget: u32,
    pub kind: AdversaryKind,
}

impl AdversarySpec {
    pub fn none() -> Self {
        AdversarySpec {
            budget: 0,
            kind: AdversaryKind::None,
        }
    }

    pub fn new(budget: u32, kind: AdversaryKind) -> Self {
        AdversarySpec { budget, kind }
    }

    pub fn validate(&self, machine_count: u32) -> Result<(), ConfigError> {
        if let AdversaryKind::Schedule(s) = &self.kind {
            validate_schedule(s, self.budget, machine_count)?;
        }
        if let AdversaryKind::Random { p, .. } = self.kind {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::Invalid(format!(
                    "crash probability {p} outside [0,1]"
                )));
            }
        }
        Ok(())
    }

    /// Crashes to apply before round 1 (schedule entries at round 0).
    pub fn initial_crashes(&self) -> Vec<MachineId> {
        match &self.kind {
            AdversaryKind::Schedule(s) => s.due(0).collect(),
            _ => Vec::new(),
        }
    }

    pub fn build(&self) -> AdversaryImpl {
        match &self.kind {
            AdversaryKind::None => AdversaryImpl::None,
            AdversaryKind::Schedule(s) => AdversaryImpl::Schedule(s.clone()),
            AdversaryKind::Silencer => AdversaryImpl::Silencer,
            AdversaryKind::LeaderHunter => AdversaryImpl::LeaderHunter(LeaderHunterState {
                order: Vec::new(),
                seen: 0,
            }),
            AdversaryKind::Random { p, seed } => AdversaryImpl::Random { p: *p, seed: *seed },
        }
    }
}

/// What an adaptive strategy may see when deciding the current round's
/// crashes: the trace prefix and the intents, nothing private.
pub struct Observation<'a> {
    pub round: u64,
    pub trace: &'a ExecutionTrace,
    pub intents: &'a [TransmissionIntent],
    pub running: &'a [MachineId],
    pub budget_left: u32,
}

pub trait AdversaryState {
    fn decide(&mut self, obs: &Observation<'_>) -> BTreeSet<MachineId>;
}

#[derive(Debug, Clone)]
pub struct LeaderHunterState {
    /// Reconstructed machine order: sorted at start, delivered senders
    /// moved to the front, exactly as every listener would compute it.
    order: Vec<MachineId>,
    /// Trace rounds already folded into `order`.
    seen: usize,
}

#[derive(Debug, Clone)]
pub enum AdversaryImpl {
    None,
    Schedule(CrashSchedule),
    Silencer,
    LeaderHunter(LeaderHunterState),
    Random { p: f64, seed: u64 },
}

impl AdversaryState for AdversaryImpl {
    fn decide(&mut self, obs: &Observation<'_>) -> BTreeSet<MachineId> {
        match self {
            AdversaryImpl::None => BTreeSet::new(),
            AdversaryImpl::Schedule(s) => {
                // Late entries for machines that already halted fizzle: a
                // schedule fixed before round 0 cannot know halt times.
                s.due(obs.round)
                    .filter(|m| obs.running.contains(m))
                    .collect()
            }
            AdversaryImpl::Silencer => {
                if obs.budget_left >= 1 {
                    if let [only] = obs.intents {
                        return BTreeSet::from([only.sender]);
                    }
                }
                BTreeSet::new()
            }
            AdversaryImpl::LeaderHunter(state) => {
                if state.seen == 0 && state.order.is_empty() {
                    state.order = (1..=obs.trace.machine_count).map(MachineId).collect();
                }
                while state.seen < obs.trace.rounds.len() {
                    if let ChannelOutcome::Delivered { sender, .. } =
                        obs.trace.rounds[state.seen].outcome
                    {
                        if let Some(pos) = state.order.iter().position(|&m| m == sender) {
                            state.order.remove(pos);
                            state.order.insert(0, sender);
                        }
                    }
                    state.seen += 1;
                }
                if obs.budget_left >= 1 {
                    // Head = first machine the hunter has not crashed and
                    // that is still running (halts are public too).
                    let head = state.order.iter().find(|m| obs.running.contains(m));
                    if let Some(&head) = head {
                        if obs.intents.iter().any(|i| i.sender == head) {
                            return BTreeSet::from([head]);
                        }
                    }
                }
                BTreeSet::new()
            }
            AdversaryImpl::Random { p, seed } => {
                let mut out = BTreeSet::new();
                let mut left = obs.budget_left;
                for &m in obs.running {
                    if left == 0 {
                        break;
                    }
                    let mut rng = derive_rng(*seed, obs.round, u64::from(m.0));
                    if rng.gen_bool(*p) {
                        out.insert(m);
                        left -= 1;
                    }
                }
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Payload;

    fn obs_with<'a>(
        trace: &'a ExecutionTrace,
        intents: &'a [TransmissionIntent],
        running: &'a [MachineId],
        budget_left: u32,
    ) -> Observation<'a> {
        Observation {
            round: 1,
            trace,
            intents,
            running,
            budget_left,
        }
    }

    #[test]
    fn silencer_hits_lone_sender_only() {
        let trace = ExecutionTrace::new(3);
        let running = [MachineId(1), MachineId(2), MachineId(3)];
        let mut adv = AdversaryImpl::Silencer;

        let lone = [TransmissionIntent {
            sender: MachineId(2),
            payload: Payload::Token,
        }];
        assert_eq!(
            adv.decide(&obs_with(&trace, &lone, &running, 1)),
            BTreeSet::from([MachineId(2)])
        );

        let pair = [
            TransmissionIntent {
                sender: MachineId(1),
                payload: Payload::Token,
            },
            TransmissionIntent {
                sender: MachineId(3),
                payload: Payload::Token,
            },
        ];
        assert!(adv.decide(&obs_with(&trace, &pair, &running, 1)).is_empty());
        assert!(adv.decide(&obs_with(&trace, &lone, &running, 0)).is_empty());
    }

    #[test]
    fn none_never_crashes() {
        let trace = ExecutionTrace::new(2);
        let running = [MachineId(1), MachineId(2)];
        let intents = [TransmissionIntent {
            sender: MachineId(1),
            payload: Payload::Token,
        }];
        let mut adv = AdversaryImpl::None;
        assert!(adv
            .decide(&obs_with(&trace, &intents, &running, 2))
            .is_empty());
    }

    #[test]
    fn schedule_validation() {
        let ok = CrashSchedule::new(vec![(MachineId(1), 5), (MachineId(2), 5)]).unwrap();
        assert!(validate_schedule(&ok, 2, 3).is_ok());

        let dup = CrashSchedule::new(vec![(MachineId(1), 5), (MachineId(1), 9)]);
        assert!(matches!(dup, Err(ConfigError::BadSchedule(_))));

        // m crashes with budget m-1 exceed the budget.
        let all = CrashSchedule::new(vec![
            (MachineId(1), 1),
            (MachineId(2), 1),
            (MachineId(3), 1),
        ])
        .unwrap();
        assert!(validate_schedule(&all, 2, 3).is_err());
    }

    #[test]
    fn schedule_round_trip() {
        let s = CrashSchedule::parse("2,5\n1,3\n# comment\n\n").unwrap();
        assert_eq!(s.entries(), &[(MachineId(1), 3), (MachineId(2), 5)]);
        assert_eq!(CrashSchedule::parse(&s.render()).unwrap(), s);
    }

    #[test]
    fn random_respects_budget() {
        let trace = ExecutionTrace::new(8);
        let running: Vec<MachineId> = (1..=8).map(MachineId).collect();
        let mut adv = AdversaryImpl::Random { p: 1.0, seed: 1 };
        let crashes = adv.decide(&obs_with(&trace, &[], &running, 3));
        assert_eq!(crashes.len(), 3);
    }

    #[test]
    fn leader_hunter_follows_promotions() {
        let mut trace = ExecutionTrace::new(3);
        // Machine 3 was heard in round 1, so it moves to the head.
        trace.rounds.push(crate::trace::RoundRecord {
            round: 1,
            intents: vec![TransmissionIntent {
                sender: MachineId(3),
                payload: Payload::Token,
            }],
            crashes: vec![],
            outcome: ChannelOutcome::Delivered {
                sender: MachineId(3),
                payload: Payload::Token,
            },
            halts: vec![],
        });
        let running = [MachineId(1), MachineId(2), MachineId(3)];
        let mut adv = AdversaryImpl::LeaderHunter(LeaderHunterState {
            order: vec![],
            seen: 0,
        });

        // Head (3) not transmitting: no crash.
        let quiet = [TransmissionIntent {
            sender: MachineId(1),
            payload: Payload::Token,
        }];
        let mut obs = obs_with(&trace, &quiet, &running, 1);
        obs.round = 2;
        assert!(adv.decide(&obs).is_empty());

        // Head (3) transmitting: crash it.
        let loud = [TransmissionIntent {
            sender: MachineId(3),
            payload: Payload::Token,
        }];
        let mut obs = obs_with(&trace, &loud, &running, 1);
        obs.round = 2;
        assert_eq!(adv.decide(&obs), BTreeSet::from([MachineId(3)]));
    }
}
