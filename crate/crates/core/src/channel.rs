//! The shared channel: a broadcast medium without collision detection.
//!
//! In each round every running machine may attempt one transmission. The
//! message is delivered to all running machines iff exactly one machine
//! transmitted; any other count is indistinguishable from background noise.

use crate::jobs::{JobId, MachineId, TaskRef};

/// Message contents carried by a broadcast.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Payload {
    /// Tasks newly confirmed by the sender since its last successful
    /// broadcast, in chain order per job (preemptive runs).
    TaskConfirm(Vec<TaskRef>),
    /// Whole jobs completed by the sender in one uninterrupted attempt
    /// (non-preemptive runs).
    JobConfirm(Vec<JobId>),
    /// Bare sender announcement used by the randomized election rounds.
    Token,
}

impl Payload {
    /// Compact single-token rendering used by trace exports (no commas).
    pub fn describe(&self) -> String {
        match self {
            Payload::TaskConfirm(tasks) => {
                let parts: Vec<String> = tasks.iter().map(|t| t.to_string()).collect();
                format!("tasks:{}", parts.join(";"))
            }
            Payload::JobConfirm(jobs) => {
                let parts: Vec<String> = jobs.iter().map(|j| j.to_string()).collect();
                format!("jobs:{}", parts.join(";"))
            }
            Payload::Token => "token".to_string(),
        }
    }
}

/// A transmission attempt by one machine in one round.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TransmissionIntent {
    pub sender: MachineId,
    pub payload: Payload,
}

/// What every running machine hears at the end of a round.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ChannelOutcome {
    Silence,
    Delivered { sender: MachineId, payload: Payload },
}

/// Resolve one round of channel contention.
///
/// Total function: exactly one intent is delivered verbatim, zero or several
/// intents produce [`ChannelOutcome::Silence`].
pub fn resolve_channel(intents: &[TransmissionIntent]) -> ChannelOutcome {
    match intents {
        [only] => ChannelOutcome::Delivered {
            sender: only.sender,
            payload: only.payload.clone(),
        },
        _ => ChannelOutcome::Silence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn token(m: u32) -> TransmissionIntent {
        TransmissionIntent {
            sender: MachineId(m),
            payload: Payload::Token,
        }
    }

    #[test]
    fn empty_set_is_silence() {
        assert_eq!(resolve_channel(&[]), ChannelOutcome::Silence);
    }

    #[test]
    fn lone_sender_is_delivered() {
        let intent = TransmissionIntent {
            sender: MachineId(3),
            payload: Payload::JobConfirm(vec![JobId(9)]),
        };
        assert_eq!(
            resolve_channel(std::slice::from_ref(&intent)),
            ChannelOutcome::Delivered {
                sender: MachineId(3),
                payload: intent.payload
            }
        );
    }

    #[test]
    fn collision_is_silence() {
        assert_eq!(
            resolve_channel(&[token(1), token(2)]),
            ChannelOutcome::Silence
        );
    }

    proptest! {
        // Delivered iff exactly one intent survives, and it is echoed verbatim.
        #[test]
        fn delivered_iff_exactly_one(count in 0usize..6) {
            let intents: Vec<TransmissionIntent> = (0..count).map(|i| token(i as u32 + 1)).collect();
            match resolve_channel(&intents) {
                ChannelOutcome::Delivered { sender, payload } => {
                    prop_assert_eq!(count, 1);
                    prop_assert_eq!(sender, intents[0].sender);
                    prop_assert_eq!(payload, intents[0].payload.clone());
                }
                ChannelOutcome::Silence => prop_assert_ne!(count, 1),
            }
        }
    }
}
