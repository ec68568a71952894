//! The replicated local view every operational machine keeps.
//!
//! All information flows through the single shared channel, so at every round
//! boundary the views of all running machines are equal; the engine's tests
//! assert exactly that. The view holds the list of machines believed
//! operational (in schedule order, election leaders at the front), the
//! outstanding chain suffix of every unfinished job, and the current scaling
//! parameters.

use std::collections::BTreeMap;

use crate::jobs::{JobId, JobSet, MachineId, TaskRef};
use crate::tapebb::Outstanding;

/// Chain suffix of one outstanding job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JobProgress {
    /// First unperformed task index, 1-based.
    pub next_task: u32,
    /// Number of tasks still outstanding.
    pub tasks_left: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LocalView {
    /// Machines believed operational, in schedule order.
    pub machines: Vec<MachineId>,
    /// Outstanding jobs and their chain suffixes.
    pub remaining: BTreeMap<JobId, JobProgress>,
    /// Halving exponent: epoch lengths derive from `ceil(m / 2^scale)`.
    pub scale: u32,
    /// Epoch length of the most recent plan.
    pub epoch_len: u32,
    /// Phase length of the most recent plan.
    pub phase_len: u32,
    /// Estimated contender count for randomized broadcast rounds;
    /// machines toss with probability `1 / contenders`.
    pub contenders: u32,
}

impl LocalView {
    pub fn new(machine_count: u32, jobs: &JobSet) -> Self {
        LocalView {
            machines: (1..=machine_count).map(MachineId).collect(),
            remaining: jobs
                .jobs()
                .iter()
                .map(|j| {
                    (
                        j.id,
                        JobProgress {
                            next_task: 1,
                            tasks_left: j.length,
                        },
                    )
                })
                .collect(),
            scale: 0,
            epoch_len: 0,
            phase_len: 1,
            contenders: 1,
        }
    }

    pub fn job_count(&self) -> u64 {
        self.remaining.len() as u64
    }

    /// Total outstanding task count.
    pub fn task_count(&self) -> u64 {
        self.remaining
            .values()
            .map(|p| u64::from(p.tasks_left))
            .sum()
    }

    pub fn jobs_done(&self) -> bool {
        self.remaining.is_empty()
    }

    /// Snapshot of the outstanding jobs in id order, as packing input.
    pub fn outstanding(&self) -> Vec<Outstanding> {
        self.remaining
            .iter()
            .map(|(&job, p)| Outstanding {
                job,
                next_task: p.next_task,
                tasks_left: p.tasks_left,
            })
            .collect()
    }

    /// Every outstanding task, jobs in id order and chains in order.
    pub fn outstanding_tasks(&self) -> Vec<TaskRef> {
        let mut tasks = Vec::new();
        for (&job, p) in &self.remaining {
            for k in 0..p.tasks_left {
                tasks.push(TaskRef {
                    job,
                    index: p.next_task + k,
                });
            }
        }
        tasks
    }

    /// Remove confirmed tasks (chain prefixes of the outstanding suffix).
    pub fn apply_confirmed_tasks(&mut self, tasks: &[TaskRef]) {
        for t in tasks {
            if let Some(p) = self.remaining.get_mut(&t.job) {
                debug_assert_eq!(t.index, p.next_task, "confirmations must follow the chain");
                if t.index == p.next_task {
                    p.next_task += 1;
                    p.tasks_left -= 1;
                    if p.tasks_left == 0 {
                        self.remaining.remove(&t.job);
                    }
                }
            }
        }
    }

    /// Remove whole confirmed jobs.
    pub fn apply_confirmed_jobs(&mut self, jobs: &[JobId]) {
        for id in jobs {
            self.remaining.remove(id);
        }
    }

    /// Drop machines whose crash was detected on the channel.
    pub fn remove_machines(&mut self, crashed: &[MachineId]) {
        self.machines.retain(|m| !crashed.contains(m));
    }

    /// Move an elected machine to the front of the list.
    pub fn promote(&mut self, leader: MachineId) {
        if let Some(pos) = self.machines.iter().position(|&m| m == leader) {
            self.machines.remove(pos);
            self.machines.insert(0, leader);
        }
    }
}
