//! Jobs, tasks and the identifiers shared across the crate.
//!
//! A job of length `l` is a chain of `l` unit tasks that must be performed in
//! order. `L` denotes the summed length of a job set and `alpha` the longest
//! single job.

use std::fmt;
use thiserror::Error;

/// Machine identifier, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MachineId(pub u32);

impl fmt::Display for MachineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Job identifier, 1-based and unique within a [`JobSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JobId(pub u32);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One unit task: position `index` (1-based) in the chain of its job.
///
/// Task `k` of a job is performable and confirmable only after tasks
/// `1..k-1` of the same job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskRef {
    pub job: JobId,
    pub index: u32,
}

impl fmt::Display for TaskRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.job, self.index)
    }
}

/// A single job: an id and a positive integer length in unit tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JobSpec {
    pub id: JobId,
    pub length: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum JobSetError {
    #[error("job {0} has zero length; jobs have a minimal unit task")]
    ZeroLength(JobId),
    #[error("duplicate job id {0}")]
    DuplicateId(JobId),
}

/// Immutable catalog of jobs, ordered by id.
///
/// Derives the instance parameters: `n` (count), `total_len` (`L`, the summed
/// lengths) and `max_len` (`alpha`, the longest job).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JobSet {
    jobs: Vec<JobSpec>,
}

impl JobSet {
    pub fn new(mut jobs: Vec<JobSpec>) -> Result<Self, JobSetError> {
        jobs.sort_by_key(|j| j.id);
        for pair in jobs.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(JobSetError::DuplicateId(pair[0].id));
            }
        }
        if let Some(j) = jobs.iter().find(|j| j.length == 0) {
            return Err(JobSetError::ZeroLength(j.id));
        }
        Ok(JobSet { jobs })
    }

    /// Jobs with ids `1..=lengths.len()` in the given order.
    pub fn from_lengths(lengths: &[u32]) -> Result<Self, JobSetError> {
        Self::new(
            lengths
                .iter()
                .enumerate()
                .map(|(i, &length)| JobSpec {
                    id: JobId(i as u32 + 1),
                    length,
                })
                .collect(),
        )
    }

    pub fn jobs(&self) -> &[JobSpec] {
        &self.jobs
    }

    pub fn get(&self, id: JobId) -> Option<&JobSpec> {
        self.jobs
            .binary_search_by_key(&id, |j| j.id)
            .ok()
            .map(|i| &self.jobs[i])
    }

    /// Number of jobs (`n`).
    pub fn count(&self) -> u32 {
        self.jobs.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    /// Sum of all job lengths (`L`), i.e. the total number of unit tasks.
    pub fn total_len(&self) -> u64 {
        self.jobs.iter().map(|j| u64::from(j.length)).sum()
    }

    /// Length of the longest job (`alpha`); 0 for an empty set.
    pub fn max_len(&self) -> u32 {
        self.jobs.iter().map(|j| j.length).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derives_total_and_max() {
        let js = JobSet::from_lengths(&[1, 1, 1, 7]).unwrap();
        assert_eq!(js.count(), 4);
        assert_eq!(js.total_len(), 10);
        assert_eq!(js.max_len(), 7);
    }

    #[test]
    fn empty_set_is_valid() {
        let js = JobSet::from_lengths(&[]).unwrap();
        assert_eq!(js.count(), 0);
        assert_eq!(js.total_len(), 0);
        assert_eq!(js.max_len(), 0);
    }

    #[test]
    fn rejects_zero_length() {
        assert_eq!(
            JobSet::from_lengths(&[1, 0]).unwrap_err(),
            JobSetError::ZeroLength(JobId(2))
        );
    }

    #[test]
    fn rejects_duplicate_ids() {
        let jobs = vec![
            JobSpec {
                id: JobId(3),
                length: 1,
            },
            JobSpec {
                id: JobId(3),
                length: 2,
            },
        ];
        assert_eq!(
            JobSet::new(jobs).unwrap_err(),
            JobSetError::DuplicateId(JobId(3))
        );
    }

    #[test]
    fn jobs_sorted_by_id() {
        let jobs = vec![
            JobSpec {
                id: JobId(2),
                length: 5,
            },
            JobSpec {
                id: JobId(1),
                length: 1,
            },
        ];
        let js = JobSet::new(jobs).unwrap();
        assert_eq!(js.jobs()[0].id, JobId(1));
        assert_eq!(js.get(JobId(2)).unwrap().length, 5);
    }
}
