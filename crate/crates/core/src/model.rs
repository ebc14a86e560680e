//! Domain types shared by every part of the simulator, plus the
//! laxity/density arithmetic the schedulers are built on.
//!
//! All time is kept as integer microseconds. Durations are plain `u64`
//! microsecond counts; signed quantities (laxity) are `i64`.

use std::fmt;
use std::ops::{Add, AddAssign};

use crate::error::SimError;

/// Microseconds since the start of a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

/// A length of time in microseconds.
pub type Micros = u64;

pub const MICROS_PER_MS: u64 = 1_000;
pub const MICROS_PER_SEC: u64 = 1_000_000;

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_ms(ms: u64) -> Self {
        SimTime(ms * MICROS_PER_MS)
    }

    pub fn as_micros(self) -> u64 {
        self.0
    }

    /// Time elapsed since `earlier`, zero if `earlier` is later.
    pub fn saturating_since(self, earlier: SimTime) -> Micros {
        self.0.saturating_sub(earlier.0)
    }

    /// Signed difference `self - other` in microseconds.
    pub fn signed_diff(self, other: SimTime) -> i64 {
        self.0 as i64 - other.0 as i64
    }

    /// Shift by a signed offset, saturating at zero.
    pub fn offset(self, delta: i64) -> SimTime {
        if delta >= 0 {
            SimTime(self.0.saturating_add(delta as u64))
        } else {
            SimTime(self.0.saturating_sub(delta.unsigned_abs()))
        }
    }
}

impl Add<Micros> for SimTime {
    type Output = SimTime;

    fn add(self, rhs: Micros) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl AddAssign<Micros> for SimTime {
    fn add_assign(&mut self, rhs: Micros) {
        self.0 += rhs;
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClientId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WorkerId(pub u32);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for WorkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Task parameters shipped with the task. Only the size matters to timing.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Params {
    pub bytes: Vec<u8>,
    /// Size of the result the worker sends back to the client.
    pub result_bytes: u64,
}

impl Params {
    pub fn size(&self) -> u64 {
        self.bytes.len() as u64
    }
}

/// An offloaded unit of work as submitted by a client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub id: TaskId,
    pub client: ClientId,
    /// Fixed by the client at creation.
    pub absolute_deadline: SimTime,
    pub initial_relative_deadline: Micros,
    /// Handshake time the client measured towards the scheduler.
    pub connection_setup_time: Micros,
    pub wcet: Micros,
    pub elapsed_execution: Micros,
    pub params: Params,
}

impl Task {
    pub fn new(
        id: TaskId,
        client: ClientId,
        created_at: SimTime,
        relative_deadline: Micros,
        connection_setup_time: Micros,
        wcet: Micros,
    ) -> Result<Self, SimError> {
        if relative_deadline == 0 {
            return Err(SimError::InvalidTask(format!(
                "task {id}: relative deadline must be positive"
            )));
        }
        if wcet == 0 {
            return Err(SimError::InvalidTask(format!(
                "task {id}: wcet must be positive"
            )));
        }
        Ok(Task {
            id,
            client,
            absolute_deadline: created_at + relative_deadline,
            initial_relative_deadline: relative_deadline,
            connection_setup_time,
            wcet,
            elapsed_execution: 0,
            params: Params::default(),
        })
    }

    /// Record progress, clamped so that `elapsed_execution <= wcet` holds.
    pub fn set_elapsed(&mut self, elapsed: Micros) {
        self.elapsed_execution = elapsed.min(self.wcet);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Rejected,
    CompletedOnTime,
    MissedDeadline,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Rejected => "rejected",
            Verdict::CompletedOnTime => "on_time",
            Verdict::MissedDeadline => "missed",
        }
    }

    /// Classify a result that reached the client at `arrival`. The deadline
    /// itself still counts as met.
    pub fn for_result(arrival: SimTime, deadline: SimTime) -> Verdict {
        if arrival <= deadline {
            Verdict::CompletedOnTime
        } else {
            Verdict::MissedDeadline
        }
    }
}

/// What eventually happened to one submitted task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskOutcome {
    pub task_id: TaskId,
    pub verdict: Verdict,
    pub submit_time: SimTime,
    pub decision_time: SimTime,
    /// Arrival of the result at the client; `None` for rejections.
    pub completion_time: Option<SimTime>,
}

/// `T_d - now - (wcet - elapsed)`. Negative once the task can no longer
/// make its deadline.
pub fn laxity(task: &Task, now: SimTime) -> i64 {
    laxity_against(task, task.absolute_deadline, now)
}

pub(crate) fn laxity_against(task: &Task, deadline: SimTime, now: SimTime) -> i64 {
    deadline.signed_diff(now) - remaining_wcet(task) as i64
}

/// Remaining WCET over time to deadline.
pub fn density(task: &Task, now: SimTime) -> Result<f64, SimError> {
    density_against(task, task.absolute_deadline, now)
}

pub(crate) fn density_against(
    task: &Task,
    deadline: SimTime,
    now: SimTime,
) -> Result<f64, SimError> {
    if deadline <= now {
        return Err(SimError::DeadlinePassed {
            task: task.id,
            deadline,
            now,
        });
    }
    Ok(remaining_wcet(task) as f64 / (deadline.0 - now.0) as f64)
}

pub fn remaining_wcet(task: &Task) -> Micros {
    task.wcet.saturating_sub(task.elapsed_execution)
}
