use thiserror::Error;

use crate::model::{SimTime, TaskId, WorkerId};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid task: {0}")]
    InvalidTask(String),

    #[error("task {task}: deadline {deadline} is not after {now}")]
    DeadlinePassed {
        task: TaskId,
        deadline: SimTime,
        now: SimTime,
    },

    #[error("event posted after the run finished")]
    QueueClosed,

    #[error("unknown worker {0}")]
    UnknownWorker(WorkerId),

    /// Simulation state disagrees with itself; the run is aborted.
    #[error("consistency violation: {0}")]
    Consistency(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed csv at line {line}: {reason}")]
    Csv { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
