//! Simulated worker host.
//!
//! A worker runs exactly one task at a time. A task arriving while another
//! executes suspends the running one; suspended work is only resumed when
//! the scheduler dispatches it again. On receipt of a task the worker starts
//! the client connection handshake straight away so it overlaps the
//! computation.

use std::collections::{HashMap, HashSet};

use crate::error::SimError;
use crate::model::{Micros, SimTime, TaskId, WorkerId};

/// What a dispatch message tells the worker about the job to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Job {
    pub task: TaskId,
    /// Real computation time of the task binary.
    pub actual_exec: Micros,
    /// Progress already made elsewhere (non-zero only after migration).
    pub executed: Micros,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Execution {
    pub job: Job,
    pub resumed_at: SimTime,
    /// Distinguishes this run segment from earlier ones of the same task.
    pub generation: u64,
}

impl Execution {
    fn progress_at(&self, now: SimTime) -> Micros {
        (self.job.executed + now.saturating_since(self.resumed_at)).min(self.job.actual_exec)
    }

    pub fn completes_at(&self) -> SimTime {
        self.resumed_at + (self.job.actual_exec - self.job.executed)
    }
}

/// Effects of a dispatch arriving at a worker.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Received {
    /// Task that was suspended, with its progress.
    pub suspended: Option<(TaskId, Micros)>,
    /// Completion event to schedule: time and generation.
    pub completion: Option<(SimTime, u64)>,
    /// When the client connection became or becomes usable.
    pub conn_ready_at: Option<SimTime>,
    pub resumed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Finished {
    pub task: TaskId,
    /// Actual execution time, excluding time spent suspended.
    pub executed: Micros,
    /// When the result can go out on the client connection.
    pub send_at: SimTime,
}

#[derive(Debug, Clone)]
pub struct WorkerAgent {
    pub id: WorkerId,
    current: Option<Execution>,
    /// Most recently preempted on top.
    suspended: Vec<Job>,
    conn_ready_at: HashMap<TaskId, SimTime>,
    finished: HashSet<TaskId>,
    next_generation: u64,
    context_switch: Micros,
    busy_time: Micros,
}

impl WorkerAgent {
    pub fn new(id: WorkerId, context_switch: Micros) -> Self {
        WorkerAgent {
            id,
            current: None,
            suspended: Vec::new(),
            conn_ready_at: HashMap::new(),
            finished: HashSet::new(),
            next_generation: 0,
            context_switch,
            busy_time: 0,
        }
    }

    pub fn current(&self) -> Option<&Execution> {
        self.current.as_ref()
    }

    pub fn suspended(&self) -> &[Job] {
        &self.suspended
    }

    pub fn is_idle(&self) -> bool {
        self.current.is_none()
    }

    pub fn has_finished(&self, task: TaskId) -> bool {
        self.finished.contains(&task)
    }

    /// Total time spent executing tasks.
    pub fn busy_time(&self) -> Micros {
        self.busy_time
    }

    /// Handle a dispatch. `conn_setup` is the handshake time this worker
    /// would need to reach the task's client; it is only used when no
    /// connection for the task exists yet.
    pub fn on_receive_task(
        &mut self,
        job: Job,
        now: SimTime,
        conn_setup: Micros,
    ) -> Result<Received, SimError> {
        if self.finished.contains(&job.task) {
            // stale resume for work that already completed here
            return Ok(Received::default());
        }
        if self.current.is_some_and(|c| c.job.task == job.task) {
            return Err(SimError::Consistency(format!(
                "worker {} received task {} it is already running",
                self.id, job.task
            )));
        }

        let mut out = Received::default();
        let job = match self.suspended.iter().position(|j| j.task == job.task) {
            Some(pos) => {
                out.resumed = true;
                self.suspended.remove(pos)
            }
            None => job,
        };
        let ready = *self
            .conn_ready_at
            .entry(job.task)
            .or_insert(now + conn_setup);
        out.conn_ready_at = Some(ready);

        let mut switch = 0;
        if let Some(prev) = self.current.take() {
            let executed = prev.progress_at(now);
            self.busy_time += executed - prev.job.executed;
            self.suspended.push(Job {
                executed,
                ..prev.job
            });
            out.suspended = Some((prev.job.task, executed));
            switch = self.context_switch;
        } else if out.resumed {
            switch = self.context_switch;
        }

        let generation = self.next_generation;
        self.next_generation += 1;
        let exec = Execution {
            job,
            resumed_at: now + switch,
            generation,
        };
        out.completion = Some((exec.completes_at(), generation));
        self.current = Some(exec);
        Ok(out)
    }

    /// A completion event fired. Events from superseded run segments are
    /// ignored and yield `None`.
    pub fn on_execution_complete(
        &mut self,
        task: TaskId,
        generation: u64,
        now: SimTime,
    ) -> Result<Option<Finished>, SimError> {
        match self.current {
            Some(exec) if exec.job.task == task && exec.generation == generation => {
                if exec.completes_at() != now {
                    return Err(SimError::Consistency(format!(
                        "task {task} completion fired at {now}, expected {}",
                        exec.completes_at()
                    )));
                }
                let ready = self.conn_ready_at.remove(&task).ok_or_else(|| {
                    SimError::Consistency(format!("no client connection for task {task}"))
                })?;
                self.current = None;
                self.busy_time += exec.job.actual_exec - exec.job.executed;
                self.finished.insert(task);
                Ok(Some(Finished {
                    task,
                    executed: exec.job.actual_exec,
                    send_at: now.max(ready),
                }))
            }
            _ => Ok(None),
        }
    }

    /// Give up a suspended task so another worker can continue it.
    pub fn take_suspended(&mut self, task: TaskId) -> Option<Micros> {
        let pos = self.suspended.iter().position(|j| j.task == task)?;
        self.conn_ready_at.remove(&task);
        Some(self.suspended.remove(pos).executed)
    }

    /// Stop `task` if it is running here, giving up its progress. Its pending
    /// completion event becomes stale.
    pub fn take_running(&mut self, task: TaskId, now: SimTime) -> Option<Micros> {
        let exec = self.current.filter(|c| c.job.task == task)?;
        let executed = exec.progress_at(now);
        self.busy_time += executed - exec.job.executed;
        self.current = None;
        self.conn_ready_at.remove(&task);
        Some(executed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job(id: u64, exec: u64) -> Job {
        Job {
            task: TaskId(id),
            actual_exec: exec,
            executed: 0,
        }
    }

    #[test]
    fn idle_worker_runs_to_completion() {
        let mut w = WorkerAgent::new(WorkerId(0), 0);
        let r = w
            .on_receive_task(job(1, 30_000), SimTime(1_000), 60_000)
            .unwrap();
        assert_eq!(r.completion, Some((SimTime(31_000), 0)));
        assert_eq!(r.conn_ready_at, Some(SimTime(61_000)));
        assert_eq!(r.suspended, None);
    }

    #[test]
    fn result_waits_for_connection() {
        let mut w = WorkerAgent::new(WorkerId(0), 0);
        w.on_receive_task(job(1, 30_000), SimTime(0), 40_000)
            .unwrap();
        let f = w
            .on_execution_complete(TaskId(1), 0, SimTime(30_000))
            .unwrap()
            .unwrap();
        assert_eq!(f.send_at, SimTime(40_000));

        w.on_receive_task(job(2, 30_000), SimTime(30_000), 20_000)
            .unwrap();
        let f = w
            .on_execution_complete(TaskId(2), 1, SimTime(60_000))
            .unwrap()
            .unwrap();
        assert_eq!(f.send_at, SimTime(60_000));
    }

    #[test]
    fn preemption_excludes_suspended_time() {
        let mut w = WorkerAgent::new(WorkerId(0), 0);
        w.on_receive_task(job(1, 30_000), SimTime(0), 0).unwrap();
        let r = w
            .on_receive_task(job(2, 15_000), SimTime(10_000), 0)
            .unwrap();
        assert_eq!(r.suspended, Some((TaskId(1), 10_000)));
        // stale completion of the first segment is ignored
        assert_eq!(
            w.on_execution_complete(TaskId(1), 0, SimTime(30_000))
                .unwrap(),
            None
        );
        w.on_execution_complete(TaskId(2), 1, SimTime(25_000))
            .unwrap()
            .unwrap();
        assert!(w.is_idle());
        assert_eq!(w.suspended().len(), 1);

        let r = w
            .on_receive_task(job(1, 30_000), SimTime(25_000), 999_999)
            .unwrap();
        assert!(r.resumed);
        // keeps the original connection
        assert_eq!(r.conn_ready_at, Some(SimTime(0)));
        assert_eq!(r.completion, Some((SimTime(45_000), 2)));
        let f = w
            .on_execution_complete(TaskId(1), 2, SimTime(45_000))
            .unwrap()
            .unwrap();
        assert_eq!(f.executed, 30_000);
        assert_eq!(w.busy_time(), 45_000);
    }

    #[test]
    fn context_switch_delays_resumed_work() {
        let mut w = WorkerAgent::new(WorkerId(0), 500);
        w.on_receive_task(job(1, 10_000), SimTime(0), 0).unwrap();
        let r = w
            .on_receive_task(job(2, 10_000), SimTime(1_000), 0)
            .unwrap();
        assert_eq!(r.completion, Some((SimTime(11_500), 1)));
    }

    #[test]
    fn duplicate_dispatch_is_an_error() {
        let mut w = WorkerAgent::new(WorkerId(0), 0);
        w.on_receive_task(job(1, 10_000), SimTime(0), 0).unwrap();
        assert!(w.on_receive_task(job(1, 10_000), SimTime(5), 0).is_err());
    }

    #[test]
    fn stale_dispatch_after_finish_is_ignored() {
        let mut w = WorkerAgent::new(WorkerId(0), 0);
        w.on_receive_task(job(1, 10_000), SimTime(0), 0).unwrap();
        w.on_execution_complete(TaskId(1), 0, SimTime(10_000))
            .unwrap()
            .unwrap();
        let r = w
            .on_receive_task(job(1, 10_000), SimTime(10_100), 0)
            .unwrap();
        assert_eq!(r, Received::default());
        assert!(w.is_idle());
    }

    #[test]
    fn migration_hands_over_progress() {
        let mut a = WorkerAgent::new(WorkerId(0), 0);
        a.on_receive_task(job(1, 30_000), SimTime(0), 0).unwrap();
        a.on_receive_task(job(2, 30_000), SimTime(12_000), 0)
            .unwrap();
        assert_eq!(a.take_suspended(TaskId(1)), Some(12_000));
        assert_eq!(a.take_suspended(TaskId(1)), None);
        assert_eq!(a.take_running(TaskId(2), SimTime(20_000)), Some(8_000));
        assert!(a.is_idle());
    }
}
