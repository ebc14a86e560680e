//! Reference scheduler: global EDF with preemption and migration, original
//! client deadlines, and the weakest possible admission test.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::SimError;
use crate::model::{Micros, SimTime, Task, TaskId, WorkerId};
use crate::scheduler::{Action, Decision, RejectReason, Scheduler, SchedulerKind, Submission};

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalRunning {
    pub task: Task,
    pub dispatched_at: SimTime,
    pub elapsed_at_dispatch: Micros,
}

impl GlobalRunning {
    fn estimated_elapsed(&self, now: SimTime) -> Micros {
        (self.elapsed_at_dispatch + now.saturating_since(self.dispatched_at)).min(self.task.wcet)
    }
}

fn key(task: &Task) -> (SimTime, TaskId) {
    (task.absolute_deadline, task.id)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalQueueState {
    /// Accepted tasks not currently executing, in EDF order.
    pub pending: Vec<Task>,
    pub running: BTreeMap<WorkerId, GlobalRunning>,
}

#[derive(Debug, Clone)]
pub struct GlobalEdfScheduler {
    num_workers: u32,
    state: GlobalQueueState,
}

impl GlobalEdfScheduler {
    pub fn new(num_workers: u32) -> Result<Self, SimError> {
        if num_workers == 0 {
            return Err(SimError::Config("at least one worker is required".into()));
        }
        Ok(GlobalEdfScheduler {
            num_workers,
            state: GlobalQueueState {
                pending: Vec::new(),
                running: BTreeMap::new(),
            },
        })
    }

    pub fn state(&self) -> &GlobalQueueState {
        &self.state
    }

    fn insert_pending(&mut self, task: Task) {
        let k = key(&task);
        let pos = self.state.pending.partition_point(|t| key(t) < k);
        self.state.pending.insert(pos, task);
    }

    fn idle_worker(&self) -> Option<WorkerId> {
        (0..self.num_workers)
            .map(WorkerId)
            .find(|w| !self.state.running.contains_key(w))
    }

    fn start(
        &mut self,
        worker: WorkerId,
        task: Task,
        now: SimTime,
        preempts: Option<TaskId>,
    ) -> Action {
        self.state.running.insert(
            worker,
            GlobalRunning {
                elapsed_at_dispatch: task.elapsed_execution,
                task: task.clone(),
                dispatched_at: now,
            },
        );
        Action::Dispatch {
            worker,
            task,
            preempts,
        }
    }
}

impl Scheduler for GlobalEdfScheduler {
    fn kind(&self) -> SchedulerKind {
        SchedulerKind::Reference
    }

    fn on_submission(&mut self, task: Task, now: SimTime) -> Result<Submission, SimError> {
        if task.absolute_deadline.signed_diff(now) < task.wcet as i64 {
            return Ok(Submission {
                decision: Decision::Reject(RejectReason::InsufficientTime),
                actions: Vec::new(),
            });
        }

        if let Some(worker) = self.idle_worker() {
            let action = self.start(worker, task, now, None);
            return Ok(Submission {
                decision: Decision::Accept {
                    worker: Some(worker),
                },
                actions: vec![action],
            });
        }

        // every worker busy: displace the latest deadline if we beat it
        let (victim_worker, victim_key) = self
            .state
            .running
            .iter()
            .map(|(w, r)| (*w, key(&r.task)))
            .max_by_key(|(_, k)| *k)
            .expect("all workers busy");
        if key(&task) < victim_key {
            let victim = self.state.running.remove(&victim_worker).expect("present");
            let mut preempted = victim.task.clone();
            preempted.set_elapsed(victim.estimated_elapsed(now));
            let preempted_id = preempted.id;
            self.insert_pending(preempted);
            let action = self.start(victim_worker, task, now, Some(preempted_id));
            Ok(Submission {
                decision: Decision::Accept {
                    worker: Some(victim_worker),
                },
                actions: vec![action],
            })
        } else {
            self.insert_pending(task);
            Ok(Submission {
                decision: Decision::Accept { worker: None },
                actions: Vec::new(),
            })
        }
    }

    fn on_completion(
        &mut self,
        worker: WorkerId,
        task: TaskId,
        now: SimTime,
    ) -> Result<Vec<Action>, SimError> {
        if worker.0 >= self.num_workers {
            return Err(SimError::UnknownWorker(worker));
        }
        // Normally the reporting worker; after a migration that raced the
        // completion it is the slot the task was re-dispatched to.
        let slot = if self
            .state
            .running
            .get(&worker)
            .is_some_and(|r| r.task.id == task)
        {
            Some(worker)
        } else {
            self.state
                .running
                .iter()
                .find(|(_, r)| r.task.id == task)
                .map(|(w, _)| *w)
        };
        match slot {
            Some(slot) => {
                self.state.running.remove(&slot);
                if self.state.pending.is_empty() {
                    return Ok(Vec::new());
                }
                let next = self.state.pending.remove(0);
                Ok(vec![self.start(slot, next, now, None)])
            }
            None => {
                if let Some(pos) = self.state.pending.iter().position(|t| t.id == task) {
                    // finished before the preemption reached the worker
                    self.state.pending.remove(pos);
                    Ok(Vec::new())
                } else {
                    Err(SimError::Consistency(format!(
                        "completion of task {task} on worker {worker} not tracked"
                    )))
                }
            }
        }
    }

    fn on_preempted(
        &mut self,
        _worker: WorkerId,
        task: TaskId,
        elapsed: Micros,
        _now: SimTime,
    ) -> Result<(), SimError> {
        if let Some(t) = self.state.pending.iter_mut().find(|t| t.id == task) {
            t.set_elapsed(elapsed);
        } else if let Some(r) = self.state.running.values_mut().find(|r| r.task.id == task) {
            r.elapsed_at_dispatch = elapsed.min(r.task.wcet);
            r.task.set_elapsed(elapsed);
        }
        Ok(())
    }

    fn tracked_tasks(&self) -> Vec<(TaskId, Option<WorkerId>)> {
        self.state
            .running
            .iter()
            .map(|(w, r)| (r.task.id, Some(*w)))
            .chain(self.state.pending.iter().map(|t| (t.id, None)))
            .collect()
    }

    fn check_invariants(&self) -> Result<(), SimError> {
        let s = &self.state;
        if s.pending.windows(2).any(|w| key(&w[0]) >= key(&w[1])) {
            return Err(SimError::Consistency(
                "global queue out of EDF order".into(),
            ));
        }
        if !s.pending.is_empty() && s.running.len() < self.num_workers as usize {
            return Err(SimError::Consistency("idle worker while tasks wait".into()));
        }
        if let (Some(latest_running), Some(head)) = (
            s.running.values().map(|r| key(&r.task)).max(),
            s.pending.first(),
        ) {
            if key(head) < latest_running {
                return Err(SimError::Consistency(format!(
                    "waiting task {} has an earlier deadline than a running one",
                    head.id
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for (id, _) in self.tracked_tasks() {
            if !seen.insert(id) {
                return Err(SimError::Consistency(format!("task {id} tracked twice")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClientId;

    fn task(id: u64, now: SimTime, to_deadline: u64, wcet: u64) -> Task {
        Task::new(TaskId(id), ClientId(0), now, to_deadline, 0, wcet).unwrap()
    }

    #[test]
    fn admission_boundary() {
        let mut s = GlobalEdfScheduler::new(1).unwrap();
        let now = SimTime(0);
        assert!(s
            .on_submission(task(1, now, 100_000, 100_000), now)
            .unwrap()
            .decision
            .is_accept());
        let d = s.on_submission(task(2, now, 99_999, 100_000), now).unwrap();
        assert_eq!(d.decision, Decision::Reject(RejectReason::InsufficientTime));
    }

    #[test]
    fn new_earliest_deadline_preempts_latest_running() {
        let mut s = GlobalEdfScheduler::new(2).unwrap();
        let now = SimTime(0);
        s.on_submission(task(1, now, 200_000, 100_000), now)
            .unwrap();
        s.on_submission(task(2, now, 300_000, 100_000), now)
            .unwrap();
        let later = SimTime(10_000);
        let d = s
            .on_submission(task(3, later, 100_000, 50_000), later)
            .unwrap();
        assert_eq!(
            d.decision,
            Decision::Accept {
                worker: Some(WorkerId(1))
            }
        );
        assert!(matches!(
            d.actions.as_slice(),
            [Action::Dispatch {
                worker: WorkerId(1),
                preempts: Some(TaskId(2)),
                ..
            }]
        ));
        assert_eq!(s.state().pending[0].id, TaskId(2));
        assert_eq!(s.state().pending[0].elapsed_execution, 10_000);
        s.check_invariants().unwrap();
    }

    #[test]
    fn late_deadline_waits_in_global_queue() {
        let mut s = GlobalEdfScheduler::new(1).unwrap();
        let now = SimTime(0);
        s.on_submission(task(1, now, 200_000, 100_000), now)
            .unwrap();
        let d = s
            .on_submission(task(2, now, 900_000, 100_000), now)
            .unwrap();
        assert_eq!(d.decision, Decision::Accept { worker: None });
        assert!(d.actions.is_empty());
        s.check_invariants().unwrap();
    }

    #[test]
    fn completion_dispatches_earliest_waiting_anywhere() {
        let mut s = GlobalEdfScheduler::new(2).unwrap();
        let now = SimTime(0);
        s.on_submission(task(1, now, 500_000, 100_000), now)
            .unwrap();
        s.on_submission(task(2, now, 600_000, 100_000), now)
            .unwrap();
        s.on_submission(task(3, now, 800_000, 100_000), now)
            .unwrap();
        s.on_submission(task(4, now, 700_000, 100_000), now)
            .unwrap();
        // worker 1 frees first: task 4 (earlier than 3) migrates onto it
        let a = s
            .on_completion(WorkerId(1), TaskId(2), SimTime(30_000))
            .unwrap();
        assert!(
            matches!(a.as_slice(), [Action::Dispatch { worker: WorkerId(1), task, .. }] if task.id == TaskId(4))
        );
        let a = s
            .on_completion(WorkerId(0), TaskId(1), SimTime(40_000))
            .unwrap();
        assert!(
            matches!(a.as_slice(), [Action::Dispatch { worker: WorkerId(0), task, .. }] if task.id == TaskId(3))
        );
        assert!(s
            .on_completion(WorkerId(0), TaskId(3), SimTime(90_000))
            .unwrap()
            .is_empty());
        assert!(matches!(
            s.on_completion(WorkerId(0), TaskId(3), SimTime(90_000)),
            Err(SimError::Consistency(_))
        ));
    }

    #[test]
    fn preempted_task_resumes_with_reported_progress() {
        let mut s = GlobalEdfScheduler::new(1).unwrap();
        s.on_submission(task(1, SimTime(0), 400_000, 100_000), SimTime(0))
            .unwrap();
        s.on_submission(task(2, SimTime(5_000), 150_000, 100_000), SimTime(5_000))
            .unwrap();
        s.on_preempted(WorkerId(0), TaskId(1), 4_800, SimTime(5_200))
            .unwrap();
        let a = s
            .on_completion(WorkerId(0), TaskId(2), SimTime(40_000))
            .unwrap();
        match a.as_slice() {
            [Action::Dispatch { task, .. }] => assert_eq!(task.elapsed_execution, 4_800),
            other => panic!("unexpected {other:?}"),
        }
    }
}
