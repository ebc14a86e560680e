//! Latency-aware partitioned EDF.
//!
//! Every submitted task first has its deadline pulled forward by the
//! estimated result-delivery delay (scaled by the uncertainty factor). The
//! adjusted task is then tried against a copy of each worker's queue: the
//! copy is scheduled with EDF and any predicted miss eliminates the worker.
//! Among the surviving workers the fit heuristic picks one by total queue
//! density. Tasks that fit nowhere are rejected straight away so the client
//! can fall back early.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::error::SimError;
use crate::model::{density_against, remaining_wcet, Micros, SimTime, Task, TaskId, WorkerId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Heuristic {
    FirstFit,
    BestFit,
    WorstFit,
}

impl Heuristic {
    pub fn as_str(self) -> &'static str {
        match self {
            Heuristic::FirstFit => "first_fit",
            Heuristic::BestFit => "best_fit",
            Heuristic::WorstFit => "worst_fit",
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Heuristic {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "first_fit" | "firstfit" | "first" => Ok(Heuristic::FirstFit),
            "best_fit" | "bestfit" | "best" => Ok(Heuristic::BestFit),
            "worst_fit" | "worstfit" | "worst" => Ok(Heuristic::WorstFit),
            other => Err(SimError::Config(format!("unknown heuristic `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerConfig {
    pub uncertainty_factor: f64,
    pub heuristic: Heuristic,
    pub num_workers: u32,
    /// Estimated one-way scheduler→worker delay. The queue simulation charges
    /// it once for every dispatch and once for every completion notice.
    pub dispatch_overhead: Micros,
}

impl SchedulerConfig {
    pub fn new(uncertainty_factor: f64, heuristic: Heuristic, num_workers: u32) -> Self {
        SchedulerConfig {
            uncertainty_factor,
            heuristic,
            num_workers,
            dispatch_overhead: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.uncertainty_factor.is_finite() && self.uncertainty_factor >= 0.0) {
            return Err(SimError::Config(format!(
                "uncertainty factor must be finite and non-negative, got {}",
                self.uncertainty_factor
            )));
        }
        if self.num_workers == 0 {
            return Err(SimError::Config("at least one worker is required".into()));
        }
        Ok(())
    }
}

/// A task together with the deadline the scheduler actually plans against.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedTask {
    pub task: Task,
    pub adjusted_deadline: SimTime,
    /// Client→scheduler transit, used as the estimate for worker→client.
    pub expected_delay: Micros,
    pub adjusted_delay: Micros,
}

impl AdjustedTask {
    /// EDF priority key; lower sorts first.
    pub fn edf_key(&self) -> (SimTime, TaskId) {
        (self.adjusted_deadline, self.task.id)
    }
}

/// Pull the client's deadline forward by the scaled expected delivery delay.
pub fn adjust_deadline(task: Task, now: SimTime, uncertainty_factor: f64) -> AdjustedTask {
    let time_to_deadline = task.absolute_deadline.signed_diff(now);
    let expected = (task.initial_relative_deadline as i64 - time_to_deadline).max(0) as u64;
    let adjusted_delay = if task.connection_setup_time > task.wcet {
        expected + task.connection_setup_time - task.wcet
    } else {
        expected
    };
    // f64::round is half-away-from-zero
    let shift = (uncertainty_factor * adjusted_delay as f64).round() as i64;
    let adjusted_deadline = task.absolute_deadline.offset(-shift);
    AdjustedTask {
        task,
        adjusted_deadline,
        expected_delay: expected,
        adjusted_delay,
    }
}

/// The time left to the adjusted deadline must strictly exceed the
/// remaining WCET.
pub fn admission_precheck(adj: &AdjustedTask, now: SimTime) -> bool {
    adj.adjusted_deadline.signed_diff(now) > remaining_wcet(&adj.task) as i64
}

/// The task a worker is currently executing, as the scheduler sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningTask {
    pub adjusted: AdjustedTask,
    /// When the dispatch message left the scheduler.
    pub dispatched_at: SimTime,
    pub elapsed_at_dispatch: Micros,
}

impl RunningTask {
    /// Progress assumed to have been made by `now`: execution starts one
    /// dispatch overhead after the send.
    pub fn estimated_elapsed(&self, now: SimTime, overhead: Micros) -> Micros {
        let started = self.dispatched_at + overhead;
        (self.elapsed_at_dispatch + now.saturating_since(started)).min(self.adjusted.task.wcet)
    }

    fn planned_finish(&self, now: SimTime, overhead: Micros) -> SimTime {
        let remaining = self
            .adjusted
            .task
            .wcet
            .saturating_sub(self.elapsed_at_dispatch);
        (self.dispatched_at + overhead + remaining).max(now)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerQueueState {
    pub worker: WorkerId,
    pub running: Option<RunningTask>,
    /// Sorted by adjusted deadline, ties by task id.
    pub pending: Vec<AdjustedTask>,
}

/// Predicted completion of one task in a simulated queue schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlannedFinish {
    pub task: TaskId,
    pub finish: SimTime,
    pub deadline: SimTime,
}

impl WorkerQueueState {
    pub fn new(worker: WorkerId) -> Self {
        WorkerQueueState {
            worker,
            running: None,
            pending: Vec::new(),
        }
    }

    pub fn is_idle(&self) -> bool {
        self.running.is_none()
    }

    pub fn len(&self) -> usize {
        self.pending.len() + usize::from(self.running.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task_ids(&self) -> impl Iterator<Item = TaskId> + '_ {
        self.running
            .iter()
            .map(|r| r.adjusted.task.id)
            .chain(self.pending.iter().map(|a| a.task.id))
    }

    fn insert_pending(&mut self, adj: AdjustedTask) {
        let key = adj.edf_key();
        let pos = self.pending.partition_point(|p| p.edf_key() < key);
        self.pending.insert(pos, adj);
    }

    fn remove_pending(&mut self, id: TaskId) -> Option<AdjustedTask> {
        let pos = self.pending.iter().position(|a| a.task.id == id)?;
        Some(self.pending.remove(pos))
    }

    fn start_head(&mut self, now: SimTime) -> Option<&RunningTask> {
        debug_assert!(self.running.is_none());
        if self.pending.is_empty() {
            return None;
        }
        let adjusted = self.pending.remove(0);
        let elapsed = adjusted.task.elapsed_execution;
        self.running = Some(RunningTask {
            adjusted,
            dispatched_at: now,
            elapsed_at_dispatch: elapsed,
        });
        self.running.as_ref()
    }

    /// Checks the ordering invariants of this queue.
    pub fn check(&self) -> Result<(), SimError> {
        if self.running.is_none() && !self.pending.is_empty() {
            return Err(SimError::Consistency(format!(
                "worker {} idle with {} pending tasks",
                self.worker,
                self.pending.len()
            )));
        }
        if self
            .pending
            .windows(2)
            .any(|w| w[0].edf_key() >= w[1].edf_key())
        {
            return Err(SimError::Consistency(format!(
                "worker {} pending queue out of EDF order",
                self.worker
            )));
        }
        for adj in self
            .pending
            .iter()
            .chain(self.running.iter().map(|r| &r.adjusted))
        {
            if adj.task.elapsed_execution > adj.task.wcet {
                return Err(SimError::Consistency(format!(
                    "task {} elapsed exceeds wcet",
                    adj.task.id
                )));
            }
        }
        Ok(())
    }
}

/// Simulate single-worker preemptive EDF over the queue plus `candidate`,
/// all treated as released at `now`. Returns predicted finish times in
/// execution order iff nothing misses its adjusted deadline.
pub fn feasible_with(
    queue: &WorkerQueueState,
    candidate: &AdjustedTask,
    now: SimTime,
    overhead: Micros,
) -> Option<Vec<PlannedFinish>> {
    if !admission_precheck(candidate, now) {
        return None;
    }

    struct Item<'a> {
        adj: &'a AdjustedTask,
        remaining: Micros,
        running: Option<&'a RunningTask>,
    }

    let mut items: Vec<Item<'_>> = Vec::with_capacity(queue.pending.len() + 2);
    if let Some(run) = &queue.running {
        let elapsed = run.estimated_elapsed(now, overhead);
        items.push(Item {
            adj: &run.adjusted,
            remaining: run.adjusted.task.wcet - elapsed,
            running: Some(run),
        });
    }
    items.extend(queue.pending.iter().map(|adj| Item {
        adj,
        remaining: remaining_wcet(&adj.task),
        running: None,
    }));
    items.push(Item {
        adj: candidate,
        remaining: remaining_wcet(&candidate.task),
        running: None,
    });
    items.sort_by_key(|i| i.adj.edf_key());

    let mut plan = Vec::with_capacity(items.len());
    let mut free_at = now;
    for (idx, item) in items.iter().enumerate() {
        let finish = match item.running {
            // still running if it heads the order
            Some(run) if idx == 0 => run.planned_finish(now, overhead),
            _ => free_at + overhead + item.remaining,
        };
        if finish > item.adj.adjusted_deadline {
            return None;
        }
        plan.push(PlannedFinish {
            task: item.adj.task.id,
            finish,
            deadline: item.adj.adjusted_deadline,
        });
        free_at = finish + overhead;
    }
    Some(plan)
}

/// Sum of task densities over the queue and the candidate, measured
/// against adjusted deadlines.
pub fn queue_density(
    queue: &WorkerQueueState,
    candidate: &AdjustedTask,
    now: SimTime,
    overhead: Micros,
) -> Result<f64, SimError> {
    let mut total = 0.0;
    if let Some(run) = &queue.running {
        let mut t = run.adjusted.task.clone();
        t.set_elapsed(run.estimated_elapsed(now, overhead));
        total += density_against(&t, run.adjusted.adjusted_deadline, now)?;
    }
    for adj in queue.pending.iter().chain(std::iter::once(candidate)) {
        total += density_against(&adj.task, adj.adjusted_deadline, now)?;
    }
    Ok(total)
}

/// Pick a worker among the feasible ones. Ties go to the lowest id.
pub fn select_worker(feasible: &BTreeMap<WorkerId, f64>, heuristic: Heuristic) -> Option<WorkerId> {
    let by = |better: fn(f64, f64) -> bool| {
        feasible
            .iter()
            .fold(None::<(WorkerId, f64)>, |best, (&w, &d)| match best {
                Some((_, bd)) if !better(d, bd) => best,
                _ => Some((w, d)),
            })
            .map(|(w, _)| w)
    };
    match heuristic {
        Heuristic::FirstFit => feasible.keys().next().copied(),
        Heuristic::BestFit => by(|d, best| d.total_cmp(&best) == Ordering::Greater),
        Heuristic::WorstFit => by(|d, best| d.total_cmp(&best) == Ordering::Less),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectReason {
    PastAdjustedDeadline,
    NoFeasibleWorker,
    /// Reference scheduler: less time to the deadline than the WCET.
    InsufficientTime,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::PastAdjustedDeadline => "past_adjusted_deadline",
            RejectReason::NoFeasibleWorker => "no_feasible_worker",
            RejectReason::InsufficientTime => "insufficient_time",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    /// `worker` is `None` when the task waits in a global queue.
    Accept {
        worker: Option<WorkerId>,
    },
    Reject(RejectReason),
}

impl Decision {
    pub fn is_accept(&self) -> bool {
        matches!(self, Decision::Accept { .. })
    }
}

/// Instruction from a scheduler to the rest of the system.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Send `task` (carrying the scheduler's view of its progress) to
    /// `worker`. If the worker is busy the arrival preempts its current task.
    Dispatch {
        worker: WorkerId,
        task: Task,
        preempts: Option<TaskId>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Submission {
    pub decision: Decision,
    pub actions: Vec<Action>,
}

impl Submission {
    fn reject(reason: RejectReason) -> Self {
        Submission {
            decision: Decision::Reject(reason),
            actions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchedulerKind {
    LatencyAware,
    Reference,
}

impl SchedulerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SchedulerKind::LatencyAware => "latency_aware",
            SchedulerKind::Reference => "reference",
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchedulerKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "latency_aware" | "partitioned" => Ok(SchedulerKind::LatencyAware),
            "reference" | "global" | "baseline" => Ok(SchedulerKind::Reference),
            other => Err(SimError::Config(format!("unknown scheduler `{other}`"))),
        }
    }
}

/// Event-driven interface shared by both schedulers.
pub trait Scheduler {
    fn kind(&self) -> SchedulerKind;

    fn on_submission(&mut self, task: Task, now: SimTime) -> Result<Submission, SimError>;

    /// A worker reported that `task` finished.
    fn on_completion(
        &mut self,
        worker: WorkerId,
        task: TaskId,
        now: SimTime,
    ) -> Result<Vec<Action>, SimError>;

    /// A worker reported the progress `elapsed` of a task it suspended.
    fn on_preempted(
        &mut self,
        worker: WorkerId,
        task: TaskId,
        elapsed: Micros,
        now: SimTime,
    ) -> Result<(), SimError>;

    /// Every accepted task the scheduler still tracks, with the worker it is
    /// bound to (`None` for a global queue).
    fn tracked_tasks(&self) -> Vec<(TaskId, Option<WorkerId>)>;

    fn check_invariants(&self) -> Result<(), SimError>;
}

#[derive(Debug, Clone)]
pub struct PartitionedScheduler {
    config: SchedulerConfig,
    queues: Vec<WorkerQueueState>,
}

impl PartitionedScheduler {
    pub fn new(config: SchedulerConfig) -> Result<Self, SimError> {
        config.validate()?;
        let queues = (0..config.num_workers)
            .map(|w| WorkerQueueState::new(WorkerId(w)))
            .collect();
        Ok(PartitionedScheduler { config, queues })
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn queues(&self) -> &[WorkerQueueState] {
        &self.queues
    }

    pub fn queue(&self, worker: WorkerId) -> Option<&WorkerQueueState> {
        self.queues.get(worker.0 as usize)
    }

    /// Mutable access for building scheduler states directly in tests and
    /// tools; the queue invariants are the caller's responsibility.
    pub fn queue_mut(&mut self, worker: WorkerId) -> Option<&mut WorkerQueueState> {
        self.queues.get_mut(worker.0 as usize)
    }

    pub fn set_uncertainty_factor(&mut self, u: f64) {
        self.config.uncertainty_factor = u;
    }

    /// Which workers could take `adj` now, with their resulting density.
    pub fn feasible_workers(&self, adj: &AdjustedTask, now: SimTime) -> BTreeMap<WorkerId, f64> {
        let overhead = self.config.dispatch_overhead;
        let mut feasible = BTreeMap::new();
        for queue in &self.queues {
            if feasible_with(queue, adj, now, overhead).is_none() {
                continue;
            }
            // feasible_with already guarantees every deadline lies ahead
            let density = queue_density(queue, adj, now, overhead).unwrap_or(f64::INFINITY);
            feasible.insert(queue.worker, density);
            if self.config.heuristic == Heuristic::FirstFit {
                break;
            }
        }
        feasible
    }

    fn queue_index(&self, worker: WorkerId) -> Result<usize, SimError> {
        let idx = worker.0 as usize;
        if idx < self.queues.len() {
            Ok(idx)
        } else {
            Err(SimError::UnknownWorker(worker))
        }
    }
}

impl Scheduler for PartitionedScheduler {
    fn kind(&self) -> SchedulerKind {
        SchedulerKind::LatencyAware
    }

    fn on_submission(&mut self, task: Task, now: SimTime) -> Result<Submission, SimError> {
        let adj = adjust_deadline(task, now, self.config.uncertainty_factor);
        if !admission_precheck(&adj, now) {
            return Ok(Submission::reject(RejectReason::PastAdjustedDeadline));
        }
        let feasible = self.feasible_workers(&adj, now);
        let Some(worker) = select_worker(&feasible, self.config.heuristic) else {
            return Ok(Submission::reject(RejectReason::NoFeasibleWorker));
        };

        let overhead = self.config.dispatch_overhead;
        let queue = &mut self.queues[worker.0 as usize];
        let mut actions = Vec::new();
        match queue.running.take() {
            None => {
                queue.insert_pending(adj);
                let run = queue.start_head(now).expect("just inserted");
                actions.push(Action::Dispatch {
                    worker,
                    task: run.adjusted.task.clone(),
                    preempts: None,
                });
            }
            Some(run) if adj.edf_key() < run.adjusted.edf_key() => {
                let mut preempted = run.adjusted.clone();
                preempted
                    .task
                    .set_elapsed(run.estimated_elapsed(now, overhead));
                let preempted_id = preempted.task.id;
                queue.insert_pending(preempted);
                queue.insert_pending(adj);
                let head = queue.start_head(now).expect("just inserted");
                actions.push(Action::Dispatch {
                    worker,
                    task: head.adjusted.task.clone(),
                    preempts: Some(preempted_id),
                });
            }
            Some(run) => {
                queue.running = Some(run);
                queue.insert_pending(adj);
            }
        }
        Ok(Submission {
            decision: Decision::Accept {
                worker: Some(worker),
            },
            actions,
        })
    }

    fn on_completion(
        &mut self,
        worker: WorkerId,
        task: TaskId,
        now: SimTime,
    ) -> Result<Vec<Action>, SimError> {
        let idx = self.queue_index(worker)?;
        let queue = &mut self.queues[idx];
        match &queue.running {
            Some(run) if run.adjusted.task.id == task => {
                queue.running = None;
                Ok(queue
                    .start_head(now)
                    .map(|run| Action::Dispatch {
                        worker,
                        task: run.adjusted.task.clone(),
                        preempts: None,
                    })
                    .into_iter()
                    .collect())
            }
            _ => {
                // Preempted here while the worker had in fact already
                // finished it; the completion notice was in flight.
                if queue.remove_pending(task).is_some() {
                    Ok(Vec::new())
                } else {
                    Err(SimError::Consistency(format!(
                        "completion of task {task} not queued on worker {worker}"
                    )))
                }
            }
        }
    }

    fn on_preempted(
        &mut self,
        worker: WorkerId,
        task: TaskId,
        elapsed: Micros,
        _now: SimTime,
    ) -> Result<(), SimError> {
        let idx = self.queue_index(worker)?;
        let queue = &mut self.queues[idx];
        if let Some(adj) = queue.pending.iter_mut().find(|a| a.task.id == task) {
            adj.task.set_elapsed(elapsed);
        } else if let Some(run) = queue
            .running
            .as_mut()
            .filter(|r| r.adjusted.task.id == task)
        {
            // resumed before the report arrived
            run.elapsed_at_dispatch = elapsed.min(run.adjusted.task.wcet);
            run.adjusted.task.set_elapsed(elapsed);
        }
        // otherwise it already completed; nothing to update
        Ok(())
    }

    fn tracked_tasks(&self) -> Vec<(TaskId, Option<WorkerId>)> {
        self.queues
            .iter()
            .flat_map(|q| q.task_ids().map(move |id| (id, Some(q.worker))))
            .collect()
    }

    fn check_invariants(&self) -> Result<(), SimError> {
        let mut seen = BTreeSet::new();
        for q in &self.queues {
            q.check()?;
            for id in q.task_ids() {
                if !seen.insert(id) {
                    return Err(SimError::Consistency(format!("task {id} queued twice")));
                }
            }
        }
        Ok(())
    }
}
