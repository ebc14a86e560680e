//! One simulated deployment: clients, the scheduler, workers and the links
//! between them, driven by a single event queue.

use std::collections::{BTreeMap, BTreeSet};

use crate::baseline::GlobalEdfScheduler;
use crate::client::{ClientAgent, ClientConfig};
use crate::error::SimError;
use crate::harness::ScenarioConfig;
use crate::model::{ClientId, Micros, SimTime, Task, TaskId, TaskOutcome, Verdict, WorkerId};
use crate::netsim::{EventQueue, LinkModel, SimRng};
use crate::scheduler::{
    Action, Decision, PartitionedScheduler, Scheduler, SchedulerConfig, SchedulerKind,
};
use crate::worker::{Job, WorkerAgent};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Event {
    ClientSubmit(ClientId),
    TaskAtScheduler(TaskId),
    RejectAtClient(TaskId),
    DispatchAtWorker {
        worker: WorkerId,
        task: TaskId,
    },
    ExecutionDone {
        worker: WorkerId,
        task: TaskId,
        generation: u64,
    },
    CompletionAtScheduler {
        worker: WorkerId,
        task: TaskId,
    },
    PreemptReportAtScheduler {
        worker: WorkerId,
        task: TaskId,
        executed: Micros,
    },
    ResultAtClient(TaskId),
}

/// What happened, for event-level inspection of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Submitted,
    Accepted,
    Rejected,
    /// Scheduler sent the task to a worker.
    Dispatched,
    /// Worker began or resumed executing.
    Started,
    /// Worker suspended it with this much progress.
    Suspended {
        executed: Micros,
    },
    /// Worker finished computing it.
    Finished {
        executed: Micros,
    },
    Delivered {
        verdict: Verdict,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: SimTime,
    pub task: TaskId,
    pub worker: Option<WorkerId>,
    pub kind: TraceKind,
}

/// Everything recorded about one submitted task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRecord {
    pub task: Task,
    pub actual_exec: Micros,
    pub submit: SimTime,
    pub at_scheduler: Option<SimTime>,
    pub decision: Option<(SimTime, Decision)>,
    /// Worker that first received the task.
    pub worker: Option<WorkerId>,
    pub dispatches: u32,
    pub preemptions: u32,
    pub finished_exec: Option<Micros>,
    /// When the result or rejection reached the client.
    pub resolved_at: Option<SimTime>,
    pub verdict: Option<Verdict>,
}

impl TaskRecord {
    pub fn outcome(&self) -> Option<TaskOutcome> {
        let verdict = self.verdict?;
        Some(TaskOutcome {
            task_id: self.task.id,
            verdict,
            submit_time: self.submit,
            decision_time: self.decision?.0,
            completion_time: match verdict {
                Verdict::Rejected => None,
                _ => self.resolved_at,
            },
        })
    }
}

pub struct World {
    queue: EventQueue<Event>,
    scheduler: Box<dyn Scheduler + Send>,
    workers: Vec<WorkerAgent>,
    clients: Vec<ClientAgent>,
    wireless: LinkModel,
    wired: LinkModel,
    net_rng: SimRng,
    tasks: BTreeMap<TaskId, TaskRecord>,
    /// Accepted tasks whose completion has not yet reached the scheduler.
    open: BTreeSet<TaskId>,
    next_task: u64,
    horizon: SimTime,
    check_invariants: bool,
    trace: Option<Vec<TraceEvent>>,
    actual_exec: Micros,
}

impl World {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let wireless = cfg.wireless_link();
        let wired = cfg.wired_link();
        let scheduler: Box<dyn Scheduler + Send> = match cfg.scheduler {
            SchedulerKind::LatencyAware => {
                let mut sc =
                    SchedulerConfig::new(cfg.uncertainty_factor, cfg.heuristic, cfg.num_workers);
                sc.dispatch_overhead = cfg.wired_mean_us;
                Box::new(PartitionedScheduler::new(sc)?)
            }
            SchedulerKind::Reference => Box::new(GlobalEdfScheduler::new(cfg.num_workers)?),
        };
        let client_cfg: ClientConfig = cfg.client_config();
        client_cfg.validate()?;
        let clients = (0..cfg.num_clients)
            .map(|c| {
                ClientAgent::new(
                    ClientId(c),
                    client_cfg.clone(),
                    SimRng::derive(cfg.seed, 1 + c as u64),
                )
            })
            .collect();
        let workers = (0..cfg.num_workers)
            .map(|w| WorkerAgent::new(WorkerId(w), cfg.context_switch_us))
            .collect();
        Ok(World {
            queue: EventQueue::new(),
            scheduler,
            workers,
            clients,
            wireless,
            wired,
            net_rng: SimRng::derive(cfg.seed, 0),
            tasks: BTreeMap::new(),
            open: BTreeSet::new(),
            next_task: 0,
            horizon: SimTime((cfg.duration_s * 1e6).round() as u64),
            check_invariants: cfg!(debug_assertions),
            trace: None,
            actual_exec: cfg.actual_exec_us,
        })
    }

    /// Record every state change in a trace log.
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    /// Check accounting invariants after every event.
    pub fn with_invariant_checks(mut self, on: bool) -> Self {
        self.check_invariants = on;
        self
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn tasks(&self) -> &BTreeMap<TaskId, TaskRecord> {
        &self.tasks
    }

    pub fn clients(&self) -> &[ClientAgent] {
        &self.clients
    }

    pub fn workers(&self) -> &[WorkerAgent] {
        &self.workers
    }

    pub fn trace(&self) -> &[TraceEvent] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn events_posted(&self) -> u64 {
        self.queue.posted()
    }

    pub fn events_fired(&self) -> u64 {
        self.queue.fired()
    }

    /// Run to completion: clients submit until the horizon, then every task
    /// in flight is drained.
    pub fn run(&mut self) -> Result<(), SimError> {
        for c in 0..self.clients.len() {
            let first = self.clients[c].next_submission_time(SimTime::ZERO);
            if first < self.horizon {
                self.queue
                    .post_at(first, Event::ClientSubmit(ClientId(c as u32)))?;
            }
        }
        while let Some((now, ev)) = self.queue.pop_until(SimTime(u64::MAX)) {
            self.handle(now, ev)?;
            if self.check_invariants {
                self.check()?;
            }
        }
        self.queue.close();
        self.check()?;
        if self.queue.posted() != self.queue.fired() {
            return Err(SimError::Consistency(format!(
                "{} events posted but {} fired",
                self.queue.posted(),
                self.queue.fired()
            )));
        }
        Ok(())
    }

    fn log(&mut self, time: SimTime, task: TaskId, worker: Option<WorkerId>, kind: TraceKind) {
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEvent {
                time,
                task,
                worker,
                kind,
            });
        }
    }

    fn record(&mut self, id: TaskId) -> Result<&mut TaskRecord, SimError> {
        self.tasks
            .get_mut(&id)
            .ok_or_else(|| SimError::Consistency(format!("unknown task {id}")))
    }

    fn handle(&mut self, now: SimTime, ev: Event) -> Result<(), SimError> {
        match ev {
            Event::ClientSubmit(c) => self.submit(c, now),
            Event::TaskAtScheduler(id) => self.decide(id, now),
            Event::RejectAtClient(id) => self.resolve(id, Verdict::Rejected, now),
            Event::DispatchAtWorker { worker, task } => self.deliver_dispatch(worker, task, now),
            Event::ExecutionDone {
                worker,
                task,
                generation,
            } => self.execution_done(worker, task, generation, now),
            Event::CompletionAtScheduler { worker, task } => {
                self.open.remove(&task);
                let actions = self.scheduler.on_completion(worker, task, now)?;
                self.apply(actions, now)
            }
            Event::PreemptReportAtScheduler {
                worker,
                task,
                executed,
            } => self.scheduler.on_preempted(worker, task, executed, now),
            Event::ResultAtClient(id) => {
                let deadline = self.record(id)?.task.absolute_deadline;
                self.resolve(id, Verdict::for_result(now, deadline), now)
            }
        }
    }

    fn submit(&mut self, c: ClientId, now: SimTime) -> Result<(), SimError> {
        let id = TaskId(self.next_task);
        self.next_task += 1;
        let wireless = self.wireless;
        let task = self.clients[c.0 as usize].make_task(id, now, &wireless)?;
        let transit = self
            .wireless
            .transfer_time(task.params.size(), &mut self.net_rng);
        self.tasks.insert(
            id,
            TaskRecord {
                task,
                actual_exec: self.actual_exec,
                submit: now,
                at_scheduler: None,
                decision: None,
                worker: None,
                dispatches: 0,
                preemptions: 0,
                finished_exec: None,
                resolved_at: None,
                verdict: None,
            },
        );
        self.log(now, id, None, TraceKind::Submitted);
        self.queue.post(transit, Event::TaskAtScheduler(id))
    }

    fn decide(&mut self, id: TaskId, now: SimTime) -> Result<(), SimError> {
        let task = {
            let rec = self.record(id)?;
            rec.at_scheduler = Some(now);
            rec.task.clone()
        };
        let submission = self.scheduler.on_submission(task, now)?;
        self.record(id)?.decision = Some((now, submission.decision));
        match submission.decision {
            Decision::Accept { .. } => {
                self.open.insert(id);
                self.log(now, id, None, TraceKind::Accepted);
                self.apply(submission.actions, now)
            }
            Decision::Reject(_) => {
                self.log(now, id, None, TraceKind::Rejected);
                let delay = self.wireless.sample_one_way(&mut self.net_rng);
                self.queue.post(delay, Event::RejectAtClient(id))
            }
        }
    }

    fn apply(&mut self, actions: Vec<Action>, now: SimTime) -> Result<(), SimError> {
        for action in actions {
            let Action::Dispatch {
                worker,
                task,
                preempts,
            } = action;
            if worker.0 as usize >= self.workers.len() {
                return Err(SimError::UnknownWorker(worker));
            }
            {
                let rec = self.record(task.id)?;
                rec.dispatches += 1;
                rec.worker.get_or_insert(worker);
            }
            if let Some(p) = preempts {
                self.record(p)?.preemptions += 1;
            }
            self.log(now, task.id, Some(worker), TraceKind::Dispatched);
            let delay = self.wired.sample_one_way(&mut self.net_rng);
            self.queue.post(
                delay,
                Event::DispatchAtWorker {
                    worker,
                    task: task.id,
                },
            )?;
        }
        Ok(())
    }

    fn deliver_dispatch(
        &mut self,
        worker: WorkerId,
        id: TaskId,
        now: SimTime,
    ) -> Result<(), SimError> {
        let w = worker.0 as usize;
        // a completion due at this very instant takes precedence
        if let Some(exec) = self.workers[w].current().copied() {
            if exec.completes_at() == now {
                self.execution_done(worker, exec.job.task, exec.generation, now)?;
            }
        }
        if self.record(id)?.finished_exec.is_some() {
            // already computed elsewhere; its completion notice is in flight
            return Ok(());
        }

        let mut executed = 0;
        for (other, agent) in self.workers.iter_mut().enumerate() {
            if other == w {
                continue;
            }
            if let Some(progress) = agent
                .take_suspended(id)
                .or_else(|| agent.take_running(id, now))
            {
                executed = progress;
                break;
            }
        }
        let job = Job {
            task: id,
            actual_exec: self.record(id)?.actual_exec,
            executed,
        };
        let conn_setup = self.wireless.connection_setup_time(&mut self.net_rng);
        let received = self.workers[w].on_receive_task(job, now, conn_setup)?;
        if let Some((suspended, progress)) = received.suspended {
            self.log(
                now,
                suspended,
                Some(worker),
                TraceKind::Suspended { executed: progress },
            );
            let delay = self.wired.sample_one_way(&mut self.net_rng);
            self.queue.post(
                delay,
                Event::PreemptReportAtScheduler {
                    worker,
                    task: suspended,
                    executed: progress,
                },
            )?;
        }
        if let Some((at, generation)) = received.completion {
            self.log(now, id, Some(worker), TraceKind::Started);
            self.queue.post_at(
                at,
                Event::ExecutionDone {
                    worker,
                    task: id,
                    generation,
                },
            )?;
        }
        Ok(())
    }

    fn execution_done(
        &mut self,
        worker: WorkerId,
        id: TaskId,
        generation: u64,
        now: SimTime,
    ) -> Result<(), SimError> {
        let Some(finished) =
            self.workers[worker.0 as usize].on_execution_complete(id, generation, now)?
        else {
            return Ok(());
        };
        let result_bytes = {
            let rec = self.record(id)?;
            rec.finished_exec = Some(finished.executed);
            rec.task.params.result_bytes
        };
        self.log(
            now,
            id,
            Some(worker),
            TraceKind::Finished {
                executed: finished.executed,
            },
        );
        let transfer = self.wireless.transfer_time(result_bytes, &mut self.net_rng);
        self.queue
            .post_at(finished.send_at + transfer, Event::ResultAtClient(id))?;
        let notice = self.wired.sample_one_way(&mut self.net_rng);
        self.queue
            .post(notice, Event::CompletionAtScheduler { worker, task: id })
    }

    fn resolve(&mut self, id: TaskId, verdict: Verdict, now: SimTime) -> Result<(), SimError> {
        let outcome = {
            let rec = self.record(id)?;
            if rec.verdict.is_some() {
                return Err(SimError::Consistency(format!("task {id} resolved twice")));
            }
            rec.verdict = Some(verdict);
            rec.resolved_at = Some(now);
            rec.outcome().expect("verdict set")
        };
        self.log(now, id, None, TraceKind::Delivered { verdict });
        let client = self.tasks[&id].task.client;
        let agent = &mut self.clients[client.0 as usize];
        agent.on_outcome(&outcome, now)?;
        let next = agent.next_submission_time(now);
        if next < self.horizon {
            self.queue.post_at(next, Event::ClientSubmit(client))?;
        }
        Ok(())
    }

    /// Accounting invariants: one outcome per task, conserved counters,
    /// single-in-flight clients, and every accepted unfinished task tracked
    /// by the scheduler exactly once.
    pub fn check(&self) -> Result<(), SimError> {
        self.scheduler.check_invariants()?;
        let tracked = self.scheduler.tracked_tasks();
        let tracked_ids: BTreeSet<TaskId> = tracked.iter().map(|(id, _)| *id).collect();
        if tracked_ids.len() != tracked.len() {
            return Err(SimError::Consistency("task tracked in two queues".into()));
        }
        if tracked_ids != self.open {
            return Err(SimError::Consistency(format!(
                "scheduler tracks {} tasks but {} are accepted and unfinished",
                tracked_ids.len(),
                self.open.len()
            )));
        }
        let mut submitted = 0;
        for c in &self.clients {
            let k = c.counters();
            let in_flight = u64::from(c.in_flight().is_some());
            if k.submitted != k.resolved() + in_flight {
                return Err(SimError::Consistency(format!(
                    "client {} counters not conserved",
                    c.id
                )));
            }
            submitted += k.submitted;
        }
        if submitted != self.tasks.len() as u64 {
            return Err(SimError::Consistency(
                "client and world task counts differ".into(),
            ));
        }
        for agent in &self.workers {
            if let Some(exec) = agent.current() {
                if exec.job.executed > exec.job.actual_exec {
                    return Err(SimError::Consistency(format!(
                        "worker {} over-executed task {}",
                        agent.id, exec.job.task
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn scheduler_kind(&self) -> SchedulerKind {
        self.scheduler.kind()
    }
}
