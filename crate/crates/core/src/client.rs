//! Simulated client device: sporadic task generation, one task in flight at
//! a time, outcome bookkeeping.

use crate::error::SimError;
use crate::model::{
    laxity, ClientId, Micros, SimTime, Task, TaskId, TaskOutcome, Verdict, MICROS_PER_SEC,
};
use crate::netsim::{LinkModel, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub struct ClientConfig {
    /// Mean submissions per second.
    pub arrival_rate: f64,
    pub laxity_mean: Micros,
    pub laxity_stddev: Micros,
    pub actual_exec: Micros,
    pub wcet: Micros,
    pub result_payload_bytes: u64,
}

impl ClientConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.arrival_rate.is_finite() && self.arrival_rate > 0.0) {
            return Err(SimError::Config(format!(
                "arrival rate must be positive, got {}",
                self.arrival_rate
            )));
        }
        if self.laxity_mean == 0 {
            return Err(SimError::Config("laxity mean must be positive".into()));
        }
        if self.actual_exec == 0 || self.wcet < self.actual_exec {
            return Err(SimError::Config(format!(
                "need wcet >= actual execution > 0, got wcet {} and actual {}",
                self.wcet, self.actual_exec
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InFlight {
    pub task: TaskId,
    pub submitted_at: SimTime,
    pub deadline: SimTime,
    pub wcet: Micros,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClientCounters {
    pub submitted: u64,
    pub rejected: u64,
    pub on_time: u64,
    pub missed: u64,
}

impl ClientCounters {
    pub fn resolved(&self) -> u64 {
        self.rejected + self.on_time + self.missed
    }
}

#[derive(Debug, Clone)]
pub struct ClientAgent {
    pub id: ClientId,
    config: ClientConfig,
    rng: SimRng,
    in_flight: Option<InFlight>,
    last_submission: SimTime,
    counters: ClientCounters,
    /// Laxity left when each rejection reached the client.
    fallback_leads: Vec<i64>,
}

impl ClientAgent {
    pub fn new(id: ClientId, config: ClientConfig, rng: SimRng) -> Self {
        ClientAgent {
            id,
            config,
            rng,
            in_flight: None,
            last_submission: SimTime::ZERO,
            counters: ClientCounters::default(),
            fallback_leads: Vec::new(),
        }
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    pub fn in_flight(&self) -> Option<&InFlight> {
        self.in_flight.as_ref()
    }

    pub fn counters(&self) -> ClientCounters {
        self.counters
    }

    pub fn fallback_leads(&self) -> &[i64] {
        &self.fallback_leads
    }

    /// Draw an inter-submission gap from the exponential distribution.
    pub fn sample_gap(&mut self) -> Micros {
        let secs = self.rng.exponential(self.config.arrival_rate);
        (secs * MICROS_PER_SEC as f64).round() as Micros
    }

    /// When the next task goes out, given when the previous one resolved.
    pub fn next_submission_time(&mut self, prev_outcome_time: SimTime) -> SimTime {
        let gap = self.sample_gap();
        next_submission(self.last_submission, gap, prev_outcome_time)
    }

    /// Create and register the next task. `wireless` is the client's link
    /// towards the scheduler, used to measure the handshake time.
    pub fn make_task(
        &mut self,
        id: TaskId,
        now: SimTime,
        wireless: &LinkModel,
    ) -> Result<Task, SimError> {
        if let Some(f) = &self.in_flight {
            return Err(SimError::Consistency(format!(
                "client {} submitting while task {} is unresolved",
                self.id, f.task
            )));
        }
        let lax = self
            .rng
            .normal(
                self.config.laxity_mean as f64,
                self.config.laxity_stddev as f64,
            )
            .max(0.0)
            .round() as Micros;
        let t_cs = wireless.connection_setup_time(&mut self.rng);
        let mut task = Task::new(
            id,
            self.id,
            now,
            self.config.wcet + lax,
            t_cs,
            self.config.wcet,
        )?;
        task.params.result_bytes = self.config.result_payload_bytes;
        self.in_flight = Some(InFlight {
            task: id,
            submitted_at: now,
            deadline: task.absolute_deadline,
            wcet: task.wcet,
        });
        self.last_submission = now;
        self.counters.submitted += 1;
        Ok(task)
    }

    pub fn on_outcome(&mut self, outcome: &TaskOutcome, now: SimTime) -> Result<(), SimError> {
        let flight = match &self.in_flight {
            Some(f) if f.task == outcome.task_id => f.clone(),
            _ => {
                return Err(SimError::Consistency(format!(
                    "client {} got outcome for unknown task {}",
                    self.id, outcome.task_id
                )))
            }
        };
        match outcome.verdict {
            Verdict::Rejected => {
                self.counters.rejected += 1;
                let lead = flight.deadline.signed_diff(now) - flight.wcet as i64;
                self.fallback_leads.push(lead);
            }
            Verdict::CompletedOnTime => self.counters.on_time += 1,
            Verdict::MissedDeadline => self.counters.missed += 1,
        }
        self.in_flight = None;
        Ok(())
    }
}

/// `max(prev_submission + gap, prev_outcome)`.
pub fn next_submission(prev_submission: SimTime, gap: Micros, prev_outcome: SimTime) -> SimTime {
    (prev_submission + gap).max(prev_outcome)
}

/// Laxity left to a rejected task when the rejection reached the client.
pub fn fallback_lead(task: &Task, reject_arrival: SimTime) -> i64 {
    laxity(task, reject_arrival)
}
