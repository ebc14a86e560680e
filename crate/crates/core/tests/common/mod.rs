#![allow(dead_code)]

use std::collections::HashMap;

use offload_core::model::{ClientId, SimTime, Task, TaskId, WorkerId};
use offload_core::scheduler::{
    adjust_deadline, AdjustedTask, Heuristic, PartitionedScheduler, RunningTask, Scheduler,
    SchedulerConfig, WorkerQueueState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const QUANTUM: u64 = 1_000;

/// One single-worker instance in whole quanta, everything released at 0.
#[derive(Debug, Clone)]
pub struct Instance {
    /// (remaining, deadline) per queued task; index 0 is running if `running`.
    pub queued: Vec<(u64, u64)>,
    pub running: bool,
    pub candidate: (u64, u64),
}

impl Instance {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let n = rng.random_range(0..=5);
        let queued = (0..n)
            .map(|_| (rng.random_range(1..=4), rng.random_range(1..=14)))
            .collect();
        Instance {
            queued,
            running: n > 0 && rng.random_bool(0.5),
            candidate: (rng.random_range(1..=4), rng.random_range(1..=14)),
        }
    }

    /// The instance as scheduler state at `now`, with WCETs padded by an
    /// already-elapsed part so remaining = wcet − elapsed is exercised.
    pub fn to_state(&self, now: SimTime, rng: &mut ChaCha8Rng) -> (WorkerQueueState, AdjustedTask) {
        let mut make = |id: u64, (rem, dl): (u64, u64)| {
            let done = rng.random_range(0..=2) * QUANTUM;
            let mut t = Task::new(
                TaskId(id),
                ClientId(0),
                now,
                dl * QUANTUM,
                0,
                rem * QUANTUM + done,
            )
            .unwrap();
            t.set_elapsed(done);
            adjust_deadline(t, now, 1.0)
        };
        let mut q = WorkerQueueState::new(WorkerId(0));
        for (i, &shape) in self.queued.iter().enumerate() {
            let adj = make(i as u64, shape);
            if i == 0 && self.running {
                q.running = Some(RunningTask {
                    elapsed_at_dispatch: adj.task.elapsed_execution,
                    adjusted: adj,
                    dispatched_at: now,
                });
            } else {
                q.pending.push(adj);
            }
        }
        q.pending.sort_by_key(|a| a.edf_key());
        let cand = make(99, self.candidate);
        (q, cand)
    }

    /// Ground truth: the candidate passes the strict admission test and some
    /// preemptive single-processor schedule, in whole quanta, meets every
    /// deadline.
    pub fn brute_force_feasible(&self) -> bool {
        let (c_rem, c_dl) = self.candidate;
        if c_dl <= c_rem {
            return false;
        }
        let mut jobs = self.queued.clone();
        jobs.push(self.candidate);
        let rem: Vec<u64> = jobs.iter().map(|j| j.0).collect();
        let dl: Vec<u64> = jobs.iter().map(|j| j.1).collect();
        search(0, rem, &dl, &mut HashMap::new())
    }
}

fn search(t: u64, rem: Vec<u64>, dl: &[u64], memo: &mut HashMap<(u64, Vec<u64>), bool>) -> bool {
    if rem.iter().all(|&r| r == 0) {
        return true;
    }
    if rem.iter().zip(dl).any(|(&r, &d)| r > 0 && t + r > d) {
        return false;
    }
    if let Some(&v) = memo.get(&(t, rem.clone())) {
        return v;
    }
    // every choice of what runs in [t, t+1), including idling
    let mut ok = false;
    for i in 0..=rem.len() {
        if i < rem.len() && rem[i] == 0 {
            continue;
        }
        let mut next = rem.clone();
        if i < rem.len() {
            next[i] -= 1;
        }
        if search(t + 1, next, dl, memo) {
            ok = true;
            break;
        }
    }
    memo.insert((t, rem), ok);
    ok
}

/// A partitioned scheduler driven into a random reachable state, plus the
/// time reached and a fresh candidate arriving then.
pub fn random_scheduler_state(
    rng: &mut ChaCha8Rng,
    next_id: &mut u64,
) -> (PartitionedScheduler, SimTime, Task) {
    let heuristic =
        [Heuristic::FirstFit, Heuristic::BestFit, Heuristic::WorstFit][rng.random_range(0..3)];
    let mut cfg = SchedulerConfig::new(
        rng.random_range(0.0..2.0),
        heuristic,
        rng.random_range(1..=4),
    );
    cfg.dispatch_overhead = rng.random_range(0..=500);
    let mut sched = PartitionedScheduler::new(cfg).unwrap();
    let mut now = SimTime(1_000_000);
    for _ in 0..rng.random_range(0..12) {
        now += rng.random_range(0..40_000);
        let task = random_task(rng, now, next_id);
        sched.on_submission(task, now).unwrap();
    }
    now += rng.random_range(0..20_000);
    let cand = random_task(rng, now, next_id);
    (sched, now, cand)
}

/// A task created one wireless transit before `arrival`.
pub fn random_task(rng: &mut ChaCha8Rng, arrival: SimTime, next_id: &mut u64) -> Task {
    let transit = rng.random_range(0..60_000);
    let created = SimTime(arrival.0 - transit);
    let wcet = rng.random_range(5..120) * QUANTUM;
    let rel = wcet + rng.random_range(0..200) * QUANTUM;
    let t_cs = rng.random_range(0..150_000);
    *next_id += 1;
    Task::new(TaskId(*next_id), ClientId(0), created, rel, t_cs, wcet).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uncertainty factors tried in ascending order.
pub const U_GRID: [f64; 11] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 5.0];

/// Index of the first factor in [`U_GRID`] that rejects, checking that
/// every larger factor rejects too. `Err` names a violating factor.
pub fn u_monotone(
    sched: &PartitionedScheduler,
    now: SimTime,
    cand: &Task,
) -> Result<Option<usize>, f64> {
    let mut first_reject = None;
    for (i, &u) in U_GRID.iter().enumerate() {
        let mut s = sched.clone();
        s.set_uncertainty_factor(u);
        let accepted = s
            .on_submission(cand.clone(), now)
            .unwrap()
            .decision
            .is_accept();
        match (accepted, first_reject) {
            (false, None) => first_reject = Some(i),
            (true, Some(_)) => return Err(u),
            _ => {}
        }
    }
    Ok(first_reject)
}
