use crate::error::SimError;
use crate::model::Verdict;
use crate::sim::World;

/// Counters and rates of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub submitted: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub completed_on_time: u64,
    pub missed: u64,
    pub in_flight_at_end: u64,
    /// On-time completions over submissions.
    pub success_rate: f64,
    /// Misses over acceptances; zero when nothing was accepted.
    pub miss_rate: f64,
    /// Submission to result arrival, over completed tasks.
    pub mean_response_us: f64,
    /// Laxity left when a rejection reached its client, over rejections.
    pub mean_fallback_lead_us: f64,
}

impl RunMetrics {
    pub fn from_counts(
        submitted: u64,
        accepted: u64,
        rejected: u64,
        completed_on_time: u64,
        missed: u64,
    ) -> Result<Self, SimError> {
        if submitted != accepted + rejected {
            return Err(SimError::Consistency(format!(
                "submitted {submitted} != accepted {accepted} + rejected {rejected}"
            )));
        }
        let resolved = completed_on_time + missed;
        if resolved > accepted {
            return Err(SimError::Consistency(format!(
                "{resolved} accepted tasks resolved but only {accepted} accepted"
            )));
        }
        Ok(RunMetrics {
            submitted,
            accepted,
            rejected,
            completed_on_time,
            missed,
            in_flight_at_end: accepted - resolved,
            success_rate: ratio(completed_on_time, submitted),
            miss_rate: ratio(missed, accepted),
            mean_response_us: 0.0,
            mean_fallback_lead_us: 0.0,
        })
    }

    pub fn from_world(world: &World) -> Result<Self, SimError> {
        let (mut accepted, mut rejected, mut on_time, mut missed) = (0, 0, 0, 0);
        let mut response = Mean::default();
        for rec in world.tasks().values() {
            match rec.decision {
                Some((_, d)) if d.is_accept() => accepted += 1,
                Some(_) => rejected += 1,
                None => {
                    return Err(SimError::Consistency(format!(
                        "task {} never reached a decision",
                        rec.task.id
                    )))
                }
            }
            match rec.verdict {
                Some(Verdict::CompletedOnTime) => on_time += 1,
                Some(Verdict::MissedDeadline) => missed += 1,
                _ => continue,
            }
            if let Some(at) = rec.resolved_at {
                response.push(at.saturating_since(rec.submit) as f64);
            }
        }
        let mut leads = Mean::default();
        for c in world.clients() {
            for &l in c.fallback_leads() {
                leads.push(l as f64);
            }
        }
        let mut m = RunMetrics::from_counts(
            world.tasks().len() as u64,
            accepted,
            rejected,
            on_time,
            missed,
        )?;
        m.mean_response_us = response.get();
        m.mean_fallback_lead_us = leads.get();
        Ok(m)
    }

    /// Acceptances over submissions.
    pub fn acceptance_rate(&self) -> f64 {
        ratio(self.accepted, self.submitted)
    }

    /// Misses over submissions.
    pub fn missed_fraction_of_submitted(&self) -> f64 {
        ratio(self.missed, self.submitted)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Default)]
struct Mean {
    sum: f64,
    n: u64,
}

impl Mean {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.n += 1;
    }

    fn get(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }
}
