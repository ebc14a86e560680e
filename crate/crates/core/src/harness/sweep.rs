//! Parameter sweeps over the evaluation scenarios.

use rayon::prelude::*;

use super::{run_scenario, CsvRow, ScenarioConfig};
use crate::error::SimError;
use crate::model::MICROS_PER_MS;
use crate::scheduler::SchedulerKind;

/// Uncertainty factors swept when none are given.
pub const DEFAULT_U_VALUES: [f64; 4] = [0.5, 0.75, 1.0, 1.25];

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    Clients(Vec<u32>),
    LaxityMs(Vec<u64>),
    LatencyStdMs(Vec<u64>),
    Uncertainty(Vec<f64>),
}

impl SweepAxis {
    pub fn len(&self) -> usize {
        match self {
            SweepAxis::Clients(v) => v.len(),
            SweepAxis::LaxityMs(v) => v.len(),
            SweepAxis::LatencyStdMs(v) => v.len(),
            SweepAxis::Uncertainty(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn apply(&self, idx: usize, cfg: &mut ScenarioConfig) {
        match self {
            SweepAxis::Clients(v) => cfg.num_clients = v[idx],
            SweepAxis::LaxityMs(v) => {
                cfg.laxity_mean_us = v[idx] * MICROS_PER_MS;
                cfg.laxity_stddev_us = None;
            }
            SweepAxis::LatencyStdMs(v) => cfg.wireless_stddev_us = v[idx] * MICROS_PER_MS,
            SweepAxis::Uncertainty(v) => cfg.uncertainty_factor = v[idx],
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        let bad = match self {
            SweepAxis::Clients(v) => v.contains(&0),
            SweepAxis::LaxityMs(v) => v.contains(&0),
            SweepAxis::LatencyStdMs(_) => false,
            SweepAxis::Uncertainty(v) => v.iter().any(|u| !(u.is_finite() && *u >= 0.0)),
        };
        if bad {
            return Err(SimError::Config(format!(
                "invalid sweep axis values {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    /// Label written to the `scenario` column.
    pub scenario: String,
    pub base: ScenarioConfig,
    pub axis: SweepAxis,
    /// Uncertainty factors for latency-aware rows. Ignored by a
    /// [`SweepAxis::Uncertainty`] axis.
    pub u_values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub include_reference: bool,
}

/// Base configuration of evaluation scenario 1, 2 or 3.
pub fn scenario_base(scenario: u8) -> Result<ScenarioConfig, SimError> {
    let mut cfg = ScenarioConfig::default();
    match scenario {
        1 => cfg.num_clients = 50,
        2 => {
            cfg.num_clients = 30;
            cfg.laxity_mean_us = 180 * MICROS_PER_MS;
        }
        3 => {
            cfg.num_clients = 30;
            cfg.wireless_stddev_us = 10 * MICROS_PER_MS;
        }
        other => {
            return Err(SimError::Config(format!(
                "no scenario {other}; expected 1, 2 or 3"
            )))
        }
    }
    Ok(cfg)
}

/// Full sweep of one evaluation scenario.
pub fn scenario_plan(
    scenario: u8,
    u_values: Vec<f64>,
    seeds: Vec<u64>,
) -> Result<SweepPlan, SimError> {
    let base = scenario_base(scenario)?;
    let axis = match scenario {
        1 => SweepAxis::Clients(vec![10, 20, 30, 40, 50]),
        2 => SweepAxis::LaxityMs(vec![180, 150, 120, 90, 60]),
        _ => SweepAxis::LatencyStdMs(vec![10, 20, 30, 40, 50]),
    };
    Ok(SweepPlan {
        scenario: scenario.to_string(),
        base,
        axis,
        u_values,
        seeds,
        include_reference: true,
    })
}

impl SweepPlan {
    /// One configuration per (axis value, seed, scheduler), in output order.
    pub fn configs(&self) -> Result<Vec<ScenarioConfig>, SimError> {
        self.axis.validate()?;
        let schedulers: Vec<(SchedulerKind, Option<f64>)> = match &self.axis {
            SweepAxis::Uncertainty(_) => vec![(SchedulerKind::LatencyAware, None)],
            _ => self
                .u_values
                .iter()
                .map(|u| (SchedulerKind::LatencyAware, Some(*u)))
                .collect(),
        };
        let mut out = Vec::new();
        for idx in 0..self.axis.len() {
            for &seed in &self.seeds {
                let mut cfg = self.base.clone();
                self.axis.apply(idx, &mut cfg);
                cfg.seed = seed;
                for &(kind, u) in &schedulers {
                    let mut c = cfg.clone();
                    c.scheduler = kind;
                    if let Some(u) = u {
                        c.uncertainty_factor = u;
                    }
                    out.push(c);
                }
                if self.include_reference {
                    let mut c = cfg.clone();
                    c.scheduler = SchedulerKind::Reference;
                    out.push(c);
                }
            }
        }
        for c in &out {
            c.validate()?;
        }
        Ok(out)
    }
}

/// Run every configuration of `plan` (in parallel) and return the CSV rows
/// in plan order, independent of thread scheduling.
pub fn run_sweep(plan: &SweepPlan) -> Result<Vec<CsvRow>, SimError> {
    let configs = plan.configs()?;
    let results: Vec<Result<CsvRow, SimError>> = configs
        .par_iter()
        .enumerate()
        .map(|(idx, cfg)| {
            let run = run_scenario(cfg)?;
            Ok(CsvRow::new(
                idx as u64 + 1,
                &plan.scenario,
                cfg,
                run.metrics,
            ))
        })
        .collect();
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_two_grid_shape() {
        let plan = scenario_plan(2, DEFAULT_U_VALUES.to_vec(), vec![0]).unwrap();
        let cfgs = plan.configs().unwrap();
        assert_eq!(cfgs.len(), 5 * (4 + 1));
        let laxities: Vec<u64> = cfgs
            .iter()
            .step_by(5)
            .map(|c| c.laxity_mean_us / 1_000)
            .collect();
        assert_eq!(laxities, vec![180, 150, 120, 90, 60]);
        assert_eq!(cfgs[4].scheduler, SchedulerKind::Reference);
        assert_eq!(
            cfgs[..4]
                .iter()
                .map(|c| c.uncertainty_factor)
                .collect::<Vec<_>>(),
            DEFAULT_U_VALUES.to_vec()
        );
    }

    #[test]
    fn scenario_three_varies_latency_stddev() {
        let plan = scenario_plan(3, vec![1.0], vec![1, 2]).unwrap();
        let cfgs = plan.configs().unwrap();
        assert_eq!(cfgs.len(), 5 * 2 * 2);
        let stds: Vec<u64> = cfgs
            .iter()
            .step_by(4)
            .map(|c| c.wireless_stddev_us / 1_000)
            .collect();
        assert_eq!(stds, vec![10, 20, 30, 40, 50]);
    }

    #[test]
    fn single_value_single_seed() {
        let mut plan = scenario_plan(1, vec![1.0], vec![3]).unwrap();
        plan.axis = SweepAxis::Clients(vec![2]);
        plan.base.duration_s = 2.0;
        let rows = run_sweep(&plan).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].scheduler, SchedulerKind::LatencyAware);
        assert_eq!(rows[1].scheduler, SchedulerKind::Reference);
    }

    #[test]
    fn uncertainty_axis() {
        let mut plan = scenario_plan(1, vec![], vec![0]).unwrap();
        plan.axis = SweepAxis::Uncertainty(vec![0.25, 5.0]);
        plan.include_reference = false;
        let cfgs = plan.configs().unwrap();
        assert_eq!(
            cfgs.iter()
                .map(|c| c.uncertainty_factor)
                .collect::<Vec<_>>(),
            vec![0.25, 5.0]
        );
    }

    #[test]
    fn bad_inputs() {
        assert!(scenario_base(4).is_err());
        let mut plan = scenario_plan(1, vec![1.0], vec![0]).unwrap();
        plan.axis = SweepAxis::Clients(vec![0]);
        assert!(plan.configs().is_err());
    }
}
