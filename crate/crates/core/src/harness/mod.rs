//! Scenario configuration, run orchestration and result aggregation.

mod config_file;
mod csv_out;
mod metrics;
mod plot;
mod sweep;

pub use config_file::{parse_config, to_config_string, CONFIG_KEYS};
pub use csv_out::{read_csv, write_csv, write_trace_csv, CsvRow, CSV_HEADER, TRACE_HEADER};
pub use metrics::RunMetrics;
pub use plot::{emit_plots, PlotSeries};
pub use sweep::{run_sweep, scenario_base, scenario_plan, SweepAxis, SweepPlan, DEFAULT_U_VALUES};

use crate::client::ClientConfig;
use crate::error::SimError;
use crate::model::{Micros, MICROS_PER_MS};
use crate::netsim::LinkModel;
use crate::scheduler::{Heuristic, SchedulerKind};
use crate::sim::World;

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scheduler: SchedulerKind,
    pub num_clients: u32,
    pub num_workers: u32,
    pub uncertainty_factor: f64,
    pub heuristic: Heuristic,
    /// Submissions per second per client.
    pub arrival_rate: f64,
    pub laxity_mean_us: Micros,
    /// `None` means 20 % of the mean.
    pub laxity_stddev_us: Option<Micros>,
    pub actual_exec_us: Micros,
    pub wcet_us: Micros,
    pub result_payload_bytes: u64,
    pub wireless_mean_us: Micros,
    pub wireless_stddev_us: Micros,
    pub wired_mean_us: Micros,
    pub wired_stddev_us: Micros,
    pub context_switch_us: Micros,
    /// Length of the submission window in simulated seconds.
    pub duration_s: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scheduler: SchedulerKind::LatencyAware,
            num_clients: 50,
            num_workers: 3,
            uncertainty_factor: 1.0,
            heuristic: Heuristic::WorstFit,
            arrival_rate: 1.0,
            laxity_mean_us: 100 * MICROS_PER_MS,
            laxity_stddev_us: None,
            actual_exec_us: 70 * MICROS_PER_MS,
            wcet_us: 100 * MICROS_PER_MS,
            result_payload_bytes: 0,
            wireless_mean_us: 30 * MICROS_PER_MS,
            wireless_stddev_us: 10 * MICROS_PER_MS,
            wired_mean_us: 200,
            wired_stddev_us: 0,
            context_switch_us: 0,
            duration_s: 60.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.num_workers == 0 {
            return Err(SimError::Config("num_workers must be at least 1".into()));
        }
        if self.num_clients == 0 {
            return Err(SimError::Config("num_clients must be at least 1".into()));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(SimError::Config(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            )));
        }
        if !(self.uncertainty_factor.is_finite() && self.uncertainty_factor >= 0.0) {
            return Err(SimError::Config(format!(
                "uncertainty_factor must be non-negative, got {}",
                self.uncertainty_factor
            )));
        }
        self.client_config().validate()
    }

    pub fn laxity_stddev(&self) -> Micros {
        self.laxity_stddev_us.unwrap_or(self.laxity_mean_us / 5)
    }

    pub fn client_config(&self) -> ClientConfig {
        ClientConfig {
            arrival_rate: self.arrival_rate,
            laxity_mean: self.laxity_mean_us,
            laxity_stddev: self.laxity_stddev(),
            actual_exec: self.actual_exec_us,
            wcet: self.wcet_us,
            result_payload_bytes: self.result_payload_bytes,
        }
    }

    pub fn wireless_link(&self) -> LinkModel {
        LinkModel::wireless(self.wireless_mean_us, self.wireless_stddev_us)
    }

    pub fn wired_link(&self) -> LinkModel {
        LinkModel::wired(self.wired_mean_us, self.wired_stddev_us)
    }
}

/// Output of one run.
pub struct RunResult {
    pub metrics: RunMetrics,
    pub world: World,
}

/// Build one world from `config`, run it and aggregate its metrics.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunResult, SimError> {
    run_scenario_with(config, false)
}

/// As [`run_scenario`], optionally keeping the event-level trace.
pub fn run_scenario_with(config: &ScenarioConfig, trace: bool) -> Result<RunResult, SimError> {
    let mut world = World::new(config)?;
    if trace {
        world = world.with_trace();
    }
    world.run()?;
    let metrics = RunMetrics::from_world(&world)?;
    Ok(RunResult { metrics, world })
}
