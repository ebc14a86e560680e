//! Flat `key = value` scenario files. Keys are the [`ScenarioConfig`] field
//! names; `#` starts a comment. Unknown or repeated keys are errors.

use std::collections::HashSet;
use std::str::FromStr;

use super::ScenarioConfig;
use crate::error::SimError;

pub const CONFIG_KEYS: &[&str] = &[
    "scheduler",
    "num_clients",
    "num_workers",
    "uncertainty_factor",
    "heuristic",
    "arrival_rate",
    "laxity_mean_us",
    "laxity_stddev_us",
    "actual_exec_us",
    "wcet_us",
    "result_payload_bytes",
    "wireless_mean_us",
    "wireless_stddev_us",
    "wired_mean_us",
    "wired_stddev_us",
    "context_switch_us",
    "duration_s",
    "seed",
];

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T, SimError> {
    raw.parse()
        .map_err(|_| SimError::Config(format!("line {line}: bad value `{raw}` for `{key}`")))
}

/// Parse a scenario file; keys not present keep their defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, SimError> {
    let mut cfg = ScenarioConfig::default();
    let mut seen = HashSet::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, raw) = line
            .split_once('=')
            .ok_or_else(|| SimError::Config(format!("line {line_no}: expected key=value")))?;
        let key = key.trim();
        let raw = raw.trim();
        if !seen.insert(key.to_string()) {
            return Err(SimError::Config(format!(
                "line {line_no}: duplicate key `{key}`"
            )));
        }
        match key {
            "scheduler" => cfg.scheduler = raw.parse()?,
            "num_clients" => cfg.num_clients = value(line_no, key, raw)?,
            "num_workers" => cfg.num_workers = value(line_no, key, raw)?,
            "uncertainty_factor" => cfg.uncertainty_factor = value(line_no, key, raw)?,
            "heuristic" => cfg.heuristic = raw.parse()?,
            "arrival_rate" => cfg.arrival_rate = value(line_no, key, raw)?,
            "laxity_mean_us" => cfg.laxity_mean_us = value(line_no, key, raw)?,
            "laxity_stddev_us" => cfg.laxity_stddev_us = Some(value(line_no, key, raw)?),
            "actual_exec_us" => cfg.actual_exec_us = value(line_no, key, raw)?,
            "wcet_us" => cfg.wcet_us = value(line_no, key, raw)?,
            "result_payload_bytes" => cfg.result_payload_bytes = value(line_no, key, raw)?,
            "wireless_mean_us" => cfg.wireless_mean_us = value(line_no, key, raw)?,
            "wireless_stddev_us" => cfg.wireless_stddev_us = value(line_no, key, raw)?,
            "wired_mean_us" => cfg.wired_mean_us = value(line_no, key, raw)?,
            "wired_stddev_us" => cfg.wired_stddev_us = value(line_no, key, raw)?,
            "context_switch_us" => cfg.context_switch_us = value(line_no, key, raw)?,
            "duration_s" => cfg.duration_s = value(line_no, key, raw)?,
            "seed" => cfg.seed = value(line_no, key, raw)?,
            other => {
                return Err(SimError::Config(format!(
                    "line {line_no}: unknown key `{other}`"
                )));
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Render every field, in [`CONFIG_KEYS`] order.
pub fn to_config_string(cfg: &ScenarioConfig) -> String {
    let mut out = String::new();
    let mut put = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    put("scheduler", cfg.scheduler.to_string());
    put("num_clients", cfg.num_clients.to_string());
    put("num_workers", cfg.num_workers.to_string());
    put("uncertainty_factor", cfg.uncertainty_factor.to_string());
    put("heuristic", cfg.heuristic.to_string());
    put("arrival_rate", cfg.arrival_rate.to_string());
    put("laxity_mean_us", cfg.laxity_mean_us.to_string());
    put("laxity_stddev_us", cfg.laxity_stddev().to_string());
    put("actual_exec_us", cfg.actual_exec_us.to_string());
    put("wcet_us", cfg.wcet_us.to_string());
    put("result_payload_bytes", cfg.result_payload_bytes.to_string());
    put("wireless_mean_us", cfg.wireless_mean_us.to_string());
    put("wireless_stddev_us", cfg.wireless_stddev_us.to_string());
    put("wired_mean_us", cfg.wired_mean_us.to_string());
    put("wired_stddev_us", cfg.wired_stddev_us.to_string());
    put("context_switch_us", cfg.context_switch_us.to_string());
    put("duration_s", cfg.duration_s.to_string());
    put("seed", cfg.seed.to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::{Heuristic, SchedulerKind};

    #[test]
    fn parses_overrides_and_comments() {
        let cfg = parse_config(
            "# scenario\nscheduler = reference\nnum_clients=12 # twelve\n\nheuristic = best_fit\nduration_s = 2.5\n",
        )
        .unwrap();
        assert_eq!(cfg.scheduler, SchedulerKind::Reference);
        assert_eq!(cfg.num_clients, 12);
        assert_eq!(cfg.heuristic, Heuristic::BestFit);
        assert_eq!(cfg.duration_s, 2.5);
        assert_eq!(cfg.num_workers, ScenarioConfig::default().num_workers);
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        assert!(parse_config("speed = 3").is_err());
        assert!(parse_config("seed = 1\nseed = 2").is_err());
        assert!(parse_config("num_clients").is_err());
        assert!(parse_config("num_clients = many").is_err());
        assert!(parse_config("num_workers = 0").is_err());
        assert!(parse_config("arrival_rate = -1").is_err());
    }

    #[test]
    fn rendered_config_round_trips() {
        let cfg = ScenarioConfig {
            seed: 77,
            uncertainty_factor: 0.75,
            laxity_stddev_us: Some(20_000),
            ..ScenarioConfig::default()
        };
        let text = to_config_string(&cfg);
        assert_eq!(text.lines().count(), CONFIG_KEYS.len());
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}
