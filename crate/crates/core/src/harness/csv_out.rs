//! Result and trace CSV files.

use std::io::Write;

use super::{RunMetrics, ScenarioConfig};
use crate::error::SimError;
use crate::model::MICROS_PER_MS;
use crate::scheduler::{Decision, Heuristic, SchedulerKind};
use crate::sim::World;

pub const CSV_HEADER: &str = "run_id,scenario,scheduler,heuristic,u_factor,clients,workers,laxity_mean_ms,latency_mean_ms,latency_std_ms,seed,submitted,accepted,rejected,completed_on_time,missed,in_flight_at_end,success_rate,miss_rate,mean_response_ms,mean_fallback_lead_ms";

pub const TRACE_HEADER: &str =
    "task_id,client,submit,decision,worker,dispatches,preemptions,completion,deadline,verdict";

/// One line of the results file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub run_id: u64,
    pub scenario: String,
    pub scheduler: SchedulerKind,
    pub heuristic: Heuristic,
    /// Empty for the reference scheduler.
    pub u_factor: Option<f64>,
    pub clients: u32,
    pub workers: u32,
    pub laxity_mean_ms: f64,
    pub latency_mean_ms: f64,
    pub latency_std_ms: f64,
    pub seed: u64,
    pub metrics: RunMetrics,
}

fn ms(us: u64) -> f64 {
    us as f64 / MICROS_PER_MS as f64
}

impl CsvRow {
    pub fn new(run_id: u64, scenario: &str, cfg: &ScenarioConfig, metrics: RunMetrics) -> Self {
        CsvRow {
            run_id,
            scenario: scenario.to_string(),
            scheduler: cfg.scheduler,
            heuristic: cfg.heuristic,
            u_factor: match cfg.scheduler {
                SchedulerKind::LatencyAware => Some(cfg.uncertainty_factor),
                SchedulerKind::Reference => None,
            },
            clients: cfg.num_clients,
            workers: cfg.num_workers,
            laxity_mean_ms: ms(cfg.laxity_mean_us),
            latency_mean_ms: ms(cfg.wireless_mean_us),
            latency_std_ms: ms(cfg.wireless_stddev_us),
            seed: cfg.seed,
            metrics,
        }
    }

    pub fn to_line(&self) -> String {
        let m = &self.metrics;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.6},{:.6},{:.3},{:.3}",
            self.run_id,
            self.scenario,
            self.scheduler,
            self.heuristic,
            self.u_factor.map(|u| u.to_string()).unwrap_or_default(),
            self.clients,
            self.workers,
            self.laxity_mean_ms,
            self.latency_mean_ms,
            self.latency_std_ms,
            self.seed,
            m.submitted,
            m.accepted,
            m.rejected,
            m.completed_on_time,
            m.missed,
            m.in_flight_at_end,
            m.success_rate,
            m.miss_rate,
            m.mean_response_us / MICROS_PER_MS as f64,
            m.mean_fallback_lead_us / MICROS_PER_MS as f64,
        )
    }
}

pub fn write_csv<W: Write>(mut out: W, rows: &[CsvRow]) -> Result<(), SimError> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_line())?;
    }
    Ok(())
}

/// Parse a results file. Errors name the 1-based line that failed.
pub fn read_csv(text: &str) -> Result<Vec<CsvRow>, SimError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| SimError::Csv {
            line: 1,
            reason: e.to_string(),
        })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CSV_HEADER {
        return Err(SimError::Csv {
            line: 1,
            reason: "unexpected header".into(),
        });
    }
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| SimError::Csv {
            line,
            reason: e.to_string(),
        })?;
        rows.push(parse_record(&record).map_err(|reason| SimError::Csv { line, reason })?);
    }
    Ok(rows)
}

fn parse_record(r: &csv::StringRecord) -> Result<CsvRow, String> {
    if r.len() != 21 {
        return Err(format!("expected 21 fields, found {}", r.len()));
    }
    fn num<T: std::str::FromStr>(r: &csv::StringRecord, i: usize, name: &str) -> Result<T, String> {
        r[i].trim()
            .parse()
            .map_err(|_| format!("bad {name} `{}`", &r[i]))
    }
    let scheduler: SchedulerKind = r[2].parse().map_err(|e: SimError| e.to_string())?;
    let heuristic: Heuristic = r[3].parse().map_err(|e: SimError| e.to_string())?;
    let u_factor = if r[4].trim().is_empty() {
        None
    } else {
        Some(num::<f64>(r, 4, "u_factor")?)
    };
    let mut metrics = RunMetrics::from_counts(
        num(r, 11, "submitted")?,
        num(r, 12, "accepted")?,
        num(r, 13, "rejected")?,
        num(r, 14, "completed_on_time")?,
        num(r, 15, "missed")?,
    )
    .map_err(|e| e.to_string())?;
    metrics.mean_response_us = num::<f64>(r, 19, "mean_response_ms")? * MICROS_PER_MS as f64;
    metrics.mean_fallback_lead_us =
        num::<f64>(r, 20, "mean_fallback_lead_ms")? * MICROS_PER_MS as f64;
    Ok(CsvRow {
        run_id: num(r, 0, "run_id")?,
        scenario: r[1].to_string(),
        scheduler,
        heuristic,
        u_factor,
        clients: num(r, 5, "clients")?,
        workers: num(r, 6, "workers")?,
        laxity_mean_ms: num(r, 7, "laxity_mean_ms")?,
        latency_mean_ms: num(r, 8, "latency_mean_ms")?,
        latency_std_ms: num(r, 9, "latency_std_ms")?,
        seed: num(r, 10, "seed")?,
        metrics,
    })
}

/// Per-task trace of a finished run; times in microseconds.
pub fn write_trace_csv<W: Write>(mut out: W, world: &World) -> Result<(), SimError> {
    writeln!(out, "{TRACE_HEADER}")?;
    for rec in world.tasks().values() {
        let decision = rec
            .decision
            .map(|(t, _)| t.0.to_string())
            .unwrap_or_default();
        let worker = match rec.decision {
            Some((_, Decision::Accept { .. })) => {
                rec.worker.map(|w| w.0.to_string()).unwrap_or_default()
            }
            _ => String::new(),
        };
        let completion = rec
            .outcome()
            .and_then(|o| o.completion_time)
            .map(|t| t.0.to_string())
            .unwrap_or_default();
        let verdict = rec.verdict.map(|v| v.as_str()).unwrap_or("in_flight");
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            rec.task.id,
            rec.task.client,
            rec.submit.0,
            decision,
            worker,
            rec.dispatches,
            rec.preemptions,
            completion,
            rec.task.absolute_deadline.0,
            verdict
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> CsvRow {
        let cfg = ScenarioConfig::default();
        let mut m = RunMetrics::from_counts(10, 8, 2, 7, 1).unwrap();
        m.mean_response_us = 123_456.0;
        m.mean_fallback_lead_us = -1_500.0;
        CsvRow::new(3, "1", &cfg, m)
    }

    #[test]
    fn header_has_all_columns() {
        assert_eq!(CSV_HEADER.split(',').count(), 21);
        assert_eq!(row().to_line().split(',').count(), 21);
    }

    #[test]
    fn line_format() {
        assert_eq!(
            row().to_line(),
            "3,1,latency_aware,worst_fit,1,50,3,100,30,10,0,10,8,2,7,1,0,0.700000,0.125000,123.456,-1.500"
        );
    }

    #[test]
    fn write_then_read() {
        let mut reference = row();
        reference.scheduler = SchedulerKind::Reference;
        reference.u_factor = None;
        let rows = vec![row(), reference];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let back = read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn malformed_rows_name_their_line() {
        let text = format!("{CSV_HEADER}\n{}\n1,2,3\n", row().to_line());
        match read_csv(&text) {
            Err(SimError::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let bad_value = format!(
            "{CSV_HEADER}\n{}\n",
            row().to_line().replace("worst_fit", "zigzag")
        );
        assert!(matches!(
            read_csv(&bad_value),
            Err(SimError::Csv { line: 2, .. })
        ));
        assert!(matches!(
            read_csv("a,b\n"),
            Err(SimError::Csv { line: 1, .. })
        ));
    }
}
