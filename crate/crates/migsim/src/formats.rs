//! On-disk formats: profile CSV, trace JSONL, plan JSON, report JSON and
//! per-query CSV.

use std::io::{BufRead, Read, Write};

use migsim_core::profile::{PartitionSize, ProfileRow, ProfileTable};
use migsim_core::workload::{Query, QueryTrace};
use migsim_core::{PartitionPlan, SimReport};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Serialize, Deserialize)]
struct ProfileRecord {
    model: String,
    k: u32,
    batch: u32,
    latency_ms: f64,
    utilization: f64,
}

/// Reads `model,k,batch,latency_ms,utilization` rows. All rows must name
/// the same model.
pub fn read_profile_csv(reader: impl Read) -> Result<ProfileTable> {
    let mut model: Option<String> = None;
    let mut rows = Vec::new();
    let mut csv = csv::Reader::from_reader(reader);
    for (line, record) in csv.deserialize::<ProfileRecord>().enumerate() {
        let r = record.map_err(|e| CliError::Validation(format!("profile row {}: {e}", line + 1)))?;
        match &model {
            None => model = Some(r.model.clone()),
            Some(m) if *m != r.model => {
                return Err(CliError::Validation(format!(
                    "profile row {}: model '{}' differs from '{m}'",
                    line + 1,
                    r.model
                )))
            }
            Some(_) => {}
        }
        let k = PartitionSize::new(r.k)
            .map_err(|e| CliError::Validation(format!("profile row {}: {e}", line + 1)))?;
        rows.push(ProfileRow { k, batch: r.batch, latency_ms: r.latency_ms, utilization: r.utilization });
    }
    let model = model.ok_or_else(|| CliError::Validation("profile has no rows".into()))?;
    Ok(ProfileTable::from_rows(model, &rows)?)
}

pub fn write_profile_csv(writer: impl Write, table: &ProfileTable) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    for p in table.points() {
        csv.serialize(ProfileRecord {
            model: table.model().to_string(),
            k: p.k.gpcs(),
            batch: p.batch,
            latency_ms: p.latency_ms,
            utilization: p.utilization,
        })
        .map_err(runtime)?;
    }
    csv.flush().map_err(|e| CliError::Runtime(e.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceLine {
    id: u64,
    arrival_ms: f64,
    batch: u32,
}

/// One JSON object per line; blank lines are skipped.
pub fn read_trace_jsonl(reader: impl BufRead, duration_ms: f64, seed: u64) -> Result<QueryTrace> {
    let mut queries = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::Validation(format!("trace line {}: {e}", n + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let t: TraceLine = serde_json::from_str(&line)
            .map_err(|e| CliError::Validation(format!("trace line {}: {e}", n + 1)))?;
        queries.push(Query { id: t.id, arrival_ms: t.arrival_ms, batch: t.batch });
    }
    Ok(QueryTrace::new(queries, duration_ms, seed)?)
}

pub fn write_trace_jsonl(mut writer: impl Write, trace: &QueryTrace) -> Result<()> {
    for q in &trace.queries {
        let line = serde_json::to_string(&TraceLine { id: q.id, arrival_ms: q.arrival_ms, batch: q.batch })
            .map_err(runtime)?;
        writeln!(writer, "{line}").map_err(runtime)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceJson {
    pub k: u32,
    pub count: u32,
}

/// `{"gpus":[[sizes...]...],"instances":[{"k":..,"count":..}...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanJson {
    pub gpus: Vec<Vec<u32>>,
    pub instances: Vec<InstanceJson>,
}

impl PlanJson {
    pub fn from_plan(plan: &PartitionPlan) -> Self {
        PlanJson {
            gpus: plan.gpus().iter().map(|g| g.iter().map(|k| k.gpcs()).collect()).collect(),
            instances: plan.instances().into_iter().map(|(k, count)| InstanceJson { k: k.gpcs(), count }).collect(),
        }
    }

    /// Builds the plan from `gpus`; `instances` must agree with it.
    pub fn to_plan(&self, gpcs_per_gpu: u32) -> Result<PartitionPlan> {
        let plan = plan_from_layout(&self.gpus, gpcs_per_gpu)?;
        let mut listed = self.instances.clone();
        listed.retain(|i| i.count > 0);
        listed.sort_by_key(|i| i.k);
        if listed != PlanJson::from_plan(&plan).instances {
            return Err(CliError::Validation("plan instances do not match the per-GPU layout".into()));
        }
        Ok(plan)
    }
}

pub fn plan_from_layout(gpus: &[Vec<u32>], gpcs_per_gpu: u32) -> Result<PartitionPlan> {
    let gpus = gpus
        .iter()
        .map(|g| g.iter().map(|&k| PartitionSize::new(k)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PartitionPlan::new(gpcs_per_gpu, gpus)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct QueryRow {
    id: u64,
    arrival_ms: f64,
    partition: usize,
    start_ms: f64,
    finish_ms: f64,
    latency_ms: f64,
    sla_met: bool,
}

/// Writes one row per query, warmup included.
pub fn write_query_csv(writer: impl Write, report: &SimReport) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    for r in &report.records {
        csv.serialize(QueryRow {
            id: r.id,
            arrival_ms: r.arrival_ms,
            partition: r.partition,
            start_ms: r.start_ms,
            finish_ms: r.finish_ms,
            latency_ms: r.latency_ms,
            sla_met: r.sla_met,
        })
        .map_err(runtime)?;
    }
    csv.flush().map_err(|e| CliError::Runtime(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionJson {
    pub id: usize,
    pub k: u32,
    pub executions: u64,
    pub busy_ms: f64,
    pub busy_fraction: f64,
    pub occupancy: f64,
}

/// Aggregates of one simulation; per-query rows live in the CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub design: String,
    pub scheduler: String,
    pub seed: u64,
    pub rate_qps: f64,
    pub sla_target_ms: f64,
    pub alpha: f64,
    pub beta: f64,
    pub duration_ms: f64,
    pub span_ms: f64,
    pub warmup_ms: f64,
    pub queries: usize,
    pub measured: usize,
    pub violations: usize,
    pub percentile: f64,
    pub tail_ms: Option<f64>,
    pub server_utilization: f64,
    pub partitions: Vec<PartitionJson>,
}

impl ReportJson {
    pub fn new(design: &str, rate_qps: f64, percentile: f64, report: &SimReport) -> Self {
        let partitions = report
            .partitions
            .iter()
            .map(|u| PartitionJson {
                id: u.id,
                k: u.k.gpcs(),
                executions: u.executions,
                busy_ms: u.busy_ms,
                busy_fraction: report.busy_fraction(u.id).unwrap_or(0.0),
                occupancy: report.occupancy(u.id).unwrap_or(0.0),
            })
            .collect();
        ReportJson {
            design: design.to_string(),
            scheduler: report.policy.name().to_string(),
            seed: report.seed,
            rate_qps,
            sla_target_ms: report.sla.sla_target_ms,
            alpha: report.sla.alpha,
            beta: report.sla.beta,
            duration_ms: report.duration_ms,
            span_ms: report.span_ms,
            warmup_ms: report.warmup_ms,
            queries: report.records.len(),
            measured: report.measured_count(),
            violations: report.violations(),
            percentile,
            tail_ms: report.tail(percentile),
            server_utilization: report.server_utilization(),
            partitions,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use migsim_core::profile::{synth_profile, SyntheticProfileParams};
    use migsim_core::workload::BatchDistribution;

    #[test]
    fn profile_csv_round_trip() {
        let sizes = [PartitionSize::new(1).unwrap(), PartitionSize::new(7).unwrap()];
        let t = synth_profile("light", &SyntheticProfileParams::LIGHT, &sizes, 4).unwrap();
        let mut buf = Vec::new();
        write_profile_csv(&mut buf, &t).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("model,k,batch,latency_ms,utilization\n"));
        assert_eq!(read_profile_csv(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn profile_csv_errors() {
        let mixed = "model,k,batch,latency_ms,utilization\na,1,1,2.0,0.5\nb,1,2,2.0,0.5\n";
        assert!(matches!(read_profile_csv(mixed.as_bytes()), Err(CliError::Validation(_))));
        let hole = "model,k,batch,latency_ms,utilization\na,1,1,2.0,0.5\na,2,2,2.0,0.5\n";
        assert!(matches!(read_profile_csv(hole.as_bytes()), Err(CliError::Core(_))));
        let junk = "model,k,batch,latency_ms,utilization\na,1,one,2.0,0.5\n";
        assert!(matches!(read_profile_csv(junk.as_bytes()), Err(CliError::Validation(_))));
    }

    #[test]
    fn trace_jsonl_round_trip() {
        let dist = BatchDistribution::lognormal(1.0, 1.0, 32).unwrap();
        let trace = QueryTrace::sample(&dist, 200.0, 1_000.0, 9).unwrap();
        let mut buf = Vec::new();
        write_trace_jsonl(&mut buf, &trace).unwrap();
        let back = read_trace_jsonl(buf.as_slice(), trace.duration_ms, trace.seed).unwrap();
        assert_eq!(back, trace);
        let first = String::from_utf8(buf).unwrap().lines().next().unwrap().to_string();
        assert!(first.starts_with("{\"id\":0,\"arrival_ms\":"));
    }

    #[test]
    fn unsorted_trace_is_rejected() {
        let text = "{\"id\":0,\"arrival_ms\":5.0,\"batch\":1}\n{\"id\":1,\"arrival_ms\":1.0,\"batch\":1}\n";
        assert!(read_trace_jsonl(text.as_bytes(), 10.0, 0).is_err());
    }

    #[test]
    fn plan_json_shape() {
        let plan = plan_from_layout(&[vec![4, 3], vec![1, 1, 2, 3]], 7).unwrap();
        let json = serde_json::to_string(&PlanJson::from_plan(&plan)).unwrap();
        assert_eq!(
            json,
            r#"{"gpus":[[4,3],[3,2,1,1]],"instances":[{"k":1,"count":2},{"k":2,"count":1},{"k":3,"count":2},{"k":4,"count":1}]}"#
        );
        let parsed: PlanJson = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.to_plan(7).unwrap(), plan);

        let wrong = PlanJson { gpus: vec![vec![7]], instances: vec![InstanceJson { k: 3, count: 1 }] };
        assert!(matches!(wrong.to_plan(7), Err(CliError::Validation(_))));
        assert!(plan_from_layout(&[vec![4, 4]], 7).is_err());
    }
}
