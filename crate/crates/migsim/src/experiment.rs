//! Resolves a config into concrete inputs and runs the simulations.
//!
//! Output layout of `run`:
//!
//! ```text
//! <out>/resolved_config.toml
//! <out>/plans/<design>.json
//! <out>/traces/seed<s>.jsonl
//! <out>/reports/<design>__seed<s>.json
//! <out>/queries/<design>__seed<s>.csv
//! <out>/summary.csv
//! <out>/plot_data.csv
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use migsim_core::metrics::{
    compare, derive_sla_target, gpu_max, latency_bounded_throughput, DesignResult, LbtOutcome, PlanKind,
};
use migsim_core::paris::{homogeneous_plan, paris_plan, random_plan, segment_batches, ParisOutcome};
use migsim_core::profile::{normalize_sizes, synth_profile, PartitionSize, ProfileTable};
use migsim_core::{
    run, BatchDistribution, DesignPoint, LoadSearch, PartitionPlan, Policy, QueryTrace, ServerSpec, SimOptions,
    SimReport, SlaConfig, SyntheticProfileParams,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{parse_policy, ExperimentConfig, PlanSpec, SweepConfig, SyntheticConfig};
use crate::error::{CliError, Result};
use crate::formats::{plan_from_layout, read_profile_csv, write_query_csv, write_trace_jsonl, PlanJson, ReportJson};

/// A validated config with every derived input made explicit.
#[derive(Clone, Debug)]
pub struct Experiment {
    /// Re-running this config reproduces the experiment.
    pub resolved: ExperimentConfig,
    pub out_dir: PathBuf,
    pub table: ProfileTable,
    pub dist: BatchDistribution,
    pub sla: SlaConfig,
    pub percentile: f64,
    pub server: ServerSpec,
    pub paris: Option<ParisOutcome>,
    pub designs: Vec<DesignPoint>,
    pub options: SimOptions,
    pub baseline: String,
}

impl Experiment {
    /// `base_dir` anchors relative input paths; `output_root` anchors a
    /// relative `output_dir`.
    pub fn prepare(cfg: &ExperimentConfig, base_dir: &Path, output_root: Option<&Path>) -> Result<Self> {
        cfg.validate()?;
        let mut resolved = cfg.clone();
        let out_dir = absolute(&cfg.output_path(output_root))?;
        resolved.output_dir = out_dir.clone();

        let sizes: Vec<PartitionSize> =
            normalize_sizes(&cfg.server.sizes.iter().map(|&k| PartitionSize::new(k)).collect::<Result<Vec<_>, _>>()?)?;
        let b_max = cfg.workload.pmf.as_ref().map(|p| p.len() as u32).or(cfg.workload.b_max);

        let table = if let Some(csv) = &cfg.profile.csv {
            let path = absolute(&base_dir.join(csv))?;
            let file = fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
            let table = read_profile_csv(std::io::BufReader::new(file))
                .map_err(|e| CliError::invalid("profile.csv", e))?
                .restrict(&sizes)
                .map_err(|e| CliError::invalid("profile.csv", format!("{e} (needed by server.sizes)")))?;
            if let Some(b) = b_max {
                if b > table.b_max() {
                    return Err(CliError::invalid(
                        "workload.b_max",
                        format!("{b} exceeds the profile grid (b_max {})", table.b_max()),
                    ));
                }
            }
            resolved.profile.csv = Some(path);
            table
        } else {
            let params = match (&cfg.profile.preset, &cfg.profile.synthetic) {
                (Some(name), _) => SyntheticProfileParams::preset(name).expect("validated preset"),
                (None, Some(s)) => SyntheticProfileParams {
                    work_per_sample_ms: s.work_per_sample_ms,
                    fixed_overhead_ms: s.fixed_overhead_ms,
                    parallelism_per_sample: s.parallelism_per_sample,
                    util_cap: s.util_cap,
                },
                (None, None) => unreachable!("validated profile source"),
            };
            let model = cfg.profile.model.clone().or_else(|| cfg.profile.preset.clone()).unwrap_or("custom".into());
            let table = synth_profile(model.clone(), &params, &sizes, b_max.unwrap_or(32))
                .map_err(|e| CliError::invalid("profile.synthetic", e))?;
            resolved.profile.model = Some(model);
            resolved.profile.preset = None;
            resolved.profile.synthetic = Some(SyntheticConfig {
                work_per_sample_ms: params.work_per_sample_ms,
                fixed_overhead_ms: params.fixed_overhead_ms,
                parallelism_per_sample: params.parallelism_per_sample,
                util_cap: params.util_cap,
            });
            table
        };
        let b_max = b_max.unwrap_or(table.b_max());
        if cfg.workload.pmf.is_none() {
            resolved.workload.b_max = Some(b_max);
        }

        let dist = match &cfg.workload.pmf {
            Some(w) => BatchDistribution::from_weights(w).map_err(|e| CliError::invalid("workload.pmf", e))?,
            None => BatchDistribution::lognormal(cfg.workload.mu, cfg.workload.sigma, b_max)
                .map_err(|e| CliError::invalid("workload", e))?,
        };

        let target = match cfg.sla.target_ms {
            Some(t) => t,
            None => derive_sla_target(&table, b_max, cfg.sla.multiplier).map_err(|e| CliError::invalid("sla", e))?,
        };
        resolved.sla.target_ms = Some(target);
        let sla = SlaConfig::new(target, cfg.sla.alpha, cfg.sla.beta)?;

        let server = ServerSpec {
            num_gpus: cfg.server.num_gpus,
            gpcs_per_gpu: cfg.server.gpcs_per_gpu,
            gpc_budget: cfg.server.gpc_budget.unwrap_or(cfg.server.num_gpus * cfg.server.gpcs_per_gpu),
        };
        server.validate().map_err(|e| CliError::invalid("server", e))?;

        let wants_paris = cfg.designs.iter().any(|d| PlanSpec::parse(&d.plan) == Some(PlanSpec::Paris));
        let paris = if wants_paris {
            Some(paris_plan(&table, &dist, &server, cfg.profile.knee_threshold).map_err(|e| CliError::invalid("designs", e))?)
        } else {
            None
        };

        let mut designs: Vec<DesignPoint> = Vec::new();
        let mut specs = Vec::new();
        for (i, d) in cfg.designs.iter().enumerate() {
            let field = format!("designs[{i}]");
            let policy = parse_policy(&format!("{field}.scheduler"), &d.scheduler)?;
            let spec = PlanSpec::parse(&d.plan).expect("validated plan spec");
            if spec == PlanSpec::GpuMax {
                for &k in &sizes {
                    let label = DesignPoint::label_for(PlanKind::Homogeneous(k), policy);
                    let listed = cfg.designs.iter().any(|o| {
                        PlanSpec::parse(&o.plan) == Some(PlanSpec::Homogeneous(k.gpcs()))
                            && parse_policy("", &o.scheduler).ok() == Some(policy)
                    });
                    if !listed && !designs.iter().any(|x| x.label == label) {
                        let plan = homogeneous_plan(k, &server).map_err(|e| CliError::invalid(&field, e))?;
                        designs.push(DesignPoint::new(PlanKind::Homogeneous(k), plan, policy));
                        specs.push((format!("GPU({})", k.gpcs()), d.scheduler.clone()));
                    }
                }
                continue;
            }
            let (kind, plan) = if let Some(layout) = &d.gpus {
                let plan = plan_from_layout(layout, server.gpcs_per_gpu)
                    .map_err(|e| CliError::invalid(format!("{field}.gpus"), e))?;
                (plan_kind(spec), plan)
            } else {
                match spec {
                    PlanSpec::Paris => (PlanKind::Paris, paris.as_ref().expect("computed above").plan.clone()),
                    PlanSpec::Homogeneous(k) => {
                        let k = PartitionSize::new(k)?;
                        (PlanKind::Homogeneous(k), homogeneous_plan(k, &server).map_err(|e| CliError::invalid(&field, e))?)
                    }
                    PlanSpec::Random(seed) => (
                        PlanKind::Random(seed),
                        random_plan(&server, &sizes, seed).map_err(|e| CliError::invalid(&field, e))?,
                    ),
                    PlanSpec::File => {
                        let path = absolute(&base_dir.join(d.plan_file.as_ref().expect("validated plan_file")))?;
                        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
                        let json: PlanJson = serde_json::from_str(&text)
                            .map_err(|e| CliError::invalid(format!("{field}.plan_file"), e))?;
                        let plan = json
                            .to_plan(server.gpcs_per_gpu)
                            .map_err(|e| CliError::invalid(format!("{field}.plan_file"), e))?;
                        (PlanKind::Fixed, plan)
                    }
                    PlanSpec::GpuMax => unreachable!(),
                }
            };
            if plan.is_empty() {
                return Err(CliError::invalid(&field, "plan has no partitions"));
            }
            if let Some(k) = plan.partitions().into_iter().find(|k| !table.contains(*k)) {
                return Err(CliError::invalid(&field, format!("plan uses {k}, which is not profiled")));
            }
            let point = DesignPoint::new(kind, plan, policy);
            if designs.iter().any(|x| x.label == point.label) {
                return Err(CliError::invalid(&field, format!("duplicate design '{}'", point.label)));
            }
            designs.push(point);
            specs.push((d.plan.clone(), d.scheduler.clone()));
        }
        resolved.designs = designs
            .iter()
            .zip(specs)
            .map(|(d, (plan, scheduler))| crate::config::DesignSpec {
                plan: if d.kind == PlanKind::Fixed { "file".into() } else { plan },
                scheduler,
                plan_file: None,
                gpus: Some(PlanJson::from_plan(&d.plan).gpus),
            })
            .collect();

        let baseline = match &cfg.search.baseline {
            Some(b) if designs.iter().any(|d| &d.label == b) => b.clone(),
            Some(b) => {
                return Err(CliError::invalid(
                    "search.baseline",
                    format!("normalization baseline '{b}' is not among the designs"),
                ))
            }
            // the largest size under FIFS when present, else the first design
            None => {
                let largest = DesignPoint::label_for(PlanKind::Homogeneous(table.largest_size()), Policy::Fifs);
                if designs.iter().any(|d| d.label == largest) {
                    largest
                } else {
                    designs[0].label.clone()
                }
            }
        };

        let segment_routing = if cfg.engine.segment_routing {
            Some(segment_batches(&table.knees(cfg.profile.knee_threshold)?, b_max)?)
        } else {
            None
        };
        let options = SimOptions {
            warmup_fraction: cfg.engine.warmup_fraction,
            noise_sigma: cfg.engine.noise_sigma,
            noise_seed: cfg.engine.noise_seed,
            check_wait_consistency: cfg.engine.check_wait_consistency,
            segment_routing,
        };

        Ok(Experiment {
            resolved,
            out_dir,
            table,
            dist,
            sla,
            percentile: cfg.sla.percentile,
            server,
            paris,
            designs,
            options,
            baseline,
        })
    }

    pub fn load_search(&self) -> LoadSearch {
        LoadSearch {
            dist: self.dist.clone(),
            duration_ms: self.resolved.workload.duration_ms,
            seeds: self.resolved.workload.seeds.clone(),
            percentile: self.percentile,
            rel_tol: self.resolved.search.rel_tol,
            options: self.options.clone(),
        }
    }

    pub fn trace(&self, rate_qps: f64, seed: u64) -> Result<QueryTrace> {
        Ok(QueryTrace::sample(&self.dist, rate_qps, self.resolved.workload.duration_ms, seed)?)
    }

    pub fn simulate(&self, design: &DesignPoint, trace: &QueryTrace) -> Result<SimReport> {
        Ok(run(&design.plan, design.policy, trace, &self.table, &self.sla, &self.options)?)
    }

    /// Mean tail latency and violation fraction over the configured seeds.
    pub fn evaluate(&self, design: &DesignPoint, rate_qps: f64) -> Result<LoadPoint> {
        let seeds = &self.resolved.workload.seeds;
        let (mut tail, mut violations) = (0.0, 0.0);
        for &seed in seeds {
            let report = self.simulate(design, &self.trace(rate_qps, seed)?)?;
            tail += report.tail(self.percentile).unwrap_or(0.0);
            let n = report.measured_count();
            if n > 0 {
                violations += report.violations() as f64 / n as f64;
            }
        }
        let n = seeds.len() as f64;
        Ok(LoadPoint { tail_ms: tail / n, violation_rate: violations / n })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoadPoint {
    pub tail_ms: f64,
    pub violation_rate: f64,
}

fn plan_kind(spec: PlanSpec) -> PlanKind {
    match spec {
        PlanSpec::Paris => PlanKind::Paris,
        PlanSpec::Homogeneous(k) => PlanKind::Homogeneous(PartitionSize::new(k).expect("validated size")),
        PlanSpec::Random(seed) => PlanKind::Random(seed),
        PlanSpec::File | PlanSpec::GpuMax => PlanKind::Fixed,
    }
}

fn absolute(path: &Path) -> Result<PathBuf> {
    std::path::absolute(path).map_err(|e| CliError::io(path, e))
}

/// Lowercase file stem for a design label, e.g. `GPU(7)+FIFS` → `gpu7_fifs`.
pub fn slug(label: &str) -> String {
    let mut out = String::new();
    for c in label.chars() {
        match c {
            c if c.is_ascii_alphanumeric() => out.push(c.to_ascii_lowercase()),
            '+' => out.push('_'),
            _ => {}
        }
    }
    out
}

/// One summary CSV row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRecord {
    pub design: String,
    pub plan: String,
    pub scheduler: String,
    pub partitions: usize,
    pub gpcs: u32,
    pub seeds: String,
    pub rate_qps: f64,
    pub tail_ms: f64,
    pub violation_rate: f64,
    pub server_utilization: f64,
    pub lbt_qps: f64,
    pub lbt_unattainable: bool,
    pub lbt_normalized: f64,
    pub pinned_rate_qps: f64,
    pub tail_pinned_ms: f64,
    pub tail_pinned_normalized: f64,
    pub gpu_max: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlotRecord {
    pub design: String,
    pub offered_qps: f64,
    pub tail_ms: f64,
    pub violation_rate: f64,
    pub sla_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub summary: Vec<SummaryRecord>,
    pub gpu_max: Option<String>,
}

/// Runs every design at the configured rate, finds each design's
/// latency-bounded throughput, and writes all artifacts.
pub fn run_experiment(exp: &Experiment) -> Result<RunOutcome> {
    let out = &exp.out_dir;
    for sub in ["plans", "traces", "reports", "queries"] {
        let dir = out.join(sub);
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    }
    write_text(&out.join("resolved_config.toml"), &exp.resolved.to_toml()?)?;
    for d in &exp.designs {
        write_json(&out.join("plans").join(format!("{}.json", slug(&d.label))), &PlanJson::from_plan(&d.plan))?;
    }

    let rate = exp.resolved.workload.rate_qps;
    let seeds = &exp.resolved.workload.seeds;
    let traces: Vec<QueryTrace> = seeds.iter().map(|&s| exp.trace(rate, s)).collect::<Result<_>>()?;
    for t in &traces {
        let path = out.join("traces").join(format!("seed{}.jsonl", t.seed));
        write_with(&path, |w| write_trace_jsonl(w, t))?;
    }

    // per-seed reports at the configured rate
    let jobs: Vec<(usize, usize)> =
        (0..exp.designs.len()).flat_map(|d| (0..traces.len()).map(move |t| (d, t))).collect();
    let reports: Vec<ReportJson> = jobs
        .par_iter()
        .map(|&(d, t)| {
            let design = &exp.designs[d];
            let report = exp.simulate(design, &traces[t])?;
            let stem = format!("{}__seed{}", slug(&design.label), traces[t].seed);
            write_with(&out.join("queries").join(format!("{stem}.csv")), |w| write_query_csv(w, &report))?;
            let json = ReportJson::new(&design.label, rate, exp.percentile, &report);
            write_json(&out.join("reports").join(format!("{stem}.json")), &json)?;
            Ok(json)
        })
        .collect::<Result<_>>()?;

    let search = exp.load_search();
    let lbts: Vec<LbtOutcome> = exp
        .designs
        .par_iter()
        .map(|d| Ok(latency_bounded_throughput(d, &exp.table, &exp.sla, &search)?))
        .collect::<Result<_>>()?;

    let mut results: Vec<DesignResult> = exp
        .designs
        .iter()
        .zip(&lbts)
        .map(|(d, l)| DesignResult {
            label: d.label.clone(),
            kind: d.kind,
            policy: d.policy,
            seeds: seeds.clone(),
            lbt_qps: l.rate_qps,
            tail_ms: 0.0,
        })
        .collect();
    let best = gpu_max(&results).filter(|r| r.lbt_qps > 0.0).map(|r| (r.label.clone(), r.lbt_qps));
    let pinned = best.as_ref().map_or(rate, |b| b.1);
    let tails: Vec<f64> = exp
        .designs
        .par_iter()
        .map(|d| Ok(exp.evaluate(d, pinned)?.tail_ms))
        .collect::<Result<_>>()?;
    for (r, t) in results.iter_mut().zip(&tails) {
        r.tail_ms = *t;
    }
    let normalized = compare(&results, &exp.baseline)?;

    let summary: Vec<SummaryRecord> = exp
        .designs
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let mine: Vec<&ReportJson> = reports[i * seeds.len()..(i + 1) * seeds.len()].iter().collect();
            let n = mine.len() as f64;
            let violation_rate = mine
                .iter()
                .map(|r| if r.measured > 0 { r.violations as f64 / r.measured as f64 } else { 0.0 })
                .sum::<f64>()
                / n;
            SummaryRecord {
                design: d.label.clone(),
                plan: d.kind.to_string(),
                scheduler: d.policy.name().to_string(),
                partitions: d.plan.num_partitions(),
                gpcs: d.plan.gpcs_used(),
                seeds: seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(" "),
                rate_qps: rate,
                tail_ms: mine.iter().map(|r| r.tail_ms.unwrap_or(0.0)).sum::<f64>() / n,
                violation_rate,
                server_utilization: mine.iter().map(|r| r.server_utilization).sum::<f64>() / n,
                lbt_qps: lbts[i].rate_qps,
                lbt_unattainable: lbts[i].violates_at_min_load,
                lbt_normalized: normalized[i].lbt_normalized,
                pinned_rate_qps: pinned,
                tail_pinned_ms: normalized[i].tail_ms,
                tail_pinned_normalized: normalized[i].tail_normalized,
                gpu_max: best.as_ref().is_some_and(|b| b.0 == d.label),
            }
        })
        .collect();
    write_csv(&out.join("summary.csv"), &summary)?;

    // tail latency against offered load, on a grid shared by all designs
    let top = lbts.iter().map(|l| l.rate_qps).fold(0.0, f64::max);
    let top = if top > 0.0 { top } else { rate };
    let points = exp.resolved.search.curve_points;
    let grid: Vec<f64> =
        (1..=points).map(|i| exp.resolved.search.curve_headroom * top * f64::from(i) / f64::from(points)).collect();
    let cells: Vec<(usize, f64)> =
        (0..exp.designs.len()).flat_map(|d| grid.iter().map(move |&r| (d, r))).collect();
    let plot: Vec<PlotRecord> = cells
        .par_iter()
        .map(|&(d, r)| {
            let p = exp.evaluate(&exp.designs[d], r)?;
            Ok(PlotRecord {
                design: exp.designs[d].label.clone(),
                offered_qps: r,
                tail_ms: p.tail_ms,
                violation_rate: p.violation_rate,
                sla_ms: exp.sla.sla_target_ms,
            })
        })
        .collect::<Result<_>>()?;
    write_csv(&out.join("plot_data.csv"), &plot)?;

    Ok(RunOutcome { out_dir: out.clone(), summary, gpu_max: best.map(|b| b.0) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityRecord {
    pub parameter: String,
    pub value: f64,
    pub design: String,
    pub lbt_qps: f64,
    pub gain_vs_gpu_max: f64,
    pub tail_pinned_ms: f64,
}

/// Runs the experiment once per swept value, each into
/// `<out>/<parameter>_<value>/`, and writes `<out>/sensitivity.csv`.
pub fn sweep(cfg: &ExperimentConfig, base_dir: &Path, output_root: Option<&Path>) -> Result<Vec<SensitivityRecord>> {
    cfg.validate()?;
    let Some(SweepConfig { parameter, values }) = cfg.sweep.clone() else {
        return Err(CliError::invalid("sweep", "the sweep command needs a [sweep] section"));
    };
    let root = absolute(&cfg.output_path(output_root))?;
    let mut rows = Vec::new();
    for value in values {
        let mut point = cfg.clone();
        point.sweep = None;
        parameter.apply(&mut point, value);
        point.output_dir = root.join(format!("{}_{value}", parameter.name()));
        let exp = Experiment::prepare(&point, base_dir, None)?;
        let outcome = run_experiment(&exp)?;
        let best = outcome.summary.iter().find(|r| r.gpu_max).map(|r| r.lbt_qps);
        for r in &outcome.summary {
            rows.push(SensitivityRecord {
                parameter: parameter.name().to_string(),
                value,
                design: r.design.clone(),
                lbt_qps: r.lbt_qps,
                gain_vs_gpu_max: best.map_or(f64::NAN, |b| r.lbt_qps / b),
                tail_pinned_ms: r.tail_pinned_ms,
            });
        }
    }
    fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
    write_csv(&root.join("sensitivity.csv"), &rows)?;
    Ok(rows)
}

/// Human-readable planning diagnostics.
pub fn describe_paris(outcome: &ParisOutcome, dist: &BatchDistribution) -> String {
    let mut s = String::new();
    let join = |items: Vec<String>| items.join(", ");
    s += &format!(
        "knees: {}\n",
        join(outcome.knees.iter().map(|(k, b)| format!("{k}={b}")).collect())
    );
    s += &format!(
        "segments: {}\n",
        join(
            outcome
                .segments
                .iter()
                .map(|seg| {
                    let range = if seg.is_empty() { "empty".to_string() } else { format!("{}..={}", seg.lo + 1, seg.hi) };
                    format!("{}[{range}] mass {:.4}", seg.k, dist.mass(seg.lo, seg.hi))
                })
                .collect()
        )
    );
    s += &format!(
        "instances per 100 queries/s: {}\n",
        join(outcome.ratios.ratios.iter().map(|(k, r)| format!("{k}={}", fmt_num(100.0 * r))).collect())
    );
    s += &format!(
        "pre-rounding counts (C = {}): {}\n",
        fmt_num(outcome.counts.normalizer),
        join(outcome.counts.counts.iter().map(|(k, n)| format!("{k}={}", fmt_num(*n))).collect())
    );
    s += &format!(
        "placed: {} ({} GPCs)\n",
        join(outcome.plan.instances().iter().map(|(k, n)| format!("{n}x{k}")).collect()),
        outcome.plan.gpcs_used()
    );
    s
}

fn fmt_num(x: f64) -> String {
    let r = (x * 1e6).round() / 1e6;
    format!("{r}")
}

pub fn paris_outcome(exp: &Experiment) -> Result<ParisOutcome> {
    match &exp.paris {
        Some(p) => Ok(p.clone()),
        None => Ok(paris_plan(&exp.table, &exp.dist, &exp.server, exp.resolved.profile.knee_threshold)?),
    }
}

/// Plan for a single design spec, e.g. `PARIS` or `GPU(3)`.
pub fn plan_for(exp: &Experiment, spec: &str) -> Result<PartitionPlan> {
    let parsed = PlanSpec::parse(spec)
        .ok_or_else(|| CliError::invalid("--design", format!("unknown plan '{spec}'")))?;
    match parsed {
        PlanSpec::Paris => Ok(paris_outcome(exp)?.plan),
        PlanSpec::Homogeneous(k) => Ok(homogeneous_plan(PartitionSize::new(k)?, &exp.server)?),
        PlanSpec::Random(seed) => Ok(random_plan(&exp.server, exp.table.sizes(), seed)?),
        PlanSpec::GpuMax | PlanSpec::File => {
            Err(CliError::invalid("--design", "expected PARIS, GPU(k) or Random(seed)"))
        }
    }
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_with(path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        for r in rows {
            csv.serialize(r).map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        csv.flush().map_err(|e| CliError::io(path, e))
    })
}
