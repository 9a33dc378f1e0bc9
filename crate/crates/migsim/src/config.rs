//! TOML experiment configuration.
//!
//! Every section except `profile`, `workload` and `designs` has defaults.
//! Validation errors name the offending field, e.g. `designs[1].scheduler`.

use std::path::{Path, PathBuf};

use migsim_core::profile::PartitionSize;
use migsim_core::Policy;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Relative paths resolve against the output root (see [`OUTPUT_ROOT_ENV`]).
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub profile: ProfileConfig,
    pub workload: WorkloadConfig,
    #[serde(default)]
    pub server: ServerConfig,
    #[serde(default)]
    pub sla: SlaSection,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    pub designs: Vec<DesignSpec>,
}

/// Directory that relative `output_dir` values are placed under.
pub const OUTPUT_ROOT_ENV: &str = "MIGSIM_OUTPUT_ROOT";

/// Exactly one of `preset`, `synthetic` or `csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default = "default_knee_threshold")]
    pub knee_threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub work_per_sample_ms: f64,
    pub fixed_overhead_ms: f64,
    pub parallelism_per_sample: f64,
    #[serde(default = "default_util_cap")]
    pub util_cap: f64,
}

/// Batch mix and arrivals. An explicit `pmf` (weights for batch 1, 2, ...)
/// replaces the log-normal `mu`/`sigma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmf: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_max: Option<u32>,
    pub rate_qps: f64,
    #[serde(default = "default_duration")]
    pub duration_ms: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    #[serde(default = "default_num_gpus")]
    pub num_gpus: u32,
    #[serde(default = "default_gpcs_per_gpu")]
    pub gpcs_per_gpu: u32,
    /// Defaults to every GPC on the server.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gpc_budget: Option<u32>,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<u32>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            num_gpus: default_num_gpus(),
            gpcs_per_gpu: default_gpcs_per_gpu(),
            gpc_budget: None,
            sizes: default_sizes(),
        }
    }
}

/// SLA target is `multiplier ×` the max-batch latency on the largest size
/// unless `target_ms` pins it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlaSection {
    #[serde(default = "default_multiplier")]
    pub multiplier: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_ms: Option<f64>,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default = "default_percentile")]
    pub percentile: f64,
}

impl Default for SlaSection {
    fn default() -> Self {
        SlaSection {
            multiplier: default_multiplier(),
            target_ms: None,
            alpha: 1.0,
            beta: 1.0,
            percentile: default_percentile(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    #[serde(default = "default_warmup")]
    pub warmup_fraction: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub noise_seed: u64,
    #[serde(default)]
    pub segment_routing: bool,
    #[serde(default)]
    pub check_wait_consistency: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            warmup_fraction: default_warmup(),
            noise_sigma: 0.0,
            noise_seed: 0,
            segment_routing: false,
            check_wait_consistency: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    /// Load levels per design in the plot-data curve.
    #[serde(default = "default_curve_points")]
    pub curve_points: u32,
    /// The curve spans up to this multiple of the best design's throughput.
    #[serde(default = "default_curve_headroom")]
    pub curve_headroom: f64,
    /// Design label that summary columns are normalized against; defaults
    /// to the largest size under FIFS, e.g. `GPU(7)+FIFS`, when that design
    /// is present and to the first design otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            rel_tol: default_rel_tol(),
            curve_points: default_curve_points(),
            curve_headroom: default_curve_headroom(),
            baseline: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Sigma,
    Mu,
    SlaMultiplier,
    RateQps,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Sigma => "sigma",
            SweepParameter::Mu => "mu",
            SweepParameter::SlaMultiplier => "sla_multiplier",
            SweepParameter::RateQps => "rate_qps",
        }
    }

    pub fn apply(self, cfg: &mut ExperimentConfig, value: f64) {
        match self {
            SweepParameter::Sigma => cfg.workload.sigma = value,
            SweepParameter::Mu => cfg.workload.mu = value,
            SweepParameter::SlaMultiplier => {
                cfg.sla.multiplier = value;
                cfg.sla.target_ms = None;
            }
            SweepParameter::RateQps => cfg.workload.rate_qps = value,
        }
    }
}

/// One plan × scheduler pair. `plan` is `PARIS`, `GPU(k)`, `GPU(max)`,
/// `Random(seed)` or `file` (with `plan_file`). An explicit `gpus` layout
/// pins the placement and skips planning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub plan: String,
    pub scheduler: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gpus: Option<Vec<Vec<u32>>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanSpec {
    Paris,
    Homogeneous(u32),
    GpuMax,
    Random(u64),
    File,
}

impl PlanSpec {
    pub fn parse(text: &str) -> Option<PlanSpec> {
        let t = text.trim().to_ascii_lowercase();
        let inner = |prefix: &str| t.strip_prefix(prefix).and_then(|r| r.strip_suffix(')')).map(str::trim);
        match t.as_str() {
            "paris" => return Some(PlanSpec::Paris),
            "file" => return Some(PlanSpec::File),
            _ => {}
        }
        if let Some(arg) = inner("gpu(") {
            return if arg == "max" { Some(PlanSpec::GpuMax) } else { arg.parse().ok().map(PlanSpec::Homogeneous) };
        }
        inner("random(").and_then(|a| a.parse().ok()).map(PlanSpec::Random)
    }
}

pub fn parse_policy(field: &str, text: &str) -> Result<Policy> {
    text.parse::<Policy>()
        .map_err(|_| CliError::invalid(field, format!("unknown scheduler '{text}' (expected fifs | elsa)")))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {}", e.to_string().trim_end())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Runtime(format!("cannot serialize config: {e}")))
    }

    /// Checks ranges and cross-field constraints that need no file access.
    pub fn validate(&self) -> Result<()> {
        let p = &self.profile;
        let sources = [p.preset.is_some(), p.synthetic.is_some(), p.csv.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(CliError::invalid("profile", "set exactly one of preset, synthetic, csv"));
        }
        if let Some(name) = &p.preset {
            if migsim_core::SyntheticProfileParams::preset(name).is_none() {
                return Err(CliError::invalid(
                    "profile.preset",
                    format!("unknown preset '{name}' (expected light | medium | heavy)"),
                ));
            }
        }
        if !(p.knee_threshold > 0.0 && p.knee_threshold <= 1.0) {
            return Err(CliError::invalid("profile.knee_threshold", "must be in (0, 1]"));
        }

        let w = &self.workload;
        if w.pmf.is_none() {
            positive("workload.sigma", w.sigma)?;
            if !w.mu.is_finite() {
                return Err(CliError::invalid("workload.mu", "must be finite"));
            }
        }
        if w.b_max == Some(0) {
            return Err(CliError::invalid("workload.b_max", "must be >= 1"));
        }
        if let (Some(pmf), Some(b)) = (&w.pmf, w.b_max) {
            if pmf.len() != b as usize {
                return Err(CliError::invalid(
                    "workload.b_max",
                    format!("is {b} but pmf lists {} batch sizes", pmf.len()),
                ));
            }
        }
        positive("workload.rate_qps", w.rate_qps)?;
        positive("workload.duration_ms", w.duration_ms)?;
        if w.seeds.is_empty() {
            return Err(CliError::invalid("workload.seeds", "needs at least one seed"));
        }
        let mut seeds = w.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != w.seeds.len() {
            return Err(CliError::invalid("workload.seeds", "seeds must be distinct"));
        }

        let s = &self.server;
        if s.num_gpus == 0 {
            return Err(CliError::invalid("server.num_gpus", "must be >= 1"));
        }
        if s.gpcs_per_gpu == 0 {
            return Err(CliError::invalid("server.gpcs_per_gpu", "must be >= 1"));
        }
        if s.sizes.is_empty() {
            return Err(CliError::invalid("server.sizes", "must list at least one size"));
        }
        for (i, &k) in s.sizes.iter().enumerate() {
            if PartitionSize::new(k).is_err() || k > s.gpcs_per_gpu {
                return Err(CliError::invalid(
                    format!("server.sizes[{i}]"),
                    format!("size {k} must be in 1..={}", s.gpcs_per_gpu),
                ));
            }
        }
        if let Some(b) = s.gpc_budget {
            if b == 0 || b > s.num_gpus * s.gpcs_per_gpu {
                return Err(CliError::invalid(
                    "server.gpc_budget",
                    format!("must be in 1..={}", s.num_gpus * s.gpcs_per_gpu),
                ));
            }
        }

        positive("sla.multiplier", self.sla.multiplier)?;
        if let Some(t) = self.sla.target_ms {
            positive("sla.target_ms", t)?;
        }
        nonnegative("sla.alpha", self.sla.alpha)?;
        nonnegative("sla.beta", self.sla.beta)?;
        if !(self.sla.percentile > 0.0 && self.sla.percentile < 1.0) {
            return Err(CliError::invalid("sla.percentile", "must be in (0, 1)"));
        }

        if !(0.0..1.0).contains(&self.engine.warmup_fraction) {
            return Err(CliError::invalid("engine.warmup_fraction", "must be in [0, 1)"));
        }
        nonnegative("engine.noise_sigma", self.engine.noise_sigma)?;

        if !(self.search.rel_tol > 0.0 && self.search.rel_tol < 1.0) {
            return Err(CliError::invalid("search.rel_tol", "must be in (0, 1)"));
        }
        if self.search.curve_points == 0 {
            return Err(CliError::invalid("search.curve_points", "must be >= 1"));
        }
        positive("search.curve_headroom", self.search.curve_headroom)?;

        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(CliError::invalid("sweep.values", "needs at least one value"));
            }
            for (i, v) in sweep.values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(CliError::invalid(format!("sweep.values[{i}]"), "must be finite"));
                }
            }
        }

        if self.designs.is_empty() {
            return Err(CliError::invalid("designs", "needs at least one design"));
        }
        for (i, d) in self.designs.iter().enumerate() {
            let spec = PlanSpec::parse(&d.plan).ok_or_else(|| {
                CliError::invalid(
                    format!("designs[{i}].plan"),
                    format!("unknown plan '{}' (expected PARIS | GPU(k) | GPU(max) | Random(seed) | file)", d.plan),
                )
            })?;
            parse_policy(&format!("designs[{i}].scheduler"), &d.scheduler)?;
            match spec {
                PlanSpec::Homogeneous(k) if !s.sizes.contains(&k) => {
                    return Err(CliError::invalid(
                        format!("designs[{i}].plan"),
                        format!("GPU({k}) is not in server.sizes"),
                    ));
                }
                PlanSpec::File if d.plan_file.is_none() && d.gpus.is_none() => {
                    return Err(CliError::invalid(format!("designs[{i}].plan_file"), "required for a file plan"));
                }
                PlanSpec::GpuMax if d.gpus.is_some() => {
                    return Err(CliError::invalid(format!("designs[{i}].gpus"), "GPU(max) expands to several plans"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Resolves `output_dir` against `root` when relative.
    pub fn output_path(&self, root: Option<&Path>) -> PathBuf {
        match root {
            Some(r) if self.output_dir.is_relative() => r.join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::invalid(field, format!("must be a positive number, got {v}")))
    }
}

fn nonnegative(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(CliError::invalid(field, format!("must be >= 0, got {v}")))
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("migsim-out")
}
fn default_knee_threshold() -> f64 {
    0.8
}
fn default_util_cap() -> f64 {
    0.95
}
fn default_mu() -> f64 {
    1.0
}
fn default_sigma() -> f64 {
    1.0
}
fn default_duration() -> f64 {
    20_000.0
}
fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}
fn default_num_gpus() -> u32 {
    8
}
fn default_gpcs_per_gpu() -> u32 {
    7
}
fn default_sizes() -> Vec<u32> {
    PartitionSize::DEFAULT_SET.iter().map(|&k| u32::from(k)).collect()
}
fn default_multiplier() -> f64 {
    1.5
}
fn one() -> f64 {
    1.0
}
fn default_percentile() -> f64 {
    0.95
}
fn default_warmup() -> f64 {
    0.1
}
fn default_rel_tol() -> f64 {
    0.01
}
fn default_curve_points() -> u32 {
    10
}
fn default_curve_headroom() -> f64 {
    1.25
}
