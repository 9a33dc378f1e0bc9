use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use migsim::config::ExperimentConfig;
use migsim::experiment::{describe_paris, paris_outcome, plan_for};
use migsim::formats::PlanJson;
use migsim::{run_experiment, sweep, CliError, Experiment, OUTPUT_ROOT_ENV};

/// Simulate inference serving on partitioned GPUs.
#[derive(Parser, Debug)]
#[command(name = "migsim", version)]
struct Cli {
    /// Worker threads for independent simulations (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate every design, search latency-bounded throughput, write reports.
    Run(Target),
    /// Print a partition plan as JSON without simulating.
    Plan {
        #[command(flatten)]
        target: Target,
        /// PARIS, GPU(k) or Random(seed).
        #[arg(long, default_value = "PARIS")]
        design: String,
    },
    /// Repeat the experiment for each value in the [sweep] section.
    Sweep(Target),
}

#[derive(Args, Debug)]
struct Target {
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

/// Flags that replace config scalars.
#[derive(Args, Debug)]
struct Overrides {
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Comma-separated, e.g. `1,2,3`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    rate_qps: Option<f64>,
    #[arg(long)]
    duration_ms: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    sla_multiplier: Option<f64>,
    #[arg(long)]
    num_gpus: Option<u32>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = &self.output_dir {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = &self.seeds {
            cfg.workload.seeds = v.clone();
        }
        if let Some(v) = self.rate_qps {
            cfg.workload.rate_qps = v;
        }
        if let Some(v) = self.duration_ms {
            cfg.workload.duration_ms = v;
        }
        if let Some(v) = self.mu {
            cfg.workload.mu = v;
        }
        if let Some(v) = self.sigma {
            cfg.workload.sigma = v;
        }
        if let Some(v) = self.sla_multiplier {
            cfg.sla.multiplier = v;
            cfg.sla.target_ms = None;
        }
        if let Some(v) = self.num_gpus {
            cfg.server.num_gpus = v;
        }
    }
}

fn load(target: &Target) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let mut cfg = ExperimentConfig::load(&target.config)?;
    target.overrides.apply(&mut cfg);
    let base = target.config.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from);
    match cli.command {
        Command::Run(target) => {
            let (cfg, base) = load(&target)?;
            let exp = Experiment::prepare(&cfg, &base, root.as_deref())?;
            eprintln!("SLA target {:.3} ms, {} designs", exp.sla.sla_target_ms, exp.designs.len());
            let outcome = run_experiment(&exp)?;
            for r in &outcome.summary {
                eprintln!(
                    "{:<18} lbt {:>10.1} q/s ({:.3}x)  p{:.0} {:.3} ms @ {:.1} q/s{}",
                    r.design,
                    r.lbt_qps,
                    r.lbt_normalized,
                    100.0 * exp.percentile,
                    r.tail_pinned_ms,
                    r.pinned_rate_qps,
                    if r.gpu_max { "  [GPU(max)]" } else { "" }
                );
            }
            println!("{}", outcome.out_dir.display());
        }
        Command::Plan { target, design } => {
            let (cfg, base) = load(&target)?;
            let exp = Experiment::prepare(&cfg, &base, root.as_deref())?;
            if design.eq_ignore_ascii_case("paris") {
                eprint!("{}", describe_paris(&paris_outcome(&exp)?, &exp.dist));
            }
            let plan = plan_for(&exp, &design)?;
            let json = serde_json::to_string(&PlanJson::from_plan(&plan)).map_err(|e| CliError::Runtime(e.to_string()))?;
            println!("{json}");
        }
        Command::Sweep(target) => {
            let (cfg, base) = load(&target)?;
            for r in sweep(&cfg, &base, root.as_deref())? {
                eprintln!("{}={:<6} {:<18} lbt {:>10.1} q/s  gain {:.3}", r.parameter, r.value, r.design, r.lbt_qps, r.gain_vs_gpu_max);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.status() as u8)
        }
    }
}
