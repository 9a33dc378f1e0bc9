use std::path::Path;
use std::process::{Command, Output};

use migsim::formats::PlanJson;

fn migsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_migsim"))
        .args(args)
        .current_dir(cwd)
        .env_remove("MIGSIM_OUTPUT_ROOT")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
output_dir = "out"

[profile]
preset = "light"

[workload]
rate_qps = 1000.0
duration_ms = 1000
seeds = [1, 2, 3]

[server]
num_gpus = 4
gpc_budget = 24

[search]
rel_tol = 0.1
curve_points = 2

[[designs]]
plan = "GPU(7)"
scheduler = "fifs"

[[designs]]
plan = "PARIS"
scheduler = "elsa"
"#;

#[test]
fn run_writes_a_report_per_design_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), SMALL).unwrap();
    let o = migsim(&["run", "exp.toml"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));

    let out = dir.path().join("out");
    let reports: Vec<_> = std::fs::read_dir(out.join("reports")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(reports.len(), 6);
    for slug in ["gpu7_fifs", "paris_elsa"] {
        for seed in 1..=3 {
            let name = format!("{slug}__seed{seed}");
            assert!(out.join("reports").join(format!("{name}.json")).is_file(), "{name}");
            assert!(out.join("queries").join(format!("{name}.csv")).is_file(), "{name}");
        }
    }
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.lines().any(|l| l.starts_with("GPU(7)+FIFS,")));
    assert!(summary.lines().any(|l| l.starts_with("PARIS+ELSA,")));
    for f in ["resolved_config.toml", "plot_data.csv", "plans/paris_elsa.json", "traces/seed1.jsonl"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn output_root_env_prefixes_relative_dirs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), SMALL).unwrap();
    let root = dir.path().join("root");
    let o = Command::new(env!("CARGO_BIN_EXE_migsim"))
        .args(["run", "exp.toml", "--seeds", "4"])
        .current_dir(dir.path())
        .env("MIGSIM_OUTPUT_ROOT", &root)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(root.join("out/reports/paris_elsa__seed4.json").is_file());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_scheduler_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), SMALL.replace("\"elsa\"", "\"lifo\"")).unwrap();
    let o = migsim(&["run", "exp.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("designs[1].scheduler"), "{err}");
    assert!(err.contains("lifo"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = migsim(&["run", "nope.toml"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("nope.toml"));
}

#[test]
fn plan_prints_homogeneous_layout() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), SMALL.replace("num_gpus = 4\ngpc_budget = 24", "num_gpus = 8")).unwrap();
    let o = migsim(&["plan", "exp.toml", "--design", "GPU(3)"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let plan: PlanJson = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(plan.gpus.len(), 8);
    assert_eq!(plan.instances.len(), 1);
    assert_eq!((plan.instances[0].k, plan.instances[0].count), (3, 16));
}

const TOY_PROFILE: &str = "model,k,batch,latency_ms,utilization
toy,1,1,25,0.5
toy,1,2,50,0.9
toy,1,3,60,0.9
toy,1,4,80,0.9
toy,2,1,20,0.3
toy,2,2,25,0.5
toy,2,3,38.333333333333336,0.7
toy,2,4,38.333333333333336,0.9
";

fn toy_config(pmf: &str) -> String {
    format!(
        r#"
[profile]
csv = "toy.csv"

[workload]
pmf = {pmf}
rate_qps = 10.0

[server]
num_gpus = 9
gpc_budget = 61
sizes = [1, 2]

[[designs]]
plan = "PARIS"
scheduler = "elsa"
"#
    )
}

#[test]
fn plan_shows_the_paris_derivation() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("toy.csv"), TOY_PROFILE).unwrap();
    std::fs::write(dir.path().join("exp.toml"), toy_config("[0.2, 0.2, 0.4, 0.2]")).unwrap();
    let o = migsim(&["plan", "exp.toml"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("knees: GPU(1)=2, GPU(2)=4"), "{err}");
    assert!(err.contains("instances per 100 queries/s: GPU(1)=1.5, GPU(2)=2.3"), "{err}");
    assert!(err.contains("GPU(1)=15, GPU(2)=23"), "{err}");
    let plan: PlanJson = serde_json::from_slice(&o.stdout).unwrap();
    let gpcs: u32 = plan.instances.iter().map(|i| i.k * i.count).sum();
    assert!(gpcs <= 61);
}

#[test]
fn degenerate_distribution_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("toy.csv"), TOY_PROFILE).unwrap();
    for pmf in ["[0.0, 0.0, 0.0, 0.0]", "[]"] {
        std::fs::write(dir.path().join("exp.toml"), toy_config(pmf)).unwrap();
        let o = migsim(&["plan", "exp.toml"], dir.path());
        assert_eq!(o.status.code(), Some(1), "{pmf}: {}", stderr(&o));
        assert!(o.stdout.is_empty());
    }
}
