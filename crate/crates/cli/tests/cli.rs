use std::path::Path;
use std::process::Command;

use aeroswarm_cli::{env_overrides, resolve_config, RunArgs};
use aeroswarm_core::experiment::read_sweep;
use aeroswarm_core::metrics::read_metrics;
use aeroswarm_core::ScenarioConfig;

const TINY: &str = r#"
seed = 5

[world]
n_uavs = 2

[world.users]
urban = 8
suburban = 8
rural = 8

[env]
horizon_steps = 8

[[scenario.schedule]]
phase = "urban"
episodes = 2

[[scenario.schedule]]
phase = "rural"
episodes = 1

[experiment]
sweep_users = [4, 6]
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_aeroswarm"));
    for (k, _) in std::env::vars() {
        if k.starts_with("AEROSWARM_") {
            c.env_remove(k);
        }
    }
    c
}

fn write_tiny(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("tiny.toml");
    std::fs::write(&p, TINY).unwrap();
    p
}

#[test]
fn env_names_map_to_dotted_paths() {
    let vars = vec![
        ("AEROSWARM_WORLD__N_UAVS".to_string(), "6".to_string()),
        ("AEROSWARM_SEED".to_string(), "9".to_string()),
        ("HOME".to_string(), "/root".to_string()),
        ("AEROSWARM_".to_string(), "x".to_string()),
    ];
    assert_eq!(
        env_overrides(vars),
        vec![("seed".to_string(), "9".to_string()), ("world.n_uavs".to_string(), "6".to_string())]
    );
}

#[test]
fn layering_order() {
    let dir = tempfile::tempdir().unwrap();
    let args = RunArgs { config: Some(write_tiny(dir.path())), seed: Some(77), ..Default::default() };
    let vars = vec![
        ("AEROSWARM_SEED".to_string(), "1".to_string()),
        ("AEROSWARM_ENV__HORIZON_STEPS".to_string(), "12".to_string()),
    ];
    let cfg = resolve_config(&args, vars).unwrap();
    assert_eq!(cfg.seed, 77);
    assert_eq!(cfg.env.horizon_steps, 12);
    assert_eq!(cfg.world.n_uavs, 2);
    let bad = vec![("AEROSWARM_WORLD__NOPE".to_string(), "1".to_string())];
    assert!(resolve_config(&args, bad).is_err());
}

#[test]
fn dump_defaults_round_trips() {
    let out = bin().arg("dump-defaults").output().unwrap();
    assert!(out.status.success());
    let cfg = ScenarioConfig::from_toml_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg, ScenarioConfig::default());
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny(dir.path());
    let run = dir.path().join("run");
    let st = bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--seed", "11", "--trace", "--out"])
        .arg(&run)
        .env("AEROSWARM_REWARD__COLLISION_PENALTY", "2.5")
        .status()
        .unwrap();
    assert!(st.success());
    let rows = read_metrics(std::fs::File::open(run.join("metrics.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 9);
    let snap = ScenarioConfig::load(&run.join("config.toml")).unwrap();
    assert_eq!(snap.seed, 11);
    assert_eq!(snap.reward.collision_penalty, 2.5);
    assert!(run.join("trace.csv").exists());
    assert!(run.join("plot_metrics.py").exists());

    let mut outputs = Vec::new();
    for name in ["e1", "e2"] {
        let st = bin()
            .args(["eval", "--config"])
            .arg(&cfg)
            .args(["--seed", "11", "--episodes", "2", "--checkpoint"])
            .arg(run.join("checkpoint.bin"))
            .arg("--out")
            .arg(dir.path().join(name))
            .status()
            .unwrap();
        assert!(st.success());
        outputs.push(std::fs::read(dir.path().join(name).join("metrics.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn sweep_writes_tagged_sections() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny(dir.path());
    let st = bin()
        .args(["sweep", "--episodes", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("sw"))
        .status()
        .unwrap();
    assert!(st.success());
    let text = std::fs::read_to_string(dir.path().join("sw").join("sweep.csv")).unwrap();
    let sections = read_sweep(&text).unwrap();
    assert_eq!(sections.iter().map(|s| s.0).collect::<Vec<_>>(), vec![4, 6]);
}

#[test]
fn failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["eval", "--out"])
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("checkpoint"));

    let st = bin()
        .args(["train", "--config"])
        .arg(dir.path().join("missing.toml"))
        .status()
        .unwrap();
    assert!(!st.success());

    let st = bin()
        .args(["train", "--episodes", "1", "--out"])
        .arg(dir.path().join("y"))
        .env("AEROSWARM_WORLD__N_UAVS", "zero")
        .status()
        .unwrap();
    assert!(!st.success());
}
