use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wvkerr"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("campaign.toml");
    fs::write(&path, text).unwrap();
    path
}

const BATCH: &str = r#"
seed = 5

[ensemble]
kind = "sine-modulated"
mean_n = 9e4
std_dn = 4.5e4

[interaction]
g = 6e-8
epsilon = 0.1

[trials]
total_trials = 2_000_000
"#;

fn run_campaign(command: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn help_documents_every_exit_code() {
    for args in [&["--help"][..], &["scaling", "--help"][..]] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(0));
        let text = String::from_utf8_lossy(&o.stdout);
        for code in ["0 ", "2 ", "3 ", "4 ", "5 ", "6 ", "7 "] {
            assert!(text.contains(&format!("  {code}")), "missing exit code {code}");
        }
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["sweep-q", "--config", "x"]).status.code(), Some(2));
    assert_eq!(run(&["batch"]).status.code(), Some(2));
    assert_eq!(run(&["batch", "--config", "x", "--workers", "0"]).status.code(), Some(2));
    assert_eq!(run(&["batch", "--config", "x", "--seed", "1", "--new-seed"]).status.code(), Some(2));
}

#[test]
fn parse_error_reports_position() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "seed = 1\n[interaction]\nepsilon = 0.1\nepsilom = 2\n");
    let o = run_campaign("batch", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("campaign.toml:4:"), "{}", stderr(&o));
}

#[test]
fn validation_errors_name_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &BATCH.replace("std_dn = 4.5e4", "depth = 1.5"));
    let o = run_campaign("batch", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("ensemble.depth"));

    let cfg = write_config(&dir, &BATCH.replace("seed = 5", ""));
    let o = run_campaign("batch", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("seed"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn io_errors_exit_5() {
    let dir = TempDir::new().unwrap();
    let o = run_campaign("batch", &dir.path().join("absent.toml"), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(5));
    let cfg = write_config(
        &dir,
        &BATCH.replace("kind = \"sine-modulated\"\nmean_n = 9e4\nstd_dn = 4.5e4", "kind = \"pmf\"\npath = \"none.pmf\""),
    );
    let o = run_campaign("batch", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}

#[test]
fn simulation_errors_exit_6() {
    // Post-selection probability near 1e-19: no trial survives.
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &BATCH.replace("epsilon = 0.1", "epsilon = 1e-9").replace("2_000_000", "1000"));
    let o = run_campaign("batch", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(6), "{}", stderr(&o));
}

#[test]
fn flat_sweep_writes_outputs_then_exits_7() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &format!("{BATCH}\n[sweep_g]\ng_values = [0.0, 0.0, 0.0]\n"));
    let out = dir.path().join("out");
    let o = run_campaign("sweep-g", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(7), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("results.csv")).unwrap().lines().count(), 4);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &format!("{BATCH}\n[batch]\nreplications = 3\n"));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run_campaign("batch", &cfg, &a, &["--workers", "1"]).status.success());
    assert!(run_campaign("batch", &cfg, &b, &["--workers", "3"]).status.success());
    for f in ["results.csv", "record.json", "config.resolved.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("replication,seed,delta_n_normalized,"));
}

#[test]
fn echoed_config_reproduces_the_record() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &BATCH.replace("seed = 5\n", ""));
    let first = dir.path().join("first");
    let o = run_campaign("batch", &cfg, &first, &["--new-seed"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("seed = "));
    let second = dir.path().join("second");
    let o = run_campaign("batch", &first.join("config.resolved.toml"), &second, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["results.csv", "record.json", "config.resolved.toml"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f}");
    }
    let record: serde_json::Value = serde_json::from_slice(&fs::read(first.join("record.json")).unwrap()).unwrap();
    assert_eq!(record["version"], env!("CARGO_PKG_VERSION"));
    assert!(record["seed"].as_u64().is_some());
    assert_eq!(record["seed"], record["config"]["seed"]);
}

#[test]
fn seed_flag_overrides_the_file() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, BATCH);
    let out = dir.path().join("out");
    assert!(run_campaign("batch", &cfg, &out, &["--seed", "99"]).status.success());
    let echoed = fs::read_to_string(out.join("config.resolved.toml")).unwrap();
    assert!(echoed.contains("seed = 99"));
}

#[test]
fn fisher_table_has_one_row_per_mean() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fisher");
    let o = run_campaign("fisher", &configs().join("fisher.toml"), &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "mean_n_photons,std_dn_photons,fisher_classical_per_trial_per_rad2,fisher_joint_per_trial_per_rad2,\
         qfi_per_use_per_rad2,qfi_mixed_bound_per_use_per_rad2,uses,classical_dg_min_rad,quantum_dg_min_rad"
    );
    let fisher: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(fisher.len(), 6);
    for pair in fisher.chunks(2) {
        assert!((pair[1] / pair[0] - 4.0).abs() < 0.1);
    }
}

#[test]
fn shipped_configs_run() {
    let dir = TempDir::new().unwrap();
    for (command, file) in [
        ("sweep-g", "sweep_g.toml"),
        ("sweep-g", "sweep_g_delay.toml"),
        ("sweep-dn", "sweep_dn.toml"),
        ("sweep-eps", "sweep_eps.toml"),
        ("scaling", "scaling_hs.toml"),
        ("batch", "batch.toml"),
        ("batch", "batch_pmf.toml"),
    ] {
        let out = dir.path().join(file);
        let o = run_campaign(command, &configs().join(file), &out, &[]);
        assert!(o.status.success(), "{file}: {}", stderr(&o));
        assert!(out.join("record.json").exists());
    }
}
