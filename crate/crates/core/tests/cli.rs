use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mvreflect::harness::{emit_plot_data, run_experiment, ExperimentConfig, PlotKind, RunRecord};

const BASE: &str = r#"
[domain]
kind = "interval"
radius = 1.0
amplitude = 0.25

[grid]
horizon = 1.0
n_steps = 10
"#;

fn config(dir: &Path, name: &str, experiment: &str, extra: &str) -> PathBuf {
    let path = dir.join(format!("{name}.toml"));
    let text = format!("experiment = \"{experiment}\"\nmaster_seed = 17\n{BASE}\n{extra}\n");
    std::fs::write(&path, text).unwrap();
    path
}

fn cli(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvreflect"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn single_still_particle_writes_a_constant_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        "still",
        "simulate",
        "[coefficients]\npreset = \"zero\"\n[init]\ncenter = [0.3]\n[particles]\nn = 1\n",
    );
    let out = tmp.path().join("run");
    let o = cli(&["simulate"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&out.join("paths.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("particle,step,t,x1,local_time,xi"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r.split(',').nth(3) == Some("0.3")));
}

#[test]
fn identical_configs_give_identical_hashes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "chaos", "chaos", "[coefficients]\npreset = \"mean_reversion\"\n[particles]\nn_list = [4, 16]\nn_rep = 3\n");
    let a = cli(&["chaos"], &cfg, &tmp.path().join("a"));
    let b = cli(&["chaos"], &cfg, &tmp.path().join("b"));
    assert!(a.status.code().unwrap() <= 1 && b.status.code().unwrap() <= 1);
    let ra = RunRecord::load_manifest(&tmp.path().join("a")).unwrap();
    let rb = RunRecord::load_manifest(&tmp.path().join("b")).unwrap();
    assert_eq!(ra.artifacts, rb.artifacts);
    assert_eq!(ra.config_hash, rb.config_hash);
    assert!(ra.artifact("chaos.csv").is_some() && ra.artifact("plot_chaos.csv").is_some());
}

#[test]
fn out_of_range_epsilon_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        "bad",
        "ldp-check-limit-law",
        "[coefficients]\npreset = \"brownian\"\n[ldp]\nepsilon = [1.5]\n",
    );
    let out = tmp.path().join("run");
    let o = cli(&["ldp", "check-limit-law"], &cfg, &out);
    assert_eq!(o.status.code(), Some(11));
    assert!(!out.exists());
}

#[test]
fn error_codes_are_distinct() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = config(tmp.path(), "unknown", "simulate", "[coefficients]\npreset = \"nope\"\n");
    assert_eq!(cli(&["simulate"], &unknown, &tmp.path().join("u")).status.code(), Some(10));

    let grid = tmp.path().join("grid.toml");
    std::fs::write(&grid, read(&unknown).replace("nope", "zero").replace("n_steps = 10", "n_steps = 1")).unwrap();
    assert_eq!(cli(&["simulate"], &grid, &tmp.path().join("g")).status.code(), Some(11));

    let ok = config(tmp.path(), "ok", "simulate", "[coefficients]\npreset = \"zero\"\n");
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    assert_eq!(cli(&["simulate"], &ok, &blocker.join("sub")).status.code(), Some(12));

    assert_eq!(cli(&["chaos"], &ok, &tmp.path().join("m")).status.code(), Some(11));
}

#[test]
fn failed_invariant_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    // One Picard iteration cannot reach a vanishing tolerance.
    let cfg = config(
        tmp.path(),
        "picard",
        "picard",
        "[coefficients]\npreset = \"mean_reversion\"\n[init]\ncenter = [0.5]\n[picard]\nn_copies = 16\nmax_iters = 1\ntol = 1e-300\n",
    );
    let out = tmp.path().join("run");
    let o = cli(&["picard"], &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("FAIL converged"), "{stdout}");
    assert_eq!(read(&out.join("history.csv")).lines().count(), 2);
}

#[test]
fn paths_plot_has_one_row_per_particle_step() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::load(&config(
        tmp.path(),
        "two",
        "simulate",
        "[coefficients]\npreset = \"brownian\"\n[particles]\nn = 2\n",
    ))
    .unwrap();
    cfg.output_dir = Some(tmp.path().join("run"));
    let rec = run_experiment(&cfg).unwrap();
    let plot = read(&tmp.path().join("run/plot_paths.csv"));
    assert_eq!(plot.lines().next(), Some("series,x,y,y_err,y_low,y_high"));
    assert_eq!(plot.lines().count() - 1, 2 * 10);
    assert!(rec.passed());
    assert!(matches!(emit_plot_data(&rec, PlotKind::Chaos), Err(mvreflect::Error::MissingTable(_))));
}

#[test]
fn rare_event_plot_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::load(&config(
        tmp.path(),
        "rare",
        "ldp-rare-event",
        "[coefficients]\npreset = \"brownian\"\n[ldp]\nepsilon = [0.5, 0.1]\nn_copies = 2000\nthreshold = 0.9\nevent = \"sup_deviation\"\n",
    ))
    .unwrap();
    cfg.output_dir = Some(tmp.path().join("run"));
    run_experiment(&cfg).unwrap();
    let plot = read(&tmp.path().join("run/plot_ldp.csv"));
    let rows: Vec<Vec<&str>> = plot.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][1], "0.5");
    for r in &rows {
        assert!(r[0] == "exponent" || r[0] == "exponent_lower_bound");
        if r[0] == "exponent" {
            let (y, lo, hi): (f64, f64, f64) = (r[2].parse().unwrap(), r[4].parse().unwrap(), r[5].parse().unwrap());
            assert!(lo <= y && y <= hi, "{r:?}");
        }
    }
}

#[test]
fn seed_override_changes_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "sim", "simulate", "[coefficients]\npreset = \"brownian\"\n[particles]\nn = 3\n");
    let run = |seed: &str, dir: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_mvreflect"))
            .args(["simulate", "--config"])
            .arg(&cfg)
            .args(["--seed", seed, "--out"])
            .arg(tmp.path().join(dir))
            .output()
            .unwrap();
        assert!(o.status.success());
        read(&tmp.path().join(dir).join("paths.csv"))
    };
    assert_eq!(run("1", "a"), run("1", "b"));
    assert_ne!(run("1", "c"), run("2", "d"));
}
