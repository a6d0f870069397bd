use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use nirskit::config::PipelineConfig;
use nirskit::container::{read_bundle, read_container, write_container};
use nirskit::fixture::{fixture_forward, synthetic_recording, FixtureConfig};
use nirskit::runner::{run_pipeline, Overrides, REPORT};
use nirskit::simulate::write_forward;

const RECIPE: &str = "\
seed: 11
steps:
  - {op: int2od, in: amp, out: od}
  - {op: tddr, in: od, out: od_tddr}
  - {op: od2conc, in: [od_tddr, geo3d], out: conc}
  - op: fit_glm
    params:
      basis: {type: gamma, sigma: 3 s, T: 10 s}
      drift: {type: cosine, fmax: 0.01 Hz}
    in: [conc, stim]
    out: glm
  - op: inject_artifacts
    params: {fraction: 0.02, types: [spike, bl_shift]}
    in: od
    out: [od_art, art_timing]
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nirskit"))
}

fn input(dir: &Path) -> PathBuf {
    let p = dir.join("input");
    write_container(&synthetic_recording(&FixtureConfig { duration: 120.0, ..FixtureConfig::default() }).unwrap(), &p).unwrap();
    p
}

fn write_cfg(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("cfg.yaml");
    fs::write(&p, text).unwrap();
    p
}

fn run(cfg: &Path, input: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    bin().arg("run").arg(cfg).arg("--input").arg(input).arg("--output").arg(out).args(extra).output().unwrap()
}

#[test]
fn standard_recipe_writes_betas_and_report() {
    let d = tempfile::tempdir().unwrap();
    let inp = input(d.path());
    let out = d.path().join("out");
    let o = run(&write_cfg(d.path(), RECIPE), &inp, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let betas = fs::read_to_string(out.join("glm_betas.csv")).unwrap();
    assert!(betas.starts_with("channel,chromo,regressor,beta,stderr,unit\r\n"));
    assert!(betas.contains("S1D1,HbO,HRF FTapping/Left,"));
    let b = read_bundle(&out).unwrap();
    for n in ["od", "od_tddr", "conc", "od_art"] {
        assert!(b.recording.timeseries.get(n).is_some(), "{n}");
    }
    assert!(b.tensors.get("glm").is_some());
    assert!(out.join("art_timing.csv").exists());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join(REPORT)).unwrap()).unwrap();
    assert_eq!(report["steps"].as_array().unwrap().len(), 5);
    assert_eq!(report["threads"], 1);
    assert!(report["steps"][0]["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(report["steps"][0]["output_sha256"]["od"].as_str().unwrap().len(), 64);
}

#[test]
fn identical_runs_give_identical_hashes() {
    let d = tempfile::tempdir().unwrap();
    let inp = input(d.path());
    let cfg = PipelineConfig::parse(RECIPE).unwrap();
    let a = run_pipeline(&cfg, &Overrides { input: Some(inp.clone()), output: Some(d.path().join("a")), ..Overrides::default() }).unwrap();
    let b = run_pipeline(&cfg, &Overrides { input: Some(inp.clone()), output: Some(d.path().join("b")), ..Overrides::default() }).unwrap();
    assert_eq!(a.container_hash, b.container_hash);
    for f in fs::read_dir(d.path().join("a")).unwrap() {
        let name = f.unwrap().file_name();
        if name != REPORT {
            assert_eq!(fs::read(d.path().join("a").join(&name)).unwrap(), fs::read(d.path().join("b").join(&name)).unwrap());
        }
    }
    let c = run_pipeline(&cfg, &Overrides { input: Some(inp), output: Some(d.path().join("c")), seed: Some(12), ..Overrides::default() }).unwrap();
    assert_ne!(a.container_hash, c.container_hash, "the seed feeds artifact injection");
}

#[test]
fn empty_steps_write_only_an_empty_report() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("out");
    let o = bin().arg("run").arg(write_cfg(d.path(), "steps: []\n")).arg("--output").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, [REPORT]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join(REPORT)).unwrap()).unwrap();
    assert_eq!(report["steps"], serde_json::json!([]));
}

#[test]
fn unknown_op_exits_2_before_writing() {
    let d = tempfile::tempdir().unwrap();
    let inp = input(d.path());
    let out = d.path().join("out");
    let cfg = write_cfg(d.path(), "steps:\n  - {op: int2od, in: amp, out: od}\n  - {op: wavelet, in: od, out: x}\n");
    let o = run(&cfg, &inp, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("wavelet"));
    assert!(!out.exists());
}

#[test]
fn failing_step_exits_3_and_names_the_step() {
    let d = tempfile::tempdir().unwrap();
    let inp = input(d.path());
    let out = d.path().join("out");
    // Nyquist is 5 Hz, so this band cannot be designed.
    let cfg = write_cfg(d.path(), "steps:\n  - {op: int2od, in: amp, out: od}\n  - {op: freq_filter, params: {fmin: 6 Hz, fmax: 7 Hz}, in: od, out: f}\n");
    let o = run(&cfg, &inp, &out, &[]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("step 1 (freq_filter)"), "{err}");
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn dry_run_touches_nothing() {
    let d = tempfile::tempdir().unwrap();
    let inp = input(d.path());
    let out = d.path().join("out");
    let o = run(&write_cfg(d.path(), RECIPE), &inp, &out, &["--dry-run"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("5 steps"));
    assert!(!out.exists());
    let bad = write_cfg(d.path(), "steps:\n  - {op: tddr, in: missing, out: x}\n");
    assert_eq!(run(&bad, &inp, &out, &["--dry-run"]).status.code(), Some(2));
}

#[test]
fn missing_sensitivity_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let inp = input(d.path());
    let cfg = write_cfg(d.path(), "steps:\n  - {op: int2od, in: amp, out: od}\n  - {op: reconstruct, in: [od, A], out: img}\n");
    assert_eq!(run(&cfg, &inp, &d.path().join("out"), &[]).status.code(), Some(2));
}

#[test]
fn quality_report_and_simulate_commands() {
    let d = tempfile::tempdir().unwrap();
    let inp = input(d.path());
    let csv = d.path().join("q/quality.csv");
    let o = bin().args(["quality", "report", "--input"]).arg(&inp).arg("--out").arg(&csv).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 5);

    let toy_cfg = d.path().join("toy.yaml");
    fs::write(&toy_cfg, "dT: 2\ngamma: 0.6\nT: 60\nseed: 3\n").unwrap();
    let toy = d.path().join("toy");
    let o = bin().args(["simulate", "toy", "--config"]).arg(&toy_cfg).arg("--output").arg(&toy).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("SNR: -4.44 dB"));
    let b = read_bundle(&toy).unwrap();
    assert_eq!(b.tensors.get("x_power").unwrap().dims(), ["time", "channel"]);
}

#[test]
fn inject_round_trip_writes_metrics() {
    let d = tempfile::tempdir().unwrap();
    let inp = input(d.path());
    let fwd = d.path().join("fwd");
    let (s, a) = fixture_forward().unwrap();
    write_forward(&s, &a, &fwd).unwrap();
    let out = d.path().join("aug");
    let metrics = d.path().join("metrics.csv");
    let o = bin()
        .args(["simulate", "inject", "--reconstruct", "--input"])
        .arg(&inp)
        .arg("--forward")
        .arg(&fwd)
        .arg("--output")
        .arg(&out)
        .arg("--metrics")
        .arg(&metrics)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec = read_container(&out).unwrap();
    assert!(rec.timeseries.get("od").is_some() && rec.timeseries.get("amp").is_some());
    let text = fs::read_to_string(&metrics).unwrap();
    assert!(text.starts_with("trial_type,seed_vertex,argmax_vertex,geodesic_error_mm"));
    assert_eq!(text.lines().count(), 3);

    let o = bin().args(["simulate", "inject", "--metrics", "m.csv", "--input"]).arg(&inp).arg("--forward").arg(&fwd).arg("--output").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
