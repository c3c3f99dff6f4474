use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quadstretch"))
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn render_rubber_band(out: &Path, extra: &[&str]) -> Output {
    let traj = repo("data/rubber_band.csv");
    let mut args = vec![
        "render",
        "--trajectory",
        traj.to_str().unwrap(),
        "--scenario",
        "rubber-band",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn render_matches_golden_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = render_rubber_band(dir.path(), &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for (produced, golden) in [
        ("samples.csv", "golden/rubber_band_samples.csv"),
        ("trace.csv", "golden/rubber_band_trace.csv"),
    ] {
        let a = fs::read(dir.path().join(produced)).unwrap();
        let b = fs::read(fixture(golden)).unwrap();
        assert!(a == b, "{produced} differs from {golden}");
    }
}

#[test]
fn pull_right_contracts_left_and_expands_right() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&render_rubber_band(dir.path(), &[])), 0);
    let text = fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    let header: Vec<&str> = text.lines().find(|l| !l.starts_with('#')).unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (fy, fz, r, l) = (col("force_y"), col("force_z"), col("signal_R"), col("signal_L"));
    let mut checked = 0;
    for row in data_rows(&text) {
        let num = |i: usize| row[i].parse::<f64>().unwrap();
        if num(fy) < -0.1 && num(fz).abs() < 1e-9 {
            assert!(num(l) < 0.0 && 0.0 < num(r), "row {row:?}");
            checked += 1;
        }
    }
    assert!(checked > 20);
}

#[test]
fn render_is_deterministic_and_protected() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&render_rubber_band(a.path(), &["--seed", "9"])), 0);
    assert_eq!(code(&render_rubber_band(b.path(), &["--seed", "9"])), 0);
    for f in ["samples.csv", "trace.csv", "plot.csv", "frames.bin", "link.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let again = render_rubber_band(a.path(), &[]);
    assert_eq!(code(&again), 1);
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    assert_eq!(code(&render_rubber_band(a.path(), &["--force"])), 0);
}

#[test]
fn artifacts_carry_provenance() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&render_rubber_band(dir.path(), &["--seed", "42"])), 0);
    for f in ["samples.csv", "trace.csv", "plot.csv", "link.csv"] {
        let text = fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(text.starts_with("# tool: quadstretch "), "{f}");
        assert!(text.contains("# config_sha256: "), "{f}");
        assert!(text.contains("# seed: 42\n"), "{f}");
    }
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["provenance"]["seed"], 42);
    assert_eq!(manifest["device"], "quadstretcher");
    assert_eq!(manifest["scheme"], "contract-towards-force");
    assert_eq!(manifest["files"].as_array().unwrap().len(), 6);

    let plot = fs::read_to_string(dir.path().join("plot.csv")).unwrap();
    assert!(plot.lines().any(|l| l == "time,series,value"));
    assert!(plot.contains(",signal_L,"));
}

#[test]
fn empty_trajectory_gives_empty_trace() {
    let dir = tempfile::tempdir().unwrap();
    for (name, content) in [("blank.csv", ""), ("header.csv", "t,px,py,pz\n")] {
        let traj = dir.path().join(name);
        fs::write(&traj, content).unwrap();
        let out = dir.path().join(format!("out-{name}"));
        let o = run(&[
            "render",
            "--trajectory",
            traj.to_str().unwrap(),
            "--scenario",
            "rubber-band",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
        assert!(data_rows(&trace).is_empty());
        assert!(fs::read(out.join("frames.bin")).unwrap().is_empty());
    }
}

#[test]
fn bad_inputs_exit_with_input_code() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("bad.csv");
    fs::write(&traj, "t,px,py,pz\n0.0,0.4,0,0\n0.0,0.4,0,0\n").unwrap();
    let o = run(&[
        "render",
        "--trajectory",
        traj.to_str().unwrap(),
        "--scenario",
        "rubber-band",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "quad.comfort_limit = 12.0\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "confusion", "--session", "1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("comfort_limit"));

    let o = run(&["render", "--trajectory", "missing.csv", "--scenario", "rubber-band", "--out",
        dir.path().join("o2").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn usage_errors_exit_with_one() {
    let traj = repo("data/rubber_band.csv");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let t = traj.to_str().unwrap();
    for args in [
        vec!["render", "--trajectory", t, "--scenario", "rubber-band", "--scheme", "all-contract", "--out", out],
        vec!["render", "--trajectory", t, "--scenario", "juggling", "--out", out],
        vec!["render", "--trajectory", t, "--scenario", "rubber-band"],
        vec!["confusion", "--session", "5"],
        vec!["jnd", "--side", "Q", "--type", "expansion"],
        vec!["frobnicate"],
    ] {
        assert_eq!(code(&run(&args)), 1, "{args:?}");
    }
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn squeezer_render_of_one_dof_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("button.csv");
    fs::write(&traj, "t,px,py,pz,aux\n0.00,0,0,0,0.0\n0.05,0,0,0,0.4\n0.10,0,0,0,0.4\n").unwrap();
    let cfg = dir.path().join("cal.toml");
    fs::write(&cfg, "calibration.min_contraction = 0.0\ncalibration.max_contraction = 10.0\n").unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "render",
        "--trajectory",
        traj.to_str().unwrap(),
        "--scenario",
        "push-button",
        "--device",
        "squeezer",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let samples = fs::read_to_string(out.join("samples.csv")).unwrap();
    let rows = data_rows(&samples);
    assert_eq!(rows[1][2], "4.000000");
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(data_rows(&trace).len(), 101);
}

fn jnd(args: &[&str]) -> (i32, Value) {
    let mut full = vec!["jnd", "--side", "D", "--type", "expansion"];
    full.extend_from_slice(args);
    let o = run(&full);
    (code(&o), serde_json::from_str(&stdout(&o)).unwrap())
}

#[test]
fn jnd_reference_observer() {
    let (c, v) = jnd(&["--seed", "11"]);
    assert_eq!(c, 0);
    let run = &v["runs"][0];
    assert_eq!(run["converged"], true);
    assert_eq!(run["reversals"].as_array().unwrap().len(), 8);
    assert_eq!(v["reference"], 4.3);
    let w = run["weber"].as_f64().unwrap();
    assert!((0.1..0.6).contains(&w), "{w}");
}

#[test]
fn jnd_noiseless_and_guessing() {
    let (c, v) = jnd(&["--observer", "noiseless"]);
    assert_eq!(c, 0);
    assert!(v["runs"][0]["jnd"].as_f64().unwrap() <= 1.72 * 0.8f64.powi(4));

    let (c, v) = jnd(&["--observer", "guessing", "--seed", "5"]);
    assert_eq!(c, 3);
    assert_eq!(v["runs"][0]["converged"], false);
    assert_eq!(v["failed_runs"], 1);
}

#[test]
fn jnd_writes_trial_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["jnd", "--side", "V", "--type", "contraction", "--runs", "3", "--out", out]);
    assert_eq!(code(&o), 0);
    let log = fs::read_to_string(dir.path().join("trials.csv")).unwrap();
    assert!(log.contains("run,trial,delta,correct,reversal,step,direction\n"));
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("jnd.json")).unwrap()).unwrap();
    assert_eq!(summary["reference"], -4.3);
    let trials: u64 = summary["runs"].as_array().unwrap().iter().map(|r| r["trials"].as_u64().unwrap()).sum();
    assert_eq!(data_rows(&log).len() as u64, trials);
}

#[test]
fn confusion_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "confusion", "--session", "4", "--reps", "7", "--observer", "noiseless", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let v: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("confusion.json")).unwrap()).unwrap();
    assert_eq!(v["counts"], serde_json::json!([[7, 0], [0, 7]]));
    assert_eq!(v["accuracy"], 1.0);

    let dir = tempfile::tempdir().unwrap();
    let o = run(&["confusion", "--session", "1", "--reps", "10", "--seed", "3", "--out",
        dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("confusion.json")).unwrap()).unwrap();
    assert_eq!(v["row_sums"], serde_json::json!(vec![10; 8]));
    let counts: Vec<Vec<u64>> = serde_json::from_value(v["counts"].clone()).unwrap();
    let diag: u64 = (0..8).map(|i| counts[i][i]).sum();
    assert_eq!(v["accuracy"].as_f64().unwrap(), diag as f64 / 80.0);
}

fn protocol_md_blocks() -> Vec<String> {
    let text = fs::read_to_string(repo("PROTOCOL.md")).unwrap();
    text.split("```")
        .skip(1)
        .step_by(2)
        .map(|b| b.trim_start_matches('\n').to_string())
        .collect()
}

#[test]
fn dump_of_neutral_frame_matches_protocol_doc() {
    let o = run(&["protocol", "dump", fixture("fixtures/neutral.bin").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let blocks = protocol_md_blocks();
    assert!(blocks.contains(&stdout(&o)), "dump:\n{}", stdout(&o));
}

#[test]
fn dump_of_worked_example_matches_protocol_doc() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ex.bin");
    fs::write(
        &path,
        [
            0xa5, 0x01, 0x10, 0xa8, 0xfe, 0x5c, 0x03, 0x00, 0x00, 0xb4, 0xfb, 0x96, 0xa5, 0x02,
            0x03, 0x90, 0x01, 0xc5,
        ],
    )
    .unwrap();
    let o = run(&["protocol", "dump", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(protocol_md_blocks().contains(&stdout(&o)));
}

#[test]
fn corrupt_dump_lists_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.bin");
    let mut bytes = fs::read(fixture("fixtures/neutral.bin")).unwrap();
    bytes.extend([0x00, 0x11]);
    let mut flipped = fs::read(fixture("fixtures/neutral.bin")).unwrap();
    flipped[4] ^= 0x08;
    bytes.extend(flipped);
    fs::write(&path, bytes).unwrap();
    let o = run(&["protocol", "dump", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let text = stdout(&o);
    assert_eq!(text.matches("error:").count(), 2, "{text}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("2 damaged"));
}

#[test]
fn replay_reproduces_render_link_trace() {
    let dir = tempfile::tempdir().unwrap();
    let render_dir = dir.path().join("render");
    assert_eq!(code(&render_rubber_band(&render_dir, &["--seed", "4"])), 0);
    let replay_dir = dir.path().join("replay");
    let o = run(&[
        "--seed",
        "4",
        "--out",
        replay_dir.to_str().unwrap(),
        "protocol",
        "replay",
        render_dir.join("frames.bin").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(render_dir.join("link.csv")).unwrap(),
        fs::read(replay_dir.join("link.csv")).unwrap()
    );
}

#[test]
fn fuzz_reports_structured_errors() {
    let o = run(&["protocol", "fuzz", "--count", "20000", "--seed", "1"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["panics"], 0);
    assert_eq!(v["report"]["buffers"], 20000);
    assert!(v["report"]["checksum"].as_u64().unwrap() > 0);
}
