use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn pharec(args: &[&str]) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_pharec"))
        .args(args)
        .output()
        .unwrap();
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into(),
        String::from_utf8_lossy(&o.stderr).into(),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

const SMALL_TRIALS: &str =
    r#"{"model": "ric", "trials": {"count": 100, "periods": 1.5, "steps_per_period": 100}}"#;

#[test]
fn simulate_writes_trials_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL_TRIALS);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let (code, _, err) = pharec(&["simulate", "--config", &cfg, "--out", d.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
    }
    let ta = files(&a.join("trials"));
    assert_eq!(ta.len(), 101);
    let manifest: Value =
        serde_json::from_slice(&fs::read(a.join("trials/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema"], "pharec.trials/1");
    assert_eq!(manifest["data"]["files"].as_array().unwrap().len(), 100);
    assert_eq!(manifest["data"]["seed"], 1);
    assert!(manifest["data"]["model"]["coupling"].is_array());
    assert!(manifest["data"]["step"].as_f64().unwrap() > 0.0);
    let head = String::from_utf8(fs::read(a.join("trials/trial_0000.csv")).unwrap()).unwrap();
    assert!(head.starts_with("t,theta_1,r_1,theta_2,r_2\n"));
    assert!(ta == files(&b.join("trials")), "reruns differ");
    let set = pharec::io::read_trials(&a.join("trials")).unwrap();
    assert_eq!(set.trials.len(), 100);
}

#[test]
fn seed_flag_changes_trials() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"model": "ric", "trials": {"count": 2, "periods": 1.0, "steps_per_period": 50}}"#,
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(
        pharec(&["simulate", "--config", &cfg, "--out", a.to_str().unwrap()]).0,
        0
    );
    assert_eq!(
        pharec(&[
            "simulate",
            "--config",
            &cfg,
            "--out",
            b.to_str().unwrap(),
            "--seed",
            "9",
            "--jobs",
            "1"
        ])
        .0,
        0
    );
    assert!(files(&a.join("trials")) != files(&b.join("trials")));
}

#[test]
fn usage_and_config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let zero = write(
        tmp.path(),
        "z.json",
        r#"{"model": "ric", "trials": {"count": 0}}"#,
    );
    let (code, _, err) = pharec(&[
        "simulate",
        "--config",
        &zero,
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("trials.count"), "{err}");
    let typo = write(tmp.path(), "t.json", r#"{"model": "ric", "trails": {}}"#);
    assert_eq!(pharec(&["pipeline", "--config", &typo]).0, 2);
    assert_eq!(pharec(&["pipeline"]).0, 2);
    assert_eq!(pharec(&["no-such-command"]).0, 2);
    assert_eq!(pharec(&["pipeline", "--config", "/no/such/file.json"]).0, 2);
}

#[test]
fn pipeline_report_and_stage_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"model": "radial_isochron_clock"}"#,
    );
    let (code, stdout, err) =
        pharec(&["pipeline", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}\n{err}");
    for f in [
        "config.json",
        "limit_cycle.json",
        "transforms.json",
        "network_vf.json",
        "reduced_coupling.json",
        "report.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(out.join("heatmaps/manifest.json").exists());
    assert!(out.join("heatmaps/pair_2_1_phase_s00.csv").exists());

    let report: Value =
        serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "pharec.report/1");
    let rows = report["data"]["rows"].as_array().unwrap();
    assert!(rows.iter().any(|r| r["name"] == "floquet.lambda_rel[2]"));
    for r in rows {
        assert!(
            r["name"].is_string()
                && r["value"].is_number()
                && r["bound"].is_number()
                && r["pass"].is_boolean()
        );
    }

    // a stage re-run from the pipeline directory reproduces its artifact
    let again = tmp.path().join("again");
    let o = out.to_str().unwrap();
    for (cmd, file) in [
        ("transforms", "transforms.json"),
        ("limit-cycle", "limit_cycle.json"),
        ("reduce-coupling", "reduced_coupling.json"),
    ] {
        assert_eq!(
            pharec(&[cmd, "--from", o, "--out", again.to_str().unwrap()]).0,
            0
        );
        assert_eq!(
            fs::read(out.join(file)).unwrap(),
            fs::read(again.join(file)).unwrap(),
            "{file}"
        );
    }

    // an impossible tolerance turns the same artifacts into a failing report
    let strict = write(
        tmp.path(),
        "s.json",
        r#"{"model": "ric", "tolerances": {"lambda_rel": 1e-300}}"#,
    );
    let (code, stdout, _) = pharec(&[
        "compare",
        "--config",
        &strict,
        "--from",
        o,
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(code, 1, "{stdout}");
    assert!(stdout.contains("FAIL"));
}

#[test]
fn extract_writes_a_trial() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("t,x,y\n");
    for k in 0..2000 {
        let t = k as f64 * 0.01;
        // whole numbers of periods over the record
        let w = std::f64::consts::PI / 10.0;
        csv.push_str(&format!(
            "{t},{},{}\n",
            (10.0 * w * t).cos(),
            0.5 * (6.0 * w * t).sin()
        ));
    }
    let input = write(tmp.path(), "sig.csv", &csv);
    let out = tmp.path().join("trials");
    let (code, _, err) = pharec(&["extract", "--input", &input, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let set = pharec::io::read_trials(&out).unwrap();
    assert_eq!(set.n_oscillators, 2);
    let t = &set.trials[0];
    assert!(t.r[1].iter().all(|r| (r - 0.5).abs() < 0.02));

    let flat = write(
        tmp.path(),
        "flat.csv",
        "t,x\n0,1\n1,1\n2,1\n3,1\n4,1\n5,1\n6,1\n7,1\n8,1\n",
    );
    assert_eq!(
        pharec(&["extract", "--input", &flat, "--out", out.to_str().unwrap()]).0,
        3
    );
}
