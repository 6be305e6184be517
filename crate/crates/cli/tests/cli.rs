use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nlburgers_cli::{run, verify, Emit, RunConfig, Verdict};
use nlburgers_core::scenarios::preset_names;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nlburgers"))
}

fn exec(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn reports(out: &Output) -> Vec<Value> {
    stdout(out).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn law<'a>(reports: &'a [Value], name: &str) -> &'a Value {
    reports
        .iter()
        .find(|r| r["law"] == name)
        .unwrap_or_else(|| panic!("no {name}"))
}

fn ndjson(dir: &Path) -> Vec<Value> {
    let text = fs::read_to_string(dir.join("diagnostics.ndjson")).unwrap();
    text.lines().skip(1).map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn presets_lists_every_name() {
    let out = exec(bin().arg("presets"));
    assert!(out.status.success());
    let text = stdout(&out);
    for name in preset_names() {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn smooth_preset_runs_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = exec(
        bin()
            .args(["run", "--scenario", "figA_smooth", "--out"])
            .arg(dir.path()),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let lines = ndjson(dir.path());
    let status = lines.last().unwrap();
    assert_eq!(status["status"], "completed");
    let last = &lines[lines.len() - 2];
    let mean = last["momentum"].as_f64().unwrap() / (2.0 * std::f64::consts::PI);
    assert!((mean - 0.3 * 50.5_f64.sqrt()).abs() < 1e-2, "{mean}");
    assert!(last["A"].as_f64().unwrap() < 1e-3);

    let out = exec(bin().args(["verify", "--run"]).arg(dir.path()));
    assert!(out.status.success(), "{}", stdout(&out));
    let r = reports(&out);
    for name in ["E", "ML", "MP", "HP", "decay", "BKM"] {
        assert_eq!(law(&r, name)["status"], "pass", "{name}");
    }
}

#[test]
fn negative_preset_blows_up_with_zero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = exec(
        bin()
            .args(["run", "--scenario", "figD_negative", "--out"])
            .arg(dir.path()),
    );
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("blowup_detected"));
    assert_eq!(ndjson(dir.path()).last().unwrap()["status"], "blowup_detected");

    let r = reports(&exec(bin().args(["verify", "--run"]).arg(dir.path())));
    assert_eq!(law(&r, "MP")["status"], "not_applicable");
    assert_eq!(law(&r, "AMP")["status"], "pass");
}

#[test]
fn constant_data_has_exact_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let out = exec(
        bin()
            .args(["run", "--scenario", "expr:1.5", "--n", "32", "--t-end", "2", "--out"])
            .arg(dir.path()),
    );
    assert!(out.status.success());
    let out = exec(bin().args(["verify", "--run"]).arg(dir.path()));
    assert!(out.status.success(), "{}", stdout(&out));
    for r in reports(&out) {
        if let Some(v) = r["value"].as_f64() {
            assert!(v.abs() <= 1e-12, "{r}");
        }
    }
}

#[test]
fn frozen_preset_conserves_momentum() {
    let dir = tempfile::tempdir().unwrap();
    let out = exec(
        bin()
            .args(["run", "--scenario", "frozen_zero_mean", "--out"])
            .arg(dir.path()),
    );
    assert!(out.status.success());
    let lines = ndjson(dir.path());
    assert_eq!(lines.last().unwrap()["status"], "completed");
    let records = &lines[..lines.len() - 1];
    let m0 = records[0]["momentum"].as_f64().unwrap();
    for r in records {
        assert!((r["momentum"].as_f64().unwrap() - m0).abs() <= 1e-10);
    }
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "run",
        "--scenario",
        "figB_unsigned",
        "--n",
        "128",
        "--t-end",
        "0.5",
        "--out",
    ];
    let snapshot = || -> Vec<Vec<u8>> {
        Emit::ALL
            .iter()
            .map(|e| fs::read(dir.path().join(e.file_name())).unwrap())
            .collect()
    };
    assert!(exec(bin().args(args).arg(dir.path()).env("NLB_THREADS", "1"))
        .status
        .success());
    let first = snapshot();
    assert!(exec(bin().args(args).arg(dir.path()).env("NLB_THREADS", "4"))
        .status
        .success());
    assert_eq!(first, snapshot());
    assert!(exec(bin().args(args).arg(dir.path())).status.success());
    assert_eq!(first, snapshot());
}

#[test]
fn file_headers_round_trip_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        scenario: "expr:2 + 0.5 * sin(x)".into(),
        n: Some(64),
        t_end: Some(0.3),
        record_every: 3,
        out: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    let traj = run(&cfg).unwrap();
    let resolved = cfg.clone().resolve().unwrap();
    for e in Emit::ALL {
        let text = fs::read_to_string(dir.path().join(e.file_name())).unwrap();
        let header = text.lines().next().unwrap().strip_prefix("# config: ").unwrap();
        assert_eq!(RunConfig::from_json(header, "header").unwrap(), resolved, "{e:?}");
    }

    let traj_csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = traj_csv.lines().skip(1);
    let cols: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(cols.len(), 65);
    assert_eq!((cols[0], cols[1], cols[64]), ("t", "x_0", "x_63"));
    assert_eq!(lines.count(), traj.len());
    let spectra = fs::read_to_string(dir.path().join("spectra.csv")).unwrap();
    assert_eq!(spectra.lines().nth(1), Some("t,k,abs_uhat"));

    let keys: Vec<String> = ndjson(dir.path())[0].as_object().unwrap().keys().cloned().collect();
    let mut want = [
        "t",
        "energy",
        "momentum",
        "m",
        "M",
        "A",
        "h_half_sq",
        "grad_inf",
        "bkm_acc",
        "lp",
        "analytic",
        "hp_acc",
    ]
    .map(String::from)
    .to_vec();
    want.sort();
    let mut keys = keys;
    keys.sort();
    assert_eq!(keys, want);
}

#[test]
fn config_file_drives_the_run_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    let out_dir = dir.path().join("out");
    let text = serde_json::json!({
        "scenario": "figE_fem",
        "t_end": 0.5,
        "emit": ["diagnostics"],
        "out": out_dir,
    });
    fs::write(&path, text.to_string()).unwrap();
    let out = exec(bin().args(["run", "--scenario"]).arg(&path).args(["--n", "24"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out_dir.join("trajectory.csv").exists());
    let header = fs::read_to_string(out_dir.join("diagnostics.ndjson")).unwrap();
    let cfg = RunConfig::from_json(header.lines().next().unwrap().strip_prefix("# config: ").unwrap(), "h").unwrap();
    assert_eq!((cfg.n, cfg.t_end), (Some(24), Some(0.5)));
    assert_eq!(cfg.form.map(|f| f.name()), Some("fem"));

    // the trajectory file is reported missing, the rest is still checked
    let r = verify(&out_dir);
    let missing: Vec<_> = r.iter().filter(|r| r.status == Verdict::Missing).collect();
    assert_eq!(missing.len(), 1);
    assert_eq!(missing[0].law, "file:trajectory.csv");
    assert!(r.iter().any(|r| r.law == "E"));
}

#[test]
fn invalid_config_exits_nonzero_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\n  \"scenario\": \"figA_smooth\",\n  \"sheme\": \"rk4\"\n}\n").unwrap();
    let out = exec(bin().args(["run", "--scenario"]).arg(&path));
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");
    assert!(err.contains("sheme"), "{err}");

    let out = exec(bin().args(["run", "--scenario", "figZ"]));
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("figA_smooth"));
}

#[test]
fn verify_reports_each_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = exec(bin().args(["verify", "--run"]).arg(dir.path()));
    assert_eq!(out.status.code(), Some(1));
    let r = reports(&out);
    assert_eq!(r.len(), 2);
    assert!(r.iter().all(|r| r["status"] == "missing"));
}
