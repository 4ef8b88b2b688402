use std::path::Path;
use std::process::{Command, Output};

use ruin2d_cli::{Payload, RunRecord};

fn ruin2d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ruin2d"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn record(args: &[&str]) -> (RunRecord, String) {
    let mut all = vec!["--json"];
    all.extend_from_slice(args);
    let out = ruin2d(&all);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    (serde_json::from_str(&text).expect("valid run record"), text)
}

#[test]
fn gamma_examples() {
    let (rec, _) = record(&["gamma", "--mu1", "1", "--mu2", "2", "--rho", "0.9"]);
    let Payload::Asymptotics(g) = rec.result else { panic!("wrong payload") };
    assert_eq!(g.asymptotics.gamma, 4.0);
    assert_eq!(g.asymptotics.regime.roman(), "vi");

    let (rec, _) = record(&["gamma", "--mu1", "1", "--mu2", "1", "--rho", "0"]);
    let Payload::Asymptotics(g) = rec.result else { panic!("wrong payload") };
    assert_eq!(g.asymptotics.gamma, 4.0);
    assert_eq!(g.asymptotics.regime.roman(), "iii");

    let out = ruin2d(&["gamma", "--mu1", "2", "--mu2", "1", "--rho", "0"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--sort"));
    let out = ruin2d(&["gamma", "--mu1", "2", "--mu2", "1", "--rho", "0", "--sort"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&ruin2d(&["gamma", "--mu1", "1"])), 2);
    assert_eq!(code(&ruin2d(&["gamma", "--mu1", "1", "--mu2", "2", "--rho", "1.5"])), 2);
    assert_eq!(code(&ruin2d(&["--threads", "0", "gamma", "--mu1", "1", "--mu2", "2", "--rho", "0"])), 2);
    assert_eq!(code(&ruin2d(&["simulate", "--mu1", "1", "--mu2", "2", "--rho", "0", "--u", "1", "--n-paths", "10"])), 2);
    assert_eq!(code(&ruin2d(&["--help"])), 0);
}

#[test]
fn sweep_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let p = path.to_str().unwrap();
    let out = ruin2d(&["sweep", "--mu1", "1", "--mu2", "2", "--rho-from", "-0.9", "--rho-to", "0.9", "--steps", "181", "--out", p]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.ends_with('\n'));
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["rho", "regime", "gamma", "g_min", "t0_t", "t0_s"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 181);
    let rho = |r: &csv::StringRecord| r[0].parse::<f64>().unwrap();
    let gamma = |r: &csv::StringRecord| r[2].parse::<f64>().unwrap();
    let at = rows.iter().find(|r| rho(r) == 0.75).expect("row at 0.75");
    assert_eq!(gamma(at), 4.0);
    for r in rows.iter().filter(|r| rho(r) > 0.75) {
        assert_eq!(gamma(r), 4.0);
    }
    assert!(rows.windows(2).all(|w| rho(&w[0]) < rho(&w[1])));
}

#[test]
fn sweep_edge_cases() {
    let out = ruin2d(&["--csv", "sweep", "--mu1", "1", "--mu2", "2", "--rho-from", "-0.3", "--rho-to", "0.9", "--steps", "1"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("-0.3,"));

    let out = ruin2d(&["sweep", "--mu1", "1", "--mu2", "2", "--rho-from", "0.5", "--rho-to", "0.5", "--steps", "3"]);
    assert_eq!(code(&out), 2);

    let out = ruin2d(&["sweep", "--mu1", "1", "--mu2", "2", "--rho-from", "0", "--rho-to", "0.5", "--steps", "3", "--out", "/nonexistent/dir/s.csv"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn oracle_gap_exit_code() {
    let args = ["oracle", "--mu1", "1", "--mu2", "2", "--rho", "0.5"];
    let (rec, _) = record(&args);
    let Payload::Oracle(o) = rec.result else { panic!("wrong payload") };
    assert!(o.rel_gap <= 1e-5);
    let mut strict = args.to_vec();
    strict.extend(["--tol", "0"]);
    assert_eq!(code(&ruin2d(&strict)), 4);
}

#[test]
fn qp_examples() {
    let (rec, _) = record(&["qp", "--m11", "1", "--m12", "0.9", "--m22", "1", "--b1", "1", "--b2", "0.5"]);
    let Payload::Qp(q) = rec.result else { panic!("wrong payload") };
    assert_eq!(q.solution.active_set.to_string(), "{1}");
    assert!((q.solution.value - 1.0).abs() < 1e-14);
    assert!((q.solution.solution[1] - 0.9).abs() < 1e-14);
    assert_eq!(code(&ruin2d(&["qp", "--m11", "1", "--m12", "2", "--m22", "1", "--b1", "1", "--b2", "1"])), 2);
    assert_eq!(code(&ruin2d(&["qp", "--m11", "1", "--m12", "0", "--m22", "1", "--b1", "-1", "--b2", "-1"])), 2);
}

#[test]
fn json_round_trips() {
    let cases: &[&[&str]] = &[
        &["gamma", "--mu1", "1", "--mu2", "1", "--rho", "-0.5"],
        &["sweep", "--mu1", "1", "--mu2", "3", "--rho-from", "-0.5", "--rho-to", "0.9", "--steps", "8"],
        &["oracle", "--mu1", "1", "--mu2", "2", "--rho", "0.9"],
        &["qp", "--m11", "2", "--m12", "0.5", "--m22", "1", "--b1", "1", "--b2", "1"],
        &["simulate", "--mu1", "1", "--mu2", "2", "--rho", "0.5", "--u", "1e6", "--n-paths", "100", "--dt", "1e4"],
        &["ladder", "--mu1", "1", "--mu2", "2", "--rho", "0.5", "--u-values", "0.5,0.6", "--n-paths", "200", "--dt", "5e-3"],
        &["simulate", "--mu1", "1", "--mu2", "2", "--rho", "0.9", "--u", "0.5", "--n-paths", "1000", "--dt", "5e-3", "--tilt"],
    ];
    for args in cases {
        let (rec, text) = record(args);
        assert_eq!(rec.tool_version, ruin2d_cli::TOOL_VERSION);
        let again = serde_json::to_string_pretty(&rec).unwrap();
        assert_eq!(again.trim_end(), text.trim_end(), "{args:?}");
    }
}

#[test]
fn simulate_is_thread_count_invariant() {
    let args = ["simulate", "--mu1", "1", "--mu2", "2", "--rho", "0.3", "--u", "0.5", "--n-paths", "2000", "--dt", "5e-3", "--seed", "4"];
    let run = |threads: &str| {
        let mut all = vec!["--threads", threads];
        all.extend_from_slice(&args);
        record(&all).1
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn config_file_sits_under_explicit_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"mu1": 1, "mu2": 2, "rho": 0.9}"#).unwrap();
    let c = cfg.to_str().unwrap();

    let (rec, _) = record(&["--config", c, "gamma"]);
    assert_eq!(rec.params.unwrap().rho(), 0.9);
    let (rec, _) = record(&["--config", c, "gamma", "--rho", "0.5"]);
    assert_eq!(rec.params.unwrap().rho(), 0.5);

    std::fs::write(&cfg, "not json").unwrap();
    assert_eq!(code(&ruin2d(&["--config", c, "gamma"])), 2);
    let missing = Path::new(c).with_file_name("missing.json");
    assert_eq!(code(&ruin2d(&["--config", missing.to_str().unwrap(), "gamma"])), 3);
}

#[test]
fn ladder_writes_csv_and_rejects_empty() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ladder.csv");
    let out = ruin2d(&[
        "ladder", "--mu1", "1", "--mu2", "1", "--rho", "0", "--u-values", "0.5,0.6,0.7",
        "--n-paths", "2000", "--dt", "5e-3", "--common-seed", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("u,p_hat,"));
    assert_eq!(code(&ruin2d(&["ladder", "--mu1", "1", "--mu2", "1", "--rho", "0", "--u-values", ""])), 2);
}

#[test]
fn verify_quick_passes() {
    let out = ruin2d(&["verify", "--quick"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let text = stdout(&out);
    for name in ["dual_equality", "qp_contract", "boundary_identity", "theorem_spot_values", "gamma_shape", "oracle_agreement"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
}
