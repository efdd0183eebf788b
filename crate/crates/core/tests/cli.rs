use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use nonlocal_flow::cli::{self, exit_code, EXIT_INVALID, EXIT_INVARIANT, EXIT_OK, EXIT_VERIFY};
use nonlocal_flow::error::Error;

const PL: &str = "[run]\nt_end = 40\n[pl]\neta = 1/2\nmu0 = 1/8\nalpha0 = 0.2\nK = 3\n";
const CUBIC: &str = "[run]\nt_end = 20\n[cubic]\neta = 1/8\nmu0 = 1/10\nalpha0 = 1/2\nK = 2\n";

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn call(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec!["nonlocal-flow".to_string(), cmd.into(), "--config".into(), config.display().to_string()];
    args.extend(["--out".into(), out.display().to_string()]);
    args.extend(extra.iter().map(|s| s.to_string()));
    cli::main(args)
}

fn bin(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_nonlocal-flow")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn construct_pl_writes_state_layout_and_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pl.cfg", PL);
    let out = dir.path().join("out");
    assert_eq!(call("construct", &cfg, &out, &[]), EXIT_OK);
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    for name in ["pl-parameters", "pl-ordering", "pl-oscillation"] {
        assert!(report.lines().any(|l| l.starts_with(name)), "{name} missing from\n{report}");
    }
    assert!(!report.contains("FAIL"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(json["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
    let state = fs::read_to_string(out.join("state.txt")).unwrap();
    assert!(state.contains("#! family = pl") && state.contains("m+e^"));
    let layout = fs::read_to_string(out.join("layout.csv")).unwrap();
    assert!(layout.starts_with("label,lo,hi,"));
    // Six atoms, with the outer ones split by a tail block on each side.
    let rows: Vec<Vec<&str>> = layout.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    assert_eq!(rows.iter().filter(|r| r[6] == "true").count(), 2);
    assert_eq!((rows[0][1], rows[7][2]), ("0", "1"));
    assert!(rows.windows(2).all(|w| w[0][2] == w[1][1]));
}

#[test]
fn violated_condition_exits_2_and_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let text = PL.replace("K = 3\n", "K = 3\nalpha = 0.1, 0.01\n");
    let cfg = write_config(dir.path(), "bad.cfg", &text);
    let out = dir.path().join("out");
    let (code, err) = bin(&["construct", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("pl-ordering"), "{err}");
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.lines().any(|l| l.starts_with("pl-ordering") && l.contains("FAIL")));
}

#[test]
fn malformed_and_unknown_keys_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for (i, text) in ["[pl\neta = 1/2\n", "[pl]\neta = 1/2\nmu0 = 1/8\nalpha0 = 0.2\nK = 3\ncolour = red\n", "[bogus]\nx = 1\n"]
        .iter()
        .enumerate()
    {
        let cfg = write_config(dir.path(), &format!("m{i}.cfg"), text);
        assert_eq!(call("construct", &cfg, &out, &[]), EXIT_INVALID, "{text}");
    }
    let (code, _) = bin(&["construct", "--config", "/nonexistent/x.cfg"]);
    assert_eq!(code, 2);
    let (code, _) = bin(&["frobnicate"]);
    assert_eq!(code, 2);
}

#[test]
fn equilibrium_gives_empty_events_file() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[run]\nt_end = 5\n[nonlinearity]\nkind = pl\n[state]\nweights = 1/4, 1/2, 1/4\nlevels = -0.9, -0.1, 1.1\nlabels = l, m, r\n";
    let cfg = write_config(dir.path(), "eq.cfg", text);
    let out = dir.path().join("out");
    assert_eq!(call("simulate", &cfg, &out, &[]), EXIT_OK);
    assert_eq!(fs::read_to_string(out.join("events.csv")).unwrap(), "level,tau,boundary\n");
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["invariant_violations"], 0);
    assert_eq!(summary["events"].as_array().unwrap().len(), 0);
}

#[test]
fn pl_counterexample_has_three_increasing_events() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pl.cfg", PL);
    let out = dir.path().join("out");
    assert_eq!(call("simulate", &cfg, &out, &[]), EXIT_OK);
    let events = fs::read_to_string(out.join("events.csv")).unwrap();
    let taus: Vec<f64> = events.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(taus.len(), 3);
    assert!(taus.windows(2).all(|w| w[0] < w[1]));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["invariant_violations"], 0);
    assert!(summary["oscillation"]["amplitude"].as_f64().unwrap() > 0.8 / 3.0);
}

#[test]
fn nonpositive_or_missing_t_end_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let zero = write_config(dir.path(), "z.cfg", &PL.replace("t_end = 40", "t_end = 0"));
    assert_eq!(call("simulate", &zero, &out, &[]), EXIT_INVALID);
    let missing = write_config(dir.path(), "n.cfg", &PL.replace("t_end = 40\n", ""));
    assert_eq!(call("simulate", &missing, &out, &[]), EXIT_INVALID);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pl.cfg", PL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(call("simulate", &cfg, &a, &[]), EXIT_OK);
    assert_eq!(call("simulate", &cfg, &b, &[]), EXIT_OK);
    for f in ["trajectory.csv", "events.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn constructed_cubic_state_satisfies_the_necessary_condition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", CUBIC);
    let out = dir.path().join("out");
    assert_eq!(call("verify", &cfg, &out, &["--check", "necessary"]), EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(v["checks"][0]["name"], "necessary");
    assert_eq!(v["pass"], true);
}

#[test]
fn tampered_state_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", CUBIC);
    let built = dir.path().join("built");
    assert_eq!(call("construct", &cfg, &built, &[]), EXIT_OK);
    // Shift every active level by 0.05 so the mean is 0.05.
    let text = fs::read_to_string(built.join("state.txt")).unwrap();
    let tampered: String = text
        .lines()
        .map(|l| {
            let p: Vec<&str> = l.split_whitespace().collect();
            match (l.starts_with('#'), p.get(2).and_then(|v| v.parse::<f64>().ok())) {
                (false, Some(v)) => format!("{} {} {:.16e}\n", p[0], p[1], v + 0.05),
                _ => format!("{l}\n"),
            }
        })
        .collect();
    fs::write(dir.path().join("tampered.txt"), tampered).unwrap();
    let vcfg = write_config(dir.path(), "v.cfg", "[nonlinearity]\nkind = cubic\n[state]\nfile = tampered.txt\n");
    let (code, err) = bin(&["verify", "--config", vcfg.to_str().unwrap(), "--out", dir.path().join("v").to_str().unwrap()]);
    assert_eq!(code, EXIT_VERIFY);
    assert!(err.contains("failed: necessary"), "{err}");
}

#[test]
fn pl_trajectory_checks_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pl.cfg", PL);
    let out = dir.path().join("out");
    let code = call("verify", &cfg, &out, &["--check", "dtbarf", "--check", "um-bounds", "--check", "oscillation"]);
    assert_eq!(code, EXIT_OK, "{}", fs::read_to_string(out.join("verify.txt")).unwrap());
}

#[test]
fn unknown_check_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pl.cfg", PL);
    assert_eq!(call("verify", &cfg, &dir.path().join("o"), &["--check", "vibes"]), EXIT_INVALID);
}

#[test]
fn seeded_random_check_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[nonlinearity]\nkind = cubic\n[state]\nweights = 1/2, 1/2\nlevels = -1, 1\n[verify]\nrandom_states = 200\n";
    let cfg = write_config(dir.path(), "r.cfg", text);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(call("verify", &cfg, &a, &["--check", "grad-random", "--seed", "11"]), EXIT_OK);
    assert_eq!(call("verify", &cfg, &b, &["--check", "grad-random", "--seed", "11"]), EXIT_OK);
    assert_eq!(fs::read(a.join("verify.txt")).unwrap(), fs::read(b.join("verify.txt")).unwrap());
}

#[test]
fn strict_cubic_constructs_but_refuses_to_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.cfg", &(CUBIC.to_string() + "strictness = full\n"));
    let out = dir.path().join("out");
    assert_eq!(call("construct", &cfg, &out, &[]), EXIT_OK);
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.lines().any(|l| l.starts_with("cubic-nonconvergence")) && !report.contains("FAIL"));
    let (code, err) = bin(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("refused") && err.contains("strictness = ordering"), "{err}");
}

fn sweep_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn sweep_recovers_four_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.cfg", "[sweep]\nfamily = pl_three_value\neps = 1/100, 1/1000, 1/10000\n");
    let out = dir.path().join("out");
    assert_eq!(call("sweep", &cfg, &out, &[]), EXIT_OK);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("family,eps_l,eps_r,eta,fitted_rate,predicted_rate,rel_error,residual,status\n"));
    for (row, eps) in sweep_rows(&csv).iter().zip([1e-2, 1e-3, 1e-4]) {
        assert_eq!(row[8], "ok");
        let fitted: f64 = row[4].parse().unwrap();
        assert!((fitted / (4.0 * eps) - 1.0).abs() < 1e-6, "{row:?}");
    }
    let again = dir.path().join("again");
    assert_eq!(call("sweep", &cfg, &again, &[]), EXIT_OK);
    assert_eq!(csv, fs::read_to_string(again.join("sweep.csv")).unwrap());
}

#[test]
fn symmetric_cubic_sweep_has_order_one_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.cfg", "[sweep]\nfamily = cubic_symmetric\neps = 0\n");
    let out = dir.path().join("out");
    assert_eq!(call("sweep", &cfg, &out, &[]), EXIT_OK);
    let rows = sweep_rows(&fs::read_to_string(out.join("sweep.csv")).unwrap());
    let fitted: f64 = rows[0][4].parse().unwrap();
    assert!((fitted - 2.0).abs() < 0.1, "{fitted}");
}

#[test]
fn empty_grid_gives_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.cfg", "[sweep]\nfamily = pl_three_value\neps =\n");
    let out = dir.path().join("out");
    assert_eq!(call("sweep", &cfg, &out, &[]), EXIT_OK);
    assert_eq!(fs::read_to_string(out.join("sweep.csv")).unwrap().lines().count(), 1);
}

#[test]
fn failed_grid_points_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    // ε = 1/4 leaves no mass in one outer phase.
    let cfg = write_config(dir.path(), "s.cfg", "[sweep]\nfamily = pl_three_value\neps = 1/4, 1/100\n");
    let out = dir.path().join("out");
    assert_eq!(call("sweep", &cfg, &out, &[]), EXIT_OK);
    let rows = sweep_rows(&fs::read_to_string(out.join("sweep.csv")).unwrap());
    assert!(rows[0][8].starts_with("error"));
    assert_eq!(rows[1][8], "ok");
}

#[test]
fn error_kinds_map_to_exit_codes() {
    assert_eq!(exit_code(&Error::InvariantViolation { t: 1.0, what: "x".into() }), EXIT_INVARIANT);
    assert_eq!(exit_code(&Error::StepSizeUnderflow { t: 1.0, dt: 1e-15 }), EXIT_INVARIANT);
    assert_eq!(exit_code(&Error::InvalidSpec { condition: "c".into(), detail: "d".into() }), EXIT_INVALID);
    assert_eq!(exit_code(&Error::Infeasible("x".into())), EXIT_INVALID);
}
