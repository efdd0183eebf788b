use std::path::Path;
use std::sync::Arc;

use nonlocal_flow::cli::RunConfig;
use nonlocal_flow::constructors::*;
use nonlocal_flow::error::Error;
use nonlocal_flow::exact::Weight;
use nonlocal_flow::integrator::{run, IntegratorOptions};
use nonlocal_flow::nonlinearity::Nonlinearity;
use nonlocal_flow::state::AtomicState;

fn pl_spec() -> PLSpec {
    PLSpec { eta: Weight::fraction(1, 2), mu0: Weight::fraction(1, 8), alpha0: 0.2, k: 3, alpha: AlphaSchedule::default() }
}

fn cubic_spec(theta: Weight, k: usize) -> CubicSpec {
    CubicSpec {
        eta: Weight::fraction(1, 8),
        mu0: Weight::fraction(1, 10),
        alpha0: 0.5,
        theta,
        k,
        alpha: AlphaSchedule::default(),
        strictness: Strictness::Ordering,
        subatoms: 4,
    }
}

#[test]
fn constructed_states_round_trip_through_text() {
    let states = [
        build_pl(&pl_spec()).unwrap(),
        build_cubic(&cubic_spec(Weight::zero(), 2)).unwrap(),
        build_cubic(&cubic_spec(Weight::fraction(1, 64), 3)).unwrap(),
    ];
    for st in states {
        let text = st.to_text();
        let back = AtomicState::from_text(st.nonlinearity_arc(), &text).unwrap();
        assert_eq!(back, st);
        assert_eq!(back.to_text(), text);
        assert!(back.provenance().is_some());
    }
}

#[test]
fn state_text_errors_carry_line_numbers() {
    let pl = Arc::new(Nonlinearity::piecewise_linear());
    let err = AtomicState::from_text(pl.clone(), "a 1/2 -1\nb 1/2 nonsense\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    let err = AtomicState::from_text(pl.clone(), "a 1/2 -1 extra\n").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 1, .. }));
    let cubic_text = build_cubic(&cubic_spec(Weight::zero(), 2)).unwrap().to_text();
    assert!(matches!(AtomicState::from_text(pl.clone(), &cubic_text), Err(Error::Parse { .. })));
    // Weights must sum to one.
    assert!(AtomicState::from_text(pl, "a 1/2 -1\nb 1/3 1\n").is_err());
}

#[test]
fn trajectory_csv_has_one_row_per_sample() {
    let st = pl_three_value(&Weight::fraction(1, 100), &Weight::fraction(1, 100), -1.0, 0.1).unwrap();
    let tr = run(&st, 2.0, &IntegratorOptions::default(), &mut []).unwrap();
    let mut buf = Vec::new();
    tr.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,fbar,um,energy,mean,nu_l,nu_m,nu_r,R"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), tr.samples.len());
    assert!(rows.iter().all(|r| r.split(',').count() == 9));
    let last_t: f64 = rows.last().unwrap().split(',').next().unwrap().parse().unwrap();
    assert_eq!(last_t, 2.0);
}

#[test]
fn run_config_rejects_bad_input() {
    let base = Path::new(".");
    let cases = [
        ("[pl]\neta = 1/2\neta = 1/4\n", "duplicate key"),
        ("[pl]\neta = 1/2\nmu0 = 1/8\nalpha0 = 0.2\nK = 3\n[cubic]\neta = 1/8\nmu0 = 1/10\nalpha0 = 1/2\nK = 2\n", "two sources"),
        ("[sweep]\nfamily = pl_counterexample\neps = 1/100\n", "grid mismatch"),
        ("[sweep]\nfamily = pl_three_value\neps_l = 1/100\neps_r = 1/100, 1/1000\n", "length mismatch"),
        ("[run]\nt_end = -1\n[nonlinearity]\nkind = pl\n", "negative horizon"),
        ("[run]\nrtol = 0\n[nonlinearity]\nkind = pl\n", "zero tolerance"),
        ("[nonlinearity]\nkind = cubic\n[pl]\neta = 1/2\nmu0 = 1/8\nalpha0 = 0.2\nK = 3\n", "family mismatch"),
        ("[cubic]\neta = 1/8\nmu0 = 1/10\nalpha0 = 1/2\nK = 2\nstrictness = sloppy\n", "strictness"),
        ("[state]\nweights = 1/2, 1/2\nlevels = -1, 1\n", "no nonlinearity"),
    ];
    for (text, why) in cases {
        assert!(RunConfig::parse(text, base).is_err(), "{why} accepted");
    }
}

#[test]
fn run_config_defaults_and_overrides() {
    let text = "[run]\nt_end = 12\nsample_every = 0.05\nseed = 9\n[cubic]\neta = 1/8\nmu0 = 1/10\nalpha0 = 1/2\nK = 2\ntheta = 1/64\nramp = smooth\n";
    let cfg = RunConfig::parse(text, Path::new("/tmp")).unwrap();
    assert_eq!(cfg.t_end, Some(12.0));
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.opts.sample_every, 0.05);
    assert_eq!(cfg.opts.rtol, IntegratorOptions::default().rtol);
    assert_eq!(cfg.verify.radius, 0.05);
    let state_cfg = RunConfig::parse("[nonlinearity]\nkind = pl\n[state]\nfile = s.txt\n", Path::new("/tmp")).unwrap();
    assert!(matches!(
        state_cfg.source,
        Some(nonlocal_flow::cli::run_config::Source::StateFile(ref p)) if p == Path::new("/tmp/s.txt")
    ));
}
