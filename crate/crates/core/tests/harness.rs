use delaysplit::config::KernelSpec;
use delaysplit::constants::solve_lambda;
use delaysplit::harness::*;
use delaysplit::stepper::StepperOptions;
use delaysplit::{DelayKernel, Error, HistorySegment, Matrix};
use proptest::prelude::*;
use std::fs;

fn scalar_spec(m: f64, r: f64) -> KernelSpec {
    KernelSpec::from_toml_str(&format!("dim = 1\nr = {r}\nM = {m}\n[[terms]]\nlag = {r}\nmatrix = {}\n", -m)).unwrap()
}

fn config(suites: &[Suite], r_sweep: &[f64]) -> ScenarioConfig {
    ScenarioConfig {
        kernel: scalar_spec(1.0, 0.1),
        r_sweep: r_sweep.to_vec(),
        rho: 0.25,
        k_f: None,
        gap_norm: GapNorm::Theoretical,
        seed: 11,
        suites: suites.to_vec(),
        output_dir: None,
        tolerances: Tolerances::default(),
        sampling: Sampling::default(),
    }
}

// Gronwall instances

#[test]
fn zero_seed_gives_zero_instance() {
    let f = gen_gronwall_instance(1, 0.5, 1.0, 6.0, GronwallProfile::Constant(0.0)).unwrap();
    assert!(f.values.iter().all(|&v| v == 0.0));
    assert!(check_gronwall(&f, 0.0, 0.5, 1.0, 0.5).unwrap().ok());
}

#[test]
fn constant_seed_first_computed_node() {
    let f = gen_gronwall_instance(0, 0.5, 1.0, 3.0, GronwallProfile::Constant(1.0)).unwrap();
    let m = f.m;
    assert_eq!(f.time(m), 1.0);
    // the seed jumps from 1 to the computed value at t = r, so the trapezoid
    // value sits within c2 h of c2 r c1
    assert!((f.values[m] - 0.5).abs() <= 0.5 * f.h, "{}", f.values[m]);
    let finer = gen_gronwall_instance_on(0, 0.5, 1.0, 3.0, GronwallProfile::Constant(1.0), 4 * m).unwrap();
    assert!((finer.values[4 * m] - 0.5).abs() < (f.values[m] - 0.5).abs() / 3.0);
}

#[test]
fn random_instances_are_reproducible() {
    let a = gen_gronwall_instance(7, 0.3, 1.0, 8.0, GronwallProfile::Random).unwrap();
    let b = gen_gronwall_instance(7, 0.3, 1.0, 8.0, GronwallProfile::Random).unwrap();
    let c = gen_gronwall_instance(8, 0.3, 1.0, 8.0, GronwallProfile::Random).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn envelope_with_rho_one_is_two_to_minus_t() {
    for t in [0.0, 0.5, 1.0, 3.0, 7.5] {
        let e = gronwall_envelope(1.0, 0.5, 1.0, 1.0, t);
        assert!((e - 2.0 * 0.5f64.powf(t)).abs() <= 1e-14 * e);
    }
    let f = gen_gronwall_instance(0, 0.5, 1.0, 10.0, GronwallProfile::Constant(1.0)).unwrap();
    let rep = check_gronwall(&f, 1.0, 0.5, 1.0, 1.0).unwrap();
    assert!(rep.ok(), "{rep:?}");
    assert!(rep.uniform_margin <= 0.0);
}

#[test]
fn both_rho_hold_and_rho_one_is_tighter_late() {
    let f = gen_gronwall_instance(3, 0.5, 1.0, 10.0, GronwallProfile::Random).unwrap();
    let c1 = f.values[..=f.m].iter().copied().fold(0.0, f64::max);
    let small = check_gronwall(&f, c1, 0.5, 1.0, 0.1).unwrap();
    let full = check_gronwall(&f, c1, 0.5, 1.0, 1.0).unwrap();
    assert!(small.ok() && full.ok());
    let t = 10.0;
    assert!(gronwall_envelope(c1, 0.5, 1.0, 1.0, t) < gronwall_envelope(c1, 0.5, 1.0, 0.1, t));
}

#[test]
fn bad_instances_are_rejected_not_failed() {
    assert!(gen_gronwall_instance(0, 1.0, 1.0, 3.0, GronwallProfile::Constant(1.0)).is_err());
    let mut f = gen_gronwall_instance(0, 0.5, 1.0, 3.0, GronwallProfile::Constant(1.0)).unwrap();
    let i = f.len() / 2;
    f.values[i] += 0.1;
    assert!(matches!(check_gronwall(&f, 1.0, 0.5, 1.0, 1.0), Err(Error::InvalidParameter(_))));
    assert!(check_gronwall(&f, 1.0, 0.5, 1.0, 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gronwall_conclusions_hold(seed in 0u64..1000, q in 0.05f64..0.95, rho in 0.05f64..=1.0, r in 0.1f64..3.0, p in 0usize..3) {
        let profile = [GronwallProfile::Constant(0.7), GronwallProfile::Ramp { start: 1.0, end: 0.1 }, GronwallProfile::Random][p];
        let f = gen_gronwall_instance(seed, q / r, r, 8.0 * r, profile).unwrap();
        let c1 = f.values[..=f.m].iter().copied().fold(0.0, f64::max);
        let rep = check_gronwall(&f, c1, q / r, r, rho).unwrap();
        prop_assert!(rep.ok(), "{:?}", rep);
    }
}

// growth bound

#[test]
fn zero_kernel_keeps_the_head_value() {
    let k = DelayKernel::<f64>::new(2, 0.1, 1.0).unwrap();
    let phi = HistorySegment::from_fn(0.1, 17, |th| vec![1.0 + th, -2.0 * th]).unwrap();
    let rep = check_growth(&k, 0.0, &phi, 1.0, 1e-8, &StepperOptions::default()).unwrap();
    assert!(rep.ok);
    // x stays at phi(0), so at t = 1 the ratio is |phi(0)| e^{-M} / |phi| = e^{-1}
    assert!((rep.min_ratio - (-1.0f64).exp()).abs() < 1e-12, "{rep:?}");
}

#[test]
fn decaying_delay_equation_has_margin() {
    let k = DelayKernel::new(1, 0.1, 1.0).unwrap().with_term(0.1, Matrix::from_rows(&[vec![-1.0]])).unwrap();
    let phi = HistorySegment::constant(0.1, 17, &[1.0]).unwrap();
    let rep = check_growth(&k, 0.0, &phi, 2.0, 1e-8, &StepperOptions::default()).unwrap();
    assert!(rep.ok);
    assert!(rep.worst_ratio == 1.0 && rep.worst_at == 0.0);
    assert!(rep.min_ratio < 0.02, "{rep:?}");
}

#[test]
fn lag_zero_growth_saturates() {
    let m = 2.5f64;
    let k = DelayKernel::new(1, 0.1, m).unwrap().with_term(0.0, Matrix::from_rows(&[vec![m]])).unwrap();
    let phi = HistorySegment::constant(0.1, 17, &[1.0]).unwrap();
    // RK4 at step r/8 undershoots e^{Mt} by 4e-8 over this horizon
    let fine = StepperOptions { max_step_divisor: 16, ..StepperOptions::default() };
    let rep = check_growth(&k, 0.0, &phi, 2.0, 1e-8, &fine).unwrap();
    assert!(rep.ok, "{rep:?}");
    assert!((rep.worst_ratio - 1.0).abs() <= 1e-8 && (rep.min_ratio - 1.0).abs() <= 1e-8, "{rep:?}");
}

#[test]
fn random_pairs_respect_growth() {
    for seed in 0..8u64 {
        let k = random_kernel(seed, 1 + seed as usize % 2, 0.1, 1.5).unwrap();
        let phi = random_history(seed + 100, k.dim(), 0.1, 33).unwrap();
        let rep = check_growth(&k, 0.3, &phi, 2.3, 1e-8, &StepperOptions::default()).unwrap();
        assert!(rep.ok, "seed {seed}: {rep:?}");
    }
}

// root oracle

#[test]
fn root_oracle_limits() {
    let x = characteristic_root(1.0f64, 0.1).unwrap();
    assert!((x + 1.11833).abs() < 1e-5);
    assert!(characteristic_root(1e-9f64, 0.1).unwrap().abs() < 2e-9);
    assert!((characteristic_root(1.0f64, 1e-7).unwrap() + 1.0).abs() < 1e-6);
    assert!(matches!(characteristic_root(1.0f64, 0.5), Err(Error::Hypothesis(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn root_oracle_agrees_with_lambda(m in 0.01f64..10.0, frac in 0.001f64..0.99) {
        let r = frac / (m * std::f64::consts::E);
        let x = characteristic_root(m, r).unwrap();
        let (lambda, _) = solve_lambda(m, r).unwrap();
        prop_assert!((x + lambda).abs() <= 1e-11 * lambda.max(1.0), "m = {}, r = {}: {} vs {}", m, r, x, lambda);
    }
}

// scenarios

#[test]
fn empty_suite_list_is_a_no_op() {
    let b = run_scenario(&config(&[], &[])).unwrap();
    assert!(b.results.is_empty() && b.files.is_empty() && b.ok());
}

#[test]
fn constants_scenario_has_monotone_gap() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(&[Suite::Constants], &[0.1, 0.01, 1e-3]);
    cfg.output_dir = Some(dir.path().to_path_buf());
    let b = run_scenario(&cfg).unwrap();
    assert!(b.ok(), "{}", b.summary());
    let text = fs::read_to_string(dir.path().join("constants.csv")).unwrap();
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let col = rd.headers().unwrap().iter().position(|h| h == "gap").unwrap();
    let gaps: Vec<f64> = rd.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert_eq!(gaps.len(), 3);
    assert!(gaps.windows(2).all(|w| w[1] > w[0]), "{gaps:?}");
    assert!(dir.path().join("summary.txt").exists());
}

#[test]
fn gronwall_scenario_passes_every_instance() {
    let b = run_scenario(&config(&[Suite::Gronwall], &[])).unwrap();
    assert_eq!(b.gronwall.len(), 100);
    assert!(b.gronwall.iter().all(|g| g.report.ok()));
    assert_eq!((b.passed(), b.failed()), (1, 0));
}

#[test]
fn hypothesis_violation_aborts_before_running() {
    let cfg = config(&[Suite::Constants], &[0.1, 0.5]);
    assert!(matches!(run_scenario(&cfg), Err(e) if e.is_configuration()));
    let mut cfg = config(&[Suite::Constants], &[0.1]);
    cfg.tolerances.group = 0.0;
    assert!(matches!(run_scenario(&cfg), Err(Error::Config(_))));
    let cfg = config(&[Suite::Constants], &[0.1, 0.1]);
    assert!(matches!(run_scenario(&cfg), Err(Error::Config(_))));
}

#[test]
fn config_round_trips_through_toml() {
    let mut cfg = config(&[Suite::Constants, Suite::Growth], &[0.1, 0.05]);
    cfg.k_f = Some(3.0);
    let text = cfg.to_toml_string().unwrap();
    assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);
    assert!(ScenarioConfig::from_toml_str("suites = [\"bogus\"]\n[kernel]\ndim = 1\nr = 0.1\nM = 1.0\n").is_err());
}

#[test]
fn gap_rows_follow_k_f() {
    let mut cfg = config(&[Suite::Constants], &[0.1, 1e-3]);
    cfg.k_f = Some(10.0);
    let b = run_scenario(&cfg).unwrap();
    assert_eq!(b.gap.len(), 2);
    assert!(b.gap[0].margin < 0.0 && b.gap[1].margin > 0.0, "{:?}", b.gap);
    assert!(b.gap.iter().all(|g| g.source == GapNorm::Theoretical));
}

#[test]
fn scenario_csvs_are_byte_identical() {
    let mut cfg = config(
        &[Suite::Constants, Suite::Special, Suite::Split, Suite::Verify, Suite::Gronwall, Suite::Growth],
        &[0.1, 0.05],
    );
    cfg.k_f = Some(1.0);
    cfg.sampling = Sampling { samples: 12, pairs: 20, verify_samples: 3, gronwall_instances: 12, growth_pairs: 4, growth_delays: 10 };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cfg.output_dir = Some(a.path().to_path_buf());
    let first = run_scenario(&cfg).unwrap();
    cfg.output_dir = Some(b.path().to_path_buf());
    let second = run_scenario(&cfg).unwrap();
    assert_eq!(first.files.len(), second.files.len());
    assert!(first.files.len() >= 10);
    for (x, y) in first.files.iter().zip(&second.files) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
    assert!(first.ok(), "{}", first.summary());
}
