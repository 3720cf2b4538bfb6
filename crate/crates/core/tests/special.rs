use delaysplit::constants::compute_constants;
use delaysplit::error::Error;
use delaysplit::linalg::Matrix;
use delaysplit::model::{DelayKernel, ThetaShape, TimeProfile};
use delaysplit::special::{
    build_special_solution, check_driver_properties, derivative_identity_residual, forward_cross_check,
    PropertyTolerances, SpecialOptions, SpecialSolutionTable,
};

/// Root of `lambda = M e^{r lambda}` in `(0, 1/r)` by Newton from `M`.
fn slow_root(m: f64, r: f64) -> f64 {
    let mut x = m;
    for _ in 0..100 {
        let step = (m * (r * x).exp() - x) / (m * r * (r * x).exp() - 1.0);
        x -= step;
        if step.abs() < 1e-16 * x {
            break;
        }
    }
    x
}

fn scalar_delay(m: f64, r: f64) -> DelayKernel<f64> {
    DelayKernel::new(1, r, m).unwrap().with_term(r, Matrix::from_rows(&[vec![-m]])).unwrap()
}

fn rotation(r: f64) -> DelayKernel<f64> {
    DelayKernel::new(2, r, 1.0).unwrap().with_term(0.0, Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]])).unwrap()
}

#[test]
fn zero_kernel_gives_identity() {
    let k = DelayKernel::<f64>::new(3, 0.1, 1.0).unwrap();
    let t = build_special_solution(&k, 0.5, &SpecialOptions::for_delay(0.1)).unwrap();
    for i in 0..t.nodes() {
        assert_eq!(t.node_value(i), &Matrix::identity(3));
    }
    let c = compute_constants(1.0, 0.1, 0.25).unwrap();
    let rep = check_driver_properties(&t, &c, &PropertyTolerances::default());
    assert!(rep.all_ok());
    assert_eq!(rep.group_residual, 0.0);
}

#[test]
fn rotation_matches_matrix_exponential() {
    let t0 = 0.3;
    let t = build_special_solution(&rotation(0.1), t0, &SpecialOptions::for_delay(0.1)).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..t.nodes() {
        let s = t.time(i) - t0;
        let exact = Matrix::from_rows(&[vec![s.cos(), s.sin()], vec![-s.sin(), s.cos()]]);
        worst = worst.max(t.node_value(i).sub(&exact).max_abs());
    }
    assert!(worst < 1e-8, "worst {worst:e}");
    let between = t.phi_base(t0 + 0.123).unwrap();
    assert!((between[(0, 0)] - 0.123f64.cos()).abs() < 1e-8);
}

#[test]
fn scalar_delay_matches_characteristic_root() {
    let (m, r) = (1.0, 0.1);
    let lam = slow_root(m, r);
    assert!((lam - 1.1183255915896297).abs() < 1e-14);
    let t = build_special_solution(&scalar_delay(m, r), 0.0, &SpecialOptions::for_delay(r)).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..t.nodes() {
        let s = t.time(i);
        if s < -r - 1e-12 {
            continue;
        }
        worst = worst.max((t.node_value(i)[(0, 0)] - (-lam * s).exp()).abs());
    }
    assert!(worst < 1e-7, "worst {worst:e}");
    let p = t.phi_value(0.55, 0.2).unwrap()[(0, 0)];
    assert!((p - (-lam * 0.35).exp()).abs() < 1e-7);
}

#[test]
fn driver_properties_on_oracle_kernels() {
    let tol = PropertyTolerances::default();
    let delay = scalar_delay(1.0, 0.1);
    let t = build_special_solution(&delay, 0.0, &SpecialOptions::for_delay(0.1)).unwrap();
    let rep = check_driver_properties(&t, &compute_constants(1.0, 0.1, 0.25).unwrap(), &tol);
    assert!(rep.all_ok(), "{rep:?}");
    assert!(rep.growth_margin <= 0.0);
    assert!(rep.backward_constant <= 1.0 + 1e-9);
    let d = derivative_identity_residual(&t, &delay).unwrap();
    assert!(d.ok, "{d:?}");

    let grow = DelayKernel::new(1, 0.1, 2.0).unwrap().with_term(0.0, Matrix::from_rows(&[vec![2.0]])).unwrap();
    let t = build_special_solution(&grow, 0.0, &SpecialOptions::for_delay(0.1)).unwrap();
    let c = compute_constants(2.0, 0.1, 0.25).unwrap();
    assert!(c.lambda > 2.0);
    let rep = check_driver_properties(&t, &c, &tol);
    assert!(rep.all_ok(), "{rep:?}");
    assert!(derivative_identity_residual(&t, &grow).unwrap().ok);
}

#[test]
fn columns_agree_with_forward_integration() {
    let k = DelayKernel::new(2, 0.1, 2.5)
        .unwrap()
        .with_term(0.0, Matrix::from_rows(&[vec![-0.5, 0.3], vec![0.2, -0.4]]))
        .unwrap()
        .with_profiled_term(
            0.05,
            Matrix::from_rows(&[vec![0.4, -0.2], vec![0.0, 0.5]]),
            TimeProfile::Sin { a: 1.0, b: 0.2, omega: 3.0, phase: 0.0 },
        )
        .unwrap()
        .with_density(Matrix::from_rows(&[vec![-2.0, 0.0], vec![1.0, -1.0]]), TimeProfile::Const, ThetaShape::Uniform)
        .unwrap();
    let t = build_special_solution(&k, 0.0, &SpecialOptions::for_delay(0.1)).unwrap();
    let gap = forward_cross_check(&t, &k, 257).unwrap();
    assert!(gap < 1e-7, "gap {gap:e}");
}

#[test]
fn group_identity_and_inverse() {
    let t = build_special_solution(&scalar_delay(1.0, 0.1), 0.0, &SpecialOptions::for_delay(0.1)).unwrap();
    let a = t.phi_value(0.7, 0.3).unwrap().mul(&t.phi_value(0.3, -0.4).unwrap());
    let b = t.phi_value(0.7, -0.4).unwrap();
    assert!(a.sub(&b).max_abs() < 1e-12);
    assert_eq!(t.phi_value(0.25, 0.25).unwrap()[(0, 0)], 1.0);
    assert!(matches!(t.phi_value(2.0, 0.0), Err(Error::OutsideWindow { .. })));
}

#[test]
fn csv_round_trip() {
    let t = build_special_solution(&rotation(0.1), 1.0, &SpecialOptions::for_delay(0.1)).unwrap();
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    assert!(buf.starts_with(b"t,phi_11,phi_12,phi_21,phi_22\n"));
    let back = SpecialSolutionTable::read_csv(&buf[..], 1.0, 0.1).unwrap();
    assert_eq!(back.nodes(), t.nodes());
    for i in 0..t.nodes() {
        assert_eq!(back.node_value(i), t.node_value(i));
    }
    assert!(back.phi_value(1.37, 0.8).unwrap().sub(&t.phi_value(1.37, 0.8).unwrap()).max_abs() < 1e-13);
}

#[test]
fn rejects_oversized_window_and_hypothesis_violations() {
    let k = scalar_delay(1.0, 0.1);
    let big = SpecialOptions::for_delay(0.1).with_window(100.0, 1.0);
    assert!(matches!(build_special_solution(&k, 0.0, &big), Err(Error::WindowTooLarge { .. })));
    let bad = scalar_delay(1.0, 0.4);
    assert!(matches!(build_special_solution(&bad, 0.0, &SpecialOptions::for_delay(0.4)), Err(Error::Hypothesis(_))));
}

#[test]
fn small_delay_table() {
    let (m, r) = (1.0, 1e-3);
    let lam = slow_root(m, r);
    let t = build_special_solution(&scalar_delay(m, r), 0.0, &SpecialOptions::for_delay(r)).unwrap();
    let (_, hi) = t.window();
    assert!((t.phi_base(hi).unwrap()[(0, 0)] - (-lam * hi).exp()).abs() < 1e-9);
}
