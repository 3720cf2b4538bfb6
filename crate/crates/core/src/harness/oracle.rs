//! Closed-form oracles and seeded random kernels and histories.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{DelayKernel, ThetaShape, TimeProfile};
use crate::scalar::Real;
use crate::segment::HistorySegment;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dominant real root of `lambda = -a e^{-lambda r}`, the characteristic
/// equation of `x'(t) = -a x(t - r)`. Newton from `-a`.
pub fn characteristic_root<T: Real>(a: T, r: T) -> Result<T> {
    if !(r > T::zero()) || !a.is_finite() || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("need finite a and r > 0, got a = {a}, r = {r}")));
    }
    if !(a * r * T::one().exp() < T::one()) {
        return Err(Error::Hypothesis(format!("a r e = {} is not below 1", a * r * T::one().exp())));
    }
    let f = |x: T| x + a * (-x * r).exp();
    let tol = T::lit(1e-13);
    let mut x = -a;
    for _ in 0..100 {
        let fx = f(x);
        if fx.abs() <= tol * x.abs().max(T::one()) {
            return Ok(x);
        }
        let d = T::one() - a * r * (-x * r).exp();
        if !(d != T::zero()) || !d.is_finite() {
            break;
        }
        x -= fx / d;
    }
    let fx = f(x);
    if fx.abs() <= tol * x.abs().max(T::one()) {
        Ok(x)
    } else {
        Err(Error::NotConvergent { doublings: 100, increment: fx.as_f64() })
    }
}

/// Random kernel of dimension `dim` with delay `r` and declared bound `m`.
///
/// One to three discrete terms, one of them at the full delay, and a density
/// with probability one half; coefficients are rescaled so the variation
/// bound `sum |A_k| sup|s_k| + |B| sup|s_B| int|shape|` lands in `[0.5 m, m]`.
pub fn random_kernel(seed: u64, dim: usize, r: f64, m: f64) -> Result<DelayKernel<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let matrix = |rng: &mut ChaCha8Rng| {
        let rows: Vec<Vec<f64>> = (0..dim).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();
        Matrix::from_rows(&rows)
    };
    let profile = |rng: &mut ChaCha8Rng| -> (TimeProfile<f64>, f64) {
        match rng.gen_range(0..3) {
            0 => (TimeProfile::Const, 1.0),
            1 => {
                let (a, b) = (rng.gen_range(0.2..1.0), rng.gen_range(-0.5..0.5));
                let p = TimeProfile::Sin { a, b, omega: rng.gen_range(0.5..5.0), phase: rng.gen_range(0.0..6.3) };
                (p, f64::abs(a) + f64::abs(b))
            }
            _ => {
                let (a, b) = (rng.gen_range(0.2..1.0), rng.gen_range(-0.5..0.5));
                (TimeProfile::ExpDecay { a, b, rate: rng.gen_range(0.1..3.0) }, f64::abs(a) + f64::abs(b))
            }
        }
    };

    let count = rng.gen_range(1..=3usize);
    let mut terms = Vec::with_capacity(count);
    for k in 0..count {
        let lag = if k == 0 { r } else { rng.gen_range(0.0..=r) };
        let a = matrix(&mut rng);
        let (p, sup) = profile(&mut rng);
        terms.push((lag, a, p, sup));
    }
    let density = if rng.gen::<bool>() {
        let b = matrix(&mut rng);
        let (p, sup) = profile(&mut rng);
        let shape = match rng.gen_range(0..3) {
            0 => ThetaShape::Uniform,
            1 => ThetaShape::Exp { rate: rng.gen_range(-3.0..3.0) / r },
            _ => ThetaShape::Linear { a: rng.gen_range(-1.0..1.0), b: rng.gen_range(-1.0..1.0) / r },
        };
        Some((b, p, sup, shape))
    } else {
        None
    };

    let mut bound: f64 = terms.iter().map(|(_, a, _, sup)| a.norm_inf() * sup).sum();
    if let Some((b, _, sup, shape)) = &density {
        bound += b.norm_inf() * sup * shape.abs_integral(r);
    }
    let target = m * rng.gen_range(0.5..=1.0);
    let scale = if bound > 0.0 { target / bound } else { 1.0 };

    let mut kernel = DelayKernel::new(dim, r, m)?;
    for (lag, a, p, _) in terms {
        kernel = kernel.with_profiled_term(lag, a.scaled(scale), p)?;
    }
    if let Some((b, p, _, shape)) = density {
        kernel = kernel.with_density(b.scaled(scale), p, shape)?;
    }
    Ok(kernel)
}

/// Random piecewise-linear history on `nodes` nodes with values in `[-1, 1]`.
pub fn random_history(seed: u64, dim: usize, r: f64, nodes: usize) -> Result<HistorySegment<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let knots = rng.gen_range(1..=5usize);
    let ys: Vec<Vec<f64>> = (0..=knots).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();
    let values: Vec<Vec<f64>> = (0..nodes)
        .map(|j| {
            let x = j as f64 / (nodes - 1) as f64 * knots as f64;
            let k = (x.floor() as usize).min(knots - 1);
            let s = x - k as f64;
            (0..dim).map(|i| ys[k][i] + (ys[k + 1][i] - ys[k][i]) * s).collect()
        })
        .collect();
    let h = r / (nodes - 1) as f64;
    let slopes = crate::splitting::monotone_slopes(&values, h);
    HistorySegment::from_values_and_slopes(r, values, slopes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ValidationGrid;

    #[test]
    fn root_of_unit_delay_equation() {
        let x = characteristic_root(1.0f64, 0.1).unwrap();
        assert!((x + 1.1183255915896297).abs() < 1e-12);
        assert_eq!(characteristic_root(0.0f64, 0.1).unwrap(), 0.0);
        assert!(characteristic_root(1.0f64, 0.4).is_err());
    }

    #[test]
    fn random_kernels_satisfy_the_hypothesis() {
        for seed in 0..40 {
            let k = random_kernel(seed, 1 + (seed as usize % 3), 0.1, 2.0).unwrap();
            let grid = ValidationGrid { t_start: -50.0, t_end: 50.0, points: 2001 };
            let rep = k.validate_hypothesis(&grid).unwrap();
            assert!(rep.ok, "seed {seed}: {rep:?}");
            assert!(rep.measured_variation > 0.0);
        }
    }
}
