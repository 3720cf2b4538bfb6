//! Roots of `g(x) = M e^{r x} - x` and the explicit dichotomy constants.

use crate::error::{Error, Result};
use crate::scalar::Real;
use rayon::prelude::*;
use std::io::Write;

pub const DEFAULT_RHO: f64 = 0.25;

/// `g(x) = M e^{r x} - x`.
pub fn g<T: Real>(m: T, r: T, x: T) -> T {
    m * (r * x).exp() - x
}

/// `g'(x) = M r e^{r x} - 1`.
pub fn g_prime<T: Real>(m: T, r: T, x: T) -> T {
    m * r * (r * x).exp() - T::one()
}

/// Checks `M > 0`, `r > 0` and `M e r < 1`.
pub fn check_hypothesis<T: Real>(m: T, r: T) -> Result<()> {
    if !(m > T::zero()) || !m.is_finite() {
        return Err(Error::Hypothesis(format!("variation bound M = {m} must be positive and finite")));
    }
    if !(r > T::zero()) || !r.is_finite() {
        return Err(Error::Hypothesis(format!("delay r = {r} must be positive and finite")));
    }
    let mer = m * T::lit(std::f64::consts::E) * r;
    if !(mer < T::one()) {
        return Err(Error::Hypothesis(format!("M e r = {mer} is not below 1 (M = {m}, r = {r})")));
    }
    Ok(())
}

fn bisect_newton<T: Real>(m: T, r: T, mut lo: T, mut hi: T, increasing: bool) -> T {
    // g < 0 on one side of the root, > 0 on the other; `increasing` tells which.
    let below = |x: T| (g(m, r, x) < T::zero()) == increasing;
    for _ in 0..200 {
        let mid = lo + (hi - lo) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::lit(1e-6) * hi {
            break;
        }
    }
    let mut x = lo + (hi - lo) * T::lit(0.5);
    for _ in 0..50 {
        let step = g(m, r, x) / g_prime(m, r, x);
        let next = x - step;
        if !next.is_finite() || next <= lo || next >= hi {
            break;
        }
        if next == x {
            break;
        }
        x = next;
        if step.abs() <= T::epsilon() * x.abs() {
            break;
        }
    }
    x
}

/// The two real roots `0 < lambda_r < 1/r < mu_r` of `g`.
pub fn solve_lambda<T: Real>(m: T, r: T) -> Result<(T, T)> {
    check_hypothesis(m, r)?;
    let inv_r = T::one() / r;
    let lambda = bisect_newton(m, r, T::zero(), inv_r, false);

    // g' vanishes at lambda0 >= 1/r; g decreases before it and increases after.
    let lambda0 = -(m * r).ln() / r;
    let mut lo = lambda0;
    let mut width = lambda0.max(inv_r);
    let mut hi = lambda0 + width;
    while !(g(m, r, hi) > T::zero()) {
        lo = hi;
        width *= T::lit(2.0);
        hi = lambda0 + width;
        if !hi.is_finite() {
            return Err(Error::InvalidParameter(format!("no upper bracket for mu_r at M = {m}, r = {r}")));
        }
    }
    let mu = bisect_newton(m, r, lo, hi, true);
    Ok((lambda, mu))
}

/// Explicit constants of the pseudo-exponential dichotomy for given `(M, r, rho)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DichotomyConstants<T> {
    pub m: T,
    pub r: T,
    pub rho: T,
    pub lambda: T,
    pub mu: T,
    pub alpha: T,
    pub beta: T,
    pub k1: T,
    pub k2: T,
    pub gamma: T,
    pub k: T,
    pub proj_bound: T,
    pub gap: T,
    pub l_r: T,
}

pub fn compute_constants<T: Real>(m: T, r: T, rho: T) -> Result<DichotomyConstants<T>> {
    if !(rho > T::zero() && rho <= T::one()) {
        return Err(Error::InvalidParameter(format!("rho = {rho} must lie in (0, 1]")));
    }
    let (lambda, mu) = solve_lambda(m, r)?;
    let two = T::lit(2.0);
    let e = T::lit(std::f64::consts::E);
    let rl = r * lambda;
    let ln_rl = rl.ln();
    let alpha = -lambda;
    let beta = rho * ln_rl / r - lambda;
    let k1 = T::one();
    let k2 = -two * (two + rl).exp() * rl.powf(T::one() - two * rho) / (rho * ln_rl);
    let gap = -rho * ln_rl / r;
    let gamma = (m - beta) / (alpha - beta);
    let k = k1.max(k2);
    let proj_bound = two * e * gamma * k.powf(two * gamma - T::one());
    let l_r = gap / (T::lit(4.0) * k * k * proj_bound);
    Ok(DichotomyConstants { m, r, rho, lambda, mu, alpha, beta, k1, k2, gamma, k, proj_bound, gap, l_r })
}

/// `L_r - K_f`; positive certifies the spectral gap condition.
pub fn gap_margin<T: Real>(c: &DichotomyConstants<T>, k_f: T) -> T {
    c.l_r - k_f
}

impl<T: Real> DichotomyConstants<T> {
    pub const CSV_HEADER: [&'static str; 12] =
        ["r", "lambda_r", "mu_r", "alpha", "beta", "K1", "K2", "gamma", "K", "proj_bound", "gap", "L_r"];

    pub fn csv_record(&self) -> Vec<String> {
        [
            self.r,
            self.lambda,
            self.mu,
            self.alpha,
            self.beta,
            self.k1,
            self.k2,
            self.gamma,
            self.k,
            self.proj_bound,
            self.gap,
            self.l_r,
        ]
        .iter()
        .map(|v| format!("{:e}", v.as_f64()))
        .collect()
    }

    /// Key-value block, one field per line.
    pub fn summary(&self) -> String {
        let rows = [
            ("M", self.m),
            ("r", self.r),
            ("rho", self.rho),
            ("lambda_r", self.lambda),
            ("mu_r", self.mu),
            ("alpha_r", self.alpha),
            ("beta_r", self.beta),
            ("K1_r", self.k1),
            ("K2_r", self.k2),
            ("gamma_r", self.gamma),
            ("K_r", self.k),
            ("proj_bound", self.proj_bound),
            ("gap", self.gap),
            ("L_r", self.l_r),
        ];
        rows.iter().map(|(k, v)| format!("{k} = {:.17e}\n", v.as_f64())).collect()
    }

    /// `gap / K^{2 gamma + 1}` for a given `K`.
    pub fn gap_ratio(&self, k: T) -> T {
        self.gap / k.powf(T::lit(2.0) * self.gamma + T::one())
    }
}

/// Monotonicity flags of a sweep, evaluated in order of decreasing `r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SweepFlags {
    pub r_lambda_decreasing: bool,
    pub gap_increasing: bool,
    /// `L_r` strictly increasing over the last three points.
    pub l_r_tail_increasing: bool,
    /// `gap/K1^{2gamma+1}` and `gap/K2^{2gamma+1}` strictly increasing over the last three points.
    pub gap_ratios_tail_increasing: bool,
}

#[derive(Clone, Debug)]
pub struct ConstantsSweep<T> {
    /// Entries in input order.
    pub entries: Vec<DichotomyConstants<T>>,
    pub flags: SweepFlags,
}

fn strictly_increasing<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

fn tail<T>(v: &[T]) -> &[T] {
    &v[v.len().saturating_sub(3)..]
}

/// Constants for every `r` in `r_list`. Flags are computed after ordering by decreasing `r`.
pub fn sweep_constants<T: Real>(m: T, rho: T, r_list: &[T]) -> Result<ConstantsSweep<T>> {
    for &r in r_list {
        check_hypothesis(m, r)?;
    }
    let entries = r_list.par_iter().map(|&r| compute_constants(m, r, rho)).collect::<Result<Vec<_>>>()?;

    let mut sorted: Vec<&DichotomyConstants<T>> = entries.iter().collect();
    sorted.sort_by(|a, b| b.r.partial_cmp(&a.r).unwrap());
    let neg_rl: Vec<T> = sorted.iter().map(|c| -(c.r * c.lambda)).collect();
    let gap: Vec<T> = sorted.iter().map(|c| c.gap).collect();
    let l_r: Vec<T> = sorted.iter().map(|c| c.l_r).collect();
    let ratio1: Vec<T> = sorted.iter().map(|c| c.gap_ratio(c.k1)).collect();
    let ratio2: Vec<T> = sorted.iter().map(|c| c.gap_ratio(c.k2)).collect();
    let flags = SweepFlags {
        r_lambda_decreasing: strictly_increasing(&neg_rl),
        gap_increasing: strictly_increasing(&gap),
        l_r_tail_increasing: strictly_increasing(tail(&l_r)),
        gap_ratios_tail_increasing: strictly_increasing(tail(&ratio1)) && strictly_increasing(tail(&ratio2)),
    };
    Ok(ConstantsSweep { entries, flags })
}

impl<T: Real> ConstantsSweep<T> {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(DichotomyConstants::<T>::CSV_HEADER)?;
        for c in &self.entries {
            wr.write_record(c.csv_record())?;
        }
        wr.flush()?;
        Ok(())
    }
}
