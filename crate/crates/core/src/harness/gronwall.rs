//! Sliding-window Gronwall inequality: instances and the check of both conclusions.
//!
//! Instances are nonnegative functions on a uniform grid of `[0, T]` with
//! `m` cells per delay. On `[0, r)` the values come from a seed profile; from
//! `t = r` on, each node solves the trapezoid form of
//! `phi(t) = c2 int_{t-r}^{t} phi(s) ds`, which saturates the hypothesis.

use crate::error::{Error, Result};
use crate::scalar::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Nonnegative samples on the grid `t_i = i h`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<T> {
    pub h: T,
    /// Cells per delay, `r = m h`.
    pub m: usize,
    pub values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn new(h: T, m: usize, values: Vec<T>) -> Result<Self> {
        if !(h > T::zero()) || m == 0 {
            return Err(Error::InvalidParameter("grid step and cells per delay must be positive".into()));
        }
        if values.len() <= m {
            return Err(Error::InvalidParameter(format!("need more than {m} nodes, got {}", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid function value {v} is not finite and nonnegative")));
        }
        Ok(GridFunction { h, m, values })
    }

    pub fn delay(&self) -> T {
        self.h * T::count(self.m)
    }

    pub fn time(&self, i: usize) -> T {
        self.h * T::count(i)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Trapezoid value of `int_{t_i - r}^{t_i} phi` for `i >= m`.
    pub fn window_integral(&self, i: usize) -> T {
        let half = T::lit(0.5);
        let w = &self.values[i - self.m..=i];
        let inner: T = w[1..w.len() - 1].iter().copied().sum();
        self.h * (half * (w[0] + w[w.len() - 1]) + inner)
    }
}

/// Seed profile on `[0, r)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GronwallProfile {
    Constant(f64),
    /// Linear from `start` to `end` across the seed interval.
    Ramp { start: f64, end: f64 },
    /// Random nonnegative piecewise-linear function with values in `[0, 1]`.
    Random,
}

impl GronwallProfile {
    pub fn name(&self) -> &'static str {
        match self {
            GronwallProfile::Constant(_) => "constant",
            GronwallProfile::Ramp { .. } => "ramp",
            GronwallProfile::Random => "random",
        }
    }
}

/// Default cells per delay of generated instances.
pub const GRONWALL_CELLS: usize = 64;

/// Equality-recursion instance on `[0, t_end]` with `GRONWALL_CELLS` cells per delay.
pub fn gen_gronwall_instance(seed: u64, c2: f64, r: f64, t_end: f64, profile: GronwallProfile) -> Result<GridFunction<f64>> {
    gen_gronwall_instance_on(seed, c2, r, t_end, profile, GRONWALL_CELLS)
}

pub fn gen_gronwall_instance_on(
    seed: u64,
    c2: f64,
    r: f64,
    t_end: f64,
    profile: GronwallProfile,
    m: usize,
) -> Result<GridFunction<f64>> {
    if !(c2 > 0.0 && r > 0.0) {
        return Err(Error::InvalidParameter(format!("need c2 > 0 and r > 0, got c2 = {c2}, r = {r}")));
    }
    if !(c2 * r < 1.0) {
        return Err(Error::InvalidParameter(format!("c2 r = {} must be below 1", c2 * r)));
    }
    if m < 8 {
        return Err(Error::InvalidParameter("need at least 8 cells per delay".into()));
    }
    if !(t_end > r) {
        return Err(Error::InvalidParameter(format!("horizon {t_end} must exceed the delay {r}")));
    }
    let h = r / m as f64;
    let nodes = (t_end / h).round() as usize + 1;
    let mut values = Vec::with_capacity(nodes);
    match profile {
        GronwallProfile::Constant(c) => values.extend(std::iter::repeat_n(c, m)),
        GronwallProfile::Ramp { start, end } => {
            values.extend((0..m).map(|i| start + (end - start) * i as f64 / m as f64));
        }
        GronwallProfile::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let knots = rng.gen_range(2..=6usize);
            let ys: Vec<f64> = (0..=knots).map(|_| rng.gen_range(0.0..=1.0)).collect();
            values.extend((0..m).map(|i| {
                let x = i as f64 / m as f64 * knots as f64;
                let k = (x.floor() as usize).min(knots - 1);
                let s = x - k as f64;
                ys[k] + (ys[k + 1] - ys[k]) * s
            }));
        }
    }
    if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter("seed profile must be finite and nonnegative".into()));
    }
    // phi_i (1 - c2 h / 2) = c2 h (phi_{i-m} / 2 + sum_{i-m < k < i} phi_k)
    let denom = 1.0 - 0.5 * c2 * h;
    for i in m..nodes {
        let inner: f64 = values[i + 1 - m..i].iter().sum();
        let v = c2 * h * (0.5 * values[i - m] + inner) / denom;
        values.push(v);
    }
    GridFunction::new(h, m, values)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GronwallReport<T> {
    pub c1: T,
    pub c2: T,
    pub rho: T,
    /// `max_i phi_i - c1`; nonpositive when the first conclusion holds exactly.
    pub uniform_margin: T,
    pub uniform_at: T,
    /// `max_i (phi_i - envelope(t_i)) / c1`.
    pub envelope_margin: T,
    pub envelope_at: T,
    /// Absolute slack granted to both conclusions.
    pub slack: T,
    pub uniform_ok: bool,
    pub envelope_ok: bool,
}

impl<T: Real> GronwallReport<T> {
    pub fn ok(&self) -> bool {
        self.uniform_ok && self.envelope_ok
    }
}

/// `c1 (c2 r)^{-rho} exp(rho ln(c2 r) t / r)`.
pub fn gronwall_envelope<T: Real>(c1: T, c2: T, r: T, rho: T, t: T) -> T {
    let q = c2 * r;
    c1 / q.powf(rho) * (rho * q.ln() * t / r).exp()
}

/// Checks `phi <= c1` and `phi <= envelope` at every node. Fails with
/// [`Error::InvalidParameter`] when the instance itself violates the hypothesis on the grid.
pub fn check_gronwall<T: Real>(f: &GridFunction<T>, c1: T, c2: T, r: T, rho: T) -> Result<GronwallReport<T>> {
    if !(rho > T::zero() && rho <= T::one()) {
        return Err(Error::InvalidParameter(format!("rho = {rho} must lie in (0, 1]")));
    }
    if !(c2 > T::zero()) || !(c2 * r < T::one()) {
        return Err(Error::InvalidParameter(format!("need c2 > 0 and c2 r < 1, got c2 = {c2}, r = {r}")));
    }
    if (f.delay() - r).abs() > T::lit(1e-12) * r {
        return Err(Error::InvalidParameter(format!("grid delay {} differs from r = {r}", f.delay())));
    }
    let m = f.m;
    let round = T::lit(1e-12);
    let seed_max = f.values[..=m].iter().copied().fold(T::zero(), T::max);
    if seed_max > c1 * (T::one() + round) {
        return Err(Error::InvalidParameter(format!("instance exceeds c1 = {c1} on [0, r]: {seed_max}")));
    }
    for i in m..f.len() {
        let rhs = c2 * f.window_integral(i);
        if f.values[i] > rhs + round * rhs.max(c1) {
            return Err(Error::InvalidParameter(format!(
                "instance violates the window inequality at t = {}: {} > {}",
                f.time(i),
                f.values[i],
                rhs
            )));
        }
    }

    let slack = T::lit(1e-8) * c1.max(T::one()) + f.h * f.h * c1;
    let mut rep = GronwallReport {
        c1,
        c2,
        rho,
        uniform_margin: T::neg_infinity(),
        uniform_at: T::zero(),
        envelope_margin: T::neg_infinity(),
        envelope_at: T::zero(),
        slack,
        uniform_ok: true,
        envelope_ok: true,
    };
    for (i, &v) in f.values.iter().enumerate() {
        let t = f.time(i);
        if v - c1 > rep.uniform_margin {
            rep.uniform_margin = v - c1;
            rep.uniform_at = t;
        }
        let env = gronwall_envelope(c1, c2, r, rho, t);
        if v - env > rep.envelope_margin {
            rep.envelope_margin = v - env;
            rep.envelope_at = t;
        }
    }
    rep.uniform_ok = rep.uniform_margin <= slack;
    rep.envelope_ok = rep.envelope_margin <= slack;
    Ok(rep)
}
