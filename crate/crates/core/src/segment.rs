//! History segments: functions on `[-r, 0]` with values in `R^n`.

use crate::error::{Error, Result};
use crate::linalg::max_norm;
use crate::scalar::Real;

/// Smallest admissible node count of a [`HistorySegment`] grid.
pub const MIN_NODES: usize = 16;
/// Default node count used when a segment is sampled from a trajectory.
pub const DEFAULT_NODES: usize = 33;

const SUP_REL_TOL: f64 = 1e-10;
const SUP_MAX_SAMPLES: usize = 1 << 16;

/// Anything that can be read as a function on `[-r, 0]`.
pub trait Segment<T: Real> {
    fn dim(&self) -> usize;
    fn delay(&self) -> T;
    /// Writes the value at `theta` (in `[-r, 0]`) into `out`.
    fn eval_into(&self, theta: T, out: &mut [T]);

    fn eval(&self, theta: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.eval_into(theta, &mut out);
        out
    }

    /// Number of equal cells of `[-r, 0]` at whose scale the segment may
    /// have features; quadrature starts from this subdivision.
    fn cells(&self) -> usize {
        1
    }

    /// Sup over `[-r, 0]` of the max norm, by refinement.
    fn sup_norm(&self) -> T {
        refined_sup(|th, out| self.eval_into(th, out), self.dim(), -self.delay(), T::zero(), 64)
    }
}

/// Adapts a closure to [`Segment`].
pub struct FnSegment<T, F> {
    dim: usize,
    delay: T,
    f: F,
}

impl<T: Real, F: Fn(T, &mut [T])> FnSegment<T, F> {
    pub fn new(dim: usize, delay: T, f: F) -> Self {
        FnSegment { dim, delay, f }
    }
}

impl<T: Real, F: Fn(T, &mut [T])> Segment<T> for FnSegment<T, F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn delay(&self) -> T {
        self.delay
    }
    fn eval_into(&self, theta: T, out: &mut [T]) {
        (self.f)(theta, out)
    }
}

/// Sup over `[a, b]` of `|f(x)|` (max norm).
///
/// Samples on a uniform grid, polishes the best sample with a golden-section
/// search on the neighbouring cells, and doubles the grid until two successive
/// estimates agree to 1e-10 relative.
pub fn refined_sup<T: Real, F: Fn(T, &mut [T])>(f: F, dim: usize, a: T, b: T, initial: usize) -> T {
    let mut buf = vec![T::zero(); dim];
    let mut g = |x: T| {
        f(x, &mut buf);
        max_norm(&buf)
    };
    let mut n = initial.max(8);
    let mut prev: Option<T> = None;
    loop {
        let h = (b - a) / T::count(n);
        let mut best = T::neg_infinity();
        let mut best_i = 0;
        for i in 0..=n {
            let x = if i == n { b } else { a + h * T::count(i) };
            let v = g(x);
            if v > best || v.is_nan() {
                best = v;
                best_i = i;
            }
        }
        if !best.is_finite() {
            return best;
        }
        let lo = if best_i == 0 { a } else { a + h * T::count(best_i - 1) };
        let hi = if best_i >= n - 1 { b } else { a + h * T::count(best_i + 1) };
        let est = best.max(golden_max(&mut g, lo, hi));
        if let Some(p) = prev {
            if (est - p).abs() <= T::lit(SUP_REL_TOL) * est.max(T::min_positive_value()) || n >= SUP_MAX_SAMPLES {
                return est.max(p);
            }
        }
        prev = Some(est);
        n *= 2;
    }
}

fn golden_max<T: Real, G: FnMut(T) -> T>(g: &mut G, mut lo: T, mut hi: T) -> T {
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = g(x1);
    let mut f2 = g(x2);
    let mut best = f1.max(f2);
    for _ in 0..80 {
        if (hi - lo).abs() <= T::epsilon() * (T::one() + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = g(x2);
        }
        best = best.max(f1).max(f2);
    }
    best
}

/// An element of `C([-r, 0], R^n)` stored on a uniform grid.
///
/// Between nodes the segment is the cubic Hermite interpolant of the node
/// values and node slopes. Slopes are either supplied (e.g. from a dense
/// trajectory) or estimated with fourth-order finite differences, one-sided
/// at both endpoints, so the interpolant stays linear in the node values.
#[derive(Clone, Debug, PartialEq)]
pub struct HistorySegment<T> {
    delay: T,
    dim: usize,
    values: Vec<T>,
    slopes: Vec<T>,
}

impl<T: Real> HistorySegment<T> {
    /// Builds a segment from node values (`values[j]` is the value at
    /// `theta_j = -r + j r / (N - 1)`).
    pub fn from_values(delay: T, values: Vec<Vec<T>>) -> Result<Self> {
        let dim = check_grid(delay, &values)?;
        let flat: Vec<T> = values.into_iter().flatten().collect();
        let slopes = fd_slopes(&flat, dim, delay);
        Ok(HistorySegment { delay, dim, values: flat, slopes })
    }

    pub fn from_values_and_slopes(delay: T, values: Vec<Vec<T>>, slopes: Vec<Vec<T>>) -> Result<Self> {
        let dim = check_grid(delay, &values)?;
        if slopes.len() != values.len() || slopes.iter().any(|s| s.len() != dim) {
            return Err(Error::InvalidParameter("slope array shape differs from value array".into()));
        }
        Ok(HistorySegment {
            delay,
            dim,
            values: values.into_iter().flatten().collect(),
            slopes: slopes.into_iter().flatten().collect(),
        })
    }

    /// Samples `f` at `nodes` grid points.
    pub fn from_fn<F: Fn(T) -> Vec<T>>(delay: T, nodes: usize, f: F) -> Result<Self> {
        let h = delay / T::count(nodes.max(2) - 1);
        let values = (0..nodes).map(|j| f(-delay + h * T::count(j))).collect();
        Self::from_values(delay, values)
    }

    pub fn constant(delay: T, nodes: usize, value: &[T]) -> Result<Self> {
        Self::from_fn(delay, nodes, |_| value.to_vec())
    }

    pub fn nodes(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn step(&self) -> T {
        self.delay / T::count(self.nodes() - 1)
    }

    pub fn theta(&self, j: usize) -> T {
        if j + 1 == self.nodes() {
            T::zero()
        } else {
            -self.delay + self.step() * T::count(j)
        }
    }

    pub fn node_value(&self, j: usize) -> &[T] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn node_slope(&self, j: usize) -> &[T] {
        &self.slopes[j * self.dim..(j + 1) * self.dim]
    }

    /// Node values flattened node-major (`n` entries per node).
    pub fn flat_values(&self) -> &[T] {
        &self.values
    }

    /// Value at `theta = 0`.
    pub fn head(&self) -> &[T] {
        self.node_value(self.nodes() - 1)
    }

    /// `a * self + b * other` on the common grid.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Result<Self> {
        if other.dim != self.dim || other.values.len() != self.values.len() {
            return Err(Error::DimensionMismatch { expected: self.values.len(), got: other.values.len() });
        }
        let lin = |x: &[T], y: &[T]| x.iter().zip(y).map(|(&p, &q)| a * p + b * q).collect::<Vec<_>>();
        Ok(HistorySegment {
            delay: self.delay,
            dim: self.dim,
            values: lin(&self.values, &other.values),
            slopes: lin(&self.slopes, &other.slopes),
        })
    }

    pub fn scaled(&self, s: T) -> Self {
        HistorySegment {
            delay: self.delay,
            dim: self.dim,
            values: self.values.iter().map(|&v| v * s).collect(),
            slopes: self.slopes.iter().map(|&v| v * s).collect(),
        }
    }

    /// Largest max-norm difference at the grid nodes.
    pub fn node_distance(&self, other: &Self) -> T {
        self.values.iter().zip(&other.values).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Sup-norm distance between the two interpolants.
    pub fn distance(&self, other: &Self) -> T {
        refined_sup(
            |th, out| {
                let mut tmp = vec![T::zero(); self.dim];
                self.eval_into(th, out);
                other.eval_into(th, &mut tmp);
                for (o, &t) in out.iter_mut().zip(&tmp) {
                    *o -= t;
                }
            },
            self.dim,
            -self.delay,
            T::zero(),
            4 * self.nodes(),
        )
    }
}

impl<T: Real> Segment<T> for HistorySegment<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn delay(&self) -> T {
        self.delay
    }

    fn eval_into(&self, theta: T, out: &mut [T]) {
        let n = self.nodes();
        let h = self.step();
        let pos = ((theta + self.delay) / h).max(T::zero());
        let nearest = pos.round();
        if (pos - nearest).abs() <= T::lit(64.0) * T::epsilon() * T::one().max(pos) {
            let k = nearest.to_usize().unwrap_or(0).min(n - 1);
            out.copy_from_slice(self.node_value(k));
            return;
        }
        let mut j = pos.floor().to_usize().unwrap_or(0);
        if j >= n - 1 {
            j = n - 2;
        }
        let s = (pos - T::count(j)).min(T::lit(1.0));
        hermite(s, h, self.node_value(j), self.node_slope(j), self.node_value(j + 1), self.node_slope(j + 1), out);
    }

    fn cells(&self) -> usize {
        self.nodes() - 1
    }

    fn sup_norm(&self) -> T {
        refined_sup(|th, out| self.eval_into(th, out), self.dim, -self.delay, T::zero(), 4 * (self.nodes() - 1))
    }
}

/// Cubic Hermite basis on a cell of width `h`, local coordinate `s` in `[0, 1]`.
#[inline]
pub(crate) fn hermite<T: Real>(s: T, h: T, y0: &[T], d0: &[T], y1: &[T], d1: &[T], out: &mut [T]) {
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let s2 = s * s;
    let s3 = s2 * s;
    let h10 = s3 - two * s2 + s;
    let h01 = three * s2 - two * s3;
    let h11 = s3 - s2;
    for i in 0..out.len() {
        out[i] = y0[i] + h01 * (y1[i] - y0[i]) + h * (h10 * d0[i] + h11 * d1[i]);
    }
}

fn check_grid<T: Real>(delay: T, values: &[Vec<T>]) -> Result<usize> {
    if !(delay > T::zero()) {
        return Err(Error::InvalidParameter(format!("segment delay must be positive, got {delay}")));
    }
    if values.len() < MIN_NODES {
        return Err(Error::InvalidParameter(format!(
            "segment grid needs at least {MIN_NODES} nodes, got {}",
            values.len()
        )));
    }
    let dim = values[0].len();
    if dim == 0 || values.iter().any(|v| v.len() != dim) {
        return Err(Error::InvalidParameter("segment node values must share a positive dimension".into()));
    }
    Ok(dim)
}

fn fd_slopes<T: Real>(flat: &[T], dim: usize, delay: T) -> Vec<T> {
    let n = flat.len() / dim;
    let h = delay / T::count(n - 1);
    let c = |k: f64| T::lit(k);
    let d = c(12.0) * h;
    let mut out = vec![T::zero(); flat.len()];
    for i in 0..dim {
        let f = |j: usize| flat[j * dim + i];
        for j in 0..n {
            let s = if j == 0 {
                c(-25.0) * f(0) + c(48.0) * f(1) - c(36.0) * f(2) + c(16.0) * f(3) - c(3.0) * f(4)
            } else if j == 1 {
                c(-3.0) * f(0) - c(10.0) * f(1) + c(18.0) * f(2) - c(6.0) * f(3) + f(4)
            } else if j == n - 1 {
                c(25.0) * f(n - 1) - c(48.0) * f(n - 2) + c(36.0) * f(n - 3) - c(16.0) * f(n - 4) + c(3.0) * f(n - 5)
            } else if j == n - 2 {
                c(3.0) * f(n - 1) + c(10.0) * f(n - 2) - c(18.0) * f(n - 3) + c(6.0) * f(n - 4) - f(n - 5)
            } else {
                f(j - 2) - c(8.0) * f(j - 1) + c(8.0) * f(j + 1) - f(j + 2)
            };
            out[j * dim + i] = s / d;
        }
    }
    out
}
