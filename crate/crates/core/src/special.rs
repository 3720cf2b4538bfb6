//! Driver's special matrix solution `Phi(t, t0)`.
//!
//! Each column solves `x(t) = e_j + int_{t0}^t L(u, x_u) du` on a window
//! around `t0`, in both time directions. The equation is solved by Picard
//! iteration on a uniform grid with cumulative cubic quadrature; the
//! contraction holds in the norm `sup |x(t)| e^{-|t - t0|/r}` with modulus
//! `M e r`. Below the window the columns are continued by their value at
//! the lower window edge.

use crate::constants::DichotomyConstants;
use crate::error::{Error, Result};
use crate::linalg::{max_dist, max_norm, Matrix};
use crate::model::{DelayKernel, ValidationGrid};
use crate::scalar::Real;
use crate::segment::{HistorySegment, Segment};
use rayon::prelude::*;
use std::io::{Read, Write};

#[derive(Clone, Copy, Debug)]
pub struct SpecialOptions<T> {
    /// Backward extent `T-`.
    pub window_minus: T,
    /// Forward extent `T+`.
    pub window_plus: T,
    /// Grid step is `r / steps_per_delay`.
    pub steps_per_delay: usize,
    /// Stop when successive iterates differ by at most this in the weighted norm
    /// and, relative to the node value, at every node.
    pub tol: T,
    pub max_iterations: usize,
}

impl<T: Real> SpecialOptions<T> {
    /// Default window `T- = T+ = 10 r`, grid `h = r/16`.
    pub fn for_delay(r: T) -> Self {
        let w = T::lit(10.0) * r;
        SpecialOptions { window_minus: w, window_plus: w, steps_per_delay: 16, tol: T::lit(1e-13), max_iterations: 400 }
    }

    pub fn with_window(mut self, minus: T, plus: T) -> Self {
        self.window_minus = minus;
        self.window_plus = plus;
        self
    }
}

/// `Phi(t, t0)` on the nodes `t0 + i h`, `-n_minus <= i <= n_plus`.
#[derive(Clone, Debug)]
pub struct SpecialSolutionTable<T> {
    t0: T,
    delay: T,
    h: T,
    n_minus: usize,
    dim: usize,
    /// One matrix per node, ascending in time.
    values: Vec<Matrix<T>>,
    /// `values` concatenated, row-major per node.
    flat: Vec<T>,
    residual: T,
    iterations: usize,
}

/// Cubic Lagrange interpolation on a uniform grid of vectors stored node-major.
fn lagrange_into<T: Real>(data: &[T], dim: usize, nodes: usize, pos: T, out: &mut [T]) {
    let snap = pos.round();
    if (pos - snap).abs() <= T::lit(1e-9) && snap >= T::zero() && snap <= T::count(nodes - 1) {
        let i = snap.to_usize().unwrap();
        out.copy_from_slice(&data[i * dim..(i + 1) * dim]);
        return;
    }
    let base = pos.floor().to_isize().unwrap_or(0) - 1;
    let j = base.clamp(0, nodes as isize - 4) as usize;
    let x = pos - T::count(j);
    let (one, two, three, six) = (T::one(), T::lit(2.0), T::lit(3.0), T::lit(6.0));
    let w = [
        -(x - one) * (x - two) * (x - three) / six,
        x * (x - two) * (x - three) / two,
        -x * (x - one) * (x - three) / two,
        x * (x - one) * (x - two) / six,
    ];
    for o in out.iter_mut() {
        *o = T::zero();
    }
    for (k, wk) in w.iter().enumerate() {
        let row = &data[(j + k) * dim..(j + k + 1) * dim];
        for (o, &v) in out.iter_mut().zip(row) {
            *o += *wk * v;
        }
    }
}

/// A column iterate seen as the segment `x_u`.
struct ColumnView<'a, T> {
    data: &'a [T],
    dim: usize,
    nodes: usize,
    lo: T,
    h: T,
    delay: T,
    u: T,
}

impl<T: Real> Segment<T> for ColumnView<'_, T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn cells(&self) -> usize {
        (self.delay / self.h).round().to_usize().unwrap_or(1)
    }

    fn delay(&self) -> T {
        self.delay
    }

    fn eval_into(&self, theta: T, out: &mut [T]) {
        let pos = ((self.u + theta - self.lo) / self.h).max(T::zero());
        lagrange_into(self.data, self.dim, self.nodes, pos, out);
    }
}

struct Grid<T> {
    lo: T,
    h: T,
    n_minus: usize,
    nodes: usize,
    delay: T,
}

impl<T: Real> Grid<T> {
    fn time(&self, i: usize) -> T {
        self.lo + self.h * T::count(i)
    }

    fn weight(&self, i: usize) -> T {
        let d = i.abs_diff(self.n_minus);
        (-(self.h * T::count(d)) / self.delay).exp()
    }
}

/// Cumulative integral from the base node outwards, accumulated one cell at a
/// time with the integral of the cubic through four neighbouring nodes.
/// Pairwise Simpson would decouple even and odd nodes and carry a parasitic
/// mode that grows against decaying solutions.
fn cumulative<T: Real>(f: &[T], dim: usize, n_minus: usize, h: T, out: &mut [T]) {
    let nodes = f.len() / dim;
    let c = h / T::lit(24.0);
    let (c9, c13, c19, c5) = (T::lit(9.0), T::lit(13.0), T::lit(19.0), T::lit(5.0));
    // integral over [t_i, t_{i+1}] of component k
    let cell = |i: usize, k: usize| -> T {
        let v = |j: usize| f[j * dim + k];
        if nodes < 4 {
            return (v(i) + v(i + 1)) * h * T::lit(0.5);
        }
        if i == 0 {
            c * (c9 * v(0) + c19 * v(1) - c5 * v(2) + v(3))
        } else if i + 2 >= nodes {
            c * (v(i - 2) - c5 * v(i - 1) + c19 * v(i) + c9 * v(i + 1))
        } else {
            c * (c13 * (v(i) + v(i + 1)) - v(i - 1) - v(i + 2))
        }
    };
    let b = n_minus;
    for k in 0..dim {
        out[b * dim + k] = T::zero();
    }
    for i in b + 1..nodes {
        for k in 0..dim {
            out[i * dim + k] = out[(i - 1) * dim + k] + cell(i - 1, k);
        }
    }
    for i in (0..b).rev() {
        for k in 0..dim {
            out[i * dim + k] = out[(i + 1) * dim + k] - cell(i, k);
        }
    }
}

fn solve_column<T: Real>(
    kernel: &DelayKernel<T>,
    grid: &Grid<T>,
    j: usize,
    opts: &SpecialOptions<T>,
) -> Result<(Vec<T>, T, usize)> {
    let n = kernel.dim();
    let nodes = grid.nodes;
    let mut e = vec![T::zero(); n];
    e[j] = T::one();
    let mut x: Vec<T> = (0..nodes).flat_map(|_| e.clone()).collect();
    let mut f = vec![T::zero(); nodes * n];
    let mut integral = vec![T::zero(); nodes * n];
    let mut history: Vec<T> = Vec::new();
    let mut last = T::infinity();

    for it in 1..=opts.max_iterations {
        for i in 0..nodes {
            let view = ColumnView { data: &x, dim: n, nodes, lo: grid.lo, h: grid.h, delay: grid.delay, u: grid.time(i) };
            kernel.apply_into(grid.time(i), &view, &mut f[i * n..(i + 1) * n])?;
        }
        cumulative(&f, n, grid.n_minus, grid.h, &mut integral);
        // weighted change drives the contraction; the per-node relative change
        // certifies the far ends of the window, where the weight hides everything
        let eps = T::lit(64.0) * T::epsilon();
        let mut diff = T::zero();
        let mut rel = T::zero();
        for i in 0..nodes {
            let w = grid.weight(i);
            let mut change = T::zero();
            let mut size = T::zero();
            let mut floor = T::zero();
            for k in 0..n {
                let new = e[k] + integral[i * n + k];
                change = change.max((new - x[i * n + k]).abs());
                size = size.max(new.abs());
                floor = floor.max(T::one() + integral[i * n + k].abs());
                x[i * n + k] = new;
            }
            diff = diff.max(change * w);
            let allowed = (opts.tol * size).max(eps * floor);
            rel = rel.max(change / allowed * opts.tol);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t: grid.time(0).as_f64() });
        }
        last = diff.max(rel);
        if diff <= opts.tol && rel <= opts.tol {
            return Ok((x, last, it));
        }
        if diff > opts.tol {
            history.push(diff);
            let len = history.len();
            if len >= 6 && history[len - 1] >= T::lit(0.5) * history[len - 6] {
                return Err(Error::Stalled { iterations: it, achieved: diff.as_f64(), tol: opts.tol.as_f64() });
            }
        }
    }
    Err(Error::Stalled { iterations: opts.max_iterations, achieved: last.as_f64(), tol: opts.tol.as_f64() })
}

/// Builds `Phi(., t0)` on `[t0 - T-, t0 + T+]`.
pub fn build_special_solution<T: Real>(
    kernel: &DelayKernel<T>,
    t0: T,
    opts: &SpecialOptions<T>,
) -> Result<SpecialSolutionTable<T>> {
    if !(opts.tol > T::zero()) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if !(opts.window_minus >= T::zero() && opts.window_plus >= T::zero()) {
        return Err(Error::InvalidParameter("window extents must be nonnegative".into()));
    }
    if opts.steps_per_delay < 4 {
        return Err(Error::InvalidParameter("need at least 4 grid steps per delay".into()));
    }
    let r = kernel.delay();
    let ratio = opts.window_minus.max(opts.window_plus) / r;
    if !(ratio < T::lit(0.9) * T::max_value().ln()) {
        return Err(Error::WindowTooLarge { ratio: ratio.as_f64() });
    }
    let grid_check = ValidationGrid { t_start: t0 - opts.window_minus, t_end: t0 + opts.window_plus, points: 256 };
    kernel.require_hypothesis(&grid_check)?;

    let h = r / T::count(opts.steps_per_delay);
    let n_minus = (opts.window_minus / h - T::lit(1e-9)).ceil().to_usize().unwrap_or(0);
    let n_plus = (opts.window_plus / h - T::lit(1e-9)).ceil().to_usize().unwrap_or(0);
    let nodes = n_minus + n_plus + 1;
    if nodes < 4 {
        return Err(Error::InvalidParameter("window must span at least three grid steps".into()));
    }
    let grid = Grid { lo: t0 - h * T::count(n_minus), h, n_minus, nodes, delay: r };
    let n = kernel.dim();

    let columns = (0..n)
        .into_par_iter()
        .map(|j| solve_column(kernel, &grid, j, opts))
        .collect::<Result<Vec<_>>>()?;

    let mut values = Vec::with_capacity(nodes);
    for i in 0..nodes {
        let mut m = Matrix::zeros(n, n);
        for (j, (col, _, _)) in columns.iter().enumerate() {
            m.set_column(j, &col[i * n..(i + 1) * n]);
        }
        values.push(m);
    }
    values[n_minus] = Matrix::identity(n);
    let residual = columns.iter().map(|c| c.1).fold(T::zero(), T::max);
    let iterations = columns.iter().map(|c| c.2).max().unwrap_or(0);
    Ok(SpecialSolutionTable::from_parts(t0, r, h, n_minus, values, residual, iterations))
}

impl<T: Real> SpecialSolutionTable<T> {
    fn from_parts(t0: T, delay: T, h: T, n_minus: usize, values: Vec<Matrix<T>>, residual: T, iterations: usize) -> Self {
        let dim = values[0].rows();
        let flat = values.iter().flat_map(|m| m.as_slice().iter().copied()).collect();
        SpecialSolutionTable { t0, delay, h, n_minus, dim, values, flat, residual, iterations }
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn delay(&self) -> T {
        self.delay
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> T {
        self.h
    }

    pub fn window(&self) -> (T, T) {
        (self.time(0), self.time(self.values.len() - 1))
    }

    pub fn nodes(&self) -> usize {
        self.values.len()
    }

    pub fn base_index(&self) -> usize {
        self.n_minus
    }

    pub fn time(&self, i: usize) -> T {
        self.t0 + self.h * (T::count(i) - T::count(self.n_minus))
    }

    pub fn node_value(&self, i: usize) -> &Matrix<T> {
        &self.values[i]
    }

    /// Weighted-norm difference of the last two Picard iterates.
    pub fn residual(&self) -> T {
        self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn check(&self, t: T) -> Result<()> {
        let (lo, hi) = self.window();
        let slack = T::lit(1e-12) * (T::one() + lo.abs().max(hi.abs()));
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(Error::OutsideWindow { t: t.as_f64(), lo: lo.as_f64(), hi: hi.as_f64() });
        }
        Ok(())
    }

    /// `Phi(t, t0)` by cubic interpolation; exact at nodes.
    pub fn phi_base(&self, t: T) -> Result<Matrix<T>> {
        self.check(t)?;
        Ok(self.phi_base_unchecked(t))
    }

    /// `Phi(t, t0) v` into `out`, clamped to the window.
    pub fn apply_base_into(&self, t: T, v: &[T], buf: &mut [T], out: &mut [T]) {
        let n = self.dim;
        let nodes = self.values.len();
        let pos = ((t - self.time(0)) / self.h).max(T::zero()).min(T::count(nodes - 1));
        lagrange_into(&self.flat, n * n, nodes, pos, buf);
        for i in 0..n {
            out[i] = (0..n).map(|j| buf[i * n + j] * v[j]).sum();
        }
    }

    fn phi_base_unchecked(&self, t: T) -> Matrix<T> {
        let n = self.dim;
        let nodes = self.values.len();
        let pos = ((t - self.time(0)) / self.h).max(T::zero()).min(T::count(nodes - 1));
        let snap = pos.round();
        if (pos - snap).abs() <= T::lit(1e-9) {
            return self.values[snap.to_usize().unwrap()].clone();
        }
        let mut out = vec![T::zero(); n * n];
        lagrange_into(&self.flat, n * n, nodes, pos, &mut out);
        Matrix::from_row_major(n, n, out)
    }

    /// `Phi(t, s) = Phi(t, t0) Phi(s, t0)^{-1}`.
    pub fn phi_value(&self, t: T, s: T) -> Result<Matrix<T>> {
        self.check(t)?;
        self.check(s)?;
        if s == self.t0 {
            return Ok(self.phi_base_unchecked(t));
        }
        if s == t {
            return Ok(Matrix::identity(self.dim));
        }
        let inv = self.inverse_at(s)?;
        Ok(self.phi_base_unchecked(t).mul(&inv))
    }

    /// `Phi(s, t0)^{-1} = Phi(t0, s)`, rejected when the condition number exceeds 1e12.
    pub fn inverse_at(&self, s: T) -> Result<Matrix<T>> {
        self.check(s)?;
        let m = self.phi_base_unchecked(s);
        let inv = m.inverse().ok_or(Error::IllConditioned { s: s.as_f64(), cond: f64::INFINITY })?;
        let cond = m.norm_inf() * inv.norm_inf();
        if !(cond <= T::lit(1e12)) {
            return Err(Error::IllConditioned { s: s.as_f64(), cond: cond.as_f64() });
        }
        Ok(inv)
    }

    /// The segment `theta -> Phi(t + theta, t0) v`.
    pub fn segment(&self, t: T, v: &[T], nodes: usize) -> Result<HistorySegment<T>> {
        self.check(t - self.delay)?;
        self.check(t)?;
        HistorySegment::from_fn(self.delay, nodes, |th| self.phi_base_unchecked(t + th).mul_vec(v))
    }

    /// The segment `theta -> Phi(s + theta, s) v`, an element of the range of `P(s)`.
    pub fn range_segment(&self, s: T, v: &[T], nodes: usize) -> Result<HistorySegment<T>> {
        let w = self.inverse_at(s)?.mul_vec(v);
        self.segment(s, &w, nodes)
    }

    /// Writes `t, phi_11, phi_12, ..., phi_nn` (row-major) per node.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        for i in 1..=self.dim {
            for j in 1..=self.dim {
                header.push(format!("phi_{i}{j}"));
            }
        }
        wr.write_record(&header)?;
        for (i, m) in self.values.iter().enumerate() {
            let mut rec = vec![self.time(i).as_f64().to_string()];
            rec.extend(m.as_slice().iter().map(|v| v.as_f64().to_string()));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads a table written by [`write_csv`](Self::write_csv). The base time
    /// and the delay are not part of the file and must be supplied.
    pub fn read_csv<R: Read>(reader: R, t0: T, delay: T) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(reader);
        let cols = rd.headers()?.len();
        let n = ((cols.saturating_sub(1)) as f64).sqrt().round() as usize;
        if n == 0 || n * n + 1 != cols {
            return Err(Error::Config(format!("table CSV has {cols} columns, expected 1 + n^2")));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad number {s:?}: {e}")));
            times.push(T::lit(parse(&rec[0])?));
            let data = (1..cols).map(|k| parse(&rec[k]).map(T::lit)).collect::<Result<Vec<_>>>()?;
            values.push(Matrix::from_row_major(n, n, data));
        }
        if times.len() < 4 {
            return Err(Error::Config("table CSV needs at least four rows".into()));
        }
        let h = (times[times.len() - 1] - times[0]) / T::count(times.len() - 1);
        let n_minus = times
            .iter()
            .position(|&t| (t - t0).abs() <= T::lit(1e-9) * h)
            .ok_or_else(|| Error::Config(format!("base time {t0} is not a node of the table")))?;
        for (i, &t) in times.iter().enumerate() {
            let expect = t0 + h * (T::count(i) - T::count(n_minus));
            if (t - expect).abs() > T::lit(1e-9) * (T::one() + t.abs()) {
                return Err(Error::Config("table CSV grid is not uniform".into()));
            }
        }
        Ok(SpecialSolutionTable::from_parts(t0, delay, h, n_minus, values, T::nan(), 0))
    }
}

/// Result of the Driver property checks.
#[derive(Clone, Debug, PartialEq)]
pub struct PropertyReport<T> {
    /// `|Phi(t0, t0) - I|`.
    pub identity_error: T,
    pub identity_ok: bool,
    /// Smallest `|det Phi(t, t0)|` over the nodes.
    pub min_abs_det: T,
    pub nonsingular_ok: bool,
    /// `max_{t <= t0} |Phi(t, t0)| e^{(t - t0)/r}`.
    pub backward_constant: T,
    pub backward_ok: bool,
    /// Largest relative `|Phi(t2, t1) Phi(t1, t0) - Phi(t2, t0)|`.
    pub group_residual: T,
    pub group_ok: bool,
    /// `max |Phi(t, t0)| / e^{lambda_r |t - t0|} - 1`; nonpositive when the bound holds.
    pub growth_margin: T,
    pub growth_ok: bool,
}

impl<T: Real> PropertyReport<T> {
    pub fn all_ok(&self) -> bool {
        self.identity_ok && self.nonsingular_ok && self.backward_ok && self.group_ok && self.growth_ok
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PropertyTolerances<T> {
    pub group: T,
    pub growth: T,
}

impl<T: Real> Default for PropertyTolerances<T> {
    fn default() -> Self {
        PropertyTolerances { group: T::lit(1e-7), growth: T::lit(1e-6) }
    }
}

pub fn check_driver_properties<T: Real>(
    table: &SpecialSolutionTable<T>,
    constants: &DichotomyConstants<T>,
    tols: &PropertyTolerances<T>,
) -> PropertyReport<T> {
    let n = table.dim;
    let b = table.n_minus;
    let identity_error = table.values[b].sub(&Matrix::identity(n)).max_abs();
    let min_abs_det = table.values.iter().map(|m| m.determinant().abs()).fold(T::infinity(), T::min);

    let mut backward_constant = T::zero();
    let mut growth_ratio = T::zero();
    for (i, m) in table.values.iter().enumerate() {
        let dt = table.time(i) - table.t0;
        let norm = m.norm_inf();
        if i <= b {
            backward_constant = backward_constant.max(norm * (dt / table.delay).exp());
        }
        growth_ratio = growth_ratio.max(norm / (constants.lambda * dt.abs()).exp());
    }

    // group identity on a spread of node triples
    let nodes = table.values.len();
    let picks: Vec<usize> = (0..=8).map(|k| k * (nodes - 1) / 8).collect();
    let mut group_residual = T::zero();
    for &i0 in &picks {
        for &i1 in &picks {
            for &i2 in &picks {
                let (t0, t1, t2) = (table.time(i0), table.time(i1), table.time(i2));
                let lhs = match (table.phi_value(t2, t1), table.phi_value(t1, t0)) {
                    (Ok(a), Ok(b)) => a.mul(&b),
                    _ => {
                        group_residual = T::infinity();
                        continue;
                    }
                };
                let rhs = match table.phi_value(t2, t0) {
                    Ok(m) => m,
                    Err(_) => {
                        group_residual = T::infinity();
                        continue;
                    }
                };
                let scale = T::one().max(rhs.max_abs());
                group_residual = group_residual.max(lhs.sub(&rhs).max_abs() / scale);
            }
        }
    }

    let growth_margin = growth_ratio - T::one();
    PropertyReport {
        identity_error,
        identity_ok: identity_error == T::zero(),
        min_abs_det,
        nonsingular_ok: min_abs_det > T::zero() && min_abs_det.is_finite(),
        backward_constant,
        backward_ok: backward_constant.is_finite(),
        group_residual,
        group_ok: group_residual <= tols.group,
        growth_margin,
        growth_ok: growth_margin <= tols.growth,
    }
}

/// Residual of `d/dt Phi(t0, t) = -Phi(t0, t) [L(t, x^1_t), ..., L(t, x^n_t)] Phi(t0, t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeIdentityReport<T> {
    /// Largest relative residual with central differences of spacing `h`.
    pub residual_h: T,
    /// Same with spacing `2h`.
    pub residual_2h: T,
    /// `log2(residual_2h / residual_h)`.
    pub observed_order: T,
    /// Residual shrinks at least like `h^{1.5}` or sits at the rounding floor.
    pub ok: bool,
}

pub fn derivative_identity_residual<T: Real>(
    table: &SpecialSolutionTable<T>,
    kernel: &DelayKernel<T>,
) -> Result<DerivativeIdentityReport<T>> {
    let n = table.dim;
    let b = table.n_minus;
    let nodes = table.values.len();
    let flat: Vec<Vec<T>> = (0..n)
        .map(|j| table.values.iter().flat_map(|m| m.column(j)).collect())
        .collect();
    let lo = table.time(0);
    // interior nodes whose segment and both stencils stay inside the window
    let first = (table.delay / table.h).ceil().to_usize().unwrap_or(0) + 2;
    if nodes < first + 3 {
        return Err(Error::InvalidParameter("window too short for the derivative identity".into()));
    }
    let inverses: Vec<Option<Matrix<T>>> = table.values.iter().map(|m| m.inverse()).collect();
    let mut res = [T::zero(), T::zero()];
    for i in first..nodes - 2 {
        if i == b {
            continue;
        }
        let t = table.time(i);
        let mut lcols = Matrix::zeros(n, n);
        for (j, data) in flat.iter().enumerate() {
            let view = ColumnView { data, dim: n, nodes, lo, h: table.h, delay: table.delay, u: t };
            lcols.set_column(j, &kernel.apply(t, &view)?);
        }
        let inv = inverses[i].as_ref().ok_or(Error::IllConditioned { s: t.as_f64(), cond: f64::INFINITY })?;
        let rhs = inv.mul(&lcols).mul(inv).scaled(-T::one());
        let scale = T::one().max(rhs.max_abs()).max(inv.max_abs());
        for (slot, k) in [1usize, 2].iter().enumerate() {
            let (Some(a), Some(c)) = (&inverses[i + k], &inverses[i - k]) else {
                return Err(Error::IllConditioned { s: t.as_f64(), cond: f64::INFINITY });
            };
            let fd = a.sub(c).scaled(T::one() / (T::lit(2.0) * table.h * T::count(*k)));
            res[slot] = res[slot].max(fd.sub(&rhs).max_abs() / scale);
        }
    }
    let observed_order = (res[1] / res[0]).log2();
    let floor = T::lit(1e-10);
    let ok = res[0] <= floor || observed_order >= T::lit(1.5);
    Ok(DerivativeIdentityReport { residual_h: res[0], residual_2h: res[1], observed_order, ok })
}

/// Largest `|x_j(t) - Phi(t, t0) e_j|` between the forward solution started from
/// `theta -> Phi(t0 + theta, t0) e_j` and the table, over the forward window.
pub fn forward_cross_check<T: Real>(
    table: &SpecialSolutionTable<T>,
    kernel: &DelayKernel<T>,
    segment_nodes: usize,
) -> Result<T> {
    use crate::stepper::{integrate, StepperOptions};
    let n = table.dim;
    let (_, hi) = table.window();
    let mut worst = T::zero();
    for j in 0..n {
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        let phi = table.segment(table.t0, &e, segment_nodes)?;
        let sol = integrate(kernel, table.t0, &phi, hi, &StepperOptions::default())?;
        for i in table.n_minus..table.values.len() {
            let t = table.time(i);
            let x = sol.value(t)?;
            worst = worst.max(max_dist(&x, &table.values[i].column(j)));
        }
    }
    Ok(worst)
}

/// Largest `|Phi(t, t0)|` over the table, for scaling diagnostics.
pub fn table_max_norm<T: Real>(table: &SpecialSolutionTable<T>) -> T {
    table.values.iter().map(|m| max_norm(m.as_slice())).fold(T::zero(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulative_rule_integrates_cubics_exactly() {
        let h = 0.1f64;
        let n_minus = 5;
        let nodes = 12;
        let f: Vec<f64> = (0..nodes).map(|i| {
            let t = h * (i as f64 - n_minus as f64);
            4.0 * t * t * t + 3.0 * t * t - 2.0 * t + 1.0
        }).collect();
        let mut out = vec![0.0; nodes];
        cumulative(&f, 1, n_minus, h, &mut out);
        for i in 0..nodes {
            let t = h * (i as f64 - n_minus as f64);
            let exact = t.powi(4) + t * t * t - t * t + t;
            assert!((out[i] - exact).abs() < 1e-14, "i = {i}: {} vs {exact}", out[i]);
        }
    }

    #[test]
    fn lagrange_reproduces_cubics() {
        let data: Vec<f64> = (0..10).map(|i| (i as f64).powi(3) - i as f64).collect();
        let mut out = [0.0];
        for &p in &[0.3, 4.5, 8.7, 9.0, 2.0] {
            lagrange_into(&data, 1, 10, p, &mut out);
            assert!((out[0] - (p * p * p - p)).abs() < 1e-11);
        }
    }
}
