//! Method-of-steps integration of `x'(t) = L(t, x_t)` with dense output.
//!
//! Each step is a classical fourth-order Runge-Kutta step whose stages read
//! the delayed state from the trajectory built so far. Lags shorter than the
//! step land inside the step being computed; those reads use the cubic
//! Hermite interpolant of the step itself and the step is iterated until its
//! end state and end slope stop changing. The lag-zero read at a stage
//! returns the stage value, so a pure ODE reduces to plain RK4.
//!
//! Step boundaries are placed on the first- and second-generation breaking
//! points `t0 + tau_i` and `t0 + tau_i + tau_j`, where the solution loses
//! smoothness, so the scheme keeps its order for non-compatible data.

use crate::error::{Error, Result};
use crate::linalg::max_norm;
use crate::model::DelayKernel;
use crate::scalar::Real;
use crate::segment::{hermite, refined_sup, HistorySegment, Segment};
use std::cell::Cell;
use std::io::Write;

#[derive(Clone, Copy, Debug)]
pub struct StepperOptions<T> {
    /// Maximum step is `r / max_step_divisor`; must be at least 8.
    pub max_step_divisor: usize,
    /// Convergence tolerance of the in-step iteration.
    pub iteration_tol: T,
    pub max_iterations: usize,
    /// Steps per cell of the initial segment's grid during the first two
    /// delay intervals, where the solution inherits the roughness of `phi`.
    pub history_substeps: usize,
}

impl<T: Real> Default for StepperOptions<T> {
    fn default() -> Self {
        StepperOptions { max_step_divisor: 8, iteration_tol: T::lit(1e-12), max_iterations: 60, history_substeps: 2 }
    }
}

/// Solution of an initial-value problem on `[t0 - r, t_end]`.
#[derive(Clone, Debug)]
pub struct DenseSolution<T> {
    t0: T,
    delay: T,
    dim: usize,
    initial: HistorySegment<T>,
    times: Vec<T>,
    states: Vec<T>,
    derivs: Vec<T>,
}

struct History<'a, T> {
    t0: T,
    dim: usize,
    initial: &'a HistorySegment<T>,
    times: &'a [T],
    states: &'a [T],
    derivs: &'a [T],
}

impl<T: Real> History<'_, T> {
    /// Smooth pieces of the history on `[lo, hi]`: initial cells plus solution steps.
    fn pieces(&self, lo: T, hi: T) -> usize {
        let mut count = 0;
        if lo < self.t0 {
            let span = (hi.min(self.t0) - lo) / self.initial.step();
            count += span.ceil().to_usize().unwrap_or(1);
        }
        if hi > self.t0 && self.times.len() > 1 {
            let from = lo.max(self.t0);
            let a = self.times.partition_point(|&p| p <= from);
            let b = self.times.partition_point(|&p| p < hi);
            count += b.saturating_sub(a) + 1;
        }
        count.max(1)
    }

    fn eval_into(&self, w: T, out: &mut [T]) {
        if w <= self.t0 || self.times.len() < 2 {
            self.initial.eval_into((w - self.t0).min(T::zero()), out);
            return;
        }
        let last = self.times.len() - 1;
        let k = match self.times.binary_search_by(|p| p.partial_cmp(&w).unwrap()) {
            Ok(i) => {
                out.copy_from_slice(&self.states[i * self.dim..(i + 1) * self.dim]);
                return;
            }
            Err(i) => (i.max(1) - 1).min(last - 1),
        };
        let d = self.dim;
        let (a, b) = (self.times[k], self.times[k + 1]);
        let h = b - a;
        let s = ((w - a) / h).max(T::zero()).min(T::one());
        hermite(
            s,
            h,
            &self.states[k * d..(k + 1) * d],
            &self.derivs[k * d..(k + 1) * d],
            &self.states[(k + 1) * d..(k + 2) * d],
            &self.derivs[(k + 1) * d..(k + 2) * d],
            out,
        );
    }

    fn deriv_into(&self, w: T, out: &mut [T]) {
        let d = self.dim;
        if w < self.t0 {
            deriv_of_segment(self.initial, w - self.t0, out);
            return;
        }
        let last = self.times.len() - 1;
        let k = match self.times.binary_search_by(|p| p.partial_cmp(&w).unwrap()) {
            Ok(i) => {
                out.copy_from_slice(&self.derivs[i * d..(i + 1) * d]);
                return;
            }
            Err(i) => (i.max(1) - 1).min(last - 1),
        };
        let (a, b) = (self.times[k], self.times[k + 1]);
        hermite_deriv(
            (w - a) / (b - a),
            b - a,
            &self.states[k * d..(k + 1) * d],
            &self.derivs[k * d..(k + 1) * d],
            &self.states[(k + 1) * d..(k + 2) * d],
            &self.derivs[(k + 1) * d..(k + 2) * d],
            out,
        );
    }
}

fn hermite_deriv<T: Real>(s: T, h: T, y0: &[T], d0: &[T], y1: &[T], d1: &[T], out: &mut [T]) {
    let (two, three, four, six) = (T::lit(2.0), T::lit(3.0), T::lit(4.0), T::lit(6.0));
    let s2 = s * s;
    let g00 = (six * s2 - six * s) / h;
    let g10 = three * s2 - four * s + T::one();
    let g11 = three * s2 - two * s;
    for i in 0..out.len() {
        out[i] = g00 * (y0[i] - y1[i]) + g10 * d0[i] + g11 * d1[i];
    }
}

fn deriv_of_segment<T: Real>(seg: &HistorySegment<T>, theta: T, out: &mut [T]) {
    let n = seg.nodes();
    let h = seg.step();
    let pos = ((theta + seg.delay()) / h).max(T::zero());
    let j = pos.floor().to_usize().unwrap_or(0).min(n - 2);
    let s = (pos - T::count(j)).min(T::one());
    hermite_deriv(s, h, seg.node_value(j), seg.node_slope(j), seg.node_value(j + 1), seg.node_slope(j + 1), out);
}

/// The segment `x_{t + c h}` seen by a Runge-Kutta stage of the step `[t, t + h]`.
struct StageView<'a, T> {
    hist: &'a History<'a, T>,
    delay: T,
    t: T,
    h: T,
    stage_time: T,
    stage_value: &'a [T],
    x0: &'a [T],
    f0: &'a [T],
    x1: &'a [T],
    f1: &'a [T],
    touched: &'a Cell<bool>,
}

impl<T: Real> Segment<T> for StageView<'_, T> {
    fn dim(&self) -> usize {
        self.hist.dim
    }

    fn cells(&self) -> usize {
        let lo = self.stage_time - self.delay;
        let pieces = self.hist.pieces(lo, self.stage_time.min(self.t));
        if self.stage_time > self.t { pieces + 1 } else { pieces }
    }

    fn delay(&self) -> T {
        self.delay
    }

    fn eval_into(&self, theta: T, out: &mut [T]) {
        if theta == T::zero() {
            out.copy_from_slice(self.stage_value);
            return;
        }
        let w = self.stage_time + theta;
        if w <= self.t {
            self.hist.eval_into(w, out);
        } else {
            self.touched.set(true);
            let s = ((w - self.t) / self.h).min(T::one());
            hermite(s, self.h, self.x0, self.f0, self.x1, self.f1, out);
        }
    }
}

impl<T: Real> DenseSolution<T> {
    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn t_end(&self) -> T {
        *self.times.last().unwrap()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delay(&self) -> T {
        self.delay
    }

    pub fn initial(&self) -> &HistorySegment<T> {
        &self.initial
    }

    /// Step boundaries, starting at `t0`.
    pub fn step_times(&self) -> &[T] {
        &self.times
    }

    pub fn max_step(&self) -> T {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(T::zero(), T::max)
    }

    fn history(&self) -> History<'_, T> {
        History {
            t0: self.t0,
            dim: self.dim,
            initial: &self.initial,
            times: &self.times,
            states: &self.states,
            derivs: &self.derivs,
        }
    }

    fn check_time(&self, t: T) -> Result<()> {
        let lo = self.t0 - self.delay;
        let hi = self.t_end();
        let slack = T::lit(1e-12) * (T::one() + hi.abs());
        if t < lo - slack || t > hi + slack || t.is_nan() {
            return Err(Error::OutsideWindow { t: t.as_f64(), lo: lo.as_f64(), hi: hi.as_f64() });
        }
        Ok(())
    }

    /// `x(t)` for `t` in `[t0 - r, t_end]`.
    pub fn value(&self, t: T) -> Result<Vec<T>> {
        self.check_time(t)?;
        let mut out = vec![T::zero(); self.dim];
        self.history().eval_into(t.min(self.t_end()), &mut out);
        Ok(out)
    }

    pub fn value_into(&self, t: T, out: &mut [T]) {
        self.history().eval_into(t.min(self.t_end()), out);
    }

    /// `x'(t)`; the right derivative at `t0`.
    pub fn derivative(&self, t: T) -> Result<Vec<T>> {
        self.check_time(t)?;
        let mut out = vec![T::zero(); self.dim];
        self.history().deriv_into(t.min(self.t_end()), &mut out);
        Ok(out)
    }

    /// The state segment `x_t` read directly from the dense output.
    pub fn segment_view(&self, t: T) -> Result<SolutionSegment<'_, T>> {
        self.check_time(t)?;
        if t < self.t0 {
            return Err(Error::OutsideWindow { t: t.as_f64(), lo: self.t0.as_f64(), hi: self.t_end().as_f64() });
        }
        Ok(SolutionSegment { sol: self, t })
    }

    /// Sup norm of `x_t` over `[t - r, t]`, evaluated on the dense output.
    pub fn window_norm(&self, t: T) -> Result<T> {
        Ok(self.segment_view(t)?.sup_norm())
    }

    /// `T(t, t0) phi` sampled onto a segment grid with `nodes` points.
    pub fn evolve_segment(&self, t: T, nodes: usize) -> Result<HistorySegment<T>> {
        self.segment_view(t)?;
        if t == self.t0 && nodes == self.initial.nodes() {
            return Ok(self.initial.clone());
        }
        let hist = self.history();
        let h = self.delay / T::count(nodes - 1);
        let mut values = Vec::with_capacity(nodes);
        let mut slopes = Vec::with_capacity(nodes);
        for j in 0..nodes {
            let w = if j + 1 == nodes { t } else { t - self.delay + h * T::count(j) };
            let mut v = vec![T::zero(); self.dim];
            hist.eval_into(w, &mut v);
            let mut d = vec![T::zero(); self.dim];
            if w == self.t0 && j == 0 {
                hist.deriv_into(w, &mut d);
            } else if w == self.t0 && j + 1 < nodes {
                // kink of the solution inside the segment: average the one-sided slopes
                let mut left = vec![T::zero(); self.dim];
                deriv_of_segment(&self.initial, T::zero(), &mut left);
                hist.deriv_into(w, &mut d);
                for (di, li) in d.iter_mut().zip(&left) {
                    *di = (*di + *li) * T::lit(0.5);
                }
            } else if w == self.t0 {
                deriv_of_segment(&self.initial, T::zero(), &mut d);
            } else {
                hist.deriv_into(w, &mut d);
            }
            values.push(v);
            slopes.push(d);
        }
        HistorySegment::from_values_and_slopes(self.delay, values, slopes)
    }

    /// Writes `t, x_1, ..., x_n` at the initial nodes and every step boundary.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x_{i}")));
        wr.write_record(&header)?;
        let mut row = |t: T, x: &[T]| -> Result<()> {
            let mut rec = vec![t.as_f64().to_string()];
            rec.extend(x.iter().map(|v| v.as_f64().to_string()));
            wr.write_record(&rec)?;
            Ok(())
        };
        for j in 0..self.initial.nodes() - 1 {
            row(self.t0 + self.initial.theta(j), self.initial.node_value(j))?;
        }
        for (i, &t) in self.times.iter().enumerate() {
            row(t, &self.states[i * self.dim..(i + 1) * self.dim])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Borrowed view of `x_t` as a [`Segment`].
pub struct SolutionSegment<'a, T> {
    sol: &'a DenseSolution<T>,
    t: T,
}

impl<T: Real> Segment<T> for SolutionSegment<'_, T> {
    fn dim(&self) -> usize {
        self.sol.dim
    }

    fn cells(&self) -> usize {
        self.sol.history().pieces(self.t - self.sol.delay, self.t)
    }

    fn delay(&self) -> T {
        self.sol.delay
    }

    fn eval_into(&self, theta: T, out: &mut [T]) {
        self.sol.history().eval_into(self.t + theta, out);
    }

    fn sup_norm(&self) -> T {
        let r = self.sol.delay;
        refined_sup(|th, out| self.eval_into(th, out), self.sol.dim, -r, T::zero(), 64)
    }
}

/// Sup norm of a segment over `[-r, 0]`.
pub fn segment_norm<T: Real, S: Segment<T> + ?Sized>(seg: &S) -> T {
    seg.sup_norm()
}

/// Times where the right-hand side loses smoothness: first and second
/// lag crossings of `t0`, and the grid nodes of `phi` seen through each lag.
fn breakpoints<T: Real>(kernel: &DelayKernel<T>, phi: &HistorySegment<T>, t0: T, t_end: T) -> Vec<T> {
    let lags = kernel.positive_lags();
    let mut pts: Vec<T> = Vec::new();
    for (i, &a) in lags.iter().enumerate() {
        for j in 0..phi.nodes() {
            let th = phi.theta(j);
            if th > -a {
                pts.push(t0 + a + th);
            }
        }
        pts.push(t0 + a);
        for &b in &lags[i..] {
            pts.push(t0 + a + b);
        }
    }
    pts.retain(|&p| p > t0 && p < t_end);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tiny = T::lit(1e-12) * kernel.delay();
    pts.dedup_by(|a, b| (*a - *b).abs() <= tiny);
    pts
}

/// Solves `x'(t) = L(t, x_t)` on `[t0, t_end]` with `x_{t0} = phi`.
pub fn integrate<T: Real>(
    kernel: &DelayKernel<T>,
    t0: T,
    phi: &HistorySegment<T>,
    t_end: T,
    opts: &StepperOptions<T>,
) -> Result<DenseSolution<T>> {
    let n = kernel.dim();
    if phi.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: phi.dim() });
    }
    if !(t_end >= t0) {
        return Err(Error::InvalidParameter(format!("end time {t_end} precedes start time {t0}")));
    }
    if (phi.delay() - kernel.delay()).abs() > T::lit(1e-12) * kernel.delay() {
        return Err(Error::InvalidParameter(format!(
            "initial segment covers [-{}, 0] but the kernel delay is {}",
            phi.delay(),
            kernel.delay()
        )));
    }
    if opts.max_step_divisor < 8 {
        return Err(Error::InvalidParameter("maximum step must not exceed r/8".into()));
    }
    let r = kernel.delay();
    let h_max = r / T::count(opts.max_step_divisor);
    let h_min = T::lit(1e-13) * (T::one() + t0.abs().max(t_end.abs()));
    let h_rough = phi.step() / T::count(opts.history_substeps.max(1));
    let rough_end = t0 + T::lit(2.0) * r;

    let mut times = vec![t0];
    let mut states: Vec<T> = phi.head().to_vec();
    let f0 = {
        let hist = History { t0, dim: n, initial: phi, times: &[], states: &[], derivs: &[] };
        let view = SolutionlessView { hist: &hist, delay: r, t: t0 };
        kernel.apply(t0, &view)?
    };
    let mut derivs: Vec<T> = f0;
    let bps = breakpoints(kernel, phi, t0, t_end);
    let mut next_bp = 0;

    let mut t = t0;
    while t < t_end {
        while next_bp < bps.len() && bps[next_bp] <= t + h_min {
            next_bp += 1;
        }
        let target = if next_bp < bps.len() { bps[next_bp].min(t_end) } else { t_end };
        let cap = if t < rough_end { h_max.min(h_rough) } else { h_max };
        let mut h = (target - t).min(cap);
        if target - t <= cap * T::lit(1.0 + 1e-9) {
            h = target - t;
        }
        if h <= h_min {
            if t_end - t <= h_min {
                break;
            }
            return Err(Error::StepUnderflow { t: t.as_f64() });
        }
        let k = times.len() - 1;
        let x0 = states[k * n..].to_vec();
        let f0 = derivs[k * n..].to_vec();
        let (x1, f1) = {
            let hist = History { t0, dim: n, initial: phi, times: &times, states: &states, derivs: &derivs };
            rk4_step(kernel, &hist, r, t, h, &x0, &f0, opts)?
        };
        let t_next = if h == target - t { target } else { t + h };
        if x1.iter().chain(&f1).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t: t_next.as_f64() });
        }
        times.push(t_next);
        states.extend_from_slice(&x1);
        derivs.extend_from_slice(&f1);
        t = t_next;
    }

    Ok(DenseSolution { t0, delay: r, dim: n, initial: phi.clone(), times, states, derivs })
}

/// History-only view at a time where no step is in progress.
struct SolutionlessView<'a, T> {
    hist: &'a History<'a, T>,
    delay: T,
    t: T,
}

impl<T: Real> Segment<T> for SolutionlessView<'_, T> {
    fn dim(&self) -> usize {
        self.hist.dim
    }

    fn cells(&self) -> usize {
        self.hist.pieces(self.t - self.delay, self.t)
    }

    fn delay(&self) -> T {
        self.delay
    }
    fn eval_into(&self, theta: T, out: &mut [T]) {
        self.hist.eval_into(self.t + theta, out)
    }
}

#[allow(clippy::too_many_arguments)]
fn rk4_step<T: Real>(
    kernel: &DelayKernel<T>,
    hist: &History<'_, T>,
    r: T,
    t: T,
    h: T,
    x0: &[T],
    f0: &[T],
    opts: &StepperOptions<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    let n = x0.len();
    let half = T::lit(0.5);
    let sixth = h / T::lit(6.0);
    let mut x1: Vec<T> = x0.iter().zip(f0).map(|(&x, &f)| x + h * f).collect();
    let mut f1 = f0.to_vec();
    let touched = Cell::new(false);

    for _ in 0..opts.max_iterations {
        touched.set(false);
        let eval = |c: T, y: &[T], x1: &[T], f1: &[T]| -> Result<Vec<T>> {
            let view = StageView {
                hist,
                delay: r,
                t,
                h,
                stage_time: t + c * h,
                stage_value: y,
                x0,
                f0,
                x1,
                f1,
                touched: &touched,
            };
            kernel.apply(t + c * h, &view)
        };
        let k1 = f0;
        let y2: Vec<T> = (0..n).map(|i| x0[i] + half * h * k1[i]).collect();
        let k2 = eval(half, &y2, &x1, &f1)?;
        let y3: Vec<T> = (0..n).map(|i| x0[i] + half * h * k2[i]).collect();
        let k3 = eval(half, &y3, &x1, &f1)?;
        let y4: Vec<T> = (0..n).map(|i| x0[i] + h * k3[i]).collect();
        let k4 = eval(T::one(), &y4, &x1, &f1)?;
        let x_new: Vec<T> =
            (0..n).map(|i| x0[i] + sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i])).collect();
        let f_new = eval(T::one(), &x_new, &x_new, &f1)?;

        let change = x_new
            .iter()
            .zip(&x1)
            .map(|(&a, &b)| (a - b).abs())
            .chain(f_new.iter().zip(&f1).map(|(&a, &b)| h * (a - b).abs()))
            .fold(T::zero(), T::max);
        let scale = T::one() + max_norm(&x_new);
        x1 = x_new;
        f1 = f_new;
        if !touched.get() || change <= opts.iteration_tol * scale {
            return Ok((x1, f1));
        }
    }
    Err(Error::StepUnderflow { t: t.as_f64() })
}
