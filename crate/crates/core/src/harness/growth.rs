//! A priori growth bound `|x_t| <= e^{M (t - t0)} |phi|`.

use crate::error::Result;
use crate::model::DelayKernel;
use crate::scalar::Real;
use crate::segment::{HistorySegment, Segment};
use crate::stepper::{integrate, StepperOptions};

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthReport<T> {
    pub t0: T,
    pub t_end: T,
    /// Largest `|x_t| / (e^{M (t - t0)} |phi|)` on the check grid.
    pub worst_ratio: T,
    pub worst_at: T,
    /// Smallest ratio on the grid; equals one for a saturating equation.
    pub min_ratio: T,
    pub slack: T,
    pub ok: bool,
}

/// Integrates from `phi` at `t0` and checks the growth bound on the grid
/// `t0 + k r / 8`, with relative slack `slack`.
pub fn check_growth<T: Real>(
    kernel: &DelayKernel<T>,
    t0: T,
    phi: &HistorySegment<T>,
    t_end: T,
    slack: T,
    opts: &StepperOptions<T>,
) -> Result<GrowthReport<T>> {
    let sol = integrate(kernel, t0, phi, t_end, opts)?;
    let m = kernel.variation_bound();
    let norm = phi.sup_norm();
    let dt = kernel.delay() / T::lit(8.0);
    let steps = ((t_end - t0) / dt).floor().to_usize().unwrap_or(0);
    let mut rep = GrowthReport {
        t0,
        t_end,
        worst_ratio: T::zero(),
        worst_at: t0,
        min_ratio: T::infinity(),
        slack,
        ok: true,
    };
    if norm == T::zero() {
        rep.min_ratio = T::zero();
        return Ok(rep);
    }
    let mut times: Vec<T> = (0..=steps).map(|k| t0 + dt * T::count(k)).collect();
    if times.last().is_some_and(|&t| t < t_end) {
        times.push(t_end);
    }
    for t in times {
        let ratio = sol.window_norm(t)? / ((m * (t - t0)).exp() * norm);
        if ratio > rep.worst_ratio {
            rep.worst_ratio = ratio;
            rep.worst_at = t;
        }
        rep.min_ratio = rep.min_ratio.min(ratio);
    }
    rep.ok = rep.worst_ratio <= T::one() + slack;
    Ok(rep)
}
