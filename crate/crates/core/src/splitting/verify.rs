//! Empirical check of the dichotomy estimates for a fixed splitting.
//!
//! Forward: `|T(t, s) Q(s) phi| <= K2 e^{beta (t - s)} |Q(s) phi|`.
//! Backward: `|Phi(sigma + ., s) v| <= e^{lambda (s - sigma)} |Phi(s + ., s) v|`
//! for `sigma <= s`. Commutation: `P(t) T(t, s) phi = T(t, s) P(s) phi`.

use super::{sample, SamplerConfig, Splitting, Q_FLOOR};
use crate::constants::DichotomyConstants;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::segment::{refined_sup, Segment, DEFAULT_NODES};
use crate::stepper::integrate;
use rayon::prelude::*;

#[derive(Clone, Debug)]
pub struct VerifyOptions<T> {
    pub samples: usize,
    pub seed: u64,
    /// Length of the checked interval, in delays, on both sides of `s`.
    pub span_delays: usize,
    pub grid_per_delay: usize,
    /// Relative slack on both bounds.
    pub slack: T,
    /// Offsets `t - s`, in delays, at which commutation is checked.
    pub commutation_offsets: Vec<usize>,
    pub commutation_nodes: usize,
    pub commutation_tol: T,
}

impl<T: Real> Default for VerifyOptions<T> {
    fn default() -> Self {
        VerifyOptions {
            samples: 20,
            seed: 0,
            span_delays: 10,
            grid_per_delay: 8,
            slack: T::lit(1e-6),
            commutation_offsets: vec![1, 3],
            commutation_nodes: DEFAULT_NODES,
            commutation_tol: T::lit(1e-6),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DichotomyCheckReport<T> {
    /// Largest `|T(t, s) q| / (K2 e^{beta (t - s)} |q|)` over samples and grid.
    pub forward_worst_ratio: T,
    /// Time offset `t - s` at which the forward ratio peaks.
    pub forward_worst_offset: T,
    pub forward_ok: bool,
    /// Samples with `|Q phi| <= 1e-6 |phi|`, left out of the forward check.
    pub forward_skipped: usize,
    /// Largest `|Phi(sigma + ., s) v| / (e^{lambda (s - sigma)} |Phi(s + ., s) v|)`.
    pub backward_worst_ratio: T,
    pub backward_ok: bool,
    /// Largest commutation defect relative to `|phi|`.
    pub commutation_residual: T,
    pub commutation_ok: bool,
    pub samples: usize,
}

impl<T: Real> DichotomyCheckReport<T> {
    pub fn all_ok(&self) -> bool {
        self.forward_ok && self.backward_ok && self.commutation_ok
    }

    pub fn summary(&self) -> String {
        format!(
            "samples = {}\nforward_skipped = {}\nforward_worst_ratio = {:.12e}\nforward_worst_offset = {:.12e}\nforward_ok = {}\n\
             backward_worst_ratio = {:.12e}\nbackward_ok = {}\ncommutation_residual = {:.12e}\ncommutation_ok = {}\n",
            self.samples,
            self.forward_skipped,
            self.forward_worst_ratio.as_f64(),
            self.forward_worst_offset.as_f64(),
            self.forward_ok,
            self.backward_worst_ratio.as_f64(),
            self.backward_ok,
            self.commutation_residual.as_f64(),
            self.commutation_ok,
        )
    }
}

/// Sample indices: a stride through the structured and random families.
fn sample_indices(count: usize) -> impl Iterator<Item = usize> {
    (0..count).map(|i| 7 * i)
}

struct SampleOutcome<T> {
    forward: (T, T),
    q_vanishes: bool,
    backward: T,
    commutation: T,
}

pub fn verify_dichotomy<T: Real>(
    sp: &Splitting<'_, T>,
    constants: &DichotomyConstants<T>,
    opts: &VerifyOptions<T>,
) -> Result<DichotomyCheckReport<T>> {
    let kernel = sp.kernel();
    let r = kernel.delay();
    let close = |a: T, b: T| (a - b).abs() <= T::lit(1e-12) * a.abs().max(b.abs());
    if !close(constants.r, r) || !close(constants.m, kernel.variation_bound()) {
        return Err(Error::InvalidParameter(format!(
            "constants computed for (M, r) = ({}, {}) but the kernel has ({}, {})",
            constants.m,
            constants.r,
            kernel.variation_bound(),
            r
        )));
    }
    if opts.grid_per_delay == 0 || opts.span_delays == 0 {
        return Err(Error::InvalidParameter("verification grid must be nonempty".into()));
    }
    let (lo, _) = sp.table().window();
    let s = sp.base_time();
    let back_end = s - T::count(opts.span_delays + 1) * r;
    if back_end < lo {
        return Err(Error::WidenWindow { needed: back_end.as_f64(), window_end: lo.as_f64() });
    }

    let n = sp.dim();
    let cfg = SamplerConfig { seed: opts.seed, samples: opts.samples, pairs: 0 };
    let grid = opts.span_delays * opts.grid_per_delay;
    let dt = r / T::count(opts.grid_per_delay);
    let unit_norm = |v: &[T], sigma: T| {
        refined_sup(|th, out| sp.special_into(sigma + th, v, out), n, -r, T::zero(), 64)
    };
    let backward = |v: &[T]| -> T {
        let base = unit_norm(v, s);
        if base <= T::zero() {
            return T::zero();
        }
        (0..=grid)
            .map(|k| {
                let back = dt * T::count(k);
                unit_norm(v, s - back) / ((constants.lambda * back).exp() * base)
            })
            .fold(T::zero(), T::max)
    };

    let outcomes = sample_indices(opts.samples)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|index| -> Result<SampleOutcome<T>> {
            let phi = sample(&cfg, index, sp)?.1;
            let proj = sp.project(&phi)?;

            // forward decay of Q phi
            let mut forward = (T::zero(), T::zero());
            let qn = proj.q.sup_norm();
            let phin = phi.sup_norm();
            // Q phi at the level of the limit tolerance is numerically zero
            let q_vanishes = qn <= T::lit(Q_FLOOR) * phin;
            if !q_vanishes {
                let end = s + T::count(opts.span_delays) * r;
                let sol = integrate(kernel, s, &proj.q, end, &sp.options().stepper)?;
                for k in 0..=grid {
                    let off = dt * T::count(k);
                    let t = if k == grid { end } else { s + off };
                    let bound = constants.k2 * (constants.beta * off).exp() * qn;
                    let ratio = sol.window_norm(t)? / bound;
                    if ratio > forward.0 {
                        forward = (ratio, off);
                    }
                }
            }

            // slow backward growth along P phi
            let back = backward(&proj.l);

            // commutation at later base times
            let mut commutation = T::zero();
            if !opts.commutation_offsets.is_empty() && phin > T::zero() {
                let last = *opts.commutation_offsets.iter().max().unwrap();
                let sol = integrate(kernel, s, &phi, s + T::count(last) * r, &sp.options().stepper)?;
                for &k in &opts.commutation_offsets {
                    let t = s + T::count(k) * r;
                    let xt = sol.evolve_segment(t, opts.commutation_nodes)?;
                    let lt = sp.limit_at(t, &xt)?.l;
                    // Phi(t + theta, t) l_t = Phi(t + theta, s) Phi(s, t) l_t
                    let w = sp.table().phi_value(s, t)?.mul_vec(&lt);
                    let d: Vec<T> = w.iter().zip(&proj.l).map(|(a, b)| *a - *b).collect();
                    let res = unit_norm(&d, t) / phin;
                    commutation = commutation.max(res);
                }
            }
            Ok(SampleOutcome { forward, q_vanishes, backward: back, commutation })
        })
        .collect::<Result<Vec<_>>>()?;

    // coordinate directions of the slow subspace
    let axes = (0..n)
        .map(|i| {
            let mut e = vec![T::zero(); n];
            e[i] = T::one();
            backward(&e)
        })
        .fold(T::zero(), T::max);

    let mut report = DichotomyCheckReport {
        forward_worst_ratio: T::zero(),
        forward_worst_offset: T::zero(),
        forward_ok: true,
        forward_skipped: outcomes.iter().filter(|o| o.q_vanishes).count(),
        backward_worst_ratio: axes,
        backward_ok: true,
        commutation_residual: T::zero(),
        commutation_ok: true,
        samples: outcomes.len(),
    };
    for o in &outcomes {
        if o.forward.0 > report.forward_worst_ratio {
            report.forward_worst_ratio = o.forward.0;
            report.forward_worst_offset = o.forward.1;
        }
        report.backward_worst_ratio = report.backward_worst_ratio.max(o.backward);
        report.commutation_residual = report.commutation_residual.max(o.commutation);
    }
    let limit = T::one() + opts.slack;
    report.forward_ok = report.forward_worst_ratio <= limit;
    report.backward_ok = report.backward_worst_ratio <= limit;
    report.commutation_ok = report.commutation_residual <= opts.commutation_tol;
    Ok(report)
}
