//! The dichotomy splitting `C = R(P(s)) + R(Q(s))`.
//!
//! `l(s, phi)` is the limit of `y(t) = Phi(s, t) x(t; s, phi)` as `t -> oo`,
//! `P(s) phi = Phi(s + ., s) l(s, phi)` and `Q(s) = I - P(s)`. The limit is
//! taken at a horizon where the a priori tail bound is below the tolerance
//! and confirmed by a dyadic Cauchy test.
//!
//! [`Splitting`] fixes a kernel and a base time, owns a special-solution
//! table wide enough for every evaluation, and precomputes `l(s, .)` on the
//! nodal basis of the segment grid so that sampled norms cost one dot product
//! per sample.

mod sampler;
mod verify;

pub use sampler::{monotone_slopes, sample, Family, SamplerConfig};
pub use verify::{verify_dichotomy, DichotomyCheckReport, VerifyOptions};

use crate::constants::{solve_lambda, DichotomyConstants};
use crate::error::{Error, Result};
use crate::linalg::max_dist;
use crate::model::DelayKernel;
use crate::scalar::Real;
use crate::segment::{refined_sup, HistorySegment, Segment, DEFAULT_NODES};
use crate::special::{build_special_solution, SpecialOptions, SpecialSolutionTable};
use crate::stepper::{integrate, StepperOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;

/// Time after `t0` beyond which `|y(oo) - y(t)| <= tol |phi|` is guaranteed by the
/// tail estimate with rate `ln(r lambda_r)/r`; never less than `10 r`.
pub fn certified_span<T: Real>(lambda: T, r: T, tol: T) -> T {
    let e2 = T::lit(std::f64::consts::E * std::f64::consts::E);
    let rl = r * lambda;
    let ln = rl.ln();
    let c = T::lit(2.0) * lambda * e2 * r / (rl * ln.abs());
    let span = r / ln * (tol / c).ln();
    span.max(T::lit(10.0) * r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitValue<T> {
    pub l: Vec<T>,
    /// Horizon at which the accepted value was read.
    pub horizon: T,
    pub doublings: usize,
    /// Last Cauchy increment, absolute.
    pub increment: T,
}

/// `l(t0, phi)` with default stepper options and at most 64 doublings.
pub fn limit_functional<T: Real>(
    kernel: &DelayKernel<T>,
    table: &SpecialSolutionTable<T>,
    t0: T,
    phi: &HistorySegment<T>,
    tol: T,
) -> Result<Vec<T>> {
    Ok(limit_functional_with(kernel, table, t0, phi, tol, &StepperOptions::default(), 64)?.l)
}

pub fn limit_functional_with<T: Real>(
    kernel: &DelayKernel<T>,
    table: &SpecialSolutionTable<T>,
    t0: T,
    phi: &HistorySegment<T>,
    tol: T,
    stepper: &StepperOptions<T>,
    max_doublings: usize,
) -> Result<LimitValue<T>> {
    let n = kernel.dim();
    if table.dim() != n || phi.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: if table.dim() != n { table.dim() } else { phi.dim() } });
    }
    if !(tol > T::zero()) {
        return Err(Error::InvalidParameter(format!("horizon tolerance must be positive, got {tol}")));
    }
    let r = kernel.delay();
    let (lambda, _) = solve_lambda(kernel.variation_bound(), r)?;
    let scale = phi.sup_norm();
    if scale == T::zero() {
        return Ok(LimitValue { l: vec![T::zero(); n], horizon: t0, doublings: 0, increment: T::zero() });
    }
    let (_, hi) = table.window();
    let span = certified_span(lambda, r, tol);
    let mut t1 = t0 + span;
    let mut t2 = t0 + span * T::lit(2.0);
    if t2 > hi {
        return Err(Error::WidenWindow { needed: t2.as_f64(), window_end: hi.as_f64() });
    }
    let mut sol = integrate(kernel, t0, phi, t2, stepper)?;
    let y = |sol: &crate::stepper::DenseSolution<T>, t: T| -> Result<Vec<T>> {
        let x = sol.value(t)?;
        Ok(table.phi_value(t0, t)?.mul_vec(&x))
    };
    let mut y1 = y(&sol, t1)?;
    let mut doublings = 0;
    loop {
        let y2 = y(&sol, t2)?;
        let increment = max_dist(&y1, &y2);
        if increment <= tol * scale {
            return Ok(LimitValue { l: y2, horizon: t2, doublings, increment });
        }
        doublings += 1;
        if doublings >= max_doublings {
            return Err(Error::NotConvergent { doublings, increment: increment.as_f64() });
        }
        t1 = t2;
        y1 = y2;
        t2 = t0 + (t1 - t0) * T::lit(2.0);
        if t2 > hi {
            return Err(Error::WidenWindow { needed: t2.as_f64(), window_end: hi.as_f64() });
        }
        sol = integrate(kernel, t0, phi, t2, stepper)?;
    }
}

/// `(P(t0) phi, Q(t0) phi)` sampled on the grid of `phi`.
pub fn project<T: Real>(
    kernel: &DelayKernel<T>,
    table: &SpecialSolutionTable<T>,
    t0: T,
    phi: &HistorySegment<T>,
    tol: T,
) -> Result<(HistorySegment<T>, HistorySegment<T>)> {
    let l = limit_functional(kernel, table, t0, phi, tol)?;
    let p = table.range_segment(t0, &l, phi.nodes())?;
    let q = phi.combine(T::one(), &p, -T::one())?;
    Ok((p, q))
}

#[derive(Clone, Debug)]
pub struct SplittingOptions<T> {
    /// Nodes of the segment grid on which `l` is tabulated.
    pub nodes: usize,
    /// Relative tolerance of the limit functional.
    pub horizon_tol: T,
    pub max_doublings: usize,
    pub table_steps_per_delay: usize,
    pub table_tol: T,
    /// Backward table extent, in delays.
    pub backward_delays: T,
    /// Latest base time after `s`, in delays, at which `l` will be evaluated.
    pub forward_delays: T,
    pub stepper: StepperOptions<T>,
}

impl<T: Real> Default for SplittingOptions<T> {
    fn default() -> Self {
        SplittingOptions {
            nodes: DEFAULT_NODES,
            horizon_tol: T::lit(1e-10),
            max_doublings: 64,
            table_steps_per_delay: 32,
            table_tol: T::lit(1e-13),
            backward_delays: T::lit(12.0),
            forward_delays: T::lit(3.0),
            // discretization drift of both sides of Phi(s, t) x(t) must stay below the limit tolerance
            stepper: StepperOptions { max_step_divisor: 16, ..StepperOptions::default() },
        }
    }
}

/// `l(s, .)` on the nodal basis: one vector per node value and per node slope.
#[derive(Clone, Debug)]
pub struct LimitBasis<T> {
    nodes: usize,
    dim: usize,
    values: Vec<Vec<T>>,
    slopes: Vec<Vec<T>>,
}

impl<T: Real> LimitBasis<T> {
    pub fn apply(&self, phi: &HistorySegment<T>) -> Vec<T> {
        let n = self.dim;
        let mut out = vec![T::zero(); n];
        for j in 0..self.nodes {
            let (v, d) = (phi.node_value(j), phi.node_slope(j));
            for k in 0..n {
                let (a, b) = (&self.values[j * n + k], &self.slopes[j * n + k]);
                for i in 0..n {
                    out[i] += v[k] * a[i] + d[k] * b[i];
                }
            }
        }
        out
    }
}

/// Kernel, base time and special-solution table for repeated splitting queries.
pub struct Splitting<'k, T> {
    kernel: &'k DelayKernel<T>,
    s: T,
    lambda: T,
    span: T,
    table: SpecialSolutionTable<T>,
    opts: SplittingOptions<T>,
    basis: LimitBasis<T>,
}

impl<'k, T: Real> Splitting<'k, T> {
    pub fn new(kernel: &'k DelayKernel<T>, s: T, opts: SplittingOptions<T>) -> Result<Self> {
        let r = kernel.delay();
        let (lambda, _) = solve_lambda(kernel.variation_bound(), r)?;
        let span = certified_span(lambda, r, opts.horizon_tol);
        let special = SpecialOptions {
            window_minus: opts.backward_delays * r,
            window_plus: opts.forward_delays * r + span * T::lit(4.0) + T::lit(2.0) * r,
            steps_per_delay: opts.table_steps_per_delay,
            tol: opts.table_tol,
            max_iterations: 400,
        };
        let table = build_special_solution(kernel, s, &special)?;
        let n = kernel.dim();
        let nodes = opts.nodes;
        let zeros = vec![vec![T::zero(); n]; nodes];
        let units: Vec<(bool, usize, usize)> =
            (0..nodes).flat_map(|j| (0..n).flat_map(move |k| [(false, j, k), (true, j, k)])).collect();
        let ls = units
            .par_iter()
            .map(|&(slope, j, k)| {
                let mut unit = zeros.clone();
                unit[j][k] = T::one();
                let seg = if slope {
                    HistorySegment::from_values_and_slopes(r, zeros.clone(), unit)?
                } else {
                    HistorySegment::from_values_and_slopes(r, unit, zeros.clone())?
                };
                limit_functional_with(kernel, &table, s, &seg, opts.horizon_tol, &opts.stepper, opts.max_doublings)
                    .map(|v| v.l)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(nodes * n);
        let mut slopes = Vec::with_capacity(nodes * n);
        for (u, l) in units.iter().zip(ls) {
            if u.0 {
                slopes.push(l);
            } else {
                values.push(l);
            }
        }
        let basis = LimitBasis { nodes, dim: n, values, slopes };
        Ok(Splitting { kernel, s, lambda, span, table, opts, basis })
    }

    pub fn kernel(&self) -> &DelayKernel<T> {
        self.kernel
    }

    pub fn base_time(&self) -> T {
        self.s
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// Certified horizon span used by the limit functional.
    pub fn span(&self) -> T {
        self.span
    }

    pub fn table(&self) -> &SpecialSolutionTable<T> {
        &self.table
    }

    pub fn options(&self) -> &SplittingOptions<T> {
        &self.opts
    }

    pub fn basis(&self) -> &LimitBasis<T> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn delay(&self) -> T {
        self.kernel.delay()
    }

    fn on_grid(&self, phi: &HistorySegment<T>) -> bool {
        phi.nodes() == self.opts.nodes && (phi.delay() - self.delay()).abs() <= T::lit(1e-12) * self.delay()
    }

    /// `l(s, phi)`; uses the nodal basis when `phi` lives on the splitting grid.
    pub fn limit(&self, phi: &HistorySegment<T>) -> Result<Vec<T>> {
        if self.on_grid(phi) {
            return Ok(self.basis.apply(phi));
        }
        Ok(self.limit_at(self.s, phi)?.l)
    }

    /// `l(t, phi)` by direct integration, for any base `t` covered by the table.
    pub fn limit_at(&self, t: T, phi: &HistorySegment<T>) -> Result<LimitValue<T>> {
        limit_functional_with(
            self.kernel,
            &self.table,
            t,
            phi,
            self.opts.horizon_tol,
            &self.opts.stepper,
            self.opts.max_doublings,
        )
    }

    /// `Phi(t, s) w` into `out`.
    pub fn special_into(&self, t: T, w: &[T], out: &mut [T]) {
        let n = self.dim();
        let mut buf = vec![T::zero(); n * n];
        self.table.apply_base_into(t, w, &mut buf, out);
    }

    /// `Phi_s(., s) v` on the splitting grid.
    pub fn range_segment(&self, v: &[T]) -> Result<HistorySegment<T>> {
        self.table.range_segment(self.s, v, self.opts.nodes)
    }

    /// `|P(s) phi|` given `l = l(s, phi)`.
    pub fn p_norm(&self, l: &[T]) -> T {
        let n = self.dim();
        refined_sup(|th, out| self.special_into(self.s + th, l, out), n, -self.delay(), T::zero(), 64)
    }

    /// `|Q(s) phi|` given `l = l(s, phi)`.
    pub fn q_norm(&self, phi: &HistorySegment<T>, l: &[T]) -> T {
        let n = self.dim();
        refined_sup(|th, out| self.q_eval(phi, l, th, out), n, -self.delay(), T::zero(), 64)
    }

    /// `(Q(s) phi)(theta)` given `l = l(s, phi)`.
    fn q_eval(&self, phi: &HistorySegment<T>, l: &[T], th: T, out: &mut [T]) {
        let mut p = vec![T::zero(); self.dim()];
        self.special_into(self.s + th, l, &mut p);
        phi.eval_into(th, out);
        for (o, pi) in out.iter_mut().zip(&p) {
            *o -= *pi;
        }
    }

    /// `(l, P phi, Q phi)` on the grid of `phi`.
    pub fn project(&self, phi: &HistorySegment<T>) -> Result<Projection<T>> {
        let l = self.limit(phi)?;
        let p = self.table.range_segment(self.s, &l, phi.nodes())?;
        let q = phi.combine(T::one(), &p, -T::one())?;
        Ok(Projection { l, p, q })
    }
}

#[derive(Clone, Debug)]
pub struct Projection<T> {
    pub l: Vec<T>,
    pub p: HistorySegment<T>,
    pub q: HistorySegment<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord<T> {
    pub index: usize,
    pub family: Family,
    pub l: Vec<T>,
    pub p_norm: T,
    pub q_norm: T,
}

#[derive(Clone, Debug)]
pub struct NormEstimate<T> {
    /// Largest sampled `|P phi|` over unit `phi`.
    pub norm_p_lower: T,
    pub norm_q_lower: T,
    pub argmax_p: usize,
    pub argmax_q: usize,
    pub records: Vec<SampleRecord<T>>,
}

/// Sampling lower bounds of `|P(s)|` and `|Q(s)|`.
pub fn estimate_norms<T: Real>(sp: &Splitting<'_, T>, cfg: &SamplerConfig) -> Result<NormEstimate<T>> {
    let records = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let (family, phi) = sample(cfg, i, sp)?;
            let l = sp.limit(&phi)?;
            let p_norm = sp.p_norm(&l);
            let q_norm = sp.q_norm(&phi, &l);
            Ok(SampleRecord { index: i, family, l, p_norm, q_norm })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut est = NormEstimate {
        norm_p_lower: T::zero(),
        norm_q_lower: T::zero(),
        argmax_p: 0,
        argmax_q: 0,
        records,
    };
    for r in &est.records {
        if r.p_norm > est.norm_p_lower {
            est.norm_p_lower = r.p_norm;
            est.argmax_p = r.index;
        }
        if r.q_norm > est.norm_q_lower {
            est.norm_q_lower = r.q_norm;
            est.argmax_q = r.index;
        }
    }
    Ok(est)
}

/// Relative size below which a projected part of a unit sample is numerically
/// zero: the limit is only resolved to `horizon_tol`, so the direction of such a
/// part is noise.
pub const Q_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplittingIndices<T> {
    /// `1/norm_P_lower`; an upper estimate of `dist(C+, C-)`.
    pub dist_plus: T,
    /// `1/norm_Q_lower`; an upper estimate of `dist(C-, C+)`.
    pub dist_minus: T,
    /// Smallest sampled angular distance; an upper estimate of `gamma(C+, C-)`.
    pub gamma_est: T,
    pub pairs: usize,
    /// Pairs dropped because an element was below `Q_FLOOR`.
    pub skipped: usize,
}

/// Separation indices and angular distance from sampled elements of the two ranges.
pub fn splitting_indices<T: Real>(
    sp: &Splitting<'_, T>,
    norms: &NormEstimate<T>,
    cfg: &SamplerConfig,
) -> Result<SplittingIndices<T>> {
    let n = sp.dim();
    let r = sp.delay();
    let side = ((cfg.pairs as f64 / 2.0).sqrt().ceil() as usize).max(1);

    // elements of R(P(s)) as vectors v with xi(theta) = Phi(s + theta, s) v
    let mut plus: Vec<Vec<T>> = Vec::with_capacity(side);
    for i in 0..n.min(side) {
        let mut e = vec![T::zero(); n];
        e[i] = T::one();
        plus.push(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX);
    while plus.len() < side {
        plus.push((0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect());
    }
    // elements of R(Q(s)) from the sampled segments
    let minus: Vec<(HistorySegment<T>, Vec<T>)> = norms
        .records
        .iter()
        .take(side)
        .map(|rec| Ok((sample(cfg, rec.index, sp)?.1, rec.l.clone())))
        .collect::<Result<_>>()?;
    let plus_norms: Vec<T> = plus.iter().map(|v| sp.p_norm(v)).collect();
    let minus_norms: Vec<T> = minus.iter().map(|(phi, l)| sp.q_norm(phi, l)).collect();

    // cross pairs (P phi, Q phi) of every sampled phi, and the product set plus x minus
    let floor = T::lit(Q_FLOOR);
    // (P element, its norm, phi, l(s, phi), norm of Q phi)
    type Job<T> = (Vec<T>, T, HistorySegment<T>, Vec<T>, T);
    let mut jobs: Vec<Job<T>> = Vec::new();
    let mut skipped = 0;
    for (a, &na) in plus.iter().zip(&plus_norms) {
        for ((phi, w), &nb) in minus.iter().zip(&minus_norms) {
            if na <= T::zero() || nb <= floor {
                skipped += 2;
                continue;
            }
            jobs.push((a.clone(), na, phi.clone(), w.clone(), nb));
        }
    }
    for rec in &norms.records {
        if rec.p_norm <= floor || rec.q_norm <= floor {
            skipped += 2;
            continue;
        }
        let phi = sample(cfg, rec.index, sp)?.1;
        jobs.push((rec.l.clone(), rec.p_norm, phi, rec.l.clone(), rec.q_norm));
    }
    let gamma_est = jobs
        .par_iter()
        .map(|(a, na, phi, w, nb)| {
            let mut best = T::infinity();
            for sign in [T::one(), -T::one()] {
                let d = refined_sup(
                    |th, out| {
                        let mut pa = vec![T::zero(); n];
                        sp.special_into(sp.s + th, a, &mut pa);
                        sp.q_eval(phi, w, th, out);
                        for (o, x) in out.iter_mut().zip(&pa) {
                            *o = *x / *na - sign * *o / *nb;
                        }
                    },
                    n,
                    -r,
                    T::zero(),
                    64,
                );
                best = best.min(d);
            }
            best
        })
        .reduce(|| T::infinity(), T::min);

    Ok(SplittingIndices {
        dist_plus: T::one() / norms.norm_p_lower,
        dist_minus: T::one() / norms.norm_q_lower,
        gamma_est,
        pairs: 2 * jobs.len(),
        skipped,
    })
}

/// Outcome of the check of sampled estimates against a floor `delta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaCheck<T> {
    pub delta: T,
    pub min_estimate: T,
    pub ok: bool,
}

pub fn delta_check<T: Real>(indices: &SplittingIndices<T>, delta: T, tol: T) -> DeltaCheck<T> {
    let min_estimate = indices.dist_plus.min(indices.dist_minus).min(indices.gamma_est);
    DeltaCheck { delta, min_estimate, ok: min_estimate >= delta - tol }
}

#[derive(Clone, Debug)]
pub struct SplittingReport<T> {
    pub s: T,
    pub r: T,
    /// Certified horizon span of the limit functional.
    pub horizon: T,
    pub samples: Vec<SampleRecord<T>>,
    pub norm_p_lower: T,
    pub norm_q_lower: T,
    pub indices: SplittingIndices<T>,
    pub proj_bound: T,
    /// Both sampled norms at most `proj_bound`.
    pub norms_within_bound: bool,
    /// `gamma_est >= 1/proj_bound - 1e-9`.
    pub gamma_consistent: bool,
    /// Least-squares decay rate of `|T(t, s) Q phi|` for the sample with the largest `|Q phi|`.
    pub forward_exponent: T,
    /// Least-squares growth rate of `|Phi(sigma, s)|` as `sigma` decreases.
    pub backward_exponent: T,
    pub delta: DeltaCheck<T>,
}

impl<T: Real> SplittingReport<T> {
    pub fn ok(&self) -> bool {
        self.norms_within_bound
            && self.gamma_consistent
            && self.delta.ok
            && self.norm_p_lower >= T::one() - T::lit(1e-9)
            && self.norm_q_lower >= T::one() - T::lit(1e-9)
    }

    pub fn summary(&self) -> String {
        let rows: [(&str, f64); 13] = [
            ("s", self.s.as_f64()),
            ("r", self.r.as_f64()),
            ("horizon", self.horizon.as_f64()),
            ("norm_P_lower", self.norm_p_lower.as_f64()),
            ("norm_Q_lower", self.norm_q_lower.as_f64()),
            ("dist_plus_est", self.indices.dist_plus.as_f64()),
            ("dist_minus_est", self.indices.dist_minus.as_f64()),
            ("gamma_est", self.indices.gamma_est.as_f64()),
            ("proj_bound", self.proj_bound.as_f64()),
            ("delta", self.delta.delta.as_f64()),
            ("min_estimate", self.delta.min_estimate.as_f64()),
            ("forward_exponent", self.forward_exponent.as_f64()),
            ("backward_exponent", self.backward_exponent.as_f64()),
        ];
        let mut out: String = rows.iter().map(|(k, v)| format!("{k} = {v:.12e}\n")).collect();
        out.push_str(&format!("pairs = {}\nskipped = {}\n", self.indices.pairs, self.indices.skipped));
        out.push_str(&format!("norms_within_bound = {}\n", self.norms_within_bound));
        out.push_str(&format!("gamma_consistent = {}\n", self.gamma_consistent));
        out.push_str(&format!("delta_ok = {}\n", self.delta.ok));
        out
    }

    /// One row per sample: `index, family, P_norm, Q_norm, l_1..l_n`.
    pub fn write_samples_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let n = self.samples.first().map_or(0, |s| s.l.len());
        let mut header: Vec<String> = ["index", "family", "P_norm", "Q_norm"].iter().map(|s| s.to_string()).collect();
        header.extend((1..=n).map(|i| format!("l_{i}")));
        wr.write_record(&header)?;
        for s in &self.samples {
            let mut rec = vec![s.index.to_string(), s.family.name().to_string()];
            rec.push(format!("{:e}", s.p_norm.as_f64()));
            rec.push(format!("{:e}", s.q_norm.as_f64()));
            rec.extend(s.l.iter().map(|v| format!("{:e}", v.as_f64())));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn slope_fit<T: Real>(xs: &[T], ys: &[T]) -> T {
    let m = T::count(xs.len());
    let mx = xs.iter().copied().sum::<T>() / m;
    let my = ys.iter().copied().sum::<T>() / m;
    let sxy: T = xs.iter().zip(ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let sxx: T = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Runs the norm sampler, the index estimates and the exponent fits, and checks
/// them against `proj_bound` and the floor `delta`.
pub fn build_report<T: Real>(
    sp: &Splitting<'_, T>,
    constants: &DichotomyConstants<T>,
    cfg: &SamplerConfig,
    delta: T,
) -> Result<SplittingReport<T>> {
    let norms = estimate_norms(sp, cfg)?;
    let indices = splitting_indices(sp, &norms, cfg)?;
    let r = sp.delay();

    // forward decay of the sample with the largest Q component
    let phi = sample(cfg, norms.argmax_q, sp)?.1;
    let q = sp.project(&phi)?.q;
    let sol = integrate(sp.kernel, sp.s, &q, sp.s + T::lit(10.0) * r, &sp.opts.stepper)?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for k in 40..=80 {
        let t = sp.s + r * T::count(k) / T::lit(8.0);
        let v = sol.window_norm(t)?;
        if v > T::zero() {
            xs.push(t - sp.s);
            ys.push(v.ln());
        }
    }
    let forward_exponent = if xs.len() >= 2 { slope_fit(&xs, &ys) } else { T::neg_infinity() };

    let (lo, _) = sp.table.window();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let back = (sp.s - lo) / r - T::one();
    let steps = (back * T::lit(8.0)).floor().to_usize().unwrap_or(0);
    for k in 0..=steps {
        let sigma = sp.s - r * T::count(k) / T::lit(8.0);
        let m = sp.table.phi_base(sigma)?;
        let v = m.norm_inf();
        if v > T::zero() {
            xs.push(sp.s - sigma);
            ys.push(v.ln());
        }
    }
    let backward_exponent = if xs.len() >= 2 { slope_fit(&xs, &ys) } else { T::zero() };

    let pb = constants.proj_bound;
    Ok(SplittingReport {
        s: sp.s,
        r,
        horizon: sp.span,
        norm_p_lower: norms.norm_p_lower,
        norm_q_lower: norms.norm_q_lower,
        norms_within_bound: norms.norm_p_lower <= pb && norms.norm_q_lower <= pb,
        gamma_consistent: indices.gamma_est >= T::one() / pb - T::lit(1e-9),
        delta: delta_check(&indices, delta, T::lit(1e-9)),
        indices,
        proj_bound: pb,
        forward_exponent,
        backward_exponent,
        samples: norms.records,
    })
}
