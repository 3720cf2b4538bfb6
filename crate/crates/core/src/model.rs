//! Delay kernels: the linear functional `L(t, phi)` and the standing
//! hypothesis on its variation bound `M` and delay `r`.
//!
//! A kernel is a finite sum of discrete lags with (possibly time-dependent)
//! matrix coefficients plus an optional distributed density,
//!
//! ```text
//! L(t, phi) = sum_k A_k(t) phi(-tau_k) + int_{-r}^{0} B(t, theta) phi(theta) dtheta
//! ```
//!
//! Time dependence is a scalar profile multiplying a constant matrix.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::quadrature::{integrate_cells, QuadratureOptions};
use crate::scalar::Real;
use crate::segment::Segment;

/// Scalar time profile `s(t)` multiplying a coefficient matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum TimeProfile<T> {
    Const,
    /// `a + b sin(omega t + phase)`
    Sin { a: T, b: T, omega: T, phase: T },
    /// `a + b exp(-rate max(t, 0))`; constant `a + b` for `t <= 0` so the
    /// profile stays bounded on the whole real line.
    ExpDecay { a: T, b: T, rate: T },
}

impl<T: Real> TimeProfile<T> {
    pub fn eval(&self, t: T) -> T {
        match *self {
            TimeProfile::Const => T::one(),
            TimeProfile::Sin { a, b, omega, phase } => a + b * (omega * t + phase).sin(),
            TimeProfile::ExpDecay { a, b, rate } => a + b * (-rate * t.max(T::zero())).exp(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            TimeProfile::Const => true,
            TimeProfile::Sin { b, omega, .. } => b == T::zero() || omega == T::zero(),
            TimeProfile::ExpDecay { b, rate, .. } => b == T::zero() || rate == T::zero(),
        }
    }

    fn cast<U: Real>(&self) -> TimeProfile<U> {
        match *self {
            TimeProfile::Const => TimeProfile::Const,
            TimeProfile::Sin { a, b, omega, phase } => TimeProfile::Sin {
                a: U::lit(a.as_f64()),
                b: U::lit(b.as_f64()),
                omega: U::lit(omega.as_f64()),
                phase: U::lit(phase.as_f64()),
            },
            TimeProfile::ExpDecay { a, b, rate } => {
                TimeProfile::ExpDecay { a: U::lit(a.as_f64()), b: U::lit(b.as_f64()), rate: U::lit(rate.as_f64()) }
            }
        }
    }
}

/// Shape of a distributed density in `theta`.
#[derive(Clone, Debug, PartialEq)]
pub enum ThetaShape<T> {
    Uniform,
    /// `exp(rate theta)`
    Exp { rate: T },
    /// `a + b theta`
    Linear { a: T, b: T },
}

impl<T: Real> ThetaShape<T> {
    pub fn eval(&self, theta: T) -> T {
        match *self {
            ThetaShape::Uniform => T::one(),
            ThetaShape::Exp { rate } => (rate * theta).exp(),
            ThetaShape::Linear { a, b } => a + b * theta,
        }
    }

    /// `int_{-r}^{0} |shape(theta)| dtheta`, in closed form.
    pub fn abs_integral(&self, r: T) -> T {
        match *self {
            ThetaShape::Uniform => r,
            ThetaShape::Exp { rate } => {
                if rate == T::zero() {
                    r
                } else {
                    (T::one() - (-rate * r).exp()) / rate
                }
            }
            ThetaShape::Linear { a, b } => {
                let half = T::lit(0.5);
                let prim = |x: T| a * x + half * b * x * x;
                let root = if b != T::zero() { -a / b } else { T::one() };
                if b != T::zero() && root > -r && root < T::zero() {
                    (prim(root) - prim(-r)).abs() + (prim(T::zero()) - prim(root)).abs()
                } else {
                    (prim(T::zero()) - prim(-r)).abs()
                }
            }
        }
    }

    /// Shape seen on `[-r_new, 0]` after compressing `[-r, 0]` onto it,
    /// scaled so its integral is preserved.
    fn rescaled(&self, factor: T) -> (ThetaShape<T>, T) {
        // factor = r_old / r_new, theta_old = factor * theta_new
        match *self {
            ThetaShape::Uniform => (ThetaShape::Uniform, factor),
            ThetaShape::Exp { rate } => (ThetaShape::Exp { rate: rate * factor }, factor),
            ThetaShape::Linear { a, b } => (ThetaShape::Linear { a, b: b * factor }, factor),
        }
    }

    fn cast<U: Real>(&self) -> ThetaShape<U> {
        match *self {
            ThetaShape::Uniform => ThetaShape::Uniform,
            ThetaShape::Exp { rate } => ThetaShape::Exp { rate: U::lit(rate.as_f64()) },
            ThetaShape::Linear { a, b } => ThetaShape::Linear { a: U::lit(a.as_f64()), b: U::lit(b.as_f64()) },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteTerm<T> {
    pub lag: T,
    pub matrix: Matrix<T>,
    pub profile: TimeProfile<T>,
}

impl<T: Real> DiscreteTerm<T> {
    pub fn coefficient(&self, t: T) -> Matrix<T> {
        self.matrix.scaled(self.profile.eval(t))
    }
}

/// `B(t, theta) = profile(t) * shape(theta) * matrix`
#[derive(Clone, Debug, PartialEq)]
pub struct Density<T> {
    pub matrix: Matrix<T>,
    pub profile: TimeProfile<T>,
    pub shape: ThetaShape<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DelayKernel<T> {
    dim: usize,
    delay: T,
    terms: Vec<DiscreteTerm<T>>,
    density: Option<Density<T>>,
    variation_bound: T,
    quadrature: QuadratureOptions<T>,
}

/// Sampling window for the variation check.
#[derive(Clone, Copy, Debug)]
pub struct ValidationGrid<T> {
    pub t_start: T,
    pub t_end: T,
    pub points: usize,
}

impl<T: Real> Default for ValidationGrid<T> {
    fn default() -> Self {
        ValidationGrid { t_start: T::lit(-10.0), t_end: T::lit(10.0), points: 256 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport<T> {
    pub ok: bool,
    /// Largest sampled `sum_k |A_k(t)| + int |B(t, .)|`.
    pub measured_variation: T,
    pub variation_ok: bool,
    /// `1/(M e) - r`; positive when the delay is small enough.
    pub margin: T,
    pub delay_ok: bool,
}

impl<T: Real> DelayKernel<T> {
    /// Zero functional on `R^dim` with delay `r` and declared bound `M`.
    pub fn new(dim: usize, delay: T, variation_bound: T) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidKernel("dimension must be positive".into()));
        }
        if !(delay > T::zero()) || !delay.is_finite() {
            return Err(Error::InvalidKernel(format!("delay must be positive and finite, got {delay}")));
        }
        if !(variation_bound > T::zero()) || !variation_bound.is_finite() {
            return Err(Error::InvalidKernel(format!("variation bound M must be positive, got {variation_bound}")));
        }
        Ok(DelayKernel { dim, delay, terms: Vec::new(), density: None, variation_bound, quadrature: QuadratureOptions::default() })
    }

    /// Adds a constant-coefficient discrete term `A phi(-lag)`.
    pub fn with_term(self, lag: T, matrix: Matrix<T>) -> Result<Self> {
        self.with_profiled_term(lag, matrix, TimeProfile::Const)
    }

    pub fn with_profiled_term(mut self, lag: T, matrix: Matrix<T>, profile: TimeProfile<T>) -> Result<Self> {
        if !(lag >= T::zero() && lag <= self.delay) {
            return Err(Error::InvalidKernel(format!("lag {lag} outside [0, {}]", self.delay)));
        }
        self.check_matrix(&matrix)?;
        self.terms.push(DiscreteTerm { lag, matrix, profile });
        Ok(self)
    }

    pub fn with_density(mut self, matrix: Matrix<T>, profile: TimeProfile<T>, shape: ThetaShape<T>) -> Result<Self> {
        self.check_matrix(&matrix)?;
        self.density = Some(Density { matrix, profile, shape });
        Ok(self)
    }

    pub fn with_quadrature(mut self, opts: QuadratureOptions<T>) -> Self {
        self.quadrature = opts;
        self
    }

    fn check_matrix(&self, m: &Matrix<T>) -> Result<()> {
        if m.rows() != self.dim || m.cols() != self.dim {
            return Err(Error::InvalidKernel(format!(
                "coefficient is {}x{}, kernel dimension is {}",
                m.rows(),
                m.cols(),
                self.dim
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delay(&self) -> T {
        self.delay
    }

    pub fn variation_bound(&self) -> T {
        self.variation_bound
    }

    pub fn terms(&self) -> &[DiscreteTerm<T>] {
        &self.terms
    }

    pub fn density(&self) -> Option<&Density<T>> {
        self.density.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.density.is_none()
    }

    /// Positive lags of the discrete terms, sorted and deduplicated.
    pub fn positive_lags(&self) -> Vec<T> {
        let mut lags: Vec<T> = self.terms.iter().map(|t| t.lag).filter(|&l| l > T::zero()).collect();
        lags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        lags.dedup();
        lags
    }

    /// `sum_k |A_k(t)| + int_{-r}^0 |B(t, theta)| dtheta` in the induced max-norm.
    pub fn variation_at(&self, t: T) -> T {
        let mut v = T::zero();
        for term in &self.terms {
            v += term.profile.eval(t).abs() * term.matrix.norm_inf();
        }
        if let Some(d) = &self.density {
            v += d.profile.eval(t).abs() * d.matrix.norm_inf() * d.shape.abs_integral(self.delay);
        }
        v
    }

    /// Checks `Var L(t, .) <= M` on a time grid and `r < 1/(M e)`.
    pub fn validate_hypothesis(&self, grid: &ValidationGrid<T>) -> Result<ValidationReport<T>> {
        let pts = grid.points.max(2);
        let mut measured = T::zero();
        for i in 0..pts {
            let t = grid.t_start + (grid.t_end - grid.t_start) * T::count(i) / T::count(pts - 1);
            let v = self.variation_at(t);
            if !v.is_finite() {
                return Err(Error::NonFiniteCoefficient { t: t.as_f64(), what: "kernel variation".into() });
            }
            measured = measured.max(v);
        }
        let variation_ok = measured <= self.variation_bound;
        let margin = T::one() / (self.variation_bound * T::one().exp()) - self.delay;
        let delay_ok = margin > T::zero();
        Ok(ValidationReport { ok: variation_ok && delay_ok, measured_variation: measured, variation_ok, margin, delay_ok })
    }

    /// Validates and turns a failure into an [`Error::Hypothesis`].
    pub fn require_hypothesis(&self, grid: &ValidationGrid<T>) -> Result<ValidationReport<T>> {
        let rep = self.validate_hypothesis(grid)?;
        if !rep.variation_ok {
            return Err(Error::Hypothesis(format!(
                "measured variation {} exceeds M = {}",
                rep.measured_variation, self.variation_bound
            )));
        }
        if !rep.delay_ok {
            return Err(Error::Hypothesis(format!(
                "delay r = {} is not below 1/(M e) = {}",
                self.delay,
                self.delay + rep.margin
            )));
        }
        Ok(rep)
    }

    /// `L(t, seg)`.
    pub fn apply<S: Segment<T> + ?Sized>(&self, t: T, seg: &S) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.dim];
        self.apply_into(t, seg, &mut out)?;
        Ok(out)
    }

    pub fn apply_into<S: Segment<T> + ?Sized>(&self, t: T, seg: &S, out: &mut [T]) -> Result<()> {
        if seg.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: seg.dim() });
        }
        out.iter_mut().for_each(|o| *o = T::zero());
        let mut buf = vec![T::zero(); self.dim];
        for term in &self.terms {
            let s = term.profile.eval(t);
            if s == T::zero() {
                continue;
            }
            seg.eval_into(-term.lag, &mut buf);
            term.matrix.mul_vec_acc(&buf, s, out);
        }
        if let Some(d) = &self.density {
            let s = d.profile.eval(t);
            if s != T::zero() {
                let shape = &d.shape;
                let moment = integrate_cells(
                    |th, o: &mut [T]| {
                        seg.eval_into(th, o);
                        let w = shape.eval(th);
                        o.iter_mut().for_each(|v| *v *= w);
                    },
                    -self.delay,
                    T::zero(),
                    seg.cells(),
                    self.dim,
                    &self.quadrature,
                )?;
                d.matrix.mul_vec_acc(&moment, s, out);
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCoefficient { t: t.as_f64(), what: "functional value".into() });
        }
        Ok(())
    }

    /// The same kernel family member at delay `r_new`: lags are rescaled
    /// proportionally and the density is compressed onto `[-r_new, 0]` with
    /// its mass preserved, so the variation is unchanged.
    pub fn with_delay(&self, r_new: T) -> Result<Self> {
        if !(r_new > T::zero()) {
            return Err(Error::InvalidKernel(format!("delay must be positive, got {r_new}")));
        }
        let factor = self.delay / r_new;
        let terms = self
            .terms
            .iter()
            .map(|t| DiscreteTerm { lag: (t.lag / factor).min(r_new), matrix: t.matrix.clone(), profile: t.profile.clone() })
            .collect();
        let density = self.density.as_ref().map(|d| {
            let (shape, scale) = d.shape.rescaled(factor);
            Density { matrix: d.matrix.scaled(scale), profile: d.profile.clone(), shape }
        });
        Ok(DelayKernel { dim: self.dim, delay: r_new, terms, density, variation_bound: self.variation_bound, quadrature: self.quadrature })
    }

    pub fn with_variation_bound(mut self, m: T) -> Self {
        self.variation_bound = m;
        self
    }

    pub fn cast<U: Real>(&self) -> DelayKernel<U> {
        DelayKernel {
            dim: self.dim,
            delay: U::lit(self.delay.as_f64()),
            terms: self
                .terms
                .iter()
                .map(|t| DiscreteTerm { lag: U::lit(t.lag.as_f64()), matrix: t.matrix.cast(), profile: t.profile.cast() })
                .collect(),
            density: self.density.as_ref().map(|d| Density {
                matrix: d.matrix.cast(),
                profile: d.profile.cast(),
                shape: d.shape.cast(),
            }),
            variation_bound: U::lit(self.variation_bound.as_f64()),
            quadrature: QuadratureOptions::default(),
        }
    }
}
