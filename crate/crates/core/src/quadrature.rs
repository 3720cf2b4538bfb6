//! Adaptive Gauss-Kronrod (7, 15) quadrature for vector-valued integrands.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd Kronrod nodes (indices 1, 3, 5, 7).
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureOptions<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_intervals: usize,
}

impl<T: Real> Default for QuadratureOptions<T> {
    fn default() -> Self {
        QuadratureOptions { abs_tol: T::lit(1e-12), rel_tol: T::lit(1e-13), max_intervals: 2000 }
    }
}

struct Piece<T> {
    a: T,
    b: T,
    value: Vec<T>,
    err: T,
}

fn gk15<T: Real, F: FnMut(T, &mut [T])>(f: &mut F, a: T, b: T, dim: usize, buf: &mut [T]) -> (Vec<T>, T) {
    let half = (b - a) * T::lit(0.5);
    let center = (a + b) * T::lit(0.5);
    let mut kron = vec![T::zero(); dim];
    let mut gauss = vec![T::zero(); dim];

    f(center, buf);
    for i in 0..dim {
        kron[i] += T::lit(WGK[7]) * buf[i];
        gauss[i] += T::lit(WG[3]) * buf[i];
    }
    for k in 0..7 {
        let dx = half * T::lit(XGK[k]);
        for x in [center - dx, center + dx] {
            f(x, buf);
            for i in 0..dim {
                kron[i] += T::lit(WGK[k]) * buf[i];
                if k % 2 == 1 {
                    gauss[i] += T::lit(WG[k / 2]) * buf[i];
                }
            }
        }
    }
    let mut err = T::zero();
    for i in 0..dim {
        kron[i] *= half;
        gauss[i] *= half;
        err = err.max((kron[i] - gauss[i]).abs());
    }
    (kron, err)
}

/// Integrates the vector-valued `f` over `[a, b]`.
///
/// `f(x, out)` writes the integrand at `x` into `out` (length `dim`). The
/// integrand is never evaluated at the endpoints. Bisection continues on the
/// interval with the largest error estimate until the total estimate is below
/// `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<T, F>(f: F, a: T, b: T, dim: usize, opts: &QuadratureOptions<T>) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(T, &mut [T]),
{
    integrate_cells(f, a, b, 1, dim, opts)
}

/// As [`integrate`], starting from `cells` equal subintervals. Features
/// narrower than the spacing of the first rule can otherwise go unseen.
pub fn integrate_cells<T, F>(mut f: F, a: T, b: T, cells: usize, dim: usize, opts: &QuadratureOptions<T>) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(T, &mut [T]),
{
    if a == b || dim == 0 {
        return Ok(vec![T::zero(); dim]);
    }
    let mut buf = vec![T::zero(); dim];
    let cells = cells.max(1);
    let width = (b - a) / T::count(cells);
    let mut pieces = Vec::with_capacity(cells);
    for c in 0..cells {
        let lo = a + width * T::count(c);
        let hi = if c + 1 == cells { b } else { a + width * T::count(c + 1) };
        let (value, err) = gk15(&mut f, lo, hi, dim, &mut buf);
        pieces.push(Piece { a: lo, b: hi, value, err });
    }

    loop {
        let mut total = vec![T::zero(); dim];
        let mut total_err = T::zero();
        for p in &pieces {
            for i in 0..dim {
                total[i] += p.value[i];
            }
            total_err += p.err;
        }
        if total.iter().any(|v| !v.is_finite()) {
            return Err(Error::Quadrature { achieved: f64::NAN, requested: opts.abs_tol.as_f64() });
        }
        let scale = total.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let target = opts.abs_tol.max(opts.rel_tol * scale);
        if total_err <= target {
            return Ok(total);
        }
        if pieces.len() >= opts.max_intervals + cells {
            return Err(Error::Quadrature { achieved: total_err.as_f64(), requested: target.as_f64() });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i)
            .unwrap();
        let p = pieces.swap_remove(worst);
        let mid = (p.a + p.b) * T::lit(0.5);
        if mid <= p.a || mid >= p.b {
            return Err(Error::Quadrature { achieved: total_err.as_f64(), requested: target.as_f64() });
        }
        let (v1, e1) = gk15(&mut f, p.a, mid, dim, &mut buf);
        let (v2, e2) = gk15(&mut f, mid, p.b, dim, &mut buf);
        pieces.push(Piece { a: p.a, b: mid, value: v1, err: e1 });
        pieces.push(Piece { a: mid, b: p.b, value: v2, err: e2 });
    }
}
