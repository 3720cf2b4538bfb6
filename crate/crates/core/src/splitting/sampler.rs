//! Deterministic samples from the unit ball of `C[-r, 0]`.
//!
//! The first samples are structured: constants `+-e_i`, then tents equal to
//! `-1` at both ends with peak `+1` at each interior node. Later samples cycle
//! through random tents, bang-bang sign patterns, random piecewise-linear
//! functions and elements `Phi(s + ., s) v` of the range of `P(s)`. Sample `i`
//! draws from its own ChaCha stream, so any sample can be regenerated alone.
//! Piecewise-linear data carry monotone node slopes, so the Hermite
//! representation never overshoots the node values.

use super::Splitting;
use crate::error::Result;
use crate::scalar::Real;
use crate::segment::{HistorySegment, Segment};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Constant,
    Tent,
    BangBang,
    PiecewiseLinear,
    Range,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Constant => "constant",
            Family::Tent => "tent",
            Family::BangBang => "bang-bang",
            Family::PiecewiseLinear => "piecewise-linear",
            Family::Range => "range",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplerConfig {
    pub seed: u64,
    pub samples: usize,
    /// Pairs used for the angular-distance estimate.
    pub pairs: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { seed: 0, samples: 1000, pairs: 10_000 }
    }
}

/// Node slopes that keep each Hermite cell monotone: zero at local extrema,
/// otherwise the smaller adjacent secant.
pub fn monotone_slopes<T: Real>(values: &[Vec<T>], h: T) -> Vec<Vec<T>> {
    let n = values.len();
    let dim = values[0].len();
    (0..n)
        .map(|j| {
            (0..dim)
                .map(|k| {
                    let left = (j > 0).then(|| (values[j][k] - values[j - 1][k]) / h);
                    let right = (j + 1 < n).then(|| (values[j + 1][k] - values[j][k]) / h);
                    match (left, right) {
                        (Some(a), Some(b)) if a * b > T::zero() => a.signum() * a.abs().min(b.abs()),
                        (Some(_), Some(_)) => T::zero(),
                        (Some(a), None) | (None, Some(a)) => a,
                        (None, None) => T::zero(),
                    }
                })
                .collect()
        })
        .collect()
}

fn piecewise_linear<T: Real>(delay: T, nodes: usize, values: Vec<Vec<T>>) -> Result<HistorySegment<T>> {
    let h = delay / T::count(nodes - 1);
    let slopes = monotone_slopes(&values, h);
    HistorySegment::from_values_and_slopes(delay, values, slopes)
}

/// Linear interpolation of knots `(position in [0, 1], value)` at node `j` of `nodes`.
fn knot_value(knots: &[(f64, f64)], j: usize, nodes: usize) -> f64 {
    let x = j as f64 / (nodes - 1) as f64;
    for w in knots.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x <= x1 {
            if x1 == x0 {
                return y1;
            }
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        }
    }
    knots.last().unwrap().1
}

fn tent(nodes: usize, peak: usize, left: f64, top: f64, right: f64) -> Vec<f64> {
    let last = (nodes - 1) as f64;
    let p = peak as f64 / last;
    let mut knots = vec![(0.0, left), (p, top), (1.0, right)];
    knots.dedup_by(|a, b| a.0 == b.0);
    if peak == 0 {
        knots[0].1 = top;
    }
    (0..nodes).map(|j| knot_value(&knots, j, nodes)).collect()
}

fn structured_count(dim: usize, nodes: usize) -> usize {
    2 * dim + dim * (nodes - 2)
}

fn build<T: Real>(
    cfg: &SamplerConfig,
    index: usize,
    dim: usize,
    nodes: usize,
    delay: T,
    range: &dyn Fn(&[T]) -> Result<HistorySegment<T>>,
) -> Result<(Family, HistorySegment<T>)> {
    let lit = T::lit;
    if index < 2 * dim {
        let mut v = vec![T::zero(); dim];
        v[index / 2] = if index.is_multiple_of(2) { T::one() } else { -T::one() };
        return Ok((Family::Constant, HistorySegment::constant(delay, nodes, &v)?));
    }
    if index < structured_count(dim, nodes) {
        let m = index - 2 * dim;
        let (comp, peak) = (m / (nodes - 2), 1 + m % (nodes - 2));
        let profile = tent(nodes, peak, -1.0, 1.0, -1.0);
        let values = (0..nodes)
            .map(|j| (0..dim).map(|k| if k == comp { lit(profile[j]) } else { T::zero() }).collect())
            .collect();
        return Ok((Family::Tent, piecewise_linear(delay, nodes, values)?));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let family = match (index - structured_count(dim, nodes)) % 4 {
        0 => Family::Tent,
        1 => Family::BangBang,
        2 => Family::PiecewiseLinear,
        _ => Family::Range,
    };
    let seg = match family {
        Family::Tent => {
            let cols: Vec<Vec<f64>> = (0..dim)
                .map(|_| {
                    let peak = rng.gen_range(0..nodes);
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    let (a, b) = (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
                    tent(nodes, peak, sign * a, sign, sign * b)
                })
                .collect();
            let values = (0..nodes).map(|j| (0..dim).map(|k| lit(cols[k][j])).collect()).collect();
            piecewise_linear(delay, nodes, values)?
        }
        Family::BangBang => {
            let blocks = rng.gen_range(1..=6usize);
            let mut cuts: Vec<usize> = (0..blocks - 1).map(|_| rng.gen_range(1..nodes)).collect();
            cuts.sort_unstable();
            let signs: Vec<Vec<f64>> =
                (0..blocks).map(|_| (0..dim).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect()).collect();
            let values: Vec<Vec<T>> = (0..nodes)
                .map(|j| {
                    let b = cuts.iter().filter(|&&c| c <= j).count();
                    signs[b].iter().map(|&v| lit(v)).collect()
                })
                .collect();
            let slopes = vec![vec![T::zero(); dim]; nodes];
            HistorySegment::from_values_and_slopes(delay, values, slopes)?
        }
        Family::PiecewiseLinear => {
            let cols: Vec<Vec<f64>> = (0..dim)
                .map(|_| {
                    let k = rng.gen_range(2..=8usize);
                    let mut xs: Vec<f64> = (0..k - 2).map(|_| rng.gen_range(0.0..1.0)).collect();
                    xs.push(0.0);
                    xs.push(1.0);
                    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let knots: Vec<(f64, f64)> = xs.into_iter().map(|x| (x, rng.gen_range(-1.0..=1.0))).collect();
                    (0..nodes).map(|j| knot_value(&knots, j, nodes)).collect()
                })
                .collect();
            let values = (0..nodes).map(|j| (0..dim).map(|k| lit(cols[k][j])).collect()).collect();
            piecewise_linear(delay, nodes, values)?
        }
        Family::Range | Family::Constant => {
            let v: Vec<T> = (0..dim).map(|_| lit(rng.gen_range(-1.0..=1.0))).collect();
            range(&v)?
        }
    };
    let norm = seg.sup_norm();
    if norm > T::zero() {
        Ok((family, seg.scaled(T::one() / norm)))
    } else {
        let v = vec![T::one(); dim];
        Ok((family, HistorySegment::constant(delay, nodes, &v)?))
    }
}

/// Sample `index` on the grid of `sp`, scaled to unit sup norm.
pub fn sample<T: Real>(cfg: &SamplerConfig, index: usize, sp: &Splitting<'_, T>) -> Result<(Family, HistorySegment<T>)> {
    build(cfg, index, sp.dim(), sp.options().nodes, sp.delay(), &|v| sp.range_segment(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::Segment;

    fn no_range(_: &[f64]) -> Result<HistorySegment<f64>> {
        HistorySegment::constant(0.1, 33, &[0.5])
    }

    #[test]
    fn structured_samples_come_first() {
        let cfg = SamplerConfig::default();
        let (f0, s0) = build(&cfg, 0, 1, 33, 0.1, &no_range).unwrap();
        let (f1, s1) = build(&cfg, 1, 1, 33, 0.1, &no_range).unwrap();
        assert_eq!((f0, f1), (Family::Constant, Family::Constant));
        assert_eq!(s0.head(), &[1.0]);
        assert_eq!(s1.head(), &[-1.0]);
        let (f, t) = build(&cfg, 2 + 15, 1, 33, 0.1, &no_range).unwrap();
        assert_eq!(f, Family::Tent);
        assert_eq!(t.head(), &[-1.0]);
        assert_eq!(t.node_value(0), &[-1.0]);
        assert_eq!(t.node_value(16), &[1.0]);
        assert_eq!(t.sup_norm(), 1.0);
    }

    #[test]
    fn samples_are_unit_and_reproducible() {
        let cfg = SamplerConfig { seed: 7, ..Default::default() };
        for i in 0..200 {
            let (fa, a) = build(&cfg, i, 2, 33, 0.1, &|_: &[f64]| HistorySegment::constant(0.1, 33, &[0.5, -0.25])).unwrap();
            let (fb, b) = build(&cfg, i, 2, 33, 0.1, &|_: &[f64]| HistorySegment::constant(0.1, 33, &[0.5, -0.25])).unwrap();
            assert_eq!(fa, fb);
            assert_eq!(a, b);
            assert!((a.sup_norm() - 1.0).abs() < 1e-12, "sample {i}");
        }
    }

    #[test]
    fn monotone_slopes_do_not_overshoot() {
        let pattern = [0.0, 1.0, 0.2, 0.2, 0.9, -1.0, 0.3, 0.35, 0.4];
        let values: Vec<Vec<f64>> = pattern.iter().chain(&pattern).map(|&v| vec![v]).collect();
        let seg = HistorySegment::from_values_and_slopes(1.7, values.clone(), monotone_slopes(&values, 0.1)).unwrap();
        assert!((seg.sup_norm() - 1.0).abs() < 1e-14);
    }
}
