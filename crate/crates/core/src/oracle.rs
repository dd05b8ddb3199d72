//! Population local depth and related quantities for known densities.

use rayon::prelude::*;

use crate::constants::{ball_volume, joint_envelope, sample_ball, unit_member};
use crate::error::{Error, Result};
use crate::geometry::RegionSpec;
use crate::quadrature::{integrate, integrate_2d, integrate_with, QuadratureConfig};
use crate::rng;
use crate::stats;

/// A probability density with a bounding box outside which it is negligible.
pub trait DensityFn: Sync {
    fn dim(&self) -> usize;
    fn pdf(&self, x: &[f64]) -> f64;
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>);

    fn pdf1(&self, x: f64) -> f64 {
        self.pdf(&[x])
    }
}

/// A density given by a closure on a box.
pub struct ClosureDensity<F> {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> DensityFn for ClosureDensity<F> {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn pdf(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lo.clone(), self.hi.clone())
    }
}

fn require_line(f: &dyn DensityFn) -> Result<(f64, f64)> {
    if f.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: f.dim() });
    }
    let (lo, hi) = f.bounding_box();
    Ok((lo[0], hi[0]))
}

/// Total mass over the bounding box (one or two dimensions).
pub fn total_mass(f: &dyn DensityFn, quad: &QuadratureConfig) -> Result<f64> {
    let (lo, hi) = f.bounding_box();
    match f.dim() {
        1 => integrate(|x| f.pdf1(x), lo[0], hi[0], quad),
        2 => integrate_2d(|x, y| f.pdf(&[x, y]), lo[0], hi[0], |_| lo[1], |_| hi[1], quad),
        d => Err(Error::InvalidParameter(format!("mass check is limited to p <= 2, got {d}"))),
    }
}

/// Mass of `[a, b]` clipped to the support box.
fn mass_1d(f: &dyn DensityFn, a: f64, b: f64, lo: f64, hi: f64, quad: &QuadratureConfig) -> Result<f64> {
    let (a, b) = (a.max(lo), b.min(hi));
    if b <= a {
        return Ok(0.0);
    }
    integrate(|t| f.pdf1(t), a, b, quad)
}

/// `LLD(x, tau) = 2 * int_{a, b >= 0, a + b <= tau} f(x + a) f(x - b)`.
pub fn population_lld_1d(f: &dyn DensityFn, x: f64, tau: f64, quad: &QuadratureConfig) -> Result<f64> {
    quad.validate()?;
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::NegativeTau(tau));
    }
    let (lo, hi) = require_line(f)?;
    if tau == 0.0 {
        return Ok(0.0);
    }
    let a_max = tau.min(hi - x);
    let a_min = (lo - x).max(0.0);
    if a_max <= a_min {
        return Ok(0.0);
    }
    let inner = quad.with_abs_tol(quad.abs_tol / (8.0 * (a_max - a_min).max(1.0)));
    let v = integrate_with(
        |a| {
            let fa = f.pdf1(x + a);
            if fa == 0.0 {
                return Ok(0.0);
            }
            // Mass of x - b for b in [0, tau - a].
            Ok(fa * mass_1d(f, x - (tau - a), x, lo, hi, &inner)?)
        },
        a_min,
        a_max,
        &quad.with_abs_tol(quad.abs_tol / 2.0),
    )?;
    Ok(2.0 * v)
}

/// Population tau-approximation for the lens family on the line.
pub fn population_f_tau_1d(f: &dyn DensityFn, x: f64, tau: f64, quad: &QuadratureConfig) -> Result<f64> {
    if tau == 0.0 {
        return Err(Error::ZeroTau);
    }
    Ok(population_lld_1d(f, x, tau, quad)?.max(0.0).sqrt() / tau)
}

/// Central difference of the population tau-approximation.
pub fn population_f_tau_grad_1d(
    f: &dyn DensityFn,
    x: f64,
    tau: f64,
    h: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::ZeroTau);
    }
    if !(h > 0.0 && h < tau / 10.0) {
        return Err(Error::Precondition(format!("step {h} must lie in (0, tau/10)")));
    }
    let up = population_f_tau_1d(f, x + h, tau, quad)?;
    let down = population_f_tau_1d(f, x - h, tau, quad)?;
    Ok((up - down) / (2.0 * h))
}

/// First projection of the lens kernel and its moments on the line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    /// `E J(X_1)`, equal to `LLD(x, tau)`.
    pub lld: f64,
    /// `E J(X_1)^2`.
    pub second_moment: f64,
    /// `Var J(X_1)`.
    pub b_squared: f64,
    /// `LLD (1 - LLD)`.
    pub a_squared: f64,
}

/// `J(x1)`: probability that a second draw completes a pair whose region
/// contains `x`. For `x1 > x` the partner must fall in `[x1 - tau, x]`, for
/// `x1 < x` in `[x, x1 + tau]`.
fn kernel_projection(
    f: &dyn DensityFn,
    x: f64,
    x1: f64,
    tau: f64,
    lo: f64,
    hi: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let u = x1 - x;
    if u == 0.0 || u.abs() > tau {
        return Ok(0.0);
    }
    if u > 0.0 {
        mass_1d(f, x1 - tau, x, lo, hi, quad)
    } else {
        mass_1d(f, x, x1 + tau, lo, hi, quad)
    }
}

/// Hoeffding projection moments of `LLD_n(x, tau)` on the line.
pub fn population_projection_1d(
    f: &dyn DensityFn,
    x: f64,
    tau: f64,
    quad: &QuadratureConfig,
) -> Result<Projection> {
    quad.validate()?;
    if !(tau > 0.0) {
        return Err(Error::ZeroTau);
    }
    let (lo, hi) = require_line(f)?;
    let inner = quad.with_abs_tol(quad.abs_tol / (8.0 * tau.max(1.0)));
    let outer = quad.with_abs_tol(quad.abs_tol / 4.0);
    let mut first = 0.0;
    let mut second = 0.0;
    // Split at x, where the section switches sides.
    let span = if tau.is_finite() { tau } else { (hi - lo).abs() };
    for (a, b) in [(x - span, x), (x, x + span)] {
        let (a, b) = (a.max(lo), b.min(hi));
        if b <= a {
            continue;
        }
        first += integrate_with(
            |t| Ok(f.pdf1(t) * kernel_projection(f, x, t, tau, lo, hi, &inner)?),
            a,
            b,
            &outer,
        )?;
        second += integrate_with(
            |t| {
                let fx = f.pdf1(t);
                if fx == 0.0 {
                    return Ok(0.0);
                }
                let j = kernel_projection(f, x, t, tau, lo, hi, &inner)?;
                Ok(fx * j * j)
            },
            a,
            b,
            &outer,
        )?;
    }
    Ok(Projection {
        lld: first,
        second_moment: second,
        b_squared: (second - first * first).max(0.0),
        a_squared: first * (1.0 - first),
    })
}

/// `b^2(x, tau)`, the variance of the kernel's first projection.
pub fn population_b_squared_1d(f: &dyn DensityFn, x: f64, tau: f64, quad: &QuadratureConfig) -> Result<f64> {
    Ok(population_projection_1d(f, x, tau, quad)?.b_squared)
}

/// Exact variance of `LLD_n(x, tau)` for a sample of size `n`.
pub fn lld_n_variance(proj: &Projection, n: usize) -> f64 {
    let n = n as f64;
    (proj.a_squared + 2.0 * (n - 2.0) * proj.b_squared) / (n * (n - 1.0) / 2.0)
}

/// Monte-Carlo population local depth for any pair or simplicial family,
/// after the change of variables onto the unit region:
/// `tau^{kp} * int_{Z_1(0)} prod_i f(x + tau x_i)`.
///
/// Returns `(0, 0)` when no draw carries weight.
pub fn population_lgd_mc(
    f: &dyn DensityFn,
    spec: &RegionSpec,
    x: &[f64],
    tau: f64,
    quad: &QuadratureConfig,
) -> Result<(f64, f64)> {
    if !(tau > 0.0) || tau.is_infinite() {
        return Err(Error::InvalidParameter(format!("tau must be positive and finite, got {tau}")));
    }
    if x.len() != spec.dim || f.dim() != spec.dim {
        return Err(Error::Dimension { expected: spec.dim, got: x.len() });
    }
    if quad.mc_budget < 2 {
        return Err(Error::InvalidParameter("mc_budget must be at least 2".into()));
    }
    let (radius, dim) = joint_envelope(spec)?;
    let p = spec.dim;
    let k = spec.arity();
    const BATCH: u64 = 10_000;
    let batches = quad.mc_budget.div_ceil(BATCH);
    let sums: Vec<(f64, f64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(quad.seed, b);
            let count = BATCH.min(quad.mc_budget - b * BATCH);
            let mut buf = vec![0.0; dim];
            let zero = vec![0.0; p];
            let mut point = vec![0.0; p];
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                sample_ball(&mut r, radius, &mut buf);
                if !unit_member(spec, &buf, &zero) {
                    continue;
                }
                let mut w = 1.0;
                for i in 0..k {
                    for d in 0..p {
                        point[d] = x[d] + tau * buf[i * p + d];
                    }
                    w *= f.pdf(&point);
                    if w == 0.0 {
                        break;
                    }
                }
                s1 += w;
                s2 += w * w;
            }
            (s1, s2)
        })
        .collect();
    let s1 = stats::compensated_sum(sums.iter().map(|s| s.0));
    let s2 = stats::compensated_sum(sums.iter().map(|s| s.1));
    if s1 == 0.0 {
        return Ok((0.0, 0.0));
    }
    let m = quad.mc_budget as f64;
    let mean = s1 / m;
    let var = ((s2 / m - mean * mean) * m / (m - 1.0)).max(0.0);
    let scale = ball_volume(dim, radius) * tau.powi((k * p) as i32);
    Ok((scale * mean, scale * (var / m).sqrt()))
}

/// Moments `int x1^2` and `int x1 x2` over the unit lens region on the line.
///
/// The region is the pair of triangles where `0` lies between `x1` and
/// `x2` and `|x1 - x2| <= 1`.
pub fn unit_region_moments_1d(quad: &QuadratureConfig) -> Result<(f64, f64)> {
    // First triangle: x1 in [0, 1], x2 in [x1 - 1, 0]; the mirror doubles it.
    let sq = integrate_2d(|a, _| a * a, 0.0, 1.0, |a| a - 1.0, |_| 0.0, quad)?;
    let cross = integrate_2d(|a, b| a * b, 0.0, 1.0, |a| a - 1.0, |_| 0.0, quad)?;
    Ok((2.0 * sq, 2.0 * cross))
}

/// Second-order coefficient `h(x)` in `LLD(x, tau) = f(x)^2 tau^2 + h(x) tau^4 + o(tau^4)`
/// for the lens family on the line, given `f, f', f''` at `x`.
pub fn second_order_term_1d(f: f64, df: f64, d2f: f64, quad: &QuadratureConfig) -> Result<f64> {
    let (sq, cross) = unit_region_moments_1d(quad)?;
    Ok(f * d2f * sq + df * df * cross)
}
