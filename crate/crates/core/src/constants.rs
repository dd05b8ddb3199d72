//! Monte-Carlo estimates of the geometric constants of each depth family.
//!
//! `lambda1` is the Lebesgue measure of the unit region `Z_1(0)` and
//! `lambda1_star_sq` is the integral of the squared measure of its sections
//! `Z_1(0)|x1`. The first scales the tau-approximation, the ratio
//! `lambda1_star_sq / (4 lambda1^2)` is the limiting variance of the rooted
//! tau-approximation.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::geometry::{Family, RegionSpec};
use crate::rng::{self, StreamRng};
use crate::stats;

pub const DEFAULT_LAMBDA1_SAMPLES: u64 = 10_000_000;
pub const DEFAULT_STAR_OUTER: u64 = 100_000;
pub const DEFAULT_STAR_INNER: u64 = 10_000;

const BATCH: u64 = 10_000;
const OUTER_BATCH: u64 = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstantsBudget {
    pub lambda1_samples: u64,
    pub star_outer: u64,
    pub star_inner: u64,
}

impl Default for ConstantsBudget {
    fn default() -> Self {
        Self {
            lambda1_samples: DEFAULT_LAMBDA1_SAMPLES,
            star_outer: DEFAULT_STAR_OUTER,
            star_inner: DEFAULT_STAR_INNER,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryConstants {
    pub spec: RegionSpec,
    pub lambda1: f64,
    pub lambda1_se: f64,
    pub lambda1_star_sq: f64,
    pub lambda1_star_sq_se: f64,
    pub mc_samples: u64,
    pub seed: u64,
}

impl GeometryConstants {
    /// Closed-form constants where they are known: every pair or simplicial
    /// family on the line (the unit region is two triangles of total area 1,
    /// sections have length `1 - |x1|`), and the cube families.
    pub fn analytic(spec: &RegionSpec) -> Option<Self> {
        let (l1, star) = match spec.family {
            Family::HalfspaceCube | Family::HalfRegionCubes => (1.0, 1.0),
            _ if spec.dim == 1 => (1.0, 2.0 / 3.0),
            _ => return None,
        };
        Some(Self {
            spec: *spec,
            lambda1: l1,
            lambda1_se: 0.0,
            lambda1_star_sq: star,
            lambda1_star_sq_se: 0.0,
            mc_samples: 0,
            seed: 0,
        })
    }

    /// Monte-Carlo estimate of both constants.
    pub fn estimate(spec: &RegionSpec, budget: &ConstantsBudget, seed: u64) -> Result<Self> {
        let (lambda1, lambda1_se) = estimate_lambda1(spec, budget.lambda1_samples, seed)?;
        let (lambda1_star_sq, lambda1_star_sq_se) = estimate_lambda1_star_sq(
            spec,
            budget.star_outer,
            budget.star_inner,
            rng::derive_seed(seed, 1),
        )?;
        Ok(Self {
            spec: *spec,
            lambda1,
            lambda1_se,
            lambda1_star_sq,
            lambda1_star_sq_se,
            mc_samples: budget.lambda1_samples,
            seed,
        })
    }

    /// Analytic constants when available, otherwise only `lambda1` by
    /// Monte Carlo (`lambda1_star_sq` is left as NaN).
    pub fn for_scaling(spec: &RegionSpec, samples: u64, seed: u64) -> Result<Self> {
        if let Some(c) = Self::analytic(spec) {
            return Ok(c);
        }
        let (lambda1, lambda1_se) = estimate_lambda1(spec, samples, seed)?;
        Ok(Self {
            spec: *spec,
            lambda1,
            lambda1_se,
            lambda1_star_sq: f64::NAN,
            lambda1_star_sq_se: f64::NAN,
            mc_samples: samples,
            seed,
        })
    }

    /// Limiting variance `lambda1_star_sq / (4 lambda1^2)` of the rooted
    /// tau-approximation.
    pub fn rooted_variance(&self) -> f64 {
        self.lambda1_star_sq / (4.0 * self.lambda1 * self.lambda1)
    }
}

/// Volume of the `d`-dimensional ball of radius `r`.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    let h = d as f64 / 2.0;
    std::f64::consts::PI.powf(h) * r.powi(d as i32) / gamma(h + 1.0)
}

/// Uniform draw from the centred ball of radius `r` in `out.len()` dimensions.
pub(crate) fn sample_ball(rng: &mut StreamRng, r: f64, out: &mut [f64]) {
    let d = out.len();
    if d == 1 {
        out[0] = r * (2.0 * rng.random::<f64>() - 1.0);
        return;
    }
    let mut norm2 = 0.0;
    for v in out.iter_mut() {
        let g: f64 = StandardNormal.sample(rng);
        *v = g;
        norm2 += g * g;
    }
    let radius = r * rng.random::<f64>().powf(1.0 / d as f64);
    let scale = radius / norm2.sqrt();
    for v in out.iter_mut() {
        *v *= scale;
    }
}

/// Radius of a ball in `R^{kp}` guaranteed to contain `Z_1(0)`, and the
/// bound on each component norm.
fn envelope(spec: &RegionSpec) -> Result<(f64, f64)> {
    match spec.family {
        Family::Lens | Family::Spherical => Ok((2f64.sqrt(), 1.0)),
        Family::BetaSkeleton { beta } if beta <= 2.0 => Ok((2f64.sqrt(), 1.0)),
        Family::BetaSkeleton { beta } => {
            let r = ((beta * beta + 1.0) / 2.0).sqrt();
            Ok((r, r))
        }
        Family::Simplicial => Ok(((spec.dim as f64 + 1.0).sqrt(), 1.0)),
        f => Err(Error::UnsupportedFamily(f.name().into())),
    }
}

/// Envelope used by Monte-Carlo integration over `Z_1(0)`: joint radius
/// and dimension of the sampled space.
pub(crate) fn joint_envelope(spec: &RegionSpec) -> Result<(f64, usize)> {
    let (r, _) = envelope(spec)?;
    Ok((r, spec.arity() * spec.dim))
}

pub(crate) fn unit_member(spec: &RegionSpec, flat: &[f64], zero: &[f64]) -> bool {
    let p = spec.dim;
    match spec.arity() {
        2 => spec.contains_unchecked(zero, &[&flat[..p], &flat[p..2 * p]], 1.0),
        k => {
            let tuple: Vec<&[f64]> = (0..k).map(|i| &flat[i * p..(i + 1) * p]).collect();
            spec.contains_unchecked(zero, &tuple, 1.0)
        }
    }
}

/// Hit-or-miss estimate of `lambda1` with its binomial standard error.
pub fn estimate_lambda1(spec: &RegionSpec, n_samples: u64, seed: u64) -> Result<(f64, f64)> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be positive".into()));
    }
    if matches!(spec.family, Family::HalfspaceCube | Family::HalfRegionCubes) {
        return Ok((1.0, 0.0));
    }
    let (radius, dim) = joint_envelope(spec)?;
    let batches = n_samples.div_ceil(BATCH);
    let hits: u64 = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, b);
            let count = BATCH.min(n_samples - b * BATCH);
            let mut buf = vec![0.0; dim];
            let zero = vec![0.0; spec.dim];
            let mut hits = 0u64;
            for _ in 0..count {
                sample_ball(&mut r, radius, &mut buf);
                hits += unit_member(spec, &buf, &zero) as u64;
            }
            hits
        })
        .sum();
    let vol = ball_volume(dim, radius);
    let frac = hits as f64 / n_samples as f64;
    let se = vol * (frac * (1.0 - frac) / n_samples as f64).sqrt();
    Ok((vol * frac, se))
}

/// Nested Monte-Carlo estimate of `lambda1_star_sq`.
///
/// The outer loop draws the first tuple point uniformly in the ball that
/// contains every section; each section measure is estimated twice
/// independently and the product is averaged, which is unbiased for the
/// squared measure.
pub fn estimate_lambda1_star_sq(
    spec: &RegionSpec,
    n_outer: u64,
    n_inner: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_outer < 2 || n_inner < 2 {
        return Err(Error::InvalidParameter(
            "n_outer and n_inner must both be at least 2".into(),
        ));
    }
    if matches!(spec.family, Family::HalfspaceCube | Family::HalfRegionCubes) {
        return Ok((1.0, 0.0));
    }
    let (_, point_radius) = envelope(spec)?;
    let p = spec.dim;
    let k = spec.arity();
    let point_vol = ball_volume(p, point_radius);
    // measure of the space the inner loop samples: (k-1) independent balls
    let inner_vol = point_vol.powi(k as i32 - 1);
    let batches = n_outer.div_ceil(OUTER_BATCH);
    let products: Vec<f64> = (0..batches)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut r = rng::stream(seed, b);
            let count = OUTER_BATCH.min(n_outer - b * OUTER_BATCH);
            let zero = vec![0.0; p];
            let mut flat = vec![0.0; k * p];
            let mut out = Vec::with_capacity(count as usize);
            for _ in 0..count {
                sample_ball(&mut r, point_radius, &mut flat[..p]);
                let mut section = [0u64; 2];
                for s in &mut section {
                    for _ in 0..n_inner {
                        for j in 1..k {
                            sample_ball(&mut r, point_radius, &mut flat[j * p..(j + 1) * p]);
                        }
                        *s += unit_member(spec, &flat, &zero) as u64;
                    }
                }
                let a = inner_vol * section[0] as f64 / n_inner as f64;
                let b = inner_vol * section[1] as f64 / n_inner as f64;
                out.push(a * b);
            }
            out
        })
        .collect();
    let (m, se) = stats::mean_se(&products);
    Ok((point_vol * m, point_vol * se))
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CacheKey {
    pub family: String,
    pub beta: Option<String>,
    pub p: usize,
    pub lambda1_samples: u64,
    pub star_outer: u64,
    pub star_inner: u64,
    pub seed: u64,
}

impl CacheKey {
    pub fn new(spec: &RegionSpec, budget: &ConstantsBudget, seed: u64) -> Self {
        Self {
            family: spec.family.name().to_string(),
            beta: spec.family.beta().map(|b| format!("{b}")),
            p: spec.dim,
            lambda1_samples: budget.lambda1_samples,
            star_outer: budget.star_outer,
            star_inner: budget.star_inner,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CachedValue {
    pub lambda1: f64,
    pub lambda1_se: f64,
    pub lambda1_star_sq: f64,
    pub lambda1_star_sq_se: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: CacheKey,
    value: CachedValue,
}

/// JSON file of previously computed constants.
#[derive(Clone, Debug, Default)]
pub struct ConstantsCache {
    entries: BTreeMap<CacheKey, CachedValue>,
}

impl ConstantsCache {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(path)?;
        let list: Vec<CacheEntry> = serde_json::from_str(&text)?;
        Ok(Self {
            entries: list.into_iter().map(|e| (e.key, e.value)).collect(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let list: Vec<CacheEntry> = self
            .entries
            .iter()
            .map(|(k, v)| CacheEntry { key: k.clone(), value: v.clone() })
            .collect();
        std::fs::write(path, serde_json::to_string_pretty(&list)? + "\n")?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, spec: &RegionSpec, budget: &ConstantsBudget, seed: u64) -> Option<GeometryConstants> {
        self.entries
            .get(&CacheKey::new(spec, budget, seed))
            .map(|v| GeometryConstants {
                spec: *spec,
                lambda1: v.lambda1,
                lambda1_se: v.lambda1_se,
                lambda1_star_sq: v.lambda1_star_sq,
                lambda1_star_sq_se: v.lambda1_star_sq_se,
                mc_samples: budget.lambda1_samples,
                seed,
            })
    }

    pub fn insert(&mut self, c: &GeometryConstants, budget: &ConstantsBudget) {
        self.entries.insert(
            CacheKey::new(&c.spec, budget, c.seed),
            CachedValue {
                lambda1: c.lambda1,
                lambda1_se: c.lambda1_se,
                lambda1_star_sq: c.lambda1_star_sq,
                lambda1_star_sq_se: c.lambda1_star_sq_se,
            },
        );
    }

    /// Cached constants, estimating and inserting them on a miss.
    pub fn get_or_estimate(
        &mut self,
        spec: &RegionSpec,
        budget: &ConstantsBudget,
        seed: u64,
    ) -> Result<GeometryConstants> {
        if let Some(c) = self.get(spec, budget, seed) {
            return Ok(c);
        }
        let c = GeometryConstants::estimate(spec, budget, seed)?;
        self.insert(&c, budget);
        Ok(c)
    }
}
