//! Sample local depths and the quantities derived from them.
//!
//! For the pair and simplicial families the sample depth is the U-statistic
//! counting tuples of distinct sample points whose region contains the query.
//! Tuples can only hit when every point lies within `reach * tau` of the
//! query, so enumeration runs over that subset only; the hit count is the
//! same integer the full enumeration would produce.

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::GeometryConstants;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{self, Family, RegionSpec};
use crate::rng;

pub const DEFAULT_SIMPLEX_BUDGET: u64 = 1_000_000;

/// Slack on the prefilter radius; only ever admits extra candidates.
const REACH_SLACK: f64 = 1.0 + 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimplexBudget {
    Exact,
    Sampled(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthConfig {
    pub spec: RegionSpec,
    pub tau: f64,
    pub simplex_budget: SimplexBudget,
    /// Number of directions approximating the infimum over the sphere
    /// (half-space cubes only).
    pub direction_count: usize,
    pub seed: u64,
}

impl DepthConfig {
    pub fn new(spec: RegionSpec, tau: f64) -> Self {
        Self {
            spec,
            tau,
            simplex_budget: SimplexBudget::Sampled(DEFAULT_SIMPLEX_BUDGET),
            direction_count: 100 * spec.dim,
            seed: 0,
        }
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        Self { tau, ..self.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Exact,
    Subsampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthResult {
    pub values: Vec<f64>,
    pub estimator_kind: EstimatorKind,
    /// Tuples behind each value: `C(n, k)` when exact, the budget otherwise.
    pub tuples_used: u128,
}

/// `C(n, k)` as an exact integer (saturating).
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_nan() {
        return Err(Error::NonFinite("tau"));
    }
    if tau < 0.0 {
        return Err(Error::NegativeTau(tau));
    }
    Ok(())
}

fn check_inputs(data: &Dataset, queries: &Dataset, cfg: &DepthConfig) -> Result<()> {
    check_tau(cfg.tau)?;
    let k = cfg.spec.arity();
    if data.len() < k {
        return Err(Error::TooFewPoints { needed: k, got: data.len() });
    }
    if data.dim() != cfg.spec.dim {
        return Err(Error::Dimension { expected: cfg.spec.dim, got: data.dim() });
    }
    if !queries.is_empty() && queries.dim() != cfg.spec.dim {
        return Err(Error::Dimension { expected: cfg.spec.dim, got: queries.dim() });
    }
    Ok(())
}

/// Indices of sample points that can belong to a hitting tuple.
fn candidates(data: &Dataset, x: &[f64], spec: &RegionSpec, tau: f64) -> Vec<usize> {
    if tau.is_infinite() {
        return (0..data.len()).collect();
    }
    let r = spec.reach() * tau * REACH_SLACK;
    let r2 = r * r;
    (0..data.len())
        .filter(|&i| geometry::dist2(x, data.row(i)) <= r2)
        .collect()
}

fn count_pairs(data: &Dataset, x: &[f64], spec: &RegionSpec, tau: f64, local: &[usize]) -> u64 {
    let mut hits = 0u64;
    for (a, &i) in local.iter().enumerate() {
        let xi = data.row(i);
        for &j in &local[a + 1..] {
            hits += spec.contains_unchecked(x, &[xi, data.row(j)], tau) as u64;
        }
    }
    hits
}

/// Visits all k-subsets of `0..m` in lexicographic order.
fn for_each_combination(m: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > m {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + m - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn count_tuples(data: &Dataset, x: &[f64], spec: &RegionSpec, tau: f64, local: &[usize]) -> u64 {
    let k = spec.arity();
    let mut hits = 0u64;
    let mut tuple: Vec<&[f64]> = Vec::with_capacity(k);
    for_each_combination(local.len(), k, |c| {
        tuple.clear();
        tuple.extend(c.iter().map(|&a| data.row(local[a])));
        hits += spec.contains_unchecked(x, &tuple, tau) as u64;
    });
    hits
}

/// Unit directions for the half-space cube infimum; `{-1, +1}` on the line.
pub fn sphere_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    if dim == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }
    let mut r = rng::stream(seed, u64::MAX);
    (0..count.max(1))
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut r)).collect();
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|a| a / norm).collect();
            }
        })
        .collect()
}

struct QueryValue {
    value: f64,
    sampled: bool,
}

fn depth_one(
    data: &Dataset,
    x: &[f64],
    cfg: &DepthConfig,
    query_index: u64,
    directions: &[Vec<f64>],
) -> QueryValue {
    let n = data.len();
    let spec = &cfg.spec;
    let tau = cfg.tau;
    match spec.family {
        Family::HalfspaceCube => {
            let local = candidates(data, x, spec, tau);
            let min = directions
                .iter()
                .map(|u| {
                    local
                        .iter()
                        .filter(|&&i| geometry::halfspace_cube_member(x, data.row(i), u, tau))
                        .count()
                })
                .min()
                .unwrap_or(0);
            QueryValue { value: min as f64 / n as f64, sampled: false }
        }
        Family::HalfRegionCubes => {
            let (mut up, mut low) = (0usize, 0usize);
            for i in candidates(data, x, spec, tau) {
                let (u, l) = geometry::half_region_member(x, data.row(i), tau);
                up += u as usize;
                low += l as usize;
            }
            QueryValue { value: up.min(low) as f64 / n as f64, sampled: false }
        }
        Family::Lens | Family::Spherical | Family::BetaSkeleton { .. } => {
            let local = candidates(data, x, spec, tau);
            let hits = count_pairs(data, x, spec, tau, &local);
            QueryValue { value: hits as f64 / binomial(n, 2) as f64, sampled: false }
        }
        Family::Simplicial => {
            let k = spec.arity();
            let local = candidates(data, x, spec, tau);
            let local_tuples = binomial(local.len(), k);
            let total = binomial(n, k) as f64;
            match cfg.simplex_budget {
                SimplexBudget::Sampled(budget) if local_tuples > budget as u128 => {
                    let mut r = rng::stream(cfg.seed, query_index);
                    let m = local.len();
                    let mut hits = 0u64;
                    let mut tuple: Vec<&[f64]> = Vec::with_capacity(k);
                    for _ in 0..budget {
                        let pick = index::sample(&mut r, m, k);
                        tuple.clear();
                        tuple.extend(pick.iter().map(|a| data.row(local[a])));
                        hits += spec.contains_unchecked(x, &tuple, tau) as u64;
                    }
                    let frac = hits as f64 / budget as f64;
                    QueryValue { value: frac * (local_tuples as f64 / total), sampled: true }
                }
                _ => {
                    let hits = count_tuples(data, x, spec, tau, &local);
                    QueryValue { value: hits as f64 / total, sampled: false }
                }
            }
        }
    }
}

/// Sample local depth of every query point.
pub fn sample_local_depth(data: &Dataset, queries: &Dataset, cfg: &DepthConfig) -> Result<DepthResult> {
    check_inputs(data, queries, cfg)?;
    let directions = if cfg.spec.needs_direction() {
        sphere_directions(cfg.spec.dim, cfg.direction_count, cfg.seed)
    } else {
        Vec::new()
    };
    let out: Vec<QueryValue> = (0..queries.len())
        .into_par_iter()
        .map(|q| depth_one(data, queries.row(q), cfg, q as u64, &directions))
        .collect();
    let sampled = out.iter().any(|v| v.sampled);
    let tuples_used = match (sampled, cfg.simplex_budget) {
        (true, SimplexBudget::Sampled(b)) => b as u128,
        _ => binomial(data.len(), cfg.spec.arity()),
    };
    Ok(DepthResult {
        values: out.into_iter().map(|v| v.value).collect(),
        estimator_kind: if sampled { EstimatorKind::Subsampled } else { EstimatorKind::Exact },
        tuples_used,
    })
}

/// Sample local depth at a single point.
pub fn depth_at(data: &Dataset, x: &[f64], cfg: &DepthConfig) -> Result<f64> {
    let q = Dataset::from_flat(x.len(), x.to_vec())?;
    Ok(sample_local_depth(data, &q, cfg)?.values[0])
}

/// Nearest-rank quantile: the `max(1, ceil(q m))`-th smallest value.
pub fn nearest_rank(values: &mut [f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("empty statistic set".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("quantile order {q} outside [0, 1]")));
    }
    let m = values.len();
    let rank = ((q * m as f64).ceil() as usize).clamp(1, m);
    let (_, v, _) = values.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*v)
}

/// Data-driven localization: the order-`q` quantile of pairwise distances,
/// or of tuple diameters for the simplicial family.
pub fn tau_from_quantile(
    data: &Dataset,
    q: f64,
    spec: &RegionSpec,
    budget: u64,
    seed: u64,
) -> Result<f64> {
    let n = data.len();
    let k = spec.arity().max(2);
    if n < k {
        return Err(Error::TooFewPoints { needed: k, got: n });
    }
    let mut stats: Vec<f64> = if k == 2 {
        let mut v = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                v.push(geometry::dist(data.row(i), data.row(j)));
            }
        }
        v
    } else {
        let diameter = |idx: &[usize]| {
            let mut d = 0.0f64;
            for a in 0..idx.len() {
                for b in 0..a {
                    d = d.max(geometry::dist(data.row(idx[a]), data.row(idx[b])));
                }
            }
            d
        };
        if binomial(n, k) <= budget as u128 {
            let mut v = Vec::new();
            for_each_combination(n, k, |c| v.push(diameter(c)));
            v
        } else {
            let mut r = rng::stream(seed, 0);
            (0..budget)
                .map(|_| diameter(&index::sample(&mut r, n, k).into_vec()))
                .collect()
        }
    };
    nearest_rank(&mut stats, q)
}

fn root(depth: f64, k: usize) -> f64 {
    match k {
        1 => depth,
        2 => depth.sqrt(),
        _ => depth.powf(1.0 / k as f64),
    }
}

/// Plug-in density surrogate `(depth / (lambda1 tau^{kp}))^{1/k}`.
pub fn tau_approximation_from_depth(depth: f64, tau: f64, constants: &GeometryConstants) -> f64 {
    let spec = &constants.spec;
    let k = spec.arity();
    root(depth, k) / (tau.powi(spec.dim as i32) * root(constants.lambda1, k))
}

/// Sample tau-approximation at every query point.
pub fn tau_approximation(
    data: &Dataset,
    queries: &Dataset,
    cfg: &DepthConfig,
    constants: &GeometryConstants,
) -> Result<Vec<f64>> {
    if cfg.tau == 0.0 {
        return Err(Error::ZeroTau);
    }
    if constants.spec != cfg.spec {
        return Err(Error::InvalidParameter(format!(
            "constants computed for {} in dimension {}, depth uses {} in dimension {}",
            constants.spec.family, constants.spec.dim, cfg.spec.family, cfg.spec.dim
        )));
    }
    let depth = sample_local_depth(data, queries, cfg)?;
    Ok(depth
        .values
        .iter()
        .map(|&d| tau_approximation_from_depth(d, cfg.tau, constants))
        .collect())
}

/// Finite difference of the rooted depth between `x` and `y`.
///
/// `precomputed` supplies the depths at `(x, y)` when already known.
pub fn finite_difference(
    data: &Dataset,
    x: &[f64],
    y: &[f64],
    cfg: &DepthConfig,
    precomputed: Option<(f64, f64)>,
) -> Result<f64> {
    let h = geometry::dist(x, y);
    if h == 0.0 {
        return Err(Error::InvalidParameter("finite difference needs y != x".into()));
    }
    let (dx, dy) = match precomputed {
        Some(pair) => pair,
        None => (depth_at(data, x, cfg)?, depth_at(data, y, cfg)?),
    };
    let k = cfg.spec.arity();
    Ok((root(dy, k) - root(dx, k)) / h)
}

/// Finite difference from known depths (used by the ascent loop).
#[inline]
pub(crate) fn rooted_difference(dx: f64, dy: f64, h: f64, k: usize) -> f64 {
    (root(dy, k) - root(dx, k)) / h
}
