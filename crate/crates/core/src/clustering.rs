//! Mode ascent over data points driven by finite differences of the rooted
//! local depth.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::depth::{rooted_difference, sample_local_depth, tau_from_quantile, DepthConfig, DEFAULT_SIMPLEX_BUDGET};
use crate::error::{Error, Result};
use crate::geometry::{self, RegionSpec};
use crate::metrics::ClusterSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    /// Order of the distance quantile that fixes tau.
    pub q: f64,
    /// Fallback neighbour count.
    pub s: usize,
    /// Neighbourhood radius.
    pub r: f64,
    /// Depth settings; `tau` is overwritten from `q`.
    pub depth: DepthConfig,
    /// Cap on accepted moves per point; `None` means `n`.
    pub max_iters: Option<usize>,
    /// Tuple budget of the simplicial quantile.
    pub quantile_budget: u64,
    pub keep_trace: bool,
}

impl ClusterParams {
    pub fn new(spec: RegionSpec) -> Self {
        Self {
            q: 0.05,
            s: 30,
            r: 0.05,
            depth: DepthConfig::new(spec, 0.0),
            max_iters: None,
            quantile_budget: DEFAULT_SIMPLEX_BUDGET,
            keep_trace: false,
        }
    }

    pub fn with_qsr(mut self, q: f64, s: usize, r: f64) -> Self {
        self.q = q;
        self.s = s;
        self.r = r;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::InvalidParameter(format!("q = {} outside [0, 1]", self.q)));
        }
        if self.s == 0 {
            return Err(Error::InvalidParameter("s must be at least 1".into()));
        }
        if !(self.r > 0.0) {
            return Err(Error::InvalidParameter(format!("r must be positive, got {}", self.r)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Terminal data point of every input (data first, then extra points).
    pub terminal: Vec<usize>,
    pub cluster_id: Vec<usize>,
    /// Data index of each cluster's terminal, by cluster id.
    pub mode_indices: Vec<usize>,
    pub modes: Vec<Vec<f64>>,
    pub trace: Option<Vec<Vec<usize>>>,
    pub tau_used: f64,
    pub depth_values: Vec<f64>,
    /// Inputs whose ascent hit the iteration cap, and extra points of zero
    /// depth.
    pub flagged: Vec<usize>,
    pub n_data: usize,
}

impl ClusterAssignment {
    pub fn k(&self) -> usize {
        self.mode_indices.len()
    }
}

/// Candidate neighbours of `x`: every data point within `r` if there are at
/// least `s` of them, otherwise the `s` nearest. `skip` and points at zero
/// distance are excluded.
fn candidates(data: &Dataset, x: &[f64], skip: Option<usize>, s: usize, r: f64) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = (0..data.len())
        .filter(|&j| Some(j) != skip)
        .map(|j| (j, geometry::dist(x, data.row(j))))
        .filter(|&(_, d)| d > 0.0)
        .collect();
    let within = all.iter().filter(|&&(_, d)| d <= r).count();
    if within >= s {
        all.retain(|&(_, d)| d <= r);
        return all;
    }
    if all.len() > s {
        let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        all.select_nth_unstable_by(s - 1, cmp);
        all.truncate(s);
    }
    all.sort_unstable_by_key(|c| c.0);
    all
}

/// Best candidate by finite difference; ties go to the smallest index.
fn best_move(cands: &[(usize, f64)], depth_here: f64, depths: &[f64], k: usize) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &(j, dist) in cands {
        let d = rooted_difference(depth_here, depths[j], dist, k);
        match best {
            Some((bj, bd)) if d < bd || (d == bd && j > bj) => {}
            _ => best = Some((j, d)),
        }
    }
    best
}

/// Smallest index sharing the exact coordinates of each row.
fn representatives(data: &Dataset) -> Vec<usize> {
    let mut first: HashMap<Vec<u64>, usize> = HashMap::new();
    (0..data.len())
        .map(|i| {
            let key: Vec<u64> = data.row(i).iter().map(|v| (v + 0.0).to_bits()).collect();
            *first.entry(key).or_insert(i)
        })
        .collect()
}

/// Local-depth mode ascent for every data point and every extra point.
pub fn cluster(data: &Dataset, extra: &Dataset, params: &ClusterParams) -> Result<ClusterAssignment> {
    params.validate()?;
    let n = data.len();
    let spec = params.depth.spec;
    let k = spec.arity();
    if n < k.max(2) {
        return Err(Error::TooFewPoints { needed: k.max(2), got: n });
    }
    if !extra.is_empty() && extra.dim() != data.dim() {
        return Err(Error::Dimension { expected: data.dim(), got: extra.dim() });
    }
    let tau = tau_from_quantile(data, params.q, &spec, params.quantile_budget, params.depth.seed)?;
    let cfg = params.depth.with_tau(tau);
    let depths = sample_local_depth(data, data, &cfg)?.values;
    let reps = representatives(data);

    // One ascent step from every data point.
    let next: Vec<Option<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if reps[i] != i {
                return None;
            }
            let cands = candidates(data, data.row(i), Some(i), params.s, params.r);
            match best_move(&cands, depths[i], &depths, k) {
                Some((j, _)) if depths[j] > depths[i] => Some(j),
                _ => None,
            }
        })
        .collect();

    let cap = params.max_iters.unwrap_or(n);
    let mut flagged = Vec::new();
    let follow = |start: usize, trace: &mut Vec<usize>| -> (usize, bool) {
        let mut z = reps[start];
        if z != start {
            trace.push(z);
        }
        let mut moves = 0;
        while let Some(j) = next[z] {
            if moves == cap {
                return (z, true);
            }
            z = j;
            moves += 1;
            trace.push(z);
        }
        (z, false)
    };

    let mut terminal = Vec::with_capacity(n + extra.len());
    let mut traces = Vec::new();
    for i in 0..n {
        let mut t = vec![i];
        let (z, capped) = follow(i, &mut t);
        if capped {
            flagged.push(i);
        }
        terminal.push(z);
        if params.keep_trace {
            traces.push(t);
        }
    }

    if !extra.is_empty() {
        let extra_depths = sample_local_depth(data, extra, &cfg)?.values;
        let first_steps: Vec<(usize, bool)> = (0..extra.len())
            .into_par_iter()
            .map(|e| {
                let x = extra.row(e);
                let cands = candidates(data, x, None, params.s, params.r);
                let off_support = extra_depths[e] == 0.0;
                if cands.iter().all(|&(j, _)| depths[j] == 0.0) {
                    // Nothing to climb towards: the nearest data point.
                    let nearest = (0..n)
                        .min_by(|&a, &b| {
                            geometry::dist(x, data.row(a)).total_cmp(&geometry::dist(x, data.row(b)))
                        })
                        .expect("n >= 2");
                    return (nearest, off_support);
                }
                (best_move(&cands, extra_depths[e], &depths, k).expect("non-empty").0, off_support)
            })
            .collect();
        for (e, &(first, off_support)) in first_steps.iter().enumerate() {
            let mut t = vec![first];
            let (z, capped) = follow(first, &mut t);
            if off_support || capped {
                flagged.push(n + e);
            }
            terminal.push(z);
            if params.keep_trace {
                traces.push(t);
            }
        }
    }

    let mut id_of: HashMap<usize, usize> = HashMap::new();
    let mut mode_indices = Vec::new();
    let cluster_id = terminal
        .iter()
        .map(|&t| {
            *id_of.entry(t).or_insert_with(|| {
                mode_indices.push(t);
                mode_indices.len() - 1
            })
        })
        .collect();
    let modes = mode_indices.iter().map(|&i| data.row(i).to_vec()).collect();
    Ok(ClusterAssignment {
        terminal,
        cluster_id,
        mode_indices,
        modes,
        trace: params.keep_trace.then_some(traces),
        tau_used: tau,
        depth_values: depths,
        flagged,
        n_data: n,
    })
}

/// Terminals with a strictly improving candidate (empty when the ascent is
/// certified).
pub fn uncertified_terminals(data: &Dataset, a: &ClusterAssignment, params: &ClusterParams) -> Vec<usize> {
    let k = params.depth.spec.arity();
    a.mode_indices
        .iter()
        .copied()
        .filter(|&t| {
            let cands = candidates(data, data.row(t), Some(t), params.s, params.r);
            cands.iter().any(|&(j, dist)| rooted_difference(a.depth_values[t], a.depth_values[j], dist, k) > 0.0)
        })
        .collect()
}

/// Partition of inputs by cluster id.
pub fn assignment_to_clusterset(a: &ClusterAssignment, restrict_to_data: bool) -> ClusterSet {
    let ids = if restrict_to_data { &a.cluster_id[..a.n_data] } else { &a.cluster_id[..] };
    ClusterSet::from_labels(ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Family;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn toy() -> Dataset {
        Dataset::from_scalars(&[0.0, 0.1, 0.2, 5.0, 5.1, 5.2]).unwrap()
    }

    #[test]
    fn toy_has_two_clusters() {
        let params = ClusterParams::new(RegionSpec::lens(1)).with_qsr(0.4, 2, 0.5);
        let a = cluster(&toy(), &Dataset::empty(1), &params).unwrap();
        assert_eq!(a.k(), 2);
        assert_eq!(a.terminal, vec![1, 1, 1, 4, 4, 4]);
        let cs = assignment_to_clusterset(&a, true);
        assert_eq!(cs.canonical(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
        assert_eq!(assignment_to_clusterset(&a, false), cs);
        assert!(uncertified_terminals(&toy(), &a, &params).is_empty());
        // tau is the 6th smallest of the 15 pairwise gaps
        assert!((a.tau_used - 0.2).abs() < 1e-12);
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let d = Dataset::from_rows(&[[1.0, 2.0]; 5]).unwrap();
        let params = ClusterParams::new(RegionSpec::lens(2)).with_qsr(0.5, 2, 0.1);
        let a = cluster(&d, &Dataset::empty(2), &params).unwrap();
        assert_eq!(a.k(), 1);
        assert_eq!(a.terminal, vec![0; 5]);
    }

    #[test]
    fn extra_points_step_into_the_data() {
        let params = ClusterParams::new(RegionSpec::lens(1)).with_qsr(0.4, 2, 0.5);
        let extra = Dataset::from_scalars(&[0.05, 5.15, 100.0]).unwrap();
        let a = cluster(&toy(), &extra, &params).unwrap();
        assert_eq!(&a.terminal[6..], &[1, 4, 4]);
        assert_eq!(a.flagged, vec![8]);
        assert_eq!(assignment_to_clusterset(&a, true).n(), 6);
        assert_eq!(assignment_to_clusterset(&a, false).n(), 9);
    }

    #[test]
    fn traces_are_strictly_ascending() {
        let mut r = rng::stream(3, 0);
        let rows: Vec<[f64; 2]> = (0..150).map(|_| [r.random(), r.random::<f64>() * 2.0]).collect();
        let d = Dataset::from_rows(&rows).unwrap();
        let mut params = ClusterParams::new(RegionSpec::lens(2)).with_qsr(0.1, 5, 0.05);
        params.keep_trace = true;
        let a = cluster(&d, &Dataset::empty(2), &params).unwrap();
        for t in a.trace.as_ref().unwrap() {
            for w in t.windows(2) {
                assert!(a.depth_values[w[1]] > a.depth_values[w[0]]);
            }
            assert!(t.len() <= d.len());
        }
        assert!(uncertified_terminals(&d, &a, &params).is_empty());
        assert!(a.flagged.is_empty());
    }

    #[test]
    fn iteration_cap_is_flagged() {
        let mut r = rng::stream(4, 0);
        let rows: Vec<f64> = (0..80).map(|_| r.random()).collect();
        let d = Dataset::from_scalars(&rows).unwrap();
        let mut params = ClusterParams::new(RegionSpec::lens(1)).with_qsr(0.2, 3, 0.01);
        params.max_iters = Some(0);
        let a = cluster(&d, &Dataset::empty(1), &params).unwrap();
        assert!(!a.flagged.is_empty());
    }

    #[test]
    fn parameter_errors() {
        let d = toy();
        let p = ClusterParams::new(RegionSpec::lens(1));
        assert!(cluster(&d, &Dataset::empty(1), &p.clone().with_qsr(0.1, 0, 0.1)).is_err());
        assert!(cluster(&d, &Dataset::empty(1), &p.clone().with_qsr(0.1, 2, 0.0)).is_err());
        let one = Dataset::from_scalars(&[1.0]).unwrap();
        assert!(cluster(&one, &Dataset::empty(1), &p).is_err());
    }

    fn random_data(seed: u64, n: usize, p: usize) -> Dataset {
        let mut r = rng::stream(seed, 1);
        let v: Vec<f64> = (0..n * p).map(|_| r.random::<f64>() * 3.0).collect();
        Dataset::from_flat(p, v).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn permutation_equivariance(seed in 0u64..1000, perm_seed in 0u64..1000) {
            let d = random_data(seed, 60, 2);
            let params = ClusterParams::new(RegionSpec::lens(2)).with_qsr(0.2, 6, 0.2);
            let a = cluster(&d, &Dataset::empty(2), &params).unwrap();
            let mut perm: Vec<usize> = (0..60).collect();
            let mut r = rng::stream(perm_seed, 2);
            for i in (1..60).rev() {
                perm.swap(i, r.random_range(0..=i));
            }
            let pd = d.select(&perm);
            let b = cluster(&pd, &Dataset::empty(2), &params).unwrap();
            for (new, &old) in perm.iter().enumerate() {
                prop_assert_eq!(perm[b.terminal[new]], a.terminal[old]);
            }
        }

        #[test]
        fn scale_consistency(seed in 0u64..1000, fam in 0usize..4, up in any::<bool>()) {
            let family = [Family::Lens, Family::Spherical, Family::BetaSkeleton { beta: 1.5 }, Family::Simplicial][fam];
            let n = if fam == 3 { 30 } else { 60 };
            let d = random_data(seed, n, 2);
            let c = if up { 2.0 } else { 0.5 };
            let params = ClusterParams::new(RegionSpec::new(family, 2).unwrap()).with_qsr(0.2, 5, 0.2);
            let mut scaled = params.clone();
            scaled.r *= c;
            let a = cluster(&d, &Dataset::empty(2), &params).unwrap();
            let b = cluster(&d.scaled(c), &Dataset::empty(2), &scaled).unwrap();
            prop_assert_eq!(a.cluster_id, b.cluster_id);
            prop_assert_eq!(a.tau_used * c, b.tau_used);
        }
    }
}
