//! Partition comparison by symmetric differences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Largest family size solved by enumerating injections.
pub const BRUTE_FORCE_LIMIT: usize = 8;

/// Disjoint, non-empty blocks of sample indices `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSet {
    blocks: Vec<Vec<usize>>,
    n: usize,
}

impl ClusterSet {
    pub fn new(mut blocks: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for b in &mut blocks {
            if b.is_empty() {
                return Err(Error::InvalidParameter("empty cluster block".into()));
            }
            b.sort_unstable();
            for &i in b.iter() {
                if i >= n {
                    return Err(Error::InvalidParameter(format!("index {i} outside 0..{n}")));
                }
                if seen[i] {
                    return Err(Error::InvalidParameter(format!("index {i} appears in two blocks")));
                }
                seen[i] = true;
            }
        }
        Ok(Self { blocks, n })
    }

    /// Groups indices by label, blocks ordered by first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut slot: std::collections::HashMap<usize, usize> = Default::default();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            let b = *slot.entry(l).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[b].push(i);
        }
        Self { blocks, n: labels.len() }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn covers(&self) -> bool {
        self.blocks.iter().map(Vec::len).sum::<usize>() == self.n
    }

    /// Block index of every sample point (`usize::MAX` when uncovered).
    fn labels(&self) -> Vec<usize> {
        let mut l = vec![usize::MAX; self.n];
        for (b, block) in self.blocks.iter().enumerate() {
            for &i in block {
                l[i] = b;
            }
        }
        l
    }

    /// Blocks as sorted index sets, sorted, for comparisons that ignore labels.
    pub fn canonical(&self) -> Vec<Vec<usize>> {
        let mut b = self.blocks.clone();
        b.sort();
        b
    }
}

fn check_pair(c: &ClusterSet, d: &ClusterSet) -> Result<()> {
    if c.n != d.n {
        return Err(Error::SizeMismatch(c.n, d.n));
    }
    if c.is_empty() || d.is_empty() {
        return Err(Error::InvalidParameter("cluster sets must be non-empty".into()));
    }
    if !c.covers() || !d.covers() {
        return Err(Error::Precondition("cluster sets must cover every sample point".into()));
    }
    Ok(())
}

/// `|C_i Δ D_j|` for every pair of blocks.
pub fn symmetric_difference_matrix(c: &ClusterSet, d: &ClusterSet) -> Vec<Vec<usize>> {
    let (lc, ld) = (c.labels(), d.labels());
    let mut inter = vec![vec![0usize; d.len()]; c.len()];
    for i in 0..c.n {
        if lc[i] != usize::MAX && ld[i] != usize::MAX {
            inter[lc[i]][ld[i]] += 1;
        }
    }
    (0..c.len())
        .map(|i| {
            (0..d.len())
                .map(|j| c.blocks[i].len() + d.blocks[j].len() - 2 * inter[i][j])
                .collect()
        })
        .collect()
}

/// Empirical Hausdorff distance between two partitions.
pub fn hausdorff_distance(c: &ClusterSet, d: &ClusterSet) -> Result<f64> {
    check_pair(c, d)?;
    let m = symmetric_difference_matrix(c, d);
    let rows = m.iter().map(|r| *r.iter().min().unwrap()).max().unwrap();
    let cols = (0..d.len()).map(|j| m.iter().map(|r| r[j]).min().unwrap()).max().unwrap();
    Ok(rows.max(cols) as f64 / c.n as f64)
}

/// A matching of the smaller family into the larger one.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    /// `assign[i]` is the larger-family block matched to smaller block `i`.
    pub assign: Vec<usize>,
    pub matched_difference: usize,
    pub unmatched_size: usize,
}

impl Matching {
    fn value(&self, eta: f64, n: usize) -> f64 {
        (self.matched_difference as f64 + eta * self.unmatched_size as f64) / (2.0 * n as f64)
    }
}

/// Orients the problem so rows are the smaller family.
fn oriented<'a>(c: &'a ClusterSet, d: &'a ClusterSet) -> (Vec<Vec<usize>>, &'a ClusterSet) {
    if c.len() <= d.len() {
        (symmetric_difference_matrix(c, d), d)
    } else {
        (symmetric_difference_matrix(d, c), c)
    }
}

fn finish(delta: &[Vec<usize>], large: &ClusterSet, assign: Vec<usize>) -> Matching {
    let mut used = vec![false; large.len()];
    let mut matched = 0;
    for (i, &j) in assign.iter().enumerate() {
        used[j] = true;
        matched += delta[i][j];
    }
    let unmatched = (0..large.len()).filter(|&j| !used[j]).map(|j| large.blocks[j].len()).sum();
    Matching { assign, matched_difference: matched, unmatched_size: unmatched }
}

fn cost(delta: &[Vec<usize>], large: &ClusterSet, i: usize, j: usize, eta: f64) -> f64 {
    // The unmatched penalty is eta * (sum of all sizes - matched sizes).
    delta[i][j] as f64 - eta * large.blocks[j].len() as f64
}

/// Optimal matching by enumerating every injection.
pub fn brute_force_matching(c: &ClusterSet, d: &ClusterSet, eta: f64) -> Result<Matching> {
    check_pair(c, d)?;
    let (delta, large) = oriented(c, d);
    let (l, s) = (delta.len(), large.len());
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut current = Vec::with_capacity(l);
    let mut used = vec![false; s];
    fn rec(
        i: usize,
        acc: f64,
        delta: &[Vec<usize>],
        large: &ClusterSet,
        eta: f64,
        current: &mut Vec<usize>,
        used: &mut [bool],
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if i == delta.len() {
            if best.as_ref().is_none_or(|b| acc < b.0) {
                *best = Some((acc, current.clone()));
            }
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                current.push(j);
                let c = cost(delta, large, i, j, eta);
                rec(i + 1, acc + c, delta, large, eta, current, used, best);
                current.pop();
                used[j] = false;
            }
        }
    }
    rec(0, 0.0, &delta, large, eta, &mut current, &mut used, &mut best);
    debug_assert!(l <= s);
    Ok(finish(&delta, large, best.expect("at least one injection").1))
}

/// Rectangular assignment (rows <= columns) by the Hungarian method with
/// potentials. Returns the column chosen for each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "hungarian needs rows <= columns");
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut ans = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            ans[p[j] - 1] = j - 1;
        }
    }
    ans
}

/// Optimal matching by the assignment solver.
pub fn assignment_matching(c: &ClusterSet, d: &ClusterSet, eta: f64) -> Result<Matching> {
    check_pair(c, d)?;
    let (delta, large) = oriented(c, d);
    let costs: Vec<Vec<f64>> = (0..delta.len())
        .map(|i| (0..large.len()).map(|j| cost(&delta, large, i, j, eta)).collect())
        .collect();
    let assign = hungarian(&costs);
    Ok(finish(&delta, large, assign))
}

/// Empirical probability distance with penalty `eta` on unmatched blocks.
pub fn probability_distance(c: &ClusterSet, d: &ClusterSet, eta: f64) -> Result<f64> {
    if !(eta >= 0.0) {
        return Err(Error::InvalidParameter(format!("eta must be nonnegative, got {eta}")));
    }
    let m = if c.len().max(d.len()) <= BRUTE_FORCE_LIMIT {
        brute_force_matching(c, d, eta)?
    } else {
        assignment_matching(c, d, eta)?
    };
    Ok(m.value(eta, c.n))
}

/// Probability distance from an explicit matching; used to compare solvers.
pub fn matching_value(m: &Matching, eta: f64, n: usize) -> f64 {
    m.value(eta, n)
}

/// Replications finding fewer, exactly, and more clusters than the truth.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountSummary {
    pub lower: usize,
    pub exact: usize,
    pub higher: usize,
}

impl std::fmt::Display for CountSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}) {} ({})", self.lower, self.exact, self.higher)
    }
}

pub fn count_summary(true_k: usize, estimated: &[usize]) -> CountSummary {
    let mut s = CountSummary::default();
    for &k in estimated {
        match k.cmp(&true_k) {
            std::cmp::Ordering::Less => s.lower += 1,
            std::cmp::Ordering::Equal => s.exact += 1,
            std::cmp::Ordering::Greater => s.higher += 1,
        }
    }
    s
}

/// Errors of one replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationErrors {
    pub hausdorff: f64,
    /// One value per entry of the eta list.
    pub prob_distance: Vec<f64>,
    pub estimated_k: usize,
}

impl ReplicationErrors {
    pub fn compute(truth: &ClusterSet, estimate: &ClusterSet, etas: &[f64]) -> Result<Self> {
        Ok(Self {
            hausdorff: hausdorff_distance(truth, estimate)?,
            prob_distance: etas
                .iter()
                .map(|&e| probability_distance(truth, estimate, e))
                .collect::<Result<_>>()?,
            estimated_k: estimate.len(),
        })
    }
}

/// Mean and sample standard deviation; the deviation is absent for one value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: Option<f64>,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Self {
        Self {
            mean: stats::mean(values),
            sd: (values.len() > 1).then(|| stats::std_dev(values)),
        }
    }
}

impl std::fmt::Display for MeanSd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.sd {
            Some(sd) => write!(f, "{:.2} ({:.2})", self.mean, sd),
            None => write!(f, "{:.2}", self.mean),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub hausdorff: MeanSd,
    pub etas: Vec<f64>,
    pub prob_distance: Vec<MeanSd>,
    pub counts: CountSummary,
    pub replications: usize,
}

impl ErrorReport {
    pub fn from_replications(true_k: usize, etas: &[f64], reps: &[ReplicationErrors]) -> Self {
        let h: Vec<f64> = reps.iter().map(|r| r.hausdorff).collect();
        let prob = (0..etas.len())
            .map(|e| MeanSd::of(&reps.iter().map(|r| r.prob_distance[e]).collect::<Vec<_>>()))
            .collect();
        let ks: Vec<usize> = reps.iter().map(|r| r.estimated_k).collect();
        Self {
            hausdorff: MeanSd::of(&h),
            etas: etas.to_vec(),
            prob_distance: prob,
            counts: count_summary(true_k, &ks),
            replications: reps.len(),
        }
    }
}
