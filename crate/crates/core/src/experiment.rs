//! Replication studies and plot-data grids.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::clustering::{assignment_to_clusterset, cluster, ClusterParams};
use crate::constants::GeometryConstants;
use crate::data::Dataset;
use crate::depth::{tau_approximation, DepthConfig};
use crate::error::{Error, Result};
use crate::geometry::RegionSpec;
use crate::metrics::{ErrorReport, ReplicationErrors};
use crate::models::{density_by_name, find_modes, grid_2d, true_partition, AnalyticDensity, GradientFlowConfig};
use crate::rng::derive_seed;
use crate::validate::grid_1d;

/// Short method name such as `LLD-0.1-50`.
pub fn method_label(spec: &RegionSpec, q: f64, s: usize) -> String {
    format!("{}-{q}-{s}", spec.family.label())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub density: String,
    pub n: usize,
    pub replications: usize,
    pub params: ClusterParams,
    pub etas: Vec<f64>,
    pub flow: GradientFlowConfig,
    pub seed: u64,
}

impl BenchConfig {
    pub fn new(density: &str, n: usize, replications: usize, params: ClusterParams, seed: u64) -> Self {
        Self {
            density: density.into(),
            n,
            replications,
            params,
            etas: vec![0.0, 1.0],
            flow: GradientFlowConfig::default(),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: String,
    pub density: String,
    pub true_k: usize,
    pub report: ErrorReport,
}

impl fmt::Display for TableRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} | {} | H {}", self.density, self.method, self.report.hausdorff)?;
        for (eta, p) in self.report.etas.iter().zip(&self.report.prob_distance) {
            write!(f, " | P(eta={eta}) {p}")?;
        }
        write!(f, " | k {}", self.report.counts)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub config: BenchConfig,
    pub row: TableRow,
    pub per_replication: Vec<ReplicationErrors>,
}

/// Number of modes of a benchmark density, from flows started at a large
/// sample and at the component means.
pub fn true_mode_count(density: &AnalyticDensity, flow: &GradientFlowConfig, seed: u64) -> Result<usize> {
    let mut starts = density.sample(2000, seed)?;
    if let Some(m) = density.as_mixture() {
        for mu in m.means() {
            starts.push(mu)?;
        }
    }
    Ok(find_modes(density, &starts, flow)?.len())
}

/// Sample, cluster, compare with the gradient-flow partition, repeat.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchResult> {
    if cfg.replications == 0 {
        return Err(Error::InvalidParameter("replications must be at least 1".into()));
    }
    let density = density_by_name(&cfg.density)?;
    if density.dim() != cfg.params.depth.spec.dim {
        return Err(Error::Dimension { expected: density.dim(), got: cfg.params.depth.spec.dim });
    }
    let true_k = true_mode_count(&density, &cfg.flow, derive_seed(cfg.seed, u64::MAX))?;
    let mut reps = Vec::with_capacity(cfg.replications);
    for r in 0..cfg.replications {
        let seed = derive_seed(cfg.seed, r as u64);
        let data = density.sample(cfg.n, seed)?;
        let mut params = cfg.params.clone();
        params.depth.seed = seed;
        let est = cluster(&data, &Dataset::empty(data.dim()), &params)?;
        let truth = true_partition(&density, &data, &cfg.flow)?;
        reps.push(ReplicationErrors::compute(&truth.clusters, &assignment_to_clusterset(&est, true), &cfg.etas)?);
    }
    let row = TableRow {
        method: method_label(&cfg.params.depth.spec, cfg.params.q, cfg.params.s),
        density: density.name.clone(),
        true_k,
        report: ErrorReport::from_replications(true_k, &cfg.etas, &reps),
    };
    Ok(BenchResult { config: cfg.clone(), row, per_replication: reps })
}

/// Evaluation grid for plotting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Points per axis.
    pub points: usize,
}

impl PlotGrid {
    pub fn build(&self) -> Result<Dataset> {
        if self.points == 0 || self.lo.len() != self.hi.len() {
            return Err(Error::InvalidParameter("grid needs at least one point and matching bounds".into()));
        }
        match self.lo.len() {
            1 => Ok(grid_1d(self.lo[0], self.hi[0], self.points)),
            2 => Ok(grid_2d([self.lo[0], self.lo[1]], [self.hi[0], self.hi[1]], self.points)),
            p => Err(Error::Precondition(format!("plot grids need p <= 2, got {p}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// `f_{tau,n}` of the lens family on a grid for every `tau`, with the
/// analytic density as an extra column when given.
pub fn plot_data(
    data: &Dataset,
    grid: &Dataset,
    taus: &[f64],
    density: Option<&AnalyticDensity>,
    seed: u64,
) -> Result<PlotTable> {
    let p = data.dim();
    if p > 2 {
        return Err(Error::Precondition(format!("plot data needs p <= 2, got {p}")));
    }
    if grid.dim() != p {
        return Err(Error::Dimension { expected: p, got: grid.dim() });
    }
    let spec = RegionSpec::lens(p);
    let constants = GeometryConstants::for_scaling(&spec, 1_000_000, seed)?;
    let mut header = crate::io::coordinate_names(p);
    let mut columns = Vec::new();
    if let Some(d) = density {
        header.push("density".into());
        columns.push(grid.rows().map(|x| d.pdf(x)).collect::<Vec<_>>());
    }
    for &tau in taus {
        header.push(format!("f_tau_{tau}"));
        columns.push(tau_approximation(data, grid, &DepthConfig::new(spec, tau), &constants)?);
    }
    let rows = (0..grid.len())
        .map(|i| grid.row(i).iter().copied().chain(columns.iter().map(|c| c[i])).collect())
        .collect();
    Ok(PlotTable { header, rows })
}

/// Centred 5-point moving average; the window shrinks at the ends.
pub fn smooth5(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 3).min(n);
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Local maxima of a sequence: sign changes from rising to falling in the
/// successive differences, skipping flat steps.
pub fn count_local_maxima(values: &[f64]) -> usize {
    let mut count = 0;
    let mut rising = false;
    for w in values.windows(2) {
        let d = w[1] - w[0];
        if d > 0.0 {
            rising = true;
        } else if d < 0.0 {
            if rising {
                count += 1;
            }
            rising = false;
        }
    }
    if rising {
        // Still rising at the right edge.
        count += 1;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Family;

    #[test]
    fn labels() {
        assert_eq!(method_label(&RegionSpec::lens(2), 0.1, 50), "LLD-0.1-50");
        let s = RegionSpec::new(Family::Simplicial, 2).unwrap();
        assert_eq!(method_label(&s, 0.05, 30), "LSD-0.05-30");
    }

    #[test]
    fn maxima_counting() {
        assert_eq!(count_local_maxima(&[0.0, 1.0, 0.0, 1.0, 0.0]), 2);
        assert_eq!(count_local_maxima(&[0.0, 1.0, 1.0, 0.0]), 1);
        assert_eq!(count_local_maxima(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(count_local_maxima(&[3.0, 2.0, 1.0]), 0);
        assert_eq!(count_local_maxima(&[1.0, 2.0, 3.0]), 1);
        assert_eq!(smooth5(&[0.0, 0.0, 5.0, 0.0, 0.0]), vec![5.0 / 3.0, 1.25, 1.0, 1.25, 5.0 / 3.0]);
    }

    #[test]
    fn plot_grid_shapes() {
        let g = PlotGrid { lo: vec![0.0], hi: vec![1.0], points: 1 };
        assert_eq!(g.build().unwrap().len(), 1);
        let g = PlotGrid { lo: vec![0.0; 2], hi: vec![1.0; 2], points: 4 };
        assert_eq!(g.build().unwrap().len(), 16);
        let g = PlotGrid { lo: vec![0.0; 3], hi: vec![1.0; 3], points: 4 };
        assert!(g.build().is_err());
    }

    #[test]
    fn plot_columns() {
        let d = density_by_name("normal").unwrap();
        let data = d.sample(300, 1).unwrap();
        let grid = grid_1d(-1.0, 1.0, 5);
        let t = plot_data(&data, &grid, &[0.5, 1.0], Some(&d), 1).unwrap();
        assert_eq!(t.header, vec!["x1", "density", "f_tau_0.5", "f_tau_1"]);
        assert_eq!(t.rows.len(), 5);
        assert!((t.rows[2][1] - 0.3989422804014327).abs() < 1e-15);
    }

    #[test]
    fn small_bench_runs() {
        let params = ClusterParams::new(RegionSpec::lens(2)).with_qsr(0.1, 30, 0.05);
        let cfg = BenchConfig::new("bimodal", 200, 2, params, 7);
        let res = run_bench(&cfg).unwrap();
        assert_eq!(res.row.true_k, 2);
        assert_eq!(res.per_replication.len(), 2);
        assert_eq!(res.row.report.counts.lower + res.row.report.counts.exact + res.row.report.counts.higher, 2);
        assert_eq!(run_bench(&cfg).unwrap(), res);
        let mut one = cfg.clone();
        one.replications = 1;
        assert!(run_bench(&one).unwrap().row.report.hausdorff.sd.is_none());
        assert!(run_bench(&BenchConfig::new("nope", 10, 1, cfg.params.clone(), 1)).is_err());
    }
}
