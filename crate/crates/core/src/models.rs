//! Benchmark densities, their samplers, and the gradient-flow labelling of
//! points by the mode whose basin they fall in.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::ClusterSet;
use crate::oracle::DensityFn;
use crate::quadrature::{integrate_2d, QuadratureConfig};
use crate::rng::{self, StreamRng};

/// Half-width of the box the circular densities are truncated to.
pub const CIRCULAR_HALF_WIDTH: f64 = 4.0;
/// Gaussian bounding boxes extend this many standard deviations.
const GAUSS_BOX_SDS: f64 = 12.0;

/// Weighted sum of multivariate normal densities.
#[derive(Clone, Debug)]
pub struct MixtureModel {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<DMatrix<f64>>,
    /// Row-major inverse covariances.
    precisions: Vec<Vec<f64>>,
    /// Row-major lower Cholesky factors.
    factors: Vec<Vec<f64>>,
    /// `w_i / sqrt((2 pi)^p det Sigma_i)`.
    scales: Vec<f64>,
    dim: usize,
}

impl MixtureModel {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, covariances: Vec<DMatrix<f64>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || covariances.len() != k {
            return Err(Error::InvalidParameter("mixture needs matching weights, means and covariances".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidParameter("mixture weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("mixture weights sum to {total}, not 1")));
        }
        let dim = means[0].len();
        let mut precisions = Vec::with_capacity(k);
        let mut factors = Vec::with_capacity(k);
        let mut scales = Vec::with_capacity(k);
        for i in 0..k {
            let s = &covariances[i];
            if means[i].len() != dim || s.nrows() != dim || s.ncols() != dim {
                return Err(Error::Dimension { expected: dim, got: means[i].len() });
            }
            if (s - s.transpose()).abs().max() > 1e-12 {
                return Err(Error::InvalidParameter(format!("covariance {i} is not symmetric")));
            }
            let chol = s
                .clone()
                .cholesky()
                .ok_or_else(|| Error::InvalidParameter(format!("covariance {i} is not positive definite")))?;
            let l = chol.l();
            let det: f64 = l.diagonal().iter().map(|d| d * d).product();
            let inv = chol.inverse();
            precisions.push(inv.transpose().iter().copied().collect());
            factors.push(l.transpose().iter().copied().collect());
            scales.push(weights[i] / ((2.0 * PI).powi(dim as i32) * det).sqrt());
        }
        Ok(Self { weights, means, covariances, precisions, factors, scales, dim })
    }

    /// Components with covariance `sd_i^2 I`.
    pub fn isotropic(weights: Vec<f64>, means: Vec<Vec<f64>>, sds: Vec<f64>) -> Result<Self> {
        let dim = means.first().map_or(1, Vec::len);
        let covs = sds.iter().map(|s| DMatrix::identity(dim, dim) * (s * s)).collect();
        Self::new(weights, means, covs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.covariances
    }

    /// Component `i` density (weighted) and `P_i (x - mu_i)`.
    fn component(&self, i: usize, x: &[f64], pd: &mut [f64]) -> f64 {
        let p = self.dim;
        let prec = &self.precisions[i];
        let mu = &self.means[i];
        let mut quad = 0.0;
        for r in 0..p {
            let mut acc = 0.0;
            for c in 0..p {
                acc += prec[r * p + c] * (x[c] - mu[c]);
            }
            pd[r] = acc;
            quad += (x[r] - mu[r]) * acc;
        }
        self.scales[i] * (-0.5 * quad).exp()
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        let mut pd = vec![0.0; self.dim];
        (0..self.weights.len()).map(|i| self.component(i, x, &mut pd)).sum()
    }

    pub fn pdf_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut pd = vec![0.0; self.dim];
        let mut grad = vec![0.0; self.dim];
        let mut f = 0.0;
        for i in 0..self.weights.len() {
            let c = self.component(i, x, &mut pd);
            f += c;
            for d in 0..self.dim {
                grad[d] -= c * pd[d];
            }
        }
        (f, grad)
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let p = self.dim;
        let mut pd = vec![0.0; p];
        let mut h = DMatrix::zeros(p, p);
        for i in 0..self.weights.len() {
            let c = self.component(i, x, &mut pd);
            let prec = &self.precisions[i];
            for r in 0..p {
                for s in 0..p {
                    h[(r, s)] += c * (pd[r] * pd[s] - prec[r * p + s]);
                }
            }
        }
        h
    }

    fn sample_one(&self, r: &mut StreamRng, out: &mut [f64]) {
        let u: f64 = r.random();
        let mut acc = 0.0;
        let mut comp = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                comp = i;
                break;
            }
        }
        let p = self.dim;
        let z: Vec<f64> = (0..p).map(|_| StandardNormal.sample(r)).collect();
        let l = &self.factors[comp];
        for row in 0..p {
            let mut v = self.means[comp][row];
            for c in 0..=row {
                v += l[row * p + c] * z[c];
            }
            out[row] = v;
        }
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for (mu, s) in self.means.iter().zip(&self.covariances) {
            for d in 0..self.dim {
                let w = GAUSS_BOX_SDS * s[(d, d)].sqrt();
                lo[d] = lo[d].min(mu[d] - w);
                hi[d] = hi[d].max(mu[d] + w);
            }
        }
        (lo, hi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircularKind {
    Circular2,
    Circular2Cauchy,
    Circular3,
    Circular4Cauchy,
}

impl CircularKind {
    /// Unnormalised density.
    pub fn raw(self, x: &[f64]) -> f64 {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let c = if r > 0.0 { x[0] / r } else { 0.0 };
        match self {
            Self::Circular2 => {
                0.5 * (-12.5 * (r - 2.0).powi(2)).exp() * (1.1 - c)
                    + 0.5 * (-12.5 * (r - 0.5).powi(2)).exp() * (1.1 + c)
            }
            Self::Circular2Cauchy => {
                0.5 * (1.1 + c) / (1.0 + 25.0 * (r - 2.0).powi(2))
                    + 0.5 * (1.1 + c) / (1.0 + 25.0 * (r - 0.5).powi(2))
            }
            Self::Circular3 => {
                let k = 200.0 / 9.0;
                0.3 * (-k * (r - 1.5).powi(2)).exp() * (1.1 - c)
                    + 0.15 * (-k * (r - 2.5).powi(2)).exp() * (1.1 + c)
                    + 0.55 * (-k * (r - 0.5).powi(2)).exp() * (1.1 + c)
            }
            Self::Circular4Cauchy => {
                // cos(4 arccos c) is the Chebyshev polynomial T_4(c).
                let t4 = 8.0 * c.powi(4) - 8.0 * c * c + 1.0;
                (2.0 + t4) / (1.0 + (r - 2.0).powi(2))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum DensityKind {
    Mixture(MixtureModel),
    /// Uniform on the box `[lo, hi]`.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Circular density truncated to `[-4, 4]^2`, with its normaliser and the
    /// rejection-sampling envelope of the raw function.
    Circular { kind: CircularKind, normalizer: f64, envelope: f64 },
}

/// A named benchmark density.
#[derive(Clone, Debug)]
pub struct AnalyticDensity {
    pub name: String,
    pub kind: DensityKind,
}

const FD_STEP: f64 = 1e-6;
/// Relative slack of the ascent guard.
const ROUNDOFF: f64 = 8.0 * f64::EPSILON;

impl AnalyticDensity {
    pub fn mixture(name: &str, m: MixtureModel) -> Self {
        Self { name: name.into(), kind: DensityKind::Mixture(m) }
    }

    pub fn uniform(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidParameter("uniform box needs lo < hi in every coordinate".into()));
        }
        Ok(Self { name: "uniform".into(), kind: DensityKind::UniformBox { lo, hi } })
    }

    /// Circular density with its normaliser computed by quadrature.
    pub fn circular(kind: CircularKind) -> Result<Self> {
        let w = CIRCULAR_HALF_WIDTH;
        let q = QuadratureConfig { abs_tol: 1e-9, rel_tol: 1e-11, ..Default::default() };
        // Split at the axes where the angular factor is not smooth.
        let mut z = 0.0;
        for (a, b) in [(-w, 0.0), (0.0, w)] {
            for (c, d) in [(-w, 0.0), (0.0, w)] {
                z += integrate_2d(|x, y| kind.raw(&[x, y]), a, b, |_| c, |_| d, &q)?;
            }
        }
        let mut envelope = 0.0f64;
        let grid = 801;
        for i in 0..grid {
            for j in 0..grid {
                let x = -w + 2.0 * w * i as f64 / (grid - 1) as f64;
                let y = -w + 2.0 * w * j as f64 / (grid - 1) as f64;
                envelope = envelope.max(kind.raw(&[x, y]));
            }
        }
        let name = match kind {
            CircularKind::Circular2 => "circular2",
            CircularKind::Circular2Cauchy => "circular2-cauchy",
            CircularKind::Circular3 => "circular3",
            CircularKind::Circular4Cauchy => "circular4-cauchy",
        };
        Ok(Self {
            name: name.into(),
            kind: DensityKind::Circular { kind, normalizer: z, envelope: 1.1 * envelope },
        })
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            DensityKind::Mixture(m) => m.dim(),
            DensityKind::UniformBox { lo, .. } => lo.len(),
            DensityKind::Circular { .. } => 2,
        }
    }

    pub fn as_mixture(&self) -> Option<&MixtureModel> {
        match &self.kind {
            DensityKind::Mixture(m) => Some(m),
            _ => None,
        }
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DensityKind::Mixture(m) => m.pdf(x),
            DensityKind::UniformBox { lo, hi } => {
                if x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *a <= *v && *v <= *b) {
                    1.0 / lo.iter().zip(hi).map(|(a, b)| b - a).product::<f64>()
                } else {
                    0.0
                }
            }
            DensityKind::Circular { kind, normalizer, .. } => {
                if x.iter().all(|v| v.abs() <= CIRCULAR_HALF_WIDTH) {
                    kind.raw(x) / normalizer
                } else {
                    0.0
                }
            }
        }
    }

    /// Density and gradient; closed form for mixtures, central differences
    /// otherwise.
    pub fn density_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        match &self.kind {
            DensityKind::Mixture(m) => m.pdf_grad(x),
            DensityKind::UniformBox { .. } => (self.pdf(x), vec![0.0; x.len()]),
            DensityKind::Circular { .. } => {
                let mut y = x.to_vec();
                let grad = (0..x.len())
                    .map(|d| {
                        y[d] = x[d] + FD_STEP;
                        let up = self.pdf(&y);
                        y[d] = x[d] - FD_STEP;
                        let down = self.pdf(&y);
                        y[d] = x[d];
                        (up - down) / (2.0 * FD_STEP)
                    })
                    .collect();
                (self.pdf(x), grad)
            }
        }
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        if let DensityKind::Mixture(m) = &self.kind {
            return m.hessian(x);
        }
        let p = x.len();
        let h = 1e-4;
        let mut out = DMatrix::zeros(p, p);
        let mut y = x.to_vec();
        for d in 0..p {
            y[d] = x[d] + h;
            let (_, up) = self.density_and_grad(&y);
            y[d] = x[d] - h;
            let (_, down) = self.density_and_grad(&y);
            y[d] = x[d];
            for e in 0..p {
                out[(e, d)] = (up[e] - down[e]) / (2.0 * h);
            }
        }
        (&out + out.transpose()) * 0.5
    }

    /// `n` independent draws.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        let p = self.dim();
        let mut values = vec![0.0; n * p];
        // One substream per block of rows keeps the output independent of
        // the worker count.
        const BLOCK: usize = 256;
        values
            .par_chunks_mut(BLOCK * p)
            .enumerate()
            .try_for_each(|(b, chunk)| {
                let mut r = rng::stream(seed, b as u64);
                for row in chunk.chunks_exact_mut(p) {
                    self.sample_one(&mut r, row)?;
                }
                Ok::<(), Error>(())
            })?;
        if n == 0 {
            return Ok(Dataset::empty(p));
        }
        Dataset::from_flat(p, values)
    }

    fn sample_one(&self, r: &mut StreamRng, out: &mut [f64]) -> Result<()> {
        match &self.kind {
            DensityKind::Mixture(m) => m.sample_one(r, out),
            DensityKind::UniformBox { lo, hi } => {
                for d in 0..lo.len() {
                    out[d] = lo[d] + (hi[d] - lo[d]) * r.random::<f64>();
                }
            }
            DensityKind::Circular { kind, envelope, .. } => loop {
                let w = CIRCULAR_HALF_WIDTH;
                let x = [w * (2.0 * r.random::<f64>() - 1.0), w * (2.0 * r.random::<f64>() - 1.0)];
                let f = kind.raw(&x);
                if f > *envelope {
                    return Err(Error::Envelope { value: f, envelope: *envelope });
                }
                if r.random::<f64>() * envelope <= f {
                    out.copy_from_slice(&x);
                    break;
                }
            },
        }
        Ok(())
    }
}

impl DensityFn for AnalyticDensity {
    fn dim(&self) -> usize {
        AnalyticDensity::dim(self)
    }

    fn pdf(&self, x: &[f64]) -> f64 {
        AnalyticDensity::pdf(self, x)
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.kind {
            DensityKind::Mixture(m) => m.bounding_box(),
            DensityKind::UniformBox { lo, hi } => (lo.clone(), hi.clone()),
            DensityKind::Circular { .. } => (vec![-CIRCULAR_HALF_WIDTH; 2], vec![CIRCULAR_HALF_WIDTH; 2]),
        }
    }
}

fn gauss2(w: Vec<f64>, means: Vec<[f64; 2]>, covs: Vec<[f64; 3]>) -> MixtureModel {
    let covs = covs
        .into_iter()
        .map(|[a, b, c]| DMatrix::from_row_slice(2, 2, &[a, b, b, c]))
        .collect();
    MixtureModel::new(w, means.into_iter().map(|m| m.to_vec()).collect(), covs)
        .expect("benchmark parameters are valid")
}

/// Names accepted by [`density_by_name`].
pub const DENSITY_NAMES: &[&str] = &[
    "bimodal",
    "quadrimodal",
    "bimodal-iv",
    "trimodal-iii",
    "quadrimodal-l",
    "fountain10",
    "mult-bimodal",
    "mult-quadrimodal",
    "circular2",
    "circular2-cauchy",
    "circular3",
    "circular4-cauchy",
    "normal",
    "uniform",
    "bimodal-1d",
    "quadrimodal-1d",
];

/// Looks up a benchmark density by name (case and `_`/`-` insensitive).
pub fn density_by_name(name: &str) -> Result<AnalyticDensity> {
    let key = name.trim().to_ascii_lowercase().replace('_', "-");
    let equal = |k: usize| vec![1.0 / k as f64; k];
    let m = match key.as_str() {
        "bimodal" => MixtureModel::isotropic(equal(2), vec![vec![-2.0, 0.0], vec![2.0, 0.0]], vec![1.0; 2])?,
        "quadrimodal" => MixtureModel::isotropic(
            equal(4),
            vec![vec![-2.0, 2.0], vec![-2.0, -2.0], vec![2.0, -2.0], vec![2.0, 2.0]],
            vec![1.0; 4],
        )?,
        "bimodal-iv" | "h" => {
            let s = 4.0 / 9.0;
            gauss2(vec![0.5, 0.5], vec![[1.0, -1.0], [-1.0, 1.0]], vec![[s, 0.7 * s, s], [s, 0.0, s]])
        }
        "trimodal-iii" | "k" => {
            let (a, c) = (9.0 / 25.0, 49.0 / 100.0);
            let h = 2.0 * 3f64.sqrt() / 3.0;
            gauss2(
                vec![3.0 / 7.0, 3.0 / 7.0, 1.0 / 7.0],
                vec![[-1.0, 0.0], [1.0, h], [1.0, -h]],
                vec![[a, 0.7 * a, c], [a, 0.0, c], [a, 0.0, c]],
            )
        }
        "quadrimodal-l" | "l" => {
            let s = 4.0 / 9.0;
            gauss2(
                vec![1.0 / 8.0, 3.0 / 8.0, 1.0 / 8.0, 3.0 / 8.0],
                vec![[-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [1.0, 1.0]],
                vec![[s, 0.4 * s, s], [s, 0.6 * s, s], [s, -0.7 * s, s], [s, -0.5 * s, s]],
            )
        }
        "fountain10" | "fountain" => {
            let t = 1.0 / 16.0;
            gauss2(
                vec![0.5, 0.1, 0.1, 0.1, 0.1, 0.1],
                vec![[0.0, 0.0], [0.0, 0.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [1.0, 1.0]],
                vec![[1.0, 0.0, 1.0], [t, 0.0, t], [t, 0.0, t], [t, 0.0, t], [t, 0.0, t], [t, 0.0, t]],
            )
        }
        "mult-bimodal" => MixtureModel::isotropic(
            equal(2),
            vec![vec![-2.0, 0.0, 0.0, 0.0, 0.0], vec![2.0, 0.0, 0.0, 0.0, 0.0]],
            vec![1.0; 2],
        )?,
        "mult-quadrimodal" => MixtureModel::isotropic(
            equal(4),
            vec![
                vec![-2.0, 2.0, 0.0, 0.0, 0.0],
                vec![-2.0, -2.0, 0.0, 0.0, 0.0],
                vec![2.0, -2.0, 0.0, 0.0, 0.0],
                vec![2.0, 2.0, 0.0, 0.0, 0.0],
            ],
            vec![1.0; 4],
        )?,
        "normal" => MixtureModel::isotropic(vec![1.0], vec![vec![0.0]], vec![1.0])?,
        "bimodal-1d" => MixtureModel::isotropic(equal(2), vec![vec![-2.0], vec![2.0]], vec![1.0; 2])?,
        "quadrimodal-1d" => MixtureModel::isotropic(
            vec![0.25, 0.5, 0.15, 0.1],
            vec![vec![-2.0], vec![0.0], vec![3.0], vec![4.0]],
            vec![0.5, 0.8, 0.5, 0.2],
        )?,
        "uniform" => return AnalyticDensity::uniform(vec![0.0], vec![1.0]),
        "circular2" => return AnalyticDensity::circular(CircularKind::Circular2),
        "circular2-cauchy" => return AnalyticDensity::circular(CircularKind::Circular2Cauchy),
        "circular3" => return AnalyticDensity::circular(CircularKind::Circular3),
        "circular4-cauchy" => return AnalyticDensity::circular(CircularKind::Circular4Cauchy),
        _ => return Err(Error::UnknownDensity(name.into())),
    };
    Ok(AnalyticDensity::mixture(&key, m))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientFlowConfig {
    pub step: f64,
    pub grad_tol: f64,
    pub max_steps: usize,
    pub merge_radius: f64,
    /// Largest Hessian eigenvalue still counted as a mode.
    pub saddle_threshold: f64,
    pub max_halvings: u32,
}

impl Default for GradientFlowConfig {
    fn default() -> Self {
        Self {
            step: 0.01,
            grad_tol: 1e-8,
            max_steps: 1_000_000,
            merge_radius: 1e-3,
            saddle_threshold: -1e-6,
            max_halvings: 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowStatus {
    Converged,
    Saddle,
    MaxSteps,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowEnd {
    pub point: Vec<f64>,
    pub status: FlowStatus,
    pub steps: usize,
}

/// `grad log f`, the field whose orbits coincide with those of `grad f`
/// wherever `f > 0`.
fn log_field(d: &AnalyticDensity, x: &[f64]) -> (f64, Vec<f64>) {
    let (f, mut g) = d.density_and_grad(x);
    if f > 0.0 {
        for v in g.iter_mut() {
            *v /= f;
        }
    }
    (f, g)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn axpy(x: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

/// Follows the ascent flow from `x` to its limit point.
pub fn gradient_flow(density: &AnalyticDensity, x: &[f64], flow: &GradientFlowConfig) -> Result<FlowEnd> {
    let (f0, _) = density.density_and_grad(x);
    if !(f0 > 0.0) {
        return Err(Error::Precondition(format!("density vanishes at the start point {x:?}")));
    }
    let mut u = x.to_vec();
    let (mut fu, mut g) = log_field(density, &u);
    let mut steps = 0;
    let mut status = FlowStatus::MaxSteps;
    while steps < flow.max_steps {
        if norm(&g) < flow.grad_tol {
            status = FlowStatus::Converged;
            break;
        }
        let mut h = flow.step;
        let mut accepted = None;
        for _ in 0..=flow.max_halvings {
            let k1 = &g;
            let k2 = log_field(density, &axpy(&u, h / 2.0, k1)).1;
            let k3 = log_field(density, &axpy(&u, h / 2.0, &k2)).1;
            let k4 = log_field(density, &axpy(&u, h, &k3)).1;
            let next: Vec<f64> = (0..u.len())
                .map(|d| u[d] + h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]))
                .collect();
            let (fn_, gn) = log_field(density, &next);
            // Near a mode f changes by less than its rounding error.
            if fn_ >= fu - ROUNDOFF * fu {
                accepted = Some((next, fn_, gn));
                break;
            }
            h /= 2.0;
        }
        steps += 1;
        match accepted {
            Some((next, fn_, gn)) => {
                let moved = next != u;
                u = next;
                fu = fn_;
                g = gn;
                if !moved {
                    // Below floating-point resolution of the step.
                    status = FlowStatus::Converged;
                    break;
                }
            }
            None => {
                status = FlowStatus::Converged;
                break;
            }
        }
    }
    if status == FlowStatus::Converged {
        let eig = SymmetricEigen::new(density.hessian(&u)).eigenvalues;
        if eig.iter().any(|&e| e >= flow.saddle_threshold) {
            status = FlowStatus::Saddle;
        }
    }
    Ok(FlowEnd { point: u, status, steps })
}

/// Result of labelling one point.
#[derive(Clone, Debug, PartialEq)]
pub struct TrueCluster {
    pub mode_label: usize,
    pub mode: Vec<f64>,
    pub status: FlowStatus,
}

/// Modes found so far; terminals within the merge radius share a label.
#[derive(Clone, Debug, Default)]
pub struct ModeRegistry {
    pub modes: Vec<Vec<f64>>,
}

impl ModeRegistry {
    pub fn label(&mut self, point: &[f64], merge_radius: f64) -> usize {
        if let Some(i) = self.nearest_within(point, merge_radius) {
            return i;
        }
        self.modes.push(point.to_vec());
        self.modes.len() - 1
    }

    fn nearest_within(&self, point: &[f64], radius: f64) -> Option<usize> {
        self.modes
            .iter()
            .enumerate()
            .map(|(i, m)| (i, crate::geometry::dist(m, point)))
            .filter(|(_, d)| *d <= radius)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }

    pub fn nearest(&self, point: &[f64]) -> Option<usize> {
        self.nearest_within(point, f64::INFINITY)
    }
}

/// Labels `x` by the mode its ascent flow reaches.
pub fn true_cluster(
    density: &AnalyticDensity,
    x: &[f64],
    flow: &GradientFlowConfig,
    registry: &mut ModeRegistry,
) -> Result<TrueCluster> {
    let end = gradient_flow(density, x, flow)?;
    let mode_label = if end.status == FlowStatus::Converged {
        registry.label(&end.point, flow.merge_radius)
    } else {
        usize::MAX
    };
    Ok(TrueCluster { mode_label, mode: end.point, status: end.status })
}

/// Partition of sample points by basin of attraction.
#[derive(Clone, Debug)]
pub struct TruePartition {
    pub clusters: ClusterSet,
    pub modes: Vec<Vec<f64>>,
    /// Points whose flow ended at a saddle or hit the step cap; they are
    /// assigned to the nearest mode.
    pub flagged: Vec<usize>,
}

pub fn true_partition(
    density: &AnalyticDensity,
    points: &Dataset,
    flow: &GradientFlowConfig,
) -> Result<TruePartition> {
    let ends: Vec<FlowEnd> = (0..points.len())
        .into_par_iter()
        .map(|i| gradient_flow(density, points.row(i), flow))
        .collect::<Result<_>>()?;
    let mut registry = ModeRegistry::default();
    let mut labels = vec![usize::MAX; ends.len()];
    for (i, e) in ends.iter().enumerate() {
        if e.status == FlowStatus::Converged {
            labels[i] = registry.label(&e.point, flow.merge_radius);
        }
    }
    let mut flagged = Vec::new();
    for (i, e) in ends.iter().enumerate() {
        if labels[i] == usize::MAX {
            flagged.push(i);
            labels[i] = registry.nearest(&e.point).unwrap_or(0);
        }
    }
    Ok(TruePartition { clusters: ClusterSet::from_labels(&labels), modes: registry.modes, flagged })
}

/// Distinct modes reached from the given starting points.
pub fn find_modes(density: &AnalyticDensity, starts: &Dataset, flow: &GradientFlowConfig) -> Result<Vec<Vec<f64>>> {
    let ends: Vec<FlowEnd> = (0..starts.len())
        .into_par_iter()
        .filter(|&i| density.pdf(starts.row(i)) > 0.0)
        .map(|i| gradient_flow(density, starts.row(i), flow))
        .collect::<Result<_>>()?;
    let mut registry = ModeRegistry::default();
    for e in ends.iter().filter(|e| e.status == FlowStatus::Converged) {
        registry.label(&e.point, flow.merge_radius);
    }
    Ok(registry.modes)
}

/// Regular `k x k` grid over a 2-D box.
pub fn grid_2d(lo: [f64; 2], hi: [f64; 2], k: usize) -> Dataset {
    let mut rows = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let t = |a: f64, b: f64, s: usize| if k == 1 { 0.5 * (a + b) } else { a + (b - a) * s as f64 / (k - 1) as f64 };
            rows.push([t(lo[0], hi[0], i), t(lo[1], hi[1], j)]);
        }
    }
    Dataset::from_rows(&rows).expect("grid rows are finite")
}
