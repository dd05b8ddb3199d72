//! Named experiment recipes with acceptance thresholds.
//!
//! Recipes are JSON documents under `recipes/`, compiled into the crate so
//! that `run_recipe` works from any directory. A report embeds the resolved
//! recipe so that a run can be replayed from the report alone.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::clustering::ClusterParams;
use crate::constants::ConstantsBudget;
use crate::error::{Error, Result};
use crate::experiment::{count_local_maxima, plot_data, run_bench, smooth5, BenchConfig, PlotGrid};
use crate::geometry::{Family, RegionSpec};
use crate::models::{density_by_name, GradientFlowConfig};
use crate::validate::{self, ValidationVerdict};

const REGISTRY: &[(&str, &str)] = &[
    ("accept-family-coincidence", include_str!("../recipes/accept-family-coincidence.json")),
    ("accept-constants", include_str!("../recipes/accept-constants.json")),
    ("accept-unbiasedness", include_str!("../recipes/accept-unbiasedness.json")),
    ("accept-clt-p1", include_str!("../recipes/accept-clt-p1.json")),
    ("accept-extreme-localization", include_str!("../recipes/accept-extreme-localization.json")),
    ("accept-symmetry-bracket", include_str!("../recipes/accept-symmetry-bracket.json")),
    ("accept-bimodal-desk", include_str!("../recipes/accept-bimodal-desk.json")),
    ("accept-fountain", include_str!("../recipes/accept-fountain.json")),
    ("accept-mult-quadrimodal", include_str!("../recipes/accept-mult-quadrimodal.json")),
    ("accept-metrics", include_str!("../recipes/accept-metrics.json")),
    ("accept-level-sets", include_str!("../recipes/accept-level-sets.json")),
    ("accept-figure-modes", include_str!("../recipes/accept-figure-modes.json")),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Bench {
        density: String,
        n: usize,
        replications: usize,
        family: Family,
        q: f64,
        s: usize,
        r: f64,
        #[serde(default = "default_etas")]
        etas: Vec<f64>,
    },
    FamilyCoincidence {
        datasets: usize,
        max_n: usize,
        queries: usize,
    },
    Constants {
        budget: ConstantsBudget,
    },
    Unbiasedness {
        density: String,
        x: f64,
        tau: f64,
        n: usize,
        reps: usize,
    },
    CltVariance {
        density: String,
        x: Vec<f64>,
        n: usize,
        exponent: f64,
        reps: usize,
    },
    ExtremeLocalization {
        density: String,
        grid: PlotGrid,
        taus: Vec<f64>,
        n: usize,
        tolerance: f64,
    },
    SymmetryStationary {
        density: String,
        tau: f64,
    },
    ModeBracket {
        density: String,
        taus: Vec<f64>,
    },
    LevelSets {
        density: String,
        /// Level as a fraction of the highest mode.
        alpha_fraction: f64,
        stages: Vec<(f64, usize)>,
        grid: PlotGrid,
    },
    MetricsOracle {
        instances: usize,
        max_blocks: usize,
    },
    PlotModes {
        density: String,
        n: usize,
        grid: PlotGrid,
        taus: Vec<f64>,
    },
}

fn default_etas() -> Vec<f64> {
    vec![0.0, 1.0]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
}

impl Comparator {
    pub fn holds(self, measured: f64, threshold: f64) -> bool {
        match self {
            Self::Lt => measured < threshold,
            Self::Le => measured <= threshold,
            Self::Gt => measured > threshold,
            Self::Ge => measured >= threshold,
            Self::Eq => measured == threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Self::Lt => "<",
            Self::Le => "<=",
            Self::Gt => ">",
            Self::Ge => ">=",
            Self::Eq => "==",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    /// `task.metric`
    pub metric: String,
    pub comparator: Comparator,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub id: String,
    pub version: u32,
    pub description: String,
    pub tasks: BTreeMap<String, Task>,
    pub acceptance: Vec<Criterion>,
}

impl Recipe {
    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        for c in &r.acceptance {
            let task = c.metric.split('.').next().unwrap_or_default();
            if !r.tasks.contains_key(task) {
                return Err(Error::InvalidParameter(format!(
                    "recipe {}: criterion {} names no task",
                    r.id, c.metric
                )));
            }
        }
        Ok(r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub metric: String,
    pub comparator: Comparator,
    pub threshold: f64,
    /// `None` when the task did not produce the metric.
    pub measured: Option<f64>,
    pub passed: bool,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let measured = self.measured.map_or("missing".to_string(), |m| format!("{m:.6}"));
        write!(
            f,
            "{} {}: measured {} {} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.metric,
            measured,
            self.comparator.symbol(),
            self.threshold
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecipeReport {
    pub recipe: Recipe,
    pub seed: u64,
    pub measured: BTreeMap<String, f64>,
    pub criteria: Vec<CriterionResult>,
    pub passed: bool,
    pub runtime_seconds: f64,
}

pub fn recipe_ids() -> Vec<&'static str> {
    REGISTRY.iter().map(|(id, _)| *id).collect()
}

pub fn load_recipe(id: &str) -> Result<Recipe> {
    let (_, text) = REGISTRY
        .iter()
        .find(|(k, _)| *k == id)
        .ok_or_else(|| Error::UnknownRecipe(id.into()))?;
    let r = Recipe::from_json(text)?;
    if r.id != id {
        return Err(Error::InvalidParameter(format!("recipe file for {id} declares id {}", r.id)));
    }
    Ok(r)
}

fn verdict_metrics(v: &ValidationVerdict) -> BTreeMap<String, f64> {
    let mut m = v.details.clone();
    m.insert("statistic".into(), v.statistic);
    m.insert("passed".into(), f64::from(u8::from(v.passed)));
    for (i, x) in v.ladder.iter().enumerate() {
        m.insert(format!("ladder_{i}"), *x);
    }
    m
}

fn run_task(task: &Task, seed: u64) -> Result<BTreeMap<String, f64>> {
    let verdict = match task {
        Task::Bench { density, n, replications, family, q, s, r, etas } => {
            let dim = density_by_name(density)?.dim();
            let params = ClusterParams::new(RegionSpec::new(*family, dim)?).with_qsr(*q, *s, *r);
            let cfg = BenchConfig {
                density: density.clone(),
                n: *n,
                replications: *replications,
                params,
                etas: etas.clone(),
                flow: GradientFlowConfig::default(),
                seed,
            };
            let rep = run_bench(&cfg)?.row.report;
            let mut m = BTreeMap::new();
            m.insert("exact_count".into(), rep.counts.exact as f64);
            m.insert("lower_count".into(), rep.counts.lower as f64);
            m.insert("higher_count".into(), rep.counts.higher as f64);
            m.insert("hausdorff_mean".into(), rep.hausdorff.mean);
            for (eta, p) in rep.etas.iter().zip(&rep.prob_distance) {
                m.insert(format!("prob_distance_mean_eta_{eta}"), p.mean);
            }
            return Ok(m);
        }
        Task::PlotModes { density, n, grid, taus } => {
            let d = density_by_name(density)?;
            let data = d.sample(*n, seed)?;
            let table = plot_data(&data, &grid.build()?, taus, None, seed)?;
            let p = data.dim();
            let mut m = BTreeMap::new();
            for (i, tau) in taus.iter().enumerate() {
                let col: Vec<f64> = table.rows.iter().map(|r| r[p + i]).collect();
                m.insert(format!("maxima_tau_{tau}"), count_local_maxima(&smooth5(&col)) as f64);
            }
            return Ok(m);
        }
        Task::FamilyCoincidence { datasets, max_n, queries } => {
            validate::check_family_coincidence(*datasets, *max_n, *queries, seed)?
        }
        Task::Constants { budget } => validate::check_constants(budget, seed)?,
        Task::Unbiasedness { density, x, tau, n, reps } => {
            validate::check_unbiasedness_and_variance(&density_by_name(density)?, *x, *tau, *n, *reps, seed)?
        }
        Task::CltVariance { density, x, n, exponent, reps } => {
            let d = density_by_name(density)?;
            let spec = RegionSpec::lens(d.dim());
            let constants = crate::constants::GeometryConstants::analytic(&spec).map_or_else(
                || crate::constants::GeometryConstants::estimate(&spec, &ConstantsBudget::default(), seed),
                Ok,
            )?;
            validate::check_clt_variance(&d, x, *n, *exponent, *reps, seed, &constants)?
        }
        Task::ExtremeLocalization { density, grid, taus, n, tolerance } => validate::check_extreme_localization(
            &density_by_name(density)?,
            &grid.build()?,
            taus,
            *n,
            *tolerance,
            seed,
        )?,
        Task::SymmetryStationary { density, tau } => {
            validate::check_symmetry_stationary(&density_by_name(density)?, *tau, seed)?
        }
        Task::ModeBracket { density, taus } => validate::check_mode_bracket(&density_by_name(density)?, taus, seed)?,
        Task::LevelSets { density, alpha_fraction, stages, grid } => {
            let d = density_by_name(density)?;
            let alpha = alpha_fraction * validate::mode_height(&d)?;
            validate::check_level_sets(&d, alpha, stages, &grid.build()?, seed)?
        }
        Task::MetricsOracle { instances, max_blocks } => validate::check_metrics_oracle(*instances, *max_blocks, seed)?,
    };
    Ok(verdict_metrics(&verdict))
}

/// Runs every task of a recipe and compares the measurements with its
/// acceptance thresholds.
pub fn run(recipe: &Recipe, seed: u64) -> Result<RecipeReport> {
    let start = Instant::now();
    let mut measured = BTreeMap::new();
    for (name, task) in &recipe.tasks {
        for (k, v) in run_task(task, seed)? {
            measured.insert(format!("{name}.{k}"), v);
        }
    }
    let criteria: Vec<CriterionResult> = recipe
        .acceptance
        .iter()
        .map(|c| {
            let m = measured.get(&c.metric).copied();
            CriterionResult {
                metric: c.metric.clone(),
                comparator: c.comparator,
                threshold: c.threshold,
                measured: m,
                passed: m.is_some_and(|v| c.comparator.holds(v, c.threshold)),
            }
        })
        .collect();
    let passed = criteria.iter().all(|c| c.passed);
    Ok(RecipeReport {
        recipe: recipe.clone(),
        seed,
        measured,
        criteria,
        passed,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs a registered recipe.
pub fn run_recipe(id: &str, seed: u64) -> Result<RecipeReport> {
    run(&load_recipe(id)?, seed)
}
