use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use localdepth::clustering::{cluster as run_cluster, uncertified_terminals, ClusterParams};
use localdepth::depth::{sample_local_depth, tau_approximation_from_depth, DEFAULT_SIMPLEX_BUDGET};
use localdepth::experiment::{plot_data, run_bench, BenchConfig};
use localdepth::io::{coordinate_names, read_csv, write_csv};
use localdepth::models::density_by_name;
use localdepth::recipes::{self, Recipe};
use localdepth::validate::{reference_check, REFERENCE_CHECKS};
use localdepth::{
    ConstantsBudget, ConstantsCache, Dataset, DepthConfig, Family, GeometryConstants, RegionSpec, SimplexBudget,
};
use serde_json::json;

use crate::{BenchArgs, ClusterArgs, ConstantsArgs, DepthArgs, Failure, PlotArgs, RecipeArgs, SampleArgs, ValidateArgs};

const DEFAULT_SEED: u64 = 1;

fn required<T>(v: Option<T>, flag: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("--{flag} is required")))
}

fn family(name: Option<&str>) -> Result<Family, Failure> {
    Ok(Family::from_str(name.unwrap_or("lens"))?)
}

fn simplex_budget(b: Option<u64>) -> SimplexBudget {
    match b {
        Some(0) => SimplexBudget::Exact,
        Some(k) => SimplexBudget::Sampled(k),
        None => SimplexBudget::Sampled(DEFAULT_SIMPLEX_BUDGET),
    }
}

fn load(path: &Path) -> Result<Dataset, Failure> {
    read_csv(path).map(|t| t.data).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

/// Buffered writer to a file, or standard output.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Data(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> Result<(), Failure> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Failure::Data(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn print_lines<T: std::fmt::Display>(lines: impl IntoIterator<Item = T>) -> Result<(), Failure> {
    let mut out = sink(None)?;
    for l in lines {
        writeln!(out, "{l}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn depth(a: DepthArgs) -> Result<(), Failure> {
    let data = load(&required(a.data, "data")?)?;
    let queries = match &a.queries {
        Some(q) => load(q)?,
        None => data.clone(),
    };
    let tau = required(a.tau, "tau")?;
    let spec = RegionSpec::new(family(a.family.as_deref())?, data.dim())?;
    let seed = a.seed.unwrap_or(DEFAULT_SEED);
    let mut cfg = DepthConfig::new(spec, tau);
    cfg.simplex_budget = simplex_budget(a.simplex_budget);
    cfg.seed = seed;
    let constants = match &a.constants {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            let c: GeometryConstants = serde_json::from_str(&text).map_err(|e| Failure::Data(e.to_string()))?;
            if c.spec != spec {
                return Err(Failure::Usage(format!("{} holds constants for another family or dimension", p.display())));
            }
            c
        }
        None => GeometryConstants::for_scaling(&spec, 10_000_000, seed)?,
    };
    let result = sample_local_depth(&data, &queries, &cfg)?;
    let mut header = coordinate_names(data.dim());
    header.push("depth".into());
    header.push("f_tau".into());
    let rows: Vec<Vec<f64>> = queries
        .rows()
        .zip(&result.values)
        .map(|(x, &d)| {
            let mut row = x.to_vec();
            row.push(d);
            row.push(if tau > 0.0 { tau_approximation_from_depth(d, tau, &constants) } else { f64::NAN });
            row
        })
        .collect();
    write_csv(sink(a.output.as_deref())?, &header, &rows)?;
    Ok(())
}

pub fn cluster(a: ClusterArgs) -> Result<(), Failure> {
    let data = load(&required(a.data, "data")?)?;
    let extra = match &a.extra {
        Some(p) => load(p)?,
        None => Dataset::empty(data.dim()),
    };
    let spec = RegionSpec::new(family(a.family.as_deref())?, data.dim())?;
    let mut params = ClusterParams::new(spec);
    params.q = a.q.unwrap_or(params.q);
    params.s = a.s.unwrap_or(params.s);
    params.r = a.r.unwrap_or(params.r);
    params.max_iters = a.max_iters;
    params.depth.simplex_budget = simplex_budget(a.simplex_budget);
    params.depth.seed = a.seed.unwrap_or(DEFAULT_SEED);
    let res = run_cluster(&data, &extra, &params)?;
    let bad = uncertified_terminals(&data, &res, &params);
    if !bad.is_empty() {
        return Err(Failure::Validation(format!("terminals {bad:?} have an ascending neighbour")));
    }
    let p = data.dim();
    let mut header: Vec<String> = ["point", "terminal", "cluster"].map(String::from).to_vec();
    header.extend((1..=p).map(|i| format!("mode_x{i}")));
    let rows: Vec<Vec<f64>> = (0..res.terminal.len())
        .map(|i| {
            let mut row = vec![i as f64, res.terminal[i] as f64, res.cluster_id[i] as f64];
            row.extend_from_slice(&res.modes[res.cluster_id[i]]);
            row
        })
        .collect();
    write_csv(sink(a.output.as_deref())?, &header, &rows)?;
    let modes: Vec<_> = res
        .mode_indices
        .iter()
        .zip(&res.modes)
        .enumerate()
        .map(|(c, (&idx, coords))| json!({"cluster": c, "index": idx, "coordinates": coords, "depth": res.depth_values[idx]}))
        .collect();
    let summary = json!({
        "k": res.k(),
        "tau": res.tau_used,
        "family": spec.family.to_string(),
        "q": params.q,
        "s": params.s,
        "r": params.r,
        "n_data": res.n_data,
        "n_extra": extra.len(),
        "flagged": res.flagged,
        "modes": modes,
    });
    match &a.summary {
        Some(p) => write_json(Some(p), &summary),
        None => {
            eprintln!("{}", serde_json::to_string_pretty(&summary).expect("json"));
            Ok(())
        }
    }
}

pub fn bench(a: BenchArgs) -> Result<(), Failure> {
    let name = required(a.density, "density")?;
    let density = density_by_name(&name)?;
    let spec = RegionSpec::new(family(a.family.as_deref())?, density.dim())?;
    let mut params = ClusterParams::new(spec);
    params.q = a.q.unwrap_or(params.q);
    params.s = a.s.unwrap_or(params.s);
    params.r = a.r.unwrap_or(params.r);
    let mut cfg = BenchConfig::new(
        &name,
        a.n.unwrap_or(500),
        a.replications.unwrap_or(20),
        params,
        a.seed.unwrap_or(DEFAULT_SEED),
    );
    if let Some(etas) = a.etas {
        cfg.etas = etas;
    }
    let res = run_bench(&cfg)?;
    print_lines([res.row.to_string()])?;
    if let Some(p) = &a.output {
        write_json(Some(p), &res)?;
    }
    Ok(())
}

pub fn plotdata(a: PlotArgs) -> Result<(), Failure> {
    let seed = a.seed.unwrap_or(DEFAULT_SEED);
    let (data, density) = match (&a.density, &a.data) {
        (Some(name), None) => {
            let d = density_by_name(name)?;
            (d.sample(a.n.unwrap_or(1000), seed)?, Some(d))
        }
        (None, Some(path)) => (load(path)?, None),
        _ => return Err(Failure::Usage("give exactly one of --density and --data".into())),
    };
    let p = data.dim();
    if p > 2 {
        return Err(Failure::Usage(format!("plot data needs p <= 2, got {p}")));
    }
    if data.is_empty() {
        return Err(Failure::Data("the sample is empty".into()));
    }
    let bound = |pick: fn(f64, f64) -> f64, init: f64| -> Vec<f64> {
        (0..p).map(|d| data.rows().map(|r| r[d]).fold(init, pick)).collect()
    };
    let grid = localdepth::experiment::PlotGrid {
        lo: a.lo.unwrap_or_else(|| bound(f64::min, f64::INFINITY)),
        hi: a.hi.unwrap_or_else(|| bound(f64::max, f64::NEG_INFINITY)),
        points: a.points.unwrap_or(101),
    };
    if grid.lo.len() != p || grid.hi.len() != p {
        return Err(Failure::Usage(format!("--lo and --hi need {p} values")));
    }
    let taus = a.taus.unwrap_or_else(|| vec![0.5, 1.0, 2.0, 4.0]);
    let table = plot_data(&data, &grid.build()?, &taus, density.as_ref(), seed)?;
    write_csv(sink(a.output.as_deref())?, &table.header, &table.rows)?;
    Ok(())
}

pub fn validate(a: ValidateArgs) -> Result<(), Failure> {
    if a.list {
        return print_lines(REFERENCE_CHECKS);
    }
    let seed = a.seed.unwrap_or(DEFAULT_SEED);
    let names: Vec<&str> = match &a.check {
        Some(c) => vec![c.as_str()],
        None => REFERENCE_CHECKS.to_vec(),
    };
    let mut out = sink(a.output.as_deref())?;
    let mut failed = Vec::new();
    for name in names {
        let mut v = reference_check(name, seed)?;
        if !a.timings {
            v.runtime_seconds = 0.0;
        }
        writeln!(out, "{}", v.to_json_line())?;
        out.flush()?;
        if !v.ok() {
            failed.push(v.check_name.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("failed checks: {}", failed.join(", "))))
    }
}

pub fn constants(a: ConstantsArgs) -> Result<(), Failure> {
    let spec = RegionSpec::new(family(a.family.as_deref())?, required(a.dim, "dim")?)?;
    let defaults = ConstantsBudget::default();
    let budget = ConstantsBudget {
        lambda1_samples: a.lambda1_samples.unwrap_or(defaults.lambda1_samples),
        star_outer: a.star_outer.unwrap_or(defaults.star_outer),
        star_inner: a.star_inner.unwrap_or(defaults.star_inner),
    };
    let seed = a.seed.unwrap_or(DEFAULT_SEED);
    let estimate = match (GeometryConstants::analytic(&spec), &a.cache) {
        (Some(exact), _) => exact,
        (None, Some(path)) => {
            let mut cache = if path.exists() { ConstantsCache::load(path)? } else { ConstantsCache::default() };
            let c = cache.get_or_estimate(&spec, &budget, seed)?;
            cache.save(path)?;
            c
        }
        (None, None) => GeometryConstants::estimate(&spec, &budget, seed)?,
    };
    write_json(a.output.as_deref(), &estimate)
}

pub fn sample(a: SampleArgs) -> Result<(), Failure> {
    let d = density_by_name(&required(a.density, "density")?)?;
    let data = d.sample(required(a.n, "n")?, a.seed.unwrap_or(DEFAULT_SEED))?;
    let rows: Vec<&[f64]> = data.rows().collect();
    write_csv(sink(a.output.as_deref())?, &coordinate_names(d.dim()), &rows)?;
    Ok(())
}

pub fn recipe(a: RecipeArgs) -> Result<(), Failure> {
    if a.list {
        return print_lines(recipes::recipe_ids());
    }
    let recipe = match (&a.id, &a.file) {
        (Some(id), None) => recipes::load_recipe(id)?,
        (None, Some(path)) => Recipe::from_json(&std::fs::read_to_string(path)?)?,
        _ => return Err(Failure::Usage("give a recipe id or --file (see --list)".into())),
    };
    let mut report = recipes::run(&recipe, a.seed.unwrap_or(DEFAULT_SEED))?;
    if !a.timings {
        report.runtime_seconds = 0.0;
    }
    print_lines(&report.criteria)?;
    let path: Option<PathBuf> = a.output;
    if let Some(p) = &path {
        write_json(Some(p), &report)?;
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Validation(format!("recipe {} failed", recipe.id)))
    }
}
