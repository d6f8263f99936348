use std::path::{Path, PathBuf};

use rayon::prelude::*;
use ripstat::diagrams::{classify_bars, finite_deaths, percentiles, DEFAULT_LEVELS};
use ripstat::distfit::{FittedDistribution, Model, Threshold};
use ripstat::geometry::{add_noise, CloudMeta, PointCloud};
use ripstat::inference::{
    count_signals_with, fit_deaths, goodness_suite, reference_c_max, replicate_diagrams, InferenceReport,
    SignalOptions, SuiteConfig,
};
use ripstat::io::{self, format_f64, DiagramMeta};
use ripstat::rips::{optimal_maxscale, pairwise_distances, rips_persistence, DistanceMatrix, PersistenceDiagram};
use ripstat::rng::{derive_seed, stream};
use ripstat::{Error, Result};
use serde::Serialize;

use crate::config::{ExperimentConfig, Maxscale};

pub const HISTOGRAM_BINS: usize = 30;

/// Sidecar JSON next to a CSV file: `x.csv` -> `x.json`.
pub fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    io::write_atomic(path, &bytes)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    io::write_atomic(path, &io::to_json_bytes(value)?)
}

fn num(x: f64) -> String {
    format_f64(x)
}

/// Clean sample, then noise on a fraction of the points.
fn sample_cloud(config: &ExperimentConfig, n: usize, noise: f64) -> Result<PointCloud> {
    let clean = config.shape.sample(n, config.seed)?;
    add_noise(&clean, noise, config.seed)
}

pub fn cmd_sample(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let cloud = sample_cloud(config, config.n, config.noise_fraction)?;
    let csv_path = out.join("cloud.csv");
    let mut bytes = Vec::new();
    io::write_cloud_csv(&cloud, &mut bytes)?;
    io::write_atomic(&csv_path, &bytes)?;
    write_json(&sidecar(&csv_path), &cloud.meta)?;
    Ok(vec![csv_path.clone(), sidecar(&csv_path)])
}

#[derive(Debug, Serialize)]
struct MaxscaleReport {
    maxscale: f64,
    auto: bool,
    initial: f64,
    growth: f64,
    max_finite_h0_death: f64,
}

fn resolve_maxscale(config: &ExperimentConfig, choice: Maxscale, d: &DistanceMatrix) -> Result<f64> {
    match choice {
        Maxscale::Value(v) => Ok(v),
        Maxscale::Auto(_) => optimal_maxscale(d, config.auto_initial, config.auto_growth),
    }
}

/// Reads a cloud CSV and its metadata sidecar when present.
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let meta_path = sidecar(path);
    let meta: Option<CloudMeta> = if meta_path.exists() {
        Some(serde_json::from_str(&std::fs::read_to_string(&meta_path)?)?)
    } else {
        None
    };
    io::read_cloud_csv(std::fs::File::open(path)?, meta)
}

pub fn cmd_rips(config: &ExperimentConfig, cloud_path: Option<&Path>, out: &Path) -> Result<Vec<PathBuf>> {
    let cloud = match cloud_path {
        Some(p) => read_cloud(p)?,
        None => sample_cloud(config, config.n, config.noise_fraction)?,
    };
    let d = pairwise_distances(&cloud);
    let maxscale = resolve_maxscale(config, config.maxscale, &d)?;
    let diagram = rips_persistence(&d, maxscale, config.maxdim)?;

    let csv_path = out.join("diagram.csv");
    let mut bytes = Vec::new();
    io::write_diagram_csv(&diagram, &mut bytes)?;
    io::write_atomic(&csv_path, &bytes)?;
    write_json(&sidecar(&csv_path), &DiagramMeta { maxdim: config.maxdim, ..DiagramMeta::new(&diagram) })?;
    let mut written = vec![csv_path.clone(), sidecar(&csv_path)];
    if matches!(config.maxscale, Maxscale::Auto(_)) {
        let report = MaxscaleReport {
            maxscale,
            auto: true,
            initial: config.auto_initial,
            growth: config.auto_growth,
            max_finite_h0_death: finite_deaths(&diagram).into_iter().fold(0.0, f64::max),
        };
        let path = out.join("maxscale.json");
        write_json(&path, &report)?;
        written.push(path);
    }
    Ok(written)
}

/// Reads a diagram CSV and its metadata sidecar when present.
pub fn read_diagram(path: &Path) -> Result<PersistenceDiagram> {
    let meta_path = sidecar(path);
    let meta: Option<DiagramMeta> = if meta_path.exists() {
        Some(serde_json::from_str(&std::fs::read_to_string(&meta_path)?)?)
    } else {
        None
    };
    io::read_diagram_csv(std::fs::File::open(path)?, meta)
}

/// Equal-width histogram of `xs` over `[0, max]` with the fitted density at
/// each bin centre.
fn histogram_rows(xs: &[f64], fit: &FittedDistribution) -> Vec<Vec<String>> {
    let max = xs.iter().copied().fold(0.0, f64::max);
    let width = if max > 0.0 { max / HISTOGRAM_BINS as f64 } else { 1.0 };
    let mut counts = [0usize; HISTOGRAM_BINS];
    for &x in xs {
        let bin = ((x / width) as usize).min(HISTOGRAM_BINS - 1);
        counts[bin] += 1;
    }
    let total = xs.len() as f64;
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let lo = i as f64 * width;
            let hi = if i + 1 == HISTOGRAM_BINS { max.max(width) } else { (i + 1) as f64 * width };
            vec![num(lo), num(hi), c.to_string(), num(c as f64 / (total * width)), num(fit.pdf(0.5 * (lo + hi)))]
        })
        .collect()
}

pub fn cmd_fit(diagram_path: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let diagram = read_diagram(diagram_path)?;
    let deaths = finite_deaths(&diagram);
    let fit = fit_deaths(&deaths, diagram.maxscale, Threshold::Auto)?;
    let fit_path = out.join("fit.json");
    write_json(&fit_path, &fit)?;
    let hist_path = out.join("histogram.csv");
    write_csv(&hist_path, &["bin_lo", "bin_hi", "count", "density", "model_pdf"], &histogram_rows(&deaths, &fit))?;
    Ok(vec![fit_path, hist_path])
}

const INFERENCE_HEADER: [&str; 11] =
    ["shape", "n", "M", "maxscale", "j", "observed_tj", "ci_upper", "p_value", "n_reps", "significant", "family"];

fn inference_row(label: &str, n: usize, m: f64, maxscale: f64, r: &InferenceReport, fit: &FittedDistribution) -> Vec<String> {
    vec![
        label.to_string(),
        n.to_string(),
        num(m),
        num(maxscale),
        r.j.to_string(),
        num(r.observed_tj),
        num(r.ci_upper),
        num(r.p_value),
        r.n_reps.to_string(),
        r.significant.to_string(),
        fit.family().label().to_string(),
    ]
}

#[derive(Debug, Serialize)]
struct SignalSummary {
    n_components: usize,
    alpha: f64,
    n_reps: usize,
    seed: u64,
}

/// Every `T_j` up to `j_max` is reported; the signal count uses the
/// stop-at-first-insignificant rule.
fn infer(deaths: &[f64], fit: &FittedDistribution, j_max: usize, n_reps: usize, seed: u64, alpha: f64) -> Result<(usize, Vec<InferenceReport>)> {
    if deaths.is_empty() {
        return Ok((1, Vec::new()));
    }
    let sims = replicate_diagrams(fit, deaths.len(), n_reps, seed)?;
    let opts = SignalOptions { alpha, scan_all: true, max_j: Some(j_max) };
    let scanned = count_signals_with(deaths, &sims, &opts)?;
    Ok((scanned.n_components, scanned.reports))
}

pub fn cmd_infer(config: &ExperimentConfig, diagram_path: &Path, model_path: &Path, j_max: usize, out: &Path) -> Result<Vec<PathBuf>> {
    let diagram = read_diagram(diagram_path)?;
    let fit: FittedDistribution = serde_json::from_str(&std::fs::read_to_string(model_path)?)?;
    let deaths = finite_deaths(&diagram);
    let seed = derive_seed(config.seed, stream::SIMULATION);
    let (n_components, reports) = infer(&deaths, &fit, j_max, config.n_reps, seed, config.alpha)?;
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| inference_row(config.shape.label(), diagram.n_points, config.noise_fraction, diagram.maxscale, r, &fit))
        .collect();
    let csv_path = out.join("inference.csv");
    write_csv(&csv_path, &INFERENCE_HEADER, &rows)?;
    let signals_path = out.join("signals.json");
    write_json(&signals_path, &SignalSummary { n_components, alpha: config.alpha, n_reps: config.n_reps, seed: config.seed })?;
    Ok(vec![csv_path, signals_path])
}

struct GridResult {
    classification: Vec<String>,
    percentiles: Vec<String>,
    inference: Vec<Vec<String>>,
}

fn run_grid_point(config: &ExperimentConfig, n: usize, m: f64, choice: Maxscale) -> Result<GridResult> {
    let label = config.shape.label();
    // c_max comes from the clean sample with the same shape, size and seed.
    let clean = config.shape.sample(n, config.seed)?;
    let clean_d = pairwise_distances(&clean);
    let clean_deaths = finite_deaths(&rips_persistence(&clean_d, f64::INFINITY, 0)?);
    let c_max = reference_c_max(&clean_deaths, config.shape.components())?;

    let cloud = add_noise(&clean, m, config.seed)?;
    let d = pairwise_distances(&cloud);
    let maxscale = resolve_maxscale(config, choice, &d)?;
    let deaths = finite_deaths(&rips_persistence(&d, maxscale, 0)?);
    let class = classify_bars(&deaths, c_max)?;
    let pct = percentiles(&deaths, &DEFAULT_LEVELS)?;
    let fit = fit_deaths(&deaths, maxscale, Threshold::Auto)?;
    let seed = derive_seed(config.seed, stream::SIMULATION);
    let (_, reports) = infer(&deaths, &fit, config.j_max, config.n_reps, seed, config.alpha)?;

    let key = vec![label.to_string(), n.to_string(), num(m), num(maxscale)];
    let mut classification = key.clone();
    classification.extend([num(c_max), class.n_short.to_string(), class.n_long.to_string(), num(class.prop_short), num(class.prop_long)]);
    let mut percentiles_row = key;
    percentiles_row.extend(pct.values.iter().map(|&v| num(v)));
    let inference = reports.iter().map(|r| inference_row(label, n, m, maxscale, r, &fit)).collect();
    Ok(GridResult { classification, percentiles: percentiles_row, inference })
}

pub fn cmd_table(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let points: Vec<(usize, f64, Maxscale)> = config
        .grid_n()
        .into_iter()
        .flat_map(|n| config.grid_noise().into_iter().flat_map(move |m| config.grid_maxscale().into_iter().map(move |s| (n, m, s))))
        .collect();
    let results = points
        .par_iter()
        .map(|&(n, m, s)| run_grid_point(config, n, m, s))
        .collect::<Result<Vec<_>>>()?;

    let class_path = out.join("classification.csv");
    write_csv(
        &class_path,
        &["shape", "n", "M", "maxscale", "c_max", "n_short", "n_long", "prop_short", "prop_long"],
        &results.iter().map(|r| r.classification.clone()).collect::<Vec<_>>(),
    )?;
    let pct_path = out.join("percentiles.csv");
    write_csv(
        &pct_path,
        &["shape", "n", "M", "maxscale", "p95", "p99", "p100"],
        &results.iter().map(|r| r.percentiles.clone()).collect::<Vec<_>>(),
    )?;
    let inf_path = out.join("inference.csv");
    write_csv(&inf_path, &INFERENCE_HEADER, &results.iter().flat_map(|r| r.inference.clone()).collect::<Vec<_>>())?;
    Ok(vec![class_path, pct_path, inf_path])
}

pub fn cmd_goodness(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let maxscale = match config.maxscale {
        Maxscale::Value(v) => v,
        Maxscale::Auto(_) => {
            // Resolved once on the first collection's clean sample.
            let d = pairwise_distances(&sample_cloud(config, config.n, config.noise_fraction)?);
            optimal_maxscale(&d, config.auto_initial, config.auto_growth)?
        }
    };
    let suite = SuiteConfig {
        shape: config.shape.clone(),
        n: config.n,
        noise_fraction: config.noise_fraction,
        maxscale,
        n_collections: config.n_collections,
        seed: config.seed,
    };
    let report = goodness_suite(&suite)?;
    let rows: Vec<Vec<String>> = report
        .records
        .iter()
        .map(|r| {
            let params = match r.fit.model {
                Model::Beta { a, b, .. } => [num(a), num(b), String::new(), String::new(), String::new()],
                Model::GeneralizedPareto { k, sigma, theta } => [String::new(), String::new(), num(k), num(sigma), num(theta)],
            };
            let mut row = vec![r.index.to_string(), r.seed.to_string(), r.fit.family().label().to_string()];
            row.extend(params);
            row.extend([r.skewness_real, r.kurtosis_real, r.skewness_sim, r.kurtosis_sim, r.bottleneck].map(num));
            row
        })
        .collect();
    let csv_path = out.join("goodness.csv");
    write_csv(
        &csv_path,
        &[
            "collection", "seed", "family", "a", "b", "k", "sigma", "theta", "skewness_real", "kurtosis_real",
            "skewness_sim", "kurtosis_sim", "bottleneck",
        ],
        &rows,
    )?;
    let summary_path = out.join("goodness_summary.json");
    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a SuiteConfig,
        n_beta: usize,
        n_gpd: usize,
        median_bottleneck: f64,
        spreads: &'a [ripstat::inference::ParamSpread],
    }
    write_json(
        &summary_path,
        &Summary {
            config: &report.config,
            n_beta: report.n_beta,
            n_gpd: report.n_gpd,
            median_bottleneck: report.median_bottleneck,
            spreads: &report.spreads,
        },
    )?;
    Ok(vec![csv_path, summary_path])
}
