//! Replication-based inference on H0 death times.
//!
//! The observed order statistics `T_j` (the `j`-th largest finite death) are
//! compared with the same statistic of diagrams simulated from a fitted
//! model: the p-value is the fraction of simulations at least as large as
//! the observation, the confidence interval `[0, q95]` uses the nearest-rank
//! 95th percentile of the simulated values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagrams::{bottleneck_points, finite_deaths, kurtosis, nearest_rank, skewness};
use crate::distfit::{self, beta_support, FitOptions, Family, FittedDistribution, Model, Threshold};
use crate::error::{invalid, Error, Result};
use crate::geometry::{add_noise, PointCloud, ShapeSpec};
use crate::rips::{h0_persistence, pairwise_distances, PersistenceDiagram};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::special::kolmogorov_sf;

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_REPS: usize = 1000;
pub const CI_LEVEL: f64 = 95.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub j: usize,
    pub observed_tj: f64,
    /// Upper end of the one-sided interval `[0, ci_upper]`.
    pub ci_upper: f64,
    pub p_value: f64,
    pub n_reps: usize,
    pub alpha: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalCount {
    /// Significant order statistics plus the essential class.
    pub n_components: usize,
    /// Every test performed, in order of `j`.
    pub reports: Vec<InferenceReport>,
}

/// `n_reps` independent lists of `n_points` draws from `dist`. Replication
/// `r` uses its own sub-stream, so the result does not depend on scheduling.
pub fn replicate_diagrams(dist: &FittedDistribution, n_points: usize, n_reps: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n_points == 0 || n_reps == 0 {
        return Err(invalid("replication needs at least one point and one replication"));
    }
    let base = derive_seed(seed, stream::REPLICATION);
    Ok((0..n_reps)
        .into_par_iter()
        .map(|r| dist.model.draw_many(&mut rng_from_seed(derive_seed(base, r as u64)), n_points))
        .collect())
}

/// The `j`-th largest value (`T_1` is the maximum).
pub fn order_statistic(deaths: &[f64], j: usize) -> Result<f64> {
    if j == 0 || j > deaths.len() {
        return Err(Error::Index { index: j, len: deaths.len() });
    }
    let mut v = deaths.to_vec();
    let (_, x, _) = v.select_nth_unstable_by(j - 1, |a, b| b.total_cmp(a));
    Ok(*x)
}

/// The `j_max` largest values in decreasing order.
pub fn top_order_statistics(deaths: &[f64], j_max: usize) -> Vec<f64> {
    let mut v = deaths.to_vec();
    v.sort_unstable_by(|a, b| b.total_cmp(a));
    v.truncate(j_max);
    v
}

/// Tests the observed `T_j` against the `T_j` of each simulated list.
pub fn test_order_statistic(observed: &[f64], sims: &[Vec<f64>], j: usize, alpha: f64) -> Result<InferenceReport> {
    if sims.is_empty() {
        return Err(Error::EmptyInput("no simulated diagrams".into()));
    }
    let obs = order_statistic(observed, j)?;
    let sim_tj = sims.iter().map(|s| order_statistic(s, j)).collect::<Result<Vec<_>>>()?;
    test_statistic(obs, &sim_tj, j, alpha)
}

/// Core of [`test_order_statistic`] once the statistics are extracted.
pub fn test_statistic(observed_tj: f64, sim_tj: &[f64], j: usize, alpha: f64) -> Result<InferenceReport> {
    if sim_tj.is_empty() {
        return Err(Error::EmptyInput("no simulated statistics".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let n_reps = sim_tj.len();
    let exceed = sim_tj.iter().filter(|&&t| t >= observed_tj).count();
    let p_value = exceed as f64 / n_reps as f64;
    let mut sorted = sim_tj.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(InferenceReport {
        j,
        observed_tj,
        ci_upper: nearest_rank(&sorted, CI_LEVEL),
        p_value,
        n_reps,
        alpha,
        significant: p_value < alpha,
    })
}

/// Options for [`count_signals_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalOptions {
    pub alpha: f64,
    /// Keep testing after the first insignificant `T_j` (up to `max_j`)
    /// instead of stopping there. Only significant leading tests count.
    pub scan_all: bool,
    /// Upper limit on `j`; `None` means every observed death.
    pub max_j: Option<usize>,
}

impl Default for SignalOptions {
    fn default() -> Self {
        Self { alpha: DEFAULT_ALPHA, scan_all: false, max_j: None }
    }
}

/// Number of H0 signals: `T_1, T_2, ...` are tested until the first
/// insignificant one, and the essential class is added back.
pub fn count_signals(observed: &[f64], dist: &FittedDistribution, n_reps: usize, seed: u64, alpha: f64) -> Result<SignalCount> {
    if observed.is_empty() {
        return Ok(SignalCount { n_components: 1, reports: Vec::new() });
    }
    let sims = replicate_diagrams(dist, observed.len(), n_reps, seed)?;
    count_signals_with(observed, &sims, &SignalOptions { alpha, ..SignalOptions::default() })
}

/// [`count_signals`] against precomputed simulations.
pub fn count_signals_with(observed: &[f64], sims: &[Vec<f64>], opts: &SignalOptions) -> Result<SignalCount> {
    if observed.is_empty() {
        return Ok(SignalCount { n_components: 1, reports: Vec::new() });
    }
    if sims.is_empty() {
        return Err(Error::EmptyInput("no simulated diagrams".into()));
    }
    let min_len = sims.iter().map(Vec::len).min().unwrap_or(0);
    let j_max = opts.max_j.unwrap_or(usize::MAX).min(observed.len()).min(min_len);
    let obs = top_order_statistics(observed, j_max);
    let sim_top: Vec<Vec<f64>> = sims.iter().map(|s| top_order_statistics(s, j_max)).collect();

    let mut reports = Vec::new();
    let mut leading = 0;
    let mut still_leading = true;
    for j in 1..=j_max {
        let sim_tj: Vec<f64> = sim_top.iter().map(|s| s[j - 1]).collect();
        let report = test_statistic(obs[j - 1], &sim_tj, j, opts.alpha)?;
        reports.push(report);
        if still_leading && report.significant {
            leading += 1;
        } else {
            still_leading = false;
            if !opts.scan_all {
                break;
            }
        }
    }
    Ok(SignalCount { n_components: leading + 1, reports })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn ks_p_value(statistic: f64, effective_n: f64) -> f64 {
    let root = effective_n.sqrt();
    kolmogorov_sf((root + 0.12 + 0.11 / root) * statistic)
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value at
/// effective size `n m / (n + m)`.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<KsResult> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::EmptyInput("KS test needs two nonempty samples".into()));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut k) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && k < m {
        let x = a[i].min(b[k]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while k < m && b[k] <= x {
            k += 1;
        }
        d = d.max((i as f64 / n as f64 - k as f64 / m as f64).abs());
    }
    let (nf, mf) = (n as f64, m as f64);
    Ok(KsResult { statistic: d, p_value: ks_p_value(d, nf * mf / (nf + mf)) })
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("KS test needs a nonempty sample".into()));
    }
    let mut a = xs.to_vec();
    a.sort_by(f64::total_cmp);
    let n = a.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in a.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult { statistic: d, p_value: ks_p_value(d, n) })
}

/// One sampled cloud and its H0 diagram.
#[derive(Debug, Clone)]
pub struct Observation {
    pub cloud: PointCloud,
    pub diagram: PersistenceDiagram,
    pub deaths: Vec<f64>,
}

/// Samples `n` points from `shape`, perturbs a fraction of them and computes
/// the H0 diagram up to `maxscale`. The clean cloud for the same `seed` is
/// the `noise_fraction = 0` observation.
pub fn observe(shape: &ShapeSpec, n: usize, noise_fraction: f64, maxscale: f64, seed: u64) -> Result<Observation> {
    let clean = shape.sample(n, seed)?;
    let cloud = add_noise(&clean, noise_fraction, seed)?;
    let diagram = h0_persistence(&pairwise_distances(&cloud), maxscale)?;
    let deaths = finite_deaths(&diagram);
    Ok(Observation { cloud, diagram, deaths })
}

/// Reference `c_max` for bar classification: the `components`-th largest
/// clean death. For a connected shape this is the largest clean death; for a
/// shape with `k` components the `k - 1` gaps between components are skipped.
pub fn reference_c_max(clean_deaths: &[f64], components: usize) -> Result<f64> {
    order_statistic(clean_deaths, components.max(1))
}

/// Fits the observed deaths with the default candidate set.
pub fn fit_deaths(deaths: &[f64], maxscale: f64, threshold: Threshold) -> Result<FittedDistribution> {
    distfit::select_best_with(deaths, &FitOptions { beta_support: beta_support(deaths, maxscale), gpd_threshold: threshold })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub shape: ShapeSpec,
    pub n: usize,
    pub noise_fraction: f64,
    pub maxscale: f64,
    pub n_collections: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionRecord {
    pub index: usize,
    pub seed: u64,
    pub fit: FittedDistribution,
    pub skewness_real: f64,
    pub kurtosis_real: f64,
    pub skewness_sim: f64,
    pub kurtosis_sim: f64,
    pub bottleneck: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpread {
    pub family: Family,
    pub param: String,
    pub count: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub records: Vec<CollectionRecord>,
    pub n_beta: usize,
    pub n_gpd: usize,
    pub spreads: Vec<ParamSpread>,
    pub median_bottleneck: f64,
}

/// Repeats sample, diagram, fit, simulate on `n_collections` independent
/// collections and compares each real diagram with one simulated diagram
/// (clipped at maxscale like the real one).
pub fn goodness_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    if config.n_collections < 2 {
        return Err(invalid(format!("need at least 2 collections, got {}", config.n_collections)));
    }
    config.shape.validate(config.n)?;
    let base = derive_seed(config.seed, stream::COLLECTION);
    let records = (0..config.n_collections)
        .into_par_iter()
        .map(|c| run_collection(config, c, derive_seed(base, c as u64)))
        .collect::<Result<Vec<_>>>()?;

    let n_beta = records.iter().filter(|r| r.fit.family() == Family::Beta).count();
    let spreads = param_spreads(&records);
    let mut bn: Vec<f64> = records.iter().map(|r| r.bottleneck).collect();
    bn.sort_by(f64::total_cmp);
    Ok(SuiteReport {
        config: config.clone(),
        n_gpd: records.len() - n_beta,
        n_beta,
        spreads,
        median_bottleneck: median_sorted(&bn),
        records,
    })
}

fn run_collection(config: &SuiteConfig, index: usize, seed: u64) -> Result<CollectionRecord> {
    let obs = observe(&config.shape, config.n, config.noise_fraction, config.maxscale, seed)?;
    let fit = fit_deaths(&obs.deaths, config.maxscale, Threshold::Auto)?;
    // The simulated diagram gets the same maxscale bookkeeping as the real
    // one: deaths beyond maxscale are recorded at maxscale.
    let sim: Vec<f64> = distfit::sample(&fit, obs.deaths.len(), derive_seed(seed, stream::SIMULATION))
        .into_iter()
        .map(|d| d.min(config.maxscale))
        .collect();
    let real_points: Vec<(f64, f64)> = obs.deaths.iter().map(|&d| (0.0, d)).collect();
    let sim_points: Vec<(f64, f64)> = sim.iter().map(|&d| (0.0, d)).collect();
    Ok(CollectionRecord {
        index,
        seed,
        skewness_real: skewness(&obs.deaths)?,
        kurtosis_real: kurtosis(&obs.deaths)?,
        skewness_sim: skewness(&sim)?,
        kurtosis_sim: kurtosis(&sim)?,
        bottleneck: bottleneck_points(&real_points, &sim_points),
        fit,
    })
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Median of a list (mean of the two middle values for even length).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    median_sorted(&v)
}

fn param_spreads(records: &[CollectionRecord]) -> Vec<ParamSpread> {
    let named = |m: &Model| -> Vec<(&'static str, f64)> {
        match *m {
            Model::Beta { a, b, .. } => vec![("a", a), ("b", b)],
            Model::GeneralizedPareto { k, sigma, theta } => vec![("k", k), ("sigma", sigma), ("theta", theta)],
        }
    };
    let mut out = Vec::new();
    for (family, names) in [(Family::Beta, &["a", "b"][..]), (Family::GeneralizedPareto, &["k", "sigma", "theta"][..])] {
        for &name in names {
            let mut values: Vec<f64> = records
                .iter()
                .filter(|r| r.fit.family() == family)
                .flat_map(|r| named(&r.fit.model).into_iter().filter(|(p, _)| *p == name).map(|(_, v)| v))
                .collect();
            if values.is_empty() {
                continue;
            }
            values.sort_by(f64::total_cmp);
            out.push(ParamSpread {
                family,
                param: name.to_string(),
                count: values.len(),
                min: values[0],
                median: median_sorted(&values),
                max: values[values.len() - 1],
            });
        }
    }
    out
}
