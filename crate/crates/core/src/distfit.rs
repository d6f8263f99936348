//! Finite-support parametric models for H0 death times: beta on `[0, s]` and
//! the generalized Pareto distribution (GPD), fitted by maximum likelihood and
//! compared by BIC, then AIC.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{rng_from_seed, Rng};
use crate::special::{beta_reg, digamma, ln_beta, trigamma};

/// Minimum sample size accepted by the fitters.
pub const MIN_FIT_SIZE: usize = 10;

/// Values on the boundary of the beta support are moved this far inside
/// (relative to the support length).
pub const BOUNDARY_NUDGE: f64 = 1e-9;

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 200;

/// Largest GPD shape explored by the profile search before extending it.
const GPD_SHAPE_GRID_MAX: f64 = 3.0;
const GPD_SHAPE_GRID_STEP: f64 = 0.1;
const GPD_SHAPE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Beta,
    GeneralizedPareto,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::Beta => "beta",
            Family::GeneralizedPareto => "generalized_pareto",
        }
    }
}

/// A fully specified model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    /// Beta(a, b) rescaled to `[0, scale]`.
    Beta { a: f64, b: f64, scale: f64 },
    /// Density `(1/sigma) (1 + k (x - theta) / sigma)^(-1 - 1/k)` for
    /// `x >= theta`; finite support `[theta, theta - sigma / k]` when `k < 0`.
    GeneralizedPareto { k: f64, sigma: f64, theta: f64 },
}

impl Model {
    pub fn family(&self) -> Family {
        match self {
            Model::Beta { .. } => Family::Beta,
            Model::GeneralizedPareto { .. } => Family::GeneralizedPareto,
        }
    }

    /// Number of parameters counted by AIC/BIC. The GPD location is set from
    /// the data and counts as a parameter.
    pub fn n_params(&self) -> usize {
        match self {
            Model::Beta { .. } => 2,
            Model::GeneralizedPareto { .. } => 3,
        }
    }

    /// `(lower, upper)`; `upper` is infinite for a GPD with `k >= 0`.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Model::Beta { scale, .. } => (0.0, scale),
            Model::GeneralizedPareto { k, sigma, theta } => {
                if k < 0.0 {
                    (theta, theta - sigma / k)
                } else {
                    (theta, f64::INFINITY)
                }
            }
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Model::Beta { a, b, scale } => {
                let u = x / scale;
                if !(0.0..=1.0).contains(&u) {
                    return f64::NEG_INFINITY;
                }
                let la = if a == 1.0 { 0.0 } else { (a - 1.0) * u.ln() };
                let lb = if b == 1.0 { 0.0 } else { (b - 1.0) * (-u).ln_1p() };
                la + lb - ln_beta(a, b) - scale.ln()
            }
            Model::GeneralizedPareto { k, sigma, theta } => {
                let y = x - theta;
                if y < 0.0 {
                    return f64::NEG_INFINITY;
                }
                let z = y / sigma;
                if k == 0.0 {
                    return -sigma.ln() - z;
                }
                let arg = k * z;
                if arg <= -1.0 {
                    // Upper endpoint for k < 0 (only k = -1 has a finite
                    // nonzero density there).
                    return if arg == -1.0 && k == -1.0 { -sigma.ln() } else { f64::NEG_INFINITY };
                }
                -sigma.ln() - (1.0 + 1.0 / k) * arg.ln_1p()
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Model::Beta { a, b, scale } => {
                let u = x / scale;
                if u <= 0.0 {
                    0.0
                } else if u >= 1.0 {
                    1.0
                } else {
                    beta_reg(a, b, u).clamp(0.0, 1.0)
                }
            }
            Model::GeneralizedPareto { k, sigma, theta } => {
                let y = x - theta;
                if y <= 0.0 {
                    return 0.0;
                }
                let z = y / sigma;
                if k == 0.0 {
                    return -(-z).exp_m1();
                }
                let arg = k * z;
                if arg <= -1.0 {
                    return 1.0;
                }
                (-(-(arg.ln_1p()) / k).exp_m1()).clamp(0.0, 1.0)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Model::Beta { a, b, scale } => scale * a / (a + b),
            Model::GeneralizedPareto { k, sigma, theta } => {
                if k < 1.0 {
                    theta + sigma / (1.0 - k)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// One draw. Beta uses the ratio of two gamma variates, the GPD its
    /// inverse CDF.
    pub fn draw(&self, rng: &mut Rng) -> f64 {
        match *self {
            Model::Beta { a, b, scale } => {
                let ga = Gamma::new(a, 1.0).expect("positive shape");
                let gb = Gamma::new(b, 1.0).expect("positive shape");
                loop {
                    let x = ga.sample(rng);
                    let y = gb.sample(rng);
                    let s = x + y;
                    if s > 0.0 {
                        return scale * (x / s);
                    }
                }
            }
            Model::GeneralizedPareto { k, sigma, theta } => {
                let u: f64 = rng.random();
                let tail = -(-u).ln_1p(); // -ln(1 - u)
                let y = if k == 0.0 { sigma * tail } else { sigma * (k * tail).exp_m1() / k };
                let (lo, hi) = self.support();
                (theta + y).clamp(lo, hi)
            }
        }
    }

    /// `m` independent draws using the given stream.
    pub fn draw_many(&self, rng: &mut Rng, m: usize) -> Vec<f64> {
        match *self {
            Model::Beta { a, b, scale } => {
                let ga = Gamma::new(a, 1.0).expect("positive shape");
                let gb = Gamma::new(b, 1.0).expect("positive shape");
                (0..m)
                    .map(|_| loop {
                        let x = ga.sample(rng);
                        let y = gb.sample(rng);
                        if x + y > 0.0 {
                            break scale * (x / (x + y));
                        }
                    })
                    .collect()
            }
            Model::GeneralizedPareto { .. } => (0..m).map(|_| self.draw(rng)).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Model::Beta { a, b, scale } => a > 0.0 && b > 0.0 && scale > 0.0 && a.is_finite() && b.is_finite() && scale.is_finite(),
            Model::GeneralizedPareto { k, sigma, theta } => k.is_finite() && sigma > 0.0 && sigma.is_finite() && theta.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid model parameters {self:?}")))
        }
    }
}

/// A model together with its fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "FittedWire", try_from = "FittedWire")]
pub struct FittedDistribution {
    pub model: Model,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_fit: usize,
}

impl FittedDistribution {
    /// Evaluates the model on `xs` and fills in the information criteria.
    pub fn evaluate(model: Model, xs: &[f64]) -> Self {
        let loglik = xs.iter().map(|&x| model.ln_pdf(x)).sum();
        Self::with_loglik(model, loglik, xs.len())
    }

    pub fn with_loglik(model: Model, loglik: f64, n_fit: usize) -> Self {
        let p = model.n_params() as f64;
        Self {
            model,
            loglik,
            aic: 2.0 * p - 2.0 * loglik,
            bic: p * (n_fit as f64).ln() - 2.0 * loglik,
            n_fit,
        }
    }

    pub fn family(&self) -> Family {
        self.model.family()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.model.pdf(x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.model.cdf(x)
    }

    pub fn support(&self) -> (f64, f64) {
        self.model.support()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FittedWire {
    family: Family,
    params: WireParams,
    loglik: f64,
    aic: f64,
    bic: f64,
    n_fit: usize,
    /// Upper bound is `null` for unbounded support.
    support: (f64, Option<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum WireParams {
    Beta { a: f64, b: f64 },
    GeneralizedPareto { k: f64, sigma: f64, theta: f64 },
}

impl From<FittedDistribution> for FittedWire {
    fn from(f: FittedDistribution) -> Self {
        let (lo, hi) = f.model.support();
        let params = match f.model {
            Model::Beta { a, b, .. } => WireParams::Beta { a, b },
            Model::GeneralizedPareto { k, sigma, theta } => WireParams::GeneralizedPareto { k, sigma, theta },
        };
        FittedWire {
            family: f.model.family(),
            params,
            loglik: f.loglik,
            aic: f.aic,
            bic: f.bic,
            n_fit: f.n_fit,
            support: (lo, hi.is_finite().then_some(hi)),
        }
    }
}

impl TryFrom<FittedWire> for FittedDistribution {
    type Error = Error;

    fn try_from(w: FittedWire) -> Result<Self> {
        let model = match (w.family, w.params) {
            (Family::Beta, WireParams::Beta { a, b }) => {
                let scale = w.support.1.ok_or_else(|| invalid("beta model needs a finite support"))?;
                Model::Beta { a, b, scale }
            }
            (Family::GeneralizedPareto, WireParams::GeneralizedPareto { k, sigma, theta }) => {
                Model::GeneralizedPareto { k, sigma, theta }
            }
            (family, _) => return Err(invalid(format!("parameters do not match family {}", family.label()))),
        };
        model.validate()?;
        Ok(FittedDistribution { model, loglik: w.loglik, aic: w.aic, bic: w.bic, n_fit: w.n_fit })
    }
}

/// Beta support length for a death sample: 1 when every death is below 1,
/// otherwise `maxscale` (or the largest death when maxscale is unusable).
pub fn beta_support(deaths: &[f64], maxscale: f64) -> f64 {
    let max = deaths.iter().copied().fold(0.0, f64::max);
    if max < 1.0 {
        1.0
    } else if maxscale.is_finite() && maxscale >= max {
        maxscale
    } else {
        max
    }
}

fn check_sample(xs: &[f64]) -> Result<()> {
    if xs.len() < MIN_FIT_SIZE {
        return Err(invalid(format!("need at least {MIN_FIT_SIZE} values to fit, got {}", xs.len())));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(invalid("sample contains non-finite values"));
    }
    Ok(())
}

/// Maximum-likelihood beta fit on `[0, support]`.
///
/// Newton iterations on the score equations
/// `psi(a) - psi(a+b) = mean ln u`, `psi(b) - psi(a+b) = mean ln(1-u)`
/// starting from the method-of-moments estimate.
pub fn fit_beta(xs: &[f64], support: f64) -> Result<FittedDistribution> {
    check_sample(xs)?;
    if !(support > 0.0) || !support.is_finite() {
        return Err(invalid(format!("beta support must be positive, got {support}")));
    }
    let mut u = Vec::with_capacity(xs.len());
    for &x in xs {
        if x < 0.0 || x > support {
            return Err(Error::Support { value: x, upper: support });
        }
        u.push((x / support).clamp(BOUNDARY_NUDGE, 1.0 - BOUNDARY_NUDGE));
    }
    let n = u.len() as f64;
    let g1 = u.iter().map(|v| v.ln()).sum::<f64>() / n;
    let g2 = u.iter().map(|v| (-v).ln_1p()).sum::<f64>() / n;

    let mean = u.iter().sum::<f64>() / n;
    let var = u.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::Degenerate("all values are equal".into()));
    }
    let common = (mean * (1.0 - mean) / var - 1.0).max(1e-3);
    let (a, b) = newton_beta(g1, g2, mean * common, (1.0 - mean) * common)?;

    let model = Model::Beta { a, b, scale: support };
    let loglik = n * ((a - 1.0) * g1 + (b - 1.0) * g2 - ln_beta(a, b) - support.ln());
    Ok(FittedDistribution::with_loglik(model, loglik, xs.len()))
}

/// Mean log-likelihood of Beta(a, b) given the sufficient statistics.
fn beta_objective(a: f64, b: f64, g1: f64, g2: f64) -> f64 {
    (a - 1.0) * g1 + (b - 1.0) * g2 - ln_beta(a, b)
}

fn beta_score_norm(a: f64, b: f64, g1: f64, g2: f64) -> f64 {
    let psi_ab = digamma(a + b);
    (g1 - digamma(a) + psi_ab).hypot(g2 - digamma(b) + psi_ab)
}

fn newton_beta(g1: f64, g2: f64, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let mut f = beta_objective(a, b, g1, g2);
    for _ in 0..NEWTON_MAX_ITER {
        let psi_ab = digamma(a + b);
        let grad = [g1 - digamma(a) + psi_ab, g2 - digamma(b) + psi_ab];
        let gnorm = grad[0].hypot(grad[1]);
        if gnorm < NEWTON_TOL {
            return Ok((a, b));
        }
        let tri_ab = trigamma(a + b);
        // Negated Hessian, positive definite.
        let h11 = trigamma(a) - tri_ab;
        let h22 = trigamma(b) - tri_ab;
        let h12 = -tri_ab;
        let det = h11 * h22 - h12 * h12;
        let (da, db) = if det > 0.0 && det.is_finite() {
            ((h22 * grad[0] - h12 * grad[1]) / det, (h11 * grad[1] - h12 * grad[0]) / det)
        } else {
            (grad[0] / h11.max(1e-12), grad[1] / h22.max(1e-12))
        };
        // A step is taken when it raises the likelihood or shrinks the score;
        // the second test matters near the optimum, where the likelihood is
        // flat to rounding.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let (na, nb) = (a + step * da, b + step * db);
            if na > 0.0 && nb > 0.0 {
                let nf = beta_objective(na, nb, g1, g2);
                if nf > f || beta_score_norm(na, nb, g1, g2) < gnorm {
                    a = na;
                    b = nb;
                    f = nf;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            // No representable improvement: accept if the score is already
            // negligible at double precision.
            if gnorm < 1e-7 {
                return Ok((a, b));
            }
            return Err(Error::Convergence(format!("beta Newton line search at a={a}, b={b}")));
        }
    }
    Err(Error::Convergence(format!("beta Newton after {NEWTON_MAX_ITER} iterations")))
}

/// How the GPD location is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// Slightly below the sample minimum.
    Auto,
    Fixed(f64),
}

/// Maximum-likelihood GPD fit with the location fixed by `threshold`.
///
/// The scale is profiled out for each shape `k` (its score equation has a
/// unique root for `k > -1`), and the profile log-likelihood is maximized over
/// `k >= -1` by a coarse grid followed by golden-section refinement. Shapes
/// below -1 are excluded because the likelihood is unbounded there.
pub fn fit_gpd(xs: &[f64], threshold: Threshold) -> Result<FittedDistribution> {
    check_sample(xs)?;
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(Error::Degenerate("all values are equal".into()));
    }
    let theta = match threshold {
        Threshold::Auto => min - BOUNDARY_NUDGE * (max - min),
        Threshold::Fixed(t) => {
            if !t.is_finite() {
                return Err(invalid("threshold must be finite"));
            }
            if min < t {
                return Err(invalid(format!("value {min} lies below the threshold {t}")));
            }
            t
        }
    };
    let y: Vec<f64> = xs.iter().map(|x| x - theta).collect();
    let profile = GpdProfile::new(&y);

    let eval = |k: f64| profile.evaluate(k).map(|(_, ll)| ll).unwrap_or(f64::NEG_INFINITY);
    let mut grid_max = GPD_SHAPE_GRID_MAX;
    let (mut best_k, mut best_ll);
    loop {
        let steps = ((grid_max + 1.0) / GPD_SHAPE_GRID_STEP).round() as usize;
        let grid: Vec<f64> = (0..=steps).map(|i| -1.0 + i as f64 * GPD_SHAPE_GRID_STEP).collect();
        let values: Vec<f64> = grid.iter().map(|&k| eval(k)).collect();
        let (idx, &ll) = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("nonempty grid");
        best_k = grid[idx];
        best_ll = ll;
        if idx + 1 < grid.len() || grid_max >= 50.0 {
            let lo = grid[idx.saturating_sub(1)];
            let hi = grid[(idx + 1).min(grid.len() - 1)];
            let (k, ll) = golden_max(&eval, lo, hi, GPD_SHAPE_TOL);
            if ll > best_ll {
                best_k = k;
                best_ll = ll;
            }
            break;
        }
        grid_max *= 2.0;
    }
    if !best_ll.is_finite() {
        return Err(Error::Convergence("GPD profile likelihood".into()));
    }
    let (sigma, loglik) = profile
        .evaluate(best_k)
        .ok_or_else(|| Error::Convergence("GPD scale at the optimal shape".into()))?;
    let model = Model::GeneralizedPareto { k: best_k, sigma, theta };
    Ok(FittedDistribution::with_loglik(model, loglik, xs.len()))
}

fn golden_max(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    // Include the bracket ends: the optimum may sit on the boundary k = -1.
    [(lo, f(lo)), (hi, f(hi)), (x1, f1), (x2, f2)]
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty")
}

/// GPD log-likelihood of exceedances with the scale profiled out.
struct GpdProfile<'a> {
    y: &'a [f64],
    y_max: f64,
    y_mean: f64,
}

impl<'a> GpdProfile<'a> {
    fn new(y: &'a [f64]) -> Self {
        let y_max = y.iter().copied().fold(0.0, f64::max);
        let y_mean = y.iter().sum::<f64>() / y.len() as f64;
        Self { y, y_max, y_mean }
    }

    fn loglik(&self, k: f64, sigma: f64) -> f64 {
        let n = self.y.len() as f64;
        if k.abs() < 1e-12 {
            return -n * sigma.ln() - self.y.iter().sum::<f64>() / sigma;
        }
        let mut acc = 0.0;
        for &y in self.y {
            let arg = k * y / sigma;
            if arg <= -1.0 {
                return f64::NEG_INFINITY;
            }
            acc += arg.ln_1p();
        }
        -n * sigma.ln() - (1.0 + 1.0 / k) * acc
    }

    /// `(sigma_hat(k), loglik)`, or `None` when the scale equation fails.
    fn evaluate(&self, k: f64) -> Option<(f64, f64)> {
        if k < -1.0 {
            return None;
        }
        if k == -1.0 {
            let sigma = self.y_max;
            return Some((sigma, -(self.y.len() as f64) * sigma.ln()));
        }
        let rate = self.scale_rate(k)?;
        let sigma = 1.0 / rate;
        let ll = self.loglik(k, sigma);
        ll.is_finite().then_some((sigma, ll))
    }

    /// Root `t = 1/sigma` of `sum y t / (1 + k y t) = n / (k + 1)`; the left
    /// side increases in `t`, so the root is unique.
    fn scale_rate(&self, k: f64) -> Option<f64> {
        let n = self.y.len() as f64;
        let target = n / (k + 1.0);
        let h = |t: f64| -> (f64, f64) {
            let mut value = -target;
            let mut slope = 0.0;
            for &y in self.y {
                let denom = 1.0 + k * y * t;
                value += y * t / denom;
                slope += y / (denom * denom);
            }
            (value, slope)
        };
        let mut lo = 0.0;
        let mut hi;
        if k < 0.0 {
            hi = 1.0 / (-k * self.y_max);
        } else {
            hi = 1.0 / self.y_mean;
            let mut tries = 0;
            while h(hi).0 < 0.0 {
                lo = hi;
                hi *= 2.0;
                tries += 1;
                if tries > 200 {
                    return None;
                }
            }
        }
        // Safeguarded Newton inside [lo, hi]; for k < 0 the function blows up
        // at hi, so start from the middle.
        let mut t = if k < 0.0 { 0.5 * (lo + hi) } else { hi };
        for _ in 0..200 {
            let (value, slope) = h(t);
            if !value.is_finite() || value > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            if value.is_finite() && value.abs() <= 1e-12 * target {
                return Some(t);
            }
            let newton = if value.is_finite() && slope > 0.0 { t - value / slope } else { f64::NAN };
            t = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-15 * hi {
                return Some(t);
            }
        }
        Some(t)
    }
}

/// Options for [`select_best_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub beta_support: f64,
    pub gpd_threshold: Threshold,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { beta_support: 1.0, gpd_threshold: Threshold::Auto }
    }
}

/// Fits every candidate family and keeps the one with the lowest BIC (ties:
/// lowest AIC, then beta before GPD).
pub fn select_best(xs: &[f64], beta_support: f64) -> Result<FittedDistribution> {
    select_best_with(xs, &FitOptions { beta_support, ..FitOptions::default() })
}

pub fn select_best_with(xs: &[f64], opts: &FitOptions) -> Result<FittedDistribution> {
    fit_candidates(xs, opts)
        .into_iter()
        .filter_map(|r| r.ok())
        .min_by(|a, b| a.bic.total_cmp(&b.bic).then(a.aic.total_cmp(&b.aic)).then(a.family().cmp(&b.family())))
        .ok_or(Error::AllCandidatesFailed)
}

/// Fit attempts for each family, in family order.
pub fn fit_candidates(xs: &[f64], opts: &FitOptions) -> Vec<Result<FittedDistribution>> {
    vec![fit_beta(xs, opts.beta_support), fit_gpd(xs, opts.gpd_threshold)]
}

/// `m` i.i.d. draws from the fitted model, deterministic in `seed`.
pub fn sample(dist: &FittedDistribution, m: usize, seed: u64) -> Vec<f64> {
    dist.model.draw_many(&mut rng_from_seed(seed), m)
}
