//! Seeded samplers for the test shapes and the additive Gaussian noise model.
//!
//! All samplers are pure functions of `(parameters, seed)`.

use std::f64::consts::TAU;

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};

/// Per-coordinate variance of the additive noise.
pub const NOISE_VARIANCE: f64 = 1.0 / 9.0;

/// Default inner/outer point-count ratio for the two concentric circles.
pub const CONCENTRIC_INNER_RATIO: f64 = 0.6;

/// Each circle factor of the 3-torus has radius `1/sqrt(3)`, which puts every
/// embedded point on the unit sphere of R^6.
pub const TORUS_NORMALIZATION: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ShapeSpec {
    Circle {
        r: f64,
    },
    TwoConcentric {
        d_outer: f64,
        d_inner: f64,
        #[serde(default = "default_inner_ratio")]
        inner_ratio: f64,
    },
    TwoDistinct {
        r: f64,
        gap: f64,
    },
    Sphere {
        r: f64,
    },
    Torus3,
    /// A cloud loaded from a file; cannot be resampled.
    External,
}

fn default_inner_ratio() -> f64 {
    CONCENTRIC_INNER_RATIO
}

impl ShapeSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ShapeSpec::Circle { .. } => "circle",
            ShapeSpec::TwoConcentric { .. } => "two_concentric",
            ShapeSpec::TwoDistinct { .. } => "two_distinct",
            ShapeSpec::Sphere { .. } => "sphere",
            ShapeSpec::Torus3 => "torus3",
            ShapeSpec::External => "external",
        }
    }

    /// Number of connected components of the underlying shape.
    pub fn components(&self) -> usize {
        match self {
            ShapeSpec::TwoConcentric { .. } | ShapeSpec::TwoDistinct { .. } => 2,
            _ => 1,
        }
    }

    pub fn ambient_dim(&self) -> Option<usize> {
        match self {
            ShapeSpec::Circle { .. } | ShapeSpec::TwoConcentric { .. } | ShapeSpec::TwoDistinct { .. } => Some(2),
            ShapeSpec::Sphere { .. } => Some(3),
            ShapeSpec::Torus3 => Some(6),
            ShapeSpec::External => None,
        }
    }

    /// Point counts per component for a total of `n` points.
    pub fn split(&self, n: usize) -> Result<(usize, usize)> {
        match self {
            ShapeSpec::TwoConcentric { inner_ratio, .. } => {
                if !(*inner_ratio > 0.0) || !inner_ratio.is_finite() {
                    return Err(invalid("inner_ratio must be positive"));
                }
                let outer = (n as f64 / (1.0 + inner_ratio)).round() as usize;
                Ok((outer, n.saturating_sub(outer)))
            }
            ShapeSpec::TwoDistinct { .. } => Ok((n - n / 2, n / 2)),
            _ => Ok((n, 0)),
        }
    }

    /// Checks the sampler preconditions for a total of `n` points.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            ShapeSpec::Circle { r } | ShapeSpec::Sphere { r } => {
                check_count(n)?;
                check_positive("r", *r)
            }
            ShapeSpec::TwoConcentric { d_outer, d_inner, .. } => {
                let (a, b) = self.split(n)?;
                check_count(a)?;
                check_count(b)?;
                check_diameters(*d_outer, *d_inner)
            }
            ShapeSpec::TwoDistinct { r, gap } => {
                let (a, b) = self.split(n)?;
                if a != b {
                    return Err(invalid(format!("two_distinct needs an even n, got {n}")));
                }
                check_count(a)?;
                check_positive("r", *r)?;
                check_positive("gap", *gap)
            }
            ShapeSpec::Torus3 => check_count(n),
            ShapeSpec::External => Err(invalid("an external cloud cannot be resampled")),
        }
    }

    /// Draws `n` points from the shape.
    pub fn sample(&self, n: usize, seed: u64) -> Result<PointCloud> {
        self.validate(n)?;
        match *self {
            ShapeSpec::Circle { r } => sample_circle(n, r, seed),
            ShapeSpec::TwoConcentric { d_outer, d_inner, inner_ratio } => {
                let (outer, inner) = self.split(n)?;
                let mut cloud = sample_two_concentric(outer, inner, d_outer, d_inner, seed)?;
                if let ShapeSpec::TwoConcentric { inner_ratio: ref mut ratio, .. } = cloud.meta.shape {
                    *ratio = inner_ratio;
                }
                Ok(cloud)
            }
            ShapeSpec::TwoDistinct { r, gap } => sample_two_distinct(n / 2, r, gap, seed),
            ShapeSpec::Sphere { r } => sample_sphere(n, r, seed),
            ShapeSpec::Torus3 => sample_torus3(n, seed),
            ShapeSpec::External => unreachable!("rejected by validate"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudMeta {
    #[serde(flatten)]
    pub shape: ShapeSpec,
    pub n: usize,
    pub noise_fraction: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_seed: Option<u64>,
}

/// A finite set of points in R^dim, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    coords: Vec<f64>,
    dim: usize,
    pub meta: CloudMeta,
}

impl PointCloud {
    pub fn from_rows(rows: Vec<Vec<f64>>, meta: CloudMeta) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || dim == 0 {
            return Err(invalid("a point cloud needs at least one point with at least one coordinate"));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(invalid(format!("point {bad} has {} coordinates, expected {dim}", rows[bad].len())));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(invalid("coordinates must be finite"));
        }
        let meta = CloudMeta { n: rows.len(), ..meta };
        Ok(Self { coords: rows.into_iter().flatten().collect(), dim, meta })
    }

    fn from_flat(coords: Vec<f64>, dim: usize, meta: CloudMeta) -> Self {
        debug_assert_eq!(coords.len(), dim * meta.n);
        Self { coords, dim, meta }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Multiplies every coordinate by `factor`.
    pub fn scaled(&self, factor: f64) -> PointCloud {
        PointCloud {
            coords: self.coords.iter().map(|x| x * factor).collect(),
            dim: self.dim,
            meta: self.meta.clone(),
        }
    }
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("sample size must be at least 1"));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(invalid(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

fn check_diameters(d_outer: f64, d_inner: f64) -> Result<()> {
    check_positive("d_inner", d_inner)?;
    check_positive("d_outer", d_outer)?;
    if d_outer <= d_inner {
        return Err(invalid(format!("d_outer ({d_outer}) must exceed d_inner ({d_inner})")));
    }
    Ok(())
}

fn meta(shape: ShapeSpec, n: usize, seed: u64) -> CloudMeta {
    CloudMeta { shape, n, noise_fraction: 0.0, seed, noise_seed: None }
}

/// Grid for unit-circle coordinates. A multiple of `2^-51` in `[-1, 1]` keeps
/// two spare mantissa bits, so multiplying it by 2 or 3 (or any power of two
/// times those) is exact and circles of different radii share bit-exact
/// shapes. The rounding moves a point by at most `2^-52`.
const UNIT_GRID: f64 = (1u64 << 51) as f64;

fn on_grid(x: f64) -> f64 {
    (x * UNIT_GRID).round() / UNIT_GRID
}

fn push_circle(coords: &mut Vec<f64>, rng: &mut Rng, n: usize, r: f64, center: [f64; 2]) {
    for _ in 0..n {
        let theta = rng.random::<f64>() * TAU;
        coords.push(center[0] + r * on_grid(theta.cos()));
        coords.push(center[1] + r * on_grid(theta.sin()));
    }
}

/// `n` points on the circle of radius `r` about the origin, angles i.i.d.
/// uniform on `[0, 2π)`. For a fixed seed the angle stream does not depend on
/// `r`, so samples at different radii are exact rescalings of each other.
pub fn sample_circle(n: usize, r: f64, seed: u64) -> Result<PointCloud> {
    check_count(n)?;
    check_positive("r", r)?;
    let mut rng = rng_from_seed(seed);
    let mut coords = Vec::with_capacity(2 * n);
    push_circle(&mut coords, &mut rng, n, r, [0.0, 0.0]);
    Ok(PointCloud::from_flat(coords, 2, meta(ShapeSpec::Circle { r }, n, seed)))
}

/// Two concentric circles about the origin; the outer sample comes first.
pub fn sample_two_concentric(
    n_outer: usize,
    n_inner: usize,
    d_outer: f64,
    d_inner: f64,
    seed: u64,
) -> Result<PointCloud> {
    check_count(n_outer)?;
    check_count(n_inner)?;
    check_diameters(d_outer, d_inner)?;
    let mut rng = rng_from_seed(seed);
    let mut coords = Vec::with_capacity(2 * (n_outer + n_inner));
    push_circle(&mut coords, &mut rng, n_outer, d_outer / 2.0, [0.0, 0.0]);
    push_circle(&mut coords, &mut rng, n_inner, d_inner / 2.0, [0.0, 0.0]);
    let shape = ShapeSpec::TwoConcentric {
        d_outer,
        d_inner,
        inner_ratio: n_inner as f64 / n_outer as f64,
    };
    let n = n_outer + n_inner;
    Ok(PointCloud::from_flat(coords, 2, meta(shape, n, seed)))
}

/// Two circles of radius `r` centred at `(0, 0)` and `(2r + gap, 0)`, so the
/// closest points of the two circles are `gap` apart.
pub fn sample_two_distinct(n_each: usize, r: f64, gap: f64, seed: u64) -> Result<PointCloud> {
    check_count(n_each)?;
    check_positive("r", r)?;
    check_positive("gap", gap)?;
    let mut rng = rng_from_seed(seed);
    let mut coords = Vec::with_capacity(4 * n_each);
    push_circle(&mut coords, &mut rng, n_each, r, [0.0, 0.0]);
    push_circle(&mut coords, &mut rng, n_each, r, [2.0 * r + gap, 0.0]);
    Ok(PointCloud::from_flat(coords, 2, meta(ShapeSpec::TwoDistinct { r, gap }, 2 * n_each, seed)))
}

/// Uniform sample of the 2-sphere of radius `r` in R^3 (normalized Gaussians).
pub fn sample_sphere(n: usize, r: f64, seed: u64) -> Result<PointCloud> {
    check_count(n)?;
    check_positive("r", r)?;
    let mut rng = rng_from_seed(seed);
    let mut coords = Vec::with_capacity(3 * n);
    for _ in 0..n {
        let v = loop {
            let v: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.map(|x| r * x / norm);
            }
        };
        coords.extend_from_slice(&v);
    }
    Ok(PointCloud::from_flat(coords, 3, meta(ShapeSpec::Sphere { r }, n, seed)))
}

/// Uniform sample of the flat 3-torus, embedded in R^6 as
/// `(cos t1, sin t1, cos t2, sin t2, cos t3, sin t3) / sqrt(3)`.
///
/// The flat metric makes independent uniform angles uniform with respect to
/// the Riemannian volume.
pub fn sample_torus3(n: usize, seed: u64) -> Result<PointCloud> {
    check_count(n)?;
    let mut rng = rng_from_seed(seed);
    let mut coords = Vec::with_capacity(6 * n);
    for _ in 0..n {
        for _ in 0..3 {
            let theta = rng.random::<f64>() * TAU;
            coords.push(theta.cos() / TORUS_NORMALIZATION);
            coords.push(theta.sin() / TORUS_NORMALIZATION);
        }
    }
    Ok(PointCloud::from_flat(coords, 6, meta(ShapeSpec::Torus3, n, seed)))
}

/// Adds isotropic `N(0, I/9)` noise to `round(fraction * n)` points chosen
/// uniformly without replacement; the other points are left untouched.
pub fn add_noise(cloud: &PointCloud, fraction: f64, seed: u64) -> Result<PointCloud> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(invalid(format!("noise fraction must lie in [0, 1], got {fraction}")));
    }
    let n = cloud.len();
    let count = noisy_count(n, fraction);
    let mut out = cloud.clone();
    out.meta.noise_fraction = fraction;
    out.meta.noise_seed = Some(seed);
    if count == 0 {
        return Ok(out);
    }
    let mut rng = rng_from_seed(derive_seed(seed, crate::rng::stream::NOISE));
    let noise = Normal::new(0.0, NOISE_VARIANCE.sqrt()).expect("valid normal");
    let mut chosen = index::sample(&mut rng, n, count).into_vec();
    chosen.sort_unstable();
    let dim = out.dim;
    for i in chosen {
        for x in &mut out.coords[i * dim..(i + 1) * dim] {
            *x += noise.sample(&mut rng);
        }
    }
    Ok(out)
}

/// Number of points that [`add_noise`] perturbs.
pub fn noisy_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).min(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norms(c: &PointCloud) -> Vec<f64> {
        c.points().map(|p| p.iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
    }

    #[test]
    fn circle_single_point_on_unit_circle() {
        let c = sample_circle(1, 1.0, 99).unwrap();
        assert_eq!(c.len(), 1);
        assert!((norms(&c)[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn circle_norms_match_radius() {
        let c = sample_circle(500, 3.0, 5).unwrap();
        assert!(norms(&c).iter().all(|r| (r - 3.0).abs() < 1e-12));
    }

    #[test]
    fn circle_radius_scaling_shares_angles() {
        let a = sample_circle(500, 1.0, 11).unwrap();
        let b = sample_circle(500, 3.0, 11).unwrap();
        for (p, q) in a.points().zip(b.points()) {
            assert_eq!(p[0] * 3.0, q[0]);
            assert_eq!(p[1] * 3.0, q[1]);
        }
    }

    #[test]
    fn circle_rejects_bad_parameters() {
        assert!(sample_circle(0, 1.0, 0).is_err());
        assert!(sample_circle(5, 0.0, 0).is_err());
        assert!(sample_circle(5, -1.0, 0).is_err());
    }

    #[test]
    fn concentric_norms() {
        let c = sample_two_concentric(500, 300, 4.0, 2.0, 3).unwrap();
        assert_eq!(c.len(), 800);
        let r = norms(&c);
        assert!(r[..500].iter().all(|x| (x - 2.0).abs() < 1e-12));
        assert!(r[500..].iter().all(|x| (x - 1.0).abs() < 1e-12));

        let c = sample_two_concentric(1, 1, 4.0, 2.0, 3).unwrap();
        let r = norms(&c);
        assert!((r[0] - 2.0).abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-12);

        assert!(sample_two_concentric(5, 5, 2.0, 2.0, 0).is_err());
        assert!(sample_two_concentric(0, 5, 4.0, 2.0, 0).is_err());
    }

    #[test]
    fn concentric_split_keeps_ratio() {
        let shape = ShapeSpec::TwoConcentric { d_outer: 4.0, d_inner: 2.0, inner_ratio: 0.6 };
        assert_eq!(shape.split(800).unwrap(), (500, 300));
        assert_eq!(shape.split(1200).unwrap(), (750, 450));
        assert_eq!(shape.split(2400).unwrap(), (1500, 900));
        let (o, i) = shape.split(1200).unwrap();
        assert!((i as f64 / o as f64 - 0.6).abs() < 1e-12);
    }

    #[test]
    fn distinct_circle_geometry() {
        let c = sample_two_distinct(300, 0.3, 0.6, 8).unwrap();
        assert_eq!(c.len(), 600);
        let mut min_cross = f64::INFINITY;
        for p in c.points().take(300) {
            assert!(((p[0]).hypot(p[1]) - 0.3).abs() < 1e-12);
            for q in c.points().skip(300) {
                min_cross = min_cross.min((p[0] - q[0]).hypot(p[1] - q[1]));
            }
        }
        for q in c.points().skip(300) {
            assert!(((q[0] - 1.2).hypot(q[1]) - 0.3).abs() < 1e-12);
        }
        assert!(min_cross >= 0.6 - 1e-12);

        let two = sample_two_distinct(1, 0.3, 0.6, 1).unwrap();
        let (p, q) = (two.point(0), two.point(1));
        let d = (p[0] - q[0]).hypot(p[1] - q[1]);
        assert!((0.6 - 1e-12..=0.6 + 4.0 * 0.3).contains(&d));
    }

    #[test]
    fn sphere_is_on_sphere_and_balanced() {
        let c = sample_sphere(1000, 1.0, 2).unwrap();
        assert!(norms(&c).iter().all(|r| (r - 1.0).abs() < 1e-12));

        let n = 100_000;
        let c = sample_sphere(n, 1.0, 3).unwrap();
        let bound = 4.0 / (n as f64).sqrt();
        for k in 0..3 {
            let mean = c.points().map(|p| p[k]).sum::<f64>() / n as f64;
            assert!(mean.abs() < bound, "coordinate {k} mean {mean}");
        }
        let up = c.points().filter(|p| p[2] > 0.0).count() as f64 / n as f64;
        assert!((up - 0.5).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn torus_points_satisfy_circle_constraints() {
        let c = sample_torus3(1500, 4).unwrap();
        assert_eq!((c.len(), c.dim()), (1500, 6));
        let s = TORUS_NORMALIZATION;
        for p in c.points() {
            for k in 0..3 {
                let (x, y) = (p[2 * k] * s, p[2 * k + 1] * s);
                assert!((x * x + y * y - 1.0).abs() < 1e-12);
            }
        }
        let n = 100_000;
        let c = sample_torus3(n, 5).unwrap();
        for k in 0..6 {
            let mean = c.points().map(|p| p[k] * s).sum::<f64>() / n as f64;
            assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn noise_zero_is_identity() {
        let c = sample_circle(200, 1.0, 1).unwrap();
        let noisy = add_noise(&c, 0.0, 9).unwrap();
        assert_eq!(noisy.coords(), c.coords());
        assert_eq!(noisy.meta.noise_fraction, 0.0);
    }

    #[test]
    fn noise_changes_exact_count() {
        let c = sample_circle(500, 1.0, 1).unwrap();
        let noisy = add_noise(&c, 0.3, 2).unwrap();
        let changed = c.points().zip(noisy.points()).filter(|(a, b)| a != b).count();
        assert_eq!(changed, 150);
        assert_eq!(noisy.meta.noise_fraction, 0.3);
    }

    #[test]
    fn noise_variance_is_one_ninth() {
        let c = sample_circle(10_000, 1.0, 1).unwrap();
        let noisy = add_noise(&c, 1.0, 7).unwrap();
        for k in 0..2 {
            let diffs: Vec<f64> = c.points().zip(noisy.points()).map(|(a, b)| b[k] - a[k]).collect();
            let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
            let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
            assert!((var - NOISE_VARIANCE).abs() < 0.1 * NOISE_VARIANCE, "variance {var}");
        }
    }

    #[test]
    fn noise_rejects_bad_fraction() {
        let c = sample_circle(10, 1.0, 1).unwrap();
        assert!(add_noise(&c, 1.5, 0).is_err());
        assert!(add_noise(&c, -0.1, 0).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let shapes = [
            ShapeSpec::Circle { r: 1.0 },
            ShapeSpec::TwoConcentric { d_outer: 4.0, d_inner: 2.0, inner_ratio: 0.6 },
            ShapeSpec::TwoDistinct { r: 0.3, gap: 0.6 },
            ShapeSpec::Sphere { r: 1.0 },
            ShapeSpec::Torus3,
        ];
        for shape in shapes {
            let a = shape.sample(80, 17).unwrap();
            let b = shape.sample(80, 17).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.meta.shape, shape);
            let na = add_noise(&a, 0.5, 3).unwrap();
            let nb = add_noise(&b, 0.5, 3).unwrap();
            assert_eq!(na, nb);
        }
    }
}
