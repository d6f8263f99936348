//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! failure status if any criterion fails.
//!
//! Statistical criteria run over fixed seeds, so the outcome is reproducible.

use std::f64::consts::SQRT_2;
use std::time::{Duration, Instant};

use rand::Rng as _;
use rayon::prelude::*;

use ripstat::diagrams::{bottleneck_points, classify_bars, finite_deaths};
use ripstat::distfit::{self, fit_beta, fit_gpd, Family, Model, Threshold};
use ripstat::geometry::{sample_circle, ShapeSpec};
use ripstat::inference::{
    count_signals, fit_deaths, goodness_suite, ks_two_sample, median, observe,
    reference_c_max, replicate_diagrams, test_order_statistic, SuiteConfig,
};
use ripstat::rips::{h0_persistence, optimal_maxscale, pairwise_distances, rips_persistence};
use ripstat::rng::rng_from_seed;

mod common;
use common::{brute_bottleneck, external, kruskal_deaths, reduction_pairs, tanh_sinh};

const SEEDS: u64 = 20;
const N_REPS: usize = 1000;
const ALPHA: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn seeds() -> impl ParallelIterator<Item = u64> {
    (1..=SEEDS).into_par_iter()
}

// ---------------------------------------------------------------------------
// Criteria

fn h0_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(2024);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=60);
        let dim = rng.random_range(1..=6);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let d = pairwise_distances(&external(rows));
        let mut fast = finite_deaths(&h0_persistence(&d, f64::INFINITY).unwrap());
        fast.sort_by(f64::total_cmp);
        if fast != kruskal_deaths(&d) {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(mismatches == 0 && elapsed < Duration::from_secs(10), format!("{mismatches} mismatches in 100 clouds, {elapsed:.2?} (limit 10 s)"))
}

fn scale_equivariance() -> Outcome {
    let worst = (1..=5u64)
        .map(|seed| {
            let deaths = |r: f64| {
                let c = sample_circle(500, r, seed).unwrap();
                let mut d = finite_deaths(&h0_persistence(&pairwise_distances(&c), f64::INFINITY).unwrap());
                d.sort_by(f64::total_cmp);
                d
            };
            let (d1, d3) = (deaths(1.0), deaths(3.0));
            assert_eq!(d1.len(), d3.len());
            d1.iter().zip(&d3).map(|(a, b)| ((b - 3.0 * a) / (3.0 * a)).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    outcome(worst <= 1e-12, format!("max relative deviation {worst:.2e} (tolerance 1e-12), 5 seeds"))
}

fn maxscale_stability() -> Outcome {
    let mut ok = true;
    let mut detail = String::new();
    for seed in 1..=5u64 {
        let d = pairwise_distances(&sample_circle(500, 1.0, seed).unwrap());
        let diagrams: Vec<_> = [0.3, 0.5, 5.0].iter().map(|&s| h0_persistence(&d, s).unwrap()).collect();
        let deaths: Vec<Vec<f64>> = diagrams.iter().map(finite_deaths).collect();
        let max_death = deaths[0].iter().copied().fold(0.0, f64::max);
        let clipped = diagrams.iter().flat_map(|g| &g.pairs).filter(|p| p.clipped).count();
        let infinite: Vec<usize> = diagrams.iter().map(|g| g.pairs.iter().filter(|p| p.is_infinite()).count()).collect();
        let same = deaths.windows(2).all(|w| w[0] == w[1]) && clipped == 0 && infinite.iter().all(|&c| c == 1);
        ok &= same;
        if seed == 1 {
            detail = format!("max finite death {max_death:.3} below every maxscale; ");
        }
    }
    detail += if ok { "diagrams at 0.3, 0.5, 5 identical for 5 seeds" } else { "diagrams differ" };
    outcome(ok, detail)
}

fn h1_square() -> Outcome {
    let square = external(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]);
    let d = pairwise_distances(&square);
    let diag = rips_persistence(&d, 2.0, 1).unwrap();
    let h1: Vec<_> = diag.in_dim(1).collect();
    let exact = h1.len() == 1 && (h1[0].birth - 1.0).abs() <= 1e-9 && (h1[0].death - SQRT_2).abs() <= 1e-9;
    let oracle: Vec<_> = reduction_pairs(&d).into_iter().filter(|p| p.0 == 1).collect();
    let agrees = oracle.len() == 1 && (oracle[0].1 - 1.0).abs() <= 1e-9 && (oracle[0].2 - SQRT_2).abs() <= 1e-9;
    // The oracle also covers random small clouds in every degree.
    let mut rng = rng_from_seed(99);
    let mut random_ok = true;
    for _ in 0..30 {
        let n = rng.random_range(4..=9);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let d = pairwise_distances(&external(rows));
        let mut fast: Vec<(usize, f64, f64)> = rips_persistence(&d, f64::INFINITY, 1)
            .unwrap()
            .pairs
            .iter()
            .filter(|p| !p.is_infinite() && p.dim <= 1 && p.death > p.birth)
            .map(|p| (p.dim, p.birth, p.death))
            .collect();
        let mut slow: Vec<_> = reduction_pairs(&d).into_iter().filter(|p| p.0 <= 1).collect();
        let key = |a: &(usize, f64, f64), b: &(usize, f64, f64)| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2));
        fast.sort_by(key);
        slow.sort_by(key);
        random_ok &= fast == slow;
    }
    let detail = match h1.first() {
        Some(p) => format!("{} H1 pair(s), first ({}, {}); reduction oracle agrees: {agrees}; 30 random clouds agree: {random_ok}", h1.len(), p.birth, p.death),
        None => "no H1 pair".to_string(),
    };
    outcome(exact && agrees && random_ok, detail)
}

fn circle_table() -> Outcome {
    let start = Instant::now();
    let rows: Vec<(Family, f64, f64, f64)> = seeds()
        .map(|seed| {
            let obs = observe(&ShapeSpec::Circle { r: 1.0 }, 500, 0.0, 1.0, seed).unwrap();
            let fit = fit_deaths(&obs.deaths, 1.0, Threshold::Auto).unwrap();
            let beta = distfit::fit_beta(&obs.deaths, 1.0).unwrap();
            let Model::Beta { a, b, .. } = beta.model else { unreachable!() };
            let sims = replicate_diagrams(&fit, obs.deaths.len(), N_REPS, seed).unwrap();
            let p = test_order_statistic(&obs.deaths, &sims, 1, ALPHA).unwrap().p_value;
            (fit.family(), a, b, p)
        })
        .collect();
    let elapsed = start.elapsed();
    let n_beta = rows.iter().filter(|r| r.0 == Family::Beta).count();
    let in_range = rows.iter().filter(|r| (0.7..=1.3).contains(&r.1) && (40.0..=120.0).contains(&r.2)).count();
    let insignificant = rows.iter().filter(|r| r.3 > 0.05).count();
    let mean_a = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
    let mean_b = rows.iter().map(|r| r.2).sum::<f64>() / rows.len() as f64;
    outcome(
        n_beta >= 16 && in_range >= 16 && insignificant >= 18 && elapsed < Duration::from_secs(120),
        format!(
            "beta selected {n_beta}/20 (need 16), a in [0.7,1.3] and b in [40,120] {in_range}/20 (need 16), \
             T1 p > 0.05 {insignificant}/20 (need 18); mean a {mean_a:.3}, mean b {mean_b:.1}; {elapsed:.1?} (limit 2 min)"
        ),
    )
}

fn concentric_table() -> Outcome {
    let shape = ShapeSpec::TwoConcentric { d_outer: 4.0, d_inner: 2.0, inner_ratio: 0.6 };
    let rows: Vec<(f64, f64, usize)> = seeds()
        .map(|seed| {
            let obs = observe(&shape, 800, 0.0, 1.0, seed).unwrap();
            let fit = fit_deaths(&obs.deaths, 1.0, Threshold::Auto).unwrap();
            let sims = replicate_diagrams(&fit, obs.deaths.len(), N_REPS, seed).unwrap();
            let p1 = test_order_statistic(&obs.deaths, &sims, 1, ALPHA).unwrap().p_value;
            let p2 = test_order_statistic(&obs.deaths, &sims, 2, ALPHA).unwrap().p_value;
            let count = count_signals(&obs.deaths, &fit, N_REPS, seed, ALPHA).unwrap().n_components;
            (p1, p2, count)
        })
        .collect();
    let pattern = rows.iter().filter(|r| r.0 < 0.01 && r.1 > 0.05).count();
    let two = rows.iter().filter(|r| r.2 == 2).count();
    outcome(pattern >= 18 && two >= 18, format!("T1 p < 0.01 and T2 p > 0.05 in {pattern}/20, two signals in {two}/20 (need 18 each)"))
}

fn distinct_and_sphere() -> Outcome {
    let distinct = ShapeSpec::TwoDistinct { r: 0.3, gap: 0.6 };
    let two = seeds()
        .filter(|&seed| {
            let obs = observe(&distinct, 600, 0.0, 1.0, seed).unwrap();
            let fit = fit_deaths(&obs.deaths, 1.0, Threshold::Auto).unwrap();
            count_signals(&obs.deaths, &fit, N_REPS, seed, ALPHA).unwrap().n_components == 2
        })
        .count();

    let sphere = ShapeSpec::Sphere { r: 1.0 };
    let sphere_small = seeds()
        .filter(|&seed| {
            let cloud = sphere.sample(300, seed).unwrap();
            let d = pairwise_distances(&cloud);
            let maxscale = optimal_maxscale(&d, 0.1, 1.5).unwrap();
            let diag = rips_persistence(&d, maxscale, 2).unwrap();
            let deaths = finite_deaths(&diag);
            let fit = fit_deaths(&deaths, maxscale, Threshold::Auto).unwrap();
            count_signals(&deaths, &fit, N_REPS, seed, ALPHA).unwrap().n_components == 1
        })
        .count();
    let sphere_h0 = seeds()
        .filter(|&seed| {
            let obs = observe(&sphere, 1000, 0.0, 1.0, seed).unwrap();
            let fit = fit_deaths(&obs.deaths, 1.0, Threshold::Auto).unwrap();
            count_signals(&obs.deaths, &fit, N_REPS, seed, ALPHA).unwrap().n_components == 1
        })
        .count();
    outcome(
        two >= 18 && sphere_small >= 18 && sphere_h0 >= 18,
        format!(
            "two distinct circles: 2 signals in {two}/20; sphere n=300 (degree-2 diagram): 1 signal in {sphere_small}/20; \
             sphere n=1000 (H0): 1 signal in {sphere_h0}/20 (need 18 each)"
        ),
    )
}

fn noise_monotonicity() -> Outcome {
    let circle = ShapeSpec::Circle { r: 1.0 };
    let props: Vec<[f64; 3]> = seeds()
        .map(|seed| {
            let clean = observe(&circle, 500, 0.0, 1.0, seed).unwrap();
            let c_max = reference_c_max(&clean.deaths, circle.components()).unwrap();
            let prop = |m: f64| classify_bars(&observe(&circle, 500, m, 1.0, seed).unwrap().deaths, c_max).unwrap().prop_long;
            [prop(0.3), prop(0.7), prop(1.0)]
        })
        .collect();
    let increasing = props.iter().filter(|p| p[0] < p[1] && p[1] < p[2]).count();
    let mean = |k: usize| props.iter().map(|p| p[k]).sum::<f64>() / props.len() as f64;
    outcome(
        increasing >= 16,
        format!("strictly increasing in {increasing}/20 (need 16); mean prop_long {:.3}, {:.3}, {:.3}", mean(0), mean(1), mean(2)),
    )
}

fn bottleneck_suite() -> Outcome {
    let start = Instant::now();
    let medians: Vec<(f64, f64)> = seeds()
        .map(|meta| {
            let run = |m: f64| {
                let config = SuiteConfig { shape: ShapeSpec::Circle { r: 1.0 }, n: 1000, noise_fraction: m, maxscale: 1.0, n_collections: 30, seed: meta };
                goodness_suite(&config).unwrap().median_bottleneck
            };
            (run(0.0), run(0.3))
        })
        .collect();
    let larger = medians.iter().filter(|(clean, noisy)| noisy > clean).count();

    let mut rng = rng_from_seed(5);
    let mut mismatches = 0;
    for _ in 0..500 {
        let diagram = |rng: &mut ripstat::rng::Rng| -> Vec<(f64, f64)> {
            let k = rng.random_range(0..=5);
            (0..k)
                .map(|_| {
                    let b = rng.random_range(0..8) as f64 / 4.0;
                    (b, b + rng.random_range(0..8) as f64 / 4.0)
                })
                .collect()
        };
        let (a, b) = (diagram(&mut rng), diagram(&mut rng));
        if bottleneck_points(&a, &b) != brute_bottleneck(&a, &b) {
            mismatches += 1;
        }
    }
    let m0 = median(&medians.iter().map(|m| m.0).collect::<Vec<_>>());
    let m30 = median(&medians.iter().map(|m| m.1).collect::<Vec<_>>());
    outcome(
        larger >= 18 && mismatches == 0,
        format!(
            "noisy median larger in {larger}/20 (need 18), typical medians {m0:.4} vs {m30:.4}; \
             {mismatches} oracle mismatches in 500 diagram pairs; {:.1?}",
            start.elapsed()
        ),
    )
}

fn ks_self() -> Outcome {
    let deaths = |seed: u64| observe(&ShapeSpec::Circle { r: 1.0 }, 1000, 0.0, 1.0, seed).unwrap().deaths;
    let accepted = seeds().filter(|&seed| ks_two_sample(&deaths(seed), &deaths(seed + 1000)).unwrap().p_value > 0.05).count();
    let same = deaths(1);
    let identical = ks_two_sample(&same, &same).unwrap();
    outcome(
        accepted >= 16 && identical.statistic == 0.0,
        format!("p > 0.05 in {accepted}/20 (need 16); identical lists statistic {}", identical.statistic),
    )
}

fn fit_recovery() -> Outcome {
    let m = 10_000;
    let beta_true = Model::Beta { a: 2.0, b: 5.0, scale: 1.0 };
    let gpd_true = Model::GeneralizedPareto { k: -1.0, sigma: 0.25, theta: 0.0 };
    let beta_fit = fit_beta(&beta_true.draw_many(&mut rng_from_seed(11), m), 1.0).unwrap();
    let gpd_fit = fit_gpd(&gpd_true.draw_many(&mut rng_from_seed(12), m), Threshold::Fixed(0.0)).unwrap();
    let within = |est: f64, truth: f64| (est - truth).abs() <= 0.1 * truth.abs();
    let Model::Beta { a, b, .. } = beta_fit.model else { unreachable!() };
    let Model::GeneralizedPareto { k, sigma, .. } = gpd_fit.model else { unreachable!() };
    let recovered = within(a, 2.0) && within(b, 5.0) && within(k, -1.0) && within(sigma, 0.25);
    let integral = |f: &distfit::FittedDistribution| {
        let (lo, hi) = f.support();
        tanh_sinh(|x| f.pdf(x), lo, hi)
    };
    let (ib, ig) = (integral(&beta_fit), integral(&gpd_fit));
    let normalized = (ib - 1.0).abs() <= 1e-6 && (ig - 1.0).abs() <= 1e-6;
    outcome(
        recovered && normalized,
        format!("beta ({a:.3}, {b:.3}), GPD k {k:.4} sigma {sigma:.4} (10% tolerance); pdf integrals {ib:.9}, {ig:.9} (1 +- 1e-6)"),
    )
}

fn calibration() -> Outcome {
    let obs = observe(&ShapeSpec::Circle { r: 1.0 }, 500, 0.0, 1.0, 1).unwrap();
    let fit = fit_deaths(&obs.deaths, 1.0, Threshold::Auto).unwrap();
    let n = obs.deaths.len();
    let rejections = (0..200u64)
        .into_par_iter()
        .filter(|&trial| {
            let observed = distfit::sample(&fit, n, 10_000 + trial);
            let sims = replicate_diagrams(&fit, n, N_REPS, 20_000 + trial).unwrap();
            test_order_statistic(&observed, &sims, 1, ALPHA).unwrap().significant
        })
        .count();
    let rate = rejections as f64 / 200.0;
    outcome((0.01..=0.12).contains(&rate), format!("rejection rate {rate:.3} over 200 trials (allowed [0.01, 0.12]), {} model", fit.family().label()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("H0 oracle equivalence", h0_oracle),
        ("scale equivariance", scale_equivariance),
        ("maxscale stability", maxscale_stability),
        ("H1 exactness", h1_square),
        ("one circle inference", circle_table),
        ("two concentric circles inference", concentric_table),
        ("two distinct circles and sphere", distinct_and_sphere),
        ("noise monotonicity", noise_monotonicity),
        ("bottleneck suite", bottleneck_suite),
        ("KS self-comparison", ks_self),
        ("distribution-fit recovery", fit_recovery),
        ("calibration", calibration),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let status = if result.pass { "PASS" } else { "FAIL" };
        println!("{status} [{:>2}] {name}: {} ({:.1?})", i + 1, result.detail, start.elapsed());
        failed += usize::from(!result.pass);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
