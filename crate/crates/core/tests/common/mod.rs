//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use ripstat::geometry::{CloudMeta, PointCloud, ShapeSpec};
use ripstat::rips::DistanceMatrix;

pub fn external(rows: Vec<Vec<f64>>) -> PointCloud {
    let meta = CloudMeta { shape: ShapeSpec::External, n: rows.len(), noise_fraction: 0.0, seed: 0, noise_seed: None };
    PointCloud::from_rows(rows, meta).unwrap()
}

/// Sorts every edge and merges components with a plain union-find; each
/// merge is one finite H0 death.
pub fn kruskal_deaths(d: &DistanceMatrix) -> Vec<f64> {
    let n = d.len();
    let mut edges: Vec<(f64, usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| (d.get(i, j), i, j)).collect();
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            x = p[x];
        }
        x
    }
    let mut deaths = Vec::new();
    for (w, i, j) in edges {
        let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
            deaths.push(w);
        }
    }
    deaths
}

/// Standard column reduction of the full boundary matrix of the Rips complex
/// up to dimension 2. Returns `(dim, birth, death)` for every pair with
/// positive persistence.
pub fn reduction_pairs(d: &DistanceMatrix) -> Vec<(usize, f64, f64)> {
    let n = d.len();
    let mut simplices: Vec<(f64, Vec<usize>)> = (0..n).map(|i| (0.0, vec![i])).collect();
    for i in 0..n {
        for j in i + 1..n {
            simplices.push((d.get(i, j), vec![i, j]));
            for k in j + 1..n {
                simplices.push((d.get(i, j).max(d.get(i, k)).max(d.get(j, k)), vec![i, j, k]));
            }
        }
    }
    simplices.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.len().cmp(&b.1.len())).then(a.1.cmp(&b.1)));
    let index: std::collections::HashMap<Vec<usize>, usize> = simplices.iter().enumerate().map(|(i, s)| (s.1.clone(), i)).collect();
    let mut columns: Vec<Vec<usize>> = simplices
        .iter()
        .map(|(_, s)| {
            let mut col: Vec<usize> = if s.len() == 1 {
                Vec::new()
            } else {
                (0..s.len())
                    .map(|skip| {
                        let face: Vec<usize> = s.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, &v)| v).collect();
                        index[&face]
                    })
                    .collect()
            };
            col.sort_unstable();
            col
        })
        .collect();
    let mut low_owner: std::collections::HashMap<usize, usize> = Default::default();
    let mut pairs = Vec::new();
    for c in 0..columns.len() {
        while let Some(&low) = columns[c].last() {
            match low_owner.get(&low) {
                Some(&other) => {
                    let mut merged = Vec::new();
                    let (a, b) = (&columns[c], &columns[other]);
                    let (mut i, mut j) = (0, 0);
                    while i < a.len() || j < b.len() {
                        if j == b.len() || (i < a.len() && a[i] < b[j]) {
                            merged.push(a[i]);
                            i += 1;
                        } else if i == a.len() || b[j] < a[i] {
                            merged.push(b[j]);
                            j += 1;
                        } else {
                            i += 1;
                            j += 1;
                        }
                    }
                    columns[c] = merged;
                }
                None => {
                    low_owner.insert(low, c);
                    let (birth, death) = (simplices[low].0, simplices[c].0);
                    if death > birth {
                        pairs.push((simplices[low].1.len() - 1, birth, death));
                    }
                    break;
                }
            }
        }
    }
    pairs
}

/// Minimum over all matchings of the maximum cost, by enumerating every
/// injective assignment of `a` into `b` plus the diagonal.
pub fn brute_bottleneck(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    fn diag(p: (f64, f64)) -> f64 {
        (p.1 - p.0) / 2.0
    }
    fn go(i: usize, a: &[(f64, f64)], b: &[(f64, f64)], used: &mut Vec<bool>, worst: f64, best: &mut f64) {
        if worst >= *best {
            return;
        }
        if i == a.len() {
            let rest = b.iter().zip(used.iter()).filter(|(_, u)| !**u).map(|(&q, _)| diag(q)).fold(0.0, f64::max);
            *best = best.min(worst.max(rest));
            return;
        }
        go(i + 1, a, b, used, worst.max(diag(a[i])), best);
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                let cost = (a[i].0 - b[j].0).abs().max((a[i].1 - b[j].1).abs());
                go(i + 1, a, b, used, worst.max(cost), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(0, a, b, &mut vec![false; b.len()], 0.0, &mut best);
    best
}

/// Tanh-sinh quadrature on `[lo, hi]`.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let half = 0.5 * (hi - lo);
    let h = 1.0 / 128.0;
    let mut sum = 0.0;
    for i in -(6 * 128)..=(6 * 128) {
        let t = i as f64 * h;
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        let weight = std::f64::consts::FRAC_PI_2 * t.cosh() / u.cosh().powi(2);
        let x = if u < 0.0 { lo + half * 2.0 / (1.0 + (2.0 * u).exp()) } else { hi - half * 2.0 / (1.0 + (-2.0 * u).exp()) };
        if x > lo && x < hi && weight > 0.0 {
            sum += weight * f(x);
        }
    }
    sum * half * h
}
