//! Diagram-level statistics: finite deaths, short/long bar classification,
//! nearest-rank percentiles, sample moments and bottleneck distance.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rips::PersistenceDiagram;

/// Percentile levels reported for H0 death times.
pub const DEFAULT_LEVELS: [f64; 3] = [95.0, 99.0, 100.0];

/// All H0 deaths except the essential class; clipped deaths keep their
/// clipped value. Diagram order is preserved.
pub fn finite_deaths(diag: &PersistenceDiagram) -> Vec<f64> {
    diag.in_dim(0).filter(|p| !p.is_infinite()).map(|p| p.death).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarClassification {
    pub c_max: f64,
    pub n_short: usize,
    pub n_long: usize,
    pub prop_short: f64,
    pub prop_long: f64,
}

/// Splits deaths into short (`<= c_max`) and long (`> c_max`) bars.
pub fn classify_bars(deaths: &[f64], c_max: f64) -> Result<BarClassification> {
    if !(c_max > 0.0) {
        return Err(invalid(format!("c_max must be positive, got {c_max}")));
    }
    if deaths.is_empty() {
        return Err(Error::EmptyInput("no deaths to classify".into()));
    }
    let n_long = deaths.iter().filter(|&&d| d > c_max).count();
    let n_short = deaths.len() - n_long;
    let total = deaths.len() as f64;
    Ok(BarClassification {
        c_max,
        n_short,
        n_long,
        prop_short: n_short as f64 / total,
        prop_long: n_long as f64 / total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileTable {
    pub levels: Vec<f64>,
    pub values: Vec<f64>,
}

impl PercentileTable {
    pub fn get(&self, level: f64) -> Option<f64> {
        self.levels.iter().position(|&l| l == level).map(|i| self.values[i])
    }
}

/// Nearest-rank percentiles: the value of rank `ceil(p/100 * n)` in ascending
/// order, so the 100th percentile is the maximum.
pub fn percentiles(xs: &[f64], levels: &[f64]) -> Result<PercentileTable> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("percentiles of an empty list".into()));
    }
    if let Some(bad) = levels.iter().find(|l| !(0.0..=100.0).contains(*l)) {
        return Err(invalid(format!("percentile level {bad} outside [0, 100]")));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let values = levels.iter().map(|&p| nearest_rank(&sorted, p)).collect();
    Ok(PercentileTable { levels: levels.to_vec(), values })
}

/// Nearest-rank percentile of an ascending slice.
pub fn nearest_rank(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    let rank = ((level * n as f64) / 100.0).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

fn central_moments(xs: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() < 3 {
        return Err(Error::Degenerate(format!("need at least 3 values, got {}", xs.len())));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    if !(m2 > 0.0) {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok((m2, m3, m4))
}

/// Sample skewness `m3 / m2^(3/2)`.
pub fn skewness(xs: &[f64]) -> Result<f64> {
    let (m2, m3, _) = central_moments(xs)?;
    Ok(m3 / m2.powf(1.5))
}

/// Sample kurtosis `m4 / m2^2` (not excess; a normal sample gives about 3).
pub fn kurtosis(xs: &[f64]) -> Result<f64> {
    let (m2, _, m4) = central_moments(xs)?;
    Ok(m4 / (m2 * m2))
}

/// Bottleneck distance between the finite degree-`dim` points of two
/// diagrams. Essential (infinite) points are dropped from both sides.
pub fn bottleneck(a: &PersistenceDiagram, b: &PersistenceDiagram, dim: usize) -> f64 {
    let points = |d: &PersistenceDiagram| -> Vec<(f64, f64)> {
        d.in_dim(dim).filter(|p| !p.is_infinite()).map(|p| (p.birth, p.death)).collect()
    };
    bottleneck_points(&points(a), &points(b))
}

#[inline]
fn linf(p: (f64, f64), q: (f64, f64)) -> f64 {
    (p.0 - q.0).abs().max((p.1 - q.1).abs())
}

#[inline]
fn to_diagonal(p: (f64, f64)) -> f64 {
    (p.1 - p.0) / 2.0
}

/// Bottleneck distance between two finite multisets of `(birth, death)`
/// points under the L-infinity ground metric, with unmatched points sent to
/// the diagonal at half their persistence.
///
/// The optimum is one of the finitely many pairwise or diagonal costs, so the
/// value is found exactly by binary search over those candidates with a
/// matching-based feasibility test.
pub fn bottleneck_points(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let mut b_sorted = b.to_vec();
    b_sorted.sort_by(|p, q| p.1.total_cmp(&q.1).then(p.0.total_cmp(&q.0)));
    let mut a_sorted = a.to_vec();
    a_sorted.sort_by(|p, q| p.1.total_cmp(&q.1).then(p.0.total_cmp(&q.0)));
    let (a, b) = (&a_sorted[..], &b_sorted[..]);

    let upper = greedy_upper_bound(a, b);

    let mut candidates: Vec<f64> = a.iter().chain(b).map(|&p| to_diagonal(p)).filter(|&c| c <= upper).collect();
    candidates.push(upper);
    for &p in a {
        let (lo, hi) = death_window(b, p.1, upper);
        for &q in &b[lo..hi] {
            let c = linf(p, q);
            if c <= upper {
                candidates.push(c);
            }
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    // feasible(upper) holds: upper is the cost of an explicit matching.
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(a, b, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

/// Cost of pairing the points of both diagrams by decreasing persistence and
/// sending the leftovers to the diagonal, or of sending everything to the
/// diagonal, whichever is smaller.
fn greedy_upper_bound(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let all_diag = a.iter().chain(b).map(|&p| to_diagonal(p)).fold(0.0, f64::max);
    let by_persistence = |v: &[(f64, f64)]| {
        let mut v = v.to_vec();
        v.sort_by(|p, q| to_diagonal(*q).total_cmp(&to_diagonal(*p)));
        v
    };
    let (pa, pb) = (by_persistence(a), by_persistence(b));
    let k = pa.len().min(pb.len());
    let mut paired = 0.0f64;
    for i in 0..k {
        paired = paired.max(linf(pa[i], pb[i]));
    }
    for &p in pa[k..].iter().chain(&pb[k..]) {
        paired = paired.max(to_diagonal(p));
    }
    all_diag.min(paired)
}

/// Index range of points (sorted by death) whose death lies within `radius`
/// of `death`.
fn death_window(sorted: &[(f64, f64)], death: f64, radius: f64) -> (usize, usize) {
    let lo = sorted.partition_point(|q| q.1 < death - radius);
    let hi = sorted.partition_point(|q| q.1 <= death + radius);
    (lo, hi.max(lo))
}

/// A matching of cost at most `delta` exists iff every point that cannot go
/// to the diagonal can be matched. By the Mendelsohn-Dulmage theorem it is
/// enough to saturate the forced points of each side separately.
fn feasible(a: &[(f64, f64)], b: &[(f64, f64)], delta: f64) -> bool {
    saturates_forced(a, b, delta) && saturates_forced(b, a, delta)
}

/// Whether every point of `from` with diagonal cost above `delta` can be
/// matched into `to` (sorted by death) with cost at most `delta`.
fn saturates_forced(from: &[(f64, f64)], to: &[(f64, f64)], delta: f64) -> bool {
    let forced: Vec<(f64, f64)> = from.iter().copied().filter(|&p| to_diagonal(p) > delta).collect();
    if forced.is_empty() {
        return true;
    }
    if forced.len() > to.len() {
        return false;
    }
    let adjacency: Vec<Vec<u32>> = forced
        .iter()
        .map(|&p| {
            let (lo, hi) = death_window(to, p.1, delta);
            (lo..hi).filter(|&j| linf(p, to[j]) <= delta).map(|j| j as u32).collect()
        })
        .collect();
    if adjacency.iter().any(Vec::is_empty) {
        return false;
    }
    hopcroft_karp(&adjacency, to.len()) == forced.len()
}

/// Maximum bipartite matching size.
fn hopcroft_karp(adjacency: &[Vec<u32>], n_right: usize) -> usize {
    const FREE: u32 = u32::MAX;
    let n_left = adjacency.len();
    let mut match_left = vec![FREE; n_left];
    let mut match_right = vec![FREE; n_right];
    let mut dist = vec![0u32; n_left];
    let mut queue = Vec::with_capacity(n_left);
    let mut matched = 0;

    // Greedy start.
    for (u, nbrs) in adjacency.iter().enumerate() {
        if let Some(&v) = nbrs.iter().find(|&&v| match_right[v as usize] == FREE) {
            match_left[u] = v;
            match_right[v as usize] = u as u32;
            matched += 1;
        }
    }

    loop {
        // BFS layering from free left vertices.
        queue.clear();
        for u in 0..n_left {
            if match_left[u] == FREE {
                dist[u] = 0;
                queue.push(u as u32);
            } else {
                dist[u] = u32::MAX;
            }
        }
        let mut found = false;
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head] as usize;
            head += 1;
            for &v in &adjacency[u] {
                let w = match_right[v as usize];
                if w == FREE {
                    found = true;
                } else if dist[w as usize] == u32::MAX {
                    dist[w as usize] = dist[u] + 1;
                    queue.push(w);
                }
            }
        }
        if !found {
            return matched;
        }
        // DFS along layers, iterative with per-vertex edge cursors.
        let mut cursor = vec![0usize; n_left];
        for root in 0..n_left {
            if match_left[root] != FREE {
                continue;
            }
            let mut stack: Vec<usize> = vec![root];
            while let Some(&u) = stack.last() {
                if cursor[u] >= adjacency[u].len() {
                    dist[u] = u32::MAX;
                    stack.pop();
                    continue;
                }
                let v = adjacency[u][cursor[u]] as usize;
                cursor[u] += 1;
                let w = match_right[v];
                if w == FREE {
                    // Augment along the stack.
                    let mut v = v as u32;
                    for &x in stack.iter().rev() {
                        let prev = match_left[x];
                        match_left[x] = v;
                        match_right[v as usize] = x as u32;
                        v = prev;
                    }
                    matched += 1;
                    break;
                } else if dist[w as usize] == dist[u] + 1 {
                    stack.push(w as usize);
                }
            }
        }
    }
}
