//! Vietoris-Rips persistence.
//!
//! H0 is computed from a minimum spanning tree: with every vertex born at 0,
//! the finite H0 deaths are exactly the MST edge lengths. Higher degrees are
//! computed by reducing coboundary matrices over Z/2 in reverse filtration
//! order, with clearing: a simplex already paired as a death in degree
//! `k - 1` is skipped in degree `k`.
//!
//! A simplex enters the filtration at its diameter (largest pairwise distance
//! of its vertices). Ties are broken by dimension, then lexicographically by
//! vertex index, so edges are ordered by `(length, i, j)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::PointCloud;

/// Default cap on the number of simplices built by [`rips_persistence`].
pub const DEFAULT_SIMPLEX_CAP: usize = 50_000_000;

/// Largest homology degree supported.
pub const MAX_DIM: usize = 2;

/// Symmetric matrix of pairwise distances with zero diagonal, stored as the
/// strict upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    upper: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds a matrix from `f(i, j)` evaluated for `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                upper.push(f(i, j));
            }
        }
        Self { n, upper }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.upper[self.offset(i, j)],
            std::cmp::Ordering::Greater => self.upper[self.offset(j, i)],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    /// Iterates `(i, j, d(i, j))` over `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j, self.upper[self.offset(i, j)])))
    }
}

/// Euclidean distances between all points of the cloud.
pub fn pairwise_distances(cloud: &PointCloud) -> DistanceMatrix {
    DistanceMatrix::from_fn(cloud.len(), |i, j| {
        cloud
            .point(i)
            .iter()
            .zip(cloud.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistencePair {
    pub dim: usize,
    pub birth: f64,
    /// `f64::INFINITY` for the essential H0 class.
    pub death: f64,
    /// The feature was still alive at maxscale; `death` holds maxscale.
    pub clipped: bool,
}

impl PersistencePair {
    pub fn lifetime(&self) -> f64 {
        self.death - self.birth
    }

    pub fn is_infinite(&self) -> bool {
        self.death.is_infinite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram {
    pub pairs: Vec<PersistencePair>,
    pub maxscale: f64,
    pub n_points: usize,
}

impl PersistenceDiagram {
    /// An H0 diagram with the given finite deaths plus the essential class.
    /// Deaths equal to `maxscale` are flagged as clipped.
    pub fn from_h0_deaths(deaths: &[f64], maxscale: f64) -> Self {
        let mut pairs: Vec<PersistencePair> = deaths
            .iter()
            .map(|&d| PersistencePair { dim: 0, birth: 0.0, death: d, clipped: d >= maxscale })
            .collect();
        pairs.push(PersistencePair { dim: 0, birth: 0.0, death: f64::INFINITY, clipped: false });
        Self { pairs, maxscale, n_points: deaths.len() + 1 }
    }

    pub fn in_dim(&self, dim: usize) -> impl Iterator<Item = &PersistencePair> + '_ {
        self.pairs.iter().filter(move |p| p.dim == dim)
    }

    pub fn max_dim(&self) -> usize {
        self.pairs.iter().map(|p| p.dim).max().unwrap_or(0)
    }
}

/// Lengths of the edges of a minimum spanning tree, ascending.
///
/// Dense Prim, `O(n^2)` time and `O(n)` extra memory. Edge weights of an MST
/// form the same multiset for every MST of the graph.
pub fn mst_edge_lengths(d: &DistanceMatrix) -> Vec<f64> {
    let n = d.len();
    if n <= 1 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut lengths = Vec::with_capacity(n - 1);
    let mut current = 0usize;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_len = f64::INFINITY;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let w = d.get(current, v);
            if w < best[v] {
                best[v] = w;
            }
            if best[v] < next_len || next == usize::MAX {
                next_len = best[v];
                next = v;
            }
        }
        in_tree[next] = true;
        lengths.push(next_len);
        current = next;
    }
    lengths.sort_by(f64::total_cmp);
    lengths
}

fn check_maxscale(maxscale: f64) -> Result<()> {
    if !(maxscale > 0.0) || maxscale.is_nan() {
        return Err(invalid(format!("maxscale must be positive, got {maxscale}")));
    }
    Ok(())
}

/// H0 persistence of the Rips filtration truncated at `maxscale`.
///
/// Components that have not merged by `maxscale` (other than the essential
/// one) are reported with `death = maxscale` and `clipped = true`.
pub fn h0_persistence(d: &DistanceMatrix, maxscale: f64) -> Result<PersistenceDiagram> {
    check_maxscale(maxscale)?;
    Ok(h0_from_mst(&mst_edge_lengths(d), d.len(), maxscale))
}

fn h0_from_mst(mst: &[f64], n: usize, maxscale: f64) -> PersistenceDiagram {
    let mut pairs = Vec::with_capacity(n);
    for &len in mst {
        pairs.push(if len <= maxscale {
            PersistencePair { dim: 0, birth: 0.0, death: len, clipped: false }
        } else {
            PersistencePair { dim: 0, birth: 0.0, death: maxscale, clipped: true }
        });
    }
    if n > 0 {
        pairs.push(PersistencePair { dim: 0, birth: 0.0, death: f64::INFINITY, clipped: false });
    }
    PersistenceDiagram { pairs, maxscale, n_points: n }
}

/// Smallest scale on the grid `initial * growth^k` at which the largest finite
/// H0 death is strictly below the scale. From that scale on, the H0 diagram
/// no longer changes.
pub fn optimal_maxscale(d: &DistanceMatrix, initial: f64, growth: f64) -> Result<f64> {
    if !(initial > 0.0) || !initial.is_finite() {
        return Err(invalid(format!("initial scale must be positive, got {initial}")));
    }
    if !(growth > 1.0) || !growth.is_finite() {
        return Err(invalid(format!("growth factor must exceed 1, got {growth}")));
    }
    let longest = mst_edge_lengths(d).last().copied().unwrap_or(0.0);
    let mut scale = initial;
    while longest >= scale {
        scale *= growth;
    }
    Ok(scale)
}

/// Full Rips persistence up to homology degree `maxdim` (at most 2).
pub fn rips_persistence(d: &DistanceMatrix, maxscale: f64, maxdim: usize) -> Result<PersistenceDiagram> {
    rips_persistence_with_cap(d, maxscale, maxdim, DEFAULT_SIMPLEX_CAP)
}

/// As [`rips_persistence`], failing with a resource-limit error when more
/// than `simplex_cap` simplices would be built.
pub fn rips_persistence_with_cap(
    d: &DistanceMatrix,
    maxscale: f64,
    maxdim: usize,
    simplex_cap: usize,
) -> Result<PersistenceDiagram> {
    check_maxscale(maxscale)?;
    if maxdim > MAX_DIM {
        return Err(invalid(format!("maxdim must be at most {MAX_DIM}, got {maxdim}")));
    }
    let mut diagram = h0_persistence(d, maxscale)?;
    if maxdim == 0 || d.len() < 2 {
        return Ok(diagram);
    }
    if d.len() > u16::MAX as usize {
        return Err(Error::ResourceLimit(format!(
            "higher-degree persistence supports at most {} points, got {}",
            u16::MAX,
            d.len()
        )));
    }
    let complex = RipsComplex::build(d, maxscale, maxdim + 1, simplex_cap)?;
    let mut negative = complex.negative_edges();
    for dim in 1..=maxdim {
        let (pairs, deaths) = complex.cohomology(dim, &negative, maxscale);
        diagram.pairs.extend(pairs);
        negative = deaths;
    }
    Ok(diagram)
}

/// Simplex keys pack up to four 16-bit vertex indices, most significant
/// first, so key order is lexicographic order of the sorted vertex lists.
type Key = u64;

fn pack(vertices: &[u32]) -> Key {
    vertices.iter().fold(0u64, |acc, &v| (acc << 16) | v as u64)
}

fn unpack(key: Key, len: usize, out: &mut [u32; 4]) {
    for k in 0..len {
        out[len - 1 - k] = ((key >> (16 * k)) & 0xffff) as u32;
    }
}

struct Level {
    /// `(diameter, key)` in filtration order.
    simplices: Vec<(f64, Key)>,
    index: HashMap<Key, u32>,
}

impl Level {
    fn new(mut simplices: Vec<(f64, Key)>) -> Self {
        simplices.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let index = simplices.iter().enumerate().map(|(i, &(_, k))| (k, i as u32)).collect();
        Self { simplices, index }
    }
}

struct RipsComplex<'a> {
    d: &'a DistanceMatrix,
    maxscale: f64,
    /// All neighbours within maxscale, ascending.
    adjacency: Vec<Vec<u32>>,
    /// `levels[k]` holds the k-simplices for k >= 1 (index 0 unused).
    levels: Vec<Level>,
}

impl<'a> RipsComplex<'a> {
    fn build(d: &'a DistanceMatrix, maxscale: f64, top_dim: usize, cap: usize) -> Result<Self> {
        let n = d.len();
        let mut total = n;
        let over_cap = |total: usize| {
            Error::ResourceLimit(format!("more than {cap} simplices (reached {total}); lower maxscale or maxdim"))
        };
        if total > cap {
            return Err(over_cap(total));
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut edges = Vec::new();
        for (i, j, len) in d.edges() {
            if len <= maxscale {
                adjacency[i].push(j as u32);
                adjacency[j].push(i as u32);
                edges.push((len, pack(&[i as u32, j as u32])));
                total += 1;
                if total > cap {
                    return Err(over_cap(total));
                }
            }
        }
        let mut levels = vec![Level::new(Vec::new()), Level::new(edges)];
        let mut verts = [0u32; 4];
        for dim in 2..=top_dim {
            let mut next = Vec::new();
            for &(diam, key) in &levels[dim - 1].simplices {
                unpack(key, dim, &mut verts);
                let face = &verts[..dim];
                let last = face[dim - 1];
                for &w in adjacency[face[0] as usize].iter().filter(|&&w| w > last) {
                    let mut coface_diam = diam;
                    let mut ok = true;
                    for &v in &face[1..] {
                        let dv = d.get(v as usize, w as usize);
                        if dv > maxscale {
                            ok = false;
                            break;
                        }
                        coface_diam = coface_diam.max(dv);
                    }
                    if !ok {
                        continue;
                    }
                    coface_diam = coface_diam.max(d.get(face[0] as usize, w as usize));
                    next.push((coface_diam, (key << 16) | w as u64));
                    total += 1;
                    if total > cap {
                        return Err(over_cap(total));
                    }
                }
            }
            levels.push(Level::new(next));
        }
        Ok(Self { d, maxscale, adjacency, levels })
    }

    /// Edges that merge two components when the edges are swept in
    /// filtration order; these are the H0 deaths.
    fn negative_edges(&self) -> Vec<bool> {
        let edges = &self.levels[1].simplices;
        let mut uf = UnionFind::new(self.d.len());
        let mut verts = [0u32; 4];
        edges
            .iter()
            .map(|&(_, key)| {
                unpack(key, 2, &mut verts);
                uf.union(verts[0] as usize, verts[1] as usize)
            })
            .collect()
    }

    /// Indices (in the degree `dim + 1` level) of the cofaces of a simplex,
    /// ascending.
    fn coboundary(&self, dim: usize, key: Key, out: &mut Vec<u32>) {
        out.clear();
        let mut verts = [0u32; 4];
        unpack(key, dim + 1, &mut verts);
        let face = &verts[..=dim];
        let upper = &self.levels[dim + 1];
        let mut coface = [0u32; 4];
        for &w in &self.adjacency[face[0] as usize] {
            if face.contains(&w) {
                continue;
            }
            if face[1..].iter().any(|&v| self.d.get(v as usize, w as usize) > self.maxscale) {
                continue;
            }
            let pos = face.partition_point(|&v| v < w);
            coface[..pos].copy_from_slice(&face[..pos]);
            coface[pos] = w;
            coface[pos + 1..=dim + 1].copy_from_slice(&face[pos..]);
            if let Some(&idx) = upper.index.get(&pack(&coface[..=dim + 1])) {
                out.push(idx);
            }
        }
        out.sort_unstable();
    }

    /// Degree-`dim` persistence pairs. `cleared[i]` marks the `dim`-simplices
    /// already paired as deaths in degree `dim - 1`. Returns the pairs and the
    /// `(dim + 1)`-simplices that died here.
    fn cohomology(&self, dim: usize, cleared: &[bool], maxscale: f64) -> (Vec<PersistencePair>, Vec<bool>) {
        let level = &self.levels[dim];
        let upper = &self.levels[dim + 1];
        let mut owner: Vec<u32> = vec![u32::MAX; upper.simplices.len()];
        let mut reduced: Vec<Vec<u32>> = vec![Vec::new(); level.simplices.len()];
        let mut pairs = Vec::new();
        let mut column = Vec::new();
        let mut scratch = Vec::new();
        for idx in (0..level.simplices.len()).rev() {
            if cleared[idx] {
                continue;
            }
            let (birth, key) = level.simplices[idx];
            self.coboundary(dim, key, &mut column);
            while let Some(&pivot) = column.first() {
                let other = owner[pivot as usize];
                if other == u32::MAX {
                    break;
                }
                symmetric_difference(&column, &reduced[other as usize], &mut scratch);
                std::mem::swap(&mut column, &mut scratch);
            }
            match column.first() {
                Some(&pivot) => {
                    owner[pivot as usize] = idx as u32;
                    let death = upper.simplices[pivot as usize].0;
                    if death > birth {
                        pairs.push(PersistencePair { dim, birth, death, clipped: false });
                    }
                    reduced[idx] = std::mem::take(&mut column);
                }
                None => pairs.push(PersistencePair { dim, birth, death: maxscale, clipped: true }),
            }
        }
        pairs.sort_by(|a, b| a.birth.total_cmp(&b.birth).then(a.death.total_cmp(&b.death)));
        let deaths = owner.iter().map(|&o| o != u32::MAX).collect();
        (pairs, deaths)
    }
}

fn symmetric_difference(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

/// Disjoint sets with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; false when they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        true
    }
}
