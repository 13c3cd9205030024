//! Trajectory affinities and recursive normalized-cut clustering.
//!
//! Distances between two trajectories are aggregated over the frames they
//! share inside `[t - window, t]`. The motion distance at one frame compares
//! the `window`-frame displacement vectors of the pair and divides the squared
//! difference by an adaptive scale; the pair distance is the maximum over
//! frames. The spatial distance is the mean point distance over the same frames.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::trajectory::{Point, Trajectory};

/// Exponents are clamped here so affinities stay strictly positive.
const MAX_EXPONENT: f64 = 700.0;

/// Affinities at or below this value are treated as missing edges when
/// looking for connected components.
pub const COMPONENT_EPSILON: f64 = 1e-200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceParams {
    /// Displacement span and look-back horizon, in frames.
    pub window: usize,
    /// Distance assigned to pairs without a common frame.
    pub no_overlap_distance: f64,
}

impl Default for DistanceParams {
    fn default() -> Self {
        Self {
            window: 3,
            no_overlap_distance: 1e3,
        }
    }
}

/// Motion and spatial distance matrices over the same trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct DistancePair {
    pub motion: DMatrix<f64>,
    pub spatial: DMatrix<f64>,
}

impl DistancePair {
    pub fn len(&self) -> usize {
        self.motion.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Median over trajectories of the mean per-frame displacement magnitude in
/// `[t - window, t]`, floored at one pixel.
pub fn motion_scale(trajs: &[&Trajectory], t: usize, window: usize) -> f64 {
    let lo = t.saturating_sub(window);
    let mut speeds: Vec<f64> = trajs
        .iter()
        .filter_map(|tr| {
            let mut total = 0.0;
            let mut count = 0usize;
            for f in (lo + 1)..=t {
                if let (Some(p), Some(q)) = (tr.position(f), tr.position(f - 1)) {
                    total += p.distance(q);
                    count += 1;
                }
            }
            (count > 0).then(|| total / count as f64)
        })
        .collect();
    if speeds.is_empty() {
        return 1.0;
    }
    speeds.sort_by(f64::total_cmp);
    let m = speeds.len();
    let median = if m % 2 == 1 {
        speeds[m / 2]
    } else {
        0.5 * (speeds[m / 2 - 1] + speeds[m / 2])
    };
    median.max(1.0)
}

/// Motion and spatial distance of one pair; `None` when there is no common frame.
fn pair_distance(
    a: &Trajectory,
    b: &Trajectory,
    t: usize,
    window: usize,
    scale: f64,
) -> Option<(f64, f64)> {
    if a.points.is_empty() || b.points.is_empty() {
        return None;
    }
    let first_common = a.start_frame.max(b.start_frame);
    let lo = first_common.max(t.saturating_sub(window));
    let hi = a.end_frame().min(b.end_frame()).min(t);
    if lo > hi {
        return None;
    }

    let mut spatial = 0.0;
    let mut motion: f64 = 0.0;
    for f in lo..=hi {
        let (pa, pb) = (a.position(f)?, b.position(f)?);
        spatial += pa.distance(pb);

        let span = window.min(f - first_common);
        if span == 0 {
            continue;
        }
        let (qa, qb) = (a.position(f - span)?, b.position(f - span)?);
        let stretch = window as f64 / span as f64;
        let da: Point = pa - qa;
        let db: Point = pb - qb;
        let dx = (da.x - db.x) * stretch;
        let dy = (da.y - db.y) * stretch;
        motion = motion.max((dx * dx + dy * dy) / scale);
    }
    spatial /= (hi - lo + 1) as f64;
    Some((motion, spatial))
}

/// Distance matrices for `trajs` evaluated at frame `t`.
pub fn pairwise_distances(trajs: &[&Trajectory], t: usize, params: &DistanceParams) -> DistancePair {
    let n = trajs.len();
    let window = params.window.max(1);
    let scale = motion_scale(trajs, t, window);
    let mut motion = DMatrix::zeros(n, n);
    let mut spatial = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let (m, s) = pair_distance(trajs[i], trajs[j], t, window, scale)
                .unwrap_or((params.no_overlap_distance, params.no_overlap_distance));
            motion[(i, j)] = m;
            motion[(j, i)] = m;
            spatial[(i, j)] = s;
            spatial[(j, i)] = s;
        }
    }
    DistancePair { motion, spatial }
}

/// Symmetric trajectory affinities in `(0, 1]` with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix(DMatrix<f64>);

impl AffinityMatrix {
    /// Wraps a square matrix. Symmetry and range are the caller's responsibility.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::SizeMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        Ok(Self(m))
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Affinities restricted to `indices`, in the given order.
    pub fn submatrix(&self, indices: &[usize]) -> AffinityMatrix {
        let k = indices.len();
        AffinityMatrix(DMatrix::from_fn(k, k, |r, c| self.0[(indices[r], indices[c])]))
    }

    fn degrees(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.0.row(i).sum()).collect()
    }
}

/// `A = exp(-(lambda * D_M + (1 - lambda) * D_S))`, elementwise.
pub fn affinity(d: &DistancePair, lambda: f64) -> AffinityMatrix {
    let n = d.len();
    AffinityMatrix(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            let e = lambda * d.motion[(i, j)] + (1.0 - lambda) * d.spatial[(i, j)];
            libm::exp(-e.clamp(0.0, MAX_EXPONENT))
        }
    }))
}

/// Normalized cut `cut(A,B)/assoc(A,V) + cut(A,B)/assoc(B,V)`.
///
/// `side[i]` tells whether node `i` belongs to the first set.
pub fn ncut_cost(a: &AffinityMatrix, side: &[bool]) -> Result<f64> {
    let n = a.len();
    if side.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            found: side.len(),
        });
    }
    let in_a = side.iter().filter(|&&s| s).count();
    if in_a == 0 || in_a == n {
        return Err(Error::EmptyPartition);
    }
    let (mut cut, mut assoc_a, mut assoc_b) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let w = a.get(i, j);
            if side[i] {
                assoc_a += w;
                if !side[j] {
                    cut += w;
                }
            } else {
                assoc_b += w;
            }
        }
    }
    Ok(cut / assoc_a + cut / assoc_b)
}

/// A two-way split and its normalized-cut cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Bipartition {
    pub side: Vec<bool>,
    pub cost: f64,
}

impl Bipartition {
    pub fn sizes(&self) -> (usize, usize) {
        let a = self.side.iter().filter(|&&s| s).count();
        (a, self.side.len() - a)
    }
}

/// Number of nontrivial eigenvectors whose threshold sweeps are evaluated.
const SWEPT_EIGENVECTORS: usize = 2;

/// Spectral bipartition minimizing the normalized cut.
///
/// Solves the normalized Laplacian eigenproblem, maps the smallest nontrivial
/// eigenvectors back to generalized eigenvectors, and sweeps every threshold
/// between consecutive distinct values, keeping the cheapest split.
/// Returns `None` for fewer than two nodes.
pub fn best_bipartition(a: &AffinityMatrix) -> Option<Bipartition> {
    let n = a.len();
    if n < 2 {
        return None;
    }
    let degree = a.degrees();
    let inv_sqrt: Vec<f64> = degree.iter().map(|&d| 1.0 / libm::sqrt(d)).collect();
    let normalized = DMatrix::from_fn(n, n, |i, j| a.get(i, j) * inv_sqrt[i] * inv_sqrt[j]);
    let eigen = normalized.symmetric_eigen();

    // Largest eigenvalues of D^-1/2 A D^-1/2 are the smallest of the Laplacian.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| eigen.eigenvalues[q].total_cmp(&eigen.eigenvalues[p]).then(p.cmp(&q)));

    let mut best: Option<Bipartition> = None;
    for &col in order.iter().skip(1).take(SWEPT_EIGENVECTORS) {
        let y: Vec<f64> = (0..n).map(|i| eigen.eigenvectors[(i, col)] * inv_sqrt[i]).collect();
        if let Some(candidate) = sweep(a, &degree, &y) {
            if best.as_ref().is_none_or(|b| candidate.cost < b.cost) {
                best = Some(candidate);
            }
        }
    }
    best.or_else(|| {
        let mut side = vec![false; n];
        side[0] = true;
        let cost = ncut_cost(a, &side).ok()?;
        Some(Bipartition { side, cost })
    })
}

/// Evaluates every prefix split of the nodes ordered by `y`.
fn sweep(a: &AffinityMatrix, degree: &[f64], y: &[f64]) -> Option<Bipartition> {
    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| y[p].total_cmp(&y[q]).then(p.cmp(&q)));
    let total: f64 = degree.iter().sum();

    let mut in_a = vec![false; n];
    let mut cut = 0.0;
    let mut assoc_a = 0.0;
    let mut best: Option<(usize, f64)> = None;
    for k in 1..n {
        let v = order[k - 1];
        // Move v into A: edges to B become cut, edges to A stop being cut.
        let mut to_a = 0.0;
        let mut to_b = 0.0;
        for j in 0..n {
            if j == v {
                continue;
            }
            if in_a[j] {
                to_a += a.get(v, j);
            } else {
                to_b += a.get(v, j);
            }
        }
        in_a[v] = true;
        cut += to_b - to_a;
        assoc_a += degree[v];
        if y[order[k - 1]] >= y[order[k]] {
            continue;
        }
        let cost = cut.max(0.0) / assoc_a + cut.max(0.0) / (total - assoc_a);
        if best.is_none_or(|(_, c)| cost < c) {
            best = Some((k, cost));
        }
    }
    let (k, _) = best?;
    let mut side = vec![false; n];
    for &v in &order[..k] {
        side[v] = true;
    }
    // Recompute directly to avoid accumulated rounding in the sweep.
    let cost = ncut_cost(a, &side).ok()?;
    Some(Bipartition { side, cost })
}

/// Connected components over edges with affinity above [`COMPONENT_EPSILON`],
/// each sorted, ordered by smallest member.
pub fn connected_components(a: &AffinityMatrix) -> Vec<Vec<usize>> {
    let n = a.len();
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![s];
        comp[s] = id;
        let mut head = 0;
        while head < members.len() {
            let u = members[head];
            head += 1;
            for v in 0..n {
                if comp[v] == usize::MAX && a.get(u, v) > COMPONENT_EPSILON {
                    comp[v] = id;
                    members.push(v);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NcutParams {
    /// A cluster whose best split costs more than this is final.
    pub stop_threshold: f64,
    /// Clusters smaller than this are not split; fragments below it are merged.
    pub min_cluster_size: usize,
}

impl Default for NcutParams {
    fn default() -> Self {
        Self {
            stop_threshold: 1e-4,
            min_cluster_size: 5,
        }
    }
}

/// Recursively bipartitions the affinity graph.
///
/// Returns a cluster index per node. Cluster indices are canonical: clusters
/// are numbered in order of their smallest member.
pub fn recursive_ncut(a: &AffinityMatrix, params: &NcutParams) -> Vec<usize> {
    let mut clusters = recursive_clusters(a, params);
    merge_small_clusters(a, &mut clusters, params.min_cluster_size);
    assignment_from_clusters(a.len(), clusters)
}

/// The recursion without fragment merging; each cluster is sorted.
pub fn recursive_clusters(a: &AffinityMatrix, params: &NcutParams) -> Vec<Vec<usize>> {
    let mut pending = connected_components(a);
    pending.reverse();
    let mut done: Vec<Vec<usize>> = Vec::new();
    while let Some(cluster) = pending.pop() {
        if cluster.len() < 2 || cluster.len() < params.min_cluster_size {
            done.push(cluster);
            continue;
        }
        let Some(split) = best_bipartition(&a.submatrix(&cluster)) else {
            done.push(cluster);
            continue;
        };
        if split.cost > params.stop_threshold {
            done.push(cluster);
            continue;
        }
        let (left, right): (Vec<usize>, Vec<usize>) = cluster
            .iter()
            .zip(&split.side)
            .fold((Vec::new(), Vec::new()), |(mut l, mut r), (&m, &s)| {
                if s {
                    l.push(m);
                } else {
                    r.push(m);
                }
                (l, r)
            });
        pending.push(right);
        pending.push(left);
    }
    done
}

fn mean_affinity(a: &AffinityMatrix, p: &[usize], q: &[usize]) -> f64 {
    let mut s = 0.0;
    for &i in p {
        for &j in q {
            s += a.get(i, j);
        }
    }
    s / (p.len() * q.len()) as f64
}

/// Merges clusters smaller than `min_size` into their nearest cluster by mean
/// affinity, smallest first, until every cluster is large enough or one remains.
pub fn merge_small_clusters(a: &AffinityMatrix, clusters: &mut Vec<Vec<usize>>, min_size: usize) {
    loop {
        if clusters.len() <= 1 {
            return;
        }
        let small = clusters
            .iter()
            .enumerate()
            .filter(|(_, c)| c.len() < min_size)
            .min_by_key(|(_, c)| (c.len(), c[0]))
            .map(|(i, _)| i);
        let Some(s) = small else {
            return;
        };
        let fragment = clusters.swap_remove(s);
        let target = clusters
            .iter()
            .enumerate()
            .map(|(i, c)| (i, mean_affinity(a, &fragment, c), c[0]))
            .max_by(|x, y| x.1.total_cmp(&y.1).then(y.2.cmp(&x.2)))
            .map(|(i, _, _)| i)
            .expect("at least one other cluster");
        clusters[target].extend(fragment);
        clusters[target].sort_unstable();
    }
}

fn assignment_from_clusters(n: usize, mut clusters: Vec<Vec<usize>>) -> Vec<usize> {
    for c in &mut clusters {
        c.sort_unstable();
    }
    clusters.retain(|c| !c.is_empty());
    clusters.sort_by_key(|c| c[0]);
    let mut out = vec![0; n];
    for (id, c) in clusters.iter().enumerate() {
        for &m in c {
            out[m] = id;
        }
    }
    out
}

/// Renumbers a cluster assignment so that clusters are ordered by the
/// smallest key among their members.
pub fn canonicalize_by_keys(assignment: &[usize], keys: &[u64]) -> Vec<usize> {
    let k = assignment.iter().copied().max().map_or(0, |m| m + 1);
    let mut min_key = vec![u64::MAX; k];
    for (&c, &key) in assignment.iter().zip(keys) {
        min_key[c] = min_key[c].min(key);
    }
    let mut order: Vec<usize> = (0..k).filter(|&c| min_key[c] != u64::MAX).collect();
    order.sort_by_key(|&c| min_key[c]);
    let mut rename = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        rename[old] = new;
    }
    assignment.iter().map(|&c| rename[c]).collect()
}
