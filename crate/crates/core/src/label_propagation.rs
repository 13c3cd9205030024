//! Random-walk label propagation from labeled to unlabeled trajectories,
//! plus creation and retirement of layers.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::image::{LayerId, BACKGROUND};
use crate::trajectory_graph::{best_bipartition, AffinityMatrix, Bipartition};

/// Row-stochastic transition matrix with a labeled/unlabeled node partition.
///
/// Node order inside the blocks follows the order of `labeled` and `unlabeled`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    p: DMatrix<f64>,
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
}

impl TransitionMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |r, c| self.p[(rows[r], cols[c])])
    }

    pub fn p_ll(&self) -> DMatrix<f64> {
        self.block(&self.labeled, &self.labeled)
    }

    pub fn p_lu(&self) -> DMatrix<f64> {
        self.block(&self.labeled, &self.unlabeled)
    }

    pub fn p_ul(&self) -> DMatrix<f64> {
        self.block(&self.unlabeled, &self.labeled)
    }

    pub fn p_uu(&self) -> DMatrix<f64> {
        self.block(&self.unlabeled, &self.unlabeled)
    }
}

/// Row-normalizes `a` into transition probabilities `p_ij = A_ij / sum_k A_ik`.
pub fn transition_matrix(
    a: &AffinityMatrix,
    labeled: &[usize],
    unlabeled: &[usize],
) -> Result<TransitionMatrix> {
    let n = a.len();
    let mut seen = vec![false; n];
    for &i in labeled.iter().chain(unlabeled) {
        if i >= n || seen[i] {
            return Err(Error::InvalidNodeSets(n));
        }
        seen[i] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidNodeSets(n));
    }
    let mut p = a.matrix().clone();
    for i in 0..n {
        let s: f64 = p.row(i).sum();
        if !(s > 0.0) {
            return Err(Error::IsolatedNode(i));
        }
        for j in 0..n {
            p[(i, j)] /= s;
        }
    }
    Ok(TransitionMatrix {
        p,
        labeled: labeled.to_vec(),
        unlabeled: unlabeled.to_vec(),
    })
}

/// Label probabilities: one row per node, one column per layer in `layers`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelingProbability {
    pub layers: Vec<LayerId>,
    pub rows: DMatrix<f64>,
}

impl LabelingProbability {
    /// One-hot rows for the given labels; columns are the sorted distinct layers
    /// unioned with `extra_layers`.
    pub fn one_hot(labels: &[LayerId], extra_layers: &[LayerId]) -> Self {
        let mut layers: Vec<LayerId> = labels.iter().chain(extra_layers).copied().collect();
        layers.sort_unstable();
        layers.dedup();
        let mut rows = DMatrix::zeros(labels.len(), layers.len());
        for (r, l) in labels.iter().enumerate() {
            let c = layers.binary_search(l).expect("label is a column");
            rows[(r, c)] = 1.0;
        }
        Self { layers, rows }
    }
}

/// Closed-form harmonic solution `Y_u = (I - P_uu)^-1 P_ul Y_l`.
///
/// Rows of `y_labeled` follow `p.labeled()`; the result rows follow `p.unlabeled()`.
pub fn propagate_labels(p: &TransitionMatrix, y_labeled: &LabelingProbability) -> Result<LabelingProbability> {
    let nl = p.labeled.len();
    let nu = p.unlabeled.len();
    if y_labeled.rows.nrows() != nl {
        return Err(Error::SizeMismatch {
            expected: nl,
            found: y_labeled.rows.nrows(),
        });
    }
    let k = y_labeled.layers.len();
    if nu == 0 {
        return Ok(LabelingProbability {
            layers: y_labeled.layers.clone(),
            rows: DMatrix::zeros(0, k),
        });
    }

    let stranded = unreachable_unlabeled(p);
    if !stranded.is_empty() {
        return Err(Error::DisconnectedUnlabeled(stranded));
    }

    let mut sol = solve_absorbing(&p.p_uu(), &p.p_ul(), &y_labeled.rows);
    // Guard against rounding: exact solutions are nonnegative distributions.
    for r in 0..nu {
        let s: f64 = sol.row(r).sum();
        if s > 0.0 {
            for c in 0..k {
                sol[(r, c)] /= s;
            }
        }
    }
    Ok(LabelingProbability {
        layers: y_labeled.layers.clone(),
        rows: sol,
    })
}

/// Solves `(I - P_uu) X = P_ul Y_l` by Gaussian elimination without subtraction.
///
/// Each pivot is rebuilt from the remaining off-diagonal mass plus the mass
/// flowing to labeled nodes, so the result stays accurate when unlabeled
/// nodes are only weakly tied to labeled ones.
fn solve_absorbing(p_uu: &DMatrix<f64>, p_ul: &DMatrix<f64>, y_l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p_uu.nrows();
    let mut off = p_uu.clone();
    for i in 0..n {
        off[(i, i)] = 0.0;
    }
    let mut excess: Vec<f64> = (0..n).map(|i| p_ul.row(i).sum()).collect();
    let mut b = p_ul * y_l;
    let mut pivot = vec![0.0; n];
    for k in 0..n {
        let piv = excess[k] + ((k + 1)..n).map(|j| off[(k, j)]).sum::<f64>();
        pivot[k] = piv;
        for i in (k + 1)..n {
            let f = off[(i, k)] / piv;
            if f == 0.0 {
                continue;
            }
            for j in (k + 1)..n {
                if j != i {
                    off[(i, j)] += f * off[(k, j)];
                }
            }
            excess[i] += f * excess[k];
            for c in 0..b.ncols() {
                b[(i, c)] += f * b[(k, c)];
            }
        }
    }
    let mut x = DMatrix::zeros(n, b.ncols());
    for k in (0..n).rev() {
        for c in 0..b.ncols() {
            let mut acc = b[(k, c)];
            for j in (k + 1)..n {
                acc += off[(k, j)] * x[(j, c)];
            }
            x[(k, c)] = acc / pivot[k];
        }
    }
    x
}

/// Unlabeled nodes (as node indices) with no positive-probability path to a labeled node.
fn unreachable_unlabeled(p: &TransitionMatrix) -> Vec<usize> {
    let n = p.p.nrows();
    let mut reached = vec![false; n];
    let mut queue: Vec<usize> = p.labeled.clone();
    for &l in &queue {
        reached[l] = true;
    }
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        for u in 0..n {
            // u reaches v in one step.
            if !reached[u] && p.p[(u, v)] > 0.0 {
                reached[u] = true;
                queue.push(u);
            }
        }
    }
    p.unlabeled.iter().copied().filter(|&u| !reached[u]).collect()
}

/// Row-wise argmax; ties go to the smallest layer id.
pub fn assign_labels(y: &LabelingProbability) -> Vec<LayerId> {
    let mut order: Vec<usize> = (0..y.layers.len()).collect();
    order.sort_by_key(|&c| y.layers[c]);
    (0..y.rows.nrows())
        .map(|r| {
            let mut best = order[0];
            for &c in &order[1..] {
                if y.rows[(r, c)] > y.rows[(r, best)] {
                    best = c;
                }
            }
            y.layers[best]
        })
        .collect()
}

/// A cluster split that introduces a new layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSplit {
    /// Members (indices into the cluster) that keep the existing label.
    pub keep: Vec<usize>,
    /// Members that receive the new label.
    pub split_off: Vec<usize>,
    pub cost: f64,
}

/// Checks whether a labeled cluster should be split into two layers.
///
/// `appearance_distance[i]` is the color distance between member `i` and the
/// layer's stored appearance (`f64::INFINITY` when the layer holds no samples
/// there, `NaN` when unknown). The side with the larger mean distance becomes
/// the new layer; without usable distances the smaller side does.
pub fn detect_new_layer(
    cluster: &AffinityMatrix,
    appearance_distance: &[f64],
    threshold: f64,
    min_cluster_size: usize,
) -> Option<LayerSplit> {
    let n = cluster.len();
    if n < 2 || n < 2 * min_cluster_size {
        return None;
    }
    let Bipartition { side, cost } = best_bipartition(cluster)?;
    if cost >= threshold {
        return None;
    }
    let a: Vec<usize> = (0..n).filter(|&i| side[i]).collect();
    let b: Vec<usize> = (0..n).filter(|&i| !side[i]).collect();
    if a.len() < min_cluster_size.max(1) || b.len() < min_cluster_size.max(1) {
        return None;
    }
    let da = mean_distance(&a, appearance_distance);
    let db = mean_distance(&b, appearance_distance);
    let a_is_new = match (da, db) {
        (Some(x), Some(y)) if x != y => x > y,
        _ => smaller_side_first(&a, &b),
    };
    let (keep, split_off) = if a_is_new { (b, a) } else { (a, b) };
    Some(LayerSplit { keep, split_off, cost })
}

fn mean_distance(members: &[usize], distance: &[f64]) -> Option<f64> {
    let vals: Vec<f64> = members
        .iter()
        .filter_map(|&i| distance.get(i).copied())
        .filter(|d| !d.is_nan())
        .collect();
    if vals.is_empty() {
        None
    } else if vals.iter().any(|d| d.is_infinite()) {
        // Mean of a set with missing samples: compare by the finite part after
        // counting the missing ones as the largest possible distance.
        let finite: f64 = vals.iter().map(|&d| if d.is_infinite() { MAX_COLOR_DISTANCE } else { d }).sum();
        Some(finite / vals.len() as f64)
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Largest squared distance between two colors in the unit RGB cube.
pub const MAX_COLOR_DISTANCE: f64 = 3.0;

/// Tie-break for the new-layer side: the smaller side, then the side not
/// holding the smallest member index.
fn smaller_side_first(a: &[usize], b: &[usize]) -> bool {
    if a.len() != b.len() {
        return a.len() < b.len();
    }
    a[0] > b[0]
}

/// Layers (other than background) supported by fewer than `min_support`
/// trajectories. Layers with support exactly `min_support` are kept.
pub fn retire_layers(live: &[LayerId], trajectory_labels: &[LayerId], min_support: usize) -> Vec<LayerId> {
    let mut support: BTreeMap<LayerId, usize> = live.iter().map(|&l| (l, 0)).collect();
    for l in trajectory_labels {
        if let Some(c) = support.get_mut(l) {
            *c += 1;
        }
    }
    support
        .into_iter()
        .filter(|&(l, c)| l != BACKGROUND && c < min_support)
        .map(|(l, _)| l)
        .collect()
}
