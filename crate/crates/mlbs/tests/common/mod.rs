//! Independent reference implementations used by the acceptance suite.

use mlbs_core::{Color, Dims, LayerId};
use nalgebra::{DMatrix, DVector};

/// Dense solve of the grid model: 4-neighbor smoothness `1/sigma_m^2` and one
/// Gaussian observation of precision `1/sigma_p^2` per evidence entry.
pub fn dense_motion(dims: Dims, evidence: &[(usize, [f64; 2])], sigma_m: f64, sigma_p: f64) -> [Vec<f64>; 2] {
    let n = dims.len();
    let (wm, wp) = (1.0 / (sigma_m * sigma_m), 1.0 / (sigma_p * sigma_p));
    let mut a = DMatrix::<f64>::zeros(n, n);
    for y in 0..dims.height {
        for x in 0..dims.width {
            let i = y * dims.width + x;
            let mut nb = Vec::new();
            if x > 0 {
                nb.push(i - 1);
            }
            if x + 1 < dims.width {
                nb.push(i + 1);
            }
            if y > 0 {
                nb.push(i - dims.width);
            }
            if y + 1 < dims.height {
                nb.push(i + dims.width);
            }
            for j in nb {
                a[(i, i)] += wm;
                a[(i, j)] -= wm;
            }
        }
    }
    let mut b = [DVector::<f64>::zeros(n), DVector::<f64>::zeros(n)];
    for &(i, m) in evidence {
        a[(i, i)] += wp;
        b[0][i] += m[0] * wp;
        b[1][i] += m[1] * wp;
    }
    let chol = a.cholesky().expect("positive definite");
    [chol.solve(&b[0]).as_slice().to_vec(), chol.solve(&b[1]).as_slice().to_vec()]
}

/// Iterates `Y_u <- P_uu Y_u + P_ul Y_l` from zero until it stops changing.
pub fn fixed_point_labels(a: &DMatrix<f64>, labeled: &[usize], unlabeled: &[usize], y_l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut p = a.clone();
    for i in 0..n {
        let s: f64 = p.row(i).sum();
        for j in 0..n {
            p[(i, j)] /= s;
        }
    }
    let pick = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |r, c| p[(rows[r], cols[c])]);
    let p_uu = pick(unlabeled, unlabeled);
    let fixed = pick(unlabeled, labeled) * y_l;
    let mut y = DMatrix::zeros(unlabeled.len(), y_l.ncols());
    for _ in 0..1_000_000 {
        let next = &p_uu * &y + &fixed;
        let delta = (&next - &y).abs().max();
        y = next;
        if delta < 1e-16 {
            break;
        }
    }
    y
}

pub fn contrast_weight(a: Color, b: Color, sigma_a: f64) -> f64 {
    let d: f64 = (0..3).map(|c| (a[c] - b[c]).powi(2)).sum();
    (-d / (2.0 * sigma_a * sigma_a)).exp()
}

/// Energy of a labeling given per-pixel costs `data[i][k]` over `labels`.
pub fn energy(
    dims: Dims,
    assignment: &[usize],
    data: &[Vec<f64>],
    colors: &[Color],
    lambda1: f64,
    sigma_a: f64,
    label_costs: &[f64],
) -> f64 {
    let mut e: f64 = assignment.iter().enumerate().map(|(i, &k)| data[i][k]).sum();
    for y in 0..dims.height {
        for x in 0..dims.width {
            let i = y * dims.width + x;
            for j in [(x + 1 < dims.width).then_some(i + 1), (y + 1 < dims.height).then_some(i + dims.width)]
                .into_iter()
                .flatten()
            {
                if assignment[i] != assignment[j] {
                    e += lambda1 * contrast_weight(colors[i], colors[j], sigma_a);
                }
            }
        }
    }
    let mut used = vec![false; label_costs.len()];
    for &k in assignment {
        used[k] = true;
    }
    e + used.iter().zip(label_costs).filter(|(u, _)| **u).map(|(_, h)| h).sum::<f64>()
}

/// Minimum energy over all `k^n` labelings.
pub fn brute_force_energy(
    dims: Dims,
    data: &[Vec<f64>],
    colors: &[Color],
    lambda1: f64,
    sigma_a: f64,
    label_costs: &[f64],
) -> f64 {
    let n = dims.len();
    let k = label_costs.len();
    let mut assignment = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        best = best.min(energy(dims, &assignment, data, colors, lambda1, sigma_a, label_costs));
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            assignment[i] += 1;
            if assignment[i] < k {
                break;
            }
            assignment[i] = 0;
            i += 1;
        }
    }
}

/// Edmonds-Karp maximum flow on a dense capacity matrix.
pub fn edmonds_karp(mut cap: Vec<Vec<f64>>, s: usize, t: usize) -> f64 {
    let n = cap.len();
    let mut flow = 0.0;
    loop {
        let mut parent = vec![usize::MAX; n];
        parent[s] = s;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if parent[v] == usize::MAX && cap[u][v] > 1e-12 {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[t] == usize::MAX {
            return flow;
        }
        let mut aug = f64::INFINITY;
        let mut v = t;
        while v != s {
            aug = aug.min(cap[parent[v]][v]);
            v = parent[v];
        }
        let mut v = t;
        while v != s {
            let u = parent[v];
            cap[u][v] -= aug;
            cap[v][u] += aug;
            v = u;
        }
        flow += aug;
    }
}

/// Exact minimum of a two-label energy: the s-t cut for labelings using both
/// labels, compared with the two constant labelings.
pub fn exact_binary_energy(
    dims: Dims,
    data: &[Vec<f64>],
    colors: &[Color],
    lambda1: f64,
    sigma_a: f64,
    label_costs: [f64; 2],
) -> f64 {
    let n = dims.len();
    let (s, t) = (n, n + 1);
    let mut cap = vec![vec![0.0; n + 2]; n + 2];
    for i in 0..n {
        // Pixel on the sink side takes label 1.
        cap[s][i] += data[i][1];
        cap[i][t] += data[i][0];
    }
    for y in 0..dims.height {
        for x in 0..dims.width {
            let i = y * dims.width + x;
            for j in [(x + 1 < dims.width).then_some(i + 1), (y + 1 < dims.height).then_some(i + dims.width)]
                .into_iter()
                .flatten()
            {
                let w = lambda1 * contrast_weight(colors[i], colors[j], sigma_a);
                cap[i][j] += w;
                cap[j][i] += w;
            }
        }
    }
    let cut = edmonds_karp(cap, s, t);
    let all = |k: usize| energy(dims, &vec![k; n], data, colors, lambda1, sigma_a, &label_costs);
    (cut + label_costs[0] + label_costs[1]).min(all(0)).min(all(1))
}

/// Ncut value of a bipartition; associations include self-affinities.
pub fn ncut(a: &DMatrix<f64>, side: &[bool]) -> f64 {
    let n = a.nrows();
    let (mut cut, mut assoc_a, mut assoc_b) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let w = a[(i, j)];
            if side[i] {
                assoc_a += w;
            } else {
                assoc_b += w;
            }
            if side[i] && !side[j] {
                cut += w;
            }
        }
    }
    cut / assoc_a + cut / assoc_b
}

/// Smallest Ncut over every bipartition with two non-empty sides.
pub fn brute_force_ncut(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut best = f64::INFINITY;
    // Node 0 always on side A.
    for mask in 0u32..(1 << (n - 1)) {
        let side: Vec<bool> = (0..n).map(|i| i == 0 || mask & (1 << (i - 1)) != 0).collect();
        if side.iter().all(|&s| s) {
            continue;
        }
        best = best.min(ncut(a, &side));
    }
    best
}

/// Riemann sum of `density` over the unit cube with `cells` midpoints per axis.
pub fn unit_cube_integral(cells: usize, density: impl Fn([f64; 3]) -> f64) -> f64 {
    let h = 1.0 / cells as f64;
    let mut sum = 0.0;
    for a in 0..cells {
        for b in 0..cells {
            for c in 0..cells {
                sum += density([(a as f64 + 0.5) * h, (b as f64 + 0.5) * h, (c as f64 + 0.5) * h]);
            }
        }
    }
    sum * h * h * h
}

/// Region scores `(P, R, F)` with `P = |c∩g|/|c|` and `R = |c∩g|/|g|`.
pub fn region_prf(mask: &[LayerId], gt: &[LayerId], c: LayerId, g: LayerId) -> (f64, f64, f64) {
    let inter = mask.iter().zip(gt).filter(|(&m, &t)| m == c && t == g).count() as f64;
    let cs = mask.iter().filter(|&&m| m == c).count() as f64;
    let gs = gt.iter().filter(|&&t| t == g).count() as f64;
    let (p, r) = (inter / cs, inter / gs);
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f)
}

/// Best overall F over every partial one-to-one matching of generated to
/// ground-truth regions, scoring unmatched generated regions (1, 0, 0) and
/// unmatched ground-truth regions (0, 0, 0).
pub fn brute_force_overall_f(mask: &[LayerId], gt: &[LayerId]) -> f64 {
    let ids = |v: &[LayerId]| {
        let mut s: Vec<LayerId> = v.iter().copied().filter(|&l| l != 0).collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    let (cs, gs) = (ids(mask), ids(gt));
    if cs.is_empty() && gs.is_empty() {
        return 1.0;
    }
    fn rec(r: usize, cs: &[LayerId], gs: &[LayerId], used: &mut Vec<bool>, acc: f64, matched: usize, best: &mut f64, f: &dyn Fn(usize, usize) -> f64) {
        if r == cs.len() {
            let regions = cs.len() + gs.len() - matched;
            *best = best.max(acc / regions as f64);
            return;
        }
        rec(r + 1, cs, gs, used, acc, matched, best, f);
        for k in 0..gs.len() {
            if !used[k] {
                used[k] = true;
                rec(r + 1, cs, gs, used, acc + f(r, k), matched + 1, best, f);
                used[k] = false;
            }
        }
    }
    let f = |r: usize, k: usize| region_prf(mask, gt, cs[r], gs[k]).2;
    let mut best = f64::NEG_INFINITY;
    rec(0, &cs, &gs, &mut vec![false; gs.len()], 0.0, 0, &mut best, &f);
    best
}
