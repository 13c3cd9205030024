//! Multilabel MRF segmentation with contrast-sensitive Potts smoothness and
//! per-label costs, minimized by alpha-expansion.

pub mod maxflow;

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{Color, Dims, Frame, LabelMap, LayerId, ProbabilityMap};
use crate::trajectory::Point;
use maxflow::FlowGraph;

/// Per-pixel, per-label data costs. Labels are sorted and distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    dims: Dims,
    labels: Vec<LayerId>,
    costs: Vec<f64>,
}

impl CostVolume {
    pub fn zeros(dims: Dims, labels: &[LayerId]) -> Result<Self> {
        let mut sorted = labels.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.is_empty() {
            return Err(Error::InvalidParameter {
                name: "labels",
                reason: "at least one label is required",
            });
        }
        let k = sorted.len();
        Ok(Self {
            dims,
            labels: sorted,
            costs: vec![0.0; dims.len() * k],
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn labels(&self) -> &[LayerId] {
        &self.labels
    }

    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    pub fn slot(&self, label: LayerId) -> Option<usize> {
        self.labels.binary_search(&label).ok()
    }

    /// Cost of assigning the label in slot `k` to pixel `i`.
    #[inline]
    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.costs[i * self.labels.len() + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, k: usize, cost: f64) {
        let n = self.labels.len();
        self.costs[i * n + k] = cost;
    }

    pub fn pixel(&self, i: usize) -> &[f64] {
        let n = self.labels.len();
        &self.costs[i * n..(i + 1) * n]
    }

    pub fn pixel_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.labels.len();
        &mut self.costs[i * n..(i + 1) * n]
    }

    /// Per-pixel cheapest label; ties go to the smallest label id.
    pub fn argmin(&self) -> LabelMap {
        let labels = (0..self.dims.len())
            .map(|i| {
                let row = self.pixel(i);
                let mut best = 0;
                for k in 1..row.len() {
                    if row[k] < row[best] {
                        best = k;
                    }
                }
                self.labels[best]
            })
            .collect();
        LabelMap::new(self.dims, labels).expect("sized to dims")
    }
}

/// Smallest probability fed to the logarithm.
const MIN_PROBABILITY: f64 = 1e-300;

/// `-ln p` per pixel and label. `posteriors[k]` belongs to `labels[k]`.
pub fn data_cost_from_posterior(posteriors: &[ProbabilityMap], labels: &[LayerId]) -> Result<CostVolume> {
    if posteriors.len() != labels.len() {
        return Err(Error::SizeMismatch {
            expected: labels.len(),
            found: posteriors.len(),
        });
    }
    let dims = posteriors
        .first()
        .map(|p| p.dims())
        .ok_or(Error::InvalidParameter {
            name: "labels",
            reason: "at least one label is required",
        })?;
    let mut vol = CostVolume::zeros(dims, labels)?;
    if vol.label_count() != labels.len() {
        return Err(Error::InvalidParameter {
            name: "labels",
            reason: "labels must be distinct",
        });
    }
    for (p, &l) in posteriors.iter().zip(labels) {
        dims.ensure_eq(p.dims())?;
        let k = vol.slot(l).expect("label present");
        for i in 0..dims.len() {
            vol.set(i, k, -libm::log(p.at(i).max(MIN_PROBABILITY)));
        }
    }
    Ok(vol)
}

/// Data costs from labeled trajectory points: within `radius` of its nearest
/// point, a pixel pays `c` for that point's label and `-c` for every other
/// label. Pixels with no point in range cost zero for all labels.
pub fn bootstrap_data_cost(
    dims: Dims,
    points: &[(Point, LayerId)],
    c: f64,
    radius: f64,
    labels: &[LayerId],
) -> Result<CostVolume> {
    let mut vol = CostVolume::zeros(dims, labels)?;
    for (i, nearest) in nearest_labels(dims, points, radius).into_iter().enumerate() {
        let Some(k) = nearest.and_then(|l| vol.slot(l)) else {
            continue;
        };
        for (slot, v) in vol.pixel_mut(i).iter_mut().enumerate() {
            *v = if slot == k { c } else { -c };
        }
    }
    Ok(vol)
}

/// Label of the nearest point within `radius` of every pixel center.
///
/// Distance ties go to the point listed first.
pub fn nearest_labels(dims: Dims, points: &[(Point, LayerId)], radius: f64) -> Vec<Option<LayerId>> {
    let mut best: Vec<Option<(f64, usize)>> = vec![None; dims.len()];
    let r = radius.max(0.0);
    for (idx, &(p, _)) in points.iter().enumerate() {
        let x0 = libm::floor(p.x - r) as i64;
        let x1 = libm::ceil(p.x + r) as i64;
        let y0 = libm::floor(p.y - r) as i64;
        let y1 = libm::ceil(p.y + r) as i64;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let Some(i) = dims.checked_index(x, y) else {
                    continue;
                };
                let d = p.distance(Point::new(x as f64, y as f64));
                if d > r {
                    continue;
                }
                if best[i].is_none_or(|(bd, _)| d < bd) {
                    best[i] = Some((d, idx));
                }
            }
        }
    }
    best.into_iter().map(|b| b.map(|(_, idx)| points[idx].1)).collect()
}

/// Boundary penalty between two neighboring colors, in `(0, 1]`.
pub fn smoothness_weight(a: Color, b: Color, sigma_a: f64) -> f64 {
    let d2: f64 = (0..3).map(|c| (a[c] - b[c]) * (a[c] - b[c])).sum();
    libm::exp(-d2 / (2.0 * sigma_a * sigma_a))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub sigma_a: f64,
    /// Label cost for labels without an override.
    pub label_cost: f64,
    pub label_cost_overrides: BTreeMap<LayerId, f64>,
    /// Bootstrap data cost for the supported label; must be negative.
    pub bootstrap_c: f64,
    pub bootstrap_radius: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            sigma_a: 0.1,
            label_cost: 0.0,
            label_cost_overrides: BTreeMap::new(),
            bootstrap_c: -10.0,
            bootstrap_radius: 3.0,
        }
    }
}

impl SegmentationParams {
    pub fn label_cost_of(&self, label: LayerId) -> f64 {
        self.label_cost_overrides.get(&label).copied().unwrap_or(self.label_cost)
    }

    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, bool, &'static str); 6] = [
            ("lambda1", self.lambda1 >= 0.0, "must be non-negative"),
            ("lambda2", self.lambda2 >= 0.0, "must be non-negative"),
            ("sigma_a", self.sigma_a > 0.0, "must be positive"),
            ("label_cost", self.label_cost >= 0.0 && self.label_cost_overrides.values().all(|&h| h >= 0.0), "must be non-negative"),
            ("bootstrap_c", self.bootstrap_c < 0.0, "must be negative"),
            ("bootstrap_radius", self.bootstrap_radius >= 0.0, "must be non-negative"),
        ];
        for (name, ok, reason) in checks {
            if !ok {
                return Err(Error::InvalidParameter { name, reason });
            }
        }
        Ok(())
    }
}

/// Neighbor pairs with their smoothness weights.
struct Edges {
    pairs: Vec<(usize, usize, f64)>,
}

impl Edges {
    fn new(frame: &Frame, sigma_a: f64) -> Self {
        let mut pairs = Vec::with_capacity(frame.dims().edge_count());
        frame.dims().for_each_edge(|i, j| {
            pairs.push((i, j, smoothness_weight(frame.at(i), frame.at(j), sigma_a)));
        });
        Self { pairs }
    }
}

fn slots_of(labels: &LabelMap, data: &CostVolume) -> Result<Vec<usize>> {
    labels
        .labels()
        .iter()
        .map(|&l| {
            data.slot(l).ok_or(Error::InvalidParameter {
                name: "labels",
                reason: "labeling uses a label outside the cost volume",
            })
        })
        .collect()
}

fn energy_of_slots(slots: &[usize], data: &CostVolume, edges: &Edges, params: &SegmentationParams) -> f64 {
    let unary: f64 = slots.iter().enumerate().map(|(i, &k)| data.at(i, k)).sum();
    let boundary: f64 = edges
        .pairs
        .iter()
        .filter(|(i, j, _)| slots[*i] != slots[*j])
        .map(|e| e.2)
        .sum();
    let mut used = vec![false; data.label_count()];
    for &k in slots {
        used[k] = true;
    }
    let label_costs: f64 = used
        .iter()
        .enumerate()
        .filter(|(_, &u)| u)
        .map(|(k, _)| params.label_cost_of(data.labels[k]))
        .sum();
    unary + params.lambda1 * boundary + params.lambda2 * label_costs
}

/// Data term plus weighted boundary penalties plus label costs of used labels.
pub fn evaluate_energy(labels: &LabelMap, data: &CostVolume, frame: &Frame, params: &SegmentationParams) -> Result<f64> {
    data.dims.ensure_eq(labels.dims())?;
    data.dims.ensure_eq(frame.dims())?;
    let slots = slots_of(labels, data)?;
    let edges = Edges::new(frame, params.sigma_a);
    Ok(energy_of_slots(&slots, data, &edges, params))
}

/// Result of [`minimize_energy`].
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub labels: LabelMap,
    pub energy: f64,
    pub initial_energy: f64,
    pub accepted_moves: usize,
}

/// Alpha-expansion with label costs, started from the per-pixel argmin.
///
/// With two labels the result is the exact minimum.
///
/// Labels are expanded in ascending id order until a full pass accepts no move.
pub fn minimize_energy(data: &CostVolume, frame: &Frame, params: &SegmentationParams) -> Result<Segmentation> {
    params.validate()?;
    data.dims.ensure_eq(frame.dims())?;
    if data.costs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "data",
            reason: "data costs must be finite",
        });
    }
    let edges = Edges::new(frame, params.sigma_a);
    let init = data.argmin();
    let mut slots = slots_of(&init, data)?;
    let initial_energy = energy_of_slots(&slots, data, &edges, params);
    let mut energy = initial_energy;
    let mut accepted_moves = 0;
    let k = data.label_count();
    if k == 2 {
        // Expanding label 1 over the all-0 labeling lets every pixel choose, so
        // the better of that move and all-0 is the global minimum.
        let zeros = vec![0; slots.len()];
        for candidate in [expansion_move(&zeros, 1, data, &edges, params), zeros] {
            let e = energy_of_slots(&candidate, data, &edges, params);
            if e < energy - 1e-12 * energy.abs().max(1.0) {
                slots = candidate;
                energy = e;
                accepted_moves += 1;
            }
        }
    }
    if k > 1 {
        loop {
            let mut improved = false;
            for alpha in 0..k {
                let candidate = expansion_move(&slots, alpha, data, &edges, params);
                let e = energy_of_slots(&candidate, data, &edges, params);
                if e < energy - 1e-12 * energy.abs().max(1.0) {
                    slots = candidate;
                    energy = e;
                    improved = true;
                    accepted_moves += 1;
                }
            }
            if !improved {
                break;
            }
        }
    }
    let labels = LabelMap::new(data.dims, slots.iter().map(|&s| data.labels[s]).collect())?;
    Ok(Segmentation {
        labels,
        energy,
        initial_energy,
        accepted_moves,
    })
}

/// Optimal expansion of `alpha` from `slots`, excluding the cost of
/// introducing `alpha`; the caller's energy comparison accounts for it.
///
/// Binary variable per pixel: source side keeps the current label, sink side
/// switches to `alpha`.
fn expansion_move(slots: &[usize], alpha: usize, data: &CostVolume, edges: &Edges, params: &SegmentationParams) -> Vec<usize> {
    let n = slots.len();
    let s = n;
    let t = n + 1;
    let mut g = FlowGraph::new(n + 2);
    // Unary terms as (cost if kept, cost if switched).
    let mut keep = vec![0.0; n];
    let mut switch = vec![0.0; n];
    for i in 0..n {
        keep[i] = data.at(i, slots[i]);
        switch[i] = data.at(i, alpha);
    }
    let lam = params.lambda1;
    for &(i, j, w) in &edges.pairs {
        let (li, lj) = (slots[i], slots[j]);
        let pot = |a: usize, b: usize| if a != b { lam * w } else { 0.0 };
        let e00 = pot(li, lj);
        let e01 = pot(li, alpha);
        let e10 = pot(alpha, lj);
        let e11 = 0.0;
        // E = e00 + (e10 - e00) x_i + (e11 - e10) x_j + (e01 + e10 - e00 - e11)(1 - x_i) x_j
        switch[i] += e10 - e00;
        switch[j] += e11 - e10;
        let coupling = e01 + e10 - e00 - e11;
        debug_assert!(coupling >= -1e-12);
        // (1 - x_i) x_j is paid when i keeps and j switches: edge i -> j.
        g.add_edge(i, j, coupling.max(0.0), 0.0);
    }

    // Saved label costs: a label other than alpha disappears only if every
    // pixel using it switches. Auxiliary node y per label, sink side = vanished.
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); data.label_count()];
    for (i, &l) in slots.iter().enumerate() {
        if l != alpha {
            members[l].push(i);
        }
    }
    for (beta, m) in members.iter().enumerate() {
        let h = params.lambda2 * params.label_cost_of(data.labels[beta]);
        if m.is_empty() || h <= 0.0 {
            continue;
        }
        let y = g.add_node();
        // h (1 - y): paid when y stays on the source side.
        g.add_edge(y, t, h, 0.0);
        // h y (1 - x_i): paid when y vanishes but pixel i keeps beta.
        for &i in m {
            g.add_edge(i, y, h, 0.0);
        }
    }

    for i in 0..n {
        // Cost e0 when kept (source side: edge i -> t is cut), e1 when switched (s -> i cut).
        let (e0, e1) = (keep[i], switch[i]);
        let base = e0.min(e1);
        g.add_edge(s, i, e1 - base, 0.0);
        g.add_edge(i, t, e0 - base, 0.0);
    }
    let (_, source_side) = g.max_flow(s, t);
    (0..n)
        .map(|i| if source_side[i] { slots[i] } else { alpha })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn vol(dims: Dims, labels: &[LayerId], costs: &[f64]) -> CostVolume {
        let mut v = CostVolume::zeros(dims, labels).unwrap();
        v.costs.copy_from_slice(costs);
        v
    }

    #[test]
    fn posterior_costs() {
        let d = Dims::new(2, 1);
        let p = [
            ProbabilityMap::new(d, vec![1.0, 0.5]).unwrap(),
            ProbabilityMap::new(d, vec![0.0, 0.5]).unwrap(),
        ];
        let v = data_cost_from_posterior(&p, &[0, 3]).unwrap();
        assert_eq!(v.at(0, 0), 0.0);
        assert!((v.at(1, 0) - core::f64::consts::LN_2).abs() < 1e-15);
        assert!(v.at(0, 1).is_finite());
    }

    #[test]
    fn bootstrap_rule() {
        let d = Dims::new(10, 1);
        let pts = [(Point::new(2.0, 0.0), 0), (Point::new(5.0, 0.0), 2)];
        let v = bootstrap_data_cost(d, &pts, -1.0, 1.5, &[0, 2, 5]).unwrap();
        assert_eq!(v.pixel(2), &[-1.0, 1.0, 1.0]);
        assert_eq!(v.pixel(9), &[0.0, 0.0, 0.0]);
        // Pixel 4 is 2 from the first point and 1 from the second.
        assert_eq!(v.pixel(4), &[1.0, -1.0, 1.0]);
        let v = bootstrap_data_cost(d, &pts, -1.0, 3.0, &[0, 2]).unwrap();
        assert_eq!(v.pixel(3), &[-1.0, 1.0]);
    }

    #[test]
    fn smoothness_examples() {
        assert_eq!(smoothness_weight([0.2; 3], [0.2; 3], 0.1), 1.0);
        let s: f64 = 0.1;
        let d = (2.0 * s * s).sqrt();
        let w = smoothness_weight([0.0; 3], [d, 0.0, 0.0], s);
        assert!((w - (-1.0f64).exp()).abs() < 1e-12);
        let mut last = 1.0;
        for k in 1..50 {
            let w = smoothness_weight([0.0; 3], [k as f64 * 0.01, 0.0, 0.0], s);
            assert!(w < last);
            last = w;
        }
    }

    #[test]
    fn energy_examples() {
        let d = Dims::new(3, 3);
        let f = Frame::filled(d, [0.5; 3]);
        let mut v = CostVolume::zeros(d, &[0, 1]).unwrap();
        for i in 0..9 {
            v.set(i, 0, i as f64);
            v.set(i, 1, 1.0);
        }
        let params = SegmentationParams::default();
        let uniform = LabelMap::filled(d, 0);
        assert_eq!(evaluate_energy(&uniform, &v, &f, &params).unwrap(), 36.0);
        let checker = LabelMap::new(d, (0..9).map(|i| ((i % 3 + i / 3) % 2) as LayerId).collect()).unwrap();
        let e = evaluate_energy(&checker, &v, &f, &params).unwrap();
        let data: f64 = (0..9).map(|i| if (i % 3 + i / 3) % 2 == 0 { i as f64 } else { 1.0 }).sum();
        assert_eq!(e, data + 12.0);

        let mut p2 = params.clone();
        p2.label_cost = 5.0;
        let v3 = {
            let mut v3 = CostVolume::zeros(d, &[0, 1, 7]).unwrap();
            for i in 0..9 {
                v3.set(i, 0, i as f64);
                v3.set(i, 1, 1.0);
                v3.set(i, 2, 0.0);
            }
            v3
        };
        assert_eq!(
            evaluate_energy(&checker, &v, &f, &p2).unwrap(),
            evaluate_energy(&checker, &v3, &f, &p2).unwrap()
        );
    }

    #[test]
    fn decoupled_pixels_take_argmin() {
        let d = Dims::new(4, 3);
        let costs: Vec<f64> = (0..36).map(|k| ((k * 7919) % 13) as f64).collect();
        let v = vol(d, &[0, 1, 2], &costs);
        let p = SegmentationParams {
            lambda1: 0.0,
            lambda2: 0.0,
            ..Default::default()
        };
        let out = minimize_energy(&v, &Frame::filled(d, [0.0; 3]), &p).unwrap();
        assert_eq!(out.labels, v.argmin());
    }

    #[test]
    fn smoothing_removes_isolated_pixel() {
        let d = Dims::new(5, 5);
        let mut v = CostVolume::zeros(d, &[0, 1]).unwrap();
        for i in 0..25 {
            v.set(i, 1, 1.0);
        }
        v.set(12, 0, 1.0);
        v.set(12, 1, 0.0);
        let out = minimize_energy(&v, &Frame::filled(d, [0.5; 3]), &SegmentationParams::default()).unwrap();
        assert!(out.labels.labels().iter().all(|&l| l == 0));
        assert!(out.energy < out.initial_energy);
    }

    #[test]
    fn label_cost_removes_weak_label() {
        let d = Dims::new(3, 1);
        let v = vol(d, &[0, 1], &[0.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
        let frame = Frame::new(d, vec![[0.0; 3], [0.5; 3], [1.0; 3]]).unwrap();
        let p = SegmentationParams {
            label_cost: 2.0,
            ..Default::default()
        };
        let out = minimize_energy(&v, &frame, &p).unwrap();
        assert_eq!(out.labels.labels(), &[0, 0, 0]);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = SegmentationParams {
            bootstrap_c: 1.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    fn brute_force(v: &CostVolume, f: &Frame, p: &SegmentationParams) -> f64 {
        let n = v.dims().len();
        let k = v.label_count();
        let mut best = f64::INFINITY;
        let total = k.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let labels: Vec<LayerId> = (0..n)
                .map(|_| {
                    let l = v.labels()[c % k];
                    c /= k;
                    l
                })
                .collect();
            let lm = LabelMap::new(v.dims(), labels).unwrap();
            best = best.min(evaluate_energy(&lm, v, f, p).unwrap());
        }
        best
    }

    proptest! {
        #[test]
        fn never_below_optimum_and_never_above_start(
            costs in proptest::collection::vec(0.0f64..3.0, 12),
            colors in proptest::collection::vec(0.0f64..1.0, 12),
            h in 0.0f64..2.0,
        ) {
            let d = Dims::new(2, 2);
            let v = vol(d, &[0, 1, 2], &costs);
            let f = Frame::new(d, (0..4).map(|i| [colors[3 * i], colors[3 * i + 1], colors[3 * i + 2]]).collect()).unwrap();
            let p = SegmentationParams { label_cost: h, ..Default::default() };
            let out = minimize_energy(&v, &f, &p).unwrap();
            let e = evaluate_energy(&out.labels, &v, &f, &p).unwrap();
            prop_assert!((e - out.energy).abs() < 1e-9);
            prop_assert!(e <= out.initial_energy + 1e-12);
            prop_assert!(e >= brute_force(&v, &f, &p) - 1e-9);
        }

        #[test]
        fn binary_instances_are_optimal(
            w in 1usize..4, h in 1usize..4,
            costs in proptest::collection::vec(0.0f64..3.0, 18),
            colors in proptest::collection::vec(0.0f64..1.0, 27),
            hk in 0.0f64..3.0,
        ) {
            let d = Dims::new(w, h);
            let n = d.len();
            let v = vol(d, &[0, 4], &costs[..2 * n]);
            let f = Frame::new(d, (0..n).map(|i| [colors[3 * i], colors[3 * i + 1], colors[3 * i + 2]]).collect()).unwrap();
            let p = SegmentationParams { label_cost: hk, sigma_a: 0.3, ..Default::default() };
            let out = minimize_energy(&v, &f, &p).unwrap();
            prop_assert!((out.energy - brute_force(&v, &f, &p)).abs() < 1e-9);
        }

        #[test]
        fn zero_weights_give_posterior_argmax(
            vals in proptest::collection::vec(0.001f64..1.0, 3 * 16),
        ) {
            let d = Dims::new(4, 4);
            let mut post: Vec<ProbabilityMap> = (0..3).map(|k| ProbabilityMap::new(d, vals[k * 16..(k + 1) * 16].to_vec()).unwrap()).collect();
            crate::image::normalize_stack(&mut post);
            let v = data_cost_from_posterior(&post, &[0, 1, 2]).unwrap();
            let p = SegmentationParams { lambda1: 0.0, lambda2: 0.0, ..Default::default() };
            let out = minimize_energy(&v, &Frame::filled(d, [0.0; 3]), &p).unwrap();
            for i in 0..16 {
                let mut best = 0;
                for k in 1..3 { if post[k].at(i) > post[best].at(i) { best = k; } }
                prop_assert_eq!(out.labels.at(i), best as LayerId);
            }
        }

        #[test]
        fn raising_label_cost_never_introduces_that_label(
            costs in proptest::collection::vec(0.0f64..3.0, 3 * 9),
            h0 in 0.0f64..2.0, bump in 0.0f64..5.0, which in 0u32..3,
        ) {
            let d = Dims::new(3, 3);
            let v = vol(d, &[0, 1, 2], &costs);
            let f = Frame::filled(d, [0.5; 3]);
            let base = SegmentationParams { label_cost: h0, ..Default::default() };
            let mut raised = base.clone();
            raised.label_cost_overrides.insert(which, h0 + bump);
            let a = minimize_energy(&v, &f, &base).unwrap();
            let b = minimize_energy(&v, &f, &raised).unwrap();
            if !a.labels.distinct().contains(&which) {
                prop_assert!(!b.labels.distinct().contains(&which));
            }
        }

        #[test]
        fn bootstrap_nearest_point_wins(
            pts in proptest::collection::vec((0.0f64..8.0, 0.0f64..8.0, 0u32..3), 1..6),
            radius in 0.5f64..4.0,
        ) {
            let d = Dims::new(8, 8);
            let points: Vec<(Point, LayerId)> = pts.iter().map(|&(x, y, l)| (Point::new(x, y), l)).collect();
            let v = bootstrap_data_cost(d, &points, -2.0, radius, &[0, 1, 2]).unwrap();
            for i in 0..d.len() {
                let (x, y) = d.coords(i);
                let c = Point::new(x as f64, y as f64);
                let mut nearest: Option<(f64, LayerId)> = None;
                for &(p, l) in &points {
                    let dist = p.distance(c);
                    if dist <= radius && nearest.is_none_or(|(bd, _)| dist < bd) {
                        nearest = Some((dist, l));
                    }
                }
                match nearest {
                    None => prop_assert!(v.pixel(i).iter().all(|&x| x == 0.0)),
                    Some((_, l)) => {
                        for (k, &cost) in v.pixel(i).iter().enumerate() {
                            prop_assert_eq!(cost, if k as LayerId == l { -2.0 } else { 2.0 });
                        }
                    }
                }
            }
        }
    }
}
