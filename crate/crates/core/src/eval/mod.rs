//! Segmentation scoring and synthetic ground-truthed sequences.

pub mod hungarian;
pub mod synthetic;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::Result;
use crate::image::{LabelMap, LayerId, BACKGROUND};

pub use synthetic::{generate_synthetic, Sprite, Surface, SyntheticScene, SyntheticSequence};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let fscore = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            fscore,
        }
    }
}

/// Foreground-vs-background precision, recall and F-score.
///
/// With no predicted foreground, precision is 1; with no ground-truth
/// foreground, recall is 1.
pub fn binary_fscore(mask: &LabelMap, gt: &LabelMap) -> Result<Prf> {
    mask.dims().ensure_eq(gt.dims())?;
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for (&m, &g) in mask.labels().iter().zip(gt.labels()) {
        match (m != BACKGROUND, g != BACKGROUND) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fnn == 0 { 1.0 } else { tp as f64 / (tp + fnn) as f64 };
    Ok(Prf::new(precision, recall))
}

/// Score of one generated or ground-truth region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionScore {
    pub generated: Option<LayerId>,
    pub ground_truth: Option<LayerId>,
    pub score: Prf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultilabelScore {
    /// Mean precision, recall and F over all scored regions.
    pub overall: Prf,
    pub regions: Vec<RegionScore>,
}

/// Region-level metric over foreground labels.
///
/// Generated and ground-truth regions (one per label id) are matched one to
/// one by maximal summed F-score, matching as many pairs as possible. An
/// unmatched generated region scores P = 1, R = 0; an unmatched ground-truth
/// region scores P = R = 0. The overall score averages the region scores.
/// Without any foreground region on either side the score is 1.
pub fn multilabel_metric(mask: &LabelMap, gt: &LabelMap) -> Result<MultilabelScore> {
    mask.dims().ensure_eq(gt.dims())?;
    let gen_ids: Vec<LayerId> = mask.distinct().into_iter().filter(|&l| l != BACKGROUND).collect();
    let gt_ids: Vec<LayerId> = gt.distinct().into_iter().filter(|&l| l != BACKGROUND).collect();
    let mut gen_size: BTreeMap<LayerId, usize> = BTreeMap::new();
    let mut gt_size: BTreeMap<LayerId, usize> = BTreeMap::new();
    let mut overlap: BTreeMap<(LayerId, LayerId), usize> = BTreeMap::new();
    for (&m, &g) in mask.labels().iter().zip(gt.labels()) {
        if m != BACKGROUND {
            *gen_size.entry(m).or_default() += 1;
        }
        if g != BACKGROUND {
            *gt_size.entry(g).or_default() += 1;
        }
        if m != BACKGROUND && g != BACKGROUND {
            *overlap.entry((m, g)).or_default() += 1;
        }
    }
    let pair = |c: LayerId, g: LayerId| -> Prf {
        let inter = overlap.get(&(c, g)).copied().unwrap_or(0) as f64;
        Prf::new(inter / gen_size[&c] as f64, inter / gt_size[&g] as f64)
    };
    let f: Vec<Vec<f64>> = gen_ids
        .iter()
        .map(|&c| gt_ids.iter().map(|&g| pair(c, g).fscore).collect())
        .collect();
    let neg: Vec<Vec<f64>> = f.iter().map(|row| row.iter().map(|x| -x).collect()).collect();
    let assignment = hungarian::min_cost_assignment(&neg);

    let mut regions = Vec::new();
    let mut gt_matched = alloc::vec![false; gt_ids.len()];
    for (r, &c) in gen_ids.iter().enumerate() {
        match assignment[r] {
            Some(k) => {
                gt_matched[k] = true;
                regions.push(RegionScore {
                    generated: Some(c),
                    ground_truth: Some(gt_ids[k]),
                    score: pair(c, gt_ids[k]),
                });
            }
            None => regions.push(RegionScore {
                generated: Some(c),
                ground_truth: None,
                score: Prf::new(1.0, 0.0),
            }),
        }
    }
    for (k, &g) in gt_ids.iter().enumerate() {
        if !gt_matched[k] {
            regions.push(RegionScore {
                generated: None,
                ground_truth: Some(g),
                score: Prf {
                    precision: 0.0,
                    recall: 0.0,
                    fscore: 0.0,
                },
            });
        }
    }
    let overall = if regions.is_empty() {
        Prf::new(1.0, 1.0)
    } else {
        let n = regions.len() as f64;
        Prf {
            precision: regions.iter().map(|r| r.score.precision).sum::<f64>() / n,
            recall: regions.iter().map(|r| r.score.recall).sum::<f64>() / n,
            fscore: regions.iter().map(|r| r.score.fscore).sum::<f64>() / n,
        }
    };
    Ok(MultilabelScore { overall, regions })
}

/// Intersection over union of the pixels carrying `a` in `mask` and `b` in `gt`.
pub fn iou(mask: &LabelMap, a: LayerId, gt: &LabelMap, b: LayerId) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&m, &g) in mask.labels().iter().zip(gt.labels()) {
        let (x, y) = (m == a, g == b);
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}
