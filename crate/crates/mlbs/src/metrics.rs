//! Per-frame scores and their CSV form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mlbs_core::eval::{binary_fscore, multilabel_metric, Prf};
use mlbs_core::LabelMap;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "frame,precision,recall,fscore,ml_precision,ml_recall,ml_fscore,regions";

#[derive(Debug, Clone, PartialEq)]
pub struct FrameMetrics {
    pub frame: u64,
    pub binary: Prf,
    pub multilabel: Prf,
    /// Scored regions of the multilabel metric.
    pub regions: usize,
}

pub fn score_frame(frame: u64, mask: &LabelMap, gt: &LabelMap) -> Result<FrameMetrics> {
    let ml = multilabel_metric(mask, gt)?;
    Ok(FrameMetrics {
        frame,
        binary: binary_fscore(mask, gt)?,
        multilabel: ml.overall,
        regions: ml.regions.len(),
    })
}

pub fn to_csv(rows: &[FrameMetrics]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            r.frame,
            r.binary.precision,
            r.binary.recall,
            r.binary.fscore,
            r.multilabel.precision,
            r.multilabel.recall,
            r.multilabel.fscore,
            r.regions
        )
        .unwrap();
    }
    out
}

pub fn write_csv(path: &Path, rows: &[FrameMetrics]) -> Result<()> {
    fs::write(path, to_csv(rows)).map_err(|e| Error::io(path, e))
}

/// Mean binary and multilabel F over rows with `frame >= from`.
pub fn mean_fscores(rows: &[FrameMetrics], from: u64) -> Option<(f64, f64)> {
    let sel: Vec<&FrameMetrics> = rows.iter().filter(|r| r.frame >= from).collect();
    if sel.is_empty() {
        return None;
    }
    let n = sel.len() as f64;
    Some((
        sel.iter().map(|r| r.binary.fscore).sum::<f64>() / n,
        sel.iter().map(|r| r.multilabel.fscore).sum::<f64>() / n,
    ))
}
