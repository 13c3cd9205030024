//! Trajectory text files: one line per trajectory, `id start_frame x0 y0 x1 y1 ...`.
//!
//! Blank lines and lines starting with `#` are skipped.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mlbs_core::{Point, Trajectory, TrajectorySet};

use crate::error::{Error, Result};

/// Parses trajectory text. Errors carry the 1-based line number.
pub fn parse_trajectories_str(text: &str) -> std::result::Result<TrajectorySet, (usize, String)> {
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 4 {
            return Err((line_no, "expected an id, a start frame and at least one point".into()));
        }
        if tokens.len() % 2 != 0 {
            return Err((line_no, "odd number of coordinates".into()));
        }
        let id: u64 = tokens[0]
            .parse()
            .map_err(|_| (line_no, format!("invalid id `{}`", tokens[0])))?;
        let start: usize = tokens[1]
            .parse()
            .map_err(|_| (line_no, format!("invalid start frame `{}`", tokens[1])))?;
        if !ids.insert(id) {
            return Err((line_no, format!("duplicate id {id}")));
        }
        let coords = tokens[2..]
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| (line_no, format!("invalid coordinate `{t}`")))
            })
            .collect::<std::result::Result<Vec<f64>, _>>()?;
        let points = coords.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect();
        out.push(Trajectory::new(id, start, points));
    }
    Ok(TrajectorySet::new(out))
}

pub fn parse_trajectories(path: &Path) -> Result<TrajectorySet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectories_str(&text).map_err(|(line, reason)| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    })
}

/// Shortest decimal form of every coordinate, so parsing restores the exact values.
pub fn serialize_trajectories(set: &TrajectorySet) -> String {
    let mut out = String::new();
    for t in set {
        write!(out, "{} {}", t.id, t.start_frame).unwrap();
        for p in &t.points {
            write!(out, " {:?} {:?}", p.x, p.y).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectories(path: &Path, set: &TrajectorySet) -> Result<()> {
    fs::write(path, serialize_trajectories(set)).map_err(|e| Error::io(path, e))
}
