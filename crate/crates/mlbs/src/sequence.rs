//! Numbered image files in a directory.

use std::fs;
use std::path::{Path, PathBuf};

use mlbs_core::{Frame, LabelMap};

use crate::error::{Error, Result};
use crate::netpbm;

/// The last run of digits in a file stem, e.g. `12` for `f0012.ppm`.
pub fn frame_index(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let end = stem.rfind(|c: char| c.is_ascii_digit())? + 1;
    let start = stem[..end]
        .rfind(|c: char| !c.is_ascii_digit())
        .map_or(0, |i| i + 1);
    stem[start..end].parse().ok()
}

/// `.ppm`/`.pgm` files in `dir` carrying a numeric index, sorted by it.
///
/// Equal indices are ordered by file name.
pub fn numbered_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !matches!(ext.as_deref(), Some("ppm" | "pgm")) || !path.is_file() {
            continue;
        }
        if let Some(idx) = frame_index(&path) {
            files.push((idx, path));
        }
    }
    files.sort();
    Ok(files.into_iter().map(|(_, p)| p).collect())
}

pub fn load_frame_sequence(dir: &Path) -> Result<Vec<Frame>> {
    let files = numbered_images(dir)?;
    if files.is_empty() {
        return Err(Error::EmptySequence { path: dir.to_path_buf() });
    }
    let mut frames: Vec<Frame> = Vec::with_capacity(files.len());
    for path in &files {
        let frame = netpbm::read_frame(path)?;
        if let Some(first) = frames.first() {
            if first.dims() != frame.dims() {
                return Err(Error::FrameSize {
                    path: path.clone(),
                    expected: first.dims(),
                    found: frame.dims(),
                });
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

pub fn load_label_sequence(dir: &Path) -> Result<Vec<(u64, LabelMap)>> {
    numbered_images(dir)?
        .iter()
        .map(|p| Ok((frame_index(p).expect("numbered"), netpbm::read_label_map(p)?)))
        .collect()
}

pub fn frame_file(dir: &Path, t: usize) -> PathBuf {
    dir.join(format!("frame_{t:04}.ppm"))
}

pub fn mask_file(dir: &Path, t: usize) -> PathBuf {
    dir.join(format!("mask_{t:04}.pgm"))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_is_the_last_digit_run() {
        assert_eq!(frame_index(Path::new("f0012.ppm")), Some(12));
        assert_eq!(frame_index(Path::new("cam2_frame10.ppm")), Some(10));
        assert_eq!(frame_index(Path::new("7.pgm")), Some(7));
        assert_eq!(frame_index(Path::new("frame_9_final.ppm")), Some(9));
        assert_eq!(frame_index(Path::new("cover.ppm")), None);
    }
}
