//! Binary Netpbm images: `P6` color and `P5` gray, 8 bits per sample.

use std::fs;
use std::path::Path;

use mlbs_core::{Dims, Frame, LabelMap};

use crate::error::{Error, Result};

/// A decoded 8-bit image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub maxval: u8,
    /// 1 for `P5`, 3 for `P6`.
    pub channels: usize,
    pub samples: Vec<u8>,
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> std::result::Result<Header, String> {
    if bytes.len() < 2 {
        return Err("file too short".into());
    }
    let magic = [bytes[0], bytes[1]];
    if magic != *b"P5" && magic != *b"P6" {
        return Err("not a binary PGM or PPM file".into());
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // Whitespace and comments may separate header fields.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err("malformed header".into());
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or("header value out of range")?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("malformed header".into());
    }
    let [width, height, maxval] = fields;
    Ok(Header {
        magic,
        width,
        height,
        maxval,
        data_start: pos + 1,
    })
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Image, String> {
    let h = parse_header(bytes)?;
    if h.width == 0 || h.height == 0 {
        return Err("zero image dimension".into());
    }
    if h.maxval == 0 || h.maxval > 255 {
        return Err(format!("unsupported maxval {}", h.maxval));
    }
    let channels = if h.magic == *b"P6" { 3 } else { 1 };
    let len = h.width * h.height * channels;
    let data = &bytes[h.data_start..];
    if data.len() < len {
        return Err(format!("expected {len} bytes of pixel data, found {}", data.len()));
    }
    let samples = data[..len].to_vec();
    if samples.iter().any(|&s| s as usize > h.maxval) {
        return Err("sample exceeds maxval".into());
    }
    Ok(Image {
        width: h.width,
        height: h.height,
        maxval: h.maxval as u8,
        channels,
        samples,
    })
}

pub fn encode(img: &Image) -> Vec<u8> {
    let magic = if img.channels == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    out.extend_from_slice(&img.samples);
    out
}

pub fn read_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|reason| Error::Decode {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    fs::write(path, encode(img)).map_err(|e| Error::io(path, e))
}

/// Converts to a frame with channels scaled by `1 / maxval`; gray is replicated.
pub fn image_to_frame(img: &Image) -> Frame {
    let scale = 1.0 / img.maxval as f64;
    let pixels = img
        .samples
        .chunks_exact(img.channels)
        .map(|px| {
            let c = |k: usize| px[k.min(img.channels - 1)] as f64 * scale;
            [c(0), c(1), c(2)]
        })
        .collect();
    Frame::new(Dims::new(img.width, img.height), pixels).expect("sample count matches dims")
}

/// Quantizes each channel to the nearest of 256 levels.
pub fn frame_to_image(frame: &Frame) -> Image {
    let samples = frame
        .pixels()
        .iter()
        .flat_map(|px| px.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8))
        .collect();
    Image {
        width: frame.width(),
        height: frame.height(),
        maxval: 255,
        channels: 3,
        samples,
    }
}

pub fn read_frame(path: &Path) -> Result<Frame> {
    read_image(path).map(|img| image_to_frame(&img))
}

pub fn write_frame(path: &Path, frame: &Frame) -> Result<()> {
    write_image(path, &frame_to_image(frame))
}

/// Reads a `P5` mask; gray values are label ids.
pub fn read_label_map(path: &Path) -> Result<LabelMap> {
    let img = read_image(path)?;
    if img.channels != 1 {
        return Err(Error::Decode {
            path: path.to_path_buf(),
            reason: "label maps must be P5".into(),
        });
    }
    let labels = img.samples.iter().map(|&s| s as u32).collect();
    Ok(LabelMap::new(Dims::new(img.width, img.height), labels).expect("sample count matches dims"))
}

pub fn label_map_to_image(map: &LabelMap) -> std::result::Result<Image, u32> {
    let samples = map
        .labels()
        .iter()
        .map(|&l| u8::try_from(l).map_err(|_| l))
        .collect::<std::result::Result<Vec<u8>, u32>>()?;
    Ok(Image {
        width: map.dims().width,
        height: map.dims().height,
        maxval: 255,
        channels: 1,
        samples,
    })
}

pub fn write_label_map(path: &Path, map: &LabelMap) -> Result<()> {
    let img = label_map_to_image(map).map_err(|label| Error::LabelOutOfRange {
        path: path.to_path_buf(),
        label,
    })?;
    write_image(path, &img)
}

/// Writes a map with values in `[0, 1]` as an 8-bit gray image.
pub fn write_scalar_map(path: &Path, map: &mlbs_core::ScalarMap) -> Result<()> {
    let samples = map
        .values()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    write_image(
        path,
        &Image {
            width: map.dims().width,
            height: map.dims().height,
            maxval: 255,
            channels: 1,
            samples,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_with_comments() {
        let mut bytes = b"P5\n# made by hand\n2 1\n# depth\n255\n".to_vec();
        bytes.extend_from_slice(&[3, 250]);
        let img = decode(&bytes).unwrap();
        assert_eq!((img.width, img.height, img.channels), (2, 1, 1));
        assert_eq!(img.samples, vec![3, 250]);
    }

    #[test]
    fn red_pixel_is_unit_red() {
        let mut bytes = b"P6 1 1 255 ".to_vec();
        bytes.extend_from_slice(&[255, 0, 0]);
        let f = image_to_frame(&decode(&bytes).unwrap());
        assert_eq!(f.at(0), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn gray_expands_to_three_channels() {
        let mut bytes = b"P5 1 1 255\n".to_vec();
        bytes.push(51);
        let f = image_to_frame(&decode(&bytes).unwrap());
        assert_eq!(f.at(0), [0.2, 0.2, 0.2]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode(b"P3 1 1 255\n1 2 3").is_err());
        assert!(decode(b"P6 2 2 255\n\x00\x00").is_err());
        assert!(decode(b"P5 1 1 65535\n\x00\x00").is_err());
        assert!(decode(b"P5 0 1 255\n").is_err());
        assert!(decode(b"P5 1 1 10\n\x0b").is_err());
    }

    #[test]
    fn label_ids_above_255_are_rejected() {
        let map = LabelMap::new(Dims::new(1, 1), vec![256]).unwrap();
        assert_eq!(label_map_to_image(&map), Err(256));
    }
}
