//! Synthetic scene files.
//!
//! Same `key = value` syntax as settings files. Each `sprite` line adds one
//! sprite, drawn over the ones before it:
//!
//! ```text
//! sprite = width height x y vx vy  r g b  r g b  cell
//! ```

use std::fs;
use std::path::Path;

use mlbs_core::eval::{Sprite, Surface, SyntheticScene};
use mlbs_core::Dims;

use crate::config::parse_entries;
use crate::error::{Error, Result};

fn reals(value: &str, n: usize, key: &str) -> std::result::Result<Vec<f64>, String> {
    let vals = value
        .split_whitespace()
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{key}`: cannot parse `{s}`"))
        })
        .collect::<std::result::Result<Vec<f64>, String>>()?;
    if vals.len() != n {
        return Err(format!("`{key}`: expected {n} values, got {}", vals.len()));
    }
    Ok(vals)
}

fn count(value: &str, key: &str) -> std::result::Result<usize, String> {
    value.parse().map_err(|_| format!("`{key}`: cannot parse `{value}`"))
}

fn color(v: &[f64]) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

pub fn parse_scene_str(text: &str) -> std::result::Result<SyntheticScene, String> {
    let mut scene = SyntheticScene::default();
    for (line, key, value) in parse_entries(text)? {
        let at = |e: String| format!("line {line}: {e}");
        let k = key.as_str();
        match k {
            "width" => scene.dims = Dims::new(count(&value, k).map_err(at)?, scene.dims.height),
            "height" => scene.dims = Dims::new(scene.dims.width, count(&value, k).map_err(at)?),
            "frames" => scene.frames = count(&value, k).map_err(at)?,
            "seed" => scene.seed = value.parse().map_err(|_| at(format!("`seed`: cannot parse `{value}`")))?,
            "trajectories_per_surface" => scene.trajectories_per_surface = count(&value, k).map_err(at)?,
            "track_margin" => scene.track_margin = reals(&value, 1, k).map_err(at)?[0],
            "jitter" => scene.jitter = reals(&value, 1, k).map_err(at)?[0],
            "background_velocity" => {
                let v = reals(&value, 2, k).map_err(at)?;
                scene.background_velocity = [v[0], v[1]];
            }
            "background_color_a" => scene.background.color_a = color(&reals(&value, 3, k).map_err(at)?),
            "background_color_b" => scene.background.color_b = color(&reals(&value, 3, k).map_err(at)?),
            "background_cell" => scene.background.texture_cell = reals(&value, 1, k).map_err(at)?[0],
            "sprite" => {
                let v = reals(&value, 13, k).map_err(at)?;
                let size = |x: f64| {
                    (x >= 1.0 && x.fract() == 0.0)
                        .then_some(x as usize)
                        .ok_or_else(|| at(format!("`sprite`: size must be a positive integer, got {x}")))
                };
                scene.sprites.push(Sprite {
                    width: size(v[0])?,
                    height: size(v[1])?,
                    start: [v[2], v[3]],
                    velocity: [v[4], v[5]],
                    surface: Surface {
                        color_a: color(&v[6..9]),
                        color_b: color(&v[9..12]),
                        texture_cell: v[12],
                    },
                });
            }
            _ => return Err(at(format!("unknown key `{key}`"))),
        }
    }
    Ok(scene)
}

pub fn load_scene(path: &Path) -> Result<SyntheticScene> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn scene_to_text(scene: &SyntheticScene) -> String {
    let c = |v: [f64; 3]| format!("{:?} {:?} {:?}", v[0], v[1], v[2]);
    let bg = &scene.background;
    let mut lines = vec![
        format!("width = {}", scene.dims.width),
        format!("height = {}", scene.dims.height),
        format!("frames = {}", scene.frames),
        format!("seed = {}", scene.seed),
        format!("trajectories_per_surface = {}", scene.trajectories_per_surface),
        format!("track_margin = {:?}", scene.track_margin),
        format!("jitter = {:?}", scene.jitter),
        format!(
            "background_velocity = {:?} {:?}",
            scene.background_velocity[0], scene.background_velocity[1]
        ),
        format!("background_color_a = {}", c(bg.color_a)),
        format!("background_color_b = {}", c(bg.color_b)),
        format!("background_cell = {:?}", bg.texture_cell),
    ];
    for s in &scene.sprites {
        lines.push(format!(
            "sprite = {} {} {:?} {:?} {:?} {:?}  {}  {}  {:?}",
            s.width,
            s.height,
            s.start[0],
            s.start[1],
            s.velocity[0],
            s.velocity[1],
            c(s.surface.color_a),
            c(s.surface.color_b),
            s.surface.texture_cell
        ));
    }
    let mut text = lines.join("\n");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_sprites_in_order() {
        let s = parse_scene_str(
            "width = 32\nheight = 24\n\
             sprite = 4 5 1 2 1 0  1 0 0  1 0.5 0  3\n\
             sprite = 6 6 -8 2 2 0  0 0 1  0 0.5 1  4\n",
        )
        .unwrap();
        assert_eq!(s.dims, Dims::new(32, 24));
        assert_eq!(s.sprites.len(), 2);
        assert_eq!((s.sprites[0].width, s.sprites[0].height), (4, 5));
        assert_eq!(s.sprites[1].start, [-8.0, 2.0]);
    }

    #[test]
    fn round_trip() {
        let s = parse_scene_str("sprite = 4 4 1.5 2 1 -0.5  1 0 0  1 0.5 0  3\nbackground_velocity = -1 0\n").unwrap();
        assert_eq!(parse_scene_str(&scene_to_text(&s)).unwrap(), s);
    }

    #[test]
    fn rejects_malformed_sprites() {
        assert!(parse_scene_str("sprite = 4 4 1 2").unwrap_err().contains("line 1"));
        assert!(parse_scene_str("sprite = 4.5 4 1 2 1 0  1 0 0  1 0.5 0  3").is_err());
        assert!(parse_scene_str("colour = 1").is_err());
    }
}
