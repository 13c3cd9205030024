//! Sparse feature trajectories.

use alloc::vec::Vec;

use crate::image::LayerId;

/// Subpixel image position.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

impl core::ops::Sub for Point {
    type Output = Point;

    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// A tracked point: one position per consecutive frame starting at `start_frame`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: u64,
    pub start_frame: usize,
    pub points: Vec<Point>,
    /// Layer label, when known. Not part of the text file format.
    pub label: Option<LayerId>,
}

impl Trajectory {
    pub fn new(id: u64, start_frame: usize, points: Vec<Point>) -> Self {
        Self {
            id,
            start_frame,
            points,
            label: None,
        }
    }

    /// Last frame with a position (inclusive).
    pub fn end_frame(&self) -> usize {
        self.start_frame + self.points.len().saturating_sub(1)
    }

    pub fn alive_at(&self, frame: usize) -> bool {
        !self.points.is_empty() && frame >= self.start_frame && frame <= self.end_frame()
    }

    pub fn position(&self, frame: usize) -> Option<Point> {
        frame
            .checked_sub(self.start_frame)
            .and_then(|k| self.points.get(k))
            .copied()
    }

    /// Number of frames the trajectory has been observed up to and including `frame`.
    pub fn history_len(&self, frame: usize) -> usize {
        if frame < self.start_frame {
            0
        } else {
            (frame - self.start_frame + 1).min(self.points.len())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectorySet {
    pub trajectories: Vec<Trajectory>,
}

impl TrajectorySet {
    pub fn new(trajectories: Vec<Trajectory>) -> Self {
        Self { trajectories }
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Trajectory> {
        self.trajectories.iter()
    }

    pub fn alive_at(&self, frame: usize) -> impl Iterator<Item = &Trajectory> + '_ {
        self.trajectories.iter().filter(move |t| t.alive_at(frame))
    }

    /// Copy of the set with every trajectory cut after `frame`.
    ///
    /// Trajectories starting after `frame` are dropped.
    pub fn truncated(&self, frame: usize) -> TrajectorySet {
        let trajectories = self
            .trajectories
            .iter()
            .filter(|t| t.start_frame <= frame && !t.points.is_empty())
            .map(|t| {
                let keep = t.history_len(frame);
                Trajectory {
                    id: t.id,
                    start_frame: t.start_frame,
                    points: t.points[..keep].to_vec(),
                    label: t.label,
                }
            })
            .collect();
        TrajectorySet { trajectories }
    }
}

impl<'a> IntoIterator for &'a TrajectorySet {
    type Item = &'a Trajectory;
    type IntoIter = core::slice::Iter<'a, Trajectory>;

    fn into_iter(self) -> Self::IntoIter {
        self.trajectories.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn frame_queries() {
        let t = Trajectory::new(
            7,
            3,
            vec![Point::new(10.5, 20.0), Point::new(11.5, 20.0)],
        );
        assert_eq!(t.end_frame(), 4);
        assert!(!t.alive_at(2));
        assert!(t.alive_at(3) && t.alive_at(4));
        assert!(!t.alive_at(5));
        assert_eq!(t.position(4), Some(Point::new(11.5, 20.0)));
        assert_eq!(t.history_len(3), 1);
        assert_eq!(t.history_len(9), 2);
    }

    #[test]
    fn truncation_drops_future() {
        let set = TrajectorySet::new(vec![
            Trajectory::new(1, 0, vec![Point::default(); 5]),
            Trajectory::new(2, 4, vec![Point::default(); 2]),
        ]);
        let cut = set.truncated(2);
        assert_eq!(cut.len(), 1);
        assert_eq!(cut.trajectories[0].points.len(), 3);
    }
}
