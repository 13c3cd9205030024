//! Online multilayer background subtraction for moving cameras.
//!
//! The crate is `no_std` and only needs an allocator. File formats, the
//! command-line tool and everything else touching the operating system live
//! in the `mlbs` crate.

#![no_std]

extern crate alloc;

pub mod error;
pub mod eval;
pub mod image;
pub mod label_propagation;
pub mod layer_filter;
pub mod motion_field;
pub mod pipeline;
pub mod segmentation;
pub mod trajectory;
pub mod trajectory_graph;

pub use error::{Error, Result};
pub use image::{Color, Dims, Frame, LabelMap, LayerId, ProbabilityMap, ScalarMap, BACKGROUND};
pub use trajectory::{Point, Trajectory, TrajectorySet};
