use alloc::vec::Vec;

use crate::image::Dims;

/// Errors produced by the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: Dims, found: Dims },

    #[error("matrix size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("partition has an empty side")]
    EmptyPartition,

    #[error("node {0} has a zero affinity row sum")]
    IsolatedNode(usize),

    #[error("labeled and unlabeled index sets do not partition 0..{0}")]
    InvalidNodeSets(usize),

    #[error("unlabeled nodes {0:?} have no path to a labeled node")]
    DisconnectedUnlabeled(Vec<usize>),

    #[error("no motion evidence for the layer")]
    NoEvidence,

    #[error("solver stopped after {iterations} iterations with residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("variances are only computed for grids of at most {max} nodes")]
    VarianceGridTooLarge { max: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    #[error("initialization needs {needed} frames, got {found}")]
    TooFewFrames { needed: usize, found: usize },

    #[error(
        "initialization needs at least {needed} trajectories alive at frame {frame}, found {found}; \
         supply denser tracks or lower min_cluster_size"
    )]
    TooFewTrajectories {
        needed: usize,
        found: usize,
        frame: usize,
    },

    #[error("frame {got} is out of order, expected frame {expected}")]
    FrameOutOfOrder { expected: usize, got: usize },

    #[error("no free layer id below 256")]
    LayerIdsExhausted,
}

pub type Result<T> = core::result::Result<T, Error>;
