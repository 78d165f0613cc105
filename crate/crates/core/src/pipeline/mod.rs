//! Frames in, ordered deflection series out.
//!
//! Bright marker discs are segmented by thresholding at half the frame
//! maximum, labelled as 8-connected components and reduced to
//! intensity-weighted centroids. Identities are carried from frame to frame
//! by greedy mutual nearest neighbour matching, starting from the array's
//! rest markers so every series shares one marker order. A frame that loses
//! or merges a marker aborts the whole series.

mod assemble;
mod calibrate;
mod detect;
mod track;

use thiserror::Error;

pub use assemble::{assemble_series, AssemblyConfig};
pub use calibrate::{average_reference, subtract_reference, ReferenceSignal};
pub use detect::{detect_markers, DetectionConfig, MarkerSet};
pub use track::{track_markers, Tracked};

use crate::series::SeriesError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("expected {expected} markers, detected {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("detection {detection} is equally close to more than one marker")]
    AmbiguousAssignment { detection: usize },
    #[error("frame {frame}: {source}")]
    AtFrame {
        frame: usize,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("frame is {found:?} pixels, expected {expected:?}")]
    FrameSize {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("empty frame sequence")]
    Empty,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

impl PipelineError {
    /// Frame index attached to a tracking failure, if any.
    pub fn frame(&self) -> Option<usize> {
        match self {
            PipelineError::AtFrame { frame, .. } => Some(*frame),
            _ => None,
        }
    }
}
