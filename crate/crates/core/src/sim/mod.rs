//! Whisker array simulator.
//!
//! Geometry lives in a sensor frame with its origin at the centre of the
//! hemispherical tip, x along the traverse axis, y across it and z pointing
//! up (the tip faces down). Whisker bases sit on the lower hemisphere. The
//! rod stimulus is a horizontal cylinder parallel to y, so contact is a
//! planar problem in the x–z plane: each whisker is a segment rotating about
//! its base and the rod is a disc.

mod array;
mod contact;
mod event;
mod motion;
mod render;

use thiserror::Error;

pub use array::{
    build_array, hex_layout, ArrayKind, Whisker, WhiskerArrayConfig, WhiskerArrayModel,
};
pub use contact::{contact_deflection, ContactSide, DeflectionState, Pose, RodStimulus};
pub use event::{headless_series, pose_at, simulate_contact_event, ContactEvent};
pub use motion::{
    dab_profile, whisk_phase, MotionKind, MotionProgram, PROTRACTION_FRACTION,
    RELAXATION_TIME_CONSTANT,
};
pub use render::{render_frame, Frame, NoiseConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid array config: {0}")]
    InvalidConfig(String),
    #[error("invalid motion program: {0}")]
    InvalidMotion(String),
    #[error("invalid rod stimulus: {0}")]
    InvalidRod(String),
    #[error("operation needs a {expected} motion, got {found}")]
    WrongMotionKind {
        expected: MotionKind,
        found: MotionKind,
    },
    #[error("frame index {index} outside contact window of {frames} frames")]
    FrameOutOfRange { index: usize, frames: usize },
    #[error("marker {marker} at ({x:.2}, {y:.2}) px leaves the image")]
    MarkerOutOfBounds { marker: usize, x: f64, y: f64 },
}
