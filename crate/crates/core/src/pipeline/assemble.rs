use serde::{Deserialize, Serialize};

use super::{detect_markers, track_markers, DetectionConfig, PipelineError};
use crate::series::{DeflectionSeries, SeriesMeta};
use crate::sim::{Frame, WhiskerArrayModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblyConfig {
    pub detection: DetectionConfig,
    pub image_width: usize,
    pub image_height: usize,
}

impl AssemblyConfig {
    pub fn for_model(model: &WhiskerArrayModel) -> Self {
        Self {
            detection: DetectionConfig::default(),
            image_width: model.config.image_width,
            image_height: model.config.image_height,
        }
    }
}

/// Detects and tracks markers through `frames` and returns their
/// displacements from the frame-0 positions.
///
/// `rest` fixes the marker order: frame 0 is matched against it, and every
/// later frame against the one before.
pub fn assemble_series(
    frames: &[Frame],
    rest: &[[f64; 2]],
    meta: SeriesMeta,
    cfg: &AssemblyConfig,
) -> Result<DeflectionSeries, PipelineError> {
    if frames.is_empty() {
        return Err(PipelineError::Empty);
    }
    let mut positions: Vec<Vec<[f64; 2]>> = Vec::with_capacity(frames.len());
    for (t, frame) in frames.iter().enumerate() {
        if (frame.width, frame.height) != (cfg.image_width, cfg.image_height) {
            return Err(PipelineError::FrameSize {
                expected: (cfg.image_width, cfg.image_height),
                found: (frame.width, frame.height),
            });
        }
        let detected = detect_markers(frame, &cfg.detection);
        let previous = positions.last().map_or(rest, Vec::as_slice);
        let tracked = track_markers(previous, &detected).map_err(|e| PipelineError::AtFrame {
            frame: t,
            source: Box::new(e),
        })?;
        positions.push(tracked.ordered);
    }
    Ok(DeflectionSeries::from_positions(&positions, meta)?)
}
