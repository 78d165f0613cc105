use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SimError;

/// Fraction of the whisk cycle spent protracting.
pub const PROTRACTION_FRACTION: f64 = 0.6;
/// Time constant of the passive retraction, as a fraction of the cycle.
pub const RELAXATION_TIME_CONSTANT: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    Dab,
    Whisk,
}

impl fmt::Display for MotionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MotionKind::Dab => "dab",
            MotionKind::Whisk => "whisk",
        })
    }
}

impl FromStr for MotionKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dab" => Ok(MotionKind::Dab),
            "whisk" => Ok(MotionKind::Whisk),
            other => Err(format!("unknown motion kind {other:?}")),
        }
    }
}

/// One discrete contact: a vertical dab or a single whisk cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionProgram {
    pub kind: MotionKind,
    /// Vertical excursion of a dab, mm.
    pub dab_depth: f64,
    /// Gap between the rod surface and the lowest whisker tip before a dab, mm.
    pub dab_standoff: f64,
    /// Maximum protraction angle, degrees.
    pub whisk_amplitude: f64,
    pub whisk_frequency: f64,
    /// Depth of the rod centre below the tip apex while whisking, mm.
    pub whisk_rod_depth: f64,
    pub frames_per_contact: usize,
    pub frame_rate: f64,
}

impl MotionProgram {
    pub fn dab() -> Self {
        Self {
            kind: MotionKind::Dab,
            dab_depth: 15.0,
            dab_standoff: 2.0,
            whisk_amplitude: 60.0,
            whisk_frequency: 0.5,
            whisk_rod_depth: 27.0,
            frames_per_contact: 61,
            frame_rate: 30.0,
        }
    }

    pub fn whisk() -> Self {
        Self {
            kind: MotionKind::Whisk,
            ..Self::dab()
        }
    }

    pub fn default_for(kind: MotionKind) -> Self {
        match kind {
            MotionKind::Dab => Self::dab(),
            MotionKind::Whisk => Self::whisk(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: &str| Err(SimError::InvalidMotion(msg.to_string()));
        if self.frames_per_contact < 2 {
            return fail("frames_per_contact must be at least 2");
        }
        if !(self.frame_rate > 0.0) {
            return fail("frame_rate must be positive");
        }
        match self.kind {
            MotionKind::Dab => {
                if !(self.dab_depth > 0.0) {
                    return fail("dab_depth must be positive");
                }
                if !(self.dab_standoff >= 0.0) {
                    return fail("dab_standoff must be non-negative");
                }
            }
            MotionKind::Whisk => {
                if !(self.whisk_amplitude > 0.0 && self.whisk_amplitude < 90.0) {
                    return fail("whisk_amplitude must lie in (0, 90) degrees");
                }
                if !(self.whisk_frequency > 0.0) {
                    return fail("whisk_frequency must be positive");
                }
                let window = (self.frames_per_contact - 1) as f64 / self.frame_rate;
                let period = 1.0 / self.whisk_frequency;
                if (window - period).abs() > 1e-9 * period.max(1.0) {
                    return fail("one whisk cycle must span exactly frames_per_contact frames");
                }
            }
        }
        Ok(())
    }

    /// Cycle phase of a frame in [0, 1].
    fn phase(&self, frame: usize) -> Result<f64, SimError> {
        if frame >= self.frames_per_contact {
            return Err(SimError::FrameOutOfRange {
                index: frame,
                frames: self.frames_per_contact,
            });
        }
        Ok(frame as f64 / (self.frames_per_contact - 1) as f64)
    }
}

/// Protraction fraction of a whisk at a (possibly fractional) cycle phase.
///
/// Raised-cosine protraction up to [`PROTRACTION_FRACTION`], then an
/// exponential relaxation normalised to land on zero at the cycle end.
pub(crate) fn whisk_waveform(phase: f64) -> f64 {
    if phase <= 0.0 || phase >= 1.0 {
        return 0.0;
    }
    if phase <= PROTRACTION_FRACTION {
        return 0.5 * (1.0 - (PI * (phase / PROTRACTION_FRACTION)).cos());
    }
    let floor = (-(1.0 - PROTRACTION_FRACTION) / RELAXATION_TIME_CONSTANT).exp();
    let decay = (-(phase - PROTRACTION_FRACTION) / RELAXATION_TIME_CONSTANT).exp();
    (decay - floor) / (1.0 - floor)
}

/// Down–up excursion of a dab as a fraction of its depth.
pub(crate) fn dab_waveform(phase: f64) -> f64 {
    if phase <= 0.0 || phase >= 1.0 {
        return 0.0;
    }
    0.5 * (1.0 - (2.0 * PI * phase).cos())
}

pub fn whisk_phase(frame: usize, motion: &MotionProgram) -> Result<f64, SimError> {
    if motion.kind != MotionKind::Whisk {
        return Err(SimError::WrongMotionKind {
            expected: MotionKind::Whisk,
            found: motion.kind,
        });
    }
    Ok(whisk_waveform(motion.phase(frame)?))
}

pub fn dab_profile(frame: usize, motion: &MotionProgram) -> Result<f64, SimError> {
    if motion.kind != MotionKind::Dab {
        return Err(SimError::WrongMotionKind {
            expected: MotionKind::Dab,
            found: motion.kind,
        });
    }
    Ok(dab_waveform(motion.phase(frame)?))
}
