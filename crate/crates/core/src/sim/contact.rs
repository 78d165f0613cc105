use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{SimError, WhiskerArrayModel};

/// Rotation sense of a contact deflection in the x–z plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactSide {
    /// The rod pushes the shaft counter-clockwise (tip toward +x when pointing down).
    Ccw,
    Cw,
}

impl ContactSide {
    pub fn sign(self) -> f64 {
        match self {
            ContactSide::Ccw => 1.0,
            ContactSide::Cw => -1.0,
        }
    }

    pub fn mirrored(self) -> Self {
        match self {
            ContactSide::Ccw => ContactSide::Cw,
            ContactSide::Cw => ContactSide::Ccw,
        }
    }
}

/// A cylindrical rod lying horizontally across the traverse axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RodStimulus {
    /// Rod centre along the traverse axis in the sensor frame, mm.
    pub x_position: f64,
    pub diameter: f64,
    pub axis: [f64; 3],
}

impl RodStimulus {
    pub fn new(x_position: f64, diameter: f64) -> Result<Self, SimError> {
        Self::with_axis(x_position, diameter, [0.0, 1.0, 0.0])
    }

    /// The contact model is planar, so the axis must lie along ±y.
    pub fn with_axis(x_position: f64, diameter: f64, axis: [f64; 3]) -> Result<Self, SimError> {
        if !(diameter > 0.0) {
            return Err(SimError::InvalidRod(format!(
                "diameter must be positive, got {diameter}"
            )));
        }
        if !x_position.is_finite() {
            return Err(SimError::InvalidRod("x_position must be finite".into()));
        }
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(SimError::InvalidRod("axis must be a unit vector".into()));
        }
        if axis[0].abs() > 1e-9 || axis[2].abs() > 1e-9 {
            return Err(SimError::InvalidRod(
                "axis must run across the traverse (along ±y)".into(),
            ));
        }
        Ok(Self {
            x_position,
            diameter,
            axis,
        })
    }

    pub fn radius(&self) -> f64 {
        self.diameter / 2.0
    }

    /// The same rod reflected about the array midline.
    pub fn mirrored(&self) -> Self {
        Self {
            x_position: -self.x_position,
            ..self.clone()
        }
    }
}

/// Self-motion pose of the array at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    /// Self-motion rotation of each whisker about its base, radians, CCW positive.
    pub whisker_angles: Vec<f64>,
    /// Height of the rod centre in the sensor frame, mm.
    pub rod_z: f64,
    /// Contact side already established for whiskers touching the rod; `None`
    /// lets the rod push the shaft away from its centre.
    pub contact_sides: Vec<Option<ContactSide>>,
}

impl Pose {
    pub fn rest(whiskers: usize, rod_z: f64) -> Self {
        Self {
            whisker_angles: vec![0.0; whiskers],
            rod_z,
            contact_sides: vec![None; whiskers],
        }
    }
}

/// Per-whisker base-angle deflection and the resulting marker displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflectionState {
    pub self_angle: Vec<f64>,
    pub contact_angle: Vec<f64>,
    pub contact_side: Vec<Option<ContactSide>>,
    /// Marker displacement in pixels (x, y).
    pub marker_px: Vec<[f64; 2]>,
}

impl DeflectionState {
    pub fn zero(whiskers: usize) -> Self {
        Self {
            self_angle: vec![0.0; whiskers],
            contact_angle: vec![0.0; whiskers],
            contact_side: vec![None; whiskers],
            marker_px: vec![[0.0, 0.0]; whiskers],
        }
    }

    pub fn len(&self) -> usize {
        self.marker_px.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marker_px.is_empty()
    }

    pub fn total_angle(&self, i: usize) -> f64 {
        self.self_angle[i] + self.contact_angle[i]
    }

    pub fn contacted(&self) -> usize {
        self.contact_angle.iter().filter(|a| **a != 0.0).count()
    }

    /// Recomputes marker displacements from the angles.
    fn update_markers(&mut self, gain: f64) {
        for i in 0..self.len() {
            self.marker_px[i] = marker_displacement(gain, self.total_angle(i));
        }
    }
}

/// Lever model: the pin inside the tip swings opposite to the shaft.
pub(crate) fn marker_displacement(gain: f64, angle: f64) -> [f64; 2] {
    [-gain * angle.tan(), 0.0]
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Rotation needed to clear a disc of radius `reach` centred at `offset`
/// (relative to the base) from a shaft of length `length` pointing at
/// `angle`. Returns `None` when the shaft does not touch the disc.
///
/// The shaft meets the disc exactly when its angular offset from the disc
/// centre is below a critical angle: the tangent angle `asin(reach / rho)`
/// when the tangent point lies on the shaft, otherwise the angle at which the
/// tip grazes the disc.
pub(crate) fn graze(
    angle: f64,
    length: f64,
    offset: [f64; 2],
    reach: f64,
    side: Option<ContactSide>,
) -> Option<(f64, ContactSide)> {
    let rho = offset[0].hypot(offset[1]);
    if rho <= reach || rho >= length + reach {
        return None;
    }
    let delta = wrap_angle(angle - offset[1].atan2(offset[0]));
    let critical = if (rho * rho - reach * reach).sqrt() <= length {
        (reach / rho).asin()
    } else {
        ((rho * rho + length * length - reach * reach) / (2.0 * rho * length))
            .clamp(-1.0, 1.0)
            .acos()
    };
    if delta.abs() >= critical {
        return None;
    }
    let side = match side {
        Some(s) => s,
        None if delta > 0.0 => ContactSide::Ccw,
        None if delta < 0.0 => ContactSide::Cw,
        None => return None,
    };
    Some((side.sign() * critical - delta, side))
}

/// Quasi-static deflection of every whisker against a rigid rod.
///
/// Each shaft is rigid and rotates about its base; a shaft that would
/// intersect the rod is rotated by the smallest angle (in its contact sense)
/// that leaves it grazing the rod surface.
pub fn contact_deflection(
    model: &WhiskerArrayModel,
    pose: &Pose,
    rod: &RodStimulus,
) -> DeflectionState {
    let n = model.len();
    let mut state = DeflectionState::zero(n);
    let reach = rod.radius() + model.shaft_radius;
    for (i, w) in model.whiskers.iter().enumerate() {
        let self_angle = pose.whisker_angles.get(i).copied().unwrap_or(0.0);
        state.self_angle[i] = self_angle;
        let offset = [rod.x_position - w.base_xz[0], pose.rod_z - w.base_xz[1]];
        let lock = pose.contact_sides.get(i).copied().flatten();
        if let Some((angle, side)) = graze(
            w.rest_angle + self_angle,
            w.projected_length,
            offset,
            reach,
            lock,
        ) {
            state.contact_angle[i] = angle;
            state.contact_side[i] = Some(side);
        }
    }
    state.update_markers(model.marker_gain);
    state
}

/// Marker displacements for pure self-motion (no rod).
pub(crate) fn self_motion_state(model: &WhiskerArrayModel, pose: &Pose) -> DeflectionState {
    let mut state = DeflectionState::zero(model.len());
    for i in 0..model.len() {
        state.self_angle[i] = pose.whisker_angles.get(i).copied().unwrap_or(0.0);
    }
    state.update_markers(model.marker_gain);
    state
}
