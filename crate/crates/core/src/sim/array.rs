use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayKind {
    /// Immotile whiskers on a hexagonal pin layout.
    Static,
    /// Two bilaterally symmetric rows driven by a tendon.
    Dynamic,
}

impl fmt::Display for ArrayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArrayKind::Static => "static",
            ArrayKind::Dynamic => "dynamic",
        })
    }
}

impl FromStr for ArrayKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" => Ok(ArrayKind::Static),
            "dynamic" => Ok(ArrayKind::Dynamic),
            other => Err(format!("unknown array kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhiskerArrayConfig {
    pub kind: ArrayKind,
    pub whisker_count: usize,
    /// Whisker base (x, y) in mm; z follows from the tip dome.
    pub base_positions: Vec<[f64; 2]>,
    pub whisker_length: f64,
    pub base_diameter: f64,
    pub tip_diameter: f64,
    pub pin_pitch: f64,
    /// Length of the internal pin carrying the marker, mm.
    pub pin_length: f64,
    /// Radius of the hemispherical tip the whiskers are mounted on, mm.
    pub tip_radius: f64,
    /// Extra outward tilt of each whisker away from the midline, degrees.
    pub splay_deg: f64,
    pub image_width: usize,
    pub image_height: usize,
    pub pixels_per_mm: f64,
    pub marker_radius: f64,
}

const WHISKER_LENGTH: f64 = 40.0;
const BASE_DIAMETER: f64 = 0.98;
const TIP_DIAMETER: f64 = 0.6;
const PIN_PITCH: f64 = 4.5;
const PIN_LENGTH: f64 = 3.5;
const TIP_RADIUS: f64 = 20.0;
const DYNAMIC_ROW_OFFSET: f64 = 4.0;
const DYNAMIC_SPLAY_DEG: f64 = 23.0;

impl WhiskerArrayConfig {
    /// 21 whiskers on a hexagonal projection at 4.5 mm pitch.
    pub fn static_default() -> Self {
        let base_positions = hex_layout(PIN_PITCH, 21);
        Self {
            kind: ArrayKind::Static,
            whisker_count: base_positions.len(),
            base_positions,
            whisker_length: WHISKER_LENGTH,
            base_diameter: BASE_DIAMETER,
            tip_diameter: TIP_DIAMETER,
            pin_pitch: PIN_PITCH,
            pin_length: PIN_LENGTH,
            tip_radius: TIP_RADIUS,
            splay_deg: 0.0,
            image_width: 640,
            image_height: 480,
            pixels_per_mm: 10.0,
            marker_radius: 4.0,
        }
    }

    /// Two mirror-symmetric rows of five whiskers either side of the midline.
    pub fn dynamic_default() -> Self {
        let base_positions: Vec<[f64; 2]> = [-DYNAMIC_ROW_OFFSET, DYNAMIC_ROW_OFFSET]
            .iter()
            .flat_map(|&x| (-2..=2).map(move |k| [x, k as f64 * PIN_PITCH]))
            .collect();
        Self {
            kind: ArrayKind::Dynamic,
            whisker_count: base_positions.len(),
            base_positions,
            splay_deg: DYNAMIC_SPLAY_DEG,
            ..Self::static_default()
        }
    }

    pub fn default_for(kind: ArrayKind) -> Self {
        match kind {
            ArrayKind::Static => Self::static_default(),
            ArrayKind::Dynamic => Self::dynamic_default(),
        }
    }

    /// Checks the invariants in order and reports the first violation.
    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.whisker_count == 0 {
            return fail("whisker_count must be positive".into());
        }
        if self.base_positions.len() != self.whisker_count {
            return fail(format!(
                "whisker_count {} does not match {} base positions",
                self.whisker_count,
                self.base_positions.len()
            ));
        }
        if !(self.whisker_length > 0.0) {
            return fail("whisker_length must be positive".into());
        }
        if !(self.tip_diameter > 0.0) {
            return fail("tip_diameter must be positive".into());
        }
        if !(self.base_diameter >= self.tip_diameter) {
            return fail("base_diameter must be at least tip_diameter".into());
        }
        if !(self.pin_length > 0.0 && self.tip_radius > 0.0 && self.pixels_per_mm > 0.0) {
            return fail("pin_length, tip_radius and pixels_per_mm must be positive".into());
        }
        if !(self.marker_radius > 0.0) {
            return fail("marker_radius must be positive".into());
        }
        if self.image_width == 0 || self.image_height == 0 {
            return fail("image dimensions must be positive".into());
        }
        for (i, a) in self.base_positions.iter().enumerate() {
            if a[0].hypot(a[1]) >= self.tip_radius {
                return fail(format!("base position {i} lies outside the tip dome"));
            }
            for (j, b) in self.base_positions.iter().enumerate().skip(i + 1) {
                if a == b {
                    return fail(format!("base positions {i} and {j} coincide"));
                }
            }
        }
        for (i, p) in self.base_positions.iter().enumerate() {
            let [u, v] = self.marker_rest_px(*p);
            let r = self.marker_radius + 1.0;
            if u - r < 0.0
                || v - r < 0.0
                || u + r > (self.image_width - 1) as f64
                || v + r > (self.image_height - 1) as f64
            {
                return fail(format!(
                    "marker {i} rest position ({u:.1}, {v:.1}) px is outside the image"
                ));
            }
        }
        Ok(())
    }

    /// Image position of a marker at rest; the optical axis hits the image centre.
    pub fn marker_rest_px(&self, base: [f64; 2]) -> [f64; 2] {
        [
            self.image_width as f64 / 2.0 + base[0] * self.pixels_per_mm,
            self.image_height as f64 / 2.0 + base[1] * self.pixels_per_mm,
        ]
    }
}

/// The `count` sites of a hexagonal lattice closest to the centroid of one
/// lattice triangle, oriented so the layout is mirror symmetric about x = 0.
///
/// Shells around a triangle centroid hold 3, 3, 6, 6, 3, ... sites, so a
/// count of 21 closes the fifth shell exactly.
pub fn hex_layout(pitch: f64, count: usize) -> Vec<[f64; 2]> {
    let reach = (count as f64).sqrt() as i64 + 3;
    let mut sites: Vec<(i64, i64, i64)> = Vec::new();
    for a in -reach..=reach {
        for b in -reach..=reach {
            // 12 |p|^2 / pitch^2 for the centroid-shifted site; exact in integers.
            let u = 2 * a + b - 1;
            let v = 3 * b - 1;
            sites.push((3 * u * u + v * v, b, a));
        }
    }
    sites.sort_unstable();
    sites
        .into_iter()
        .take(count)
        .map(|(_, b, a)| {
            let x = pitch * (2 * a + b - 1) as f64 / 2.0;
            let y = pitch * 3f64.sqrt() * (3 * b - 1) as f64 / 6.0;
            [x, y]
        })
        .collect()
}

/// One whisker's rest geometry, in mm and pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Whisker {
    pub base: [f64; 3],
    pub direction: [f64; 3],
    /// Base position projected onto the x–z contact plane.
    pub base_xz: [f64; 2],
    /// Rest angle of the projected shaft in the x–z plane, radians from +x.
    pub rest_angle: f64,
    /// Shaft length projected onto the x–z plane.
    pub projected_length: f64,
    /// -1 for the left of the midline, +1 for the right, 0 on it.
    pub side: f64,
    pub marker_rest_px: [f64; 2],
    /// Index of the whisker mirrored about the midline, if any.
    pub mirror: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhiskerArrayModel {
    pub config: WhiskerArrayConfig,
    pub whiskers: Vec<Whisker>,
    /// Marker pixels per radian of tangent deflection (pin length × scale).
    pub marker_gain: f64,
    /// Mean shaft radius, added to the rod radius for contact.
    pub shaft_radius: f64,
}

impl WhiskerArrayModel {
    pub fn len(&self) -> usize {
        self.whiskers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.whiskers.is_empty()
    }

    pub fn rest_markers(&self) -> Vec<[f64; 2]> {
        self.whiskers.iter().map(|w| w.marker_rest_px).collect()
    }

    /// Lowest z reached by any whisker tip at rest.
    pub fn lowest_tip_z(&self) -> f64 {
        self.whiskers
            .iter()
            .map(|w| w.base_xz[1] + w.projected_length * w.rest_angle.sin())
            .fold(f64::INFINITY, f64::min)
    }

    /// z of the bottom of the tip dome.
    pub fn apex_z(&self) -> f64 {
        -self.config.tip_radius
    }

    /// Smallest distance between two rest markers, in pixels.
    pub fn min_marker_spacing(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.whiskers.iter().enumerate() {
            for b in &self.whiskers[i + 1..] {
                let d = (a.marker_rest_px[0] - b.marker_rest_px[0])
                    .hypot(a.marker_rest_px[1] - b.marker_rest_px[1]);
                best = best.min(d);
            }
        }
        best
    }
}

/// Assembles whisker geometry from a validated config.
pub fn build_array(config: &WhiskerArrayConfig) -> Result<WhiskerArrayModel, SimError> {
    config.validate()?;
    let r = config.tip_radius;
    let splay = config.splay_deg.to_radians();
    let whiskers: Vec<Whisker> = config
        .base_positions
        .iter()
        .map(|&[x, y]| {
            let z = -(r * r - x * x - y * y).sqrt();
            let side = if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            };
            // Dome normal, then tilted away from the midline about the y axis.
            let (nx, ny, nz) = (x / r, y / r, z / r);
            let a = side * splay;
            let (c, s) = (a.cos(), a.sin());
            let direction = [nx * c - nz * s, ny, nx * s + nz * c];
            let planar = direction[0].hypot(direction[2]);
            Whisker {
                base: [x, y, z],
                direction,
                base_xz: [x, z],
                rest_angle: direction[2].atan2(direction[0]),
                projected_length: config.whisker_length * planar,
                side,
                marker_rest_px: config.marker_rest_px([x, y]),
                mirror: None,
            }
        })
        .collect();

    let mut whiskers = whiskers;
    for i in 0..whiskers.len() {
        let [x, y, _] = whiskers[i].base;
        whiskers[i].mirror = whiskers
            .iter()
            .position(|w| (w.base[0] + x).abs() < 1e-9 && (w.base[1] - y).abs() < 1e-9);
    }

    Ok(WhiskerArrayModel {
        marker_gain: config.pin_length * config.pixels_per_mm,
        shaft_radius: (config.base_diameter + config.tip_diameter) / 4.0,
        config: config.clone(),
        whiskers,
    })
}
