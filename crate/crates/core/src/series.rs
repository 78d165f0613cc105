//! Ordered marker deflection time series and their on-disk text format.
//!
//! A series file has one header line of comma-separated `key=value` pairs,
//! followed by one row per frame: the frame index, then the x and y
//! displacement of every marker in fixed marker order.
//!
//! ```text
//! kind=dynamic,motion=whisk,location_mm=-3.5,frames=21,markers=10,calibrated=false,frame_rate_hz=30
//! 0,0,0,0,0,...
//! 1,-0.0123,0.0871,...
//! ```
//!
//! Numbers are written in Rust's shortest round-trip decimal form, so a
//! write followed by a read reproduces every value bit for bit.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{ArrayKind, MotionKind};

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("series shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("malformed series header: {0}")]
    Header(String),
    #[error("malformed series row {row}: {reason}")]
    Row { row: usize, reason: String },
}

/// How (and whether) a series has been compensated for self-motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    Raw,
    /// A contact-free whisk reference was subtracted.
    ContactFree,
    /// A reference whisk with the rod at the range centre was subtracted.
    CentreContact,
}

impl Calibration {
    fn as_str(self) -> &'static str {
        match self {
            Calibration::Raw => "false",
            Calibration::ContactFree => "contact_free",
            Calibration::CentreContact => "centre_contact",
        }
    }
}

impl FromStr for Calibration {
    type Err = SeriesError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "false" => Ok(Calibration::Raw),
            "contact_free" => Ok(Calibration::ContactFree),
            "centre_contact" => Ok(Calibration::CentreContact),
            other => Err(SeriesError::Header(format!(
                "unknown calibrated flag {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMeta {
    pub array: ArrayKind,
    pub motion: MotionKind,
    /// Ground-truth location label in mm, if known.
    pub location_mm: f64,
    pub calibrated: Calibration,
    pub frame_rate_hz: f64,
}

/// Per-frame, per-marker (x, y) displacement in pixels relative to frame 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflectionSeries {
    frames: usize,
    markers: usize,
    /// Row-major `[frame][marker][axis]`.
    data: Vec<f64>,
    pub meta: SeriesMeta,
}

impl DeflectionSeries {
    /// Wraps raw displacements. `data.len()` must equal `frames * markers * 2`.
    pub fn from_data(
        frames: usize,
        markers: usize,
        data: Vec<f64>,
        meta: SeriesMeta,
    ) -> Result<Self, SeriesError> {
        if data.len() != frames * markers * 2 {
            return Err(SeriesError::ShapeMismatch {
                expected: (frames, markers),
                found: (data.len() / (2 * markers.max(1)), markers),
            });
        }
        Ok(Self {
            frames,
            markers,
            data,
            meta,
        })
    }

    /// Builds a series from absolute marker positions, referenced to frame 0.
    pub fn from_positions(
        positions: &[Vec<[f64; 2]>],
        meta: SeriesMeta,
    ) -> Result<Self, SeriesError> {
        let frames = positions.len();
        let markers = positions.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(frames * markers * 2);
        for (t, frame) in positions.iter().enumerate() {
            if frame.len() != markers {
                return Err(SeriesError::Row {
                    row: t,
                    reason: format!("expected {markers} markers, found {}", frame.len()),
                });
            }
            for (p, p0) in frame.iter().zip(&positions[0]) {
                data.push(p[0] - p0[0]);
                data.push(p[1] - p0[1]);
            }
        }
        Self::from_data(frames, markers, data, meta)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn markers(&self) -> usize {
        self.markers
    }

    /// Number of sensor dimensions (marker × axis).
    pub fn dims(&self) -> usize {
        self.markers * 2
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.frames, self.markers)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// The displacement row for one frame, `[x0, y0, x1, y1, ...]`.
    pub fn frame(&self, t: usize) -> &[f64] {
        let d = self.dims();
        &self.data[t * d..(t + 1) * d]
    }

    pub fn get(&self, t: usize, marker: usize, axis: usize) -> f64 {
        self.data[(t * self.markers + marker) * 2 + axis]
    }

    pub fn timestamps(&self) -> Vec<f64> {
        (0..self.frames)
            .map(|t| t as f64 / self.meta.frame_rate_hz)
            .collect()
    }

    /// Root-mean-square of all displacements.
    pub fn rms(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        (self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64).sqrt()
    }

    /// RMS of the element-wise difference to another series of equal shape.
    pub fn rms_difference(&self, other: &Self) -> Result<f64, SeriesError> {
        self.check_shape(other)?;
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok((sum / self.data.len().max(1) as f64).sqrt())
    }

    pub fn check_shape(&self, other: &Self) -> Result<(), SeriesError> {
        if self.shape() != other.shape() {
            return Err(SeriesError::ShapeMismatch {
                expected: self.shape(),
                found: other.shape(),
            });
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "kind={},motion={},location_mm={},frames={},markers={},calibrated={},frame_rate_hz={}",
            self.meta.array,
            self.meta.motion,
            self.meta.location_mm,
            self.frames,
            self.markers,
            self.meta.calibrated.as_str(),
            self.meta.frame_rate_hz,
        );
        for t in 0..self.frames {
            let _ = write!(out, "{t}");
            for v in self.frame(t) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, SeriesError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| SeriesError::Header("empty input".into()))?;
        let mut array = None;
        let mut motion = None;
        let mut location = None;
        let mut frames = None;
        let mut markers = None;
        let mut calibrated = None;
        let mut frame_rate = None;
        for pair in header.split(',') {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| SeriesError::Header(format!("expected key=value, got {pair:?}")))?;
            let bad = |what: &str| SeriesError::Header(format!("invalid {what} {value:?}"));
            match key.trim() {
                "kind" => array = Some(value.parse::<ArrayKind>().map_err(|_| bad("kind"))?),
                "motion" => motion = Some(value.parse::<MotionKind>().map_err(|_| bad("motion"))?),
                "location_mm" => {
                    location = Some(value.parse::<f64>().map_err(|_| bad("location_mm"))?)
                }
                "frames" => frames = Some(value.parse::<usize>().map_err(|_| bad("frames"))?),
                "markers" => markers = Some(value.parse::<usize>().map_err(|_| bad("markers"))?),
                "calibrated" => calibrated = Some(value.parse::<Calibration>()?),
                "frame_rate_hz" => {
                    frame_rate = Some(value.parse::<f64>().map_err(|_| bad("frame_rate_hz"))?)
                }
                other => return Err(SeriesError::Header(format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| SeriesError::Header(format!("missing key {k}"));
        let meta = SeriesMeta {
            array: array.ok_or_else(|| missing("kind"))?,
            motion: motion.ok_or_else(|| missing("motion"))?,
            location_mm: location.ok_or_else(|| missing("location_mm"))?,
            calibrated: calibrated.ok_or_else(|| missing("calibrated"))?,
            frame_rate_hz: frame_rate.ok_or_else(|| missing("frame_rate_hz"))?,
        };
        let frames = frames.ok_or_else(|| missing("frames"))?;
        let markers = markers.ok_or_else(|| missing("markers"))?;

        let mut data = Vec::with_capacity(frames * markers * 2);
        let mut rows = 0;
        for (row, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let index: usize = fields
                .next()
                .and_then(|f| f.trim().parse().ok())
                .ok_or_else(|| SeriesError::Row {
                    row,
                    reason: "missing frame index".into(),
                })?;
            if index != row {
                return Err(SeriesError::Row {
                    row,
                    reason: format!("frame index {index} out of order"),
                });
            }
            let before = data.len();
            for field in fields {
                let v: f64 = field.trim().parse().map_err(|_| SeriesError::Row {
                    row,
                    reason: format!("invalid number {field:?}"),
                })?;
                data.push(v);
            }
            if data.len() - before != markers * 2 {
                return Err(SeriesError::Row {
                    row,
                    reason: format!(
                        "expected {} values, found {}",
                        markers * 2,
                        data.len() - before
                    ),
                });
            }
            rows += 1;
        }
        if rows != frames {
            return Err(SeriesError::ShapeMismatch {
                expected: (frames, markers),
                found: (rows, markers),
            });
        }
        Self::from_data(frames, markers, data, meta)
    }
}

impl fmt::Display for DeflectionSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
