use serde::{Deserialize, Serialize};

use crate::sim::Frame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    /// Threshold as a fraction of the frame maximum.
    pub threshold_fraction: f64,
    /// A frame whose maximum is below this is treated as empty.
    pub min_peak: f64,
    /// Blobs with less summed intensity are discarded.
    pub min_mass: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            threshold_fraction: 0.5,
            min_peak: 0.25,
            min_mass: 3.0,
        }
    }
}

/// Unordered blob centroids with their summed intensity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarkerSet {
    pub centroids: Vec<[f64; 2]>,
    pub masses: Vec<f64>,
}

impl MarkerSet {
    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }
}

pub fn detect_markers(frame: &Frame, cfg: &DetectionConfig) -> MarkerSet {
    let (w, h) = (frame.width, frame.height);
    let peak = frame
        .pixels
        .iter()
        .copied()
        .fold(f32::NEG_INFINITY, f32::max) as f64;
    if !(peak >= cfg.min_peak) {
        return MarkerSet::default();
    }
    let threshold = (cfg.threshold_fraction * peak) as f32;
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut out = MarkerSet::default();
    for start in 0..w * h {
        if seen[start] || frame.pixels[start] <= threshold {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut sx, mut sy, mut m) = (0.0, 0.0, 0.0);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            let v = frame.pixels[i] as f64;
            sx += v * x as f64;
            sy += v * y as f64;
            m += v;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] && frame.pixels[j] > threshold {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if m >= cfg.min_mass {
            out.centroids.push([sx / m, sy / m]);
            out.masses.push(m);
        }
    }
    out
}
