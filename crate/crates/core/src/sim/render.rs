use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DeflectionState, SimError, WhiskerArrayModel};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Additive Gaussian pixel noise, in units of the peak marker intensity.
    pub pixel_sigma: f64,
    /// Gaussian jitter of each marker centre, pixels.
    pub marker_jitter_px: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            pixel_sigma: 0.01,
            marker_jitter_px: 0.1,
        }
    }
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self {
            pixel_sigma: 0.0,
            marker_jitter_px: 0.0,
        }
    }
}

/// A grayscale camera frame with intensities nominally in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    /// Row-major intensities; pixel (x, y) is centred on integer coordinates.
    pub pixels: Vec<f32>,
}

impl Frame {
    pub fn dark(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0.0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    /// Draws an anti-aliased bright disc; overlapping discs take the maximum.
    pub fn draw_disc(&mut self, centre: [f64; 2], radius: f64) {
        let x0 = (centre[0] - radius - 1.0).floor().max(0.0) as usize;
        let y0 = (centre[1] - radius - 1.0).floor().max(0.0) as usize;
        let x1 = ((centre[0] + radius + 1.0).ceil() as usize).min(self.width - 1);
        let y1 = ((centre[1] + radius + 1.0).ceil() as usize).min(self.height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = (x as f64 - centre[0]).hypot(y as f64 - centre[1]);
                let coverage = (radius + 0.5 - d).clamp(0.0, 1.0) as f32;
                let p = &mut self.pixels[y * self.width + x];
                *p = p.max(coverage);
            }
        }
    }

    /// Intensity-weighted centroid of pixels within `radius` of `around`.
    pub fn local_centroid(&self, around: [f64; 2], radius: f64) -> [f64; 2] {
        let (mut sx, mut sy, mut m) = (0.0, 0.0, 0.0);
        for y in 0..self.height {
            for x in 0..self.width {
                if (x as f64 - around[0]).hypot(y as f64 - around[1]) <= radius {
                    let v = self.get(x, y) as f64;
                    sx += v * x as f64;
                    sy += v * y as f64;
                    m += v;
                }
            }
        }
        [sx / m, sy / m]
    }
}

/// Marker centres for a state, optionally jittered from `seed`.
pub(crate) fn marker_positions(
    state: &DeflectionState,
    model: &WhiskerArrayModel,
    jitter_px: f64,
    seed: u64,
) -> Vec<[f64; 2]> {
    let mut rng = seed::rng(seed::derive(seed, &[seed::domain::JITTER]));
    let jitter = Normal::new(0.0, jitter_px.max(0.0)).expect("finite sigma");
    model
        .whiskers
        .iter()
        .zip(&state.marker_px)
        .map(|(w, d)| {
            let mut p = [w.marker_rest_px[0] + d[0], w.marker_rest_px[1] + d[1]];
            if jitter_px > 0.0 {
                p[0] += jitter.sample(&mut rng);
                p[1] += jitter.sample(&mut rng);
            }
            p
        })
        .collect()
}

/// Renders the marker camera's view of a deflection state.
pub fn render_frame(
    state: &DeflectionState,
    model: &WhiskerArrayModel,
    noise: &NoiseConfig,
    noise_seed: u64,
) -> Result<Frame, SimError> {
    let cfg = &model.config;
    let radius = cfg.marker_radius;
    let centres = marker_positions(state, model, noise.marker_jitter_px, noise_seed);
    for (i, c) in centres.iter().enumerate() {
        let r = radius + 1.0;
        if !(c[0] - r >= 0.0
            && c[1] - r >= 0.0
            && c[0] + r <= (cfg.image_width - 1) as f64
            && c[1] + r <= (cfg.image_height - 1) as f64)
        {
            return Err(SimError::MarkerOutOfBounds {
                marker: i,
                x: c[0],
                y: c[1],
            });
        }
    }
    let mut frame = Frame::dark(cfg.image_width, cfg.image_height);
    for c in &centres {
        frame.draw_disc(*c, radius);
    }
    if noise.pixel_sigma > 0.0 {
        let mut rng = seed::rng(seed::derive(noise_seed, &[seed::domain::PIXEL]));
        let normal = Normal::new(0.0, noise.pixel_sigma).expect("finite sigma");
        for p in &mut frame.pixels {
            *p += normal.sample(&mut rng) as f32;
        }
    }
    Ok(frame)
}
