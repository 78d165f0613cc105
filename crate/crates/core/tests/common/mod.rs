#![allow(dead_code)]

use vibrissa::pipeline::{assemble_series, AssemblyConfig};
use vibrissa::series::Calibration;
use vibrissa::sim::{
    build_array, headless_series, simulate_contact_event, ArrayKind, MotionKind, MotionProgram,
    NoiseConfig, RodStimulus, WhiskerArrayConfig, WhiskerArrayModel,
};
use vibrissa::{DeflectionSeries, SeriesMeta};

pub struct Rig {
    pub model: WhiskerArrayModel,
    pub motion: MotionProgram,
}

impl Rig {
    pub fn new(kind: ArrayKind) -> Self {
        let motion = match kind {
            ArrayKind::Static => MotionProgram::dab(),
            ArrayKind::Dynamic => MotionProgram::whisk(),
        };
        Self {
            model: build_array(&WhiskerArrayConfig::default_for(kind)).unwrap(),
            motion,
        }
    }

    fn meta(&self, location_mm: f64) -> SeriesMeta {
        SeriesMeta {
            array: self.model.config.kind,
            motion: self.motion.kind,
            location_mm,
            calibrated: Calibration::Raw,
            frame_rate_hz: self.motion.frame_rate,
        }
    }

    /// Rendered and assembled, or headless, series with the rod at `rod_x`.
    pub fn series(
        &self,
        rod_x: Option<f64>,
        noise: &NoiseConfig,
        seed: u64,
        headless: bool,
    ) -> DeflectionSeries {
        let rod = rod_x.map(|x| RodStimulus::new(x, 3.0).unwrap());
        let event = simulate_contact_event(
            &self.model,
            &self.motion,
            rod.as_ref(),
            noise,
            seed,
            headless,
        )
        .unwrap();
        let meta = self.meta(rod_x.map_or(0.0, |x| -x));
        match &event.frames {
            None => headless_series(&self.model, &event, noise, meta),
            Some(frames) => assemble_series(
                frames,
                &self.model.rest_markers(),
                meta,
                &AssemblyConfig::for_model(&self.model),
            )
            .unwrap(),
        }
    }

    pub fn is_whisk(&self) -> bool {
        self.motion.kind == MotionKind::Whisk
    }
}

/// RMS over frames of each marker's 2-D displacement difference.
pub fn per_marker_rms(a: &DeflectionSeries, b: &DeflectionSeries) -> Vec<f64> {
    assert_eq!(a.shape(), b.shape());
    (0..a.markers())
        .map(|m| {
            let sum: f64 = (0..a.frames())
                .map(|t| {
                    (0..2)
                        .map(|k| (a.get(t, m, k) - b.get(t, m, k)).powi(2))
                        .sum::<f64>()
                })
                .sum();
            (sum / a.frames() as f64).sqrt()
        })
        .collect()
}

pub fn difference(a: &DeflectionSeries, b: &DeflectionSeries) -> Vec<f64> {
    a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect()
}

pub fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}
