use super::contact::{self_motion_state, ContactSide};
use super::motion::{dab_waveform, whisk_waveform};
use super::render::marker_positions;
use super::{
    contact_deflection, render_frame, DeflectionState, Frame, MotionKind, MotionProgram,
    NoiseConfig, Pose, RodStimulus, SimError, WhiskerArrayModel,
};
use crate::seed;
use crate::series::{DeflectionSeries, SeriesMeta};

/// Sub-steps per frame used to find the side a whisker first meets the rod.
const CONTACT_SUBSTEPS: usize = 16;

/// Everything one simulated contact produced.
#[derive(Debug, Clone)]
pub struct ContactEvent {
    /// Ground-truth deflections, one per frame.
    pub states: Vec<DeflectionState>,
    /// Rendered frames; `None` in headless mode.
    pub frames: Option<Vec<Frame>>,
    /// Noise seed of each frame.
    pub frame_seeds: Vec<u64>,
}

fn pose_at_phase(
    model: &WhiskerArrayModel,
    motion: &MotionProgram,
    rod: Option<&RodStimulus>,
    phase: f64,
) -> Pose {
    let n = model.len();
    match motion.kind {
        MotionKind::Whisk => {
            let protraction = motion.whisk_amplitude.to_radians() * whisk_waveform(phase);
            let mut pose = Pose::rest(n, model.apex_z() - motion.whisk_rod_depth);
            for (angle, w) in pose.whisker_angles.iter_mut().zip(&model.whiskers) {
                // Both rows swing their tips toward the midline.
                *angle = -w.side * protraction;
            }
            pose
        }
        MotionKind::Dab => {
            let reach = rod.map_or(0.0, RodStimulus::radius) + model.shaft_radius;
            let start = model.lowest_tip_z() - reach - motion.dab_standoff;
            Pose::rest(n, start + motion.dab_depth * dab_waveform(phase))
        }
    }
}

/// Self-motion pose at a frame of the contact window.
pub fn pose_at(
    model: &WhiskerArrayModel,
    motion: &MotionProgram,
    rod: Option<&RodStimulus>,
    frame: usize,
) -> Result<Pose, SimError> {
    motion.validate()?;
    if frame >= motion.frames_per_contact {
        return Err(SimError::FrameOutOfRange {
            index: frame,
            frames: motion.frames_per_contact,
        });
    }
    let phase = frame as f64 / (motion.frames_per_contact - 1) as f64;
    Ok(pose_at_phase(model, motion, rod, phase))
}

/// Ground-truth deflections over one contact window.
///
/// Each whisker's contact side is fixed at the instant it first touches the
/// rod (found on a sub-frame grid) and released once it leaves, so a shaft
/// cannot snap through the rod between frames.
fn simulate_states(
    model: &WhiskerArrayModel,
    motion: &MotionProgram,
    rod: Option<&RodStimulus>,
) -> Vec<DeflectionState> {
    let frames = motion.frames_per_contact;
    let last = (frames - 1) as f64;
    let Some(rod) = rod else {
        return (0..frames)
            .map(|f| self_motion_state(model, &pose_at_phase(model, motion, None, f as f64 / last)))
            .collect();
    };
    let mut locks: Vec<Option<ContactSide>> = vec![None; model.len()];
    let mut states = Vec::with_capacity(frames);
    for f in 0..frames {
        let substeps = if f == 0 { 1 } else { CONTACT_SUBSTEPS };
        let mut state = None;
        for s in 1..=substeps {
            let phase = if f == 0 {
                0.0
            } else {
                (f as f64 - 1.0 + s as f64 / substeps as f64) / last
            };
            let mut pose = pose_at_phase(model, motion, Some(rod), phase);
            pose.contact_sides = locks.clone();
            let current = contact_deflection(model, &pose, rod);
            for (lock, side) in locks.iter_mut().zip(&current.contact_side) {
                *lock = *side;
            }
            state = Some(current);
        }
        states.push(state.expect("at least one sub-step"));
    }
    states
}

/// Simulates one dab or whisk cycle against an optional rod.
///
/// In headless mode rendering is skipped and only ground-truth deflections
/// are returned; [`headless_series`] turns them into a series carrying the
/// same marker jitter the renderer would have drawn.
pub fn simulate_contact_event(
    model: &WhiskerArrayModel,
    motion: &MotionProgram,
    rod: Option<&RodStimulus>,
    noise: &NoiseConfig,
    seed: u64,
    headless: bool,
) -> Result<ContactEvent, SimError> {
    motion.validate()?;
    let states = simulate_states(model, motion, rod);
    let frame_seeds: Vec<u64> = (0..states.len())
        .map(|f| seed::derive(seed, &[seed::domain::FRAME, f as u64]))
        .collect();
    let frames = if headless {
        None
    } else {
        Some(
            states
                .iter()
                .zip(&frame_seeds)
                .map(|(s, fs)| render_frame(s, model, noise, *fs))
                .collect::<Result<Vec<_>, _>>()?,
        )
    };
    Ok(ContactEvent {
        states,
        frames,
        frame_seeds,
    })
}

/// Deflection series straight from ground truth, with the marker jitter of
/// `noise` applied per frame and frame 0 as reference.
pub fn headless_series(
    model: &WhiskerArrayModel,
    event: &ContactEvent,
    noise: &NoiseConfig,
    meta: SeriesMeta,
) -> DeflectionSeries {
    let positions: Vec<Vec<[f64; 2]>> = event
        .states
        .iter()
        .zip(&event.frame_seeds)
        .map(|(s, fs)| marker_positions(s, model, noise.marker_jitter_px, *fs))
        .collect();
    DeflectionSeries::from_positions(&positions, meta).expect("constant marker count")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Calibration;
    use crate::sim::{build_array, ArrayKind, WhiskerArrayConfig};
    use proptest::prelude::*;

    fn meta(kind: ArrayKind, motion: MotionKind) -> SeriesMeta {
        SeriesMeta {
            array: kind,
            motion,
            location_mm: 0.0,
            calibrated: Calibration::Raw,
            frame_rate_hz: 30.0,
        }
    }

    #[test]
    fn whisk_without_rod_is_pure_self_motion() {
        let model = build_array(&WhiskerArrayConfig::dynamic_default()).unwrap();
        let motion = MotionProgram::whisk();
        let ev =
            simulate_contact_event(&model, &motion, None, &NoiseConfig::none(), 3, true).unwrap();
        assert!(ev.frames.is_none());
        for (f, s) in ev.states.iter().enumerate() {
            assert!(s.contact_angle.iter().all(|a| *a == 0.0));
            let pose = pose_at(&model, &motion, None, f).unwrap();
            assert_eq!(s.self_angle, pose.whisker_angles);
        }
        let peak = &ev.states[36];
        assert!(peak.marker_px.iter().all(|m| m[0].abs() > 10.0));
    }

    #[test]
    fn no_rod_no_motion_gives_zero_state() {
        let model = build_array(&WhiskerArrayConfig::static_default()).unwrap();
        let ev = simulate_contact_event(
            &model,
            &MotionProgram::dab(),
            None,
            &NoiseConfig::none(),
            0,
            true,
        )
        .unwrap();
        for s in &ev.states {
            assert!(s.marker_px.iter().all(|m| *m == [0.0, 0.0]));
        }
    }

    #[test]
    fn first_and_last_frames_are_contact_free() {
        for (cfg, motion) in [
            (WhiskerArrayConfig::static_default(), MotionProgram::dab()),
            (
                WhiskerArrayConfig::dynamic_default(),
                MotionProgram::whisk(),
            ),
        ] {
            let model = build_array(&cfg).unwrap();
            for x in [-20.0, -7.5, 0.5, 3.0, 12.5, 19.5] {
                let rod = RodStimulus::new(x, 3.0).unwrap();
                let ev = simulate_contact_event(
                    &model,
                    &motion,
                    Some(&rod),
                    &NoiseConfig::none(),
                    0,
                    true,
                )
                .unwrap();
                assert_eq!(ev.states[0].contacted(), 0, "x={x}");
                assert_eq!(ev.states.last().unwrap().contacted(), 0, "x={x}");
            }
        }
    }

    #[test]
    fn dab_far_outside_field_is_silent() {
        let model = build_array(&WhiskerArrayConfig::static_default()).unwrap();
        let rod = RodStimulus::new(80.0, 3.0).unwrap();
        let ev = simulate_contact_event(
            &model,
            &MotionProgram::dab(),
            Some(&rod),
            &NoiseConfig::default(),
            5,
            true,
        )
        .unwrap();
        assert!(ev
            .states
            .iter()
            .all(|s| s.marker_px.iter().all(|m| *m == [0.0, 0.0])));
        let series = headless_series(
            &model,
            &ev,
            &NoiseConfig::none(),
            meta(ArrayKind::Static, MotionKind::Dab),
        );
        assert!(series.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn headless_event_is_deterministic() {
        let model = build_array(&WhiskerArrayConfig::dynamic_default()).unwrap();
        let rod = RodStimulus::new(4.0, 3.0).unwrap();
        let noise = NoiseConfig::default();
        let m = meta(ArrayKind::Dynamic, MotionKind::Whisk);
        let a =
            simulate_contact_event(&model, &MotionProgram::whisk(), Some(&rod), &noise, 9, true)
                .unwrap();
        let b =
            simulate_contact_event(&model, &MotionProgram::whisk(), Some(&rod), &noise, 9, true)
                .unwrap();
        assert_eq!(
            headless_series(&model, &a, &noise, m.clone()),
            headless_series(&model, &b, &noise, m)
        );
    }

    #[test]
    fn whisk_engagement_grows_toward_the_midline() {
        let model = build_array(&WhiskerArrayConfig::dynamic_default()).unwrap();
        let motion = MotionProgram::whisk();
        let engaged = |x: f64| {
            let rod = RodStimulus::new(x, 3.0).unwrap();
            let ev =
                simulate_contact_event(&model, &motion, Some(&rod), &NoiseConfig::none(), 0, true)
                    .unwrap();
            ev.states
                .iter()
                .map(DeflectionState::contacted)
                .max()
                .unwrap()
        };
        for sign in [-1.0, 1.0] {
            let counts: Vec<usize> = (0..=60)
                .rev()
                .map(|k| engaged(sign * k as f64 * 0.5))
                .collect();
            assert_eq!(counts[0], 0, "rod at 30 mm is outside the field");
            assert!(counts.windows(2).all(|w| w[1] >= w[0]), "{counts:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn reflecting_the_rod_reflects_the_state(x in -24.0f64..24.0, dynamic in any::<bool>()) {
            let (cfg, motion) = if dynamic {
                (WhiskerArrayConfig::dynamic_default(), MotionProgram::whisk())
            } else {
                (WhiskerArrayConfig::static_default(), MotionProgram::dab())
            };
            let model = build_array(&cfg).unwrap();
            let rod = RodStimulus::new(x, 3.0).unwrap();
            let none = NoiseConfig::none();
            let a = simulate_contact_event(&model, &motion, Some(&rod), &none, 1, true).unwrap();
            let b = simulate_contact_event(&model, &motion, Some(&rod.mirrored()), &none, 1, true).unwrap();
            for (sa, sb) in a.states.iter().zip(&b.states) {
                for (i, w) in model.whiskers.iter().enumerate() {
                    let m = w.mirror.unwrap();
                    prop_assert!((sa.contact_angle[i] + sb.contact_angle[m]).abs() < 1e-9);
                    prop_assert!((sa.marker_px[i][0] + sb.marker_px[m][0]).abs() < 1e-9);
                    prop_assert_eq!(sa.contact_side[i], sb.contact_side[m].map(ContactSide::mirrored));
                }
            }
        }
    }
}
