mod common;

use common::{difference, per_marker_rms, rms, Rig};
use vibrissa::perception::LocationClassSet;
use vibrissa::pipeline::{average_reference, subtract_reference};
use vibrissa::series::Calibration;
use vibrissa::sim::{ArrayKind, NoiseConfig};

fn grid_fidelity(kind: ArrayKind, contacts: usize) {
    let rig = Rig::new(kind);
    let noise = NoiseConfig::default();
    let classes = LocationClassSet::centred(contacts, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for (k, label) in classes.labels().iter().enumerate() {
        let seed = 1000 + k as u64;
        let rendered = rig.series(Some(-label), &noise, seed, false);
        let truth = rig.series(Some(-label), &noise, seed, true);
        assert!(rendered.frame(0).iter().all(|v| *v == 0.0));
        let m = per_marker_rms(&rendered, &truth)
            .into_iter()
            .fold(0.0, f64::max);
        worst = worst.max(m);
    }
    assert!(worst < 0.3, "{kind}: worst per-marker RMS {worst} px");
}

#[test]
fn rendering_recovers_ground_truth_across_dynamic_grid() {
    grid_fidelity(ArrayKind::Dynamic, 40);
}

#[test]
fn rendering_recovers_ground_truth_across_static_grid() {
    grid_fidelity(ArrayKind::Static, 50);
}

#[test]
fn whisk_at_centre_and_plus_five_differ_as_ground_truth_does() {
    let rig = Rig::new(ArrayKind::Dynamic);
    let noise = NoiseConfig::default();
    let rc = rig.series(Some(0.0), &noise, 1, false);
    let r5 = rig.series(Some(5.0), &noise, 2, false);
    let hc = rig.series(Some(0.0), &noise, 1, true);
    let h5 = rig.series(Some(5.0), &noise, 2, true);
    assert!(rc.rms_difference(&r5).unwrap() > 1.0);
    let rendered_diff = difference(&rc, &r5);
    let truth_diff = difference(&hc, &h5);
    let markers = rc.markers();
    for m in 0..markers {
        let sq: f64 = (0..rc.frames())
            .flat_map(|t| (0..2).map(move |a| (t * markers + m) * 2 + a))
            .map(|i| (rendered_diff[i] - truth_diff[i]).powi(2))
            .sum();
        let r = (sq / rc.frames() as f64).sqrt();
        assert!(r < 0.3, "marker {m}: {r} px");
    }
}

#[test]
fn contact_free_reference_leaves_only_noise() {
    let rig = Rig::new(ArrayKind::Dynamic);
    let noise = NoiseConfig::default();
    let raw = rig.series(None, &noise, 7, false);
    let repeats: Vec<_> = (0..5)
        .map(|i| rig.series(None, &noise, 100 + i, false))
        .collect();
    let reference = average_reference(&repeats, Calibration::ContactFree).unwrap();
    let residual = subtract_reference(&raw, &reference).unwrap();
    assert_eq!(residual.meta.calibrated, Calibration::ContactFree);
    let ratio = residual.rms() / raw.rms();
    assert!(ratio < 0.05, "residual / raw = {ratio}");
}

#[test]
fn centre_reference_leaves_the_contact_component() {
    let rig = Rig::new(ArrayKind::Dynamic);
    let noise = NoiseConfig::default();
    let reference = |headless| {
        let repeats: Vec<_> = (0..5)
            .map(|i| rig.series(Some(0.0), &noise, 200 + i, headless))
            .collect();
        average_reference(&repeats, Calibration::CentreContact).unwrap()
    };
    let (rendered_ref, headless_ref) = (reference(false), reference(true));
    for x in [-8.0, -5.0, 5.0, 12.0] {
        let calibrated =
            subtract_reference(&rig.series(Some(x), &noise, 9, false), &rendered_ref).unwrap();
        // Same seeds, so the oracle carries the same marker jitter.
        let oracle =
            subtract_reference(&rig.series(Some(x), &noise, 9, true), &headless_ref).unwrap();
        let ratio = rms(&difference(&calibrated, &oracle)) / oracle.rms();
        assert!(
            ratio < 0.1,
            "rod at {x}: residual error {ratio} of contact RMS"
        );
        assert!(
            oracle.rms() > 5.0 * noise.marker_jitter_px,
            "rod at {x}: contact component {} px does not dominate the jitter",
            oracle.rms()
        );
    }
}

#[test]
fn headless_and_rendered_runs_are_reproducible() {
    let rig = Rig::new(ArrayKind::Static);
    let noise = NoiseConfig::default();
    assert!(!rig.is_whisk());
    let a = rig.series(Some(2.0), &noise, 5, false);
    let b = rig.series(Some(2.0), &noise, 5, false);
    assert_eq!(a, b);
    assert_ne!(a, rig.series(Some(2.0), &noise, 6, false));
}
