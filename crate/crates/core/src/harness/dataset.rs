use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{write_file, Experiment, HarnessError, ProtocolConfig, RunConfig};
use crate::perception::{LabeledRuns, LocationClassSet};
use crate::pipeline::{
    assemble_series, average_reference, subtract_reference, AssemblyConfig, ReferenceSignal,
};
use crate::seed;
use crate::series::{Calibration, DeflectionSeries, SeriesMeta};
use crate::sim::{
    build_array, headless_series, simulate_contact_event, RodStimulus, WhiskerArrayModel,
};

/// Recorded traverse direction, written into every manifest.
pub const ORIENTATION: &str =
    "traverse along sensor x, perpendicular to the midline between the dynamic rows; rod parallel to y";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub run: usize,
    pub class: usize,
    pub location_mm: f64,
    pub seed: u64,
    /// Relative to the dataset directory.
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub experiment: Experiment,
    pub orientation: String,
    pub root_seed: u64,
    pub runs: usize,
    pub frames: usize,
    pub markers: usize,
    pub labels: Vec<f64>,
    pub headless: bool,
    pub series: Vec<ManifestEntry>,
    /// Reference signal and calibrated copies, for the calibrated variant.
    pub reference: Option<String>,
    pub reference_kind: Option<Calibration>,
    pub calibrated: Vec<ManifestEntry>,
}

/// A loaded dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub classes: LocationClassSet,
    pub raw: LabeledRuns,
    pub reference: Option<ReferenceSignal>,
    pub calibrated: Option<LabeledRuns>,
}

impl Dataset {
    /// Runs the experiment perceives: calibrated series for the calibrated
    /// variant, raw otherwise.
    pub fn perceived(&self) -> &LabeledRuns {
        self.calibrated.as_ref().unwrap_or(&self.raw)
    }
}

pub fn dataset_dir(out: &Path, experiment: Experiment) -> PathBuf {
    out.join("dataset").join(experiment.name())
}

fn series_path(prefix: &str, run: usize, class: usize) -> String {
    format!("{prefix}/run_{run:02}/loc_{class:03}.csv")
}

/// Seed of the series at (`run`, `class`).
pub fn collect_seed(root: u64, run: usize, class: usize) -> u64 {
    seed::derive(root, &[seed::domain::COLLECT, run as u64, class as u64])
}

/// One contact at a class location.
pub(crate) fn contact_series(
    protocol: &ProtocolConfig,
    model: &WhiskerArrayModel,
    rod_x: Option<f64>,
    location_mm: f64,
    seed: u64,
) -> Result<DeflectionSeries, HarnessError> {
    let rod = match rod_x {
        Some(x) => Some(RodStimulus::new(x, protocol.rod_diameter)?),
        None => None,
    };
    let event = simulate_contact_event(
        model,
        &protocol.motion,
        rod.as_ref(),
        &protocol.noise,
        seed,
        protocol.headless,
    )?;
    let meta = SeriesMeta {
        array: model.config.kind,
        motion: protocol.motion.kind,
        location_mm,
        calibrated: Calibration::Raw,
        frame_rate_hz: protocol.motion.frame_rate,
    };
    Ok(match &event.frames {
        None => headless_series(model, &event, &protocol.noise, meta),
        Some(frames) => assemble_series(
            frames,
            &model.rest_markers(),
            meta,
            &AssemblyConfig::for_model(model),
        )?,
    })
}

/// Averaged reference signal at the centre of the range.
pub(crate) fn reference_signal(
    protocol: &ProtocolConfig,
    model: &WhiskerArrayModel,
    classes: &LocationClassSet,
    root: u64,
) -> Result<ReferenceSignal, HarnessError> {
    let centre = classes.label(classes.centre_index());
    let rod_x = match protocol.reference {
        Calibration::CentreContact => Some(-centre),
        _ => None,
    };
    let repeats: Vec<DeflectionSeries> = (0..protocol.reference_repeats)
        .into_par_iter()
        .map(|i| {
            let s = seed::derive(root, &[seed::domain::REFERENCE, i as u64]);
            contact_series(protocol, model, rod_x, centre, s)
        })
        .collect::<Result<_, _>>()?;
    Ok(average_reference(&repeats, protocol.reference)?)
}

/// Simulates every run and location of a protocol and writes the dataset.
pub fn collect(config: &RunConfig, out: &Path) -> Result<Dataset, HarnessError> {
    config.validate()?;
    let protocol = &config.protocol;
    let classes = protocol.classes()?;
    let model = build_array(&protocol.array)?;
    let root = config.seed;
    let jobs: Vec<(usize, usize)> = (0..protocol.runs)
        .flat_map(|r| (0..classes.len()).map(move |k| (r, k)))
        .collect();
    let series: Vec<DeflectionSeries> = jobs
        .par_iter()
        .map(|&(r, k)| {
            let label = classes.label(k);
            contact_series(
                protocol,
                &model,
                Some(-label),
                label,
                collect_seed(root, r, k),
            )
        })
        .collect::<Result<_, _>>()?;
    let mut runs: Vec<Vec<DeflectionSeries>> =
        vec![Vec::with_capacity(classes.len()); protocol.runs];
    for ((r, _), s) in jobs.iter().zip(series) {
        runs[*r].push(s);
    }
    let raw = LabeledRuns::new(classes.clone(), runs)?;
    let (reference, calibrated) = if protocol.experiment.calibrated() {
        let reference = reference_signal(protocol, &model, &classes, root)?;
        let cal = raw
            .runs
            .iter()
            .map(|run| {
                run.iter()
                    .map(|s| subtract_reference(s, &reference))
                    .collect()
            })
            .collect::<Result<Vec<Vec<_>>, _>>()?;
        (
            Some(reference),
            Some(LabeledRuns::new(classes.clone(), cal)?),
        )
    } else {
        (None, None)
    };

    let (frames, markers) = raw.runs[0][0].shape();
    let entries = |prefix: &str| -> Vec<ManifestEntry> {
        jobs.iter()
            .map(|&(r, k)| ManifestEntry {
                run: r,
                class: k,
                location_mm: classes.label(k),
                seed: collect_seed(root, r, k),
                path: series_path(prefix, r, k),
            })
            .collect()
    };
    let manifest = Manifest {
        experiment: protocol.experiment,
        orientation: ORIENTATION.to_string(),
        root_seed: root,
        runs: protocol.runs,
        frames,
        markers,
        labels: classes.labels().to_vec(),
        headless: protocol.headless,
        series: entries("series"),
        reference: reference.as_ref().map(|_| "reference.csv".to_string()),
        reference_kind: reference.as_ref().map(|r| r.kind),
        calibrated: if calibrated.is_some() {
            entries("calibrated")
        } else {
            Vec::new()
        },
    };

    let dir = dataset_dir(out, protocol.experiment);
    let write_runs = |entries: &[ManifestEntry], data: &LabeledRuns| -> Result<(), HarnessError> {
        entries.par_iter().try_for_each(|e| {
            write_file(
                &dir.join(&e.path),
                data.runs[e.run][e.class].to_text().as_bytes(),
            )
        })
    };
    write_runs(&manifest.series, &raw)?;
    if let (Some(r), Some(c)) = (&reference, &calibrated) {
        write_file(&dir.join("reference.csv"), r.series.to_text().as_bytes())?;
        write_runs(&manifest.calibrated, c)?;
    }
    write_file(&dir.join("config.toml"), config.to_toml().as_bytes())?;
    let text = toml::to_string(&manifest).expect("manifest serialises");
    write_file(&dir.join("manifest.toml"), text.as_bytes())?;

    Ok(Dataset {
        manifest,
        classes,
        raw,
        reference,
        calibrated,
    })
}

fn read_series(dir: &Path, rel: &str) -> Result<DeflectionSeries, HarnessError> {
    let path = dir.join(rel);
    let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
    DeflectionSeries::parse(&text)
        .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
}

fn load_runs(
    dir: &Path,
    manifest: &Manifest,
    entries: &[ManifestEntry],
    classes: &LocationClassSet,
) -> Result<LabeledRuns, HarnessError> {
    let n = classes.len();
    if entries.len() != manifest.runs * n {
        return Err(HarnessError::Data(format!(
            "manifest lists {} series, expected {} runs × {n} locations",
            entries.len(),
            manifest.runs
        )));
    }
    let loaded: Vec<DeflectionSeries> = entries
        .par_iter()
        .map(|e| {
            let s = read_series(dir, &e.path)?;
            if s.shape() != (manifest.frames, manifest.markers) {
                return Err(HarnessError::Data(format!(
                    "{}: shape {:?} differs from manifest ({}, {})",
                    e.path,
                    s.shape(),
                    manifest.frames,
                    manifest.markers
                )));
            }
            if e.class >= n
                || e.run >= manifest.runs
                || s.meta.location_mm != classes.label(e.class)
            {
                return Err(HarnessError::Data(format!(
                    "{}: location does not match its class",
                    e.path
                )));
            }
            Ok(s)
        })
        .collect::<Result<_, _>>()?;
    let mut runs: Vec<Vec<Option<DeflectionSeries>>> = vec![vec![None; n]; manifest.runs];
    for (e, s) in entries.iter().zip(loaded) {
        if runs[e.run][e.class].replace(s).is_some() {
            return Err(HarnessError::Data(format!("{} listed twice", e.path)));
        }
    }
    let runs = runs
        .into_iter()
        .map(|r| {
            r.into_iter()
                .map(|s| s.expect("every slot filled"))
                .collect()
        })
        .collect();
    Ok(LabeledRuns::new(classes.clone(), runs)?)
}

/// Loads a dataset, checking that every listed file exists, parses and
/// has the declared shape.
pub fn load_dataset(out: &Path, experiment: Experiment) -> Result<Dataset, HarnessError> {
    let dir = dataset_dir(out, experiment);
    let path = dir.join("manifest.toml");
    let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
    let manifest: Manifest = toml::from_str(&text)
        .map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
    if manifest.experiment != experiment {
        return Err(HarnessError::Data(format!(
            "manifest is for {}, not {experiment}",
            manifest.experiment
        )));
    }
    let classes = LocationClassSet::from_labels(manifest.labels.clone())?;
    let raw = load_runs(&dir, &manifest, &manifest.series, &classes)?;
    let (reference, calibrated) = match (&manifest.reference, manifest.reference_kind) {
        (Some(rel), Some(kind)) => {
            let series = read_series(&dir, rel)?;
            let calibrated = load_runs(&dir, &manifest, &manifest.calibrated, &classes)?;
            (Some(ReferenceSignal { series, kind }), Some(calibrated))
        }
        (None, None) if !experiment.calibrated() => (None, None),
        _ => {
            return Err(HarnessError::Data(
                "calibrated dataset needs a reference and its kind".into(),
            ))
        }
    };
    Ok(Dataset {
        manifest,
        classes,
        raw,
        reference,
        calibrated,
    })
}
