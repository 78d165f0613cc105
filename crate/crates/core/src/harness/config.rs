use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::active::{ActivePolicyConfig, EvidenceScale, SweepConfig};
use crate::perception::{HistogramConfig, LocationClassSet};
use crate::series::Calibration;
use crate::sim::{ArrayKind, MotionProgram, NoiseConfig, WhiskerArrayConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    StaticDab,
    DynamicWhisk,
    DynamicWhiskCalibrated,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [
        Experiment::StaticDab,
        Experiment::DynamicWhisk,
        Experiment::DynamicWhiskCalibrated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::StaticDab => "static_dab",
            Experiment::DynamicWhisk => "dynamic_whisk",
            Experiment::DynamicWhiskCalibrated => "dynamic_whisk_calibrated",
        }
    }

    pub fn array(self) -> ArrayKind {
        match self {
            Experiment::StaticDab => ArrayKind::Static,
            _ => ArrayKind::Dynamic,
        }
    }

    pub fn calibrated(self) -> bool {
        self == Experiment::DynamicWhiskCalibrated
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                format!("unknown experiment {s:?} (expected static_dab, dynamic_whisk or dynamic_whisk_calibrated)")
            })
    }
}

/// How one dataset is collected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub experiment: Experiment,
    /// Traverse width, mm; must equal contacts × step.
    pub range_mm: f64,
    pub step_mm: f64,
    /// Contacts per run, one per location class.
    pub contacts: usize,
    pub runs: usize,
    pub rod_diameter: f64,
    /// Kind of reference signal for the calibrated variant.
    pub reference: Calibration,
    /// Whisks averaged into the reference signal.
    pub reference_repeats: usize,
    /// Skip rendering and use ground-truth deflections.
    pub headless: bool,
    pub noise: NoiseConfig,
    pub array: WhiskerArrayConfig,
    pub motion: MotionProgram,
}

impl ProtocolConfig {
    pub fn default_for(experiment: Experiment) -> Self {
        let contacts = match experiment {
            Experiment::StaticDab => 50,
            _ => 40,
        };
        let kind = experiment.array();
        Self {
            experiment,
            range_mm: contacts as f64,
            step_mm: 1.0,
            contacts,
            runs: 10,
            rod_diameter: 3.0,
            reference: Calibration::ContactFree,
            reference_repeats: 5,
            headless: false,
            noise: NoiseConfig::default(),
            array: WhiskerArrayConfig::default_for(kind),
            motion: MotionProgram::default_for(match kind {
                ArrayKind::Static => crate::sim::MotionKind::Dab,
                ArrayKind::Dynamic => crate::sim::MotionKind::Whisk,
            }),
        }
    }

    pub fn classes(&self) -> Result<LocationClassSet, HarnessError> {
        LocationClassSet::centred(self.contacts, self.step_mm)
            .map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: String| Err(HarnessError::Config(m));
        if self.runs < 2 {
            return fail(format!(
                "runs must be at least 2 for cross validation, got {}",
                self.runs
            ));
        }
        if self.contacts < 2 {
            return fail(format!(
                "contacts must be at least 2, got {}",
                self.contacts
            ));
        }
        if !(self.step_mm > 0.0) {
            return fail("step_mm must be positive".into());
        }
        if (self.range_mm - self.contacts as f64 * self.step_mm).abs()
            > 1e-9 * self.range_mm.abs().max(1.0)
        {
            return fail(format!(
                "range_mm {} must equal contacts {} × step_mm {}",
                self.range_mm, self.contacts, self.step_mm
            ));
        }
        if !(self.rod_diameter > 0.0) {
            return fail("rod_diameter must be positive".into());
        }
        if self.experiment.calibrated() {
            if self.reference_repeats == 0 {
                return fail("reference_repeats must be at least 1".into());
            }
            if self.reference == Calibration::Raw {
                return fail("reference must be contact_free or centre_contact".into());
            }
        }
        if self.array.kind != self.experiment.array() {
            return fail(format!(
                "array kind {} does not suit {}",
                self.array.kind, self.experiment
            ));
        }
        let expected_motion = match self.experiment.array() {
            ArrayKind::Static => crate::sim::MotionKind::Dab,
            ArrayKind::Dynamic => crate::sim::MotionKind::Whisk,
        };
        if self.motion.kind != expected_motion {
            return fail(format!(
                "motion {} does not suit {}",
                self.motion.kind, self.experiment
            ));
        }
        self.array
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.motion
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if !(self.noise.pixel_sigma >= 0.0 && self.noise.marker_jitter_px >= 0.0) {
            return fail("noise levels must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionConfig {
    pub histogram: HistogramConfig,
    /// Monte Carlo cross-validation samples.
    pub samples: usize,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            histogram: HistogramConfig::default(),
            samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActiveRunConfig {
    /// Threshold of the reported trajectories.
    pub theta: f64,
    /// Use a fixed-time rule for the reported trajectories instead.
    pub fixed_time: Option<usize>,
    /// Trajectories written out.
    pub trajectories: usize,
    /// Trials per condition behind the error table.
    pub sweep_trials: usize,
    pub max_contacts: usize,
    pub evidence: EvidenceScale,
    pub sweep: SweepConfig,
}

impl Default for ActiveRunConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            fixed_time: None,
            trajectories: 100,
            sweep_trials: 1000,
            max_contacts: ActivePolicyConfig::DEFAULT_MAX_CONTACTS,
            evidence: ActivePolicyConfig::DEFAULT_EVIDENCE,
            sweep: SweepConfig::default(),
        }
    }
}

/// Everything one experiment needs, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub protocol: ProtocolConfig,
    pub perception: PerceptionConfig,
    pub active: ActiveRunConfig,
}

impl RunConfig {
    pub fn default_for(experiment: Experiment) -> Self {
        Self {
            seed: 1,
            protocol: ProtocolConfig::default_for(experiment),
            perception: PerceptionConfig::default(),
            active: ActiveRunConfig::default(),
        }
    }

    pub fn experiment(&self) -> Experiment {
        self.protocol.experiment
    }

    /// Reads a config file. Keys absent from the file take the defaults of
    /// its experiment (`protocol.experiment`, or `fallback`); unknown keys
    /// are errors.
    pub fn from_toml(text: &str, fallback: Experiment) -> Result<Self, HarnessError> {
        let user: toml::Table =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let experiment = match user.get("protocol").and_then(|p| p.get("experiment")) {
            Some(v) => v
                .as_str()
                .ok_or_else(|| HarnessError::Config("protocol.experiment must be a string".into()))?
                .parse()
                .map_err(HarnessError::Config)?,
            None => fallback,
        };
        let mut merged = toml::Table::try_from(Self::default_for(experiment))
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        merge(&mut merged, user);
        let cfg: Self = merged
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, fallback: Experiment) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, fallback)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.seed > i64::MAX as u64 {
            return Err(HarnessError::Config(format!(
                "seed {} exceeds {}",
                self.seed,
                i64::MAX
            )));
        }
        self.protocol.validate()?;
        self.perception
            .histogram
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.perception.samples == 0 {
            return Err(HarnessError::Config(
                "perception.samples must be positive".into(),
            ));
        }
        let classes = self.protocol.classes()?;
        self.policy(&classes)
            .validate(&classes)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.active
            .sweep
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if self
            .active
            .sweep
            .times
            .iter()
            .any(|t| *t > self.active.max_contacts)
        {
            return Err(HarnessError::Config(
                "sweep times exceed max_contacts".into(),
            ));
        }
        if self.active.sweep_trials == 0 || self.active.trajectories == 0 {
            return Err(HarnessError::Config(
                "active trial counts must be positive".into(),
            ));
        }
        if self.active.trajectories > self.active.sweep_trials {
            return Err(HarnessError::Config(
                "active.trajectories cannot exceed active.sweep_trials".into(),
            ));
        }
        Ok(())
    }

    /// Policy behind the reported trajectories.
    pub fn policy(&self, classes: &LocationClassSet) -> ActivePolicyConfig {
        let rule = match self.active.fixed_time {
            Some(t) => crate::active::DecisionRule::FixedTime(t),
            None => crate::active::DecisionRule::Threshold(self.active.theta),
        };
        let mut p = ActivePolicyConfig::centred(classes, rule);
        p.max_contacts = self.active.max_contacts;
        p.evidence = self.active.evidence;
        p
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
