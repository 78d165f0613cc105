//! Active localization: recursive Bayes over contacts, a fixation policy
//! and threshold or fixed-time decisions.
//!
//! Hypotheses are start locations. After the sensor has moved by D, a
//! contact's class log-likelihood for label k is credited to the hypothesis
//! whose start label is k − D, so evidence from every contact refers to the
//! same fixed hypotheses.

mod policy;
mod posterior;
mod sweep;
mod trial;

use thiserror::Error;

pub use policy::{
    check_decision, select_action, ActivePolicyConfig, Decision, DecisionRule, EvidenceScale,
};
pub use posterior::{bayes_update, init_posterior, PosteriorState};
pub use sweep::{
    evaluate_errors, record_replay_trials, record_trials, replay_assignment, trial_seed, Condition,
    ErrorTable, ReplayAssignment, SweepConfig, SweepRow,
};
pub use trial::{
    draw_start, record_trial, run_active_trial, start_indices, ContactRecord, Outcome,
    ReplayEnvironment, SensorEnvironment, SimulatedEnvironment, TrialTrajectory,
};

use crate::perception::PerceptionError;
use crate::pipeline::PipelineError;
use crate::series::SeriesError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum ActiveError {
    #[error("invalid active configuration: {0}")]
    InvalidConfig(String),
    #[error("every hypothesis has zero likelihood")]
    DegenerateEvidence,
    #[error("expected {expected} log-likelihoods, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("no trials for sweep point {0}")]
    EmptySweepPoint(String),
    #[error("contact {contact}: {source}")]
    AtContact {
        contact: usize,
        source: Box<ActiveError>,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}
