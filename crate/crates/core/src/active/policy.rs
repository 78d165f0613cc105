use serde::{Deserialize, Serialize};

use super::{ActiveError, PosteriorState};
use crate::perception::LocationClassSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    /// Decide once the maximum posterior exceeds θ.
    Threshold(f64),
    /// Decide after exactly this many contacts.
    FixedTime(usize),
}

impl DecisionRule {
    /// Whether the rule fires on `posterior`, ignoring the contact cap.
    pub fn fires(&self, posterior: &PosteriorState) -> bool {
        match *self {
            DecisionRule::Threshold(theta) => posterior.argmax().1 > theta,
            DecisionRule::FixedTime(t) => posterior.t >= t,
        }
    }
}

/// How strongly one contact's likelihood counts in the recursion.
///
/// The histogram model treats every frame and marker axis as independent,
/// so a raw contact log-likelihood counts the same evidence hundreds of
/// times over. `Effective(k)` rescales it to the weight of `k` independent
/// observations, i.e. multiplies it by `k / (frames × dims)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceScale {
    Full,
    Effective(f64),
}

impl EvidenceScale {
    pub fn weight(&self, cells: usize) -> f64 {
        match *self {
            EvidenceScale::Full => 1.0,
            EvidenceScale::Effective(k) => k / cells as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivePolicyConfig {
    /// Goal location, mm.
    pub x_fix: f64,
    pub rule: DecisionRule,
    pub max_contacts: usize,
    /// `false` disables actions (passive perception).
    pub moves: bool,
    pub evidence: EvidenceScale,
}

impl ActivePolicyConfig {
    pub const DEFAULT_MAX_CONTACTS: usize = 40;
    pub const DEFAULT_EVIDENCE: EvidenceScale = EvidenceScale::Effective(16.0);

    /// Active policy fixating the centre class H_{N/2}.
    pub fn centred(classes: &LocationClassSet, rule: DecisionRule) -> Self {
        Self {
            x_fix: classes.label(classes.centre_index()),
            rule,
            max_contacts: Self::DEFAULT_MAX_CONTACTS,
            moves: true,
            evidence: Self::DEFAULT_EVIDENCE,
        }
    }

    pub fn passive(mut self) -> Self {
        self.moves = false;
        self
    }

    pub fn validate(&self, classes: &LocationClassSet) -> Result<(), ActiveError> {
        let fail = |m: String| Err(ActiveError::InvalidConfig(m));
        let n = classes.len();
        if n < 2 {
            return fail(format!(
                "active perception needs at least 2 classes, got {n}"
            ));
        }
        let (lo, hi) = (classes.first(), classes.last());
        if !(self.x_fix >= lo && self.x_fix <= hi) {
            return fail(format!(
                "x_fix {} outside class range [{lo}, {hi}]",
                self.x_fix
            ));
        }
        match self.rule {
            DecisionRule::Threshold(theta) => {
                if !(theta > 1.0 / n as f64 && theta < 1.0) {
                    return fail(format!("threshold {theta} must lie in (1/{n}, 1)"));
                }
            }
            DecisionRule::FixedTime(t) => {
                if t < 1 {
                    return fail("fixed decision time must be at least 1".into());
                }
            }
        }
        if self.max_contacts < 1 {
            return fail("max_contacts must be at least 1".into());
        }
        if let EvidenceScale::Effective(k) = self.evidence {
            if !(k > 0.0 && k.is_finite()) {
                return fail(format!("effective observations {k} must be positive"));
            }
        }
        Ok(())
    }
}

/// Translation toward the fixation point given the perceived location.
pub fn select_action(perceived_mm: f64, policy: &ActivePolicyConfig) -> f64 {
    if policy.moves {
        policy.x_fix - perceived_mm
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decision {
    pub class: usize,
    /// Reached only because of the contact cap.
    pub forced: bool,
}

pub fn check_decision(posterior: &PosteriorState, policy: &ActivePolicyConfig) -> Option<Decision> {
    let class = posterior.argmax().0;
    if policy.rule.fires(posterior) {
        Some(Decision {
            class,
            forced: false,
        })
    } else if posterior.t >= policy.max_contacts {
        Some(Decision {
            class,
            forced: true,
        })
    } else {
        None
    }
}
