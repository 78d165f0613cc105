use serde::Serialize;

use super::ActiveError;

/// Posterior over location hypotheses after `t` contacts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorState {
    pub probs: Vec<f64>,
    pub t: usize,
}

impl PosteriorState {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Most probable hypothesis (lowest index on ties) and its probability.
    pub fn argmax(&self) -> (usize, f64) {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate().skip(1) {
            if *p > self.probs[best] {
                best = i;
            }
        }
        (best, self.probs[best])
    }
}

pub fn init_posterior(n: usize) -> Result<PosteriorState, ActiveError> {
    if n < 2 {
        return Err(ActiveError::InvalidConfig(format!(
            "posterior needs at least 2 hypotheses, got {n}"
        )));
    }
    Ok(PosteriorState {
        probs: vec![1.0 / n as f64; n],
        t: 0,
    })
}

/// One step of recursive Bayes, computed in the log domain with the maximum
/// subtracted before exponentiating.
pub fn bayes_update(
    posterior: &PosteriorState,
    log_likelihoods: &[f64],
) -> Result<PosteriorState, ActiveError> {
    if log_likelihoods.len() != posterior.len() {
        return Err(ActiveError::LengthMismatch {
            expected: posterior.len(),
            found: log_likelihoods.len(),
        });
    }
    if log_likelihoods
        .iter()
        .any(|l| l.is_nan() || *l == f64::INFINITY)
    {
        return Err(ActiveError::DegenerateEvidence);
    }
    let logs: Vec<f64> = posterior
        .probs
        .iter()
        .zip(log_likelihoods)
        .map(|(p, l)| p.ln() + l)
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(ActiveError::DegenerateEvidence);
    }
    let mut probs: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(PosteriorState {
        probs,
        t: posterior.t + 1,
    })
}
