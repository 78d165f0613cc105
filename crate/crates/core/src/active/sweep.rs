use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    record_trial, ActiveError, ActivePolicyConfig, DecisionRule, ReplayEnvironment,
    SensorEnvironment, TrialTrajectory,
};
use crate::perception::{
    train_histogram_model, HistogramConfig, LabeledRuns, LikelihoodModel, LocationClassSet,
    PerceptionError,
};
use crate::seed;

/// Decision rules to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Posterior thresholds; 0 decides after the first contact.
    pub thetas: Vec<f64>,
    /// Fixed decision times.
    pub times: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            thetas: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95],
            times: (1..=10).collect(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), ActiveError> {
        if let Some(t) = self.thetas.iter().find(|t| !(**t >= 0.0 && **t < 1.0)) {
            return Err(ActiveError::InvalidConfig(format!(
                "sweep threshold {t} outside [0, 1)"
            )));
        }
        if self.times.contains(&0) {
            return Err(ActiveError::InvalidConfig("sweep decision time 0".into()));
        }
        Ok(())
    }

    fn rules(&self) -> impl Iterator<Item = DecisionRule> + '_ {
        self.thetas
            .iter()
            .map(|t| DecisionRule::Threshold(*t))
            .chain(self.times.iter().map(|t| DecisionRule::FixedTime(*t)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Active,
    Passive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub condition: Condition,
    pub rule: DecisionRule,
    pub trials: usize,
    pub mean_error_mm: f64,
    pub mean_decision_time: f64,
    pub forced: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorTable {
    pub rows: Vec<SweepRow>,
}

impl ErrorTable {
    pub fn row(&self, condition: Condition, rule: DecisionRule) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.condition == condition && r.rule == rule)
    }

    pub fn rows_for(&self, condition: Condition) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.condition == condition)
    }
}

/// Seed of trial `index` under a condition's domain tag.
pub fn trial_seed(root: u64, condition: Condition, index: usize) -> u64 {
    let tag = match condition {
        Condition::Active => seed::domain::ACTIVE,
        Condition::Passive => seed::domain::PASSIVE,
    };
    seed::derive(root, &[tag, index as u64])
}

/// Records `count` trials to the contact cap, in parallel, in index order.
pub fn record_trials<E: SensorEnvironment + ?Sized>(
    env: &E,
    model: &LikelihoodModel,
    policy: &ActivePolicyConfig,
    condition: Condition,
    count: usize,
    root: u64,
) -> Result<Vec<TrialTrajectory>, ActiveError> {
    let mut policy = policy.clone();
    policy.moves = condition == Condition::Active;
    (0..count)
        .into_par_iter()
        .map(|i| record_trial(env, model, &policy, trial_seed(root, condition, i)))
        .collect()
}

/// Training and replayed runs of a replay trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReplayAssignment {
    pub train_run: usize,
    pub test_run: usize,
}

/// Draws the distinct training and test runs of a replay trial.
pub fn replay_assignment(runs: usize, trial_seed: u64) -> ReplayAssignment {
    let mut rng = seed::rng(seed::derive(trial_seed, &[2]));
    let train_run = rng.random_range(0..runs);
    let mut test_run = rng.random_range(0..runs - 1);
    if test_run >= train_run {
        test_run += 1;
    }
    ReplayAssignment {
        train_run,
        test_run,
    }
}

/// Records `count` trials against recorded data, each trained on one run
/// and replaying a different one, as in Monte Carlo cross validation.
///
/// Models are trained once per training run; results come back in trial
/// order.
pub fn record_replay_trials(
    data: &LabeledRuns,
    histogram: &HistogramConfig,
    policy: &ActivePolicyConfig,
    condition: Condition,
    count: usize,
    root: u64,
) -> Result<Vec<(ReplayAssignment, TrialTrajectory)>, ActiveError> {
    let runs = data.runs.len();
    if runs < 2 {
        return Err(PerceptionError::InsufficientRuns(runs).into());
    }
    let mut policy = policy.clone();
    policy.moves = condition == Condition::Active;
    let seeds: Vec<u64> = (0..count).map(|i| trial_seed(root, condition, i)).collect();
    let assignments: Vec<ReplayAssignment> =
        seeds.iter().map(|s| replay_assignment(runs, *s)).collect();
    let mut out: Vec<Option<TrialTrajectory>> = vec![None; count];
    for train in 0..runs {
        let mine: Vec<usize> = (0..count)
            .filter(|&i| assignments[i].train_run == train)
            .collect();
        if mine.is_empty() {
            continue;
        }
        let model = train_histogram_model(&data.run(train), &data.classes, histogram)?;
        let done: Vec<(usize, TrialTrajectory)> = mine
            .into_par_iter()
            .map(|i| {
                let env = ReplayEnvironment {
                    classes: &data.classes,
                    run: &data.runs[assignments[i].test_run],
                };
                record_trial(&env, &model, &policy, seeds[i]).map(|t| (i, t))
            })
            .collect::<Result<_, _>>()?;
        for (i, t) in done {
            out[i] = Some(t);
        }
    }
    Ok(assignments
        .into_iter()
        .zip(out)
        .map(|(a, t)| (a, t.expect("every trial has a training run")))
        .collect())
}

/// Mean error and decision time per sweep point.
///
/// Trajectories must be recorded to `max_contacts` (see
/// [`record_trial`](super::record_trial)); every rule is applied to the same
/// trajectories, so sweep points differ only by where they stop.
pub fn evaluate_errors(
    classes: &LocationClassSet,
    active: &[TrialTrajectory],
    passive: &[TrialTrajectory],
    sweep: &SweepConfig,
    max_contacts: usize,
) -> Result<ErrorTable, ActiveError> {
    sweep.validate()?;
    let mut rows = Vec::new();
    for (condition, trials) in [(Condition::Active, active), (Condition::Passive, passive)] {
        if trials.is_empty() {
            return Err(ActiveError::EmptySweepPoint(format!("{condition:?}")));
        }
        for rule in sweep.rules() {
            let (mut err, mut time, mut forced) = (0.0, 0.0, 0);
            for tr in trials {
                let o = tr.outcome(classes, rule, max_contacts).ok_or_else(|| {
                    ActiveError::InvalidConfig(format!(
                        "trajectory of {} contacts too short for {rule:?}",
                        tr.contacts.len()
                    ))
                })?;
                err += o.error_mm;
                time += o.contacts as f64;
                forced += usize::from(o.forced);
            }
            let n = trials.len() as f64;
            rows.push(SweepRow {
                condition,
                rule,
                trials: trials.len(),
                mean_error_mm: err / n,
                mean_decision_time: time / n,
                forced,
            });
        }
    }
    Ok(ErrorTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::active::trial::tests::{policy, ToyEnv};

    fn table(env: &ToyEnv, count: usize) -> ErrorTable {
        let model = env.model();
        let p = policy(env, DecisionRule::Threshold(0.5));
        let a = record_trials(env, &model, &p, Condition::Active, count, 5).unwrap();
        let b = record_trials(env, &model, &p, Condition::Passive, count, 5).unwrap();
        evaluate_errors(
            &env.classes,
            &a,
            &b,
            &SweepConfig::default(),
            p.max_contacts,
        )
        .unwrap()
    }

    #[test]
    fn perfect_trials_give_a_table_of_zeros() {
        let t = table(&ToyEnv::new(11, 0.0), 20);
        assert_eq!(t.rows.len(), 2 * (11 + 10));
        assert!(t
            .rows
            .iter()
            .all(|r| r.mean_error_mm == 0.0 && r.trials == 20));
        let fixed = t
            .row(Condition::Active, DecisionRule::FixedTime(7))
            .unwrap();
        assert_eq!(fixed.mean_decision_time, 7.0);
        let zero = t
            .row(Condition::Passive, DecisionRule::Threshold(0.0))
            .unwrap();
        assert_eq!(zero.mean_decision_time, 1.0);
    }

    #[test]
    fn mean_decision_time_grows_with_theta() {
        let env = ToyEnv::new(15, 0.8);
        let model = env.model();
        let mut p = policy(&env, DecisionRule::Threshold(0.5));
        p.evidence = crate::active::EvidenceScale::Effective(1.0);
        let a = record_trials(&env, &model, &p, Condition::Active, 60, 9).unwrap();
        let t = evaluate_errors(
            &env.classes,
            &a,
            &a,
            &SweepConfig::default(),
            p.max_contacts,
        )
        .unwrap();
        let times: Vec<f64> = t
            .rows_for(Condition::Active)
            .filter(|r| matches!(r.rule, DecisionRule::Threshold(_)))
            .map(|r| r.mean_decision_time)
            .collect();
        assert!(times.windows(2).all(|w| w[1] >= w[0]), "{times:?}");
        assert!(times.last().unwrap() > &times[0]);
    }

    #[test]
    fn empty_condition_is_an_error() {
        let env = ToyEnv::new(5, 0.0);
        let model = env.model();
        let p = policy(&env, DecisionRule::Threshold(0.5));
        let a = record_trials(&env, &model, &p, Condition::Active, 3, 1).unwrap();
        assert!(matches!(
            evaluate_errors(&env.classes, &a, &[], &SweepConfig::default(), 40),
            Err(ActiveError::EmptySweepPoint(_))
        ));
        let bad = SweepConfig {
            thetas: vec![1.0],
            times: vec![1],
        };
        assert!(evaluate_errors(&env.classes, &a, &a, &bad, 40).is_err());
    }

    #[test]
    fn replay_runs_are_distinct_and_cover_all_runs() {
        let mut seen = [[false; 4]; 4];
        for s in 0..400u64 {
            let a = replay_assignment(4, seed::derive(s, &[1]));
            assert_ne!(a.train_run, a.test_run);
            seen[a.train_run][a.test_run] = true;
        }
        for (i, row) in seen.iter().enumerate() {
            for (j, hit) in row.iter().enumerate() {
                assert_eq!(*hit, i != j);
            }
        }
    }

    #[test]
    fn replay_trials_are_deterministic_and_ordered() {
        let env = ToyEnv::new(9, 0.4);
        let runs: Vec<Vec<_>> = (0..3u64)
            .map(|r| {
                (0..9)
                    .map(|k| env.series(env.classes.label(k), r * 50 + k as u64))
                    .collect()
            })
            .collect();
        let data = LabeledRuns::new(env.classes.clone(), runs).unwrap();
        let h = HistogramConfig {
            bins: 30,
            ..HistogramConfig::default()
        };
        let p = policy(&env, DecisionRule::Threshold(0.5));
        let a = record_replay_trials(&data, &h, &p, Condition::Active, 25, 4).unwrap();
        let b = record_replay_trials(&data, &h, &p, Condition::Active, 25, 4).unwrap();
        assert_eq!(a, b);
        for (i, (assign, tr)) in a.iter().enumerate() {
            let s = trial_seed(4, Condition::Active, i);
            assert_eq!(*assign, replay_assignment(3, s));
            assert_eq!(tr.start_mm, crate::active::draw_start(&env.classes, s));
        }
        let single = LabeledRuns::new(env.classes.clone(), vec![data.runs[0].clone()]).unwrap();
        assert!(record_replay_trials(&single, &h, &p, Condition::Active, 1, 0).is_err());
    }
}
