use rand::Rng;
use serde::Serialize;

use super::{
    bayes_update, check_decision, init_posterior, select_action, ActiveError, ActivePolicyConfig,
    Decision, DecisionRule, PosteriorState,
};
use crate::perception::{LikelihoodModel, LocationClassSet};
use crate::pipeline::{assemble_series, subtract_reference, AssemblyConfig, ReferenceSignal};
use crate::seed;
use crate::series::{Calibration, DeflectionSeries, SeriesMeta};
use crate::sim::{
    headless_series, simulate_contact_event, MotionProgram, NoiseConfig, RodStimulus,
    WhiskerArrayModel,
};

/// Something that can be touched at a location and returns a series.
///
/// Locations are sensor positions relative to the stimulus, in the same
/// coordinates as the class labels.
pub trait SensorEnvironment: Sync {
    fn classes(&self) -> &LocationClassSet;
    fn contact(&self, location_mm: f64, seed: u64) -> Result<DeflectionSeries, ActiveError>;
}

/// A simulated array contacting a fixed rod.
#[derive(Debug, Clone)]
pub struct SimulatedEnvironment {
    pub array: WhiskerArrayModel,
    pub motion: MotionProgram,
    pub noise: NoiseConfig,
    pub rod_diameter: f64,
    pub classes: LocationClassSet,
    /// Subtracted from every contact when present.
    pub reference: Option<ReferenceSignal>,
    /// Skip rendering and tracking.
    pub headless: bool,
}

impl SensorEnvironment for SimulatedEnvironment {
    fn classes(&self) -> &LocationClassSet {
        &self.classes
    }

    fn contact(&self, location_mm: f64, seed: u64) -> Result<DeflectionSeries, ActiveError> {
        let rod = RodStimulus::new(-location_mm, self.rod_diameter)?;
        let event = simulate_contact_event(
            &self.array,
            &self.motion,
            Some(&rod),
            &self.noise,
            seed,
            self.headless,
        )?;
        let meta = SeriesMeta {
            array: self.array.config.kind,
            motion: self.motion.kind,
            location_mm,
            calibrated: Calibration::Raw,
            frame_rate_hz: self.motion.frame_rate,
        };
        let series = match &event.frames {
            None => headless_series(&self.array, &event, &self.noise, meta),
            Some(frames) => assemble_series(
                frames,
                &self.array.rest_markers(),
                meta,
                &AssemblyConfig::for_model(&self.array),
            )?,
        };
        Ok(match &self.reference {
            Some(r) => subtract_reference(&series, r)?,
            None => series,
        })
    }
}

/// Replays one recorded run: a contact returns the stored series of the
/// class nearest the sensor location, so touching the same place twice
/// yields the same data.
#[derive(Debug, Clone)]
pub struct ReplayEnvironment<'a> {
    pub classes: &'a LocationClassSet,
    /// One series per class, in class order.
    pub run: &'a [DeflectionSeries],
}

impl SensorEnvironment for ReplayEnvironment<'_> {
    fn classes(&self) -> &LocationClassSet {
        self.classes
    }

    fn contact(&self, location_mm: f64, _seed: u64) -> Result<DeflectionSeries, ActiveError> {
        Ok(self.run[self.classes.nearest_index(location_mm)].clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContactRecord {
    /// Sensor location at this contact, mm.
    pub location_mm: f64,
    /// Likelihood-argmax class of this contact alone, relative to the sensor.
    pub perceived_class: usize,
    pub perceived_mm: f64,
    /// Translation applied after this contact (0 once decided), mm.
    pub action_mm: f64,
    /// Posterior over start-location hypotheses after this contact.
    pub posterior: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialTrajectory {
    pub start_mm: f64,
    pub contacts: Vec<ContactRecord>,
    /// Decided start-location hypothesis.
    pub decision_class: usize,
    pub decision_contacts: usize,
    pub forced: bool,
    /// Decided current location, mm.
    pub estimate_mm: f64,
    pub end_location_mm: f64,
    pub error_mm: f64,
}

/// Where a decision rule stops a recorded trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub contacts: usize,
    pub error_mm: f64,
    pub forced: bool,
}

impl TrialTrajectory {
    /// Contact count and absolute error the trajectory would have produced
    /// under `rule`, or `None` if it was not recorded far enough for the
    /// rule or the cap to fire.
    pub fn outcome(
        &self,
        classes: &LocationClassSet,
        rule: DecisionRule,
        max_contacts: usize,
    ) -> Option<Outcome> {
        let cut = self.cut(rule, max_contacts)?;
        let posterior = self.posterior_at(cut);
        Some(Outcome {
            contacts: cut,
            error_mm: (classes.label(posterior.argmax().0) - self.start_mm).abs(),
            forced: !rule.fires(&posterior),
        })
    }

    /// The trajectory truncated where `rule` would have stopped it.
    pub fn decided(
        &self,
        classes: &LocationClassSet,
        rule: DecisionRule,
        max_contacts: usize,
    ) -> Option<TrialTrajectory> {
        let cut = self.cut(rule, max_contacts)?;
        let posterior = self.posterior_at(cut);
        let mut contacts = self.contacts[..cut].to_vec();
        contacts.last_mut().expect("cut is at least 1").action_mm = 0.0;
        let decision = Decision {
            class: posterior.argmax().0,
            forced: !rule.fires(&posterior),
        };
        Some(finish(classes, self.start_mm, contacts, decision))
    }

    fn cut(&self, rule: DecisionRule, max_contacts: usize) -> Option<usize> {
        let limit = max_contacts.min(self.contacts.len());
        (1..=limit).find(|&t| rule.fires(&self.posterior_at(t)) || t == max_contacts)
    }

    fn posterior_at(&self, t: usize) -> PosteriorState {
        PosteriorState {
            probs: self.contacts[t - 1].posterior.clone(),
            t,
        }
    }
}

fn finish(
    classes: &LocationClassSet,
    start_mm: f64,
    contacts: Vec<ContactRecord>,
    decision: Decision,
) -> TrialTrajectory {
    let end = contacts.last().map_or(start_mm, |c| c.location_mm);
    // The decided hypothesis is a start location; shifting it by the
    // displacement so far gives the current location.
    let estimate = classes.label(decision.class) + (end - start_mm);
    TrialTrajectory {
        start_mm,
        decision_contacts: contacts.len(),
        contacts,
        decision_class: decision.class,
        forced: decision.forced,
        estimate_mm: estimate,
        end_location_mm: end,
        error_mm: (estimate - end).abs(),
    }
}

/// Class indices eligible as random starts: the middle 80% of the grid.
pub fn start_indices(classes: &LocationClassSet) -> std::ops::RangeInclusive<usize> {
    let last = (classes.len() - 1) as f64;
    (0.1 * last).ceil() as usize..=(0.9 * last).floor() as usize
}

/// Seeded start location.
pub fn draw_start(classes: &LocationClassSet, seed: u64) -> f64 {
    let mut rng = seed::rng(seed::derive(seed, &[0]));
    classes.label(rng.random_range(start_indices(classes)))
}

fn contact_seed(trial_seed: u64, contact: usize) -> u64 {
    seed::derive(trial_seed, &[1, contact as u64])
}

/// Hypothesis evidence for one contact.
///
/// `class_ll[k]` scores "the sensor is now at label k". Hypothesis i says the
/// sensor started at label i, so after a displacement `moved` it predicts
/// the class nearest label i + moved (clamped to the grid).
fn hypothesis_evidence(
    classes: &LocationClassSet,
    class_ll: &[f64],
    moved: f64,
    weight: f64,
) -> Vec<f64> {
    classes
        .labels()
        .iter()
        .map(|l| weight * class_ll[classes.nearest_index(l + moved)])
        .collect()
}

fn likelihood_argmax(ll: &[f64]) -> usize {
    let mut best = 0;
    for (i, l) in ll.iter().enumerate().skip(1) {
        if *l > ll[best] {
            best = i;
        }
    }
    best
}

fn simulate<E: SensorEnvironment + ?Sized>(
    env: &E,
    model: &LikelihoodModel,
    policy: &ActivePolicyConfig,
    seed: u64,
    stop_on_decision: bool,
) -> Result<TrialTrajectory, ActiveError> {
    let classes = env.classes();
    policy.validate(classes)?;
    if model.classes.labels() != classes.labels() {
        return Err(ActiveError::InvalidConfig(
            "model classes do not match the environment's".into(),
        ));
    }
    let (lo, hi) = (classes.first(), classes.last());
    let start = draw_start(classes, seed);
    let mut location = start;
    let mut posterior = init_posterior(classes.len())?;
    let mut contacts: Vec<ContactRecord> = Vec::with_capacity(policy.max_contacts);
    let at = |contact: usize| {
        move |e: ActiveError| ActiveError::AtContact {
            contact,
            source: Box::new(e),
        }
    };
    for c in 0..policy.max_contacts {
        let series = env
            .contact(location, contact_seed(seed, c))
            .map_err(at(c))?;
        let class_ll = model
            .log_likelihoods(&series)
            .map_err(|e| at(c)(e.into()))?;
        let weight = policy.evidence.weight(model.shape().0 * model.dims());
        let evidence = hypothesis_evidence(classes, &class_ll, location - start, weight);
        posterior = bayes_update(&posterior, &evidence).map_err(at(c))?;
        let j = likelihood_argmax(&class_ll);
        let perceived = classes.label(j);
        let decision = if stop_on_decision {
            check_decision(&posterior, policy)
        } else if posterior.t >= policy.max_contacts {
            Some(Decision {
                class: posterior.argmax().0,
                forced: !policy.rule.fires(&posterior),
            })
        } else {
            None
        };
        let next = match decision {
            Some(_) => location,
            None => (location + select_action(perceived, policy)).clamp(lo, hi),
        };
        contacts.push(ContactRecord {
            location_mm: location,
            perceived_class: j,
            perceived_mm: perceived,
            action_mm: next - location,
            posterior: posterior.probs.clone(),
        });
        if let Some(d) = decision {
            return Ok(finish(classes, start, contacts, d));
        }
        location = next;
    }
    unreachable!("the contact cap always forces a decision")
}

/// One active (or passive, if `policy.moves` is false) localization trial:
/// contact, Bayes-update over start-location hypotheses, check the decision
/// rule, otherwise move toward the fixation point.
pub fn run_active_trial<E: SensorEnvironment + ?Sized>(
    env: &E,
    model: &LikelihoodModel,
    policy: &ActivePolicyConfig,
    seed: u64,
) -> Result<TrialTrajectory, ActiveError> {
    simulate(env, model, policy, seed, true)
}

/// Like [`run_active_trial`] but ignores the decision rule and always runs
/// to `max_contacts`, so any rule can be applied afterwards with
/// [`TrialTrajectory::decided`].
pub fn record_trial<E: SensorEnvironment + ?Sized>(
    env: &E,
    model: &LikelihoodModel,
    policy: &ActivePolicyConfig,
    seed: u64,
) -> Result<TrialTrajectory, ActiveError> {
    simulate(env, model, policy, seed, false)
}

#[cfg(test)]
pub(crate) mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    use super::*;
    use crate::active::EvidenceScale;
    use crate::perception::{train_histogram_model, HistogramConfig};
    use crate::sim::{ArrayKind, MotionKind};

    /// Three frames of one marker whose x reads the location plus noise.
    pub(crate) struct ToyEnv {
        pub classes: LocationClassSet,
        pub sigma: f64,
        pub fail_after: Option<usize>,
        pub calls: AtomicUsize,
    }

    impl ToyEnv {
        pub(crate) fn new(n: usize, sigma: f64) -> Self {
            Self {
                classes: LocationClassSet::centred(n, 1.0).unwrap(),
                sigma,
                fail_after: None,
                calls: AtomicUsize::new(0),
            }
        }

        pub(crate) fn series(&self, location: f64, seed: u64) -> DeflectionSeries {
            let mut rng = seed::rng(seed);
            let noise = Normal::new(0.0, self.sigma.max(1e-300)).unwrap();
            let data = (0..3)
                .flat_map(|_| {
                    [
                        location + noise.sample(&mut rng) * f64::from(self.sigma > 0.0),
                        0.0,
                    ]
                })
                .collect();
            let meta = SeriesMeta {
                array: ArrayKind::Dynamic,
                motion: MotionKind::Whisk,
                location_mm: location,
                calibrated: Calibration::Raw,
                frame_rate_hz: 30.0,
            };
            DeflectionSeries::from_data(3, 1, data, meta).unwrap()
        }

        pub(crate) fn model(&self) -> LikelihoodModel {
            let training: Vec<(usize, DeflectionSeries)> = (0..self.classes.len())
                .flat_map(|k| (0..8u64).map(move |r| (k, r)))
                .map(|(k, r)| {
                    (
                        k,
                        self.series(self.classes.label(k), 1000 + r * 100 + k as u64),
                    )
                })
                .collect();
            let refs: Vec<(usize, &DeflectionSeries)> =
                training.iter().map(|(k, s)| (*k, s)).collect();
            let config = HistogramConfig {
                bins: 4 * self.classes.len(),
                ..HistogramConfig::default()
            };
            train_histogram_model(&refs, &self.classes, &config).unwrap()
        }
    }

    impl SensorEnvironment for ToyEnv {
        fn classes(&self) -> &LocationClassSet {
            &self.classes
        }

        fn contact(&self, location_mm: f64, seed: u64) -> Result<DeflectionSeries, ActiveError> {
            let call = self.calls.fetch_add(1, Ordering::SeqCst);
            if self.fail_after.is_some_and(|n| call >= n) {
                return Err(ActiveError::InvalidConfig("sensor offline".into()));
            }
            Ok(self.series(location_mm, seed))
        }
    }

    pub(crate) fn policy(env: &ToyEnv, rule: DecisionRule) -> ActivePolicyConfig {
        let mut p = ActivePolicyConfig::centred(&env.classes, rule);
        p.evidence = EvidenceScale::Full;
        p
    }

    #[test]
    fn start_range_is_the_middle_eighty_percent() {
        let c = LocationClassSet::centred(40, 1.0).unwrap();
        assert_eq!(start_indices(&c), 4..=35);
        let c = LocationClassSet::centred(50, 1.0).unwrap();
        assert_eq!(start_indices(&c), 5..=44);
        for s in 0..200 {
            let x = draw_start(&c, s);
            assert!((-20.5..=19.5).contains(&x), "{x}");
        }
    }

    #[test]
    fn centred_start_is_a_fixed_point() {
        let env = ToyEnv::new(3, 0.0);
        let model = env.model();
        let p = policy(&env, DecisionRule::FixedTime(4));
        let tr = run_active_trial(&env, &model, &p, 11).unwrap();
        assert_eq!(tr.start_mm, 0.0);
        assert_eq!(tr.decision_contacts, 4);
        assert!(tr
            .contacts
            .iter()
            .all(|c| c.action_mm == 0.0 && c.location_mm == 0.0));
        assert_eq!(tr.decision_class, 1);
        assert_eq!(tr.error_mm, 0.0);
        assert!(!tr.forced);
    }

    #[test]
    fn active_trial_moves_to_fixation_and_localizes() {
        let env = ToyEnv::new(21, 0.05);
        let model = env.model();
        let p = policy(&env, DecisionRule::Threshold(0.99));
        for s in 0..20 {
            let tr = run_active_trial(&env, &model, &p, s).unwrap();
            assert_eq!(tr.error_mm, 0.0);
            assert_eq!(tr.end_location_mm, p.x_fix);
            assert_eq!(tr.contacts.len(), tr.decision_contacts);
            // One perfect percept is enough to reach the fixation point.
            if tr.start_mm != p.x_fix {
                assert_eq!(tr.contacts[0].action_mm, p.x_fix - tr.start_mm);
            }
        }
    }

    #[test]
    fn passive_trial_never_moves() {
        let env = ToyEnv::new(21, 0.3);
        let model = env.model();
        let p = policy(&env, DecisionRule::FixedTime(10)).passive();
        for s in 0..10 {
            let tr = run_active_trial(&env, &model, &p, s).unwrap();
            assert!(tr
                .contacts
                .iter()
                .all(|c| c.location_mm == tr.start_mm && c.action_mm == 0.0));
        }
    }

    #[test]
    fn environment_failure_reports_the_contact() {
        let mut env = ToyEnv::new(11, 0.3);
        let model = env.model();
        env.fail_after = Some(2);
        let p = policy(&env, DecisionRule::FixedTime(5));
        match run_active_trial(&env, &model, &p, 3) {
            Err(ActiveError::AtContact { contact, .. }) => assert_eq!(contact, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mismatched_model_is_rejected() {
        let env = ToyEnv::new(11, 0.0);
        let other = ToyEnv::new(9, 0.0).model();
        let p = policy(&env, DecisionRule::FixedTime(1));
        assert!(matches!(
            run_active_trial(&env, &other, &p, 0),
            Err(ActiveError::InvalidConfig(_))
        ));
    }

    #[test]
    fn replay_returns_the_stored_series() {
        let toy = ToyEnv::new(5, 0.2);
        let run: Vec<DeflectionSeries> = (0..5)
            .map(|k| toy.series(toy.classes.label(k), k as u64))
            .collect();
        let env = ReplayEnvironment {
            classes: &toy.classes,
            run: &run,
        };
        assert_eq!(env.contact(0.1, 1).unwrap(), run[2]);
        assert_eq!(env.contact(0.1, 2).unwrap(), run[2]);
        assert_eq!(env.contact(-9.0, 2).unwrap(), run[0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn recorded_trials_replay_any_rule(seed in any::<u64>(), theta in 0.2f64..0.99, t in 1usize..12, moves in any::<bool>()) {
            let env = ToyEnv::new(15, 0.6);
            let model = env.model();
            let mut p = policy(&env, DecisionRule::Threshold(0.5));
            p.moves = moves;
            p.max_contacts = 12;
            let full = record_trial(&env, &model, &p, seed).unwrap();
            prop_assert_eq!(full.contacts.len(), 12);
            for rule in [DecisionRule::Threshold(theta), DecisionRule::FixedTime(t)] {
                p.rule = rule;
                let direct = run_active_trial(&env, &model, &p, seed).unwrap();
                let replayed = full.decided(&env.classes, rule, 12).unwrap();
                prop_assert_eq!(&direct, &replayed);
                let o = full.outcome(&env.classes, rule, 12).unwrap();
                prop_assert_eq!(o.contacts, direct.decision_contacts);
                prop_assert_eq!(o.error_mm, direct.error_mm);
                prop_assert_eq!(o.forced, direct.forced);
            }
        }

        #[test]
        fn sensor_stays_in_range_and_posteriors_normalised(seed in any::<u64>(), sigma in 0.0f64..3.0) {
            let env = ToyEnv::new(15, sigma);
            let model = env.model();
            let mut p = policy(&env, DecisionRule::Threshold(0.9));
            p.evidence = EvidenceScale::Effective(2.0);
            let tr = record_trial(&env, &model, &p, seed).unwrap();
            let (lo, hi) = (env.classes.first(), env.classes.last());
            for c in &tr.contacts {
                prop_assert!(c.location_mm >= lo && c.location_mm <= hi);
                let sum: f64 = c.posterior.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
            }
            prop_assert!(tr.contacts.len() <= p.max_contacts);
        }
    }
}
