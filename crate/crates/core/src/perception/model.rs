use serde::{Deserialize, Serialize};

use super::{LocationClassSet, PerceptionError};
use crate::series::DeflectionSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramConfig {
    pub bins: usize,
    /// Additive smoothing count per bin.
    pub alpha: f64,
    /// Consecutive frames sharing one time bin.
    pub time_pooling: usize,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self {
            bins: 25,
            alpha: 1.0,
            time_pooling: 1,
        }
    }
}

impl HistogramConfig {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        if self.bins == 0 {
            return Err(PerceptionError::InvalidConfig(
                "bins must be positive".into(),
            ));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(PerceptionError::InvalidConfig(
                "alpha must be positive".into(),
            ));
        }
        if self.time_pooling == 0 {
            return Err(PerceptionError::InvalidConfig(
                "time_pooling must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Smoothed per-class histograms over (time bin, sensor dimension).
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodModel {
    pub config: HistogramConfig,
    pub classes: LocationClassSet,
    pub(crate) frames: usize,
    pub(crate) markers: usize,
    /// Lower and upper outer edge per dimension.
    pub(crate) ranges: Vec<[f64; 2]>,
    /// `[class][time_bin][dim][bin]`.
    pub(crate) probs: Vec<f64>,
    pub(crate) log_probs: Vec<f64>,
}

/// Outcome of a maximum-likelihood decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: usize,
    /// Another class reached the same maximum.
    pub tied: bool,
    pub log_likelihoods: Vec<f64>,
}

impl LikelihoodModel {
    pub fn shape(&self) -> (usize, usize) {
        (self.frames, self.markers)
    }

    pub fn dims(&self) -> usize {
        self.markers * 2
    }

    pub fn time_bins(&self) -> usize {
        self.frames.div_ceil(self.config.time_pooling)
    }

    fn cells(&self) -> usize {
        self.time_bins() * self.dims() * self.config.bins
    }

    /// Shared bin edges of one dimension, `bins + 1` values.
    pub fn edges(&self, dim: usize) -> Vec<f64> {
        let [lo, hi] = self.ranges[dim];
        let b = self.config.bins;
        let width = (hi - lo) / b as f64;
        (0..=b)
            .map(|k| if k == b { hi } else { lo + width * k as f64 })
            .collect()
    }

    /// Value bin of `v` in dimension `dim`; out-of-range values clamp.
    pub fn bin_of(&self, dim: usize, v: f64) -> usize {
        let [lo, hi] = self.ranges[dim];
        let b = self.config.bins;
        let k = ((v - lo) / ((hi - lo) / b as f64)).floor();
        if k.is_nan() || k < 0.0 {
            0
        } else {
            (k as usize).min(b - 1)
        }
    }

    fn offset(&self, class: usize, time_bin: usize, dim: usize, bin: usize) -> usize {
        ((class * self.time_bins() + time_bin) * self.dims() + dim) * self.config.bins + bin
    }

    pub fn probability(&self, class: usize, time_bin: usize, dim: usize, bin: usize) -> f64 {
        self.probs[self.offset(class, time_bin, dim, bin)]
    }

    /// One value distribution, `bins` entries.
    pub fn distribution(&self, class: usize, time_bin: usize, dim: usize) -> &[f64] {
        let o = self.offset(class, time_bin, dim, 0);
        &self.probs[o..o + self.config.bins]
    }

    pub fn check_series(&self, series: &DeflectionSeries) -> Result<(), PerceptionError> {
        if series.shape() != self.shape() {
            return Err(PerceptionError::ShapeMismatch {
                expected: self.shape(),
                found: series.shape(),
            });
        }
        Ok(())
    }

    /// Offsets into one class block of every (frame, dimension) cell the
    /// series falls in.
    fn cell_offsets(&self, series: &DeflectionSeries) -> Vec<usize> {
        let dims = self.dims();
        let mut out = Vec::with_capacity(self.frames * dims);
        for t in 0..self.frames {
            let tb = t / self.config.time_pooling;
            for (d, v) in series.frame(t).iter().enumerate() {
                out.push(self.offset(0, tb, d, self.bin_of(d, *v)));
            }
        }
        out
    }

    /// Log-likelihood of the series under every class.
    pub fn log_likelihoods(&self, series: &DeflectionSeries) -> Result<Vec<f64>, PerceptionError> {
        self.check_series(series)?;
        let offsets = self.cell_offsets(series);
        let block = self.cells();
        Ok((0..self.classes.len())
            .map(|c| {
                let logs = &self.log_probs[c * block..(c + 1) * block];
                offsets.iter().map(|&o| logs[o]).sum()
            })
            .collect())
    }

    pub(crate) fn from_parts(
        config: HistogramConfig,
        classes: LocationClassSet,
        frames: usize,
        markers: usize,
        ranges: Vec<[f64; 2]>,
        probs: Vec<f64>,
    ) -> Self {
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        Self {
            config,
            classes,
            frames,
            markers,
            ranges,
            probs,
            log_probs,
        }
    }
}

/// Fits smoothed histograms to labelled series.
///
/// Bin edges are shared by all classes: per dimension, `bins` equal
/// intervals over the training value range padded by 5% of its span on each
/// side (1.0 either side if the span is zero).
pub fn train_histogram_model(
    training: &[(usize, &DeflectionSeries)],
    classes: &LocationClassSet,
    config: &HistogramConfig,
) -> Result<LikelihoodModel, PerceptionError> {
    config.validate()?;
    let n_classes = classes.len();
    let Some((_, first)) = training.first() else {
        return Err(PerceptionError::MissingClass(0));
    };
    let (frames, markers) = first.shape();
    let dims = markers * 2;
    let mut present = vec![false; n_classes];
    let mut ranges = vec![[f64::INFINITY, f64::NEG_INFINITY]; dims];
    for (class, s) in training {
        if *class >= n_classes {
            return Err(PerceptionError::InvalidConfig(format!(
                "class index {class} outside {n_classes} classes"
            )));
        }
        if s.shape() != (frames, markers) {
            return Err(PerceptionError::ShapeMismatch {
                expected: (frames, markers),
                found: s.shape(),
            });
        }
        present[*class] = true;
        for t in 0..frames {
            for (d, v) in s.frame(t).iter().enumerate() {
                ranges[d][0] = ranges[d][0].min(*v);
                ranges[d][1] = ranges[d][1].max(*v);
            }
        }
    }
    if let Some(missing) = present.iter().position(|p| !p) {
        return Err(PerceptionError::MissingClass(missing));
    }
    for r in &mut ranges {
        let span = r[1] - r[0];
        let pad = if span > 0.0 { 0.05 * span } else { 1.0 };
        *r = [r[0] - pad, r[1] + pad];
    }

    let mut model = LikelihoodModel {
        config: config.clone(),
        classes: classes.clone(),
        frames,
        markers,
        ranges,
        probs: Vec::new(),
        log_probs: Vec::new(),
    };
    let block = model.cells();
    let tbins = model.time_bins();
    let mut counts = vec![0u32; n_classes * block];
    let mut totals = vec![0u32; n_classes * tbins];
    for (class, s) in training {
        let base = class * block;
        for o in model.cell_offsets(s) {
            counts[base + o] += 1;
        }
        for t in 0..frames {
            totals[class * tbins + t / config.time_pooling] += 1;
        }
    }
    let b = config.bins;
    let mut probs = vec![0.0; n_classes * block];
    for c in 0..n_classes {
        for tb in 0..tbins {
            let denom = totals[c * tbins + tb] as f64 + b as f64 * config.alpha;
            for d in 0..dims {
                let o = model.offset(c, tb, d, 0);
                for k in 0..b {
                    probs[o + k] = (counts[o + k] as f64 + config.alpha) / denom;
                }
            }
        }
    }
    model.log_probs = probs.iter().map(|p| p.ln()).collect();
    model.probs = probs;
    Ok(model)
}

pub fn log_likelihood(
    model: &LikelihoodModel,
    series: &DeflectionSeries,
    class: usize,
) -> Result<f64, PerceptionError> {
    Ok(model.log_likelihoods(series)?[class])
}

/// Relative tolerance within which log-likelihoods count as tied. Equal
/// products of cell probabilities can differ by a few ulps once summed in
/// a different order.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Maximum-likelihood class; ties go to the lowest index and are flagged.
pub fn classify_ml(
    model: &LikelihoodModel,
    series: &DeflectionSeries,
) -> Result<Classification, PerceptionError> {
    let log_likelihoods = model.log_likelihoods(series)?;
    let best = log_likelihoods
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOLERANCE * best.abs().max(1.0);
    let mut winners = log_likelihoods
        .iter()
        .enumerate()
        .filter(|(_, l)| best - **l <= tol)
        .map(|(i, _)| i);
    let class = winners.next().unwrap_or(0);
    let tied = winners.next().is_some();
    Ok(Classification {
        class,
        tied,
        log_likelihoods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{Calibration, SeriesMeta};
    use crate::sim::{ArrayKind, MotionKind};
    use proptest::prelude::*;

    fn series(frames: usize, markers: usize, data: Vec<f64>) -> DeflectionSeries {
        let meta = SeriesMeta {
            array: ArrayKind::Static,
            motion: MotionKind::Dab,
            location_mm: 0.0,
            calibrated: Calibration::Raw,
            frame_rate_hz: 30.0,
        };
        DeflectionSeries::from_data(frames, markers, data, meta).unwrap()
    }

    fn constant(frames: usize, v: f64) -> DeflectionSeries {
        series(frames, 1, vec![v; frames * 2])
    }

    #[test]
    fn single_class_always_wins() {
        let classes = LocationClassSet::centred(1, 1.0).unwrap();
        let train = constant(3, 0.7);
        let model =
            train_histogram_model(&[(0, &train)], &classes, &HistogramConfig::default()).unwrap();
        for v in [-50.0, 0.0, 0.7, 9.0] {
            assert_eq!(classify_ml(&model, &constant(3, v)).unwrap().class, 0);
        }
    }

    #[test]
    fn one_bin_one_class_has_unit_probability() {
        let classes = LocationClassSet::centred(1, 1.0).unwrap();
        let train = series(2, 1, vec![0.1, 0.5, -0.3, 2.0]);
        let cfg = HistogramConfig {
            bins: 1,
            ..HistogramConfig::default()
        };
        let model = train_histogram_model(&[(0, &train)], &classes, &cfg).unwrap();
        assert_eq!(log_likelihood(&model, &train, 0).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_constant_classes_separate() {
        let classes = LocationClassSet::centred(2, 1.0).unwrap();
        let (a, b) = (constant(4, -3.0), constant(4, 5.0));
        let model =
            train_histogram_model(&[(0, &a), (1, &b)], &classes, &HistogramConfig::default())
                .unwrap();
        assert_eq!(classify_ml(&model, &a).unwrap().class, 0);
        assert_eq!(classify_ml(&model, &b).unwrap().class, 1);
    }

    #[test]
    fn hand_counted_three_class_two_bin_histogram() {
        // One dimension pair, two frames; x values below, y fixed at zero.
        // Range [0, 4] pads to [-0.2, 4.2]; bin edge at 2.0.
        let classes = LocationClassSet::centred(3, 1.0).unwrap();
        let s0 = series(2, 1, vec![0.0, 0.0, 1.0, 0.0]);
        let s1 = series(2, 1, vec![3.0, 0.0, 4.0, 0.0]);
        let s2 = series(2, 1, vec![1.5, 0.0, 2.5, 0.0]);
        let s0b = series(2, 1, vec![0.5, 0.0, 3.5, 0.0]);
        let cfg = HistogramConfig {
            bins: 2,
            alpha: 1.0,
            time_pooling: 1,
        };
        let model =
            train_histogram_model(&[(0, &s0), (1, &s1), (2, &s2), (0, &s0b)], &classes, &cfg)
                .unwrap();
        let e = model.edges(0);
        assert!(
            (e[0] + 0.2).abs() < 1e-12 && (e[1] - 2.0).abs() < 1e-12 && (e[2] - 4.2).abs() < 1e-12
        );
        // Class 0, frame 0, x: values 0.0 and 0.5 both low -> (2+1)/(2+2), (0+1)/(2+2).
        assert_eq!(model.distribution(0, 0, 0), &[0.75, 0.25]);
        // Class 0, frame 1, x: 1.0 low, 3.5 high.
        assert_eq!(model.distribution(0, 1, 0), &[0.5, 0.5]);
        // Class 1, frame 0, x: 3.0 high -> (0+1)/3, (1+1)/3.
        assert_eq!(model.distribution(1, 0, 0), &[1.0 / 3.0, 2.0 / 3.0]);
        // Class 2, frame 1, x: 2.5 high.
        assert_eq!(model.distribution(2, 1, 0), &[1.0 / 3.0, 2.0 / 3.0]);
        // y is constant zero: zero span pads by 1, value lands in the upper bin.
        assert_eq!(model.edges(1), vec![-1.0, 0.0, 1.0]);
        assert_eq!(model.distribution(1, 0, 1), &[1.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn toy_log_likelihood_is_sum_of_four_cells() {
        let classes = LocationClassSet::centred(2, 1.0).unwrap();
        let a = series(2, 1, vec![0.0, 1.0, 2.0, 3.0]);
        let b = series(2, 1, vec![4.0, -1.0, 0.5, 7.0]);
        let cfg = HistogramConfig {
            bins: 3,
            ..HistogramConfig::default()
        };
        let model = train_histogram_model(&[(0, &a), (1, &b)], &classes, &cfg).unwrap();
        let test = series(2, 1, vec![1.0, 10.0, -5.0, 2.0]);
        for c in 0..2 {
            let mut expected = 0.0;
            for t in 0..2 {
                for d in 0..2 {
                    let v = test.frame(t)[d];
                    let edges = model.edges(d);
                    let k = (0..3).find(|&k| v < edges[k + 1]).unwrap_or(2);
                    expected += model.distribution(c, t, d)[k].ln();
                }
            }
            let got = log_likelihood(&model, &test, c).unwrap();
            assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        }
    }

    #[test]
    fn frames_within_a_time_bin_are_exchangeable() {
        let classes = LocationClassSet::centred(2, 1.0).unwrap();
        let a = series(3, 1, vec![0.0, 0.0, 1.0, 2.0, 3.0, 1.0]);
        let b = series(3, 1, vec![5.0, 1.0, 0.0, 2.0, 1.0, 1.5]);
        let cfg = HistogramConfig {
            bins: 4,
            alpha: 1.0,
            time_pooling: 3,
        };
        let model = train_histogram_model(&[(0, &a), (1, &b)], &classes, &cfg).unwrap();
        let test = series(3, 1, vec![0.5, 1.0, 4.0, 0.2, 2.0, 2.0]);
        let permuted = series(3, 1, vec![2.0, 2.0, 0.5, 1.0, 4.0, 0.2]);
        assert_eq!(
            model.log_likelihoods(&test).unwrap(),
            model.log_likelihoods(&permuted).unwrap()
        );
    }

    #[test]
    fn forced_tie_goes_to_first_class_and_is_flagged() {
        let classes = LocationClassSet::centred(2, 1.0).unwrap();
        let (a, b) = (constant(2, -1.0), constant(2, 1.0));
        let cfg = HistogramConfig {
            bins: 3,
            ..HistogramConfig::default()
        };
        let model = train_histogram_model(&[(0, &a), (1, &b)], &classes, &cfg).unwrap();
        let mid = constant(2, 0.0);
        let c = classify_ml(&model, &mid).unwrap();
        assert_eq!(c.class, 0);
        assert!(c.tied);
    }

    #[test]
    fn training_errors() {
        let classes = LocationClassSet::centred(3, 1.0).unwrap();
        let a = constant(2, 0.0);
        let cfg = HistogramConfig::default();
        assert!(matches!(
            train_histogram_model(&[(0, &a), (2, &a)], &classes, &cfg),
            Err(PerceptionError::MissingClass(1))
        ));
        let b = constant(3, 0.0);
        assert!(matches!(
            train_histogram_model(&[(0, &a), (1, &b), (2, &a)], &classes, &cfg),
            Err(PerceptionError::ShapeMismatch { .. })
        ));
        let model = train_histogram_model(&[(0, &a), (1, &a), (2, &a)], &classes, &cfg).unwrap();
        assert!(classify_ml(&model, &b).is_err());
    }

    fn arb_training() -> impl Strategy<Value = (usize, usize, usize, Vec<Vec<f64>>, Vec<f64>)> {
        (1usize..5, 1usize..4, 1usize..4).prop_flat_map(|(classes, frames, markers)| {
            let len = frames * markers * 2;
            (
                Just(classes),
                Just(frames),
                Just(markers),
                prop::collection::vec(prop::collection::vec(-20.0f64..20.0, len), classes),
                prop::collection::vec(-40.0f64..40.0, len),
            )
        })
    }

    proptest! {
        #[test]
        fn distributions_normalise_and_logs_stay_finite(
            (n, frames, markers, data, test) in arb_training(),
            bins in 1usize..12,
            alpha in 0.01f64..3.0,
        ) {
            let classes = LocationClassSet::centred(n, 1.0).unwrap();
            let train: Vec<DeflectionSeries> =
                data.into_iter().map(|d| series(frames, markers, d)).collect();
            let pairs: Vec<(usize, &DeflectionSeries)> = train.iter().enumerate().collect();
            let cfg = HistogramConfig { bins, alpha, time_pooling: 1 };
            let model = train_histogram_model(&pairs, &classes, &cfg).unwrap();
            for c in 0..n {
                for t in 0..model.time_bins() {
                    for d in 0..model.dims() {
                        let dist = model.distribution(c, t, d);
                        prop_assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                        prop_assert!(dist.iter().all(|p| *p > 0.0));
                    }
                }
                let e = model.edges(0);
                prop_assert!(e.windows(2).all(|w| w[1] > w[0]));
            }
            let ll = model.log_likelihoods(&series(frames, markers, test)).unwrap();
            prop_assert!(ll.iter().all(|l| l.is_finite()));
        }

        #[test]
        fn permuting_labels_permutes_decisions(
            (n, frames, markers, data, test) in arb_training(),
            rot in 0usize..4,
        ) {
            let classes = LocationClassSet::centred(n, 1.0).unwrap();
            let train: Vec<DeflectionSeries> =
                data.into_iter().map(|d| series(frames, markers, d)).collect();
            let cfg = HistogramConfig { bins: 6, ..HistogramConfig::default() };
            let plain: Vec<(usize, &DeflectionSeries)> = train.iter().enumerate().collect();
            let perm = |c: usize| (c + rot) % n;
            let rotated: Vec<(usize, &DeflectionSeries)> =
                train.iter().enumerate().map(|(c, s)| (perm(c), s)).collect();
            let m0 = train_histogram_model(&plain, &classes, &cfg).unwrap();
            let m1 = train_histogram_model(&rotated, &classes, &cfg).unwrap();
            let test = series(frames, markers, test);
            let l0 = m0.log_likelihoods(&test).unwrap();
            let l1 = m1.log_likelihoods(&test).unwrap();
            for c in 0..n {
                prop_assert_eq!(l0[c], l1[perm(c)]);
            }
            let c0 = classify_ml(&m0, &test).unwrap();
            let c1 = classify_ml(&m1, &test).unwrap();
            if !c0.tied && !c1.tied {
                prop_assert_eq!(perm(c0.class), c1.class);
            }
        }
    }
}
