use rand::Rng;
use rayon::prelude::*;

use super::{
    classify_ml, train_histogram_model, HistogramConfig, LocationClassSet, PerceptionError,
};
use crate::seed;
use crate::series::DeflectionSeries;

/// Repeated runs over the same location classes: `runs[r][c]` is run `r` at
/// class `c`.
#[derive(Debug, Clone)]
pub struct LabeledRuns {
    pub classes: LocationClassSet,
    pub runs: Vec<Vec<DeflectionSeries>>,
}

impl LabeledRuns {
    pub fn new(
        classes: LocationClassSet,
        runs: Vec<Vec<DeflectionSeries>>,
    ) -> Result<Self, PerceptionError> {
        let shape = runs
            .first()
            .and_then(|r| r.first())
            .map(DeflectionSeries::shape);
        for run in &runs {
            if run.len() != classes.len() {
                return Err(PerceptionError::MissingClass(run.len().min(classes.len())));
            }
            for s in run {
                if Some(s.shape()) != shape {
                    return Err(PerceptionError::ShapeMismatch {
                        expected: shape.unwrap_or_default(),
                        found: s.shape(),
                    });
                }
            }
        }
        Ok(Self { classes, runs })
    }

    /// Every series of one run, labelled by class index.
    pub fn run(&self, r: usize) -> Vec<(usize, &DeflectionSeries)> {
        self.runs[r].iter().enumerate().collect()
    }

    /// Every series of every run, labelled by class index.
    pub fn all(&self) -> Vec<(usize, &DeflectionSeries)> {
        self.runs
            .iter()
            .flat_map(|run| run.iter().enumerate())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub train_run: usize,
    pub test_run: usize,
    pub class: usize,
    pub truth_mm: f64,
    pub perceived_class: usize,
    pub perceived_mm: f64,
    pub tied: bool,
}

impl Sample {
    pub fn error_mm(&self) -> f64 {
        self.perceived_mm - self.truth_mm
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSummary {
    pub label: f64,
    pub count: usize,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionReport {
    pub samples: Vec<Sample>,
    /// Percentiles of the perceived location for each ground-truth class.
    pub per_class: Vec<ClassSummary>,
    /// Interquartile range of the pooled signed localization error.
    pub iqr_mm: f64,
    /// Mean over classes of the 25th–75th percentile band of perceived location.
    pub band_iqr_mm: f64,
    pub mean_abs_error_mm: f64,
    pub median_abs_error_mm: f64,
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 100].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

impl PerceptionReport {
    pub fn from_samples(classes: &LocationClassSet, samples: Vec<Sample>) -> Self {
        let mut per_class_values = vec![Vec::new(); classes.len()];
        for s in &samples {
            per_class_values[s.class].push(s.perceived_mm);
        }
        let per_class: Vec<ClassSummary> = per_class_values
            .into_iter()
            .enumerate()
            .map(|(c, v)| {
                let v = sorted(v);
                ClassSummary {
                    label: classes.label(c),
                    count: v.len(),
                    median: percentile(&v, 50.0),
                    p25: percentile(&v, 25.0),
                    p75: percentile(&v, 75.0),
                }
            })
            .collect();
        let bands: Vec<f64> = per_class
            .iter()
            .filter(|c| c.count > 0)
            .map(|c| c.p75 - c.p25)
            .collect();
        let band_iqr_mm = bands.iter().sum::<f64>() / bands.len().max(1) as f64;
        let errors = sorted(samples.iter().map(Sample::error_mm).collect());
        let abs = sorted(errors.iter().map(|e| e.abs()).collect());
        let n = abs.len().max(1) as f64;
        Self {
            per_class,
            iqr_mm: percentile(&errors, 75.0) - percentile(&errors, 25.0),
            band_iqr_mm,
            mean_abs_error_mm: abs.iter().sum::<f64>() / n,
            median_abs_error_mm: percentile(&abs, 50.0),
            samples,
        }
    }
}

/// Monte Carlo cross validation: each sample trains on one random run and
/// classifies a random class from a different random run.
///
/// Sample `i` draws from its own seed, so the report does not depend on
/// thread count. Models are trained once per training run and shared.
pub fn monte_carlo_cross_validate(
    data: &LabeledRuns,
    config: &HistogramConfig,
    n_samples: usize,
    seed: u64,
) -> Result<PerceptionReport, PerceptionError> {
    let runs = data.runs.len();
    if runs < 2 {
        return Err(PerceptionError::InsufficientRuns(runs));
    }
    config.validate()?;
    let n_classes = data.classes.len();
    let draws: Vec<(usize, usize, usize)> = (0..n_samples)
        .map(|i| {
            let mut rng = seed::rng(seed::derive(
                seed,
                &[seed::domain::CROSS_VALIDATION, i as u64],
            ));
            let train = rng.random_range(0..runs);
            let mut test = rng.random_range(0..runs - 1);
            if test >= train {
                test += 1;
            }
            (train, test, rng.random_range(0..n_classes))
        })
        .collect();

    let mut samples: Vec<Option<Sample>> = vec![None; n_samples];
    for train in 0..runs {
        let members: Vec<usize> = (0..n_samples).filter(|&i| draws[i].0 == train).collect();
        if members.is_empty() {
            continue;
        }
        let model = train_histogram_model(&data.run(train), &data.classes, config)?;
        let results: Vec<Result<(usize, Sample), PerceptionError>> = members
            .par_iter()
            .map(|&i| {
                let (_, test, class) = draws[i];
                let c = classify_ml(&model, &data.runs[test][class])?;
                Ok((
                    i,
                    Sample {
                        train_run: train,
                        test_run: test,
                        class,
                        truth_mm: data.classes.label(class),
                        perceived_class: c.class,
                        perceived_mm: data.classes.label(c.class),
                        tied: c.tied,
                    },
                ))
            })
            .collect();
        for r in results {
            let (i, s) = r?;
            samples[i] = Some(s);
        }
    }
    let samples = samples
        .into_iter()
        .map(|s| s.expect("every sample assigned"))
        .collect();
    Ok(PerceptionReport::from_samples(&data.classes, samples))
}
