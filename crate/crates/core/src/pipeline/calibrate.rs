use crate::series::{Calibration, DeflectionSeries, SeriesError};

/// A series subtracted from others to remove the whisking self-motion.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSignal {
    pub series: DeflectionSeries,
    pub kind: Calibration,
}

/// Element-wise mean of repeated reference recordings.
pub fn average_reference(
    repeats: &[DeflectionSeries],
    kind: Calibration,
) -> Result<ReferenceSignal, SeriesError> {
    let first = repeats
        .first()
        .ok_or_else(|| SeriesError::Header("no reference repeats".into()))?;
    let mut series = first.clone();
    for r in &repeats[1..] {
        first.check_shape(r)?;
        for (acc, v) in series.data_mut().iter_mut().zip(r.data()) {
            *acc += v;
        }
    }
    let n = repeats.len() as f64;
    for v in series.data_mut() {
        *v /= n;
    }
    Ok(ReferenceSignal { series, kind })
}

pub fn subtract_reference(
    series: &DeflectionSeries,
    reference: &ReferenceSignal,
) -> Result<DeflectionSeries, SeriesError> {
    series.check_shape(&reference.series)?;
    let mut out = series.clone();
    for (v, r) in out.data_mut().iter_mut().zip(reference.series.data()) {
        *v -= r;
    }
    out.meta.calibrated = reference.kind;
    Ok(out)
}
