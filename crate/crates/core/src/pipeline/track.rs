use super::{MarkerSet, PipelineError};

/// Detections reordered to follow the previous identities.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracked {
    pub ordered: Vec<[f64; 2]>,
    pub total_distance: f64,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Index of the nearest candidate and whether another one is exactly as near.
fn nearest(from: [f64; 2], to: &[[f64; 2]], free: &[bool]) -> Option<(usize, bool)> {
    let mut best: Option<(usize, f64)> = None;
    let mut tied = false;
    for (j, p) in to.iter().enumerate() {
        if !free[j] {
            continue;
        }
        let d = dist(from, *p);
        match best {
            Some((_, bd)) if d > bd => {}
            Some((_, bd)) if d == bd => tied = true,
            _ => {
                best = Some((j, d));
                tied = false;
            }
        }
    }
    best.map(|(j, _)| (j, tied))
}

/// Greedy mutual nearest neighbour assignment of detections to identities.
///
/// Each round pairs every identity and detection that are each other's
/// nearest unassigned partner; rounds repeat until everything is paired.
pub fn track_markers(
    previous: &[[f64; 2]],
    detected: &MarkerSet,
) -> Result<Tracked, PipelineError> {
    let n = previous.len();
    if detected.len() != n {
        return Err(PipelineError::CountMismatch {
            expected: n,
            found: detected.len(),
        });
    }
    let det = &detected.centroids;
    let mut prev_free = vec![true; n];
    let mut det_free = vec![true; n];
    let mut assignment = vec![usize::MAX; n];
    let mut remaining = n;
    let mut total_distance = 0.0;
    while remaining > 0 {
        let mut paired = 0;
        let det_nearest: Vec<Option<(usize, bool)>> = (0..n)
            .map(|d| {
                if det_free[d] {
                    nearest(det[d], previous, &prev_free)
                } else {
                    None
                }
            })
            .collect();
        for p in 0..n {
            if !prev_free[p] {
                continue;
            }
            let Some((d, p_tied)) = nearest(previous[p], det, &det_free) else {
                continue;
            };
            let Some((back, d_tied)) = det_nearest[d] else {
                continue;
            };
            if back != p {
                continue;
            }
            if p_tied || d_tied {
                return Err(PipelineError::AmbiguousAssignment { detection: d });
            }
            assignment[p] = d;
            total_distance += dist(previous[p], det[d]);
            prev_free[p] = false;
            det_free[d] = false;
            paired += 1;
        }
        if paired == 0 {
            let d = det_free.iter().position(|f| *f).unwrap_or(0);
            return Err(PipelineError::AmbiguousAssignment { detection: d });
        }
        remaining -= paired;
    }
    Ok(Tracked {
        ordered: assignment.iter().map(|&d| det[d]).collect(),
        total_distance,
    })
}
