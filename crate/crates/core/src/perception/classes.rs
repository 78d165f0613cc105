use super::PerceptionError;

/// Uniformly spaced location labels in mm, strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationClassSet {
    labels: Vec<f64>,
}

impl LocationClassSet {
    /// `n` labels at `spacing`, the first at `first`.
    pub fn uniform(first: f64, spacing: f64, n: usize) -> Result<Self, PerceptionError> {
        if n == 0 {
            return Err(PerceptionError::InvalidConfig(
                "need at least one class".into(),
            ));
        }
        if !(spacing > 0.0) || !first.is_finite() {
            return Err(PerceptionError::InvalidConfig(format!(
                "class spacing must be positive, got {spacing}"
            )));
        }
        Ok(Self {
            labels: (0..n).map(|i| first + spacing * i as f64).collect(),
        })
    }

    /// Rebuilds a set from stored labels, checking uniform spacing.
    pub fn from_labels(labels: Vec<f64>) -> Result<Self, PerceptionError> {
        if labels.is_empty() {
            return Err(PerceptionError::InvalidConfig(
                "need at least one class".into(),
            ));
        }
        if labels.len() > 1 {
            let spacing = labels[1] - labels[0];
            let uniform = labels.windows(2).all(|w| {
                let d = w[1] - w[0];
                d > 0.0 && (d - spacing).abs() <= 1e-9 * spacing.max(1.0)
            });
            if !uniform {
                return Err(PerceptionError::InvalidConfig(
                    "labels must be strictly increasing and uniformly spaced".into(),
                ));
            }
        }
        Ok(Self { labels })
    }

    /// `n` bins of width `spacing` tiling a range centred on zero, labelled
    /// at their centres.
    pub fn centred(n: usize, spacing: f64) -> Result<Self, PerceptionError> {
        Self::uniform(-(n as f64 - 1.0) * spacing / 2.0, spacing, n)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn spacing(&self) -> f64 {
        if self.labels.len() < 2 {
            return 1.0;
        }
        self.labels[1] - self.labels[0]
    }

    pub fn first(&self) -> f64 {
        self.labels[0]
    }

    pub fn last(&self) -> f64 {
        self.labels[self.labels.len() - 1]
    }

    /// Index of the label nearest to `x`, clamped to the range.
    pub fn nearest_index(&self, x: f64) -> usize {
        let k = ((x - self.first()) / self.spacing()).round();
        k.clamp(0.0, (self.len() - 1) as f64) as usize
    }

    /// Index of the centre class, `N/2` counted from one.
    pub fn centre_index(&self) -> usize {
        (self.len() - 1) / 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centred_labels_sit_on_half_millimetres() {
        let c = LocationClassSet::centred(40, 1.0).unwrap();
        assert_eq!(c.first(), -19.5);
        assert_eq!(c.last(), 19.5);
        assert_eq!(c.label(c.centre_index()), -0.5);
        let s = LocationClassSet::centred(50, 1.0).unwrap();
        assert_eq!((s.first(), s.last()), (-24.5, 24.5));
    }

    #[test]
    fn nearest_index_clamps() {
        let c = LocationClassSet::centred(40, 1.0).unwrap();
        assert_eq!(c.nearest_index(-100.0), 0);
        assert_eq!(c.nearest_index(100.0), 39);
        assert_eq!(c.nearest_index(0.4), 20);
        assert_eq!(c.nearest_index(-0.6), 19);
    }

    #[test]
    fn rejects_bad_sets() {
        assert!(LocationClassSet::uniform(0.0, 1.0, 0).is_err());
        assert!(LocationClassSet::uniform(0.0, 0.0, 3).is_err());
    }
}
