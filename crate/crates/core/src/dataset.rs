//! Feature matrices tagged with the operating condition they were recorded under.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Samples from one operating condition (or a merge of several).
///
/// Rows are samples, columns are features in a fixed order. Labels are the
/// dB sound-pressure level of the 2f tone and may be absent for unlabeled
/// target data.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    features: DMatrix<f64>,
    labels: Option<DVector<f64>>,
    condition_id: String,
    sample_ids: Vec<String>,
}

impl DomainDataset {
    pub fn new(
        features: DMatrix<f64>,
        labels: Option<DVector<f64>>,
        condition_id: impl Into<String>,
        sample_ids: Vec<String>,
    ) -> Result<Self> {
        let (n, p) = features.shape();
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "a dataset needs at least 2 samples, got {n}"
            )));
        }
        if p < 1 {
            return Err(Error::InvalidInput("a dataset needs at least 1 feature".into()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        if let Some(y) = &labels {
            if y.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "labels",
                    expected: n,
                    got: y.len(),
                });
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("labels"));
            }
        }
        if sample_ids.len() != n {
            return Err(Error::DimensionMismatch {
                what: "sample ids",
                expected: n,
                got: sample_ids.len(),
            });
        }
        Ok(Self {
            features,
            labels,
            condition_id: condition_id.into(),
            sample_ids,
        })
    }

    /// Builds a dataset with generated sample ids `"<condition>-<index>"`.
    pub fn from_matrix(
        features: DMatrix<f64>,
        labels: Option<DVector<f64>>,
        condition_id: impl Into<String>,
    ) -> Result<Self> {
        let condition_id = condition_id.into();
        let ids = (0..features.nrows())
            .map(|i| format!("{condition_id}-{i:04}"))
            .collect();
        Self::new(features, labels, condition_id, ids)
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&DVector<f64>> {
        self.labels.as_ref()
    }

    pub fn condition_id(&self) -> &str {
        &self.condition_id
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Same samples with labels dropped.
    pub fn without_labels(&self) -> Self {
        Self {
            labels: None,
            ..self.clone()
        }
    }

    /// Keeps only the listed feature columns, in the given order.
    pub fn select_features(&self, columns: &[usize]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidInput("feature selection is empty".into()));
        }
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.n_features()) {
            return Err(Error::InvalidInput(format!(
                "feature column {bad} out of range (dataset has {})",
                self.n_features()
            )));
        }
        let features = self.features.select_columns(columns);
        Self::new(
            features,
            self.labels.clone(),
            self.condition_id.clone(),
            self.sample_ids.clone(),
        )
    }

    /// Stacks datasets row-wise. Labels survive only if every part has them.
    pub fn concat(parts: &[&DomainDataset], condition_id: impl Into<String>) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("nothing to concatenate".into()))?;
        let p = first.n_features();
        if let Some(bad) = parts.iter().find(|d| d.n_features() != p) {
            return Err(Error::DimensionMismatch {
                what: "feature count while concatenating",
                expected: p,
                got: bad.n_features(),
            });
        }
        let n: usize = parts.iter().map(|d| d.n_samples()).sum();
        let mut features = DMatrix::zeros(n, p);
        let mut row = 0;
        for d in parts {
            features
                .rows_mut(row, d.n_samples())
                .copy_from(&d.features);
            row += d.n_samples();
        }
        let labels = if parts.iter().all(|d| d.labels.is_some()) {
            Some(DVector::from_iterator(
                n,
                parts
                    .iter()
                    .flat_map(|d| d.labels.as_ref().unwrap().iter().copied()),
            ))
        } else {
            None
        };
        let ids = parts
            .iter()
            .flat_map(|d| d.sample_ids.iter().cloned())
            .collect();
        Self::new(features, labels, condition_id, ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_single_sample() {
        let err = DomainDataset::from_matrix(DMatrix::zeros(1, 3), None, "c").unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn rejects_nan() {
        let mut x = DMatrix::zeros(3, 2);
        x[(1, 1)] = f64::NAN;
        assert!(matches!(
            DomainDataset::from_matrix(x, None, "c"),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn rejects_label_length_mismatch() {
        let x = DMatrix::zeros(3, 2);
        let y = DVector::zeros(2);
        assert!(matches!(
            DomainDataset::from_matrix(x, Some(y), "c"),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn concat_stacks_rows_and_labels() {
        let a = DomainDataset::from_matrix(
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            Some(DVector::from_vec(vec![1.0, 2.0])),
            "a",
        )
        .unwrap();
        let b = DomainDataset::from_matrix(
            DMatrix::from_row_slice(2, 2, &[5.0, 6.0, 7.0, 8.0]),
            Some(DVector::from_vec(vec![3.0, 4.0])),
            "b",
        )
        .unwrap();
        let c = DomainDataset::concat(&[&a, &b], "ab").unwrap();
        assert_eq!(c.n_samples(), 4);
        assert_eq!(c.features()[(3, 1)], 8.0);
        assert_eq!(c.labels().unwrap().as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(c.sample_ids()[2], "b-0000");

        let c = DomainDataset::concat(&[&a, &b.without_labels()], "ab").unwrap();
        assert!(c.labels().is_none());
    }
}
