//! Versioned JSON form of a fitted model. Matrices are stored row-major.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::fit::{assemble_coefficients, FittedModel};
use super::FitConfig;
use crate::error::{Error, Result};
use crate::io::to_sorted_json;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub config: FitConfig,
    pub k_requested: usize,
    pub k_effective: usize,
    pub n_features: usize,
    pub weights: Vec<Vec<f64>>,
    pub source_loadings: Vec<Vec<f64>>,
    pub target_loadings: Vec<Vec<f64>>,
    pub y_loadings: Vec<f64>,
    pub source_feature_means: Vec<f64>,
    pub target_feature_means: Vec<f64>,
    pub label_mean: f64,
    pub coefficients: Vec<f64>,
    pub covariance_gaps: Vec<f64>,
    pub warnings: Vec<String>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(name: &str, rows: &[Vec<f64>], n: usize, k: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidInput(format!(
            "model field {name} must be {n} x {k}"
        )));
    }
    Ok(DMatrix::from_fn(n, k, |i, j| rows[i][j]))
}

fn vector(name: &str, v: &[f64], n: usize) -> Result<DVector<f64>> {
    if v.len() != n {
        return Err(Error::InvalidInput(format!(
            "model field {name} must have length {n}, got {}",
            v.len()
        )));
    }
    Ok(DVector::from_column_slice(v))
}

impl From<&FittedModel> for ModelDocument {
    fn from(m: &FittedModel) -> Self {
        Self {
            schema_version: MODEL_SCHEMA_VERSION,
            config: m.config.clone(),
            k_requested: m.k_requested,
            k_effective: m.k_effective(),
            n_features: m.n_features(),
            weights: rows(&m.weights),
            source_loadings: rows(&m.source_loadings),
            target_loadings: rows(&m.target_loadings),
            y_loadings: m.y_loadings.iter().copied().collect(),
            source_feature_means: m.source_feature_means.iter().copied().collect(),
            target_feature_means: m.target_feature_means.iter().copied().collect(),
            label_mean: m.label_mean,
            coefficients: m.coefficients.iter().copied().collect(),
            covariance_gaps: m.covariance_gaps.clone(),
            warnings: m.warnings.clone(),
        }
    }
}

impl ModelDocument {
    pub fn into_model(self) -> Result<FittedModel> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model schema_version {}",
                self.schema_version
            )));
        }
        let (p, k) = (self.n_features, self.k_effective);
        let weights = matrix("weights", &self.weights, p, k)?;
        let source_loadings = matrix("source_loadings", &self.source_loadings, p, k)?;
        let target_loadings = matrix("target_loadings", &self.target_loadings, p, k)?;
        let y_loadings = vector("y_loadings", &self.y_loadings, k)?;
        let coefficients = vector("coefficients", &self.coefficients, p)?;
        let rebuilt = assemble_coefficients(&weights, &source_loadings, &y_loadings)?;
        let scale = coefficients.amax().max(1.0);
        if (&rebuilt - &coefficients).amax() > 1e-8 * scale {
            return Err(Error::InvalidInput(
                "model coefficients are inconsistent with weights and loadings".into(),
            ));
        }
        Ok(FittedModel {
            weights,
            source_loadings,
            target_loadings,
            y_loadings,
            source_feature_means: vector("source_feature_means", &self.source_feature_means, p)?,
            target_feature_means: vector("target_feature_means", &self.target_feature_means, p)?,
            label_mean: self.label_mean,
            coefficients,
            config: self.config,
            k_requested: self.k_requested,
            covariance_gaps: self.covariance_gaps,
            warnings: self.warnings,
            source_scores: None,
            target_scores: None,
        })
    }
}

impl FittedModel {
    pub fn to_json(&self) -> Result<String> {
        to_sorted_json(&ModelDocument::from(self))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| Error::json("model document", e))?;
        doc.into_model()
    }
}

#[cfg(test)]
mod tests {
    use crate::dataset::DomainDataset;
    use crate::model::{fit, Domain, FitConfig, FittedModel};
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn json_roundtrip_preserves_predictions() {
        let x = DMatrix::from_fn(12, 3, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let y = DVector::from_fn(12, |i, _| x[(i, 0)] * 0.5 - x[(i, 2)] + 40.0);
        let s = DomainDataset::from_matrix(x.clone(), Some(y), "s").unwrap();
        let t = DomainDataset::from_matrix(x.map(|v| v * 1.3 + 1.0), None, "t").unwrap();
        let m = fit(&FitConfig::default().with_components(2).with_lambda(1.0), &s, &t).unwrap();
        let text = m.to_json().unwrap();
        assert!(text.contains("\"k_effective\": 2"));
        assert!(text.contains("\"schema_version\": 1"));
        let back = FittedModel::from_json(&text).unwrap();
        assert_eq!(
            m.predict(&x, Domain::Target).unwrap(),
            back.predict(&x, Domain::Target).unwrap()
        );
        assert!(back.training_source_scores().is_none());
    }

    #[test]
    fn rejects_wrong_schema_version() {
        let x = DMatrix::from_fn(6, 2, |i, j| (i + 2 * j) as f64 + (i * i) as f64);
        let y = DVector::from_fn(6, |i, _| i as f64);
        let s = DomainDataset::from_matrix(x, Some(y), "s").unwrap();
        let m = fit(&FitConfig::default().with_components(1), &s, &s).unwrap();
        let text = m.to_json().unwrap().replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(FittedModel::from_json(&text).is_err());
    }
}
