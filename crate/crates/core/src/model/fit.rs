use nalgebra::{DMatrix, DVector};

use super::{center_domains, dipls_weight, subtract_row, FitConfig};
use crate::dataset::DomainDataset;
use crate::error::{Error, Result};

/// Score norms below this fraction of the initial source norm end fitting.
const SCORE_TOLERANCE: f64 = 1e-10;
/// Residual label norms below this fraction of the initial norm end fitting.
const LABEL_TOLERANCE: f64 = 1e-12;

/// Which domain a matrix of samples belongs to; selects centering means and
/// deflation loadings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Source,
    Target,
}

/// A fitted (di-)PLS model. Immutable once built.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub(crate) weights: DMatrix<f64>,
    pub(crate) source_loadings: DMatrix<f64>,
    pub(crate) target_loadings: DMatrix<f64>,
    pub(crate) y_loadings: DVector<f64>,
    pub(crate) source_feature_means: DVector<f64>,
    pub(crate) target_feature_means: DVector<f64>,
    pub(crate) label_mean: f64,
    pub(crate) coefficients: DVector<f64>,
    pub(crate) config: FitConfig,
    pub(crate) k_requested: usize,
    pub(crate) covariance_gaps: Vec<f64>,
    pub(crate) warnings: Vec<String>,
    pub(crate) source_scores: Option<DMatrix<f64>>,
    pub(crate) target_scores: Option<DMatrix<f64>>,
}

/// Fits a di-PLS model on labeled `source` data, aligning it with unlabeled
/// `target` data. Target labels are ignored.
///
/// Components are extracted one at a time; each one deflates the source and
/// target blocks with their own loadings and the labels with the source
/// scores. When a component cannot be extracted (exhausted rank, labels fully
/// explained) fitting stops early and the model records a warning.
pub fn fit(
    config: &FitConfig,
    source: &DomainDataset,
    target: &DomainDataset,
) -> Result<FittedModel> {
    config.validate()?;
    let centered = center_domains(source, target, config.centering)?;
    let mut xs = centered.source;
    let mut xt = centered.target;
    let mut y = centered.labels;
    let (n_s, p) = xs.shape();

    let mut warnings = Vec::new();
    let k_max = (n_s - 1).min(p);
    let k_target = config.n_components.min(k_max);
    if k_target < config.n_components {
        warnings.push(format!(
            "requested {} components but at most {} are identifiable (n_source - 1 = {}, n_features = {})",
            config.n_components,
            k_max,
            n_s - 1,
            p
        ));
    }

    let x_norm0 = xs.norm();
    let y_norm0 = y.norm();
    if y_norm0 == 0.0 {
        return Err(Error::DegenerateLabels);
    }

    let mut weights = Vec::with_capacity(k_target);
    let mut p_s = Vec::with_capacity(k_target);
    let mut p_t = Vec::with_capacity(k_target);
    let mut q = Vec::with_capacity(k_target);
    let mut t_s = Vec::with_capacity(k_target);
    let mut t_t = Vec::with_capacity(k_target);
    let mut gaps = Vec::with_capacity(k_target);

    for comp in 0..k_target {
        if comp > 0 && y.norm() <= LABEL_TOLERANCE * y_norm0 {
            warnings.push(format!(
                "labels fully explained after {comp} components; stopped early"
            ));
            break;
        }
        let solved = match dipls_weight(&xs, &y, &xs, &xt, config.lambda, config.ridge_epsilon) {
            Ok(w) => w,
            Err(Error::DegenerateDirection) if comp > 0 => {
                warnings.push(format!(
                    "component {} has no label covariance left; stopped early",
                    comp + 1
                ));
                break;
            }
            Err(e) => return Err(e),
        };
        let w = solved.weight;
        let ts = &xs * &w;
        let tsts = ts.dot(&ts);
        if tsts.sqrt() <= SCORE_TOLERANCE * x_norm0 {
            if comp == 0 {
                return Err(Error::DegenerateDirection);
            }
            warnings.push(format!(
                "component {} source score norm below tolerance; stopped early",
                comp + 1
            ));
            break;
        }
        let tt = &xt * &w;
        let ttt = tt.dot(&tt);
        let ps = xs.tr_mul(&ts) / tsts;
        let pt = if ttt.sqrt() > SCORE_TOLERANCE * x_norm0 {
            xt.tr_mul(&tt) / ttt
        } else {
            DVector::zeros(p)
        };
        let qk = y.dot(&ts) / tsts;

        xs -= &ts * ps.transpose();
        xt -= &tt * pt.transpose();
        y.axpy(-qk, &ts, 1.0);

        if solved.covariance_gap < 0.0 {
            warnings.push(format!(
                "component {}: negative covariance gap {:.3e} at the closed-form weight",
                comp + 1,
                solved.covariance_gap
            ));
        }
        gaps.push(solved.covariance_gap);
        weights.push(w);
        p_s.push(ps);
        p_t.push(pt);
        q.push(qk);
        t_s.push(ts);
        t_t.push(tt);
    }

    let weights = DMatrix::from_columns(&weights);
    let source_loadings = DMatrix::from_columns(&p_s);
    let target_loadings = DMatrix::from_columns(&p_t);
    let y_loadings = DVector::from_vec(q);
    let coefficients = assemble_coefficients(&weights, &source_loadings, &y_loadings)?;

    Ok(FittedModel {
        weights,
        source_loadings,
        target_loadings,
        y_loadings,
        source_feature_means: centered.means.source_features,
        target_feature_means: centered.means.target_features,
        label_mean: centered.means.label,
        coefficients,
        config: config.clone(),
        k_requested: config.n_components,
        covariance_gaps: gaps,
        warnings,
        source_scores: Some(DMatrix::from_columns(&t_s)),
        target_scores: Some(DMatrix::from_columns(&t_t)),
    })
}

/// `b = W (P'W)^-1 q`.
pub(crate) fn assemble_coefficients(
    weights: &DMatrix<f64>,
    loadings: &DMatrix<f64>,
    y_loadings: &DVector<f64>,
) -> Result<DVector<f64>> {
    let ptw = loadings.tr_mul(weights);
    let z = ptw.lu().solve(y_loadings).ok_or(Error::IllConditioned {
        condition_estimate: f64::INFINITY,
    })?;
    Ok(weights * z)
}

impl FittedModel {
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn source_loadings(&self) -> &DMatrix<f64> {
        &self.source_loadings
    }

    pub fn target_loadings(&self) -> &DMatrix<f64> {
        &self.target_loadings
    }

    pub fn y_loadings(&self) -> &DVector<f64> {
        &self.y_loadings
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }

    pub fn source_feature_means(&self) -> &DVector<f64> {
        &self.source_feature_means
    }

    pub fn target_feature_means(&self) -> &DVector<f64> {
        &self.target_feature_means
    }

    pub fn label_mean(&self) -> f64 {
        self.label_mean
    }

    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    pub fn n_features(&self) -> usize {
        self.weights.nrows()
    }

    pub fn k_requested(&self) -> usize {
        self.k_requested
    }

    pub fn k_effective(&self) -> usize {
        self.weights.ncols()
    }

    /// `w'(Cs - Ct)w` for each extracted component, on the deflated blocks.
    pub fn covariance_gaps(&self) -> &[f64] {
        &self.covariance_gaps
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Source scores recorded during fitting. `None` for deserialized models.
    pub fn training_source_scores(&self) -> Option<&DMatrix<f64>> {
        self.source_scores.as_ref()
    }

    /// Target scores recorded during fitting. `None` for deserialized models.
    pub fn training_target_scores(&self) -> Option<&DMatrix<f64>> {
        self.target_scores.as_ref()
    }

    fn means(&self, domain: Domain) -> &DVector<f64> {
        match domain {
            Domain::Source => &self.source_feature_means,
            Domain::Target => &self.target_feature_means,
        }
    }

    fn check_columns(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                what: "feature columns",
                expected: self.n_features(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Predicted labels (dB) for rows of `x`, centered with the means of
    /// `domain`.
    pub fn predict(&self, x: &DMatrix<f64>, domain: Domain) -> Result<DVector<f64>> {
        self.check_columns(x)?;
        let centered = subtract_row(x, self.means(domain));
        Ok((centered * &self.coefficients).add_scalar(self.label_mean))
    }

    /// Scores of the first `k` latent variables, computed with the same
    /// sequential deflation used during fitting.
    pub fn project(&self, x: &DMatrix<f64>, k: usize, domain: Domain) -> Result<DMatrix<f64>> {
        self.check_columns(x)?;
        if k == 0 || k > self.k_effective() {
            return Err(Error::InvalidInput(format!(
                "cannot project onto {k} latent variables; model has {}",
                self.k_effective()
            )));
        }
        let loadings = match domain {
            Domain::Source => &self.source_loadings,
            Domain::Target => &self.target_loadings,
        };
        let mut residual = subtract_row(x, self.means(domain));
        let mut scores = DMatrix::zeros(x.nrows(), k);
        for j in 0..k {
            let t = &residual * self.weights.column(j);
            residual -= &t * loadings.column(j).transpose();
            scores.set_column(j, &t);
        }
        Ok(scores)
    }
}
