//! PLS and domain-invariant PLS (di-PLS) latent-variable regression.
//!
//! A di-PLS weight direction trades off label covariance in the labeled
//! source domain against the gap between source and target variances along
//! that direction:
//!
//! ```text
//! w = argmin ||X - y w'||_F^2 + lambda * | w' Cs w - w' Ct w |
//! w' = (y'X / y'y) [ I + lambda / (2 y'y) (Cs - Ct) ]^-1
//! ```
//!
//! with `Cs = Xs'Xs / (nS - 1)` and `Ct = Xt'Xt / (nT - 1)` computed on
//! centered data. With `lambda = 0` this is the ordinary PLS weight.

mod document;
mod fit;

pub use document::{ModelDocument, MODEL_SCHEMA_VERSION};
pub use fit::{fit, Domain, FittedModel};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataset::DomainDataset;
use crate::error::{Error, Result};

/// Systems whose eigenvalue spread exceeds this are treated as singular.
const CONDITION_LIMIT: f64 = 1e12;

/// How source and target feature columns are centered before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Each domain is centered by its own feature means.
    #[default]
    PerDomain,
    /// Both domains are centered by the source feature means.
    SourceOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub n_components: usize,
    pub lambda: f64,
    pub ridge_epsilon: f64,
    pub centering: Centering,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_components: 14,
            lambda: 0.0,
            ridge_epsilon: 1e-10,
            centering: Centering::PerDomain,
        }
    }
}

impl FitConfig {
    pub fn with_components(mut self, n_components: usize) -> Self {
        self.n_components = n_components;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_centering(mut self, centering: Centering) -> Self {
        self.centering = centering;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_components == 0 {
            return Err(Error::Config("n_components must be at least 1".into()));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::Config(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        if !self.ridge_epsilon.is_finite() || self.ridge_epsilon < 0.0 {
            return Err(Error::Config(format!(
                "ridge_epsilon must be finite and non-negative, got {}",
                self.ridge_epsilon
            )));
        }
        Ok(())
    }
}

/// Means removed by [`center_domains`], kept for prediction time.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteringMeans {
    pub source_features: DVector<f64>,
    pub target_features: DVector<f64>,
    pub label: f64,
}

#[derive(Debug, Clone)]
pub struct CenteredDomains {
    pub source: DMatrix<f64>,
    pub target: DMatrix<f64>,
    pub labels: DVector<f64>,
    pub means: CenteringMeans,
}

pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

pub(crate) fn subtract_row(x: &DMatrix<f64>, means: &DVector<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for (mut col, m) in out.column_iter_mut().zip(means.iter()) {
        col.add_scalar_mut(-m);
    }
    out
}

/// Removes feature means from both domains and the label mean from the
/// source labels. Target labels, if any, are ignored.
pub fn center_domains(
    source: &DomainDataset,
    target: &DomainDataset,
    policy: Centering,
) -> Result<CenteredDomains> {
    let labels = source
        .labels()
        .ok_or_else(|| Error::InvalidInput("source dataset has no labels".into()))?;
    if source.n_features() != target.n_features() {
        return Err(Error::DimensionMismatch {
            what: "target feature count",
            expected: source.n_features(),
            got: target.n_features(),
        });
    }
    let source_means = column_means(source.features());
    let target_means = match policy {
        Centering::PerDomain => column_means(target.features()),
        Centering::SourceOnly => source_means.clone(),
    };
    let label_mean = labels.mean();
    Ok(CenteredDomains {
        source: subtract_row(source.features(), &source_means),
        target: subtract_row(target.features(), &target_means),
        labels: labels.add_scalar(-label_mean),
        means: CenteringMeans {
            source_features: source_means,
            target_features: target_means,
            label: label_mean,
        },
    })
}

/// Sample covariance `X'X / (n - 1)` of an already centered matrix.
pub fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.tr_mul(x) / (x.nrows() as f64 - 1.0)
}

fn check_xy(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "label length",
            expected: x.nrows(),
            got: y.len(),
        });
    }
    Ok(())
}

/// Unnormalized PLS weight `X'y / y'y`.
pub fn pls_weight_unnormalized(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    check_xy(x, y)?;
    let yty = y.dot(y);
    if yty == 0.0 || !yty.is_finite() {
        return Err(Error::DegenerateLabels);
    }
    Ok(x.tr_mul(y) / yty)
}

/// PLS weight direction scaled to unit Euclidean norm.
pub fn pls_weight(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    normalize(pls_weight_unnormalized(x, y)?)
}

fn normalize(w: DVector<f64>) -> Result<DVector<f64>> {
    let norm = w.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateDirection);
    }
    Ok(w / norm)
}

#[derive(Debug, Clone)]
pub struct DiplsWeight {
    /// Unit-norm weight direction.
    pub weight: DVector<f64>,
    /// `w'(Cs - Ct)w` at the returned direction. Negative values mean the
    /// absolute value in the objective is not matched by the closed form.
    pub covariance_gap: f64,
    /// Whether the ridge term had to be added to solve the system.
    pub ridge_applied: bool,
}

/// Closed-form di-PLS weight.
///
/// `x`/`y` are the labeled fit block, `xs`/`xt` the source and target blocks
/// whose covariance gap is penalized. All inputs must be centered.
pub fn dipls_weight(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    xs: &DMatrix<f64>,
    xt: &DMatrix<f64>,
    lambda: f64,
    ridge_epsilon: f64,
) -> Result<DiplsWeight> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Config(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    if !ridge_epsilon.is_finite() || ridge_epsilon < 0.0 {
        return Err(Error::Config(format!(
            "ridge_epsilon must be finite and non-negative, got {ridge_epsilon}"
        )));
    }
    check_xy(x, y)?;
    check_domains(x, xs, xt)?;

    let gap = covariance(xs) - covariance(xt);
    let raw = pls_weight_unnormalized(x, y)?;
    let (direction, ridge_applied) = if lambda == 0.0 {
        (raw, false)
    } else {
        let yty = y.dot(y);
        let mut system = gap.clone() * (lambda / (2.0 * yty));
        for i in 0..system.nrows() {
            system[(i, i)] += 1.0;
        }
        solve_symmetric(system, &raw, ridge_epsilon)?
    };
    let weight = normalize(direction)?;
    let covariance_gap = weight.dot(&(&gap * &weight));
    Ok(DiplsWeight {
        weight,
        covariance_gap,
        ridge_applied,
    })
}

fn check_domains(x: &DMatrix<f64>, xs: &DMatrix<f64>, xt: &DMatrix<f64>) -> Result<()> {
    let p = x.ncols();
    for (what, m) in [("source feature count", xs), ("target feature count", xt)] {
        if m.ncols() != p {
            return Err(Error::DimensionMismatch {
                what,
                expected: p,
                got: m.ncols(),
            });
        }
    }
    for (name, m) in [("source", xs), ("target", xt)] {
        if m.nrows() < 2 {
            return Err(Error::InvalidInput(format!(
                "{name} block needs at least 2 rows, got {}",
                m.nrows()
            )));
        }
    }
    Ok(())
}

fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let max = eig.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `m z = rhs` for symmetric `m`, adding a trace-scaled ridge when
/// `m` is numerically singular.
fn solve_symmetric(
    mut m: DMatrix<f64>,
    rhs: &DVector<f64>,
    ridge_epsilon: f64,
) -> Result<(DVector<f64>, bool)> {
    let mut ridged = false;
    let mut cond = condition_estimate(&m);
    if cond > CONDITION_LIMIT {
        let scale = m.diagonal().iter().map(|v| v.abs()).sum::<f64>() / m.nrows() as f64;
        let ridge = ridge_epsilon * scale;
        if ridge > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += ridge;
            }
            ridged = true;
            cond = condition_estimate(&m);
        }
        if cond > CONDITION_LIMIT {
            return Err(Error::IllConditioned {
                condition_estimate: cond,
            });
        }
    }
    let z = m.lu().solve(rhs).ok_or(Error::IllConditioned {
        condition_estimate: cond,
    })?;
    Ok((z, ridged))
}

/// di-PLS objective value at `w` (no norm constraint applied).
pub fn dipls_objective(
    w: &DVector<f64>,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    xs: &DMatrix<f64>,
    xt: &DMatrix<f64>,
    lambda: f64,
) -> Result<f64> {
    check_xy(x, y)?;
    check_domains(x, xs, xt)?;
    if w.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            what: "weight length",
            expected: x.ncols(),
            got: w.len(),
        });
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("weight"));
    }
    let residual = x - y * w.transpose();
    let fit_term = residual.norm_squared();
    let var_s = (xs * w).norm_squared() / (xs.nrows() as f64 - 1.0);
    let var_t = (xt * w).norm_squared() / (xt.nrows() as f64 - 1.0);
    Ok(fit_term + lambda * (var_s - var_t).abs())
}
