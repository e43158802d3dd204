use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regression metrics in engineering units. Errors are in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    /// Mean squared error, dB^2.
    pub mse: f64,
    pub rmse: f64,
    /// `None` when the true labels have zero variance.
    pub r2: Option<f64>,
    pub r2_defined: bool,
    /// Fraction of samples with |error| < 2 dB.
    pub acc_lt2db: f64,
    /// Fraction of samples with |error| < 3 dB.
    pub acc_lt3db: f64,
    pub n: usize,
}

pub fn compute_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<MetricRecord> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            what: "prediction length",
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    let n = y_true.len();
    if n == 0 {
        return Err(Error::InvalidInput("metrics need at least one sample".into()));
    }
    let nf = n as f64;
    let mut sse = 0.0;
    let mut within2 = 0usize;
    let mut within3 = 0usize;
    for (t, p) in y_true.iter().zip(y_pred) {
        let e = p - t;
        sse += e * e;
        if e.abs() < 2.0 {
            within2 += 1;
        }
        if e.abs() < 3.0 {
            within3 += 1;
        }
    }
    let mean = y_true.iter().sum::<f64>() / nf;
    let sst: f64 = y_true.iter().map(|t| (t - mean).powi(2)).sum();
    let r2 = (sst > 0.0).then(|| 1.0 - sse / sst);
    let mse = sse / nf;
    Ok(MetricRecord {
        mse,
        rmse: mse.sqrt(),
        r2,
        r2_defined: r2.is_some(),
        acc_lt2db: within2 as f64 / nf,
        acc_lt3db: within3 as f64 / nf,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let y = [40.0, 45.0, 52.0];
        let m = compute_metrics(&y, &y).unwrap();
        assert_eq!(m.mse, 0.0);
        assert_eq!(m.r2, Some(1.0));
        assert_eq!((m.acc_lt2db, m.acc_lt3db), (1.0, 1.0));
    }

    #[test]
    fn hand_computed_error_triple() {
        let t = [50.0, 50.0, 50.0];
        let p = [51.5, 47.5, 53.5];
        let m = compute_metrics(&t, &p).unwrap();
        assert!((m.acc_lt2db - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.acc_lt3db - 2.0 / 3.0).abs() < 1e-15);
        // (2.25 + 6.25 + 12.25) / 3
        assert!((m.mse - 6.916_666_666_666_667).abs() < 1e-12);
        assert_eq!(m.r2, None);
        assert!(!m.r2_defined);
    }

    #[test]
    fn mean_predictor_has_zero_r2() {
        let t = [40.0, 44.0, 47.0, 49.0];
        let mean = t.iter().sum::<f64>() / 4.0;
        let m = compute_metrics(&t, &[mean; 4]).unwrap();
        assert!(m.r2.unwrap().abs() < 1e-15);
    }

    #[test]
    fn thresholds_are_strict() {
        let m = compute_metrics(&[0.0, 0.0], &[2.0, -3.0]).unwrap();
        assert_eq!(m.acc_lt2db, 0.0);
        assert_eq!(m.acc_lt3db, 0.5);
    }

    #[test]
    fn length_errors() {
        assert!(compute_metrics(&[1.0], &[1.0, 2.0]).is_err());
        assert!(compute_metrics(&[], &[]).is_err());
    }
}
