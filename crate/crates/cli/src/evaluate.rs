use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dipls_core::evaluation::{
    evaluate, latent_csv, EvaluationReport, FeatureKind, MetricRecord, ModelKind,
    BENCHMARK_LAMBDA, REPORT_SCHEMA_VERSION,
};
use dipls_core::io::{load_dataset_file, to_sorted_json, write_text, Manifest};
use dipls_core::{Centering, DomainDataset, Error, FitConfig, Result};
use serde::{Deserialize, Serialize};

use crate::sibling;

#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    pub model: ModelKind,
    /// Defaults to the benchmark value for di-PLS; PLS always uses 0.
    pub lambda: Option<f64>,
    pub components: usize,
    pub features: FeatureKind,
    pub centering: Centering,
    pub jobs: usize,
    /// Geometric λ grid `(low, high, points)` evaluated in addition to the
    /// main run.
    pub lambda_sweep: Option<(f64, f64, usize)>,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        Self {
            model: ModelKind::Dipls,
            lambda: None,
            components: FitConfig::default().n_components,
            features: FeatureKind::Acceleration,
            centering: Centering::PerDomain,
            jobs: 1,
            lambda_sweep: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub aggregate: MetricRecord,
    pub fold_mse: BTreeMap<String, f64>,
    pub fold_wasserstein_2lv: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub feature_kind: FeatureKind,
    pub n_components: usize,
    pub points: Vec<SweepPoint>,
}

/// `points` values spaced evenly in log scale from `low` to `high`.
pub fn geometric_sweep(low: f64, high: f64, points: usize) -> Result<Vec<f64>> {
    if !(low > 0.0 && high >= low && high.is_finite()) || points == 0 {
        return Err(Error::Config(format!(
            "lambda sweep needs 0 < low <= high and at least one point, got {low}:{high}:{points}"
        )));
    }
    if points == 1 {
        return Ok(vec![low]);
    }
    let ratio = (high / low).ln() / (points - 1) as f64;
    Ok((0..points).map(|i| low * (ratio * i as f64).exp()).collect())
}

fn expand(input: &str) -> Result<Vec<PathBuf>> {
    let path = Path::new(input);
    let pattern = if path.is_dir() {
        path.join("*.csv").to_string_lossy().into_owned()
    } else {
        input.to_string()
    };
    let paths = glob::glob(&pattern)
        .map_err(|e| Error::InvalidInput(format!("bad dataset pattern {input:?}: {e}")))?;
    let mut out = Vec::new();
    for p in paths {
        let p = p.map_err(|e| Error::io(e.path(), std::io::Error::other(e.to_string())))?;
        if p.is_file() {
            out.push(p);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidInput(format!("no dataset files match {input:?}")));
    }
    Ok(out)
}

/// Loads every dataset CSV matched by `inputs` (globs or directories). All
/// files must share the same feature columns.
pub fn load_datasets(inputs: &[String]) -> Result<(Manifest, Vec<DomainDataset>)> {
    let mut paths: Vec<PathBuf> = inputs
        .iter()
        .map(|s| expand(s))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    paths.sort();
    paths.dedup();
    let mut reference: Option<Manifest> = None;
    let mut datasets = Vec::new();
    for path in &paths {
        let (manifest, mut ds) = load_dataset_file(path)?;
        match &reference {
            None => reference = Some(manifest),
            Some(r) if r.features != manifest.features => {
                return Err(Error::Mismatch(format!(
                    "{} has different feature columns than {}",
                    path.display(),
                    paths[0].display()
                )))
            }
            Some(_) => {}
        }
        datasets.append(&mut ds);
    }
    let manifest = reference.ok_or_else(|| Error::InvalidInput("no dataset files".into()))?;
    Ok((manifest, datasets))
}

fn select(datasets: &[DomainDataset], manifest: &Manifest, kind: FeatureKind) -> Result<Vec<DomainDataset>> {
    let columns = kind.columns(&manifest.feature_kinds());
    if columns.is_empty() {
        return Err(Error::InvalidInput(format!("the datasets have no {kind:?} features")));
    }
    datasets.iter().map(|d| d.select_features(&columns)).collect()
}

/// Runs leave-one-condition-out evaluation and writes the report to `out`,
/// latent scores to `<out stem>_latent/<condition>.csv` and, with a sweep,
/// `<out stem>_sweep.json`.
pub fn cmd_evaluate(inputs: &[String], out: &Path, options: &EvaluateOptions) -> Result<EvaluationReport> {
    let (manifest, datasets) = load_datasets(inputs)?;
    let datasets = select(&datasets, &manifest, options.features)?;
    let lambda = match options.model {
        ModelKind::Pls => 0.0,
        ModelKind::Dipls => options.lambda.unwrap_or(BENCHMARK_LAMBDA),
    };
    let config = FitConfig::default()
        .with_components(options.components)
        .with_lambda(lambda)
        .with_centering(options.centering);
    let report = evaluate(&datasets, options.model, options.features, &config, options.jobs)?;

    let sweep = match options.lambda_sweep {
        Some((low, high, points)) => {
            let mut out_points = Vec::new();
            for l in geometric_sweep(low, high, points)? {
                let r = evaluate(
                    &datasets,
                    ModelKind::Dipls,
                    options.features,
                    &config.clone().with_lambda(l),
                    options.jobs,
                )?;
                out_points.push(SweepPoint {
                    lambda: l,
                    fold_mse: r
                        .folds
                        .iter()
                        .map(|f| (f.target_condition_id.clone(), f.per_fold_metrics.mse))
                        .collect(),
                    fold_wasserstein_2lv: r
                        .folds
                        .iter()
                        .map(|f| (f.target_condition_id.clone(), f.wasserstein_2lv))
                        .collect(),
                    aggregate: r.aggregate,
                });
            }
            Some(SweepReport {
                schema_version: REPORT_SCHEMA_VERSION,
                feature_kind: options.features,
                n_components: options.components,
                points: out_points,
            })
        }
        None => None,
    };

    write_text(out, &report.to_json()?)?;
    let latent_dir = sibling(out, "_latent");
    for fold in &report.folds {
        let path = latent_dir.join(format!("{}.csv", fold.target_condition_id));
        write_text(&path, &latent_csv(fold)?)?;
    }
    if let Some(s) = sweep {
        write_text(&sibling(out, "_sweep.json"), &to_sorted_json(&s)?)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_is_geometric() {
        let s = geometric_sweep(1.0, 1000.0, 4).unwrap();
        for (a, b) in s.iter().zip([1.0, 10.0, 100.0, 1000.0]) {
            assert!((a - b).abs() < 1e-9 * b);
        }
        assert_eq!(geometric_sweep(5.0, 9.0, 1).unwrap(), vec![5.0]);
        assert!(geometric_sweep(0.0, 1.0, 3).is_err());
        assert!(geometric_sweep(2.0, 1.0, 3).is_err());
    }

    #[test]
    fn missing_files_are_reported() {
        let err = expand("/nonexistent/dir/*.csv").unwrap_err();
        assert!(err.to_string().contains("no dataset files"));
    }
}
