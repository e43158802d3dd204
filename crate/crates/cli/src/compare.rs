use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use dipls_core::evaluation::{EvaluationReport, FeatureKind, MetricRecord, ModelKind};
use dipls_core::io::{read_text, to_sorted_json, write_text};
use dipls_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::sibling;

pub const COMPARISON_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportInfo {
    pub label: String,
    pub model_kind: ModelKind,
    pub feature_kind: FeatureKind,
    pub lambda: f64,
    pub n_components: usize,
}

/// Metrics of one side, with the latent alignment when it applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub mse: f64,
    pub rmse: f64,
    pub r2: Option<f64>,
    pub acc_lt2db: f64,
    pub acc_lt3db: f64,
    pub wasserstein_2lv: Option<f64>,
}

impl Scores {
    fn new(m: &MetricRecord, w: Option<f64>) -> Self {
        Self {
            mse: m.mse,
            rmse: m.rmse,
            r2: m.r2,
            acc_lt2db: m.acc_lt2db,
            acc_lt3db: m.acc_lt3db,
            wasserstein_2lv: w,
        }
    }

    /// `other - self`, field by field.
    fn delta(&self, other: &Self) -> Self {
        let opt = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| b - a);
        Self {
            mse: other.mse - self.mse,
            rmse: other.rmse - self.rmse,
            r2: opt(self.r2, other.r2),
            acc_lt2db: other.acc_lt2db - self.acc_lt2db,
            acc_lt3db: other.acc_lt3db - self.acc_lt3db,
            wasserstein_2lv: opt(self.wasserstein_2lv, other.wasserstein_2lv),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub condition_id: String,
    pub a: Scores,
    pub b: Scores,
    /// `b - a`.
    pub delta: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scatter {
    pub condition_id: String,
    pub sample_ids: Vec<String>,
    pub y_true: Vec<f64>,
    pub a_pred: Vec<f64>,
    pub b_pred: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub schema_version: u32,
    pub a: ReportInfo,
    pub b: ReportInfo,
    pub conditions: Vec<Row>,
    pub aggregate: Row,
    pub scatter: Vec<Scatter>,
}

fn load(path: &Path) -> Result<EvaluationReport> {
    EvaluationReport::from_json(&read_text(path)?)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn info(path: &Path, r: &EvaluationReport) -> ReportInfo {
    ReportInfo {
        label: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        model_kind: r.model_kind,
        feature_kind: r.feature_kind,
        lambda: r.config.lambda,
        n_components: r.config.n_components,
    }
}

/// Joins two reports on condition id.
pub fn compare_reports(a: &EvaluationReport, b: &EvaluationReport, a_info: ReportInfo, b_info: ReportInfo) -> Result<Comparison> {
    let ids = |r: &EvaluationReport| -> BTreeSet<String> {
        r.folds.iter().map(|f| f.target_condition_id.clone()).collect()
    };
    let (ia, ib) = (ids(a), ids(b));
    if ia != ib {
        let list = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(", ");
        return Err(Error::Mismatch(format!(
            "condition sets differ: {} has [{}], {} has [{}]",
            a_info.label,
            list(&ia),
            b_info.label,
            list(&ib)
        )));
    }
    let mut conditions = Vec::new();
    let mut scatter = Vec::new();
    for id in &ia {
        let (fa, fb) = (a.fold(id).unwrap(), b.fold(id).unwrap());
        if fa.sample_ids != fb.sample_ids || fa.y_true != fb.y_true {
            return Err(Error::Mismatch(format!(
                "condition {id:?} holds different samples in the two reports"
            )));
        }
        let sa = Scores::new(&fa.per_fold_metrics, Some(fa.wasserstein_2lv));
        let sb = Scores::new(&fb.per_fold_metrics, Some(fb.wasserstein_2lv));
        conditions.push(Row {
            condition_id: id.clone(),
            delta: sa.delta(&sb),
            a: sa,
            b: sb,
        });
        scatter.push(Scatter {
            condition_id: id.clone(),
            sample_ids: fa.sample_ids.clone(),
            y_true: fa.y_true.clone(),
            a_pred: fa.y_pred.clone(),
            b_pred: fb.y_pred.clone(),
        });
    }
    let (sa, sb) = (Scores::new(&a.aggregate, None), Scores::new(&b.aggregate, None));
    Ok(Comparison {
        schema_version: COMPARISON_SCHEMA_VERSION,
        a: a_info,
        b: b_info,
        conditions,
        aggregate: Row {
            condition_id: "aggregate".into(),
            delta: sa.delta(&sb),
            a: sa,
            b: sb,
        },
        scatter,
    })
}

/// Fixed-width table of the comparison.
pub fn render_comparison(c: &Comparison) -> String {
    let num = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
    let mut s = String::new();
    let _ = writeln!(
        s,
        "a = {} ({:?}, lambda {}), b = {} ({:?}, lambda {})",
        c.a.label, c.a.model_kind, c.a.lambda, c.b.label, c.b.model_kind, c.b.lambda
    );
    let _ = writeln!(
        s,
        "{:<14} {:>9} {:>9} {:>9} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9} {:>9} {:>9}",
        "condition", "mse_a", "mse_b", "d_mse", "r2_a", "r2_b", "d_r2", "acc2_a", "acc2_b", "acc3_b", "w_a", "w_b", "d_w"
    );
    for r in c.conditions.iter().chain(std::iter::once(&c.aggregate)) {
        let _ = writeln!(
            s,
            "{:<14} {:>9.3} {:>9.3} {:>9.3} {:>8} {:>8} {:>8} {:>8.3} {:>8.3} {:>8.3} {:>9} {:>9} {:>9}",
            r.condition_id,
            r.a.mse,
            r.b.mse,
            r.delta.mse,
            num(r.a.r2),
            num(r.b.r2),
            num(r.delta.r2),
            r.a.acc_lt2db,
            r.b.acc_lt2db,
            r.b.acc_lt3db,
            num(r.a.wasserstein_2lv),
            num(r.b.wasserstein_2lv),
            num(r.delta.wasserstein_2lv),
        );
    }
    s
}

/// Compares two report files, writing JSON to `out` and the text table to
/// `<out stem>.txt`. Returns the comparison and its text rendering.
pub fn cmd_compare(report_a: &Path, report_b: &Path, out: &Path) -> Result<(Comparison, String)> {
    let (a, b) = (load(report_a)?, load(report_b)?);
    let c = compare_reports(&a, &b, info(report_a, &a), info(report_b, &b))?;
    let text = render_comparison(&c);
    write_text(out, &to_sorted_json(&c)?)?;
    write_text(&sibling(out, ".txt"), &text)?;
    Ok((c, text))
}
