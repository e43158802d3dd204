//! File formats shared by the command-line front end.
//!
//! - dataset CSV: `sample_id, condition_id, label_db, <features...>`
//! - manifest JSON: feature order, kinds, units, dB references, conditions
//!   and provenance
//! - waveform container: one acquisition event per file

mod waveform;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::DomainDataset;
use crate::error::{Error, Result};
use crate::spectral::{ChannelKind, DbReferences, FeatureRow};

pub use waveform::{read_waveform, write_waveform, WaveformEncoding, WAVEFORM_EXTENSION, WAVEFORM_MAGIC};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
const FIXED_COLUMNS: [&str; 3] = ["sample_id", "condition_id", "label_db"];

/// Serializes with object keys in sorted order and a trailing newline, so
/// equal values always produce equal bytes.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json::Value objects are BTreeMap-backed, hence key-sorted.
    let v = serde_json::to_value(value).map_err(|e| Error::json("serialization", e))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::json("serialization", e))?;
    s.push('\n');
    Ok(s)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `contents`, creating parent directories as needed.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: ChannelKind,
    pub unit: String,
    /// Present for dB-valued features.
    pub db_reference: Option<f64>,
}

/// Where a dataset came from. Unused fields are omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub tool: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Seed stored in the suite spec when `--seed` replaced it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec_seed: Option<u64>,
    #[serde(default)]
    pub seed_overridden: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub settings: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub features: Vec<FeatureSpec>,
    pub conditions: Vec<String>,
    /// Microphone channels folded into `label_db`.
    #[serde(default)]
    pub label_channels: Vec<String>,
    pub label_db_reference: Option<f64>,
    pub provenance: Provenance,
}

impl Manifest {
    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn feature_kinds(&self) -> Vec<ChannelKind> {
        self.features.iter().map(|f| f.kind).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported manifest schema_version {}",
                self.schema_version
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for f in &self.features {
            if FIXED_COLUMNS.contains(&f.name.as_str()) || !seen.insert(f.name.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "manifest feature name {:?} is reserved or repeated",
                    f.name
                )));
            }
            if f.kind == ChannelKind::Microphone {
                return Err(Error::InvalidInput(format!(
                    "microphone channel {:?} cannot be a feature",
                    f.name
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        to_sorted_json(self)
    }

    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::json(context, e))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?, &path.display().to_string())
    }

    pub fn db_references(&self) -> DbReferences {
        let acceleration = self
            .features
            .iter()
            .find(|f| f.kind == ChannelKind::Acceleration)
            .and_then(|f| f.db_reference);
        DbReferences {
            acceleration,
            microphone: self.label_db_reference,
        }
    }
}

/// One dataset CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub sample_id: String,
    pub condition_id: String,
    pub label_db: Option<f64>,
    pub features: Vec<f64>,
}

impl From<FeatureRow> for DatasetRow {
    fn from(r: FeatureRow) -> Self {
        Self {
            sample_id: r.sample_id,
            condition_id: r.condition_id,
            label_db: r.label_db,
            features: r.features,
        }
    }
}

/// Rows of a dataset, in file order.
pub fn dataset_rows(d: &DomainDataset) -> Vec<DatasetRow> {
    (0..d.n_samples())
        .map(|i| DatasetRow {
            sample_id: d.sample_ids()[i].clone(),
            condition_id: d.condition_id().to_string(),
            label_db: d.labels().map(|y| y[i]),
            features: d.features().row(i).iter().copied().collect(),
        })
        .collect()
}

/// Renders rows as dataset CSV. Values use the shortest representation that
/// parses back to the same `f64`.
pub fn dataset_csv(feature_names: &[String], rows: &[DatasetRow]) -> Result<String> {
    let csv_err = |e| Error::csv("dataset", e);
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = FIXED_COLUMNS
        .iter()
        .copied()
        .chain(feature_names.iter().map(String::as_str))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        if r.features.len() != feature_names.len() {
            return Err(Error::DimensionMismatch {
                what: "dataset row width",
                expected: feature_names.len(),
                got: r.features.len(),
            });
        }
        let mut rec = vec![
            r.sample_id.clone(),
            r.condition_id.clone(),
            r.label_db.map(|v| v.to_string()).unwrap_or_default(),
        ];
        rec.extend(r.features.iter().map(f64::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("dataset CSV buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(format!("dataset CSV encoding: {e}")))
}

/// Parses dataset CSV text, checking the header against `feature_names`.
pub fn parse_dataset_csv(text: &str, feature_names: &[String], context: &str) -> Result<Vec<DatasetRow>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| Error::csv(context, e))?.clone();
    let expected: Vec<&str> = FIXED_COLUMNS
        .iter()
        .copied()
        .chain(feature_names.iter().map(String::as_str))
        .collect();
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        let first_diff = expected
            .iter()
            .zip(&got)
            .position(|(a, b)| a != b)
            .unwrap_or(expected.len().min(got.len()));
        return Err(Error::InvalidInput(format!(
            "{context}: header does not match the manifest ({} columns vs {}; first difference at column {})",
            got.len(),
            expected.len(),
            first_diff + 1
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(context, e))?;
        let at = |col: usize| format!("{context}: row {} column {:?}", line + 2, &header[col]);
        let num = |col: usize| -> Result<f64> {
            let v: f64 = rec[col]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("{}: {:?} is not a number", at(col), &rec[col])))?;
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("{}: value is not finite", at(col))));
            }
            Ok(v)
        };
        let label_db = if rec[2].trim().is_empty() { None } else { Some(num(2)?) };
        let features = (3..rec.len()).map(num).collect::<Result<Vec<_>>>()?;
        rows.push(DatasetRow {
            sample_id: rec[0].to_string(),
            condition_id: rec[1].to_string(),
            label_db,
            features,
        });
    }
    Ok(rows)
}

/// Groups rows into one dataset per condition, in order of first appearance.
///
/// Labels must be all present or all absent within a condition, and every
/// condition must be listed in the manifest.
pub fn rows_to_datasets(rows: &[DatasetRow], manifest: &Manifest) -> Result<Vec<DomainDataset>> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&DatasetRow>> = BTreeMap::new();
    for r in rows {
        if !manifest.conditions.iter().any(|c| c == &r.condition_id) {
            return Err(Error::InvalidInput(format!(
                "sample {:?} has condition_id {:?}, which the manifest does not list",
                r.sample_id, r.condition_id
            )));
        }
        let g = groups.entry(r.condition_id.as_str()).or_default();
        if g.is_empty() {
            order.push(r.condition_id.as_str());
        }
        g.push(r);
    }
    let p = manifest.features.len();
    order
        .into_iter()
        .map(|cond| {
            let g = &groups[cond];
            let x = DMatrix::from_fn(g.len(), p, |i, j| g[i].features[j]);
            let labelled = g.iter().filter(|r| r.label_db.is_some()).count();
            let y = match labelled {
                0 => None,
                n if n == g.len() => Some(DVector::from_iterator(g.len(), g.iter().map(|r| r.label_db.unwrap()))),
                n => {
                    return Err(Error::InvalidInput(format!(
                        "condition {cond:?} has labels on only {n} of {} rows",
                        g.len()
                    )))
                }
            };
            let ids = g.iter().map(|r| r.sample_id.clone()).collect();
            DomainDataset::new(x, y, cond, ids)
        })
        .collect()
}

/// Manifest that governs a dataset CSV: `<file>.manifest.json` next to it if
/// present, otherwise `manifest.json` in the same directory.
pub fn manifest_path_for(csv_path: &Path) -> PathBuf {
    let mut sibling = csv_path.as_os_str().to_owned();
    sibling.push(".manifest.json");
    let sibling = PathBuf::from(sibling);
    if sibling.is_file() {
        return sibling;
    }
    csv_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(MANIFEST_FILE)
}

/// Reads one dataset CSV with its manifest.
pub fn load_dataset_file(csv_path: &Path) -> Result<(Manifest, Vec<DomainDataset>)> {
    let manifest_path = manifest_path_for(csv_path);
    let manifest = Manifest::load(&manifest_path)?;
    let text = read_text(csv_path)?;
    let rows = parse_dataset_csv(&text, &manifest.feature_names(), &csv_path.display().to_string())?;
    let datasets = rows_to_datasets(&rows, &manifest)?;
    Ok((manifest, datasets))
}
