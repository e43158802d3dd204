use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dipls_core::io::{
    dataset_csv, read_waveform, write_text, DatasetRow, Manifest, Provenance, WAVEFORM_EXTENSION,
};
use dipls_core::spectral::{extract_features, ChannelKind, ExtractOptions, Window};
use dipls_core::{Error, Result};

use crate::TOOL_NAME;

#[derive(Debug, Clone)]
pub struct ExtractSettings {
    pub half_band: f64,
    /// Overrides the manifest's acceleration dB reference.
    pub db_ref_accel: Option<f64>,
    /// Overrides the manifest's microphone dB reference.
    pub db_ref_mic: Option<f64>,
    pub window: Window,
}

impl Default for ExtractSettings {
    fn default() -> Self {
        Self {
            half_band: ExtractOptions::default().half_band,
            db_ref_accel: None,
            db_ref_mic: None,
            window: Window::Rectangular,
        }
    }
}

fn waveform_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == WAVEFORM_EXTENSION) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Extracts a feature row from every waveform container in `waveform_dir`
/// (sorted by file name) and writes them as a dataset CSV whose columns
/// follow `manifest_path`. A manifest for the output is written to
/// `<out_csv>.manifest.json`.
pub fn cmd_extract(
    waveform_dir: &Path,
    manifest_path: &Path,
    out_csv: &Path,
    settings: &ExtractSettings,
) -> Result<Manifest> {
    let input = Manifest::load(manifest_path)?;
    let mut references = input.db_references();
    if settings.db_ref_accel.is_some() {
        references.acceleration = settings.db_ref_accel;
    }
    if settings.db_ref_mic.is_some() {
        references.microphone = settings.db_ref_mic;
    }
    for (name, r) in [("acceleration", references.acceleration), ("microphone", references.microphone)] {
        if r.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("{name} dB reference must be positive")));
        }
    }
    let options = ExtractOptions {
        half_band: settings.half_band,
        window: settings.window,
        references,
        ..ExtractOptions::default()
    };
    let names = input.feature_names();

    let mut rows = Vec::new();
    let mut conditions: Vec<String> = Vec::new();
    for path in waveform_files(waveform_dir)? {
        let frame = read_waveform(&path)?;
        let at = |e: Error| Error::InvalidInput(format!("{}: {e}", path.display()));
        let row = extract_features(&frame, &options).map_err(at)?;
        if !input.conditions.contains(&row.condition_id) {
            return Err(Error::InvalidInput(format!(
                "{}: condition {:?} is not listed in {}",
                path.display(),
                row.condition_id,
                manifest_path.display()
            )));
        }
        let mut features = Vec::with_capacity(names.len());
        for name in &names {
            let j = row.feature_names.iter().position(|n| n == name).ok_or_else(|| {
                Error::InvalidInput(format!("{}: no channel {name:?}", path.display()))
            })?;
            features.push(row.features[j]);
        }
        if let Some(extra) = row.feature_names.iter().find(|n| !names.contains(n)) {
            return Err(Error::InvalidInput(format!(
                "{}: channel {extra:?} is not in the manifest",
                path.display()
            )));
        }
        if !conditions.contains(&row.condition_id) {
            conditions.push(row.condition_id.clone());
        }
        rows.push(DatasetRow {
            features,
            ..DatasetRow::from(row)
        });
    }

    let mut features = input.features.clone();
    for f in &mut features {
        if f.kind == ChannelKind::Acceleration {
            f.db_reference = references.acceleration;
        }
    }
    let mut extract_settings = BTreeMap::new();
    extract_settings.insert("half_band".into(), serde_json::json!(settings.half_band));
    extract_settings.insert("window".into(), serde_json::json!(settings.window));
    extract_settings.insert("segment_seconds".into(), serde_json::json!(options.segment_seconds));
    extract_settings.insert("db_floor".into(), serde_json::json!(options.db_floor));
    let manifest = Manifest {
        features,
        conditions,
        label_db_reference: references.microphone,
        provenance: Provenance {
            tool: TOOL_NAME.into(),
            command: "extract".into(),
            seed: input.provenance.seed,
            spec_seed: None,
            seed_overridden: false,
            settings: extract_settings,
        },
        ..input
    };
    write_text(out_csv, &dataset_csv(&names, &rows)?)?;
    let mut manifest_out = out_csv.as_os_str().to_owned();
    manifest_out.push(".manifest.json");
    write_text(Path::new(&manifest_out), &manifest.to_json()?)?;
    Ok(manifest)
}
