use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dipls_core::io::{
    dataset_csv, dataset_rows, read_text, write_text, write_waveform, FeatureSpec, Manifest,
    Provenance, WaveformEncoding, MANIFEST_FILE, MANIFEST_SCHEMA_VERSION, WAVEFORM_EXTENSION,
};
use dipls_core::spectral::ChannelKind;
use dipls_core::synthbench::{generate_suite, render_waveforms, SuiteSpec, DEFAULT_SEED};
use dipls_core::{Error, Result};

use crate::TOOL_NAME;

#[derive(Debug, Clone, Default)]
pub struct GenerateOptions {
    /// Replaces the seed stored in the suite spec.
    pub seed: Option<u64>,
    /// Also render waveform containers.
    pub waveforms: bool,
    /// Waveform containers per condition; `None` renders every sample.
    pub waveform_limit: Option<usize>,
    pub waveform_encoding: WaveformEncoding,
}

#[derive(Debug, Clone)]
pub struct GenerateSummary {
    pub manifest: PathBuf,
    pub datasets: Vec<PathBuf>,
    pub waveforms: Vec<PathBuf>,
}

/// Manifest describing the feature columns of a generated suite.
pub fn suite_manifest(suite: &SuiteSpec, provenance: Provenance) -> Manifest {
    let acc_ref = suite.db_references.acceleration;
    let features = suite
        .feature_names()
        .into_iter()
        .zip(suite.feature_kinds())
        .map(|(name, kind)| match kind {
            ChannelKind::Temperature => FeatureSpec {
                name,
                kind,
                unit: "degC".into(),
                db_reference: None,
            },
            _ => FeatureSpec {
                name,
                kind,
                unit: "dB".into(),
                db_reference: acc_ref,
            },
        })
        .collect();
    Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        features,
        conditions: suite.conditions.iter().map(|c| c.condition_id.clone()).collect(),
        label_channels: suite.mic_names(),
        label_db_reference: suite.db_references.microphone,
        provenance,
    }
}

fn load_suite(spec_path: Option<&Path>) -> Result<SuiteSpec> {
    let suite = match spec_path {
        None => SuiteSpec::default_suite(DEFAULT_SEED),
        Some(path) => {
            let text = read_text(path)?;
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?
        }
    };
    suite.validate()?;
    Ok(suite)
}

/// Writes one dataset CSV per condition plus `manifest.json` into `out_dir`,
/// and optionally waveform containers under `out_dir/waveforms`.
///
/// Without a spec path the built-in default suite is used.
pub fn cmd_generate(spec_path: Option<&Path>, out_dir: &Path, options: &GenerateOptions) -> Result<GenerateSummary> {
    let mut suite = load_suite(spec_path)?;
    let spec_seed = suite.seed;
    if let Some(seed) = options.seed {
        suite.seed = seed;
    }
    let mut settings = BTreeMap::new();
    settings.insert(
        "suite".into(),
        serde_json::to_value(&suite).map_err(|e| Error::json("suite spec", e))?,
    );
    let provenance = Provenance {
        tool: TOOL_NAME.into(),
        command: "generate".into(),
        seed: Some(suite.seed),
        spec_seed: options.seed.map(|_| spec_seed),
        seed_overridden: options.seed.is_some(),
        settings,
    };
    let manifest = suite_manifest(&suite, provenance);
    let names = manifest.feature_names();

    let data = generate_suite(&suite)?;
    let mut datasets = Vec::new();
    for d in &data {
        let path = out_dir.join(format!("{}.csv", d.condition_id()));
        write_text(&path, &dataset_csv(&names, &dataset_rows(d))?)?;
        datasets.push(path);
    }
    let manifest_path = out_dir.join(MANIFEST_FILE);
    write_text(&manifest_path, &manifest.to_json()?)?;

    let mut waveforms = Vec::new();
    if options.waveforms {
        let dir = out_dir.join("waveforms");
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for spec in &suite.conditions {
            let n = options.waveform_limit.map_or(spec.n_samples, |l| l.min(spec.n_samples));
            for i in 0..n {
                let frame = render_waveforms(spec, &suite, i)?;
                let path = dir.join(format!("{}.{WAVEFORM_EXTENSION}", frame.sample_id));
                write_waveform(&path, &frame, options.waveform_encoding)?;
                waveforms.push(path);
            }
        }
    }
    Ok(GenerateSummary {
        manifest: manifest_path,
        datasets,
        waveforms,
    })
}
