use dipls_core::evaluation::{evaluate, exact_w1, FeatureKind, ModelKind, BENCHMARK_LAMBDA};
use dipls_core::spectral::{band_rms, extract_features, ChannelKind, ExtractOptions};
use dipls_core::synthbench::{
    generate_condition, generate_suite, render_waveforms, synthesize_channel, ConditionSpec,
    SuiteSpec, ValveMode, DEFAULT_SEED,
};
use dipls_core::{DomainDataset, FitConfig};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn column_stats(x: &DMatrix<f64>, j: usize) -> (f64, f64) {
    let col = x.column(j);
    let n = col.len() as f64;
    let mean = col.sum() / n;
    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn pooled_std(va: f64, na: usize, vb: f64, nb: usize) -> f64 {
    (((na - 1) as f64 * va + (nb - 1) as f64 * vb) / (na + nb - 2) as f64).sqrt()
}

#[test]
fn shift_off_conditions_are_indistinguishable() {
    let suite = SuiteSpec::default_suite(DEFAULT_SEED);
    let a = generate_condition(&ConditionSpec::fixed("twin_a", 60.0, (0.0, 4.0), 120, 0.0), &suite).unwrap();
    let b = generate_condition(&ConditionSpec::fixed("twin_b", 60.0, (0.0, 4.0), 120, 0.0), &suite).unwrap();
    assert_ne!(a.features(), b.features());
    for j in 0..a.n_features() {
        let (ma, va) = column_stats(a.features(), j);
        let (mb, vb) = column_stats(b.features(), j);
        let sp = pooled_std(va, a.n_samples(), vb, b.n_samples());
        assert!((ma - mb).abs() < sp, "feature {j}: gap {} vs pooled std {sp}", (ma - mb).abs());
    }
}

#[test]
fn default_suite_has_isolated_clusters() {
    let suite = SuiteSpec::default_suite(DEFAULT_SEED);
    let data = generate_suite(&suite).unwrap();
    let mut best: f64 = 0.0;
    for j in 0..data[0].n_features() {
        let stats: Vec<(f64, f64)> = data.iter().map(|d| column_stats(d.features(), j)).collect();
        let within = (stats.iter().map(|s| s.1).sum::<f64>() / stats.len() as f64).sqrt();
        for (p, sp) in stats.iter().enumerate() {
            for sq in &stats[p + 1..] {
                best = best.max((sp.0 - sq.0).abs() / within);
            }
        }
    }
    assert!(best >= 3.0, "best separation ratio {best}");
}

#[test]
fn closed_condition_separates_on_thermo_axes() {
    let suite = SuiteSpec::default_suite(DEFAULT_SEED);
    let data = generate_suite(&suite).unwrap();
    let kinds = suite.feature_kinds();
    let thermo: Vec<usize> = (0..kinds.len()).filter(|&j| kinds[j] == ChannelKind::Temperature).collect();
    let closed = suite
        .conditions
        .iter()
        .position(|c| c.valve_mode == ValveMode::Closed)
        .unwrap();
    for (i, spec) in suite.conditions.iter().enumerate() {
        if spec.valve_mode != ValveMode::Fixed {
            continue;
        }
        let separated = thermo
            .iter()
            .filter(|&&j| {
                let (mc, vc) = column_stats(data[closed].features(), j);
                let (mf, vf) = column_stats(data[i].features(), j);
                let sp = pooled_std(vc, data[closed].n_samples(), vf, data[i].n_samples());
                (mc - mf).abs() > 2.0 * sp
            })
            .count();
        // the injection-circuit thermocouples (every fourth) must all move
        assert!(
            separated >= thermo.len() / 4,
            "{}: only {separated} thermo axes separated",
            spec.condition_id
        );
    }
}

#[test]
fn labels_stay_in_range() {
    for seed in [DEFAULT_SEED, 1, 2, 3] {
        let data = generate_suite(&SuiteSpec::default_suite(seed)).unwrap();
        for d in &data {
            let y = d.labels().unwrap();
            assert!(y.min() >= 38.0 && y.max() <= 57.0, "seed {seed} {}: [{}, {}]", d.condition_id(), y.min(), y.max());
        }
    }
}

#[test]
fn suite_spec_json_roundtrip_with_defaults() {
    let text = r#"{
        "seed": 3,
        "conditions": [
            {"condition_id": "a", "valve_mode": "fixed", "opening": 40, "ambient_range": [0, 2], "n_samples": 40},
            {"condition_id": "b", "valve_mode": "auto", "opening_range": [90, 105], "ambient_range": [0, 2], "n_samples": 40},
            {"condition_id": "c", "valve_mode": "closed", "ambient_range": [0, 2], "n_samples": 40, "mechanism_shift": 1.0}
        ]
    }"#;
    let spec: SuiteSpec = serde_json::from_str(text).unwrap();
    assert_eq!(spec.n_accel_channels, 39);
    assert_eq!(spec.n_thermo_channels, 66);
    assert_eq!(spec.n_mics, 8);
    assert_eq!(spec.label_range_target, (40.0, 55.0));
    spec.validate().unwrap();
    let bad = text.replace("\"seed\": 3", "\"seed\": 3, \"colour\": 1");
    assert!(serde_json::from_str::<SuiteSpec>(&bad).is_err());
}

fn accel_matrix(d: &DomainDataset, n_accel: usize) -> DMatrix<f64> {
    d.features().columns(0, n_accel).into_owned()
}

#[test]
fn mechanism_shift_never_reduces_accel_distance() {
    let suite = SuiteSpec::default_suite(DEFAULT_SEED);
    let base = generate_condition(&ConditionSpec::fixed("base", 60.0, (0.0, 4.0), 60, 0.0), &suite).unwrap();
    let base = accel_matrix(&base, suite.n_accel_channels);
    let mut last = 0.0;
    for shift in [0.0, 0.5, 1.0] {
        let c = generate_condition(&ConditionSpec::fixed("probe", 60.0, (0.0, 4.0), 60, shift), &suite).unwrap();
        let w = exact_w1(&base, &accel_matrix(&c, suite.n_accel_channels));
        assert!(w >= last, "shift {shift}: {w} < {last}");
        last = w;
    }
}

#[test]
fn acceleration_beats_thermodynamics_on_shifted_conditions() {
    let suite = SuiteSpec::default_suite(DEFAULT_SEED);
    let data = generate_suite(&suite).unwrap();
    let kinds = suite.feature_kinds();
    let config = FitConfig::default().with_lambda(BENCHMARK_LAMBDA);
    let mse = |fk: FeatureKind| {
        let cols = fk.columns(&kinds);
        let d: Vec<_> = data.iter().map(|x| x.select_features(&cols).unwrap()).collect();
        let report = evaluate(&d, ModelKind::Dipls, fk, &config, 1).unwrap();
        // conditions with a non-zero mechanism shift
        let shifted: Vec<_> = suite
            .conditions
            .iter()
            .filter(|c| c.mechanism_shift > 0.0)
            .map(|c| report.fold(&c.condition_id).unwrap())
            .collect();
        let n: usize = shifted.iter().map(|f| f.y_true.len()).sum();
        shifted
            .iter()
            .map(|f| f.per_fold_metrics.mse * f.y_true.len() as f64)
            .sum::<f64>()
            / n as f64
    };
    let acc = mse(FeatureKind::Acceleration);
    let thermo = mse(FeatureKind::Thermodynamic);
    assert!(acc < thermo, "acceleration {acc} vs thermodynamic {thermo}");
}

#[test]
fn rendered_frames_reproduce_feature_levels() {
    let suite = SuiteSpec::default_suite(DEFAULT_SEED);
    let options = ExtractOptions::default();
    for (c, idx) in [(0usize, 0usize), (3, 17), (4, 59)] {
        let spec = &suite.conditions[c];
        let data = generate_condition(spec, &suite).unwrap();
        let frame = render_waveforms(spec, &suite, idx).unwrap();
        assert_eq!(frame.channels[0].samples.len(), 200_000);
        let row = extract_features(&frame, &options).unwrap();
        assert_eq!(row.feature_names, suite.feature_names());
        let expected = data.features().row(idx);
        for (j, (got, want)) in row.features.iter().zip(expected.iter()).enumerate() {
            assert!((got - want).abs() <= 0.1, "{} sample {idx} feature {j}: {got} vs {want}", spec.condition_id);
        }
        let label = data.labels().unwrap()[idx];
        assert!((row.label_db.unwrap() - label).abs() <= 0.1);
    }
}

#[test]
fn silent_channel_reads_as_floor() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples = synthesize_channel(&mut rng, 58.0, 3.0, 0.0, 1.0).unwrap();
    let rms = band_rms(&samples, 20_000.0, 116.0, 3.0).unwrap();
    assert!(rms < 1e-9, "in-band residue {rms}");
    // the background itself is far from silent
    let broadband = (samples.iter().map(|v| v * v).sum::<f64>() / samples.len() as f64).sqrt();
    assert!(broadband > 0.1);
}
