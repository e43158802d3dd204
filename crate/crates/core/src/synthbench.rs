//! Synthetic multi-condition benchmark suites with controlled covariate shift.
//!
//! The generator follows a fixed causal chain:
//!
//! ```text
//! (valve opening, ambient temperature)
//!     -> latent thermodynamic state -> thermocouple readings
//!     -> 2f excitation (three modes) -> structural vibration -> accelerometers
//!                                    -> panel radiation      -> microphone label
//! ```
//!
//! The excitation modes are compression (driven by the ambient thermal load),
//! injection pulsation and the irregular pulsation of the single-suction cycle
//! that only exists with the injection valve closed. Accelerometers are
//! grouped as shell, piping and panel; only the panels radiate, and they
//! barely respond to either pulsation. The label is computed from the panel
//! vibration, so vibration features are causally closer to it than the
//! thermodynamic ones. A small compressor jitter reaches the structure
//! without showing in the thermocouples, and under automatic regulation the
//! thermocouples lag the moving valve.
//!
//! `mechanism_shift` perturbs the transfer paths to the non-radiating
//! channels and the thermocouple placement of a condition.
//!
//! All maps are arbitrary but fixed for a given suite seed. They are not a
//! model of real refrigerant-cycle physics.

use std::collections::HashSet;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dataset::DomainDataset;
use crate::error::{Error, Result};
use crate::spectral::{Channel, ChannelKind, DbReferences, SpectralFrame};

/// Seed of the default benchmark suite.
pub const DEFAULT_SEED: u64 = 7;
pub const RENDER_SAMPLE_RATE: f64 = 20_000.0;
pub const RENDER_DURATION: f64 = 10.0;
/// Thermocouples are logged at 1 Hz.
const THERMO_LOG_RATE: f64 = 1.0;
/// Extra clearance (Hz) kept free of background content around the 2f band.
const BACKGROUND_GUARD: f64 = 2.0;
/// Background vibration sits this far (dB) below the 2f tone.
const BACKGROUND_BELOW_TONE_DB: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValveMode {
    Fixed,
    Auto,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSpec {
    pub condition_id: String,
    pub valve_mode: ValveMode,
    #[serde(default)]
    pub opening: f64,
    #[serde(default)]
    pub opening_range: Option<(f64, f64)>,
    pub ambient_range: (f64, f64),
    pub n_samples: usize,
    #[serde(default)]
    pub mechanism_shift: f64,
}

impl ConditionSpec {
    pub fn fixed(id: &str, opening: f64, ambient: (f64, f64), n: usize, shift: f64) -> Self {
        Self {
            condition_id: id.into(),
            valve_mode: ValveMode::Fixed,
            opening,
            opening_range: None,
            ambient_range: ambient,
            n_samples: n,
            mechanism_shift: shift,
        }
    }

    pub fn auto(id: &str, range: (f64, f64), ambient: (f64, f64), n: usize, shift: f64) -> Self {
        Self {
            condition_id: id.into(),
            valve_mode: ValveMode::Auto,
            opening: 0.0,
            opening_range: Some(range),
            ambient_range: ambient,
            n_samples: n,
            mechanism_shift: shift,
        }
    }

    pub fn closed(id: &str, ambient: (f64, f64), n: usize, shift: f64) -> Self {
        Self {
            condition_id: id.into(),
            valve_mode: ValveMode::Closed,
            opening: 0.0,
            opening_range: None,
            ambient_range: ambient,
            n_samples: n,
            mechanism_shift: shift,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(format!("condition {}: {msg}", self.condition_id)));
        if self.condition_id.is_empty() {
            return Err(Error::InvalidInput("condition_id must not be empty".into()));
        }
        if self.n_samples < 2 {
            return bad(format!("n_samples must be at least 2, got {}", self.n_samples));
        }
        let (lo, hi) = self.ambient_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("ambient_range [{lo}, {hi}] is invalid"));
        }
        if !(0.0..=1.0).contains(&self.mechanism_shift) {
            return bad(format!("mechanism_shift {} is outside [0, 1]", self.mechanism_shift));
        }
        match self.valve_mode {
            ValveMode::Fixed => {
                if !(self.opening.is_finite() && self.opening >= 0.0) {
                    return bad(format!("opening {} is invalid", self.opening));
                }
            }
            ValveMode::Auto => match self.opening_range {
                Some((lo, hi)) if lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi => {}
                Some((lo, hi)) => return bad(format!("opening_range [{lo}, {hi}] is empty or invalid")),
                None => return bad("auto mode needs an opening_range".into()),
            },
            ValveMode::Closed => {}
        }
        Ok(())
    }
}

fn default_accel() -> usize {
    39
}
fn default_thermo() -> usize {
    66
}
fn default_mics() -> usize {
    8
}
fn default_label_range() -> (f64, f64) {
    (40.0, 55.0)
}
fn default_fundamental() -> f64 {
    58.0
}
fn default_label_noise() -> f64 {
    0.5
}
fn default_feature_noise() -> f64 {
    1.0
}
fn default_thermo_noise() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    pub conditions: Vec<ConditionSpec>,
    #[serde(default = "default_accel")]
    pub n_accel_channels: usize,
    #[serde(default = "default_thermo")]
    pub n_thermo_channels: usize,
    #[serde(default = "default_mics")]
    pub n_mics: usize,
    #[serde(default = "default_label_range")]
    pub label_range_target: (f64, f64),
    pub seed: u64,
    /// Compressor operating frequency (Hz); the tone of interest is at twice this.
    #[serde(default = "default_fundamental")]
    pub fundamental_hz: f64,
    /// Observation noise on labels (dB, standard deviation).
    #[serde(default = "default_label_noise")]
    pub label_noise_db: f64,
    /// Sensor noise on acceleration levels (dB, standard deviation).
    #[serde(default = "default_feature_noise")]
    pub feature_noise_db: f64,
    /// Sensor noise on thermocouples (degC, standard deviation).
    #[serde(default = "default_thermo_noise")]
    pub thermo_noise_c: f64,
    #[serde(default)]
    pub db_references: DbReferences,
}

impl SuiteSpec {
    /// Six conditions: four fixed openings, one automatic-regulation and
    /// one valve-closed condition.
    pub fn default_suite(seed: u64) -> Self {
        Self {
            conditions: vec![
                ConditionSpec::fixed("case_01", 35.0, (-1.0, 5.0), 80, 0.0),
                ConditionSpec::fixed("case_02", 55.0, (-1.0, 4.0), 90, 0.1),
                ConditionSpec::fixed("case_03", 75.0, (0.0, 5.0), 70, 0.15),
                ConditionSpec::auto("case_04", (90.0, 105.0), (-1.0, 5.0), 100, 0.3),
                ConditionSpec::closed("case_05", (-1.0, 5.0), 60, 1.0),
                ConditionSpec::fixed("case_06", 110.0, (0.0, 5.0), 80, 0.1),
            ],
            n_accel_channels: default_accel(),
            n_thermo_channels: default_thermo(),
            n_mics: default_mics(),
            label_range_target: default_label_range(),
            seed,
            fundamental_hz: default_fundamental(),
            label_noise_db: default_label_noise(),
            feature_noise_db: default_feature_noise(),
            thermo_noise_c: default_thermo_noise(),
            db_references: DbReferences::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.conditions.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "a suite needs at least 3 conditions, got {}",
                self.conditions.len()
            )));
        }
        if self.n_accel_channels < 1 || self.n_thermo_channels < 1 || self.n_mics < 1 {
            return Err(Error::InvalidInput("channel counts must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        for c in &self.conditions {
            if !seen.insert(c.condition_id.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate condition_id {:?}",
                    c.condition_id
                )));
            }
            c.validate()?;
        }
        let (lo, hi) = self.label_range_target;
        if !(lo < hi) {
            return Err(Error::InvalidInput(format!("label_range_target [{lo}, {hi}] is empty")));
        }
        if !(self.fundamental_hz > 0.0) {
            return Err(Error::InvalidInput("fundamental_hz must be positive".into()));
        }
        for (name, v) in [
            ("label_noise_db", self.label_noise_db),
            ("feature_noise_db", self.feature_noise_db),
            ("thermo_noise_c", self.thermo_noise_c),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }

    pub fn accel_names(&self) -> Vec<String> {
        (1..=self.n_accel_channels).map(|i| format!("acc_{i:02}")).collect()
    }

    pub fn thermo_names(&self) -> Vec<String> {
        (1..=self.n_thermo_channels).map(|i| format!("temp_{i:02}")).collect()
    }

    pub fn mic_names(&self) -> Vec<String> {
        (1..=self.n_mics).map(|i| format!("mic_{i}")).collect()
    }

    /// Feature column names: acceleration channels, then thermocouples.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = self.accel_names();
        names.extend(self.thermo_names());
        names
    }

    pub fn feature_kinds(&self) -> Vec<ChannelKind> {
        std::iter::repeat_n(ChannelKind::Acceleration, self.n_accel_channels)
            .chain(std::iter::repeat_n(ChannelKind::Temperature, self.n_thermo_channels))
            .collect()
    }

    pub fn condition(&self, id: &str) -> Option<&ConditionSpec> {
        self.conditions.iter().find(|c| c.condition_id == id)
    }
}

/// 64-bit FNV-1a.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for a named stream of the suite: depends only on the suite seed and
/// the name, so adding conditions never changes other conditions' data.
pub fn sub_seed(seed: u64, name: &str) -> u64 {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(name.as_bytes());
    mix64(fnv1a64(&bytes))
}

/// Standard deviation (dB) of compressor excitation jitter. It reaches the
/// structure but leaves no trace in the thermocouples.
const EXCITATION_JITTER_DB: f64 = 1.0;
/// Standard deviation (dB) of the irregular pulsation of the single-suction
/// cycle when the injection valve is closed.
const CLOSED_PULSATION_DB: f64 = 8.0;

/// Shared structural maps of a suite: transfer paths, radiation weights,
/// thermocouple sensitivities.
struct Structure {
    accel_base: Vec<f64>,
    /// Per accel channel, gains on the excitation modes.
    transfer: Vec<[f64; MODES]>,
    radiating: Vec<bool>,
    radiation_weight: Vec<f64>,
    thermo_base: Vec<f64>,
    thermo_gain: Vec<[f64; THERMO_BASIS]>,
    mic_offsets: Vec<f64>,
    label_offset: f64,
}

const THERMO_BASIS: usize = 6;
/// Compression, injection pulsation, single-suction pulsation.
const MODES: usize = 3;

impl Structure {
    fn new(suite: &SuiteSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(suite.seed, "structure"));
        let na = suite.n_accel_channels;
        let mut accel_base = Vec::with_capacity(na);
        let mut transfer = Vec::with_capacity(na);
        let mut radiating = Vec::with_capacity(na);
        for j in 0..na {
            // shell, piping, panel, repeating; the panels radiate and barely
            // respond to either pulsation
            let group = j % 3;
            accel_base.push(rng.random_range(72.0..92.0));
            transfer.push(match group {
                0 => [
                    rng.random_range(0.6..1.0),
                    rng.random_range(0.3..0.6),
                    rng.random_range(0.6..1.4),
                ],
                1 => [
                    rng.random_range(0.2..0.5),
                    rng.random_range(0.8..1.3),
                    rng.random_range(0.6..1.4),
                ],
                _ => [rng.random_range(0.8..1.2), rng.random_range(0.0..0.1), 0.0],
            });
            radiating.push(group == 2 || na < 3);
        }
        let raw: Vec<f64> = radiating
            .iter()
            .map(|&r| if r { rng.random_range(0.5..1.5) } else { 0.0 })
            .collect();
        let total: f64 = raw.iter().sum();
        let radiation_weight = raw.iter().map(|w| w / total).collect();

        let nt = suite.n_thermo_channels;
        let mut thermo_base = Vec::with_capacity(nt);
        let mut thermo_gain = Vec::with_capacity(nt);
        for k in 0..nt {
            thermo_base.push(rng.random_range(-5.0..60.0));
            let mut g = [0.0; THERMO_BASIS];
            for (m, gm) in g.iter_mut().enumerate() {
                *gm = rng.random_range(-1.0..1.0) * [3.0, 12.0, 8.0, 6.0, 5.0, 4.0][m];
            }
            // a quarter of the thermocouples sit on the injection circuit
            if k % 4 == 0 {
                g[1] += 20.0;
            }
            thermo_gain.push(g);
        }

        let mut mic_offsets: Vec<f64> = (0..suite.n_mics).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mean = mic_offsets.iter().sum::<f64>() / mic_offsets.len() as f64;
        mic_offsets.iter_mut().for_each(|v| *v -= mean);

        let mut s = Self {
            accel_base,
            transfer,
            radiating,
            radiation_weight,
            thermo_base,
            thermo_gain,
            mic_offsets,
            label_offset: 0.0,
        };
        // place the mid excitation at the middle of the target label range
        let (lo, hi) = suite.label_range_target;
        let mid_exc = ThermoState::new(ValveMode::Fixed, 70.0, 2.5).excitation(0.0, 0.0);
        let panel: f64 = (0..na)
            .map(|j| s.radiation_weight[j] * (s.accel_base[j] + dot(&s.transfer[j], &mid_exc)))
            .sum();
        s.label_offset = 0.5 * (lo + hi) - panel;
        s
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Latent thermodynamic state of one sample.
#[derive(Debug, Clone, Copy)]
struct ThermoState {
    mode: ValveMode,
    ambient: f64,
    injection: f64,
    superheat: f64,
    load: f64,
}

impl ThermoState {
    fn new(mode: ValveMode, opening: f64, ambient: f64) -> Self {
        let injection = match mode {
            ValveMode::Closed => 0.0,
            _ => (opening.max(0.0) / 100.0).powf(0.8),
        };
        let superheat = 0.15 * ambient + 0.6 * injection - 0.25 * injection * injection;
        let load = (0.3 * (ambient - 2.0)).tanh() + 0.1 * injection * ambient;
        Self {
            mode,
            ambient,
            injection,
            superheat,
            load,
        }
    }

    /// 2f excitation levels (dB) of the three modes. `jitter` and
    /// `pulsation` are standard-normal draws.
    fn excitation(&self, jitter: f64, pulsation: f64) -> [f64; MODES] {
        let thermal = 3.5 * (0.3 * (self.ambient - 2.0)).tanh() + 0.9 * self.ambient;
        let hidden = EXCITATION_JITTER_DB * jitter;
        match self.mode {
            // single-suction cycle: no injection pulsation but an irregular,
            // non-radiating one of its own
            ValveMode::Closed => [
                thermal + hidden,
                -3.0,
                CLOSED_PULSATION_DB * pulsation,
            ],
            _ => [
                thermal + hidden,
                9.0 * self.injection + 1.5 * self.load,
                0.0,
            ],
        }
    }

    fn thermo_basis(&self) -> [f64; THERMO_BASIS] {
        [
            self.ambient,
            self.injection,
            self.superheat,
            self.load,
            self.injection * self.injection,
            (2.0 * self.superheat).tanh(),
        ]
    }
}

/// Condition-specific transfer-path and placement perturbations.
struct Perturbation {
    accel_offset: Vec<f64>,
    accel_gain: Vec<[f64; MODES]>,
    thermo_offset: Vec<f64>,
}

impl Perturbation {
    fn new(rng: &mut ChaCha8Rng, structure: &Structure, shift: f64) -> Self {
        let std = Normal::new(0.0, 1.0).unwrap();
        let accel_offset = structure
            .radiating
            .iter()
            .map(|&r| {
                let v = std.sample(rng);
                if r { 0.0 } else { shift * 8.0 * v }
            })
            .collect();
        let accel_gain = structure
            .radiating
            .iter()
            .map(|&r| {
                let g: [f64; MODES] = std::array::from_fn(|_| std.sample(rng));
                if r { [0.0; MODES] } else { g.map(|v| shift * 0.2 * v) }
            })
            .collect();
        let thermo_offset = structure
            .thermo_base
            .iter()
            .map(|_| shift * 2.0 * std.sample(rng))
            .collect();
        Self {
            accel_offset,
            accel_gain,
            thermo_offset,
        }
    }
}

/// One generated sample with the ground truth needed to render waveforms.
#[derive(Debug, Clone)]
pub struct SyntheticSample {
    pub accel_db: Vec<f64>,
    pub thermo_c: Vec<f64>,
    pub mic_db: Vec<f64>,
    pub label_db: f64,
}

fn generate_samples(spec: &ConditionSpec, suite: &SuiteSpec) -> Result<Vec<SyntheticSample>> {
    spec.validate()?;
    let structure = Structure::new(suite);
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(suite.seed, &spec.condition_id));
    // Draw the perturbation from its own stream so that it does not depend on
    // the number of samples.
    let mut prng = ChaCha8Rng::seed_from_u64(sub_seed(
        suite.seed,
        &format!("{}/mechanism", spec.condition_id),
    ));
    let pert = Perturbation::new(&mut prng, &structure, spec.mechanism_shift);
    let unit = Normal::new(0.0, 1.0).unwrap();

    let (alo, ahi) = spec.ambient_range;
    let mut previous_opening = None;
    let mut out = Vec::with_capacity(spec.n_samples);
    for _ in 0..spec.n_samples {
        let ambient = if ahi > alo { rng.random_range(alo..ahi) } else { alo };
        let opening = match spec.valve_mode {
            ValveMode::Fixed => spec.opening,
            ValveMode::Auto => {
                let (lo, hi) = spec.opening_range.expect("validated");
                rng.random_range(lo..hi)
            }
            ValveMode::Closed => 0.0,
        };
        let jitter = unit.sample(&mut rng);
        let pulsation = unit.sample(&mut rng);
        let state = ThermoState::new(spec.valve_mode, opening, ambient);
        let exc = state.excitation(jitter, pulsation);
        // under automatic regulation the slow thermocouples still reflect the
        // previous valve position
        let seen = ThermoState::new(
            spec.valve_mode,
            previous_opening.unwrap_or(opening),
            ambient,
        );
        previous_opening = Some(opening);

        let accel_phys: Vec<f64> = (0..suite.n_accel_channels)
            .map(|j| {
                let g = &structure.transfer[j];
                let dg = &pert.accel_gain[j];
                let gain: Vec<f64> = g.iter().zip(dg).map(|(a, b)| a + b).collect();
                structure.accel_base[j] + pert.accel_offset[j] + dot(&gain, &exc)
            })
            .collect();
        let accel_db = accel_phys
            .iter()
            .map(|a| a + suite.feature_noise_db * unit.sample(&mut rng))
            .collect();

        let basis = seen.thermo_basis();
        let thermo_c = (0..suite.n_thermo_channels)
            .map(|k| {
                let g = &structure.thermo_gain[k];
                let v: f64 = g.iter().zip(basis.iter()).map(|(a, b)| a * b).sum();
                structure.thermo_base[k] + v + pert.thermo_offset[k]
                    + suite.thermo_noise_c * unit.sample(&mut rng)
            })
            .collect();

        let panel: f64 = accel_phys
            .iter()
            .zip(&structure.radiation_weight)
            .map(|(a, w)| a * w)
            .sum();
        let label_db =
            structure.label_offset + panel + suite.label_noise_db * unit.sample(&mut rng);
        let mic_db = structure.mic_offsets.iter().map(|o| label_db + o).collect();
        out.push(SyntheticSample {
            accel_db,
            thermo_c,
            mic_db,
            label_db,
        });
    }
    Ok(out)
}

/// Generates one condition's dataset. Columns follow
/// [`SuiteSpec::feature_names`].
pub fn generate_condition(spec: &ConditionSpec, suite: &SuiteSpec) -> Result<DomainDataset> {
    let samples = generate_samples(spec, suite)?;
    let n = samples.len();
    let p = suite.n_accel_channels + suite.n_thermo_channels;
    let mut x = DMatrix::zeros(n, p);
    for (i, s) in samples.iter().enumerate() {
        for (j, v) in s.accel_db.iter().chain(&s.thermo_c).enumerate() {
            x[(i, j)] = *v;
        }
    }
    let y = DVector::from_iterator(n, samples.iter().map(|s| s.label_db));
    DomainDataset::from_matrix(x, Some(y), spec.condition_id.clone())
}

/// Generates every condition of the suite, in suite order.
pub fn generate_suite(suite: &SuiteSpec) -> Result<Vec<DomainDataset>> {
    suite.validate()?;
    suite
        .conditions
        .iter()
        .map(|c| generate_condition(c, suite))
        .collect()
}

/// Renders one generated sample as a 10 s, 20 kHz multichannel frame whose
/// 2f band levels reproduce the sample's acceleration and microphone levels.
pub fn render_waveforms(
    spec: &ConditionSpec,
    suite: &SuiteSpec,
    sample_index: usize,
) -> Result<SpectralFrame> {
    if sample_index >= spec.n_samples {
        return Err(Error::InvalidInput(format!(
            "sample index {sample_index} out of range for condition {} ({} samples)",
            spec.condition_id, spec.n_samples
        )));
    }
    let sample = generate_samples(spec, suite)?.swap_remove(sample_index);
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(
        suite.seed,
        &format!("{}/render/{sample_index}", spec.condition_id),
    ));
    let refs = suite.db_references;
    let acc_ref = refs
        .acceleration
        .ok_or_else(|| Error::InvalidInput("suite has no acceleration dB reference".into()))?;
    let mic_ref = refs
        .microphone
        .ok_or_else(|| Error::InvalidInput("suite has no microphone dB reference".into()))?;

    let mut channels = Vec::new();
    for (name, level) in suite.accel_names().into_iter().zip(&sample.accel_db) {
        let rms = acc_ref * 10f64.powf(level / 20.0);
        channels.push(Channel {
            id: name,
            kind: ChannelKind::Acceleration,
            unit: "m/s^2".into(),
            samples: synthesize_channel(&mut rng, suite.fundamental_hz, 3.0, rms, rms)?,
        });
    }
    for (name, level) in suite.mic_names().into_iter().zip(&sample.mic_db) {
        let rms = mic_ref * 10f64.powf(level / 20.0);
        channels.push(Channel {
            id: name,
            kind: ChannelKind::Microphone,
            unit: "Pa".into(),
            samples: synthesize_channel(&mut rng, suite.fundamental_hz, 3.0, rms, rms)?,
        });
    }
    let n_log = (RENDER_DURATION * THERMO_LOG_RATE) as usize;
    for (name, value) in suite.thermo_names().into_iter().zip(&sample.thermo_c) {
        // zero-mean drift around the window mean
        let samples = (0..n_log)
            .map(|i| value + 0.05 * if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        channels.push(Channel {
            id: name,
            kind: ChannelKind::Temperature,
            unit: "degC".into(),
            samples,
        });
    }
    Ok(SpectralFrame {
        sample_id: format!("{}-{sample_index:04}", spec.condition_id),
        condition_id: spec.condition_id.clone(),
        timestamp: format!("t+{sample_index}min"),
        channels,
        sample_rate: RENDER_SAMPLE_RATE,
        duration: RENDER_DURATION,
        fundamental_f: suite.fundamental_hz,
    })
}

/// One waveform channel: a 2f tone with the given in-band RMS on top of
/// broadband background vibration that has no content within the analysis
/// band (plus a guard) around 2f.
///
/// Background content is placed on whole-hertz frequencies only, so it does
/// not leak into the band for any analysis segment of whole seconds.
/// `reference_rms` sets the background level (it sits a fixed number of dB
/// below it); a zero `tone_rms` gives pure background.
pub fn synthesize_channel(
    rng: &mut ChaCha8Rng,
    fundamental_hz: f64,
    half_band: f64,
    tone_rms: f64,
    reference_rms: f64,
) -> Result<Vec<f64>> {
    let f2 = 2.0 * fundamental_hz;
    if f2.fract() != 0.0 {
        return Err(Error::InvalidInput(format!(
            "rendering needs a whole-hertz 2f frequency, got {f2} Hz"
        )));
    }
    let fs = RENDER_SAMPLE_RATE as usize;
    let nyquist = fs / 2;
    if f2 + half_band + BACKGROUND_GUARD >= nyquist as f64 {
        return Err(Error::BandOutOfRange {
            low: f2 - half_band,
            high: f2 + half_band,
            nyquist: nyquist as f64,
        });
    }

    // One second of background built in the frequency domain, then tiled.
    let std = Normal::new(0.0, 1.0).unwrap();
    let mut spectrum = vec![Complex::new(0.0, 0.0); fs];
    let notch = (f2 - half_band - BACKGROUND_GUARD)..=(f2 + half_band + BACKGROUND_GUARD);
    for k in 1..nyquist {
        let v = Complex::new(std.sample(rng), std.sample(rng));
        if notch.contains(&(k as f64)) {
            continue;
        }
        // mild 1/f tilt
        let v = v / (1.0 + k as f64 / 500.0);
        spectrum[k] = v;
        spectrum[fs - k] = v.conj();
    }
    FftPlanner::new().plan_fft_inverse(fs).process(&mut spectrum);
    let second: Vec<f64> = spectrum.iter().map(|c| c.re).collect();
    let bg_rms = (second.iter().map(|v| v * v).sum::<f64>() / fs as f64).sqrt();
    let bg_scale = if bg_rms > 0.0 {
        reference_rms * 10f64.powf(-BACKGROUND_BELOW_TONE_DB / 20.0) / bg_rms
    } else {
        0.0
    };

    let amplitude = tone_rms * 2f64.sqrt();
    let phase = rng.random_range(0.0..2.0 * PI);
    let n = (RENDER_SAMPLE_RATE * RENDER_DURATION).round() as usize;
    Ok((0..n)
        .map(|i| {
            let t = i as f64 / RENDER_SAMPLE_RATE;
            amplitude * (2.0 * PI * f2 * t + phase).sin() + bg_scale * second[i % fs]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_suite() -> SuiteSpec {
        let mut s = SuiteSpec::default_suite(7);
        s.n_accel_channels = 6;
        s.n_thermo_channels = 8;
        s.n_mics = 3;
        s
    }

    #[test]
    fn sub_seeds_depend_on_name_and_seed() {
        assert_eq!(sub_seed(1, "a"), sub_seed(1, "a"));
        assert_ne!(sub_seed(1, "a"), sub_seed(1, "b"));
        assert_ne!(sub_seed(1, "a"), sub_seed(2, "a"));
        // FNV-1a test vector
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn same_seed_same_data() {
        let s = small_suite();
        assert_eq!(generate_suite(&s).unwrap(), generate_suite(&s).unwrap());
    }

    #[test]
    fn adding_a_condition_leaves_others_unchanged() {
        let s = small_suite();
        let mut bigger = s.clone();
        bigger
            .conditions
            .insert(0, ConditionSpec::fixed("extra", 20.0, (0.0, 1.0), 40, 0.5));
        let a = generate_suite(&s).unwrap();
        let b = generate_suite(&bigger).unwrap();
        assert_eq!(a[..], b[1..]);
    }

    #[test]
    fn default_suite_bookkeeping() {
        let s = SuiteSpec::default_suite(1);
        s.validate().unwrap();
        let data = generate_suite(&s).unwrap();
        assert_eq!(data.len(), 6);
        let total: usize = data.iter().map(|d| d.n_samples()).sum();
        assert!((240..=720).contains(&total));
        assert_eq!(data[0].n_features(), 39 + 66);
        assert!(s.conditions.iter().all(|c| (40..=120).contains(&c.n_samples)));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut s = small_suite();
        s.conditions[1].condition_id = "case_01".into();
        let err = generate_suite(&s).unwrap_err();
        assert!(err.to_string().contains("case_01"));
    }

    #[test]
    fn auto_without_range_rejected() {
        let mut c = ConditionSpec::auto("a", (90.0, 105.0), (0.0, 1.0), 50, 0.0);
        c.opening_range = Some((100.0, 100.0));
        assert!(c.validate().is_err());
        c.opening_range = None;
        assert!(c.validate().is_err());
    }

    #[test]
    fn too_few_conditions_rejected() {
        let mut s = small_suite();
        s.conditions.truncate(2);
        assert!(s.validate().is_err());
    }

    #[test]
    fn render_index_out_of_range() {
        let s = small_suite();
        assert!(render_waveforms(&s.conditions[0], &s, 80).is_err());
    }

    #[test]
    fn rendered_frame_has_expected_shape() {
        let s = small_suite();
        let f = render_waveforms(&s.conditions[4], &s, 3).unwrap();
        f.validate().unwrap();
        assert_eq!(f.expected_len(), 200_000);
        let waveforms = f.channels.iter().filter(|c| c.kind.is_waveform()).count();
        assert_eq!(waveforms, 6 + 3);
        assert!(f
            .channels
            .iter()
            .filter(|c| c.kind.is_waveform())
            .all(|c| c.samples.len() == 200_000));
    }
}
