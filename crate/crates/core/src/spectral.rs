//! 2f band levels from raw multichannel acquisitions.
//!
//! Each acquisition event holds acceleration and microphone waveforms plus
//! quasi-static temperature readings. Waveform channels are reduced to the
//! RMS inside a narrow band around twice the compressor fundamental,
//! converted to dB; temperatures are averaged; microphone levels are
//! averaged (in dB) into the sample label.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Acceleration,
    Microphone,
    Temperature,
}

impl ChannelKind {
    pub fn is_waveform(self) -> bool {
        !matches!(self, ChannelKind::Temperature)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl Window {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| {
                    let x = std::f64::consts::PI * i as f64 / n as f64;
                    x.sin().powi(2)
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub id: String,
    pub kind: ChannelKind,
    pub unit: String,
    pub samples: Vec<f64>,
}

/// One acquisition event.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrame {
    pub sample_id: String,
    pub condition_id: String,
    pub timestamp: String,
    pub channels: Vec<Channel>,
    pub sample_rate: f64,
    pub duration: f64,
    pub fundamental_f: f64,
}

impl SpectralFrame {
    pub fn expected_len(&self) -> usize {
        (self.sample_rate * self.duration).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sample_rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.fundamental_f > 0.0 && self.fundamental_f.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "fundamental_f must be positive, got {}",
                self.fundamental_f
            )));
        }
        let n = self.expected_len();
        for c in &self.channels {
            if c.kind.is_waveform() && c.samples.len() != n {
                return Err(Error::InvalidInput(format!(
                    "channel {} has {} samples, expected {} (mixed sample rate or length)",
                    c.id,
                    c.samples.len(),
                    n
                )));
            }
            if c.samples.is_empty() {
                return Err(Error::InvalidInput(format!("channel {} is empty", c.id)));
            }
            if c.samples.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("channel samples"));
            }
        }
        Ok(())
    }

    /// Names of the feature columns produced by [`extract_features`], in order.
    pub fn feature_names(&self) -> Vec<String> {
        self.channels
            .iter()
            .filter(|c| c.kind != ChannelKind::Microphone)
            .map(|c| c.id.clone())
            .collect()
    }
}

/// dB reference values per waveform kind, in the channel's physical unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbReferences {
    pub acceleration: Option<f64>,
    pub microphone: Option<f64>,
}

impl Default for DbReferences {
    fn default() -> Self {
        Self {
            // 1 um/s^2 and 20 uPa
            acceleration: Some(1e-6),
            microphone: Some(20e-6),
        }
    }
}

impl DbReferences {
    pub fn get(&self, kind: ChannelKind) -> Option<f64> {
        match kind {
            ChannelKind::Acceleration => self.acceleration,
            ChannelKind::Microphone => self.microphone,
            ChannelKind::Temperature => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractOptions {
    pub half_band: f64,
    pub window: Window,
    /// Band power is averaged over non-overlapping segments of this length.
    /// `None` analyses the whole record at once.
    pub segment_seconds: Option<f64>,
    pub db_floor: f64,
    pub references: DbReferences,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            half_band: 3.0,
            window: Window::Rectangular,
            segment_seconds: Some(1.0),
            db_floor: -120.0,
            references: DbReferences::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub sample_id: String,
    pub condition_id: String,
    pub timestamp: String,
    pub feature_names: Vec<String>,
    pub features: Vec<f64>,
    pub label_db: Option<f64>,
}

fn check_band(n: usize, sample_rate: f64, f_center: f64, half_band: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "band RMS needs at least 2 samples, got {n}"
        )));
    }
    if !(sample_rate > 0.0) || !sample_rate.is_finite() {
        return Err(Error::InvalidInput(format!(
            "sample_rate must be positive, got {sample_rate}"
        )));
    }
    if !(half_band >= 0.0) || !f_center.is_finite() {
        return Err(Error::InvalidInput(format!(
            "invalid band: center {f_center}, half width {half_band}"
        )));
    }
    let (low, high, nyquist) = (f_center - half_band, f_center + half_band, sample_rate / 2.0);
    if low <= 0.0 || high >= nyquist {
        return Err(Error::BandOutOfRange { low, high, nyquist });
    }
    Ok(())
}

/// Mean-square power of one segment inside `[low, high]`, one-sided.
fn segment_band_power(
    segment: &[f64],
    window: &[f64],
    window_power: f64,
    fft: &Arc<dyn Fft<f64>>,
    sample_rate: f64,
    low: f64,
    high: f64,
) -> Result<f64> {
    let n = segment.len();
    let mut buf: Vec<Complex<f64>> = segment
        .iter()
        .zip(window)
        .map(|(x, w)| Complex::new(x * w, 0.0))
        .collect();
    fft.process(&mut buf);

    let df = sample_rate / n as f64;
    let eps = 1e-9 * df;
    let first = ((low - eps) / df).ceil().max(0.0) as usize;
    let last = (((high + eps) / df).floor() as usize).min(n / 2);
    if first > last {
        return Err(Error::EmptyBand { low, high });
    }
    let norm = (n * n) as f64 * window_power;
    let power = (first..=last)
        .map(|k| {
            let fold = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { 1.0 } else { 2.0 };
            fold * buf[k].norm_sqr() / norm
        })
        .sum();
    Ok(power)
}

/// RMS of a signal within `f_center ± half_band` (edges inclusive), from a
/// single rectangular-window FFT of the whole record.
///
/// A pure in-band sine of amplitude `A` yields `A / sqrt(2)`.
pub fn band_rms(samples: &[f64], sample_rate: f64, f_center: f64, half_band: f64) -> Result<f64> {
    band_rms_with(samples, sample_rate, f_center, half_band, Window::Rectangular, None)
}

/// [`band_rms`] with a choice of window and power averaging over
/// non-overlapping segments of `segment_seconds`.
pub fn band_rms_with(
    samples: &[f64],
    sample_rate: f64,
    f_center: f64,
    half_band: f64,
    window: Window,
    segment_seconds: Option<f64>,
) -> Result<f64> {
    check_band(samples.len(), sample_rate, f_center, half_band)?;
    let seg_len = match segment_seconds {
        Some(s) if s > 0.0 => {
            let len = (s * sample_rate).round() as usize;
            if len >= 2 && len <= samples.len() {
                len
            } else {
                samples.len()
            }
        }
        _ => samples.len(),
    };
    let n_seg = samples.len() / seg_len;
    let coeffs = window.coefficients(seg_len);
    let window_power = coeffs.iter().map(|w| w * w).sum::<f64>() / seg_len as f64;
    let fft = FftPlanner::new().plan_fft_forward(seg_len);
    let (low, high) = (f_center - half_band, f_center + half_band);

    let mut total = 0.0;
    for seg in samples.chunks_exact(seg_len).take(n_seg) {
        total += segment_band_power(seg, &coeffs, window_power, &fft, sample_rate, low, high)?;
    }
    Ok((total / n_seg as f64).sqrt())
}

/// `20 log10(value / reference)`.
pub fn to_db(value: f64, reference: f64) -> Result<f64> {
    if !(value > 0.0) || !(reference > 0.0) || !value.is_finite() || !reference.is_finite() {
        return Err(Error::DbDomain { value, reference });
    }
    Ok(20.0 * (value / reference).log10())
}

/// Arithmetic mean of microphone levels in dB (not an energy average).
pub fn label_from_mics(mic_levels_db: &[f64]) -> Result<f64> {
    if mic_levels_db.is_empty() {
        return Err(Error::InvalidInput("no microphone levels".into()));
    }
    Ok(mic_levels_db.iter().sum::<f64>() / mic_levels_db.len() as f64)
}

/// Reduces one acquisition to a feature row.
///
/// Acceleration channels become 2f band levels in dB, temperature channels
/// their window mean, and microphone channels are averaged into the label.
/// Levels at or below the floor (including silent channels) read as the
/// floor value.
pub fn extract_features(frame: &SpectralFrame, options: &ExtractOptions) -> Result<FeatureRow> {
    frame.validate()?;
    let f_center = 2.0 * frame.fundamental_f;
    for kind in [ChannelKind::Acceleration, ChannelKind::Microphone] {
        if frame.channels.iter().any(|c| c.kind == kind) && options.references.get(kind).is_none()
        {
            return Err(Error::InvalidInput(format!(
                "no dB reference configured for {kind:?} channels"
            )));
        }
    }
    let level_db = |c: &Channel| -> Result<f64> {
        let rms = band_rms_with(
            &c.samples,
            frame.sample_rate,
            f_center,
            options.half_band,
            options.window,
            options.segment_seconds,
        )?;
        let reference = options.references.get(c.kind).expect("checked above");
        if rms <= 0.0 {
            return Ok(options.db_floor);
        }
        Ok(to_db(rms, reference)?.max(options.db_floor))
    };

    let mut names = Vec::new();
    let mut features = Vec::new();
    let mut mic_levels = Vec::new();
    for c in &frame.channels {
        match c.kind {
            ChannelKind::Acceleration => {
                names.push(c.id.clone());
                features.push(level_db(c)?);
            }
            ChannelKind::Temperature => {
                names.push(c.id.clone());
                features.push(c.samples.iter().sum::<f64>() / c.samples.len() as f64);
            }
            ChannelKind::Microphone => mic_levels.push(level_db(c)?),
        }
    }
    let label_db = if mic_levels.is_empty() {
        None
    } else {
        Some(label_from_mics(&mic_levels)?)
    };
    Ok(FeatureRow {
        sample_id: frame.sample_id.clone(),
        condition_id: frame.condition_id.clone(),
        timestamp: frame.timestamp.clone(),
        feature_names: names,
        features,
        label_db,
    })
}
