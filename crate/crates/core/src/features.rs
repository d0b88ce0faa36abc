//! Scalar localization features of a sampled CIR.

use serde::{Deserialize, Serialize};

use crate::channel::SampledCir;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::Label;

/// Column names of [`FeatureVector::values`], in order.
pub const FEATURE_NAMES: [&str; 7] = [
    "rssi_dbm",
    "max_amplitude",
    "total_energy",
    "mean_excess_delay_ns",
    "rms_delay_spread_ns",
    "kurtosis",
    "tof_ns",
];
pub const N_FEATURES: usize = FEATURE_NAMES.len();

/// Thresholds of the extractor, as fractions of the peak magnitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Samples below this fraction are ignored by the delay moments.
    pub moment_threshold: f64,
    /// Leading-edge level of the time-of-flight detector.
    pub tof_threshold: f64,
    /// Absolute peak magnitude at or below which a CIR is uninformative.
    pub noise_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            moment_threshold: 0.05,
            tof_threshold: 0.2,
            noise_floor: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub rssi_dbm: f64,
    /// Peak |s_k|.
    pub max_amplitude: f64,
    /// Δt·Σ|s_k|².
    pub total_energy: f64,
    pub mean_excess_delay_s: f64,
    pub rms_delay_spread_s: f64,
    /// Pearson kurtosis of the magnitude sequence.
    pub kurtosis: f64,
    pub tof_s: f64,
    pub label: Label,
    pub position: Vec3,
    pub link_index: u32,
}

impl FeatureVector {
    /// Feature values in [`FEATURE_NAMES`] order; delays in nanoseconds.
    pub fn values(&self) -> [f64; N_FEATURES] {
        [
            self.rssi_dbm,
            self.max_amplitude,
            self.total_energy,
            self.mean_excess_delay_s * 1e9,
            self.rms_delay_spread_s * 1e9,
            self.kurtosis,
            self.tof_s * 1e9,
        ]
    }
}

pub fn extract_features(
    cir: &SampledCir,
    tx_power_dbm: f64,
    label: Label,
    position: Vec3,
    link_index: u32,
) -> Result<FeatureVector> {
    extract_features_with(&FeatureConfig::default(), cir, tx_power_dbm, label, position, link_index)
}

pub fn extract_features_with(
    cfg: &FeatureConfig,
    cir: &SampledCir,
    tx_power_dbm: f64,
    label: Label,
    position: Vec3,
    link_index: u32,
) -> Result<FeatureVector> {
    let mags: Vec<f64> = cir.samples.iter().map(|s| s.norm()).collect();
    let peak = mags.iter().copied().fold(0.0, f64::max);
    if !(peak > cfg.noise_floor && peak.is_finite()) {
        return Err(Error::Uninformative);
    }

    let power: Vec<f64> = mags.iter().map(|m| m * m).collect();
    let total_energy = cir.sample_interval_s * power.iter().sum::<f64>();

    // Power-weighted delay moments over the samples above the threshold,
    // two passes.
    let floor = cfg.moment_threshold * peak;
    let kept: Vec<usize> = (0..mags.len()).filter(|&k| mags[k] >= floor).collect();
    let weight: f64 = kept.iter().map(|&k| power[k]).sum();
    let mean = kept.iter().map(|&k| power[k] * cir.time_of(k)).sum::<f64>() / weight;
    let var = kept
        .iter()
        .map(|&k| power[k] * (cir.time_of(k) - mean).powi(2))
        .sum::<f64>()
        / weight;

    let kurtosis = pearson_kurtosis(&mags).ok_or(Error::Uninformative)?;

    let level = cfg.tof_threshold * peak;
    let first = mags.iter().position(|&m| m >= level).expect("peak reaches its own threshold");
    let tof_s = if first == 0 {
        cir.time_of(0)
    } else {
        // Linear interpolation of the crossing between the straddling samples.
        let (lo, hi) = (mags[first - 1], mags[first]);
        let frac = (level - lo) / (hi - lo);
        cir.time_of(first - 1) + frac * cir.sample_interval_s
    };

    Ok(FeatureVector {
        rssi_dbm: tx_power_dbm + 10.0 * (total_energy / cir.bandwidth_hz).log10(),
        max_amplitude: peak,
        total_energy,
        mean_excess_delay_s: mean,
        rms_delay_spread_s: var.max(0.0).sqrt(),
        kurtosis,
        tof_s,
        label,
        position,
        link_index,
    })
}

/// `m4 / m2²` with central moments; `None` for a constant sequence.
fn pearson_kurtosis(x: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (m2, m4) = x.iter().fold((0.0, 0.0), |(m2, m4), &v| {
        let d2 = (v - mean) * (v - mean);
        (m2 + d2, m4 + d2 * d2)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    (m2 > 0.0).then(|| m4 / (m2 * m2))
}
