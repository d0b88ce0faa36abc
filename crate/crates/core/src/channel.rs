//! Sparse channel impulse response, its band-limited sampled reconstruction,
//! and augmentation by bandwidth sweep and noise.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::RadioConfig;
use crate::tracer::LinkResult;

/// Samples kept before the first tap, in units of 1/B.
pub const LEAD_GUARD_BANDWIDTHS: f64 = 5.0;
/// Samples required after the last tap, in units of 1/B.
pub const TRAIL_GUARD_BANDWIDTHS: f64 = 10.0;

/// One multipath component `a·δ(t - τ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tap {
    pub delay_s: f64,
    pub amplitude: Complex64,
}

/// `h(τ) = Σ a_i δ(τ - τ_i)` as a delay-sorted tap list.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseCir {
    taps: Vec<Tap>,
}

impl SparseCir {
    /// Sorts the taps by delay. Fails on an empty list or a negative or
    /// non-finite delay.
    pub fn new(mut taps: Vec<Tap>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::NoChannel);
        }
        if taps.iter().any(|t| !(t.delay_s >= 0.0 && t.delay_s.is_finite())) {
            return Err(Error::InvalidArgument("tap delays must be finite and non-negative".into()));
        }
        taps.sort_by(|a, b| a.delay_s.total_cmp(&b.delay_s));
        Ok(SparseCir { taps })
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn n_taps(&self) -> usize {
        self.taps.len()
    }

    pub fn scaled(&self, alpha: Complex64) -> SparseCir {
        SparseCir {
            taps: self
                .taps
                .iter()
                .map(|t| Tap {
                    delay_s: t.delay_s,
                    amplitude: t.amplitude * alpha,
                })
                .collect(),
        }
    }

    pub fn delayed(&self, delta_s: f64) -> SparseCir {
        SparseCir {
            taps: self
                .taps
                .iter()
                .map(|t| Tap {
                    delay_s: t.delay_s + delta_s,
                    amplitude: t.amplitude,
                })
                .collect(),
        }
    }
}

/// One tap per traced path, copied verbatim.
pub fn to_sparse_cir(link: &LinkResult) -> Result<SparseCir> {
    SparseCir::new(
        link.paths
            .iter()
            .map(|p| Tap {
                delay_s: p.delay_s,
                amplitude: p.gain,
            })
            .collect(),
    )
}

/// Uniformly sampled band-limited CIR.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledCir {
    pub samples: Vec<Complex64>,
    pub sample_interval_s: f64,
    /// Time of `samples[0]`.
    pub t0_s: f64,
    pub bandwidth_hz: f64,
}

impl SampledCir {
    pub fn time_of(&self, k: usize) -> f64 {
        self.t0_s + k as f64 * self.sample_interval_s
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Ideal low-pass reconstruction:
/// `s_k = Σ_i a_i · B · sinc(B·(t_k - τ_i))` on the grid
/// `t_k = t0 + k/(oversample·B)`, `t0 = max(0, τ_1 - 5/B)`.
pub fn band_limit(cir: &SparseCir, radio: &RadioConfig) -> Result<SampledCir> {
    let b = radio.bandwidth_hz;
    let t0 = (cir.taps[0].delay_s - LEAD_GUARD_BANDWIDTHS / b).max(0.0);
    band_limit_at(cir, radio, t0)
}

/// [`band_limit`] with an explicit start time.
pub fn band_limit_at(cir: &SparseCir, radio: &RadioConfig, t0_s: f64) -> Result<SampledCir> {
    let b = radio.bandwidth_hz;
    let ov = radio.oversampling_factor.max(2) as usize;
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidArgument(format!("bandwidth {b} Hz must be positive")));
    }
    let dt = 1.0 / (ov as f64 * b);
    let n = (radio.cir_window_s / dt).ceil() as usize;
    let covered_s = t0_s + n as f64 * dt;
    let needed_s = cir.taps.last().map_or(0.0, |t| t.delay_s) + TRAIL_GUARD_BANDWIDTHS / b;
    if covered_s < needed_s {
        return Err(Error::WindowTooShort { covered_s, needed_s });
    }

    let mut samples = vec![Complex64::new(0.0, 0.0); n];
    // Residue class r = k mod ov is split as x_k = (base_r + k / ov) + frac_r
    // with an integer base and frac_r in [-1/2, 1/2], so sin(π x_k) is
    // ±sin(π frac_r) and near a zero of x the numerator and denominator are
    // built from the same small number.
    let mut base = vec![0.0; ov];
    let mut frac = vec![0.0; ov];
    let mut sines = vec![0.0; ov];
    for tap in &cir.taps {
        let u = b * (t0_s - tap.delay_s);
        for r in 0..ov {
            let g = u + r as f64 / ov as f64;
            base[r] = g.round();
            frac[r] = g - base[r];
            sines[r] = (PI * frac[r]).sin();
        }
        let scale = tap.amplitude * b;
        for (k, out) in samples.iter_mut().enumerate() {
            let r = k % ov;
            let whole = base[r] + (k / ov) as f64;
            let x = whole + frac[r];
            let sinc = if whole == 0.0 && frac[r].abs() < 1e-9 {
                1.0 - (PI * frac[r]).powi(2) / 6.0
            } else {
                let s = if whole.rem_euclid(2.0) == 0.0 { sines[r] } else { -sines[r] };
                s / (PI * x)
            };
            *out += scale * sinc;
        }
    }
    Ok(SampledCir {
        samples,
        sample_interval_s: dt,
        t0_s,
        bandwidth_hz: b,
    })
}

/// How many augmented samples to derive from one link, and how.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSpec {
    pub bandwidth_set_hz: Vec<f64>,
    /// SNR of the additive complex Gaussian floor; `None` disables it.
    pub noise_snr_db: Option<f64>,
    /// Log-normal shape of the multiplicative magnitude jitter; 0 disables it.
    pub skew: f64,
    pub replicas_per_link: u32,
    pub rng_seed: u64,
}

/// IEEE 802.15.4 UWB channel bandwidth.
pub const UWB_BANDWIDTH_HZ: f64 = 499.2e6;
/// Bandwidths of the default augmentation sweep.
pub const SWEEP_BANDWIDTHS_HZ: [f64; 3] = [250e6, UWB_BANDWIDTH_HZ, 900e6];
pub const DEFAULT_SNR_DB: f64 = 20.0;
pub const DEFAULT_SKEW: f64 = 0.2;

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            bandwidth_set_hz: vec![UWB_BANDWIDTH_HZ],
            noise_snr_db: Some(DEFAULT_SNR_DB),
            skew: DEFAULT_SKEW,
            replicas_per_link: 1,
            rng_seed: 0,
        }
    }
}

impl AugmentSpec {
    /// Bandwidth sweep over [`SWEEP_BANDWIDTHS_HZ`].
    pub fn sweep(replicas_per_link: u32, rng_seed: u64) -> Self {
        AugmentSpec {
            bandwidth_set_hz: SWEEP_BANDWIDTHS_HZ.to_vec(),
            replicas_per_link,
            rng_seed,
            ..AugmentSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Err(Error::validation("augment spec", reason));
        if self.bandwidth_set_hz.is_empty() {
            return bad("bandwidth set is empty");
        }
        if self.bandwidth_set_hz.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return bad("every bandwidth must be positive");
        }
        if self.replicas_per_link < 1 {
            return bad("replicas per link must be >= 1");
        }
        if !(self.skew >= 0.0 && self.skew.is_finite()) {
            return bad("skew must be >= 0");
        }
        if self.noise_snr_db.is_some_and(|s| s.is_nan()) {
            return bad("SNR must be a number");
        }
        Ok(())
    }

    /// Number of sampled CIRs produced per link.
    pub fn outputs_per_link(&self) -> usize {
        self.replicas_per_link as usize * self.bandwidth_set_hz.len()
    }
}

/// Random stream of one (link, replica) pair.
fn replica_rng(seed: u64, link_index: u32, replica: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((link_index as u64) << 32) | replica as u64);
    rng
}

/// Applies mean-one log-normal magnitude jitter and an additive circular
/// Gaussian floor at the configured SNR.
fn perturb(clean: &mut SampledCir, spec: &AugmentSpec, rng: &mut ChaCha8Rng) {
    let signal_energy: f64 = clean.samples.iter().map(|s| s.norm_sqr()).sum();
    if spec.skew > 0.0 {
        let bias = 0.5 * spec.skew * spec.skew;
        for s in clean.samples.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *s *= (spec.skew * g - bias).exp();
        }
    }
    if let Some(snr_db) = spec.noise_snr_db.filter(|s| s.is_finite()) {
        let variance = signal_energy / (clean.samples.len() as f64 * 10f64.powf(snr_db / 10.0));
        let sigma = (0.5 * variance).sqrt();
        for s in clean.samples.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *s += Complex64::new(re, im) * sigma;
        }
    }
}

/// Replica-major list of augmented reconstructions: for each replica, one
/// entry per bandwidth in set order. Pure function of its arguments.
pub fn augment(cir: &SparseCir, spec: &AugmentSpec, radio: &RadioConfig, link_index: u32) -> Result<Vec<SampledCir>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.outputs_per_link());
    for replica in 0..spec.replicas_per_link {
        let mut rng = replica_rng(spec.rng_seed, link_index, replica);
        for &b in &spec.bandwidth_set_hz {
            let mut sampled = band_limit(cir, &radio.with_bandwidth(b))?;
            perturb(&mut sampled, spec, &mut rng);
            out.push(sampled);
        }
    }
    Ok(out)
}
