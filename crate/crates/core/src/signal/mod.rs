//! Audio ingestion, synthetic corpus generation and SNR-controlled mixing.
//!
//! The synthetic generators stand in for a real speech/noise corpus at desk
//! scale; real WAV directories feed the same dataset machinery.

mod dataset;
mod synth;
mod wav;

pub use dataset::{build_dataset, build_dataset_from_dirs, Dataset, DatasetItem, DatasetSpec, SplitFractions};
pub use synth::{envelope_variance, synth_noise, synth_speechlike, NoiseKind};
pub use wav::{read_wav, write_wav};

use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 16_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignalKind {
    Clean,
    Noise,
    Mixture,
    Reconstructed,
}

/// Mono audio at a fixed sample rate with provenance.
#[derive(Clone, Debug)]
pub struct Signal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub kind: SignalKind,
    /// Acoustic SNR this mixture was created at, when `kind == Mixture`.
    pub snr_a_db: Option<f64>,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: u32, kind: SignalKind) -> Self {
        Signal {
            samples,
            sample_rate,
            kind,
            snr_a_db: None,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Mean-square power over the full utterance.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64
    }

    pub fn with_kind(mut self, kind: SignalKind) -> Self {
        self.kind = kind;
        self
    }
}

/// Scale `noise` so that `10*log10(P_clean / P_noise_scaled) == snr_a_db`
/// exactly in sample-power terms, then add it to `clean`.
pub fn mix_at_snr(clean: &Signal, noise: &Signal, snr_a_db: f64) -> Result<Signal> {
    if clean.len() != noise.len() {
        return Err(Error::input(format!(
            "mix_at_snr length mismatch: clean {} vs noise {}",
            clean.len(),
            noise.len()
        )));
    }
    let p_clean = clean.power();
    let p_noise = noise.power();
    if p_clean == 0.0 {
        return Err(Error::input("mix_at_snr: clean signal has zero power"));
    }
    if p_noise == 0.0 {
        return Err(Error::input("mix_at_snr: noise signal has zero power"));
    }
    let target_noise_power = p_clean / 10f64.powf(snr_a_db / 10.0);
    let scale = (target_noise_power / p_noise).sqrt();
    let samples: Vec<f64> = clean
        .samples
        .iter()
        .zip(noise.samples.iter())
        .map(|(c, n)| c + scale * n)
        .collect();
    Ok(Signal {
        samples,
        sample_rate: clean.sample_rate,
        kind: SignalKind::Mixture,
        snr_a_db: Some(snr_a_db),
    })
}

/// Measured SNR of `mixture` against `clean`, treating the residual as noise.
pub fn measured_snr_db(clean: &Signal, mixture: &Signal) -> f64 {
    let p_clean = clean.power();
    let p_resid = clean
        .samples
        .iter()
        .zip(mixture.samples.iter())
        .map(|(c, m)| (m - c) * (m - c))
        .sum::<f64>()
        / clean.len() as f64;
    if p_resid == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (p_clean / p_resid).log10()
    }
}
