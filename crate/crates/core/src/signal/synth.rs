//! Synthetic speech-like and noise generators.
//!
//! Pure functions of `(seed, parameters)`: same seed, same samples. The
//! speech-like generator sums a handful of harmonics over a drifting pitch
//! trajectory, amplitude-modulated at a syllabic rate with genuine silent
//! gaps; the noise generator offers white and babble-like modulated variants.

use super::{Signal, SignalKind, SAMPLE_RATE};
use crate::rng::{derive_seed, rng_from_seed, GaussianSource};
use rand::Rng;
use std::f64::consts::PI;

const SPEECH_TAG: u64 = 0x5345;
const NOISE_TAG: u64 = 0x4e4f;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    White,
    /// White noise under a slow syllabic-rate amplitude envelope.
    Modulated,
}

/// Speech-like test signal: 3-6 harmonics of a pitch trajectory drifting in
/// 80-300 Hz, with a 2-8 Hz syllabic envelope that includes silent gaps.
/// Peak-normalized to 0.5.
pub fn synth_speechlike(seed: u64, duration_s: f64) -> Signal {
    assert!(duration_s > 0.0, "duration must be positive");
    let fs = SAMPLE_RATE as f64;
    let n = (duration_s * fs).round() as usize;
    let mut rng = rng_from_seed(derive_seed(seed, SPEECH_TAG));

    let f0: f64 = rng.gen_range(150.0..230.0);
    let f_dev: f64 = rng.gen_range(30.0..60.0);
    let f_rate: f64 = rng.gen_range(0.2..0.5);
    let f_phase: f64 = rng.gen_range(0.0..2.0 * PI);

    let n_harm: usize = rng.gen_range(3..=6);
    let amps: Vec<f64> = (1..=n_harm)
        .map(|h| rng.gen_range(0.8..1.2) / h as f64)
        .collect();
    let phases: Vec<f64> = (0..n_harm).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();

    let syll_rate: f64 = rng.gen_range(2.0..8.0);
    let syll_phase: f64 = rng.gen_range(0.0..2.0 * PI);
    let drift_rate: f64 = rng.gen_range(0.15..0.45);
    let drift_phase: f64 = rng.gen_range(0.0..2.0 * PI);

    // Gate threshold: the envelope is zero whenever sin(.) < gate, which
    // yields a silent gap of roughly 0.58/syll_rate seconds per cycle.
    let gate = 0.25;

    let mut samples = Vec::with_capacity(n);
    let mut phase = 0.0f64;
    let mut peak = 0.0f64;
    for i in 0..n {
        let t = i as f64 / fs;
        let pitch = (f0 + f_dev * (2.0 * PI * f_rate * t + f_phase).sin()).clamp(80.0, 300.0);
        phase += 2.0 * PI * pitch / fs;
        let mut v = 0.0;
        for h in 0..n_harm {
            v += amps[h] * ((h + 1) as f64 * phase + phases[h]).sin();
        }
        let syll = (((2.0 * PI * syll_rate * t + syll_phase).sin() - gate) / (1.0 - gate)).max(0.0);
        let drift = 0.7 + 0.3 * (2.0 * PI * drift_rate * t + drift_phase).sin();
        let s = v * syll * drift;
        if s.abs() > peak {
            peak = s.abs();
        }
        samples.push(s);
    }
    if peak > 0.0 {
        let norm = 0.5 / peak;
        for s in samples.iter_mut() {
            *s *= norm;
        }
    }
    Signal::new(samples, SAMPLE_RATE, SignalKind::Clean)
}

/// Noise generator with nominal unit variance (pre-mixing).
pub fn synth_noise(seed: u64, duration_s: f64, kind: NoiseKind) -> Signal {
    assert!(duration_s > 0.0, "duration must be positive");
    let fs = SAMPLE_RATE as f64;
    let n = (duration_s * fs).round() as usize;
    let mut gauss = GaussianSource::new(derive_seed(seed, NOISE_TAG));
    let samples = match kind {
        NoiseKind::White => {
            let mut v = vec![0.0; n];
            gauss.fill(&mut v);
            v
        }
        NoiseKind::Modulated => {
            let mut rng = rng_from_seed(derive_seed(seed, NOISE_TAG ^ 0xABCD));
            let depth: f64 = 0.7;
            let rate: f64 = rng.gen_range(2.0..6.0);
            let phase: f64 = rng.gen_range(0.0..2.0 * PI);
            // E[(1 + d sin)^2] = 1 + d^2/2; divide it back out for unit variance.
            let norm = (1.0 + depth * depth / 2.0).sqrt();
            (0..n)
                .map(|i| {
                    let t = i as f64 / fs;
                    let env = 1.0 + depth * (2.0 * PI * rate * t + phase).sin();
                    gauss.next() * env / norm
                })
                .collect()
        }
    };
    Signal::new(samples, SAMPLE_RATE, SignalKind::Noise)
}

/// Variance of 20 ms frame-RMS values; how "bursty" the amplitude envelope is.
pub fn envelope_variance(signal: &Signal) -> f64 {
    let frame = SAMPLE_RATE as usize / 50;
    let rms: Vec<f64> = signal
        .samples
        .chunks_exact(frame)
        .map(|c| (c.iter().map(|v| v * v).sum::<f64>() / frame as f64).sqrt())
        .collect();
    if rms.len() < 2 {
        return 0.0;
    }
    let mean = rms.iter().sum::<f64>() / rms.len() as f64;
    rms.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / rms.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn speechlike_is_deterministic_per_seed() {
        let a = synth_speechlike(5, 1.0);
        let b = synth_speechlike(5, 1.0);
        assert_eq!(a.samples, b.samples);
        let c = synth_speechlike(6, 1.0);
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn speechlike_spectral_centroid_is_below_1500_hz() {
        for seed in 0..5 {
            let s = synth_speechlike(seed, 3.0);
            let c = crate::dsp::spectral_centroid_hz(&s.samples, SAMPLE_RATE as f64);
            assert!(c < 1500.0, "seed {seed}: centroid {c}");
        }
    }

    #[test]
    fn speechlike_has_silent_gaps() {
        // At least one gap of >= 50 ms per 3 s of signal.
        for seed in 0..5 {
            let s = synth_speechlike(seed, 3.0);
            let thresh = 1e-3;
            let mut longest = 0usize;
            let mut run = 0usize;
            for &v in s.samples.iter() {
                if v.abs() < thresh {
                    run += 1;
                    longest = longest.max(run);
                } else {
                    run = 0;
                }
            }
            let ms = longest as f64 / SAMPLE_RATE as f64 * 1000.0;
            assert!(ms >= 50.0, "seed {seed}: longest gap {ms} ms");
        }
    }

    #[test]
    fn speechlike_peak_is_half() {
        let s = synth_speechlike(2, 1.0);
        let peak = s.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 0.5).abs() < 1e-12);
    }

    #[test]
    fn white_noise_variance_is_near_unit() {
        let s = synth_noise(0, 10.0, NoiseKind::White); // 160k samples
        let var = s.power();
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let a = synth_noise(3, 0.5, NoiseKind::Modulated);
        let b = synth_noise(3, 0.5, NoiseKind::Modulated);
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn modulated_noise_has_burstier_envelope_than_white() {
        let white = synth_noise(7, 4.0, NoiseKind::White);
        let modded = synth_noise(7, 4.0, NoiseKind::Modulated);
        assert!(envelope_variance(&modded) > envelope_variance(&white));
    }
}
