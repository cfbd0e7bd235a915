//! AWGN transmission channel with explicit power normalization.
//!
//! The paper leaves the power constraint that makes SNR_w meaningful
//! unstated; here symbols are normalized to unit mean square (per frame by
//! default) before the channel, and the noise variance is defined relative to
//! that unit power: `sigma^2 = 10^(-snr_w_db / 10)`.

use crate::error::{Error, Result};
use crate::rng::GaussianSource;
use crate::tensor::Tensor;

/// Encoded symbols: `[channels, downsampled_time]`, row-major.
pub type ChannelSymbols = Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormScope {
    /// Unit mean square over every frame's symbol block independently.
    PerFrame,
    /// Unit mean square over the whole utterance.
    PerUtterance,
}

#[derive(Clone, Copy, Debug)]
pub struct ChannelConfig {
    /// Wireless SNR in dB; `f64::INFINITY` means a noiseless channel.
    pub snr_w_db: f64,
    pub seed: u64,
    pub scope: NormScope,
}

impl ChannelConfig {
    pub fn new(snr_w_db: f64, seed: u64) -> Self {
        ChannelConfig {
            snr_w_db,
            seed,
            scope: NormScope::PerFrame,
        }
    }

    pub fn noiseless(seed: u64) -> Self {
        ChannelConfig::new(f64::INFINITY, seed)
    }

    pub fn noise_sigma(&self) -> f64 {
        if self.snr_w_db.is_infinite() {
            0.0
        } else {
            10f64.powf(-self.snr_w_db / 20.0)
        }
    }
}

/// Normalize symbols to unit mean square over the given scope.
/// `frame_cols` is the number of downsampled time steps per frame; it sets
/// the block size for [`NormScope::PerFrame`].
pub fn power_normalize(
    z: &ChannelSymbols,
    scope: NormScope,
    frame_cols: usize,
) -> Result<ChannelSymbols> {
    if z.is_empty() {
        return Err(Error::input("power_normalize: empty symbols"));
    }
    let (c, t) = (z.shape()[0], z.shape()[1]);
    let block = match scope {
        NormScope::PerFrame => frame_cols,
        NormScope::PerUtterance => t,
    };
    if block == 0 || t % block != 0 {
        return Err(Error::config(format!(
            "power_normalize: block of {block} columns does not divide {t}"
        )));
    }
    let x = z.data();
    let mut out = vec![0.0; c * t];
    let n = (c * block) as f64;
    for blk in 0..t / block {
        let lo = blk * block;
        let hi = lo + block;
        let mut ss = 0.0;
        for ci in 0..c {
            for tc in lo..hi {
                let v = x[ci * t + tc];
                ss += v * v;
            }
        }
        let ms = ss / n;
        if ms == 0.0 {
            return Err(Error::input(
                "power_normalize: all-zero symbol block, SNR undefined",
            ));
        }
        // Snap threshold shared with the graph op: already-unit blocks pass
        // through untouched, making normalization bit-exactly idempotent.
        let scale = if (ms - 1.0).abs() <= 1e-9 {
            1.0
        } else {
            ms.sqrt().recip()
        };
        for ci in 0..c {
            for tc in lo..hi {
                out[ci * t + tc] = x[ci * t + tc] * scale;
            }
        }
    }
    Tensor::new(vec![c, t], out)
}

/// Stateful AWGN channel. Noise is deterministic given `(seed, call index)`:
/// draws advance an internal ChaCha stream in frame order, so batch and
/// per-frame transmission of the same symbols see the same realizations.
#[derive(Clone, Debug)]
pub struct AwgnChannel {
    pub cfg: ChannelConfig,
    gauss: GaussianSource,
}

impl AwgnChannel {
    pub fn new(cfg: ChannelConfig) -> Self {
        AwgnChannel {
            cfg,
            gauss: GaussianSource::new(cfg.seed),
        }
    }

    /// Restore the freshly-constructed state (same seed, call index zero).
    pub fn reset(&mut self) {
        self.gauss = GaussianSource::new(self.cfg.seed);
    }

    /// Noise tensor shaped like `[c, t]` symbols, drawn frame block by frame
    /// block (each block row-major) so chunked and whole-utterance callers
    /// consume the stream identically.
    pub fn draw_noise(&mut self, c: usize, t: usize, frame_cols: usize) -> Tensor {
        let sigma = self.cfg.noise_sigma();
        let mut out = vec![0.0; c * t];
        if sigma == 0.0 {
            return Tensor::new(vec![c, t], out).expect("shape");
        }
        let block = if frame_cols == 0 { t } else { frame_cols };
        let mut blk_start = 0;
        while blk_start < t {
            let hi = (blk_start + block).min(t);
            for ci in 0..c {
                for tc in blk_start..hi {
                    out[ci * t + tc] = self.gauss.next() * sigma;
                }
            }
            blk_start = hi;
        }
        Tensor::new(vec![c, t], out).expect("shape")
    }

    /// Transmit unit-power symbols: returns `z + n` with
    /// `n ~ N(0, 10^(-snr_w/10))` i.i.d. In noiseless mode the input passes
    /// through bit-exactly.
    pub fn transmit(&mut self, z: &ChannelSymbols, frame_cols: usize) -> ChannelSymbols {
        if self.cfg.noise_sigma() == 0.0 {
            return z.clone();
        }
        let (c, t) = (z.shape()[0], z.shape()[1]);
        let noise = self.draw_noise(c, t, frame_cols);
        let data: Vec<f64> = z
            .data()
            .iter()
            .zip(noise.data().iter())
            .map(|(a, b)| a + b)
            .collect();
        Tensor::new(vec![c, t], data).expect("shape")
    }
}

/// `10*log10(P_in / P_(out-in))`; +inf sentinel when the vectors coincide.
pub fn empirical_snr_db(z_in: &[f64], z_out: &[f64]) -> Result<f64> {
    if z_in.len() != z_out.len() {
        return Err(Error::input(format!(
            "empirical_snr length mismatch: {} vs {}",
            z_in.len(),
            z_out.len()
        )));
    }
    if z_in.is_empty() {
        return Err(Error::input("empirical_snr of empty vectors"));
    }
    let p_in = z_in.iter().map(|v| v * v).sum::<f64>() / z_in.len() as f64;
    let p_noise = z_in
        .iter()
        .zip(z_out.iter())
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        / z_in.len() as f64;
    if p_noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (p_in / p_noise).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symbols(vals: Vec<f64>) -> Tensor {
        let n = vals.len();
        Tensor::new(vec![1, n], vals).unwrap()
    }

    #[test]
    fn constant_magnitude_normalizes_to_unit() {
        let z = symbols(vec![3.0, -3.0, 3.0, -3.0]);
        let y = power_normalize(&z, NormScope::PerUtterance, 0).unwrap();
        assert_eq!(y.data(), &[1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn unit_power_input_is_unchanged() {
        let z = symbols(vec![1.0, -1.0, 1.0, -1.0]);
        let y = power_normalize(&z, NormScope::PerUtterance, 0).unwrap();
        for (a, b) in z.data().iter().zip(y.data().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_output_has_unit_mean_square() {
        let vals: Vec<f64> = (0..64).map(|i| ((i * 31 % 17) as f64) * 0.37 - 2.0).collect();
        let z = Tensor::new(vec![4, 16], vals).unwrap();
        let y = power_normalize(&z, NormScope::PerFrame, 4).unwrap();
        for blk in 0..4 {
            let mut ss = 0.0;
            for c in 0..4 {
                for t in blk * 4..(blk + 1) * 4 {
                    ss += y.data()[c * 16 + t] * y.data()[c * 16 + t];
                }
            }
            let ms = ss / 16.0;
            assert!((ms - 1.0).abs() < 1e-12, "block {blk}: {ms}");
        }
    }

    #[test]
    fn noiseless_mode_is_bit_exact_passthrough() {
        let z = symbols(vec![0.2, -0.4, 1.1, 0.8]);
        let mut ch = AwgnChannel::new(ChannelConfig::noiseless(9));
        let y = ch.transmit(&z, 2);
        assert_eq!(z.data(), y.data());
    }

    #[test]
    fn noise_variance_matches_snr() {
        // 0 dB over unit power: sigma^2 = 1 within +-1% at 1e6 symbols.
        let n = 1_000_000;
        let z = Tensor::new(vec![1, n], vec![0.0; n]).unwrap();
        let mut ch = AwgnChannel::new(ChannelConfig::new(0.0, 7));
        let y = ch.transmit(&z, n);
        let var = y.data().iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn empirical_snr_recovers_config_within_tenth_db() {
        let n = 1_000_000;
        for snr in [0.0, 10.0, 20.0] {
            let z = Tensor::new(vec![1, n], vec![1.0; n]).unwrap();
            let mut ch = AwgnChannel::new(ChannelConfig::new(snr, 11));
            let y = ch.transmit(&z, n);
            let got = empirical_snr_db(z.data(), y.data()).unwrap();
            assert!((got - snr).abs() < 0.1, "snr {snr}: got {got}");
        }
    }

    #[test]
    fn identical_vectors_give_infinite_snr() {
        let z = vec![1.0, 2.0, 3.0];
        assert!(empirical_snr_db(&z, &z).unwrap().is_infinite());
    }

    #[test]
    fn unit_power_independent_noise_is_near_zero_db() {
        let n = 200_000;
        let mut a = crate::rng::GaussianSource::new(1);
        let mut b = crate::rng::GaussianSource::new(2);
        let z_in: Vec<f64> = (0..n).map(|_| a.next()).collect();
        let z_out: Vec<f64> = z_in.iter().map(|v| v + b.next()).collect();
        let snr = empirical_snr_db(&z_in, &z_out).unwrap();
        assert!(snr.abs() < 0.05, "snr {snr}");
    }

    #[test]
    fn noise_is_deterministic_per_seed_and_call_index() {
        let z = symbols(vec![0.5; 32]);
        let mut ch1 = AwgnChannel::new(ChannelConfig::new(10.0, 3));
        let mut ch2 = AwgnChannel::new(ChannelConfig::new(10.0, 3));
        let a1 = ch1.transmit(&z, 8);
        let a2 = ch1.transmit(&z, 8);
        let b1 = ch2.transmit(&z, 8);
        let b2 = ch2.transmit(&z, 8);
        assert_eq!(a1.data(), b1.data());
        assert_eq!(a2.data(), b2.data());
        assert_ne!(a1.data(), a2.data());
        // reset rewinds to call index zero
        ch1.reset();
        let again = ch1.transmit(&z, 8);
        assert_eq!(a1.data(), again.data());
    }

    #[test]
    fn all_zero_symbols_error_on_normalization() {
        let z = symbols(vec![0.0; 8]);
        assert!(power_normalize(&z, NormScope::PerUtterance, 0).is_err());
    }

    #[test]
    fn noise_statistics_within_bounds() {
        // |mean| < 4*sigma/sqrt(N), |var - sigma^2| < 5*sigma^2*sqrt(2/N).
        let n = 200_000usize;
        let sigma = ChannelConfig::new(10.0, 5).noise_sigma();
        let mut ch = AwgnChannel::new(ChannelConfig::new(10.0, 5));
        let noise = ch.draw_noise(1, n, n);
        let mean = noise.data().iter().sum::<f64>() / n as f64;
        let var = noise.data().iter().map(|v| v * v).sum::<f64>() / n as f64 - mean * mean;
        assert!(mean.abs() < 4.0 * sigma / (n as f64).sqrt(), "mean {mean}");
        let s2 = sigma * sigma;
        assert!(
            (var - s2).abs() < 5.0 * s2 * (2.0 / n as f64).sqrt(),
            "var {var} vs {s2}"
        );
    }
}
