//! Small DSP helpers: radix-2 FFT and spectral utilities.

use std::f64::consts::PI;

/// In-place iterative radix-2 complex FFT. Length must be a power of two.
pub fn fft_in_place(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    assert_eq!(n, im.len());
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }

    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }

    let mut len = 2;
    while len <= n {
        let ang = -2.0 * PI / len as f64;
        let (wr, wi) = (ang.cos(), ang.sin());
        for start in (0..n).step_by(len) {
            let mut cr = 1.0;
            let mut ci = 0.0;
            for off in 0..len / 2 {
                let a = start + off;
                let b = a + len / 2;
                let tr = re[b] * cr - im[b] * ci;
                let ti = re[b] * ci + im[b] * cr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
                let ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
        }
        len <<= 1;
    }
}

/// Magnitude spectrum of a real signal zero-padded to `nfft` (power of two).
/// Returns `nfft/2 + 1` bins.
pub fn real_magnitude_spectrum(x: &[f64], nfft: usize) -> Vec<f64> {
    assert!(nfft.is_power_of_two());
    let mut re = vec![0.0; nfft];
    let mut im = vec![0.0; nfft];
    let n = x.len().min(nfft);
    re[..n].copy_from_slice(&x[..n]);
    fft_in_place(&mut re, &mut im);
    (0..=nfft / 2)
        .map(|i| (re[i] * re[i] + im[i] * im[i]).sqrt())
        .collect()
}

/// Power-weighted spectral centroid in Hz.
pub fn spectral_centroid_hz(x: &[f64], sample_rate: f64) -> f64 {
    let nfft = x.len().next_power_of_two();
    let mag = real_magnitude_spectrum(x, nfft);
    let df = sample_rate / nfft as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, m) in mag.iter().enumerate() {
        let p = m * m;
        num += i as f64 * df * p;
        den += p;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_of_single_tone_peaks_at_the_right_bin() {
        let n = 1024;
        let bin = 37;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * bin as f64 * i as f64 / n as f64).cos())
            .collect();
        let mag = real_magnitude_spectrum(&x, n);
        let peak = mag
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, bin);
        assert!((mag[bin] - n as f64 / 2.0).abs() < 1e-6);
    }

    #[test]
    fn centroid_of_pure_tone_is_its_frequency() {
        let fs = 16000.0;
        let f = 1000.0;
        let x: Vec<f64> = (0..8192)
            .map(|i| (2.0 * PI * f * i as f64 / fs).sin())
            .collect();
        let c = spectral_centroid_hz(&x, fs);
        assert!((c - f).abs() < 20.0, "centroid {c}");
    }
}
