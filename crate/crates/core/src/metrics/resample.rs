//! Polyphase windowed-sinc resampler for the exact 16 kHz -> 10 kHz (5/8)
//! ratio the intelligibility metric needs.

/// Upsample-by-5 / downsample-by-8 with a Blackman-windowed sinc prototype
/// designed on the 80 kHz virtual grid.
pub fn resample_16k_to_10k(x: &[f64]) -> Vec<f64> {
    const L: usize = 5;
    const M: usize = 8;
    // Half-width of the prototype on the upsampled grid.
    const HW: i64 = 80;

    let taps: Vec<f64> = {
        let n = (2 * HW + 1) as usize;
        let fc = 0.5 / M as f64; // cutoff at the post-decimation Nyquist
        (0..n)
            .map(|i| {
                let m = i as f64 - HW as f64;
                let sinc = if m == 0.0 {
                    2.0 * fc
                } else {
                    (2.0 * std::f64::consts::PI * fc * m).sin() / (std::f64::consts::PI * m)
                };
                let w = 0.42
                    - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()
                    + 0.08 * (4.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
                sinc * w * L as f64
            })
            .collect()
    };

    let n_in = x.len() as i64;
    let n_out = (x.len() * L) / M;
    let mut out = Vec::with_capacity(n_out);
    for m in 0..n_out as i64 {
        let p = m * M as i64; // position on the upsampled grid
        // x[k] contributes through taps[p - k*L + HW]
        let k_lo = (p - HW + L as i64 - 1).div_euclid(L as i64).max(0);
        let k_hi = ((p + HW) / L as i64).min(n_in - 1);
        let mut acc = 0.0;
        for k in k_lo..=k_hi {
            let ti = (p - k * L as i64 + HW) as usize;
            acc += x[k as usize] * taps[ti];
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn output_length_is_five_eighths() {
        assert_eq!(resample_16k_to_10k(&vec![0.0; 1600]).len(), 1000);
    }

    #[test]
    fn tone_survives_resampling() {
        // A 500 Hz tone at 16 kHz should come out as a 500 Hz tone at 10 kHz
        // with near-unit amplitude away from the filter edges.
        let f = 500.0;
        let x: Vec<f64> = (0..16000)
            .map(|i| (2.0 * PI * f * i as f64 / 16000.0).sin())
            .collect();
        let y = resample_16k_to_10k(&x);
        let skip = 200;
        let mut max_err = 0.0f64;
        for (m, &v) in y.iter().enumerate().skip(skip).take(y.len() - 2 * skip) {
            let expect = (2.0 * PI * f * m as f64 / 10000.0).sin();
            max_err = max_err.max((v - expect).abs());
        }
        assert!(max_err < 0.02, "max_err {max_err}");
    }

    #[test]
    fn resampling_is_linear_in_scale() {
        let x: Vec<f64> = (0..512).map(|i| ((i * 13 % 29) as f64) * 0.1 - 1.0).collect();
        let y1 = resample_16k_to_10k(&x);
        let scaled: Vec<f64> = x.iter().map(|v| 4.0 * v).collect();
        let y2 = resample_16k_to_10k(&scaled);
        for (a, b) in y1.iter().zip(y2.iter()) {
            assert!((4.0 * a - b).abs() < 1e-12);
        }
    }
}
