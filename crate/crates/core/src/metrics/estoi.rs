//! Extended short-time objective intelligibility.
//!
//! Pipeline: resample both signals to 10 kHz, drop silent frames by an energy
//! VAD on the clean signal (threshold 40 dB below the loudest frame), take
//! 256-sample 50%-overlap Hann-windowed DFTs, group magnitudes into 15
//! one-third-octave bands starting at 150 Hz, slide 384 ms (30-frame)
//! segments, normalize each segment's rows then columns to zero mean and unit
//! norm, and average the column inner products.

use super::resample::resample_16k_to_10k;
use crate::dsp::fft_in_place;
use crate::error::{Error, Result};
use crate::signal::Signal;
use std::f64::consts::PI;

const FS_ANALYSIS: f64 = 10_000.0;
const FRAME: usize = 256;
const HOP: usize = 128;
const NFFT: usize = 512;
const N_BANDS: usize = 15;
const BAND_START_HZ: f64 = 150.0;
const SEG_FRAMES: usize = 30; // 384 ms at 10 kHz with 12.8 ms hops
const VAD_RANGE_DB: f64 = 40.0;

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / (n - 1) as f64).cos()))
        .collect()
}

/// Per-band squared-magnitude summation matrix: band j covers DFT bins whose
/// center frequency lies within one-sixth octave of 150*2^(j/3) Hz.
fn band_edges() -> Vec<(usize, usize)> {
    let df = FS_ANALYSIS / NFFT as f64;
    (0..N_BANDS)
        .map(|j| {
            let cf = BAND_START_HZ * 2f64.powf(j as f64 / 3.0);
            let lo = cf * 2f64.powf(-1.0 / 6.0);
            let hi = cf * 2f64.powf(1.0 / 6.0);
            let b_lo = (lo / df).ceil() as usize;
            let b_hi = ((hi / df).ceil() as usize).min(NFFT / 2);
            (b_lo, b_hi.max(b_lo + 1))
        })
        .collect()
}

fn frame_starts(len: usize) -> Vec<usize> {
    if len < FRAME {
        return Vec::new();
    }
    (0..=(len - FRAME)).step_by(HOP).collect()
}

/// One-third-octave band magnitudes, `[N_BANDS][n_frames]`, for the frames
/// selected by `keep`.
fn band_spectrogram(x: &[f64], starts: &[usize], keep: &[bool], window: &[f64]) -> Vec<Vec<f64>> {
    let edges = band_edges();
    let n_kept = keep.iter().filter(|&&k| k).count();
    let mut bands = vec![vec![0.0; n_kept]; N_BANDS];
    let mut col = 0;
    for (fi, &s) in starts.iter().enumerate() {
        if !keep[fi] {
            continue;
        }
        let mut re = vec![0.0; NFFT];
        let mut im = vec![0.0; NFFT];
        for i in 0..FRAME {
            re[i] = x[s + i] * window[i];
        }
        fft_in_place(&mut re, &mut im);
        for (j, &(lo, hi)) in edges.iter().enumerate() {
            let mut p = 0.0;
            for b in lo..hi {
                p += re[b] * re[b] + im[b] * im[b];
            }
            bands[j][col] = p.sqrt();
        }
        col += 1;
    }
    bands
}

/// Zero-mean, unit-norm normalization; degenerate (constant) vectors get a
/// tiny denominator instead of a division by zero.
fn normalize(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = if norm > 0.0 { norm } else { 1e-20 };
    for x in v.iter_mut() {
        *x /= denom;
    }
}

pub fn estoi(clean: &Signal, processed: &Signal) -> Result<f64> {
    if clean.len() != processed.len() {
        return Err(Error::input(format!(
            "estoi length mismatch: {} vs {}",
            clean.len(),
            processed.len()
        )));
    }
    if clean.sample_rate != 16_000 {
        return Err(Error::input(format!(
            "estoi expects 16 kHz input, got {} Hz",
            clean.sample_rate
        )));
    }
    let x = resample_16k_to_10k(&clean.samples);
    let y = resample_16k_to_10k(&processed.samples);

    let starts = frame_starts(x.len());
    let window = hann(FRAME);
    // Energy VAD on the clean signal decides which frames both keep.
    let energies: Vec<f64> = starts
        .iter()
        .map(|&s| {
            (0..FRAME)
                .map(|i| {
                    let v = x[s + i] * window[i];
                    v * v
                })
                .sum::<f64>()
        })
        .collect();
    let peak = energies.iter().cloned().fold(0.0f64, f64::max);
    if peak <= 0.0 {
        return Err(Error::input("estoi: clean signal is silent"));
    }
    let thresh = peak * 10f64.powf(-VAD_RANGE_DB / 10.0);
    let keep: Vec<bool> = energies.iter().map(|&e| e > thresh).collect();
    let n_kept = keep.iter().filter(|&&k| k).count();
    if n_kept < SEG_FRAMES {
        return Err(Error::input(format!(
            "estoi: only {n_kept} active frames, need at least {SEG_FRAMES} (384 ms of speech)"
        )));
    }

    let xb = band_spectrogram(&x, &starts, &keep, &window);
    let yb = band_spectrogram(&y, &starts, &keep, &window);

    let n_frames = xb[0].len();
    let mut total = 0.0;
    let n_segments = n_frames - SEG_FRAMES + 1;
    for m in 0..n_segments {
        // Row normalization over the segment.
        let mut xs = vec![[0.0; SEG_FRAMES]; N_BANDS];
        let mut ys = vec![[0.0; SEG_FRAMES]; N_BANDS];
        for j in 0..N_BANDS {
            xs[j].copy_from_slice(&xb[j][m..m + SEG_FRAMES]);
            ys[j].copy_from_slice(&yb[j][m..m + SEG_FRAMES]);
            normalize(&mut xs[j]);
            normalize(&mut ys[j]);
        }
        // Column normalization, then the mean inner product over columns.
        let mut d = 0.0;
        for n in 0..SEG_FRAMES {
            let mut xc = [0.0; N_BANDS];
            let mut yc = [0.0; N_BANDS];
            for j in 0..N_BANDS {
                xc[j] = xs[j][n];
                yc[j] = ys[j][n];
            }
            normalize(&mut xc);
            normalize(&mut yc);
            d += xc.iter().zip(yc.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
        total += d / SEG_FRAMES as f64;
    }
    Ok(total / n_segments as f64)
}
