//! Training objectives and evaluation metrics: SI-SDR, MSE, ESTOI.
//!
//! Each metric exists in two forms where needed: a plain function over sample
//! slices for evaluation, and a graph builder producing a differentiable loss
//! node for training.

mod estoi;
mod resample;

pub use estoi::estoi;
pub use resample::resample_16k_to_10k;

use crate::error::{Error, Result};
use crate::signal::Signal;
use crate::tensor::{Graph, NodeId, Tensor};

/// SI-SDR values are clamped to this magnitude; the identity estimate hits
/// the positive clamp, an orthogonal estimate the negative one.
pub const SI_SDR_CLAMP_DB: f64 = 100.0;
const SI_SDR_EPS: f64 = 1e-12;
const LOG10_E10: f64 = 10.0 / std::f64::consts::LN_10;

/// Scale-invariant signal-to-distortion ratio in dB, clamped to +-100 dB.
///
/// With `alpha = <estimate, reference> / <reference, reference>`:
/// `10*log10(|alpha*reference|^2 / (|alpha*reference - estimate|^2 + 1e-12))`.
pub fn si_sdr_db(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::input(format!(
            "si_sdr length mismatch: {} vs {}",
            reference.len(),
            estimate.len()
        )));
    }
    if reference.len() < 2 {
        return Err(Error::input("si_sdr needs at least 2 samples"));
    }
    let rr: f64 = reference.iter().map(|v| v * v).sum();
    if rr == 0.0 {
        return Err(Error::input("si_sdr reference is all zero"));
    }
    let er: f64 = estimate.iter().zip(reference.iter()).map(|(e, r)| e * r).sum();
    let alpha = er / rr;
    let target_power = alpha * alpha * rr;
    if target_power == 0.0 {
        // Orthogonal (or zero) estimate: the projection is degenerate.
        return Ok(-SI_SDR_CLAMP_DB);
    }
    let err_power: f64 = estimate
        .iter()
        .zip(reference.iter())
        .map(|(e, r)| {
            let d = alpha * r - e;
            d * d
        })
        .sum();
    let val = 10.0 * (target_power / (err_power + SI_SDR_EPS)).log10();
    Ok(val.clamp(-SI_SDR_CLAMP_DB, SI_SDR_CLAMP_DB))
}

/// Mean squared error.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::input(format!(
            "mse length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::input("mse of empty signals"));
    }
    Ok(a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64)
}

/// Differentiable SI-SDR training loss: the negated, clamped SI-SDR of the
/// graph-produced estimate against a constant reference.
///
/// A bit-exactly zero projection (measure-zero during training) degenerates
/// to the -100 dB clamp as a constant, mirroring the plain metric.
pub fn si_sdr_loss(g: &mut Graph, estimate: NodeId, reference: &Tensor) -> Result<NodeId> {
    let rr_val: f64 = reference.data().iter().map(|v| v * v).sum();
    if rr_val == 0.0 {
        return Err(Error::input("si_sdr_loss reference is all zero"));
    }
    if g.value(estimate).shape() != reference.shape() {
        return Err(Error::input(format!(
            "si_sdr_loss shape mismatch: estimate {:?} vs reference {:?}",
            g.value(estimate).shape(),
            reference.shape()
        )));
    }
    let r = g.leaf(reference.clone());
    let er = g.mul(estimate, r)?;
    let er = g.sum(er);
    let rr = g.mul(r, r)?;
    let rr = g.sum(rr);
    let alpha = g.div(er, rr)?;
    let target = g.mul(r, alpha)?;
    let tt = g.mul(target, target)?;
    let tt = g.sum(tt);
    if g.data(tt)[0] == 0.0 {
        return Ok(g.leaf(Tensor::scalar(SI_SDR_CLAMP_DB)));
    }
    let diff = g.sub(target, estimate)?;
    let dd = g.mul(diff, diff)?;
    let dd = g.sum(dd);
    let den = g.add_scalar(dd, SI_SDR_EPS);
    let ratio = g.div(tt, den)?;
    let ln = g.ln(ratio)?;
    let db = g.scale(ln, LOG10_E10);
    let clamped = g.clamp(db, -SI_SDR_CLAMP_DB, SI_SDR_CLAMP_DB);
    Ok(g.neg(clamped))
}

/// Differentiable MSE loss against a constant reference.
pub fn mse_loss(g: &mut Graph, estimate: NodeId, reference: &Tensor) -> Result<NodeId> {
    if g.value(estimate).shape() != reference.shape() {
        return Err(Error::input(format!(
            "mse_loss shape mismatch: estimate {:?} vs reference {:?}",
            g.value(estimate).shape(),
            reference.shape()
        )));
    }
    let r = g.leaf(reference.clone());
    let diff = g.sub(estimate, r)?;
    let sq = g.mul(diff, diff)?;
    Ok(g.mean(sq))
}

/// Bundle of the evaluation metrics for one (reference, estimate) pair.
/// Fields are absent where the individual metric errored; `pesq` is a
/// reserved column and always absent.
#[derive(Clone, Debug, Default)]
pub struct MetricReport {
    pub si_sdr_db: Option<f64>,
    pub estoi: Option<f64>,
    pub mse: Option<f64>,
    pub pesq: Option<f64>,
}

pub fn report(reference: &Signal, estimate: &Signal) -> MetricReport {
    MetricReport {
        si_sdr_db: si_sdr_db(&reference.samples, &estimate.samples).ok(),
        estoi: estoi(reference, estimate).ok(),
        mse: mse(&reference.samples, &estimate.samples).ok(),
        pesq: None,
    }
}
