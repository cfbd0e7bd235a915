//! Frame-synchronous streaming inference.
//!
//! Every layer keeps exactly the history a causal operator needs (the last
//! `(K-1)*dilation` inputs of each convolution, running sums for cumulative
//! normalization, the overlap tail of each transpose convolution), so state
//! is constant in stream length. The arithmetic reuses the same kernels as
//! the graph forward with identical accumulation order, which makes chunked
//! streaming bit-identical to a whole-utterance pass -- channel noise
//! included, since the noise stream is consumed in frame order either way.

use crate::channel::{power_normalize, AwgnChannel, ChannelConfig, NormScope};
use crate::error::{Error, Result};
use crate::models::{layers, Enhancer, Order, System, TransNet};
use crate::tensor::graph::{conv1d_raw, conv_t1d_raw, cln_column_stats};
use crate::tensor::Tensor;

// ── Layer states ────────────────────────────────────────────────────

struct ConvStream {
    /// Last `(K-1)*dilation` raw inputs per channel, zero-initialized (the
    /// leading zeros double as the virtual left padding).
    hist: Vec<f64>,
    hb: usize,
}

impl ConvStream {
    fn new(layer: &layers::Conv1d) -> Self {
        let hb = (layer.kernel() - 1) * layer.dilation;
        ConvStream {
            hist: vec![0.0; layer.c_in() * hb],
            hb,
        }
    }

    fn state_len(&self) -> usize {
        self.hist.len()
    }

    /// Process `cols` new columns (must be a multiple of the stride).
    fn push(&mut self, layer: &layers::Conv1d, chunk: &[f64], cols: usize) -> Result<Vec<f64>> {
        let c_in = layer.c_in();
        let c_out = layer.c_out();
        let k = layer.kernel();
        let (s, d, pad) = (layer.stride, layer.dilation, layer.left_pad);
        if cols == 0 || cols % s != 0 {
            return Err(Error::input(format!(
                "conv stream chunk of {cols} columns is not a multiple of stride {s}"
            )));
        }
        debug_assert_eq!(chunk.len(), c_in * cols);
        let hb = self.hb;
        let tp = cols + pad;
        let mut xp = vec![0.0; c_in * tp];
        for ci in 0..c_in {
            xp[ci * tp..ci * tp + pad]
                .copy_from_slice(&self.hist[ci * hb + (hb - pad)..(ci + 1) * hb]);
            xp[ci * tp + pad..(ci + 1) * tp].copy_from_slice(&chunk[ci * cols..(ci + 1) * cols]);
        }
        let t_out = cols / s;
        let mut out = vec![0.0; c_out * t_out];
        conv1d_raw(
            &xp,
            tp,
            c_in,
            layer.weight.data(),
            layer.bias.as_ref().map(|b| b.data()),
            c_out,
            k,
            s,
            d,
            t_out,
            &mut out,
        );
        // Slide the history window.
        if hb > 0 {
            if cols >= hb {
                for ci in 0..c_in {
                    self.hist[ci * hb..(ci + 1) * hb]
                        .copy_from_slice(&chunk[ci * cols + cols - hb..(ci + 1) * cols]);
                }
            } else {
                for ci in 0..c_in {
                    let row = &mut self.hist[ci * hb..(ci + 1) * hb];
                    row.copy_within(cols.., 0);
                    row[hb - cols..].copy_from_slice(&chunk[ci * cols..(ci + 1) * cols]);
                }
            }
        }
        Ok(out)
    }
}

struct ConvTStream {
    /// Partial sums spilling past the emitted region: `K - stride` columns.
    carry: Vec<f64>,
    tail: usize,
}

impl ConvTStream {
    fn new(layer: &layers::ConvT1d) -> Self {
        let tail = layer.kernel().saturating_sub(layer.stride);
        ConvTStream {
            carry: vec![0.0; layer.c_out() * tail],
            tail,
        }
    }

    fn state_len(&self) -> usize {
        self.carry.len()
    }

    fn push(&mut self, layer: &layers::ConvT1d, chunk: &[f64], cols: usize) -> Result<Vec<f64>> {
        if cols == 0 {
            return Err(Error::input("conv transpose stream chunk is empty"));
        }
        let c_in = layer.c_in();
        let c_out = layer.c_out();
        let k = layer.kernel();
        let s = layer.stride;
        debug_assert_eq!(chunk.len(), c_in * cols);
        let emit_len = cols * s;
        let full_len = ((cols - 1) * s + k).max(emit_len);
        let tail = self.tail;
        let mut buf = vec![0.0; c_out * full_len];
        // Seed earlier contributions first so per-sample accumulation order
        // matches the whole-utterance pass.
        for co in 0..c_out {
            buf[co * full_len..co * full_len + tail]
                .copy_from_slice(&self.carry[co * tail..(co + 1) * tail]);
        }
        conv_t1d_raw(chunk, cols, c_in, layer.weight.data(), c_out, k, s, &mut buf);
        let mut out = vec![0.0; c_out * emit_len];
        match &layer.bias {
            Some(b) => {
                for co in 0..c_out {
                    let bv = b.data()[co];
                    for j in 0..emit_len {
                        out[co * emit_len + j] = buf[co * full_len + j] + bv;
                    }
                }
            }
            None => {
                for co in 0..c_out {
                    out[co * emit_len..(co + 1) * emit_len]
                        .copy_from_slice(&buf[co * full_len..co * full_len + emit_len]);
                }
            }
        }
        for co in 0..c_out {
            for j in 0..tail {
                self.carry[co * tail + j] = if emit_len + j < full_len {
                    buf[co * full_len + emit_len + j]
                } else {
                    0.0
                };
            }
        }
        Ok(out)
    }
}

struct ClnStream {
    s1: f64,
    s2: f64,
    cols_seen: usize,
}

impl ClnStream {
    fn new() -> Self {
        ClnStream {
            s1: 0.0,
            s2: 0.0,
            cols_seen: 0,
        }
    }

    fn push(&mut self, layer: &layers::Cln, chunk: &[f64], cols: usize) -> Vec<f64> {
        let c = layer.channels();
        let gv = layer.gain.data();
        let bv = layer.bias.data();
        let mut out = vec![0.0; c * cols];
        for tc in 0..cols {
            for ci in 0..c {
                let v = chunk[ci * cols + tc];
                self.s1 += v;
                self.s2 += v * v;
            }
            let n = (c * (self.cols_seen + tc + 1)) as f64;
            let (r, mu) = cln_column_stats(self.s1, self.s2, n, layer.eps);
            for ci in 0..c {
                out[ci * cols + tc] = gv[ci] * (chunk[ci * cols + tc] - mu) * r + bv[ci];
            }
        }
        self.cols_seen += cols;
        out
    }
}

fn prelu_apply(layer: &layers::Prelu, chunk: &[f64], cols: usize) -> Vec<f64> {
    let a = layer.alpha.data();
    let per_channel = a.len() > 1;
    chunk
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let al = if per_channel { a[i / cols] } else { a[0] };
            if v >= 0.0 {
                v
            } else {
                al * v
            }
        })
        .collect()
}

fn sigmoid_apply(chunk: &[f64]) -> Vec<f64> {
    chunk.iter().map(|&x| 1.0 / (1.0 + (-x).exp())).collect()
}

fn add_into(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b.iter()).map(|(x, y)| x + y).collect()
}

fn mul_into(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).collect()
}

// ── Enhancer stream ─────────────────────────────────────────────────

struct TcnBlockStream {
    conv_in: ConvStream,
    norm1: ClnStream,
    conv_d: ConvStream,
    norm2: ClnStream,
    conv_out: ConvStream,
}

pub struct EnhancerStream<'m> {
    model: &'m Enhancer,
    analysis: ConvStream,
    input_norm: ClnStream,
    bottleneck_in: ConvStream,
    blocks: Vec<TcnBlockStream>,
    mask_conv: ConvStream,
    synthesis: ConvTStream,
}

impl<'m> EnhancerStream<'m> {
    pub fn new(model: &'m Enhancer) -> Self {
        EnhancerStream {
            model,
            analysis: ConvStream::new(&model.analysis),
            input_norm: ClnStream::new(),
            bottleneck_in: ConvStream::new(&model.bottleneck_in),
            blocks: model
                .blocks
                .iter()
                .map(|b| TcnBlockStream {
                    conv_in: ConvStream::new(&b.conv_in),
                    norm1: ClnStream::new(),
                    conv_d: ConvStream::new(&b.conv_d),
                    norm2: ClnStream::new(),
                    conv_out: ConvStream::new(&b.conv_out),
                })
                .collect(),
            mask_conv: ConvStream::new(&model.mask_conv),
            synthesis: ConvTStream::new(&model.synthesis),
        }
    }

    pub fn reset(&mut self) {
        *self = EnhancerStream::new(self.model);
    }

    pub fn state_len(&self) -> usize {
        self.analysis.state_len()
            + self.bottleneck_in.state_len()
            + self
                .blocks
                .iter()
                .map(|b| {
                    b.conv_in.state_len() + b.conv_d.state_len() + b.conv_out.state_len()
                })
                .sum::<usize>()
            + self.mask_conv.state_len()
            + self.synthesis.state_len()
    }

    /// Push samples (a multiple of the hop) and get as many back.
    pub fn push(&mut self, samples: &[f64]) -> Result<Vec<f64>> {
        Ok(self.push_with_mask(samples)?.0)
    }

    /// Like [`EnhancerStream::push`], also returning the sigmoid mask for
    /// this chunk (one value per basis coefficient).
    pub fn push_with_mask(&mut self, samples: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let hop = self.model.cfg.hop();
        if samples.is_empty() || samples.len() % hop != 0 {
            return Err(Error::input(format!(
                "enhancer stream chunk of {} samples is not a multiple of hop {hop}",
                samples.len()
            )));
        }
        let cols = samples.len();
        let enc = self.analysis.push(&self.model.analysis, samples, cols)?;
        let fcols = cols / hop;
        let v = self.input_norm.push(&self.model.input_norm, &enc, fcols);
        let mut v = self
            .bottleneck_in
            .push(&self.model.bottleneck_in, &v, fcols)?;
        for (block, bs) in self.model.blocks.iter().zip(self.blocks.iter_mut()) {
            let t = bs.conv_in.push(&block.conv_in, &v, fcols)?;
            let t = prelu_apply(&block.act1, &t, fcols);
            let t = bs.norm1.push(&block.norm1, &t, fcols);
            let t = bs.conv_d.push(&block.conv_d, &t, fcols)?;
            let t = prelu_apply(&block.act2, &t, fcols);
            let t = bs.norm2.push(&block.norm2, &t, fcols);
            let t = bs.conv_out.push(&block.conv_out, &t, fcols)?;
            v = add_into(&v, &t);
        }
        let m = prelu_apply(&self.model.mask_act, &v, fcols);
        let m = self.mask_conv.push(&self.model.mask_conv, &m, fcols)?;
        let mask = sigmoid_apply(&m);
        let masked = mul_into(&enc, &mask);
        let out = self.synthesis.push(&self.model.synthesis, &masked, fcols)?;
        Ok((out, mask))
    }
}

// ── TransNet streams ────────────────────────────────────────────────

struct ResUnitStream {
    conv_d: ConvStream,
    conv_pw: ConvStream,
}

pub struct EncoderStream<'m> {
    model: &'m TransNet,
    conv_in: ConvStream,
    blocks: Vec<(Vec<ResUnitStream>, ConvStream)>,
    conv_out: ConvStream,
    norm: ClnStream,
}

impl<'m> EncoderStream<'m> {
    pub fn new(model: &'m TransNet) -> Self {
        EncoderStream {
            model,
            conv_in: ConvStream::new(&model.enc_conv_in),
            blocks: model
                .enc_blocks
                .iter()
                .map(|b| {
                    (
                        b.units
                            .iter()
                            .map(|u| ResUnitStream {
                                conv_d: ConvStream::new(&u.conv_d),
                                conv_pw: ConvStream::new(&u.conv_pw),
                            })
                            .collect(),
                        ConvStream::new(&b.down),
                    )
                })
                .collect(),
            conv_out: ConvStream::new(&model.enc_conv_out),
            norm: ClnStream::new(),
        }
    }

    pub fn reset(&mut self) {
        *self = EncoderStream::new(self.model);
    }

    pub fn state_len(&self) -> usize {
        self.conv_in.state_len()
            + self
                .blocks
                .iter()
                .map(|(us, d)| {
                    us.iter()
                        .map(|u| u.conv_d.state_len() + u.conv_pw.state_len())
                        .sum::<usize>()
                        + d.state_len()
                })
                .sum::<usize>()
            + self.conv_out.state_len()
    }

    /// Encode whole frames into power-normalized symbols.
    pub fn push(&mut self, samples: &[f64]) -> Result<Tensor> {
        let n = self.model.cfg.frame_len;
        if samples.is_empty() || samples.len() % n != 0 {
            return Err(Error::input(format!(
                "encoder stream chunk of {} samples is not a multiple of the frame length {n}",
                samples.len()
            )));
        }
        let mut cols = samples.len();
        let mut v = self.conv_in.push(&self.model.enc_conv_in, samples, cols)?;
        v = prelu_apply(&self.model.enc_act_in, &v, cols);
        for (block, (unit_streams, down)) in
            self.model.enc_blocks.iter().zip(self.blocks.iter_mut())
        {
            for (u, us) in block.units.iter().zip(unit_streams.iter_mut()) {
                let t = us.conv_d.push(&u.conv_d, &v, cols)?;
                let t = prelu_apply(&u.act, &t, cols);
                let t = us.conv_pw.push(&u.conv_pw, &t, cols)?;
                v = add_into(&v, &t);
            }
            v = down.push(&block.down, &v, cols)?;
            cols /= 2;
            v = prelu_apply(&block.act, &v, cols);
        }
        let v = self.conv_out.push(&self.model.enc_conv_out, &v, cols)?;
        let v = self.norm.push(&self.model.enc_norm, &v, cols);
        let z = Tensor::new(vec![self.model.cfg.c_last, cols], v)?;
        power_normalize(&z, NormScope::PerFrame, self.model.cfg.frame_cols())
    }
}

pub struct DecoderStream<'m> {
    model: &'m TransNet,
    conv_in: ConvStream,
    blocks: Vec<(ConvTStream, Vec<ResUnitStream>)>,
    conv_out: ConvStream,
}

impl<'m> DecoderStream<'m> {
    pub fn new(model: &'m TransNet) -> Self {
        DecoderStream {
            model,
            conv_in: ConvStream::new(&model.dec_conv_in),
            blocks: model
                .dec_blocks
                .iter()
                .map(|b| {
                    (
                        ConvTStream::new(&b.up),
                        b.units
                            .iter()
                            .map(|u| ResUnitStream {
                                conv_d: ConvStream::new(&u.conv_d),
                                conv_pw: ConvStream::new(&u.conv_pw),
                            })
                            .collect(),
                    )
                })
                .collect(),
            conv_out: ConvStream::new(&model.dec_conv_out),
        }
    }

    pub fn reset(&mut self) {
        *self = DecoderStream::new(self.model);
    }

    pub fn state_len(&self) -> usize {
        self.conv_in.state_len()
            + self
                .blocks
                .iter()
                .map(|(up, us)| {
                    up.state_len()
                        + us.iter()
                            .map(|u| u.conv_d.state_len() + u.conv_pw.state_len())
                            .sum::<usize>()
                })
                .sum::<usize>()
            + self.conv_out.state_len()
    }

    /// Decode whole frames of symbols back to waveform samples.
    pub fn push(&mut self, z: &Tensor) -> Result<Vec<f64>> {
        let fc = self.model.cfg.frame_cols();
        let (c, mut cols) = (z.shape()[0], z.shape()[1]);
        if c != self.model.cfg.c_last {
            return Err(Error::config(format!(
                "decoder stream: symbol channels {c} do not match c_last {}",
                self.model.cfg.c_last
            )));
        }
        if cols == 0 || cols % fc != 0 {
            return Err(Error::input(format!(
                "decoder stream chunk of {cols} columns is not a multiple of the frame's {fc}"
            )));
        }
        let mut v = self.conv_in.push(&self.model.dec_conv_in, z.data(), cols)?;
        v = prelu_apply(&self.model.dec_act_in, &v, cols);
        for (block, (up, unit_streams)) in
            self.model.dec_blocks.iter().zip(self.blocks.iter_mut())
        {
            v = up.push(&block.up, &v, cols)?;
            cols *= 2;
            v = prelu_apply(&block.act, &v, cols);
            for (u, us) in block.units.iter().zip(unit_streams.iter_mut()) {
                let t = us.conv_d.push(&u.conv_d, &v, cols)?;
                let t = prelu_apply(&u.act, &t, cols);
                let t = us.conv_pw.push(&u.conv_pw, &t, cols)?;
                v = add_into(&v, &t);
            }
        }
        self.conv_out.push(&self.model.dec_conv_out, &v, cols)
    }
}

// ── Full-system stream ──────────────────────────────────────────────

/// Frame-synchronous cascade: consumes frames of `n` samples, emits frames of
/// `n` samples, with channel noise drawn from the same seeded stream the
/// batch path uses.
pub struct SystemStream<'m> {
    system: &'m System,
    enhancer: EnhancerStream<'m>,
    encoder: EncoderStream<'m>,
    decoder: DecoderStream<'m>,
    channel: AwgnChannel,
    frames_processed: u64,
}

impl<'m> SystemStream<'m> {
    pub fn new(system: &'m System, chan_cfg: ChannelConfig) -> Self {
        Self::with_channel(system, AwgnChannel::new(chan_cfg))
    }

    pub fn with_channel(system: &'m System, channel: AwgnChannel) -> Self {
        SystemStream {
            system,
            enhancer: EnhancerStream::new(&system.enhancer),
            encoder: EncoderStream::new(&system.transnet),
            decoder: DecoderStream::new(&system.transnet),
            channel,
            frames_processed: 0,
        }
    }

    pub fn frame_len(&self) -> usize {
        self.system.frame_len()
    }

    pub fn frames_processed(&self) -> u64 {
        self.frames_processed
    }

    /// Reset to the freshly-constructed state (channel rewinds to its seed).
    pub fn reset(&mut self) {
        self.enhancer.reset();
        self.encoder.reset();
        self.decoder.reset();
        self.channel.reset();
        self.frames_processed = 0;
    }

    pub fn into_channel(self) -> AwgnChannel {
        self.channel
    }

    /// Total buffered f64 values across all layer states; constant in the
    /// number of frames processed.
    pub fn state_len(&self) -> usize {
        self.enhancer.state_len() + self.encoder.state_len() + self.decoder.state_len()
    }

    /// Process exactly one frame.
    pub fn process_frame(&mut self, frame: &[f64]) -> Result<Vec<f64>> {
        let n = self.frame_len();
        if frame.len() != n {
            return Err(Error::input(format!(
                "process_frame needs exactly {n} samples, got {}",
                frame.len()
            )));
        }
        self.process(frame)
    }

    /// Process any whole number of frames at once; a single call over a full
    /// utterance is the batch forward.
    pub fn process(&mut self, samples: &[f64]) -> Result<Vec<f64>> {
        let n = self.frame_len();
        if samples.is_empty() || samples.len() % n != 0 {
            return Err(Error::input(format!(
                "chunk of {} samples is not a whole number of {n}-sample frames",
                samples.len()
            )));
        }
        let fc = self.system.transnet.cfg.frame_cols();
        let out = match self.system.order {
            Order::EnhanceTransmit => {
                let e = self.enhancer.push(samples)?;
                let z = self.encoder.push(&e)?;
                let zn = self.channel.transmit(&z, fc);
                self.decoder.push(&zn)?
            }
            Order::TransmitEnhance => {
                let z = self.encoder.push(samples)?;
                let zn = self.channel.transmit(&z, fc);
                let r = self.decoder.push(&zn)?;
                self.enhancer.push(&r)?
            }
        };
        self.frames_processed += (samples.len() / n) as u64;
        Ok(out)
    }
}

// ── Latency reporting ───────────────────────────────────────────────

#[derive(Clone, Debug)]
pub struct LatencyReport {
    pub latency_samples: usize,
    pub latency_ms: f64,
    pub frames_measured: usize,
    pub p50_us: f64,
    pub p90_us: f64,
    pub p99_us: f64,
    pub max_us: f64,
}

impl LatencyReport {
    /// Median compute time versus the frame duration.
    pub fn realtime_headroom(&self) -> f64 {
        (self.latency_ms * 1000.0) / self.p50_us
    }
}

/// Algorithmic latency (one frame, exactly) plus per-frame compute-time
/// percentiles measured by streaming seeded noise through the cascade.
pub fn latency_report(
    system: &System,
    chan_cfg: ChannelConfig,
    frames: usize,
) -> Result<LatencyReport> {
    let n = system.frame_len();
    let mut stream = SystemStream::new(system, chan_cfg);
    let mut gauss = crate::rng::GaussianSource::new(0x1A7E);
    let mut times_us = Vec::with_capacity(frames);
    let mut frame = vec![0.0; n];
    for _ in 0..frames {
        for v in frame.iter_mut() {
            *v = gauss.next() * 0.1;
        }
        let t0 = std::time::Instant::now();
        let out = stream.process_frame(&frame)?;
        let dt = t0.elapsed();
        debug_assert_eq!(out.len(), n);
        times_us.push(dt.as_secs_f64() * 1e6);
    }
    times_us.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pct = |p: f64| -> f64 {
        let idx = ((times_us.len() as f64 - 1.0) * p).round() as usize;
        times_us[idx]
    };
    Ok(LatencyReport {
        latency_samples: n,
        latency_ms: n as f64 / 16_000.0 * 1000.0,
        frames_measured: frames,
        p50_us: pct(0.50),
        p90_us: pct(0.90),
        p99_us: pct(0.99),
        max_us: *times_us.last().unwrap(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Enhancer, EnhancerConfig, Order, System, TransNet, TransNetConfig};
    use crate::rng::GaussianSource;

    fn small_system(seed: u64) -> System {
        let enh = Enhancer::new(
            EnhancerConfig {
                window: 16,
                basis: 8,
                bottleneck: 4,
                hidden: 6,
                kernel: 3,
                blocks: 2,
                repeats: 1,
                eps: 1e-8,
            },
            seed,
        )
        .unwrap();
        let tn = TransNet::new(
            TransNetConfig {
                frame_len: 16,
                widths: [3, 4, 6, 6],
                c_last: 4,
                kernel_boundary: 5,
                kernel_residual: 3,
                kernel_stride: 4,
                dilations: [1, 3, 9],
                bias: true,
                eps: 1e-8,
            },
            seed + 1,
        )
        .unwrap();
        System::new(enh, tn, Order::EnhanceTransmit).unwrap()
    }

    fn frames(seed: u64, n: usize, count: usize) -> Vec<f64> {
        let mut g = GaussianSource::new(seed);
        (0..n * count).map(|_| g.next() * 0.2).collect()
    }

    #[test]
    fn reset_replays_identical_outputs() {
        let sys = small_system(1);
        let n = sys.frame_len();
        let input = frames(2, n, 6);
        let mut stream = SystemStream::new(&sys, ChannelConfig::new(8.0, 3));
        let mut first = Vec::new();
        for f in input.chunks(n) {
            first.extend(stream.process_frame(f).unwrap());
        }
        stream.reset();
        assert_eq!(stream.frames_processed(), 0);
        let mut second = Vec::new();
        for f in input.chunks(n) {
            second.extend(stream.process_frame(f).unwrap());
        }
        for (a, b) in first.iter().zip(second.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn first_frame_output_ignores_the_second_frame() {
        let sys = small_system(4);
        let n = sys.frame_len();
        let a = frames(5, n, 1);
        let b = frames(6, n, 1);
        let b_alt = frames(7, n, 1);
        let cfg = ChannelConfig::new(10.0, 9);

        let mut s1 = SystemStream::new(&sys, cfg);
        let out_a1 = s1.process_frame(&a).unwrap();
        let _ = s1.process_frame(&b).unwrap();

        let mut s2 = SystemStream::new(&sys, cfg);
        let out_a2 = s2.process_frame(&a).unwrap();
        let _ = s2.process_frame(&b_alt).unwrap();

        for (x, y) in out_a1.iter().zip(out_a2.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn state_size_is_constant_in_stream_length() {
        let sys = small_system(8);
        let n = sys.frame_len();
        let mut stream = SystemStream::new(&sys, ChannelConfig::new(10.0, 1));
        let initial = stream.state_len();
        assert!(initial > 0);
        for f in frames(9, n, 50).chunks(n) {
            stream.process_frame(f).unwrap();
        }
        assert_eq!(stream.state_len(), initial);
        assert_eq!(stream.frames_processed(), 50);
    }

    #[test]
    fn wrong_frame_length_is_a_framing_error() {
        let sys = small_system(10);
        let mut stream = SystemStream::new(&sys, ChannelConfig::noiseless(0));
        let err = stream.process_frame(&vec![0.1; 7]).unwrap_err();
        assert!(matches!(err, Error::Input(_)), "{err}");
        assert!(err.to_string().contains("16"), "{err}");
    }

    #[test]
    fn latency_report_matches_frame_arithmetic() {
        let sys = small_system(11);
        let rep = latency_report(&sys, ChannelConfig::new(10.0, 2), 32).unwrap();
        assert_eq!(rep.latency_samples, 16);
        assert_eq!(rep.latency_ms, 16.0 / 16_000.0 * 1000.0);
        assert_eq!(rep.frames_measured, 32);
        assert!(rep.p50_us > 0.0 && rep.p99_us >= rep.p50_us && rep.max_us >= rep.p99_us);
    }
}
