//! Analog joint source-channel codec: a strided causal encoder that maps
//! waveform frames to real-valued channel symbols, and a mirrored decoder
//! that upsamples them back.
//!
//! Encoder: boundary conv (4 ch), three blocks of [3 residual units with
//! dilations 1/3/9 + stride-2 conv] at 8/16/16 channels, boundary conv to
//! `c_last` channels, trainable cumulative layer norm, then per-frame power
//! normalization. Total downsampling is 8, so a frame of `n` samples yields
//! `k = c_last * n / 8` symbols and the bandwidth ratio is `R = c_last / 8`.
//! The decoder mirrors the structure in reverse, without the norm, using
//! transpose convolutions for upsampling.

use super::layers::{init_rng, Cln, ClnNodes, Conv1d, Conv1dNodes, ConvT1d, ConvT1dNodes, Prelu, PreluNodes};
use crate::channel::ChannelSymbols;
use crate::error::{Error, Result};
use crate::tensor::{Graph, NodeId, Tensor};
use rand_chacha::ChaCha8Rng;

pub const DOWNSAMPLE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransNetConfig {
    /// Frame length n in samples (48/80/144 for 3/5/9 ms at 16 kHz).
    pub frame_len: usize,
    /// Channel counts of the boundary conv and the three encoder blocks.
    pub widths: [usize; 4],
    /// Last-layer channel count; sets the bandwidth ratio R = c_last/8.
    pub c_last: usize,
    pub kernel_boundary: usize,
    pub kernel_residual: usize,
    pub kernel_stride: usize,
    pub dilations: [usize; 3],
    /// Disable every conv bias (used to probe the all-zero error path).
    pub bias: bool,
    pub eps: f64,
}

impl TransNetConfig {
    pub fn desk_default(latency_ms: u32, c_last: usize) -> Result<Self> {
        let cfg = TransNetConfig {
            frame_len: super::frame_len_for_latency(latency_ms)?,
            widths: [4, 8, 16, 16],
            c_last,
            kernel_boundary: 7,
            kernel_residual: 3,
            kernel_stride: 4,
            dilations: [1, 3, 9],
            bias: true,
            eps: 1e-8,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Bandwidth compression ratio R = k/n = c_last / 8.
    pub fn ratio(&self) -> f64 {
        self.c_last as f64 / DOWNSAMPLE as f64
    }

    /// Downsampled columns per frame.
    pub fn frame_cols(&self) -> usize {
        self.frame_len / DOWNSAMPLE
    }

    /// Channel symbols per frame: k = R*n.
    pub fn symbols_per_frame(&self) -> usize {
        self.c_last * self.frame_cols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_len == 0 || self.frame_len % DOWNSAMPLE != 0 {
            return Err(Error::config(format!(
                "frame_len {} must be a positive multiple of {DOWNSAMPLE}",
                self.frame_len
            )));
        }
        if self.c_last == 0 {
            return Err(Error::config("c_last must be positive"));
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(Error::config("widths must be positive"));
        }
        if self.kernel_stride < 2 {
            return Err(Error::config("stride conv kernel must cover the stride"));
        }
        Ok(())
    }
}

/// y = x + pointwise(act(dilated_conv(x)))
#[derive(Clone, Debug)]
pub(crate) struct ResUnit {
    pub conv_d: Conv1d,
    pub act: Prelu,
    pub conv_pw: Conv1d,
}

pub(crate) struct ResUnitNodes {
    conv_d: Conv1dNodes,
    act: PreluNodes,
    conv_pw: Conv1dNodes,
}

impl ResUnit {
    fn new(ch: usize, kernel: usize, dilation: usize, bias: bool, rng: &mut ChaCha8Rng) -> Self {
        ResUnit {
            conv_d: Conv1d::causal(ch, ch, kernel, 1, dilation, bias, rng),
            act: Prelu::per_channel(ch),
            conv_pw: Conv1d::causal(ch, ch, 1, 1, 1, bias, rng).zeroed(),
        }
    }

    fn bind(&self, g: &mut Graph, sink: &mut Vec<NodeId>) -> ResUnitNodes {
        ResUnitNodes {
            conv_d: self.conv_d.bind(g, sink),
            act: self.act.bind(g, sink),
            conv_pw: self.conv_pw.bind(g, sink),
        }
    }

    fn fwd(&self, g: &mut Graph, n: &ResUnitNodes, x: NodeId) -> Result<NodeId> {
        let v = self.conv_d.fwd(g, &n.conv_d, x)?;
        let v = self.act.fwd(g, &n.act, v)?;
        let v = self.conv_pw.fwd(g, &n.conv_pw, v)?;
        g.add(x, v)
    }

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        self.conv_d.visit(&format!("{prefix}.conv_d"), f);
        self.act.visit(&format!("{prefix}.act"), f);
        self.conv_pw.visit(&format!("{prefix}.conv_pw"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.conv_d.visit_mut(&format!("{prefix}.conv_d"), f);
        self.act.visit_mut(&format!("{prefix}.act"), f);
        self.conv_pw.visit_mut(&format!("{prefix}.conv_pw"), f);
    }
}

#[derive(Clone, Debug)]
pub(crate) struct EncBlock {
    pub units: Vec<ResUnit>,
    pub down: Conv1d, // stride-2 channel change
    pub act: Prelu,
}

pub(crate) struct EncBlockNodes {
    units: Vec<ResUnitNodes>,
    down: Conv1dNodes,
    act: PreluNodes,
}

impl EncBlock {
    fn new(cfg: &TransNetConfig, c_in: usize, c_out: usize, rng: &mut ChaCha8Rng) -> Self {
        EncBlock {
            units: cfg
                .dilations
                .iter()
                .map(|&d| ResUnit::new(c_in, cfg.kernel_residual, d, cfg.bias, rng))
                .collect(),
            down: Conv1d::causal(c_in, c_out, cfg.kernel_stride, 2, 1, cfg.bias, rng),
            act: Prelu::per_channel(c_out),
        }
    }

    fn bind(&self, g: &mut Graph, sink: &mut Vec<NodeId>) -> EncBlockNodes {
        EncBlockNodes {
            units: self.units.iter().map(|u| u.bind(g, sink)).collect(),
            down: self.down.bind(g, sink),
            act: self.act.bind(g, sink),
        }
    }

    fn fwd(&self, g: &mut Graph, n: &EncBlockNodes, x: NodeId) -> Result<NodeId> {
        let mut v = x;
        for (u, un) in self.units.iter().zip(n.units.iter()) {
            v = u.fwd(g, un, v)?;
        }
        let v = self.down.fwd(g, &n.down, v)?;
        self.act.fwd(g, &n.act, v)
    }

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        for (i, u) in self.units.iter().enumerate() {
            u.visit(&format!("{prefix}.units.{i}"), f);
        }
        self.down.visit(&format!("{prefix}.down"), f);
        self.act.visit(&format!("{prefix}.act"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        for (i, u) in self.units.iter_mut().enumerate() {
            u.visit_mut(&format!("{prefix}.units.{i}"), f);
        }
        self.down.visit_mut(&format!("{prefix}.down"), f);
        self.act.visit_mut(&format!("{prefix}.act"), f);
    }
}

#[derive(Clone, Debug)]
pub(crate) struct DecBlock {
    pub up: ConvT1d, // stride-2 upsampling
    pub act: Prelu,
    pub units: Vec<ResUnit>,
}

pub(crate) struct DecBlockNodes {
    up: ConvT1dNodes,
    act: PreluNodes,
    units: Vec<ResUnitNodes>,
}

impl DecBlock {
    fn new(cfg: &TransNetConfig, c_in: usize, c_out: usize, rng: &mut ChaCha8Rng) -> Self {
        DecBlock {
            up: ConvT1d::new(c_in, c_out, cfg.kernel_stride, 2, cfg.bias, rng),
            act: Prelu::per_channel(c_out),
            units: cfg
                .dilations
                .iter()
                .map(|&d| ResUnit::new(c_out, cfg.kernel_residual, d, cfg.bias, rng))
                .collect(),
        }
    }

    fn bind(&self, g: &mut Graph, sink: &mut Vec<NodeId>) -> DecBlockNodes {
        DecBlockNodes {
            up: self.up.bind(g, sink),
            act: self.act.bind(g, sink),
            units: self.units.iter().map(|u| u.bind(g, sink)).collect(),
        }
    }

    fn fwd(&self, g: &mut Graph, n: &DecBlockNodes, x: NodeId) -> Result<NodeId> {
        let v = self.up.fwd(g, &n.up, x)?;
        let mut v = self.act.fwd(g, &n.act, v)?;
        for (u, un) in self.units.iter().zip(n.units.iter()) {
            v = u.fwd(g, un, v)?;
        }
        Ok(v)
    }

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        self.up.visit(&format!("{prefix}.up"), f);
        self.act.visit(&format!("{prefix}.act"), f);
        for (i, u) in self.units.iter().enumerate() {
            u.visit(&format!("{prefix}.units.{i}"), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.up.visit_mut(&format!("{prefix}.up"), f);
        self.act.visit_mut(&format!("{prefix}.act"), f);
        for (i, u) in self.units.iter_mut().enumerate() {
            u.visit_mut(&format!("{prefix}.units.{i}"), f);
        }
    }
}

#[derive(Clone, Debug)]
pub struct TransNet {
    pub cfg: TransNetConfig,
    // encoder
    pub(crate) enc_conv_in: Conv1d,
    pub(crate) enc_act_in: Prelu,
    pub(crate) enc_blocks: Vec<EncBlock>,
    pub(crate) enc_conv_out: Conv1d,
    pub(crate) enc_norm: Cln,
    // decoder
    pub(crate) dec_conv_in: Conv1d,
    pub(crate) dec_act_in: Prelu,
    pub(crate) dec_blocks: Vec<DecBlock>,
    pub(crate) dec_conv_out: Conv1d,
}

pub struct TransNetNodes {
    enc_conv_in: Conv1dNodes,
    enc_act_in: PreluNodes,
    enc_blocks: Vec<EncBlockNodes>,
    enc_conv_out: Conv1dNodes,
    enc_norm: ClnNodes,
    dec_conv_in: Conv1dNodes,
    dec_act_in: PreluNodes,
    dec_blocks: Vec<DecBlockNodes>,
    dec_conv_out: Conv1dNodes,
}

impl TransNet {
    pub fn new(cfg: TransNetConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = init_rng(seed.wrapping_add(0x7A05));
        let [w0, w1, w2, w3] = cfg.widths;
        let kb = cfg.kernel_boundary;
        let enc_conv_in = Conv1d::causal(1, w0, kb, 1, 1, cfg.bias, &mut rng);
        let enc_act_in = Prelu::per_channel(w0);
        let enc_blocks = vec![
            EncBlock::new(&cfg, w0, w1, &mut rng),
            EncBlock::new(&cfg, w1, w2, &mut rng),
            EncBlock::new(&cfg, w2, w3, &mut rng),
        ];
        let enc_conv_out = Conv1d::causal(w3, cfg.c_last, kb, 1, 1, cfg.bias, &mut rng);
        let enc_norm = Cln::new(cfg.c_last, cfg.eps);
        let dec_conv_in = Conv1d::causal(cfg.c_last, w3, kb, 1, 1, cfg.bias, &mut rng);
        let dec_act_in = Prelu::per_channel(w3);
        let dec_blocks = vec![
            DecBlock::new(&cfg, w3, w2, &mut rng),
            DecBlock::new(&cfg, w2, w1, &mut rng),
            DecBlock::new(&cfg, w1, w0, &mut rng),
        ];
        let dec_conv_out = Conv1d::causal(w0, 1, kb, 1, 1, cfg.bias, &mut rng);
        Ok(TransNet {
            cfg,
            enc_conv_in,
            enc_act_in,
            enc_blocks,
            enc_conv_out,
            enc_norm,
            dec_conv_in,
            dec_act_in,
            dec_blocks,
            dec_conv_out,
        })
    }

    pub fn bind(&self, g: &mut Graph, sink: &mut Vec<NodeId>) -> TransNetNodes {
        TransNetNodes {
            enc_conv_in: self.enc_conv_in.bind(g, sink),
            enc_act_in: self.enc_act_in.bind(g, sink),
            enc_blocks: self.enc_blocks.iter().map(|b| b.bind(g, sink)).collect(),
            enc_conv_out: self.enc_conv_out.bind(g, sink),
            enc_norm: self.enc_norm.bind(g, sink),
            dec_conv_in: self.dec_conv_in.bind(g, sink),
            dec_act_in: self.dec_act_in.bind(g, sink),
            dec_blocks: self.dec_blocks.iter().map(|b| b.bind(g, sink)).collect(),
            dec_conv_out: self.dec_conv_out.bind(g, sink),
        }
    }

    fn check_framing(&self, t: usize) -> Result<()> {
        if t == 0 || t % self.cfg.frame_len != 0 {
            return Err(Error::input(format!(
                "input length {t} is not a multiple of the frame length {}",
                self.cfg.frame_len
            )));
        }
        Ok(())
    }

    /// Encoder graph forward: `[1, n*F] -> [c_last, n*F/8]`, power-normalized
    /// per frame.
    pub fn encode_fwd(&self, g: &mut Graph, n: &TransNetNodes, x: NodeId) -> Result<NodeId> {
        self.check_framing(g.value(x).shape()[1])?;
        let v = self.enc_conv_in.fwd(g, &n.enc_conv_in, x)?;
        let mut v = self.enc_act_in.fwd(g, &n.enc_act_in, v)?;
        for (b, bn) in self.enc_blocks.iter().zip(n.enc_blocks.iter()) {
            v = b.fwd(g, bn, v)?;
        }
        let v = self.enc_conv_out.fwd(g, &n.enc_conv_out, v)?;
        let v = self.enc_norm.fwd(g, &n.enc_norm, v)?;
        g.power_norm(v, self.cfg.frame_cols())
    }

    /// Decoder graph forward: `[c_last, m] -> [1, m*8]`.
    pub fn decode_fwd(&self, g: &mut Graph, n: &TransNetNodes, z: NodeId) -> Result<NodeId> {
        let shape = g.value(z).shape().to_vec();
        if shape[0] != self.cfg.c_last {
            return Err(Error::config(format!(
                "symbol channel count {} does not match c_last {}",
                shape[0], self.cfg.c_last
            )));
        }
        if shape[1] == 0 || shape[1] % self.cfg.frame_cols() != 0 {
            return Err(Error::input(format!(
                "symbol count {} is not a multiple of the per-frame count {}",
                shape[0] * shape[1],
                self.cfg.symbols_per_frame()
            )));
        }
        let v = self.dec_conv_in.fwd(g, &n.dec_conv_in, z)?;
        let mut v = self.dec_act_in.fwd(g, &n.dec_act_in, v)?;
        for (b, bn) in self.dec_blocks.iter().zip(n.dec_blocks.iter()) {
            v = b.fwd(g, bn, v)?;
        }
        self.dec_conv_out.fwd(g, &n.dec_conv_out, v)
    }

    /// Plain encoder via the streaming runtime (single chunk).
    pub fn encode(&self, x: &[f64]) -> Result<ChannelSymbols> {
        let mut stream = crate::streaming::EncoderStream::new(self);
        stream.push(x)
    }

    /// Plain decoder via the streaming runtime (single chunk).
    pub fn decode(&self, z: &ChannelSymbols) -> Result<Vec<f64>> {
        let mut stream = crate::streaming::DecoderStream::new(self);
        stream.push(z)
    }

    pub fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        self.enc_conv_in.visit(&format!("{prefix}encoder.conv_in"), f);
        self.enc_act_in.visit(&format!("{prefix}encoder.act_in"), f);
        for (i, b) in self.enc_blocks.iter().enumerate() {
            b.visit(&format!("{prefix}encoder.blocks.{i}"), f);
        }
        self.enc_conv_out.visit(&format!("{prefix}encoder.conv_out"), f);
        self.enc_norm.visit(&format!("{prefix}encoder.norm"), f);
        self.dec_conv_in.visit(&format!("{prefix}decoder.conv_in"), f);
        self.dec_act_in.visit(&format!("{prefix}decoder.act_in"), f);
        for (i, b) in self.dec_blocks.iter().enumerate() {
            b.visit(&format!("{prefix}decoder.blocks.{i}"), f);
        }
        self.dec_conv_out.visit(&format!("{prefix}decoder.conv_out"), f);
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        let p = prefix.to_string();
        self.enc_conv_in.visit_mut(&format!("{p}encoder.conv_in"), f);
        self.enc_act_in.visit_mut(&format!("{p}encoder.act_in"), f);
        for (i, b) in self.enc_blocks.iter_mut().enumerate() {
            b.visit_mut(&format!("{p}encoder.blocks.{i}"), f);
        }
        self.enc_conv_out.visit_mut(&format!("{p}encoder.conv_out"), f);
        self.enc_norm.visit_mut(&format!("{p}encoder.norm"), f);
        self.dec_conv_in.visit_mut(&format!("{p}decoder.conv_in"), f);
        self.dec_act_in.visit_mut(&format!("{p}decoder.act_in"), f);
        for (i, b) in self.dec_blocks.iter_mut().enumerate() {
            b.visit_mut(&format!("{p}decoder.blocks.{i}"), f);
        }
        self.dec_conv_out.visit_mut(&format!("{p}decoder.conv_out"), f);
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, t| n += t.len());
        n
    }
}
