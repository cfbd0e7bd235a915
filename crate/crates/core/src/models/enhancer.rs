//! Desk-scale causal speech enhancer: learned analysis basis, a dilated
//! temporal-convolution separator producing a sigmoid mask, and a learned
//! overlap-add synthesis basis.
//!
//! All separator convolutions are strictly causal with cumulative layer
//! normalization. The analysis window covers `hop` past samples plus the
//! current hop block, so the lookahead never crosses a hop boundary and the
//! whole model runs frame-synchronously with one frame of latency.

use super::layers::{init_rng, Cln, ClnNodes, Conv1d, Conv1dNodes, ConvT1d, ConvT1dNodes, Prelu, PreluNodes};
use crate::error::{Error, Result};
use crate::tensor::{Graph, NodeId, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnhancerConfig {
    /// Analysis window length L in samples; equals the system frame length.
    pub window: usize,
    /// Learned basis count N.
    pub basis: usize,
    /// Separator bottleneck width B.
    pub bottleneck: usize,
    /// Convolution block hidden width H.
    pub hidden: usize,
    /// Dilated kernel size P.
    pub kernel: usize,
    /// Blocks per repeat X (dilations 1, 2, 4, ...).
    pub blocks: usize,
    /// Repeats of the dilation ladder.
    pub repeats: usize,
    pub eps: f64,
}

impl EnhancerConfig {
    /// Desk-scale defaults for a given latency: N=64, B=16, H=32, P=3, X=4,
    /// two repeats; the window tracks the frame length (48/80/144 samples).
    pub fn desk_default(latency_ms: u32) -> Result<Self> {
        Ok(EnhancerConfig {
            window: super::frame_len_for_latency(latency_ms)?,
            basis: 64,
            bottleneck: 16,
            hidden: 32,
            kernel: 3,
            blocks: 4,
            repeats: 2,
            eps: 1e-8,
        })
    }

    pub fn hop(&self) -> usize {
        self.window / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 2 || self.window % 2 != 0 {
            return Err(Error::config(format!(
                "enhancer window must be even and >= 2, got {}",
                self.window
            )));
        }
        if self.basis == 0 || self.bottleneck == 0 || self.hidden == 0 {
            return Err(Error::config("enhancer widths must be positive"));
        }
        if self.kernel == 0 || self.blocks == 0 || self.repeats == 0 {
            return Err(Error::config("enhancer separator depths must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub(crate) struct TcnBlock {
    pub conv_in: Conv1d,  // 1x1 B->H
    pub act1: Prelu,      // H
    pub norm1: Cln,       // H
    pub conv_d: Conv1d,   // k=P dilated H->H, causal
    pub act2: Prelu,      // H
    pub norm2: Cln,       // H
    pub conv_out: Conv1d, // 1x1 H->B
}

pub(crate) struct TcnBlockNodes {
    conv_in: Conv1dNodes,
    act1: PreluNodes,
    norm1: ClnNodes,
    conv_d: Conv1dNodes,
    act2: PreluNodes,
    norm2: ClnNodes,
    conv_out: Conv1dNodes,
}

impl TcnBlock {
    fn new(cfg: &EnhancerConfig, dilation: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Self {
        TcnBlock {
            conv_in: Conv1d::causal(cfg.bottleneck, cfg.hidden, 1, 1, 1, true, rng),
            act1: Prelu::per_channel(cfg.hidden),
            norm1: Cln::new(cfg.hidden, cfg.eps),
            conv_d: Conv1d::causal(cfg.hidden, cfg.hidden, cfg.kernel, 1, dilation, true, rng),
            act2: Prelu::per_channel(cfg.hidden),
            norm2: Cln::new(cfg.hidden, cfg.eps),
            conv_out: Conv1d::causal(cfg.hidden, cfg.bottleneck, 1, 1, 1, true, rng).zeroed(),
        }
    }

    fn bind(&self, g: &mut Graph, sink: &mut Vec<NodeId>) -> TcnBlockNodes {
        TcnBlockNodes {
            conv_in: self.conv_in.bind(g, sink),
            act1: self.act1.bind(g, sink),
            norm1: self.norm1.bind(g, sink),
            conv_d: self.conv_d.bind(g, sink),
            act2: self.act2.bind(g, sink),
            norm2: self.norm2.bind(g, sink),
            conv_out: self.conv_out.bind(g, sink),
        }
    }

    fn fwd(&self, g: &mut Graph, n: &TcnBlockNodes, x: NodeId) -> Result<NodeId> {
        let v = self.conv_in.fwd(g, &n.conv_in, x)?;
        let v = self.act1.fwd(g, &n.act1, v)?;
        let v = self.norm1.fwd(g, &n.norm1, v)?;
        let v = self.conv_d.fwd(g, &n.conv_d, v)?;
        let v = self.act2.fwd(g, &n.act2, v)?;
        let v = self.norm2.fwd(g, &n.norm2, v)?;
        let v = self.conv_out.fwd(g, &n.conv_out, v)?;
        g.add(x, v)
    }

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        self.conv_in.visit(&format!("{prefix}.conv_in"), f);
        self.act1.visit(&format!("{prefix}.act1"), f);
        self.norm1.visit(&format!("{prefix}.norm1"), f);
        self.conv_d.visit(&format!("{prefix}.conv_d"), f);
        self.act2.visit(&format!("{prefix}.act2"), f);
        self.norm2.visit(&format!("{prefix}.norm2"), f);
        self.conv_out.visit(&format!("{prefix}.conv_out"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.conv_in.visit_mut(&format!("{prefix}.conv_in"), f);
        self.act1.visit_mut(&format!("{prefix}.act1"), f);
        self.norm1.visit_mut(&format!("{prefix}.norm1"), f);
        self.conv_d.visit_mut(&format!("{prefix}.conv_d"), f);
        self.act2.visit_mut(&format!("{prefix}.act2"), f);
        self.norm2.visit_mut(&format!("{prefix}.norm2"), f);
        self.conv_out.visit_mut(&format!("{prefix}.conv_out"), f);
    }
}

#[derive(Clone, Debug)]
pub struct Enhancer {
    pub cfg: EnhancerConfig,
    pub(crate) analysis: Conv1d, // 1->N, k=L, s=hop, pad=L-hop
    pub(crate) input_norm: Cln,  // N
    pub(crate) bottleneck_in: Conv1d, // 1x1 N->B
    pub(crate) blocks: Vec<TcnBlock>,
    pub(crate) mask_act: Prelu, // B
    pub(crate) mask_conv: Conv1d, // 1x1 B->N
    pub(crate) synthesis: ConvT1d, // N->1, k=L, s=hop
}

pub struct EnhancerNodes {
    analysis: Conv1dNodes,
    input_norm: ClnNodes,
    bottleneck_in: Conv1dNodes,
    blocks: Vec<TcnBlockNodes>,
    mask_act: PreluNodes,
    mask_conv: Conv1dNodes,
    synthesis: ConvT1dNodes,
}

impl Enhancer {
    pub fn new(cfg: EnhancerConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = init_rng(seed);
        let hop = cfg.hop();
        let analysis = Conv1d::with_left_pad(
            1,
            cfg.basis,
            cfg.window,
            hop,
            1,
            cfg.window - hop,
            false,
            &mut rng,
        );
        let input_norm = Cln::new(cfg.basis, cfg.eps);
        let bottleneck_in = Conv1d::causal(cfg.basis, cfg.bottleneck, 1, 1, 1, true, &mut rng);
        let mut blocks = Vec::new();
        for _ in 0..cfg.repeats {
            for b in 0..cfg.blocks {
                blocks.push(TcnBlock::new(&cfg, 1 << b, &mut rng));
            }
        }
        let mask_act = Prelu::per_channel(cfg.bottleneck);
        let mask_conv = Conv1d::causal(cfg.bottleneck, cfg.basis, 1, 1, 1, true, &mut rng);
        let synthesis = ConvT1d::new(cfg.basis, 1, cfg.window, hop, false, &mut rng);
        Ok(Enhancer {
            cfg,
            analysis,
            input_norm,
            bottleneck_in,
            blocks,
            mask_act,
            mask_conv,
            synthesis,
        })
    }

    pub fn bind(&self, g: &mut Graph, sink: &mut Vec<NodeId>) -> EnhancerNodes {
        EnhancerNodes {
            analysis: self.analysis.bind(g, sink),
            input_norm: self.input_norm.bind(g, sink),
            bottleneck_in: self.bottleneck_in.bind(g, sink),
            blocks: self.blocks.iter().map(|b| b.bind(g, sink)).collect(),
            mask_act: self.mask_act.bind(g, sink),
            mask_conv: self.mask_conv.bind(g, sink),
            synthesis: self.synthesis.bind(g, sink),
        }
    }

    /// Graph forward over a bound parameter set: `[1, T] -> [1, T]`,
    /// `T` a multiple of the hop.
    pub fn fwd(&self, g: &mut Graph, n: &EnhancerNodes, x: NodeId) -> Result<NodeId> {
        let t = g.value(x).shape()[1];
        if t % self.cfg.hop() != 0 {
            return Err(Error::input(format!(
                "enhancer input length {t} is not a multiple of hop {}",
                self.cfg.hop()
            )));
        }
        let enc = self.analysis.fwd(g, &n.analysis, x)?;
        let v = self.input_norm.fwd(g, &n.input_norm, enc)?;
        let mut v = self.bottleneck_in.fwd(g, &n.bottleneck_in, v)?;
        for (block, bn) in self.blocks.iter().zip(n.blocks.iter()) {
            v = block.fwd(g, bn, v)?;
        }
        let m = self.mask_act.fwd(g, &n.mask_act, v)?;
        let m = self.mask_conv.fwd(g, &n.mask_conv, m)?;
        let mask = g.sigmoid(m);
        let masked = g.mul(enc, mask)?;
        self.synthesis.fwd(g, &n.synthesis, masked)
    }

    /// One-shot graph forward: binds parameters and runs, returning the
    /// output node and the parameter leaves in canonical order.
    pub fn forward_graph(&self, g: &mut Graph, x: &Tensor) -> Result<(NodeId, Vec<NodeId>)> {
        let mut sink = Vec::new();
        let nodes = self.bind(g, &mut sink);
        let x_id = g.leaf(x.clone());
        let y = self.fwd(g, &nodes, x_id)?;
        Ok((y, sink))
    }

    /// Plain forward via the streaming runtime (single chunk); bit-identical
    /// to the graph forward.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut stream = crate::streaming::EnhancerStream::new(self);
        stream.push(x)
    }

    /// Sigmoid mask for an input, one value per basis coefficient.
    pub fn mask_for(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut stream = crate::streaming::EnhancerStream::new(self);
        Ok(stream.push_with_mask(x)?.1)
    }

    pub fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        self.analysis.visit(&format!("{prefix}analysis"), f);
        self.input_norm.visit(&format!("{prefix}input_norm"), f);
        self.bottleneck_in.visit(&format!("{prefix}bottleneck_in"), f);
        for (i, b) in self.blocks.iter().enumerate() {
            b.visit(&format!("{prefix}blocks.{i}"), f);
        }
        self.mask_act.visit(&format!("{prefix}mask_act"), f);
        self.mask_conv.visit(&format!("{prefix}mask_conv"), f);
        self.synthesis.visit(&format!("{prefix}synthesis"), f);
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        let p = prefix.to_string();
        self.analysis.visit_mut(&format!("{p}analysis"), f);
        self.input_norm.visit_mut(&format!("{p}input_norm"), f);
        self.bottleneck_in.visit_mut(&format!("{p}bottleneck_in"), f);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit_mut(&format!("{p}blocks.{i}"), f);
        }
        self.mask_act.visit_mut(&format!("{p}mask_act"), f);
        self.mask_conv.visit_mut(&format!("{p}mask_conv"), f);
        self.synthesis.visit_mut(&format!("{p}synthesis"), f);
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, t| n += t.len());
        n
    }
}
