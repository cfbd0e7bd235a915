//! The two subsystems and their cascade.

mod checkpoint;
mod enhancer;
pub(crate) mod layers;
mod transnet;

pub use checkpoint::{Checkpoint, ModelKind, TrainMeta, MAGIC as CHECKPOINT_MAGIC};
pub use enhancer::{Enhancer, EnhancerConfig, EnhancerNodes};
pub use transnet::{TransNet, TransNetConfig, TransNetNodes, DOWNSAMPLE};

use crate::channel::AwgnChannel;
use crate::error::{Error, Result};
use crate::tensor::{Graph, NodeId, Tensor};

/// Frame length in samples for a latency in milliseconds at 16 kHz.
pub fn frame_len_for_latency(latency_ms: u32) -> Result<usize> {
    match latency_ms {
        3 => Ok(48),
        5 => Ok(80),
        9 => Ok(144),
        other => Err(Error::config(format!(
            "unsupported latency {other} ms: choose 3, 5 or 9"
        ))),
    }
}

/// Processing order of the cascade.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    /// Enhance on the capture side, then transmit (the default).
    EnhanceTransmit,
    /// Transmit the noisy signal, enhance at the receiver.
    TransmitEnhance,
}

impl Order {
    pub fn as_str(&self) -> &'static str {
        match self {
            Order::EnhanceTransmit => "enhance-transmit",
            Order::TransmitEnhance => "transmit-enhance",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "enhance-transmit" => Ok(Order::EnhanceTransmit),
            "transmit-enhance" => Ok(Order::TransmitEnhance),
            other => Err(Error::usage(format!(
                "unknown order '{other}': use enhance-transmit or transmit-enhance"
            ))),
        }
    }
}

/// Enhancer and codec sharing one frame grid.
#[derive(Clone, Debug)]
pub struct System {
    pub enhancer: Enhancer,
    pub transnet: TransNet,
    pub order: Order,
}

pub struct SystemNodes {
    pub enhancer: EnhancerNodes,
    pub transnet: TransNetNodes,
}

impl System {
    pub fn new(enhancer: Enhancer, transnet: TransNet, order: Order) -> Result<Self> {
        if enhancer.cfg.window != transnet.cfg.frame_len {
            return Err(Error::config(format!(
                "frame length mismatch: enhancer window {} vs transnet frame {}",
                enhancer.cfg.window, transnet.cfg.frame_len
            )));
        }
        Ok(System {
            enhancer,
            transnet,
            order,
        })
    }

    pub fn frame_len(&self) -> usize {
        self.transnet.cfg.frame_len
    }

    /// Bind both subsystems; enhancer parameters come first in the flat
    /// ordering, mirroring `visit`.
    pub fn bind(&self, g: &mut Graph, sink: &mut Vec<NodeId>) -> SystemNodes {
        SystemNodes {
            enhancer: self.enhancer.bind(g, sink),
            transnet: self.transnet.bind(g, sink),
        }
    }

    /// End-to-end differentiable forward. Channel noise is drawn from `chan`
    /// as a constant leaf: gradients pass through the addition unchanged. In
    /// noiseless mode the addition is skipped so the symbols pass through
    /// bit-exactly.
    pub fn fwd(
        &self,
        g: &mut Graph,
        n: &SystemNodes,
        y: NodeId,
        chan: &mut AwgnChannel,
    ) -> Result<NodeId> {
        let transmit = |g: &mut Graph, sys: &Self, n: &SystemNodes, x: NodeId, chan: &mut AwgnChannel| -> Result<NodeId> {
            let z = sys.transnet.encode_fwd(g, &n.transnet, x)?;
            let z = if chan.cfg.noise_sigma() == 0.0 {
                z
            } else {
                let (c, t) = {
                    let s = g.value(z).shape();
                    (s[0], s[1])
                };
                let noise = chan.draw_noise(c, t, sys.transnet.cfg.frame_cols());
                let noise = g.leaf(noise);
                g.add(z, noise)?
            };
            sys.transnet.decode_fwd(g, &n.transnet, z)
        };
        match self.order {
            Order::EnhanceTransmit => {
                let e = self.enhancer.fwd(g, &n.enhancer, y)?;
                transmit(g, self, n, e, chan)
            }
            Order::TransmitEnhance => {
                let r = transmit(g, self, n, y, chan)?;
                self.enhancer.fwd(g, &n.enhancer, r)
            }
        }
    }

    /// One-shot graph forward returning output and parameter leaves.
    pub fn forward_graph(
        &self,
        g: &mut Graph,
        y: &Tensor,
        chan: &mut AwgnChannel,
    ) -> Result<(NodeId, Vec<NodeId>)> {
        let mut sink = Vec::new();
        let nodes = self.bind(g, &mut sink);
        let y_id = g.leaf(y.clone());
        let out = self.fwd(g, &nodes, y_id, chan)?;
        Ok((out, sink))
    }

    /// Plain forward via the streaming runtime.
    pub fn run(&self, y: &[f64], chan: &mut AwgnChannel) -> Result<Vec<f64>> {
        let mut stream = crate::streaming::SystemStream::with_channel(self, chan.clone());
        let out = stream.process(y)?;
        *chan = stream.into_channel();
        Ok(out)
    }

    pub fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        self.enhancer.visit("enhancer.", f);
        self.transnet.visit("transnet.", f);
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.enhancer.visit_mut("enhancer.", f);
        self.transnet.visit_mut("transnet.", f);
    }

    pub fn param_count(&self) -> usize {
        self.enhancer.param_count() + self.transnet.param_count()
    }
}

// ── Checkpoint plumbing ─────────────────────────────────────────────

impl Enhancer {
    fn config_text(&self, meta: &TrainMeta) -> String {
        let c = &self.cfg;
        format!(
            "kind = enhancer\nwindow = {}\nbasis = {}\nbottleneck = {}\nhidden = {}\nkernel = {}\nblocks = {}\nrepeats = {}\neps = {}\n{}",
            c.window,
            c.basis,
            c.bottleneck,
            c.hidden,
            c.kernel,
            c.blocks,
            c.repeats,
            c.eps,
            checkpoint::meta_lines(meta)
        )
    }

    pub fn to_checkpoint(&self, meta: &TrainMeta) -> Checkpoint {
        let mut params = Vec::new();
        self.visit("", &mut |name, t| params.push((name.to_string(), t.clone())));
        Checkpoint {
            kind: ModelKind::Enhancer,
            config_text: self.config_text(meta),
            params,
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.kind != ModelKind::Enhancer {
            return Err(Error::format(format!(
                "checkpoint holds a {} model, expected an enhancer",
                ckpt.kind.as_str()
            )));
        }
        let map = checkpoint::parse_config_text(&ckpt.config_text);
        let get = |key: &str| -> Result<String> {
            map.get(key)
                .cloned()
                .ok_or_else(|| Error::format(format!("checkpoint config missing '{key}'")))
        };
        let cfg = EnhancerConfig {
            window: get("window")?.parse().map_err(|_| Error::format("bad window"))?,
            basis: get("basis")?.parse().map_err(|_| Error::format("bad basis"))?,
            bottleneck: get("bottleneck")?.parse().map_err(|_| Error::format("bad bottleneck"))?,
            hidden: get("hidden")?.parse().map_err(|_| Error::format("bad hidden"))?,
            kernel: get("kernel")?.parse().map_err(|_| Error::format("bad kernel"))?,
            blocks: get("blocks")?.parse().map_err(|_| Error::format("bad blocks"))?,
            repeats: get("repeats")?.parse().map_err(|_| Error::format("bad repeats"))?,
            eps: get("eps")?.parse().map_err(|_| Error::format("bad eps"))?,
        };
        let mut model = Enhancer::new(cfg, 0)?;
        checkpoint::assign_params(&ckpt.params, |f| model.visit_mut("", f))?;
        Ok(model)
    }
}

impl TransNet {
    fn config_text(&self, meta: &TrainMeta) -> String {
        let c = &self.cfg;
        format!(
            "kind = transnet\nframe_len = {}\nwidths = {} {} {} {}\nc_last = {}\nkernel_boundary = {}\nkernel_residual = {}\nkernel_stride = {}\ndilations = {} {} {}\nbias = {}\neps = {}\n{}",
            c.frame_len,
            c.widths[0],
            c.widths[1],
            c.widths[2],
            c.widths[3],
            c.c_last,
            c.kernel_boundary,
            c.kernel_residual,
            c.kernel_stride,
            c.dilations[0],
            c.dilations[1],
            c.dilations[2],
            c.bias,
            c.eps,
            checkpoint::meta_lines(meta)
        )
    }

    pub fn to_checkpoint(&self, meta: &TrainMeta) -> Checkpoint {
        let mut params = Vec::new();
        self.visit("", &mut |name, t| params.push((name.to_string(), t.clone())));
        Checkpoint {
            kind: ModelKind::TransNet,
            config_text: self.config_text(meta),
            params,
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.kind != ModelKind::TransNet {
            return Err(Error::format(format!(
                "checkpoint holds a {} model, expected a transnet",
                ckpt.kind.as_str()
            )));
        }
        let map = checkpoint::parse_config_text(&ckpt.config_text);
        let get = |key: &str| -> Result<String> {
            map.get(key)
                .cloned()
                .ok_or_else(|| Error::format(format!("checkpoint config missing '{key}'")))
        };
        let parse_list = |s: &str, n: usize| -> Result<Vec<usize>> {
            let vals: Vec<usize> = s
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| Error::format("bad list entry")))
                .collect::<Result<_>>()?;
            if vals.len() != n {
                return Err(Error::format(format!("expected {n} entries in '{s}'")));
            }
            Ok(vals)
        };
        let widths = parse_list(&get("widths")?, 4)?;
        let dils = parse_list(&get("dilations")?, 3)?;
        let cfg = TransNetConfig {
            frame_len: get("frame_len")?.parse().map_err(|_| Error::format("bad frame_len"))?,
            widths: [widths[0], widths[1], widths[2], widths[3]],
            c_last: get("c_last")?.parse().map_err(|_| Error::format("bad c_last"))?,
            kernel_boundary: get("kernel_boundary")?.parse().map_err(|_| Error::format("bad kernel_boundary"))?,
            kernel_residual: get("kernel_residual")?.parse().map_err(|_| Error::format("bad kernel_residual"))?,
            kernel_stride: get("kernel_stride")?.parse().map_err(|_| Error::format("bad kernel_stride"))?,
            dilations: [dils[0], dils[1], dils[2]],
            bias: get("bias")? == "true",
            eps: get("eps")?.parse().map_err(|_| Error::format("bad eps"))?,
        };
        let mut model = TransNet::new(cfg, 0)?;
        checkpoint::assign_params(&ckpt.params, |f| model.visit_mut("", f))?;
        Ok(model)
    }
}
