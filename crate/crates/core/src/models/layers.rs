//! Parameter-holding layer primitives shared by both networks.
//!
//! Each layer owns plain tensors and knows how to (a) bind them into a graph
//! as leaves and run its forward there, and (b) enumerate them for the
//! optimizer and checkpoints. Bind order and visit order are the same by
//! construction and pinned by a test in `models::tests`.

use crate::error::Result;
use crate::tensor::{Graph, NodeId, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Uniform fan-in-scaled weight init with variance 2/fan_in, which keeps
/// activation variance roughly constant through deep conv stacks (a plain
/// 1/sqrt(fan_in) bound shrinks variance ~5x per stage and starves the codec
/// of gradient signal).
fn uniform_fan_in(rng: &mut ChaCha8Rng, shape: Vec<usize>, fan_in: usize) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(shape, data).expect("init tensor")
}

fn uniform_bias(rng: &mut ChaCha8Rng, shape: Vec<usize>, fan_in: usize) -> Tensor {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(shape, data).expect("init tensor")
}

// ── Conv1d ──────────────────────────────────────────────────────────

#[derive(Clone, Debug)]
pub struct Conv1d {
    pub weight: Tensor, // [C_out, C_in, K]
    pub bias: Option<Tensor>,
    pub stride: usize,
    pub dilation: usize,
    pub left_pad: usize,
}

pub struct Conv1dNodes {
    pub w: NodeId,
    pub b: Option<NodeId>,
}

impl Conv1d {
    /// Strictly causal convolution: left pad of `(K-1)*dilation`.
    pub fn causal(
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        dilation: usize,
        bias: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Self::with_left_pad(c_in, c_out, k, stride, dilation, (k - 1) * dilation, bias, rng)
    }

    /// Convolution with bounded lookahead: `left_pad < (K-1)*dilation` shifts
    /// the window forward by the difference. The lookahead must stay within
    /// one output hop (`(K-1)*dilation - left_pad <= stride - 1`) so the
    /// streaming runtime can emit frame-synchronously.
    #[allow(clippy::too_many_arguments)]
    pub fn with_left_pad(
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        dilation: usize,
        left_pad: usize,
        bias: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let span = (k - 1) * dilation;
        assert!(left_pad <= span, "left_pad {left_pad} exceeds span {span}");
        assert!(
            span - left_pad < stride,
            "conv lookahead {} must stay within one output hop (stride {})",
            span - left_pad,
            stride
        );
        let fan_in = c_in * k;
        Conv1d {
            weight: uniform_fan_in(rng, vec![c_out, c_in, k], fan_in),
            bias: bias.then(|| uniform_bias(rng, vec![c_out], fan_in)),
            stride,
            dilation,
            left_pad,
        }
    }

    pub fn c_in(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn c_out(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }


    pub fn bind(&self, g: &mut Graph, sink: &mut Vec<NodeId>) -> Conv1dNodes {
        let w = g.leaf(self.weight.clone());
        sink.push(w);
        let b = self.bias.as_ref().map(|b| {
            let id = g.leaf(b.clone());
            sink.push(id);
            id
        });
        Conv1dNodes { w, b }
    }

    pub fn fwd(&self, g: &mut Graph, n: &Conv1dNodes, x: NodeId) -> Result<NodeId> {
        g.conv1d(x, n.w, n.b, self.stride, self.dilation, self.left_pad)
    }

    /// Zero the parameters: a residual branch closed by this conv starts as
    /// the identity, which keeps activation variance bounded through deep
    /// stacks while gradients still flow.
    pub fn zeroed(mut self) -> Self {
        for v in self.weight.data_mut() {
            *v = 0.0;
        }
        if let Some(b) = &mut self.bias {
            for v in b.data_mut() {
                *v = 0.0;
            }
        }
        self
    }

    pub fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        f(&format!("{prefix}.weight"), &self.weight);
        if let Some(b) = &self.bias {
            f(&format!("{prefix}.bias"), b);
        }
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f(&format!("{prefix}.weight"), &mut self.weight);
        if let Some(b) = &mut self.bias {
            f(&format!("{prefix}.bias"), b);
        }
    }
}

// ── ConvT1d ─────────────────────────────────────────────────────────

#[derive(Clone, Debug)]
pub struct ConvT1d {
    pub weight: Tensor, // [C_in, C_out, K]
    pub bias: Option<Tensor>,
    pub stride: usize,
}

pub struct ConvT1dNodes {
    pub w: NodeId,
    pub b: Option<NodeId>,
}

impl ConvT1d {
    pub fn new(
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        bias: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let fan_in = c_in * k;
        ConvT1d {
            weight: uniform_fan_in(rng, vec![c_in, c_out, k], fan_in),
            bias: bias.then(|| uniform_bias(rng, vec![c_out], fan_in)),
            stride,
        }
    }

    pub fn c_in(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn c_out(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }


    pub fn bind(&self, g: &mut Graph, sink: &mut Vec<NodeId>) -> ConvT1dNodes {
        let w = g.leaf(self.weight.clone());
        sink.push(w);
        let b = self.bias.as_ref().map(|b| {
            let id = g.leaf(b.clone());
            sink.push(id);
            id
        });
        ConvT1dNodes { w, b }
    }

    pub fn fwd(&self, g: &mut Graph, n: &ConvT1dNodes, x: NodeId) -> Result<NodeId> {
        let y = g.conv_transpose1d(x, n.w, self.stride)?;
        match n.b {
            Some(b) => g.add(y, b),
            None => Ok(y),
        }
    }

    pub fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        f(&format!("{prefix}.weight"), &self.weight);
        if let Some(b) = &self.bias {
            f(&format!("{prefix}.bias"), b);
        }
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f(&format!("{prefix}.weight"), &mut self.weight);
        if let Some(b) = &mut self.bias {
            f(&format!("{prefix}.bias"), b);
        }
    }
}

// ── Cumulative layer norm ───────────────────────────────────────────

#[derive(Clone, Debug)]
pub struct Cln {
    pub gain: Tensor,
    pub bias: Tensor,
    pub eps: f64,
}

pub struct ClnNodes {
    pub gain: NodeId,
    pub bias: NodeId,
}

impl Cln {
    pub fn new(channels: usize, eps: f64) -> Self {
        Cln {
            gain: Tensor::filled(vec![channels], 1.0),
            bias: Tensor::zeros(vec![channels]),
            eps,
        }
    }

    pub fn channels(&self) -> usize {
        self.gain.len()
    }


    pub fn bind(&self, g: &mut Graph, sink: &mut Vec<NodeId>) -> ClnNodes {
        let gain = g.leaf(self.gain.clone());
        sink.push(gain);
        let bias = g.leaf(self.bias.clone());
        sink.push(bias);
        ClnNodes { gain, bias }
    }

    pub fn fwd(&self, g: &mut Graph, n: &ClnNodes, x: NodeId) -> Result<NodeId> {
        g.cumulative_layer_norm(x, n.gain, n.bias, self.eps)
    }

    pub fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        f(&format!("{prefix}.gain"), &self.gain);
        f(&format!("{prefix}.bias"), &self.bias);
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f(&format!("{prefix}.gain"), &mut self.gain);
        f(&format!("{prefix}.bias"), &mut self.bias);
    }
}

// ── PReLU ───────────────────────────────────────────────────────────

#[derive(Clone, Debug)]
pub struct Prelu {
    pub alpha: Tensor,
}

pub struct PreluNodes {
    pub alpha: NodeId,
}

impl Prelu {
    /// Per-channel slope, initialized to 0.25.
    pub fn per_channel(channels: usize) -> Self {
        Prelu {
            alpha: Tensor::filled(vec![channels], 0.25),
        }
    }


    pub fn bind(&self, g: &mut Graph, sink: &mut Vec<NodeId>) -> PreluNodes {
        let alpha = g.leaf(self.alpha.clone());
        sink.push(alpha);
        PreluNodes { alpha }
    }

    pub fn fwd(&self, g: &mut Graph, n: &PreluNodes, x: NodeId) -> Result<NodeId> {
        g.prelu(x, n.alpha)
    }

    pub fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        f(&format!("{prefix}.alpha"), &self.alpha);
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f(&format!("{prefix}.alpha"), &mut self.alpha);
    }
}

/// Seeded init stream for model construction.
pub fn init_rng(seed: u64) -> ChaCha8Rng {
    crate::rng::rng_from_seed(crate::rng::derive_seed(seed, 0x1217))
}
