//! Append-only computation graph with reverse-mode differentiation.
//!
//! Every operation pushes one node holding its forward value; inputs always
//! precede outputs in append order, so a single reverse sweep visits each node
//! exactly once. Calling [`Graph::backward`] a second time on the same graph
//! is a usage error (gradients are not silently re-accumulated).

use super::Tensor;
use crate::error::{Error, Result};

/// Handle into the active graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Clone, Copy, Debug)]
enum BinKind {
    /// Identical shapes.
    Same,
    /// `b` is a scalar broadcast over `a`.
    ScalarRhs,
    /// `a` is a scalar broadcast over `b`.
    ScalarLhs,
    /// `a` is `[C, T]`, `b` is `[C]` broadcast across time.
    ChannelRhs,
}

#[derive(Clone, Copy, Debug)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Conv1d {
        input: NodeId,
        weight: NodeId,
        bias: Option<NodeId>,
        stride: usize,
        dilation: usize,
        left_pad: usize,
    },
    ConvT1d {
        input: NodeId,
        weight: NodeId,
        stride: usize,
    },
    Cln {
        input: NodeId,
        gain: NodeId,
        bias: NodeId,
        eps: f64,
    },
    Prelu {
        input: NodeId,
        alpha: NodeId,
    },
    Sigmoid {
        input: NodeId,
    },
    Relu {
        input: NodeId,
    },
    Bin {
        op: BinOp,
        kind: BinKind,
        a: NodeId,
        b: NodeId,
    },
    Scale {
        input: NodeId,
        c: f64,
    },
    AddScalar {
        input: NodeId,
        #[allow(dead_code)]
        c: f64,
    },
    Sum {
        input: NodeId,
    },
    Mean {
        input: NodeId,
    },
    Sqrt {
        input: NodeId,
    },
    Ln {
        input: NodeId,
    },
    Clamp {
        input: NodeId,
        lo: f64,
        hi: f64,
    },
    PowerNorm {
        input: NodeId,
        block_cols: usize,
    },
}

/// Blocks whose mean square already sits within this margin of 1 pass
/// through power normalization unchanged (keeps the op idempotent).
pub(crate) const POWER_NORM_SNAP: f64 = 1e-9;

struct Node {
    op: Op,
    value: Tensor,
}

/// Recording tape. See module docs.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Vec<f64>>,
    backward_done: bool,
}

/// Left-pad every row of a `[C, T]` tensor with `pad` explicit zeros.
///
/// Padding zeros are materialized and multiplied (never skipped) so the
/// forward arithmetic is bit-identical to the streaming path, which holds
/// real zeros in its history buffers.
fn pad_rows(x: &Tensor, pad: usize) -> (Vec<f64>, usize) {
    let (c, t) = (x.shape()[0], x.shape()[1]);
    let tp = t + pad;
    let mut xp = vec![0.0; c * tp];
    for ci in 0..c {
        xp[ci * tp + pad..(ci + 1) * tp].copy_from_slice(&x.data()[ci * t..(ci + 1) * t]);
    }
    (xp, tp)
}

/// Raw strided causal convolution on padded data; shared by graph forward and
/// the streaming runtime so both produce bit-identical outputs.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv1d_raw(
    xp: &[f64],
    tp: usize,
    c_in: usize,
    w: &[f64],
    bias: Option<&[f64]>,
    c_out: usize,
    k: usize,
    stride: usize,
    dilation: usize,
    t_out: usize,
    out: &mut [f64],
) {
    for co in 0..c_out {
        let b = bias.map_or(0.0, |bv| bv[co]);
        let w_co = &w[co * c_in * k..(co + 1) * c_in * k];
        let orow = &mut out[co * t_out..(co + 1) * t_out];
        for (j, o) in orow.iter_mut().enumerate() {
            let base = j * stride;
            let mut acc = b;
            for ci in 0..c_in {
                let xrow = &xp[ci * tp..(ci + 1) * tp];
                let wrow = &w_co[ci * k..ci * k + k];
                let mut p = base;
                for &wv in wrow.iter() {
                    acc += wv * xrow[p];
                    p += dilation;
                }
            }
            *o = acc;
        }
    }
}

/// Raw transpose convolution accumulating contributions in ascending input
/// order; shared with the streaming runtime (same accumulation order keeps
/// chunked execution bit-identical).
pub(crate) fn conv_t1d_raw(
    x: &[f64],
    t: usize,
    c_in: usize,
    w: &[f64],
    c_out: usize,
    k: usize,
    stride: usize,
    full: &mut [f64],
) {
    let full_len = full.len() / c_out;
    for tc in 0..t {
        for co in 0..c_out {
            let orow = &mut full[co * full_len..(co + 1) * full_len];
            for kk in 0..k {
                let mut acc = 0.0;
                for ci in 0..c_in {
                    acc += x[ci * t + tc] * w[(ci * c_out + co) * k + kk];
                }
                orow[tc * stride + kk] += acc;
            }
        }
    }
}

/// One column step of cumulative layer normalization given running sums.
/// Returns the normalizer `1/sqrt(var + eps)` and the scope mean.
#[inline]
pub(crate) fn cln_column_stats(s1: f64, s2: f64, n: f64, eps: f64) -> (f64, f64) {
    let mu = s1 / n;
    let var = (s2 / n - mu * mu).max(0.0);
    ((var + eps).sqrt().recip(), mu)
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Insert a tensor as a leaf (parameter or constant).
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn data(&self, id: NodeId) -> &[f64] {
        self.nodes[id.0].value.data()
    }

    /// Gradient buffer for a node; present after [`Graph::backward`].
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.grads.get(id.0).map(|g| g.as_slice())
    }

    fn shape2(&self, id: NodeId, what: &str) -> Result<(usize, usize)> {
        let s = self.nodes[id.0].value.shape();
        if s.len() != 2 {
            return Err(Error::config(format!(
                "{what} must be rank 2 [channels, time], got {s:?}"
            )));
        }
        Ok((s[0], s[1]))
    }

    // ── Convolutions ────────────────────────────────────────────────

    /// Causal 1-D convolution: left-padding of `(K-1)*dilation` zeros is
    /// applied internally so output `t` depends only on inputs at `<= t*stride`.
    pub fn conv1d_causal(
        &mut self,
        input: NodeId,
        weight: NodeId,
        bias: Option<NodeId>,
        stride: usize,
        dilation: usize,
    ) -> Result<NodeId> {
        let k = *self.nodes[weight.0].value.shape().last().ok_or_else(|| {
            Error::config("conv weight must be rank 3")
        })?;
        self.conv1d(input, weight, bias, stride, dilation, (k - 1) * dilation)
    }

    /// 1-D convolution with an explicit left pad (`left_pad <= (K-1)*dilation`).
    /// A pad smaller than the receptive field trades strict per-sample
    /// causality for bounded lookahead, which the frame-blocked models use.
    pub fn conv1d(
        &mut self,
        input: NodeId,
        weight: NodeId,
        bias: Option<NodeId>,
        stride: usize,
        dilation: usize,
        left_pad: usize,
    ) -> Result<NodeId> {
        if stride == 0 || dilation == 0 {
            return Err(Error::config("stride and dilation must be positive"));
        }
        let (c_in, t) = self.shape2(input, "conv1d input")?;
        let ws = self.nodes[weight.0].value.shape().to_vec();
        if ws.len() != 3 {
            return Err(Error::config(format!(
                "conv1d weight must be [C_out, C_in, K], got {ws:?}"
            )));
        }
        let (c_out, w_cin, k) = (ws[0], ws[1], ws[2]);
        if w_cin != c_in {
            return Err(Error::config(format!(
                "conv1d channel mismatch: input has {c_in} channels, weight expects {w_cin}"
            )));
        }
        if let Some(b) = bias {
            let bs = self.nodes[b.0].value.shape();
            if bs != [c_out] {
                return Err(Error::config(format!(
                    "conv1d bias must be [{c_out}], got {bs:?}"
                )));
            }
        }
        let span = (k - 1) * dilation;
        if left_pad > span {
            return Err(Error::config(format!(
                "left_pad {left_pad} exceeds receptive span {span}"
            )));
        }
        if t == 0 {
            return Err(Error::input("conv1d input has zero length"));
        }
        if t + left_pad < span + 1 {
            return Err(Error::input(format!(
                "conv1d input too short: {t} samples for kernel span {span} with pad {left_pad}"
            )));
        }
        let t_out = (t + left_pad - span - 1) / stride + 1;

        let (xp, tp) = pad_rows(&self.nodes[input.0].value, left_pad);
        let mut out = vec![0.0; c_out * t_out];
        let bias_slice = bias.map(|b| self.nodes[b.0].value.data().to_vec());
        conv1d_raw(
            &xp,
            tp,
            c_in,
            self.nodes[weight.0].value.data(),
            bias_slice.as_deref(),
            c_out,
            k,
            stride,
            dilation,
            t_out,
            &mut out,
        );
        Ok(self.push(
            Op::Conv1d {
                input,
                weight,
                bias,
                stride,
                dilation,
                left_pad,
            },
            Tensor::new(vec![c_out, t_out], out)?,
        ))
    }

    /// Transpose 1-D convolution, upsampling by exactly `stride`; the raw
    /// output is trimmed on the right to `T*stride` samples so only
    /// past-dependent contributions are kept.
    pub fn conv_transpose1d(
        &mut self,
        input: NodeId,
        weight: NodeId,
        stride: usize,
    ) -> Result<NodeId> {
        if stride == 0 {
            return Err(Error::config("stride must be positive"));
        }
        let (c_in, t) = self.shape2(input, "conv_transpose1d input")?;
        let ws = self.nodes[weight.0].value.shape().to_vec();
        if ws.len() != 3 {
            return Err(Error::config(format!(
                "conv_transpose1d weight must be [C_in, C_out, K], got {ws:?}"
            )));
        }
        let (w_cin, c_out, k) = (ws[0], ws[1], ws[2]);
        if w_cin != c_in {
            return Err(Error::config(format!(
                "conv_transpose1d channel mismatch: input has {c_in} channels, weight expects {w_cin}"
            )));
        }
        let full_len = ((t - 1) * stride + k).max(t * stride);
        let mut full = vec![0.0; c_out * full_len];
        conv_t1d_raw(
            self.nodes[input.0].value.data(),
            t,
            c_in,
            self.nodes[weight.0].value.data(),
            c_out,
            k,
            stride,
            &mut full,
        );
        let t_out = t * stride;
        let mut out = vec![0.0; c_out * t_out];
        for co in 0..c_out {
            out[co * t_out..(co + 1) * t_out]
                .copy_from_slice(&full[co * full_len..co * full_len + t_out]);
        }
        Ok(self.push(
            Op::ConvT1d {
                input,
                weight,
                stride,
            },
            Tensor::new(vec![c_out, t_out], out)?,
        ))
    }

    // ── Normalizations ──────────────────────────────────────────────

    /// Cumulative layer normalization: each column is normalized by the mean
    /// and variance accumulated over all channels and all columns `<= t`,
    /// then scaled/shifted per channel. Strictly causal.
    pub fn cumulative_layer_norm(
        &mut self,
        input: NodeId,
        gain: NodeId,
        bias: NodeId,
        eps: f64,
    ) -> Result<NodeId> {
        let (c, t) = self.shape2(input, "cumulative_layer_norm input")?;
        for (id, what) in [(gain, "gain"), (bias, "bias")] {
            let s = self.nodes[id.0].value.shape();
            if s != [c] {
                return Err(Error::config(format!(
                    "cumulative_layer_norm {what} must be [{c}], got {s:?}"
                )));
            }
        }
        let x = self.nodes[input.0].value.data();
        let gv = self.nodes[gain.0].value.data();
        let bv = self.nodes[bias.0].value.data();
        let mut out = vec![0.0; c * t];
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for tc in 0..t {
            for ci in 0..c {
                let v = x[ci * t + tc];
                s1 += v;
                s2 += v * v;
            }
            let n = (c * (tc + 1)) as f64;
            let (r, mu) = cln_column_stats(s1, s2, n, eps);
            for ci in 0..c {
                out[ci * t + tc] = gv[ci] * (x[ci * t + tc] - mu) * r + bv[ci];
            }
        }
        Ok(self.push(
            Op::Cln {
                input,
                gain,
                bias,
                eps,
            },
            Tensor::new(vec![c, t], out)?,
        ))
    }

    /// Rescale each consecutive block of `block_cols` columns to unit mean
    /// square. Errors on an all-zero block (the scale is undefined). A block
    /// already within 1e-9 of unit mean square passes through untouched,
    /// which makes the operation bit-exactly idempotent.
    pub fn power_norm(&mut self, input: NodeId, block_cols: usize) -> Result<NodeId> {
        let (c, t) = self.shape2(input, "power_norm input")?;
        if block_cols == 0 || t % block_cols != 0 {
            return Err(Error::config(format!(
                "power_norm block of {block_cols} columns does not divide {t}"
            )));
        }
        let x = self.nodes[input.0].value.data();
        let mut out = vec![0.0; c * t];
        let n = (c * block_cols) as f64;
        for blk in 0..t / block_cols {
            let lo = blk * block_cols;
            let hi = lo + block_cols;
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
                    "power_norm: all-zero symbol block, SNR undefined",
                ));
            }
            if (ms - 1.0).abs() <= POWER_NORM_SNAP {
                for ci in 0..c {
                    for tc in lo..hi {
                        out[ci * t + tc] = x[ci * t + tc];
                    }
                }
                continue;
            }
            let scale = ms.sqrt().recip();
            for ci in 0..c {
                for tc in lo..hi {
                    out[ci * t + tc] = x[ci * t + tc] * scale;
                }
            }
        }
        Ok(self.push(Op::PowerNorm { input, block_cols }, Tensor::new(vec![c, t], out)?))
    }

    // ── Pointwise ───────────────────────────────────────────────────

    /// PReLU with a learnable per-channel slope (`alpha` of shape `[C]` for a
    /// `[C, T]` input) or a single shared slope (`alpha` of shape `[1]`).
    pub fn prelu(&mut self, input: NodeId, alpha: NodeId) -> Result<NodeId> {
        let xs = self.nodes[input.0].value.shape().to_vec();
        let als = self.nodes[alpha.0].value.shape().to_vec();
        let per_channel = match (xs.as_slice(), als.as_slice()) {
            (_, [1]) => false,
            ([c, _], [ac]) if c == ac => true,
            _ => {
                return Err(Error::config(format!(
                    "prelu alpha {als:?} incompatible with input {xs:?}"
                )))
            }
        };
        let x = self.nodes[input.0].value.data();
        let a = self.nodes[alpha.0].value.data();
        let t = if per_channel { xs[1] } else { x.len() };
        let out: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let al = if per_channel { a[i / t] } else { a[0] };
                if v >= 0.0 {
                    v
                } else {
                    al * v
                }
            })
            .collect();
        Ok(self.push(Op::Prelu { input, alpha }, Tensor::new(xs, out)?))
    }

    pub fn sigmoid(&mut self, input: NodeId) -> NodeId {
        let v = &self.nodes[input.0].value;
        let out: Vec<f64> = v.data().iter().map(|&x| 1.0 / (1.0 + (-x).exp())).collect();
        let t = Tensor::new(v.shape().to_vec(), out).expect("shape preserved");
        self.push(Op::Sigmoid { input }, t)
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let v = &self.nodes[input.0].value;
        let out: Vec<f64> = v.data().iter().map(|&x| x.max(0.0)).collect();
        let t = Tensor::new(v.shape().to_vec(), out).expect("shape preserved");
        self.push(Op::Relu { input }, t)
    }

    fn binary(&mut self, op: BinOp, a: NodeId, b: NodeId) -> Result<NodeId> {
        let sa = self.nodes[a.0].value.shape().to_vec();
        let sb = self.nodes[b.0].value.shape().to_vec();
        let (kind, out_shape) = if sa == sb {
            (BinKind::Same, sa.clone())
        } else if sb == [1] {
            (BinKind::ScalarRhs, sa.clone())
        } else if sa == [1] {
            (BinKind::ScalarLhs, sb.clone())
        } else if sa.len() == 2 && sb.len() == 1 && sb[0] == sa[0] {
            (BinKind::ChannelRhs, sa.clone())
        } else {
            return Err(Error::config(format!(
                "shapes {sa:?} and {sb:?} are not broadcastable \
                 (supported: equal, scalar operand, [C,T] with [C])"
            )));
        };
        let av = self.nodes[a.0].value.data();
        let bv = self.nodes[b.0].value.data();
        let numel: usize = out_shape.iter().product();
        let t_cols = if matches!(kind, BinKind::ChannelRhs) {
            sa[1]
        } else {
            1
        };
        let mut out = vec![0.0; numel];
        for (i, o) in out.iter_mut().enumerate() {
            let (x, y) = match kind {
                BinKind::Same => (av[i], bv[i]),
                BinKind::ScalarRhs => (av[i], bv[0]),
                BinKind::ScalarLhs => (av[0], bv[i]),
                BinKind::ChannelRhs => (av[i], bv[i / t_cols]),
            };
            *o = match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => x / y,
            };
        }
        Ok(self.push(Op::Bin { op, kind, a, b }, Tensor::new(out_shape, out)?))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(BinOp::Add, a, b)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(BinOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(BinOp::Mul, a, b)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(BinOp::Div, a, b)
    }

    /// Multiply by a compile-time constant (not a graph input).
    pub fn scale(&mut self, input: NodeId, c: f64) -> NodeId {
        let v = &self.nodes[input.0].value;
        let out: Vec<f64> = v.data().iter().map(|&x| x * c).collect();
        let t = Tensor::new(v.shape().to_vec(), out).expect("shape preserved");
        self.push(Op::Scale { input, c }, t)
    }

    pub fn add_scalar(&mut self, input: NodeId, c: f64) -> NodeId {
        let v = &self.nodes[input.0].value;
        let out: Vec<f64> = v.data().iter().map(|&x| x + c).collect();
        let t = Tensor::new(v.shape().to_vec(), out).expect("shape preserved");
        self.push(Op::AddScalar { input, c }, t)
    }

    pub fn neg(&mut self, input: NodeId) -> NodeId {
        self.scale(input, -1.0)
    }

    pub fn sum(&mut self, input: NodeId) -> NodeId {
        let s: f64 = self.nodes[input.0].value.data().iter().sum();
        self.push(Op::Sum { input }, Tensor::scalar(s))
    }

    pub fn mean(&mut self, input: NodeId) -> NodeId {
        let d = self.nodes[input.0].value.data();
        let m = d.iter().sum::<f64>() / d.len() as f64;
        self.push(Op::Mean { input }, Tensor::scalar(m))
    }

    pub fn sqrt(&mut self, input: NodeId) -> Result<NodeId> {
        let v = &self.nodes[input.0].value;
        if v.data().iter().any(|&x| x < 0.0) {
            return Err(Error::Numeric("sqrt of negative value".into()));
        }
        let out: Vec<f64> = v.data().iter().map(|&x| x.sqrt()).collect();
        let t = Tensor::new(v.shape().to_vec(), out)?;
        Ok(self.push(Op::Sqrt { input }, t))
    }

    pub fn ln(&mut self, input: NodeId) -> Result<NodeId> {
        let v = &self.nodes[input.0].value;
        if v.data().iter().any(|&x| x <= 0.0) {
            return Err(Error::Numeric("ln of non-positive value".into()));
        }
        let out: Vec<f64> = v.data().iter().map(|&x| x.ln()).collect();
        let t = Tensor::new(v.shape().to_vec(), out)?;
        Ok(self.push(Op::Ln { input }, t))
    }

    /// Saturating clamp; gradient passes only where the input is in range.
    pub fn clamp(&mut self, input: NodeId, lo: f64, hi: f64) -> NodeId {
        let v = &self.nodes[input.0].value;
        let out: Vec<f64> = v.data().iter().map(|&x| x.clamp(lo, hi)).collect();
        let t = Tensor::new(v.shape().to_vec(), out).expect("shape preserved");
        self.push(Op::Clamp { input, lo, hi }, t)
    }

    // ── Backward ────────────────────────────────────────────────────

    /// Populate gradient buffers for every node reachable from `loss`.
    ///
    /// `loss` must be a scalar. A second call on the same graph is a usage
    /// error; build a fresh graph per backward pass.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.backward_done {
            return Err(Error::usage(
                "backward already ran on this graph; build a new graph per pass",
            ));
        }
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(Error::usage(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        self.backward_done = true;
        self.grads = self.nodes.iter().map(|n| vec![0.0; n.value.len()]).collect();
        self.grads[loss.0][0] = 1.0;

        for i in (0..self.nodes.len()).rev() {
            let op = self.nodes[i].op.clone();
            if matches!(op, Op::Leaf) {
                continue;
            }
            // Detach this node's gradient so the propagation below can freely
            // write into other (possibly aliased) buffers.
            let g = std::mem::take(&mut self.grads[i]);
            if g.iter().all(|&v| v == 0.0) {
                self.grads[i] = g;
                continue;
            }
            match op {
                Op::Leaf => unreachable!(),
                Op::Conv1d {
                    input,
                    weight,
                    bias,
                    stride,
                    dilation,
                    left_pad,
                } => self.backward_conv1d(&g, i, input, weight, bias, stride, dilation, left_pad),
                Op::ConvT1d {
                    input,
                    weight,
                    stride,
                } => self.backward_conv_t1d(&g, i, input, weight, stride),
                Op::Cln {
                    input,
                    gain,
                    bias,
                    eps,
                } => self.backward_cln(&g, input, gain, bias, eps),
                Op::Prelu { input, alpha } => {
                    let x = self.nodes[input.0].value.data().to_vec();
                    let a = self.nodes[alpha.0].value.data().to_vec();
                    let per_channel = a.len() > 1;
                    let t = if per_channel {
                        self.nodes[input.0].value.shape()[1]
                    } else {
                        x.len()
                    };
                    for idx in 0..x.len() {
                        let ch = if per_channel { idx / t } else { 0 };
                        if x[idx] >= 0.0 {
                            self.grads[input.0][idx] += g[idx];
                        } else {
                            self.grads[input.0][idx] += g[idx] * a[ch];
                            self.grads[alpha.0][ch] += g[idx] * x[idx];
                        }
                    }
                }
                Op::Sigmoid { input } => {
                    let y = self.nodes[i].value.data().to_vec();
                    for idx in 0..y.len() {
                        let s = y[idx];
                        self.grads[input.0][idx] += g[idx] * s * (1.0 - s);
                    }
                }
                Op::Relu { input } => {
                    let x = self.nodes[input.0].value.data().to_vec();
                    for idx in 0..x.len() {
                        if x[idx] > 0.0 {
                            self.grads[input.0][idx] += g[idx];
                        }
                    }
                }
                Op::Bin { op, kind, a, b } => self.backward_bin(&g, op, kind, a, b),
                Op::Scale { input, c } => {
                    for (idx, &gi) in g.iter().enumerate() {
                        self.grads[input.0][idx] += gi * c;
                    }
                }
                Op::AddScalar { input, .. } => {
                    for (idx, &gi) in g.iter().enumerate() {
                        self.grads[input.0][idx] += gi;
                    }
                }
                Op::Sum { input } => {
                    let gs = g[0];
                    for v in self.grads[input.0].iter_mut() {
                        *v += gs;
                    }
                }
                Op::Mean { input } => {
                    let n = self.grads[input.0].len() as f64;
                    let gs = g[0] / n;
                    for v in self.grads[input.0].iter_mut() {
                        *v += gs;
                    }
                }
                Op::Sqrt { input } => {
                    let y = self.nodes[i].value.data().to_vec();
                    for (idx, &gi) in g.iter().enumerate() {
                        self.grads[input.0][idx] += gi / (2.0 * y[idx]);
                    }
                }
                Op::Ln { input } => {
                    let x = self.nodes[input.0].value.data().to_vec();
                    for (idx, &gi) in g.iter().enumerate() {
                        self.grads[input.0][idx] += gi / x[idx];
                    }
                }
                Op::Clamp { input, lo, hi } => {
                    let x = self.nodes[input.0].value.data().to_vec();
                    for (idx, &gi) in g.iter().enumerate() {
                        if x[idx] >= lo && x[idx] <= hi {
                            self.grads[input.0][idx] += gi;
                        }
                    }
                }
                Op::PowerNorm { input, block_cols } => {
                    self.backward_power_norm(&g, input, block_cols)
                }
            }
            self.grads[i] = g;
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn backward_conv1d(
        &mut self,
        g: &[f64],
        node: usize,
        input: NodeId,
        weight: NodeId,
        bias: Option<NodeId>,
        stride: usize,
        dilation: usize,
        left_pad: usize,
    ) {
        let x = &self.nodes[input.0].value;
        let (c_in, t) = (x.shape()[0], x.shape()[1]);
        let ws = self.nodes[weight.0].value.shape();
        let (c_out, k) = (ws[0], ws[2]);
        let t_out = self.nodes[node].value.shape()[1];
        let (xp, tp) = pad_rows(x, left_pad);
        let w = self.nodes[weight.0].value.data().to_vec();

        let mut dxp = vec![0.0; c_in * tp];
        let mut dw = vec![0.0; w.len()];
        let mut db = vec![0.0; c_out];
        for co in 0..c_out {
            let grow = &g[co * t_out..(co + 1) * t_out];
            for (j, &gv) in grow.iter().enumerate() {
                if gv == 0.0 {
                    continue;
                }
                db[co] += gv;
                let base = j * stride;
                for ci in 0..c_in {
                    let xrow = &xp[ci * tp..(ci + 1) * tp];
                    let woff = (co * c_in + ci) * k;
                    let dxrow = &mut dxp[ci * tp..(ci + 1) * tp];
                    let mut p = base;
                    for kk in 0..k {
                        dw[woff + kk] += gv * xrow[p];
                        dxrow[p] += gv * w[woff + kk];
                        p += dilation;
                    }
                }
            }
        }
        for ci in 0..c_in {
            for tc in 0..t {
                self.grads[input.0][ci * t + tc] += dxp[ci * tp + left_pad + tc];
            }
        }
        for (dst, src) in self.grads[weight.0].iter_mut().zip(dw.iter()) {
            *dst += src;
        }
        if let Some(b) = bias {
            for (dst, src) in self.grads[b.0].iter_mut().zip(db.iter()) {
                *dst += src;
            }
        }
    }

    fn backward_conv_t1d(&mut self, g: &[f64], node: usize, input: NodeId, weight: NodeId, stride: usize) {
        let _ = node;
        let x = &self.nodes[input.0].value;
        let (c_in, t) = (x.shape()[0], x.shape()[1]);
        let ws = self.nodes[weight.0].value.shape();
        let (c_out, k) = (ws[1], ws[2]);
        let t_out = t * stride;
        let xv = x.data().to_vec();
        let w = self.nodes[weight.0].value.data().to_vec();

        let mut dx = vec![0.0; c_in * t];
        let mut dw = vec![0.0; w.len()];
        for tc in 0..t {
            for co in 0..c_out {
                for kk in 0..k {
                    let pos = tc * stride + kk;
                    if pos >= t_out {
                        break;
                    }
                    let gv = g[co * t_out + pos];
                    if gv == 0.0 {
                        continue;
                    }
                    for ci in 0..c_in {
                        dx[ci * t + tc] += gv * w[(ci * c_out + co) * k + kk];
                        dw[(ci * c_out + co) * k + kk] += gv * xv[ci * t + tc];
                    }
                }
            }
        }
        for (dst, src) in self.grads[input.0].iter_mut().zip(dx.iter()) {
            *dst += src;
        }
        for (dst, src) in self.grads[weight.0].iter_mut().zip(dw.iter()) {
            *dst += src;
        }
    }

    fn backward_cln(&mut self, g: &[f64], input: NodeId, gain: NodeId, bias: NodeId, eps: f64) {
        let x = self.nodes[input.0].value.data().to_vec();
        let (c, t) = {
            let s = self.nodes[input.0].value.shape();
            (s[0], s[1])
        };
        let gv = self.nodes[gain.0].value.data().to_vec();

        // Recompute per-column statistics.
        let mut mu = vec![0.0; t];
        let mut r = vec![0.0; t];
        let mut nvals = vec![0.0; t];
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for tc in 0..t {
            for ci in 0..c {
                let v = x[ci * t + tc];
                s1 += v;
                s2 += v * v;
            }
            let n = (c * (tc + 1)) as f64;
            let (rt, mut_) = cln_column_stats(s1, s2, n, eps);
            mu[tc] = mut_;
            r[tc] = rt;
            nvals[tc] = n;
        }

        // Per-column aggregates of the incoming gradient.
        let mut a_t = vec![0.0; t]; // sum_c g*gain
        let mut b_t = vec![0.0; t]; // sum_c g*gain*(x-mu)
        for ci in 0..c {
            for tc in 0..t {
                let gg = g[ci * t + tc] * gv[ci];
                a_t[tc] += gg;
                b_t[tc] += gg * (x[ci * t + tc] - mu[tc]);
            }
        }
        // Suffix sums: every input column influences all later outputs.
        let mut p = vec![0.0; t + 1];
        let mut q = vec![0.0; t + 1];
        let mut s = vec![0.0; t + 1];
        for tc in (0..t).rev() {
            let r3 = r[tc] * r[tc] * r[tc];
            p[tc] = p[tc + 1] + a_t[tc] * r[tc] / nvals[tc];
            q[tc] = q[tc + 1] + b_t[tc] * r3 / nvals[tc];
            s[tc] = s[tc + 1] + b_t[tc] * r3 * mu[tc] / nvals[tc];
        }

        for ci in 0..c {
            for tc in 0..t {
                let xi = x[ci * t + tc];
                let dx = g[ci * t + tc] * gv[ci] * r[tc] - p[tc] - xi * q[tc] + s[tc];
                self.grads[input.0][ci * t + tc] += dx;
            }
        }
        for ci in 0..c {
            let mut dg = 0.0;
            let mut db = 0.0;
            for tc in 0..t {
                dg += g[ci * t + tc] * (x[ci * t + tc] - mu[tc]) * r[tc];
                db += g[ci * t + tc];
            }
            self.grads[gain.0][ci] += dg;
            self.grads[bias.0][ci] += db;
        }
    }

    fn backward_power_norm(&mut self, g: &[f64], input: NodeId, block_cols: usize) {
        let x = self.nodes[input.0].value.data().to_vec();
        let (c, t) = {
            let s = self.nodes[input.0].value.shape();
            (s[0], s[1])
        };
        let n = (c * block_cols) as f64;
        for blk in 0..t / block_cols {
            let lo = blk * block_cols;
            let hi = lo + block_cols;
            let mut ss = 0.0;
            let mut dot = 0.0;
            for ci in 0..c {
                for tc in lo..hi {
                    let v = x[ci * t + tc];
                    ss += v * v;
                    dot += g[ci * t + tc] * v;
                }
            }
            let ms = ss / n;
            if (ms - 1.0).abs() <= POWER_NORM_SNAP {
                for ci in 0..c {
                    for tc in lo..hi {
                        let idx = ci * t + tc;
                        self.grads[input.0][idx] += g[idx];
                    }
                }
                continue;
            }
            let s_ = ms.sqrt();
            let s3 = s_ * s_ * s_;
            for ci in 0..c {
                for tc in lo..hi {
                    let idx = ci * t + tc;
                    self.grads[input.0][idx] += g[idx] / s_ - x[idx] * dot / (n * s3);
                }
            }
        }
    }

    fn backward_bin(&mut self, g: &[f64], op: BinOp, kind: BinKind, a: NodeId, b: NodeId) {
        let t_cols = if matches!(kind, BinKind::ChannelRhs) {
            self.nodes[a.0].value.shape()[1]
        } else {
            1
        };
        let av = self.nodes[a.0].value.data().to_vec();
        let bv = self.nodes[b.0].value.data().to_vec();
        for (i, &gi) in g.iter().enumerate() {
            if gi == 0.0 {
                continue;
            }
            let (ai, bi) = match kind {
                BinKind::Same => (i, i),
                BinKind::ScalarRhs => (i, 0),
                BinKind::ScalarLhs => (0, i),
                BinKind::ChannelRhs => (i, i / t_cols),
            };
            match op {
                BinOp::Add => {
                    self.grads[a.0][ai] += gi;
                    self.grads[b.0][bi] += gi;
                }
                BinOp::Sub => {
                    self.grads[a.0][ai] += gi;
                    self.grads[b.0][bi] -= gi;
                }
                BinOp::Mul => {
                    self.grads[a.0][ai] += gi * bv[bi];
                    self.grads[b.0][bi] += gi * av[ai];
                }
                BinOp::Div => {
                    self.grads[a.0][ai] += gi / bv[bi];
                    self.grads[b.0][bi] -= gi * av[ai] / (bv[bi] * bv[bi]);
                }
            }
        }
    }
}
