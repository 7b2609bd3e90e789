use crate::error::{invalid, NumError, Result};
use crate::kernels::{col2im, gemm, im2col, ConvGeom, MatRef};
use crate::tensor::Tensor;

/// Handle to a node recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Elementwise {
    Relu,
    Sigmoid,
    Log,
    Square,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    Mean,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        input: NodeId,
        kernel: NodeId,
        bias: NodeId,
        geom: ConvGeom,
        cols: Vec<f64>,
    },
    Unary {
        input: NodeId,
        kind: Elementwise,
    },
    Upsample {
        input: NodeId,
        factor: usize,
    },
    Reduce {
        input: NodeId,
        kind: Reduction,
        /// Output flat index for every input flat index.
        target: Vec<usize>,
        count: usize,
    },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    MaskChannels {
        input: NodeId,
        mask: Vec<f64>,
    },
    Linear {
        weight: NodeId,
        input: NodeId,
        bias: NodeId,
    },
    LogSoftmax(NodeId),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

/// Operation tape. Nodes are appended in evaluation order, so every node's
/// inputs precede it and reverse insertion order is a valid backward schedule.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: Vec<NodeId>,
}

/// Gradients of a scalar loss, indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<NodeId>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Gradient for every trainable leaf in registration order. Parameters the
    /// loss does not depend on receive zeros.
    pub fn params(&self) -> Vec<Tensor> {
        self.params
            .iter()
            .zip(&self.shapes)
            .map(|(id, shape)| {
                self.get(*id)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(shape))
            })
            .collect()
    }

    pub fn into_params(mut self) -> Vec<Tensor> {
        let params = std::mem::take(&mut self.params);
        params
            .iter()
            .zip(&self.shapes)
            .map(|(id, shape)| {
                self.grads[id.0]
                    .take()
                    .unwrap_or_else(|| Tensor::zeros(shape))
            })
            .collect()
    }
}

fn check_finite(t: &Tensor, what: &'static str) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(NumError::NonFinite(what))
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    /// Trainable leaves in registration order.
    pub fn params(&self) -> &[NodeId] {
        &self.params
    }

    fn push(&mut self, op: Op, value: Tensor, what: &'static str) -> Result<NodeId> {
        check_finite(&value, what)?;
        let needs_grad = match &op {
            Op::Leaf => false,
            other => self.inputs(other).iter().any(|i| self.nodes[i.0].needs_grad),
        };
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    fn inputs(&self, op: &Op) -> Vec<NodeId> {
        match *op {
            Op::Leaf => vec![],
            Op::Conv2d {
                input,
                kernel,
                bias,
                ..
            } => vec![input, kernel, bias],
            Op::Unary { input, .. }
            | Op::Upsample { input, .. }
            | Op::Reduce { input, .. }
            | Op::Scale(input, _)
            | Op::MaskChannels { input, .. }
            | Op::LogSoftmax(input) => vec![input],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![a, b],
            Op::Linear {
                weight,
                input,
                bias,
            } => vec![weight, input, bias],
        }
    }

    /// Trainable leaf; its gradient is reported by [`Gradients::params`].
    pub fn param(&mut self, value: Tensor) -> Result<NodeId> {
        let id = self.push(Op::Leaf, value, "param")?;
        self.nodes[id.0].needs_grad = true;
        self.params.push(id);
        Ok(id)
    }

    pub fn constant(&mut self, value: Tensor) -> Result<NodeId> {
        self.push(Op::Leaf, value, "constant")
    }

    /// Zero-padded cross-correlation of `input [C_in,H,W]` with
    /// `kernel [C_out,C_in,k,k]` plus per-channel `bias [C_out]`.
    pub fn conv2d(
        &mut self,
        input: NodeId,
        kernel: NodeId,
        bias: NodeId,
        stride: usize,
    ) -> Result<NodeId> {
        let (xs, ks, bs) = (self.shape(input), self.shape(kernel), self.shape(bias));
        if xs.len() != 3 || ks.len() != 4 || bs.len() != 1 {
            return invalid(format!(
                "conv2d: expected input rank 3, kernel rank 4, bias rank 1; got {xs:?}, {ks:?}, {bs:?}"
            ));
        }
        if ks[1] != xs[0] || ks[2] != ks[3] || ks[2] % 2 == 0 || bs[0] != ks[0] {
            return invalid(format!(
                "conv2d: incompatible input {xs:?}, kernel {ks:?}, bias {bs:?}"
            ));
        }
        if stride == 0 {
            return invalid("conv2d: stride must be >= 1");
        }
        let geom = ConvGeom::new(xs[0], xs[1], xs[2], ks[0], ks[2], stride);
        let cols = im2col(&geom, self.value(input).data());
        let p = geom.out_pixels();
        let mut out = vec![0.0; geom.c_out * p];
        for (row, &b) in out.chunks_mut(p).zip(self.value(bias).data()) {
            row.fill(b);
        }
        gemm(
            geom.c_out,
            geom.patch_len(),
            p,
            MatRef::row_major(self.value(kernel).data(), geom.patch_len()),
            MatRef::row_major(&cols, p),
            1.0,
            &mut out,
        );
        let value = Tensor::new(vec![geom.c_out, geom.h_out, geom.w_out], out)?;
        self.push(
            Op::Conv2d {
                input,
                kernel,
                bias,
                geom,
                cols,
            },
            value,
            "conv2d",
        )
    }

    pub fn elementwise(&mut self, input: NodeId, kind: Elementwise) -> Result<NodeId> {
        let x = self.value(input);
        let value = match kind {
            Elementwise::Relu => x.map(|v| v.max(0.0)),
            Elementwise::Sigmoid => x.map(sigmoid),
            Elementwise::Square => x.map(|v| v * v),
            Elementwise::Log => {
                if let Some(bad) = x.data().iter().find(|&&v| v <= 0.0) {
                    return Err(NumError::Domain(format!("log of nonpositive value {bad}")));
                }
                x.map(f64::ln)
            }
        };
        self.push(Op::Unary { input, kind }, value, "elementwise")
    }

    pub fn relu(&mut self, input: NodeId) -> Result<NodeId> {
        self.elementwise(input, Elementwise::Relu)
    }

    pub fn sigmoid(&mut self, input: NodeId) -> Result<NodeId> {
        self.elementwise(input, Elementwise::Sigmoid)
    }

    pub fn log(&mut self, input: NodeId) -> Result<NodeId> {
        self.elementwise(input, Elementwise::Log)
    }

    pub fn square(&mut self, input: NodeId) -> Result<NodeId> {
        self.elementwise(input, Elementwise::Square)
    }

    /// Nearest-neighbour upsampling of a `[C,H,W]` tensor.
    pub fn upsample_nearest(&mut self, input: NodeId, factor: usize) -> Result<NodeId> {
        if factor < 1 {
            return invalid("upsample_nearest: factor must be >= 1");
        }
        let shape = self.shape(input);
        if shape.len() != 3 {
            return invalid(format!("upsample_nearest: expected rank 3, got {shape:?}"));
        }
        let (c, h, w) = (shape[0], shape[1], shape[2]);
        let (ho, wo) = (h * factor, w * factor);
        let x = self.value(input).data();
        let mut out = vec![0.0; c * ho * wo];
        for ch in 0..c {
            for oy in 0..ho {
                let src = &x[(ch * h + oy / factor) * w..(ch * h + oy / factor + 1) * w];
                let dst = &mut out[(ch * ho + oy) * wo..(ch * ho + oy + 1) * wo];
                for (ox, d) in dst.iter_mut().enumerate() {
                    *d = src[ox / factor];
                }
            }
        }
        let value = Tensor::new(vec![c, ho, wo], out)?;
        self.push(Op::Upsample { input, factor }, value, "upsample")
    }

    /// Sum or mean over `axes`, which are removed from the output shape.
    /// An empty axis set is the identity.
    pub fn reduce(&mut self, input: NodeId, kind: Reduction, axes: &[usize]) -> Result<NodeId> {
        let shape = self.shape(input).to_vec();
        let mut reduced = vec![false; shape.len()];
        for &a in axes {
            if a >= shape.len() || reduced[a] {
                return invalid(format!("reduce: invalid axis {a} for shape {shape:?}"));
            }
            reduced[a] = true;
        }
        let out_shape: Vec<usize> = shape
            .iter()
            .zip(&reduced)
            .filter(|(_, &r)| !r)
            .map(|(&d, _)| d)
            .collect();
        let count: usize = shape
            .iter()
            .zip(&reduced)
            .filter(|(_, &r)| r)
            .map(|(&d, _)| d)
            .product();

        // Output stride contributed by each input axis (0 for reduced axes).
        let mut out_strides = vec![0usize; shape.len()];
        let mut acc = 1;
        for ax in (0..shape.len()).rev() {
            if !reduced[ax] {
                out_strides[ax] = acc;
                acc *= shape[ax];
            }
        }
        let n: usize = shape.iter().product();
        let mut target = Vec::with_capacity(n);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..n {
            target.push(idx.iter().zip(&out_strides).map(|(i, s)| i * s).sum());
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }

        let mut out = vec![0.0; out_shape.iter().product()];
        for (&v, &t) in self.value(input).data().iter().zip(&target) {
            out[t] += v;
        }
        if kind == Reduction::Mean && count > 0 {
            let inv = 1.0 / count as f64;
            out.iter_mut().for_each(|v| *v *= inv);
        }
        let value = Tensor::new(out_shape, out)?;
        self.push(
            Op::Reduce {
                input,
                kind,
                target,
                count,
            },
            value,
            "reduce",
        )
    }

    /// Mean over each cell of a `rows x cols` grid laid over a `[C,H,W]`
    /// tensor, flattened to `[C*rows*cols]` in `(channel, row, col)` order.
    /// `H` and `W` must be divisible by the grid size.
    pub fn grid_mean(&mut self, input: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        let shape = self.shape(input).to_vec();
        let [c, h, w] = shape[..] else {
            return invalid(format!("grid_mean: expected rank 3, got {shape:?}"));
        };
        if rows == 0 || cols == 0 || h % rows != 0 || w % cols != 0 {
            return invalid(format!("grid_mean: {rows}x{cols} grid does not tile {h}x{w}"));
        }
        let (ch, cw) = (h / rows, w / cols);
        let mut target = Vec::with_capacity(c * h * w);
        for k in 0..c {
            for y in 0..h {
                for x in 0..w {
                    target.push((k * rows + y / ch) * cols + x / cw);
                }
            }
        }
        let count = ch * cw;
        let mut out = vec![0.0; c * rows * cols];
        for (&v, &t) in self.value(input).data().iter().zip(&target) {
            out[t] += v;
        }
        let inv = 1.0 / count as f64;
        out.iter_mut().for_each(|v| *v *= inv);
        let value = Tensor::new(vec![c * rows * cols], out)?;
        self.push(
            Op::Reduce {
                input,
                kind: Reduction::Mean,
                target,
                count,
            },
            value,
            "grid_mean",
        )
    }

    pub fn sum_all(&mut self, input: NodeId) -> Result<NodeId> {
        let axes: Vec<usize> = (0..self.shape(input).len()).collect();
        self.reduce(input, Reduction::Sum, &axes)
    }

    pub fn mean_all(&mut self, input: NodeId) -> Result<NodeId> {
        let axes: Vec<usize> = (0..self.shape(input).len()).collect();
        self.reduce(input, Reduction::Mean, &axes)
    }

    fn binary(
        &mut self,
        a: NodeId,
        b: NodeId,
        what: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<NodeId> {
        self.value(a).same_shape(self.value(b), what)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        self.push(op, value, what)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, input: NodeId, factor: f64) -> Result<NodeId> {
        let value = self.value(input).map(|v| v * factor);
        self.push(Op::Scale(input, factor), value, "scale")
    }

    /// Multiply each channel of a `[C,...]` tensor by `mask[c]`.
    pub fn mask_channels(&mut self, input: NodeId, mask: &[f64]) -> Result<NodeId> {
        let shape = self.shape(input);
        if shape.is_empty() || shape[0] != mask.len() {
            return invalid(format!(
                "mask_channels: mask of length {} for shape {shape:?}",
                mask.len()
            ));
        }
        let x = self.value(input);
        let plane = x.len() / mask.len();
        let mut data = x.data().to_vec();
        for (chunk, &m) in data.chunks_mut(plane.max(1)).zip(mask) {
            chunk.iter_mut().for_each(|v| *v *= m);
        }
        let value = Tensor::new(shape.to_vec(), data)?;
        self.push(
            Op::MaskChannels {
                input,
                mask: mask.to_vec(),
            },
            value,
            "mask_channels",
        )
    }

    /// `weight [out,in] * input [in] + bias [out]`.
    pub fn linear(&mut self, weight: NodeId, input: NodeId, bias: NodeId) -> Result<NodeId> {
        let (ws, xs, bs) = (self.shape(weight), self.shape(input), self.shape(bias));
        if ws.len() != 2 || xs != [ws[1]] || bs != [ws[0]] {
            return invalid(format!(
                "linear: incompatible weight {ws:?}, input {xs:?}, bias {bs:?}"
            ));
        }
        let (n_out, n_in) = (ws[0], ws[1]);
        let mut out = self.value(bias).data().to_vec();
        gemm(
            n_out,
            n_in,
            1,
            MatRef::row_major(self.value(weight).data(), n_in),
            MatRef::row_major(self.value(input).data(), 1),
            1.0,
            &mut out,
        );
        let value = Tensor::new(vec![n_out], out)?;
        self.push(
            Op::Linear {
                weight,
                input,
                bias,
            },
            value,
            "linear",
        )
    }

    /// Numerically stable log-softmax of a rank-1 tensor.
    pub fn log_softmax(&mut self, input: NodeId) -> Result<NodeId> {
        let x = self.value(input);
        if x.rank() != 1 || x.is_empty() {
            return invalid(format!("log_softmax: expected nonempty rank 1, got {:?}", x.shape()));
        }
        let max = x.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + x.data().iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let value = x.map(|v| v - lse);
        self.push(Op::LogSoftmax(input), value, "log_softmax")
    }

    /// Reverse-mode accumulation from a one-element `loss` node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return invalid(format!(
                "backward: loss must be scalar, got shape {:?}",
                self.shape(loss)
            ));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.shape(loss), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.needs_grad {
                self.propagate(node, &g, &mut grads)?;
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            grads,
            params: self.params.clone(),
            shapes: self
                .params
                .iter()
                .map(|p| self.shape(*p).to_vec())
                .collect(),
        })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], id: NodeId, contrib: Tensor) {
        if !self.nodes[id.0].needs_grad {
            return;
        }
        match &mut grads[id.0] {
            Some(existing) => existing
                .data_mut()
                .iter_mut()
                .zip(contrib.data())
                .for_each(|(a, b)| *a += b),
            slot @ None => *slot = Some(contrib),
        }
    }

    fn wants(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                kernel,
                bias,
                geom,
                cols,
            } => {
                let p = geom.out_pixels();
                let r = geom.patch_len();
                if self.wants(*bias) {
                    let db: Vec<f64> = gd.chunks(p).map(|row| row.iter().sum()).collect();
                    self.accumulate(grads, *bias, Tensor::new(vec![geom.c_out], db)?);
                }
                if self.wants(*kernel) {
                    let mut dk = vec![0.0; geom.c_out * r];
                    gemm(
                        geom.c_out,
                        p,
                        r,
                        MatRef::row_major(gd, p),
                        MatRef::transposed(cols, p),
                        0.0,
                        &mut dk,
                    );
                    let shape = self.shape(*kernel).to_vec();
                    self.accumulate(grads, *kernel, Tensor::new(shape, dk)?);
                }
                if self.wants(*input) {
                    let mut dcols = vec![0.0; r * p];
                    gemm(
                        r,
                        geom.c_out,
                        p,
                        MatRef::transposed(self.value(*kernel).data(), r),
                        MatRef::row_major(gd, p),
                        0.0,
                        &mut dcols,
                    );
                    let mut dx = vec![0.0; geom.c_in * geom.h * geom.w];
                    col2im(geom, &dcols, &mut dx);
                    let shape = self.shape(*input).to_vec();
                    self.accumulate(grads, *input, Tensor::new(shape, dx)?);
                }
            }
            Op::Unary { input, kind } => {
                let x = self.value(*input).data();
                let y = node.value.data();
                let dx: Vec<f64> = match kind {
                    Elementwise::Relu => gd
                        .iter()
                        .zip(x)
                        .map(|(&g, &v)| if v > 0.0 { g } else { 0.0 })
                        .collect(),
                    Elementwise::Sigmoid => gd
                        .iter()
                        .zip(y)
                        .map(|(&g, &s)| g * s * (1.0 - s))
                        .collect(),
                    Elementwise::Log => gd.iter().zip(x).map(|(&g, &v)| g / v).collect(),
                    Elementwise::Square => gd.iter().zip(x).map(|(&g, &v)| 2.0 * g * v).collect(),
                };
                let shape = self.shape(*input).to_vec();
                self.accumulate(grads, *input, Tensor::new(shape, dx)?);
            }
            Op::Upsample { input, factor } => {
                let shape = self.shape(*input).to_vec();
                let (c, h, w) = (shape[0], shape[1], shape[2]);
                let (ho, wo) = (h * factor, w * factor);
                let mut dx = vec![0.0; c * h * w];
                for ch in 0..c {
                    for oy in 0..ho {
                        let src = &gd[(ch * ho + oy) * wo..(ch * ho + oy + 1) * wo];
                        let base = (ch * h + oy / factor) * w;
                        for (ox, &v) in src.iter().enumerate() {
                            dx[base + ox / factor] += v;
                        }
                    }
                }
                self.accumulate(grads, *input, Tensor::new(shape, dx)?);
            }
            Op::Reduce {
                input,
                kind,
                target,
                count,
            } => {
                let scale = match kind {
                    Reduction::Sum => 1.0,
                    Reduction::Mean if *count > 0 => 1.0 / *count as f64,
                    Reduction::Mean => 1.0,
                };
                let dx: Vec<f64> = target.iter().map(|&t| gd[t] * scale).collect();
                let shape = self.shape(*input).to_vec();
                self.accumulate(grads, *input, Tensor::new(shape, dx)?);
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                if self.wants(*b) {
                    self.accumulate(grads, *b, g.map(|v| -v));
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.wants(*a) {
                    let d = gd.iter().zip(bv.data()).map(|(g, y)| g * y).collect();
                    self.accumulate(grads, *a, Tensor::new(av.shape().to_vec(), d)?);
                }
                if self.wants(*b) {
                    let d = gd.iter().zip(av.data()).map(|(g, x)| g * x).collect();
                    self.accumulate(grads, *b, Tensor::new(bv.shape().to_vec(), d)?);
                }
            }
            Op::Scale(input, factor) => {
                self.accumulate(grads, *input, g.map(|v| v * factor));
            }
            Op::MaskChannels { input, mask } => {
                let plane = (g.len() / mask.len()).max(1);
                let mut d = gd.to_vec();
                for (chunk, &m) in d.chunks_mut(plane).zip(mask) {
                    chunk.iter_mut().for_each(|v| *v *= m);
                }
                self.accumulate(grads, *input, Tensor::new(g.shape().to_vec(), d)?);
            }
            Op::Linear {
                weight,
                input,
                bias,
            } => {
                let ws = self.shape(*weight).to_vec();
                let (n_out, n_in) = (ws[0], ws[1]);
                self.accumulate(grads, *bias, g.clone());
                if self.wants(*weight) {
                    let mut dw = vec![0.0; n_out * n_in];
                    gemm(
                        n_out,
                        1,
                        n_in,
                        MatRef::row_major(gd, 1),
                        MatRef::row_major(self.value(*input).data(), n_in),
                        0.0,
                        &mut dw,
                    );
                    self.accumulate(grads, *weight, Tensor::new(ws, dw)?);
                }
                if self.wants(*input) {
                    let mut dx = vec![0.0; n_in];
                    gemm(
                        n_in,
                        n_out,
                        1,
                        MatRef::transposed(self.value(*weight).data(), n_in),
                        MatRef::row_major(gd, 1),
                        0.0,
                        &mut dx,
                    );
                    self.accumulate(grads, *input, Tensor::new(vec![n_in], dx)?);
                }
            }
            Op::LogSoftmax(input) => {
                let total: f64 = gd.iter().sum();
                let d = gd
                    .iter()
                    .zip(node.value.data())
                    .map(|(&g, &ls)| g - ls.exp() * total)
                    .collect();
                self.accumulate(grads, *input, Tensor::new(g.shape().to_vec(), d)?);
            }
        }
        Ok(())
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}
