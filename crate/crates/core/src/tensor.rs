//! Dense row-major `f64` tensors with an eager reverse-mode tape.
//!
//! Every operation on a [`Tape`] computes its value immediately and records
//! a node holding whatever the backward rule needs. [`Tape::backward`] walks
//! the nodes in reverse insertion order, which is a valid reverse topological
//! order because inputs always precede outputs.
//!
//! Shapes are kept deliberately narrow: the model only needs 2-D matrices,
//! row vectors for biases and scalars for losses. Reshapes, transposes,
//! window partitions and cyclic shifts are all expressed as [`Tape::gather`]
//! with a precomputed index map.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: dimension mismatch between {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: empty input")]
    Empty { op: &'static str },
    #[error("cross_entropy: label {label} at batch index {index} is out of range for {classes} classes")]
    Label {
        index: usize,
        label: usize,
        classes: usize,
    },
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// An n-dimensional array of finite reals with an optional gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(TensorError::Shape {
                op: "tensor",
                lhs: shape,
                rhs: vec![data.len()],
            });
        }
        if shape.iter().any(|&d| d == 0) {
            return Err(TensorError::Empty { op: "tensor" });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { op: "tensor" });
        }
        Ok(Self {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self::new(shape, vec![0.0; n]).expect("zeros with a zero extent")
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![value])
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(usize) -> f64) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, (0..n).map(&mut f).collect())
    }

    /// Marks the tensor as a trainable leaf.
    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn set_requires_grad(&mut self, on: bool) {
        self.requires_grad = on;
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    /// Adds `g` into the gradient buffer, allocating it on first use.
    pub fn accumulate_grad(&mut self, g: &[f64]) -> Result<()> {
        if g.len() != self.data.len() {
            return Err(TensorError::Shape {
                op: "accumulate_grad",
                lhs: self.shape.clone(),
                rhs: vec![g.len()],
            });
        }
        let buf = self.grad.get_or_insert_with(|| vec![0.0; g.len()]);
        buf.iter_mut().zip(g).for_each(|(b, v)| *b += v);
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1 && self.shape.iter().all(|&d| d == 1)
    }

    /// (rows, cols) for a rank-2 tensor; a rank-1 tensor is a single row.
    fn matrix_dims(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [n] => Ok((1, *n)),
            [m, n] => Ok((*m, *n)),
            _ => Err(TensorError::Shape {
                op,
                lhs: self.shape.clone(),
                rhs: vec![],
            }),
        }
    }

    /// Length of the trailing axis; the "row" width for row-wise operations.
    fn last_extent(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul { a: Var, b: Var },
    Transpose { a: Var },
    Add { a: Var, b: Var },
    AddRow { a: Var, bias: Var },
    Scale { a: Var, factor: f64 },
    Gelu { a: Var },
    Softmax { a: Var },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    CrossEntropy {
        logits: Var,
        probs: Vec<f64>,
        labels: Vec<usize>,
    },
    Gather { a: Var, index: Vec<usize> },
    Concat { parts: Vec<Var>, axis: usize },
    MeanRows { a: Var },
    Sum { a: Var },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Ordered record of every operation since construction.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
    matmul_macs: u64,
}

/// Gradients produced by one backward pass, indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient for `v`, or `None` when `v` does not require grad.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_CUBIC: f64 = 0.044_715;

/// Tanh approximation of the Gaussian error linear unit.
pub fn gelu_scalar(x: f64) -> f64 {
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x)).tanh())
}

fn gelu_derivative(x: f64) -> f64 {
    let t = (SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_CUBIC * x * x)
}

/// Naive `m×k · k×n` product accumulated into `out`.
fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

fn transpose_data(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
    out
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Multiply-accumulate count of every matmul recorded so far.
    pub fn matmul_macs(&self) -> u64 {
        self.matmul_macs
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].value.requires_grad
    }

    pub fn leaf(&mut self, tensor: Tensor) -> Var {
        self.nodes.push(Node {
            op: Op::Leaf,
            value: tensor,
        });
        Var(self.nodes.len() - 1)
    }

    /// A non-trainable leaf.
    pub fn constant(&mut self, mut tensor: Tensor) -> Var {
        tensor.requires_grad = false;
        self.leaf(tensor)
    }

    fn push(&mut self, op: &'static str, kind: Op, shape: Vec<usize>, data: Vec<f64>, inputs: &[Var]) -> Result<Var> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { op });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].value.requires_grad);
        self.nodes.push(Node {
            op: kind,
            value: Tensor {
                shape,
                data,
                requires_grad,
                grad: None,
            },
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = ta.matrix_dims("matmul")?;
        let (k2, n) = tb.matrix_dims("matmul")?;
        if k != k2 || ta.shape.len() != 2 || tb.shape.len() != 2 {
            return Err(TensorError::Shape {
                op: "matmul",
                lhs: ta.shape.clone(),
                rhs: tb.shape.clone(),
            });
        }
        let mut out = vec![0.0; m * n];
        matmul_into(&ta.data, &tb.data, &mut out, m, k, n);
        self.matmul_macs += (m * k * n) as u64;
        self.push("matmul", Op::MatMul { a, b }, vec![m, n], out, &[a, b])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let (m, n) = t.matrix_dims("transpose")?;
        let out = transpose_data(&t.data, m, n);
        self.push("transpose", Op::Transpose { a }, vec![n, m], out, &[a])
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape != tb.shape {
            return Err(TensorError::Shape {
                op: "add",
                lhs: ta.shape.clone(),
                rhs: tb.shape.clone(),
            });
        }
        let out = ta.data.iter().zip(&tb.data).map(|(x, y)| x + y).collect();
        let shape = ta.shape.clone();
        self.push("add", Op::Add { a, b }, shape, out, &[a, b])
    }

    /// Adds a length-`n` bias to every row of an `m×n` matrix.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        let n = ta.last_extent();
        if tb.numel() != n || ta.shape.is_empty() {
            return Err(TensorError::Shape {
                op: "add_row",
                lhs: ta.shape.clone(),
                rhs: tb.shape.clone(),
            });
        }
        let out = ta
            .data
            .chunks(n)
            .flat_map(|row| row.iter().zip(&tb.data).map(|(x, b)| x + b))
            .collect();
        let shape = ta.shape.clone();
        self.push("add_row", Op::AddRow { a, bias }, shape, out, &[a, bias])
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let t = self.value(a);
        let out = t.data.iter().map(|x| x * factor).collect();
        let shape = t.shape.clone();
        self.push("scale", Op::Scale { a, factor }, shape, out, &[a])
    }

    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let out = t.data.iter().map(|&x| gelu_scalar(x)).collect();
        let shape = t.shape.clone();
        self.push("gelu", Op::Gelu { a }, shape, out, &[a])
    }

    /// Row-wise softmax over the trailing axis, stabilized by the row max.
    pub fn softmax_lastdim(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.numel() == 0 {
            return Err(TensorError::Empty { op: "softmax" });
        }
        let n = t.last_extent();
        let mut out = Vec::with_capacity(t.numel());
        for row in t.data.chunks(n) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let start = out.len();
            out.extend(row.iter().map(|x| (x - max).exp()));
            let sum: f64 = out[start..].iter().sum();
            out[start..].iter_mut().for_each(|v| *v /= sum);
        }
        let shape = t.shape.clone();
        self.push("softmax", Op::Softmax { a }, shape, out, &[a])
    }

    /// Normalizes each row to zero mean and unit variance, then applies
    /// `gamma * x + beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        if !(eps > 0.0) {
            return Err(TensorError::Contract(format!("layer_norm eps must be positive, got {eps}")));
        }
        let (tx, tg, tb) = (self.value(x), self.value(gamma), self.value(beta));
        let n = tx.last_extent();
        if tg.numel() != n || tb.numel() != n || tx.shape.is_empty() {
            return Err(TensorError::Shape {
                op: "layer_norm",
                lhs: tx.shape.clone(),
                rhs: tg.shape.clone(),
            });
        }
        let rows = tx.numel() / n;
        let mut normalized = Vec::with_capacity(tx.numel());
        let mut inv_std = Vec::with_capacity(rows);
        let mut out = Vec::with_capacity(tx.numel());
        for row in tx.data.chunks(n) {
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for (j, v) in row.iter().enumerate() {
                let xh = (v - mean) * is;
                normalized.push(xh);
                out.push(xh * tg.data[j] + tb.data[j]);
            }
        }
        let shape = tx.shape.clone();
        self.push(
            "layer_norm",
            Op::LayerNorm {
                x,
                gamma,
                beta,
                normalized,
                inv_std,
            },
            shape,
            out,
            &[x, gamma, beta],
        )
    }

    /// Mean negative log-likelihood of `labels` under row-softmax of `logits`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let t = self.value(logits);
        let (b, c) = t.matrix_dims("cross_entropy")?;
        if labels.len() != b {
            return Err(TensorError::Shape {
                op: "cross_entropy",
                lhs: t.shape.clone(),
                rhs: vec![labels.len()],
            });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= c) {
            return Err(TensorError::Label {
                index,
                label,
                classes: c,
            });
        }
        let mut probs = Vec::with_capacity(b * c);
        let mut loss = 0.0;
        for (row, &label) in t.data.chunks(c).zip(labels) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            loss += lse - row[label];
            probs.extend(row.iter().map(|x| (x - lse).exp()));
        }
        loss /= b as f64;
        self.push(
            "cross_entropy",
            Op::CrossEntropy {
                logits,
                probs,
                labels: labels.to_vec(),
            },
            Vec::new(),
            vec![loss],
            &[logits],
        )
    }

    /// `out[i] = a[index[i]]` over the flat data, reshaped to `shape`.
    pub fn gather(&mut self, a: Var, index: Vec<usize>, shape: Vec<usize>) -> Result<Var> {
        let t = self.value(a);
        let numel: usize = shape.iter().product();
        if numel != index.len() {
            return Err(TensorError::Shape {
                op: "gather",
                lhs: shape,
                rhs: vec![index.len()],
            });
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= t.numel()) {
            return Err(TensorError::Contract(format!(
                "gather index {bad} out of range for {} elements",
                t.numel()
            )));
        }
        let out = index.iter().map(|&i| t.data[i]).collect();
        self.push("gather", Op::Gather { a, index }, shape, out, &[a])
    }

    /// Concatenates matrices along `axis` (0 = rows, 1 = columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts.first().ok_or(TensorError::Empty { op: "concat" })?;
        let (m0, n0) = self.value(*first).matrix_dims("concat")?;
        let mut dims = Vec::with_capacity(parts.len());
        for &p in parts {
            let (m, n) = self.value(p).matrix_dims("concat")?;
            let ok = match axis {
                0 => n == n0,
                1 => m == m0,
                _ => false,
            };
            if !ok {
                return Err(TensorError::Shape {
                    op: "concat",
                    lhs: vec![m0, n0],
                    rhs: vec![m, n],
                });
            }
            dims.push((m, n));
        }
        let (shape, out) = if axis == 0 {
            let rows = dims.iter().map(|d| d.0).sum();
            let mut out = Vec::with_capacity(rows * n0);
            for &p in parts {
                out.extend_from_slice(&self.value(p).data);
            }
            (vec![rows, n0], out)
        } else {
            let cols: usize = dims.iter().map(|d| d.1).sum();
            let mut out = Vec::with_capacity(m0 * cols);
            for i in 0..m0 {
                for (&p, &(_, n)) in parts.iter().zip(&dims) {
                    out.extend_from_slice(&self.value(p).data[i * n..(i + 1) * n]);
                }
            }
            (vec![m0, cols], out)
        };
        self.push(
            "concat",
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            shape,
            out,
            parts,
        )
    }

    /// Column means of an `m×n` matrix as a `1×n` row.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let (m, n) = t.matrix_dims("mean_rows")?;
        let mut out = vec![0.0; n];
        for row in t.data.chunks(n) {
            add_into(&mut out, row);
        }
        out.iter_mut().for_each(|v| *v /= m as f64);
        self.push("mean_rows", Op::MeanRows { a }, vec![1, n], out, &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data.iter().sum();
        self.push("sum", Op::Sum { a }, Vec::new(), vec![s], &[a])
    }

    /// Reverse-mode sweep from a scalar `loss`.
    ///
    /// Every node that requires grad gets an entry; nodes with no path to
    /// `loss` get zeros.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self
            .nodes
            .get(loss.0)
            .ok_or_else(|| TensorError::Contract(format!("loss {loss:?} is not on this tape")))?;
        if !lv.value.is_scalar() {
            return Err(TensorError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.value.shape
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if lv.value.requires_grad {
            grads[loss.0] = Some(vec![1.0]);
        }
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.backward_node(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        for (idx, node) in self.nodes.iter().enumerate() {
            if node.value.requires_grad && grads[idx].is_none() {
                grads[idx] = Some(vec![0.0; node.value.numel()]);
            }
        }
        Ok(Gradients { grads })
    }

    fn backward_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let mut acc = |v: Var, delta: &[f64]| {
            if !self.nodes[v.0].value.requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(buf) => add_into(buf, delta),
                slot @ None => *slot = Some(delta.to_vec()),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k) = (ta.shape[0], ta.shape[1]);
                let n = tb.shape[1];
                if ta.requires_grad {
                    let bt = transpose_data(&tb.data, k, n);
                    let mut ga = vec![0.0; m * k];
                    matmul_into(g, &bt, &mut ga, m, n, k);
                    acc(*a, &ga);
                }
                if tb.requires_grad {
                    let at = transpose_data(&ta.data, m, k);
                    let mut gb = vec![0.0; k * n];
                    matmul_into(&at, g, &mut gb, k, m, n);
                    acc(*b, &gb);
                }
            }
            Op::Transpose { a } => {
                let (m, n) = (node.value.shape[0], node.value.shape[1]);
                acc(*a, &transpose_data(g, m, n));
            }
            Op::Add { a, b } => {
                acc(*a, g);
                acc(*b, g);
            }
            Op::AddRow { a, bias } => {
                acc(*a, g);
                let n = self.value(*bias).numel();
                let mut gb = vec![0.0; n];
                for row in g.chunks(n) {
                    add_into(&mut gb, row);
                }
                acc(*bias, &gb);
            }
            Op::Scale { a, factor } => {
                let ga: Vec<f64> = g.iter().map(|v| v * factor).collect();
                acc(*a, &ga);
            }
            Op::Gelu { a } => {
                let x = &self.value(*a).data;
                let ga: Vec<f64> = g.iter().zip(x).map(|(g, &x)| g * gelu_derivative(x)).collect();
                acc(*a, &ga);
            }
            Op::Softmax { a } => {
                let y = &node.value.data;
                let n = node.value.last_extent();
                let mut ga = Vec::with_capacity(y.len());
                for (yr, gr) in y.chunks(n).zip(g.chunks(n)) {
                    let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                    ga.extend(yr.iter().zip(gr).map(|(y, g)| y * (g - dot)));
                }
                acc(*a, &ga);
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                normalized,
                inv_std,
            } => {
                let gam = &self.value(*gamma).data;
                let n = gam.len();
                let mut gx = Vec::with_capacity(g.len());
                let mut ggamma = vec![0.0; n];
                let mut gbeta = vec![0.0; n];
                for ((gr, xr), &is) in g.chunks(n).zip(normalized.chunks(n)).zip(inv_std) {
                    let mut sum_gh = 0.0;
                    let mut sum_ghx = 0.0;
                    for j in 0..n {
                        let gh = gr[j] * gam[j];
                        sum_gh += gh;
                        sum_ghx += gh * xr[j];
                        ggamma[j] += gr[j] * xr[j];
                        gbeta[j] += gr[j];
                    }
                    let nf = n as f64;
                    for j in 0..n {
                        let gh = gr[j] * gam[j];
                        gx.push(is / nf * (nf * gh - sum_gh - xr[j] * sum_ghx));
                    }
                }
                acc(*x, &gx);
                acc(*gamma, &ggamma);
                acc(*beta, &gbeta);
            }
            Op::CrossEntropy { logits, probs, labels } => {
                let b = labels.len();
                let c = probs.len() / b;
                let scale = g[0] / b as f64;
                let mut gl: Vec<f64> = probs.iter().map(|p| p * scale).collect();
                for (i, &l) in labels.iter().enumerate() {
                    gl[i * c + l] -= scale;
                }
                acc(*logits, &gl);
            }
            Op::Gather { a, index } => {
                let mut ga = vec![0.0; self.value(*a).numel()];
                for (&i, gv) in index.iter().zip(g) {
                    ga[i] += gv;
                }
                acc(*a, &ga);
            }
            Op::Concat { parts, axis } => {
                if *axis == 0 {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).numel();
                        acc(p, &g[offset..offset + len]);
                        offset += len;
                    }
                } else {
                    let total = node.value.shape[1];
                    let m = node.value.shape[0];
                    let mut col = 0;
                    for &p in parts {
                        let n = self.value(p).numel() / m;
                        let mut gp = Vec::with_capacity(m * n);
                        for i in 0..m {
                            gp.extend_from_slice(&g[i * total + col..i * total + col + n]);
                        }
                        acc(p, &gp);
                        col += n;
                    }
                }
            }
            Op::MeanRows { a } => {
                let t = self.value(*a);
                let m = t.shape[0];
                let ga: Vec<f64> = (0..m).flat_map(|_| g.iter().map(|v| v / m as f64)).collect();
                acc(*a, &ga);
            }
            Op::Sum { a } => {
                let ga = vec![g[0]; self.value(*a).numel()];
                acc(*a, &ga);
            }
        }
    }
}
