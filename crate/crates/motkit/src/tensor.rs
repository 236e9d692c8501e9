//! Dense-array computation core with reverse-mode automatic differentiation.
//!
//! A `Tape` owns every tensor created during one forward pass and records the
//! op graph as it goes. `backward` on a scalar loss replays adjoints in
//! reverse creation order, accumulating gradients into every `requires_grad`
//! leaf. Tapes are rebuilt per step and confined to one thread; tensors are
//! immutable after creation except for their grad buffer.
//!
//! Everything is 64-bit. Shapes are rank-1 or rank-2; matrices are row-major.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: invalid argument: {msg}")]
    Invalid { op: &'static str, msg: String },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
}

/// Handle to a tensor living on a `Tape`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(TensorId, TensorId),
    Sub(TensorId, TensorId),
    Mul(TensorId, TensorId),
    ScalarMul(TensorId, f64),
    MatMul(TensorId, TensorId),
    Concat { axis: usize, parts: Vec<TensorId> },
    Slice { src: TensorId, axis: usize, start: usize, end: usize },
    Reshape(TensorId),
    Transpose(TensorId),
    Sum(TensorId),
    Mean(TensorId),
    Abs(TensorId),
    Relu(TensorId),
    Sigmoid(TensorId),
    SoftmaxRows(TensorId),
    AddRowBroadcast { a: TensorId, bias: TensorId },
    LayerNormRows { src: TensorId, gain: TensorId, bias: TensorId, eps: f64 },
}

struct Node {
    data: Vec<f64>,
    shape: Vec<usize>,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
    op: Op,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Interpret a rank-1 or rank-2 shape as (rows, cols).
fn as_2d(shape: &[usize]) -> (usize, usize) {
    match shape {
        [n] => (1, *n),
        [r, c] => (*r, *c),
        _ => panic!("rank > 2 tensors are not supported"),
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    /// Register a leaf tensor. Only leaves may require gradients directly.
    pub fn leaf(
        &mut self,
        data: Vec<f64>,
        shape: Vec<usize>,
        requires_grad: bool,
    ) -> Result<TensorId, TensorError> {
        if numel(&shape) != data.len() {
            return Err(TensorError::Invalid {
                op: "leaf",
                msg: format!("shape {:?} does not hold {} values", shape, data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { op: "leaf" });
        }
        Ok(self.push(data, shape, requires_grad, Op::Leaf))
    }

    pub fn scalar(&mut self, v: f64) -> Result<TensorId, TensorError> {
        self.leaf(vec![v], vec![1], false)
    }

    pub fn value(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].data
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn grad(&self, id: TensorId) -> Option<&[f64]> {
        self.nodes[id.0].grad.as_deref()
    }

    pub fn requires_grad(&self, id: TensorId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn push(&mut self, data: Vec<f64>, shape: Vec<usize>, requires_grad: bool, op: Op) -> TensorId {
        self.nodes.push(Node { data, shape, requires_grad, grad: None, op });
        TensorId(self.nodes.len() - 1)
    }

    fn push_checked(
        &mut self,
        op_name: &'static str,
        data: Vec<f64>,
        shape: Vec<usize>,
        requires_grad: bool,
        op: Op,
    ) -> Result<TensorId, TensorError> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { op: op_name });
        }
        Ok(self.push(data, shape, requires_grad, op))
    }

    fn same_shape(
        &self,
        op: &'static str,
        a: TensorId,
        b: TensorId,
    ) -> Result<(), TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(TensorError::ShapeMismatch {
                op,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.same_shape("add", a, b)?;
        let data: Vec<f64> = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        let rg = self.requires_grad(a) || self.requires_grad(b);
        self.push_checked("add", data, self.shape(a).to_vec(), rg, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.same_shape("sub", a, b)?;
        let data: Vec<f64> = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x - y).collect();
        let rg = self.requires_grad(a) || self.requires_grad(b);
        self.push_checked("sub", data, self.shape(a).to_vec(), rg, Op::Sub(a, b))
    }

    pub fn elementwise_mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.same_shape("elementwise_mul", a, b)?;
        let data: Vec<f64> = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        let rg = self.requires_grad(a) || self.requires_grad(b);
        self.push_checked("elementwise_mul", data, self.shape(a).to_vec(), rg, Op::Mul(a, b))
    }

    pub fn scalar_mul(&mut self, a: TensorId, s: f64) -> Result<TensorId, TensorError> {
        let data: Vec<f64> = self.value(a).iter().map(|x| x * s).collect();
        let rg = self.requires_grad(a);
        self.push_checked("scalar_mul", data, self.shape(a).to_vec(), rg, Op::ScalarMul(a, s))
    }

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        let (m, k1) = as_2d(self.shape(a));
        let (k2, n) = as_2d(self.shape(b));
        if k1 != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let data = matmul_raw(self.value(a), self.value(b), m, k1, n);
        let rg = self.requires_grad(a) || self.requires_grad(b);
        self.push_checked("matmul", data, vec![m, n], rg, Op::MatMul(a, b))
    }

    /// Concatenate along `axis` (0 = stack rows, 1 = stack columns).
    pub fn concat(&mut self, axis: usize, parts: &[TensorId]) -> Result<TensorId, TensorError> {
        if parts.is_empty() {
            return Err(TensorError::Invalid { op: "concat", msg: "empty part list".into() });
        }
        if axis > 1 {
            return Err(TensorError::Invalid { op: "concat", msg: format!("axis {axis}") });
        }
        let (r0, c0) = as_2d(self.shape(parts[0]));
        let mut rows = r0;
        let mut cols = c0;
        for &p in &parts[1..] {
            let (r, c) = as_2d(self.shape(p));
            if axis == 0 {
                if c != c0 {
                    return Err(TensorError::ShapeMismatch {
                        op: "concat",
                        lhs: vec![r0, c0],
                        rhs: vec![r, c],
                    });
                }
                rows += r;
            } else {
                if r != r0 {
                    return Err(TensorError::ShapeMismatch {
                        op: "concat",
                        lhs: vec![r0, c0],
                        rhs: vec![r, c],
                    });
                }
                cols += c;
            }
        }
        let mut data = vec![0.0; rows * cols];
        if axis == 0 {
            let mut row = 0;
            for &p in parts {
                let (r, _) = as_2d(self.shape(p));
                data[row * cols..(row + r) * cols].copy_from_slice(self.value(p));
                row += r;
            }
        } else {
            let mut col = 0;
            for &p in parts {
                let (r, c) = as_2d(self.shape(p));
                let src = self.value(p);
                for i in 0..r {
                    for j in 0..c {
                        data[i * cols + col + j] = src[i * c + j];
                    }
                }
                col += c;
            }
        }
        let rg = parts.iter().any(|&p| self.requires_grad(p));
        self.push_checked(
            "concat",
            data,
            vec![rows, cols],
            rg,
            Op::Concat { axis, parts: parts.to_vec() },
        )
    }

    /// Slice `[start, end)` along `axis` of a rank-2 tensor.
    pub fn slice(
        &mut self,
        src: TensorId,
        axis: usize,
        start: usize,
        end: usize,
    ) -> Result<TensorId, TensorError> {
        let (r, c) = as_2d(self.shape(src));
        let limit = if axis == 0 { r } else { c };
        if axis > 1 || start >= end || end > limit {
            return Err(TensorError::Invalid {
                op: "slice",
                msg: format!("range {start}..{end} on axis {axis} of [{r}, {c}]"),
            });
        }
        let data = if axis == 0 {
            self.value(src)[start * c..end * c].to_vec()
        } else {
            let src_data = self.value(src);
            let mut out = Vec::with_capacity(r * (end - start));
            for i in 0..r {
                out.extend_from_slice(&src_data[i * c + start..i * c + end]);
            }
            out
        };
        let shape = if axis == 0 { vec![end - start, c] } else { vec![r, end - start] };
        let rg = self.requires_grad(src);
        self.push_checked("slice", data, shape, rg, Op::Slice { src, axis, start, end })
    }

    pub fn reshape(&mut self, src: TensorId, shape: Vec<usize>) -> Result<TensorId, TensorError> {
        if numel(&shape) != numel(self.shape(src)) {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                lhs: self.shape(src).to_vec(),
                rhs: shape,
            });
        }
        let data = self.value(src).to_vec();
        let rg = self.requires_grad(src);
        self.push_checked("reshape", data, shape, rg, Op::Reshape(src))
    }

    pub fn transpose(&mut self, src: TensorId) -> Result<TensorId, TensorError> {
        let (r, c) = as_2d(self.shape(src));
        let s = self.value(src);
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = s[i * c + j];
            }
        }
        let rg = self.requires_grad(src);
        self.push_checked("transpose", data, vec![c, r], rg, Op::Transpose(src))
    }

    pub fn sum(&mut self, src: TensorId) -> Result<TensorId, TensorError> {
        let total: f64 = self.value(src).iter().sum();
        let rg = self.requires_grad(src);
        self.push_checked("sum", vec![total], vec![1], rg, Op::Sum(src))
    }

    pub fn mean(&mut self, src: TensorId) -> Result<TensorId, TensorError> {
        let n = self.value(src).len();
        if n == 0 {
            return Err(TensorError::Invalid { op: "mean", msg: "empty tensor".into() });
        }
        let total: f64 = self.value(src).iter().sum();
        let rg = self.requires_grad(src);
        self.push_checked("mean", vec![total / n as f64], vec![1], rg, Op::Mean(src))
    }

    pub fn abs(&mut self, src: TensorId) -> Result<TensorId, TensorError> {
        let data: Vec<f64> = self.value(src).iter().map(|v| v.abs()).collect();
        let rg = self.requires_grad(src);
        self.push_checked("abs", data, self.shape(src).to_vec(), rg, Op::Abs(src))
    }

    pub fn relu(&mut self, src: TensorId) -> Result<TensorId, TensorError> {
        let data: Vec<f64> = self.value(src).iter().map(|v| v.max(0.0)).collect();
        let rg = self.requires_grad(src);
        self.push_checked("relu", data, self.shape(src).to_vec(), rg, Op::Relu(src))
    }

    pub fn sigmoid(&mut self, src: TensorId) -> Result<TensorId, TensorError> {
        let data: Vec<f64> = self.value(src).iter().map(|v| sigmoid_scalar(*v)).collect();
        let rg = self.requires_grad(src);
        self.push_checked("sigmoid", data, self.shape(src).to_vec(), rg, Op::Sigmoid(src))
    }

    /// Softmax along `axis` of a rank-2 tensor (1 = within each row).
    pub fn softmax(&mut self, src: TensorId, axis: usize) -> Result<TensorId, TensorError> {
        match axis {
            1 => self.softmax_rows(src),
            0 => {
                let t = self.transpose(src)?;
                let s = self.softmax_rows(t)?;
                self.transpose(s)
            }
            _ => Err(TensorError::Invalid { op: "softmax", msg: format!("axis {axis}") }),
        }
    }

    fn softmax_rows(&mut self, src: TensorId) -> Result<TensorId, TensorError> {
        let (r, c) = as_2d(self.shape(src));
        let s = self.value(src);
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            let row = &s[i * c..(i + 1) * c];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for j in 0..c {
                let e = (row[j] - max).exp();
                data[i * c + j] = e;
                denom += e;
            }
            for j in 0..c {
                data[i * c + j] /= denom;
            }
        }
        let rg = self.requires_grad(src);
        self.push_checked("softmax", data, self.shape(src).to_vec(), rg, Op::SoftmaxRows(src))
    }

    /// Add a row vector (shape `[c]` or `[1, c]`) to every row of `a`.
    pub fn add_row_broadcast(&mut self, a: TensorId, bias: TensorId) -> Result<TensorId, TensorError> {
        let (r, c) = as_2d(self.shape(a));
        let (br, bc) = as_2d(self.shape(bias));
        if br != 1 || bc != c {
            return Err(TensorError::ShapeMismatch {
                op: "add_row_broadcast",
                lhs: vec![r, c],
                rhs: self.shape(bias).to_vec(),
            });
        }
        let mut data = self.value(a).to_vec();
        let b = self.value(bias).to_vec();
        for i in 0..r {
            for j in 0..c {
                data[i * c + j] += b[j];
            }
        }
        let rg = self.requires_grad(a) || self.requires_grad(bias);
        self.push_checked(
            "add_row_broadcast",
            data,
            vec![r, c],
            rg,
            Op::AddRowBroadcast { a, bias },
        )
    }

    /// Per-row layer normalization with learnable gain/bias row vectors.
    pub fn layer_norm(
        &mut self,
        src: TensorId,
        gain: TensorId,
        bias: TensorId,
        eps: f64,
    ) -> Result<TensorId, TensorError> {
        if eps <= 0.0 {
            return Err(TensorError::Invalid { op: "layer_norm", msg: format!("eps {eps}") });
        }
        let (r, c) = as_2d(self.shape(src));
        for t in [gain, bias] {
            let (gr, gc) = as_2d(self.shape(t));
            if gr != 1 || gc != c {
                return Err(TensorError::ShapeMismatch {
                    op: "layer_norm",
                    lhs: vec![r, c],
                    rhs: self.shape(t).to_vec(),
                });
            }
        }
        let s = self.value(src);
        let g = self.value(gain).to_vec();
        let b = self.value(bias).to_vec();
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            let row = &s[i * c..(i + 1) * c];
            let mu = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / c as f64;
            let inv_std = 1.0 / (var + eps).sqrt();
            for j in 0..c {
                data[i * c + j] = (row[j] - mu) * inv_std * g[j] + b[j];
            }
        }
        let rg = self.requires_grad(src) || self.requires_grad(gain) || self.requires_grad(bias);
        self.push_checked(
            "layer_norm",
            data,
            vec![r, c],
            rg,
            Op::LayerNormRows { src, gain, bias, eps },
        )
    }

    /// Reverse-mode sweep from a scalar loss. Populates `grad` on every
    /// reachable `requires_grad` tensor.
    pub fn backward(&mut self, loss: TensorId) -> Result<(), TensorError> {
        if numel(self.shape(loss)) != 1 {
            return Err(TensorError::NonScalarLoss { shape: self.shape(loss).to_vec() });
        }
        // which nodes need a grad buffer: the loss and everything feeding a
        // requires_grad path
        let n = self.nodes.len();
        let mut needs = vec![false; n];
        for i in 0..n {
            needs[i] = self.nodes[i].requires_grad;
        }
        for i in 0..n {
            if needs[i] {
                self.nodes[i].grad = Some(vec![0.0; self.nodes[i].data.len()]);
            }
        }
        if let Some(g) = self.nodes[loss.0].grad.as_mut() {
            g[0] = 1.0;
        } else {
            // loss itself does not require grad (pure-constant graph): nothing to do
            return Ok(());
        }

        for idx in (0..=loss.0).rev() {
            if !needs[idx] {
                continue;
            }
            let g = match self.nodes[idx].grad.as_ref() {
                Some(g) => g.clone(),
                None => continue,
            };
            if g.iter().all(|v| *v == 0.0) {
                continue;
            }
            let op = self.nodes[idx].op.clone();
            match op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    self.accum(a, &g);
                    self.accum(b, &g);
                }
                Op::Sub(a, b) => {
                    self.accum(a, &g);
                    let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                    self.accum(b, &neg);
                }
                Op::Mul(a, b) => {
                    let da: Vec<f64> =
                        g.iter().zip(self.value(b)).map(|(gv, bv)| gv * bv).collect();
                    let db: Vec<f64> =
                        g.iter().zip(self.value(a)).map(|(gv, av)| gv * av).collect();
                    self.accum(a, &da);
                    self.accum(b, &db);
                }
                Op::ScalarMul(a, s) => {
                    let da: Vec<f64> = g.iter().map(|v| v * s).collect();
                    self.accum(a, &da);
                }
                Op::MatMul(a, b) => {
                    let (m, k) = as_2d(self.shape(a));
                    let (_, nn) = as_2d(self.shape(b));
                    // dA = g * B^T ; dB = A^T * g
                    let bt = transpose_raw(self.value(b), k, nn);
                    let da = matmul_raw(&g, &bt, m, nn, k);
                    let at = transpose_raw(self.value(a), m, k);
                    let db = matmul_raw(&at, &g, k, m, nn);
                    self.accum(a, &da);
                    self.accum(b, &db);
                }
                Op::Concat { axis, parts } => {
                    let (_, cols) = as_2d(self.shape(TensorId(idx)));
                    let mut offset = 0;
                    for p in parts {
                        let (r, c) = as_2d(self.shape(p));
                        let mut part_g = vec![0.0; r * c];
                        if axis == 0 {
                            part_g.copy_from_slice(&g[offset * cols..(offset + r) * cols]);
                            offset += r;
                        } else {
                            for i in 0..r {
                                for j in 0..c {
                                    part_g[i * c + j] = g[i * cols + offset + j];
                                }
                            }
                            offset += c;
                        }
                        self.accum(p, &part_g);
                    }
                }
                Op::Slice { src, axis, start, end } => {
                    let (r, c) = as_2d(self.shape(src));
                    let mut full = vec![0.0; r * c];
                    if axis == 0 {
                        full[start * c..end * c].copy_from_slice(&g);
                    } else {
                        let w = end - start;
                        for i in 0..r {
                            for j in 0..w {
                                full[i * c + start + j] = g[i * w + j];
                            }
                        }
                    }
                    self.accum(src, &full);
                }
                Op::Reshape(a) => self.accum(a, &g),
                Op::Transpose(a) => {
                    let (r, c) = as_2d(self.shape(TensorId(idx)));
                    let gt = transpose_raw(&g, r, c);
                    self.accum(a, &gt);
                }
                Op::Sum(a) => {
                    let da = vec![g[0]; self.value(a).len()];
                    self.accum(a, &da);
                }
                Op::Mean(a) => {
                    let n = self.value(a).len() as f64;
                    let da = vec![g[0] / n; self.value(a).len()];
                    self.accum(a, &da);
                }
                Op::Abs(a) => {
                    // subgradient at exactly 0 is 0
                    let da: Vec<f64> = g
                        .iter()
                        .zip(self.value(a))
                        .map(|(gv, av)| {
                            if *av > 0.0 {
                                *gv
                            } else if *av < 0.0 {
                                -*gv
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    self.accum(a, &da);
                }
                Op::Relu(a) => {
                    let da: Vec<f64> = g
                        .iter()
                        .zip(self.value(a))
                        .map(|(gv, av)| if *av > 0.0 { *gv } else { 0.0 })
                        .collect();
                    self.accum(a, &da);
                }
                Op::Sigmoid(a) => {
                    let y = self.value(TensorId(idx)).to_vec();
                    let da: Vec<f64> =
                        g.iter().zip(y).map(|(gv, yv)| gv * yv * (1.0 - yv)).collect();
                    self.accum(a, &da);
                }
                Op::SoftmaxRows(a) => {
                    let (r, c) = as_2d(self.shape(TensorId(idx)));
                    let y = self.value(TensorId(idx)).to_vec();
                    let mut da = vec![0.0; r * c];
                    for i in 0..r {
                        let yr = &y[i * c..(i + 1) * c];
                        let gr = &g[i * c..(i + 1) * c];
                        let dot: f64 = yr.iter().zip(gr).map(|(yv, gv)| yv * gv).sum();
                        for j in 0..c {
                            da[i * c + j] = yr[j] * (gr[j] - dot);
                        }
                    }
                    self.accum(a, &da);
                }
                Op::AddRowBroadcast { a, bias } => {
                    self.accum(a, &g);
                    let (r, c) = as_2d(self.shape(TensorId(idx)));
                    let mut db = vec![0.0; c];
                    for i in 0..r {
                        for j in 0..c {
                            db[j] += g[i * c + j];
                        }
                    }
                    self.accum(bias, &db);
                }
                Op::LayerNormRows { src, gain, bias, eps } => {
                    let (r, c) = as_2d(self.shape(src));
                    let x = self.value(src).to_vec();
                    let gn = self.value(gain).to_vec();
                    let mut dx = vec![0.0; r * c];
                    let mut dgain = vec![0.0; c];
                    let mut dbias = vec![0.0; c];
                    for i in 0..r {
                        let row = &x[i * c..(i + 1) * c];
                        let gr = &g[i * c..(i + 1) * c];
                        let mu = row.iter().sum::<f64>() / c as f64;
                        let var =
                            row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / c as f64;
                        let inv_std = 1.0 / (var + eps).sqrt();
                        // normalized pre-gain values
                        let xh: Vec<f64> = row.iter().map(|v| (v - mu) * inv_std).collect();
                        let gh: Vec<f64> = gr.iter().zip(&gn).map(|(gv, gg)| gv * gg).collect();
                        let mean_gh = gh.iter().sum::<f64>() / c as f64;
                        let mean_gh_xh =
                            gh.iter().zip(&xh).map(|(a, b)| a * b).sum::<f64>() / c as f64;
                        for j in 0..c {
                            dx[i * c + j] = (gh[j] - mean_gh - xh[j] * mean_gh_xh) * inv_std;
                            dgain[j] += gr[j] * xh[j];
                            dbias[j] += gr[j];
                        }
                    }
                    self.accum(src, &dx);
                    self.accum(gain, &dgain);
                    self.accum(bias, &dbias);
                }
            }
        }
        Ok(())
    }

    fn accum(&mut self, id: TensorId, delta: &[f64]) {
        let node = &mut self.nodes[id.0];
        let grad = node.grad.get_or_insert_with(|| vec![0.0; node.data.len()]);
        for (g, d) in grad.iter_mut().zip(delta) {
            *g += d;
        }
    }
}

fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let crow = &mut c[i * n..(i + 1) * n];
            for j in 0..n {
                crow[j] += av * brow[j];
            }
        }
    }
    c
}

fn transpose_raw(a: &[f64], r: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a[i * c + j];
        }
    }
    out
}
