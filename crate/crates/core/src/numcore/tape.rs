//! Reverse-mode differentiation over a linear operation tape.
//!
//! The forward pass records every primitive into a `Tape`; `backward`
//! replays the records in reverse, accumulating vector-Jacobian products.
//! All values are dense f64 matrices, evaluated in a fixed order, so a
//! replay from the same inputs is bit-identical.

use crate::error::{Error, Result};
use crate::numcore::matrix::{matmul, Matrix};
use crate::numcore::params::ParamStore;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LeafKind {
    /// Bound to a named parameter in a `ParamStore`; gradients exported.
    Param(usize),
    /// Free input; gradients tracked but not exported.
    Input,
    /// Detached value; gradients are never accumulated into it.
    Constant,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf(LeafKind),
    MatMul { a: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    MulElem { a: NodeId, b: NodeId },
    Scale { x: NodeId, c: f64 },
    AddConst { x: NodeId, c: f64 },
    Tanh { x: NodeId },
    Relu { x: NodeId },
    Conv1d { x: NodeId, w: NodeId, bias: NodeId, c_in: usize, c_out: usize, k: usize },
    Transpose { x: NodeId },
    Reshape { x: NodeId },
    SegmentPool { x: NodeId, segments: usize },
    SegmentUnpool { x: NodeId, frames: usize },
    EmbedRows { table: NodeId, ids: Vec<usize> },
    SoftmaxRows { x: NodeId },
    CrossEntropyMasked { logits: NodeId, targets: Vec<usize>, mask: Vec<bool> },
    SqDist { a: NodeId, b: NodeId },
    SumAll { x: NodeId },
    MeanRows { x: NodeId },
    Cosine { a: NodeId, b: NodeId },
    StackScalars { xs: Vec<NodeId> },
    StackRows { xs: Vec<NodeId> },
    ConcatCols { a: NodeId, b: NodeId },
    LogSumExp { x: NodeId },
}

struct Node {
    op: Op,
    value: Matrix,
}

/// Even segment boundaries: segment `b` of `t` frames split `s` ways
/// covers rows `floor(b*t/s) .. floor((b+1)*t/s)`.
pub fn segment_bounds(frames: usize, segments: usize, b: usize) -> (usize, usize) {
    (b * frames / segments, (b + 1) * frames / segments)
}

/// Numerically stable softmax over a slice (max subtraction).
pub fn softmax_slice(v: &[f64]) -> Vec<f64> {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Matrix>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, op: Op, value: Matrix) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node { op, value });
        self.grads.push(None);
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id].value
    }

    /// Scalar value of a 1×1 node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id].value.scalar_value()
    }

    // ── leaves ───────────────────────────────────────────────────────

    /// Bind a named parameter: copies its current value onto the tape.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> NodeId {
        let idx = store.index_of(name).unwrap_or_else(|| panic!("unknown parameter {name}"));
        let value = store.value_at(idx).clone();
        self.push(Op::Leaf(LeafKind::Param(idx)), value)
    }

    /// Free input; receives gradients but they are not exported.
    pub fn input(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Leaf(LeafKind::Input), value)
    }

    /// Detached constant: gradient accumulation into it is skipped, so
    /// `grad()` reports exact zeros for it after any backward pass.
    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Leaf(LeafKind::Constant), value)
    }

    // ── primitive ops ────────────────────────────────────────────────

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = matmul(&self.nodes[a].value, &self.nodes[b].value);
        self.push(Op::MatMul { a, b }, v)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        assert_eq!(va.shape(), vb.shape(), "add shapes");
        let data = va.data.iter().zip(&vb.data).map(|(x, y)| x + y).collect();
        let v = Matrix::from_vec(va.rows, va.cols, data);
        self.push(Op::Add { a, b }, v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        assert_eq!(va.shape(), vb.shape(), "sub shapes");
        let data = va.data.iter().zip(&vb.data).map(|(x, y)| x - y).collect();
        let v = Matrix::from_vec(va.rows, va.cols, data);
        self.push(Op::Sub { a, b }, v)
    }

    pub fn mul_elem(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        assert_eq!(va.shape(), vb.shape(), "mul shapes");
        let data = va.data.iter().zip(&vb.data).map(|(x, y)| x * y).collect();
        let v = Matrix::from_vec(va.rows, va.cols, data);
        self.push(Op::MulElem { a, b }, v)
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let vx = &self.nodes[x].value;
        let data = vx.data.iter().map(|v| v * c).collect();
        let v = Matrix::from_vec(vx.rows, vx.cols, data);
        self.push(Op::Scale { x, c }, v)
    }

    pub fn add_const(&mut self, x: NodeId, c: f64) -> NodeId {
        let vx = &self.nodes[x].value;
        let data = vx.data.iter().map(|v| v + c).collect();
        let v = Matrix::from_vec(vx.rows, vx.cols, data);
        self.push(Op::AddConst { x, c }, v)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let vx = &self.nodes[x].value;
        let data = vx.data.iter().map(|v| v.tanh()).collect();
        let v = Matrix::from_vec(vx.rows, vx.cols, data);
        self.push(Op::Tanh { x }, v)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let vx = &self.nodes[x].value;
        let data = vx.data.iter().map(|v| v.max(0.0)).collect();
        let v = Matrix::from_vec(vx.rows, vx.cols, data);
        self.push(Op::Relu { x }, v)
    }

    /// 1-D convolution along the column axis with stride 1 and zero "same"
    /// padding. `x` is channels×frames, `w` is c_out×(c_in*k), `bias` is
    /// 1×c_out; output is c_out×frames.
    pub fn conv1d(&mut self, x: NodeId, w: NodeId, bias: NodeId, k: usize) -> NodeId {
        let vx = &self.nodes[x].value;
        let vw = &self.nodes[w].value;
        let vb = &self.nodes[bias].value;
        let c_in = vx.rows;
        let frames = vx.cols;
        let c_out = vw.rows;
        assert_eq!(vw.cols, c_in * k, "conv1d weight shape");
        assert_eq!(vb.cols, c_out, "conv1d bias shape");
        assert!(k % 2 == 1, "conv1d kernel must be odd");
        let pad = k / 2;
        let mut out = Matrix::zeros(c_out, frames);
        for o in 0..c_out {
            let wrow = vw.row(o);
            for t in 0..frames {
                let mut acc = vb.data[o];
                for ci in 0..c_in {
                    let xrow = vx.row(ci);
                    for j in 0..k {
                        let src = t + j;
                        if src < pad || src - pad >= frames {
                            continue;
                        }
                        acc += wrow[ci * k + j] * xrow[src - pad];
                    }
                }
                out.data[o * frames + t] = acc;
            }
        }
        self.push(Op::Conv1d { x, w, bias, c_in, c_out, k }, out)
    }

    pub fn transpose(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x].value.transpose();
        self.push(Op::Transpose { x }, v)
    }

    pub fn reshape(&mut self, x: NodeId, rows: usize, cols: usize) -> NodeId {
        let vx = &self.nodes[x].value;
        assert_eq!(vx.numel(), rows * cols, "reshape numel");
        let v = Matrix::from_vec(rows, cols, vx.data.clone());
        self.push(Op::Reshape { x }, v)
    }

    /// Mean-pool rows into `segments` even segments: frames×d → segments×d.
    pub fn segment_pool(&mut self, x: NodeId, segments: usize) -> NodeId {
        let vx = &self.nodes[x].value;
        let (frames, d) = vx.shape();
        assert!(frames >= segments, "segment_pool needs frames >= segments");
        let mut out = Matrix::zeros(segments, d);
        for b in 0..segments {
            let (lo, hi) = segment_bounds(frames, segments, b);
            let len = (hi - lo) as f64;
            for r in lo..hi {
                for c in 0..d {
                    out.data[b * d + c] += vx.data[r * d + c];
                }
            }
            for c in 0..d {
                out.data[b * d + c] /= len;
            }
        }
        self.push(Op::SegmentPool { x, segments }, out)
    }

    /// Inverse layout of `segment_pool`: repeat each segment row over its
    /// frames. segments×d → frames×d.
    pub fn segment_unpool(&mut self, x: NodeId, frames: usize) -> NodeId {
        let vx = &self.nodes[x].value;
        let (segments, d) = vx.shape();
        assert!(frames >= segments, "segment_unpool needs frames >= segments");
        let mut out = Matrix::zeros(frames, d);
        for b in 0..segments {
            let (lo, hi) = segment_bounds(frames, segments, b);
            for r in lo..hi {
                out.data[r * d..(r + 1) * d].copy_from_slice(vx.row(b));
            }
        }
        self.push(Op::SegmentUnpool { x, frames }, out)
    }

    /// Gather rows of an embedding table: ids.len()×d.
    pub fn embed_rows(&mut self, table: NodeId, ids: Vec<usize>) -> NodeId {
        let vt = &self.nodes[table].value;
        let d = vt.cols;
        let mut out = Matrix::zeros(ids.len(), d);
        for (r, &id) in ids.iter().enumerate() {
            assert!(id < vt.rows, "embedding id out of range");
            out.data[r * d..(r + 1) * d].copy_from_slice(vt.row(id));
        }
        self.push(Op::EmbedRows { table, ids }, out)
    }

    /// Row-wise stable softmax.
    pub fn softmax_rows(&mut self, x: NodeId) -> NodeId {
        let vx = &self.nodes[x].value;
        let mut out = Matrix::zeros(vx.rows, vx.cols);
        for r in 0..vx.rows {
            let sm = softmax_slice(vx.row(r));
            out.data[r * vx.cols..(r + 1) * vx.cols].copy_from_slice(&sm);
        }
        self.push(Op::SoftmaxRows { x }, out)
    }

    /// Mean token-level cross-entropy with masked positions excluded.
    /// `logits` is positions×vocab; `targets[r]` is the class index for
    /// row r; rows with `mask[r] == false` do not contribute.
    pub fn cross_entropy_masked(
        &mut self,
        logits: NodeId,
        targets: Vec<usize>,
        mask: Vec<bool>,
    ) -> NodeId {
        let vl = &self.nodes[logits].value;
        assert_eq!(targets.len(), vl.rows, "cross_entropy target count");
        assert_eq!(mask.len(), vl.rows, "cross_entropy mask count");
        let n_valid = mask.iter().filter(|m| **m).count().max(1) as f64;
        let mut total = 0.0;
        for r in 0..vl.rows {
            if !mask[r] {
                continue;
            }
            let row = vl.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[targets[r]];
        }
        let v = Matrix::scalar(total / n_valid);
        self.push(Op::CrossEntropyMasked { logits, targets, mask }, v)
    }

    /// Squared Euclidean (Frobenius) distance between same-shaped values.
    pub fn sq_dist(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        assert_eq!(va.shape(), vb.shape(), "sq_dist shapes");
        let s: f64 = va.data.iter().zip(&vb.data).map(|(x, y)| (x - y) * (x - y)).sum();
        self.push(Op::SqDist { a, b }, Matrix::scalar(s))
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let s: f64 = self.nodes[x].value.data.iter().sum();
        self.push(Op::SumAll { x }, Matrix::scalar(s))
    }

    /// Column means over rows: R×C → 1×C.
    pub fn mean_rows(&mut self, x: NodeId) -> NodeId {
        let vx = &self.nodes[x].value;
        let mut out = Matrix::zeros(1, vx.cols);
        for r in 0..vx.rows {
            for c in 0..vx.cols {
                out.data[c] += vx.data[r * vx.cols + c];
            }
        }
        let inv = 1.0 / vx.rows as f64;
        for c in 0..vx.cols {
            out.data[c] *= inv;
        }
        self.push(Op::MeanRows { x }, out)
    }

    /// Cosine similarity between two values treated as flat vectors,
    /// clamped to [-1, 1]. Errors on a zero-norm operand.
    pub fn cosine(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        if va.numel() != vb.numel() {
            return Err(Error::Shape(format!(
                "cosine operands differ: {} vs {} elements",
                va.numel(),
                vb.numel()
            )));
        }
        let na = va.frobenius_sq().sqrt();
        let nb = vb.frobenius_sq().sqrt();
        if na == 0.0 {
            return Err(Error::ZeroNorm { index: None });
        }
        if nb == 0.0 {
            return Err(Error::ZeroNorm { index: None });
        }
        let dot: f64 = va.data.iter().zip(&vb.data).map(|(x, y)| x * y).sum();
        let cos = (dot / (na * nb)).clamp(-1.0, 1.0);
        Ok(self.push(Op::Cosine { a, b }, Matrix::scalar(cos)))
    }

    /// Stack scalar nodes into a 1×k row vector.
    pub fn stack_scalars(&mut self, xs: Vec<NodeId>) -> NodeId {
        assert!(!xs.is_empty(), "stack_scalars needs at least one node");
        let data: Vec<f64> = xs.iter().map(|&id| self.nodes[id].value.scalar_value()).collect();
        let v = Matrix::row_vector(data);
        self.push(Op::StackScalars { xs }, v)
    }

    /// Stack 1×C row nodes into an L×C matrix.
    pub fn stack_rows(&mut self, xs: Vec<NodeId>) -> NodeId {
        assert!(!xs.is_empty(), "stack_rows needs at least one node");
        let cols = self.nodes[xs[0]].value.cols;
        let mut data = Vec::with_capacity(xs.len() * cols);
        for &id in &xs {
            let v = &self.nodes[id].value;
            assert_eq!(v.rows, 1, "stack_rows operands must be row vectors");
            assert_eq!(v.cols, cols, "stack_rows widths");
            data.extend_from_slice(&v.data);
        }
        let v = Matrix::from_vec(xs.len(), cols, data);
        self.push(Op::StackRows { xs }, v)
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        assert_eq!(va.rows, 1, "concat_cols expects row vectors");
        assert_eq!(vb.rows, 1, "concat_cols expects row vectors");
        let mut data = va.data.clone();
        data.extend_from_slice(&vb.data);
        let v = Matrix::row_vector(data);
        self.push(Op::ConcatCols { a, b }, v)
    }

    /// Stable log-sum-exp of a flat vector → scalar.
    pub fn log_sum_exp(&mut self, x: NodeId) -> NodeId {
        let vx = &self.nodes[x].value;
        let max = vx.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = vx.data.iter().map(|v| (v - max).exp()).sum();
        self.push(Op::LogSumExp { x }, Matrix::scalar(max + s.ln()))
    }

    // ── backward ─────────────────────────────────────────────────────

    fn accumulate(&mut self, id: NodeId, delta: &Matrix) {
        if let Op::Leaf(LeafKind::Constant) = self.nodes[id].op {
            return; // detached
        }
        let shape = self.nodes[id].value.shape();
        debug_assert_eq!(shape, delta.shape(), "gradient shape");
        match &mut self.grads[id] {
            Some(g) => {
                for (gv, dv) in g.data.iter_mut().zip(&delta.data) {
                    *gv += dv;
                }
            }
            None => self.grads[id] = Some(delta.clone()),
        }
    }

    /// Gradient of the last backward pass w.r.t. node `id`; exact zeros if
    /// no gradient reached it (including detached constants).
    pub fn grad(&self, id: NodeId) -> Matrix {
        match &self.grads[id] {
            Some(g) => g.clone(),
            None => {
                let v = &self.nodes[id].value;
                Matrix::zeros(v.rows, v.cols)
            }
        }
    }

    /// Add the gradients of all parameter-bound leaves into the store's
    /// accumulators (supports gradient accumulation across tapes).
    pub fn export_grads(&self, store: &mut ParamStore) {
        for (id, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf(LeafKind::Param(idx)) = node.op {
                if let Some(g) = &self.grads[id] {
                    store.add_grad(idx, g);
                }
            }
        }
    }

    /// Reverse sweep from a scalar root. Errors if the root is not 1×1.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        if !self.nodes[root].value.is_scalar() {
            return Err(Error::InvalidInput(format!(
                "backward root must be scalar, got {}x{}",
                self.nodes[root].value.rows, self.nodes[root].value.cols
            )));
        }
        for g in self.grads.iter_mut() {
            *g = None;
        }
        self.grads[root] = Some(Matrix::scalar(1.0));

        for id in (0..self.nodes.len()).rev() {
            let g = match &self.grads[id] {
                Some(g) => g.clone(),
                None => continue,
            };
            let op = self.nodes[id].op.clone();
            match op {
                Op::Leaf(_) => {}
                Op::MatMul { a, b } => {
                    let va = self.nodes[a].value.clone();
                    let vb = self.nodes[b].value.clone();
                    let da = matmul(&g, &vb.transpose());
                    let db = matmul(&va.transpose(), &g);
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
                Op::Add { a, b } => {
                    self.accumulate(a, &g);
                    self.accumulate(b, &g);
                }
                Op::Sub { a, b } => {
                    self.accumulate(a, &g);
                    let neg = Matrix::from_vec(g.rows, g.cols, g.data.iter().map(|v| -v).collect());
                    self.accumulate(b, &neg);
                }
                Op::MulElem { a, b } => {
                    let va = self.nodes[a].value.clone();
                    let vb = self.nodes[b].value.clone();
                    let da = Matrix::from_vec(
                        g.rows,
                        g.cols,
                        g.data.iter().zip(&vb.data).map(|(gv, bv)| gv * bv).collect(),
                    );
                    let db = Matrix::from_vec(
                        g.rows,
                        g.cols,
                        g.data.iter().zip(&va.data).map(|(gv, av)| gv * av).collect(),
                    );
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
                Op::Scale { x, c } => {
                    let dx = Matrix::from_vec(g.rows, g.cols, g.data.iter().map(|v| v * c).collect());
                    self.accumulate(x, &dx);
                }
                Op::AddConst { x, .. } => {
                    self.accumulate(x, &g);
                }
                Op::Tanh { x } => {
                    let y = &self.nodes[id].value;
                    let dx = Matrix::from_vec(
                        g.rows,
                        g.cols,
                        g.data.iter().zip(&y.data).map(|(gv, yv)| gv * (1.0 - yv * yv)).collect(),
                    );
                    self.accumulate(x, &dx);
                }
                Op::Relu { x } => {
                    let vx = &self.nodes[x].value;
                    let dx = Matrix::from_vec(
                        g.rows,
                        g.cols,
                        g.data
                            .iter()
                            .zip(&vx.data)
                            .map(|(gv, xv)| if *xv > 0.0 { *gv } else { 0.0 })
                            .collect(),
                    );
                    self.accumulate(x, &dx);
                }
                Op::Conv1d { x, w, bias, c_in, c_out, k } => {
                    let vx = self.nodes[x].value.clone();
                    let vw = self.nodes[w].value.clone();
                    let frames = vx.cols;
                    let pad = k / 2;
                    let mut dx = Matrix::zeros(c_in, frames);
                    let mut dw = Matrix::zeros(c_out, c_in * k);
                    let mut db = Matrix::zeros(1, c_out);
                    for o in 0..c_out {
                        let grow = &g.data[o * frames..(o + 1) * frames];
                        let wrow = vw.row(o);
                        db.data[o] = grow.iter().sum();
                        for ci in 0..c_in {
                            let xrow = vx.row(ci);
                            for j in 0..k {
                                let widx = ci * k + j;
                                let wv = wrow[widx];
                                let mut wg = 0.0;
                                for t in 0..frames {
                                    let src = t + j;
                                    if src < pad || src - pad >= frames {
                                        continue;
                                    }
                                    let xi = src - pad;
                                    wg += grow[t] * xrow[xi];
                                    dx.data[ci * frames + xi] += grow[t] * wv;
                                }
                                dw.data[o * (c_in * k) + widx] += wg;
                            }
                        }
                    }
                    self.accumulate(x, &dx);
                    self.accumulate(w, &dw);
                    self.accumulate(bias, &db);
                }
                Op::Transpose { x } => {
                    self.accumulate(x, &g.transpose());
                }
                Op::Reshape { x } => {
                    let vx = &self.nodes[x].value;
                    let dx = Matrix::from_vec(vx.rows, vx.cols, g.data.clone());
                    self.accumulate(x, &dx);
                }
                Op::SegmentPool { x, segments } => {
                    let vx = &self.nodes[x].value;
                    let (frames, d) = vx.shape();
                    let mut dx = Matrix::zeros(frames, d);
                    for b in 0..segments {
                        let (lo, hi) = segment_bounds(frames, segments, b);
                        let inv = 1.0 / (hi - lo) as f64;
                        for r in lo..hi {
                            for c in 0..d {
                                dx.data[r * d + c] += g.data[b * d + c] * inv;
                            }
                        }
                    }
                    self.accumulate(x, &dx);
                }
                Op::SegmentUnpool { x, frames } => {
                    let vx = &self.nodes[x].value;
                    let (segments, d) = vx.shape();
                    let mut dx = Matrix::zeros(segments, d);
                    for b in 0..segments {
                        let (lo, hi) = segment_bounds(frames, segments, b);
                        for r in lo..hi {
                            for c in 0..d {
                                dx.data[b * d + c] += g.data[r * d + c];
                            }
                        }
                    }
                    self.accumulate(x, &dx);
                }
                Op::EmbedRows { table, ids } => {
                    let vt = &self.nodes[table].value;
                    let d = vt.cols;
                    let mut dt = Matrix::zeros(vt.rows, d);
                    for (r, &tok) in ids.iter().enumerate() {
                        for c in 0..d {
                            dt.data[tok * d + c] += g.data[r * d + c];
                        }
                    }
                    self.accumulate(table, &dt);
                }
                Op::SoftmaxRows { x } => {
                    let y = &self.nodes[id].value;
                    let mut dx = Matrix::zeros(y.rows, y.cols);
                    for r in 0..y.rows {
                        let yr = y.row(r);
                        let gr = &g.data[r * y.cols..(r + 1) * y.cols];
                        let dot: f64 = yr.iter().zip(gr).map(|(yv, gv)| yv * gv).sum();
                        for c in 0..y.cols {
                            dx.data[r * y.cols + c] = yr[c] * (gr[c] - dot);
                        }
                    }
                    self.accumulate(x, &dx);
                }
                Op::CrossEntropyMasked { logits, targets, mask } => {
                    let vl = self.nodes[logits].value.clone();
                    let n_valid = mask.iter().filter(|m| **m).count().max(1) as f64;
                    let gscale = g.scalar_value() / n_valid;
                    let mut dl = Matrix::zeros(vl.rows, vl.cols);
                    for r in 0..vl.rows {
                        if !mask[r] {
                            continue;
                        }
                        let sm = softmax_slice(vl.row(r));
                        for c in 0..vl.cols {
                            let onehot = if c == targets[r] { 1.0 } else { 0.0 };
                            dl.data[r * vl.cols + c] = (sm[c] - onehot) * gscale;
                        }
                    }
                    self.accumulate(logits, &dl);
                }
                Op::SqDist { a, b } => {
                    let va = self.nodes[a].value.clone();
                    let vb = self.nodes[b].value.clone();
                    let gv = g.scalar_value();
                    let da = Matrix::from_vec(
                        va.rows,
                        va.cols,
                        va.data.iter().zip(&vb.data).map(|(x, y)| 2.0 * (x - y) * gv).collect(),
                    );
                    let db = Matrix::from_vec(
                        va.rows,
                        va.cols,
                        va.data.iter().zip(&vb.data).map(|(x, y)| -2.0 * (x - y) * gv).collect(),
                    );
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
                Op::SumAll { x } => {
                    let vx = &self.nodes[x].value;
                    let gv = g.scalar_value();
                    let dx = Matrix::from_vec(vx.rows, vx.cols, vec![gv; vx.numel()]);
                    self.accumulate(x, &dx);
                }
                Op::MeanRows { x } => {
                    let vx = &self.nodes[x].value;
                    let inv = 1.0 / vx.rows as f64;
                    let mut dx = Matrix::zeros(vx.rows, vx.cols);
                    for r in 0..vx.rows {
                        for c in 0..vx.cols {
                            dx.data[r * vx.cols + c] = g.data[c] * inv;
                        }
                    }
                    self.accumulate(x, &dx);
                }
                Op::Cosine { a, b } => {
                    let va = self.nodes[a].value.clone();
                    let vb = self.nodes[b].value.clone();
                    let na = va.frobenius_sq().sqrt();
                    let nb = vb.frobenius_sq().sqrt();
                    let dot: f64 = va.data.iter().zip(&vb.data).map(|(x, y)| x * y).sum();
                    let cos = dot / (na * nb);
                    let gv = g.scalar_value();
                    let da = Matrix::from_vec(
                        va.rows,
                        va.cols,
                        va.data
                            .iter()
                            .zip(&vb.data)
                            .map(|(x, y)| gv * (y / (na * nb) - cos * x / (na * na)))
                            .collect(),
                    );
                    let db = Matrix::from_vec(
                        vb.rows,
                        vb.cols,
                        vb.data
                            .iter()
                            .zip(&va.data)
                            .map(|(y, x)| gv * (x / (na * nb) - cos * y / (nb * nb)))
                            .collect(),
                    );
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
                Op::StackScalars { xs } => {
                    for (i, &id_x) in xs.iter().enumerate() {
                        self.accumulate(id_x, &Matrix::scalar(g.data[i]));
                    }
                }
                Op::StackRows { xs } => {
                    let cols = g.cols;
                    for (r, &id_x) in xs.iter().enumerate() {
                        let slice = g.data[r * cols..(r + 1) * cols].to_vec();
                        self.accumulate(id_x, &Matrix::row_vector(slice));
                    }
                }
                Op::ConcatCols { a, b } => {
                    let la = self.nodes[a].value.numel();
                    let da = Matrix::row_vector(g.data[..la].to_vec());
                    let db = Matrix::row_vector(g.data[la..].to_vec());
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
                Op::LogSumExp { x } => {
                    let vx = &self.nodes[x].value;
                    let sm = softmax_slice(&vx.data);
                    let gv = g.scalar_value();
                    let dx = Matrix::from_vec(
                        vx.rows,
                        vx.cols,
                        sm.iter().map(|p| p * gv).collect(),
                    );
                    self.accumulate(x, &dx);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_gradient_is_broadcast_of_x() {
        // loss = sum(W·x) with x fixed → dL/dW[i][j] = x[j]
        let mut store = ParamStore::new();
        store.insert("w", Matrix::from_vec(2, 3, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]));
        let mut tape = Tape::new();
        let w = tape.param(&store, "w");
        let x = tape.constant(Matrix::from_vec(3, 1, vec![1.0, 2.0, 3.0]));
        let y = tape.matmul(w, x);
        let loss = tape.sum_all(y);
        tape.backward(loss).unwrap();
        let gw = tape.grad(w);
        assert_eq!(gw.data, vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn quadratic_gradient_zero_at_minimum() {
        let mut tape = Tape::new();
        let a = tape.input(Matrix::row_vector(vec![0.3, -0.7, 2.0]));
        let b = tape.input(Matrix::row_vector(vec![0.3, -0.7, 2.0]));
        let loss = tape.sq_dist(a, b);
        tape.backward(loss).unwrap();
        assert!(tape.grad(a).data.iter().all(|v| *v == 0.0));
        assert!(tape.grad(b).data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn backward_rejects_non_scalar_root() {
        let mut tape = Tape::new();
        let a = tape.input(Matrix::row_vector(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(a), Err(crate::error::Error::InvalidInput(_))));
    }

    #[test]
    fn off_path_parameter_gets_zero_gradient() {
        let mut store = ParamStore::new();
        store.insert("used", Matrix::scalar(2.0));
        store.insert("unused", Matrix::scalar(5.0));
        let mut tape = Tape::new();
        let u = tape.param(&store, "used");
        let _v = tape.param(&store, "unused");
        let loss = tape.mul_elem(u, u);
        tape.backward(loss).unwrap();
        tape.export_grads(&mut store);
        assert_eq!(store.grad("used").data, vec![4.0]);
        assert_eq!(store.grad("unused").data, vec![0.0]);
    }

    #[test]
    fn detached_constant_receives_exact_zero() {
        let mut tape = Tape::new();
        let a = tape.input(Matrix::row_vector(vec![1.0, 2.0]));
        let c = tape.constant(Matrix::row_vector(vec![3.0, 4.0]));
        let s = tape.mul_elem(a, c);
        let loss = tape.sum_all(s);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(c).data, vec![0.0, 0.0]);
        assert_eq!(tape.grad(a).data, vec![3.0, 4.0]);
    }

    #[test]
    fn forward_replay_is_bit_identical() {
        let build = || {
            let mut tape = Tape::new();
            let x = tape.input(Matrix::from_vec(2, 2, vec![0.1, -0.2, 0.3, 0.7]));
            let t = tape.tanh(x);
            let s = tape.softmax_rows(t);
            let l = tape.sum_all(s);
            tape.scalar(l).to_bits()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn segment_bounds_cover_all_frames() {
        for frames in 2..40 {
            for segments in 1..=frames {
                let mut covered = 0;
                for b in 0..segments {
                    let (lo, hi) = segment_bounds(frames, segments, b);
                    assert!(hi > lo, "empty segment {b} for T={frames} S={segments}");
                    covered += hi - lo;
                }
                assert_eq!(covered, frames);
            }
        }
    }
}
