//! Reverse-mode differentiation over a recorded tape of dense primitives.
//!
//! Values are f64 row-major matrices. A tape is built by the forward pass,
//! consumed by exactly one `backward`, and can be replayed (`recompute`)
//! after leaf values change.

use super::ModelError;
use crate::mat::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TapeState {
    Forward,
    Consumed,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(TensorId, TensorId),
    /// a * b^T
    MatMulNT(TensorId, TensorId),
    Add(TensorId, TensorId),
    /// matrix + broadcast row vector
    AddRow(TensorId, TensorId),
    Scale(TensorId, f64),
    Silu(TensorId),
    LayerNorm { x: TensorId, gain: TensorId, offset: TensorId, eps: f64 },
    SoftmaxRows(TensorId),
    MeanRows(TensorId),
    ConcatRows(Vec<TensorId>),
    ConcatCols(Vec<TensorId>),
    SumAll(TensorId),
    /// cosine similarity of two row vectors
    Cosine(TensorId, TensorId),
    /// log sum exp of a single row
    LogSumExpRow(TensorId),
    /// single element of a row
    Pick(TensorId, usize),
    /// mean of log(1 + exp(-s * y)) with s = +-1 from labels
    BceWithLogits { logits: TensorId, labels: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    adjoint: Vec<f64>,
    op: Op,
}

#[derive(Debug)]
pub struct Tape {
    nodes: Vec<Node>,
    state: TapeState,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), state: TapeState::Forward }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, id: TensorId) -> (usize, usize) {
        let n = &self.nodes[id.0];
        (n.rows, n.cols)
    }

    pub fn value(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].value
    }

    pub fn value_mat(&self, id: TensorId) -> Mat {
        let n = &self.nodes[id.0];
        Mat::from_vec(n.rows, n.cols, n.value.clone())
    }

    pub fn scalar(&self, id: TensorId) -> f64 {
        let n = &self.nodes[id.0];
        assert_eq!((n.rows, n.cols), (1, 1), "scalar() on non 1x1 tensor");
        n.value[0]
    }

    /// Adjoint of a leaf (or any node) after backward.
    pub fn grad(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].adjoint
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op) -> TensorId {
        assert_eq!(
            self.state,
            TapeState::Forward,
            "tape already consumed by backward; call recompute first"
        );
        debug_assert_eq!(value.len(), rows * cols);
        let id = TensorId(self.nodes.len());
        self.nodes.push(Node { rows, cols, adjoint: vec![0.0; value.len()], value, op });
        id
    }

    pub fn constant(&mut self, m: &Mat) -> TensorId {
        self.push(m.rows, m.cols, m.data.clone(), Op::Leaf)
    }

    pub fn constant_row(&mut self, data: &[f64]) -> TensorId {
        self.push(1, data.len(), data.to_vec(), Op::Leaf)
    }

    pub fn leaf(&mut self, rows: usize, cols: usize, data: &[f64]) -> TensorId {
        assert_eq!(data.len(), rows * cols);
        self.push(rows, cols, data.to_vec(), Op::Leaf)
    }

    /// Overwrite a leaf value in place (for replay).
    pub fn set_leaf_value(&mut self, id: TensorId, data: &[f64]) {
        let n = &mut self.nodes[id.0];
        assert!(matches!(n.op, Op::Leaf), "set_leaf_value on non-leaf");
        assert_eq!(n.value.len(), data.len());
        n.value.copy_from_slice(data);
    }

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        assert_eq!(ac, br, "matmul inner dims {ac} vs {br}");
        let value = matmul_kernel(self.value(a), ar, ac, self.value(b), bc, false);
        self.push(ar, bc, value, Op::MatMul(a, b))
    }

    pub fn matmul_nt(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        assert_eq!(ac, bc, "matmul_nt inner dims {ac} vs {bc}");
        let value = matmul_kernel(self.value(a), ar, ac, self.value(b), br, true);
        self.push(ar, br, value, Op::MatMulNT(a, b))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (ar, ac) = self.shape(a);
        assert_eq!((ar, ac), self.shape(b), "add shape mismatch");
        let value: Vec<f64> =
            self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        self.push(ar, ac, value, Op::Add(a, b))
    }

    pub fn add_row(&mut self, m: TensorId, row: TensorId) -> TensorId {
        let (mr, mc) = self.shape(m);
        let (rr, rc) = self.shape(row);
        assert_eq!((rr, rc), (1, mc), "add_row expects 1x{mc}, got {rr}x{rc}");
        let rv = self.value(row).to_vec();
        let value: Vec<f64> = self
            .value(m)
            .iter()
            .enumerate()
            .map(|(i, x)| x + rv[i % mc])
            .collect();
        self.push(mr, mc, value, Op::AddRow(m, row))
    }

    pub fn scale(&mut self, a: TensorId, c: f64) -> TensorId {
        let (r, cl) = self.shape(a);
        let value: Vec<f64> = self.value(a).iter().map(|x| x * c).collect();
        self.push(r, cl, value, Op::Scale(a, c))
    }

    pub fn silu(&mut self, a: TensorId) -> TensorId {
        let (r, c) = self.shape(a);
        let value: Vec<f64> = self.value(a).iter().map(|&x| x * sigmoid(x)).collect();
        self.push(r, c, value, Op::Silu(a))
    }

    /// Row-wise layer norm with learnable gain/offset (each 1 x cols).
    pub fn layer_norm(
        &mut self,
        x: TensorId,
        gain: TensorId,
        offset: TensorId,
        eps: f64,
    ) -> TensorId {
        let (r, c) = self.shape(x);
        assert_eq!(self.shape(gain), (1, c), "layer_norm gain shape");
        assert_eq!(self.shape(offset), (1, c), "layer_norm offset shape");
        let mut value = vec![0.0; r * c];
        let g = self.value(gain).to_vec();
        let o = self.value(offset).to_vec();
        let xv = self.value(x);
        for i in 0..r {
            let row = &xv[i * c..(i + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c as f64;
            let inv = 1.0 / (var + eps).sqrt();
            for j in 0..c {
                value[i * c + j] = (row[j] - mean) * inv * g[j] + o[j];
            }
        }
        self.push(r, c, value, Op::LayerNorm { x, gain, offset, eps })
    }

    pub fn softmax_rows(&mut self, a: TensorId) -> TensorId {
        let (r, c) = self.shape(a);
        assert!(c > 0, "softmax over empty row");
        let av = self.value(a);
        let mut value = vec![0.0; r * c];
        for i in 0..r {
            let row = &av[i * c..(i + 1) * c];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..c {
                let e = (row[j] - max).exp();
                value[i * c + j] = e;
                sum += e;
            }
            for j in 0..c {
                value[i * c + j] /= sum;
            }
        }
        self.push(r, c, value, Op::SoftmaxRows(a))
    }

    pub fn mean_rows(&mut self, a: TensorId) -> TensorId {
        let (r, c) = self.shape(a);
        assert!(r > 0, "mean over zero rows");
        let av = self.value(a);
        let mut value = vec![0.0; c];
        for i in 0..r {
            for j in 0..c {
                value[j] += av[i * c + j];
            }
        }
        for v in value.iter_mut() {
            *v /= r as f64;
        }
        self.push(1, c, value, Op::MeanRows(a))
    }

    pub fn concat_rows(&mut self, parts: &[TensorId]) -> TensorId {
        assert!(!parts.is_empty());
        let cols = self.shape(parts[0]).1;
        let mut rows = 0;
        let mut value = Vec::new();
        for &p in parts {
            let (r, c) = self.shape(p);
            assert_eq!(c, cols, "concat_rows width mismatch");
            rows += r;
            value.extend_from_slice(self.value(p));
        }
        self.push(rows, cols, value, Op::ConcatRows(parts.to_vec()))
    }

    pub fn concat_cols(&mut self, parts: &[TensorId]) -> TensorId {
        assert!(!parts.is_empty());
        let rows = self.shape(parts[0]).0;
        let total: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut value = vec![0.0; rows * total];
        let mut off = 0;
        for &p in parts {
            let (r, c) = self.shape(p);
            assert_eq!(r, rows, "concat_cols height mismatch");
            for i in 0..r {
                let src = &self.nodes[p.0].value[i * c..(i + 1) * c];
                value[i * total + off..i * total + off + c].copy_from_slice(src);
            }
            off += c;
        }
        self.push(rows, total, value, Op::ConcatCols(parts.to_vec()))
    }

    pub fn sum_all(&mut self, a: TensorId) -> TensorId {
        let s = self.value(a).iter().sum();
        self.push(1, 1, vec![s], Op::SumAll(a))
    }

    /// Cosine similarity of two row vectors. Errors on (near-)zero vectors.
    pub fn cosine(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, ModelError> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        assert_eq!((ar, br), (1, 1), "cosine expects row vectors");
        assert_eq!(ac, bc, "cosine width mismatch");
        let na = self.value(a).iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = self.value(b).iter().map(|v| v * v).sum::<f64>().sqrt();
        if na < 1e-30 || nb < 1e-30 {
            return Err(ModelError::ZeroVector);
        }
        let dot: f64 = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).sum();
        Ok(self.push(1, 1, vec![dot / (na * nb)], Op::Cosine(a, b)))
    }

    pub fn logsumexp_row(&mut self, a: TensorId) -> TensorId {
        let (r, c) = self.shape(a);
        assert_eq!(r, 1, "logsumexp_row expects a single row");
        assert!(c > 0);
        let row = self.value(a);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = row.iter().map(|v| (v - max).exp()).sum();
        self.push(1, 1, vec![max + s.ln()], Op::LogSumExpRow(a))
    }

    pub fn pick(&mut self, a: TensorId, j: usize) -> TensorId {
        let (r, c) = self.shape(a);
        assert_eq!(r, 1, "pick expects a single row");
        assert!(j < c);
        let v = self.value(a)[j];
        self.push(1, 1, vec![v], Op::Pick(a, j))
    }

    /// Numerically stable binary cross entropy with logits, mean-reduced.
    pub fn bce_with_logits(
        &mut self,
        logits: TensorId,
        labels: &[f64],
    ) -> Result<TensorId, ModelError> {
        let (r, c) = self.shape(logits);
        if labels.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        if r * c != labels.len() {
            return Err(ModelError::LengthMismatch { expected: r * c, got: labels.len() });
        }
        let n = labels.len() as f64;
        let loss = self
            .value(logits)
            .iter()
            .zip(labels)
            .map(|(&y, &l)| {
                let s = 2.0 * l - 1.0;
                softplus(-s * y)
            })
            .sum::<f64>()
            / n;
        Ok(self.push(1, 1, vec![loss], Op::BceWithLogits { logits, labels: labels.to_vec() }))
    }

    /// Propagate adjoints from a scalar loss back to every leaf. Consumes the
    /// tape; a second call without `recompute` is an error.
    pub fn backward(&mut self, loss: TensorId) -> Result<(), ModelError> {
        if self.nodes.is_empty() {
            return Err(ModelError::EmptyTape);
        }
        if self.state == TapeState::Consumed {
            return Err(ModelError::TapeConsumed);
        }
        let n = &self.nodes[loss.0];
        if (n.rows, n.cols) != (1, 1) {
            return Err(ModelError::NonScalarLoss { rows: n.rows, cols: n.cols });
        }
        self.state = TapeState::Consumed;
        self.nodes[loss.0].adjoint[0] = 1.0;
        for i in (0..=loss.0).rev() {
            self.propagate(i);
        }
        Ok(())
    }

    /// Recompute all values from current leaf contents and clear adjoints,
    /// making the tape usable for another backward pass.
    pub fn recompute(&mut self) {
        for i in 0..self.nodes.len() {
            let op = self.nodes[i].op.clone();
            let new_value = match op {
                Op::Leaf => None,
                Op::MatMul(a, b) => {
                    let (ar, ac) = self.shape(a);
                    let bc = self.shape(b).1;
                    Some(matmul_kernel(self.value(a), ar, ac, self.value(b), bc, false))
                }
                Op::MatMulNT(a, b) => {
                    let (ar, ac) = self.shape(a);
                    let br = self.shape(b).0;
                    Some(matmul_kernel(self.value(a), ar, ac, self.value(b), br, true))
                }
                Op::Add(a, b) => {
                    Some(self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect())
                }
                Op::AddRow(m, row) => {
                    let c = self.shape(m).1;
                    let rv = self.value(row).to_vec();
                    Some(self.value(m).iter().enumerate().map(|(i, x)| x + rv[i % c]).collect())
                }
                Op::Scale(a, k) => Some(self.value(a).iter().map(|x| x * k).collect()),
                Op::Silu(a) => Some(self.value(a).iter().map(|&x| x * sigmoid(x)).collect()),
                Op::LayerNorm { x, gain, offset, eps } => {
                    let (r, c) = self.shape(x);
                    let g = self.value(gain).to_vec();
                    let o = self.value(offset).to_vec();
                    let xv = self.value(x);
                    let mut value = vec![0.0; r * c];
                    for i in 0..r {
                        let row = &xv[i * c..(i + 1) * c];
                        let mean = row.iter().sum::<f64>() / c as f64;
                        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c as f64;
                        let inv = 1.0 / (var + eps).sqrt();
                        for j in 0..c {
                            value[i * c + j] = (row[j] - mean) * inv * g[j] + o[j];
                        }
                    }
                    Some(value)
                }
                Op::SoftmaxRows(a) => {
                    let (r, c) = self.shape(a);
                    let av = self.value(a);
                    let mut value = vec![0.0; r * c];
                    for i in 0..r {
                        let row = &av[i * c..(i + 1) * c];
                        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        let mut sum = 0.0;
                        for j in 0..c {
                            let e = (row[j] - max).exp();
                            value[i * c + j] = e;
                            sum += e;
                        }
                        for j in 0..c {
                            value[i * c + j] /= sum;
                        }
                    }
                    Some(value)
                }
                Op::MeanRows(a) => {
                    let (r, c) = self.shape(a);
                    let av = self.value(a);
                    let mut value = vec![0.0; c];
                    for i in 0..r {
                        for j in 0..c {
                            value[j] += av[i * c + j];
                        }
                    }
                    for v in value.iter_mut() {
                        *v /= r as f64;
                    }
                    Some(value)
                }
                Op::ConcatRows(parts) => {
                    let mut value = Vec::new();
                    for p in parts {
                        value.extend_from_slice(self.value(p));
                    }
                    Some(value)
                }
                Op::ConcatCols(parts) => {
                    let rows = self.shape(parts[0]).0;
                    let total: usize = parts.iter().map(|&p| self.shape(p).1).sum();
                    let mut value = vec![0.0; rows * total];
                    let mut off = 0;
                    for p in parts {
                        let (r, c) = self.shape(p);
                        for i in 0..r {
                            let src = &self.nodes[p.0].value[i * c..(i + 1) * c];
                            value[i * total + off..i * total + off + c].copy_from_slice(src);
                        }
                        off += c;
                    }
                    Some(value)
                }
                Op::SumAll(a) => Some(vec![self.value(a).iter().sum()]),
                Op::Cosine(a, b) => {
                    let na = self.value(a).iter().map(|v| v * v).sum::<f64>().sqrt();
                    let nb = self.value(b).iter().map(|v| v * v).sum::<f64>().sqrt();
                    let dot: f64 =
                        self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).sum();
                    Some(vec![dot / (na * nb)])
                }
                Op::LogSumExpRow(a) => {
                    let row = self.value(a);
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let s: f64 = row.iter().map(|v| (v - max).exp()).sum();
                    Some(vec![max + s.ln()])
                }
                Op::Pick(a, j) => Some(vec![self.value(a)[j]]),
                Op::BceWithLogits { logits, ref labels } => {
                    let n = labels.len() as f64;
                    let loss = self
                        .value(logits)
                        .iter()
                        .zip(labels)
                        .map(|(&y, &l)| softplus(-(2.0 * l - 1.0) * y))
                        .sum::<f64>()
                        / n;
                    Some(vec![loss])
                }
            };
            if let Some(v) = new_value {
                self.nodes[i].value = v;
            }
        }
        for node in &mut self.nodes {
            node.adjoint.iter_mut().for_each(|a| *a = 0.0);
        }
        self.state = TapeState::Forward;
    }

    fn propagate(&mut self, i: usize) {
        let op = self.nodes[i].op.clone();
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ar, ac) = self.shape(a);
                let bc = self.shape(b).1;
                let dc = self.nodes[i].adjoint.clone();
                // dA += dC * B^T
                let da = matmul_kernel(&dc, ar, bc, self.value(b), ac, true);
                add_into(&mut self.nodes[a.0].adjoint, &da);
                // dB += A^T * dC
                let db = matmul_tn(self.value(a), ar, ac, &dc, bc);
                add_into(&mut self.nodes[b.0].adjoint, &db);
            }
            Op::MatMulNT(a, b) => {
                let (ar, ac) = self.shape(a);
                let br = self.shape(b).0;
                let dc = self.nodes[i].adjoint.clone();
                // C = A B^T: dA += dC * B ; dB += dC^T * A
                let da = matmul_kernel(&dc, ar, br, self.value(b), ac, false);
                add_into(&mut self.nodes[a.0].adjoint, &da);
                let db = matmul_tn(&dc, ar, br, self.value(a), ac);
                add_into(&mut self.nodes[b.0].adjoint, &db);
            }
            Op::Add(a, b) => {
                let dc = self.nodes[i].adjoint.clone();
                add_into(&mut self.nodes[a.0].adjoint, &dc);
                add_into(&mut self.nodes[b.0].adjoint, &dc);
            }
            Op::AddRow(m, row) => {
                let c = self.shape(m).1;
                let dc = self.nodes[i].adjoint.clone();
                add_into(&mut self.nodes[m.0].adjoint, &dc);
                let radj = &mut self.nodes[row.0].adjoint;
                for (k, v) in dc.iter().enumerate() {
                    radj[k % c] += v;
                }
            }
            Op::Scale(a, k) => {
                let dc = self.nodes[i].adjoint.clone();
                let aadj = &mut self.nodes[a.0].adjoint;
                for (dst, v) in aadj.iter_mut().zip(&dc) {
                    *dst += k * v;
                }
            }
            Op::Silu(a) => {
                let dc = self.nodes[i].adjoint.clone();
                let xv = self.nodes[a.0].value.clone();
                let aadj = &mut self.nodes[a.0].adjoint;
                for ((dst, &x), &d) in aadj.iter_mut().zip(&xv).zip(&dc) {
                    let s = sigmoid(x);
                    *dst += d * s * (1.0 + x * (1.0 - s));
                }
            }
            Op::LayerNorm { x, gain, offset, eps } => {
                let (r, c) = self.shape(x);
                let dy = self.nodes[i].adjoint.clone();
                let xv = self.nodes[x.0].value.clone();
                let g = self.nodes[gain.0].value.clone();
                for row in 0..r {
                    let xr = &xv[row * c..(row + 1) * c];
                    let dyr = &dy[row * c..(row + 1) * c];
                    let mean = xr.iter().sum::<f64>() / c as f64;
                    let var = xr.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c as f64;
                    let inv = 1.0 / (var + eps).sqrt();
                    let xhat: Vec<f64> = xr.iter().map(|v| (v - mean) * inv).collect();
                    // offset and gain accumulate across rows
                    {
                        let oadj = &mut self.nodes[offset.0].adjoint;
                        for j in 0..c {
                            oadj[j] += dyr[j];
                        }
                    }
                    {
                        let gadj = &mut self.nodes[gain.0].adjoint;
                        for j in 0..c {
                            gadj[j] += dyr[j] * xhat[j];
                        }
                    }
                    let dxhat: Vec<f64> = (0..c).map(|j| dyr[j] * g[j]).collect();
                    let mean_dxhat = dxhat.iter().sum::<f64>() / c as f64;
                    let mean_dxhat_xhat =
                        dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / c as f64;
                    let xadj = &mut self.nodes[x.0].adjoint;
                    for j in 0..c {
                        xadj[row * c + j] +=
                            inv * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
                    }
                }
            }
            Op::SoftmaxRows(a) => {
                let (r, c) = self.shape(a);
                let dy = self.nodes[i].adjoint.clone();
                let y = self.nodes[i].value.clone();
                let aadj = &mut self.nodes[a.0].adjoint;
                for row in 0..r {
                    let yr = &y[row * c..(row + 1) * c];
                    let dyr = &dy[row * c..(row + 1) * c];
                    let dot: f64 = yr.iter().zip(dyr).map(|(a, b)| a * b).sum();
                    for j in 0..c {
                        aadj[row * c + j] += yr[j] * (dyr[j] - dot);
                    }
                }
            }
            Op::MeanRows(a) => {
                let (r, c) = self.shape(a);
                let dy = self.nodes[i].adjoint.clone();
                let aadj = &mut self.nodes[a.0].adjoint;
                for row in 0..r {
                    for j in 0..c {
                        aadj[row * c + j] += dy[j] / r as f64;
                    }
                }
            }
            Op::ConcatRows(parts) => {
                let dc = self.nodes[i].adjoint.clone();
                let mut off = 0;
                for p in parts {
                    let len = self.nodes[p.0].value.len();
                    add_into(&mut self.nodes[p.0].adjoint, &dc[off..off + len]);
                    off += len;
                }
            }
            Op::ConcatCols(parts) => {
                let total = self.shape(TensorId(i)).1;
                let rows = self.shape(TensorId(i)).0;
                let dc = self.nodes[i].adjoint.clone();
                let mut off = 0;
                for p in parts {
                    let (r, c) = self.shape(p);
                    debug_assert_eq!(r, rows);
                    let padj = &mut self.nodes[p.0].adjoint;
                    for row in 0..rows {
                        for j in 0..c {
                            padj[row * c + j] += dc[row * total + off + j];
                        }
                    }
                    off += c;
                }
            }
            Op::SumAll(a) => {
                let d = self.nodes[i].adjoint[0];
                for dst in self.nodes[a.0].adjoint.iter_mut() {
                    *dst += d;
                }
            }
            Op::Cosine(a, b) => {
                let d = self.nodes[i].adjoint[0];
                let cosv = self.nodes[i].value[0];
                let av = self.nodes[a.0].value.clone();
                let bv = self.nodes[b.0].value.clone();
                let na = av.iter().map(|v| v * v).sum::<f64>().sqrt();
                let nb = bv.iter().map(|v| v * v).sum::<f64>().sqrt();
                {
                    let aadj = &mut self.nodes[a.0].adjoint;
                    for j in 0..av.len() {
                        aadj[j] += d * (bv[j] / (na * nb) - cosv * av[j] / (na * na));
                    }
                }
                {
                    let badj = &mut self.nodes[b.0].adjoint;
                    for j in 0..bv.len() {
                        badj[j] += d * (av[j] / (na * nb) - cosv * bv[j] / (nb * nb));
                    }
                }
            }
            Op::LogSumExpRow(a) => {
                let d = self.nodes[i].adjoint[0];
                let row = self.nodes[a.0].value.clone();
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
                let aadj = &mut self.nodes[a.0].adjoint;
                for (dst, &v) in aadj.iter_mut().zip(&row) {
                    *dst += d * (v - max).exp() / sum;
                }
            }
            Op::Pick(a, j) => {
                let d = self.nodes[i].adjoint[0];
                self.nodes[a.0].adjoint[j] += d;
            }
            Op::BceWithLogits { logits, labels } => {
                let d = self.nodes[i].adjoint[0];
                let n = labels.len() as f64;
                let yv = self.nodes[logits.0].value.clone();
                let ladj = &mut self.nodes[logits.0].adjoint;
                for (k, (&y, &l)) in yv.iter().zip(&labels).enumerate() {
                    let s = 2.0 * l - 1.0;
                    ladj[k] += d * (-s) * sigmoid(-s * y) / n;
                }
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// C[m x n] = A[m x k] * B, where B is k x n (transpose_b=false, row-major)
/// or n x k (transpose_b=true).
fn matmul_kernel(
    a: &[f64],
    m: usize,
    k: usize,
    b: &[f64],
    n: usize,
    transpose_b: bool,
) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    if transpose_b {
        for i in 0..m {
            let arow = &a[i * k..(i + 1) * k];
            for j in 0..n {
                let brow = &b[j * k..(j + 1) * k];
                let mut acc = 0.0;
                for (x, y) in arow.iter().zip(brow) {
                    acc += x * y;
                }
                c[i * n + j] = acc;
            }
        }
    } else {
        for i in 0..m {
            let arow = &a[i * k..(i + 1) * k];
            let crow = &mut c[i * n..(i + 1) * n];
            for (p, &av) in arow.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let brow = &b[p * n..(p + 1) * n];
                for (cv, &bv) in crow.iter_mut().zip(brow) {
                    *cv += av * bv;
                }
            }
        }
    }
    c
}

/// C[k x n] = A^T[k x m] * B[m x n] where A is m x k row-major.
fn matmul_tn(a: &[f64], m: usize, k: usize, b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; k * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let brow = &b[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let crow = &mut c[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
    c
}
