//! Eager tape-recording reverse-mode differentiation.
//!
//! Every operation appends a node to the [`Graph`]; node inputs always have
//! smaller indices than the node itself, so creation order is a topological
//! order and the tape is acyclic by construction. [`Graph::backward`] walks
//! the tape once in reverse.
//!
//! Shapes are strict: apart from [`Graph::add_bias`] (a `[n]` vector added to
//! every row of a `[m, n]` matrix) no operation broadcasts.

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::tensor::{gemm, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Leaf,
    MatMul,
    Add,
    AddBias,
    Relu,
    Sigmoid,
    Softmax,
    Concat,
    Mean,
    MaskedMean,
    EmbeddingLookup,
    CrossEntropy,
    BinaryCrossEntropy,
    Mul,
    Sum,
    Scale,
    Reshape,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Softmax(Var),
    Concat { inputs: Vec<Var>, axis: usize },
    Mean(Var),
    MaskedMean { input: Var, mask: Vec<f64>, seq_len: usize },
    EmbeddingLookup { table: Var, ids: Vec<usize> },
    CrossEntropy { logits: Var, targets: Vec<usize>, probs: Vec<f64> },
    BinaryCrossEntropy { logits: Var, targets: Vec<f64> },
    Mul(Var, Var),
    Sum(Var),
    Scale(Var, f64),
    Reshape(Var),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::AddBias(..) => OpKind::AddBias,
            Op::Relu(_) => OpKind::Relu,
            Op::Sigmoid(_) => OpKind::Sigmoid,
            Op::Softmax(_) => OpKind::Softmax,
            Op::Concat { .. } => OpKind::Concat,
            Op::Mean(_) => OpKind::Mean,
            Op::MaskedMean { .. } => OpKind::MaskedMean,
            Op::EmbeddingLookup { .. } => OpKind::EmbeddingLookup,
            Op::CrossEntropy { .. } => OpKind::CrossEntropy,
            Op::BinaryCrossEntropy { .. } => OpKind::BinaryCrossEntropy,
            Op::Mul(..) => OpKind::Mul,
            Op::Sum(_) => OpKind::Sum,
            Op::Scale(..) => OpKind::Scale,
            Op::Reshape(_) => OpKind::Reshape,
        }
    }

    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b) | Op::Add(a, b) | Op::AddBias(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Relu(x)
            | Op::Sigmoid(x)
            | Op::Softmax(x)
            | Op::Mean(x)
            | Op::Sum(x)
            | Op::Scale(x, _)
            | Op::Reshape(x) => vec![*x],
            Op::Concat { inputs, .. } => inputs.clone(),
            Op::MaskedMean { input, .. } => vec![*input],
            Op::EmbeddingLookup { table, .. } => vec![*table],
            Op::CrossEntropy { logits, .. } | Op::BinaryCrossEntropy { logits, .. } => {
                vec![*logits]
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    grad: Option<Tensor>,
    requires_grad: bool,
    param: Option<String>,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
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

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let requires_grad = op
            .inputs()
            .iter()
            .any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            param: None,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_leaf(&mut self, value: Tensor, requires_grad: bool, param: Option<String>) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            param,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    /// A constant input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, false, None)
    }

    /// A leaf whose gradient is tracked.
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, true, None)
    }

    /// Records the current value of a stored parameter. Frozen parameters
    /// become constants.
    pub fn param(&mut self, store: &ParamStore, path: &str) -> Result<Var> {
        let p = store.get(path)?;
        Ok(self.push_leaf(p.value.clone(), p.trainable, Some(path.to_string())))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn op_kind(&self, v: Var) -> OpKind {
        self.nodes[v.0].op.kind()
    }

    pub fn inputs(&self, v: Var) -> Vec<Var> {
        self.nodes[v.0].op.inputs()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2()?;
        let (k2, n) = self.value(b).dims2()?;
        if k != k2 {
            return Err(Error::Dimension(format!(
                "matmul inner dimensions disagree: {:?} x {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value(a).data(), false, self.value(b).data(), false, 0.0, &mut out);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::Dimension(format!(
                "add needs equal shapes, got {:?} and {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// Adds a `[n]` bias to each row of a `[m, n]` matrix.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (m, n) = self.value(x).dims2()?;
        if self.value(bias).shape() != [n] {
            return Err(Error::Dimension(format!(
                "bias of shape {:?} cannot be added to {:?}",
                self.value(bias).shape(),
                self.value(x).shape()
            )));
        }
        let b = self.value(bias).data();
        let mut out = self.value(x).data().to_vec();
        for row in out.chunks_mut(n) {
            for (o, bj) in row.iter_mut().zip(b) {
                *o += bj;
            }
        }
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::AddBias(x, bias)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::Dimension(format!(
                "elementwise product needs equal shapes, got {:?} and {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    /// `max(x, 0)`; the subgradient at 0 is 0.
    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| if v > 0.0 { v } else { 0.0 });
        self.push(out, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(stable_sigmoid);
        self.push(out, Op::Sigmoid(x))
    }

    /// Row-wise softmax over the last axis of a matrix.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let (_, n) = self.value(x).dims2()?;
        let mut out = self.value(x).data().to_vec();
        for row in out.chunks_mut(n) {
            softmax_in_place(row);
        }
        let out = Tensor::new(self.value(x).shape().to_vec(), out)?;
        Ok(self.push(out, Op::Softmax(x)))
    }

    /// Concatenates tensors of equal rank whose shapes agree except along `axis`.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::Dimension("concat of zero tensors".into()))?;
        let base = self.value(*first).shape().to_vec();
        if axis >= base.len() {
            return Err(Error::Dimension(format!(
                "concat axis {axis} out of range for shape {base:?}"
            )));
        }
        let mut along = 0;
        for v in inputs {
            let s = self.value(*v).shape();
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                let shapes: Vec<_> = inputs.iter().map(|v| self.value(*v).shape().to_vec()).collect();
                return Err(Error::Dimension(format!(
                    "cannot concatenate shapes {shapes:?} along axis {axis}"
                )));
            }
            along += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * along * inner);
        for o in 0..outer {
            for v in inputs {
                let t = self.value(*v);
                let block = t.shape()[axis] * inner;
                out.extend_from_slice(&t.data()[o * block..(o + 1) * block]);
            }
        }
        let mut shape = base;
        shape[axis] = along;
        let out = Tensor::new(shape, out)?;
        Ok(self.push(
            out,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
        ))
    }

    /// Mean over every element, producing a scalar.
    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let out = Tensor::scalar(t.sum() / t.numel() as f64);
        self.push(out, Op::Mean(x))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).sum());
        self.push(out, Op::Sum(x))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let out = self.value(x).map(|v| v * factor);
        self.push(out, Op::Scale(x, factor))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let out = self.value(x).clone().reshaped(shape)?;
        Ok(self.push(out, Op::Reshape(x)))
    }

    /// Masked mean pooling.
    ///
    /// `x` holds `b * seq_len` rows (sequence-major) and `mask` holds
    /// `b * seq_len` entries in `{0, 1}`. Row `i` of the `[b, d]` output is the
    /// mean of the unmasked rows of sequence `i`, dividing by the mask sum. A
    /// sequence with no unmasked position pools to zeros.
    pub fn masked_mean(&mut self, x: Var, mask: &[f64], seq_len: usize) -> Result<Var> {
        let (rows, d) = self.value(x).dims2()?;
        if seq_len == 0 || rows % seq_len != 0 || mask.len() != rows {
            return Err(Error::Dimension(format!(
                "masked mean over {:?} needs a mask of {rows} entries and a sequence length dividing it (mask {}, seq_len {seq_len})",
                self.value(x).shape(),
                mask.len()
            )));
        }
        if mask.iter().any(|&m| m != 0.0 && m != 1.0) {
            return Err(Error::Contract("attention mask must be 0/1".into()));
        }
        let b = rows / seq_len;
        let data = self.value(x).data();
        let mut out = vec![0.0; b * d];
        for i in 0..b {
            let m = &mask[i * seq_len..(i + 1) * seq_len];
            let count: f64 = m.iter().sum();
            if count == 0.0 {
                continue;
            }
            let o = &mut out[i * d..(i + 1) * d];
            for (j, &mj) in m.iter().enumerate() {
                if mj == 0.0 {
                    continue;
                }
                let r = &data[(i * seq_len + j) * d..(i * seq_len + j + 1) * d];
                for (ok, rk) in o.iter_mut().zip(r) {
                    *ok += rk;
                }
            }
            o.iter_mut().for_each(|v| *v /= count);
        }
        let out = Tensor::new(vec![b, d], out)?;
        Ok(self.push(
            out,
            Op::MaskedMean {
                input: x,
                mask: mask.to_vec(),
                seq_len,
            },
        ))
    }

    /// Gathers rows of a `[vocab, d]` table.
    pub fn embedding_lookup(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (vocab, d) = self.value(table).dims2()?;
        if ids.is_empty() {
            return Err(Error::Dimension("embedding lookup of zero ids".into()));
        }
        if let Some(&bad) = ids.iter().find(|&&id| id >= vocab) {
            return Err(Error::Vocabulary(format!(
                "token id {bad} outside vocabulary of size {vocab}"
            )));
        }
        let t = self.value(table).data();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            out.extend_from_slice(&t[id * d..(id + 1) * d]);
        }
        let out = Tensor::new(vec![ids.len(), d], out)?;
        Ok(self.push(
            out,
            Op::EmbeddingLookup {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Mean categorical cross-entropy of `[b, c]` logits against class indices.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let (b, c) = self.value(logits).dims2()?;
        if c < 2 {
            return Err(Error::Label(format!("cross-entropy needs at least 2 classes, got {c}")));
        }
        if targets.len() != b {
            return Err(Error::Dimension(format!(
                "{} targets for a batch of {b}",
                targets.len()
            )));
        }
        if let Some((i, &t)) = targets.iter().enumerate().find(|(_, &t)| t >= c) {
            return Err(Error::Label(format!(
                "target {t} at index {i} outside [0, {c})"
            )));
        }
        let z = self.value(logits).data();
        let mut probs = vec![0.0; b * c];
        let mut total = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            let row = &z[i * c..(i + 1) * c];
            let lse = log_sum_exp(row);
            total += lse - row[t];
            for (p, &zj) in probs[i * c..(i + 1) * c].iter_mut().zip(row) {
                *p = (zj - lse).exp();
            }
        }
        let out = Tensor::scalar(total / b as f64);
        Ok(self.push(
            out,
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        ))
    }

    /// Mean binary cross-entropy over every logit, in the stable logits form
    /// `max(z, 0) - z t + ln(1 + e^-|z|)`.
    pub fn binary_cross_entropy(&mut self, logits: Var, targets: &Tensor) -> Result<Var> {
        let z = self.value(logits);
        if z.shape() != targets.shape() {
            return Err(Error::Dimension(format!(
                "binary cross-entropy targets {:?} do not match logits {:?}",
                targets.shape(),
                z.shape()
            )));
        }
        if let Some(i) = targets.data().iter().position(|&t| t != 0.0 && t != 1.0) {
            return Err(Error::Label(format!(
                "non-binary target {} at flat index {i}",
                targets.data()[i]
            )));
        }
        let total: f64 = z
            .data()
            .iter()
            .zip(targets.data())
            .map(|(&z, &t)| z.max(0.0) - z * t + (-z.abs()).exp().ln_1p())
            .sum();
        let out = Tensor::scalar(total / z.numel() as f64);
        Ok(self.push(
            out,
            Op::BinaryCrossEntropy {
                logits,
                targets: targets.data().to_vec(),
            },
        ))
    }

    /// Back-propagates from a scalar, adding into the gradient of every
    /// `requires_grad` ancestor. Repeated calls accumulate.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        let n = loss.0 + 1;
        let mut reachable = vec![false; n];
        reachable[loss.0] = true;
        for i in (0..n).rev() {
            if reachable[i] {
                for v in self.nodes[i].op.inputs() {
                    if self.nodes[v.0].requires_grad {
                        reachable[v.0] = true;
                    }
                }
            }
        }

        let mut local: Vec<Option<Vec<f64>>> = vec![None; n];
        local[loss.0] = Some(vec![1.0]);
        for i in (0..n).rev() {
            if !reachable[i] {
                continue;
            }
            let g = local[i]
                .take()
                .unwrap_or_else(|| vec![0.0; self.nodes[i].value.numel()]);
            propagate(&self.nodes, i, &g, &mut local);
            let node = &mut self.nodes[i];
            match &mut node.grad {
                Some(existing) => {
                    for (e, x) in existing.data_mut().iter_mut().zip(&g) {
                        *e += x;
                    }
                }
                None => node.grad = Some(Tensor::new(node.value.shape().to_vec(), g)?),
            }
        }
        Ok(())
    }

    /// Adds the gradients of recorded trainable parameters into `store`.
    pub fn accumulate_param_grads(&self, store: &mut ParamStore) -> Result<()> {
        for node in &self.nodes {
            if let (Some(path), Some(grad)) = (&node.param, &node.grad) {
                store.accumulate_grad(path, grad)?;
            }
        }
        Ok(())
    }
}

fn slot<'a>(local: &'a mut [Option<Vec<f64>>], nodes: &[Node], v: Var) -> Option<&'a mut Vec<f64>> {
    if !nodes[v.0].requires_grad {
        return None;
    }
    let len = nodes[v.0].value.numel();
    Some(local[v.0].get_or_insert_with(|| vec![0.0; len]))
}

fn propagate(nodes: &[Node], i: usize, g: &[f64], local: &mut [Option<Vec<f64>>]) {
    let node = &nodes[i];
    match &node.op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (m, k) = (nodes[a.0].value.shape()[0], nodes[a.0].value.shape()[1]);
            let n = nodes[b.0].value.shape()[1];
            if let Some(ga) = slot(local, nodes, *a) {
                // dA = dOut . B^T
                gemm(m, n, k, g, false, nodes[b.0].value.data(), true, 1.0, ga);
            }
            if let Some(gb) = slot(local, nodes, *b) {
                // dB = A^T . dOut
                gemm(k, m, n, nodes[a.0].value.data(), true, g, false, 1.0, gb);
            }
        }
        Op::Add(a, b) => {
            for v in [a, b] {
                if let Some(gv) = slot(local, nodes, *v) {
                    add_into(gv, g);
                }
            }
        }
        Op::AddBias(x, bias) => {
            if let Some(gx) = slot(local, nodes, *x) {
                add_into(gx, g);
            }
            if let Some(gb) = slot(local, nodes, *bias) {
                let n = gb.len();
                for row in g.chunks(n) {
                    add_into(gb, row);
                }
            }
        }
        Op::Mul(a, b) => {
            let (va, vb) = (nodes[a.0].value.data(), nodes[b.0].value.data());
            if let Some(ga) = slot(local, nodes, *a) {
                for ((o, gi), bi) in ga.iter_mut().zip(g).zip(vb) {
                    *o += gi * bi;
                }
            }
            if let Some(gb) = slot(local, nodes, *b) {
                for ((o, gi), ai) in gb.iter_mut().zip(g).zip(va) {
                    *o += gi * ai;
                }
            }
        }
        Op::Relu(x) => {
            let xv = nodes[x.0].value.data();
            if let Some(gx) = slot(local, nodes, *x) {
                for ((o, gi), xi) in gx.iter_mut().zip(g).zip(xv) {
                    if *xi > 0.0 {
                        *o += gi;
                    }
                }
            }
        }
        Op::Sigmoid(x) => {
            let y = node.value.data();
            if let Some(gx) = slot(local, nodes, *x) {
                for ((o, gi), yi) in gx.iter_mut().zip(g).zip(y) {
                    *o += gi * yi * (1.0 - yi);
                }
            }
        }
        Op::Softmax(x) => {
            let y = node.value.data();
            let c = node.value.shape()[1];
            if let Some(gx) = slot(local, nodes, *x) {
                for ((grow, yrow), orow) in g.chunks(c).zip(y.chunks(c)).zip(gx.chunks_mut(c)) {
                    let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                    for ((o, gi), yi) in orow.iter_mut().zip(grow).zip(yrow) {
                        *o += yi * (gi - dot);
                    }
                }
            }
        }
        Op::Concat { inputs, axis } => {
            let shape = node.value.shape();
            let outer: usize = shape[..*axis].iter().product();
            let inner: usize = shape[axis + 1..].iter().product();
            let row = shape[*axis] * inner;
            let mut offset = 0;
            for v in inputs {
                let block = nodes[v.0].value.shape()[*axis] * inner;
                if let Some(gv) = slot(local, nodes, *v) {
                    for o in 0..outer {
                        let src = &g[o * row + offset..o * row + offset + block];
                        add_into(&mut gv[o * block..(o + 1) * block], src);
                    }
                }
                offset += block;
            }
        }
        Op::Mean(x) => {
            let n = nodes[x.0].value.numel() as f64;
            if let Some(gx) = slot(local, nodes, *x) {
                gx.iter_mut().for_each(|o| *o += g[0] / n);
            }
        }
        Op::Sum(x) => {
            if let Some(gx) = slot(local, nodes, *x) {
                gx.iter_mut().for_each(|o| *o += g[0]);
            }
        }
        Op::Scale(x, f) => {
            if let Some(gx) = slot(local, nodes, *x) {
                for (o, gi) in gx.iter_mut().zip(g) {
                    *o += f * gi;
                }
            }
        }
        Op::Reshape(x) => {
            if let Some(gx) = slot(local, nodes, *x) {
                add_into(gx, g);
            }
        }
        Op::MaskedMean {
            input,
            mask,
            seq_len,
        } => {
            let d = node.value.shape()[1];
            if let Some(gx) = slot(local, nodes, *input) {
                for (i, mrow) in mask.chunks(*seq_len).enumerate() {
                    let count: f64 = mrow.iter().sum();
                    if count == 0.0 {
                        continue;
                    }
                    let gi = &g[i * d..(i + 1) * d];
                    for (j, &mj) in mrow.iter().enumerate() {
                        if mj == 0.0 {
                            continue;
                        }
                        let r = (i * seq_len + j) * d;
                        for (o, gk) in gx[r..r + d].iter_mut().zip(gi) {
                            *o += gk / count;
                        }
                    }
                }
            }
        }
        Op::EmbeddingLookup { table, ids } => {
            let d = nodes[table.0].value.shape()[1];
            if let Some(gt) = slot(local, nodes, *table) {
                for (r, &id) in ids.iter().enumerate() {
                    add_into(&mut gt[id * d..(id + 1) * d], &g[r * d..(r + 1) * d]);
                }
            }
        }
        Op::CrossEntropy {
            logits,
            targets,
            probs,
        } => {
            let b = targets.len();
            let c = probs.len() / b;
            let scale = g[0] / b as f64;
            if let Some(gz) = slot(local, nodes, *logits) {
                for (i, &t) in targets.iter().enumerate() {
                    for j in 0..c {
                        let onehot = if j == t { 1.0 } else { 0.0 };
                        gz[i * c + j] += scale * (probs[i * c + j] - onehot);
                    }
                }
            }
        }
        Op::BinaryCrossEntropy { logits, targets } => {
            let z = nodes[logits.0].value.data();
            let scale = g[0] / z.len() as f64;
            if let Some(gz) = slot(local, nodes, *logits) {
                for ((o, &zi), &ti) in gz.iter_mut().zip(z).zip(targets) {
                    *o += scale * (stable_sigmoid(zi) - ti);
                }
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub fn stable_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let lse = log_sum_exp(row);
    row.iter_mut().for_each(|z| *z = (*z - lse).exp());
}
