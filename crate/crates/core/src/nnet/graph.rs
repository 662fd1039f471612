//! Reverse-mode differentiation over a tape of 2-D tensor ops.
//!
//! A [`Graph`] borrows a [`ParamStore`] read-only, records every op as it is
//! evaluated and, on [`Graph::backward`], walks the tape in reverse to
//! produce gradients for the parameters that were used.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::loss::xent_row;
use super::tensor::{gemm_nn, gemm_nt, gemm_tn, Scalar, Tensor};
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Named model parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::ModelConfig(format!("duplicate parameter `{name}`")));
        }
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.tensors.push(tensor);
        Ok(ParamId(self.tensors.len() - 1))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.tensors[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<T>> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<T>)> {
        self.tensors
            .iter()
            .enumerate()
            .map(|(i, t)| (ParamId(i), self.names[i].as_str(), t))
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// All parameter values concatenated in registration order.
    pub fn flatten(&self) -> Vec<T> {
        self.tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    pub fn unflatten(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.num_values() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_values()
            )));
        }
        let mut offset = 0;
        for t in &mut self.tensors {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
            index: self.index.clone(),
        }
    }
}

/// Per-parameter gradients; `None` for parameters the graph never touched.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T> {
    pub tensors: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Grads<T> {
    pub fn empty(n: usize) -> Self {
        Self {
            tensors: vec![None; n],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.tensors[id.0].as_ref()
    }

    pub fn accumulate(&mut self, other: &Grads<T>) {
        for (mine, theirs) in self.tensors.iter_mut().zip(&other.tensors) {
            if let Some(t) = theirs {
                match mine {
                    Some(m) => m.add_assign(t),
                    None => *mine = Some(t.clone()),
                }
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for t in self.tensors.iter_mut().flatten() {
            t.scale_assign(s);
        }
    }

    /// Dense flat gradient aligned with [`ParamStore::flatten`].
    pub fn flatten(&self, params: &ParamStore<T>) -> Vec<T> {
        let mut out = Vec::with_capacity(params.num_values());
        for (id, _, p) in params.iter() {
            match &self.tensors[id.0] {
                Some(g) => out.extend_from_slice(g.data()),
                None => out.extend(std::iter::repeat_n(T::zero(), p.len())),
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    MatMulBt(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Scale(NodeId, T),
    Relu(NodeId),
    Gather(NodeId, Vec<usize>),
    LayerNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        xhat: Vec<T>,
        inv_std: Vec<T>,
    },
    Softmax(NodeId),
    SliceCols(NodeId, usize),
    ConcatCols(Vec<NodeId>),
    Dropout(NodeId, Vec<T>),
    Xent {
        logits: NodeId,
        grad: Tensor<T>,
    },
    WeightedSum(NodeId, Tensor<T>),
}

struct Node<T> {
    value: Option<Tensor<T>>,
    op: Op<T>,
}

pub struct Graph<'p, T: Scalar> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
    rng: Option<ChaCha8Rng>,
}

impl<'p, T: Scalar> Graph<'p, T> {
    /// Evaluation graph: dropout is the identity.
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            rng: None,
        }
    }

    /// Training graph drawing dropout masks from `rng`.
    pub fn with_dropout(params: &'p ParamStore<T>, rng: ChaCha8Rng) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            rng: Some(rng),
        }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn is_training(&self) -> bool {
        self.rng.is_some()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> NodeId {
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        let node = &self.nodes[id.0];
        match (&node.value, &node.op) {
            (Some(v), _) => v,
            (None, Op::Param(p)) => self.params.get(*p),
            _ => unreachable!("node without value"),
        }
    }

    fn dims(&self, id: NodeId) -> (usize, usize) {
        let v = self.value(id);
        (v.rows(), v.cols())
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, t: Tensor<T>) -> NodeId {
        self.push(t, Op::Leaf)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.dims(a);
        let (k2, n) = self.dims(b);
        if k != k2 {
            return Err(Error::Shape(format!("matmul [{m},{k}] x [{k2},{n}]")));
        }
        let mut out = Tensor::zeros(&[m, n]);
        gemm_nn(self.value(a).data(), self.value(b).data(), out.data_mut(), m, k, n);
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    /// `a * b^T`
    pub fn matmul_bt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.dims(a);
        let (n, k2) = self.dims(b);
        if k != k2 {
            return Err(Error::Shape(format!("matmul_bt [{m},{k}] x [{n},{k2}]^T")));
        }
        let mut out = Tensor::zeros(&[m, n]);
        gemm_nt(self.value(a).data(), self.value(b).data(), out.data_mut(), m, k, n);
        Ok(self.push(out, Op::MatMulBt(a, b)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::Shape(format!(
                "add {:?} + {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// Adds a `[1, n]` row to every row of `x`.
    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let (m, n) = self.dims(x);
        if self.value(bias).len() != n {
            return Err(Error::Shape(format!("bias of {} for width {n}", self.value(bias).len())));
        }
        let mut out = self.value(x).clone();
        let b = self.value(bias).data();
        for r in 0..m {
            for (o, &bv) in out.row_mut(r).iter_mut().zip(b) {
                *o = *o + bv;
            }
        }
        Ok(self.push(out, Op::AddBias(x, bias)))
    }

    pub fn scale(&mut self, x: NodeId, s: f64) -> NodeId {
        let s = T::of(s);
        let mut out = self.value(x).clone();
        out.scale_assign(s);
        self.push(out, Op::Scale(x, s))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            if *v < T::zero() {
                *v = T::zero();
            }
        }
        self.push(out, Op::Relu(x))
    }

    /// Rows `ids` of `table`.
    pub fn gather(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        let (v, d) = self.dims(table);
        let mut out = Tensor::zeros(&[ids.len(), d]);
        for (r, &id) in ids.iter().enumerate() {
            if id >= v {
                return Err(Error::Shape(format!("row {id} outside table of {v}")));
            }
            out.row_mut(r).copy_from_slice(self.value(table).row(id));
        }
        Ok(self.push(out, Op::Gather(table, ids.to_vec())))
    }

    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> Result<NodeId> {
        let (m, n) = self.dims(x);
        if self.value(gamma).len() != n || self.value(beta).len() != n {
            return Err(Error::Shape("layer norm affine width".into()));
        }
        let xv = self.value(x);
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let mut out = Tensor::zeros(&[m, n]);
        let mut xhat = vec![T::zero(); m * n];
        let mut inv_std = vec![T::zero(); m];
        let nf = T::of(n as f64);
        for r in 0..m {
            let row = xv.row(r);
            let mean = row.iter().copied().sum::<T>() / nf;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nf;
            let is = T::one() / (var + T::of(LN_EPS)).sqrt();
            inv_std[r] = is;
            let orow = out.row_mut(r);
            for c in 0..n {
                let h = (row[c] - mean) * is;
                xhat[r * n + c] = h;
                orow[c] = h * g[c] + b[c];
            }
        }
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        ))
    }

    /// Row-wise softmax. With `causal`, entry `(i, j)` for `j > i` is masked.
    pub fn softmax_rows(&mut self, x: NodeId, causal: bool) -> NodeId {
        let (m, n) = self.dims(x);
        let xv = self.value(x);
        let mut out = Tensor::zeros(&[m, n]);
        for r in 0..m {
            let limit = if causal { (r + 1).min(n) } else { n };
            let row = &xv.row(r)[..limit];
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let orow = out.row_mut(r);
            let mut z = T::zero();
            for c in 0..limit {
                let e = (row[c] - max).exp();
                orow[c] = e;
                z = z + e;
            }
            for o in &mut orow[..limit] {
                *o = *o / z;
            }
        }
        self.push(out, Op::Softmax(x))
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, width: usize) -> Result<NodeId> {
        let (m, n) = self.dims(x);
        if start + width > n {
            return Err(Error::Shape(format!("slice {start}+{width} of width {n}")));
        }
        let xv = self.value(x);
        let mut out = Tensor::zeros(&[m, width]);
        for r in 0..m {
            out.row_mut(r).copy_from_slice(&xv.row(r)[start..start + width]);
        }
        Ok(self.push(out, Op::SliceCols(x, start)))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let m = self.dims(parts[0]).0;
        if parts.iter().any(|p| self.dims(*p).0 != m) {
            return Err(Error::Shape("concat with mismatched rows".into()));
        }
        let n: usize = parts.iter().map(|p| self.dims(*p).1).sum();
        let mut out = Tensor::zeros(&[m, n]);
        for r in 0..m {
            let mut c = 0;
            for p in parts {
                let src = self.value(*p).row(r);
                out.row_mut(r)[c..c + src.len()].copy_from_slice(src);
                c += src.len();
            }
        }
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    /// Inverted dropout; identity outside training or when `p == 0`.
    pub fn dropout(&mut self, x: NodeId, p: f64) -> NodeId {
        if p <= 0.0 || self.rng.is_none() {
            return x;
        }
        let keep = T::of(1.0 / (1.0 - p));
        let n = self.value(x).len();
        let rng = self.rng.as_mut().expect("training graph");
        let mask: Vec<T> = (0..n)
            .map(|_| if rng.random::<f64>() < p { T::zero() } else { keep })
            .collect();
        let mut out = self.value(x).clone();
        for (o, m) in out.data_mut().iter_mut().zip(&mask) {
            *o = *o * *m;
        }
        self.push(out, Op::Dropout(x, mask))
    }

    /// Summed label-smoothed cross-entropy of `logits` rows against `targets`.
    pub fn xent(&mut self, logits: NodeId, targets: &[usize], smoothing: f64) -> Result<NodeId> {
        let (m, v) = self.dims(logits);
        if targets.len() != m {
            return Err(Error::Shape(format!("{} targets for {m} rows", targets.len())));
        }
        let lv = self.value(logits);
        lv.ensure_finite("logits")?;
        let mut grad = Tensor::zeros(&[m, v]);
        let mut total = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            if t >= v {
                return Err(Error::Shape(format!("target {t} outside vocabulary of {v}")));
            }
            total += xent_row(lv.row(r), t, smoothing, grad.row_mut(r));
        }
        Ok(self.push(Tensor::scalar(T::of(total)), Op::Xent { logits, grad }))
    }

    /// `sum(x * w)` for a constant `w` of the same shape.
    pub fn weighted_sum(&mut self, x: NodeId, w: Tensor<T>) -> Result<NodeId> {
        if self.value(x).len() != w.len() {
            return Err(Error::Shape("weighted sum size".into()));
        }
        let total: T = self.value(x).data().iter().zip(w.data()).map(|(&a, &b)| a * b).sum();
        Ok(self.push(Tensor::scalar(total), Op::WeightedSum(x, w)))
    }

    /// Gradients of `output` (a single value) scaled by `seed`.
    pub fn backward(&self, output: NodeId, seed: T) -> Result<Grads<T>> {
        if self.value(output).len() != 1 {
            return Err(Error::Shape("backward from a non-scalar node".into()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[output.0] = Some(Tensor::filled(self.value(output).shape(), seed));
        let mut out = Grads::empty(self.params.len());

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param(pid) => {
                    g.ensure_finite(self.params.name(*pid))?;
                    match &mut out.tensors[pid.0] {
                        Some(acc) => acc.add_assign(&g),
                        slot => *slot = Some(g),
                    }
                }
                Op::MatMul(a, b) => {
                    let (m, k) = self.dims(*a);
                    let n = self.dims(*b).1;
                    let av = self.value(*a).data();
                    let bv = self.value(*b).data();
                    let ga = acc(&mut grads, *a, &[m, k]);
                    gemm_nt(g.data(), bv, ga.data_mut(), m, n, k);
                    let gb = acc(&mut grads, *b, &[k, n]);
                    gemm_tn(av, g.data(), gb.data_mut(), m, k, n);
                }
                Op::MatMulBt(a, b) => {
                    let (m, k) = self.dims(*a);
                    let n = self.dims(*b).0;
                    let av = self.value(*a).data();
                    let bv = self.value(*b).data();
                    let ga = acc(&mut grads, *a, &[m, k]);
                    gemm_nn(g.data(), bv, ga.data_mut(), m, n, k);
                    let gb = acc(&mut grads, *b, &[n, k]);
                    gemm_tn(g.data(), av, gb.data_mut(), m, n, k);
                }
                Op::Add(a, b) => {
                    let shape = g.shape().to_vec();
                    acc(&mut grads, *a, &shape).add_assign(&g);
                    acc(&mut grads, *b, &shape).add_assign(&g);
                }
                Op::AddBias(x, bias) => {
                    let shape = g.shape().to_vec();
                    acc(&mut grads, *x, &shape).add_assign(&g);
                    let bshape = self.value(*bias).shape().to_vec();
                    let gb = acc(&mut grads, *bias, &bshape);
                    for r in 0..g.rows() {
                        for (o, &v) in gb.data_mut().iter_mut().zip(g.row(r)) {
                            *o = *o + v;
                        }
                    }
                }
                Op::Scale(x, s) => {
                    let gx = acc(&mut grads, *x, g.shape());
                    for (o, &v) in gx.data_mut().iter_mut().zip(g.data()) {
                        *o = *o + v * *s;
                    }
                }
                Op::Relu(x) => {
                    let y = node.value.as_ref().expect("relu value");
                    let gx = acc(&mut grads, *x, g.shape());
                    for ((o, &v), &yv) in gx.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                        if yv > T::zero() {
                            *o = *o + v;
                        }
                    }
                }
                Op::Gather(table, ids) => {
                    let shape = self.value(*table).shape().to_vec();
                    let gt = acc(&mut grads, *table, &shape);
                    for (r, &id) in ids.iter().enumerate() {
                        for (o, &v) in gt.row_mut(id).iter_mut().zip(g.row(r)) {
                            *o = *o + v;
                        }
                    }
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let (m, n) = (g.rows(), g.cols());
                    let gam = self.value(*gamma).data().to_vec();
                    let gshape = self.value(*gamma).shape().to_vec();
                    {
                        let gg = acc(&mut grads, *gamma, &gshape);
                        for r in 0..m {
                            for c in 0..n {
                                gg.data_mut()[c] = gg.data()[c] + g.at(r, c) * xhat[r * n + c];
                            }
                        }
                    }
                    {
                        let gb = acc(&mut grads, *beta, &gshape);
                        for r in 0..m {
                            for (o, &v) in gb.data_mut().iter_mut().zip(g.row(r)) {
                                *o = *o + v;
                            }
                        }
                    }
                    let gx = acc(&mut grads, *x, &[m, n]);
                    let nf = T::of(n as f64);
                    for r in 0..m {
                        let grow = g.row(r);
                        let h = &xhat[r * n..(r + 1) * n];
                        let mut mean_d = T::zero();
                        let mut mean_dh = T::zero();
                        for c in 0..n {
                            let d = grow[c] * gam[c];
                            mean_d = mean_d + d;
                            mean_dh = mean_dh + d * h[c];
                        }
                        mean_d = mean_d / nf;
                        mean_dh = mean_dh / nf;
                        let orow = gx.row_mut(r);
                        for c in 0..n {
                            let d = grow[c] * gam[c];
                            orow[c] = orow[c] + inv_std[r] * (d - mean_d - h[c] * mean_dh);
                        }
                    }
                }
                Op::Softmax(x) => {
                    let y = node.value.as_ref().expect("softmax value");
                    let gx = acc(&mut grads, *x, g.shape());
                    for r in 0..g.rows() {
                        let yr = y.row(r);
                        let gr = g.row(r);
                        let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                        for ((o, &yv), &gv) in gx.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *o = *o + yv * (gv - dot);
                        }
                    }
                }
                Op::SliceCols(x, start) => {
                    let shape = self.value(*x).shape().to_vec();
                    let gx = acc(&mut grads, *x, &shape);
                    let w = g.cols();
                    for r in 0..g.rows() {
                        for (o, &v) in gx.row_mut(r)[*start..*start + w].iter_mut().zip(g.row(r)) {
                            *o = *o + v;
                        }
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut c = 0;
                    for p in parts {
                        let shape = self.value(*p).shape().to_vec();
                        let w = self.value(*p).cols();
                        let gp = acc(&mut grads, *p, &shape);
                        for r in 0..g.rows() {
                            for (o, &v) in gp.row_mut(r).iter_mut().zip(&g.row(r)[c..c + w]) {
                                *o = *o + v;
                            }
                        }
                        c += w;
                    }
                }
                Op::Dropout(x, mask) => {
                    let gx = acc(&mut grads, *x, g.shape());
                    for ((o, &v), &m) in gx.data_mut().iter_mut().zip(g.data()).zip(mask) {
                        *o = *o + v * m;
                    }
                }
                Op::WeightedSum(x, w) => {
                    let s = g.data()[0];
                    let shape = self.value(*x).shape().to_vec();
                    let gx = acc(&mut grads, *x, &shape);
                    for (o, &v) in gx.data_mut().iter_mut().zip(w.data()) {
                        *o = *o + v * s;
                    }
                }
                Op::Xent { logits, grad } => {
                    let s = g.data()[0];
                    let gl = acc(&mut grads, *logits, grad.shape());
                    for (o, &v) in gl.data_mut().iter_mut().zip(grad.data()) {
                        *o = *o + v * s;
                    }
                }
            }
        }
        Ok(out)
    }
}

fn acc<'a, T: Scalar>(grads: &'a mut [Option<Tensor<T>>], id: NodeId, shape: &[usize]) -> &'a mut Tensor<T> {
    grads[id.0].get_or_insert_with(|| Tensor::zeros(shape))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::gradcheck::{gradient_check, GradCheckConfig};
    use rand::SeedableRng;

    type Builder = fn(&mut Graph<'_, f64>, &[NodeId]) -> Result<NodeId>;

    /// Checks `sum(w * op(inputs))` against central differences for random
    /// inputs of the given shapes.
    fn check_op(shapes: &[[usize; 2]], build: Builder, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::<f64>::new();
        for (i, s) in shapes.iter().enumerate() {
            store.add(format!("in{i}"), Tensor::randn(s, 1.0, &mut rng)).unwrap();
        }
        let out_shape = {
            let mut g = Graph::new(&store);
            let ins: Vec<_> = (0..shapes.len()).map(|i| g.param(ParamId(i))).collect();
            let out = build(&mut g, &ins).unwrap();
            g.value(out).shape().to_vec()
        };
        let weights = Tensor::<f64>::randn(&out_shape, 1.0, &mut rng);
        let eval = |flat: &[f64]| -> Result<(f64, Vec<f64>)> {
            let mut s = store.clone();
            s.unflatten(flat)?;
            let mut g = Graph::new(&s);
            let ins: Vec<_> = (0..shapes.len()).map(|i| g.param(ParamId(i))).collect();
            let out = build(&mut g, &ins)?;
            let total = g.weighted_sum(out, weights.clone())?;
            let grads = g.backward(total, 1.0)?;
            Ok((g.value(total).data()[0], grads.flatten(&s)))
        };
        let report = gradient_check(eval, &store.flatten(), &GradCheckConfig::default()).unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn matmul_grads() {
        check_op(&[[3, 4], [4, 2]], |g, i| g.matmul(i[0], i[1]), 1);
        check_op(&[[3, 4], [5, 4]], |g, i| g.matmul_bt(i[0], i[1]), 2);
    }

    #[test]
    fn elementwise_grads() {
        check_op(&[[3, 4], [3, 4]], |g, i| g.add(i[0], i[1]), 3);
        check_op(&[[3, 4], [1, 4]], |g, i| g.add_bias(i[0], i[1]), 4);
        check_op(&[[3, 4]], |g, i| Ok(g.scale(i[0], -0.7)), 5);
        check_op(&[[3, 4]], |g, i| Ok(g.relu(i[0])), 6);
    }

    #[test]
    fn structural_grads() {
        check_op(&[[5, 3]], |g, i| g.gather(i[0], &[4, 0, 4, 2]), 7);
        check_op(&[[3, 6]], |g, i| g.slice_cols(i[0], 2, 3), 8);
        check_op(&[[3, 2], [3, 3]], |g, i| g.concat_cols(&[i[0], i[1]]), 9);
    }

    #[test]
    fn normalization_grads() {
        check_op(&[[3, 5], [1, 5], [1, 5]], |g, i| g.layer_norm(i[0], i[1], i[2]), 10);
        check_op(&[[4, 4]], |g, i| Ok(g.softmax_rows(i[0], false)), 11);
        check_op(&[[4, 4]], |g, i| Ok(g.softmax_rows(i[0], true)), 12);
        check_op(&[[3, 3]], |g, i| Ok(g.softmax_rows(i[0], true)), 13);
    }

    #[test]
    fn xent_grads() {
        check_op(&[[3, 5]], |g, i| g.xent(i[0], &[1, 4, 0], 0.1), 14);
        check_op(&[[2, 6]], |g, i| g.xent(i[0], &[5, 5], 0.0), 15);
    }

    #[test]
    fn causal_softmax_masks_future() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("x", Tensor::zeros(&[3, 3])).unwrap();
        let mut g = Graph::new(&store);
        let x = g.param(id);
        let y = g.softmax_rows(x, true);
        let v = g.value(y);
        assert_eq!(v.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(v.row(1), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn dropout_is_identity_in_eval_and_replayable_in_training() {
        let mut store = ParamStore::<f32>::new();
        let id = store.add("x", Tensor::filled(&[4, 8], 1.0)).unwrap();
        let mut g = Graph::new(&store);
        let x = g.param(id);
        assert_eq!(g.dropout(x, 0.3), x);

        let run = || {
            let mut g = Graph::with_dropout(&store, ChaCha8Rng::seed_from_u64(5));
            let x = g.param(id);
            let y = g.dropout(x, 0.5);
            g.value(y).clone()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.data().iter().any(|v| *v == 0.0));
        assert!(a.data().iter().any(|v| *v == 2.0));
    }

    #[test]
    fn shape_errors() {
        let mut store = ParamStore::<f64>::new();
        let a = store.add("a", Tensor::zeros(&[2, 3])).unwrap();
        let b = store.add("b", Tensor::zeros(&[2, 3])).unwrap();
        assert!(store.add("a", Tensor::zeros(&[1, 1])).is_err());
        let mut g = Graph::new(&store);
        let (a, b) = (g.param(a), g.param(b));
        assert!(g.matmul(a, b).is_err());
        assert!(g.matmul_bt(a, b).is_ok());
        assert!(g.backward(a, 1.0).is_err());
    }
}
