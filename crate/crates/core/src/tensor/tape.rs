use std::borrow::Cow;
use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Gradients, ParameterSet, Tensor, TensorError};
use crate::real::Real;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<R> {
    Leaf,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine(Var, R),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    MaskedSoftmax(Var, Vec<bool>),
    Concat(Vec<Var>),
    Slice(Var, usize),
    StackRows(Vec<Var>),
    Embedding(Var, usize),
    Sum(Var, Option<usize>),
    Dropout(Var, Vec<R>),
    Cosine(Var, Var),
}

struct Node<'p, R: Real> {
    value: Cow<'p, Tensor<R>>,
    op: Op<R>,
}

/// Records primitives executed during one forward pass so that gradients can
/// be propagated back in reverse order.
///
/// Parameters are borrowed from a [`ParameterSet`] rather than copied. A tape
/// built with [`Tape::training`] applies dropout; otherwise dropout is the
/// identity.
pub struct Tape<'p, R: Real> {
    params: Option<&'p ParameterSet<R>>,
    nodes: Vec<Node<'p, R>>,
    param_vars: HashMap<String, Var>,
    dropout_rng: Option<ChaCha8Rng>,
}

impl<'p, R: Real> Default for Tape<'p, R> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p, R: Real> Tape<'p, R> {
    /// A tape with no parameters attached; useful for testing primitives.
    pub fn new() -> Self {
        Self {
            params: None,
            nodes: Vec::new(),
            param_vars: HashMap::new(),
            dropout_rng: None,
        }
    }

    /// Inference-mode tape reading from `params`.
    pub fn with_params(params: &'p ParameterSet<R>) -> Self {
        Self {
            params: Some(params),
            ..Self::new()
        }
    }

    /// Training-mode tape: dropout masks are drawn from `rng`.
    pub fn training(params: &'p ParameterSet<R>, rng: ChaCha8Rng) -> Self {
        Self {
            params: Some(params),
            dropout_rng: Some(rng),
            ..Self::new()
        }
    }

    pub fn is_training(&self) -> bool {
        self.dropout_rng.is_some()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<R> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<R>, op: Op<R>) -> Var {
        debug_assert!(value.is_finite(), "non-finite value produced");
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// A constant input; gradients flow into it but it is not a parameter.
    pub fn input(&mut self, value: Tensor<R>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn zeros(&mut self, shape: &[usize]) -> Var {
        self.input(Tensor::zeros(shape))
    }

    /// Leaf for the named parameter. Repeated calls return the same handle.
    pub fn param(&mut self, name: &str) -> Result<Var, TensorError> {
        if let Some(&v) = self.param_vars.get(name) {
            return Ok(v);
        }
        let params = self
            .params
            .ok_or_else(|| TensorError::UnknownParameter(name.to_string()))?;
        let value = params
            .value(name)
            .ok_or_else(|| TensorError::UnknownParameter(name.to_string()))?;
        self.nodes.push(Node {
            value: Cow::Borrowed(value),
            op: Op::Param,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars.insert(name.to_string(), v);
        Ok(v)
    }

    /// Matrix product with vectors treated as a row (left) or column (right):
    /// `[m,k]·[k,n]`, `[m,k]·[k]`, `[k]·[k,n]` and `[k]·[k]` (a scalar).
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.value(a), self.value(b));
        let (m, k, out_rows) = match av.shape() {
            [m, k] => (*m, *k, Some(*m)),
            [k] => (1, *k, None),
            _ => return Err(mismatch("matmul", av, bv)),
        };
        let (k2, n, out_cols) = match bv.shape() {
            [k2, n] => (*k2, *n, Some(*n)),
            [k2] => (*k2, 1, None),
            _ => return Err(mismatch("matmul", av, bv)),
        };
        if k != k2 {
            return Err(mismatch("matmul", av, bv));
        }
        let shape: Vec<usize> = out_rows.into_iter().chain(out_cols).collect();
        let (a_data, b_data) = (av.data(), bv.data());
        let mut out = vec![R::zero(); m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let x = a_data[i * k + p];
                let b_row = &b_data[p * n..(p + 1) * n];
                for (o, &w) in row.iter_mut().zip(b_row) {
                    *o += x * w;
                }
            }
        }
        Ok(self.push(Tensor { shape, data: out }, Op::MatMul(a, b)))
    }

    /// Elementwise sum. `b` may also be a vector broadcast over the rows of a matrix `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.value(a), self.value(b));
        let data: Vec<R> = if av.shape() == bv.shape() {
            av.data()
                .iter()
                .zip(bv.data())
                .map(|(&x, &y)| x + y)
                .collect()
        } else if av.rank() == 2 && bv.rank() == 1 && av.cols() == bv.len() {
            let c = av.cols();
            av.data()
                .iter()
                .enumerate()
                .map(|(i, &x)| x + bv.data()[i % c])
                .collect()
        } else {
            return Err(mismatch("add", av, bv));
        };
        let shape = av.shape().to_vec();
        Ok(self.push(Tensor { shape, data }, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(mismatch("sub", av, bv));
        }
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(&x, &y)| x - y)
            .collect();
        let shape = av.shape().to_vec();
        Ok(self.push(Tensor { shape, data }, Op::Sub(a, b)))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(mismatch("mul", av, bv));
        }
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(&x, &y)| x * y)
            .collect();
        let shape = av.shape().to_vec();
        Ok(self.push(Tensor { shape, data }, Op::Mul(a, b)))
    }

    /// `scale * a + shift`, elementwise.
    pub fn affine(&mut self, a: Var, scale: R, shift: R) -> Var {
        let value = self.value(a).map(|x| scale * x + shift);
        self.push(value, Op::Affine(a, scale))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.tanh());
        self.push(value, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(R::zero()));
        self.push(value, Op::Relu(a))
    }

    /// Softmax over the positions where `mask` is true; masked positions get exactly 0.
    pub fn masked_softmax(&mut self, a: Var, mask: &[bool]) -> Result<Var, TensorError> {
        let av = self.value(a);
        if av.rank() != 1 || av.len() != mask.len() {
            return Err(TensorError::ShapeMismatch {
                op: "masked_softmax",
                left: av.shape().to_vec(),
                right: vec![mask.len()],
            });
        }
        let data = masked_softmax(av.data(), mask)?;
        let shape = av.shape().to_vec();
        Ok(self.push(Tensor { shape, data }, Op::MaskedSoftmax(a, mask.to_vec())))
    }

    /// Concatenation of vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let mut data = Vec::new();
        for &p in parts {
            let v = self.value(p);
            if v.rank() != 1 {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    left: v.shape().to_vec(),
                    right: vec![],
                });
            }
            data.extend_from_slice(v.data());
        }
        if data.is_empty() {
            return Err(TensorError::Invalid("concat of nothing".into()));
        }
        Ok(self.push(Tensor::vector(data), Op::Concat(parts.to_vec())))
    }

    /// `len` consecutive entries of a vector starting at `start`.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let av = self.value(a);
        if av.rank() != 1 || start + len > av.len() || len == 0 {
            return Err(TensorError::ShapeMismatch {
                op: "slice",
                left: av.shape().to_vec(),
                right: vec![start, len],
            });
        }
        let data = av.data()[start..start + len].to_vec();
        Ok(self.push(Tensor::vector(data), Op::Slice(a, start)))
    }

    /// Stacks equally sized vectors as the rows of a matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var, TensorError> {
        let first = rows
            .first()
            .ok_or_else(|| TensorError::Invalid("stack of nothing".into()))?;
        let width = self.value(*first).len();
        let mut data = Vec::with_capacity(width * rows.len());
        for &r in rows {
            let v = self.value(r);
            if v.rank() != 1 || v.len() != width {
                return Err(mismatch("stack_rows", self.value(*first), v));
            }
            data.extend_from_slice(v.data());
        }
        let value = Tensor::matrix(rows.len(), width, data)?;
        Ok(self.push(value, Op::StackRows(rows.to_vec())))
    }

    /// Row `index` of an embedding table.
    pub fn embedding(&mut self, table: Var, index: usize) -> Result<Var, TensorError> {
        let tv = self.value(table);
        if tv.rank() != 2 {
            return Err(TensorError::Invalid(format!(
                "embedding table must be a matrix, got {:?}",
                tv.shape()
            )));
        }
        if index >= tv.rows() {
            return Err(TensorError::OutOfRange {
                index,
                len: tv.rows(),
            });
        }
        let data = tv.row(index).to_vec();
        Ok(self.push(Tensor::vector(data), Op::Embedding(table, index)))
    }

    /// Sum over every element (`axis = None`, giving a scalar) or over one axis of a matrix.
    pub fn sum(&mut self, a: Var, axis: Option<usize>) -> Result<Var, TensorError> {
        let av = self.value(a);
        let value = match axis {
            None => Tensor::scalar(av.data().iter().copied().sum()),
            Some(0) if av.rank() == 2 => {
                let mut out = vec![R::zero(); av.cols()];
                for i in 0..av.rows() {
                    for (o, &x) in out.iter_mut().zip(av.row(i)) {
                        *o += x;
                    }
                }
                Tensor::vector(out)
            }
            Some(1) if av.rank() == 2 => Tensor::vector(
                (0..av.rows())
                    .map(|i| av.row(i).iter().copied().sum())
                    .collect(),
            ),
            Some(ax) => {
                return Err(TensorError::Invalid(format!(
                    "cannot sum axis {ax} of shape {:?}",
                    av.shape()
                )))
            }
        };
        Ok(self.push(value, Op::Sum(a, axis)))
    }

    /// Inverted dropout at rate `p`. The identity unless the tape is in training mode.
    pub fn dropout(&mut self, a: Var, p: R) -> Var {
        if p <= R::zero() {
            return a;
        }
        let Some(rng) = self.dropout_rng.as_mut() else {
            return a;
        };
        let keep = R::one() - p;
        let scale = R::one() / keep;
        let p64 = p.to_f64_lossy();
        let n = self.nodes[a.0].value.len();
        let mask: Vec<R> = (0..n)
            .map(|_| {
                if rng.gen::<f64>() < p64 {
                    R::zero()
                } else {
                    scale
                }
            })
            .collect();
        self.dropout_with_mask(a, mask)
    }

    /// Dropout with an explicit per-element multiplier (0 or `1/(1-p)`).
    pub fn dropout_with_mask(&mut self, a: Var, mask: Vec<R>) -> Var {
        let av = self.value(a);
        assert_eq!(av.len(), mask.len(), "dropout mask length");
        let data = av.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        let shape = av.shape().to_vec();
        self.push(Tensor { shape, data }, Op::Dropout(a, mask))
    }

    /// Cosine similarity of two vectors; 0 when either has zero norm.
    pub fn cosine(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rank() != 1 || av.shape() != bv.shape() {
            return Err(mismatch("cosine", av, bv));
        }
        let c = cosine(av.data(), bv.data());
        Ok(self.push(Tensor::scalar(c), Op::Cosine(a, b)))
    }

    /// Gradient of the scalar `loss` with respect to every node on the tape.
    pub fn gradients(&self, loss: Var) -> Result<GradTable<R>, TensorError> {
        let lv = self.value(loss);
        if lv.rank() != 0 {
            return Err(TensorError::NotScalar(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<R>>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![R::one()]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(GradTable {
            grads,
            len: self.nodes.len(),
        })
    }

    /// Gradients for every parameter of the attached set; parameters the loss
    /// does not depend on get zeros.
    pub fn backward(&self, loss: Var) -> Result<Gradients<R>, TensorError> {
        let table = self.gradients(loss)?;
        let mut out = Gradients::default();
        if let Some(params) = self.params {
            for (name, p) in params.iter() {
                let g = match self.param_vars.get(name) {
                    Some(&v) => table.get(self, v),
                    None => Tensor::zeros(p.value.shape()),
                };
                out.insert(name.to_string(), g);
            }
        }
        Ok(out)
    }

    fn backprop_node(&self, i: usize, g: &[R], grads: &mut [Option<Vec<R>>]) {
        let node = &self.nodes[i];
        let out = node.value.data();
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k) = match av.shape() {
                    [m, k] => (*m, *k),
                    [k] => (1, *k),
                    _ => unreachable!(),
                };
                let n = if bv.rank() == 2 { bv.cols() } else { 1 };
                {
                    let ga = slot(grads, *a, av.len());
                    for i in 0..m {
                        let g_row = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let b_row = &bv.data()[p * n..(p + 1) * n];
                            let mut s = R::zero();
                            for (&x, &y) in g_row.iter().zip(b_row) {
                                s += x * y;
                            }
                            ga[i * k + p] += s;
                        }
                    }
                }
                let gb = slot(grads, *b, bv.len());
                for i in 0..m {
                    let g_row = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        let x = av.data()[i * k + p];
                        for (o, &y) in gb[p * n..(p + 1) * n].iter_mut().zip(g_row) {
                            *o += x * y;
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g);
                let bv = self.value(*b);
                if bv.len() == g.len() {
                    accumulate(grads, *b, g);
                } else {
                    let c = bv.len();
                    let gb = slot(grads, *b, c);
                    for (idx, &x) in g.iter().enumerate() {
                        gb[idx % c] += x;
                    }
                }
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g);
                let gb = slot(grads, *b, g.len());
                for (o, &x) in gb.iter_mut().zip(g) {
                    *o -= x;
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                {
                    let ga = slot(grads, *a, g.len());
                    for ((o, &x), &y) in ga.iter_mut().zip(g).zip(bv.data()) {
                        *o += x * y;
                    }
                }
                let gb = slot(grads, *b, g.len());
                for ((o, &x), &y) in gb.iter_mut().zip(g).zip(av.data()) {
                    *o += x * y;
                }
            }
            Op::Affine(a, scale) => {
                let ga = slot(grads, *a, g.len());
                for (o, &x) in ga.iter_mut().zip(g) {
                    *o += *scale * x;
                }
            }
            Op::Sigmoid(a) => {
                let ga = slot(grads, *a, g.len());
                for ((o, &x), &y) in ga.iter_mut().zip(g).zip(out) {
                    *o += x * y * (R::one() - y);
                }
            }
            Op::Tanh(a) => {
                let ga = slot(grads, *a, g.len());
                for ((o, &x), &y) in ga.iter_mut().zip(g).zip(out) {
                    *o += x * (R::one() - y * y);
                }
            }
            Op::Relu(a) => {
                let av = self.value(*a);
                let ga = slot(grads, *a, g.len());
                for ((o, &x), &inp) in ga.iter_mut().zip(g).zip(av.data()) {
                    if inp > R::zero() {
                        *o += x;
                    }
                }
            }
            Op::MaskedSoftmax(a, mask) => {
                let dot: R = g.iter().zip(out).map(|(&x, &y)| x * y).sum();
                let ga = slot(grads, *a, g.len());
                for (idx, o) in ga.iter_mut().enumerate() {
                    if mask[idx] {
                        *o += out[idx] * (g[idx] - dot);
                    }
                }
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    accumulate(grads, p, &g[offset..offset + n]);
                    offset += n;
                }
            }
            Op::Slice(a, start) => {
                let n = self.value(*a).len();
                let ga = slot(grads, *a, n);
                for (o, &x) in ga[*start..*start + g.len()].iter_mut().zip(g) {
                    *o += x;
                }
            }
            Op::StackRows(rows) => {
                let w = node.value.cols();
                for (r, &v) in rows.iter().enumerate() {
                    accumulate(grads, v, &g[r * w..(r + 1) * w]);
                }
            }
            Op::Embedding(table, row) => {
                let tv = self.value(*table);
                let w = tv.cols();
                let gt = slot(grads, *table, tv.len());
                for (o, &x) in gt[row * w..(row + 1) * w].iter_mut().zip(g) {
                    *o += x;
                }
            }
            Op::Sum(a, axis) => {
                let av = self.value(*a);
                let ga = slot(grads, *a, av.len());
                match axis {
                    None => {
                        for o in ga.iter_mut() {
                            *o += g[0];
                        }
                    }
                    Some(0) => {
                        let c = av.cols();
                        for (idx, o) in ga.iter_mut().enumerate() {
                            *o += g[idx % c];
                        }
                    }
                    Some(_) => {
                        let c = av.cols();
                        for (idx, o) in ga.iter_mut().enumerate() {
                            *o += g[idx / c];
                        }
                    }
                }
            }
            Op::Dropout(a, mask) => {
                let ga = slot(grads, *a, g.len());
                for ((o, &x), &m) in ga.iter_mut().zip(g).zip(mask) {
                    *o += x * m;
                }
            }
            Op::Cosine(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (da, db) = cosine_grad(av.data(), bv.data());
                let ga = slot(grads, *a, da.len());
                for (o, d) in ga.iter_mut().zip(&da) {
                    *o += g[0] * *d;
                }
                let gb = slot(grads, *b, db.len());
                for (o, d) in gb.iter_mut().zip(&db) {
                    *o += g[0] * *d;
                }
            }
        }
    }
}

/// Per-node gradients produced by [`Tape::gradients`].
pub struct GradTable<R> {
    grads: Vec<Option<Vec<R>>>,
    len: usize,
}

impl<R: Real> GradTable<R> {
    /// Gradient with respect to `v`, zeros when the loss does not depend on it.
    pub fn get(&self, tape: &Tape<'_, R>, v: Var) -> Tensor<R> {
        debug_assert!(v.0 < self.len);
        let shape = tape.value(v).shape().to_vec();
        match self.grads.get(v.0).and_then(|g| g.as_ref()) {
            Some(g) => Tensor {
                shape,
                data: g.clone(),
            },
            None => Tensor::zeros(&shape),
        }
    }
}

fn slot<R: Real>(grads: &mut [Option<Vec<R>>], v: Var, len: usize) -> &mut Vec<R> {
    grads[v.0].get_or_insert_with(|| vec![R::zero(); len])
}

fn accumulate<R: Real>(grads: &mut [Option<Vec<R>>], v: Var, g: &[R]) {
    let s = slot(grads, v, g.len());
    for (o, &x) in s.iter_mut().zip(g) {
        *o += x;
    }
}

fn mismatch<R: Real>(op: &'static str, a: &Tensor<R>, b: &Tensor<R>) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

/// Logistic function, evaluated without overflow for large negative inputs.
pub fn sigmoid<R: Real>(x: R) -> R {
    if x >= R::zero() {
        R::one() / (R::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (R::one() + e)
    }
}

/// Max-subtracted softmax over the unmasked entries of `scores`.
pub fn masked_softmax<R: Real>(scores: &[R], mask: &[bool]) -> Result<Vec<R>, TensorError> {
    let max = scores
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&s, _)| s)
        .fold(None, |acc: Option<R>, s| Some(acc.map_or(s, |a| a.max(s))))
        .ok_or(TensorError::AllMasked)?;
    let exps: Vec<R> = scores
        .iter()
        .zip(mask)
        .map(|(&s, &m)| if m { (s - max).exp() } else { R::zero() })
        .collect();
    let total: R = exps.iter().copied().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

pub fn cosine<R: Real>(a: &[R], b: &[R]) -> R {
    let dot: R = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let na = a.iter().map(|&x| x * x).sum::<R>().sqrt();
    let nb = b.iter().map(|&x| x * x).sum::<R>().sqrt();
    if na == R::zero() || nb == R::zero() {
        R::zero()
    } else {
        dot / (na * nb)
    }
}

fn cosine_grad<R: Real>(a: &[R], b: &[R]) -> (Vec<R>, Vec<R>) {
    let na = a.iter().map(|&x| x * x).sum::<R>().sqrt();
    let nb = b.iter().map(|&x| x * x).sum::<R>().sqrt();
    if na == R::zero() || nb == R::zero() {
        return (vec![R::zero(); a.len()], vec![R::zero(); b.len()]);
    }
    let c = cosine(a, b);
    let inv = R::one() / (na * nb);
    let da = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| y * inv - c * x / (na * na))
        .collect();
    let db = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| x * inv - c * y / (nb * nb))
        .collect();
    (da, db)
}
