//! Reverse-mode differentiation over a linear operation record.
//!
//! Every operation appends a node holding its forward value. `backward`
//! walks the nodes in exact reverse order and accumulates gradients
//! additively, so a node consumed by several operations receives the sum of
//! their contributions. Parameter leaves borrow their tensors from the
//! [`ParamStore`] instead of copying them.

use std::borrow::Cow;
use std::collections::HashMap;

use super::ops::{leaky_relu_scalar, sigmoid_scalar, softmax_slice};
use super::params::{ParamId, ParamStore};
use super::tensor::{dot, matvec_into, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatVec(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    LeakyRelu(Var, f64),
    Ln(Var),
    Softmax(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Row(Var, usize),
    Dot(Var, Var),
    Sum(Var),
    WeightedSum(Var, Vec<Var>),
    Scatter(Var, Vec<(usize, usize, f64)>),
    Gather(Var, usize),
    Min(Var, Var),
    Norm(Var),
    ScaleBy(Var, Var),
}

struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
}

#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
    param_vars: HashMap<ParamId, Var>,
}

impl<'a> Tape<'a> {
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
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.item()
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn constant_ref(&mut self, t: &'a Tensor) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(t),
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf for a stored parameter. Repeated calls return the same node.
    pub fn param(&mut self, store: &'a ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        self.nodes.push(Node {
            value: Cow::Borrowed(store.get(id)),
            op: Op::Leaf,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars.insert(id, v);
        v
    }

    /// `W x` for a matrix `W` of shape `[rows, cols]` and a vector `x`.
    pub fn matvec(&mut self, w: Var, x: Var) -> Var {
        let wt = self.value(w);
        let (rows, cols) = (wt.rows(), wt.cols());
        assert_eq!(wt.shape().len(), 2, "matvec needs a matrix");
        assert_eq!(self.value(x).len(), cols, "matvec dimension mismatch");
        let mut out = vec![0.0; rows];
        matvec_into(wt.data(), rows, cols, self.data(x), &mut out);
        self.push(Tensor::vector(out), Op::MatVec(w, x))
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.len(), tb.len(), "elementwise length mismatch");
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let t = Tensor::new(ta.shape().to_vec(), data).expect("same shape");
        self.push(t, op)
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| f(x)).collect();
        let t = Tensor::new(ta.shape().to_vec(), data).expect("same shape");
        self.push(t, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, Op::Add(a, b), |x, y| x + y)
    }

    /// Sums a non-empty list left to right.
    pub fn add_all(&mut self, vars: &[Var]) -> Var {
        let mut acc = vars[0];
        for &v in &vars[1..] {
            acc = self.add(acc, v);
        }
        acc
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn min(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, Op::Min(a, b), f64::min)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, Op::Affine(a, c), |x| c * x)
    }

    /// `1 - a`, elementwise.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let one = self.constant(Tensor::new(
            self.value(a).shape().to_vec(),
            vec![1.0; self.value(a).len()],
        ).expect("shape"));
        self.sub(one, a)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, Op::Tanh(a), f64::tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, Op::Sigmoid(a), sigmoid_scalar)
    }

    pub fn leaky_relu(&mut self, a: Var, alpha: f64) -> Var {
        self.map(a, Op::LeakyRelu(a, alpha), |x| leaky_relu_scalar(x, alpha))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.map(a, Op::Ln(a), f64::ln)
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let cols = ta.cols();
        let mut out = vec![0.0; ta.len()];
        if cols > 0 {
            for (src, dst) in ta.data().chunks(cols).zip(out.chunks_mut(cols)) {
                softmax_slice(src, dst);
            }
        }
        let t = Tensor::new(ta.shape().to_vec(), out).expect("same shape");
        self.push(t, Op::Softmax(a))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.data(p));
        }
        self.push(Tensor::vector(data), Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Var {
        let data = self.data(a)[start..start + len].to_vec();
        self.push(Tensor::vector(data), Op::Slice(a, start))
    }

    /// Row `i` of a matrix as a vector.
    pub fn row(&mut self, m: Var, i: usize) -> Var {
        let data = self.value(m).row(i).to_vec();
        self.push(Tensor::vector(data), Op::Row(m, i))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).len(), self.value(b).len(), "dot length mismatch");
        let v = dot(self.data(a), self.data(b));
        self.push(Tensor::scalar(v), Op::Dot(a, b))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = self.data(a).iter().sum();
        self.push(Tensor::scalar(v), Op::Sum(a))
    }

    /// `Σ_k weights[k] · items[k]` for a weight vector and equal-length items.
    pub fn weighted_sum(&mut self, weights: Var, items: &[Var]) -> Var {
        let w = self.data(weights);
        assert_eq!(w.len(), items.len(), "weighted_sum arity mismatch");
        let n = self.value(items[0]).len();
        let mut out = vec![0.0; n];
        for (&wk, &item) in w.iter().zip(items) {
            for (o, x) in out.iter_mut().zip(self.data(item)) {
                *o += wk * x;
            }
        }
        self.push(Tensor::vector(out), Op::WeightedSum(weights, items.to_vec()))
    }

    /// Builds a vector of length `out_len` where each `(src, dst, w)` entry
    /// adds `w · a[src]` to `out[dst]`.
    pub fn scatter(&mut self, a: Var, entries: Vec<(usize, usize, f64)>, out_len: usize) -> Var {
        let src = self.data(a);
        let mut out = vec![0.0; out_len];
        for &(s, d, w) in &entries {
            out[d] += w * src[s];
        }
        self.push(Tensor::vector(out), Op::Scatter(a, entries))
    }

    pub fn gather(&mut self, a: Var, i: usize) -> Var {
        let v = self.data(a)[i];
        self.push(Tensor::scalar(v), Op::Gather(a, i))
    }

    /// Euclidean norm.
    pub fn norm(&mut self, a: Var) -> Var {
        let v = self.data(a).iter().map(|x| x * x).sum::<f64>().sqrt();
        self.push(Tensor::scalar(v), Op::Norm(a))
    }

    /// Multiplies every element of `a` by the scalar node `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Var {
        let c = self.scalar(s);
        self.map(a, Op::ScaleBy(a, s), |x| c * x)
    }

    /// Gradients of the scalar `root` with respect to every node.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let rv = self.value(root);
        if rv.len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("root must be scalar, has shape {:?}", rv.shape()),
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(vec![1.0]);

        fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
            grads[v.0].get_or_insert_with(|| vec![0.0; len])
        }

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = node.value.data();
            match &node.op {
                Op::Leaf => {}
                Op::MatVec(w, x) => {
                    let wt = self.value(*w);
                    let (rows, cols) = (wt.rows(), wt.cols());
                    let xd = self.data(*x);
                    {
                        let gw = acc(&mut grads, *w, rows * cols);
                        for r in 0..rows {
                            let gr = g[r];
                            if gr != 0.0 {
                                let row = &mut gw[r * cols..(r + 1) * cols];
                                for (o, xv) in row.iter_mut().zip(xd) {
                                    *o += gr * xv;
                                }
                            }
                        }
                    }
                    let gx = acc(&mut grads, *x, cols);
                    for r in 0..rows {
                        let gr = g[r];
                        if gr != 0.0 {
                            let row = &wt.data()[r * cols..(r + 1) * cols];
                            for (o, wv) in gx.iter_mut().zip(row) {
                                *o += gr * wv;
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    add_into(acc(&mut grads, *a, g.len()), &g, 1.0);
                    add_into(acc(&mut grads, *b, g.len()), &g, 1.0);
                }
                Op::Sub(a, b) => {
                    add_into(acc(&mut grads, *a, g.len()), &g, 1.0);
                    add_into(acc(&mut grads, *b, g.len()), &g, -1.0);
                }
                Op::Mul(a, b) => {
                    let (ad, bd) = (self.data(*a), self.data(*b));
                    let ga = acc(&mut grads, *a, g.len());
                    for i in 0..g.len() {
                        ga[i] += g[i] * bd[i];
                    }
                    let gb = acc(&mut grads, *b, g.len());
                    for i in 0..g.len() {
                        gb[i] += g[i] * ad[i];
                    }
                }
                Op::Affine(a, c) => add_into(acc(&mut grads, *a, g.len()), &g, *c),
                Op::Tanh(a) => {
                    let ga = acc(&mut grads, *a, g.len());
                    for i in 0..g.len() {
                        ga[i] += g[i] * (1.0 - y[i] * y[i]);
                    }
                }
                Op::Sigmoid(a) => {
                    let ga = acc(&mut grads, *a, g.len());
                    for i in 0..g.len() {
                        ga[i] += g[i] * y[i] * (1.0 - y[i]);
                    }
                }
                Op::LeakyRelu(a, alpha) => {
                    let xd = self.data(*a);
                    let ga = acc(&mut grads, *a, g.len());
                    for i in 0..g.len() {
                        ga[i] += g[i] * if xd[i] > 0.0 { 1.0 } else { *alpha };
                    }
                }
                Op::Ln(a) => {
                    let xd = self.data(*a);
                    let ga = acc(&mut grads, *a, g.len());
                    for i in 0..g.len() {
                        ga[i] += g[i] / xd[i];
                    }
                }
                Op::Softmax(a) => {
                    let cols = node.value.cols();
                    let ga = acc(&mut grads, *a, g.len());
                    for ((gr, yr), out) in g
                        .chunks(cols)
                        .zip(y.chunks(cols))
                        .zip(ga.chunks_mut(cols))
                    {
                        let s = dot(gr, yr);
                        for i in 0..cols {
                            out[i] += yr[i] * (gr[i] - s);
                        }
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.value(*p).len();
                        add_into(acc(&mut grads, *p, n), &g[off..off + n], 1.0);
                        off += n;
                    }
                }
                Op::Slice(a, start) => {
                    let n = self.value(*a).len();
                    let ga = acc(&mut grads, *a, n);
                    add_into(&mut ga[*start..*start + g.len()], &g, 1.0);
                }
                Op::Row(m, i) => {
                    let mt = self.value(*m);
                    let cols = mt.cols();
                    let gm = acc(&mut grads, *m, mt.len());
                    add_into(&mut gm[i * cols..(i + 1) * cols], &g, 1.0);
                }
                Op::Dot(a, b) => {
                    let (ad, bd) = (self.data(*a), self.data(*b));
                    add_into(acc(&mut grads, *a, bd.len()), bd, g[0]);
                    add_into(acc(&mut grads, *b, ad.len()), ad, g[0]);
                }
                Op::Sum(a) => {
                    let ga = acc(&mut grads, *a, self.value(*a).len());
                    for v in ga.iter_mut() {
                        *v += g[0];
                    }
                }
                Op::WeightedSum(weights, items) => {
                    let wd = self.data(*weights);
                    let mut gw = vec![0.0; items.len()];
                    for (k, item) in items.iter().enumerate() {
                        let xd = self.data(*item);
                        gw[k] = dot(&g, xd);
                        add_into(acc(&mut grads, *item, xd.len()), &g, wd[k]);
                    }
                    add_into(acc(&mut grads, *weights, gw.len()), &gw, 1.0);
                }
                Op::Scatter(a, entries) => {
                    let ga = acc(&mut grads, *a, self.value(*a).len());
                    for &(s, d, w) in entries {
                        ga[s] += w * g[d];
                    }
                }
                Op::Gather(a, i) => {
                    let ga = acc(&mut grads, *a, self.value(*a).len());
                    ga[*i] += g[0];
                }
                Op::Min(a, b) => {
                    let (ad, bd) = (self.data(*a), self.data(*b));
                    let mut gb = vec![0.0; g.len()];
                    {
                        let ga = acc(&mut grads, *a, g.len());
                        for i in 0..g.len() {
                            if ad[i] <= bd[i] {
                                ga[i] += g[i];
                            } else {
                                gb[i] = g[i];
                            }
                        }
                    }
                    add_into(acc(&mut grads, *b, g.len()), &gb, 1.0);
                }
                Op::Norm(a) => {
                    let ad = self.data(*a);
                    let n = y[0];
                    let ga = acc(&mut grads, *a, ad.len());
                    if n > 0.0 {
                        for i in 0..ad.len() {
                            ga[i] += g[0] * ad[i] / n;
                        }
                    }
                }
                Op::ScaleBy(a, s) => {
                    let ad = self.data(*a);
                    let c = self.scalar(*s);
                    add_into(acc(&mut grads, *a, ad.len()), &g, c);
                    let gs = dot(&g, ad);
                    acc(&mut grads, *s, 1)[0] += gs;
                }
            }
            if node.op_is_leaf() {
                grads[idx] = Some(g);
            }
        }

        let mut by_param = HashMap::new();
        for (id, var) in &self.param_vars {
            if let Some(g) = grads.get_mut(var.0).and_then(Option::take) {
                by_param.insert(*id, g);
            }
        }
        let leaves = grads;
        Ok(Gradients { leaves, by_param })
    }
}

impl Node<'_> {
    fn op_is_leaf(&self) -> bool {
        matches!(self.op, Op::Leaf)
    }
}

fn add_into(dst: &mut [f64], src: &[f64], c: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += c * s;
    }
}

/// Result of a backward pass.
pub struct Gradients {
    leaves: Vec<Option<Vec<f64>>>,
    by_param: HashMap<ParamId, Vec<f64>>,
}

impl Gradients {
    /// Gradient with respect to a leaf created by `constant`. Zero if the
    /// leaf does not influence the root.
    pub fn wrt(&self, tape: &Tape<'_>, v: Var) -> Tensor {
        let shape = tape.value(v).shape().to_vec();
        match self.leaves.get(v.0).and_then(|g| g.as_ref()) {
            Some(g) => Tensor::new(shape, g.clone()).expect("shape"),
            None => Tensor::zeros(&shape),
        }
    }

    /// Gradient for one parameter; exact zeros when it is off the path.
    pub fn param(&self, store: &ParamStore, id: ParamId) -> Tensor {
        let shape = store.get(id).shape();
        match self.by_param.get(&id) {
            Some(g) => Tensor::new(shape.to_vec(), g.clone()).expect("shape"),
            None => Tensor::zeros(shape),
        }
    }

    /// One gradient tensor per stored parameter, in store order.
    pub fn params(&self, store: &ParamStore) -> Vec<Tensor> {
        store.ids().map(|id| self.param(store, id)).collect()
    }
}
