//! Reverse-mode automatic differentiation on a recording tape.
//!
//! Every op appends a node holding its forward value and the inputs needed by
//! its backward rule. Nodes are appended in evaluation order, so a single
//! reverse sweep visits each node once, after all of its consumers.

use super::tensor::{self, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatVec(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddBias(Var, Var),
    Mul(Var, Var),
    Scale(Var, f32),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Embedding(Var, Vec<usize>),
    MeanRows(Var),
    Sigmoid(Var),
    Tanh(Var),
    LogSigmoid(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Floor(Var, f32),
    Sum(Var),
    Mean(Var),
    GeomScale(Var, Vec<f32>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every recorded value.
#[derive(Debug)]
pub struct Grads {
    grads: Vec<Option<Vec<f32>>>,
    shapes: Vec<Vec<usize>>,
}

impl Grads {
    /// Gradient of `var`; zeros when the loss does not depend on it.
    pub fn get(&self, var: Var) -> Tensor {
        let shape = self.shapes[var.0].clone();
        match &self.grads[var.0] {
            Some(g) => Tensor::new(shape, g.clone()).expect("gradient matches its value's shape"),
            None => Tensor::zeros(&shape),
        }
    }

    /// Add the gradient of `var` into `into`.
    pub fn accumulate(&self, var: Var, into: &mut Tensor) {
        if let Some(g) = &self.grads[var.0] {
            into.data_mut().iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
    }
}

fn mismatch(op: &str, a: &[usize], b: &[usize]) -> Error {
    Error::ShapeMismatch(format!("{op}: {a:?} vs {b:?}"))
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, name: &'static str) -> Result<Var> {
        if cfg!(debug_assertions) && !value.all_finite() {
            return Err(Error::NonFinite(name));
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, data: Vec<f32>) -> Var {
        self.leaf(Tensor::vector(data))
    }

    /// `[m, k] x [k, n] -> [m, n]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(mismatch("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let x = av[i * k + p];
                if x != 0.0 {
                    for (o, &y) in row.iter_mut().zip(&bv[p * n..(p + 1) * n]) {
                        *o += x * y;
                    }
                }
            }
        }
        self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), "matmul")
    }

    /// `[m, k] x [k] -> [m]`
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (sw, sx) = (self.shape(w), self.shape(x));
        if sw.len() != 2 || sx.len() != 1 || sw[1] != sx[0] {
            return Err(mismatch("matvec", sw, sx));
        }
        let (m, k) = (sw[0], sw[1]);
        let (wv, xv) = (self.value(w).data(), self.value(x).data());
        let out: Vec<f32> = (0..m)
            .map(|i| wv[i * k..(i + 1) * k].iter().zip(xv).map(|(a, b)| a * b).sum())
            .collect();
        self.push(Tensor::vector(out), Op::MatVec(w, x), "matvec")
    }

    fn zip_same(&mut self, a: Var, b: Var, op: Op, name: &'static str, f: impl Fn(f32, f32) -> f32) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(mismatch(name, va.shape(), vb.shape()));
        }
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        self.push(out, op, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, Op::Add(a, b), "add", |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, Op::Sub(a, b), "sub", |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, Op::Mul(a, b), "mul", |x, y| x * y)
    }

    /// Add a bias vector to every row of `a` (or to a vector `a`).
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(bias));
        if vb.shape().len() != 1 || va.last_dim() != vb.len() || va.shape().is_empty() {
            return Err(mismatch("add_bias", va.shape(), vb.shape()));
        }
        let n = vb.len();
        let data = va
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + vb.data()[i % n])
            .collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        self.push(out, Op::AddBias(a, bias), "add_bias")
    }

    pub fn scale(&mut self, a: Var, s: f32) -> Result<Var> {
        let va = self.value(a);
        let out = Tensor::new(va.shape().to_vec(), va.data().iter().map(|x| x * s).collect())?;
        self.push(out, Op::Scale(a, s), "scale")
    }

    /// Concatenate 1-D values.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut data = Vec::new();
        for &p in parts {
            let v = self.value(p);
            if v.shape().len() != 1 {
                return Err(mismatch("concat", v.shape(), &[]));
            }
            data.extend_from_slice(v.data());
        }
        self.push(Tensor::vector(data), Op::Concat(parts.to_vec()), "concat")
    }

    /// `a[start..start + len]` of a 1-D value.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let v = self.value(a);
        if v.shape().len() != 1 || start + len > v.len() {
            return Err(mismatch("slice", v.shape(), &[start, len]));
        }
        let out = Tensor::vector(v.data()[start..start + len].to_vec());
        self.push(out, Op::Slice(a, start), "slice")
    }

    /// Rows `ids` of a `[vocab, dim]` table, as `[ids.len(), dim]`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = self.value(table);
        if t.shape().len() != 2 {
            return Err(mismatch("embedding", t.shape(), &[]));
        }
        let (rows, dim) = (t.shape()[0], t.shape()[1]);
        let mut data = Vec::with_capacity(ids.len() * dim);
        for &id in ids {
            if id >= rows {
                return Err(Error::ShapeMismatch(format!("embedding id {id} >= {rows}")));
            }
            data.extend_from_slice(&t.data()[id * dim..(id + 1) * dim]);
        }
        let out = Tensor::new(vec![ids.len(), dim], data)?;
        self.push(out, Op::Embedding(table, ids.to_vec()), "embedding")
    }

    /// A single table row as a vector.
    pub fn embedding_row(&mut self, table: Var, id: usize) -> Result<Var> {
        let rows = self.embedding(table, &[id])?;
        // the mean of one row is the row, as a [d] vector
        self.mean_rows(rows)
    }

    /// Mean over the rows of `[n, d] -> [d]`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a);
        if v.shape().len() != 2 || v.shape()[0] == 0 {
            return Err(mismatch("mean_rows", v.shape(), &[]));
        }
        let (n, d) = (v.shape()[0], v.shape()[1]);
        let mut out = vec![0.0; d];
        for r in 0..n {
            out.iter_mut().zip(&v.data()[r * d..(r + 1) * d]).for_each(|(o, x)| *o += x);
        }
        out.iter_mut().for_each(|o| *o /= n as f32);
        self.push(Tensor::vector(out), Op::MeanRows(a), "mean_rows")
    }

    fn map(&mut self, a: Var, op: Op, name: &'static str, f: impl Fn(f32) -> f32) -> Result<Var> {
        let v = self.value(a);
        let out = Tensor::new(v.shape().to_vec(), v.data().iter().map(|&x| f(x)).collect())?;
        self.push(out, op, name)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.map(a, Op::Sigmoid(a), "sigmoid", tensor::sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.map(a, Op::Tanh(a), "tanh", f32::tanh)
    }

    pub fn log_sigmoid(&mut self, a: Var) -> Result<Var> {
        self.map(a, Op::LogSigmoid(a), "log_sigmoid", tensor::log_sigmoid)
    }

    /// `max(a, floor)` elementwise; the gradient is cut where the floor binds.
    pub fn floor(&mut self, a: Var, floor: f32) -> Result<Var> {
        self.map(a, Op::Floor(a, floor), "floor", |x| x.max(floor))
    }

    fn rowwise(&mut self, a: Var, op: Op, name: &'static str, f: fn(&[f32]) -> Vec<f32>) -> Result<Var> {
        let v = self.value(a);
        let d = v.last_dim();
        if d == 0 {
            return Err(mismatch(name, v.shape(), &[]));
        }
        let data: Vec<f32> = v.data().chunks(d).flat_map(f).collect();
        let out = Tensor::new(v.shape().to_vec(), data)?;
        self.push(out, op, name)
    }

    /// Softmax over the last dimension.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        self.rowwise(a, Op::Softmax(a), "softmax", tensor::softmax)
    }

    /// Log-softmax over the last dimension.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        self.rowwise(a, Op::LogSoftmax(a), "log_softmax", tensor::log_softmax)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a), "sum")
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a);
        if v.is_empty() {
            return Err(mismatch("mean", v.shape(), &[]));
        }
        let s = v.data().iter().sum::<f32>() / v.len() as f32;
        self.push(Tensor::scalar(s), Op::Mean(a), "mean")
    }

    /// Sum a list of scalars.
    pub fn add_all(&mut self, terms: &[Var]) -> Result<Var> {
        let mut iter = terms.iter();
        let first = *iter.next().ok_or_else(|| Error::ShapeMismatch("add_all of nothing".into()))?;
        iter.try_fold(first, |acc, &t| self.add(acc, t))
    }

    /// `bits[i] * p^(i / 2)` for a scalar `p`: the geometric scaling of a
    /// two-bits-per-step path vector.
    pub fn geom_scale(&mut self, bits: Vec<f32>, p: Var) -> Result<Var> {
        let pv = self.value(p);
        if !pv.is_scalar() {
            return Err(mismatch("geom_scale", pv.shape(), &[]));
        }
        let p0 = pv.item();
        let out = bits.iter().enumerate().map(|(i, &b)| b * p0.powi((i / 2) as i32)).collect();
        self.push(Tensor::vector(out), Op::GeomScale(p, bits), "geom_scale")
    }

    /// Gradients of the scalar `loss` with respect to every recorded value.
    pub fn backward(&self, loss: Var) -> Result<Grads> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::NotScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f32>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Grads { grads, shapes })
    }

    fn propagate(&self, idx: usize, g: &[f32], grads: &mut [Option<Vec<f32>>]) {
        let node = &self.nodes[idx];
        let out = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                let ga = grad_slot(grads, *a, m * k);
                for i in 0..m {
                    for p in 0..k {
                        ga[i * k + p] += (0..n).map(|j| g[i * n + j] * bv[p * n + j]).sum::<f32>();
                    }
                }
                let gb = grad_slot(grads, *b, k * n);
                for i in 0..m {
                    for p in 0..k {
                        let x = av[i * k + p];
                        for j in 0..n {
                            gb[p * n + j] += x * g[i * n + j];
                        }
                    }
                }
            }
            Op::MatVec(w, x) => {
                let sw = self.shape(*w);
                let (m, k) = (sw[0], sw[1]);
                let (wv, xv) = (self.value(*w).data(), self.value(*x).data());
                let gw = grad_slot(grads, *w, m * k);
                for i in 0..m {
                    let gi = g[i];
                    if gi != 0.0 {
                        for (o, &xj) in gw[i * k..(i + 1) * k].iter_mut().zip(xv) {
                            *o += gi * xj;
                        }
                    }
                }
                let gx = grad_slot(grads, *x, k);
                for i in 0..m {
                    let gi = g[i];
                    if gi != 0.0 {
                        for (o, &wij) in gx.iter_mut().zip(&wv[i * k..(i + 1) * k]) {
                            *o += gi * wij;
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                add_into(grad_slot(grads, *a, g.len()), g);
                add_into(grad_slot(grads, *b, g.len()), g);
            }
            Op::Sub(a, b) => {
                add_into(grad_slot(grads, *a, g.len()), g);
                let gb = grad_slot(grads, *b, g.len());
                gb.iter_mut().zip(g).for_each(|(o, x)| *o -= x);
            }
            Op::AddBias(a, bias) => {
                add_into(grad_slot(grads, *a, g.len()), g);
                let n = self.value(*bias).len();
                let gb = grad_slot(grads, *bias, n);
                for (i, &x) in g.iter().enumerate() {
                    gb[i % n] += x;
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                let ga = grad_slot(grads, *a, g.len());
                ga.iter_mut().zip(g.iter().zip(bv)).for_each(|(o, (x, y))| *o += x * y);
                let gb = grad_slot(grads, *b, g.len());
                gb.iter_mut().zip(g.iter().zip(av)).for_each(|(o, (x, y))| *o += x * y);
            }
            Op::Scale(a, s) => {
                let ga = grad_slot(grads, *a, g.len());
                ga.iter_mut().zip(g).for_each(|(o, x)| *o += s * x);
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    add_into(grad_slot(grads, p, n), &g[off..off + n]);
                    off += n;
                }
            }
            Op::Slice(a, start) => {
                let n = self.value(*a).len();
                let ga = grad_slot(grads, *a, n);
                add_into(&mut ga[*start..*start + g.len()], g);
            }
            Op::Embedding(table, ids) => {
                let t = self.value(*table);
                let dim = t.shape()[1];
                let gt = grad_slot(grads, *table, t.len());
                for (r, &id) in ids.iter().enumerate() {
                    add_into(&mut gt[id * dim..(id + 1) * dim], &g[r * dim..(r + 1) * dim]);
                }
            }
            Op::MeanRows(a) => {
                let v = self.value(*a);
                let (n, d) = (v.shape()[0], v.shape()[1]);
                let ga = grad_slot(grads, *a, n * d);
                for r in 0..n {
                    ga[r * d..(r + 1) * d]
                        .iter_mut()
                        .zip(g)
                        .for_each(|(o, x)| *o += x / n as f32);
                }
            }
            Op::Sigmoid(a) => {
                let ga = grad_slot(grads, *a, g.len());
                for i in 0..g.len() {
                    ga[i] += g[i] * out[i] * (1.0 - out[i]);
                }
            }
            Op::Tanh(a) => {
                let ga = grad_slot(grads, *a, g.len());
                for i in 0..g.len() {
                    ga[i] += g[i] * (1.0 - out[i] * out[i]);
                }
            }
            Op::LogSigmoid(a) => {
                let av = self.value(*a).data();
                let ga = grad_slot(grads, *a, g.len());
                for i in 0..g.len() {
                    ga[i] += g[i] * tensor::sigmoid(-av[i]);
                }
            }
            Op::Floor(a, floor) => {
                let av = self.value(*a).data();
                let ga = grad_slot(grads, *a, g.len());
                for i in 0..g.len() {
                    if av[i] > *floor {
                        ga[i] += g[i];
                    }
                }
            }
            Op::Softmax(a) => {
                let d = node.value.last_dim();
                let ga = grad_slot(grads, *a, g.len());
                for (r, (gr, yr)) in g.chunks(d).zip(out.chunks(d)).enumerate() {
                    let dot: f32 = gr.iter().zip(yr).map(|(x, y)| x * y).sum();
                    for j in 0..d {
                        ga[r * d + j] += yr[j] * (gr[j] - dot);
                    }
                }
            }
            Op::LogSoftmax(a) => {
                let d = node.value.last_dim();
                let ga = grad_slot(grads, *a, g.len());
                for (r, (gr, yr)) in g.chunks(d).zip(out.chunks(d)).enumerate() {
                    let total: f32 = gr.iter().sum();
                    for j in 0..d {
                        ga[r * d + j] += gr[j] - yr[j].exp() * total;
                    }
                }
            }
            Op::Sum(a) => {
                let n = self.value(*a).len();
                grad_slot(grads, *a, n).iter_mut().for_each(|o| *o += g[0]);
            }
            Op::Mean(a) => {
                let n = self.value(*a).len();
                let s = g[0] / n as f32;
                grad_slot(grads, *a, n).iter_mut().for_each(|o| *o += s);
            }
            Op::GeomScale(p, bits) => {
                let p0 = self.value(*p).item();
                let dp: f32 = bits
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i / 2 > 0)
                    .map(|(i, &b)| {
                        let k = (i / 2) as i32;
                        g[i] * b * k as f32 * p0.powi(k - 1)
                    })
                    .sum();
                grad_slot(grads, *p, 1)[0] += dp;
            }
        }
    }
}

fn grad_slot(grads: &mut [Option<Vec<f32>>], v: Var, len: usize) -> &mut Vec<f32> {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f32], src: &[f32]) {
    dst.iter_mut().zip(src).for_each(|(o, x)| *o += x);
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_matmul() {
        let mut tape = Tape::new();
        let eye = tape.leaf(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let x = tape.leaf(Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let y = tape.matmul(eye, x).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::new();
        let x = tape.constant(vec![1.0, -2.0, 3.0]);
        let s = tape.sum(x).unwrap();
        assert_eq!(tape.backward(s).unwrap().get(x).data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn square_gradient_is_twice_x() {
        let mut tape = Tape::new();
        let x = tape.constant(vec![1.0, -2.0, 3.0]);
        let xx = tape.mul(x, x).unwrap();
        let s = tape.sum(xx).unwrap();
        assert_eq!(tape.backward(s).unwrap().get(x).data(), &[2.0, -4.0, 6.0]);
    }

    #[test]
    fn unused_leaf_gets_zero_gradient() {
        let mut tape = Tape::new();
        let x = tape.constant(vec![1.0, 2.0]);
        let unused = tape.constant(vec![5.0, 5.0, 5.0]);
        let s = tape.sum(x).unwrap();
        assert_eq!(tape.backward(s).unwrap().get(unused), Tensor::zeros(&[3]));
    }

    #[test]
    fn backward_needs_a_scalar() {
        let mut tape = Tape::new();
        let x = tape.constant(vec![1.0, 2.0]);
        assert!(matches!(tape.backward(x), Err(Error::NotScalarLoss(_))));
    }

    #[test]
    fn shape_errors() {
        let mut tape = Tape::new();
        let a = tape.constant(vec![1.0, 2.0]);
        let b = tape.constant(vec![1.0, 2.0, 3.0]);
        assert!(matches!(tape.add(a, b), Err(Error::ShapeMismatch(_))));
        assert!(matches!(tape.matvec(a, b), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(2, 3, vec![0.0, 0.0, 0.0, 1.0, 2.0, 3.0]).unwrap());
        let y = tape.softmax(x).unwrap();
        for row in tape.value(y).data().chunks(3) {
            assert_abs_diff_eq!(row.iter().sum::<f32>(), 1.0, epsilon = 1e-6);
        }
        assert_abs_diff_eq!(tape.value(y).data()[0], 1.0 / 3.0, epsilon = 1e-7);
    }

    #[test]
    fn sigmoid_at_zero() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(0.0));
        let y = tape.sigmoid(x).unwrap();
        assert_eq!(tape.value(y).item(), 0.5);
    }

    #[test]
    fn embedding_row_is_a_vector() {
        let mut tape = Tape::new();
        let table = tape.leaf(Tensor::matrix(3, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap());
        let row = tape.embedding_row(table, 2).unwrap();
        assert_eq!(tape.value(row).shape(), &[2]);
        assert_eq!(tape.value(row).data(), &[4.0, 5.0]);
        let s = tape.sum(row).unwrap();
        assert_eq!(tape.backward(s).unwrap().get(table).data(), &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
    }
}
