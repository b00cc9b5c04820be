use std::cell::{Ref, RefCell};

use rayon::prelude::*;

use super::kernels::{self, ConvGeom};
use super::Tensor;
use crate::error::{dim_err, Result};

enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    MatMul(usize, usize),
    BatchMatMul(usize, usize),
    Relu(usize),
    Sigmoid(usize),
    Tanh(usize),
    SoftmaxLast(usize),
    Sum(usize),
    Reshape(usize),
    Permute(usize, Vec<usize>),
    Concat(Vec<usize>, usize),
    Slice {
        x: usize,
        axis: usize,
        start: usize,
    },
    Conv2d {
        x: usize,
        kernel: usize,
        geom: ConvGeom,
    },
    BatchNorm {
        x: usize,
        gamma: usize,
        beta: usize,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only record of a forward computation.
///
/// Node ids are assigned in creation order, so every node's inputs precede
/// it and reverse id order is a valid topological order for the backward
/// pass.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

/// Gradients produced by [`Tape::backward`], indexed by node id.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    visits: Vec<u32>,
}

impl Gradients {
    pub fn get(&self, v: Var<'_>) -> Option<&Tensor> {
        self.grads.get(v.id).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, zeros when the root does not depend on it.
    pub fn wrt(&self, v: Var<'_>) -> Tensor {
        match self.get(v) {
            Some(g) => g.clone(),
            None => Tensor::zeros(&v.shape()),
        }
    }

    /// Number of times the backward pass processed each node.
    pub fn visit_counts(&self) -> &[u32] {
        &self.visits
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Registers a differentiable input.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// Registers an input that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn needs(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    /// Reverse pass from a scalar root.
    pub fn backward(&self, root: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        if nodes[root.id].value.len() != 1 {
            return dim_err(format!(
                "backward root must be scalar, got shape {:?}",
                nodes[root.id].value.shape()
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        let mut visits = vec![0u32; nodes.len()];
        grads[root.id] = Some(Tensor::full(nodes[root.id].value.shape(), 1.0));

        for id in (0..=root.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else {
                continue;
            };
            visits[id] += 1;
            backprop_node(&nodes, id, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads, visits })
    }
}

fn accumulate(nodes: &[Node], grads: &mut [Option<Tensor>], id: usize, data: Vec<f64>) {
    if !nodes[id].requires_grad {
        return;
    }
    match &mut grads[id] {
        Some(g) => {
            for (a, b) in g.data_mut().iter_mut().zip(data) {
                *a += b;
            }
        }
        slot @ None => {
            *slot = Some(Tensor {
                shape: nodes[id].value.shape().to_vec(),
                data,
            });
        }
    }
}

fn backprop_node(nodes: &[Node], id: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
    let out = &nodes[id].value;
    let gd = g.data();
    match &nodes[id].op {
        Op::Leaf => {}
        Op::Add(a, b) | Op::Sub(a, b) => {
            let sign = if matches!(nodes[id].op, Op::Sub(..)) { -1.0 } else { 1.0 };
            let ga = kernels::reduce_to_shape(gd, out.shape(), nodes[*a].value.shape());
            accumulate(nodes, grads, *a, ga);
            if nodes[*b].requires_grad {
                let mut gb = kernels::reduce_to_shape(gd, out.shape(), nodes[*b].value.shape());
                if sign < 0.0 {
                    gb.iter_mut().for_each(|v| *v = -*v);
                }
                accumulate(nodes, grads, *b, gb);
            }
        }
        Op::Mul(a, b) => {
            let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
            if nodes[*a].requires_grad {
                let prod = kernels::broadcast_binary(
                    out.shape(),
                    gd,
                    vb.shape(),
                    vb.data(),
                    out.shape(),
                    |x, y| x * y,
                );
                let ga = kernels::reduce_to_shape(&prod, out.shape(), va.shape());
                accumulate(nodes, grads, *a, ga);
            }
            if nodes[*b].requires_grad {
                let prod = kernels::broadcast_binary(
                    out.shape(),
                    gd,
                    va.shape(),
                    va.data(),
                    out.shape(),
                    |x, y| x * y,
                );
                let gb = kernels::reduce_to_shape(&prod, out.shape(), vb.shape());
                accumulate(nodes, grads, *b, gb);
            }
        }
        Op::Scale(a, c) => {
            accumulate(nodes, grads, *a, gd.iter().map(|v| v * c).collect());
        }
        Op::MatMul(a, b) => {
            let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
            let (m, k, n) = (va.shape()[0], va.shape()[1], vb.shape()[1]);
            if nodes[*a].requires_grad {
                let mut ga = vec![0.0; m * k];
                kernels::gemm_nt(gd, vb.data(), &mut ga, m, n, k);
                accumulate(nodes, grads, *a, ga);
            }
            if nodes[*b].requires_grad {
                let mut gb = vec![0.0; k * n];
                kernels::gemm_tn(va.data(), gd, &mut gb, m, k, n);
                accumulate(nodes, grads, *b, gb);
            }
        }
        Op::BatchMatMul(a, b) => {
            let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
            let (bs, m, k, n) = (va.shape()[0], va.shape()[1], va.shape()[2], vb.shape()[2]);
            if nodes[*a].requires_grad {
                let mut ga = vec![0.0; bs * m * k];
                for i in 0..bs {
                    kernels::gemm_nt(
                        &gd[i * m * n..(i + 1) * m * n],
                        &vb.data()[i * k * n..(i + 1) * k * n],
                        &mut ga[i * m * k..(i + 1) * m * k],
                        m,
                        n,
                        k,
                    );
                }
                accumulate(nodes, grads, *a, ga);
            }
            if nodes[*b].requires_grad {
                let mut gb = vec![0.0; bs * k * n];
                for i in 0..bs {
                    kernels::gemm_tn(
                        &va.data()[i * m * k..(i + 1) * m * k],
                        &gd[i * m * n..(i + 1) * m * n],
                        &mut gb[i * k * n..(i + 1) * k * n],
                        m,
                        k,
                        n,
                    );
                }
                accumulate(nodes, grads, *b, gb);
            }
        }
        Op::Relu(a) => {
            let x = nodes[*a].value.data();
            let ga = gd
                .iter()
                .zip(x)
                .map(|(&g, &x)| if x > 0.0 { g } else { 0.0 })
                .collect();
            accumulate(nodes, grads, *a, ga);
        }
        Op::Sigmoid(a) => {
            let ga = gd
                .iter()
                .zip(out.data())
                .map(|(&g, &y)| g * y * (1.0 - y))
                .collect();
            accumulate(nodes, grads, *a, ga);
        }
        Op::Tanh(a) => {
            let ga = gd
                .iter()
                .zip(out.data())
                .map(|(&g, &y)| g * (1.0 - y * y))
                .collect();
            accumulate(nodes, grads, *a, ga);
        }
        Op::SoftmaxLast(a) => {
            let n = *out.shape().last().unwrap_or(&1);
            let mut ga = vec![0.0; out.len()];
            for ((grow, yrow), orow) in gd
                .chunks(n)
                .zip(out.data().chunks(n))
                .zip(ga.chunks_mut(n))
            {
                let dot: f64 = grow.iter().zip(yrow).map(|(g, y)| g * y).sum();
                for ((o, &g), &y) in orow.iter_mut().zip(grow).zip(yrow) {
                    *o = y * (g - dot);
                }
            }
            accumulate(nodes, grads, *a, ga);
        }
        Op::Sum(a) => {
            accumulate(nodes, grads, *a, vec![gd[0]; nodes[*a].value.len()]);
        }
        Op::Reshape(a) => {
            accumulate(nodes, grads, *a, gd.to_vec());
        }
        Op::Permute(a, perm) => {
            let inv = kernels::inverse_perm(perm);
            let (_, ga) = kernels::permute(out.shape(), gd, &inv);
            accumulate(nodes, grads, *a, ga);
        }
        Op::Concat(parts, axis) => {
            let outer: usize = out.shape()[..*axis].iter().product();
            let inner: usize = out.shape()[axis + 1..].iter().product();
            let total = out.shape()[*axis];
            let mut offset = 0;
            for &p in parts {
                let len = nodes[p].value.shape()[*axis];
                if nodes[p].requires_grad {
                    let mut gp = Vec::with_capacity(outer * len * inner);
                    for o in 0..outer {
                        let base = (o * total + offset) * inner;
                        gp.extend_from_slice(&gd[base..base + len * inner]);
                    }
                    accumulate(nodes, grads, p, gp);
                }
                offset += len;
            }
        }
        Op::Slice { x, axis, start } => {
            let xs = nodes[*x].value.shape();
            let outer: usize = xs[..*axis].iter().product();
            let inner: usize = xs[axis + 1..].iter().product();
            let total = xs[*axis];
            let len = out.shape()[*axis];
            let mut gx = vec![0.0; nodes[*x].value.len()];
            for o in 0..outer {
                let dst = (o * total + start) * inner;
                let src = o * len * inner;
                gx[dst..dst + len * inner].copy_from_slice(&gd[src..src + len * inner]);
            }
            accumulate(nodes, grads, *x, gx);
        }
        Op::Conv2d { x, kernel, geom } => {
            conv2d_backward(nodes, *x, *kernel, geom, gd, grads);
        }
        Op::BatchNorm {
            x,
            gamma,
            beta,
            xhat,
            inv_std,
        } => {
            let c = inv_std.len();
            let count = (xhat.len() / c) as f64;
            let gam = nodes[*gamma].value.data();
            let mut dgamma = vec![0.0; c];
            let mut dbeta = vec![0.0; c];
            for (row_g, row_x) in gd.chunks(c).zip(xhat.chunks(c)) {
                for j in 0..c {
                    dgamma[j] += row_g[j] * row_x[j];
                    dbeta[j] += row_g[j];
                }
            }
            if nodes[*x].requires_grad {
                // dx = γ/σ · (g − mean(g) − x̂·mean(g·x̂))
                let gx: Vec<f64> = gd
                    .iter()
                    .zip(xhat)
                    .enumerate()
                    .map(|(i, (&g, &xh))| {
                        let j = i % c;
                        gam[j] * inv_std[j] * (g - dbeta[j] / count - xh * dgamma[j] / count)
                    })
                    .collect();
                accumulate(nodes, grads, *x, gx);
            }
            accumulate(nodes, grads, *gamma, dgamma);
            accumulate(nodes, grads, *beta, dbeta);
        }
    }
}

fn conv2d_forward(x: &Tensor, kernel: &Tensor, g: &ConvGeom) -> Vec<f64> {
    let c_out = kernel.shape()[0];
    let frame_in = g.c_in * g.h * g.w;
    let frames = x.len() / frame_in;
    let (rows, cols) = (g.col_rows(), g.col_cols());
    let per_frame: Vec<Vec<f64>> = (0..frames)
        .into_par_iter()
        .map(|f| {
            let mut col = vec![0.0; rows * cols];
            kernels::im2col(&x.data()[f * frame_in..(f + 1) * frame_in], g, &mut col);
            let mut out = vec![0.0; c_out * cols];
            kernels::gemm_nn(kernel.data(), &col, &mut out, c_out, rows, cols);
            out
        })
        .collect();
    per_frame.concat()
}

fn conv2d_backward(
    nodes: &[Node],
    x: usize,
    kernel: usize,
    g: &ConvGeom,
    gd: &[f64],
    grads: &mut [Option<Tensor>],
) {
    let xv = &nodes[x].value;
    let kv = &nodes[kernel].value;
    let c_out = kv.shape()[0];
    let frame_in = g.c_in * g.h * g.w;
    let frames = xv.len() / frame_in;
    let (rows, cols) = (g.col_rows(), g.col_cols());
    let need_x = nodes[x].requires_grad;
    let need_k = nodes[kernel].requires_grad;
    let per_frame: Vec<(Vec<f64>, Vec<f64>)> = (0..frames)
        .into_par_iter()
        .map(|f| {
            let gout = &gd[f * c_out * cols..(f + 1) * c_out * cols];
            let mut dk = Vec::new();
            if need_k {
                let mut col = vec![0.0; rows * cols];
                kernels::im2col(&xv.data()[f * frame_in..(f + 1) * frame_in], g, &mut col);
                dk = vec![0.0; c_out * rows];
                kernels::gemm_nt(gout, &col, &mut dk, c_out, cols, rows);
            }
            let mut dx = Vec::new();
            if need_x {
                let mut dcol = vec![0.0; rows * cols];
                kernels::gemm_tn(kv.data(), gout, &mut dcol, c_out, rows, cols);
                dx = vec![0.0; frame_in];
                kernels::col2im(&dcol, g, &mut dx);
            }
            (dk, dx)
        })
        .collect();
    if need_k {
        let mut dk = vec![0.0; kv.len()];
        for (fk, _) in &per_frame {
            for (a, b) in dk.iter_mut().zip(fk) {
                *a += b;
            }
        }
        accumulate(nodes, grads, kernel, dk);
    }
    if need_x {
        let dx: Vec<f64> = per_frame.into_iter().flat_map(|(_, fx)| fx).collect();
        accumulate(nodes, grads, x, dx);
    }
}

fn unary<'t>(v: Var<'t>, f: impl Fn(f64) -> f64, op: fn(usize) -> Op) -> Var<'t> {
    let value = v.value_ref().map(f);
    v.tape.push(value, op(v.id), v.requires_grad())
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    pub fn value_ref(&self) -> Ref<'t, Tensor> {
        Ref::map(self.tape.nodes.borrow(), |n| &n[self.id].value)
    }

    pub fn value(&self) -> Tensor {
        self.value_ref().clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value_ref().shape().to_vec()
    }

    fn binary(
        self,
        other: Var<'t>,
        name: &str,
        f: impl Fn(f64, f64) -> f64,
        op: fn(usize, usize) -> Op,
    ) -> Result<Var<'t>> {
        let value = {
            let a = self.value_ref();
            let b = other.value_ref();
            let Some(shape) = kernels::broadcast_shape(a.shape(), b.shape()) else {
                return dim_err(format!(
                    "{name}: cannot broadcast {:?} with {:?}",
                    a.shape(),
                    b.shape()
                ));
            };
            let data =
                kernels::broadcast_binary(a.shape(), a.data(), b.shape(), b.data(), &shape, f);
            Tensor { shape, data }
        };
        let rg = self.tape.needs(&[self.id, other.id]);
        Ok(self.tape.push(value, op(self.id, other.id), rg))
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "add", |a, b| a + b, Op::Add)
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "sub", |a, b| a - b, Op::Sub)
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "mul", |a, b| a * b, Op::Mul)
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        let value = self.value_ref().map(|v| v * c);
        self.tape
            .push(value, Op::Scale(self.id, c), self.requires_grad())
    }

    pub fn relu(self) -> Var<'t> {
        unary(self, |v| v.max(0.0), Op::Relu)
    }

    pub fn sigmoid(self) -> Var<'t> {
        unary(self, sigmoid, Op::Sigmoid)
    }

    pub fn tanh(self) -> Var<'t> {
        unary(self, f64::tanh, Op::Tanh)
    }

    /// Row-wise softmax over the last axis.
    pub fn softmax_lastdim(self) -> Var<'t> {
        let value = {
            let x = self.value_ref();
            let n = *x.shape().last().unwrap_or(&1);
            let mut data = Vec::with_capacity(x.len());
            for row in x.data().chunks(n) {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
                let total: f64 = exps.iter().sum();
                data.extend(exps.into_iter().map(|e| e / total));
            }
            Tensor {
                shape: x.shape().to_vec(),
                data,
            }
        };
        self.tape
            .push(value, Op::SoftmaxLast(self.id), self.requires_grad())
    }

    pub fn sum(self) -> Var<'t> {
        let value = Tensor::scalar(self.value_ref().sum());
        self.tape.push(value, Op::Sum(self.id), self.requires_grad())
    }

    pub fn mean(self) -> Var<'t> {
        let n = self.value_ref().len() as f64;
        self.sum().scale(1.0 / n)
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>> {
        let value = self.value_ref().reshape(shape)?;
        Ok(self
            .tape
            .push(value, Op::Reshape(self.id), self.requires_grad()))
    }

    pub fn permute(self, perm: &[usize]) -> Result<Var<'t>> {
        let value = self.value_ref().permute(perm)?;
        Ok(self.tape.push(
            value,
            Op::Permute(self.id, perm.to_vec()),
            self.requires_grad(),
        ))
    }

    /// Swaps the last two axes.
    pub fn transpose_last2(self) -> Result<Var<'t>> {
        let r = self.value_ref().rank();
        if r < 2 {
            return dim_err(format!("transpose of rank-{r} tensor"));
        }
        let mut perm: Vec<usize> = (0..r).collect();
        perm.swap(r - 2, r - 1);
        self.permute(&perm)
    }

    /// `[m×k] · [k×n]`.
    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        let value = self.value_ref().matmul(&other.value_ref())?;
        let rg = self.tape.needs(&[self.id, other.id]);
        Ok(self.tape.push(value, Op::MatMul(self.id, other.id), rg))
    }

    /// `[b×m×k] · [b×k×n]`, one product per leading index.
    pub fn bmm(self, other: Var<'t>) -> Result<Var<'t>> {
        let value = {
            let a = self.value_ref();
            let b = other.value_ref();
            let (sa, sb) = (a.shape(), b.shape());
            if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] || sa[2] != sb[1] {
                return dim_err(format!("bmm of {sa:?} and {sb:?}"));
            }
            let (bs, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
            let mut out = vec![0.0; bs * m * n];
            for i in 0..bs {
                kernels::gemm_nn(
                    &a.data()[i * m * k..(i + 1) * m * k],
                    &b.data()[i * k * n..(i + 1) * k * n],
                    &mut out[i * m * n..(i + 1) * m * n],
                    m,
                    k,
                    n,
                );
            }
            Tensor {
                shape: vec![bs, m, n],
                data: out,
            }
        };
        let rg = self.tape.needs(&[self.id, other.id]);
        Ok(self.tape.push(value, Op::BatchMatMul(self.id, other.id), rg))
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(parts: &[Var<'t>], axis: usize) -> Result<Var<'t>> {
        let Some(first) = parts.first() else {
            return dim_err("concat of an empty list");
        };
        let tape = first.tape;
        let value = {
            let vals: Vec<Ref<'_, Tensor>> = parts.iter().map(|p| p.value_ref()).collect();
            let base = vals[0].shape().to_vec();
            if axis >= base.len() {
                return dim_err(format!("concat axis {axis} out of range for {base:?}"));
            }
            let mut total = 0;
            for v in &vals {
                let s = v.shape();
                let compatible = s.len() == base.len()
                    && s.iter()
                        .zip(&base)
                        .enumerate()
                        .all(|(d, (a, b))| d == axis || a == b);
                if !compatible {
                    return dim_err(format!("concat of {base:?} with {s:?} on axis {axis}"));
                }
                total += s[axis];
            }
            let outer: usize = base[..axis].iter().product();
            let inner: usize = base[axis + 1..].iter().product();
            let mut data = Vec::with_capacity(outer * total * inner);
            for o in 0..outer {
                for v in &vals {
                    let len = v.shape()[axis] * inner;
                    data.extend_from_slice(&v.data()[o * len..(o + 1) * len]);
                }
            }
            let mut shape = base;
            shape[axis] = total;
            Tensor { shape, data }
        };
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        let rg = tape.needs(&ids);
        Ok(tape.push(value, Op::Concat(ids, axis), rg))
    }

    /// `len` entries along `axis` starting at `start`.
    pub fn slice(self, axis: usize, start: usize, len: usize) -> Result<Var<'t>> {
        let value = {
            let x = self.value_ref();
            let s = x.shape();
            if axis >= s.len() || len == 0 || start + len > s[axis] {
                return dim_err(format!(
                    "slice [{start}, {}) on axis {axis} of {s:?}",
                    start + len
                ));
            }
            let outer: usize = s[..axis].iter().product();
            let inner: usize = s[axis + 1..].iter().product();
            let mut data = Vec::with_capacity(outer * len * inner);
            for o in 0..outer {
                let base = (o * s[axis] + start) * inner;
                data.extend_from_slice(&x.data()[base..base + len * inner]);
            }
            let mut shape = s.to_vec();
            shape[axis] = len;
            Tensor { shape, data }
        };
        Ok(self.tape.push(
            value,
            Op::Slice {
                x: self.id,
                axis,
                start,
            },
            self.requires_grad(),
        ))
    }

    /// Index `i` along `axis`, dropping that axis.
    pub fn select(self, axis: usize, i: usize) -> Result<Var<'t>> {
        let s = self.slice(axis, i, 1)?;
        let mut shape = s.shape();
        shape.remove(axis);
        s.reshape(&shape)
    }

    /// Stacks equally shaped vars along a new `axis`.
    pub fn stack(parts: &[Var<'t>], axis: usize) -> Result<Var<'t>> {
        let expanded = parts
            .iter()
            .map(|p| {
                let mut s = p.shape();
                if axis > s.len() {
                    return dim_err(format!("stack axis {axis} out of range for {s:?}"));
                }
                s.insert(axis, 1);
                p.reshape(&s)
            })
            .collect::<Result<Vec<_>>>()?;
        Var::concat(&expanded, axis)
    }

    /// Cross-correlation with zero padding.
    ///
    /// `self` is `[c_in×h×w]` or a batch `[n×c_in×h×w]`; `kernel` is
    /// `[c_out×c_in×kh×kw]` with odd `kh`, `kw`.
    pub fn conv2d(self, kernel: Var<'t>, stride: usize, padding: usize) -> Result<Var<'t>> {
        let (value, geom) = {
            let x = self.value_ref();
            let k = kernel.value_ref();
            let (xs, ks) = (x.shape(), k.shape());
            let batched = match xs.len() {
                3 => false,
                4 => true,
                _ => return dim_err(format!("conv2d input must be rank 3 or 4, got {xs:?}")),
            };
            if ks.len() != 4 {
                return dim_err(format!("conv2d kernel must be rank 4, got {ks:?}"));
            }
            let (c_in, h, w) = if batched {
                (xs[1], xs[2], xs[3])
            } else {
                (xs[0], xs[1], xs[2])
            };
            let (c_out, kc, kh, kw) = (ks[0], ks[1], ks[2], ks[3]);
            if kc != c_in {
                return dim_err(format!("conv2d input {xs:?} vs kernel {ks:?}"));
            }
            if kh % 2 == 0 || kw % 2 == 0 {
                return dim_err(format!("conv2d kernel extents must be odd, got {ks:?}"));
            }
            if stride == 0 {
                return dim_err("conv2d stride must be positive");
            }
            if h + 2 * padding < kh || w + 2 * padding < kw {
                return dim_err(format!(
                    "conv2d output extent < 1: input {xs:?}, kernel {ks:?}, padding {padding}"
                ));
            }
            let ho = (h + 2 * padding - kh) / stride + 1;
            let wo = (w + 2 * padding - kw) / stride + 1;
            let geom = ConvGeom {
                c_in,
                h,
                w,
                kh,
                kw,
                stride,
                pad: padding,
                ho,
                wo,
            };
            let data = conv2d_forward(&x, &k, &geom);
            let shape = if batched {
                vec![xs[0], c_out, ho, wo]
            } else {
                vec![c_out, ho, wo]
            };
            (Tensor { shape, data }, geom)
        };
        let rg = self.tape.needs(&[self.id, kernel.id]);
        Ok(self.tape.push(
            value,
            Op::Conv2d {
                x: self.id,
                kernel: kernel.id,
                geom,
            },
            rg,
        ))
    }

    /// Training-mode batch normalization over the last (channel) axis.
    ///
    /// Statistics reduce over every leading position. Returns the output
    /// and the per-channel batch mean and biased variance.
    pub fn batchnorm(
        self,
        gamma: Var<'t>,
        beta: Var<'t>,
        eps: f64,
    ) -> Result<(Var<'t>, Vec<f64>, Vec<f64>)> {
        let (value, xhat, inv_std, mean, var) = {
            let x = self.value_ref();
            let c = *x.shape().last().unwrap_or(&0);
            let (gv, bv) = (gamma.value_ref(), beta.value_ref());
            if c == 0 || gv.shape() != [c] || bv.shape() != [c] {
                return dim_err(format!(
                    "batchnorm input {:?} with gamma {:?}, beta {:?}",
                    x.shape(),
                    gv.shape(),
                    bv.shape()
                ));
            }
            let count = (x.len() / c) as f64;
            let mut mean = vec![0.0; c];
            for row in x.data().chunks(c) {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= count);
            let mut var = vec![0.0; c];
            for row in x.data().chunks(c) {
                for j in 0..c {
                    let d = row[j] - mean[j];
                    var[j] += d * d;
                }
            }
            var.iter_mut().for_each(|v| *v /= count);
            let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
            let xhat: Vec<f64> = x
                .data()
                .iter()
                .enumerate()
                .map(|(i, v)| (v - mean[i % c]) * inv_std[i % c])
                .collect();
            let data = xhat
                .iter()
                .enumerate()
                .map(|(i, xh)| xh * gv.data()[i % c] + bv.data()[i % c])
                .collect();
            (
                Tensor {
                    shape: x.shape().to_vec(),
                    data,
                },
                xhat,
                inv_std,
                mean,
                var,
            )
        };
        let rg = self.tape.needs(&[self.id, gamma.id, beta.id]);
        let out = self.tape.push(
            value,
            Op::BatchNorm {
                x: self.id,
                gamma: gamma.id,
                beta: beta.id,
                xhat,
                inv_std,
            },
            rg,
        );
        Ok((out, mean, var))
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}
