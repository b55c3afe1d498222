//! Tape-based reverse-mode differentiation.
//!
//! Every op appends a node holding its output value. [`Graph::backward`]
//! walks the tape in reverse, accumulating gradients for every node that
//! depends on a differentiable leaf, then clears the tape. Handles into a
//! cleared tape are rejected with [`NnError::StaleGraph`].

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::kernels::{self, ConvGeom, Padding};
use crate::{NnError, Real, Result, Tensor};

/// Batch normalisation mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Normalise by batch statistics and record them for a running update.
    Train,
    /// Normalise by the stored running statistics.
    Eval,
}

/// Handle to a node on a [`Graph`] tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    id: usize,
    generation: u64,
}

/// Batch statistics seen by one train-mode batch norm, for
/// [`crate::ParamStore::apply_running_stats`].
#[derive(Clone, Debug, PartialEq)]
pub struct BnBatchStats<T> {
    pub name: String,
    pub mean: Vec<T>,
    /// Biased (population) variance over the normalised values.
    pub var: Vec<T>,
    /// Values per channel the statistics were taken over.
    pub count: usize,
}

enum Op<T> {
    Leaf,
    Conv2d {
        x: usize,
        w: usize,
        b: Option<usize>,
        geom: ConvGeom,
    },
    ConvT2 {
        x: usize,
        w: usize,
        b: Option<usize>,
    },
    BatchNorm {
        x: usize,
        gamma: usize,
        beta: usize,
        mean: Vec<T>,
        inv_std: Vec<T>,
        train: bool,
    },
    Relu(usize),
    Sigmoid(usize),
    AvgPool2(usize),
    Concat(Vec<usize>),
    Add(usize, usize),
    Mul(usize, usize),
    Scale(usize, T),
    Sum(usize),
    Mean(usize),
    Bce {
        pred: usize,
        target: Vec<T>,
        eps: T,
    },
}

struct Node<T> {
    value: Arc<Tensor<T>>,
    op: Op<T>,
    needs_grad: bool,
    param: Option<String>,
}

pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    generation: u64,
    bn_stats: Vec<BnBatchStats<T>>,
    track_kinks: bool,
    kinks: u64,
}

/// Gradients produced by one [`Graph::backward`] call.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    generation: u64,
    leaves: HashMap<usize, Vec<T>>,
    params: BTreeMap<String, Vec<T>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of the loss with respect to a differentiable leaf.
    pub fn wrt(&self, v: Var) -> Option<&[T]> {
        if v.generation != self.generation {
            return None;
        }
        self.leaves.get(&v.id).map(Vec::as_slice)
    }

    /// Gradient for a named parameter.
    pub fn param(&self, name: &str) -> Option<&[T]> {
        self.params.get(name).map(Vec::as_slice)
    }

    pub fn params(&self) -> impl Iterator<Item = (&str, &[T])> {
        self.params.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

const FNV_PRIME: u64 = 0x0000_0100_0000_01B3;
const FNV_OFFSET: u64 = 0xCBF2_9CE4_8422_2325;

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            generation: 0,
            bn_stats: Vec::new(),
            track_kinks: false,
            kinks: FNV_OFFSET,
        }
    }

    /// A graph that also hashes activation patterns; see
    /// [`Graph::kink_signature`].
    pub fn with_kink_tracking() -> Self {
        Graph {
            track_kinks: true,
            ..Self::new()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops the tape; outstanding handles become stale.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.bn_stats.clear();
        self.generation += 1;
        self.kinks = FNV_OFFSET;
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.push_shared(Arc::new(value), op, needs_grad)
    }

    fn push_shared(&mut self, value: Arc<Tensor<T>>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
            param: None,
        });
        Var {
            id: self.nodes.len() - 1,
            generation: self.generation,
        }
    }

    fn id(&self, v: Var) -> Result<usize> {
        if v.generation != self.generation || v.id >= self.nodes.len() {
            return Err(NnError::StaleGraph);
        }
        Ok(v.id)
    }

    fn node(&self, v: Var) -> Result<&Node<T>> {
        Ok(&self.nodes[self.id(v)?])
    }

    pub fn value(&self, v: Var) -> Result<&Tensor<T>> {
        Ok(&self.node(v)?.value)
    }

    /// Constant input: no gradient is tracked.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Differentiable input; its gradient is available through
    /// [`Gradients::wrt`].
    pub fn variable(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Named differentiable parameter.
    pub fn param(&mut self, name: &str, t: Tensor<T>) -> Var {
        self.param_shared(name, Arc::new(t))
    }

    /// Named differentiable parameter read without copying.
    pub fn param_shared(&mut self, name: &str, t: Arc<Tensor<T>>) -> Var {
        let v = self.push_shared(t, Op::Leaf, true);
        self.nodes[v.id].param = Some(name.to_owned());
        v
    }

    /// Statistics recorded by train-mode batch norms since the last clear.
    pub fn take_bn_stats(&mut self) -> Vec<BnBatchStats<T>> {
        std::mem::take(&mut self.bn_stats)
    }

    /// Hash of every ReLU activation pattern and BCE clamp pattern seen
    /// since the last clear, when tracking is enabled (constant otherwise). Two forward passes with equal signatures lie
    /// on the same smooth piece of the loss, which finite-difference checks
    /// rely on.
    pub fn kink_signature(&self) -> u64 {
        self.kinks
    }

    fn mix_pattern(&mut self, active: impl Iterator<Item = bool>) {
        if !self.track_kinks {
            return;
        }
        let mut h = self.kinks;
        let mut len = 0u64;
        for (i, a) in active.enumerate() {
            if a {
                h = (h ^ i as u64).wrapping_mul(FNV_PRIME);
            }
            len += 1;
        }
        self.kinks = (h ^ len).wrapping_mul(FNV_PRIME);
    }

    fn grad_flag(&self, ids: &[usize]) -> bool {
        ids.iter().any(|&i| self.nodes[i].needs_grad)
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, padding: Padding) -> Result<Var> {
        let (xi, wi) = (self.id(x)?, self.id(w)?);
        let bi = b.map(|b| self.id(b)).transpose()?;
        let geom = ConvGeom::new(
            self.nodes[xi].value.shape(),
            self.nodes[wi].value.shape(),
            stride,
            padding,
        )?;
        if let Some(bi) = bi {
            if self.nodes[bi].value.len() != geom.o {
                return Err(NnError::shape("conv2d", format!("bias needs {} values", geom.o)));
            }
        }
        let out = kernels::conv2d_forward(
            &geom,
            self.nodes[xi].value.data(),
            self.nodes[wi].value.data(),
            bi.map(|b| self.nodes[b].value.data()),
        );
        let mut ids = vec![xi, wi];
        ids.extend(bi);
        let ng = self.grad_flag(&ids);
        Ok(self.push(
            Tensor::new(geom.out_shape(), out)?,
            Op::Conv2d {
                x: xi,
                w: wi,
                b: bi,
                geom,
            },
            ng,
        ))
    }

    /// Transposed convolution, kernel 2, stride 2; `w` is `out x in x 2 x 2`.
    pub fn conv_transpose2(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xi, wi) = (self.id(x)?, self.id(w)?);
        let bi = b.map(|b| self.id(b)).transpose()?;
        let xs = self.nodes[xi].value.shape();
        let ws = self.nodes[wi].value.shape();
        if ws[2] != 2 || ws[3] != 2 {
            return Err(NnError::shape(
                "conv_transpose2",
                format!("only 2x2 kernels with stride 2 are supported, got {}x{}", ws[2], ws[3]),
            ));
        }
        if ws[1] != xs[1] {
            return Err(NnError::shape(
                "conv_transpose2",
                format!("input has {} channels, kernel expects {}", xs[1], ws[1]),
            ));
        }
        let o = ws[0];
        if let Some(bi) = bi {
            if self.nodes[bi].value.len() != o {
                return Err(NnError::shape("conv_transpose2", format!("bias needs {o} values")));
            }
        }
        let out = kernels::conv_transpose2_forward(
            xs,
            o,
            self.nodes[xi].value.data(),
            self.nodes[wi].value.data(),
            bi.map(|b| self.nodes[b].value.data()),
        );
        let mut ids = vec![xi, wi];
        ids.extend(bi);
        let ng = self.grad_flag(&ids);
        let shape = [xs[0], o, 2 * xs[2], 2 * xs[3]];
        Ok(self.push(Tensor::new(shape, out)?, Op::ConvT2 { x: xi, w: wi, b: bi }, ng))
    }

    /// Batch normalisation followed by the per-channel affine map.
    ///
    /// In [`Mode::Train`] the batch statistics are used and recorded under
    /// `name`; in [`Mode::Eval`] the running statistics are used.
    #[allow(clippy::too_many_arguments)]
    pub fn batch_norm(
        &mut self,
        name: &str,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: &[T],
        running_var: &[T],
        mode: Mode,
        eps: T,
    ) -> Result<Var> {
        let (xi, gi, bi) = (self.id(x)?, self.id(gamma)?, self.id(beta)?);
        let shape = self.nodes[xi].value.shape();
        let [n, c, h, w] = shape;
        for (what, len) in [
            ("gamma", self.nodes[gi].value.len()),
            ("beta", self.nodes[bi].value.len()),
            ("running mean", running_mean.len()),
            ("running var", running_var.len()),
        ] {
            if len != c {
                return Err(NnError::shape(
                    "batch_norm",
                    format!("{what} has {len} values, input {c} channels"),
                ));
            }
        }
        let (mean, var) = match mode {
            Mode::Train => {
                let (m, v) = kernels::channel_stats(shape, self.nodes[xi].value.data());
                self.bn_stats.push(BnBatchStats {
                    name: name.to_owned(),
                    mean: m.clone(),
                    var: v.clone(),
                    count: n * h * w,
                });
                (m, v)
            }
            Mode::Eval => (running_mean.to_vec(), running_var.to_vec()),
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let plane = h * w;
        let xd = self.nodes[xi].value.data();
        let (gd, bd) = (self.nodes[gi].value.data(), self.nodes[bi].value.data());
        let mut out = Vec::with_capacity(xd.len());
        for i in 0..n {
            for ch in 0..c {
                let scale = gd[ch] * inv_std[ch];
                let shift = bd[ch] - mean[ch] * scale;
                out.extend(xd[(i * c + ch) * plane..][..plane].iter().map(|&v| v * scale + shift));
            }
        }
        let ng = self.grad_flag(&[xi, gi, bi]);
        let op = Op::BatchNorm {
            x: xi,
            gamma: gi,
            beta: bi,
            mean,
            inv_std,
            train: mode == Mode::Train,
        };
        Ok(self.push(Tensor::new(shape, out)?, op, ng))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let xi = self.id(x)?;
        let t = self.nodes[xi].value.map(|v| if v > T::zero() { v } else { T::zero() });
        if self.track_kinks {
            let pattern: Vec<bool> = self.nodes[xi].value.data().iter().map(|&v| v > T::zero()).collect();
            self.mix_pattern(pattern.into_iter());
        }
        let ng = self.nodes[xi].needs_grad;
        Ok(self.push(t, Op::Relu(xi), ng))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let xi = self.id(x)?;
        let t = self.nodes[xi].value.map(|v| T::one() / (T::one() + (-v).exp()));
        let ng = self.nodes[xi].needs_grad;
        Ok(self.push(t, Op::Sigmoid(xi), ng))
    }

    /// 2x2 mean with stride 2; spatial dims must be even.
    pub fn avg_pool2(&mut self, x: Var) -> Result<Var> {
        let xi = self.id(x)?;
        let shape = self.nodes[xi].value.shape();
        let [n, c, h, w] = shape;
        if h % 2 != 0 || w % 2 != 0 || h == 0 || w == 0 {
            return Err(NnError::shape(
                "avg_pool2",
                format!("needs even spatial dims, got {h}x{w}"),
            ));
        }
        let out = kernels::avg_pool2_forward(shape, self.nodes[xi].value.data());
        let ng = self.nodes[xi].needs_grad;
        Ok(self.push(Tensor::new([n, c, h / 2, w / 2], out)?, Op::AvgPool2(xi), ng))
    }

    /// Channel concatenation in argument order.
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        let ids = xs.iter().map(|&v| self.id(v)).collect::<Result<Vec<_>>>()?;
        let parts: Vec<&Tensor<T>> = ids.iter().map(|&i| &*self.nodes[i].value).collect();
        let t = Tensor::concat_channels(&parts)?;
        let ng = self.grad_flag(&ids);
        Ok(self.push(t, Op::Concat(ids), ng))
    }

    fn same_shape(&self, op: &'static str, a: usize, b: usize) -> Result<()> {
        let (sa, sb) = (self.nodes[a].value.shape(), self.nodes[b].value.shape());
        if sa != sb {
            return Err(NnError::shape(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.id(a)?, self.id(b)?);
        self.same_shape("add", ai, bi)?;
        let data = self.nodes[ai]
            .value
            .data()
            .iter()
            .zip(self.nodes[bi].value.data())
            .map(|(&x, &y)| x + y)
            .collect();
        let t = Tensor::new(self.nodes[ai].value.shape(), data)?;
        let ng = self.grad_flag(&[ai, bi]);
        Ok(self.push(t, Op::Add(ai, bi), ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.id(a)?, self.id(b)?);
        self.same_shape("mul", ai, bi)?;
        let data = self.nodes[ai]
            .value
            .data()
            .iter()
            .zip(self.nodes[bi].value.data())
            .map(|(&x, &y)| x * y)
            .collect();
        let t = Tensor::new(self.nodes[ai].value.shape(), data)?;
        let ng = self.grad_flag(&[ai, bi]);
        Ok(self.push(t, Op::Mul(ai, bi), ng))
    }

    pub fn scale(&mut self, x: Var, s: T) -> Result<Var> {
        let xi = self.id(x)?;
        let t = self.nodes[xi].value.map(|v| v * s);
        let ng = self.nodes[xi].needs_grad;
        Ok(self.push(t, Op::Scale(xi, s), ng))
    }

    fn reduce(&mut self, x: Var, mean: bool) -> Result<Var> {
        let xi = self.id(x)?;
        let mut s = compensated_sum(self.nodes[xi].value.data().iter().copied());
        if mean {
            s /= T::of(self.nodes[xi].value.len() as f64);
        }
        let ng = self.nodes[xi].needs_grad;
        let op = if mean { Op::Mean(xi) } else { Op::Sum(xi) };
        Ok(self.push(Tensor::new([1, 1, 1, 1], vec![s])?, op, ng))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.reduce(x, false)
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        self.reduce(x, true)
    }

    /// Mean binary cross-entropy of `pred` against a fixed `target`, with
    /// predictions clamped to `[eps, 1 - eps]`.
    pub fn bce(&mut self, pred: Var, target: &Tensor<T>, eps: T) -> Result<Var> {
        let pi = self.id(pred)?;
        let p = &self.nodes[pi].value;
        if p.shape() != target.shape() {
            return Err(NnError::shape(
                "bce",
                format!("{:?} vs target {:?}", p.shape(), target.shape()),
            ));
        }
        let hi = T::one() - eps;
        let s = compensated_sum(p.data().iter().zip(target.data()).map(|(&pv, &t)| {
            let pc = pv.max(eps).min(hi);
            t * pc.ln() + (T::one() - t) * (T::one() - pc).ln()
        }));
        let loss = -s / T::of(p.len() as f64);
        if self.track_kinks {
            let pattern: Vec<bool> = p.data().iter().map(|&v| v > eps && v < hi).collect();
            self.mix_pattern(pattern.into_iter());
        }
        let ng = self.nodes[pi].needs_grad;
        let op = Op::Bce {
            pred: pi,
            target: target.data().to_vec(),
            eps,
        };
        Ok(self.push(Tensor::new([1, 1, 1, 1], vec![loss])?, op, ng))
    }

    /// Reverse sweep from a scalar `loss`; clears the tape afterwards.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        let li = self.id(loss)?;
        let shape = self.nodes[li].value.shape();
        if self.nodes[li].value.len() != 1 {
            return Err(NnError::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; li + 1];
        grads[li] = Some(vec![T::one()]);
        for id in (0..=li).rev() {
            let Some(gy) = grads[id].take() else { continue };
            if !self.nodes[id].needs_grad {
                continue;
            }
            if matches!(self.nodes[id].op, Op::Leaf) {
                grads[id] = Some(gy);
                continue;
            }
            self.backward_node(id, &gy, &mut grads);
        }
        let mut leaves = HashMap::new();
        let mut params = BTreeMap::new();
        for (id, g) in grads.into_iter().enumerate() {
            let Some(g) = g else { continue };
            let node = &self.nodes[id];
            if !matches!(node.op, Op::Leaf) || !node.needs_grad {
                continue;
            }
            match &node.param {
                Some(name) => {
                    params.insert(name.clone(), g);
                }
                None => {
                    leaves.insert(id, g);
                }
            }
        }
        let out = Gradients {
            generation: self.generation,
            leaves,
            params,
        };
        self.nodes.clear();
        self.generation += 1;
        self.kinks = FNV_OFFSET;
        Ok(out)
    }

    fn backward_node(&self, id: usize, gy: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[id];
        let mut acc = |i: usize, g: Vec<T>| {
            if !self.nodes[i].needs_grad {
                return;
            }
            match &mut grads[i] {
                Some(cur) => cur.iter_mut().zip(g).for_each(|(c, v)| *c += v),
                slot => *slot = Some(g),
            }
        };
        let val = |i: usize| &self.nodes[i].value;
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, geom } => {
                let need_dx = self.nodes[*x].needs_grad;
                let (dx, dw, db) = kernels::conv2d_backward(geom, val(*x).data(), val(*w).data(), gy, need_dx);
                if let Some(dx) = dx {
                    acc(*x, dx);
                }
                acc(*w, dw);
                if let Some(b) = b {
                    acc(*b, db);
                }
            }
            Op::ConvT2 { x, w, b } => {
                let need_dx = self.nodes[*x].needs_grad;
                let o = val(*w).shape()[0];
                let (dx, dw, db) =
                    kernels::conv_transpose2_backward(val(*x).shape(), o, val(*x).data(), val(*w).data(), gy, need_dx);
                if let Some(dx) = dx {
                    acc(*x, dx);
                }
                acc(*w, dw);
                if let Some(b) = b {
                    acc(*b, db);
                }
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                mean,
                inv_std,
                train,
            } => {
                let [n, c, h, w] = val(*x).shape();
                let plane = h * w;
                let m = T::of((n * plane) as f64);
                let xd = val(*x).data();
                let gd = val(*gamma).data();
                let mut dgamma = vec![T::zero(); c];
                let mut dbeta = vec![T::zero(); c];
                for i in 0..n {
                    for ch in 0..c {
                        let base = (i * c + ch) * plane;
                        let (mu, is) = (mean[ch], inv_std[ch]);
                        for k in base..base + plane {
                            dgamma[ch] += gy[k] * (xd[k] - mu) * is;
                            dbeta[ch] += gy[k];
                        }
                    }
                }
                if self.nodes[*x].needs_grad {
                    let mut dx = vec![T::zero(); gy.len()];
                    for i in 0..n {
                        for ch in 0..c {
                            let base = (i * c + ch) * plane;
                            let (mu, is) = (mean[ch], inv_std[ch]);
                            let s = gd[ch] * is;
                            for k in base..base + plane {
                                dx[k] = if *train {
                                    let xhat = (xd[k] - mu) * is;
                                    s * (gy[k] - (dbeta[ch] + xhat * dgamma[ch]) / m)
                                } else {
                                    s * gy[k]
                                };
                            }
                        }
                    }
                    acc(*x, dx);
                }
                acc(*gamma, dgamma);
                acc(*beta, dbeta);
            }
            Op::Relu(x) => {
                let dx = val(*x)
                    .data()
                    .iter()
                    .zip(gy)
                    .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
                    .collect();
                acc(*x, dx);
            }
            Op::Sigmoid(x) => {
                let dx = node
                    .value
                    .data()
                    .iter()
                    .zip(gy)
                    .map(|(&y, &g)| g * y * (T::one() - y))
                    .collect();
                acc(*x, dx);
            }
            Op::AvgPool2(x) => acc(*x, kernels::avg_pool2_backward(val(*x).shape(), gy)),
            Op::Concat(ids) => {
                let [n, _, h, w] = node.value.shape();
                let plane = h * w;
                let total = node.value.shape()[1];
                let mut offset = 0;
                for &i in ids {
                    let c = val(i).shape()[1];
                    if self.nodes[i].needs_grad {
                        let mut g = Vec::with_capacity(n * c * plane);
                        for b in 0..n {
                            g.extend_from_slice(&gy[(b * total + offset) * plane..][..c * plane]);
                        }
                        acc(i, g);
                    }
                    offset += c;
                }
            }
            Op::Add(a, b) => {
                acc(*a, gy.to_vec());
                acc(*b, gy.to_vec());
            }
            Op::Mul(a, b) => {
                let da = gy.iter().zip(val(*b).data()).map(|(&g, &v)| g * v).collect();
                let db = gy.iter().zip(val(*a).data()).map(|(&g, &v)| g * v).collect();
                acc(*a, da);
                acc(*b, db);
            }
            Op::Scale(x, s) => acc(*x, gy.iter().map(|&g| g * *s).collect()),
            Op::Sum(x) => acc(*x, vec![gy[0]; val(*x).len()]),
            Op::Mean(x) => {
                let len = val(*x).len();
                acc(*x, vec![gy[0] / T::of(len as f64); len]);
            }
            Op::Bce { pred, target, eps } => {
                let p = val(*pred).data();
                let scale = gy[0] / T::of(p.len() as f64);
                let hi = T::one() - *eps;
                let dp = p
                    .iter()
                    .zip(target)
                    .map(|(&pv, &t)| {
                        if pv > *eps && pv < hi {
                            -scale * (t / pv - (T::one() - t) / (T::one() - pv))
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                acc(*pred, dp);
            }
        }
    }
}

/// Neumaier-compensated sum in iteration order. Loss reductions run over
/// thousands of pixels; a plain running sum would carry tens of ulps of
/// rounding noise into the loss.
fn compensated_sum<T: Real>(xs: impl Iterator<Item = T>) -> T {
    let (mut s, mut c) = (T::zero(), T::zero());
    for x in xs {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}
