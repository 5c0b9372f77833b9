use std::rc::Rc;

use super::attention::{self, KeySets};
use super::tensor::matmul_into;
use super::{Real, Tensor};
use crate::error::Result;
use crate::game::for_each_joint;

const NORM_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Compressed row lists: group `i` owns `indices[offsets[i]..offsets[i + 1]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Csr {
    pub offsets: Vec<usize>,
    pub indices: Vec<usize>,
}

impl Csr {
    pub fn from_groups<I: IntoIterator<Item = Vec<usize>>>(groups: I) -> Self {
        let mut offsets = vec![0];
        let mut indices = Vec::new();
        for g in groups {
            indices.extend(g);
            offsets.push(indices.len());
        }
        Csr { offsets, indices }
    }

    /// Contiguous groups of the given sizes.
    pub fn contiguous(sizes: &[usize]) -> Self {
        let mut offsets = vec![0];
        for &s in sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        let total = *offsets.last().unwrap();
        Csr {
            offsets,
            indices: (0..total).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn group(&self, i: usize) -> &[usize] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }
}

/// One fully observed game for the NE-gap operation; its marginals occupy
/// rows `action_offset..action_offset + sum(actions)` of the profile column.
#[derive(Clone, Debug, PartialEq)]
pub struct NeGapGame {
    pub action_offset: usize,
    pub actions: Vec<usize>,
    pub payoffs: Vec<f64>,
}

enum Op<F> {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Scale(Var, F),
    Gelu(Var),
    LayerNorm {
        x: Var,
        scale: Var,
        offset: Var,
        xhat: Tensor<F>,
        inv_std: Vec<F>,
    },
    GatherSum {
        x: Var,
        groups: Rc<Csr>,
    },
    ConcatCols(Var, Var),
    Reshape(Var),
    Attention {
        q: Var,
        k: Var,
        v: Var,
        keys: Rc<KeySets>,
        heads: usize,
        probs: Vec<F>,
    },
    SegmentSoftmax {
        x: Var,
        groups: Rc<Csr>,
    },
    SquaredError {
        pred: Var,
        target: Rc<Vec<F>>,
        weights: Rc<Vec<F>>,
    },
    SumAll(Var),
    NeGap {
        sigma: Var,
        games: Rc<Vec<NeGapGame>>,
        maximizers: Vec<(usize, usize)>,
    },
}

struct Node<F> {
    value: Tensor<F>,
    op: Op<F>,
    needs_grad: bool,
}

/// Reverse-mode tape.
pub struct Graph<F: Real> {
    nodes: Vec<Node<F>>,
}

impl<F: Real> Default for Graph<F> {
    fn default() -> Self {
        Graph::new()
    }
}

/// Gradients indexed by [`Var`]; `None` for nodes that do not need one.
pub struct Gradients<F> {
    grads: Vec<Option<Tensor<F>>>,
}

impl<F: Real> Gradients<F> {
    pub fn get(&self, v: Var) -> Option<&Tensor<F>> {
        self.grads[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<F>> {
        self.grads[v.0].take()
    }
}

/// `tanh` of the GELU inner argument.
fn gelu_tanh<F: Real>(x: F) -> F {
    (F::of(GELU_C) * (x + F::of(0.044_715) * x * x * x)).tanh_fast()
}

fn gelu_grad<F: Real>(x: F, t: F) -> F {
    let c = F::of(GELU_C);
    let a = F::of(0.044_715);
    let half = F::of(0.5);
    half * (F::one() + t) + half * x * (F::one() - t * t) * c * (F::one() + F::of(3.0) * a * x * x)
}

/// Per-player deviation values `u_p(a') = E_{a_-p}[G_p(a', a_-p)]` under `sigma`.
fn deviation_values(game: &NeGapGame, sigma: &[f64]) -> Vec<Vec<f64>> {
    let n = game.actions.len();
    let nj: usize = game.actions.iter().product();
    let starts: Vec<usize> = game
        .actions
        .iter()
        .scan(0, |s, &t| Some(std::mem::replace(s, *s + t)))
        .collect();
    let mut values: Vec<Vec<f64>> = game.actions.iter().map(|&t| vec![0.0; t]).collect();
    for_each_joint(&game.actions, |j, a| {
        for p in 0..n {
            let mut w = game.payoffs[p * nj + j];
            for q in 0..n {
                if q != p {
                    w *= sigma[starts[q] + a[q]];
                }
            }
            values[p][a[p]] += w;
        }
    });
    values
}

impl<F: Real> Graph<F> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    /// Differentiable input.
    pub fn param(&mut self, value: Tensor<F>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, value: Tensor<F>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// `[n, k] x [k, m]`.
    pub fn matmul(&mut self, a: Var, w: Var) -> Var {
        let out = self.value(a).matmul(false, self.value(w), false);
        let ng = self.needs(a) || self.needs(w);
        self.push(out, Op::MatMul(a, w), ng)
    }

    /// Adds a `[1, m]` row to every row of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Var {
        let (xv, bv) = (self.value(x), self.value(b));
        assert_eq!(bv.shape(), [1, xv.cols()], "bias shape");
        let mut out = xv.clone();
        for i in 0..out.rows() {
            for (o, &bb) in out.row_mut(i).iter_mut().zip(bv.data()) {
                *o += bb;
            }
        }
        let ng = self.needs(x) || self.needs(b);
        self.push(out, Op::AddBias(x, b), ng)
    }

    /// `x W + b`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Var {
        let h = self.matmul(x, w);
        self.add_bias(h, b)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        let ng = self.needs(a) || self.needs(b);
        self.push(out, Op::Add(a, b), ng)
    }

    pub fn scale(&mut self, x: Var, s: F) -> Var {
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v *= s);
        let ng = self.needs(x);
        self.push(out, Op::Scale(x, s), ng)
    }

    /// Tanh-approximated Gaussian error linear unit.
    pub fn gelu(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        let half = F::of(0.5);
        out.data_mut()
            .iter_mut()
            .for_each(|v| *v = half * *v * (F::one() + gelu_tanh(*v)));
        let ng = self.needs(x);
        self.push(out, Op::Gelu(x), ng)
    }

    /// Row-wise layer normalization with learned `[1, m]` scale and offset.
    pub fn layer_norm(&mut self, x: Var, scale: Var, offset: Var) -> Var {
        let xv = self.value(x);
        let (rows, cols) = (xv.rows(), xv.cols());
        let mut xhat = Tensor::zeros(rows, cols);
        let mut inv_std = vec![F::zero(); rows];
        let mut out = Tensor::zeros(rows, cols);
        let n = F::of(cols as f64);
        let (sv, ov) = (self.value(scale).data(), self.value(offset).data());
        for i in 0..rows {
            let row = xv.row(i);
            let mean = row.iter().copied().sum::<F>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / n;
            let is = F::one() / (var + F::of(NORM_EPS)).sqrt();
            inv_std[i] = is;
            let xh = xhat.row_mut(i);
            for (h, &v) in xh.iter_mut().zip(row) {
                *h = (v - mean) * is;
            }
            let o = out.row_mut(i);
            for c in 0..cols {
                o[c] = xh[c] * sv[c] + ov[c];
            }
        }
        let ng = self.needs(x) || self.needs(scale) || self.needs(offset);
        self.push(
            out,
            Op::LayerNorm {
                x,
                scale,
                offset,
                xhat,
                inv_std,
            },
            ng,
        )
    }

    /// Output row `i` is the sum of the rows of `x` listed in group `i`.
    pub fn gather_sum(&mut self, x: Var, groups: Rc<Csr>) -> Var {
        let xv = self.value(x);
        let mut out = Tensor::zeros(groups.len(), xv.cols());
        for i in 0..groups.len() {
            let o = out.row_mut(i);
            for &r in groups.group(i) {
                for (a, &b) in o.iter_mut().zip(xv.row(r)) {
                    *a += b;
                }
            }
        }
        let ng = self.needs(x);
        self.push(out, Op::GatherSum { x, groups }, ng)
    }

    /// Row gather: output row `i` is `x[rows[i]]`.
    pub fn gather(&mut self, x: Var, rows: &[usize]) -> Var {
        let groups = Rc::new(Csr {
            offsets: (0..=rows.len()).collect(),
            indices: rows.to_vec(),
        });
        self.gather_sum(x, groups)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.rows(), bv.rows(), "concat row counts");
        let cols = av.cols() + bv.cols();
        let mut data = Vec::with_capacity(av.rows() * cols);
        for i in 0..av.rows() {
            data.extend_from_slice(av.row(i));
            data.extend_from_slice(bv.row(i));
        }
        let ng = self.needs(a) || self.needs(b);
        self.push(
            Tensor::from_vec(av.rows(), cols, data),
            Op::ConcatCols(a, b),
            ng,
        )
    }

    /// Same row-major data viewed as `[rows, cols]`.
    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Var {
        let xv = self.value(x);
        assert_eq!(xv.len(), rows * cols, "reshape size");
        let out = Tensor::from_vec(rows, cols, xv.data().to_vec());
        let ng = self.needs(x);
        self.push(out, Op::Reshape(x), ng)
    }

    /// Multi-head masked attention; see [`KeySets`] for the masking rules.
    pub fn attention(
        &mut self,
        q: Var,
        k: Var,
        v: Var,
        keys: Rc<KeySets>,
        heads: usize,
    ) -> Result<Var> {
        attention::validate(self.value(q), self.value(k), self.value(v), &keys, heads)?;
        let (out, probs) =
            attention::forward(self.value(q), self.value(k), self.value(v), &keys, heads);
        let ng = self.needs(q) || self.needs(k) || self.needs(v);
        Ok(self.push(
            out,
            Op::Attention {
                q,
                k,
                v,
                keys,
                heads,
                probs,
            },
            ng,
        ))
    }

    /// Softmax of a column vector within each group of rows.
    pub fn segment_softmax(&mut self, x: Var, groups: Rc<Csr>) -> Var {
        let xv = self.value(x);
        assert_eq!(xv.cols(), 1, "segment_softmax expects a column");
        let mut out = Tensor::zeros(xv.rows(), 1);
        for g in 0..groups.len() {
            let rows = groups.group(g);
            let max = rows
                .iter()
                .map(|&r| xv.data()[r])
                .fold(F::neg_infinity(), F::max);
            let mut total = F::zero();
            for &r in rows {
                let e = (xv.data()[r] - max).exp();
                out.data_mut()[r] = e;
                total += e;
            }
            for &r in rows {
                out.data_mut()[r] /= total;
            }
        }
        let ng = self.needs(x);
        self.push(out, Op::SegmentSoftmax { x, groups }, ng)
    }

    /// `sum_i w_i (pred_i - target_i)^2` as a `[1, 1]` tensor.
    pub fn squared_error(&mut self, pred: Var, target: Rc<Vec<F>>, weights: Rc<Vec<F>>) -> Var {
        let pv = self.value(pred);
        assert_eq!(pv.len(), target.len(), "target length");
        assert_eq!(pv.len(), weights.len(), "weight length");
        let mut total = F::zero();
        for ((&p, &t), &w) in pv.data().iter().zip(target.iter()).zip(weights.iter()) {
            if w != F::zero() {
                total += w * (p - t) * (p - t);
            }
        }
        let ng = self.needs(pred);
        self.push(
            Tensor::scalar(total),
            Op::SquaredError {
                pred,
                target,
                weights,
            },
            ng,
        )
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let total = self.value(x).data().iter().copied().sum::<F>();
        let ng = self.needs(x);
        self.push(Tensor::scalar(total), Op::SumAll(x), ng)
    }

    /// Per-game `max_p delta_p(sigma)` for a column of marginals, `[games, 1]`.
    ///
    /// Expectations are exact contractions evaluated in `f64`; the gradient
    /// flows through the attained maximizing player and deviation.
    pub fn ne_gap(&mut self, sigma: Var, games: Rc<Vec<NeGapGame>>) -> Var {
        let sv = self.value(sigma);
        let mut out = Tensor::zeros(games.len(), 1);
        let mut maximizers = Vec::with_capacity(games.len());
        for (g, game) in games.iter().enumerate() {
            let total: usize = game.actions.iter().sum();
            let s: Vec<f64> = sv.data()[game.action_offset..game.action_offset + total]
                .iter()
                .map(|x| x.f64())
                .collect();
            let values = deviation_values(game, &s);
            let mut best = (f64::NEG_INFINITY, 0, 0);
            let mut start = 0;
            for (p, u) in values.iter().enumerate() {
                let current: f64 = u.iter().zip(&s[start..]).map(|(a, b)| a * b).sum();
                let (arg, top) =
                    u.iter()
                        .enumerate()
                        .fold(
                            (0, f64::NEG_INFINITY),
                            |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc },
                        );
                let gap = top - current;
                if gap > best.0 {
                    best = (gap, p, arg);
                }
                start += game.actions[p];
            }
            out.data_mut()[g] = F::of(best.0);
            maximizers.push((best.1, best.2));
        }
        let ng = self.needs(sigma);
        self.push(
            out,
            Op::NeGap {
                sigma,
                games,
                maximizers,
            },
            ng,
        )
    }

    /// Reverse pass from a `[1, 1]` output.
    pub fn backward(&self, output: Var) -> Gradients<F> {
        assert_eq!(
            self.value(output).shape(),
            [1, 1],
            "backward needs a scalar output"
        );
        let mut grads: Vec<Option<Tensor<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::scalar(F::one()));
        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &node.op, &g, &mut grads);
            grads[idx] = Some(g);
        }
        for (g, node) in grads.iter_mut().zip(&self.nodes) {
            if !matches!(node.op, Op::Leaf) || !node.needs_grad {
                *g = None;
            }
        }
        Gradients { grads }
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<F>>], v: Var, delta: Tensor<F>) {
        if !self.needs(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&delta),
            slot => *slot = Some(delta),
        }
    }

    fn accumulate_with(
        &self,
        grads: &mut [Option<Tensor<F>>],
        v: Var,
        f: impl FnOnce(&mut Tensor<F>),
    ) {
        if !self.needs(v) {
            return;
        }
        let shape = self.value(v).shape();
        let slot = grads[v.0].get_or_insert_with(|| Tensor::zeros(shape[0], shape[1]));
        f(slot);
    }

    fn propagate(&self, idx: usize, op: &Op<F>, g: &Tensor<F>, grads: &mut [Option<Tensor<F>>]) {
        match op {
            Op::Leaf => {}
            Op::MatMul(a, w) => {
                let (av, wv) = (self.value(*a), self.value(*w));
                self.accumulate_with(grads, *a, |t| matmul_into(g, false, wv, true, t, true));
                self.accumulate_with(grads, *w, |t| matmul_into(av, true, g, false, t, true));
            }
            Op::AddBias(x, b) => {
                self.accumulate(grads, *x, g.clone());
                self.accumulate_with(grads, *b, |t| {
                    for i in 0..g.rows() {
                        for (acc, &v) in t.data_mut().iter_mut().zip(g.row(i)) {
                            *acc += v;
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Scale(x, s) => {
                let mut d = g.clone();
                d.data_mut().iter_mut().for_each(|v| *v *= *s);
                self.accumulate(grads, *x, d);
            }
            Op::Reshape(x) => {
                let [r, c] = self.value(*x).shape();
                self.accumulate(grads, *x, Tensor::from_vec(r, c, g.data().to_vec()));
            }
            Op::Gelu(x) => {
                let mut d = g.clone();
                for (dv, &xv) in d.data_mut().iter_mut().zip(self.value(*x).data()) {
                    *dv *= gelu_grad(xv, gelu_tanh(xv));
                }
                self.accumulate(grads, *x, d);
            }
            Op::LayerNorm {
                x,
                scale,
                offset,
                xhat,
                inv_std,
            } => {
                let sv = self.value(*scale).data();
                let cols = g.cols();
                let n = F::of(cols as f64);
                self.accumulate_with(grads, *x, |t| {
                    let mut gs = vec![F::zero(); cols];
                    for i in 0..g.rows() {
                        let (gr, xh) = (g.row(i), xhat.row(i));
                        let mut mean_g = F::zero();
                        let mut mean_gx = F::zero();
                        for c in 0..cols {
                            gs[c] = gr[c] * sv[c];
                            mean_g += gs[c];
                            mean_gx += gs[c] * xh[c];
                        }
                        mean_g /= n;
                        mean_gx /= n;
                        let tr = t.row_mut(i);
                        for c in 0..cols {
                            tr[c] += inv_std[i] * (gs[c] - mean_g - xh[c] * mean_gx);
                        }
                    }
                });
                self.accumulate_with(grads, *scale, |t| {
                    for i in 0..g.rows() {
                        for ((acc, &gv), &h) in
                            t.data_mut().iter_mut().zip(g.row(i)).zip(xhat.row(i))
                        {
                            *acc += gv * h;
                        }
                    }
                });
                self.accumulate_with(grads, *offset, |t| {
                    for i in 0..g.rows() {
                        for (acc, &gv) in t.data_mut().iter_mut().zip(g.row(i)) {
                            *acc += gv;
                        }
                    }
                });
            }
            Op::GatherSum { x, groups } => {
                self.accumulate_with(grads, *x, |t| {
                    for i in 0..groups.len() {
                        let gr = g.row(i);
                        for &r in groups.group(i) {
                            for (acc, &v) in t.row_mut(r).iter_mut().zip(gr) {
                                *acc += v;
                            }
                        }
                    }
                });
            }
            Op::ConcatCols(a, b) => {
                let ac = self.value(*a).cols();
                self.accumulate_with(grads, *a, |t| {
                    for i in 0..g.rows() {
                        for (acc, &v) in t.row_mut(i).iter_mut().zip(&g.row(i)[..ac]) {
                            *acc += v;
                        }
                    }
                });
                self.accumulate_with(grads, *b, |t| {
                    for i in 0..g.rows() {
                        for (acc, &v) in t.row_mut(i).iter_mut().zip(&g.row(i)[ac..]) {
                            *acc += v;
                        }
                    }
                });
            }
            Op::Attention {
                q,
                k,
                v,
                keys,
                heads,
                probs,
            } => {
                let (dq, dk, dv) = attention::backward(
                    self.value(*q),
                    self.value(*k),
                    self.value(*v),
                    keys,
                    *heads,
                    probs,
                    g,
                );
                self.accumulate(grads, *q, dq);
                self.accumulate(grads, *k, dk);
                self.accumulate(grads, *v, dv);
            }
            Op::SegmentSoftmax { x, groups } => {
                let y = &self.nodes[idx].value;
                let mut d = Tensor::zeros(y.rows(), 1);
                for gi in 0..groups.len() {
                    let rows = groups.group(gi);
                    let dot: F = rows.iter().map(|&r| y.data()[r] * g.data()[r]).sum();
                    for &r in rows {
                        d.data_mut()[r] = y.data()[r] * (g.data()[r] - dot);
                    }
                }
                self.accumulate(grads, *x, d);
            }
            Op::SquaredError {
                pred,
                target,
                weights,
            } => {
                let pv = self.value(*pred);
                let s = g.item();
                let two = F::of(2.0);
                self.accumulate_with(grads, *pred, |t| {
                    for (i, acc) in t.data_mut().iter_mut().enumerate() {
                        let w = weights[i];
                        if w != F::zero() {
                            *acc += s * two * w * (pv.data()[i] - target[i]);
                        }
                    }
                });
            }
            Op::SumAll(x) => {
                let shape = self.value(*x).shape();
                self.accumulate(grads, *x, Tensor::full(shape[0], shape[1], g.item()));
            }
            Op::NeGap {
                sigma,
                games,
                maximizers,
            } => {
                let sv = self.value(*sigma);
                self.accumulate_with(grads, *sigma, |t| {
                    for ((game, &(pstar, astar)), &gout) in
                        games.iter().zip(maximizers).zip(g.data())
                    {
                        let upstream = gout.f64();
                        if upstream == 0.0 {
                            continue;
                        }
                        let total: usize = game.actions.iter().sum();
                        let off = game.action_offset;
                        let s: Vec<f64> = sv.data()[off..off + total]
                            .iter()
                            .map(|x| x.f64())
                            .collect();
                        let grad = ne_gap_gradient(game, &s, pstar, astar);
                        for (acc, d) in t.data_mut()[off..off + total].iter_mut().zip(grad) {
                            *acc += F::of(upstream * d);
                        }
                    }
                });
            }
        }
    }
}

/// Gradient of `u_{p*}(a*) - sum_a sigma_{p*}(a) u_{p*}(a)` with respect to every marginal.
fn ne_gap_gradient(game: &NeGapGame, sigma: &[f64], pstar: usize, astar: usize) -> Vec<f64> {
    let n = game.actions.len();
    let nj: usize = game.actions.iter().product();
    let starts: Vec<usize> = game
        .actions
        .iter()
        .scan(0, |s, &t| Some(std::mem::replace(s, *s + t)))
        .collect();
    let mut grad = vec![0.0; sigma.len()];
    let payoffs = &game.payoffs[pstar * nj..(pstar + 1) * nj];
    for_each_joint(&game.actions, |j, a| {
        let ap = a[pstar];
        let others: f64 = (0..n)
            .filter(|&q| q != pstar)
            .map(|q| sigma[starts[q] + a[q]])
            .product();
        // d/d sigma_{p*}(a_p): -u_{p*}(a_p) accumulates payoff * others.
        grad[starts[pstar] + ap] -= payoffs[j] * others;
        let coef = if ap == astar { 1.0 } else { 0.0 } - sigma[starts[pstar] + ap];
        if coef == 0.0 {
            return;
        }
        for q in (0..n).filter(|&q| q != pstar) {
            let w: f64 = (0..n)
                .filter(|&r| r != pstar && r != q)
                .map(|r| sigma[starts[r] + a[r]])
                .product();
            grad[starts[q] + a[q]] += payoffs[j] * coef * w;
        }
    });
    grad
}
