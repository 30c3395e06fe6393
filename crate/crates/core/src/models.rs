//! Sign-equivariant and sign-invariant architectures and edge decoders.
//!
//! Every model is a plain description (widths, names) plus a [`ParamTree`]
//! holding its weights. A forward pass binds the tree onto a [`Tape`] and
//! threads the resulting [`Bound`] handles through the layer functions.
//!
//! Tensor layouts:
//!
//! | model                  | input          | output          |
//! |------------------------|----------------|-----------------|
//! | [`Mlp`]                | `[.., in]`     | `[.., out]`     |
//! | [`SignEqElementwise`]  | `[.., k]`      | `[.., k]`       |
//! | [`SignNet`]            | `[n, k]`       | `[n, out]`      |
//! | [`SignEqLayer`]        | `[B, n, k]`    | `[B, n', k]`    |
//! | [`Dss`]                | `[B, N, d, k]` | `[B, N, d', k]` |
//! | [`PairDecoder`]        | `[P, 2, k]`    | `[P]`           |
//!
//! The sign group always acts on the last axis.

use std::collections::BTreeMap;
use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::ColumnwiseLinear;
use crate::rng;
use crate::tensor::{adam_step, AdamState, Csr, Grads, Tape, Tensor, TensorError, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("width mismatch in {layer}: expected {expected}, got {got}")]
    Width { layer: String, expected: usize, got: usize },
    #[error("shape mismatch in {layer}: expected {expected}, got {got:?}")]
    Shape {
        layer: String,
        expected: String,
        got: Vec<usize>,
    },
    #[error("missing parameter {0}")]
    MissingParam(String),
    #[error("no width fits a budget of {budget} parameters (smallest model has {smallest})")]
    Budget { budget: usize, smallest: usize },
    #[error("invalid model: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

// ---------------------------------------------------------------------------
// parameters

/// Named parameter tensors, iterated in key order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamTree {
    params: BTreeMap<String, Tensor>,
}

/// Tape handles for the parameters of one forward pass.
#[derive(Debug, Clone, Default)]
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| ModelError::MissingParam(name.to_string()))
    }
}

impl ParamTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.params.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.params.values()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    pub fn merge(&mut self, other: ParamTree) {
        self.params.extend(other.params);
    }

    /// Registers every parameter on the tape as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        let vars = self
            .params
            .iter()
            .map(|(k, t)| (k.clone(), tape.param(t.clone())))
            .collect();
        Bound { vars }
    }

    /// Registers every parameter as a constant (no gradients).
    pub fn bind_frozen(&self, tape: &mut Tape) -> Bound {
        let vars = self
            .params
            .iter()
            .map(|(k, t)| (k.clone(), tape.constant(t.clone())))
            .collect();
        Bound { vars }
    }

    /// Pairs existing tape handles with parameter names, in key order.
    pub fn bind_vars(&self, vars: &[Var]) -> Result<Bound> {
        if vars.len() != self.params.len() {
            return Err(ModelError::Invalid(format!(
                "{} handles for {} parameters",
                vars.len(),
                self.params.len()
            )));
        }
        Ok(Bound {
            vars: self.params.keys().cloned().zip(vars.iter().copied()).collect(),
        })
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.params.values().flat_map(|t| t.data().iter().copied()).collect()
    }

    pub fn unflatten(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.count() {
            return Err(ModelError::Invalid(format!(
                "{} values for {} parameters",
                flat.len(),
                self.count()
            )));
        }
        let mut off = 0;
        for t in self.params.values_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Gradients of all parameters in key order, zeros where none flowed.
    pub fn gradient(&self, grads: &Grads, bound: &Bound) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.count());
        for (name, t) in &self.params {
            out.extend(grads.get_or_zeros(bound.get(name)?, t.len()));
        }
        Ok(out)
    }
}

/// Adam over a whole [`ParamTree`].
#[derive(Debug, Clone)]
pub struct Optimizer {
    state: AdamState,
    pub lr: f64,
}

impl Optimizer {
    pub fn new(tree: &ParamTree, lr: f64) -> Self {
        Optimizer {
            state: AdamState::new(tree.count()),
            lr,
        }
    }

    pub fn step(&mut self, tree: &mut ParamTree, grads: &Grads, bound: &Bound) -> Result<()> {
        let g = tree.gradient(grads, bound)?;
        let mut flat = tree.flatten();
        adam_step(&mut flat, &g, &mut self.state, self.lr)?;
        tree.unflatten(&flat)
    }
}

fn init_uniform(shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Tensor {
    let a = 1.0 / (fan_in.max(1) as f64).sqrt();
    rng::uniform_tensor(shape, -a, a, rng)
}

/// Largest width `w` in `1..=max` with `count(w) <= budget`, assuming `count`
/// is nondecreasing.
pub fn solve_width(budget: usize, max: usize, count: impl Fn(usize) -> usize) -> Result<usize> {
    if count(1) > budget {
        return Err(ModelError::Budget {
            budget,
            smallest: count(1),
        });
    }
    let (mut lo, mut hi) = (1, max);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if count(mid) <= budget {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(lo)
}

// ---------------------------------------------------------------------------
// MLP

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

fn activate(tape: &mut Tape, x: Var, act: Activation) -> Var {
    match act {
        Activation::Relu => tape.relu(x),
        Activation::Tanh => tape.tanh(x),
    }
}

/// Affine layers with an activation between them; the last layer is affine.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub name: String,
    pub widths: Vec<usize>,
    pub activation: Activation,
}

impl Mlp {
    pub fn new(name: impl Into<String>, widths: Vec<usize>) -> Self {
        Mlp {
            name: name.into(),
            widths,
            activation: Activation::Relu,
        }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("nonempty widths")
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn init(&self, tree: &mut ParamTree, rng: &mut impl Rng) {
        for (l, w) in self.widths.windows(2).enumerate() {
            tree.insert(format!("{}.w{l}", self.name), init_uniform(&[w[0], w[1]], w[0], rng));
            tree.insert(format!("{}.b{l}", self.name), init_uniform(&[w[1]], w[0], rng));
        }
    }

    /// Applies the MLP along the last axis of `x`.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let shape = tape.shape(x).to_vec();
        let last = *shape.last().unwrap_or(&0);
        if shape.is_empty() || last != self.input_width() {
            return Err(ModelError::Width {
                layer: self.name.clone(),
                expected: self.input_width(),
                got: last,
            });
        }
        let rows = shape[..shape.len() - 1].iter().product();
        let mut h = if shape.len() == 2 {
            x
        } else {
            tape.reshape(x, &[rows, last])?
        };
        let n_layers = self.widths.len() - 1;
        for l in 0..n_layers {
            let w = p.get(&format!("{}.w{l}", self.name))?;
            let b = p.get(&format!("{}.b{l}", self.name))?;
            h = tape.matmul(h, w)?;
            h = tape.add(h, b)?;
            if l + 1 < n_layers {
                h = activate(tape, h, self.activation);
            }
        }
        if shape.len() == 2 {
            return Ok(h);
        }
        let mut out_shape = shape;
        *out_shape.last_mut().expect("nonempty") = self.output_width();
        Ok(tape.reshape(h, &out_shape)?)
    }
}

// ---------------------------------------------------------------------------
// sign-equivariant building blocks

/// `v -> v * MLP(|v|)` applied along the last axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SignEqElementwise {
    pub mlp: Mlp,
}

impl SignEqElementwise {
    pub fn new(name: &str, k: usize, hidden: &[usize]) -> Self {
        let mut widths = vec![k];
        widths.extend_from_slice(hidden);
        widths.push(k);
        SignEqElementwise {
            mlp: Mlp::new(format!("{name}.mlp"), widths),
        }
    }

    pub fn k(&self) -> usize {
        self.mlp.input_width()
    }

    pub fn param_count(&self) -> usize {
        self.mlp.param_count()
    }

    pub fn init(&self, tree: &mut ParamTree, rng: &mut impl Rng) {
        self.mlp.init(tree, rng)
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, v: Var) -> Result<Var> {
        let a = tape.abs(v);
        let m = self.mlp.forward(tape, p, a)?;
        Ok(tape.mul(v, m)?)
    }
}

/// Sign-invariant node features `rho(phi(v_ij) + phi(-v_ij))`.
///
/// `phi` acts on every entry of `V` (`n x k`) and `rho` on each row of
/// aggregated features, so nodes exchanged by an automorphism get equal rows
/// whenever the used eigenvalues are simple.
#[derive(Debug, Clone, PartialEq)]
pub struct SignNet {
    pub k: usize,
    pub phi: Mlp,
    pub rho: Mlp,
}

impl SignNet {
    pub fn new(name: &str, k: usize, phi_hidden: &[usize], phi_out: usize, rho_hidden: &[usize], out: usize) -> Self {
        let mut pw = vec![1];
        pw.extend_from_slice(phi_hidden);
        pw.push(phi_out);
        let mut rw = vec![k * phi_out];
        rw.extend_from_slice(rho_hidden);
        rw.push(out);
        SignNet {
            k,
            phi: Mlp::new(format!("{name}.phi"), pw),
            rho: Mlp::new(format!("{name}.rho"), rw),
        }
    }

    pub fn param_count(&self) -> usize {
        self.phi.param_count() + self.rho.param_count()
    }

    pub fn init(&self, tree: &mut ParamTree, rng: &mut impl Rng) {
        self.phi.init(tree, rng);
        self.rho.init(tree, rng);
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, v: Var) -> Result<Var> {
        let s = tape.shape(v).to_vec();
        if s.len() != 2 || s[1] != self.k {
            return Err(ModelError::Shape {
                layer: "signnet".into(),
                expected: format!("[n, {}]", self.k),
                got: s,
            });
        }
        let n = s[0];
        let e = tape.reshape(v, &[n * self.k, 1])?;
        let agg = even_part(tape, &self.phi, p, e)?;
        let rows = tape.reshape(agg, &[n, self.k * self.phi.output_width()])?;
        self.rho.forward(tape, p, rows)
    }
}

/// `phi(x) + phi(-x)`, exactly even in `x`.
fn even_part(tape: &mut Tape, phi: &Mlp, p: &Bound, x: Var) -> Result<Var> {
    let a = phi.forward(tape, p, x)?;
    let nx = tape.neg(x);
    let b = phi.forward(tape, p, nx)?;
    Ok(tape.add(a, b)?)
}

/// How the invariant branch of a [`SignEqLayer`] combines per-column features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvariantHead {
    /// `rho` reads all `k` aggregated column features at once.
    #[default]
    Full,
    /// `rho` reads their sum, plus a per-column linear term; cost is linear in `k`.
    Pooled,
}

/// `[W_1 v_1, ..., W_k v_k] * SignNet(V)` on `[B, n, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignEqLayer {
    pub name: String,
    pub n_in: usize,
    pub n_out: usize,
    pub k: usize,
    pub head: InvariantHead,
    pub phi: Mlp,
    pub rho: Mlp,
}

impl SignEqLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        n_in: usize,
        n_out: usize,
        k: usize,
        phi_hidden: &[usize],
        phi_out: usize,
        rho_hidden: &[usize],
        head: InvariantHead,
    ) -> Self {
        let mut pw = vec![n_in];
        pw.extend_from_slice(phi_hidden);
        pw.push(phi_out);
        let (rho_in, rho_out) = match head {
            InvariantHead::Full => (k * phi_out, n_out * k),
            InvariantHead::Pooled => (phi_out, n_out),
        };
        let mut rw = vec![rho_in];
        rw.extend_from_slice(rho_hidden);
        rw.push(rho_out);
        SignEqLayer {
            name: name.to_string(),
            n_in,
            n_out,
            k,
            head,
            phi: Mlp::new(format!("{name}.phi"), pw),
            rho: Mlp::new(format!("{name}.rho"), rw),
        }
    }

    fn psi_name(&self) -> String {
        format!("{}.psi", self.name)
    }

    fn w_name(&self) -> String {
        format!("{}.w", self.name)
    }

    pub fn param_count(&self) -> usize {
        let psi = match self.head {
            InvariantHead::Full => 0,
            InvariantHead::Pooled => self.phi.output_width() * self.n_out,
        };
        self.k * self.n_in * self.n_out + self.phi.param_count() + self.rho.param_count() + psi
    }

    pub fn init(&self, tree: &mut ParamTree, rng: &mut impl Rng) {
        tree.insert(
            self.w_name(),
            init_uniform(&[self.k, self.n_in, self.n_out], self.n_in, rng),
        );
        self.phi.init(tree, rng);
        self.rho.init(tree, rng);
        if self.head == InvariantHead::Pooled {
            let h = self.phi.output_width();
            tree.insert(self.psi_name(), init_uniform(&[h, self.n_out], h, rng));
        }
    }

    /// The linear part as a [`ColumnwiseLinear`] (block `j` is `n_out x n_in`).
    pub fn linear_part(&self, tree: &ParamTree) -> Result<ColumnwiseLinear> {
        let w = tree
            .get(&self.w_name())
            .ok_or_else(|| ModelError::MissingParam(self.w_name()))?;
        let blocks = (0..self.k)
            .map(|j| {
                let mut b = Tensor::zeros(&[self.n_out, self.n_in]);
                for i in 0..self.n_in {
                    for o in 0..self.n_out {
                        b.set(o, i, w.data()[(j * self.n_in + i) * self.n_out + o]);
                    }
                }
                b
            })
            .collect();
        ColumnwiseLinear::new(blocks).map_err(|e| ModelError::Invalid(e.to_string()))
    }

    /// Sign-invariant `[B, n_out, k]` factor.
    pub fn invariant(&self, tape: &mut Tape, p: &Bound, v: Var) -> Result<Var> {
        let s = tape.shape(v).to_vec();
        let b = s[0];
        let h = self.phi.output_width();
        let cols = tape.permute(v, &[0, 2, 1])?;
        let cols = tape.reshape(cols, &[b * self.k, self.n_in])?;
        let agg = even_part(tape, &self.phi, p, cols)?;
        match self.head {
            InvariantHead::Full => {
                let flat = tape.reshape(agg, &[b, self.k * h])?;
                let r = self.rho.forward(tape, p, flat)?;
                Ok(tape.reshape(r, &[b, self.n_out, self.k])?)
            }
            InvariantHead::Pooled => {
                let per_col = tape.reshape(agg, &[b, self.k, h])?;
                let pooled = tape.sum_axis(per_col, 1)?;
                let g = self.rho.forward(tape, p, pooled)?;
                let g = tape.reshape(g, &[b, 1, self.n_out])?;
                let psi = p.get(&self.psi_name())?;
                let local = tape.matmul(agg, psi)?;
                let local = tape.reshape(local, &[b, self.k, self.n_out])?;
                let sum = tape.add(local, g)?;
                Ok(tape.permute(sum, &[0, 2, 1])?)
            }
        }
    }

    /// Columnwise linear map of `[B, n_in, k]` to `[B, n_out, k]`.
    pub fn linear(&self, tape: &mut Tape, p: &Bound, v: Var) -> Result<Var> {
        let w = p.get(&self.w_name())?;
        let vp = tape.permute(v, &[2, 0, 1])?;
        let lin = tape.batch_matmul(vp, w)?;
        Ok(tape.permute(lin, &[1, 2, 0])?)
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, v: Var) -> Result<Var> {
        let s = tape.shape(v).to_vec();
        if s.len() != 3 || s[1] != self.n_in || s[2] != self.k {
            return Err(ModelError::Shape {
                layer: self.name.clone(),
                expected: format!("[n, {}, {}]", self.n_in, self.k),
                got: s,
            });
        }
        let lin = self.linear(tape, p, v)?;
        let inv = self.invariant(tape, p, v)?;
        Ok(tape.mul(lin, inv)?)
    }
}

/// A chain of [`SignEqLayer`]s with channel widths `n_0 -> n_1 -> ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignEqStack {
    pub layers: Vec<SignEqLayer>,
}

impl SignEqStack {
    pub fn new(
        name: &str,
        k: usize,
        channels: &[usize],
        phi_hidden: &[usize],
        phi_out: usize,
        rho_hidden: &[usize],
    ) -> Self {
        SignEqStack {
            layers: channels
                .windows(2)
                .enumerate()
                .map(|(l, c)| {
                    SignEqLayer::new(
                        &format!("{name}.{l}"),
                        c[0],
                        c[1],
                        k,
                        phi_hidden,
                        phi_out,
                        rho_hidden,
                        InvariantHead::Full,
                    )
                })
                .collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(SignEqLayer::param_count).sum()
    }

    pub fn init(&self, tree: &mut ParamTree, rng: &mut impl Rng) {
        for l in &self.layers {
            l.init(tree, rng);
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, mut v: Var) -> Result<Var> {
        for l in &self.layers {
            v = l.forward(tape, p, v)?;
        }
        Ok(v)
    }
}

// ---------------------------------------------------------------------------
// DSS

/// Per-row map inside a DSS layer, from `[R, d_in, k]` to `[R, d_out, k]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    /// Requires `d_in = d_out = 1`.
    Elementwise(SignEqElementwise),
    Layer(SignEqLayer),
    /// Unconstrained MLP on the flattened row; not sign-equivariant.
    Plain {
        mlp: Mlp,
        d_out: usize,
        k: usize,
    },
}

impl Block {
    pub fn param_count(&self) -> usize {
        match self {
            Block::Elementwise(b) => b.param_count(),
            Block::Layer(b) => b.param_count(),
            Block::Plain { mlp, .. } => mlp.param_count(),
        }
    }

    pub fn init(&self, tree: &mut ParamTree, rng: &mut impl Rng) {
        match self {
            Block::Elementwise(b) => b.init(tree, rng),
            Block::Layer(b) => b.init(tree, rng),
            Block::Plain { mlp, .. } => mlp.init(tree, rng),
        }
    }

    fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let s = tape.shape(x).to_vec();
        let r = s[0];
        match self {
            Block::Elementwise(b) => {
                let flat = tape.reshape(x, &[r, s[1] * s[2]])?;
                let y = b.forward(tape, p, flat)?;
                Ok(tape.reshape(y, &[r, 1, b.k()])?)
            }
            Block::Layer(b) => b.forward(tape, p, x),
            Block::Plain { mlp, d_out, k } => {
                let flat = tape.reshape(x, &[r, s[1] * s[2]])?;
                let y = mlp.forward(tape, p, flat)?;
                Ok(tape.reshape(y, &[r, *d_out, *k])?)
            }
        }
    }
}

/// The set over which a DSS layer aggregates for row `i`.
#[derive(Debug, Clone, PartialEq)]
pub enum Aggregation {
    /// All other rows of the same set: `sum_{j != i} V_j`.
    Complement,
    /// Neighbours in a graph: `sum_{j in N(i)} V_j`. Only valid with batch size 1.
    Neighbors(Rc<Csr>),
}

/// `f(V)_i = f1(V_i) + f2(agg_i(V))` on `[B, N, d, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DssLayer {
    pub f1: Block,
    pub f2: Block,
}

impl DssLayer {
    pub fn param_count(&self) -> usize {
        self.f1.param_count() + self.f2.param_count()
    }

    pub fn init(&self, tree: &mut ParamTree, rng: &mut impl Rng) {
        self.f1.init(tree, rng);
        self.f2.init(tree, rng);
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, v: Var, agg: &Aggregation) -> Result<Var> {
        let s = tape.shape(v).to_vec();
        if s.len() != 4 {
            return Err(ModelError::Invalid(format!(
                "DSS input must be [B, N, d, k], got {s:?}"
            )));
        }
        let (b, n, d, k) = (s[0], s[1], s[2], s[3]);
        let summed = match agg {
            Aggregation::Complement => {
                let total = tape.sum_axis(v, 1)?;
                let total = tape.reshape(total, &[b, 1, d, k])?;
                tape.sub(total, v)?
            }
            Aggregation::Neighbors(m) => {
                if b != 1 || m.rows != n || m.cols != n {
                    return Err(ModelError::Invalid(format!(
                        "adjacency {}x{} for batch {b} of {n} rows",
                        m.rows, m.cols
                    )));
                }
                let flat = tape.reshape(v, &[n, d * k])?;
                let s = tape.spmm(m.clone(), flat)?;
                tape.reshape(s, &[1, n, d, k])?
            }
        };
        let rows = tape.reshape(v, &[b * n, d, k])?;
        let srows = tape.reshape(summed, &[b * n, d, k])?;
        let a = self.f1.forward(tape, p, rows)?;
        let c = self.f2.forward(tape, p, srows)?;
        let out = tape.add(a, c)?;
        let d_out = tape.shape(out)[1];
        Ok(tape.reshape(out, &[b, n, d_out, k])?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// `d = 1` everywhere, blocks are [`SignEqElementwise`].
    #[default]
    Elementwise,
    /// Channel-mixing [`SignEqLayer`] blocks.
    Layer,
    /// Non-equivariant MLP blocks of comparable width.
    Plain,
}

/// A stack of DSS layers sharing one aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dss {
    pub layers: Vec<DssLayer>,
    pub k: usize,
}

impl Dss {
    /// `channels` lists `d` before and after every layer; `hidden` is the width
    /// of the MLPs inside each block.
    pub fn new(
        name: &str,
        kind: BlockKind,
        k: usize,
        channels: &[usize],
        hidden: usize,
        head: InvariantHead,
    ) -> Result<Self> {
        if channels.len() < 2 {
            return Err(ModelError::Invalid("DSS needs at least one layer".into()));
        }
        if kind == BlockKind::Elementwise && channels.iter().any(|&c| c != 1) {
            return Err(ModelError::Invalid("elementwise DSS blocks need one channel".into()));
        }
        let block = |tag: &str, d_in: usize, d_out: usize| match kind {
            BlockKind::Elementwise => Block::Elementwise(SignEqElementwise::new(tag, k, &[hidden])),
            BlockKind::Layer => Block::Layer(SignEqLayer::new(
                tag,
                d_in,
                d_out,
                k,
                &[hidden],
                hidden,
                &[hidden],
                head,
            )),
            BlockKind::Plain => Block::Plain {
                mlp: Mlp::new(format!("{tag}.mlp"), vec![d_in * k, hidden, hidden, d_out * k]),
                d_out,
                k,
            },
        };
        let layers = channels
            .windows(2)
            .enumerate()
            .map(|(l, c)| DssLayer {
                f1: block(&format!("{name}.{l}.f1"), c[0], c[1]),
                f2: block(&format!("{name}.{l}.f2"), c[0], c[1]),
            })
            .collect();
        Ok(Dss { layers, k })
    }

    /// [`SignEqLayer`] blocks with separate widths for the per-column `phi`
    /// and the per-row `rho`.
    pub fn sign_eq_layers(
        name: &str,
        k: usize,
        channels: &[usize],
        phi_hidden: &[usize],
        phi_out: usize,
        rho_hidden: &[usize],
        head: InvariantHead,
    ) -> Result<Self> {
        if channels.len() < 2 {
            return Err(ModelError::Invalid("DSS needs at least one layer".into()));
        }
        let block = |tag: String, d_in: usize, d_out: usize| {
            Block::Layer(SignEqLayer::new(
                &tag, d_in, d_out, k, phi_hidden, phi_out, rho_hidden, head,
            ))
        };
        let layers = channels
            .windows(2)
            .enumerate()
            .map(|(l, c)| DssLayer {
                f1: block(format!("{name}.{l}.f1"), c[0], c[1]),
                f2: block(format!("{name}.{l}.f2"), c[0], c[1]),
            })
            .collect();
        Ok(Dss { layers, k })
    }

    /// Plain MLP blocks `d_in * k -> hidden.. -> d_out * k`.
    pub fn plain(name: &str, k: usize, channels: &[usize], hidden: &[usize]) -> Result<Self> {
        if channels.len() < 2 {
            return Err(ModelError::Invalid("DSS needs at least one layer".into()));
        }
        let block = |tag: String, d_in: usize, d_out: usize| {
            let mut widths = vec![d_in * k];
            widths.extend_from_slice(hidden);
            widths.push(d_out * k);
            Block::Plain {
                mlp: Mlp::new(format!("{tag}.mlp"), widths),
                d_out,
                k,
            }
        };
        let layers = channels
            .windows(2)
            .enumerate()
            .map(|(l, c)| DssLayer {
                f1: block(format!("{name}.{l}.f1"), c[0], c[1]),
                f2: block(format!("{name}.{l}.f2"), c[0], c[1]),
            })
            .collect();
        Ok(Dss { layers, k })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DssLayer::param_count).sum()
    }

    pub fn init(&self, tree: &mut ParamTree, rng: &mut impl Rng) {
        for l in &self.layers {
            l.init(tree, rng);
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, mut v: Var, agg: &Aggregation) -> Result<Var> {
        for l in &self.layers {
            v = l.forward(tape, p, v, agg)?;
        }
        Ok(v)
    }
}

// ---------------------------------------------------------------------------
// decoders

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    #[default]
    Dot,
    MlpHadamard,
}

/// Sign-invariant edge scores from node embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDecoder {
    pub mode: DecodeMode,
    pub k: usize,
    /// Present in `MlpHadamard` mode: `k -> hidden -> 1`.
    pub mlp: Option<Mlp>,
}

impl PairDecoder {
    pub fn dot(k: usize) -> Self {
        PairDecoder {
            mode: DecodeMode::Dot,
            k,
            mlp: None,
        }
    }

    pub fn mlp_hadamard(name: &str, k: usize, hidden: &[usize]) -> Self {
        let mut widths = vec![k];
        widths.extend_from_slice(hidden);
        widths.push(1);
        PairDecoder {
            mode: DecodeMode::MlpHadamard,
            k,
            mlp: Some(Mlp::new(format!("{name}.mlp"), widths)),
        }
    }

    pub fn param_count(&self) -> usize {
        self.mlp.as_ref().map_or(0, Mlp::param_count)
    }

    pub fn init(&self, tree: &mut ParamTree, rng: &mut impl Rng) {
        if let Some(m) = &self.mlp {
            m.init(tree, rng);
        }
    }

    /// Logits `[P]` for rows `zi`, `zj` of shape `[P, k]`.
    pub fn decode(&self, tape: &mut Tape, p: &Bound, zi: Var, zj: Var) -> Result<Var> {
        let (si, sj) = (tape.shape(zi).to_vec(), tape.shape(zj).to_vec());
        if si != sj || si.len() != 2 || si[1] != self.k {
            return Err(ModelError::Width {
                layer: "pair_decoder".into(),
                expected: self.k,
                got: *sj.last().unwrap_or(&0),
            });
        }
        let h = tape.mul(zi, zj)?;
        match &self.mlp {
            None => Ok(tape.sum_axis(h, 1)?),
            Some(m) => {
                let y = m.forward(tape, p, h)?;
                Ok(tape.reshape(y, &[si[0]])?)
            }
        }
    }

    /// Logits `[P]` for index pairs into the node embeddings `z` (`[n, k]`).
    pub fn decode_pairs(&self, tape: &mut Tape, p: &Bound, z: Var, pairs: Rc<Vec<(usize, usize)>>) -> Result<Var> {
        let s = tape.shape(z).to_vec();
        if s.len() != 2 || s[1] != self.k {
            return Err(ModelError::Width {
                layer: "pair_decoder".into(),
                expected: self.k,
                got: *s.last().unwrap_or(&0),
            });
        }
        match &self.mlp {
            None => Ok(tape.pair_dot(z, pairs)?),
            Some(m) => {
                let n = pairs.len();
                let h = tape.pair_mul(z, pairs)?;
                let y = m.forward(tape, p, h)?;
                Ok(tape.reshape(y, &[n])?)
            }
        }
    }

    /// Scores for `[P, 2, k]` stacked pairs.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, z: Var) -> Result<Var> {
        let (zi, zj) = split_pair(tape, z)?;
        self.decode(tape, p, zi, zj)
    }
}

fn split_pair(tape: &mut Tape, z: Var) -> Result<(Var, Var)> {
    let s = tape.shape(z).to_vec();
    if s.len() != 3 || s[1] != 2 {
        return Err(ModelError::Invalid(format!("pair input must be [P, 2, k], got {s:?}")));
    }
    let a = tape.slice(z, 1, 0, 1)?;
    let b = tape.slice(z, 1, 1, 2)?;
    Ok((tape.reshape(a, &[s[0], s[2]])?, tape.reshape(b, &[s[0], s[2]])?))
}

/// Decoder invariant to swapping the two rows and to column sign flips.
///
/// Row `r` of column `j` contributes `(v_j[r]^2, v_j[r] v_j[1 - r])`; a DeepSets
/// network sums a shared `phi` over the two rows and applies `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniversalPairDecoder {
    pub k: usize,
    pub phi: Mlp,
    pub rho: Mlp,
}

impl UniversalPairDecoder {
    pub fn new(name: &str, k: usize, hidden: usize) -> Self {
        UniversalPairDecoder {
            k,
            phi: Mlp::new(format!("{name}.phi"), vec![2 * k, hidden, hidden]),
            rho: Mlp::new(format!("{name}.rho"), vec![hidden, hidden, 1]),
        }
    }

    pub fn param_count(&self) -> usize {
        self.phi.param_count() + self.rho.param_count()
    }

    pub fn init(&self, tree: &mut ParamTree, rng: &mut impl Rng) {
        self.phi.init(tree, rng);
        self.rho.init(tree, rng);
    }

    /// `[P, 2, 2k]` features: squares then cross products.
    pub fn features(&self, tape: &mut Tape, z: Var) -> Result<Var> {
        let s = tape.shape(z).to_vec();
        if s.len() != 3 || s[1] != 2 || s[2] != self.k {
            return Err(ModelError::Invalid(format!("expected [P, 2, {}], got {s:?}", self.k)));
        }
        let sq = tape.square(z);
        let top = tape.slice(z, 1, 0, 1)?;
        let bottom = tape.slice(z, 1, 1, 2)?;
        let rev = tape.concat(&[bottom, top], 1)?;
        let cross = tape.mul(z, rev)?;
        Ok(tape.concat(&[sq, cross], 2)?)
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, z: Var) -> Result<Var> {
        let f = self.features(tape, z)?;
        let h = self.phi.forward(tape, p, f)?;
        let pooled = tape.sum_axis(h, 1)?;
        let y = self.rho.forward(tape, p, pooled)?;
        let n = tape.shape(y)[0];
        Ok(tape.reshape(y, &[n])?)
    }
}

// ---------------------------------------------------------------------------
// specs

/// Serializable description of a model; widths are hidden-layer widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Mlp {
        widths: Vec<usize>,
        #[serde(default)]
        activation: Activation,
    },
    SignEqElementwise {
        k: usize,
        widths: Vec<usize>,
    },
    Signnet {
        k: usize,
        widths: Vec<usize>,
        out: usize,
    },
    SignEqLayerStack {
        k: usize,
        channels: Vec<usize>,
        width: usize,
    },
    DssStack {
        k: usize,
        channels: Vec<usize>,
        width: usize,
        #[serde(default)]
        block: BlockKind,
    },
    PairDecoder {
        k: usize,
        #[serde(default)]
        mode: DecodeMode,
        #[serde(default)]
        widths: Vec<usize>,
    },
    UniversalPairDecoder {
        k: usize,
        width: usize,
    },
}

/// A built model of any architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mlp(Mlp),
    SignEqElementwise(SignEqElementwise),
    SignNet(SignNet),
    SignEqStack(SignEqStack),
    Dss(Dss),
    PairDecoder(PairDecoder),
    UniversalPairDecoder(UniversalPairDecoder),
}

impl ModelSpec {
    pub fn model(&self) -> Result<Model> {
        Ok(match self {
            ModelSpec::Mlp { widths, activation } => {
                if widths.len() < 2 {
                    return Err(ModelError::Invalid("an MLP needs input and output widths".into()));
                }
                Model::Mlp(Mlp::new("mlp", widths.clone()).with_activation(*activation))
            }
            ModelSpec::SignEqElementwise { k, widths } => {
                Model::SignEqElementwise(SignEqElementwise::new("signeq", *k, widths))
            }
            ModelSpec::Signnet { k, widths, out } => {
                let w = *widths.last().unwrap_or(&8);
                Model::SignNet(SignNet::new("signnet", *k, widths, w, widths, *out))
            }
            ModelSpec::SignEqLayerStack { k, channels, width } => {
                if channels.len() < 2 {
                    return Err(ModelError::Invalid(
                        "a layer stack needs at least two channel widths".into(),
                    ));
                }
                Model::SignEqStack(SignEqStack::new("stack", *k, channels, &[*width], *width, &[*width]))
            }
            ModelSpec::DssStack {
                k,
                channels,
                width,
                block,
            } => Model::Dss(Dss::new("dss", *block, *k, channels, *width, InvariantHead::Full)?),
            ModelSpec::PairDecoder { k, mode, widths } => Model::PairDecoder(match mode {
                DecodeMode::Dot => PairDecoder::dot(*k),
                DecodeMode::MlpHadamard => PairDecoder::mlp_hadamard("decoder", *k, widths),
            }),
            ModelSpec::UniversalPairDecoder { k, width } => {
                Model::UniversalPairDecoder(UniversalPairDecoder::new("decoder", *k, *width))
            }
        })
    }

    /// Parameter count, computed without allocating weights.
    pub fn param_count(&self) -> Result<usize> {
        Ok(self.model()?.param_count())
    }

    pub fn build(&self, rng: &mut impl Rng) -> Result<(Model, ParamTree)> {
        let m = self.model()?;
        let mut tree = ParamTree::new();
        m.init(&mut tree, rng);
        Ok((m, tree))
    }
}

impl Model {
    pub fn param_count(&self) -> usize {
        match self {
            Model::Mlp(m) => m.param_count(),
            Model::SignEqElementwise(m) => m.param_count(),
            Model::SignNet(m) => m.param_count(),
            Model::SignEqStack(m) => m.param_count(),
            Model::Dss(m) => m.param_count(),
            Model::PairDecoder(m) => m.param_count(),
            Model::UniversalPairDecoder(m) => m.param_count(),
        }
    }

    pub fn init(&self, tree: &mut ParamTree, rng: &mut impl Rng) {
        match self {
            Model::Mlp(m) => m.init(tree, rng),
            Model::SignEqElementwise(m) => m.init(tree, rng),
            Model::SignNet(m) => m.init(tree, rng),
            Model::SignEqStack(m) => m.init(tree, rng),
            Model::Dss(m) => m.init(tree, rng),
            Model::PairDecoder(m) => m.init(tree, rng),
            Model::UniversalPairDecoder(m) => m.init(tree, rng),
        }
    }

    /// Forward pass; DSS stacks aggregate over the complement of each row.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        match self {
            Model::Mlp(m) => m.forward(tape, p, x),
            Model::SignEqElementwise(m) => m.forward(tape, p, x),
            Model::SignNet(m) => m.forward(tape, p, x),
            Model::SignEqStack(m) => m.forward(tape, p, x),
            Model::Dss(m) => m.forward(tape, p, x, &Aggregation::Complement),
            Model::PairDecoder(m) => m.forward(tape, p, x),
            Model::UniversalPairDecoder(m) => m.forward(tape, p, x),
        }
    }

    /// Evaluates on a fixed input with frozen parameters.
    pub fn eval(&self, tree: &ParamTree, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let p = tree.bind_frozen(&mut tape);
        let xv = tape.constant(x.clone());
        let y = self.forward(&mut tape, &p, xv)?;
        Ok(tape.value(y).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::{check_signs_exhaustive, DEFAULT_TOL};
    use crate::tensor::grad_check_many;

    fn build(spec: &ModelSpec, seed: u64) -> (Model, ParamTree) {
        spec.build(&mut rng::seeded(seed)).unwrap()
    }

    #[test]
    fn mlp_zero_and_identity() {
        let m = Mlp::new("m", vec![3, 3]);
        let mut tree = ParamTree::new();
        tree.insert("m.w0", Tensor::zeros(&[3, 3]));
        tree.insert("m.b0", Tensor::zeros(&[3]));
        let model = Model::Mlp(m.clone());
        let x = Tensor::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(model.eval(&tree, &x).unwrap().max_abs(), 0.0);
        tree.insert("m.w0", Tensor::eye(3));
        assert_eq!(model.eval(&tree, &x).unwrap(), x);
        let m2 = Mlp::new("m", vec![3, 3, 3]);
        let mut t2 = ParamTree::new();
        for l in 0..2 {
            t2.insert(format!("m.w{l}"), Tensor::eye(3));
            t2.insert(format!("m.b{l}"), Tensor::zeros(&[3]));
        }
        assert_eq!(Model::Mlp(m2).eval(&t2, &x).unwrap(), x);
        assert!(matches!(
            model.eval(&tree, &Tensor::zeros(&[1, 2])),
            Err(ModelError::Width { .. })
        ));
    }

    #[test]
    fn param_counts_match_trees() {
        let specs = [
            ModelSpec::Mlp {
                widths: vec![3, 5, 2],
                activation: Activation::Tanh,
            },
            ModelSpec::SignEqElementwise {
                k: 4,
                widths: vec![8, 8],
            },
            ModelSpec::Signnet {
                k: 4,
                widths: vec![6],
                out: 5,
            },
            ModelSpec::SignEqLayerStack {
                k: 3,
                channels: vec![4, 5, 2],
                width: 6,
            },
            ModelSpec::DssStack {
                k: 3,
                channels: vec![2, 3, 1],
                width: 4,
                block: BlockKind::Layer,
            },
            ModelSpec::DssStack {
                k: 3,
                channels: vec![1, 1],
                width: 4,
                block: BlockKind::Elementwise,
            },
            ModelSpec::DssStack {
                k: 3,
                channels: vec![2, 1],
                width: 4,
                block: BlockKind::Plain,
            },
            ModelSpec::PairDecoder {
                k: 4,
                mode: DecodeMode::MlpHadamard,
                widths: vec![7],
            },
            ModelSpec::UniversalPairDecoder { k: 4, width: 6 },
        ];
        for s in &specs {
            let (m, tree) = build(s, 0);
            assert_eq!(m.param_count(), tree.count(), "{s:?}");
            assert_eq!(s.param_count().unwrap(), tree.count());
        }
    }

    #[test]
    fn spec_roundtrip_and_strictness() {
        let s = ModelSpec::DssStack {
            k: 16,
            channels: vec![1, 1, 1],
            width: 32,
            block: BlockKind::Elementwise,
        };
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<ModelSpec>(&j).unwrap(), s);
        let bad = r#"{"arch":"sign_eq_elementwise","k":3,"widths":[4],"depth":2}"#;
        assert!(serde_json::from_str::<ModelSpec>(bad).is_err());
    }

    #[test]
    fn budget_solver() {
        let count = |w: usize| {
            ModelSpec::SignEqElementwise {
                k: 16,
                widths: vec![w, w],
            }
            .param_count()
            .unwrap()
        };
        let w = solve_width(25_000, 4096, count).unwrap();
        assert!(count(w) <= 25_000 && count(w + 1) > 25_000);
        assert!(matches!(solve_width(10, 100, count), Err(ModelError::Budget { .. })));
    }

    #[test]
    fn elementwise_examples() {
        let (m, mut tree) = build(&ModelSpec::SignEqElementwise { k: 5, widths: vec![8] }, 1);
        let zero = Tensor::zeros(&[1, 5]);
        assert_eq!(m.eval(&tree, &zero).unwrap().max_abs(), 0.0);
        // force the MLP to the constant 1
        tree.insert("signeq.mlp.w1", Tensor::zeros(&[8, 5]));
        tree.insert("signeq.mlp.b1", Tensor::full(&[5], 1.0));
        let v = rng::gaussian_tensor(&[3, 5], &mut rng::seeded(2));
        assert_eq!(m.eval(&tree, &v).unwrap(), v);
    }

    #[test]
    fn elementwise_exhaustive_signs() {
        let (m, tree) = build(
            &ModelSpec::SignEqElementwise {
                k: 5,
                widths: vec![16, 16],
            },
            3,
        );
        let mut r = rng::seeded(4);
        let xs: Vec<Tensor> = (0..5).map(|_| rng::gaussian_tensor(&[4, 5], &mut r)).collect();
        let rep = check_signs_exhaustive(|x: &Tensor| m.eval(&tree, x), &xs, false, DEFAULT_TOL).unwrap();
        assert_eq!(rep.max_violation, 0.0);
    }

    #[test]
    fn signnet_is_bitwise_invariant() {
        let (m, tree) = build(
            &ModelSpec::Signnet {
                k: 4,
                widths: vec![8],
                out: 6,
            },
            5,
        );
        let mut r = rng::seeded(6);
        let xs: Vec<Tensor> = (0..5).map(|_| rng::gaussian_tensor(&[7, 4], &mut r)).collect();
        let rep = check_signs_exhaustive(|x: &Tensor| m.eval(&tree, x), &xs, true, DEFAULT_TOL).unwrap();
        assert_eq!(rep.max_violation, 0.0);
    }

    #[test]
    fn signnet_identity_phi_is_constant() {
        let sn = SignNet::new("s", 3, &[], 1, &[4], 2);
        let mut tree = ParamTree::new();
        sn.init(&mut tree, &mut rng::seeded(0));
        tree.insert("s.phi.w0", Tensor::eye(1));
        tree.insert("s.phi.b0", Tensor::zeros(&[1]));
        let model = Model::SignNet(sn);
        let mut r = rng::seeded(1);
        let a = model.eval(&tree, &rng::gaussian_tensor(&[2, 3], &mut r)).unwrap();
        let b = model.eval(&tree, &rng::gaussian_tensor(&[2, 3], &mut r)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.row(0), a.row(1));
    }

    #[test]
    fn signeq_layer_reduces_to_columnwise() {
        let layer = SignEqLayer::new("l", 3, 2, 3, &[4], 4, &[4], InvariantHead::Full);
        let mut tree = ParamTree::new();
        layer.init(&mut tree, &mut rng::seeded(0));
        // rho outputs exactly one
        let last = layer.rho.widths.len() - 2;
        let rw = layer.rho.widths[last];
        tree.insert(format!("l.rho.w{last}"), Tensor::zeros(&[rw, 6]));
        tree.insert(format!("l.rho.b{last}"), Tensor::full(&[6], 1.0));
        let v = rng::gaussian_tensor(&[1, 3, 3], &mut rng::seeded(1));
        let mut tape = Tape::new();
        let p = tree.bind_frozen(&mut tape);
        let x = tape.constant(v.clone());
        let y = layer.forward(&mut tape, &p, x).unwrap();
        let expect = layer
            .linear_part(&tree)
            .unwrap()
            .apply(&v.clone().reshaped(&[3, 3]).unwrap())
            .unwrap();
        assert!(tape.value(y).clone().reshaped(&[2, 3]).unwrap().max_abs_diff(&expect) < 1e-14);
        // zero linear part gives zero
        tree.insert("l.w", Tensor::zeros(&[3, 3, 2]));
        let mut tape = Tape::new();
        let p = tree.bind_frozen(&mut tape);
        let x = tape.constant(v);
        let y = layer.forward(&mut tape, &p, x).unwrap();
        assert_eq!(tape.value(y).max_abs(), 0.0);
    }

    #[test]
    fn signeq_stack_exhaustive_signs() {
        for (seed, head) in [(0, InvariantHead::Full), (1, InvariantHead::Pooled)] {
            let layer = SignEqLayer::new("l", 3, 3, 3, &[5], 5, &[5], head);
            let mut tree = ParamTree::new();
            layer.init(&mut tree, &mut rng::seeded(seed));
            let mut r = rng::seeded(7);
            let xs: Vec<Tensor> = (0..4).map(|_| rng::gaussian_tensor(&[2, 3, 3], &mut r)).collect();
            let f = |x: &Tensor| -> Result<Tensor> {
                let mut tape = Tape::new();
                let p = tree.bind_frozen(&mut tape);
                let xv = tape.constant(x.clone());
                let y = layer.forward(&mut tape, &p, xv)?;
                Ok(tape.value(y).clone())
            };
            let rep = check_signs_exhaustive(f, &xs, false, DEFAULT_TOL).unwrap();
            assert_eq!(rep.max_violation, 0.0);
        }
    }

    #[test]
    fn dss_single_row_and_equal_rows() {
        let dss = Dss::new("d", BlockKind::Elementwise, 3, &[1, 1], 6, InvariantHead::Full).unwrap();
        let mut tree = ParamTree::new();
        dss.init(&mut tree, &mut rng::seeded(0));
        let model = Model::Dss(dss.clone());
        let one = rng::gaussian_tensor(&[1, 1, 1, 3], &mut rng::seeded(1));
        let only_f1 = Model::SignEqElementwise(match &dss.layers[0].f1 {
            Block::Elementwise(b) => b.clone(),
            _ => unreachable!(),
        });
        let a = model.eval(&tree, &one).unwrap();
        let b = only_f1.eval(&tree, &one.clone().reshaped(&[1, 3]).unwrap()).unwrap();
        assert_eq!(a.data(), b.data());
        let row = [0.3, -1.2, 0.7];
        let same = Tensor::new(row.iter().cycle().take(12).copied().collect(), &[1, 4, 1, 3]).unwrap();
        let out = model.eval(&tree, &same).unwrap();
        for i in 1..4 {
            assert_eq!(&out.data()[i * 3..i * 3 + 3], &out.data()[..3]);
        }
    }

    #[test]
    fn universal_features_and_invariances() {
        let dec = UniversalPairDecoder::new("u", 1, 4);
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::new(vec![2.0, 3.0], &[1, 2, 1]).unwrap());
        let f = dec.features(&mut tape, z).unwrap();
        assert_eq!(tape.value(f).data(), &[4.0, 6.0, 9.0, 6.0]);

        let (m, tree) = build(&ModelSpec::UniversalPairDecoder { k: 3, width: 8 }, 2);
        let mut r = rng::seeded(3);
        let z = rng::gaussian_tensor(&[5, 2, 3], &mut r);
        let mut swapped = z.clone();
        for p in 0..5 {
            for c in 0..3 {
                swapped.data_mut()[p * 6 + c] = z.data()[p * 6 + 3 + c];
                swapped.data_mut()[p * 6 + 3 + c] = z.data()[p * 6 + c];
            }
        }
        assert_eq!(m.eval(&tree, &z).unwrap(), m.eval(&tree, &swapped).unwrap());
        let rep = check_signs_exhaustive(|x: &Tensor| m.eval(&tree, x), &[z], true, DEFAULT_TOL).unwrap();
        assert_eq!(rep.max_violation, 0.0);
        let bad = Tensor::zeros(&[2, 3, 3]);
        assert!(m.eval(&tree, &bad).is_err());
    }

    #[test]
    fn pair_decoder_examples() {
        let dot = Model::PairDecoder(PairDecoder::dot(3));
        let tree = ParamTree::new();
        let e1 = Tensor::new(vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0], &[1, 2, 3]).unwrap();
        assert_eq!(dot.eval(&tree, &e1).unwrap().data(), &[1.0]);

        // a summation layer turns mlp_hadamard into dot
        let mh = PairDecoder::mlp_hadamard("h", 3, &[]);
        let mut t = ParamTree::new();
        t.insert("h.mlp.w0", Tensor::full(&[3, 1], 1.0));
        t.insert("h.mlp.b0", Tensor::zeros(&[1]));
        let mh = Model::PairDecoder(mh);
        let z = rng::gaussian_tensor(&[4, 2, 3], &mut rng::seeded(0));
        let a = dot.eval(&tree, &z).unwrap();
        let b = mh.eval(&t, &z).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-14);
        let mut flipped = z.clone();
        for p in 0..4 {
            for r in 0..2 {
                flipped.data_mut()[p * 6 + r * 3 + 1] *= -1.0;
            }
        }
        assert_eq!(dot.eval(&tree, &flipped).unwrap(), a);
        assert_eq!(mh.eval(&t, &flipped).unwrap(), b);
        assert!(dot.eval(&tree, &Tensor::zeros(&[1, 2, 4])).is_err());
    }

    #[test]
    fn mlp_gradient_at_generic_point() {
        let m = Mlp::new("m", vec![3, 5, 2]).with_activation(Activation::Tanh);
        let mut tree = ParamTree::new();
        m.init(&mut tree, &mut rng::seeded(0));
        let x = rng::gaussian_tensor(&[4, 3], &mut rng::seeded(1));
        let mut inputs = vec![x];
        inputs.extend(tree.tensors().cloned());
        let err = grad_check_many(
            |tape, vars| {
                let p = tree.bind_vars(&vars[1..]).map_err(|e| TensorError::Invalid {
                    op: "bind",
                    msg: e.to_string(),
                })?;
                let y = m.forward(tape, &p, vars[0]).map_err(|e| TensorError::Invalid {
                    op: "forward",
                    msg: e.to_string(),
                })?;
                let s = tape.square(y);
                Ok(tape.sum(s))
            },
            &inputs,
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn optimizer_reduces_loss() {
        let m = Mlp::new("m", vec![2, 8, 1]);
        let mut tree = ParamTree::new();
        m.init(&mut tree, &mut rng::seeded(0));
        let x = rng::gaussian_tensor(&[32, 2], &mut rng::seeded(1));
        let y = Tensor::new(x.data().chunks(2).map(|r| r[0] - 2.0 * r[1]).collect(), &[32, 1]).unwrap();
        let mut opt = Optimizer::new(&tree, 0.01);
        let mut losses = Vec::new();
        for _ in 0..200 {
            let mut tape = Tape::new();
            let p = tree.bind(&mut tape);
            let xv = tape.constant(x.clone());
            let out = m.forward(&mut tape, &p, xv).unwrap();
            let loss = tape.mse(out, &y).unwrap();
            losses.push(tape.value(loss).data()[0]);
            let g = tape.backward(loss).unwrap();
            opt.step(&mut tree, &g, &p).unwrap();
        }
        assert!(losses[199] < 0.1 * losses[0]);
    }
}
