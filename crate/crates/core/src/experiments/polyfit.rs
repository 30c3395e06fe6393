//! Fitting random sign-equivariant polynomials with `v * MLP(|v|)`.
//!
//! A plain MLP trained on the same target serves as a negative control: it
//! can fit the data but is not sign-equivariant off the training points.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::metrics::ResultsRecord;
use super::{ExperimentError, Result};
use crate::algebra::{sample_signeq_poly, SignEqPoly};
use crate::models::{Mlp, Optimizer, ParamTree, SignEqElementwise};
use crate::rng;
use crate::symmetry::check_signs_exhaustive;
use crate::tensor::{Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolyModel {
    /// `v * MLP(|v|)`.
    #[default]
    Signeq,
    /// Unconstrained MLP `R^k -> R^k`.
    Mlp,
}

impl PolyModel {
    pub fn name(self) -> &'static str {
        match self {
            PolyModel::Signeq => "signeq_elementwise",
            PolyModel::Mlp => "mlp",
        }
    }
}

fn d_k() -> usize {
    4
}
fn d_degree() -> u32 {
    4
}
fn d_terms() -> usize {
    4
}
fn d_steps() -> usize {
    20_000
}
fn d_lr() -> f64 {
    5e-2
}
fn d_final_lr() -> f64 {
    1e-5
}
fn d_batch() -> usize {
    256
}
fn d_train() -> usize {
    4096
}
fn d_test() -> usize {
    1024
}
fn d_hidden() -> Vec<usize> {
    vec![32, 32]
}
fn d_true() -> bool {
    true
}
fn d_eval_every() -> usize {
    250
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyFitConfig {
    #[serde(default = "d_k")]
    pub k: usize,
    /// Largest degree of the invariant factor `p_inv` in the target `v * p_inv(v)`.
    #[serde(default = "d_degree")]
    pub degree: u32,
    /// Monomials per output of `p_inv`.
    #[serde(default = "d_terms")]
    pub n_terms: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: PolyModel,
    /// Upper bound on Adam steps.
    #[serde(default = "d_steps")]
    pub steps: usize,
    #[serde(default = "d_lr")]
    pub lr: f64,
    /// Learning rate reached at the last step (cosine decay).
    #[serde(default = "d_final_lr")]
    pub final_lr: f64,
    #[serde(default = "d_batch")]
    pub batch: usize,
    #[serde(default = "d_train")]
    pub n_train: usize,
    #[serde(default = "d_test")]
    pub n_test: usize,
    #[serde(default = "d_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "d_eval_every")]
    pub eval_every: usize,
    /// Start the last layer at zero weights so the network begins as a
    /// constant (for `signeq`, a diagonal scaling).
    #[serde(default = "d_true")]
    pub zero_init_output: bool,
    /// Stop once held-out MSE falls below this value.
    #[serde(default)]
    pub target_mse: Option<f64>,
}

impl PolyFitConfig {
    pub fn new(k: usize, degree: u32, seed: u64) -> Self {
        PolyFitConfig {
            k,
            degree,
            n_terms: d_terms(),
            seed,
            model: PolyModel::Signeq,
            steps: d_steps(),
            lr: d_lr(),
            final_lr: d_final_lr(),
            batch: d_batch(),
            n_train: d_train(),
            n_test: d_test(),
            hidden: d_hidden(),
            eval_every: d_eval_every(),
            zero_init_output: true,
            target_mse: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.k == 0 || self.k > 8 {
            return bad("k must be in 1..=8");
        }
        if self.degree == 0 || self.degree > 6 {
            return bad("degree must be in 1..=6");
        }
        if self.batch == 0 || self.n_train == 0 || self.n_test == 0 || self.eval_every == 0 {
            return bad("batch, sample counts and eval_every must be positive");
        }
        if !(self.lr > 0.0) || !(self.final_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        Ok(())
    }

    fn lr_at(&self, step: usize) -> f64 {
        let t = step as f64 / self.steps.max(1) as f64;
        self.final_lr + 0.5 * (self.lr - self.final_lr) * (1.0 + (std::f64::consts::PI * t).cos())
    }
}

/// `v * p_inv(v)` with `p_inv` of degree at most `degree`. Degree 1 leaves
/// only constant terms in `p_inv`, i.e. a diagonal scaling.
pub fn poly_target(cfg: &PolyFitConfig) -> SignEqPoly {
    sample_signeq_poly(cfg.k, cfg.degree, cfg.n_terms, rng::substream(cfg.seed, 1).random())
}

fn eval_rows(p: &SignEqPoly, x: &Tensor) -> Result<Tensor> {
    let k = x.cols();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.rows() {
        let v = Tensor::new(x.row(i).to_vec(), &[k])?;
        out.extend_from_slice(p.eval(&v).map_err(|e| ExperimentError::Config(e.to_string()))?.data());
    }
    Ok(Tensor::new(out, &[x.rows(), k])?)
}

enum Net {
    Signeq(SignEqElementwise),
    Mlp(Mlp),
}

impl Net {
    fn forward(&self, tape: &mut Tape, p: &crate::models::Bound, x: Var) -> Result<Var> {
        Ok(match self {
            Net::Signeq(m) => m.forward(tape, p, x)?,
            Net::Mlp(m) => m.forward(tape, p, x)?,
        })
    }

    fn eval(&self, tree: &ParamTree, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let p = tree.bind_frozen(&mut tape);
        let xv = tape.constant(x.clone());
        let y = self.forward(&mut tape, &p, xv)?;
        Ok(tape.value(y).clone())
    }
}

fn mse(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len().max(1) as f64
}

pub struct PolyFitOutcome {
    pub record: ResultsRecord,
    /// Held-out MSE after every `eval_every` steps.
    pub curve: Vec<(usize, f64)>,
}

pub fn fit_poly(cfg: &PolyFitConfig) -> Result<PolyFitOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let k = cfg.k;
    let target = poly_target(cfg);
    let mut data_rng = rng::substream(cfg.seed, 2);
    let x_train = rng::uniform_tensor(&[cfg.n_train, k], -1.0, 1.0, &mut data_rng);
    let x_test = rng::uniform_tensor(&[cfg.n_test, k], -1.0, 1.0, &mut data_rng);
    let y_train = eval_rows(&target, &x_train)?;
    let y_test = eval_rows(&target, &x_test)?;

    let net = match cfg.model {
        PolyModel::Signeq => Net::Signeq(SignEqElementwise::new("fit", k, &cfg.hidden)),
        PolyModel::Mlp => {
            let mut widths = vec![k];
            widths.extend_from_slice(&cfg.hidden);
            widths.push(k);
            Net::Mlp(Mlp::new("fit.mlp", widths))
        }
    };
    let mut init_rng = rng::substream(cfg.seed, 3);
    let mut tree = ParamTree::new();
    match &net {
        Net::Signeq(m) => m.init(&mut tree, &mut init_rng),
        Net::Mlp(m) => m.init(&mut tree, &mut init_rng),
    }
    if cfg.zero_init_output {
        let last = format!("fit.mlp.w{}", cfg.hidden.len());
        if let Some(w) = tree.get_mut(&last) {
            w.data_mut().fill(0.0);
        }
    }
    let params = tree.count();
    let mut opt = Optimizer::new(&tree, cfg.lr);
    let mut batch_rng = rng::substream(cfg.seed, 4);
    let mut curve = Vec::new();
    let mut steps_to_target = None;
    let mut step = 0;
    let mut xb = vec![0.0; cfg.batch * k];
    let mut yb = vec![0.0; cfg.batch * k];
    while step < cfg.steps {
        for b in 0..cfg.batch {
            let i = batch_rng.random_range(0..cfg.n_train);
            xb[b * k..(b + 1) * k].copy_from_slice(x_train.row(i));
            yb[b * k..(b + 1) * k].copy_from_slice(y_train.row(i));
        }
        let mut tape = Tape::new();
        let p = tree.bind(&mut tape);
        let xv = tape.constant(Tensor::new(xb.clone(), &[cfg.batch, k])?);
        let pred = net.forward(&mut tape, &p, xv)?;
        let loss = tape.mse(pred, &Tensor::new(yb.clone(), &[cfg.batch, k])?)?;
        let grads = tape.backward(loss)?;
        opt.lr = cfg.lr_at(step);
        opt.step(&mut tree, &grads, &p)?;
        step += 1;
        if step % cfg.eval_every == 0 || step == cfg.steps {
            let test = mse(&net.eval(&tree, &x_test)?, &y_test);
            curve.push((step, test));
            if cfg.target_mse.is_some_and(|t| test < t) {
                steps_to_target = Some(step);
                break;
            }
        }
    }

    let test_mse = mse(&net.eval(&tree, &x_test)?, &y_test);
    let train_mse = mse(&net.eval(&tree, &x_train)?, &y_train);
    let probe: Vec<Tensor> = (0..8)
        .map(|i| Tensor::new(x_test.row(i % cfg.n_test).to_vec(), &[1, k]))
        .collect::<std::result::Result<_, _>>()?;
    let report = check_signs_exhaustive(|x: &Tensor| net.eval(&tree, x), &probe, false, 0.0)?;

    let config = serde_json::to_value(cfg).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let mut rec = ResultsRecord::new("polyfit", cfg.model.name(), cfg.seed, config);
    rec.set("test_mse", test_mse);
    rec.set("train_mse", train_mse);
    rec.set("steps", step as f64);
    rec.set("params", params as f64);
    rec.set("target_terms", target.p_inv().n_terms() as f64);
    rec.set(
        "target_var",
        y_test.data().iter().map(|v| v * v).sum::<f64>() / y_test.len() as f64,
    );
    rec.set("sign_violation", report.max_violation);
    if let Some(s) = steps_to_target {
        rec.set("steps_to_target", s as f64);
    }
    rec.wall_s = start.elapsed().as_secs_f64();
    rec.epoch_wall_s = rec.wall_s / step.max(1) as f64;
    rec.stamp_now();
    rec.validate()?;
    Ok(PolyFitOutcome { record: rec, curve })
}

pub fn run_poly_fit(k: usize, degree: u32, seed: u64) -> Result<ResultsRecord> {
    Ok(fit_poly(&PolyFitConfig::new(k, degree, seed))?.record)
}
