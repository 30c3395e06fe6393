//! Charged particles in `d` dimensions: predict final positions from initial
//! positions, velocities and charges with an `O(d)`-equivariant model.
//!
//! Both models see the system in its PCA frame `R` (computed from the stacked
//! positions and velocities) and predict a residual on top of free motion:
//! `X_T ~ X + T V + Delta R^T`. The wrapped model evaluates a sign-equivariant
//! DSS core once; the frame-averaging model averages an unconstrained DSS core
//! over all `2^d` sign flips of the frame.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{median_epoch_time, ResultsRecord};
use super::{ExperimentError, Result};
use crate::models::{Aggregation, Bound, Dss, InvariantHead, Optimizer, ParamTree};
use crate::orthogonal::{WrapMode, WrappedModel};
use crate::rng::{self, Rng64};
use crate::spectral::{pca_frame, SpectralError};
use crate::symmetry::{all_sign_vectors, random_orthogonal, GroupElement};
use crate::tensor::{Tape, Tensor, Var};

/// Softening length in the force law.
pub const SOFTENING: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NBodyModel {
    SignEqWrapped,
    FrameAverage,
}

impl NBodyModel {
    pub fn name(self) -> &'static str {
        match self {
            NBodyModel::SignEqWrapped => "signeq_wrapped",
            NBodyModel::FrameAverage => "frame_average",
        }
    }

    pub fn mode(self) -> WrapMode {
        match self {
            NBodyModel::SignEqWrapped => WrapMode::Canonicalize,
            NBodyModel::FrameAverage => WrapMode::FrameAverage,
        }
    }
}

fn d_particles() -> usize {
    5
}
fn d_dim() -> usize {
    3
}
fn d_train() -> usize {
    500
}
fn d_eval() -> usize {
    200
}
fn d_steps() -> usize {
    1000
}
fn d_dt() -> f64 {
    1e-3
}
fn d_epochs() -> usize {
    100
}
fn d_lr() -> f64 {
    1e-3
}
fn d_batch() -> usize {
    50
}
fn d_channels() -> Vec<usize> {
    vec![4, 16, 1]
}
fn d_width() -> usize {
    64
}
fn d_resamples() -> usize {
    100
}
fn d_gap() -> f64 {
    1e-6
}
fn d_drift() -> f64 {
    1e-2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NBodyConfig {
    #[serde(default = "d_particles")]
    pub n_particles: usize,
    #[serde(default = "d_dim")]
    pub dim: usize,
    #[serde(default = "d_train")]
    pub n_train: usize,
    #[serde(default = "d_eval")]
    pub n_val: usize,
    #[serde(default = "d_eval")]
    pub n_test: usize,
    /// Leapfrog steps per trajectory.
    #[serde(default = "d_steps")]
    pub steps: usize,
    #[serde(default = "d_dt")]
    pub dt: f64,
    pub model: NBodyModel,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_lr")]
    pub lr: f64,
    #[serde(default = "d_batch")]
    pub batch: usize,
    /// DSS channel widths, starting at the 4 input channels and ending at 1.
    #[serde(default = "d_channels")]
    pub channels: Vec<usize>,
    /// Width of the MLPs inside every block.
    #[serde(default = "d_width")]
    pub width: usize,
    #[serde(default)]
    pub seed: u64,
    /// Redraws allowed per trajectory.
    #[serde(default = "d_resamples")]
    pub max_resamples: usize,
    /// Smallest accepted gap between frame variances, relative to their sum.
    #[serde(default = "d_gap")]
    pub min_frame_gap: f64,
    /// Largest accepted relative energy drift of a trajectory.
    #[serde(default = "d_drift")]
    pub max_energy_drift: f64,
}

impl NBodyConfig {
    pub fn new(model: NBodyModel, dim: usize, seed: u64) -> Self {
        NBodyConfig {
            n_particles: d_particles(),
            dim,
            n_train: d_train(),
            n_val: d_eval(),
            n_test: d_eval(),
            steps: d_steps(),
            dt: d_dt(),
            model,
            epochs: d_epochs(),
            lr: d_lr(),
            batch: d_batch(),
            channels: d_channels(),
            width: d_width(),
            seed,
            max_resamples: d_resamples(),
            min_frame_gap: d_gap(),
            max_energy_drift: d_drift(),
        }
    }

    /// 3000 / 2000 / 2000 trajectories.
    pub fn paper_scale(mut self) -> Self {
        self.n_train = 3000;
        self.n_val = 2000;
        self.n_test = 2000;
        self
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.dim < 3 {
            return bad("dim must be at least 3");
        }
        if self.n_particles < 2 {
            return bad("need at least 2 particles");
        }
        if self.n_train == 0 || self.n_val == 0 || self.n_test == 0 {
            return bad("trajectory counts must be at least 1");
        }
        if self.batch == 0 || self.width == 0 {
            return bad("batch and width must be positive");
        }
        if self.channels.len() < 2 || self.channels[0] != 4 || *self.channels.last().expect("nonempty") != 1 {
            return bad("channels must start at 4 and end at 1");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        Ok(())
    }
}

/// One trajectory: initial state, charges, final positions and the PCA frame.
#[derive(Debug, Clone, PartialEq)]
pub struct NBodySample {
    pub x: Tensor,
    pub v: Tensor,
    pub q: Vec<f64>,
    pub target: Tensor,
    /// `d x d` PCA frame of the stacked rows of `x` and `v`.
    pub frame: Tensor,
}

#[derive(Debug, Clone)]
pub struct NBodyData {
    pub train: Vec<NBodySample>,
    pub val: Vec<NBodySample>,
    pub test: Vec<NBodySample>,
    /// Trajectories redrawn after a blowup or excessive energy drift.
    pub blowups: usize,
    /// Trajectories redrawn because their frame was degenerate.
    pub degenerate_frames: usize,
    pub gen_s: f64,
}

fn accelerations(x: &[f64], q: &[f64], d: usize, out: &mut [f64]) {
    let n = q.len();
    out.iter_mut().for_each(|a| *a = 0.0);
    let eps2 = SOFTENING * SOFTENING;
    for i in 0..n {
        for j in i + 1..n {
            let mut r2 = eps2;
            for c in 0..d {
                let diff = x[i * d + c] - x[j * d + c];
                r2 += diff * diff;
            }
            let s = q[i] * q[j] / (r2 * r2.sqrt());
            for c in 0..d {
                let f = s * (x[i * d + c] - x[j * d + c]);
                out[i * d + c] += f;
                out[j * d + c] -= f;
            }
        }
    }
}

/// Kinetic plus softened potential energy.
pub fn energy(x: &Tensor, v: &Tensor, q: &[f64]) -> f64 {
    let (n, d) = (x.rows(), x.cols());
    let kin = 0.5 * v.data().iter().map(|a| a * a).sum::<f64>();
    let mut pot = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let r2: f64 = (0..d).map(|c| (x.at(i, c) - x.at(j, c)).powi(2)).sum();
            pot += q[i] * q[j] / (r2 + SOFTENING * SOFTENING).sqrt();
        }
    }
    kin + pot
}

/// Kick-drift-kick leapfrog with unit masses and forces
/// `F_i = sum_j q_i q_j (x_i - x_j) / (|x_i - x_j|^2 + eps^2)^(3/2)`.
/// Returns final positions and velocities.
pub fn simulate(x: &Tensor, v: &Tensor, q: &[f64], steps: usize, dt: f64) -> (Tensor, Tensor) {
    let d = x.cols();
    let mut xs = x.data().to_vec();
    let mut vs = v.data().to_vec();
    let mut a = vec![0.0; xs.len()];
    accelerations(&xs, q, d, &mut a);
    for _ in 0..steps {
        for (vi, ai) in vs.iter_mut().zip(&a) {
            *vi += 0.5 * dt * ai;
        }
        for (xi, vi) in xs.iter_mut().zip(&vs) {
            *xi += dt * vi;
        }
        accelerations(&xs, q, d, &mut a);
        for (vi, ai) in vs.iter_mut().zip(&a) {
            *vi += 0.5 * dt * ai;
        }
    }
    let shape = x.shape().to_vec();
    (
        Tensor::new(xs, &shape).expect("same shape"),
        Tensor::new(vs, &shape).expect("same shape"),
    )
}

fn stacked(x: &Tensor, v: &Tensor) -> Tensor {
    let mut data = x.data().to_vec();
    data.extend_from_slice(v.data());
    Tensor::new(data, &[2 * x.rows(), x.cols()]).expect("stacked rows")
}

enum Rejection {
    Blowup,
    Frame,
}

fn draw_sample(cfg: &NBodyConfig, r: &mut Rng64) -> std::result::Result<NBodySample, Rejection> {
    let (n, d) = (cfg.n_particles, cfg.dim);
    let x = rng::gaussian_tensor(&[n, d], r).map(|a| 0.5 * a);
    let mut v = rng::gaussian_tensor(&[n, d], r);
    for i in 0..n {
        let norm = v
            .row(i)
            .iter()
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt()
            .max(f64::MIN_POSITIVE);
        for c in 0..d {
            v.set(i, c, 0.5 * v.at(i, c) / norm);
        }
    }
    let q: Vec<f64> = (0..n).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let (xt, vt) = simulate(&x, &v, &q, cfg.steps, cfg.dt);
    let e0 = energy(&x, &v, &q);
    let e1 = energy(&xt, &vt, &q);
    let kin0 = 0.5 * v.data().iter().map(|a| a * a).sum::<f64>();
    let scale = kin0 + (e0 - kin0).abs();
    if !xt.data().iter().all(|a| a.is_finite()) || !((e1 - e0).abs() <= cfg.max_energy_drift * scale) {
        return Err(Rejection::Blowup);
    }
    let frame = match pca_frame(&stacked(&x, &v)) {
        Ok(f) => f,
        Err(SpectralError::DegenerateCovariance { .. }) => return Err(Rejection::Frame),
        Err(_) => return Err(Rejection::Frame),
    };
    let total: f64 = frame.variances.iter().sum();
    let gap = frame
        .variances
        .windows(2)
        .map(|w| (w[0] - w[1]).abs())
        .fold(f64::INFINITY, f64::min);
    if !(gap > cfg.min_frame_gap * total) {
        return Err(Rejection::Frame);
    }
    Ok(NBodySample {
        x,
        v,
        q,
        target: xt,
        frame: frame.rotation,
    })
}

pub fn gen_nbody(cfg: &NBodyConfig) -> Result<NBodyData> {
    cfg.validate()?;
    let start = Instant::now();
    let mut blowups = 0;
    let mut degenerate_frames = 0;
    let mut make = |offset: u64, count: usize| -> Result<Vec<NBodySample>> {
        (0..count)
            .map(|i| {
                let mut r = rng::substream(cfg.seed, offset + i as u64);
                for _ in 0..=cfg.max_resamples {
                    match draw_sample(cfg, &mut r) {
                        Ok(s) => return Ok(s),
                        Err(Rejection::Blowup) => blowups += 1,
                        Err(Rejection::Frame) => degenerate_frames += 1,
                    }
                }
                Err(ExperimentError::Degenerate {
                    what: format!("trajectory {i}"),
                    attempts: cfg.max_resamples + 1,
                })
            })
            .collect()
    };
    let train = make(1 << 32, cfg.n_train)?;
    let val = make(2 << 32, cfg.n_val)?;
    let test = make(3 << 32, cfg.n_test)?;
    Ok(NBodyData {
        train,
        val,
        test,
        blowups,
        degenerate_frames,
        gen_s: start.elapsed().as_secs_f64(),
    })
}

/// The DSS core and how it is wrapped.
#[derive(Debug, Clone, PartialEq)]
pub struct NBodyNet {
    pub core: Dss,
    pub mode: WrapMode,
    pub dim: usize,
    pub horizon: f64,
}

/// Batched inputs in their frames, ready for the core.
pub struct Prepared {
    /// `[B * F, n, 4, d]` with `F` sign flips per sample.
    pub inputs: Tensor,
    /// `[B * F, n, 1, d]` signs to undo the flips, or `None` when `F = 1`.
    pub signs: Option<Tensor>,
    /// `[B, d, d]` transposed frames.
    pub frames_t: Tensor,
    /// `[B, n, d]` free motion `X + T V`.
    pub free: Tensor,
    /// `[B, n, d]` targets.
    pub targets: Tensor,
    pub flips: usize,
}

impl NBodyNet {
    pub fn new(cfg: &NBodyConfig) -> Result<Self> {
        let w = cfg.width;
        let core = match cfg.model {
            // light per-column phi, heavier per-row rho
            NBodyModel::SignEqWrapped => {
                Dss::sign_eq_layers("core", cfg.dim, &cfg.channels, &[16], w, &[w, w], InvariantHead::Pooled)?
            }
            NBodyModel::FrameAverage => Dss::plain("core", cfg.dim, &cfg.channels, &[w, w])?,
        };
        Ok(NBodyNet {
            core,
            mode: cfg.model.mode(),
            dim: cfg.dim,
            horizon: cfg.horizon(),
        })
    }

    pub fn param_count(&self) -> usize {
        self.core.param_count()
    }

    /// Core evaluations per input.
    pub fn flips(&self) -> usize {
        match self.mode {
            WrapMode::Canonicalize => 1,
            WrapMode::FrameAverage => 1 << self.dim,
        }
    }

    /// Channels `[x, v, q x, q v]` of rows already expressed in a frame.
    fn channels(xr: &[f64], vr: &[f64], q: &[f64], d: usize, out: &mut Vec<f64>) {
        for (i, &qi) in q.iter().enumerate() {
            let (xi, vi) = (&xr[i * d..(i + 1) * d], &vr[i * d..(i + 1) * d]);
            out.extend_from_slice(xi);
            out.extend_from_slice(vi);
            out.extend(xi.iter().map(|a| qi * a));
            out.extend(vi.iter().map(|a| qi * a));
        }
    }

    pub fn prepare(&self, samples: &[&NBodySample]) -> Result<Prepared> {
        let d = self.dim;
        let b = samples.len();
        let n = samples.first().map_or(0, |s| s.q.len());
        let signs_all = match self.mode {
            WrapMode::Canonicalize => vec![vec![1.0; d]],
            WrapMode::FrameAverage => all_sign_vectors(d)
                .map_err(|e| ExperimentError::Config(e.to_string()))?
                .into_iter()
                .map(|s| match s {
                    GroupElement::SignVector(v) => v,
                    _ => unreachable!("sign vectors"),
                })
                .collect(),
        };
        let f = signs_all.len();
        let mut inputs = Vec::with_capacity(b * f * n * 4 * d);
        let mut signs = Vec::with_capacity(if f > 1 { b * f * n * d } else { 0 });
        let mut frames_t = Vec::with_capacity(b * d * d);
        let mut free = Vec::with_capacity(b * n * d);
        let mut targets = Vec::with_capacity(b * n * d);
        for s in samples {
            if s.q.len() != n || s.x.cols() != d {
                return Err(ExperimentError::Config("samples differ in shape".into()));
            }
            let xr = s.x.matmul(&s.frame)?;
            let vr = s.v.matmul(&s.frame)?;
            for sv in &signs_all {
                let flip =
                    |t: &Tensor| -> Vec<f64> { t.data().iter().enumerate().map(|(idx, a)| a * sv[idx % d]).collect() };
                Self::channels(&flip(&xr), &flip(&vr), &s.q, d, &mut inputs);
                if f > 1 {
                    for _ in 0..n {
                        signs.extend_from_slice(sv);
                    }
                }
            }
            frames_t.extend_from_slice(s.frame.transpose().data());
            free.extend(s.x.data().iter().zip(s.v.data()).map(|(x, v)| x + self.horizon * v));
            targets.extend_from_slice(s.target.data());
        }
        Ok(Prepared {
            inputs: Tensor::new(inputs, &[b * f, n, 4, d])?,
            signs: if f > 1 {
                Some(Tensor::new(signs, &[b * f, n, 1, d])?)
            } else {
                None
            },
            frames_t: Tensor::new(frames_t, &[b, d, d])?,
            free: Tensor::new(free, &[b, n, d])?,
            targets: Tensor::new(targets, &[b, n, d])?,
            flips: f,
        })
    }

    /// Predicted final positions `[B, n, d]`.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, prep: &Prepared) -> Result<Var> {
        let s = prep.inputs.shape().to_vec();
        let (bf, n, d) = (s[0], s[1], s[3]);
        let b = bf / prep.flips;
        let x = tape.constant(prep.inputs.clone());
        let mut y = self.core.forward(tape, p, x, &Aggregation::Complement)?;
        if let Some(signs) = &prep.signs {
            let sv = tape.constant(signs.clone());
            y = tape.mul(y, sv)?;
        }
        let y = tape.reshape(y, &[b, prep.flips, n * d])?;
        let y = tape.sum_axis(y, 1)?;
        let y = tape.scale(y, 1.0 / prep.flips as f64);
        let y = tape.reshape(y, &[b, n, d])?;
        let rt = tape.constant(prep.frames_t.clone());
        let delta = tape.batch_matmul(y, rt)?;
        let free = tape.constant(prep.free.clone());
        Ok(tape.add(free, delta)?)
    }

    /// Single-input prediction through [`WrappedModel`], which owns the
    /// frame handling and counts core calls.
    pub fn predict_one(&self, tree: &ParamTree, x: &Tensor, v: &Tensor, q: &[f64]) -> Result<(Tensor, u64)> {
        let (n, d) = (x.rows(), x.cols());
        let frame = pca_frame(&stacked(x, v))?;
        let inner = |y: &Tensor| -> Result<Tensor> {
            let mut inp = Vec::with_capacity(n * 4 * d);
            Self::channels(&y.data()[..n * d], &y.data()[n * d..], q, d, &mut inp);
            let mut tape = Tape::new();
            let p = tree.bind_frozen(&mut tape);
            let xv = tape.constant(Tensor::new(inp, &[1, n, 4, d])?);
            let out = self.core.forward(&mut tape, &p, xv, &Aggregation::Complement)?;
            Ok(tape.value(out).clone().reshaped(&[n, d])?)
        };
        let wrapped = WrappedModel::new(inner, self.mode);
        let delta = wrapped.forward_with_frame(&stacked(x, v), &frame.rotation)?;
        let pred = x
            .zip_map(v, |a, b| a + self.horizon * b)?
            .zip_map(&delta, |a, b| a + b)?;
        Ok((pred, wrapped.calls()))
    }
}

fn evaluate(net: &NBodyNet, tree: &ParamTree, samples: &[NBodySample], batch: usize) -> Result<f64> {
    let mut sse = 0.0;
    let mut count = 0usize;
    for chunk in samples.chunks(batch.max(1)) {
        let refs: Vec<&NBodySample> = chunk.iter().collect();
        let prep = net.prepare(&refs)?;
        let mut tape = Tape::new();
        let p = tree.bind_frozen(&mut tape);
        let pred = net.forward(&mut tape, &p, &prep)?;
        for (a, b) in tape.value(pred).data().iter().zip(prep.targets.data()) {
            sse += (a - b) * (a - b);
        }
        count += prep.targets.len();
    }
    Ok(sse / count.max(1) as f64)
}

/// MSE of free motion `X + T V` alone.
pub fn free_motion_mse(samples: &[NBodySample], horizon: f64) -> f64 {
    let mut sse = 0.0;
    let mut count = 0;
    for s in samples {
        for ((x, v), t) in s.x.data().iter().zip(s.v.data()).zip(s.target.data()) {
            sse += (x + horizon * v - t).powi(2);
            count += 1;
        }
    }
    sse / count.max(1) as f64
}

/// Largest relative violation of `f(XQ, VQ) = f(X, V) Q` over `trials`
/// random orthogonal `Q` and test samples.
pub fn orthogonal_violation(
    net: &NBodyNet,
    tree: &ParamTree,
    samples: &[NBodySample],
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let mut r = rng::substream(seed, 991);
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let s = &samples[t % samples.len()];
        let GroupElement::OrthogonalMatrix(q) = random_orthogonal(net.dim, &mut r) else {
            unreachable!("orthogonal element")
        };
        let (base, _) = net.predict_one(tree, &s.x, &s.v, &s.q)?;
        let (rot, _) = net.predict_one(tree, &s.x.matmul(&q)?, &s.v.matmul(&q)?, &s.q)?;
        let expected = base.matmul(&q)?;
        worst = worst.max(rot.max_abs_diff(&expected) / (1.0 + expected.max_abs()));
    }
    Ok(worst)
}

pub struct NBodyOutcome {
    pub record: ResultsRecord,
    pub net: NBodyNet,
    pub params: ParamTree,
    pub epoch_times: Vec<f64>,
}

/// Trains on `data`; validation MSE picks the reported test MSE.
pub fn train_nbody(cfg: &NBodyConfig, data: &NBodyData) -> Result<NBodyOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let net = NBodyNet::new(cfg)?;
    let mut r = rng::substream(cfg.seed, 5000 + cfg.model as u64);
    let mut tree = ParamTree::new();
    net.core.init(&mut tree, &mut r);
    let mut opt = Optimizer::new(&tree, cfg.lr);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut epoch_times = Vec::with_capacity(cfg.epochs);
    let mut best_val = f64::INFINITY;
    let mut best_tree = tree.clone();
    let mut last_loss = f64::NAN;
    for _ in 0..cfg.epochs {
        let t0 = Instant::now();
        order.shuffle(&mut r);
        for idx in order.chunks(cfg.batch) {
            let batch: Vec<&NBodySample> = idx.iter().map(|&i| &data.train[i]).collect();
            let prep = net.prepare(&batch)?;
            let mut tape = Tape::new();
            let p = tree.bind(&mut tape);
            let pred = net.forward(&mut tape, &p, &prep)?;
            let loss = tape.mse(pred, &prep.targets)?;
            last_loss = tape.value(loss).data()[0];
            let grads = tape.backward(loss)?;
            opt.step(&mut tree, &grads, &p)?;
        }
        epoch_times.push(t0.elapsed().as_secs_f64());
        let val = evaluate(&net, &tree, &data.val, 4 * cfg.batch)?;
        if val < best_val {
            best_val = val;
            best_tree = tree.clone();
        }
    }
    if cfg.epochs == 0 {
        best_val = evaluate(&net, &tree, &data.val, 4 * cfg.batch)?;
    }
    let test = evaluate(&net, &best_tree, &data.test, 4 * cfg.batch)?;
    let final_test = evaluate(&net, &tree, &data.test, 4 * cfg.batch)?;

    let config = serde_json::to_value(cfg).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let mut rec = ResultsRecord::new("nbody", cfg.model.name(), cfg.seed, config);
    rec.set("test_mse", test);
    rec.set("best_val_mse", best_val);
    rec.set("final_test_mse", final_test);
    rec.set("free_motion_test_mse", free_motion_mse(&data.test, cfg.horizon()));
    rec.set("params", net.param_count() as f64);
    rec.set("dim", cfg.dim as f64);
    rec.set("blowups", data.blowups as f64);
    rec.set("degenerate_frames", data.degenerate_frames as f64);
    if last_loss.is_finite() {
        rec.set("train_loss", last_loss);
    }
    rec.epoch_wall_s = median_epoch_time(&epoch_times);
    rec.set("epoch_s", rec.epoch_wall_s);
    rec.set("gen_s", data.gen_s);
    rec.calls = net.flips() as u64;
    rec.wall_s = start.elapsed().as_secs_f64() + data.gen_s;
    rec.stamp_now();
    rec.validate()?;
    Ok(NBodyOutcome {
        record: rec,
        net,
        params: best_tree,
        epoch_times,
    })
}

pub fn run_nbody(cfg: &NBodyConfig) -> Result<ResultsRecord> {
    let data = gen_nbody(cfg)?;
    Ok(train_nbody(cfg, &data)?.record)
}
