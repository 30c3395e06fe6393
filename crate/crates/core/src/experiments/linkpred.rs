//! Link prediction on graphs with near-automorphisms.
//!
//! All models score an edge from node embeddings `z_i`, `z_j` with a
//! sign-invariant decoder. They differ in how embeddings are made:
//!
//! * `gcn_constant`: two mean-aggregation GCN layers on all-ones features;
//! * `signnet_struct`: SignNet on the Laplacian eigenvectors;
//! * `dot_baseline`: the eigenvectors themselves, scored by `z_i . z_j`;
//! * `mlp_hadamard_baseline`: the eigenvectors, scored by `MLP(z_i * z_j)`;
//! * `signeq`: a sign-equivariant DSS stack on the eigenvectors.

use std::collections::HashSet;
use std::rc::Rc;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{auc, median_epoch_time, ResultsRecord};
use super::{ExperimentError, Result};
use crate::graph::{generate_graph, sample_non_edges, split_edges, EdgeSplit, Graph, GraphSpec};
use crate::models::{
    solve_width, Aggregation, BlockKind, Bound, DecodeMode, Dss, InvariantHead, Optimizer, PairDecoder, ParamTree,
    SignNet,
};
use crate::rng;
use crate::spectral::{adjacency_eig, laplacian_eigvecs, EigBasis, LaplacianKind};
use crate::symmetry::{act, random_signs, Side};
use crate::tensor::{Csr, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkModel {
    GcnConstant,
    SignnetStruct,
    DotBaseline,
    MlpHadamardBaseline,
    Signeq,
}

impl LinkModel {
    pub const ALL: [LinkModel; 5] = [
        LinkModel::GcnConstant,
        LinkModel::SignnetStruct,
        LinkModel::DotBaseline,
        LinkModel::MlpHadamardBaseline,
        LinkModel::Signeq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LinkModel::GcnConstant => "gcn_constant",
            LinkModel::SignnetStruct => "signnet_struct",
            LinkModel::DotBaseline => "dot_baseline",
            LinkModel::MlpHadamardBaseline => "mlp_hadamard_baseline",
            LinkModel::Signeq => "signeq",
        }
    }
}

/// Which graph the eigenvectors are computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigGraph {
    /// Only training edges, so held-out edges never influence the features.
    #[default]
    Train,
    /// The full graph.
    Full,
}

fn default_k() -> usize {
    16
}
fn default_epochs() -> usize {
    100
}
fn default_lr() -> f64 {
    0.01
}
fn default_budget() -> usize {
    25_000
}
fn default_split() -> [f64; 3] {
    [0.85, 0.05, 0.10]
}
fn default_resamples() -> usize {
    10
}
fn default_laplacian() -> LaplacianKind {
    LaplacianKind::Normalized
}
fn default_batch_edges() -> Option<usize> {
    Some(default_batch())
}
fn default_batch() -> usize {
    4096
}
fn default_layers() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkPredConfig {
    pub graph: GraphSpec,
    #[serde(default = "default_k")]
    pub k: usize,
    pub model: LinkModel,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    /// Upper bound on learnable parameters.
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
    /// Decoder of the `signeq` model.
    #[serde(default)]
    pub decode: DecodeMode,
    #[serde(default = "default_laplacian")]
    pub laplacian: LaplacianKind,
    #[serde(default)]
    pub eig_graph: EigGraph,
    /// Train / validation / test fractions of the edges.
    #[serde(default = "default_split")]
    pub split: [f64; 3],
    /// Graph redraws allowed when the used eigenvalues are not simple.
    #[serde(default = "default_resamples")]
    pub max_resamples: usize,
    /// DSS depth of the `signeq` model.
    #[serde(default = "default_layers")]
    pub layers: usize,
    /// Training positives per epoch, drawn without replacement; `None` uses
    /// all of them. Each epoch is one optimizer step on these positives plus
    /// as many fresh negatives.
    #[serde(default = "default_batch_edges")]
    pub batch_edges: Option<usize>,
    /// Multiplies the unit-norm eigenvectors by `sqrt(n)`.
    #[serde(default)]
    pub scale_features: bool,
}

impl LinkPredConfig {
    pub fn new(graph: GraphSpec, model: LinkModel, seed: u64) -> Self {
        LinkPredConfig {
            graph,
            k: default_k(),
            model,
            epochs: default_epochs(),
            lr: default_lr(),
            budget: default_budget(),
            seed,
            decode: DecodeMode::Dot,
            laplacian: default_laplacian(),
            eig_graph: EigGraph::Train,
            split: default_split(),
            max_resamples: default_resamples(),
            layers: default_layers(),
            scale_features: false,
            batch_edges: Some(default_batch()),
        }
    }
}

/// Two copies of an Erdős–Rényi graph (`n` nodes each, `p`) joined by random edges.
pub fn er_two_copy(n: usize, p: f64, extra_edges: usize) -> GraphSpec {
    GraphSpec::TwoCopy {
        base: Box::new(GraphSpec::Er { n, p }),
        extra_edges,
        mirrored: false,
    }
}

/// Two copies of a Barabási–Albert graph joined by random edges.
pub fn ba_two_copy(n: usize, m: usize, extra_edges: usize) -> GraphSpec {
    GraphSpec::TwoCopy {
        base: Box::new(GraphSpec::Ba { n, m }),
        extra_edges,
        mirrored: false,
    }
}

/// Everything that does not depend on the model: graph, split, eigenvectors.
#[derive(Debug, Clone)]
pub struct LinkData {
    pub graph: Graph,
    pub train_graph: Graph,
    pub split: EdgeSplit,
    pub eig: EigBasis,
    /// Eigenvectors, optionally scaled by `sqrt(n)`.
    pub features: Tensor,
    pub graph_resamples: usize,
    pub prep_s: f64,
}

pub fn prepare_link_data(cfg: &LinkPredConfig) -> Result<LinkData> {
    let start = Instant::now();
    let [tr, va, te] = cfg.split;
    for attempt in 0..=cfg.max_resamples {
        let graph_seed = rng::substream(cfg.seed, 1 + attempt as u64).random::<u64>();
        let graph = generate_graph(&cfg.graph, graph_seed)?;
        let split = split_edges(&graph, (tr, va, te), 1, graph_seed ^ 0x5eed)?;
        let train_graph = Graph::from_edges(graph.node_count(), split.train_pos.iter().copied())?;
        let eig_source = match cfg.eig_graph {
            EigGraph::Train => &train_graph,
            EigGraph::Full => &graph,
        };
        let eig = laplacian_eigvecs(eig_source, cfg.k, cfg.laplacian)?;
        if !eig.all_distinct {
            continue;
        }
        let scale = if cfg.scale_features {
            (graph.node_count() as f64).sqrt()
        } else {
            1.0
        };
        let features = eig.vectors.map(|v| v * scale);
        return Ok(LinkData {
            graph,
            train_graph,
            split,
            eig,
            features,
            graph_resamples: attempt,
            prep_s: start.elapsed().as_secs_f64(),
        });
    }
    Err(ExperimentError::Degenerate {
        what: format!("{} lowest Laplacian eigenvalues", cfg.k),
        attempts: cfg.max_resamples + 1,
    })
}

/// Node embedding networks.
#[derive(Debug, Clone)]
enum Embedder {
    Gcn { width: usize, agg: Rc<Csr> },
    SignNet(SignNet),
    Frozen,
    Dss { dss: Dss, agg: Aggregation },
}

struct LinkModelParts {
    embed: Embedder,
    decoder: PairDecoder,
}

fn gcn_params(width: usize) -> usize {
    (width + width) + (width * width + width)
}

fn build_parts(cfg: &LinkPredConfig, data: &LinkData) -> Result<LinkModelParts> {
    let k = cfg.k;
    let budget = cfg.budget;
    Ok(match cfg.model {
        LinkModel::GcnConstant => {
            let width = solve_width(budget, 4096, gcn_params)?;
            LinkModelParts {
                embed: Embedder::Gcn {
                    width,
                    agg: data.train_graph.mean_aggregation(true),
                },
                decoder: PairDecoder::dot(width),
            }
        }
        LinkModel::SignnetStruct => {
            let make = |w: usize| SignNet::new("signnet", k, &[w], w, &[w], w);
            let w = solve_width(budget, 4096, |w| make(w).param_count())?;
            LinkModelParts {
                embed: Embedder::SignNet(make(w)),
                decoder: PairDecoder::dot(w),
            }
        }
        LinkModel::DotBaseline => LinkModelParts {
            embed: Embedder::Frozen,
            decoder: PairDecoder::dot(k),
        },
        LinkModel::MlpHadamardBaseline => {
            let make = |w: usize| PairDecoder::mlp_hadamard("decoder", k, &[w, w]);
            let w = solve_width(budget, 4096, |w| make(w).param_count())?;
            LinkModelParts {
                embed: Embedder::Frozen,
                decoder: make(w),
            }
        }
        LinkModel::Signeq => {
            let channels = vec![1; cfg.layers + 1];
            let make = |w: usize| -> Result<(Dss, PairDecoder)> {
                let dss = Dss::new("dss", BlockKind::Elementwise, k, &channels, w, InvariantHead::Full)?;
                let dec = match cfg.decode {
                    DecodeMode::Dot => PairDecoder::dot(k),
                    DecodeMode::MlpHadamard => PairDecoder::mlp_hadamard("decoder", k, &[w]),
                };
                Ok((dss, dec))
            };
            let count = |w: usize| {
                make(w)
                    .map(|(d, p)| d.param_count() + p.param_count())
                    .unwrap_or(usize::MAX)
            };
            let w = solve_width(budget, 4096, count)?;
            let (dss, decoder) = make(w)?;
            LinkModelParts {
                embed: Embedder::Dss {
                    dss,
                    agg: Aggregation::Neighbors(data.train_graph.mean_aggregation(false)),
                },
                decoder,
            }
        }
    })
}

impl Embedder {
    fn init(&self, tree: &mut ParamTree, r: &mut impl Rng) {
        match self {
            Embedder::Gcn { width, .. } => {
                let w = *width;
                let a0 = 1.0;
                let a1 = 1.0 / (w as f64).sqrt();
                tree.insert("gcn.w0", rng::uniform_tensor(&[1, w], -a0, a0, r));
                tree.insert("gcn.b0", rng::uniform_tensor(&[w], -a0, a0, r));
                tree.insert("gcn.w1", rng::uniform_tensor(&[w, w], -a1, a1, r));
                tree.insert("gcn.b1", rng::uniform_tensor(&[w], -a1, a1, r));
            }
            Embedder::SignNet(s) => s.init(tree, r),
            Embedder::Frozen => {}
            Embedder::Dss { dss, .. } => dss.init(tree, r),
        }
    }

    /// `[n, d]` embeddings from `[n, k]` features.
    fn forward(&self, tape: &mut Tape, p: &Bound, v: Var) -> Result<Var> {
        let n = tape.shape(v)[0];
        match self {
            Embedder::Gcn { agg, .. } => {
                let x = tape.constant(Tensor::full(&[n, 1], 1.0));
                let h = tape.spmm(agg.clone(), x)?;
                let h = tape.matmul(h, p.get("gcn.w0")?)?;
                let h = tape.add(h, p.get("gcn.b0")?)?;
                let h = tape.relu(h);
                let h = tape.spmm(agg.clone(), h)?;
                let h = tape.matmul(h, p.get("gcn.w1")?)?;
                Ok(tape.add(h, p.get("gcn.b1")?)?)
            }
            Embedder::SignNet(s) => Ok(s.forward(tape, p, v)?),
            Embedder::Frozen => Ok(v),
            Embedder::Dss { dss, agg } => {
                let k = tape.shape(v)[1];
                let x = tape.reshape(v, &[1, n, 1, k])?;
                let y = dss.forward(tape, p, x, agg)?;
                Ok(tape.reshape(y, &[n, k])?)
            }
        }
    }
}

fn embeddings(parts: &LinkModelParts, tree: &ParamTree, features: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let p = tree.bind_frozen(&mut tape);
    let v = tape.constant(features.clone());
    let z = parts.embed.forward(&mut tape, &p, v)?;
    Ok(tape.value(z).clone())
}

fn score_pairs(parts: &LinkModelParts, tree: &ParamTree, z: &Tensor, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let p = tree.bind_frozen(&mut tape);
    let zv = tape.constant(z.clone());
    let s = parts.decoder.decode_pairs(&mut tape, &p, zv, Rc::new(pairs.to_vec()))?;
    Ok(tape.value(s).data().to_vec())
}

fn pair_auc(
    parts: &LinkModelParts,
    tree: &ParamTree,
    z: &Tensor,
    pos: &[(usize, usize)],
    neg: &[(usize, usize)],
) -> Result<f64> {
    let mut pairs = pos.to_vec();
    pairs.extend_from_slice(neg);
    let scores = snap_scores(&score_pairs(parts, tree, z, &pairs)?);
    let labels: Vec<u8> = (0..pairs.len()).map(|i| (i < pos.len()) as u8).collect();
    auc(&scores, &labels)
}

/// Rounds scores to 12 significant digits relative to the largest one, so
/// values that differ only by float round-off count as ties.
pub fn snap_scores(scores: &[f64]) -> Vec<f64> {
    let scale = scores.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scores.to_vec();
    }
    let q = scale * 1e-12;
    scores.iter().map(|s| (s / q).round() * q).collect()
}

/// For two-copy graphs, `(max, mean)` of `|z_i - z_{i+n}|` over mirrored pairs.
pub fn mirror_differences(z: &Tensor) -> (f64, f64) {
    let half = z.rows() / 2;
    let d = z.cols();
    let (mut max, mut sum) = (0.0_f64, 0.0);
    for i in 0..half {
        for c in 0..d {
            let diff = (z.at(i, c) - z.at(i + half, c)).abs();
            max = max.max(diff);
            sum += diff;
        }
    }
    (max, sum / (half * d).max(1) as f64)
}

/// Trained embeddings alongside the record, for inspection.
pub struct LinkOutcome {
    pub record: ResultsRecord,
    pub embeddings: Tensor,
    /// Training loss per epoch.
    pub loss_curve: Vec<f64>,
    /// Validation AUC after each epoch.
    pub val_curve: Vec<f64>,
}

/// Trains one model on prepared data.
pub fn train_link_model(cfg: &LinkPredConfig, data: &LinkData) -> Result<LinkOutcome> {
    let start = Instant::now();
    let parts = build_parts(cfg, data)?;
    let mut r = rng::substream(cfg.seed, 1000 + cfg.model as u64);
    let mut tree = ParamTree::new();
    parts.embed.init(&mut tree, &mut r);
    parts.decoder.init(&mut tree, &mut r);
    let n_params = tree.count();

    let split = &data.split;
    let mut opt = Optimizer::new(&tree, cfg.lr);
    let mut epoch_times = Vec::new();
    let mut best_val = f64::NEG_INFINITY;
    let mut test_at_best = f64::NAN;
    let mut last_loss = f64::NAN;
    let mut loss_curve = Vec::new();
    let mut val_curve = Vec::new();
    let epochs = if n_params == 0 { 0 } else { cfg.epochs };
    for _ in 0..epochs {
        let t0 = Instant::now();
        let batch;
        let pos = match cfg.batch_edges {
            Some(b) if b < split.train_pos.len() => {
                batch = rand::seq::index::sample(&mut r, split.train_pos.len(), b)
                    .into_iter()
                    .map(|i| split.train_pos[i])
                    .collect::<Vec<_>>();
                &batch
            }
            _ => &split.train_pos,
        };
        let mut taken = HashSet::with_capacity(pos.len());
        let neg = sample_non_edges(&data.train_graph, pos.len(), &mut taken, &mut r)?;
        let pairs: Vec<(usize, usize)> = pos.iter().chain(&neg).copied().collect();
        let targets: Vec<f64> = (0..pairs.len())
            .map(|i| if i < pos.len() { 1.0 } else { 0.0 })
            .collect();

        let mut tape = Tape::new();
        let p = tree.bind(&mut tape);
        let v = tape.constant(data.features.clone());
        let z = parts.embed.forward(&mut tape, &p, v)?;
        let logits = parts.decoder.decode_pairs(&mut tape, &p, z, Rc::new(pairs))?;
        let loss = tape.bce_with_logits(logits, Rc::new(targets))?;
        last_loss = tape.value(loss).data()[0];
        loss_curve.push(last_loss);
        let grads = tape.backward(loss)?;
        // the embeddings of this forward pass belong to the pre-step parameters
        let before = tree.clone();
        opt.step(&mut tree, &grads, &p)?;
        epoch_times.push(t0.elapsed().as_secs_f64());

        let z = tape.value(z);
        let val = pair_auc(&parts, &before, z, &split.val_pos, &split.val_neg)?;
        val_curve.push(val);
        if val > best_val {
            best_val = val;
            test_at_best = pair_auc(&parts, &before, z, &split.test_pos, &split.test_neg)?;
        }
    }

    let z = embeddings(&parts, &tree, &data.features)?;
    let final_test = pair_auc(&parts, &tree, &z, &split.test_pos, &split.test_neg)?;
    let final_val = pair_auc(&parts, &tree, &z, &split.val_pos, &split.val_neg)?;
    if final_val > best_val {
        best_val = final_val;
        test_at_best = final_test;
    }

    let config = serde_json::to_value(cfg).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let mut rec = ResultsRecord::new("linkpred", cfg.model.name(), cfg.seed, config);
    rec.set("test_auc", test_at_best);
    rec.set("best_val_auc", best_val);
    rec.set("final_test_auc", final_test);
    rec.set("params", n_params as f64);
    rec.set("graph_resamples", data.graph_resamples as f64);
    rec.set("k", cfg.k as f64);
    rec.set("min_eig_gap", data.eig.min_gap());
    if last_loss.is_finite() {
        rec.set("train_loss", last_loss);
    }
    if matches!(cfg.graph, GraphSpec::TwoCopy { .. }) {
        let (max, mean) = mirror_differences(&z);
        rec.set("mirror_max_diff", max);
        rec.set("mirror_mean_abs_diff", mean);
    }
    if let Some(v) = sign_violation(&parts, &tree, data, cfg.seed)? {
        rec.set("sign_violation", v);
    }
    rec.epoch_wall_s = median_epoch_time(&epoch_times);
    rec.set("epoch_s", rec.epoch_wall_s);
    rec.set("prep_s", data.prep_s);
    rec.wall_s = start.elapsed().as_secs_f64() + data.prep_s;
    rec.calls = 1;
    rec.stamp_now();
    rec.validate()?;
    Ok(LinkOutcome {
        record: rec,
        embeddings: z,
        loss_curve,
        val_curve,
    })
}

/// Post-training symmetry check of the embedding map on random sign flips:
/// equivariance for `signeq`, invariance for `signnet_struct`.
fn sign_violation(parts: &LinkModelParts, tree: &ParamTree, data: &LinkData, seed: u64) -> Result<Option<f64>> {
    let invariant = match parts.embed {
        Embedder::SignNet(_) => true,
        Embedder::Dss { .. } => false,
        _ => return Ok(None),
    };
    let mut r = rng::substream(seed, 77);
    let base = embeddings(parts, tree, &data.features)?;
    let scale = 1.0 + base.max_abs();
    let mut worst: f64 = 0.0;
    for _ in 0..16 {
        let s = random_signs(data.features.cols(), &mut r);
        let flipped = act(&data.features, &s, Side::Columns).map_err(|e| ExperimentError::Metric(e.to_string()))?;
        let out = embeddings(parts, tree, &flipped)?;
        let target = if invariant {
            base.clone()
        } else {
            act(&base, &s, Side::Columns).map_err(|e| ExperimentError::Metric(e.to_string()))?
        };
        worst = worst.max(out.max_abs_diff(&target) / scale);
    }
    Ok(Some(worst))
}

pub fn run_linkpred(cfg: &LinkPredConfig) -> Result<ResultsRecord> {
    let data = prepare_link_data(cfg)?;
    Ok(train_link_model(cfg, &data)?.record)
}

/// Runs several models on the same graph, split and eigenvectors.
pub fn run_linkpred_models(cfg: &LinkPredConfig, models: &[LinkModel]) -> Result<Vec<ResultsRecord>> {
    let data = prepare_link_data(cfg)?;
    models
        .iter()
        .map(|&m| {
            let c = LinkPredConfig {
                model: m,
                ..cfg.clone()
            };
            train_link_model(&c, &data).map(|o| o.record)
        })
        .collect()
}

/// Dot-product scores of one-hop and two-hop pairs on `C_6` using the
/// eigenvector of adjacency eigenvalue `-2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleFixture {
    pub eigenvalue: f64,
    pub one_hop: Vec<f64>,
    pub two_hop: Vec<f64>,
}

impl CycleFixture {
    /// Every one-hop score is strictly below every two-hop score.
    pub fn separated(&self) -> bool {
        let hi = self.one_hop.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = self.two_hop.iter().copied().fold(f64::INFINITY, f64::min);
        hi < lo
    }
}

pub fn cycle_fixture() -> Result<CycleFixture> {
    let g = generate_graph(&GraphSpec::Cycle { len: 6 }, 0)?;
    let eig = adjacency_eig(&g)?;
    let v = eig.vectors.column(0);
    let score = |i: usize, j: usize| v[i] * v[j];
    Ok(CycleFixture {
        eigenvalue: eig.values[0],
        one_hop: (0..6).map(|i| score(i, (i + 1) % 6)).collect(),
        two_hop: (0..6).map(|i| score(i, (i + 2) % 6)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(model: LinkModel) -> LinkPredConfig {
        let mut c = LinkPredConfig::new(er_two_copy(60, 0.15, 30), model, 0);
        c.k = 6;
        c.epochs = 5;
        c.budget = 2_000;
        c
    }

    #[test]
    fn cycle_scores() {
        let f = cycle_fixture().unwrap();
        assert!((f.eigenvalue + 2.0).abs() < 1e-12);
        assert!(f.separated());
        assert!(f.one_hop.iter().all(|&s| (s + 1.0 / 6.0).abs() < 1e-12));
    }

    #[test]
    fn every_model_runs_within_budget() {
        let cfg = small_cfg(LinkModel::Signeq);
        let data = prepare_link_data(&cfg).unwrap();
        for m in LinkModel::ALL {
            let c = LinkPredConfig {
                model: m,
                ..cfg.clone()
            };
            let out = train_link_model(&c, &data).unwrap();
            let rec = out.record;
            assert!(rec.metric("params").unwrap() <= 2_000.0, "{m:?}");
            let a = rec.metric("test_auc").unwrap();
            assert!((0.0..=1.0).contains(&a));
            assert_eq!(out.embeddings.rows(), 120);
        }
    }

    #[test]
    fn constant_gcn_scores_tie() {
        let rec = run_linkpred(&small_cfg(LinkModel::GcnConstant)).unwrap();
        assert_eq!(rec.metric("final_test_auc").unwrap(), 0.5);
        assert!(rec.metric("mirror_max_diff").unwrap() < 1e-12);
    }

    #[test]
    fn trained_models_keep_their_symmetry() {
        let eq = run_linkpred(&small_cfg(LinkModel::Signeq)).unwrap();
        assert!(eq.metric("sign_violation").unwrap() < 1e-12);
        let inv = run_linkpred(&small_cfg(LinkModel::SignnetStruct)).unwrap();
        assert!(inv.metric("sign_violation").unwrap() < 1e-12);
    }

    #[test]
    fn deterministic() {
        let mut a = run_linkpred(&small_cfg(LinkModel::Signeq)).unwrap();
        let mut b = run_linkpred(&small_cfg(LinkModel::Signeq)).unwrap();
        a.strip_timing();
        b.strip_timing();
        assert_eq!(a, b);
    }

    #[test]
    fn config_rejects_unknown_fields() {
        let ok = r#"{"graph":{"kind":"cycle","len":6},"model":"signeq"}"#;
        let c: LinkPredConfig = serde_json::from_str(ok).unwrap();
        assert_eq!(c.k, 16);
        let bad = r#"{"graph":{"kind":"cycle","len":6},"model":"signeq","kk":3}"#;
        assert!(serde_json::from_str::<LinkPredConfig>(bad).is_err());
    }
}
