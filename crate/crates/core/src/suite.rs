//! The property suite behind `signeq check`.
//!
//! Every check yields a [`CheckResult`] with the worst violation found and the
//! tolerance it is held to. Sign checks enumerate all `2^k` flips; permutation
//! and orthogonal checks draw random group elements; gradient checks compare
//! autodiff to central differences on random instances of each layer type.

use std::fmt;
use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    dim_table, fixed_dim_bruteforce, fixed_dim_formula, sample_signeq_poly, Arity, ColumnwiseLinear, Monomials,
    SignEqPoly, SignInvPoly,
};
use crate::graph::Graph;
use crate::models::{
    Activation, Aggregation, BlockKind, Dss, InvariantHead, Mlp, ModelError, PairDecoder, ParamTree, SignEqElementwise,
    SignEqLayer, SignEqStack, SignNet, UniversalPairDecoder,
};
use crate::orthogonal::{WrapMode, WrappedModel};
use crate::rng::{self, Rng64};
use crate::symmetry::{
    act, check_equivariance, check_signs_exhaustive, random_orthogonal, random_permutation, Actions, GroupElement, Side,
};
use crate::tensor::{grad_check_many, Tape, Tensor, TensorError, Var};

/// Exhaustive sign flips must agree to this (floating-point reassociation only).
pub const SIGN_TOL: f64 = 1e-12;
pub const PERMUTATION_TOL: f64 = 1e-10;
pub const ORTHOGONAL_TOL: f64 = 1e-6;
pub const GRADIENT_TOL: f64 = 1e-4;
/// Central-difference step.
pub const GRADIENT_STEP: f64 = 1e-5;
/// Instances closer than this to an `abs`/`relu` kink are redrawn.
pub const KINK_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckGroup {
    Algebra,
    Signs,
    Permutation,
    Orthogonal,
    Gradient,
}

impl CheckGroup {
    pub const ALL: [CheckGroup; 5] = [
        CheckGroup::Algebra,
        CheckGroup::Signs,
        CheckGroup::Permutation,
        CheckGroup::Orthogonal,
        CheckGroup::Gradient,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub group: CheckGroup,
    pub name: String,
    /// Worst violation (or relative gradient error, or mismatch count).
    pub value: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub passed: bool,
}

impl CheckResult {
    fn new(group: CheckGroup, name: impl Into<String>, value: f64, tolerance: f64, samples: usize) -> Self {
        CheckResult {
            group,
            name: name.into(),
            value,
            tolerance,
            samples,
            passed: value < tolerance,
        }
    }

    fn failed(group: CheckGroup, name: impl Into<String>, msg: &str) -> Self {
        let mut r = CheckResult::new(group, format!("{} ({msg})", name.into()), f64::INFINITY, 0.0, 0);
        r.passed = false;
        r
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:?} {}: {:.3e} (tol {:.0e}, {} samples)",
            if self.passed { "PASS" } else { "FAIL" },
            self.group,
            self.name,
            self.value,
            self.tolerance,
            self.samples
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub results: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.results.iter().filter(|r| !r.passed)
    }

    pub fn group(&self, g: CheckGroup) -> impl Iterator<Item = &CheckResult> {
        self.results.iter().filter(move |r| r.group == g)
    }

    /// Worst value relative to tolerance within one group.
    pub fn worst(&self, g: CheckGroup) -> Option<&CheckResult> {
        self.group(g)
            .max_by(|a, b| (a.value / a.tolerance).total_cmp(&(b.value / b.tolerance)))
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("group,name,value,tolerance,samples,passed\n");
        for r in &self.results {
            s.push_str(&format!(
                "{:?},{},{:e},{:e},{},{}\n",
                r.group,
                r.name.replace(',', ";"),
                r.value,
                r.tolerance,
                r.samples,
                r.passed
            ));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Largest `k` for exhaustive sign checks.
    pub k_max: usize,
    pub permutation_samples: usize,
    pub orthogonal_samples: usize,
    /// Random instances per layer type in the gradient checks.
    pub gradient_instances: usize,
}

impl SuiteConfig {
    pub fn new(seed: u64) -> Self {
        SuiteConfig {
            seed,
            k_max: 8,
            permutation_samples: 100,
            orthogonal_samples: 100,
            gradient_instances: 100,
        }
    }
}

pub fn run_suite(cfg: &SuiteConfig) -> SuiteReport {
    run_groups(cfg, &CheckGroup::ALL)
}

/// Runs only the listed groups, in the order given.
pub fn run_groups(cfg: &SuiteConfig, groups: &[CheckGroup]) -> SuiteReport {
    let mut results = Vec::new();
    for g in groups {
        results.extend(match g {
            CheckGroup::Algebra => algebra_checks(),
            CheckGroup::Signs => sign_checks(cfg),
            CheckGroup::Permutation => permutation_checks(cfg),
            CheckGroup::Orthogonal => orthogonal_checks(cfg),
            CheckGroup::Gradient => gradient_checks(cfg),
        });
    }
    SuiteReport { results }
}

// ---------------------------------------------------------------------------
// helpers

fn frozen<F>(tree: &ParamTree, x: &Tensor, f: F) -> Result<Tensor, ModelError>
where
    F: Fn(&mut Tape, &crate::models::Bound, Var) -> Result<Var, ModelError>,
{
    let mut tape = Tape::new();
    let p = tree.bind_frozen(&mut tape);
    let xv = tape.constant(x.clone());
    let y = f(&mut tape, &p, xv)?;
    Ok(tape.value(y).clone())
}

fn init<M>(seed: u64, stream: u64, f: impl FnOnce(&mut ParamTree, &mut Rng64) -> M) -> (M, ParamTree) {
    let mut tree = ParamTree::new();
    let m = f(&mut tree, &mut rng::substream(seed, stream));
    (m, tree)
}

fn random_graph(n: usize, r: &mut Rng64) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<f64>() < 0.4 {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, edges).expect("valid edges")
}

fn relabel(g: &Graph, perm: &[usize]) -> Graph {
    // node i of the new graph is node perm[i] of the old one
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    Graph::from_edges(g.node_count(), g.edges().map(|(a, b)| (inv[a], inv[b]))).expect("relabelled edges")
}

fn sign_result<E: fmt::Display>(name: String, report: Result<crate::symmetry::SymmetryReport, E>) -> CheckResult {
    match report {
        Ok(r) => CheckResult::new(CheckGroup::Signs, name, r.max_violation, SIGN_TOL, r.samples),
        Err(e) => CheckResult::failed(CheckGroup::Signs, name, &e.to_string()),
    }
}

fn sample_inputs(shape: &[usize], count: usize, seed: u64, stream: u64) -> Vec<Tensor> {
    let mut r = rng::substream(seed, stream);
    (0..count).map(|_| rng::gaussian_tensor(shape, &mut r)).collect()
}

// ---------------------------------------------------------------------------
// algebra

fn algebra_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mismatches = match dim_table(20) {
        Ok(rows) => rows.iter().filter(|r| !r.consistent()).count() as f64,
        Err(_) => f64::INFINITY,
    };
    out.push(CheckResult::new(
        CheckGroup::Algebra,
        "dimension table k=1..20",
        mismatches,
        0.5,
        20,
    ));
    let mut bad = 0;
    let mut n = 0;
    for k in 1..=3 {
        for m1 in 0..=6u32 {
            for m2 in 0..=6 - m1 {
                n += 1;
                if fixed_dim_bruteforce(k, m1, m2).ok() != fixed_dim_formula(k, m1, m2).ok() {
                    bad += 1;
                }
            }
        }
    }
    out.push(CheckResult::new(
        CheckGroup::Algebra,
        "formula vs brute force",
        bad as f64,
        0.5,
        n,
    ));
    let mut nonzero = 0;
    let mut n = 0;
    for k in 1..=12 {
        for m1 in 0..=7u32 {
            for m2 in 0..=7u32 {
                if (m1 + m2) % 2 == 1 {
                    n += 1;
                    if fixed_dim_formula(k, m1, m2) != Ok(0) {
                        nonzero += 1;
                    }
                }
            }
        }
    }
    out.push(CheckResult::new(
        CheckGroup::Algebra,
        "odd total order gives zero",
        nonzero as f64,
        0.5,
        n,
    ));
    out
}

// ---------------------------------------------------------------------------
// sign flips

fn sign_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let s = cfg.seed;
    for k in 1..=cfg.k_max {
        let st = 100 * k as u64;
        let mut r = rng::substream(s, st);

        let cl = ColumnwiseLinear::random(3, 4, k, &mut r);
        out.push(sign_result(
            format!("columnwise linear k={k}"),
            check_signs_exhaustive(
                |x: &Tensor| cl.apply(x),
                &sample_inputs(&[4, k], 2, s, st + 1),
                false,
                SIGN_TOL,
            ),
        ));

        let poly = sample_signeq_poly(k, 4, 3, s ^ st);
        out.push(sign_result(
            format!("equivariant polynomial (vector) k={k}"),
            check_signs_exhaustive(
                |x: &Tensor| poly.eval(x),
                &sample_inputs(&[k], 2, s, st + 2),
                false,
                SIGN_TOL,
            ),
        ));

        let (inv, mpoly) = matrix_poly(k, &mut r);
        out.push(sign_result(
            format!("invariant polynomial (matrix) k={k}"),
            check_signs_exhaustive(
                |x: &Tensor| inv.eval(x),
                &sample_inputs(&[2, k], 2, s, st + 3),
                true,
                SIGN_TOL,
            ),
        ));
        out.push(sign_result(
            format!("equivariant polynomial (matrix) k={k}"),
            check_signs_exhaustive(
                |x: &Tensor| mpoly.eval(x),
                &sample_inputs(&[2, k], 2, s, st + 3),
                false,
                SIGN_TOL,
            ),
        ));

        let (m, tree) = init(s, st + 4, |t, r| {
            let m = SignEqElementwise::new("e", k, &[6, 6]);
            m.init(t, r);
            m
        });
        out.push(sign_result(
            format!("v * MLP(|v|) k={k}"),
            check_signs_exhaustive(
                |x: &Tensor| frozen(&tree, x, |t, p, v| m.forward(t, p, v)),
                &sample_inputs(&[3, k], 2, s, st + 5),
                false,
                SIGN_TOL,
            ),
        ));

        let (m, tree) = init(s, st + 6, |t, r| {
            let m = SignNet::new("sn", k, &[5], 4, &[6], 3);
            m.init(t, r);
            m
        });
        out.push(sign_result(
            format!("SignNet k={k}"),
            check_signs_exhaustive(
                |x: &Tensor| frozen(&tree, x, |t, p, v| m.forward(t, p, v)),
                &sample_inputs(&[4, k], 2, s, st + 7),
                true,
                SIGN_TOL,
            ),
        ));

        for head in [InvariantHead::Full, InvariantHead::Pooled] {
            let (m, tree) = init(s, st + 8, |t, r| {
                let m = SignEqLayer::new("l", 3, 2, k, &[4], 4, &[5], head);
                m.init(t, r);
                m
            });
            out.push(sign_result(
                format!("sign-equivariant layer ({head:?} head) k={k}"),
                check_signs_exhaustive(
                    |x: &Tensor| frozen(&tree, x, |t, p, v| m.forward(t, p, v)),
                    &sample_inputs(&[2, 3, k], 2, s, st + 9),
                    false,
                    SIGN_TOL,
                ),
            ));
        }

        let (m, tree) = init(s, st + 10, |t, r| {
            let m = SignEqStack::new("st", k, &[3, 4, 2], &[4], 4, &[4]);
            m.init(t, r);
            m
        });
        out.push(sign_result(
            format!("two-layer sign-equivariant stack k={k}"),
            check_signs_exhaustive(
                |x: &Tensor| frozen(&tree, x, |t, p, v| m.forward(t, p, v)),
                &sample_inputs(&[1, 3, k], 2, s, st + 11),
                false,
                SIGN_TOL,
            ),
        ));

        let g = random_graph(5, &mut r);
        let adj = g.sparse_adjacency();
        for (kind, channels, head) in [
            (BlockKind::Elementwise, vec![1, 1, 1], InvariantHead::Full),
            (BlockKind::Layer, vec![2, 3, 1], InvariantHead::Full),
            (BlockKind::Layer, vec![2, 3, 1], InvariantHead::Pooled),
        ] {
            let (m, tree) = init(s, st + 12, |t, r| {
                let m = Dss::new("d", kind, k, &channels, 5, head).expect("valid dss");
                m.init(t, r);
                m
            });
            for (agg_name, agg) in [
                ("complement", Aggregation::Complement),
                ("graph", Aggregation::Neighbors(adj.clone())),
            ] {
                let b = if agg_name == "graph" { 1 } else { 2 };
                out.push(sign_result(
                    format!("DSS {kind:?}/{head:?} {agg_name} k={k}"),
                    check_signs_exhaustive(
                        |x: &Tensor| frozen(&tree, x, |t, p, v| m.forward(t, p, v, &agg)),
                        &sample_inputs(&[b, 5, channels[0], k], 2, s, st + 13),
                        false,
                        SIGN_TOL,
                    ),
                ));
            }
        }

        let dot = PairDecoder::dot(k);
        let (mh, tree) = init(s, st + 14, |t, r| {
            let m = PairDecoder::mlp_hadamard("pd", k, &[6]);
            m.init(t, r);
            m
        });
        let empty = ParamTree::new();
        let pairs = sample_inputs(&[3, 2, k], 2, s, st + 15);
        out.push(sign_result(
            format!("dot decoder k={k}"),
            check_signs_exhaustive(
                |x: &Tensor| frozen(&empty, x, |t, p, v| dot.forward(t, p, v)),
                &pairs,
                true,
                SIGN_TOL,
            ),
        ));
        out.push(sign_result(
            format!("MLP(z_i * z_j) decoder k={k}"),
            check_signs_exhaustive(
                |x: &Tensor| frozen(&tree, x, |t, p, v| mh.forward(t, p, v)),
                &pairs,
                true,
                SIGN_TOL,
            ),
        ));
        let (ud, tree) = init(s, st + 16, |t, r| {
            let m = UniversalPairDecoder::new("ud", k, 6);
            m.init(t, r);
            m
        });
        out.push(sign_result(
            format!("universal pair decoder k={k}"),
            check_signs_exhaustive(
                |x: &Tensor| frozen(&tree, x, |t, p, v| ud.forward(t, p, v)),
                &pairs,
                true,
                SIGN_TOL,
            ),
        ));
    }
    out
}

/// A random matrix-form invariant `R^{2 x k} -> R^{2 x k}` and the
/// equivariant polynomial built from it.
fn matrix_poly(k: usize, r: &mut Rng64) -> (SignInvPoly, SignEqPoly) {
    let (n, h) = (2, 2);
    let outputs: Vec<Monomials> = (0..h * k)
        .map(|_| {
            let mut table = Monomials::new();
            for _ in 0..3 {
                let mut exps = vec![0u32; n * k];
                for _ in 0..r.random_range(0..=2) {
                    // pair two entries of one column so its parity stays even
                    let j = r.random_range(0..k);
                    exps[r.random_range(0..n) * k + j] += 1;
                    exps[r.random_range(0..n) * k + j] += 1;
                }
                *table.entry(exps).or_insert(0.0) += rng::normal(r);
            }
            table
        })
        .collect();
    let inv = SignInvPoly::new(Arity::Matrix { n, k, n_out: h }, outputs).expect("even column parity");
    let w1 = ColumnwiseLinear::random(h, n, k, r);
    let w2 = ColumnwiseLinear::random(2, h, k, r);
    let eq = SignEqPoly::matrix(w1, inv.clone(), w2).expect("matching shapes");
    (inv, eq)
}

// ---------------------------------------------------------------------------
// permutations

fn perm_result<E: fmt::Display>(name: &str, report: Result<crate::symmetry::SymmetryReport, E>) -> CheckResult {
    match report {
        Ok(r) => CheckResult::new(
            CheckGroup::Permutation,
            name,
            r.max_violation,
            PERMUTATION_TOL,
            r.samples,
        ),
        Err(e) => CheckResult::failed(CheckGroup::Permutation, name, &e.to_string()),
    }
}

fn permutation_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let (s, n_samples) = (cfg.seed, cfg.permutation_samples);
    let (n, k) = (7, 4);
    let rows_axis1 = Actions {
        input: Side::Axis(1),
        output: Some(Side::Axis(1)),
    };

    for (kind, channels, head) in [
        (BlockKind::Elementwise, vec![1, 1, 1], InvariantHead::Full),
        (BlockKind::Layer, vec![2, 3, 1], InvariantHead::Full),
        (BlockKind::Layer, vec![2, 3, 1], InvariantHead::Pooled),
        (BlockKind::Plain, vec![2, 3, 1], InvariantHead::Full),
    ] {
        let (m, tree) = init(s, 9000, |t, r| {
            let m = Dss::new("d", kind, k, &channels, 6, head).expect("valid dss");
            m.init(t, r);
            m
        });
        let c0 = channels[0];
        out.push(perm_result(
            &format!("DSS {kind:?}/{head:?} row permutation"),
            check_equivariance(
                |x: &Tensor| frozen(&tree, x, |t, p, v| m.forward(t, p, v, &Aggregation::Complement)),
                |r| rng::gaussian_tensor(&[2, n, c0, k], r),
                |_, r| random_permutation(n, r),
                rows_axis1,
                n_samples,
                PERMUTATION_TOL,
                s,
            ),
        ));
    }

    // graph variant: relabel the graph together with the rows
    let (m, tree) = init(s, 9001, |t, r| {
        let m = Dss::new("d", BlockKind::Layer, k, &[2, 3, 1], 6, InvariantHead::Full).expect("valid dss");
        m.init(t, r);
        m
    });
    let mut worst: f64 = 0.0;
    let mut err = None;
    for i in 0..n_samples {
        let mut r = rng::substream(s, 9100 + i as u64);
        let g = random_graph(n, &mut r);
        let x = rng::gaussian_tensor(&[1, n, 2, k], &mut r);
        let GroupElement::Permutation(perm) = random_permutation(n, &mut r) else {
            unreachable!()
        };
        let pe = GroupElement::Permutation(perm.clone());
        let g2 = relabel(&g, &perm);
        let res = (|| -> Result<f64, String> {
            let fx = frozen(&tree, &x, |t, p, v| {
                m.forward(t, p, v, &Aggregation::Neighbors(g.sparse_adjacency()))
            })
            .map_err(|e| e.to_string())?;
            let px = act(&x, &pe, Side::Axis(1)).map_err(|e| e.to_string())?;
            let fpx = frozen(&tree, &px, |t, p, v| {
                m.forward(t, p, v, &Aggregation::Neighbors(g2.sparse_adjacency()))
            })
            .map_err(|e| e.to_string())?;
            let pfx = act(&fx, &pe, Side::Axis(1)).map_err(|e| e.to_string())?;
            Ok(fpx.max_abs_diff(&pfx) / (1.0 + fx.max_abs()))
        })();
        match res {
            Ok(v) => worst = worst.max(v),
            Err(e) => err = Some(e),
        }
    }
    out.push(match err {
        None => CheckResult::new(
            CheckGroup::Permutation,
            "DSS graph relabelling",
            worst,
            PERMUTATION_TOL,
            n_samples,
        ),
        Some(e) => CheckResult::failed(CheckGroup::Permutation, "DSS graph relabelling", &e),
    });

    let (m, tree) = init(s, 9002, |t, r| {
        let m = SignNet::new("sn", k, &[5], 4, &[6], 3);
        m.init(t, r);
        m
    });
    out.push(perm_result(
        "SignNet row permutation",
        check_equivariance(
            |x: &Tensor| frozen(&tree, x, |t, p, v| m.forward(t, p, v)),
            |r| rng::gaussian_tensor(&[n, k], r),
            |_, r| random_permutation(n, r),
            Actions::ROWS,
            n_samples,
            PERMUTATION_TOL,
            s + 1,
        ),
    ));

    let (m, tree) = init(s, 9003, |t, r| {
        let m = UniversalPairDecoder::new("ud", k, 6);
        m.init(t, r);
        m
    });
    out.push(perm_result(
        "universal pair decoder row swap",
        check_equivariance(
            |x: &Tensor| frozen(&tree, x, |t, p, v| m.forward(t, p, v)),
            |r| rng::gaussian_tensor(&[3, 2, k], r),
            |_, _| GroupElement::Permutation(vec![1, 0]),
            Actions {
                input: Side::Axis(1),
                output: None,
            },
            n_samples,
            PERMUTATION_TOL,
            s + 2,
        ),
    ));
    out
}

// ---------------------------------------------------------------------------
// orthogonal wrapping

/// A cloud with well-separated covariance eigenvalues, randomly rotated.
pub fn well_conditioned_cloud(n: usize, k: usize, r: &mut Rng64) -> Tensor {
    let mut x = rng::gaussian_tensor(&[n, k], r);
    // whiten, then stretch axis j by (j + 1) so the spectrum is known
    let frame = crate::spectral::pca_frame(&x).expect("generic cloud");
    x = x.matmul(&frame.rotation).expect("k x k frame");
    for j in 0..k {
        let sd = frame.variances[j].sqrt().max(1e-12);
        for i in 0..n {
            let v = x.at(i, j) / sd * (1.0 + j as f64);
            x.set(i, j, v);
        }
    }
    let GroupElement::OrthogonalMatrix(q) = random_orthogonal(k, r) else {
        unreachable!()
    };
    x.matmul(&q).expect("k x k rotation")
}

fn orth_result<E: fmt::Display>(name: &str, report: Result<crate::symmetry::SymmetryReport, E>) -> CheckResult {
    match report {
        Ok(r) => CheckResult::new(CheckGroup::Orthogonal, name, r.max_violation, ORTHOGONAL_TOL, r.samples),
        Err(e) => CheckResult::failed(CheckGroup::Orthogonal, name, &e.to_string()),
    }
}

fn orthogonal_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let s = cfg.seed;
    let n = 10;
    let orth = Actions {
        input: Side::Columns,
        output: Some(Side::Columns),
    };
    for k in [3, 4, 6] {
        let (stack, st_tree) = init(s, 9500 + k as u64, |t, r| {
            let m = SignEqStack::new("st", k, &[n, 8, n], &[6], 6, &[6]);
            m.init(t, r);
            m
        });
        let inner = |x: &Tensor| -> Result<Tensor, ModelError> {
            let x3 = x.clone().reshaped(&[1, n, k])?;
            let y = frozen(&st_tree, &x3, |t, p, v| stack.forward(t, p, v))?;
            Ok(y.reshaped(&[n, k])?)
        };
        let w = WrappedModel::new(inner, WrapMode::Canonicalize);
        out.push(orth_result(
            &format!("canonicalized sign-equivariant stack k={k}"),
            check_equivariance(
                |x: &Tensor| w.forward(x),
                |r| well_conditioned_cloud(n, k, r),
                |_, r| random_orthogonal(k, r),
                orth,
                cfg.orthogonal_samples,
                ORTHOGONAL_TOL,
                s + k as u64,
            ),
        ));

        let (dss, d_tree) = init(s, 9600 + k as u64, |t, r| {
            let m = Dss::sign_eq_layers("d", k, &[1, 4, 1], &[6], 6, &[6], InvariantHead::Pooled).expect("valid dss");
            m.init(t, r);
            m
        });
        let inner = |x: &Tensor| -> Result<Tensor, ModelError> {
            let x4 = x.clone().reshaped(&[1, n, 1, k])?;
            let y = frozen(&d_tree, &x4, |t, p, v| dss.forward(t, p, v, &Aggregation::Complement))?;
            Ok(y.reshaped(&[n, k])?)
        };
        let w = WrappedModel::new(inner, WrapMode::Canonicalize);
        out.push(orth_result(
            &format!("canonicalized DSS k={k}"),
            check_equivariance(
                |x: &Tensor| w.forward(x),
                |r| well_conditioned_cloud(n, k, r),
                |_, r| random_orthogonal(k, r),
                orth,
                cfg.orthogonal_samples,
                ORTHOGONAL_TOL,
                s + 10 + k as u64,
            ),
        ));

        let (plain, p_tree) = init(s, 9700 + k as u64, |t, r| {
            let m = Mlp::new("base", vec![k, 8, k]).with_activation(Activation::Tanh);
            m.init(t, r);
            m
        });
        let base = |x: &Tensor| -> Result<Tensor, ModelError> {
            let bias = Tensor::full(&[n, k], 0.3);
            Ok(frozen(&p_tree, x, |t, p, v| plain.forward(t, p, v))?.zip_map(&bias, |a, b| a + b)?)
        };
        let w = WrappedModel::new(base, WrapMode::FrameAverage);
        out.push(orth_result(
            &format!("frame-averaged MLP k={k}"),
            check_equivariance(
                |x: &Tensor| w.forward(x),
                |r| well_conditioned_cloud(n, k, r),
                |_, r| random_orthogonal(k, r),
                orth,
                cfg.orthogonal_samples,
                ORTHOGONAL_TOL,
                s + 20 + k as u64,
            ),
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// gradients

fn model_err(e: ModelError) -> TensorError {
    TensorError::Invalid {
        op: "model",
        msg: e.to_string(),
    }
}

type Init<'a> = Box<dyn Fn(&mut ParamTree, &mut Rng64) + 'a>;
type Forward<'a> = Box<dyn Fn(&mut Tape, &crate::models::Bound, Var) -> Result<Var, ModelError> + 'a>;

struct GradCase<'a> {
    name: &'static str,
    input_shape: Vec<usize>,
    init: Init<'a>,
    forward: Forward<'a>,
}

/// Max relative gradient error over `instances` random draws of parameters,
/// input and a random linear readout. Instances within [`KINK_MARGIN`] of a
/// kink are redrawn; the number of redraws is returned alongside.
fn grad_case(case: &GradCase, instances: usize, seed: u64) -> Result<(f64, usize), String> {
    let mut worst: f64 = 0.0;
    let mut redraws = 0;
    let mut stream = 0u64;
    let mut done = 0;
    while done < instances {
        stream += 1;
        if redraws > 20 * instances {
            return Err(format!("{redraws} redraws near kinks"));
        }
        let mut r = rng::substream(seed, stream);
        let mut tree = ParamTree::new();
        (case.init)(&mut tree, &mut r);
        let x = rng::gaussian_tensor(&case.input_shape, &mut r);

        let mut tape = Tape::new();
        let p = tree.bind_frozen(&mut tape);
        let xv = tape.constant(x.clone());
        let y = (case.forward)(&mut tape, &p, xv).map_err(|e| e.to_string())?;
        if tape.min_kink_distance() < KINK_MARGIN {
            redraws += 1;
            continue;
        }
        let readout = rng::gaussian_tensor(tape.shape(y), &mut r);

        let mut inputs = vec![x];
        inputs.extend(tree.tensors().cloned());
        let err = grad_check_many(
            |tape, vars| {
                let p = tree.bind_vars(&vars[1..]).map_err(model_err)?;
                let y = (case.forward)(tape, &p, vars[0]).map_err(model_err)?;
                let w = tape.constant(readout.clone());
                let prod = tape.mul(y, w)?;
                Ok(tape.sum(prod))
            },
            &inputs,
            GRADIENT_STEP,
        )
        .map_err(|e| e.to_string())?;
        worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
        done += 1;
    }
    Ok((worst, redraws))
}

fn gradient_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    let k = 3;
    let g = random_graph(4, &mut rng::substream(cfg.seed, 7000));
    let adj = g.sparse_adjacency();
    let mlp = Mlp::new("m", vec![3, 4, 2]);
    let elem = SignEqElementwise::new("e", k, &[4]);
    let signnet = SignNet::new("sn", k, &[3], 3, &[4], 2);
    let full = SignEqLayer::new("l", 2, 2, k, &[3], 3, &[3], InvariantHead::Full);
    let pooled = SignEqLayer::new("l", 2, 2, k, &[3], 3, &[3], InvariantHead::Pooled);
    let dss_e = Dss::new("d", BlockKind::Elementwise, k, &[1, 1], 3, InvariantHead::Full).expect("valid");
    let dss_l = Dss::new("d", BlockKind::Layer, k, &[2, 1], 3, InvariantHead::Pooled).expect("valid");
    let dss_p = Dss::plain("d", k, &[2, 1], &[4]).expect("valid");
    let dec = PairDecoder::mlp_hadamard("pd", k, &[4]);
    let ud = UniversalPairDecoder::new("ud", k, 3);

    let cases: Vec<GradCase> = vec![
        GradCase {
            name: "MLP (relu)",
            input_shape: vec![3, 3],
            init: Box::new(|t, r| mlp.init(t, r)),
            forward: Box::new(|t, p, x| mlp.forward(t, p, x)),
        },
        GradCase {
            name: "v * MLP(|v|)",
            input_shape: vec![3, k],
            init: Box::new(|t, r| elem.init(t, r)),
            forward: Box::new(|t, p, x| elem.forward(t, p, x)),
        },
        GradCase {
            name: "SignNet",
            input_shape: vec![3, k],
            init: Box::new(|t, r| signnet.init(t, r)),
            forward: Box::new(|t, p, x| signnet.forward(t, p, x)),
        },
        GradCase {
            name: "sign-equivariant layer (full head)",
            input_shape: vec![2, 2, k],
            init: Box::new(|t, r| full.init(t, r)),
            forward: Box::new(|t, p, x| full.forward(t, p, x)),
        },
        GradCase {
            name: "sign-equivariant layer (pooled head)",
            input_shape: vec![2, 2, k],
            init: Box::new(|t, r| pooled.init(t, r)),
            forward: Box::new(|t, p, x| pooled.forward(t, p, x)),
        },
        GradCase {
            name: "DSS elementwise (complement)",
            input_shape: vec![2, 3, 1, k],
            init: Box::new(|t, r| dss_e.init(t, r)),
            forward: Box::new(|t, p, x| dss_e.forward(t, p, x, &Aggregation::Complement)),
        },
        GradCase {
            name: "DSS layer (graph)",
            input_shape: vec![1, 4, 2, k],
            init: Box::new(|t, r| dss_l.init(t, r)),
            forward: Box::new(|t, p, x| dss_l.forward(t, p, x, &Aggregation::Neighbors(Rc::clone(&adj)))),
        },
        GradCase {
            name: "DSS plain (complement)",
            input_shape: vec![2, 3, 2, k],
            init: Box::new(|t, r| dss_p.init(t, r)),
            forward: Box::new(|t, p, x| dss_p.forward(t, p, x, &Aggregation::Complement)),
        },
        GradCase {
            name: "MLP(z_i * z_j) decoder",
            input_shape: vec![3, 2, k],
            init: Box::new(|t, r| dec.init(t, r)),
            forward: Box::new(|t, p, x| dec.forward(t, p, x)),
        },
        GradCase {
            name: "universal pair decoder",
            input_shape: vec![2, 2, k],
            init: Box::new(|t, r| ud.init(t, r)),
            forward: Box::new(|t, p, x| ud.forward(t, p, x)),
        },
    ];
    cases
        .iter()
        .enumerate()
        .map(
            |(i, case)| match grad_case(case, cfg.gradient_instances, cfg.seed.wrapping_add(7100 + i as u64)) {
                Ok((worst, redraws)) => {
                    let mut r = CheckResult::new(
                        CheckGroup::Gradient,
                        format!("{} ({redraws} redraws)", case.name),
                        worst,
                        GRADIENT_TOL,
                        cfg.gradient_instances,
                    );
                    r.name = r.name.replace(" (0 redraws)", "");
                    r
                }
                Err(e) => CheckResult::failed(CheckGroup::Gradient, case.name, &e),
            },
        )
        .collect()
}

/// Convenience for callers that only need the verdict.
pub fn check(seed: u64) -> bool {
    run_suite(&SuiteConfig::new(seed)).passed()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SuiteConfig {
        SuiteConfig {
            seed,
            k_max: 3,
            permutation_samples: 5,
            orthogonal_samples: 5,
            gradient_instances: 3,
        }
    }

    #[test]
    fn small_suite_passes() {
        let rep = run_suite(&small(0));
        for r in rep.failures() {
            eprintln!("{r}");
        }
        assert!(rep.passed());
        assert!(rep.group(CheckGroup::Gradient).count() >= 10);
        assert!(rep.csv().lines().count() == rep.results.len() + 1);
    }

    #[test]
    fn graph_relabelling_is_consistent() {
        let g = Graph::from_edges(3, [(0, 1)]).unwrap();
        // new node 0 is old node 2, so the old edge (0, 1) becomes (1, 2)
        let h = relabel(&g, &[2, 0, 1]);
        assert!(h.has_edge(1, 2) && !h.has_edge(0, 1));
    }

    #[test]
    fn cloud_spectrum_is_separated() {
        let x = well_conditioned_cloud(10, 4, &mut rng::seeded(0));
        let f = crate::spectral::pca_frame(&x).unwrap();
        for w in f.variances.windows(2) {
            assert!((w[0] - w[1]).abs() > 0.5);
        }
    }

    #[test]
    fn broken_results_fail() {
        let r = CheckResult::new(CheckGroup::Signs, "x", 1e-3, SIGN_TOL, 1);
        assert!(!r.passed);
        let rep = SuiteReport { results: vec![r] };
        assert!(!rep.passed());
        assert!(rep.worst(CheckGroup::Signs).is_some());
    }
}
