//! The `signeq` command line.
//!
//! Exit codes: 0 on success, 1 when a property check or experiment fails,
//! 2 for usage and configuration errors.
//!
//! Experiment settings come from an optional TOML file whose sections mirror
//! the experiment configs; command-line flags override file values, and the
//! effective config is echoed into every record. Output files are written
//! atomically under `--out-dir`, `$SIGNEQ_OUT_DIR`, the file's `out_dir`, or
//! `results`, in that order of precedence.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{dim_table, dim_table_csv};
use crate::experiments::linkpred::{ba_two_copy, er_two_copy, prepare_link_data, train_link_model};
use crate::experiments::nbody::{gen_nbody, train_nbody};
use crate::experiments::polyfit::fit_poly;
use crate::experiments::{
    ExperimentError, LinkModel, LinkPredConfig, NBodyConfig, NBodyModel, PolyFitConfig, PolyModel, ResultsRecord,
    CSV_HEADER,
};
use crate::suite::{run_suite, SuiteConfig};

pub const OUT_DIR_ENV: &str = "SIGNEQ_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Desk,
    Paper,
}

#[derive(Debug, Parser)]
#[command(name = "signeq", version, about = "Sign-equivariant networks on eigenvectors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the dimension table of equivariant maps as CSV.
    Dims {
        #[arg(long, default_value_t = 20)]
        kmax: u32,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the equivariance, invariance and gradient property suite.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Smaller sample counts for a fast smoke run.
        #[arg(long)]
        quick: bool,
        /// Print every check, not only failures and group summaries.
        #[arg(long, short)]
        verbose: bool,
    },
    /// Link prediction on two-copy random graphs.
    Linkpred(LinkArgs),
    /// Charged-particle dynamics with orthogonally equivariant models.
    Nbody(NBodyArgs),
    /// Fit random sign-equivariant polynomials.
    Polyfit(PolyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML file with run and experiment settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// First seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of consecutive seeds to run.
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long, value_enum)]
    pub scale: Option<Scale>,
    /// Shorthand for `--scale paper`.
    #[arg(long)]
    pub paper_scale: bool,
    /// Seeds run in parallel.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Zero wall times and timestamps so repeated runs write identical files.
    #[arg(long)]
    pub reproducible: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphFlag {
    Er,
    Ba,
}

#[derive(Debug, Clone, Args)]
pub struct LinkArgs {
    #[command(flatten)]
    pub common: Common,
    /// Preset two-copy graph (1000 nodes per copy, 1000 extra edges).
    #[arg(long, value_enum)]
    pub graph: Option<GraphFlag>,
    /// Model tags separated by commas, or `all`.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct NBodyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dimensions separated by commas, e.g. `3,4,5`.
    #[arg(long)]
    pub dim: Option<String>,
    /// `signeq_wrapped`, `frame_average` or `all`.
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct PolyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub degree: Option<u32>,
    /// `signeq` or `mlp`.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
}

/// Top level of a config file. Experiment sections are checked against the
/// experiment configs once flags have been merged in.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must match the subcommand when present.
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub seeds: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub scale: Option<Scale>,
    pub jobs: Option<usize>,
    /// Model tags to run; overrides `model` inside the section.
    pub models: Option<Vec<String>>,
    pub linkpred: Option<toml::Table>,
    pub nbody: Option<toml::Table>,
    pub polyfit: Option<toml::Table>,
}

/// Settings resolved from flags, environment and file.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub seeds: Vec<u64>,
    pub scale: Scale,
    pub jobs: usize,
    pub out_dir: PathBuf,
    pub reproducible: bool,
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    crate::tensor::tune_allocator();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Dims { kmax, out } => {
            if kmax == 0 || kmax > 20 {
                return Err(CliError::Usage(format!("--kmax must be in 1..=20, got {kmax}")));
            }
            let rows = dim_table(kmax).map_err(|e| CliError::Failed(e.to_string()))?;
            let csv = dim_table_csv(&rows);
            print!("{csv}");
            if let Some(path) = out {
                write_atomic(&path, csv.as_bytes())?;
            }
            if rows.iter().all(|r| r.consistent()) {
                Ok(EXIT_OK)
            } else {
                eprintln!("dimension counts disagree");
                Ok(EXIT_FAILURE)
            }
        }
        Command::Check { seed, quick, verbose } => {
            let mut cfg = SuiteConfig::new(seed);
            if quick {
                cfg.k_max = 4;
                cfg.permutation_samples = 10;
                cfg.orthogonal_samples = 10;
                cfg.gradient_instances = 5;
            }
            let report = run_suite(&cfg);
            print!("{}", format_report(&report, verbose));
            Ok(if report.passed() { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Linkpred(a) => run_link(&a),
        Command::Nbody(a) => run_nbody_cmd(&a),
        Command::Polyfit(a) => run_poly(&a),
    }
}

fn format_report(report: &crate::suite::SuiteReport, verbose: bool) -> String {
    let mut s = String::new();
    for r in &report.results {
        if verbose || !r.passed {
            writeln!(s, "{r}").expect("write to string");
        }
    }
    for g in crate::suite::CheckGroup::ALL {
        let n = report.group(g).count();
        let failed = report.group(g).filter(|r| !r.passed).count();
        if let Some(w) = report.worst(g) {
            writeln!(
                s,
                "{g:?}: {}/{n} passed, worst {:.3e} (tol {:.0e}) in {}",
                n - failed,
                w.value,
                w.tolerance,
                w.name
            )
            .expect("write to string");
        }
    }
    writeln!(
        s,
        "{}",
        if report.passed() {
            "all checks passed"
        } else {
            "CHECKS FAILED"
        }
    )
    .expect("write to string");
    s
}

// ---------------------------------------------------------------------------
// config resolution

/// Parses a config file, reporting the line of the first problem.
pub fn load_config(path: &Path) -> Result<(RunConfig, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let cfg: RunConfig = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((cfg, text))
}

fn resolve(common: &Common, file: &RunConfig, subcommand: &str) -> Result<Resolved> {
    if let Some(exp) = &file.experiment {
        if exp != subcommand {
            return Err(CliError::Config(format!(
                "config is for experiment `{exp}` but the subcommand is `{subcommand}`"
            )));
        }
    }
    let seed = common.seed.or(file.seed).unwrap_or(0);
    let n = common.seeds.or(file.seeds).unwrap_or(1);
    if n == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let jobs = common.jobs.or(file.jobs).unwrap_or(1);
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let scale = if common.paper_scale {
        Scale::Paper
    } else {
        common.scale.or(file.scale).unwrap_or_default()
    };
    let out_dir = common
        .out_dir
        .clone()
        .or_else(|| {
            std::env::var_os(OUT_DIR_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        })
        .or_else(|| file.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    Ok(Resolved {
        seeds: (seed..seed + n).collect(),
        scale,
        jobs,
        out_dir,
        reproducible: common.reproducible,
    })
}

fn file_and_text(common: &Common) -> Result<(RunConfig, String)> {
    match &common.config {
        Some(p) => load_config(p),
        None => Ok((RunConfig::default(), String::new())),
    }
}

/// Line of the first `key = ...` in `text`, for diagnostics. With `section`,
/// only lines after its `[section]` header are searched.
fn line_of(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let start = match section {
        Some(name) => text.lines().position(|l| l.trim() == format!("[{name}]"))? + 1,
        None => 0,
    };
    text.lines()
        .enumerate()
        .skip(start)
        .find(|(_, l)| {
            let t = l.trim_start();
            t.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|(i, _)| i + 1)
}

/// The field a serde error message is about: the unknown field if there is
/// one, else the section key named earliest in the message.
fn offending_key<'a>(msg: &str, keys: impl Iterator<Item = &'a String>) -> Option<String> {
    if let Some(rest) = msg.split("unknown field `").nth(1) {
        return rest.split('`').next().map(str::to_string);
    }
    keys.filter_map(|k| msg.find(&format!("`{k}`")).map(|pos| (pos, k)))
        .min()
        .map(|(_, k)| k.clone())
}

/// Overlays the file section on `base`, then parses the result strictly.
fn merge_section<T: serde::de::DeserializeOwned>(
    base: serde_json::Value,
    section: Option<&toml::Table>,
    name: &str,
    text: &str,
) -> Result<T> {
    let mut v = base;
    if let Some(table) = section {
        let overlay = serde_json::to_value(table).map_err(|e| CliError::Config(format!("[{name}]: {e}")))?;
        if let (Some(obj), Some(extra)) = (v.as_object_mut(), overlay.as_object()) {
            for (k, x) in extra {
                obj.insert(k.clone(), x.clone());
            }
        }
    }
    serde_json::from_value(v).map_err(|e| {
        let msg = e.to_string();
        let line = section
            .and_then(|t| offending_key(&msg, t.keys()))
            .and_then(|k| line_of(text, Some(name), &k))
            .map(|l| format!(" (line {l})"))
            .unwrap_or_default();
        CliError::Config(format!("[{name}]{line}: {msg}"))
    })
}

fn set<T: Serialize>(v: &mut serde_json::Value, key: &str, x: Option<T>) {
    if let Some(x) = x {
        v[key] = serde_json::to_value(x).expect("plain value");
    }
}

fn parse_list<T: serde::de::DeserializeOwned + Clone>(raw: &str, all: &[T]) -> Result<Vec<T>> {
    if raw == "all" {
        return Ok(all.to_vec());
    }
    raw.split(',')
        .map(|s| {
            serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
                .map_err(|_| CliError::Usage(format!("unknown model `{}`", s.trim())))
        })
        .collect()
}

/// Runs `work` over `items` on up to `jobs` threads; results keep item order.
fn parallel<T, R, F>(items: &[T], jobs: usize, work: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(&work).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|s| {
        for _ in 0..jobs.min(items.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = work(&items[i]);
                results.lock().expect("no panics while holding the lock")[i] = Some(r);
            });
        }
    });
    slots.into_iter().map(|r| r.expect("every item processed")).collect()
}

fn finish(
    experiment: &str,
    res: &Resolved,
    outcomes: Vec<std::result::Result<Vec<ResultsRecord>, ExperimentError>>,
) -> Result<i32> {
    let mut records = Vec::new();
    let mut first_err = None;
    for o in outcomes {
        match o {
            Ok(rs) => records.extend(rs),
            Err(e) => {
                eprintln!("error: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    if res.reproducible {
        records.iter_mut().for_each(ResultsRecord::strip_timing);
    }
    for r in &records {
        let mut line = format!("{} seed {}", r.model, r.seed);
        for (k, v) in &r.metrics {
            if k.ends_with("auc") || k.ends_with("mse") || k == "sign_violation" || k == "epoch_s" {
                write!(line, " {k}={v:.5}").expect("write to string");
            }
        }
        println!("{line}");
    }
    write_records(&res.out_dir, experiment, &records)?;
    match first_err {
        // invalid settings are caught when an experiment validates its config
        Some(ExperimentError::Config(msg)) => Err(CliError::Config(msg)),
        Some(e) => Err(e.into()),
        None => Ok(EXIT_OK),
    }
}

/// Writes `<experiment>.jsonl` (one record per line) and `<experiment>.csv`.
pub fn write_records(dir: &Path, experiment: &str, records: &[ResultsRecord]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut jsonl = String::new();
    let mut csv = format!("{CSV_HEADER}\n");
    for r in records {
        jsonl.push_str(&serde_json::to_string(r).map_err(|e| CliError::Failed(e.to_string()))?);
        jsonl.push('\n');
        csv.push_str(&r.csv_rows());
    }
    write_atomic(&dir.join(format!("{experiment}.jsonl")), jsonl.as_bytes())?;
    write_atomic(&dir.join(format!("{experiment}.csv")), csv.as_bytes())
}

/// Writes to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io(e)
    })
}

// ---------------------------------------------------------------------------
// experiments

fn run_link(a: &LinkArgs) -> Result<i32> {
    let (file, text) = file_and_text(&a.common)?;
    let res = resolve(&a.common, &file, "linkpred")?;
    let graph = match a.graph {
        Some(GraphFlag::Ba) => ba_two_copy(1000, 20, 1000),
        _ => er_two_copy(1000, 0.05, 1000),
    };
    if let (Some(sec), Some(g)) = (&file.linkpred, a.graph) {
        if sec.contains_key("graph") {
            eprintln!("note: --graph {g:?} overrides the graph in the config file");
        }
    }
    let base = serde_json::to_value(LinkPredConfig::new(graph.clone(), LinkModel::Signeq, 0)).expect("serializable");
    let cfg: LinkPredConfig = merge_section(base, file.linkpred.as_ref(), "linkpred", &text)?;
    let mut merged = serde_json::to_value(cfg).expect("serializable");
    if a.graph.is_some() {
        merged["graph"] = serde_json::to_value(graph).expect("serializable");
    }
    set(&mut merged, "epochs", a.common.epochs);
    set(&mut merged, "lr", a.common.lr);
    set(&mut merged, "k", a.k);
    let cfg: LinkPredConfig = serde_json::from_value(merged).map_err(|e| CliError::Config(e.to_string()))?;
    let models = match (&a.model, &file.models) {
        (Some(m), _) => parse_list(m, &LinkModel::ALL)?,
        (None, Some(list)) => parse_list(&list.join(","), &LinkModel::ALL)?,
        (None, None) if file.linkpred.as_ref().is_some_and(|s| s.contains_key("model")) => vec![cfg.model],
        (None, None) => LinkModel::ALL.to_vec(),
    };
    let outcomes = parallel(&res.seeds, res.jobs, |&seed| {
        let c = LinkPredConfig { seed, ..cfg.clone() };
        let data = prepare_link_data(&c)?;
        models
            .iter()
            .map(|&m| train_link_model(&LinkPredConfig { model: m, ..c.clone() }, &data).map(|o| o.record))
            .collect::<std::result::Result<Vec<_>, _>>()
    });
    finish("linkpred", &res, outcomes)
}

fn run_nbody_cmd(a: &NBodyArgs) -> Result<i32> {
    let (file, text) = file_and_text(&a.common)?;
    let res = resolve(&a.common, &file, "nbody")?;
    let mut defaults = NBodyConfig::new(NBodyModel::SignEqWrapped, 3, 0);
    if res.scale == Scale::Paper {
        defaults = defaults.paper_scale();
    }
    let cfg: NBodyConfig = merge_section(
        serde_json::to_value(defaults).expect("serializable"),
        file.nbody.as_ref(),
        "nbody",
        &text,
    )?;
    let mut v = serde_json::to_value(&cfg).expect("serializable");
    set(&mut v, "epochs", a.common.epochs);
    set(&mut v, "lr", a.common.lr);
    let cfg: NBodyConfig = serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))?;
    let dims: Vec<usize> = match &a.dim {
        Some(s) => s
            .split(',')
            .map(|d| {
                d.trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad dimension `{d}`")))
            })
            .collect::<Result<_>>()?,
        None => vec![cfg.dim],
    };
    let all = [NBodyModel::SignEqWrapped, NBodyModel::FrameAverage];
    let models = match (&a.model, &file.models) {
        (Some(m), _) => parse_list(m, &all)?,
        (None, Some(list)) => parse_list(&list.join(","), &all)?,
        (None, None) if file.nbody.as_ref().is_some_and(|s| s.contains_key("model")) => vec![cfg.model],
        (None, None) => all.to_vec(),
    };
    let tasks: Vec<(u64, usize)> = res
        .seeds
        .iter()
        .flat_map(|&s| dims.iter().map(move |&d| (s, d)))
        .collect();
    let outcomes = parallel(&tasks, res.jobs, |&(seed, dim)| {
        let c = NBodyConfig {
            seed,
            dim,
            ..cfg.clone()
        };
        let data = gen_nbody(&c)?;
        models
            .iter()
            .map(|&m| train_nbody(&NBodyConfig { model: m, ..c.clone() }, &data).map(|o| o.record))
            .collect::<std::result::Result<Vec<_>, _>>()
    });
    finish("nbody", &res, outcomes)
}

fn run_poly(a: &PolyArgs) -> Result<i32> {
    let (file, text) = file_and_text(&a.common)?;
    let res = resolve(&a.common, &file, "polyfit")?;
    let cfg: PolyFitConfig = merge_section(
        serde_json::to_value(PolyFitConfig::new(4, 4, 0)).expect("serializable"),
        file.polyfit.as_ref(),
        "polyfit",
        &text,
    )?;
    let mut v = serde_json::to_value(&cfg).expect("serializable");
    set(&mut v, "k", a.k);
    set(&mut v, "degree", a.degree);
    set(&mut v, "steps", a.steps);
    set(&mut v, "lr", a.common.lr);
    if a.common.epochs.is_some() {
        return Err(CliError::Usage("polyfit counts Adam steps; use --steps".into()));
    }
    let cfg: PolyFitConfig = serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))?;
    let models = match &a.model {
        Some(m) => parse_list(m, &[PolyModel::Signeq, PolyModel::Mlp])?,
        None => vec![cfg.model],
    };
    let tasks: Vec<(u64, PolyModel)> = res
        .seeds
        .iter()
        .flat_map(|&s| models.iter().map(move |&m| (s, m)))
        .collect();
    let outcomes = parallel(&tasks, res.jobs, |&(seed, model)| {
        fit_poly(&PolyFitConfig {
            seed,
            model,
            ..cfg.clone()
        })
        .map(|o| vec![o.record])
    });
    finish("polyfit", &res, outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["signeq"]), EXIT_USAGE);
        assert_eq!(run(["signeq", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["signeq", "dims", "--kmax", "0"]), EXIT_USAGE);
        assert_eq!(run(["signeq", "linkpred", "--model", "nope"]), EXIT_USAGE);
    }

    #[test]
    fn help_exits_0() {
        assert_eq!(run(["signeq", "--help"]), EXIT_OK);
    }

    #[test]
    fn line_lookup() {
        let text = "seed = 1\n[polyfit]\n  bogus = 3\nseed = 2\n";
        assert_eq!(line_of(text, None, "bogus"), Some(3));
        assert_eq!(line_of(text, None, "seed"), Some(1));
        assert_eq!(line_of(text, Some("polyfit"), "seed"), Some(4));
        assert_eq!(line_of(text, None, "missing"), None);
        let keys = ["k".to_string(), "stepz".to_string()];
        let msg = "unknown field `stepz`, expected one of `k`, `degree`";
        assert_eq!(offending_key(msg, keys.iter()).as_deref(), Some("stepz"));
        let msg = "invalid type for `k`";
        assert_eq!(offending_key(msg, keys.iter()).as_deref(), Some("k"));
    }

    #[test]
    fn unknown_section_key_is_reported_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[polyfit]\nk = 3\nbogus = 1\n").unwrap();
        let (file, text) = load_config(&path).unwrap();
        let err = merge_section::<PolyFitConfig>(
            serde_json::to_value(PolyFitConfig::new(4, 4, 0)).unwrap(),
            file.polyfit.as_ref(),
            "polyfit",
            &text,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus") && msg.contains("line 3"), "{msg}");
        assert_eq!(err.exit_code(), EXIT_USAGE);
        std::fs::write(&path, "sed = 1\n").unwrap();
        assert!(load_config(&path).is_err());
    }

    #[test]
    fn flags_override_file_and_env() {
        let file = RunConfig {
            seed: Some(5),
            seeds: Some(2),
            out_dir: Some("from_file".into()),
            ..RunConfig::default()
        };
        let common = Common {
            config: None,
            seed: Some(1),
            seeds: None,
            scale: None,
            paper_scale: true,
            jobs: None,
            out_dir: Some("from_flag".into()),
            reproducible: false,
            epochs: None,
            lr: None,
        };
        let r = resolve(&common, &file, "nbody").unwrap();
        assert_eq!(r.seeds, vec![1, 2]);
        assert_eq!(r.scale, Scale::Paper);
        assert_eq!(r.out_dir, PathBuf::from("from_flag"));
        let wrong = RunConfig {
            experiment: Some("polyfit".into()),
            ..RunConfig::default()
        };
        assert!(resolve(&common, &wrong, "nbody").is_err());
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn parallel_keeps_order() {
        let items: Vec<u64> = (0..20).collect();
        let out = parallel(&items, 4, |&x| x * x);
        assert_eq!(out, items.iter().map(|x| x * x).collect::<Vec<_>>());
    }
}
