//! The `plca` command line tool.
//!
//! Machine-readable results go to standard output as `key=value` lines;
//! progress and diagnostics go to standard error. Exit codes: `0` success,
//! `2` bad flags or invalid input, `1` internal or output failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;

use crate::em::{fit, FitConfig, FitTrace};
use crate::error::PlcaError;
use crate::io;
use crate::model::PlcaModel;
use crate::objective::{build_empirical, fobj, kld, sample_loglik, EmpiricalDistribution};
use crate::reference::grid_search_fobj;
use crate::sampler::{corpus_to_counts, sample_corpus};

#[derive(Debug, Parser)]
#[command(name = "plca", version, about = "Probabilistic latent component analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model to a non-negative CSV matrix (rows = events, columns = groups)
    Fit(FitArgs),
    /// Draw (event, group) pairs from a model
    Sample(SampleArgs),
    /// Evaluate a model against a matrix and/or a corpus
    Eval(EvalArgs),
    /// Write the model's joint distribution as a CSV matrix
    Reconstruct(ReconstructArgs),
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Restart i uses seed + i; the lowest final objective wins
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    rel_tol: f64,
    #[arg(long)]
    out_model: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Treat CSV rows as groups and columns as events
    #[arg(long)]
    transpose: bool,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_corpus: PathBuf,
    #[arg(long)]
    out_counts: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    /// Also report the brute-force grid minimum of the objective
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = 100)]
    resolution: usize,
    #[arg(long)]
    transpose: bool,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Total mass of the written matrix (default 1)
    #[arg(long)]
    scale: Option<f64>,
}

enum Failure {
    Usage(PlcaError),
    Internal(PlcaError),
}

impl From<PlcaError> for Failure {
    fn from(e: PlcaError) -> Self {
        Failure::Usage(e)
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Runs the tool with `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a, out, err),
        Command::Sample(a) => cmd_sample(a, out, err),
        Command::Eval(a) => cmd_eval(a, out, err),
        Command::Reconstruct(a) => cmd_reconstruct(a, out, err),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(e)) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
        Err(Failure::Internal(e)) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn emit(out: &mut dyn Write, line: String) -> CmdResult {
    writeln!(out, "{line}").map_err(|e| Failure::Internal(PlcaError::io("<stdout>", e)))
}

fn load_empirical(path: &PathBuf, transpose: bool) -> Result<EmpiricalDistribution, PlcaError> {
    let raw = io::read_matrix(path)?;
    let raw = if transpose { raw.t().to_owned() } else { raw };
    build_empirical(&raw)
}

/// Fits once per restart with seeds `base.seed + i` and keeps the lowest
/// final objective, preferring the lower seed on ties. Returns the winning
/// seed alongside the model and trace.
pub fn fit_restarts(
    pi: &EmpiricalDistribution,
    base: &FitConfig,
    restarts: usize,
) -> crate::Result<(PlcaModel, FitTrace, u64)> {
    if restarts == 0 {
        return Err(PlcaError::Validation("restarts must be at least 1".into()));
    }
    let mut best: Option<(PlcaModel, FitTrace, u64)> = None;
    for i in 0..restarts {
        let seed = base.seed.wrapping_add(i as u64);
        let cfg = base.clone().with_seed(seed);
        let (model, trace) = fit(pi, &cfg)?;
        let better = match &best {
            None => true,
            Some((_, t, _)) => trace.final_fobj() < t.final_fobj() || t.final_fobj().is_nan(),
        };
        if better {
            best = Some((model, trace, seed));
        }
    }
    Ok(best.expect("at least one restart"))
}

fn cmd_fit(a: FitArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let pi = load_empirical(&a.input, a.transpose)?;
    let cfg = FitConfig::new(a.k)
        .with_seed(a.seed)
        .with_max_iters(a.max_iters)
        .with_rel_tol(a.rel_tol);
    cfg.validate()?;
    let (model, trace, seed) = fit_restarts(&pi, &cfg, a.restarts)?;
    let _ = writeln!(
        err,
        "fit: M={} N={} k={} restarts={} best_seed={} iterations={} terminated: {}",
        pi.n_events(),
        pi.n_groups(),
        a.k,
        a.restarts,
        seed,
        trace.iterations(),
        trace.termination
    );
    if let Some(path) = &a.out_model {
        io::write_model(&model, path).map_err(Failure::Internal)?;
    }
    if let Some(path) = &a.trace {
        io::write_trace(&trace, path).map_err(Failure::Internal)?;
    }
    emit(
        out,
        format!(
            "fobj={} kld={}",
            io::fmt_f64(fobj(&pi, &model)?),
            io::fmt_f64(kld(&pi, &model)?)
        ),
    )
}

fn cmd_sample(a: SampleArgs, _out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let model = io::read_model(&a.model)?;
    let corpus = sample_corpus(&model, a.n, a.seed)?;
    let dims = (model.n_events(), model.n_groups());
    io::write_corpus(&corpus, dims, &a.out_corpus).map_err(Failure::Internal)?;
    if let Some(path) = &a.out_counts {
        let counts = corpus_to_counts(&corpus, dims)?;
        io::write_matrix(&counts, path).map_err(Failure::Internal)?;
    }
    let _ = writeln!(err, "sample: wrote {} pairs (seed {})", corpus.len(), a.seed);
    Ok(())
}

fn cmd_eval(a: EvalArgs, out: &mut dyn Write, _err: &mut dyn Write) -> CmdResult {
    if a.input.is_none() && a.corpus.is_none() {
        return Err(PlcaError::Validation("eval needs --input and/or --corpus".into()).into());
    }
    if a.oracle && a.input.is_none() {
        return Err(PlcaError::Validation("--oracle requires --input".into()).into());
    }
    let model = io::read_model(&a.model)?;
    let mut lines = Vec::new();

    if let Some(path) = &a.input {
        let pi = load_empirical(path, a.transpose)?;
        lines.push(format!(
            "kld={} fobj={}",
            io::fmt_f64(kld(&pi, &model)?),
            io::fmt_f64(fobj(&pi, &model)?)
        ));
        if a.oracle {
            let (_, best) = grid_search_fobj(&pi, model.n_classes(), a.resolution)?;
            lines.push(format!("oracle_fobj={}", io::fmt_f64(best)));
        }
    }
    if let Some(path) = &a.corpus {
        let (corpus, dims) = io::read_corpus(path)?;
        if dims != (model.n_events(), model.n_groups()) {
            return Err(PlcaError::Shape(format!(
                "corpus is declared {}x{}, model is {}x{}",
                dims.0,
                dims.1,
                model.n_events(),
                model.n_groups()
            ))
            .into());
        }
        lines.push(format!("sample_loglik={}", io::fmt_f64(sample_loglik(&corpus, &model)?)));
    }
    for line in lines {
        emit(out, line)?;
    }
    Ok(())
}

fn cmd_reconstruct(a: ReconstructArgs, _out: &mut dyn Write, _err: &mut dyn Write) -> CmdResult {
    let model = io::read_model(&a.model)?;
    let joint: Array2<f64> = model.joint_table();
    let joint = match a.scale {
        None => joint,
        Some(s) if s > 0.0 && s.is_finite() => joint * s,
        Some(s) => {
            return Err(PlcaError::Validation(format!("--scale must be positive, got {s}")).into())
        }
    };
    io::write_matrix(&joint, &a.out).map_err(Failure::Internal)?;
    Ok(())
}
