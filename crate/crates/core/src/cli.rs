//! Command-line front end: `synth`, `mask`, `select`, `eval`, `wilcoxon`.
//!
//! Exit codes: 0 success, 2 invalid input or flags, 1 runtime failure.
//! Output files are written to a temporary sibling and renamed into place.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{self, Dataset, MaskSpec};
use crate::error::{Error, Result};
use crate::eval::{self, EvalConfig};
use crate::fuzzy::{AlphaBand, TrapezoidParams};
use crate::lfa::LfaConfig;
use crate::selector::{self, CiTestKind, SelectorConfig};

#[derive(Debug, Parser)]
#[command(name = "osfsu", version, about = "Online sparse streaming feature selection")]
pub struct Cli {
    /// Seed for every random choice (masking, folds, factor initialization).
    #[arg(long, global = true, env = "OSFSU_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for independent folds and sweep points.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset CSV plus its ground-truth JSON.
    Synth(SynthArgs),
    /// Mask a fraction of feature cells as missing.
    Mask(MaskArgs),
    /// Run online feature selection over the columns of a CSV.
    Select(SelectArgs),
    /// Cross-validate the selector with a KNN classifier.
    Eval(EvalArgs),
    /// Wilcoxon signed-ranks comparison of two accuracy lists.
    Wilcoxon(WilcoxonArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub instances: usize,
    #[arg(long)]
    pub features: usize,
    #[arg(long)]
    pub relevant: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Dataset CSV path; ground truth goes next to it as `<stem>.truth.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub rate: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectorArgs {
    #[arg(long, default_value_t = 15)]
    pub block_size: usize,
    #[arg(long, default_value_t = 5)]
    pub latent_dim: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub eta: f64,
    #[arg(long, default_value_t = 1000)]
    pub lmax: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.1)]
    pub init_scale: f64,
    #[arg(long, default_value_t = 0.01)]
    pub alpha_min: f64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha_max: f64,
    /// Trapezoid corners a,b,c,d mapping block missing rate to the threshold.
    #[arg(long, value_delimiter = ',', num_args = 4, default_values_t = [0.0, 0.5, 0.9, 1.0])]
    pub trapezoid: Vec<f64>,
    /// Neighborhood radius on min-max scaled values.
    #[arg(long, default_value_t = 0.15)]
    pub radius: f64,
    /// Largest conditioning set tried in redundancy analysis.
    #[arg(long, default_value_t = 3)]
    pub max_cond: usize,
    /// Treat features as discrete codes and use the G² test.
    #[arg(long)]
    pub discrete: bool,
    /// Replace observed cells by their reconstruction as well.
    #[arg(long)]
    pub reconstruct_observed: bool,
}

impl SelectorArgs {
    pub fn to_config(&self, seed: u64) -> Result<SelectorConfig> {
        let t = &self.trapezoid;
        let cfg = SelectorConfig {
            block_size: self.block_size,
            lfa: LfaConfig {
                dim: self.latent_dim,
                lambda: self.lambda,
                eta: self.eta,
                max_epochs: self.lmax,
                tol: self.tol,
                init_seed: seed,
                init_scale: self.init_scale,
            },
            band: AlphaBand::new(self.alpha_min, self.alpha_max)?,
            trapezoid: TrapezoidParams::new(t[0], t[1], t[2], t[3])?,
            max_cond: self.max_cond,
            radius: self.radius,
            seed,
            ci_test: if self.discrete {
                CiTestKind::GSquared
            } else {
                CiTestKind::FisherZ
            },
            reconstruct_observed: self.reconstruct_observed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub selector: SelectorArgs,
    /// Selection result JSON; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-column decision log (JSON lines).
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub selector: SelectorArgs,
    /// Missing rate applied to each training split.
    #[arg(long, default_value_t = 0.1, conflicts_with = "sweep")]
    pub rate: f64,
    /// Missing-rate grid `start:stop:step`, both ends inclusive.
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 3)]
    pub knn: usize,
    /// Report JSON (single rate) or plot-ready CSV (sweep); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WilcoxonArgs {
    /// Accuracies of the first algorithm, one number per line or comma separated.
    pub a: PathBuf,
    /// Accuracies of the second algorithm, paired with `a` by position.
    pub b: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `start:stop:step` into an inclusive grid snapped to 1e-9.
pub fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::validation(format!("sweep must be start:stop:step, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if step.is_nan() || step <= 0.0 || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(bad());
    }
    let snap = |v: f64| (v * 1e9).round() / 1e9;
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| snap(start + i as f64 * step)).collect())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| {
        Error::validation(format!("cannot open {}: {e}", path.display()))
    })?;
    Dataset::load_csv(BufReader::new(file))
}

fn csv_bytes(d: &Dataset) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    d.write_csv(&mut buf)?;
    Ok(buf)
}

fn json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    Ok(buf)
}

fn truth_path(out: &Path) -> PathBuf {
    out.with_extension("truth.json")
}

fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::validation(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for tok in line.split([',', ' ', '\t']).filter(|t| !t.is_empty()) {
            out.push(tok.parse::<f64>().map_err(|_| Error::Parse {
                row: Some(line_no + 1),
                message: format!("{}: {tok:?} is not a number", path.display()),
            })?);
        }
    }
    Ok(out)
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(args) => {
            let (d, truth) =
                data::generate_synthetic(args.instances, args.features, args.relevant, args.noise, cli.seed)?;
            write_atomic(&args.out, &csv_bytes(&d)?)?;
            write_atomic(&truth_path(&args.out), &json_bytes(&truth)?)?;
        }
        Command::Mask(args) => {
            let spec = MaskSpec::new(args.rate, cli.seed)?;
            let d = read_dataset(&args.input)?;
            write_atomic(&args.out, &csv_bytes(&data::sparsify(&d, spec))?)?;
        }
        Command::Select(args) => {
            let cfg = args.selector.to_config(cli.seed)?;
            let d = read_dataset(&args.input)?;
            let outcome = selector::run(d.stream_columns(), d.labels(), &cfg)?;
            let mut doc = outcome.to_json(&cfg);
            if let Some(trace_path) = &args.trace {
                doc["lfa"] = serde_json::to_value(&outcome.block_reports)?;
                let mut lines = Vec::new();
                for rec in &outcome.trace {
                    serde_json::to_writer(&mut lines, rec)?;
                    lines.push(b'\n');
                }
                write_atomic(trace_path, &lines)?;
            }
            emit(args.out.as_deref(), &json_bytes(&doc)?)?;
        }
        Command::Eval(args) => {
            let cfg = args.selector.to_config(cli.seed)?;
            let d = read_dataset(&args.input)?;
            let eval_cfg = EvalConfig {
                theta: args.rate,
                folds: args.folds,
                knn_k: args.knn,
                seed: cli.seed,
                jobs: cli.jobs.max(1),
            };
            match &args.sweep {
                Some(spec) => {
                    let thetas = parse_sweep(spec)?;
                    let reports = eval::sweep(&d, &cfg, &thetas, &eval_cfg)?;
                    emit(args.out.as_deref(), eval::sweep_csv(&reports).as_bytes())?;
                }
                None => {
                    let report = eval::cross_validate(&d, &cfg, &eval_cfg)?;
                    emit(args.out.as_deref(), &json_bytes(&report)?)?;
                }
            }
        }
        Command::Wilcoxon(args) => {
            let a = read_numbers(&args.a)?;
            let b = read_numbers(&args.b)?;
            let r = eval::wilcoxon_signed_ranks(&a, &b)?;
            let decision = if r.reject { "reject" } else { "accept" };
            let mut text = format!(
                "R+ = {}\nR- = {}\nR_m = {}\nN = {}\nz = {:.4}\ndecision: {decision}\n",
                r.r_plus, r.r_minus, r.r_min, r.n_effective, r.z
            );
            if r.degenerate {
                text.push_str("note: all differences are zero\n");
            }
            print!("{text}");
            if let Some(out) = &args.out {
                write_atomic(out, &json_bytes(&r)?)?;
            }
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = err.exit_code();
            let _ = err.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_user_error() {
                2
            } else {
                1
            }
        }
    }
}
