//! The `sppll` command line.
//!
//! Exit codes: 0 success, 2 bad arguments or configuration, 3 unreadable or
//! unwritable files (including malformed datasets), 4 dataset without ground
//! truth where one is required. Diagnostics go to stderr; reports go to stdout
//! and, when requested, to files.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::baselines::{cross_validate_method, m3pl_fit, Method};
use crate::data_io::{corrupt_labels, format_plc, from_csv, load_dataset, save_dataset};
use crate::error::{Error, Result};
use crate::margin_solver::predict_all;
use crate::trainer::fit;
use crate::types::{PartialLabelDataset, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "sppll", version, about = "Self-paced max-margin partial-label learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a CSV file (last column = class) into a supervised PLC file.
    Convert(ConvertArgs),
    /// Turn a supervised PLC file into a partial-label one.
    Corrupt(CorruptArgs),
    /// Fit one model on a whole PLC file.
    Train(TrainArgs),
    /// Stratified k-fold cross-validation of one or more methods.
    Cv(CvArgs),
    /// Cross-validated accuracy over a grid of one parameter.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct ConvertArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// The first line holds column names.
    #[arg(long)]
    header: bool,
}

#[derive(Debug, Args)]
struct CorruptArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Share of instances that receive false candidate labels.
    #[arg(long)]
    p: f64,
    /// False labels added per corrupted instance.
    #[arg(long)]
    r: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Where to write the model (JSON).
    #[arg(long)]
    model_out: PathBuf,
    /// Where to write the training trace (JSON lines).
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// sp-pll or m3pl.
    #[arg(long, default_value = "sp-pll")]
    method: String,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct CvArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated subset of sp-pll, m3pl, pl-knn.
    #[arg(long, default_value = "sp-pll,m3pl,pl-knn")]
    methods: String,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Neighbours for pl-knn.
    #[arg(long, default_value_t = 10)]
    knn_k: usize,
    /// Also write the report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write one trace file per method and fold into this directory.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    /// lambda0 or cmax.
    #[arg(long)]
    param: Vec<String>,
    /// Comma-separated values.
    #[arg(long)]
    grid: String,
    #[arg(long, default_value = "sp-pll")]
    method: String,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 10)]
    knn_k: usize,
    /// Also write the TSV here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

/// Training options. A `--config` file supplies the base, flags override it.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// JSON file with any subset of the training options.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    c_init: Option<f64>,
    #[arg(long)]
    c_max: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    delta_ofv: Option<f64>,
    #[arg(long)]
    big_m: Option<f64>,
    #[arg(long)]
    svm_tol: Option<f64>,
    #[arg(long)]
    svm_max_iter: Option<usize>,
    #[arg(long)]
    inner_max_iter: Option<usize>,
    #[arg(long)]
    init_neighbors: Option<usize>,
    #[arg(long)]
    carry_pace: bool,
    #[arg(long)]
    no_standardize: bool,
    #[arg(long)]
    no_warm_start: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<TrainConfig> {
        let mut c = match &self.config {
            Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
            None => TrainConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { c.$field = v; })*
            };
        }
        set!(
            seed, c_init, c_max, delta, lambda0, mu, lambda_max, delta_ofv, big_m, svm_tol,
            svm_max_iter, inner_max_iter, init_neighbors
        );
        if self.carry_pace {
            c.carry_pace = true;
        }
        if self.no_standardize {
            c.standardize = false;
        }
        if self.no_warm_start {
            c.warm_start = false;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Report of `cv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub data: String,
    pub folds: usize,
    pub seed: u64,
    pub knn_k: usize,
    pub config: TrainConfig,
    pub methods: Vec<MethodReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub mean: f64,
    pub std: f64,
    /// `mean±std` rounded to three decimals.
    pub summary: String,
    pub fold_accuracies: Vec<f64>,
    pub wall_clock_seconds: f64,
    pub trace_paths: Vec<String>,
}

/// Summary printed by `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub data: String,
    pub method: Method,
    pub config: TrainConfig,
    pub n: usize,
    pub d: usize,
    pub q: usize,
    /// Share of training instances predicted as their true label, if known.
    pub training_accuracy: Option<f64>,
    pub assignment_violations: usize,
    pub pace_stages: usize,
    pub wall_clock_seconds: f64,
    pub model_path: String,
    pub trace_path: Option<String>,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                2
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    let outcome = match cli.command {
        Command::Convert(a) => convert(&a, stdout),
        Command::Corrupt(a) => corrupt(&a, stdout),
        Command::Train(a) => train(&a, stdout),
        Command::Cv(a) => cv(&a, stdout),
        Command::Sweep(a) => sweep(&a, stdout),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Parse { .. } | Error::Json(_) | Error::Validation(_) => 3,
        Error::NoGroundTruth => 4,
        _ => 2,
    }
}

fn convert(a: &ConvertArgs, stdout: &mut dyn Write) -> Result<()> {
    let text = fs::read_to_string(&a.input)?;
    let (dataset, classes) = from_csv(&text, a.header)?;
    save_dataset(&dataset, &a.out)?;
    let summary = serde_json::json!({
        "n": dataset.n(),
        "d": dataset.d(),
        "q": dataset.q(),
        "classes": classes,
        "out": a.out.display().to_string(),
    });
    writeln!(stdout, "{}", serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

fn corrupt(a: &CorruptArgs, stdout: &mut dyn Write) -> Result<()> {
    let clean = load_dataset(&a.input)?;
    let noisy = corrupt_labels(&clean, a.p, a.r, a.seed)?;
    let changed = (0..noisy.n())
        .filter(|&i| noisy.candidates()[i].len() > 1)
        .count();
    fs::write(&a.out, format_plc(&noisy))?;
    let summary = serde_json::json!({
        "n": noisy.n(),
        "corrupted": changed,
        "p": a.p,
        "r": a.r,
        "seed": a.seed,
        "out": a.out.display().to_string(),
    });
    writeln!(stdout, "{}", serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

fn train(a: &TrainArgs, stdout: &mut dyn Write) -> Result<()> {
    let config = a.config.resolve()?;
    let method: Method = a.method.parse()?;
    let dataset = load_dataset(&a.data)?;
    let start = Instant::now();
    let fitted = match method {
        Method::SpPll => fit(&dataset, &config)?,
        Method::M3pl => m3pl_fit(&dataset, &config)?,
        Method::PlKnn => {
            return Err(Error::Config(
                "train fits sp-pll or m3pl; pl-knn has no model (use cv)".into(),
            ))
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    fs::write(&a.model_out, serde_json::to_string_pretty(&fitted.model)?)?;
    if let Some(path) = &a.trace_out {
        fs::write(path, fitted.trace.to_jsonl())?;
    }
    let training_accuracy = match dataset.truth() {
        Some(truth) => {
            let predicted = predict_all(&fitted.model, dataset.features())?;
            let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
            Some(hits as f64 / dataset.n() as f64)
        }
        None => None,
    };
    let report = TrainReport {
        data: a.data.display().to_string(),
        method,
        config,
        n: dataset.n(),
        d: dataset.d(),
        q: dataset.q(),
        training_accuracy,
        assignment_violations: fitted.assignment.violations,
        pace_stages: fitted.trace.records.len(),
        wall_clock_seconds: seconds,
        model_path: a.model_out.display().to_string(),
        trace_path: a.trace_out.as_ref().map(|p| p.display().to_string()),
    };
    writeln!(stdout, "{}", serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let mut out: Vec<Method> = Vec::new();
    for token in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let m: Method = token.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no methods given".into()));
    }
    Ok(out)
}

fn check_folds(folds: usize) -> Result<()> {
    if folds < 2 {
        return Err(Error::Config("folds must be ≥ 2".into()));
    }
    Ok(())
}

fn load_with_truth(path: &Path) -> Result<PartialLabelDataset> {
    let dataset = load_dataset(path)?;
    if dataset.truth().is_none() {
        return Err(Error::NoGroundTruth);
    }
    Ok(dataset)
}

fn summary(mean: f64, std: f64) -> String {
    format!("{mean:.3}±{std:.3}")
}

fn cv(a: &CvArgs, stdout: &mut dyn Write) -> Result<()> {
    let config = a.config.resolve()?;
    check_folds(a.folds)?;
    let methods = parse_methods(&a.methods)?;
    let dataset = load_with_truth(&a.data)?;
    if let Some(dir) = &a.trace_dir {
        fs::create_dir_all(dir)?;
    }
    let mut reports = Vec::with_capacity(methods.len());
    for method in methods {
        let start = Instant::now();
        let outcome =
            cross_validate_method(method, &dataset, a.folds, &config, a.knn_k, config.seed)?;
        let seconds = start.elapsed().as_secs_f64();
        let mut trace_paths = Vec::new();
        if let Some(dir) = &a.trace_dir {
            for (f, trace) in outcome.traces.iter().enumerate() {
                let path = dir.join(format!("{}_fold{f}.jsonl", method.name()));
                fs::write(&path, trace.to_jsonl())?;
                trace_paths.push(path.display().to_string());
            }
        }
        reports.push(MethodReport {
            method,
            mean: outcome.mean,
            std: outcome.std,
            summary: summary(outcome.mean, outcome.std),
            fold_accuracies: outcome.fold_accuracies,
            wall_clock_seconds: seconds,
            trace_paths,
        });
    }
    let report = RunReport {
        data: a.data.display().to_string(),
        folds: a.folds,
        seed: config.seed,
        knn_k: a.knn_k,
        config,
        methods: reports,
    };
    let text = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(path) = &a.report {
        fs::write(path, &text)?;
    }
    stdout.write_all(text.as_bytes())?;
    Ok(())
}

/// Parameters `sweep` can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SweepParam {
    Lambda0,
    Cmax,
}

fn parse_sweep_param(params: &[String]) -> Result<SweepParam> {
    let names: Vec<&str> = params
        .iter()
        .flat_map(|p| p.split(','))
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .collect();
    match names.as_slice() {
        ["lambda0"] => Ok(SweepParam::Lambda0),
        ["cmax"] => Ok(SweepParam::Cmax),
        [other] => Err(Error::Config(format!(
            "unknown sweep parameter {other:?} (expected lambda0 or cmax)"
        ))),
        [] => Err(Error::Config("--param is required".into())),
        _ => Err(Error::Config(format!(
            "sweep varies exactly one parameter, got {}",
            names.join(", ")
        ))),
    }
}

fn parse_grid(grid: &str) -> Result<Vec<f64>> {
    let values = grid
        .split(',')
        .map(str::trim)
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Config(format!("grid value {t:?} is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(values)
}

fn sweep(a: &SweepArgs, stdout: &mut dyn Write) -> Result<()> {
    let param = parse_sweep_param(&a.param)?;
    let grid = parse_grid(&a.grid)?;
    let base = a.config.resolve()?;
    check_folds(a.folds)?;
    let method: Method = a.method.parse()?;
    let dataset = load_with_truth(&a.data)?;
    let name = match param {
        SweepParam::Lambda0 => "lambda0",
        SweepParam::Cmax => "cmax",
    };
    let mut table = String::from("param\tvalue\tmean\tstd\tseconds\n");
    for value in grid {
        let mut config = base.clone();
        match param {
            SweepParam::Lambda0 => config.lambda0 = value,
            SweepParam::Cmax => {
                config.c_max = value;
                config.c_init = config.c_init.min(value);
            }
        }
        config.validate()?;
        let start = Instant::now();
        let outcome =
            cross_validate_method(method, &dataset, a.folds, &config, a.knn_k, config.seed)?;
        table.push_str(&format!(
            "{name}\t{value}\t{:.6}\t{:.6}\t{:.3}\n",
            outcome.mean,
            outcome.std,
            start.elapsed().as_secs_f64()
        ));
    }
    if let Some(path) = &a.out {
        fs::write(path, &table)?;
    }
    stdout.write_all(table.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_tokens() {
        assert_eq!(parse_grid("0.3, 0.6,0.9").unwrap(), vec![0.3, 0.6, 0.9]);
        let err = parse_grid("0.1,abc,1").unwrap_err().to_string();
        assert!(err.contains("\"abc\""), "{err}");
        assert!(parse_grid("1,").is_err());
    }

    #[test]
    fn sweep_param_count() {
        let p = |v: &[&str]| parse_sweep_param(&v.iter().map(|s| s.to_string()).collect::<Vec<_>>());
        assert_eq!(p(&["lambda0"]).unwrap(), SweepParam::Lambda0);
        assert_eq!(p(&["cmax"]).unwrap(), SweepParam::Cmax);
        assert!(p(&["lambda0,cmax"]).is_err());
        assert!(p(&["lambda0", "cmax"]).is_err());
        assert!(p(&["mu"]).is_err());
    }

    #[test]
    fn methods_list() {
        assert_eq!(
            parse_methods("sp-pll, m3pl,sp-pll").unwrap(),
            vec![Method::SpPll, Method::M3pl]
        );
        assert!(parse_methods("svm").is_err());
        assert!(parse_methods(",").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::NoGroundTruth), 4);
        assert_eq!(exit_code(&Error::RTooLarge { r: 9, q: 4 }), 2);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 3);
    }

    #[test]
    fn summary_format() {
        assert_eq!(summary(0.7491, 0.0333), "0.749±0.033");
    }
}
