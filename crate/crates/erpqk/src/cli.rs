//! Command-line interface: subject generation, pipeline runs, Gram export,
//! and report rendering.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 runtime failure
//! (I/O, fitting, numerics).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use crate::dataset_io::{save_subject, synth_generate, NoiseKind, SynthParams};
use crate::error::{Error, Result};
use crate::evaluation::{
    run_pipeline, Backend, Classifier, CvReport, FoldOutcome, PipelineConfig,
};
use crate::par::with_threads;
use crate::quantum_kernel::{gram, write_gram_csv, KernelBackend};

#[derive(Parser, Debug)]
#[command(
    name = "erpqk",
    version,
    about = "ERP classification with Riemannian features and a quantum-fidelity kernel"
)]
pub struct Cli {
    /// Cap on worker threads (0 = library default).
    #[arg(long, global = true, env = "ERPQK_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
#[allow(clippy::large_enum_variant)] // parsed once at startup
pub enum Command {
    /// Generate a synthetic oddball subject and save it as a subject directory.
    Synth(SynthArgs),
    /// Run the cross-validated pipeline and emit a JSON report.
    Run(RunArgs),
    /// Compute a quantum-kernel Gram matrix for a CSV of feature vectors.
    Kernel(KernelArgs),
    /// Render a saved JSON report as a human-readable summary.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    White,
    Pink,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output subject directory (created; parent must exist).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Evoked peak amplitude relative to unit noise std.
    #[arg(long, default_value_t = 1.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 128)]
    pub targets: usize,
    #[arg(long, default_value_t = 640)]
    pub nontargets: usize,
    #[arg(long, default_value_t = 16)]
    pub channels: usize,
    #[arg(long, default_value_t = 128.0)]
    pub fs: f64,
    #[arg(long, value_enum, default_value = "pink")]
    pub noise: NoiseArg,
    /// Evoked peak latency after stimulus onset, seconds.
    #[arg(long, default_value_t = 0.3)]
    pub latency: f64,
    /// Evoked peak width (Gaussian sigma), seconds.
    #[arg(long, default_value_t = 0.1)]
    pub width: f64,
    /// Relative per-trial amplitude jitter.
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Flat key=value config file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Subject directory (config key `data_dir`).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub classifier: Option<ClassifierArg>,
    #[arg(long)]
    pub backend: Option<BackendArg>,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub regularization: Option<f64>,
    /// Interpret --regularization as a ridge weight: C = 1/(value * n_train).
    #[arg(long)]
    pub as_lambda: bool,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub nfilter: Option<usize>,
    #[arg(long)]
    pub shrinkage: Option<f64>,
    #[arg(long)]
    pub band_lo: Option<f64>,
    #[arg(long)]
    pub band_hi: Option<f64>,
    #[arg(long)]
    pub tmin_ms: Option<f64>,
    #[arg(long)]
    pub tmax_ms: Option<f64>,
    /// Min-max rescale quantum-kernel inputs to [0, pi], bounds from the
    /// training fold.
    #[arg(long)]
    pub scale_features: bool,
    /// Write the JSON report here (atomically) instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write a per-fold CSV (`fold,split,ba,f1,fit_s,predict_s`) here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Zero wall-clock fields so identical runs serialize identically.
    #[arg(long)]
    pub no_timings: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassifierArg {
    Mdm,
    Svc,
    Qsvc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Exact,
    Shots,
}

#[derive(Args, Debug)]
pub struct KernelArgs {
    /// Input CSV, one feature vector per row, no header.
    #[arg(long)]
    pub input: PathBuf,
    /// Output CSV for the Gram matrix.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    pub backend: BackendArg,
    #[arg(long, default_value_t = 1024)]
    pub shots: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub reps: usize,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// JSON report produced by `run`.
    pub report: PathBuf,
    /// Also re-emit the per-fold CSV here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Parse arguments, dispatch, and translate errors into the exit-code
/// contract.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let threads = cli.threads;
    match with_threads(threads, move || dispatch(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}

/// 1 for bad inputs the caller can fix at the command line, 2 for failures
/// at run time.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) | Error::Config(_) => 1,
        _ => 2,
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => cmd_synth(&a),
        Command::Run(a) => cmd_run(&a),
        Command::Kernel(a) => cmd_kernel(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let params = SynthParams {
        n_channels: args.channels,
        fs: args.fs,
        n_target: args.targets,
        n_nontarget: args.nontargets,
        peak_latency_s: args.latency,
        peak_width_s: args.width,
        snr: args.snr,
        mixing: None,
        noise: match args.noise {
            NoiseArg::White => NoiseKind::White,
            NoiseArg::Pink => NoiseKind::Pink,
        },
        amplitude_jitter: args.jitter,
        seed: args.seed,
    };
    let rec = synth_generate(&params)?;
    let subject_id = args
        .out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "subject".to_string());
    save_subject(&rec, &subject_id, &args.out)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&params).map_err(|e| Error::Parameter(e.to_string()))?
    );
    Ok(())
}

fn resolve_config(args: &RunArgs) -> Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Load {
                path: path.clone(),
                detail: e.to_string(),
            })?;
            PipelineConfig::from_text(&text)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(d) = &args.data {
        cfg.data_dir = d.clone();
    }
    if let Some(c) = args.classifier {
        cfg.classifier = match c {
            ClassifierArg::Mdm => Classifier::Mdm,
            ClassifierArg::Svc => Classifier::Svc,
            ClassifierArg::Qsvc => Classifier::Qsvc,
        };
    }
    if let Some(b) = args.backend {
        cfg.backend = match b {
            BackendArg::Exact => Backend::Exact,
            BackendArg::Shots => Backend::Shots,
        };
    }
    macro_rules! opt {
        ($field:ident) => {
            if let Some(v) = args.$field {
                cfg.$field = v;
            }
        };
    }
    opt!(shots);
    opt!(reps);
    opt!(gamma);
    opt!(regularization);
    opt!(max_iter);
    opt!(tol);
    opt!(folds);
    opt!(seed);
    opt!(nfilter);
    opt!(shrinkage);
    opt!(band_lo);
    opt!(band_hi);
    opt!(tmin_ms);
    opt!(tmax_ms);
    if args.as_lambda {
        cfg.as_lambda = true;
    }
    if args.scale_features {
        cfg.scale_features = true;
    }
    Ok(cfg)
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let cfg = resolve_config(args)?;
    let mut report = run_pipeline(&cfg)?;
    if args.no_timings {
        report.strip_timings();
    }
    let json = report.to_json()?;
    match &args.report {
        Some(path) => write_atomic(path, json.as_bytes())?,
        None => println!("{json}"),
    }
    if let Some(path) = &args.csv {
        write_atomic(path, per_fold_csv(&report).as_bytes())?;
    }
    Ok(())
}

fn per_fold_csv(report: &CvReport) -> String {
    let mut out = String::from("fold,split,ba,f1,fit_s,predict_s\n");
    for fold in report.ok_folds() {
        for (split, ba, f1) in [
            ("train", fold.train_ba, fold.train_f1),
            ("test", fold.test_ba, fold.test_f1),
        ] {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fold.fold, split, ba, f1, fold.fit_seconds, fold.predict_seconds
            ));
        }
    }
    out
}

fn cmd_kernel(args: &KernelArgs) -> Result<()> {
    let features = read_feature_csv(&args.input)?;
    let backend = match args.backend {
        BackendArg::Exact => KernelBackend::Exact,
        BackendArg::Shots => KernelBackend::Shots { shots: args.shots, seed: args.seed },
    };
    let k = gram(&features, None, args.reps, backend)?;
    write_gram_csv(k.values(), &args.out)
}

/// Read one feature vector per row; every row must have the same arity.
fn read_feature_csv(path: &Path) -> Result<Vec<DVector<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Load { path: path.to_path_buf(), detail: e.to_string() })?;
    let mut rows: Vec<DVector<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| Error::Load { path: path.to_path_buf(), detail: e.to_string() })?;
        let mut row = Vec::with_capacity(record.len());
        for (j, field) in record.iter().enumerate() {
            row.push(field.trim().parse::<f64>().map_err(|_| {
                Error::Parameter(format!("row {i}, column {j}: `{field}` is not a number"))
            })?);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parameter(format!(
                    "ragged CSV: row {i} has {} columns, row 0 has {}",
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(DVector::from_vec(row));
    }
    if rows.is_empty() {
        return Err(Error::Parameter("input CSV has no rows".into()));
    }
    Ok(rows)
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&args.report).map_err(|e| Error::Load {
        path: args.report.clone(),
        detail: e.to_string(),
    })?;
    let report = CvReport::from_json(&text)?;
    print!("{}", render_report(&report));
    if let Some(path) = &args.csv {
        write_atomic(path, per_fold_csv(&report).as_bytes())?;
    }
    Ok(())
}

fn render_report(report: &CvReport) -> String {
    use std::fmt::Write;
    let cfg = &report.config_echo;
    let mut out = String::new();
    let _ = writeln!(out, "subject     {}", report.subject_id);
    let _ = writeln!(
        out,
        "pipeline    {:?} / {:?}  (folds {}, seed {})",
        cfg.classifier, cfg.backend, cfg.folds, report.seed
    );
    let _ = writeln!(out, "{:<6} {:>9} {:>9} {:>9} {:>9} {:>8} {:>8}",
        "fold", "train_ba", "test_ba", "train_f1", "test_f1", "fit_s", "pred_s");
    for fold in &report.per_fold {
        match fold {
            FoldOutcome::Ok(r) => {
                let _ = writeln!(
                    out,
                    "{:<6} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>8.3} {:>8.3}",
                    r.fold, r.train_ba, r.test_ba, r.train_f1, r.test_f1,
                    r.fit_seconds, r.predict_seconds
                );
            }
            FoldOutcome::Failed { fold, stage, message } => {
                let _ = writeln!(out, "{fold:<6} FAILED at {stage}: {message}");
            }
        }
    }
    if let Some(agg) = &report.aggregate {
        let _ = writeln!(
            out,
            "mean   {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>8.3} {:>8.3}",
            agg.train_ba.mean, agg.test_ba.mean, agg.train_f1.mean, agg.test_f1.mean,
            agg.fit_seconds.mean, agg.predict_seconds.mean
        );
        let _ = writeln!(
            out,
            "std    {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>8.3} {:>8.3}",
            agg.train_ba.std, agg.test_ba.std, agg.train_f1.std, agg.test_f1.std,
            agg.fit_seconds.std, agg.predict_seconds.std
        );
    } else {
        let _ = writeln!(out, "no successful folds");
    }
    out
}

/// Write to a sibling temp file, then rename over the destination.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| {
        Error::Parameter(format!("`{}` does not name a file", path.display()))
    })?;
    let tmp = parent.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let write = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if write.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    write.map_err(Error::Io)
}
