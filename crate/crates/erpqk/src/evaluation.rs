//! Stratified cross-validation, the two reported metrics, and end-to-end
//! pipeline orchestration for the three classifier variants.
//!
//! Fold discipline: every data-driven object (spatial filters, covariance
//! reference, class means, SVM, feature scaling) is fitted on the training
//! indices of its fold only; test epochs are transformed with the fitted
//! objects and never touch the fit.

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset_io::load_subject;
use crate::dsp::{design_bandpass, default_n_taps, extract_epochs, filtfilt, EpochSet, Recording};
use crate::erp_spatial::{erp_covariances, fit_xdawn, XdawnModel};
use crate::error::{Error, Result};
use crate::quantum_kernel::{
    enforce_spd, gram, splitmix64, KernelBackend, KernelMatrix,
};
use crate::spd_manifold::{
    geometric_mean, mdm_fit, mdm_predict, tangent_project, MdmModel, SpdMatrix, MEAN_MAX_ITER,
    MEAN_TOL,
};
use crate::svm::{svc_fit, svc_predict, PredictInput, SvcParams, SvmModel, TrainInput};
use crate::types::Label;

/// Test-fold outcome counts. `a`/`b`: TARGET epochs classified correctly /
/// incorrectly; `c`/`d`: the same for NONTARGET.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl Confusion {
    pub fn from_predictions(truth: &[Label], predicted: &[Label]) -> Result<Confusion> {
        if truth.len() != predicted.len() {
            return Err(Error::Metric(format!(
                "{} labels vs {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut c = Confusion { a: 0, b: 0, c: 0, d: 0 };
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t, p) {
                (Label::Target, Label::Target) => c.a += 1,
                (Label::Target, Label::NonTarget) => c.b += 1,
                (Label::NonTarget, Label::NonTarget) => c.c += 1,
                (Label::NonTarget, Label::Target) => c.d += 1,
            }
        }
        Ok(c)
    }
}

/// `½(A/(A+B) + C/(C+D))`, evaluated as a single ratio of integers so equal
/// fractions compare equal bit for bit.
pub fn balanced_accuracy(c: &Confusion) -> Result<f64> {
    let targets = c.a + c.b;
    let nontargets = c.c + c.d;
    if targets == 0 || nontargets == 0 {
        return Err(Error::Metric(format!(
            "balanced accuracy needs both classes in the test set (TARGET {targets}, NONTARGET {nontargets})"
        )));
    }
    let num = c.a * nontargets + c.c * targets;
    let den = 2 * targets * nontargets;
    Ok(num as f64 / den as f64)
}

/// `2A/(2A+B+D)`; the degenerate case `A=B=D=0` is defined as 0.
pub fn f1_score(c: &Confusion) -> f64 {
    let den = 2 * c.a + c.b + c.d;
    if den == 0 {
        return 0.0;
    }
    (2 * c.a) as f64 / den as f64
}

/// Seeded stratified k-fold: shuffle each class, then deal members
/// round-robin into test folds, so per-fold class counts differ by at most
/// one. Returns `(train_indices, test_indices)` per fold.
pub fn stratified_kfold(
    labels: &[Label],
    k: usize,
    seed: u64,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(Error::Parameter(format!("fold count must be >= 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for class in Label::CLASS_ORDER {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        if members.len() < k {
            return Err(Error::Parameter(format!(
                "class {class} has {} members, fewer than {k} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for (i, idx) in members.into_iter().enumerate() {
            fold_members[i % k].push(idx);
        }
    }

    let mut folds = Vec::with_capacity(k);
    for members in &fold_members {
        let mut test = members.clone();
        test.sort_unstable();
        let mut train: Vec<usize> = (0..labels.len()).filter(|i| !test.contains(i)).collect();
        train.sort_unstable();
        folds.push((train, test));
    }
    Ok(folds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classifier {
    Mdm,
    Svc,
    Qsvc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    Shots,
}

/// Resolved pipeline configuration; the flat key=value config file and CLI
/// flags both feed this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub data_dir: PathBuf,
    pub classifier: Classifier,
    pub backend: Backend,
    pub shots: u64,
    pub reps: usize,
    pub gamma: f64,
    pub regularization: f64,
    pub as_lambda: bool,
    pub max_iter: usize,
    pub tol: f64,
    pub folds: usize,
    pub seed: u64,
    pub nfilter: usize,
    pub shrinkage: f64,
    pub band_lo: f64,
    pub band_hi: f64,
    pub tmin_ms: f64,
    pub tmax_ms: f64,
    pub scale_features: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data_dir: PathBuf::new(),
            classifier: Classifier::Qsvc,
            backend: Backend::Exact,
            shots: 1024,
            reps: 2,
            gamma: 0.1,
            regularization: 0.001,
            as_lambda: false,
            max_iter: 500,
            tol: 1e-3,
            folds: 5,
            seed: 0,
            nfilter: 1,
            shrinkage: 1e-6,
            band_lo: 1.0,
            band_hi: 24.0,
            tmin_ms: 100.0,
            tmax_ms: 700.0,
            scale_features: false,
        }
    }
}

impl PipelineConfig {
    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("key `{key}`: bad {what} `{value}`"));
        match key {
            "data_dir" => self.data_dir = PathBuf::from(value),
            "classifier" => {
                self.classifier = match value {
                    "mdm" => Classifier::Mdm,
                    "svc" => Classifier::Svc,
                    "qsvc" => Classifier::Qsvc,
                    _ => return Err(bad("classifier (mdm|svc|qsvc)")),
                }
            }
            "backend" => {
                self.backend = match value {
                    "exact" => Backend::Exact,
                    "shots" => Backend::Shots,
                    _ => return Err(bad("backend (exact|shots)")),
                }
            }
            "shots" => self.shots = value.parse().map_err(|_| bad("integer"))?,
            "reps" => self.reps = value.parse().map_err(|_| bad("integer"))?,
            "gamma" => self.gamma = value.parse().map_err(|_| bad("number"))?,
            "regularization" => self.regularization = value.parse().map_err(|_| bad("number"))?,
            "as_lambda" => self.as_lambda = value.parse().map_err(|_| bad("boolean"))?,
            "max_iter" => self.max_iter = value.parse().map_err(|_| bad("integer"))?,
            "tol" => self.tol = value.parse().map_err(|_| bad("number"))?,
            "folds" => self.folds = value.parse().map_err(|_| bad("integer"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("integer"))?,
            "nfilter" => self.nfilter = value.parse().map_err(|_| bad("integer"))?,
            "shrinkage" => self.shrinkage = value.parse().map_err(|_| bad("number"))?,
            "band_lo" => self.band_lo = value.parse().map_err(|_| bad("number"))?,
            "band_hi" => self.band_hi = value.parse().map_err(|_| bad("number"))?,
            "tmin_ms" => self.tmin_ms = value.parse().map_err(|_| bad("number"))?,
            "tmax_ms" => self.tmax_ms = value.parse().map_err(|_| bad("number"))?,
            "scale_features" => self.scale_features = value.parse().map_err(|_| bad("boolean"))?,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Parse a flat key=value config file. `#` starts a comment; keys may
    /// appear at most once.
    pub fn from_text(text: &str) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    /// Box constraint for the SVM: `regularization` is C directly, or, with
    /// `as_lambda`, a ridge weight mapped through `C = 1/(λ·m)`.
    pub fn svm_c(&self, n_train: usize) -> f64 {
        if self.as_lambda {
            1.0 / (self.regularization * n_train as f64)
        } else {
            self.regularization
        }
    }

    fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config("folds must be >= 2".into()));
        }
        if self.tmax_ms <= self.tmin_ms {
            return Err(Error::Config("tmax_ms must exceed tmin_ms".into()));
        }
        if !(self.regularization > 0.0) {
            return Err(Error::Config("regularization must be positive".into()));
        }
        Ok(())
    }
}

/// Min-max rescale of each feature dimension to [0, π], bounds taken from
/// the training fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl FeatureScaling {
    fn fit(features: &[DVector<f64>]) -> FeatureScaling {
        let dim = features.first().map_or(0, |f| f.len());
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for f in features {
            for d in 0..dim {
                lo[d] = lo[d].min(f[d]);
                hi[d] = hi[d].max(f[d]);
            }
        }
        FeatureScaling { lo, hi }
    }

    fn apply(&self, features: &[DVector<f64>]) -> Vec<DVector<f64>> {
        features
            .iter()
            .map(|f| {
                DVector::from_iterator(
                    f.len(),
                    f.iter().enumerate().map(|(d, &v)| {
                        let range = self.hi[d] - self.lo[d];
                        if range > 0.0 {
                            (v - self.lo[d]) / range * std::f64::consts::PI
                        } else {
                            0.0
                        }
                    }),
                )
            })
            .collect()
    }
}

/// Classifier head of a fitted fold.
#[derive(Debug, Clone)]
pub enum FoldHead {
    Mdm(MdmModel),
    Svc(SvmModel),
    Qsvc { model: SvmModel, train_features: Vec<DVector<f64>> },
}

/// Everything fitted on one training fold.
#[derive(Debug, Clone)]
pub struct FittedFold {
    pub xdawn: XdawnModel,
    /// Tangent base point (training-fold geometric mean); absent for MDM.
    pub reference: Option<SpdMatrix>,
    pub scaling: Option<FeatureScaling>,
    pub head: FoldHead,
}

pub(crate) struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

fn stage<T>(name: &'static str, r: Result<T>) -> std::result::Result<T, StageError> {
    r.map_err(|error| StageError { stage: name, error })
}

fn tangent_features(
    covs: &[SpdMatrix],
    reference: &SpdMatrix,
) -> Result<Vec<DVector<f64>>> {
    Ok(tangent_project(covs, reference)?
        .into_iter()
        .map(|t| t.values().clone())
        .collect())
}

pub(crate) fn fit_fold_staged(
    train: &EpochSet,
    cfg: &PipelineConfig,
    gram_seed: u64,
) -> std::result::Result<FittedFold, StageError> {
    let xdawn = stage("xdawn", fit_xdawn(train, cfg.nfilter))?;
    let covs = stage("covariances", erp_covariances(train, &xdawn, cfg.shrinkage))?;

    if cfg.classifier == Classifier::Mdm {
        let head = stage("classifier-fit", mdm_fit(&covs, train.labels()))?;
        return Ok(FittedFold { xdawn, reference: None, scaling: None, head: FoldHead::Mdm(head) });
    }

    let reference =
        stage("mean", geometric_mean(&covs, MEAN_TOL, MEAN_MAX_ITER))?.mean;
    let features = stage("tangent", tangent_features(&covs, &reference))?;

    let params = SvcParams {
        c: cfg.svm_c(train.n_trials()),
        max_iter: cfg.max_iter,
        tol: cfg.tol,
    };
    match cfg.classifier {
        Classifier::Svc => {
            let model = stage(
                "classifier-fit",
                svc_fit(TrainInput::Rbf { features: &features, gamma: cfg.gamma }, train.labels(), &params),
            )?;
            Ok(FittedFold {
                xdawn,
                reference: Some(reference),
                scaling: None,
                head: FoldHead::Svc(model),
            })
        }
        Classifier::Qsvc => {
            let (scaling, features) = if cfg.scale_features {
                let s = FeatureScaling::fit(&features);
                let scaled = s.apply(&features);
                (Some(s), scaled)
            } else {
                (None, features)
            };
            let backend = match cfg.backend {
                Backend::Exact => KernelBackend::Exact,
                Backend::Shots => KernelBackend::Shots { shots: cfg.shots, seed: gram_seed },
            };
            let k: KernelMatrix = stage("kernel", gram(&features, None, cfg.reps, backend))?;
            let k = stage("kernel", enforce_spd(&k))?;
            let model = stage(
                "classifier-fit",
                svc_fit(TrainInput::Precomputed(k.values()), train.labels(), &params),
            )?;
            Ok(FittedFold {
                xdawn,
                reference: Some(reference),
                scaling,
                head: FoldHead::Qsvc { model, train_features: features },
            })
        }
        Classifier::Mdm => unreachable!("handled above"),
    }
}

/// Fit every fold-local object on a training set.
///
/// Exposed so leakage audits can refit on train-only data and diff the
/// results against a pipeline run.
pub fn fit_fold(train: &EpochSet, cfg: &PipelineConfig, gram_seed: u64) -> Result<FittedFold> {
    fit_fold_staged(train, cfg, gram_seed)
        .map_err(|e| Error::Fit(format!("{}: {}", e.stage, e.error)))
}

pub(crate) fn predict_fold_staged(
    fitted: &FittedFold,
    epochs: &EpochSet,
    cfg: &PipelineConfig,
    gram_seed: u64,
) -> std::result::Result<Vec<Label>, StageError> {
    let covs = stage("covariances", erp_covariances(epochs, &fitted.xdawn, cfg.shrinkage))?;
    match &fitted.head {
        FoldHead::Mdm(model) => stage("predict", mdm_predict(model, &covs)),
        FoldHead::Svc(model) => {
            let reference = fitted.reference.as_ref().expect("svc folds carry a reference");
            let features = stage("tangent", tangent_features(&covs, reference))?;
            let (labels, _) =
                stage("predict", svc_predict(model, PredictInput::Features(&features)))?;
            Ok(labels)
        }
        FoldHead::Qsvc { model, train_features } => {
            let reference = fitted.reference.as_ref().expect("qsvc folds carry a reference");
            let mut features = stage("tangent", tangent_features(&covs, reference))?;
            if let Some(s) = &fitted.scaling {
                features = s.apply(&features);
            }
            let backend = match cfg.backend {
                Backend::Exact => KernelBackend::Exact,
                Backend::Shots => KernelBackend::Shots { shots: cfg.shots, seed: gram_seed },
            };
            let k = stage("kernel", gram(&features, Some(train_features), cfg.reps, backend))?;
            let (labels, _) =
                stage("predict", svc_predict(model, PredictInput::Precomputed(k.values())))?;
            Ok(labels)
        }
    }
}

/// Transform epochs with a fitted fold and classify them.
pub fn predict_fold(
    fitted: &FittedFold,
    epochs: &EpochSet,
    cfg: &PipelineConfig,
    gram_seed: u64,
) -> Result<Vec<Label>> {
    predict_fold_staged(fitted, epochs, cfg, gram_seed)
        .map_err(|e| Error::Fit(format!("{}: {}", e.stage, e.error)))
}

/// Shot-seed domains so training and prediction Grams never share entries.
const SALT_TRAIN_GRAM: u64 = 0x5452_4149_4e00_0001;
const SALT_PREDICT_GRAM: u64 = 0x5052_4544_4943_0002;

pub(crate) fn fold_seed(seed: u64, fold: usize, salt: u64) -> u64 {
    splitmix64(splitmix64(seed ^ salt) ^ fold as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_ba: f64,
    pub test_ba: f64,
    pub train_f1: f64,
    pub test_f1: f64,
    pub confusion: Confusion,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum FoldOutcome {
    Ok(FoldReport),
    Failed { fold: usize, stage: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanStd { mean, std: var.sqrt() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub train_ba: MeanStd,
    pub test_ba: MeanStd,
    pub train_f1: MeanStd,
    pub test_f1: MeanStd,
    pub fit_seconds: MeanStd,
    pub predict_seconds: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub subject_id: String,
    pub seed: u64,
    pub config_echo: PipelineConfig,
    pub per_fold: Vec<FoldOutcome>,
    /// Present when at least one fold succeeded.
    pub aggregate: Option<Aggregate>,
}

impl CvReport {
    pub fn ok_folds(&self) -> impl Iterator<Item = &FoldReport> {
        self.per_fold.iter().filter_map(|f| match f {
            FoldOutcome::Ok(r) => Some(r),
            FoldOutcome::Failed { .. } => None,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parameter(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<CvReport> {
        serde_json::from_str(text).map_err(|e| Error::Parameter(e.to_string()))
    }

    /// Zero all wall-clock fields so two runs of the same configuration
    /// serialize identically.
    pub fn strip_timings(&mut self) {
        for f in &mut self.per_fold {
            if let FoldOutcome::Ok(r) = f {
                r.fit_seconds = 0.0;
                r.predict_seconds = 0.0;
            }
        }
        if let Some(a) = &mut self.aggregate {
            a.fit_seconds = MeanStd { mean: 0.0, std: 0.0 };
            a.predict_seconds = MeanStd { mean: 0.0, std: 0.0 };
        }
    }
}

fn aggregate_from(folds: &[&FoldReport]) -> Aggregate {
    let collect = |f: fn(&FoldReport) -> f64| -> Vec<f64> { folds.iter().map(|r| f(r)).collect() };
    Aggregate {
        train_ba: mean_std(&collect(|r| r.train_ba)),
        test_ba: mean_std(&collect(|r| r.test_ba)),
        train_f1: mean_std(&collect(|r| r.train_f1)),
        test_f1: mean_std(&collect(|r| r.test_f1)),
        fit_seconds: mean_std(&collect(|r| r.fit_seconds)),
        predict_seconds: mean_std(&collect(|r| r.predict_seconds)),
    }
}

/// Run the full cross-validated pipeline on an in-memory recording.
pub fn run_pipeline_on(
    rec: &Recording,
    subject_id: &str,
    cfg: &PipelineConfig,
) -> Result<CvReport> {
    cfg.validate()?;
    let kernel = design_bandpass(rec.fs(), cfg.band_lo, cfg.band_hi, default_n_taps(rec.fs()))?;
    let filtered = filtfilt(rec, &kernel)?;
    let epochs = extract_epochs(&filtered, cfg.tmin_ms / 1000.0, cfg.tmax_ms / 1000.0)?;
    let folds = stratified_kfold(epochs.labels(), cfg.folds, cfg.seed)?;

    let mut per_fold = Vec::with_capacity(folds.len());
    for (fold, (train_idx, test_idx)) in folds.iter().enumerate() {
        let outcome = run_one_fold(&epochs, cfg, fold, train_idx, test_idx);
        per_fold.push(match outcome {
            Ok(report) => FoldOutcome::Ok(report),
            Err(e) => FoldOutcome::Failed {
                fold,
                stage: e.stage.to_string(),
                message: e.error.to_string(),
            },
        });
    }

    let ok: Vec<&FoldReport> = per_fold
        .iter()
        .filter_map(|f| match f {
            FoldOutcome::Ok(r) => Some(r),
            FoldOutcome::Failed { .. } => None,
        })
        .collect();
    let aggregate = if ok.is_empty() { None } else { Some(aggregate_from(&ok)) };

    Ok(CvReport {
        subject_id: subject_id.to_string(),
        seed: cfg.seed,
        config_echo: cfg.clone(),
        per_fold,
        aggregate,
    })
}

fn run_one_fold(
    epochs: &EpochSet,
    cfg: &PipelineConfig,
    fold: usize,
    train_idx: &[usize],
    test_idx: &[usize],
) -> std::result::Result<FoldReport, StageError> {
    let train = stage("subset", epochs.subset(train_idx))?;
    let test = stage("subset", epochs.subset(test_idx))?;

    let fit_start = Instant::now();
    let fitted = fit_fold_staged(&train, cfg, fold_seed(cfg.seed, fold, SALT_TRAIN_GRAM))?;
    let fit_seconds = fit_start.elapsed().as_secs_f64();

    let predict_seed = fold_seed(cfg.seed, fold, SALT_PREDICT_GRAM);
    let predict_start = Instant::now();
    let test_pred = predict_fold_staged(&fitted, &test, cfg, predict_seed)?;
    let predict_seconds = predict_start.elapsed().as_secs_f64();

    let train_pred = predict_fold_staged(&fitted, &train, cfg, predict_seed)?;

    let test_conf = stage("metrics", Confusion::from_predictions(test.labels(), &test_pred))?;
    let train_conf = stage("metrics", Confusion::from_predictions(train.labels(), &train_pred))?;

    let mut notes = Vec::new();
    if test_conf.a == 0 && test_conf.b == 0 && test_conf.d == 0 {
        notes.push("test F1 degenerate (no TARGET decisions or epochs); reported as 0".into());
    }

    Ok(FoldReport {
        fold,
        train_ba: stage("metrics", balanced_accuracy(&train_conf))?,
        test_ba: stage("metrics", balanced_accuracy(&test_conf))?,
        train_f1: f1_score(&train_conf),
        test_f1: f1_score(&test_conf),
        confusion: test_conf,
        fit_seconds,
        predict_seconds,
        notes,
    })
}

/// Load the subject named by `data_dir` and run the pipeline.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<CvReport> {
    if cfg.data_dir.as_os_str().is_empty() {
        return Err(Error::Config("data_dir is not set".into()));
    }
    let rec = load_subject(&cfg.data_dir)?;
    let subject_id = cfg
        .data_dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "subject".to_string());
    run_pipeline_on(&rec, &subject_id, cfg)
}

/// Rebuild the tangent feature matrix of a training fold; used by the CLI
/// `kernel` subcommand to export Gram matrices.
pub fn fold_features(
    epochs: &EpochSet,
    cfg: &PipelineConfig,
) -> Result<Vec<DVector<f64>>> {
    let xdawn = fit_xdawn(epochs, cfg.nfilter)?;
    let covs = erp_covariances(epochs, &xdawn, cfg.shrinkage)?;
    let reference = geometric_mean(&covs, MEAN_TOL, MEAN_MAX_ITER)?.mean;
    let mut features = tangent_features(&covs, &reference)?;
    if cfg.scale_features {
        let s = FeatureScaling::fit(&features);
        features = s.apply(&features);
    }
    Ok(features)
}

/// Convenience for tests and audits: the decision values a fitted SVM head
/// assigns to a feature matrix in precomputed mode.
pub fn head_svm(fitted: &FittedFold) -> Option<&SvmModel> {
    match &fitted.head {
        FoldHead::Svc(m) => Some(m),
        FoldHead::Qsvc { model, .. } => Some(model),
        FoldHead::Mdm(_) => None,
    }
}

/// Assert two kernel matrices agree entrywise; helper for Gram diffing.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
