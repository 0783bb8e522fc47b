//! Soft-margin kernel SVM trained by sequential minimal optimization.
//!
//! Works either on a precomputed Gram matrix (the quantum-kernel path) or
//! directly on feature vectors with an RBF kernel. The dual
//! `max Σαᵢ − ½ΣΣ αᵢαⱼyᵢyⱼKᵢⱼ` under `0 ≤ αᵢ ≤ C, Σαᵢyᵢ = 0` is solved
//! with maximal-violating-pair working-set selection; problem sizes here
//! stay small enough that shrinking heuristics would add nothing.
//!
//! Label convention throughout: TARGET ↔ +1, NONTARGET ↔ −1.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::types::Label;

/// Kernel used at prediction time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum KernelSpec {
    Precomputed,
    Rbf { gamma: f64 },
}

/// `exp(−gamma · ‖x − y‖²)`.
pub fn rbf_kernel(x: &DVector<f64>, y: &DVector<f64>, gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Parameter(format!(
            "feature dimensions differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::Parameter(format!("gamma must be positive, got {gamma}")));
    }
    let d2 = x
        .iter()
        .zip(y.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>();
    Ok((-gamma * d2).exp())
}

/// Solver hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvcParams {
    /// Box constraint C.
    pub c: f64,
    /// Maximum SMO pair updates.
    pub max_iter: usize,
    /// KKT violation threshold.
    pub tol: f64,
}

impl Default for SvcParams {
    fn default() -> Self {
        SvcParams { c: 0.001, max_iter: 500, tol: 1e-3 }
    }
}

/// Training input: a symmetric PSD Gram or raw features for the RBF path.
#[derive(Debug, Clone, Copy)]
pub enum TrainInput<'a> {
    Precomputed(&'a DMatrix<f64>),
    Rbf { features: &'a [DVector<f64>], gamma: f64 },
}

/// Prediction input matching the model's kernel spec.
#[derive(Debug, Clone, Copy)]
pub enum PredictInput<'a> {
    /// m×p kernel values, columns aligned with training indices.
    Precomputed(&'a DMatrix<f64>),
    Features(&'a [DVector<f64>]),
}

/// Alphas below this are treated as zero when listing support vectors.
pub const SUPPORT_EPS: f64 = 1e-12;

/// Fitted model; immutable and shareable after training.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    alphas: Vec<f64>,
    bias: f64,
    support_indices: Vec<usize>,
    labels: Vec<f64>,
    kernel_spec: KernelSpec,
    training_features: Option<Vec<DVector<f64>>>,
    c: f64,
    converged: bool,
    iterations: usize,
}

impl SvmModel {
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Exactly `{i : αᵢ > 1e-12}`.
    pub fn support_indices(&self) -> &[usize] {
        &self.support_indices
    }

    /// Training labels as ±1.
    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn kernel_spec(&self) -> KernelSpec {
        self.kernel_spec
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn n_train(&self) -> usize {
        self.alphas.len()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            version: MODEL_VERSION,
            kernel: self.kernel_spec,
            alphas: self.alphas.clone(),
            bias: self.bias,
            support_indices: self.support_indices.clone(),
            labels: self.labels.clone(),
            training_features: self
                .training_features
                .as_ref()
                .map(|f| f.iter().map(|v| v.iter().cloned().collect()).collect()),
            c: self.c,
            converged: self.converged,
            iterations: self.iterations,
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Parameter(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<SvmModel> {
        let doc: ModelDoc =
            serde_json::from_str(text).map_err(|e| Error::Parameter(e.to_string()))?;
        if doc.version != MODEL_VERSION {
            return Err(Error::Parameter(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                doc.version
            )));
        }
        if matches!(doc.kernel, KernelSpec::Rbf { .. }) && doc.training_features.is_none() {
            return Err(Error::Parameter("rbf model is missing training features".into()));
        }
        Ok(SvmModel {
            alphas: doc.alphas,
            bias: doc.bias,
            support_indices: doc.support_indices,
            labels: doc.labels,
            kernel_spec: doc.kernel,
            training_features: doc
                .training_features
                .map(|f| f.into_iter().map(DVector::from_vec).collect()),
            c: doc.c,
            converged: doc.converged,
            iterations: doc.iterations,
        })
    }
}

const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    kernel: KernelSpec,
    alphas: Vec<f64>,
    bias: f64,
    support_indices: Vec<usize>,
    labels: Vec<f64>,
    training_features: Option<Vec<Vec<f64>>>,
    c: f64,
    converged: bool,
    iterations: usize,
}

fn check_symmetric(k: &DMatrix<f64>) -> Result<()> {
    if k.nrows() != k.ncols() {
        return Err(Error::Parameter(format!(
            "kernel matrix must be square, got {}x{}",
            k.nrows(),
            k.ncols()
        )));
    }
    for i in 0..k.nrows() {
        for j in (i + 1)..k.ncols() {
            if (k[(i, j)] - k[(j, i)]).abs() > 1e-10 {
                return Err(Error::Parameter(format!(
                    "kernel matrix asymmetric at ({i},{j}): {} vs {}",
                    k[(i, j)],
                    k[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

/// Train by SMO.
///
/// Stops when the maximal KKT violation `m(α) − M(α)` drops to `tol` or
/// after `max_iter` pair updates; the convergence flag records which.
pub fn svc_fit(input: TrainInput, labels: &[Label], params: &SvcParams) -> Result<SvmModel> {
    let m = labels.len();
    if !(params.c > 0.0) {
        return Err(Error::Parameter(format!("C must be positive, got {}", params.c)));
    }
    if !(params.tol > 0.0) {
        return Err(Error::Parameter("tol must be positive".into()));
    }
    let n_target = labels.iter().filter(|&&l| l == Label::Target).count();
    if n_target == 0 || n_target == m {
        return Err(Error::Fit("training labels contain a single class".into()));
    }

    let (k, kernel_spec, training_features) = match input {
        TrainInput::Precomputed(k) => {
            check_symmetric(k)?;
            if k.nrows() != m {
                return Err(Error::Parameter(format!(
                    "{}x{} kernel for {m} labels",
                    k.nrows(),
                    k.ncols()
                )));
            }
            (k.clone(), KernelSpec::Precomputed, None)
        }
        TrainInput::Rbf { features, gamma } => {
            if features.len() != m {
                return Err(Error::Parameter(format!(
                    "{} feature vectors for {m} labels",
                    features.len()
                )));
            }
            let mut k = DMatrix::zeros(m, m);
            for i in 0..m {
                for j in i..m {
                    let v = rbf_kernel(&features[i], &features[j], gamma)?;
                    k[(i, j)] = v;
                    k[(j, i)] = v;
                }
            }
            (k, KernelSpec::Rbf { gamma }, Some(features.to_vec()))
        }
    };

    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let c = params.c;
    let tau = 1e-12;

    let mut alpha = vec![0.0f64; m];
    // gradient of ½αᵀQα − Σα with Q = y yᵀ ∘ K; zero α gives −1 everywhere
    let mut grad = vec![-1.0f64; m];

    #[cfg(debug_assertions)]
    let mut prev_dual = dual_objective(&alpha, &grad);

    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..params.max_iter {
        // maximal violating pair over F_t = −y_t·grad_t
        let mut i_up: Option<(usize, f64)> = None;
        let mut j_low: Option<(usize, f64)> = None;
        for t in 0..m {
            let f = -y[t] * grad[t];
            let positive = y[t] > 0.0;
            let in_up = (positive && alpha[t] < c) || (!positive && alpha[t] > 0.0);
            let in_low = (positive && alpha[t] > 0.0) || (!positive && alpha[t] < c);
            if in_up && i_up.is_none_or(|(_, best)| f > best) {
                i_up = Some((t, f));
            }
            if in_low && j_low.is_none_or(|(_, best)| f < best) {
                j_low = Some((t, f));
            }
        }
        let ((i, f_up), (j, f_low)) = match (i_up, j_low) {
            (Some(a), Some(b)) => (a, b),
            _ => break,
        };
        if f_up - f_low <= params.tol {
            converged = true;
            break;
        }
        iterations += 1;

        // two-variable subproblem on (i, j), Σαy preserved exactly
        let quad = (k[(i, i)] + k[(j, j)] - 2.0 * k[(i, j)]).max(tau);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else {
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }

        let (d_i, d_j) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..m {
            grad[t] += y[t] * y[i] * k[(t, i)] * d_i + y[t] * y[j] * k[(t, j)] * d_j;
        }

        #[cfg(debug_assertions)]
        {
            let dual = dual_objective(&alpha, &grad);
            debug_assert!(
                dual >= prev_dual - 1e-9 * (1.0 + prev_dual.abs()),
                "dual objective decreased: {prev_dual} -> {dual}"
            );
            prev_dual = dual;
        }
    }

    // bias: average of y_i − u_i over free support vectors, else the midpoint
    // of the feasible interval [M, m]
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut up_max = f64::NEG_INFINITY;
    let mut low_min = f64::INFINITY;
    for t in 0..m {
        let f = -y[t] * grad[t];
        let positive = y[t] > 0.0;
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += f;
            free_count += 1;
        }
        if (positive && alpha[t] < c) || (!positive && alpha[t] > 0.0) {
            up_max = up_max.max(f);
        }
        if (positive && alpha[t] > 0.0) || (!positive && alpha[t] < c) {
            low_min = low_min.min(f);
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        (up_max + low_min) / 2.0
    };

    let support_indices: Vec<usize> = (0..m).filter(|&t| alpha[t] > SUPPORT_EPS).collect();
    let balance: f64 = alpha.iter().zip(&y).map(|(a, yi)| a * yi).sum();
    debug_assert!(balance.abs() <= 1e-6, "equality constraint violated: {balance}");

    Ok(SvmModel {
        alphas: alpha,
        bias,
        support_indices,
        labels: y,
        kernel_spec,
        training_features,
        c,
        converged,
        iterations,
    })
}

#[cfg(debug_assertions)]
fn dual_objective(alpha: &[f64], grad: &[f64]) -> f64 {
    // Σα − ½αᵀQα, using αᵀQα = αᵀ(grad + 1)
    let sum: f64 = alpha.iter().sum();
    let ag: f64 = alpha.iter().zip(grad).map(|(a, g)| a * g).sum();
    0.5 * (sum - ag)
}

/// Decision values `f(x) = Σ αᵢyᵢk(xᵢ, x) + b` and their labels; `f = 0`
/// maps to TARGET.
pub fn svc_predict(model: &SvmModel, input: PredictInput) -> Result<(Vec<Label>, Vec<f64>)> {
    let decisions: Vec<f64> = match (input, model.kernel_spec) {
        (PredictInput::Precomputed(k_new), _) => {
            if k_new.ncols() != model.n_train() {
                return Err(Error::Parameter(format!(
                    "kernel has {} columns, model was trained on {} points",
                    k_new.ncols(),
                    model.n_train()
                )));
            }
            par::map_collect(k_new.nrows(), |i| {
                model
                    .support_indices
                    .iter()
                    .map(|&j| model.alphas[j] * model.labels[j] * k_new[(i, j)])
                    .sum::<f64>()
                    + model.bias
            })
        }
        (PredictInput::Features(xs), KernelSpec::Rbf { gamma }) => {
            let train = model
                .training_features
                .as_ref()
                .ok_or_else(|| Error::Parameter("model carries no training features".into()))?;
            par::try_map_collect(xs.len(), |i| {
                let mut f = model.bias;
                for &j in &model.support_indices {
                    f += model.alphas[j] * model.labels[j] * rbf_kernel(&xs[i], &train[j], gamma)?;
                }
                Ok::<f64, Error>(f)
            })?
        }
        (PredictInput::Features(_), KernelSpec::Precomputed) => {
            return Err(Error::Parameter(
                "precomputed-kernel model needs kernel values, not features".into(),
            ));
        }
    };
    let labels = decisions.iter().map(|&f| Label::from_decision(f)).collect();
    Ok((labels, decisions))
}
