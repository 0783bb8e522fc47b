//! Shared oracles and data helpers for the integration suite.
//!
//! Everything here recomputes results through an independent route: explicit
//! dense gate matrices instead of in-place statevector updates, and an
//! active-set enumeration instead of SMO.

#![allow(dead_code, clippy::needless_range_loop)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use erpqk::dataset_io::{synth_generate, NoiseKind, SynthParams};
use erpqk::dsp::Recording;
use erpqk::Label;

// ---------------------------------------------------------------------------
// Dense quantum-circuit oracle
// ---------------------------------------------------------------------------

type CMat = DMatrix<Complex64>;

fn eye(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

/// Embed a single-qubit gate `u` acting on qubit `q` (bit q of the basis
/// index) into the full 2^n space.
fn embed_1q(n: usize, q: usize, u: [[Complex64; 2]; 2]) -> CMat {
    let dim = 1 << n;
    let mut m = CMat::zeros(dim, dim);
    for col in 0..dim {
        let cq = (col >> q) & 1;
        for rq in 0..2 {
            let row = (col & !(1 << q)) | (rq << q);
            m[(row, col)] = u[rq][cq];
        }
    }
    m
}

/// Dense controlled-NOT: permutation matrix flipping `target` where
/// `control` is set.
fn embed_cx(n: usize, control: usize, target: usize) -> CMat {
    let dim = 1 << n;
    let mut m = CMat::zeros(dim, dim);
    for col in 0..dim {
        let row = if (col >> control) & 1 == 1 { col ^ (1 << target) } else { col };
        m[(row, col)] = Complex64::new(1.0, 0.0);
    }
    m
}

fn hadamard() -> [[Complex64; 2]; 2] {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

fn phase_gate(theta: f64) -> [[Complex64; 2]; 2] {
    let zero = Complex64::new(0.0, 0.0);
    [
        [Complex64::new(1.0, 0.0), zero],
        [zero, Complex64::from_polar(1.0, theta)],
    ]
}

/// State prepared by the second-order Pauli-Z feature map, built from
/// explicit full-dimension gate matrices multiplied in order.
pub fn dense_feature_state(x: &[f64], reps: usize) -> DVector<Complex64> {
    let n = x.len();
    let dim = 1 << n;
    let mut total = eye(dim);
    let pi = std::f64::consts::PI;
    for _ in 0..reps {
        for q in 0..n {
            total = embed_1q(n, q, hadamard()) * total;
        }
        for q in 0..n {
            total = embed_1q(n, q, phase_gate(2.0 * x[q])) * total;
        }
        for q in 0..n.saturating_sub(1) {
            let theta = 2.0 * (pi - x[q]) * (pi - x[q + 1]);
            total = embed_cx(n, q, q + 1) * total;
            total = embed_1q(n, q + 1, phase_gate(theta)) * total;
            total = embed_cx(n, q, q + 1) * total;
        }
    }
    let mut zero_state = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    zero_state[0] = Complex64::new(1.0, 0.0);
    total * zero_state
}

/// `|<psi(x)|psi(y)>|^2` through the dense oracle.
pub fn dense_kernel(x: &[f64], y: &[f64], reps: usize) -> f64 {
    let sx = dense_feature_state(x, reps);
    let sy = dense_feature_state(y, reps);
    let inner: Complex64 = sx.iter().zip(sy.iter()).map(|(a, b)| a.conj() * b).sum();
    inner.norm_sqr()
}

// ---------------------------------------------------------------------------
// Active-set QP oracle for small SVM duals
// ---------------------------------------------------------------------------

/// Exact solution of min ½αᵀQα − Σα s.t. 0 ≤ α ≤ C, yᵀα = 0, with
/// Q = (y yᵀ) ∘ K, found by enumerating every lower/upper/free assignment
/// and solving the corresponding KKT equalities. Feasible for a handful of
/// points only. Returns `(alphas, objective)`.
pub fn qp_oracle(k: &DMatrix<f64>, y: &[f64], c: f64) -> Option<(Vec<f64>, f64)> {
    let n = y.len();
    assert!(n <= 8, "enumeration oracle is exponential in n");
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * k[(i, j)]);
    let tol = 1e-9;

    let objective = |alpha: &[f64]| -> f64 {
        let a = DVector::from_column_slice(alpha);
        0.5 * (a.transpose() * &q * &a)[(0, 0)] - a.sum()
    };

    #[derive(Clone, Copy, PartialEq)]
    enum S {
        Lo,
        Hi,
        Free,
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    let states = [S::Lo, S::Hi, S::Free];
    for code in 0..3usize.pow(n as u32) {
        let mut assign = Vec::with_capacity(n);
        let mut rem = code;
        for _ in 0..n {
            assign.push(states[rem % 3]);
            rem /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| assign[i] == S::Free).collect();
        let mut alpha = vec![0.0; n];
        for i in 0..n {
            if assign[i] == S::Hi {
                alpha[i] = c;
            }
        }

        let mu; // Lagrange multiplier of the balance constraint; equals the bias
        if free.is_empty() {
            let balance: f64 = (0..n).map(|i| y[i] * alpha[i]).sum();
            if balance.abs() > tol {
                continue;
            }
            let grad: Vec<f64> =
                (0..n).map(|i| (0..n).map(|j| q[(i, j)] * alpha[j]).sum::<f64>() - 1.0).collect();
            // each bound constrains mu to a half-line; intersect them
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for i in 0..n {
                let limit = -grad[i] * y[i];
                match (assign[i], y[i] > 0.0) {
                    (S::Lo, true) | (S::Hi, false) => lo = lo.max(limit),
                    (S::Lo, false) | (S::Hi, true) => hi = hi.min(limit),
                    (S::Free, _) => unreachable!(),
                }
            }
            if lo > hi + tol {
                continue;
            }
            mu = 0.5 * (lo.max(-1e12) + hi.min(1e12));
        } else {
            // stationarity on the free set plus the balance row
            let m = free.len();
            let mut sys = DMatrix::zeros(m + 1, m + 1);
            let mut rhs = DVector::zeros(m + 1);
            for (r, &i) in free.iter().enumerate() {
                for (cidx, &j) in free.iter().enumerate() {
                    sys[(r, cidx)] = q[(i, j)];
                }
                sys[(r, m)] = y[i];
                let bound_term: f64 =
                    (0..n).filter(|&j| assign[j] == S::Hi).map(|j| q[(i, j)] * c).sum();
                rhs[r] = 1.0 - bound_term;
            }
            for (cidx, &j) in free.iter().enumerate() {
                sys[(m, cidx)] = y[j];
            }
            let bound_balance: f64 =
                (0..n).filter(|&j| assign[j] == S::Hi).map(|j| y[j] * c).sum();
            rhs[m] = -bound_balance;

            let solution = match sys.lu().solve(&rhs) {
                Some(s) => s,
                None => continue,
            };
            let mut ok = true;
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = solution[r];
                if !(-tol..=c + tol).contains(&solution[r]) {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            mu = solution[m];
            // bound KKT signs under this multiplier
            let grad: Vec<f64> =
                (0..n).map(|i| (0..n).map(|j| q[(i, j)] * alpha[j]).sum::<f64>() - 1.0).collect();
            let mut kkt = true;
            for i in 0..n {
                let g = grad[i] + mu * y[i];
                match assign[i] {
                    S::Lo if g < -tol => kkt = false,
                    S::Hi if g > tol => kkt = false,
                    _ => {}
                }
            }
            if !kkt {
                continue;
            }
        }
        let _ = mu;
        for a in &mut alpha {
            *a = a.clamp(0.0, c);
        }
        let obj = objective(&alpha);
        if best.as_ref().is_none_or(|(_, b)| obj < *b - 1e-12) {
            best = Some((alpha, obj));
        }
    }
    best
}

/// Worst per-point KKT violation of a trained dual solution, in margin
/// units: violated amounts of `y f >= 1` (alpha = 0), `y f = 1` (free), and
/// `y f <= 1` (alpha = C).
pub fn kkt_max_violation(
    k: &DMatrix<f64>,
    y: &[f64],
    alphas: &[f64],
    bias: f64,
    c: f64,
) -> f64 {
    let n = y.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        let f: f64 = (0..n).map(|j| alphas[j] * y[j] * k[(i, j)]).sum::<f64>() + bias;
        let margin = y[i] * f;
        let a = alphas[i];
        let violation = if a <= 1e-9 {
            (1.0 - margin).max(0.0)
        } else if a >= c - 1e-9 {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(violation);
    }
    worst
}

/// Bias under the documented convention, recomputed from a dual solution:
/// mean optimality gap over free support vectors, else the midpoint of the
/// feasible interval.
pub fn bias_convention(k: &DMatrix<f64>, y: &[f64], alphas: &[f64], c: f64) -> f64 {
    let n = y.len();
    let eps = 1e-12;
    let f_gap: Vec<f64> = (0..n)
        .map(|t| {
            let grad: f64 = (0..n).map(|j| y[t] * y[j] * k[(t, j)] * alphas[j]).sum::<f64>() - 1.0;
            -y[t] * grad
        })
        .collect();
    let free: Vec<usize> =
        (0..n).filter(|&t| alphas[t] > eps && alphas[t] < c - eps).collect();
    if !free.is_empty() {
        return free.iter().map(|&t| f_gap[t]).sum::<f64>() / free.len() as f64;
    }
    let in_up = |t: usize| (y[t] > 0.0 && alphas[t] < c - eps) || (y[t] < 0.0 && alphas[t] > eps);
    let in_low = |t: usize| (y[t] > 0.0 && alphas[t] > eps) || (y[t] < 0.0 && alphas[t] < c - eps);
    let m_up = (0..n).filter(|&t| in_up(t)).map(|t| f_gap[t]).fold(f64::NEG_INFINITY, f64::max);
    let m_low = (0..n).filter(|&t| in_low(t)).map(|t| f_gap[t]).fold(f64::INFINITY, f64::min);
    0.5 * (m_up + m_low)
}

// ---------------------------------------------------------------------------
// Synthetic subjects
// ---------------------------------------------------------------------------

/// Full oddball protocol: 128 TARGET / 640 NONTARGET trials, 16 channels.
pub fn protocol_subject(snr: f64, seed: u64) -> Recording {
    synth_generate(&SynthParams {
        snr,
        seed,
        noise: NoiseKind::Pink,
        ..Default::default()
    })
    .expect("synthetic subject")
}

/// Reduced subject for fast determinism and smoke checks.
pub fn small_subject(snr: f64, seed: u64) -> Recording {
    synth_generate(&SynthParams {
        snr,
        seed,
        noise: NoiseKind::White,
        n_channels: 8,
        n_target: 48,
        n_nontarget: 240,
        ..Default::default()
    })
    .expect("synthetic subject")
}

pub fn count_labels(labels: &[Label]) -> (usize, usize) {
    let t = labels.iter().filter(|&&l| l == Label::Target).count();
    (t, labels.len() - t)
}
