//! Statevector simulation of a second-order Pauli-Z feature map and the
//! fidelity kernel it induces.
//!
//! A feature vector x is encoded as U(x)|0…0⟩ where U interleaves Hadamard
//! layers, single-qubit phases 2·xᵢ, and pairwise phases
//! 2·(π−xᵢ)(π−x_{i+1}) on linearly entangled neighbours. The kernel between
//! two vectors is the squared overlap of their encoded states, evaluated
//! either exactly or as a seeded binomial shot estimate of the |0…0⟩
//! readout probability.
//!
//! Qubit q corresponds to bit q of the amplitude index (little-endian).

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::par;

/// Resource guard: 2^24 amplitudes = 256 MiB of complex doubles.
pub const MAX_QUBITS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H(usize),
    Phase(usize, f64),
    Cx(usize, usize),
}

/// Gate list over a fixed qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::Parameter("circuit needs at least 1 qubit".into()));
        }
        Ok(Circuit { n_qubits, gates: Vec::new() })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::Parameter(format!(
                "qubit {q} out of range for {}-qubit circuit",
                self.n_qubits
            )));
        }
        Ok(())
    }

    pub fn h(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        self.gates.push(Gate::H(q));
        Ok(())
    }

    pub fn phase(&mut self, q: usize, theta: f64) -> Result<()> {
        self.check_qubit(q)?;
        self.gates.push(Gate::Phase(q, theta));
        Ok(())
    }

    pub fn cx(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::Parameter(format!(
                "CX control and target are both qubit {control}"
            )));
        }
        self.gates.push(Gate::Cx(control, target));
        Ok(())
    }
}

/// Entanglement layout of the pairwise phase layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entanglement {
    /// Adjacent pairs (0,1), (1,2), …, (n−2, n−1).
    Linear,
}

/// Second-order Pauli-Z evolution circuit for feature vector `x`.
///
/// Per repetition: H on every qubit; Phase(i, 2xᵢ) on every qubit; then for
/// each adjacent pair CX(i,i+1), Phase(i+1, 2(π−xᵢ)(π−x_{i+1})), CX(i,i+1).
pub fn build_feature_map(x: &[f64], reps: usize, entanglement: Entanglement) -> Result<Circuit> {
    let n = x.len();
    if n < 2 {
        return Err(Error::Parameter(format!(
            "second-order map needs at least 2 features, got {n}"
        )));
    }
    if reps == 0 {
        return Err(Error::Parameter("reps must be >= 1".into()));
    }
    let Entanglement::Linear = entanglement;

    let pi = std::f64::consts::PI;
    let mut c = Circuit::new(n)?;
    for _ in 0..reps {
        for q in 0..n {
            c.h(q)?;
        }
        for q in 0..n {
            c.phase(q, 2.0 * x[q])?;
        }
        for i in 0..n - 1 {
            c.cx(i, i + 1)?;
            c.phase(i + 1, 2.0 * (pi - x[i]) * (pi - x[i + 1]))?;
            c.cx(i, i + 1)?;
        }
    }
    Ok(c)
}

/// Normalized state over 2^n amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn n_qubits(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }

    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.amplitudes.len() != other.amplitudes.len() {
            return Err(Error::Parameter("state dimensions differ".into()));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Squared overlap clamped to [0, 1].
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr().clamp(0.0, 1.0))
    }
}

/// Amplitudes of `U|0…0⟩`.
pub fn simulate(c: &Circuit) -> Result<StateVector> {
    if c.n_qubits() > MAX_QUBITS {
        return Err(Error::Resource(format!(
            "{} qubits exceeds the {MAX_QUBITS}-qubit statevector budget",
            c.n_qubits()
        )));
    }
    let dim = 1usize << c.n_qubits();
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    amps[0] = Complex64::new(1.0, 0.0);

    for gate in c.gates() {
        match *gate {
            Gate::H(q) => {
                let bit = 1usize << q;
                let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
                for i in 0..dim {
                    if i & bit == 0 {
                        let a = amps[i];
                        let b = amps[i | bit];
                        amps[i] = (a + b) * inv_sqrt2;
                        amps[i | bit] = (a - b) * inv_sqrt2;
                    }
                }
            }
            Gate::Phase(q, theta) => {
                let bit = 1usize << q;
                let factor = Complex64::from_polar(1.0, theta);
                for (i, a) in amps.iter_mut().enumerate() {
                    if i & bit != 0 {
                        *a *= factor;
                    }
                }
            }
            Gate::Cx(control, target) => {
                let cbit = 1usize << control;
                let tbit = 1usize << target;
                for i in 0..dim {
                    if i & cbit != 0 && i & tbit == 0 {
                        amps.swap(i, i | tbit);
                    }
                }
            }
        }
    }
    Ok(StateVector { amplitudes: amps })
}

/// Default repetition count of the encoding circuit.
pub const DEFAULT_REPS: usize = 2;

/// Exact fidelity kernel `|⟨ψ(x), ψ(y)⟩|²`.
pub fn kernel_exact(x: &[f64], y: &[f64], reps: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Parameter(format!(
            "feature dimensions differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let sx = simulate(&build_feature_map(x, reps, Entanglement::Linear)?)?;
    let sy = simulate(&build_feature_map(y, reps, Entanglement::Linear)?)?;
    sx.fidelity(&sy)
}

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-entry shot seed; stable in (seed, i, j) so any evaluation schedule
/// produces the same Gram bit for bit.
pub fn entry_seed(seed: u64, i: usize, j: usize) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ (i as u64));
    splitmix64(h ^ (j as u64))
}

fn binomial_estimate(p0: f64, shots: u64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Binomial::new(shots, p0.clamp(0.0, 1.0)).expect("probability in [0,1]");
    dist.sample(&mut rng) as f64 / shots as f64
}

/// Shot-based kernel estimate: `Binomial(shots, k_exact) / shots`.
///
/// Sampling the binomial on the exact |0…0⟩ probability is distributionally
/// identical to measuring every qubit `shots` times and counting all-zeros
/// outcomes, at a fraction of the cost.
pub fn kernel_shots(x: &[f64], y: &[f64], reps: usize, shots: u64, seed: u64) -> Result<f64> {
    if shots == 0 {
        return Err(Error::Parameter("shots must be >= 1".into()));
    }
    let p0 = kernel_exact(x, y, reps)?;
    Ok(binomial_estimate(p0, shots, seed))
}

/// How kernel values are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelBackend {
    Exact,
    Shots { shots: u64, seed: u64 },
}

/// Kernel values plus the backend that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    values: DMatrix<f64>,
    backend: KernelBackend,
}

impl KernelMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn backend(&self) -> KernelBackend {
        self.backend
    }

    pub fn shots(&self) -> Option<u64> {
        match self.backend {
            KernelBackend::Exact => None,
            KernelBackend::Shots { shots, .. } => Some(shots),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self.backend {
            KernelBackend::Exact => None,
            KernelBackend::Shots { seed, .. } => Some(seed),
        }
    }
}

fn check_features(x: &[DVector<f64>]) -> Result<usize> {
    let first = x
        .first()
        .ok_or_else(|| Error::Parameter("empty feature list".into()))?;
    let n = first.len();
    if x.iter().any(|v| v.len() != n) {
        return Err(Error::Parameter("feature vectors have mixed dimensions".into()));
    }
    Ok(n)
}

/// Kernel matrix over feature vectors.
///
/// Without `y`: the symmetric training Gram of `x`, diagonal forced to 1,
/// upper triangle computed, lower mirrored. With `y`: the m×p rectangle
/// `k(x[i], y[j])` against the training points. Statevectors are simulated
/// once per vector; in shot mode each entry draws from its own seed
/// ([`entry_seed`]), so parallel and serial fills agree bitwise.
pub fn gram(
    x: &[DVector<f64>],
    y: Option<&[DVector<f64>]>,
    reps: usize,
    backend: KernelBackend,
) -> Result<KernelMatrix> {
    let n = check_features(x)?;
    if let Some(y) = y {
        let ny = check_features(y)?;
        if ny != n {
            return Err(Error::Parameter(format!(
                "feature dimensions differ between sets: {n} vs {ny}"
            )));
        }
    }

    let states_x = par::try_map_collect(x.len(), |i| {
        simulate(&build_feature_map(x[i].as_slice(), reps, Entanglement::Linear)?)
    })?;

    let entry = |si: &StateVector, sj: &StateVector, i: usize, j: usize| -> Result<f64> {
        let p = si.fidelity(sj)?;
        Ok(match backend {
            KernelBackend::Exact => p,
            KernelBackend::Shots { shots, seed } => {
                binomial_estimate(p, shots, entry_seed(seed, i, j))
            }
        })
    };

    let values = match y {
        None => {
            let m = x.len();
            let pairs: Vec<(usize, usize)> =
                (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
            let upper = par::try_map_collect(pairs.len(), |k| {
                let (i, j) = pairs[k];
                entry(&states_x[i], &states_x[j], i, j)
            })?;
            let mut v = DMatrix::identity(m, m);
            for (&(i, j), &val) in pairs.iter().zip(&upper) {
                v[(i, j)] = val;
                v[(j, i)] = val;
            }
            v
        }
        Some(y) => {
            let states_y = par::try_map_collect(y.len(), |j| {
                simulate(&build_feature_map(y[j].as_slice(), reps, Entanglement::Linear)?)
            })?;
            let (m, p) = (x.len(), y.len());
            let flat = par::try_map_collect(m * p, |k| {
                let (i, j) = (k / p, k % p);
                entry(&states_x[i], &states_y[j], i, j)
            })?;
            DMatrix::from_fn(m, p, |i, j| flat[i * p + j])
        }
    };

    Ok(KernelMatrix { values, backend })
}

/// Clamp negative eigenvalues of a symmetric matrix to zero by subtracting
/// their spectral components; the nonnegative part is left untouched.
pub fn clamp_negative_eigenvalues(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Parameter(format!(
            "matrix must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    // Deflate the negative components instead of rebuilding the whole
    // matrix: the positive part passes through untouched, and the
    // correction's vv^T/(v^T v) ratios stay exact for structured inputs.
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let n = sym.nrows();
    let mut out = sym;
    for k in 0..eig.eigenvalues.len() {
        let lambda = eig.eigenvalues[k];
        if lambda >= 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        let norm_sq: f64 = v.iter().map(|x| x * x).sum();
        if norm_sq == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] -= lambda * (v[i] * v[j]) / norm_sq;
            }
        }
    }
    Ok(out)
}

/// Replace negative Gram eigenvalues with zero so downstream solvers see a
/// positive semidefinite matrix.
pub fn enforce_spd(k: &KernelMatrix) -> Result<KernelMatrix> {
    Ok(KernelMatrix {
        values: clamp_negative_eigenvalues(&k.values)?,
        backend: k.backend,
    })
}

/// Write a kernel matrix as plain CSV: row-major, no header, 17 significant
/// digits per entry (enough to reproduce each double exactly).
pub fn write_gram_csv(values: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path.as_ref())
        .map_err(|e| Error::Load { path: path.as_ref().to_path_buf(), detail: e.to_string() })?;
    for i in 0..values.nrows() {
        let row: Vec<String> = (0..values.ncols())
            .map(|j| format!("{:.16e}", values[(i, j)]))
            .collect();
        w.write_record(&row)
            .map_err(|e| Error::Load { path: path.as_ref().to_path_buf(), detail: e.to_string() })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_gram_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Load { path: path.to_path_buf(), detail: e.to_string() })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Error::Load { path: path.to_path_buf(), detail: e.to_string() })?;
        let row: Vec<f64> = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.trim().parse::<f64>().map_err(|_| Error::Load {
                    path: path.to_path_buf(),
                    detail: format!("row {}, column {}: bad number `{field}`", r + 1, c + 1),
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Load {
                    path: path.to_path_buf(),
                    detail: format!("row {} has {} columns, expected {}", r + 1, row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Load { path: path.to_path_buf(), detail: "empty matrix".into() });
    }
    let (m, p) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(m, p, |i, j| rows[i][j]))
}
