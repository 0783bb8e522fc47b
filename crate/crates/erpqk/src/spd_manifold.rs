//! Riemannian geometry of symmetric positive-definite matrices.
//!
//! Provides the affine-invariant metric, the Karcher (geometric) mean,
//! tangent-space vectorization at a base point, and the
//! minimum-distance-to-mean classifier built from those pieces.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::par;
use crate::types::Label;

const CLASS_ORDER: [Label; 2] = Label::CLASS_ORDER;

/// Validated symmetric positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    values: DMatrix<f64>,
}

pub type SpdSet = Vec<SpdMatrix>;

const SYMMETRY_TOL: f64 = 1e-10;

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

impl SpdMatrix {
    /// Validate symmetry (within 1e-10) and positive definiteness.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::Parameter(format!(
                "SPD matrix must be square, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("SPD matrix contains non-finite entries".into()));
        }
        let asym = max_asymmetry(&values);
        if asym > SYMMETRY_TOL {
            return Err(Error::Parameter(format!(
                "matrix is asymmetric by {asym:.3e} (tolerance {SYMMETRY_TOL:.0e})"
            )));
        }
        let sym = symmetrize(&values);
        let min_eig = sym
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if !(min_eig > 0.0) {
            return Err(Error::Domain(format!(
                "matrix is not positive definite: min eigenvalue {min_eig:.6e}"
            )));
        }
        Ok(SpdMatrix { values: sym })
    }

    /// Wrap a matrix that is SPD by construction; only symmetrizes.
    pub(crate) fn from_sym_unchecked(values: DMatrix<f64>) -> Self {
        SpdMatrix { values: symmetrize(&values) }
    }

    pub fn identity(n: usize) -> Self {
        SpdMatrix { values: DMatrix::identity(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.values
    }
}

/// Matrix function applied through the eigendecomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFn {
    Log,
    Exp,
    Sqrt,
    InvSqrt,
}

impl MatrixFn {
    fn apply(self, x: f64) -> f64 {
        match self {
            MatrixFn::Log => x.ln(),
            MatrixFn::Exp => x.exp(),
            MatrixFn::Sqrt => x.sqrt(),
            MatrixFn::InvSqrt => 1.0 / x.sqrt(),
        }
    }

    fn needs_positive(self) -> bool {
        !matches!(self, MatrixFn::Exp)
    }
}

/// `V f(Λ) Vᵀ` for a symmetric matrix `A = V Λ Vᵀ`.
///
/// `Log`, `Sqrt` and `InvSqrt` require all eigenvalues positive; `Exp`
/// accepts any symmetric input.
pub fn spd_func(a: &DMatrix<f64>, f: MatrixFn) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Parameter(format!(
            "matrix function needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let asym = max_asymmetry(a);
    if asym > 1e-8 {
        return Err(Error::Parameter(format!("matrix is asymmetric by {asym:.3e}")));
    }
    let eig = symmetrize(a).symmetric_eigen();
    if f.needs_positive() {
        if let Some(bad) = eig.eigenvalues.iter().find(|&&l| l <= 0.0) {
            return Err(Error::Domain(format!(
                "{f:?} undefined: eigenvalue {bad:.6e} is not positive"
            )));
        }
    }
    let mapped = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| f.apply(l)),
    );
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&mapped) * v.transpose();
    Ok(symmetrize(&out))
}

/// Affine-invariant distance `sqrt(Σ log² λᵢ(A⁻¹B))`.
pub fn riemann_distance(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Parameter(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let ai = spd_func(a.as_matrix(), MatrixFn::InvSqrt)?;
    let m = symmetrize(&(&ai * b.as_matrix() * &ai));
    let eig = m.symmetric_eigen();
    let mut sum = 0.0;
    for &l in eig.eigenvalues.iter() {
        if l <= 0.0 {
            return Err(Error::Domain(format!(
                "distance undefined: congruence eigenvalue {l:.6e} is not positive"
            )));
        }
        sum += l.ln() * l.ln();
    }
    Ok(sum.sqrt())
}

/// Karcher mean result; non-convergence sets the flag instead of failing.
#[derive(Debug, Clone)]
pub struct MeanOutcome {
    pub mean: SpdMatrix,
    pub converged: bool,
    pub iterations: usize,
}

pub const MEAN_TOL: f64 = 1e-8;
pub const MEAN_MAX_ITER: usize = 50;

/// Fixed-point geometric mean under the affine-invariant metric.
///
/// Starts from the arithmetic mean and iterates
/// `M ← M^{1/2} exp(mean_i log(M^{-1/2} Cᵢ M^{-1/2})) M^{1/2}` until the
/// Frobenius norm of the mean-log term falls to `tol` or `max_iter` is hit.
pub fn geometric_mean(set: &[SpdMatrix], tol: f64, max_iter: usize) -> Result<MeanOutcome> {
    let n = check_uniform(set)?;
    if !(tol > 0.0) {
        return Err(Error::Parameter("tol must be positive".into()));
    }

    let mut mean = DMatrix::zeros(n, n);
    for c in set {
        mean += c.as_matrix();
    }
    mean /= set.len() as f64;
    mean = symmetrize(&mean);

    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let s = spd_func(&mean, MatrixFn::Sqrt)?;
        let si = spd_func(&mean, MatrixFn::InvSqrt)?;
        let logs = par::try_map_collect(set.len(), |i| {
            spd_func(&symmetrize(&(&si * set[i].as_matrix() * &si)), MatrixFn::Log)
        })?;
        let mut t = DMatrix::zeros(n, n);
        for l in &logs {
            t += l;
        }
        t /= set.len() as f64;
        if t.norm() <= tol {
            converged = true;
            break;
        }
        mean = symmetrize(&(&s * spd_func(&t, MatrixFn::Exp)? * &s));
    }

    Ok(MeanOutcome { mean: SpdMatrix::from_sym_unchecked(mean), converged, iterations })
}

/// Tangent-space coordinates of an SPD matrix at base point `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    values: DVector<f64>,
    reference: SpdMatrix,
}

impl TangentVector {
    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn reference(&self) -> &SpdMatrix {
        &self.reference
    }

    /// `n(n+1)/2` for reference dimension `n`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }
}

/// Row-major upper triangle with off-diagonal entries scaled by √2, so the
/// Euclidean norm of the vector equals the Frobenius norm of the matrix.
fn vectorize_symmetric(l: &DMatrix<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    let sqrt2 = std::f64::consts::SQRT_2;
    for i in 0..n {
        out.push(l[(i, i)]);
        for j in (i + 1)..n {
            out.push(sqrt2 * l[(i, j)]);
        }
    }
    DVector::from_vec(out)
}

fn check_uniform(set: &[SpdMatrix]) -> Result<usize> {
    let first = set
        .first()
        .ok_or_else(|| Error::Parameter("empty SPD set".into()))?;
    let n = first.dim();
    if let Some(bad) = set.iter().find(|m| m.dim() != n) {
        return Err(Error::Parameter(format!(
            "mixed dimensions in SPD set: {} vs {}",
            n,
            bad.dim()
        )));
    }
    Ok(n)
}

/// Project every matrix to the tangent space at `G`:
/// `vec(log(G^{-1/2} X G^{-1/2}))`.
pub fn tangent_project(set: &[SpdMatrix], g: &SpdMatrix) -> Result<Vec<TangentVector>> {
    let n = check_uniform(set)?;
    if n != g.dim() {
        return Err(Error::Parameter(format!(
            "base point dimension {} does not match set dimension {n}",
            g.dim()
        )));
    }
    let gi = spd_func(g.as_matrix(), MatrixFn::InvSqrt)?;
    par::try_map_collect(set.len(), |i| {
        let l = spd_func(&symmetrize(&(&gi * set[i].as_matrix() * &gi)), MatrixFn::Log)?;
        Ok(TangentVector { values: vectorize_symmetric(&l), reference: g.clone() })
    })
}

/// Minimum-distance-to-mean classifier: one geometric mean per class.
#[derive(Debug, Clone)]
pub struct MdmModel {
    class_means: [SpdMatrix; 2],
    pub converged: [bool; 2],
}

impl MdmModel {
    /// Means in `CLASS_ORDER` ([TARGET, NONTARGET]).
    pub fn class_means(&self) -> &[SpdMatrix; 2] {
        &self.class_means
    }

    pub fn class_order(&self) -> [Label; 2] {
        CLASS_ORDER
    }
}

pub fn mdm_fit(set: &[SpdMatrix], labels: &[Label]) -> Result<MdmModel> {
    if set.len() != labels.len() {
        return Err(Error::Parameter(format!(
            "{} matrices but {} labels",
            set.len(),
            labels.len()
        )));
    }
    check_uniform(set)?;
    let mut outcomes = Vec::with_capacity(2);
    for class in CLASS_ORDER {
        let members: Vec<SpdMatrix> = set
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == class)
            .map(|(m, _)| m.clone())
            .collect();
        if members.is_empty() {
            return Err(Error::Fit(format!("class {class} has no training samples")));
        }
        outcomes.push(geometric_mean(&members, MEAN_TOL, MEAN_MAX_ITER)?);
    }
    let nt = outcomes.pop().expect("two outcomes");
    let t = outcomes.pop().expect("two outcomes");
    Ok(MdmModel {
        class_means: [t.mean, nt.mean],
        converged: [t.converged, nt.converged],
    })
}

/// Assign each matrix to the class with the nearest mean; exact ties go to
/// TARGET (first class in order).
pub fn mdm_predict(model: &MdmModel, set: &[SpdMatrix]) -> Result<Vec<Label>> {
    let n = check_uniform(set)?;
    if n != model.class_means[0].dim() {
        return Err(Error::Parameter(format!(
            "query dimension {n} does not match model dimension {}",
            model.class_means[0].dim()
        )));
    }
    par::try_map_collect(set.len(), |i| {
        let d_t = riemann_distance(&set[i], &model.class_means[0])?;
        let d_nt = riemann_distance(&set[i], &model.class_means[1])?;
        Ok(if d_t <= d_nt { Label::Target } else { Label::NonTarget })
    })
}
