//! Supervised spatial filtering and super-trial covariance augmentation.
//!
//! Evoked-response epochs are reduced with per-class spatial filters chosen
//! to maximize the ratio of evoked power to overall signal power (the
//! covariance-ratio generalized-eigenvalue formulation, estimated from
//! class-average responses). Each trial is then stacked with the class
//! prototypes into a super-trial whose sample covariance carries both the
//! trial's spatial signature and its temporal alignment with the averages;
//! a small trace-normalized shrinkage keeps the result positive definite.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::dsp::EpochSet;
use crate::error::{Error, Result};
use crate::par;
use crate::spd_manifold::{SpdMatrix, SpdSet};
use crate::types::Label;

const CLASS_ORDER: [Label; 2] = Label::CLASS_ORDER;

/// Trace-normalized shrinkage applied to super-trial covariances.
pub const DEFAULT_SHRINKAGE: f64 = 1e-6;

/// Per-class spatial filters and filtered class-average responses.
///
/// Class order is fixed: index 0 is TARGET, index 1 is NONTARGET.
#[derive(Debug, Clone)]
pub struct XdawnModel {
    /// `n_channels x nfilter` per class; columns have unit norm with the
    /// largest-magnitude component positive.
    filters: [DMatrix<f64>; 2],
    /// `nfilter x samples` per class: filters applied to the class average.
    prototypes: [DMatrix<f64>; 2],
    /// Full generalized-eigenvalue spectrum per class, descending.
    eigenvalues: [DVector<f64>; 2],
}

impl XdawnModel {
    pub fn filters(&self) -> &[DMatrix<f64>; 2] {
        &self.filters
    }

    pub fn prototypes(&self) -> &[DMatrix<f64>; 2] {
        &self.prototypes
    }

    pub fn eigenvalues(&self) -> &[DVector<f64>; 2] {
        &self.eigenvalues
    }

    pub fn class_order(&self) -> [Label; 2] {
        CLASS_ORDER
    }

    pub fn nfilter(&self) -> usize {
        self.filters[0].ncols()
    }

    pub fn n_channels(&self) -> usize {
        self.filters[0].nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.prototypes[0].ncols()
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn center_rows(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut row in out.row_iter_mut() {
        let mean = row.sum() / row.len() as f64;
        row.add_scalar_mut(-mean);
    }
    out
}

/// Eigenpairs of `Σ_c w = λ Σ_x w`, eigenvalues descending.
///
/// `Σ_x` is shrunk toward a scaled identity just enough to factor when it is
/// numerically singular; this never fails for finite inputs.
fn generalized_eig_desc(
    sigma_c: &DMatrix<f64>,
    sigma_x: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = sigma_x.nrows();
    let trace = sigma_x.trace();
    let scale = if trace > 0.0 { trace / n as f64 } else { 1.0 };

    let mut chol = Cholesky::new(sigma_x.clone());
    let mut eps = 1e-12;
    while chol.is_none() && eps <= 1.0 {
        chol = Cholesky::new(sigma_x + DMatrix::identity(n, n) * (eps * scale));
        eps *= 100.0;
    }
    let chol = chol.ok_or_else(|| {
        Error::Fit("signal covariance could not be factored even after shrinkage".into())
    })?;
    let l = chol.l();

    // M = L^{-1} Σ_c L^{-T} shares eigenvalues with the generalized problem
    let y = l
        .solve_lower_triangular(sigma_c)
        .ok_or_else(|| Error::Fit("triangular solve failed".into()))?;
    let m = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::Fit("triangular solve failed".into()))?
        .transpose();
    let eig = symmetrize(&m).symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let lt = l.transpose();
    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (rank, &i) in order.iter().enumerate() {
        values[rank] = eig.eigenvalues[i];
        let u = eig.eigenvectors.column(i).into_owned();
        let w = lt
            .solve_upper_triangular(&u)
            .ok_or_else(|| Error::Fit("triangular solve failed".into()))?;
        vectors.set_column(rank, &w);
    }
    Ok((values, vectors))
}

/// Unit norm with the largest-magnitude component positive.
fn normalize_filter(w: &mut DVector<f64>) {
    let norm = w.norm();
    if norm > 0.0 {
        *w /= norm;
    }
    let lead = w
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    if w[lead] < 0.0 {
        *w = -w.clone();
    }
}

/// Fit per-class spatial filters from epoched data.
///
/// For each class the filters are the leading generalized eigenvectors of
/// `(Σ_c, Σ_x)` where `Σ_c = P̄_c P̄_cᵀ / T` comes from the class-average
/// response and `Σ_x` is the average per-epoch covariance, epochs
/// row-mean-centered first.
pub fn fit_xdawn(epochs: &EpochSet, nfilter: usize) -> Result<XdawnModel> {
    let n_ch = epochs.n_channels();
    let t = epochs.n_samples();
    if nfilter == 0 {
        return Err(Error::Parameter("nfilter must be >= 1".into()));
    }
    if nfilter > n_ch {
        return Err(Error::Parameter(format!(
            "nfilter {nfilter} exceeds channel count {n_ch}"
        )));
    }
    let counts = epochs.class_counts();
    for (class, &count) in CLASS_ORDER.iter().zip(&counts) {
        if count == 0 {
            return Err(Error::Fit(format!("class {class} has no epochs")));
        }
    }

    let centered: Vec<DMatrix<f64>> =
        par::map_collect(epochs.n_trials(), |i| center_rows(&epochs.epochs()[i]));

    let mut averages = [DMatrix::zeros(n_ch, t), DMatrix::zeros(n_ch, t)];
    for (x, &label) in centered.iter().zip(epochs.labels()) {
        averages[label.class_index()] += x;
    }
    for (avg, &count) in averages.iter_mut().zip(&counts) {
        *avg /= count as f64;
    }

    let mut sigma_x = DMatrix::zeros(n_ch, n_ch);
    for x in &centered {
        sigma_x += x * x.transpose() / t as f64;
    }
    sigma_x /= centered.len() as f64;
    sigma_x = symmetrize(&sigma_x);

    let mut filters = Vec::with_capacity(2);
    let mut prototypes = Vec::with_capacity(2);
    let mut eigenvalues = Vec::with_capacity(2);
    for avg in &averages {
        let sigma_c = symmetrize(&(avg * avg.transpose() / t as f64));
        let (values, vectors) = generalized_eig_desc(&sigma_c, &sigma_x)?;
        let mut w = DMatrix::zeros(n_ch, nfilter);
        for k in 0..nfilter {
            let mut col = vectors.column(k).into_owned();
            normalize_filter(&mut col);
            w.set_column(k, &col);
        }
        prototypes.push(w.transpose() * avg);
        filters.push(w);
        eigenvalues.push(values);
    }

    let [f_t, f_nt]: [DMatrix<f64>; 2] = filters.try_into().expect("two classes");
    let [p_t, p_nt]: [DMatrix<f64>; 2] = prototypes.try_into().expect("two classes");
    let [e_t, e_nt]: [DVector<f64>; 2] = eigenvalues.try_into().expect("two classes");
    Ok(XdawnModel {
        filters: [f_t, f_nt],
        prototypes: [p_t, p_nt],
        eigenvalues: [e_t, e_nt],
    })
}

/// Stack prototypes and the filtered trial:
/// `[prototype_TARGET; prototype_NONTARGET; w_TARGETᵀX; w_NONTARGETᵀX]`.
pub fn supertrial(x: &DMatrix<f64>, model: &XdawnModel) -> Result<DMatrix<f64>> {
    if x.nrows() != model.n_channels() {
        return Err(Error::Parameter(format!(
            "trial has {} channels, model expects {}",
            x.nrows(),
            model.n_channels()
        )));
    }
    if x.ncols() != model.n_samples() {
        return Err(Error::Parameter(format!(
            "trial has {} samples, model prototypes have {}",
            x.ncols(),
            model.n_samples()
        )));
    }
    let nf = model.nfilter();
    let t = x.ncols();
    let mut s = DMatrix::zeros(4 * nf, t);
    for (block, rows) in [
        model.prototypes()[0].clone(),
        model.prototypes()[1].clone(),
        model.filters()[0].transpose() * x,
        model.filters()[1].transpose() * x,
    ]
    .iter()
    .enumerate()
    {
        for r in 0..nf {
            s.set_row(block * nf + r, &rows.row(r));
        }
    }
    Ok(s)
}

/// Row-mean-center, form `S Sᵀ / (T−1)`, then blend toward the scaled
/// identity: `(1−γ)·C + γ·(trace(C)/n)·I`.
pub fn centered_covariance(s: &DMatrix<f64>, shrinkage: f64) -> Result<DMatrix<f64>> {
    if !(0.0..1.0).contains(&shrinkage) {
        return Err(Error::Parameter(format!(
            "shrinkage must be in [0, 1), got {shrinkage}"
        )));
    }
    let t = s.ncols();
    if t < 2 {
        return Err(Error::Parameter("covariance needs at least 2 samples".into()));
    }
    let centered = center_rows(s);
    let c = symmetrize(&(&centered * centered.transpose() / (t - 1) as f64));
    let n = c.nrows();
    let target = c.trace() / n as f64;
    Ok(&c * (1.0 - shrinkage) + DMatrix::identity(n, n) * (shrinkage * target))
}

/// Super-trial covariance per trial; 4×4 at `nfilter = 1`.
pub fn erp_covariances(epochs: &EpochSet, model: &XdawnModel, shrinkage: f64) -> Result<SpdSet> {
    if epochs.n_channels() != model.n_channels() {
        return Err(Error::Parameter(format!(
            "epochs have {} channels, model expects {}",
            epochs.n_channels(),
            model.n_channels()
        )));
    }
    par::try_map_collect(epochs.n_trials(), |i| {
        let s = supertrial(&epochs.epochs()[i], model)?;
        let c = centered_covariance(&s, shrinkage)?;
        SpdMatrix::new(c).map_err(|e| {
            Error::Fit(format!("trial {i}: covariance not positive definite ({e})"))
        })
    })
}
