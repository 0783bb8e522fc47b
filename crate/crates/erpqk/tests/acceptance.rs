//! Acceptance gate: every shipped guarantee checked in one place, one
//! printed pass/fail line per criterion. Run with `--nocapture` to see the
//! lines on success.

mod common;

use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use erpqk::dataset_io::save_subject;
use erpqk::dsp::{default_n_taps, design_bandpass, extract_epochs, filtfilt, EpochSet};
use erpqk::evaluation::{
    balanced_accuracy, f1_score, fit_fold, head_svm, run_pipeline_on, stratified_kfold, Backend,
    Classifier, Confusion, CvReport, PipelineConfig,
};
use erpqk::quantum_kernel::{
    clamp_negative_eigenvalues, enforce_spd, gram, kernel_exact, kernel_shots, KernelBackend,
};
use erpqk::spd_manifold::{
    geometric_mean, riemann_distance, tangent_project, SpdMatrix, MEAN_MAX_ITER, MEAN_TOL,
};
use erpqk::svm::{svc_fit, svc_predict, PredictInput, SvcParams, TrainInput};
use erpqk::Label;

type Check = fn() -> Result<String, String>;

#[test]
fn acceptance_criteria() {
    let checks: &[(&str, Check)] = &[
        ("scope-substitution", scope_substitution),
        ("metric-formulas", metric_formulas),
        ("quantum-kernel-oracle", quantum_kernel_oracle),
        ("shot-convergence", shot_convergence),
        ("spd-clamping", spd_clamping),
        ("riemannian-suite", riemannian_suite),
        ("svm-solver", svm_solver),
        ("pipeline-thresholds", pipeline_thresholds),
        ("determinism", determinism),
        ("no-leakage", no_leakage),
    ];

    let mut failures = Vec::new();
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                println!("FAIL  {name}: {detail}");
                failures.push(*name);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {}", failures.join(", "));
}

/// Headline accuracies from the original 26-subject EEG experiment depend on
/// recordings this artifact does not ship; the remaining criteria substitute
/// formula, property, and synthetic-data checks.
fn scope_substitution() -> Result<String, String> {
    Ok("recorded-EEG headline metrics substituted by property and synthetic checks".into())
}

fn metric_formulas() -> Result<String, String> {
    // (a, b, c, d, ba_num, ba_den, f1_num, f1_den), fractions worked by hand
    type Row = (u64, u64, u64, u64, u64, u64, u64, u64);
    let table: &[Row] = &[
        (2, 0, 10, 0, 1, 1, 1, 1),
        (0, 26, 128, 0, 1, 2, 0, 1), // all-NONTARGET predictor
        (1, 1, 5, 5, 1, 2, 1, 4),
        (5, 5, 5, 5, 1, 2, 1, 2),
        (3, 1, 9, 2, 69, 88, 2, 3),
        (10, 0, 0, 10, 1, 2, 2, 3), // all-TARGET predictor
        (7, 3, 12, 8, 13, 20, 14, 25),
        (1, 0, 1, 0, 1, 1, 1, 1),
        (0, 10, 0, 90, 0, 1, 0, 1),
        (25, 0, 128, 0, 1, 1, 1, 1),
        (13, 12, 64, 64, 51, 100, 13, 51),
        (2, 2, 2, 2, 1, 2, 1, 2),
        (99, 1, 1, 99, 1, 2, 99, 149),
        (50, 50, 100, 0, 3, 4, 2, 3),
        (0, 1, 1000, 0, 1, 2, 0, 1),
        (1, 1000, 1, 1000, 1, 1001, 1, 1001),
        (6, 2, 14, 3, 107, 136, 12, 17),
        (4, 4, 24, 8, 5, 8, 2, 5),
        (30, 2, 60, 4, 15, 16, 10, 11),
        (17, 9, 41, 13, 248, 351, 17, 28),
        (128, 0, 640, 0, 1, 1, 1, 1),
    ];
    for &(a, b, c, d, bn, bd, fn_, fd) in table {
        let conf = Confusion { a, b, c, d };
        let ba = balanced_accuracy(&conf).map_err(|e| e.to_string())?;
        let expected_ba = bn as f64 / bd as f64;
        if ba.to_bits() != expected_ba.to_bits() {
            return Err(format!("BA({a},{b},{c},{d}) = {ba}, expected {bn}/{bd}"));
        }
        let f1 = f1_score(&conf);
        let expected_f1 = fn_ as f64 / fd as f64;
        if f1.to_bits() != expected_f1.to_bits() {
            return Err(format!("F1({a},{b},{c},{d}) = {f1}, expected {fn_}/{fd}"));
        }
    }
    // scale invariance on the whole table
    for &(a, b, c, d, ..) in table {
        let base = Confusion { a, b, c, d };
        let scaled = Confusion { a: a * 7, b: b * 7, c: c * 7, d: d * 7 };
        if balanced_accuracy(&base).unwrap().to_bits()
            != balanced_accuracy(&scaled).unwrap().to_bits()
            || f1_score(&base).to_bits() != f1_score(&scaled).to_bits()
        {
            return Err(format!("({a},{b},{c},{d}) not scale-free"));
        }
    }
    Ok(format!("{} quadruples agree as exact rationals, scale-free", table.len()))
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect()
}

fn quantum_kernel_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    let mut worst: f64 = 0.0;
    for n in [2usize, 3] {
        for _ in 0..50 {
            let x = random_vector(&mut rng, n);
            let y = random_vector(&mut rng, n);
            let got = kernel_exact(&x, &y, 2).map_err(|e| e.to_string())?;
            let want = common::dense_kernel(&x, &y, 2);
            worst = worst.max((got - want).abs());
        }
    }
    if worst > 1e-12 {
        return Err(format!("dense-oracle gap {worst:.3e} exceeds 1e-12"));
    }
    for n in [2usize, 3, 10] {
        let x = random_vector(&mut rng, n);
        let k = kernel_exact(&x, &x, 2).map_err(|e| e.to_string())?;
        if (k - 1.0).abs() > 1e-10 {
            return Err(format!("self kernel at n={n} is {k}"));
        }
    }
    let features: Vec<DVector<f64>> =
        (0..100).map(|_| DVector::from_vec(random_vector(&mut rng, 10))).collect();
    let start = Instant::now();
    let k = gram(&features, None, 2, KernelBackend::Exact).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let min_eig = k
        .values()
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -1e-9 {
        return Err(format!("100x100 Gram min eigenvalue {min_eig:.3e}"));
    }
    if elapsed > 60.0 {
        return Err(format!("100x100 Gram took {elapsed:.1}s (> 60s)"));
    }
    Ok(format!(
        "oracle gap {worst:.1e}; 100x100 Gram min eig {min_eig:.1e} in {elapsed:.1}s"
    ))
}

fn shot_convergence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut total = 0.0;
    for i in 0..100 {
        let x = random_vector(&mut rng, 10);
        let y = random_vector(&mut rng, 10);
        let exact = kernel_exact(&x, &y, 2).map_err(|e| e.to_string())?;
        let est = kernel_shots(&x, &y, 2, 1024, 500 + i).map_err(|e| e.to_string())?;
        total += (est - exact).abs();
    }
    let mean_dev = total / 100.0;
    if mean_dev > 0.02 {
        return Err(format!("mean |shot - exact| at 1024 shots is {mean_dev:.4}"));
    }

    let shots = 8192u64;
    let mut within = 0usize;
    for pair in 0..20u64 {
        let x = random_vector(&mut rng, 10);
        let y = random_vector(&mut rng, 10);
        let exact = kernel_exact(&x, &y, 2).map_err(|e| e.to_string())?;
        let sigma = (exact * (1.0 - exact) / shots as f64).sqrt();
        for trial in 0..50u64 {
            let est = kernel_shots(&x, &y, 2, shots, 90_000 + pair * 50 + trial)
                .map_err(|e| e.to_string())?;
            if (est - exact).abs() <= 3.0 * sigma {
                within += 1;
            }
        }
    }
    if within < 990 {
        return Err(format!("3-sigma bound held in {within}/1000 trials (< 990)"));
    }
    Ok(format!("mean dev {mean_dev:.4} at 1024 shots; 3-sigma held {within}/1000 at 8192"))
}

fn spd_clamping() -> Result<String, String> {
    // worked 2x2 example must reproduce exactly
    let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    let clamped = clamp_negative_eigenvalues(&m).map_err(|e| e.to_string())?;
    let expected = DMatrix::from_row_slice(2, 2, &[1.5, 1.5, 1.5, 1.5]);
    if clamped != expected {
        return Err(format!("2x2 clamp produced {clamped}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(203);
    let mut worst = f64::INFINITY;
    for seed in 0..3u64 {
        let features: Vec<DVector<f64>> =
            (0..40).map(|_| DVector::from_vec(random_vector(&mut rng, 6))).collect();
        let k = gram(&features, None, 2, KernelBackend::Shots { shots: 128, seed })
            .map_err(|e| e.to_string())?;
        let fixed = enforce_spd(&k).map_err(|e| e.to_string())?;
        let min_eig = fixed
            .values()
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        worst = worst.min(min_eig);
    }
    // >= 0 up to symmetric-eigensolver noise on the reconstruction
    if worst < -1e-12 {
        return Err(format!("clamped shot Gram has min eigenvalue {worst:.3e}"));
    }
    Ok(format!("2x2 example exact; clamped shot Grams bottom out at {worst:.1e}"))
}

fn spd_from(rng: &mut ChaCha8Rng, ridge: f64) -> SpdMatrix {
    let b = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
    let mut m = &b * b.transpose();
    for i in 0..4 {
        m[(i, i)] += ridge;
    }
    SpdMatrix::new(m).expect("SPD by construction")
}

fn invertible(rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    loop {
        let w: DMatrix<f64> = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        if w.determinant().abs() >= 0.1 {
            return w;
        }
    }
}

fn riemannian_suite() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(204);
    let congr = |w: &DMatrix<f64>, a: &SpdMatrix| {
        SpdMatrix::new(w.transpose() * a.as_matrix() * w).expect("congruence keeps SPD")
    };

    let mut worst_d: f64 = 0.0;
    for _ in 0..100 {
        let (a, b) = (spd_from(&mut rng, 0.5), spd_from(&mut rng, 0.7));
        let w = invertible(&mut rng);
        let base = riemann_distance(&a, &b).map_err(|e| e.to_string())?;
        let moved =
            riemann_distance(&congr(&w, &a), &congr(&w, &b)).map_err(|e| e.to_string())?;
        worst_d = worst_d.max((base - moved).abs());
    }
    if worst_d > 1e-8 {
        return Err(format!("congruence distance gap {worst_d:.3e} over 100 cases"));
    }

    let mut worst_iso: f64 = 0.0;
    let mut dim_checked = true;
    for _ in 0..100 {
        let g = spd_from(&mut rng, 0.6);
        let x = spd_from(&mut rng, 0.4);
        let d = riemann_distance(&g, &x).map_err(|e| e.to_string())?;
        let t = tangent_project(std::slice::from_ref(&x), &g).map_err(|e| e.to_string())?;
        dim_checked &= t[0].values().len() == 10;
        worst_iso = worst_iso.max((t[0].values().norm() - d).abs());
    }
    if worst_iso > 1e-8 {
        return Err(format!("isometry gap {worst_iso:.3e}"));
    }
    if !dim_checked {
        return Err("tangent dimension is not 10 for 4x4 inputs".into());
    }

    // mean identities
    let a = spd_from(&mut rng, 0.8);
    let single = geometric_mean(std::slice::from_ref(&a), MEAN_TOL, MEAN_MAX_ITER)
        .map_err(|e| e.to_string())?;
    if single.mean.as_matrix() != a.as_matrix() {
        return Err("singleton mean is not the input".into());
    }
    let inv = SpdMatrix::new(a.as_matrix().clone().try_inverse().unwrap())
        .map_err(|e| e.to_string())?;
    let pair_mean =
        geometric_mean(&[a.clone(), inv], MEAN_TOL, MEAN_MAX_ITER).map_err(|e| e.to_string())?;
    let id_gap = (pair_mean.mean.as_matrix() - DMatrix::<f64>::identity(4, 4)).norm();
    if id_gap > 1e-8 {
        return Err(format!("inverse-pair mean sits {id_gap:.3e} from identity"));
    }

    let q = DMatrix::from_row_slice(
        4,
        4,
        &[0.5, 0.5, 0.5, 0.5, 0.5, -0.5, 0.5, -0.5, 0.5, 0.5, -0.5, -0.5, 0.5, -0.5, -0.5, 0.5],
    );
    let diag = |d: &[f64; 4]| DMatrix::from_diagonal(&DVector::from_row_slice(d));
    let d1 = [1.0, 2.0, 4.0, 0.5];
    let d2 = [9.0, 2.0, 1.0, 2.0];
    let ca = SpdMatrix::new(&q * diag(&d1) * q.transpose()).unwrap();
    let cb = SpdMatrix::new(&q * diag(&d2) * q.transpose()).unwrap();
    let commuting =
        geometric_mean(&[ca, cb], MEAN_TOL, MEAN_MAX_ITER).map_err(|e| e.to_string())?;
    let expected = &q
        * diag(&[
            (d1[0] * d2[0]).sqrt(),
            (d1[1] * d2[1]).sqrt(),
            (d1[2] * d2[2]).sqrt(),
            (d1[3] * d2[3]).sqrt(),
        ])
        * q.transpose();
    let cm_gap = (commuting.mean.as_matrix() - &expected).norm();
    if cm_gap > 1e-8 {
        return Err(format!("commuting-pair mean off by {cm_gap:.3e}"));
    }

    let mut worst_eq: f64 = 0.0;
    for _ in 0..20 {
        let set =
            vec![spd_from(&mut rng, 0.4), spd_from(&mut rng, 0.6), spd_from(&mut rng, 0.9)];
        let w = invertible(&mut rng);
        let mean =
            geometric_mean(&set, MEAN_TOL, MEAN_MAX_ITER).map_err(|e| e.to_string())?.mean;
        let moved: Vec<SpdMatrix> = set.iter().map(|m| congr(&w, m)).collect();
        let moved_mean =
            geometric_mean(&moved, MEAN_TOL, MEAN_MAX_ITER).map_err(|e| e.to_string())?.mean;
        let want = congr(&w, &mean);
        let rel = (moved_mean.as_matrix() - want.as_matrix()).norm()
            / (1.0 + want.as_matrix().norm());
        worst_eq = worst_eq.max(rel);
    }
    if worst_eq > 1e-6 {
        return Err(format!("mean equivariance gap {worst_eq:.3e}"));
    }

    Ok(format!(
        "invariance {worst_d:.1e}, isometry {worst_iso:.1e}, equivariance {worst_eq:.1e}, identities hold, tangent dim 10"
    ))
}

fn svm_solver() -> Result<String, String> {
    // XOR at full training accuracy
    let xs: Vec<DVector<f64>> = [[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]]
        .iter()
        .map(|p| DVector::from_row_slice(p))
        .collect();
    let ys = [Label::Target, Label::Target, Label::NonTarget, Label::NonTarget];
    let params = SvcParams { c: 1.0, max_iter: 100_000, tol: 1e-6 };
    let model = svc_fit(TrainInput::Rbf { features: &xs, gamma: 1.0 }, &ys, &params)
        .map_err(|e| e.to_string())?;
    let (pred, _) = svc_predict(&model, PredictInput::Features(&xs)).map_err(|e| e.to_string())?;
    if pred != ys {
        return Err("XOR training accuracy below 100%".into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(205);
    let mut worst_dec: f64 = 0.0;
    for case in 0..100 {
        let c = if case % 2 == 0 { 1.0 } else { 0.05 };
        let v = DMatrix::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
        let mut k = &v * v.transpose();
        for i in 0..4 {
            k[(i, i)] += 0.5;
        }
        let labels = loop {
            let l: Vec<Label> = (0..4)
                .map(|_| if rng.random_bool(0.5) { Label::Target } else { Label::NonTarget })
                .collect();
            let t = l.iter().filter(|&&x| x == Label::Target).count();
            if t > 0 && t < 4 {
                break l;
            }
        };
        let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
        let (oracle_alpha, _) = common::qp_oracle(&k, &y, c).ok_or("oracle found no KKT point")?;
        let oracle_bias = common::bias_convention(&k, &y, &oracle_alpha, c);

        let fit = svc_fit(
            TrainInput::Precomputed(&k),
            &labels,
            &SvcParams { c, max_iter: 200_000, tol: 1e-8 },
        )
        .map_err(|e| e.to_string())?;
        let (_, decisions) =
            svc_predict(&fit, PredictInput::Precomputed(&k)).map_err(|e| e.to_string())?;
        for i in 0..4 {
            let oracle_decision: f64 =
                (0..4).map(|j| oracle_alpha[j] * y[j] * k[(i, j)]).sum::<f64>() + oracle_bias;
            worst_dec = worst_dec.max((decisions[i] - oracle_decision).abs());
        }
    }
    if worst_dec > 1e-4 {
        return Err(format!("decision gap to QP oracle {worst_dec:.3e}"));
    }

    // dual feasibility + KKT at tol on larger random fits
    let tol = 1e-3;
    let mut worst_kkt: f64 = 0.0;
    for case in 0..20 {
        let n = 20;
        let c = [1.0, 0.03][case % 2];
        let v = DMatrix::from_fn(n, 6, |_, _| rng.random_range(-1.0..1.0));
        let mut k = &v * v.transpose();
        for i in 0..n {
            k[(i, i)] += 0.3;
        }
        let labels: Vec<Label> =
            (0..n).map(|i| if i % 2 == 0 { Label::Target } else { Label::NonTarget }).collect();
        let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
        let fit = svc_fit(
            TrainInput::Precomputed(&k),
            &labels,
            &SvcParams { c, max_iter: 500_000, tol },
        )
        .map_err(|e| e.to_string())?;
        let balance: f64 = fit.alphas().iter().zip(&y).map(|(a, yi)| a * yi).sum();
        if balance.abs() > 1e-10 || fit.alphas().iter().any(|&a| !(0.0..=c).contains(&a)) {
            return Err(format!("dual infeasible: balance {balance:.2e}"));
        }
        worst_kkt =
            worst_kkt.max(common::kkt_max_violation(&k, &y, fit.alphas(), fit.bias(), c));
    }
    if worst_kkt > tol + 1e-9 {
        return Err(format!("KKT violation {worst_kkt:.3e} above tol {tol}"));
    }

    Ok(format!(
        "XOR 100%; oracle decision gap {worst_dec:.1e}; KKT within tol ({worst_kkt:.1e})"
    ))
}

fn pipeline_thresholds() -> Result<String, String> {
    let start = Instant::now();
    let rec = common::protocol_subject(2.0, 42);

    let mdm = run_pipeline_on(
        &rec,
        "synthetic",
        &PipelineConfig { classifier: Classifier::Mdm, seed: 7, ..Default::default() },
    )
    .map_err(|e| e.to_string())?;
    let svc = run_pipeline_on(
        &rec,
        "synthetic",
        &PipelineConfig {
            classifier: Classifier::Svc,
            as_lambda: true,
            seed: 7,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let qsvc = run_pipeline_on(
        &rec,
        "synthetic",
        &PipelineConfig {
            classifier: Classifier::Qsvc,
            backend: Backend::Exact,
            as_lambda: true,
            seed: 7,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();

    let agg = |r: &CvReport| r.aggregate.clone().ok_or_else(|| "no successful folds".to_string());
    let (mdm_a, svc_a, qsvc_a) = (agg(&mdm)?, agg(&svc)?, agg(&qsvc)?);

    if mdm_a.test_ba.mean < 0.85 {
        return Err(format!("MDM mean test BA {:.4} < 0.85", mdm_a.test_ba.mean));
    }
    if svc_a.test_ba.mean < 0.85 {
        return Err(format!("SVC mean test BA {:.4} < 0.85", svc_a.test_ba.mean));
    }
    if qsvc_a.train_ba.mean < 0.80 {
        return Err(format!("QSVC mean train BA {:.4} < 0.80", qsvc_a.train_ba.mean));
    }
    if elapsed > 1800.0 {
        return Err(format!("pipeline trio took {elapsed:.0}s (> 30 min)"));
    }
    Ok(format!(
        "MDM test {:.3}, SVC test {:.3}, QSVC train {:.3} (test {:.3}, unconstrained) in {:.0}s",
        mdm_a.test_ba.mean, svc_a.test_ba.mean, qsvc_a.train_ba.mean, qsvc_a.test_ba.mean, elapsed
    ))
}

fn determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let sub = dir.path().join("subject");
    save_subject(&common::small_subject(1.5, 21), "subject", &sub).map_err(|e| e.to_string())?;

    for backend in ["exact", "shots"] {
        let mut outputs: Vec<Vec<u8>> = Vec::new();
        for (i, threads) in ["1", "4", "1", "4"].iter().enumerate() {
            let path = dir.path().join(format!("{backend}-{i}.json"));
            let out = Command::new(env!("CARGO_BIN_EXE_erpqk"))
                .args([
                    "run",
                    "--data",
                    sub.to_str().unwrap(),
                    "--classifier",
                    "qsvc",
                    "--backend",
                    backend,
                    "--shots",
                    "256",
                    "--as-lambda",
                    "--seed",
                    "11",
                    "--threads",
                    threads,
                    "--no-timings",
                    "--report",
                    path.to_str().unwrap(),
                ])
                .output()
                .map_err(|e| e.to_string())?;
            if !out.status.success() {
                return Err(format!(
                    "run ({backend}) failed: {}",
                    String::from_utf8_lossy(&out.stderr)
                ));
            }
            outputs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
        }
        if !outputs.windows(2).all(|w| w[0] == w[1]) {
            return Err(format!("{backend}: reports differ across runs or thread counts"));
        }
    }
    Ok("byte-identical reports across repeats, backends given fixed seed, threads 1 and 4".into())
}

fn no_leakage() -> Result<String, String> {
    let rec = common::small_subject(2.0, 13);
    let cfg = PipelineConfig {
        classifier: Classifier::Qsvc,
        as_lambda: true,
        folds: 4,
        seed: 5,
        ..Default::default()
    };
    let kernel = design_bandpass(rec.fs(), cfg.band_lo, cfg.band_hi, default_n_taps(rec.fs()))
        .map_err(|e| e.to_string())?;
    let filtered = filtfilt(&rec, &kernel).map_err(|e| e.to_string())?;
    let epochs = extract_epochs(&filtered, cfg.tmin_ms / 1000.0, cfg.tmax_ms / 1000.0)
        .map_err(|e| e.to_string())?;
    let folds = stratified_kfold(epochs.labels(), cfg.folds, cfg.seed).map_err(|e| e.to_string())?;

    let mut worst: f64 = 0.0;
    for (fold, (train_idx, _)) in folds.iter().enumerate() {
        let via_subset = epochs.subset(train_idx).map_err(|e| e.to_string())?;
        let train_only = EpochSet::from_parts(
            train_idx.iter().map(|&i| epochs.epochs()[i].clone()).collect(),
            train_idx.iter().map(|&i| epochs.labels()[i]).collect(),
            epochs.fs(),
            epochs.window().0,
            epochs.window().1,
        )
        .map_err(|e| e.to_string())?;

        let seed = 2000 + fold as u64;
        let a = fit_fold(&via_subset, &cfg, seed).map_err(|e| e.to_string())?;
        let b = fit_fold(&train_only, &cfg, seed).map_err(|e| e.to_string())?;

        for class in 0..2 {
            worst = worst.max((&a.xdawn.filters()[class] - &b.xdawn.filters()[class]).norm());
            worst =
                worst.max((&a.xdawn.prototypes()[class] - &b.xdawn.prototypes()[class]).norm());
        }
        worst = worst.max(
            (a.reference.as_ref().unwrap().as_matrix()
                - b.reference.as_ref().unwrap().as_matrix())
            .norm(),
        );
        let (ma, mb) = (head_svm(&a).unwrap(), head_svm(&b).unwrap());
        worst = worst.max(
            ma.alphas()
                .iter()
                .zip(mb.alphas())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0f64, f64::max),
        );
        worst = worst.max((ma.bias() - mb.bias()).abs());
    }
    if worst > 1e-12 {
        return Err(format!("fitted objects moved by {worst:.3e} after test-epoch deletion"));
    }
    Ok(format!("all refit diffs <= {worst:.1e} across 4 folds"))
}
