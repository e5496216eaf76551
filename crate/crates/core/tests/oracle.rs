//! Cross-checks of the matrix-free operators against dense matrices built
//! directly from their defining formulas (no probing of the code under test).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use paq_core::coherence::{gram_spectrum, mutual_coherence_exact};
use paq_core::linalg::{distance, norm, random_complex, DenseOperator};
use paq_core::projector::{gradient, objective, probe_dual_gram, DEFAULT_MEMORY_BUDGET};
use paq_core::solver::{estimate_step, ista, Lambda, StepSize};
use paq_core::transforms::make_mask;
use paq_core::{
    Complex64, DualGram, EffectiveOperator, GradientMode, GridShape, IstaConfig, LinearOperator,
    Projector, Rotator, SamplingMask, SensingOperator,
};

type C = Complex64;
type CMat = DMatrix<C>;

fn dft(n: usize) -> CMat {
    let s = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, n, |k, j| {
        C::from_polar(s, -2.0 * PI * (k * j) as f64 / n as f64)
    })
}

/// Orthonormal DCT-II synthesis: columns are the basis vectors.
fn idct(n: usize) -> CMat {
    CMat::from_fn(n, n, |m, k| {
        let s = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        C::new(
            s * (PI * (2 * m + 1) as f64 * k as f64 / (2 * n) as f64).cos(),
            0.0,
        )
    })
}

fn dense_sensing(mask: &SamplingMask) -> CMat {
    let (rows, cols) = (mask.shape().rows(), mask.shape().cols());
    let full = dft(rows).kronecker(&dft(cols)) * idct(rows).kronecker(&idct(cols));
    let keep: Vec<usize> = mask
        .lines()
        .iter()
        .flat_map(|&r| (0..cols).map(move |c| r * cols + c))
        .collect();
    CMat::from_fn(keep.len(), rows * cols, |i, j| full[(keep[i], j)])
}

fn dense_apply(m: &CMat, x: &[C]) -> Vec<C> {
    (m * nalgebra::DVector::from_column_slice(x))
        .as_slice()
        .to_vec()
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn masked_operator(rows: usize, cols: usize, fraction: f64, seed: u64) -> (SensingOperator, CMat) {
    let mask = make_mask(GridShape::new(rows, cols).unwrap(), fraction, 0.0, seed).unwrap();
    let dense = dense_sensing(&mask);
    (SensingOperator::new(mask), dense)
}

#[test]
fn forward_and_adjoint_match_dense_formula() {
    for (rows, cols, f, seed) in [(8, 4, 0.5, 1), (4, 8, 0.75, 2), (16, 16, 0.25, 3)] {
        let (a, dense) = masked_operator(rows, cols, f, seed);
        for s in 0..4 {
            let c = random_complex(rows * cols, s);
            let y = random_complex(a.measurement_len(), 10 + s);
            assert!(distance(&a.apply(&c).unwrap(), &dense_apply(&dense, &c)) <= 1e-10 * norm(&c));
            let back = dense_apply(&dense.adjoint(), &y);
            assert!(distance(&a.apply_adjoint(&y).unwrap(), &back) <= 1e-10 * norm(&y));
        }
    }
}

#[test]
fn probed_dual_gram_matches_dense_product_and_is_identity() {
    let (a, dense) = masked_operator(8, 8, 0.375, 5);
    let b = probe_dual_gram(&a, DEFAULT_MEMORY_BUDGET).unwrap();
    let expected = &dense * dense.adjoint();
    assert!(max_abs(&(b.matrix() - &expected)) < 1e-12);
    // rows of a unitary matrix are orthonormal, so any row selection gives I
    let eye = CMat::identity(a.measurement_len(), a.measurement_len());
    assert!(max_abs(&(b.matrix() - eye)) < 1e-12);
}

#[test]
fn rotator_spectrum_and_determinant() {
    for (n, eps, nnz, seed) in [(24, 0.05, 4, 1), (16, 0.3, 15, 2), (32, 0.005, 8, 3)] {
        let q = Rotator::build(n, eps, nnz, seed).unwrap();
        let dense = q.to_dense();
        // I + S with S skew-symmetric: eigenvalues 1 ± iσ
        let s = &dense - DMatrix::<f64>::identity(n, n);
        assert!((&s + s.transpose()).amax() < 1e-15);
        for ev in dense.complex_eigenvalues().iter() {
            assert!((ev.re - 1.0).abs() < 1e-9, "eigenvalue {ev}");
        }
        assert!(dense.determinant() >= 1.0 - 1e-12);
        let x = random_complex(n, seed);
        let applied = q.apply(&x).unwrap();
        let via_dense: Vec<C> = (0..n)
            .map(|i| (0..n).map(|j| x[j] * dense[(i, j)]).sum())
            .collect();
        assert!(distance(&applied, &via_dense) < 1e-12);
        let t: Vec<C> = (0..n)
            .map(|i| (0..n).map(|j| x[j] * dense[(j, i)]).sum())
            .collect();
        assert!(distance(&q.apply_adjoint(&x).unwrap(), &t) < 1e-12);
        assert!(distance(&q.apply(&q.solve(&x).unwrap()).unwrap(), &x) < 1e-8 * norm(&x));
    }
}

fn random_pd(m: usize, seed: u64) -> DualGram {
    let g = CMat::from_vec(m, m, random_complex(m * m, seed));
    DualGram::from_matrix(
        &g * g.adjoint() / C::new(m as f64, 0.0) + CMat::identity(m, m) * C::new(0.5, 0.0),
    )
    .unwrap()
}

#[test]
fn frechet_gradient_matches_finite_differences() {
    let m = 6;
    let b = random_pd(m, 7);
    let p =
        CMat::identity(m, m) + CMat::from_vec(m, m, random_complex(m * m, 8)) * C::new(0.1, 0.0);
    let g = gradient(&p, &b, GradientMode::Frechet).unwrap();
    for s in 0..5 {
        let dir = CMat::from_vec(m, m, random_complex(m * m, 100 + s));
        let h = 1e-6;
        let plus = objective(&(&p + &dir * C::new(h, 0.0)), &b).unwrap();
        let minus = objective(&(&p - &dir * C::new(h, 0.0)), &b).unwrap();
        let fd = (plus - minus) / (2.0 * h);
        let analytic: f64 = g
            .iter()
            .zip(dir.iter())
            .map(|(gi, di)| (gi.conj() * di).re)
            .sum();
        assert!(
            (fd - analytic).abs() <= 1e-6 * analytic.abs().max(1.0),
            "fd {fd} vs {analytic}"
        );
    }
}

#[test]
fn product_form_agrees_with_frechet_only_up_to_scale_when_b_is_identity() {
    let m = 5;
    let b = DualGram::from_matrix(CMat::identity(m, m)).unwrap();
    let p =
        CMat::identity(m, m) + CMat::from_vec(m, m, random_complex(m * m, 3)) * C::new(0.05, 0.0);
    let f = gradient(&p, &b, GradientMode::Frechet).unwrap();
    let pf = gradient(&p, &b, GradientMode::ProductForm).unwrap();
    assert!(max_abs(&(f - pf * C::new(2.0, 0.0))) < 1e-12);
}

#[test]
fn coherence_matches_dense_normalized_gram() {
    let (a, dense) = masked_operator(8, 4, 0.5, 9);
    let report = mutual_coherence_exact(&a).unwrap();
    let norms: Vec<f64> = (0..dense.ncols()).map(|j| dense.column(j).norm()).collect();
    let gram = dense.adjoint() * &dense;
    let mut mu: f64 = 0.0;
    for i in 0..dense.ncols() {
        for j in i + 1..dense.ncols() {
            if norms[i] > 1e-12 && norms[j] > 1e-12 {
                mu = mu.max(gram[(i, j)].norm() / (norms[i] * norms[j]));
            }
        }
    }
    assert!((report.mu - mu).abs() < 1e-10);
}

#[test]
fn gram_spectrum_matches_eigendecomposition() {
    let b = random_pd(7, 11);
    let spectrum = gram_spectrum(b.matrix()).unwrap();
    let ev = b.matrix().clone().symmetric_eigenvalues();
    let (lo, hi) = ev
        .iter()
        .fold((f64::MAX, 0.0f64), |(l, h), &e| (l.min(e), h.max(e)));
    assert!((spectrum.condition_ratio - hi / lo).abs() < 1e-9 * hi / lo);
}

#[test]
fn ista_on_matrix_free_and_dense_operators_agree() {
    let (a, dense) = masked_operator(8, 8, 0.5, 12);
    let dense_op = DenseOperator::new(dense);
    let y = random_complex(a.measurement_len(), 4);
    let cfg = IstaConfig {
        lambda: Lambda::Fixed(0.05),
        step: StepSize::Fixed(0.9),
        max_iters: 50,
        tol: 0.0,
        ..IstaConfig::default()
    };
    let free = ista(&a, &y, &cfg).unwrap();
    let dense = ista(&dense_op, &y, &cfg).unwrap();
    assert!(distance(&free.coefficients, &dense.coefficients) < 1e-9);
}

#[test]
fn auto_step_matches_dense_spectral_norm_of_preconditioned_operator() {
    let (a, dense_a) = masked_operator(8, 8, 0.5, 21);
    let m = a.measurement_len();
    let perturb = CMat::from_vec(m, m, random_complex(m * m, 5)) * C::new(0.1, 0.0);
    let p_dense = CMat::identity(m, m) + perturb;
    let p = Projector::from_matrix(p_dense.clone()).unwrap();
    let q = Rotator::build(64, 0.05, 4, 3).unwrap();
    let q_dense = q.to_dense().map(|v| C::new(v, 0.0));

    let effective = EffectiveOperator::new(&a, Some(&p), Some(&q)).unwrap();
    let dense = &p_dense * &dense_a * &q_dense;
    let x = random_complex(64, 9);
    assert!(distance(&effective.apply(&x).unwrap(), &dense_apply(&dense, &x)) < 1e-12);

    let sigma = dense.singular_values().max();
    let step = estimate_step(&effective, 500, 0).unwrap();
    let expected = 0.99 / (sigma * sigma);
    assert!(
        (step - expected).abs() < 1e-6 * expected,
        "{step} vs {expected}"
    );
}

#[test]
fn ista_recovers_sparse_supports_on_observed_atoms() {
    let mask = make_mask(GridShape::new(32, 32).unwrap(), 0.4, 0.08, 0).unwrap();
    let a = SensingOperator::new(mask);
    let n = 1024;
    // Atoms whose whole energy lands on sampled rows; A is an isometry there.
    let observed: Vec<usize> = (0..n)
        .filter(|&j| {
            let mut e = vec![C::new(0.0, 0.0); n];
            e[j] = C::new(1.0, 0.0);
            norm(&a.apply(&e).unwrap()) > 1.0 - 1e-9
        })
        .collect();
    assert!(observed.len() >= 10);

    let mut c = vec![C::new(0.0, 0.0); n];
    let stride = observed.len() / 10;
    for (k, v) in random_complex(10, 3).into_iter().enumerate() {
        c[observed[k * stride]] = v;
    }
    let y = a.apply(&c).unwrap();
    let cfg = IstaConfig {
        lambda: Lambda::Fixed(1e-4),
        max_iters: 2000,
        tol: 1e-12,
        record_curve: false,
        ..IstaConfig::default()
    };
    let out = ista(&a, &y, &cfg).unwrap();
    let rel = distance(&out.coefficients, &c) / norm(&c);
    assert!(
        rel < 1e-2,
        "rel {rel}, {} observed, {} it",
        observed.len(),
        out.iterations
    );
}
