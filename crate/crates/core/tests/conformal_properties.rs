use num_complex::Complex;
use proptest::prelude::*;
use spintau_core::conformal_opt::*;
use spintau_core::lattice_spectra::{Lattice2, SpinOffset};
use spintau_core::revolution_dirac::*;
use spintau_core::Error;
use std::f64::consts::PI;

fn bumpy_sphere(amp: f64, freq: usize, n: usize) -> RevolutionProfile<f64> {
    RevolutionProfile::caps_from_fn(-PI / 2.0, PI / 2.0, n, |t: f64| {
        t.cos() * (1.0 + amp * (freq as f64 * t).sin().powi(2))
    })
    .unwrap()
}

/// `exp(Σ c_k φ_k)` over the low modes of a base.
fn smooth_factor<B: ConformalBase<f64>>(base: &B, coeffs: &[f64]) -> Vec<f64> {
    let modes = base.low_modes();
    let mut log_f = vec![0.0; base.base_weight().len()];
    for (c, m) in coeffs.iter().zip(&modes) {
        for (l, v) in log_f.iter_mut().zip(m) {
            *l += c * v;
        }
    }
    log_f.into_iter().map(f64::exp).collect()
}

fn square_torus(n: usize) -> FlatTorusBase<f64> {
    FlatTorusBase::new(&Lattice2::square(), SpinOffset::from_halves(true, true), n, 7).unwrap()
}

#[test]
fn weighted_eigenproblem_rejects_bad_factors() {
    let base = RevolutionBase::new(&sphere::<f64>(128).unwrap(), 10.0).unwrap();
    let n = base.base_weight().len();
    assert!(matches!(
        weighted_eigenproblem(&base, &vec![1.0; n + 1]),
        Err(Error::Dimension { .. })
    ));
    let mut f = vec![1.0; n];
    f[3] = -1.0;
    assert!(matches!(weighted_eigenproblem(&base, &f), Err(Error::DegenerateMetric(_))));
    f[3] = f64::NAN;
    assert!(matches!(weighted_eigenproblem(&base, &f), Err(Error::DegenerateMetric(_))));
}

#[test]
fn bases_with_harmonic_spinors_are_rejected() {
    assert!(matches!(
        FlatTorusBase::<f64>::new(&Lattice2::square(), SpinOffset::from_halves(false, false), 8, 0),
        Err(Error::Kernel)
    ));
    let trivial = torus_of_revolution::<f64>(2.0, 0.5, 256, ThetaSector::Integer, 1).unwrap();
    let base = RevolutionBase::new(&trivial, 10.0).unwrap();
    let ones = vec![1.0; base.base_weight().len()];
    assert!(matches!(weighted_eigenproblem(&base, &ones), Err(Error::Kernel)));
}

#[test]
fn config_validation_and_defaults() {
    let c: MinimizeConfig = serde_json::from_str(r#"{"N": 64, "damping": 0.25}"#).unwrap();
    assert_eq!(c.grid, 64);
    assert_eq!(c.damping, 0.25);
    assert_eq!(c.floor, 1e-3);
    assert!(serde_json::from_str::<MinimizeConfig>(r#"{"dampen": 1}"#).is_err());
    for bad in [
        MinimizeConfig { damping: 0.0, ..Default::default() },
        MinimizeConfig { damping: 1.5, ..Default::default() },
        MinimizeConfig { floor: 0.0, ..Default::default() },
        MinimizeConfig { residual_tol: -1.0, ..Default::default() },
    ] {
        assert!(matches!(bad.validate(), Err(Error::Parse(_))));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn j_is_invariant_under_spinor_scaling(amp in -0.3f64..0.3, c in 0.01f64..100.0, flip in any::<bool>()) {
        let base = RevolutionBase::new(&bumpy_sphere(amp, 2, 256), 10.0).unwrap();
        let eig = weighted_eigenproblem(&base, &vec![1.0; base.base_weight().len()]).unwrap();
        let c = if flip { -c } else { c };
        let j0 = j_functional(&base, &eig.spinor).unwrap();
        let j1 = j_functional(&base, &eig.spinor.scaled(c)).unwrap();
        prop_assert!((j0 - j1).abs() <= 1e-10 * j0);
    }

    #[test]
    fn j_is_invariant_under_complex_scaling_on_tori(modulus in 0.01f64..100.0, phase in 0.0f64..(2.0 * PI)) {
        let base = square_torus(8);
        let eig = weighted_eigenproblem(&base, &vec![1.0; base.base_weight().len()]).unwrap();
        let j0 = j_functional(&base, &eig.spinor).unwrap();
        let j1 = j_functional(&base, &eig.spinor.scaled(Complex::from_polar(modulus, phase))).unwrap();
        prop_assert!((j0 - j1).abs() <= 1e-10 * j0);
    }

    #[test]
    fn product_is_invariant_under_constant_factors(coeffs in prop::collection::vec(-0.4f64..0.4, 4), c in 0.1f64..10.0) {
        let base = RevolutionBase::new(&bumpy_sphere(0.2, 3, 256), 10.0).unwrap();
        let f = smooth_factor(&base, &coeffs);
        let cf: Vec<f64> = f.iter().map(|v| c * v).collect();
        let a = weighted_eigenproblem(&base, &f).unwrap();
        let b = weighted_eigenproblem(&base, &cf).unwrap();
        prop_assert!((a.product - b.product).abs() <= 1e-9 * a.product);
        prop_assert!((a.lambda / c - b.lambda).abs() <= 1e-9 * a.lambda);
        prop_assert!((a.volume * c * c - b.volume).abs() <= 1e-9 * b.volume);
    }

    #[test]
    fn eigenspinors_bound_j_by_the_product(coeffs in prop::collection::vec(-0.5f64..0.5, 6)) {
        // Hölder gives J(ψ) ≤ λ Vol^{1/2} for the eigenspinor of any factor.
        // The staggered grid evaluates J with a second-order error, so the
        // bound holds up to that error.
        let base = RevolutionBase::new(&bumpy_sphere(0.1, 2, 2048), 10.0).unwrap();
        let e = weighted_eigenproblem(&base, &smooth_factor(&base, &coeffs)).unwrap();
        let j = j_functional(&base, &e.spinor).unwrap();
        prop_assert!(j <= e.product * (1.0 + 5e-4), "{j} > {}", e.product);
    }

    #[test]
    fn torus_eigenspinors_bound_j_by_the_product(coeffs in prop::collection::vec(-0.4f64..0.4, 4)) {
        let base = square_torus(8);
        let e = weighted_eigenproblem(&base, &smooth_factor(&base, &coeffs)).unwrap();
        let j = j_functional(&base, &e.spinor).unwrap();
        prop_assert!(j <= e.product * (1.0 + 1e-8), "{j} > {}", e.product);
    }
}

#[test]
fn round_sphere_is_critical() {
    let base = RevolutionBase::new(&sphere::<f64>(1024).unwrap(), 10.0).unwrap();
    let config = MinimizeConfig { perturbation: 0.0, ..Default::default() };
    let run = minimize_lamin(&base, &config).unwrap();
    assert!(run.estimate.converged);
    assert_eq!(run.estimate.iterations, 0);
    assert!((run.estimate.product - 2.0 * PI.sqrt()).abs() < 1e-4);
}

#[test]
fn minimiser_does_not_raise_the_product_and_finds_the_round_value() {
    let base = RevolutionBase::new(&bumpy_sphere(0.3, 2, 1024), 10.0).unwrap();
    let config = MinimizeConfig { residual_tol: 1e-4, max_iters: 400, ..Default::default() };
    let run = minimize_lamin(&base, &config).unwrap();
    for w in run.products.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + config.accept_tol), "{} -> {}", w[0], w[1]);
    }
    assert!(run.estimate.converged, "residual {}", run.estimate.el_residual);
    let p = run.estimate.product;
    assert!(p <= run.products[0]);
    assert!((p - 2.0 * PI.sqrt()).abs() < 1e-3, "{p}");
    assert_eq!(run.factor.len(), base.base_weight().len());
    assert!(run.factor.iter().all(|f| *f > 0.0));
    assert_eq!(run.factor_rows().len(), run.factor.len());
}

#[test]
fn converged_factor_is_variationally_consistent() {
    let base = RevolutionBase::new(&bumpy_sphere(-0.25, 3, 2048), 10.0).unwrap();
    let config = MinimizeConfig { residual_tol: 1e-3, max_iters: 400, ..Default::default() };
    let run = minimize_lamin(&base, &config).unwrap();
    let e = weighted_eigenproblem(&base, &run.factor).unwrap();
    let j = j_functional(&base, &e.spinor).unwrap();
    let gap = (e.product - j) / e.product;
    assert!(gap.abs() <= 10.0 * run.estimate.el_residual, "gap {gap}, residual {}", run.estimate.el_residual);
}

#[test]
fn trajectory_is_scale_invariant() {
    let profile = bumpy_sphere(0.2, 2, 512);
    let config = MinimizeConfig { max_iters: 30, ..Default::default() };
    let a = minimize_lamin(&RevolutionBase::new(&profile, 10.0).unwrap(), &config).unwrap();
    let b = minimize_lamin(&RevolutionBase::new(&profile.scaled(3.0).unwrap(), 10.0).unwrap(), &config).unwrap();
    assert_eq!(a.products.len(), b.products.len());
    for (x, y) in a.products.iter().zip(&b.products) {
        assert!((x - y).abs() <= 1e-8 * x, "{x} vs {y}");
    }
    assert!((a.estimate.lambda1 / 3.0 - b.estimate.lambda1).abs() <= 1e-8 * a.estimate.lambda1);
}

#[test]
fn torus_minimisation_stays_below_the_flat_value() {
    let base = square_torus(16);
    let flat = weighted_eigenproblem(&base, &vec![1.0; base.base_weight().len()]).unwrap();
    assert!((flat.product - PI * 2f64.sqrt()).abs() < 1e-9);
    let config = MinimizeConfig { max_iters: 40, ..Default::default() };
    let run = minimize_lamin(&base, &config).unwrap();
    assert!(run.estimate.product <= PI * 2f64.sqrt() * (1.0 + 1e-9));
    assert!(run.estimate.product >= 2.0 * PI.sqrt() - 1e-6);
    for w in run.products.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + config.accept_tol));
    }
}
