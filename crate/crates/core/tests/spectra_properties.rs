use proptest::prelude::*;
use spintau_core::lattice_spectra::*;
use spintau_core::revolution_dirac::*;
use spintau_core::z2_forms::{alpha, torus_form};
use std::f64::consts::PI;

/// Positive eigenvalues `2π|B^{-T}(m + δ)|` by brute force over a box of
/// dual coordinates, one per dual point, sorted.
fn brute_force_positive(lat: &Lattice2<f64>, delta: SpinOffset, reach: i32) -> Vec<f64> {
    let (a, b) = (lat.generator(0), lat.generator(1));
    let det = a[0] * b[1] - a[1] * b[0];
    let d = delta.delta::<f64>();
    let mut out = Vec::new();
    for m1 in -reach..=reach {
        for m2 in -reach..=reach {
            let c = [m1 as f64 + d[0], m2 as f64 + d[1]];
            // Solve ⟨ξ, a⟩ = c₁, ⟨ξ, b⟩ = c₂.
            let x = (c[0] * b[1] - c[1] * a[1]) / det;
            let y = (c[1] * a[0] - c[0] * b[0]) / det;
            let v = 2.0 * PI * x.hypot(y);
            if v > 1e-12 {
                out.push(v);
            }
        }
    }
    out.sort_by(|p, q| p.partial_cmp(q).unwrap());
    out
}

fn arb_lattice() -> impl Strategy<Value = Lattice2<f64>> {
    (0.3f64..3.0, -1.5f64..1.5, 0.3f64..3.0, 0.0f64..(2.0 * PI)).prop_map(|(l1, shear, l2, rot)| {
        let (c, s) = (rot.cos(), rot.sin());
        let v1 = [l1 * c, l1 * s];
        let w = [shear, l2];
        let v2 = [w[0] * c - w[1] * s, w[0] * s + w[1] * c];
        Lattice2::new(v1, v2).unwrap()
    })
}

fn arb_offset() -> impl Strategy<Value = SpinOffset> {
    (any::<bool>(), any::<bool>()).prop_map(|(a, b)| SpinOffset::from_halves(a, b))
}

#[test]
fn dual_lattice_examples() {
    let z = Lattice2::<f64>::square();
    assert_eq!(dual_lattice(&z).unwrap(), z);
    let r = Lattice2::<f64>::rectangular(2.0, 1.0).unwrap();
    assert_eq!(dual_lattice(&r).unwrap(), Lattice2::rectangular(0.5, 1.0).unwrap());
    let h = Lattice2::<f64>::hexagonal();
    let hd = dual_lattice(&h).unwrap();
    assert!((h.covolume() * hd.covolume() - 1.0).abs() < 1e-12);
    for i in 0..2 {
        for j in 0..2 {
            let (v, w) = (h.generator(i), hd.generator(j));
            let ip = v[0] * w[0] + v[1] * w[1];
            assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }
    assert!(Lattice2::new([1.0, 2.0], [2.0, 4.0]).is_err());
}

#[test]
fn flat_spectrum_examples() {
    let z = Lattice2::<f64>::square();
    let s = flat_spectrum(&z, SpinOffset::from_halves(false, false), 10.0).unwrap();
    assert_eq!(s.kernel_multiplicity(), 2);
    let s = flat_spectrum(&z, SpinOffset::from_halves(true, true), 10.0).unwrap();
    assert!((s.first_positive().unwrap().0 - PI * 2f64.sqrt()).abs() < 1e-12);
    let s = flat_spectrum(&z, SpinOffset::from_halves(true, false), 10.0).unwrap();
    assert!((s.first_positive().unwrap().0 - PI).abs() < 1e-12);
    assert!(flat_spectrum_with_budget(&z, SpinOffset::from_halves(true, false), 1e4, 1000).is_err());
}

#[test]
fn kernel_and_index_examples() {
    let z = Lattice2::<f64>::square();
    assert_eq!(kernel_dim(&z, SpinOffset::from_halves(false, false)).unwrap(), 2);
    assert_eq!(kernel_dim(&z, SpinOffset::from_halves(true, true)).unwrap(), 0);
    assert_eq!(kernel_dim(&Lattice2::<f64>::hexagonal(), SpinOffset::from_halves(false, true)).unwrap(), 0);
    assert!(index_check(&z, SpinOffset::from_halves(false, false)).unwrap());
    assert!(index_check(&z, SpinOffset::from_halves(true, false)).unwrap());
    assert!(index_check(&Lattice2::<f64>::hexagonal(), SpinOffset::from_halves(true, true)).unwrap());
}

#[test]
fn flat_upper_on_stretched_lattices() {
    for l in [1.0, 1.5, 2.0, 4.0] {
        let lat = Lattice2::<f64>::rectangular(l, 1.0 / l).unwrap();
        let along = lamin_flat_upper(&lat, SpinOffset::from_halves(true, false)).unwrap();
        let across = lamin_flat_upper(&lat, SpinOffset::from_halves(false, true)).unwrap();
        let both = lamin_flat_upper(&lat, SpinOffset::from_halves(true, true)).unwrap();
        assert!((along.product - PI / l).abs() < 1e-12);
        assert!((across.product - PI * l).abs() < 1e-12);
        assert!((both.product - PI * (1.0 / (l * l) + l * l).sqrt()).abs() < 1e-12);
        let trivial = lamin_flat_upper(&lat, SpinOffset::from_halves(false, false)).unwrap();
        assert!(trivial.kernel);
        assert_eq!(trivial.product, 0.0);
    }
    let z = lamin_flat_upper(&Lattice2::<f64>::square(), SpinOffset::from_halves(true, true)).unwrap();
    assert!((z.product - PI * 2f64.sqrt()).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flat_spectrum_matches_brute_force(lat in arb_lattice(), delta in arb_offset()) {
        let cutoff = 25.0;
        let s = flat_spectrum(&lat, delta, cutoff).unwrap();
        let ours: Vec<f64> = s.expanded().into_iter().filter(|v| *v > 0.0).collect();
        let oracle: Vec<f64> = brute_force_positive(&lat, delta, 40).into_iter().filter(|v| *v <= cutoff).collect();
        prop_assert_eq!(ours.len(), oracle.len());
        for (x, y) in ours.iter().zip(&oracle) {
            prop_assert!((x - y).abs() <= 1e-9 * y.max(1.0));
        }
    }

    #[test]
    fn flat_spectrum_is_symmetric_with_even_multiplicities(lat in arb_lattice(), delta in arb_offset()) {
        let s = flat_spectrum(&lat, delta, 20.0).unwrap();
        prop_assert!(s.is_symmetric(1e-12));
        for &(_, m) in &s.entries {
            prop_assert_eq!(m % 2, 0);
        }
    }

    #[test]
    fn flat_spectrum_scales_inversely(lat in arb_lattice(), delta in arb_offset(), c in 0.2f64..5.0) {
        let s = flat_spectrum(&lat, delta, 15.0).unwrap();
        let sc = flat_spectrum(&lat.scaled(c).unwrap(), delta, 15.0 / c).unwrap();
        prop_assert_eq!(s.entries.len(), sc.entries.len());
        for (a, b) in s.entries.iter().zip(&sc.entries) {
            prop_assert_eq!(a.1, b.1);
            prop_assert!((a.0 / c - b.0).abs() <= 1e-9 * a.0.abs().max(1.0));
        }
        let u = lamin_flat_upper(&lat, delta).unwrap();
        let uc = lamin_flat_upper(&lat.scaled(c).unwrap(), delta).unwrap();
        prop_assert!((u.positive_product - uc.positive_product).abs() <= 1e-9 * u.positive_product);
    }

    #[test]
    fn index_theorem_holds(lat in arb_lattice(), delta in arb_offset()) {
        let (g1, g2) = delta.gamma();
        let a = alpha(&torus_form(g1, g2)).unwrap();
        let k = kernel_dim(&lat, delta).unwrap();
        prop_assert_eq!((k / 2) % 2 == 1, a.is_one());
        prop_assert!(index_check(&lat, delta).unwrap());
    }
}

/// Distinct values of a sorted list, grouped with a relative tolerance.
fn group(values: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &v in values {
        match out.last_mut() {
            Some((w, m)) if (v - *w).abs() <= tol * w.abs().max(1.0) => *m += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

#[test]
fn sphere_spectrum_matches_closed_form() {
    // The unit sphere has eigenvalues ±(j + 1) with multiplicity 2(j + 1).
    let spec = dirac_spectrum(&sphere::<f64>(2048).unwrap(), 40.0, 12).unwrap();
    assert!(!spec.under_resolved);
    assert!(spec.slice.is_symmetric(1e-12));
    let pos: Vec<f64> = spec.slice.expanded().into_iter().filter(|v| *v > 0.0).collect();
    let groups = group(&pos, 1e-3);
    assert_eq!(groups.len(), 3);
    for (j, &(v, m)) in groups.iter().enumerate() {
        assert!((v - (j + 1) as f64).abs() < 1e-3, "{v}");
        assert_eq!(m, 2 * (j + 1));
    }
    let empty = dirac_spectrum(&sphere::<f64>(64).unwrap(), 5.0, 0).unwrap();
    assert!(empty.slice.entries.is_empty());
}

#[test]
fn sphere_eigenvalue_converges_at_least_first_order() {
    let err = |n: usize| {
        let e = lambda1_area_product(&sphere::<f64>(n).unwrap(), 10.0).unwrap();
        (e.lambda1 - 1.0).abs()
    };
    let errors: Vec<f64> = [128, 256, 512, 1024].iter().map(|&n| err(n)).collect();
    for w in errors.windows(2) {
        assert!(w[1] < w[0] / 2.0, "{errors:?}");
    }
}

#[test]
fn sphere_constant() {
    let e = lambda1_area_product(&sphere::<f64>(2048).unwrap(), 40.0).unwrap();
    assert!((e.product - 2.0 * PI.sqrt()).abs() < 1e-3 * 2.0 * PI.sqrt());
    assert!(!e.flags.any());
    assert!((area(&sphere::<f64>(2048).unwrap()) - 4.0 * PI).abs() < 1e-6);
}

#[test]
fn antiperiodic_cylinder_matches_closed_form() {
    let (c, l) = (0.4, 1.7);
    let p = cylinder::<f64>(c, l, 2048, ThetaSector::HalfInteger, -1).unwrap();
    let op = assemble_mode(&p, ModeIndex::from_twice(1)).unwrap();
    let got = op.nonnegative(4);
    let mut want: Vec<f64> = (-3..3)
        .map(|m| {
            let mu = (2 * m + 1) as f64 * PI / l;
            (mu * mu + (0.5 / c) * (0.5 / c)).sqrt()
        })
        .collect();
    want.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-5 * w, "{g} vs {w}");
    }
    assert!((area(&p) - 2.0 * PI * c * l).abs() < 1e-12);
}

#[test]
fn mode_spectra_are_symmetric_and_mirror_under_sign_flip() {
    let p = dumbbell::<f64>(0.2, 0.5, 512).unwrap();
    for twice in [1, 3, 7] {
        let k = ModeIndex::from_twice(twice);
        let plus = assemble_mode(&p, k).unwrap();
        let minus = assemble_mode(&p, k.negated()).unwrap();
        let n = plus.dim();
        let ev = plus.eigenvalues(0..n);
        for i in 0..n {
            assert!((ev[i] + ev[n - 1 - i]).abs() < 1e-8 * ev[n - 1].abs());
        }
        let a = plus.nonnegative(6);
        let b = minus.nonnegative(6);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10 * x.abs().max(1.0));
        }
    }
    assert!(assemble_mode(&p, ModeIndex::from_twice(2)).is_err());
}

#[test]
fn handle_profiles_with_bounding_circles_have_no_kernel() {
    for rho in [0.3, 0.1] {
        let p = handle::<f64>(rho, 1.0, 1024, -1).unwrap();
        let e = lambda1_area_product(&p, 30.0).unwrap();
        assert!(!e.flags.kernel);
        assert!(e.lambda1 > 0.1);
    }
}

#[test]
fn torus_of_revolution_area_and_kernel() {
    let (big, a) = (2.0, 0.5);
    let p = torus_of_revolution::<f64>(big, a, 1024, ThetaSector::HalfInteger, -1).unwrap();
    assert!((area(&p) - 4.0 * PI * PI * big * a).abs() < 1e-9);
    let e = lambda1_area_product(&p, 30.0).unwrap();
    assert!(!e.flags.kernel && e.lambda1 > 0.0);
    let trivial = torus_of_revolution::<f64>(big, a, 1024, ThetaSector::Integer, 1).unwrap();
    let e = lambda1_area_product(&trivial, 30.0).unwrap();
    assert!(e.flags.kernel);
    assert_eq!(e.lambda1, 0.0);
}

#[test]
fn dumbbell_area_is_close_to_its_parts() {
    // Independent quadrature: Simpson's rule on the sampled profile plus
    // the cap end correction of a sphere pole, compared with two spheres and
    // a tube.
    let (rho, l) = (0.1, 1.0);
    let p = dumbbell::<f64>(rho, l, 4001).unwrap();
    let r = p.r();
    let h = p.dt();
    let mut s = r[0] + r[r.len() - 1];
    for (i, v) in r.iter().enumerate().take(r.len() - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * v;
    }
    let simpson = 2.0 * PI * s * h / 3.0;
    assert!((area(&p) - simpson).abs() < 1e-4 * simpson);
    let parts = 8.0 * PI + 2.0 * PI * rho * l;
    assert!((area(&p) - parts).abs() < 0.01 * parts);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn product_is_scale_invariant(c in 0.2f64..5.0, rho in 0.05f64..0.6) {
        let p = dumbbell::<f64>(rho, 0.8, 512).unwrap();
        let a = lambda1_area_product(&p, 20.0).unwrap();
        let b = lambda1_area_product(&p.scaled(c).unwrap(), 20.0).unwrap();
        prop_assert!((a.product - b.product).abs() < 1e-9 * a.product);
    }

    #[test]
    fn spheres_obey_the_lower_bound(amp in -0.3f64..0.3, freq in 1usize..5, rho in 0.05f64..0.9) {
        let bump = RevolutionProfile::caps_from_fn(-PI / 2.0, PI / 2.0, 1024, |t: f64| {
            t.cos() * (1.0 + amp * (freq as f64 * t).sin().powi(2))
        }).unwrap();
        let e = lambda1_area_product(&bump, 30.0).unwrap();
        prop_assert!(e.product >= 2.0 * PI.sqrt() - 1e-3, "{}", e.product);
        let d = dumbbell::<f64>(rho, 1.0, 1024).unwrap();
        let e = lambda1_area_product(&d, 30.0).unwrap();
        prop_assert!(e.product >= 2.0 * PI.sqrt() - 1e-3, "{}", e.product);
    }

    #[test]
    fn constant_profiles_match_lattice_spectra(l1 in 0.5f64..2.0, l2 in 0.5f64..2.0, delta in arb_offset()) {
        let lat = Lattice2::rectangular(l1, l2).unwrap();
        let spec = dirac_spectrum(&flat_torus(&lat, delta, 1024).unwrap(), 12.0, 12).unwrap();
        let ours: Vec<f64> = spec.slice.expanded().into_iter().filter(|v| *v >= 0.0).collect();
        let oracle = flat_spectrum(&lat, delta, 60.0).unwrap();
        let theirs: Vec<f64> = oracle.expanded().into_iter().filter(|v| *v >= 0.0).collect();
        prop_assert_eq!(spec.slice.kernel_multiplicity(), oracle.kernel_multiplicity());
        for (x, y) in ours.iter().zip(&theirs).take(8) {
            prop_assert!((x - y).abs() <= 1e-4 * y.max(1.0), "{x} vs {y}");
        }
    }
}

#[test]
fn single_precision_solver_agrees() {
    let e = lambda1_area_product(&sphere::<f32>(512).unwrap(), 10.0).unwrap();
    assert!((e.product - 2.0 * std::f32::consts::PI.sqrt()).abs() < 1e-3, "{}", e.product);
    let s = flat_spectrum(&Lattice2::<f32>::hexagonal(), SpinOffset::from_halves(true, false), 10.0).unwrap();
    assert!(s.is_symmetric(1e-6));
}
