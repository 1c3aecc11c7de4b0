use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rigidity_core::analysis::*;
use rigidity_core::derivatives::PolynomialSystem;
use rigidity_core::fixtures;
use rigidity_core::{
    de_dt, df_dt, selfstress_basis, ConstraintJets, EnergyModel, Error, Surface, SurfaceDocument, TrajectoryJet,
};

fn surface(doc: &SurfaceDocument) -> Surface {
    Surface::from_document(doc).unwrap()
}

fn jets(doc: &SurfaceDocument, kmax: usize) -> ConstraintJets {
    let s = surface(doc);
    ConstraintJets::new(&s, s.reference_state(), kmax).unwrap()
}

fn toy(sys: PolynomialSystem, kmax: usize) -> ConstraintJets {
    let n = sys.n_vars;
    ConstraintJets::from_polynomial(sys, &DVector::zeros(n), kmax).unwrap()
}

fn s3() -> f64 {
    3f64.sqrt()
}

/// Outcome names only, for comparisons that must ignore values.
fn verdicts(r: &RigidityReport) -> String {
    let tag = |v: serde_json::Value| v["status"].as_str().unwrap_or("-").to_string();
    let rays = match &r.second_order {
        SecondOrderOutcome::Flexible { rays, .. } => rays.len(),
        _ => 0,
    };
    format!(
        "{} {} {} {} {} {} {} {:?} {:?}",
        r.nullity,
        r.first_order_rigid,
        tag(serde_json::to_value(&r.prestress).unwrap()),
        tag(serde_json::to_value(&r.saddle).unwrap()),
        tag(serde_json::to_value(&r.second_order).unwrap()),
        rays,
        tag(serde_json::to_value(&r.second_order_prestress).unwrap()),
        r.nullity_one.as_ref().map(|n| (n.rigid_order, n.flexible_through)),
        r.rigid,
    )
}

#[test]
fn planar_three_vertex_classification() {
    let s = surface(&fixtures::planar_three_vertex());
    let r = classify(&s, s.reference_state(), &AnalysisOptions::default()).unwrap();
    assert_eq!(r.nullity, 3);
    assert_eq!(r.selfstress_dim, 3);
    match &r.prestress {
        PrestressOutcome::Infeasible { best_score: Some(b), starts, .. } => {
            assert!(*b <= -1e-6, "{b}");
            assert_eq!(*starts, 64);
        }
        other => panic!("{other:?}"),
    }
    assert!(r.saddle_point());
    assert!(!r.indeterminate);
    let SecondOrderOutcome::Flexible { rays, isolated, .. } = &r.second_order else {
        panic!("{:?}", r.second_order)
    };
    assert!(isolated);
    assert_eq!(rays.len(), 2);
    for (ray, ratio) in rays.iter().zip([s3() + 1.0, s3() - 1.0]) {
        assert_eq!(ray[0], 1.0);
        assert!(ray[1].abs() < 1e-9);
        assert!((ray[2] - ratio).abs() < 1e-9, "{}", ray[2]);
    }
    assert!(matches!(r.second_order_prestress, SecondOrderPrestressOutcome::Skipped { ref reason } if reason == "saddle"));
    assert!(r.nullity_one.is_none());
    assert!(!r.undecided);
}

#[test]
fn extendability_of_planar_null_directions() {
    let cj = jets(&fixtures::planar_three_vertex(), 4);
    let first = first_order_test(&cj, None);
    let stresses = selfstress_basis(cj.rigidity(), None);
    let a = &first.canonical;
    let good = a * DVector::from_vec(vec![1.0, 0.0, s3() + 1.0]);
    assert!(second_order_extendable(&cj, &stresses, &good).unwrap());
    let bad = a.column(1).into_owned();
    assert!(!second_order_extendable(&cj, &stresses, &bad).unwrap());
    assert!(second_order_extendable(&cj, &stresses, &DVector::zeros(9)).unwrap());
    let mut off = DVector::zeros(9);
    off[0] = 1.0;
    assert!(matches!(
        second_order_extendable(&cj, &stresses, &off),
        Err(Error::NotInNullSpace(_))
    ));
}

#[test]
fn canonical_basis_is_identity_on_free_angles() {
    let cj = jets(&fixtures::planar_three_vertex(), 2);
    let a = first_order_test(&cj, None).canonical;
    // free angles are the last three, reversed
    for (col, row) in [(0, 8), (1, 7), (2, 6)] {
        for c in 0..3 {
            assert_eq!(a[(row, c)], if c == col { 1.0 } else { 0.0 });
        }
    }
    assert!((cj.rigidity() * &a).amax() < 1e-12);
}

#[test]
fn second_order_solution_residual_and_coefficients() {
    let cj = jets(&fixtures::planar_three_vertex(), 4);
    let a = first_order_test(&cj, None).canonical;
    let rho1 = &a * DVector::from_vec(vec![1.0, 0.0, s3() + 1.0]);
    let sol = solve_second_order(&cj, &rho1, 1).unwrap();
    let res = cj.rigidity() * &sol.particular + cj.contract_power(2, rho1.as_slice()).unwrap();
    assert!(res.amax() < 1e-9);
    assert_eq!(sol.homogeneous.ncols(), 3);
    let sol2 = solve_second_order(&cj, &rho1, 2).unwrap();
    assert_eq!(sol2.coefficient, 3.0);
    assert!((&sol2.particular - &sol.particular * 3.0).amax() < 1e-12);
    let zero = solve_second_order(&cj, &DVector::zeros(9), 1).unwrap();
    assert_eq!(zero.particular.amax(), 0.0);
    let bad = a.column(1).into_owned();
    assert!(matches!(solve_second_order(&cj, &bad, 1), Err(Error::NotExtendable(_))));
}

#[test]
fn cube_corner_is_first_order_rigid() {
    let s = surface(&fixtures::degree3_vertex());
    let r = classify(&s, s.reference_state(), &AnalysisOptions::default()).unwrap();
    assert!(r.first_order_rigid);
    assert_eq!(r.nullity, 0);
    assert_eq!(r.rigid, Some(true));
    assert!(r.certificates.is_empty());
}

#[test]
fn cone_vertex_recursion_stays_flexible() {
    let s = surface(&fixtures::cone_degree4(fixtures::CONE_TAU));
    let opts = AnalysisOptions::default();
    let r = classify(&s, s.reference_state(), &opts).unwrap();
    assert_eq!(r.nullity, 1);
    let rec = r.nullity_one.as_ref().unwrap();
    assert_eq!(rec.rigid_order, None);
    assert_eq!(rec.flexible_through, 6);
    assert_eq!(rec.steps.len(), 6);
    assert!(rec.steps.iter().all(|s| s.rank == 3 && s.augmented_rank == 3));
    let v1 = DVector::from_vec(rec.steps[0].v.clone());
    for s in &rec.steps[1..] {
        assert!(DVector::from_vec(s.v.clone()).dot(&v1).abs() < 1e-12);
    }
    let cj = jets(&fixtures::cone_degree4(fixtures::CONE_TAU), 6);
    for c in &r.certificates {
        assert!(c.revalidate(&cj, 1e-8).unwrap(), "{:?}", c.kind);
    }
    assert!(!r.undecided);
}

#[test]
fn cone_recursion_follows_the_finite_motion() {
    // the folding motion of the spherical four-bar: angles along τ
    let h = 1e-3;
    let rho = |t: f64| DVector::from_row_slice(&fixtures::cone_oracle_angles(fixtures::CONE_TAU + t));
    let tangent = (rho(h) - rho(-h)) / (2.0 * h);
    let cj = jets(&fixtures::cone_degree4(fixtures::CONE_TAU), 6);
    let rec = nullity_one_order(&cj, 6, None).unwrap();
    let v1 = rec.jet.derivs()[0].clone();
    let cos = v1.dot(&tangent).abs() / tangent.norm();
    assert!((cos - 1.0).abs() < 1e-6, "{cos}");
}

#[test]
fn nullity_one_rejects_other_nullities() {
    let cj = jets(&fixtures::planar_three_vertex(), 3);
    assert_eq!(nullity_one_order(&cj, 3, None).unwrap_err(), Error::NullityNotOne(3));
}

#[test]
fn second_order_rigid_toy_agrees_with_recursion() {
    let cj = toy(fixtures::toy_second_order_rigid(), 4);
    let rec = nullity_one_order(&cj, 4, None).unwrap();
    assert_eq!(rec.rigid_order, Some(2));
    let r = classify_jets(&cj, &AnalysisOptions::default()).unwrap();
    assert!(r.second_order_rigid());
    assert_eq!(r.nullity_one.unwrap().rigid_order, Some(2));
}

#[test]
fn reparametrized_recursion_jets_remain_flexes() {
    let cj = jets(&fixtures::cone_degree4(fixtures::CONE_TAU), 6);
    let rec = nullity_one_order(&cj, 6, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let c: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let jet = rec.jet.reparametrize(&c);
        for i in 1..=6 {
            assert!(df_dt(&jet, &cj, i).unwrap().amax() < 1e-8, "order {i}");
        }
    }
}

#[test]
fn orthogonal_components_are_unique() {
    let cj = jets(&fixtures::cone_degree4(fixtures::CONE_TAU), 6);
    let rec = nullity_one_order(&cj, 6, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut draw = || -> Vec<f64> { (0..5).map(|_| rng.random_range(-2.0..2.0)).collect() };
    let (a, _) = rec.jet.reparametrize(&draw()).normalized();
    let (b, _) = rec.jet.reparametrize(&draw()).normalized();
    for i in 1..6 {
        assert!((&a.derivs()[i] - &b.derivs()[i]).amax() < 1e-8, "entry {}", i + 1);
    }
    let again = nullity_one_order(&cj, 6, None).unwrap();
    assert_eq!(again.steps, rec.steps);
}

#[test]
fn toy_stabilizing_stress() {
    let cj = toy(fixtures::toy_sum_of_squares(), 4);
    let r = classify_jets(&cj, &AnalysisOptions::default()).unwrap();
    let PrestressOutcome::Stable { omega, lambda_min, .. } = &r.prestress else {
        panic!("{:?}", r.prestress)
    };
    assert_eq!(omega.len(), 1);
    assert!((omega[0] - 1.0).abs() < 1e-12);
    assert!((lambda_min - 2.0).abs() < 1e-12);
    assert!(!r.saddle_point());
}

#[test]
fn toy_indefinite_stress_is_infeasible() {
    let cj = toy(fixtures::toy_difference_of_squares(), 4);
    let r = classify_jets(&cj, &AnalysisOptions::default()).unwrap();
    assert!(matches!(r.prestress, PrestressOutcome::Infeasible { .. }));
    assert!(r.saddle_point());
}

#[test]
fn degenerate_saddle_descends_below_the_bound() {
    let cj = toy(fixtures::toy_degenerate_saddle(), 4);
    let r = classify_jets(&cj, &AnalysisOptions::default()).unwrap();
    let SaddleOutcome::Saddle {
        omega,
        direction,
        degenerate,
        phi: Some(phi),
        s_bound: Some(bound),
        ..
    } = &r.saddle
    else {
        panic!("{:?}", r.saddle)
    };
    assert!(degenerate);
    assert!(*bound > 0.0);
    let energy = EnergyModel::new(&cj, DVector::from_vec(omega.clone()), None, None).unwrap();
    let dir = DVector::from_vec(direction.clone());
    let phi = DVector::from_vec(phi.clone());
    let along = |s: f64| de_dt(&TrajectoryJet::first_order(&dir + &phi * s), &cj, &energy, 2).unwrap();
    assert!(along(0.5 * bound) < 0.0);
    assert!(along(2.0 * bound) > 0.0);
    assert!(along(0.0).abs() < 1e-15);
}

#[test]
fn quartic_toy_is_second_order_prestress_stable() {
    let cj = toy(fixtures::toy_quartic(), 4);
    let r = classify_jets(&cj, &AnalysisOptions::default()).unwrap();
    assert!(r.indeterminate);
    assert!(r.second_order_prestress_stable(), "{:?}", r.second_order_prestress);
    assert_eq!(r.rigid, Some(true));
    // the growth oracle: E grows like t⁴ along the flex ray
    let SecondOrderPrestressOutcome::Stable { omega, .. } = &r.second_order_prestress else {
        unreachable!()
    };
    let energy = EnergyModel::new(&cj, DVector::from_vec(omega.clone()), None, None).unwrap();
    let jet = TrajectoryJet::first_order(DVector::from_vec(vec![0.0, 1.0]));
    let fit = rigidity_core::growth_probe(&energy, &cj, &jet, &rigidity_core::energy::default_grid()).unwrap();
    assert!((fit.slope - 4.0).abs() < 0.15, "{}", fit.slope);
}

#[test]
fn verdicts_are_invariant_under_scaling() {
    let opts = AnalysisOptions::default();
    for (stem, doc) in fixtures::all() {
        let s = surface(&doc);
        let big = s.scaled(10.0).unwrap();
        let a = classify(&s, s.reference_state(), &opts).unwrap();
        let b = classify(&big, big.reference_state(), &opts).unwrap();
        assert_eq!(verdicts(&a), verdicts(&b), "{stem}");
    }
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let s = surface(&fixtures::planar_three_vertex());
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| classify(&s, s.reference_state(), &AnalysisOptions::default()).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&run(3)).unwrap());
}

#[test]
fn null_vectors_and_certificates_hold_on_every_fixture() {
    let opts = AnalysisOptions::default();
    for (stem, doc) in fixtures::all() {
        let s = surface(&doc);
        let cj = ConstraintJets::new(&s, s.reference_state(), required_order(&opts)).unwrap();
        let r = classify_jets(&cj, &opts).unwrap();
        for v in &r.null_basis {
            let res = (cj.rigidity() * DVector::from_vec(v.clone())).amax();
            assert!(res < 1e-10, "{stem}: {res:e}");
        }
        for c in &r.certificates {
            assert!(c.revalidate(&cj, CERTIFICATE_TOL).unwrap(), "{stem} {:?}", c.kind);
        }
        assert!(!(r.prestress_stable() && r.saddle_point()), "{stem}");
        if r.second_order_prestress_stable() {
            assert!(r.indeterminate, "{stem}");
        }
    }
}

#[test]
fn single_quadric_in_three_unknowns_is_not_isolated() {
    // flat degree-5 vertex: nullity 3 and one selfstress, so the quadric cone is a curve of rays
    let ring: Vec<[f64; 3]> = (0..5)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * (k as f64 + 0.13 * (k % 3) as f64) / 5.0;
            [a.cos(), a.sin(), 0.0]
        })
        .collect();
    let s = surface(&fixtures::fan_document("flat-5", [0.0; 3], &ring));
    let r = classify(&s, s.reference_state(), &AnalysisOptions::default()).unwrap();
    assert_eq!(r.nullity, 3);
    match &r.second_order {
        SecondOrderOutcome::Flexible { isolated, rays, .. } => {
            assert!(!isolated);
            assert!(!rays.is_empty());
        }
        other => panic!("{other:?}"),
    }
}

fn pd_quadric_system(a: f64, b: f64, c: f64) -> PolynomialSystem {
    // f = (ρ₃, aρ₁² + 2bρ₁ρ₂ + cρ₂²)
    PolynomialSystem::new(
        3,
        vec![
            vec![(1.0, vec![0, 0, 1])],
            vec![(a, vec![2, 0, 0]), (2.0 * b, vec![1, 1, 0]), (c, vec![0, 2, 0])],
        ],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn definite_stress_forces_second_order_rigidity(a in 0.2..3.0f64, c in 0.2..3.0f64, t in -0.9..0.9f64) {
        let b = t * (a * c).sqrt();
        let cj = toy(pd_quadric_system(a, b, c), 4);
        let first = first_order_test(&cj, None);
        prop_assert_eq!(first.nullity, 2);
        let stresses = selfstress_basis(cj.rigidity(), None);
        let out = second_order_test(&cj, &stresses, &first, &AnalysisOptions::default()).unwrap();
        prop_assert_eq!(out.outcome, SecondOrderOutcome::Rigid);
    }

    #[test]
    fn indefinite_binary_quadric_rays_are_roots(a in 0.2..3.0f64, c in 0.2..3.0f64, t in 1.1..3.0f64) {
        let b = t * (a * c).sqrt();
        let cj = toy(pd_quadric_system(a, b, c), 4);
        let first = first_order_test(&cj, None);
        let stresses = selfstress_basis(cj.rigidity(), None);
        let out = second_order_test(&cj, &stresses, &first, &AnalysisOptions::default()).unwrap();
        prop_assert_eq!(out.rays.len(), 2);
        for jet in &out.flexes {
            prop_assert!(df_dt(jet, &cj, 2).unwrap().amax() < 1e-10);
        }
    }

    #[test]
    fn seeds_change_nothing_on_the_planar_surface(seed in 0u64..50) {
        let s = surface(&fixtures::planar_three_vertex());
        let opts = AnalysisOptions { seed, starts: 16, ..AnalysisOptions::default() };
        let r = classify(&s, s.reference_state(), &opts).unwrap();
        prop_assert!(r.saddle_point());
        prop_assert!(!r.prestress_stable());
    }

    #[test]
    fn random_stiffness_keeps_stress_curvature(seed in 0u64..100) {
        let cj = jets(&fixtures::planar_three_vertex(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks: Vec<DMatrix<f64>> = (0..3)
            .map(|_| {
                let m = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
                &m * m.transpose() + DMatrix::identity(3, 3)
            })
            .collect();
        let w = selfstress_basis(cj.rigidity(), None).remove(0);
        let e = EnergyModel::new(&cj, w.clone(), None, Some(blocks)).unwrap();
        let n = rigidity_core::linalg::right_null(cj.rigidity(), None).null;
        let lhs = n.transpose() * e.hessian(&cj).unwrap() * &n;
        let rhs = n.transpose() * cj.stress_matrix(w.as_slice()).unwrap() * &n * e.epsilon();
        prop_assert!((lhs - rhs).amax() < 1e-12);
    }
}
