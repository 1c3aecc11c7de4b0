use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rigidity_core::energy::{check_selfstress, default_grid, growth_samples, log_grid, KAPPA_GUARD};
use rigidity_core::fixtures;
use rigidity_core::{
    growth_probe, selfstress_basis, stress_data, ConstraintJets, EnergyModel, Error, Surface, SurfaceDocument,
    TrajectoryJet,
};

fn jets(doc: &SurfaceDocument, kmax: usize) -> ConstraintJets {
    let s = Surface::from_document(doc).unwrap();
    ConstraintJets::new(&s, s.reference_state(), kmax).unwrap()
}

#[test]
fn non_selfstress_is_rejected() {
    let cj = jets(&fixtures::planar_three_vertex(), 4);
    let mut w = DVector::zeros(9);
    w[0] = 1.0;
    assert!(matches!(check_selfstress(cj.rigidity(), &w), Err(Error::NotSelfstress(_))));
    assert!(matches!(
        EnergyModel::new(&cj, w, None, None),
        Err(Error::NotSelfstress(_))
    ));
}

#[test]
fn stress_data_agrees_with_stress_matrix() {
    let cj = jets(&fixtures::planar_three_vertex(), 4);
    for w in selfstress_basis(cj.rigidity(), None) {
        let d = stress_data(&w, &cj).unwrap();
        assert!((&d.stress - cj.stress_matrix(w.as_slice()).unwrap()).amax() < 1e-15);
        assert!(d.third_order.max_abs() < 1e-10);
    }
}

#[test]
fn hessian_matches_second_differences() {
    let cj = jets(&fixtures::planar_three_vertex(), 4);
    let w = selfstress_basis(cj.rigidity(), None).remove(1);
    let energy = EnergyModel::new(&cj, w, Some(0.05), None).unwrap();
    let hess = energy.hessian(&cj).unwrap();
    let base = cj.base().clone();
    let h = 1e-4;
    let n = cj.n_angles();
    let e = |d: &DVector<f64>| energy.value_at(cj.evaluator(), (&base + d).as_slice());
    let mut fd = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut pp = DVector::zeros(n);
            pp[i] += h;
            pp[j] += h;
            let mut pm = DVector::zeros(n);
            pm[i] += h;
            pm[j] -= h;
            let mut mp = DVector::zeros(n);
            mp[i] -= h;
            mp[j] += h;
            let mut mm = DVector::zeros(n);
            mm[i] -= h;
            mm[j] -= h;
            fd[(i, j)] = (e(&pp) - e(&pm) - e(&mp) + e(&mm)) / (4.0 * h * h);
        }
    }
    assert!((&hess - &fd).amax() < 1e-5, "{:e}", (&hess - &fd).amax());
    assert!(energy.gradient(&cj).amax() < 1e-12);
}

#[test]
fn prestress_guard_scales_with_stiffness() {
    let cj = jets(&fixtures::flat_degree4(), 4);
    let w = selfstress_basis(cj.rigidity(), None).remove(0);
    let k = vec![DMatrix::identity(3, 3) * 4.0];
    let ok = EnergyModel::new(&cj, w.clone(), Some(0.39), Some(k.clone())).unwrap();
    assert!((ok.sigma_min() - 4.0).abs() < 1e-12);
    let err = EnergyModel::new(&cj, w, Some(4.0 / KAPPA_GUARD * 1.01), Some(k)).unwrap_err();
    assert!(matches!(err, Error::PrestressGuard { .. }));
}

#[test]
fn first_order_rigid_vertex_grows_quadratically() {
    let cj = jets(&fixtures::degree3_vertex(), 4);
    let energy = EnergyModel::unstressed(&cj);
    for v in [[1.0, 0.0, 0.0], [0.3, -0.7, 0.2], [0.0, 0.5, 0.5]] {
        let jet = TrajectoryJet::first_order(DVector::from_row_slice(&v));
        let fit = growth_probe(&energy, &cj, &jet, &log_grid(1e-4, 1e-2, 15)).unwrap();
        assert!((fit.slope - 2.0).abs() < 0.1, "{}", fit.slope);
    }
}

#[test]
fn non_extendable_null_direction_grows_quartically() {
    let cj = jets(&fixtures::planar_three_vertex(), 4);
    let a = rigidity_core::analysis::first_order_test(&cj, None).canonical;
    let jet = TrajectoryJet::first_order(a.column(1).into_owned());
    let fit = growth_probe(&EnergyModel::unstressed(&cj), &cj, &jet, &default_grid()).unwrap();
    assert!((fit.slope - 4.0).abs() < 0.15, "{}", fit.slope);
}

#[test]
fn exact_mechanism_stays_under_noise_floor() {
    // a lone hinge has no closure condition: E vanishes identically
    let cj = jets(&fixtures::single_hinge(), 4);
    let jet = TrajectoryJet::first_order(DVector::from_element(1, 1.0));
    let energy = EnergyModel::unstressed(&cj);
    let err = growth_probe(&energy, &cj, &jet, &default_grid()).unwrap_err();
    assert!(matches!(err, Error::Unresolvable(_)));
    let (samples, _) = growth_samples(&energy, &cj, &jet, &default_grid()).unwrap();
    assert!(samples.iter().all(|p| !p.resolved()));
}

#[test]
fn energy_decrease_is_reported() {
    // stressed toy with negative curvature along e₂
    let sys = fixtures::toy_difference_of_squares();
    let cj = ConstraintJets::from_polynomial(sys, &DVector::zeros(2), 4).unwrap();
    let energy = EnergyModel::new(&cj, DVector::from_element(1, 1.0), Some(0.05), None).unwrap();
    let jet = TrajectoryJet::first_order(DVector::from_vec(vec![0.0, 1.0]));
    let err = growth_probe(&energy, &cj, &jet, &default_grid()).unwrap_err();
    assert!(err.to_string().contains("energy decreases"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn unstressed_energy_is_nonnegative(v in prop::collection::vec(-0.5..0.5f64, 9)) {
        let cj = jets(&fixtures::planar_three_vertex(), 2);
        let energy = EnergyModel::unstressed(&cj);
        let rho = cj.base() + DVector::from_vec(v);
        prop_assert!(energy.value_at(cj.evaluator(), rho.as_slice()) >= 0.0);
    }

    #[test]
    fn hessian_restricted_to_null_space_is_scaled_stress(eps in 1e-4..5e-2f64, k in 0usize..3) {
        let cj = jets(&fixtures::planar_three_vertex(), 2);
        let w = selfstress_basis(cj.rigidity(), None).remove(k);
        let energy = EnergyModel::new(&cj, w.clone(), Some(eps), None).unwrap();
        let n = rigidity_core::linalg::right_null(cj.rigidity(), None).null;
        let lhs = n.transpose() * energy.hessian(&cj).unwrap() * &n;
        let rhs = n.transpose() * cj.stress_matrix(w.as_slice()).unwrap() * &n * eps;
        prop_assert!((lhs - rhs).amax() < 1e-12);
    }
}
