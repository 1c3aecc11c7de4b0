use nalgebra::DVector;
use proptest::prelude::*;
use rigidity_core::fixtures;
use rigidity_core::jets::df_dt_series;
use rigidity_core::{selfstress_basis, ConstraintJets, Error, Surface, SurfaceDocument, TrajectoryJet};

fn jets(doc: &SurfaceDocument, kmax: usize) -> ConstraintJets {
    let s = Surface::from_document(doc).unwrap();
    ConstraintJets::new(&s, s.reference_state(), kmax).unwrap()
}

fn oracle_fixtures() -> Vec<(&'static str, SurfaceDocument)> {
    vec![
        ("flat_degree4", fixtures::flat_degree4()),
        ("planar_three_vertex", fixtures::planar_three_vertex()),
        ("degree5_generic", fixtures::degree5_generic()),
        ("antiprism_band", fixtures::antiprism_band(5)),
        ("cone_degree4", fixtures::cone_degree4(fixtures::CONE_TAU)),
    ]
}

#[test]
fn analytic_tensors_match_central_differences() {
    for (name, doc) in oracle_fixtures() {
        let cj = jets(&doc, 3);
        for k in 1..=3 {
            for h in [1e-3, 1e-4] {
                let fd = cj.fd_blocks(k, h).unwrap();
                let dev = cj.fd_deviation(k, &fd).unwrap();
                assert!(dev <= h * h, "{name} k={k} h={h:e}: {dev:e}");
            }
        }
    }
}

#[test]
fn fd_order_four_is_refused() {
    let cj = jets(&fixtures::flat_degree4(), 4);
    assert!(matches!(cj.fd_blocks(4, 1e-3), Err(Error::InvalidArgument(_))));
}

#[test]
fn odd_stress_tensors_vanish_on_planar_fixtures() {
    for doc in [fixtures::flat_degree4(), fixtures::planar_three_vertex()] {
        let cj = jets(&doc, 5);
        for w in selfstress_basis(cj.rigidity(), None) {
            for i in [1, 3, 5] {
                let t = cj.weighted(i, w.as_slice()).unwrap();
                assert!(t.max_abs() < 1e-10, "order {i}: {}", t.max_abs());
            }
        }
    }
}

#[test]
fn order_past_kmax_is_an_error() {
    let cj = jets(&fixtures::cone_degree4(fixtures::CONE_TAU), 3);
    let v = vec![1.0; 4];
    assert_eq!(
        cj.contract_power(4, &v).unwrap_err(),
        Error::OrderExceeded {
            requested: 4,
            available: 3
        }
    );
}

#[test]
fn vertex_derivatives_ignore_coordinate_scale() {
    let s = Surface::from_document(&fixtures::planar_three_vertex()).unwrap();
    let big = s.scaled(10.0).unwrap();
    let a = ConstraintJets::new(&s, s.reference_state(), 3).unwrap();
    let b = ConstraintJets::new(&big, big.reference_state(), 3).unwrap();
    assert!((a.rigidity() - b.rigidity()).amax() < 1e-13);
    let d = a.derivative_tensor(3).unwrap().max_abs_diff(&b.derivative_tensor(3).unwrap());
    assert!(d < 1e-13);
}

fn vec_of(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn contraction_is_symmetric(a in vec_of(9), b in vec_of(9), c in vec_of(9)) {
        let cj = jets(&fixtures::planar_three_vertex(), 3);
        let x = cj.contract(3, &[&a, &b, &c]).unwrap();
        let y = cj.contract(3, &[&c, &a, &b]).unwrap();
        let z = cj.contract(3, &[&b, &c, &a]).unwrap();
        prop_assert!((&x - &y).amax() < 1e-13);
        prop_assert!((&x - &z).amax() < 1e-13);
    }

    #[test]
    fn power_contraction_matches_line_series(v in vec_of(5)) {
        // along ρ + t v the k-th t-derivative of f is dᵏf · v^{⊗k}
        let cj = jets(&fixtures::degree5_generic(), 6);
        let jet = TrajectoryJet::first_order(DVector::from_vec(v.clone()));
        let series = df_dt_series::<7>(&jet, &cj);
        for k in 1..=6 {
            let d = cj.contract_power(k, &v).unwrap();
            prop_assert!((&d - &series[k - 1]).amax() < 1e-12, "order {}", k);
        }
    }

    #[test]
    fn cycle_tensors_match_line_series(v in vec_of(10)) {
        let cj = jets(&fixtures::antiprism_band(5), 4);
        let jet = TrajectoryJet::first_order(DVector::from_vec(v.clone()));
        let series = df_dt_series::<5>(&jet, &cj);
        for k in 1..=4 {
            let d = cj.contract_power(k, &v).unwrap();
            prop_assert!((&d - &series[k - 1]).amax() < 1e-11, "order {}", k);
        }
    }
}
