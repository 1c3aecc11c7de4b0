use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rigidity_core::fixtures;
use rigidity_core::jets::{de_dt_expanded, df_dt_expanded, df_dt_series, EXPANDED_MAX};
use rigidity_core::{
    de_dt, df_dt, enumerate_partitions, selfstress_basis, ConstraintJets, EnergyModel, Error, Surface,
    SurfaceDocument, TrajectoryJet,
};

fn jets(doc: &SurfaceDocument, kmax: usize) -> ConstraintJets {
    let s = Surface::from_document(doc).unwrap();
    ConstraintJets::new(&s, s.reference_state(), kmax).unwrap()
}

fn random_jet(rng: &mut ChaCha8Rng, n: usize, len: usize) -> TrajectoryJet {
    let derivs = (0..len)
        .map(|_| DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    TrajectoryJet::new(derivs).unwrap()
}

fn dual_path_fixtures() -> Vec<SurfaceDocument> {
    vec![
        fixtures::flat_degree4(),
        fixtures::planar_three_vertex(),
        fixtures::degree5_generic(),
        fixtures::cone_degree4(fixtures::CONE_TAU),
        fixtures::antiprism_band(5),
    ]
}

#[test]
fn partition_formula_matches_written_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for doc in dual_path_fixtures() {
        let cj = jets(&doc, EXPANDED_MAX);
        for _ in 0..20 {
            let jet = random_jet(&mut rng, cj.n_angles(), EXPANDED_MAX);
            for i in 1..=EXPANDED_MAX {
                let a = df_dt(&jet, &cj, i).unwrap();
                let b = df_dt_expanded(&jet, &cj, i).unwrap();
                assert!((&a - &b).amax() < 1e-10, "order {i}: {:e}", (&a - &b).amax());
            }
        }
    }
}

#[test]
fn energy_partition_formula_matches_multilinear_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for doc in [fixtures::planar_three_vertex(), fixtures::flat_degree4()] {
        let cj = jets(&doc, EXPANDED_MAX);
        let w = selfstress_basis(cj.rigidity(), None).remove(0);
        let energy = EnergyModel::new(&cj, w, None, None).unwrap();
        for _ in 0..20 {
            let jet = random_jet(&mut rng, cj.n_angles(), EXPANDED_MAX);
            for i in 1..=EXPANDED_MAX {
                let a = de_dt(&jet, &cj, &energy, i).unwrap();
                let b = de_dt_expanded(&jet, &cj, &energy, i).unwrap();
                assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()), "order {i}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn tensor_path_matches_double_double_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for doc in dual_path_fixtures() {
        let cj = jets(&doc, 8);
        let jet = random_jet(&mut rng, cj.n_angles(), 8);
        let series = df_dt_series::<9>(&jet, &cj);
        for i in 1..=8 {
            let a = df_dt(&jet, &cj, i).unwrap();
            let scale = series[i - 1].amax().max(1.0);
            assert!((&a - &series[i - 1]).amax() < 1e-11 * scale, "order {i}");
        }
    }
}

#[test]
fn partition_coefficients_sum_to_bell_numbers() {
    let bell: [u128; 12] = [1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975, 678570, 4213597];
    for (i, b) in bell.iter().enumerate() {
        let s: u128 = enumerate_partitions(i + 1).iter().map(|p| p.coefficient()).sum();
        assert_eq!(s, *b, "order {}", i + 1);
    }
}

#[test]
fn short_jet_without_free_tail_is_rejected() {
    let cj = jets(&fixtures::flat_degree4(), 4);
    let jet = TrajectoryJet::new(vec![DVector::from_element(4, 1.0)]).unwrap();
    assert!(matches!(df_dt(&jet, &cj, 2), Err(Error::OrderExceeded { .. })));
    assert!(df_dt(&jet.clone().with_free_tail(true), &cj, 2).is_ok());
    assert!(matches!(df_dt(&jet, &cj, 5), Err(Error::OrderExceeded { .. })));
}

#[test]
fn unstressed_energy_derivatives_vanish_below_twice_flex_order() {
    // a (1,1) flex: f ∘ γ = O(t²), so E = ½|f|² = O(t⁴)
    let cj = jets(&fixtures::degree5_generic(), 4);
    let info = rigidity_core::linalg::right_null(cj.rigidity(), None);
    let v = info.null.column(0).into_owned();
    let jet = TrajectoryJet::first_order(v);
    let energy = EnergyModel::unstressed(&cj);
    for i in 1..=3 {
        assert!(de_dt(&jet, &cj, &energy, i).unwrap().abs() < 1e-12);
    }
    assert!(de_dt(&jet, &cj, &energy, 4).unwrap() > 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reparametrization_is_a_group_action(c1 in -1.0..1.0f64, c2 in -1.0..1.0f64, d1 in -1.0..1.0f64, seed in 0u64..1000) {
        // composing τ₁ then τ₂ equals reparametrizing once by τ₁∘τ₂, which
        // at second order adds the coefficients
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let jet = random_jet(&mut rng, 3, 3);
        let two = jet.reparametrize(&[c1]).reparametrize(&[d1]);
        let one = jet.reparametrize(&[c1 + d1]);
        prop_assert!((&two.derivs()[1] - &one.derivs()[1]).amax() < 1e-12);
        let keep = jet.reparametrize(&[0.0, c2]);
        prop_assert_eq!(keep.derivs()[1].clone(), jet.derivs()[1].clone());
    }

    #[test]
    fn normalized_entries_are_orthogonal(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let jet = random_jet(&mut rng, 5, 6);
        let (n, _) = jet.normalized();
        let v1 = &n.derivs()[0];
        for d in &n.derivs()[1..] {
            prop_assert!(d.dot(v1).abs() < 1e-9 * (1.0 + d.norm()));
        }
    }
}
