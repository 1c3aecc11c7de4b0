use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use rigidity_core::{fixtures, linalg, rigidity_matrix, ConstraintJets, Surface};

fn surface(doc: &rigidity_core::SurfaceDocument) -> Surface {
    Surface::from_document(doc).unwrap()
}

#[test]
fn every_fixture_validates_and_closes() {
    for (stem, doc) in fixtures::all() {
        let s = Surface::from_document(&doc).unwrap_or_else(|e| panic!("{stem}: {e}"));
        let chk = rigidity_core::is_configuration(&s, s.reference_state(), 1e-12).unwrap();
        assert!(chk.is_configuration, "{stem}: {}", chk.max_residual);
    }
}

#[test]
fn cone_angles_match_spherical_oracle() {
    for tau in [1.6, 1.8, 2.0, 2.3] {
        let s = surface(&fixtures::cone_degree4(tau));
        let oracle = fixtures::cone_oracle_angles(tau);
        for k in 0..4 {
            assert_abs_diff_eq!(s.reference_state()[k], oracle[k], epsilon = 1e-12);
        }
    }
}

fn s3() -> f64 {
    3f64.sqrt()
}

#[test]
fn planar_rigidity_matrix_matches_printed() {
    let s = surface(&fixtures::planar_three_vertex());
    let r = rigidity_matrix(&s, s.reference_state()).unwrap();
    let h = s3() / 2.0;
    #[rustfmt::skip]
    let expect = DMatrix::from_row_slice(9, 9, &[
        0.5, 1.0, -0.5, -0.5, 0.0, 0.0, 0.0, 0.0, 0.0,
        -h, 0.0, h, -h, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        -0.5, 0.0, 0.0, 0.0, 0.5, -h, 0.0, 0.0, 0.0,
        h, 0.0, 0.0, 0.0, h, 0.5, -1.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, -1.0, 0.0, 0.0, -0.5, 0.0, 0.0, 0.5, 0.5,
        0.0, 0.0, 0.0, 0.0, -h, 0.0, 0.0, -h, h,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ]);
    assert_abs_diff_eq!(r, expect, epsilon = 1e-14);
}

/// Printed stress matrix as a function of the three out-of-plane weights.
fn printed_stress(w1: f64, w2: f64, w3: f64) -> DMatrix<f64> {
    let q = s3() / 4.0;
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(9, 9, &[
        -q * (w1 + w2), -2.0 * q * w1, q * w1, q * w1, q * w2, -0.75 * w2, 0.0, 0.0, 0.0,
        -2.0 * q * w1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        q * w1, 0.0, -q * w1, -q * w1, 0.0, 0.0, 0.0, 0.0, 0.0,
        q * w1, 0.0, -q * w1, q * w1, 0.0, 0.0, 0.0, 0.0, 0.0,
        q * w2, 0.0, 0.0, 0.0, q * (w2 + w3), 0.25 * w2, -0.5 * w2, -q * w3, -q * w3,
        -0.75 * w2, 0.0, 0.0, 0.0, 0.25 * w2, -q * w2, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, -0.5 * w2, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, -q * w3, 0.0, 0.0, -q * w3, -q * w3,
        0.0, 0.0, 0.0, 0.0, -q * w3, 0.0, 0.0, -q * w3, q * w3,
    ]);
    m
}

#[test]
fn planar_stress_matrix_matches_printed() {
    let s = surface(&fixtures::planar_three_vertex());
    let jets = ConstraintJets::new(&s, s.reference_state(), 2).unwrap();
    for (w1, w2, w3) in [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (0.3, -1.2, 2.0)] {
        let mut omega = DVector::zeros(9);
        omega[2] = w1;
        omega[5] = w2;
        omega[8] = w3;
        let got = jets.stress_matrix(omega.as_slice()).unwrap();
        assert_abs_diff_eq!(got, printed_stress(w1, w2, w3), epsilon = 1e-14);
    }
}

#[test]
fn planar_null_space_spans_printed_basis() {
    let s = surface(&fixtures::planar_three_vertex());
    let r = rigidity_matrix(&s, s.reference_state()).unwrap();
    let t = s3();
    #[rustfmt::skip]
    let a = DMatrix::from_column_slice(9, 3, &[
        -2.0, 0.0, -2.0, 0.0, 1.0, t, 0.0, 0.0, 1.0,
        2.0, 1.0, 3.0, 1.0, -1.0, -t, 0.0, 1.0, 0.0,
        t, 0.0, t, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0,
    ]);
    assert!((&r * &a).amax() < 1e-14);
    let info = linalg::right_null(&r, None);
    assert_eq!(info.null.ncols(), 3);
    let angles = linalg::principal_angles(&info.null, &a);
    assert!(angles.iter().all(|x| *x < 1e-12), "{angles:?}");
}

#[test]
fn data_directory_matches_builders() {
    // regenerate with `cargo run -p rigidity-core --example export_fixtures`
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    for (stem, doc) in fixtures::all() {
        let text = std::fs::read_to_string(dir.join(format!("{stem}.json"))).unwrap();
        let on_disk: rigidity_core::SurfaceDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(on_disk, doc, "{stem} is stale");
    }
}

#[test]
fn declared_state_must_close() {
    let mut doc = fixtures::cone_degree4(fixtures::CONE_TAU);
    let s = surface(&doc);
    assert!(rigidity_core::is_configuration(&s, s.working_state(), 1e-9).unwrap().is_configuration);
    doc.vertices[2][2] += 0.01;
    let s = surface(&doc);
    let chk = rigidity_core::is_configuration(&s, s.working_state(), 1e-9).unwrap();
    assert!(!chk.is_configuration);
    assert_eq!(chk.worst_block, Some(0));
    // without a declared state the moved coordinates define their own configuration
    doc.state = None;
    let s = surface(&doc);
    assert!(rigidity_core::is_configuration(&s, s.working_state(), 1e-9).unwrap().is_configuration);
    doc.state = Some(vec![0.0; 3]);
    assert!(matches!(
        Surface::from_document(&doc),
        Err(rigidity_core::Error::Validation { .. })
    ));
}
