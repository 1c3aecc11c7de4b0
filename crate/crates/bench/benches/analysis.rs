use criterion::{black_box, criterion_group, criterion_main, Criterion};
use nalgebra::DVector;
use rigidity_core::analysis::required_order;
use rigidity_core::{
    classify_jets, df_dt, fixtures, rigidity_matrix, AnalysisOptions, ConstraintJets, Surface, TrajectoryJet,
};

fn surface(stem: &str) -> Surface {
    let doc = fixtures::all()
        .into_iter()
        .find(|(s, _)| *s == stem)
        .map(|(_, d)| d)
        .expect("known fixture");
    Surface::from_document(&doc).expect("valid fixture")
}

fn rigidity(c: &mut Criterion) {
    for stem in ["planar_three_vertex", "torus_6x4"] {
        let s = surface(stem);
        c.bench_function(&format!("rigidity_matrix/{stem}"), |b| {
            b.iter(|| rigidity_matrix(black_box(&s), s.working_state()).unwrap())
        });
    }
}

fn jets(c: &mut Criterion) {
    let s = surface("planar_three_vertex");
    c.bench_function("constraint_jets/planar_three_vertex/k6", |b| {
        b.iter(|| ConstraintJets::new(black_box(&s), s.working_state(), 6).unwrap())
    });
    let cj = ConstraintJets::new(&s, s.working_state(), 6).unwrap();
    let jet = TrajectoryJet::new((1..=6).map(|i| DVector::from_element(cj.n_angles(), 1.0 / i as f64)).collect())
        .unwrap();
    c.bench_function("df_dt/planar_three_vertex/order6", |b| {
        b.iter(|| df_dt(black_box(&jet), &cj, 6).unwrap())
    });
}

fn classify(c: &mut Criterion) {
    let opts = AnalysisOptions::default();
    for stem in ["planar_three_vertex", "cone_degree4", "degree5_generic"] {
        let s = surface(stem);
        let cj = ConstraintJets::new(&s, s.working_state(), required_order(&opts)).unwrap();
        c.bench_function(&format!("classify/{stem}"), |b| b.iter(|| classify_jets(black_box(&cj), &opts).unwrap()));
    }
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = rigidity, jets, classify
}
criterion_main!(benches);
