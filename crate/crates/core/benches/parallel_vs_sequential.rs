use std::hint::black_box;

use chowkit::bracket_closure::{closure, FieldFamily};
use chowkit::convex::ConvexBody;
use chowkit::flows::{apply_word, CircleDiffeo, FlowStep, FlowWord};
use chowkit::par;
use chowkit::trig_fields::TrigPoly;
use criterion::{criterion_group, criterion_main, Criterion};

fn word() -> FlowWord {
    let c2 = TrigPoly::cos_mode(2);
    let s1 = TrigPoly::sin_mode(1);
    FlowWord::new(vec![
        FlowStep::new(s1.clone(), 0.6),
        FlowStep::new(c2.clone(), -0.4),
        FlowStep::new(s1.bracket(&c2), 0.3),
        FlowStep::new(TrigPoly::cos_mode(1), 0.5),
    ])
}

/// Runs `f` on the default pool and on a single worker.
fn both<R: Send>(c: &mut Criterion, group: &str, f: impl Fn() -> R + Sync + Send + Copy) {
    let mut g = c.benchmark_group(group);
    g.sample_size(20);
    g.bench_function("parallel", |b| b.iter(|| black_box(f())));
    g.bench_function("sequential", |b| b.iter(|| par::single_threaded(|| black_box(f()))));
    g.finish();
}

fn benches(c: &mut Criterion) {
    let w = word();
    let phi = CircleDiffeo::identity(256);
    both(c, "apply_word_256", || apply_word(&w, &phi).unwrap());

    let fam = FieldFamily::low_mode_generators();
    both(c, "closure_depth6_cap8", || closure(&fam, 6, 8).unwrap().rank);

    let mut hs: Vec<Vec<f64>> = ConvexBody::cross_polytope(4).halfspaces().to_vec();
    hs.extend((0..4).map(|i| (0..4).map(|j| if i == j { 0.8 } else { 0.1 }).collect::<Vec<f64>>()));
    both(c, "vertices_dim4", || ConvexBody::new(4, hs.clone()).unwrap().vertices().len());
}

criterion_group!(parallel_vs_sequential, benches);
criterion_main!(parallel_vs_sequential);
