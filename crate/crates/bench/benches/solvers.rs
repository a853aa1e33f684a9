use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use hlab_core::conjugacy::{anosov_base_conjugacy, leaf_conjugacy_center, leaf_conjugacy_stable, AmalgamSpec};
use hlab_core::estimation::{fit_holder, sample_map, SamplingPlan};
use hlab_core::foliations::{holonomy_map, strong_offset, LeafSide, StrongFoliation};
use hlab_core::phasespace::{wrap, TorusPoint, Transversal};
use hlab_core::sections::{graph_transform_step, solve_invariant_section, AffineShearContraction, ConstantSection};
use hlab_core::systems::{FiberShape, CAT};
use hlab_core::SystemSpec;

fn foliations(c: &mut Criterion) {
    let g = SystemSpec::perturbed_cat(0.01).unwrap();
    let p = wrap(&[0.3, 0.7]).unwrap();
    c.bench_function("strong_offset", |b| b.iter(|| strong_offset(&g, black_box(&p), LeafSide::U, 0.05).unwrap()));

    let model = StrongFoliation::new(g, LeafSide::U, 0.1).unwrap();
    let source = Transversal::new(TorusPoint::origin(2).unwrap(), &[0.0, 1.0], 0.1).unwrap();
    let target = Transversal::new(wrap(&[0.5, 0.309_016_994_374_947_4]).unwrap(), &[0.0, 1.0], 0.2).unwrap();
    let slope = (5f64.sqrt() - 1.0) / 2.0;
    let path: Vec<TorusPoint> = [0.0, 0.25, 0.5].iter().map(|&x| wrap(&[x, slope * x]).unwrap()).collect();
    let x = wrap(&[0.0, 0.03]).unwrap();
    c.bench_function("holonomy_map", |b| {
        b.iter(|| holonomy_map(&model, &source, &target, &path, black_box(&x)).unwrap())
    });
}

fn sections(c: &mut Criterion) {
    let fc = AffineShearContraction::lacunary();
    c.bench_function("graph_transform_step_4096", |b| {
        b.iter(|| graph_transform_step(&fc, &ConstantSection(0.0), black_box(4096)).unwrap())
    });
    let sec = solve_invariant_section(&fc, &ConstantSection(0.0), 1 << 12, 1e-8, 100).unwrap();
    let plan =
        SamplingPlan { window: (-1.0, 1.0), n_pairs: 400, scale_min: 1e-6, scale_max: 1e-3, seed: 7, anchor: None };
    let samples = sample_map(|x| sec.exact_at(x), |a: &f64, b: &f64| (a - b).abs(), &plan).unwrap();
    c.bench_function("fit_holder_400", |b| b.iter(|| fit_holder(black_box(&samples)).unwrap()));
}

fn conjugacies(c: &mut Criterion) {
    let f = SystemSpec::skew(0.05, FiberShape::SinB1).unwrap();
    let g = SystemSpec::perturbed_skew(0.01, 0.05, FiberShape::SinB1).unwrap();
    let p = TorusPoint::new(&[0.7, 0.25, 0.4]).unwrap();
    c.bench_function("leaf_conjugacy_center", |b| {
        b.iter(|| leaf_conjugacy_center(&f, &g, black_box(&p), 0.1, 1e-6).unwrap())
    });

    let base = SystemSpec::perturbed_cat(0.01).unwrap();
    let spec = AmalgamSpec::standard(base, 0.1).unwrap();
    let x = wrap(&[0.2, 0.6]).unwrap();
    c.bench_function("leaf_conjugacy_stable", |b| {
        b.iter(|| leaf_conjugacy_stable(&spec, black_box(&x), 30, 1e-7).unwrap())
    });

    let mut group = c.benchmark_group("base_conjugacy");
    group.sample_size(10);
    group.bench_function("lattice_32", |b| b.iter(|| anosov_base_conjugacy(CAT, &base, black_box(32), 1e-12).unwrap()));
    group.finish();
}

criterion_group!(benches, foliations, sections, conjugacies);
criterion_main!(benches);
