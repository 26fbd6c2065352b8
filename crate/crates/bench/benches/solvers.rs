use std::hint::black_box;

use conspde::conservative::build_totally_conservative;
use conspde::degenerate::solve_interior;
use conspde::mc_oracle::InitialLaw;
use conspde::sturm_liouville::eigensolve;
use conspde::{simulate, CoefficientField, DegenerateModel, Grid, SdeSpec};
use criterion::{criterion_group, criterion_main, Criterion};

fn spectrum(c: &mut Criterion) {
    let one = CoefficientField::constant(1.0);
    for n in [101, 401] {
        let grid = Grid::unit(n).unwrap();
        let op = build_totally_conservative(
            &one,
            &CoefficientField::zero(),
            &one,
            &CoefficientField::identity(),
            &grid,
        )
        .unwrap()
        .operator()
        .unwrap();
        c.bench_function(&format!("eigensolve_heat_n{n}_k6"), |b| {
            b.iter(|| eigensolve(black_box(&op), 6).unwrap())
        });
    }
}

fn interior(c: &mut Criterion) {
    let model = DegenerateModel::kimura(CoefficientField::from_expression("1-2*x").unwrap()).unwrap();
    let grid = Grid::unit(201).unwrap();
    let r0 = vec![1.0; grid.len()];
    c.bench_function("solve_interior_n201_t1", |b| {
        b.iter(|| solve_interior(&model, black_box(&r0), 1.0, &[0.5, 1.0], &grid).unwrap())
    });
}

fn oracle(c: &mut Criterion) {
    let spec =
        SdeSpec::for_model(&DegenerateModel::neutral(), InitialLaw::Point(0.3), 0.1, 1000, 1).with_dt(1e-3);
    c.bench_function("simulate_1000_paths_100_steps", |b| {
        b.iter(|| simulate(black_box(&spec), &[0.1]).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = spectrum, interior, oracle
}
criterion_main!(benches);
