use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use kerrfit::model::{forward_trace, BranchRule};
use kerrfit::physics::{digamma, lk_bcs, gap_energy};
use kerrfit::{solve_photon_cubic, BaselineEnv};
use kerrfit_bench::{device_803_500, sweep_grid, DIRECTION};
use num_complex::Complex64;

fn cubic(c: &mut Criterion) {
    c.bench_function("photon cubic, bistable point", |b| b.iter(|| solve_photon_cubic(black_box(-2.0), black_box(-1.0))));
    c.bench_function("photon cubic, 401x201 grid", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for i in 0..401 {
                let delta = -10.0 + 0.05 * i as f64;
                for j in 0..201 {
                    acc += solve_photon_cubic(delta, -2.0 + 0.02 * j as f64).n();
                }
            }
            acc
        })
    });
}

fn traces(c: &mut Criterion) {
    let p = device_803_500();
    let grid = sweep_grid(&p, 2001, 6.0);
    let env = BaselineEnv::identity();
    for (name, power) in [("forward trace, linear", 1e-18), ("forward trace, strong drive", 1e-15)] {
        c.bench_function(name, |b| {
            b.iter(|| forward_trace(&p, &env, black_box(&grid), power, DIRECTION, BranchRule::Continuation).unwrap())
        });
    }
}

fn special_functions(c: &mut Criterion) {
    c.bench_function("complex digamma", |b| b.iter(|| digamma(black_box(Complex64::new(0.5, 3.7))).unwrap()));
    c.bench_function("BCS kinetic inductance", |b| b.iter(|| lk_bcs(black_box(518.0), gap_energy(4.2), 1.0).unwrap()));
}

criterion_group!(benches, cubic, traces, special_functions);
criterion_main!(benches);
