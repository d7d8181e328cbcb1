use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use maten_bench::{characterization_input, global_channel, local_channels, local_noise, rng, settings};
use maten_core::channels::{choi_from_chi, maten_of, random_local_chi, Channel, NoiseSpec};
use maten_core::dualmap::dual_apply;
use maten_core::maten::characterize;
use maten_core::metrics::{choi_fidelity, minimize_ma_fidelity};
use maten_core::qsim::{build_qaoa_state, evolve_noisy_batch};
use maten_core::{ParamSetting, QuboProblem};
use std::hint::black_box;

fn simulation(c: &mut Criterion) {
    let problem = QuboProblem::complete(6, 1.0, 1.0).unwrap();
    c.bench_function("qaoa_state_n6", |b| b.iter(|| build_qaoa_state(&problem, black_box(ParamSetting::new(0.4, 1.2)))));

    let s = settings(50, 1);
    let noise = local_noise(&local_channels(6, 2));
    c.bench_function("noisy_batch_n6_local_50", |b| b.iter(|| evolve_noisy_batch(&problem, &s, &noise).unwrap()));

    let p4 = QuboProblem::complete(4, 1.0, 1.0).unwrap();
    let global = NoiseSpec::global(Channel::Chi(global_channel(4, 3)));
    c.bench_function("noisy_batch_n4_global_50", |b| b.iter(|| evolve_noisy_batch(&p4, &s, &global).unwrap()));
}

fn channels(c: &mut Criterion) {
    c.bench_function("random_local_chi", |b| {
        let mut r = rng(5);
        b.iter(|| random_local_chi(&mut r))
    });
    let chi = global_channel(4, 6);
    c.bench_function("choi_from_chi_n4", |b| b.iter(|| choi_from_chi(black_box(&chi))));
    c.bench_function("to_kraus_n4", |b| b.iter(|| Channel::Chi(chi.clone()).to_kraus().unwrap()));

    let ch = Channel::Chi(chi.clone());
    let ma = maten_of(&chi).unwrap();
    c.bench_function("choi_fidelity_n4", |b| b.iter(|| choi_fidelity(&ch, &ma).unwrap()));

    let small = Channel::Chi(global_channel(2, 7));
    let h = QuboProblem::complete(2, 1.0, 1.0).unwrap().hamiltonian();
    c.bench_function("dual_apply_n2", |b| b.iter(|| dual_apply(&small, black_box(&h)).unwrap()));
}

fn estimation(c: &mut Criterion) {
    let (problem, s, table) = characterization_input(6, 100);
    c.bench_function("characterize_n6_100", |b| b.iter(|| characterize(&problem, &s, &table, None, true).unwrap()));
    let mut group = c.benchmark_group("lower_bound");
    group.sample_size(10);
    group.bench_function("n2_single_point", |b| {
        b.iter_batched(|| vec![0.8], |grid| minimize_ma_fidelity(2, &grid, 8, 1).unwrap(), BatchSize::SmallInput)
    });
    group.finish();
}

criterion_group!(benches, simulation, channels, estimation);
criterion_main!(benches);
