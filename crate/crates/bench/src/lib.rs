//! Seeded fixtures shared by the kernel benchmarks.

use maten_core::channels::{random_channel, random_local_chi, Channel, NoiseSite, NoiseSpec};
use maten_core::maten::{generate_settings, noisy_expectations, ExpectationTable, SamplingMode, Shots};
use maten_core::{ChiMatrix, ParamSetting, QuboProblem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn global_channel(n_qubits: usize, seed: u64) -> ChiMatrix {
    random_channel(n_qubits, &mut rng(seed)).expect("supported register size")
}

pub fn local_channels(n_qubits: usize, seed: u64) -> Vec<ChiMatrix> {
    let mut r = rng(seed);
    (0..n_qubits).map(|_| random_local_chi(&mut r).chi).collect()
}

pub fn local_noise(chis: &[ChiMatrix]) -> NoiseSpec {
    NoiseSpec::EndOfCircuit(
        chis.iter()
            .enumerate()
            .map(|(q, chi)| NoiseSite::new(Channel::Chi(chi.clone()), vec![q]).expect("one-qubit site"))
            .collect(),
    )
}

pub fn settings(count: usize, seed: u64) -> Vec<ParamSetting> {
    generate_settings(count, seed, (0.0, std::f64::consts::TAU), (0.0, std::f64::consts::PI))
        .expect("valid ranges")
        .settings
}

/// Problem, settings and exact noisy data for a characterization run.
pub fn characterization_input(n_qubits: usize, n_settings: usize) -> (QuboProblem, Vec<ParamSetting>, ExpectationTable) {
    let problem = QuboProblem::line(n_qubits, 1.0, 1.0).expect("valid line");
    let s = settings(n_settings, 3);
    let noise = local_noise(&local_channels(n_qubits, 4));
    let table = noisy_expectations(&problem, &s, &noise, Shots::Exact, SamplingMode::Multinomial, 0)
        .expect("simulation succeeds");
    (problem, s, table)
}
