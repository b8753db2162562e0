#![allow(dead_code)]

use fock_sme::linalg::{self, c, CMat, C64};
use fock_sme::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_matrix(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> CMat {
    CMat::from_fn(d, d, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * scale)
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> CMat {
    linalg::hermitian_part(&random_matrix(rng, d, scale))
}

pub fn random_unitary(rng: &mut ChaCha8Rng, d: usize) -> CMat {
    random_matrix(rng, d, 1.0).qr().q()
}

pub fn random_density(rng: &mut ChaCha8Rng, d: usize) -> CMat {
    let a = random_matrix(rng, d, 1.0);
    let r = &a * a.adjoint();
    let t = linalg::trace(&r);
    r / t
}

pub fn random_system(rng: &mut ChaCha8Rng, d: usize) -> SystemOperators {
    SystemOperators::new(
        random_unitary(rng, d),
        random_matrix(rng, d, 1.2),
        random_hermitian(rng, d, 1.0),
    )
    .unwrap()
}

pub fn atom_scenario(field: FieldState, detection: Detection, t0: f64, t1: f64, dt: f64) -> Scenario {
    Scenario {
        system: two_level_atom(1.0, 0.0).unwrap(),
        initial_state: ground_state(),
        packet: make_gaussian_wavepacket(1.0, 0.0).unwrap(),
        field,
        baths: vec![],
        detection,
        grid: TimeGrid::new(t0, t1, dt).unwrap(),
    }
}

pub fn xi_value(re: f64, im: f64) -> C64 {
    c(re, im)
}

/// Hierarchy state reached by a short seeded counting run, useful as a
/// generic nontrivial ladder.
pub fn evolved_state(scenario: &Scenario, steps: usize, seed: u64) -> HierarchyState {
    let mut s = scenario.clone();
    s.grid = TimeGrid { steps, ..s.grid };
    run_trajectory(&s, Drive::Seed(seed)).unwrap().states.pop().unwrap()
}
