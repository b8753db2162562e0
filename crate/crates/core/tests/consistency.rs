//! The ladder step against the generator formulas written term by term.

mod common;

use common::*;
use fock_sme::generators;
use fock_sme::hierarchy::BlockTriangle;
use fock_sme::integrator::{step_unconditional, Source, Stepper};
use fock_sme::linalg::{c, C64};
use fock_sme::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn normalized(b: &BlockTriangle, field: &FieldState) -> BlockTriangle {
    let mut out = b.clone();
    out.scale_mut(1.0 / b.weighted_trace(field));
    out
}

fn base_state(n: usize) -> (Scenario, HierarchyState, C64) {
    let sc = atom_scenario(FieldState::fock(n), Detection::counting(), -1.0, 0.0, 1e-3);
    let h = evolved_state(&sc, 600, 3);
    let xi = sc.packet.envelope(h.time);
    (sc, h, xi)
}

fn stepper(sc: &Scenario, det: Detection, dt: f64) -> Stepper {
    Stepper::new(&sc.system, &sc.field, &[], det, dt).unwrap()
}

#[test]
fn count_branch_matches_jump_update() {
    let (sc, h, xi) = base_state(2);
    let mut errs = vec![];
    for dt in [1e-3, 5e-4, 2.5e-4] {
        let mut s = stepper(&sc, Detection::counting(), dt);
        let mut k = h.clone();
        let out = s.step(&mut k, xi, Source::Replay(Outcome::Count(1))).unwrap();
        let reference = normalized(&generators::jump_update(&h, &sc.system, xi), &sc.field);
        errs.push(k.blocks.max_abs_difference(&reference));
        let p = generators::jump_probability(&h, &sc.system, xi, &sc.field, dt).unwrap();
        assert!((out.probability - p).abs() < 5.0 * dt * p, "{} vs {p}", out.probability);
    }
    eprintln!("count branch errors {errs:?}");
    for w in errs.windows(2) {
        let r = w[0] / w[1];
        assert!((1.6..2.5).contains(&r), "ratio {r}");
    }
}

#[test]
fn empty_branch_matches_no_jump_update() {
    let (sc, h, xi) = base_state(2);
    let mut errs = vec![];
    for dt in [1e-3, 5e-4, 2.5e-4] {
        let mut s = stepper(&sc, Detection::counting(), dt);
        let mut k = h.clone();
        s.step(&mut k, xi, Source::Replay(Outcome::Count(0))).unwrap();
        let euler = generators::no_jump_update(&h, &sc.system, xi, dt);
        errs.push(k.blocks.max_abs_difference(&normalized(&euler, &sc.field)));
    }
    eprintln!("no-count errors {errs:?}");
    for w in errs.windows(2) {
        let r = w[0] / w[1];
        assert!((3.2..5.0).contains(&r), "ratio {r}");
    }
}

#[test]
fn mean_step_matches_generator() {
    let (sc, h, _) = base_state(2);
    let mut errs = vec![];
    for dt in [1e-3, 5e-4, 2.5e-4] {
        let mut s = stepper(&sc, Detection::counting(), dt);
        let mut k = h.clone();
        s.mean_step(&mut k, sc.packet.envelope(h.time)).unwrap();
        let rk = step_unconditional(&h, &sc.system, &sc.packet, &sc.field, &[], dt).unwrap();
        errs.push(k.blocks.max_abs_difference(&rk.blocks));
    }
    eprintln!("mean-step errors {errs:?}");
    for w in errs.windows(2) {
        let r = w[0] / w[1];
        assert!((3.2..5.0).contains(&r), "ratio {r}");
    }
}

#[test]
fn homodyne_response_matches_conditioning_map() {
    let (sc, h, xi) = base_state(1);
    let phase = 0.3;
    let det = Detection::homodyne(phase);
    let hmap = generators::homodyne_map(&h, &sc.system, xi, phase, &sc.field).unwrap();
    let mut errs = vec![];
    for dt in [1e-3, 5e-4, 2.5e-4] {
        let s = stepper(&sc, det, dt);
        let k = s.currents(&h, xi).unwrap()[0];
        let kk = generators::expected_current(&h, &sc.system, xi, phase, &sc.field).unwrap();
        assert!((k - kk).abs() < 1e-14);
        // Derivative of the conditioned state with respect to the increment.
        let eps = 1e-3 * dt.sqrt();
        let run = |dj: f64| {
            let mut s = stepper(&sc, det, dt);
            let mut x = h.clone();
            s.step(&mut x, xi, Source::Replay(Outcome::Current(k * dt + dj))).unwrap();
            x.blocks
        };
        let mut diff = run(eps);
        diff.add_scaled(&run(-eps), -1.0);
        diff.scale_mut(1.0 / (2.0 * eps));
        errs.push(diff.max_abs_difference(&hmap));
    }
    eprintln!("homodyne response errors {errs:?}");
    for w in errs.windows(2) {
        let r = w[0] / w[1];
        assert!((1.6..2.5).contains(&r), "ratio {r}");
    }
}

#[test]
fn counting_probability_matches_on_random_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let sys = random_system(&mut rng, 3);
        let rho0 = random_density(&mut rng, 3);
        let field = FieldState::fock(2);
        let h = fock_sme::hierarchy::init_hierarchy(&rho0, 2).unwrap();
        let xi = c(0.4, -0.2);
        let dt = 1e-5;
        let mut s = Stepper::new(&sys, &field, &[], Detection::counting(), dt).unwrap();
        let mut k = h.clone();
        let out = s.step(&mut k, xi, Source::Replay(Outcome::Count(1))).unwrap();
        let p = generators::jump_probability(&h, &sys, xi, &field, dt).unwrap();
        assert!(((out.probability - p) / p).abs() < 1e-3, "{} vs {p}", out.probability);
    }
}

#[test]
fn zero_efficiency_counting_is_the_mean_map() {
    let (sc, h, xi) = base_state(2);
    let dt = 1e-3;
    let mut s = stepper(&sc, Detection::counting().with_efficiency(0.0), dt);
    let mut a = h.clone();
    let out = s.step(&mut a, xi, Source::Replay(Outcome::Count(0))).unwrap();
    assert_eq!(out.probability, 1.0);
    let mut m = stepper(&sc, Detection::counting(), dt);
    let mut b = h.clone();
    m.mean_step(&mut b, xi).unwrap();
    assert!(a.blocks.max_abs_difference(&b.blocks) < 1e-14);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let mut x = h.clone();
        let o = s.step(&mut x, xi, Source::Sample(&mut rng)).unwrap();
        assert_eq!(o.outcome, Outcome::Count(0));
    }
}

#[test]
fn vacuum_field_reduces_to_lindblad() {
    let sc = atom_scenario(FieldState::vacuum(), Detection::counting(), 0.0, 1.0, 1e-3);
    let mut sc = sc;
    sc.initial_state = excited_state();
    let states = fock_sme::integrator::solve_master_equation(&sc).unwrap();
    for (k, h) in states.iter().enumerate().step_by(100) {
        let pe = fock_sme::observables::expectation(h, &sc.field, &excited_state()).unwrap();
        assert!((pe - (-sc.grid.time(k)).exp()).abs() < 1e-10);
    }
}
