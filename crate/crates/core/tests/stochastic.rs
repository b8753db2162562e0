//! Sampling, replay and ensemble behaviour.

mod common;

use common::*;
use fock_sme::ensemble::run_ensemble;
use fock_sme::integrator::{run_trajectory_with, RunOptions};
use fock_sme::observables::Observable;
use fock_sme::prelude::*;

fn fock_counting(n: usize, eta: f64) -> Scenario {
    atom_scenario(FieldState::fock(n), Detection::counting().with_efficiency(eta), -4.0, 12.0, 2e-3)
}

fn counts(sc: &Scenario, seed: u64) -> usize {
    let samples = sc.samples();
    run_trajectory_with(sc, Drive::Seed(seed), &samples, RunOptions::default(), |_| Ok(()))
        .unwrap()
        .total_counts()
}

#[test]
fn every_trajectory_counts_every_photon() {
    for n in [1, 2, 4] {
        let sc = fock_counting(n, 1.0);
        for seed in 0..10 {
            assert_eq!(counts(&sc, seed), n, "N={n} seed {seed}");
        }
    }
}

#[test]
fn vacuum_input_from_ground_state_never_counts() {
    let sc = fock_counting(0, 1.0);
    assert_eq!(counts(&sc, 5), 0);
}

#[test]
fn lossy_detection_counts_binomially() {
    let (n, eta, trials) = (2usize, 0.4, 300u64);
    let sc = fock_counting(n, eta);
    let mut hist = [0usize; 3];
    for seed in 0..trials {
        let k = counts(&sc, 1000 + seed);
        assert!(k <= n);
        hist[k] += 1;
    }
    // Pearson χ² against Binomial(2, η); 2 degrees of freedom, 0.1% level 13.8.
    let expected = [(1.0 - eta).powi(2), 2.0 * eta * (1.0 - eta), eta * eta];
    let chi2: f64 = hist
        .iter()
        .zip(expected)
        .map(|(&o, p)| {
            let e = p * trials as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    assert!(chi2 < 13.8, "histogram {hist:?}, χ² {chi2}");
}

fn innovations(det: Detection, seeds: std::ops::Range<u64>) -> Vec<[f64; 2]> {
    let sc = atom_scenario(FieldState::fock(1), det, -3.0, 4.0, 2e-3);
    let samples = sc.samples();
    let mut out = vec![];
    for seed in seeds {
        run_trajectory_with(&sc, Drive::Seed(seed), &samples, RunOptions::default(), |v| {
            if let Some(o) = v.outcome {
                out.push(o.innovation);
            }
            Ok(())
        })
        .unwrap();
    }
    out
}

fn moments(xs: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let v: Vec<f64> = xs.collect();
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var, n)
}

#[test]
fn homodyne_innovations_are_wiener_increments() {
    let dt = 2e-3;
    let inn = innovations(Detection::homodyne(0.0), 0..4);
    let (mean, var, n) = moments(inn.iter().map(|x| x[0]));
    assert!(n >= 10_000);
    assert!(mean.abs() < 3.0 * (var / n as f64).sqrt(), "mean {mean}");
    assert!((0.95..=1.05).contains(&(var / dt)), "var/dt {}", var / dt);
}

#[test]
fn heterodyne_innovations_are_wiener_increments() {
    let dt = 2e-3;
    let inn = innovations(Detection::heterodyne(), 4..8);
    for ch in 0..2 {
        let (mean, var, n) = moments(inn.iter().map(|x| x[ch]));
        assert!(mean.abs() < 3.0 * (var / n as f64).sqrt());
        assert!((0.95..=1.05).contains(&(var / dt)), "channel {ch}: var/dt {}", var / dt);
    }
}

#[test]
fn binary_and_counting_innovations_have_zero_mean() {
    for det in [
        Detection::counting(),
        Detection::homodyne(0.4).with_mode(OutcomeMode::Binary),
        Detection::heterodyne().with_mode(OutcomeMode::Binary),
    ] {
        let inn = innovations(det, 20..24);
        for ch in 0..2 {
            let (mean, var, n) = moments(inn.iter().map(|x| x[ch]));
            if var > 0.0 {
                assert!(mean.abs() < 3.0 * (var / n as f64).sqrt(), "{det:?} ch {ch}: {mean}");
            }
        }
    }
}

#[test]
fn same_seed_same_trajectory_and_replay_is_exact() {
    for det in [
        Detection::counting(),
        Detection::homodyne(0.2),
        Detection::homodyne(0.2).with_mode(OutcomeMode::Binary),
        Detection::heterodyne(),
        Detection::heterodyne().with_mode(OutcomeMode::Binary),
        Detection::counting().with_efficiency(0.7),
        Detection::homodyne(1.0).with_efficiency(0.5),
    ] {
        let sc = atom_scenario(FieldState::fock(2), det, -3.0, 3.0, 2e-3);
        let a = run_trajectory(&sc, Drive::Seed(42)).unwrap();
        let b = run_trajectory(&sc, Drive::Seed(42)).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.record, b.record);
        let text = a.record.to_text();
        let parsed = TrajectoryRecord::parse(&text).unwrap();
        assert_eq!(parsed, a.record);
        let r = run_trajectory(&sc, Drive::Record(&parsed)).unwrap();
        assert_eq!(r.states, a.states, "{det:?}");
        assert_eq!(r.record, a.record);
    }
}

#[test]
fn different_seeds_differ() {
    let sc = atom_scenario(FieldState::fock(1), Detection::homodyne(0.0), -2.0, 2.0, 2e-3);
    let a = run_trajectory(&sc, Drive::Seed(1)).unwrap();
    let b = run_trajectory(&sc, Drive::Seed(2)).unwrap();
    assert_ne!(a.record, b.record);
}

#[test]
fn impossible_count_is_an_infeasible_record() {
    let sc = atom_scenario(FieldState::vacuum(), Detection::counting(), 0.0, 0.1, 1e-3);
    let mut rec = TrajectoryRecord::new(Detection::counting(), 1e-3, 0.0, None);
    rec.entries = vec![Outcome::Count(0); 100];
    rec.entries[10] = Outcome::Count(1);
    let err = run_trajectory(&sc, Drive::Record(&rec)).unwrap_err();
    assert!(matches!(err, Error::InfeasibleRecord { step: 10, .. }), "{err:?}");
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn short_or_mismatched_records_are_rejected() {
    let sc = atom_scenario(FieldState::fock(1), Detection::counting(), 0.0, 0.1, 1e-3);
    let mut rec = TrajectoryRecord::new(Detection::counting(), 1e-3, 0.0, None);
    rec.entries = vec![Outcome::Count(0); 50];
    assert!(matches!(run_trajectory(&sc, Drive::Record(&rec)), Err(Error::RecordExhausted(50))));
    let hom = TrajectoryRecord::new(Detection::homodyne(0.0), 1e-3, 0.0, None);
    assert_eq!(run_trajectory(&sc, Drive::Record(&hom)).unwrap_err().exit_code(), 2);
}

#[test]
fn coarse_steps_are_refused() {
    let sc = atom_scenario(FieldState::fock(4), Detection::counting(), -4.0, 4.0, 0.05);
    let err = run_trajectory(&sc, Drive::Seed(0)).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let relaxed = RunOptions { relaxed_step_bound: true };
    assert!(fock_sme::integrator::run_trajectory_opts(&sc, Drive::Seed(0), relaxed).is_ok());
}

#[test]
fn ensemble_is_independent_of_worker_count() {
    let sc = atom_scenario(FieldState::fock(1), Detection::counting(), -3.0, 5.0, 4e-3);
    let obs = [Observable::ExcitedPopulation, Observable::CumulativeCounts];
    let one = run_ensemble(&sc, &obs, 70, 9, 1, 10, RunOptions::default()).unwrap();
    let four = run_ensemble(&sc, &obs, 70, 9, 4, 10, RunOptions::default()).unwrap();
    assert_eq!(one, four);
    let single = run_ensemble(&sc, &obs, 1, 9, 1, 1, RunOptions::default()).unwrap();
    let traj = run_trajectory(&sc, Drive::Seed(9)).unwrap();
    let k = traj.states.len() - 1;
    assert_eq!(single.mean[1][k], traj.record.total_counts() as f64);
    let pe = fock_sme::observables::expectation(&traj.states[k], &sc.field, &excited_state()).unwrap();
    assert_eq!(single.mean[0][k], pe);
}
