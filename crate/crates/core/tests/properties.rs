//! Randomized invariants of the stochastic update and the text formats.

mod common;

use common::*;
use fock_sme::hierarchy::{init_hierarchy, parse_snapshot};
use fock_sme::integrator::{Source, Stepper};
use fock_sme::linalg::{self, C64};
use fock_sme::prelude::*;
use fock_sme::record::parse_record;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn detection(code: u8, phase: f64, eta: f64) -> Detection {
    let base = match code % 5 {
        0 => Detection::counting(),
        1 => Detection::homodyne(phase),
        2 => Detection::homodyne(phase).with_mode(OutcomeMode::Binary),
        3 => Detection::heterodyne(),
        _ => Detection::heterodyne().with_mode(OutcomeMode::Binary),
    };
    base.with_efficiency(eta)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn accepted_steps_keep_the_ladder_physical(
        seed in any::<u64>(),
        d in 2usize..4,
        n in 0usize..4,
        code in 0u8..5,
        phase in 0.0f64..6.3,
        eta in 0.0f64..=1.0,
        amp in 0.0f64..1.5,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = random_system(&mut rng, d);
        let rho0 = random_density(&mut rng, d);
        // A generic mixed field over 0..=n photons.
        let field = FieldState::from_coeffs(random_density(&mut rng, n + 1)).unwrap();
        let det = detection(code, phase, eta);
        let dt = 1e-3;
        let mut s = Stepper::new(&sys, &field, &[], det, dt).unwrap();
        let mut h = init_hierarchy(&rho0, n).unwrap();
        for k in 0..60 {
            let xi = C64::from_polar(amp * (1.0 - k as f64 / 60.0), 0.3 * k as f64);
            s.step(&mut h, xi, Source::Sample(&mut rng)).unwrap();
            prop_assert!((h.weighted_trace(&field) - 1.0).abs() < 1e-8);
            for m in 0..=n {
                let b = h.block(m as isize, m as isize);
                prop_assert!(linalg::is_hermitian(&b, 1e-10));
                for j in 0..=n {
                    let pair = h.block(m as isize, j as isize).adjoint() - h.block(j as isize, m as isize);
                    prop_assert!(linalg::max_abs(&pair) < 1e-10);
                }
            }
            let rho = h.reduced_state(&field).unwrap();
            prop_assert!(linalg::min_eigenvalue(&rho) >= -1e-8);
        }
    }

    #[test]
    fn snapshots_round_trip(seed in any::<u64>(), d in 1usize..4, n in 0usize..3, t in -10.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = init_hierarchy(&random_density(&mut rng, d), n).unwrap().at_time(t);
        for b in h.blocks.blocks_mut() {
            *b += random_matrix(&mut rng, d, 0.1);
        }
        let back = parse_snapshot(&h.to_snapshot()).unwrap();
        prop_assert_eq!(back, h);
    }

    #[test]
    fn records_round_trip(seed in any::<u64>(), code in 0u8..5, len in 0usize..50) {
        let sc = atom_scenario(FieldState::fock(1), detection(code, 0.4, 1.0), -1.0, 1.0, 2e-3);
        let run = run_trajectory(&sc, Drive::Seed(seed)).unwrap();
        let mut rec = run.record.clone();
        rec.entries.truncate(len);
        prop_assert_eq!(parse_record(&rec.to_text()).unwrap(), rec);
    }

    #[test]
    fn garbage_never_panics_the_parsers(text in "\\PC{0,200}") {
        let _ = parse_record(&text);
        let _ = parse_snapshot(&text);
    }
}
