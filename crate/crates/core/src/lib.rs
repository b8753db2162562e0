//! Quantum trajectories for finite-dimensional systems driven by a propagating
//! field in a superposition or mixture of Fock states of one temporal mode.
//!
//! The system state is carried by a ladder of operators `ρ_{m,n}` indexed by
//! photon numbers of the input mode; the physical state is
//! `ρ_sys = Σ c_{m,n} ρ_{m,n}` for the field coefficients `c`.
//!
//! ```
//! use fock_sme::prelude::*;
//!
//! let sys = two_level_atom(1.0, 0.0).unwrap();
//! let packet = make_gaussian_wavepacket(1.0, 0.0).unwrap();
//! let scenario = Scenario {
//!     system: sys,
//!     initial_state: ground_state(),
//!     packet,
//!     field: FieldState::fock(1),
//!     baths: vec![],
//!     detection: Detection::counting(),
//!     grid: TimeGrid::new(-4.0, 12.0, 1e-3).unwrap(),
//! };
//! let run = run_trajectory(&scenario, Drive::Seed(7)).unwrap();
//! assert_eq!(run.record.total_counts(), 1);
//! ```

pub mod ensemble;
pub mod error;
pub mod generators;
pub mod heisenberg;
pub mod hierarchy;
pub mod integrator;
pub mod ladder;
pub mod linalg;
pub mod observables;
pub mod record;
pub mod system;

pub mod prelude {
    pub use crate::ensemble::{run_ensemble, EnsembleSummary};
    pub use crate::error::{Error, Result};
    pub use crate::hierarchy::{init_hierarchy, reduced_state, HierarchyState};
    pub use crate::integrator::{
        run_trajectory, run_trajectory_opts, solve_master_equation, Drive, RunOptions, Scenario,
        StepOutcome, Stepper,
    };
    pub use crate::linalg::{CMat, C64};
    pub use crate::observables::Observable;
    pub use crate::record::{Detection, Outcome, OutcomeMode, Scheme, TrajectoryRecord};
    pub use crate::system::{
        coherent_coefficients, excited_state, ground_state, make_gaussian_wavepacket,
        two_level_atom, BathChannel, FieldState, SystemOperators, TimeGrid, WavePacket,
    };
}
