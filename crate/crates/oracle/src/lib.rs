//! Brute-force reference for the Fock-state trajectory equations.
//!
//! The field is cut into time bins holding at most one photon each. The input
//! Fock state is written over the bins, each bin is coupled to the system by
//! one unitary and then measured and discarded. The conditional system states
//! produced this way are what the ladder equations must reproduce as the bins
//! shrink.

pub mod binned;
pub mod report;
pub mod run;
pub mod unitary;

pub use binned::{build_binned_fock, build_binned_fock_with, BinnedField, BinnedFock};
pub use report::{compare_unmeasured, compare_with_hierarchy, Comparison, ComparisonRow};
pub use run::{oracle_run, oracle_unmeasured, JointState, OracleOptions, OracleRun, OracleSetup};
pub use unitary::{bin_unitary, bin_unitary_with, first_order_unitary};
