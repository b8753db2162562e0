//! Command-line front end for fock-sme: scenario files, simulation
//! commands and validation suites.

pub mod commands;
pub mod fuzz_checks;
pub mod scenario;
pub mod validate;
