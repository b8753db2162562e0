//! Oracle against hierarchy comparisons and their text report.

use std::fmt::Write as _;

use fock_sme::error::{Error, Result};
use fock_sme::integrator::{run_trajectory_opts, solve_master_equation, Drive, RunOptions, Scenario};
use fock_sme::linalg::{self, c, CMat};
use fock_sme::record::TrajectoryRecord;
use fock_sme::system::{FieldState, TimeGrid};

use crate::binned::BinnedField;
use crate::run::{oracle_run, oracle_unmeasured, OracleOptions, OracleSetup};

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub bin: usize,
    pub time: f64,
    pub trace_distance: f64,
    pub oracle_probability: f64,
    pub hierarchy_probability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub bins: usize,
    pub bin_width: f64,
    pub dropped_weight: f64,
    pub occupation_load: f64,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn worst_trace_distance(&self) -> f64 {
        self.rows.iter().map(|r| r.trace_distance).fold(0.0, f64::max)
    }

    pub fn worst_probability_gap(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.oracle_probability - r.hierarchy_probability).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "bins {}", self.bins);
        let _ = writeln!(s, "bin_width {:.16e}", self.bin_width);
        let _ = writeln!(s, "dropped_weight {:.6e}", self.dropped_weight);
        let _ = writeln!(s, "occupation_load {:.6e}", self.occupation_load);
        let _ = writeln!(s, "worst_trace_distance {:.6e}", self.worst_trace_distance());
        let _ = writeln!(s, "worst_probability_gap {:.6e}", self.worst_probability_gap());
        let _ = writeln!(s, "bin,time,trace_distance,oracle_probability,hierarchy_probability");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.bin, r.time, r.trace_distance, r.oracle_probability, r.hierarchy_probability
            );
        }
        s
    }
}

/// Photon number of a Fock field, or an error for anything else.
pub fn fock_photons(field: &FieldState) -> Result<usize> {
    let n = field.max_photons();
    let c = field.coeffs();
    let pure = (0..=n).all(|i| (0..=n).all(|j| {
        let want = if i == n && j == n { 1.0 } else { 0.0 };
        (c[(i, j)] - fock_sme::linalg::c(want, 0.0)).norm() < 1e-12
    }));
    if pure {
        Ok(n)
    } else {
        Err(Error::Parameter("the bin oracle takes Fock-state inputs only".into()))
    }
}

fn binned(scenario: &Scenario) -> BinnedField {
    BinnedField::from_samples(&scenario.samples())
}

/// Replays `record` through the oracle and through the hierarchy on the
/// scenario grid (one bin per step).
pub fn compare_with_hierarchy(
    scenario: &Scenario,
    record: &TrajectoryRecord,
    options: &OracleOptions,
) -> Result<Comparison> {
    let photons = fock_photons(&scenario.field)?;
    let field = binned(scenario);
    let setup = OracleSetup {
        system: &scenario.system,
        initial_state: &scenario.initial_state,
        field: &field,
        photons,
    };
    let oracle = oracle_run(&setup, record, options)?;
    let relaxed = RunOptions { relaxed_step_bound: true };
    let traj = run_trajectory_opts(scenario, Drive::Record(record), relaxed)?;
    let mut rows = Vec::with_capacity(field.bin_count());
    for k in 0..field.bin_count() {
        let rho = traj.states[k + 1].reduced_state(&scenario.field)?;
        rows.push(ComparisonRow {
            bin: k,
            time: scenario.grid.time(k + 1),
            trace_distance: linalg::trace_distance(&oracle.states[k + 1], &rho),
            oracle_probability: oracle.probabilities[k],
            hierarchy_probability: traj.outcomes[k].probability,
        });
    }
    Ok(Comparison {
        bins: field.bin_count(),
        bin_width: field.bin_width,
        dropped_weight: oracle.dropped_weight,
        occupation_load: field.occupation_load(photons),
        rows,
    })
}

/// Unmeasured oracle against the master equation solved on a grid `refine`
/// times finer. Returns the trace distance after each bin.
pub fn compare_unmeasured(scenario: &Scenario, refine: usize, options: &OracleOptions) -> Result<Vec<f64>> {
    let photons = fock_photons(&scenario.field)?;
    let field = binned(scenario);
    let setup = OracleSetup {
        system: &scenario.system,
        initial_state: &scenario.initial_state,
        field: &field,
        photons,
    };
    let states = oracle_unmeasured(&setup, options)?;
    let g = scenario.grid;
    let mut fine = scenario.clone();
    fine.grid = TimeGrid {
        t_start: g.t_start,
        dt: g.dt / refine as f64,
        steps: g.steps * refine,
    };
    let me = solve_master_equation(&fine)?;
    (1..=g.steps)
        .map(|k| {
            let rho: CMat = me[k * refine].reduced_state(&scenario.field)?;
            Ok(linalg::trace_distance(&states[k], &rho))
        })
        .collect()
}

/// Overlap |⟨a|b⟩| of two normalized register states.
pub fn register_overlap(a: &nalgebra::DVector<fock_sme::linalg::C64>, b: &nalgebra::DVector<fock_sme::linalg::C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).fold(c(0.0, 0.0), |s, z| s + z).norm()
}
