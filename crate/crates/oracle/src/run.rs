//! Sequential bin-by-bin evolution of the joint system ⊗ field vector.

use fock_sme::error::{Error, Result};
use fock_sme::linalg::{self, c, CMat, C64};
use fock_sme::record::{Detection, Outcome, OutcomeMode, Scheme, TrajectoryRecord};
use fock_sme::system::SystemOperators;
use nalgebra::DVector;

use crate::binned::{build_binned_fock_with, BinnedField, DROPPED_WEIGHT_LIMIT};
use crate::unitary::{bin_unitary_with, BIN_LOAD_LIMIT};

pub const DEFAULT_MAX_BINS: usize = 14;
const INFEASIBLE: f64 = 1e-14;
const COMPONENT_CUTOFF: f64 = 1e-14;

#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    pub max_bins: usize,
    pub dropped_weight_limit: f64,
    pub bin_load_limit: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            max_bins: DEFAULT_MAX_BINS,
            dropped_weight_limit: DROPPED_WEIGHT_LIMIT,
            bin_load_limit: BIN_LOAD_LIMIT,
        }
    }
}

/// Inputs shared by every oracle evolution.
#[derive(Clone, Copy, Debug)]
pub struct OracleSetup<'a> {
    pub system: &'a SystemOperators,
    pub initial_state: &'a CMat,
    pub field: &'a BinnedField,
    pub photons: usize,
}

/// Mixture of joint vectors, index `register·d + sys`, bit 0 of the register
/// being the earliest bin still present.
#[derive(Clone, Debug)]
pub struct JointState {
    dim: usize,
    bins: usize,
    components: Vec<(f64, DVector<C64>)>,
    pub dropped_weight: f64,
}

impl JointState {
    pub fn new(setup: &OracleSetup<'_>, options: &OracleOptions) -> Result<Self> {
        let b = setup.field.bin_count();
        if b > options.max_bins {
            return Err(Error::Parameter(format!("{b} bins exceed the cap of {}", options.max_bins)));
        }
        let d = setup.system.dim();
        linalg::check_density_matrix(setup.initial_state, 1e-10)
            .map_err(|e| Error::Validation(format!("initial system state: {e}")))?;
        if setup.initial_state.nrows() != d {
            return Err(Error::Validation("initial state does not match the system dimension".into()));
        }
        let fock = build_binned_fock_with(setup.field, setup.photons, options.dropped_weight_limit)?;
        let components = linalg::pure_components(setup.initial_state, COMPONENT_CUTOFF)
            .into_iter()
            .map(|(p, psi)| {
                let mut v = DVector::from_element(d << b, c(0.0, 0.0));
                for (reg, a) in fock.amplitudes.iter().enumerate() {
                    if *a != c(0.0, 0.0) {
                        v.rows_mut(reg * d, d).copy_from(&(&psi * *a));
                    }
                }
                (p, v)
            })
            .collect();
        Ok(Self {
            dim: d,
            bins: b,
            components,
            dropped_weight: fock.dropped_weight,
        })
    }

    pub fn remaining_bins(&self) -> usize {
        self.bins
    }

    pub fn norm_sqr(&self) -> f64 {
        self.components.iter().map(|(p, v)| p * v.norm_squared()).sum()
    }

    /// System state with every bin traced out.
    pub fn reduced_state(&self) -> CMat {
        let d = self.dim;
        let mut rho = CMat::zeros(d, d);
        for (p, v) in &self.components {
            let m = CMat::from_column_slice(d, v.len() / d, v.as_slice());
            rho += &m * m.adjoint() * c(*p, 0.0);
        }
        let t = linalg::trace(&rho);
        rho / t
    }

    /// Couples the earliest bin, projects it on `⟨φ|`, drops it and
    /// renormalizes. Returns the outcome probability.
    fn measure_first(&mut self, u: &CMat, phi: [C64; 2]) -> f64 {
        let d = self.dim;
        let m = u.rows(0, d) * phi[0].conj() + u.rows(d, d) * phi[1].conj();
        let before = self.norm_sqr();
        for (_, v) in self.components.iter_mut() {
            let cols = v.len() / (2 * d);
            let pairs = CMat::from_column_slice(2 * d, cols, v.as_slice());
            let out = &m * pairs;
            *v = DVector::from_column_slice(out.as_slice());
        }
        self.bins -= 1;
        let after = self.norm_sqr();
        let s = c(1.0 / after.sqrt(), 0.0);
        for (_, v) in self.components.iter_mut() {
            *v *= s;
        }
        after / before
    }

    /// Couples bin `i` without measuring it.
    fn couple(&mut self, u: &CMat, i: usize) {
        let d = self.dim;
        for (_, v) in self.components.iter_mut() {
            for reg in 0..(1usize << self.bins) {
                if reg >> i & 1 == 1 {
                    continue;
                }
                let hi = reg | (1 << i);
                let mut x = DVector::zeros(2 * d);
                x.rows_mut(0, d).copy_from(&v.rows(reg * d, d));
                x.rows_mut(d, d).copy_from(&v.rows(hi * d, d));
                let y = u * x;
                v.rows_mut(reg * d, d).copy_from(&y.rows(0, d));
                v.rows_mut(hi * d, d).copy_from(&y.rows(d, d));
            }
        }
    }
}

/// Bin state `|φ⟩` selected by one recorded outcome.
pub fn outcome_state(detection: &Detection, outcome: Outcome) -> Result<[C64; 2]> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let sign = |x: f64| if x > 0.0 { 1.0 } else { -1.0 };
    match (detection.scheme, outcome) {
        (Scheme::Counting, Outcome::Count(0)) => Ok([c(1.0, 0.0), c(0.0, 0.0)]),
        (Scheme::Counting, Outcome::Count(1)) => Ok([c(0.0, 0.0), c(1.0, 0.0)]),
        (Scheme::Homodyne { phase }, Outcome::Current(dj)) if dj != 0.0 => {
            Ok([c(h, 0.0), C64::from_polar(sign(dj) * h, phase)])
        }
        (Scheme::Heterodyne, Outcome::Currents(a, b)) if a != 0.0 && b != 0.0 => {
            Ok([c(0.5, 0.0), c(sign(a), sign(b)) * (0.5 * h)])
        }
        (_, o) => Err(Error::Validation(format!(
            "record entry {o:?} is not a {} bin outcome",
            detection.scheme_name()
        ))),
    }
}

fn check_record(record: &TrajectoryRecord, field: &BinnedField) -> Result<()> {
    record.validate()?;
    let det = record.detection;
    if det.efficiency != 1.0 {
        return Err(Error::Parameter("the bin oracle models ideal detection only".into()));
    }
    if !matches!(det.scheme, Scheme::Counting) && det.mode != OutcomeMode::Binary {
        return Err(Error::Parameter(
            "per-record oracle comparison needs binary diffusive outcomes".into(),
        ));
    }
    if record.entries.len() != field.bin_count() {
        return Err(Error::Validation(format!(
            "record has {} entries for {} bins",
            record.entries.len(),
            field.bin_count()
        )));
    }
    if (record.dt - field.bin_width).abs() > 1e-12 * field.bin_width.max(1.0) {
        return Err(Error::Validation(format!(
            "record dt {} differs from bin width {}",
            record.dt, field.bin_width
        )));
    }
    Ok(())
}

/// Conditional system states after each bin of a recorded run.
#[derive(Clone, Debug)]
pub struct OracleRun {
    /// Reduced state before the first bin, then after every bin.
    pub states: Vec<CMat>,
    /// Probability of each recorded outcome.
    pub probabilities: Vec<f64>,
    pub dropped_weight: f64,
}

pub fn oracle_run(setup: &OracleSetup<'_>, record: &TrajectoryRecord, options: &OracleOptions) -> Result<OracleRun> {
    check_record(record, setup.field)?;
    let u = bin_unitary_with(setup.system, setup.field.bin_width, options.bin_load_limit)?;
    let mut joint = JointState::new(setup, options)?;
    let mut states = vec![joint.reduced_state()];
    let mut probabilities = Vec::with_capacity(record.entries.len());
    for (k, &o) in record.entries.iter().enumerate() {
        let phi = outcome_state(&record.detection, o)?;
        let p = joint.measure_first(&u, phi);
        if !(p >= INFEASIBLE) {
            return Err(Error::InfeasibleRecord {
                step: k,
                message: format!("bin outcome probability {p:e}"),
            });
        }
        probabilities.push(p);
        states.push(joint.reduced_state());
    }
    Ok(OracleRun {
        states,
        probabilities,
        dropped_weight: joint.dropped_weight,
    })
}

/// Reduced system states with every bin coupled but never measured.
pub fn oracle_unmeasured(setup: &OracleSetup<'_>, options: &OracleOptions) -> Result<Vec<CMat>> {
    let u = bin_unitary_with(setup.system, setup.field.bin_width, options.bin_load_limit)?;
    let mut joint = JointState::new(setup, options)?;
    let mut states = vec![joint.reduced_state()];
    for i in 0..setup.field.bin_count() {
        joint.couple(&u, i);
        states.push(joint.reduced_state());
    }
    Ok(states)
}
