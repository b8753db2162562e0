//! Conditional expectations and field statistics read off hierarchy snapshots.

use crate::error::{Error, Result};
use crate::generators;
use crate::hierarchy::{reduced_state, HierarchyState};
use crate::linalg::{self, c, CMat, C64};
use crate::system::{self, FieldState, SystemOperators};

const HERMITIAN_TOL: f64 = 1e-10;
const IMAG_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    BlochX,
    BlochY,
    BlochZ,
    ExcitedPopulation,
    Purity,
    PhotonFlux,
    QuadratureCurrent(f64),
    CumulativeCounts,
    Trace,
    Operator { name: String, matrix: CMat },
}

impl Observable {
    /// Parses a builtin name, `quadrature_current(<phase>)`, or one of the
    /// named operators.
    pub fn parse(name: &str, operators: &[(String, CMat)]) -> Result<Self> {
        let name = name.trim();
        let obs = match name {
            "bloch_x" => Observable::BlochX,
            "bloch_y" => Observable::BlochY,
            "bloch_z" => Observable::BlochZ,
            "excited_population" => Observable::ExcitedPopulation,
            "purity" => Observable::Purity,
            "photon_flux" => Observable::PhotonFlux,
            "cumulative_counts" => Observable::CumulativeCounts,
            "trace" => Observable::Trace,
            _ => {
                if let Some(arg) = name
                    .strip_prefix("quadrature_current(")
                    .and_then(|s| s.strip_suffix(')'))
                {
                    let phase: f64 = arg.trim().parse().map_err(|_| {
                        Error::Validation(format!("invalid phase in `{name}`"))
                    })?;
                    if !phase.is_finite() {
                        return Err(Error::Validation(format!("invalid phase in `{name}`")));
                    }
                    Observable::QuadratureCurrent(phase)
                } else if let Some((_, m)) = operators.iter().find(|(n, _)| n == name) {
                    if !linalg::is_hermitian(m, HERMITIAN_TOL) {
                        return Err(Error::Validation(format!("operator `{name}` is not Hermitian")));
                    }
                    Observable::Operator {
                        name: name.to_string(),
                        matrix: m.clone(),
                    }
                } else {
                    return Err(Error::Validation(format!("unknown observable `{name}`")));
                }
            }
        };
        Ok(obs)
    }

    pub fn name(&self) -> String {
        match self {
            Observable::BlochX => "bloch_x".into(),
            Observable::BlochY => "bloch_y".into(),
            Observable::BlochZ => "bloch_z".into(),
            Observable::ExcitedPopulation => "excited_population".into(),
            Observable::Purity => "purity".into(),
            Observable::PhotonFlux => "photon_flux".into(),
            Observable::QuadratureCurrent(p) => format!("quadrature_current({p})"),
            Observable::CumulativeCounts => "cumulative_counts".into(),
            Observable::Trace => "trace".into(),
            Observable::Operator { name, .. } => name.clone(),
        }
    }

    /// Checks the request against the system dimension.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Observable::BlochX
            | Observable::BlochY
            | Observable::BlochZ
            | Observable::ExcitedPopulation
                if dim != 2 =>
            {
                Err(Error::Validation(format!(
                    "`{}` is defined only for two-level systems (dimension is {dim})",
                    self.name()
                )))
            }
            Observable::Operator { name, matrix } if matrix.nrows() != dim => Err(
                Error::Validation(format!("operator `{name}` has the wrong dimension")),
            ),
            _ => Ok(()),
        }
    }
}

/// Tr[ρ_sys X] for Hermitian X.
pub fn expectation(h: &HierarchyState, field: &FieldState, x: &CMat) -> Result<f64> {
    if !linalg::is_hermitian(x, HERMITIAN_TOL) || x.nrows() != h.dim() {
        return Err(Error::Validation("observable must be a Hermitian matrix of system size".into()));
    }
    let rho = reduced_state(h, field)?;
    let v = linalg::trace_of_product(&rho, x);
    if v.im.abs() > IMAG_TOL {
        return Err(Error::numerical(h.time, format!("expectation has imaginary part {}", v.im)));
    }
    Ok(v.re)
}

/// Tr[ρ_sys²].
pub fn purity(h: &HierarchyState, field: &FieldState) -> Result<f64> {
    Ok(linalg::purity(&reduced_state(h, field)?))
}

/// E[dΛ_out]/dt, valid after any detection scheme.
pub fn conditional_photon_flux(
    h: &HierarchyState,
    sys: &SystemOperators,
    xi: C64,
    field: &FieldState,
) -> f64 {
    generators::jump_rate(h, sys, xi, field)
}

/// E[dQ_φ,out]/dt.
pub fn conditional_quadrature(
    h: &HierarchyState,
    sys: &SystemOperators,
    xi: C64,
    field: &FieldState,
    phase: f64,
) -> Result<f64> {
    generators::expected_current(h, sys, xi, phase, field)
}

/// Evaluates one observable; `counts` is the running count total.
pub fn evaluate(
    obs: &Observable,
    h: &HierarchyState,
    sys: &SystemOperators,
    field: &FieldState,
    xi: C64,
    counts: usize,
) -> Result<C64> {
    obs.validate(h.dim())?;
    let rho = || reduced_state(h, field);
    let ev = |x: CMat| -> Result<C64> { Ok(linalg::trace_of_product(&rho()?, &x)) };
    match obs {
        Observable::BlochX => ev(system::sigma_x()),
        Observable::BlochY => ev(system::sigma_y()),
        Observable::BlochZ => ev(system::sigma_z()),
        Observable::ExcitedPopulation => ev(system::excited_state()),
        Observable::Purity => Ok(c(purity(h, field)?, 0.0)),
        Observable::PhotonFlux => Ok(c(conditional_photon_flux(h, sys, xi, field), 0.0)),
        Observable::QuadratureCurrent(p) => Ok(c(conditional_quadrature(h, sys, xi, field, *p)?, 0.0)),
        Observable::CumulativeCounts => Ok(c(counts as f64, 0.0)),
        Observable::Trace => Ok(linalg::trace(&rho()?)),
        Observable::Operator { matrix, .. } => ev(matrix.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::init_hierarchy;
    use crate::system::{excited_state, ground_state, sigma_z, two_level_atom};

    #[test]
    fn basic_expectations() {
        let h = init_hierarchy(&excited_state(), 0).unwrap();
        let f = FieldState::vacuum();
        assert!((expectation(&h, &f, &linalg::identity(2)).unwrap() - 1.0).abs() < 1e-15);
        assert!((expectation(&h, &f, &sigma_z()).unwrap() - 1.0).abs() < 1e-15);
        let mixed = init_hierarchy(&linalg::identity(2).scale(0.5), 0).unwrap();
        assert!((purity(&mixed, &f).unwrap() - 0.5).abs() < 1e-15);
        assert!((purity(&h, &f).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn flux_and_current_examples() {
        let sys = two_level_atom(1.0, 0.0).unwrap();
        let e = init_hierarchy(&excited_state(), 0).unwrap();
        let f = FieldState::vacuum();
        assert!((conditional_photon_flux(&e, &sys, c(0.0, 0.0), &f) - 1.0).abs() < 1e-15);
        let g = init_hierarchy(&ground_state(), 1).unwrap();
        let f1 = FieldState::fock(1);
        assert_eq!(conditional_photon_flux(&g, &sys, c(0.0, 0.0), &f1), 0.0);
        assert_eq!(conditional_quadrature(&g, &sys, c(0.0, 0.0), &f1, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn parse_and_validate() {
        let ops = vec![("n_e".to_string(), excited_state())];
        assert_eq!(Observable::parse("bloch_x", &ops).unwrap(), Observable::BlochX);
        assert_eq!(
            Observable::parse("quadrature_current(1.5)", &ops).unwrap(),
            Observable::QuadratureCurrent(1.5)
        );
        assert_eq!(Observable::parse("n_e", &ops).unwrap().name(), "n_e");
        assert!(Observable::parse("nope", &ops).is_err());
        assert!(Observable::BlochX.validate(3).is_err());
        assert!(Observable::Purity.validate(3).is_ok());
        let bad = vec![("x".to_string(), crate::system::sigma_minus())];
        assert!(Observable::parse("x", &bad).is_err());
    }
}
