//! Per-bin coupling unitary.

use fock_sme::error::{Error, Result};
use fock_sme::linalg::{self, c, CMat, I};
use fock_sme::system::SystemOperators;

/// Default bound on Δt·‖L†L‖.
pub const BIN_LOAD_LIMIT: f64 = 0.01;

/// First-order coupling matrix on system ⊗ bin, index `bin·d + sys`.
///
/// ```text
/// ⟨0|U|0⟩ = 1 − Δt(iH + ½L†L)    ⟨0|U|1⟩ = −√Δt L†S
/// ⟨1|U|0⟩ = √Δt L                ⟨1|U|1⟩ = S − Δt(iH + ½L†L)
/// ```
pub fn first_order_unitary(sys: &SystemOperators, dt: f64) -> CMat {
    let d = sys.dim();
    let (s, l, h) = (sys.scattering(), sys.coupling(), sys.hamiltonian());
    let g = h * I + l.adjoint() * l * c(0.5, 0.0);
    let sdt = c(dt.sqrt(), 0.0);
    let mut u = CMat::zeros(2 * d, 2 * d);
    u.view_mut((0, 0), (d, d)).copy_from(&(linalg::identity(d) - &g * c(dt, 0.0)));
    u.view_mut((0, d), (d, d)).copy_from(&(l.adjoint() * s * (-sdt)));
    u.view_mut((d, 0), (d, d)).copy_from(&(l * sdt));
    u.view_mut((d, d), (d, d)).copy_from(&(s - &g * c(dt, 0.0)));
    u
}

/// Nearest unitary to `x` (polar factor).
pub fn polar_unitary(x: &CMat) -> Result<CMat> {
    let svd = x.clone().svd(true, true);
    let smallest = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(smallest > 1e-8) {
        return Err(Error::Resolution(format!("coupling matrix is singular (σ_min = {smallest:e})")));
    }
    match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => Ok(u * vt),
        _ => Err(Error::Resolution("singular value decomposition failed".into())),
    }
}

/// Exactly unitary coupling for one bin of width `dt`.
pub fn bin_unitary(sys: &SystemOperators, dt: f64) -> Result<CMat> {
    bin_unitary_with(sys, dt, BIN_LOAD_LIMIT)
}

pub fn bin_unitary_with(sys: &SystemOperators, dt: f64, load_limit: f64) -> Result<CMat> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Parameter(format!("bin width must be positive, got {dt}")));
    }
    let load = dt * sys.emission_rate();
    if load > load_limit {
        return Err(Error::Resolution(format!(
            "Δt·‖L†L‖ = {load:.3e} exceeds {load_limit}; use narrower bins"
        )));
    }
    polar_unitary(&first_order_unitary(sys, dt))
}
