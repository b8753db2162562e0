//! Superoperators, probabilities and currents of the coupled equations,
//! written out term by term.

use crate::error::{Error, Result};
use crate::hierarchy::{BlockTriangle, HierarchyDerivative, HierarchyState};
use crate::linalg::{self, c, CMat, C64, I};
use crate::system::{BathChannel, FieldState, SystemOperators};

const CLAMP_TOL: f64 = 1e-12;
const IMAG_TOL: f64 = 1e-8;

/// 𝒟_L[ρ] = LρL† − ½(L†Lρ + ρL†L).
pub fn lindblad(l: &CMat, rho: &CMat) -> CMat {
    let ld = l.adjoint();
    let ldl = &ld * l;
    l * rho * &ld - (&ldl * rho + rho * &ldl).scale(0.5)
}

fn sqrt_usize(k: usize) -> f64 {
    (k as f64).sqrt()
}

fn map_blocks(n_max: usize, dim: usize, mut f: impl FnMut(usize, usize) -> CMat) -> BlockTriangle {
    let mut out = BlockTriangle::zeros(n_max, dim);
    for n in 0..=n_max {
        for m in 0..=n {
            *out.upper_mut(m, n) = f(m, n);
        }
    }
    out
}

/// 𝒦_{m,n}: unconditional generator including thermal baths.
pub fn unconditional_generator(
    h: &HierarchyState,
    sys: &SystemOperators,
    xi: C64,
    baths: &[BathChannel],
) -> HierarchyDerivative {
    let b = &h.blocks;
    let (s, l, ham) = (sys.scattering(), sys.coupling(), sys.hamiltonian());
    let (ld, sd) = (l.adjoint(), s.adjoint());
    let xi2 = xi.norm_sqr();
    map_blocks(h.n_max(), h.dim(), |m, n| {
        let (mi, ni) = (m as isize, n as isize);
        let rho = b.upper(m, n);
        let mut out = linalg::commutator(ham, rho) * (-I) + lindblad(l, rho);
        if m > 0 {
            let x = s * b.get(mi - 1, ni);
            out += linalg::commutator(&x, &ld) * (xi * sqrt_usize(m));
        }
        if n > 0 {
            let x = b.get(mi, ni - 1) * &sd;
            out += linalg::commutator(l, &x) * (xi.conj() * sqrt_usize(n));
        }
        if m > 0 && n > 0 {
            let r = b.get(mi - 1, ni - 1);
            out += (s * &r * &sd - r) * c(xi2 * sqrt_usize(m * n), 0.0);
        }
        for bath in baths {
            let nb = bath.mean_occupation;
            out += lindblad(&bath.coupling, rho) * c(nb + 1.0, 0.0);
            if nb > 0.0 {
                out += lindblad(&bath.coupling.adjoint(), rho) * c(nb, 0.0);
            }
        }
        out
    })
}

fn clamp_probability(p: f64, time: f64) -> Result<f64> {
    if !p.is_finite() || p < -CLAMP_TOL || p > 1.0 + CLAMP_TOL {
        return Err(Error::numerical(
            time,
            format!("outcome probability {p} outside [0, 1]; reduce dt"),
        ));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Field-weighted trace of the unnormalized jump blocks, before the factor dt.
pub fn jump_rate(h: &HierarchyState, sys: &SystemOperators, xi: C64, field: &FieldState) -> f64 {
    let b = &h.blocks;
    let (s, l) = (sys.scattering(), sys.coupling());
    let ld = l.adjoint();
    let ldl = &ld * l;
    let lds = &ld * s;
    let sdl = s.adjoint() * l;
    let k = field.max_photons().min(h.n_max());
    let mut acc = c(0.0, 0.0);
    for m in 0..=k {
        for n in 0..=k {
            let (mi, ni) = (m as isize, n as isize);
            let mut t = linalg::trace_of_product(&ldl, &b.get(mi, ni));
            if m > 0 {
                t += linalg::trace_of_product(&lds, &b.get(mi - 1, ni)) * xi * sqrt_usize(m);
            }
            if n > 0 {
                t += linalg::trace_of_product(&sdl, &b.get(mi, ni - 1))
                    * xi.conj()
                    * sqrt_usize(n);
            }
            if m > 0 && n > 0 {
                t += linalg::trace(&b.get(mi - 1, ni - 1)) * xi.norm_sqr() * sqrt_usize(m * n);
            }
            acc += field.coeff(m, n) * t;
        }
    }
    acc.re
}

/// Pr(J) in one step of length dt.
pub fn jump_probability(
    h: &HierarchyState,
    sys: &SystemOperators,
    xi: C64,
    field: &FieldState,
    dt: f64,
) -> Result<f64> {
    clamp_probability(dt * jump_rate(h, sys, xi, field), h.time)
}

/// Unnormalized post-count blocks.
pub fn jump_update(h: &HierarchyState, sys: &SystemOperators, xi: C64) -> HierarchyDerivative {
    let b = &h.blocks;
    let (s, l) = (sys.scattering(), sys.coupling());
    let (ld, sd) = (l.adjoint(), s.adjoint());
    map_blocks(h.n_max(), h.dim(), |m, n| {
        let (mi, ni) = (m as isize, n as isize);
        let mut out = l * b.upper(m, n) * &ld;
        if m > 0 {
            out += s * b.get(mi - 1, ni) * &ld * (xi * sqrt_usize(m));
        }
        if n > 0 {
            out += l * b.get(mi, ni - 1) * &sd * (xi.conj() * sqrt_usize(n));
        }
        if m > 0 && n > 0 {
            out += s * b.get(mi - 1, ni - 1) * &sd * c(xi.norm_sqr() * sqrt_usize(m * n), 0.0);
        }
        out
    })
}

/// Unnormalized no-count blocks after one Euler step.
pub fn no_jump_update(
    h: &HierarchyState,
    sys: &SystemOperators,
    xi: C64,
    dt: f64,
) -> HierarchyDerivative {
    let b = &h.blocks;
    let (s, l, ham) = (sys.scattering(), sys.coupling(), sys.hamiltonian());
    let ld = l.adjoint();
    let ldl = &ld * l;
    let lds = &ld * s;
    let sdl = s.adjoint() * l;
    map_blocks(h.n_max(), h.dim(), |m, n| {
        let (mi, ni) = (m as isize, n as isize);
        let rho = b.upper(m, n);
        let mut d = linalg::commutator(ham, rho) * (-I) - linalg::anticommutator(&ldl, rho).scale(0.5);
        if m > 0 {
            d -= &lds * b.get(mi - 1, ni) * (xi * sqrt_usize(m));
        }
        if n > 0 {
            d -= b.get(mi, ni - 1) * &sdl * (xi.conj() * sqrt_usize(n));
        }
        if m > 0 && n > 0 {
            d -= b.get(mi - 1, ni - 1) * c(xi.norm_sqr() * sqrt_usize(m * n), 0.0);
        }
        rho + d * c(dt, 0.0)
    })
}

fn current_terms(
    h: &HierarchyState,
    sys: &SystemOperators,
    xi: C64,
    phase: f64,
    m: usize,
    n: usize,
) -> CMat {
    let b = &h.blocks;
    let (s, l) = (sys.scattering(), sys.coupling());
    let (mi, ni) = (m as isize, n as isize);
    let em = C64::from_polar(1.0, -phase);
    let ep = em.conj();
    let rho = b.get(mi, ni);
    let mut out = l * &rho * em + &rho * l.adjoint() * ep;
    if m > 0 {
        out += s * b.get(mi - 1, ni) * (em * xi * sqrt_usize(m));
    }
    if n > 0 {
        out += b.get(mi, ni - 1) * s.adjoint() * (ep * xi.conj() * sqrt_usize(n));
    }
    out
}

fn current_complex(
    h: &HierarchyState,
    sys: &SystemOperators,
    xi: C64,
    phase: f64,
    field: &FieldState,
) -> C64 {
    let k = field.max_photons().min(h.n_max());
    let mut acc = c(0.0, 0.0);
    for m in 0..=k {
        for n in 0..=k {
            let cmn = field.coeff(m, n);
            if cmn == c(0.0, 0.0) {
                continue;
            }
            acc += cmn * linalg::trace(&current_terms(h, sys, xi, phase, m, n));
        }
    }
    acc
}

/// K_φ, the expected homodyne current.
pub fn expected_current(
    h: &HierarchyState,
    sys: &SystemOperators,
    xi: C64,
    phase: f64,
    field: &FieldState,
) -> Result<f64> {
    let k = current_complex(h, sys, xi, phase, field);
    if k.im.abs() > IMAG_TOL {
        return Err(Error::numerical(
            h.time,
            format!("expected current has imaginary part {}", k.im),
        ));
    }
    Ok(k.re)
}

/// ℋ_{m,n}[φ], the homodyne conditioning map, with K_φ from the same state.
pub fn homodyne_map(
    h: &HierarchyState,
    sys: &SystemOperators,
    xi: C64,
    phase: f64,
    field: &FieldState,
) -> Result<HierarchyDerivative> {
    let k = expected_current(h, sys, xi, phase, field)?;
    Ok(map_blocks(h.n_max(), h.dim(), |m, n| {
        current_terms(h, sys, xi, phase, m, n) - h.blocks.upper(m, n) * c(k, 0.0)
    }))
}
