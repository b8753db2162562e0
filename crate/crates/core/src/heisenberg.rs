//! Adjoint (Heisenberg-picture) ladder π_{m,n}[·].
//!
//! Each π_{m,n} is kept as a linear map on d×d operators, stored as a d²×d²
//! matrix acting on column-major vectorized operators, so that operators such
//! as `L†XL` or `S†XL` can be fed through the same map. The defining property,
//! checked by the paired runs, is
//!
//! ```text
//! Tr[ρ₀ π_{m,n}[X]] = Tr[X ρ_{n,m}]
//! ```
//!
//! One step composes each map with the adjoint of the Schrödinger update:
//! bath channels, the bin split, then the branch operators `K = K₀ ⊗ 1 + K₁ ⊗ a†`:
//!
//! ```text
//! π'_{m,n}[X] = Σ_K w_K ( π̸_{m,n}[K₀†XK₀] + √n π̸_{m,n-1}[K₀†XK₁]
//!                       + √m π̸_{m-1,n}[K₁†XK₀] + √(mn) π̸_{m-1,n-1}[K₁†XK₁] ) / T
//! ```

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrator::Stepper;
use crate::ladder::LadderOp;
use crate::linalg::{self, c, CMat, C64};
use crate::record::{Detection, Outcome, OutcomeMode};
use crate::system::{BathChannel, FieldState, SystemOperators};

#[derive(Clone, Debug, PartialEq)]
pub struct AdjointHierarchy {
    pub time: f64,
    n_max: usize,
    dim: usize,
    maps: Vec<CMat>,
    tracked: CMat,
}

/// How the adjoint step is normalized.
#[derive(Clone, Copy, Debug)]
pub enum Normalization<'a> {
    /// Branch weight reported by the paired Schrödinger step.
    Given(f64),
    /// Recomputed from the adjoint blocks and the initial state.
    Recompute(&'a CMat),
}

/// π_{m,n}(t₀) = δ_{m,n} · identity map; the tracked operator is `x`.
pub fn init_adjoint(x: &CMat, n_max: usize) -> AdjointHierarchy {
    let d = x.nrows();
    let n1 = n_max + 1;
    let mut maps = vec![CMat::zeros(d * d, d * d); n1 * n1];
    for n in 0..n1 {
        maps[n * n1 + n] = CMat::identity(d * d, d * d);
    }
    AdjointHierarchy {
        time: 0.0,
        n_max,
        dim: d,
        maps,
        tracked: x.clone(),
    }
}

impl AdjointHierarchy {
    pub fn at_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn tracked(&self) -> &CMat {
        &self.tracked
    }

    fn idx(&self, m: usize, n: usize) -> usize {
        m * (self.n_max + 1) + n
    }

    fn map(&self, m: isize, n: isize) -> Option<&CMat> {
        if m < 0 || n < 0 || m as usize > self.n_max || n as usize > self.n_max {
            None
        } else {
            Some(&self.maps[self.idx(m as usize, n as usize)])
        }
    }

    /// π_{m,n}[y]; zero for out-of-range indices.
    pub fn apply(&self, m: isize, n: isize, y: &CMat) -> CMat {
        match self.map(m, n) {
            Some(p) => linalg::unvectorize(&(p * linalg::vectorize(y)), self.dim),
            None => linalg::zeros(self.dim),
        }
    }

    /// π_{m,n}[X] for the tracked operator.
    pub fn block(&self, m: usize, n: usize) -> CMat {
        self.apply(m as isize, n as isize, &self.tracked)
    }

    /// max ‖π_{m,n}[y]† − π_{n,m}[y†]‖ over all blocks.
    pub fn pairing_error(&self, y: &CMat) -> f64 {
        let yd = y.adjoint();
        let mut worst: f64 = 0.0;
        for m in 0..=self.n_max {
            for n in 0..=self.n_max {
                let a = self.apply(m as isize, n as isize, y).adjoint();
                let b = self.apply(n as isize, m as isize, &yd);
                worst = worst.max(linalg::distance(&a, &b));
            }
        }
        worst
    }

    /// Σ c*_{m,n} Tr[ρ₀ π_{m,n}[y]].
    pub fn weighted_expectation(&self, field: &FieldState, rho0: &CMat, y: &CMat) -> C64 {
        let k = field.max_photons().min(self.n_max);
        let mut acc = c(0.0, 0.0);
        for m in 0..=k {
            for n in 0..=k {
                let cmn = field.coeff(m, n).conj();
                if cmn != c(0.0, 0.0) {
                    acc += cmn * linalg::trace_of_product(rho0, &self.apply(m as isize, n as isize, y));
                }
            }
        }
        acc
    }
}

/// E[X | record] = Tr[ρ₀ Σ c*_{m,n} π_{m,n}[X]].
pub fn adjoint_expectation(a: &AdjointHierarchy, field: &FieldState, rho0: &CMat) -> C64 {
    a.weighted_expectation(field, rho0, &a.tracked)
}

/// Pr(J)/dt from the adjoint blocks.
pub fn adjoint_jump_rate(
    a: &AdjointHierarchy,
    sys: &SystemOperators,
    xi: C64,
    field: &FieldState,
    rho0: &CMat,
) -> f64 {
    let (s, l) = (sys.scattering(), sys.coupling());
    let ldl = l.adjoint() * l;
    let sdl = s.adjoint() * l;
    let lds = l.adjoint() * s;
    let id = linalg::identity(a.dim);
    let k = field.max_photons().min(a.n_max);
    let mut acc = c(0.0, 0.0);
    for m in 0..=k {
        for n in 0..=k {
            let cmn = field.coeff(m, n).conj();
            if cmn == c(0.0, 0.0) {
                continue;
            }
            let (mi, ni) = (m as isize, n as isize);
            let (mf, nf) = (m as f64, n as f64);
            let mut op = a.apply(mi, ni, &ldl);
            op += a.apply(mi - 1, ni, &sdl) * (xi.conj() * mf.sqrt());
            op += a.apply(mi, ni - 1, &lds) * (xi * nf.sqrt());
            op += a.apply(mi - 1, ni - 1, &id) * c(xi.norm_sqr() * (mf * nf).sqrt(), 0.0);
            acc += cmn * linalg::trace_of_product(rho0, &op);
        }
    }
    acc.re
}

/// K_φ from the adjoint blocks.
pub fn adjoint_expected_current(
    a: &AdjointHierarchy,
    sys: &SystemOperators,
    xi: C64,
    field: &FieldState,
    rho0: &CMat,
    phase: f64,
) -> f64 {
    let (s, l) = (sys.scattering(), sys.coupling());
    let em = Complex64::from_polar(1.0, -phase);
    let ep = em.conj();
    let k = field.max_photons().min(a.n_max);
    let mut acc = c(0.0, 0.0);
    for m in 0..=k {
        for n in 0..=k {
            let cmn = field.coeff(m, n).conj();
            if cmn == c(0.0, 0.0) {
                continue;
            }
            let (mi, ni) = (m as isize, n as isize);
            let mut op = a.apply(mi, ni, l) * em + a.apply(mi, ni, &l.adjoint()) * ep;
            op += a.apply(mi, ni - 1, s) * (em * xi * (n as f64).sqrt());
            op += a.apply(mi - 1, ni, &s.adjoint()) * (ep * xi.conj() * (m as f64).sqrt());
            acc += cmn * linalg::trace_of_product(rho0, &op);
        }
    }
    acc.re
}

/// Adjoint stepping engine mirroring [`Stepper`].
pub struct AdjointStepper {
    inner: Stepper,
    system: SystemOperators,
    field: FieldState,
}

impl AdjointStepper {
    pub fn new(
        system: &SystemOperators,
        field: &FieldState,
        baths: &[BathChannel],
        detection: Detection,
        dt: f64,
    ) -> Result<Self> {
        Ok(Self {
            inner: Stepper::new(system, field, baths, detection, dt)?,
            system: system.clone(),
            field: field.clone(),
        })
    }

    pub fn detection(&self) -> Detection {
        self.inner.detection()
    }

    /// K_φ values for the branch operators, from the adjoint side.
    pub fn currents(&self, a: &AdjointHierarchy, xi: C64, rho0: &CMat) -> [f64; 2] {
        use crate::record::Scheme;
        let cur = |phase| adjoint_expected_current(a, &self.system, xi, &self.field, rho0, phase);
        match self.inner.detection().scheme {
            Scheme::Counting => [0.0, 0.0],
            Scheme::Homodyne { phase } => [cur(phase), 0.0],
            Scheme::Heterodyne => [cur(0.0), cur(FRAC_PI_2)],
        }
    }

    /// Advances the adjoint ladder through one recorded outcome and returns
    /// the normalization used.
    pub fn step(
        &self,
        a: &mut AdjointHierarchy,
        xi: C64,
        outcome: Outcome,
        currents: [f64; 2],
        norm: Normalization<'_>,
    ) -> Result<f64> {
        let dt = self.inner.dt();
        let branches = self.inner.branch_operators(xi, outcome, currents)?;
        if let Some((m, jumps)) = self.inner.bath_operators() {
            let mut bath = linalg::superop(&m.adjoint(), m);
            for j in jumps {
                bath += linalg::superop(&j.adjoint(), j) * c(dt, 0.0);
            }
            for p in a.maps.iter_mut() {
                *p = &*p * &bath;
            }
        }
        cut_adjoint(a, xi.norm_sqr() * dt);
        apply_branches(a, &branches);
        let t = match norm {
            Normalization::Given(t) => t,
            Normalization::Recompute(rho0) => {
                a.weighted_expectation(&self.field, rho0, &linalg::identity(a.dim)).re
            }
        };
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::numerical(a.time, format!("adjoint normalization {t} is not positive")));
        }
        for p in a.maps.iter_mut() {
            *p /= c(t, 0.0);
        }
        a.time += dt;
        Ok(t)
    }
}

/// π̸_{m,n} = π_{m,n} − |c|² √(mn) π̸_{m-1,n-1}.
fn cut_adjoint(a: &mut AdjointHierarchy, bin_weight: f64) {
    if bin_weight == 0.0 {
        return;
    }
    let n1 = a.n_max + 1;
    for m in 1..n1 {
        for n in 1..n1 {
            let prev = a.maps[(m - 1) * n1 + (n - 1)].clone();
            a.maps[m * n1 + n] -= prev * c(bin_weight * ((m * n) as f64).sqrt(), 0.0);
        }
    }
}

fn apply_branches(a: &mut AdjointHierarchy, branches: &[(LadderOp, f64)]) {
    let n1 = a.n_max + 1;
    let dd = a.dim * a.dim;
    let mut next = vec![CMat::zeros(dd, dd); n1 * n1];
    for (k, w) in branches {
        let (k0, k1) = (&k.base, &k.raise);
        let s00 = linalg::superop(&k0.adjoint(), k0) * c(*w, 0.0);
        let s01 = linalg::superop(&k0.adjoint(), k1) * c(*w, 0.0);
        let s10 = linalg::superop(&k1.adjoint(), k0) * c(*w, 0.0);
        let s11 = linalg::superop(&k1.adjoint(), k1) * c(*w, 0.0);
        for m in 0..n1 {
            for n in 0..n1 {
                let out = &mut next[m * n1 + n];
                *out += &a.maps[m * n1 + n] * &s00;
                if n > 0 {
                    *out += &a.maps[m * n1 + n - 1] * &s01 * c((n as f64).sqrt(), 0.0);
                }
                if m > 0 {
                    *out += &a.maps[(m - 1) * n1 + n] * &s10 * c((m as f64).sqrt(), 0.0);
                }
                if m > 0 && n > 0 {
                    *out += &a.maps[(m - 1) * n1 + n - 1] * &s11 * c(((m * n) as f64).sqrt(), 0.0);
                }
            }
        }
    }
    a.maps = next;
}

fn adjoint_step_with(
    a: &mut AdjointHierarchy,
    sys: &SystemOperators,
    field: &FieldState,
    baths: &[BathChannel],
    detection: Detection,
    dt: f64,
    xi: C64,
    outcome: Outcome,
    currents: [f64; 2],
    norm: Normalization<'_>,
) -> Result<f64> {
    AdjointStepper::new(sys, field, baths, detection, dt)?.step(a, xi, outcome, currents, norm)
}

/// One adjoint photon-counting step for outcome `count`.
pub fn adjoint_step_counting(
    a: &mut AdjointHierarchy,
    sys: &SystemOperators,
    xi: C64,
    field: &FieldState,
    dt: f64,
    efficiency: f64,
    count: u8,
    norm: Normalization<'_>,
) -> Result<f64> {
    let det = Detection::counting().with_efficiency(efficiency);
    adjoint_step_with(a, sys, field, &[], det, dt, xi, Outcome::Count(count), [0.0; 2], norm)
}

/// One adjoint homodyne step for current increment `dj` with pre-step K_φ `current`.
pub fn adjoint_step_homodyne(
    a: &mut AdjointHierarchy,
    sys: &SystemOperators,
    xi: C64,
    field: &FieldState,
    dt: f64,
    phase: f64,
    efficiency: f64,
    mode: OutcomeMode,
    dj: f64,
    current: f64,
    norm: Normalization<'_>,
) -> Result<f64> {
    let det = Detection::homodyne(phase).with_efficiency(efficiency).with_mode(mode);
    adjoint_step_with(a, sys, field, &[], det, dt, xi, Outcome::Current(dj), [current, 0.0], norm)
}

/// One adjoint heterodyne step.
pub fn adjoint_step_heterodyne(
    a: &mut AdjointHierarchy,
    sys: &SystemOperators,
    xi: C64,
    field: &FieldState,
    dt: f64,
    efficiency: f64,
    mode: OutcomeMode,
    dj: (f64, f64),
    currents: [f64; 2],
    norm: Normalization<'_>,
) -> Result<f64> {
    let det = Detection::heterodyne().with_efficiency(efficiency).with_mode(mode);
    adjoint_step_with(a, sys, field, &[], det, dt, xi, Outcome::Currents(dj.0, dj.1), currents, norm)
}
