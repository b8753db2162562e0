//! Physical scenario: system operators, the wave packet carrying the input
//! photons, and the input field state in the packet's Fock basis.
//!
//! Conventions fixed here and used everywhere else:
//! - photon indices start at 0;
//! - qubit basis order is (|g⟩, |e⟩), so index 0 is the ground state;
//! - time is measured in units of 1/Γ for the presets.

use std::fmt;
use std::sync::Arc;

use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64};

const UNITARY_TOL: f64 = 1e-12;
const FIELD_TOL: f64 = 1e-10;

/// The (S, L, H) triple.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemOperators {
    dim: usize,
    scattering: CMat,
    coupling: CMat,
    hamiltonian: CMat,
}

impl SystemOperators {
    pub fn new(scattering: CMat, coupling: CMat, hamiltonian: CMat) -> Result<Self> {
        let dim = scattering.nrows();
        if dim == 0 {
            return Err(Error::Parameter("system dimension must be positive".into()));
        }
        for (name, m) in [
            ("scattering", &scattering),
            ("coupling", &coupling),
            ("hamiltonian", &hamiltonian),
        ] {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::Validation(format!(
                    "{name} is {}x{}, expected {dim}x{dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Validation(format!("{name} has non-finite entries")));
            }
        }
        if !linalg::is_unitary(&scattering, UNITARY_TOL) {
            return Err(Error::Validation("scattering operator is not unitary".into()));
        }
        if !linalg::is_hermitian(&hamiltonian, UNITARY_TOL) {
            return Err(Error::Validation("hamiltonian is not Hermitian".into()));
        }
        Ok(Self {
            dim,
            scattering,
            coupling,
            hamiltonian,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scattering(&self) -> &CMat {
        &self.scattering
    }

    pub fn coupling(&self) -> &CMat {
        &self.coupling
    }

    pub fn hamiltonian(&self) -> &CMat {
        &self.hamiltonian
    }

    /// Emission rate scale ‖L†L‖.
    pub fn emission_rate(&self) -> f64 {
        linalg::max_eigenvalue(&(self.coupling.adjoint() * &self.coupling))
    }
}

/// Two-level atom with decay rate Γ and detuning Δ₀: S = I, L = √Γ σ₋, H = −Δ₀ σ_z.
pub fn two_level_atom(decay_rate: f64, detuning: f64) -> Result<SystemOperators> {
    if !(decay_rate > 0.0) || !decay_rate.is_finite() {
        return Err(Error::Parameter(format!(
            "decay rate must be positive, got {decay_rate}"
        )));
    }
    if !detuning.is_finite() {
        return Err(Error::Parameter("detuning must be finite".into()));
    }
    SystemOperators::new(
        linalg::identity(2),
        sigma_minus().scale(decay_rate.sqrt()),
        sigma_z().scale(-detuning),
    )
}

/// |g⟩⟨e|
pub fn sigma_minus() -> CMat {
    linalg::real_matrix(2, &[0.0, 1.0, 0.0, 0.0])
}

pub fn sigma_x() -> CMat {
    linalg::real_matrix(2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn sigma_y() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)])
}

/// |e⟩⟨e| − |g⟩⟨g|
pub fn sigma_z() -> CMat {
    linalg::real_matrix(2, &[-1.0, 0.0, 0.0, 1.0])
}

pub fn ground_state() -> CMat {
    linalg::real_matrix(2, &[1.0, 0.0, 0.0, 0.0])
}

pub fn excited_state() -> CMat {
    linalg::real_matrix(2, &[0.0, 0.0, 0.0, 1.0])
}

/// Unmonitored thermal channel with coupling L̃ and mean occupation ⟨n⟩.
#[derive(Clone, Debug, PartialEq)]
pub struct BathChannel {
    pub coupling: CMat,
    pub mean_occupation: f64,
}

impl BathChannel {
    pub fn new(coupling: CMat, mean_occupation: f64) -> Result<Self> {
        if !(mean_occupation >= 0.0) || !mean_occupation.is_finite() {
            return Err(Error::Parameter(format!(
                "bath mean occupation must be non-negative, got {mean_occupation}"
            )));
        }
        if !coupling.is_square() {
            return Err(Error::Validation("bath coupling must be square".into()));
        }
        Ok(Self {
            coupling,
            mean_occupation,
        })
    }

    /// Jump operators √(⟨n⟩+1) L̃ and √⟨n⟩ L̃†.
    pub fn jump_operators(&self) -> [CMat; 2] {
        [
            self.coupling.scale((self.mean_occupation + 1.0).sqrt()),
            self.coupling.adjoint().scale(self.mean_occupation.sqrt()),
        ]
    }
}

/// Input field density matrix over Fock states of the packet mode.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    coeffs: CMat,
}

impl FieldState {
    pub fn from_coeffs(coeffs: CMat) -> Result<Self> {
        if coeffs.nrows() == 0 {
            return Err(Error::Validation("field coefficients are empty".into()));
        }
        linalg::check_density_matrix(&coeffs, FIELD_TOL)
            .map_err(|e| Error::Validation(format!("field coefficients: {e}")))?;
        Ok(Self { coeffs })
    }

    pub fn fock(photons: usize) -> Self {
        let mut coeffs = CMat::zeros(photons + 1, photons + 1);
        coeffs[(photons, photons)] = c(1.0, 0.0);
        Self { coeffs }
    }

    pub fn vacuum() -> Self {
        Self::fock(0)
    }

    pub fn max_photons(&self) -> usize {
        self.coeffs.nrows() - 1
    }

    pub fn coeffs(&self) -> &CMat {
        &self.coeffs
    }

    pub fn coeff(&self, m: usize, n: usize) -> C64 {
        self.coeffs[(m, n)]
    }

    pub fn mean_photons(&self) -> f64 {
        (0..self.coeffs.nrows())
            .map(|n| n as f64 * self.coeffs[(n, n)].re)
            .sum()
    }

    /// Returns the same state padded with empty Fock levels up to `n_max`.
    pub fn padded(&self, n_max: usize) -> Self {
        if n_max <= self.max_photons() {
            return self.clone();
        }
        let k = self.coeffs.nrows();
        let mut coeffs = CMat::zeros(n_max + 1, n_max + 1);
        coeffs.view_mut((0, 0), (k, k)).copy_from(&self.coeffs);
        Self { coeffs }
    }
}

fn poisson_amplitudes(amplitude: C64, truncation: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(truncation + 1);
    let mut a = c((-0.5 * amplitude.norm_sqr()).exp(), 0.0);
    out.push(a);
    for n in 1..=truncation {
        a = a * amplitude / (n as f64).sqrt();
        out.push(a);
    }
    out
}

/// Truncated, renormalized coherent state of peak amplitude α₀ as a rank-1
/// coefficient matrix.
pub fn coherent_coefficients(amplitude: C64, truncation: usize) -> FieldState {
    let amps = poisson_amplitudes(amplitude, truncation);
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let k = truncation + 1;
    let coeffs = CMat::from_fn(k, k, |m, n| amps[m] * amps[n].conj() / (norm * norm));
    FieldState { coeffs }
}

/// Fraction of the coherent state's mean photon number ⟨n⟩ = |α₀|² carried by
/// the Fock components n ≤ `truncation`, before renormalization.
pub fn captured_photon_fraction(mean_photons: f64, truncation: usize) -> f64 {
    if mean_photons <= 0.0 {
        return 1.0;
    }
    let amps = poisson_amplitudes(c(mean_photons.sqrt(), 0.0), truncation);
    amps.iter()
        .enumerate()
        .map(|(n, a)| n as f64 * a.norm_sqr())
        .sum::<f64>()
        / mean_photons
}

#[derive(Clone, Debug, PartialEq)]
pub enum PacketKind {
    Gaussian { bandwidth_ratio: f64, center: f64 },
    Flat,
    Custom,
}

type Envelope = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

/// Square-normalized temporal envelope with compact support.
#[derive(Clone)]
pub struct WavePacket {
    envelope: Envelope,
    scale: f64,
    support: (f64, f64),
    kind: PacketKind,
}

impl fmt::Debug for WavePacket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WavePacket")
            .field("kind", &self.kind)
            .field("support", &self.support)
            .finish()
    }
}

const QUAD_INTERVALS: usize = 4000;

/// Composite Simpson rule.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

impl WavePacket {
    /// Wraps an arbitrary envelope on `[t_lo, t_hi]`, renormalizing it by quadrature.
    pub fn from_fn<F>(envelope: F, t_lo: f64, t_hi: f64) -> Result<Self>
    where
        F: Fn(f64) -> C64 + Send + Sync + 'static,
    {
        Self::build(Arc::new(envelope), (t_lo, t_hi), PacketKind::Custom)
    }

    fn build(envelope: Envelope, support: (f64, f64), kind: PacketKind) -> Result<Self> {
        let (lo, hi) = support;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Parameter(format!("invalid packet support [{lo}, {hi}]")));
        }
        let mut packet = Self {
            envelope,
            scale: 1.0,
            support,
            kind,
        };
        let norm = packet.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Parameter("packet envelope has zero norm".into()));
        }
        packet.scale = 1.0 / norm.sqrt();
        let check = packet.norm();
        if (check - 1.0).abs() > 1e-8 {
            return Err(Error::Numerical {
                time: lo,
                message: format!("packet normalization failed: {check}"),
            });
        }
        Ok(packet)
    }

    /// Rectangular packet of unit norm on `[t_lo, t_hi]`.
    pub fn flat(t_lo: f64, t_hi: f64) -> Result<Self> {
        Self::build(Arc::new(|_| c(1.0, 0.0)), (t_lo, t_hi), PacketKind::Flat)
    }

    pub fn kind(&self) -> &PacketKind {
        &self.kind
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn envelope(&self, t: f64) -> C64 {
        if t < self.support.0 || t > self.support.1 {
            return c(0.0, 0.0);
        }
        (self.envelope)(t) * self.scale
    }

    pub fn intensity(&self, t: f64) -> f64 {
        self.envelope(t).norm_sqr()
    }

    /// ∫|ξ|² over the support.
    pub fn norm(&self) -> f64 {
        self.integrate(|t| self.intensity(t), self.support.0, self.support.1)
    }

    fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let a = a.max(self.support.0);
        let b = b.min(self.support.1);
        if b <= a {
            return 0.0;
        }
        let span = self.support.1 - self.support.0;
        let intervals = ((QUAD_INTERVALS as f64) * (b - a) / span).ceil() as usize;
        simpson(f, a, b, intervals.max(64))
    }

    /// Fraction of the packet still to arrive after `t`: ∫_t^∞ |ξ(s)|² ds.
    pub fn residual_fraction(&self, t: f64) -> f64 {
        if t <= self.support.0 {
            return 1.0;
        }
        if t >= self.support.1 {
            return 0.0;
        }
        self.integrate(|s| self.intensity(s), t, self.support.1)
            .clamp(0.0, 1.0)
    }

    pub fn mean_time(&self) -> f64 {
        self.integrate(|s| s * self.intensity(s), self.support.0, self.support.1)
    }

    /// Variance of |ξ(t)|² viewed as a distribution over t.
    pub fn time_variance(&self) -> f64 {
        let mu = self.mean_time();
        self.integrate(
            |s| (s - mu) * (s - mu) * self.intensity(s),
            self.support.0,
            self.support.1,
        )
    }

    /// Envelope sampled at the start of every step of `grid`.
    pub fn samples(&self, grid: &TimeGrid) -> PacketSamples {
        let values = (0..grid.steps).map(|k| self.envelope(grid.time(k))).collect();
        PacketSamples::from_values(grid.t_start, grid.dt, values)
    }

    /// Largest sampled |ξ|² on the support.
    pub fn peak_intensity(&self) -> f64 {
        let (lo, hi) = self.support;
        (0..=2000)
            .map(|k| self.intensity(lo + (hi - lo) * k as f64 / 2000.0))
            .fold(0.0, f64::max)
    }
}

/// Gaussian packet ξ(t) = (Δ²/2π)^{1/4} exp(−Δ²(t − t₀)²/4) with Δ = Δ_ω/Γ,
/// truncated where the two-sided tail holds less than 1e-12 of the norm.
pub fn make_gaussian_wavepacket(bandwidth_ratio: f64, center: f64) -> Result<WavePacket> {
    if !(bandwidth_ratio > 0.0) || !bandwidth_ratio.is_finite() {
        return Err(Error::Parameter(format!(
            "bandwidth ratio must be positive, got {bandwidth_ratio}"
        )));
    }
    if !center.is_finite() {
        return Err(Error::Parameter("packet center must be finite".into()));
    }
    let bw = bandwidth_ratio;
    let sigma = 1.0 / bw;
    let half_width = sigma * std::f64::consts::SQRT_2 * erfc_inv(1e-12);
    let amp = (bw * bw / (2.0 * std::f64::consts::PI)).powf(0.25);
    WavePacket::build(
        Arc::new(move |t: f64| {
            let x = t - center;
            c(amp * (-bw * bw * x * x / 4.0).exp(), 0.0)
        }),
        (center - half_width, center + half_width),
        PacketKind::Gaussian {
            bandwidth_ratio,
            center,
        },
    )
}

pub fn residual_fraction(packet: &WavePacket, t: f64) -> f64 {
    packet.residual_fraction(t)
}

/// Uniform time grid; step `k` covers `[t_start + k dt, t_start + (k+1) dt]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
        }
        if !(t_start.is_finite() && t_end.is_finite() && t_start < t_end) {
            return Err(Error::Parameter(format!(
                "grid requires t_start < t_end, got [{t_start}, {t_end}]"
            )));
        }
        let steps = ((t_end - t_start) / dt).round();
        if steps < 1.0 || steps > 1e9 {
            return Err(Error::Parameter(format!("grid has {steps} steps")));
        }
        Ok(Self {
            t_start,
            dt,
            steps: steps as usize,
        })
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.steps)
    }
}

/// Envelope values on a grid. The samples never carry more than one photon's
/// worth of probability: if Σ|ξ_k|²dt exceeds 1 they are rescaled.
#[derive(Clone, Debug, PartialEq)]
pub struct PacketSamples {
    pub t_start: f64,
    pub dt: f64,
    values: Vec<C64>,
}

impl PacketSamples {
    pub fn from_values(t_start: f64, dt: f64, mut values: Vec<C64>) -> Self {
        let total: f64 = values.iter().map(|x| x.norm_sqr()).sum::<f64>() * dt;
        if total > 1.0 {
            let s = 1.0 / total.sqrt();
            for v in values.iter_mut() {
                *v *= s;
            }
        }
        Self { t_start, dt, values }
    }

    /// ξ at step `k`; zero beyond the sampled range.
    pub fn get(&self, k: usize) -> C64 {
        self.values.get(k).copied().unwrap_or(c(0.0, 0.0))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn peak_intensity(&self) -> f64 {
        self.values.iter().map(|x| x.norm_sqr()).fold(0.0, f64::max)
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }
}
