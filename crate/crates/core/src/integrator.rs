//! Time stepping of the ladder under a detection scheme.
//!
//! Each conditioned step is a completely positive map on the stacked ladder.
//! The incoming slice of the packet (amplitude `ξ(t)√dt`) is split off first,
//! then every measurement branch `R` acts as `K_R P̸ K_R†` with
//!
//! ```text
//! K_∅ = (1 − dt G) ⊗ 1 − ξ dt L†S ⊗ a†           G = iH + ½L†L
//! K_J = √dt L ⊗ 1 + ξ√dt (S − dt G) ⊗ a†
//! ```
//!
//! and the branch is renormalized by its field-weighted trace. Expanding to
//! first order in dt gives the coupled counting, homodyne and heterodyne
//! equations; keeping the map in this form keeps every branch positive.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, SQRT_2};

use num_complex::Complex64;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::generators;
use crate::hierarchy::{init_hierarchy, BlockTriangle, HierarchyState};
use crate::ladder::{self, LadderOp, LadderWorkspace};
use crate::linalg::{self, c, CMat, C64, I};
use crate::record::{Detection, Outcome, OutcomeMode, Scheme, TrajectoryRecord};
use crate::system::{BathChannel, FieldState, PacketSamples, SystemOperators, TimeGrid, WavePacket};

/// Largest allowed dt·(‖L†L‖ + N max|ξ|²).
pub const STEP_BOUND: f64 = 0.01;
const INFEASIBLE: f64 = 1e-14;
const TRACE_DRIFT: f64 = 1e-6;
const QUADRANTS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];

/// Everything needed to run one trajectory or an ensemble.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub system: SystemOperators,
    pub initial_state: CMat,
    pub packet: WavePacket,
    pub field: FieldState,
    pub baths: Vec<BathChannel>,
    pub detection: Detection,
    pub grid: TimeGrid,
}

impl Scenario {
    pub fn initial_hierarchy(&self) -> Result<HierarchyState> {
        Ok(init_hierarchy(&self.initial_state, self.field.max_photons())?.at_time(self.grid.t_start))
    }

    pub fn samples(&self) -> PacketSamples {
        self.packet.samples(&self.grid)
    }

    /// dt·(‖L†L‖ + N max|ξ|²) for this grid.
    pub fn step_load(&self) -> f64 {
        step_load(&self.system, &self.field, &self.samples(), self.grid.dt)
    }
}

pub fn step_load(sys: &SystemOperators, field: &FieldState, samples: &PacketSamples, dt: f64) -> f64 {
    dt * (sys.emission_rate() + field.max_photons() as f64 * samples.peak_intensity())
}

/// Default dt: min(10⁻³/‖L†L‖, 10⁻³/Δ_ω).
pub fn default_dt(sys: &SystemOperators, bandwidth: Option<f64>) -> f64 {
    let mut dt = f64::INFINITY;
    let rate = sys.emission_rate();
    if rate > 0.0 {
        dt = dt.min(1e-3 / rate);
    }
    if let Some(bw) = bandwidth.filter(|b| *b > 0.0) {
        dt = dt.min(1e-3 / bw);
    }
    if dt.is_finite() {
        dt
    } else {
        1e-3
    }
}

/// Result of one stochastic step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub outcome: Outcome,
    /// Probability of a discrete outcome, or the density of a Gaussian increment.
    pub probability: f64,
    /// Outcome minus its conditional expectation, per channel.
    pub innovation: [f64; 2],
    /// Field-weighted trace of the unnormalized branch.
    pub normalization: f64,
    /// Pre-step K_φ (diffusive schemes only).
    pub currents: [f64; 2],
}

/// Where outcomes come from.
pub enum Source<'a> {
    Sample(&'a mut dyn RngCore),
    Replay(Outcome),
}

/// Per-trajectory stepping engine with reusable buffers.
pub struct Stepper {
    system: SystemOperators,
    field: FieldState,
    detection: Detection,
    dt: f64,
    generator: CMat,
    coupling_dag_scat: CMat,
    bath_drift: Option<CMat>,
    bath_jumps: Vec<CMat>,
    ws: LadderWorkspace,
    scratch: BlockTriangle,
}

impl Stepper {
    pub fn new(
        system: &SystemOperators,
        field: &FieldState,
        baths: &[BathChannel],
        detection: Detection,
        dt: f64,
    ) -> Result<Self> {
        let detection = Detection::new(detection.scheme, detection.efficiency, detection.mode)?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
        }
        let d = system.dim();
        for b in baths {
            if b.coupling.nrows() != d {
                return Err(Error::Validation("bath coupling dimension mismatch".into()));
            }
        }
        let l = system.coupling();
        let generator = system.hamiltonian() * I + (l.adjoint() * l).scale(0.5);
        let bath_jumps: Vec<CMat> = baths
            .iter()
            .flat_map(|b| b.jump_operators())
            .filter(|j| linalg::max_abs(j) > 0.0)
            .collect();
        let bath_drift = if bath_jumps.is_empty() {
            None
        } else {
            let mut sum = linalg::zeros(d);
            for j in &bath_jumps {
                sum += j.adjoint() * j;
            }
            Some(linalg::identity(d) - sum.scale(0.5 * dt))
        };
        let n_max = field.max_photons();
        Ok(Self {
            system: system.clone(),
            field: field.clone(),
            detection,
            dt,
            generator,
            coupling_dag_scat: l.adjoint() * system.scattering(),
            bath_drift,
            bath_jumps,
            ws: LadderWorkspace::new(n_max, d),
            scratch: BlockTriangle::zeros(n_max, d),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn detection(&self) -> Detection {
        self.detection
    }

    /// No-count and count operators for envelope value `xi`.
    pub fn kraus_pair(&self, xi: C64) -> (LadderOp, LadderOp) {
        let d = self.system.dim();
        let dt = self.dt;
        let sdt = dt.sqrt();
        let drift = linalg::identity(d) - &self.generator * c(dt, 0.0);
        let empty = LadderOp::new(drift, &self.coupling_dag_scat * (-xi * dt));
        let jump = LadderOp::new(
            self.system.coupling() * c(sdt, 0.0),
            (self.system.scattering() - &self.generator * c(dt, 0.0)) * (xi * sdt),
        );
        (empty, jump)
    }

    /// Thermal channels, applied as `M P M† + dt Σ J P J†` blockwise.
    pub fn bath_operators(&self) -> Option<(&CMat, &[CMat])> {
        self.bath_drift.as_ref().map(|m| (m, self.bath_jumps.as_slice()))
    }

    fn apply_baths(&self, p: &mut BlockTriangle) {
        let Some(m) = &self.bath_drift else { return };
        let md = m.adjoint();
        let jd: Vec<CMat> = self.bath_jumps.iter().map(|j| j.adjoint()).collect();
        for b in p.blocks_mut() {
            let mut out = m * &*b * &md;
            for (j, jdag) in self.bath_jumps.iter().zip(jd.iter()) {
                out += j * &*b * jdag * c(self.dt, 0.0);
            }
            *b = out;
        }
    }

    fn weighted_trace(&self, q: &LadderOp, p: &BlockTriangle) -> f64 {
        ladder::sandwich_weighted_trace(q, p, &self.field)
    }

    /// Quadrature currents K_φ needed by the diffusive schemes, from the
    /// pre-step state.
    pub fn currents(&self, h: &HierarchyState, xi: C64) -> Result<[f64; 2]> {
        Ok(match self.detection.scheme {
            Scheme::Counting => [0.0, 0.0],
            Scheme::Homodyne { phase } => {
                [generators::expected_current(h, &self.system, xi, phase, &self.field)?, 0.0]
            }
            Scheme::Heterodyne => [
                generators::expected_current(h, &self.system, xi, 0.0, &self.field)?,
                generators::expected_current(h, &self.system, xi, FRAC_PI_2, &self.field)?,
            ],
        })
    }

    /// Weighted operators `(K, w)` whose sum `Σ w K P̸ K†` is the unnormalized
    /// branch for `outcome`. `currents` are the pre-step K_φ values.
    pub fn branch_operators(
        &self,
        xi: C64,
        outcome: Outcome,
        currents: [f64; 2],
    ) -> Result<Vec<(LadderOp, f64)>> {
        let dt = self.dt;
        let sdt = dt.sqrt();
        let eta = self.detection.efficiency;
        let (empty, jump) = self.kraus_pair(xi);
        let mut out = Vec::with_capacity(2);
        let loss = |out: &mut Vec<(LadderOp, f64)>, jump: LadderOp, w: f64| {
            if eta < 1.0 {
                out.push((jump, w * (1.0 - eta)));
            }
        };
        match (self.detection.scheme, self.detection.mode, outcome) {
            (Scheme::Counting, _, Outcome::Count(1)) => out.push((jump, 1.0)),
            (Scheme::Counting, _, Outcome::Count(0)) => {
                out.push((empty, 1.0));
                loss(&mut out, jump, 1.0);
            }
            (Scheme::Homodyne { phase }, OutcomeMode::Gaussian, Outcome::Current(dj)) => {
                let k = currents[0];
                let y = eta.sqrt() * (dj - k * dt) + eta * k * dt;
                let coef = Complex64::from_polar(y / sdt, -phase);
                out.push((empty.combine(c(1.0, 0.0), &jump, coef), 1.0));
                loss(&mut out, jump, 1.0);
            }
            (Scheme::Homodyne { phase }, OutcomeMode::Binary, Outcome::Current(dj)) if dj != 0.0 => {
                let sign = if dj > 0.0 { 1.0 } else { -1.0 };
                let e = Complex64::from_polar(sign * eta.sqrt(), -phase);
                out.push((empty.combine(c(FRAC_1_SQRT_2, 0.0), &jump, e * FRAC_1_SQRT_2), 1.0));
                loss(&mut out, jump, 0.5);
            }
            (Scheme::Heterodyne, OutcomeMode::Gaussian, Outcome::Currents(a, b)) => {
                let y0 = eta.sqrt() * (a - currents[0] * dt / SQRT_2) + eta * currents[0] * dt / SQRT_2;
                let y1 = eta.sqrt() * (b - currents[1] * dt / SQRT_2) + eta * currents[1] * dt / SQRT_2;
                let z = c(y0, -y1) / (SQRT_2 * sdt);
                out.push((empty.combine(c(1.0, 0.0), &jump, z), 1.0));
                loss(&mut out, jump, 1.0);
            }
            (Scheme::Heterodyne, OutcomeMode::Binary, Outcome::Currents(a, b)) if a != 0.0 && b != 0.0 => {
                let s = if a > 0.0 { 1.0 } else { -1.0 };
                let r = if b > 0.0 { 1.0 } else { -1.0 };
                let z = c(s, -r) * (eta.sqrt() * 0.5 * FRAC_1_SQRT_2);
                out.push((empty.combine(c(0.5, 0.0), &jump, z), 1.0));
                loss(&mut out, jump, 0.25);
            }
            (_, _, o) => return Err(mismatch(o, self.detection.scheme_name())),
        }
        Ok(out)
    }

    /// Chooses the outcome for one step on the already split ladder `p`.
    fn choose(
        &self,
        p: &BlockTriangle,
        xi: C64,
        currents: [f64; 2],
        source: Source<'_>,
        t: f64,
    ) -> Result<(Outcome, f64, [f64; 2])> {
        let dt = self.dt;
        let sdt = dt.sqrt();
        let eta = self.detection.efficiency;
        let (empty, jump) = self.kraus_pair(xi);
        let t_jump = self.weighted_trace(&jump, p);
        let feasible = |prob: f64| if prob < INFEASIBLE { Err(infeasible(t, prob)) } else { Ok(prob) };
        match (self.detection.scheme, self.detection.mode) {
            (Scheme::Counting, _) => {
                let t_empty = self.weighted_trace(&empty, p);
                let p_jump = check_probability(eta * t_jump / (t_empty + t_jump), t)?;
                let n = match source {
                    Source::Sample(rng) => u8::from(rng.random::<f64>() < p_jump),
                    Source::Replay(Outcome::Count(n)) if n <= 1 => n,
                    Source::Replay(o) => return Err(mismatch(o, "counting")),
                };
                let prob = feasible(if n == 1 { p_jump } else { 1.0 - p_jump })?;
                Ok((Outcome::Count(n), prob, [n as f64 - p_jump, 0.0]))
            }
            (Scheme::Homodyne { .. }, OutcomeMode::Gaussian) => {
                let k = currents[0];
                let dj = match source {
                    Source::Sample(rng) => k * dt + rng.sample::<f64, _>(StandardNormal) * sdt,
                    Source::Replay(Outcome::Current(dj)) => dj,
                    Source::Replay(o) => return Err(mismatch(o, "homodyne")),
                };
                let dw = dj - k * dt;
                Ok((Outcome::Current(dj), gaussian_density(dw, dt), [dw, 0.0]))
            }
            (Scheme::Homodyne { phase }, OutcomeMode::Binary) => {
                let e = Complex64::from_polar(eta.sqrt() * FRAC_1_SQRT_2, -phase);
                let half = c(FRAC_1_SQRT_2, 0.0);
                let lost = 0.5 * (1.0 - eta) * t_jump;
                let tp = self.weighted_trace(&empty.combine(half, &jump, e), p) + lost;
                let tm = self.weighted_trace(&empty.combine(half, &jump, -e), p) + lost;
                let p_plus = check_probability(tp / (tp + tm), t)?;
                let up = match source {
                    Source::Sample(rng) => rng.random::<f64>() < p_plus,
                    Source::Replay(Outcome::Current(dj)) if dj != 0.0 => dj > 0.0,
                    Source::Replay(o) => return Err(mismatch(o, "binary homodyne")),
                };
                let prob = feasible(if up { p_plus } else { 1.0 - p_plus })?;
                let dj = if up { sdt } else { -sdt };
                Ok((Outcome::Current(dj), prob, [dj - sdt * (2.0 * p_plus - 1.0), 0.0]))
            }
            (Scheme::Heterodyne, OutcomeMode::Gaussian) => {
                let (a, b) = match source {
                    Source::Sample(rng) => (
                        currents[0] * dt / SQRT_2 + rng.sample::<f64, _>(StandardNormal) * sdt,
                        currents[1] * dt / SQRT_2 + rng.sample::<f64, _>(StandardNormal) * sdt,
                    ),
                    Source::Replay(Outcome::Currents(a, b)) => (a, b),
                    Source::Replay(o) => return Err(mismatch(o, "heterodyne")),
                };
                let dw0 = a - currents[0] * dt / SQRT_2;
                let dw1 = b - currents[1] * dt / SQRT_2;
                let density = gaussian_density(dw0, dt) * gaussian_density(dw1, dt);
                Ok((Outcome::Currents(a, b), density, [dw0, dw1]))
            }
            (Scheme::Heterodyne, OutcomeMode::Binary) => {
                let lost = 0.25 * (1.0 - eta) * t_jump;
                let weights: Vec<f64> = QUADRANTS
                    .iter()
                    .map(|&(s, r)| {
                        let z = c(s, -r) * (eta.sqrt() * 0.5 * FRAC_1_SQRT_2);
                        self.weighted_trace(&empty.combine(c(0.5, 0.0), &jump, z), p) + lost
                    })
                    .collect();
                let total: f64 = weights.iter().sum();
                let probs: Vec<f64> = weights
                    .iter()
                    .map(|w| check_probability(w / total, t))
                    .collect::<Result<_>>()?;
                let idx = match source {
                    Source::Sample(rng) => {
                        let u = rng.random::<f64>();
                        let mut acc = 0.0;
                        probs
                            .iter()
                            .position(|p| {
                                acc += p;
                                u < acc
                            })
                            .unwrap_or(3)
                    }
                    Source::Replay(Outcome::Currents(a, b)) if a != 0.0 && b != 0.0 => QUADRANTS
                        .iter()
                        .position(|&(s, r)| (s > 0.0) == (a > 0.0) && (r > 0.0) == (b > 0.0))
                        .unwrap_or(0),
                    Source::Replay(o) => return Err(mismatch(o, "binary heterodyne")),
                };
                let prob = feasible(probs[idx])?;
                let (s, r) = QUADRANTS[idx];
                let mean0: f64 = QUADRANTS.iter().zip(&probs).map(|(q, p)| q.0 * p).sum();
                let mean1: f64 = QUADRANTS.iter().zip(&probs).map(|(q, p)| q.1 * p).sum();
                Ok((
                    Outcome::Currents(s * sdt, r * sdt),
                    prob,
                    [sdt * (s - mean0), sdt * (r - mean1)],
                ))
            }
        }
    }

    /// Advances `h` by one step, reading or sampling the outcome.
    pub fn step(&mut self, h: &mut HierarchyState, xi: C64, source: Source<'_>) -> Result<StepOutcome> {
        let t = h.time;
        let currents = self.currents(h, xi)?;
        self.apply_baths(&mut h.blocks);
        ladder::cut_mut(&mut h.blocks, xi.norm_sqr() * self.dt);
        let (outcome, probability, innovation) = self.choose(&h.blocks, xi, currents, source, t)?;
        let branches = self.branch_operators(xi, outcome, currents)?;

        for b in self.scratch.blocks_mut() {
            b.fill(c(0.0, 0.0));
        }
        for (q, w) in &branches {
            ladder::sandwich_acc(q, &h.blocks, *w, &mut self.scratch, &mut self.ws);
        }
        let norm = self.scratch.weighted_trace(&self.field);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::numerical(t, format!("branch weight {norm} is not positive")));
        }
        std::mem::swap(&mut h.blocks, &mut self.scratch);
        h.blocks.scale_mut(1.0 / norm);
        h.blocks.symmetrize_diagonal();
        h.time = t + self.dt;
        Ok(StepOutcome {
            outcome,
            probability,
            innovation,
            normalization: norm,
            currents,
        })
    }

    /// Mean over all outcomes of one step, normalized; the exact ensemble
    /// average of the conditioned update.
    pub fn mean_step(&mut self, h: &mut HierarchyState, xi: C64) -> Result<()> {
        self.apply_baths(&mut h.blocks);
        ladder::cut_mut(&mut h.blocks, xi.norm_sqr() * self.dt);
        let (empty, jump) = self.kraus_pair(xi);
        for b in self.scratch.blocks_mut() {
            b.fill(c(0.0, 0.0));
        }
        ladder::sandwich_acc(&empty, &h.blocks, 1.0, &mut self.scratch, &mut self.ws);
        ladder::sandwich_acc(&jump, &h.blocks, 1.0, &mut self.scratch, &mut self.ws);
        let norm = self.scratch.weighted_trace(&self.field);
        std::mem::swap(&mut h.blocks, &mut self.scratch);
        h.blocks.scale_mut(1.0 / norm);
        h.blocks.symmetrize_diagonal();
        h.time += self.dt;
        Ok(())
    }
}

fn gaussian_density(x: f64, var: f64) -> f64 {
    (-x * x / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

fn check_probability(p: f64, time: f64) -> Result<f64> {
    if !p.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&p) {
        return Err(Error::numerical(time, format!("outcome probability {p} outside [0, 1]")));
    }
    Ok(p.clamp(0.0, 1.0))
}

fn mismatch(o: Outcome, scheme: &str) -> Error {
    Error::Validation(format!("record entry {o:?} does not fit {scheme} detection"))
}

fn infeasible(time: f64, p: f64) -> Error {
    Error::InfeasibleRecord {
        step: 0,
        message: format!("outcome at t = {time} has probability {p:e}"),
    }
}

fn stepper_for(scenario: &Scenario, detection: Detection) -> Result<Stepper> {
    Stepper::new(
        &scenario.system,
        &scenario.field,
        &scenario.baths,
        detection,
        scenario.grid.dt,
    )
}

fn one_step(
    h: &mut HierarchyState,
    scenario: &Scenario,
    detection: Detection,
    xi: C64,
    source: Source<'_>,
) -> Result<StepOutcome> {
    stepper_for(scenario, detection)?.step(h, xi, source)
}

/// One photon-counting step.
pub fn step_counting(
    h: &mut HierarchyState,
    scenario: &Scenario,
    xi: C64,
    efficiency: f64,
    source: Source<'_>,
) -> Result<StepOutcome> {
    one_step(h, scenario, Detection::counting().with_efficiency(efficiency), xi, source)
}

/// One homodyne step at phase φ.
pub fn step_homodyne(
    h: &mut HierarchyState,
    scenario: &Scenario,
    xi: C64,
    phase: f64,
    efficiency: f64,
    mode: OutcomeMode,
    source: Source<'_>,
) -> Result<StepOutcome> {
    let det = Detection::homodyne(phase).with_efficiency(efficiency).with_mode(mode);
    one_step(h, scenario, det, xi, source)
}

/// One heterodyne step.
pub fn step_heterodyne(
    h: &mut HierarchyState,
    scenario: &Scenario,
    xi: C64,
    efficiency: f64,
    mode: OutcomeMode,
    source: Source<'_>,
) -> Result<StepOutcome> {
    let det = Detection::heterodyne().with_efficiency(efficiency).with_mode(mode);
    one_step(h, scenario, det, xi, source)
}

fn add_scaled(a: &BlockTriangle, k: &BlockTriangle, f: f64) -> BlockTriangle {
    let mut out = a.clone();
    out.add_scaled(k, f);
    out
}

/// Classical fourth-order step of dρ = 𝒦 dt with ξ evaluated at t, t + dt/2, t + dt.
pub fn step_unconditional(
    h: &HierarchyState,
    sys: &SystemOperators,
    packet: &WavePacket,
    field: &FieldState,
    baths: &[BathChannel],
    dt: f64,
) -> Result<HierarchyState> {
    let t = h.time;
    let gen = |blocks: BlockTriangle, tau: f64| {
        let s = HierarchyState { time: tau, blocks };
        generators::unconditional_generator(&s, sys, packet.envelope(tau), baths)
    };
    let k1 = gen(h.blocks.clone(), t);
    let k2 = gen(add_scaled(&h.blocks, &k1, 0.5 * dt), t + 0.5 * dt);
    let k3 = gen(add_scaled(&h.blocks, &k2, 0.5 * dt), t + 0.5 * dt);
    let k4 = gen(add_scaled(&h.blocks, &k3, dt), t + dt);
    let mut blocks = h.blocks.clone();
    blocks.add_scaled(&k1, dt / 6.0);
    blocks.add_scaled(&k2, dt / 3.0);
    blocks.add_scaled(&k3, dt / 3.0);
    blocks.add_scaled(&k4, dt / 6.0);
    blocks.symmetrize_diagonal();
    let next = HierarchyState { time: t + dt, blocks };
    let drift = (next.weighted_trace(field) - 1.0).abs();
    if drift > TRACE_DRIFT || !drift.is_finite() {
        return Err(Error::numerical(
            t,
            format!("trace drifted by {drift:e}; reduce dt"),
        ));
    }
    Ok(next)
}

/// Unconditional evolution over the scenario grid, one state per grid point.
pub fn solve_master_equation(scenario: &Scenario) -> Result<Vec<HierarchyState>> {
    let mut h = scenario.initial_hierarchy()?;
    let mut out = Vec::with_capacity(scenario.grid.steps + 1);
    out.push(h.clone());
    for k in 0..scenario.grid.steps {
        h = step_unconditional(
            &h,
            &scenario.system,
            &scenario.packet,
            &scenario.field,
            &scenario.baths,
            scenario.grid.dt,
        )?;
        h.time = scenario.grid.time(k + 1);
        out.push(h.clone());
    }
    Ok(out)
}

/// How a trajectory obtains its outcomes.
#[derive(Clone, Copy, Debug)]
pub enum Drive<'a> {
    Seed(u64),
    Record(&'a TrajectoryRecord),
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Skip the dt·(‖L†L‖ + N max|ξ|²) ≤ 0.01 check.
    pub relaxed_step_bound: bool,
}

/// What an observer sees at each grid point.
pub struct StepView<'a> {
    pub step: usize,
    pub state: &'a HierarchyState,
    pub xi: C64,
    pub counts: usize,
    pub outcome: Option<&'a StepOutcome>,
}

fn check_record(record: &TrajectoryRecord, scenario: &Scenario) -> Result<()> {
    record.validate()?;
    let (a, b) = (record.detection, scenario.detection);
    let same_scheme = match (a.scheme, b.scheme) {
        (Scheme::Counting, Scheme::Counting) | (Scheme::Heterodyne, Scheme::Heterodyne) => true,
        (Scheme::Homodyne { phase: p }, Scheme::Homodyne { phase: q }) => (p - q).abs() < 1e-12,
        _ => false,
    };
    let diffusive = !matches!(a.scheme, Scheme::Counting);
    if !same_scheme || (diffusive && a.mode != b.mode) {
        return Err(Error::Validation(format!(
            "record scheme {} does not match scenario detection {}",
            a.scheme_name(),
            b.scheme_name()
        )));
    }
    if (record.dt - scenario.grid.dt).abs() > 1e-12 * scenario.grid.dt.max(1.0) {
        return Err(Error::Validation(format!(
            "record dt {} differs from grid dt {}",
            record.dt, scenario.grid.dt
        )));
    }
    Ok(())
}

/// Runs one trajectory, calling `observer` at every grid point (including the
/// initial state). Returns the measurement record.
pub fn run_trajectory_with<F>(
    scenario: &Scenario,
    drive: Drive<'_>,
    samples: &PacketSamples,
    options: RunOptions,
    mut observer: F,
) -> Result<TrajectoryRecord>
where
    F: FnMut(&StepView<'_>) -> Result<()>,
{
    use rand::SeedableRng;
    let grid = scenario.grid;
    if !options.relaxed_step_bound {
        let load = step_load(&scenario.system, &scenario.field, samples, grid.dt);
        if load > STEP_BOUND {
            return Err(Error::numerical(
                grid.t_start,
                format!("dt·(‖L†L‖ + N max|ξ|²) = {load:.3e} exceeds {STEP_BOUND}; reduce dt"),
            ));
        }
    }
    let detection = match drive {
        Drive::Record(r) => {
            check_record(r, scenario)?;
            Detection { efficiency: r.detection.efficiency, ..scenario.detection }
        }
        Drive::Seed(_) => scenario.detection,
    };
    let seed = match drive {
        Drive::Seed(s) => Some(s),
        Drive::Record(r) => r.seed,
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
    let mut stepper = stepper_for(scenario, detection)?;
    let mut h = scenario.initial_hierarchy()?;
    let mut record = TrajectoryRecord::new(detection, grid.dt, grid.t_start, seed);
    record.entries.reserve(grid.steps);
    let mut counts = 0usize;
    observer(&StepView {
        step: 0,
        state: &h,
        xi: samples.get(0),
        counts,
        outcome: None,
    })?;
    for k in 0..grid.steps {
        let xi = samples.get(k);
        let source = match drive {
            Drive::Seed(_) => Source::Sample(&mut rng),
            Drive::Record(r) => Source::Replay(
                *r.entries.get(k).ok_or(Error::RecordExhausted(r.entries.len()))?,
            ),
        };
        let out = stepper.step(&mut h, xi, source).map_err(|e| match e {
            Error::InfeasibleRecord { message, .. } => Error::InfeasibleRecord { step: k, message },
            other => other,
        })?;
        h.time = grid.time(k + 1);
        counts += out.outcome.count() as usize;
        record.entries.push(out.outcome);
        observer(&StepView {
            step: k + 1,
            state: &h,
            xi: samples.get(k + 1),
            counts,
            outcome: Some(&out),
        })?;
    }
    Ok(record)
}

/// Full trajectory with all states kept.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<HierarchyState>,
    pub outcomes: Vec<StepOutcome>,
    pub record: TrajectoryRecord,
}

pub fn run_trajectory(scenario: &Scenario, drive: Drive<'_>) -> Result<Trajectory> {
    run_trajectory_opts(scenario, drive, RunOptions::default())
}

pub fn run_trajectory_opts(
    scenario: &Scenario,
    drive: Drive<'_>,
    options: RunOptions,
) -> Result<Trajectory> {
    let samples = scenario.samples();
    let mut states = Vec::with_capacity(scenario.grid.steps + 1);
    let mut outcomes = Vec::with_capacity(scenario.grid.steps);
    let record = run_trajectory_with(scenario, drive, &samples, options, |v| {
        states.push(v.state.clone());
        if let Some(o) = v.outcome {
            outcomes.push(*o);
        }
        Ok(())
    })?;
    Ok(Trajectory {
        states,
        outcomes,
        record,
    })
}

/// Deterministic per-trajectory seed: `base + i·0x9E3779B97F4A7C15` (wrapping).
/// Trajectory 0 uses the base seed itself.
pub fn trajectory_seed(base_seed: u64, index: u64) -> u64 {
    base_seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}
