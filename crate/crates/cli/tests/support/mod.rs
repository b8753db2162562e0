//! Reference filters written directly on the system density matrix, with no
//! photon ladder: a Kraus-form vacuum filter and the exact coherent-drive
//! filter built on it.

#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Mat = DMatrix<C64>;

pub fn cx(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real(rows: &[&[f64]]) -> Mat {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| cx(rows[i][j], 0.0))
}

fn tr(m: &Mat) -> C64 {
    m.diagonal().sum()
}

/// Operators (H, L) for one step.
pub type StepOps = (Mat, Mat);

/// Reference measurement: counting, or homodyne with Gaussian increments.
#[derive(Clone, Copy, Debug)]
pub enum Meas {
    Counting,
    Homodyne(f64),
}

/// Outcome of one step: a count (0/1) or a current increment dJ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Obs {
    Count(u8),
    Current(f64),
}

/// Vacuum-input filter, first-order Kraus form:
/// no count M₀ = I − dt(iH + ½L†L), count M₁ = √dt L,
/// homodyne K = M₀ + dJ e^{−iφ} L with dJ = ⟨e^{−iφ}L + e^{iφ}L†⟩dt + dW.
pub struct VacuumFilter {
    pub dt: f64,
    pub meas: Meas,
}

impl VacuumFilter {
    fn drift(&self, (h, l): &StepOps) -> Mat {
        let d = h.nrows();
        let g = h * cx(0.0, 1.0) + (l.adjoint() * l) * cx(0.5, 0.0);
        Mat::identity(d, d) - g * cx(self.dt, 0.0)
    }

    pub fn jump_probability(&self, rho: &Mat, ops: &StepOps) -> f64 {
        let m0 = self.drift(ops);
        let m1 = &ops.1 * cx(self.dt.sqrt(), 0.0);
        let t0 = tr(&(&m0 * rho * m0.adjoint())).re;
        let t1 = tr(&(&m1 * rho * m1.adjoint())).re;
        t1 / (t0 + t1)
    }

    pub fn current(&self, rho: &Mat, ops: &StepOps) -> f64 {
        let Meas::Homodyne(phase) = self.meas else { return 0.0 };
        let e = C64::from_polar(1.0, -phase);
        let x = &ops.1 * e + ops.1.adjoint() * e.conj();
        tr(&(x * rho)).re
    }

    /// Conditions `rho` on `obs` and returns the normalized state.
    pub fn update(&self, rho: &Mat, ops: &StepOps, obs: Obs) -> Mat {
        let k = match (self.meas, obs) {
            (Meas::Counting, Obs::Count(1)) => &ops.1 * cx(self.dt.sqrt(), 0.0),
            (Meas::Counting, Obs::Count(_)) => self.drift(ops),
            (Meas::Homodyne(phase), Obs::Current(dj)) => {
                self.drift(ops) + &ops.1 * C64::from_polar(dj, -phase)
            }
            (m, o) => panic!("outcome {o:?} does not fit {m:?}"),
        };
        let out = &k * rho * k.adjoint();
        let out = (&out + out.adjoint()) * cx(0.5, 0.0);
        let n = tr(&out).re;
        out / cx(n, 0.0)
    }

    /// Samples a record; returns it with the states before and after each step.
    pub fn sample(&self, rho0: &Mat, ops: &[StepOps], seed: u64) -> (Vec<Obs>, Vec<Mat>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rho = rho0.clone();
        let mut states = vec![rho.clone()];
        let mut record = Vec::with_capacity(ops.len());
        for op in ops {
            let obs = match self.meas {
                Meas::Counting => Obs::Count(u8::from(rng.random::<f64>() < self.jump_probability(&rho, op))),
                Meas::Homodyne(_) => {
                    let w: f64 = rng.sample(StandardNormal);
                    Obs::Current(self.current(&rho, op) * self.dt + w * self.dt.sqrt())
                }
            };
            rho = self.update(&rho, op, obs);
            states.push(rho.clone());
            record.push(obs);
        }
        (record, states)
    }

    pub fn replay(&self, rho0: &Mat, ops: &[StepOps], record: &[Obs]) -> Vec<Mat> {
        let mut rho = rho0.clone();
        let mut states = vec![rho.clone()];
        for (op, obs) in ops.iter().zip(record) {
            rho = self.update(&rho, op, *obs);
            states.push(rho.clone());
        }
        states
    }
}

/// Per-step operators when a coherent amplitude β_k = α ξ_k drives a system
/// with unit scattering: L' = L + β, H' = H + (β L† − β* L)/(2i).
pub fn coherent_drive_ops(h: &Mat, l: &Mat, beta: &[C64]) -> Vec<StepOps> {
    let d = h.nrows();
    let id = Mat::identity(d, d);
    beta.iter()
        .map(|&b| {
            let lp = l + &id * b;
            let hp = h + (l.adjoint() * b - l * b.conj()) * cx(0.0, -0.5);
            (hp, lp)
        })
        .collect()
}

pub fn bloch(rho: &Mat) -> [f64; 3] {
    let r01 = rho[(0, 1)];
    // basis (g, e)
    [2.0 * r01.re, 2.0 * r01.im, (rho[(1, 1)] - rho[(0, 0)]).re]
}

pub fn bloch_distance(a: &Mat, b: &Mat) -> f64 {
    let (x, y) = (bloch(a), bloch(b));
    ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt()
}

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

/// One line per state: step, then re/im of each entry in row-major order.
pub fn states_to_csv(states: &[Mat]) -> String {
    let mut s = String::new();
    for (k, rho) in states.iter().enumerate() {
        s.push_str(&k.to_string());
        for i in 0..rho.nrows() {
            for j in 0..rho.ncols() {
                let z = rho[(i, j)];
                s.push_str(&format!(",{:.16e},{:.16e}", z.re, z.im));
            }
        }
        s.push('\n');
    }
    s
}

pub fn states_from_csv(text: &str, d: usize) -> Vec<Mat> {
    text.lines()
        .map(|line| {
            let v: Vec<f64> = line.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
            assert_eq!(v.len(), 2 * d * d, "bad fixture line");
            DMatrix::from_fn(d, d, |i, j| cx(v[2 * (i * d + j)], v[2 * (i * d + j) + 1]))
        })
        .collect()
}

// --------------------------------------------------------- vacuum fixtures

/// A driven decaying two-level system with vacuum input; basis (g, e).
pub const VACUUM_DT: f64 = 2e-3;
pub const VACUUM_STEPS: usize = 2500;
pub const VACUUM_SEEDS: [u64; 2] = [11, 12];

pub fn vacuum_ops() -> StepOps {
    let h = real(&[&[0.0, 0.5], &[0.5, 0.0]]);
    let l = real(&[&[0.0, 1.0], &[0.0, 0.0]]);
    (h, l)
}

pub fn vacuum_initial() -> Mat {
    real(&[&[0.0, 0.0], &[0.0, 1.0]])
}

/// Scenario text matching [`vacuum_ops`] with the given detection table.
pub fn vacuum_scenario_text(detection: &str) -> String {
    format!(
        "name = \"vacuum-driven\"\ninitial_state = \"excited\"\n\n\
         [system]\nkind = \"custom\"\ncoupling = {{ re = [[0.0, 1.0], [0.0, 0.0]] }}\n\
         hamiltonian = {{ re = [[0.0, 0.5], [0.5, 0.0]] }}\n\n\
         [packet]\nkind = \"gaussian\"\nbandwidth = 1.0\ncenter = 0.0\n\n\
         [field]\nkind = \"vacuum\"\n\n[detection]\n{detection}\n\n\
         [grid]\nt_start = 0.0\nt_end = {}\ndt = {VACUUM_DT}\n",
        VACUUM_DT * VACUUM_STEPS as f64
    )
}

pub struct VacuumCase {
    pub name: &'static str,
    pub meas: Meas,
    pub detection: &'static str,
    pub seed: u64,
}

pub fn vacuum_cases() -> [VacuumCase; 2] {
    [
        VacuumCase { name: "vacuum_counting", meas: Meas::Counting, detection: "scheme = \"counting\"", seed: VACUUM_SEEDS[0] },
        VacuumCase {
            name: "vacuum_homodyne",
            meas: Meas::Homodyne(0.0),
            detection: "scheme = \"homodyne\"\nphase = 0.0",
            seed: VACUUM_SEEDS[1],
        },
    ]
}

/// Record in the command-line record format.
pub fn record_text(meas: Meas, record: &[Obs], dt: f64, t_start: f64, seed: u64) -> String {
    use fock_sme::record::{Detection, Outcome, TrajectoryRecord};
    let det = match meas {
        Meas::Counting => Detection::counting(),
        Meas::Homodyne(p) => Detection::homodyne(p),
    };
    let mut r = TrajectoryRecord::new(det, dt, t_start, Some(seed));
    r.entries = record
        .iter()
        .map(|o| match *o {
            Obs::Count(n) => Outcome::Count(n),
            Obs::Current(x) => Outcome::Current(x),
        })
        .collect();
    r.to_text()
}

/// Runs the reference filter for a vacuum case: (record text, state CSV).
pub fn generate_vacuum_fixture(case: &VacuumCase) -> (String, String) {
    let f = VacuumFilter { dt: VACUUM_DT, meas: case.meas };
    let ops = vec![vacuum_ops(); VACUUM_STEPS];
    let (record, states) = f.sample(&vacuum_initial(), &ops, case.seed);
    (record_text(case.meas, &record, VACUUM_DT, 0.0, case.seed), states_to_csv(&states))
}
