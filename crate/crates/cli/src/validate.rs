//! Built-in validation suites run by `fock-sme validate`.

use std::fmt::Write as _;

use fock_sme::error::{Error, Result};
use fock_sme::heisenberg::{init_adjoint, AdjointHierarchy, AdjointStepper, Normalization};
use fock_sme::hierarchy::{init_hierarchy, HierarchyState};
use fock_sme::integrator::{run_trajectory_with, trajectory_seed, Drive, RunOptions, Scenario, Source, Stepper};
use fock_sme::linalg::{self, c, CMat};
use fock_sme::record::{Detection, Outcome, OutcomeMode, Scheme, TrajectoryRecord};
use fock_sme::system::TimeGrid;
use fock_sme_oracle::run::DEFAULT_MAX_BINS;
use fock_sme_oracle::{compare_with_hierarchy, OracleOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commands::{csv_column, master_equation};
use crate::scenario::LoadedScenario;

pub const ORACLE_TOLERANCE: f64 = 0.02;
pub const ORACLE_RATIO: (f64, f64) = (1.5, 3.0);
pub const DUALITY_TOLERANCE: f64 = 1e-8;
pub const STATE_TOLERANCE: f64 = 1e-8;
pub const PAIRING_TOLERANCE: f64 = 1e-10;
pub const VARIANCE_BAND: (f64, f64) = (0.95, 1.05);
pub const MIN_INNOVATIONS: usize = 10_000;
/// Floor on the count tolerance, for ensembles whose count spread vanishes.
pub const COUNT_FLOOR: f64 = 1e-3;
/// Records of length at most this are enumerated exhaustively.
const EXHAUSTIVE_BINS: usize = 10;
const SAMPLED_RECORDS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Check {
    Oracle,
    Duality,
    Invariants,
    Statistics,
}

impl Check {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "oracle" => Ok(Check::Oracle),
            "duality" => Ok(Check::Duality),
            "invariants" => Ok(Check::Invariants),
            "statistics" => Ok(Check::Statistics),
            other => Err(Error::Validation(format!("unknown check `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ValidateOptions {
    pub bins: usize,
    pub n_traj: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self { bins: 8, n_traj: 200, steps: 200, seed: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub check: Check,
    pub passed: bool,
    pub text: String,
}

pub fn run_check(loaded: &LoadedScenario, check: Check, opts: &ValidateOptions) -> Result<CheckReport> {
    match check {
        Check::Oracle => oracle_check(&loaded.scenario, opts.bins, opts.seed),
        Check::Duality => duality_check(&loaded.scenario, opts.steps, opts.seed),
        Check::Invariants => invariants_check(&loaded.scenario, opts.n_traj.min(20), opts.seed),
        Check::Statistics => statistics_check(loaded, opts.n_traj, opts.seed),
    }
}

// ---------------------------------------------------------------- oracle

/// The scenario restricted to `bins` equal bins over the packet support.
pub fn binned_scenario(scenario: &Scenario, bins: usize) -> Result<Scenario> {
    let (lo, hi) = scenario.packet.support();
    let mut sc = scenario.clone();
    sc.grid = TimeGrid { t_start: lo, dt: (hi - lo) / bins as f64, steps: bins };
    Ok(sc)
}

fn binary_current(dt: f64, up: bool) -> f64 {
    if up { dt.sqrt() } else { -dt.sqrt() }
}

/// Coarse records for the oracle comparison.
pub fn oracle_records(det: Detection, bins: usize, dt: f64, seed: u64) -> Result<Vec<TrajectoryRecord>> {
    if det.efficiency != 1.0 {
        return Err(Error::Parameter("the oracle check needs efficiency 1".into()));
    }
    if !matches!(det.scheme, Scheme::Counting) && det.mode != OutcomeMode::Binary {
        return Err(Error::Parameter("the oracle check needs binary diffusive outcomes".into()));
    }
    let blank = TrajectoryRecord::new(det, dt, 0.0, None);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    match det.scheme {
        Scheme::Counting => {
            for k in 0..=bins {
                let mut r = blank.clone();
                r.entries = vec![Outcome::Count(0); bins];
                if k < bins {
                    r.entries[k] = Outcome::Count(1);
                }
                out.push(r);
            }
            for _ in 0..SAMPLED_RECORDS.min(1 << bins.min(20)) {
                let mut r = blank.clone();
                r.entries = (0..bins).map(|_| Outcome::Count(u8::from(rng.random::<f64>() < 0.2))).collect();
                out.push(r);
            }
        }
        Scheme::Homodyne { .. } if bins <= EXHAUSTIVE_BINS => {
            for bits in 0..(1usize << bins) {
                let mut r = blank.clone();
                r.entries = (0..bins).map(|k| Outcome::Current(binary_current(dt, bits >> k & 1 == 1))).collect();
                out.push(r);
            }
        }
        Scheme::Homodyne { .. } => {
            for _ in 0..SAMPLED_RECORDS {
                let mut r = blank.clone();
                r.entries = (0..bins).map(|_| Outcome::Current(binary_current(dt, rng.random()))).collect();
                out.push(r);
            }
        }
        Scheme::Heterodyne => {
            for _ in 0..SAMPLED_RECORDS {
                let mut r = blank.clone();
                r.entries = (0..bins)
                    .map(|_| Outcome::Currents(binary_current(dt, rng.random()), binary_current(dt, rng.random())))
                    .collect();
                out.push(r);
            }
        }
    }
    Ok(out)
}

/// Splits each bin in two: a count lands in the first half, diffusive signs repeat.
pub fn refine_record(record: &TrajectoryRecord) -> TrajectoryRecord {
    let dt = record.dt / 2.0;
    let s = dt.sqrt() / record.dt.sqrt();
    let mut r = TrajectoryRecord::new(record.detection, dt, record.t_start, record.seed);
    for o in &record.entries {
        let pair = match *o {
            Outcome::Count(n) => [Outcome::Count(n), Outcome::Count(0)],
            Outcome::Current(x) => [Outcome::Current(x * s); 2],
            Outcome::Currents(a, b) => [Outcome::Currents(a * s, b * s); 2],
        };
        r.entries.extend(pair);
    }
    r
}

/// Worst trace distances over the record family at `bins` and `2·bins`
/// bins. Infeasible records are skipped.
#[derive(Clone, Debug)]
pub struct OracleSummary {
    pub coarse: f64,
    pub fine: f64,
    pub probability_gap: f64,
    pub compared: usize,
    pub skipped: usize,
}

impl OracleSummary {
    pub fn ratio(&self) -> f64 {
        self.coarse / self.fine
    }

    pub fn passed(&self) -> bool {
        let r = self.ratio();
        self.compared > 0 && self.coarse <= ORACLE_TOLERANCE && r >= ORACLE_RATIO.0 && r <= ORACLE_RATIO.1
    }
}

pub fn oracle_summary(scenario: &Scenario, bins: usize, seed: u64) -> Result<OracleSummary> {
    if bins == 0 || bins > DEFAULT_MAX_BINS {
        return Err(Error::Parameter(format!("bins must lie in 1..={DEFAULT_MAX_BINS}")));
    }
    let opts = OracleOptions { max_bins: DEFAULT_MAX_BINS.max(2 * bins), ..Default::default() };
    let coarse_sc = binned_scenario(scenario, bins)?;
    let fine_sc = binned_scenario(scenario, 2 * bins)?;
    let mut sum = OracleSummary { coarse: 0.0, fine: 0.0, probability_gap: 0.0, compared: 0, skipped: 0 };
    for mut rec in oracle_records(scenario.detection, bins, coarse_sc.grid.dt, seed)? {
        rec.t_start = coarse_sc.grid.t_start;
        let fine_rec = refine_record(&rec);
        let pair = compare_with_hierarchy(&coarse_sc, &rec, &opts)
            .and_then(|a| Ok((a, compare_with_hierarchy(&fine_sc, &fine_rec, &opts)?)));
        match pair {
            Ok((a, b)) => {
                sum.coarse = sum.coarse.max(a.worst_trace_distance());
                sum.fine = sum.fine.max(b.worst_trace_distance());
                sum.probability_gap = sum.probability_gap.max(a.worst_probability_gap());
                sum.compared += 1;
            }
            Err(Error::InfeasibleRecord { .. }) => sum.skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(sum)
}

fn oracle_check(scenario: &Scenario, bins: usize, seed: u64) -> Result<CheckReport> {
    let s = oracle_summary(scenario, bins, seed)?;
    let mut text = String::new();
    let _ = writeln!(text, "records compared {} (infeasible skipped {})", s.compared, s.skipped);
    let _ = writeln!(text, "worst trace distance at {bins} bins {:.6e}", s.coarse);
    let _ = writeln!(text, "worst trace distance at {} bins {:.6e}", 2 * bins, s.fine);
    let _ = writeln!(text, "halving ratio {:.4}", s.ratio());
    let _ = writeln!(text, "worst probability gap {:.6e}", s.probability_gap);
    Ok(CheckReport { check: Check::Oracle, passed: s.passed(), text })
}

// --------------------------------------------------------------- duality

/// Hermitian basis of d×d matrices (identity first).
pub fn hermitian_basis(d: usize) -> Vec<CMat> {
    let mut out = vec![linalg::identity(d)];
    for j in 0..d {
        for k in j..d {
            if j == k {
                if j + 1 < d {
                    let mut m = linalg::zeros(d);
                    m[(j, j)] = c(1.0, 0.0);
                    out.push(m);
                }
            } else {
                let mut re = linalg::zeros(d);
                re[(j, k)] = c(1.0, 0.0);
                re[(k, j)] = c(1.0, 0.0);
                let mut im = linalg::zeros(d);
                im[(j, k)] = c(0.0, -1.0);
                im[(k, j)] = c(0.0, 1.0);
                out.push(re);
                out.push(im);
            }
        }
    }
    out
}

/// max |Tr[ρ₀ π_mn[X]] − Tr[X ρ_nm]| over basis operators and blocks.
pub fn duality_gap(adjoints: &[AdjointHierarchy], ops: &[CMat], h: &HierarchyState, rho0: &CMat) -> f64 {
    let n = h.n_max();
    let mut worst: f64 = 0.0;
    for (x, a) in ops.iter().zip(adjoints) {
        for m in 0..=n {
            for k in 0..=n {
                let lhs = linalg::trace_of_product(rho0, &a.block(m, k));
                let rhs = linalg::trace_of_product(x, &h.block(k as isize, m as isize));
                worst = worst.max((lhs - rhs).norm());
            }
        }
    }
    worst
}

/// Runs the Schrödinger and adjoint ladders side by side for `steps` steps
/// starting a few steps before the packet peak and returns the worst gap.
pub fn paired_duality_run(scenario: &Scenario, steps: usize, seed: u64, recompute: bool) -> Result<f64> {
    paired_duality_run_with(scenario, &hermitian_basis(scenario.system.dim()), steps, seed, recompute)
}

/// As [`paired_duality_run`] for a chosen set of tracked operators.
pub fn paired_duality_run_with(
    scenario: &Scenario,
    ops: &[CMat],
    steps: usize,
    seed: u64,
    recompute: bool,
) -> Result<f64> {
    let samples = scenario.samples();
    let g = scenario.grid;
    let peak = (0..samples.len())
        .max_by(|&a, &b| samples.get(a).norm().total_cmp(&samples.get(b).norm()))
        .unwrap_or(0);
    let start = peak.saturating_sub(steps / 2).min(g.steps.saturating_sub(steps));
    let end = (start + steps).min(g.steps);
    let n = scenario.field.max_photons();
    let rho0 = &scenario.initial_state;
    let mut h = init_hierarchy(rho0, n)?;
    let mut stepper = Stepper::new(&scenario.system, &scenario.field, &scenario.baths, scenario.detection, g.dt)?;
    let adj = AdjointStepper::new(&scenario.system, &scenario.field, &scenario.baths, scenario.detection, g.dt)?;
    let mut adjoints: Vec<AdjointHierarchy> = ops.iter().map(|x| init_adjoint(x, n)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = duality_gap(&adjoints, ops, &h, rho0);
    for k in start..end {
        let xi = samples.get(k);
        let out = stepper.step(&mut h, xi, Source::Sample(&mut rng))?;
        for a in adjoints.iter_mut() {
            let norm = if recompute {
                Normalization::Recompute(rho0)
            } else {
                Normalization::Given(out.normalization)
            };
            adj.step(a, xi, out.outcome, out.currents, norm)?;
        }
        worst = worst.max(duality_gap(&adjoints, ops, &h, rho0));
    }
    Ok(worst)
}

fn duality_check(scenario: &Scenario, steps: usize, seed: u64) -> Result<CheckReport> {
    let given = paired_duality_run(scenario, steps, seed, false)?;
    let recomputed = paired_duality_run(scenario, steps, seed, true)?;
    let mut text = String::new();
    let _ = writeln!(text, "steps {steps}");
    let _ = writeln!(text, "worst gap (normalization handed over) {given:.3e}");
    let _ = writeln!(text, "worst gap (normalization recomputed) {recomputed:.3e}");
    Ok(CheckReport {
        check: Check::Duality,
        passed: given <= DUALITY_TOLERANCE && recomputed <= DUALITY_TOLERANCE,
        text,
    })
}

// ------------------------------------------------------------ invariants

/// Worst departures seen along trajectories.
#[derive(Clone, Copy, Debug, Default)]
pub struct Violations {
    /// |Tr ρ_sys − 1|, the field-weighted trace of the ladder
    pub trace: f64,
    /// max ‖ρ_nm − ρ_mn†‖
    pub pairing: f64,
    /// max(0, −λ_min) of the reduced state
    pub negativity: f64,
    pub steps: usize,
}

impl Violations {
    /// Checks one state and returns its reduced system state. Blocks above
    /// the diagonal are stored and those below are their adjoints, so the
    /// pairing reduces to Hermitian diagonal blocks.
    pub fn record(&mut self, h: &HierarchyState, field: &fock_sme::system::FieldState) -> Result<CMat> {
        for m in 0..=h.n_max() {
            let a = h.blocks.upper(m, m);
            for i in 0..a.nrows() {
                for j in i..a.ncols() {
                    self.pairing = self.pairing.max((a[(i, j)] - a[(j, i)].conj()).norm());
                }
            }
        }
        let rho = h.reduced_state(field)?;
        self.trace = self.trace.max((linalg::trace(&rho).re - 1.0).abs());
        self.negativity = self.negativity.max((-linalg::min_eigenvalue(&rho)).max(0.0));
        self.steps += 1;
        Ok(rho)
    }

    pub fn merge(&mut self, o: &Violations) {
        self.trace = self.trace.max(o.trace);
        self.pairing = self.pairing.max(o.pairing);
        self.negativity = self.negativity.max(o.negativity);
        self.steps += o.steps;
    }

    pub fn passed(&self) -> bool {
        self.trace <= STATE_TOLERANCE && self.pairing <= PAIRING_TOLERANCE && self.negativity <= STATE_TOLERANCE
    }
}

/// Invariant violations at every step of one sampled trajectory.
pub fn trajectory_violations(scenario: &Scenario, seed: u64) -> Result<Violations> {
    let samples = scenario.samples();
    let mut v = Violations::default();
    run_trajectory_with(scenario, Drive::Seed(seed), &samples, RunOptions::default(), |s| {
        v.record(s.state, &scenario.field).map(|_| ())
    })?;
    Ok(v)
}

fn invariants_check(scenario: &Scenario, n_traj: usize, seed: u64) -> Result<CheckReport> {
    let n_traj = n_traj.max(1);
    let mut all = Violations::default();
    for i in 0..n_traj {
        all.merge(&trajectory_violations(scenario, trajectory_seed(seed, i as u64))?);
    }
    let mut text = String::new();
    let _ = writeln!(text, "trajectories {n_traj}, states checked {}", all.steps);
    let _ = writeln!(text, "weighted trace error {:.3e}", all.trace);
    let _ = writeln!(text, "pairing error {:.3e}", all.pairing);
    let _ = writeln!(text, "negativity {:.3e}", all.negativity);
    Ok(CheckReport { check: Check::Invariants, passed: all.passed(), text })
}

// ------------------------------------------------------------ statistics

#[derive(Clone, Debug, Default)]
pub struct InnovationStats {
    pub samples: usize,
    pub mean: [f64; 2],
    pub variance_over_dt: [f64; 2],
    /// Sample standard error of the mean.
    pub mean_error: [f64; 2],
}

/// Innovation moments over trajectories until at least `min_samples`
/// innovations per channel are collected.
pub fn innovation_stats(scenario: &Scenario, min_samples: usize, seed: u64) -> Result<InnovationStats> {
    let samples = scenario.samples();
    let mut sum = [0.0; 2];
    let mut sq = [0.0; 2];
    let mut n = 0usize;
    let mut i = 0u64;
    while n < min_samples {
        run_trajectory_with(scenario, Drive::Seed(trajectory_seed(seed, i)), &samples, RunOptions::default(), |v| {
            if let Some(o) = v.outcome {
                for ch in 0..2 {
                    sum[ch] += o.innovation[ch];
                    sq[ch] += o.innovation[ch] * o.innovation[ch];
                }
                n += 1;
            }
            Ok(())
        })?;
        i += 1;
        if scenario.grid.steps == 0 {
            break;
        }
    }
    let nf = n.max(1) as f64;
    let dt = scenario.grid.dt;
    let mean = [sum[0] / nf, sum[1] / nf];
    let var = |ch: usize| sq[ch] / nf - mean[ch] * mean[ch];
    Ok(InnovationStats {
        samples: n,
        mean,
        variance_over_dt: [var(0) / dt, var(1) / dt],
        mean_error: [(var(0) / nf).sqrt(), (var(1) / nf).sqrt()],
    })
}

/// Ensemble-mean final counts against η∫flux dt from the master equation.
#[derive(Clone, Debug)]
pub struct CountStats {
    pub mean: f64,
    pub standard_error: f64,
    pub expected: f64,
}

impl CountStats {
    pub fn passed(&self) -> bool {
        (self.mean - self.expected).abs() <= (3.0 * self.standard_error).max(COUNT_FLOOR)
    }
}

pub fn count_stats(loaded: &LoadedScenario, n_traj: usize, seed: u64) -> Result<CountStats> {
    let sc = &loaded.scenario;
    let mut me_loaded = loaded.clone();
    me_loaded.observables = vec![fock_sme::observables::Observable::CumulativeCounts];
    let me = master_equation(&me_loaded, sc.grid.steps.max(1))?;
    let expected = *csv_column(&me, "cumulative_counts")?.last().unwrap_or(&0.0);
    let samples = sc.samples();
    let mut counts = Vec::with_capacity(n_traj);
    for i in 0..n_traj.max(1) {
        let rec = run_trajectory_with(sc, Drive::Seed(trajectory_seed(seed, i as u64)), &samples, RunOptions::default(), |_| Ok(()))?;
        counts.push(rec.total_counts() as f64);
    }
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = if n > 1.0 { counts.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Ok(CountStats { mean, standard_error: (var / n).sqrt(), expected })
}

fn statistics_check(loaded: &LoadedScenario, n_traj: usize, seed: u64) -> Result<CheckReport> {
    let sc = &loaded.scenario;
    let mut text = String::new();
    let passed = match sc.detection.scheme {
        Scheme::Counting => {
            let s = count_stats(loaded, n_traj, seed)?;
            let _ = writeln!(text, "trajectories {n_traj}");
            let _ = writeln!(text, "mean counts {:.6} ± {:.6}", s.mean, s.standard_error);
            let _ = writeln!(text, "master-equation counts {:.6}", s.expected);
            s.passed()
        }
        _ => {
            let channels = if matches!(sc.detection.scheme, Scheme::Heterodyne) { 2 } else { 1 };
            let s = innovation_stats(sc, MIN_INNOVATIONS, seed)?;
            let _ = writeln!(text, "innovations {}", s.samples);
            let mut ok = true;
            for ch in 0..channels {
                let (m, v) = (s.mean[ch], s.variance_over_dt[ch]);
                let e = 3.0 * s.mean_error[ch];
                let _ = writeln!(text, "channel {ch}: mean {m:.3e} (3σ {e:.3e}), variance/dt {v:.4}");
                ok &= m.abs() <= e;
                if sc.detection.mode == OutcomeMode::Gaussian {
                    ok &= v >= VARIANCE_BAND.0 && v <= VARIANCE_BAND.1;
                }
            }
            ok
        }
    };
    Ok(CheckReport { check: Check::Statistics, passed, text })
}
