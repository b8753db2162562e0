//! Simulation commands: single trajectories, ensembles, replays and the
//! unconditional master equation.

use std::fmt::Write as _;

use fock_sme::ensemble::{run_ensemble, EnsembleSummary};
use fock_sme::error::{Error, Result};
use fock_sme::integrator::{run_trajectory_with, solve_master_equation, Drive, RunOptions};
use fock_sme::observables::{evaluate, Observable};
use fock_sme::record::TrajectoryRecord;
use fock_sme::system::TimeGrid;

use crate::scenario::{build_detection, parse_field_override, parse_observables, LoadedScenario};

/// Command-line adjustments applied on top of a scenario.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub scheme: Option<String>,
    pub phase: Option<f64>,
    pub mode: Option<String>,
    pub eta: Option<f64>,
    pub dt: Option<f64>,
    pub field: Option<String>,
    pub observables: Option<Vec<String>>,
}

impl Overrides {
    pub fn apply(&self, loaded: &mut LoadedScenario) -> Result<()> {
        let sc = &mut loaded.scenario;
        if self.scheme.is_some() || self.phase.is_some() || self.mode.is_some() || self.eta.is_some() {
            let det = sc.detection;
            let scheme = self.scheme.clone().unwrap_or_else(|| det.scheme_name().to_string());
            let mode = self.mode.clone().unwrap_or_else(|| {
                match det.mode {
                    fock_sme::record::OutcomeMode::Gaussian => "gaussian",
                    fock_sme::record::OutcomeMode::Binary => "binary",
                }
                .to_string()
            });
            let phase = self.phase.unwrap_or(det.phase());
            let eta = self.eta.unwrap_or(det.efficiency);
            sc.detection = build_detection(&scheme, phase, eta, &mode)?;
        }
        if let Some(dt) = self.dt {
            sc.grid = TimeGrid::new(sc.grid.t_start, sc.grid.t_end(), dt)?;
        }
        if let Some(f) = &self.field {
            sc.field = parse_field_override(f)?;
        }
        if let Some(names) = &self.observables {
            loaded.observables = parse_observables(names, &loaded.operators, sc.system.dim())?;
        }
        Ok(())
    }
}

/// Decimal with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn header(observables: &[Observable]) -> String {
    let mut s = String::from("step,time");
    for o in observables {
        s.push(',');
        s.push_str(&o.name());
    }
    s.push('\n');
    s
}

/// Observables along one trajectory as CSV, plus the record.
pub fn trajectory_csv(
    loaded: &LoadedScenario,
    drive: Drive<'_>,
    stride: usize,
    options: RunOptions,
) -> Result<(String, TrajectoryRecord)> {
    let sc = &loaded.scenario;
    let samples = sc.samples();
    let stride = stride.max(1);
    let last = sc.grid.steps;
    let mut csv = header(&loaded.observables);
    let record = run_trajectory_with(sc, drive, &samples, options, |v| {
        if v.step % stride == 0 || v.step == last {
            let _ = write!(csv, "{},{}", v.step, num(sc.grid.time(v.step)));
            for o in &loaded.observables {
                let z = evaluate(o, v.state, &sc.system, &sc.field, v.xi, v.counts)?;
                let _ = write!(csv, ",{}", num(z.re));
            }
            csv.push('\n');
        }
        Ok(())
    })?;
    Ok((csv, record))
}

pub fn simulate(loaded: &LoadedScenario, seed: u64, stride: usize, options: RunOptions) -> Result<(String, String)> {
    let (csv, record) = trajectory_csv(loaded, Drive::Seed(seed), stride, options)?;
    Ok((csv, record.to_text()))
}

pub fn replay(loaded: &LoadedScenario, record_text: &str, stride: usize, options: RunOptions) -> Result<String> {
    let record = TrajectoryRecord::parse(record_text)?;
    Ok(trajectory_csv(loaded, Drive::Record(&record), stride, options)?.0)
}

pub fn summary_csv(summary: &EnsembleSummary) -> String {
    let mut s = String::from("time");
    for n in &summary.names {
        let _ = write!(s, ",{n}_mean,{n}_variance,{n}_stderr");
    }
    s.push('\n');
    for (p, t) in summary.times.iter().enumerate() {
        s.push_str(&num(*t));
        for o in 0..summary.names.len() {
            let _ = write!(
                s,
                ",{},{},{}",
                num(summary.mean[o][p]),
                num(summary.variance[o][p]),
                num(summary.standard_error(o, p))
            );
        }
        s.push('\n');
    }
    s
}

pub fn ensemble(
    loaded: &LoadedScenario,
    n_traj: usize,
    workers: usize,
    base_seed: u64,
    stride: usize,
    options: RunOptions,
) -> Result<(EnsembleSummary, String)> {
    let summary = run_ensemble(
        &loaded.scenario,
        &loaded.observables,
        n_traj,
        base_seed,
        workers,
        stride,
        options,
    )?;
    let csv = summary_csv(&summary);
    Ok((summary, csv))
}

/// Unconditional evolution. Cumulative counts become the detected mean
/// η∫flux dt (trapezoid rule).
pub fn master_equation(loaded: &LoadedScenario, stride: usize) -> Result<String> {
    let sc = &loaded.scenario;
    let states = solve_master_equation(sc)?;
    let samples = sc.samples();
    let eta = sc.detection.efficiency;
    let stride = stride.max(1);
    let mut csv = header(&loaded.observables);
    let mut counts = 0.0;
    let mut prev_flux = None;
    for (k, h) in states.iter().enumerate() {
        let xi = samples.get(k);
        let flux = fock_sme::generators::jump_rate(h, &sc.system, xi, &sc.field);
        if let Some(p) = prev_flux {
            counts += eta * 0.5 * (p + flux) * sc.grid.dt;
        }
        prev_flux = Some(flux);
        if k % stride != 0 && k != states.len() - 1 {
            continue;
        }
        let _ = write!(csv, "{},{}", k, num(sc.grid.time(k)));
        for o in &loaded.observables {
            let v = match o {
                Observable::CumulativeCounts => counts,
                _ => evaluate(o, h, &sc.system, &sc.field, xi, 0)?.re,
            };
            let _ = write!(csv, ",{}", num(v));
        }
        csv.push('\n');
    }
    Ok(csv)
}

/// Reads a column of a CSV produced by these commands.
pub fn csv_column(csv: &str, name: &str) -> Result<Vec<f64>> {
    let mut lines = csv.lines();
    let head = lines.next().ok_or_else(|| Error::parse(1, "empty CSV"))?;
    let idx = head
        .split(',')
        .position(|h| h == name)
        .ok_or_else(|| Error::Validation(format!("no column `{name}`")))?;
    lines
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .nth(idx)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse(i + 2, format!("bad value in column `{name}`")))
        })
        .collect()
}
