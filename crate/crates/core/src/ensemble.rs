//! Parallel trajectory ensembles with scheduling-independent results.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrator::{run_trajectory_with, trajectory_seed, Drive, RunOptions, Scenario};
use crate::observables::{evaluate, Observable};

/// Trajectories are reduced in fixed-size chunks, in index order.
const CHUNK: usize = 32;

/// Pointwise mean and sample variance of observables over trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    pub n_traj: usize,
    /// `mean[obs][sample]`
    pub mean: Vec<Vec<f64>>,
    pub variance: Vec<Vec<f64>>,
}

impl EnsembleSummary {
    pub fn standard_error(&self, obs: usize, sample: usize) -> f64 {
        (self.variance[obs][sample] / self.n_traj as f64).sqrt()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Observable values at every `stride`-th grid point (and the last one).
fn sample_points(steps: usize, stride: usize) -> Vec<usize> {
    let mut pts: Vec<usize> = (0..=steps).step_by(stride.max(1)).collect();
    if *pts.last().unwrap_or(&0) != steps {
        pts.push(steps);
    }
    pts
}

fn one_trajectory(
    scenario: &Scenario,
    observables: &[Observable],
    seed: u64,
    points: &[usize],
    options: RunOptions,
) -> Result<Vec<f64>> {
    let samples = scenario.samples();
    let mut values = Vec::with_capacity(points.len() * observables.len());
    let mut next = 0usize;
    run_trajectory_with(scenario, Drive::Seed(seed), &samples, options, |v| {
        if next < points.len() && points[next] == v.step {
            for obs in observables {
                let z = evaluate(obs, v.state, &scenario.system, &scenario.field, v.xi, v.counts)?;
                values.push(z.re);
            }
            next += 1;
        }
        Ok(())
    })?;
    Ok(values)
}

/// Runs `n_traj` trajectories with seeds `trajectory_seed(base_seed, i)` on
/// `workers` threads. The result does not depend on `workers`.
pub fn run_ensemble(
    scenario: &Scenario,
    observables: &[Observable],
    n_traj: usize,
    base_seed: u64,
    workers: usize,
    stride: usize,
    options: RunOptions,
) -> Result<EnsembleSummary> {
    if n_traj == 0 {
        return Err(Error::Parameter("ensemble needs at least one trajectory".into()));
    }
    if workers == 0 {
        return Err(Error::Parameter("worker count must be positive".into()));
    }
    for obs in observables {
        obs.validate(scenario.system.dim())?;
    }
    let points = sample_points(scenario.grid.steps, stride);
    let k = observables.len();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start worker pool: {e}")))?;

    let width = points.len() * k;
    let mut mean = vec![0.0; width];
    let mut m2 = vec![0.0; width];
    let mut seen = 0usize;
    for start in (0..n_traj).step_by(CHUNK) {
        let end = (start + CHUNK).min(n_traj);
        let chunk: Vec<Result<Vec<f64>>> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| {
                    let seed = trajectory_seed(base_seed, i as u64);
                    one_trajectory(scenario, observables, seed, &points, options)
                })
                .collect()
        });
        for values in chunk {
            let values = values?;
            seen += 1;
            for (j, x) in values.into_iter().enumerate() {
                let delta = x - mean[j];
                mean[j] += delta / seen as f64;
                m2[j] += delta * (x - mean[j]);
            }
        }
    }

    let denom = if n_traj > 1 { (n_traj - 1) as f64 } else { 1.0 };
    let split = |flat: &[f64], scale: f64| -> Vec<Vec<f64>> {
        (0..k)
            .map(|o| (0..points.len()).map(|p| flat[p * k + o] * scale).collect())
            .collect()
    };
    Ok(EnsembleSummary {
        times: points.iter().map(|&p| scenario.grid.time(p)).collect(),
        names: observables.iter().map(|o| o.name()).collect(),
        n_traj,
        mean: split(&mean, 1.0),
        variance: split(&m2, 1.0 / denom),
    })
}
