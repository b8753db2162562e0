//! Time-bin decomposition of a Fock-state wave packet.

use fock_sme::error::{Error, Result};
use fock_sme::linalg::{c, C64};
use fock_sme::system::{PacketSamples, TimeGrid, WavePacket};
use nalgebra::DVector;

/// Default limit on the dropped double-occupation weight.
pub const DROPPED_WEIGHT_LIMIT: f64 = 1e-3;

/// Per-bin amplitudes `ξ(t_i)√Δt` on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BinnedField {
    pub t_start: f64,
    pub bin_width: f64,
    pub amplitudes: Vec<C64>,
}

impl BinnedField {
    /// Samples the packet at the left edge of each bin.
    pub fn from_packet(packet: &WavePacket, t_start: f64, bin_width: f64, bins: usize) -> Result<Self> {
        let grid = TimeGrid::new(t_start, t_start + bins as f64 * bin_width, bin_width)?;
        Ok(Self::from_samples(&packet.samples(&grid)))
    }

    /// Same amplitudes the hierarchy integrator sees for these samples.
    pub fn from_samples(samples: &PacketSamples) -> Self {
        let s = samples.dt.sqrt();
        Self {
            t_start: samples.t_start,
            bin_width: samples.dt,
            amplitudes: samples.values().iter().map(|x| x * s).collect(),
        }
    }

    pub fn bin_count(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.bin_width
    }

    /// Σ|ξ(t_i)|²Δt.
    pub fn weight(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// N·max|ξ(t_i)|²Δt, the double-occupation load.
    pub fn occupation_load(&self, photons: usize) -> f64 {
        photons as f64 * self.amplitudes.iter().map(|a| a.norm_sqr()).fold(0.0, f64::max)
    }
}

/// Bin register holding N photons, at most one per bin.
#[derive(Clone, Debug)]
pub struct BinnedFock {
    pub photons: usize,
    /// Amplitude per register configuration; bit i is bin i.
    pub amplitudes: DVector<C64>,
    /// Weight removed with the doubly occupied configurations.
    pub dropped_weight: f64,
}

/// (Σ c_i b†_i)^N/√N! |0⟩ restricted to single occupations, renormalized.
///
/// The single-occupation part has amplitude √N!·Π_{i∈set} c_i on each N-subset.
pub fn build_binned_fock(field: &BinnedField, photons: usize) -> Result<BinnedFock> {
    build_binned_fock_with(field, photons, DROPPED_WEIGHT_LIMIT)
}

pub fn build_binned_fock_with(field: &BinnedField, photons: usize, limit: f64) -> Result<BinnedFock> {
    let b = field.bin_count();
    if photons > b {
        return Err(Error::Parameter(format!("{photons} photons do not fit in {b} bins")));
    }
    if b >= usize::BITS as usize - 1 {
        return Err(Error::Parameter(format!("{b} bins is too many")));
    }
    let total = field.weight();
    if !(total > 0.0) && photons > 0 {
        return Err(Error::Parameter("packet has no weight on the bins".into()));
    }
    let factorial: f64 = (1..=photons).map(|k| k as f64).product();
    let mut amps = DVector::from_element(1usize << b, c(0.0, 0.0));
    let mut kept = 0.0;
    for reg in 0..(1usize << b) {
        if reg.count_ones() as usize != photons {
            continue;
        }
        let mut a = c(factorial.sqrt(), 0.0);
        for (i, ci) in field.amplitudes.iter().enumerate() {
            if reg >> i & 1 == 1 {
                a *= ci;
            }
        }
        kept += a.norm_sqr();
        amps[reg] = a;
    }
    // Norm of the full N-photon state on the bins is (Σ|c|²)^N.
    let full = total.powi(photons as i32);
    let dropped = 1.0 - kept / full;
    if dropped > limit {
        return Err(Error::Resolution(format!(
            "dropped double-occupation weight {dropped:.3e} exceeds {limit:.1e}; increase the bin count"
        )));
    }
    amps /= c(kept.sqrt(), 0.0);
    Ok(BinnedFock {
        photons,
        amplitudes: amps,
        dropped_weight: dropped,
    })
}
