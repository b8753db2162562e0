//! Measurement records and their text format.
//!
//! ```text
//! # fock-sme record
//! scheme homodyne
//! mode gaussian
//! phase 0
//! efficiency 1
//! dt 1e-3
//! t_start -4
//! seed 42
//! steps 2
//! 0 1.2345678901234567e-2
//! 1 -3.3333333333333333e-2
//! ```
//!
//! Entries hold raw outcomes (counts or current increments), never innovations.

use std::fmt::{self, Write as _};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scheme {
    Counting,
    Homodyne { phase: f64 },
    /// Simultaneous quadratures at phases 0 and π/2.
    Heterodyne,
}

/// How diffusive outcomes are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OutcomeMode {
    /// Gaussian current increments.
    #[default]
    Gaussian,
    /// Two-valued outcomes ±√dt per quadrature.
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub scheme: Scheme,
    pub efficiency: f64,
    pub mode: OutcomeMode,
}

impl Detection {
    pub fn new(scheme: Scheme, efficiency: f64, mode: OutcomeMode) -> Result<Self> {
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(Error::Parameter(format!(
                "efficiency must lie in [0, 1], got {efficiency}"
            )));
        }
        if let Scheme::Homodyne { phase } = scheme {
            if !phase.is_finite() {
                return Err(Error::Parameter("homodyne phase must be finite".into()));
            }
        }
        Ok(Self {
            scheme,
            efficiency,
            mode,
        })
    }

    pub fn counting() -> Self {
        Self {
            scheme: Scheme::Counting,
            efficiency: 1.0,
            mode: OutcomeMode::Gaussian,
        }
    }

    pub fn homodyne(phase: f64) -> Self {
        Self {
            scheme: Scheme::Homodyne { phase },
            efficiency: 1.0,
            mode: OutcomeMode::Gaussian,
        }
    }

    pub fn heterodyne() -> Self {
        Self {
            scheme: Scheme::Heterodyne,
            efficiency: 1.0,
            mode: OutcomeMode::Gaussian,
        }
    }

    pub fn with_efficiency(mut self, efficiency: f64) -> Self {
        self.efficiency = efficiency;
        self
    }

    pub fn with_mode(mut self, mode: OutcomeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn phase(&self) -> f64 {
        match self.scheme {
            Scheme::Homodyne { phase } => phase,
            _ => 0.0,
        }
    }

    pub fn scheme_name(&self) -> &'static str {
        match self.scheme {
            Scheme::Counting => "counting",
            Scheme::Homodyne { .. } => "homodyne",
            Scheme::Heterodyne => "heterodyne",
        }
    }
}

/// One step's raw measurement result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Outcome {
    Count(u8),
    Current(f64),
    Currents(f64, f64),
}

impl Outcome {
    pub fn count(&self) -> u8 {
        match self {
            Outcome::Count(n) => *n,
            _ => 0,
        }
    }

    fn matches(&self, scheme: Scheme) -> bool {
        matches!(
            (self, scheme),
            (Outcome::Count(_), Scheme::Counting)
                | (Outcome::Current(_), Scheme::Homodyne { .. })
                | (Outcome::Currents(..), Scheme::Heterodyne)
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub detection: Detection,
    pub dt: f64,
    pub t_start: f64,
    pub seed: Option<u64>,
    pub entries: Vec<Outcome>,
}

impl TrajectoryRecord {
    pub fn new(detection: Detection, dt: f64, t_start: f64, seed: Option<u64>) -> Self {
        Self {
            detection,
            dt,
            t_start,
            seed,
            entries: Vec::new(),
        }
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn total_counts(&self) -> usize {
        self.entries.iter().map(|o| o.count() as usize).sum()
    }

    /// Step indices with a registered count.
    pub fn count_steps(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, o)| o.count() == 1)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        Detection::new(self.detection.scheme, self.detection.efficiency, self.detection.mode)?;
        if !(self.dt > 0.0) || !self.dt.is_finite() || !self.t_start.is_finite() {
            return Err(Error::Validation("record grid is invalid".into()));
        }
        for (k, o) in self.entries.iter().enumerate() {
            if !o.matches(self.detection.scheme) {
                return Err(Error::Validation(format!(
                    "entry {k} does not match the {} scheme",
                    self.detection.scheme_name()
                )));
            }
            let ok = match *o {
                Outcome::Count(n) => n <= 1,
                Outcome::Current(x) => x.is_finite(),
                Outcome::Currents(x, y) => x.is_finite() && y.is_finite(),
            };
            if !ok {
                return Err(Error::Validation(format!("entry {k} is out of range")));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# fock-sme record");
        let _ = writeln!(s, "scheme {}", self.detection.scheme_name());
        let mode = match self.detection.mode {
            OutcomeMode::Gaussian => "gaussian",
            OutcomeMode::Binary => "binary",
        };
        let _ = writeln!(s, "mode {mode}");
        let _ = writeln!(s, "phase {:.16e}", self.detection.phase());
        let _ = writeln!(s, "efficiency {:.16e}", self.detection.efficiency);
        let _ = writeln!(s, "dt {:.16e}", self.dt);
        let _ = writeln!(s, "t_start {:.16e}", self.t_start);
        match self.seed {
            Some(seed) => {
                let _ = writeln!(s, "seed {seed}");
            }
            None => {
                let _ = writeln!(s, "seed none");
            }
        }
        let _ = writeln!(s, "steps {}", self.entries.len());
        for (k, o) in self.entries.iter().enumerate() {
            let _ = match *o {
                Outcome::Count(n) => writeln!(s, "{k} {n}"),
                Outcome::Current(x) => writeln!(s, "{k} {x:.16e}"),
                Outcome::Currents(x, y) => writeln!(s, "{k} {x:.16e} {y:.16e}"),
            };
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_record(text)
    }
}

impl fmt::Display for TrajectoryRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

const MAX_RECORD_STEPS: usize = 1 << 28;

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let s = tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    s.parse::<T>()
        .map_err(|_| Error::parse(line, format!("invalid {what} `{s}`")))
}

fn finite(x: f64, line: usize, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::parse(line, format!("{what} is not finite")))
    }
}

pub fn parse_record(text: &str) -> Result<TrajectoryRecord> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let mut header = |key: &str| -> Result<(usize, String)> {
        let (no, l) = lines
            .next()
            .ok_or_else(|| Error::parse(0, format!("missing `{key}` header")))?;
        let mut it = l.splitn(2, char::is_whitespace);
        match (it.next(), it.next()) {
            (Some(k), Some(v)) if k == key => Ok((no, v.trim().to_string())),
            _ => Err(Error::parse(no, format!("expected `{key} <value>`"))),
        }
    };

    let (no_scheme, scheme_name) = header("scheme")?;
    let (no, mode) = header("mode")?;
    let mode = match mode.as_str() {
        "gaussian" => OutcomeMode::Gaussian,
        "binary" => OutcomeMode::Binary,
        other => return Err(Error::parse(no, format!("unknown mode `{other}`"))),
    };
    let (no, v) = header("phase")?;
    let phase = finite(field(Some(&v), no, "phase")?, no, "phase")?;
    let (no, v) = header("efficiency")?;
    let efficiency: f64 = field(Some(&v), no, "efficiency")?;
    if !(0.0..=1.0).contains(&efficiency) {
        return Err(Error::parse(no, "efficiency must lie in [0, 1]"));
    }
    let (no, v) = header("dt")?;
    let dt: f64 = field(Some(&v), no, "dt")?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::parse(no, "dt must be positive"));
    }
    let (no, v) = header("t_start")?;
    let t_start = finite(field(Some(&v), no, "t_start")?, no, "t_start")?;
    let (no, v) = header("seed")?;
    let seed = if v == "none" {
        None
    } else {
        Some(field::<u64>(Some(&v), no, "seed")?)
    };
    let (no, v) = header("steps")?;
    let steps: usize = field(Some(&v), no, "steps")?;
    if steps > MAX_RECORD_STEPS {
        return Err(Error::parse(no, "too many steps"));
    }

    let scheme = match scheme_name.as_str() {
        "counting" => Scheme::Counting,
        "homodyne" => Scheme::Homodyne { phase },
        "heterodyne" => Scheme::Heterodyne,
        other => return Err(Error::parse(no_scheme, format!("unknown scheme `{other}`"))),
    };
    let detection = Detection {
        scheme,
        efficiency,
        mode,
    };

    let mut entries = Vec::with_capacity(steps.min(1 << 20));
    for (no, l) in lines {
        let mut tok = l.split_whitespace();
        let k: usize = field(tok.next(), no, "step index")?;
        if k != entries.len() {
            return Err(Error::parse(no, format!("expected step {}, found {k}", entries.len())));
        }
        let o = match scheme {
            Scheme::Counting => {
                let n: u8 = field(tok.next(), no, "count")?;
                if n > 1 {
                    return Err(Error::parse(no, "counts must be 0 or 1"));
                }
                Outcome::Count(n)
            }
            Scheme::Homodyne { .. } => {
                Outcome::Current(finite(field(tok.next(), no, "current")?, no, "current")?)
            }
            Scheme::Heterodyne => {
                let x = finite(field(tok.next(), no, "current")?, no, "current")?;
                let y = finite(field(tok.next(), no, "current")?, no, "current")?;
                Outcome::Currents(x, y)
            }
        };
        if tok.next().is_some() {
            return Err(Error::parse(no, "trailing fields"));
        }
        entries.push(o);
        if entries.len() > steps {
            return Err(Error::parse(no, "more entries than declared steps"));
        }
    }
    if entries.len() != steps {
        return Err(Error::parse(
            0,
            format!("declared {steps} steps, found {}", entries.len()),
        ));
    }
    Ok(TrajectoryRecord {
        detection,
        dt,
        t_start,
        seed,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_all_schemes() {
        for (det, entries) in [
            (Detection::counting(), vec![Outcome::Count(0), Outcome::Count(1)]),
            (
                Detection::homodyne(0.25).with_efficiency(0.5),
                vec![Outcome::Current(0.1 / 3.0), Outcome::Current(-1e-300)],
            ),
            (
                Detection::heterodyne().with_mode(OutcomeMode::Binary),
                vec![Outcome::Currents(0.03, -0.03)],
            ),
        ] {
            let mut r = TrajectoryRecord::new(det, 1e-3, -4.0, Some(7));
            r.entries = entries;
            let back = parse_record(&r.to_text()).unwrap();
            assert_eq!(back, r);
        }
    }

    #[test]
    fn rejects_bad_records() {
        let good = "scheme counting\nmode gaussian\nphase 0\nefficiency 1\ndt 0.1\nt_start 0\nseed none\nsteps 1\n0 1\n";
        assert!(parse_record(good).is_ok());
        assert!(parse_record(&good.replace("0 1\n", "0 2\n")).is_err());
        assert!(parse_record(&good.replace("0 1\n", "1 1\n")).is_err());
        assert!(parse_record(&good.replace("steps 1", "steps 2")).is_err());
        assert!(parse_record(&good.replace("efficiency 1", "efficiency 1.5")).is_err());
        assert!(parse_record(&good.replace("dt 0.1", "dt -1")).is_err());
        assert!(parse_record(&good.replace("counting", "photon")).is_err());
        assert!(parse_record("").is_err());
    }
}
