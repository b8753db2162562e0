//! Scenario files (TOML) and built-in presets.

use std::path::Path;

use fock_sme::error::{Error, Result};
use fock_sme::integrator::{default_dt, Scenario};
use fock_sme::linalg::{self, c, CMat};
use fock_sme::observables::Observable;
use fock_sme::record::{Detection, OutcomeMode, Scheme};
use fock_sme::system::{
    coherent_coefficients, excited_state, ground_state, make_gaussian_wavepacket, two_level_atom,
    BathChannel, FieldState, SystemOperators, TimeGrid, WavePacket,
};
use serde::Deserialize;

/// Largest system dimension and photon ladder accepted from a file.
const MAX_DIM: usize = 64;
const MAX_PHOTONS: usize = 64;
const MAX_STEPS: usize = 1 << 26;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemSpec {
    TwoLevel {
        #[serde(default = "one")]
        decay_rate: f64,
        #[serde(default)]
        detuning: f64,
        #[serde(default)]
        drive: f64,
    },
    Custom {
        scattering: Option<MatrixSpec>,
        coupling: MatrixSpec,
        hamiltonian: Option<MatrixSpec>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Named(String),
    Matrix(MatrixSpec),
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PacketSpec {
    Gaussian {
        #[serde(default = "one")]
        bandwidth: f64,
        #[serde(default)]
        center: f64,
    },
    Flat {
        start: f64,
        end: f64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    Vacuum,
    Fock {
        photons: usize,
    },
    Coherent {
        amplitude: f64,
        #[serde(default)]
        amplitude_im: f64,
        truncation: usize,
    },
    Custom {
        coeffs: MatrixSpec,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSpec {
    pub coupling: MatrixSpec,
    #[serde(default)]
    pub mean_occupation: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSpec {
    #[serde(default = "counting")]
    pub scheme: String,
    #[serde(default)]
    pub phase: f64,
    #[serde(default = "one")]
    pub efficiency: f64,
    #[serde(default = "gaussian")]
    pub mode: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub name: String,
    pub matrix: MatrixSpec,
}

/// On-disk scenario layout.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    pub system: SystemSpec,
    #[serde(default)]
    pub initial_state: Option<StateSpec>,
    pub packet: PacketSpec,
    pub field: FieldSpec,
    #[serde(default)]
    pub baths: Vec<BathSpec>,
    #[serde(default)]
    pub detection: Option<DetectionSpec>,
    pub grid: GridSpec,
    #[serde(default)]
    pub observables: Vec<String>,
    #[serde(default)]
    pub operators: Vec<OperatorSpec>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn one() -> f64 {
    1.0
}

fn counting() -> String {
    "counting".into()
}

fn gaussian() -> String {
    "gaussian".into()
}

/// A scenario ready to run, plus what to report and the default seed.
#[derive(Clone, Debug)]
pub struct LoadedScenario {
    pub name: String,
    pub scenario: Scenario,
    pub observables: Vec<Observable>,
    pub operators: Vec<(String, CMat)>,
    pub seed: u64,
}

fn matrix(spec: &MatrixSpec, what: &str) -> Result<CMat> {
    let rows = spec.re.len();
    if rows == 0 || rows > MAX_DIM {
        return Err(Error::Validation(format!("{what}: matrix needs 1..={MAX_DIM} rows")));
    }
    let cols = spec.re[0].len();
    let im = spec.im.as_ref();
    if let Some(im) = im {
        if im.len() != rows {
            return Err(Error::Validation(format!("{what}: real and imaginary parts differ in shape")));
        }
    }
    let mut m = CMat::zeros(rows, cols);
    for i in 0..rows {
        if spec.re[i].len() != cols || im.is_some_and(|im| im[i].len() != cols) {
            return Err(Error::Validation(format!("{what}: ragged rows")));
        }
        for j in 0..cols {
            let re = spec.re[i][j];
            let imv = im.map_or(0.0, |im| im[i][j]);
            if !re.is_finite() || !imv.is_finite() {
                return Err(Error::Validation(format!("{what}: non-finite entry")));
            }
            m[(i, j)] = c(re, imv);
        }
    }
    if rows != cols {
        return Err(Error::Validation(format!("{what}: matrix is not square")));
    }
    Ok(m)
}

fn build_system(spec: &SystemSpec) -> Result<SystemOperators> {
    match spec {
        SystemSpec::TwoLevel { decay_rate, detuning, drive } => {
            let atom = two_level_atom(*decay_rate, *detuning)?;
            if *drive == 0.0 {
                return Ok(atom);
            }
            if !drive.is_finite() {
                return Err(Error::Parameter("drive must be finite".into()));
            }
            let h = atom.hamiltonian() + fock_sme::system::sigma_x() * c(*drive, 0.0);
            SystemOperators::new(atom.scattering().clone(), atom.coupling().clone(), h)
        }
        SystemSpec::Custom { scattering, coupling, hamiltonian } => {
            let l = matrix(coupling, "coupling")?;
            let d = l.nrows();
            let s = match scattering {
                Some(m) => matrix(m, "scattering")?,
                None => linalg::identity(d),
            };
            let h = match hamiltonian {
                Some(m) => matrix(m, "hamiltonian")?,
                None => linalg::zeros(d),
            };
            if s.nrows() != d || h.nrows() != d {
                return Err(Error::Validation("system operators differ in dimension".into()));
            }
            SystemOperators::new(s, l, h)
        }
    }
}

fn build_state(spec: Option<&StateSpec>, d: usize) -> Result<CMat> {
    let rho = match spec {
        None => {
            let mut g = linalg::zeros(d);
            g[(0, 0)] = c(1.0, 0.0);
            g
        }
        Some(StateSpec::Named(n)) => match (n.as_str(), d) {
            ("ground", 2) => ground_state(),
            ("excited", 2) => excited_state(),
            ("ground", _) => {
                let mut g = linalg::zeros(d);
                g[(0, 0)] = c(1.0, 0.0);
                g
            }
            ("mixed", _) => linalg::identity(d) / c(d as f64, 0.0),
            _ => return Err(Error::Validation(format!("unknown initial state `{n}`"))),
        },
        Some(StateSpec::Matrix(m)) => matrix(m, "initial_state")?,
    };
    if rho.nrows() != d {
        return Err(Error::Validation("initial state does not match the system dimension".into()));
    }
    linalg::check_density_matrix(&rho, 1e-10).map_err(|e| Error::Validation(format!("initial state: {e}")))?;
    Ok(rho)
}

fn build_packet(spec: &PacketSpec) -> Result<WavePacket> {
    match spec {
        PacketSpec::Gaussian { bandwidth, center } => make_gaussian_wavepacket(*bandwidth, *center),
        PacketSpec::Flat { start, end } => WavePacket::flat(*start, *end),
    }
}

fn build_field(spec: &FieldSpec) -> Result<FieldState> {
    match spec {
        FieldSpec::Vacuum => Ok(FieldState::vacuum()),
        FieldSpec::Fock { photons } if *photons <= MAX_PHOTONS => Ok(FieldState::fock(*photons)),
        FieldSpec::Coherent { amplitude, amplitude_im, truncation } if *truncation <= MAX_PHOTONS => {
            if !amplitude.is_finite() || !amplitude_im.is_finite() {
                return Err(Error::Parameter("coherent amplitude must be finite".into()));
            }
            Ok(coherent_coefficients(c(*amplitude, *amplitude_im), *truncation))
        }
        FieldSpec::Custom { coeffs } => FieldState::from_coeffs(matrix(coeffs, "field coeffs")?),
        _ => Err(Error::Validation(format!("field ladders are capped at {MAX_PHOTONS} photons"))),
    }
}

pub fn build_detection(scheme: &str, phase: f64, efficiency: f64, mode: &str) -> Result<Detection> {
    let scheme = match scheme {
        "counting" => Scheme::Counting,
        "homodyne" => Scheme::Homodyne { phase },
        "heterodyne" => Scheme::Heterodyne,
        other => return Err(Error::Validation(format!("unknown detection scheme `{other}`"))),
    };
    let mode = match mode {
        "gaussian" => OutcomeMode::Gaussian,
        "binary" => OutcomeMode::Binary,
        other => return Err(Error::Validation(format!("unknown outcome mode `{other}`"))),
    };
    Detection::new(scheme, efficiency, mode)
}

fn bandwidth(spec: &PacketSpec) -> Option<f64> {
    match spec {
        PacketSpec::Gaussian { bandwidth, .. } => Some(*bandwidth),
        PacketSpec::Flat { start, end } => Some(1.0 / (end - start).abs().max(1e-12)),
    }
}

impl ScenarioFile {
    pub fn build(&self) -> Result<LoadedScenario> {
        let system = build_system(&self.system)?;
        let d = system.dim();
        let initial_state = build_state(self.initial_state.as_ref(), d)?;
        let packet = build_packet(&self.packet)?;
        let field = build_field(&self.field)?;
        let baths = self
            .baths
            .iter()
            .map(|b| {
                let l = matrix(&b.coupling, "bath coupling")?;
                if l.nrows() != d {
                    return Err(Error::Validation("bath coupling has the wrong dimension".into()));
                }
                BathChannel::new(l, b.mean_occupation)
            })
            .collect::<Result<Vec<_>>>()?;
        let detection = match &self.detection {
            Some(s) => build_detection(&s.scheme, s.phase, s.efficiency, &s.mode)?,
            None => Detection::counting(),
        };
        let g = &self.grid;
        let dt = match g.dt {
            Some(dt) => dt,
            None => default_dt(&system, bandwidth(&self.packet)),
        };
        let grid = TimeGrid::new(g.t_start, g.t_end, dt)?;
        if grid.steps > MAX_STEPS {
            return Err(Error::Validation(format!("grid has {} steps (limit {MAX_STEPS})", grid.steps)));
        }
        let operators = self
            .operators
            .iter()
            .map(|o| Ok((o.name.clone(), matrix(&o.matrix, &o.name)?)))
            .collect::<Result<Vec<_>>>()?;
        let names: Vec<String> = if self.observables.is_empty() {
            default_observables(d)
        } else {
            self.observables.clone()
        };
        let observables = parse_observables(&names, &operators, d)?;
        Ok(LoadedScenario {
            name: self.name.clone().unwrap_or_else(|| "scenario".into()),
            scenario: Scenario {
                system,
                initial_state,
                packet,
                field,
                baths,
                detection,
                grid,
            },
            observables,
            operators,
            seed: self.seed.unwrap_or(0),
        })
    }
}

pub fn default_observables(dim: usize) -> Vec<String> {
    let mut v: Vec<String> = if dim == 2 {
        ["excited_population", "bloch_x", "bloch_y", "bloch_z"].iter().map(|s| s.to_string()).collect()
    } else {
        vec![]
    };
    v.extend(["purity", "photon_flux", "cumulative_counts"].iter().map(|s| s.to_string()));
    v
}

pub fn parse_observables(names: &[String], operators: &[(String, CMat)], dim: usize) -> Result<Vec<Observable>> {
    names
        .iter()
        .map(|n| {
            let o = Observable::parse(n, operators)?;
            o.validate(dim)?;
            Ok(o)
        })
        .collect()
}

/// Parses scenario TOML text.
pub fn parse_scenario(text: &str) -> Result<LoadedScenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::parse(line, e.message().to_string())
    })?;
    file.build()
}

pub const PRESETS: &[&str] = &[
    "two-level-n1",
    "two-level-n2",
    "two-level-n4",
    "coherent-n5-trunc2",
    "coherent-n5-trunc6",
    "coherent-n5-trunc10",
];

/// TOML text of a named preset.
pub fn preset_text(name: &str) -> Option<String> {
    let field = match name {
        "two-level-n1" => "kind = \"fock\"\nphotons = 1".to_string(),
        "two-level-n2" => "kind = \"fock\"\nphotons = 2".to_string(),
        "two-level-n4" => "kind = \"fock\"\nphotons = 4".to_string(),
        "coherent-n5-trunc2" | "coherent-n5-trunc6" | "coherent-n5-trunc10" => {
            let trunc = name.rsplit("trunc").next()?;
            format!("kind = \"coherent\"\namplitude = {}\ntruncation = {trunc}", 5f64.sqrt())
        }
        _ => return None,
    };
    let scheme = if name.starts_with("coherent") { "homodyne" } else { "counting" };
    Some(format!(
        "name = \"{name}\"\nseed = 1\ninitial_state = \"ground\"\n\n\
         [system]\nkind = \"two-level\"\ndecay_rate = 1.0\ndetuning = 0.0\n\n[packet]\nkind = \"gaussian\"\nbandwidth = 1.0\ncenter = 0.0\n\n\
         [field]\n{field}\n\n[detection]\nscheme = \"{scheme}\"\n\n[grid]\nt_start = -4.0\nt_end = 12.0\ndt = 0.001\n"
    ))
}

/// Loads `preset:NAME` or a TOML file.
pub fn load_scenario(source: &str) -> Result<LoadedScenario> {
    if let Some(name) = source.strip_prefix("preset:") {
        let text = preset_text(name).ok_or_else(|| {
            Error::Validation(format!("unknown preset `{name}`; available: {}", PRESETS.join(", ")))
        })?;
        return parse_scenario(&text);
    }
    let text = std::fs::read_to_string(Path::new(source))?;
    parse_scenario(&text)
}

/// Field override syntax: `vacuum`, `fock:N`, `coherent:AMP:TRUNC`.
pub fn parse_field_override(spec: &str) -> Result<FieldState> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Validation(format!("invalid field `{spec}`"));
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
    let field = match parts.as_slice() {
        ["vacuum"] => FieldSpec::Vacuum,
        ["fock", n] => FieldSpec::Fock { photons: num(n)? },
        ["coherent", a, t] => FieldSpec::Coherent {
            amplitude: a.parse().map_err(|_| bad())?,
            amplitude_im: 0.0,
            truncation: num(t)?,
        },
        _ => return Err(bad()),
    };
    build_field(&field)
}
