//! The TOML run configuration and its mapping onto [`SimConfig`].

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::noise::{CovarianceSpectrum, DiffusionFamily};
use crate::ops::{FractionalDissipation, SobolevIndex};
use crate::solver::{Formulation, InitialCondition, Monitor, NoiseModel, SimConfig};
use crate::spectral_field::WavenumberLattice;

use super::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub physics: PhysicsSection,
    pub grid: GridSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub monitor: MonitorSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudySection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulationName {
    Velocity,
    Vorticity,
    Both,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub alpha: f64,
    #[serde(default = "one")]
    pub nu: f64,
    #[serde(default = "velocity")]
    pub formulation: FormulationName,
    #[serde(default = "yes")]
    pub nonlinear: bool,
}

fn one() -> f64 {
    1.0
}

fn velocity() -> FormulationName {
    FormulationName::Velocity
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "one_usize")]
    pub record_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSection {
    TaylorGreen {
        #[serde(default = "one")]
        amplitude: f64,
    },
    Shear {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one_i32")]
        wavenumber: i32,
    },
    Random {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "default_decay")]
        decay: f64,
        #[serde(default)]
        seed: u64,
    },
    File {
        path: PathBuf,
    },
}

fn one_i32() -> i32 {
    1
}

fn default_decay() -> f64 {
    2.5
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection::TaylorGreen { amplitude: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    Additive,
    LinearMultiplicative,
    BoundedSaturating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: NoiseKind,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "one")]
    pub r0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_q: Option<f64>,
    /// Radial covariance table, `q` per shell `round(|k|) = 1, 2, ...`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            kind: NoiseKind::None,
            sigma: 1.0,
            r0: 1.0,
            gamma_q: None,
            table: None,
            seed: 0,
        }
    }
}

fn default_threshold() -> f64 {
    1e6
}

fn two() -> f64 {
    2.0
}

fn four() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorSection {
    /// Smoothness of the monitor norm; defaults to `(4 − alpha)/4`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default = "two")]
    pub q: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Integrability of the gradient norm in the diagnostics.
    #[serde(default = "four")]
    pub grad_q: f64,
}

impl Default for MonitorSection {
    fn default() -> Self {
        MonitorSection {
            beta: None,
            q: 2.0,
            threshold: 1e6,
            grad_q: 4.0,
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Write a snapshot every this many steps; 0 disables snapshots.
    #[serde(default)]
    pub snapshots: u64,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_dir(),
            snapshots: 0,
        }
    }
}

fn default_p() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub levels: Vec<usize>,
    #[serde(default)]
    pub dt: Vec<f64>,
    #[serde(default = "one_usize")]
    pub paths: usize,
    #[serde(default)]
    pub moment_levels: Vec<usize>,
    #[serde(default = "one_usize")]
    pub moment_paths: usize,
    #[serde(default = "default_p")]
    pub p: u32,
}

fn invalid(field: &'static str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {message}"))
}

impl RunConfig {
    /// Parses a config or manifest; a manifest's `[run]` table is ignored.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        table.remove("run");
        RunConfig::deserialize(table).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn to_sim(&self) -> Result<SimConfig, CliError> {
        let p = &self.physics;
        let diss = FractionalDissipation::new(p.alpha, p.nu).map_err(|e| match e {
            crate::ops::OpsError::Alpha(_) => invalid("physics.alpha", e),
            _ => invalid("physics.nu", e),
        })?;
        let lattice = WavenumberLattice::new(self.grid.n).map_err(|e| invalid("grid.n", e))?;
        let initial = match &self.initial {
            InitialSection::TaylorGreen { amplitude } => InitialCondition::TaylorGreen {
                amplitude: *amplitude,
            },
            InitialSection::Shear {
                amplitude,
                wavenumber,
            } => InitialCondition::Shear {
                amplitude: *amplitude,
                wavenumber: *wavenumber,
            },
            InitialSection::Random {
                amplitude,
                decay,
                seed,
            } => InitialCondition::Random {
                amplitude: *amplitude,
                decay: *decay,
                seed: *seed,
            },
            InitialSection::File { path } => InitialCondition::File(path.clone()),
        };
        let m = &self.monitor;
        let beta = m.beta.unwrap_or((4.0 - p.alpha) / 4.0);
        let index = SobolevIndex::new(beta, m.q).map_err(|e| invalid("monitor.q", e))?;
        let mut sim = SimConfig::new(diss, lattice, self.grid.dt, self.grid.horizon, initial);
        sim.nonlinear = p.nonlinear;
        sim.formulation = match p.formulation {
            FormulationName::Velocity => Formulation::Velocity,
            FormulationName::Vorticity => Formulation::Vorticity,
            FormulationName::Both => Formulation::Both,
        };
        sim.record_stride = self.grid.record_stride;
        sim.monitor = Monitor {
            index,
            threshold: m.threshold,
        };
        sim.grad_q = m.grad_q;
        sim.noise = self.noise_model()?;
        sim.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(sim)
    }

    fn noise_model(&self) -> Result<Option<NoiseModel>, CliError> {
        let n = &self.noise;
        let family = match n.kind {
            NoiseKind::None => return Ok(None),
            NoiseKind::Additive => DiffusionFamily::Additive { sigma: n.sigma },
            NoiseKind::LinearMultiplicative => DiffusionFamily::LinearMultiplicative { sigma: n.sigma },
            NoiseKind::BoundedSaturating => DiffusionFamily::BoundedSaturating {
                sigma: n.sigma,
                radius: n.r0,
            },
        };
        family.validate().map_err(|e| match e {
            crate::noise::NoiseError::Radius(_) => invalid("noise.r0", e),
            _ => invalid("noise.sigma", e),
        })?;
        let spectrum = match (&n.gamma_q, &n.table) {
            (Some(_), Some(_)) => {
                return Err(invalid("noise.table", "give either gamma_q or table, not both"))
            }
            (Some(g), None) => {
                CovarianceSpectrum::power_law(*g).map_err(|e| invalid("noise.gamma_q", e))?
            }
            (None, Some(t)) => {
                CovarianceSpectrum::shells(t.clone()).map_err(|e| invalid("noise.table", e))?
            }
            (None, None) => return Err(invalid("noise.gamma_q", "required unless a table is given")),
        };
        Ok(Some(NoiseModel {
            spectrum,
            family,
            seed: n.seed,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[physics]
alpha = 1.5
nu = 0.5
formulation = "both"

[grid]
n = 8
dt = 0.01
horizon = 0.1
record_stride = 2

[initial]
kind = "random"
decay = 3.0
seed = 4

[noise]
kind = "bounded_saturating"
sigma = 0.3
r0 = 2.0
gamma_q = 2.5
seed = 17

[monitor]
threshold = 1e6
"#;

    #[test]
    fn parses_and_maps() {
        let cfg = RunConfig::parse(SAMPLE).unwrap();
        let sim = cfg.to_sim().unwrap();
        assert_eq!(sim.formulation, Formulation::Both);
        assert_eq!(sim.record_stride, 2);
        assert_eq!(sim.monitor.index.beta, 0.625);
        let noise = sim.noise.unwrap();
        assert_eq!(noise.seed, 17);
        assert_eq!(noise.family, DiffusionFamily::BoundedSaturating { sigma: 0.3, radius: 2.0 });
    }

    #[test]
    fn round_trip_through_toml() {
        let cfg = RunConfig::parse(SAMPLE).unwrap();
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.to_sim().unwrap(), again.to_sim().unwrap());
    }

    #[test]
    fn manifest_run_table_is_ignored() {
        let text = format!("{SAMPLE}\n[run]\nversion = \"0.1.0\"\nseed = 17\n");
        assert_eq!(RunConfig::parse(&text).unwrap(), RunConfig::parse(SAMPLE).unwrap());
    }

    #[test]
    fn errors_name_the_field() {
        let bad = SAMPLE.replace("alpha = 1.5", "alpha = 2.5");
        let err = RunConfig::parse(&bad).unwrap().to_sim().unwrap_err().to_string();
        assert!(err.contains("physics.alpha") && err.contains("(0, 2]"), "{err}");
        let bad = SAMPLE.replace("gamma_q = 2.5", "gamma_q = 2.0");
        let err = RunConfig::parse(&bad).unwrap().to_sim().unwrap_err().to_string();
        assert!(err.contains("noise.gamma_q"), "{err}");
        let bad = SAMPLE.replace("n = 8", "n = 8\nwidth = 3");
        let err = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("width"), "{err}");
    }
}
