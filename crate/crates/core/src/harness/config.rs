use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coefficients::{preset, PresetParams, PRESET_NAMES};
use crate::ensemble::{InitialLaw, Model};
use crate::error::{Error, Result};
use crate::geometry::{BuiltinDomain, FieldKind, MovingBall, MovingInterval, PresetField, RoundedBox, TimeDomain};
use crate::grid::TimeGrid;
use crate::ldp::{Control, EventKind, OptConfig};
use crate::noise::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experiment {
    #[serde(rename = "simulate")]
    Simulate,
    #[serde(rename = "picard")]
    Picard,
    #[serde(rename = "chaos")]
    Chaos,
    #[serde(rename = "ldp-rate")]
    LdpRate,
    #[serde(rename = "ldp-rare-event")]
    LdpRareEvent,
    #[serde(rename = "ldp-check-ldp1")]
    LdpCheckLdp1,
    #[serde(rename = "ldp-check-ldp2")]
    LdpCheckLdp2,
    #[serde(rename = "ldp-check-limit-law")]
    LdpCheckLimitLaw,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Simulate,
        Experiment::Picard,
        Experiment::Chaos,
        Experiment::LdpRate,
        Experiment::LdpRareEvent,
        Experiment::LdpCheckLdp1,
        Experiment::LdpCheckLdp2,
        Experiment::LdpCheckLimitLaw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Picard => "picard",
            Experiment::Chaos => "chaos",
            Experiment::LdpRate => "ldp-rate",
            Experiment::LdpRareEvent => "ldp-rare-event",
            Experiment::LdpCheckLdp1 => "ldp-check-ldp1",
            Experiment::LdpCheckLdp2 => "ldp-check-ldp2",
            Experiment::LdpCheckLimitLaw => "ldp-check-limit-law",
        }
    }

    pub fn from_name(name: &str) -> Option<Experiment> {
        Experiment::ALL.into_iter().find(|e| e.name() == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    /// `interval`, `ball` or `rounded_box`.
    pub kind: String,
    #[serde(default = "one")]
    pub radius: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub period: f64,
    /// Ball centre; its length sets the dimension.
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default)]
    pub half_widths: Option<Vec<f64>>,
    #[serde(default)]
    pub corner_radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    /// `normal` or `rotated`.
    pub kind: String,
    /// Rotation in radians for `rotated`.
    #[serde(default)]
    pub angle: f64,
    #[serde(default)]
    pub rho: Option<f64>,
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec {
            kind: "normal".into(),
            angle: 0.0,
            rho: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    pub preset: String,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub drift: Option<Vec<f64>>,
}

impl CoefficientSpec {
    pub fn params(&self) -> PresetParams {
        PresetParams {
            theta: self.theta,
            sigma: self.sigma,
            drift: self.drift.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub horizon: f64,
    pub n_steps: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSpec {
    /// Defaults to the origin.
    pub center: Option<Vec<f64>>,
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticleSpec {
    pub n: usize,
    pub n_list: Vec<usize>,
    pub n_rep: usize,
}

impl Default for ParticleSpec {
    fn default() -> Self {
        ParticleSpec {
            n: 64,
            n_list: vec![8, 32, 128],
            n_rep: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardSpec {
    pub n_copies: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for PicardSpec {
    fn default() -> Self {
        PicardSpec {
            n_copies: 256,
            max_iters: 15,
            tol: 1e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlSpec {
    Zero,
    Constant { value: Vec<f64> },
}

impl Default for ControlSpec {
    fn default() -> Self {
        ControlSpec::Zero
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// The noise-free limit itself.
    Limit,
    TerminalBall { center: Vec<f64>, radius: f64 },
    /// `φ_t = x0 + t · velocity`.
    Linear { velocity: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdpSpec {
    pub epsilon: Vec<f64>,
    pub n_copies: usize,
    /// Deviation threshold for the (LDP2) check.
    pub theta: f64,
    pub event: EventKind,
    pub threshold: f64,
    /// Also estimate the rate of the event's terminal-point proxy.
    pub compare_rate: bool,
    pub target: TargetSpec,
    pub amplitude: f64,
    pub freqs: Vec<u32>,
    pub ldp1_tol: f64,
}

impl Default for LdpSpec {
    fn default() -> Self {
        LdpSpec {
            epsilon: vec![0.4, 0.2, 0.1, 0.05],
            n_copies: 512,
            theta: 0.25,
            event: EventKind::TerminalDeviation,
            threshold: 0.5,
            compare_rate: false,
            target: TargetSpec::Limit,
            amplitude: 1.0,
            freqs: vec![1, 2, 4, 8, 16],
            ldp1_tol: 1e-2,
        }
    }
}

/// One experiment, read from a TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub domain: DomainSpec,
    #[serde(default)]
    pub field: FieldSpec,
    pub coefficients: CoefficientSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub particles: ParticleSpec,
    #[serde(default)]
    pub picard: PicardSpec,
    #[serde(default)]
    pub ldp: LdpSpec,
    #[serde(default)]
    pub control: ControlSpec,
    #[serde(default)]
    pub optimizer: OptConfig,
}

fn one() -> f64 {
    1.0
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Everything a run needs, built from a validated config.
pub struct Resolved {
    pub model: Model,
    pub grid: TimeGrid,
    pub init: InitialLaw,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| bad(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn dim(&self) -> Result<usize> {
        match self.domain.kind.as_str() {
            "interval" => Ok(1),
            "ball" => Ok(self.domain.center.as_ref().map_or(2, Vec::len)),
            "rounded_box" => Ok(self.domain.half_widths.as_ref().map_or(2, Vec::len)),
            other => Err(Error::UnknownPreset {
                kind: "domain",
                name: other.into(),
            }),
        }
    }

    /// Range and preset checks. Touches no files.
    pub fn validate(&self) -> Result<()> {
        if !PRESET_NAMES.contains(&self.coefficients.preset.as_str()) {
            return Err(Error::UnknownPreset {
                kind: "coefficient",
                name: self.coefficients.preset.clone(),
            });
        }
        if !matches!(self.field.kind.as_str(), "normal" | "rotated") {
            return Err(Error::UnknownPreset {
                kind: "direction field",
                name: self.field.kind.clone(),
            });
        }
        let d = self.dim()?;
        let g = &self.grid;
        if !(g.horizon > 0.0 && g.horizon.is_finite()) {
            return Err(bad(format!("grid horizon {} must be positive", g.horizon)));
        }
        if g.n_steps < 2 {
            return Err(bad(format!("grid needs n_steps >= 2, got {}", g.n_steps)));
        }
        let ldp = &self.ldp;
        if ldp.epsilon.is_empty() || ldp.epsilon.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(bad(format!("epsilon values {:?} must lie in (0, 1]", ldp.epsilon)));
        }
        let p = &self.particles;
        if p.n == 0 || p.n_rep == 0 || p.n_list.is_empty() || p.n_list.contains(&0) {
            return Err(bad("particle counts must be positive"));
        }
        if ldp.n_copies == 0 || self.picard.n_copies == 0 {
            return Err(bad("copy counts must be positive"));
        }
        if let Some(c) = &self.init.center {
            if c.len() != d {
                return Err(bad(format!("init centre has {} components, domain has {d}", c.len())));
            }
        }
        if !(self.init.spread >= 0.0) {
            return Err(bad("init spread must be >= 0"));
        }
        if let ControlSpec::Constant { value } = &self.control {
            if value.len() != d {
                return Err(bad(format!("control has {} components, noise has {d}", value.len())));
            }
        }
        Ok(())
    }

    pub fn resolve(&self) -> Result<Resolved> {
        self.validate()?;
        let d = self.dim()?;
        let s = &self.domain;
        let horizon = self.grid.horizon;
        let domain = match s.kind.as_str() {
            "interval" => BuiltinDomain::Interval(MovingInterval::new(s.radius, s.amplitude, s.period, horizon)?),
            "ball" => BuiltinDomain::Ball(MovingBall::new(
                s.center.clone().unwrap_or_else(|| vec![0.0; 2]),
                s.radius,
                s.amplitude,
                s.period,
                horizon,
            )?),
            _ => BuiltinDomain::Box(RoundedBox::new(
                s.half_widths.clone().unwrap_or_else(|| vec![1.0; 2]),
                s.corner_radius.unwrap_or(0.2),
                s.amplitude,
                s.period,
                horizon,
            )?),
        };
        let domain = Arc::new(domain);
        let kind = match self.field.kind.as_str() {
            "rotated" => FieldKind::Rotated(self.field.angle),
            _ => FieldKind::Normal,
        };
        let rho = self.field.rho.unwrap_or_else(|| PresetField::default_rho(kind));
        let field = PresetField::new(domain.clone(), kind, rho)?;
        let cs = preset(&self.coefficients.preset, &self.coefficients.params(), d, domain.bounding_radius())?;
        let model = Model::new(domain, Arc::new(field), Arc::new(cs))?;
        let grid = TimeGrid::uniform(horizon, self.grid.n_steps)?;
        let init = InitialLaw {
            center: self.init.center.clone().unwrap_or_else(|| vec![0.0; d]),
            spread: self.init.spread,
            seed: derive_seed(self.master_seed, "init"),
        };
        Ok(Resolved { model, grid, init })
    }

    pub(crate) fn control(&self, grid: &TimeGrid, m: usize) -> Result<Control> {
        match &self.control {
            ControlSpec::Zero => Ok(Control::zeros(grid.clone(), m)),
            ControlSpec::Constant { value } => Control::constant(grid.clone(), value),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [domain]
        kind = "interval"
        [coefficients]
        preset = "zero"
        [grid]
        horizon = 1.0
        n_steps = 10
    "#;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.ldp.epsilon, vec![0.4, 0.2, 0.1, 0.05]);
        assert_eq!(c.field.kind, "normal");
        let r = c.resolve().unwrap();
        assert_eq!(r.model.dim(), 1);
        assert_eq!(r.grid.n_steps(), 10);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.experiment = Some(Experiment::LdpCheckLimitLaw);
        c.control = ControlSpec::Constant { value: vec![0.5] };
        c.ldp.target = TargetSpec::TerminalBall {
            center: vec![0.3],
            radius: 0.1,
        };
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn distinct_codes_for_distinct_failures() {
        let preset = MINIMAL.replace("\"zero\"", "\"nope\"");
        assert_eq!(ExperimentConfig::from_toml(&preset).unwrap().validate().unwrap_err().code(), 10);
        let grid = MINIMAL.replace("n_steps = 10", "n_steps = 1");
        assert_eq!(ExperimentConfig::from_toml(&grid).unwrap().validate().unwrap_err().code(), 11);
        let eps = format!("{MINIMAL}\n[ldp]\nepsilon = [1.5]\n");
        assert_eq!(ExperimentConfig::from_toml(&eps).unwrap().validate().unwrap_err().code(), 11);
        let typo = MINIMAL.replace("horizon", "horizn");
        assert_eq!(ExperimentConfig::from_toml(&typo).unwrap_err().code(), 11);
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(Experiment::from_name(e.name()), Some(e));
        }
    }
}
