use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toda::fields::TrigPoly;
use toda::solver::{SolveOptions, Thresholds};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Solve,
    #[serde(alias = "continuation")]
    #[value(name = "continue", alias = "continuation")]
    Continue,
    Analyze,
    Bounds,
    Verdict,
    ScalarKw,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Continue => "continue",
            Mode::Analyze => "analyze",
            Mode::Bounds => "bounds",
            Mode::Verdict => "verdict",
            Mode::ScalarKw => "scalar-kw",
        }
    }
}

fn one() -> TrigPoly {
    TrigPoly::constant(1.0)
}

fn default_grid() -> usize {
    64
}

fn default_radius() -> f64 {
    0.1
}

fn default_l() -> f64 {
    10.0
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default)]
    pub l: Option<f64>,
    #[serde(default)]
    pub eps_list: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub h1: TrigPoly,
    #[serde(default = "one")]
    pub h2: TrigPoly,
    /// solve: rho_i = 4 pi - eps
    #[serde(default)]
    pub eps: Option<f64>,
    /// solve: explicit (rho1, rho2), overrides eps
    #[serde(default)]
    pub rho: Option<[f64; 2]>,
    /// scalar-kw: rho in (0, 8 pi)
    #[serde(default)]
    pub rho_kw: Option<f64>,
    /// continue / analyze: strictly decreasing eps values
    #[serde(default)]
    pub schedule: Option<Vec<f64>>,
    /// amplitude of the seeded random start; 0 uses the deterministic default start
    #[serde(default)]
    pub init_amplitude: f64,
    #[serde(default = "default_radius")]
    pub ball_radius: f64,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default = "yes")]
    pub heatmaps: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn l(&self) -> f64 {
        self.bounds.l.unwrap_or_else(default_l)
    }

    pub fn validate(&self, mode: Mode) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(m) = self.mode {
            if m != mode {
                return bad(format!("field `mode`: config says {} but verb is {}", m.name(), mode.name()));
            }
        }
        if !(32..=512).contains(&self.grid) || !self.grid.is_power_of_two() {
            return bad(format!("field `grid`: {} is not a power of two in [32, 512]", self.grid));
        }
        self.solver.validate().map_err(|e| CliError::Config(format!("table `solver`: {e}")))?;
        if !(self.init_amplitude >= 0.0) {
            return bad("field `init_amplitude`: must be >= 0".into());
        }
        match mode {
            Mode::Solve => match (self.eps, self.rho) {
                (None, None) => return bad("mode solve: need `eps` or `rho`".into()),
                (_, Some(r)) if !(r[0] > 0.0 && r[1] > 0.0) => return bad("field `rho`: entries must be positive".into()),
                (Some(e), None) if !(e > 0.0 && e < 4.0 * std::f64::consts::PI) => {
                    return bad(format!("field `eps`: {e} not in (0, 4 pi)"))
                }
                _ => {}
            },
            Mode::Continue | Mode::Analyze => {
                if let Some(s) = &self.schedule {
                    if s.is_empty() || s.windows(2).any(|w| !(w[1] < w[0])) || !(s[s.len() - 1] > 0.0) {
                        return bad("field `schedule`: must be non-empty, positive, strictly decreasing".into());
                    }
                }
                if mode == Mode::Analyze && !(self.ball_radius >= 4.0 / self.grid as f64) {
                    return bad(format!("field `ball_radius`: {} below 4/N = {}", self.ball_radius, 4.0 / self.grid as f64));
                }
            }
            Mode::ScalarKw => match self.rho_kw {
                None => return bad("mode scalar-kw: need `rho_kw`".into()),
                Some(r) if !(r > 0.0 && r < 8.0 * std::f64::consts::PI) => {
                    return bad(format!("field `rho_kw`: {r} not in (0, 8 pi)"))
                }
                _ => {}
            },
            Mode::Bounds | Mode::Verdict => {
                if !(self.l() > 0.0) {
                    return bad("table `bounds`: `l` must be positive".into());
                }
            }
        }
        Ok(())
    }
}
