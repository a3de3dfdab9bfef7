//! Scenario files.
//!
//! A scenario is a TOML document. Every key is optional; missing keys take
//! the defaults below. Unknown keys are rejected.
//!
//! ```toml
//! mode = "run"            # spectrum | run | shoot | verify-all
//! k = 1                   # mode index, 1..=8 (shoot: 2 or 3)
//! b_k0 = -0.01            # b_k(0); default -0.01 for k = 1, 0.03 otherwise
//! grid = 1024             # intervals N, even, >= 64
//! ds = 1e-4               # default 1e-4 * 1024 / N
//! s_max = 6.0             # run horizon in s
//! record_every = 10       # steps between records
//! out = "out"             # output directory
//! seed = 7                # seed of the spectral-gap sampler
//! jobs = 0                # worker threads, 0 = all cores
//! initial_lower = []      # (b_j(0))_{j<k} for `run` with k > 1
//! shoot_result = "..."    # or: a shooting JSON to take them from
//!
//! [spectrum]
//! b = 0.01                # weight of the eigen table
//! count = 8               # eigenpairs in the table
//! sweep = [0.005, 0.01, 0.02]
//!
//! [shoot]
//! s_max = 0.9             # default 0.9 for k = 2, 0.3 for k = 3
//! amplitude = 0.02        # A_k in b(s) = A_k e^{-lambda_k s} / (s + 1)
//! ceiling = 1.0           # D_k
//! half_width = 0.015      # initial bracket [-w, w] for each b_j(0)
//! tolerance = 1e-12
//!
//! [tolerances]
//! mass = 1e-6
//! rate = 0.02             # default 0.02 for k = 1, 0.03 otherwise
//! terminal = 1e-4
//! norm_floor = 1e-12
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::spectrum::MIN_INTERVALS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Spectrum,
    #[default]
    Run,
    Shoot,
    VerifyAll,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub b: f64,
    pub count: usize,
    pub sweep: Vec<f64>,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            b: 0.01,
            count: 8,
            sweep: vec![0.005, 0.01, 0.02],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
    pub amplitude: f64,
    pub ceiling: f64,
    pub half_width: f64,
    pub tolerance: f64,
}

impl Default for ShootSection {
    fn default() -> Self {
        Self {
            s_max: None,
            amplitude: 0.02,
            ceiling: 1.0,
            half_width: 0.015,
            tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub mass: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    pub terminal: f64,
    pub norm_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            mass: 1e-6,
            rate: None,
            terminal: 1e-4,
            norm_floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_k0: Option<f64>,
    pub grid: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ds: Option<f64>,
    pub s_max: f64,
    pub record_every: usize,
    pub out: PathBuf,
    pub seed: u64,
    pub jobs: usize,
    pub initial_lower: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shoot_result: Option<PathBuf>,
    pub spectrum: SpectrumSection,
    pub shoot: ShootSection,
    pub tolerances: Tolerances,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Run,
            k: 1,
            b_k0: None,
            grid: 1024,
            ds: None,
            s_max: 6.0,
            record_every: 10,
            out: PathBuf::from("out"),
            seed: 7,
            jobs: 0,
            initial_lower: Vec::new(),
            shoot_result: None,
            spectrum: SpectrumSection::default(),
            shoot: ShootSection::default(),
            tolerances: Tolerances::default(),
        }
    }
}

impl ScenarioConfig {
    /// Parse and validate. Syntax errors carry the line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn b_k0(&self) -> f64 {
        self.b_k0.unwrap_or(if self.k == 1 { -0.01 } else { 0.03 })
    }

    pub fn ds(&self) -> f64 {
        self.ds.unwrap_or(1e-4 * 1024.0 / self.grid as f64)
    }

    pub fn shoot_s_max(&self) -> f64 {
        self.shoot
            .s_max
            .unwrap_or(if self.k == 3 { 0.3 } else { 0.9 })
    }

    pub fn rate_tolerance(&self) -> f64 {
        self.tolerances
            .rate
            .unwrap_or(if self.k == 1 { 0.02 } else { 0.03 })
    }

    pub fn radial_grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.grid)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(1..=8).contains(&self.k) {
            return bad(format!("k must be in 1..=8, got {}", self.k));
        }
        if self.mode == Mode::Shoot && !(2..=3).contains(&self.k) {
            return bad(format!("shooting supports k = 2 or 3, got {}", self.k));
        }
        let b = self.b_k0();
        if !(b.abs() <= 0.05) {
            return bad(format!("|b_k0| must be at most 0.05, got {b}"));
        }
        if self.mode == Mode::Run && b == 0.0 {
            return bad("b_k0 = 0 has no regime to observe".into());
        }
        if self.grid < MIN_INTERVALS || self.grid % 2 != 0 {
            return bad(format!(
                "grid must be even and >= {MIN_INTERVALS}, got {}",
                self.grid
            ));
        }
        let h = 1.0 / self.grid as f64;
        let ds = self.ds();
        if !(ds > 0.0 && ds <= 0.5 * h) {
            return bad(format!(
                "ds must lie in (0, h/2] = (0, {}], got {ds}",
                0.5 * h
            ));
        }
        if !(self.s_max > 0.0) {
            return bad(format!("s_max must be positive, got {}", self.s_max));
        }
        if self.record_every == 0 {
            return bad("record_every must be positive".into());
        }
        if !self.initial_lower.is_empty() && self.initial_lower.len() != self.k - 1 {
            return bad(format!(
                "initial_lower needs {} values for k = {}",
                self.k - 1,
                self.k
            ));
        }
        if !(self.spectrum.b.abs() <= crate::weighted_space::WEIGHT_CAP) {
            return bad(format!(
                "spectrum.b must satisfy |b| <= {}",
                crate::weighted_space::WEIGHT_CAP
            ));
        }
        if !(1..=crate::spectrum::MAX_EIGENPAIRS).contains(&self.spectrum.count) {
            return bad(format!(
                "spectrum.count must be in 1..={}",
                crate::spectrum::MAX_EIGENPAIRS
            ));
        }
        if self.spectrum.sweep.len() < 3
            || self
                .spectrum
                .sweep
                .iter()
                .any(|b| *b == 0.0 || !(b.abs() < 0.05))
        {
            return bad("spectrum.sweep needs at least 3 values in (-0.05, 0.05) without 0".into());
        }
        let sh = &self.shoot;
        if !(sh.ceiling > 0.0
            && sh.half_width > 0.0
            && sh.tolerance > 0.0
            && self.shoot_s_max() > 0.0)
        {
            return bad(
                "shoot.ceiling, shoot.half_width, shoot.tolerance and shoot.s_max must be positive"
                    .into(),
            );
        }
        if self.k > 1 && !(sh.amplitude.abs() < b.abs()) && self.mode == Mode::Shoot {
            return bad(format!(
                "shoot.amplitude must be smaller than |b_k0| = {}",
                b.abs()
            ));
        }
        let t = &self.tolerances;
        if !(t.mass > 0.0 && t.terminal > 0.0 && t.norm_floor > 0.0 && self.rate_tolerance() > 0.0)
        {
            return bad("tolerances must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        let c = ScenarioConfig::parse("").unwrap();
        assert_eq!(c, ScenarioConfig::default());
        assert_eq!(c.b_k0(), -0.01);
        assert!((c.ds() - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn round_trip() {
        let text = "mode = \"shoot\"\nk = 3\nb_k0 = 0.04\ngrid = 512\n[shoot]\ns_max = 0.4\n[tolerances]\nrate = 0.05\n";
        let c = ScenarioConfig::parse(text).unwrap();
        let again = ScenarioConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.mode, Mode::Shoot);
        assert_eq!(again.shoot_s_max(), 0.4);
    }

    #[test]
    fn errors_name_the_line() {
        let err = ScenarioConfig::parse("k = 1\ngrid = \n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert_eq!(err.exit_code(), 1);
        let err = ScenarioConfig::parse("k = 1\nbogus = 3\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn validation() {
        assert!(ScenarioConfig::parse("mode = \"shoot\"\nk = 4\n").is_err());
        assert!(ScenarioConfig::parse("grid = 1023\n").is_err());
        assert!(ScenarioConfig::parse("grid = 256\nds = 0.01\n").is_err());
        assert!(ScenarioConfig::parse("b_k0 = 0.2\n").is_err());
        assert!(ScenarioConfig::parse("k = 2\ninitial_lower = [0.1, 0.2]\n").is_err());
    }
}
