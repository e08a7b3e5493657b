use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::SystemConfig;
use crate::error::{Error, Result};
use crate::fock::FockTruncation;
use crate::protocol::{Mode, MAX_JOINT_MODES};
use crate::pulses::PulseSchedule;
use crate::wigner::GridSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Measure,
    ProjectNonvacuum,
    Scissors,
    NumberResolve,
    JointVacuum,
    SweepFig3,
    WignerFig4,
    AdiabaticStudy,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Measure,
        Experiment::ProjectNonvacuum,
        Experiment::Scissors,
        Experiment::NumberResolve,
        Experiment::JointVacuum,
        Experiment::SweepFig3,
        Experiment::WignerFig4,
        Experiment::AdiabaticStudy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Measure => "measure",
            Experiment::ProjectNonvacuum => "project-nonvacuum",
            Experiment::Scissors => "scissors",
            Experiment::NumberResolve => "number-resolve",
            Experiment::JointVacuum => "joint-vacuum",
            Experiment::SweepFig3 => "sweep-fig3",
            Experiment::WignerFig4 => "wigner-fig4",
            Experiment::AdiabaticStudy => "adiabatic-study",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// Coarse log grid plus golden-section refinement over the sweep time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TSearch {
    #[serde(default = "TSearch::default_min")]
    pub t_min: f64,
    #[serde(default = "TSearch::default_max")]
    pub t_max: f64,
    #[serde(default = "TSearch::default_grid")]
    pub grid: usize,
    /// Bracket width at which the refinement stops, relative to `T`.
    #[serde(default = "TSearch::default_rel_tol")]
    pub rel_tol: f64,
}

impl TSearch {
    fn default_min() -> f64 {
        5.0
    }
    fn default_max() -> f64 {
        500.0
    }
    fn default_grid() -> usize {
        12
    }
    fn default_rel_tol() -> f64 {
        1e-3
    }
}

impl Default for TSearch {
    fn default() -> Self {
        Self {
            t_min: Self::default_min(),
            t_max: Self::default_max(),
            grid: Self::default_grid(),
            rel_tol: Self::default_rel_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdiabaticStudy {
    #[serde(default = "AdiabaticStudy::default_n")]
    pub n_list: Vec<usize>,
    #[serde(default = "AdiabaticStudy::default_t")]
    pub t_list: Vec<f64>,
    /// Overrides the system detuning for the study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl AdiabaticStudy {
    fn default_n() -> Vec<usize> {
        vec![1, 2, 3]
    }
    /// `20 * 2^{k/2}`, k = 0..=10: 20 to 640 in half-octave steps.
    pub fn default_t() -> Vec<f64> {
        (0..=10).map(|k| 20.0 * 2f64.powf(k as f64 / 2.0)).collect()
    }
}

impl Default for AdiabaticStudy {
    fn default() -> Self {
        Self { n_list: Self::default_n(), t_list: Self::default_t(), delta: None }
    }
}

/// One run of the harness. Rates are in units of `g`, times in `1/g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// If given, must match the experiment named on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    #[serde(default = "RunConfig::default_system")]
    pub system: SystemConfig,
    #[serde(default = "RunConfig::default_mode")]
    pub mode: Mode,
    /// Coherent amplitude of the input field.
    #[serde(default = "RunConfig::default_alpha")]
    pub alpha: f64,
    #[serde(default = "RunConfig::default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "RunConfig::default_kappas")]
    pub kappas: Vec<f64>,
    #[serde(default)]
    pub t_search: TSearch,
    #[serde(default = "RunConfig::default_n_cut")]
    pub n_cut: usize,
    /// Number of modes in the joint-vacuum experiment.
    #[serde(default = "RunConfig::default_modes")]
    pub modes: usize,
    #[serde(default = "RunConfig::default_restore")]
    pub restore: bool,
    #[serde(default)]
    pub wigner_grid: GridSpec,
    #[serde(default)]
    pub adiabatic: AdiabaticStudy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Reserved; every computation is deterministic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl RunConfig {
    /// `kappa = 0.005`, `gamma_e = 0.01`, `Δ = 0`, `T = 100`.
    fn default_system() -> SystemConfig {
        SystemConfig::new(PulseSchedule::new(100.0)).with_losses(0.005, 0.01)
    }
    fn default_mode() -> Mode {
        Mode::Simulated
    }
    fn default_alpha() -> f64 {
        1.0
    }
    fn default_alphas() -> Vec<f64> {
        (1..=8).map(|k| 0.25 * k as f64).collect()
    }
    fn default_kappas() -> Vec<f64> {
        vec![0.0, 0.001, 0.002, 0.005, 0.01, 0.02]
    }
    fn default_n_cut() -> usize {
        1
    }
    fn default_modes() -> usize {
        2
    }
    fn default_restore() -> bool {
        true
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.system.validate().map_err(|e| Error::Config(e.to_string()))?;
        let finite_pos = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_pos(self.alpha) {
            return bad(format!("alpha = {} must be finite and >= 0", self.alpha));
        }
        if self.alphas.is_empty() || !self.alphas.iter().all(|a| finite_pos(*a)) {
            return bad("alphas must be a non-empty list of finite values >= 0".into());
        }
        if self.kappas.is_empty() || !self.kappas.iter().all(|k| finite_pos(*k)) {
            return bad("kappas must be a non-empty list of finite rates >= 0".into());
        }
        let ts = &self.t_search;
        if !(ts.t_min > 0.0 && ts.t_max > ts.t_min && ts.t_max.is_finite()) {
            return bad(format!("T search range [{}, {}] must satisfy 0 < T_min < T_max", ts.t_min, ts.t_max));
        }
        if ts.grid < 3 {
            return bad(format!("T search grid needs at least 3 points, got {}", ts.grid));
        }
        if !(ts.rel_tol > 0.0 && ts.rel_tol < 1.0) {
            return bad(format!("T search rel_tol {} not in (0, 1)", ts.rel_tol));
        }
        if self.n_cut == 0 {
            return bad("n_cut must be >= 1".into());
        }
        if self.modes == 0 || self.modes > MAX_JOINT_MODES {
            return bad(format!("modes must be in 1..={MAX_JOINT_MODES}"));
        }
        self.wigner_grid.validate().map_err(|e| Error::Config(e.to_string()))?;
        let a = &self.adiabatic;
        if a.n_list.is_empty() || a.n_list.contains(&0) {
            return bad("adiabatic.n_list must be non-empty with n >= 1".into());
        }
        if a.t_list.is_empty() || !a.t_list.iter().all(|t| t.is_finite() && *t > 0.0) {
            return bad("adiabatic.t_list must be non-empty with T > 0".into());
        }
        if a.t_list.windows(2).any(|w| w[1] <= w[0]) {
            return bad("adiabatic.t_list must be increasing".into());
        }
        if let Some(d) = a.delta {
            if !d.is_finite() {
                return bad("adiabatic.delta must be finite".into());
            }
        }
        if self.workers == Some(0) {
            return bad("workers must be >= 1".into());
        }
        Ok(())
    }

    /// Configured truncation, widened if needed to hold `|alpha>`.
    pub fn trunc_for(&self, alpha: f64) -> FockTruncation {
        let need = FockTruncation::for_coherent(alpha);
        if need.n_max() > self.system.trunc.n_max() {
            need
        } else {
            self.system.trunc
        }
    }
}
