//! Time-dependent RWA Hamiltonian of the Λ atom and the cavity mode, with
//! closed (Schrödinger) and open (Lindblad) integration.

mod evolve;
mod model;
mod oracle;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{DensityOperator, FockTruncation, LinearOperator, PureState, State};
use crate::integrate::IntegrationStats;
use crate::output::write_csv;
use crate::pulses::PulseSchedule;

pub use evolve::evolve_block;
pub use model::{Model, Roles};
pub use oracle::{oracle_evolve, ORACLE_DIM_CAP, ORACLE_DT};

/// Default absolute/relative tolerance for closed evolution.
pub const CLOSED_TOL: f64 = 1e-9;
/// Default absolute/relative tolerance for open evolution.
pub const OPEN_TOL: f64 = 1e-8;
/// Largest space the Lindblad integrator will take on.
pub const LINDBLAD_DIM_CAP: usize = 400;
/// Largest space for state-vector evolution.
pub const PURE_DIM_CAP: usize = 4096;

/// Physical parameters of one sweep, in units of `g` (rates) and `1/g`
/// (times).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Detuning of `e`.
    #[serde(default)]
    pub delta: f64,
    /// Cavity field decay rate.
    #[serde(default)]
    pub kappa: f64,
    /// Decay rate of `e` into the sink level.
    #[serde(default)]
    pub gamma_e: f64,
    #[serde(default)]
    pub trunc: FockTruncation,
    pub schedule: PulseSchedule,
    /// Integrator tolerance; defaults depend on whether the run is open.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Cavity-only decay interval between protocol stages.
    #[serde(default)]
    pub idle: f64,
}

impl SystemConfig {
    pub fn new(schedule: PulseSchedule) -> Self {
        Self {
            delta: 0.0,
            kappa: 0.0,
            gamma_e: 0.0,
            trunc: FockTruncation::default(),
            schedule,
            tolerance: None,
            idle: 0.0,
        }
    }

    pub fn with_losses(mut self, kappa: f64, gamma_e: f64) -> Self {
        self.kappa = kappa;
        self.gamma_e = gamma_e;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_trunc(mut self, trunc: FockTruncation) -> Self {
        self.trunc = trunc;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = Some(tol);
        self
    }

    pub fn with_schedule(mut self, schedule: PulseSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn is_closed(&self) -> bool {
        self.kappa == 0.0 && self.gamma_e == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta.is_finite() {
            return Err(Error::InvalidParameter("delta must be finite".into()));
        }
        for (name, v) in [("kappa", self.kappa), ("gamma_e", self.gamma_e), ("idle", self.idle)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if let Some(tol) = self.tolerance {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(Error::InvalidParameter(format!("tolerance {tol} not in (0, 1)")));
            }
        }
        self.schedule.validate()
    }

    pub(crate) fn resolved_tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(if self.is_closed() { CLOSED_TOL } else { OPEN_TOL })
    }
}

/// `H(t)` on the Λ atom ⊗ single-mode space.
pub fn build_hamiltonian(t: f64, config: &SystemConfig) -> Result<LinearOperator> {
    Model::lambda(config)?.hamiltonian(t)
}

/// Eigenvalues of `H` on `span{|g,n-1>, |e,n-1>, |g',n>}`: `0` and
/// `(Δ ± sqrt(Δ² + 4 gamma_A² + 4 n gamma_B²))/2`. The `n = 0` sector is
/// the single state `|g',0>` with eigenvalue 0.
pub fn triplet_eigenenergies(n: usize, t: f64, config: &SystemConfig) -> Result<Vec<f64>> {
    let (ga, gb) = config.schedule.couplings(t)?;
    if n == 0 {
        return Ok(vec![0.0]);
    }
    let d = config.delta;
    let root = (d * d + 4.0 * ga * ga + 4.0 * n as f64 * gb * gb).sqrt();
    Ok(vec![0.0, 0.5 * (d + root), 0.5 * (d - root)])
}

/// Options for a single evolution call.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EvolveOptions {
    /// Overrides the default tolerance.
    pub tolerance: Option<f64>,
    /// Number of uniformly spaced diagnostic samples (0 disables the
    /// series; otherwise at least the two endpoints are recorded).
    pub series_points: usize,
}

impl EvolveOptions {
    pub fn from_config(config: &SystemConfig) -> Self {
        Self { tolerance: Some(config.resolved_tolerance()), series_points: 0 }
    }

    pub fn with_series(mut self, points: usize) -> Self {
        self.series_points = points;
        self
    }
}

/// Populations along a trajectory. `p_dark`/`p_bright` sum the projections
/// onto the instantaneous dark and bright states of every photon sector
/// (the uncoupled `|g',0>` counts as dark).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub p_dark: f64,
    pub p_bright: f64,
    pub p_e: f64,
    pub p_sink: f64,
    pub trace: f64,
}

pub const SERIES_HEADER: [&str; 6] = ["t", "P_dark", "P_bright", "P_e", "P_sink", "trace"];

pub fn write_series_csv<W: Write>(w: W, series: &[SeriesPoint]) -> Result<()> {
    let rows: Vec<Vec<f64>> =
        series.iter().map(|p| vec![p.t, p.p_dark, p.p_bright, p.p_e, p.p_sink, p.trace]).collect();
    write_csv(w, &SERIES_HEADER, &rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolveResult {
    pub final_state: State,
    /// Population of the sink level at the end (0 without a sink).
    pub sink_population: f64,
    /// Trace (density) or squared norm (pure) at the end.
    pub trace: f64,
    pub stats: IntegrationStats,
    pub series: Vec<SeriesPoint>,
}

impl EvolveResult {
    pub fn pure(&self) -> Option<&PureState> {
        match &self.final_state {
            State::Pure(p) => Some(p),
            State::Mixed(_) => None,
        }
    }

    pub fn density(&self) -> DensityOperator {
        self.final_state.to_density()
    }
}

/// Closed evolution of a Λ-atom ⊗ mode state vector through the sweep.
pub fn evolve_schrodinger(psi0: &PureState, config: &SystemConfig) -> Result<EvolveResult> {
    if !config.is_closed() {
        return Err(Error::InvalidParameter("Schrödinger evolution needs kappa = gamma_e = 0".into()));
    }
    Model::lambda(config)?.evolve_pure(psi0, &EvolveOptions::from_config(config))
}

/// Lindblad evolution of a Λ-atom ⊗ mode density operator through the
/// sweep.
pub fn evolve_lindblad(rho0: &DensityOperator, config: &SystemConfig) -> Result<EvolveResult> {
    Model::lambda(config)?.evolve_density(rho0, &EvolveOptions::from_config(config))
}
