//! Experiment drivers behind the command-line front end: config parsing,
//! the per-point optimal-T search, the (alpha, kappa) sweep, the
//! vacuum-stripped Wigner run and the adiabatic scaling study, plus their
//! deterministic file outputs.

mod config;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::{info, warn};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use config::{AdiabaticStudy, Experiment, RunConfig, TSearch};

use crate::adiabatic::{
    adiabatic_report, diabatic_scaling_fit, phase_residual_fit, write_adiabatic_csv, AdiabaticReport,
};
use crate::dynamics::SystemConfig;
use crate::error::{Error, Result};
use crate::fock::{coherent_state, DensityOperator, FockTruncation, PureState, Space};
use crate::output::{round_sig, write_csv};
use crate::protocol::{
    joint_vacuum_measure, measure_vacuum, number_resolving_measure, project_nonvacuum, scissors_truncate, Mode,
};
use crate::search::{golden_section_min, log_space};
use crate::wigner::{negativity_volume, wigner, WignerGrid, CONVENTION};

pub const UNITS: &str = "rates in units of g, times in units of 1/g";
pub const FIG3_HEADER: [&str; 7] = ["alpha", "kappa", "T_opt", "fidelity", "p_success", "p_vacuum", "p_sink"];

/// One simulated photon-replacement run at fixed `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    #[serde(rename = "T")]
    pub t: f64,
    /// Against normalized `(I - P0)|alpha>`; 0 if the branch is empty.
    pub fidelity: f64,
    pub p_success: f64,
    /// Probability of the vacuum outcome as read from the atom.
    pub p_vacuum: f64,
    pub p_sink: f64,
    #[serde(skip)]
    pub output: Option<DensityOperator>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TSearchResult {
    pub alpha: f64,
    pub kappa: f64,
    pub best: PointResult,
    /// The coarse-grid maximum sat on the edge of the search range.
    pub at_edge: bool,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub kappa: f64,
    #[serde(rename = "T_opt")]
    pub t_opt: f64,
    pub fidelity: f64,
    pub p_success: f64,
    pub p_vacuum: f64,
    pub p_sink: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig4Summary {
    pub units: String,
    pub alpha: f64,
    pub kappa: f64,
    pub gamma_e: f64,
    pub delta: f64,
    pub n_max: usize,
    #[serde(rename = "T_opt")]
    pub t_opt: f64,
    pub t_at_edge: bool,
    pub p_success: f64,
    /// `|<0|alpha>|²` of the input.
    pub p_vacuum: f64,
    /// Vacuum outcome probability read from the atom (includes photons
    /// lost during the sweep).
    pub p_vacuum_measured: f64,
    pub p_sink: f64,
    /// `1 - p_success - p_vacuum`.
    pub loss_error: f64,
    pub fidelity: f64,
    pub wigner_min: f64,
    pub wigner_integral: f64,
    pub negativity_volume: f64,
    pub wigner_convention: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyFit {
    pub n: usize,
    /// Log-log slope of the diabatic probability against `T`.
    pub slope: f64,
    pub window: Option<(usize, usize)>,
    pub window_stable: bool,
    /// Log-log slope of `|phi_num - phi_pred|` against `T`.
    pub phase_slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticStudyResult {
    pub units: String,
    pub delta: f64,
    pub fits: Vec<StudyFit>,
    pub reports: Vec<AdiabaticReport>,
}

fn coherent_field(alpha: f64, trunc: FockTruncation) -> Result<DensityOperator> {
    Ok(coherent_state(C64::new(alpha, 0.0), trunc)?.to_density())
}

/// Normalized `(I - P0)|alpha>`.
pub fn stripped_target(alpha: f64, trunc: FockTruncation) -> Result<PureState> {
    let psi = coherent_state(C64::new(alpha, 0.0), trunc)?;
    let mut v = psi.amplitudes().clone();
    v[0] = C64::new(0.0, 0.0);
    PureState::new_unnormalized(Space::field(trunc), v)?.normalized()
}

/// Photon replacement on `|alpha>` at sweep time `t`.
pub fn evaluate_point(alpha: f64, t: f64, system: &SystemConfig, trunc: FockTruncation, mode: Mode) -> Result<PointResult> {
    let cfg = system.clone().with_trunc(trunc).with_schedule(system.schedule.clone().with_duration(t));
    let field = coherent_field(alpha, trunc)?;
    let rec = project_nonvacuum(&field, &cfg, mode)?;
    let fidelity = match &rec.field {
        Some(out) => out.fidelity_with(&stripped_target(alpha, trunc)?)?,
        None => 0.0,
    };
    Ok(PointResult {
        t,
        fidelity,
        p_success: rec.p_success,
        p_vacuum: rec.measurement.p_vacuum,
        p_sink: rec.measurement.p_sink,
        output: rec.field,
    })
}

/// Sweep time maximizing the replacement fidelity at `(alpha, kappa)`:
/// log-spaced coarse grid over the configured range, then golden-section
/// refinement between the neighbours of the best grid point.
pub fn optimal_t_search(alpha: f64, kappa: f64, config: &RunConfig) -> Result<TSearchResult> {
    let ts = &config.t_search;
    let system = config.system.clone().with_losses(kappa, config.system.gamma_e);
    let trunc = config.trunc_for(alpha);
    let eval = |t: f64| evaluate_point(alpha, t, &system, trunc, config.mode);

    let grid = log_space(ts.t_min, ts.t_max, ts.grid);
    let coarse: Vec<PointResult> = grid.iter().map(|&t| eval(t)).collect::<Result<_>>()?;
    let mut evaluations = coarse.len();
    let i = (0..coarse.len()).fold(0, |b, k| if coarse[k].fidelity > coarse[b].fidelity { k } else { b });
    let at_edge = i == 0 || i + 1 == coarse.len();
    if at_edge {
        warn!(
            "alpha={alpha} kappa={kappa}: fidelity maximum at the edge of [{}, {}] (T = {}); objective may not be unimodal in range",
            ts.t_min, ts.t_max, grid[i]
        );
    }
    let (lo, hi) = (grid[i.saturating_sub(1)], grid[(i + 1).min(grid.len() - 1)]);
    let mut best = coarse[i].clone();
    let mut failure = None;
    let (_, _, n) = golden_section_min(
        |t| match eval(t) {
            Ok(p) => {
                let f = p.fidelity;
                if f > best.fidelity {
                    best = p;
                }
                -f
            }
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        },
        lo,
        hi,
        ts.rel_tol * grid[i],
        200,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    evaluations += n;
    info!("alpha={alpha} kappa={kappa}: T_opt={:.4} F={:.6} ({evaluations} runs)", best.t, best.fidelity);
    Ok(TSearchResult { alpha, kappa, best, at_edge, evaluations })
}

/// Optimal-T search at every `(alpha, kappa)`; rows are alpha-major in the
/// configured order regardless of completion order.
pub fn run_sweep_fig3(config: &RunConfig) -> Result<Vec<TSearchResult>> {
    let points: Vec<(f64, f64)> =
        config.alphas.iter().flat_map(|&a| config.kappas.iter().map(move |&k| (a, k))).collect();
    points.par_iter().map(|&(a, k)| optimal_t_search(a, k, config)).collect()
}

pub fn sweep_row(r: &TSearchResult) -> SweepRow {
    SweepRow {
        alpha: r.alpha,
        kappa: r.kappa,
        t_opt: r.best.t,
        fidelity: r.best.fidelity,
        p_success: r.best.p_success,
        p_vacuum: r.best.p_vacuum,
        p_sink: r.best.p_sink,
    }
}

pub fn write_fig3_csv<W: std::io::Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let data: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.alpha, r.kappa, r.t_opt, r.fidelity, r.p_success, r.p_vacuum, r.p_sink])
        .collect();
    write_csv(w, &FIG3_HEADER, &data)
}

/// Vacuum-stripped coherent state at the configured loss rates and the
/// fidelity-optimal sweep time, with its Wigner function.
pub fn run_wigner_fig4(config: &RunConfig) -> Result<(Fig4Summary, WignerGrid)> {
    let alpha = config.alpha;
    let search = optimal_t_search(alpha, config.system.kappa, config)?;
    let best = &search.best;
    let out = best
        .output
        .as_ref()
        .ok_or_else(|| Error::NonPhysical("replacement branch has zero probability".into()))?;
    let grid = wigner(out, &config.wigner_grid)?;
    let p_vacuum = (-alpha * alpha).exp();
    let summary = Fig4Summary {
        units: UNITS.into(),
        alpha,
        kappa: config.system.kappa,
        gamma_e: config.system.gamma_e,
        delta: config.system.delta,
        n_max: config.trunc_for(alpha).n_max(),
        t_opt: best.t,
        t_at_edge: search.at_edge,
        p_success: best.p_success,
        p_vacuum,
        p_vacuum_measured: best.p_vacuum,
        p_sink: best.p_sink,
        loss_error: 1.0 - best.p_success - p_vacuum,
        fidelity: best.fidelity,
        wigner_min: grid.min(),
        wigner_integral: grid.integral(),
        negativity_volume: negativity_volume(&grid),
        wigner_convention: CONVENTION.into(),
    };
    Ok((summary, grid))
}

/// Adiabatic reports for every `(n, T)` plus per-`n` scaling fits.
pub fn run_adiabatic_study(config: &RunConfig) -> Result<AdiabaticStudyResult> {
    let study = &config.adiabatic;
    let delta = study.delta.unwrap_or(config.system.delta);
    let base = config.system.clone().with_delta(delta).with_losses(0.0, 0.0);
    let fits: Vec<StudyFit> = study
        .n_list
        .par_iter()
        .map(|&n| {
            let (slope, window, window_stable) = match diabatic_scaling_fit(n, &study.t_list, &base) {
                Ok(f) => (f.slope, Some(f.window), f.window_stable),
                Err(Error::InvalidParameter(m)) => {
                    warn!("n={n}: no diabatic fit ({m})");
                    (f64::NAN, None, false)
                }
                Err(e) => return Err(e),
            };
            let phase_slope = if delta == 0.0 {
                f64::NAN
            } else {
                match phase_residual_fit(n, &study.t_list, &base) {
                    Ok(f) if f.slope.is_finite() => f.slope,
                    Ok(_) => f64::NAN,
                    Err(Error::InvalidParameter(_)) => f64::NAN,
                    Err(e) => return Err(e),
                }
            };
            Ok(StudyFit { n, slope, window, window_stable, phase_slope })
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, f64)> =
        study.n_list.iter().flat_map(|&n| study.t_list.iter().map(move |&t| (n, t))).collect();
    let reports: Vec<AdiabaticReport> = jobs
        .par_iter()
        .map(|&(n, t)| adiabatic_report(n, &base.clone().with_schedule(base.schedule.clone().with_duration(t))))
        .collect::<Result<_>>()?;
    Ok(AdiabaticStudyResult { units: UNITS.into(), delta, fits, reports })
}

impl AdiabaticStudyResult {
    pub fn slope_column(&self) -> Vec<f64> {
        self.reports
            .iter()
            .map(|r| self.fits.iter().find(|f| f.n == r.n).map_or(f64::NAN, |f| f.slope))
            .collect()
    }
}

/// Round every float in a JSON tree to the output precision.
fn rounded(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap_or(f64::NAN));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(rounded).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, rounded(v))).collect()),
        other => other,
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let v = rounded(serde_json::to_value(value)?);
    let mut text = serde_json::to_string_pretty(&v)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: Experiment,
    units: &'static str,
    files: Vec<String>,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct ProtocolOutput<T: Serialize> {
    units: &'static str,
    alpha: f64,
    mode: Mode,
    #[serde(rename = "T")]
    t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fidelity: Option<f64>,
    result: T,
}

/// Run `experiment` and write its outputs into `out_dir`; returns the
/// written paths, `manifest.json` last.
pub fn run_experiment(experiment: Experiment, config: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if let Some(e) = config.experiment {
        if e != experiment {
            return Err(Error::Config(format!("config is for `{e}`, not `{experiment}`")));
        }
    }
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    let run = || run_inner(experiment, config, out_dir);
    let mut files = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let manifest = out_dir.join("manifest.json");
    let names = files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect();
    write_json(&manifest, &Manifest { experiment, units: UNITS, files: names, config })?;
    files.push(manifest);
    Ok(files)
}

fn run_inner(experiment: Experiment, config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let alpha = config.alpha;
    let trunc = config.trunc_for(alpha);
    let system = config.system.clone().with_trunc(trunc);
    let t = system.schedule.duration;
    let protocol = |name: &str, fidelity: Option<f64>, result: &dyn erased::Json| -> Result<Vec<PathBuf>> {
        let path = out.join(name);
        let v = ProtocolOutput { units: UNITS, alpha, mode: config.mode, t, fidelity, result: result.value()? };
        write_json(&path, &v)?;
        Ok(vec![path])
    };
    match experiment {
        Experiment::Measure => {
            let rec = measure_vacuum(&coherent_field(alpha, trunc)?, &system, config.mode)?;
            protocol("measure.json", None, &rec)
        }
        Experiment::ProjectNonvacuum => {
            let rec = project_nonvacuum(&coherent_field(alpha, trunc)?, &system, config.mode)?;
            let fid = match &rec.field {
                Some(f) => f.fidelity_with(&stripped_target(alpha, trunc)?)?,
                None => 0.0,
            };
            protocol("project_nonvacuum.json", Some(fid), &rec)
        }
        Experiment::Scissors => {
            let rec = scissors_truncate(&coherent_field(alpha, trunc)?, config.n_cut, &system, config.mode)?;
            protocol("scissors.json", None, &rec)
        }
        Experiment::NumberResolve => {
            let rec = number_resolving_measure(&coherent_field(alpha, trunc)?, &system, config.mode)?;
            protocol("number_resolve.json", None, &rec)
        }
        Experiment::JointVacuum => {
            let single = coherent_state(C64::new(alpha, 0.0), trunc)?;
            let mut psi = single.clone();
            for _ in 1..config.modes {
                psi = psi.tensor(&single)?;
            }
            let rec = joint_vacuum_measure(&psi.to_density(), std::slice::from_ref(&system), config.mode, config.restore)?;
            protocol("joint_vacuum.json", None, &rec)
        }
        Experiment::SweepFig3 => {
            let results = run_sweep_fig3(config)?;
            let rows: Vec<SweepRow> = results.iter().map(sweep_row).collect();
            let csv = out.join("fig3.csv");
            write_fig3_csv(create(&csv)?, &rows)?;
            let details = out.join("fig3_search.json");
            write_json(&details, &results)?;
            Ok(vec![csv, details])
        }
        Experiment::WignerFig4 => {
            let (summary, grid) = run_wigner_fig4(config)?;
            let json = out.join("fig4_summary.json");
            write_json(&json, &summary)?;
            let csv = out.join("fig4_wigner.csv");
            grid.write_csv(create(&csv)?)?;
            Ok(vec![json, csv])
        }
        Experiment::AdiabaticStudy => {
            let study = run_adiabatic_study(config)?;
            let csv = out.join("adiabatic.csv");
            write_adiabatic_csv(create(&csv)?, &study.reports, &study.slope_column())?;
            let json = out.join("adiabatic_fit.json");
            write_json(&json, &study)?;
            Ok(vec![csv, json])
        }
    }
}

/// Object-safe JSON conversion so one closure can write every record type.
mod erased {
    use serde::Serialize;
    use serde_json::Value;

    pub trait Json {
        fn value(&self) -> crate::Result<Value>;
    }

    impl<T: Serialize> Json for T {
        fn value(&self) -> crate::Result<Value> {
            Ok(serde_json::to_value(self)?)
        }
    }
}
