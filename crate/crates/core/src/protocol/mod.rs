//! Protocols built from vacuum-test sweeps: the vacuum measurement itself,
//! photon replacement, the bare ladder operators, quantum scissors,
//! photon counting and the multimode joint-vacuum test.
//!
//! Every operation has an `Ideal` mode (the algebraic map of a perfectly
//! adiabatic, lossless sweep) and a `Simulated` mode (full time evolution
//! of atom and field followed by an ideal projective atom readout).

mod multimode;
#[cfg(test)]
mod tests;

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{EvolveOptions, Model, SystemConfig};
use crate::error::{Error, Result};
use crate::fock::{
    bare_lower, bare_raise, vacuum_projectors, AtomLevelSet, DensityOperator, Factor, FockTruncation,
    LinearOperator, PureState, Space, State, LEVEL_G, LEVEL_GP, TAIL_LIMIT,
};
use crate::pulses::Direction;

pub use multimode::{joint_vacuum_measure, JointVacuumRecord, MAX_JOINT_MODES};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Ideal,
    Simulated,
}

/// Branches with probability at or below this carry no conditional state.
pub const BRANCH_EPS: f64 = 1e-30;
/// Atom found in `g'` less often than this after an addition sweep is
/// logged as a failed addition.
const ADDITION_WARN: f64 = 0.9;

/// Outcome of one vacuum test. `p_sink` collects every atom outcome other
/// than the two ground states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub p_vacuum: f64,
    pub p_not_vacuum: f64,
    pub p_sink: f64,
    pub conditional_field_vacuum: Option<DensityOperator>,
    pub conditional_field_not_vacuum: Option<DensityOperator>,
    /// `true` once the atom has been read out and discarded.
    pub atom_disposed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdditionRecord {
    pub field: DensityOperator,
    /// Probability of finding the atom in `g'` after the sweep.
    pub p_raised: f64,
    pub p_sink: f64,
}

/// Result of a conditional pipeline; `field` is `None` when the success
/// probability vanishes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRecord {
    pub p_success: f64,
    pub field: Option<DensityOperator>,
    pub measurement: MeasurementRecord,
    pub addition: Option<AdditionRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScissorsRecord {
    pub n_cut: usize,
    pub p_success: f64,
    pub output_field: Option<DensityOperator>,
    pub rounds: Vec<MeasurementRecord>,
    pub additions: Vec<AdditionRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    /// Probability of each count `0..=n_max`.
    pub distribution: Vec<f64>,
    /// Probability that some round ended with the atom outside `{g, g'}`.
    pub p_lost: f64,
    /// Weight still undecided when the round cap was reached (simulated
    /// mode only; at most `UNRESOLVED_TOL`).
    pub p_unresolved: f64,
    pub rounds: usize,
}

fn single_mode(field: &DensityOperator) -> Result<FockTruncation> {
    let s = field.space();
    if s.atom().is_some() || s.modes().len() != 1 {
        return Err(Error::InvalidParameter("expected a single-mode field state".into()));
    }
    field.validate()?;
    Ok(s.modes()[0])
}

pub(crate) fn hermitized(m: DMatrix<C64>) -> DMatrix<C64> {
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Normalized branch state, or `None` for an impossible branch.
pub(crate) fn branch(space: Space, m: DMatrix<C64>, p: f64) -> Result<Option<DensityOperator>> {
    if p <= BRANCH_EPS {
        return Ok(None);
    }
    let tr = m.trace().re;
    Ok(Some(DensityOperator::new_unchecked(space, hermitized(m).unscale(tr))?))
}

/// Rank-one density operators are propagated as state vectors.
pub(crate) fn as_state(rho: &DensityOperator) -> State {
    if (rho.purity() - 1.0).abs() > 1e-12 {
        return State::Mixed(rho.clone());
    }
    let eig = hermitized(rho.matrix().clone()).symmetric_eigen();
    let top = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(top).into_owned();
    match PureState::new_unnormalized(rho.space().clone(), v) {
        Ok(p) => State::Pure(p),
        Err(_) => State::Mixed(rho.clone()),
    }
}

pub(crate) fn with_atom(atom: &AtomLevelSet, level: &str, field: &State) -> Result<State> {
    let a = PureState::basis(&Space::new(Some(atom.clone()), vec![]), Some(level), &[])?;
    Ok(match field {
        State::Pure(p) => State::Pure(a.tensor(p)?),
        State::Mixed(r) => State::Mixed(a.to_density().tensor(r)?),
    })
}

/// Population of each atomic level.
pub(crate) fn level_weights(state: &State) -> Vec<f64> {
    let space = state.space();
    let levels = space.atom().map_or(0, |a| a.len());
    let fd = space.field_part().dim();
    (0..levels)
        .map(|l| match state {
            State::Pure(p) => p.amplitudes().rows(l * fd, fd).norm_squared(),
            State::Mixed(r) => (0..fd).map(|i| r.matrix()[(l * fd + i, l * fd + i)].re).sum(),
        })
        .collect()
}

/// Unnormalized field state with the atom found in any of `levels`
/// (incoherent sum over the levels).
pub(crate) fn field_branch(state: &State, levels: &[usize]) -> DMatrix<C64> {
    let fd = state.space().field_part().dim();
    let mut m = DMatrix::<C64>::zeros(fd, fd);
    for &l in levels {
        match state {
            State::Pure(p) => {
                let v = p.amplitudes().rows(l * fd, fd);
                m += &v * v.adjoint();
            }
            State::Mixed(r) => m += r.matrix().view((l * fd, l * fd), (fd, fd)),
        }
    }
    m
}

/// Keep only the components with the atom in `levels`, coherences
/// included (a projective readout that does not resolve among them).
pub(crate) fn project_levels(state: &State, levels: &[usize]) -> Result<State> {
    let space = state.space();
    let fd = space.field_part().dim();
    let keep: Vec<bool> = (0..space.dim()).map(|i| levels.contains(&(i / fd))).collect();
    Ok(match state {
        State::Pure(p) => {
            let v = DVector::from_fn(p.dim(), |i, _| if keep[i] { p.amplitudes()[i] } else { C64::new(0.0, 0.0) });
            State::Pure(PureState::new_unnormalized(space.clone(), v)?)
        }
        State::Mixed(r) => {
            let d = r.dim();
            let m = DMatrix::from_fn(d, d, |i, j| if keep[i] && keep[j] { r.matrix()[(i, j)] } else { C64::new(0.0, 0.0) });
            State::Mixed(DensityOperator::new_unchecked(space.clone(), m)?)
        }
    })
}

/// Atom-traced field state, renormalized.
pub(crate) fn traced_field(state: &State) -> Result<DensityOperator> {
    let levels: Vec<usize> = (0..state.space().atom().map_or(0, |a| a.len())).collect();
    let m = field_branch(state, &levels);
    let tr = m.trace().re;
    branch(state.space().field_part(), m, tr)?
        .ok_or_else(|| Error::NonPhysical("field state vanished".into()))
}

fn sweep_config(config: &SystemConfig, trunc: FockTruncation, direction: Direction) -> SystemConfig {
    config.clone().with_trunc(trunc).with_schedule(config.schedule.clone().with_direction(direction))
}

fn run_sweep(state: &State, config: &SystemConfig) -> Result<State> {
    let model = Model::lambda(config)?;
    Ok(model.evolve(state, &EvolveOptions::from_config(config))?.final_state)
}

/// Cavity decay over the configured idle interval between stages
/// (simulated mode only).
pub fn idle_decay(field: DensityOperator, config: &SystemConfig, mode: Mode) -> Result<DensityOperator> {
    if mode == Mode::Ideal || config.idle == 0.0 || config.kappa == 0.0 {
        return Ok(field);
    }
    let model = Model::free(field.space(), 0.0, config.kappa, 0.0, config.idle)?;
    let out = model.evolve_density(&field, &EvolveOptions::from_config(config))?.density();
    out.normalized()
}

/// Vacuum test of a single-mode field with a fresh atom in `g'`.
pub fn measure_vacuum(field: &DensityOperator, config: &SystemConfig, mode: Mode) -> Result<MeasurementRecord> {
    let trunc = single_mode(field)?;
    match mode {
        Mode::Ideal => {
            let (p0, _) = vacuum_projectors(trunc);
            let vac = field.conjugate_by(&p0)?;
            let lowered = field.conjugate_by(&bare_lower(trunc))?;
            let p_vacuum = vac.trace();
            let p_not_vacuum = lowered.trace();
            Ok(MeasurementRecord {
                p_vacuum,
                p_not_vacuum,
                p_sink: 0.0,
                conditional_field_vacuum: branch(field.space().clone(), vac.into_matrix(), p_vacuum)?,
                conditional_field_not_vacuum: branch(field.space().clone(), lowered.into_matrix(), p_not_vacuum)?,
                atom_disposed: true,
            })
        }
        Mode::Simulated => {
            let cfg = sweep_config(config, trunc, Direction::Measurement);
            cfg.validate()?;
            let atom = AtomLevelSet::lambda();
            let out = run_sweep(&with_atom(&atom, LEVEL_GP, &as_state(field))?, &cfg)?;
            let w = level_weights(&out);
            let total: f64 = w.iter().sum();
            let (g, gp) = (atom.index(LEVEL_G)?, atom.index(LEVEL_GP)?);
            let p_vacuum = w[gp] / total;
            let p_not_vacuum = w[g] / total;
            let fs = field.space().clone();
            Ok(MeasurementRecord {
                p_vacuum,
                p_not_vacuum,
                p_sink: (1.0 - p_vacuum - p_not_vacuum).max(0.0),
                conditional_field_vacuum: branch(fs.clone(), field_branch(&out, &[gp]), p_vacuum)?,
                conditional_field_not_vacuum: branch(fs, field_branch(&out, &[g]), p_not_vacuum)?,
                atom_disposed: true,
            })
        }
    }
}

/// Ideal map of a vacuum-test sweep on a pure field, atom included:
/// `sum_n c_n |g',n>  ->  c_0 |g',0> - sum_{n>=1} c_n |g,n-1>`.
pub fn ideal_measurement_state(field: &PureState) -> Result<PureState> {
    let s = field.space();
    if s.atom().is_some() || s.modes().len() != 1 {
        return Err(Error::InvalidParameter("expected a single-mode field state".into()));
    }
    let trunc = s.modes()[0];
    let space = Space::atom_field(AtomLevelSet::lambda(), trunc);
    let (g, gp) = (space.level(LEVEL_G)?, space.level(LEVEL_GP)?);
    let c = field.amplitudes();
    let mut v = DVector::zeros(space.dim());
    v[space.index(Some(gp), &[0])] = c[0];
    for n in 1..c.len() {
        v[space.index(Some(g), &[n - 1])] = -c[n];
    }
    PureState::new_unnormalized(space, v)
}

/// Raise the photon number by one with an atom prepared in `g`. The
/// simulated output is the field with the atom traced out; the atom
/// outcome is recorded, not post-selected.
pub fn add_photon_record(field: &DensityOperator, config: &SystemConfig, mode: Mode) -> Result<AdditionRecord> {
    let trunc = single_mode(field)?;
    let top = field.matrix()[(trunc.n_max(), trunc.n_max())].re;
    if top > TAIL_LIMIT {
        return Err(Error::TruncationOverflow { population: top });
    }
    match mode {
        Mode::Ideal => {
            let raised = field.conjugate_by(&bare_raise(trunc))?;
            let tr = raised.trace();
            let f = branch(field.space().clone(), raised.into_matrix(), tr)?
                .ok_or_else(|| Error::NonPhysical("field state vanished".into()))?;
            Ok(AdditionRecord { field: f, p_raised: 1.0, p_sink: 0.0 })
        }
        Mode::Simulated => {
            let cfg = sweep_config(config, trunc, Direction::Addition);
            cfg.validate()?;
            let atom = AtomLevelSet::lambda();
            let out = run_sweep(&with_atom(&atom, LEVEL_G, &as_state(field))?, &cfg)?;
            let w = level_weights(&out);
            let total: f64 = w.iter().sum();
            let p_raised = w[atom.index(LEVEL_GP)?] / total;
            let p_sink = (1.0 - p_raised - w[atom.index(LEVEL_G)?] / total).max(0.0);
            if p_raised < ADDITION_WARN {
                warn!("addition sweep left the atom in g' with probability {p_raised:.4}");
            }
            Ok(AdditionRecord { field: traced_field(&out)?, p_raised, p_sink })
        }
    }
}

pub fn add_photon(field: &DensityOperator, config: &SystemConfig, mode: Mode) -> Result<DensityOperator> {
    Ok(add_photon_record(field, config, mode)?.field)
}

/// Vacuum test followed, on the not-vacuum branch, by re-adding the
/// subtracted photon: ideally `(I - P0) rho (I - P0)` renormalized.
pub fn project_nonvacuum(field: &DensityOperator, config: &SystemConfig, mode: Mode) -> Result<ProjectionRecord> {
    let measurement = measure_vacuum(field, config, mode)?;
    let p_success = measurement.p_not_vacuum;
    let addition = match &measurement.conditional_field_not_vacuum {
        Some(f) => Some(add_photon_record(&idle_decay(f.clone(), config, mode)?, config, mode)?),
        None => None,
    };
    Ok(ProjectionRecord { p_success, field: addition.as_ref().map(|a| a.field.clone()), measurement, addition })
}

/// `E-` realized by a vacuum test without replacement:
/// `(p_not_vacuum, lowered field)`.
pub fn bare_lower_protocol(
    field: &DensityOperator,
    config: &SystemConfig,
    mode: Mode,
) -> Result<(f64, Option<DensityOperator>)> {
    let rec = measure_vacuum(field, config, mode)?;
    Ok((rec.p_not_vacuum, rec.conditional_field_not_vacuum))
}

/// Remove the lowest `n_cut` Fock amplitudes: `n_cut` vacuum tests that
/// must all report "not vacuum", then `n_cut` photon additions.
pub fn scissors_truncate(
    field: &DensityOperator,
    n_cut: usize,
    config: &SystemConfig,
    mode: Mode,
) -> Result<ScissorsRecord> {
    if n_cut == 0 {
        return Err(Error::InvalidParameter("n_cut must be >= 1".into()));
    }
    let trunc = single_mode(field)?;
    if n_cut > trunc.n_max() {
        return Err(Error::InvalidParameter(format!("n_cut {n_cut} exceeds n_max {}", trunc.n_max())));
    }
    let mut rounds = Vec::with_capacity(n_cut);
    let mut p_success = 1.0;
    let mut current = field.clone();
    for k in 0..n_cut {
        if k > 0 {
            current = idle_decay(current, config, mode)?;
        }
        let rec = measure_vacuum(&current, config, mode)?;
        p_success *= rec.p_not_vacuum;
        let next = rec.conditional_field_not_vacuum.clone();
        rounds.push(rec);
        match next {
            Some(f) => current = f,
            None => {
                return Ok(ScissorsRecord { n_cut, p_success: 0.0, output_field: None, rounds, additions: Vec::new() })
            }
        }
    }
    let mut additions = Vec::with_capacity(n_cut);
    for _ in 0..n_cut {
        current = idle_decay(current, config, mode)?;
        let add = add_photon_record(&current, config, mode)?;
        current = add.field.clone();
        additions.push(add);
    }
    Ok(ScissorsRecord { n_cut, p_success, output_field: Some(current), rounds, additions })
}

/// Residual not-vacuum weight tolerated at the round cap. Imperfect
/// sweeps never remove the last photon exactly, so a simulated count
/// always leaves a tail.
pub const UNRESOLVED_TOL: f64 = 1e-6;

/// Count photons by repeated vacuum tests without replacement until the
/// vacuum outcome. At most `n_max + 1` rounds.
pub fn number_resolving_measure(field: &DensityOperator, config: &SystemConfig, mode: Mode) -> Result<CountRecord> {
    let trunc = single_mode(field)?;
    let cap = trunc.n_max() + 1;
    let mut distribution = vec![0.0; trunc.dim()];
    let mut p_lost = 0.0;
    let mut weight = 1.0;
    let mut current = Some(field.clone());
    let mut rounds = 0;
    while let Some(f) = current.take() {
        if weight <= BRANCH_EPS {
            break;
        }
        if rounds == cap {
            if mode == Mode::Simulated && weight <= UNRESOLVED_TOL {
                warn!("photon count left {weight:.3e} unresolved after {cap} rounds");
                return Ok(CountRecord { distribution, p_lost, p_unresolved: weight, rounds });
            }
            return Err(Error::RoundCapExceeded(cap));
        }
        let f = if rounds > 0 { idle_decay(f, config, mode)? } else { f };
        let rec = measure_vacuum(&f, config, mode)?;
        distribution[rounds] += weight * rec.p_vacuum;
        p_lost += weight * rec.p_sink;
        weight *= rec.p_not_vacuum;
        current = rec.conditional_field_not_vacuum;
        rounds += 1;
    }
    Ok(CountRecord { distribution, p_lost, p_unresolved: 0.0, rounds })
}

/// Rotation in `span{g, g'}` by `angle` with relative phase `phase`:
/// `g -> cos(angle/2) g + e^{i phase} sin(angle/2) g'`,
/// `g' -> cos(angle/2) g' - e^{-i phase} sin(angle/2) g`.
pub fn rotate_ground(state: &State, angle: f64, phase: f64) -> Result<State> {
    let space = state.space();
    let atom = space
        .atom()
        .ok_or_else(|| Error::InvalidParameter("rotation needs an atom factor".into()))?;
    let (g, gp) = (atom.index(LEVEL_G)?, atom.index(LEVEL_GP)?);
    let (s, c) = (0.5 * angle).sin_cos();
    let mut u = DMatrix::<C64>::identity(atom.len(), atom.len());
    u[(g, g)] = C64::new(c, 0.0);
    u[(gp, gp)] = C64::new(c, 0.0);
    u[(gp, g)] = C64::from_polar(s, phase);
    u[(g, gp)] = -C64::from_polar(s, -phase);
    let op = LinearOperator::new(Space::new(Some(atom.clone()), vec![]), u)?.embed(Factor::Atom, space)?;
    Ok(match state {
        State::Pure(p) => State::Pure(p.apply(&op)?),
        State::Mixed(r) => State::Mixed(r.conjugate_by(&op)?),
    })
}

/// `(I - P0) rho (I - P0)` renormalized; `None` for the vacuum.
pub fn ideal_projection(field: &DensityOperator) -> Result<Option<DensityOperator>> {
    let trunc = single_mode(field)?;
    let (_, rest) = vacuum_projectors(trunc);
    let m = field.conjugate_by(&rest)?;
    let p = m.trace();
    branch(field.space().clone(), m.into_matrix(), p)
}
