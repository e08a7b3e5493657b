use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{as_state, branch, field_branch, level_weights, project_levels, traced_field, with_atom, MeasurementRecord, Mode};
use crate::dynamics::{EvolveOptions, Model, SystemConfig};
use crate::error::{Error, Result};
use crate::fock::{bare_lower, vacuum_projectors, AtomLevelSet, DensityOperator, Factor, LinearOperator, State};
use crate::pulses::Direction;

/// Desk-scale limit on the number of modes in a joint test.
pub const MAX_JOINT_MODES: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointVacuumRecord {
    pub measurement: MeasurementRecord,
    pub restored: bool,
    /// Atom population in `g0` after the restore sweeps.
    pub restore_g0: Option<f64>,
    /// Purity of the ideal complement projection minus the purity of the
    /// restored field.
    pub purity_deficit: Option<f64>,
}

/// Joint vacuum test of `n` modes with an `(n+1)`-pod atom starting in
/// `g0`. Sweep `j` transfers `g0` to `g_{j+1}` while removing a photon from
/// mode `j`; the sweeps run one at a time in mode order. `configs` holds
/// one sweep configuration per mode, or a single one used for all.
///
/// With `restore`, the complement branch is swept back in reverse mode
/// order with the time-reversed schedule, returning the atom to `g0` and
/// the photon to its mode, so the output approaches
/// `(I - |0..0><0..0|) rho (I - |0..0><0..0|)` renormalized.
pub fn joint_vacuum_measure(
    fields: &DensityOperator,
    configs: &[SystemConfig],
    mode: Mode,
    restore: bool,
) -> Result<JointVacuumRecord> {
    let space = fields.space();
    let n = space.modes().len();
    if space.atom().is_some() || n == 0 {
        return Err(Error::InvalidParameter("expected a field-only state with at least one mode".into()));
    }
    if n > MAX_JOINT_MODES {
        return Err(Error::DimensionCap { dim: n, cap: MAX_JOINT_MODES, what: "joint vacuum modes" });
    }
    if configs.len() != 1 && configs.len() != n {
        return Err(Error::InvalidParameter(format!("need 1 or {n} sweep configs, got {}", configs.len())));
    }
    fields.validate()?;
    let config = |j: usize| if configs.len() == 1 { &configs[0] } else { &configs[j] };
    let ideal = ideal_complement(fields)?;

    let (measurement, restored_field, restore_g0) = match mode {
        Mode::Ideal => {
            let d = fields.dim();
            let p_vacuum = fields.matrix()[(0, 0)].re;
            let mut vac = DMatrix::<C64>::zeros(d, d);
            vac[(0, 0)] = C64::new(p_vacuum, 0.0);
            // atom records the first occupied mode, which is lowered
            let mut lowered = DMatrix::<C64>::zeros(d, d);
            for i in 0..n {
                let mut k = bare_lower(space.modes()[i]).embed(Factor::Mode(i), space)?;
                for j in 0..i {
                    k = k.compose(&vacuum_projectors(space.modes()[j]).0.embed(Factor::Mode(j), space)?)?;
                }
                lowered += fields.conjugate_by(&k)?.matrix();
            }
            let p_not_vacuum = lowered.trace().re;
            let rec = MeasurementRecord {
                p_vacuum,
                p_not_vacuum,
                p_sink: 0.0,
                conditional_field_vacuum: branch(space.clone(), vac, p_vacuum)?,
                conditional_field_not_vacuum: if restore {
                    ideal.clone()
                } else {
                    branch(space.clone(), lowered, p_not_vacuum)?
                },
                atom_disposed: !restore,
            };
            let restored = if restore { ideal.clone() } else { None };
            (rec, restored, restore.then_some(1.0))
        }
        Mode::Simulated => {
            let atom = AtomLevelSet::pod(n);
            let mut state = with_atom(&atom, "g0", &as_state(fields))?;
            let full = state.space().clone();
            for j in 0..n {
                state = sweep(&state, config(j), &full, j, Direction::Measurement)?;
            }
            let w = level_weights(&state);
            let total: f64 = w.iter().sum();
            let g0 = atom.index("g0")?;
            let others: Vec<usize> = (1..=n).map(|k| atom.index(&format!("g{k}"))).collect::<Result<_>>()?;
            let p_vacuum = w[g0] / total;
            let p_not_vacuum = others.iter().map(|&l| w[l]).sum::<f64>() / total;
            let vac = branch(space.clone(), field_branch(&state, &[g0]), p_vacuum)?;
            let (not_vac, restore_g0) = if restore && p_not_vacuum > super::BRANCH_EPS {
                let mut s = project_levels(&state, &others)?;
                for j in (0..n).rev() {
                    s = sweep(&s, config(j), &full, j, Direction::Addition)?;
                }
                let w = level_weights(&s);
                (Some(traced_field(&s)?), Some(w[g0] / w.iter().sum::<f64>()))
            } else {
                (branch(space.clone(), field_branch(&state, &others), p_not_vacuum)?, None)
            };
            let rec = MeasurementRecord {
                p_vacuum,
                p_not_vacuum,
                p_sink: (1.0 - p_vacuum - p_not_vacuum).max(0.0),
                conditional_field_vacuum: vac,
                conditional_field_not_vacuum: not_vac.clone(),
                atom_disposed: !restore,
            };
            (rec, if restore { not_vac } else { None }, restore_g0)
        }
    };
    let purity_deficit = match (&restored_field, &ideal) {
        (Some(out), Some(target)) => Some(target.purity() - out.purity()),
        _ => None,
    };
    Ok(JointVacuumRecord { measurement, restored: restore, restore_g0, purity_deficit })
}

fn sweep(state: &State, config: &SystemConfig, space: &crate::fock::Space, j: usize, dir: Direction) -> Result<State> {
    let cfg = config.clone().with_schedule(config.schedule.clone().with_direction(dir));
    let model = Model::pod_sweep(&cfg, space, j)?;
    Ok(model.evolve(state, &EvolveOptions::from_config(&cfg))?.final_state)
}

/// `(I - |0..0><0..0|) rho (I - |0..0><0..0|)` renormalized.
pub(crate) fn ideal_complement(fields: &DensityOperator) -> Result<Option<DensityOperator>> {
    let space = fields.space();
    let d = fields.dim();
    let mut p = DMatrix::<C64>::identity(d, d);
    p[(0, 0)] = C64::new(0.0, 0.0);
    let m = fields.conjugate_by(&LinearOperator::new(space.clone(), p)?)?;
    let tr = m.trace();
    branch(space.clone(), m.into_matrix(), tr)
}
