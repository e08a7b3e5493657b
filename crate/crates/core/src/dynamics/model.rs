use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::SystemConfig;
use crate::error::{Error, Result};
use crate::fock::{
    annihilation, AtomLevelSet, Factor, LinearOperator, Space, SparseMatrix, LEVEL_E, LEVEL_G,
    LEVEL_GP, LEVEL_SINK,
};
use crate::pulses::PulseSchedule;

/// Which levels and mode play the Λ roles in a sweep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Roles {
    /// Level coupled to `e` by the laser (`gamma_A`).
    pub laser: usize,
    /// Level coupled to `e` through the cavity mode (`gamma_B`).
    pub cavity: usize,
    pub excited: usize,
    pub mode: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct Jump {
    pub rate: f64,
    pub op: SparseMatrix,
}

/// Generator of one evolution window: `H(t) = Δ|e><e| + gamma_A(t) H_A +
/// gamma_B(t) H_B` plus Lindblad jump operators.
#[derive(Clone, Debug)]
pub struct Model {
    space: Space,
    duration: f64,
    schedule: Option<PulseSchedule>,
    roles: Option<Roles>,
    h0: LinearOperator,
    h_a: LinearOperator,
    h_b: LinearOperator,
    jumps: Vec<(f64, LinearOperator)>,
    pub(crate) sparse: SparseParts,
}

#[derive(Clone, Debug)]
pub(crate) struct SparseParts {
    pub h0: SparseMatrix,
    pub h_a: SparseMatrix,
    pub h_b: SparseMatrix,
    /// `sum_k rate_k L_k^† L_k`
    pub loss: SparseMatrix,
    pub jumps: Vec<Jump>,
}

impl Model {
    /// Λ atom `{g, g', e, s}` coupled to a single mode.
    pub fn lambda(config: &SystemConfig) -> Result<Self> {
        config.validate()?;
        let space = Space::atom_field(AtomLevelSet::lambda(), config.trunc);
        Self::sweep(config, space, LEVEL_G, LEVEL_GP, 0)
    }

    /// Pairwise sweep `j` of an `(n+1)`-pod atom: laser on `e–g_{j+1}`,
    /// cavity mode `j` on `e–g_0`. Every mode decays at `kappa`.
    pub fn pod_sweep(config: &SystemConfig, space: &Space, j: usize) -> Result<Self> {
        config.validate()?;
        if j >= space.modes().len() {
            return Err(Error::InvalidParameter(format!("no field mode {j}")));
        }
        Self::sweep(config, space.clone(), &format!("g{}", j + 1), "g0", j)
    }

    fn sweep(config: &SystemConfig, space: Space, laser: &str, cavity: &str, mode: usize) -> Result<Self> {
        let atom = space
            .atom()
            .ok_or_else(|| Error::InvalidParameter("sweep needs an atom factor".into()))?
            .clone();
        let level = |l: &str| atom.index(l).map_err(|_| Error::UnknownLevel(l.to_string()));
        let roles = Roles { laser: level(laser)?, cavity: level(cavity)?, excited: level(LEVEL_E)?, mode };
        let lift = |op: LinearOperator, f: Factor| op.embed(f, &space);
        let sigma = |to: &str, from: &str| -> Result<LinearOperator> {
            lift(LinearOperator::atom_transition(&atom, to, from)?, Factor::Atom)
        };

        let proj_e = sigma(LEVEL_E, LEVEL_E)?;
        let h0 = proj_e.scale(C64::new(config.delta, 0.0));
        let up_a = sigma(LEVEL_E, laser)?;
        let h_a = up_a.add(&up_a.adjoint())?;
        let a = lift(annihilation(space.modes()[mode]), Factor::Mode(mode))?;
        let up_b = sigma(LEVEL_E, cavity)?.compose(&a)?;
        let h_b = up_b.add(&up_b.adjoint())?;

        let jumps = loss_channels(&space, config.kappa, config.gamma_e)?;
        let mut model = Self::assemble(space, config.schedule.duration, Some(config.schedule.clone()), h0, h_a, h_b, jumps);
        model.roles = Some(roles);
        Ok(model)
    }

    /// Couplings off: only `Δ|e><e|` (if an atom is present) and the loss
    /// channels act for `duration`.
    pub fn free(space: &Space, delta: f64, kappa: f64, gamma_e: f64, duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(Error::InvalidParameter(format!("duration {duration} must be >= 0")));
        }
        let zero = LinearOperator::zeros(space);
        let h0 = match space.atom() {
            Some(atom) if atom.index(LEVEL_E).is_ok() => LinearOperator::atom_transition(atom, LEVEL_E, LEVEL_E)?
                .embed(Factor::Atom, space)?
                .scale(C64::new(delta, 0.0)),
            _ => zero.clone(),
        };
        let jumps = loss_channels(space, kappa, gamma_e)?;
        Ok(Self::assemble(space.clone(), duration, None, h0, zero.clone(), zero, jumps))
    }

    fn assemble(
        space: Space,
        duration: f64,
        schedule: Option<PulseSchedule>,
        h0: LinearOperator,
        h_a: LinearOperator,
        h_b: LinearOperator,
        jumps: Vec<(f64, LinearOperator)>,
    ) -> Self {
        let d = space.dim();
        let mut loss = DMatrix::<C64>::zeros(d, d);
        for (rate, l) in &jumps {
            loss += l.matrix().adjoint() * l.matrix() * C64::new(*rate, 0.0);
        }
        let sparse = SparseParts {
            h0: h0.to_sparse(),
            h_a: h_a.to_sparse(),
            h_b: h_b.to_sparse(),
            loss: SparseMatrix::from_dense(&loss),
            jumps: jumps.iter().map(|(rate, l)| Jump { rate: *rate, op: l.to_sparse() }).collect(),
        };
        Self { space, duration, schedule, roles: None, h0, h_a, h_b, jumps, sparse }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn schedule(&self) -> Option<&PulseSchedule> {
        self.schedule.as_ref()
    }

    pub fn roles(&self) -> Option<&Roles> {
        self.roles.as_ref()
    }

    pub fn is_closed(&self) -> bool {
        self.jumps.is_empty()
    }

    /// Jump operators with their rates.
    pub fn jumps(&self) -> &[(f64, LinearOperator)] {
        &self.jumps
    }

    pub(crate) fn couplings(&self, t: f64) -> (f64, f64) {
        match &self.schedule {
            Some(s) => s.couplings_clamped(t),
            None => (0.0, 0.0),
        }
    }

    /// Dense `H(t)`.
    pub fn hamiltonian(&self, t: f64) -> Result<LinearOperator> {
        if let Some(s) = &self.schedule {
            s.couplings(t)?;
        } else if !(0.0..=self.duration).contains(&t) {
            return Err(Error::TimeOutOfRange { t, duration: self.duration });
        }
        Ok(self.hamiltonian_clamped(t))
    }

    /// Entries that any of the Hamiltonian terms can make nonzero.
    pub(crate) fn coupling_pattern(&self) -> DMatrix<bool> {
        let (a, b, c) = (self.h0.matrix(), self.h_a.matrix(), self.h_b.matrix());
        DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
            a[(i, j)].norm() > 0.0 || b[(i, j)].norm() > 0.0 || c[(i, j)].norm() > 0.0
        })
    }

    pub(crate) fn hamiltonian_clamped(&self, t: f64) -> LinearOperator {
        let (ga, gb) = self.couplings(t);
        let m = self.h0.matrix() + self.h_a.matrix() * C64::new(ga, 0.0) + self.h_b.matrix() * C64::new(gb, 0.0);
        LinearOperator::new(self.space.clone(), m).expect("same space")
    }
}

/// `sqrt(kappa) a_j` for every mode and `sqrt(Gamma_e) |s><e|` if the atom
/// has both levels. Zero rates are dropped.
fn loss_channels(space: &Space, kappa: f64, gamma_e: f64) -> Result<Vec<(f64, LinearOperator)>> {
    let mut out = Vec::new();
    if kappa > 0.0 {
        for (j, t) in space.modes().iter().enumerate() {
            out.push((kappa, annihilation(*t).embed(Factor::Mode(j), space)?));
        }
    }
    if gamma_e > 0.0 {
        if let Some(atom) = space.atom() {
            if atom.index(LEVEL_E).is_ok() && atom.index(LEVEL_SINK).is_ok() {
                let l = LinearOperator::atom_transition(atom, LEVEL_SINK, LEVEL_E)?.embed(Factor::Atom, space)?;
                out.push((gamma_e, l));
            }
        }
    }
    Ok(out)
}
