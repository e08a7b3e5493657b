use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::operators::LinearOperator;
use super::space::{poisson_tail, Factor, FockTruncation, Space, TAIL_LIMIT};
use crate::error::{Error, Result};

pub const NORM_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;


/// State vector over a [`Space`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "StateRepr", try_from = "StateRepr")]
pub struct PureState {
    space: Space,
    amps: DVector<C64>,
}

impl PureState {
    /// Normalized state; fails if the squared norm is off by more than 1e-10.
    pub fn new(space: Space, amps: DVector<C64>) -> Result<Self> {
        let s = Self::new_unnormalized(space, amps)?;
        let n = s.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::Unnormalized { norm_sqr: n });
        }
        Ok(s)
    }

    /// Conditional branch before renormalization.
    pub fn new_unnormalized(space: Space, amps: DVector<C64>) -> Result<Self> {
        if amps.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: amps.len() });
        }
        Ok(Self { space, amps })
    }

    /// Basis vector `|level, photons>`.
    pub fn basis(space: &Space, level: Option<&str>, photons: &[usize]) -> Result<Self> {
        if photons.len() != space.modes().len() {
            return Err(Error::DimensionMismatch {
                expected: space.modes().len(),
                found: photons.len(),
            });
        }
        for (n, t) in photons.iter().zip(space.modes()) {
            if *n > t.n_max() {
                return Err(Error::InvalidParameter(format!(
                    "photon number {n} above n_max {}",
                    t.n_max()
                )));
            }
        }
        let level = match level {
            Some(l) => Some(space.level(l)?),
            None if space.atom().is_some() => {
                return Err(Error::InvalidParameter("atom level required".into()))
            }
            None => None,
        };
        let mut amps = DVector::zeros(space.dim());
        amps[space.index(level, photons)] = C64::new(1.0, 0.0);
        Ok(Self { space: space.clone(), amps })
    }

    /// Field-only Fock state `|n>`.
    pub fn fock(trunc: FockTruncation, n: usize) -> Result<Self> {
        Self::basis(&Space::field(trunc), None, &[n])
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if n <= f64::MIN_POSITIVE {
            return Err(Error::NonPhysical("cannot normalize a zero vector".into()));
        }
        Ok(Self { space: self.space.clone(), amps: self.amps.unscale(n.sqrt()) })
    }

    pub fn overlap(&self, other: &PureState) -> Result<C64> {
        self.space.check_same(&other.space)?;
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn apply(&self, op: &LinearOperator) -> Result<PureState> {
        self.space.check_same(op.space())?;
        Ok(Self { space: self.space.clone(), amps: op.matrix() * &self.amps })
    }

    /// `self ⊗ other`. Only the left factor may carry an atom.
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let space = tensor_space(&self.space, &other.space)?;
        let amps = self.amps.kronecker(&other.amps);
        Ok(Self { space, amps })
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator { space: self.space.clone(), matrix: &self.amps * self.amps.adjoint() }
    }

    pub fn into_parts(self) -> (Space, DVector<C64>) {
        (self.space, self.amps)
    }
}

pub(crate) fn tensor_space(a: &Space, b: &Space) -> Result<Space> {
    if b.atom().is_some() {
        return Err(Error::InvalidParameter("atom factor must be the leftmost factor".into()));
    }
    let mut modes = a.modes().to_vec();
    modes.extend_from_slice(b.modes());
    Ok(Space::new(a.atom().cloned(), modes))
}

/// Coherent state `|alpha>` on a single field mode, renormalized after
/// truncation.
pub fn coherent_state(alpha: C64, trunc: FockTruncation) -> Result<PureState> {
    let mean = alpha.norm_sqr();
    let discarded = poisson_tail(mean, trunc.n_max());
    if discarded >= TAIL_LIMIT {
        return Err(Error::TruncationTooSmall { n_max: trunc.n_max(), discarded, limit: TAIL_LIMIT });
    }
    let mut amps = DVector::zeros(trunc.dim());
    let mut c = C64::new((-mean / 2.0).exp(), 0.0);
    amps[0] = c;
    for n in 1..trunc.dim() {
        c = c * alpha / (n as f64).sqrt();
        amps[n] = c;
    }
    let norm = amps.norm();
    Ok(PureState { space: Space::field(trunc), amps: amps.unscale(norm) })
}

/// Density operator over a [`Space`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "DensityRepr", try_from = "DensityRepr")]
pub struct DensityOperator {
    space: Space,
    matrix: DMatrix<C64>,
}

impl DensityOperator {
    /// Validated constructor: Hermitian, unit trace, positive semidefinite.
    pub fn new(space: Space, matrix: DMatrix<C64>) -> Result<Self> {
        let rho = Self::new_unchecked(space, matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Shape check only (conditional branches, intermediate stages).
    pub fn new_unchecked(space: Space, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: matrix.nrows() });
        }
        Ok(Self { space, matrix })
    }

    pub fn validate(&self) -> Result<()> {
        let herm = max_abs(&(&self.matrix - self.matrix.adjoint()));
        if herm > HERMITIAN_TOL {
            return Err(Error::NonPhysical(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::NonPhysical(format!("trace {tr:.12} != 1")));
        }
        let min = self.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(Error::NonPhysical(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_part(&self.matrix)
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if tr <= f64::MIN_POSITIVE {
            return Err(Error::NonPhysical("cannot normalize a zero-trace operator".into()));
        }
        Ok(Self { space: self.space.clone(), matrix: &self.matrix / C64::new(tr, 0.0) })
    }

    /// `op rho op^†` (not renormalized).
    pub fn conjugate_by(&self, op: &LinearOperator) -> Result<Self> {
        self.space.check_same(op.space())?;
        let m = op.matrix();
        Ok(Self { space: self.space.clone(), matrix: m * &self.matrix * m.adjoint() })
    }

    pub fn expectation(&self, op: &LinearOperator) -> Result<C64> {
        self.space.check_same(op.space())?;
        Ok((op.matrix() * &self.matrix).trace())
    }

    pub fn tensor(&self, other: &DensityOperator) -> Result<Self> {
        let space = tensor_space(&self.space, &other.space)?;
        Ok(Self { space, matrix: self.matrix.kronecker(&other.matrix) })
    }

    /// `<level| rho |level>` on the field part (unnormalized).
    pub fn atom_block(&self, level: &str) -> Result<DensityOperator> {
        let l = self.space.level(level)?;
        let field = self.space.field_part();
        let d = field.dim();
        let m = self.matrix.view((l * d, l * d), (d, d)).into_owned();
        Ok(DensityOperator { space: field, matrix: m })
    }

    /// Population of an atomic level (summed over the field).
    pub fn level_population(&self, level: &str) -> Result<f64> {
        Ok(self.atom_block(level)?.trace())
    }

    /// Partial trace keeping only `keep` (in the order they appear in the
    /// space).
    pub fn reduce(&self, keep: &[Factor]) -> Result<DensityOperator> {
        let factors = self.space.factors();
        for k in keep {
            if !factors.contains(k) {
                return Err(Error::InvalidParameter(format!("unknown factor {k:?}")));
            }
        }
        let dims = self.space.factor_dims();
        let kept_mask: Vec<bool> = factors.iter().map(|f| keep.contains(f)).collect();
        let kept_space = Space::new(
            if keep.contains(&Factor::Atom) { self.space.atom().cloned() } else { None },
            factors
                .iter()
                .filter_map(|f| match f {
                    Factor::Mode(j) if keep.contains(f) => Some(self.space.modes()[*j]),
                    _ => None,
                })
                .collect(),
        );
        let kept_dim = kept_space.dim();
        let traced_dim = self.space.dim() / kept_dim;

        // group full indices by traced multi-index
        let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::new(); traced_dim];
        for full in 0..self.space.dim() {
            let mut rem = full;
            let mut digits = vec![0usize; dims.len()];
            for f in (0..dims.len()).rev() {
                digits[f] = rem % dims[f];
                rem /= dims[f];
            }
            let (mut ki, mut ti) = (0usize, 0usize);
            for f in 0..dims.len() {
                if kept_mask[f] {
                    ki = ki * dims[f] + digits[f];
                } else {
                    ti = ti * dims[f] + digits[f];
                }
            }
            groups[ti].push((ki, full));
        }
        let mut out = DMatrix::zeros(kept_dim, kept_dim);
        for g in &groups {
            for &(ki, fi) in g {
                for &(kj, fj) in g {
                    out[(ki, kj)] += self.matrix[(fi, fj)];
                }
            }
        }
        Ok(DensityOperator { space: kept_space, matrix: out })
    }

    /// Trace out the atom, keeping all field modes.
    pub fn field_state(&self) -> Result<DensityOperator> {
        let keep: Vec<Factor> = (0..self.space.modes().len()).map(Factor::Mode).collect();
        self.reduce(&keep)
    }

    /// Trace distance `½ ||a − b||_1`.
    pub fn trace_distance(&self, other: &DensityOperator) -> Result<f64> {
        self.space.check_same(&other.space)?;
        let diff = hermitian_part(&(&self.matrix - &other.matrix));
        Ok(0.5 * diff.symmetric_eigenvalues().iter().map(|l| l.abs()).sum::<f64>())
    }
}

pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

pub(crate) fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Either kind of state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state", rename_all = "snake_case")]
pub enum State {
    Pure(PureState),
    Mixed(DensityOperator),
}

impl State {
    pub fn space(&self) -> &Space {
        match self {
            State::Pure(p) => p.space(),
            State::Mixed(r) => r.space(),
        }
    }

    pub fn to_density(&self) -> DensityOperator {
        match self {
            State::Pure(p) => p.to_density(),
            State::Mixed(r) => r.clone(),
        }
    }
}

impl From<PureState> for State {
    fn from(p: PureState) -> Self {
        State::Pure(p)
    }
}

impl From<DensityOperator> for State {
    fn from(r: DensityOperator) -> Self {
        State::Mixed(r)
    }
}

// ---- JSON representation: basis labels + interleaved re/im ----

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateRepr {
    space: Space,
    basis: Vec<String>,
    amplitudes: Vec<f64>,
}

impl From<PureState> for StateRepr {
    fn from(s: PureState) -> Self {
        let basis = s.space.labels();
        let amplitudes = s.amps.iter().flat_map(|z| [z.re, z.im]).collect();
        StateRepr { space: s.space, basis, amplitudes }
    }
}

impl TryFrom<StateRepr> for PureState {
    type Error = Error;
    fn try_from(r: StateRepr) -> Result<Self> {
        check_labels(&r.space, &r.basis)?;
        let amps = DVector::from_vec(interleaved(&r.amplitudes)?);
        PureState::new_unnormalized(r.space, amps)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityRepr {
    space: Space,
    basis: Vec<String>,
    /// Row-major, interleaved re/im.
    matrix: Vec<f64>,
}

impl From<DensityOperator> for DensityRepr {
    fn from(r: DensityOperator) -> Self {
        let basis = r.space.labels();
        let d = r.dim();
        let mut matrix = Vec::with_capacity(2 * d * d);
        for i in 0..d {
            for j in 0..d {
                let z = r.matrix[(i, j)];
                matrix.push(z.re);
                matrix.push(z.im);
            }
        }
        DensityRepr { space: r.space, basis, matrix }
    }
}

impl TryFrom<DensityRepr> for DensityOperator {
    type Error = Error;
    fn try_from(r: DensityRepr) -> Result<Self> {
        check_labels(&r.space, &r.basis)?;
        let vals = interleaved(&r.matrix)?;
        let d = r.space.dim();
        if vals.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, found: vals.len() });
        }
        DensityOperator::new_unchecked(r.space, DMatrix::from_row_slice(d, d, &vals))
    }
}

fn interleaved(v: &[f64]) -> Result<Vec<C64>> {
    if v.len() % 2 != 0 {
        return Err(Error::Config("interleaved re/im array has odd length".into()));
    }
    Ok(v.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect())
}

fn check_labels(space: &Space, labels: &[String]) -> Result<()> {
    if space.labels() != labels {
        return Err(Error::Config("basis labels do not match the declared space".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
    use crate::fock::{AtomLevelSet, LEVEL_GP};

    fn trunc(n: usize) -> FockTruncation {
        FockTruncation::new(n).unwrap()
    }

    #[test]
    fn coherent_zero_is_vacuum() {
        let s = coherent_state(C64::new(0.0, 0.0), trunc(5)).unwrap();
        assert_eq!(s.amplitudes()[0], C64::new(1.0, 0.0));
        assert!(s.amplitudes().iter().skip(1).all(|z| *z == ZERO));
    }

    #[test]
    fn coherent_vacuum_probability() {
        let s = coherent_state(C64::new(1.0, 0.0), trunc(12)).unwrap();
        let p0 = s.amplitudes()[0].norm_sqr();
        assert!((p0 - (-1.0f64).exp()).abs() < 1e-10);
        assert!((p0 - 0.37).abs() < 0.005);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_rejects_small_truncation() {
        let err = coherent_state(C64::new(1.0, 0.0), trunc(8)).unwrap_err();
        assert!(matches!(err, Error::TruncationTooSmall { .. }));
    }

    #[test]
    fn density_validation() {
        let s = Space::field(trunc(2));
        let bad = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(1.2, 0.0),
            C64::new(-0.2, 0.0),
            ZERO,
        ]));
        assert!(matches!(DensityOperator::new(s.clone(), bad), Err(Error::NonPhysical(_))));
        let mut nh = DMatrix::zeros(3, 3);
        nh[(0, 0)] = C64::new(1.0, 0.0);
        nh[(0, 1)] = C64::new(0.1, 0.0);
        assert!(DensityOperator::new(s, nh).is_err());
    }

    #[test]
    fn partial_trace_of_product() {
        let a = coherent_state(C64::new(0.3, 0.1), trunc(12)).unwrap();
        let b = PureState::fock(trunc(3), 2).unwrap();
        let joint = a.tensor(&b).unwrap().to_density();
        let ra = joint.reduce(&[Factor::Mode(0)]).unwrap();
        let rb = joint.reduce(&[Factor::Mode(1)]).unwrap();
        assert!((ra.matrix() - a.to_density().matrix()).map(|z| z.norm()).max() < 1e-14);
        assert!((rb.matrix() - b.to_density().matrix()).map(|z| z.norm()).max() < 1e-14);
    }

    #[test]
    fn atom_block_and_field_state() {
        let space = Space::atom_field(AtomLevelSet::lambda(), trunc(3));
        let psi = PureState::basis(&space, Some(LEVEL_GP), &[2]).unwrap();
        let rho = psi.to_density();
        assert!((rho.level_population(LEVEL_GP).unwrap() - 1.0).abs() < 1e-15);
        let f = rho.field_state().unwrap();
        assert!((f.matrix()[(2, 2)].re - 1.0).abs() < 1e-15);
        assert_eq!(f.space(), &Space::field(trunc(3)));
    }

    #[test]
    fn json_roundtrip() {
        let s = coherent_state(C64::new(0.5, -0.25), trunc(12)).unwrap();
        let js = serde_json::to_string(&s).unwrap();
        assert!(js.contains("\"basis\""));
        let back: PureState = serde_json::from_str(&js).unwrap();
        assert_eq!(back, s);
        let r = s.to_density();
        let back: DensityOperator = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
