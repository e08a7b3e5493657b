use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::space::{AtomLevelSet, Factor, FockTruncation, Space};
use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

/// Dense operator on a [`Space`].
#[derive(Clone, Debug, PartialEq)]
pub struct LinearOperator {
    space: Space,
    matrix: DMatrix<C64>,
}

impl LinearOperator {
    pub fn new(space: Space, matrix: DMatrix<C64>) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: matrix.nrows() });
        }
        Ok(Self { space, matrix })
    }

    pub fn identity(space: &Space) -> Self {
        Self { space: space.clone(), matrix: DMatrix::identity(space.dim(), space.dim()) }
    }

    pub fn zeros(space: &Space) -> Self {
        Self { space: space.clone(), matrix: DMatrix::zeros(space.dim(), space.dim()) }
    }

    /// `|to><from|` on the atom alone.
    pub fn atom_transition(atom: &AtomLevelSet, to: &str, from: &str) -> Result<Self> {
        let space = Space::new(Some(atom.clone()), Vec::new());
        let mut m = DMatrix::zeros(atom.len(), atom.len());
        m[(atom.index(to)?, atom.index(from)?)] = C64::new(1.0, 0.0);
        Ok(Self { space, matrix: m })
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space.clone(), matrix: self.matrix.adjoint() }
    }

    pub fn compose(&self, rhs: &LinearOperator) -> Result<Self> {
        self.space.check_same(&rhs.space)?;
        Ok(Self { space: self.space.clone(), matrix: &self.matrix * &rhs.matrix })
    }

    pub fn add(&self, rhs: &LinearOperator) -> Result<Self> {
        self.space.check_same(&rhs.space)?;
        Ok(Self { space: self.space.clone(), matrix: &self.matrix + &rhs.matrix })
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { space: self.space.clone(), matrix: &self.matrix * s }
    }

    /// Largest deviation from Hermiticity, `max |H − H^†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        super::state::max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        SparseMatrix::from_dense(&self.matrix)
    }

    /// Lift an operator acting on a single factor of `space` to the full
    /// space, with identities on every other factor.
    pub fn embed(&self, factor: Factor, space: &Space) -> Result<Self> {
        let fd = space.factor_dim(factor)?;
        if fd != self.dim() {
            return Err(Error::DimensionMismatch { expected: fd, found: self.dim() });
        }
        let factors = space.factors();
        let pos = factors.iter().position(|f| *f == factor).unwrap();
        let dims = space.factor_dims();
        let before: usize = dims[..pos].iter().product();
        let after: usize = dims[pos + 1..].iter().product();
        let m = DMatrix::<C64>::identity(before, before)
            .kronecker(&self.matrix)
            .kronecker(&DMatrix::<C64>::identity(after, after));
        Ok(Self { space: space.clone(), matrix: m })
    }

    /// `self ⊗ rhs`; only the left factor may carry an atom.
    pub fn tensor(&self, rhs: &LinearOperator) -> Result<Self> {
        let space = super::state::tensor_space(&self.space, &rhs.space)?;
        Ok(Self { space, matrix: self.matrix.kronecker(&rhs.matrix) })
    }
}

fn field_op(trunc: FockTruncation, f: impl Fn(usize, usize) -> f64) -> LinearOperator {
    let d = trunc.dim();
    LinearOperator {
        space: Space::field(trunc),
        matrix: DMatrix::from_fn(d, d, |i, j| C64::new(f(i, j), 0.0)),
    }
}

/// Annihilation operator `a|n> = sqrt(n)|n-1>`.
///
/// In the truncated space `a^† a` is exact, but `a a^†` misses the
/// `|n_max+1>` contribution on the top row.
pub fn annihilation(trunc: FockTruncation) -> LinearOperator {
    field_op(trunc, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 })
}

pub fn creation(trunc: FockTruncation) -> LinearOperator {
    annihilation(trunc).adjoint()
}

pub fn number(trunc: FockTruncation) -> LinearOperator {
    field_op(trunc, |i, j| if i == j { i as f64 } else { 0.0 })
}

/// Bare raising operator `E+ = sum |n+1><n|`, without Bose factors.
pub fn bare_raise(trunc: FockTruncation) -> LinearOperator {
    field_op(trunc, |i, j| if i == j + 1 { 1.0 } else { 0.0 })
}

/// Bare lowering operator `E- = sum |n-1><n|`.
pub fn bare_lower(trunc: FockTruncation) -> LinearOperator {
    field_op(trunc, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
}

/// Vacuum projector and its complement, `(|0><0|, I − |0><0|)`.
pub fn vacuum_projectors(trunc: FockTruncation) -> (LinearOperator, LinearOperator) {
    let p0 = field_op(trunc, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 });
    let rest = field_op(trunc, |i, j| if i == j && i > 0 { 1.0 } else { 0.0 });
    (p0, rest)
}

/// Photon parity `(-1)^n`.
pub fn parity(trunc: FockTruncation) -> LinearOperator {
    field_op(trunc, |i, j| if i == j { if i % 2 == 0 { 1.0 } else { -1.0 } } else { 0.0 })
}
