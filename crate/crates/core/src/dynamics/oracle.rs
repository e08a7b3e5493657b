//! Brute-force reference propagator for small spaces: fixed steps, the
//! generator frozen at the left end of each step, dense exponentials.
//! Intended for cross-checking the adaptive integrator in tests.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::model::Model;
use crate::error::{Error, Result};
use crate::fock::{DensityOperator, PureState, State};

pub const ORACLE_DT: f64 = 1e-4;
pub const ORACLE_DIM_CAP: usize = 64;

/// Lie splitting per step: `rho -> U rho U^†` with
/// `U = exp(-i H(t_k) dt)`, then `rho -> exp(dt D) rho` for the
/// time-independent dissipator `D` (its superoperator exponential is
/// formed once). First order in `dt`.
pub fn oracle_evolve(state: &State, model: &Model, dt: f64) -> Result<State> {
    let d = model.space().dim();
    if d > ORACLE_DIM_CAP {
        return Err(Error::DimensionCap { dim: d, cap: ORACLE_DIM_CAP, what: "oracle propagation" });
    }
    model.space().check_same(state.space())?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("oracle step {dt} must be > 0")));
    }
    let t_end = model.duration();
    let steps = (t_end / dt).ceil() as usize;
    if steps == 0 {
        return Ok(state.clone());
    }
    let h = t_end / steps as f64;
    let blocks = coupled_blocks(model);
    let propagator = |k: usize| -> Vec<DMatrix<C64>> {
        let hk = model.hamiltonian_clamped(k as f64 * h);
        blocks
            .iter()
            .map(|b| unitary_step(&DMatrix::from_fn(b.len(), b.len(), |i, j| hk.matrix()[(b[i], b[j])]), h))
            .collect()
    };
    let zero = C64::new(0.0, 0.0);

    match state {
        State::Pure(psi) if model.is_closed() => {
            let mut v = psi.amplitudes().clone();
            for k in 0..steps {
                for (b, u) in blocks.iter().zip(propagator(k)) {
                    let x: Vec<C64> = b.iter().map(|&i| v[i]).collect();
                    for (r, &i) in b.iter().enumerate() {
                        v[i] = (0..b.len()).map(|c| u[(r, c)] * x[c]).sum();
                    }
                }
            }
            Ok(State::Pure(PureState::new_unnormalized(model.space().clone(), v)?))
        }
        _ => {
            let dissipator = dissipator_step(model, h);
            let mut rho = state.to_density().into_matrix();
            let mut half = DMatrix::<C64>::zeros(d, d);
            for k in 0..steps {
                let us = propagator(k);
                // half = U rho, row blocks
                for (b, u) in blocks.iter().zip(&us) {
                    for col in 0..d {
                        for (r, &i) in b.iter().enumerate() {
                            half[(i, col)] = b.iter().enumerate().map(|(c, &j)| u[(r, c)] * rho[(j, col)]).sum();
                        }
                    }
                }
                // rho = half U^†, column blocks
                for (b, u) in blocks.iter().zip(&us) {
                    for row in 0..d {
                        for (c, &j) in b.iter().enumerate() {
                            rho[(row, j)] = b.iter().enumerate().map(|(m, &i)| half[(row, i)] * u[(c, m)].conj()).sum();
                        }
                    }
                }
                if let Some(s) = &dissipator {
                    half.fill(zero);
                    let (src, dst) = (rho.as_slice(), half.as_mut_slice());
                    for &(r, c, v) in s {
                        dst[r] += v * src[c];
                    }
                    std::mem::swap(&mut rho, &mut half);
                }
            }
            Ok(State::Mixed(DensityOperator::new_unchecked(model.space().clone(), rho)?))
        }
    }
}

/// Index sets of the connected components of the Hamiltonian's coupling
/// graph (union over all sweep terms). `U` is block diagonal over them.
fn coupled_blocks(model: &Model) -> Vec<Vec<usize>> {
    let d = model.space().dim();
    let mut parent: Vec<usize> = (0..d).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let pattern = model.coupling_pattern();
    for i in 0..d {
        for j in 0..d {
            if pattern[(i, j)] {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; d];
    for i in 0..d {
        let r = root(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// `exp(-i H h)` by its Taylor series; `|H h|` is tiny at oracle steps so
/// a handful of terms reach round-off.
fn unitary_step(hm: &DMatrix<C64>, h: f64) -> DMatrix<C64> {
    let d = hm.nrows();
    let a = hm * C64::new(0.0, -h);
    let mut u = DMatrix::<C64>::identity(d, d);
    let mut term = u.clone();
    for k in 1..40 {
        term = &a * term * C64::new(1.0 / k as f64, 0.0);
        u += &term;
        if term.iter().all(|z| z.norm() < 1e-18) {
            break;
        }
    }
    u
}

/// Nonzero entries `(row, col, value)` of `exp(h D)` acting on the
/// column-major vectorization of `rho`, where
/// `D = sum_k r_k (conj(L_k) ⊗ L_k) - (I ⊗ K + K^T ⊗ I)/2`, `K = sum r L^†L`.
fn dissipator_step(model: &Model, h: f64) -> Option<Vec<(usize, usize, C64)>> {
    if model.jumps().is_empty() {
        return None;
    }
    let d = model.space().dim();
    let id = DMatrix::<C64>::identity(d, d);
    let mut k = DMatrix::<C64>::zeros(d, d);
    let mut gen = DMatrix::<C64>::zeros(d * d, d * d);
    for (r, l) in model.jumps() {
        let l = l.matrix();
        k += l.adjoint() * l * C64::new(*r, 0.0);
        gen += l.map(|z| z.conj()).kronecker(l) * C64::new(*r, 0.0);
    }
    gen -= (id.kronecker(&k) + k.transpose().kronecker(&id)) * C64::new(0.5, 0.0);
    let s = (gen * C64::new(h, 0.0)).exp();
    let mut entries = Vec::new();
    for c in 0..d * d {
        for r in 0..d * d {
            let v = s[(r, c)];
            if v != C64::new(0.0, 0.0) {
                entries.push((r, c, v));
            }
        }
    }
    Some(entries)
}
