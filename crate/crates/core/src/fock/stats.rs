use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::space::Factor;
use super::state::{hermitian_part, DensityOperator, PureState, State, TRACE_TOL};
use crate::error::{Error, Result};

const SUPPORT_CUTOFF: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhotonStatistics {
    pub mean: f64,
    pub variance: f64,
    /// `var/mean − 1`; `NaN` for the vacuum.
    pub mandel_q: f64,
    pub distribution: Vec<f64>,
}

impl PhotonStatistics {
    pub fn from_distribution(distribution: Vec<f64>) -> Self {
        let mean: f64 = distribution.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        let second: f64 = distribution.iter().enumerate().map(|(n, p)| (n * n) as f64 * p).sum();
        let variance = second - mean * mean;
        let mandel_q = if mean > 0.0 { variance / mean - 1.0 } else { f64::NAN };
        Self { mean, variance, mandel_q, distribution }
    }
}

/// Photon-number statistics of field mode `mode` of a normalized state.
pub fn photon_statistics(state: &State, mode: usize) -> Result<PhotonStatistics> {
    let dist = number_distribution(state, mode)?;
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > TRACE_TOL {
        return Err(Error::Unnormalized { norm_sqr: total });
    }
    Ok(PhotonStatistics::from_distribution(dist))
}

/// `P_k` for mode `mode` (no normalization check).
pub fn number_distribution(state: &State, mode: usize) -> Result<Vec<f64>> {
    let space = state.space();
    let trunc = *space
        .modes()
        .get(mode)
        .ok_or_else(|| Error::InvalidParameter(format!("no field mode {mode}")))?;
    let mut dist = vec![0.0; trunc.dim()];
    match state {
        State::Pure(p) => {
            for (i, z) in p.amplitudes().iter().enumerate() {
                dist[space.decompose(i).1[mode]] += z.norm_sqr();
            }
        }
        State::Mixed(r) => {
            for i in 0..r.dim() {
                dist[space.decompose(i).1[mode]] += r.matrix()[(i, i)].re;
            }
        }
    }
    Ok(dist)
}

/// Squared fidelity. Pure–pure is `|<a|b>|^2`, pure–mixed `<a|rho|a>`, and
/// mixed–mixed the Uhlmann form `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
pub fn fidelity(a: &State, b: &State) -> Result<f64> {
    a.space().check_same(b.space())?;
    let f = match (a, b) {
        (State::Pure(x), State::Pure(y)) => x.overlap(y)?.norm_sqr(),
        (State::Pure(x), State::Mixed(r)) | (State::Mixed(r), State::Pure(x)) => {
            pure_mixed(x, r)
        }
        (State::Mixed(r), State::Mixed(s)) => uhlmann(r.matrix(), s.matrix()),
    };
    Ok(f.clamp(0.0, 1.0))
}

fn pure_mixed(x: &PureState, r: &DensityOperator) -> f64 {
    let v = x.amplitudes();
    (v.adjoint() * r.matrix() * v)[(0, 0)].re
}

/// Works on the support of `rho` so rank-deficient inputs do not pick up
/// square roots of round-off eigenvalues.
fn uhlmann(rho: &DMatrix<C64>, sigma: &DMatrix<C64>) -> f64 {
    let eig = hermitian_part(rho).symmetric_eigen();
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > SUPPORT_CUTOFF * top)
        .collect();
    let d = rho.nrows();
    let mut w = DMatrix::<C64>::zeros(d, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        for r in 0..d {
            w[(r, c)] = eig.eigenvectors[(r, i)] * s;
        }
    }
    let m = w.adjoint() * sigma * &w;
    let s: f64 = hermitian_part(&m)
        .symmetric_eigenvalues()
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum();
    s * s
}

impl PureState {
    pub fn photon_statistics(&self, mode: usize) -> Result<PhotonStatistics> {
        photon_statistics(&State::Pure(self.clone()), mode)
    }
}

impl DensityOperator {
    pub fn photon_statistics(&self, mode: usize) -> Result<PhotonStatistics> {
        photon_statistics(&State::Mixed(self.clone()), mode)
    }

    /// `<psi|rho|psi>`.
    pub fn fidelity_with(&self, psi: &PureState) -> Result<f64> {
        self.space().check_same(psi.space())?;
        Ok(pure_mixed(psi, self).clamp(0.0, 1.0))
    }
}

/// Keep only mode `mode` of a field-only or composite state.
pub fn mode_state(state: &DensityOperator, mode: usize) -> Result<DensityOperator> {
    state.reduce(&[Factor::Mode(mode)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{bare_lower, bare_raise, coherent_state, FockTruncation};

    // wide enough that the shifted moments match the untruncated ones
    const WIDE: usize = 20;

    fn coh1() -> PureState {
        coherent_state(C64::new(1.0, 0.0), FockTruncation::new(WIDE).unwrap()).unwrap()
    }

    /// Moments of a Poisson(1) distribution shifted by `shift`, computed by
    /// direct summation over the untruncated distribution.
    fn shifted_poisson_moments(shift: i64) -> (f64, f64) {
        let mut w = Vec::new();
        let mut f = 1.0;
        for k in 0..60i64 {
            if k > 0 {
                f *= k as f64;
            }
            let n = k + shift;
            if n >= 0 {
                w.push((n as f64, (-1.0f64).exp() / f));
            }
        }
        let z: f64 = w.iter().map(|x| x.1).sum();
        let m: f64 = w.iter().map(|x| x.0 * x.1).sum::<f64>() / z;
        let m2: f64 = w.iter().map(|x| x.0 * x.0 * x.1).sum::<f64>() / z;
        (m, m2 - m * m)
    }

    #[test]
    fn coherent_is_poissonian() {
        let s = coh1().photon_statistics(0).unwrap();
        assert!((s.mean - 1.0).abs() < 1e-9);
        assert!(s.mandel_q.abs() < 1e-8);
    }

    #[test]
    fn raised_coherent_is_subpoissonian() {
        let tr = FockTruncation::new(WIDE).unwrap();
        let up = coh1().apply(&bare_raise(tr)).unwrap().normalized().unwrap();
        let s = up.photon_statistics(0).unwrap();
        let (m, v) = shifted_poisson_moments(1);
        assert!((m - 2.0).abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        assert!((s.mean - 2.0).abs() < 1e-8);
        assert!((s.variance - 1.0).abs() < 1e-8);
        assert!((s.mandel_q + 0.5).abs() < 1e-8);
        assert_eq!(s.distribution[0], 0.0);
    }

    #[test]
    fn lowered_coherent_is_superpoissonian() {
        let tr = FockTruncation::new(WIDE).unwrap();
        let down = coh1().apply(&bare_lower(tr)).unwrap().normalized().unwrap();
        let s = down.photon_statistics(0).unwrap();
        let (m, v) = shifted_poisson_moments(-1);
        assert!((s.mean - m).abs() < 1e-8);
        assert!((s.variance - v).abs() < 1e-8);
        assert!(s.mandel_q > 0.0);
        assert!((s.mandel_q - (v / m - 1.0)).abs() < 1e-8);
    }

    #[test]
    fn unnormalized_rejected() {
        let tr = FockTruncation::new(WIDE).unwrap();
        let up = coh1().apply(&bare_lower(tr)).unwrap();
        assert!(matches!(up.photon_statistics(0), Err(Error::Unnormalized { .. })));
    }

    #[test]
    fn fidelity_examples() {
        let tr = FockTruncation::new(WIDE).unwrap();
        let zero = PureState::fock(tr, 0).unwrap();
        let one = PureState::fock(tr, 1).unwrap();
        let c = coh1();
        let f = |a: &PureState, b: &PureState| fidelity(&a.clone().into(), &b.clone().into()).unwrap();
        assert!((f(&c, &c) - 1.0).abs() < 1e-12);
        assert_eq!(f(&zero, &one), 0.0);
        assert!((f(&zero, &c) - (-1.0f64).exp()).abs() < 1e-9);
        // Uhlmann on pure inputs reduces to the overlap
        let u = fidelity(&c.to_density().into(), &zero.to_density().into()).unwrap();
        assert!((u - (-1.0f64).exp()).abs() < 1e-9);
    }
}
