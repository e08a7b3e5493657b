use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::model::Model;
use super::{EvolveOptions, EvolveResult, SeriesPoint, LINDBLAD_DIM_CAP, PURE_DIM_CAP, CLOSED_TOL, OPEN_TOL};
use crate::error::{Error, Result};
use crate::fock::{DensityOperator, PureState, State, LEVEL_E, LEVEL_SINK};
use crate::integrate::{integrate, IntegrationStats, StepControl};

const NEG_I: C64 = C64 { re: 0.0, im: -1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
/// Eigen-components of a mixed input below this weight are dropped.
const ENSEMBLE_CUTOFF: f64 = 1e-14;
/// A final eigenvalue below minus this is reported as a failure; smaller
/// negative parts are integration error and get clipped.
const POSITIVITY_FAIL: f64 = 1e-6;

impl Model {
    /// Dispatch on the state kind: state vectors stay pure under closed
    /// dynamics, mixed inputs to a closed model go through the eigen
    /// ensemble, everything else through the master equation.
    pub fn evolve(&self, state: &State, opts: &EvolveOptions) -> Result<EvolveResult> {
        match (state, self.is_closed()) {
            (State::Pure(p), true) => self.evolve_pure(p, opts),
            (State::Mixed(r), true) => self.evolve_ensemble(r, opts),
            (s, false) => self.evolve_density(&s.to_density(), opts),
        }
    }

    fn control(&self, opts: &EvolveOptions, closed: bool) -> StepControl {
        let tol = opts.tolerance.unwrap_or(if closed { CLOSED_TOL } else { OPEN_TOL });
        let mut c = StepControl::new(tol);
        if self.duration() > 0.0 {
            c = c.with_h_max(self.duration() / 50.0);
        }
        c
    }

    fn sample_times(&self, opts: &EvolveOptions) -> Vec<f64> {
        let t = self.duration();
        match opts.series_points {
            0 => vec![t],
            1 => vec![0.0, t],
            n => (0..n).map(|i| if i + 1 == n { t } else { t * i as f64 / (n - 1) as f64 }).collect(),
        }
    }

    /// Schrödinger evolution of a state vector (closed models only). The
    /// input need not be normalized; the norm is carried along.
    pub fn evolve_pure(&self, psi0: &PureState, opts: &EvolveOptions) -> Result<EvolveResult> {
        self.space().check_same(psi0.space())?;
        let (cols, stats, series) = self.run_vectors(vec![psi0.amplitudes().clone()], &[1.0], opts)?;
        let psi = PureState::new_unnormalized(self.space().clone(), cols.into_iter().next().unwrap())?;
        let sink = self.sink_population_pure(&psi);
        Ok(EvolveResult { trace: psi.norm_sqr(), sink_population: sink, final_state: State::Pure(psi), stats, series })
    }

    /// State vectors at each of the increasing `times` (closed models).
    pub fn trajectory(&self, psi0: &PureState, times: &[f64], opts: &EvolveOptions) -> Result<Vec<PureState>> {
        self.space().check_same(psi0.space())?;
        let d = self.space().dim();
        if !self.is_closed() {
            return Err(Error::InvalidParameter("state-vector evolution needs a closed model".into()));
        }
        let mut y: Vec<C64> = psi0.amplitudes().iter().copied().collect();
        let sp = &self.sparse;
        let mut out = Vec::with_capacity(times.len());
        integrate(
            |t, x, o| self.apply_hamiltonian(sp, t, x, o, d),
            &mut y,
            0.0,
            times,
            &self.control(opts, true),
            |_, _, x| {
                out.push(PureState::new_unnormalized(self.space().clone(), DVector::from_column_slice(x))?);
                Ok(())
            },
        )?;
        Ok(out)
    }

    /// `out = -i H(t) x` for a stack of column vectors of length `d`.
    fn apply_hamiltonian(&self, sp: &super::model::SparseParts, t: f64, x: &[C64], out: &mut [C64], d: usize) {
        let (ga, gb) = self.couplings(t);
        out.fill(ZERO);
        for (xc, oc) in x.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            sp.h0.mul_vec_acc(NEG_I, xc, oc);
            if ga != 0.0 {
                sp.h_a.mul_vec_acc(NEG_I * ga, xc, oc);
            }
            if gb != 0.0 {
                sp.h_b.mul_vec_acc(NEG_I * gb, xc, oc);
            }
        }
    }

    /// Closed evolution of a mixed state by propagating each eigenvector.
    pub fn evolve_ensemble(&self, rho0: &DensityOperator, opts: &EvolveOptions) -> Result<EvolveResult> {
        self.space().check_same(rho0.space())?;
        if !self.is_closed() {
            return Err(Error::InvalidParameter("ensemble propagation needs a closed model".into()));
        }
        let eig = hermitian(rho0.matrix()).symmetric_eigen();
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        for (i, &w) in eig.eigenvalues.iter().enumerate() {
            if w > ENSEMBLE_CUTOFF {
                cols.push(eig.eigenvectors.column(i).into_owned());
                weights.push(w);
            }
        }
        let (cols, stats, series) = self.run_vectors(cols, &weights, opts)?;
        let d = self.space().dim();
        let mut m = DMatrix::<C64>::zeros(d, d);
        for (v, &w) in cols.iter().zip(&weights) {
            m += v * v.adjoint() * C64::new(w, 0.0);
        }
        let rho = DensityOperator::new_unchecked(self.space().clone(), m)?;
        Ok(EvolveResult {
            trace: rho.trace(),
            sink_population: self.sink_population(&rho),
            final_state: State::Mixed(rho),
            stats,
            series,
        })
    }

    fn run_vectors(
        &self,
        cols: Vec<DVector<C64>>,
        weights: &[f64],
        opts: &EvolveOptions,
    ) -> Result<(Vec<DVector<C64>>, IntegrationStats, Vec<SeriesPoint>)> {
        if !self.is_closed() {
            return Err(Error::InvalidParameter("state-vector evolution needs a closed model".into()));
        }
        let d = self.space().dim();
        if d > PURE_DIM_CAP {
            return Err(Error::DimensionCap { dim: d, cap: PURE_DIM_CAP, what: "state-vector evolution" });
        }
        let k = cols.len();
        let mut y: Vec<C64> = cols.iter().flat_map(|c| c.iter().copied()).collect();
        let sp = &self.sparse;
        let rhs = |t: f64, x: &[C64], out: &mut [C64]| self.apply_hamiltonian(sp, t, x, out, d);
        let mut series = Vec::new();
        let samples = self.sample_times(opts);
        let record = opts.series_points > 0;
        let stats = integrate(rhs, &mut y, 0.0, &samples, &self.control(opts, true), |_, t, x| {
            if record {
                series.push(self.series_point(t, |i, j| {
                    (0..k).map(|c| weights[c] * x[c * d + i] * x[c * d + j].conj()).sum()
                }));
            }
            Ok(())
        })?;
        let out = y.chunks_exact(d).map(|c| DVector::from_column_slice(c)).collect();
        Ok((out, stats, series))
    }

    /// Master-equation evolution.
    pub fn evolve_density(&self, rho0: &DensityOperator, opts: &EvolveOptions) -> Result<EvolveResult> {
        self.space().check_same(rho0.space())?;
        rho0.validate()?;
        let d = self.space().dim();
        if d > LINDBLAD_DIM_CAP {
            return Err(Error::DimensionCap { dim: d, cap: LINDBLAD_DIM_CAP, what: "Lindblad evolution" });
        }
        let mut y: Vec<C64> = rho0.matrix().as_slice().to_vec();
        let mut g = vec![ZERO; d * d];
        let mut tmp = vec![ZERO; d * d];
        let sp = &self.sparse;
        let rhs = |t: f64, r: &[C64], out: &mut [C64]| {
            let (ga, gb) = self.couplings(t);
            // G = -i H_eff rho, H_eff = H - (i/2) sum L^†L
            g.fill(ZERO);
            sp.h0.mul_left_acc(NEG_I, r, &mut g);
            if ga != 0.0 {
                sp.h_a.mul_left_acc(NEG_I * ga, r, &mut g);
            }
            if gb != 0.0 {
                sp.h_b.mul_left_acc(NEG_I * gb, r, &mut g);
            }
            sp.loss.mul_left_acc(C64::new(-0.5, 0.0), r, &mut g);
            for j in 0..d {
                for i in 0..d {
                    out[i + j * d] = g[i + j * d] + g[j + i * d].conj();
                }
            }
            for jump in &sp.jumps {
                tmp.fill(ZERO);
                jump.op.mul_left_acc(C64::new(1.0, 0.0), r, &mut tmp);
                jump.op.mul_right_adjoint_acc(C64::new(jump.rate, 0.0), &tmp, out);
            }
        };
        let mut series = Vec::new();
        let samples = self.sample_times(opts);
        let record = opts.series_points > 0;
        let closed = self.is_closed();
        let stats = integrate(rhs, &mut y, 0.0, &samples, &self.control(opts, closed), |_, t, r| {
            if record {
                series.push(self.series_point(t, |i, j| r[i + j * d]));
            }
            Ok(())
        })?;
        let m = hermitian(&DMatrix::from_column_slice(d, d, &y));
        let rho = DensityOperator::new_unchecked(self.space().clone(), clip_negative(m)?)?;
        Ok(EvolveResult {
            trace: rho.trace(),
            sink_population: self.sink_population(&rho),
            final_state: State::Mixed(rho),
            stats,
            series,
        })
    }

    fn level_index(&self, label: &str) -> Option<usize> {
        self.space().atom().and_then(|a| a.index(label).ok())
    }

    fn sink_population(&self, rho: &DensityOperator) -> f64 {
        match self.level_index(LEVEL_SINK) {
            Some(_) => rho.level_population(LEVEL_SINK).unwrap_or(0.0),
            None => 0.0,
        }
    }

    fn sink_population_pure(&self, psi: &PureState) -> f64 {
        let Some(s) = self.level_index(LEVEL_SINK) else { return 0.0 };
        let fd = self.space().field_part().dim();
        psi.amplitudes().rows(s * fd, fd).norm_squared()
    }

    /// Diagnostic populations from matrix elements `elem(i, j) = rho_ij`.
    pub(crate) fn series_point(&self, t: f64, elem: impl Fn(usize, usize) -> C64) -> SeriesPoint {
        let space = self.space();
        let d = space.dim();
        let fd = space.field_part().dim();
        let block = |level: Option<usize>| -> f64 {
            level.map_or(0.0, |l| (l * fd..(l + 1) * fd).map(|i| elem(i, i).re).sum())
        };
        let trace = (0..d).map(|i| elem(i, i).re).sum();
        let p_e = block(self.level_index(LEVEL_E));
        let p_sink = block(self.level_index(LEVEL_SINK));
        let (mut p_dark, mut p_bright) = (f64::NAN, f64::NAN);
        if let (Some(roles), Some(schedule)) = (self.roles(), self.schedule()) {
            let (mut dark, mut bright) = (0.0, 0.0);
            let n_max = space.modes()[roles.mode].n_max();
            let mut angles: HashMap<usize, (f64, f64)> = HashMap::new();
            for f in 0..fd {
                let (_, mut photons) = space.field_part().decompose(f);
                let lower = photons[roles.mode];
                if lower == 0 {
                    let c = space.index(Some(roles.cavity), &photons);
                    dark += elem(c, c).re;
                }
                if lower == n_max {
                    continue;
                }
                let l = space.index(Some(roles.laser), &photons);
                photons[roles.mode] = lower + 1;
                let c = space.index(Some(roles.cavity), &photons);
                let (s, co) = *angles.entry(lower + 1).or_insert_with(|| schedule.mixing(lower + 1).theta(t).sin_cos());
                let (ll, cc, lc) = (elem(l, l).re, elem(c, c).re, elem(l, c).re);
                dark += s * s * ll + co * co * cc - 2.0 * s * co * lc;
                bright += co * co * ll + s * s * cc + 2.0 * s * co * lc;
            }
            p_dark = dark;
            p_bright = bright;
        }
        SeriesPoint { t, p_dark, p_bright, p_e, p_sink, trace }
    }
}

/// Zero the negative eigenvalues of a Hermitian matrix, keeping its trace.
fn clip_negative(m: DMatrix<C64>) -> Result<DMatrix<C64>> {
    let eig = m.clone().symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min < -POSITIVITY_FAIL {
        return Err(Error::NonPhysical(format!("Lindblad evolution lost positivity (eigenvalue {min:.3e})")));
    }
    if min >= 0.0 {
        return Ok(m);
    }
    let kept: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0)).sum();
    let scale = eig.eigenvalues.sum() / kept;
    let mut out = DMatrix::<C64>::zeros(m.nrows(), m.ncols());
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 0.0 {
            let v = eig.eigenvectors.column(i);
            out += &v * v.adjoint() * C64::new(l * scale, 0.0);
        }
    }
    Ok(out)
}

fn hermitian(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Evolve a batch of (possibly unnormalized) state vectors through a closed
/// model with one shared step sequence.
pub fn evolve_block(model: &Model, vectors: Vec<DVector<C64>>, opts: &EvolveOptions) -> Result<Vec<DVector<C64>>> {
    let w = vec![1.0; vectors.len()];
    Ok(model.run_vectors(vectors, &w, opts)?.0)
}
