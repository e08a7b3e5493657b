//! Wigner function of a single-mode field on a phase-space grid.
//!
//! Convention: `x = (a + a^†)/sqrt2`, `p = (a - a^†)/(i sqrt2)`, and
//! `W(x,p) = (1/π) Tr[D(-α) rho D(α) Π]` with `α = (x + ip)/sqrt2` and `Π`
//! the photon parity, so that `∫ W dx dp = 1` and the vacuum is
//! `exp(-x² - p²)/π`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::DensityOperator;
use crate::output::write_csv;

/// Allowed deviation of the grid integral from 1.
pub const NORMALIZATION_TOL: f64 = 1e-3;
pub const CONVENTION: &str = "displaced-parity, x=(a+a^dag)/sqrt2, integral 1";
pub const WIGNER_HEADER: [&str; 3] = ["x", "p", "W"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::square(4.0, 161)
    }
}

impl GridSpec {
    /// `[-half, half]²` with `n` points per axis.
    pub fn square(half: f64, n: usize) -> Self {
        Self { x_min: -half, x_max: half, nx: n, p_min: -half, p_max: half, np: n }
    }

    pub fn validate(&self) -> Result<()> {
        for (lo, hi, n, axis) in [(self.x_min, self.x_max, self.nx, "x"), (self.p_min, self.p_max, self.np, "p")] {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) || n < 2 {
                return Err(Error::InvalidParameter(format!("bad {axis} grid [{lo}, {hi}] with {n} points")));
            }
        }
        Ok(())
    }

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let step = (hi - lo) / (n - 1) as f64;
        (0..n).map(|i| if i + 1 == n { hi } else { lo + step * i as f64 }).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    /// `w[i][j] = W(x[i], p[j])`.
    pub w: Vec<Vec<f64>>,
    pub convention: String,
}

impl WignerGrid {
    pub fn dx(&self) -> f64 {
        (self.x[self.x.len() - 1] - self.x[0]) / (self.x.len() - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p[self.p.len() - 1] - self.p[0]) / (self.p.len() - 1) as f64
    }

    /// `sum W dx dp`.
    pub fn integral(&self) -> f64 {
        self.w.iter().flatten().sum::<f64>() * self.dx() * self.dp()
    }

    pub fn min(&self) -> f64 {
        self.w.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    /// `sum_p W(x_i, p) dp` for each `x_i`.
    pub fn x_marginal(&self) -> Vec<f64> {
        let dp = self.dp();
        self.w.iter().map(|row| row.iter().sum::<f64>() * dp).collect()
    }

    /// Rows `x,p,W`, x-major.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let rows: Vec<Vec<f64>> = self
            .x
            .iter()
            .zip(&self.w)
            .flat_map(|(x, row)| self.p.iter().zip(row).map(move |(p, v)| vec![*x, *p, *v]))
            .collect();
        write_csv(w, &WIGNER_HEADER, &rows)
    }
}

fn field_matrix(rho: &DensityOperator) -> Result<&DMatrix<C64>> {
    let s = rho.space();
    if s.atom().is_some() || s.modes().len() != 1 {
        return Err(Error::InvalidParameter("Wigner function needs a single-mode field state".into()));
    }
    Ok(rho.matrix())
}

/// `<n|D(beta)|m>` of the untruncated displacement for `n, m < dim`.
///
/// Column `m = 0` is the coherent state; the rest follows from
/// `a D = D (a + beta)`:
/// `sqrt(n+1) <n+1|D|m> = sqrt(m) <n|D|m-1> + beta <n|D|m>`.
fn displacement_elements(beta: C64, dim: usize) -> DMatrix<C64> {
    let mut d = DMatrix::<C64>::zeros(dim, dim);
    let env = (-0.5 * beta.norm_sqr()).exp();
    let mut row0 = C64::new(env, 0.0);
    for m in 0..dim {
        if m > 0 {
            row0 = row0 * (-beta.conj()) / (m as f64).sqrt();
        }
        d[(0, m)] = row0;
    }
    for n in 0..dim - 1 {
        let s = ((n + 1) as f64).sqrt();
        for m in 0..dim {
            let down = if m > 0 { d[(n, m - 1)] * (m as f64).sqrt() } else { C64::new(0.0, 0.0) };
            d[(n + 1, m)] = (down + beta * d[(n, m)]) / s;
        }
    }
    d
}

fn wigner_from_matrix(rho: &DMatrix<C64>, x: f64, p: f64) -> f64 {
    let dim = rho.nrows();
    let beta = C64::new(x, p) * 2f64.sqrt();
    let d = displacement_elements(beta, dim);
    // Tr[rho D(2α) Π] = sum_{m,n} rho_mn (-1)^m <n|D(2α)|m>
    let mut acc = C64::new(0.0, 0.0);
    for m in 0..dim {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        for n in 0..dim {
            acc += rho[(m, n)] * d[(n, m)] * sign;
        }
    }
    acc.re / PI
}

/// `W(x, p)` at a single point.
pub fn wigner_at(rho: &DensityOperator, x: f64, p: f64) -> Result<f64> {
    Ok(wigner_from_matrix(field_matrix(rho)?, x, p))
}

/// Wigner function on a grid. Fails with [`Error::GridTooSmall`] if the
/// grid integral misses 1 by more than [`NORMALIZATION_TOL`] (trace-one
/// input assumed).
pub fn wigner(rho: &DensityOperator, spec: &GridSpec) -> Result<WignerGrid> {
    spec.validate()?;
    let m = field_matrix(rho)?;
    let x = GridSpec::axis(spec.x_min, spec.x_max, spec.nx);
    let p = GridSpec::axis(spec.p_min, spec.p_max, spec.np);
    let w: Vec<Vec<f64>> =
        x.par_iter().map(|&xi| p.iter().map(|&pj| wigner_from_matrix(m, xi, pj)).collect()).collect();
    let grid = WignerGrid { x, p, w, convention: CONVENTION.to_string() };
    let integral = grid.integral();
    if (integral - rho.trace()).abs() > NORMALIZATION_TOL {
        return Err(Error::GridTooSmall { integral });
    }
    Ok(grid)
}

/// `sum max(-W, 0) dx dp`.
pub fn negativity_volume(grid: &WignerGrid) -> f64 {
    grid.w.iter().flatten().map(|v| (-v).max(0.0)).sum::<f64>() * grid.dx() * grid.dp()
}

/// Position-quadrature density `<x|rho|x>` from Hermite functions.
pub fn position_density(rho: &DensityOperator, x: f64) -> Result<f64> {
    let m = field_matrix(rho)?;
    let dim = m.nrows();
    // psi_0 = pi^{-1/4} e^{-x²/2}, psi_{n+1} = sqrt(2/(n+1)) x psi_n - sqrt(n/(n+1)) psi_{n-1}
    let mut psi = vec![0.0; dim];
    psi[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if dim > 1 {
        psi[1] = 2f64.sqrt() * x * psi[0];
    }
    for n in 1..dim.saturating_sub(1) {
        let k = (n + 1) as f64;
        psi[n + 1] = (2.0 / k).sqrt() * x * psi[n] - (n as f64 / k).sqrt() * psi[n - 1];
    }
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..dim {
        for j in 0..dim {
            acc += m[(i, j)] * psi[i] * psi[j];
        }
    }
    Ok(acc.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, parity, FockTruncation, PureState};
    use proptest::prelude::*;

    fn fock(n: usize) -> DensityOperator {
        PureState::fock(FockTruncation::new(12).unwrap(), n).unwrap().to_density()
    }

    fn coh(a: C64) -> DensityOperator {
        coherent_state(a, FockTruncation::new(20).unwrap()).unwrap().to_density()
    }

    #[test]
    fn closed_forms() {
        for (x, p) in [(0.0, 0.0), (0.3, -1.2), (2.0, 1.0), (-3.5, 0.1)] {
            let r2 = x * x + p * p;
            let w0 = wigner_at(&fock(0), x, p).unwrap();
            assert!((w0 - (-r2).exp() / PI).abs() < 1e-14);
            let w1 = wigner_at(&fock(1), x, p).unwrap();
            assert!((w1 - (2.0 * r2 - 1.0) * (-r2).exp() / PI).abs() < 1e-14);
            // coherent state: Gaussian centred at (sqrt2 Re a, sqrt2 Im a)
            let a = C64::new(0.8, -0.4);
            let (x0, p0) = (2f64.sqrt() * a.re, 2f64.sqrt() * a.im);
            let wc = wigner_at(&coh(a), x, p).unwrap();
            let want = (-(x - x0).powi(2) - (p - p0).powi(2)).exp() / PI;
            assert!((wc - want).abs() < 1e-9, "{wc} {want}");
        }
        assert!((wigner_at(&fock(1), 0.0, 0.0).unwrap() + 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn default_grid_normalization_and_marginals() {
        for rho in [fock(0), fock(1), coh(C64::new(1.0, 0.0))] {
            let g = wigner(&rho, &GridSpec::default()).unwrap();
            assert_eq!((g.x.len(), g.p.len()), (161, 161));
            assert!((g.integral() - 1.0).abs() < 1e-3);
            for (x, m) in g.x.iter().zip(g.x_marginal()) {
                assert!((m - position_density(&rho, *x).unwrap()).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn hermite_densities() {
        for x in [-2.0, -0.3, 0.0, 1.1] {
            let g = (-x * x as f64).exp() / PI.sqrt();
            assert!((position_density(&fock(0), x).unwrap() - g).abs() < 1e-14);
            assert!((position_density(&fock(1), x).unwrap() - 2.0 * x * x * g).abs() < 1e-14);
        }
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let r = wigner(&coh(C64::new(2.0, 0.0)), &GridSpec::square(1.0, 41));
        assert!(matches!(r, Err(Error::GridTooSmall { .. })));
        assert!(wigner(&fock(0), &GridSpec::square(1.0, 1)).is_err());
    }

    #[test]
    fn single_photon_negativity() {
        // independent quadrature of the closed form at 0.01 spacing
        let h = 0.01;
        let n = (8.0 / h) as i64;
        let mut direct = 0.0;
        for i in -n..=n {
            for j in -n..=n {
                let r2 = (i as f64 * h).powi(2) + (j as f64 * h).powi(2);
                direct += (-(2.0 * r2 - 1.0) * (-r2).exp() / PI).max(0.0) * h * h;
            }
        }
        assert!((direct - (2.0 * (-0.5f64).exp() - 1.0)).abs() < 1e-3);
        let g = wigner(&fock(1), &GridSpec::square(4.0, 401)).unwrap();
        assert!((negativity_volume(&g) - direct).abs() < 1e-3);
        let c = wigner(&coh(C64::new(1.0, 0.5)), &GridSpec::default()).unwrap();
        // only the truncation tail can go negative
        assert!(negativity_volume(&c) < 1e-9);
    }

    #[test]
    fn csv_layout() {
        let g = wigner(&fock(0), &GridSpec::square(5.0, 11)).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "x,p,W");
        assert_eq!(lines.len(), 1 + g.x.len() * g.p.len());
        assert!(lines[1].starts_with(&format!("{},{},", crate::output::fmt_sig(g.x[0]), crate::output::fmt_sig(g.p[0]))));
        assert!(lines[2].starts_with(&format!("{},{},", crate::output::fmt_sig(g.x[0]), crate::output::fmt_sig(g.p[1]))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn origin_is_parity(re in -1.5f64..1.5, im in -1.5f64..1.5, mix in 0.0f64..1.0) {
            let t = FockTruncation::new(20).unwrap();
            let a = coherent_state(C64::new(re, im), t).unwrap().to_density();
            let b = PureState::fock(t, 3).unwrap().to_density();
            let m = a.matrix() * C64::new(mix, 0.0) + b.matrix() * C64::new(1.0 - mix, 0.0);
            let rho = DensityOperator::new(a.space().clone(), m).unwrap();
            let par = rho.expectation(&parity(t)).unwrap().re;
            prop_assert!((PI * wigner_at(&rho, 0.0, 0.0).unwrap() - par).abs() < 1e-10);
        }
    }
}
