//! Adiabatic error analysis of a single photon sector.
//!
//! Sector `n >= 1` of the Hamiltonian is spanned by `|g,n-1>`, `|e,n-1>`
//! and `|g',n>`. In the rotating basis
//!
//! ```text
//! |a> = sin(theta)|g,n-1> - cos(theta)|g',n>     (dark, energy 0)
//! |b> = cos(theta)|g,n-1> + sin(theta)|g',n>     (bright)
//! ```
//!
//! the amplitudes obey
//! `a' = theta' b`, `b' = -theta' a - i nu e`, `e' = -i nu b - i Δ e`,
//! and the projective coordinates `kappa_b = b/a`, `kappa_e = e/a` follow a
//! Riccati system whose quasi-static solution gives the leading adiabatic
//! corrections.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{EvolveOptions, Model, SystemConfig};
use crate::error::{Error, Result};
use crate::fock::{AtomLevelSet, FockTruncation, PureState, Space, LEVEL_E, LEVEL_G, LEVEL_GP};
use crate::integrate::{integrate, StepControl};
use crate::output::write_csv;
use crate::pulses::{nu_0, PulseSchedule};

/// Default tolerance for the sector ODEs; tight because diabatic
/// probabilities reach 1e-10 at the long end of a scaling study.
pub const ADIABATIC_TOL: f64 = 1e-12;
/// `|kappa|` above which the projective coordinates are declared singular.
pub const KAPPA_GUARD: f64 = 1e3;

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn check_sector(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("photon sector n must be >= 1".into()));
    }
    Ok(())
}

fn tolerance(config: &SystemConfig) -> f64 {
    config.tolerance.unwrap_or(ADIABATIC_TOL)
}

fn control(config: &SystemConfig) -> StepControl {
    let mut c = StepControl::new(tolerance(config));
    if config.schedule.duration > 0.0 {
        c = c.with_h_max(config.schedule.duration / 50.0);
    }
    c
}

fn uniform(t_end: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    (0..n).map(|i| if i + 1 == n { t_end } else { t_end * i as f64 / (n - 1) as f64 }).collect()
}

/// Instantaneous dark, bright and excited states of sector `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DarkBrightBasis {
    pub a: PureState,
    pub b: PureState,
    pub e: PureState,
}

impl DarkBrightBasis {
    /// `(<a|psi>, <b|psi>, <e|psi>)`.
    pub fn project(&self, psi: &PureState) -> Result<[C64; 3]> {
        Ok([self.a.overlap(psi)?, self.b.overlap(psi)?, self.e.overlap(psi)?])
    }
}

pub fn dark_bright_basis(n: usize, t: f64, schedule: &PulseSchedule, trunc: FockTruncation) -> Result<DarkBrightBasis> {
    check_sector(n)?;
    if n > trunc.n_max() {
        return Err(Error::InvalidParameter(format!("sector {n} exceeds n_max = {}", trunc.n_max())));
    }
    let theta = crate::pulses::theta(t, n, schedule)?;
    let space = Space::atom_field(AtomLevelSet::lambda(), trunc);
    let g = PureState::basis(&space, Some(LEVEL_G), &[n - 1])?;
    let gp = PureState::basis(&space, Some(LEVEL_GP), &[n])?;
    let e = PureState::basis(&space, Some(LEVEL_E), &[n - 1])?;
    let (s, c) = theta.sin_cos();
    let mix = |x: f64, y: f64| {
        PureState::new(space.clone(), g.amplitudes() * C64::new(x, 0.0) + gp.amplitudes() * C64::new(y, 0.0))
    };
    Ok(DarkBrightBasis { a: mix(s, -c)?, b: mix(c, s)?, e })
}

/// Sampled solution of the sector amplitude equations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeTrajectory {
    pub t: Vec<f64>,
    /// `[alpha_a, alpha_b, alpha_e]` at each sample.
    pub alpha: Vec<[C64; 3]>,
}

impl AmplitudeTrajectory {
    pub fn last(&self) -> [C64; 3] {
        *self.alpha.last().expect("at least one sample")
    }
}

/// Integrate the amplitude equations from `alpha = (1, 0, 0)` over the
/// schedule window, sampling `samples` uniform times (at least the ends).
pub fn amplitude_odes_evolve(n: usize, config: &SystemConfig, samples: usize) -> Result<AmplitudeTrajectory> {
    check_sector(n)?;
    config.validate()?;
    let sched = &config.schedule;
    let mix = sched.mixing(n);
    let delta = config.delta;
    let times = uniform(sched.duration, samples);
    let mut y = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
    let mut out = AmplitudeTrajectory { t: Vec::new(), alpha: Vec::new() };
    integrate(
        |t, a, d| {
            let (th, nu) = (mix.theta_dot(t), mix.nu(t));
            d[0] = th * a[1];
            d[1] = -th * a[0] - I * nu * a[2];
            d[2] = -I * nu * a[1] - I * delta * a[2];
        },
        &mut y,
        0.0,
        &times,
        &control(config),
        |_, t, a| {
            out.t.push(t);
            out.alpha.push([a[0], a[1], a[2]]);
            Ok(())
        },
    )?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaTrajectory {
    pub t: Vec<f64>,
    pub kappa_b: Vec<C64>,
    pub kappa_e: Vec<C64>,
}

/// Integrate the projective-coordinate equations from `kappa = 0`. Fails
/// with [`Error::BlowUp`] if `|kappa|` exceeds [`KAPPA_GUARD`], which
/// signals that the dark amplitude went through zero.
pub fn projective_odes_evolve(n: usize, config: &SystemConfig, samples: usize) -> Result<KappaTrajectory> {
    check_sector(n)?;
    config.validate()?;
    let sched = &config.schedule;
    let mix = sched.mixing(n);
    let delta = config.delta;
    let times = uniform(sched.duration, samples);
    let mut y = vec![C64::new(0.0, 0.0); 2];
    let mut out = KappaTrajectory { t: Vec::new(), kappa_b: Vec::new(), kappa_e: Vec::new() };
    integrate(
        |t, k, d| {
            let (th, nu) = (mix.theta_dot(t), mix.nu(t));
            d[0] = -th - I * nu * k[1] - th * k[0] * k[0];
            d[1] = -I * nu * k[0] - I * delta * k[1] - th * k[0] * k[1];
        },
        &mut y,
        0.0,
        &times,
        &control(config).with_blowup(KAPPA_GUARD),
        |_, t, k| {
            out.t.push(t);
            out.kappa_b.push(k[0]);
            out.kappa_e.push(k[1]);
            Ok(())
        },
    )?;
    Ok(out)
}

/// Leading-order quasi-static coordinates:
/// `kappa_b = -i theta' Δ / nu²`, `kappa_e = i theta' / nu`.
pub fn asymptotic_kappas(n: usize, t: f64, config: &SystemConfig) -> Result<(C64, C64)> {
    check_sector(n)?;
    config.schedule.couplings(t)?;
    let mix = config.schedule.mixing(n);
    let (th, nu) = (mix.theta_dot(t), mix.nu(t));
    if nu == 0.0 {
        return Ok((C64::new(0.0, 0.0), C64::new(0.0, 0.0)));
    }
    Ok((-I * th * config.delta / (nu * nu), I * th / nu))
}

/// `(phi_pred, phi_num)`: `phi_pred = -Δ ∫ theta'²/nu² dt` by adaptive
/// Simpson quadrature, `phi_num = arg alpha_a(T)` from the amplitude
/// equations.
pub fn phase_shift(n: usize, config: &SystemConfig) -> Result<(f64, f64)> {
    let traj = amplitude_odes_evolve(n, config, 2)?;
    Ok((predicted_phase(n, config)?, traj.last()[0].arg()))
}

pub fn predicted_phase(n: usize, config: &SystemConfig) -> Result<f64> {
    check_sector(n)?;
    if config.delta == 0.0 {
        return Ok(0.0);
    }
    let mix = config.schedule.mixing(n);
    let f = |t: f64| {
        let nu = mix.nu(t);
        if nu == 0.0 {
            0.0
        } else {
            (mix.theta_dot(t) / nu).powi(2)
        }
    };
    Ok(-config.delta * adaptive_simpson(&f, 0.0, config.schedule.duration, 1e-14))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    // split up front so a smooth bump cannot hide between the first nodes
    const PIECES: usize = 16;
    let h = (b - a) / PIECES as f64;
    (0..PIECES)
        .map(|k| {
            let (lo, hi) = (a + k as f64 * h, if k + 1 == PIECES { b } else { a + (k + 1) as f64 * h });
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            step(f, lo, hi, fa, fm, fb, whole, tol / PIECES as f64, 40)
        })
        .sum()
}

/// Final population outside the dark state, normalized by the final norm.
pub fn diabatic_probability(alpha: [C64; 3]) -> f64 {
    let total: f64 = alpha.iter().map(|z| z.norm_sqr()).sum();
    ((alpha[1].norm_sqr() + alpha[2].norm_sqr()) / total).clamp(0.0, 1.0)
}

/// Least-squares line through `(ln x, ln y)`: `(slope, intercept)`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// Inclusive index range of the points used.
    pub window: (usize, usize),
    /// `false` if no window passed the stability test and the whole range
    /// was fitted.
    pub window_stable: bool,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
}

/// Minimum number of points in a fit window.
const MIN_WINDOW: usize = 4;
/// Relative slope agreement required between the two halves of a window.
const SLOPE_STABILITY: f64 = 0.10;

/// Choose the widest contiguous window spanning at least a decade in `T`
/// whose two halves give slopes within 10% of the window slope; fall back
/// to the full range if none qualifies. Ties go to the longer-`T` window.
pub fn fit_power_law(t: &[f64], values: &[f64]) -> Result<ScalingFit> {
    if t.len() != values.len() || t.len() < 2 {
        return Err(Error::InvalidParameter("need at least two (T, value) points".into()));
    }
    if values.iter().any(|v| !(*v > 0.0)) || t.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter("log-log fit needs positive data".into()));
    }
    let last = t.len() - 1;
    let mut best: Option<(usize, usize)> = None;
    for i in 0..t.len() {
        for j in (i + MIN_WINDOW - 1)..t.len() {
            if t[j] / t[i] < 10.0 - 1e-9 {
                continue;
            }
            let (s, _) = loglog_fit(&t[i..=j], &values[i..=j]);
            let mid = (i + j) / 2;
            let (sl, _) = loglog_fit(&t[i..=mid.max(i + 1)], &values[i..=mid.max(i + 1)]);
            let (sr, _) = loglog_fit(&t[mid.min(j - 1)..=j], &values[mid.min(j - 1)..=j]);
            if (sl - sr).abs() > SLOPE_STABILITY * s.abs() {
                continue;
            }
            let better = match best {
                None => true,
                Some((bi, bj)) => j - i > bj - bi || (j - i == bj - bi && i > bi),
            };
            if better {
                best = Some((i, j));
            }
        }
    }
    let (window, stable) = match best {
        Some(w) => (w, true),
        None => ((0, last), false),
    };
    let (slope, intercept) = loglog_fit(&t[window.0..=window.1], &values[window.0..=window.1]);
    Ok(ScalingFit { slope, intercept, window, window_stable: stable, t: t.to_vec(), values: values.to_vec() })
}

/// Diabatic probability of sector `n` for each sweep time, with the
/// log-log slope over the automatically chosen window.
pub fn diabatic_scaling_fit(n: usize, t_list: &[f64], config: &SystemConfig) -> Result<ScalingFit> {
    check_sector(n)?;
    let p: Vec<f64> = t_list
        .iter()
        .map(|&t| {
            let c = config.clone().with_schedule(config.schedule.clone().with_duration(t));
            amplitude_odes_evolve(n, &c, 2).map(|traj| diabatic_probability(traj.last()))
        })
        .collect::<Result<_>>()?;
    fit_power_law(t_list, &p)
}

/// `|phi_num - phi_pred|` against `T`, fitted over the whole list.
pub fn phase_residual_fit(n: usize, t_list: &[f64], config: &SystemConfig) -> Result<ScalingFit> {
    let r: Vec<f64> = t_list
        .iter()
        .map(|&t| {
            let c = config.clone().with_schedule(config.schedule.clone().with_duration(t));
            phase_shift(n, &c).map(|(p, q)| (q - p).abs())
        })
        .collect::<Result<_>>()?;
    let (slope, intercept) = loglog_fit(t_list, &r);
    Ok(ScalingFit {
        slope,
        intercept,
        window: (0, t_list.len() - 1),
        window_stable: true,
        t: t_list.to_vec(),
        values: r,
    })
}

/// Numerical and predicted adiabatic quantities of one `(n, T)` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticReport {
    pub n: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub nu0: f64,
    pub kappa_b_end: C64,
    pub kappa_e_end: C64,
    pub kappa_b_pred: C64,
    pub kappa_e_pred: C64,
    /// `|kappa_num - kappa_pred|` at mid-sweep.
    pub kappa_b_mid_residual: f64,
    pub kappa_e_mid_residual: f64,
    pub phi_pred: f64,
    pub phi_num: f64,
    pub p_diabatic: f64,
}

pub fn adiabatic_report(n: usize, config: &SystemConfig) -> Result<AdiabaticReport> {
    check_sector(n)?;
    let t_end = config.schedule.duration;
    let amps = amplitude_odes_evolve(n, config, 3)?;
    let kap = projective_odes_evolve(n, config, 3)?;
    let (pb_mid, pe_mid) = asymptotic_kappas(n, 0.5 * t_end, config)?;
    let (pb_end, pe_end) = asymptotic_kappas(n, t_end, config)?;
    Ok(AdiabaticReport {
        n,
        t: t_end,
        nu0: nu_0(n, config.delta, &config.schedule)?,
        kappa_b_end: kap.kappa_b[2],
        kappa_e_end: kap.kappa_e[2],
        kappa_b_pred: pb_end,
        kappa_e_pred: pe_end,
        kappa_b_mid_residual: (kap.kappa_b[1] - pb_mid).norm(),
        kappa_e_mid_residual: (kap.kappa_e[1] - pe_mid).norm(),
        phi_pred: predicted_phase(n, config)?,
        phi_num: amps.last()[0].arg(),
        p_diabatic: diabatic_probability(amps.last()),
    })
}

pub const ADIABATIC_HEADER: [&str; 10] = [
    "n",
    "T",
    "nu0",
    "p_diabatic",
    "phi_pred",
    "phi_num",
    "kappa_b_residual",
    "kappa_e_residual",
    "slope",
    "phi_residual",
];

/// CSV rows; `slopes[i]` is the fitted diabatic slope for `reports[i].n`
/// (`NaN` when no fit was made).
pub fn write_adiabatic_csv<W: std::io::Write>(w: W, reports: &[AdiabaticReport], slopes: &[f64]) -> Result<()> {
    let rows: Vec<Vec<f64>> = reports
        .iter()
        .zip(slopes)
        .map(|(r, s)| {
            vec![
                r.n as f64,
                r.t,
                r.nu0,
                r.p_diabatic,
                r.phi_pred,
                r.phi_num,
                r.kappa_b_mid_residual,
                r.kappa_e_mid_residual,
                *s,
                (r.phi_num - r.phi_pred).abs(),
            ]
        })
        .collect();
    write_csv(w, &ADIABATIC_HEADER, &rows)
}

/// Largest pointwise deviation between the full Schrödinger evolution of
/// the initial dark state `-|g',n>`, projected on the rotating basis, and
/// the amplitude-equation solution, over `samples` uniform times.
pub fn simulator_deviation(n: usize, config: &SystemConfig, samples: usize) -> Result<f64> {
    check_sector(n)?;
    if !config.is_closed() {
        return Err(Error::InvalidParameter("comparison needs a lossless config".into()));
    }
    let amps = amplitude_odes_evolve(n, config, samples)?;
    let model = Model::lambda(config)?;
    let psi0 = dark_bright_basis(n, 0.0, &config.schedule, config.trunc)?.a;
    let opts = EvolveOptions { tolerance: Some(tolerance(config)), series_points: 0 };
    let states = model.trajectory(&psi0, &amps.t, &opts)?;
    let mut worst = 0.0f64;
    for ((t, alpha), psi) in amps.t.iter().zip(&amps.alpha).zip(&states) {
        let basis = dark_bright_basis(n, *t, &config.schedule, config.trunc)?;
        let proj = basis.project(psi)?;
        for k in 0..3 {
            worst = worst.max((proj[k] - alpha[k]).norm());
        }
    }
    Ok(worst)
}
