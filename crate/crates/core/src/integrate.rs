//! Adaptive Dormand–Prince 5(4) stepping over flat complex vectors.
//!
//! The right-hand side writes `dy/dt` into a caller buffer so the
//! Lindblad and Schrödinger kernels can reuse sparse products without
//! allocating per stage.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl {
    pub atol: f64,
    pub rtol: f64,
    /// Upper bound on the step; `None` lets the controller choose.
    pub h_max: Option<f64>,
    pub max_steps: usize,
    /// Abort with [`Error::BlowUp`] if any component exceeds this modulus.
    pub blowup: Option<f64>,
}

impl StepControl {
    pub fn new(tol: f64) -> Self {
        Self { atol: tol, rtol: tol, h_max: None, max_steps: 50_000_000, blowup: None }
    }

    pub fn with_h_max(mut self, h: f64) -> Self {
        self.h_max = Some(h);
        self
    }

    pub fn with_blowup(mut self, limit: f64) -> Self {
        self.blowup = Some(limit);
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `y` from `t0` through the increasing `samples`, calling
/// `observe(index, t, y)` exactly at each sample time. The state left in
/// `y` is the one at the last sample.
pub fn integrate<F, O>(
    mut rhs: F,
    y: &mut [C64],
    t0: f64,
    samples: &[f64],
    ctrl: &StepControl,
    mut observe: O,
) -> Result<IntegrationStats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    O: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    let n = y.len();
    let mut stats = IntegrationStats::default();
    if samples.windows(2).any(|w| w[1] < w[0]) || samples.first().is_some_and(|&s| s < t0) {
        return Err(Error::InvalidParameter("sample times must be sorted and >= t0".into()));
    }
    let t_end = match samples.last() {
        Some(&t) => t,
        None => return Ok(stats),
    };
    let span = t_end - t0;

    let mut k: Vec<Vec<C64>> = (0..7).map(|_| vec![C64::new(0.0, 0.0); n]).collect();
    let mut tmp = vec![C64::new(0.0, 0.0); n];
    let mut y_new = vec![C64::new(0.0, 0.0); n];

    let mut t = t0;
    let mut next = 0;
    while next < samples.len() && samples[next] <= t0 {
        observe(next, t0, y)?;
        next += 1;
    }
    if next == samples.len() || span <= 0.0 {
        return Ok(stats);
    }

    rhs(t, y, &mut k[0]);
    stats.rhs_evals += 1;
    let h_cap = ctrl.h_max.unwrap_or(span).min(span);
    let mut h = initial_step(y, &k[0], ctrl, span).min(h_cap);
    let h_min = 1e-14 * span.max(1.0);
    let mut err_prev = 1e-4f64;

    while next < samples.len() {
        if stats.accepted + stats.rejected >= ctrl.max_steps {
            return Err(Error::ToleranceNotMet { t, step: h });
        }
        let target = samples[next];
        let h_proposed = h;
        let mut lands = false;
        if t + h >= target - 1e-12 * h {
            h = target - t;
            lands = true;
        }

        stage(&mut tmp, y, h, &k, &[A21]);
        rhs(t + C2 * h, &tmp, &mut k[1]);
        stage(&mut tmp, y, h, &k, &[A31, A32]);
        rhs(t + C3 * h, &tmp, &mut k[2]);
        stage(&mut tmp, y, h, &k, &[A41, A42, A43]);
        rhs(t + C4 * h, &tmp, &mut k[3]);
        stage(&mut tmp, y, h, &k, &[A51, A52, A53, A54]);
        rhs(t + C5 * h, &tmp, &mut k[4]);
        stage(&mut tmp, y, h, &k, &[A61, A62, A63, A64, A65]);
        rhs(t + h, &tmp, &mut k[5]);
        stage(&mut y_new, y, h, &k, &[A71, 0.0, A73, A74, A75, A76]);
        let t_new = if lands { target } else { t + h };
        rhs(t_new, &y_new, &mut k[6]);
        stats.rhs_evals += 6;

        // max norm: density matrices are mostly near-zero entries, and an
        // RMS average lets a few of them drift far past the tolerance
        let mut acc = 0.0;
        let mut finite = true;
        for i in 0..n {
            let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = ctrl.atol + ctrl.rtol * y[i].norm().max(y_new[i].norm());
            let r = e.norm() / sc;
            acc = f64::max(acc, r);
            finite &= y_new[i].re.is_finite() && y_new[i].im.is_finite();
        }
        let err = acc;

        if finite && err <= 1.0 {
            if let Some(limit) = ctrl.blowup {
                if let Some(m) = y_new.iter().map(|z| z.norm()).find(|&m| m > limit) {
                    return Err(Error::BlowUp { t: t_new, magnitude: m });
                }
            }
            y.copy_from_slice(&y_new);
            k.swap(0, 6);
            t = t_new;
            stats.accepted += 1;
            if lands {
                while next < samples.len() && samples[next] <= t {
                    observe(next, t, y)?;
                    next += 1;
                }
            }
            // PI controller
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0)).clamp(0.2, 5.0)
            };
            err_prev = err.max(1e-4);
            h *= fac;
            if lands {
                // a clipped landing step says nothing about the next one
                h = h.max(h_proposed);
            }
            h = h.min(h_cap).max(h_min);
        } else {
            stats.rejected += 1;
            let fac = if finite { (0.9 * err.powf(-0.2)).clamp(0.1, 1.0) } else { 0.1 };
            h *= fac;
            if h < h_min {
                return Err(Error::ToleranceNotMet { t, step: h });
            }
        }
    }
    Ok(stats)
}

fn stage(out: &mut [C64], y: &[C64], h: f64, k: &[Vec<C64>], a: &[f64]) {
    out.copy_from_slice(y);
    for (j, &aj) in a.iter().enumerate() {
        if aj == 0.0 {
            continue;
        }
        let c = h * aj;
        for (o, kv) in out.iter_mut().zip(&k[j]) {
            *o += c * kv;
        }
    }
}

fn initial_step(y: &[C64], f0: &[C64], ctrl: &StepControl, span: f64) -> f64 {
    let n = y.len().max(1) as f64;
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (yi, fi) in y.iter().zip(f0) {
        let sc = ctrl.atol + ctrl.rtol * yi.norm();
        d0 += (yi.norm() / sc).powi(2);
        d1 += (fi.norm() / sc).powi(2);
    }
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span).max(1e-12 * span)
}
