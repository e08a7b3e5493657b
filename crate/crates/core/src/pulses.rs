//! Coupling envelopes for the counter-intuitive sweep and the mixing-angle
//! quantities derived from them.
//!
//! In the measurement direction the laser coupling `gamma_A` starts at its
//! peak and the cavity coupling `gamma_B` starts at zero; the addition
//! direction is the exact time reverse.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::golden_section_min;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Laser first: `|g', n> -> |g, n-1>`.
    Measurement,
    /// Cavity first: `|g, n> -> |g', n+1>`.
    Addition,
}

impl Direction {
    pub fn reversed(self) -> Self {
        match self {
            Direction::Measurement => Direction::Addition,
            Direction::Addition => Direction::Measurement,
        }
    }
}

/// Envelope family, written for the measurement direction on `s = t/T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope {
    /// `gamma_A ∝ cos²(πs/2)`, `gamma_B ∝ sin²(πs/2)` over the whole window.
    CosSin,
    /// Laser ramps on, cavity ramps on, laser ramps off, cavity ramps off.
    /// The overlapped cos²/sin² crossing occupies a fraction `crossing`
    /// of the window; `crossing = 1` reduces to [`Envelope::CosSin`].
    FourPhase { crossing: f64 },
}

impl Default for Envelope {
    fn default() -> Self {
        Envelope::CosSin
    }
}

impl Envelope {
    /// `(f_A, f_B, df_A/ds, df_B/ds)` for the measurement direction.
    fn eval(&self, s: f64) -> (f64, f64, f64, f64) {
        match *self {
            Envelope::CosSin => crossing(s),
            Envelope::FourPhase { crossing: c } => {
                let r = (1.0 - c) / 2.0;
                if s < r {
                    let x = FRAC_PI_2 * s / r;
                    (x.sin().powi(2), 0.0, FRAC_PI_2 / r * (2.0 * x).sin(), 0.0)
                } else if s > 1.0 - r {
                    let x = FRAC_PI_2 * (s - (1.0 - r)) / r;
                    (0.0, x.cos().powi(2), 0.0, -FRAC_PI_2 / r * (2.0 * x).sin())
                } else {
                    let (a, b, da, db) = crossing((s - r) / c);
                    (a, b, da / c, db / c)
                }
            }
        }
    }
}

fn crossing(u: f64) -> (f64, f64, f64, f64) {
    let x = FRAC_PI_2 * u;
    let d = FRAC_PI_2 * (2.0 * x).sin();
    (x.cos().powi(2), x.sin().powi(2), -d, d)
}

/// Time-parameterized coupling pair over `[0, duration]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSchedule {
    /// Sweep time `T` in units of `1/g`.
    pub duration: f64,
    /// Peak laser coupling (default `2g`).
    #[serde(default = "default_ga")]
    pub ga_max: f64,
    /// Peak cavity coupling (default `g`).
    #[serde(default = "default_gb")]
    pub gb_max: f64,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    #[serde(default)]
    pub envelope: Envelope,
}

fn default_ga() -> f64 {
    2.0
}
fn default_gb() -> f64 {
    1.0
}
fn default_direction() -> Direction {
    Direction::Measurement
}

impl PulseSchedule {
    /// Measurement-direction cos²/sin² schedule with the 2:1 amplitude ratio.
    pub fn new(duration: f64) -> Self {
        Self {
            duration,
            ga_max: 2.0,
            gb_max: 1.0,
            direction: Direction::Measurement,
            envelope: Envelope::CosSin,
        }
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn with_amplitudes(mut self, ga_max: f64, gb_max: f64) -> Self {
        self.ga_max = ga_max;
        self.gb_max = gb_max;
        self
    }

    pub fn with_envelope(mut self, envelope: Envelope) -> Self {
        self.envelope = envelope;
        self
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    pub fn reversed(&self) -> Self {
        self.clone().with_direction(self.direction.reversed())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(Error::InvalidParameter(format!("duration {} must be >= 0", self.duration)));
        }
        if !(self.ga_max >= 0.0 && self.gb_max >= 0.0 && self.ga_max.is_finite() && self.gb_max.is_finite()) {
            return Err(Error::InvalidParameter("peak couplings must be finite and >= 0".into()));
        }
        if let Envelope::FourPhase { crossing } = self.envelope {
            if !(crossing > 0.0 && crossing <= 1.0) {
                return Err(Error::InvalidParameter(format!("crossing {crossing} not in (0, 1]")));
            }
        }
        Ok(())
    }

    /// Fraction of the measurement-direction sweep at time `t`.
    fn phase(&self, t: f64) -> f64 {
        if self.duration == 0.0 {
            return 0.0;
        }
        let s = (t / self.duration).clamp(0.0, 1.0);
        match self.direction {
            Direction::Measurement => s,
            Direction::Addition => 1.0 - s,
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.duration.max(1.0);
        if !(t >= -slack && t <= self.duration + slack) {
            return Err(Error::TimeOutOfRange { t, duration: self.duration });
        }
        Ok(())
    }

    /// `(gamma_A(t), gamma_B(t))`.
    pub fn couplings(&self, t: f64) -> Result<(f64, f64)> {
        self.check_time(t)?;
        Ok(self.couplings_clamped(t))
    }

    /// Same as [`couplings`](Self::couplings) with `t` clamped to the window.
    pub fn couplings_clamped(&self, t: f64) -> (f64, f64) {
        let (a, b, _, _) = self.envelope.eval(self.phase(t));
        (self.ga_max * a, self.gb_max * b)
    }

    pub fn gamma_a(&self, t: f64) -> Result<f64> {
        Ok(self.couplings(t)?.0)
    }

    pub fn gamma_b(&self, t: f64) -> Result<f64> {
        Ok(self.couplings(t)?.1)
    }

    /// `(d gamma_A/dt, d gamma_B/dt)`.
    pub fn coupling_rates(&self, t: f64) -> (f64, f64) {
        if self.duration == 0.0 {
            return (0.0, 0.0);
        }
        let (_, _, da, db) = self.envelope.eval(self.phase(t));
        let sign = match self.direction {
            Direction::Measurement => 1.0,
            Direction::Addition => -1.0,
        };
        let k = sign / self.duration;
        (self.ga_max * da * k, self.gb_max * db * k)
    }

    pub fn mixing(&self, n: usize) -> MixingAngleProfile<'_> {
        MixingAngleProfile { n, schedule: self }
    }
}

/// Mixing angle `theta(t) = atan(sqrt(n) gamma_B / gamma_A)` and effective
/// Rabi frequency `nu(t) = sqrt(gamma_A² + n gamma_B²)` of photon sector `n`.
#[derive(Clone, Copy, Debug)]
pub struct MixingAngleProfile<'a> {
    pub n: usize,
    pub schedule: &'a PulseSchedule,
}

impl MixingAngleProfile<'_> {
    pub fn theta(&self, t: f64) -> f64 {
        let (a, b) = self.schedule.couplings_clamped(t);
        let sb = (self.n as f64).sqrt() * b;
        if a == 0.0 && sb == 0.0 {
            // both couplings off: continue the dark-state branch
            return if self.schedule.phase(t) < 0.5 { 0.0 } else { FRAC_PI_2 };
        }
        sb.atan2(a)
    }

    pub fn nu(&self, t: f64) -> f64 {
        let (a, b) = self.schedule.couplings_clamped(t);
        (a * a + self.n as f64 * b * b).sqrt()
    }

    pub fn theta_dot(&self, t: f64) -> f64 {
        let (a, b) = self.schedule.couplings_clamped(t);
        let (da, db) = self.schedule.coupling_rates(t);
        let n = self.n as f64;
        let den = a * a + n * b * b;
        if den == 0.0 {
            return 0.0;
        }
        n.sqrt() * (a * db - b * da) / den
    }
}

/// `theta(t)` for photon sector `n` (`n >= 1`).
pub fn theta(t: f64, n: usize, schedule: &PulseSchedule) -> Result<f64> {
    check_sector(n)?;
    schedule.check_time(t)?;
    Ok(schedule.mixing(n).theta(t))
}

pub fn nu(t: f64, n: usize, schedule: &PulseSchedule) -> Result<f64> {
    check_sector(n)?;
    schedule.check_time(t)?;
    Ok(schedule.mixing(n).nu(t))
}

fn check_sector(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("photon sector n must be >= 1".into()));
    }
    Ok(())
}

/// Smallest modulus of the lower nonzero triplet eigenvalue over the sweep,
/// `min_t sqrt((Δ/2)² + gamma_A² + n gamma_B²) − Δ/2`, by dense sampling
/// followed by golden-section refinement around the best sample.
pub fn nu_0(n: usize, delta: f64, schedule: &PulseSchedule) -> Result<f64> {
    check_sector(n)?;
    schedule.validate()?;
    let h = delta / 2.0;
    let gap = |t: f64| {
        let (a, b) = schedule.couplings_clamped(t);
        (h * h + a * a + n as f64 * b * b).sqrt() - h.abs()
    };
    let t_end = schedule.duration;
    if t_end == 0.0 {
        return Ok(gap(0.0));
    }
    const SAMPLES: usize = 2000;
    let (mut best_i, mut best) = (0, f64::INFINITY);
    for i in 0..=SAMPLES {
        let v = gap(t_end * i as f64 / SAMPLES as f64);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let lo = t_end * best_i.saturating_sub(1) as f64 / SAMPLES as f64;
    let hi = t_end * (best_i + 1).min(SAMPLES) as f64 / SAMPLES as f64;
    let (_, refined, _) = golden_section_min(gap, lo, hi, 1e-12 * t_end, 200);
    Ok(best.min(refined))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn endpoint_and_midpoint_values() {
        let s = PulseSchedule::new(10.0);
        assert_eq!(s.couplings(0.0).unwrap(), (2.0, 0.0));
        let (a, b) = s.couplings(10.0).unwrap();
        assert!(a.abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
        let (a, b) = s.couplings(5.0).unwrap();
        assert!((a - 1.0).abs() < 1e-15 && (b - 0.5).abs() < 1e-15);
        assert!(matches!(s.couplings(10.5), Err(Error::TimeOutOfRange { .. })));
        assert!(s.couplings(-0.1).is_err());
    }

    #[test]
    fn theta_and_nu() {
        let s = PulseSchedule::new(10.0);
        assert_eq!(theta(0.0, 1, &s).unwrap(), 0.0);
        assert!((theta(10.0, 1, &s).unwrap() - FRAC_PI_2).abs() < 1e-15);
        // equal couplings -> pi/4
        let eq = PulseSchedule::new(10.0).with_amplitudes(1.0, 1.0);
        assert!((theta(5.0, 1, &eq).unwrap() - PI / 4.0).abs() < 1e-15);
        assert!((nu(5.0, 1, &s).unwrap() - 1.25f64.sqrt()).abs() < 1e-14);
        assert!(theta(1.0, 0, &s).is_err());
    }

    #[test]
    fn theta_monotone() {
        let s = PulseSchedule::new(7.0);
        for n in 1..6 {
            let m = s.mixing(n);
            let mut prev = m.theta(0.0);
            for i in 1..=700 {
                let th = m.theta(7.0 * i as f64 / 700.0);
                assert!(th >= prev - 1e-15);
                prev = th;
            }
        }
    }

    #[test]
    fn theta_dot_matches_finite_difference_and_vanishes_at_ends() {
        for env in [Envelope::CosSin, Envelope::FourPhase { crossing: 0.5 }] {
            for dir in [Direction::Measurement, Direction::Addition] {
                let s = PulseSchedule::new(20.0).with_envelope(env).with_direction(dir);
                let m = s.mixing(2);
                for i in 1..40 {
                    let t = 20.0 * i as f64 / 40.0 + 0.013;
                    let h = 1e-5;
                    let fd = (m.theta(t + h) - m.theta(t - h)) / (2.0 * h);
                    assert!((fd - m.theta_dot(t)).abs() < 1e-7, "{env:?} {dir:?} t={t}");
                }
                let h = 1e-6;
                let fd0 = (m.theta(h) - m.theta(0.0)) / h;
                let fd1 = (m.theta(20.0) - m.theta(20.0 - h)) / h;
                assert!(fd0.abs() < 1e-6 && fd1.abs() < 1e-6);
                assert!(m.theta_dot(0.0).abs() < 1e-12 && m.theta_dot(20.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn time_reversal() {
        let m = PulseSchedule::new(13.0);
        let a = m.reversed();
        for i in 0..=50 {
            let t = 13.0 * i as f64 / 50.0;
            let (x, y) = a.couplings(t).unwrap();
            let (u, v) = m.couplings(13.0 - t).unwrap();
            assert!((x - u).abs() < 1e-14 && (y - v).abs() < 1e-14);
            let (dx, dy) = a.coupling_rates(t);
            let (du, dv) = m.coupling_rates(13.0 - t);
            assert!((dx + du).abs() < 1e-14 && (dy + dv).abs() < 1e-14);
        }
    }

    #[test]
    fn four_phase_is_continuous_and_degenerates_to_cos_sin() {
        let s = PulseSchedule::new(1.0).with_envelope(Envelope::FourPhase { crossing: 0.5 });
        let mut prev = s.couplings(0.0).unwrap();
        assert_eq!(prev, (0.0, 0.0));
        for i in 1..=4000 {
            let c = s.couplings(i as f64 / 4000.0).unwrap();
            assert!((c.0 - prev.0).abs() < 4e-3 && (c.1 - prev.1).abs() < 4e-3);
            prev = c;
        }
        let full = PulseSchedule::new(3.0).with_envelope(Envelope::FourPhase { crossing: 1.0 });
        let plain = PulseSchedule::new(3.0);
        for i in 0..=30 {
            let t = i as f64 / 10.0;
            assert_eq!(full.couplings(t).unwrap(), plain.couplings(t).unwrap());
        }
    }

    #[test]
    fn nu0_values() {
        let s = PulseSchedule::new(10.0);
        // Δ = 0: min of sqrt(4cos⁴x + sin⁴x) = sqrt(0.8)
        let v = nu_0(1, 0.0, &s).unwrap();
        assert!((v - 0.8f64.sqrt()).abs() < 1e-10, "{v}");
        // Δ = 0 reduces to min nu
        let brute = (0..=100_000)
            .map(|i| s.mixing(3).nu(10.0 * i as f64 / 100_000.0))
            .fold(f64::INFINITY, f64::min);
        assert!((nu_0(3, 0.0, &s).unwrap() - brute).abs() < 1e-8);
        let mut prev = 0.0;
        for n in 1..10 {
            let v = nu_0(n, 0.5, &s).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn nu_not_below_nu0() {
        let s = PulseSchedule::new(4.0);
        let v0 = nu_0(1, 0.0, &s).unwrap();
        for i in 1..400 {
            assert!(s.mixing(1).nu(4.0 * i as f64 / 400.0) >= v0 - 1e-12);
        }
    }
}
