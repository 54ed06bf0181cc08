//! Circular arithmetic on phases in `[0, 2π)`.
//!
//! [`Phase`] is the value type every other module trades in. Addition and
//! subtraction are modulo 2π, which makes masking a PSK symbol with a shared
//! channel phase the phase-domain analogue of a one-time pad.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Minimum magnitude of a complex average whose argument is trusted.
pub const MAGNITUDE_FLOOR: f64 = 1e-9;

/// An angle in radians, always in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Phase(f64);

impl Phase {
    pub const ZERO: Phase = Phase(0.0);

    /// Reduces an arbitrary finite angle into `[0, 2π)`.
    pub fn wrap(angle: f64) -> Result<Phase> {
        if !angle.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "cannot wrap non-finite angle {angle}"
            )));
        }
        Ok(Phase::wrap_finite(angle))
    }

    /// Floor-based reduction for values already known to be finite.
    pub(crate) fn wrap_finite(angle: f64) -> Phase {
        debug_assert!(angle.is_finite());
        let mut r = angle - TAU * (angle / TAU).floor();
        // A tiny negative input can round up to exactly 2π.
        if !(0.0..TAU).contains(&r) {
            r = 0.0;
        }
        Phase(r)
    }

    /// Phase of the point `e^{j·2πk/n}`.
    pub fn from_fraction(k: u64, n: u64) -> Phase {
        Phase::wrap_finite(TAU * k as f64 / n as f64)
    }

    /// Argument of a complex number. The origin maps to zero.
    pub fn of_complex(z: Complex64) -> Phase {
        Phase::wrap_finite(z.im.atan2(z.re))
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// Unit phasor `e^{jθ}`.
    pub fn phasor(self) -> Complex64 {
        Complex64::from_polar(1.0, self.0)
    }

    /// Representative of the phase in `(-π, π]`.
    pub fn signed(self) -> f64 {
        if self.0 > PI {
            self.0 - TAU
        } else {
            self.0
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.12}", self.0)
    }
}

impl Add for Phase {
    type Output = Phase;

    fn add(self, rhs: Phase) -> Phase {
        Phase::wrap_finite(self.0 + rhs.0)
    }
}

impl Sub for Phase {
    type Output = Phase;

    fn sub(self, rhs: Phase) -> Phase {
        Phase::wrap_finite(self.0 - rhs.0)
    }
}

impl Neg for Phase {
    type Output = Phase;

    fn neg(self) -> Phase {
        Phase::wrap_finite(-self.0)
    }
}

/// Modulo-2π addition.
pub fn add(a: Phase, b: Phase) -> Phase {
    a + b
}

/// Modulo-2π subtraction.
pub fn sub(a: Phase, b: Phase) -> Phase {
    a - b
}

/// Shortest arc between two phases, in `[0, π]`.
pub fn circular_distance(a: Phase, b: Phase) -> f64 {
    let d = (a.0 - b.0).abs();
    d.min(TAU - d)
}

/// Argument of the arithmetic mean of `samples`.
///
/// Fails with [`Error::DegenerateAverage`] when the mean lies within
/// [`MAGNITUDE_FLOOR`] of the origin.
pub fn complex_mean_phase(samples: &[Complex64]) -> Result<Phase> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples to average".into()));
    }
    let sum: Complex64 = samples.iter().sum();
    let mean = sum / samples.len() as f64;
    let magnitude = mean.norm();
    if magnitude.is_nan() || magnitude <= MAGNITUDE_FLOOR {
        return Err(Error::DegenerateAverage { magnitude });
    }
    Ok(Phase::of_complex(mean))
}

/// Circular mean of a set of phases (argument of the mean phasor).
pub fn circular_mean(phases: &[Phase]) -> Result<Phase> {
    let phasors: Vec<Complex64> = phases.iter().map(|p| p.phasor()).collect();
    complex_mean_phase(&phasors)
}
