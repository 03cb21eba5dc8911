//! Integer-microsecond simulation clock.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

/// A simulation instant (or span) in whole microseconds.
///
/// Every quantity the simulator schedules with — slot times, frame
/// airtimes, CBR intervals, mobility pauses — is an exact multiple of one
/// microsecond, so integer ticks keep equal-time comparisons exact and
/// replay byte-stable. Fractional values coming from configuration are
/// rounded once, at the boundary.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(u64);

pub const TICKS_PER_SEC: u64 = 1_000_000;

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * TICKS_PER_SEC)
    }

    /// Rounds to the nearest tick.
    pub fn from_secs_f64(s: f64) -> Self {
        assert!(s >= 0.0 && s.is_finite(), "time must be finite and nonnegative");
        SimTime((s * TICKS_PER_SEC as f64).round() as u64)
    }

    /// Rounds up, so a span never undershoots the real-valued duration.
    pub fn from_secs_f64_ceil(s: f64) -> Self {
        assert!(s >= 0.0 && s.is_finite(), "time must be finite and nonnegative");
        SimTime((s * TICKS_PER_SEC as f64).ceil() as u64)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / TICKS_PER_SEC as f64
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }

    pub fn min(self, other: SimTime) -> SimTime {
        SimTime(self.0.min(other.0))
    }

    pub fn max(self, other: SimTime) -> SimTime {
        SimTime(self.0.max(other.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Debug for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}s", self.as_secs_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_are_exact_for_protocol_constants() {
        // 544-byte frame at 2 Mbps and the 1 s CBR interval must be exact.
        assert_eq!(SimTime::from_micros(2_176).as_micros(), 2_176);
        assert_eq!(SimTime::from_secs(1).as_micros(), 1_000_000);
        assert_eq!(SimTime::from_secs_f64(2.176e-3).as_micros(), 2_176);
    }

    #[test]
    fn ceil_rounding_never_undershoots() {
        let t = SimTime::from_secs_f64_ceil(0.1 / 0.15);
        assert_eq!(t.as_micros(), 666_667);
    }

    #[test]
    fn ordering_and_arithmetic() {
        let a = SimTime::from_micros(10);
        let b = SimTime::from_micros(25);
        assert!(a < b);
        assert_eq!(b - a, SimTime::from_micros(15));
        assert_eq!(a + b, SimTime::from_micros(35));
        assert_eq!(a.saturating_sub(b), SimTime::ZERO);
    }
}
