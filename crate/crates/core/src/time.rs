//! Fixed-point simulated time.

use core::fmt;
use core::ops::{Add, Sub};

/// Ticks per unit of simulated time.
pub const TICKS_PER_UNIT: u64 = 1 << 20;

/// A point in simulated time, in ticks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const UNIT: SimTime = SimTime(TICKS_PER_UNIT);

    pub fn from_units(u: u64) -> Self {
        SimTime(u * TICKS_PER_UNIT)
    }

    /// Nearest tick to `x` units. Negative or NaN inputs map to zero.
    pub fn from_f64(x: f64) -> Self {
        if !(x > 0.0) {
            return SimTime::ZERO;
        }
        SimTime(libm::round(x * TICKS_PER_UNIT as f64) as u64)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / TICKS_PER_UNIT as f64
    }

    pub fn ticks(self) -> u64 {
        self.0
    }

    pub fn saturating_sub(self, o: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(o.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, o: SimTime) -> SimTime {
        SimTime(self.0 + o.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, o: SimTime) -> SimTime {
        SimTime(self.0 - o.0)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Prints as a reduced rational, e.g. `3/4` or `17`.
impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = gcd(self.0, TICKS_PER_UNIT);
        let (num, den) = if g == 0 { (0, 1) } else { (self.0 / g, TICKS_PER_UNIT / g) };
        if den == 1 {
            write!(f, "{num}")
        } else {
            write!(f, "{num}/{den}")
        }
    }
}

impl core::str::FromStr for SimTime {
    type Err = ();

    /// Parses the `num` or `num/den` form produced by `Display`.
    fn from_str(s: &str) -> Result<Self, ()> {
        let (num, den) = match s.split_once('/') {
            Some((a, b)) => (a.parse::<u64>().map_err(|_| ())?, b.parse::<u64>().map_err(|_| ())?),
            None => (s.parse::<u64>().map_err(|_| ())?, 1),
        };
        if den == 0 || TICKS_PER_UNIT % den != 0 {
            return Err(());
        }
        num.checked_mul(TICKS_PER_UNIT / den).map(SimTime).ok_or(())
    }
}

/// A message delay. Valid delays lie in `(0, 1]` units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Delay(pub u64);

impl Delay {
    pub const MAX: Delay = Delay(TICKS_PER_UNIT);

    pub fn from_f64(x: f64) -> Self {
        Delay(SimTime::from_f64(x).0)
    }

    pub fn is_valid(self) -> bool {
        self.0 > 0 && self.0 <= TICKS_PER_UNIT
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn display_round_trips(t in 0u64..u64::MAX / 2) {
            let s = SimTime(t).to_string();
            prop_assert_eq!(s.parse::<SimTime>(), Ok(SimTime(t)));
        }
    }

    #[test]
    fn parse_rejects_foreign_denominators() {
        assert!("1/3".parse::<SimTime>().is_err());
        assert!("x".parse::<SimTime>().is_err());
        assert_eq!("3/4".parse::<SimTime>(), Ok(SimTime::from_f64(0.75)));
    }

    #[test]
    fn display_reduces() {
        assert_eq!(SimTime::from_units(17).to_string(), "17");
        assert_eq!(SimTime(3 * TICKS_PER_UNIT / 4).to_string(), "3/4");
        assert_eq!(SimTime(0).to_string(), "0");
        assert_eq!(SimTime(1).to_string(), "1/1048576");
    }

    #[test]
    fn delay_bounds() {
        assert!(!Delay(0).is_valid());
        assert!(Delay(1).is_valid());
        assert!(Delay::MAX.is_valid());
        assert!(!Delay(TICKS_PER_UNIT + 1).is_valid());
        assert_eq!(Delay::from_f64(0.5).0, TICKS_PER_UNIT / 2);
    }
}
