//! Exact rational time in quarter-note units.
//!
//! Every onset, duration and off-beat in the pipeline is a [`RationalTime`];
//! no time value ever passes through floating point, so phrase lengths and
//! bar positions stay exact under arbitrary + / - / mod-1 arithmetic.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub, SubAssign};
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{Signed, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

/// The quantization grid: 1/24 of a quarter note covers both 32nd notes
/// (1/8 quarter) and 16th triplets (1/6 quarter).
pub const GRID_DENOMINATOR: i64 = 24;

/// An exact fraction of a quarter note, always in canonical reduced form
/// with a positive denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RationalTime(Rational64);

impl RationalTime {
    pub fn new(numerator: i64, denominator: i64) -> Self {
        assert!(denominator != 0, "RationalTime denominator must be nonzero");
        RationalTime(Rational64::new(numerator, denominator))
    }

    pub const fn zero() -> Self {
        RationalTime(Rational64::new_raw(0, 1))
    }

    pub fn from_int(n: i64) -> Self {
        RationalTime(Rational64::from_integer(n))
    }

    pub fn numerator(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denominator(&self) -> i64 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    /// `self mod 1`: the off-beat, an exact rational in `[0, 1)`.
    pub fn mod_one(&self) -> RationalTime {
        let n = self.numerator().rem_euclid(self.denominator());
        RationalTime::new(n, self.denominator())
    }

    /// Nearest point on the 1/24-quarter grid. Ties round up.
    pub fn quantize_to_grid(&self) -> RationalTime {
        let scaled = self.0 * Rational64::from_integer(GRID_DENOMINATOR);
        let floor = scaled.floor().to_integer();
        let frac = scaled - Rational64::from_integer(floor);
        let rounded = if frac >= Rational64::new(1, 2) { floor + 1 } else { floor };
        RationalTime::new(rounded, GRID_DENOMINATOR)
    }

    pub fn to_f64(&self) -> f64 {
        self.numerator() as f64 / self.denominator() as f64
    }

    /// Tick count at the given resolution; exact when the resolution is a
    /// multiple of the grid denominator.
    pub fn to_ticks(&self, ticks_per_quarter: i64) -> i64 {
        let t = self.0 * Rational64::from_integer(ticks_per_quarter);
        let floor = t.floor().to_integer();
        let frac = t - Rational64::from_integer(floor);
        if frac >= Rational64::new(1, 2) {
            floor + 1
        } else {
            floor
        }
    }
}

impl Add for RationalTime {
    type Output = RationalTime;
    fn add(self, rhs: RationalTime) -> RationalTime {
        RationalTime(self.0 + rhs.0)
    }
}

impl Sub for RationalTime {
    type Output = RationalTime;
    fn sub(self, rhs: RationalTime) -> RationalTime {
        RationalTime(self.0 - rhs.0)
    }
}

impl Mul<i64> for RationalTime {
    type Output = RationalTime;
    fn mul(self, rhs: i64) -> RationalTime {
        RationalTime(self.0 * Rational64::from_integer(rhs))
    }
}

impl AddAssign for RationalTime {
    fn add_assign(&mut self, rhs: RationalTime) {
        self.0 += rhs.0;
    }
}

impl SubAssign for RationalTime {
    fn sub_assign(&mut self, rhs: RationalTime) {
        self.0 -= rhs.0;
    }
}

impl fmt::Display for RationalTime {
    /// Human form: whole numbers print without the denominator.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denominator() == 1 {
            write!(f, "{}", self.numerator())
        } else {
            write!(f, "{}/{}", self.numerator(), self.denominator())
        }
    }
}

impl FromStr for RationalTime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (
                n.parse::<i64>().map_err(|e| e.to_string())?,
                d.parse::<i64>().map_err(|e| e.to_string())?,
            ),
            None => (s.parse::<i64>().map_err(|e| e.to_string())?, 1),
        };
        if d <= 0 {
            return Err(format!("denominator must be positive, got {d}"));
        }
        Ok(RationalTime::new(n, d))
    }
}

/// Canonical wire form is always `"num/den"`, even for whole numbers, so
/// serialized files are byte-stable.
impl Serialize for RationalTime {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format!("{}/{}", self.numerator(), self.denominator()))
    }
}

impl<'de> Deserialize<'de> for RationalTime {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}
