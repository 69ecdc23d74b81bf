//! Exact decimal money.
//!
//! Amounts are stored as signed 64-bit counts of micro-units (10⁻⁶), so bid
//! sums and welfare comparisons are exact and ties are detected without any
//! tolerance. Conversion to `f64` is exact for magnitudes below 2⁵³ micro-units.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Number of decimal places carried by [`Money`].
pub const DECIMALS: u32 = 6;
/// Micro-units per whole unit.
pub const SCALE: i64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_raw(micros: i64) -> Self {
        Money(micros)
    }

    pub const fn raw(self) -> i64 {
        self.0
    }

    pub const fn from_int(units: i64) -> Self {
        Money(units * SCALE)
    }

    /// Rounds to the nearest micro-unit.
    pub fn from_f64(x: f64) -> Self {
        Money((x * SCALE as f64).round() as i64)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }

    /// The raw micro-unit count as an `f64`; exact and order-preserving, used
    /// where integer-valued floating weights are needed.
    pub fn raw_f64(self) -> f64 {
        self.0 as f64
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn abs(self) -> Self {
        Money(self.0.abs())
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Mul<i64> for Money {
    type Output = Money;
    fn mul(self, rhs: i64) -> Money {
        Money(self.0 * rhs)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, |a, b| a + b)
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, |a, b| a + *b)
    }
}

impl fmt::Display for Money {
    /// Canonical form: no trailing fractional zeros, no trailing dot.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let whole = abs / SCALE as u64;
        let frac = abs % SCALE as u64;
        if frac == 0 {
            write!(f, "{sign}{whole}")
        } else {
            let digits = format!("{:0width$}", frac, width = DECIMALS as usize);
            write!(f, "{sign}{whole}.{}", digits.trim_end_matches('0'))
        }
    }
}

impl FromStr for Money {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::invalid(format!("not a decimal amount: {s:?}"));
        let t = s.trim();
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (whole, frac) = match body.split_once('.') {
            Some((w, f)) => (w, f),
            None => (body, ""),
        };
        if whole.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !whole.bytes().all(|c| c.is_ascii_digit()) || !frac.bytes().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        if frac.len() > DECIMALS as usize {
            return Err(Error::invalid(format!(
                "amount {s:?} has more than {DECIMALS} decimal places"
            )));
        }
        let whole_v: i64 = if whole.is_empty() {
            0
        } else {
            whole.parse().map_err(|_| bad())?
        };
        let mut frac_v: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        for _ in frac.len()..DECIMALS as usize {
            frac_v *= 10;
        }
        let raw = whole_v
            .checked_mul(SCALE)
            .and_then(|w| w.checked_add(frac_v))
            .ok_or_else(|| Error::invalid(format!("amount {s:?} out of range")))?;
        Ok(Money(if neg { -raw } else { raw }))
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_and_display() {
        let m: Money = "8".parse().unwrap();
        assert_eq!(m, Money::from_int(8));
        assert_eq!("0.5".parse::<Money>().unwrap().raw(), 500_000);
        assert_eq!("-1.25".parse::<Money>().unwrap().to_string(), "-1.25");
        assert_eq!(".5".parse::<Money>().unwrap().to_string(), "0.5");
        assert_eq!(Money::from_raw(1).to_string(), "0.000001");
        assert!("1.0000001".parse::<Money>().is_err());
        assert!("abc".parse::<Money>().is_err());
        assert!("".parse::<Money>().is_err());
        assert!(".".parse::<Money>().is_err());
    }

    #[test]
    fn exact_tie_arithmetic() {
        // 1 - 3*0.2 + 3*1.2 == 4 with no rounding
        let d: Money = "0.2".parse().unwrap();
        let one = Money::from_int(1);
        let total = (one - d * 3) + (one + d) * 3;
        assert_eq!(total, Money::from_int(4));
    }

    proptest! {
        #[test]
        fn display_round_trips(raw in -1_000_000_000_000i64..1_000_000_000_000i64) {
            let m = Money::from_raw(raw);
            let back: Money = m.to_string().parse().unwrap();
            prop_assert_eq!(back, m);
            let json = serde_json::to_string(&m).unwrap();
            let back: Money = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
