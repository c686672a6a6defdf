//! Fixed-point mastery values and exact rational scores.
//!
//! Mastery lives on a 0..=10 scale stored in units of 1e-4, so the full range
//! is `0..=100_000`. Keeping it integral makes every update bit-exact on any
//! platform; the only rounding step is [`round_half_even`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Units per whole mastery point.
pub const UNITS_PER_POINT: u32 = 10_000;

/// A mastery value in units of 1e-4 of a point, always within `0..=100_000`.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(try_from = "u32", into = "u32")]
pub struct Mastery(u32);

impl Mastery {
    pub const ZERO: Mastery = Mastery(0);
    pub const MAX: Mastery = Mastery(100_000);

    pub fn new(units: u32) -> Result<Self> {
        if units > Self::MAX.0 {
            return Err(Error::OutOfRange(format!(
                "mastery {units} exceeds {}",
                Self::MAX.0
            )));
        }
        Ok(Mastery(units))
    }

    /// Clamps into range instead of failing.
    pub fn saturating(units: u64) -> Self {
        Mastery(units.min(u64::from(Self::MAX.0)) as u32)
    }

    pub fn units(self) -> u32 {
        self.0
    }

    pub fn is_max(self) -> bool {
        self == Self::MAX
    }

    pub fn saturating_sub(self, units: u32) -> Self {
        Mastery(self.0.saturating_sub(units))
    }

    /// Mastery points as a float, for display and reporting only.
    pub fn as_points(self) -> f64 {
        f64::from(self.0) / f64::from(UNITS_PER_POINT)
    }

    /// Converts a point value such as `7.5` to units, rounding half to even.
    pub fn from_points(points: f64) -> Result<Self> {
        if !points.is_finite() || !(0.0..=10.0).contains(&points) {
            return Err(Error::OutOfRange(format!("{points} mastery points")));
        }
        let scaled = points * f64::from(UNITS_PER_POINT);
        Mastery::new(scaled.round_ties_even() as u32)
    }
}

impl TryFrom<u32> for Mastery {
    type Error = Error;

    fn try_from(units: u32) -> Result<Self> {
        Mastery::new(units)
    }
}

impl From<Mastery> for u32 {
    fn from(m: Mastery) -> u32 {
        m.0
    }
}

/// Renders as `8.3333`, four decimals, no float formatting involved.
impl fmt::Display for Mastery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{:04}",
            self.0 / UNITS_PER_POINT,
            self.0 % UNITS_PER_POINT
        )
    }
}

/// A session score kept as the exact ratio `correct / total`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Score {
    correct: u32,
    total: u32,
}

impl Score {
    pub fn new(correct: u32, total: u32) -> Result<Self> {
        if total == 0 {
            return Err(Error::OutOfRange("score with zero items".into()));
        }
        if correct > total {
            return Err(Error::OutOfRange(format!(
                "score {correct}/{total} exceeds 1"
            )));
        }
        Ok(Score { correct, total })
    }

    pub fn perfect() -> Self {
        Score { correct: 1, total: 1 }
    }

    pub fn zero() -> Self {
        Score { correct: 0, total: 1 }
    }

    pub fn from_outcomes(outcomes: &[bool]) -> Result<Self> {
        let correct = outcomes.iter().filter(|&&ok| ok).count();
        Score::new(correct as u32, outcomes.len() as u32)
    }

    pub fn correct(self) -> u32 {
        self.correct
    }

    pub fn total(self) -> u32 {
        self.total
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.correct) / f64::from(self.total)
    }
}

/// `num / den` rounded to nearest, ties to even.
pub fn round_half_even(num: u128, den: u128) -> u128 {
    assert!(den > 0, "division by zero");
    let q = num / den;
    let r = num % den;
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    }
}
