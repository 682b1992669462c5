//! Exact decimal amounts.
//!
//! Monetary amounts are parsed from and rendered back to decimal strings
//! without going through floating point, so evidence files round-trip
//! byte-for-byte and aggregation is exact. A value is `units / 10^scale`
//! with the scale preserved from the input ("10.50" stays "10.50").

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

/// Fractional digits are capped; 12 matches the fixed-point width used
/// everywhere else in the state files.
pub const MAX_SCALE: u32 = 12;

/// Magnitude cap: |value| < 10^24. Keeps every internal alignment and a
/// long run of additions inside i128.
const MAX_ALIGNED_UNITS: i128 = 1_000_000_000_000_000_000_000_000_000_000_000_000; // 10^36

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecimalError {
    #[error("empty decimal string")]
    Empty,
    #[error("malformed decimal {0:?}")]
    Malformed(String),
    #[error("too many fractional digits in {0:?} (max {MAX_SCALE})")]
    TooManyFracDigits(String),
    #[error("decimal magnitude out of range: {0:?}")]
    OutOfRange(String),
    #[error("decimal overflow")]
    Overflow,
}

/// Exact decimal number: `units / 10^scale`, scale <= [`MAX_SCALE`].
///
/// Display keeps the parsed fractional width. Equality and ordering are
/// numeric, so `10.0 == 10.00` even though they render differently.
#[derive(Debug, Clone, Copy)]
pub struct Decimal {
    units: i128,
    scale: u32,
}

impl Decimal {
    pub const ZERO: Decimal = Decimal { units: 0, scale: 0 };

    pub fn from_units(units: i128, scale: u32) -> Result<Self, DecimalError> {
        if scale > MAX_SCALE {
            return Err(DecimalError::TooManyFracDigits(format!("{units}e-{scale}")));
        }
        let d = Decimal { units, scale };
        if d.aligned_units().is_none() {
            return Err(DecimalError::OutOfRange(format!("{units}e-{scale}")));
        }
        Ok(d)
    }

    pub fn is_negative(&self) -> bool {
        self.units < 0
    }

    pub fn is_zero(&self) -> bool {
        self.units == 0
    }

    /// Integer units at [`Self::scale`] fractional digits.
    pub fn units(&self) -> i128 {
        self.units
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    /// Units scaled to MAX_SCALE fractional digits. None if the value is
    /// out of range (only possible for values rejected at construction).
    fn aligned_units(&self) -> Option<i128> {
        let factor = 10i128.checked_pow(MAX_SCALE - self.scale)?;
        let aligned = self.units.checked_mul(factor)?;
        if aligned.abs() >= MAX_ALIGNED_UNITS {
            None
        } else {
            Some(aligned)
        }
    }

    pub fn checked_add(&self, other: &Decimal) -> Result<Decimal, DecimalError> {
        let scale = self.scale.max(other.scale);
        let a = self
            .units
            .checked_mul(10i128.pow(scale - self.scale))
            .ok_or(DecimalError::Overflow)?;
        let b = other
            .units
            .checked_mul(10i128.pow(scale - other.scale))
            .ok_or(DecimalError::Overflow)?;
        let units = a.checked_add(b).ok_or(DecimalError::Overflow)?;
        Decimal::from_units(units, scale).map_err(|_| DecimalError::Overflow)
    }

    /// Lossy conversion for weighting math. Exact for values whose units
    /// fit in 53 bits.
    pub fn to_f64(&self) -> f64 {
        self.units as f64 / 10f64.powi(self.scale as i32)
    }
}

impl FromStr for Decimal {
    type Err = DecimalError;

    /// Accepts `-?digits(.digits)?`. No exponent, no '+', no lone dot,
    /// no empty integer or fraction part.
    fn from_str(s: &str) -> Result<Self, DecimalError> {
        if s.is_empty() {
            return Err(DecimalError::Empty);
        }
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() || (body.contains('.') && frac_part.is_empty()) {
            return Err(DecimalError::Malformed(s.to_string()));
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(DecimalError::Malformed(s.to_string()));
        }
        if frac_part.len() as u32 > MAX_SCALE {
            return Err(DecimalError::TooManyFracDigits(s.to_string()));
        }
        let mut units: i128 = 0;
        for b in int_part.bytes().chain(frac_part.bytes()) {
            units = units
                .checked_mul(10)
                .and_then(|u| u.checked_add((b - b'0') as i128))
                .ok_or_else(|| DecimalError::OutOfRange(s.to_string()))?;
        }
        if neg {
            units = -units;
        }
        Decimal::from_units(units, frac_part.len() as u32)
            .map_err(|_| DecimalError::OutOfRange(s.to_string()))
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.units < 0 { "-" } else { "" };
        let abs = self.units.unsigned_abs();
        if self.scale == 0 {
            return write!(f, "{sign}{abs}");
        }
        let pow = 10u128.pow(self.scale);
        let int = abs / pow;
        let frac = abs % pow;
        write!(
            f,
            "{sign}{int}.{frac:0>width$}",
            width = self.scale as usize
        )
    }
}

impl PartialEq for Decimal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Decimal {}

impl PartialOrd for Decimal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Decimal {
    fn cmp(&self, other: &Self) -> Ordering {
        // Alignment cannot overflow: construction bounds |aligned| < 10^36.
        let a = self.aligned_units().expect("decimal in range");
        let b = other.aligned_units().expect("decimal in range");
        a.cmp(&b)
    }
}
