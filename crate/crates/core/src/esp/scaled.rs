//! Non-negative reals with a separate binary exponent.
//!
//! Symmetric polynomials of exponential weights routinely leave the `f64`
//! range (a product of fifty weights near `e^60` is already `e^3000`), so the
//! dynamic programs carry a mantissa in `[1, 2)` and an `i64` exponent.

use std::ops::{Add, Mul};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    mantissa: f64,
    exp2: i64,
}

const EXP_MASK: u64 = 0x7ff << 52;
/// Terms more than 2^-60 below the larger operand vanish in an `f64` sum.
const ALIGN_LIMIT: i64 = 60;

#[inline]
fn pow2(e: i64) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((1023 + e) as u64) << 52)
}

impl Scaled {
    pub const ZERO: Scaled = Scaled {
        mantissa: 0.0,
        exp2: 0,
    };
    pub const ONE: Scaled = Scaled {
        mantissa: 1.0,
        exp2: 0,
    };

    /// Wraps a finite non-negative float.
    #[inline]
    pub fn from_f64(x: f64) -> Self {
        debug_assert!(x >= 0.0 && x.is_finite());
        if x == 0.0 {
            return Self::ZERO;
        }
        if x < f64::MIN_POSITIVE {
            // Subnormal: lift into the normal range first.
            let s = Self::normalize(x * pow2(600), 0);
            return Scaled {
                mantissa: s.mantissa,
                exp2: s.exp2 - 600,
            };
        }
        Self::normalize(x, 0)
    }

    /// `exp(x)` without overflow for any finite `x`.
    pub fn exp(x: f64) -> Self {
        let t = x * std::f64::consts::LOG2_E;
        let whole = t.floor();
        let frac = (x - whole * std::f64::consts::LN_2).exp();
        Self::normalize(frac, whole as i64)
    }

    #[inline]
    fn normalize(m: f64, e: i64) -> Self {
        if m == 0.0 {
            return Self::ZERO;
        }
        let bits = m.to_bits();
        let biased = ((bits & EXP_MASK) >> 52) as i64;
        Scaled {
            mantissa: f64::from_bits((bits & !EXP_MASK) | (1023u64 << 52)),
            exp2: e + biased - 1023,
        }
    }

    pub fn is_zero(self) -> bool {
        self.mantissa == 0.0
    }

    /// Natural logarithm (`-inf` for zero).
    pub fn ln(self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.mantissa.ln() + self.exp2 as f64 * std::f64::consts::LN_2
    }

    /// Converts back to `f64`, saturating to `inf` or `0`.
    pub fn to_f64(self) -> f64 {
        if self.is_zero() {
            0.0
        } else if self.exp2 > 1023 {
            f64::INFINITY
        } else if self.exp2 < -1074 {
            0.0
        } else if self.exp2 < -1022 {
            self.mantissa * pow2(self.exp2 + 60) * pow2(-60)
        } else {
            self.mantissa * pow2(self.exp2)
        }
    }

    /// `self / other` as a plain float.
    pub fn ratio(self, other: Scaled) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let q = Scaled {
            mantissa: self.mantissa / other.mantissa,
            exp2: self.exp2 - other.exp2,
        };
        Self::normalize(q.mantissa, q.exp2).to_f64()
    }
}

impl Add for Scaled {
    type Output = Scaled;

    #[inline]
    fn add(self, rhs: Scaled) -> Scaled {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (hi, lo) = if self.exp2 >= rhs.exp2 {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let shift = lo.exp2 - hi.exp2;
        if shift < -ALIGN_LIMIT {
            return hi;
        }
        Scaled::normalize(hi.mantissa + lo.mantissa * pow2(shift), hi.exp2)
    }
}

impl Mul for Scaled {
    type Output = Scaled;

    #[inline]
    fn mul(self, rhs: Scaled) -> Scaled {
        if self.is_zero() || rhs.is_zero() {
            return Scaled::ZERO;
        }
        Scaled::normalize(self.mantissa * rhs.mantissa, self.exp2 + rhs.exp2)
    }
}
