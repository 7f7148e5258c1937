//! Real numbers stored as `(sign, ln|x|)`.
//!
//! Products of Gamma functions, powers like `b^(a+n)` and factors such as
//! `exp(-n * ...)` leave the `f64` range at blocklengths of a few hundred.
//! Everything in the bound pipeline is carried in this form and only
//! converted back to a plain float at the output.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    fn of(x: f64) -> Sign {
        if x > 0.0 {
            Sign::Positive
        } else if x < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }

    fn as_f64(self) -> f64 {
        match self {
            Sign::Negative => -1.0,
            Sign::Zero => 0.0,
            Sign::Positive => 1.0,
        }
    }

    fn flip(self) -> Sign {
        match self {
            Sign::Negative => Sign::Positive,
            Sign::Zero => Sign::Zero,
            Sign::Positive => Sign::Negative,
        }
    }
}

impl Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        match (self, rhs) {
            (Sign::Zero, _) | (_, Sign::Zero) => Sign::Zero,
            (a, b) if a == b => Sign::Positive,
            _ => Sign::Negative,
        }
    }
}

/// A real number as sign and natural log of its magnitude.
///
/// `log_abs` is meaningless when `sign == Sign::Zero`; it is kept at
/// `-inf` so that derived comparisons stay consistent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLogValue {
    sign: Sign,
    log_abs: f64,
}

impl SignedLogValue {
    pub const ZERO: SignedLogValue = SignedLogValue {
        sign: Sign::Zero,
        log_abs: f64::NEG_INFINITY,
    };

    pub const ONE: SignedLogValue = SignedLogValue {
        sign: Sign::Positive,
        log_abs: 0.0,
    };

    pub fn new(sign: Sign, log_abs: f64) -> Self {
        if sign == Sign::Zero || log_abs == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            SignedLogValue { sign, log_abs }
        }
    }

    /// Positive number `exp(log_abs)`.
    pub fn from_log(log_abs: f64) -> Self {
        Self::new(Sign::Positive, log_abs)
    }

    pub fn from_f64(x: f64) -> Self {
        Self::new(Sign::of(x), x.abs().ln())
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn log_abs(&self) -> f64 {
        self.log_abs
    }

    pub fn is_zero(&self) -> bool {
        self.sign == Sign::Zero
    }

    pub fn is_positive(&self) -> bool {
        self.sign == Sign::Positive
    }

    /// Natural log of the value; `None` unless the value is positive.
    pub fn ln(&self) -> Option<f64> {
        match self.sign {
            Sign::Positive => Some(self.log_abs),
            _ => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self.sign {
            Sign::Zero => 0.0,
            s => s.as_f64() * self.log_abs.exp(),
        }
    }

    pub fn abs(&self) -> Self {
        match self.sign {
            Sign::Zero => Self::ZERO,
            _ => SignedLogValue {
                sign: Sign::Positive,
                log_abs: self.log_abs,
            },
        }
    }

    pub fn powf(&self, p: f64) -> Self {
        match self.sign {
            Sign::Positive => Self::from_log(self.log_abs * p),
            Sign::Zero if p > 0.0 => Self::ZERO,
            _ => panic!("powf of non-positive SignedLogValue"),
        }
    }

    pub fn recip(&self) -> Self {
        Self::ONE / *self
    }

    pub fn is_finite(&self) -> bool {
        self.sign == Sign::Zero || self.log_abs.is_finite()
    }

    /// Sums a sequence in log domain.
    pub fn sum<I: IntoIterator<Item = SignedLogValue>>(items: I) -> Self {
        items.into_iter().fold(Self::ZERO, |acc, x| acc + x)
    }
}

impl Default for SignedLogValue {
    fn default() -> Self {
        Self::ZERO
    }
}

impl From<f64> for SignedLogValue {
    fn from(x: f64) -> Self {
        Self::from_f64(x)
    }
}

impl fmt::Display for SignedLogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            Sign::Zero => write!(f, "0"),
            Sign::Positive => write!(f, "exp({})", self.log_abs),
            Sign::Negative => write!(f, "-exp({})", self.log_abs),
        }
    }
}

impl Neg for SignedLogValue {
    type Output = Self;
    fn neg(self) -> Self {
        SignedLogValue {
            sign: self.sign.flip(),
            log_abs: self.log_abs,
        }
    }
}

impl Mul for SignedLogValue {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::new(self.sign * rhs.sign, self.log_abs + rhs.log_abs)
    }
}

impl Div for SignedLogValue {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        assert!(!rhs.is_zero(), "division by zero SignedLogValue");
        Self::new(self.sign * rhs.sign, self.log_abs - rhs.log_abs)
    }
}

impl Add for SignedLogValue {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (big, small) = if self.log_abs >= rhs.log_abs {
            (self, rhs)
        } else {
            (rhs, self)
        };
        if big.log_abs == f64::INFINITY {
            return big;
        }
        let d = small.log_abs - big.log_abs;
        if big.sign == small.sign {
            Self::new(big.sign, big.log_abs + d.exp().ln_1p())
        } else {
            // |big| >= |small|; equal magnitudes cancel exactly.
            if d == 0.0 {
                return Self::ZERO;
            }
            Self::new(big.sign, big.log_abs + (-d.exp()).ln_1p())
        }
    }
}

impl Sub for SignedLogValue {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl PartialOrd for SignedLogValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let key = |v: &SignedLogValue| match v.sign {
            Sign::Negative => (0, -v.log_abs),
            Sign::Zero => (1, 0.0),
            Sign::Positive => (2, v.log_abs),
        };
        let (ka, va) = key(self);
        let (kb, vb) = key(other);
        match ka.cmp(&kb) {
            Ordering::Equal => va.partial_cmp(&vb),
            o => Some(o),
        }
    }
}
