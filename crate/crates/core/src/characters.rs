//! Additive and multiplicative characters with exact rational-angle values.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arith::{gcd, mul_mod};
use crate::field::{FieldElement, FiniteField};

/// The point `e^{2πi num/den}` of the unit circle, with `0 <= num < den`
/// and `gcd(num, den) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RationalAngle {
    num: u64,
    den: u64,
}

impl RationalAngle {
    pub const ZERO: RationalAngle = RationalAngle { num: 0, den: 1 };

    /// Reduces `num/den` into `[0, 1)`. Panics on `den == 0`.
    pub fn new(num: i128, den: u64) -> Self {
        assert!(den > 0, "angle denominator must be positive");
        let n = num.rem_euclid(den as i128) as u64;
        let g = gcd(n, den);
        RationalAngle {
            num: n / g,
            den: den / g,
        }
    }

    /// `num/den` already reduced, e.g. `t/p` with `p` prime and `0 < t < p`.
    pub(crate) fn reduced(num: u64, den: u64) -> Self {
        debug_assert!(num < den);
        RationalAngle { num, den }
    }

    pub fn num(self) -> u64 {
        self.num
    }

    pub fn den(self) -> u64 {
        self.den
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    /// `k` times the angle, mod 1.
    pub fn scale(self, k: i128) -> Self {
        let n = (k.rem_euclid(self.den as i128) as u64) as u128 * self.num as u128;
        RationalAngle::new((n % self.den as u128) as i128, self.den)
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn to_complex(self) -> Complex64 {
        // fold into (-1/2, 1/2] so the argument stays small
        let t = if 2 * self.num > self.den {
            -((self.den - self.num) as f64) / self.den as f64
        } else {
            self.as_f64()
        };
        let (s, c) = (std::f64::consts::TAU * t).sin_cos();
        Complex64::new(c, s)
    }
}

impl Add for RationalAngle {
    type Output = RationalAngle;
    fn add(self, o: RationalAngle) -> RationalAngle {
        let g = gcd(self.den, o.den);
        let l = self.den / g * o.den;
        let n = self.num as u128 * (l / self.den) as u128 + o.num as u128 * (l / o.den) as u128;
        RationalAngle::new((n % l as u128) as i128, l)
    }
}

impl Neg for RationalAngle {
    type Output = RationalAngle;
    fn neg(self) -> RationalAngle {
        RationalAngle::new(-(self.num as i128), self.den)
    }
}

impl Sub for RationalAngle {
    type Output = RationalAngle;
    fn sub(self, o: RationalAngle) -> RationalAngle {
        self + (-o)
    }
}

impl fmt::Display for RationalAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// A value in `S¹ ∪ {0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CharacterValue {
    Zero,
    Angle(RationalAngle),
}

impl CharacterValue {
    pub const ONE: CharacterValue = CharacterValue::Angle(RationalAngle::ZERO);

    pub fn is_zero(self) -> bool {
        matches!(self, CharacterValue::Zero)
    }

    pub fn angle(self) -> Option<RationalAngle> {
        match self {
            CharacterValue::Zero => None,
            CharacterValue::Angle(a) => Some(a),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, o: CharacterValue) -> CharacterValue {
        match (self, o) {
            (CharacterValue::Angle(a), CharacterValue::Angle(b)) => CharacterValue::Angle(a + b),
            _ => CharacterValue::Zero,
        }
    }

    /// Complex conjugate; for unit values this is the inverse.
    pub fn conj(self) -> CharacterValue {
        match self {
            CharacterValue::Zero => CharacterValue::Zero,
            CharacterValue::Angle(a) => CharacterValue::Angle(-a),
        }
    }

    /// Integer power. `Zero^0` is taken to be `Zero`, matching `χ^k(0) = 0`.
    pub fn pow(self, k: i128) -> CharacterValue {
        match self {
            CharacterValue::Zero => CharacterValue::Zero,
            CharacterValue::Angle(a) => CharacterValue::Angle(a.scale(k)),
        }
    }

    pub fn to_complex(self) -> Complex64 {
        match self {
            CharacterValue::Zero => Complex64::new(0.0, 0.0),
            CharacterValue::Angle(a) => a.to_complex(),
        }
    }
}

impl fmt::Display for CharacterValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CharacterValue::Zero => write!(f, "0"),
            CharacterValue::Angle(a) => write!(f, "e({a})"),
        }
    }
}

/// `Ψ_c(x) = exp(2πi Tr(cx)/p)`. `c = 1` is the standard character.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AdditiveCharacter {
    pub twist: FieldElement,
}

impl AdditiveCharacter {
    pub fn standard(field: &FiniteField) -> Self {
        AdditiveCharacter { twist: field.one() }
    }

    pub fn twisted(twist: FieldElement) -> Self {
        AdditiveCharacter { twist }
    }

    pub fn is_trivial(&self) -> bool {
        self.twist.is_zero()
    }
}

/// `χ_k = χ_γ^k`, where `χ_γ(γ) = e^{2πi/(q-1)}` for the field generator `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MultiplicativeCharacter {
    pub index: u64,
}

impl MultiplicativeCharacter {
    pub fn new(field: &FiniteField, index: i128) -> Self {
        let n = field.q() - 1;
        MultiplicativeCharacter {
            index: if n == 0 {
                0
            } else {
                index.rem_euclid(n as i128) as u64
            },
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.index == 0
    }
}

pub fn psi_eval(field: &FiniteField, psi: &AdditiveCharacter, x: FieldElement) -> RationalAngle {
    match field.trace(field.mul(psi.twist, x)) {
        0 => RationalAngle::ZERO,
        t => RationalAngle::reduced(t, field.p()),
    }
}

pub fn chi_eval(field: &FiniteField, chi: &MultiplicativeCharacter, x: FieldElement) -> CharacterValue {
    if x.is_zero() {
        return CharacterValue::Zero;
    }
    let n = field.q() - 1;
    if chi.index == 0 || n == 1 {
        return CharacterValue::ONE;
    }
    let l = field.discrete_log(x).expect("nonzero argument");
    CharacterValue::Angle(RationalAngle::new(mul_mod(chi.index, l, n) as i128, n))
}

pub fn character_order(field: &FiniteField, chi: &MultiplicativeCharacter) -> u64 {
    let n = field.q() - 1;
    n / gcd(chi.index, n)
}
