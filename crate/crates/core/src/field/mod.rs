//! Finite fields `F_{p^e}`.
//!
//! Elements are stored by their integer encoding `Σ c_i p^i`, where `c_i` is
//! the coefficient of `X^i` in the polynomial representative modulo the
//! field's defining polynomial. For `e = 1` the encoding is the residue.

pub mod poly;
pub mod upoly;

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::Serialize;
use thiserror::Error;

use crate::arith::{self, checked_pow, inv_mod, mul_mod, pow_mod, prime_divisors};

/// Default `q` up to which a full discrete-log table is built.
pub const DEFAULT_DLOG_CAP: u64 = 1 << 22;

/// Largest `q` supported at all; products of encodings stay in `u128`.
pub const MAX_ORDER: u64 = 1 << 44;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("extension degree must be at least 1")]
    ZeroDegree,
    #[error("modulus is not a monic irreducible polynomial of degree {0}")]
    NotIrreducible(u32),
    #[error("field order p^e exceeds the cap {cap}")]
    CapExceeded { cap: u64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("discrete logarithm of zero")]
    ZeroArgument,
    #[error("element encoding {0} out of range")]
    OutOfRange(u64),
}

/// An element of a particular [`FiniteField`], by encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
#[serde(transparent)]
pub struct FieldElement(pub(crate) u64);

impl FieldElement {
    pub fn encoding(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

/// Build options for [`FiniteField`].
#[derive(Debug, Clone)]
pub struct FieldOptions {
    /// User-supplied modulus, coefficients low degree first, length `e + 1`.
    pub modulus: Option<Vec<u64>>,
    /// Build a full discrete-log table when `q` is at most this.
    pub dlog_cap: u64,
    /// Fail with `CapExceeded` instead of falling back to baby-step giant-step.
    pub require_table: bool,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self {
            modulus: None,
            dlog_cap: DEFAULT_DLOG_CAP,
            require_table: false,
        }
    }
}

struct BabySteps {
    m: u64,
    table: HashMap<u64, u64>,
    giant: FieldElement,
}

struct Tables {
    log: Vec<u32>,
    exp: Vec<u32>,
}

pub struct FiniteField {
    p: u64,
    e: u32,
    q: u64,
    modulus: Vec<u64>,
    generator: FieldElement,
    trace_basis: Vec<u64>,
    tables: Option<Tables>,
    bsgs: OnceLock<BabySteps>,
}

impl std::fmt::Debug for FiniteField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiniteField")
            .field("p", &self.p)
            .field("e", &self.e)
            .field("modulus", &self.modulus)
            .field("generator", &self.generator.0)
            .field("dlog_table", &self.tables.is_some())
            .finish()
    }
}

/// Builds `F_{p^e}` with default options.
pub fn make_field(p: u64, e: u32) -> Result<FiniteField, FieldError> {
    FiniteField::new(p, e, FieldOptions::default())
}

impl FiniteField {
    pub fn new(p: u64, e: u32, opts: FieldOptions) -> Result<Self, FieldError> {
        if !arith::is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        if e == 0 {
            return Err(FieldError::ZeroDegree);
        }
        let q = checked_pow(p, e)
            .filter(|&q| q <= MAX_ORDER)
            .ok_or(FieldError::CapExceeded { cap: MAX_ORDER })?;
        let want_table = q <= opts.dlog_cap;
        if opts.require_table && !want_table {
            return Err(FieldError::CapExceeded { cap: opts.dlog_cap });
        }
        let modulus = match opts.modulus {
            Some(m) => {
                let m: Vec<u64> = m.into_iter().map(|c| c % p).collect();
                if m.len() != e as usize + 1 || m[e as usize] != 1 || !poly::is_irreducible(&m, p) {
                    return Err(FieldError::NotIrreducible(e));
                }
                m
            }
            None => smallest_irreducible(p, e),
        };
        let mut field = FiniteField {
            p,
            e,
            q,
            modulus,
            generator: FieldElement(1),
            trace_basis: Vec::new(),
            tables: None,
            bsgs: OnceLock::new(),
        };
        field.trace_basis = (0..e)
            .map(|i| field.trace_by_frobenius(field.monomial(i)))
            .collect();
        field.generator = field.find_generator();
        if want_table {
            field.tables = Some(field.build_tables());
        }
        Ok(field)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn e(&self) -> u32 {
        self.e
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    /// Defining polynomial, low degree first, monic of degree `e`.
    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }

    pub fn generator(&self) -> FieldElement {
        self.generator
    }

    pub fn has_dlog_table(&self) -> bool {
        self.tables.is_some()
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement(0)
    }

    pub fn one(&self) -> FieldElement {
        FieldElement(1)
    }

    /// Element from its encoding.
    pub fn element(&self, encoding: u64) -> Result<FieldElement, FieldError> {
        if encoding < self.q {
            Ok(FieldElement(encoding))
        } else {
            Err(FieldError::OutOfRange(encoding))
        }
    }

    /// Image of an integer under `Z -> F_p -> F_q`.
    pub fn from_int(&self, n: i128) -> FieldElement {
        FieldElement(arith::reduce_signed(n, self.p))
    }

    /// Image of `num/den`, or `None` when `p | den`.
    pub fn from_ratio(&self, num: i128, den: i128) -> Option<FieldElement> {
        let d = inv_mod(arith::reduce_signed(den, self.p), self.p)?;
        Some(FieldElement(mul_mod(
            arith::reduce_signed(num, self.p),
            d,
            self.p,
        )))
    }

    pub fn from_coeffs(&self, coeffs: &[u64]) -> FieldElement {
        let reduced = poly::rem(
            &coeffs.iter().map(|c| c % self.p).collect::<Vec<_>>(),
            &self.modulus,
            self.p,
        );
        FieldElement(self.encode(&reduced))
    }

    /// Coefficients of the polynomial representative, exactly `e` of them.
    pub fn coeffs(&self, x: FieldElement) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.e as usize);
        let mut t = x.0;
        for _ in 0..self.e {
            out.push(t % self.p);
            t /= self.p;
        }
        out
    }

    /// `X^i` reduced modulo the defining polynomial.
    pub fn monomial(&self, i: u32) -> FieldElement {
        let mut c = vec![0u64; i as usize + 1];
        c[i as usize] = 1;
        self.from_coeffs(&c)
    }

    pub fn elements(&self) -> impl Iterator<Item = FieldElement> + Clone {
        (0..self.q).map(FieldElement)
    }

    pub fn nonzero_elements(&self) -> impl Iterator<Item = FieldElement> + Clone {
        (1..self.q).map(FieldElement)
    }

    fn encode(&self, c: &[u64]) -> u64 {
        c.iter().rev().fold(0u64, |acc, &d| acc * self.p + d)
    }

    fn poly_of(&self, x: FieldElement) -> Vec<u64> {
        poly::trim(self.coeffs(x))
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if self.e == 1 {
            let s = a.0 + b.0;
            return FieldElement(if s >= self.p { s - self.p } else { s });
        }
        let (mut x, mut y, mut out, mut place) = (a.0, b.0, 0u64, 1u64);
        while x > 0 || y > 0 {
            let d = (x % self.p + y % self.p) % self.p;
            out += d * place;
            place *= self.p;
            x /= self.p;
            y /= self.p;
        }
        FieldElement(out)
    }

    pub fn neg(&self, a: FieldElement) -> FieldElement {
        if self.e == 1 {
            return FieldElement(if a.0 == 0 { 0 } else { self.p - a.0 });
        }
        let (mut x, mut out, mut place) = (a.0, 0u64, 1u64);
        while x > 0 {
            let d = (self.p - x % self.p) % self.p;
            out += d * place;
            place *= self.p;
            x /= self.p;
        }
        FieldElement(out)
    }

    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if a.0 == 0 || b.0 == 0 {
            return FieldElement(0);
        }
        if self.e == 1 {
            return FieldElement(mul_mod(a.0, b.0, self.p));
        }
        if let Some(t) = &self.tables {
            let n = self.q - 1;
            let k = (t.log[a.0 as usize] as u64 + t.log[b.0 as usize] as u64) % n;
            return FieldElement(t.exp[k as usize] as u64);
        }
        let r = poly::mul_mod_poly(&self.poly_of(a), &self.poly_of(b), &self.modulus, self.p);
        FieldElement(self.encode(&r))
    }

    pub fn pow(&self, a: FieldElement, exp: u64) -> FieldElement {
        if self.e == 1 {
            return FieldElement(pow_mod(a.0, exp, self.p));
        }
        if a.0 == 0 {
            return FieldElement(u64::from(exp == 0));
        }
        if let Some(t) = &self.tables {
            let n = self.q - 1;
            let k = mul_mod(t.log[a.0 as usize] as u64, exp % n, n);
            return FieldElement(t.exp[k as usize] as u64);
        }
        let (mut acc, mut base, mut e) = (self.one(), a, exp);
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// `a^k` for a signed exponent; `None` for a negative power of zero.
    pub fn pow_signed(&self, a: FieldElement, k: i64) -> Option<FieldElement> {
        if k >= 0 {
            Some(self.pow(a, k as u64))
        } else {
            let inv = self.inv(a).ok()?;
            Some(self.pow(inv, k.unsigned_abs()))
        }
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement, FieldError> {
        if a.0 == 0 {
            return Err(FieldError::DivisionByZero);
        }
        if self.e == 1 {
            return Ok(FieldElement(pow_mod(a.0, self.p - 2, self.p)));
        }
        if let Some(t) = &self.tables {
            let n = self.q - 1;
            let k = (n - t.log[a.0 as usize] as u64) % n;
            return Ok(FieldElement(t.exp[k as usize] as u64));
        }
        let r =
            poly::inv_mod_poly(&self.poly_of(a), &self.modulus, self.p).ok_or(FieldError::DivisionByZero)?;
        Ok(FieldElement(self.encode(&r)))
    }

    pub fn div(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement, FieldError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// Absolute trace to `F_p`, as a residue in `[0, p)`.
    pub fn trace(&self, x: FieldElement) -> u64 {
        if self.e == 1 {
            return x.0;
        }
        let mut t = x.0;
        let mut acc = 0u64;
        for &b in &self.trace_basis {
            acc = (acc + mul_mod(t % self.p, b, self.p)) % self.p;
            t /= self.p;
        }
        acc
    }

    /// Trace as `Σ x^(p^i)`, the defining sum.
    pub fn trace_by_frobenius(&self, x: FieldElement) -> u64 {
        let mut acc = self.zero();
        let mut y = x;
        for _ in 0..self.e {
            acc = self.add(acc, y);
            y = self.pow(y, self.p);
        }
        debug_assert!(acc.0 < self.p, "trace must land in the prime field");
        acc.0
    }

    /// Multiplicative order of a nonzero element.
    pub fn order(&self, x: FieldElement) -> Result<u64, FieldError> {
        if x.0 == 0 {
            return Err(FieldError::ZeroArgument);
        }
        let mut n = self.q - 1;
        for l in prime_divisors(self.q - 1) {
            while n.is_multiple_of(l) && self.pow(x, n / l) == self.one() {
                n /= l;
            }
        }
        Ok(n)
    }

    fn find_generator(&self) -> FieldElement {
        if self.q == 2 {
            return FieldElement(1);
        }
        let n = self.q - 1;
        let ls = prime_divisors(n);
        (1..self.q)
            .map(FieldElement)
            .find(|&g| ls.iter().all(|&l| self.pow(g, n / l) != self.one()))
            .expect("the multiplicative group of a finite field is cyclic")
    }

    fn build_tables(&self) -> Tables {
        let n = (self.q - 1) as usize;
        let mut log = vec![0u32; self.q as usize];
        let mut exp = vec![0u32; n.max(1)];
        let mut x = self.one();
        for (k, slot) in exp.iter_mut().enumerate() {
            *slot = x.0 as u32;
            log[x.0 as usize] = k as u32;
            x = self.mul(x, self.generator);
        }
        Tables { log, exp }
    }

    fn baby_steps(&self) -> &BabySteps {
        self.bsgs.get_or_init(|| {
            let n = self.q - 1;
            let m = (n as f64).sqrt().ceil() as u64 + 1;
            let mut table = HashMap::with_capacity(m as usize);
            let mut x = self.one();
            for j in 0..m {
                table.entry(x.0).or_insert(j);
                x = self.mul(x, self.generator);
            }
            let giant = self
                .inv(self.pow(self.generator, m))
                .expect("generator is nonzero");
            BabySteps { m, table, giant }
        })
    }

    /// `k` in `[0, q-2]` with `generator^k = x`.
    pub fn discrete_log(&self, x: FieldElement) -> Result<u64, FieldError> {
        if x.0 == 0 {
            return Err(FieldError::ZeroArgument);
        }
        if let Some(t) = &self.tables {
            return Ok(t.log[x.0 as usize] as u64);
        }
        let bs = self.baby_steps();
        let n = self.q - 1;
        let mut y = x;
        for i in 0..=bs.m {
            if let Some(&j) = bs.table.get(&y.0) {
                return Ok((i * bs.m + j) % n);
            }
            y = self.mul(y, bs.giant);
        }
        unreachable!("every nonzero element is a power of the generator")
    }
}

/// Lexicographically smallest monic irreducible of degree `e`, comparing
/// coefficient sequences from the constant term upward.
fn smallest_irreducible(p: u64, e: u32) -> Vec<u64> {
    if e == 1 {
        return vec![0, 1];
    }
    let e = e as usize;
    let mut c = vec![0u64; e];
    loop {
        let mut f = c.clone();
        f.push(1);
        if c[0] != 0 && poly::is_irreducible(&f, p) {
            return f;
        }
        // odometer with c[e-1] fastest, so c[0] is the most significant digit
        let mut i = e;
        loop {
            i -= 1;
            c[i] += 1;
            if c[i] < p {
                break;
            }
            c[i] = 0;
            assert!(i > 0, "an irreducible of every degree exists");
        }
    }
}
