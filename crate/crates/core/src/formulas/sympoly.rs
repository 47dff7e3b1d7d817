//! Parser-side polynomial with rational coefficients and signed exponents,
//! converted to the concrete AST types once a body is complete.

use std::collections::BTreeMap;

use num_traits::{CheckedAdd, CheckedMul, One, Zero};

use super::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymPoly {
    pub nvars: usize,
    pub terms: BTreeMap<Vec<i32>, Rational>,
}

impl SymPoly {
    pub fn zero(nvars: usize) -> Self {
        SymPoly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: Rational) -> Self {
        let mut p = Self::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.terms.insert(e, Rational::one());
        p
    }

    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => self
                .terms
                .iter()
                .next()
                .filter(|(e, _)| e.iter().all(|&x| x == 0))
                .map(|(_, c)| *c),
            _ => None,
        }
    }

    fn insert_add(&mut self, e: Vec<i32>, c: Rational) -> Option<()> {
        let entry = self.terms.entry(e).or_insert_with(Rational::zero);
        *entry = entry.checked_add(&c)?;
        if entry.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
        Some(())
    }

    /// Arithmetic returns `None` on coefficient overflow.
    pub fn add(&self, o: &SymPoly) -> Option<SymPoly> {
        let mut out = self.clone();
        for (e, c) in &o.terms {
            out.insert_add(e.clone(), *c)?;
        }
        Some(out)
    }

    pub fn neg(&self) -> SymPoly {
        SymPoly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -*c)).collect(),
        }
    }

    pub fn sub(&self, o: &SymPoly) -> Option<SymPoly> {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &SymPoly) -> Option<SymPoly> {
        let mut out = SymPoly::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e = e1
                    .iter()
                    .zip(e2)
                    .map(|(a, b)| i32::checked_add(*a, *b))
                    .collect::<Option<Vec<i32>>>()?;
                out.insert_add(e, c1.checked_mul(c2)?)?;
            }
        }
        Some(out)
    }

    pub fn scale(&self, c: Rational) -> Option<SymPoly> {
        self.mul(&SymPoly::constant(self.nvars, c))
    }

    /// `self^k`; negative `k` only for single-term polynomials.
    pub fn pow(&self, k: i64) -> Option<SymPoly> {
        if k < 0 {
            if self.terms.len() != 1 {
                return None;
            }
            let (e, c) = self.terms.iter().next().unwrap();
            if c.is_zero() {
                return None;
            }
            let m = i32::try_from(k.unsigned_abs()).ok()?;
            let mut p = SymPoly::zero(self.nvars);
            let e = e
                .iter()
                .map(|x| i32::checked_mul(*x, -m))
                .collect::<Option<Vec<i32>>>()?;
            p.terms.insert(e, pow_rat(c.recip(), m as u32)?);
            return Some(p);
        }
        let mut acc = SymPoly::constant(self.nvars, Rational::one());
        let mut base = self.clone();
        let mut k = k as u64;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base)?;
            }
        }
        Some(acc)
    }

    pub fn has_negative_exponent(&self) -> bool {
        self.terms.keys().any(|e| e.iter().any(|&x| x < 0))
    }

    pub fn max_total_degree(&self) -> i32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }
}

fn pow_rat(c: Rational, k: u32) -> Option<Rational> {
    (0..k).try_fold(Rational::one(), |acc, _| acc.checked_mul(&c))
}
