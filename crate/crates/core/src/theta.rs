//! Symbolic character sums `Θ(ā) = Σ_{z̄ ∈ X_ā} Ψ(g·z̄) χ(z̄^h)` over
//! finite fibers, root sums `χ_sym`, κ functions, and the closure algebra
//! of Θ specifications.

use num_complex::Complex64;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::characters::{chi_eval, psi_eval, AdditiveCharacter, MultiplicativeCharacter};
use crate::field::upoly;
use crate::field::{FieldElement, FiniteField};
use crate::formulas::{
    eval_linear_row, eval_mult_row, CompiledFormula, CompiledPoly, DefinableFormula, PolyExpr, Rational,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ThetaError {
    #[error("fiber exceeds its bound of {bound} point(s)")]
    FiberBoundExceeded { bound: u64 },
    #[error("fiber constant is undefined in characteristic {p}")]
    PointUndefined { p: u64 },
    #[error("expected {expected} parameter(s), got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("invalid padding: {0}")]
    InvalidPadding(String),
    #[error("{0} needs a second specification")]
    MissingOperand(&'static str),
}

/// Finite fiber `X_ā ⊆ F^m`, built from univariate root sets, constant
/// points, cartesian products and unions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Fiber {
    /// Roots `z` of `P(ā, z)`; `P` has the parameters first and `z` last.
    Roots(PolyExpr),
    Point(Vec<Rational>),
    Product(Vec<Fiber>),
    /// Disjoint union: branches are tagged, so a tuple lying in two
    /// branches is counted once per branch.
    Union(Vec<Fiber>),
}

impl Fiber {
    pub fn dim(&self) -> usize {
        match self {
            Fiber::Roots(_) => 1,
            Fiber::Point(v) => v.len(),
            Fiber::Product(parts) => parts.iter().map(Fiber::dim).sum(),
            Fiber::Union(parts) => parts.first().map_or(0, Fiber::dim),
        }
    }

    /// Upper bound on the fiber size valid for every parameter tuple at
    /// which evaluation succeeds.
    pub fn bound(&self) -> u64 {
        match self {
            Fiber::Roots(p) => p.degree_in(p.arity() - 1).unwrap_or(0) as u64,
            Fiber::Point(_) => 1,
            Fiber::Product(parts) => parts.iter().fold(1u64, |a, f| a.saturating_mul(f.bound())),
            Fiber::Union(parts) => parts.iter().fold(0u64, |a, f| a.saturating_add(f.bound())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ThetaSpec {
    pub params: usize,
    pub fiber: Fiber,
    /// Additive row: `Ψ(Σ g_i z_i)`.
    pub g: Vec<i64>,
    /// Multiplicative row: `χ(Π z_i^{h_i})`.
    pub h: Vec<i64>,
}

impl ThetaSpec {
    pub fn dim(&self) -> usize {
        self.fiber.dim()
    }

    pub fn bound(&self) -> u64 {
        self.fiber.bound()
    }
}

/// `κ_{P,Q}(ā)`: the common value of `Q(ā, d)` over the roots `d` of
/// `P(ā, y)`, or `0` when there is no root or the values differ.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KappaSpec {
    pub arity: usize,
    pub p: PolyExpr,
    pub q: PolyExpr,
}

#[derive(Debug, Clone)]
enum CFiber {
    Roots(CompiledPoly),
    Point(Result<Vec<FieldElement>, ThetaError>),
    Product(Vec<CFiber>),
    Union(Vec<CFiber>),
}

impl CFiber {
    fn new(field: &FiniteField, f: &Fiber) -> Self {
        match f {
            Fiber::Roots(p) => CFiber::Roots(CompiledPoly::new(field, p)),
            Fiber::Point(v) => CFiber::Point(
                v.iter()
                    .map(|c| {
                        field
                            .from_ratio(*c.numer(), *c.denom())
                            .ok_or(ThetaError::PointUndefined { p: field.p() })
                    })
                    .collect(),
            ),
            Fiber::Product(parts) => CFiber::Product(parts.iter().map(|x| CFiber::new(field, x)).collect()),
            Fiber::Union(parts) => CFiber::Union(parts.iter().map(|x| CFiber::new(field, x)).collect()),
        }
    }

    fn points(
        &self,
        field: &FiniteField,
        params: &[FieldElement],
    ) -> Result<Vec<Vec<FieldElement>>, ThetaError> {
        Ok(match self {
            CFiber::Roots(p) => {
                let f = p.specialize_last(field, params);
                if f.is_empty() {
                    // Placeholder bound; the caller replaces it with the declared bound.
                    return Err(ThetaError::FiberBoundExceeded { bound: 0 });
                }
                upoly::distinct_roots(field, &f)
                    .into_iter()
                    .map(|r| vec![r])
                    .collect()
            }
            CFiber::Point(v) => vec![v.clone()?],
            CFiber::Product(parts) => {
                let mut acc: Vec<Vec<FieldElement>> = vec![Vec::new()];
                for part in parts {
                    let pts = part.points(field, params)?;
                    acc = acc
                        .iter()
                        .flat_map(|a| {
                            pts.iter().map(move |b| {
                                let mut v = a.clone();
                                v.extend_from_slice(b);
                                v
                            })
                        })
                        .collect();
                }
                acc
            }
            CFiber::Union(parts) => {
                let mut acc = Vec::new();
                for part in parts {
                    acc.extend(part.points(field, params)?);
                }
                acc
            }
        })
    }
}

/// A Θ specification with its coefficients reduced into one field.
#[derive(Debug, Clone)]
pub struct CompiledTheta {
    params: usize,
    bound: u64,
    fiber: CFiber,
    g: Vec<i64>,
    h: Vec<i64>,
}

impl CompiledTheta {
    pub fn new(field: &FiniteField, spec: &ThetaSpec) -> Self {
        CompiledTheta {
            params: spec.params,
            bound: spec.bound(),
            fiber: CFiber::new(field, &spec.fiber),
            g: spec.g.clone(),
            h: spec.h.clone(),
        }
    }

    /// The fiber `X_ā`, in tagged-union order.
    pub fn fiber_points(
        &self,
        field: &FiniteField,
        params: &[FieldElement],
    ) -> Result<Vec<Vec<FieldElement>>, ThetaError> {
        if params.len() != self.params {
            return Err(ThetaError::ArityMismatch {
                expected: self.params,
                got: params.len(),
            });
        }
        let pts = self.fiber.points(field, params).map_err(|e| match e {
            ThetaError::FiberBoundExceeded { .. } => ThetaError::FiberBoundExceeded { bound: self.bound },
            e => e,
        })?;
        if pts.len() as u64 > self.bound {
            return Err(ThetaError::FiberBoundExceeded { bound: self.bound });
        }
        Ok(pts)
    }

    pub fn eval(
        &self,
        field: &FiniteField,
        params: &[FieldElement],
        psi: &AdditiveCharacter,
        chi: &MultiplicativeCharacter,
    ) -> Result<Complex64, ThetaError> {
        let pts = self.fiber_points(field, params)?;
        Ok(pts
            .iter()
            .map(|z| {
                let a = psi_eval(field, psi, eval_linear_row(field, &self.g, z));
                let c = chi_eval(field, chi, eval_mult_row(field, &self.h, z));
                c.to_complex() * a.to_complex()
            })
            .sum())
    }
}

pub fn theta_eval(
    spec: &ThetaSpec,
    params: &[FieldElement],
    field: &FiniteField,
    psi: &AdditiveCharacter,
    chi: &MultiplicativeCharacter,
) -> Result<Complex64, ThetaError> {
    CompiledTheta::new(field, spec).eval(field, params, psi, chi)
}

/// `Σ χ(r)` over the roots of `x^n + a_1 x^{n-1} + ... + a_n` in `F_q`,
/// each counted with its multiplicity.
pub fn chi_sym(coeffs: &[FieldElement], field: &FiniteField, chi: &MultiplicativeCharacter) -> Complex64 {
    let mut f: Vec<FieldElement> = coeffs.iter().rev().copied().collect();
    f.push(field.one());
    upoly::roots_with_multiplicity(field, &f)
        .into_iter()
        .map(|(r, m)| chi_eval(field, chi, r).to_complex() * m as f64)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combine {
    Product,
    Sum,
    Conjugate,
}

/// Constants realising the sum construction: the first branch is padded
/// with `(q2, r2, s2)` and the second with `q1` before and `(r1, s1)`
/// after, subject to `g1·q1 = -r1`, `q1^h1 = 1/s1`, `g2·q2 = -r2`,
/// `q2^h2 = 1/s2` and `s1 ≠ s2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Padding {
    pub q1: Vec<Rational>,
    pub q2: Vec<Rational>,
    pub r1: Rational,
    pub r2: Rational,
    pub s1: Rational,
    pub s2: Rational,
}

fn dot(g: &[i64], q: &[Rational]) -> Rational {
    g.iter()
        .zip(q)
        .map(|(&a, b)| Rational::from_integer(a as i128) * b)
        .sum()
}

fn monomial_value(h: &[i64], q: &[Rational]) -> Option<Rational> {
    let mut acc = Rational::one();
    for (&k, c) in h.iter().zip(q) {
        if k == 0 {
            continue;
        }
        if c.is_zero() {
            return None;
        }
        let base = if k > 0 { *c } else { c.recip() };
        for _ in 0..k.unsigned_abs() {
            acc = num_traits::CheckedMul::checked_mul(&acc, &base)?;
        }
    }
    Some(acc)
}

impl Padding {
    /// Integer padding with `s = ±1` where possible, else powers of two.
    pub fn auto(s1: &ThetaSpec, s2: &ThetaSpec) -> Option<Padding> {
        let one = Rational::one();
        let choose = |h: &[i64], avoid: Option<Rational>| -> Option<Vec<Rational>> {
            let ones = vec![one; h.len()];
            let candidates = std::iter::once(ones.clone())
                .chain((0..h.len()).filter(|&j| h[j] % 2 != 0).map(|j| {
                    let mut v = ones.clone();
                    v[j] = -one;
                    v
                }))
                .chain((0..h.len()).filter(|&j| h[j] != 0).map(|j| {
                    let mut v = ones.clone();
                    v[j] = Rational::from_integer(2);
                    v
                }));
            for v in candidates {
                let val = monomial_value(h, &v)?;
                if Some(val.recip()) != avoid {
                    return Some(v);
                }
            }
            None
        };
        let (q1, q2) = {
            let q1 = choose(&s1.h, None)?;
            let s1v = monomial_value(&s1.h, &q1)?.recip();
            match choose(&s2.h, Some(s1v)) {
                Some(q2) => (q1, q2),
                None => {
                    let q2 = vec![one; s2.h.len()];
                    let s2v = monomial_value(&s2.h, &q2)?.recip();
                    (choose(&s1.h, Some(s2v))?, q2)
                }
            }
        };
        let pad = Padding {
            r1: -dot(&s1.g, &q1),
            r2: -dot(&s2.g, &q2),
            s1: monomial_value(&s1.h, &q1)?.recip(),
            s2: monomial_value(&s2.h, &q2)?.recip(),
            q1,
            q2,
        };
        pad.validate(s1, s2).ok()?;
        Some(pad)
    }

    pub fn validate(&self, s1: &ThetaSpec, s2: &ThetaSpec) -> Result<(), ThetaError> {
        let bad = |m: &str| Err(ThetaError::InvalidPadding(m.into()));
        if self.q1.len() != s1.dim() || self.q2.len() != s2.dim() {
            return bad("padding tuples must match the fiber dimensions");
        }
        if dot(&s1.g, &self.q1) != -self.r1 || dot(&s2.g, &self.q2) != -self.r2 {
            return bad("g(q) = -r must hold for both operands");
        }
        let inv = |h: &[i64], q: &[Rational], s: Rational| {
            !s.is_zero() && monomial_value(h, q).is_some_and(|v| v * s == Rational::one())
        };
        if !inv(&s1.h, &self.q1, self.s1) || !inv(&s2.h, &self.q2, self.s2) {
            return bad("h(q) = 1/s must hold for both operands");
        }
        if self.s1 == self.s2 {
            return bad("s1 and s2 must differ");
        }
        Ok(())
    }
}

/// Θ specification whose evaluation is the pointwise product, sum or
/// complex conjugate of the inputs' evaluations.
pub fn theta_combine(
    kind: Combine,
    s1: &ThetaSpec,
    s2: Option<&ThetaSpec>,
    padding: Option<&Padding>,
) -> Result<ThetaSpec, ThetaError> {
    let params_match = |b: &ThetaSpec| {
        if b.params == s1.params {
            Ok(())
        } else {
            Err(ThetaError::ArityMismatch {
                expected: s1.params,
                got: b.params,
            })
        }
    };
    match kind {
        Combine::Conjugate => Ok(ThetaSpec {
            params: s1.params,
            fiber: s1.fiber.clone(),
            g: s1.g.iter().map(|x| -x).collect(),
            h: s1.h.iter().map(|x| -x).collect(),
        }),
        Combine::Product => {
            let b = s2.ok_or(ThetaError::MissingOperand("product"))?;
            params_match(b)?;
            Ok(ThetaSpec {
                params: s1.params,
                fiber: Fiber::Product(vec![s1.fiber.clone(), b.fiber.clone()]),
                g: s1.g.iter().chain(&b.g).copied().collect(),
                h: s1.h.iter().chain(&b.h).copied().collect(),
            })
        }
        Combine::Sum => {
            let b = s2.ok_or(ThetaError::MissingOperand("sum"))?;
            params_match(b)?;
            let pad = padding.ok_or_else(|| ThetaError::InvalidPadding("sum needs padding".into()))?;
            pad.validate(s1, b)?;
            let mut tail2 = pad.q2.clone();
            tail2.extend([pad.r2, pad.s2]);
            let first = Fiber::Product(vec![s1.fiber.clone(), Fiber::Point(tail2)]);
            let second = Fiber::Product(vec![
                Fiber::Point(pad.q1.clone()),
                b.fiber.clone(),
                Fiber::Point(vec![pad.r1, pad.s1]),
            ]);
            let mut g: Vec<i64> = s1.g.iter().chain(&b.g).copied().collect();
            g.extend([1, 0]);
            let mut h: Vec<i64> = s1.h.iter().chain(&b.h).copied().collect();
            h.extend([0, 1]);
            Ok(ThetaSpec {
                params: s1.params,
                fiber: Fiber::Union(vec![first, second]),
                g,
                h,
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompiledKappa {
    arity: usize,
    p: CompiledPoly,
    q: CompiledPoly,
}

impl CompiledKappa {
    pub fn new(field: &FiniteField, spec: &KappaSpec) -> Self {
        CompiledKappa {
            arity: spec.arity,
            p: CompiledPoly::new(field, &spec.p),
            q: CompiledPoly::new(field, &spec.q),
        }
    }

    pub fn eval(&self, field: &FiniteField, params: &[FieldElement]) -> FieldElement {
        debug_assert_eq!(params.len(), self.arity);
        let p = self.p.specialize_last(field, params);
        let q = self.q.specialize_last(field, params);
        let values: Vec<FieldElement> = if p.is_empty() {
            // Every element is a root.
            let d = upoly::degree(&q).unwrap_or(0);
            if (d as u64) < field.q() {
                return if d == 0 {
                    q.first().copied().unwrap_or(field.zero())
                } else {
                    field.zero()
                };
            }
            field.elements().map(|y| upoly::eval(field, &q, y)).collect()
        } else {
            upoly::distinct_roots(field, &p)
                .into_iter()
                .map(|y| upoly::eval(field, &q, y))
                .collect()
        };
        match values.split_first() {
            Some((b, rest)) if rest.iter().all(|v| v == b) => *b,
            _ => field.zero(),
        }
    }
}

pub fn kappa_eval(spec: &KappaSpec, params: &[FieldElement], field: &FiniteField) -> FieldElement {
    CompiledKappa::new(field, spec).eval(field, params)
}

/// One cell of a basic predicate: on `cell`, the value is
/// `λ·Θ + i·λ'·Θ'`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasicPiece {
    pub cell: DefinableFormula,
    pub lambda: Rational,
    pub theta: ThetaSpec,
    pub lambda_i: Rational,
    pub theta_i: ThetaSpec,
}

/// Piecewise combination of Θ values over a definable partition.
#[derive(Debug, Clone, PartialEq)]
pub struct BasicPredicate {
    pub arity: usize,
    pub pieces: Vec<BasicPiece>,
}

fn rat_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

impl BasicPredicate {
    /// Value at `point`, using the first cell containing it (`0` if none).
    pub fn eval(
        &self,
        field: &FiniteField,
        point: &[FieldElement],
        psi: &AdditiveCharacter,
        chi: &MultiplicativeCharacter,
    ) -> Result<Complex64, ThetaError> {
        for piece in &self.pieces {
            if CompiledFormula::new(field, &piece.cell.root).eval(field, point) {
                let a = theta_eval(&piece.theta, point, field, psi, chi)?;
                let b = theta_eval(&piece.theta_i, point, field, psi, chi)?;
                return Ok(a * rat_f64(&piece.lambda) + Complex64::i() * b * rat_f64(&piece.lambda_i));
            }
        }
        Ok(Complex64::new(0.0, 0.0))
    }

    /// Exhaustive check that the cells partition `F_q^arity`. Returns the
    /// first point lying in zero or several cells.
    pub fn check_partition(&self, field: &FiniteField) -> Option<Vec<FieldElement>> {
        let cells: Vec<CompiledFormula> = self
            .pieces
            .iter()
            .map(|p| CompiledFormula::new(field, &p.cell.root))
            .collect();
        let elems: Vec<FieldElement> = field.elements().collect();
        let mut idx = vec![0usize; self.arity];
        loop {
            let point: Vec<FieldElement> = idx.iter().map(|&i| elems[i]).collect();
            if cells.iter().filter(|c| c.eval(field, &point)).count() != 1 {
                return Some(point);
            }
            let mut k = 0;
            loop {
                if k == self.arity {
                    return None;
                }
                idx[k] += 1;
                if idx[k] < elems.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}
