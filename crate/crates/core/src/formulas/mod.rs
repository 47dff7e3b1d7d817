//! The `.cdl` definition language: polynomials, integral maps, Laurent
//! polynomials, definable formulas in Kiefe normal form, predicate
//! expressions, Θ and κ specifications, and witness specifications.
//!
//! ```text
//! program := decl+
//! decl    := kind [NAME] INT ":" body [";"]
//! kind    := poly | laurent | formula | linmap | multmap | predicate
//!          | theta | kappa | witness
//! ```
//!
//! `#` starts a comment. Printing is canonical: `parse(print(x)) == x` for
//! every parsed `x`.

mod eval;
mod lexer;
mod parser;
mod print;
pub mod sympoly;

use std::collections::{BTreeMap, HashMap};

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::equidist::WitnessSpec;
use crate::field::{FieldElement, FiniteField};
use crate::theta::{KappaSpec, ThetaSpec};

pub use eval::{
    eval_formula, eval_predicate, eval_predicate_with, ChiHook, CompiledFormula, CompiledPoly,
    CompiledPredicate, EvalError,
};
pub use parser::parse_source;

pub type Rational = Ratio<i128>;

/// Maximum nesting depth of formulas and predicate expressions.
pub const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        line: usize,
        col: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("{line}:{col}: arity mismatch: {detail}")]
    ArityMismatch { line: usize, col: usize, detail: String },
}

/// Integer polynomial in `arity` variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolyExpr {
    arity: usize,
    terms: BTreeMap<Vec<u32>, i128>,
}

impl PolyExpr {
    pub fn new(arity: usize, terms: impl IntoIterator<Item = (Vec<u32>, i128)>) -> Self {
        let mut map = BTreeMap::new();
        for (e, c) in terms {
            assert_eq!(e.len(), arity, "exponent vector length must equal arity");
            *map.entry(e).or_insert(0) += c;
        }
        map.retain(|_, c| *c != 0);
        PolyExpr { arity, terms: map }
    }

    pub fn zero(arity: usize) -> Self {
        PolyExpr::new(arity, [])
    }

    pub fn constant(arity: usize, c: i128) -> Self {
        PolyExpr::new(arity, [(vec![0; arity], c)])
    }

    pub fn var(arity: usize, i: usize) -> Self {
        let mut e = vec![0; arity];
        e[i] = 1;
        PolyExpr::new(arity, [(e, 1)])
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u32>, i128> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Degree in variable `i`, `None` for the zero polynomial.
    pub fn degree_in(&self, i: usize) -> Option<u32> {
        self.terms.keys().map(|e| e[i]).max()
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    pub fn add(&self, o: &PolyExpr) -> PolyExpr {
        assert_eq!(self.arity, o.arity);
        PolyExpr::new(
            self.arity,
            self.terms.iter().chain(&o.terms).map(|(e, c)| (e.clone(), *c)),
        )
    }

    pub fn neg(&self) -> PolyExpr {
        PolyExpr::new(self.arity, self.terms.iter().map(|(e, c)| (e.clone(), -c)))
    }

    pub fn sub(&self, o: &PolyExpr) -> PolyExpr {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &PolyExpr) -> PolyExpr {
        assert_eq!(self.arity, o.arity);
        let mut out = Vec::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                out.push((e1.iter().zip(e2).map(|(a, b)| a + b).collect(), c1 * c2));
            }
        }
        PolyExpr::new(self.arity, out)
    }

    /// Splits by powers of variable `i`: `self = Σ_k coeffs[k] · x_i^k`,
    /// each coefficient free of `x_i`.
    pub fn coefficients_in(&self, i: usize) -> Vec<PolyExpr> {
        let d = self.degree_in(i).unwrap_or(0) as usize;
        let mut buckets: Vec<Vec<(Vec<u32>, i128)>> = vec![Vec::new(); d + 1];
        for (e, c) in &self.terms {
            let mut e2 = e.clone();
            let k = std::mem::replace(&mut e2[i], 0) as usize;
            buckets[k].push((e2, *c));
        }
        buckets
            .into_iter()
            .map(|b| PolyExpr::new(self.arity, b))
            .collect()
    }

    pub fn eval(&self, field: &FiniteField, point: &[FieldElement]) -> FieldElement {
        assert_eq!(point.len(), self.arity, "point arity");
        let mut acc = field.zero();
        for (e, c) in &self.terms {
            let mut t = field.from_int(*c);
            for (x, k) in point.iter().zip(e) {
                if *k > 0 {
                    t = field.mul(t, field.pow(*x, *k as u64));
                }
            }
            acc = field.add(acc, t);
        }
        acc
    }
}

/// Laurent polynomial on the torus `T^{2n}`: exponent vectors of length
/// `2n`, the `Y` block first, then the `Z` block.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LaurentPoly {
    n: usize,
    terms: BTreeMap<Vec<i32>, Rational>,
}

/// One monomial `Y^plus · Z^times` of a Laurent polynomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MonomialSplit {
    pub plus_part: Vec<i32>,
    pub times_part: Vec<i32>,
}

impl MonomialSplit {
    pub fn is_constant(&self) -> bool {
        self.plus_part.iter().chain(&self.times_part).all(|&e| e == 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaurentSplit {
    pub terms: Vec<(Rational, MonomialSplit)>,
    pub is_real_on_torus: bool,
}

impl LaurentPoly {
    pub fn new(n: usize, terms: impl IntoIterator<Item = (Vec<i32>, Rational)>) -> Self {
        let mut map: BTreeMap<Vec<i32>, Rational> = BTreeMap::new();
        for (e, c) in terms {
            assert_eq!(e.len(), 2 * n, "exponent vector length must equal 2n");
            *map.entry(e).or_insert_with(Rational::zero) += c;
        }
        map.retain(|_, c| !c.is_zero());
        LaurentPoly { n, terms: map }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &BTreeMap<Vec<i32>, Rational> {
        &self.terms
    }

    pub fn has_constant_term(&self) -> bool {
        self.terms.contains_key(&vec![0; 2 * self.n])
    }

    /// Largest absolute exponent, the height used for containment searches.
    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .flat_map(|e| e.iter().map(|x| x.unsigned_abs()))
            .max()
            .unwrap_or(0)
    }

    /// Exact test: coefficients are symmetric under exponent negation.
    pub fn is_real_on_torus(&self) -> bool {
        self.terms.iter().all(|(e, c)| {
            let mirror: Vec<i32> = e.iter().map(|x| -x).collect();
            self.terms.get(&mirror) == Some(c)
        })
    }

    /// Sum of absolute values of the coefficients.
    pub fn l1_norm(&self) -> Rational {
        self.terms.values().map(|c| c.abs()).sum()
    }
}

pub fn split_laurent_monomials(h: &LaurentPoly) -> LaurentSplit {
    let terms = h
        .terms
        .iter()
        .map(|(e, c)| {
            (
                *c,
                MonomialSplit {
                    plus_part: e[..h.n].to_vec(),
                    times_part: e[h.n..].to_vec(),
                },
            )
        })
        .collect();
    LaurentSplit {
        terms,
        is_real_on_torus: h.is_real_on_torus(),
    }
}

/// `y_j = Σ_i rows[j][i] · x_i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntegralLinearMap {
    pub inputs: usize,
    pub rows: Vec<Vec<i64>>,
}

/// `y_j = Π_i x_i^{rows[j][i]}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntegralMultiplicativeMap {
    pub inputs: usize,
    pub rows: Vec<Vec<i64>>,
}

pub fn eval_linear_row(field: &FiniteField, row: &[i64], x: &[FieldElement]) -> FieldElement {
    row.iter().zip(x).fold(field.zero(), |acc, (&a, &xi)| {
        if a == 0 {
            acc
        } else {
            field.add(acc, field.mul(field.from_int(a as i128), xi))
        }
    })
}

/// A multiplicative row is `0` when some coordinate carrying a nonzero
/// exponent is `0`; coordinates with exponent `0` are ignored.
pub fn eval_mult_row(field: &FiniteField, row: &[i64], x: &[FieldElement]) -> FieldElement {
    let mut acc = field.one();
    for (&a, &xi) in row.iter().zip(x) {
        if a == 0 {
            continue;
        }
        match field.pow_signed(xi, a) {
            Some(v) if !xi.is_zero() => acc = field.mul(acc, v),
            _ => return field.zero(),
        }
    }
    acc
}

impl IntegralLinearMap {
    pub fn apply(&self, field: &FiniteField, x: &[FieldElement]) -> Vec<FieldElement> {
        self.rows.iter().map(|r| eval_linear_row(field, r, x)).collect()
    }
}

impl IntegralMultiplicativeMap {
    pub fn apply(&self, field: &FiniteField, x: &[FieldElement]) -> Vec<FieldElement> {
        self.rows.iter().map(|r| eval_mult_row(field, r, x)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    /// `P(x̄) = 0`.
    Atom(PolyExpr),
    /// `∃t P(x̄, t) = 0`, with `t` the last variable of `P`.
    Exists(PolyExpr),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Not(f) => 1 + f.depth(),
            Formula::And(fs) | Formula::Or(fs) => 1 + fs.iter().map(Formula::depth).max().unwrap_or(0),
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DefinableFormula {
    pub arity: usize,
    pub root: Formula,
}

/// A field-valued argument of `psi`, `chi`, a Θ reference or a κ reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FTerm {
    Poly(PolyExpr),
    /// Laurent monomial with coefficient 1 and at least one negative exponent.
    Monomial(Vec<i64>),
    Kappa {
        name: String,
        args: Vec<PolyExpr>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PredExpr {
    Const(Rational),
    I,
    Psi(FTerm),
    Chi(FTerm),
    Ind(Formula),
    Theta { name: String, args: Vec<FTerm> },
    Conj(Box<PredExpr>),
    Abs(Box<PredExpr>),
    Neg(Box<PredExpr>),
    Add(Box<PredExpr>, Box<PredExpr>),
    Sub(Box<PredExpr>, Box<PredExpr>),
    Mul(Box<PredExpr>, Box<PredExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PredicateExpr {
    pub arity: usize,
    pub root: PredExpr,
}

impl PredExpr {
    /// Number of `chi(...)` occurrences, in evaluation order.
    pub fn chi_occurrences(&self) -> usize {
        match self {
            PredExpr::Chi(_) => 1,
            PredExpr::Conj(a) | PredExpr::Abs(a) | PredExpr::Neg(a) => a.chi_occurrences(),
            PredExpr::Add(a, b) | PredExpr::Sub(a, b) | PredExpr::Mul(a, b) => {
                a.chi_occurrences() + b.chi_occurrences()
            }
            _ => 0,
        }
    }

    /// Arguments of the `chi(...)` occurrences, in evaluation order.
    pub fn chi_terms(&self) -> Vec<&FTerm> {
        fn walk<'a>(e: &'a PredExpr, out: &mut Vec<&'a FTerm>) {
            match e {
                PredExpr::Chi(t) => out.push(t),
                PredExpr::Conj(a) | PredExpr::Abs(a) | PredExpr::Neg(a) => walk(a, out),
                PredExpr::Add(a, b) | PredExpr::Sub(a, b) | PredExpr::Mul(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                _ => {}
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// Syntactic bound on `|value|`, given Θ fiber bounds by name.
    pub fn bound(&self, theta_bound: &dyn Fn(&str) -> Option<f64>) -> Option<f64> {
        Some(match self {
            PredExpr::Const(c) => (*c.numer() as f64 / *c.denom() as f64).abs(),
            PredExpr::I | PredExpr::Psi(_) | PredExpr::Chi(_) | PredExpr::Ind(_) => 1.0,
            PredExpr::Theta { name, .. } => theta_bound(name)?,
            PredExpr::Conj(a) | PredExpr::Abs(a) | PredExpr::Neg(a) => a.bound(theta_bound)?,
            PredExpr::Add(a, b) | PredExpr::Sub(a, b) => a.bound(theta_bound)? + b.bound(theta_bound)?,
            PredExpr::Mul(a, b) => a.bound(theta_bound)? * b.bound(theta_bound)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeclKind {
    Poly,
    Laurent,
    Formula,
    LinMap,
    MultMap,
    Predicate,
    Theta,
    Kappa,
    Witness,
}

impl DeclKind {
    pub fn keyword(self) -> &'static str {
        match self {
            DeclKind::Poly => "poly",
            DeclKind::Laurent => "laurent",
            DeclKind::Formula => "formula",
            DeclKind::LinMap => "linmap",
            DeclKind::MultMap => "multmap",
            DeclKind::Predicate => "predicate",
            DeclKind::Theta => "theta",
            DeclKind::Kappa => "kappa",
            DeclKind::Witness => "witness",
        }
    }

    pub fn from_keyword(s: &str) -> Option<DeclKind> {
        Some(match s {
            "poly" => DeclKind::Poly,
            "laurent" => DeclKind::Laurent,
            "formula" => DeclKind::Formula,
            "linmap" => DeclKind::LinMap,
            "multmap" => DeclKind::MultMap,
            "predicate" => DeclKind::Predicate,
            "theta" => DeclKind::Theta,
            "kappa" => DeclKind::Kappa,
            "witness" => DeclKind::Witness,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeclBody {
    Poly(PolyExpr),
    Laurent(LaurentPoly),
    Formula(DefinableFormula),
    LinMap(IntegralLinearMap),
    MultMap(IntegralMultiplicativeMap),
    Predicate(PredicateExpr),
    Theta(ThetaSpec),
    Kappa(KappaSpec),
    Witness(WitnessSpec),
}

impl DeclBody {
    pub fn kind(&self) -> DeclKind {
        match self {
            DeclBody::Poly(_) => DeclKind::Poly,
            DeclBody::Laurent(_) => DeclKind::Laurent,
            DeclBody::Formula(_) => DeclKind::Formula,
            DeclBody::LinMap(_) => DeclKind::LinMap,
            DeclBody::MultMap(_) => DeclKind::MultMap,
            DeclBody::Predicate(_) => DeclKind::Predicate,
            DeclBody::Theta(_) => DeclKind::Theta,
            DeclBody::Kappa(_) => DeclKind::Kappa,
            DeclBody::Witness(_) => DeclKind::Witness,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decl {
    pub name: Option<String>,
    pub arity: usize,
    pub body: DeclBody,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub decls: Vec<Decl>,
}

/// Named Θ and κ declarations that predicates refer to.
#[derive(Debug, Clone, Default)]
pub struct Env {
    pub thetas: HashMap<String, ThetaSpec>,
    pub kappas: HashMap<String, KappaSpec>,
}

impl Program {
    /// Declaration of `kind`, by name or, with `None`, the first of that kind.
    pub fn find(&self, kind: DeclKind, name: Option<&str>) -> Option<&Decl> {
        self.decls
            .iter()
            .filter(|d| d.body.kind() == kind)
            .find(|d| name.is_none() || d.name.as_deref() == name)
    }

    pub fn env(&self) -> Env {
        let mut env = Env::default();
        for d in &self.decls {
            let Some(name) = &d.name else { continue };
            match &d.body {
                DeclBody::Theta(t) => {
                    env.thetas.insert(name.clone(), t.clone());
                }
                DeclBody::Kappa(k) => {
                    env.kappas.insert(name.clone(), k.clone());
                }
                _ => {}
            }
        }
        env
    }
}

macro_rules! typed_getter {
    ($fn:ident, $kind:ident, $ty:ty) => {
        impl Program {
            pub fn $fn(&self, name: Option<&str>) -> Option<&$ty> {
                match &self.find(DeclKind::$kind, name)?.body {
                    DeclBody::$kind(x) => Some(x),
                    _ => None,
                }
            }
        }
    };
}

typed_getter!(poly, Poly, PolyExpr);
typed_getter!(laurent, Laurent, LaurentPoly);
typed_getter!(formula, Formula, DefinableFormula);
typed_getter!(linmap, LinMap, IntegralLinearMap);
typed_getter!(multmap, MultMap, IntegralMultiplicativeMap);
typed_getter!(predicate, Predicate, PredicateExpr);
typed_getter!(theta, Theta, ThetaSpec);
typed_getter!(kappa, Kappa, KappaSpec);
typed_getter!(witness, Witness, WitnessSpec);
