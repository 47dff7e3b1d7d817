//! Evaluation of formulas and predicate expressions over a concrete field.
//! `Compiled*` types reduce integer coefficients into the field once, so
//! that repeated evaluation over many points is cheap.

use num_complex::Complex64;
use thiserror::Error;

use super::*;
use crate::characters::{chi_eval, psi_eval, AdditiveCharacter, CharacterValue, MultiplicativeCharacter};
use crate::field::upoly::{self, UPoly};
use crate::theta::{CompiledKappa, CompiledTheta, ThetaError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("arity mismatch: expected {expected} argument(s), got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("unresolved {kind} reference `{name}`")]
    Unresolved { kind: &'static str, name: String },
    #[error(transparent)]
    Theta(#[from] ThetaError),
}

#[derive(Debug, Clone)]
pub struct CompiledPoly {
    arity: usize,
    terms: Vec<(FieldElement, Vec<(usize, u32)>)>,
}

impl CompiledPoly {
    pub fn new(field: &FiniteField, p: &PolyExpr) -> Self {
        let terms = p
            .terms()
            .iter()
            .map(|(e, c)| {
                let vars = e
                    .iter()
                    .enumerate()
                    .filter(|(_, &k)| k > 0)
                    .map(|(i, &k)| (i, k))
                    .collect();
                (field.from_int(*c), vars)
            })
            .filter(|(c, _)| !c.is_zero())
            .collect();
        CompiledPoly {
            arity: p.arity(),
            terms,
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn eval(&self, field: &FiniteField, point: &[FieldElement]) -> FieldElement {
        debug_assert_eq!(point.len(), self.arity);
        self.terms.iter().fold(field.zero(), |acc, (c, vars)| {
            let t = vars
                .iter()
                .fold(*c, |t, &(i, k)| field.mul(t, field.pow(point[i], k as u64)));
            field.add(acc, t)
        })
    }

    /// Coefficients in the last variable once the others are fixed to
    /// `prefix`.
    pub fn specialize_last(&self, field: &FiniteField, prefix: &[FieldElement]) -> UPoly {
        debug_assert_eq!(prefix.len() + 1, self.arity);
        let last = self.arity - 1;
        let mut out: UPoly = Vec::new();
        for (c, vars) in &self.terms {
            let mut t = *c;
            let mut deg = 0usize;
            for &(i, k) in vars {
                if i == last {
                    deg = k as usize;
                } else {
                    t = field.mul(t, field.pow(prefix[i], k as u64));
                }
            }
            if out.len() <= deg {
                out.resize(deg + 1, field.zero());
            }
            out[deg] = field.add(out[deg], t);
        }
        upoly::trim(out)
    }
}

#[derive(Debug, Clone)]
pub enum CompiledFormula {
    True,
    False,
    Atom(CompiledPoly),
    Exists(CompiledPoly),
    Not(Box<CompiledFormula>),
    And(Vec<CompiledFormula>),
    Or(Vec<CompiledFormula>),
}

impl CompiledFormula {
    pub fn new(field: &FiniteField, phi: &Formula) -> Self {
        match phi {
            Formula::True => CompiledFormula::True,
            Formula::False => CompiledFormula::False,
            Formula::Atom(p) => CompiledFormula::Atom(CompiledPoly::new(field, p)),
            Formula::Exists(p) => CompiledFormula::Exists(CompiledPoly::new(field, p)),
            Formula::Not(f) => CompiledFormula::Not(Box::new(Self::new(field, f))),
            Formula::And(fs) => CompiledFormula::And(fs.iter().map(|f| Self::new(field, f)).collect()),
            Formula::Or(fs) => CompiledFormula::Or(fs.iter().map(|f| Self::new(field, f)).collect()),
        }
    }

    /// `∃t` atoms are decided by root finding in `F_q[t]`.
    pub fn eval(&self, field: &FiniteField, point: &[FieldElement]) -> bool {
        match self {
            CompiledFormula::True => true,
            CompiledFormula::False => false,
            CompiledFormula::Atom(p) => p.eval(field, point).is_zero(),
            CompiledFormula::Exists(p) => upoly::has_root(field, &p.specialize_last(field, point)),
            CompiledFormula::Not(f) => !f.eval(field, point),
            CompiledFormula::And(fs) => fs.iter().all(|f| f.eval(field, point)),
            CompiledFormula::Or(fs) => fs.iter().any(|f| f.eval(field, point)),
        }
    }
}

pub fn eval_formula(
    field: &FiniteField,
    phi: &DefinableFormula,
    point: &[FieldElement],
) -> Result<bool, EvalError> {
    check_arity(phi.arity, point.len())?;
    Ok(CompiledFormula::new(field, &phi.root).eval(field, point))
}

fn check_arity(expected: usize, got: usize) -> Result<(), EvalError> {
    if expected == got {
        Ok(())
    } else {
        Err(EvalError::ArityMismatch { expected, got })
    }
}

#[derive(Debug, Clone)]
enum CTerm {
    Poly(CompiledPoly),
    Monomial(Vec<i64>),
    Kappa(CompiledKappa, Vec<CompiledPoly>),
}

impl CTerm {
    fn new(field: &FiniteField, t: &FTerm, env: &Env) -> Result<Self, EvalError> {
        Ok(match t {
            FTerm::Poly(p) => CTerm::Poly(CompiledPoly::new(field, p)),
            FTerm::Monomial(e) => CTerm::Monomial(e.clone()),
            FTerm::Kappa { name, args } => {
                let spec = env.kappas.get(name).ok_or_else(|| EvalError::Unresolved {
                    kind: "kappa",
                    name: name.clone(),
                })?;
                check_arity(spec.arity, args.len())?;
                CTerm::Kappa(
                    CompiledKappa::new(field, spec),
                    args.iter().map(|p| CompiledPoly::new(field, p)).collect(),
                )
            }
        })
    }

    fn eval(&self, field: &FiniteField, point: &[FieldElement]) -> FieldElement {
        match self {
            CTerm::Poly(p) => p.eval(field, point),
            CTerm::Monomial(e) => eval_mult_row(field, e, point),
            CTerm::Kappa(k, args) => {
                let a: Vec<FieldElement> = args.iter().map(|p| p.eval(field, point)).collect();
                k.eval(field, &a)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum CPred {
    Const(Complex64),
    Psi(CTerm),
    Chi(CTerm),
    Ind(CompiledFormula),
    Theta(CompiledTheta, Vec<CTerm>),
    Conj(Box<CPred>),
    Abs(Box<CPred>),
    Neg(Box<CPred>),
    Add(Box<CPred>, Box<CPred>),
    Sub(Box<CPred>, Box<CPred>),
    Mul(Box<CPred>, Box<CPred>),
}

/// A predicate with all references resolved against an [`Env`].
#[derive(Debug, Clone)]
pub struct CompiledPredicate {
    arity: usize,
    root: CPred,
}

/// Supplies the value of the `k`-th `chi(...)` occurrence (evaluation
/// order) at the given argument.
pub type ChiHook<'a> = dyn FnMut(usize, FieldElement) -> CharacterValue + 'a;

impl CompiledPredicate {
    pub fn new(field: &FiniteField, pred: &PredicateExpr, env: &Env) -> Result<Self, EvalError> {
        Ok(CompiledPredicate {
            arity: pred.arity,
            root: compile_pred(field, &pred.root, env)?,
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn eval(
        &self,
        field: &FiniteField,
        point: &[FieldElement],
        psi: &AdditiveCharacter,
        chi: &MultiplicativeCharacter,
    ) -> Result<Complex64, EvalError> {
        self.eval_with(field, point, psi, chi, &mut |_, x| chi_eval(field, chi, x))
    }

    /// Like [`eval`](Self::eval), with `chi(...)` occurrences answered by
    /// `hook`. Θ references keep using `chi`.
    pub fn eval_with(
        &self,
        field: &FiniteField,
        point: &[FieldElement],
        psi: &AdditiveCharacter,
        chi: &MultiplicativeCharacter,
        hook: &mut ChiHook<'_>,
    ) -> Result<Complex64, EvalError> {
        check_arity(self.arity, point.len())?;
        let mut ctx = Ctx {
            field,
            point,
            psi,
            chi,
            hook,
            next_chi: 0,
        };
        ctx.eval(&self.root)
    }

    /// Arguments of the `chi(...)` occurrences at `point`, in evaluation order.
    pub fn chi_arguments(&self, field: &FiniteField, point: &[FieldElement]) -> Vec<FieldElement> {
        fn walk(e: &CPred, field: &FiniteField, point: &[FieldElement], out: &mut Vec<FieldElement>) {
            match e {
                CPred::Chi(t) => out.push(t.eval(field, point)),
                CPred::Conj(a) | CPred::Abs(a) | CPred::Neg(a) => walk(a, field, point, out),
                CPred::Add(a, b) | CPred::Sub(a, b) | CPred::Mul(a, b) => {
                    walk(a, field, point, out);
                    walk(b, field, point, out);
                }
                _ => {}
            }
        }
        let mut out = Vec::new();
        walk(&self.root, field, point, &mut out);
        out
    }
}

fn compile_pred(field: &FiniteField, e: &PredExpr, env: &Env) -> Result<CPred, EvalError> {
    let b = |x: &PredExpr| compile_pred(field, x, env).map(Box::new);
    Ok(match e {
        PredExpr::Const(c) => CPred::Const(Complex64::new(*c.numer() as f64 / *c.denom() as f64, 0.0)),
        PredExpr::I => CPred::Const(Complex64::i()),
        PredExpr::Psi(t) => CPred::Psi(CTerm::new(field, t, env)?),
        PredExpr::Chi(t) => CPred::Chi(CTerm::new(field, t, env)?),
        PredExpr::Ind(f) => CPred::Ind(CompiledFormula::new(field, f)),
        PredExpr::Theta { name, args } => {
            let spec = env.thetas.get(name).ok_or_else(|| EvalError::Unresolved {
                kind: "theta",
                name: name.clone(),
            })?;
            check_arity(spec.params, args.len())?;
            CPred::Theta(
                CompiledTheta::new(field, spec),
                args.iter()
                    .map(|t| CTerm::new(field, t, env))
                    .collect::<Result<_, _>>()?,
            )
        }
        PredExpr::Conj(a) => CPred::Conj(b(a)?),
        PredExpr::Abs(a) => CPred::Abs(b(a)?),
        PredExpr::Neg(a) => CPred::Neg(b(a)?),
        PredExpr::Add(x, y) => CPred::Add(b(x)?, b(y)?),
        PredExpr::Sub(x, y) => CPred::Sub(b(x)?, b(y)?),
        PredExpr::Mul(x, y) => CPred::Mul(b(x)?, b(y)?),
    })
}

struct Ctx<'a, 'h> {
    field: &'a FiniteField,
    point: &'a [FieldElement],
    psi: &'a AdditiveCharacter,
    chi: &'a MultiplicativeCharacter,
    hook: &'a mut ChiHook<'h>,
    next_chi: usize,
}

impl Ctx<'_, '_> {
    fn eval(&mut self, e: &CPred) -> Result<Complex64, EvalError> {
        Ok(match e {
            CPred::Const(c) => *c,
            CPred::Psi(t) => psi_eval(self.field, self.psi, t.eval(self.field, self.point)).to_complex(),
            CPred::Chi(t) => {
                let x = t.eval(self.field, self.point);
                let k = self.next_chi;
                self.next_chi += 1;
                (self.hook)(k, x).to_complex()
            }
            CPred::Ind(f) => {
                if f.eval(self.field, self.point) {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            CPred::Theta(spec, args) => {
                let a: Vec<FieldElement> = args.iter().map(|t| t.eval(self.field, self.point)).collect();
                spec.eval(self.field, &a, self.psi, self.chi)?
            }
            CPred::Conj(a) => self.eval(a)?.conj(),
            CPred::Abs(a) => Complex64::new(self.eval(a)?.norm(), 0.0),
            CPred::Neg(a) => -self.eval(a)?,
            CPred::Add(a, b) => self.eval(a)? + self.eval(b)?,
            CPred::Sub(a, b) => self.eval(a)? - self.eval(b)?,
            CPred::Mul(a, b) => self.eval(a)? * self.eval(b)?,
        })
    }
}

pub fn eval_predicate(
    field: &FiniteField,
    pred: &PredicateExpr,
    env: &Env,
    point: &[FieldElement],
    psi: &AdditiveCharacter,
    chi: &MultiplicativeCharacter,
) -> Result<Complex64, EvalError> {
    CompiledPredicate::new(field, pred, env)?.eval(field, point, psi, chi)
}

pub fn eval_predicate_with(
    field: &FiniteField,
    pred: &PredicateExpr,
    env: &Env,
    point: &[FieldElement],
    psi: &AdditiveCharacter,
    chi: &MultiplicativeCharacter,
    hook: &mut ChiHook<'_>,
) -> Result<Complex64, EvalError> {
    CompiledPredicate::new(field, pred, env)?.eval_with(field, point, psi, chi, hook)
}
