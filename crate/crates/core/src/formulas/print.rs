//! Canonical printing. Terms appear in ascending lexicographic order of
//! their exponent vectors; products use explicit `*`.

use std::fmt::{self, Display, Formatter, Write};

use num_traits::{One, Signed, Zero};

use super::*;
use crate::equidist::WitnessSpec;
use crate::theta::{Fiber, KappaSpec, ThetaSpec};

fn x_name(i: usize) -> String {
    format!("x{}", i + 1)
}

fn monomial(exps: &[i64], name: &dyn Fn(usize) -> String) -> String {
    let mut parts = Vec::new();
    for (i, &e) in exps.iter().enumerate() {
        match e {
            0 => {}
            1 => parts.push(name(i)),
            _ => parts.push(format!("{}^{e}", name(i))),
        }
    }
    parts.join("*")
}

/// Writes `Σ c·monomial`, or `0` when there are no terms.
fn write_terms(
    out: &mut String,
    terms: impl Iterator<Item = (Vec<i64>, Rational)>,
    name: &dyn Fn(usize) -> String,
) {
    let start = out.len();
    for (k, (e, c)) in terms.enumerate() {
        let m = monomial(&e, name);
        let mag = c.abs();
        let body = if m.is_empty() {
            mag.to_string()
        } else if mag.is_one() {
            m
        } else {
            format!("{mag}*{m}")
        };
        match (k, c.is_negative()) {
            (0, false) => out.push_str(&body),
            (0, true) => {
                out.push('-');
                out.push_str(&body);
            }
            (_, false) => {
                out.push_str(" + ");
                out.push_str(&body);
            }
            (_, true) => {
                out.push_str(" - ");
                out.push_str(&body);
            }
        }
    }
    if out.len() == start {
        out.push('0');
    }
}

pub(crate) fn poly_string(p: &PolyExpr, name: &dyn Fn(usize) -> String) -> String {
    let mut s = String::new();
    write_terms(
        &mut s,
        p.terms()
            .iter()
            .map(|(e, c)| (e.iter().map(|&x| x as i64).collect(), Rational::from_integer(*c))),
        name,
    );
    s
}

fn univariate_string(c: &[Rational]) -> String {
    let mut s = String::new();
    write_terms(
        &mut s,
        c.iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, v)| (vec![i as i64], *v)),
        &x_name,
    );
    s
}

fn row_string(row: &[i64], name: &dyn Fn(usize) -> String) -> String {
    let mut s = String::new();
    let mut terms: Vec<(Vec<i64>, Rational)> = row
        .iter()
        .enumerate()
        .filter(|(_, &a)| a != 0)
        .map(|(i, &a)| {
            let mut e = vec![0i64; row.len()];
            e[i] = 1;
            (e, Rational::from_integer(a as i128))
        })
        .collect();
    terms.sort_by(|a, b| a.0.cmp(&b.0));
    write_terms(&mut s, terms.into_iter(), name);
    s
}

fn monomial_string(exps: &[i64], name: &dyn Fn(usize) -> String) -> String {
    let m = monomial(exps, name);
    if m.is_empty() {
        "1".into()
    } else {
        m
    }
}

impl Display for PolyExpr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(&poly_string(self, &x_name))
    }
}

impl Display for LaurentPoly {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let n = self.n();
        let name = move |i: usize| {
            if i < n {
                format!("Y{}", i + 1)
            } else {
                format!("Z{}", i - n + 1)
            }
        };
        let mut s = String::new();
        write_terms(
            &mut s,
            self.terms()
                .iter()
                .map(|(e, c)| (e.iter().map(|&x| x as i64).collect(), *c)),
            &name,
        );
        f.write_str(&s)
    }
}

impl Display for IntegralLinearMap {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self.rows.iter().map(|r| row_string(r, &x_name)).collect();
        f.write_str(&rows.join(", "))
    }
}

impl Display for IntegralMultiplicativeMap {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self.rows.iter().map(|r| monomial_string(r, &x_name)).collect();
        f.write_str(&rows.join(", "))
    }
}

pub(crate) fn formula_string(phi: &Formula, arity: usize) -> String {
    let wrap = |g: &Formula| {
        let s = formula_string(g, arity);
        match g {
            Formula::And(_) | Formula::Or(_) => format!("({s})"),
            _ => s,
        }
    };
    match phi {
        Formula::True => "true".into(),
        Formula::False => "false".into(),
        Formula::Atom(p) => format!("{} = 0", poly_string(p, &x_name)),
        Formula::Exists(p) => {
            let name = move |i: usize| if i == arity { "t".to_string() } else { x_name(i) };
            format!("exists t ({} = 0)", poly_string(p, &name))
        }
        Formula::Not(g) => format!("not {}", wrap(g)),
        Formula::And(gs) => gs.iter().map(wrap).collect::<Vec<_>>().join(" and "),
        Formula::Or(gs) => gs
            .iter()
            .map(|g| match g {
                Formula::Or(_) => format!("({})", formula_string(g, arity)),
                _ => formula_string(g, arity),
            })
            .collect::<Vec<_>>()
            .join(" or "),
    }
}

impl Display for DefinableFormula {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(&formula_string(&self.root, self.arity))
    }
}

fn fterm_string(t: &FTerm) -> String {
    match t {
        FTerm::Poly(p) => poly_string(p, &x_name),
        FTerm::Monomial(e) => monomial_string(e, &x_name),
        FTerm::Kappa { name, args } => {
            let a: Vec<String> = args.iter().map(|p| poly_string(p, &x_name)).collect();
            format!("kappa {name}({})", a.join(", "))
        }
    }
}

fn prec(e: &PredExpr) -> u8 {
    match e {
        PredExpr::Add(..) | PredExpr::Sub(..) => 1,
        PredExpr::Mul(..) => 2,
        PredExpr::Neg(_) => 3,
        PredExpr::Const(c) if c.is_negative() => 3,
        _ => 4,
    }
}

pub(crate) fn pred_string(e: &PredExpr, arity: usize) -> String {
    let sub = |c: &PredExpr, min: u8| {
        let s = pred_string(c, arity);
        if prec(c) < min {
            format!("({s})")
        } else {
            s
        }
    };
    match e {
        PredExpr::Const(c) => c.to_string(),
        PredExpr::I => "i".into(),
        PredExpr::Psi(t) => format!("psi({})", fterm_string(t)),
        PredExpr::Chi(t) => format!("chi({})", fterm_string(t)),
        PredExpr::Ind(phi) => format!("ind({})", formula_string(phi, arity)),
        PredExpr::Theta { name, args } => {
            let a: Vec<String> = args.iter().map(fterm_string).collect();
            format!("theta {name}({})", a.join(", "))
        }
        PredExpr::Conj(a) => format!("conj({})", pred_string(a, arity)),
        PredExpr::Abs(a) => format!("abs({})", pred_string(a, arity)),
        PredExpr::Neg(a) => match a.as_ref() {
            PredExpr::Const(_) => format!("-({})", pred_string(a, arity)),
            _ => format!("-{}", sub(a, 3)),
        },
        PredExpr::Add(a, b) => format!("{} + {}", sub(a, 1), sub(b, 2)),
        PredExpr::Sub(a, b) => format!("{} - {}", sub(a, 1), sub(b, 2)),
        PredExpr::Mul(a, b) => format!("{} * {}", sub(a, 2), sub(b, 3)),
    }
}

impl Display for PredicateExpr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(&pred_string(&self.root, self.arity))
    }
}

fn fiber_string(fb: &Fiber, params: usize) -> String {
    match fb {
        Fiber::Roots(p) => {
            let name = move |i: usize| {
                if i == params {
                    "z".to_string()
                } else {
                    format!("a{}", i + 1)
                }
            };
            format!("roots({})", poly_string(p, &name))
        }
        Fiber::Point(v) => {
            let c: Vec<String> = v.iter().map(|r| r.to_string()).collect();
            format!("point({})", c.join(", "))
        }
        Fiber::Product(parts) => parts
            .iter()
            .map(|p| match p {
                Fiber::Product(_) | Fiber::Union(_) => format!("({})", fiber_string(p, params)),
                _ => fiber_string(p, params),
            })
            .collect::<Vec<_>>()
            .join(" * "),
        Fiber::Union(parts) => parts
            .iter()
            .map(|p| match p {
                Fiber::Union(_) => format!("({})", fiber_string(p, params)),
                _ => fiber_string(p, params),
            })
            .collect::<Vec<_>>()
            .join(" | "),
    }
}

impl Display for ThetaSpec {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let z = |i: usize| format!("z{}", i + 1);
        write!(
            f,
            "{} psi({}) chi({})",
            fiber_string(&self.fiber, self.params),
            row_string(&self.g, &z),
            monomial_string(&self.h, &z)
        )
    }
}

impl Display for KappaSpec {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let n = self.arity;
        let name = move |i: usize| if i == n { "y".to_string() } else { x_name(i) };
        write!(
            f,
            "{} => {}",
            poly_string(&self.p, &name),
            poly_string(&self.q, &name)
        )
    }
}

impl Display for WitnessSpec {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let min_poly: Vec<Rational> = self.min_poly.iter().map(|&c| Rational::from_integer(c)).collect();
        let mut s = format!("minpoly {}", univariate_string(&min_poly));
        for (h, t) in &self.chi_targets {
            write!(s, ", chi {} -> {t}", univariate_string(h))?;
        }
        for (g, u) in &self.psi_targets {
            write!(s, ", psi {} -> {u}", univariate_string(g))?;
        }
        write!(s, ", tolerance {}", self.tolerance)?;
        if let Some(u) = &self.unity {
            write!(
                s,
                ", unity {} {} {} -> {}",
                u.r,
                u.f,
                univariate_string(&u.lambda),
                u.target
            )?;
        }
        write!(s, ", order {}", self.min_order)?;
        if let Some((lo, hi)) = self.primes {
            write!(s, ", primes {lo} {hi}")?;
        }
        f.write_str(&s)
    }
}

impl Display for DeclBody {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            DeclBody::Poly(x) => x.fmt(f),
            DeclBody::Laurent(x) => x.fmt(f),
            DeclBody::Formula(x) => x.fmt(f),
            DeclBody::LinMap(x) => x.fmt(f),
            DeclBody::MultMap(x) => x.fmt(f),
            DeclBody::Predicate(x) => x.fmt(f),
            DeclBody::Theta(x) => x.fmt(f),
            DeclBody::Kappa(x) => x.fmt(f),
            DeclBody::Witness(x) => x.fmt(f),
        }
    }
}

impl Display for Decl {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(self.body.kind().keyword())?;
        if let Some(n) = &self.name {
            write!(f, " {n}")?;
        }
        write!(f, " {}: {}", self.arity, self.body)
    }
}

impl Display for Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        for d in &self.decls {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}
