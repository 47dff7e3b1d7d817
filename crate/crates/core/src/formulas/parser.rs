use num_traits::{One, Zero};

use super::lexer::{lex, Tok, Token};
use super::sympoly::SymPoly;
use super::*;
use crate::equidist::{UnityConstraint, WitnessSpec};
use crate::theta::{Fiber, KappaSpec, ThetaSpec};

/// Parses a whole `.cdl` source text.
pub fn parse_source(text: &str) -> Result<Program, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        depth: 0,
        refs: Vec::new(),
    };
    let mut decls = Vec::new();
    while p.peek() != &Tok::Eof {
        decls.push(p.decl()?);
        if p.peek() == &Tok::Semi {
            p.pos += 1;
        }
    }
    if decls.is_empty() {
        return Err(p.err(&["a declaration keyword"]));
    }
    let program = Program { decls };
    check_references(&program, &p.refs)?;
    Ok(program)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RefKind {
    Theta,
    Kappa,
}

struct Ref {
    kind: RefKind,
    name: String,
    nargs: usize,
    line: usize,
    col: usize,
}

fn check_references(program: &Program, refs: &[Ref]) -> Result<(), ParseError> {
    let env = program.env();
    for r in refs {
        let expected = match r.kind {
            RefKind::Theta => env.thetas.get(&r.name).map(|t| t.params),
            RefKind::Kappa => env.kappas.get(&r.name).map(|k| k.arity),
        };
        if let Some(n) = expected {
            if n != r.nargs {
                return Err(ParseError::ArityMismatch {
                    line: r.line,
                    col: r.col,
                    detail: format!("`{}` takes {n} argument(s), got {}", r.name, r.nargs),
                });
            }
        }
    }
    Ok(())
}

/// Which identifiers are variables, and their indices.
#[derive(Debug, Clone, Copy)]
enum Scope {
    /// `x1..xn`.
    Poly(usize),
    /// `x1..xn`, plus `t` as index `n`.
    Exists(usize),
    /// `Y1..Yn` then `Z1..Zn`.
    Laurent(usize),
    /// `x1..xn`, plus `y` as index `n`.
    Kappa(usize),
    /// `a1..an`, plus `z` as index `n`.
    Roots(usize),
    /// `z1..zm`.
    Fiber(usize),
    /// No variables.
    Constant,
}

impl Scope {
    fn nvars(self) -> usize {
        match self {
            Scope::Poly(n) | Scope::Fiber(n) => n,
            Scope::Exists(n) | Scope::Kappa(n) | Scope::Roots(n) => n + 1,
            Scope::Laurent(n) => 2 * n,
            Scope::Constant => 0,
        }
    }

    /// `Ok(None)` if the name is not a variable of this scope at all;
    /// `Err(limit)` if it is one with an index beyond the declared arity.
    fn lookup(self, name: &str) -> Result<Option<usize>, usize> {
        let indexed = |prefix: &str, n: usize, offset: usize| -> Result<Option<usize>, usize> {
            let Some(rest) = name.strip_prefix(prefix) else {
                return Ok(None);
            };
            if rest.is_empty() || rest.starts_with('0') || !rest.bytes().all(|b| b.is_ascii_digit()) {
                return Ok(None);
            }
            match rest.parse::<usize>() {
                Ok(k) if k >= 1 && k <= n => Ok(Some(offset + k - 1)),
                _ => Err(n),
            }
        };
        match self {
            Scope::Poly(n) => indexed("x", n, 0),
            Scope::Exists(n) => {
                if name == "t" {
                    Ok(Some(n))
                } else {
                    indexed("x", n, 0)
                }
            }
            Scope::Kappa(n) => {
                if name == "y" {
                    Ok(Some(n))
                } else {
                    indexed("x", n, 0)
                }
            }
            Scope::Laurent(n) => match indexed("Y", n, 0)? {
                Some(i) => Ok(Some(i)),
                None => indexed("Z", n, n),
            },
            Scope::Roots(n) => {
                if name == "z" {
                    Ok(Some(n))
                } else {
                    indexed("a", n, 0)
                }
            }
            Scope::Fiber(m) => indexed("z", m, 0),
            Scope::Constant => Ok(None),
        }
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    depth: usize,
    refs: Vec<Ref>,
}

type PResult<T> = Result<T, ParseError>;

fn is_keyword(s: &str) -> bool {
    DeclKind::from_keyword(s).is_some()
        || matches!(
            s,
            "and"
                | "or"
                | "not"
                | "exists"
                | "true"
                | "false"
                | "psi"
                | "chi"
                | "ind"
                | "conj"
                | "abs"
                | "i"
                | "roots"
                | "point"
        )
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn err(&self, expected: &[&str]) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError::Syntax {
            line: t.line,
            col: t.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.tok.describe(),
        }
    }

    fn err_at(&self, at: (usize, usize), expected: &str, found: &str) -> ParseError {
        ParseError::Syntax {
            line: at.0,
            col: at.1,
            expected: vec![expected.to_string()],
            found: found.to_string(),
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if self.peek() == &tok {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&[&tok.describe()]))
        }
    }

    fn at_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn expect_word(&mut self, w: &str) -> PResult<()> {
        if self.at_word(w) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&[&format!("`{w}`")]))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err(&[what])),
        }
    }

    fn int(&mut self) -> PResult<u128> {
        match self.peek() {
            &Tok::Int(n) => {
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.err(&["an integer"])),
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.err(&["nesting depth at most 64"]));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    // ---- declarations -------------------------------------------------

    fn decl(&mut self) -> PResult<Decl> {
        let kind = match self.peek() {
            Tok::Ident(s) => DeclKind::from_keyword(s),
            _ => None,
        }
        .ok_or_else(|| self.err(&["a declaration keyword"]))?;
        self.pos += 1;
        let name = match self.peek() {
            Tok::Ident(_) => Some(self.ident("a declaration name")?),
            _ => None,
        };
        let at = self.here();
        let arity =
            usize::try_from(self.int()?).map_err(|_| self.err_at(at, "a small arity", "a huge integer"))?;
        let min_arity = if kind == DeclKind::Theta { 0 } else { 1 };
        if arity < min_arity || arity > 64 {
            return Err(ParseError::ArityMismatch {
                line: at.0,
                col: at.1,
                detail: format!("arity must be between {min_arity} and 64, got {arity}"),
            });
        }
        self.expect(Tok::Colon)?;
        let body = match kind {
            DeclKind::Poly => DeclBody::Poly(self.poly_body(arity)?),
            DeclKind::Laurent => {
                let at = self.here();
                let s = self.expr(Scope::Laurent(arity))?;
                DeclBody::Laurent(self.to_laurent(s, arity, at)?)
            }
            DeclKind::Formula => DeclBody::Formula(DefinableFormula {
                arity,
                root: self.formula(arity)?,
            }),
            DeclKind::LinMap => {
                let rows = self.rows(arity, Self::linear_row)?;
                DeclBody::LinMap(IntegralLinearMap { inputs: arity, rows })
            }
            DeclKind::MultMap => {
                let rows = self.rows(arity, Self::mult_row)?;
                DeclBody::MultMap(IntegralMultiplicativeMap { inputs: arity, rows })
            }
            DeclKind::Predicate => DeclBody::Predicate(PredicateExpr {
                arity,
                root: self.pred(arity)?,
            }),
            DeclKind::Theta => DeclBody::Theta(self.theta_body(arity)?),
            DeclKind::Kappa => DeclBody::Kappa(self.kappa_body(arity)?),
            DeclKind::Witness => DeclBody::Witness(self.witness_body(arity)?),
        };
        Ok(Decl { name, arity, body })
    }

    fn poly_body(&mut self, arity: usize) -> PResult<PolyExpr> {
        let at = self.here();
        let s = self.expr(Scope::Poly(arity))?;
        self.to_poly(s, arity, at)
    }

    fn rows(
        &mut self,
        arity: usize,
        row: fn(&mut Self, usize) -> PResult<Vec<i64>>,
    ) -> PResult<Vec<Vec<i64>>> {
        let mut rows = vec![row(self, arity)?];
        while self.peek() == &Tok::Comma {
            self.pos += 1;
            rows.push(row(self, arity)?);
        }
        Ok(rows)
    }

    fn linear_row(&mut self, arity: usize) -> PResult<Vec<i64>> {
        self.linear_row_in(Scope::Poly(arity))
    }

    fn linear_row_in(&mut self, scope: Scope) -> PResult<Vec<i64>> {
        let at = self.here();
        let s = self.expr(scope)?;
        let mut row = vec![0i64; scope.nvars()];
        for (e, c) in &s.terms {
            let ones: Vec<usize> = e
                .iter()
                .enumerate()
                .filter(|(_, &x)| x != 0)
                .map(|(i, _)| i)
                .collect();
            let coeff = integral(c).and_then(|c| i64::try_from(c).ok());
            match (ones.as_slice(), coeff) {
                ([i], Some(c)) if e[*i] == 1 => row[*i] = c,
                _ => {
                    return Err(self.err_at(
                        at,
                        "an integral linear form without constant term",
                        "another expression",
                    ))
                }
            }
        }
        Ok(row)
    }

    fn mult_row(&mut self, arity: usize) -> PResult<Vec<i64>> {
        let at = self.here();
        let s = self.expr(Scope::Poly(arity))?;
        self.monomial_exponents(&s, at)
    }

    fn monomial_exponents(&self, s: &SymPoly, at: (usize, usize)) -> PResult<Vec<i64>> {
        match s.terms.iter().collect::<Vec<_>>().as_slice() {
            [(e, c)] if c.is_one() => Ok(e.iter().map(|&x| x as i64).collect()),
            _ => Err(self.err_at(at, "a monomial with coefficient 1", "another expression")),
        }
    }

    fn kappa_body(&mut self, arity: usize) -> PResult<KappaSpec> {
        let at = self.here();
        let p = self.expr(Scope::Kappa(arity))?;
        let p = self.to_poly(p, arity + 1, at)?;
        if p.degree_in(arity).unwrap_or(0) == 0 {
            return Err(self.err_at(at, "a polynomial non-constant in `y`", "one constant in `y`"));
        }
        self.expect(Tok::FatArrow)?;
        let at = self.here();
        let q = self.expr(Scope::Kappa(arity))?;
        let q = self.to_poly(q, arity + 1, at)?;
        Ok(KappaSpec { arity, p, q })
    }

    fn theta_body(&mut self, params: usize) -> PResult<ThetaSpec> {
        let fiber = self.fiber(params)?;
        let m = fiber.dim();
        self.expect_word("psi")?;
        self.expect(Tok::LParen)?;
        let g = self.linear_row_in(Scope::Fiber(m))?;
        self.expect(Tok::RParen)?;
        self.expect_word("chi")?;
        self.expect(Tok::LParen)?;
        let at = self.here();
        let s = self.expr(Scope::Fiber(m))?;
        let h = self.monomial_exponents(&s, at)?;
        self.expect(Tok::RParen)?;
        Ok(ThetaSpec { params, fiber, g, h })
    }

    fn fiber(&mut self, params: usize) -> PResult<Fiber> {
        self.enter()?;
        let at = self.here();
        let mut branches = vec![self.fiber_branch(params)?];
        while self.peek() == &Tok::Pipe {
            self.pos += 1;
            branches.push(self.fiber_branch(params)?);
        }
        self.leave();
        if branches.len() == 1 {
            return Ok(branches.pop().unwrap());
        }
        let d = branches[0].dim();
        if branches.iter().any(|b| b.dim() != d) {
            return Err(ParseError::ArityMismatch {
                line: at.0,
                col: at.1,
                detail: "union branches must have equal dimension".into(),
            });
        }
        Ok(Fiber::Union(branches))
    }

    fn fiber_branch(&mut self, params: usize) -> PResult<Fiber> {
        let mut blocks = vec![self.fiber_block(params)?];
        while self.peek() == &Tok::Star {
            self.pos += 1;
            blocks.push(self.fiber_block(params)?);
        }
        Ok(if blocks.len() == 1 {
            blocks.pop().unwrap()
        } else {
            Fiber::Product(blocks)
        })
    }

    fn fiber_block(&mut self, params: usize) -> PResult<Fiber> {
        if self.at_word("roots") {
            self.pos += 1;
            self.expect(Tok::LParen)?;
            let at = self.here();
            let mut s = self.expr(Scope::Roots(params))?;
            if self.peek() == &Tok::Eq {
                self.pos += 1;
                let r = self.expr(Scope::Roots(params))?;
                s = s.sub(&r).ok_or_else(|| self.overflow(at))?;
            }
            self.expect(Tok::RParen)?;
            return Ok(Fiber::Roots(self.to_poly(s, params + 1, at)?));
        }
        if self.at_word("point") {
            self.pos += 1;
            self.expect(Tok::LParen)?;
            let mut coords = vec![self.constant()?];
            while self.peek() == &Tok::Comma {
                self.pos += 1;
                coords.push(self.constant()?);
            }
            self.expect(Tok::RParen)?;
            return Ok(Fiber::Point(coords));
        }
        if self.peek() == &Tok::LParen {
            self.pos += 1;
            let f = self.fiber(params)?;
            self.expect(Tok::RParen)?;
            return Ok(f);
        }
        Err(self.err(&["`roots`", "`point`", "`(`"]))
    }

    fn constant(&mut self) -> PResult<Rational> {
        let at = self.here();
        let s = self.expr(Scope::Constant)?;
        s.as_constant()
            .ok_or_else(|| self.err_at(at, "a rational constant", "an expression"))
    }

    fn witness_body(&mut self, arity: usize) -> PResult<WitnessSpec> {
        if arity != 1 {
            let (line, col) = self.here();
            return Err(ParseError::ArityMismatch {
                line,
                col,
                detail: "witness declarations have arity 1 (the variable x1 = β)".into(),
            });
        }
        let mut spec = WitnessSpec {
            min_poly: Vec::new(),
            chi_targets: Vec::new(),
            psi_targets: Vec::new(),
            tolerance: Rational::one(),
            unity: None,
            min_order: 1,
            primes: None,
        };
        let mut have_min_poly = false;
        loop {
            let at = self.here();
            let word = match self.peek() {
                Tok::Ident(w) => w.clone(),
                _ => return Err(self.err(&["a witness clause"])),
            };
            self.pos += 1;
            match word.as_str() {
                "minpoly" => {
                    let s = self.expr(Scope::Poly(1))?;
                    let p = self.to_poly(s, 1, at)?;
                    let d = p.degree_in(0).unwrap_or(0) as usize;
                    let mut c = vec![0i128; d + 1];
                    for (e, v) in p.terms() {
                        c[e[0] as usize] = *v;
                    }
                    if d == 0 || c[d] != 1 {
                        return Err(self.err_at(
                            at,
                            "a monic integer polynomial of degree >= 1",
                            "another polynomial",
                        ));
                    }
                    spec.min_poly = c;
                    have_min_poly = true;
                }
                "chi" | "psi" => {
                    let s = self.expr(Scope::Poly(1))?;
                    let poly = self.to_rat_univariate(&s, at)?;
                    self.expect(Tok::Arrow)?;
                    let t = self.angle()?;
                    if word == "chi" {
                        spec.chi_targets.push((poly, t));
                    } else {
                        spec.psi_targets.push((poly, t));
                    }
                }
                "tolerance" => {
                    let at = self.here();
                    let t = self.constant()?;
                    if t <= Rational::zero() || t > Rational::one() {
                        return Err(self.err_at(at, "a tolerance in (0, 1]", &t.to_string()));
                    }
                    spec.tolerance = t;
                }
                "unity" => {
                    let r = self.int()? as u64;
                    let at_f = self.here();
                    let f = self.int()? as u64;
                    if r == 0 || f == 0 || f > r {
                        return Err(self.err_at(at_f, "1 <= f <= R", &format!("R = {r}, f = {f}")));
                    }
                    let at = self.here();
                    let s = self.expr(Scope::Poly(1))?;
                    let lambda = self.to_rat_univariate(&s, at)?;
                    self.expect(Tok::Arrow)?;
                    let s_r = self.angle()?;
                    spec.unity = Some(UnityConstraint {
                        r,
                        f,
                        lambda,
                        target: s_r,
                    });
                }
                "order" => spec.min_order = self.int()? as u64,
                "primes" => {
                    let lo = self.int()? as u64;
                    let at = self.here();
                    let hi = self.int()? as u64;
                    if hi < lo {
                        return Err(self.err_at(at, "an upper bound >= the lower bound", &hi.to_string()));
                    }
                    spec.primes = Some((lo, hi));
                }
                _ => {
                    self.pos -= 1;
                    return Err(self.err(&[
                        "`minpoly`",
                        "`chi`",
                        "`psi`",
                        "`tolerance`",
                        "`unity`",
                        "`order`",
                        "`primes`",
                    ]));
                }
            }
            if self.peek() == &Tok::Comma {
                self.pos += 1;
            } else {
                break;
            }
        }
        if !have_min_poly {
            return Err(self.err(&["a `minpoly` clause"]));
        }
        Ok(spec)
    }

    /// A rational angle, reduced into `[0, 1)`.
    fn angle(&mut self) -> PResult<Rational> {
        let c = self.constant()?;
        Ok(c - c.floor())
    }

    // ---- arithmetic expressions ----------------------------------------

    fn overflow(&self, at: (usize, usize)) -> ParseError {
        self.err_at(
            at,
            "coefficients within the 128-bit range",
            "an overflowing expression",
        )
    }

    fn expr(&mut self, scope: Scope) -> PResult<SymPoly> {
        self.enter()?;
        let mut acc = self.term(scope)?;
        loop {
            let at = self.here();
            match self.peek() {
                Tok::Plus => {
                    self.pos += 1;
                    let t = self.term(scope)?;
                    acc = acc.add(&t).ok_or_else(|| self.overflow(at))?;
                }
                Tok::Minus => {
                    self.pos += 1;
                    let t = self.term(scope)?;
                    acc = acc.sub(&t).ok_or_else(|| self.overflow(at))?;
                }
                _ => break,
            }
        }
        self.leave();
        Ok(acc)
    }

    fn starts_factor(&self, scope: Scope) -> bool {
        match self.peek() {
            Tok::Int(_) | Tok::LParen => true,
            Tok::Ident(s) => !matches!(scope.lookup(s), Ok(None)),
            _ => false,
        }
    }

    fn term(&mut self, scope: Scope) -> PResult<SymPoly> {
        let mut acc = self.unary(scope)?;
        loop {
            let at = self.here();
            match self.peek() {
                Tok::Star => {
                    self.pos += 1;
                    let f = self.unary(scope)?;
                    acc = acc.mul(&f).ok_or_else(|| self.overflow(at))?;
                }
                Tok::Slash => {
                    self.pos += 1;
                    let at_d = self.here();
                    let f = self.unary(scope)?;
                    match f.as_constant() {
                        Some(c) if !c.is_zero() => {
                            acc = acc.scale(c.recip()).ok_or_else(|| self.overflow(at))?;
                        }
                        _ => {
                            return Err(self.err_at(at_d, "a nonzero constant divisor", "another expression"))
                        }
                    }
                }
                _ if self.starts_factor(scope) => {
                    let f = self.unary(scope)?;
                    acc = acc.mul(&f).ok_or_else(|| self.overflow(at))?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self, scope: Scope) -> PResult<SymPoly> {
        match self.peek() {
            Tok::Minus => {
                self.pos += 1;
                self.enter()?;
                let v = self.unary(scope)?.neg();
                self.leave();
                Ok(v)
            }
            Tok::Plus => {
                self.pos += 1;
                self.enter()?;
                let v = self.unary(scope);
                self.leave();
                v
            }
            _ => self.power(scope),
        }
    }

    fn power(&mut self, scope: Scope) -> PResult<SymPoly> {
        let base = self.primary(scope)?;
        if self.peek() != &Tok::Caret {
            return Ok(base);
        }
        self.pos += 1;
        let neg = if self.peek() == &Tok::Minus {
            self.pos += 1;
            true
        } else {
            false
        };
        let at = self.here();
        let k = self.int()?;
        if k > 10_000 {
            return Err(self.err_at(at, "an exponent at most 10000", &k.to_string()));
        }
        let k = if neg { -(k as i64) } else { k as i64 };
        base.pow(k).ok_or_else(|| {
            if neg {
                self.err_at(at, "a negative power of a single nonzero term", "another base")
            } else {
                self.overflow(at)
            }
        })
    }

    fn primary(&mut self, scope: Scope) -> PResult<SymPoly> {
        let n = scope.nvars();
        let at = self.here();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.pos += 1;
                Ok(SymPoly::constant(n, Rational::from_integer(v as i128)))
            }
            Tok::LParen => {
                self.pos += 1;
                let e = self.expr(scope)?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(s) => match scope.lookup(&s) {
                Ok(Some(i)) => {
                    self.pos += 1;
                    Ok(SymPoly::var(n, i))
                }
                Err(limit) => Err(ParseError::ArityMismatch {
                    line: at.0,
                    col: at.1,
                    detail: format!("variable `{s}` exceeds the declared arity {limit}"),
                }),
                Ok(None) => Err(self.err(&["a number", "a variable", "`(`"])),
            },
            _ => Err(self.err(&["a number", "a variable", "`(`"])),
        }
    }

    fn to_poly(&self, s: SymPoly, arity: usize, at: (usize, usize)) -> PResult<PolyExpr> {
        if s.has_negative_exponent() {
            return Err(self.err_at(at, "non-negative exponents", "a negative exponent"));
        }
        let mut terms = Vec::with_capacity(s.terms.len());
        for (e, c) in s.terms {
            let c = integral(&c).ok_or_else(|| self.err_at(at, "integer coefficients", &c.to_string()))?;
            terms.push((e.into_iter().map(|x| x as u32).collect(), c));
        }
        Ok(PolyExpr::new(arity, terms))
    }

    fn to_laurent(&self, s: SymPoly, n: usize, _at: (usize, usize)) -> PResult<LaurentPoly> {
        Ok(LaurentPoly::new(n, s.terms))
    }

    fn to_rat_univariate(&self, s: &SymPoly, at: (usize, usize)) -> PResult<Vec<Rational>> {
        if s.has_negative_exponent() {
            return Err(self.err_at(at, "non-negative exponents", "a negative exponent"));
        }
        let d = s.terms.keys().map(|e| e[0]).max().unwrap_or(0) as usize;
        let mut c = vec![Rational::zero(); d + 1];
        for (e, v) in &s.terms {
            c[e[0] as usize] = *v;
        }
        while c.len() > 1 && c.last().is_some_and(|x| x.is_zero()) {
            c.pop();
        }
        Ok(c)
    }

    // ---- formulas --------------------------------------------------------

    fn formula(&mut self, arity: usize) -> PResult<Formula> {
        self.enter()?;
        let mut parts = vec![self.and_formula(arity)?];
        while self.at_word("or") {
            self.pos += 1;
            parts.push(self.and_formula(arity)?);
        }
        self.leave();
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::Or(parts)
        })
    }

    fn and_formula(&mut self, arity: usize) -> PResult<Formula> {
        let mut parts = vec![self.not_formula(arity)?];
        while self.at_word("and") {
            self.pos += 1;
            parts.push(self.not_formula(arity)?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::And(parts)
        })
    }

    fn not_formula(&mut self, arity: usize) -> PResult<Formula> {
        if self.at_word("not") {
            self.pos += 1;
            self.enter()?;
            let f = self.not_formula(arity)?;
            self.leave();
            return Ok(Formula::not(f));
        }
        self.prim_formula(arity)
    }

    fn prim_formula(&mut self, arity: usize) -> PResult<Formula> {
        if self.at_word("true") {
            self.pos += 1;
            return Ok(Formula::True);
        }
        if self.at_word("false") {
            self.pos += 1;
            return Ok(Formula::False);
        }
        if self.at_word("exists") {
            self.pos += 1;
            self.expect_word("t")?;
            self.expect(Tok::LParen)?;
            let at = self.here();
            let lhs = self.expr(Scope::Exists(arity))?;
            self.expect(Tok::Eq)?;
            let rhs = self.expr(Scope::Exists(arity))?;
            self.expect(Tok::RParen)?;
            let s = lhs.sub(&rhs).ok_or_else(|| self.overflow(at))?;
            return Ok(Formula::Exists(self.to_poly(s, arity + 1, at)?));
        }
        if self.peek() == &Tok::LParen {
            // a parenthesised formula, unless it turns out to open an atom
            let save = (self.pos, self.depth);
            self.pos += 1;
            if let Ok(f) = self.formula(arity) {
                if self.peek() == &Tok::RParen {
                    let after = self.peek_at(1).clone();
                    let continues_atom = matches!(
                        after,
                        Tok::Eq
                            | Tok::Neq
                            | Tok::Plus
                            | Tok::Minus
                            | Tok::Star
                            | Tok::Slash
                            | Tok::Caret
                            | Tok::LParen
                            | Tok::Int(_)
                    ) || matches!(&after, Tok::Ident(s) if !is_keyword(s));
                    if !continues_atom {
                        self.pos += 1;
                        return Ok(f);
                    }
                }
            }
            (self.pos, self.depth) = save;
        }
        self.atom(arity)
    }

    fn atom(&mut self, arity: usize) -> PResult<Formula> {
        let at = self.here();
        let lhs = self.expr(Scope::Poly(arity))?;
        let negate = match self.peek() {
            Tok::Eq => false,
            Tok::Neq => true,
            _ => return Err(self.err(&["`=`", "`!=`"])),
        };
        self.pos += 1;
        let rhs = self.expr(Scope::Poly(arity))?;
        let s = lhs.sub(&rhs).ok_or_else(|| self.overflow(at))?;
        let atom = Formula::Atom(self.to_poly(s, arity, at)?);
        Ok(if negate { Formula::not(atom) } else { atom })
    }

    // ---- predicates ------------------------------------------------------

    fn pred(&mut self, arity: usize) -> PResult<PredExpr> {
        self.enter()?;
        let mut acc = self.pred_term(arity)?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.pos += 1;
                    acc = PredExpr::Add(Box::new(acc), Box::new(self.pred_term(arity)?));
                }
                Tok::Minus => {
                    self.pos += 1;
                    acc = PredExpr::Sub(Box::new(acc), Box::new(self.pred_term(arity)?));
                }
                _ => break,
            }
        }
        self.leave();
        Ok(acc)
    }

    fn pred_term(&mut self, arity: usize) -> PResult<PredExpr> {
        let mut acc = self.pred_unary(arity)?;
        while self.peek() == &Tok::Star {
            self.pos += 1;
            acc = PredExpr::Mul(Box::new(acc), Box::new(self.pred_unary(arity)?));
        }
        Ok(acc)
    }

    fn pred_unary(&mut self, arity: usize) -> PResult<PredExpr> {
        if self.peek() == &Tok::Minus {
            self.pos += 1;
            self.enter()?;
            let inner = self.pred_unary(arity)?;
            self.leave();
            return Ok(match inner {
                PredExpr::Const(c) => PredExpr::Const(-c),
                other => PredExpr::Neg(Box::new(other)),
            });
        }
        self.pred_primary(arity)
    }

    fn pred_primary(&mut self, arity: usize) -> PResult<PredExpr> {
        let at = self.here();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.pos += 1;
                let mut c = Rational::from_integer(n as i128);
                if self.peek() == &Tok::Slash {
                    self.pos += 1;
                    let at_d = self.here();
                    let d = self.int()?;
                    if d == 0 {
                        return Err(self.err_at(at_d, "a nonzero denominator", "0"));
                    }
                    c /= Rational::from_integer(d as i128);
                }
                Ok(PredExpr::Const(c))
            }
            Tok::LParen => {
                self.pos += 1;
                let e = self.pred(arity)?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(w) => {
                self.pos += 1;
                match w.as_str() {
                    "i" => Ok(PredExpr::I),
                    "psi" | "chi" => {
                        self.expect(Tok::LParen)?;
                        let t = self.fterm(arity)?;
                        self.expect(Tok::RParen)?;
                        Ok(if w == "psi" {
                            PredExpr::Psi(t)
                        } else {
                            PredExpr::Chi(t)
                        })
                    }
                    "ind" => {
                        self.expect(Tok::LParen)?;
                        let f = self.formula(arity)?;
                        self.expect(Tok::RParen)?;
                        Ok(PredExpr::Ind(f))
                    }
                    "conj" | "abs" => {
                        self.expect(Tok::LParen)?;
                        let e = Box::new(self.pred(arity)?);
                        self.expect(Tok::RParen)?;
                        Ok(if w == "conj" {
                            PredExpr::Conj(e)
                        } else {
                            PredExpr::Abs(e)
                        })
                    }
                    "theta" => {
                        let name = self.ident("a theta name")?;
                        self.expect(Tok::LParen)?;
                        let mut args = Vec::new();
                        if self.peek() != &Tok::RParen {
                            args.push(self.fterm(arity)?);
                            while self.peek() == &Tok::Comma {
                                self.pos += 1;
                                args.push(self.fterm(arity)?);
                            }
                        }
                        self.expect(Tok::RParen)?;
                        self.refs.push(Ref {
                            kind: RefKind::Theta,
                            name: name.clone(),
                            nargs: args.len(),
                            line: at.0,
                            col: at.1,
                        });
                        Ok(PredExpr::Theta { name, args })
                    }
                    _ => {
                        self.pos -= 1;
                        Err(self.err(&["a predicate term"]))
                    }
                }
            }
            _ => Err(self.err(&["a predicate term"])),
        }
    }

    fn fterm(&mut self, arity: usize) -> PResult<FTerm> {
        let at = self.here();
        if self.at_word("kappa") {
            self.pos += 1;
            let name = self.ident("a kappa name")?;
            self.expect(Tok::LParen)?;
            let mut args = vec![self.poly_body(arity)?];
            while self.peek() == &Tok::Comma {
                self.pos += 1;
                args.push(self.poly_body(arity)?);
            }
            self.expect(Tok::RParen)?;
            self.refs.push(Ref {
                kind: RefKind::Kappa,
                name: name.clone(),
                nargs: args.len(),
                line: at.0,
                col: at.1,
            });
            return Ok(FTerm::Kappa { name, args });
        }
        let s = self.expr(Scope::Poly(arity))?;
        if s.has_negative_exponent() {
            Ok(FTerm::Monomial(self.monomial_exponents(&s, at)?))
        } else {
            Ok(FTerm::Poly(self.to_poly(s, arity, at)?))
        }
    }
}

fn integral(c: &Rational) -> Option<i128> {
    c.is_integer().then(|| c.to_integer())
}
