//! Exact counts of definable sets, dimension and multiplicity fitting,
//! character averages over definable sets, the Fubini identity and the
//! decomposition of a predicate by character values.

use std::collections::{BTreeMap, HashSet};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::characters::{
    character_order, chi_eval, psi_eval, AdditiveCharacter, CharacterValue, MultiplicativeCharacter,
    RationalAngle,
};
use crate::charsums::{ChiRule, PsiRule};
use crate::field::{make_field, FieldElement, FiniteField};
use crate::formulas::{
    CompiledFormula, CompiledPredicate, DefinableFormula, Env, EvalError, FTerm, Formula, PolyExpr,
    PredicateExpr,
};

/// Largest character order accepted by [`case_decompose`] by default.
pub const DEFAULT_MAX_ORDER: u64 = 12;

/// Largest spread of `log count / log q` tolerated over the fitting window.
pub const DIMENSION_SPREAD: f64 = 0.4;

/// Largest denominator used when recognising the multiplicity.
pub const MU_MAX_DEN: i64 = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("enumeration needs {needed} evaluations, budget is {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error("fitting needs at least 4 fields, got {0}")]
    TooFewPrimes(usize),
    #[error("log-slopes disagree by {spread:.3} (> {DIMENSION_SPREAD})")]
    InconsistentDimension { spread: f64 },
    #[error("character order {order} exceeds the bound {bound}")]
    OrderTooLarge { order: u64, bound: u64 },
    #[error("the set has {expected} free variable(s) but the predicate expects {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("field construction failed: {0}")]
    Field(String),
}

fn field_of(p: u64, e: u32) -> Result<FiniteField, MeasureError> {
    make_field(p, e).map_err(|err| MeasureError::Field(err.to_string()))
}

fn check_budget(field: &FiniteField, n: usize, budget: u64) -> Result<u64, MeasureError> {
    let total = u64::try_from((field.q() as u128).saturating_pow(n as u32)).unwrap_or(u64::MAX);
    if total > budget {
        return Err(MeasureError::BudgetExceeded {
            needed: total,
            budget,
        });
    }
    Ok(total)
}

fn decode(elems: &[FieldElement], n: usize, mut idx: u64, params: &[FieldElement]) -> Vec<FieldElement> {
    let q = elems.len() as u64;
    let mut pt = Vec::with_capacity(n + params.len());
    for _ in 0..n {
        pt.push(elems[(idx % q) as usize]);
        idx /= q;
    }
    pt.extend_from_slice(params);
    pt
}

/// Points `x̄ ∈ F^n` with `φ(x̄, ā)`, sorted. `n` is the arity of `φ` minus
/// the number of parameters. Returned points include the parameters.
pub fn definable_points(
    phi: &DefinableFormula,
    field: &FiniteField,
    params: &[FieldElement],
    budget: u64,
) -> Result<Vec<Vec<FieldElement>>, MeasureError> {
    let n = free_vars(phi, params)?;
    let total = check_budget(field, n, budget)?;
    let elems: Vec<FieldElement> = field.elements().collect();
    let f = CompiledFormula::new(field, &phi.root);
    let mut pts: Vec<Vec<FieldElement>> = (0..total)
        .into_par_iter()
        .filter_map(|i| {
            let pt = decode(&elems, n, i, params);
            f.eval(field, &pt).then_some(pt)
        })
        .collect();
    pts.sort_unstable();
    Ok(pts)
}

pub fn count_definable(
    phi: &DefinableFormula,
    field: &FiniteField,
    params: &[FieldElement],
    budget: u64,
) -> Result<u64, MeasureError> {
    let n = free_vars(phi, params)?;
    let total = check_budget(field, n, budget)?;
    let elems: Vec<FieldElement> = field.elements().collect();
    let f = CompiledFormula::new(field, &phi.root);
    Ok((0..total)
        .into_par_iter()
        .filter(|&i| f.eval(field, &decode(&elems, n, i, params)))
        .count() as u64)
}

fn free_vars(phi: &DefinableFormula, params: &[FieldElement]) -> Result<usize, MeasureError> {
    phi.arity
        .checked_sub(params.len())
        .ok_or(MeasureError::ArityMismatch {
            expected: phi.arity,
            got: params.len(),
        })
}

fn ints(field: &FiniteField, v: &[i128]) -> Vec<FieldElement> {
    v.iter().map(|&x| field.from_int(x)).collect()
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// The rational of least denominator (at most [`MU_MAX_DEN`]) within `w`
/// of `x`, falling back to the nearest such rational.
pub fn simplest_rational(x: f64, w: f64) -> (i64, i64) {
    for den in 1..=MU_MAX_DEN {
        let lo = ((x - w) * den as f64).ceil().max(1.0) as i64;
        if lo as f64 <= (x + w) * den as f64 {
            return (lo, den);
        }
    }
    let mut best = (1, 1);
    let mut err = f64::INFINITY;
    for den in 1..=MU_MAX_DEN {
        let num = ((x * den as f64).round() as i64).max(1);
        let e = (num as f64 / den as f64 - x).abs();
        if e < err {
            err = e;
            best = (num, den);
        }
    }
    let g = num_integer::gcd(best.0, best.1);
    (best.0 / g, best.1 / g)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub q: u64,
    pub count: u64,
    /// `|count − μ q^d| / q^{d−1/2}`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeEstimate {
    pub d: u32,
    pub mu_num: i64,
    pub mu_den: i64,
    /// Median of `count/q^d` over the fitting window.
    pub mu_raw: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub residuals: Vec<Residual>,
}

impl SizeEstimate {
    pub fn mu(&self) -> f64 {
        self.mu_num as f64 / self.mu_den as f64
    }
}

/// Fits `|φ(F_q, ā)| ≈ μ q^d` over the given fields. Parameters are integers
/// reduced into each field.
///
/// The fit uses the larger half of the fields. `d` is the rounded median of
/// `log count / log q`; `μ` is the simplest rational within
/// `max(spread/2, q_max^{−1/2}/2)` of the median of `count/q^d`.
pub fn count_and_fit(
    phi: &DefinableFormula,
    params: &[i128],
    fields: &[(u64, u32)],
    budget: u64,
) -> Result<SizeEstimate, MeasureError> {
    if fields.len() < 4 {
        return Err(MeasureError::TooFewPrimes(fields.len()));
    }
    let mut counts = fields
        .iter()
        .map(|&(p, e)| {
            let k = field_of(p, e)?;
            Ok((k.q(), count_definable(phi, &k, &ints(&k, params), budget)?))
        })
        .collect::<Result<Vec<(u64, u64)>, MeasureError>>()?;
    counts.sort_unstable();
    fit_counts(&counts)
}

/// The fitting step of [`count_and_fit`] on precomputed `(q, count)` pairs.
pub fn fit_counts(counts: &[(u64, u64)]) -> Result<SizeEstimate, MeasureError> {
    if counts.len() < 4 {
        return Err(MeasureError::TooFewPrimes(counts.len()));
    }
    let mut counts = counts.to_vec();
    counts.sort_unstable();
    let finish = |d: u32, mu_num: i64, mu_den: i64, mu_raw: f64| {
        let mu = mu_num as f64 / mu_den as f64;
        let residuals: Vec<Residual> = counts
            .iter()
            .map(|&(q, count)| {
                let qf = q as f64;
                Residual {
                    q,
                    count,
                    residual: (count as f64 - mu * qf.powi(d as i32)).abs() / qf.powf(d as f64 - 0.5),
                }
            })
            .collect();
        let c = residuals.iter().map(|r| r.residual).fold(0.0, f64::max);
        SizeEstimate {
            d,
            mu_num,
            mu_den,
            mu_raw,
            c,
            residuals,
        }
    };
    if counts.iter().all(|&(_, c)| c == 0) {
        return Ok(finish(0, 0, 1, 0.0));
    }
    let window = &counts[counts.len() / 2..];
    if window.iter().all(|&(_, c)| c == 0) {
        return Ok(finish(0, 0, 1, 0.0));
    }
    if window.iter().any(|&(_, c)| c == 0) {
        return Err(MeasureError::InconsistentDimension {
            spread: f64::INFINITY,
        });
    }
    let mut slopes: Vec<f64> = window
        .iter()
        .map(|&(q, c)| (c as f64).ln() / (q as f64).ln())
        .collect();
    let spread = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - slopes.iter().copied().fold(f64::INFINITY, f64::min);
    if spread > DIMENSION_SPREAD {
        return Err(MeasureError::InconsistentDimension { spread });
    }
    let d = median(&mut slopes).round().max(0.0) as u32;
    let mut ratios: Vec<f64> = window
        .iter()
        .map(|&(q, c)| c as f64 / (q as f64).powi(d as i32))
        .collect();
    let ratio_spread = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let mu_raw = median(&mut ratios);
    let q_max = window.last().unwrap().0 as f64;
    let (num, den) = simplest_rational(mu_raw, (ratio_spread / 2.0).max(0.5 / q_max.sqrt()));
    Ok(finish(d, num, den, mu_raw))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralValue {
    pub q: u64,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
    /// `|B_ā(F_q)|`.
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralReport {
    pub values: Vec<IntegralValue>,
    /// Fields skipped because the χ rule has no character there.
    pub skipped: Vec<u64>,
    /// `max |f_q|` over the larger half of the fields.
    pub tail_max: f64,
    /// Least-squares slope of `log |f_q|` against `log q`, over the fields
    /// where `|f_q| > 1e-12`.
    pub slope: Option<f64>,
}

/// `Σ_{x̄∈B} P(x̄, ā)` in point order, with the number of points.
fn sum_over(
    pred: &CompiledPredicate,
    field: &FiniteField,
    points: &[Vec<FieldElement>],
    psi: &AdditiveCharacter,
    chi: &MultiplicativeCharacter,
) -> Result<Complex64, MeasureError> {
    let mut s = Complex64::new(0.0, 0.0);
    for x in points {
        s += pred.eval(field, x, psi, chi)?;
    }
    Ok(s)
}

fn average(sum: Complex64, n: usize) -> Complex64 {
    if n == 0 {
        Complex64::new(0.0, 0.0)
    } else {
        sum / n as f64
    }
}

/// The average of `P` over `B` at one field. Both take the free variables
/// of `B` followed by the parameters.
#[allow(clippy::too_many_arguments)]
pub fn integrate_at(
    pred: &PredicateExpr,
    env: &Env,
    b: &DefinableFormula,
    field: &FiniteField,
    params: &[FieldElement],
    psi: &AdditiveCharacter,
    chi: &MultiplicativeCharacter,
    budget: u64,
) -> Result<IntegralValue, MeasureError> {
    if pred.arity != b.arity {
        return Err(MeasureError::ArityMismatch {
            expected: b.arity,
            got: pred.arity,
        });
    }
    let points = definable_points(b, field, params, budget)?;
    let cp = CompiledPredicate::new(field, pred, env)?;
    let f = average(sum_over(&cp, field, &points, psi, chi)?, points.len());
    Ok(IntegralValue {
        q: field.q(),
        re: f.re,
        im: f.im,
        abs: f.norm(),
        count: points.len() as u64,
    })
}

/// [`integrate_at`] over several fields, in parallel, with trend statistics.
#[allow(clippy::too_many_arguments)]
pub fn integrate_predicate(
    pred: &PredicateExpr,
    env: &Env,
    b: &DefinableFormula,
    params: &[i128],
    fields: &[(u64, u32)],
    psi_rule: PsiRule,
    chi_rule: ChiRule,
    budget: u64,
) -> Result<IntegralReport, MeasureError> {
    let results: Vec<Result<Option<IntegralValue>, MeasureError>> = fields
        .par_iter()
        .map(|&(p, e)| {
            let k = field_of(p, e)?;
            let Some(chi) = chi_rule.resolve(&k) else {
                return Ok(None);
            };
            let psi = psi_rule.resolve(&k);
            integrate_at(pred, env, b, &k, &ints(&k, params), &psi, &chi, budget).map(Some)
        })
        .collect();
    let mut values = Vec::new();
    let mut skipped = Vec::new();
    for (r, &(p, e)) in results.into_iter().zip(fields) {
        match r? {
            Some(v) => values.push(v),
            None => skipped.push(p.pow(e)),
        }
    }
    Ok(IntegralReport::from_values(values, skipped))
}

impl IntegralReport {
    /// Sorts by `q` and derives the tail maximum and the log-log slope.
    pub fn from_values(mut values: Vec<IntegralValue>, skipped: Vec<u64>) -> Self {
        values.sort_by_key(|v| v.q);
        let tail_max = values[values.len() / 2..]
            .iter()
            .map(|v| v.abs)
            .fold(0.0, f64::max);
        let pts: Vec<(f64, f64)> = values
            .iter()
            .filter(|v| v.abs > 1e-12)
            .map(|v| ((v.q as f64).ln(), v.abs.ln()))
            .collect();
        IntegralReport {
            slope: least_squares_slope(&pts),
            values,
            skipped,
            tail_max,
        }
    }
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FubiniReport {
    pub q: u64,
    pub lhs_re: f64,
    pub lhs_im: f64,
    pub rhs_re: f64,
    pub rhs_im: f64,
    pub delta: f64,
    /// Size of the projection of `B` onto the outer block.
    pub projection_size: u64,
    /// Distinct sizes of the nonempty fibers, ascending.
    pub fiber_sizes: Vec<u64>,
    /// All nonempty fibers have the same size.
    pub hypothesis_holds: bool,
}

/// Compares the average of `P` over `B` with the iterated average: outer
/// over the projection of `B` onto its first `outer` coordinates, inner
/// over each fiber.
#[allow(clippy::too_many_arguments)]
pub fn fubini_check(
    pred: &PredicateExpr,
    env: &Env,
    b: &DefinableFormula,
    outer: usize,
    field: &FiniteField,
    params: &[FieldElement],
    psi: &AdditiveCharacter,
    chi: &MultiplicativeCharacter,
    budget: u64,
) -> Result<FubiniReport, MeasureError> {
    if pred.arity != b.arity {
        return Err(MeasureError::ArityMismatch {
            expected: b.arity,
            got: pred.arity,
        });
    }
    let points = definable_points(b, field, params, budget)?;
    let cp = CompiledPredicate::new(field, pred, env)?;
    let lhs = average(sum_over(&cp, field, &points, psi, chi)?, points.len());
    let outer = outer.min(b.arity - params.len());
    let mut fibers: BTreeMap<&[FieldElement], Vec<Vec<FieldElement>>> = BTreeMap::new();
    for x in &points {
        fibers.entry(&x[..outer]).or_default().push(x.clone());
    }
    let mut outer_sum = Complex64::new(0.0, 0.0);
    let mut sizes: Vec<u64> = Vec::new();
    for fiber in fibers.values() {
        outer_sum += average(sum_over(&cp, field, fiber, psi, chi)?, fiber.len());
        sizes.push(fiber.len() as u64);
    }
    let rhs = average(outer_sum, fibers.len());
    sizes.sort_unstable();
    sizes.dedup();
    Ok(FubiniReport {
        q: field.q(),
        lhs_re: lhs.re,
        lhs_im: lhs.im,
        rhs_re: rhs.re,
        rhs_im: rhs.im,
        delta: (lhs - rhs).norm(),
        projection_size: fibers.len() as u64,
        hypothesis_holds: sizes.len() <= 1,
        fiber_sizes: sizes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    /// Value of each `chi(...)` occurrence, in evaluation order.
    pub values: Vec<CharacterValue>,
    pub points: Vec<Vec<FieldElement>>,
    /// Ring formula for the cell; built over prime fields for polynomial
    /// and monomial arguments.
    #[serde(skip)]
    pub formula: Option<DefinableFormula>,
    /// The formula defines exactly `points` within `F^n`.
    pub formula_matches: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdditiveCosets {
    pub q: u64,
    /// Number of level sets of `Ψ`.
    pub classes: u64,
    /// `q/p`, the size of the trace kernel.
    pub class_size: u64,
    /// Every level set is `a + c⁻¹·{y^p − y}` for the twist `c`.
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub q: u64,
    pub order: u64,
    pub cells: Vec<Cell>,
    pub direct_re: f64,
    pub direct_im: f64,
    pub reassembled_re: f64,
    pub reassembled_im: f64,
    pub delta: f64,
    pub additive: AdditiveCosets,
}

/// Splits `B` by the tuple of values of the `chi(...)` occurrences of `P`,
/// builds an `r`-th power residue formula for each cell and re-evaluates
/// the average with those values held constant per cell.
#[allow(clippy::too_many_arguments)]
pub fn case_decompose(
    pred: &PredicateExpr,
    env: &Env,
    b: &DefinableFormula,
    field: &FiniteField,
    params: &[FieldElement],
    psi: &AdditiveCharacter,
    chi: &MultiplicativeCharacter,
    max_order: u64,
    budget: u64,
) -> Result<Decomposition, MeasureError> {
    let order = character_order(field, chi);
    if order > max_order {
        return Err(MeasureError::OrderTooLarge {
            order,
            bound: max_order,
        });
    }
    if pred.arity != b.arity {
        return Err(MeasureError::ArityMismatch {
            expected: b.arity,
            got: pred.arity,
        });
    }
    let points = definable_points(b, field, params, budget)?;
    let cp = CompiledPredicate::new(field, pred, env)?;
    let direct = average(sum_over(&cp, field, &points, psi, chi)?, points.len());

    let mut groups: BTreeMap<Vec<CharacterValue>, Vec<Vec<FieldElement>>> = BTreeMap::new();
    for x in &points {
        let key = cp
            .chi_arguments(field, x)
            .into_iter()
            .map(|a| chi_eval(field, chi, a))
            .collect();
        groups.entry(key).or_default().push(x.clone());
    }

    let terms = pred.root.chi_terms();
    let universe = if field.e() == 1 {
        let all = DefinableFormula {
            arity: b.arity,
            root: Formula::True,
        };
        Some(definable_points(&all, field, params, budget)?)
    } else {
        None
    };

    let mut reassembled = Complex64::new(0.0, 0.0);
    let mut cells = Vec::with_capacity(groups.len());
    for (values, cell_points) in groups {
        for x in &cell_points {
            reassembled += cp.eval_with(field, x, psi, chi, &mut |k, _| values[k])?;
        }
        let formula = universe.as_ref().and_then(|_| {
            let mut conj = vec![b.root.clone()];
            for (t, v) in terms.iter().zip(&values) {
                conj.push(residue_condition(field, chi, order, t, *v, b.arity)?);
            }
            Some(DefinableFormula {
                arity: b.arity,
                root: Formula::And(conj),
            })
        });
        let formula_matches = formula.as_ref().zip(universe.as_ref()).map(|(f, all)| {
            let cf = CompiledFormula::new(field, &f.root);
            let defined: Vec<&Vec<FieldElement>> = all.iter().filter(|x| cf.eval(field, x)).collect();
            defined.len() == cell_points.len() && defined.iter().zip(&cell_points).all(|(a, b)| *a == b)
        });
        cells.push(Cell {
            values,
            points: cell_points,
            formula,
            formula_matches,
        });
    }
    let reassembled = average(reassembled, points.len());
    Ok(Decomposition {
        q: field.q(),
        order,
        cells,
        direct_re: direct.re,
        direct_im: direct.im,
        reassembled_re: reassembled.re,
        reassembled_im: reassembled.im,
        delta: (direct - reassembled).norm(),
        additive: additive_cosets(field, psi),
    })
}

fn lift(p: &PolyExpr) -> PolyExpr {
    PolyExpr::new(
        p.arity() + 1,
        p.terms().iter().map(|(e, c)| {
            let mut e = e.clone();
            e.push(0);
            (e, *c)
        }),
    )
}

fn monomial(arity: usize, exps: impl IntoIterator<Item = (usize, u32)>) -> PolyExpr {
    let mut e = vec![0u32; arity];
    for (i, k) in exps {
        e[i] = k;
    }
    PolyExpr::new(arity, [(e, 1)])
}

/// `{x̄ : χ(a(x̄)) = v}` as a ring formula over a prime field: `a = 0` for
/// `v = 0`, otherwise `a ≠ 0 ∧ ∃t c·t^r = a` with `χ(c) = v`.
fn residue_condition(
    field: &FiniteField,
    chi: &MultiplicativeCharacter,
    order: u64,
    term: &FTerm,
    v: CharacterValue,
    arity: usize,
) -> Option<Formula> {
    let (vanish, residue) = match term {
        FTerm::Poly(p) => (p.clone(), p.clone()),
        FTerm::Monomial(e) => {
            let support = e.iter().enumerate().filter(|(_, &k)| k != 0).map(|(i, _)| (i, 1));
            let reduced = e
                .iter()
                .enumerate()
                .map(|(i, &k)| (i, k.rem_euclid(order as i64) as u32));
            (monomial(arity, support), monomial(arity, reduced))
        }
        FTerm::Kappa { .. } => return None,
    };
    if v.is_zero() {
        return Some(Formula::Atom(vanish));
    }
    let c = field
        .nonzero_elements()
        .find(|&c| chi_eval(field, chi, c) == v)
        .expect("every value of χ is attained");
    let mut power = vec![0u32; arity + 1];
    power[arity] = order as u32;
    let ct = PolyExpr::new(arity + 1, [(power, c.encoding() as i128)]);
    Some(Formula::And(vec![
        Formula::not(Formula::Atom(vanish)),
        Formula::Exists(ct.sub(&lift(&residue))),
    ]))
}

/// Checks that the level sets of `Ψ_c` are exactly the translates of
/// `c⁻¹·{y^p − y : y ∈ F_q}`.
pub fn additive_cosets(field: &FiniteField, psi: &AdditiveCharacter) -> AdditiveCosets {
    let q = field.q();
    let p = field.p();
    let class_size = q / p;
    if psi.is_trivial() {
        return AdditiveCosets {
            q,
            classes: 1,
            class_size,
            exact: false,
        };
    }
    let image: HashSet<FieldElement> = field.elements().map(|y| field.sub(field.pow(y, p), y)).collect();
    let mut classes: BTreeMap<RationalAngle, Vec<FieldElement>> = BTreeMap::new();
    for x in field.elements() {
        classes.entry(psi_eval(field, psi, x)).or_default().push(x);
    }
    let exact = image.len() as u64 == class_size
        && classes.values().all(|class| {
            let a = class[0];
            class.len() as u64 == class_size
                && class
                    .iter()
                    .all(|&x| image.contains(&field.mul(psi.twist, field.sub(x, a))))
        });
    AdditiveCosets {
        q,
        classes: classes.len() as u64,
        class_size,
        exact,
    }
}
