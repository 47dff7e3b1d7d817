//! Character sums over varieties, the Weil-bound scan, the finite form of
//! the axiom-(4) inequality, and the density probe for diagonal images.

use std::collections::BTreeMap;

use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::characters::{
    chi_eval, psi_eval, AdditiveCharacter, CharacterValue, MultiplicativeCharacter, RationalAngle,
};
use crate::field::{make_field, FieldElement, FiniteField};
use crate::formulas::{
    eval_linear_row, eval_mult_row, split_laurent_monomials, CompiledPoly, IntegralLinearMap,
    IntegralMultiplicativeMap, LaurentPoly, PolyExpr,
};
use crate::geometry::{
    containment_search, enumerate_points, AffineVariety, ContainmentMode, GeometryError, Witness,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CharSumError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("h is not real-valued on the torus")]
    NotRealValued,
    #[error("h has a constant term")]
    HasConstantTerm,
    #[error("h has {got} torus blocks but the curve lives in dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("field construction failed: {0}")]
    Field(String),
}

/// Sums `Σ count·e(angle)` in angle order, so the result does not depend
/// on the order in which terms were produced.
#[derive(Debug, Default, Clone)]
pub struct AngleSum {
    counts: BTreeMap<RationalAngle, u64>,
}

impl AngleSum {
    pub fn add(&mut self, a: RationalAngle) {
        *self.counts.entry(a).or_insert(0) += 1;
    }

    pub fn value(&self) -> Complex64 {
        self.counts.iter().map(|(a, &c)| a.to_complex() * c as f64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharSumReport {
    pub q: u64,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
    /// `abs / √q`.
    pub normalized: f64,
    /// `|C′(F_q)|`.
    pub point_count: u64,
    /// `Ψ(g(x̄))` takes a single value on `C′`.
    pub psi_constant: bool,
    /// `χ(h(x̄))` takes a single value on `C′`.
    pub chi_constant: bool,
}

impl CharSumReport {
    pub fn sum(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// Both factors are constant, so the sum cannot cancel.
    pub fn degenerate(&self) -> bool {
        self.psi_constant && self.chi_constant
    }
}

/// `Σ_{x̄ ∈ C′(F_q)} Ψ(g(x̄))·χ(h(x̄))`.
pub fn char_sum(
    c: &AffineVariety,
    g: &PolyExpr,
    h: &PolyExpr,
    field: &FiniteField,
    psi: &AdditiveCharacter,
    chi: &MultiplicativeCharacter,
    budget: u64,
) -> Result<CharSumReport, GeometryError> {
    let pts = enumerate_points(c, field, &[], budget)?;
    Ok(char_sum_over(&pts.c_prime, g, h, field, psi, chi))
}

/// The sum of [`char_sum`] over an explicit point list.
pub fn char_sum_over(
    points: &[Vec<FieldElement>],
    g: &PolyExpr,
    h: &PolyExpr,
    field: &FiniteField,
    psi: &AdditiveCharacter,
    chi: &MultiplicativeCharacter,
) -> CharSumReport {
    let (cg, ch) = (CompiledPoly::new(field, g), CompiledPoly::new(field, h));
    let mut acc = AngleSum::default();
    let mut psi_values = None;
    let mut chi_values = None;
    let (mut psi_constant, mut chi_constant) = (true, true);
    for x in points {
        let a = psi_eval(field, psi, cg.eval(field, x));
        let b = chi_eval(field, chi, ch.eval(field, x));
        psi_constant &= *psi_values.get_or_insert(a) == a;
        chi_constant &= *chi_values.get_or_insert(b) == b;
        if let CharacterValue::Angle(b) = b {
            acc.add(a + b);
        }
    }
    let q = field.q();
    let sum = acc.value();
    CharSumReport {
        q,
        re: sum.re,
        im: sum.im,
        abs: sum.norm(),
        normalized: sum.norm() / (q as f64).sqrt(),
        point_count: points.len() as u64,
        psi_constant,
        chi_constant,
    }
}

/// Which additive character to use at each `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiRule {
    Standard,
    /// `Ψ(x) = Ψ_std(c·x)` with the integer `c` reduced into `F_q`.
    Twist(i64),
}

/// Which multiplicative character to use at each `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiRule {
    /// `χ = χ_γ^k`.
    Index(i64),
    /// The character of exact order `r`, `χ_γ^{(q−1)/r}`; fields with
    /// `r ∤ q−1` are skipped.
    Order(u64),
}

impl PsiRule {
    pub fn resolve(self, field: &FiniteField) -> AdditiveCharacter {
        match self {
            PsiRule::Standard => AdditiveCharacter::standard(field),
            PsiRule::Twist(c) => AdditiveCharacter::twisted(field.from_int(c as i128)),
        }
    }
}

impl ChiRule {
    pub fn resolve(self, field: &FiniteField) -> Option<MultiplicativeCharacter> {
        match self {
            ChiRule::Index(k) => Some(MultiplicativeCharacter::new(field, k as i128)),
            ChiRule::Order(r) => {
                let n = field.q() - 1;
                (r > 0 && n.is_multiple_of(r)).then(|| MultiplicativeCharacter::new(field, (n / r) as i128))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    #[serde(flatten)]
    pub report: CharSumReport,
    /// Counted towards `max_normalized`.
    pub included: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeilScan {
    pub rows: Vec<ScanRow>,
    /// Field sizes skipped because the χ rule has no character there.
    pub skipped: Vec<u64>,
    /// Largest `|S|/√q` over included rows, `0` if there are none.
    pub max_normalized: f64,
}

/// [`char_sum`] at each field `F_{p^e}`, in parallel. A field is excluded
/// from the maximum when both factors are constant on `C′`.
pub fn weil_scan(
    c: &AffineVariety,
    g: &PolyExpr,
    h: &PolyExpr,
    fields: &[(u64, u32)],
    psi_rule: PsiRule,
    chi_rule: ChiRule,
    budget: u64,
) -> Result<WeilScan, CharSumError> {
    let results: Vec<Result<Option<CharSumReport>, CharSumError>> = fields
        .par_iter()
        .map(|&(p, e)| {
            let field = make_field(p, e).map_err(|err| CharSumError::Field(err.to_string()))?;
            let Some(chi) = chi_rule.resolve(&field) else {
                return Ok(None);
            };
            let psi = psi_rule.resolve(&field);
            Ok(Some(char_sum(c, g, h, &field, &psi, &chi, budget)?))
        })
        .collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (r, &(p, e)) in results.into_iter().zip(fields) {
        match r? {
            Some(report) => rows.push(ScanRow {
                included: !report.degenerate(),
                report,
            }),
            None => skipped.push(p.pow(e)),
        }
    }
    Ok(WeilScan::from_rows(rows, skipped))
}

impl WeilScan {
    /// Sorts by `q` and takes the maximum over included rows.
    pub fn from_rows(mut rows: Vec<ScanRow>, skipped: Vec<u64>) -> Self {
        rows.sort_by_key(|r| r.report.q);
        let max_normalized = rows
            .iter()
            .filter(|r| r.included)
            .map(|r| r.report.normalized)
            .fold(0.0, f64::max);
        WeilScan {
            rows,
            skipped,
            max_normalized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermHypothesis {
    pub coefficient: String,
    pub plus_part: Vec<i32>,
    pub times_part: Vec<i32>,
    /// `h_i^+` is nontrivial and `Σ s_j x_j` is not constant on `C′`.
    pub plus_holds: bool,
    /// `h_i^×` is nontrivial and `Π x_j^{t_j}` is not constant on `C′`.
    pub times_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axiom4Report {
    pub q: u64,
    pub c_prime_count: u64,
    pub terms: Vec<TermHypothesis>,
    /// Every term satisfies (+) or (×).
    pub hypothesis_holds: bool,
    /// Containment witnesses for `C′` at height `deg h`, if any.
    pub hyperplane_witness: Option<Witness>,
    pub coset_witness: Option<Witness>,
    /// `max_{x̄ ∈ C′} h(Ψ(x̄), χ(x̄))`; absent when `C′` is empty.
    pub sup_value: Option<f64>,
    /// `Σ|c_i| · k_suite`.
    pub s: f64,
    /// `−s·√q/|C′|`.
    pub rhs_bound: Option<f64>,
    pub pass: Option<bool>,
}

fn angle_of(v: CharacterValue) -> RationalAngle {
    v.angle().expect("nonzero argument")
}

/// The finite-field axiom-(4) inequality `sup_{C′} h ≥ −s·√q/|C′|`, with
/// the per-term hypotheses checked on `C′(F_q)`.
pub fn axiom4_check(
    c: &AffineVariety,
    h: &LaurentPoly,
    field: &FiniteField,
    psi: &AdditiveCharacter,
    chi: &MultiplicativeCharacter,
    k_suite: f64,
    budget: u64,
) -> Result<Axiom4Report, CharSumError> {
    if h.n() != c.n {
        return Err(CharSumError::DimensionMismatch {
            expected: c.n,
            got: h.n(),
        });
    }
    if !h.is_real_on_torus() {
        return Err(CharSumError::NotRealValued);
    }
    if h.has_constant_term() {
        return Err(CharSumError::HasConstantTerm);
    }
    let pts = enumerate_points(c, field, &[], budget)?.c_prime;
    let split = split_laurent_monomials(h);
    let order = field.q() - 1;
    let logs: Vec<Vec<u64>> = pts
        .iter()
        .map(|x| {
            x.iter()
                .map(|&v| field.discrete_log(v).expect("nonzero"))
                .collect()
        })
        .collect();
    let widen = |v: &[i32]| v.iter().map(|&x| x as i64).collect::<Vec<i64>>();
    let terms: Vec<TermHypothesis> = split
        .terms
        .iter()
        .map(|(coef, m)| {
            let s = widen(&m.plus_part);
            let t = widen(&m.times_part);
            let plus_holds = s.iter().any(|&x| x != 0) && {
                let vals: Vec<FieldElement> = pts.iter().map(|x| eval_linear_row(field, &s, x)).collect();
                vals.windows(2).any(|w| w[0] != w[1])
            };
            let times_holds = t.iter().any(|&x| x != 0) && {
                let dl = |l: &[u64]| {
                    t.iter()
                        .zip(l)
                        .map(|(&a, &b)| a as i128 * b as i128)
                        .sum::<i128>()
                        .rem_euclid(order.max(1) as i128)
                };
                logs.windows(2).any(|w| dl(&w[0]) != dl(&w[1]))
            };
            TermHypothesis {
                coefficient: coef.to_string(),
                plus_part: m.plus_part.clone(),
                times_part: m.times_part.clone(),
                plus_holds,
                times_holds,
            }
        })
        .collect();
    let hypothesis_holds = terms.iter().all(|t| t.plus_holds || t.times_holds);
    let height = h.degree();
    let (hyperplane_witness, coset_witness) = if pts.is_empty() {
        (None, None)
    } else {
        (
            containment_search(field, &pts, height, ContainmentMode::Hyperplane)?,
            containment_search(field, &pts, height, ContainmentMode::Coset)?,
        )
    };
    let coefs: Vec<(f64, Vec<i64>, Vec<i64>)> = split
        .terms
        .iter()
        .map(|(c, m)| {
            (
                c.to_f64().unwrap_or(f64::NAN),
                widen(&m.plus_part),
                widen(&m.times_part),
            )
        })
        .collect();
    let sup_value = pts
        .iter()
        .map(|x| {
            let ys: Vec<RationalAngle> = x.iter().map(|&v| psi_eval(field, psi, v)).collect();
            let zs: Vec<RationalAngle> = x.iter().map(|&v| angle_of(chi_eval(field, chi, v))).collect();
            coefs
                .iter()
                .map(|(c, s, t)| {
                    let mut a = RationalAngle::ZERO;
                    for (k, y) in s.iter().zip(&ys) {
                        a = a + y.scale(*k as i128);
                    }
                    for (k, z) in t.iter().zip(&zs) {
                        a = a + z.scale(*k as i128);
                    }
                    c * a.to_complex().re
                })
                .sum::<f64>()
        })
        .reduce(f64::max);
    let s = h.l1_norm().abs().to_f64().unwrap_or(f64::NAN) * k_suite;
    let rhs_bound = (!pts.is_empty()).then(|| -s * (field.q() as f64).sqrt() / pts.len() as f64);
    let pass = sup_value.zip(rhs_bound).map(|(a, b)| a >= b);
    Ok(Axiom4Report {
        q: field.q(),
        c_prime_count: pts.len() as u64,
        terms,
        hypothesis_holds,
        hyperplane_witness,
        coset_witness,
        sup_value,
        s,
        rhs_bound,
        pass,
    })
}

/// `C′` together with the maps whose joint image should be dense.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagonalSpec {
    pub curve: AffineVariety,
    pub alpha: IntegralLinearMap,
    pub beta: IntegralMultiplicativeMap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    pub q: u64,
    pub cells_hit: u64,
    pub cells_total: u64,
    pub coverage_fraction: f64,
    /// Containment witnesses for `α(C′)` and `β(C′)`; density is only
    /// expected when both are absent.
    pub alpha_witness: Option<Witness>,
    pub beta_witness: Option<Witness>,
}

/// Counts the cells of the `res^{k+l}` grid on `T^{k+l}` met by
/// `(Ψ(α(x̄)), χ(β(x̄)))` for `x̄ ∈ C′(F_q)`.
#[allow(clippy::too_many_arguments)]
pub fn density_probe(
    spec: &DiagonalSpec,
    field: &FiniteField,
    psi: &AdditiveCharacter,
    chi: &MultiplicativeCharacter,
    grid_res: u64,
    height: u32,
    budget: u64,
) -> Result<DensityReport, CharSumError> {
    assert!(grid_res > 0, "grid resolution must be positive");
    let pts = enumerate_points(&spec.curve, field, &[], budget)?.c_prime;
    let dims = (spec.alpha.rows.len() + spec.beta.rows.len()) as u32;
    let cells_total = grid_res.checked_pow(dims).ok_or(GeometryError::BudgetExceeded {
        needed: u64::MAX,
        budget,
    })?;
    let cell = |a: RationalAngle| (a.num() as u128 * grid_res as u128 / a.den() as u128) as u64;
    let mut hit = std::collections::HashSet::new();
    let mut alpha_img = Vec::with_capacity(pts.len());
    let mut beta_img = Vec::with_capacity(pts.len());
    for x in &pts {
        let a = spec.alpha.apply(field, x);
        let b: Vec<FieldElement> = spec
            .beta
            .rows
            .iter()
            .map(|r| eval_mult_row(field, r, x))
            .collect();
        let mut key = Vec::with_capacity(dims as usize);
        key.extend(a.iter().map(|&v| cell(psi_eval(field, psi, v))));
        key.extend(b.iter().map(|&v| cell(angle_of(chi_eval(field, chi, v)))));
        hit.insert(key);
        alpha_img.push(a);
        beta_img.push(b);
    }
    let witness = |img: &[Vec<FieldElement>], mode| -> Result<Option<Witness>, GeometryError> {
        if img.is_empty() || img[0].is_empty() {
            return Ok(None);
        }
        containment_search(field, img, height, mode)
    };
    Ok(DensityReport {
        q: field.q(),
        cells_hit: hit.len() as u64,
        cells_total,
        coverage_fraction: hit.len() as f64 / cells_total as f64,
        alpha_witness: witness(&alpha_img, ContainmentMode::Hyperplane)?,
        beta_witness: witness(&beta_img, ContainmentMode::Coset)?,
    })
}
