//! Rational points of affine varieties, the zero-degenerate restriction
//! `C′`, and containment in rational hyperplanes and multiplicative cosets.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::field::{upoly, FieldElement, FiniteField};
use crate::formulas::{CompiledPoly, PolyExpr};

/// Candidate evaluations allowed by default.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("enumeration needs {needed} candidate evaluations, budget is {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error("expected {expected} parameter(s), got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("containment search needs at least one point")]
    EmptyPointSet,
    #[error("coset search needs points with nonzero coordinates")]
    ZeroCoordinate,
}

/// `V(ā) = { x̄ ∈ F^n : P(x̄, ā) = 0 for every equation P }`. Equations take
/// the `n` coordinates first and then the parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineVariety {
    pub n: usize,
    pub params: usize,
    pub equations: Vec<PolyExpr>,
}

impl AffineVariety {
    pub fn new(n: usize, equations: Vec<PolyExpr>) -> Self {
        AffineVariety {
            n,
            params: 0,
            equations,
        }
    }

    pub fn with_params(n: usize, params: usize, equations: Vec<PolyExpr>) -> Self {
        debug_assert!(equations.iter().all(|e| e.arity() == n + params));
        AffineVariety { n, params, equations }
    }

    /// Affine space `A^n`.
    pub fn affine_space(n: usize) -> Self {
        AffineVariety::new(n, Vec::new())
    }
}

/// Points of a variety over one field, sorted by encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSet {
    pub points: Vec<Vec<FieldElement>>,
    /// Points with every coordinate nonzero.
    pub c_prime: Vec<Vec<FieldElement>>,
}

impl PointSet {
    fn new(mut points: Vec<Vec<FieldElement>>) -> Self {
        points.sort_unstable();
        let c_prime = points
            .iter()
            .filter(|p| p.iter().all(|x| !x.is_zero()))
            .cloned()
            .collect();
        PointSet { points, c_prime }
    }

    /// `C′(F_q)` is empty.
    pub fn is_zero_degenerate(&self) -> bool {
        self.c_prime.is_empty()
    }
}

/// Moves the last coordinate to the end of the variable list so that it
/// can be solved for once everything else is fixed.
fn last_coordinate_last(p: &PolyExpr, n: usize, params: usize) -> PolyExpr {
    let terms = p.terms().iter().map(|(e, c)| {
        let mut v = Vec::with_capacity(n + params);
        v.extend_from_slice(&e[n..]);
        v.extend_from_slice(&e[..n - 1]);
        v.push(e[n - 1]);
        (v, *c)
    });
    PolyExpr::new(n + params, terms)
}

/// All `F_q`-points, found fiberwise: every prefix `(x_1..x_{n-1})` is
/// enumerated and the last coordinate is solved by root finding. The cost
/// is `q^{n-1}` prefixes plus the size of any fiber on which the equations
/// vanish identically.
pub fn enumerate_points(
    v: &AffineVariety,
    field: &FiniteField,
    params: &[FieldElement],
    budget: u64,
) -> Result<PointSet, GeometryError> {
    if params.len() != v.params {
        return Err(GeometryError::ArityMismatch {
            expected: v.params,
            got: params.len(),
        });
    }
    let q = field.q();
    let direct: Vec<CompiledPoly> = v.equations.iter().map(|e| CompiledPoly::new(field, e)).collect();
    let holds = |x: &[FieldElement]| {
        let mut pt = x.to_vec();
        pt.extend_from_slice(params);
        direct.iter().all(|e| e.eval(field, &pt).is_zero())
    };
    if v.n == 0 {
        return Ok(PointSet::new(if holds(&[]) { vec![vec![]] } else { vec![] }));
    }
    let prefixes = u64::try_from((q as u128).pow(v.n as u32 - 1)).unwrap_or(u64::MAX);
    if prefixes > budget {
        return Err(GeometryError::BudgetExceeded {
            needed: prefixes,
            budget,
        });
    }
    let solved: Vec<CompiledPoly> = v
        .equations
        .iter()
        .map(|e| CompiledPoly::new(field, &last_coordinate_last(e, v.n, v.params)))
        .collect();
    let elems: Vec<FieldElement> = field.elements().collect();
    let fiber = |prefix: &[FieldElement]| -> Vec<FieldElement> {
        let mut key = params.to_vec();
        key.extend_from_slice(prefix);
        let specialised: Vec<_> = solved.iter().map(|e| e.specialize_last(field, &key)).collect();
        match specialised.iter().find(|f| !f.is_empty()) {
            None => elems.clone(),
            Some(f) => upoly::distinct_roots(field, f)
                .into_iter()
                .filter(|r| specialised.iter().all(|g| upoly::eval(field, g, *r).is_zero()))
                .collect(),
        }
    };
    let points: Vec<Vec<FieldElement>> = (0..prefixes)
        .into_par_iter()
        .flat_map_iter(|mut idx| {
            let mut prefix = Vec::with_capacity(v.n);
            for _ in 0..v.n - 1 {
                prefix.push(elems[(idx % q) as usize]);
                idx /= q;
            }
            let roots = fiber(&prefix);
            roots.into_iter().map(move |r| {
                let mut pt = prefix.clone();
                pt.push(r);
                pt
            })
        })
        .collect();
    let extra = points.len() as u64;
    if prefixes.saturating_add(extra) > budget {
        return Err(GeometryError::BudgetExceeded {
            needed: prefixes + extra,
            budget,
        });
    }
    assert!(
        points.iter().all(|p| holds(p)),
        "enumerated point violates an equation"
    );
    Ok(PointSet::new(points))
}

/// Witness that a point set lies on `Σ s_i x_i = f` or `Π x_i^{t_i} = f`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Hyperplane { s: Vec<i64>, f: u64 },
    Coset { t: Vec<i64>, f: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainmentMode {
    Hyperplane,
    Coset,
}

/// Integer vectors with `|v|_∞ = h`, ordered so that small magnitudes and
/// positive entries come first.
fn vectors_of_height(n: usize, h: i64) -> impl Iterator<Item = Vec<i64>> {
    let values: Vec<i64> = std::iter::once(0).chain((1..=h).flat_map(|k| [k, -k])).collect();
    let base = values.len();
    let total = base.pow(n as u32);
    (0..total).filter_map(move |mut idx| {
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push(values[idx % base]);
            idx /= base;
        }
        v.reverse();
        (v.iter().map(|x| x.abs()).max() == Some(h)).then_some(v)
    })
}

/// Searches heights `1..=m` in increasing order for a hyperplane or coset
/// containing every point. Hyperplane normals vanishing mod `p` and coset
/// exponents vanishing mod `q−1` are skipped: they hold on every set.
pub fn containment_search(
    field: &FiniteField,
    points: &[Vec<FieldElement>],
    m: u32,
    mode: ContainmentMode,
) -> Result<Option<Witness>, GeometryError> {
    let first = points.first().ok_or(GeometryError::EmptyPointSet)?;
    let n = first.len();
    match mode {
        ContainmentMode::Hyperplane => {
            let p = field.p() as i64;
            for h in 1..=m as i64 {
                for s in vectors_of_height(n, h) {
                    if s.iter().all(|x| x % p == 0) {
                        continue;
                    }
                    let f = crate::formulas::eval_linear_row(field, &s, first);
                    if points[1..]
                        .iter()
                        .all(|x| crate::formulas::eval_linear_row(field, &s, x) == f)
                    {
                        return Ok(Some(Witness::Hyperplane { s, f: f.encoding() }));
                    }
                }
            }
            Ok(None)
        }
        ContainmentMode::Coset => {
            let order = field.q() - 1;
            let logs = points
                .iter()
                .map(|x| {
                    x.iter()
                        .map(|&c| {
                            if c.is_zero() {
                                Err(GeometryError::ZeroCoordinate)
                            } else {
                                Ok(field.discrete_log(c).expect("dlog of a nonzero element"))
                            }
                        })
                        .collect::<Result<Vec<u64>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut diffs: Vec<Vec<u64>> = logs[1..]
                .iter()
                .map(|l| {
                    l.iter()
                        .zip(&logs[0])
                        .map(|(a, b)| (a + order - b) % order)
                        .collect()
                })
                .collect();
            diffs.sort_unstable();
            diffs.dedup();
            let modulus = order as i128;
            let combine = |t: &[i64], d: &[u64]| {
                t.iter()
                    .zip(d)
                    .map(|(&a, &b)| a as i128 * b as i128)
                    .sum::<i128>()
                    .rem_euclid(modulus)
            };
            for h in 1..=m as i64 {
                for t in vectors_of_height(n, h) {
                    if t.iter().all(|&x| x as i128 % modulus == 0) {
                        continue;
                    }
                    if diffs.iter().all(|d| combine(&t, d) == 0) {
                        let f = crate::formulas::eval_mult_row(field, &t, first);
                        return Ok(Some(Witness::Coset { t, f: f.encoding() }));
                    }
                }
            }
            Ok(None)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LangWeil {
    pub q: u64,
    pub count: u64,
    /// `|count − q| / √q`.
    pub deviation: f64,
}

pub fn lang_weil_check(
    v: &AffineVariety,
    field: &FiniteField,
    params: &[FieldElement],
    budget: u64,
) -> Result<LangWeil, GeometryError> {
    let count = enumerate_points(v, field, params, budget)?.points.len() as u64;
    let q = field.q();
    Ok(LangWeil {
        q,
        count,
        deviation: (count as f64 - q as f64).abs() / (q as f64).sqrt(),
    })
}
