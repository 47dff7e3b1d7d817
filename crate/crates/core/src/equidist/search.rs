//! Exponent search on the torus: the smallest `l ≡ f (mod R)` moving a
//! tuple of rational angles into a target box.

use num_integer::Integer;
use num_traits::{One, Zero};
use serde::Serialize;

use super::discrepancy::{default_c_d, etk_bound, TorusSequence};
use super::EquidistError;
use crate::characters::RationalAngle;
use crate::formulas::Rational;

fn angle_value(a: RationalAngle) -> Rational {
    Rational::new(a.num() as i128, a.den() as i128)
}

/// An arc `start + [0, len]` of `ℝ/ℤ`, with each end open or closed. Arcs
/// of length `≥ 1` are the whole circle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arc {
    pub start: Rational,
    pub len: Rational,
    pub closed_start: bool,
    pub closed_end: bool,
}

impl Arc {
    fn between(lo: Rational, hi: Rational, closed_start: bool, closed_end: bool) -> Self {
        Arc {
            start: lo - lo.floor(),
            len: hi - lo,
            closed_start,
            closed_end,
        }
    }

    /// `(lo, hi)`.
    pub fn open(lo: Rational, hi: Rational) -> Self {
        Self::between(lo, hi, false, false)
    }

    /// `[lo, hi]`.
    pub fn closed(lo: Rational, hi: Rational) -> Self {
        Self::between(lo, hi, true, true)
    }

    /// `[lo, hi)`.
    pub fn half_open(lo: Rational, hi: Rational) -> Self {
        Self::between(lo, hi, true, false)
    }

    pub fn full() -> Self {
        Self::half_open(Rational::zero(), Rational::one())
    }

    /// Angles within circle distance `radius` of `center`.
    pub fn around(center: Rational, radius: Rational) -> Self {
        Self::closed(center - radius, center + radius)
    }

    pub fn is_full(&self) -> bool {
        self.len >= Rational::one()
    }

    pub fn measure(&self) -> Rational {
        self.len.min(Rational::one()).max(Rational::zero())
    }

    pub fn contains(&self, a: RationalAngle) -> bool {
        if self.is_full() {
            return true;
        }
        let mut d = angle_value(a) - self.start;
        if d < Rational::zero() {
            d += Rational::one();
        }
        let after_start = if self.closed_start { true } else { !d.is_zero() };
        let before_end = if self.closed_end {
            d <= self.len
        } else {
            d < self.len
        };
        after_start && before_end
    }
}

/// A product of arcs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusBox {
    pub arcs: Vec<Arc>,
}

impl TorusBox {
    pub fn new(arcs: Vec<Arc>) -> Self {
        TorusBox { arcs }
    }

    pub fn full(dim: usize) -> Self {
        TorusBox::new(vec![Arc::full(); dim])
    }

    pub fn dim(&self) -> usize {
        self.arcs.len()
    }

    pub fn measure(&self) -> Rational {
        self.arcs.iter().map(Arc::measure).product()
    }

    pub fn contains(&self, point: &[RationalAngle]) -> bool {
        self.arcs.iter().zip(point).all(|(arc, &a)| arc.contains(a))
    }
}

/// Integer vectors with `|v|_∞ = h` whose first nonzero entry is positive.
fn half_vectors(n: usize, h: i64) -> impl Iterator<Item = Vec<i64>> {
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
        let top = v.iter().map(|x| x.abs()).max() == Some(h);
        let positive = v.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0);
        (top && positive).then_some(v)
    })
}

/// The first `ᾱ ≠ 0` with `|ᾱ|_∞ ≤ h_check` and `Σ α_i γ_i ∈ ℤ`, by
/// increasing height.
pub fn integer_relation(gammas: &[RationalAngle], h_check: u64) -> Option<Vec<i64>> {
    let common = gammas.iter().fold(1u128, |acc, g| acc.lcm(&(g.den() as u128)));
    let scaled: Vec<i128> = gammas
        .iter()
        .map(|g| (g.num() as u128 * (common / g.den() as u128)) as i128)
        .collect();
    for h in 1..=h_check as i64 {
        for alpha in half_vectors(gammas.len(), h) {
            let s: i128 = alpha.iter().zip(&scaled).map(|(&a, &g)| a as i128 * g).sum();
            if s.rem_euclid(common as i128) == 0 {
                return Some(alpha);
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExponentQuery {
    pub gammas: Vec<RationalAngle>,
    pub region: TorusBox,
    /// Modulus `R` of the congruence `l ≡ f (mod R)`.
    pub modulus: u64,
    pub residue: u64,
    /// Smallest acceptable `max_i ord(l·γ_i)`.
    pub min_order: u64,
    pub l_max: u64,
    /// Height of the integer-relation precheck.
    pub h_check: u64,
}

impl ExponentQuery {
    pub fn new(gammas: Vec<RationalAngle>, region: TorusBox) -> Self {
        ExponentQuery {
            gammas,
            region,
            modulus: 1,
            residue: 1,
            min_order: 1,
            l_max: 1_000_000,
            h_check: DEFAULT_H_CHECK,
        }
    }
}

/// Default height of the integer-relation precheck.
pub const DEFAULT_H_CHECK: u64 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExponentHit {
    pub l: u64,
    pub point: Vec<RationalAngle>,
    /// `ord(l·γ_i)` per coordinate.
    pub orders: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExponentOutcome {
    Found(ExponentHit),
    NotFound {
        l_max: u64,
        /// Smallest tested `l` at which the ETK bound of the admissible
        /// exponents `f, f+R, …, l` drops below the box measure.
        horizon: Option<u64>,
    },
}

impl ExponentOutcome {
    pub fn hit(&self) -> Option<&ExponentHit> {
        match self {
            ExponentOutcome::Found(h) => Some(h),
            ExponentOutcome::NotFound { .. } => None,
        }
    }
}

fn satisfies(q: &ExponentQuery, l: u64) -> Option<ExponentHit> {
    if l == 0 || l > q.l_max || l % q.modulus != q.residue % q.modulus {
        return None;
    }
    let point: Vec<RationalAngle> = q.gammas.iter().map(|g| g.scale(l as i128)).collect();
    if !q.region.contains(&point) {
        return None;
    }
    let orders: Vec<u64> = point.iter().map(|a| a.den()).collect();
    (orders.iter().copied().max().unwrap_or(1) >= q.min_order).then_some(ExponentHit { l, point, orders })
}

/// Checks a hit against every constraint of the query.
pub fn verify_hit(q: &ExponentQuery, hit: &ExponentHit) -> bool {
    satisfies(q, hit.l).as_ref() == Some(hit)
}

/// The smallest `l ≤ l_max` with `l ≡ f (mod R)`, `l·γ̄ ∈ U` and
/// `max_i ord(l·γ_i) ≥ K`.
pub fn exponent_search(q: &ExponentQuery) -> Result<ExponentOutcome, EquidistError> {
    if q.modulus == 0 || q.residue == 0 || q.residue > q.modulus {
        return Err(EquidistError::InvalidResidue {
            modulus: q.modulus,
            residue: q.residue,
        });
    }
    if q.region.dim() != q.gammas.len() {
        return Err(EquidistError::DimensionMismatch {
            expected: q.gammas.len(),
            got: q.region.dim(),
        });
    }
    if let Some(alpha) = integer_relation(&q.gammas, q.h_check) {
        return Err(EquidistError::IndependencePrecheckFailed { alpha });
    }
    let mut l = q.residue;
    while l <= q.l_max {
        if let Some(hit) = satisfies(q, l) {
            assert!(verify_hit(q, &hit));
            return Ok(ExponentOutcome::Found(hit));
        }
        l += q.modulus;
    }
    Ok(ExponentOutcome::NotFound {
        l_max: q.l_max,
        horizon: etk_horizon(q),
    })
}

/// Doubling scan over prefixes of the admissible exponents for the first
/// length whose ETK bound (best `H ≤ 64`) is below the box measure.
fn etk_horizon(q: &ExponentQuery) -> Option<u64> {
    let measure = q.region.measure();
    let measure = *measure.numer() as f64 / *measure.denom() as f64;
    let d = q.gammas.len().max(1);
    let period = q.gammas.iter().fold(1u64, |acc, g| acc.lcm(&g.den()));
    let admissible = if q.l_max >= q.residue {
        (q.l_max - q.residue) / q.modulus + 1
    } else {
        0
    };
    let cap = admissible.min(period.saturating_mul(2)).min(1 << 12);
    let mut n = 16u64.min(cap);
    while n > 0 {
        let points: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                let l = q.residue + k * q.modulus;
                q.gammas.iter().map(|g| g.scale(l as i128).as_f64()).collect()
            })
            .collect();
        let seq = TorusSequence::new(d, points).ok()?;
        let best = [1u32, 2, 4, 8, 16, 32, 64]
            .iter()
            .map(|&h| etk_bound(&seq, h, default_c_d(d)))
            .fold(f64::INFINITY, f64::min);
        if best < measure {
            return Some(q.residue + (n - 1) * q.modulus);
        }
        if n == cap {
            return None;
        }
        n = (n * 2).min(cap);
    }
    None
}
