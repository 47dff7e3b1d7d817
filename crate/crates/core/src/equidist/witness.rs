//! Prime and character witnesses for a number-field element: primes where
//! the minimal polynomial splits, a root `b`, and exponents `r`, `c` such
//! that `χ_γ^r` and `Ψ_c` hit prescribed angles at polynomials in `b`.

use num_integer::Integer;
use num_traits::One;
use rayon::prelude::*;
use serde::Serialize;

use super::search::{
    exponent_search, integer_relation, Arc, ExponentOutcome, ExponentQuery, TorusBox, DEFAULT_H_CHECK,
};
use super::{EquidistError, WitnessSpec};
use crate::arith::{inv_mod, primes_in_range};
use crate::characters::{
    character_order, chi_eval, psi_eval, AdditiveCharacter, CharacterValue, MultiplicativeCharacter,
    RationalAngle,
};
use crate::field::{upoly, FieldElement, FieldOptions, FiniteField};
use crate::formulas::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WitnessRecord {
    pub p: u64,
    /// The chosen root of the minimal polynomial in `F_p`.
    pub root: u64,
    /// `c` in `Ψ_c(x) = e(c·x/p)`.
    pub twist: u64,
    /// `r` in `χ = χ_γ^r`.
    pub exponent: u64,
    /// Order of `χ`.
    pub order: u64,
    pub chi_angles: Vec<RationalAngle>,
    pub psi_angles: Vec<RationalAngle>,
    pub unity_angle: Option<RationalAngle>,
    /// Every constraint re-checked by direct character evaluation.
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WitnessRun {
    pub records: Vec<WitnessRecord>,
    pub primes_scanned: u64,
    /// Primes where the minimal polynomial splits and `R | p − 1`.
    pub primes_eligible: u64,
    /// Eligible primes skipped because an integer relation of small height
    /// holds among the angles.
    pub precheck_failures: Vec<(u64, Vec<i64>)>,
    /// Eligible primes with no exponent meeting every constraint.
    pub not_found: Vec<u64>,
}

enum PrimeOutcome {
    Ineligible,
    Precheck(Vec<i64>),
    NotFound,
    Found(WitnessRecord),
}

fn eval_rational(k: &FiniteField, coeffs: &[Rational], b: FieldElement) -> Option<FieldElement> {
    let mut acc = k.zero();
    for c in coeffs.iter().rev() {
        let c = k.from_ratio(*c.numer(), *c.denom())?;
        acc = k.add(k.mul(acc, b), c);
    }
    Some(acc)
}

fn circle_distance(a: RationalAngle, t: Rational) -> Rational {
    let x = Rational::new(a.num() as i128, a.den() as i128) - t;
    let x = x - x.floor();
    x.min(Rational::one() - x)
}

fn angle_of(r: Rational) -> RationalAngle {
    RationalAngle::new(*r.numer(), *r.denom() as u64)
}

/// `x ≡ a (mod m)` and `x ≡ b (mod n)` as one class `(residue, modulus)`.
fn combine(a: u64, m: u64, b: u64, n: u64) -> Option<(u64, u64)> {
    let g = m.gcd(&n);
    if (a as i128 - b as i128).rem_euclid(g as i128) != 0 {
        return None;
    }
    let l = m / g * n;
    let (m_g, n_g) = (m / g, n / g);
    let diff = ((b as i128 - a as i128) / g as i128).rem_euclid(n_g as i128) as u64;
    let t = if n_g == 1 {
        0
    } else {
        (diff as u128 * inv_mod(m_g % n_g, n_g)? as u128 % n_g as u128) as u64
    };
    let x = ((a as u128 + m as u128 * t as u128) % l as u128) as u64;
    Some((x, l))
}

/// Residue in `1..=modulus`.
fn positive_residue(x: u64, modulus: u64) -> u64 {
    match x % modulus {
        0 => modulus,
        r => r,
    }
}

/// Rejects minimal polynomials with a factor over `ℚ`: rational roots for
/// every degree, and quadratic pairs for degree 4.
pub fn check_irreducible(min_poly: &[i128]) -> Result<(), EquidistError> {
    let deg = min_poly.len().saturating_sub(1);
    if deg == 0 || min_poly[deg] != 1 {
        return Err(EquidistError::NotMonic);
    }
    if deg > 4 {
        return Err(EquidistError::DegreeTooLarge(deg));
    }
    let eval = |x: i128| min_poly.iter().rev().fold(0i128, |acc, &c| acc * x + c);
    let c0 = min_poly[0];
    if c0 == 0 {
        return Err(EquidistError::Reducible("x".into()));
    }
    let divisors = |n: i128| -> Vec<i128> {
        let n = n.abs();
        let mut out = Vec::new();
        let mut d = 1;
        while d * d <= n {
            if n % d == 0 {
                out.extend([d, n / d]);
            }
            d += 1;
        }
        out
    };
    for d in divisors(c0) {
        for x in [d, -d] {
            if eval(x) == 0 {
                return Err(EquidistError::Reducible(format!("x - ({x})")));
            }
        }
    }
    if deg == 4 {
        // (x² + a x + b)(x² + c x + d) with b d = c0.
        let (c1, c2, c3) = (min_poly[1], min_poly[2], min_poly[3]);
        for b in divisors(c0).into_iter().flat_map(|d| [d, -d]) {
            let d = c0 / b;
            let candidates: Vec<i128> = if d != b {
                let num = c1 - b * c3;
                if num % (d - b) == 0 {
                    vec![num / (d - b)]
                } else {
                    vec![]
                }
            } else {
                // a + c = c3, a c = c2 − 2b: a is an integer root of
                // a² − c3 a + (c2 − 2b).
                let disc = c3 * c3 - 4 * (c2 - 2 * b);
                if disc < 0 {
                    vec![]
                } else {
                    let s = (disc as f64).sqrt().round() as i128;
                    (s - 1..=s + 1)
                        .filter(|&s| s >= 0 && s * s == disc && (c3 + s) % 2 == 0)
                        .map(|s| (c3 + s) / 2)
                        .collect()
                }
            };
            for a in candidates {
                let c = c3 - a;
                if a * c + b + d == c2 && a * d + b * c == c1 {
                    return Err(EquidistError::Reducible(format!("x^2 + ({a})x + ({b})")));
                }
            }
        }
    }
    Ok(())
}

/// One prime needs only a handful of logarithms, so skip the O(p) table.
fn no_table() -> FieldOptions {
    FieldOptions {
        dlog_cap: 0,
        ..FieldOptions::default()
    }
}

fn witness_at(spec: &WitnessSpec, p: u64, h_check: u64) -> PrimeOutcome {
    let n = p - 1;
    let (unity_r, unity_f) = spec.unity.as_ref().map_or((1, 1), |u| (u.r, u.f));
    if p < 3 || !n.is_multiple_of(unity_r) {
        return PrimeOutcome::Ineligible;
    }
    let Ok(k) = FiniteField::new(p, 1, no_table()) else {
        return PrimeOutcome::Ineligible;
    };
    let mp: Vec<FieldElement> = spec.min_poly.iter().map(|&c| k.from_int(c)).collect();
    let roots = upoly::distinct_roots(&k, &mp);
    if roots.len() != spec.min_poly.len() - 1 {
        return PrimeOutcome::Ineligible;
    }
    let b = roots[0];
    let tol = spec.tolerance;

    // Multiplicative part: angles dlog(h_i(b))/(p−1), plus the generator's
    // angle 1/(p−1), whose order under l is the order of χ_γ^l.
    let mut gammas = Vec::new();
    let mut arcs = Vec::new();
    for (h, t) in &spec.chi_targets {
        let Some(v) = eval_rational(&k, h, b).filter(|v| !v.is_zero()) else {
            return PrimeOutcome::Ineligible;
        };
        gammas.push(RationalAngle::new(k.discrete_log(v).unwrap() as i128, n));
        arcs.push(Arc::around(*t, tol));
    }
    // The precheck covers the target angles only; the generator coordinate
    // is related to every one of them by construction.
    if let Some(alpha) = integer_relation(&gammas, h_check) {
        return PrimeOutcome::Precheck(alpha);
    }
    gammas.push(RationalAngle::new(1, n));
    arcs.push(Arc::full());

    let (mut residue, mut modulus) = (unity_f % unity_r, unity_r);
    let mut lambda_value = None;
    if let Some(u) = &spec.unity {
        let Some(v) = eval_rational(&k, &u.lambda, b).filter(|v| !v.is_zero()) else {
            return PrimeOutcome::Ineligible;
        };
        lambda_value = Some(v);
        // r·L ≡ s·(p−1) (mod p−1)
        let l = k.discrete_log(v).unwrap();
        let s = u.target * Rational::from_integer(n as i128);
        if !s.is_integer() {
            return PrimeOutcome::NotFound;
        }
        let s = s.to_integer().rem_euclid(n as i128) as u64;
        let g = l.gcd(&n);
        if !s.is_multiple_of(g) {
            return PrimeOutcome::NotFound;
        }
        let m = n / g;
        let r0 = if m == 1 {
            0
        } else {
            ((s / g) as u128 * inv_mod((l / g) % m, m).unwrap() as u128 % m as u128) as u64
        };
        match combine(residue, modulus, r0, m) {
            Some((x, mm)) => (residue, modulus) = (x, mm),
            None => return PrimeOutcome::NotFound,
        }
    }
    let query = ExponentQuery {
        gammas,
        region: TorusBox::new(arcs),
        modulus,
        residue: positive_residue(residue, modulus),
        min_order: spec.min_order,
        l_max: n.max(modulus),
        h_check: 0,
    };
    let r = match exponent_search(&query) {
        Err(EquidistError::IndependencePrecheckFailed { alpha }) => return PrimeOutcome::Precheck(alpha),
        Err(_) => return PrimeOutcome::Ineligible,
        Ok(ExponentOutcome::NotFound { .. }) => return PrimeOutcome::NotFound,
        Ok(ExponentOutcome::Found(hit)) => hit.l,
    };

    // Additive part, with χ fixed: angles c·f_j(b)/p.
    let mut psi_values = Vec::new();
    for (f, _) in &spec.psi_targets {
        let Some(v) = eval_rational(&k, f, b) else {
            return PrimeOutcome::Ineligible;
        };
        psi_values.push(v);
    }
    let c = if spec.psi_targets.is_empty() {
        1
    } else {
        let query = ExponentQuery {
            gammas: psi_values
                .iter()
                .map(|v| RationalAngle::new(v.encoding() as i128, p))
                .collect(),
            region: TorusBox::new(
                spec.psi_targets
                    .iter()
                    .map(|(_, u)| Arc::around(*u, tol))
                    .collect(),
            ),
            modulus: 1,
            residue: 1,
            min_order: 1,
            l_max: n,
            h_check,
        };
        match exponent_search(&query) {
            Err(EquidistError::IndependencePrecheckFailed { alpha }) => return PrimeOutcome::Precheck(alpha),
            Err(_) => return PrimeOutcome::Ineligible,
            Ok(ExponentOutcome::NotFound { .. }) => return PrimeOutcome::NotFound,
            Ok(ExponentOutcome::Found(hit)) => hit.l,
        }
    };

    let chi = MultiplicativeCharacter::new(&k, r as i128);
    let psi = AdditiveCharacter::twisted(k.from_int(c as i128));
    let mut record = WitnessRecord {
        p,
        root: b.encoding(),
        twist: c,
        exponent: r,
        order: character_order(&k, &chi),
        chi_angles: spec
            .chi_targets
            .iter()
            .map(|(h, _)| {
                chi_eval(&k, &chi, eval_rational(&k, h, b).unwrap())
                    .angle()
                    .unwrap_or(RationalAngle::ZERO)
            })
            .collect(),
        psi_angles: psi_values.iter().map(|&v| psi_eval(&k, &psi, v)).collect(),
        unity_angle: lambda_value.and_then(|v| chi_eval(&k, &chi, v).angle()),
        verified: false,
    };
    record.verified = verify_record(spec, &record);
    PrimeOutcome::Found(record)
}

/// Rebuilds `F_p`, the root and both characters from the record and checks
/// every constraint of `spec`.
pub fn verify_record(spec: &WitnessSpec, rec: &WitnessRecord) -> bool {
    let Ok(k) = FiniteField::new(rec.p, 1, no_table()) else {
        return false;
    };
    let b = k.from_int(rec.root as i128);
    let mp: Vec<FieldElement> = spec.min_poly.iter().map(|&c| k.from_int(c)).collect();
    if !upoly::eval(&k, &mp, b).is_zero() {
        return false;
    }
    let chi = MultiplicativeCharacter::new(&k, rec.exponent as i128);
    let psi = AdditiveCharacter::twisted(k.from_int(rec.twist as i128));
    if psi.is_trivial() || character_order(&k, &chi) < spec.min_order {
        return false;
    }
    let within =
        |v: CharacterValue, t: Rational| v.angle().is_some_and(|a| circle_distance(a, t) <= spec.tolerance);
    let chi_ok = spec
        .chi_targets
        .iter()
        .all(|(h, t)| eval_rational(&k, h, b).is_some_and(|v| within(chi_eval(&k, &chi, v), *t)));
    let psi_ok = spec.psi_targets.iter().all(|(f, u)| {
        eval_rational(&k, f, b).is_some_and(|v| circle_distance(psi_eval(&k, &psi, v), *u) <= spec.tolerance)
    });
    let unity_ok = spec.unity.as_ref().is_none_or(|u| {
        rec.exponent % u.r == u.f % u.r
            && eval_rational(&k, &u.lambda, b)
                .is_some_and(|v| chi_eval(&k, &chi, v) == CharacterValue::Angle(angle_of(u.target)))
    });
    chi_ok && psi_ok && unity_ok
}

/// Scans the primes of `[lo, hi]` in increasing order, stopping once `limit`
/// records have been found.
pub fn witness_search(
    spec: &WitnessSpec,
    lo: u64,
    hi: u64,
    limit: Option<usize>,
) -> Result<WitnessRun, EquidistError> {
    check_irreducible(&spec.min_poly)?;
    let primes = primes_in_range(lo, hi);
    let mut run = WitnessRun {
        records: Vec::new(),
        primes_scanned: 0,
        primes_eligible: 0,
        precheck_failures: Vec::new(),
        not_found: Vec::new(),
    };
    for chunk in primes.chunks(2048) {
        let outcomes: Vec<PrimeOutcome> = chunk
            .par_iter()
            .map(|&p| witness_at(spec, p, DEFAULT_H_CHECK))
            .collect();
        for (&p, out) in chunk.iter().zip(outcomes) {
            if limit.is_some_and(|l| run.records.len() >= l) {
                break;
            }
            run.primes_scanned += 1;
            match out {
                PrimeOutcome::Ineligible => {}
                PrimeOutcome::Precheck(alpha) => {
                    run.primes_eligible += 1;
                    run.precheck_failures.push((p, alpha));
                }
                PrimeOutcome::NotFound => {
                    run.primes_eligible += 1;
                    run.not_found.push(p);
                }
                PrimeOutcome::Found(rec) => {
                    run.primes_eligible += 1;
                    run.records.push(rec);
                }
            }
        }
        if limit.is_some_and(|l| run.records.len() >= l) {
            break;
        }
    }
    if run.records.is_empty() {
        return Err(EquidistError::NoPrimesFound { lo, hi });
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crt_classes() {
        assert_eq!(combine(1, 2, 2, 3), Some((5, 6)));
        assert_eq!(combine(1, 4, 3, 6), Some((9, 12)));
        assert_eq!(combine(1, 4, 2, 6), None);
        assert_eq!(combine(0, 1, 0, 1), Some((0, 1)));
    }

    #[test]
    fn small_factors_are_found() {
        assert!(check_irreducible(&[-2, 0, 1]).is_ok());
        assert!(check_irreducible(&[1, 0, 1]).is_ok());
        assert!(check_irreducible(&[-1, -1, 0, 1]).is_ok());
        assert!(matches!(
            check_irreducible(&[-1, 0, 1]),
            Err(EquidistError::Reducible(_))
        ));
        // (x² + 1)(x² + 2) and (x² + x + 1)(x² − x + 1)
        assert!(check_irreducible(&[2, 0, 3, 0, 1]).is_err());
        assert!(check_irreducible(&[1, 0, 1, 0, 1]).is_err());
        // x⁴ + 1 and x⁴ − 10x² + 1 are irreducible
        assert!(check_irreducible(&[1, 0, 0, 0, 1]).is_ok());
        assert!(check_irreducible(&[1, 0, -10, 0, 1]).is_ok());
        assert_eq!(
            check_irreducible(&[1, 0, 0, 0, 0, 1]),
            Err(EquidistError::DegreeTooLarge(5))
        );
    }
}
