mod common;

use charlab::characters::{character_order, AdditiveCharacter, MultiplicativeCharacter};
use charlab::charsums::{ChiRule, PsiRule};
use charlab::field::{make_field, FieldElement, FiniteField};
use charlab::formulas::{eval_formula, parse_source, DefinableFormula, Env, PredicateExpr};
use charlab::measure::{
    additive_cosets, case_decompose, count_and_fit, count_definable, fit_counts, fubini_check, integrate_at,
    integrate_predicate, simplest_rational, MeasureError, DEFAULT_MAX_ORDER,
};
use common::{for_each_point, CORPUS};
use proptest::prelude::*;

const BUDGET: u64 = 10_000_000;

fn primes(lo: u64, hi: u64) -> Vec<(u64, u32)> {
    (lo.max(2)..=hi)
        .filter(|&n| (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0))
        .map(|p| (p, 1))
        .collect()
}

fn formula(src: &str) -> DefinableFormula {
    parse_source(src).unwrap().formula(None).unwrap().clone()
}

fn predicate(src: &str) -> (PredicateExpr, Env) {
    let p = parse_source(src).unwrap();
    (p.predicate(None).unwrap().clone(), p.env())
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = (r as u128 * b as u128 % m as u128) as u64;
        }
        b = (b as u128 * b as u128 % m as u128) as u64;
        e >>= 1;
    }
    r
}

/// Points on `y² = x³ + x` over `F_p`, by Euler's criterion.
fn elliptic_count(p: u64) -> u64 {
    (0..p)
        .map(|x| {
            let r = (x * x % p * x + x) % p;
            match r {
                0 => 1,
                _ if pow_mod(r, (p - 1) / 2, p) == 1 => 2,
                _ => 0,
            }
        })
        .sum()
}

#[test]
fn squares_have_half_the_line() {
    let phi = formula("formula 1: exists t (t^2 - x1 = 0)");
    let fields = primes(11, 97);
    let est = count_and_fit(&phi, &[], &fields, BUDGET).unwrap();
    assert_eq!((est.d, est.mu_num, est.mu_den), (1, 1, 2));
    for r in &est.residuals {
        assert_eq!(r.count, r.q.div_ceil(2));
        assert!((r.residual - 0.5 / (r.q as f64).sqrt()).abs() < 1e-12);
    }
    assert!((est.c - 0.5 / 11f64.sqrt()).abs() < 1e-12);
}

#[test]
fn elliptic_curve_fits_a_line() {
    let phi = formula("formula 2: x2^2 - x1^3 - x1 = 0");
    let fields = primes(11, 199);
    let est = count_and_fit(&phi, &[], &fields, BUDGET).unwrap();
    assert_eq!((est.d, est.mu_num, est.mu_den), (1, 1, 1));
    assert!(est.c <= 2.0, "C = {}", est.c);
    for r in &est.residuals {
        assert_eq!(r.count, elliptic_count(r.q), "q = {}", r.q);
        let want = (r.count as f64 - r.q as f64).abs() / (r.q as f64).sqrt();
        assert!((r.residual - want).abs() < 1e-12);
    }
}

#[test]
fn empty_family_is_degenerate() {
    let phi = formula("formula 1: x1 = 0 and x1 - 1 = 0");
    let est = count_and_fit(&phi, &[], &primes(5, 31), BUDGET).unwrap();
    assert_eq!((est.d, est.mu_num, est.c), (0, 0, 0.0));
}

#[test]
fn parameters_are_reduced_per_field() {
    // x1^2 = a has 1 + (a|p) solutions.
    let phi = formula("formula 2: x1^2 - x2 = 0");
    for (p, _) in primes(3, 41) {
        let k = make_field(p, 1).unwrap();
        let n = count_definable(&phi, &k, &[k.from_int(2)], BUDGET).unwrap();
        let want = if pow_mod(2, (p - 1) / 2, p) == 1 { 2 } else { 0 };
        assert_eq!(n, want, "p = {p}");
    }
    let est = count_and_fit(&phi, &[0], &primes(5, 31), BUDGET).unwrap();
    assert_eq!((est.d, est.mu_num, est.mu_den), (0, 1, 1));
}

#[test]
fn fitting_errors() {
    let phi = formula("formula 1: x1 = 0");
    assert_eq!(
        count_and_fit(&phi, &[], &primes(5, 11), BUDGET),
        Err(MeasureError::TooFewPrimes(3))
    );
    let slopes = [(11, 1), (13, 1), (17, 17), (19, 361)];
    assert!(matches!(
        fit_counts(&slopes),
        Err(MeasureError::InconsistentDimension { .. })
    ));
    let plane = formula("formula 3: x1 = x1");
    assert!(matches!(
        count_and_fit(&plane, &[], &primes(200, 240), 1_000_000),
        Err(MeasureError::BudgetExceeded { .. })
    ));
}

#[test]
fn multiplicity_recognition() {
    assert_eq!(simplest_rational(0.5094, 0.1), (1, 2));
    assert_eq!(simplest_rational(1.07, 0.14), (1, 1));
    assert_eq!(simplest_rational(0.3334, 0.001), (1, 3));
    assert_eq!(simplest_rational(2.0 / 7.0, 1e-4), (2, 7));
    // The three cells of y^3 = x with x ≠ 0 over p ≡ 1 mod 3.
    let counts: Vec<(u64, u64)> = primes(7, 200)
        .into_iter()
        .filter(|(p, _)| p % 3 == 1)
        .map(|(p, _)| (p, (p - 1) / 3))
        .collect();
    let est = fit_counts(&counts).unwrap();
    assert_eq!((est.d, est.mu_num, est.mu_den), (1, 1, 3));
}

#[test]
fn orthogonality_average() {
    let (pred, env) = predicate("predicate 1: chi(x1)");
    let b = formula("formula 1: x1 != 0");
    let k = make_field(7, 1).unwrap();
    for idx in 1..6 {
        let chi = MultiplicativeCharacter::new(&k, idx);
        let psi = AdditiveCharacter::standard(&k);
        let v = integrate_at(&pred, &env, &b, &k, &[], &psi, &chi, BUDGET).unwrap();
        assert!(v.abs < 1e-9);
        assert_eq!(v.count, 6);
    }
}

#[test]
fn gauss_average_has_exact_magnitude() {
    let (pred, env) = predicate("predicate 1: psi(x1) * chi(x1)");
    let b = formula("formula 1: x1 != 0");
    let fields = primes(3, 199);
    let r = integrate_predicate(
        &pred,
        &env,
        &b,
        &[],
        &fields,
        PsiRule::Standard,
        ChiRule::Index(1),
        BUDGET,
    )
    .unwrap();
    assert_eq!(r.values.len(), fields.len());
    for v in &r.values {
        let q = v.q as f64;
        assert!((v.abs - q.sqrt() / (q - 1.0)).abs() < 1e-9, "q = {}", v.q);
    }
    let tail = &r.values[r.values.len() / 2..];
    let want = tail.iter().map(|v| v.abs).fold(0.0, f64::max);
    assert_eq!(r.tail_max, want);
}

#[test]
fn gauss_slope_is_minus_one_half() {
    let (pred, env) = predicate("predicate 1: psi(x1) * chi(x1)");
    let b = formula("formula 1: x1 != 0");
    let r = integrate_predicate(
        &pred,
        &env,
        &b,
        &[],
        &primes(50, 500),
        PsiRule::Standard,
        ChiRule::Order(2),
        BUDGET,
    )
    .unwrap();
    assert!((r.slope.unwrap() + 0.5).abs() < 0.05, "slope {:?}", r.slope);
}

#[test]
fn constant_and_indicator_averages_are_exact() {
    let (one, env) = predicate("predicate 2: 1");
    let (ind, ienv) = predicate("predicate 2: ind(exists t (t^2 - x1 = 0))");
    let b = formula("formula 2: x1*x2 - 1 = 0 or x2 = 0");
    for &(p, e) in &[(5, 1), (7, 1), (2, 3), (3, 2), (13, 1)] {
        let k = make_field(p, e).unwrap();
        let psi = AdditiveCharacter::standard(&k);
        let chi = MultiplicativeCharacter::new(&k, 1);
        let v = integrate_at(&one, &env, &b, &k, &[], &psi, &chi, BUDGET).unwrap();
        assert_eq!((v.re, v.im), (1.0, 0.0));
        let mut d = 0u64;
        let mut total = 0u64;
        for_each_point(&k, 2, |x| {
            if eval_formula(&k, &b, x).unwrap() {
                total += 1;
                if k.elements().any(|t| k.mul(t, t) == x[0]) {
                    d += 1;
                }
            }
        });
        let v = integrate_at(&ind, &ienv, &b, &k, &[], &psi, &chi, BUDGET).unwrap();
        assert_eq!(v.count, total);
        assert_eq!(v.re, d as f64 / total as f64);
    }
}

#[test]
fn empty_set_averages_to_zero() {
    let (one, env) = predicate("predicate 1: 1");
    let b = formula("formula 1: x1^2 + 1 = 0");
    let k = make_field(7, 1).unwrap();
    let v = integrate_at(
        &one,
        &env,
        &b,
        &k,
        &[],
        &AdditiveCharacter::standard(&k),
        &MultiplicativeCharacter::new(&k, 1),
        BUDGET,
    )
    .unwrap();
    assert_eq!((v.count, v.abs), (0, 0.0));
}

#[test]
fn counting_measure_is_additive() {
    let d1 = formula("formula 1: x1 != 0 and exists t (t^2 - x1 = 0)");
    let d2 = formula("formula 1: not exists t (t^2 - x1 = 0)");
    let both = formula("formula 1: x1 != 0");
    for (p, _) in primes(3, 61) {
        let k = make_field(p, 1).unwrap();
        let c = |f: &DefinableFormula| count_definable(f, &k, &[], BUDGET).unwrap();
        assert_eq!(c(&d1) + c(&d2), c(&both));
    }
}

fn chars(k: &FiniteField, idx: i128) -> (AdditiveCharacter, MultiplicativeCharacter) {
    (
        AdditiveCharacter::standard(k),
        MultiplicativeCharacter::new(k, idx),
    )
}

#[test]
fn fubini_examples() {
    let k = make_field(7, 1).unwrap();
    let (psi, chi) = chars(&k, 1);
    let (pred, env) = predicate("predicate 2: psi(x1) * chi(x2)");
    let r = fubini_check(
        &pred,
        &env,
        &formula("formula 2: x1 = x1"),
        1,
        &k,
        &[],
        &psi,
        &chi,
        BUDGET,
    )
    .unwrap();
    assert!(r.delta < 1e-12 && r.hypothesis_holds);
    assert!(r.lhs_re.hypot(r.lhs_im) < 1e-12);

    let k = make_field(11, 1).unwrap();
    let (psi, chi) = chars(&k, 1);
    let (pred, env) = predicate("predicate 2: psi(x2)");
    let b = formula("formula 2: x2 - x1^2 = 0");
    let r = fubini_check(&pred, &env, &b, 1, &k, &[], &psi, &chi, BUDGET).unwrap();
    assert!(r.delta < 1e-12);
    assert_eq!((r.fiber_sizes.clone(), r.projection_size), (vec![1], 11));
    // Projecting onto y instead gives fibers of sizes 1 and 2.
    let (pred2, env2) = predicate("predicate 2: psi(x1)");
    let b2 = formula("formula 2: x1 - x2^2 = 0");
    let r = fubini_check(&pred2, &env2, &b2, 1, &k, &[], &psi, &chi, BUDGET).unwrap();
    assert!(!r.hypothesis_holds);
    assert_eq!(r.fiber_sizes, vec![1, 2]);

    let k = make_field(13, 1).unwrap();
    let (psi, chi) = chars(&k, 1);
    let (pred, env) = predicate("predicate 2: chi(x1) * chi(x2)");
    let b = formula("formula 2: x1*x2 - 1 = 0");
    let r = fubini_check(&pred, &env, &b, 1, &k, &[], &psi, &chi, BUDGET).unwrap();
    assert!(r.delta < 1e-12);
    assert!((r.lhs_re - 1.0).abs() < 1e-12 && r.lhs_im.abs() < 1e-12);
    assert!((r.rhs_re - 1.0).abs() < 1e-12);
}

#[test]
fn quadratic_decomposition_over_f7() {
    let k = make_field(7, 1).unwrap();
    let (psi, chi) = chars(&k, 3);
    assert_eq!(character_order(&k, &chi), 2);
    let (pred, env) = predicate("predicate 1: chi(x1)");
    let b = formula("formula 1: x1 != 0");
    let d = case_decompose(&pred, &env, &b, &k, &[], &psi, &chi, DEFAULT_MAX_ORDER, BUDGET).unwrap();
    assert_eq!(d.cells.len(), 2);
    let as_ints =
        |c: &charlab::measure::Cell| -> Vec<u64> { c.points.iter().map(|x| x[0].encoding()).collect() };
    let mut sets: Vec<Vec<u64>> = d.cells.iter().map(as_ints).collect();
    sets.sort();
    assert_eq!(sets, vec![vec![1, 2, 4], vec![3, 5, 6]]);
    assert!(d.cells.iter().all(|c| c.formula_matches == Some(true)));
    assert!(d.reassembled_re.hypot(d.reassembled_im) < 1e-12);
    assert!(d.delta < 1e-12);
    for (src, want) in [
        ("formula 1: exists t (t^2 - x1 = 0)", vec![1, 2, 4]),
        ("formula 1: exists t (t^2 - 3*x1 = 0)", vec![3, 5, 6]),
    ] {
        let f = formula(src);
        let got: Vec<u64> = k
            .nonzero_elements()
            .filter(|&x| eval_formula(&k, &f, &[x]).unwrap())
            .map(FieldElement::encoding)
            .collect();
        assert_eq!(got, want);
    }
}

#[test]
fn trivial_character_has_one_cell() {
    let k = make_field(11, 1).unwrap();
    let (psi, chi) = chars(&k, 0);
    let (pred, env) = predicate("predicate 1: chi(x1) * psi(x1)");
    let b = formula("formula 1: x1 != 0");
    let d = case_decompose(&pred, &env, &b, &k, &[], &psi, &chi, DEFAULT_MAX_ORDER, BUDGET).unwrap();
    assert_eq!(d.order, 1);
    assert_eq!(d.cells.len(), 1);
    assert_eq!(d.cells[0].points.len(), 10);
    assert_eq!(d.cells[0].formula_matches, Some(true));
}

#[test]
fn order_bound_is_enforced() {
    let k = make_field(31, 1).unwrap();
    let (psi, chi) = chars(&k, 1);
    let (pred, env) = predicate("predicate 1: chi(x1)");
    let b = formula("formula 1: x1 != 0");
    assert_eq!(
        case_decompose(&pred, &env, &b, &k, &[], &psi, &chi, DEFAULT_MAX_ORDER, BUDGET).unwrap_err(),
        MeasureError::OrderTooLarge { order: 30, bound: 12 }
    );
    assert!(case_decompose(&pred, &env, &b, &k, &[], &psi, &chi, 30, BUDGET).is_ok());
}

#[test]
fn trace_kernel_cosets() {
    let k = make_field(3, 2).unwrap();
    let r = additive_cosets(&k, &AdditiveCharacter::standard(&k));
    assert_eq!((r.classes, r.class_size, r.exact), (3, 3, true));
    // Independent check: each level set is a + ker(Tr).
    let kernel: Vec<FieldElement> = k.elements().filter(|&x| k.trace(x) == 0).collect();
    assert_eq!(kernel.len(), 3);
    for a in k.elements() {
        let mut level: Vec<FieldElement> = k.elements().filter(|&x| k.trace(x) == k.trace(a)).collect();
        let mut coset: Vec<FieldElement> = kernel.iter().map(|&t| k.add(a, t)).collect();
        level.sort();
        coset.sort();
        assert_eq!(level, coset);
    }
    for &(p, e) in &[(2, 3), (5, 2), (3, 3), (7, 1), (2, 5)] {
        let k = make_field(p, e).unwrap();
        for c in [1, 2, 3] {
            let psi = AdditiveCharacter::twisted(k.from_int(c));
            if psi.is_trivial() {
                continue;
            }
            let r = additive_cosets(&k, &psi);
            assert!(r.exact, "F_{} twist {c}", k.q());
            assert_eq!(r.classes, p);
        }
    }
}

fn divisors_up_to(n: u64, bound: u64) -> Vec<u64> {
    (1..=bound.min(n)).filter(|d| n.is_multiple_of(*d)).collect()
}

const FIELDS: [(u64, u32); 10] = [
    (3, 1),
    (5, 1),
    (7, 1),
    (13, 1),
    (2, 2),
    (3, 2),
    (31, 1),
    (2, 3),
    (127, 1),
    (7, 3),
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cells_partition_the_domain(fi in 0usize..FIELDS.len(), src in 0usize..CORPUS.len(), ri in 0usize..8, nonzero: bool) {
        let (p, e) = FIELDS[fi];
        let k = make_field(p, e).unwrap();
        let prog = parse_source(CORPUS[src]).unwrap();
        let Some(pred) = prog.predicate(None) else { return Ok(()) };
        prop_assume!(pred.arity == 1 || k.q() <= 31);
        let env = prog.env();
        let rs = divisors_up_to(k.q() - 1, DEFAULT_MAX_ORDER);
        let r = rs[ri % rs.len()];
        let chi = MultiplicativeCharacter::new(&k, ((k.q() - 1) / r) as i128);
        let psi = AdditiveCharacter::standard(&k);
        let b = DefinableFormula {
            arity: pred.arity,
            root: if nonzero { formula("formula 1: x1 != 0").root } else { charlab::formulas::Formula::True },
        };
        let b = if pred.arity == 1 { b } else { DefinableFormula { arity: pred.arity, root: formula("formula 2: x1*x2 != 0 or x1 = x2").root } };
        let d = case_decompose(pred, &env, &b, &k, &[], &psi, &chi, DEFAULT_MAX_ORDER, BUDGET).unwrap();
        prop_assert_eq!(d.order, r);
        let mut all: Vec<Vec<FieldElement>> = d.cells.iter().flat_map(|c| c.points.clone()).collect();
        let n = all.len();
        all.sort();
        all.dedup();
        prop_assert_eq!(all.len(), n);
        let mut want = Vec::new();
        for_each_point(&k, pred.arity, |x| {
            if eval_formula(&k, &b, x).unwrap() {
                want.push(x.to_vec());
            }
        });
        want.sort();
        prop_assert_eq!(all, want);
        for c in &d.cells {
            prop_assert_ne!(c.formula_matches, Some(false));
            if e == 1 && pred.root.chi_terms().iter().all(|t| !matches!(t, charlab::formulas::FTerm::Kappa { .. })) {
                prop_assert_eq!(c.formula_matches, Some(true));
            }
        }
        prop_assert!(d.delta < 1e-9);
    }

    #[test]
    fn fitted_estimates_respect_their_residuals(d in 1u32..3, num in 1u64..5, den in 1u64..5, noise in prop::collection::vec(-1i64..=1, 12)) {
        let ps = primes(101, 211);
        let counts: Vec<(u64, u64)> = ps
            .iter()
            .zip(noise.iter().cycle())
            .map(|(&(q, _), &z)| {
                let main = q.pow(d) * num / den;
                let err = z * (q as f64).powf(d as f64 - 0.5).floor() as i64 / 4;
                (q, (main as i64 + err).max(0) as u64)
            })
            .collect();
        prop_assume!(counts.iter().all(|&(_, c)| c > 0));
        let est = fit_counts(&counts).unwrap();
        prop_assert_eq!(est.d, d);
        let g = num_integer::gcd(num, den);
        prop_assert_eq!((est.mu_num as u64, est.mu_den as u64), (num / g, den / g));
        let max = est.residuals.iter().map(|r| r.residual).fold(0.0, f64::max);
        prop_assert_eq!(est.c, max);
    }
}
