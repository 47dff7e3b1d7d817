#![allow(dead_code)]

use charlab::characters::{chi_eval, psi_eval, AdditiveCharacter, MultiplicativeCharacter};
use charlab::field::{FieldElement, FiniteField};
use charlab::formulas::{PolyExpr, Rational};
use charlab::theta::{Fiber, ThetaSpec};
use num_complex::Complex64;
use rand::Rng;

/// Covers every production of the grammar at least once.
pub const CORPUS: &[&str] = &[
    "poly 2: x1^2*x2 - 3",
    "poly 1: 0",
    "poly 3: (x1 + x2 + x3)^3",
    "poly 2: 2 x1 x2 + -x1 - -x2",
    "poly p 1: x1^10 / 1 + 6/3",
    "poly 2: (x1 - x2)*(x1 + x2) # difference of squares",
    "laurent 1: (1/2) Y1 Z1^-1 + (1/2) Y1^-1 Z1",
    "laurent 1: Y1",
    "laurent 2: Y1 Z2 - Y1^-1 Z2^-1",
    "laurent 2: 3/4*Y1^2*Y2^-1 - 1/3 + Z1*Z2",
    "formula 1: exists t (t^2 - x1 = 0)",
    "formula 1: x1 = 0",
    "formula 1: x1 = 0 and x1 = 1",
    "formula 1: true",
    "formula 1: false or x1 != 3",
    "formula 2: not (x1 = 0 or x2 = 0)",
    "formula 2: (x1 = 1 or x2 = 1) and not x1*x2 = 0",
    "formula 2: exists t (t^3 = x1 + x2) or (x1 - 1)^2 = x2",
    "formula 2: ((x1 = 0)) and (x2 = 0 and (x1 = x2 or x1 = 1))",
    "formula 3: not not x1 + x2 + x3 != 0",
    "formula 1: exists t (x1 t = 1)",
    "formula 2: (x1 + 1)*x2 = 0 or not exists t (t^2 = x1*x2 + 3)",
    "linmap 2: x1 + x2, -x1, 3 x2",
    "linmap 3: 0, x3 - 2*x1",
    "multmap 2: x1*x2, x1^-1, 1",
    "multmap 3: x1^2*x3^-5",
    "predicate 1: psi(x1) * chi(x1)",
    "predicate 1: psi(x1)",
    "predicate 1: ind(exists t (t^2 - x1 = 0)) * 1",
    "predicate 2: 1/2 + i * psi(x1*x2 - 1) - chi(x1^-1*x2^2)",
    "predicate 1: -psi(x1) - -1/3",
    "predicate 1: conj(psi(x1) + chi(x1)) * abs(chi(x1 + 1))",
    "predicate 1: -(psi(x1) * chi(x1)) + (1 - psi(2*x1)) * (i - 1)",
    "predicate 2: ind(x1 = 0 or x2 != 0) - ind(not x1 = x2)",
    "predicate 1: psi(x1) * (chi(x1) * psi(x1)) * 2",
    "predicate 1: --chi(x1) - (psi(x1) - 1)",
    "theta sq 1: roots(z^2 = a1) psi(z1) chi(1)\npredicate 1: theta sq(x1)",
    "theta id 1: roots(z - a1) psi(z1) chi(z1)",
    "theta c 0: point(1, -1/2) psi(z1 - 2*z2) chi(z1^2*z2^-1)",
    "theta pr 2: roots(z^2 + a1 z + a2) * roots(z = a2) psi(z1 + z2) chi(z2)",
    "theta u 1: roots(z^3 = a1) * point(0) | point(1) * roots(z = a1) psi(z1) chi(1)",
    "theta n 1: (roots(z - a1) | point(2)) * (point(3) * point(4)) psi(0) chi(z1*z2*z3)",
    "theta nu 1: (roots(z - a1) | point(5)) | point(6) psi(-z1) chi(z1^-1)",
    "kappa k 1: y^2 - x1 => y^4",
    "kappa 2: x1*y^3 + x2 => y + x1",
    "kappa sq 1: y^2 - x1 => y^4;\npredicate 1: psi(kappa sq(x1 + 1)) * chi(kappa sq(x1))",
    "kappa k2 2: y - x1 => y*x2\ntheta t2 2: roots(z^2 = a1 + a2) psi(z1) chi(z1)\npredicate 2: theta t2(kappa k2(x1, x2), x2^-1)",
    "witness sqrt2 1: minpoly x1^2 - 2, chi x1 -> 1/3, tolerance 1/20, unity 2 1 -1 -> 1/2, order 50, primes 3 1000000",
    "witness 1: minpoly x1^3 - x1 - 1, chi x1 + 1/2 -> 7/4, psi 2 x1^2 -> 1/5, psi 1 -> 0, tolerance 1",
    "poly a 1: x1; poly b 2: x2 x1; formula 2: x1 = x2; predicate 1: 3",
];

pub fn for_each_point(k: &FiniteField, n: usize, mut f: impl FnMut(&[FieldElement])) {
    let elems: Vec<FieldElement> = k.elements().collect();
    let mut idx = vec![0usize; n];
    loop {
        let pt: Vec<FieldElement> = idx.iter().map(|&i| elems[i]).collect();
        f(&pt);
        let mut j = 0;
        loop {
            if j == n {
                return;
            }
            idx[j] += 1;
            if idx[j] < elems.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// Fiber by exhaustive scan: `z` is a root iff `P(a, z) = 0`.
pub fn oracle_fiber(k: &FiniteField, f: &Fiber, a: &[FieldElement]) -> Option<Vec<Vec<FieldElement>>> {
    Some(match f {
        Fiber::Roots(p) => k
            .elements()
            .filter(|z| {
                let mut pt = a.to_vec();
                pt.push(*z);
                p.eval(k, &pt).is_zero()
            })
            .map(|z| vec![z])
            .collect(),
        Fiber::Point(v) => vec![v
            .iter()
            .map(|c| k.from_ratio(*c.numer(), *c.denom()))
            .collect::<Option<Vec<_>>>()?],
        Fiber::Product(parts) => {
            let mut acc = vec![vec![]];
            for part in parts {
                let pts = oracle_fiber(k, part, a)?;
                let mut next = Vec::new();
                for x in &acc {
                    for y in &pts {
                        next.push([x.clone(), y.clone()].concat());
                    }
                }
                acc = next;
            }
            acc
        }
        Fiber::Union(parts) => {
            let mut acc = Vec::new();
            for part in parts {
                acc.extend(oracle_fiber(k, part, a)?);
            }
            acc
        }
    })
}

/// Direct evaluation of `Σ Ψ(g·z) χ(z^h)`, with powers taken by repeated
/// multiplication.
pub fn oracle_theta(
    k: &FiniteField,
    spec: &ThetaSpec,
    a: &[FieldElement],
    psi: &AdditiveCharacter,
    chi: &MultiplicativeCharacter,
) -> Option<Complex64> {
    let pts = oracle_fiber(k, &spec.fiber, a)?;
    let mut total = Complex64::new(0.0, 0.0);
    for z in pts {
        let mut lin = k.zero();
        let mut mon = k.one();
        for ((&gi, &hi), &zi) in spec.g.iter().zip(&spec.h).zip(&z) {
            lin = k.add(lin, k.mul(k.from_int(gi as i128), zi));
            let base = if hi < 0 {
                if zi.is_zero() {
                    mon = k.zero();
                    continue;
                }
                k.inv(zi).unwrap()
            } else {
                zi
            };
            for _ in 0..hi.unsigned_abs() {
                mon = k.mul(mon, base);
            }
        }
        total += psi_eval(k, psi, lin).to_complex() * chi_eval(k, chi, mon).to_complex();
    }
    Some(total)
}

fn random_poly(rng: &mut impl Rng, params: usize) -> PolyExpr {
    // Monic in z so that the specialisation never vanishes.
    let deg = rng.gen_range(1..=3u32);
    let mut terms = vec![];
    let mut lead = vec![0u32; params + 1];
    lead[params] = deg;
    terms.push((lead, 1i128));
    for _ in 0..rng.gen_range(1..=3) {
        let mut e: Vec<u32> = (0..params).map(|_| rng.gen_range(0..=2)).collect();
        e.push(rng.gen_range(0..deg));
        terms.push((e, rng.gen_range(-3..=3)));
    }
    PolyExpr::new(params + 1, terms)
}

fn random_fiber(rng: &mut impl Rng, params: usize, depth: u32) -> Fiber {
    match if depth == 0 {
        rng.gen_range(0..2)
    } else {
        rng.gen_range(0..4)
    } {
        0 => Fiber::Roots(random_poly(rng, params)),
        1 => {
            let n = rng.gen_range(1..=2);
            Fiber::Point(
                (0..n)
                    .map(|_| Rational::from_integer(rng.gen_range(-4..=4)))
                    .collect(),
            )
        }
        2 => Fiber::Product((0..2).map(|_| random_fiber(rng, params, depth - 1)).collect()),
        _ => {
            let first = random_fiber(rng, params, depth - 1);
            let mut second = random_fiber(rng, params, depth - 1);
            while second.dim() != first.dim() {
                second = random_fiber(rng, params, depth - 1);
            }
            Fiber::Union(vec![first, second])
        }
    }
}

/// Random Θ specification with `params` parameters.
pub fn random_theta(rng: &mut impl Rng, params: usize) -> ThetaSpec {
    let fiber = random_fiber(rng, params, 2);
    let m = fiber.dim();
    ThetaSpec {
        params,
        fiber,
        g: (0..m).map(|_| rng.gen_range(-2..=2)).collect(),
        h: (0..m).map(|_| rng.gen_range(-2..=2)).collect(),
    }
}
