use charlab::field::{make_field, FieldError, FieldOptions, FiniteField};
use proptest::prelude::*;

/// Naive `F_p[X]/(m)` multiplication on coefficient vectors, independent of the library.
fn naive_mul(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    let e = m.len() - 1;
    let mut prod = vec![0u64; 2 * e];
    for i in 0..e {
        for j in 0..e {
            prod[i + j] = (prod[i + j] + a[i] * b[j]) % p;
        }
    }
    for k in (e..2 * e).rev() {
        let c = prod[k];
        if c == 0 {
            continue;
        }
        prod[k] = 0;
        for i in 0..e {
            prod[k - e + i] = (prod[k - e + i] + (p - c) * m[i] % p) % p;
        }
    }
    prod.truncate(e);
    prod
}

fn naive_pow(a: &[u64], n: u64, m: &[u64], p: u64) -> Vec<u64> {
    let e = m.len() - 1;
    let mut acc = vec![0u64; e];
    acc[0] = 1;
    for _ in 0..n {
        acc = naive_mul(&acc, a, m, p);
    }
    acc
}

fn oracle_trace(f: &FiniteField, x: u64) -> u64 {
    let m = f.modulus();
    let c = f.coeffs(f.element(x).unwrap());
    let p = f.p();
    let mut acc = vec![0u64; f.e() as usize];
    let mut y = c;
    for _ in 0..f.e() {
        for (s, t) in acc.iter_mut().zip(&y) {
            *s = (*s + t) % p;
        }
        y = naive_pow(&y, p, m, p);
    }
    assert!(acc[1..].iter().all(|&c| c == 0));
    acc[0]
}

const TEST_FIELDS: &[(u64, u32)] = &[
    (2, 1),
    (3, 1),
    (7, 1),
    (101, 1),
    (2, 3),
    (2, 4),
    (3, 2),
    (3, 3),
    (5, 2),
    (7, 2),
    (11, 2),
    (7, 3),
    (2, 8),
];

#[test]
fn spec_examples() {
    let f7 = make_field(7, 1).unwrap();
    assert_eq!(f7.q(), 7);
    assert_eq!(f7.generator().encoding(), 3);
    assert_eq!(f7.mul(f7.from_int(3), f7.from_int(5)), f7.one());
    assert_eq!(f7.inv(f7.zero()), Err(FieldError::DivisionByZero));
    assert_eq!(f7.trace(f7.from_int(5)), 5);
    assert_eq!(f7.discrete_log(f7.from_int(2)), Ok(2));
    assert_eq!(f7.discrete_log(f7.one()), Ok(0));
    assert_eq!(f7.discrete_log(f7.zero()), Err(FieldError::ZeroArgument));

    let f2 = make_field(2, 1).unwrap();
    assert_eq!((f2.q(), f2.generator().encoding()), (2, 1));

    let f9 = make_field(3, 2).unwrap();
    assert_eq!(f9.modulus(), &[1, 0, 1]);
    let x = f9.from_coeffs(&[0, 1]);
    assert_eq!(f9.mul(x, x), f9.from_int(2));
    assert_eq!(f9.trace(x), 0);
    assert_eq!(f9.trace(f9.one()), 2);
}

#[test]
fn generator_minimality_oracle() {
    for &(p, e) in TEST_FIELDS {
        let f = make_field(p, e).unwrap();
        let n = f.q() - 1;
        let full_order = |x: u64| {
            let c = f.coeffs(f.element(x).unwrap());
            let mut y = c.clone();
            for k in 1..=n {
                if y.iter().enumerate().all(|(i, &v)| v == u64::from(i == 0)) {
                    return k == n;
                }
                y = naive_mul(&y, &c, f.modulus(), p);
            }
            false
        };
        let oracle = (1..f.q()).find(|&x| full_order(x)).unwrap();
        assert_eq!(f.generator().encoding(), oracle, "F_{p}^{e}");
    }
}

#[test]
fn multiplication_matches_naive_reduction() {
    for &(p, e) in TEST_FIELDS {
        let f = make_field(p, e).unwrap();
        let step = (f.q() / 40).max(1);
        for a in (0..f.q()).step_by(step as usize) {
            for b in (0..f.q()).step_by(step as usize + 1) {
                let (ea, eb) = (f.element(a).unwrap(), f.element(b).unwrap());
                let want = naive_mul(&f.coeffs(ea), &f.coeffs(eb), f.modulus(), p);
                assert_eq!(f.coeffs(f.mul(ea, eb)), want);
            }
        }
    }
}

#[test]
fn trace_matches_frobenius_oracle_and_fibers_are_balanced() {
    for &(p, e) in TEST_FIELDS {
        let f = make_field(p, e).unwrap();
        let mut fiber = vec![0u64; p as usize];
        for x in f.elements() {
            let t = f.trace(x);
            if f.q() <= 400 {
                assert_eq!(t, oracle_trace(&f, x.encoding()));
            }
            assert_eq!(t, f.trace_by_frobenius(x));
            fiber[t as usize] += 1;
        }
        let expect = f.q() / p;
        assert!(fiber.iter().all(|&c| c == expect), "F_{p}^{e}: {fiber:?}");
    }
}

#[test]
fn dlog_inverts_generator_powers() {
    for &(p, e) in TEST_FIELDS.iter().chain(&[(9973, 1), (3, 8)]) {
        let f = make_field(p, e).unwrap();
        let mut x = f.one();
        for k in 0..f.q() - 1 {
            assert_eq!(f.discrete_log(x), Ok(k));
            x = f.mul(x, f.generator());
        }
        assert_eq!(x, f.one());
    }
}

#[test]
fn bsgs_fallback_agrees_on_large_prime() {
    let p = 1_000_003;
    let opts = FieldOptions {
        dlog_cap: 1000,
        ..Default::default()
    };
    let f = FiniteField::new(p, 1, opts).unwrap();
    assert!(!f.has_dlog_table());
    for k in [0u64, 1, 2, 999, 123_456, p - 2] {
        let x = f.pow(f.generator(), k);
        assert_eq!(f.discrete_log(x), Ok(k));
    }
}

#[test]
fn user_modulus_is_honoured() {
    // x^2 + x + 2 is irreducible mod 3 but not the default
    let opts = FieldOptions {
        modulus: Some(vec![2, 1, 1]),
        ..Default::default()
    };
    let f = FiniteField::new(3, 2, opts).unwrap();
    assert_eq!(f.modulus(), &[2, 1, 1]);
    let x = f.from_coeffs(&[0, 1]);
    assert_eq!(f.coeffs(f.mul(x, x)), vec![1, 2]);
}

fn field_strategy() -> impl Strategy<Value = (u64, u32)> {
    prop::sample::select(TEST_FIELDS.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_axioms((p, e) in field_strategy(), seeds in prop::collection::vec(any::<u64>(), 3 * 200)) {
        let f = make_field(p, e).unwrap();
        for t in seeds.chunks(3) {
            let a = f.element(t[0] % f.q()).unwrap();
            let b = f.element(t[1] % f.q()).unwrap();
            let c = f.element(t[2] % f.q()).unwrap();
            prop_assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
            prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
            prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
            prop_assert_eq!(f.add(a, f.neg(a)), f.zero());
            prop_assert_eq!(f.sub(f.add(a, b), b), a);
            if !a.is_zero() {
                prop_assert_eq!(f.mul(a, f.inv(a).unwrap()), f.one());
            }
            prop_assert_eq!(f.trace(f.add(a, b)), (f.trace(a) + f.trace(b)) % p);
            prop_assert_eq!(f.trace(f.pow(a, p)), f.trace(a));
        }
    }
}

#[test]
fn ten_thousand_triples_per_field() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for &(p, e) in TEST_FIELDS {
        let f = make_field(p, e).unwrap();
        for _ in 0..10_000 {
            let [a, b, c] = [0; 3].map(|_| f.element(rng.gen_range(0..f.q())).unwrap());
            assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
            assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
            if !a.is_zero() {
                assert_eq!(f.mul(a, f.inv(a).unwrap()), f.one());
            }
        }
    }
}
