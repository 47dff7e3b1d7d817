use std::time::Instant;

use charlab::arith::{pow_mod, primes_in_range};
use charlab::characters::RationalAngle;
use charlab::equidist::*;
use charlab::field::make_field;
use charlab::formulas::{parse_source, Rational};
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

fn r(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

/// Limits of half-open boxes: each end sits at a candidate coordinate and
/// either includes or excludes the point there, so every count a box can
/// realise is seen with its limiting volume.
fn oracle(dim: usize, pts: &[Vec<Rational>]) -> Rational {
    let n = pts.len() as i128;
    let mut ends: Vec<Vec<Rational>> = vec![vec![<Rational as Zero>::zero(), <Rational as One>::one()]; dim];
    for p in pts {
        for (j, &c) in p.iter().enumerate() {
            ends[j].push(c);
        }
    }
    let mut intervals: Vec<Vec<(Rational, bool, Rational, bool)>> = Vec::new();
    for e in &ends {
        let mut iv = Vec::new();
        for &lo in e {
            for &hi in e {
                if lo > hi {
                    continue;
                }
                for lo_in in [true, false] {
                    for hi_in in [true, false] {
                        iv.push((lo, lo_in, hi, hi_in));
                    }
                }
            }
        }
        intervals.push(iv);
    }
    let inside = |c: Rational, &(lo, lo_in, hi, hi_in): &(Rational, bool, Rational, bool)| {
        (if lo_in { c >= lo } else { c > lo }) && (if hi_in { c <= hi } else { c < hi })
    };
    let mut best = <Rational as Zero>::zero();
    let mut idx = vec![0usize; dim];
    loop {
        let boxes: Vec<_> = (0..dim).map(|j| &intervals[j][idx[j]]).collect();
        let vol: Rational = boxes.iter().map(|b| b.2 - b.0).product();
        let count = pts
            .iter()
            .filter(|p| p.iter().zip(&boxes).all(|(&c, b)| inside(c, b)))
            .count() as i128;
        let dev = (Rational::from_integer(count) / n - vol).abs();
        if dev > best {
            best = dev;
        }
        let mut j = 0;
        loop {
            if j == dim {
                return best;
            }
            idx[j] += 1;
            if idx[j] < intervals[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

fn rational_seq(dim: usize, pts: &[Vec<Rational>]) -> TorusSequence<Rational> {
    TorusSequence::new(dim, pts.to_vec()).unwrap()
}

#[test]
fn two_points_on_the_circle() {
    let pts = vec![vec![r(0, 1)], vec![r(1, 2)]];
    assert_eq!(oracle(1, &pts), r(1, 2));
    assert_eq!(exact_1d(&rational_seq(1, &pts)), r(1, 2));
}

#[test]
fn single_point_at_zero() {
    let pts = vec![vec![r(0, 1)]];
    assert_eq!(exact_1d(&rational_seq(1, &pts)), r(1, 1));
    let pts2 = vec![vec![r(0, 1), r(0, 1)]];
    assert_eq!(exact_2d(&rational_seq(2, &pts2)), r(1, 1));
}

#[test]
fn uniform_grid_is_one_over_n() {
    for n in 1..=60i128 {
        let pts: Vec<Vec<Rational>> = (0..n).map(|k| vec![r(k, n)]).collect();
        assert_eq!(exact_1d(&rational_seq(1, &pts)), r(1, n), "n = {n}");
        let d = discrepancy(&rational_seq(1, &pts), None);
        assert!(d.exact);
        assert!((d.value - 1.0 / n as f64).abs() < 1e-15);
    }
}

#[test]
fn product_grid_in_the_plane() {
    // m×m grid: a box [0, 1/m + ε)×[0, 1) style slab has error 1/m, and the
    // oracle agrees.
    for m in 1..=4i128 {
        let pts: Vec<Vec<Rational>> = (0..m)
            .flat_map(|i| (0..m).map(move |j| vec![r(i, m), r(j, m)]))
            .collect();
        let exact = exact_2d(&rational_seq(2, &pts));
        assert_eq!(exact, oracle(2, &pts));
        assert!(exact >= r(1, m));
    }
}

#[test]
fn from_angles_rejects_bad_shapes() {
    let a = RationalAngle::new(1, 3);
    assert!(TorusSequence::from_angles(2, &[vec![a, a]]).is_ok());
    assert_eq!(
        TorusSequence::from_angles(2, &[vec![a]]),
        Err(EquidistError::DimensionMismatch { expected: 2, got: 1 })
    );
    assert_eq!(
        TorusSequence::<f64>::new(0, vec![]),
        Err(EquidistError::ZeroDimension)
    );
    assert_eq!(
        TorusSequence::new(1, vec![vec![0.2], vec![1.0]]),
        Err(EquidistError::OutOfRange { index: 1 })
    );
}

#[test]
fn higher_dimensions_use_a_grid_lower_bound() {
    let pts = vec![
        vec![r(0, 1), r(1, 3), r(2, 3)],
        vec![r(1, 2), r(1, 4), r(0, 1)],
        vec![r(3, 4), r(2, 3), r(1, 5)],
    ];
    let seq = rational_seq(3, &pts);
    let d = discrepancy(&seq, Some(12));
    assert!(!d.exact);
    assert_eq!(d.resolution, Some(12));
    let truth = oracle(3, &pts);
    let truth = *truth.numer() as f64 / *truth.denom() as f64;
    assert!(d.value <= truth + 1e-12, "{} > {}", d.value, truth);
    // Grid points 0, 1/2, 1/3, ... all lie on the 12-grid, so boxes at the
    // limit corners are seen up to one grid step of volume.
    assert!(d.value >= truth - 3.0 / 12.0);
    assert!(default_resolution(3) >= 8);
}

#[test]
fn etk_single_point() {
    let seq = TorusSequence::new(1, vec![vec![0.0]]).unwrap();
    // h = ±1 each contribute |e(0)| = 1.
    assert!((etk_bound(&seq, 1, 1.5) - 4.5).abs() < 1e-12);
    assert!((default_c_d(1) - 1.5).abs() < 1e-15);
    assert!((default_c_d(2) - 2.25).abs() < 1e-15);
}

#[test]
fn etk_on_the_uniform_grid() {
    for n in [5usize, 17, 64] {
        let pts: Vec<Vec<f64>> = (0..n).map(|k| vec![k as f64 / n as f64]).collect();
        let seq = TorusSequence::new(1, pts).unwrap();
        for h in 1..n as u32 {
            let b = etk_bound(&seq, h, 1.5);
            assert!((b - 1.5 / h as f64).abs() < 1e-9, "n {n} H {h}: {b}");
        }
    }
}

#[test]
fn exponent_search_examples() {
    let mut q = ExponentQuery::new(
        vec![RationalAngle::new(1, 97)],
        TorusBox::new(vec![Arc::open(r(0, 1), r(1, 10))]),
    );
    q.modulus = 3;
    q.residue = 2;
    q.min_order = 10;
    let hit = exponent_search(&q).unwrap();
    let hit = hit.hit().unwrap();
    assert_eq!(hit.l, 2);
    assert_eq!(hit.point, vec![RationalAngle::new(2, 97)]);
    assert_eq!(hit.orders, vec![97]);

    let q = ExponentQuery::new(
        vec![RationalAngle::new(1, 2)],
        TorusBox::new(vec![Arc::open(r(1, 10), r(2, 5))]),
    );
    assert_eq!(
        exponent_search(&q),
        Err(EquidistError::IndependencePrecheckFailed { alpha: vec![2] })
    );

    let q = ExponentQuery::new(
        vec![RationalAngle::new(1, 101), RationalAngle::new(3, 101)],
        TorusBox::full(2),
    );
    assert_eq!(exponent_search(&q).unwrap().hit().unwrap().l, 1);
}

#[test]
fn exponent_search_rejects_bad_queries() {
    let mut q = ExponentQuery::new(vec![RationalAngle::new(1, 7)], TorusBox::full(1));
    q.modulus = 3;
    q.residue = 4;
    assert_eq!(
        exponent_search(&q),
        Err(EquidistError::InvalidResidue {
            modulus: 3,
            residue: 4
        })
    );
    let q = ExponentQuery::new(vec![RationalAngle::new(1, 7)], TorusBox::full(2));
    assert!(matches!(
        exponent_search(&q),
        Err(EquidistError::DimensionMismatch { .. })
    ));
}

#[test]
fn exponent_search_reports_failure_with_horizon() {
    // Multiples of 1/1009 hit [1/3, 1/3 + 1/1000] only at l = 337, which is
    // beyond l_max.
    let mut q = ExponentQuery::new(
        vec![RationalAngle::new(1, 1009)],
        TorusBox::new(vec![Arc::closed(r(1, 3), r(1, 3) + r(1, 1000))]),
    );
    q.l_max = 300;
    match exponent_search(&q).unwrap() {
        ExponentOutcome::NotFound { l_max, horizon } => {
            assert_eq!(l_max, 300);
            if let Some(h) = horizon {
                assert!(h <= 300);
            }
        }
        other => panic!("{other:?}"),
    }
    q.l_max = 1000;
    assert_eq!(exponent_search(&q).unwrap().hit().unwrap().l, 337);
}

#[test]
fn integer_relations_by_height() {
    let a = |n, d| RationalAngle::new(n, d);
    assert_eq!(integer_relation(&[a(1, 97)], 2), None);
    assert_eq!(integer_relation(&[a(1, 3)], 2), None);
    assert_eq!(integer_relation(&[a(1, 3)], 3), Some(vec![3]));
    assert_eq!(integer_relation(&[a(1, 7), a(6, 7)], 2), Some(vec![1, 1]));
    assert_eq!(integer_relation(&[a(1, 7), a(2, 7)], 2), Some(vec![2, -1]));
    assert_eq!(integer_relation(&[a(0, 1), a(2, 7)], 1), Some(vec![1, 0]));
}

#[test]
fn arcs_wrap_and_respect_endpoints() {
    let arc = Arc::around(r(0, 1), r(1, 10));
    assert!(arc.contains(RationalAngle::new(19, 20)));
    assert!(arc.contains(RationalAngle::new(1, 10)));
    assert!(arc.contains(RationalAngle::new(9, 10)));
    assert!(!arc.contains(RationalAngle::new(1, 2)));
    let open = Arc::open(r(0, 1), r(1, 10));
    assert!(!open.contains(RationalAngle::ZERO));
    assert!(!open.contains(RationalAngle::new(1, 10)));
    let half = Arc::half_open(r(1, 4), r(1, 2));
    assert!(half.contains(RationalAngle::new(1, 4)));
    assert!(!half.contains(RationalAngle::new(1, 2)));
    assert!(Arc::around(r(1, 3), r(1, 1)).is_full());
    assert_eq!(TorusBox::new(vec![half, open]).measure(), r(1, 40));
}

fn sqrt2_spec() -> WitnessSpec {
    let src = "witness sqrt2 1: minpoly x1^2 - 2, chi x1 -> 1/3, tolerance 1/20, unity 2 1 -1 -> 1/2, order 50, primes 3 1000000";
    parse_source(src).unwrap().witness(None).unwrap().clone()
}

/// Discrete log by walking powers of a primitive root checked from scratch.
fn brute_dlog(p: u64, g: u64, x: u64) -> u64 {
    let mut y = 1u64;
    for k in 0..p - 1 {
        if y == x {
            return k;
        }
        y = y * g % p;
    }
    panic!("{x} not a power of {g} mod {p}");
}

/// The field's generator, after checking it is a primitive root from the
/// factorization of `p − 1` found by trial division.
fn checked_generator(p: u64) -> u64 {
    let g = make_field(p, 1).unwrap().generator().encoding();
    let mut n = p - 1;
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            assert_ne!(pow_mod(g, (p - 1) / d, p), 1);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        assert_ne!(pow_mod(g, (p - 1) / n, p), 1);
    }
    g
}

fn angle_dist(a: Rational, t: Rational) -> Rational {
    let x = a - t;
    let x = x - x.floor();
    x.min(<Rational as One>::one() - x)
}

#[test]
fn sqrt2_witnesses() {
    let spec = sqrt2_spec();
    let start = Instant::now();
    let run = witness_search(&spec, 3, 1_000_000, Some(12)).unwrap();
    assert!(start.elapsed().as_secs() < 120);
    assert!(run.records.len() >= 10);
    for rec in &run.records {
        let p = rec.p;
        assert!(p % 8 == 1 || p % 8 == 7, "2 must be a square mod {p}");
        assert!(rec.verified);
        assert!(verify_record(&spec, rec));
        assert_eq!(rec.root * rec.root % p, 2);
        let n = p - 1;
        let g = checked_generator(p);
        // χ(x) = e(r·log_g(x)/(p−1))
        let chi_angle = |x: u64| {
            r(
                (rec.exponent as i128 * brute_dlog(p, g, x) as i128) % n as i128,
                n as i128,
            )
        };
        let a = chi_angle(rec.root);
        let b = chi_angle(p - 1);
        assert_eq!(b, r(1, 2), "χ(−1) at {p}");
        assert!(angle_dist(a, r(1, 3)) <= r(1, 20), "χ(√2) at {p}");
        assert_eq!(rec.exponent % 2, 1);
        let order = n / num_integer::gcd(rec.exponent, n);
        assert_eq!(order, rec.order);
        assert!(order >= 50);
    }
}

#[test]
fn vacuous_targets_take_the_first_split_prime() {
    let spec = parse_source("witness 1: minpoly x1^2 - 2, chi x1 -> 1/3, tolerance 1")
        .unwrap()
        .witness(None)
        .unwrap()
        .clone();
    let run = witness_search(&spec, 3, 200, Some(1)).unwrap();
    assert_eq!(run.records[0].p, 7);
    assert_eq!(run.records[0].exponent, 1);
    assert!(run.records[0].verified);
}

#[test]
fn no_split_primes() {
    let spec = parse_source("witness 1: minpoly x1^2 + 1, tolerance 1/2")
        .unwrap()
        .witness(None)
        .unwrap()
        .clone();
    assert_eq!(
        witness_search(&spec, 3, 3, None),
        Err(EquidistError::NoPrimesFound { lo: 3, hi: 3 })
    );
}

#[test]
fn reducible_minimal_polynomials_are_rejected() {
    let spec = parse_source("witness 1: minpoly x1^2 - 4, tolerance 1/2")
        .unwrap()
        .witness(None)
        .unwrap()
        .clone();
    assert!(matches!(
        witness_search(&spec, 3, 100, None),
        Err(EquidistError::Reducible(_))
    ));
}

#[test]
fn additive_targets_on_a_cubic() {
    let src =
        "witness 1: minpoly x1^3 - x1 - 1, chi x1 + 1/2 -> 7/4, psi 2 x1^2 -> 1/5, psi 1 -> 0, tolerance 1/8";
    let spec = parse_source(src).unwrap().witness(None).unwrap().clone();
    let run = witness_search(&spec, 3, 5000, Some(5)).unwrap();
    assert_eq!(run.records.len(), 5);
    for rec in &run.records {
        assert!(rec.verified);
        let p = rec.p as i128;
        let b = rec.root as i128;
        assert_eq!((b * b % p * b - b - 1).rem_euclid(p), 0);
        let v = (2 * b * b) % p;
        let psi = r((rec.twist as i128 * v) % p, p);
        assert!(angle_dist(psi, r(1, 5)) <= r(1, 8));
        assert!(angle_dist(r(rec.twist as i128 % p, p), r(0, 1)) <= r(1, 8));
    }
    let primes = primes_in_range(3, run.records.last().unwrap().p);
    assert_eq!(run.primes_scanned as usize, primes.len());
}

fn rational_points(dim: usize, max_n: usize) -> impl Strategy<Value = Vec<Vec<Rational>>> {
    prop::collection::vec(prop::collection::vec(0i128..12, dim), 1..=max_n).prop_map(|pts| {
        pts.into_iter()
            .map(|p| p.into_iter().map(|c| r(c, 12)).collect())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_1d_matches_oracle(pts in rational_points(1, 9)) {
        let seq = rational_seq(1, &pts);
        prop_assert_eq!(exact_1d(&seq), oracle(1, &pts));
    }

    #[test]
    fn exact_2d_matches_oracle(pts in rational_points(2, 6)) {
        let seq = rational_seq(2, &pts);
        prop_assert_eq!(exact_2d(&seq), oracle(2, &pts));
    }

    #[test]
    fn float_and_exact_agree(pts in rational_points(2, 12)) {
        let exact = exact_2d(&rational_seq(2, &pts));
        let floats: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|c| *c.numer() as f64 / *c.denom() as f64).collect()).collect();
        let approx = exact_2d(&TorusSequence::new(2, floats).unwrap());
        prop_assert!((approx - *exact.numer() as f64 / *exact.denom() as f64).abs() < 1e-12);
    }

    #[test]
    fn etk_dominates_discrepancy(a in 0.01f64..0.99, b in 0.01f64..0.99, n in 20usize..300, h in 1u32..24, two in any::<bool>()) {
        let alpha = if two { vec![a, b] } else { vec![a] };
        let seq = TorusSequence::kronecker(&alpha, n);
        let d = discrepancy(&seq, None).value;
        let bound = etk_bound(&seq, h, default_c_d(alpha.len()));
        prop_assert!(d <= bound + 1e-12);
        prop_assert!(bound >= default_c_d(alpha.len()) / h as f64 - 1e-12);
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn exponent_hits_are_minimal_and_valid(
        den in 20u64..400, nums in prop::collection::vec(1i128..400, 1..3),
        start in 0i128..60, width in 1i128..30, modulus in 1u64..7, res in 1u64..7, k in 1u64..20,
    ) {
        let gammas: Vec<RationalAngle> = nums.iter().map(|&x| RationalAngle::new(x, den)).collect();
        let arcs: Vec<Arc> = (0..gammas.len()).map(|i| Arc::half_open(r(start + 7 * i as i128, 60), r(start + 7 * i as i128 + width, 60))).collect();
        let mut q = ExponentQuery::new(gammas.clone(), TorusBox::new(arcs.clone()));
        q.modulus = modulus;
        q.residue = (res - 1) % modulus + 1;
        q.min_order = k;
        q.l_max = 2000;
        let ok = |l: u64| {
            l % modulus == q.residue % modulus
                && gammas.iter().zip(&arcs).all(|(g, arc)| {
                    let v = r(g.num() as i128 * l as i128, g.den() as i128);
                    let v = v - v.floor();
                    let lo = arc.start;
                    let d = v - lo;
                    let d = d - d.floor();
                    d < arc.len
                })
                && gammas.iter().map(|g| g.scale(l as i128).den()).max().unwrap() >= k
        };
        match exponent_search(&q) {
            Err(EquidistError::IndependencePrecheckFailed { alpha }) => {
                let s: Rational = alpha.iter().zip(&gammas).map(|(&a, g)| r(a as i128 * g.num() as i128, g.den() as i128)).sum();
                prop_assert!(s.is_integer());
                prop_assert!(alpha.iter().any(|&a| a != 0) && alpha.iter().all(|a| a.abs() <= 2));
            }
            Ok(ExponentOutcome::Found(hit)) => {
                prop_assert!(verify_hit(&q, &hit));
                prop_assert!(ok(hit.l));
                prop_assert!(!(1..hit.l).any(ok));
            }
            Ok(ExponentOutcome::NotFound { .. }) => prop_assert!(!(1..=2000).any(ok)),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}
