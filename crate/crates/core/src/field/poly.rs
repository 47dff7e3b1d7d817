//! Dense polynomials over a prime field `F_p`, coefficients low degree first.
//!
//! Everything here works on plain `Vec<u64>` with every coefficient in
//! `[0, p)`; the zero polynomial is the empty vector.

use crate::arith::{inv_mod, mul_mod, prime_divisors};

pub fn trim(mut a: Vec<u64>) -> Vec<u64> {
    while a.last() == Some(&0) {
        a.pop();
    }
    a
}

/// Degree, with the zero polynomial reported as `None`.
pub fn degree(a: &[u64]) -> Option<usize> {
    a.iter().rposition(|&c| c != 0)
}

pub fn add(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let n = a.len().max(b.len());
    let out = (0..n)
        .map(|i| {
            let x = a.get(i).copied().unwrap_or(0);
            let y = b.get(i).copied().unwrap_or(0);
            (x + y) % p
        })
        .collect();
    trim(out)
}

pub fn sub(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let n = a.len().max(b.len());
    let out = (0..n)
        .map(|i| {
            let x = a.get(i).copied().unwrap_or(0);
            let y = b.get(i).copied().unwrap_or(0);
            (x + p - y) % p
        })
        .collect();
    trim(out)
}

pub fn mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + mul_mod(x, y, p)) % p;
        }
    }
    trim(out)
}

pub fn scale(a: &[u64], c: u64, p: u64) -> Vec<u64> {
    trim(a.iter().map(|&x| mul_mod(x, c, p)).collect())
}

/// Quotient and remainder of `a` by a nonzero `b`.
pub fn div_rem(a: &[u64], b: &[u64], p: u64) -> (Vec<u64>, Vec<u64>) {
    let db = degree(b).expect("division by the zero polynomial");
    let lead_inv = inv_mod(b[db], p).expect("leading coefficient invertible mod p");
    let mut rem = trim(a.to_vec());
    let Some(da) = degree(&rem) else {
        return (Vec::new(), Vec::new());
    };
    if da < db {
        return (Vec::new(), rem);
    }
    let mut quot = vec![0u64; da - db + 1];
    while let Some(dr) = degree(&rem) {
        if dr < db {
            break;
        }
        let c = mul_mod(rem[dr], lead_inv, p);
        let shift = dr - db;
        quot[shift] = c;
        for (i, &bc) in b.iter().enumerate().take(db + 1) {
            let t = mul_mod(c, bc, p);
            rem[shift + i] = (rem[shift + i] + p - t) % p;
        }
        rem = trim(rem);
    }
    (trim(quot), rem)
}

pub fn rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    div_rem(a, m, p).1
}

/// Monic greatest common divisor.
pub fn gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut x = trim(a.to_vec());
    let mut y = trim(b.to_vec());
    while !y.is_empty() {
        let r = rem(&x, &y, p);
        x = y;
        y = r;
    }
    monic(&x, p)
}

pub fn monic(a: &[u64], p: u64) -> Vec<u64> {
    match degree(a) {
        None => Vec::new(),
        Some(d) => {
            let inv = inv_mod(a[d], p).expect("nonzero leading coefficient");
            scale(a, inv, p)
        }
    }
}

pub fn mul_mod_poly(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    rem(&mul(a, b, p), m, p)
}

pub fn pow_mod_poly(base: &[u64], mut exp: u64, m: &[u64], p: u64) -> Vec<u64> {
    let mut acc = rem(&[1], m, p);
    let mut b = rem(base, m, p);
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod_poly(&acc, &b, m, p);
        }
        b = mul_mod_poly(&b, &b, m, p);
        exp >>= 1;
    }
    acc
}

/// Inverse of `a` modulo an irreducible `m` via the extended Euclidean
/// algorithm; `None` when `a ≡ 0`.
pub fn inv_mod_poly(a: &[u64], m: &[u64], p: u64) -> Option<Vec<u64>> {
    let (mut old_r, mut r) = (rem(a, m, p), trim(m.to_vec()));
    if old_r.is_empty() {
        return None;
    }
    let (mut old_s, mut s) = (vec![1u64], Vec::new());
    while !r.is_empty() {
        let (q, rr) = div_rem(&old_r, &r, p);
        let ns = sub(&old_s, &mul(&q, &s, p), p);
        old_r = std::mem::replace(&mut r, rr);
        old_s = std::mem::replace(&mut s, ns);
    }
    if degree(&old_r) != Some(0) {
        return None;
    }
    let c = inv_mod(old_r[0], p)?;
    Some(rem(&scale(&old_s, c, p), m, p))
}

/// `x^(p^k) mod m`, by `k` successive Frobenius powers.
fn frobenius_power_of_x(k: usize, m: &[u64], p: u64) -> Vec<u64> {
    let mut acc = rem(&[0, 1], m, p);
    for _ in 0..k {
        acc = pow_mod_poly(&acc, p, m, p);
    }
    acc
}

/// Rabin's irreducibility test for a polynomial of degree `n >= 1`:
/// `x^(p^n) ≡ x (mod f)` and `gcd(x^(p^(n/r)) - x, f) = 1` for each prime `r | n`.
pub fn is_irreducible(f: &[u64], p: u64) -> bool {
    let Some(n) = degree(f) else { return false };
    if n == 0 {
        return false;
    }
    if n == 1 {
        return true;
    }
    let x = vec![0u64, 1];
    if sub(&frobenius_power_of_x(n, f, p), &x, p) != Vec::<u64>::new() {
        return false;
    }
    for r in prime_divisors(n as u64) {
        let h = sub(&frobenius_power_of_x(n / r as usize, f, p), &x, p);
        if degree(&gcd(&h, f, p)) != Some(0) {
            return false;
        }
    }
    true
}

/// Evaluates `f` at a prime-field point.
pub fn eval(f: &[u64], x: u64, p: u64) -> u64 {
    f.iter().rev().fold(0u64, |acc, &c| (mul_mod(acc, x, p) + c) % p)
}

/// Whether a squarefree `f` splits into distinct linear factors over `F_p`.
pub fn splits_completely(f: &[u64], p: u64) -> bool {
    let Some(n) = degree(f) else { return false };
    if n == 0 {
        return true;
    }
    let f = monic(f, p);
    let xp = pow_mod_poly(&[0, 1], p, &f, p);
    xp == rem(&[0, 1], &f, p)
}

/// Roots of a polynomial that splits into distinct linear factors over
/// `F_p`, found by deterministic equal-degree splitting. Sorted ascending.
pub fn roots_of_split(f: &[u64], p: u64) -> Vec<u64> {
    let f = monic(f, p);
    let mut out = Vec::new();
    split_roots(&f, p, &mut out);
    out.sort_unstable();
    out
}

fn split_roots(f: &[u64], p: u64, out: &mut Vec<u64>) {
    match degree(f) {
        None | Some(0) => {}
        Some(1) => out.push((p - f[0]) % p),
        Some(_) if p == 2 => {
            out.extend((0..2).filter(|&x| eval(f, x, p) == 0));
        }
        Some(d) => {
            for delta in 0..p {
                let shifted = [delta, 1];
                let h = pow_mod_poly(&shifted, (p - 1) / 2, f, p);
                let g = gcd(&sub(&h, &[1], p), f, p);
                let dg = degree(&g).unwrap_or(0);
                if dg > 0 && dg < d {
                    let (cofactor, _) = div_rem(f, &g, p);
                    split_roots(&g, p, out);
                    split_roots(&monic(&cofactor, p), p, out);
                    return;
                }
            }
            out.extend((0..p).filter(|&x| eval(f, x, p) == 0));
        }
    }
}
