//! Univariate polynomials over a [`FiniteField`], coefficients low degree
//! first, and root finding.

use super::{FieldElement, FiniteField};

pub type UPoly = Vec<FieldElement>;

pub fn trim(mut f: UPoly) -> UPoly {
    while f.last().is_some_and(|c| c.is_zero()) {
        f.pop();
    }
    f
}

pub fn degree(f: &[FieldElement]) -> Option<usize> {
    f.iter().rposition(|c| !c.is_zero())
}

pub fn eval(k: &FiniteField, f: &[FieldElement], x: FieldElement) -> FieldElement {
    f.iter().rev().fold(k.zero(), |acc, &c| k.add(k.mul(acc, x), c))
}

fn sub(k: &FiniteField, a: &[FieldElement], b: &[FieldElement]) -> UPoly {
    let n = a.len().max(b.len());
    let out = (0..n)
        .map(|i| {
            let x = a.get(i).copied().unwrap_or_default();
            let y = b.get(i).copied().unwrap_or_default();
            k.sub(x, y)
        })
        .collect();
    trim(out)
}

fn mul(k: &FiniteField, a: &[FieldElement], b: &[FieldElement]) -> UPoly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![k.zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = k.add(out[i + j], k.mul(x, y));
        }
    }
    trim(out)
}

pub fn div_rem(k: &FiniteField, a: &[FieldElement], b: &[FieldElement]) -> (UPoly, UPoly) {
    let db = degree(b).expect("division by the zero polynomial");
    let lead_inv = k.inv(b[db]).expect("nonzero leading coefficient");
    let mut r = trim(a.to_vec());
    let Some(da) = degree(&r) else {
        return (Vec::new(), Vec::new());
    };
    if da < db {
        return (Vec::new(), r);
    }
    let mut quot = vec![k.zero(); da - db + 1];
    while let Some(dr) = degree(&r) {
        if dr < db {
            break;
        }
        let c = k.mul(r[dr], lead_inv);
        let shift = dr - db;
        quot[shift] = c;
        for (i, &bc) in b.iter().enumerate().take(db + 1) {
            r[shift + i] = k.sub(r[shift + i], k.mul(c, bc));
        }
        r = trim(r);
    }
    (trim(quot), r)
}

fn rem(k: &FiniteField, a: &[FieldElement], m: &[FieldElement]) -> UPoly {
    div_rem(k, a, m).1
}

pub fn monic(k: &FiniteField, f: &[FieldElement]) -> UPoly {
    match degree(f) {
        None => Vec::new(),
        Some(d) => {
            let inv = k.inv(f[d]).expect("nonzero leading coefficient");
            trim(f.iter().map(|&c| k.mul(c, inv)).collect())
        }
    }
}

pub fn gcd(k: &FiniteField, a: &[FieldElement], b: &[FieldElement]) -> UPoly {
    let (mut x, mut y) = (trim(a.to_vec()), trim(b.to_vec()));
    while !y.is_empty() {
        let r = rem(k, &x, &y);
        x = y;
        y = r;
    }
    monic(k, &x)
}

fn pow_mod(k: &FiniteField, base: &[FieldElement], mut e: u64, m: &[FieldElement]) -> UPoly {
    let mut acc = rem(k, &[k.one()], m);
    let mut b = rem(k, base, m);
    while e > 0 {
        if e & 1 == 1 {
            acc = rem(k, &mul(k, &acc, &b), m);
        }
        b = rem(k, &mul(k, &b, &b), m);
        e >>= 1;
    }
    acc
}

/// Below this size, root finding scans the whole field.
const SCAN_LIMIT: u64 = 64;

/// Distinct roots in `F_q`, ascending by encoding. The zero polynomial has
/// no well-defined finite root set and returns an empty vector; callers
/// that care must check [`degree`] first.
pub fn distinct_roots(k: &FiniteField, f: &[FieldElement]) -> Vec<FieldElement> {
    let f = monic(k, f);
    let Some(d) = degree(&f) else { return Vec::new() };
    if d == 0 {
        return Vec::new();
    }
    if d == 1 {
        return vec![k.neg(f[0])];
    }
    if k.q() <= SCAN_LIMIT.max(4 * (d as u64) * (d as u64)) {
        return k.elements().filter(|&x| eval(k, &f, x).is_zero()).collect();
    }
    let x = [k.zero(), k.one()];
    let xq = pow_mod(k, &x, k.q(), &f);
    let g = gcd(k, &f, &sub(k, &xq, &x));
    let mut out = Vec::new();
    split(k, &g, &mut out);
    out.sort_unstable();
    out
}

/// Whether `f` has a root in `F_q`. The zero polynomial counts as having one.
pub fn has_root(k: &FiniteField, f: &[FieldElement]) -> bool {
    match degree(f) {
        None => true,
        Some(0) => false,
        Some(1) => true,
        Some(_) => !distinct_roots(k, f).is_empty(),
    }
}

/// Roots with multiplicity, ascending by root.
pub fn roots_with_multiplicity(k: &FiniteField, f: &[FieldElement]) -> Vec<(FieldElement, u32)> {
    let roots = distinct_roots(k, f);
    roots
        .into_iter()
        .map(|r| {
            let lin = [k.neg(r), k.one()];
            let mut g = trim(f.to_vec());
            let mut m = 0;
            loop {
                let (q, rr) = div_rem(k, &g, &lin);
                if !rr.is_empty() {
                    break;
                }
                m += 1;
                g = q;
            }
            (r, m)
        })
        .collect()
}

/// Splits a monic product of distinct linear factors.
fn split(k: &FiniteField, g: &[FieldElement], out: &mut Vec<FieldElement>) {
    match degree(g) {
        None | Some(0) => {}
        Some(1) => out.push(k.neg(g[0])),
        Some(d) => {
            for delta in k.elements() {
                let t = splitting_poly(k, g, delta);
                let h = gcd(k, &t, g);
                let dh = degree(&h).unwrap_or(0);
                if dh > 0 && dh < d {
                    let (cof, _) = div_rem(k, g, &h);
                    split(k, &h, out);
                    split(k, &monic(k, &cof), out);
                    return;
                }
            }
            out.extend(k.elements().filter(|&x| eval(k, g, x).is_zero()));
        }
    }
}

/// `(x + δ)^((q-1)/2) - 1` for odd `q`, the absolute trace of `δx` for even `q`,
/// both reduced mod `g`.
fn splitting_poly(k: &FiniteField, g: &[FieldElement], delta: FieldElement) -> UPoly {
    if k.p() != 2 {
        let base = [delta, k.one()];
        let h = pow_mod(k, &base, (k.q() - 1) / 2, g);
        return sub(k, &h, &[k.one()]);
    }
    let mut term = rem(k, &[k.zero(), delta], g);
    let mut acc = term.clone();
    for _ in 1..k.e() {
        term = rem(k, &mul(k, &term, &term), g);
        acc = trim(
            (0..acc.len().max(term.len()))
                .map(|i| {
                    k.add(
                        acc.get(i).copied().unwrap_or_default(),
                        term.get(i).copied().unwrap_or_default(),
                    )
                })
                .collect(),
        );
    }
    acc
}
