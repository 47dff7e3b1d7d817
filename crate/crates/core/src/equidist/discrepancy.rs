//! Extreme discrepancy of finite point sets in `[0,1)^d` and the
//! Erdős–Turán–Koksma upper bound.

use std::fmt::Debug;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use super::EquidistError;
use crate::characters::RationalAngle;
use crate::formulas::Rational;

/// Coordinates the exact algorithms can run on.
pub trait Scalar:
    Copy + PartialOrd + Debug + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    /// `num/den`.
    fn frac(num: usize, den: usize) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn frac(num: usize, den: usize) -> Self {
        num as f64 / den as f64
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for Rational {
    fn zero() -> Self {
        <Rational as Zero>::zero()
    }
    fn one() -> Self {
        Rational::from_integer(1)
    }
    fn frac(num: usize, den: usize) -> Self {
        Rational::new(num as i128, den as i128)
    }
    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

fn max<T: Scalar>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

fn min<T: Scalar>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

/// `n` points of `[0,1)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusSequence<T = f64> {
    dim: usize,
    points: Vec<Vec<T>>,
}

impl<T: Scalar> TorusSequence<T> {
    pub fn new(dim: usize, points: Vec<Vec<T>>) -> Result<Self, EquidistError> {
        if dim == 0 {
            return Err(EquidistError::ZeroDimension);
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(EquidistError::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|&c| c < T::zero() || c >= T::one()) {
                return Err(EquidistError::OutOfRange { index: i });
            }
        }
        Ok(TorusSequence { dim, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    fn to_f64(&self) -> TorusSequence<f64> {
        TorusSequence {
            dim: self.dim,
            points: self
                .points
                .iter()
                .map(|p| p.iter().map(|c| c.to_f64()).collect())
                .collect(),
        }
    }
}

impl TorusSequence<Rational> {
    pub fn from_angles(dim: usize, points: &[Vec<RationalAngle>]) -> Result<Self, EquidistError> {
        let pts = points
            .iter()
            .map(|p| {
                p.iter()
                    .map(|a| Rational::new(a.num() as i128, a.den() as i128))
                    .collect()
            })
            .collect();
        TorusSequence::new(dim, pts)
    }
}

impl TorusSequence<f64> {
    /// `x_i = frac(i·α)` for `i = 1..=n`.
    pub fn kronecker(alpha: &[f64], n: usize) -> Self {
        let points = (1..=n)
            .map(|i| alpha.iter().map(|a| (i as f64 * a).rem_euclid(1.0)).collect())
            .collect();
        TorusSequence {
            dim: alpha.len(),
            points,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discrepancy {
    pub value: f64,
    /// `false` for the grid lower bound used when `d ≥ 3`.
    pub exact: bool,
    /// Grid resolution of the lower bound.
    pub resolution: Option<u32>,
}

/// Default grid resolution for `d ≥ 3`: the largest `g ≤ 32` with at most
/// about `10^7` boxes.
pub fn default_resolution(dim: usize) -> u32 {
    (2..=32u32)
        .rev()
        .find(|&g| ((g as f64) * (g as f64 + 1.0) / 2.0).powi(dim as i32) <= 1e7)
        .unwrap_or(2)
}

/// `sup_B | |B ∩ X|/n − vol(B) |` over boxes `B = Π [a_j, b_j) ⊆ [0,1)^d`.
/// Exact for `d ≤ 2`; for larger `d` a lower bound from boxes with corners
/// on the grid `(1/g)ℤ^d`.
pub fn discrepancy<T: Scalar>(x: &TorusSequence<T>, resolution: Option<u32>) -> Discrepancy {
    match x.dim {
        1 => Discrepancy {
            value: exact_1d(x).to_f64(),
            exact: true,
            resolution: None,
        },
        2 => Discrepancy {
            value: exact_2d(x).to_f64(),
            exact: true,
            resolution: None,
        },
        d => {
            let g = resolution.unwrap_or_else(|| default_resolution(d));
            Discrepancy {
                value: grid_lower_bound(&x.to_f64(), g),
                exact: false,
                resolution: Some(g),
            }
        }
    }
}

/// Exact value for `d = 1`.
pub fn exact_1d<T: Scalar>(x: &TorusSequence<T>) -> T {
    assert_eq!(x.dim, 1);
    let n = x.points.len();
    if n == 0 {
        return T::zero();
    }
    let mut xs: Vec<T> = x.points.iter().map(|p| p[0]).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("coordinates are ordered"));
    // Closed intervals [x_i, x_j] hold at least ranks i..=j.
    let mut plus = T::zero();
    let mut low = T::frac(0, n) - xs[0];
    for (j, &xj) in xs.iter().enumerate() {
        low = min(low, T::frac(j, n) - xj);
        plus = max(plus, T::frac(j + 1, n) - xj - low);
    }
    // Open intervals (x_l, x_r), with x_{-1} = 0 and x_n = 1.
    let mut minus = T::zero();
    let mut low = T::zero() - T::frac(0, n);
    for (r, &xr) in xs.iter().enumerate() {
        minus = max(minus, xr - T::frac(r, n) - low);
        low = min(low, xr - T::frac(r + 1, n));
    }
    minus = max(minus, T::one() - T::frac(n, n) - low);
    max(plus, minus)
}

struct Plane<T> {
    n: usize,
    /// x-coordinates in increasing order; rank `i` is position `i`.
    xs: Vec<T>,
    /// x-ranks and y-coordinates of the points in increasing `y`.
    ranks: Vec<u32>,
    ys: Vec<T>,
}

impl<T: Scalar> Plane<T> {
    fn new(x: &TorusSequence<T>) -> Self {
        let n = x.points.len();
        let cmp = |a: &T, b: &T| a.partial_cmp(b).expect("coordinates are ordered");
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| cmp(&x.points[i][0], &x.points[j][0]));
        let xs = order.iter().map(|&i| x.points[i][0]).collect();
        let mut by_y: Vec<(u32, T)> = order
            .iter()
            .enumerate()
            .map(|(rank, &i)| (rank as u32, x.points[i][1]))
            .collect();
        by_y.sort_by(|a, b| cmp(&a.1, &b.1));
        let (ranks, ys) = by_y.into_iter().unzip();
        Plane { n, xs, ranks, ys }
    }

    fn x(&self, rank: isize) -> T {
        if rank < 0 {
            T::zero()
        } else if rank as usize >= self.n {
            T::one()
        } else {
            self.xs[rank as usize]
        }
    }

    /// `max_{i≤j} (j−i+1)/n − w·(y_j − y_i)` over the points with x-rank in
    /// `[a, b]`, listed by `y`.
    fn best_plus(&self, a: usize, b: usize, w: T) -> T {
        let step = T::frac(1, self.n);
        let mut best = T::zero();
        // Any start value is at most 1.
        let mut low = T::one() + T::one();
        let mut count = T::zero();
        for (&rank, &y) in self.ranks.iter().zip(&self.ys) {
            if (rank as usize).wrapping_sub(a) > b - a {
                continue;
            }
            let wy = w * y;
            low = min(low, count - wy);
            count = count + step;
            best = max(best, count - wy - low);
        }
        best
    }

    /// `max_{i<j} w·(y_j − y_i) − (j−i−1)/n` over the points with x-rank in
    /// `(l, r)`, listed by `y` between the sentinels `y = 0` and `y = 1`.
    fn best_minus(&self, l: isize, r: isize, w: T) -> T {
        let step = T::frac(1, self.n);
        let mut best = T::zero();
        let mut low = T::zero() - step;
        let mut count = T::zero();
        let (lo, span) = ((l + 1) as usize, (r - l - 2) as usize);
        if r - l >= 2 {
            for (&rank, &y) in self.ranks.iter().zip(&self.ys) {
                if (rank as usize).wrapping_sub(lo) > span {
                    continue;
                }
                count = count + step;
                let wy = w * y;
                best = max(best, wy - count - low);
                low = min(low, wy - count - step);
            }
        }
        max(best, w - count - step - low)
    }
}

/// Exact value for `d = 2`, by branch and bound over pairs of x-ranks.
pub fn exact_2d<T: Scalar>(x: &TorusSequence<T>) -> T {
    assert_eq!(x.dim, 2);
    if x.points.is_empty() {
        return T::zero();
    }
    let plane = Plane::new(x);
    let plus = sup_plus(&plane);
    sup_minus(&plane, plus)
}

/// `sup count/n − area` over closed boxes whose x-range is `[x_a, x_b]`.
fn sup_plus<T: Scalar>(pl: &Plane<T>) -> T {
    let n = pl.n as isize;
    // Cell of slabs with a ∈ [a0, a1], b ∈ [b0, b1]. Any slab in the cell
    // lies within [a0, b1] and is at least x_{b0} − x_{a1} wide.
    let bound = |c: [isize; 4]| {
        let w = max(T::zero(), pl.x(c[2]) - pl.x(c[1]));
        pl.best_plus(c[0] as usize, c[3] as usize, w)
    };
    let valid = |c: &[isize; 4]| c[0] <= c[3];
    branch_and_bound([0, n - 1, 0, n - 1], T::frac(1, pl.n), valid, bound)
}

/// `sup area − count/n` over open boxes whose x-range is `(x_l, x_r)`, or
/// `floor` if that is larger.
fn sup_minus<T: Scalar>(pl: &Plane<T>, floor: T) -> T {
    let n = pl.n as isize;
    // Any slab in the cell contains (l1, r0) and is at most x_{r1} − x_{l0}
    // wide.
    let bound = |c: [isize; 4]| pl.best_minus(c[1], c[2], pl.x(c[3]) - pl.x(c[0]));
    let valid = |c: &[isize; 4]| c[0] < c[3];
    branch_and_bound([-1, n - 1, 0, n], floor, valid, bound)
}

/// Maximises over cells `[lo0, hi0] × [lo1, hi1]` given an upper bound that
/// is exact on singletons.
fn branch_and_bound<T: Scalar>(
    root: [isize; 4],
    floor: T,
    valid: impl Fn(&[isize; 4]) -> bool,
    bound: impl Fn([isize; 4]) -> T,
) -> T {
    let mut best = floor;
    let mut stack = vec![(bound(root), root)];
    while let Some((ub, c)) = stack.pop() {
        if ub <= best {
            continue;
        }
        let (w0, w1) = (c[1] - c[0], c[3] - c[2]);
        if w0 == 0 && w1 == 0 {
            best = ub;
            continue;
        }
        let halves = if w0 >= w1 {
            let m = c[0] + w0 / 2;
            [[c[0], m, c[2], c[3]], [m + 1, c[1], c[2], c[3]]]
        } else {
            let m = c[2] + w1 / 2;
            [[c[0], c[1], c[2], m], [c[0], c[1], m + 1, c[3]]]
        };
        let mut kids: Vec<(T, [isize; 4])> = halves
            .into_iter()
            .filter(|h| valid(h))
            .map(|h| (bound(h), h))
            .filter(|(b, _)| *b > best)
            .collect();
        kids.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("bounds are ordered"));
        stack.extend(kids);
    }
    best
}

/// Largest deviation over boxes with corners in `(1/g)ℤ^d`.
pub fn grid_lower_bound(x: &TorusSequence<f64>, g: u32) -> f64 {
    let d = x.dim;
    let n = x.points.len();
    if n == 0 {
        return 0.0;
    }
    let g = g.max(1) as usize;
    let side = g + 1;
    let size = side.pow(d as u32);
    let mut prefix = vec![0u32; size];
    let stride: Vec<usize> = (0..d).map(|j| side.pow(j as u32)).collect();
    for p in &x.points {
        let idx: usize = p
            .iter()
            .zip(&stride)
            .map(|(&c, s)| (((c * g as f64).floor() as usize).min(g - 1) + 1) * s)
            .sum();
        prefix[idx] += 1;
    }
    for &s in &stride {
        for idx in 0..size {
            if (idx / s) % side > 0 {
                prefix[idx] += prefix[idx - s];
            }
        }
    }
    // Boxes are pairs (lo_j < hi_j) per axis.
    let pairs: Vec<(usize, usize)> = (0..=g).flat_map(|a| (a + 1..=g).map(move |b| (a, b))).collect();
    let total = pairs.len().pow(d as u32);
    (0..total)
        .into_par_iter()
        .map(|mut k| {
            let mut lo = Vec::with_capacity(d);
            let mut hi = Vec::with_capacity(d);
            let mut vol = 1.0;
            for _ in 0..d {
                let (a, b) = pairs[k % pairs.len()];
                k /= pairs.len();
                lo.push(a);
                hi.push(b);
                vol *= (b - a) as f64 / g as f64;
            }
            let mut count: i64 = 0;
            for mask in 0..1usize << d {
                let mut idx = 0;
                for j in 0..d {
                    idx += if mask >> j & 1 == 1 { lo[j] } else { hi[j] } * stride[j];
                }
                let sign = if mask.count_ones() % 2 == 0 { 1 } else { -1 };
                count += sign * prefix[idx] as i64;
            }
            (count as f64 / n as f64 - vol).abs()
        })
        .reduce(|| 0.0, f64::max)
}

/// `C_d·(1/H + Σ_{0<|h|_∞≤H} |(1/n) Σ_i e(⟨h, x_i⟩)| / Π max(1, |h_j|))`.
pub fn etk_bound<T: Scalar>(x: &TorusSequence<T>, h: u32, c_d: f64) -> f64 {
    let h = h.max(1) as usize;
    let d = x.dim;
    let n = x.points.len();
    let width = 2 * h + 1;
    if n == 0 {
        return c_d / h as f64;
    }
    // powers[i][j][k] = e((k − H)·x_ij)
    let powers: Vec<Vec<Vec<Complex64>>> = x
        .points
        .iter()
        .map(|p| {
            p.iter()
                .map(|c| {
                    let c = c.to_f64();
                    (0..width)
                        .map(|k| {
                            let t = std::f64::consts::TAU * ((k as f64 - h as f64) * c).rem_euclid(1.0);
                            Complex64::new(t.cos(), t.sin())
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let total = width.pow(d as u32);
    // h and −h give conjugate sums; visit the half with first nonzero entry > 0.
    let sum: f64 = (0..total)
        .into_par_iter()
        .filter_map(|mut k| {
            let mut idx = Vec::with_capacity(d);
            for _ in 0..d {
                idx.push(k % width);
                k /= width;
            }
            let first = idx.iter().find(|&&i| i != h)?;
            if *first < h {
                return None;
            }
            let weight: f64 = idx.iter().map(|&i| (i.abs_diff(h)).max(1) as f64).product();
            let s: Complex64 = powers
                .iter()
                .map(|pw| pw.iter().zip(&idx).map(|(row, &i)| row[i]).product::<Complex64>())
                .sum();
            Some(2.0 * s.norm() / (n as f64 * weight))
        })
        .sum();
    c_d * (1.0 / h as f64 + sum)
}

/// `(3/2)^d`.
pub fn default_c_d(dim: usize) -> f64 {
    1.5f64.powi(dim as i32)
}
