//! Turning flags and definition files into core inputs.

use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use charlab::arith::{as_prime_power, is_prime, primes_in_range};
use charlab::charsums::{ChiRule, PsiRule};
use charlab::equidist::Arc;
use charlab::formulas::{parse_source, DeclBody, Program, Rational};
use charlab::geometry::DEFAULT_BUDGET;

/// Concatenates the declarations of every file, in order.
pub fn load_defs(paths: &[PathBuf]) -> Result<Program> {
    let mut program = Program::default();
    for path in paths {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let parsed = parse_source(&text).map_err(|e| anyhow!("{}:{e}", path.display()))?;
        program.decls.extend(parsed.decls);
    }
    Ok(program)
}

/// `a..b` (inclusive) or a comma-separated list.
pub fn parse_primes(spec: &str) -> Result<Vec<u64>> {
    let spec = spec.trim();
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: u64 = lo
            .trim()
            .parse()
            .with_context(|| format!("bad range start in {spec:?}"))?;
        let hi: u64 = hi
            .trim()
            .parse()
            .with_context(|| format!("bad range end in {spec:?}"))?;
        if lo > hi {
            bail!("empty prime range {spec:?}");
        }
        return Ok(primes_in_range(lo, hi));
    }
    let mut out = Vec::new();
    for item in spec.split(',') {
        let p: u64 = item
            .trim()
            .parse()
            .with_context(|| format!("bad prime {item:?}"))?;
        if !is_prime(p) {
            bail!("{p} is not prime");
        }
        out.push(p);
    }
    Ok(out)
}

/// Comma-separated `p^e` or plain prime powers.
pub fn parse_field_sizes(spec: &str) -> Result<Vec<(u64, u32)>> {
    let mut out = Vec::new();
    for item in spec.split(',') {
        let item = item.trim();
        let pe = match item.split_once('^') {
            Some((p, e)) => {
                let p: u64 = p
                    .trim()
                    .parse()
                    .with_context(|| format!("bad prime in {item:?}"))?;
                let e: u32 = e
                    .trim()
                    .parse()
                    .with_context(|| format!("bad exponent in {item:?}"))?;
                if !is_prime(p) || e == 0 {
                    bail!("{item} is not a prime power");
                }
                (p, e)
            }
            None => {
                let q: u64 = item.parse().with_context(|| format!("bad field size {item:?}"))?;
                as_prime_power(q).ok_or_else(|| anyhow!("{q} is not a prime power"))?
            }
        };
        out.push(pe);
    }
    Ok(out)
}

/// Fields from `--primes`, `--q` and `--pmax`. An explicit prime list wins
/// over `--pmax`; a range is capped by it.
pub fn fields(primes: Option<&str>, q: Option<&str>, pmax: Option<u64>) -> Result<Vec<(u64, u32)>> {
    let mut out: Vec<(u64, u32)> = Vec::new();
    match (primes, pmax) {
        (Some(spec), Some(cap)) if spec.contains("..") => {
            out.extend(
                parse_primes(spec)?
                    .into_iter()
                    .filter(|&p| p <= cap)
                    .map(|p| (p, 1)),
            );
        }
        (Some(spec), _) => out.extend(parse_primes(spec)?.into_iter().map(|p| (p, 1))),
        (None, Some(cap)) => out.extend(primes_in_range(2, cap).into_iter().map(|p| (p, 1))),
        (None, None) => {}
    }
    if let Some(q) = q {
        out.extend(parse_field_sizes(q)?);
    }
    out.sort_by_key(|&(p, e)| (p as u128).pow(e));
    out.dedup();
    if out.is_empty() {
        bail!("no fields selected; use --primes, --q or --pmax");
    }
    Ok(out)
}

/// `std` or `twist:c`.
pub fn psi_rule(s: &str) -> Result<PsiRule> {
    match s.trim() {
        "std" | "standard" => Ok(PsiRule::Standard),
        other => {
            let c = other
                .strip_prefix("twist:")
                .ok_or_else(|| anyhow!("--psi expects std or twist:c, got {other:?}"))?;
            Ok(PsiRule::Twist(
                c.trim().parse().with_context(|| format!("bad twist {c:?}"))?,
            ))
        }
    }
}

/// `index:k` or `order:r`.
pub fn chi_rule(s: &str) -> Result<ChiRule> {
    let s = s.trim();
    if let Some(k) = s.strip_prefix("index:") {
        return Ok(ChiRule::Index(
            k.trim().parse().with_context(|| format!("bad index {k:?}"))?,
        ));
    }
    if let Some(r) = s.strip_prefix("order:") {
        return Ok(ChiRule::Order(
            r.trim().parse().with_context(|| format!("bad order {r:?}"))?,
        ));
    }
    bail!("--chi expects index:k or order:r, got {s:?}")
}

/// The `--budget` flag, else `CHARLAB_BUDGET`, else the library default.
pub fn budget(flag: Option<u64>) -> Result<u64> {
    let b = match flag {
        Some(b) => b,
        None => match std::env::var("CHARLAB_BUDGET") {
            Ok(v) => v
                .trim()
                .parse()
                .with_context(|| format!("bad CHARLAB_BUDGET {v:?}"))?,
            Err(_) => DEFAULT_BUDGET,
        },
    };
    if b == 0 {
        bail!("budget must be positive");
    }
    Ok(b)
}

pub fn rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: i128 = num.parse().with_context(|| format!("bad rational {s:?}"))?;
    let den: i128 = den.parse().with_context(|| format!("bad rational {s:?}"))?;
    if den == 0 {
        bail!("zero denominator in {s:?}");
    }
    Ok(Rational::new(num, den))
}

/// A coordinate written as `a/b` (exact) or as a decimal.
pub enum Coordinate {
    Exact(Rational),
    Float(f64),
}

pub fn coordinate(s: &str) -> Result<Coordinate> {
    let s = s.trim();
    if s.contains('.') || s.contains('e') || s.contains('E') {
        return Ok(Coordinate::Float(
            s.parse().with_context(|| format!("bad number {s:?}"))?,
        ));
    }
    Ok(Coordinate::Exact(rational(s)?))
}

/// Arcs such as `[0:1/10)` or `(1/3:1/2]`, separated by commas; `full` is
/// the whole circle.
pub fn arcs(spec: &str) -> Result<Vec<Arc>> {
    let mut out = Vec::new();
    for item in spec.split(',') {
        let item = item.trim();
        if item == "full" {
            out.push(Arc::full());
            continue;
        }
        let closed_start = match item.chars().next() {
            Some('[') => true,
            Some('(') => false,
            _ => bail!("arc {item:?} must start with [ or ("),
        };
        let closed_end = match item.chars().last() {
            Some(']') => true,
            Some(')') => false,
            _ => bail!("arc {item:?} must end with ] or )"),
        };
        let inner = &item[1..item.len() - 1];
        let (lo, hi) = inner
            .split_once(':')
            .ok_or_else(|| anyhow!("arc {item:?} needs lo:hi"))?;
        let (lo, hi) = (rational(lo)?, rational(hi)?);
        if hi < lo {
            bail!("arc {item:?} has hi < lo");
        }
        out.push(Arc {
            start: lo - lo.floor(),
            len: hi - lo,
            closed_start,
            closed_end,
        });
    }
    Ok(out)
}

/// The declaration body named `name`, or the only/first one of its kind
/// when `name` is absent.
pub fn pick<'a, T>(
    program: &'a Program,
    what: &str,
    name: Option<&str>,
    get: impl Fn(&'a DeclBody) -> Option<&'a T>,
) -> Result<&'a T> {
    program
        .decls
        .iter()
        .filter(|d| name.is_none() || d.name.as_deref() == name)
        .find_map(|d| get(&d.body))
        .ok_or_else(|| match name {
            Some(n) => anyhow!("no {what} declaration named {n:?}"),
            None => anyhow!("no {what} declaration found"),
        })
}
