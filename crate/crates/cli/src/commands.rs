use std::fs;

use anyhow::{anyhow, bail, Context, Result};
use charlab::characters::{AdditiveCharacter, MultiplicativeCharacter};
use charlab::charsums::{
    axiom4_check, char_sum, density_probe, ChiRule, DiagonalSpec, PsiRule, ScanRow, WeilScan,
};
use charlab::equidist::{
    default_c_d, discrepancy, etk_bound, exponent_search, witness_search, ExponentOutcome, ExponentQuery,
    TorusBox, TorusSequence,
};
use charlab::field::{make_field, FieldElement, FiniteField};
use charlab::formulas::{
    DeclBody, DefinableFormula, Env, Formula, PolyExpr, PredicateExpr, Program, Rational,
};
use charlab::geometry::AffineVariety;
use charlab::measure::{
    case_decompose, count_definable, fit_counts, fubini_check, integrate_at, IntegralReport,
};
use charlab::theta::CompiledTheta;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::inputs::{self, Coordinate};
use crate::report::{cell, opt, Outcome, Table};
use crate::{Chars, Command, Common, Integrand, SumInputs};

/// Runs `f` on every field in parallel and keeps the results, in field
/// order, up to the first failure.
fn scan<T: Send>(
    fields: &[(u64, u32)],
    f: impl Fn(&FiniteField) -> Result<T> + Sync,
) -> (Vec<T>, Option<anyhow::Error>) {
    let results: Vec<Result<T>> = fields
        .par_iter()
        .map(|&(p, e)| {
            let k = make_field(p, e).map_err(|err| anyhow!("F_{}: {err}", (p as u128).pow(e)))?;
            f(&k).with_context(|| format!("at q = {}", k.q()))
        })
        .collect();
    let mut out = Vec::new();
    for r in results {
        match r {
            Ok(v) => out.push(v),
            Err(e) => return (out, Some(e)),
        }
    }
    (out, None)
}

struct Rules {
    psi: PsiRule,
    chi: ChiRule,
}

impl Rules {
    fn new(c: &Chars) -> Result<Self> {
        Ok(Rules {
            psi: inputs::psi_rule(&c.psi)?,
            chi: inputs::chi_rule(&c.chi)?,
        })
    }

    /// `None` when the χ rule has no character on `k`.
    fn resolve(&self, k: &FiniteField) -> Option<(AdditiveCharacter, MultiplicativeCharacter)> {
        Some((self.psi.resolve(k), self.chi.resolve(k)?))
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

fn fields_of(c: &Common) -> Result<Vec<(u64, u32)>> {
    inputs::fields(c.primes.as_deref(), c.q.as_deref(), c.pmax)
}

fn config(common: &Common, extra: Value) -> Value {
    let mut v = to_value(common);
    if let (Value::Object(base), Value::Object(more)) = (&mut v, extra) {
        base.extend(more);
    }
    v
}

pub fn dispatch(cmd: Command) -> Result<(&'static str, Common, Value, Outcome)> {
    let (name, common, extra, outcome) = match cmd {
        Command::Sum {
            common,
            chars,
            inputs,
        } => {
            let out = sum(&common, &chars, &inputs, false)?;
            ("sum", common, json!({"chars": chars, "inputs": inputs}), out)
        }
        Command::WeilScan {
            common,
            chars,
            inputs,
        } => {
            let out = sum(&common, &chars, &inputs, true)?;
            (
                "weil-scan",
                common,
                json!({"chars": chars, "inputs": inputs}),
                out,
            )
        }
        Command::Axiom4 {
            common,
            chars,
            curve,
            h,
            k_suite,
        } => {
            let out = axiom4(&common, &chars, &curve, h.as_deref(), k_suite)?;
            (
                "axiom4",
                common,
                json!({"chars": chars, "curve": curve, "h": h, "k_suite": k_suite}),
                out,
            )
        }
        Command::Density {
            common,
            chars,
            curve,
            alpha,
            beta,
            grid_res,
            height,
        } => {
            let out = density(
                &common,
                &chars,
                &curve,
                alpha.as_deref(),
                beta.as_deref(),
                grid_res,
                height,
            )?;
            (
                "density",
                common,
                json!({"chars": chars, "curve": curve, "alpha": alpha, "beta": beta, "grid_res": grid_res, "height": height}),
                out,
            )
        }
        Command::Theta { common, chars, name } => {
            let out = theta(&common, &chars, name.as_deref())?;
            ("theta", common, json!({"chars": chars, "name": name}), out)
        }
        Command::MeasureFit { common, name, params } => {
            let out = measure_fit(&common, name.as_deref(), &params)?;
            let params: Vec<String> = params.iter().map(|p| p.to_string()).collect();
            (
                "measure-fit",
                common,
                json!({"name": name, "params": params}),
                out,
            )
        }
        Command::Integrate {
            common,
            chars,
            integrand,
        } => {
            let out = integrate(&common, &chars, &integrand)?;
            (
                "integrate",
                common,
                json!({"chars": chars, "integrand": integrand_config(&integrand)}),
                out,
            )
        }
        Command::Fubini {
            common,
            chars,
            integrand,
            outer,
        } => {
            let out = fubini(&common, &chars, &integrand, outer)?;
            (
                "fubini",
                common,
                json!({"chars": chars, "integrand": integrand_config(&integrand), "outer": outer}),
                out,
            )
        }
        Command::Decompose {
            common,
            chars,
            integrand,
            max_order,
        } => {
            let out = decompose(&common, &chars, &integrand, max_order)?;
            (
                "decompose",
                common,
                json!({"chars": chars, "integrand": integrand_config(&integrand), "max_order": max_order}),
                out,
            )
        }
        Command::Discrepancy {
            common,
            points,
            alpha,
            n,
            h,
            c_d,
            resolution,
        } => {
            let out = discrepancy_cmd(points.as_deref(), alpha.as_deref(), n, &h, c_d, resolution)?;
            (
                "discrepancy",
                common,
                json!({"points": points, "alpha": alpha, "n": n, "h": h, "c_d": c_d, "resolution": resolution}),
                out,
            )
        }
        Command::EtkSearch {
            common,
            gammas,
            region,
            modulus,
            residue,
            min_order,
            l_max,
            h_check,
        } => {
            let q = etk_query(
                &gammas,
                region.as_deref(),
                modulus,
                residue,
                min_order,
                l_max,
                h_check,
            )?;
            let out = etk_search(&q)?;
            (
                "etk-search",
                common,
                json!({"gammas": gammas, "box": region, "modulus": modulus, "residue": residue,
                       "min_order": min_order, "l_max": l_max, "h_check": h_check}),
                out,
            )
        }
        Command::Witness {
            common,
            name,
            limit,
            min_order,
        } => {
            let out = witness(&common, name.as_deref(), limit, min_order)?;
            (
                "witness",
                common,
                json!({"name": name, "limit": limit, "min_order": min_order}),
                out,
            )
        }
    };
    let config = config(&common, extra);
    Ok((name, common, config, outcome))
}

fn integrand_config(i: &Integrand) -> Value {
    json!({
        "name": i.name,
        "domain": i.domain,
        "params": i.params.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
    })
}

fn budget(c: &Common) -> Result<u64> {
    inputs::budget(c.budget)
}

fn program(c: &Common) -> Result<Program> {
    if c.defs.is_empty() {
        bail!("this subcommand needs --def FILE");
    }
    inputs::load_defs(&c.defs)
}

fn polys_named<'a>(p: &'a Program, name: &str) -> Vec<&'a PolyExpr> {
    p.decls
        .iter()
        .filter(|d| d.name.as_deref() == Some(name))
        .filter_map(|d| match &d.body {
            DeclBody::Poly(x) => Some(x),
            _ => None,
        })
        .collect()
}

/// The equations named `name`, or affine `n`-space if there are none.
fn variety(p: &Program, name: &str, n: Option<usize>) -> Result<AffineVariety> {
    let eqs: Vec<PolyExpr> = polys_named(p, name).into_iter().cloned().collect();
    let arity = eqs.first().map(|e| e.arity()).or(n).ok_or_else(|| {
        anyhow!("cannot tell the dimension: declare `poly {name} n: ...` or the functions on it")
    })?;
    if let Some(e) = eqs.iter().find(|e| e.arity() != arity) {
        bail!("equations of {name:?} have arities {arity} and {}", e.arity());
    }
    if n.is_some_and(|n| n != arity) {
        bail!("{name:?} lives in dimension {arity}, expected {}", n.unwrap());
    }
    Ok(AffineVariety::new(arity, eqs))
}

fn sum(common: &Common, chars: &Chars, names: &SumInputs, scan_mode: bool) -> Result<Outcome> {
    let prog = program(common)?;
    let rules = Rules::new(chars)?;
    let budget = budget(common)?;
    let fields = fields_of(common)?;
    if !scan_mode && fields.len() != 1 {
        bail!("sum takes exactly one field, got {}", fields.len());
    }
    let g = polys_named(&prog, &names.g).first().cloned().cloned();
    let h = polys_named(&prog, &names.h).first().cloned().cloned();
    let hint = g.as_ref().or(h.as_ref()).map(|x| x.arity());
    let c = variety(&prog, &names.curve, None).or_else(|_| variety(&prog, &names.curve, hint))?;
    let n = c.n;
    let g = g.unwrap_or_else(|| PolyExpr::zero(n));
    let h = h.unwrap_or_else(|| PolyExpr::constant(n, 1));
    if g.arity() != n || h.arity() != n {
        bail!("g and h must take {n} variables");
    }
    let (rows, err) = scan(&fields, |k| {
        let Some((psi, chi)) = rules.resolve(k) else {
            return Ok(Err(k.q()));
        };
        let report = char_sum(&c, &g, &h, k, &psi, &chi, budget)?;
        Ok(Ok(ScanRow {
            included: !report.degenerate(),
            report,
        }))
    });
    let (rows, skipped): (Vec<_>, Vec<_>) = rows.into_iter().partition(|r| r.is_ok());
    let scan = WeilScan::from_rows(
        rows.into_iter().map(|r| r.unwrap()).collect(),
        skipped.into_iter().map(|r| r.unwrap_err()).collect(),
    );
    let mut table = Table::new(&[
        "q",
        "re",
        "im",
        "abs",
        "normalized",
        "point_count",
        "psi_constant",
        "chi_constant",
        "included",
        "max_normalized",
    ]);
    for r in &scan.rows {
        let s = &r.report;
        table.push(vec![
            cell(s.q),
            cell(s.re),
            cell(s.im),
            cell(s.abs),
            cell(s.normalized),
            cell(s.point_count),
            cell(s.psi_constant),
            cell(s.chi_constant),
            cell(r.included),
            cell(scan.max_normalized),
        ]);
    }
    let result = if scan_mode {
        to_value(&scan)
    } else {
        scan.rows
            .first()
            .map(|r| to_value(&r.report))
            .unwrap_or(Value::Null)
    };
    if !scan_mode && err.is_none() && scan.rows.is_empty() {
        bail!("the χ rule has no character on this field");
    }
    Ok(Outcome {
        result,
        table,
        error: err,
    })
}

fn axiom4(common: &Common, chars: &Chars, curve: &str, h: Option<&str>, k_suite: f64) -> Result<Outcome> {
    let prog = program(common)?;
    let rules = Rules::new(chars)?;
    let budget = budget(common)?;
    let fields = fields_of(common)?;
    let h = inputs::pick(&prog, "laurent", h, |b| match b {
        DeclBody::Laurent(x) => Some(x),
        _ => None,
    })?;
    let c = variety(&prog, curve, Some(h.n()))?;
    let (rows, err) = scan(&fields, |k| {
        let Some((psi, chi)) = rules.resolve(k) else {
            return Ok(None);
        };
        Ok(Some(axiom4_check(&c, h, k, &psi, &chi, k_suite, budget)?))
    });
    let rows: Vec<_> = rows.into_iter().flatten().collect();
    let mut table = Table::new(&[
        "q",
        "c_prime_count",
        "hypothesis_holds",
        "hyperplane_witness",
        "coset_witness",
        "sup_value",
        "s",
        "rhs_bound",
        "pass",
    ]);
    for r in &rows {
        table.push(vec![
            cell(r.q),
            cell(r.c_prime_count),
            cell(r.hypothesis_holds),
            cell(r.hyperplane_witness.is_some()),
            cell(r.coset_witness.is_some()),
            opt(r.sup_value),
            cell(r.s),
            opt(r.rhs_bound),
            opt(r.pass),
        ]);
    }
    let all_pass = rows.iter().all(|r| r.pass != Some(false));
    Ok(Outcome {
        result: json!({"rows": rows, "all_pass": all_pass}),
        table,
        error: err,
    })
}

fn density(
    common: &Common,
    chars: &Chars,
    curve: &str,
    alpha: Option<&str>,
    beta: Option<&str>,
    grid_res: u64,
    height: u32,
) -> Result<Outcome> {
    if grid_res == 0 {
        bail!("--grid-res must be positive");
    }
    let prog = program(common)?;
    let rules = Rules::new(chars)?;
    let budget = budget(common)?;
    let fields = fields_of(common)?;
    let alpha = inputs::pick(&prog, "linmap", alpha, |b| match b {
        DeclBody::LinMap(x) => Some(x),
        _ => None,
    })?;
    let beta = inputs::pick(&prog, "multmap", beta, |b| match b {
        DeclBody::MultMap(x) => Some(x),
        _ => None,
    })?;
    if alpha.inputs != beta.inputs {
        bail!("α takes {} inputs but β takes {}", alpha.inputs, beta.inputs);
    }
    let spec = DiagonalSpec {
        curve: variety(&prog, curve, Some(alpha.inputs))?,
        alpha: alpha.clone(),
        beta: beta.clone(),
    };
    let (rows, err) = scan(&fields, |k| {
        let Some((psi, chi)) = rules.resolve(k) else {
            return Ok(None);
        };
        Ok(Some(density_probe(
            &spec, k, &psi, &chi, grid_res, height, budget,
        )?))
    });
    let rows: Vec<_> = rows.into_iter().flatten().collect();
    let mut table = Table::new(&[
        "q",
        "cells_hit",
        "cells_total",
        "coverage_fraction",
        "alpha_witness",
        "beta_witness",
    ]);
    for r in &rows {
        table.push(vec![
            cell(r.q),
            cell(r.cells_hit),
            cell(r.cells_total),
            cell(r.coverage_fraction),
            cell(r.alpha_witness.is_some()),
            cell(r.beta_witness.is_some()),
        ]);
    }
    Ok(Outcome {
        result: json!({ "rows": rows }),
        table,
        error: err,
    })
}

#[derive(Serialize)]
struct ThetaRow {
    q: u64,
    params: Vec<FieldElement>,
    re: f64,
    im: f64,
    abs: f64,
    fiber_size: usize,
}

fn theta(common: &Common, chars: &Chars, name: Option<&str>) -> Result<Outcome> {
    let prog = program(common)?;
    let rules = Rules::new(chars)?;
    let budget = budget(common)?;
    let fields = fields_of(common)?;
    let spec = inputs::pick(&prog, "theta", name, |b| match b {
        DeclBody::Theta(x) => Some(x),
        _ => None,
    })?;
    let bound = spec.bound();
    let (rows, err) = scan(&fields, |k| {
        let Some((psi, chi)) = rules.resolve(k) else {
            return Ok(Vec::new());
        };
        let tuples = (k.q() as u128)
            .checked_pow(spec.params as u32)
            .unwrap_or(u128::MAX);
        if tuples > budget as u128 {
            bail!("{tuples} parameter tuples exceed the budget {budget}");
        }
        let ct = CompiledTheta::new(k, spec);
        let elems: Vec<FieldElement> = k.elements().collect();
        let mut out = Vec::new();
        for mut idx in 0..tuples as u64 {
            let mut a = Vec::with_capacity(spec.params);
            for _ in 0..spec.params {
                a.push(elems[(idx % k.q()) as usize]);
                idx /= k.q();
            }
            let fiber_size = ct.fiber_points(k, &a)?.len();
            let v = ct.eval(k, &a, &psi, &chi)?;
            out.push(ThetaRow {
                q: k.q(),
                params: a,
                re: v.re,
                im: v.im,
                abs: v.norm(),
                fiber_size,
            });
        }
        Ok(out)
    });
    let rows: Vec<ThetaRow> = rows.into_iter().flatten().collect();
    let mut table = Table::new(&["q", "params", "re", "im", "abs", "fiber_size", "bound"]);
    for r in &rows {
        let params: Vec<String> = r.params.iter().map(|x| x.encoding().to_string()).collect();
        table.push(vec![
            cell(r.q),
            params.join(" "),
            cell(r.re),
            cell(r.im),
            cell(r.abs),
            cell(r.fiber_size),
            cell(bound),
        ]);
    }
    let max_abs = rows.iter().map(|r| r.abs).fold(0.0, f64::max);
    Ok(Outcome {
        result: json!({"bound": bound, "max_abs": max_abs, "rows": rows}),
        table,
        error: err,
    })
}

fn reduce_params(k: &FiniteField, params: &[i128]) -> Vec<FieldElement> {
    params.iter().map(|&a| k.from_int(a)).collect()
}

fn measure_fit(common: &Common, name: Option<&str>, params: &[i128]) -> Result<Outcome> {
    let prog = program(common)?;
    let budget = budget(common)?;
    let fields = fields_of(common)?;
    let phi = inputs::pick(&prog, "formula", name, |b| match b {
        DeclBody::Formula(x) => Some(x),
        _ => None,
    })?;
    if params.len() > phi.arity {
        bail!(
            "formula has arity {} but {} parameters were given",
            phi.arity,
            params.len()
        );
    }
    let (counts, err) = scan(&fields, |k| {
        Ok((k.q(), count_definable(phi, k, &reduce_params(k, params), budget)?))
    });
    let mut table = Table::new(&["q", "count", "residual"]);
    let result = match (&err, fit_counts(&counts)) {
        (None, Ok(est)) => {
            for (r, &(q, c)) in est.residuals.iter().zip(&counts) {
                table.push(vec![cell(q), cell(c), cell(r.residual)]);
            }
            let mut v = to_value(&est);
            v["mu"] = Value::String(format!("{}/{}", est.mu_num, est.mu_den));
            v["counts"] = to_value(&counts);
            v
        }
        (None, Err(e)) => return Err(e.into()),
        (Some(_), _) => {
            for &(q, c) in &counts {
                table.push(vec![cell(q), cell(c), String::new()]);
            }
            json!({ "counts": counts })
        }
    };
    Ok(Outcome {
        result,
        table,
        error: err,
    })
}

struct IntegrandInputs<'a> {
    pred: &'a PredicateExpr,
    domain: DefinableFormula,
    env: Env,
}

fn integrand_inputs<'a>(prog: &'a Program, i: &Integrand) -> Result<IntegrandInputs<'a>> {
    let pred = inputs::pick(prog, "predicate", i.name.as_deref(), |b| match b {
        DeclBody::Predicate(x) => Some(x),
        _ => None,
    })?;
    let domain = match inputs::pick(prog, "formula", i.domain.as_deref(), |b| match b {
        DeclBody::Formula(x) => Some(x),
        _ => None,
    }) {
        Ok(b) => b.clone(),
        Err(e) if i.domain.is_some() => return Err(e),
        Err(_) => DefinableFormula {
            arity: pred.arity,
            root: Formula::True,
        },
    };
    if domain.arity != pred.arity {
        bail!(
            "predicate has arity {} but the domain has arity {}",
            pred.arity,
            domain.arity
        );
    }
    if i.params.len() > domain.arity {
        bail!("{} parameters for arity {}", i.params.len(), domain.arity);
    }
    Ok(IntegrandInputs {
        pred,
        domain,
        env: prog.env(),
    })
}

fn integrate(common: &Common, chars: &Chars, i: &Integrand) -> Result<Outcome> {
    let prog = program(common)?;
    let rules = Rules::new(chars)?;
    let budget = budget(common)?;
    let fields = fields_of(common)?;
    let ii = integrand_inputs(&prog, i)?;
    let (vals, err) = scan(&fields, |k| {
        let Some((psi, chi)) = rules.resolve(k) else {
            return Ok(Err(k.q()));
        };
        let params = reduce_params(k, &i.params);
        Ok(Ok(integrate_at(
            ii.pred, &ii.env, &ii.domain, k, &params, &psi, &chi, budget,
        )?))
    });
    let (vals, skipped): (Vec<_>, Vec<_>) = vals.into_iter().partition(|r| r.is_ok());
    let report = IntegralReport::from_values(
        vals.into_iter().map(|r| r.unwrap()).collect(),
        skipped.into_iter().map(|r| r.unwrap_err()).collect(),
    );
    let mut table = Table::new(&["q", "re", "im", "abs", "count"]);
    for v in &report.values {
        table.push(vec![
            cell(v.q),
            cell(v.re),
            cell(v.im),
            cell(v.abs),
            cell(v.count),
        ]);
    }
    Ok(Outcome {
        result: to_value(&report),
        table,
        error: err,
    })
}

fn fubini(common: &Common, chars: &Chars, i: &Integrand, outer: usize) -> Result<Outcome> {
    let prog = program(common)?;
    let rules = Rules::new(chars)?;
    let budget = budget(common)?;
    let fields = fields_of(common)?;
    let ii = integrand_inputs(&prog, i)?;
    let (rows, err) = scan(&fields, |k| {
        let Some((psi, chi)) = rules.resolve(k) else {
            return Ok(None);
        };
        let params = reduce_params(k, &i.params);
        Ok(Some(fubini_check(
            ii.pred, &ii.env, &ii.domain, outer, k, &params, &psi, &chi, budget,
        )?))
    });
    let rows: Vec<_> = rows.into_iter().flatten().collect();
    let mut table = Table::new(&[
        "q",
        "lhs_re",
        "lhs_im",
        "rhs_re",
        "rhs_im",
        "delta",
        "projection_size",
        "hypothesis_holds",
    ]);
    for r in &rows {
        table.push(vec![
            cell(r.q),
            cell(r.lhs_re),
            cell(r.lhs_im),
            cell(r.rhs_re),
            cell(r.rhs_im),
            cell(r.delta),
            cell(r.projection_size),
            cell(r.hypothesis_holds),
        ]);
    }
    let max_delta = rows.iter().map(|r| r.delta).fold(0.0, f64::max);
    Ok(Outcome {
        result: json!({"rows": rows, "max_delta": max_delta}),
        table,
        error: err,
    })
}

fn decompose(common: &Common, chars: &Chars, i: &Integrand, max_order: u64) -> Result<Outcome> {
    let prog = program(common)?;
    let rules = Rules::new(chars)?;
    let budget = budget(common)?;
    let fields = fields_of(common)?;
    let ii = integrand_inputs(&prog, i)?;
    let (rows, err) = scan(&fields, |k| {
        let Some((psi, chi)) = rules.resolve(k) else {
            return Ok(None);
        };
        let params = reduce_params(k, &i.params);
        Ok(Some(case_decompose(
            ii.pred, &ii.env, &ii.domain, k, &params, &psi, &chi, max_order, budget,
        )?))
    });
    let rows: Vec<_> = rows.into_iter().flatten().collect();
    let mut table = Table::new(&[
        "q",
        "order",
        "cell",
        "values",
        "points",
        "formula_matches",
        "delta",
    ]);
    for d in &rows {
        for (idx, c) in d.cells.iter().enumerate() {
            let values: Vec<String> = c.values.iter().map(|v| v.to_string()).collect();
            table.push(vec![
                cell(d.q),
                cell(d.order),
                cell(idx),
                values.join(" "),
                cell(c.points.len()),
                opt(c.formula_matches),
                cell(d.delta),
            ]);
        }
    }
    let max_delta = rows.iter().map(|r| r.delta).fold(0.0, f64::max);
    Ok(Outcome {
        result: json!({"rows": rows, "max_delta": max_delta}),
        table,
        error: err,
    })
}

fn read_points(path: &std::path::Path) -> Result<(usize, Vec<Vec<Coordinate>>)> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut pts = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let coords = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(inputs::coordinate)
            .collect::<Result<Vec<_>>>()
            .with_context(|| format!("{}:{}", path.display(), ln + 1))?;
        pts.push(coords);
    }
    let dim = pts.first().map_or(0, |p| p.len());
    if let Some(i) = pts.iter().position(|p| p.len() != dim) {
        bail!(
            "{}: point {} has {} coordinates, expected {dim}",
            path.display(),
            i + 1,
            pts[i].len()
        );
    }
    Ok((dim, pts))
}

fn discrepancy_cmd(
    points: Option<&std::path::Path>,
    alpha: Option<&str>,
    n: Option<usize>,
    hs: &[u32],
    c_d: Option<f64>,
    resolution: Option<u32>,
) -> Result<Outcome> {
    if hs.contains(&0) {
        bail!("H must be at least 1");
    }
    let (dim, exact_pts, float_pts) = match (points, alpha) {
        (Some(path), _) => {
            let (dim, pts) = read_points(path)?;
            let exact: Option<Vec<Vec<Rational>>> = pts
                .iter()
                .map(|p| {
                    p.iter()
                        .map(|c| match c {
                            Coordinate::Exact(r) => Some(*r),
                            Coordinate::Float(_) => None,
                        })
                        .collect()
                })
                .collect();
            let floats: Vec<Vec<f64>> = pts
                .iter()
                .map(|p| {
                    p.iter()
                        .map(|c| match c {
                            Coordinate::Exact(r) => *r.numer() as f64 / *r.denom() as f64,
                            Coordinate::Float(x) => *x,
                        })
                        .collect()
                })
                .collect();
            (dim, exact, floats)
        }
        (None, Some(alpha)) => {
            let alpha: Vec<f64> = alpha
                .split(',')
                .map(|a| match inputs::coordinate(a)? {
                    Coordinate::Exact(r) => Ok(*r.numer() as f64 / *r.denom() as f64),
                    Coordinate::Float(x) => Ok(x),
                })
                .collect::<Result<_>>()?;
            let n = n.ok_or_else(|| anyhow!("--alpha needs --n"))?;
            let seq = TorusSequence::kronecker(&alpha, n);
            (alpha.len(), None, seq.points().to_vec())
        }
        (None, None) => bail!("give --points FILE or --alpha with --n"),
    };
    if dim == 0 {
        bail!("no points");
    }
    let floats = TorusSequence::new(dim, float_pts).map_err(|e| anyhow!("{e}"))?;
    let d = match exact_pts {
        Some(pts) if dim <= 2 => {
            let seq = TorusSequence::new(dim, pts).map_err(|e| anyhow!("{e}"))?;
            discrepancy(&seq, resolution)
        }
        _ => discrepancy(&floats, resolution),
    };
    let c = c_d.unwrap_or_else(|| default_c_d(dim));
    let mut table = Table::new(&[
        "n",
        "dim",
        "h",
        "c_d",
        "etk_bound",
        "discrepancy",
        "exact",
        "resolution",
    ]);
    let mut etk = Vec::new();
    for &h in hs {
        let b = etk_bound(&floats, h, c);
        table.push(vec![
            cell(floats.len()),
            cell(dim),
            cell(h),
            cell(c),
            cell(b),
            cell(d.value),
            cell(d.exact),
            opt(d.resolution),
        ]);
        etk.push(json!({"h": h, "c_d": c, "bound": b}));
    }
    let dominated = etk
        .iter()
        .all(|e| d.value <= e["bound"].as_f64().unwrap_or(f64::NAN));
    Ok(Outcome::complete(
        json!({"n": floats.len(), "dim": dim, "discrepancy": d, "etk": etk, "dominated": dominated}),
        table,
    ))
}

fn etk_query(
    gammas: &str,
    region: Option<&str>,
    modulus: u64,
    residue: u64,
    min_order: u64,
    l_max: u64,
    h_check: u64,
) -> Result<ExponentQuery> {
    let gammas = gammas
        .split(',')
        .map(|g| {
            let r = inputs::rational(g)?;
            if *r.denom() <= 0 {
                bail!("bad angle {g:?}");
            }
            Ok(charlab::characters::RationalAngle::new(
                *r.numer(),
                *r.denom() as u64,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let region = match region {
        Some(s) => TorusBox::new(inputs::arcs(s)?),
        None => TorusBox::full(gammas.len()),
    };
    Ok(ExponentQuery {
        gammas,
        region,
        modulus,
        residue,
        min_order,
        l_max,
        h_check,
    })
}

fn etk_search(q: &ExponentQuery) -> Result<Outcome> {
    let outcome = exponent_search(q).map_err(|e| anyhow!("{e}"))?;
    let mut table = Table::new(&["status", "l", "point", "orders", "horizon"]);
    let join = |v: Vec<String>| v.join(" ");
    match &outcome {
        ExponentOutcome::Found(hit) => table.push(vec![
            "found".into(),
            cell(hit.l),
            join(hit.point.iter().map(|a| a.to_string()).collect()),
            join(hit.orders.iter().map(|o| o.to_string()).collect()),
            String::new(),
        ]),
        ExponentOutcome::NotFound { horizon, .. } => table.push(vec![
            "not_found".into(),
            String::new(),
            String::new(),
            String::new(),
            opt(*horizon),
        ]),
    }
    Ok(Outcome::complete(to_value(&outcome), table))
}

fn witness(
    common: &Common,
    name: Option<&str>,
    limit: Option<usize>,
    min_order: Option<u64>,
) -> Result<Outcome> {
    let prog = program(common)?;
    let mut spec = inputs::pick(&prog, "witness", name, |b| match b {
        DeclBody::Witness(x) => Some(x),
        _ => None,
    })?
    .clone();
    if let Some(k) = min_order {
        spec.min_order = k;
    }
    let (mut lo, mut hi) = match common.primes.as_deref() {
        Some(s) => {
            let ps = inputs::parse_primes(s)?;
            match (ps.iter().min(), ps.iter().max()) {
                (Some(&a), Some(&b)) => (a, b),
                _ => bail!("--primes selects no primes"),
            }
        }
        None => spec.primes.unwrap_or((2, 0)),
    };
    if let Some(p) = common.pmax {
        hi = p;
        lo = lo.min(p);
    }
    if hi < lo || hi == 0 {
        bail!("no prime range: give --pmax, --primes or `primes a b` in the declaration");
    }
    let mut table = Table::new(&[
        "p",
        "root",
        "twist",
        "exponent",
        "order",
        "chi_angles",
        "psi_angles",
        "unity_angle",
        "verified",
    ]);
    let run = match witness_search(&spec, lo, hi, limit) {
        Ok(run) => run,
        Err(e) => {
            return Ok(Outcome {
                result: json!({"range": [lo, hi], "records": []}),
                table,
                error: Some(anyhow!("{e}")),
            })
        }
    };
    let join = |v: &[charlab::characters::RationalAngle]| {
        v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ")
    };
    for r in &run.records {
        table.push(vec![
            cell(r.p),
            cell(r.root),
            cell(r.twist),
            cell(r.exponent),
            cell(r.order),
            join(&r.chi_angles),
            join(&r.psi_angles),
            opt(r.unity_angle),
            cell(r.verified),
        ]);
    }
    let verified = run.records.iter().filter(|r| r.verified).count();
    let mut v = to_value(&run);
    v["range"] = json!([lo, hi]);
    v["verified_count"] = json!(verified);
    Ok(Outcome::complete(v, table))
}
