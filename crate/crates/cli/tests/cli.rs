use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn defs(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../defs")
        .join(name)
}

fn charlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_charlab"))
        .args(args)
        .env_remove("CHARLAB_BUDGET")
        .output()
        .expect("binary runs")
}

fn json_at(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gauss_scan_csv() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("gauss.csv");
    let g = defs("gauss.cdl");
    let o = charlab(&[
        "weil-scan",
        "--def",
        s(&g),
        "--primes",
        "5..199",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(&out).unwrap();
    let headers = r.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<_> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 44, "primes 5..199");
    for row in &rows {
        let q: f64 = row[col("q")].parse().unwrap();
        let abs: f64 = row[col("abs")].parse().unwrap();
        assert!((abs - q.sqrt()).abs() < 1e-6, "q = {q}: |G| = {abs}");
        let m: f64 = row[col("max_normalized")].parse().unwrap();
        assert!((m - 1.0).abs() < 1e-6);
    }
}

#[test]
fn squares_fit_json() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fit.json");
    let sq = defs("squares.cdl");
    let o = charlab(&[
        "measure-fit",
        "--def",
        s(&sq),
        "--primes",
        "11..97",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json_at(&out);
    assert_eq!(doc["schema"], 1);
    assert_eq!(doc["partial"], false);
    assert_eq!(doc["result"]["d"], 1);
    assert_eq!(doc["result"]["mu"], "1/2");
    for c in doc["result"]["counts"].as_array().unwrap() {
        let (q, n) = (c[0].as_u64().unwrap(), c[1].as_u64().unwrap());
        assert_eq!(n, (q - 1) / 2, "nonzero squares in F_{q}");
    }
}

#[test]
fn sqrt2_witnesses_verify() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("w.json");
    let w = defs("sqrt2.cdl");
    let o = charlab(&[
        "witness",
        "--def",
        s(&w),
        "--pmax",
        "1000000",
        "--limit",
        "20",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json_at(&out);
    let records = doc["result"]["records"].as_array().unwrap();
    assert_eq!(records.len(), 20);
    for r in records {
        assert_eq!(r["verified"], true);
        let p = r["p"].as_u64().unwrap();
        let root = r["root"].as_u64().unwrap();
        assert_eq!(root * root % p, 2, "root of x^2 - 2 mod {p}");
        assert!(r["order"].as_u64().unwrap() >= 50);
    }
}

#[test]
fn sqrt2_full_range() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("w.json");
    let w = defs("sqrt2.cdl");
    let o = charlab(&["witness", "--def", s(&w), "--pmax", "1000000", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json_at(&out);
    let r = &doc["result"];
    let n = r["records"].as_array().unwrap().len() as u64;
    assert!(n >= 1);
    assert_eq!(r["verified_count"].as_u64(), Some(n));
    assert_eq!(r["primes_scanned"], 78497, "primes below 10^6 from 3 on");
}

#[test]
fn exit_codes() {
    let g = defs("gauss.cdl");
    let ok = charlab(&["sum", "--def", s(&g), "--primes", "7"]);
    assert_eq!(ok.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert!((doc["result"]["abs"].as_f64().unwrap() - 7f64.sqrt()).abs() < 1e-9);

    // Input errors.
    for args in [
        vec!["sum", "--def", "/nonexistent.cdl", "--primes", "7"],
        vec!["sum", "--def", s(&g), "--primes", "8"],
        vec!["sum", "--def", s(&g), "--primes", "5,7"],
        vec!["weil-scan", "--def", s(&g), "--chi", "bogus", "--primes", "7"],
        vec!["no-such-command"],
    ] {
        let o = charlab(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }

    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.cdl");
    std::fs::write(&bad, "poly g 1: x1 +").unwrap();
    let o = charlab(&["sum", "--def", s(&bad), "--primes", "7"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.cdl:1:"), "position in {err}");
}

#[test]
fn assert_mode() {
    let dir = TempDir::new().unwrap();
    let g = defs("gauss.cdl");
    let pass = dir.path().join("pass.json");
    std::fs::write(
        &pass,
        r#"{"checks":[{"path":"result.max_normalized","value":1.0,"tol":1e-6},
                      {"path":"result.rows#","value":3},
                      {"path":"result.rows.0.q","value":5}]}"#,
    )
    .unwrap();
    let fail = dir.path().join("fail.json");
    std::fs::write(
        &fail,
        r#"{"checks":[{"path":"result.max_normalized","max":0.9}]}"#,
    )
    .unwrap();
    let base = ["weil-scan", "--def", s(&g), "--primes", "5,7,11", "--assert"];
    let o = charlab(&[&base[..], &[s(&pass)]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = charlab(&[&base[..], &[s(&fail)]].concat());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("result.max_normalized"));
}

#[test]
fn reports_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let g = defs("gauss.cdl");
    let sq = defs("squares.cdl");
    let runs: [Vec<&str>; 3] = [
        vec!["weil-scan", "--def", s(&g), "--primes", "5..60", "--q", "9,8,3^3"],
        vec!["measure-fit", "--def", s(&sq), "--pmax", "60"],
        vec![
            "discrepancy",
            "--alpha",
            "0.41421356237309503,0.6180339887498949",
            "--n",
            "200",
        ],
    ];
    for (i, args) in runs.iter().enumerate() {
        for ext in ["json", "csv"] {
            let a = dir.path().join(format!("{i}a.{ext}"));
            let b = dir.path().join(format!("{i}b.{ext}"));
            let ra = charlab(&[&args[..], &["--out", s(&a), "--threads", "1"]].concat());
            let rb = charlab(&[&args[..], &["--out", s(&b)]].concat());
            assert!(ra.status.success() && rb.status.success(), "{args:?}");
            assert_eq!(
                std::fs::read(&a).unwrap(),
                std::fs::read(&b).unwrap(),
                "{args:?} .{ext}"
            );
        }
    }
}

#[test]
fn partial_results_are_flushed() {
    let dir = TempDir::new().unwrap();
    let g = defs("gauss.cdl");
    // A budget of 30 points lets small fields through and stops at q = 31.
    let json = dir.path().join("p.json");
    let o = charlab(&[
        "weil-scan",
        "--def",
        s(&g),
        "--primes",
        "5..60",
        "--budget",
        "30",
        "--out",
        s(&json),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let doc = json_at(&json);
    assert_eq!(doc["partial"], true);
    assert!(doc["error"].as_str().unwrap().contains("31"));
    let qs: Vec<u64> = doc["result"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["q"].as_u64().unwrap())
        .collect();
    assert_eq!(qs, [5, 7, 11, 13, 17, 19, 23, 29]);

    let csv = dir.path().join("p.csv");
    let o = charlab(&[
        "weil-scan",
        "--def",
        s(&g),
        "--primes",
        "5..60",
        "--budget",
        "30",
        "--out",
        s(&csv),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.ends_with("# partial: true\n"));
    assert_eq!(text.lines().count(), 1 + 8 + 1);
}

#[test]
fn budget_from_environment() {
    let g = defs("gauss.cdl");
    let o = Command::new(env!("CARGO_BIN_EXE_charlab"))
        .args(["sum", "--def", s(&g), "--primes", "31"])
        .env("CHARLAB_BUDGET", "10")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_charlab"))
        .args(["sum", "--def", s(&g), "--primes", "31", "--budget", "1000"])
        .env("CHARLAB_BUDGET", "10")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "flag wins over the environment");
}

#[test]
fn other_subcommands_run() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("misc.cdl");
    std::fs::write(
        &f,
        "poly curve 2: x1*x2 - 1\n\
         laurent h 2: (1/2) Y1 + (1/2) Y1^-1\n\
         linmap a 2: x1\n\
         multmap b 2: x1\n\
         predicate p 1: psi(x1) * chi(x1)\n\
         formula nz 1: not x1 = 0\n\
         theta t 1: roots(z^2 = a1) psi(z1) chi(1)\n",
    )
    .unwrap();
    let pts = dir.path().join("pts.txt");
    std::fs::write(&pts, "0 0\n1/2 1/2\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["axiom4", "--def", s(&f), "--primes", "11..31"],
        vec!["density", "--def", s(&f), "--primes", "11,13", "--grid-res", "1"],
        vec!["theta", "--def", s(&f), "--primes", "5,7"],
        vec!["integrate", "--def", s(&f), "--domain", "nz", "--primes", "5..30"],
        vec!["fubini", "--def", s(&f), "--primes", "5,7", "--outer", "0"],
        vec!["decompose", "--def", s(&f), "--primes", "5,7"],
        vec!["discrepancy", "--points", s(&pts)],
        vec!["etk-search", "--gammas", "1/3", "--box", "[2/3:2/3]"],
    ];
    for args in cases {
        let o = charlab(&args);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(doc["schema"], 1);
        assert_eq!(doc["command"], args[0]);
    }
    let o = charlab(&["discrepancy", "--points", s(&pts)]);
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    // The closed box [0, 1/2]^2 holds both points but has area 1/4.
    assert_eq!(doc["result"]["discrepancy"]["value"], 0.75);
    let o = charlab(&["etk-search", "--gammas", "1/3", "--box", "[2/3:2/3]"]);
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["result"]["l"], 2, "{doc}");
    let o = charlab(&["integrate", "--def", s(&f), "--domain", "nz", "--primes", "5..30"]);
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    for v in doc["result"]["values"].as_array().unwrap() {
        let q = v["q"].as_f64().unwrap();
        assert!((v["abs"].as_f64().unwrap() - q.sqrt() / (q - 1.0)).abs() < 1e-9);
    }
}
