use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use colxva::curves::RateCurve;
use colxva::optimizer::read_matrix_csv;
use colxva_cli::{read_columns_csv, Scenario};
use serde_json::Value;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn colxva(args: &[&str], scenario: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_colxva"))
        .args(args)
        .arg("--scenario")
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn erf(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term.abs() > 1e-17 * sum.abs() {
        n += 1.0;
        term *= -x * x / n;
        sum += term / (2.0 * n + 1.0);
    }
    2.0 / std::f64::consts::PI.sqrt() * sum
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

#[test]
fn price_zcb_discounts_at_the_issuer_rate() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&colxva(&["price"], &scenarios().join("zcb.json"), dir.path()));
    let npv = v["npv"].as_f64().unwrap();
    assert!((npv / (-0.04f64).exp() - 1.0).abs() < 1e-4);
    let written: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("price.json")).unwrap()).unwrap();
    assert_eq!(written, v);
}

#[test]
fn price_under_full_cash_is_black_scholes() {
    let (s, k, t, r, vol) = (100.0f64, 100.0f64, 1.0f64, 0.01f64, 0.5f64);
    let d1 = ((s / k).ln() + (r + 0.5 * vol * vol) * t) / (vol * t.sqrt());
    let bs = s * norm_cdf(d1) - k * (-r * t).exp() * norm_cdf(d1 - vol * t.sqrt());
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&colxva(&["price"], &scenarios().join("call_full_cash.json"), dir.path()));
    assert!((v["npv"].as_f64().unwrap() / bs - 1.0).abs() < 5e-4);
    assert_eq!(v["xva"].as_f64().unwrap(), 0.0);
}

#[test]
fn missing_curve_file_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.json");
    std::fs::write(&scenario, r#"{ "risk_free": { "file": "nowhere.csv" }, "option": { "payoff": { "kind": "zcb" }, "maturity": 1, "spot": 1, "vol": 0.2 } }"#).unwrap();
    let o = colxva(&["price"], &scenario, dir.path());
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!(e["exit_code"], 2);
    assert!(e["message"].as_str().unwrap().contains("nowhere.csv"));
}

#[test]
fn bad_flags_and_bad_json_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = colxva(&["price", "--points", "many"], &scenarios().join("zcb.json"), dir.path());
    assert_eq!(o.status.code(), Some(2));
    stderr_json(&o);

    let scenario = dir.path().join("s.json");
    std::fs::write(&scenario, r#"{ "risk_free": 0.01, "colour": "blue" }"#).unwrap();
    let o = colxva(&["price"], &scenario, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "input");
}

#[test]
fn infeasible_allocation_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.json");
    let body = format!(
        r#"{{ "risk_free": 0.0, "assets_file": "{}",
             "optimizer": {{ "quantity": 10,
               "fixed": {{ "unit_lva_file": "{}", "requirements": [118.007, 90.641, 60.98, 29.915] }} }} }}"#,
        scenarios().join("assets.csv").display(),
        scenarios().join("unit_lva_fixed.csv").display()
    );
    std::fs::write(&scenario, body).unwrap();
    let o = colxva(&["optimize"], &scenario, dir.path());
    assert_eq!(o.status.code(), Some(3));
    let e = stderr_json(&o);
    assert_eq!(e["error"], "solver");
    assert!(e["message"].as_str().unwrap().contains("infeasible"));
}

#[test]
fn option_sweep_has_structural_zeros_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    stdout_json(&colxva(&["sweep", "--points", "6"], &scenarios().join("call_repo_collateral.json"), dir.path()));
    let text = std::fs::read_to_string(dir.path().join("sweep_option.csv")).unwrap();
    let (header, rows) = read_columns_csv(&text).unwrap();
    assert_eq!(header, ["collateralization", "cra_long", "xva_long", "cra_short", "xva_short"]);
    assert_eq!(rows.len(), 6);
    // uncollateralized: XVA is all CRA; full collateral: no CRA
    assert_eq!(rows[0][1], rows[0][2]);
    assert_eq!(rows[5][1], 0.0);
    assert_eq!(rows[5][3], 0.0);
    assert_eq!(colxva_cli::write_columns_csv(&header.iter().map(String::as_str).collect::<Vec<_>>(), &rows), text);
}

#[test]
fn xva_table_round_trips_through_the_matrix_reader() {
    let dir = tempfile::tempdir().unwrap();
    stdout_json(&colxva(&["xva"], &scenarios().join("swap_decomposition.json"), dir.path()));
    let table = read_matrix_csv(std::fs::File::open(dir.path().join("xva_table.csv")).unwrap()).unwrap();
    assert_eq!(table.corner, "figure_bp");
    assert_eq!(table.row_ids, ["NPV", "XVA", "LVA", "CRA", "CVA", "DVA", "CFA", "DFA"]);
    assert_eq!(table.col_ids.len(), 9);
    // full-collateral columns carry no credit or funding figures
    for j in 6..9 {
        for i in 3..8 {
            assert_eq!(table.values[i][j], 0.0);
        }
        assert_eq!(table.values[1][j], table.values[2][j]);
    }
}

#[test]
fn repo_curve_carries_the_capital_charge() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&colxva(&["repo-curve"], &scenarios().join("repo_ust10_bbb.json"), dir.path()));
    // 0.10 · 0.4% economic capital + 10bp funding liquidity
    assert_eq!(v["short_end_spread_bp"].as_f64().unwrap(), 14.0);
    let spreads = RateCurve::from_csv_path("s", &dir.path().join("repo_spread.csv")).unwrap();
    assert!((spreads.zero_rate(0.25).unwrap() - 0.0014).abs() < 1e-15);
    let rates = RateCurve::from_csv_path("r", &dir.path().join("repo_curve.csv")).unwrap();
    let ois = RateCurve::from_csv_path("ois", &scenarios().join("ois_humped.csv")).unwrap();
    for t in [0.25, 1.0, 10.0, 30.0] {
        let gap = rates.zero_rate(t).unwrap() - ois.zero_rate(t).unwrap();
        // both curves are printed to 6 significant digits
        assert!((gap - 0.0014).abs() < 1e-7, "{t}: {gap}");
    }
}

#[test]
fn optimize_writes_allocations_with_updated_marks() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&colxva(&["optimize"], &scenarios().join("allocation_iteration.json"), dir.path()));
    assert_eq!(v["converged"], true);
    let n = v["iterations"].as_u64().unwrap();
    for k in 0..n {
        let t = read_matrix_csv(std::fs::File::open(dir.path().join(format!("allocation_{k}.csv"))).unwrap()).unwrap();
        assert_eq!(t.row_ids.last().unwrap(), "Updated MTM");
        assert_eq!(t.col_ids, ["AA", "A", "BBB", "BB"]);
    }
    let unit = read_matrix_csv(std::fs::File::open(dir.path().join("unit_lva.csv")).unwrap()).unwrap();
    assert!(unit.values.iter().flatten().all(|&e| e > 0.0));
}

#[test]
fn seed_flag_changes_drawn_portfolios_only() {
    let base = tempfile::tempdir().unwrap();
    let other = tempfile::tempdir().unwrap();
    let s = scenarios().join("swap_10bp_repo.json");
    stdout_json(&colxva(&["xva"], &s, base.path()));
    stdout_json(&colxva(&["xva", "--seed", "7"], &s, other.path()));
    let a = std::fs::read(base.path().join("xva_table.csv")).unwrap();
    let b = std::fs::read(other.path().join("xva_table.csv")).unwrap();
    assert_ne!(a, b);

    let mut scenario = Scenario::load(&s).unwrap();
    scenario.seed = 7;
    let run = colxva_cli::xva(&scenario).unwrap();
    assert_eq!(run.file("xva_table.csv").unwrap().as_bytes(), b.as_slice());
}

#[test]
fn sweep_of_an_uncollateralized_scenario_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = colxva(&["sweep"], &scenarios().join("zcb.json"), dir.path());
    assert_eq!(o.status.code(), Some(2));
}
