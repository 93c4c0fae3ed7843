//! Command implementations behind the `colxva` binary.
//!
//! Each command is a pure function from a [`Scenario`] to a [`Run`]: the
//! files to write and a JSON summary for stdout. The binary only does the
//! I/O, so the same outputs can be checked in-process.

use std::path::Path;

use colxva::csa::CollateralAsset;
use colxva::discounting::CollateralMode;
use colxva::exposure::ExposureProfile;
use colxva::optimizer::{
    iterate_allocation, read_matrix_csv, solve_lp, write_allocation_csv, write_matrix_csv, AllocationProblem,
};
use colxva::pde::xva_pde;
use colxva::repo::{repo_curve, spread_curve};
use colxva::xva::{decompose_default, sig6, to_running_spread, write_table_csv, XvaFigures, XvaReport};
use colxva::curves::RateCurve;
use rayon::prelude::*;
use serde_json::{json, Value};

pub mod scenario;

pub use scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, unreadable or inconsistent scenario.
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] colxva::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 3 for numerical failures, 2 for everything the user can fix in the input.
    pub fn exit_code(&self) -> i32 {
        use colxva::Error as E;
        match self {
            CliError::Core(
                E::PicardDivergence { .. } | E::Infeasible(_) | E::Unbounded | E::IterationLimit(_),
            ) => 3,
            _ => 2,
        }
    }

    pub fn to_json(&self) -> Value {
        let kind = match self {
            CliError::Input(_) => "input",
            CliError::Io(_) => "io",
            CliError::Core(_) if self.exit_code() == 3 => "solver",
            CliError::Core(_) => "validation",
        };
        json!({ "error": kind, "message": self.to_string(), "exit_code": self.exit_code() })
    }
}

/// Files produced by a command, in write order, plus the stdout summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub files: Vec<(String, String)>,
    pub summary: Value,
}

impl Run {
    pub fn write_to(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|f| f.0 == name).map(|f| f.1.as_str())
    }
}

/// Rounds to 6 significant digits.
pub fn round6(x: f64) -> f64 {
    sig6(x).parse().unwrap_or(x)
}

/// Rounds every number in a JSON value to 6 significant digits.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if !n.is_i64() && !n.is_u64() => n
            .as_f64()
            .and_then(|x| serde_json::Number::from_f64(round6(x)))
            .map_or(Value::Null, Value::Number),
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        v => v,
    }
}

fn pretty(v: Value) -> String {
    let mut s = serde_json::to_string_pretty(&round_json(v)).expect("json values serialize");
    s.push('\n');
    s
}

fn csv_text(f: impl FnOnce(&mut Vec<u8>) -> colxva::Result<()>) -> Result<String, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    String::from_utf8(buf).map_err(|e| CliError::Input(e.to_string()))
}

/// `n` evenly spaced points on [0, 1].
pub fn sweep_axis(n: usize) -> Result<Vec<f64>, CliError> {
    if n < 2 {
        return Err(CliError::Input(format!("a sweep needs at least 2 points, got {n}")));
    }
    Ok((0..n).map(|k| k as f64 / (n - 1) as f64).collect())
}

/// Plain numeric CSV with a header line.
pub fn write_columns_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.iter().map(|&v| sig6(v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

/// Parses [`write_columns_csv`] output.
pub fn read_columns_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::Input("empty CSV".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| {
            let row = l
                .split(',')
                .map(|f| f.parse::<f64>().map_err(|e| CliError::Input(format!("bad number {f:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != header.len() {
                return Err(CliError::Input("row length differs from header".into()));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((header, rows))
}

fn figures_json(f: &XvaFigures) -> Value {
    serde_json::to_value(f).expect("plain struct")
}

fn bp_or_value(report: &XvaReport) -> XvaFigures {
    report.running_bp.unwrap_or(report.value)
}

fn with_bp(report: XvaReport, profile: &ExposureProfile) -> Result<XvaReport, CliError> {
    if profile.annuity > 0.0 {
        Ok(to_running_spread(&report, profile.annuity)?)
    } else {
        Ok(report)
    }
}

fn file_label(label: &str) -> String {
    label
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_ascii_lowercase)
        .collect::<Vec<_>>()
        .join("_")
}

/// Option value, its risk-free twin and the adjustments.
pub fn price(s: &Scenario) -> Result<Run, CliError> {
    let option = s.option_spec()?;
    let x = xva_pde(&option, &s.rate_spec(s.collateral.eta)?, &s.grid)?;
    let summary = json!({
        "npv": x.v,
        "v_star": x.v_star,
        "xva": x.u,
        "cra": x.cra,
        "lva": x.lva,
        "colva": x.colva,
        "picard_iterations": x.max_picard_iterations,
    });
    Ok(Run { files: vec![("price.json".into(), pretty(summary.clone()))], summary: round_json(summary) })
}

/// Collateralization sweep of the option (long and short) or of every portfolio.
pub fn sweep(s: &Scenario, points: Option<usize>) -> Result<Run, CliError> {
    if s.collateral.mode == CollateralMode::Uncollateralized {
        return Err(CliError::Input("a collateralization sweep needs a collateral mode other than uncollateralized".into()));
    }
    let axis = sweep_axis(points.or(s.sweep_points).unwrap_or(11))?;
    let mut files = Vec::new();
    if s.option.is_some() {
        let option = s.option_spec()?;
        let q = option.quantity.abs();
        let rows = axis
            .par_iter()
            .map(|&eta| {
                let spec = s.rate_spec(eta)?;
                let long = xva_pde(&option.clone().with_quantity(q), &spec, &s.grid)?;
                let short = xva_pde(&option.clone().with_quantity(-q), &spec, &s.grid)?;
                Ok(vec![eta, long.cra, long.u, short.cra, short.u])
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let header = ["collateralization", "cra_long", "xva_long", "cra_short", "xva_short"];
        files.push(("sweep_option.csv".to_string(), write_columns_csv(&header, &rows)));
    }
    for (k, p) in s.portfolios.iter().enumerate() {
        let profile = s.profile(p, k as u64)?;
        let rows = axis
            .par_iter()
            .map(|&eta| {
                let r = with_bp(decompose_default(&profile, &s.rate_spec(eta)?)?, &profile)?;
                let f = bp_or_value(&r);
                Ok(vec![eta, f.cra, f.lva, f.xva])
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let header = ["collateralization", "cra", "lva", "xva"];
        files.push((format!("sweep_{}.csv", file_label(&p.label)), write_columns_csv(&header, &rows)));
    }
    if files.is_empty() {
        return Err(CliError::Input("scenario has neither an option nor portfolios to sweep".into()));
    }
    let summary = json!({ "points": axis.len(), "files": files.iter().map(|f| f.0.clone()).collect::<Vec<_>>() });
    Ok(Run { files, summary })
}

/// Decomposition table: one column per portfolio and collateralization level.
pub fn xva(s: &Scenario) -> Result<Run, CliError> {
    if s.portfolios.is_empty() {
        return Err(CliError::Input("scenario lists no portfolios".into()));
    }
    let profiles = s
        .portfolios
        .par_iter()
        .enumerate()
        .map(|(k, p)| s.profile(p, k as u64))
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut columns = Vec::new();
    let mut entries = Vec::new();
    for &eta in &s.table_levels {
        let spec = s.rate_spec(eta)?;
        for (p, profile) in s.portfolios.iter().zip(&profiles) {
            let r = with_bp(decompose_default(profile, &spec)?, profile)?;
            columns.push((format!("{} @{}", p.label, sig6(eta)), r));
            entries.push(json!({
                "portfolio": p.label,
                "collateralization": eta,
                "mtm0": profile.mtm0,
                "annuity": profile.annuity,
                "value": figures_json(&r.value),
                "running_bp": r.running_bp.as_ref().map(figures_json),
            }));
        }
    }
    let table = csv_text(|buf| write_table_csv(&columns, buf))?;
    let summary = json!({ "reports": entries });
    Ok(Run {
        files: vec![("xva_table.csv".into(), table), ("xva.json".into(), pretty(summary.clone()))],
        summary: round_json(summary),
    })
}

fn rounded_curve(c: &RateCurve) -> Result<RateCurve, CliError> {
    let nodes: Vec<(f64, f64)> = c.nodes().map(|(t, z)| (t, round6(z))).collect();
    Ok(RateCurve::new(c.label(), &nodes)?)
}

fn find_asset<'a>(assets: &'a [CollateralAsset], id: &str) -> Result<&'a CollateralAsset, CliError> {
    assets
        .iter()
        .find(|a| a.id == id)
        .ok_or_else(|| CliError::Input(format!("asset {id} not in the assets file")))
}

/// Break-even term repo curve for the configured asset and borrower rating.
pub fn repo(s: &Scenario) -> Result<Run, CliError> {
    let r = s.repo.as_ref().ok_or_else(|| CliError::Input("scenario has no repo section".into()))?;
    let (id, rating) = match (&r.asset, &r.rating) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(CliError::Input("repo section needs asset and rating".into())),
    };
    let assets = s.assets()?;
    let asset = find_asset(&assets, id)?;
    let params = s.repo_params()?;
    let tenors = s.repo_tenors();
    let rf = s.risk_free_curve()?;
    let rates = rounded_curve(&repo_curve(&params, &rf, asset, rating, &tenors)?)?;
    let spreads = rounded_curve(&spread_curve(&params, asset, rating, &tenors)?)?;
    let summary = json!({
        "asset": id,
        "rating": rating,
        "short_end_spread_bp": spreads.zero_rate(tenors[0])? * 1e4,
        "long_end_spread_bp": spreads.zero_rate(*tenors.last().expect("nonempty"))? * 1e4,
    });
    Ok(Run {
        files: vec![
            ("repo_curve.csv".into(), csv_text(|b| rates.write_csv(b))?),
            ("repo_spread.csv".into(), csv_text(|b| spreads.write_csv(b))?),
        ],
        summary: round_json(summary),
    })
}

/// One LP from a given unit-LVA table, or the full allocation ↔ revaluation
/// iteration over generated netting sets.
pub fn optimize(s: &Scenario) -> Result<Run, CliError> {
    let o = s.optimizer.as_ref().ok_or_else(|| CliError::Input("scenario has no optimizer".into()))?;
    let assets = s.assets()?;
    if let Some(fixed) = &o.fixed {
        let path = s.unit_lva_path(&fixed.unit_lva_file);
        let file =
            std::fs::File::open(&path).map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
        let table = read_matrix_csv(file)?;
        let ordered = table
            .row_ids
            .iter()
            .map(|id| find_asset(&assets, id).cloned())
            .collect::<Result<Vec<_>, _>>()?;
        let mut problem = AllocationProblem::new(
            ordered,
            table.col_ids.clone(),
            fixed.requirements.clone(),
            table.values.clone(),
            o.iteration.hqla_floor,
        )?
        .with_funding(o.iteration.funding);
        if o.iteration.auto_cash {
            problem = problem.with_cash();
        }
        let a = solve_lp(&problem)?;
        let summary = json!({
            "objective": a.objective,
            "binding": a.binding,
            "max_violation": problem.residuals(&a.q).max_violation(),
        });
        return Ok(Run {
            files: vec![
                ("allocation.csv".into(), csv_text(|b| write_allocation_csv(&a, None, b))?),
                ("allocation.json".into(), pretty(summary.clone())),
            ],
            summary: round_json(summary),
        });
    }
    let (sets, ctx) = s.netting_sets()?;
    let t = iterate_allocation(&sets, &assets, &ctx, &o.iteration)?;
    let first = &t.steps[0];
    let asset_ids = &first.allocation.asset_ids;
    let set_ids = &first.allocation.set_ids;
    let mut files = vec![(
        "unit_lva.csv".to_string(),
        csv_text(|b| write_matrix_csv("asset", asset_ids, set_ids, &first.unit_lva, b))?,
    )];
    for (k, step) in t.steps.iter().enumerate() {
        files.push((
            format!("allocation_{k}.csv"),
            csv_text(|b| write_allocation_csv(&step.allocation, Some(&step.updated_mtm), b))?,
        ));
    }
    let mut summary = json!({
        "converged": t.converged,
        "iterations": t.steps.len(),
        "initial_mtm": first.mtm,
        "steps": t.steps.iter().map(|st| json!({
            "objective": st.allocation.objective,
            "updated_mtm": st.updated_mtm,
        })).collect::<Vec<_>>(),
    });
    if !t.converged {
        summary["warning"] = json!("iteration limit reached before the tolerance was met");
    }
    files.push(("trajectory.json".into(), pretty(summary.clone())));
    Ok(Run { files, summary: round_json(summary) })
}
