//! LVA-maximizing collateral allocation.
//!
//! The firm (party B in [`crate::discounting`]) owes collateral on netting
//! sets with negative mark-to-market. Posting asset `i` to set `j` earns a
//! benefit of `e_ij` per unit, the set's LVA under full collateralization
//! with that asset, normalized by the units the requirement needs:
//!
//! ```text
//! e_ij = B_i(1 − h_ci)·LVA_ij / V_j
//! ```
//!
//! The allocation LP maximizes `Σ q_ij e_ij` subject to inventory, funding
//! and HQLA constraints:
//!
//! ```text
//! Σ_j q_ij + s_i = Q_i,   Σ_i q_ij(1 − h_ci)B_i = V_j,   Σ_i s_i(1 − h_Li)B_i ≥ H
//! ```
//!
//! Valuations depend on the posted mix and the requirements depend on the
//! valuations, so [`iterate_allocation`] alternates between the two until
//! the mark-to-markets settle.

pub mod simplex;

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csa::{chi, eligibility_bounds, CollateralAsset, CollateralState};
use crate::curves::{PartyCurves, RateCurve};
use crate::discounting::{CollateralMode, EffectiveRateSpec};
use crate::exposure::ExposureProfile;
use crate::repo::{spread_curve, RepoModelParams};
use crate::xva::{decompose_default, sig6, XvaReport};
use crate::{Error, Result};
use simplex::{LinearProgram, RowKind};

/// Haircut used in the per-set funding equality.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FundingHaircut {
    /// `(1 − h_ci)`: the protection the CSA credits.
    #[default]
    Csa,
    /// `(1 − h_pi)`: cash raised by repo.
    Repo,
}

impl FundingHaircut {
    fn factor(self, asset: &CollateralAsset) -> f64 {
        match self {
            FundingHaircut::Csa => asset.price * (1.0 - asset.h_csa),
            FundingHaircut::Repo => asset.price * (1.0 - asset.h_repo),
        }
    }
}

/// A netting set owed to or by a counterparty.
#[derive(Debug, Clone)]
pub struct NettingSet {
    pub id: String,
    /// Counterparty rating, selecting the repo economic capital.
    pub rating: String,
    pub counterparty: PartyCurves,
    /// Risk-free exposure profile; `profile.mtm0` is the OIS mark-to-market.
    pub profile: ExposureProfile,
}

/// Market inputs shared by every unit-LVA and revaluation.
#[derive(Debug, Clone)]
pub struct LvaContext {
    pub firm: PartyCurves,
    pub risk_free: RateCurve,
    pub repo: RepoModelParams,
    pub repo_tenors: Vec<f64>,
}

impl CollateralAsset {
    /// Cash is recognised by its id and funds at the risk-free rate.
    pub fn is_cash(&self) -> bool {
        self.id.eq_ignore_ascii_case("cash")
    }
}

fn repo_spread(asset: &CollateralAsset, set: &NettingSet, ctx: &LvaContext) -> Result<RateCurve> {
    if asset.is_cash() {
        return Ok(RateCurve::flat("cash_spread", 0.0));
    }
    spread_curve(&ctx.repo, asset, &set.rating, &ctx.repo_tenors)
}

/// LVA of `set` fully collateralized with `asset` alone, the same asset
/// moving in both directions.
pub fn full_collateral_lva(asset: &CollateralAsset, set: &NettingSet, ctx: &LvaContext) -> Result<f64> {
    let spread = repo_spread(asset, set, ctx)?;
    let x = asset.chi();
    let spec = EffectiveRateSpec::new(
        ctx.firm.clone(),
        set.counterparty.clone(),
        ctx.risk_free.clone(),
        CollateralState::symmetric(1.0, x)?,
        CollateralMode::NonCash,
    )?
    .with_blend_curve(x, &spread.combine(x, &spread, 0.0, "spread"))?;
    Ok(decompose_default(&set.profile, &spec)?.value.lva)
}

/// `e = B(1 − h_c)·LVA/V` for the set valued at `mtm`.
///
/// A zero valuation has no requirement to normalize by and is an error;
/// [`unit_lva_matrix`] maps it to 0.
pub fn unit_lva(asset: &CollateralAsset, set: &NettingSet, ctx: &LvaContext, mtm: f64) -> Result<f64> {
    if mtm == 0.0 {
        return Err(Error::ZeroRequirement(set.id.clone()));
    }
    Ok(asset.csa_value() * full_collateral_lva(asset, set, ctx)? / mtm)
}

/// `LVA_ij` for every asset and set, computed in parallel.
pub fn lva_matrix(assets: &[CollateralAsset], sets: &[NettingSet], ctx: &LvaContext) -> Result<Vec<Vec<f64>>> {
    let flat: Vec<f64> = (0..assets.len() * sets.len())
        .into_par_iter()
        .map(|k| full_collateral_lva(&assets[k / sets.len()], &sets[k % sets.len()], ctx))
        .collect::<Result<_>>()?;
    Ok(flat.chunks(sets.len().max(1)).map(<[f64]>::to_vec).collect())
}

/// Unit LVAs from precomputed `LVA_ij` at the given mark-to-markets; zero
/// for sets valued at exactly 0 or above (nothing to post).
pub fn unit_lva_matrix(assets: &[CollateralAsset], lva: &[Vec<f64>], mtm: &[f64]) -> Vec<Vec<f64>> {
    assets
        .iter()
        .zip(lva)
        .map(|(a, row)| {
            row.iter()
                .zip(mtm)
                .map(|(l, &v)| if v < 0.0 { a.csa_value() * l / v } else { 0.0 })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct AllocationProblem {
    pub assets: Vec<CollateralAsset>,
    pub set_ids: Vec<String>,
    /// Posting magnitudes `V_j ≥ 0`.
    pub requirements: Vec<f64>,
    /// `e_ij`, rows by asset.
    pub unit_lva: Vec<Vec<f64>>,
    pub hqla_floor: f64,
    /// Upper bounds on `q_ij`; 0 marks an ineligible pair.
    pub bounds: Vec<Vec<f64>>,
    pub funding: FundingHaircut,
}

impl AllocationProblem {
    pub fn new(
        assets: Vec<CollateralAsset>,
        set_ids: Vec<String>,
        requirements: Vec<f64>,
        unit_lva: Vec<Vec<f64>>,
        hqla_floor: f64,
    ) -> Result<Self> {
        let ids: Vec<&str> = set_ids.iter().map(String::as_str).collect();
        let bounds = eligibility_bounds(&assets, &ids);
        let p = AllocationProblem {
            assets,
            set_ids,
            requirements,
            unit_lva,
            hqla_floor,
            bounds,
            funding: FundingHaircut::Csa,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_funding(mut self, funding: FundingHaircut) -> Self {
        self.funding = funding;
        self
    }

    /// Appends unlimited zero-haircut cash with zero unit LVA, unless present.
    pub fn with_cash(mut self) -> Self {
        if !self.assets.iter().any(CollateralAsset::is_cash) {
            let mut cash = CollateralAsset::cash(f64::INFINITY);
            cash.h_lcr = 1.0;
            self.assets.push(cash);
            self.unit_lva.push(vec![0.0; self.set_ids.len()]);
            self.bounds.push(vec![f64::INFINITY; self.set_ids.len()]);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = (self.assets.len(), self.set_ids.len());
        if self.requirements.len() != n
            || self.unit_lva.len() != m
            || self.bounds.len() != m
            || self.unit_lva.iter().chain(&self.bounds).any(|r| r.len() != n)
        {
            return Err(Error::validation("allocation problem dimensions disagree"));
        }
        for a in &self.assets {
            a.validate()?;
        }
        if self.requirements.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::domain("requirements must be finite and >= 0"));
        }
        if self.unit_lva.iter().flatten().any(|e| !e.is_finite()) {
            return Err(Error::domain("unit LVAs must be finite"));
        }
        if !(self.hqla_floor >= 0.0) {
            return Err(Error::domain("hqla floor must be >= 0"));
        }
        Ok(())
    }

    pub fn objective(&self, q: &[Vec<f64>]) -> f64 {
        q.iter().zip(&self.unit_lva).flat_map(|(qr, er)| qr.iter().zip(er).map(|(a, b)| a * b)).sum()
    }

    /// Constraint violations of an allocation `q` (units, rows by asset).
    pub fn residuals(&self, q: &[Vec<f64>]) -> Residuals {
        let inventory = self
            .assets
            .iter()
            .zip(q)
            .map(|(a, row)| (row.iter().sum::<f64>() - a.quantity).max(0.0))
            .collect();
        let funding = (0..self.set_ids.len())
            .map(|j| {
                let posted: f64 = self.assets.iter().zip(q).map(|(a, row)| row[j] * self.funding.factor(a)).sum();
                posted - self.requirements[j]
            })
            .collect();
        let hqla: f64 = self
            .assets
            .iter()
            .zip(q)
            .filter(|(a, _)| a.quantity.is_finite())
            .map(|(a, row)| (a.quantity - row.iter().sum::<f64>()) * (1.0 - a.h_lcr) * a.price)
            .sum();
        Residuals {
            inventory,
            funding,
            hqla_shortfall: (self.hqla_floor - hqla).max(0.0),
        }
    }
}

/// Excess inventory use per asset, posted-minus-required per set and HQLA shortfall.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub inventory: Vec<f64>,
    pub funding: Vec<f64>,
    pub hqla_shortfall: f64,
}

impl Residuals {
    pub fn max_violation(&self) -> f64 {
        self.inventory
            .iter()
            .chain(&self.funding)
            .map(|v| v.abs())
            .fold(self.hqla_shortfall, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub asset_ids: Vec<String>,
    pub set_ids: Vec<String>,
    /// Units of asset `i` posted to set `j`.
    pub q: Vec<Vec<f64>>,
    /// Unposted units `s_i` (infinite for unlimited cash).
    pub slack: Vec<f64>,
    pub objective: f64,
    /// Tight inventory, bound and HQLA constraints.
    pub binding: Vec<String>,
}

/// Solves the allocation LP.
pub fn solve_lp(problem: &AllocationProblem) -> Result<Allocation> {
    problem.validate()?;
    let (m, n) = (problem.assets.len(), problem.set_ids.len());
    let limited: Vec<usize> = (0..m).filter(|&i| problem.assets[i].quantity.is_finite()).collect();
    let n_vars = m * n + limited.len();
    let slack_var = |k: usize| m * n + k;

    let mut lp = LinearProgram::new(n_vars);
    for i in 0..m {
        for j in 0..n {
            lp.objective[i * n + j] = problem.unit_lva[i][j];
            lp.upper[i * n + j] = problem.bounds[i][j];
        }
    }
    for (k, &i) in limited.iter().enumerate() {
        let mut row = vec![0.0; n_vars];
        row[i * n..(i + 1) * n].fill(1.0);
        row[slack_var(k)] = 1.0;
        lp.add_row(format!("inventory of {}", problem.assets[i].id), row, RowKind::Eq, problem.assets[i].quantity);
    }
    for j in 0..n {
        let mut row = vec![0.0; n_vars];
        for (i, a) in problem.assets.iter().enumerate() {
            row[i * n + j] = problem.funding.factor(a);
        }
        lp.add_row(
            format!("requirement of netting set {}", problem.set_ids[j]),
            row,
            RowKind::Eq,
            problem.requirements[j],
        );
    }
    if problem.hqla_floor > 0.0 {
        let mut row = vec![0.0; n_vars];
        for (k, &i) in limited.iter().enumerate() {
            let a = &problem.assets[i];
            row[slack_var(k)] = (1.0 - a.h_lcr) * a.price;
        }
        lp.add_row("HQLA floor", row, RowKind::Ge, problem.hqla_floor);
    }
    let mut sol = lp.solve()?;
    let scale = 1e-12 * problem.requirements.iter().fold(1.0, |a, &b| f64::max(a, b));
    for x in sol.x.iter_mut() {
        if x.abs() < scale {
            *x = 0.0;
        }
    }

    let q: Vec<Vec<f64>> = (0..m).map(|i| sol.x[i * n..(i + 1) * n].to_vec()).collect();
    let mut slack = vec![f64::INFINITY; m];
    for (k, &i) in limited.iter().enumerate() {
        slack[i] = sol.x[slack_var(k)];
    }
    let mut binding = Vec::new();
    for &i in &limited {
        if slack[i] <= 1e-9 * (1.0 + problem.assets[i].quantity) {
            binding.push(format!("inventory:{}", problem.assets[i].id));
        }
    }
    for i in 0..m {
        for j in 0..n {
            let u = problem.bounds[i][j];
            if u < problem.assets[i].quantity && u > 0.0 && q[i][j] >= u - 1e-9 {
                binding.push(format!("bound:{}/{}", problem.assets[i].id, problem.set_ids[j]));
            }
        }
    }
    if problem.hqla_floor > 0.0 && problem.residuals(&q).hqla_shortfall <= 0.0 {
        let held: f64 = limited
            .iter()
            .map(|&i| slack[i] * (1.0 - problem.assets[i].h_lcr) * problem.assets[i].price)
            .sum();
        if held <= problem.hqla_floor * (1.0 + 1e-9) {
            binding.push("hqla".into());
        }
    }
    Ok(Allocation {
        asset_ids: problem.assets.iter().map(|a| a.id.clone()).collect(),
        set_ids: problem.set_ids.clone(),
        objective: problem.objective(&q),
        q,
        slack,
        binding,
    })
}

/// Allocation for segregated posting, where no posted asset is funded: fill
/// each set with the assets whose repo haircut exceeds the CSA haircut by
/// the most. No LP is solved; the HQLA floor must be zero.
pub fn segregated_allocation(problem: &AllocationProblem) -> Result<Allocation> {
    problem.validate()?;
    if problem.hqla_floor > 0.0 {
        return Err(Error::Precondition("the segregated fast path does not support an HQLA floor".into()));
    }
    let (m, n) = (problem.assets.len(), problem.set_ids.len());
    let mut order: Vec<usize> = (0..m).collect();
    let gap = |i: usize| problem.assets[i].h_repo - problem.assets[i].h_csa;
    order.sort_by(|&a, &b| gap(b).partial_cmp(&gap(a)).expect("finite haircuts").then(a.cmp(&b)));
    let mut left: Vec<f64> = problem.assets.iter().map(|a| a.quantity).collect();
    let mut q = vec![vec![0.0; n]; m];
    for j in 0..n {
        let mut need = problem.requirements[j];
        for &i in &order {
            if need <= 0.0 {
                break;
            }
            let per_unit = problem.funding.factor(&problem.assets[i]);
            let units = (need / per_unit).min(left[i]).min(problem.bounds[i][j]);
            if units > 0.0 {
                q[i][j] = units;
                left[i] -= units;
                need -= units * per_unit;
            }
        }
        if need > 1e-9 * (1.0 + problem.requirements[j]) {
            return Err(Error::Infeasible(format!(
                "requirement of netting set {} (short by {need:.6e})",
                problem.set_ids[j]
            )));
        }
    }
    Ok(Allocation {
        asset_ids: problem.assets.iter().map(|a| a.id.clone()).collect(),
        set_ids: problem.set_ids.clone(),
        objective: problem.objective(&q),
        q,
        slack: left,
        binding: Vec::new(),
    })
}

/// Revalues `set` under the collateral mix in column `j` of `allocation`.
/// Returns the adjusted mark-to-market `V* − XVA` and the report.
pub fn revalue(
    set: &NettingSet,
    j: usize,
    assets: &[CollateralAsset],
    allocation: &Allocation,
    requirement: f64,
    ctx: &LvaContext,
) -> Result<(f64, XvaReport)> {
    let protection: f64 = assets.iter().zip(&allocation.q).map(|(a, row)| row[j] * a.csa_value()).sum();
    let mut shortfall = 0.0;
    let mut spread = RateCurve::flat("blend", 0.0);
    if protection > 0.0 {
        for (a, row) in assets.iter().zip(&allocation.q) {
            if row[j] <= 0.0 {
                continue;
            }
            let w = row[j] * a.csa_value() / protection;
            let short = 1.0 - chi(a.h_repo, a.h_csa)?;
            shortfall += w * short;
            spread = spread.combine(1.0, &repo_spread(a, set, ctx)?, w * (1.0 - short), "blend");
        }
    }
    let eta = if requirement > 0.0 { (protection / requirement).min(1.0) } else { 1.0 };
    let x = 1.0 - shortfall;
    let spec = EffectiveRateSpec::new(
        ctx.firm.clone(),
        set.counterparty.clone(),
        ctx.risk_free.clone(),
        CollateralState::symmetric(eta, x)?,
        CollateralMode::NonCash,
    )?
    .with_blend_curve(x, &spread)?;
    let report = decompose_default(&set.profile, &spec)?;
    Ok((report.value.npv, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IterationConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub hqla_floor: f64,
    pub funding: FundingHaircut,
    pub auto_cash: bool,
}

impl Default for IterationConfig {
    fn default() -> Self {
        IterationConfig {
            tol: 0.01,
            max_iter: 10,
            hqla_floor: 0.0,
            funding: FundingHaircut::Csa,
            auto_cash: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStep {
    /// Mark-to-markets the requirements and unit LVAs were taken from.
    pub mtm: Vec<f64>,
    pub unit_lva: Vec<Vec<f64>>,
    pub allocation: Allocation,
    /// Mark-to-markets after revaluing under `allocation`.
    pub updated_mtm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<IterationStep>,
    /// False when `max_iter` ran out before the tolerance was met.
    pub converged: bool,
}

impl Trajectory {
    pub fn last(&self) -> &IterationStep {
        self.steps.last().expect("a trajectory has at least one step")
    }
}

/// Allocation ↔ revaluation fixed point, starting from the OIS
/// mark-to-markets in the set profiles. Stops once no mark-to-market moves
/// by `tol` or more.
pub fn iterate_allocation(
    sets: &[NettingSet],
    assets: &[CollateralAsset],
    ctx: &LvaContext,
    config: &IterationConfig,
) -> Result<Trajectory> {
    if !(config.tol > 0.0) || config.max_iter == 0 {
        return Err(Error::domain("iteration needs tol > 0 and max_iter >= 1"));
    }
    let lva = lva_matrix(assets, sets, ctx)?;
    let set_ids: Vec<String> = sets.iter().map(|s| s.id.clone()).collect();
    let mut mtm: Vec<f64> = sets.iter().map(|s| s.profile.mtm0).collect();
    let mut steps = Vec::new();
    for _ in 0..config.max_iter {
        let requirements: Vec<f64> = mtm.iter().map(|v| (-v).max(0.0)).collect();
        let unit = unit_lva_matrix(assets, &lva, &mtm);
        let mut problem = AllocationProblem::new(assets.to_vec(), set_ids.clone(), requirements.clone(), unit.clone(), config.hqla_floor)?
            .with_funding(config.funding);
        if config.auto_cash {
            problem = problem.with_cash();
        }
        let allocation = solve_lp(&problem)?;
        let updated = sets
            .par_iter()
            .enumerate()
            .map(|(j, s)| revalue(s, j, &problem.assets, &allocation, requirements[j], ctx).map(|r| r.0))
            .collect::<Result<Vec<f64>>>()?;
        let moved = updated.iter().zip(&mtm).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        steps.push(IterationStep {
            mtm: mtm.clone(),
            unit_lva: unit,
            allocation,
            updated_mtm: updated.clone(),
        });
        if moved < config.tol {
            return Ok(Trajectory { steps, converged: true });
        }
        mtm = updated;
    }
    Ok(Trajectory { steps, converged: false })
}

/// Matrix CSV: `<corner>,<col ids…>` then one row per row id, 6 significant digits.
pub fn write_matrix_csv<W: Write>(corner: &str, row_ids: &[String], col_ids: &[String], m: &[Vec<f64>], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![corner.to_string()];
    header.extend(col_ids.iter().cloned());
    wtr.write_record(&header)?;
    for (id, row) in row_ids.iter().zip(m) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|&v| sig6(v)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Allocation table: assets by netting sets, with an optional final
/// `Updated MTM` row.
pub fn write_allocation_csv<W: Write>(allocation: &Allocation, updated_mtm: Option<&[f64]>, writer: W) -> Result<()> {
    let mut ids = allocation.asset_ids.clone();
    let mut rows = allocation.q.clone();
    if let Some(mtm) = updated_mtm {
        ids.push("Updated MTM".into());
        rows.push(mtm.to_vec());
    }
    write_matrix_csv("asset", &ids, &allocation.set_ids, &rows, writer)
}

/// Parsed matrix CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixTable {
    pub corner: String,
    pub col_ids: Vec<String>,
    pub row_ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

pub fn read_matrix_csv<R: Read>(reader: R) -> Result<MatrixTable> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    let corner = header.get(0).unwrap_or_default().to_string();
    let col_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let (mut row_ids, mut values) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        row_ids.push(rec.get(0).unwrap_or_default().to_string());
        let row = rec
            .iter()
            .skip(1)
            .map(|f| f.trim().parse::<f64>().map_err(|e| Error::validation(format!("bad number {f:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != col_ids.len() {
            return Err(Error::validation("matrix row length differs from header"));
        }
        values.push(row);
    }
    Ok(MatrixTable { corner, col_ids, row_ids, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn asset(id: &str, q: f64, h_csa: f64) -> CollateralAsset {
        CollateralAsset::new(id, 1.0, q, h_csa, h_csa, 0.0).unwrap()
    }

    #[test]
    fn single_asset_single_set() {
        let p = AllocationProblem::new(vec![asset("X", 100.0, 0.2)], vec!["S".into()], vec![40.0], vec![vec![0.05]], 0.0).unwrap();
        let a = solve_lp(&p).unwrap();
        assert!((a.q[0][0] - 50.0).abs() < 1e-12);
        assert!((a.objective - 2.5).abs() < 1e-12);
        assert!((a.slack[0] - 50.0).abs() < 1e-12);
    }

    #[test]
    fn prefers_higher_benefit_and_respects_inventory() {
        let assets = vec![asset("lo", 100.0, 0.0), asset("hi", 30.0, 0.0)];
        let p = AllocationProblem::new(assets, vec!["S".into()], vec![50.0], vec![vec![0.01], vec![0.02]], 0.0).unwrap();
        let a = solve_lp(&p).unwrap();
        assert!((a.q[1][0] - 30.0).abs() < 1e-12 && (a.q[0][0] - 20.0).abs() < 1e-12);
        assert!(a.binding.contains(&"inventory:hi".to_string()));
    }

    #[test]
    fn hqla_floor_limits_posting() {
        let mut keep = asset("hqla", 100.0, 0.0);
        keep.h_lcr = 0.0;
        let mut other = asset("other", 100.0, 0.0);
        other.h_lcr = 1.0;
        let p = AllocationProblem::new(vec![keep, other], vec!["S".into()], vec![50.0], vec![vec![0.05], vec![0.01]], 80.0).unwrap();
        let a = solve_lp(&p).unwrap();
        assert!((a.q[0][0] - 20.0).abs() < 1e-9);
        assert!(a.binding.contains(&"hqla".to_string()));
        let free = solve_lp(&AllocationProblem { hqla_floor: 0.0, ..p }).unwrap();
        assert!(free.objective >= a.objective);
    }

    #[test]
    fn infeasible_requirement_is_named_and_cash_rescues_it() {
        let p = AllocationProblem::new(vec![asset("X", 10.0, 0.0)], vec!["big".into()], vec![50.0], vec![vec![0.05]], 0.0).unwrap();
        match solve_lp(&p) {
            Err(Error::Infeasible(msg)) => assert!(msg.contains("big")),
            other => panic!("{other:?}"),
        }
        let a = solve_lp(&p.with_cash()).unwrap();
        assert!((a.q[1][0] - 40.0).abs() < 1e-9);
        assert!((a.objective - 0.5).abs() < 1e-12);
    }

    #[test]
    fn eligibility_zeroes_pairs() {
        let mut x = asset("X", 100.0, 0.0);
        x.eligible_for = Some(["A".to_string()].into_iter().collect());
        let y = asset("Y", 100.0, 0.0);
        let p = AllocationProblem::new(vec![x, y], vec!["A".into(), "B".into()], vec![10.0, 10.0], vec![vec![0.1, 0.1], vec![0.01, 0.01]], 0.0)
            .unwrap();
        let a = solve_lp(&p).unwrap();
        assert_eq!(a.q[0][1], 0.0);
        assert!((a.q[0][0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn repo_funding_switch() {
        let x = CollateralAsset::new("X", 1.0, 100.0, 0.1, 0.2, 0.0).unwrap();
        let p = AllocationProblem::new(vec![x], vec!["S".into()], vec![40.0], vec![vec![0.05]], 0.0).unwrap();
        assert!((solve_lp(&p).unwrap().q[0][0] - 40.0 / 0.9).abs() < 1e-9);
        let r = solve_lp(&p.with_funding(FundingHaircut::Repo)).unwrap();
        assert!((r.q[0][0] - 50.0).abs() < 1e-9);
    }

    #[test]
    fn segregated_fast_path_sorts_by_haircut_gap() {
        let a = CollateralAsset::new("small_gap", 1.0, 100.0, 0.05, 0.06, 0.0).unwrap();
        let b = CollateralAsset::new("big_gap", 1.0, 20.0, 0.05, 0.15, 0.0).unwrap();
        let p = AllocationProblem::new(vec![a, b], vec!["S".into()], vec![38.0], vec![vec![0.0], vec![0.0]], 0.0).unwrap();
        let alloc = segregated_allocation(&p).unwrap();
        assert!((alloc.q[1][0] - 20.0).abs() < 1e-12);
        assert!((alloc.q[0][0] - 20.0).abs() < 1e-9);
        assert!(p.residuals(&alloc.q).max_violation() < 1e-9);
    }

    #[test]
    fn unit_lva_normalization() {
        let a = asset("X", 1.0, 0.2);
        let m = unit_lva_matrix(&[a], &[vec![-4.0, -4.0, 3.0]], &[-100.0, 0.0, -10.0]);
        assert!((m[0][0] - 0.8 * 0.04).abs() < 1e-15);
        assert_eq!(m[0][1], 0.0);
        assert!((m[0][2] + 0.8 * 0.3).abs() < 1e-15);
    }

    #[test]
    fn allocation_csv_round_trip() {
        let p = AllocationProblem::new(vec![asset("X", 100.0, 0.2)], vec!["S".into()], vec![40.0], vec![vec![0.05]], 0.0).unwrap();
        let a = solve_lp(&p).unwrap();
        let mut buf = Vec::new();
        write_allocation_csv(&a, Some(&[-39.5]), &mut buf).unwrap();
        let t = read_matrix_csv(buf.as_slice()).unwrap();
        assert_eq!(t.row_ids, ["X", "Updated MTM"]);
        assert_eq!(t.values, vec![vec![50.0], vec![-39.5]]);
    }
}
