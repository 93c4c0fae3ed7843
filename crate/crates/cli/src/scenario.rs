//! Scenario files: one JSON document describing market data, parties,
//! collateral terms and the instrument or netting sets to run.
//!
//! Relative file paths inside a scenario resolve against the scenario's own
//! directory. Every random draw derives from the top-level `seed`.

use std::path::{Path, PathBuf};

use colxva::csa::{read_assets_csv, CollateralAsset, CollateralState};
use colxva::curves::{PartyCurves, RateCurve};
use colxva::discounting::{CollateralMode, EffectiveRateSpec};
use colxva::exposure::{
    atm_rate, exposure_profile, generate_portfolio, monthly_grid, read_portfolio_csv, ExposureModel, ExposureProfile,
    PortfolioSpec,
};
use colxva::optimizer::{IterationConfig, LvaContext, NettingSet};
use colxva::pde::{GridSpec, OptionSpec, Payoff};
use colxva::repo::{RepoModelParams, DEFAULT_TENORS};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::CliError;

/// A curve given inline as a flat rate or `[tenor, zero]` pairs, or as a
/// `tenor_years,zero_rate` CSV file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CurveInput {
    Flat(f64),
    Nodes(Vec<(f64, f64)>),
    File { file: PathBuf },
}

/// Flat spreads over the risk-free curve. Liquidity is `bond − hazard`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartyInput {
    pub bond_spread: f64,
    pub hazard: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollateralInput {
    pub mode: CollateralMode,
    pub eta: f64,
    pub chi: f64,
    /// Cash collateral rate over risk-free.
    pub cash_spread: f64,
    /// Repo rate over risk-free for non-cash collateral.
    pub repo_spread: f64,
}

impl Default for CollateralInput {
    fn default() -> Self {
        CollateralInput {
            mode: CollateralMode::Uncollateralized,
            eta: 0.0,
            chi: 1.0,
            cash_spread: 0.0,
            repo_spread: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionInput {
    pub payoff: Payoff,
    #[serde(default)]
    pub strike: f64,
    pub maturity: f64,
    pub spot: f64,
    pub vol: f64,
    #[serde(default)]
    pub div_yield: f64,
    #[serde(default = "one")]
    pub quantity: f64,
    /// Stock financing rate over risk-free.
    #[serde(default)]
    pub financing_spread: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortfolioInput {
    pub label: String,
    #[serde(default = "thousand")]
    pub swaps: usize,
    #[serde(default)]
    pub payer_frac: f64,
    #[serde(default = "full_range")]
    pub maturity_range: (f64, f64),
    #[serde(default = "one_percent")]
    pub rate_band: f64,
    #[serde(default = "one")]
    pub notional: f64,
    /// Swap CSV used instead of drawing a random portfolio.
    pub file: Option<PathBuf>,
    /// Rescale the profile so that its risk-free mark-to-market equals this.
    pub target_mtm: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepoInput {
    pub roe: f64,
    pub mu0: CurveInput,
    #[serde(default = "ten")]
    pub mpr_days: u32,
    #[serde(default)]
    pub expected_gap_loss: f64,
    #[serde(default)]
    pub hazard: f64,
    #[serde(default)]
    pub forward_hazard: bool,
    /// Asset and borrower rating for the `repo-curve` command.
    pub asset: Option<String>,
    pub rating: Option<String>,
    pub tenors: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetInput {
    pub id: String,
    pub rating: String,
    pub counterparty: PartyInput,
    pub portfolio: PortfolioInput,
}

/// A single LP from a given unit-LVA table and requirements.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedProblemInput {
    /// Matrix CSV: rows are asset ids, columns netting-set ids.
    pub unit_lva_file: PathBuf,
    pub requirements: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerInput {
    pub firm: Option<PartyInput>,
    #[serde(default)]
    pub netting_sets: Vec<SetInput>,
    /// Overrides every asset's available quantity.
    pub quantity: Option<f64>,
    #[serde(default)]
    pub iteration: IterationConfig,
    pub fixed: Option<FixedProblemInput>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub risk_free: CurveInput,
    pub party_b: Option<PartyInput>,
    pub party_c: Option<PartyInput>,
    #[serde(default)]
    pub collateral: CollateralInput,
    pub option: Option<OptionInput>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub portfolios: Vec<PortfolioInput>,
    pub exposure: Option<ExposureModel>,
    /// Sweep points used when `--points` is absent.
    pub sweep_points: Option<usize>,
    /// Collateralization columns of the decomposition table.
    #[serde(default = "table_levels")]
    pub table_levels: Vec<f64>,
    pub repo: Option<RepoInput>,
    pub assets_file: Option<PathBuf>,
    pub optimizer: Option<OptimizerInput>,
    #[serde(skip)]
    base_dir: PathBuf,
}

fn one() -> f64 {
    1.0
}
fn ten() -> u32 {
    10
}
fn thousand() -> usize {
    1000
}
fn one_percent() -> f64 {
    0.01
}
fn full_range() -> (f64, f64) {
    (0.25, 30.0)
}
fn table_levels() -> Vec<f64> {
    vec![0.0, 0.5, 1.0]
}

/// Independent seed number `stream` of the scenario seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read scenario {}: {e}", path.display())))?;
        let mut s: Scenario = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("invalid scenario {}: {e}", path.display())))?;
        s.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let c = &self.collateral;
        for (name, v) in [("collateral.eta", c.eta), ("collateral.chi", c.chi)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(CliError::Input(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        if let Some(v) = self.table_levels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(CliError::Input(format!("table level {v} outside [0,1]")));
        }
        for file in self.referenced_files() {
            if !file.is_file() {
                return Err(CliError::Input(format!("referenced file {} does not exist", file.display())));
            }
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn referenced_files(&self) -> Vec<PathBuf> {
        let mut files = Vec::new();
        let mut curve = |c: &CurveInput| {
            if let CurveInput::File { file } = c {
                files.push(self.resolve(file));
            }
        };
        curve(&self.risk_free);
        if let Some(r) = &self.repo {
            curve(&r.mu0);
        }
        let portfolios = self
            .portfolios
            .iter()
            .chain(self.optimizer.iter().flat_map(|o| o.netting_sets.iter().map(|s| &s.portfolio)));
        files.extend(portfolios.filter_map(|p| p.file.as_ref()).map(|f| self.resolve(f)));
        files.extend(self.assets_file.iter().map(|f| self.resolve(f)));
        if let Some(f) = self.optimizer.as_ref().and_then(|o| o.fixed.as_ref()) {
            files.push(self.resolve(&f.unit_lva_file));
        }
        files
    }

    pub fn curve(&self, label: &str, input: &CurveInput) -> Result<RateCurve, CliError> {
        Ok(match input {
            CurveInput::Flat(r) => RateCurve::flat(label, *r),
            CurveInput::Nodes(n) => RateCurve::new(label, n)?,
            CurveInput::File { file } => RateCurve::from_csv_path(label, &self.resolve(file))?,
        })
    }

    pub fn risk_free_curve(&self) -> Result<RateCurve, CliError> {
        self.curve("OIS", &self.risk_free)
    }

    fn party(&self, rf: &RateCurve, p: Option<&PartyInput>) -> Result<PartyCurves, CliError> {
        Ok(match p {
            Some(p) => PartyCurves::from_spreads(rf, p.bond_spread, p.hazard)?,
            None => PartyCurves::riskless(rf),
        })
    }

    /// Effective-rate inputs at collateralization `eta` (both sides).
    pub fn rate_spec(&self, eta: f64) -> Result<EffectiveRateSpec, CliError> {
        let rf = self.risk_free_curve()?;
        let c = &self.collateral;
        let spec = EffectiveRateSpec::new(
            self.party(&rf, self.party_b.as_ref())?,
            self.party(&rf, self.party_c.as_ref())?,
            rf.clone(),
            CollateralState::symmetric(eta, c.chi)?,
            c.mode,
        )?
        .with_cash_rate(rf.shifted(c.cash_spread).with_label("cash"))
        .with_repo_rate(rf.shifted(c.repo_spread).with_label("repo"));
        Ok(spec)
    }

    pub fn option_spec(&self) -> Result<OptionSpec, CliError> {
        let o = self.option.as_ref().ok_or_else(|| CliError::Input("scenario has no option".into()))?;
        let rf = self.risk_free_curve()?;
        let mut spec = OptionSpec::new(
            o.payoff.clone(),
            o.strike,
            o.maturity,
            o.spot,
            o.vol,
            rf.shifted(o.financing_spread).with_label("stock_financing"),
        )?
        .with_quantity(o.quantity);
        spec.div_yield = o.div_yield;
        spec.validate()?;
        Ok(spec)
    }

    /// Risk-free exposure profile of portfolio input `p`, drawn on seed
    /// stream `stream`.
    pub fn profile(&self, p: &PortfolioInput, stream: u64) -> Result<ExposureProfile, CliError> {
        let rf = self.risk_free_curve()?;
        let swaps = match &p.file {
            Some(f) => {
                let path = self.resolve(f);
                let file = std::fs::File::open(&path)
                    .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
                read_portfolio_csv(file)?
            }
            None => {
                let spec = PortfolioSpec {
                    n: p.swaps,
                    payer_frac: p.payer_frac,
                    maturity_range: p.maturity_range,
                    rate_band: p.rate_band,
                    seed: derive_seed(self.seed, stream),
                    notional: p.notional,
                };
                generate_portfolio(&spec, atm_rate(&rf)?)?
            }
        };
        let model = match self.exposure.unwrap_or(ExposureModel::Deterministic) {
            ExposureModel::OneFactorMc { mean_reversion, vol, paths, .. } => ExposureModel::OneFactorMc {
                mean_reversion,
                vol,
                paths,
                seed: derive_seed(self.seed, stream | 1 << 32),
            },
            m => m,
        };
        let profile = exposure_profile(&swaps, &rf, model, &monthly_grid(&swaps))?;
        match p.target_mtm {
            None => Ok(profile),
            Some(target) => {
                let k = target / profile.mtm0;
                if !(k > 0.0 && k.is_finite()) {
                    return Err(CliError::Input(format!(
                        "portfolio {} has mark-to-market {} and cannot be rescaled to {target}",
                        p.label, profile.mtm0
                    )));
                }
                Ok(profile.scaled(k))
            }
        }
    }

    pub fn repo_params(&self) -> Result<RepoModelParams, CliError> {
        let r = self.repo.as_ref().ok_or_else(|| CliError::Input("scenario has no repo section".into()))?;
        let mut params = RepoModelParams::new(r.roe, self.curve("mu0", &r.mu0)?)?;
        params.mpr_days = r.mpr_days;
        params.expected_gap_loss = r.expected_gap_loss;
        params.hazard = RateCurve::flat("repo_hazard", r.hazard);
        params.forward_hazard = r.forward_hazard;
        params.validate()?;
        Ok(params)
    }

    pub fn repo_tenors(&self) -> Vec<f64> {
        self.repo
            .as_ref()
            .and_then(|r| r.tenors.clone())
            .unwrap_or_else(|| DEFAULT_TENORS.to_vec())
    }

    /// Assets from `assets_file`, with the optimizer's quantity override.
    pub fn assets(&self) -> Result<Vec<CollateralAsset>, CliError> {
        let f = self
            .assets_file
            .as_ref()
            .ok_or_else(|| CliError::Input("scenario has no assets_file".into()))?;
        let path = self.resolve(f);
        let file =
            std::fs::File::open(&path).map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
        let mut assets = read_assets_csv(file)?;
        if let Some(q) = self.optimizer.as_ref().and_then(|o| o.quantity) {
            for a in &mut assets {
                a.quantity = q;
            }
        }
        Ok(assets)
    }

    pub fn unit_lva_path(&self, f: &Path) -> PathBuf {
        self.resolve(f)
    }

    /// Netting sets (profiles drawn on streams 100, 101, ...) and the
    /// context for unit LVAs.
    pub fn netting_sets(&self) -> Result<(Vec<NettingSet>, LvaContext), CliError> {
        let o = self.optimizer.as_ref().ok_or_else(|| CliError::Input("scenario has no optimizer".into()))?;
        if o.netting_sets.is_empty() {
            return Err(CliError::Input("optimizer lists no netting sets".into()));
        }
        let rf = self.risk_free_curve()?;
        let sets = o
            .netting_sets
            .iter()
            .enumerate()
            .map(|(k, s)| {
                Ok(NettingSet {
                    id: s.id.clone(),
                    rating: s.rating.clone(),
                    counterparty: self.party(&rf, Some(&s.counterparty))?,
                    profile: self.profile(&s.portfolio, 100 + k as u64)?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let ctx = LvaContext {
            firm: self.party(&rf, o.firm.as_ref())?,
            risk_free: rf,
            repo: self.repo_params()?,
            repo_tenors: self.repo_tenors(),
        };
        Ok((sets, ctx))
    }
}
