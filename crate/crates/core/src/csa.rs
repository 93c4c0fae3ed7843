//! Collateral assets, CSA terms and the collateralization descriptors that
//! parameterize the effective discount rate.
//!
//! Three numbers describe how a netting set is collateralized from one side:
//!
//! * `eta` — fraction of the exposure covered by CSA-haircut collateral value;
//! * `chi` — fraction of that protected amount which is also *funded*, i.e.
//!   convertible to cash in the repo market (0 for segregated collateral);
//! * the blended funded repo spread of a multi-asset posting.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use crate::curves::RateCurve;
use crate::{Error, Result};

/// Rating columns carried by the assets CSV, best first.
pub const RATINGS: [&str; 4] = ["AA", "A", "BBB", "BB"];

#[derive(Debug, Clone, PartialEq)]
pub struct CollateralAsset {
    pub id: String,
    /// Market price per unit.
    pub price: f64,
    /// Units available for allocation.
    pub quantity: f64,
    pub h_csa: f64,
    pub h_repo: f64,
    pub h_lcr: f64,
    /// Repo economic capital (decimal of notional) keyed by the repo
    /// borrower's rating.
    pub econ_capital: BTreeMap<String, f64>,
    /// Netting sets this asset may be posted to; `None` means all.
    pub eligible_for: Option<BTreeSet<String>>,
}

impl CollateralAsset {
    pub fn new(
        id: impl Into<String>,
        price: f64,
        quantity: f64,
        h_csa: f64,
        h_repo: f64,
        h_lcr: f64,
    ) -> Result<Self> {
        let asset = CollateralAsset {
            id: id.into(),
            price,
            quantity,
            h_csa,
            h_repo,
            h_lcr,
            econ_capital: BTreeMap::new(),
            eligible_for: None,
        };
        asset.validate()?;
        Ok(asset)
    }

    /// Zero-haircut cash with unit price.
    pub fn cash(quantity: f64) -> Self {
        CollateralAsset {
            id: "CASH".into(),
            price: 1.0,
            quantity,
            h_csa: 0.0,
            h_repo: 0.0,
            h_lcr: 0.0,
            econ_capital: RATINGS.iter().map(|r| (r.to_string(), 0.0)).collect(),
            eligible_for: None,
        }
    }

    pub fn with_econ_capital<'a>(mut self, pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        self.econ_capital
            .extend(pairs.into_iter().map(|(k, v)| (k.to_string(), v)));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.price > 0.0) {
            return Err(Error::domain(format!("{}: price must be > 0", self.id)));
        }
        if !(self.quantity >= 0.0) {
            return Err(Error::domain(format!("{}: quantity must be >= 0", self.id)));
        }
        for (name, h) in [("h_csa", self.h_csa), ("h_repo", self.h_repo)] {
            if !(0.0..1.0).contains(&h) {
                return Err(Error::domain(format!("{}: {name} must lie in [0,1), got {h}", self.id)));
            }
        }
        if !(0.0..=1.0).contains(&self.h_lcr) {
            return Err(Error::domain(format!("{}: h_lcr must lie in [0,1]", self.id)));
        }
        if let Some((k, v)) = self.econ_capital.iter().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::domain(format!("{}: economic capital for {k} is {v}", self.id)));
        }
        Ok(())
    }

    pub fn econ_capital_for(&self, rating: &str) -> Result<f64> {
        self.econ_capital
            .get(rating)
            .copied()
            .ok_or_else(|| Error::Lookup(format!("asset {} has no economic capital for rating {rating}", self.id)))
    }

    pub fn is_eligible_for(&self, netting_set: &str) -> bool {
        self.eligible_for
            .as_ref()
            .is_none_or(|set| set.contains(netting_set))
    }

    /// Protection value of one unit under the CSA haircut.
    pub fn csa_value(&self) -> f64 {
        self.price * (1.0 - self.h_csa)
    }

    /// Cash raised by repo-ing one unit.
    pub fn repo_value(&self) -> f64 {
        self.price * (1.0 - self.h_repo)
    }

    /// `chi` of this asset posted on its own.
    pub fn chi(&self) -> f64 {
        chi(self.h_repo, self.h_csa).expect("validated haircuts")
    }
}

/// Reads the assets CSV (`id,price,quantity,h_csa,h_repo,h_lcr,ec_AA,ec_A,ec_BBB,ec_BB`).
pub fn read_assets_csv<R: Read>(reader: R) -> Result<Vec<CollateralAsset>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["id", "price", "quantity", "h_csa", "h_repo", "h_lcr", "ec_AA", "ec_A", "ec_BBB", "ec_BB"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::validation(format!(
            "assets CSV header must be `{}`",
            expected.join(",")
        )));
    }
    let mut assets = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let num = |i: usize| -> Result<f64> {
            record[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::validation(format!("assets CSV column {}: {e}", expected[i])))
        };
        let asset = CollateralAsset::new(record[0].trim(), num(1)?, num(2)?, num(3)?, num(4)?, num(5)?)?
            .with_econ_capital(
                RATINGS
                    .iter()
                    .enumerate()
                    .map(|(k, r)| Ok((*r, num(6 + k)?)))
                    .collect::<Result<Vec<_>>>()?,
            );
        asset.validate()?;
        assets.push(asset);
    }
    Ok(assets)
}

pub fn write_assets_csv<W: Write>(assets: &[CollateralAsset], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["id", "price", "quantity", "h_csa", "h_repo", "h_lcr", "ec_AA", "ec_A", "ec_BBB", "ec_BB"])?;
    for a in assets {
        let mut row = vec![
            a.id.clone(),
            a.price.to_string(),
            a.quantity.to_string(),
            a.h_csa.to_string(),
            a.h_repo.to_string(),
            a.h_lcr.to_string(),
        ];
        for r in RATINGS {
            row.push(a.econ_capital.get(r).copied().unwrap_or(0.0).to_string());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Per-(asset, netting set) upper bounds on allocated units: the asset's
/// quantity where eligible, zero otherwise.
pub fn eligibility_bounds(assets: &[CollateralAsset], netting_sets: &[&str]) -> Vec<Vec<f64>> {
    assets
        .iter()
        .map(|a| {
            netting_sets
                .iter()
                .map(|ns| if a.is_eligible_for(ns) { a.quantity } else { 0.0 })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CsaTerms {
    /// B's postings are segregated (`chi_b = 0`) when set.
    pub segregated_b: bool,
    /// C's postings are segregated (`chi_c = 0`) when set.
    pub segregated_c: bool,
    /// Rate earned by cash collateral.
    pub cash_rate: RateCurve,
    /// Drives `eta` in collateralization sweeps.
    pub collateralization_target: f64,
    /// Uncollateralized allowance; 0 for a full CSA.
    pub threshold: f64,
}

impl CsaTerms {
    pub fn new(cash_rate: RateCurve, collateralization_target: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&collateralization_target) {
            return Err(Error::domain(format!(
                "collateralization target must lie in [0,1], got {collateralization_target}"
            )));
        }
        Ok(CsaTerms {
            segregated_b: false,
            segregated_c: false,
            cash_rate,
            collateralization_target,
            threshold: 0.0,
        })
    }

    pub fn chi_b(&self) -> f64 {
        if self.segregated_b { 0.0 } else { 1.0 }
    }

    pub fn chi_c(&self) -> f64 {
        if self.segregated_c { 0.0 } else { 1.0 }
    }
}

/// Collateralization descriptor consumed by the effective rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollateralState {
    pub eta_b: f64,
    pub eta_c: f64,
    pub chi_b: f64,
    pub chi_c: f64,
    /// Funded repo spread of the posted portfolio, `Σ w_i S_pi`.
    pub repo_spread_blend: f64,
}

impl CollateralState {
    pub fn new(eta_b: f64, eta_c: f64, chi_b: f64, chi_c: f64) -> Result<Self> {
        let state = CollateralState {
            eta_b,
            eta_c,
            chi_b,
            chi_c,
            repo_spread_blend: 0.0,
        };
        state.validate()?;
        Ok(state)
    }

    /// Same `eta` and `chi` on both sides.
    pub fn symmetric(eta: f64, chi: f64) -> Result<Self> {
        Self::new(eta, eta, chi, chi)
    }

    pub fn uncollateralized() -> Self {
        CollateralState {
            eta_b: 0.0,
            eta_c: 0.0,
            chi_b: 1.0,
            chi_c: 1.0,
            repo_spread_blend: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta_b", self.eta_b),
            ("eta_c", self.eta_c),
            ("chi_b", self.chi_b),
            ("chi_c", self.chi_c),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        if !self.repo_spread_blend.is_finite() {
            return Err(Error::domain("repo spread blend must be finite"));
        }
        Ok(())
    }
}

/// Collateralization fraction `min(1, n·B·(1−h_csa) / exposure)`.
///
/// A zero exposure is fully covered by convention.
pub fn eta(exposure: f64, units: f64, price: f64, h_csa: f64) -> Result<f64> {
    if !(exposure >= 0.0) || !(units >= 0.0) || !(price >= 0.0) {
        return Err(Error::domain(format!(
            "eta needs nonnegative inputs, got exposure={exposure}, units={units}, price={price}"
        )));
    }
    if !(0.0..1.0).contains(&h_csa) {
        return Err(Error::domain(format!("h_csa must lie in [0,1), got {h_csa}")));
    }
    if exposure == 0.0 {
        return Ok(1.0);
    }
    Ok((units * price * (1.0 - h_csa) / exposure).min(1.0))
}

/// Funded fraction `1 − ((h_repo − h_csa)/(1 − h_csa))⁺`.
pub fn chi(h_repo: f64, h_csa: f64) -> Result<f64> {
    if h_csa == 1.0 {
        return Err(Error::domain("h_csa = 1 leaves no protection value"));
    }
    if !(0.0..1.0).contains(&h_repo) || !(0.0..1.0).contains(&h_csa) {
        return Err(Error::domain(format!(
            "haircuts must lie in [0,1), got h_repo={h_repo}, h_csa={h_csa}"
        )));
    }
    Ok(1.0 - haircut_shortfall(h_repo, h_csa))
}

fn haircut_shortfall(h_repo: f64, h_csa: f64) -> f64 {
    ((h_repo - h_csa) / (1.0 - h_csa)).max(0.0)
}

/// One asset inside a netting-set posting.
#[derive(Debug, Clone, Copy)]
pub struct PostedAsset {
    /// Market value `A_i` of the posted units.
    pub market_value: f64,
    pub h_csa: f64,
    pub h_repo: f64,
    /// `r_p,i − r`.
    pub repo_spread: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blend {
    /// `χ̄ = Σ w_i (h_pi − h_ci)⁺/(1 − h_ci)`.
    pub chi_bar: f64,
    /// Funded repo spread `Σ w_i S_pi`.
    pub spread: f64,
    /// `Σ w_i`: fraction of the protection `L` the posting covers.
    pub coverage: f64,
}

impl Blend {
    pub fn chi(&self) -> f64 {
        1.0 - self.chi_bar
    }
}

/// Effective haircut mismatch and funded repo spread of a multi-asset posting
/// covering protection `L`.
///
/// Weights are `w_i = (1 − h_ci)·A_i / L`. A repo haircut below the CSA
/// haircut contributes no extra funding: the positive part caps the funded
/// amount at the protected exposure.
pub fn portfolio_blend(assets: &[PostedAsset], protection: f64) -> Result<Blend> {
    if !(protection > 0.0) {
        return Err(Error::domain(format!("protection must be > 0, got {protection}")));
    }
    let mut blend = Blend {
        chi_bar: 0.0,
        spread: 0.0,
        coverage: 0.0,
    };
    for a in assets {
        if !(a.market_value >= 0.0) {
            return Err(Error::domain("posted market values must be >= 0"));
        }
        let shortfall = chi(a.h_repo, a.h_csa).map(|c| 1.0 - c)?;
        let w = (1.0 - a.h_csa) * a.market_value / protection;
        blend.coverage += w;
        blend.chi_bar += w * shortfall;
        blend.spread += w * (1.0 - shortfall) * a.repo_spread;
    }
    if blend.coverage > 1.0 + 1e-9 {
        return Err(Error::validation(format!(
            "posting covers {:.12} of the protection; weights must sum to at most 1",
            blend.coverage
        )));
    }
    Ok(blend)
}
