//! Break-even term repo rates.
//!
//! Quoted repo rarely extends past a few months, while netting sets live for
//! decades. The break-even spread over the risk-free rate is
//!
//! ```text
//! r_p − r = RoE·E_c + μ_0 + λ·El
//! ```
//!
//! with `E_c` the repo economic capital for the asset class and borrower
//! rating, `μ_0` the pure funding-liquidity spread, `λ` the borrower's hazard
//! rate and `El` the expected gap loss over the margin period of risk.

use std::collections::BTreeMap;

use crate::csa::CollateralAsset;
use crate::curves::RateCurve;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct RepoModelParams {
    /// Return on equity charged on economic capital, per annum.
    pub roe: f64,
    /// Global pure funding-liquidity spread curve.
    pub mu0_curve: RateCurve,
    /// Asset-class specific overrides of `mu0_curve`, keyed by asset id.
    pub mu0_by_asset: BTreeMap<String, RateCurve>,
    pub mpr_days: u32,
    /// Expected gap loss as a fraction of notional.
    pub expected_gap_loss: f64,
    /// Repo borrower's default intensity.
    pub hazard: RateCurve,
    /// Use the instantaneous forward hazard instead of the term average.
    pub forward_hazard: bool,
}

impl RepoModelParams {
    pub fn new(roe: f64, mu0_curve: RateCurve) -> Result<Self> {
        let params = RepoModelParams {
            roe,
            mu0_curve,
            mu0_by_asset: BTreeMap::new(),
            mpr_days: 10,
            expected_gap_loss: 0.0,
            hazard: RateCurve::flat("hazard", 0.0),
            forward_hazard: false,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.roe >= 0.0) {
            return Err(Error::domain(format!("roe must be >= 0, got {}", self.roe)));
        }
        if self.mpr_days == 0 {
            return Err(Error::domain("margin period of risk must be positive"));
        }
        if !(self.expected_gap_loss >= 0.0) {
            return Err(Error::domain("expected gap loss must be >= 0"));
        }
        Ok(())
    }

    fn mu0_for(&self, asset_id: Option<&str>) -> &RateCurve {
        asset_id
            .and_then(|id| self.mu0_by_asset.get(id))
            .unwrap_or(&self.mu0_curve)
    }

    fn hazard_at(&self, t: f64) -> Result<f64> {
        if self.forward_hazard {
            Ok(self.hazard.forward(t))
        } else {
            self.hazard.zero_rate(t)
        }
    }

    fn spread(&self, mu0: &RateCurve, ec: f64, t: f64) -> Result<f64> {
        if !(ec >= 0.0) {
            return Err(Error::domain(format!("economic capital must be >= 0, got {ec}")));
        }
        if !(t > 0.0) {
            return Err(Error::domain(format!("repo tenor must be > 0, got {t}")));
        }
        Ok(self.roe * ec + mu0.zero_rate(t)? + self.hazard_at(t)? * self.expected_gap_loss)
    }
}

/// `RoE·E_c + μ_0(t) + λ(t)·El` with the global `μ_0` curve.
pub fn breakeven_spread(params: &RepoModelParams, ec: f64, t: f64) -> Result<f64> {
    params.spread(&params.mu0_curve, ec, t)
}

/// Term repo rate curve `r_p(t) = r(t) + spread(t)` for `asset` lent to a
/// borrower of `rating`, sampled at `tenors`.
pub fn repo_curve(
    params: &RepoModelParams,
    risk_free: &RateCurve,
    asset: &CollateralAsset,
    rating: &str,
    tenors: &[f64],
) -> Result<RateCurve> {
    let ec = asset.econ_capital_for(rating)?;
    let mu0 = params.mu0_for(Some(&asset.id));
    let nodes = tenors
        .iter()
        .map(|&t| Ok((t, risk_free.zero_rate(t)? + params.spread(mu0, ec, t)?)))
        .collect::<Result<Vec<_>>>()?;
    RateCurve::new(format!("repo({},{rating})", asset.id), &nodes)
}

/// Spread curve `r_p − r` alone, sampled at `tenors`.
pub fn spread_curve(
    params: &RepoModelParams,
    asset: &CollateralAsset,
    rating: &str,
    tenors: &[f64],
) -> Result<RateCurve> {
    let ec = asset.econ_capital_for(rating)?;
    let mu0 = params.mu0_for(Some(&asset.id));
    let nodes = tenors
        .iter()
        .map(|&t| Ok((t, params.spread(mu0, ec, t)?)))
        .collect::<Result<Vec<_>>>()?;
    RateCurve::new(format!("repo_spread({},{rating})", asset.id), &nodes)
}

/// Default tenor grid for repo curves: 3m to 30y.
pub const DEFAULT_TENORS: [f64; 10] = [0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 20.0, 30.0];

#[cfg(test)]
mod tests {
    use super::*;

    fn ust10() -> CollateralAsset {
        CollateralAsset::new("UST_10y", 1.0, 75.0, 0.02, 0.03, 0.0)
            .unwrap()
            .with_econ_capital([("AA", 0.0008), ("A", 0.0017), ("BBB", 0.004), ("BB", 0.008)])
    }

    #[test]
    fn ust10_bbb_short_end() {
        let p = RepoModelParams::new(0.10, RateCurve::flat("mu0", 0.001)).unwrap();
        let s = breakeven_spread(&p, 0.004, 0.25).unwrap();
        assert!((s - 0.0014).abs() < 1e-15);
    }

    #[test]
    fn zero_inputs_zero_spread() {
        let p = RepoModelParams::new(0.10, RateCurve::flat("mu0", 0.0)).unwrap();
        assert_eq!(breakeven_spread(&p, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        let p = RepoModelParams::new(0.10, RateCurve::flat("mu0", 0.001)).unwrap();
        assert!(matches!(breakeven_spread(&p, -0.01, 1.0), Err(Error::Domain(_))));
        assert!(breakeven_spread(&p, 0.01, 0.0).is_err());
        assert!(matches!(
            repo_curve(&p, &RateCurve::flat("ois", 0.01), &ust10(), "CCC", &[1.0]),
            Err(Error::Lookup(_))
        ));
        assert!(RepoModelParams::new(-0.1, RateCurve::flat("mu0", 0.0)).is_err());
    }

    #[test]
    fn flat_inputs_flat_curve() {
        let mut p = RepoModelParams::new(0.10, RateCurve::flat("mu0", 0.001)).unwrap();
        p.hazard = RateCurve::flat("h", 0.02);
        p.expected_gap_loss = 0.001;
        let c = spread_curve(&p, &ust10(), "A", &DEFAULT_TENORS).unwrap();
        assert!(c.is_flat());
        assert!((c.zero_rate(50.0).unwrap() - (0.10 * 0.0017 + 0.001 + 0.02 * 0.001)).abs() < 1e-15);
    }

    #[test]
    fn mu0_term_structure_passes_through() {
        let mu0 = RateCurve::new("libor_ois", &[(0.25, 0.001), (30.0, 0.005)]).unwrap();
        let p = RepoModelParams::new(0.10, mu0).unwrap();
        let rf = RateCurve::flat("ois", 0.01);
        let c = repo_curve(&p, &rf, &ust10(), "BBB", &[0.25, 30.0]).unwrap();
        let diff = c.zero_rate(30.0).unwrap() - c.zero_rate(0.25).unwrap();
        assert!((diff - 0.004).abs() < 1e-15);
    }

    #[test]
    fn asset_specific_mu0_overrides_global() {
        let mut p = RepoModelParams::new(0.10, RateCurve::flat("mu0", 0.001)).unwrap();
        p.mu0_by_asset
            .insert("UST_10y".into(), RateCurve::flat("mu0_ust", 0.0005));
        let c = spread_curve(&p, &ust10(), "AA", &[1.0]).unwrap();
        assert!((c.zero_rate(1.0).unwrap() - (0.00008 + 0.0005)).abs() < 1e-15);
    }

    #[test]
    fn worse_rating_costs_more() {
        let p = RepoModelParams::new(0.10, RateCurve::flat("mu0", 0.001)).unwrap();
        let a = ust10();
        let spreads: Vec<f64> = ["AA", "A", "BBB", "BB"]
            .iter()
            .map(|r| breakeven_spread(&p, a.econ_capital_for(r).unwrap(), 5.0).unwrap())
            .collect();
        assert!(spreads.windows(2).all(|w| w[1] > w[0]));
    }
}
