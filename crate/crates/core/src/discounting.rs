//! The effective derivative financing rate.
//!
//! For a value `V` seen from party B, the discount rate switches to the
//! liability side's rates:
//!
//! ```text
//! r_e  = r_ec·I(V > 0) + r_eb·I(V ≤ 0)
//! r_ec = r_c(1 − η_c) + η_c((1 − χ_c)·μ_c + χ_c·f_c)
//! r_eb = r_b(1 − η_b) + η_b((1 − χ_b)·μ_b + χ_b·f_b)
//! ```
//!
//! where `f` is the funded collateral rate: the cash collateral rate for cash,
//! or the repo rate of the posted securities. Each side's rate is a convex
//! combination of three rates with weights "unsecured", "secured but
//! unfunded" and "funded". This module is the only place where the sign
//! nonlinearity lives.

use serde::{Deserialize, Serialize};

use crate::csa::CollateralState;
use crate::curves::{PartyCurves, RateCurve};
use crate::{Error, Result};

/// Which party currently carries the liability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// `V > 0`: the derivative is B's asset; C's rates apply.
    Asset,
    /// `V ≤ 0`: B's liability; B's rates apply.
    Liability,
}

impl Side {
    /// Ties at zero go to the liability side.
    pub fn of(value: f64) -> Side {
        if value > 0.0 { Side::Asset } else { Side::Liability }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollateralMode {
    /// `η = 0` on both sides.
    Uncollateralized,
    /// Reusable cash earning the cash collateral rate.
    CashComingled,
    /// Cash in a segregated account: protection without funding (`χ = 0`).
    CashSegregated,
    /// Securities, funded in the repo market.
    NonCash,
    /// Segregated initial margin (`χ = 0`).
    InitialMargin,
}

/// Instantaneous rates entering one side's effective rate at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateComponents {
    pub risk_free: f64,
    pub unsecured: f64,
    pub liquidity: f64,
    pub funded: f64,
    pub eta: f64,
    pub chi: f64,
}

impl RateComponents {
    pub fn effective(&self) -> f64 {
        self.unsecured * (1.0 - self.eta)
            + self.eta * ((1.0 - self.chi) * self.liquidity + self.chi * self.funded)
    }

    /// Default-risk premium on the unsecured part: `(r_x − μ_x)(1 − η)`.
    pub fn credit_spread(&self) -> f64 {
        (self.unsecured - self.liquidity) * (1.0 - self.eta)
    }

    /// Funding basis on the unsecured part: `(μ_x − r)(1 − η)`.
    pub fn funding_spread(&self) -> f64 {
        (self.liquidity - self.risk_free) * (1.0 - self.eta)
    }

    /// Effective collateral spread: `η((1 − χ)(μ_x − r) + χ(f − r))`.
    pub fn liquidity_spread(&self) -> f64 {
        self.eta
            * ((1.0 - self.chi) * (self.liquidity - self.risk_free)
                + self.chi * (self.funded - self.risk_free))
    }

    /// Repo-cost part of the liquidity spread: `η·χ·(f − r)`.
    pub fn collateral_spread(&self) -> f64 {
        self.eta * self.chi * (self.funded - self.risk_free)
    }
}

#[derive(Debug, Clone)]
pub struct EffectiveRateSpec {
    pub party_b: PartyCurves,
    pub party_c: PartyCurves,
    pub risk_free: RateCurve,
    /// Collateralization as a right-continuous step function of time; the
    /// first entry starts at `t = 0`.
    states: Vec<(f64, CollateralState)>,
    /// Cash collateral rate `r_L`.
    pub cash_rate: RateCurve,
    /// Repo rate with recourse to C, used when `V > 0`.
    pub repo_rate_c: RateCurve,
    /// Repo rate with recourse to B, used when `V ≤ 0`.
    pub repo_rate_b: RateCurve,
    pub mode: CollateralMode,
}

impl EffectiveRateSpec {
    /// Cash and repo rates default to the risk-free curve.
    pub fn new(
        party_b: PartyCurves,
        party_c: PartyCurves,
        risk_free: RateCurve,
        state: CollateralState,
        mode: CollateralMode,
    ) -> Result<Self> {
        state.validate()?;
        Ok(EffectiveRateSpec {
            party_b,
            party_c,
            cash_rate: risk_free.clone(),
            repo_rate_c: risk_free.clone(),
            repo_rate_b: risk_free.clone(),
            risk_free,
            states: vec![(0.0, state)],
            mode,
        })
    }

    /// Both parties riskless: `r_e = r` whatever the collateral.
    pub fn risk_free_only(risk_free: RateCurve) -> Self {
        let p = PartyCurves::riskless(&risk_free);
        Self::new(p.clone(), p, risk_free, CollateralState::uncollateralized(), CollateralMode::Uncollateralized)
            .expect("valid state")
    }

    pub fn with_cash_rate(mut self, cash_rate: RateCurve) -> Self {
        self.cash_rate = cash_rate;
        self
    }

    /// Same repo rate on both sides.
    pub fn with_repo_rate(mut self, repo_rate: RateCurve) -> Self {
        self.repo_rate_b = repo_rate.clone();
        self.repo_rate_c = repo_rate;
        self
    }

    pub fn with_repo_rates(mut self, repo_rate_b: RateCurve, repo_rate_c: RateCurve) -> Self {
        self.repo_rate_b = repo_rate_b;
        self.repo_rate_c = repo_rate_c;
        self
    }

    /// Funded rate built from a blended repo spread (`Σ w_i S_pi`) and the
    /// posting's `χ`: `r + spread/χ`, so that `χ·(f − r)` equals the blend.
    pub fn with_blend(mut self, chi: f64, spread: f64) -> Result<Self> {
        let mut state = self.state_at(0.0);
        state.chi_b = chi;
        state.chi_c = chi;
        state.repo_spread_blend = spread;
        state.validate()?;
        let per_unit = if chi > 0.0 { spread / chi } else { 0.0 };
        self.states = vec![(0.0, state)];
        let funded = self.risk_free.shifted(per_unit).with_label("repo_blend");
        Ok(self.with_repo_rate(funded))
    }

    /// Term-structured [`with_blend`](Self::with_blend): the blended funded
    /// spread `Σ w_i (1 − shortfall_i)·s_i(t)` is given as a curve.
    pub fn with_blend_curve(mut self, chi: f64, spread: &RateCurve) -> Result<Self> {
        let mut state = self.state_at(0.0);
        state.chi_b = chi;
        state.chi_c = chi;
        state.repo_spread_blend = spread.zero_rate(spread.tenors()[0])?;
        state.validate()?;
        let per_unit = if chi > 0.0 { 1.0 / chi } else { 0.0 };
        self.states = vec![(0.0, state)];
        let funded = self.risk_free.combine(1.0, spread, per_unit, "repo_blend");
        Ok(self.with_repo_rate(funded))
    }

    pub fn with_state(mut self, state: CollateralState) -> Result<Self> {
        state.validate()?;
        self.states = vec![(0.0, state)];
        Ok(self)
    }

    /// Deterministic collateralization profile: `(start_time, state)` steps.
    pub fn with_state_profile(mut self, steps: Vec<(f64, CollateralState)>) -> Result<Self> {
        if steps.first().map(|s| s.0) != Some(0.0) {
            return Err(Error::validation("a state profile must start at t = 0"));
        }
        if steps.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::validation("state profile times must increase"));
        }
        for (_, s) in &steps {
            s.validate()?;
        }
        self.states = steps;
        Ok(self)
    }

    pub fn state_at(&self, t: f64) -> CollateralState {
        let i = self.states.partition_point(|s| s.0 <= t);
        self.states[i.saturating_sub(1)].1
    }

    /// Times where the collateral profile changes.
    pub fn state_breaks(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().skip(1).map(|s| s.0)
    }

    /// `(η, χ)` after the mode's overrides.
    fn eta_chi(&self, t: f64, side: Side) -> (f64, f64) {
        let s = self.state_at(t);
        let (eta, chi) = match side {
            Side::Asset => (s.eta_c, s.chi_c),
            Side::Liability => (s.eta_b, s.chi_b),
        };
        match self.mode {
            CollateralMode::Uncollateralized => (0.0, chi),
            CollateralMode::CashSegregated | CollateralMode::InitialMargin => (eta, 0.0),
            CollateralMode::CashComingled | CollateralMode::NonCash => (eta, chi),
        }
    }

    fn funded_curve(&self, side: Side) -> &RateCurve {
        match (self.mode, side) {
            (CollateralMode::NonCash, Side::Asset) => &self.repo_rate_c,
            (CollateralMode::NonCash, Side::Liability) => &self.repo_rate_b,
            _ => &self.cash_rate,
        }
    }

    fn party(&self, side: Side) -> &PartyCurves {
        match side {
            Side::Asset => &self.party_c,
            Side::Liability => &self.party_b,
        }
    }

    pub fn components(&self, t: f64, side: Side) -> RateComponents {
        let party = self.party(side);
        let (eta, chi) = self.eta_chi(t, side);
        RateComponents {
            risk_free: self.risk_free.forward(t),
            unsecured: party.bond.forward(t),
            liquidity: party.liquidity.forward(t),
            funded: self.funded_curve(side).forward(t),
            eta,
            chi,
        }
    }

    /// `r_ec` for `Side::Asset`, `r_eb` for `Side::Liability`.
    pub fn effective_rate(&self, t: f64, side: Side) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!("effective rate requires t >= 0, got {t}")));
        }
        Ok(self.components(t, side).effective())
    }

    /// `∫_{t1}^{t2} r_e du` with the side fixed; exact for curves with
    /// piecewise-constant forwards.
    pub fn integral(&self, t1: f64, t2: f64, side: Side) -> f64 {
        let mut breaks: Vec<f64> = self.state_breaks().filter(|&b| b > t1 && b < t2).collect();
        breaks.push(t2);
        let party = self.party(side);
        let funded = self.funded_curve(side);
        let mut acc = 0.0;
        let mut a = t1;
        for b in breaks {
            let (eta, chi) = self.eta_chi(a, side);
            acc += (1.0 - eta) * party.bond.integral(a, b)
                + eta * (1.0 - chi) * party.liquidity.integral(a, b)
                + eta * chi * funded.integral(a, b);
            a = b;
        }
        acc
    }

    /// Single-side discount factor `exp(−∫ r_e)`.
    pub fn discount_factor(&self, t1: f64, t2: f64, side: Side) -> Result<f64> {
        if !(t1 >= 0.0) || !(t2 >= t1) {
            return Err(Error::domain(format!("need 0 <= t1 <= t2, got {t1}, {t2}")));
        }
        Ok((-self.integral(t1, t2, side)).exp())
    }

    /// Effective rate along a sign path given as `(start_time, side)` steps.
    pub fn switching_rate(&self, t: f64, sign_path: &SignPath) -> Result<f64> {
        self.effective_rate(t, sign_path.side_at(t))
    }

    /// `exp(−∫_{t1}^{t2} r_e du)` along a sign path.
    pub fn switching_discount_factor(&self, t1: f64, t2: f64, sign_path: &SignPath) -> Result<f64> {
        if !(t1 >= 0.0) || !(t2 >= t1) {
            return Err(Error::domain(format!("need 0 <= t1 <= t2, got {t1}, {t2}")));
        }
        let mut acc = 0.0;
        let mut a = t1;
        let mut breaks: Vec<f64> = sign_path.breaks().filter(|&b| b > t1 && b < t2).collect();
        breaks.push(t2);
        for b in breaks {
            acc += self.integral(a, b, sign_path.side_at(a));
            a = b;
        }
        Ok((-acc).exp())
    }
}

/// Sign of `V` as a right-continuous step function of time.
#[derive(Debug, Clone)]
pub struct SignPath {
    steps: Vec<(f64, Side)>,
}

impl SignPath {
    pub fn constant(side: Side) -> Self {
        SignPath { steps: vec![(0.0, side)] }
    }

    pub fn new(steps: Vec<(f64, Side)>) -> Result<Self> {
        if steps.first().map(|s| s.0) != Some(0.0) {
            return Err(Error::validation("a sign path must start at t = 0"));
        }
        if steps.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::validation("sign path times must increase"));
        }
        Ok(SignPath { steps })
    }

    pub fn side_at(&self, t: f64) -> Side {
        let i = self.steps.partition_point(|s| s.0 <= t);
        self.steps[i.saturating_sub(1)].1
    }

    fn breaks(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().skip(1).map(|s| s.0)
    }
}
