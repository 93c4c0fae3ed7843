//! Random interest-rate swap netting sets and their risk-free exposure
//! profiles `E[V*(t)⁺]`, `E[V*(t)⁻]`.
//!
//! Swaps are single-curve: the same curve projects floating coupons and
//! discounts. Two backends produce exposures:
//!
//! * [`ExposureModel::Deterministic`] — the forward value of the remaining
//!   cashflows, `V_fwd(t) = PV_0(cashflows after t) / DF(0, t)`;
//! * [`ExposureModel::OneFactorMc`] — a mean-reverting Gaussian short rate
//!   (Hull–White, fitted to the initial curve). For each exposure date the
//!   bond prices carry the convexity term of the date's forward measure, so
//!   `E[V(t)] = V_fwd(t)` holds exactly in expectation and a zero volatility
//!   reproduces the deterministic backend.
//!
//! Floating coupons already fixed at an exposure date are valued at their
//! time-0 forward fixing (no past-fixing path dependence).

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::RateCurve;
use crate::{Error, Result};

const DATE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Pays fixed, receives floating.
    Payer,
    /// Receives fixed, pays floating.
    Receiver,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Payer => 1.0,
            Direction::Receiver => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Swap {
    pub notional: f64,
    pub fixed_rate: f64,
    pub direction: Direction,
    #[serde(rename = "maturity_years")]
    pub maturity: f64,
    /// Fixed-leg payments per year (1, 2 or 4); floating resets on the same schedule.
    pub pay_freq: u32,
}

impl Swap {
    pub fn validate(&self) -> Result<()> {
        if !(self.notional > 0.0) || !(self.maturity > 0.0) {
            return Err(Error::domain("swap notional and maturity must be > 0"));
        }
        if ![1, 2, 4].contains(&self.pay_freq) {
            return Err(Error::domain(format!("pay_freq must be 1, 2 or 4, got {}", self.pay_freq)));
        }
        if !self.fixed_rate.is_finite() {
            return Err(Error::domain("fixed rate must be finite"));
        }
        Ok(())
    }

    /// Payment dates after 0, ascending; the first period may be a short stub
    /// starting at 0.
    pub fn payment_dates(&self) -> Vec<f64> {
        let period = 1.0 / self.pay_freq as f64;
        let mut dates = Vec::new();
        let mut k = 0u32;
        loop {
            let d = self.maturity - k as f64 * period;
            if d <= DATE_EPS {
                break;
            }
            dates.push(d);
            k += 1;
        }
        dates.reverse();
        dates
    }

    /// Cashflows still to be valued at time `t`, as `(date, amount)` pairs
    /// such that `V(t) = Σ amount · P(t, date)`. Signed from the fixed payer's
    /// side for payers and the receiver's side for receivers.
    fn cashflows_at(&self, t: f64, curve: &RateCurve, out: &mut Vec<(f64, f64)>) {
        let dates = self.payment_dates();
        let sign = self.direction.sign();
        let n = self.notional;
        let mut start = 0.0;
        let mut float_done = false;
        for &end in &dates {
            if end > t + DATE_EPS {
                let tau = end - start;
                out.push((end, -sign * n * self.fixed_rate * tau));
                if !float_done {
                    if start >= t - DATE_EPS {
                        out.push((start.max(t), sign * n));
                    } else {
                        let fixing = curve.discount_factor(0.0, start).expect("valid dates")
                            / curve.discount_factor(0.0, end).expect("valid dates");
                        out.push((end, sign * n * fixing));
                    }
                    float_done = true;
                }
            }
            start = end;
        }
        if float_done {
            out.push((self.maturity, -sign * n));
        }
    }

    /// Fixed-leg annuity `N·Σ τ_i DF(t_i)` at time 0.
    pub fn annuity(&self, curve: &RateCurve) -> f64 {
        let mut start = 0.0;
        let mut acc = 0.0;
        for end in self.payment_dates() {
            acc += (end - start) * curve.discount_factor(0.0, end).expect("valid dates");
            start = end;
        }
        self.notional * acc
    }

    /// Time-0 value.
    pub fn value(&self, curve: &RateCurve) -> f64 {
        let mut cf = Vec::new();
        self.cashflows_at(0.0, curve, &mut cf);
        cf.iter()
            .map(|&(d, a)| a * curve.discount_factor(0.0, d).expect("valid dates"))
            .sum()
    }
}

/// Par rate of a spot-starting swap with `freq` payments per year.
pub fn par_swap_rate(curve: &RateCurve, maturity: f64, freq: u32) -> Result<f64> {
    let probe = Swap {
        notional: 1.0,
        fixed_rate: 0.0,
        direction: Direction::Payer,
        maturity,
        pay_freq: freq,
    };
    probe.validate()?;
    Ok((1.0 - curve.discount_factor(0.0, maturity)?) / probe.annuity(curve))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSpec {
    pub n: usize,
    pub payer_frac: f64,
    /// Maturities are drawn uniformly from the whole months within this range.
    pub maturity_range: (f64, f64),
    /// Fixed rates are uniform on `[atm − band, atm + band]`.
    pub rate_band: f64,
    pub seed: u64,
    #[serde(default = "default_notional")]
    pub notional: f64,
}

fn default_notional() -> f64 {
    1.0
}

impl PortfolioSpec {
    pub fn new(n: usize, payer_frac: f64, seed: u64) -> Self {
        PortfolioSpec {
            n,
            payer_frac,
            maturity_range: (0.25, 30.0),
            rate_band: 0.01,
            seed,
            notional: 1.0,
        }
    }
}

/// At-the-money rate used to centre random portfolios: the 10y quarterly par rate.
pub fn atm_rate(curve: &RateCurve) -> Result<f64> {
    par_swap_rate(curve, 10.0, 4)
}

/// Draws a random swap portfolio; deterministic in `spec.seed`.
///
/// The first `round(n·payer_frac)` swaps are payers.
pub fn generate_portfolio(spec: &PortfolioSpec, atm: f64) -> Result<Vec<Swap>> {
    if spec.n == 0 {
        return Err(Error::domain("portfolio size must be >= 1"));
    }
    if !(0.0..=1.0).contains(&spec.payer_frac) {
        return Err(Error::domain(format!("payer_frac must lie in [0,1], got {}", spec.payer_frac)));
    }
    let (lo, hi) = spec.maturity_range;
    let lo_m = (lo * 12.0 - DATE_EPS).ceil().max(1.0) as u32;
    let hi_m = (hi * 12.0 + DATE_EPS).floor() as u32;
    if !(lo > 0.0) || hi_m < lo_m {
        return Err(Error::domain(format!("maturity range ({lo}, {hi}) holds no whole month")));
    }
    if !(spec.rate_band >= 0.0) || !(spec.notional > 0.0) {
        return Err(Error::domain("rate band must be >= 0 and notional > 0"));
    }
    let payers = (spec.n as f64 * spec.payer_frac).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let freqs = [1u32, 2, 4];
    let swaps = (0..spec.n)
        .map(|i| {
            let months = rng.random_range(lo_m..=hi_m);
            let u: f64 = rng.random();
            let pay_freq = freqs[rng.random_range(0..freqs.len())];
            Swap {
                notional: spec.notional,
                fixed_rate: atm + spec.rate_band * (2.0 * u - 1.0),
                direction: if i < payers { Direction::Payer } else { Direction::Receiver },
                maturity: months as f64 / 12.0,
                pay_freq,
            }
        })
        .collect();
    Ok(swaps)
}

pub fn read_portfolio_csv<R: Read>(reader: R) -> Result<Vec<Swap>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut swaps = Vec::new();
    for row in rdr.deserialize() {
        let swap: Swap = row?;
        swap.validate()?;
        swaps.push(swap);
    }
    Ok(swaps)
}

pub fn write_portfolio_csv<W: Write>(swaps: &[Swap], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for s in swaps {
        wtr.serialize(s)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Risk-free exposure profile of one netting set.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureProfile {
    pub times: Vec<f64>,
    /// `E[V*(t)⁺]`.
    pub epe: Vec<f64>,
    /// `E[V*(t)⁻]`, as a nonnegative number.
    pub ene: Vec<f64>,
    /// `V*(0)`.
    pub mtm0: f64,
    /// Gross notional-weighted fixed-leg annuity, for running spreads.
    pub annuity: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileRow {
    t: f64,
    epe: f64,
    ene: f64,
}

impl ExposureProfile {
    pub fn new(times: Vec<f64>, epe: Vec<f64>, ene: Vec<f64>, mtm0: f64, annuity: f64) -> Result<Self> {
        let p = ExposureProfile {
            times,
            epe,
            ene,
            mtm0,
            annuity,
        };
        p.validate()?;
        Ok(p)
    }

    /// Exposure of a deterministic value path sampled on `times`.
    pub fn from_values(times: Vec<f64>, values: &[f64], annuity: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyProfile("no values".into()));
        }
        let epe = values.iter().map(|v| v.max(0.0)).collect();
        let ene = values.iter().map(|v| (-v).max(0.0)).collect();
        Self::new(times, epe, ene, values[0], annuity)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.is_empty() {
            return Err(Error::EmptyProfile("profile has no dates".into()));
        }
        if self.times.len() != self.epe.len() || self.times.len() != self.ene.len() {
            return Err(Error::validation("profile columns differ in length"));
        }
        if self.times[0] < 0.0 || self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::validation("profile times must be nonnegative and increasing"));
        }
        if self.epe.iter().chain(&self.ene).any(|v| !(*v >= 0.0)) {
            return Err(Error::validation("epe and ene must be nonnegative"));
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("validated")
    }

    /// `true` when the netting set never has negative exposure.
    pub fn is_receivable(&self) -> bool {
        self.ene.iter().all(|&v| v == 0.0)
    }

    fn interp(&self, column: &[f64], t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return column[0];
        }
        if t >= self.times[n - 1] {
            return column[n - 1];
        }
        let i = self.times.partition_point(|&x| x <= t);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        column[i - 1] * (1.0 - w) + column[i] * w
    }

    /// Linear interpolation of `epe`, flat outside the grid.
    pub fn epe_at(&self, t: f64) -> f64 {
        self.interp(&self.epe, t)
    }

    pub fn ene_at(&self, t: f64) -> f64 {
        self.interp(&self.ene, t)
    }

    /// Profile with both exposures multiplied by `k > 0` (mtm and annuity too).
    pub fn scaled(&self, k: f64) -> ExposureProfile {
        ExposureProfile {
            times: self.times.clone(),
            epe: self.epe.iter().map(|v| v * k).collect(),
            ene: self.ene.iter().map(|v| v * k).collect(),
            mtm0: self.mtm0 * k,
            annuity: self.annuity * k,
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for i in 0..self.times.len() {
            wtr.serialize(ProfileRow {
                t: self.times[i],
                epe: self.epe[i],
                ene: self.ene[i],
            })?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads `t,epe,ene`; `mtm0` is taken as `epe_0 − ene_0`.
    pub fn read_csv<R: Read>(reader: R, annuity: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let (mut t, mut epe, mut ene) = (Vec::new(), Vec::new(), Vec::new());
        for row in rdr.deserialize() {
            let row: ProfileRow = row?;
            t.push(row.t);
            epe.push(row.epe);
            ene.push(row.ene);
        }
        if t.is_empty() {
            return Err(Error::EmptyProfile("profile CSV has no rows".into()));
        }
        let mtm0 = epe[0] - ene[0];
        Self::new(t, epe, ene, mtm0, annuity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExposureModel {
    Deterministic,
    OneFactorMc {
        mean_reversion: f64,
        vol: f64,
        paths: usize,
        seed: u64,
    },
}

/// Monthly grid from 0 to the portfolio's last maturity.
pub fn monthly_grid(portfolio: &[Swap]) -> Vec<f64> {
    let last = portfolio.iter().map(|s| s.maturity).fold(0.0, f64::max);
    let months = (last * 12.0 - DATE_EPS).ceil() as usize;
    (0..=months).map(|m| m as f64 / 12.0).collect()
}

/// Aggregated `(date, DF(date)/DF(t)·amount)` for one exposure date.
struct Slice {
    t: f64,
    dates: Vec<f64>,
    fwd_amounts: Vec<f64>,
}

impl Slice {
    fn build(portfolio: &[Swap], curve: &RateCurve, t: f64) -> Slice {
        let mut cf = Vec::new();
        for s in portfolio {
            s.cashflows_at(t, curve, &mut cf);
        }
        cf.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite dates"));
        let mut dates: Vec<f64> = Vec::new();
        let mut amounts: Vec<f64> = Vec::new();
        for (d, a) in cf {
            match dates.last() {
                Some(&last) if (d - last).abs() <= DATE_EPS => *amounts.last_mut().expect("paired") += a,
                _ => {
                    dates.push(d);
                    amounts.push(a);
                }
            }
        }
        let fwd_amounts = dates
            .iter()
            .zip(&amounts)
            .map(|(&d, &a)| a * curve.discount_factor(t, d.max(t)).expect("d >= t"))
            .collect();
        Slice { t, dates, fwd_amounts }
    }

    fn forward_value(&self) -> f64 {
        self.fwd_amounts.iter().sum()
    }
}

/// Exposure profile of the netting set on `grid`.
pub fn exposure_profile(
    portfolio: &[Swap],
    curve: &RateCurve,
    model: ExposureModel,
    grid: &[f64],
) -> Result<ExposureProfile> {
    if portfolio.is_empty() {
        return Err(Error::EmptyProfile("empty portfolio".into()));
    }
    if grid.is_empty() || grid[0] < 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::validation("exposure grid must be nonnegative and increasing"));
    }
    for s in portfolio {
        s.validate()?;
    }
    let slices: Vec<Slice> = grid.par_iter().map(|&t| Slice::build(portfolio, curve, t)).collect();
    let annuity = portfolio.iter().map(|s| s.annuity(curve)).sum();
    let mtm0 = portfolio.iter().map(|s| s.value(curve)).sum();

    let (epe, ene) = match model {
        ExposureModel::Deterministic => slices
            .iter()
            .map(|s| {
                let v = s.forward_value();
                (v.max(0.0), (-v).max(0.0))
            })
            .unzip(),
        ExposureModel::OneFactorMc {
            mean_reversion,
            vol,
            paths,
            seed,
        } => {
            let hw = HullWhite::new(mean_reversion, vol)?;
            if paths < 2 {
                return Err(Error::domain("Monte Carlo needs at least 2 paths"));
            }
            monte_carlo(&slices, &hw, paths, seed)
        }
    };
    ExposureProfile::new(grid.to_vec(), epe, ene, mtm0, annuity)
}

#[derive(Debug, Clone, Copy)]
struct HullWhite {
    a: f64,
    sigma: f64,
}

impl HullWhite {
    fn new(a: f64, sigma: f64) -> Result<Self> {
        if !(a >= 0.0) || !(sigma >= 0.0) {
            return Err(Error::domain("mean reversion and volatility must be >= 0"));
        }
        Ok(HullWhite { a, sigma })
    }

    /// `(1 − e^{−a·τ})/a`, → τ as a → 0.
    fn b(&self, tau: f64) -> f64 {
        if self.a * tau < 1e-8 {
            tau
        } else {
            -(-self.a * tau).exp_m1() / self.a
        }
    }

    /// Variance of the OU factor at `t` starting from 0.
    fn variance(&self, t: f64) -> f64 {
        self.sigma * self.sigma * self.b_two(t)
    }

    /// `(1 − e^{−2a·τ})/(2a)`.
    fn b_two(&self, tau: f64) -> f64 {
        if self.a * tau < 1e-8 {
            tau
        } else {
            -(-2.0 * self.a * tau).exp_m1() / (2.0 * self.a)
        }
    }
}

/// Per-slice precomputed `(c_d, B_d, ½B_d²v)`.
struct McSlice {
    coeff: Vec<f64>,
    b: Vec<f64>,
    convexity: Vec<f64>,
}

fn monte_carlo(slices: &[Slice], hw: &HullWhite, paths: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let k = slices.len();
    let mc: Vec<McSlice> = slices
        .iter()
        .map(|s| {
            let v = hw.variance(s.t);
            let b: Vec<f64> = s.dates.iter().map(|&d| hw.b((d - s.t).max(0.0))).collect();
            McSlice {
                coeff: s.fwd_amounts.clone(),
                convexity: b.iter().map(|bd| 0.5 * bd * bd * v).collect(),
                b,
            }
        })
        .collect();
    // exact OU transition between consecutive exposure dates
    let steps: Vec<(f64, f64)> = (0..k)
        .map(|i| {
            let prev = if i == 0 { 0.0 } else { slices[i - 1].t };
            let dt = slices[i].t - prev;
            ((-hw.a * dt).exp(), hw.sigma * hw.b_two(dt).sqrt())
        })
        .collect();

    let pairs = paths.div_ceil(2);
    let per_pair: Vec<Vec<(f64, f64)>> = (0..pairs)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            let members = if 2 * p + 1 < paths { 2 } else { 1 };
            let mut x = [0.0f64; 2];
            let mut out = vec![(0.0, 0.0); k];
            for i in 0..k {
                let z: f64 = rng.sample(StandardNormal);
                let (decay, sd) = steps[i];
                x[0] = x[0] * decay + sd * z;
                x[1] = x[1] * decay - sd * z;
                let s = &mc[i];
                for xm in x.iter().take(members) {
                    let v: f64 = s
                        .coeff
                        .iter()
                        .zip(&s.b)
                        .zip(&s.convexity)
                        .map(|((c, b), h)| {
                            let e = -b * xm - h;
                            if e == 0.0 { *c } else { c * e.exp() }
                        })
                        .sum();
                    out[i].0 += v.max(0.0);
                    out[i].1 += (-v).max(0.0);
                }
            }
            out
        })
        .collect();

    let mut epe = vec![0.0; k];
    let mut ene = vec![0.0; k];
    for pair in &per_pair {
        for i in 0..k {
            epe[i] += pair[i].0;
            ene[i] += pair[i].1;
        }
    }
    let n = paths as f64;
    (epe.into_iter().map(|v| v / n).collect(), ene.into_iter().map(|v| v / n).collect())
}

/// Forward MTM `V_fwd(t)` of the netting set at each grid date.
pub fn forward_values(portfolio: &[Swap], curve: &RateCurve, grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&t| Slice::build(portfolio, curve, t).forward_value())
        .collect()
}
