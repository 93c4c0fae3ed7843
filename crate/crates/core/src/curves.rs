//! Term structures of interest rates, spreads and default intensities.
//!
//! A [`RateCurve`] stores continuously-compounded zero rates on an ACT/365
//! year-fraction grid and interpolates linearly in `ln DF(t)`, which makes
//! instantaneous forwards piecewise constant between nodes. Before the first
//! node the first zero rate applies; beyond the last node the zero rate is
//! held flat.
//!
//! Every rate-like input (risk-free, bond, liquidity, hazard, cash, repo,
//! pure funding liquidity) is a `RateCurve`. When a curve is used as a
//! *rate* inside the effective discount rate, its instantaneous forward is
//! meant, so that `exp(-∫ f)` reproduces the curve's own discount factors.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    label: String,
    tenors: Vec<f64>,
    zeros: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvNode {
    tenor_years: f64,
    zero_rate: f64,
}

impl RateCurve {
    /// Builds a curve from `(tenor, zero_rate)` nodes.
    ///
    /// Tenors must be strictly increasing and positive; rates must be finite.
    pub fn new(label: impl Into<String>, nodes: &[(f64, f64)]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::validation("a curve needs at least one node"));
        }
        let mut prev = 0.0;
        for &(t, z) in nodes {
            if !t.is_finite() || !z.is_finite() {
                return Err(Error::validation(format!("non-finite node ({t}, {z})")));
            }
            if t <= prev {
                return Err(Error::validation(format!(
                    "tenors must be positive and strictly increasing; got {t} after {prev}"
                )));
            }
            prev = t;
        }
        Ok(RateCurve {
            label: label.into(),
            tenors: nodes.iter().map(|n| n.0).collect(),
            zeros: nodes.iter().map(|n| n.1).collect(),
        })
    }

    /// A flat curve: one node at one year.
    pub fn flat(label: impl Into<String>, rate: f64) -> Self {
        RateCurve {
            label: label.into(),
            tenors: vec![1.0],
            zeros: vec![rate],
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn tenors(&self) -> &[f64] {
        &self.tenors
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.tenors.iter().copied().zip(self.zeros.iter().copied())
    }

    pub fn last_tenor(&self) -> f64 {
        *self.tenors.last().expect("curve has at least one node")
    }

    /// `true` when every node carries the same zero rate.
    pub fn is_flat(&self) -> bool {
        self.zeros.iter().all(|&z| z == self.zeros[0])
    }

    /// `ln DF(0, t)` for `t >= 0`.
    fn log_df(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let n = self.tenors.len();
        if t <= self.tenors[0] {
            return -self.zeros[0] * t;
        }
        if t >= self.tenors[n - 1] {
            return -self.zeros[n - 1] * t;
        }
        // first index with tenor >= t; guaranteed in 1..n-1
        let i = self.tenors.partition_point(|&x| x < t);
        let (t0, t1) = (self.tenors[i - 1], self.tenors[i]);
        let (l0, l1) = (-self.zeros[i - 1] * t0, -self.zeros[i] * t1);
        if t == t1 {
            return l1;
        }
        l0 + (l1 - l0) * (t - t0) / (t1 - t0)
    }

    /// Continuously-compounded zero rate at `t > 0`.
    pub fn zero_rate(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::domain(format!("zero rate requires t > 0, got {t}")));
        }
        if let Ok(i) = self
            .tenors
            .binary_search_by(|x| x.partial_cmp(&t).expect("finite tenors"))
        {
            return Ok(self.zeros[i]);
        }
        Ok(-self.log_df(t) / t)
    }

    /// `exp(-∫_{t1}^{t2} f(u) du)` for `0 <= t1 <= t2`.
    pub fn discount_factor(&self, t1: f64, t2: f64) -> Result<f64> {
        if !(t1 >= 0.0) || !(t2 >= t1) {
            return Err(Error::domain(format!(
                "discount factor requires 0 <= t1 <= t2, got t1={t1}, t2={t2}"
            )));
        }
        if t1 == t2 {
            return Ok(1.0);
        }
        Ok((self.log_df(t2) - self.log_df(t1)).exp())
    }

    /// `∫_{t1}^{t2} f(u) du`; negative when `t2 < t1`. Arguments are clamped at 0.
    pub fn integral(&self, t1: f64, t2: f64) -> f64 {
        self.log_df(t1.max(0.0)) - self.log_df(t2.max(0.0))
    }

    /// Instantaneous forward rate, right-continuous at the nodes.
    pub fn forward(&self, t: f64) -> f64 {
        let n = self.tenors.len();
        if t < self.tenors[0] {
            return self.zeros[0];
        }
        if t >= self.tenors[n - 1] {
            return self.zeros[n - 1];
        }
        let i = self.tenors.partition_point(|&x| x <= t);
        let (t0, t1) = (self.tenors[i - 1], self.tenors[i]);
        (self.zeros[i] * t1 - self.zeros[i - 1] * t0) / (t1 - t0)
    }

    /// Linear combination `a·self + b·other` of two curves in `ln DF` space.
    ///
    /// Exact: the result's log-discount factors equal the same combination of
    /// the inputs' at every `t`, because both inputs are linear on each
    /// interval of the merged node set.
    pub fn combine(&self, a: f64, other: &RateCurve, b: f64, label: impl Into<String>) -> RateCurve {
        let mut tenors: Vec<f64> = self.tenors.iter().chain(&other.tenors).copied().collect();
        tenors.sort_by(|x, y| x.partial_cmp(y).expect("finite tenors"));
        tenors.dedup();
        let zeros = tenors
            .iter()
            .map(|&t| -(a * self.log_df(t) + b * other.log_df(t)) / t)
            .collect();
        RateCurve {
            label: label.into(),
            tenors,
            zeros,
        }
    }

    /// `self + other` (e.g. risk-free plus a spread curve).
    pub fn plus(&self, other: &RateCurve) -> RateCurve {
        self.combine(1.0, other, 1.0, format!("{}+{}", self.label, other.label))
    }

    /// `self - other` (e.g. bond minus hazard).
    pub fn minus(&self, other: &RateCurve) -> RateCurve {
        self.combine(1.0, other, -1.0, format!("{}-{}", self.label, other.label))
    }

    /// Parallel shift of every zero rate.
    pub fn shifted(&self, spread: f64) -> RateCurve {
        RateCurve {
            label: self.label.clone(),
            tenors: self.tenors.clone(),
            zeros: self.zeros.iter().map(|z| z + spread).collect(),
        }
    }

    pub fn read_csv<R: Read>(label: impl Into<String>, reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["tenor_years", "zero_rate"] {
            return Err(Error::validation(format!(
                "curve CSV header must be `tenor_years,zero_rate`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut nodes = Vec::new();
        for row in rdr.deserialize() {
            let row: CsvNode = row?;
            nodes.push((row.tenor_years, row.zero_rate));
        }
        RateCurve::new(label, &nodes)
    }

    pub fn from_csv_path(label: impl Into<String>, path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(label, file)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for (tenor_years, zero_rate) in self.nodes() {
            wtr.serialize(CsvNode {
                tenor_years,
                zero_rate,
            })?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// One party's credit and funding curves.
#[derive(Debug, Clone)]
pub struct PartyCurves {
    /// Senior unsecured bond rate (`r_b` or `r_c`).
    pub bond: RateCurve,
    /// Issuer liquidity rate (`mu_b` or `mu_c`): bond rate less default premium.
    pub liquidity: RateCurve,
    /// Default intensity.
    pub hazard: RateCurve,
    pub recovery: f64,
}

impl PartyCurves {
    /// Checks `bond >= liquidity >= risk_free` at every merged node.
    pub fn new(
        bond: RateCurve,
        liquidity: RateCurve,
        hazard: RateCurve,
        recovery: f64,
        risk_free: &RateCurve,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&recovery) {
            return Err(Error::domain(format!("recovery must lie in [0,1), got {recovery}")));
        }
        let default_premium = bond.minus(&liquidity);
        let funding_basis = liquidity.minus(risk_free);
        for (name, diff) in [("bond - liquidity", &default_premium), ("liquidity - risk_free", &funding_basis)] {
            if let Some((t, z)) = diff.nodes().find(|&(_, z)| z < -1e-12) {
                return Err(Error::validation(format!(
                    "{name} must be nonnegative; zero-rate difference {z} at t={t}"
                )));
            }
        }
        Ok(PartyCurves {
            bond,
            liquidity,
            hazard,
            recovery,
        })
    }

    /// Zero-recovery identity: liquidity = bond − hazard.
    pub fn from_hazard(bond: RateCurve, hazard: RateCurve, risk_free: &RateCurve) -> Result<Self> {
        let liquidity = bond.minus(&hazard).with_label(format!("liquidity({})", bond.label()));
        Self::new(bond, liquidity, hazard, 0.0, risk_free)
    }

    /// Flat curves from spreads over a flat-or-not risk-free curve.
    pub fn from_spreads(risk_free: &RateCurve, bond_spread: f64, hazard: f64) -> Result<Self> {
        let bond = risk_free.shifted(bond_spread).with_label("bond");
        Self::from_hazard(bond, RateCurve::flat("hazard", hazard), risk_free)
    }

    /// Risk-free party: every curve equals `risk_free`, zero hazard.
    pub fn riskless(risk_free: &RateCurve) -> Self {
        PartyCurves {
            bond: risk_free.clone(),
            liquidity: risk_free.clone(),
            hazard: RateCurve::flat("hazard", 0.0),
            recovery: 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node_lookup_and_flat_extrapolation() {
        let c = RateCurve::new("ois", &[(1.0, 0.04)]).unwrap();
        assert_eq!(c.zero_rate(1.0).unwrap(), 0.04);
        assert!((c.zero_rate(10.0).unwrap() - 0.04).abs() < 1e-15);
        assert!((c.zero_rate(0.25).unwrap() - 0.04).abs() < 1e-15);
    }

    #[test]
    fn log_linear_midpoint() {
        // oracle: interpolate ln DF by hand
        let c = RateCurve::new("ois", &[(1.0, 0.02), (3.0, 0.04)]).unwrap();
        let df1 = (-0.02f64).exp();
        let df3 = (-0.12f64).exp();
        let df2 = (0.5 * df1.ln() + 0.5 * df3.ln()).exp();
        let expected = -df2.ln() / 2.0;
        assert!((c.zero_rate(2.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.035).abs() < 1e-15);
    }

    #[test]
    fn zero_rate_rejects_nonpositive_t() {
        let c = RateCurve::flat("x", 0.01);
        assert!(matches!(c.zero_rate(0.0), Err(Error::Domain(_))));
        assert!(matches!(c.zero_rate(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn discount_factor_flat_and_identity() {
        let c = RateCurve::flat("ois", 0.04);
        assert!((c.discount_factor(0.0, 1.0).unwrap() - (-0.04f64).exp()).abs() < 1e-15);
        assert!(((-0.04f64).exp() - 0.960789).abs() < 5e-7);
        assert_eq!(c.discount_factor(0.7, 0.7).unwrap(), 1.0);
        assert_eq!(c.discount_factor(0.0, 0.0).unwrap(), 1.0);
        assert!(matches!(c.discount_factor(2.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_bad_nodes() {
        assert!(RateCurve::new("x", &[]).is_err());
        assert!(RateCurve::new("x", &[(0.0, 0.01)]).is_err());
        assert!(RateCurve::new("x", &[(1.0, 0.01), (1.0, 0.02)]).is_err());
        assert!(RateCurve::new("x", &[(2.0, 0.01), (1.0, 0.02)]).is_err());
    }

    #[test]
    fn forwards_are_piecewise_constant() {
        let c = RateCurve::new("x", &[(1.0, 0.02), (3.0, 0.04)]).unwrap();
        assert!((c.forward(0.5) - 0.02).abs() < 1e-15);
        assert!((c.forward(1.0) - 0.05).abs() < 1e-15);
        assert!((c.forward(2.9) - 0.05).abs() < 1e-15);
        assert!((c.forward(3.0) - 0.04).abs() < 1e-15);
        assert!((c.integral(1.0, 3.0) - 0.10).abs() < 1e-15);
    }

    #[test]
    fn combine_is_exact_in_log_space() {
        let a = RateCurve::new("a", &[(0.5, 0.01), (5.0, 0.03)]).unwrap();
        let b = RateCurve::new("b", &[(2.0, 0.004), (10.0, 0.006)]).unwrap();
        let s = a.minus(&b);
        for &t in &[0.1, 0.5, 1.0, 2.0, 3.3, 5.0, 7.0, 10.0, 25.0] {
            let lhs = s.integral(0.0, t);
            let rhs = a.integral(0.0, t) - b.integral(0.0, t);
            assert!((lhs - rhs).abs() < 1e-14, "t={t}");
        }
    }

    #[test]
    fn party_curves_enforce_ordering() {
        let rf = RateCurve::flat("ois", 0.01);
        let p = PartyCurves::from_spreads(&rf, 0.03, 0.02).unwrap();
        assert!((p.liquidity.zero_rate(1.0).unwrap() - 0.02).abs() < 1e-15);
        // hazard larger than the bond spread pushes liquidity below risk-free
        assert!(PartyCurves::from_spreads(&rf, 0.01, 0.02).is_err());
        let bad = PartyCurves::new(
            rf.shifted(0.01),
            rf.shifted(0.02),
            RateCurve::flat("h", 0.0),
            0.0,
            &rf,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn csv_round_trip() {
        let c = RateCurve::new("ois", &[(0.25, 0.01), (10.0, 0.025)]).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("tenor_years,zero_rate\n"));
        let back = RateCurve::read_csv("ois", buf.as_slice()).unwrap();
        assert_eq!(back, c);
        assert!(RateCurve::read_csv("x", "t,z\n1,0.01\n".as_bytes()).is_err());
    }
}
