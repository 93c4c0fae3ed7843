use colxva::csa::CollateralAsset;
use colxva::curves::RateCurve;
use colxva::repo::{breakeven_spread, repo_curve, spread_curve, RepoModelParams, DEFAULT_TENORS};
use proptest::prelude::*;

fn params(roe: f64, hazard: f64, el: f64) -> RepoModelParams {
    let mut p = RepoModelParams::new(roe, RateCurve::new("mu0", &[(0.25, 0.001), (30.0, 0.005)]).unwrap()).unwrap();
    p.hazard = RateCurve::flat("hazard", hazard);
    p.expected_gap_loss = el;
    p
}

proptest! {
    #[test]
    fn spread_is_affine_in_capital_and_gap_loss(
        roe in 0.0f64..0.3,
        hazard in 0.0f64..0.1,
        ec in 0.0f64..0.1,
        el in 0.0f64..0.2,
        h in 1e-4f64..0.05,
        t in 0.1f64..30.0,
    ) {
        let p = params(roe, hazard, el);
        let base = breakeven_spread(&p, ec, t).unwrap();
        let d_ec = breakeven_spread(&p, ec + h, t).unwrap() - base;
        prop_assert!((d_ec - roe * h).abs() < 1e-14);
        let d_el = breakeven_spread(&params(roe, hazard, el + h), ec, t).unwrap() - base;
        prop_assert!((d_el - hazard * h).abs() < 1e-14);
    }
}

#[test]
fn ust10_to_bbb_short_end() {
    let asset = CollateralAsset::new("UST_10y", 1.0, 75.0, 0.02, 0.03, 0.0)
        .unwrap()
        .with_econ_capital([("AA", 0.0008), ("A", 0.0017), ("BBB", 0.004), ("BB", 0.008)]);
    let mut p = params(0.10, 0.0, 0.0);
    p.mu0_curve = RateCurve::flat("mu0", 0.001);
    let s = spread_curve(&p, &asset, "BBB", &DEFAULT_TENORS).unwrap();
    assert!((s.zero_rate(0.25).unwrap() - 0.0014).abs() < 1e-15);
    let ois = RateCurve::new("ois", &[(1.0, 0.02), (10.0, 0.03)]).unwrap();
    let r = repo_curve(&p, &ois, &asset, "BBB", &DEFAULT_TENORS).unwrap();
    for t in DEFAULT_TENORS {
        assert!((r.zero_rate(t).unwrap() - ois.zero_rate(t).unwrap() - 0.0014).abs() < 1e-15);
    }
    assert!(spread_curve(&p, &asset, "CCC", &DEFAULT_TENORS).is_err());
}
