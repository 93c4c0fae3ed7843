use colxva::csa::CollateralState;
use colxva::curves::{PartyCurves, RateCurve};
use colxva::discounting::{CollateralMode, EffectiveRateSpec};
use colxva::exposure::ExposureProfile;
use colxva::xva::decompose_default;
use proptest::prelude::*;

fn profile(sign: f64, scale: f64, decay: f64, years: usize) -> ExposureProfile {
    let times: Vec<f64> = (0..=12 * years).map(|m| m as f64 / 12.0).collect();
    let horizon = years as f64;
    let values: Vec<f64> = times.iter().map(|t| sign * scale * (-decay * t).exp() * (horizon - t + 0.1)).collect();
    ExposureProfile::from_values(times, &values, 1.0).unwrap()
}

fn spec(rf: f64, b: (f64, f64), c: (f64, f64), eta: f64, chi: f64, repo: f64, mode: CollateralMode) -> EffectiveRateSpec {
    let r = RateCurve::flat("ois", rf);
    EffectiveRateSpec::new(
        PartyCurves::from_spreads(&r, b.0, b.0 * b.1).unwrap(),
        PartyCurves::from_spreads(&r, c.0, c.0 * c.1).unwrap(),
        r.clone(),
        CollateralState::symmetric(eta, chi).unwrap(),
        mode,
    )
    .unwrap()
    .with_repo_rate(r.shifted(repo))
    .with_cash_rate(r.shifted(repo))
}

fn mode() -> impl Strategy<Value = CollateralMode> {
    prop_oneof![
        Just(CollateralMode::Uncollateralized),
        Just(CollateralMode::CashComingled),
        Just(CollateralMode::CashSegregated),
        Just(CollateralMode::NonCash),
        Just(CollateralMode::InitialMargin),
    ]
}

proptest! {
    #[test]
    fn components_add_up(
        rf in 0.0f64..0.05,
        b in (0.0f64..0.05, 0.0f64..1.0),
        c in (0.0f64..0.05, 0.0f64..1.0),
        eta in 0.0f64..=1.0,
        chi in 0.0f64..=1.0,
        repo in 0.0f64..0.02,
        mode in mode(),
        scale in 0.1f64..1000.0,
        decay in -0.3f64..0.3,
    ) {
        // hybrid: sign flips at t = 2
        let times: Vec<f64> = (0..=48).map(|m| m as f64 / 12.0).collect();
        let values: Vec<f64> = times.iter().map(|t| scale * (2.0 - t) * (-decay * t).exp()).collect();
        let p = ExposureProfile::from_values(times, &values, 1.0).unwrap();
        let f = decompose_default(&p, &spec(rf, b, c, eta, chi, repo, mode)).unwrap().value;
        let terms = [f.cva, f.dva, f.cfa, f.dfa, f.lva, f.xva];
        let size = terms.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let residual = f.cva - f.dva + f.cfa - f.dfa + f.lva - f.xva;
        prop_assert!(residual.abs() <= 1e-12 * size.max(f64::MIN_POSITIVE));
        prop_assert!((f.cra - (f.cva - f.dva + f.cfa - f.dfa)).abs() <= 1e-12 * size.max(f64::MIN_POSITIVE));
        prop_assert_eq!(f.npv, p.mtm0 - f.xva);
    }

    #[test]
    fn collateralization_trades_credit_for_liquidity(
        rf in 0.0f64..0.04,
        b in (0.0f64..0.05, 0.0f64..1.0),
        c in (0.0f64..0.05, 0.0f64..1.0),
        chi in 0.0f64..=1.0,
        repo in 0.0f64..0.02,
        payable in any::<bool>(),
        scale in 1.0f64..100.0,
        decay in 0.0f64..0.5,
    ) {
        let p = profile(if payable { -1.0 } else { 1.0 }, scale, decay, 5);
        let figs: Vec<_> = (0..=10)
            .map(|k| decompose_default(&p, &spec(rf, b, c, k as f64 / 10.0, chi, repo, CollateralMode::NonCash)).unwrap().value)
            .collect();
        prop_assert_eq!(figs[0].lva, 0.0);
        let full = figs[10];
        prop_assert_eq!([full.cva, full.dva, full.cfa, full.dfa, full.cra], [0.0; 5]);
        prop_assert_eq!(full.xva, full.lva);
        for w in figs.windows(2) {
            prop_assert!(w[1].cra.abs() <= w[0].cra.abs() + 1e-12);
            prop_assert!(w[1].lva.abs() >= w[0].lva.abs() - 1e-12);
        }
    }

    #[test]
    fn liquidity_cost_on_receivables_benefit_on_payables(
        rf in 0.0f64..0.04,
        spreads in (0.0f64..0.05, 0.0f64..1.0),
        eta in 0.0f64..=1.0,
        chi in 0.0f64..=1.0,
        repo in 0.0f64..0.02,
        scale in 1.0f64..100.0,
    ) {
        let rates = spec(rf, spreads, spreads, eta, chi, repo, CollateralMode::NonCash);
        let cost = decompose_default(&profile(1.0, scale, 0.1, 5), &rates).unwrap().value.lva;
        let benefit = decompose_default(&profile(-1.0, scale, 0.1, 5), &rates).unwrap().value.lva;
        prop_assert!(cost >= 0.0);
        prop_assert!(benefit <= 0.0);
    }
}

#[test]
fn flat_receivable_matches_closed_form_adjustment() {
    // epe ≡ 1 on [0, 2], C at r + 3% with 2% hazard, uncollateralized:
    // xva = ∫ 0.03 e^{-(r + 0.03) t} dt
    let times: Vec<f64> = (0..=24).map(|m| m as f64 / 12.0).collect();
    let p = ExposureProfile::new(times, vec![1.0; 25], vec![0.0; 25], 1.0, 1.0).unwrap();
    let s = spec(0.01, (0.0, 0.0), (0.03, 2.0 / 3.0), 0.0, 1.0, 0.0, CollateralMode::Uncollateralized);
    let f = decompose_default(&p, &s).unwrap().value;
    let expected = 0.03 / 0.04 * (1.0 - (-0.04f64 * 2.0).exp());
    assert!((f.xva - expected).abs() < 1e-14, "{} vs {expected}", f.xva);
    let cva = 0.02 / 0.04 * (1.0 - (-0.04f64 * 2.0).exp());
    assert!((f.cva - cva).abs() < 1e-14);
}
