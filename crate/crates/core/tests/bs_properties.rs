use proptest::prelude::*;
use skewlab_core::{
    bs_log_otm_price, bs_otm_price, bs_price, bs_vega, d_plus_minus, implied_vol,
    implied_vol_log_otm, implied_vol_otm, BSInputs,
};

/// 10 x 10 x 10 grid: vol linear on [0.05, 1], strike/spot and tau
/// log-spaced on [0.5, 2] and [1/252, 2].
fn property_grid() -> Vec<(f64, f64, f64)> {
    let lin = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / 9.0;
    let geo = |a: f64, b: f64, i: usize| a * (b / a).powf(i as f64 / 9.0);
    let mut g = Vec::with_capacity(1000);
    for i in 0..10 {
        for j in 0..10 {
            for l in 0..10 {
                g.push((
                    lin(0.05, 1.0, i),
                    geo(0.5, 2.0, j),
                    geo(1.0 / 252.0, 2.0, l),
                ));
            }
        }
    }
    g
}

#[test]
fn log_price_round_trip_over_whole_grid() {
    let t0 = std::time::Instant::now();
    let mut worst = 0.0f64;
    for (v, m, tau) in property_grid() {
        let b = BSInputs::new(1.0, m, v, tau).unwrap();
        let iv = implied_vol_log_otm(bs_log_otm_price(&b), 1.0, m, tau).unwrap();
        worst = worst.max((iv - v).abs() / v);
    }
    assert!(worst < 1e-8, "worst relative error {worst:e}");
    assert!(t0.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn price_round_trip_where_representable() {
    let mut checked = 0;
    for (v, m, tau) in property_grid() {
        let b = BSInputs::new(1.0, m, v, tau).unwrap();
        let p = bs_otm_price(&b);
        if p < f64::MIN_POSITIVE {
            // the exact price is below the smallest normal double
            assert!(bs_log_otm_price(&b) < f64::MIN_POSITIVE.ln() + 1.0);
            continue;
        }
        checked += 1;
        let iv = implied_vol_otm(p, 1.0, m, tau).unwrap();
        assert!((iv - v).abs() < 1e-8 * v, "{v} {m} {tau}: {iv}");
        // out-of-the-money calls go through the call-price entry point unchanged
        if m >= 1.0 {
            assert_eq!(implied_vol(bs_price(&b), 1.0, m, tau).unwrap(), iv);
        }
    }
    assert!(checked > 900);
}

#[test]
fn price_residual_within_tolerance() {
    for (v, m, tau) in property_grid() {
        let b = BSInputs::new(1.0, m, v, tau).unwrap();
        let price = bs_price(&b);
        if let Ok(iv) = implied_vol(price, 1.0, m, tau) {
            let back = bs_price(&b.with_vol(iv).unwrap());
            assert!((back - price).abs() <= 1e-10);
        }
    }
}

fn inputs() -> impl Strategy<Value = BSInputs> {
    (0.05f64..1.0, 0.5f64..2.0, 1.0 / 252.0..2.0f64)
        .prop_map(|(v, m, t)| BSInputs::new(1.0, m, v, t).unwrap())
}

proptest! {
    #[test]
    fn price_within_bounds(b in inputs()) {
        let p = bs_price(&b);
        prop_assert!(p >= (b.spot() - b.strike()).max(0.0));
        prop_assert!(p < b.spot());
    }

    #[test]
    fn price_increases_in_vol(b in inputs(), dv in 0.01f64..0.5) {
        let hi = b.with_vol(b.vol() + dv).unwrap();
        prop_assert!(bs_otm_price(&hi) > bs_otm_price(&b) || bs_otm_price(&b) == 0.0);
        prop_assert!(bs_log_otm_price(&hi) > bs_log_otm_price(&b));
    }

    #[test]
    fn price_decreases_in_strike(b in inputs(), bump in 1.001f64..1.5) {
        let k = BSInputs::new(b.spot(), b.strike() * bump, b.vol(), b.tau()).unwrap();
        let (p0, p1) = (bs_price(&b), bs_price(&k));
        prop_assert!(p1 < p0 || (p0 == 0.0 && p1 == 0.0));
    }

    #[test]
    fn d_identities(b in inputs()) {
        let (dp, dm) = d_plus_minus(&b);
        let s = b.vol() * b.tau().sqrt();
        // relative to the size of the terms, which cancel when |d| >> s
        prop_assert!(((dp - dm) - s).abs() <= 1e-12 * s.max(dp.abs()).max(dm.abs()));
        let lhs = dp * dp - dm * dm;
        let rhs = 2.0 * (b.spot() / b.strike()).ln();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(dp * dp).max(dm * dm));
    }

    #[test]
    fn vega_matches_central_difference(b in inputs()) {
        // call and put share vega; the out-of-the-money price avoids
        // cancelling against the intrinsic value
        let h = 1e-5;
        let up = bs_otm_price(&b.with_vol(b.vol() + h).unwrap());
        let dn = bs_otm_price(&b.with_vol(b.vol() - h).unwrap());
        let fd = (up - dn) / (2.0 * h);
        let vega = bs_vega(&b);
        // leading truncation of the difference, h^2/6 * d3C/dvol3 / vega
        let (dp, dm) = d_plus_minus(&b);
        let trunc = (h * dp * dm / b.vol()).powi(2) / 6.0;
        prop_assume!(vega > 1e-6 && trunc < 1e-7);
        prop_assert!((fd - vega).abs() <= 1e-6 * vega, "fd {} vega {}", fd, vega);
    }
}
