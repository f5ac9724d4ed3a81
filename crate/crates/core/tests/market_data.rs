mod common;

use approx::assert_relative_eq;
use proptest::prelude::*;

use martingale_repair::io;
use martingale_repair::market_data::{
    apply_stress, bs_call_price, denormalize, fit_curve, implied_vol, normalize, parse_quotes, StressBand, StressScenario,
};

use common::*;

#[test]
fn desk_quotes_normalize_and_round_trip() {
    let text = std::fs::read_to_string(data_path("desk_m1.csv")).unwrap();
    let quotes = parse_quotes(&text).unwrap();
    let (curve, fits) = fit_curve(&quotes).unwrap();
    // generated with spot 100, rate 3%, dividend yield 1%, T = 0.25
    assert_relative_eq!(fits[0].forward, 100.0 * (0.02f64 * 0.25).exp(), max_relative = 1e-6);
    assert_relative_eq!(fits[0].discount, (-0.03f64 * 0.25).exp(), max_relative = 1e-6);
    let surface = normalize(&quotes, &curve).unwrap();
    let back = denormalize(&surface, &curve).unwrap();
    for (node, q) in back.iter().zip(&quotes) {
        assert_relative_eq!(node.strike, q.strike, max_relative = 1e-12);
        assert_relative_eq!(node.call, q.call_mid, max_relative = 1e-12);
    }
}

#[test]
fn atm_thirty_percent_scales_in_band_vols() {
    let surface = desk_m1();
    let scenario = StressScenario {
        bands: vec![StressBand {
            maturity: None,
            k_min: Some(0.975),
            k_max: Some(1.025),
            vol_multiplier: 1.3,
        }],
        calibration_marks: Vec::new(),
    };
    let stressed = apply_stress(&surface, &scenario).unwrap();
    assert_eq!(stressed.stressed_nodes, 3);
    let (before, after) = (surface.implied_vols(), stressed.surface.implied_vols());
    for (j, &k) in surface.smiles()[0].strikes.iter().enumerate() {
        let (b, a) = (before[0][j].unwrap(), after[0][j].unwrap());
        if (0.975..=1.025).contains(&k) {
            assert_relative_eq!(a, 1.3 * b, max_relative = 1e-9);
        } else {
            assert_eq!(surface.smiles()[0].prices[j], stressed.surface.smiles()[0].prices[j]);
        }
    }
}

#[test]
fn surface_csv_round_trips_through_text() {
    let surface = desk_m2();
    let text = io::surface_csv(&surface);
    let again = io::parse_surface(&text).unwrap();
    for (a, b) in surface.smiles().iter().zip(again.smiles()) {
        for (x, y) in a.prices.iter().zip(&b.prices) {
            assert_relative_eq!(x, y, max_relative = 1e-11);
        }
    }
}

proptest! {
    #[test]
    fn implied_vol_inverts_black_scholes(k in 0.7f64..1.4, vol in 0.05f64..1.0, t in 0.05f64..2.0) {
        let c = bs_call_price(k, vol, t);
        let time_value = c - (1.0 - k).max(0.0);
        // only nodes whose time value is well above rounding are invertible
        prop_assume!(time_value > 1e-8);
        let v = implied_vol(k, c, t).unwrap();
        prop_assert!((v - vol).abs() <= 1e-6 * vol.max(1.0), "k={} vol={} got {}", k, vol, v);
    }

    #[test]
    fn call_price_is_decreasing_and_convex_in_strike(vol in 0.05f64..0.8, t in 0.05f64..2.0) {
        let ks: Vec<f64> = (0..21).map(|i| 0.8 + 0.02 * i as f64).collect();
        let cs: Vec<f64> = ks.iter().map(|&k| bs_call_price(k, vol, t)).collect();
        for w in cs.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-15);
        }
        for w in cs.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-14);
        }
    }
}
