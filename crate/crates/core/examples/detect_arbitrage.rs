//! Local checks plus the complete LP check on a clean and a stressed surface.

use martingale_repair::constraints::detect_arbitrage;
use martingale_repair::io::read_surface;
use martingale_repair::market_data::{apply_stress, StressBand, StressScenario};

fn main() -> martingale_repair::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/desk_m1.csv");
    let surface = read_surface(path.as_ref())?.surface;
    let clean = detect_arbitrage(&surface);
    println!("desk surface arbitrage-free: {} ({:?})", clean.feasible, clean.lp_check);

    let scenario = StressScenario {
        bands: vec![StressBand { maturity: None, k_min: Some(0.975), k_max: Some(1.025), vol_multiplier: 1.2 }],
        calibration_marks: Vec::new(),
    };
    let stressed = apply_stress(&surface, &scenario)?.surface;
    let report = detect_arbitrage(&stressed);
    println!("ATM vols x1.2 arbitrage-free: {}", report.feasible);
    for v in &report.violations {
        println!("  {:?} at k={:?} by {:.3e}", v.kind, v.strikes, v.magnitude);
    }
    Ok(())
}
