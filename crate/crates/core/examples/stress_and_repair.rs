//! Steepen the skew, keep two quotes fixed, and compare smiles before and
//! after repair in both modes.

use martingale_repair::market_data::{apply_stress, StressScenario};
use martingale_repair::repair::{repair, RepairConfig, RepairMode};

fn main() -> martingale_repair::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/");
    let surface = martingale_repair::io::read_surface(format!("{data}desk_m1.csv").as_ref())?.surface;
    let scenario: StressScenario = serde_json::from_str(&std::fs::read_to_string(format!("{data}steepen.json"))?)?;
    let stressed = apply_stress(&surface, &scenario)?;

    for mode in [RepairMode::LpExact, RepairMode::Entropic] {
        let config = RepairConfig {
            mode,
            epsilon: 0.05,
            e_tol: 1e-7,
            calibration_marks: stressed.calibration_marks.clone(),
            ..RepairConfig::default()
        };
        let result = repair(&stressed.surface, &config)?;
        println!("{mode:?}: arbitrage-free after repair = {}", result.after.feasible);
        let vols = (surface.implied_vols(), stressed.surface.implied_vols(), &result.repaired_vols);
        for (j, k) in surface.smiles()[0].strikes.iter().enumerate() {
            let show = |v: Option<f64>| v.map_or("   -   ".to_string(), |v| format!("{v:.5}"));
            println!(
                "  k={k:.4} vol {} -> stressed {} -> repaired {}",
                show(vols.0[0][j]),
                show(vols.1[0][j]),
                show(vols.2[0][j])
            );
        }
    }
    Ok(())
}
