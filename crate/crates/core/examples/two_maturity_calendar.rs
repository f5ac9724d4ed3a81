//! A synthetic two-maturity surface whose later smile sits below the earlier
//! one. The repaired measure couples both maturities as a martingale.

use martingale_repair::constraints::detect_arbitrage;
use martingale_repair::market_data::synthetic_surface;
use martingale_repair::repair::{repair, RepairConfig};

fn main() -> martingale_repair::Result<()> {
    let strikes = vec![0.9, 0.95, 1.0, 1.05, 1.1];
    // total variance falls between the two dates: calendar arbitrage
    let surface = synthetic_surface(&[0.25, 0.5], &[strikes.clone(), strikes], |i, _| if i == 0 { 0.3 } else { 0.18 })?;
    let report = detect_arbitrage(&surface);
    println!("calendar violations before: {}", report.violations.len());

    let result = repair(&surface, &RepairConfig::default())?;
    println!("after: arbitrage-free = {}, W1 = {:.6e}", result.after.feasible, result.w1_value.unwrap_or(f64::NAN));
    for (smile, vols) in result.repaired.smiles().iter().zip(&result.repaired_vols) {
        let vols: Vec<String> = vols.iter().map(|v| v.map_or("-".into(), |v| format!("{v:.4}"))).collect();
        println!("  T={} vols [{}]", smile.maturity, vols.join(", "));
    }
    let atoms = result.theta.len();
    println!("paths with mass: {} of {}", result.mu.iter().filter(|w| **w > 1e-12).count(), atoms * atoms);
    Ok(())
}
