//! Signed marginals read off the slope jumps of each smile, and the joint
//! signed measure that satisfies the martingale equations.

use martingale_repair::market_data::apply_stress;
use martingale_repair::repair::{prepare, RepairConfig};
use martingale_repair::signed_measure::{check_lemma_identity, smile_marginal};

fn main() -> martingale_repair::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/");
    let surface = martingale_repair::io::read_surface(format!("{data}desk_m2.csv").as_ref())?.surface;
    let scenario = serde_json::from_str(&std::fs::read_to_string(format!("{data}calendar_flatten.json"))?)?;
    let stressed = apply_stress(&surface, &scenario)?.surface;

    let kmax = 1.3;
    for smile in stressed.smiles() {
        let marginal = smile_marginal(smile, kmax)?;
        let (strikes, prices) = (smile.augmented_strikes(kmax), smile.augmented_prices());
        let worst = (0..=130)
            .map(|i| check_lemma_identity(&marginal, &strikes, &prices, i as f64 * 0.01))
            .fold(0.0, f64::max);
        println!(
            "T={} mass={:.12} mean={:.12} negative weight={:.3e} identity error={worst:.1e}",
            smile.maturity,
            marginal.total_mass(),
            marginal.mean(),
            marginal.weights.iter().filter(|w| **w < 0.0).sum::<f64>(),
        );
    }

    let inputs = prepare(&stressed, &[], &RepairConfig::default())?;
    println!(
        "joint measure on {} paths, residual {:.1e}, positive mass {:.6}",
        inputs.nu.nu.len(),
        inputs.system.residual(&inputs.nu.nu),
        inputs.nu.alpha
    );
    Ok(())
}
