//! Exact projection of the toy single-node surface, small enough to check
//! by hand.

use martingale_repair::io::read_surface;
use martingale_repair::repair::{repair, RepairConfig};

fn main() -> martingale_repair::Result<()> {
    let surface = read_surface(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/toy.csv").as_ref())?.surface;
    let result = repair(&surface, &RepairConfig::default())?;
    println!("grid {:?}", result.theta.strikes());
    println!("input marginal  {:?}", result.input_marginals[0]);
    println!("repaired marginal {:?}", result.marginals[0]);
    println!("W1 distance {:.12}", result.w1_value.unwrap_or(f64::NAN));
    for (before, after) in surface.smiles()[0].prices.iter().zip(&result.repaired.smiles()[0].prices) {
        println!("price {before} -> {after:.12}");
    }
    Ok(())
}
