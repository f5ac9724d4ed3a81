//! Entropic transport cost across decreasing epsilon, warm-started, against
//! the exact LP value.

use martingale_repair::entropic::{epsilon_sweep, EntropicProblem};
use martingale_repair::lp::{solve_p_prime, LpOptions};
use martingale_repair::market_data::apply_stress;
use martingale_repair::repair::{prepare, RepairConfig};

fn main() -> martingale_repair::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/");
    let surface = martingale_repair::io::read_surface(format!("{data}desk_m1.csv").as_ref())?.surface;
    let scenario = serde_json::from_str(&std::fs::read_to_string(format!("{data}atm_up20.json"))?)?;
    let stressed = apply_stress(&surface, &scenario)?.surface;
    let inputs = prepare(&stressed, &[], &RepairConfig::default())?;

    let exact = solve_p_prime(&inputs.distance, &inputs.nu, &inputs.system, &LpOptions::default())?;
    let problem = EntropicProblem::new(inputs.system, &inputs.nu)?;
    let points = epsilon_sweep(&inputs.distance, &problem, &[1.0, 0.3, 0.1, 0.03, 0.01], 1e-7, 200_000, true)?;
    println!("{:>8} {:>14} {:>8}", "eps", "cost", "sweeps");
    for p in &points {
        match p.cost {
            Some(cost) => println!("{:>8} {cost:>14.10} {:>8}", p.epsilon, p.sweeps),
            None => println!("{:>8} failed: {}", p.epsilon, p.error.as_deref().unwrap_or("")),
        }
    }
    println!("{:>8} {:>14.10}", "LP", exact.value);
    Ok(())
}
