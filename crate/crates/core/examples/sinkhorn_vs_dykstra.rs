//! The scaling iteration and explicit Dykstra projections produce the same
//! iterates.

use martingale_repair::entropic::{dykstra_run, EntropicProblem, GibbsKernel, Sinkhorn};
use martingale_repair::market_data::apply_stress;
use martingale_repair::repair::{prepare, RepairConfig};

fn main() -> martingale_repair::Result<()> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/");
    let surface = martingale_repair::io::read_surface(format!("{data}desk_m1.csv").as_ref())?.surface;
    let scenario = serde_json::from_str(&std::fs::read_to_string(format!("{data}atm_up20.json"))?)?;
    let stressed = apply_stress(&surface, &scenario)?.surface;
    let inputs = prepare(&stressed, &[], &RepairConfig::default())?;
    let problem = EntropicProblem::new(inputs.system, &inputs.nu)?;
    let kernel = GibbsKernel::new(&inputs.distance, 0.5)?;

    let sweeps = 20;
    let trace = dykstra_run(&kernel, &problem, sweeps)?;
    let mut solver = Sinkhorn::new(&kernel, &problem)?;
    for (n, blocks) in trace.iterates.iter().enumerate() {
        let mut gap: f64 = 0.0;
        for reference in blocks {
            solver.substep()?;
            gap = gap.max((solver.coupling() - reference).amax());
        }
        if n % 5 == 4 {
            println!("sweep {:>2}: max |sinkhorn - dykstra| = {gap:.2e}, E = {:.3e}", n + 1, problem.stopping_criterion(&solver.coupling()));
        }
    }
    Ok(())
}
