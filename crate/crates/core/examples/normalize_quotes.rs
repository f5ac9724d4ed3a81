//! Fit forwards and discount factors from call/put mids by put-call parity,
//! then print the normalized smile.

use martingale_repair::market_data::{fit_curve, normalize, parse_quotes};

fn main() -> martingale_repair::Result<()> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/desk_m1.csv"))?;
    let quotes = parse_quotes(&text)?;
    let (curve, fits) = fit_curve(&quotes)?;
    for (t, fit) in martingale_repair::market_data::quote_maturities(&quotes).iter().zip(&fits) {
        println!("T={t} forward={:.6} discount={:.6} rms={:.2e}", fit.forward, fit.discount, fit.residual_rms);
    }
    let surface = normalize(&quotes, &curve)?;
    for smile in surface.smiles() {
        for (k, c) in smile.strikes.iter().zip(&smile.prices) {
            println!("  k={k:.5} c={c:.6}");
        }
    }
    Ok(())
}
