//! Round trip Black-Scholes prices through the implied-vol inversion.

use martingale_repair::market_data::{bs_call_price, implied_vol};

fn main() -> martingale_repair::Result<()> {
    let t = 0.5;
    for k in [0.8, 0.9, 1.0, 1.1, 1.25] {
        let vol = 0.2 + 0.3 * (k - 1.0_f64).powi(2);
        let c = bs_call_price(k, vol, t);
        let back = implied_vol(k, c, t)?;
        println!("k={k:.2} vol={vol:.6} price={c:.8} implied={back:.6}");
    }
    // below intrinsic value there is no vol to find
    println!("{:?}", implied_vol(0.9, 0.05, t).unwrap_err().to_string());
    Ok(())
}
