//! Removal of static arbitrage from a surface of call prices.
//!
//! A quoted surface is normalized by forward and discount factor, turned
//! into a signed measure on a grid of price paths, and projected onto the
//! set of martingale measures that reprice it under a Wasserstein-1 cost.
//! The projection is solved exactly by linear programming on small grids, or
//! approximately by an entropic Sinkhorn iteration with several constraint
//! blocks.
//!
//! ```no_run
//! use martingale_repair::io::read_surface;
//! use martingale_repair::repair::{repair, RepairConfig};
//!
//! let surface = read_surface("quotes.csv".as_ref())?.surface;
//! let result = repair(&surface, &RepairConfig::default())?;
//! assert!(result.after.feasible);
//! # Ok::<(), martingale_repair::Error>(())
//! ```
//!
//! Modules, in pipeline order: [`market_data`], [`grid`],
//! [`signed_measure`], [`constraints`], [`lp`] and [`entropic`], tied
//! together by [`repair`]. [`io`] holds the CSV and JSON formats used by the
//! `mrepair` binary.

pub mod constraints;
pub mod entropic;
pub mod error;
pub mod grid;
pub mod io;
pub mod lp;
pub mod market_data;
pub mod repair;
pub mod signed_measure;

pub use error::{Error, Result};
