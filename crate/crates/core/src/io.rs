//! Reading surfaces and writing run artifacts.
//!
//! All numbers are written with 12 significant digits and every table is
//! produced in a fixed order, so identical runs give identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constraints::{ArbitrageReport, LpCheck, Violation, ViolationKind};
use crate::entropic::{HistoryRecord, SweepPoint};
use crate::error::{Error, Result};
use crate::grid::{PathIndexer, Theta};
use crate::market_data::{self, MarketCurve, NormalizedSurface, ParityFit, Smile};
use crate::repair::{RepairConfig, RepairResult};

/// Shortest decimal that round-trips `x` rounded to 12 significant digits.
pub fn fmt12(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded = round12(x);
    if (1e-6..1e15).contains(&rounded.abs()) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt12).unwrap_or_default()
}

fn round12(x: f64) -> f64 {
    if x.is_finite() && x != 0.0 {
        format!("{x:.11e}").parse().unwrap_or(x)
    } else {
        x
    }
}

/// A surface together with the curve it was normalized with, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSurface {
    pub surface: NormalizedSurface,
    pub curve: Option<MarketCurve>,
    pub fits: Vec<ParityFit>,
}

#[derive(Debug, Deserialize)]
struct SurfaceRow {
    maturity_years: f64,
    k: f64,
    c: f64,
}

/// Parse a normalized surface CSV (`maturity_years,k,c[,vol]`).
pub fn parse_surface(content: &str) -> Result<NormalizedSurface> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(content.as_bytes());
    let mut smiles: Vec<Smile> = Vec::new();
    for (i, row) in reader.deserialize::<SurfaceRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            line: i + 2,
            message: e.to_string(),
        })?;
        match smiles.last_mut() {
            Some(s) if s.maturity == row.maturity_years => {
                s.strikes.push(row.k);
                s.prices.push(row.c);
            }
            _ => smiles.push(Smile {
                maturity: row.maturity_years,
                strikes: vec![row.k],
                prices: vec![row.c],
            }),
        }
    }
    if smiles.is_empty() {
        return Err(Error::EmptyInput("surface file has no rows".into()));
    }
    NormalizedSurface::new(smiles)
}

/// Read either a quote file (normalized through put-call parity) or a
/// normalized surface file; the header decides which.
pub fn load_surface(content: &str) -> Result<LoadedSurface> {
    let header = content.lines().next().ok_or_else(|| Error::EmptyInput("surface file is empty".into()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.contains(&"call_mid") {
        let quotes = market_data::parse_quotes(content)?;
        let (curve, fits) = market_data::fit_curve(&quotes)?;
        let surface = market_data::normalize(&quotes, &curve)?;
        Ok(LoadedSurface {
            surface,
            curve: Some(curve),
            fits,
        })
    } else if columns.contains(&"k") && columns.contains(&"c") {
        Ok(LoadedSurface {
            surface: parse_surface(content)?,
            curve: None,
            fits: Vec::new(),
        })
    } else {
        Err(Error::Parse {
            line: 1,
            message: format!("unrecognized header `{header}`"),
        })
    }
}

pub fn read_surface(path: &Path) -> Result<LoadedSurface> {
    load_surface(&std::fs::read_to_string(path)?)
}

/// `maturity_years,k,c,vol`, vol left empty where it is undefined.
pub fn surface_csv(surface: &NormalizedSurface) -> String {
    let vols = surface.implied_vols();
    let mut out = String::from("maturity_years,k,c,vol\n");
    for (s, v) in surface.smiles().iter().zip(&vols) {
        for j in 0..s.len() {
            let _ = writeln!(out, "{},{},{},{}", fmt12(s.maturity), fmt12(s.strikes[j]), fmt12(s.prices[j]), fmt_opt(v[j]));
        }
    }
    out
}

/// `path_index,k_1,..,k_m,weight`, one row per path, 1-based path index.
pub fn measure_csv(mu: &[f64], theta: &Theta, periods: usize) -> Result<String> {
    let idx = PathIndexer::new(theta.len(), periods)?;
    if mu.len() != idx.num_paths() {
        return Err(Error::Index(format!("measure has {} entries, grid has {} paths", mu.len(), idx.num_paths())));
    }
    let mut out = String::from("path_index");
    for i in 1..=periods {
        let _ = write!(out, ",k_{i}");
    }
    out.push_str(",weight\n");
    for (p, &w) in mu.iter().enumerate() {
        let _ = write!(out, "{}", p + 1);
        for x in idx.path(theta, p)? {
            let _ = write!(out, ",{}", fmt12(x));
        }
        let _ = writeln!(out, ",{}", fmt12(w));
    }
    Ok(out)
}

/// `n,substep,E,primal_kl,duality_gap`.
pub fn history_csv(history: &[HistoryRecord]) -> String {
    let mut out = String::from("n,substep,E,primal_kl,duality_gap\n");
    for h in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            h.sweep,
            h.substep,
            fmt12(h.criterion),
            fmt12(h.primal_kl),
            fmt12(h.duality_gap)
        );
    }
    out
}

/// Marginal sticks: `maturity_index,maturity_years,k,input_weight,repaired_weight`.
pub fn marginals_csv(result: &RepairResult, maturities: &[f64]) -> String {
    let mut out = String::from("maturity_index,maturity_years,k,input_weight,repaired_weight\n");
    for (i, (input, repaired)) in result.input_marginals.iter().zip(&result.marginals).enumerate() {
        for (j, &k) in result.theta.strikes().iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{},{}", i + 1, fmt12(maturities[i]), fmt12(k), fmt12(input[j]), fmt12(repaired[j]));
        }
    }
    out
}

/// Smiles before, after stress (if any) and after repair, in price and vol.
pub fn smiles_csv(original: &NormalizedSurface, stressed: Option<&NormalizedSurface>, repaired: &NormalizedSurface) -> String {
    let stressed_or = stressed.unwrap_or(original);
    let (v0, v1, v2) = (original.implied_vols(), stressed_or.implied_vols(), repaired.implied_vols());
    let mut out = String::from("maturity_years,k,c_before,c_stressed,c_after,vol_before,vol_stressed,vol_after\n");
    for (i, s) in original.smiles().iter().enumerate() {
        let cs = &stressed_or.smiles()[i].prices;
        let cr = &repaired.smiles()[i].prices;
        for j in 0..s.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                fmt12(s.maturity),
                fmt12(s.strikes[j]),
                fmt12(s.prices[j]),
                fmt12(cs[j]),
                fmt12(cr[j]),
                fmt_opt(v0[i][j]),
                fmt_opt(v1[i][j]),
                fmt_opt(v2[i][j])
            );
        }
    }
    out
}

/// `epsilon,cost,E,converged,sweeps,error`, with the exact value as a final
/// `lp` row when it was computed.
pub fn sweep_csv(points: &[SweepPoint], lp_value: Option<f64>) -> String {
    let mut out = String::from("epsilon,cost,E,converged,sweeps,error\n");
    for p in points {
        let error = p.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt12(p.epsilon),
            fmt_opt(p.cost),
            fmt_opt(p.criterion),
            p.converged,
            p.sweeps,
            error
        );
    }
    if let Some(v) = lp_value {
        let _ = writeln!(out, "lp,{},0,true,0,", fmt12(v));
    }
    out
}

/// A violation located in original units when a curve is known.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationRecord {
    pub kind: ViolationKind,
    pub maturity_index: Option<usize>,
    pub maturity_years: Option<f64>,
    pub other_maturity_index: Option<usize>,
    pub moneyness: Vec<f64>,
    /// Strikes in currency, when a forward is known.
    pub strikes: Option<Vec<f64>>,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRecord {
    pub arbitrage_free: bool,
    pub tolerance: f64,
    pub kmax: Option<f64>,
    pub lp_check: LpCheck,
    pub violations: Vec<ViolationRecord>,
}

impl ReportRecord {
    pub fn new(report: &ArbitrageReport, maturities: &[f64], curve: Option<&MarketCurve>) -> Self {
        let violations = report
            .violations
            .iter()
            .map(|v: &Violation| {
                let forward = v
                    .maturity_index
                    .and_then(|i| maturities.get(i))
                    .and_then(|t| curve.and_then(|c| c.get(*t)))
                    .map(|p| p.forward);
                ViolationRecord {
                    kind: v.kind,
                    maturity_index: v.maturity_index.map(|i| i + 1),
                    maturity_years: v.maturity.map(round12),
                    other_maturity_index: v.other_maturity_index.map(|i| i + 1),
                    moneyness: v.strikes.iter().copied().map(round12).collect(),
                    strikes: forward.map(|f| v.strikes.iter().map(|k| round12(k * f)).collect()),
                    magnitude: round12(v.magnitude),
                }
            })
            .collect();
        Self {
            arbitrage_free: report.feasible,
            tolerance: report.tolerance,
            kmax: report.kmax.map(round12),
            lp_check: match &report.lp_check {
                LpCheck::Infeasible { infeasibility } => LpCheck::Infeasible {
                    infeasibility: round12(*infeasibility),
                },
                other => other.clone(),
            },
            violations,
        }
    }
}

/// Price change at one quoted node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeChange {
    pub maturity_index: usize,
    pub maturity_years: f64,
    pub moneyness: f64,
    pub strike: Option<f64>,
    pub c_before: f64,
    pub c_after: f64,
    /// `after - before` in currency, when the curve is known.
    pub price_change: Option<f64>,
    pub vol_before: Option<f64>,
    pub vol_after: Option<f64>,
    pub calibrated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectiveRecord {
    pub w1_value: Option<f64>,
    pub kl_value: Option<f64>,
    pub transport_cost: Option<f64>,
    pub duality_gap: Option<f64>,
    pub polish_l1: Option<f64>,
    pub converged: Option<bool>,
    pub sweeps: Option<usize>,
    pub criterion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepairRecord {
    pub unchanged: bool,
    pub grid_size: usize,
    pub kmax: f64,
    pub objective: ObjectiveRecord,
    pub before: ReportRecord,
    pub after: ReportRecord,
    pub nodes: Vec<NodeChange>,
}

impl RepairRecord {
    /// `input` is the surface handed to the repair (after any stress).
    pub fn new(result: &RepairResult, input: &NormalizedSurface, curve: Option<&MarketCurve>) -> Self {
        let maturities = input.maturities();
        let before_vols = input.implied_vols();
        let mut nodes = Vec::with_capacity(input.num_nodes());
        for (i, (s, r)) in input.smiles().iter().zip(result.repaired.smiles()).enumerate() {
            let point = curve.and_then(|c| c.get(s.maturity));
            for j in 0..s.len() {
                nodes.push(NodeChange {
                    maturity_index: i + 1,
                    maturity_years: round12(s.maturity),
                    moneyness: round12(s.strikes[j]),
                    strike: point.map(|p| round12(s.strikes[j] * p.forward)),
                    c_before: round12(s.prices[j]),
                    c_after: round12(r.prices[j]),
                    price_change: point.map(|p| round12((r.prices[j] - s.prices[j]) * p.forward * p.discount)),
                    vol_before: before_vols[i][j].map(round12),
                    vol_after: result.repaired_vols[i][j].map(round12),
                    calibrated: result.calibration.iter().any(|t| t.maturity == i && t.node == j),
                });
            }
        }
        let e = result.entropic.as_ref();
        Self {
            unchanged: result.unchanged,
            grid_size: result.theta.len(),
            kmax: round12(result.theta.kmax()),
            objective: ObjectiveRecord {
                w1_value: result.w1_value.map(round12),
                kl_value: e.map(|e| round12(e.kl_value)),
                transport_cost: e.map(|e| round12(e.transport_cost)),
                duality_gap: e.map(|e| round12(e.duality_gap)),
                polish_l1: e.map(|e| round12(e.polish_l1)),
                converged: e.map(|e| e.report.converged),
                sweeps: e.map(|e| e.report.sweeps),
                criterion: e.map(|e| round12(e.report.criterion)),
            },
            before: ReportRecord::new(&result.before, &maturities, curve),
            after: ReportRecord::new(&result.after, &maturities, curve),
            nodes,
        }
    }
}

/// Echo of a run's inputs, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub input: String,
    pub scenario: Option<String>,
    pub calibration: Option<String>,
    pub config: Option<RepairConfig>,
    pub epsilons: Option<Vec<f64>>,
    pub output_dir: String,
    pub determinism: &'static str,
    pub tool_version: &'static str,
}

impl RunManifest {
    pub fn new(command: &str, input: &Path, output_dir: &Path) -> Self {
        Self {
            command: command.into(),
            input: input.display().to_string(),
            scenario: None,
            calibration: None,
            config: None,
            epsilons: None,
            output_dir: output_dir.display().to_string(),
            determinism: "no randomness and no timestamps; identical manifests give identical bytes",
            tool_version: env!("CARGO_PKG_VERSION"),
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(dir: &Path, name: &str, content: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), content)?;
    Ok(())
}
