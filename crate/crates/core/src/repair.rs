//! End-to-end arbitrage removal.
//!
//! [`repair`] reads the signed marginals off the quoted smiles, builds a
//! joint signed measure `nu` on `Theta^m`, projects it onto the martingale
//! measures (optionally calibrated to marked nodes) and prices the quoted
//! strikes under the projected measure. Repaired prices therefore come from
//! an actual martingale and are free of static arbitrage by construction.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::constraints::{
    self, build_calibrated_system, build_joint_system, build_martingale_system, ArbitrageReport, CalibrationTarget,
    ConstraintSystem, DetectOptions, SparseRow,
};
use crate::entropic::{self, EntropicProblem, GibbsKernel, HistoryRecord, Sinkhorn, SinkhornReport};
use crate::error::{Error, Result};
use crate::grid::{self, build_theta, distance_matrix, CalibrationPoint, PathIndexer, Theta};
use crate::lp::{self, LpOptions, LpProblem, LpStatus};
use crate::market_data::{CalibrationMark, NormalizedSurface, Smile};
use crate::signed_measure::{self, build_joint, decompose, smile_marginal, JointSignedMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairMode {
    /// Exact Wasserstein projection by linear programming.
    LpExact,
    /// Entropy-regularized projection by Sinkhorn iterations.
    Entropic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepairConfig {
    pub mode: RepairMode,
    pub epsilon: f64,
    pub e_tol: f64,
    pub max_iters: usize,
    pub kmax_margin: f64,
    pub shift: f64,
    pub calibration_marks: Vec<CalibrationMark>,
    /// Tolerance of the arbitrage checks before and after repair.
    pub detect_tol: f64,
    /// Return arbitrage-free input unchanged instead of projecting it.
    pub skip_if_clean: bool,
    #[serde(skip)]
    pub lp: LpOptions,
}

impl Default for RepairConfig {
    fn default() -> Self {
        Self {
            mode: RepairMode::LpExact,
            epsilon: 1.0,
            e_tol: entropic::DEFAULT_E_TOL,
            max_iters: entropic::DEFAULT_MAX_ITERS,
            kmax_margin: grid::DEFAULT_KMAX_MARGIN,
            shift: signed_measure::DEFAULT_SHIFT,
            calibration_marks: Vec::new(),
            detect_tol: 1e-8,
            skip_if_clean: true,
            lp: LpOptions::default(),
        }
    }
}

impl RepairConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mode == RepairMode::Entropic && !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Parameter(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.e_tol > 0.0) {
            return Err(Error::Parameter(format!("e_tol must be > 0, got {}", self.e_tol)));
        }
        if !(self.shift > 0.0) || !self.shift.is_finite() {
            return Err(Error::InvalidShift(self.shift));
        }
        if !(self.kmax_margin > 0.0) || !self.kmax_margin.is_finite() {
            return Err(Error::Parameter(format!("k_max margin must be > 0, got {}", self.kmax_margin)));
        }
        if !(self.detect_tol > 0.0) {
            return Err(Error::Parameter("detection tolerance must be > 0".into()));
        }
        Ok(())
    }
}

/// Diagnostics of the entropic solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropicDiagnostics {
    pub epsilon: f64,
    pub report: SinkhornReport,
    /// `KL(M | G)` of the returned coupling.
    pub kl_value: f64,
    /// `<M, D>` of the returned coupling.
    pub transport_cost: f64,
    pub duality_gap: f64,
    /// l1 distance moved by the final exact feasibility correction.
    pub polish_l1: f64,
}

#[derive(Debug, Clone)]
pub struct RepairResult {
    pub theta: Theta,
    pub periods: usize,
    /// Martingale measure on `Theta^m` (flat path index).
    pub mu: Vec<f64>,
    /// Marginal of `mu` for each maturity, on `Theta`.
    pub marginals: Vec<Vec<f64>>,
    /// Signed marginals of the input, on `Theta`.
    pub input_marginals: Vec<Vec<f64>>,
    pub nu: Option<JointSignedMeasure>,
    pub repaired: NormalizedSurface,
    pub repaired_vols: Vec<Vec<Option<f64>>>,
    /// Wasserstein-1 distance between `mu` and `nu` (exact mode, or
    /// recomputed when the grid is small enough).
    pub w1_value: Option<f64>,
    pub entropic: Option<EntropicDiagnostics>,
    pub before: ArbitrageReport,
    pub after: ArbitrageReport,
    pub calibration: Vec<CalibrationTarget>,
    /// Set when the input was already arbitrage-free and returned as is.
    pub unchanged: bool,
}

impl RepairResult {
    pub fn history(&self) -> &[HistoryRecord] {
        self.entropic.as_ref().map_or(&[], |e| &e.report.history)
    }
}

fn calibration_targets(surface: &NormalizedSurface, marks: &[CalibrationMark]) -> Result<Vec<CalibrationTarget>> {
    let mut marks = marks.to_vec();
    marks.sort();
    marks.dedup();
    marks
        .into_iter()
        .map(|mark| {
            let smile = surface
                .smiles()
                .get(mark.maturity)
                .ok_or_else(|| Error::Index(format!("calibration maturity {} out of range", mark.maturity)))?;
            if mark.node >= smile.len() {
                return Err(Error::Index(format!(
                    "calibration node {} out of range for maturity {}",
                    mark.node, mark.maturity
                )));
            }
            Ok(CalibrationTarget {
                maturity: mark.maturity,
                node: mark.node,
                strike: smile.strikes[mark.node],
                price: smile.prices[mark.node],
            })
        })
        .collect()
}

/// Checks that the marked prices on their own admit a calibrated martingale.
fn check_calibration(surface: &NormalizedSurface, targets: &[CalibrationTarget], options: &DetectOptions) -> Result<()> {
    if targets.is_empty() {
        return Ok(());
    }
    let mut smiles = Vec::new();
    for (i, s) in surface.smiles().iter().enumerate() {
        let nodes: Vec<&CalibrationTarget> = targets.iter().filter(|t| t.maturity == i).collect();
        if nodes.is_empty() {
            continue;
        }
        smiles.push(Smile {
            maturity: s.maturity,
            strikes: nodes.iter().map(|t| t.strike).collect(),
            prices: nodes.iter().map(|t| t.price).collect(),
        });
    }
    let sub = NormalizedSurface::new(smiles)?;
    let report = constraints::detect_arbitrage_with(&sub, options);
    if !report.feasible {
        let kinds: Vec<String> = report.violations.iter().map(|v| format!("{:?}", v.kind)).collect();
        return Err(Error::InvalidCalibration(format!(
            "marked prices admit static arbitrage ({})",
            kinds.join(", ")
        )));
    }
    if let constraints::LpCheck::Skipped { reason } = &report.lp_check {
        return Err(Error::InvalidCalibration(format!("could not verify the marked prices: {reason}")));
    }
    Ok(())
}

/// Marginal of a measure on `Theta^m` for period `period`.
pub fn extract_marginal(mu: &[f64], atoms: usize, periods: usize, period: usize) -> Result<Vec<f64>> {
    let idx = PathIndexer::new(atoms, periods)?;
    if mu.len() != idx.num_paths() || period >= periods {
        return Err(Error::Index(format!("period {period} of a {periods}-period measure")));
    }
    let mut out = vec![0.0; atoms];
    for (p, &w) in mu.iter().enumerate() {
        out[idx.component(p, period)] += w;
    }
    Ok(out)
}

/// `sum_x (x - k)+ w(x)` over the grid.
pub fn price_from_marginal(theta: &Theta, weights: &[f64], k: f64) -> f64 {
    theta
        .strikes()
        .iter()
        .zip(weights)
        .map(|(&x, &w)| (x - k).max(0.0) * w)
        .sum()
}

/// Everything the projection solvers consume.
#[derive(Debug, Clone)]
pub struct ProjectionInputs {
    pub theta: Theta,
    pub periods: usize,
    pub distance: DMatrix<f64>,
    /// Signed marginals of the input, on `Theta`.
    pub input_marginals: Vec<Vec<f64>>,
    pub nu: JointSignedMeasure,
    /// Martingale rows, plus calibration rows when marks are given.
    pub system: ConstraintSystem,
}

/// Grid, distance, joint signed measure and constraint system for `surface`.
pub fn prepare(
    surface: &NormalizedSurface,
    calibration: &[CalibrationTarget],
    config: &RepairConfig,
) -> Result<ProjectionInputs> {
    let points: Vec<CalibrationPoint> = calibration.iter().map(|&t| t.into()).collect();
    let kmax = grid::choose_kmax(surface, &points, config.kmax_margin).map_err(|e| e.at_stage("k_max"))?;
    let theta = build_theta(surface, kmax).map_err(|e| e.at_stage("grid"))?;
    let periods = surface.num_maturities();
    let distance = distance_matrix(&theta, periods)?;
    let base = build_martingale_system(&theta, periods)?;

    let input_marginals: Vec<Vec<f64>> = surface
        .smiles()
        .iter()
        .map(|s| smile_marginal(s, kmax)?.on_theta(&theta))
        .collect::<Result<_>>()
        .map_err(|e| e.at_stage("signed marginals"))?;
    let joint_system = build_joint_system(&base, &input_marginals, &theta)?;
    let nu = build_joint(&input_marginals, &joint_system).map_err(|e| e.at_stage("joint measure"))?;
    let nu = decompose(&nu, config.shift)?;
    let system = build_calibrated_system(&base, calibration, &theta, periods)?;
    Ok(ProjectionInputs {
        theta,
        periods,
        distance,
        input_marginals,
        nu,
        system,
    })
}

/// Calibration targets for `config`, after checking that the marked prices
/// are themselves free of arbitrage.
pub fn calibration_for(surface: &NormalizedSurface, config: &RepairConfig) -> Result<Vec<CalibrationTarget>> {
    let calibration = calibration_targets(surface, &config.calibration_marks)?;
    check_calibration(surface, &calibration, &detect_options(config, Vec::new())).map_err(|e| e.at_stage("calibration"))?;
    Ok(calibration)
}

fn detect_options(config: &RepairConfig, extra_atoms: Vec<f64>) -> DetectOptions {
    DetectOptions {
        tol: config.detect_tol,
        lp: config.lp,
        kmax_margin: config.kmax_margin,
        extra_atoms,
    }
}

/// Project `surface` onto arbitrage-free prices.
pub fn repair(surface: &NormalizedSurface, config: &RepairConfig) -> Result<RepairResult> {
    config.validate()?;
    let before = constraints::detect_arbitrage_with(surface, &detect_options(config, Vec::new()));
    let calibration = calibration_for(surface, config)?;

    if config.skip_if_clean && before.feasible {
        if let (Some(theta), Some(witness)) = (&before.theta, &before.witness) {
            return unchanged(surface, theta.clone(), witness.clone(), before.clone(), calibration);
        }
    }

    let ProjectionInputs {
        theta,
        periods,
        distance,
        input_marginals,
        nu,
        system,
        ..
    } = prepare(surface, &calibration, config)?;

    let (mu, w1, entropic) = match config.mode {
        RepairMode::LpExact => {
            let sol = lp::solve_p_prime(&distance, &nu, &system, &config.lp).map_err(|e| e.at_stage("projection LP"))?;
            (sol.mu, Some(sol.value), None)
        }
        RepairMode::Entropic => {
            let (mu, diag) = entropic_projection(&distance, &nu, &system, config).map_err(|e| e.at_stage("entropic"))?;
            (mu, None, Some(diag))
        }
    };
    let w1 = match w1 {
        Some(v) => Some(v),
        None => wasserstein1(&mu, &nu.nu, &distance, &config.lp).ok(),
    };

    finish(surface, theta, periods, mu, input_marginals, Some(nu), w1, entropic, before, calibration, config)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    surface: &NormalizedSurface,
    theta: Theta,
    periods: usize,
    mu: Vec<f64>,
    input_marginals: Vec<Vec<f64>>,
    nu: Option<JointSignedMeasure>,
    w1_value: Option<f64>,
    entropic: Option<EntropicDiagnostics>,
    before: ArbitrageReport,
    calibration: Vec<CalibrationTarget>,
    config: &RepairConfig,
) -> Result<RepairResult> {
    let marginals: Vec<Vec<f64>> = (0..periods)
        .map(|i| extract_marginal(&mu, theta.len(), periods, i))
        .collect::<Result<_>>()?;
    let prices: Vec<Vec<f64>> = surface
        .smiles()
        .iter()
        .zip(&marginals)
        .map(|(s, w)| s.strikes.iter().map(|&k| price_from_marginal(&theta, w, k)).collect())
        .collect();
    let repaired = surface.with_prices(prices)?;
    let after = constraints::detect_arbitrage_with(&repaired, &detect_options(config, theta.strikes().to_vec()));
    Ok(RepairResult {
        repaired_vols: repaired.implied_vols(),
        theta,
        periods,
        mu,
        marginals,
        input_marginals,
        nu,
        repaired,
        w1_value,
        entropic,
        before,
        after,
        calibration,
        unchanged: false,
    })
}

fn unchanged(
    surface: &NormalizedSurface,
    theta: Theta,
    witness: Vec<f64>,
    before: ArbitrageReport,
    calibration: Vec<CalibrationTarget>,
) -> Result<RepairResult> {
    let periods = surface.num_maturities();
    let mu: Vec<f64> = witness.iter().map(|w| w.max(0.0)).collect();
    let marginals: Vec<Vec<f64>> = (0..periods)
        .map(|i| extract_marginal(&mu, theta.len(), periods, i))
        .collect::<Result<_>>()?;
    let kmax = theta.kmax();
    let input_marginals = surface
        .smiles()
        .iter()
        .map(|s| smile_marginal(s, kmax)?.on_theta(&theta))
        .collect::<Result<_>>()?;
    Ok(RepairResult {
        repaired_vols: surface.implied_vols(),
        theta,
        periods,
        mu,
        marginals,
        input_marginals,
        nu: None,
        repaired: surface.clone(),
        w1_value: Some(0.0),
        entropic: None,
        after: before.clone(),
        before,
        calibration,
        unchanged: true,
    })
}

fn entropic_projection(
    distance: &DMatrix<f64>,
    nu: &JointSignedMeasure,
    system: &ConstraintSystem,
    config: &RepairConfig,
) -> Result<(Vec<f64>, EntropicDiagnostics)> {
    let kernel = GibbsKernel::new(distance, config.epsilon)?;
    let problem = EntropicProblem::new(system.clone(), nu)?;
    let mut solver = Sinkhorn::new(&kernel, &problem)?;
    let report = solver.run(config.e_tol, config.max_iters)?;
    let coupling = solver.coupling();
    let kl_value = entropic::kl_divergence(&coupling, kernel.matrix());
    let transport_cost = coupling.component_mul(distance).sum();
    let duality_gap = entropic::duality_gap(&coupling, solver.state(), &kernel, &problem)?;
    let approx: Vec<f64> = coupling
        .row_iter()
        .zip(&nu.nu_minus)
        .map(|(r, m)| (r.sum() - m).max(0.0))
        .collect();
    let (mu, polish_l1) = polish(&approx, system, &config.lp)?;
    Ok((
        mu,
        EntropicDiagnostics {
            epsilon: config.epsilon,
            report,
            kl_value,
            transport_cost,
            duality_gap,
            polish_l1,
        },
    ))
}

/// Nearest point in l1 of `{ mu >= 0 : A mu = b }` to `approx`.
///
/// The Sinkhorn output satisfies the constraints only to the stopping
/// tolerance; this moves it onto the martingale set exactly.
pub fn polish(approx: &[f64], system: &ConstraintSystem, options: &LpOptions) -> Result<(Vec<f64>, f64)> {
    let n = approx.len();
    if system.residual(approx) <= 1e-13 && approx.iter().all(|v| *v >= 0.0) {
        return Ok((approx.to_vec(), 0.0));
    }
    // variables: mu, up, down with mu - up + down = approx
    let mut objective = vec![0.0; n];
    objective.extend(std::iter::repeat_n(1.0, 2 * n));
    let mut rows = Vec::with_capacity(n + system.num_rows());
    let mut rhs = Vec::with_capacity(n + system.num_rows());
    for (p, &v) in approx.iter().enumerate() {
        rows.push(SparseRow::new(vec![p, n + p, 2 * n + p], vec![1.0, -1.0, 1.0]));
        rhs.push(v);
    }
    for (row, &b) in system.rows().iter().zip(system.rhs()) {
        rows.push(row.clone());
        rhs.push(b);
    }
    let sol = lp::solve_lp(&LpProblem::nonnegative(objective, rows, rhs), options)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::KmaxTooSmall);
    }
    Ok((sol.x[..n].to_vec(), sol.objective_value))
}

/// Wasserstein-1 distance between a measure `mu >= 0` and a signed measure
/// `nu` of equal mass: optimal transport from `mu + nu-` to `nu+`, with the
/// minimal decomposition of `nu`.
pub fn wasserstein1(mu: &[f64], nu: &[f64], distance: &DMatrix<f64>, options: &LpOptions) -> Result<f64> {
    let n = mu.len();
    if nu.len() != n || distance.nrows() != n {
        return Err(Error::Parameter("wasserstein1 dimensions inconsistent".into()));
    }
    let source: Vec<f64> = mu.iter().zip(nu).map(|(m, v)| m + (-v).max(0.0)).collect();
    let target: Vec<f64> = nu.iter().map(|v| v.max(0.0)).collect();
    let mut objective = Vec::with_capacity(n * n);
    for p in 0..n {
        for q in 0..n {
            objective.push(distance[(p, q)]);
        }
    }
    let mut rows = Vec::with_capacity(2 * n);
    let mut rhs = Vec::with_capacity(2 * n);
    for p in 0..n {
        rows.push(SparseRow::new((0..n).map(|q| p * n + q).collect(), vec![1.0; n]));
        rhs.push(source[p]);
    }
    // the last column constraint is implied by mass balance
    for q in 0..n - 1 {
        rows.push(SparseRow::new((0..n).map(|p| p * n + q).collect(), vec![1.0; n]));
        rhs.push(target[q]);
    }
    let sol = lp::solve_lp(&LpProblem::nonnegative(objective, rows, rhs), options)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective_value),
        _ => Err(Error::Infeasible("transport between measures of different mass".into())),
    }
}
