//! Linear constraint systems over measures on `Theta^m`, and the static
//! arbitrage detector built on them.
//!
//! A measure on `Theta^m` is a vector of length `N = l^m`, indexed by flat
//! path index (see [`crate::grid::PathIndexer`]). The martingale set is
//! `{ mu >= 0 : A mu = b }` where the rows of `A` are, in order, unit mass,
//! centering of the first period at 1, and one zero-mean-increment row per
//! period `i < m` and per prefix `(p_1, .., p_i)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{self, CalibrationPoint, PathIndexer, Theta};
use crate::lp::{self, LpOptions, LpStatus};
use crate::market_data::{NormalizedSurface, Smile};
use crate::signed_measure::pricing_function;

/// A sparse row with strictly increasing column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRow {
    /// Builds a row; entries are sorted by column and duplicates summed.
    pub fn new(indices: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(indices.len(), values.len(), "sparse row index/value length mismatch");
        let mut pairs: Vec<(usize, f64)> = indices.into_iter().zip(values).collect();
        if pairs.windows(2).any(|w| w[1].0 <= w[0].0) {
            pairs.sort_by_key(|p| p.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
            for (j, v) in pairs {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => merged.push((j, v)),
                }
            }
            pairs = merged;
        }
        let (indices, values) = pairs.into_iter().unzip();
        Self { indices, values }
    }

    /// Dense vector to sparse, dropping exact zeros.
    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .unzip();
        Self { indices, values }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.indices.iter().zip(&self.values).map(|(&j, &v)| v * x[j]).sum()
    }

    pub fn coeff(&self, j: usize) -> f64 {
        self.indices.binary_search(&j).map_or(0.0, |pos| self.values[pos])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (&j, &v) in self.indices.iter().zip(&self.values) {
            out[j] = v;
        }
        out
    }
}

/// What a constraint row expresses. Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowKind {
    Mass,
    Centering,
    /// Zero expected increment from period `period` to `period + 1` given the
    /// first `period + 1` atoms, encoded base `l` in `prefix`.
    Martingality { period: usize, prefix: usize },
    /// Call price at quoted node `node` of maturity `maturity`.
    Calibration { maturity: usize, node: usize },
    /// Mass of atom `atom` in the marginal of period `period`.
    Marginal { period: usize, atom: usize },
}

/// `A x = b` with tagged rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    num_cols: usize,
    rows: Vec<SparseRow>,
    rhs: Vec<f64>,
    kinds: Vec<RowKind>,
}

impl ConstraintSystem {
    pub fn new(num_cols: usize, rows: Vec<SparseRow>, rhs: Vec<f64>, kinds: Vec<RowKind>) -> Result<Self> {
        if rows.len() != rhs.len() || rows.len() != kinds.len() {
            return Err(Error::Parameter("constraint rows, rhs and kinds differ in length".into()));
        }
        if rows.iter().any(|r| r.nnz() == 0 || r.indices().last().is_some_and(|&j| j >= num_cols)) {
            return Err(Error::Parameter("constraint row empty or out of range".into()));
        }
        Ok(Self { num_cols, rows, rhs, kinds })
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.num_cols
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn kinds(&self) -> &[RowKind] {
        &self.kinds
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.dot(x)).collect()
    }

    /// `max_r |A_r x - b_r|`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(r, b)| (r.dot(x) - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut a = nalgebra::DMatrix::zeros(self.rows.len(), self.num_cols);
        for (i, r) in self.rows.iter().enumerate() {
            for (&j, &v) in r.indices().iter().zip(r.values()) {
                a[(i, j)] = v;
            }
        }
        a
    }
}

/// Mass, centering and martingality rows on `Theta^m`.
///
/// Row count is `2 + (l^m - l) / (l - 1)`.
pub fn build_martingale_system(theta: &Theta, periods: usize) -> Result<ConstraintSystem> {
    let l = theta.len();
    let idx = PathIndexer::new(l, periods)?;
    let n = idx.num_paths();
    let ks = theta.strikes();

    let mut rows = vec![SparseRow::new((0..n).collect(), vec![1.0; n])];
    let mut rhs = vec![1.0];
    let mut kinds = vec![RowKind::Mass];

    let (cidx, cval): (Vec<usize>, Vec<f64>) = (0..n)
        .map(|p| (p, ks[idx.component(p, 0)]))
        .filter(|(_, v)| *v != 0.0)
        .unzip();
    rows.push(SparseRow::new(cidx, cval));
    rhs.push(1.0);
    kinds.push(RowKind::Centering);

    for period in 0..periods - 1 {
        let prefixes = l.pow(period as u32 + 1);
        let block = l.pow((periods - period - 1) as u32);
        for prefix in 0..prefixes {
            let from = ks[prefix % l];
            let mut ri = Vec::new();
            let mut rv = Vec::new();
            for p in prefix * block..(prefix + 1) * block {
                let v = ks[idx.component(p, period + 1)] - from;
                if v != 0.0 {
                    ri.push(p);
                    rv.push(v);
                }
            }
            rows.push(SparseRow::new(ri, rv));
            rhs.push(0.0);
            kinds.push(RowKind::Martingality { period, prefix });
        }
    }
    ConstraintSystem::new(n, rows, rhs, kinds)
}

/// A calibration target addressed by quoted node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTarget {
    pub maturity: usize,
    pub node: usize,
    pub strike: f64,
    pub price: f64,
}

impl From<CalibrationTarget> for CalibrationPoint {
    fn from(t: CalibrationTarget) -> Self {
        CalibrationPoint {
            maturity: t.maturity,
            strike: t.strike,
            price: t.price,
        }
    }
}

/// Append one row `sum_p (k_{p_i} - k)+ mu_p = c` per calibration target.
pub fn build_calibrated_system(
    base: &ConstraintSystem,
    calibration: &[CalibrationTarget],
    theta: &Theta,
    periods: usize,
) -> Result<ConstraintSystem> {
    let idx = PathIndexer::new(theta.len(), periods)?;
    if idx.num_paths() != base.num_cols() {
        return Err(Error::Parameter("calibration grid does not match the base system".into()));
    }
    let ks = theta.strikes();
    let mut out = base.clone();
    for (a, t) in calibration.iter().enumerate() {
        if calibration[..a].iter().any(|o| o.maturity == t.maturity && o.node == t.node) {
            return Err(Error::DuplicateConstraint {
                maturity: t.maturity,
                strike: t.strike,
            });
        }
        if t.maturity >= periods {
            return Err(Error::Index(format!("calibration maturity {} out of range", t.maturity)));
        }
        let (ri, rv): (Vec<usize>, Vec<f64>) = (0..idx.num_paths())
            .map(|p| (p, (ks[idx.component(p, t.maturity)] - t.strike).max(0.0)))
            .filter(|(_, v)| *v > 0.0)
            .unzip();
        if ri.is_empty() {
            return Err(Error::InvalidKmax {
                kmax: theta.kmax(),
                max_strike: t.strike,
            });
        }
        out.rows.push(SparseRow::new(ri, rv));
        out.rhs.push(t.price);
        out.kinds.push(RowKind::Calibration {
            maturity: t.maturity,
            node: t.node,
        });
    }
    Ok(out)
}

const RANK_RTOL: f64 = 1e-10;

/// Martingality rows of `base` plus one marginal-fixing row per
/// `(period, atom)`, with linearly dependent rows removed.
///
/// `marginals[i]` is the weight vector of period `i` on `Theta`.
pub fn build_joint_system(base: &ConstraintSystem, marginals: &[Vec<f64>], theta: &Theta) -> Result<ConstraintSystem> {
    let periods = marginals.len();
    let l = theta.len();
    let idx = PathIndexer::new(l, periods)?;
    let n = idx.num_paths();
    if base.num_cols() != n || marginals.iter().any(|w| w.len() != l) {
        return Err(Error::Parameter("marginals do not match the grid".into()));
    }

    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut kinds = Vec::new();
    for ((r, b), k) in base.rows.iter().zip(&base.rhs).zip(&base.kinds) {
        if matches!(k, RowKind::Martingality { .. }) {
            rows.push(r.clone());
            rhs.push(*b);
            kinds.push(*k);
        }
    }
    for (period, weights) in marginals.iter().enumerate() {
        for (atom, &w) in weights.iter().enumerate() {
            let ri: Vec<usize> = (0..n).filter(|&p| idx.component(p, period) == atom).collect();
            let len = ri.len();
            rows.push(SparseRow::new(ri, vec![1.0; len]));
            rhs.push(w);
            kinds.push(RowKind::Marginal { period, atom });
        }
    }

    let keep = independent_rows(&rows, n);
    let rhs = keep.iter().map(|&i| rhs[i]).collect();
    let kinds = keep.iter().map(|&i| kinds[i]).collect();
    let rows = keep.iter().map(|&i| rows[i].clone()).collect();
    ConstraintSystem::new(n, rows, rhs, kinds)
}

/// Greedy selection of a maximal linearly independent subset of rows, in
/// order, by modified Gram–Schmidt with one reorthogonalization pass.
fn independent_rows(rows: &[SparseRow], n: usize) -> Vec<usize> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut keep = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let mut v = row.to_dense(n);
        let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for _ in 0..2 {
            for q in &basis {
                let c: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (x, qa) in v.iter_mut().zip(q) {
                    *x -= c * qa;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > RANK_RTOL * norm0 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
            keep.push(i);
        }
    }
    keep
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Bounds,
    Monotonicity,
    Convexity,
    Calendar,
    LpInfeasible,
}

/// One failed no-arbitrage inequality, located in normalized coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Maturity index (the earlier one for calendar violations).
    pub maturity_index: Option<usize>,
    pub maturity: Option<f64>,
    /// Later maturity index, for calendar violations.
    pub other_maturity_index: Option<usize>,
    /// Moneyness of the nodes involved.
    pub strikes: Vec<f64>,
    /// Amount by which the inequality fails, in normalized price units
    /// (slope units for convexity).
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LpCheck {
    Feasible,
    Infeasible { infeasibility: f64 },
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArbitrageReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
    pub lp_check: LpCheck,
    pub tolerance: f64,
    /// Upper grid atom used by the complete check.
    pub kmax: Option<f64>,
    /// Grid of the complete check, when it ran.
    #[serde(skip)]
    pub theta: Option<Theta>,
    /// Martingale measure calibrated to every node, when one was found.
    #[serde(skip)]
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectOptions {
    pub tol: f64,
    pub lp: LpOptions,
    pub kmax_margin: f64,
    /// Additional grid atoms for the complete check.
    pub extra_atoms: Vec<f64>,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            lp: LpOptions::default(),
            kmax_margin: grid::DEFAULT_KMAX_MARGIN,
            extra_atoms: Vec::new(),
        }
    }
}

/// Per-smile necessary conditions on one maturity, with `(0, 1)` prepended:
/// bounds `(1 - k)+ <= c <= 1`, slopes in `[-1, 0]` and convexity.
pub fn check_smile(strikes: &[f64], prices: &[f64], tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut violation = |kind, strikes: Vec<f64>, magnitude: f64| {
        out.push(Violation {
            kind,
            maturity_index: None,
            maturity: None,
            other_maturity_index: None,
            strikes,
            magnitude,
        });
    };
    for (&k, &c) in strikes.iter().zip(prices) {
        let lower = (1.0 - k).max(0.0);
        if c < lower - tol {
            violation(ViolationKind::Bounds, vec![k], lower - c);
        } else if c > 1.0 + tol {
            violation(ViolationKind::Bounds, vec![k], c - 1.0);
        }
    }
    let mut ks = vec![0.0];
    ks.extend_from_slice(strikes);
    let mut cs = vec![1.0];
    cs.extend_from_slice(prices);
    let slopes: Vec<f64> = (1..ks.len()).map(|j| (cs[j] - cs[j - 1]) / (ks[j] - ks[j - 1])).collect();
    for j in 1..ks.len() {
        let rise = cs[j] - cs[j - 1];
        let run = ks[j] - ks[j - 1];
        if rise > tol {
            violation(ViolationKind::Monotonicity, vec![ks[j - 1], ks[j]], rise);
        } else if -rise > run + tol {
            violation(ViolationKind::Monotonicity, vec![ks[j - 1], ks[j]], -rise - run);
        }
    }
    for j in 1..slopes.len() {
        let drop = slopes[j - 1] - slopes[j];
        if drop > tol {
            violation(ViolationKind::Convexity, vec![ks[j - 1], ks[j], ks[j + 1]], drop);
        }
    }
    out
}

fn calendar_violations(surface: &NormalizedSurface, tol: f64) -> Vec<Violation> {
    let smiles = surface.smiles();
    let mut out = Vec::new();
    for (i, early) in smiles.iter().enumerate() {
        for (i2, late) in smiles.iter().enumerate().skip(i + 1) {
            let last_k = *late.strikes.last().expect("smiles are non-empty");
            let last_c = *late.prices.last().expect("smiles are non-empty");
            let (ks, cs) = augmented_without_kmax(late);
            for (&k, &c) in early.strikes.iter().zip(&early.prices) {
                let bound = if k <= last_k { interpolate(&ks, &cs, k) } else { last_c };
                if c > bound + tol {
                    out.push(Violation {
                        kind: ViolationKind::Calendar,
                        maturity_index: Some(i),
                        maturity: Some(early.maturity),
                        other_maturity_index: Some(i2),
                        strikes: vec![k],
                        magnitude: c - bound,
                    });
                }
            }
        }
    }
    out
}

fn augmented_without_kmax(s: &Smile) -> (Vec<f64>, Vec<f64>) {
    let mut ks = vec![0.0];
    ks.extend_from_slice(&s.strikes);
    let mut cs = vec![1.0];
    cs.extend_from_slice(&s.prices);
    (ks, cs)
}

fn interpolate(ks: &[f64], cs: &[f64], k: f64) -> f64 {
    // within [0, last strike] this is the pricing function without the k_max tail
    let kmax = ks[ks.len() - 1] * 2.0 + 1.0;
    let mut aug_k = ks.to_vec();
    aug_k.push(kmax);
    let mut aug_c = cs.to_vec();
    aug_c.push(0.0);
    pricing_function(&aug_k, &aug_c, k)
}

/// Calibration targets at every quoted node.
pub fn all_nodes(surface: &NormalizedSurface) -> Vec<CalibrationTarget> {
    surface
        .smiles()
        .iter()
        .enumerate()
        .flat_map(|(i, s)| {
            s.strikes
                .iter()
                .zip(&s.prices)
                .enumerate()
                .map(move |(j, (&strike, &price))| CalibrationTarget {
                    maturity: i,
                    node: j,
                    strike,
                    price,
                })
        })
        .collect()
}

/// [`detect_arbitrage_with`] using default options (tolerance `1e-8`).
pub fn detect_arbitrage(surface: &NormalizedSurface) -> ArbitrageReport {
    detect_arbitrage_with(surface, &DetectOptions::default())
}

/// Two-stage static arbitrage check.
///
/// Stage one runs the per-smile checks of [`check_smile`] and compares each
/// smile with the piecewise-linear pricing functions of later maturities.
/// Stage two decides whether some martingale measure on the strike grid
/// reproduces every quoted price, by linear-programming feasibility; this is
/// skipped (and reported) when the grid exceeds the LP size cap.
pub fn detect_arbitrage_with(surface: &NormalizedSurface, options: &DetectOptions) -> ArbitrageReport {
    let tol = options.tol;
    let mut violations = Vec::new();
    for (i, s) in surface.smiles().iter().enumerate() {
        for mut v in check_smile(&s.strikes, &s.prices, tol) {
            v.maturity_index = Some(i);
            v.maturity = Some(s.maturity);
            violations.push(v);
        }
    }
    violations.extend(calendar_violations(surface, tol));

    let targets = all_nodes(surface);
    let points: Vec<CalibrationPoint> = targets.iter().map(|&t| t.into()).collect();
    let kmax = match grid::choose_kmax(surface, &points, options.kmax_margin) {
        Ok(k) if k.is_finite() => k,
        _ => (1.0 + options.kmax_margin) * surface.max_strike().max(1.0),
    };
    let lp_check = stage_two(surface, &targets, kmax, options);
    let (lp_check, theta, witness) = match lp_check {
        Ok(v) => v,
        Err(e) => (LpCheck::Skipped { reason: e.to_string() }, None, None),
    };
    if let LpCheck::Infeasible { infeasibility } = lp_check {
        violations.push(Violation {
            kind: ViolationKind::LpInfeasible,
            maturity_index: None,
            maturity: None,
            other_maturity_index: None,
            strikes: Vec::new(),
            magnitude: infeasibility,
        });
    }
    ArbitrageReport {
        feasible: violations.is_empty(),
        violations,
        lp_check,
        tolerance: tol,
        kmax: Some(kmax),
        theta,
        witness,
    }
}

type StageTwo = (LpCheck, Option<Theta>, Option<Vec<f64>>);

fn stage_two(
    surface: &NormalizedSurface,
    targets: &[CalibrationTarget],
    kmax: f64,
    options: &DetectOptions,
) -> Result<StageTwo> {
    let mut atoms = vec![0.0, kmax];
    atoms.extend(targets.iter().map(|t| t.strike));
    atoms.extend(options.extra_atoms.iter().copied().filter(|k| k.is_finite() && *k >= 0.0));
    let theta = Theta::from_strikes(atoms)?;
    let periods = surface.num_maturities();
    let paths = PathIndexer::new(theta.len(), periods)?.num_paths();
    if paths > options.lp.max_vars {
        return Ok((
            LpCheck::Skipped {
                reason: format!("{paths} grid paths exceed the LP cap of {}", options.lp.max_vars),
            },
            None,
            None,
        ));
    }
    let base = build_martingale_system(&theta, periods)?;
    let system = build_calibrated_system(&base, targets, &theta, periods)?;
    let lp_options = LpOptions {
        feas_tol: options.tol,
        ..options.lp
    };
    let sol = lp::feasible_point(&system, &lp_options)?;
    Ok(match sol.status {
        LpStatus::Optimal => (LpCheck::Feasible, Some(theta), Some(sol.x)),
        _ => (
            LpCheck::Infeasible {
                infeasibility: sol.infeasibility,
            },
            Some(theta),
            None,
        ),
    })
}
