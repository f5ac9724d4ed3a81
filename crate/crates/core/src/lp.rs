//! Exact solvers for desk-scale problems: a dense revised simplex for linear
//! programs in equality form, the Wasserstein projection LP over couplings,
//! and equality-constrained least squares.
//!
//! The simplex keeps an explicit dense basis inverse, so it is meant for a
//! few thousand variables at most. Problems above [`LpOptions::max_vars`] are
//! refused with [`Error::LpTooLarge`]; use the entropic solver for those.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::constraints::{ConstraintSystem, SparseRow};
use crate::error::{Error, Result};
use crate::signed_measure::JointSignedMeasure;

/// Default cap on the number of LP variables.
pub const DEFAULT_MAX_VARS: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    pub max_vars: usize,
    /// Largest phase-one objective (sum of artificials) still declared feasible.
    pub feas_tol: f64,
    pub max_iters: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            max_vars: DEFAULT_MAX_VARS,
            feas_tol: 1e-9,
            max_iters: 1_000_000,
        }
    }
}

/// `min c.x` subject to `rows[i] . x = rhs[i]` and `x_j >= lower_j`
/// (`None` marks a free variable).
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<SparseRow>,
    pub rhs: Vec<f64>,
    pub lower: Vec<Option<f64>>,
}

impl LpProblem {
    /// Problem with all variables bounded below by zero.
    pub fn nonnegative(objective: Vec<f64>, rows: Vec<SparseRow>, rhs: Vec<f64>) -> Self {
        let lower = vec![Some(0.0); objective.len()];
        Self { objective, rows, rhs, lower }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.rows.len() != self.rhs.len() {
            return Err(Error::Parameter("LP dimensions inconsistent".into()));
        }
        if self.rows.iter().any(|r| r.indices().iter().any(|&j| j >= n)) {
            return Err(Error::Parameter("LP row references a missing variable".into()));
        }
        let finite = self.objective.iter().chain(&self.rhs).all(|v| v.is_finite())
            && self.lower.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Parameter("LP data must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
    /// Equality-row multipliers `y` with `c - A^T y >= 0` on nonnegative
    /// variables at optimality.
    pub duals: Vec<f64>,
    pub iterations: usize,
    /// Phase-one objective at its optimum (0 for feasible problems up to
    /// rounding).
    pub infeasibility: f64,
}

// Pivot and pricing tolerances for the simplex.
const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
// consecutive degenerate pivots before switching to Bland's rule
const DEGENERATE_LIMIT: usize = 50;

struct Standard {
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    row_sign: Vec<f64>,
    // how to map standard variables back: (original index, sign)
    origin: Vec<(usize, f64)>,
    offset: Vec<f64>,
}

fn standardize(p: &LpProblem) -> Standard {
    let n = p.num_vars();
    let mut cols_by_var: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in p.rows.iter().enumerate() {
        for (&j, &v) in row.indices().iter().zip(row.values()) {
            if v != 0.0 {
                cols_by_var[j].push((i, v));
            }
        }
    }
    let offset: Vec<f64> = p.lower.iter().map(|l| l.unwrap_or(0.0)).collect();
    let mut rhs = p.rhs.clone();
    for (i, row) in p.rows.iter().enumerate() {
        rhs[i] -= row.dot(&offset);
    }
    let row_sign: Vec<f64> = rhs.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
    for (b, s) in rhs.iter_mut().zip(&row_sign) {
        *b *= s;
    }

    let mut cols = Vec::new();
    let mut cost = Vec::new();
    let mut origin = Vec::new();
    for j in 0..n {
        let col: Vec<(usize, f64)> = cols_by_var[j].iter().map(|&(i, v)| (i, v * row_sign[i])).collect();
        cols.push(col.clone());
        cost.push(p.objective[j]);
        origin.push((j, 1.0));
        if p.lower[j].is_none() {
            cols.push(col.into_iter().map(|(i, v)| (i, -v)).collect());
            cost.push(-p.objective[j]);
            origin.push((j, -1.0));
        }
    }
    Standard {
        cols,
        cost,
        rhs,
        row_sign,
        origin,
        offset,
    }
}

struct Simplex<'a> {
    std: &'a Standard,
    m: usize,
    n_struct: usize,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    iterations: usize,
    max_iters: usize,
}

impl<'a> Simplex<'a> {
    fn new(std: &'a Standard, max_iters: usize) -> Self {
        let m = std.rhs.len();
        let n_struct = std.cols.len();
        let basis: Vec<usize> = (n_struct..n_struct + m).collect();
        let mut in_basis = vec![false; n_struct + m];
        for &b in &basis {
            in_basis[b] = true;
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        Self {
            std,
            m,
            n_struct,
            basis,
            in_basis,
            binv,
            xb: std.rhs.clone(),
            iterations: 0,
            max_iters,
        }
    }

    fn for_each_entry(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n_struct {
            for &(i, v) in &self.std.cols[j] {
                f(i, v);
            }
        } else {
            f(j - self.n_struct, 1.0);
        }
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        self.for_each_entry(j, |k, v| {
            for (i, a) in alpha.iter_mut().enumerate() {
                *a += self.binv[i * m + k] * v;
            }
        });
        alpha
    }

    fn duals(&self, cost: &dyn Fn(usize) -> f64) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost(b);
            if cb == 0.0 {
                continue;
            }
            let row = &self.binv[i * m..(i + 1) * m];
            for (yj, &r) in y.iter_mut().zip(row) {
                *yj += cb * r;
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64], cost: &dyn Fn(usize) -> f64) -> f64 {
        let mut d = cost(j);
        self.for_each_entry(j, |i, v| d -= y[i] * v);
        d
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[r];
        let theta = self.xb[r] / piv;
        for i in 0..m {
            if i != r && alpha[i] != 0.0 {
                self.xb[i] -= theta * alpha[i];
            }
        }
        self.xb[r] = theta;
        let pivot_row: Vec<f64> = self.binv[r * m..(r + 1) * m].iter().map(|v| v / piv).collect();
        for i in 0..m {
            if i == r || alpha[i] == 0.0 {
                continue;
            }
            let f = alpha[i];
            let row = &mut self.binv[i * m..(i + 1) * m];
            for (x, p) in row.iter_mut().zip(&pivot_row) {
                *x -= f * p;
            }
        }
        self.binv[r * m..(r + 1) * m].copy_from_slice(&pivot_row);
        self.in_basis[self.basis[r]] = false;
        self.in_basis[q] = true;
        self.basis[r] = q;
        self.iterations += 1;
        if self.iterations % REFACTOR_EVERY == 0 {
            self.refactor();
        }
    }

    fn refactor(&mut self) {
        let m = self.m;
        let mut b = DMatrix::<f64>::zeros(m, m);
        for (c, &j) in self.basis.iter().enumerate() {
            self.for_each_entry(j, |i, v| b[(i, c)] = v);
        }
        // a failed refactor keeps the product-form inverse
        if let Some(inv) = b.try_inverse() {
            for i in 0..m {
                for k in 0..m {
                    self.binv[i * m + k] = inv[(i, k)];
                }
            }
            for i in 0..m {
                self.xb[i] = (0..m).map(|k| self.binv[i * m + k] * self.std.rhs[k]).sum();
            }
        }
    }

    /// Runs simplex iterations with the given costs over columns admitted by
    /// `eligible`. Returns `false` on unboundedness.
    fn optimize(&mut self, cost: &dyn Fn(usize) -> f64, eligible: &dyn Fn(usize) -> bool) -> Result<bool> {
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.max_iters {
                return Err(Error::Parameter(format!("simplex exceeded {} iterations", self.max_iters)));
            }
            let y = self.duals(cost);
            let bland = degenerate_run >= DEGENERATE_LIMIT;
            let mut entering = None;
            let mut best = -COST_TOL;
            for j in 0..self.n_struct + self.m {
                if self.in_basis[j] || !eligible(j) {
                    continue;
                }
                let d = self.reduced_cost(j, &y, cost);
                if d < -COST_TOL {
                    if bland {
                        entering = Some(j);
                        break;
                    }
                    if d < best {
                        best = d;
                        entering = Some(j);
                    }
                }
            }
            let Some(q) = entering else { return Ok(true) };

            let alpha = self.ftran(q);
            let mut leave: Option<(usize, f64)> = None;
            for (i, &a) in alpha.iter().enumerate() {
                if a > PIVOT_TOL {
                    let ratio = self.xb[i].max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((r, best_ratio)) => {
                            ratio < best_ratio - 1e-14
                                || (ratio <= best_ratio + 1e-14 && self.basis[i] < self.basis[r])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                } else if a < -PIVOT_TOL && self.basis[i] >= self.n_struct && !eligible(self.basis[i]) {
                    // an artificial kept basic at zero on a redundant row must stay at zero
                    let better = leave.is_none_or(|(_, best_ratio)| best_ratio > 0.0);
                    if better {
                        leave = Some((i, 0.0));
                    }
                }
            }
            let Some((r, ratio)) = leave else { return Ok(false) };
            if ratio == 0.0 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            if self.xb[r] < 0.0 {
                self.xb[r] = 0.0;
            }
            self.pivot(r, q, &alpha);
        }
    }
}

/// Revised simplex (two phases, Dantzig pricing with a switch to Bland's rule
/// on long degenerate runs). Deterministic.
pub fn solve_lp(problem: &LpProblem, options: &LpOptions) -> Result<LpSolution> {
    if problem.num_vars() > options.max_vars {
        return Err(Error::LpTooLarge {
            vars: problem.num_vars(),
            cap: options.max_vars,
        });
    }
    problem.validate()?;
    let std = standardize(problem);
    let n_struct = std.cols.len();
    let m = std.rhs.len();
    let mut simplex = Simplex::new(&std, options.max_iters);

    // phase one: minimize the artificials
    let phase1_cost = |j: usize| if j >= n_struct { 1.0 } else { 0.0 };
    simplex.optimize(&phase1_cost, &|_| true)?;
    simplex.refactor();
    let infeasibility: f64 = simplex
        .basis
        .iter()
        .zip(&simplex.xb)
        .filter(|(b, _)| **b >= n_struct)
        .map(|(_, x)| x.max(0.0))
        .sum();
    if infeasibility > options.feas_tol {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            objective_value: f64::NAN,
            duals: Vec::new(),
            iterations: simplex.iterations,
            infeasibility,
        });
    }

    // drive remaining artificials out of the basis where possible
    for r in 0..m {
        if simplex.basis[r] < n_struct {
            continue;
        }
        let row = simplex.binv[r * m..(r + 1) * m].to_vec();
        let candidate = (0..n_struct).filter(|&j| !simplex.in_basis[j]).find(|&j| {
            let v: f64 = std.cols[j].iter().map(|&(i, a)| row[i] * a).sum();
            v.abs() > 1e-9
        });
        if let Some(q) = candidate {
            let alpha = simplex.ftran(q);
            simplex.pivot(r, q, &alpha);
        }
    }

    let phase2_cost = |j: usize| if j >= n_struct { 0.0 } else { std.cost[j] };
    let bounded = simplex.optimize(&phase2_cost, &|j| j < n_struct)?;
    simplex.refactor();
    if !bounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            objective_value: f64::NEG_INFINITY,
            duals: Vec::new(),
            iterations: simplex.iterations,
            infeasibility,
        });
    }

    let mut xs = vec![0.0; n_struct];
    for (&b, &v) in simplex.basis.iter().zip(&simplex.xb) {
        if b < n_struct {
            xs[b] = v.max(0.0);
        }
    }
    let mut x = std.offset.clone();
    for (j, &(orig, sign)) in std.origin.iter().enumerate() {
        x[orig] += sign * xs[j];
    }
    let y = simplex.duals(&phase2_cost);
    let duals = y.iter().zip(&std.row_sign).map(|(v, s)| v * s).collect();
    let objective_value = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective_value,
        duals,
        iterations: simplex.iterations,
        infeasibility,
    })
}

/// Optimal coupling for the projection problem and the martingale measure it
/// yields.
#[derive(Debug, Clone)]
pub struct ProjectionSolution {
    /// `N x N` transport plan from `mu + nu_minus` to `nu_plus`.
    pub coupling: DMatrix<f64>,
    /// Projected martingale measure `M 1 - nu_minus`, tiny negatives clamped.
    pub mu: Vec<f64>,
    /// Wasserstein-1 cost of the coupling.
    pub value: f64,
    pub iterations: usize,
}

/// Solve `min <M, D>` over couplings `M >= 0` with `M 1 >= nu_minus`,
/// `A (M 1) = b + A nu_minus` and `M^T 1 = nu_plus`.
pub fn solve_p_prime(
    distance: &DMatrix<f64>,
    nu: &JointSignedMeasure,
    system: &ConstraintSystem,
    options: &LpOptions,
) -> Result<ProjectionSolution> {
    let n = distance.nrows();
    if distance.ncols() != n || nu.nu_plus.len() != n || system.num_cols() != n {
        return Err(Error::Parameter("projection LP dimensions inconsistent".into()));
    }
    let vars = n * n + n;
    if vars > options.max_vars {
        return Err(Error::LpTooLarge { vars, cap: options.max_vars });
    }
    let coupling_var = |p: usize, q: usize| p * n + q;
    let slack_var = |p: usize| n * n + p;

    let mut objective = vec![0.0; vars];
    for p in 0..n {
        for q in 0..n {
            objective[coupling_var(p, q)] = distance[(p, q)];
        }
    }
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    // row sums minus slack equal nu_minus
    for p in 0..n {
        let mut idx: Vec<usize> = (0..n).map(|q| coupling_var(p, q)).collect();
        let mut val = vec![1.0; n];
        idx.push(slack_var(p));
        val.push(-1.0);
        rows.push(SparseRow::new(idx, val));
        rhs.push(nu.nu_minus[p]);
    }
    // affine rows on the row sums
    for (r, row) in system.rows().iter().enumerate() {
        let mut idx = Vec::with_capacity(row.nnz() * n);
        let mut val = Vec::with_capacity(row.nnz() * n);
        for (&p, &a) in row.indices().iter().zip(row.values()) {
            for q in 0..n {
                idx.push(coupling_var(p, q));
                val.push(a);
            }
        }
        rows.push(SparseRow::new(idx, val));
        rhs.push(system.rhs()[r] + row.dot(&nu.nu_minus));
    }
    // column sums
    for q in 0..n {
        let idx: Vec<usize> = (0..n).map(|p| coupling_var(p, q)).collect();
        rows.push(SparseRow::new(idx, vec![1.0; n]));
        rhs.push(nu.nu_plus[q]);
    }

    let sol = solve_lp(&LpProblem::nonnegative(objective, rows, rhs), options)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::KmaxTooSmall),
        LpStatus::Unbounded => return Err(Error::Unbounded),
    }
    let coupling = DMatrix::from_fn(n, n, |p, q| sol.x[coupling_var(p, q)]);
    let mu = (0..n)
        .map(|p| (coupling.row(p).sum() - nu.nu_minus[p]).max(0.0))
        .collect();
    Ok(ProjectionSolution {
        value: sol.objective_value,
        coupling,
        mu,
        iterations: sol.iterations,
    })
}

/// Feasibility of `A x = b, x >= 0` for a constraint system.
pub fn feasible_point(system: &ConstraintSystem, options: &LpOptions) -> Result<LpSolution> {
    let n = system.num_cols();
    let problem = LpProblem::nonnegative(vec![0.0; n], system.rows().to_vec(), system.rhs().to_vec());
    solve_lp(&problem, options)
}

/// `argmin ||x - target||^2` subject to `A x = b`.
///
/// The KKT system `[I A^T; A 0] [x; y] = [target; b]` is solved by block
/// elimination: `(A A^T) y = A target - b`, then `x = target - A^T y`.
pub fn solve_eq_lsq(a: &DMatrix<f64>, b: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    let (rows, cols) = a.shape();
    if b.len() != rows || target.len() != cols {
        return Err(Error::Parameter("least-squares dimensions inconsistent".into()));
    }
    let t = DVector::from_column_slice(target);
    if rows == 0 {
        return Ok(target.to_vec());
    }
    let gram = a * a.transpose();
    let resid = a * &t - DVector::from_column_slice(b);
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Rank(format!("{rows} x {cols} constraint matrix is not of full row rank")))?;
    // reject numerically rank-deficient Gram matrices
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d.abs()), hi.max(d.abs())));
    if !(lo > 1e-7 * hi) {
        return Err(Error::Rank(format!("Gram matrix conditioning {:e}", (hi / lo).powi(2))));
    }
    let y = chol.solve(&resid);
    let x = t - a.transpose() * y;
    Ok(x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(pairs: &[(usize, f64)]) -> SparseRow {
        SparseRow::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
    }

    #[test]
    fn simple_optimum() {
        let p = LpProblem::nonnegative(vec![1.0, 1.0], vec![row(&[(0, 1.0), (1, 1.0)])], vec![1.0]);
        let s = solve_lp(&p, &LpOptions::default()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_system() {
        let p = LpProblem::nonnegative(vec![0.0], vec![row(&[(0, 1.0)]), row(&[(0, 1.0)])], vec![1.0, 2.0]);
        assert_eq!(solve_lp(&p, &LpOptions::default()).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_problem() {
        // min -x0 with x0 - x1 = 0
        let p = LpProblem::nonnegative(vec![-1.0, 0.0], vec![row(&[(0, 1.0), (1, -1.0)])], vec![0.0]);
        assert_eq!(solve_lp(&p, &LpOptions::default()).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_shifted_variables() {
        // min x0 + 2 x1, x0 free, x1 >= 1, x0 + x1 = 0.5, x0 >= -10 via slack row
        let mut p = LpProblem::nonnegative(
            vec![1.0, 2.0, 0.0],
            vec![row(&[(0, 1.0), (1, 1.0)]), row(&[(0, 1.0), (2, -1.0)])],
            vec![0.5, -10.0],
        );
        p.lower = vec![None, Some(1.0), Some(0.0)];
        let s = solve_lp(&p, &LpOptions::default()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        // x1 = 1 is cheapest, x0 = -0.5
        assert!((s.x[0] + 0.5).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
        assert!((s.objective_value - 1.5).abs() < 1e-12);
    }

    #[test]
    fn redundant_rows_are_fine() {
        let p = LpProblem::nonnegative(
            vec![2.0, 1.0],
            vec![row(&[(0, 1.0), (1, 1.0)]), row(&[(0, 2.0), (1, 2.0)])],
            vec![1.0, 2.0],
        );
        let s = solve_lp(&p, &LpOptions::default()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn size_cap() {
        let p = LpProblem::nonnegative(vec![0.0; 10], vec![], vec![]);
        let opts = LpOptions { max_vars: 5, ..LpOptions::default() };
        assert!(matches!(solve_lp(&p, &opts), Err(Error::LpTooLarge { vars: 10, cap: 5 })));
    }

    #[test]
    fn complementary_slackness_on_transport() {
        // 2x2 transport with costs [[0,1],[1,0]]
        let cost = vec![0.0, 1.0, 1.0, 0.0];
        let rows = vec![
            row(&[(0, 1.0), (1, 1.0)]),
            row(&[(2, 1.0), (3, 1.0)]),
            row(&[(0, 1.0), (2, 1.0)]),
            row(&[(1, 1.0), (3, 1.0)]),
        ];
        let p = LpProblem::nonnegative(cost.clone(), rows.clone(), vec![0.7, 0.3, 0.4, 0.6]);
        let s = solve_lp(&p, &LpOptions::default()).unwrap();
        assert!((s.objective_value - 0.3).abs() < 1e-12);
        for j in 0..4 {
            let reduced = cost[j] - rows.iter().zip(&s.duals).map(|(r, y)| r.coeff(j) * y).sum::<f64>();
            assert!(reduced >= -1e-9);
            assert!((reduced * s.x[j]).abs() <= 1e-8);
        }
    }

    #[test]
    fn eq_lsq_pins_and_passes_through() {
        let a = DMatrix::<f64>::identity(3, 3);
        let x = solve_eq_lsq(&a, &[1.0, 2.0, 3.0], &[9.0, 9.0, 9.0]).unwrap();
        assert!(x.iter().zip([1.0, 2.0, 3.0]).all(|(a, b)| (a - b).abs() < 1e-14));
        let empty = DMatrix::<f64>::zeros(0, 3);
        assert_eq!(solve_eq_lsq(&empty, &[], &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn eq_lsq_rejects_rank_deficiency() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        assert!(matches!(solve_eq_lsq(&a, &[1.0, 2.0], &[0.0, 0.0]), Err(Error::Rank(_))));
    }
}
