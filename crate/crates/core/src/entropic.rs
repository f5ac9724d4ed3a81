//! Entropy-regularized projection: the KL projection of the Gibbs kernel
//! `exp(-D / eps)` onto the set of couplings
//!
//! ```text
//! { M >= 0 : A (M 1 - nu_minus) = b,  M 1 >= nu_minus,  M^T 1 = nu_plus }
//! ```
//!
//! solved by a multi-constrained Sinkhorn iteration that keeps one scaling
//! per constraint block. There are `R = L + 2` blocks: the `L` affine rows of
//! the constraint system, the lower bound on row sums, and the fixed column
//! marginal. The optimal coupling has the form `diag(s) G diag(c)` with `s`
//! the product of all row-side scalings and `c` the column scaling.
//!
//! [`dykstra_run`] is a plain full-matrix implementation of the same
//! projections, kept as an independent reference for testing.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::constraints::ConstraintSystem;
use crate::error::{Error, Result};
use crate::signed_measure::JointSignedMeasure;

pub const DEFAULT_E_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

/// Largest exponent argument the root finder may reach.
const EXP_CAP: f64 = 700.0;
const ROOT_RTOL: f64 = 1e-12;

/// `G = exp(-D / eps)`, floored at the smallest positive normal number.
#[derive(Debug, Clone)]
pub struct GibbsKernel {
    matrix: DMatrix<f64>,
    epsilon: f64,
    underflows: usize,
}

impl GibbsKernel {
    pub fn new(distance: &DMatrix<f64>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Parameter(format!("epsilon must be > 0, got {epsilon}")));
        }
        let mut underflows = 0;
        let matrix = distance.map(|d| {
            let g = (-d / epsilon).exp();
            if g < f64::MIN_POSITIVE {
                underflows += 1;
                f64::MIN_POSITIVE
            } else {
                g
            }
        });
        Ok(Self {
            matrix,
            epsilon,
            underflows,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Number of entries that were raised to the floor.
    pub fn underflows(&self) -> usize {
        self.underflows
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `sum M log(M / G) - M + G`, with `0 log 0 = 0`; `+inf` if `M` has a
/// negative entry.
pub fn kl_divergence(m: &DMatrix<f64>, g: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for (&x, &y) in m.iter().zip(g.iter()) {
        if x < 0.0 {
            return f64::INFINITY;
        }
        if x > 0.0 {
            total += x * (x / y).ln();
        }
        total += y - x;
    }
    total
}

/// `-sum M (log M - 1)`, with `0 log 0 = 0`.
pub fn entropy(weights: &[f64]) -> f64 {
    -weights
        .iter()
        .filter(|w| **w > 0.0)
        .map(|&w| w * (w.ln() - 1.0))
        .sum::<f64>()
}

/// Constraint data for the regularized problem.
#[derive(Debug, Clone)]
pub struct EntropicProblem {
    system: ConstraintSystem,
    nu_minus: Vec<f64>,
    nu_plus: Vec<f64>,
    /// `b + A nu_minus`: the affine targets for the row sums of `M`.
    rhs: Vec<f64>,
}

impl EntropicProblem {
    pub fn new(system: ConstraintSystem, nu: &JointSignedMeasure) -> Result<Self> {
        let n = system.num_cols();
        if nu.nu_minus.len() != n || nu.nu_plus.len() != n {
            return Err(Error::Parameter("measure and constraint system differ in size".into()));
        }
        if nu.nu_minus.iter().chain(&nu.nu_plus).any(|v| !(*v > 0.0)) {
            return Err(Error::Parameter("both parts of the signed measure must be strictly positive".into()));
        }
        let rhs = system
            .rows()
            .iter()
            .zip(system.rhs())
            .map(|(r, b)| b + r.dot(&nu.nu_minus))
            .collect();
        Ok(Self {
            system,
            nu_minus: nu.nu_minus.clone(),
            nu_plus: nu.nu_plus.clone(),
            rhs,
        })
    }

    pub fn system(&self) -> &ConstraintSystem {
        &self.system
    }

    pub fn nu_minus(&self) -> &[f64] {
        &self.nu_minus
    }

    pub fn nu_plus(&self) -> &[f64] {
        &self.nu_plus
    }

    pub fn shifted_rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn size(&self) -> usize {
        self.nu_plus.len()
    }

    /// Number of constraint blocks `R`.
    pub fn num_blocks(&self) -> usize {
        self.system.num_rows() + 2
    }

    /// Stopping criterion from the row and column sums of a coupling.
    fn criterion_from_sums(&self, row_sums: &[f64], col_sums: &[f64]) -> f64 {
        let affine = self
            .system
            .rows()
            .iter()
            .zip(&self.rhs)
            .map(|(r, b)| (r.dot(row_sums) - b).abs())
            .fold(0.0, f64::max);
        let lower = row_sums
            .iter()
            .zip(&self.nu_minus)
            .map(|(x, m)| (m - x).max(0.0))
            .fold(0.0, f64::max);
        let column = col_sums
            .iter()
            .zip(&self.nu_plus)
            .map(|(x, p)| (x - p).abs())
            .fold(0.0, f64::max);
        affine.max(lower).max(column)
    }

    /// `max(|A (M 1 - nu_minus) - b|_inf, |max(nu_minus - M 1, 0)|_inf,
    /// |M^T 1 - nu_plus|_inf)`.
    pub fn stopping_criterion(&self, coupling: &DMatrix<f64>) -> f64 {
        let rows: Vec<f64> = coupling.row_iter().map(|r| r.sum()).collect();
        let cols: Vec<f64> = coupling.column_iter().map(|c| c.sum()).collect();
        self.criterion_from_sums(&rows, &cols)
    }
}

/// Solve `sum_p a_p x_p exp(lambda a_p) = rhs` for `lambda`.
///
/// The left side is increasing in `lambda`. The root is bracketed by
/// geometric steps (factor 4) from 0, then refined by Newton steps kept
/// inside the bracket, falling back to bisection.
pub fn root_find(coeffs: &[f64], x: &[f64], rhs: f64) -> Result<f64> {
    if coeffs.len() != x.len() || coeffs.iter().all(|a| *a == 0.0) {
        return Err(Error::Parameter("root_find needs a nonzero row matching x".into()));
    }
    if x.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Parameter("root_find needs x > 0".into()));
    }
    let log_x: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    solve_row(coeffs, &log_x, rhs).map_err(|message| Error::Instability { row: 0, message })
}

fn solve_row(coeffs: &[f64], log_x: &[f64], rhs: f64) -> std::result::Result<f64, String> {
    let amax = coeffs.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let cap = EXP_CAP / amax;
    let eval = |lambda: f64| {
        let mut f = -rhs;
        let mut df = 0.0;
        for (&a, &lx) in coeffs.iter().zip(log_x) {
            let t = (lx + lambda * a).exp();
            f += a * t;
            df += a * a * t;
        }
        (f, df)
    };

    let (f0, _) = eval(0.0);
    if f0 == 0.0 {
        return Ok(0.0);
    }
    if !f0.is_finite() {
        return Err("constraint target not finite at lambda = 0".into());
    }
    // bracket [lo, hi] with f(lo) < 0 < f(hi)
    let direction = if f0 < 0.0 { 1.0 } else { -1.0 };
    let mut inner = 0.0;
    let mut step = 1.0 / amax;
    let outer = loop {
        let trial = direction * step.min(cap);
        let (f, _) = eval(trial);
        if f.is_nan() {
            return Err("NaN while bracketing the multiplier".into());
        }
        if (f > 0.0) == (direction > 0.0) || f == 0.0 {
            break trial;
        }
        inner = trial;
        if step >= cap {
            return Err(format!(
                "multiplier exceeds the exponent cap ({EXP_CAP}) without bracketing the target {rhs:e}"
            ));
        }
        step *= 4.0;
    };
    let (mut lo, mut hi) = if direction > 0.0 { (inner, outer) } else { (outer, inner) };

    let mut lambda = 0.5 * (lo + hi);
    let tol = ROOT_RTOL * rhs.abs().max(1.0);
    let mut last_f = f64::INFINITY;
    for _ in 0..400 {
        let (f, df) = eval(lambda);
        last_f = f;
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        let newton = lambda - f / df;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let small = 2.0 * f64::EPSILON * lambda.abs().max(f64::MIN_POSITIVE);
        if (next - lambda).abs() <= small || hi - lo <= small {
            lambda = next;
            last_f = eval(lambda).0;
            break;
        }
        lambda = next;
    }
    let collapsed = hi - lo <= 8.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    if last_f.abs() <= tol || collapsed || last_f.abs() <= 1e-9 * tol.max(1.0) {
        Ok(lambda)
    } else {
        Err(format!("root finder stalled with residual {last_f:e}"))
    }
}

/// Output of a single proximal step on a positive vector.
pub fn prox_vector(block: usize, x: &[f64], problem: &EntropicProblem) -> Result<Vec<f64>> {
    let l = problem.system().num_rows();
    if x.len() != problem.size() || x.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Parameter("prox needs a positive vector of the problem size".into()));
    }
    if block < l {
        let row = &problem.system().rows()[block];
        let sub: Vec<f64> = row.indices().iter().map(|&p| x[p]).collect();
        let lambda = root_find(row.values(), &sub, problem.rhs[block]).map_err(|e| match e {
            Error::Instability { message, .. } => Error::Instability { row: block, message },
            e => e,
        })?;
        let mut out = x.to_vec();
        for (&p, &a) in row.indices().iter().zip(row.values()) {
            out[p] *= (lambda * a).exp();
        }
        Ok(out)
    } else if block == l {
        Ok(x.iter().zip(&problem.nu_minus).map(|(v, m)| v.max(*m)).collect())
    } else if block == l + 1 {
        Ok(problem.nu_plus.clone())
    } else {
        Err(Error::Index(format!("block {block} out of range (R = {})", l + 2)))
    }
}

/// Dual scalings of the Sinkhorn iteration.
///
/// The scaling of affine row `r` is `exp(lambdas[r] * A_r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingState {
    pub lambdas: Vec<f64>,
    /// Scaling of the lower-bound block; always `>= 1`.
    pub lower_scale: Vec<f64>,
    pub column_scale: Vec<f64>,
}

impl ScalingState {
    pub fn ones(rows: usize, size: usize) -> Self {
        Self {
            lambdas: vec![0.0; rows],
            lower_scale: vec![1.0; size],
            column_scale: vec![1.0; size],
        }
    }

    /// Rescale the dual potentials `eps * log(scaling)` from `from_eps` to
    /// `to_eps`, keeping the potentials fixed.
    pub fn rescaled(&self, from_eps: f64, to_eps: f64) -> Self {
        let ratio = from_eps / to_eps;
        Self {
            lambdas: self.lambdas.iter().map(|l| l * ratio).collect(),
            lower_scale: self.lower_scale.iter().map(|a| a.powf(ratio)).collect(),
            column_scale: self.column_scale.iter().map(|a| a.powf(ratio)).collect(),
        }
    }

    /// Dense scaling vector of affine row `r`.
    pub fn affine_scaling(&self, r: usize, system: &ConstraintSystem) -> Vec<f64> {
        let mut out = vec![1.0; system.num_cols()];
        let row = &system.rows()[r];
        for (&p, &a) in row.indices().iter().zip(row.values()) {
            out[p] = (self.lambdas[r] * a).exp();
        }
        out
    }

    /// `log` of the product of all row-side scalings except the lower bound.
    fn log_affine(&self, system: &ConstraintSystem) -> Vec<f64> {
        let mut out = vec![0.0; system.num_cols()];
        for (row, &lambda) in system.rows().iter().zip(&self.lambdas) {
            if lambda == 0.0 {
                continue;
            }
            for (&p, &a) in row.indices().iter().zip(row.values()) {
                out[p] += lambda * a;
            }
        }
        out
    }
}

/// One record of the convergence history, taken after the lower-bound block
/// of each sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryRecord {
    /// Sweep number, from 1.
    pub sweep: usize,
    /// Block number (from 1) after which the record was taken.
    pub substep: usize,
    pub criterion: f64,
    pub primal_kl: f64,
    pub duality_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinkhornReport {
    pub converged: bool,
    pub sweeps: usize,
    pub criterion: f64,
    pub history: Vec<HistoryRecord>,
    pub kernel_underflows: usize,
}

/// Multi-constrained Sinkhorn iteration.
///
/// Blocks are visited in order: affine rows, lower bound, column marginal.
/// [`Sinkhorn::substep`] advances one block; [`Sinkhorn::run`] performs full
/// sweeps and stops right after a lower-bound block once the stopping
/// criterion drops below tolerance.
#[derive(Debug, Clone)]
pub struct Sinkhorn<'a> {
    kernel: &'a GibbsKernel,
    problem: &'a EntropicProblem,
    state: ScalingState,
    log_affine: Vec<f64>,
    // G applied to the column scaling
    kernel_col: Vec<f64>,
    next_block: usize,
    sweeps: usize,
}

impl<'a> Sinkhorn<'a> {
    pub fn new(kernel: &'a GibbsKernel, problem: &'a EntropicProblem) -> Result<Self> {
        let state = ScalingState::ones(problem.system().num_rows(), problem.size());
        Self::with_state(kernel, problem, state)
    }

    /// Start from given scalings (warm start).
    pub fn with_state(kernel: &'a GibbsKernel, problem: &'a EntropicProblem, state: ScalingState) -> Result<Self> {
        let n = problem.size();
        if kernel.size() != n
            || state.lambdas.len() != problem.system().num_rows()
            || state.lower_scale.len() != n
            || state.column_scale.len() != n
        {
            return Err(Error::Parameter("kernel, problem and scalings differ in size".into()));
        }
        let log_affine = state.log_affine(problem.system());
        let kernel_col = mat_vec(kernel.matrix(), &state.column_scale);
        Ok(Self {
            kernel,
            problem,
            state,
            log_affine,
            kernel_col,
            next_block: 0,
            sweeps: 0,
        })
    }

    pub fn state(&self) -> &ScalingState {
        &self.state
    }

    pub fn into_state(self) -> ScalingState {
        self.state
    }

    /// Index (from 0) of the block the next substep will update.
    pub fn next_block(&self) -> usize {
        self.next_block
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// Product of all row-side scalings.
    pub fn row_scaling(&self) -> Vec<f64> {
        self.log_affine
            .iter()
            .zip(&self.state.lower_scale)
            .map(|(l, b)| l.exp() * b)
            .collect()
    }

    /// Current coupling `diag(row scaling) G diag(column scaling)`.
    pub fn coupling(&self) -> DMatrix<f64> {
        let s = self.row_scaling();
        let c = &self.state.column_scale;
        let g = self.kernel.matrix();
        DMatrix::from_fn(g.nrows(), g.ncols(), |p, q| s[p] * g[(p, q)] * c[q])
    }

    /// Advance one block.
    pub fn substep(&mut self) -> Result<()> {
        let rows = self.problem.system().num_rows();
        match self.next_block {
            r if r < rows => self.update_affine(r)?,
            r if r == rows => self.update_lower()?,
            _ => {
                let s = self.row_scaling();
                let transposed = tr_mat_vec(self.kernel.matrix(), &s);
                self.update_column(&transposed)?;
            }
        }
        Ok(())
    }

    /// Complete the current sweep (through the column block).
    pub fn sweep(&mut self) -> Result<()> {
        let start = self.sweeps;
        while self.sweeps == start {
            self.substep()?;
        }
        Ok(())
    }

    fn update_affine(&mut self, r: usize) -> Result<()> {
        let row = &self.problem.system().rows()[r];
        let old = self.state.lambdas[r];
        let log_x: Vec<f64> = row
            .indices()
            .iter()
            .zip(row.values())
            .map(|(&p, &a)| self.log_affine[p] - old * a + self.state.lower_scale[p].ln() + self.kernel_col[p].ln())
            .collect();
        if log_x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Instability {
                row: r,
                message: "scaled row sums left the floating-point range".into(),
            });
        }
        let lambda = solve_row(row.values(), &log_x, self.problem.rhs[r])
            .map_err(|message| Error::Instability { row: r, message })?;
        let delta = lambda - old;
        for (&p, &a) in row.indices().iter().zip(row.values()) {
            self.log_affine[p] += delta * a;
        }
        self.state.lambdas[r] = lambda;
        self.next_block += 1;
        Ok(())
    }

    fn update_lower(&mut self) -> Result<()> {
        let block = self.next_block;
        for p in 0..self.problem.size() {
            let x = self.log_affine[p].exp() * self.kernel_col[p];
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::Instability {
                    row: block,
                    message: format!("row sum {x:e} at path {p}"),
                });
            }
            let floor = self.problem.nu_minus[p];
            self.state.lower_scale[p] = if x >= floor { 1.0 } else { floor / x };
        }
        self.next_block += 1;
        Ok(())
    }

    fn update_column(&mut self, transposed: &[f64]) -> Result<()> {
        let block = self.next_block;
        for (q, (&y, &target)) in transposed.iter().zip(&self.problem.nu_plus).enumerate() {
            let c = target / y;
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::Instability {
                    row: block,
                    message: format!("column scaling {c:e} at path {q}"),
                });
            }
            self.state.column_scale[q] = c;
        }
        self.kernel_col = mat_vec(self.kernel.matrix(), &self.state.column_scale);
        self.next_block = 0;
        self.sweeps += 1;
        Ok(())
    }

    /// Iterate until the stopping criterion evaluated after the lower-bound
    /// block is below `e_tol`, or `max_sweeps` sweeps have been made.
    ///
    /// Must be called at the start of a sweep.
    pub fn run(&mut self, e_tol: f64, max_sweeps: usize) -> Result<SinkhornReport> {
        if !(e_tol > 0.0) {
            return Err(Error::Parameter(format!("e_tol must be > 0, got {e_tol}")));
        }
        if self.next_block != 0 {
            return Err(Error::Parameter("run must start at the beginning of a sweep".into()));
        }
        let rows = self.problem.system().num_rows();
        let total_g: f64 = self.kernel.matrix().iter().sum();
        let mut history = Vec::new();
        let mut criterion = f64::INFINITY;
        for _ in 0..max_sweeps {
            for r in 0..rows {
                self.update_affine(r)?;
            }
            self.update_lower()?;

            let s = self.row_scaling();
            let row_sums: Vec<f64> = s.iter().zip(&self.kernel_col).map(|(a, b)| a * b).collect();
            let transposed = tr_mat_vec(self.kernel.matrix(), &s);
            let col_sums: Vec<f64> = transposed
                .iter()
                .zip(&self.state.column_scale)
                .map(|(a, b)| a * b)
                .collect();
            criterion = self.problem.criterion_from_sums(&row_sums, &col_sums);
            if !criterion.is_finite() {
                return Err(Error::Instability {
                    row: rows,
                    message: "non-finite stopping criterion".into(),
                });
            }
            let (primal_kl, duality_gap) = self.objectives(&row_sums, &col_sums, total_g);
            history.push(HistoryRecord {
                sweep: self.sweeps + 1,
                substep: rows + 1,
                criterion,
                primal_kl,
                duality_gap,
            });
            if criterion < e_tol {
                return Ok(SinkhornReport {
                    converged: true,
                    sweeps: self.sweeps + 1,
                    criterion,
                    history,
                    kernel_underflows: self.kernel.underflows(),
                });
            }
            self.update_column(&transposed)?;
        }
        Ok(SinkhornReport {
            converged: false,
            sweeps: self.sweeps,
            criterion,
            history,
            kernel_underflows: self.kernel.underflows(),
        })
    }

    /// KL of the current coupling to `G`, and the primal-dual gap, from row
    /// and column sums.
    fn objectives(&self, row_sums: &[f64], col_sums: &[f64], total_g: f64) -> (f64, f64) {
        let eps = self.kernel.epsilon();
        let mass: f64 = row_sums.iter().sum();
        let mut kl = total_g - mass;
        let mut gap = 0.0;
        for (p, &x) in row_sums.iter().enumerate() {
            let log_lower = self.state.lower_scale[p].ln();
            kl += x * (self.log_affine[p] + log_lower);
            gap += log_lower * (x - self.problem.nu_minus[p]);
        }
        for (q, &y) in col_sums.iter().enumerate() {
            let log_c = self.state.column_scale[q].ln();
            kl += y * log_c;
            gap += log_c * (y - self.problem.nu_plus[q]);
        }
        for ((row, &rhs), &lambda) in self.problem.system().rows().iter().zip(&self.problem.rhs).zip(&self.state.lambdas) {
            gap += lambda * (row.dot(row_sums) - rhs);
        }
        (kl, eps * gap)
    }
}

fn mat_vec(g: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let out = g * DVector::from_column_slice(v);
    out.iter().copied().collect()
}

fn tr_mat_vec(g: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let out = g.tr_mul(&DVector::from_column_slice(v));
    out.iter().copied().collect()
}

/// Value of the dual objective at the potentials `eps * log(scalings)`.
pub fn dual_objective(state: &ScalingState, kernel: &GibbsKernel, problem: &EntropicProblem) -> Result<f64> {
    let eps = kernel.epsilon();
    if let Some(a) = state.lower_scale.iter().find(|a| a.ln() < -1e-10) {
        return Err(Error::Parameter(format!(
            "lower-bound potential outside the dual domain (scaling {a} < 1)"
        )));
    }
    let mut dual = 0.0;
    for (&lambda, &rhs) in state.lambdas.iter().zip(&problem.rhs) {
        dual += eps * lambda * rhs;
    }
    for (a, m) in state.lower_scale.iter().zip(&problem.nu_minus) {
        dual += eps * a.ln() * m;
    }
    for (c, p) in state.column_scale.iter().zip(&problem.nu_plus) {
        dual += eps * c.ln() * p;
    }
    let log_affine = state.log_affine(problem.system());
    let g = kernel.matrix();
    let mut excess = 0.0;
    for q in 0..g.ncols() {
        for p in 0..g.nrows() {
            let scaled = (log_affine[p].exp() * state.lower_scale[p]) * g[(p, q)] * state.column_scale[q];
            excess += scaled - g[(p, q)];
        }
    }
    Ok(dual - eps * excess)
}

/// `eps KL(M | G)` minus the dual objective at `state`.
pub fn duality_gap(
    coupling: &DMatrix<f64>,
    state: &ScalingState,
    kernel: &GibbsKernel,
    problem: &EntropicProblem,
) -> Result<f64> {
    let primal = kernel.epsilon() * kl_divergence(coupling, kernel.matrix());
    Ok(primal - dual_objective(state, kernel, problem)?)
}

/// Iterates of the full-matrix reference algorithm.
#[derive(Debug, Clone)]
pub struct DykstraTrace {
    /// `iterates[n][r]` is the coupling after block `r` of sweep `n + 1`.
    pub iterates: Vec<Vec<DMatrix<f64>>>,
    /// Correction matrices at the end of each sweep, one per block.
    pub corrections: Vec<Vec<DMatrix<f64>>>,
}

/// Reference implementation with explicit KL projections and correction
/// matrices, starting from `X = G` and corrections equal to one.
pub fn dykstra_run(kernel: &GibbsKernel, problem: &EntropicProblem, sweeps: usize) -> Result<DykstraTrace> {
    let g = kernel.matrix();
    let (n, _) = g.shape();
    let blocks = problem.num_blocks();
    let rows = problem.system().num_rows();
    let mut x = g.clone();
    let mut corr = vec![DMatrix::from_element(n, n, 1.0); blocks];
    let mut iterates = Vec::with_capacity(sweeps);
    let mut corrections = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        let mut this = Vec::with_capacity(blocks);
        for r in 0..blocks {
            let y = x.component_mul(&corr[r]);
            let projected = if r < rows {
                let row = &problem.system().rows()[r];
                let sums: Vec<f64> = y.row_iter().map(|v| v.sum()).collect();
                let lambda = bisect_row(row.values(), &row.indices().iter().map(|&p| sums[p]).collect::<Vec<_>>(), problem.rhs[r])
                    .ok_or(Error::Instability {
                        row: r,
                        message: "reference root finder failed".into(),
                    })?;
                let mut out = y.clone();
                for (&p, &a) in row.indices().iter().zip(row.values()) {
                    let f = (lambda * a).exp();
                    out.row_mut(p).iter_mut().for_each(|v| *v *= f);
                }
                out
            } else if r == rows {
                let mut out = y.clone();
                for p in 0..n {
                    let s = y.row(p).sum();
                    let target = s.max(problem.nu_minus[p]);
                    let f = target / s;
                    out.row_mut(p).iter_mut().for_each(|v| *v *= f);
                }
                out
            } else {
                let mut out = y.clone();
                for q in 0..n {
                    let s = y.column(q).sum();
                    let f = problem.nu_plus[q] / s;
                    out.column_mut(q).iter_mut().for_each(|v| *v *= f);
                }
                out
            };
            corr[r] = y.component_div(&projected);
            x = projected;
            this.push(x.clone());
        }
        iterates.push(this);
        corrections.push(corr.clone());
    }
    Ok(DykstraTrace { iterates, corrections })
}

// Plain bisection for the reference algorithm, independent of `solve_row`.
fn bisect_row(coeffs: &[f64], x: &[f64], rhs: f64) -> Option<f64> {
    let f = |lambda: f64| coeffs.iter().zip(x).map(|(a, v)| a * v * (lambda * a).exp()).sum::<f64>() - rhs;
    let mut lo = -1.0;
    let mut hi = 1.0;
    while f(lo) > 0.0 {
        lo *= 2.0;
        if lo < -1e6 {
            return None;
        }
    }
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return None;
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == 0.0 {
            return Some(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (f(lo).abs(), f(hi).abs());
    Some(if flo <= fhi { lo } else { hi })
}

/// One point of the regularization sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub epsilon: f64,
    /// `<M_eps, D>`; `None` if the solve failed.
    pub cost: Option<f64>,
    pub criterion: Option<f64>,
    pub converged: bool,
    pub sweeps: usize,
    pub error: Option<String>,
}

/// Solve for each `eps` in turn (decreasing), warm-starting from the
/// previous potentials when `warm_start` is set. Failures are recorded and
/// the sweep continues from the last successful state.
pub fn epsilon_sweep(
    distance: &DMatrix<f64>,
    problem: &EntropicProblem,
    eps_list: &[f64],
    e_tol: f64,
    max_sweeps: usize,
    warm_start: bool,
) -> Result<Vec<SweepPoint>> {
    if eps_list.is_empty() {
        return Err(Error::Parameter("epsilon list is empty".into()));
    }
    if eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Parameter("epsilons must be > 0".into()));
    }
    let mut out = Vec::with_capacity(eps_list.len());
    let mut previous: Option<(f64, ScalingState)> = None;
    for &eps in eps_list {
        let kernel = GibbsKernel::new(distance, eps)?;
        let start = match (&previous, warm_start) {
            (Some((from, state)), true) => state.rescaled(*from, eps),
            _ => ScalingState::ones(problem.system().num_rows(), problem.size()),
        };
        let attempt = Sinkhorn::with_state(&kernel, problem, start).and_then(|mut solver| {
            let report = solver.run(e_tol, max_sweeps)?;
            let cost = solver.coupling().component_mul(distance).sum();
            Ok((report, cost, solver.into_state()))
        });
        match attempt {
            Ok((report, cost, state)) => {
                out.push(SweepPoint {
                    epsilon: eps,
                    cost: Some(cost),
                    criterion: Some(report.criterion),
                    converged: report.converged,
                    sweeps: report.sweeps,
                    error: None,
                });
                previous = Some((eps, state));
            }
            Err(e) => out.push(SweepPoint {
                epsilon: eps,
                cost: None,
                criterion: None,
                converged: false,
                sweeps: 0,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(out)
}
