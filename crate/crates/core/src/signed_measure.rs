//! Signed marginals read off call prices, the joint signed measure on
//! `Theta^m`, and its decomposition into two strictly positive parts.
//!
//! For one smile, augmented with `(0, 1)` in front and `(k_max, 0)` at the
//! end, the marginal puts on each strike the jump of the slope of the
//! piecewise-linear price curve. It has unit mass, and it is a probability
//! measure exactly when the smile is free of butterfly and vertical-spread
//! arbitrage.

use nalgebra::DMatrix;

use crate::constraints::ConstraintSystem;
use crate::error::{Error, Result};
use crate::grid::{PathIndexer, Theta};
use crate::lp::solve_eq_lsq;
use crate::market_data::Smile;

/// Default positive shift added to both parts of the decomposition.
pub const DEFAULT_SHIFT: f64 = 1e-3;

/// Discrete signed measure on the augmented strikes of one smile.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMarginal {
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SignedMarginal {
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.weights).map(|(x, w)| x * w).sum()
    }

    /// `sum_x (x - k)+ w(x)`.
    pub fn call_price(&self, k: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| (x - k).max(0.0) * w)
            .sum()
    }

    /// Weights spread onto the grid, zero on atoms outside the support.
    pub fn on_theta(&self, theta: &Theta) -> Result<Vec<f64>> {
        let mut out = vec![0.0; theta.len()];
        for (&x, &w) in self.support.iter().zip(&self.weights) {
            let pos = theta
                .position(x)
                .ok_or_else(|| Error::Index(format!("strike {x} is not an atom of the grid")))?;
            out[pos] += w;
        }
        Ok(out)
    }
}

fn check_augmented(strikes: &[f64], prices: &[f64]) -> Result<()> {
    if strikes.len() != prices.len() || strikes.len() < 2 {
        return Err(Error::Parameter("augmented smile needs matching strikes and prices".into()));
    }
    if let Some(w) = strikes.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::DuplicateStrike(w[1]));
    }
    Ok(())
}

/// Slope jumps of the augmented price curve.
///
/// `strikes` runs from `0` to `k_max` and `prices` from `1` to `0`.
pub fn marginal_weights(strikes: &[f64], prices: &[f64]) -> Result<SignedMarginal> {
    check_augmented(strikes, prices)?;
    let n = strikes.len();
    let slope = |j: usize| (prices[j + 1] - prices[j]) / (strikes[j + 1] - strikes[j]);
    let mut weights = Vec::with_capacity(n);
    weights.push(1.0 + slope(0));
    for j in 1..n - 1 {
        weights.push(slope(j) - slope(j - 1));
    }
    weights.push(-slope(n - 2));
    Ok(SignedMarginal {
        support: strikes.to_vec(),
        weights,
    })
}

/// Marginal of a quoted smile with the grid's upper atom `kmax`.
pub fn smile_marginal(smile: &Smile, kmax: f64) -> Result<SignedMarginal> {
    marginal_weights(&smile.augmented_strikes(kmax), &smile.augmented_prices())
}

/// Piecewise-linear interpolation of the augmented curve; `0` from `k_max`
/// on, and `1 - k` for negative `k`.
pub fn pricing_function(strikes: &[f64], prices: &[f64], k: f64) -> f64 {
    let last = strikes.len() - 1;
    if k >= strikes[last] {
        return 0.0;
    }
    if k <= strikes[0] {
        return prices[0] - (k - strikes[0]);
    }
    let j = strikes.partition_point(|&x| x <= k) - 1;
    let t = (k - strikes[j]) / (strikes[j + 1] - strikes[j]);
    prices[j] + t * (prices[j + 1] - prices[j])
}

/// `|sum_x (x - k)+ w(x) - pricing_function(k)|`.
pub fn check_lemma_identity(marginal: &SignedMarginal, strikes: &[f64], prices: &[f64], k: f64) -> f64 {
    (marginal.call_price(k) - pricing_function(strikes, prices, k)).abs()
}

/// Product measure `w_1 (x) .. (x) w_m` on `Theta^m`.
pub fn product_measure(marginals: &[Vec<f64>]) -> Result<Vec<f64>> {
    let l = marginals.first().map_or(0, Vec::len);
    let idx = PathIndexer::new(l, marginals.len())?;
    let mut buf = vec![0; marginals.len()];
    Ok((0..idx.num_paths())
        .map(|p| {
            idx.decode_into(p, &mut buf);
            buf.iter().zip(marginals).map(|(&j, w)| w[j]).product()
        })
        .collect())
}

/// Joint signed measure with marginals `marginals` and zero conditional
/// increments, closest in Euclidean norm to the product of the marginals.
pub fn build_joint(marginals: &[Vec<f64>], system: &ConstraintSystem) -> Result<Vec<f64>> {
    let target = product_measure(marginals)?;
    if target.len() != system.num_cols() {
        return Err(Error::Parameter("joint system does not match the marginals".into()));
    }
    let a: DMatrix<f64> = system.to_dense();
    solve_eq_lsq(&a, system.rhs(), &target)
}

/// `nu = nu_plus - nu_minus` with both parts strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSignedMeasure {
    pub nu: Vec<f64>,
    pub nu_plus: Vec<f64>,
    pub nu_minus: Vec<f64>,
    /// Total mass of `nu_plus`.
    pub alpha: f64,
    pub shift: f64,
}

/// Positive and negative parts of `nu`, each raised by `shift`.
pub fn decompose(nu: &[f64], shift: f64) -> Result<JointSignedMeasure> {
    if !(shift > 0.0) || !shift.is_finite() {
        return Err(Error::InvalidShift(shift));
    }
    let nu_plus: Vec<f64> = nu.iter().map(|&v| v.max(0.0) + shift).collect();
    let nu_minus: Vec<f64> = nu.iter().map(|&v| (-v).max(0.0) + shift).collect();
    let alpha = nu_plus.iter().sum();
    Ok(JointSignedMeasure {
        nu: nu.to_vec(),
        nu_plus,
        nu_minus,
        alpha,
        shift,
    })
}
