//! Shared fixtures and reference solvers for the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use martingale_repair::constraints::{build_martingale_system, ConstraintSystem};
use martingale_repair::entropic::EntropicProblem;
use martingale_repair::grid::{distance_matrix, Theta};
use martingale_repair::io;
use martingale_repair::market_data::{synthetic_surface, NormalizedSurface, StressScenario};
use martingale_repair::signed_measure::{decompose, product_measure};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn load(name: &str) -> NormalizedSurface {
    io::read_surface(&data_path(name)).unwrap().surface
}

/// One maturity, eight strikes, from a quote file.
pub fn desk_m1() -> NormalizedSurface {
    load("desk_m1.csv")
}

/// Two maturities on a shared five-strike grid.
pub fn desk_m2() -> NormalizedSurface {
    load("desk_m2.csv")
}

pub fn scenario(name: &str) -> StressScenario {
    serde_json::from_str(&std::fs::read_to_string(data_path(name)).unwrap()).unwrap()
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Skewed Black–Scholes surface on a common strike list.
pub fn random_surface(rng: &mut StdRng, periods: usize, strikes: usize) -> NormalizedSurface {
    let base = rng.random_range(0.12..0.35);
    let skew = rng.random_range(-0.4..0.0);
    let step = rng.random_range(0.02..0.08);
    let ks: Vec<f64> = (0..strikes)
        .map(|j| 1.0 + step * (j as f64 - (strikes as f64 - 1.0) / 2.0))
        .collect();
    let maturities: Vec<f64> = (0..periods).map(|i| 0.1 + 0.15 * i as f64).collect();
    synthetic_surface(&maturities, &vec![ks; periods], |_, k| (base + skew * k.ln()).max(0.05)).unwrap()
}

/// Random entropic instance on a small grid, with a signed `nu` carrying the
/// martingale structure only approximately.
pub fn random_entropic_problem(rng: &mut StdRng, periods: usize, atoms: usize) -> (DMatrix<f64>, EntropicProblem) {
    let mut strikes = vec![0.0];
    let mut x = 0.0;
    for _ in 1..atoms {
        x += rng.random_range(0.2..0.8);
        strikes.push(x);
    }
    let mean = strikes.iter().sum::<f64>() / atoms as f64;
    let theta = Theta::from_strikes(strikes.iter().map(|s| s / mean).collect()).unwrap();
    let marginal: Vec<f64> = {
        let raw: Vec<f64> = (0..atoms).map(|_| rng.random_range(-0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|w| w / total).collect()
    };
    let nu = product_measure(&vec![marginal; periods]).unwrap();
    let nu = decompose(&nu, rng.random_range(1e-3..1e-2)).unwrap();
    let system = build_martingale_system(&theta, periods).unwrap();
    (distance_matrix(&theta, periods).unwrap(), EntropicProblem::new(system, &nu).unwrap())
}

/// `max |a - b|` entrywise.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

/// Optimum of `min c.x, A x = b, x >= 0` by trying every basis.
///
/// `None` if there is no feasible vertex.
pub fn vertex_enumeration(c: &[f64], a: &DMatrix<f64>, b: &[f64]) -> Option<f64> {
    let (a, b) = independent_rows(a, b)?;
    let (rows, cols) = a.shape();
    let mut best: Option<f64> = None;
    let mut basis: Vec<usize> = (0..rows).collect();
    loop {
        let sub = DMatrix::from_fn(rows, rows, |i, j| a[(i, basis[j])]);
        let lu = sub.clone().lu();
        if let Some(xb) = lu.solve(&DVector::from_column_slice(&b)) {
            let residual = (&sub * &xb - DVector::from_column_slice(&b)).amax();
            if residual < 1e-9 && xb.iter().all(|v| *v >= -1e-11) {
                let value: f64 = basis.iter().zip(xb.iter()).map(|(&j, v)| c[j] * v).sum();
                best = Some(best.map_or(value, |bv: f64| bv.min(value)));
            }
        }
        if !next_combination(&mut basis, cols) {
            break;
        }
    }
    best
}

fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    for i in (0..k).rev() {
        if comb[i] < n - k + i {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Drop dependent rows by Gaussian elimination; `None` if inconsistent.
fn independent_rows(a: &DMatrix<f64>, b: &[f64]) -> Option<(DMatrix<f64>, Vec<f64>)> {
    let (rows, cols) = a.shape();
    let mut aug = DMatrix::from_fn(rows, cols + 1, |i, j| if j < cols { a[(i, j)] } else { b[i] });
    let mut r = 0;
    for col in 0..cols {
        if r == rows {
            break;
        }
        let (piv, val) = (r..rows)
            .map(|i| (i, aug[(i, col)].abs()))
            .fold((r, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val < 1e-10 {
            continue;
        }
        aug.swap_rows(r, piv);
        for i in 0..rows {
            if i != r {
                let f = aug[(i, col)] / aug[(r, col)];
                if f != 0.0 {
                    for j in 0..=cols {
                        aug[(i, j)] -= f * aug[(r, j)];
                    }
                }
            }
        }
        r += 1;
    }
    if (r..rows).any(|i| aug[(i, cols)].abs() > 1e-9) {
        return None;
    }
    let a2 = aug.view((0, 0), (r, cols)).into_owned();
    let b2 = (0..r).map(|i| aug[(i, cols)]).collect();
    Some((a2, b2))
}

/// The projection LP written out directly: coupling entries, then `mu`.
/// Rows: coupling row sums minus `mu` equal `nu-`, column sums equal `nu+`,
/// and the martingale system applied to `mu`.
pub fn projection_lp(
    distance: &DMatrix<f64>,
    nu_plus: &[f64],
    nu_minus: &[f64],
    system: &ConstraintSystem,
) -> (Vec<f64>, DMatrix<f64>, Vec<f64>) {
    let n = distance.nrows();
    let vars = n * n + n;
    let rows = 2 * n + system.num_rows();
    let mut a = DMatrix::zeros(rows, vars);
    let mut b = Vec::with_capacity(rows);
    for p in 0..n {
        for q in 0..n {
            a[(p, p * n + q)] = 1.0;
        }
        a[(p, n * n + p)] = -1.0;
        b.push(nu_minus[p]);
    }
    for q in 0..n {
        for p in 0..n {
            a[(n + q, p * n + q)] = 1.0;
        }
        b.push(nu_plus[q]);
    }
    for (r, row) in system.rows().iter().enumerate() {
        for (&j, &v) in row.indices().iter().zip(row.values()) {
            a[(2 * n + r, n * n + j)] = v;
        }
        b.push(system.rhs()[r]);
    }
    let mut c: Vec<f64> = distance.iter().copied().collect();
    // column-major iteration of a symmetric matrix is fine
    c.extend(std::iter::repeat_n(0.0, n));
    (c, a, b)
}

/// 1-D Wasserstein-1 distance between measures of equal mass on sorted
/// atoms: the integral of the absolute difference of the cumulative sums.
pub fn w1_on_line(atoms: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut cum = 0.0;
    let mut total = 0.0;
    for j in 0..atoms.len() - 1 {
        cum += a[j] - b[j];
        total += cum.abs() * (atoms[j + 1] - atoms[j]);
    }
    total
}
