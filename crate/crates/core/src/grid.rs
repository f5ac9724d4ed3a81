//! The common strike grid, the choice of `k_max`, path indexing over
//! `Theta^m` and the path distance matrix.
//!
//! Indices are 0-based throughout the crate: atom `0` of [`Theta`] is the
//! strike `0`, and path `p` has multi-index `(p_1, .., p_m)` with
//! `p = sum_i p_i * l^(m - 1 - i)`, i.e. the first period is the most
//! significant digit. Files written by the CLI report 1-based path indices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::market_data::NormalizedSurface;

/// Default multiplicative slack applied to the `k_max` bound.
pub const DEFAULT_KMAX_MARGIN: f64 = 0.1;

const DEDUP_RTOL: f64 = 1e-12;

/// Sorted strike atoms `0 = k_0 < k_1 < .. < k_{l-1} = k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    strikes: Vec<f64>,
}

impl Theta {
    /// Build from arbitrary strikes; sorts, deduplicates and validates.
    pub fn from_strikes(mut strikes: Vec<f64>) -> Result<Self> {
        strikes.sort_by(f64::total_cmp);
        strikes.dedup_by(|a, b| (*a - *b).abs() <= DEDUP_RTOL * a.abs().max(b.abs()));
        if strikes.len() < 2 || strikes[0] != 0.0 || strikes.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidSurface("Theta needs 0 and at least one positive finite atom".into()));
        }
        Ok(Self { strikes })
    }

    pub fn strikes(&self) -> &[f64] {
        &self.strikes
    }

    pub fn len(&self) -> usize {
        self.strikes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strikes.is_empty()
    }

    pub fn kmax(&self) -> f64 {
        self.strikes[self.strikes.len() - 1]
    }

    /// Position of a strike in the grid, using the dedup tolerance.
    pub fn position(&self, k: f64) -> Option<usize> {
        let idx = self.strikes.partition_point(|&x| x < k);
        [idx.saturating_sub(1), idx, idx + 1]
            .into_iter()
            .filter(|&i| i < self.strikes.len())
            .find(|&i| (self.strikes[i] - k).abs() <= DEDUP_RTOL * self.strikes[i].abs().max(k.abs()))
    }
}

/// Union of all quoted strikes with `0` and `k_max`.
pub fn build_theta(surface: &NormalizedSurface, kmax: f64) -> Result<Theta> {
    let max_strike = surface.max_strike();
    if !(kmax > max_strike) || !kmax.is_finite() {
        return Err(Error::InvalidKmax { kmax, max_strike });
    }
    let mut strikes = vec![0.0, kmax];
    for s in surface.smiles() {
        strikes.extend_from_slice(&s.strikes);
    }
    Theta::from_strikes(strikes)
}

/// A calibration target: the price `price` of the call struck at node `node`
/// of maturity `maturity`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPoint {
    pub maturity: usize,
    pub strike: f64,
    pub price: f64,
}

/// Upper atom of the grid that guarantees a (calibrated) martingale exists.
///
/// Without calibration this is `(1 + margin) * max(1, max strike)`. With
/// calibration points, `a` is the largest negative difference quotient of the
/// calibration prices (each smile augmented with the point `(0, 1)`) and the
/// bound is `max(max strike, max_i [k_last - 2 c_last / a])`; the result is
/// additionally kept at or above `1 + margin`.
pub fn choose_kmax(surface: &NormalizedSurface, calibration: &[CalibrationPoint], margin: f64) -> Result<f64> {
    if !(margin > 0.0) || !margin.is_finite() {
        return Err(Error::Parameter(format!("k_max margin must be > 0, got {margin}")));
    }
    let max_strike = surface.max_strike();
    if calibration.is_empty() {
        return Ok((1.0 + margin) * max_strike.max(1.0));
    }

    let mut points: Vec<(f64, f64)> = vec![(0.0, 1.0)];
    points.extend(calibration.iter().map(|c| (c.strike, c.price)));
    let mut slope = f64::NEG_INFINITY;
    for (a, &(ka, ca)) in points.iter().enumerate() {
        for &(kb, cb) in &points[a + 1..] {
            if ka == kb {
                continue;
            }
            let q = (ca - cb) / (ka - kb);
            if q < 0.0 {
                slope = slope.max(q);
            }
        }
    }
    if !slope.is_finite() {
        return Err(Error::DegenerateCalibration);
    }

    let mut bound = max_strike.max(1.0);
    for i in 0..surface.num_maturities() {
        let last = calibration
            .iter()
            .filter(|c| c.maturity == i)
            .max_by(|x, y| x.strike.total_cmp(&y.strike));
        if let Some(last) = last {
            bound = bound.max(last.strike - 2.0 * last.price / slope);
        }
    }
    Ok((1.0 + margin) * bound)
}

/// Bijection between flat path indices and multi-indices in `[0, l)^m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathIndexer {
    atoms: usize,
    periods: usize,
    paths: usize,
}

impl PathIndexer {
    pub fn new(atoms: usize, periods: usize) -> Result<Self> {
        if atoms == 0 || periods == 0 {
            return Err(Error::Index("need at least one atom and one period".into()));
        }
        let paths = u32::try_from(periods)
            .ok()
            .and_then(|m| atoms.checked_pow(m))
            .ok_or_else(|| Error::Index(format!("{atoms}^{periods} paths overflow")))?;
        Ok(Self { atoms, periods, paths })
    }

    pub fn atoms(&self) -> usize {
        self.atoms
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn num_paths(&self) -> usize {
        self.paths
    }

    pub fn encode(&self, tuple: &[usize]) -> Result<usize> {
        if tuple.len() != self.periods {
            return Err(Error::Index(format!("expected {} components, got {}", self.periods, tuple.len())));
        }
        let mut p = 0;
        for &t in tuple {
            if t >= self.atoms {
                return Err(Error::Index(format!("component {t} not below {}", self.atoms)));
            }
            p = p * self.atoms + t;
        }
        Ok(p)
    }

    pub fn decode(&self, p: usize) -> Result<Vec<usize>> {
        if p >= self.paths {
            return Err(Error::Index(format!("path {p} not below {}", self.paths)));
        }
        let mut out = vec![0; self.periods];
        self.decode_into(p, &mut out);
        Ok(out)
    }

    /// Unchecked decode into a caller buffer of length `m`.
    pub(crate) fn decode_into(&self, mut p: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = p % self.atoms;
            p /= self.atoms;
        }
    }

    /// Component `period` of path `p` without allocating.
    pub fn component(&self, p: usize, period: usize) -> usize {
        let shift = self.periods - 1 - period;
        (p / self.atoms.pow(shift as u32)) % self.atoms
    }

    /// Strike values along path `p`.
    pub fn path(&self, theta: &Theta, p: usize) -> Result<Vec<f64>> {
        Ok(self.decode(p)?.into_iter().map(|j| theta.strikes()[j]).collect())
    }
}

/// Euclidean distances between all paths of `Theta^m`.
pub fn distance_matrix(theta: &Theta, periods: usize) -> Result<DMatrix<f64>> {
    let idx = PathIndexer::new(theta.len(), periods)?;
    let n = idx.num_paths();
    let coords: Vec<Vec<f64>> = (0..n).map(|p| idx.path(theta, p)).collect::<Result<_>>()?;
    let mut d = DMatrix::zeros(n, n);
    for p in 0..n {
        for q in p + 1..n {
            let dist = coords[p]
                .iter()
                .zip(&coords[q])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d[(p, q)] = dist;
            d[(q, p)] = dist;
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::Smile;
    use proptest::prelude::*;

    fn surface(strikes: Vec<Vec<f64>>) -> NormalizedSurface {
        let smiles = strikes
            .into_iter()
            .enumerate()
            .map(|(i, ks)| Smile {
                maturity: 0.1 * (i + 1) as f64,
                prices: ks.iter().map(|_| 0.01).collect(),
                strikes: ks,
            })
            .collect();
        NormalizedSurface::new(smiles).unwrap()
    }

    #[test]
    fn theta_union() {
        let s = surface(vec![vec![0.9, 1.0], vec![1.0, 1.1]]);
        let theta = build_theta(&s, 2.0).unwrap();
        assert_eq!(theta.strikes(), &[0.0, 0.9, 1.0, 1.1, 2.0]);
        assert_eq!(theta.len(), 5);
        let s = surface(vec![vec![1.0]]);
        assert_eq!(build_theta(&s, 2.0).unwrap().strikes(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn theta_rejects_small_kmax() {
        let s = surface(vec![vec![0.9, 1.1]]);
        assert!(matches!(build_theta(&s, 1.05), Err(Error::InvalidKmax { .. })));
        assert!(matches!(build_theta(&s, 1.1), Err(Error::InvalidKmax { .. })));
    }

    #[test]
    fn theta_merges_near_duplicates() {
        let s = surface(vec![vec![1.0], vec![1.0 + 1e-14]]);
        assert_eq!(build_theta(&s, 2.0).unwrap().len(), 3);
        let theta = build_theta(&s, 2.0).unwrap();
        assert_eq!(theta.position(1.0 + 1e-14), Some(1));
        assert_eq!(theta.position(1.5), None);
        assert_eq!(theta.position(0.0), Some(0));
    }

    #[test]
    fn kmax_without_calibration() {
        let s = surface(vec![vec![0.9, 1.2]]);
        assert!((choose_kmax(&s, &[], 0.1).unwrap() - 1.32).abs() < 1e-15);
        let s = surface(vec![vec![0.8, 0.9]]);
        assert!((choose_kmax(&s, &[], 0.1).unwrap() - 1.1).abs() < 1e-15);
    }

    #[test]
    fn kmax_with_calibration() {
        let s = surface(vec![vec![1.0]]);
        let cal = [CalibrationPoint { maturity: 0, strike: 1.0, price: 0.05 }];
        let a: f64 = -0.95;
        let expected = 1.1 * (1.0 - 2.0 / a * 0.05);
        let got = choose_kmax(&s, &cal, 0.1).unwrap();
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
        assert!((got / 1.1 - 1.105_263_157_894_736_8).abs() < 1e-12);
    }

    #[test]
    fn kmax_degenerate_calibration() {
        let s = surface(vec![vec![1.0]]);
        let cal = [CalibrationPoint { maturity: 0, strike: 1.0, price: 1.0 }];
        assert!(matches!(choose_kmax(&s, &cal, 0.1), Err(Error::DegenerateCalibration)));
    }

    #[test]
    fn encode_decode_examples() {
        let idx = PathIndexer::new(3, 2).unwrap();
        // 1-based (2,2) is 0-based (1,1) -> 1-based 5
        assert_eq!(idx.encode(&[1, 1]).unwrap() + 1, 5);
        assert_eq!(idx.encode(&[0, 0]).unwrap(), 0);
        assert_eq!(idx.encode(&[2, 2]).unwrap() + 1, 9);
        let idx = PathIndexer::new(4, 3).unwrap();
        assert_eq!(idx.decode(63).unwrap(), vec![3, 3, 3]);
        assert!(idx.decode(64).is_err());
        assert!(idx.encode(&[4, 0, 0]).is_err());
        assert!(idx.encode(&[0, 0]).is_err());
    }

    #[test]
    fn distance_examples() {
        let theta = Theta::from_strikes(vec![0.0, 1.0, 2.0]).unwrap();
        let d = distance_matrix(&theta, 1).unwrap();
        assert_eq!(d[(0, 1)], 1.0);
        assert_eq!(d[(0, 2)], 2.0);
        let d2 = distance_matrix(&theta, 2).unwrap();
        let idx = PathIndexer::new(3, 2).unwrap();
        let p = idx.encode(&[0, 0]).unwrap();
        let q = idx.encode(&[1, 1]).unwrap();
        assert!((d2[(p, q)] - 2f64.sqrt()).abs() < 1e-15);
        assert!((0..9).all(|i| d2[(i, i)] == 0.0));
    }

    proptest! {
        #[test]
        fn encode_decode_bijection(l in 1usize..=10, m in 1usize..=3, seed in any::<u64>()) {
            let idx = PathIndexer::new(l, m).unwrap();
            let p = (seed as usize) % idx.num_paths();
            let t = idx.decode(p).unwrap();
            prop_assert_eq!(idx.encode(&t).unwrap(), p);
            for (i, &c) in t.iter().enumerate() {
                prop_assert_eq!(idx.component(p, i), c);
            }
            let tuple: Vec<usize> = (0..m).map(|i| ((seed >> (8 * i)) as usize) % l).collect();
            prop_assert_eq!(idx.decode(idx.encode(&tuple).unwrap()).unwrap(), tuple);
        }

        #[test]
        fn distance_is_a_metric(ks in proptest::collection::vec(0.01f64..3.0, 1..4), m in 1usize..=2) {
            let mut all = ks.clone();
            all.push(0.0);
            let theta = Theta::from_strikes(all).unwrap();
            let d = distance_matrix(&theta, m).unwrap();
            let n = d.nrows();
            for p in 0..n {
                prop_assert_eq!(d[(p, p)], 0.0);
                for q in 0..n {
                    prop_assert_eq!(d[(p, q)], d[(q, p)]);
                    prop_assert!(d[(p, q)] >= 0.0);
                    for r in 0..n {
                        prop_assert!(d[(p, r)] <= d[(p, q)] + d[(q, r)] + 1e-12);
                    }
                }
            }
        }

        #[test]
        fn kmax_exceeds_strikes(ks in proptest::collection::vec(0.2f64..3.0, 1..6), margin in 0.01f64..0.5) {
            let mut ks = ks;
            ks.sort_by(f64::total_cmp);
            ks.dedup();
            let s = surface(vec![ks.clone()]);
            let kmax = choose_kmax(&s, &[], margin).unwrap();
            prop_assert!(kmax > 1.0);
            prop_assert!(ks.iter().all(|&k| kmax > k));
        }
    }
}
