//! Option quotes, forward/discount estimation, normalization to forward
//! moneyness, Black–Scholes conversions and volatility stress scenarios.
//!
//! Everything downstream of this module works in normalized units:
//! moneyness `k = K / F` and price `c = C / (F * D)`, so that a call on the
//! normalized underlying has value 1 at strike 0.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Two quotes whose maturities (or strikes) differ by less than this relative
/// amount are treated as the same node.
const SAME_NODE_RTOL: f64 = 1e-12;

fn same_node(a: f64, b: f64) -> bool {
    (a - b).abs() <= SAME_NODE_RTOL * a.abs().max(b.abs()).max(1.0)
}

/// One row of the quote file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub maturity_years: f64,
    pub strike: f64,
    pub call_mid: f64,
    pub put_mid: Option<f64>,
    pub volume: f64,
}

/// Forward and discount factor for one maturity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub maturity: f64,
    pub forward: f64,
    pub discount: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MarketCurve {
    pub points: Vec<CurvePoint>,
}

impl MarketCurve {
    pub fn new(points: Vec<CurvePoint>) -> Result<Self> {
        for p in &points {
            if !(p.forward > 0.0) || !(p.discount > 0.0 && p.discount <= 1.0) {
                return Err(Error::InvalidSurface(format!(
                    "curve point at maturity {} has forward {} and discount {}",
                    p.maturity, p.forward, p.discount
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn get(&self, maturity: f64) -> Option<&CurvePoint> {
        self.points.iter().find(|p| same_node(p.maturity, maturity))
    }
}

/// Result of the put-call parity regression at one maturity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityFit {
    pub forward: f64,
    pub discount: f64,
    /// Root-mean-square regression residual, in currency units.
    pub residual_rms: f64,
    pub strikes_used: usize,
}

/// Normalized call prices for a single maturity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Smile {
    pub maturity: f64,
    pub strikes: Vec<f64>,
    pub prices: Vec<f64>,
}

impl Smile {
    pub fn len(&self) -> usize {
        self.strikes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strikes.is_empty()
    }

    /// Strikes with `0` prepended and `kmax` appended.
    pub fn augmented_strikes(&self, kmax: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() + 2);
        out.push(0.0);
        out.extend_from_slice(&self.strikes);
        out.push(kmax);
        out
    }

    /// Prices with `1` prepended (the value at strike 0) and `0` appended.
    pub fn augmented_prices(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() + 2);
        out.push(1.0);
        out.extend_from_slice(&self.prices);
        out.push(0.0);
        out
    }
}

/// Normalized call prices on a possibly non-rectangular grid.
///
/// Maturities are strictly increasing; strikes are strictly increasing and
/// positive within each smile. Prices are finite and nonnegative (quotes are
/// rejected at normalization if not strictly positive, but repaired surfaces
/// may legitimately carry zero prices far out of the money).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSurface {
    smiles: Vec<Smile>,
}

impl NormalizedSurface {
    pub fn new(smiles: Vec<Smile>) -> Result<Self> {
        if smiles.is_empty() {
            return Err(Error::InvalidSurface("no maturities".into()));
        }
        for (i, s) in smiles.iter().enumerate() {
            if !(s.maturity > 0.0) || !s.maturity.is_finite() {
                return Err(Error::InvalidSurface(format!("maturity {} must be > 0", s.maturity)));
            }
            if i > 0 && !(s.maturity > smiles[i - 1].maturity) {
                return Err(Error::InvalidSurface("maturities must be strictly increasing".into()));
            }
            if s.strikes.is_empty() || s.strikes.len() != s.prices.len() {
                return Err(Error::InvalidSurface(format!(
                    "maturity {}: {} strikes for {} prices",
                    s.maturity,
                    s.strikes.len(),
                    s.prices.len()
                )));
            }
            if !(s.strikes[0] > 0.0) || s.strikes.iter().any(|k| !k.is_finite()) {
                return Err(Error::InvalidSurface(format!(
                    "maturity {}: strikes must be positive and finite",
                    s.maturity
                )));
            }
            if s.strikes.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidSurface(format!(
                    "maturity {}: strikes must be strictly increasing",
                    s.maturity
                )));
            }
            if let Some((k, c)) = s
                .strikes
                .iter()
                .zip(&s.prices)
                .find(|(_, c)| !(**c >= 0.0) || !c.is_finite())
            {
                return Err(Error::InvalidPrice {
                    maturity: s.maturity,
                    strike: *k,
                    price: *c,
                });
            }
        }
        Ok(Self { smiles })
    }

    pub fn smiles(&self) -> &[Smile] {
        &self.smiles
    }

    pub fn maturities(&self) -> Vec<f64> {
        self.smiles.iter().map(|s| s.maturity).collect()
    }

    pub fn num_maturities(&self) -> usize {
        self.smiles.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.smiles.iter().map(Smile::len).sum()
    }

    pub fn max_strike(&self) -> f64 {
        self.smiles
            .iter()
            .flat_map(|s| s.strikes.iter().copied())
            .fold(0.0, f64::max)
    }

    /// Same grid, new prices (one vector per maturity).
    pub fn with_prices(&self, prices: Vec<Vec<f64>>) -> Result<Self> {
        if prices.len() != self.smiles.len() {
            return Err(Error::InvalidSurface("price block count mismatch".into()));
        }
        let smiles = self
            .smiles
            .iter()
            .zip(prices)
            .map(|(s, p)| Smile {
                maturity: s.maturity,
                strikes: s.strikes.clone(),
                prices: p,
            })
            .collect();
        Self::new(smiles)
    }

    /// Implied vols at every node; `None` where the price sits on (or within
    /// `1e-10` of) a static bound.
    pub fn implied_vols(&self) -> Vec<Vec<Option<f64>>> {
        self.smiles
            .iter()
            .map(|s| {
                s.strikes
                    .iter()
                    .zip(&s.prices)
                    .map(|(&k, &c)| {
                        let lower = (1.0 - k).max(0.0);
                        if c - lower <= 1e-10 || 1.0 - c <= 1e-10 {
                            None
                        } else {
                            implied_vol(k, c, s.maturity).ok()
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Parse the quote CSV (`maturity_years,strike,call_mid,put_mid,volume`).
///
/// Rows with zero volume are dropped.
pub fn parse_quotes(content: &str) -> Result<Vec<OptionQuote>> {
    if content.trim().is_empty() {
        return Err(Error::EmptyInput("quote file is empty".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(content.as_bytes());
    let headers = reader.headers()?.clone();
    let expected = ["maturity_years", "strike", "call_mid", "put_mid", "volume"];
    if headers.len() != expected.len() || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`", expected.join(",")),
        });
    }

    let mut quotes = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 5 {
            return Err(Error::Parse {
                line,
                message: format!("expected 5 fields, found {}", record.len()),
            });
        }
        let num = |idx: usize| -> Result<f64> {
            record[idx].parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("field `{}` is not a number: {:?}", expected[idx], &record[idx]),
            })
        };
        let maturity_years = num(0)?;
        let strike = num(1)?;
        let call_mid = num(2)?;
        let put_mid = if record[3].is_empty() { None } else { Some(num(3)?) };
        let volume = num(4)?;

        if !(maturity_years > 0.0) || !(strike > 0.0) || !(call_mid >= 0.0) || !(volume >= 0.0) {
            return Err(Error::Parse {
                line,
                message: "maturity and strike must be > 0, call mid and volume >= 0".into(),
            });
        }
        if put_mid.is_some_and(|p| !(p >= 0.0)) {
            return Err(Error::Parse {
                line,
                message: "put mid must be >= 0".into(),
            });
        }
        if volume == 0.0 {
            continue;
        }
        quotes.push(OptionQuote {
            maturity_years,
            strike,
            call_mid,
            put_mid,
            volume,
        });
    }
    if quotes.is_empty() {
        return Err(Error::EmptyInput("no quotes with positive volume".into()));
    }
    Ok(quotes)
}

/// Distinct maturities of a quote set, ascending.
pub fn quote_maturities(quotes: &[OptionQuote]) -> Vec<f64> {
    let mut ts: Vec<f64> = quotes.iter().map(|q| q.maturity_years).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| same_node(*a, *b));
    ts
}

/// Ordinary least squares fit of `C - P = a + b K` at one maturity, giving
/// `D = -b` and `F = a / D`.
pub fn fit_forward_discount(quotes: &[OptionQuote], maturity: f64) -> Result<ParityFit> {
    // average duplicated strikes first so each strike carries one observation
    let mut points: Vec<(f64, f64, usize)> = Vec::new();
    for q in quotes.iter().filter(|q| same_node(q.maturity_years, maturity)) {
        let Some(put) = q.put_mid else { continue };
        let diff = q.call_mid - put;
        match points.iter_mut().find(|(k, _, _)| same_node(*k, q.strike)) {
            Some(p) => {
                p.1 += diff;
                p.2 += 1;
            }
            None => points.push((q.strike, diff, 1)),
        }
    }
    let points: Vec<(f64, f64)> = points.into_iter().map(|(k, s, n)| (k, s / n as f64)).collect();
    if points.len() < 2 {
        return Err(Error::InsufficientData {
            maturity,
            found: points.len(),
        });
    }

    let n = points.len() as f64;
    let mean_k = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_k).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_k) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_k;

    let discount = -slope;
    // a zero slope is checked against the scale of the differences, not exactly
    let scale = points.iter().map(|p| p.1.abs()).fold(0.0, f64::max).max(1e-300);
    let kscale = points.iter().map(|p| p.0).fold(0.0, f64::max);
    if !(discount * kscale > 1e-12 * scale) || !discount.is_finite() {
        return Err(Error::DegenerateParity { maturity, discount });
    }
    let forward = intercept / discount;
    if !(forward > 0.0) || discount > 1.05 {
        return Err(Error::DegenerateParity { maturity, discount });
    }
    let residual_rms = (points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ParityFit {
        forward,
        discount,
        residual_rms,
        strikes_used: points.len(),
    })
}

/// Fit forwards and discounts for every quoted maturity.
///
/// A fitted discount slightly above one (up to 1.05) is accepted by the
/// regression but clamped to 1 in the curve.
pub fn fit_curve(quotes: &[OptionQuote]) -> Result<(MarketCurve, Vec<ParityFit>)> {
    let mut points = Vec::new();
    let mut fits = Vec::new();
    for t in quote_maturities(quotes) {
        let fit = fit_forward_discount(quotes, t)?;
        points.push(CurvePoint {
            maturity: t,
            forward: fit.forward,
            discount: fit.discount.min(1.0),
        });
        fits.push(fit);
    }
    Ok((MarketCurve::new(points)?, fits))
}

/// Normalize quotes with `k = K / F` and `c = C / (F D)`.
///
/// Duplicate `(T, K)` quotes are merged by averaging their call mids.
pub fn normalize(quotes: &[OptionQuote], curve: &MarketCurve) -> Result<NormalizedSurface> {
    if quotes.is_empty() {
        return Err(Error::EmptyInput("no quotes to normalize".into()));
    }
    let mut smiles = Vec::new();
    for t in quote_maturities(quotes) {
        let point = curve.get(t).ok_or(Error::MissingCurve(t))?;
        let mut nodes: Vec<(f64, f64, usize)> = Vec::new();
        for q in quotes.iter().filter(|q| same_node(q.maturity_years, t)) {
            match nodes.iter_mut().find(|(k, _, _)| same_node(*k, q.strike)) {
                Some(node) => {
                    node.1 += q.call_mid;
                    node.2 += 1;
                }
                None => nodes.push((q.strike, q.call_mid, 1)),
            }
        }
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut strikes = Vec::with_capacity(nodes.len());
        let mut prices = Vec::with_capacity(nodes.len());
        for (strike, sum, count) in nodes {
            let mid = sum / count as f64;
            let c = mid / (point.forward * point.discount);
            if !(c > 0.0) {
                return Err(Error::InvalidPrice {
                    maturity: t,
                    strike,
                    price: mid,
                });
            }
            strikes.push(strike / point.forward);
            prices.push(c);
        }
        smiles.push(Smile {
            maturity: t,
            strikes,
            prices,
        });
    }
    NormalizedSurface::new(smiles)
}

/// A node in currency units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrencyNode {
    pub maturity: f64,
    pub strike: f64,
    pub call: f64,
}

/// Inverse of [`normalize`]: `K = k F`, `C = c F D`.
pub fn denormalize(surface: &NormalizedSurface, curve: &MarketCurve) -> Result<Vec<CurrencyNode>> {
    let mut out = Vec::with_capacity(surface.num_nodes());
    for s in surface.smiles() {
        let p = curve.get(s.maturity).ok_or(Error::MissingCurve(s.maturity))?;
        for (&k, &c) in s.strikes.iter().zip(&s.prices) {
            out.push(CurrencyNode {
                maturity: s.maturity,
                strike: k * p.forward,
                call: c * p.forward * p.discount,
            });
        }
    }
    Ok(out)
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Out-of-the-money part of the normalized Black–Scholes price: the call for
/// `k >= 1`, the put for `k < 1`. Equals the call price minus `(1 - k)+`.
fn time_value(k: f64, vol: f64, t: f64) -> f64 {
    let sd = vol * t.sqrt();
    if !(sd > 0.0) {
        return 0.0;
    }
    let d1 = (-k.ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    if k >= 1.0 {
        (norm_cdf(d1) - k * norm_cdf(d2)).max(0.0)
    } else {
        (k * norm_cdf(-d2) - norm_cdf(-d1)).max(0.0)
    }
}

/// Undiscounted Black–Scholes call on a unit forward, struck at moneyness `k`.
pub fn bs_call_price(k: f64, vol: f64, t: f64) -> f64 {
    (1.0 - k).max(0.0) + time_value(k, vol, t)
}

/// Normalized vega `d c / d vol`.
pub fn bs_vega(k: f64, vol: f64, t: f64) -> f64 {
    let sd = vol * t.sqrt();
    if !(sd > 0.0) || !(k > 0.0) {
        return 0.0;
    }
    let d1 = (-k.ln() + 0.5 * sd * sd) / sd;
    norm_pdf(d1) * t.sqrt()
}

const VOL_LO: f64 = 1e-6;
const VOL_HI: f64 = 5.0;
const VOL_HI_MAX: f64 = 100.0;
const PRICE_TOL: f64 = 1e-12;

/// Black–Scholes implied volatility of a normalized call price.
///
/// Safeguarded Newton on the out-of-the-money time value, started from the
/// at-the-money expansion `sqrt(2 pi / T) * c`, falling back to bisection on
/// the bracket `[1e-6, 5]` (widened up to 100 if needed).
pub fn implied_vol(k: f64, c: f64, t: f64) -> Result<f64> {
    if !(k > 0.0) || !(t > 0.0) {
        return Err(Error::Parameter(format!("implied_vol needs k > 0 and T > 0 (k={k}, T={t})")));
    }
    let lower = (1.0 - k).max(0.0);
    if !(c > lower && c < 1.0) {
        return Err(Error::OutOfBand {
            k,
            price: c,
            lower,
            upper: 1.0,
        });
    }
    let target = c - lower;
    let f = |v: f64| time_value(k, v, t) - target;

    let mut lo = VOL_LO;
    let mut hi = VOL_HI;
    while f(hi) < 0.0 {
        if hi >= VOL_HI_MAX {
            return Err(Error::OutOfBand {
                k,
                price: c,
                lower,
                upper: 1.0,
            });
        }
        lo = hi;
        hi = (hi * 2.0).min(VOL_HI_MAX);
    }
    if f(lo) > 0.0 {
        // below the smallest vol we resolve
        return Ok(lo);
    }

    let mut vol = ((2.0 * PI / t).sqrt() * target).clamp(lo, hi);
    for _ in 0..200 {
        let fv = f(vol);
        if fv == 0.0 {
            break;
        }
        if fv > 0.0 {
            hi = vol;
        } else {
            lo = vol;
        }
        let vega = bs_vega(k, vol, t);
        let newton = vol - fv / vega;
        let next = if vega > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - vol).abs();
        vol = next;
        if step <= 1e-15 * vol || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let err = (bs_call_price(k, vol, t) - c).abs();
    if err > PRICE_TOL {
        return Err(Error::Parameter(format!(
            "implied vol did not converge at k={k}, c={c}, T={t} (price error {err:e})"
        )));
    }
    Ok(vol)
}

/// A multiplicative vol stress on a moneyness band `[k_min, k_max]`.
///
/// `maturity` is a 0-based maturity index; `None` applies the band to every
/// maturity. Open ends are written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressBand {
    #[serde(default)]
    pub maturity: Option<usize>,
    #[serde(default)]
    pub k_min: Option<f64>,
    #[serde(default)]
    pub k_max: Option<f64>,
    pub vol_multiplier: f64,
}

impl StressBand {
    pub fn contains(&self, k: f64) -> bool {
        self.k_min.is_none_or(|lo| k >= lo) && self.k_max.is_none_or(|hi| k <= hi)
    }

    fn applies_to(&self, maturity: usize) -> bool {
        self.maturity.is_none_or(|m| m == maturity)
    }

    fn overlaps(&self, other: &StressBand) -> bool {
        let lo = self.k_min.unwrap_or(f64::NEG_INFINITY).max(other.k_min.unwrap_or(f64::NEG_INFINITY));
        let hi = self.k_max.unwrap_or(f64::INFINITY).min(other.k_max.unwrap_or(f64::INFINITY));
        lo <= hi
    }
}

/// Marks node `node` (0-based, in strike order) of maturity `maturity`
/// (0-based) as a calibration target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CalibrationMark {
    pub maturity: usize,
    pub node: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StressScenario {
    #[serde(default)]
    pub bands: Vec<StressBand>,
    #[serde(default)]
    pub calibration_marks: Vec<CalibrationMark>,
}

impl StressScenario {
    pub fn validate(&self, num_maturities: usize) -> Result<()> {
        for (i, b) in self.bands.iter().enumerate() {
            if !(b.vol_multiplier > 0.0) || !b.vol_multiplier.is_finite() {
                return Err(Error::InvalidScenario(format!(
                    "band {i}: vol multiplier must be > 0, got {}",
                    b.vol_multiplier
                )));
            }
            if let (Some(lo), Some(hi)) = (b.k_min, b.k_max) {
                if lo > hi {
                    return Err(Error::InvalidScenario(format!("band {i}: empty interval [{lo}, {hi}]")));
                }
            }
            if b.maturity.is_some_and(|m| m >= num_maturities) {
                return Err(Error::InvalidScenario(format!("band {i}: maturity index out of range")));
            }
            for (j, other) in self.bands.iter().enumerate().skip(i + 1) {
                let shared = (0..num_maturities).any(|m| b.applies_to(m) && other.applies_to(m));
                if shared && b.overlaps(other) {
                    return Err(Error::InvalidScenario(format!("bands {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    /// Indices of bands that contain no quoted node.
    pub fn unused_bands(&self, surface: &NormalizedSurface) -> Vec<usize> {
        (0..self.bands.len())
            .filter(|&b| {
                let band = &self.bands[b];
                !surface
                    .smiles()
                    .iter()
                    .enumerate()
                    .any(|(i, s)| band.applies_to(i) && s.strikes.iter().any(|&k| band.contains(k)))
            })
            .collect()
    }

    fn multiplier(&self, maturity: usize, k: f64) -> Option<f64> {
        self.bands
            .iter()
            .find(|b| b.applies_to(maturity) && b.contains(k))
            .map(|b| b.vol_multiplier)
    }
}

/// Output of [`apply_stress`].
#[derive(Debug, Clone, PartialEq)]
pub struct StressedSurface {
    pub surface: NormalizedSurface,
    pub calibration_marks: Vec<CalibrationMark>,
    /// Number of nodes whose price was recomputed.
    pub stressed_nodes: usize,
}

/// Multiply implied vols inside each band and reprice.
///
/// Nodes outside every band, and nodes whose multiplier is exactly 1, keep
/// their original price bit for bit.
pub fn apply_stress(surface: &NormalizedSurface, scenario: &StressScenario) -> Result<StressedSurface> {
    scenario.validate(surface.num_maturities())?;
    let mut stressed_nodes = 0;
    let mut prices = Vec::with_capacity(surface.num_maturities());
    for (i, s) in surface.smiles().iter().enumerate() {
        let mut row = s.prices.clone();
        for (j, (&k, c)) in s.strikes.iter().zip(row.iter_mut()).enumerate() {
            let Some(mult) = scenario.multiplier(i, k) else { continue };
            if mult == 1.0 {
                continue;
            }
            let vol = implied_vol(k, *c, s.maturity).map_err(|e| Error::NodeVol {
                maturity: i,
                node: j,
                source: Box::new(e),
            })?;
            *c = bs_call_price(k, vol * mult, s.maturity);
            stressed_nodes += 1;
        }
        prices.push(row);
    }
    Ok(StressedSurface {
        surface: surface.with_prices(prices)?,
        calibration_marks: scenario.calibration_marks.clone(),
        stressed_nodes,
    })
}

/// Black–Scholes surface with a vol function `vol(maturity_index, k)`.
pub fn synthetic_surface<F>(maturities: &[f64], strikes: &[Vec<f64>], vol: F) -> Result<NormalizedSurface>
where
    F: Fn(usize, f64) -> f64,
{
    if maturities.len() != strikes.len() {
        return Err(Error::InvalidSurface("one strike list per maturity required".into()));
    }
    let smiles = maturities
        .iter()
        .zip(strikes)
        .enumerate()
        .map(|(i, (&t, ks))| Smile {
            maturity: t,
            strikes: ks.clone(),
            prices: ks.iter().map(|&k| bs_call_price(k, vol(i, k), t)).collect(),
        })
        .collect();
    NormalizedSurface::new(smiles)
}
