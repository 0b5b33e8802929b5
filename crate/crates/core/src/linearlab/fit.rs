//! Power-law fits of norm histories and rate checks.

use serde::{Deserialize, Serialize};

use super::{NormSeries, Variable};
use crate::error::{Error, Result};

pub const MIN_FIT_SAMPLES: usize = 8;
pub const EXPONENT_TOLERANCE: f64 = 0.05;

/// `norm ~ amplitude (1 + t)^exponent` over `window`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub window: [f64; 2],
    /// Max absolute deviation in log space.
    pub residual: f64,
}

fn window_samples(series: &NormSeries, window: [f64; 2]) -> Vec<(f64, f64)> {
    series
        .times
        .iter()
        .zip(&series.values)
        .filter(|(t, _)| **t >= window[0] && **t <= window[1])
        .map(|(t, v)| (*t, *v))
        .collect()
}

/// Least squares of `log norm` against `log(1 + t)`.
pub fn fit_power_law(series: &NormSeries, window: [f64; 2]) -> Result<DecayFit> {
    let pts = window_samples(series, window);
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::Domain(format!(
            "fit window [{}, {}] holds {} samples, need {MIN_FIT_SAMPLES}",
            window[0],
            window[1],
            pts.len()
        )));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::Domain(format!("nonpositive norm {v} at t = {t}")));
    }
    let xs: Vec<f64> = pts.iter().map(|(t, _)| (1.0 + t).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, v)| v.ln()).collect();
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let exponent = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = ym - exponent * xm;
    let residual = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - exponent * x).abs()).fold(0.0, f64::max);
    Ok(DecayFit { exponent, amplitude: intercept.exp(), window: [pts[0].0, pts[pts.len() - 1].0], residual })
}

/// `max / min` of `norm (1 + t)^-p` over the window; the width of the band
/// `c1 (1 + t)^p <= norm <= c2 (1 + t)^p`.
pub fn band_ratio(series: &NormSeries, p: f64, window: [f64; 2]) -> Result<f64> {
    let pts = window_samples(series, window);
    if pts.is_empty() {
        return Err(Error::Domain("empty band window".into()));
    }
    let w: Vec<f64> = pts.iter().map(|(t, v)| v * (1.0 + t).powf(-p)).collect();
    let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = w.iter().cloned().fold(0.0, f64::max);
    if !(lo > 0.0) {
        return Ok(f64::INFINITY);
    }
    Ok(hi / lo)
}

/// Predicted exponent for generic data: `-(1/4 + k/2)` for `n+-`, `-(3/4 + k/2)` otherwise.
pub fn expected_exponent(variable: Variable, k: i32) -> f64 {
    let base = match variable {
        Variable::NPlus | Variable::NMinus => -0.25,
        _ => -0.75,
    };
    base - 0.5 * k as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClaimKind {
    /// Fitted exponent within tolerance of the prediction.
    Rate,
    /// Band ratio of `norm (1 + t)^-p` below a bound.
    LowerBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateClaim {
    pub variable: Variable,
    pub k: i32,
    pub kind: ClaimKind,
    pub expected: f64,
    pub fit: DecayFit,
    /// Band ratio for lower-bound claims.
    pub band: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RateReport {
    pub claims: Vec<RateClaim>,
}

impl RateReport {
    pub fn all_pass(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &RateClaim> {
        self.claims.iter().filter(|c| !c.pass)
    }
}

/// Rate claims for every series: exponent within `tol` of [`expected_exponent`].
pub fn verify_rates(series: &[NormSeries], window: [f64; 2], tol: f64) -> Result<RateReport> {
    let mut claims = Vec::with_capacity(series.len());
    for s in series {
        let fit = fit_power_law(s, window)?;
        let expected = expected_exponent(s.variable, s.k);
        claims.push(RateClaim {
            variable: s.variable,
            k: s.k,
            kind: ClaimKind::Rate,
            expected,
            fit,
            band: None,
            pass: (fit.exponent - expected).abs() <= tol,
        });
    }
    Ok(RateReport { claims })
}

/// Lower-bound claims: `norm (1 + t)^-p` stays in a band of ratio at most `max_ratio`.
pub fn verify_lower_bounds(series: &[NormSeries], window: [f64; 2], max_ratio: f64) -> Result<RateReport> {
    let mut claims = Vec::with_capacity(series.len());
    for s in series {
        let fit = fit_power_law(s, window)?;
        let expected = expected_exponent(s.variable, s.k);
        let band = band_ratio(s, expected, window)?;
        claims.push(RateClaim {
            variable: s.variable,
            k: s.k,
            kind: ClaimKind::LowerBound,
            expected,
            fit,
            band: Some(band),
            pass: band <= max_ratio && fit.amplitude > 0.0,
        });
    }
    Ok(RateReport { claims })
}
