//! Composite Gauss-Legendre quadrature with panel doubling.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const GL_ORDER: usize = 16;
const MAX_PANELS: usize = 1 << 15;

/// Nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_ORDER))
}

/// Composite rule with `panels` equal panels on each interval between
/// consecutive `breaks`, for a vector integrand of length `dim`.
pub fn composite<F>(f: &F, breaks: &[f64], panels: usize, dim: usize) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    let (x, w) = rule();
    let cells: Vec<(f64, f64)> = breaks
        .windows(2)
        .flat_map(|ab| {
            let h = (ab[1] - ab[0]) / panels as f64;
            (0..panels).map(move |p| (ab[0] + p as f64 * h, h))
        })
        .collect();
    let parts: Vec<Vec<f64>> = cells
        .into_par_iter()
        .map(|(lo, h)| {
            let mut acc = vec![0.0; dim];
            for (xi, wi) in x.iter().zip(w) {
                let r = lo + 0.5 * h * (xi + 1.0);
                let v = f(r)?;
                for (s, vi) in acc.iter_mut().zip(&v) {
                    *s += wi * vi;
                }
            }
            Ok(acc.into_iter().map(|s| 0.5 * h * s).collect())
        })
        .collect::<Result<_>>()?;
    let mut total = vec![0.0; dim];
    for part in parts {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    Ok(total)
}

/// Doubles the panels per interval from `start_panels` until every component
/// changes by at most `rel_tol` relative.
pub fn integrate<F>(f: &F, breaks: &[f64], dim: usize, rel_tol: f64, start_panels: usize) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    if breaks.len() < 2 || breaks.windows(2).any(|ab| !(ab[1] > ab[0])) {
        return Err(Error::Domain(format!("quadrature breaks must increase: {breaks:?}")));
    }
    let mut panels = start_panels.max(1);
    let mut prev = composite(f, breaks, panels, dim)?;
    while panels < MAX_PANELS {
        panels *= 2;
        let next = composite(f, breaks, panels, dim)?;
        let converged = prev.iter().zip(&next).all(|(p, n)| (n - p).abs() <= rel_tol * n.abs() || n == p);
        if converged {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Accuracy(format!(
        "radial quadrature on [{}, {}] not converged to {rel_tol:e} with {MAX_PANELS} panels",
        breaks[0],
        breaks[breaks.len() - 1]
    )))
}

/// `[0, r_max 2^-m, ..., r_max / 2, r_max]` with the first positive break near `r_min`.
///
/// Geometric intervals resolve integrands concentrated at any scale in between.
pub fn geometric_breaks(r_max: f64, r_min: f64) -> Vec<f64> {
    let m = (r_max / r_min).log2().ceil().max(0.0) as i32;
    let mut b = vec![0.0];
    b.extend((0..=m).rev().map(|j| r_max * 0.5f64.powi(j)));
    b
}

/// `||grad^k f|| = (4 pi int_0^r_max r^(2k+2) |f(r)|^2 dr)^(1/2)` for a radial spectrum `f`.
pub fn radial_norm<F>(f: F, k: i32, r_max: f64) -> Result<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    if k < -1 {
        return Err(Error::Domain(format!("derivative order {k} < -1")));
    }
    let g = |r: f64| -> Result<Vec<f64>> {
        let v = f(r);
        Ok(vec![r.powi(2 * k + 2) * v * v])
    };
    let i = integrate(&g, &geometric_breaks(r_max, 1e-6 * r_max), 1, 1e-8, 2)?;
    Ok((4.0 * PI * i[0]).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(GL_ORDER);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let i30: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((i30 - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_norms() {
        let f = |r: f64| (-r * r / 2.0).exp();
        let n0 = radial_norm(f, 0, 12.0).unwrap();
        assert!((n0 - PI.powf(0.75)).abs() < 1e-8 * n0);
        let n1 = radial_norm(f, 1, 12.0).unwrap();
        assert!((n1 * n1 - 1.5 * PI.powf(1.5)).abs() < 1e-8 * n1 * n1);
    }

    #[test]
    fn indicator_norm() {
        let n = radial_norm(|_| 1.0, 0, 1.0).unwrap();
        assert!((n * n - 4.0 * PI / 3.0).abs() < 1e-12);
    }
}
