//! Energy, dissipation, masses, Sobolev norms and time-weighted functionals on the grid.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::state::FieldState;
use crate::closure::{closure_state, ClosureEvaluator, LinearCoefficients};
use crate::error::Result;
use crate::linearlab::{NormSeries, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub time: f64,
    /// Natural energy.
    pub e0: f64,
    /// Dissipation rate.
    pub d0: f64,
    pub mass_plus: f64,
    pub mass_minus: f64,
}

fn k2(grid: &Grid, i: usize) -> f64 {
    let k = grid.wavevector(i);
    k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
}

/// `E0`, `D0` and masses by Parseval.
pub fn energy_report(grid: &Grid, c: &LinearCoefficients, s: &FieldState) -> EnergyReport {
    let dim = grid.dim();
    let scale = grid.volume() / (grid.len() as f64).powi(2);
    let (e, d): (f64, f64) = (0..grid.len())
        .map(|i| {
            let q = k2(grid, i);
            let kv = grid.wavevector(i);
            let (np, nm) = (s.n_plus[i], s.n_minus[i]);
            let combo = np * c.beta_plus + nm * c.beta_minus;
            let up: f64 = (0..dim).map(|a| s.u_plus[a][i].norm_sqr()).sum();
            let um: f64 = (0..dim).map(|a| s.u_minus[a][i].norm_sqr()).sum();
            let e = combo.norm_sqr()
                + c.sigma_plus / c.beta2 * q * np.norm_sqr()
                + c.sigma_minus / c.beta3 * q * nm.norm_sqr()
                + up / c.beta2
                + um / c.beta3;
            let divp: Complex64 = (0..dim).map(|a| s.u_plus[a][i] * kv[a]).sum();
            let divm: Complex64 = (0..dim).map(|a| s.u_minus[a][i] * kv[a]).sum();
            let d = (c.nu1_plus * q * up + c.nu2_plus * divp.norm_sqr()) / c.beta2
                + (c.nu1_minus * q * um + c.nu2_minus * divm.norm_sqr()) / c.beta3;
            (0.5 * e, d)
        })
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let mass = |f: &[Complex64]| f[0].re * grid.volume() / grid.len() as f64;
    EnergyReport {
        time: s.time,
        e0: e * scale,
        d0: d * scale,
        mass_plus: mass(&s.n_plus),
        mass_minus: mass(&s.n_minus),
    }
}

/// `(phi^, w^)` with `phi = Lambda^-1 div u`, so `phi^ = i (k . u^) / |k|`, and the
/// divergence-free remainder `w^ = u^ + i k phi^ / |k|`. The zero mode goes to `w`.
pub fn hodge_split_grid(grid: &Grid, u: &[Vec<Complex64>]) -> (Vec<Complex64>, Vec<Vec<Complex64>>) {
    let dim = grid.dim();
    let mut phi = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut w: Vec<Vec<Complex64>> = u.to_vec();
    for i in 0..grid.len() {
        let k = grid.wavevector(i);
        let r = k2(grid, i).sqrt();
        if r == 0.0 {
            continue;
        }
        let kdotu: Complex64 = (0..dim).map(|a| u[a][i] * k[a]).sum();
        let p = Complex64::new(0.0, 1.0) * kdotu / r;
        phi[i] = p;
        for a in 0..dim {
            w[a][i] = u[a][i] + Complex64::new(0.0, k[a] / r) * p;
        }
    }
    (phi, w)
}

/// `u^ = -i k phi^ / |k| + w^`.
pub fn hodge_combine(grid: &Grid, phi: &[Complex64], w: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let dim = grid.dim();
    let mut u = w.to_vec();
    for i in 0..grid.len() {
        let k = grid.wavevector(i);
        let r = k2(grid, i).sqrt();
        if r == 0.0 {
            continue;
        }
        for a in 0..dim {
            u[a][i] += Complex64::new(0.0, -k[a] / r) * phi[i];
        }
    }
    u
}

/// Phase-density perturbations `rho+- - rhobar+-` from the full closure.
pub fn density_perturbations(grid: &Grid, closure: &ClosureEvaluator, s: &FieldState) -> Result<(Vec<f64>, Vec<f64>)> {
    let np = grid.to_physical(&s.n_plus);
    let nm = grid.to_physical(&s.n_minus);
    let p = closure.params();
    let eq = closure.equilibrium();
    let v: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let cs = closure_state(p.rbar_plus + np[i], p.rbar_minus + nm[i], p)?;
            Ok((cs.rho_plus - eq.rho_plus, cs.rho_minus - eq.rho_minus))
        })
        .collect::<Result<_>>()?;
    Ok(v.into_iter().unzip())
}

/// `||grad^k f||^2` for a list of spectral arrays.
fn sobolev_sq(grid: &Grid, fields: &[&[Complex64]], k: i32) -> f64 {
    fields.iter().map(|f| grid.parseval(f, |i| if k == 0 { 1.0 } else { k2(grid, i).powi(k) })).sum()
}

/// `||grad^k variable||` for every variable of [`Variable::ALL`], per `k`.
/// Rows follow `ks`, columns follow [`Variable::ALL`].
pub fn state_norms(
    grid: &Grid,
    closure: &ClosureEvaluator,
    c: &LinearCoefficients,
    s: &FieldState,
    ks: &[i32],
) -> Result<Vec<[f64; 9]>> {
    let (phi_p, w_p) = hodge_split_grid(grid, &s.u_plus);
    let (phi_m, w_m) = hodge_split_grid(grid, &s.u_minus);
    let combo: Vec<Complex64> =
        s.n_plus.iter().zip(&s.n_minus).map(|(a, b)| a * c.beta_plus + b * c.beta_minus).collect();
    let (dp, dm) = density_perturbations(grid, closure, s)?;
    let (dp, dm) = (grid.to_spectral(&dp), grid.to_spectral(&dm));
    let wp: Vec<&[Complex64]> = w_p.iter().map(|v| v.as_slice()).collect();
    let wm: Vec<&[Complex64]> = w_m.iter().map(|v| v.as_slice()).collect();
    Ok(ks
        .iter()
        .map(|&k| {
            let one = |f: &[Complex64]| sobolev_sq(grid, &[f], k).sqrt();
            [
                one(&s.n_plus),
                one(&s.n_minus),
                one(&phi_p),
                one(&phi_m),
                one(&combo),
                one(&dp),
                one(&dm),
                sobolev_sq(grid, &wp, k).sqrt(),
                sobolev_sq(grid, &wm, k).sqrt(),
            ]
        })
        .collect())
}

/// Regroups per-sample norm rows into [`NormSeries`].
pub fn norm_series_from_rows(times: &[f64], ks: &[i32], rows: &[Vec<[f64; 9]>]) -> Vec<NormSeries> {
    let mut out = Vec::new();
    for (ki, &k) in ks.iter().enumerate() {
        for (vi, v) in Variable::ALL.iter().enumerate() {
            out.push(NormSeries {
                variable: *v,
                k,
                times: times.to_vec(),
                values: rows.iter().map(|r| r[ki][vi]).collect(),
            });
        }
    }
    out
}

/// Inputs of the time-weighted functionals at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSample {
    pub time: f64,
    /// For `k = 0..=l`: `||grad^k (combo, u+, u-)||_{H^(l-k)} + ||grad^(k+1) (n+, n-)||_{H^(l-k)}`.
    pub brackets: Vec<f64>,
    /// `||(n+, n-)||_{L^2}`
    pub n_l2: f64,
}

pub fn functional_sample(grid: &Grid, c: &LinearCoefficients, s: &FieldState, ell: usize) -> FunctionalSample {
    let combo: Vec<Complex64> =
        s.n_plus.iter().zip(&s.n_minus).map(|(a, b)| a * c.beta_plus + b * c.beta_minus).collect();
    let mut first: Vec<&[Complex64]> = vec![&combo];
    first.extend(s.u_plus.iter().map(|v| v.as_slice()));
    first.extend(s.u_minus.iter().map(|v| v.as_slice()));
    let second: Vec<&[Complex64]> = vec![&s.n_plus, &s.n_minus];
    let h = |fields: &[&[Complex64]], k: usize, m: usize| -> f64 {
        (0..=m).map(|j| sobolev_sq(grid, fields, (k + j) as i32)).sum::<f64>().sqrt()
    };
    let brackets = (0..=ell).map(|k| h(&first, k, ell - k) + h(&second, k + 1, ell - k)).collect();
    FunctionalSample { time: s.time, brackets, n_l2: sobolev_sq(grid, &second, 0).sqrt() }
}

/// Running values of the two functionals at each sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValues {
    pub time: f64,
    /// `E_k^l` for `k = 0..=l`.
    pub e_k: Vec<f64>,
    /// `sup (1 + tau)^(1/4) ||(n+, n-)||`
    pub e_0: f64,
}

/// Running suprema of `(1+tau)^(3/4+k/2) bracket_k` and `(1+tau)^(1/4) ||(n+, n-)||`.
pub fn weighted_sup_functionals(history: &[FunctionalSample], ell: usize) -> Vec<FunctionalValues> {
    let mut e_k = vec![0.0f64; ell + 1];
    let mut e_0 = 0.0f64;
    history
        .iter()
        .map(|h| {
            let w = 1.0 + h.time;
            for (k, e) in e_k.iter_mut().enumerate() {
                let b = h.brackets.get(k).copied().unwrap_or(0.0);
                *e = e.max(w.powf(0.75 + 0.5 * k as f64) * b);
            }
            e_0 = e_0.max(w.powf(0.25) * h.n_l2);
            FunctionalValues { time: h.time, e_k: e_k.clone(), e_0 }
        })
        .collect()
}
