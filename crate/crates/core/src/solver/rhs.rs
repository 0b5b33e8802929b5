//! Pseudo-spectral nonlinear tendencies `(F1, F2, F3, F4)`.

use num_complex::Complex64;
use rayon::prelude::*;

use super::grid::Grid;
use super::state::FieldState;
use crate::closure::{ClosureEvaluator, NonlinearCoefficients};
use crate::error::Result;

/// Closure coefficient fields at every grid point.
pub(crate) struct CoefficientFields {
    pub c: Vec<NonlinearCoefficients>,
}

pub(crate) fn coefficient_fields(
    closure: &ClosureEvaluator,
    n_plus: &[f64],
    n_minus: &[f64],
    guess: &mut Vec<f64>,
) -> Result<CoefficientFields> {
    let warm = guess.len() == n_plus.len();
    let out: Vec<(NonlinearCoefficients, f64)> = (0..n_plus.len())
        .into_par_iter()
        .map(|i| closure.coefficients(n_plus[i], n_minus[i], if warm { Some(guess[i]) } else { None }))
        .collect::<Result<_>>()?;
    *guess = out.iter().map(|(_, r)| *r).collect();
    Ok(CoefficientFields { c: out.into_iter().map(|(c, _)| c).collect() })
}

struct PhaseFields {
    /// `u[c]`
    u: Vec<Vec<f64>>,
    /// `du[j][c] = d_j u_c`
    du: Vec<Vec<Vec<f64>>>,
    div: Vec<f64>,
    /// `lap[c] = Laplacian u_c`
    lap: Vec<Vec<f64>>,
    /// `grad_div[c] = d_c div u`
    grad_div: Vec<Vec<f64>>,
}

fn phase_fields(grid: &Grid, u_hat: &[Vec<Complex64>]) -> PhaseFields {
    let dim = grid.dim();
    let u = u_hat.iter().map(|c| grid.to_physical(c)).collect();
    let du: Vec<Vec<Vec<f64>>> =
        (0..dim).map(|j| u_hat.iter().map(|c| grid.to_physical(&grid.derivative(c, j))).collect()).collect();
    let mut div_hat = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (j, c) in u_hat.iter().enumerate() {
        for (d, v) in div_hat.iter_mut().zip(grid.derivative(c, j)) {
            *d += v;
        }
    }
    let div = grid.to_physical(&div_hat);
    let lap = u_hat
        .iter()
        .map(|c| {
            let l: Vec<Complex64> = c
                .iter()
                .enumerate()
                .map(|(i, z)| {
                    let k = grid.wavevector(i);
                    -z * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2])
                })
                .collect();
            grid.to_physical(&l)
        })
        .collect();
    let grad_div = (0..dim).map(|c| grid.to_physical(&grid.derivative(&div_hat, c))).collect();
    PhaseFields { u, du, div, lap, grad_div }
}

/// Coefficients selecting one phase from [`NonlinearCoefficients`].
#[derive(Clone, Copy)]
struct PhaseCoeffs {
    mu: f64,
    lambda: f64,
    plus: bool,
}

/// `F2` (phase `+`) or `F4` (phase `-`) in physical space, one array per component.
fn momentum_tendency(
    dim: usize,
    pc: PhaseCoeffs,
    coeffs: &CoefficientFields,
    ph: &PhaseFields,
    grad_np: &[Vec<f64>],
    grad_nm: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let npts = ph.div.len();
    let per_point: Vec<[f64; 3]> = (0..npts)
        .into_par_iter()
        .map(|x| {
            let c = &coeffs.c[x];
            let (g, gbar, h, k, l) = if pc.plus {
                (c.g_plus, c.gbar_plus, c.h_plus, c.k_plus, c.l_plus)
            } else {
                (c.g_minus, c.gbar_minus, c.h_minus, c.k_minus, c.l_minus)
            };
            // Own and other density gradients for the pressure terms.
            let (own, other) = if pc.plus { (grad_np, grad_nm) } else { (grad_nm, grad_np) };
            let mut w = [0.0; 3];
            for j in 0..dim {
                w[j] = h * grad_np[j][x] + k * grad_nm[j][x];
            }
            let div = ph.div[x];
            let mut out = [0.0; 3];
            for i in 0..dim {
                let mut f = -g * own[i][x] - gbar * other[i][x];
                for j in 0..dim {
                    f -= ph.u[j][x] * ph.du[j][i][x];
                    f += pc.mu * (ph.du[j][i][x] + ph.du[i][j][x]) * w[j];
                }
                f += pc.lambda * div * w[i];
                f += l * (pc.mu * ph.lap[i][x] + (pc.mu + pc.lambda) * ph.grad_div[i][x]);
                out[i] = f;
            }
            out
        })
        .collect();
    (0..dim).map(|i| per_point.iter().map(|p| p[i]).collect()).collect()
}

/// `-div(n u)` in spectral form.
fn mass_flux_tendency(grid: &Grid, n: &[f64], u: &[Vec<f64>]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (j, uj) in u.iter().enumerate() {
        let prod: Vec<f64> = n.iter().zip(uj).map(|(a, b)| a * b).collect();
        let d = grid.derivative(&grid.to_spectral(&prod), j);
        for (o, v) in out.iter_mut().zip(d) {
            *o -= v;
        }
    }
    out
}

/// Tendencies in spectral form, dealiased. `guess` holds warm starts for the
/// closure solve and is overwritten with the new `rho+` field.
pub(crate) fn nonlinear_tendencies(
    grid: &Grid,
    closure: &ClosureEvaluator,
    s: &FieldState,
    guess: &mut Vec<f64>,
) -> Result<FieldState> {
    let dim = grid.dim();
    let np = grid.to_physical(&s.n_plus);
    let nm = grid.to_physical(&s.n_minus);
    let coeffs = coefficient_fields(closure, &np, &nm, guess)?;
    let grad =
        |f: &[Complex64]| -> Vec<Vec<f64>> { (0..dim).map(|j| grid.to_physical(&grid.derivative(f, j))).collect() };
    let grad_np = grad(&s.n_plus);
    let grad_nm = grad(&s.n_minus);
    let pp = phase_fields(grid, &s.u_plus);
    let pm = phase_fields(grid, &s.u_minus);
    let p = closure.params();
    let f2 = momentum_tendency(
        dim,
        PhaseCoeffs { mu: p.mu_plus, lambda: p.lambda_plus, plus: true },
        &coeffs,
        &pp,
        &grad_np,
        &grad_nm,
    );
    let f4 = momentum_tendency(
        dim,
        PhaseCoeffs { mu: p.mu_minus, lambda: p.lambda_minus, plus: false },
        &coeffs,
        &pm,
        &grad_np,
        &grad_nm,
    );
    let mut out = FieldState {
        time: s.time,
        n_plus: mass_flux_tendency(grid, &np, &pp.u),
        n_minus: mass_flux_tendency(grid, &nm, &pm.u),
        u_plus: f2.iter().map(|f| grid.to_spectral(f)).collect(),
        u_minus: f4.iter().map(|f| grid.to_spectral(f)).collect(),
    };
    for a in out.arrays_mut() {
        grid.dealias(a);
    }
    Ok(out)
}
