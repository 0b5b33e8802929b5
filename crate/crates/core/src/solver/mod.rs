//! Pseudo-spectral integration of the full nonlinear system on a periodic box.
//!
//! Strang splitting: half step of the exact linear propagator, one Heun (RK2)
//! step of the dealiased nonlinear tendencies, half linear step. The linear
//! propagator splits each velocity mode into `phi = Lambda^-1 div u` and a
//! divergence-free part, advances `(n+, phi+, n-, phi-)` with `exp(dt A1(|k|))`
//! and the rest with heat factors.

pub mod diagnostics;
pub mod grid;
pub mod rhs;
pub mod state;

use std::collections::HashMap;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closure::{linear_coefficients, ClosureEvaluator, FluidParams, LinearCoefficients};
use crate::error::{Error, Result};
use crate::linearlab::{write_norm_csv, NormSeries};
use crate::spectral::{build_mode_system, matrix_exp_oracle, semigroup_decomposition, RMat4};

pub use diagnostics::{
    energy_report, functional_sample, hodge_combine, hodge_split_grid, weighted_sup_functionals, EnergyReport,
    FunctionalSample, FunctionalValues,
};
pub use grid::{Grid, GridSpec};
pub use state::{
    check_positivity, init_state, params_hash, read_checkpoint, write_checkpoint, FieldName, FieldState, InitialData,
    PhysicalFields,
};

/// Perturbations beyond this sup norm abort the run.
pub const BLOW_UP_LIMIT: f64 = 0.5;

/// `exp(dt A1(|k|))` for every `sum m^2` on the grid, at one fixed `dt`.
#[derive(Debug, Clone)]
struct PropagatorCache {
    dt: f64,
    blocks: HashMap<u64, RMat4>,
}

#[derive(Debug)]
pub struct Solver {
    grid: Grid,
    closure: ClosureEvaluator,
    coeffs: LinearCoefficients,
    nonlinear: bool,
    cfl: f64,
    cache: Option<PropagatorCache>,
    rho_guess: Vec<f64>,
}

impl Solver {
    /// Requires `Rbar+- = 1`, the normalization under which the evolution
    /// equations are written.
    pub fn new(grid: Grid, params: &FluidParams) -> Result<Self> {
        let coeffs = linear_coefficients(params)?;
        if params.rbar_plus != 1.0 || params.rbar_minus != 1.0 {
            return Err(Error::InvalidParams(vec![format!(
                "evolution requires Rbar+ = Rbar- = 1, got ({}, {})",
                params.rbar_plus, params.rbar_minus
            )]));
        }
        Ok(Self {
            grid,
            closure: ClosureEvaluator::new(params)?,
            coeffs,
            nonlinear: true,
            cfl: 0.5,
            cache: None,
            rho_guess: Vec::new(),
        })
    }

    /// Drops the nonlinear tendencies; steps become exact linear propagation.
    pub fn linear_only(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    pub fn with_cfl(mut self, cfl: f64) -> Self {
        self.cfl = cfl;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coefficients(&self) -> &LinearCoefficients {
        &self.coeffs
    }

    pub fn closure(&self) -> &ClosureEvaluator {
        &self.closure
    }

    fn propagators(&mut self, dt: f64) -> Result<&HashMap<u64, RMat4>> {
        if self.cache.as_ref().map(|c| c.dt) != Some(dt) {
            let mut keys: Vec<u64> =
                (0..self.grid.len()).map(|i| self.grid.mode_norm_sq(i)).filter(|m| *m > 0).collect();
            keys.sort_unstable();
            keys.dedup();
            let grid = &self.grid;
            let coeffs = &self.coeffs;
            let blocks: Vec<(u64, RMat4)> = keys
                .into_par_iter()
                .map(|m2| {
                    let mode = build_mode_system(grid.k_of_mode_norm_sq(m2), coeffs);
                    let e = match semigroup_decomposition(&mode) {
                        Ok(d) => d.eval(dt),
                        Err(Error::UnsupportedDegeneracy { .. }) => matrix_exp_oracle(&mode.a1_complex(), dt)?,
                        Err(e) => return Err(e),
                    };
                    Ok((m2, e.map(|z| z.re)))
                })
                .collect::<Result<_>>()?;
            self.cache = Some(PropagatorCache { dt, blocks: blocks.into_iter().collect() });
        }
        Ok(&self.cache.as_ref().unwrap().blocks)
    }

    /// Advances the spectra exactly by `exp(dt B)`.
    pub fn linear_propagator_step(&mut self, s: &FieldState, dt: f64) -> Result<FieldState> {
        if dt == 0.0 {
            return Ok(s.clone());
        }
        let (nu_p, nu_m) = (self.coeffs.nu1_plus, self.coeffs.nu1_minus);
        let dim = self.grid.dim();
        self.propagators(dt)?;
        let blocks = &self.cache.as_ref().unwrap().blocks;
        let grid = &self.grid;
        let (phi_p, w_p) = hodge_split_grid(grid, &s.u_plus);
        let (phi_m, w_m) = hodge_split_grid(grid, &s.u_minus);
        let mut out = FieldState {
            time: s.time + dt,
            n_plus: s.n_plus.clone(),
            n_minus: s.n_minus.clone(),
            u_plus: w_p,
            u_minus: w_m,
        };
        let mut phi_p_new = phi_p.clone();
        let mut phi_m_new = phi_m.clone();
        let updates: Vec<Option<([Complex64; 4], f64, f64)>> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let m2 = grid.mode_norm_sq(i);
                if m2 == 0 {
                    return None;
                }
                let e = &blocks[&m2];
                let v = [s.n_plus[i], phi_p[i], s.n_minus[i], phi_m[i]];
                let mut r = [Complex64::new(0.0, 0.0); 4];
                for (a, ra) in r.iter_mut().enumerate() {
                    for (b, vb) in v.iter().enumerate() {
                        *ra += vb * e[(a, b)];
                    }
                }
                let k2 = grid.k_of_mode_norm_sq(m2).powi(2);
                Some((r, (-nu_p * k2 * dt).exp(), (-nu_m * k2 * dt).exp()))
            })
            .collect();
        for (i, u) in updates.into_iter().enumerate() {
            if let Some((r, hp, hm)) = u {
                out.n_plus[i] = r[0];
                phi_p_new[i] = r[1];
                out.n_minus[i] = r[2];
                phi_m_new[i] = r[3];
                for a in 0..dim {
                    out.u_plus[a][i] *= hp;
                    out.u_minus[a][i] *= hm;
                }
            }
        }
        out.u_plus = hodge_combine(grid, &phi_p_new, &out.u_plus);
        out.u_minus = hodge_combine(grid, &phi_m_new, &out.u_minus);
        Ok(out)
    }

    /// Dealiased `(F1, F2, F3, F4)` in spectral form.
    pub fn nonlinear_rhs(&mut self, s: &FieldState) -> Result<FieldState> {
        rhs::nonlinear_tendencies(&self.grid, &self.closure, s, &mut self.rho_guess)
    }

    /// Largest stable step by the advective bound `cfl dx / max|u|`.
    pub fn max_dt(&self, s: &FieldState) -> f64 {
        let umax = s
            .u_plus
            .iter()
            .chain(s.u_minus.iter())
            .map(|c| self.grid.to_physical(c).iter().fold(0.0f64, |a, v| a.max(v.abs())))
            .fold(0.0f64, f64::max);
        if umax == 0.0 {
            f64::INFINITY
        } else {
            self.cfl * self.grid.dx() / umax
        }
    }

    fn axpy(a: &FieldState, t: f64, f: &FieldState) -> FieldState {
        let mut out = a.clone();
        for (o, d) in out.arrays_mut().into_iter().zip(f.arrays()) {
            for (x, y) in o.iter_mut().zip(d) {
                *x += y * t;
            }
        }
        out
    }

    /// One Strang step.
    pub fn step(&mut self, s: &FieldState, dt: f64) -> Result<FieldState> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        let mut u = self.linear_propagator_step(s, 0.5 * dt)?;
        if self.nonlinear {
            self.check_blow_up(&u)?;
            let limit = self.max_dt(&u);
            if dt > limit {
                return Err(Error::Domain(format!("dt = {dt} exceeds the CFL limit {limit}")));
            }
            let f0 = self.nonlinear_rhs(&u)?;
            let u1 = Self::axpy(&u, dt, &f0);
            let f1 = self.nonlinear_rhs(&u1)?;
            let mut sum = f0;
            for (o, d) in sum.arrays_mut().into_iter().zip(f1.arrays()) {
                for (x, y) in o.iter_mut().zip(d) {
                    *x += y;
                }
            }
            u = Self::axpy(&u, 0.5 * dt, &sum);
        }
        let mut out = self.linear_propagator_step(&u, 0.5 * dt)?;
        out.time = s.time + dt;
        self.check_blow_up(&out)?;
        Ok(out)
    }

    fn check_blow_up(&self, s: &FieldState) -> Result<()> {
        for (name, f) in [("n+", &s.n_plus), ("n-", &s.n_minus)] {
            let phys = self.grid.to_physical(f);
            let m = phys.iter().fold(0.0f64, |a, v| if v.is_nan() { f64::NAN } else { a.max(v.abs()) });
            if m.is_nan() {
                return Err(Error::BlowUp { time: s.time, reason: format!("NaN in {name}") });
            }
            if m > BLOW_UP_LIMIT {
                return Err(Error::BlowUp { time: s.time, reason: format!("max |{name}| = {m} > {BLOW_UP_LIMIT}") });
            }
        }
        if s.u_plus.iter().chain(&s.u_minus).flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::BlowUp { time: s.time, reason: "non-finite velocity".into() });
        }
        Ok(())
    }

    /// Integrates `steps` steps, recording diagnostics every `record_every` steps
    /// (and at the start).
    pub fn run(
        &mut self,
        s0: &FieldState,
        dt: f64,
        steps: usize,
        record_every: usize,
        ks: &[i32],
    ) -> Result<RunRecord> {
        match self.run_partial(s0, dt, steps, record_every, ks) {
            (rec, None) => Ok(rec),
            (_, Some(e)) => Err(e),
        }
    }

    /// As [`Solver::run`], but on failure also returns what was recorded so far,
    /// with `final_state` set to the last good state.
    pub fn run_partial(
        &mut self,
        s0: &FieldState,
        dt: f64,
        steps: usize,
        record_every: usize,
        ks: &[i32],
    ) -> (RunRecord, Option<Error>) {
        let every = record_every.max(1);
        let mut rec = RunRecord { ks: ks.to_vec(), ..RunRecord::default() };
        let mut s = s0.clone();
        let mut outcome = self.record(&mut rec, &s, ks);
        for i in 1..=steps {
            if outcome.is_err() {
                break;
            }
            outcome = self.step(&s, dt).map(|next| s = next);
            if outcome.is_ok() && (i % every == 0 || i == steps) {
                outcome = self.record(&mut rec, &s, ks);
            }
        }
        rec.final_state = Some(s);
        (rec, outcome.err())
    }

    fn record(&self, rec: &mut RunRecord, s: &FieldState, ks: &[i32]) -> Result<()> {
        rec.times.push(s.time);
        rec.energy.push(energy_report(&self.grid, &self.coeffs, s));
        rec.norm_rows.push(diagnostics::state_norms(&self.grid, &self.closure, &self.coeffs, s, ks)?);
        rec.functionals.push(functional_sample(&self.grid, &self.coeffs, s, 3));
        Ok(())
    }
}

/// Diagnostics of one run.
#[derive(Debug, Clone, Default)]
pub struct RunRecord {
    pub times: Vec<f64>,
    pub ks: Vec<i32>,
    pub energy: Vec<EnergyReport>,
    norm_rows: Vec<Vec<[f64; 9]>>,
    pub functionals: Vec<FunctionalSample>,
    pub final_state: Option<FieldState>,
}

impl RunRecord {
    pub fn norm_series(&self) -> Vec<NormSeries> {
        diagnostics::norm_series_from_rows(&self.times, &self.ks, &self.norm_rows)
    }

    pub fn max_mass_drift(&self) -> f64 {
        let Some(first) = self.energy.first() else { return 0.0 };
        self.energy
            .iter()
            .map(|e| (e.mass_plus - first.mass_plus).abs().max((e.mass_minus - first.mass_minus).abs()))
            .fold(0.0, f64::max)
    }

    pub fn write_norm_csv<W: Write>(&self, w: W) -> Result<()> {
        write_norm_csv(w, &self.norm_series())
    }

    pub fn write_energy_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "e0", "d0", "mass_plus", "mass_minus"])?;
        for e in &self.energy {
            wr.write_record([e.time, e.e0, e.d0, e.mass_plus, e.mass_minus].map(|v| format!("{v:e}")))?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Grid sizes used when none are configured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeskScale;

impl DeskScale {
    pub fn points(dim: usize) -> usize {
        match dim {
            1 => 1024,
            2 => 256,
            _ => 64,
        }
    }

    pub fn length() -> f64 {
        2.0 * std::f64::consts::PI * 32.0
    }
}
