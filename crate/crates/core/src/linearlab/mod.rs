//! Exact whole-space linear evolution in frequency space and Sobolev norms
//! of radially symmetric data.
//!
//! A mode at radius `r` carries `(n+, phi+, n-, phi-)` advanced by
//! `exp(t A1(r))` and the two incompressible velocity amplitudes advanced by
//! heat factors. Norms are `||grad^k f||^2 = 4 pi int r^(2k+2) |f^(r)|^2 dr`.

pub mod data;
pub mod fit;
pub mod quadrature;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::closure::{linear_coefficients, linearized_density_perturbation, FluidParams, LinearCoefficients};
use crate::error::{Error, Result};
use crate::spectral::{
    build_mode_system, heat_factor, select_eta, semigroup_decomposition, FrequencyCutoff, SemigroupDecomposition,
};

pub use data::{make_generic_data, make_lower_bound_data, DataKind, RadialProfile, RadialProfileData};
pub use fit::{
    band_ratio, expected_exponent, fit_power_law, verify_lower_bounds, verify_rates, ClaimKind, DecayFit, RateClaim,
    RateReport,
};
pub use quadrature::radial_norm;

pub const QUADRATURE_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_WINDOW: [f64; 2] = [1e2, 1e4];
pub const DEFAULT_SAMPLES: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variable {
    NPlus,
    NMinus,
    PhiPlus,
    PhiMinus,
    /// `beta+ n+ + beta- n-`
    Combination,
    DrhoPlus,
    DrhoMinus,
    /// Incompressible velocity part of phase `+`.
    IncompPlus,
    IncompMinus,
}

impl Variable {
    pub const ALL: [Variable; 9] = [
        Variable::NPlus,
        Variable::NMinus,
        Variable::PhiPlus,
        Variable::PhiMinus,
        Variable::Combination,
        Variable::DrhoPlus,
        Variable::DrhoMinus,
        Variable::IncompPlus,
        Variable::IncompMinus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::NPlus => "n+",
            Variable::NMinus => "n-",
            Variable::PhiPlus => "phi+",
            Variable::PhiMinus => "phi-",
            Variable::Combination => "combo",
            Variable::DrhoPlus => "drho+",
            Variable::DrhoMinus => "drho-",
            Variable::IncompPlus => "w+",
            Variable::IncompMinus => "w-",
        }
    }

    fn index(self) -> usize {
        Variable::ALL.iter().position(|v| *v == self).unwrap()
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variable::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown variable '{s}'")))
    }
}

/// `||grad^k variable||(t)` at the sample instants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSeries {
    pub variable: Variable,
    pub k: i32,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// `exp(t A1) u0`.
pub fn evolve_mode(decomp: &SemigroupDecomposition, u0: &[Complex64; 4], t: f64) -> [Complex64; 4] {
    let e = decomp.eval(t);
    let mut out = [Complex64::new(0.0, 0.0); 4];
    for (i, o) in out.iter_mut().enumerate() {
        for (j, u) in u0.iter().enumerate() {
            *o += e[(i, j)] * u;
        }
    }
    out
}

/// `(beta1 n+ + beta2 n-) / (beta+ n+ + beta- n-)`, the constant `sqrt(beta1 beta2)`.
pub fn combination_ratio(c: &LinearCoefficients) -> f64 {
    (c.beta1 * c.beta2).sqrt()
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::Domain("sample times must be finite and nonnegative".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("sample times must be strictly increasing".into()));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct LinearLab {
    coeffs: LinearCoefficients,
    eta: f64,
}

impl LinearLab {
    pub fn new(params: &FluidParams) -> Result<Self> {
        let coeffs = linear_coefficients(params)?;
        let eta = select_eta(&coeffs)?;
        Ok(Self { coeffs, eta })
    }

    pub fn with_coefficients(coeffs: LinearCoefficients, eta: f64) -> Self {
        Self { coeffs, eta }
    }

    pub fn coefficients(&self) -> &LinearCoefficients {
        &self.coeffs
    }

    /// Low/high frequency cutoff radius.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Spectra of all variables at radius `r > 0` and time `t`, in [`Variable::ALL`] order.
    pub fn mode_values(&self, data: &RadialProfileData, r: f64, t: f64) -> Result<[Complex64; 9]> {
        let u0 = data.compressible(r).map(|x| Complex64::new(x, 0.0));
        let u = if u0.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            u0
        } else {
            let decomp = semigroup_decomposition(&build_mode_system(r, &self.coeffs))?;
            evolve_mode(&decomp, &u0, t)
        };
        let c = &self.coeffs;
        let (dp_re, dm_re) = linearized_density_perturbation(u[0].re, u[2].re, c);
        let (dp_im, dm_im) = linearized_density_perturbation(u[0].im, u[2].im, c);
        let w = data.incompressible(r);
        Ok([
            u[0],
            u[2],
            u[1],
            u[3],
            u[0] * c.beta_plus + u[2] * c.beta_minus,
            Complex64::new(dp_re, dp_im),
            Complex64::new(dm_re, dm_im),
            Complex64::new(w[0] * heat_factor(r, c.nu1_plus, t), 0.0),
            Complex64::new(w[1] * heat_factor(r, c.nu1_minus, t), 0.0),
        ])
    }

    /// Norm histories of every variable for every `k` in `ks`.
    ///
    /// With `low_pass` the spectra are multiplied by the cutoff of radius `eta`
    /// first, giving the low-frequency parts.
    pub fn norm_table(
        &self,
        data: &RadialProfileData,
        times: &[f64],
        ks: &[i32],
        low_pass: bool,
    ) -> Result<Vec<NormSeries>> {
        check_times(times)?;
        if ks.iter().any(|k| *k < -1) {
            return Err(Error::Domain("derivative order must be >= -1".into()));
        }
        let nv = Variable::ALL.len();
        let dim = nv * ks.len();
        let r_max = data.support_radius();
        let cutoff = FrequencyCutoff::new(self.eta);
        let mut rows = Vec::with_capacity(times.len());
        for &t in times {
            let vals = if r_max == 0.0 {
                vec![0.0; dim]
            } else {
                let f = |r: f64| -> Result<Vec<f64>> {
                    let m = self.mode_values(data, r, t)?;
                    let filt = if low_pass { cutoff.weight(r) } else { 1.0 };
                    let mut out = Vec::with_capacity(dim);
                    for &k in ks {
                        let w = r.powi(2 * k + 2) * filt * filt;
                        out.extend(m.iter().map(|z| w * z.norm_sqr()));
                    }
                    Ok(out)
                };
                let breaks = quadrature::geometric_breaks(r_max, 1e-6 * r_max);
                quadrature::integrate(&f, &breaks, dim, QUADRATURE_TOLERANCE, 2)?
                    .into_iter()
                    .map(|i| (4.0 * std::f64::consts::PI * i.max(0.0)).sqrt())
                    .collect()
            };
            rows.push(vals);
        }
        let mut out = Vec::with_capacity(dim);
        for (ki, &k) in ks.iter().enumerate() {
            for v in Variable::ALL {
                let col = ki * nv + v.index();
                out.push(NormSeries {
                    variable: v,
                    k,
                    times: times.to_vec(),
                    values: rows.iter().map(|r| r[col]).collect(),
                });
            }
        }
        Ok(out)
    }

    pub fn linear_norm_series(
        &self,
        data: &RadialProfileData,
        times: &[f64],
        k: i32,
        variable: Variable,
    ) -> Result<NormSeries> {
        let mut table = self.norm_table(data, times, &[k], false)?;
        let i = variable.index();
        Ok(table.swap_remove(i))
    }
}

pub fn write_norm_csv<W: Write>(w: W, series: &[NormSeries]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "variable", "k", "norm"])?;
    for s in series {
        for (t, v) in s.times.iter().zip(&s.values) {
            wr.write_record([format!("{t:e}"), s.variable.to_string(), s.k.to_string(), format!("{v:e}")])?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Reads the schema of [`write_norm_csv`], grouping rows by `(variable, k)`.
pub fn read_norm_csv<R: std::io::Read>(r: R) -> Result<Vec<NormSeries>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out: Vec<NormSeries> = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<&str> {
            rec.get(i).ok_or_else(|| Error::Domain(format!("norm CSV row with {} fields", rec.len())))
        };
        let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Domain(format!("bad number '{s}'"))) };
        let t = num(parse(0)?)?;
        let variable: Variable = parse(1)?.parse()?;
        let k: i32 = parse(2)?.parse().map_err(|_| Error::Domain("bad k".into()))?;
        let v = num(parse(3)?)?;
        match out.iter_mut().find(|s| s.variable == variable && s.k == k) {
            Some(s) => {
                s.times.push(t);
                s.values.push(v);
            }
            None => out.push(NormSeries { variable, k, times: vec![t], values: vec![v] }),
        }
    }
    Ok(out)
}

pub fn write_fit_csv<W: Write>(w: W, report: &RateReport) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["variable", "k", "exponent", "amplitude", "residual", "pass", "expected"])?;
    for c in &report.claims {
        wr.write_record([
            c.variable.to_string(),
            c.k.to_string(),
            format!("{:.6}", c.fit.exponent),
            format!("{:e}", c.fit.amplitude),
            format!("{:e}", c.fit.residual),
            if c.pass { "pass" } else { "fail" }.to_string(),
            format!("{:.6}", c.expected),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{log_grid, CMat4};
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn lab() -> LinearLab {
        LinearLab::new(&FluidParams::symmetric()).unwrap()
    }

    fn gamma_half(k: i32) -> f64 {
        // Gamma(k + 3/2)
        let mut g = PI.sqrt() / 2.0;
        for j in 1..=k {
            g *= j as f64 + 0.5;
        }
        g
    }

    #[test]
    fn evolve_at_zero_time_is_identity() {
        let d = semigroup_decomposition(&build_mode_system(0.3, lab().coefficients())).unwrap();
        let u0 = [0.1, -0.2, 0.3, 0.4].map(|x| Complex64::new(x, 0.0));
        let u = evolve_mode(&d, &u0, 0.0);
        for i in 0..4 {
            assert!((u[i] - u0[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn eigenvector_evolves_by_exponential() {
        let d = semigroup_decomposition(&build_mode_system(0.7, lab().coefficients())).unwrap();
        // A column of P1 is an eigenvector for lambda1.
        let p = d.projectors[0];
        let col = (0..4).max_by(|&a, &b| p.column(a).norm().total_cmp(&p.column(b).norm())).unwrap();
        let v = [p[(0, col)], p[(1, col)], p[(2, col)], p[(3, col)]];
        let t = 3.0;
        let u = evolve_mode(&d, &v, t);
        let g = (d.eigenvalues[0] * t).exp();
        let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for i in 0..4 {
            assert!((u[i] - g * v[i]).norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn matches_rk4_integration() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let l = lab();
        for &xi in &[0.05, 0.8, 3.0] {
            let mode = build_mode_system(xi, l.coefficients());
            let d = semigroup_decomposition(&mode).unwrap();
            let u0: [Complex64; 4] = std::array::from_fn(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0));
            let a: CMat4 = mode.a1_complex();
            let t = 2.0;
            let steps = 20_000;
            let h = t / steps as f64;
            let mut u = nalgebra::Vector4::from_column_slice(&u0);
            let f = |v: &nalgebra::Vector4<Complex64>| a * v;
            for _ in 0..steps {
                let k1 = f(&u);
                let k2 = f(&(u + k1 * Complex64::new(h / 2.0, 0.0)));
                let k3 = f(&(u + k2 * Complex64::new(h / 2.0, 0.0)));
                let k4 = f(&(u + k3 * Complex64::new(h, 0.0)));
                u += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4)
                    * Complex64::new(h / 6.0, 0.0);
            }
            let e = evolve_mode(&d, &u0, t);
            for i in 0..4 {
                assert!((e[i] - u[i]).norm() < 1e-7, "xi {xi}: {} vs {}", e[i], u[i]);
            }
        }
    }

    #[test]
    fn initial_norms_match_direct_quadrature() {
        let l = lab();
        let data = make_generic_data(0.5, l.eta()).unwrap();
        let table = l.norm_table(&data, &[0.0], &[0, 2], false).unwrap();
        for s in &table {
            let prof = match s.variable {
                Variable::NPlus => data.profiles[0],
                Variable::PhiPlus => data.profiles[1],
                Variable::NMinus => data.profiles[2],
                Variable::PhiMinus => data.profiles[3],
                Variable::IncompPlus => data.incomp_plus,
                Variable::IncompMinus => data.incomp_minus,
                _ => continue,
            };
            let direct = radial_norm(|r| prof.eval(r), s.k, prof.support_radius()).unwrap();
            assert!((s.values[0] - direct).abs() <= 1e-8 * direct, "{} k={}", s.variable, s.k);
        }
    }

    #[test]
    fn heat_parts_match_closed_form() {
        let l = lab();
        let data = make_generic_data(0.5, l.eta()).unwrap();
        let times = [0.0, 1.0, 10.0, 1e3];
        for k in 0..4 {
            let s = l.linear_norm_series(&data, &times, k, Variable::IncompPlus).unwrap();
            let RadialProfile::Gaussian { amplitude, width } = data.incomp_plus else { panic!() };
            for (t, v) in times.iter().zip(&s.values) {
                // 4 pi a^2 int r^(2k+2) exp(-c r^2) dr = 2 pi a^2 Gamma(k + 3/2) / c^(k + 3/2)
                let c = 1.0 / (width * width) + 2.0 * l.coefficients().nu1_plus * t;
                let want = (2.0 * PI * amplitude * amplitude * gamma_half(k) / c.powf(k as f64 + 1.5)).sqrt();
                assert!((v - want).abs() <= 1e-8 * want, "k={k} t={t}: {v} vs {want}");
            }
        }
    }

    #[test]
    fn symmetric_difference_matches_reduced_system() {
        // At symmetric parameters n+ - n- and phi+ - phi- decouple:
        // d/dt (n, phi) = [[0, -xi], [sigma xi^3, -nu xi^2]] (n, phi).
        let l = lab();
        let c = *l.coefficients();
        let data = make_generic_data(0.5, l.eta()).unwrap();
        let (sig, nu) = (c.sigma_plus, c.nu_plus);
        for &t in &[1.0, 30.0, 300.0] {
            let r_max = data.support_radius();
            let breaks = quadrature::geometric_breaks(r_max, 1e-6 * r_max);
            let full = |r: f64| -> Result<Vec<f64>> {
                let m = l.mode_values(&data, r, t)?;
                Ok(vec![r * r * (m[0] - m[1]).norm_sqr()])
            };
            let reduced = |r: f64| -> Result<Vec<f64>> {
                let u0 = data.compressible(r);
                let (n0, p0) = (u0[0] - u0[2], u0[1] - u0[3]);
                // Eigenvalues of the 2x2 block.
                let tr = -nu * r * r;
                let det = sig * r.powi(4);
                let disc = Complex64::new(tr * tr - 4.0 * det, 0.0).sqrt();
                let l1 = (tr + disc) / 2.0;
                let l2 = (tr - disc) / 2.0;
                // n(t) = [(l1 e2 - l2 e1) n0 + (e1 - e2)(-r p0)] / (l1 - l2) with e_i = exp(l_i t)
                let (e1, e2) = ((l1 * t).exp(), (l2 * t).exp());
                let n = ((l1 * e2 - l2 * e1) * n0 + (e1 - e2) * (-r * p0)) / (l1 - l2);
                Ok(vec![r * r * n.norm_sqr()])
            };
            let a = quadrature::integrate(&full, &breaks, 1, 1e-10, 2).unwrap()[0];
            let b = quadrature::integrate(&reduced, &breaks, 1, 1e-10, 2).unwrap()[0];
            assert!((a - b).abs() <= 1e-8 * b, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn plancherel_against_grid_sum() {
        let l = lab();
        let data = make_generic_data(0.5, l.eta()).unwrap();
        let prof = data.profiles[0];
        let n = 96;
        let r_max = prof.support_radius();
        let h = 2.0 * r_max / n as f64;
        for k in [0, 1] {
            let mut sum = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for m in 0..n {
                        let x = -r_max + (i as f64 + 0.5) * h;
                        let y = -r_max + (j as f64 + 0.5) * h;
                        let z = -r_max + (m as f64 + 0.5) * h;
                        let r = (x * x + y * y + z * z).sqrt();
                        sum += r.powi(2 * k) * prof.eval(r).powi(2);
                    }
                }
            }
            let grid = (sum * h * h * h).sqrt();
            let radial = radial_norm(|r| prof.eval(r), k, r_max).unwrap();
            assert!((grid - radial).abs() <= 1e-4 * radial, "k={k}: {grid} vs {radial}");
        }
    }

    #[test]
    fn generic_data_decays() {
        let l = lab();
        let data = make_generic_data(0.5, l.eta()).unwrap();
        for v in Variable::ALL {
            let s = l.linear_norm_series(&data, &[0.0, 100.0], 0, v).unwrap();
            assert!(s.values[1] < s.values[0], "{v}");
        }
    }

    #[test]
    fn zero_data_has_zero_norms() {
        let l = lab();
        let data = make_generic_data(0.0, l.eta()).unwrap();
        let t = l.norm_table(&data, &[0.0, 5.0], &[0, 1], true).unwrap();
        assert!(t.iter().all(|s| s.values.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn rejects_unsorted_times() {
        let l = lab();
        let data = make_generic_data(0.5, l.eta()).unwrap();
        assert!(l.norm_table(&data, &[1.0, 1.0], &[0], false).is_err());
        assert!(l.norm_table(&data, &[-1.0], &[0], false).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let times = log_grid(1.0, 10.0, 3);
        let s = vec![NormSeries { variable: Variable::Combination, k: 2, times, values: vec![1.0, 0.5, 0.25] }];
        let mut buf = Vec::new();
        write_norm_csv(&mut buf, &s).unwrap();
        let back = read_norm_csv(buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }
}
