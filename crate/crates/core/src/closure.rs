//! Algebraic closure: from fraction densities `(R+, R-)` to phase densities,
//! volume fractions, sound speeds and the mixed coefficient `C^2`.
//!
//! Pressure laws are `P(rho) = rho^gamma` for each phase. Common pressure
//! `P+(rho+) = P-(rho-)` together with `alpha+ + alpha- = 1` and
//! `alpha rho = R` leaves one scalar equation in `rho+`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction densities below this are treated as vacuum and rejected.
pub const MIN_FRACTION_DENSITY: f64 = 1e-8;

const MAX_ITER: usize = 200;

/// Physical constants of the two-fluid model. Missing fields deserialize to
/// their [`FluidParams::symmetric`] values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluidParams {
    pub mu_plus: f64,
    pub mu_minus: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub rbar_plus: f64,
    pub rbar_minus: f64,
}

impl Default for FluidParams {
    fn default() -> Self {
        Self::symmetric()
    }
}

impl FluidParams {
    /// Equal phases: `gamma = 2`, `mu = 1`, `lambda = 0`, `sigma = 1`, `Rbar = 1`.
    pub fn symmetric() -> Self {
        Self {
            mu_plus: 1.0,
            mu_minus: 1.0,
            lambda_plus: 0.0,
            lambda_minus: 0.0,
            sigma_plus: 1.0,
            sigma_minus: 1.0,
            gamma_plus: 2.0,
            gamma_minus: 2.0,
            rbar_plus: 1.0,
            rbar_minus: 1.0,
        }
    }

    /// Every violated physical condition, as a readable inequality.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (side, mu, lambda, sigma, gamma, rbar) in [
            ("+", self.mu_plus, self.lambda_plus, self.sigma_plus, self.gamma_plus, self.rbar_plus),
            ("-", self.mu_minus, self.lambda_minus, self.sigma_minus, self.gamma_minus, self.rbar_minus),
        ] {
            let vals = [mu, lambda, sigma, gamma, rbar];
            if vals.iter().any(|x| !x.is_finite()) {
                v.push(format!("parameters of phase {side} must be finite"));
                continue;
            }
            if mu <= 0.0 {
                v.push(format!("mu{side} > 0 violated (mu{side} = {mu})"));
            }
            if 2.0 * mu + 3.0 * lambda < 0.0 {
                v.push(format!(
                    "2 mu{side} + 3 lambda{side} >= 0 violated (2*{mu} + 3*{lambda} = {})",
                    2.0 * mu + 3.0 * lambda
                ));
            }
            if sigma <= 0.0 {
                v.push(format!("sigma{side} > 0 violated (sigma{side} = {sigma})"));
            }
            if gamma < 1.0 {
                v.push(format!("gamma{side} >= 1 violated (gamma{side} = {gamma})"));
            }
            if rbar <= 0.0 {
                v.push(format!("rbar{side} > 0 violated (rbar{side} = {rbar})"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v))
        }
    }
}

/// Closure quantities at one `(R+, R-)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureState {
    pub rho_plus: f64,
    pub rho_minus: f64,
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub s2_plus: f64,
    pub s2_minus: f64,
    pub c2: f64,
}

/// Constant coefficients of the linearized system around `(Rbar+, Rbar-)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCoefficients {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub nu1_plus: f64,
    pub nu1_minus: f64,
    pub nu2_plus: f64,
    pub nu2_minus: f64,
    pub nu_plus: f64,
    pub nu_minus: f64,
    pub rhobar_plus: f64,
    pub rhobar_minus: f64,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    /// `C^2` at equilibrium.
    pub c2: f64,
    pub s2_plus: f64,
    pub s2_minus: f64,
}

/// The ten coefficient functions of the nonlinear terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NonlinearCoefficients {
    pub g_plus: f64,
    pub g_minus: f64,
    pub gbar_plus: f64,
    pub gbar_minus: f64,
    pub h_plus: f64,
    pub h_minus: f64,
    pub k_plus: f64,
    pub k_minus: f64,
    pub l_plus: f64,
    pub l_minus: f64,
}

/// `(P, s^2) = (rho^gamma, gamma rho^(gamma-1))`.
pub fn pressure_and_sound_speed(rho: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Domain(format!("density must be positive, got {rho}")));
    }
    if !(gamma >= 1.0) {
        return Err(Error::Domain(format!("gamma must be >= 1, got {gamma}")));
    }
    let rg1 = rho.powf(gamma - 1.0);
    Ok((rg1 * rho, gamma * rg1))
}

fn check_fraction(r_plus: f64, r_minus: f64) -> Result<()> {
    for (name, r) in [("R+", r_plus), ("R-", r_minus)] {
        if !r.is_finite() || r < MIN_FRACTION_DENSITY {
            return Err(Error::Domain(format!("{name} = {r} is below the vacuum threshold {MIN_FRACTION_DENSITY}")));
        }
    }
    Ok(())
}

/// `phi(rho+) = P+(rho+) - P-(R- rho+ / (rho+ - R+))` and its derivative.
fn phi_and_derivative(rho: f64, r_plus: f64, r_minus: f64, gp: f64, gm: f64) -> (f64, f64, f64) {
    let d = rho - r_plus;
    let rho_m = r_minus * rho / d;
    let sp_pow = rho.powf(gp - 1.0);
    let sm_pow = rho_m.powf(gm - 1.0);
    let pp = sp_pow * rho;
    let pm = sm_pow * rho_m;
    let dphi = gp * sp_pow + gm * sm_pow * r_minus * r_plus / (d * d);
    (pp - pm, dphi, pp)
}

/// Root `rho+ > R+` of the pressure-equilibrium equation.
pub fn solve_rho_plus(r_plus: f64, r_minus: f64, params: &FluidParams) -> Result<f64> {
    solve_rho_plus_from(r_plus, r_minus, params, None)
}

/// As [`solve_rho_plus`], starting Newton from `guess` when it lies in the bracket.
pub fn solve_rho_plus_from(r_plus: f64, r_minus: f64, params: &FluidParams, guess: Option<f64>) -> Result<f64> {
    check_fraction(r_plus, r_minus)?;
    let (gp, gm) = (params.gamma_plus, params.gamma_minus);
    let f = |rho: f64| phi_and_derivative(rho, r_plus, r_minus, gp, gm);

    let mut lo = r_plus * (1.0 + 1e-12);
    let mut hi = r_plus + r_minus + 10.0 * r_plus.max(r_minus);
    // phi -> +inf as rho -> inf; widen when small densities push the root out.
    let mut widen = 0;
    while f(hi).0 <= 0.0 {
        lo = hi;
        hi *= 2.0;
        widen += 1;
        if widen > 200 || !hi.is_finite() {
            return Err(Error::Convergence { what: "bracketing of rho+", iterations: widen });
        }
    }

    let mut rho = match guess {
        Some(g) if g > lo && g < hi => g,
        _ => {
            let g = r_plus + r_minus;
            if g > lo && g < hi {
                g
            } else {
                0.5 * (lo + hi)
            }
        }
    };

    for _ in 0..MAX_ITER {
        let (val, dval, p) = f(rho);
        if val.abs() <= 1e-12 * p.max(1.0) {
            return Ok(rho);
        }
        if val < 0.0 {
            lo = rho;
        } else {
            hi = rho;
        }
        let newton = rho - val / dval;
        rho = if newton.is_finite() && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            let (val, _, p) = f(rho);
            if val.abs() <= 1e-12 * p.max(1.0) {
                return Ok(rho);
            }
            break;
        }
    }
    Err(Error::Convergence { what: "rho+ Newton/bisection", iterations: MAX_ITER })
}

fn state_from_rho(rho_plus: f64, r_plus: f64, r_minus: f64, params: &FluidParams) -> Result<ClosureState> {
    let rho_minus = r_minus * rho_plus / (rho_plus - r_plus);
    let alpha_plus = r_plus / rho_plus;
    let alpha_minus = 1.0 - alpha_plus;
    let (_, s2_plus) = pressure_and_sound_speed(rho_plus, params.gamma_plus)?;
    let (_, s2_minus) = pressure_and_sound_speed(rho_minus, params.gamma_minus)?;
    let c2 = s2_plus * s2_minus / (alpha_minus * rho_plus * s2_plus + alpha_plus * rho_minus * s2_minus);
    Ok(ClosureState { rho_plus, rho_minus, alpha_plus, alpha_minus, s2_plus, s2_minus, c2 })
}

/// Full closure state at `(R+, R-)`.
pub fn closure_state(r_plus: f64, r_minus: f64, params: &FluidParams) -> Result<ClosureState> {
    let rho = solve_rho_plus(r_plus, r_minus, params)?;
    state_from_rho(rho, r_plus, r_minus, params)
}

/// Closure state with a warm-start guess for `rho+`.
pub fn closure_state_from(r_plus: f64, r_minus: f64, params: &FluidParams, guess: Option<f64>) -> Result<ClosureState> {
    let rho = solve_rho_plus_from(r_plus, r_minus, params, guess)?;
    state_from_rho(rho, r_plus, r_minus, params)
}

pub fn linear_coefficients(params: &FluidParams) -> Result<LinearCoefficients> {
    params.validate()?;
    let eq = closure_state(params.rbar_plus, params.rbar_minus, params)?;
    Ok(linear_from_equilibrium(&eq, params))
}

fn linear_from_equilibrium(eq: &ClosureState, params: &FluidParams) -> LinearCoefficients {
    let c2 = eq.c2;
    let (rp, rm) = (eq.rho_plus, eq.rho_minus);
    let beta1 = c2 * rm / rp;
    let beta4 = c2 * rp / rm;
    let nu1_plus = params.mu_plus / rp;
    let nu1_minus = params.mu_minus / rm;
    let nu2_plus = (params.mu_plus + params.lambda_plus) / rp;
    let nu2_minus = (params.mu_minus + params.lambda_minus) / rm;
    LinearCoefficients {
        beta1,
        beta2: c2,
        beta3: c2,
        beta4,
        beta_plus: (beta1 / c2).sqrt(),
        beta_minus: (beta4 / c2).sqrt(),
        nu1_plus,
        nu1_minus,
        nu2_plus,
        nu2_minus,
        nu_plus: nu1_plus + nu2_plus,
        nu_minus: nu1_minus + nu2_minus,
        rhobar_plus: rp,
        rhobar_minus: rm,
        sigma_plus: params.sigma_plus,
        sigma_minus: params.sigma_minus,
        c2,
        s2_plus: eq.s2_plus,
        s2_minus: eq.s2_minus,
    }
}

/// Evaluates the nonlinear coefficient functions repeatedly against a fixed equilibrium.
#[derive(Debug, Clone)]
pub struct ClosureEvaluator {
    params: FluidParams,
    equilibrium: ClosureState,
}

impl ClosureEvaluator {
    pub fn new(params: &FluidParams) -> Result<Self> {
        params.validate()?;
        let equilibrium = closure_state(params.rbar_plus, params.rbar_minus, params)?;
        Ok(Self { params: *params, equilibrium })
    }

    pub fn equilibrium(&self) -> &ClosureState {
        &self.equilibrium
    }

    pub fn params(&self) -> &FluidParams {
        &self.params
    }

    /// Coefficients at `R = Rbar + n`; also returns `rho+` for warm starts.
    pub fn coefficients(&self, n_plus: f64, n_minus: f64, guess: Option<f64>) -> Result<(NonlinearCoefficients, f64)> {
        let r_plus = self.params.rbar_plus + n_plus;
        let r_minus = self.params.rbar_minus + n_minus;
        let cs = closure_state_from(r_plus, r_minus, &self.params, guess).map_err(|e| match e {
            Error::Domain(m) => Error::Domain(format!("closure at n = ({n_plus}, {n_minus}): {m}")),
            other => other,
        })?;
        let eq = &self.equilibrium;
        let c = NonlinearCoefficients {
            g_plus: cs.c2 * cs.rho_minus / cs.rho_plus - eq.c2 * eq.rho_minus / eq.rho_plus,
            g_minus: cs.c2 * cs.rho_plus / cs.rho_minus - eq.c2 * eq.rho_plus / eq.rho_minus,
            gbar_plus: cs.c2 - eq.c2,
            gbar_minus: cs.c2 - eq.c2,
            h_plus: cs.c2 * cs.alpha_minus / (r_plus * cs.s2_minus),
            h_minus: -cs.c2 / (cs.rho_minus * cs.s2_minus),
            k_plus: -cs.c2 / (cs.rho_plus * cs.s2_plus),
            k_minus: cs.c2 * cs.alpha_plus / (r_minus * cs.s2_plus),
            l_plus: 1.0 / cs.rho_plus - 1.0 / eq.rho_plus,
            l_minus: 1.0 / cs.rho_minus - 1.0 / eq.rho_minus,
        };
        Ok((c, cs.rho_plus))
    }
}

/// Coefficient functions at `(Rbar+ + n+, Rbar- + n-)`.
///
/// `h` and `k` are the weights of `grad n+` and `grad n-` in `(1/R) grad alpha`
/// of the respective phase, so the viscous coupling of phase `+` reads
/// `mu+ (d_j u_i + d_i u_j) w_j + lambda+ (div u) w_i` with `w = h+ grad n+ + k+ grad n-`.
pub fn nonlinear_coefficients(n_plus: f64, n_minus: f64, params: &FluidParams) -> Result<NonlinearCoefficients> {
    ClosureEvaluator::new(params)?.coefficients(n_plus, n_minus, None).map(|(c, _)| c)
}

/// Linearized phase-density perturbation `(delta rho+, delta rho-)`.
pub fn linearized_density_perturbation(n_plus: f64, n_minus: f64, coeffs: &LinearCoefficients) -> (f64, f64) {
    let combo = coeffs.beta_plus * n_plus + coeffs.beta_minus * n_minus;
    let scale = coeffs.c2 * (coeffs.rhobar_plus * coeffs.rhobar_minus).sqrt();
    (scale / coeffs.s2_plus * combo, scale / coeffs.s2_minus * combo)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain bisection on a fixed wide bracket; independent of the Newton path.
    fn bisection_oracle(rp: f64, rm: f64, p: &FluidParams) -> f64 {
        let phi = |rho: f64| rho.powf(p.gamma_plus) - (rm * rho / (rho - rp)).powf(p.gamma_minus);
        let (mut lo, mut hi) = (rp + 1e-9, rp + 1e3);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if phi(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn with_gammas(gp: f64, gm: f64) -> FluidParams {
        FluidParams { gamma_plus: gp, gamma_minus: gm, ..FluidParams::symmetric() }
    }

    #[test]
    fn pressure_examples() {
        assert_eq!(pressure_and_sound_speed(1.0, 2.0).unwrap(), (1.0, 2.0));
        assert_eq!(pressure_and_sound_speed(2.0, 2.0).unwrap(), (4.0, 4.0));
        // 1.7^1.4 = exp(1.4 ln 1.7), reference from 50-digit arithmetic.
        let (p, s2) = pressure_and_sound_speed(1.7, 1.4).unwrap();
        let p_ref = 2.101_979_566_625_167_1;
        assert!((p - p_ref).abs() / p_ref < 1e-14, "{p}");
        assert!((s2 - 1.4 * p_ref / 1.7).abs() / s2 < 1e-14);
        assert!(pressure_and_sound_speed(0.0, 2.0).is_err());
        assert!(pressure_and_sound_speed(-1.0, 2.0).is_err());
    }

    #[test]
    fn symmetric_root_and_state() {
        let p = FluidParams::symmetric();
        assert!((solve_rho_plus(1.0, 1.0, &p).unwrap() - 2.0).abs() < 1e-12);
        let cs = closure_state(1.0, 1.0, &p).unwrap();
        for (v, e) in [
            (cs.rho_plus, 2.0),
            (cs.rho_minus, 2.0),
            (cs.alpha_plus, 0.5),
            (cs.alpha_minus, 0.5),
            (cs.s2_plus, 4.0),
            (cs.s2_minus, 4.0),
            (cs.c2, 2.0),
        ] {
            assert!((v - e).abs() < 1e-12, "{v} vs {e}");
        }
    }

    #[test]
    fn roots_match_bisection() {
        for (rp, rm, gp, gm) in [(1.0, 1.0, 2.0, 3.0), (0.3, 1.8, 1.4, 1.4)] {
            let p = with_gammas(gp, gm);
            let r = solve_rho_plus(rp, rm, &p).unwrap();
            let o = bisection_oracle(rp, rm, &p);
            assert!((r - o).abs() < 1e-10, "{r} vs {o}");
        }
    }

    #[test]
    fn root_outside_default_bracket() {
        // Small densities with gamma+ > gamma- put the root above R+ + R- + 10 max R.
        let p = with_gammas(3.0, 1.0);
        let r = solve_rho_plus(0.01, 0.01, &p).unwrap();
        assert!(r > 0.12);
        let cs = closure_state(0.01, 0.01, &p).unwrap();
        let pp = cs.rho_plus.powf(3.0);
        assert!((pp - cs.rho_minus).abs() <= 1e-10 * pp);
    }

    #[test]
    fn vacuum_rejected() {
        let p = FluidParams::symmetric();
        assert!(matches!(solve_rho_plus(1e-9, 1.0, &p), Err(Error::Domain(_))));
        assert!(matches!(solve_rho_plus(1.0, -1.0, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn symmetric_linear_coefficients() {
        let c = linear_coefficients(&FluidParams::symmetric()).unwrap();
        for b in [c.beta1, c.beta2, c.beta3, c.beta4] {
            assert!((b - 2.0).abs() < 1e-12);
        }
        assert!((c.beta_plus - 1.0).abs() < 1e-12 && (c.beta_minus - 1.0).abs() < 1e-12);
        for v in [c.nu1_plus, c.nu1_minus, c.nu2_plus, c.nu2_minus] {
            assert!((v - 0.5).abs() < 1e-12);
        }
        assert!((c.nu_plus - 1.0).abs() < 1e-12 && (c.nu_minus - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_nonlinear_coefficients() {
        let c = nonlinear_coefficients(0.0, 0.0, &FluidParams::symmetric()).unwrap();
        assert_eq!(c.g_plus, 0.0);
        assert_eq!(c.g_minus, 0.0);
        assert_eq!(c.gbar_plus, 0.0);
        assert_eq!(c.gbar_minus, 0.0);
        assert_eq!(c.l_plus, 0.0);
        assert_eq!(c.l_minus, 0.0);
        assert!((c.h_plus - 0.25).abs() < 1e-12);
    }

    #[test]
    fn g_plus_matches_direct_reevaluation() {
        let p = with_gammas(2.0, 1.6);
        let c = nonlinear_coefficients(0.05, -0.03, &p).unwrap();
        let a = closure_state(1.05, 0.97, &p).unwrap();
        let e = closure_state(1.0, 1.0, &p).unwrap();
        let direct = a.c2 * a.rho_minus / a.rho_plus - e.c2 * e.rho_minus / e.rho_plus;
        assert!((c.g_plus - direct).abs() < 1e-8);
        // First-order consistency against a finite-difference directional derivative.
        let fd = |h: f64| {
            let s = closure_state(1.0 + 0.05 * h, 1.0 - 0.03 * h, &p).unwrap();
            s.c2 * s.rho_minus / s.rho_plus
        };
        let h = 1e-6;
        let deriv = (fd(h) - fd(-h)) / (2.0 * h);
        let small = nonlinear_coefficients(0.05 * 1e-4, -0.03 * 1e-4, &p).unwrap().g_plus / 1e-4;
        assert!((small - deriv).abs() < 1e-4 * deriv.abs().max(1.0));
    }

    #[test]
    fn h_and_k_are_volume_fraction_gradients() {
        // (1/R+) grad alpha+ and (1/R-) grad alpha- = -(1/R-) grad alpha+.
        let p = FluidParams { gamma_plus: 1.7, gamma_minus: 2.4, ..FluidParams::symmetric() };
        let (np, nm) = (0.04, -0.02);
        let c = nonlinear_coefficients(np, nm, &p).unwrap();
        let alpha = |a: f64, b: f64| closure_state(a, b, &p).unwrap().alpha_plus;
        let (rp, rm, h) = (1.0 + np, 1.0 + nm, 1e-6);
        let da_drp = (alpha(rp + h, rm) - alpha(rp - h, rm)) / (2.0 * h);
        let da_drm = (alpha(rp, rm + h) - alpha(rp, rm - h)) / (2.0 * h);
        assert!((c.h_plus - da_drp / rp).abs() < 1e-8);
        assert!((c.k_plus - da_drm / rp).abs() < 1e-8);
        assert!((c.h_minus + da_drp / rm).abs() < 1e-8);
        assert!((c.k_minus + da_drm / rm).abs() < 1e-8);
    }

    #[test]
    fn density_perturbation_examples() {
        let c = linear_coefficients(&FluidParams::symmetric()).unwrap();
        assert_eq!(linearized_density_perturbation(0.0, 0.0, &c), (0.0, 0.0));
        let (a, b) = linearized_density_perturbation(0.01, 0.01, &c);
        assert!((a - 0.02).abs() < 1e-15 && (b - 0.02).abs() < 1e-15);
        let p = with_gammas(1.5, 2.5);
        let c = linear_coefficients(&p).unwrap();
        let (a, b) = linearized_density_perturbation(c.beta_minus, -c.beta_plus, &c);
        assert!(a.abs() < 1e-15 && b.abs() < 1e-15);
        let (a, b) = linearized_density_perturbation(0.01, 0.02, &c);
        assert!((a / b - c.s2_minus / c.s2_plus).abs() < 1e-12);
    }

    #[test]
    fn density_perturbation_is_the_linearization() {
        let p = with_gammas(1.5, 2.5);
        let c = linear_coefficients(&p).unwrap();
        let eps = 1e-6;
        let (np, nm) = (0.3 * eps, -0.7 * eps);
        let s = closure_state(1.0 + np, 1.0 + nm, &p).unwrap();
        let (a, b) = linearized_density_perturbation(np, nm, &c);
        assert!((s.rho_plus - c.rhobar_plus - a).abs() < 1e-10);
        assert!((s.rho_minus - c.rhobar_minus - b).abs() < 1e-10);
    }

    #[test]
    fn invalid_params_listed() {
        let p = FluidParams { lambda_plus: -1.0, sigma_minus: 0.0, ..FluidParams::symmetric() };
        let v = p.violations();
        assert_eq!(v.len(), 2);
        assert!(v[0].contains("2 mu+ + 3 lambda+ >= 0"));
    }
}
