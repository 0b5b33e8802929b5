//! Per-frequency Green matrix of the linearized compressible subsystem,
//! its spectrum, the semigroup `exp(t A1)` in projector form, and filters.
//!
//! State order per mode is `(n+, phi+, n-, phi-)` where `phi = Lambda^-1 div u`.

pub mod cutoff;
pub mod expm;
pub mod poly;

use std::io::Write;

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::closure::LinearCoefficients;
use crate::error::{Error, Result};

pub use cutoff::{frequency_split, FrequencyCutoff};
pub use expm::{matrix_exp_oracle, CMat4};

pub type RMat4 = Matrix4<f64>;

/// Relative eigenvalue gap below which the Jordan formulas are used.
///
/// A double root of a quartic with rounded coefficients is resolved only to
/// about `sqrt(eps)` relative, so thresholds near `1e-8` classify exactly
/// confluent modes at random.
pub const CONFLUENCE_THRESHOLD: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct ModeSystem {
    pub xi: f64,
    pub a1: RMat4,
    pub coeffs: LinearCoefficients,
}

impl ModeSystem {
    pub fn a1_complex(&self) -> CMat4 {
        self.a1.map(|x| Complex64::new(x, 0.0))
    }
}

pub fn build_mode_system(xi: f64, coeffs: &LinearCoefficients) -> ModeSystem {
    let c = coeffs;
    let (x, x2, x3) = (xi, xi * xi, xi * xi * xi);
    #[rustfmt::skip]
    let a1 = RMat4::new(
        0.0,                              -x,                 0.0,                               0.0,
        c.beta1 * x + c.sigma_plus * x3,  -c.nu_plus * x2,    c.beta2 * x,                       0.0,
        0.0,                              0.0,                0.0,                               -x,
        c.beta3 * x,                      0.0,                c.beta4 * x + c.sigma_minus * x3,  -c.nu_minus * x2,
    );
    ModeSystem { xi, a1, coeffs: *coeffs }
}

/// `(c3, c2, c1, c0)` of `det(lambda I - A1) = lambda^4 + c3 lambda^3 + c2 lambda^2 + c1 lambda + c0`.
///
/// Written with `beta1 beta4 = beta2 beta3` already applied, so no cancellation
/// of `O(xi^4)` terms happens at small `xi`.
pub fn characteristic_coeffs(mode: &ModeSystem) -> [f64; 4] {
    let c = &mode.coeffs;
    let x2 = mode.xi * mode.xi;
    let x4 = x2 * x2;
    let x6 = x4 * x2;
    let x8 = x4 * x4;
    let (sp, sm) = (c.sigma_plus, c.sigma_minus);
    [
        (c.nu_plus + c.nu_minus) * x2,
        (c.beta1 + c.beta4) * x2 + (sp + sm + c.nu_plus * c.nu_minus) * x4,
        (c.beta1 * c.nu_minus + c.beta4 * c.nu_plus) * x4 + (c.nu_plus * sm + c.nu_minus * sp) * x6,
        (c.beta1 * sm + c.beta4 * sp) * x6 + sp * sm * x8,
    ]
}

/// Ordered eigenvalues; `ambiguous` marks the magnitude-sort fallback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenSet {
    pub values: [Complex64; 4],
    pub ambiguous: bool,
}

/// `lambda1/lambda2`: the conjugate pair with the largest imaginary part
/// (`lambda1` above the axis). `lambda3/lambda4`: the rest by real part,
/// then imaginary part, descending.
fn order_eigenvalues(mut r: Vec<Complex64>) -> EigenSet {
    let top = (0..r.len()).filter(|&i| r[i].im > 0.0).max_by(|&a, &b| r[a].im.total_cmp(&r[b].im));
    let Some(i1) = top else {
        r.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)));
        return EigenSet { values: [r[0], r[1], r[2], r[3]], ambiguous: true };
    };
    let l1 = r.remove(i1);
    let i2 = r.iter().position(|z| *z == l1.conj()).expect("conjugate partner");
    let l2 = r.remove(i2);
    r.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    EigenSet { values: [l1, l2, r[0], r[1]], ambiguous: false }
}

pub fn eigenvalues_exact(mode: &ModeSystem) -> EigenSet {
    let roots = poly::monic_roots(&characteristic_coeffs(mode));
    order_eigenvalues(roots)
}

/// `R`, `lambda~3`, `lambda~4` of the small-frequency diffusive pair
/// `lambda3,4 ~ lambda~3,4 xi^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusiveAsymptotics {
    /// `R^2`, real.
    pub r_squared: f64,
    /// `R`, real or purely imaginary.
    pub r: Complex64,
    pub lambda_tilde3: Complex64,
    pub lambda_tilde4: Complex64,
}

pub fn diffusive_asymptotics(c: &LinearCoefficients) -> DiffusiveAsymptotics {
    let s = c.beta1 + c.beta4;
    let b = c.beta1 * c.nu_minus + c.beta4 * c.nu_plus;
    let q = c.beta1 * c.sigma_minus + c.beta4 * c.sigma_plus;
    let r_squared = b * b - 4.0 * s * q;
    let r =
        if r_squared >= 0.0 { Complex64::new(r_squared.sqrt(), 0.0) } else { Complex64::new(0.0, (-r_squared).sqrt()) };
    DiffusiveAsymptotics {
        r_squared,
        r,
        lambda_tilde3: (Complex64::new(-b, 0.0) + r) / (2.0 * s),
        lambda_tilde4: (Complex64::new(-b, 0.0) - r) / (2.0 * s),
    }
}

/// Leading-order eigenvalues for small `xi`, in the ordering of [`eigenvalues_exact`].
pub fn eigenvalues_asymptotic(xi: f64, c: &LinearCoefficients) -> [Complex64; 4] {
    let s = c.beta1 + c.beta4;
    let damp = -(c.beta1 * c.nu_plus + c.beta4 * c.nu_minus) / (2.0 * s) * xi * xi;
    let freq = s.sqrt() * xi;
    let d = diffusive_asymptotics(c);
    let x2 = xi * xi;
    [Complex64::new(damp, freq), Complex64::new(damp, -freq), d.lambda_tilde3 * x2, d.lambda_tilde4 * x2]
}

/// Low-frequency damping constant `nu_bar`.
///
/// At `R = 0` both definitions give `(beta1 nu- + beta4 nu+) / (2 (beta1 + beta4))`.
pub fn nu_bar(c: &LinearCoefficients) -> f64 {
    let s = c.beta1 + c.beta4;
    let acoustic = (c.beta1 * c.nu_plus + c.beta4 * c.nu_minus) / (2.0 * s);
    let d = diffusive_asymptotics(c);
    let diffusive =
        if d.r_squared >= 0.0 { -d.lambda_tilde3.re } else { (c.beta1 * c.nu_minus + c.beta4 * c.nu_plus) / (2.0 * s) };
    acoustic.min(diffusive)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Distinct,
    Confluent,
}

/// Relative residuals of the projector identities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ProjectorResiduals {
    pub idempotence: f64,
    pub annihilation: f64,
    pub identity: f64,
    pub reconstruction: f64,
}

impl ProjectorResiduals {
    pub fn max(&self) -> f64 {
        self.idempotence.max(self.annihilation).max(self.identity).max(self.reconstruction)
    }
}

/// `exp(t A1) = sum_i e^(lambda_i t) P_i`, plus `t e^(lambda3 t) P4` when confluent.
///
/// In the confluent branch `lambda3 = lambda4` is the pair midpoint, `P3` is the
/// spectral projector of the double eigenvalue and `P4 = (A1 - lambda3) P3` its
/// nilpotent part.
///
/// Evaluation treats the `lambda3/lambda4` pair through its midpoint and
/// half-gap, `e^(m t) [cosh(delta t) E + t sinhc(delta t) N]`. This equals
/// `e^(lambda3 t) P3 + e^(lambda4 t) P4` and stays accurate as the gap closes.
#[derive(Debug, Clone)]
pub struct SemigroupDecomposition {
    pub xi: f64,
    pub branch: Branch,
    pub eigenvalues: [Complex64; 4],
    pub projectors: [CMat4; 4],
    pub discriminant_r: Complex64,
    pub lambda_tilde3: Complex64,
    pub lambda_tilde4: Complex64,
    pub ambiguous_order: bool,
    a1: CMat4,
    /// Midpoint `m` and squared half-gap `delta^2` of the `lambda3/lambda4` pair.
    pair_mid: Complex64,
    pair_delta_sq: Complex64,
    /// Spectral projector of the pair, `E = I - P1 - P2`, and `N = (A1 - m) E`.
    pair_projector: CMat4,
    pair_nilpotent: CMat4,
}

fn frob(m: &CMat4) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn shifted(lambda: Complex64, a: &CMat4) -> CMat4 {
    CMat4::identity() * lambda - a
}

pub fn semigroup_decomposition(mode: &ModeSystem) -> Result<SemigroupDecomposition> {
    semigroup_decomposition_with(mode, CONFLUENCE_THRESHOLD)
}

/// As [`semigroup_decomposition`] with an explicit confluence threshold.
pub fn semigroup_decomposition_with(mode: &ModeSystem, threshold: f64) -> Result<SemigroupDecomposition> {
    if !(mode.xi > 0.0) || !mode.xi.is_finite() {
        return Err(Error::Domain(format!("semigroup decomposition needs xi > 0, got {}", mode.xi)));
    }
    let eig = eigenvalues_exact(mode);
    let coef = characteristic_coeffs(mode);
    let (l1, l2) = (eig.values[0], eig.values[1]);
    // The pair from trace and determinant identities: both well conditioned,
    // unlike the individual roots near a double root.
    let m = -(coef[0] + l1 + l2) / 2.0;
    let prod = Complex64::new(coef[3], 0.0) / (l1 * l2);
    let delta_sq = m * m - prod;
    let delta = delta_sq.sqrt();
    let (mut l3, mut l4) = (m + delta, m - delta);
    if l4.re > l3.re || (l4.re == l3.re && l4.im > l3.im) {
        std::mem::swap(&mut l3, &mut l4);
    }
    let l = [l1, l2, l3, l4];
    let a = mode.a1_complex();
    let scale = l.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let gap = |i: usize, j: usize| (l[i] - l[j]).norm() / scale;

    let mut cross = f64::INFINITY;
    for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)] {
        cross = cross.min(gap(i, j));
    }
    if cross <= threshold {
        return Err(Error::UnsupportedDegeneracy { xi: mode.xi, gap: cross });
    }

    let confluent = gap(2, 3) <= threshold;
    let (m, delta_sq) =
        if confluent { (refine_double_root(&coef, m), Complex64::new(0.0, 0.0)) } else { (m, delta_sq) };
    let id = CMat4::identity();
    let sm = shifted(m, &a);
    // (lambda3 I - A)(lambda4 I - A) and its scalar analogue at lambda1, lambda2.
    let pair_poly = sm * sm - id * delta_sq;
    let pair_at = |z: Complex64| (m - z) * (m - z) - delta_sq;
    let p1 = shifted(l2, &a) * pair_poly / ((l2 - l1) * pair_at(l1));
    let p2 = shifted(l1, &a) * pair_poly / ((l1 - l2) * pair_at(l2));
    let e = id - p1 - p2;
    let n = (a - id * m) * e;
    let d = diffusive_asymptotics(&mode.coeffs);
    let (branch, eigenvalues, projectors) = if confluent {
        (Branch::Confluent, [l1, l2, m, m], [p1, p2, e, n])
    } else {
        let two_delta = l3 - l4;
        let half = (l3 - l4) / 2.0;
        let p3 = (n + e * half) / two_delta;
        let p4 = (e * half - n) / two_delta;
        (Branch::Distinct, l, [p1, p2, p3, p4])
    };
    Ok(SemigroupDecomposition {
        xi: mode.xi,
        branch,
        eigenvalues,
        projectors,
        discriminant_r: d.r,
        lambda_tilde3: d.lambda_tilde3,
        lambda_tilde4: d.lambda_tilde4,
        ambiguous_order: eig.ambiguous,
        a1: a,
        pair_mid: m,
        pair_delta_sq: delta_sq,
        pair_projector: e,
        pair_nilpotent: n,
    })
}

/// Newton on `p'` from the pair midpoint: a double root of `p` is a simple
/// root of `p'`, so it is well conditioned there.
fn refine_double_root(c: &[f64; 4], start: Complex64) -> Complex64 {
    let d1 = |z: Complex64| ((4.0 * z + 3.0 * c[0]) * z + 2.0 * c[1]) * z + c[2];
    let d2 = |z: Complex64| (12.0 * z + 6.0 * c[0]) * z + 2.0 * c[1];
    let mut z = start;
    for _ in 0..8 {
        let h = d2(z);
        if h.norm() == 0.0 {
            break;
        }
        let step = d1(z) / h;
        if !(step.norm() < 1e-3 * start.norm().max(f64::MIN_POSITIVE)) {
            break;
        }
        z -= step;
        if step.norm() <= f64::EPSILON * z.norm() {
            break;
        }
    }
    z
}

impl SemigroupDecomposition {
    pub fn eval(&self, t: f64) -> CMat4 {
        let p = &self.projectors;
        let e = |l: Complex64| (l * t).exp();
        let (a, b) = self.pair_weights(t);
        p[0] * e(self.eigenvalues[0])
            + p[1] * e(self.eigenvalues[1])
            + self.pair_projector * a
            + self.pair_nilpotent * b
    }

    /// Coefficients `(a, b)` of `E` and `N` in the pair part of `exp(t A1)`.
    fn pair_weights(&self, t: f64) -> (Complex64, Complex64) {
        let z2 = self.pair_delta_sq * (t * t);
        if z2.norm() < 1.0 {
            let em = (self.pair_mid * t).exp();
            // cosh z and sinh z / z as even series in z^2.
            let mut cosh = Complex64::new(1.0, 0.0);
            let mut sinhc = Complex64::new(1.0, 0.0);
            let mut term_c = Complex64::new(1.0, 0.0);
            let mut term_s = Complex64::new(1.0, 0.0);
            for k in 1..=12 {
                let kf = k as f64;
                term_c = term_c * z2 / ((2.0 * kf - 1.0) * (2.0 * kf));
                term_s = term_s * z2 / ((2.0 * kf) * (2.0 * kf + 1.0));
                cosh += term_c;
                sinhc += term_s;
            }
            (em * cosh, em * sinhc * t)
        } else {
            let delta = self.pair_delta_sq.sqrt();
            let e3 = ((self.pair_mid + delta) * t).exp();
            let e4 = ((self.pair_mid - delta) * t).exp();
            ((e3 + e4) / 2.0, (e3 - e4) / (2.0 * delta))
        }
    }

    pub fn a1(&self) -> &CMat4 {
        &self.a1
    }

    /// Relative residuals: `|Pi Pj - delta_ij Pi| / (|Pi| |Pj|)`,
    /// `|sum P - I| / max |P|`, `|sum lambda P - A| / max |lambda| |P|`.
    pub fn residuals(&self) -> ProjectorResiduals {
        let p = &self.projectors;
        let n = match self.branch {
            Branch::Distinct => 4,
            Branch::Confluent => 3,
        };
        let norms: Vec<f64> = p.iter().map(frob).collect();
        let mut r = ProjectorResiduals::default();
        for i in 0..n {
            for j in 0..n {
                let prod = p[i] * p[j];
                let scale = norms[i] * norms[j];
                if i == j {
                    r.idempotence = r.idempotence.max(frob(&(prod - p[i])) / scale);
                } else {
                    r.annihilation = r.annihilation.max(frob(&prod) / scale);
                }
            }
        }
        let sum: CMat4 = (0..n).fold(CMat4::zeros(), |acc, i| acc + p[i]);
        let pmax = norms[..n].iter().copied().fold(0.0, f64::max);
        r.identity = frob(&(sum - CMat4::identity())) / pmax;
        let mut recon = CMat4::zeros();
        let mut rscale = 0.0_f64;
        for i in 0..n {
            recon += p[i] * self.eigenvalues[i];
            rscale = rscale.max(self.eigenvalues[i].norm() * norms[i]);
        }
        if self.branch == Branch::Confluent {
            recon += p[3];
            rscale = rscale.max(norms[3]);
        }
        r.reconstruction = frob(&(recon - self.a1)) / rscale;
        r
    }
}

pub fn semigroup_eval(decomp: &SemigroupDecomposition, t: f64) -> CMat4 {
    decomp.eval(t)
}

/// `exp(-nu1 xi^2 t)`, the symbol of the incompressible heat flow.
pub fn heat_factor(xi: f64, nu1: f64, t: f64) -> f64 {
    (-nu1 * xi * xi * t).exp()
}

/// Largest `eta <= 1` such that every asymptotic eigenvalue is within 10%
/// relative error of the exact one on `(0, eta]`.
pub fn select_eta(c: &LinearCoefficients) -> Result<f64> {
    let n = 400;
    let (lo, hi) = (1e-4_f64, 1.0_f64);
    let mut best = None;
    for i in 0..n {
        let r = lo * (hi / lo).powf(i as f64 / (n - 1) as f64);
        let ex = eigenvalues_exact(&build_mode_system(r, c));
        if ex.ambiguous {
            break;
        }
        let asy = eigenvalues_asymptotic(r, c);
        let err = (0..4).map(|k| (ex.values[k] - asy[k]).norm() / ex.values[k].norm()).fold(0.0, f64::max);
        if err >= 0.1 {
            break;
        }
        best = Some(r);
    }
    best.ok_or_else(|| Error::Accuracy("small-frequency expansion inaccurate even at xi = 1e-4".into()))
}

/// `sigma-` that makes `R = 0` with the other coefficients fixed.
pub fn r_zero_sigma_minus(c: &LinearCoefficients) -> Result<f64> {
    let s = c.beta1 + c.beta4;
    let b = c.beta1 * c.nu_minus + c.beta4 * c.nu_plus;
    let sm = (b * b / (4.0 * s) - c.beta4 * c.sigma_plus) / c.beta1;
    if sm > 0.0 {
        Ok(sm)
    } else {
        Err(Error::Domain(format!("R = 0 needs sigma- = {sm} <= 0; lower sigma+")))
    }
}

/// `sigma-` that makes `lambda3 = lambda4` exactly at frequency `xi`.
///
/// The characteristic polynomial is affine in `sigma-`: `p = p0 + sigma- q`.
/// A double root `m` solves `p0' q - p0 q' = 0`, and then `sigma- = -p0(m)/q(m)`.
pub fn confluent_sigma_minus(c: &LinearCoefficients, xi: f64) -> Result<f64> {
    let x2 = xi * xi;
    let (x4, x6, x8) = (x2 * x2, x2 * x2 * x2, x2 * x2 * x2 * x2);
    let (np, nm, sp) = (c.nu_plus, c.nu_minus, c.sigma_plus);
    // descending coefficients
    let p0 = [
        1.0,
        (np + nm) * x2,
        (c.beta1 + c.beta4) * x2 + (sp + np * nm) * x4,
        (c.beta1 * nm + c.beta4 * np) * x4 + nm * sp * x6,
        c.beta4 * sp * x6,
    ];
    let q = [x4, np * x6, c.beta1 * x6 + sp * x8];
    let dp0 = [4.0 * p0[0], 3.0 * p0[1], 2.0 * p0[2], p0[3]];
    let dq = [2.0 * q[0], q[1]];
    let mut w = [0.0; 6];
    for (i, a) in dp0.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            w[i + j] += a * b;
        }
    }
    for (i, a) in p0.iter().enumerate() {
        for (j, b) in dq.iter().enumerate() {
            w[i + j] -= a * b;
        }
    }
    let lead = w[0];
    let monic: Vec<f64> = w[1..].iter().map(|x| x / lead).collect();
    let horner = |coef: &[f64], z: f64| coef.iter().fold(0.0, |acc, &a| acc * z + a);
    let mut candidates: Vec<f64> = poly::monic_roots(&monic)
        .into_iter()
        .filter(|z| z.im == 0.0 && z.re < 0.0)
        .map(|z| -horner(&p0, z.re) / horner(&q, z.re))
        .filter(|s| *s > 0.0 && s.is_finite())
        .collect();
    candidates.sort_by(|a, b| (a - c.sigma_minus).abs().total_cmp(&(b - c.sigma_minus).abs()));
    for sm in candidates {
        let tuned = LinearCoefficients { sigma_minus: sm, ..*c };
        let eig = eigenvalues_exact(&build_mode_system(xi, &tuned));
        let l = eig.values;
        let scale = l.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !eig.ambiguous && (l[2] - l[3]).norm() <= 1e-6 * scale && (l[0] - l[2]).norm() > 1e-3 * scale {
            return Ok(sm);
        }
    }
    Err(Error::Domain(format!("no positive sigma- makes the diffusive pair confluent at xi = {xi}")))
}

/// One row of the mode-analysis dump.
#[derive(Debug, Clone)]
pub struct ModeRecord {
    pub xi: f64,
    pub eigenvalues: [Complex64; 4],
    pub branch: Branch,
    pub ambiguous: bool,
    pub max_residual: f64,
}

pub fn analyze_modes(c: &LinearCoefficients, xis: &[f64]) -> Result<Vec<ModeRecord>> {
    xis.iter()
        .map(|&xi| {
            let d = semigroup_decomposition(&build_mode_system(xi, c))?;
            Ok(ModeRecord {
                xi,
                eigenvalues: d.eigenvalues,
                branch: d.branch,
                ambiguous: d.ambiguous_order,
                max_residual: d.residuals().max(),
            })
        })
        .collect()
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

pub fn write_mode_csv<W: Write>(w: W, records: &[ModeRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "xi",
        "re1",
        "im1",
        "re2",
        "im2",
        "re3",
        "im3",
        "re4",
        "im4",
        "branch",
        "ambiguous",
        "max_residual",
    ])?;
    for r in records {
        let mut row = vec![format!("{:e}", r.xi)];
        for l in &r.eigenvalues {
            row.push(format!("{:e}", l.re));
            row.push(format!("{:e}", l.im));
        }
        row.push(match r.branch {
            Branch::Distinct => "distinct".into(),
            Branch::Confluent => "confluent".into(),
        });
        row.push(r.ambiguous.to_string());
        row.push(format!("{:e}", r.max_residual));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
