//! Roots of real monic polynomials: scaled companion eigensolve, then Aberth polishing.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Horner evaluation of `p` and `p'` for `z^n + a[0] z^(n-1) + ... + a[n-1]`.
fn eval_with_derivative(a: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in a {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Value of the monic polynomial with lower coefficients `a` at `z`.
pub fn eval_monic(a: &[f64], z: Complex64) -> Complex64 {
    eval_with_derivative(a, z).0
}

/// All roots of `z^n + a[0] z^(n-1) + ... + a[n-1]`.
///
/// Complex roots come back as exact conjugate pairs; unpaired roots are real.
pub fn monic_roots(a: &[f64]) -> Vec<Complex64> {
    let n = a.len();
    if n == 0 {
        return Vec::new();
    }
    // z = s w turns the polynomial into one whose roots have modulus O(1).
    let s = a.iter().enumerate().map(|(k, c)| c.abs().powf(1.0 / (k as f64 + 1.0))).fold(0.0_f64, f64::max);
    if s == 0.0 {
        return vec![Complex64::new(0.0, 0.0); n];
    }
    let b: Vec<f64> = a.iter().enumerate().map(|(k, c)| c / s.powi(k as i32 + 1)).collect();

    let mut comp = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        comp[(0, j)] = -b[j];
    }
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    let mut z: Vec<Complex64> = comp.complex_eigenvalues().iter().copied().collect();
    aberth_polish(&b, &mut z);
    symmetrize_conjugates(&mut z);
    z.iter().map(|w| w * s).collect()
}

fn aberth_polish(b: &[f64], z: &mut [Complex64]) {
    let n = z.len();
    let start: Vec<Complex64> = z.to_vec();
    for _ in 0..60 {
        let mut converged = true;
        for i in 0..n {
            let (p, dp) = eval_with_derivative(b, z[i]);
            if p == Complex64::new(0.0, 0.0) || dp == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = p / dp;
            let mut sum = Complex64::new(0.0, 0.0);
            for j in 0..n {
                let d = z[i] - z[j];
                if j != i && d != Complex64::new(0.0, 0.0) {
                    sum += 1.0 / d;
                }
            }
            let step = ratio / (1.0 - ratio * sum);
            if step.re.is_finite() && step.im.is_finite() {
                z[i] -= step;
                if step.norm() > 2.0 * f64::EPSILON * z[i].norm() {
                    converged = false;
                }
            }
        }
        if converged {
            break;
        }
    }
    for i in 0..n {
        let new_res = eval_monic(b, z[i]).norm();
        let old_res = eval_monic(b, start[i]).norm();
        if !(new_res <= old_res) {
            z[i] = start[i];
        }
    }
}

fn symmetrize_conjugates(z: &mut [Complex64]) {
    let n = z.len();
    let mut paired = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| z[j].im.abs().total_cmp(&z[i].im.abs()));
    for &i in &order {
        if paired[i] || z[i].im <= 0.0 {
            continue;
        }
        let target = z[i].conj();
        let best = (0..n)
            .filter(|&j| j != i && !paired[j] && z[j].im <= 0.0)
            .min_by(|&a, &b| (z[a] - target).norm().total_cmp(&(z[b] - target).norm()));
        if let Some(j) = best {
            let scale = z[i].norm().max(f64::MIN_POSITIVE);
            if (z[j] - target).norm() <= 1e-6 * scale {
                let m = 0.5 * (z[i] + z[j].conj());
                z[i] = m;
                z[j] = m.conj();
                paired[i] = true;
                paired[j] = true;
            }
        }
    }
    for i in 0..n {
        if !paired[i] {
            z[i].im = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn known_roots() {
        // (z-1)(z-2)(z+3)(z-4) = z^4 - 4z^3 - 7z^2 + 34z - 24
        let r = sorted_re(monic_roots(&[-4.0, -7.0, 34.0, -24.0]));
        for (got, want) in r.iter().zip([-3.0, 1.0, 2.0, 4.0]) {
            assert!((got - Complex64::new(want, 0.0)).norm() < 1e-13);
        }
        // z^2 + 1
        let r = sorted_re(monic_roots(&[0.0, 1.0]));
        assert!((r[0] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert!((r[1] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn widely_scaled_roots() {
        // roots 1e-8 and 1e4
        let r = sorted_re(monic_roots(&[-(1e4 + 1e-8), 1e-4]));
        assert!((r[0].re - 1e-8).abs() < 1e-20);
        assert!((r[1].re - 1e4).abs() < 1e-10);
    }

    #[test]
    fn zero_polynomial() {
        assert!(monic_roots(&[0.0, 0.0, 0.0]).iter().all(|z| z.norm() == 0.0));
    }
}
