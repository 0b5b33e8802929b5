//! Reference matrix exponential: Padé(13) with scaling and squaring (Higham 2005).

use nalgebra::Matrix4;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat4 = Matrix4<Complex64>;

const THETA13: f64 = 5.371_920_351_148_152;
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn one_norm(m: &CMat4) -> f64 {
    (0..4).map(|j| (0..4).map(|i| m[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// `exp(t M)`.
pub fn matrix_exp_oracle(m: &CMat4, t: f64) -> Result<CMat4> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) || !t.is_finite() {
        return Err(Error::Domain("matrix exponential of non-finite input".into()));
    }
    let a = m.map(|z| z * t);
    // Balance with powers of two: exp(D^-1 A D) = D^-1 exp(A) D, exactly.
    let d = balance(&a);
    let b = CMat4::from_fn(|i, j| a[(i, j)] * (d[j] / d[i]));
    let r = expm_core(&b)?;
    Ok(CMat4::from_fn(|i, j| r[(i, j)] * (d[i] / d[j])))
}

/// Parlett-Reinsch diagonal scaling in radix 2.
fn balance(a: &CMat4) -> [f64; 4] {
    let mut d = [1.0_f64; 4];
    let mut m = *a;
    for _ in 0..100 {
        let mut done = true;
        for i in 0..4 {
            let c: f64 = (0..4).filter(|&k| k != i).map(|k| m[(k, i)].norm()).sum();
            let r: f64 = (0..4).filter(|&k| k != i).map(|k| m[(i, k)].norm()).sum();
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let (mut cc, mut rr) = (c, r);
            while cc < rr / 2.0 {
                cc *= 2.0;
                rr /= 2.0;
                f *= 2.0;
            }
            while cc >= rr * 2.0 {
                cc /= 2.0;
                rr *= 2.0;
                f /= 2.0;
            }
            if (cc + rr) < 0.95 * (c + r) {
                done = false;
                d[i] *= f;
                for k in 0..4 {
                    m[(i, k)] /= f;
                    m[(k, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
    d
}

fn expm_core(a: &CMat4) -> Result<CMat4> {
    let a = *a;
    let norm = one_norm(&a);
    if norm > 1e15 {
        return Err(Error::ScaledNorm(norm));
    }
    if a * a == CMat4::zeros() {
        return Ok(CMat4::identity() + a);
    }
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a.map(|z| z / 2f64.powi(s));

    let id = CMat4::identity();
    let a2 = a * a;
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    let b = |k: usize| Complex64::new(B13[k], 0.0);
    let u_inner = a6 * (a6 * b(13) + a4 * b(11) + a2 * b(9)) + a6 * b(7) + a4 * b(5) + a2 * b(3) + id * b(1);
    let u = a * u_inner;
    let v = a6 * (a6 * b(12) + a4 * b(10) + a2 * b(8)) + a6 * b(6) + a4 * b(4) + a2 * b(2) + id * b(0);
    let p = v + u;
    let q = v - u;
    let mut r = q.lu().solve(&p).ok_or_else(|| Error::Accuracy("singular Padé denominator".into()))?;
    for _ in 0..s {
        r = r * r;
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ScaledNorm(norm));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn zero_gives_identity() {
        assert_eq!(matrix_exp_oracle(&CMat4::zeros(), 3.0).unwrap(), CMat4::identity());
    }

    #[test]
    fn diagonal() {
        let d = [0.3, -2.0, 5.0, -40.0];
        let m = CMat4::from_diagonal(&nalgebra::Vector4::from_iterator(d.iter().map(|&x| c(x))));
        let e = matrix_exp_oracle(&m, 0.7).unwrap();
        for i in 0..4 {
            let want = (0.7 * d[i]).exp();
            assert!((e[(i, i)].re - want).abs() <= 1e-12 * want, "{i}");
            for j in 0..4 {
                if i != j {
                    assert!(e[(i, j)].norm() < 1e-300);
                }
            }
        }
    }

    #[test]
    fn nilpotent_block() {
        let mut m = CMat4::zeros();
        m[(1, 2)] = c(3.0);
        let e = matrix_exp_oracle(&m, 2.0).unwrap();
        let mut want = CMat4::identity();
        want[(1, 2)] = c(6.0);
        assert_eq!(e, want);
    }

    #[test]
    fn rotation() {
        let mut m = CMat4::zeros();
        m[(0, 1)] = c(-1.0);
        m[(1, 0)] = c(1.0);
        let e = matrix_exp_oracle(&m, 10.0).unwrap();
        assert!((e[(0, 0)].re - 10f64.cos()).abs() < 1e-13);
        assert!((e[(1, 0)].re - 10f64.sin()).abs() < 1e-13);
    }

    #[test]
    fn extreme_norm_rejected() {
        let m = CMat4::identity();
        assert!(matches!(matrix_exp_oracle(&m, 1e20), Err(Error::ScaledNorm(_))));
    }
}
