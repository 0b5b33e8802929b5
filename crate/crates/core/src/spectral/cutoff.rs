use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Smooth radial low-pass symbol: 1 on `r <= eta/2`, 0 on `r >= eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyCutoff {
    pub eta: f64,
}

fn bump(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

impl FrequencyCutoff {
    pub fn new(eta: f64) -> Self {
        assert!(eta > 0.0, "cutoff radius must be positive");
        Self { eta }
    }

    /// The symbol at radius `r`.
    pub fn weight(&self, r: f64) -> f64 {
        let half = 0.5 * self.eta;
        if r <= half {
            1.0
        } else if r >= self.eta {
            0.0
        } else {
            // Normalize to the unit interval so the transition shape is scale-free.
            let x = (r - half) / half;
            let a = bump(1.0 - x);
            a / (a + bump(x))
        }
    }

    /// `(phi f, (1 - phi) f)` for a field given at radii `r`.
    pub fn split(&self, field: &[Complex64], radii: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        assert_eq!(field.len(), radii.len());
        let mut low = Vec::with_capacity(field.len());
        let mut high = Vec::with_capacity(field.len());
        for (f, &r) in field.iter().zip(radii) {
            let w = self.weight(r);
            let l = f * w;
            low.push(l);
            high.push(f - l);
        }
        (low, high)
    }
}

/// Spectral low/high split of a field sampled at radii `radii`.
pub fn frequency_split(
    field: &[Complex64],
    radii: &[f64],
    cutoff: &FrequencyCutoff,
) -> (Vec<Complex64>, Vec<Complex64>) {
    cutoff.split(field, radii)
}
