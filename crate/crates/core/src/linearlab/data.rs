//! Radially symmetric initial spectra.

use serde::{Deserialize, Serialize};

use super::quadrature::radial_norm;
use crate::error::{Error, Result};
use crate::spectral::FrequencyCutoff;

/// Derivative order `l` used for the data-size surrogate.
pub const ELL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RadialProfile {
    Zero,
    /// `amplitude * exp(-r^2 / (2 width^2))`
    Gaussian {
        amplitude: f64,
        width: f64,
    },
    /// `(c0 - r^s) chi(r)` with the smooth cutoff `chi` of radius `eta`.
    LowerBound {
        c0: f64,
        s: f64,
        eta: f64,
    },
}

impl RadialProfile {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            RadialProfile::Zero => 0.0,
            RadialProfile::Gaussian { amplitude, width } => amplitude * (-r * r / (2.0 * width * width)).exp(),
            RadialProfile::LowerBound { c0, s, eta } => (c0 - r.powf(s)) * FrequencyCutoff::new(eta).weight(r),
        }
    }

    /// Radius beyond which the profile is below `1e-16` of its peak.
    pub fn support_radius(&self) -> f64 {
        match *self {
            RadialProfile::Zero => 0.0,
            RadialProfile::Gaussian { width, .. } => width * (2.0 * 16.0 * std::f64::consts::LN_10).sqrt(),
            RadialProfile::LowerBound { eta, .. } => eta,
        }
    }

    fn scaled(&self, f: f64) -> Self {
        match *self {
            RadialProfile::Gaussian { amplitude, width } => RadialProfile::Gaussian { amplitude: amplitude * f, width },
            RadialProfile::LowerBound { c0, s, eta } => RadialProfile::LowerBound { c0: c0 * f, s, eta },
            RadialProfile::Zero => RadialProfile::Zero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataKind {
    Generic,
    LowerBound,
}

/// Initial spectra of `(n+, phi+, n-, phi-)` plus the incompressible velocity parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfileData {
    pub kind: DataKind,
    /// `(n+, phi+, n-, phi-)`
    pub profiles: [RadialProfile; 4],
    pub incomp_plus: RadialProfile,
    pub incomp_minus: RadialProfile,
    pub c0: f64,
    pub s_exp: f64,
    pub theta: f64,
    pub k0: f64,
    pub eta: f64,
}

impl RadialProfileData {
    /// Compressible data at `r`, in state order.
    pub fn compressible(&self, r: f64) -> [f64; 4] {
        [self.profiles[0].eval(r), self.profiles[1].eval(r), self.profiles[2].eval(r), self.profiles[3].eval(r)]
    }

    pub fn incompressible(&self, r: f64) -> [f64; 2] {
        [self.incomp_plus.eval(r), self.incomp_minus.eval(r)]
    }

    pub fn support_radius(&self) -> f64 {
        self.profiles
            .iter()
            .chain([&self.incomp_plus, &self.incomp_minus])
            .map(|p| p.support_radius())
            .fold(0.0, f64::max)
    }

    fn all_profiles(&self) -> [RadialProfile; 6] {
        let p = self.profiles;
        [p[0], p[1], p[2], p[3], self.incomp_plus, self.incomp_minus]
    }
}

/// Unit-size shapes of the generic data; all components nonzero at the origin.
const GENERIC_SHAPES: [(f64, f64); 6] = [(0.2, 1.0), (0.8, 0.8), (-0.12, 1.2), (0.2, 0.9), (0.7, 1.0), (0.4, 1.1)];

/// Surrogate of `||.||_{L^1 cap H^(l+1)}`: per component, `sup |f^|` (a lower
/// bound for the `L^1` norm) plus the `H^(l+1)` norm, summed.
pub fn size_surrogate(profiles: &[RadialProfile]) -> Result<f64> {
    let mut total = 0.0;
    for p in profiles {
        if *p == RadialProfile::Zero {
            continue;
        }
        let rmax = p.support_radius();
        let sup = (0..=2000).map(|i| p.eval(rmax * i as f64 / 2000.0).abs()).fold(0.0, f64::max);
        let mut h2 = 0.0;
        for k in 0..=(ELL + 1) {
            let n = radial_norm(|r| p.eval(r), k, rmax)?;
            h2 += n * n;
        }
        total += sup + h2.sqrt();
    }
    Ok(total)
}

/// Gaussian spectra for all six components, scaled so the size surrogate equals `k0`.
pub fn make_generic_data(k0: f64, eta: f64) -> Result<RadialProfileData> {
    if !(k0 >= 0.0) || !k0.is_finite() {
        return Err(Error::Domain(format!("K0 must be nonnegative, got {k0}")));
    }
    let unit: Vec<RadialProfile> =
        GENERIC_SHAPES.iter().map(|&(amplitude, width)| RadialProfile::Gaussian { amplitude, width }).collect();
    let scale = k0 / size_surrogate(&unit)?;
    let p: Vec<RadialProfile> = unit.iter().map(|u| u.scaled(scale)).collect();
    let p = if k0 == 0.0 { vec![RadialProfile::Zero; 6] } else { p };
    Ok(RadialProfileData {
        kind: DataKind::Generic,
        profiles: [p[0], p[1], p[2], p[3]],
        incomp_plus: p[4],
        incomp_minus: p[5],
        c0: 0.0,
        s_exp: 0.0,
        theta: 0.0,
        k0,
        eta,
    })
}

/// Data whose only nonzero component is `phi-^ = (K0^theta - r^s) chi(r)`.
pub fn make_lower_bound_data(k0: f64, theta: f64, s_exp: f64, eta: f64) -> Result<RadialProfileData> {
    if !(theta < 2.0) || !theta.is_finite() {
        return Err(Error::Domain(format!("theta must be < 2, got {theta}")));
    }
    if !(s_exp > 0.0) || !s_exp.is_finite() {
        return Err(Error::Domain(format!("s must be > 0, got {s_exp}")));
    }
    if !(k0 > 0.0 && k0 < 1.0) {
        return Err(Error::Domain(format!("K0 must lie in (0, 1), got {k0}")));
    }
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("eta must be positive, got {eta}")));
    }
    let c0 = k0.powf(theta);
    Ok(RadialProfileData {
        kind: DataKind::LowerBound,
        profiles: [
            RadialProfile::Zero,
            RadialProfile::Zero,
            RadialProfile::Zero,
            RadialProfile::LowerBound { c0, s: s_exp, eta },
        ],
        incomp_plus: RadialProfile::Zero,
        incomp_minus: RadialProfile::Zero,
        c0,
        s_exp,
        theta,
        k0,
        eta,
    })
}

impl RadialProfileData {
    pub fn surrogate(&self) -> Result<f64> {
        size_surrogate(&self.all_profiles())
    }
}
