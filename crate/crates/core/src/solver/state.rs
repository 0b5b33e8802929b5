//! Field state, initial data and binary checkpoints.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::grid::{Grid, GridSpec};
use crate::closure::FluidParams;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TFCK";
const VERSION: u32 = 1;

/// Perturbation fields in spectral form (unnormalized forward transform).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub time: f64,
    pub n_plus: Vec<Complex64>,
    pub n_minus: Vec<Complex64>,
    /// One spectral array per component.
    pub u_plus: Vec<Vec<Complex64>>,
    pub u_minus: Vec<Vec<Complex64>>,
}

/// Physical twin of a [`FieldState`].
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalFields {
    pub n_plus: Vec<f64>,
    pub n_minus: Vec<f64>,
    pub u_plus: Vec<Vec<f64>>,
    pub u_minus: Vec<Vec<f64>>,
}

impl FieldState {
    pub fn zeros(grid: &Grid) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); grid.len()];
        Self {
            time: 0.0,
            n_plus: z.clone(),
            n_minus: z.clone(),
            u_plus: vec![z.clone(); grid.dim()],
            u_minus: vec![z; grid.dim()],
        }
    }

    pub fn from_physical(grid: &Grid, p: &PhysicalFields, time: f64) -> Self {
        Self {
            time,
            n_plus: grid.to_spectral(&p.n_plus),
            n_minus: grid.to_spectral(&p.n_minus),
            u_plus: p.u_plus.iter().map(|c| grid.to_spectral(c)).collect(),
            u_minus: p.u_minus.iter().map(|c| grid.to_spectral(c)).collect(),
        }
    }

    pub fn physical(&self, grid: &Grid) -> PhysicalFields {
        PhysicalFields {
            n_plus: grid.to_physical(&self.n_plus),
            n_minus: grid.to_physical(&self.n_minus),
            u_plus: self.u_plus.iter().map(|c| grid.to_physical(c)).collect(),
            u_minus: self.u_minus.iter().map(|c| grid.to_physical(c)).collect(),
        }
    }

    /// All spectral arrays in the order `n+, u+ (components), n-, u- (components)`.
    pub fn arrays(&self) -> Vec<&Vec<Complex64>> {
        let mut v = vec![&self.n_plus];
        v.extend(self.u_plus.iter());
        v.push(&self.n_minus);
        v.extend(self.u_minus.iter());
        v
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut Vec<Complex64>> {
        let mut v = vec![&mut self.n_plus];
        v.extend(self.u_plus.iter_mut());
        v.push(&mut self.n_minus);
        v.extend(self.u_minus.iter_mut());
        v
    }

    /// Spectral `l2` norm over all arrays.
    pub fn norm(&self) -> f64 {
        self.arrays().iter().flat_map(|a| a.iter()).map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Spectral `l2` distance.
    pub fn distance(&self, other: &FieldState) -> f64 {
        self.arrays()
            .iter()
            .zip(other.arrays())
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest violation of `f^(-k) = conj(f^(k))`, relative to the largest coefficient.
    pub fn hermitian_defect(&self, grid: &Grid) -> f64 {
        let n = grid.n();
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for a in self.arrays() {
            for (i, z) in a.iter().enumerate() {
                let p = grid.unflatten(i);
                let mut q = [0; 3];
                for ax in 0..grid.dim() {
                    q[ax] = (n - p[ax]) % n;
                }
                worst = worst.max((z - a[grid.flatten(q)].conj()).norm());
                scale = scale.max(z.norm());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldName {
    NPlus,
    NMinus,
    UPlus,
    UMinus,
}

/// Initial perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Zero,
    /// `amplitude cos(2 pi m . x / L)` in one field component.
    SingleMode {
        field: FieldName,
        #[serde(default)]
        component: usize,
        modes: Vec<i64>,
        amplitude: f64,
    },
    /// Centered Gaussian in `n+` (amplitude) and `n-` (minus half of it), fluid at rest.
    GaussianBump {
        amplitude: f64,
        width: f64,
    },
    /// Random Fourier coefficients with `|m|_inf <= max_mode` in every field,
    /// scaled so each field has sup norm `amplitude`.
    RandomBand {
        amplitude: f64,
        max_mode: u32,
        seed: u64,
    },
}

fn single_mode(grid: &Grid, modes: &[i64], amplitude: f64) -> Vec<f64> {
    let l = grid.spec.length;
    (0..grid.len())
        .map(|i| {
            let x = grid.position(i);
            let phase: f64 = (0..grid.dim()).map(|a| modes.get(a).copied().unwrap_or(0) as f64 * x[a]).sum();
            amplitude * (2.0 * std::f64::consts::PI * phase / l).cos()
        })
        .collect()
}

fn random_band(grid: &Grid, rng: &mut ChaCha8Rng, max_mode: u32, amplitude: f64) -> Vec<f64> {
    let mut c = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (i, z) in c.iter_mut().enumerate() {
        let m = grid.mode_vector(i);
        let inside = m.iter().all(|v| v.unsigned_abs() <= max_mode as u64);
        // Draw for every mode so the stream does not depend on max_mode.
        let (re, im): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if inside && m.iter().any(|v| *v != 0) {
            *z = Complex64::new(re, im);
        }
    }
    let f = grid.to_physical(&c);
    let sup = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if sup == 0.0 {
        return f;
    }
    f.into_iter().map(|v| v * amplitude / sup).collect()
}

/// Builds the initial state; spectra are Hermitian and dealiased except for
/// single modes, which are kept exact.
pub fn init_state(grid: &Grid, data: &InitialData) -> Result<FieldState> {
    let dim = grid.dim();
    let zero = vec![0.0; grid.len()];
    let mut p = PhysicalFields {
        n_plus: zero.clone(),
        n_minus: zero.clone(),
        u_plus: vec![zero.clone(); dim],
        u_minus: vec![zero; dim],
    };
    let mut dealias = true;
    match data {
        InitialData::Zero => {}
        InitialData::SingleMode { field, component, modes, amplitude } => {
            if modes.len() > dim || *component >= dim {
                return Err(Error::Domain(format!(
                    "single mode {modes:?} / component {component} does not fit dim {dim}"
                )));
            }
            if modes.iter().any(|m| 3 * m.unsigned_abs() >= grid.n() as u64) {
                return Err(Error::Domain(format!("mode {modes:?} outside the dealiased band")));
            }
            let f = single_mode(grid, modes, *amplitude);
            match field {
                FieldName::NPlus => p.n_plus = f,
                FieldName::NMinus => p.n_minus = f,
                FieldName::UPlus => p.u_plus[*component] = f,
                FieldName::UMinus => p.u_minus[*component] = f,
            }
            dealias = false;
        }
        InitialData::GaussianBump { amplitude, width } => {
            if !(*width > 0.0) {
                return Err(Error::Domain("bump width must be positive".into()));
            }
            let c = 0.5 * grid.spec.length;
            for i in 0..grid.len() {
                let x = grid.position(i);
                let r2: f64 = (0..dim).map(|a| (x[a] - c).powi(2)).sum();
                let g = amplitude * (-r2 / (2.0 * width * width)).exp();
                p.n_plus[i] = g;
                p.n_minus[i] = -0.5 * g;
            }
        }
        InitialData::RandomBand { amplitude, max_mode, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            p.n_plus = random_band(grid, &mut rng, *max_mode, *amplitude);
            p.n_minus = random_band(grid, &mut rng, *max_mode, *amplitude);
            for a in 0..dim {
                p.u_plus[a] = random_band(grid, &mut rng, *max_mode, *amplitude);
            }
            for a in 0..dim {
                p.u_minus[a] = random_band(grid, &mut rng, *max_mode, *amplitude);
            }
        }
    }
    let mut s = FieldState::from_physical(grid, &p, 0.0);
    if dealias {
        for a in s.arrays_mut() {
            grid.dealias(a);
        }
    }
    check_positivity(grid, &s)?;
    Ok(s)
}

/// `n + 1 > 0` for both phases.
pub fn check_positivity(grid: &Grid, s: &FieldState) -> Result<()> {
    for (name, f) in [("n+", &s.n_plus), ("n-", &s.n_minus)] {
        let phys = grid.to_physical(f);
        if let Some((i, v)) = phys.iter().enumerate().find(|(_, v)| !(**v > -1.0)) {
            return Err(Error::Domain(format!("{name} + 1 = {} <= 0 at {:?}", v + 1.0, grid.unflatten(i))));
        }
    }
    Ok(())
}

/// SHA-256 of the parameters in declaration order as little-endian `f64`.
pub fn params_hash(p: &FluidParams) -> [u8; 32] {
    let mut h = Sha256::new();
    for v in [
        p.mu_plus,
        p.mu_minus,
        p.lambda_plus,
        p.lambda_minus,
        p.sigma_plus,
        p.sigma_minus,
        p.gamma_plus,
        p.gamma_minus,
        p.rbar_plus,
        p.rbar_minus,
    ] {
        h.update(v.to_le_bytes());
    }
    h.finalize().into()
}

/// Checkpoint header.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointHeader {
    pub grid: GridSpec,
    pub params_hash: [u8; 32],
    pub time: f64,
}

/// Writes `TFCK`, version, dim, n, L, params hash, time, then the physical
/// arrays `n+, n-, u+ components, u- components` as little-endian `f64`.
pub fn write_checkpoint<W: Write>(mut w: W, grid: &Grid, params: &FluidParams, s: &FieldState) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    w.write_all(&(grid.n() as u64).to_le_bytes())?;
    w.write_all(&grid.spec.length.to_le_bytes())?;
    w.write_all(&params_hash(params))?;
    w.write_all(&s.time.to_le_bytes())?;
    let p = s.physical(grid);
    let arrays =
        std::iter::once(&p.n_plus).chain(std::iter::once(&p.n_minus)).chain(p.u_plus.iter()).chain(p.u_minus.iter());
    for a in arrays {
        let mut buf = Vec::with_capacity(8 * a.len());
        for v in a {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

fn read_exact<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(b)
}

/// Reads a checkpoint; the parameters must hash to the stored value.
pub fn read_checkpoint<R: Read>(mut r: R, params: &FluidParams) -> Result<(CheckpointHeader, Grid, FieldState)> {
    if &read_exact::<4, _>(&mut r)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_exact(&mut r)?);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let dim = u32::from_le_bytes(read_exact(&mut r)?) as usize;
    let n = u64::from_le_bytes(read_exact(&mut r)?) as usize;
    let length = f64::from_le_bytes(read_exact(&mut r)?);
    let hash: [u8; 32] = read_exact(&mut r)?;
    let time = f64::from_le_bytes(read_exact(&mut r)?);
    if hash != params_hash(params) {
        return Err(Error::Checkpoint("parameter hash mismatch".into()));
    }
    let spec = GridSpec { dim, n, length };
    let grid = Grid::new(spec).map_err(|e| Error::Checkpoint(format!("bad grid in header: {e}")))?;
    let mut read_array = || -> Result<Vec<f64>> {
        let mut buf = vec![0u8; 8 * grid.len()];
        r.read_exact(&mut buf).map_err(|e| Error::Checkpoint(format!("truncated field data: {e}")))?;
        Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    };
    let n_plus = read_array()?;
    let n_minus = read_array()?;
    let u_plus = (0..dim).map(|_| read_array()).collect::<Result<Vec<_>>>()?;
    let u_minus = (0..dim).map(|_| read_array()).collect::<Result<Vec<_>>>()?;
    let p = PhysicalFields { n_plus, n_minus, u_plus, u_minus };
    let state = FieldState::from_physical(&grid, &p, time);
    Ok((CheckpointHeader { grid: spec, params_hash: hash, time }, grid, state))
}
