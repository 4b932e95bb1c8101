//! Trace-class Wiener increments on the divergence-free Fourier basis and
//! the diffusion families acting on them.
//!
//! The basis is `ẽ_k = (2π)^-1 (k⊥/|k|) e^{ik·x}`, orthonormal in `L²(T²)`.
//! One complex Brownian motion drives each half-lattice representative; the
//! mirrored mode carries the conjugate so that the increment is real.

use num_complex::Complex64;
use thiserror::Error;

use crate::ops::{biot_savart, curl2d, leray_project};
use crate::spectral_field::{
    dealiased_pointwise_product, FieldError, Mode, SpectralField, WavenumberLattice,
};
use crate::stream::{derive_seed, mode_stream, GaussianStream};

const NOISE_TAG: u64 = 0x006e_6f69_7365;

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("covariance decay gamma = {0} must exceed 2 for a finite trace")]
    Decay(f64),
    #[error("covariance table entry {index} = {value} is not a finite non-negative number")]
    TableEntry { index: usize, value: f64 },
    #[error("diffusion strength sigma = {0} must be finite and non-negative")]
    Strength(f64),
    #[error("saturation radius R0 = {0} must be positive")]
    Radius(f64),
    #[error("refinement factor must be at least 1")]
    Refinement,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Eigenvalues `q_k` of the covariance, diagonal in the Fourier basis.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceSpectrum {
    /// `q_k = |k|^-gamma`.
    PowerLaw { gamma: f64 },
    /// Radial table: `q_k = values[s - 1]` on the shell `s = round(|k|)`,
    /// zero beyond the table.
    Shells(Vec<f64>),
}

impl CovarianceSpectrum {
    pub fn power_law(gamma: f64) -> Result<Self, NoiseError> {
        if !(gamma > 2.0 && gamma.is_finite()) {
            return Err(NoiseError::Decay(gamma));
        }
        Ok(CovarianceSpectrum::PowerLaw { gamma })
    }

    pub fn shells(values: Vec<f64>) -> Result<Self, NoiseError> {
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(NoiseError::TableEntry { index, value });
        }
        Ok(CovarianceSpectrum::Shells(values))
    }

    pub fn q(&self, k: Mode) -> f64 {
        match self {
            CovarianceSpectrum::PowerLaw { gamma } => k.norm_sq().powf(-gamma / 2.0),
            CovarianceSpectrum::Shells(values) => {
                let s = k.norm().round() as usize;
                values.get(s.wrapping_sub(1)).copied().unwrap_or(0.0)
            }
        }
    }

    /// `Σ q_k` over the lattice.
    pub fn trace(&self, lattice: WavenumberLattice) -> f64 {
        lattice.modes().map(|k| self.q(k)).sum()
    }
}

/// Diffusion operators `G(u)` with explicit Lipschitz and growth constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffusionFamily {
    /// `G(u) w = σ w`.
    Additive { sigma: f64 },
    /// `G(u) w = σ Π P_n (u ⊙ w)`, componentwise product.
    LinearMultiplicative { sigma: f64 },
    /// `G(u) w = σ min(1, R0 / ‖u‖_{L²}) w`.
    BoundedSaturating { sigma: f64, radius: f64 },
}

impl DiffusionFamily {
    pub fn validate(&self) -> Result<(), NoiseError> {
        let sigma = self.sigma();
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(NoiseError::Strength(sigma));
        }
        if let DiffusionFamily::BoundedSaturating { radius, .. } = *self {
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(NoiseError::Radius(radius));
            }
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            DiffusionFamily::Additive { sigma }
            | DiffusionFamily::LinearMultiplicative { sigma }
            | DiffusionFamily::BoundedSaturating { sigma, .. } => sigma,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DiffusionFamily::Additive { .. } => "additive",
            DiffusionFamily::LinearMultiplicative { .. } => "linear_multiplicative",
            DiffusionFamily::BoundedSaturating { .. } => "bounded_saturating",
        }
    }

    /// `L` in `‖G(u)w − G(v)w‖_{L²} <= L ‖u − v‖_{L²} |w|`, with `|w|` from
    /// [`DiffusionFamily::direction_norm`].
    pub fn lipschitz_constant(&self) -> f64 {
        match *self {
            DiffusionFamily::Additive { .. } => 0.0,
            DiffusionFamily::LinearMultiplicative { sigma } => sigma,
            DiffusionFamily::BoundedSaturating { sigma, radius } => sigma / radius,
        }
    }

    /// `c` in `‖G(u)w‖_{L²} <= c (1 + ‖u‖_{L²}) |w|`.
    pub fn growth_constant(&self) -> f64 {
        self.sigma()
    }

    /// Norm of the noise direction the constants refer to: `L²` for the
    /// state-independent scalings, and `max_i Σ_k |ŵ_i(k)|` (which dominates
    /// `‖w_i‖_{L∞}`) for the multiplicative family.
    pub fn direction_norm(&self, w: &SpectralField) -> f64 {
        match self {
            DiffusionFamily::LinearMultiplicative { .. } => (0..w.components())
                .map(|c| w.component(c).iter().map(|z| z.norm()).sum::<f64>())
                .fold(0.0, f64::max),
            _ => w.l2_norm(),
        }
    }
}

/// `G(u) dW`, projected onto divergence-free fields of the increment's lattice.
pub fn apply_g(family: &DiffusionFamily, u: &SpectralField, dw: &SpectralField) -> SpectralField {
    match *family {
        DiffusionFamily::Additive { sigma } => dw.scaled(sigma),
        DiffusionFamily::LinearMultiplicative { sigma } => {
            let prod = dealiased_pointwise_product(u, dw, dw.lattice())
                .expect("velocity and increment are 2-component fields");
            leray_project(&prod).scaled(sigma)
        }
        DiffusionFamily::BoundedSaturating { sigma, radius } => {
            let norm = u.l2_norm();
            let factor = if norm <= radius { 1.0 } else { radius / norm };
            dw.scaled(sigma * factor)
        }
    }
}

/// `curl G(K θ) dW` with `K` the Biot-Savart operator.
pub fn vorticity_noise(
    family: &DiffusionFamily,
    theta: &SpectralField,
    dw: &SpectralField,
) -> SpectralField {
    match family {
        DiffusionFamily::Additive { .. } => curl2d(&apply_g(family, theta, dw)),
        _ => curl2d(&apply_g(family, &biot_savart(theta), dw)),
    }
}

/// A reproducible Brownian path. Step `j` of a path with refinement `r`
/// sums the fine increments `j r, ..., j r + r - 1` of step `dt / r`, so
/// paths with the same seed and different time steps are coupled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoisePath {
    seed: u64,
    refinement: u32,
}

impl NoisePath {
    pub fn new(seed: u64) -> Self {
        NoisePath { seed, refinement: 1 }
    }

    pub fn with_refinement(seed: u64, refinement: u32) -> Result<Self, NoiseError> {
        if refinement == 0 {
            return Err(NoiseError::Refinement);
        }
        Ok(NoisePath { seed, refinement })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn refinement(&self) -> u32 {
        self.refinement
    }

    /// The increment `W(t_{j+1}) − W(t_j)` over a step of length `dt`.
    pub fn increment(
        &self,
        step: u64,
        lattice: WavenumberLattice,
        spectrum: &CovarianceSpectrum,
        dt: f64,
    ) -> SpectralField {
        assert!(dt > 0.0, "time step must be positive");
        let mut g = GaussianStream::new(derive_seed(self.seed, NOISE_TAG));
        let r = self.refinement as u64;
        let scale = (dt / r as f64 / 2.0).sqrt() / (2.0 * std::f64::consts::PI);
        let len = lattice.len();
        let mut coeffs = vec![Complex64::default(); 2 * len];
        for i in lattice.half() {
            let k = lattice.mode(i);
            let q = spectrum.q(k);
            if q == 0.0 {
                continue;
            }
            let stream = mode_stream(k);
            let mut z = Complex64::default();
            for s in 0..r {
                let (a, b) = g.pair(stream, step * r + s);
                z += Complex64::new(a, b);
            }
            let amp = z * (q.sqrt() * scale);
            let [p1, p2] = k.perp();
            let norm = k.norm();
            let j = lattice.neg_index(i);
            coeffs[i] = amp * (p1 / norm);
            coeffs[len + i] = amp * (p2 / norm);
            coeffs[j] = coeffs[i].conj();
            coeffs[len + j] = coeffs[len + i].conj();
        }
        SpectralField::from_coeffs(lattice, 2, coeffs).expect("sizes match")
    }
}

/// `NoisePath::increment` as a free function.
pub fn wiener_increment(
    path: &NoisePath,
    step: u64,
    lattice: WavenumberLattice,
    spectrum: &CovarianceSpectrum,
    dt: f64,
) -> SpectralField {
    path.increment(step, lattice, spectrum, dt)
}

/// `<f, ẽ_k>_{L²}` for the orthonormal eigenfunction at `k`.
pub fn basis_coefficient(f: &SpectralField, k: Mode) -> Complex64 {
    let [p1, p2] = k.perp();
    let norm = k.norm();
    (f.coeff(0, k) * p1 + f.coeff(1, k) * p2) * (2.0 * std::f64::consts::PI / norm)
}
