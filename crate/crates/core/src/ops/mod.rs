//! Linear and bilinear operators on the torus.
//!
//! Every operator is a Fourier multiplier except the nonlinear term, which is
//! an exact truncated convolution computed on a zero-padded grid.

mod estimates;

pub use estimates::{
    critical_alpha, curl_gradient_norms, gelfand_admissible, inequality_ratio_sample, Estimate,
    RatioReport,
};
pub use estimates::random_solenoidal;

use num_complex::Complex64;
use thiserror::Error;

use crate::spectral_field::{
    analyze_pair, fft_size, synthesize, synthesize_pair, FieldError, Mode, SpectralField,
    WavenumberLattice, PARSEVAL,
};

#[derive(Debug, Error, PartialEq)]
pub enum OpsError {
    #[error("alpha = {0} is outside the valid range (0, 2]")]
    Alpha(f64),
    #[error("nu = {0} must be positive")]
    Viscosity(f64),
    #[error("integrability q = {0} must exceed 1")]
    Integrability(f64),
    #[error("{estimate}: parameters outside the validity range: {range}")]
    OutOfRange { estimate: String, range: String },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Dissipation regime of the exponent `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Supercritical,
    Critical,
    Subcritical,
    Classical,
}

/// `nu (-Δ)^{alpha/2}` parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalDissipation {
    alpha: f64,
    nu: f64,
}

impl FractionalDissipation {
    pub fn new(alpha: f64, nu: f64) -> Result<Self, OpsError> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(OpsError::Alpha(alpha));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(OpsError::Viscosity(nu));
        }
        Ok(FractionalDissipation { alpha, nu })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn regime(&self) -> Regime {
        if self.alpha == 2.0 {
            Regime::Classical
        } else if self.alpha > 1.0 {
            Regime::Subcritical
        } else if self.alpha == 1.0 {
            Regime::Critical
        } else {
            Regime::Supercritical
        }
    }

    /// `nu |k|^alpha`, the decay rate of mode `k`.
    pub fn rate(&self, k: Mode) -> f64 {
        self.nu * k.norm().powf(self.alpha)
    }
}

/// Smoothness `beta` and integrability `q` of `H^{beta,q}`; `q` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevIndex {
    pub beta: f64,
    pub q: f64,
}

impl SobolevIndex {
    pub fn new(beta: f64, q: f64) -> Result<Self, OpsError> {
        if !(q > 1.0) {
            return Err(OpsError::Integrability(q));
        }
        Ok(SobolevIndex { beta, q })
    }

    pub fn l2(beta: f64) -> Self {
        SobolevIndex { beta, q: 2.0 }
    }
}

fn assert_vector(u: &SpectralField) {
    assert_eq!(u.components(), 2, "expected a 2-component velocity field");
}

fn assert_scalar(f: &SpectralField) {
    assert_eq!(f.components(), 1, "expected a scalar field");
}

/// Leray projection `(I - k kᵀ/|k|²)` on every mode.
pub fn leray_project(v: &SpectralField) -> SpectralField {
    assert_vector(v);
    let lattice = v.lattice();
    let len = lattice.len();
    let mut out = v.clone();
    let (a, b) = out.coeffs_split_mut();
    for i in 0..len {
        let [k1, k2] = lattice.mode(i).as_f64();
        let kk = k1 * k1 + k2 * k2;
        let dot = (a[i] * k1 + b[i] * k2) / kk;
        a[i] -= dot * k1;
        b[i] -= dot * k2;
    }
    out
}

/// `|k|^alpha` on every mode; `nu` is left to the caller.
pub fn apply_fractional_stokes(u: &SpectralField, diss: &FractionalDissipation) -> SpectralField {
    let alpha = diss.alpha();
    u.map_multiplier(|k| Complex64::new(k.norm().powf(alpha), 0.0))
}

/// `exp(-nu |k|^alpha t)`.
pub fn semigroup_factor(k: Mode, diss: &FractionalDissipation, t: f64) -> f64 {
    (-diss.rate(k) * t).exp()
}

/// `∂_1 u_2 - ∂_2 u_1`.
pub fn curl2d(u: &SpectralField) -> SpectralField {
    assert_vector(u);
    let lattice = u.lattice();
    let mut out = SpectralField::zeros(lattice, 1);
    let (u1, u2) = (u.component(0), u.component(1));
    for (i, z) in out.component_mut(0).iter_mut().enumerate() {
        let [k1, k2] = lattice.mode(i).as_f64();
        *z = Complex64::new(0.0, 1.0) * (u2[i] * k1 - u1[i] * k2);
    }
    out
}

/// Velocity of a zero-mean vorticity: `û(k) = (i k2, -i k1) θ̂(k) / |k|²`.
pub fn biot_savart(theta: &SpectralField) -> SpectralField {
    assert_scalar(theta);
    let lattice = theta.lattice();
    let len = lattice.len();
    let mut coeffs = vec![Complex64::default(); 2 * len];
    for (i, &t) in theta.component(0).iter().enumerate() {
        let k = lattice.mode(i);
        let [k1, k2] = k.as_f64();
        let s = t * Complex64::new(0.0, 1.0) / k.norm_sq();
        coeffs[i] = s * k2;
        coeffs[len + i] = -s * k1;
    }
    SpectralField::from_coeffs(lattice, 2, coeffs).expect("sizes match")
}

/// `∂_j f` for every component of `f`.
pub fn partial(f: &SpectralField, j: usize) -> SpectralField {
    f.map_multiplier(|k| Complex64::new(0.0, k.as_f64()[j]))
}

/// Pointwise products of real grids, then back to `out`.
fn grid_size_for(a: WavenumberLattice, b: WavenumberLattice, out: WavenumberLattice) -> usize {
    fft_size(WavenumberLattice::min_product_grid(a.level(), b.level(), out.level()))
}

/// `P_out (u·∇) v` without the Leray projection.
pub fn convective_term(u: &SpectralField, v: &SpectralField, out: WavenumberLattice) -> SpectralField {
    assert_vector(u);
    assert_vector(v);
    let m = grid_size_for(u.lattice(), v.lattice(), out);
    let (g_u1, g_u2) = synthesize_pair(u.lattice(), u.component(0), u.component(1), m);
    let d1 = partial(v, 0);
    let d2 = partial(v, 1);
    let (g_d1v1, g_d2v1) = synthesize_pair(v.lattice(), d1.component(0), d2.component(0), m);
    let (g_d1v2, g_d2v2) = synthesize_pair(v.lattice(), d1.component(1), d2.component(1), m);
    let s = m * m;
    let mut w1 = vec![0.0; s];
    let mut w2 = vec![0.0; s];
    for p in 0..s {
        w1[p] = g_u1[p] * g_d1v1[p] + g_u2[p] * g_d2v1[p];
        w2[p] = g_u1[p] * g_d1v2[p] + g_u2[p] * g_d2v2[p];
    }
    let (a, b) = analyze_pair(&w1, &w2, m, out);
    let mut coeffs = a;
    coeffs.extend(b);
    SpectralField::from_coeffs(out, 2, coeffs).expect("sizes match")
}

/// `B(u, v) = Π (u·∇) v`, exactly truncated to `out`.
pub fn nonlinear_term_b(u: &SpectralField, v: &SpectralField, out: WavenumberLattice) -> SpectralField {
    leray_project(&convective_term(u, v, out))
}

/// `Π Σ_j ∂_j (u_j v)`; equals [`nonlinear_term_b`] for divergence-free `u`.
pub fn nonlinear_term_b_divergence_form(
    u: &SpectralField,
    v: &SpectralField,
    out: WavenumberLattice,
) -> SpectralField {
    assert_vector(u);
    assert_vector(v);
    let m = grid_size_for(u.lattice(), v.lattice(), out);
    let (g_u1, g_u2) = synthesize_pair(u.lattice(), u.component(0), u.component(1), m);
    let (g_v1, g_v2) = synthesize_pair(v.lattice(), v.component(0), v.component(1), m);
    let s = m * m;
    let prod = |x: &[f64], y: &[f64]| -> Vec<f64> { (0..s).map(|p| x[p] * y[p]).collect() };
    // flux[j][i] = u_j v_i
    let (f11, f12) = analyze_pair(&prod(&g_u1, &g_v1), &prod(&g_u1, &g_v2), m, out);
    let (f21, f22) = analyze_pair(&prod(&g_u2, &g_v1), &prod(&g_u2, &g_v2), m, out);
    let len = out.len();
    let mut coeffs = vec![Complex64::default(); 2 * len];
    let i_unit = Complex64::new(0.0, 1.0);
    for i in 0..len {
        let [k1, k2] = out.mode(i).as_f64();
        coeffs[i] = i_unit * (f11[i] * k1 + f21[i] * k2);
        coeffs[len + i] = i_unit * (f12[i] * k1 + f22[i] * k2);
    }
    leray_project(&SpectralField::from_coeffs(out, 2, coeffs).expect("sizes match"))
}

/// `P_out (u·∇θ)` for a scalar `θ`.
pub fn advection(u: &SpectralField, theta: &SpectralField, out: WavenumberLattice) -> SpectralField {
    assert_vector(u);
    assert_scalar(theta);
    let m = grid_size_for(u.lattice(), theta.lattice(), out);
    let (g_u1, g_u2) = synthesize_pair(u.lattice(), u.component(0), u.component(1), m);
    let d1 = partial(theta, 0);
    let d2 = partial(theta, 1);
    let (g_d1, g_d2) = synthesize_pair(theta.lattice(), d1.component(0), d2.component(0), m);
    let w: Vec<f64> = (0..m * m)
        .map(|p| g_u1[p] * g_d1[p] + g_u2[p] * g_d2[p])
        .collect();
    let zero = vec![0.0; m * m];
    let (a, _) = analyze_pair(&w, &zero, m, out);
    SpectralField::from_coeffs(out, 1, a).expect("sizes match")
}

/// `b(u, v, w) = <B(u, v), w>` in `L²`.
pub fn trilinear_b(u: &SpectralField, v: &SpectralField, w: &SpectralField) -> f64 {
    nonlinear_term_b(u, v, w.lattice()).inner(w)
}

/// `<f, g>_{H^{beta,2}} = (2π)² Re Σ |k|^{2 beta} f̂ conj(ĝ)`.
pub fn sobolev_inner(f: &SpectralField, g: &SpectralField, beta: f64) -> f64 {
    f.weighted_inner(g, |k| k.norm_sq().powf(beta))
}

/// Default quadrature grid for `L^q` norms of level-`n` fields.
pub fn quadrature_grid(n: usize) -> usize {
    fft_size(4 * n + 1)
}

/// `|f|_{H^{beta,q}} = | (-Δ)^{beta/2} f |_{L^q}`.
///
/// `q = 2` is exact in Fourier space. Other `q` use the trapezoidal rule on
/// `grid_size` points per dimension (default [`quadrature_grid`]);
/// `q = ∞` is the grid maximum, an under-estimate.
pub fn sobolev_norm(
    f: &SpectralField,
    idx: SobolevIndex,
    grid_size: Option<usize>,
) -> Result<f64, OpsError> {
    if !(idx.q > 1.0) {
        return Err(OpsError::Integrability(idx.q));
    }
    let beta = idx.beta;
    if idx.q == 2.0 {
        let s: f64 = f
            .lattice()
            .modes()
            .enumerate()
            .map(|(i, k)| {
                let w = k.norm_sq().powf(beta);
                (0..f.components())
                    .map(|c| f.component(c)[i].norm_sqr())
                    .sum::<f64>()
                    * w
            })
            .sum();
        return Ok((PARSEVAL * s).sqrt());
    }
    let lifted = if beta == 0.0 {
        f.clone()
    } else {
        f.map_multiplier(|k| Complex64::new(k.norm().powf(beta), 0.0))
    };
    let m = grid_size.unwrap_or_else(|| quadrature_grid(f.lattice().level()));
    let grid = synthesize(&lifted, m)?;
    Ok(if idx.q.is_infinite() {
        grid.max_abs()
    } else {
        grid.lq_norm(idx.q)
    })
}

/// Velocity gradient `[∂_1 u_1, ∂_2 u_1, ∂_1 u_2, ∂_2 u_2]` as a 4-component field.
pub fn velocity_gradient(u: &SpectralField) -> SpectralField {
    assert_vector(u);
    let d1 = partial(u, 0);
    let d2 = partial(u, 1);
    SpectralField::stack(&[
        d1.take_component(0),
        d2.take_component(0),
        d1.take_component(1),
        d2.take_component(1),
    ])
    .expect("same lattice")
}

/// `| |∇u|_F |_{L^q}` with the pointwise Frobenius norm.
pub fn gradient_lq_norm(u: &SpectralField, q: f64, grid_size: Option<usize>) -> Result<f64, OpsError> {
    sobolev_norm(&velocity_gradient(u), SobolevIndex::new(0.0, q)?, grid_size)
}

/// `Σ_{i,j} |∂_j v_i|_{H^{beta,q}}`, the entrywise gradient norm.
pub fn gradient_entrywise_norm(
    v: &SpectralField,
    idx: SobolevIndex,
    grid_size: Option<usize>,
) -> Result<f64, OpsError> {
    let g = velocity_gradient(v);
    (0..4)
        .map(|c| sobolev_norm(&g.take_component(c), idx, grid_size))
        .sum()
}

/// `(e(u), E(u)) = (½‖u‖²_{L²}, ‖∇u‖²_{L²})`.
pub fn energy_enstrophy(u: &SpectralField) -> (f64, f64) {
    let l2 = u.l2_norm();
    let h1 = sobolev_norm(u, SobolevIndex::l2(1.0), None).expect("q = 2");
    (0.5 * l2 * l2, h1 * h1)
}

impl SpectralField {
    fn coeffs_split_mut(&mut self) -> (&mut [Complex64], &mut [Complex64]) {
        let len = self.lattice().len();
        let all = self.coeffs_mut();
        let (a, rest) = all.split_at_mut(len);
        (a, &mut rest[..len])
    }
}
