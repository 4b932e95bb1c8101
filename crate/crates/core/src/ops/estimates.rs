//! Empirical constants for the bilinear estimates.
//!
//! Each estimate is an inequality `lhs(u, v) <= c · rhs(u, v)`. Sampling
//! `lhs / rhs` over random divergence-free fields gives a lower bound on the
//! best constant; boundedness across truncation levels is the observable.

use std::fmt;

use rayon::prelude::*;

use super::{curl2d, gradient_entrywise_norm, leray_project, nonlinear_term_b, sobolev_norm};
use super::{OpsError, SobolevIndex};
use crate::spectral_field::{SpectralField, WavenumberLattice};
use crate::stream::derive_seed;

const DIM: f64 = 2.0;

/// Threshold `alpha(d, eta)` for the `H^{eta ± alpha/2}` estimate, or `None`
/// when `eta` is outside its domain.
pub fn critical_alpha(d: usize, eta: f64) -> Option<f64> {
    let d = d as f64;
    if eta >= d / 2.0 {
        Some(1.0)
    } else if eta >= 0.0 && eta > d / 2.0 - 2.0 {
        Some(((d + 2.0 - 2.0 * eta) / 3.0).max(2.0 * eta + 2.0 - d))
    } else {
        None
    }
}

/// Whether `(eta, alpha)` lies in the validity region; the threshold itself
/// is excluded for `eta ∈ [(d-1)/2, d/2)`.
pub fn gelfand_admissible(d: usize, eta: f64, alpha: f64) -> bool {
    let Some(crit) = critical_alpha(d, eta) else {
        return false;
    };
    let half = d as f64 / 2.0;
    let open = eta >= half - 0.5 && eta < half;
    alpha <= 2.0 && if open { alpha > crit } else { alpha >= crit }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimate {
    /// `|B(u,v)|_{L²} <= c |u|_{H^{d/2-α/2}} |v|_{H^{1+α/2}}`, `α ∈ (0, 2)`.
    ProductL2 { alpha: f64 },
    /// `|B(u,v)|_{H^{-α/2}} <= c |u|_{H^s} |v|_{H^s}`, `s = (2+d-α)/4`, `α ∈ (0, 2]`.
    ProductNegative { alpha: f64 },
    /// `|B(u,v)|_{H^{η-α/2}} <= c |u|_{H^{η+α/2}} |v|_{H^{η+α/2}}`.
    Gelfand { alpha: f64, eta: f64 },
    /// `|B(u,u)|_{H^{-1}} <= c |u|_{H^1} |u|_{L²}`.
    ClassicalNegative,
    /// `|<B(w), u>| <= c |u|_{H^1} |w|_{H^{α/2}}^{d/α} |w|_{L²}^{(2α-d)/α}`, `α ∈ [d/2, 2]`.
    TrilinearInterpolation { alpha: f64 },
}

impl Estimate {
    pub fn id(&self) -> &'static str {
        match self {
            Estimate::ProductL2 { .. } => "B_L2",
            Estimate::ProductNegative { .. } => "B_Hneg",
            Estimate::Gelfand { .. } => "gelfand",
            Estimate::ClassicalNegative => "B_H1_classical",
            Estimate::TrilinearInterpolation { .. } => "trilinear_interp",
        }
    }

    fn params(&self) -> String {
        match *self {
            Estimate::ProductL2 { alpha }
            | Estimate::ProductNegative { alpha }
            | Estimate::TrilinearInterpolation { alpha } => format!("alpha={alpha}"),
            Estimate::Gelfand { alpha, eta } => format!("alpha={alpha} eta={eta}"),
            Estimate::ClassicalNegative => String::new(),
        }
    }

    pub fn validate(&self) -> Result<(), OpsError> {
        let bad = |range: &str| {
            Err(OpsError::OutOfRange {
                estimate: self.id().to_string(),
                range: range.to_string(),
            })
        };
        match *self {
            Estimate::ProductL2 { alpha } if !(alpha > 0.0 && alpha < 2.0) => bad("alpha in (0, 2)"),
            Estimate::ProductNegative { alpha } if !(alpha > 0.0 && alpha <= 2.0) => {
                bad("alpha in (0, 2]")
            }
            Estimate::Gelfand { alpha, eta } if !gelfand_admissible(2, eta, alpha) => {
                bad("alpha in [alpha(d, eta), 2], open at the threshold for eta in [(d-1)/2, d/2)")
            }
            Estimate::TrilinearInterpolation { alpha } if !(DIM / 2.0..=2.0).contains(&alpha) => {
                bad("alpha in [d/2, 2]")
            }
            _ => Ok(()),
        }
    }

    /// `(lhs, rhs)` for a pair of divergence-free fields on one lattice.
    pub fn sides(&self, u: &SpectralField, v: &SpectralField) -> (f64, f64) {
        let lat = u.lattice();
        let h = |f: &SpectralField, beta: f64| {
            sobolev_norm(f, SobolevIndex::l2(beta), None).expect("q = 2")
        };
        match *self {
            Estimate::ProductL2 { alpha } => {
                let b = nonlinear_term_b(u, v, lat);
                (h(&b, 0.0), h(u, DIM / 2.0 - alpha / 2.0) * h(v, 1.0 + alpha / 2.0))
            }
            Estimate::ProductNegative { alpha } => {
                let b = nonlinear_term_b(u, v, lat);
                let s = (2.0 + DIM - alpha) / 4.0;
                (h(&b, -alpha / 2.0), h(u, s) * h(v, s))
            }
            Estimate::Gelfand { alpha, eta } => {
                let b = nonlinear_term_b(u, v, lat);
                let s = eta + alpha / 2.0;
                (h(&b, eta - alpha / 2.0), h(u, s) * h(v, s))
            }
            Estimate::ClassicalNegative => {
                let b = nonlinear_term_b(u, u, lat);
                (h(&b, -1.0), h(u, 1.0) * h(u, 0.0))
            }
            Estimate::TrilinearInterpolation { alpha } => {
                let (w, u) = (u, v);
                let lhs = nonlinear_term_b(w, w, lat).inner(u).abs();
                let rhs = h(u, 1.0)
                    * h(w, alpha / 2.0).powf(DIM / alpha)
                    * h(w, 0.0).powf((2.0 * alpha - DIM) / alpha);
                (lhs, rhs)
            }
        }
    }

    /// `lhs / rhs`, with `0/0 = 0`.
    pub fn ratio(&self, u: &SpectralField, v: &SpectralField) -> f64 {
        let (lhs, rhs) = self.sides(u, v);
        if lhs == 0.0 {
            0.0
        } else {
            lhs / rhs
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport {
    pub estimate: Estimate,
    pub level: usize,
    pub decay: f64,
    pub trials: usize,
    pub seed: u64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl fmt::Display for RatioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params = self.estimate.params();
        write!(f, "estimate={}", self.estimate.id())?;
        if !params.is_empty() {
            write!(f, " {params}")?;
        }
        write!(
            f,
            " n={} decay={} trials={} seed={} min={:.6e} median={:.6e} max={:.6e}",
            self.level, self.decay, self.trials, self.seed, self.min, self.median, self.max
        )
    }
}

/// Random divergence-free field with coefficient scale `|k|^-decay`.
pub fn random_solenoidal(lattice: WavenumberLattice, decay: f64, seed: u64) -> SpectralField {
    leray_project(&SpectralField::random(lattice, 2, decay, seed))
}

/// Samples `lhs / rhs` over `trials` random pairs at level `n`.
pub fn inequality_ratio_sample(
    estimate: Estimate,
    n: usize,
    trials: usize,
    decay: f64,
    seed: u64,
) -> Result<RatioReport, OpsError> {
    estimate.validate()?;
    let lattice = WavenumberLattice::new(n)?;
    let mut ratios: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = derive_seed(seed, t);
            let u = random_solenoidal(lattice, decay, derive_seed(s, 0));
            let v = random_solenoidal(lattice, decay, derive_seed(s, 1));
            estimate.ratio(&u, &v)
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let pick = |q: f64| ratios.get(((ratios.len() as f64 - 1.0) * q).round() as usize).copied();
    Ok(RatioReport {
        estimate,
        level: n,
        decay,
        trials,
        seed,
        min: pick(0.0).unwrap_or(0.0),
        median: pick(0.5).unwrap_or(0.0),
        max: pick(1.0).unwrap_or(0.0),
    })
}

/// `(|curl v|_{H^{β,q}}, Σ_{ij} |∂_j v_i|_{H^{β,q}})` for the curl/gradient
/// norm equivalence.
pub fn curl_gradient_norms(
    v: &SpectralField,
    idx: SobolevIndex,
    grid_size: Option<usize>,
) -> Result<(f64, f64), OpsError> {
    Ok((
        sobolev_norm(&curl2d(v), idx, grid_size)?,
        gradient_entrywise_norm(v, idx, grid_size)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_field::Mode;
    use num_complex::Complex64;
    use proptest::prelude::*;

    #[test]
    fn critical_alpha_in_two_dimensions() {
        assert_eq!(critical_alpha(2, 0.0), Some(4.0 / 3.0));
        assert_eq!(critical_alpha(2, 1.0), Some(1.0));
        assert_eq!(critical_alpha(2, 0.75), Some(1.5));
        assert_eq!(critical_alpha(2, -0.1), None);
        assert_eq!(critical_alpha(3, 1.5), Some(1.0));
        assert!((critical_alpha(3, 0.0).unwrap() - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gelfand_region_edges() {
        assert!(gelfand_admissible(2, 0.0, 4.0 / 3.0));
        assert!(!gelfand_admissible(2, 0.0, 1.3));
        assert!(gelfand_admissible(2, 1.0, 1.0));
        assert!(!gelfand_admissible(2, 0.75, 1.5));
        assert!(gelfand_admissible(2, 0.75, 1.51));
        assert!(!gelfand_admissible(2, 2.0, 2.1));
    }

    #[test]
    fn out_of_range_parameters_are_rejected() {
        for e in [
            Estimate::ProductL2 { alpha: 2.0 },
            Estimate::ProductNegative { alpha: 0.0 },
            Estimate::Gelfand { alpha: 1.2, eta: 0.0 },
            Estimate::TrilinearInterpolation { alpha: 0.9 },
        ] {
            assert!(matches!(
                inequality_ratio_sample(e, 4, 2, 1.0, 0),
                Err(OpsError::OutOfRange { .. })
            ));
        }
    }

    #[test]
    fn zero_field_has_zero_ratio() {
        let lat = WavenumberLattice::new(4).unwrap();
        let z = SpectralField::zeros(lat, 2);
        let v = random_solenoidal(lat, 1.0, 3);
        assert_eq!(Estimate::TrilinearInterpolation { alpha: 1.5 }.ratio(&v, &z), 0.0);
        assert_eq!(Estimate::ProductL2 { alpha: 1.0 }.ratio(&z, &v), 0.0);
    }

    #[test]
    fn single_mode_self_interaction_is_finite() {
        let lat = WavenumberLattice::new(4).unwrap();
        let mut u = SpectralField::zeros(lat, 2);
        u.set_pair(1, Mode::new(1, 0), Complex64::new(0.5, 0.0));
        let r = Estimate::ProductL2 { alpha: 1.0 }.ratio(&u, &u);
        assert!(r.is_finite());
    }

    #[test]
    fn report_is_a_flat_record() {
        let r = inequality_ratio_sample(Estimate::ClassicalNegative, 4, 5, 1.0, 9).unwrap();
        let line = r.to_string();
        assert!(line.starts_with("estimate=B_H1_classical n=4"));
        assert!(!line.contains('\n'));
        assert!(r.min <= r.median && r.median <= r.max);
    }

    #[test]
    fn curl_is_bounded_by_the_gradient() {
        let lat = WavenumberLattice::new(6).unwrap();
        for (seed, q) in [(1, 2.0), (2, 3.0), (3, 1.5)] {
            let v = random_solenoidal(lat, 1.5, seed);
            let (c, g) = curl_gradient_norms(&v, SobolevIndex::new(0.5, q).unwrap(), None).unwrap();
            assert!(c <= g * (1.0 + 1e-12));
            assert!(c > 0.2 * g);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn ratios_are_non_negative_and_finite(seed in any::<u64>(), alpha in 1.0f64..2.0) {
            let lat = WavenumberLattice::new(3).unwrap();
            let u = random_solenoidal(lat, 1.0, seed);
            let v = random_solenoidal(lat, 1.0, seed ^ 1);
            for e in [
                Estimate::ProductL2 { alpha: alpha.min(1.99) },
                Estimate::ProductNegative { alpha },
                Estimate::TrilinearInterpolation { alpha },
            ] {
                let r = e.ratio(&u, &v);
                prop_assert!(r.is_finite() && r >= 0.0);
            }
        }
    }
}
