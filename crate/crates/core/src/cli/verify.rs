//! Property suites behind `fsns verify`.

use std::fmt;

use crate::diagnostics::{bkm_exponent, galerkin_convergence, serrin_exponent};
use crate::noise::{CovarianceSpectrum, DiffusionFamily};
use crate::ops::{
    advection, apply_fractional_stokes, biot_savart, curl2d, inequality_ratio_sample, leray_project,
    nonlinear_term_b, random_solenoidal, sobolev_inner, sobolev_norm, trilinear_b, Estimate,
    FractionalDissipation, SobolevIndex,
};
use crate::solver::{coupled_pair_run, InitialCondition, NoiseModel, SimConfig};
use crate::spectral_field::{SpectralField, WavenumberLattice};
use crate::stream::derive_seed;

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Identities,
    Inequalities,
    Coupling,
    Convergence,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identities" => Ok(Suite::Identities),
            "inequalities" => Ok(Suite::Inequalities),
            "coupling" => Ok(Suite::Coupling),
            "convergence" => Ok(Suite::Convergence),
            _ => Err(format!(
                "unknown suite {s:?}; expected identities, inequalities, coupling or convergence"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Pass,
    Fail,
    Skip(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub outcome: Outcome,
}

impl Check {
    /// Passes when `measured <= tolerance`.
    fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            tolerance,
            outcome: if measured <= tolerance {
                Outcome::Pass
            } else {
                Outcome::Fail
            },
        }
    }

    fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check {
            name: name.into(),
            measured: f64::from(u8::from(!ok)),
            tolerance: 0.0,
            outcome: if ok { Outcome::Pass } else { Outcome::Fail },
        }
    }

    fn skip(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            measured: f64::NAN,
            tolerance: f64::NAN,
            outcome: Outcome::Skip(reason.into()),
        }
    }

    pub fn failed(&self) -> bool {
        self.outcome == Outcome::Fail
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.outcome {
            Outcome::Skip(reason) => write!(f, "SKIP {} ({reason})", self.name),
            o => write!(
                f,
                "{} {} measured={:.3e} tol={:.3e}",
                if *o == Outcome::Pass { "PASS" } else { "FAIL" },
                self.name,
                self.measured,
                self.tolerance
            ),
        }
    }
}

pub fn run_suite(suite: Suite, seed: u64, alpha: f64) -> Result<Vec<Check>, CliError> {
    match suite {
        Suite::Identities => Ok(identities(seed)),
        Suite::Inequalities => Ok(inequalities(seed, alpha)),
        Suite::Coupling => coupling(seed),
        Suite::Convergence => convergence(seed),
    }
}

const FIELDS: u64 = 100;

fn worst(mut f: impl FnMut(u64) -> f64) -> f64 {
    (0..FIELDS).map(&mut f).fold(0.0, f64::max)
}

fn identities(seed: u64) -> Vec<Check> {
    let l = WavenumberLattice::new(8).expect("n > 0");
    let raw = |i: u64, tag: u64| SpectralField::random(l, 2, 1.0, derive_seed(seed, i * 8 + tag));
    let sol = |i: u64, tag: u64| random_solenoidal(l, 1.0, derive_seed(seed, i * 8 + tag));
    let diss = FractionalDissipation::new(1.5, 1.0).expect("valid");
    let lap = FractionalDissipation::new(2.0, 1.0).expect("valid");
    vec![
        Check::at_most(
            "leray_idempotent",
            worst(|i| {
                let p = leray_project(&raw(i, 0));
                leray_project(&p).sub(&p).l2_norm() / p.l2_norm()
            }),
            1e-12,
        ),
        Check::at_most(
            "leray_commutes_with_stokes",
            worst(|i| {
                let v = raw(i, 0);
                let a = leray_project(&apply_fractional_stokes(&v, &diss));
                let b = apply_fractional_stokes(&leray_project(&v), &diss);
                a.sub(&b).l2_norm() / a.l2_norm()
            }),
            1e-12,
        ),
        Check::at_most(
            "stokes_alpha2_is_laplacian",
            worst(|i| {
                let v = raw(i, 0);
                let a = apply_fractional_stokes(&v, &lap);
                let b = v.map_multiplier(|k| k.norm_sq().into());
                a.sub(&b).l2_norm() / b.l2_norm()
            }),
            1e-12,
        ),
        Check::at_most(
            "curl_inverts_biot_savart",
            worst(|i| {
                let th = raw(i, 1).take_component(0);
                curl2d(&biot_savart(&th)).sub(&th).l2_norm() / th.l2_norm()
            }),
            1e-12,
        ),
        Check::at_most(
            "outputs_divergence_free",
            worst(|i| {
                let p = leray_project(&raw(i, 0));
                let u = biot_savart(&raw(i, 1).take_component(0));
                let b = nonlinear_term_b(&sol(i, 2), &raw(i, 3), l);
                [p, u, b]
                    .iter()
                    .map(|f| f.divergence_defect() / f.max_abs())
                    .fold(0.0, f64::max)
            }),
            1e-12,
        ),
        Check::at_most(
            "trilinear_null",
            worst(|i| {
                let (u, v) = (sol(i, 2), sol(i, 3));
                trilinear_b(&u, &v, &v).abs() / (u.l2_norm() * v.l2_norm().powi(2))
            }),
            1e-10,
        ),
        Check::at_most(
            "trilinear_antisymmetric",
            worst(|i| {
                let (u, v, w) = (sol(i, 2), sol(i, 3), sol(i, 4));
                (trilinear_b(&u, &v, &w) + trilinear_b(&u, &w, &v)).abs()
                    / (u.l2_norm() * v.l2_norm() * w.l2_norm())
            }),
            1e-10,
        ),
        Check::at_most(
            "nonlinearity_h1_orthogonal",
            worst(|i| {
                let u = sol(i, 2);
                let b = nonlinear_term_b(&u, &u, l);
                let h1 = |f: &SpectralField| sobolev_norm(f, SobolevIndex::l2(1.0), None).expect("q = 2");
                sobolev_inner(&b, &u, 1.0).abs() / (h1(&b) * h1(&u))
            }),
            1e-12,
        ),
        Check::at_most(
            "curl_of_nonlinearity_is_advection",
            worst(|i| {
                let u = sol(i, 2);
                let lhs = curl2d(&nonlinear_term_b(&u, &u, l));
                let rhs = advection(&u, &curl2d(&u), l);
                lhs.sub(&rhs).l2_norm() / rhs.l2_norm()
            }),
            1e-12,
        ),
    ]
}

/// The sampled catalog at one dissipation exponent.
pub fn catalog(alpha: f64) -> Vec<Estimate> {
    vec![
        Estimate::ProductL2 { alpha },
        Estimate::ProductNegative { alpha },
        Estimate::Gelfand { alpha, eta: 0.0 },
        Estimate::Gelfand { alpha, eta: 1.0 },
        Estimate::ClassicalNegative,
        Estimate::TrilinearInterpolation { alpha },
    ]
}

fn label(e: &Estimate) -> String {
    match e {
        Estimate::Gelfand { eta, .. } => format!("{}[eta={eta}]", e.id()),
        _ => e.id().to_string(),
    }
}

fn inequalities(seed: u64, alpha: f64) -> Vec<Check> {
    catalog(alpha)
        .into_iter()
        .map(|e| {
            let name = format!("{}_stable_n4_to_n16", label(&e));
            if let Err(err) = e.validate() {
                return Check::skip(name, err.to_string());
            }
            let coarse = inequality_ratio_sample(e, 4, 200, 2.5, seed).expect("validated");
            let fine = inequality_ratio_sample(e, 16, 200, 2.5, seed).expect("validated");
            println!("{coarse}");
            println!("{fine}");
            Check::at_most(name, fine.max / coarse.max, 1.2)
        })
        .collect()
}

fn coupling(seed: u64) -> Result<Vec<Check>, CliError> {
    let l = WavenumberLattice::new(8).expect("n > 0");
    let diss = FractionalDissipation::new(1.5, 1.0).expect("valid");
    let mut cfg = SimConfig::new(diss, l, 0.01, 0.5, InitialCondition::TaylorGreen { amplitude: 1.0 });
    cfg.noise = Some(NoiseModel {
        spectrum: CovarianceSpectrum::power_law(2.5).expect("valid"),
        family: DiffusionFamily::LinearMultiplicative { sigma: 0.5 },
        seed,
    });
    let u0 = random_solenoidal(l, 2.5, derive_seed(seed, 1));
    let d = coupled_pair_run(&cfg, &u0, &u0).map_err(CliError::from_solver)?;
    let max = d.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(vec![
        Check::at_most("identical_data_distance", max, 1e-13),
        Check::flag(
            "bkm_gate_alpha_q_gt_2d",
            bkm_exponent(1.0, 2, 4.0).is_err() && bkm_exponent(1.0 + 1e-9, 2, 4.0).is_ok(),
        ),
        Check::flag(
            "serrin_gate_alpha_gt_4_3",
            serrin_exponent(4.0 / 3.0, 2).is_err() && serrin_exponent(4.0 / 3.0 + 1e-9, 2).is_ok(),
        ),
    ])
}

fn convergence(seed: u64) -> Result<Vec<Check>, CliError> {
    let diss = FractionalDissipation::new(1.5, 0.1).expect("valid");
    let l = WavenumberLattice::new(8).expect("n > 0");
    let cfg = SimConfig::new(
        diss,
        l,
        0.0005,
        0.2,
        InitialCondition::Random {
            amplitude: 1.0,
            decay: 3.0,
            seed,
        },
    );
    let table = galerkin_convergence(&cfg, &[2, 4, 8], &[0.004, 0.002, 0.001, 0.0005], 1)
        .map_err(CliError::from_solver)?;
    print!("{table}");
    let order = table.temporal_order.unwrap_or(f64::NAN);
    Ok(vec![
        Check::flag("spatial_strictly_decreasing", table.spatial_strictly_decreasing()),
        Check::at_most("temporal_order_deviation", (order - 1.0).abs(), 0.15),
    ])
}
