//! Monte-Carlo moment bounds and Galerkin self-convergence.

use std::fmt;

use rayon::prelude::*;

use crate::noise::NoisePath;
use crate::ops::{sobolev_norm, SobolevIndex};
use crate::solver::{final_velocity, run_observed, SimConfig, SolverError};
use crate::spectral_field::{SpectralField, WavenumberLattice};
use crate::stream::derive_seed;

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two
/// points or a non-positive value.
pub fn fit_order(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Copy of `cfg` for Monte-Carlo path `index`; deterministic configs are
/// returned unchanged.
fn path_config(cfg: &SimConfig, index: u64) -> SimConfig {
    let mut c = cfg.clone();
    if let Some(noise) = &mut c.noise {
        noise.seed = derive_seed(noise.seed, index);
    }
    c
}

fn effective_paths(cfg: &SimConfig, paths: usize) -> usize {
    if cfg.noise.is_some() {
        paths.max(1)
    } else {
        1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelMoments {
    pub level: usize,
    /// `E sup_t |u|^p_{H^{1,2}}` and its standard error.
    pub sup_moment: (f64, f64),
    /// `E ∫_0^T |u|²_{H^{1+α/2,2}} dt`.
    pub dissipation: (f64, f64),
    /// `E ‖u(T)‖²_{L²}`.
    pub final_l2_sq: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub p: u32,
    pub paths: usize,
    pub levels: Vec<LevelMoments>,
    /// No level exceeds its predecessor by more than three combined
    /// standard errors, for either moment.
    pub uniformly_bounded: bool,
}

impl fmt::Display for MomentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "# moment study p={} paths={} uniformly_bounded={}",
            self.p, self.paths, self.uniformly_bounded
        )?;
        writeln!(
            f,
            "n\tsup_moment\tsup_moment_se\tdissipation\tdissipation_se\tfinal_l2_sq\tfinal_l2_sq_se"
        )?;
        for l in &self.levels {
            writeln!(
                f,
                "{}\t{:.10e}\t{:.3e}\t{:.10e}\t{:.3e}\t{:.10e}\t{:.3e}",
                l.level,
                l.sup_moment.0,
                l.sup_moment.1,
                l.dissipation.0,
                l.dissipation.1,
                l.final_l2_sq.0,
                l.final_l2_sq.1
            )?;
        }
        Ok(())
    }
}

fn not_increasing(a: (f64, f64), b: (f64, f64)) -> bool {
    b.0 <= a.0 + 3.0 * (a.1 * a.1 + b.1 * b.1).sqrt()
}

/// Estimates the leading a-priori moments at each Galerkin level from
/// `paths` Monte-Carlo paths; `p` must be 2 or 4.
pub fn moment_bound_study(
    cfg: &SimConfig,
    levels: &[usize],
    paths: usize,
    p: u32,
) -> Result<MomentReport, SolverError> {
    if p != 2 && p != 4 {
        return Err(SolverError::Config {
            field: "study.p",
            message: format!("must be 2 or 4, got {p}"),
        });
    }
    if levels.is_empty() {
        return Err(SolverError::Config {
            field: "study.levels",
            message: "must not be empty".into(),
        });
    }
    let paths = effective_paths(cfg, paths);
    let diss_index = SobolevIndex::l2(1.0 + cfg.diss.alpha() / 2.0);
    let mut out = Vec::with_capacity(levels.len());
    for &n in levels {
        let mut level_cfg = cfg.clone();
        level_cfg.lattice = WavenumberLattice::new(n)?;
        level_cfg.validate()?;
        let samples: Vec<(f64, f64, f64)> = (0..paths as u64)
            .into_par_iter()
            .map(|i| -> Result<_, SolverError> {
                let c = path_config(&level_cfg, i);
                let u0 = c.initial.build(c.lattice)?;
                let h1 = |u: &SpectralField| sobolev_norm(u, SobolevIndex::l2(1.0), None);
                let mut sup = h1(&u0)?.powi(p as i32);
                let mut left = sobolev_norm(&u0, diss_index, None)?.powi(2);
                let mut integral = 0.0;
                let mut err = None;
                let output = run_observed(&c, |s| {
                    let u = s.velocity();
                    integral += c.dt * left;
                    match (h1(&u), sobolev_norm(&u, diss_index, None)) {
                        (Ok(a), Ok(b)) => {
                            sup = sup.max(a.powi(p as i32));
                            left = b * b;
                        }
                        (Err(e), _) | (_, Err(e)) => err = Some(e),
                    }
                    Ok(())
                })?;
                if let Some(e) = err {
                    return Err(e.into());
                }
                Ok((sup, integral, output.state.velocity().l2_norm().powi(2)))
            })
            .collect::<Result<_, _>>()?;
        let col = |f: fn(&(f64, f64, f64)) -> f64| mean_se(&samples.iter().map(f).collect::<Vec<_>>());
        out.push(LevelMoments {
            level: n,
            sup_moment: col(|s| s.0),
            dissipation: col(|s| s.1),
            final_l2_sq: col(|s| s.2),
        });
    }
    let uniformly_bounded = out.windows(2).all(|w| {
        not_increasing(w[0].sup_moment, w[1].sup_moment)
            && not_increasing(w[0].dissipation, w[1].dissipation)
    });
    Ok(MomentReport {
        p,
        paths,
        levels: out,
        uniformly_bounded,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalRow {
    pub dt: f64,
    /// RMS over paths of `‖u_dt(T) − u_{dt_min}(T)‖_{L²}`.
    pub error_vs_finest: f64,
    /// RMS over paths of `‖u_dt(T) − u_{dt/2}(T)‖_{L²}`, for all but the
    /// finest step.
    pub successive: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub paths: usize,
    pub reference_level: usize,
    /// `(n, RMS of ‖u_n(T) − u_ref(T)‖_{L²})` for the coarser levels.
    pub spatial: Vec<(usize, f64)>,
    pub temporal: Vec<TemporalRow>,
    /// Fitted slope of the successive differences against `dt`.
    pub temporal_order: Option<f64>,
}

impl ConvergenceTable {
    pub fn spatial_strictly_decreasing(&self) -> bool {
        self.spatial.windows(2).all(|w| w[1].1 < w[0].1)
    }
}

impl fmt::Display for ConvergenceTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "# spatial self-convergence reference_n={} paths={} strictly_decreasing={}",
            self.reference_level,
            self.paths,
            self.spatial_strictly_decreasing()
        )?;
        writeln!(f, "n\terror")?;
        for (n, e) in &self.spatial {
            writeln!(f, "{n}\t{e:.10e}")?;
        }
        let order = self
            .temporal_order
            .map(|o| format!("{o:.4}"))
            .unwrap_or_else(|| "none".into());
        writeln!(f, "# temporal self-convergence fitted_order={order}")?;
        writeln!(f, "dt\terror_vs_finest\tsuccessive")?;
        for r in &self.temporal {
            let s = r.successive.map(|s| format!("{s:.10e}")).unwrap_or_else(|| "-".into());
            writeln!(f, "{:.6e}\t{:.10e}\t{s}", r.dt, r.error_vs_finest)?;
        }
        Ok(())
    }
}

fn rms(xs: &[f64]) -> f64 {
    (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Spatial errors against the finest level at `cfg.dt`, and temporal errors
/// at `cfg.lattice` against the smallest step. Steps must be integer
/// multiples of the smallest; noisy runs at different steps share one
/// Brownian path sampled at the smallest step.
pub fn galerkin_convergence(
    cfg: &SimConfig,
    levels: &[usize],
    dt_list: &[f64],
    paths: usize,
) -> Result<ConvergenceTable, SolverError> {
    let empty = |field: &'static str| SolverError::Config {
        field,
        message: "must not be empty".into(),
    };
    if levels.is_empty() {
        return Err(empty("study.levels"));
    }
    if dt_list.is_empty() {
        return Err(empty("study.dt"));
    }
    let paths = effective_paths(cfg, paths);

    let mut levels = levels.to_vec();
    levels.sort_unstable();
    levels.dedup();
    let reference_level = *levels.last().expect("non-empty");
    let level_cfgs: Vec<SimConfig> = levels
        .iter()
        .map(|&n| {
            let mut c = cfg.clone();
            c.lattice = WavenumberLattice::new(n)?;
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<_, SolverError>>()?;

    let mut dts = dt_list.to_vec();
    dts.sort_by(|a, b| b.total_cmp(a));
    dts.dedup();
    let dt_min = *dts.last().expect("non-empty");
    let dt_cfgs: Vec<SimConfig> = dts
        .iter()
        .map(|&dt| {
            let ratio = dt / dt_min;
            let r = ratio.round();
            if (ratio - r).abs() > 1e-9 * ratio {
                return Err(SolverError::Config {
                    field: "study.dt",
                    message: format!("{dt} is not an integer multiple of {dt_min}"),
                });
            }
            let mut c = cfg.clone();
            c.dt = dt;
            c.noise_refinement = cfg.noise_refinement * r as u32;
            NoisePath::with_refinement(0, c.noise_refinement)?;
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<_, SolverError>>()?;

    // per path: (spatial errors, temporal finals)
    let per_path: Vec<(Vec<f64>, Vec<SpectralField>)> = (0..paths as u64)
        .into_par_iter()
        .map(|i| -> Result<_, SolverError> {
            let finals: Vec<SpectralField> = level_cfgs
                .iter()
                .map(|c| final_velocity(&path_config(c, i)))
                .collect::<Result<_, _>>()?;
            let reference = finals.last().expect("non-empty");
            let spatial = finals[..finals.len() - 1]
                .iter()
                .map(|u| u.resample(reference.lattice()).sub(reference).l2_norm())
                .collect();
            let temporal = dt_cfgs
                .iter()
                .map(|c| final_velocity(&path_config(c, i)))
                .collect::<Result<_, _>>()?;
            Ok((spatial, temporal))
        })
        .collect::<Result<_, _>>()?;

    let spatial = levels[..levels.len() - 1]
        .iter()
        .enumerate()
        .map(|(j, &n)| (n, rms(&per_path.iter().map(|p| p.0[j]).collect::<Vec<_>>())))
        .collect();

    let last = dts.len() - 1;
    let temporal: Vec<TemporalRow> = dts
        .iter()
        .enumerate()
        .map(|(j, &dt)| {
            let vs_finest: Vec<f64> = per_path
                .iter()
                .map(|p| p.1[j].sub(&p.1[last]).l2_norm())
                .collect();
            let successive = (j < last).then(|| {
                rms(&per_path
                    .iter()
                    .map(|p| p.1[j].sub(&p.1[j + 1]).l2_norm())
                    .collect::<Vec<_>>())
            });
            TemporalRow {
                dt,
                error_vs_finest: rms(&vs_finest),
                successive,
            }
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = temporal
        .iter()
        .filter_map(|r| r.successive.map(|s| (r.dt, s)))
        .unzip();

    Ok(ConvergenceTable {
        paths,
        reference_level,
        spatial,
        temporal_order: fit_order(&xs, &ys),
        temporal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{CovarianceSpectrum, DiffusionFamily};
    use crate::ops::FractionalDissipation;
    use crate::solver::{InitialCondition, NoiseModel};

    fn base(alpha: f64, nu: f64, n: usize, dt: f64, horizon: f64) -> SimConfig {
        SimConfig::new(
            FractionalDissipation::new(alpha, nu).unwrap(),
            WavenumberLattice::new(n).unwrap(),
            dt,
            horizon,
            InitialCondition::Random { amplitude: 1.0, decay: 3.0, seed: 5 },
        )
    }

    #[test]
    fn fit_recovers_power_laws() {
        let xs = [0.1, 0.05, 0.025];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        assert!((fit_order(&xs, &ys).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(fit_order(&xs[..1], &ys[..1]), None);
        assert_eq!(fit_order(&xs, &[1.0, 0.0, 1.0]), None);
    }

    #[test]
    fn linear_dynamics_have_no_time_error() {
        let mut c = base(1.5, 1.0, 4, 0.02, 0.2);
        c.nonlinear = false;
        let t = galerkin_convergence(&c, &[4], &[0.02, 0.01, 0.005], 1).unwrap();
        let scale = final_velocity(&c).unwrap().l2_norm();
        // products of rounded exponentials: zero up to roundoff
        assert!(t.temporal.iter().all(|r| r.error_vs_finest < 1e-14 * scale), "{t}");
        assert!(t.spatial.is_empty());
    }

    #[test]
    fn deterministic_study_converges() {
        let c = base(1.5, 0.1, 8, 0.01, 0.2);
        let t = galerkin_convergence(&c, &[2, 4, 8], &[0.02, 0.01, 0.005], 1).unwrap();
        assert!(t.spatial_strictly_decreasing(), "{t}");
        let order = t.temporal_order.unwrap();
        assert!((order - 1.0).abs() < 0.15, "{t}");
        assert!(t.to_string().contains("fitted_order="));
    }

    #[test]
    fn study_arguments_are_checked() {
        let c = base(1.5, 0.1, 4, 0.01, 0.1);
        assert!(galerkin_convergence(&c, &[], &[0.01], 1).is_err());
        assert!(galerkin_convergence(&c, &[4], &[0.01, 0.003], 1).is_err());
        assert!(moment_bound_study(&c, &[4], 2, 3).is_err());
        assert!(moment_bound_study(&c, &[], 2, 2).is_err());
    }

    #[test]
    fn deterministic_moments_agree_across_levels() {
        let mut c = base(1.5, 0.5, 8, 0.01, 0.1);
        c.initial = InitialCondition::TaylorGreen { amplitude: 1.0 };
        let r = moment_bound_study(&c, &[8, 16], 10, 2).unwrap();
        assert_eq!(r.paths, 1);
        let (a, b) = (&r.levels[0], &r.levels[1]);
        assert!((a.sup_moment.0 - b.sup_moment.0).abs() < 1e-12 * a.sup_moment.0);
        assert!((a.dissipation.0 - b.dissipation.0).abs() < 1e-12 * a.dissipation.0);
        // Taylor-Green: |u|²_{H^1} = 2 |u|²_{L²} at t = 0, decaying afterwards
        let l2 = 2.0 * std::f64::consts::PI.powi(2);
        assert!((a.sup_moment.0 - 2.0 * l2).abs() < 1e-12 * l2);
        assert!(r.uniformly_bounded);
    }

    #[test]
    fn stochastic_moments_are_reproducible() {
        let mut c = base(1.5, 1.0, 4, 0.01, 0.05);
        c.noise = Some(NoiseModel {
            spectrum: CovarianceSpectrum::power_law(2.5).unwrap(),
            family: DiffusionFamily::Additive { sigma: 1.0 },
            seed: 3,
        });
        let a = moment_bound_study(&c, &[4], 8, 4).unwrap();
        let b = moment_bound_study(&c, &[4], 8, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.levels[0].sup_moment.1 > 0.0);
        assert!(a.to_string().lines().count() == 3);
    }
}
