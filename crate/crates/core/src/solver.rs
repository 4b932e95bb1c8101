//! Exponential Euler–Maruyama time stepping of the Galerkin system in
//! velocity and vorticity form.
//!
//! Per step and mode, `û ← e^{−ν|k|^α dt} [û + dt·B̂(u) + (G(u) ΔW)^]`; the
//! noise is evaluated at the left endpoint (Itô). After each step the
//! monitor norm is compared to its threshold; the first exceedance stops the
//! run and freezes the state.

use std::path::PathBuf;

use num_complex::Complex64;
use thiserror::Error;

use crate::diagnostics::{accumulate, DiagnosticsRecord};
use crate::noise::{apply_g, vorticity_noise, CovarianceSpectrum, DiffusionFamily, NoiseError, NoisePath};
use crate::ops::{
    advection, biot_savart, curl2d, leray_project, nonlinear_term_b, random_solenoidal,
    sobolev_norm, FractionalDissipation, OpsError, SobolevIndex,
};
use crate::spectral_field::{analyze, FieldError, PhysicalGrid, SpectralField, WavenumberLattice};

/// Bound on `dt · ν · (n√2)^α`, the largest decay exponent per step.
pub const STABILITY_LIMIT: f64 = 50.0;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("{field}: {message}")]
    Config { field: &'static str, message: String },
    #[error("non-finite coefficient at t = {t}")]
    Overflow { t: f64 },
    #[error(transparent)]
    Ops(#[from] OpsError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn config_error(field: &'static str, message: impl Into<String>) -> SolverError {
    SolverError::Config {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    Velocity,
    Vorticity,
    /// Both forms side by side, driven by the same increments.
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// `A (sin x1 cos x2, −cos x1 sin x2)`.
    TaylorGreen { amplitude: f64 },
    /// `A (0, cos(m x1))`.
    Shear { amplitude: f64, wavenumber: i32 },
    /// Divergence-free Gaussian field with coefficient scale `A |k|^-decay`.
    Random { amplitude: f64, decay: f64, seed: u64 },
    /// A snapshot file, truncated or zero-padded to the run's level.
    File(PathBuf),
}

impl InitialCondition {
    pub fn build(&self, lattice: WavenumberLattice) -> Result<SpectralField, SolverError> {
        let u0 = match self {
            InitialCondition::TaylorGreen { amplitude } => {
                let a = *amplitude;
                let grid = PhysicalGrid::from_fn(8, 2, |c, x1, x2| {
                    if c == 0 {
                        a * x1.sin() * x2.cos()
                    } else {
                        -a * x1.cos() * x2.sin()
                    }
                });
                analyze(&grid, WavenumberLattice::new(1)?)?
            }
            InitialCondition::Shear {
                amplitude,
                wavenumber,
            } => {
                let m = wavenumber.unsigned_abs() as usize;
                if m == 0 {
                    return Err(config_error("initial.wavenumber", "must be non-zero"));
                }
                let l = WavenumberLattice::new(m)?;
                let mut u = SpectralField::zeros(l, 2);
                u.set_pair(
                    1,
                    crate::spectral_field::Mode::new(*wavenumber, 0),
                    Complex64::new(amplitude / 2.0, 0.0),
                );
                u
            }
            InitialCondition::Random {
                amplitude,
                decay,
                seed,
            } => random_solenoidal(lattice, *decay, *seed).scaled(*amplitude),
            InitialCondition::File(path) => {
                let file = std::fs::File::open(path).map_err(|source| SolverError::Io {
                    path: path.clone(),
                    source,
                })?;
                let f = SpectralField::read_snapshot(std::io::BufReader::new(file))?;
                match f.components() {
                    2 => f,
                    1 => biot_savart(&f),
                    c => {
                        return Err(FieldError::WrongComponents {
                            expected: 2,
                            got: c,
                        }
                        .into())
                    }
                }
            }
        };
        Ok(project_initial(&u0, lattice))
    }
}

/// Stochastic forcing: covariance, diffusion family and path seed.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub spectrum: CovarianceSpectrum,
    pub family: DiffusionFamily,
    pub seed: u64,
}

/// Blow-up monitor: stop once `|u|_{H^{β,q}}` exceeds `threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monitor {
    pub index: SobolevIndex,
    pub threshold: f64,
}

impl Monitor {
    /// `H^{(d+2−α)/4, 2}` with threshold `1e6`.
    pub fn default_for(alpha: f64) -> Self {
        Monitor {
            index: SobolevIndex::l2((4.0 - alpha) / 4.0),
            threshold: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub diss: FractionalDissipation,
    pub lattice: WavenumberLattice,
    pub dt: f64,
    pub horizon: f64,
    pub nonlinear: bool,
    pub noise: Option<NoiseModel>,
    /// Fine noise steps per solver step; see [`NoisePath`].
    pub noise_refinement: u32,
    pub initial: InitialCondition,
    pub monitor: Monitor,
    pub formulation: Formulation,
    pub record_stride: usize,
    /// Integrability of the gradient norm in the diagnostics.
    pub grad_q: f64,
}

impl SimConfig {
    /// A deterministic velocity run with default monitor and diagnostics.
    pub fn new(
        diss: FractionalDissipation,
        lattice: WavenumberLattice,
        dt: f64,
        horizon: f64,
        initial: InitialCondition,
    ) -> Self {
        SimConfig {
            diss,
            lattice,
            dt,
            horizon,
            nonlinear: true,
            noise: None,
            noise_refinement: 1,
            initial,
            monitor: Monitor::default_for(diss.alpha()),
            formulation: Formulation::Velocity,
            record_stride: 1,
            grad_q: 4.0,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(config_error("grid.dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(config_error(
                "grid.horizon",
                format!("must be non-negative, got {}", self.horizon),
            ));
        }
        if self.horizon > 0.0 && self.dt > self.horizon {
            return Err(config_error(
                "grid.dt",
                format!("{} exceeds the horizon {}", self.dt, self.horizon),
            ));
        }
        self.steps()?;
        let worst = self.dt
            * self.diss.nu()
            * (self.lattice.level() as f64 * std::f64::consts::SQRT_2).powf(self.diss.alpha());
        if worst > STABILITY_LIMIT {
            return Err(config_error(
                "grid.dt",
                format!("dt·nu·(n√2)^alpha = {worst:.4} exceeds {STABILITY_LIMIT}"),
            ));
        }
        if self.record_stride == 0 {
            return Err(config_error("grid.record_stride", "must be at least 1"));
        }
        if self.noise_refinement == 0 {
            return Err(config_error("noise.refinement", "must be at least 1"));
        }
        if !(self.monitor.threshold > 0.0) {
            return Err(config_error("monitor.threshold", "must be positive"));
        }
        if !(self.monitor.index.q > 1.0) {
            return Err(config_error("monitor.q", "must exceed 1"));
        }
        if !(self.grad_q > 1.0) {
            return Err(config_error("monitor.grad_q", "must exceed 1"));
        }
        if let Some(noise) = &self.noise {
            noise.family.validate()?;
        }
        Ok(())
    }

    /// Number of steps to the horizon; the horizon must be a multiple of `dt`.
    pub fn steps(&self) -> Result<u64, SolverError> {
        let ratio = self.horizon / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(config_error(
                "grid.horizon",
                format!("{} is not a multiple of dt = {}", self.horizon, self.dt),
            ));
        }
        Ok(steps as u64)
    }

    fn path(&self) -> Option<(NoisePath, &NoiseModel)> {
        self.noise.as_ref().map(|m| {
            (
                NoisePath::with_refinement(m.seed, self.noise_refinement).expect("validated"),
                m,
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: f64,
    pub step: u64,
    pub u: Option<SpectralField>,
    pub theta: Option<SpectralField>,
    /// Stopping time, once the monitor has fired.
    pub stopped_at: Option<f64>,
}

impl SolverState {
    pub fn initial(cfg: &SimConfig) -> Result<Self, SolverError> {
        let u0 = cfg.initial.build(cfg.lattice)?;
        Ok(Self::from_velocity(u0, cfg.formulation))
    }

    pub fn from_velocity(u0: SpectralField, formulation: Formulation) -> Self {
        let (u, theta) = match formulation {
            Formulation::Velocity => (Some(u0), None),
            Formulation::Vorticity => (None, Some(curl2d(&u0))),
            Formulation::Both => {
                let th = curl2d(&u0);
                (Some(u0), Some(th))
            }
        };
        SolverState {
            t: 0.0,
            step: 0,
            u,
            theta,
            stopped_at: None,
        }
    }

    /// The velocity, recovered from the vorticity when only that is evolved.
    pub fn velocity(&self) -> SpectralField {
        match (&self.u, &self.theta) {
            (Some(u), _) => u.clone(),
            (None, Some(th)) => biot_savart(th),
            (None, None) => unreachable!("state carries at least one field"),
        }
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped_at.is_some()
    }
}

/// `Π P_n u0`.
pub fn project_initial(u0: &SpectralField, lattice: WavenumberLattice) -> SpectralField {
    leray_project(&u0.resample(lattice))
}

/// `e^{−ν|k|^α dt}` for every mode, in lattice order.
pub fn decay_factors(diss: &FractionalDissipation, lattice: WavenumberLattice, dt: f64) -> Vec<f64> {
    lattice.modes().map(|k| (-diss.rate(k) * dt).exp()).collect()
}

fn apply_factors(f: &mut SpectralField, factors: &[f64]) {
    for c in 0..f.components() {
        for (z, &e) in f.component_mut(c).iter_mut().zip(factors) {
            *z *= e;
        }
    }
}

fn check_finite(f: &SpectralField, t: f64) -> Result<(), SolverError> {
    if f.is_finite() {
        Ok(())
    } else {
        Err(SolverError::Overflow { t })
    }
}

/// One exponential Euler–Maruyama step of the velocity form.
pub fn velocity_update(
    u: &SpectralField,
    cfg: &SimConfig,
    dt: f64,
    dw: Option<&SpectralField>,
) -> SpectralField {
    let lattice = u.lattice();
    let mut rhs = u.clone();
    if cfg.nonlinear && dt > 0.0 {
        rhs.axpy(dt, &nonlinear_term_b(u, u, lattice));
    }
    if let (Some(dw), Some(noise)) = (dw, &cfg.noise) {
        rhs.axpy(1.0, &apply_g(&noise.family, u, dw));
    }
    apply_factors(&mut rhs, &decay_factors(&cfg.diss, lattice, dt));
    rhs
}

/// One exponential Euler–Maruyama step of the vorticity form.
pub fn vorticity_update(
    theta: &SpectralField,
    cfg: &SimConfig,
    dt: f64,
    dw: Option<&SpectralField>,
) -> SpectralField {
    let lattice = theta.lattice();
    let mut rhs = theta.clone();
    if cfg.nonlinear && dt > 0.0 {
        let u = biot_savart(theta);
        rhs.axpy(dt, &advection(&u, theta, lattice));
    }
    if let (Some(dw), Some(noise)) = (dw, &cfg.noise) {
        rhs.axpy(1.0, &vorticity_noise(&noise.family, theta, dw));
    }
    apply_factors(&mut rhs, &decay_factors(&cfg.diss, lattice, dt));
    rhs
}

fn monitor_value(state: &SolverState, cfg: &SimConfig) -> Result<f64, SolverError> {
    Ok(sobolev_norm(&state.velocity(), cfg.monitor.index, None)?)
}

fn finish_step(mut next: SolverState, cfg: &SimConfig, dt: f64) -> Result<SolverState, SolverError> {
    next.t += dt;
    next.step += 1;
    if monitor_value(&next, cfg)? > cfg.monitor.threshold {
        next.stopped_at = Some(next.t);
    }
    Ok(next)
}

/// Advances the velocity of `state` by `cfg.dt`; a stopped state is returned
/// unchanged.
pub fn step_velocity(
    state: &SolverState,
    cfg: &SimConfig,
    dw: Option<&SpectralField>,
) -> Result<SolverState, SolverError> {
    step_velocity_by(state, cfg, cfg.dt, dw)
}

/// As [`step_velocity`] with an explicit step length.
pub fn step_velocity_by(
    state: &SolverState,
    cfg: &SimConfig,
    dt: f64,
    dw: Option<&SpectralField>,
) -> Result<SolverState, SolverError> {
    if state.is_stopped() {
        return Ok(state.clone());
    }
    let u = state
        .u
        .as_ref()
        .ok_or_else(|| config_error("physics.formulation", "state has no velocity"))?;
    let next_u = velocity_update(u, cfg, dt, dw);
    check_finite(&next_u, state.t + dt)?;
    let next = SolverState {
        u: Some(next_u),
        ..state.clone()
    };
    finish_step(next, cfg, dt)
}

/// Advances the vorticity of `state` by `cfg.dt`.
pub fn step_vorticity(
    state: &SolverState,
    cfg: &SimConfig,
    dw: Option<&SpectralField>,
) -> Result<SolverState, SolverError> {
    if state.is_stopped() {
        return Ok(state.clone());
    }
    let theta = state
        .theta
        .as_ref()
        .ok_or_else(|| config_error("physics.formulation", "state has no vorticity"))?;
    let next_theta = vorticity_update(theta, cfg, cfg.dt, dw);
    check_finite(&next_theta, state.t + cfg.dt)?;
    let next = SolverState {
        theta: Some(next_theta),
        ..state.clone()
    };
    finish_step(next, cfg, cfg.dt)
}

/// Advances every field the state carries, sharing one increment.
pub fn step(
    state: &SolverState,
    cfg: &SimConfig,
    dw: Option<&SpectralField>,
) -> Result<SolverState, SolverError> {
    if state.is_stopped() {
        return Ok(state.clone());
    }
    let dt = cfg.dt;
    let mut next = state.clone();
    if let Some(u) = &state.u {
        let v = velocity_update(u, cfg, dt, dw);
        check_finite(&v, state.t + dt)?;
        next.u = Some(v);
    }
    if let Some(th) = &state.theta {
        let v = vorticity_update(th, cfg, dt, dw);
        check_finite(&v, state.t + dt)?;
        next.theta = Some(v);
    }
    finish_step(next, cfg, dt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    pub state: SolverState,
}

impl RunOutput {
    pub fn stopped_at(&self) -> Option<f64> {
        self.state.stopped_at
    }
}

/// Marches to the horizon, recording every `record_stride` steps and at the
/// end. `observer` sees the state after every step.
pub fn run_observed(
    cfg: &SimConfig,
    mut observer: impl FnMut(&SolverState) -> Result<(), SolverError>,
) -> Result<RunOutput, SolverError> {
    cfg.validate()?;
    let mut state = SolverState::initial(cfg)?;
    let steps = cfg.steps()?;
    let mut records = Vec::new();
    if steps == 0 {
        return Ok(RunOutput { records, state });
    }
    let path = cfg.path();
    let mut current = DiagnosticsRecord::initial(&state, cfg)?;
    for j in 0..steps {
        if !state.is_stopped() {
            let dw = path
                .as_ref()
                .map(|(p, m)| p.increment(j, cfg.lattice, &m.spectrum, cfg.dt));
            let next = step(&state, cfg, dw.as_ref())?;
            current = accumulate(&current, &next, cfg)?;
            state = next;
            observer(&state)?;
        } else {
            current.t = (j + 1) as f64 * cfg.dt;
        }
        if (j + 1) % cfg.record_stride as u64 == 0 || j + 1 == steps {
            records.push(current.clone());
        }
    }
    Ok(RunOutput { records, state })
}

pub fn run(cfg: &SimConfig) -> Result<RunOutput, SolverError> {
    run_observed(cfg, |_| Ok(()))
}

/// The final velocity of a run, without diagnostics.
pub fn final_velocity(cfg: &SimConfig) -> Result<SpectralField, SolverError> {
    cfg.validate()?;
    let mut state = SolverState::initial(cfg)?;
    let path = cfg.path();
    for j in 0..cfg.steps()? {
        let dw = path
            .as_ref()
            .map(|(p, m)| p.increment(j, cfg.lattice, &m.spectrum, cfg.dt));
        state = step(&state, cfg, dw.as_ref())?;
    }
    Ok(state.velocity())
}

/// `‖u_a(t) − u_b(t)‖_{L²}` at `t = 0, dt, ..., T` for two velocity runs
/// driven by the same increments.
pub fn coupled_pair_run(
    cfg: &SimConfig,
    u0_a: &SpectralField,
    u0_b: &SpectralField,
) -> Result<Vec<(f64, f64)>, SolverError> {
    cfg.validate()?;
    let mut a = SolverState::from_velocity(project_initial(u0_a, cfg.lattice), Formulation::Velocity);
    let mut b = SolverState::from_velocity(project_initial(u0_b, cfg.lattice), Formulation::Velocity);
    let distance = |a: &SolverState, b: &SolverState| a.velocity().sub(&b.velocity()).l2_norm();
    let mut out = vec![(0.0, distance(&a, &b))];
    let path = cfg.path();
    for j in 0..cfg.steps()? {
        let dw = path
            .as_ref()
            .map(|(p, m)| p.increment(j, cfg.lattice, &m.spectrum, cfg.dt));
        a = step_velocity(&a, cfg, dw.as_ref())?;
        b = step_velocity(&b, cfg, dw.as_ref())?;
        out.push((a.t, distance(&a, &b)));
    }
    Ok(out)
}
