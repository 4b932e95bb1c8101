//! Norms and time-integrated functionals along trajectories.
//!
//! The two accumulators are the Beale–Kato–Majda integral
//! `∫ |∇u|_{L^q}^{p}` with `p = 1/(1 − 2d/(αq))` and the Serrin integral
//! `∫ |u|_{H^{s,2}}^{r}` with `(r, s) = (4α/(3α−d−2), (d+2−α)/4)`. Both use
//! the left-endpoint rule at the solver step.

mod studies;

pub use studies::{
    fit_order, galerkin_convergence, moment_bound_study, ConvergenceTable, LevelMoments,
    MomentReport, TemporalRow,
};

use thiserror::Error;

use crate::ops::{energy_enstrophy, gradient_lq_norm, sobolev_norm, SobolevIndex};
use crate::solver::{SimConfig, SolverError, SolverState};

const DIM: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum ExponentError {
    #[error("BKM exponent needs alpha·q > 2d, got alpha = {alpha}, q = {q}, d = {d}")]
    Bkm { alpha: f64, q: f64, d: usize },
    #[error("Serrin exponent needs 3·alpha − d − 2 > 0, got alpha = {alpha}, d = {d}")]
    Serrin { alpha: f64, d: usize },
}

/// `1 / (1 − 2d/(α q))`; `q = ∞` gives 1.
pub fn bkm_exponent(alpha: f64, d: usize, q: f64) -> Result<f64, ExponentError> {
    if !(alpha * q > 2.0 * d as f64) {
        return Err(ExponentError::Bkm { alpha, q, d });
    }
    Ok(1.0 / (1.0 - 2.0 * d as f64 / (alpha * q)))
}

/// `(4α/(3α − d − 2), (d + 2 − α)/4)`: time exponent and spatial order.
pub fn serrin_exponent(alpha: f64, d: usize) -> Result<(f64, f64), ExponentError> {
    let d_f = d as f64;
    let gap = 3.0 * alpha - d_f - 2.0;
    if !(gap > 0.0) {
        return Err(ExponentError::Serrin { alpha, d });
    }
    Ok((4.0 * alpha / gap, (d_f + 2.0 - alpha) / 4.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `½ ‖u‖²_{L²}`.
    pub energy: f64,
    /// `‖∇u‖²_{L²}`.
    pub enstrophy: f64,
    pub h_alpha2: f64,
    pub h_serrin: f64,
    pub grad_lq: f64,
    pub monitor: f64,
    /// `None` when the exponent is undefined for the run's `(α, q)`.
    pub bkm_acc: Option<f64>,
    pub serrin_acc: Option<f64>,
    pub stopped: bool,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str =
        "t,energy,enstrophy,h_alpha2,h_serrin,grad_lq,monitor,bkm_acc,serrin_acc,stopped";

    /// Norms at the state's time with zeroed accumulators.
    pub fn initial(state: &SolverState, cfg: &SimConfig) -> Result<Self, SolverError> {
        let mut r = measure(state, cfg)?;
        r.bkm_acc = bkm_exponent(cfg.diss.alpha(), DIM, cfg.grad_q).ok().map(|_| 0.0);
        r.serrin_acc = serrin_exponent(cfg.diss.alpha(), DIM).ok().map(|_| 0.0);
        Ok(r)
    }

    /// Comma-separated values with 17 significant digits; undefined
    /// accumulators are empty.
    pub fn csv_row(&self) -> String {
        let g = |x: f64| format!("{x:.16e}");
        let opt = |x: Option<f64>| x.map(g).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            g(self.t),
            g(self.energy),
            g(self.enstrophy),
            g(self.h_alpha2),
            g(self.h_serrin),
            g(self.grad_lq),
            g(self.monitor),
            opt(self.bkm_acc),
            opt(self.serrin_acc),
            u8::from(self.stopped)
        )
    }
}

fn measure(state: &SolverState, cfg: &SimConfig) -> Result<DiagnosticsRecord, SolverError> {
    let u = state.velocity();
    let alpha = cfg.diss.alpha();
    let (energy, enstrophy) = energy_enstrophy(&u);
    let h = |beta: f64| sobolev_norm(&u, SobolevIndex::l2(beta), None);
    Ok(DiagnosticsRecord {
        t: state.t,
        energy,
        enstrophy,
        h_alpha2: h(alpha / 2.0)?,
        h_serrin: h((DIM as f64 + 2.0 - alpha) / 4.0)?,
        grad_lq: gradient_lq_norm(&u, cfg.grad_q, None)?,
        monitor: sobolev_norm(&u, cfg.monitor.index, None)?,
        bkm_acc: None,
        serrin_acc: None,
        stopped: state.is_stopped(),
    })
}

/// The record at `state`, with accumulators advanced from `prev` by the
/// left-endpoint rule.
pub fn accumulate(
    prev: &DiagnosticsRecord,
    state: &SolverState,
    cfg: &SimConfig,
) -> Result<DiagnosticsRecord, SolverError> {
    let dt = state.t - prev.t;
    let alpha = cfg.diss.alpha();
    let mut next = measure(state, cfg)?;
    next.bkm_acc = match (prev.bkm_acc, bkm_exponent(alpha, DIM, cfg.grad_q)) {
        (Some(acc), Ok(p)) => Some(acc + dt * prev.grad_lq.powf(p)),
        _ => None,
    };
    next.serrin_acc = match (prev.serrin_acc, serrin_exponent(alpha, DIM)) {
        (Some(acc), Ok((r, _))) => Some(acc + dt * prev.h_serrin.powf(r)),
        _ => None,
    };
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::FractionalDissipation;
    use crate::solver::{run, InitialCondition};
    use crate::spectral_field::WavenumberLattice;

    #[test]
    fn exponent_table() {
        let bkm = [
            (2.0, 2, 4.0, 2.0),
            (2.0, 2, f64::INFINITY, 1.0),
            (1.5, 2, 4.0, 3.0),
            (2.0, 3, 6.0, 2.0),
            (1.0, 2, 8.0, 2.0),
        ];
        for (alpha, d, q, want) in bkm {
            let got = bkm_exponent(alpha, d, q).unwrap();
            assert!((got - want).abs() < 1e-14, "bkm({alpha}, {d}, {q}) = {got}");
        }
        let serrin = [
            (2.0, 2, (4.0, 0.5)),
            (3.0 / 2.0, 2, (12.0, 0.625)),
            (2.0, 3, (8.0, 0.75)),
            (1.6, 2, (8.0, 0.6)),
            (5.0 / 3.0, 2, (20.0 / 3.0, 7.0 / 12.0)),
        ];
        for (alpha, d, (r, s)) in serrin {
            let (gr, gs) = serrin_exponent(alpha, d).unwrap();
            assert!((gr - r).abs() < 1e-12 && (gs - s).abs() < 1e-15, "serrin({alpha}, {d})");
        }
    }

    #[test]
    fn exponent_gates() {
        assert_eq!(
            bkm_exponent(1.0, 2, 4.0),
            Err(ExponentError::Bkm { alpha: 1.0, q: 4.0, d: 2 })
        );
        assert!(bkm_exponent(1.0 + 1e-12, 2, 4.0).is_ok());
        assert_eq!(
            serrin_exponent(4.0 / 3.0, 2),
            Err(ExponentError::Serrin { alpha: 4.0 / 3.0, d: 2 })
        );
        assert!(serrin_exponent(4.0 / 3.0 + 1e-12, 2).is_ok());
        assert!(serrin_exponent(1.0, 3).is_err());
    }

    fn shear_run(alpha: f64, dt: f64, horizon: f64) -> (SimConfig, Vec<DiagnosticsRecord>) {
        let cfg = SimConfig::new(
            FractionalDissipation::new(alpha, 0.5).unwrap(),
            WavenumberLattice::new(4).unwrap(),
            dt,
            horizon,
            InitialCondition::Shear { amplitude: 1.0, wavenumber: 2 },
        );
        let out = run(&cfg).unwrap();
        (cfg, out.records)
    }

    #[test]
    fn zero_field_keeps_accumulators_at_zero() {
        let mut cfg = SimConfig::new(
            FractionalDissipation::new(1.5, 1.0).unwrap(),
            WavenumberLattice::new(4).unwrap(),
            0.01,
            0.05,
            InitialCondition::Random { amplitude: 0.0, decay: 1.0, seed: 0 },
        );
        cfg.monitor.threshold = 1.0;
        let out = run(&cfg).unwrap();
        for r in &out.records {
            assert_eq!((r.energy, r.enstrophy, r.grad_lq), (0.0, 0.0, 0.0));
            assert_eq!(r.bkm_acc, Some(0.0));
            assert_eq!(r.serrin_acc, Some(0.0));
        }
    }

    #[test]
    fn accumulators_are_monotone_and_enstrophy_is_h1() {
        let (_, records) = shear_run(1.5, 0.01, 0.3);
        for w in records.windows(2) {
            assert!(w[1].bkm_acc >= w[0].bkm_acc);
            assert!(w[1].serrin_acc >= w[0].serrin_acc);
            assert!(w[1].t > w[0].t);
        }
        let (_, records) = shear_run(1.0, 0.01, 0.1);
        assert!(records.iter().all(|r| r.bkm_acc.is_none() && r.serrin_acc.is_none()));
    }

    #[test]
    fn single_mode_integrals_match_closed_forms() {
        // u = (0, cos 2x1): |∇u|_{L^q} = 2 a_t |cos|_{L^q}, |u|_{H^s} = 2^s |u|_{L²}
        let alpha = 1.5;
        let horizon = 0.4;
        let mut errs = Vec::new();
        for dt in [0.01, 0.005] {
            let (cfg, records) = shear_run(alpha, dt, horizon);
            let last = records.last().unwrap();
            let rate = cfg.diss.nu() * 2f64.powf(alpha);
            let p = bkm_exponent(alpha, 2, 4.0).unwrap();
            // |cos|_{L^4(T²)} = ((2π)² · 3/8)^{1/4}
            let cos4 = (4.0 * std::f64::consts::PI.powi(2) * 3.0 / 8.0).powf(0.25);
            let g0 = 2.0 * cos4;
            let bkm = g0.powf(p) * (1.0 - (-p * rate * horizon).exp()) / (p * rate);
            let (r, s) = serrin_exponent(alpha, 2).unwrap();
            let h0 = 2f64.powf(s) * (2.0 * std::f64::consts::PI.powi(2)).sqrt();
            let serrin = h0.powf(r) * (1.0 - (-r * rate * horizon).exp()) / (r * rate);
            let e_b = (last.bkm_acc.unwrap() - bkm).abs() / bkm;
            let e_s = (last.serrin_acc.unwrap() - serrin).abs() / serrin;
            errs.push((e_b, e_s));
        }
        for (e_b, e_s) in &errs {
            assert!(*e_b < 0.05 && *e_s < 0.1, "{errs:?}");
        }
        // first order: halving dt roughly halves the error
        assert!((errs[0].0 / errs[1].0 - 2.0).abs() < 0.2);
        assert!((errs[0].1 / errs[1].1 - 2.0).abs() < 0.3);
    }

    #[test]
    fn csv_rows_round_trip_doubles() {
        let (_, records) = shear_run(1.5, 0.01, 0.02);
        let row = records[0].csv_row();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), DiagnosticsRecord::CSV_HEADER.split(',').count());
        assert_eq!(fields[1].parse::<f64>().unwrap(), records[0].energy);
    }
}
