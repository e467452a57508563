//! Propagators: adaptive Schrodinger integration, matrix-exponential
//! evolution, the factored effective propagator, the cavity-decay master
//! equation, and thermal initial states.

mod effective;
mod krylov;
mod lindblad;
mod ode;
mod thermal;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::{expm, top_fock_population, Operator, StateVector};
use crate::error::{Error, Result};
use crate::hamiltonians::TimeDependentHamiltonian;
use crate::C64;

pub use effective::{carrier_rotation, propagator_u, EffectivePropagator};
pub use lindblad::{evolve_lindblad, mean_occupation, DecaySpec};
pub use ode::StepStats;
pub use thermal::{thermal_ensemble, thermal_state, ThermalSpec};

/// Drift below this is treated as roundoff and silently renormalized.
pub const SILENT_RENORM: f64 = 1e-8;
/// Drift above this is an integrator failure.
pub const HARD_DRIFT: f64 = 1e-6;
/// Default bound on population in the two highest Fock levels.
pub const LEAKAGE_LIMIT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Step cap; `None` uses `2 pi / (20 w_max)` of the active Hamiltonian.
    pub max_step: Option<f64>,
    /// Fock-leakage bound checked after every accepted step; `None` disables it.
    pub leakage_tol: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { rel_tol: 1e-10, abs_tol: 1e-12, max_step: None, leakage_tol: Some(LEAKAGE_LIMIT) }
    }
}

impl IntegratorConfig {
    pub fn with_tolerance(rel_tol: f64, abs_tol: f64) -> Self {
        IntegratorConfig { rel_tol, abs_tol, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter("integrator tolerances must be positive".into()));
        }
        if let Some(s) = self.max_step {
            if !(s > 0.0) {
                return Err(Error::InvalidParameter("max_step must be positive".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn step_cap(&self, max_frequency: f64, span: f64) -> f64 {
        match self.max_step {
            Some(s) => s,
            None if max_frequency > 0.0 => 2.0 * PI / (20.0 * max_frequency),
            None => span.max(f64::MIN_POSITIVE),
        }
    }

    pub(crate) fn tolerances(&self, max_frequency: f64, span: f64) -> ode::Tolerances {
        ode::Tolerances { rel: self.rel_tol, abs: self.abs_tol, max_step: self.step_cap(max_frequency, span) }
    }
}

/// Apply the renormalization policy to a propagated vector whose norm should
/// be `target`.
pub(crate) fn settle_norm(amps: &mut [C64], target: f64) -> Result<()> {
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let drift = (norm - target).abs();
    if drift > HARD_DRIFT {
        return Err(Error::NormDrift { drift, tolerance: HARD_DRIFT });
    }
    if drift > SILENT_RENORM {
        log::warn!("renormalizing state after norm drift {drift:.3e}");
    }
    if norm > 0.0 {
        let s = target / norm;
        amps.iter_mut().for_each(|a| *a *= s);
    }
    Ok(())
}

/// Solve `i d|psi>/dt = H(t)|psi>` from `t0` to `t1` with adaptive stepping.
pub fn evolve_td(h: &TimeDependentHamiltonian, state: &StateVector, t0: f64, t1: f64, config: &IntegratorConfig) -> Result<StateVector> {
    evolve_td_with_stats(h, state, t0, t1, config).map(|(s, _)| s)
}

pub fn evolve_td_with_stats(
    h: &TimeDependentHamiltonian,
    state: &StateVector,
    t0: f64,
    t1: f64,
    config: &IntegratorConfig,
) -> Result<(StateVector, StepStats)> {
    config.validate()?;
    if h.space() != state.space() {
        return Err(Error::Shape { expected: h.space().to_string(), found: state.space().to_string() });
    }
    if t1 < t0 {
        return Err(Error::InvalidParameter(format!("end time {t1} precedes start time {t0}")));
    }
    let space = *state.space();
    let mut out = state.clone();
    let target = state.norm();
    let tol = config.tolerances(h.max_frequency(), t1 - t0);
    let leak = config.leakage_tol.filter(|_| space.has_mode());
    let stats = {
        let amps = out.amplitudes_mut().as_mut_slice();
        ode::integrate(
            amps,
            t0,
            t1,
            &tol,
            |t, x, dx| h.schrodinger_rhs(t, x, dx),
            |t, y| match leak {
                Some(limit) => {
                    let population = top_fock_population(&space, y);
                    if population > limit {
                        Err(Error::Leakage { population, time: t })
                    } else {
                        Ok(())
                    }
                }
                None => Ok(()),
            },
        )?
    };
    settle_norm(out.amplitudes_mut().as_mut_slice(), target)?;
    Ok((out, stats))
}

/// How `exp(-i H t)` is formed for time-independent evolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpmMethod {
    Eigen,
    ScalingSquaring,
}

/// `exp(-i H t)` as a dense matrix.
pub fn unitary(h: &Operator, duration: f64, method: ExpmMethod) -> Result<DMatrix<C64>> {
    h.check_hermitian(1e-10)?;
    Ok(match method {
        ExpmMethod::Eigen => expm::expm_hermitian(h.matrix(), duration)?,
        ExpmMethod::ScalingSquaring => expm::expm(&(h.matrix() * C64::new(0.0, -duration))),
    })
}

/// Apply `exp(-i H duration)` for a time-independent Hermitian `H`.
pub fn evolve_ti(h: &Operator, state: &StateVector, duration: f64) -> Result<StateVector> {
    evolve_ti_with(h, state, duration, ExpmMethod::Eigen)
}

pub fn evolve_ti_with(h: &Operator, state: &StateVector, duration: f64, method: ExpmMethod) -> Result<StateVector> {
    if h.space() != state.space() {
        return Err(Error::Shape { expected: h.space().to_string(), found: state.space().to_string() });
    }
    let u = unitary(h, duration, method)?;
    StateVector::from_amplitudes(*state.space(), u * state.amplitudes())
}
