use serde::{Deserialize, Serialize};

use crate::algebra::{DensityMatrix, StateVector};
use crate::error::{Error, Result};

/// Bose-Einstein occupation of the bosonic mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalSpec {
    pub nbar: f64,
    pub cutoff: usize,
}

pub const MAX_TAIL: f64 = 1e-8;

impl ThermalSpec {
    /// Checks that the probability mass beyond `cutoff` is below 1e-8.
    pub fn new(nbar: f64, cutoff: usize) -> Result<Self> {
        if !(nbar >= 0.0 && nbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("mean occupation must be non-negative, got {nbar}")));
        }
        let spec = ThermalSpec { nbar, cutoff };
        let tail = spec.tail_mass();
        if tail >= MAX_TAIL {
            return Err(Error::ThermalTail { tail, cutoff });
        }
        Ok(spec)
    }

    /// Smallest cutoff whose tail passes the construction check.
    pub fn minimal(nbar: f64) -> Result<Self> {
        let mut cutoff = 0;
        loop {
            match Self::new(nbar, cutoff) {
                Ok(s) => return Ok(s),
                Err(Error::ThermalTail { .. }) if cutoff < 10_000 => cutoff += 1,
                Err(e) => return Err(e),
            }
        }
    }

    /// `p_n = nbar^n / (1 + nbar)^{n+1}` for `n = 0..=cutoff`.
    pub fn probabilities(&self) -> Vec<f64> {
        let ratio = self.nbar / (1.0 + self.nbar);
        let p0 = 1.0 / (1.0 + self.nbar);
        (0..=self.cutoff).map(|n| p0 * ratio.powi(n as i32)).collect()
    }

    /// Probability mass with more than `cutoff` quanta.
    pub fn tail_mass(&self) -> f64 {
        (self.nbar / (1.0 + self.nbar)).powi(self.cutoff as i32 + 1)
    }
}

/// `|atoms><atoms| x sum_n p_n |n><n|`, not renormalized after truncation.
pub fn thermal_state(atoms: &StateVector, spec: &ThermalSpec) -> Result<DensityMatrix> {
    let members = thermal_ensemble(atoms, spec)?;
    let space = *members[0].1.space();
    let rho = DensityMatrix::from_ensemble(space, &members)?;
    rho.validate(MAX_TAIL)?;
    Ok(rho)
}

/// The thermal state as weighted pure states `(p_n, atoms x |n>)`.
pub fn thermal_ensemble(atoms: &StateVector, spec: &ThermalSpec) -> Result<Vec<(f64, StateVector)>> {
    let spec = ThermalSpec::new(spec.nbar, spec.cutoff)?;
    spec.probabilities()
        .into_iter()
        .enumerate()
        .map(|(n, p)| Ok((p, atoms.with_fock(spec.cutoff, n)?)))
        .collect()
}
