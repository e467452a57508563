use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{krylov, ode, IntegratorConfig, HARD_DRIFT};
use crate::algebra::{boson_ops, DensityMatrix, SparseMatrix};
use crate::error::{Error, Result};
use crate::hamiltonians::TimeDependentHamiltonian;
use crate::C64;

/// Krylov subspace size for constant generators.
const KRYLOV_DIM: usize = 40;

/// Cavity energy decay into a thermal bath.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecaySpec {
    pub kappa: f64,
    pub nbar_bath: f64,
}

impl DecaySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("decay rate must be non-negative, got {}", self.kappa)));
        }
        if !(self.nbar_bath >= 0.0 && self.nbar_bath.is_finite()) {
            return Err(Error::InvalidParameter(format!("bath occupation must be non-negative, got {}", self.nbar_bath)));
        }
        Ok(())
    }
}

struct Liouvillian<'a> {
    h: &'a TimeDependentHamiltonian,
    dim: usize,
    a: SparseMatrix,
    ad: SparseMatrix,
    /// diagonal of `a^+ a` and of `a a^+` (truncated)
    n_diag: Vec<f64>,
    m_diag: Vec<f64>,
    down: f64,
    up: f64,
    scratch: Vec<C64>,
    scratch2: Vec<C64>,
}

impl Liouvillian<'_> {
    /// `drho = -i [H, rho] + D_down(rho) + D_up(rho)` for Hermitian `rho`.
    fn eval(&mut self, t: f64, rho: &[C64], out: &mut [C64]) {
        let d = self.dim;
        let zero = C64::new(0.0, 0.0);
        // X = -i H rho;  -i[H, rho] = X + X^dagger
        self.scratch.iter_mut().for_each(|v| *v = zero);
        self.h.mul_dense_add(t, C64::new(0.0, -1.0), rho, d, &mut self.scratch);
        for j in 0..d {
            for i in 0..d {
                out[j * d + i] = self.scratch[j * d + i] + self.scratch[i * d + j].conj();
            }
        }
        if self.down > 0.0 {
            Self::dissipate(d, &self.a, &self.n_diag, self.down, rho, out, &mut self.scratch, &mut self.scratch2);
        }
        if self.up > 0.0 {
            Self::dissipate(d, &self.ad, &self.m_diag, self.up, rho, out, &mut self.scratch, &mut self.scratch2);
        }
    }

    /// `rate (L rho L^+ - 1/2 {L^+ L, rho})` with `L^+ L` diagonal.
    #[allow(clippy::too_many_arguments)]
    fn dissipate(d: usize, l: &SparseMatrix, ll_diag: &[f64], rate: f64, rho: &[C64], out: &mut [C64], y: &mut [C64], z: &mut [C64]) {
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        // Y = L rho, then L rho L^+ = L Y^+
        y.iter_mut().for_each(|v| *v = zero);
        l.mul_dense_add(one, rho, d, y);
        for j in 0..d {
            for i in 0..d {
                z[j * d + i] = y[i * d + j].conj();
            }
        }
        y.iter_mut().for_each(|v| *v = zero);
        l.mul_dense_add(one, z, d, y);
        for j in 0..d {
            for i in 0..d {
                let k = j * d + i;
                out[k] += (y[k] - rho[k] * (0.5 * (ll_diag[i] + ll_diag[j]))) * rate;
            }
        }
    }
}

/// Master equation with collapse operators `sqrt(kappa (1 + n_b)) a` and
/// `sqrt(kappa n_b) a^+`.
pub fn evolve_lindblad(
    h: &TimeDependentHamiltonian,
    decay: &DecaySpec,
    rho: &DensityMatrix,
    t0: f64,
    t1: f64,
    config: &IntegratorConfig,
) -> Result<DensityMatrix> {
    config.validate()?;
    decay.validate()?;
    let space = *rho.space();
    if h.space() != &space {
        return Err(Error::Shape { expected: h.space().to_string(), found: space.to_string() });
    }
    if t1 < t0 {
        return Err(Error::InvalidParameter(format!("end time {t1} precedes start time {t0}")));
    }
    let d = space.dim();
    let (a, ad, n_diag, m_diag) = if space.has_mode() {
        let (a, ad) = boson_ops(&space)?;
        let n_diag = (ad.matrix() * a.matrix()).diagonal().iter().map(|z| z.re).collect();
        let m_diag = (a.matrix() * ad.matrix()).diagonal().iter().map(|z| z.re).collect();
        (a.to_sparse(), ad.to_sparse(), n_diag, m_diag)
    } else if decay.kappa == 0.0 {
        let z = SparseMatrix::from_dense(&DMatrix::zeros(d, d));
        (z.clone(), z, vec![0.0; d], vec![0.0; d])
    } else {
        return Err(Error::NoMode);
    };
    let mut liou = Liouvillian {
        h,
        dim: d,
        a,
        ad,
        n_diag,
        m_diag,
        down: decay.kappa * (1.0 + decay.nbar_bath),
        up: decay.kappa * decay.nbar_bath,
        scratch: vec![C64::new(0.0, 0.0); d * d],
        scratch2: vec![C64::new(0.0, 0.0); d * d],
    };

    let trace0 = rho.trace();
    let mut y: Vec<C64> = rho.matrix().as_slice().to_vec();
    let leak = config.leakage_tol.filter(|_| space.has_mode());
    let m = space.mode_dim();
    let check = |t: f64, y: &[C64]| {
        if let Some(limit) = leak {
            let population: f64 = (0..d).filter(|i| i % m + 2 >= m).map(|i| y[i * d + i].re).sum();
            if population > limit {
                return Err(Error::Leakage { population, time: t });
            }
        }
        Ok(())
    };
    if h.is_time_independent() {
        // a constant generator is exponentiated directly
        y = krylov::expmv(|x, dx| liou.eval(t0, x, dx), &y, t1 - t0, config.rel_tol, KRYLOV_DIM, |t, y| check(t0 + t, y))?;
    } else {
        let tol = config.tolerances(h.max_frequency(), t1 - t0);
        ode::integrate(&mut y, t0, t1, &tol, |t, x, dx| liou.eval(t, x, dx), check)?;
    }

    let mut out = DMatrix::from_column_slice(d, d, &y);
    let drift = (out.trace().re - trace0).abs();
    if drift > HARD_DRIFT {
        return Err(Error::TraceDrift { drift, tolerance: HARD_DRIFT });
    }
    let herm = crate::algebra::expm::hermiticity_error(&out);
    if herm > 1e-9 {
        return Err(Error::InvalidDensity(format!("Hermiticity lost during integration ({herm:.3e})")));
    }
    out = (&out + out.adjoint()) * C64::new(0.5, 0.0);
    DensityMatrix::new_unchecked(space, out)
}

/// Mean occupation `Tr(a^+ a rho)`.
pub fn mean_occupation(rho: &DensityMatrix) -> Result<f64> {
    let (a, ad) = boson_ops(rho.space())?;
    Ok((ad.matrix() * a.matrix() * rho.matrix()).trace().re)
}
