use nalgebra::DMatrix;

use crate::algebra::{local, DensityMatrix, Operator, Space, StateVector};
use crate::error::{Error, Result};
use crate::C64;

/// Single-atom carrier rotation `exp(-i Omega tau (S^+ + S^-))`; identity on
/// `f` and `h`.
pub fn carrier_rotation(atom_dim: usize, omega: f64, tau: f64) -> DMatrix<C64> {
    let mut m = DMatrix::identity(atom_dim, atom_dim);
    let (s, c) = (omega * tau).sin_cos();
    m[(0, 0)] = C64::new(c, 0.0);
    m[(1, 1)] = C64::new(c, 0.0);
    m[(0, 1)] = C64::new(0.0, -s);
    m[(1, 0)] = C64::new(0.0, -s);
    m
}

/// `U(t) = exp(-i H0 t) exp(-i H_e t)` with `H0 = 2 Omega S_x` and
/// `H_e = 2 lambda S_x^2`.
///
/// Both generators are diagonal in the product eigenbasis of the single-atom
/// `s_x`, so the propagator is applied as a local basis change, a diagonal
/// phase `exp(-i (2 Omega M + 2 lambda M^2) t)` with `M` the total `S_x`
/// eigenvalue, and the inverse basis change. The mode index is a pure
/// spectator.
#[derive(Clone, Debug)]
pub struct EffectivePropagator {
    atoms: Space,
    basis: DMatrix<C64>,
    basis_adj: DMatrix<C64>,
    phases: Vec<C64>,
}

impl EffectivePropagator {
    pub fn new(space: &Space, lambda: f64, omega: f64, t: f64) -> Result<Self> {
        if !(lambda.is_finite() && omega.is_finite() && t.is_finite()) {
            return Err(Error::InvalidParameter("effective propagator needs finite lambda, Omega and t".into()));
        }
        let atoms = space.atoms_only();
        let (basis, local_vals) = local::sx_eigenbasis(atoms.atom_dim());
        let phases = (0..atoms.dim())
            .map(|i| {
                let (levels, _) = atoms.decode(i);
                let m: f64 = levels.iter().map(|&l| local_vals[l]).sum();
                C64::from_polar(1.0, -(2.0 * omega * m + 2.0 * lambda * m * m) * t)
            })
            .collect();
        Ok(EffectivePropagator { atoms, basis_adj: basis.adjoint(), basis, phases })
    }

    fn check(&self, space: &Space) -> Result<()> {
        if !space.same_atoms(&self.atoms) {
            return Err(Error::Shape { expected: self.atoms.to_string(), found: space.to_string() });
        }
        Ok(())
    }

    fn apply_slice(&self, space: &Space, amps: &mut [C64]) -> Result<()> {
        local::apply_local_all(space, &self.basis_adj, amps)?;
        let m = space.mode_dim();
        for (block, phase) in amps.chunks_mut(m).zip(&self.phases) {
            block.iter_mut().for_each(|a| *a *= phase);
        }
        local::apply_local_all(space, &self.basis, amps)
    }

    pub fn apply(&self, state: &mut StateVector) -> Result<()> {
        let space = *state.space();
        self.check(&space)?;
        self.apply_slice(&space, state.amplitudes_mut().as_mut_slice())
    }

    pub fn apply_density(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let space = *rho.space();
        self.check(&space)?;
        let mut m = rho.matrix().clone();
        for c in 0..space.dim() {
            self.apply_slice(&space, m.column_mut(c).as_mut_slice())?;
        }
        let mut t = m.adjoint();
        for c in 0..space.dim() {
            self.apply_slice(&space, t.column_mut(c).as_mut_slice())?;
        }
        DensityMatrix::new_unchecked(space, t.adjoint())
    }

    /// Dense matrix on `space` (which may carry a mode).
    pub fn to_operator(&self, space: &Space) -> Result<Operator> {
        self.check(space)?;
        let d = space.dim();
        let mut m = DMatrix::<C64>::identity(d, d);
        for c in 0..d {
            self.apply_slice(space, m.column_mut(c).as_mut_slice())?;
        }
        Operator::new(*space, m)
    }
}

/// Factored effective evolution operator `exp(-i H0 t) exp(-i H_e t)`.
pub fn propagator_u(space: &Space, lambda: f64, omega: f64, t: f64) -> Result<Operator> {
    EffectivePropagator::new(space, lambda, omega, t)?.to_operator(space)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{expm::max_abs, make_space, Level};
    use crate::dynamics::{unitary, ExpmMethod};
    use crate::hamiltonians::{h0_drive, h_effective};
    use std::f64::consts::PI;

    #[test]
    fn matches_product_of_exponentials() {
        for (n, d, cutoff) in [(2, 2, 0), (3, 3, 0), (2, 4, 2)] {
            let s = make_space(n, d, cutoff, cutoff == 0).unwrap();
            let (lambda, omega, t) = (0.21, 1.7, 3.3);
            let u = propagator_u(&s, lambda, omega, t).unwrap();
            let a = unitary(&h0_drive(&s, omega).unwrap(), t, ExpmMethod::Eigen).unwrap();
            let b = unitary(&h_effective(&s, lambda).unwrap(), t, ExpmMethod::Eigen).unwrap();
            assert!(max_abs(&(u.matrix() - a * b)) < 1e-12);
            assert!(u.unitarity_error() < 1e-12);
        }
    }

    #[test]
    fn one_third_population_after_first_pulse() {
        let s = make_space(2, 3, 0, true).unwrap();
        let lambda = 0.025;
        let t = (1.0 / 3f64.sqrt()).asin() / lambda;
        let omega = 2.0 * PI / t;
        let u = propagator_u(&s, lambda, omega, t).unwrap();
        let gg = s.uniform_index(Level::G, 0).unwrap();
        let ee = s.uniform_index(Level::E, 0).unwrap();
        assert!((u.element(ee, gg).norm_sqr() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn quarter_period_closed_form() {
        let s = make_space(2, 2, 0, true).unwrap();
        let lambda = 0.5;
        let t = PI / (4.0 * lambda);
        let mut psi = StateVector::uniform(s, Level::G, 0).unwrap();
        EffectivePropagator::new(&s, lambda, 0.0, t).unwrap().apply(&mut psi).unwrap();
        let ph = C64::from_polar(std::f64::consts::FRAC_1_SQRT_2, -PI / 4.0);
        assert!((psi.amplitude(0) - ph).norm() < 1e-14);
        assert!((psi.amplitude(3) - ph * C64::new(0.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn carrier_matches_drive_exponential() {
        let s = make_space(1, 4, 0, true).unwrap();
        let u = unitary(&h0_drive(&s, 0.9).unwrap(), 1.3, ExpmMethod::Eigen).unwrap();
        assert!(max_abs(&(u - carrier_rotation(4, 0.9, 1.3))) < 1e-14);
    }
}
