//! Hamiltonian builders for the driven dispersive cavity and the two-laser
//! ion trap, in every frame used along the elimination chain.
//!
//! Cavity and drive couple only the `g <-> e` block; `f` and `h` are
//! spectators in all builders.
//!
//! Each time-dependent Hamiltonian is stored as a short list of fixed sparse
//! operators with scalar coefficients `c_k(tau) = A_k exp(i w_k tau)`, where
//! `tau` is the time since the start of the stage. Global-time phases from
//! earlier stages are folded into the amplitudes through `t_offset`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    collective, collective_sx, cr, embed_atom_op, local, mode_annihilation, normal_ordered, sideband_coefficient,
    Operator, Space, SparseMatrix,
};
use crate::error::{Error, Result};
use crate::C64;

/// Physical parameters of one drive stage, in angular-frequency units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriveParams {
    /// atom-cavity coupling
    pub g: f64,
    /// detuning of the cavity (or of the sideband lasers)
    pub delta: f64,
    /// classical-field Rabi frequency (cavity carrier, or ion laser)
    pub omega: f64,
    /// laser phase (ion only)
    pub phi: f64,
    /// Lamb-Dicke parameter (ion only)
    pub eta: f64,
    /// trap frequency (ion only)
    pub nu: f64,
    /// highest sideband-series index kept in the ion Hamiltonian
    pub lamb_dicke_order: usize,
}

impl Default for DriveParams {
    fn default() -> Self {
        DriveParams {
            g: 0.0,
            delta: 0.0,
            omega: 0.0,
            phi: std::f64::consts::FRAC_PI_2,
            eta: 0.0,
            nu: 0.0,
            lamb_dicke_order: 2,
        }
    }
}

impl DriveParams {
    pub fn cavity(g: f64, delta: f64, omega: f64) -> Self {
        DriveParams { g, delta, omega, ..Default::default() }
    }

    pub fn ion(omega: f64, eta: f64, delta: f64) -> Self {
        DriveParams { omega, eta, delta, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.g, self.delta, self.omega, self.phi, self.eta, self.nu];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("drive parameters must be finite".into()));
        }
        if self.g < 0.0 {
            return Err(Error::InvalidParameter(format!("coupling g must be non-negative, got {}", self.g)));
        }
        if self.omega < 0.0 {
            return Err(Error::InvalidParameter(format!("Rabi frequency must be non-negative, got {}", self.omega)));
        }
        if !(0.0..1.0).contains(&self.eta) {
            return Err(Error::InvalidParameter(format!("Lamb-Dicke parameter must lie in [0, 1), got {}", self.eta)));
        }
        if self.nu < 0.0 {
            return Err(Error::InvalidParameter(format!("trap frequency must be non-negative, got {}", self.nu)));
        }
        Ok(())
    }

    /// Fastest rate present in a stage driven with these parameters.
    pub fn max_frequency(&self, frame: FrameTag) -> f64 {
        let d = self.delta.abs();
        if frame.is_ion() {
            d.max(2.0 * self.eta * self.omega).max(self.nu)
        } else {
            let base = (2.0 * self.omega).max(d).max(self.g).max(self.nu);
            match frame {
                FrameTag::PlusMinusRotated => base.max(2.0 * self.omega + d),
                _ => base,
            }
        }
    }
}

/// Which Hamiltonian of the elimination chain a stage is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameTag {
    /// Driven Tavis-Cummings coupling in the interaction picture.
    InteractionPicture,
    /// Same, rotated by the carrier drive into the dressed `|+>, |->` basis.
    PlusMinusRotated,
    /// Rotated frame with the fast dressed-state terms dropped.
    SlowFrame,
    /// Photon-number-independent `2 lambda S_x^2`.
    Effective,
    /// Two-laser ion coupling with the sideband series.
    IonInteraction,
    /// Ion coupling to first order in the Lamb-Dicke parameter.
    IonLambDicke,
}

impl FrameTag {
    pub fn is_ion(self) -> bool {
        matches!(self, FrameTag::IonInteraction | FrameTag::IonLambDicke)
    }

    /// Frames whose state differs from the interaction picture by the carrier
    /// rotation `exp(-i H0 tau)`.
    pub fn rotates_with_carrier(self) -> bool {
        matches!(self, FrameTag::PlusMinusRotated | FrameTag::SlowFrame | FrameTag::Effective)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coefficient {
    Constant(C64),
    /// `amplitude * exp(i frequency tau)`
    Oscillating { amplitude: C64, frequency: f64 },
}

impl Coefficient {
    #[inline]
    pub fn at(&self, tau: f64) -> C64 {
        match *self {
            Coefficient::Constant(c) => c,
            Coefficient::Oscillating { amplitude, frequency } => amplitude * C64::from_polar(1.0, frequency * tau),
        }
    }

    fn oscillating(amplitude: C64, frequency: f64, t_offset: f64) -> Self {
        Coefficient::Oscillating { amplitude: amplitude * C64::from_polar(1.0, frequency * t_offset), frequency }
    }
}

/// `H(tau) = sum_k c_k(tau) H_k`
#[derive(Clone, Debug)]
pub struct TimeDependentHamiltonian {
    space: Space,
    terms: Vec<(Coefficient, SparseMatrix)>,
    max_frequency: f64,
}

impl TimeDependentHamiltonian {
    pub fn new(space: Space, max_frequency: f64) -> Self {
        TimeDependentHamiltonian { space, terms: Vec::new(), max_frequency }
    }

    pub fn constant(op: &Operator, max_frequency: f64) -> Self {
        let mut h = Self::new(*op.space(), max_frequency);
        h.push(Coefficient::Constant(cr(1.0)), op);
        h
    }

    pub fn push(&mut self, coefficient: Coefficient, op: &Operator) {
        let sparse = op.to_sparse();
        if sparse.nnz() > 0 {
            self.terms.push((coefficient, sparse));
        }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn max_frequency(&self) -> f64 {
        self.max_frequency
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn is_time_independent(&self) -> bool {
        self.terms.iter().all(|(c, _)| matches!(c, Coefficient::Constant(_)))
    }

    /// Dense snapshot at stage time `tau`.
    pub fn at(&self, tau: f64) -> Operator {
        let d = self.space.dim();
        let mut m = DMatrix::zeros(d, d);
        for (c, op) in &self.terms {
            m += op.to_dense() * c.at(tau);
        }
        Operator::new(self.space, m).expect("dimension fixed by construction")
    }

    /// `y = -i H(tau) x`
    #[inline]
    pub fn schrodinger_rhs(&self, tau: f64, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let minus_i = C64::new(0.0, -1.0);
        for (c, op) in &self.terms {
            op.mul_vec_add(minus_i * c.at(tau), x, y);
        }
    }

    /// `Y += alpha H(tau) X` for column-major `X` of `ncols` columns.
    pub fn mul_dense_add(&self, tau: f64, alpha: C64, x: &[C64], ncols: usize, y: &mut [C64]) {
        for (c, op) in &self.terms {
            op.mul_dense_add(alpha * c.at(tau), x, ncols, y);
        }
    }
}

fn require_mode(space: &Space) -> Result<()> {
    if space.has_mode() {
        Ok(())
    } else {
        Err(Error::NoMode)
    }
}

/// `A_atoms x M_mode` for a collective atomic operator and a mode matrix.
fn atom_mode_product(atoms: &Operator, mode: &DMatrix<C64>) -> Operator {
    let space = *atoms.space();
    let block = space.atom_block_dim();
    let m = space.mode_dim();
    let mut out = DMatrix::zeros(space.dim(), space.dim());
    let a = atoms.matrix();
    for i in (0..block * m).step_by(m) {
        for j in (0..block * m).step_by(m) {
            let v = a[(i, j)];
            if v != cr(0.0) {
                out.view_mut((i, j), (m, m)).copy_from(&(mode * v));
            }
        }
    }
    Operator::new(space, out).expect("same space")
}

fn atoms_only_collective(space: &Space, local_matrix: &DMatrix<C64>) -> Result<Operator> {
    // collective operator acting as identity on the mode
    collective(space, local_matrix)
}

/// Build the stage Hamiltonian for `frame` on `space`. `t_offset` is the
/// global time at which the stage starts.
pub fn hamiltonian_model(space: &Space, params: &DriveParams, frame: FrameTag, t_offset: f64) -> Result<TimeDependentHamiltonian> {
    params.validate()?;
    let d = space.atom_dim();
    let wmax = params.max_frequency(frame);
    let mut h = TimeDependentHamiltonian::new(*space, wmax);
    let (g, delta, omega) = (params.g, params.delta, params.omega);
    match frame {
        FrameTag::InteractionPicture => {
            require_mode(space)?;
            let a = mode_annihilation(space.fock_cutoff());
            let ad = a.adjoint();
            let s_minus = atoms_only_collective(space, &local::lowering(d))?;
            let s_plus = atoms_only_collective(space, &local::raising(d))?;
            h.push(Coefficient::oscillating(cr(g), -delta, t_offset), &atom_mode_product(&s_minus, &ad));
            h.push(Coefficient::oscillating(cr(g), delta, t_offset), &atom_mode_product(&s_plus, &a));
            h.push(Coefficient::Constant(cr(omega)), &(&s_plus + &s_minus));
        }
        FrameTag::PlusMinusRotated => {
            require_mode(space)?;
            let a = mode_annihilation(space.fock_cutoff());
            let ad = a.adjoint();
            let sz = atoms_only_collective(space, &local::sx(d))?;
            let sp = atoms_only_collective(space, &local::sigma_plus(d))?;
            let sm = atoms_only_collective(space, &local::sigma_minus(d))?;
            let w = 2.0 * omega;
            h.push(Coefficient::oscillating(cr(g), -delta, t_offset), &atom_mode_product(&sz, &ad));
            h.push(Coefficient::oscillating(cr(g), delta, t_offset), &atom_mode_product(&sz, &a));
            // dressed-state terms rotate at 2 Omega relative to the stage start
            let phase_minus = C64::from_polar(1.0, -delta * t_offset);
            let phase_plus = C64::from_polar(1.0, delta * t_offset);
            h.push(
                Coefficient::Oscillating { amplitude: phase_minus * (-0.5 * g), frequency: w - delta },
                &atom_mode_product(&sp, &ad),
            );
            h.push(
                Coefficient::Oscillating { amplitude: phase_minus * (0.5 * g), frequency: -w - delta },
                &atom_mode_product(&sm, &ad),
            );
            h.push(
                Coefficient::Oscillating { amplitude: phase_plus * (0.5 * g), frequency: w + delta },
                &atom_mode_product(&sp, &a),
            );
            h.push(
                Coefficient::Oscillating { amplitude: phase_plus * (-0.5 * g), frequency: delta - w },
                &atom_mode_product(&sm, &a),
            );
        }
        FrameTag::SlowFrame => {
            require_mode(space)?;
            let a = mode_annihilation(space.fock_cutoff());
            let ad = a.adjoint();
            let sx = collective_sx(space)?;
            h.push(Coefficient::oscillating(cr(g), -delta, t_offset), &atom_mode_product(&sx, &ad));
            h.push(Coefficient::oscillating(cr(g), delta, t_offset), &atom_mode_product(&sx, &a));
        }
        FrameTag::Effective => {
            let lambda = lambda_cavity(g, delta)?;
            h.push(Coefficient::Constant(cr(1.0)), &h_effective(space, lambda)?);
        }
        FrameTag::IonInteraction | FrameTag::IonLambDicke => {
            require_mode(space)?;
            let cutoff = space.fock_cutoff();
            let s_plus = atoms_only_collective(space, &local::raising(d))?;
            let (blue, red, prefactor) = if frame == FrameTag::IonLambDicke {
                let a = mode_annihilation(cutoff);
                let c = C64::new(0.0, params.eta);
                (a.adjoint() * c, a * c, 1.0)
            } else {
                let m = cutoff + 1;
                let mut blue = DMatrix::zeros(m, m);
                let mut red = DMatrix::zeros(m, m);
                for j in 0..=params.lamb_dicke_order {
                    let c = sideband_coefficient(params.eta, j);
                    blue += normal_ordered(cutoff, j + 1, j) * c;
                    red += normal_ordered(cutoff, j, j + 1) * c;
                }
                (blue, red, (-params.eta * params.eta / 2.0).exp())
            };
            let amp = C64::from_polar(omega * prefactor, -params.phi);
            let k_blue = atom_mode_product(&s_plus, &blue);
            let k_red = atom_mode_product(&s_plus, &red);
            h.push(Coefficient::oscillating(amp, -delta, t_offset), &k_blue);
            h.push(Coefficient::oscillating(amp.conj(), delta, t_offset), &k_blue.dagger());
            h.push(Coefficient::oscillating(amp, delta, t_offset), &k_red);
            h.push(Coefficient::oscillating(amp.conj(), -delta, t_offset), &k_red.dagger());
        }
    }
    Ok(h)
}

/// Driven Tavis-Cummings Hamiltonian in the interaction picture,
/// `sum_j [g (e^{-i delta t} a^+ S_j^- + e^{i delta t} a S_j^+) + Omega (S_j^+ + S_j^-)]`.
pub fn h_interaction(space: &Space, params: &DriveParams, t: f64) -> Result<Operator> {
    Ok(hamiltonian_model(space, params, FrameTag::InteractionPicture, 0.0)?.at(t))
}

/// Interaction Hamiltonian in the frame rotating with `H0 = 2 Omega sum_j sigma_{z,j}`,
/// written in the dressed basis. Equal to `e^{i H0 t} (H_i(t) - H0) e^{-i H0 t}`.
pub fn h_rotated(space: &Space, params: &DriveParams, t: f64) -> Result<Operator> {
    Ok(hamiltonian_model(space, params, FrameTag::PlusMinusRotated, 0.0)?.at(t))
}

/// Rotated-frame Hamiltonian without the terms oscillating at `2 Omega`:
/// `g (e^{-i delta t} a^+ + e^{i delta t} a) S_x`.
pub fn h_slow(space: &Space, params: &DriveParams, t: f64) -> Result<Operator> {
    Ok(hamiltonian_model(space, params, FrameTag::SlowFrame, 0.0)?.at(t))
}

/// Effective Hamiltonian assembled term by term,
/// `lambda [1/2 sum_j (|e_j><e_j| + |g_j><g_j|) + sum_{j<k} (S_j^+ S_k^+ + S_j^+ S_k^- + h.c.)]`.
/// Acts as the identity on any mode factor.
pub fn h_effective(space: &Space, lambda: f64) -> Result<Operator> {
    if !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be finite, got {lambda}")));
    }
    let d = space.atom_dim();
    let n = space.atom_count();
    let plus: Vec<Operator> = (0..n).map(|j| embed_atom_op(space, j, &local::raising(d))).collect::<Result<_>>()?;
    let minus: Vec<Operator> = (0..n).map(|j| embed_atom_op(space, j, &local::lowering(d))).collect::<Result<_>>()?;
    let mut total = collective(space, &local::ge_projector(d))?.scale(cr(0.5));
    for j in 0..n {
        for k in (j + 1)..n {
            let pair = &(&plus[j] * &plus[k]) + &(&plus[j] * &minus[k]);
            total = &total + &(&pair + &pair.dagger());
        }
    }
    Ok(total.scale(cr(lambda)))
}

/// Carrier drive `H0 = 2 Omega sum_j sigma_{z,j} = Omega sum_j (S_j^+ + S_j^-)`.
pub fn h0_drive(space: &Space, omega: f64) -> Result<Operator> {
    let d = space.atom_dim();
    Ok(collective(space, &(local::raising(d) + local::lowering(d)))?.scale(cr(omega)))
}

/// Ion Hamiltonian after the sideband approximation, either with the
/// truncated sideband series (`IonInteraction`) or to first order in `eta`
/// (`IonLambDicke`).
pub fn h_ion(space: &Space, params: &DriveParams, t: f64, frame: FrameTag) -> Result<Operator> {
    if !frame.is_ion() {
        return Err(Error::InvalidParameter(format!("{frame:?} is not an ion frame")));
    }
    Ok(hamiltonian_model(space, params, frame, 0.0)?.at(t))
}

/// `lambda = g^2 / (2 delta)`
pub fn lambda_cavity(g: f64, delta: f64) -> Result<f64> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::InvalidParameter("zero detuning: effective coupling undefined".into()));
    }
    Ok(g * g / (2.0 * delta))
}

/// `lambda = 2 Omega^2 eta^2 / delta`
pub fn lambda_ion(omega: f64, eta: f64, delta: f64) -> Result<f64> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::InvalidParameter("zero detuning: effective coupling undefined".into()));
    }
    Ok(2.0 * omega * omega * eta * eta / delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{boson_ops, embed_mode_op, expm::expm_hermitian, make_space, Level, StateVector};
    use std::f64::consts::PI;

    fn params() -> DriveParams {
        DriveParams { g: 0.8, delta: 3.1, omega: 7.3, ..Default::default() }
    }

    #[test]
    fn interaction_limits() {
        let s = make_space(2, 3, 3, false).unwrap();
        // g = 0: time-independent drive only
        let p = DriveParams { g: 0.0, ..params() };
        let h = h_interaction(&s, &p, 1.234).unwrap();
        let drive = h0_drive(&s, p.omega).unwrap();
        assert!(h.distance(&drive) < 1e-14);

        // Omega = 0, delta = 0: resonant Tavis-Cummings
        let p = DriveParams { omega: 0.0, delta: 0.0, ..params() };
        let h = h_interaction(&s, &p, 0.77).unwrap();
        let (a, ad) = boson_ops(&s).unwrap();
        let sm = collective(&s, &local::lowering(3)).unwrap();
        let sp = collective(&s, &local::raising(3)).unwrap();
        let tc = &(&ad * &sm) + &(&a * &sp);
        assert!(h.distance(&tc.scale(cr(p.g))) < 1e-14);
    }

    #[test]
    fn interaction_matrix_element() {
        // <e,0|H|g,1> = g e^{i delta t}
        let s = make_space(1, 2, 1, false).unwrap();
        let p = params();
        let t = 0.613;
        let h = h_interaction(&s, &p, t).unwrap();
        let e0 = s.encode(&[1], 0).unwrap();
        let g1 = s.encode(&[0], 1).unwrap();
        let want = C64::from_polar(p.g, p.delta * t);
        assert!((h.element(e0, g1) - want).norm() < 1e-14);
    }

    #[test]
    fn every_builder_is_hermitian() {
        let s = make_space(2, 4, 3, false).unwrap();
        let p = DriveParams { eta: 0.1, phi: 0.3, ..params() };
        for k in 0..20 {
            let t = 0.37 * k as f64 - 2.0;
            for op in [
                h_interaction(&s, &p, t).unwrap(),
                h_rotated(&s, &p, t).unwrap(),
                h_slow(&s, &p, t).unwrap(),
                h_ion(&s, &p, t, FrameTag::IonInteraction).unwrap(),
                h_ion(&s, &p, t, FrameTag::IonLambDicke).unwrap(),
            ] {
                assert!(op.hermiticity_error() < 1e-12);
            }
        }
        assert!(h_effective(&s, 0.3).unwrap().hermiticity_error() < 1e-12);
        assert!(h0_drive(&s, 2.0).unwrap().hermiticity_error() < 1e-12);
    }

    #[test]
    fn rotated_frame_is_exact_transform() {
        let s = make_space(2, 3, 3, false).unwrap();
        let p = params();
        let h0 = h0_drive(&s, p.omega).unwrap();
        for &t in &[0.0, 0.21, 1.7] {
            let u = expm_hermitian(h0.matrix(), t).unwrap();
            let hi = h_interaction(&s, &p, t).unwrap();
            let lhs = u.adjoint() * (hi.matrix() - h0.matrix()) * &u;
            let rot = h_rotated(&s, &p, t).unwrap();
            assert!(crate::algebra::expm::max_abs(&(lhs - rot.matrix())) < 1e-12);
        }
    }

    #[test]
    fn rotated_splits_into_slow_and_dressed_terms() {
        let s = make_space(2, 3, 2, false).unwrap();
        let p = params();
        let t = 0.9;
        let rot = h_rotated(&s, &p, t).unwrap();
        let slow = h_slow(&s, &p, t).unwrap();
        let (a, ad) = boson_ops(&s).unwrap();
        let sp = collective(&s, &local::sigma_plus(3)).unwrap();
        let sm = collective(&s, &local::sigma_minus(3)).unwrap();
        let w = C64::from_polar(1.0, 2.0 * p.omega * t);
        let em = C64::from_polar(1.0, -p.delta * t);
        let ep = C64::from_polar(1.0, p.delta * t);
        let dressed_plus = (&sp.scale(-w * 0.5) + &sm.scale(w.conj() * 0.5)).scale(em * p.g);
        let dressed_minus = (&sp.scale(w * 0.5) + &sm.scale(-w.conj() * 0.5)).scale(ep * p.g);
        let fast = &(&ad * &dressed_plus) + &(&a * &dressed_minus);
        assert!(rot.distance(&(&slow + &fast)) < 1e-12);

        // Omega t = 0: dressed terms at full weight
        let rot0 = h_rotated(&s, &p, 0.0).unwrap();
        let sx = collective_sx(&s).unwrap();
        let base = &(&ad + &a) * &sx;
        let full = &(&ad * &(&sp.scale(cr(-0.5)) + &sm.scale(cr(0.5)))) + &(&a * &(&sp.scale(cr(0.5)) + &sm.scale(cr(-0.5))));
        assert!(rot0.distance(&(&base + &full).scale(cr(p.g))) < 1e-12);
    }

    #[test]
    fn spectator_levels_are_inert() {
        let s = make_space(2, 3, 2, false).unwrap();
        let p = params();
        let rot = h_rotated(&s, &p, 0.4).unwrap();
        let ff = StateVector::uniform(s, Level::F, 1).unwrap();
        assert!(rot.apply(&ff).unwrap().norm() < 1e-15);
    }

    #[test]
    fn slow_frame_cases() {
        let s = make_space(2, 2, 2, false).unwrap();
        let p = params();
        let t = 0.3;
        let (a, ad) = boson_ops(&s).unwrap();
        let sx = collective_sx(&s).unwrap();
        let field = &ad.scale(C64::from_polar(p.g, -p.delta * t)) + &a.scale(C64::from_polar(p.g, p.delta * t));
        assert!(h_slow(&s, &p, t).unwrap().distance(&(&field * &sx)) < 1e-14);

        let p0 = DriveParams { delta: 0.0, ..p };
        let h = h_slow(&s, &p0, 5.0).unwrap();
        assert!(h.distance(&(&(&ad + &a) * &sx).scale(cr(p.g))) < 1e-14);

        // <g g,1| H(0) |e g,0> = g/2
        let h = h_slow(&s, &p, 0.0).unwrap();
        let gg1 = s.encode(&[0, 0], 1).unwrap();
        let eg0 = s.encode(&[1, 0], 0).unwrap();
        assert!((h.element(gg1, eg0) - cr(p.g / 2.0)).norm() < 1e-15);
    }

    #[test]
    fn effective_two_atom_elements() {
        let s = make_space(2, 2, 0, true).unwrap();
        let lambda = 0.37;
        let h = h_effective(&s, lambda).unwrap();
        let idx = |l: [usize; 2]| s.encode(&l, 0).unwrap();
        assert!((h.element(idx([1, 1]), idx([0, 0])) - cr(lambda)).norm() < 1e-15);
        assert!((h.element(idx([1, 0]), idx([0, 1])) - cr(lambda)).norm() < 1e-15);

        let one = make_space(1, 3, 0, true).unwrap();
        let h1 = h_effective(&one, lambda).unwrap();
        let want = local::ge_projector(3) * cr(lambda / 2.0);
        assert!(crate::algebra::expm::max_abs(&(h1.matrix() - want)) < 1e-15);
    }

    #[test]
    fn effective_is_mode_independent() {
        let s = make_space(3, 3, 4, false).unwrap();
        let h = h_effective(&s, 0.2).unwrap();
        let atoms = h_effective(&s.atoms_only(), 0.2).unwrap();
        let expect = atoms.matrix().kronecker(&DMatrix::<C64>::identity(5, 5));
        assert!(crate::algebra::expm::max_abs(&(h.matrix() - expect)) == 0.0);
    }

    #[test]
    fn effective_preserves_excitation_parity() {
        let s = make_space(4, 3, 0, true).unwrap();
        let h = h_effective(&s, 1.0).unwrap();
        let excitations = |i: usize| s.decode(i).0.iter().filter(|&&l| l == 1).count();
        for i in 0..s.dim() {
            for j in 0..s.dim() {
                if (excitations(i) + excitations(j)) % 2 == 1 {
                    assert_eq!(h.element(i, j), cr(0.0));
                }
            }
        }
    }

    #[test]
    fn lambdas() {
        assert!((lambda_cavity(1.0, 20.0).unwrap() - 0.025).abs() < 1e-15);
        assert!((lambda_ion(1.0, 0.05, 0.05).unwrap() - 0.1).abs() < 1e-15);
        let (om, eta, delta) = (1.3, 0.07, 0.4);
        let a = lambda_ion(om, eta, delta).unwrap();
        let b = lambda_cavity(2.0 * eta * om, delta).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!(lambda_cavity(1.0, 0.0).is_err());
        assert!(lambda_ion(1.0, 0.1, 0.0).is_err());
    }

    #[test]
    fn ion_first_order_matches_slow_frame() {
        let s = make_space(2, 3, 4, false).unwrap();
        let p = DriveParams { omega: 1.7, eta: 0.05, delta: 0.9, phi: PI / 2.0, ..Default::default() };
        let slow = DriveParams { g: 2.0 * p.eta * p.omega, delta: p.delta, ..Default::default() };
        for &t in &[0.0, 0.43, 3.3] {
            let ion = h_ion(&s, &p, t, FrameTag::IonLambDicke).unwrap();
            assert!(ion.distance(&h_slow(&s, &slow, t).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn ion_series_cases() {
        let s = make_space(2, 2, 4, false).unwrap();
        let p = DriveParams { omega: 1.0, eta: 0.0, delta: 0.5, lamb_dicke_order: 3, ..Default::default() };
        assert_eq!(h_ion(&s, &p, 0.3, FrameTag::IonInteraction).unwrap().max_abs(), 0.0);

        let p = DriveParams { eta: 0.08, lamb_dicke_order: 0, phi: 0.4, ..p };
        let t = 1.1;
        let series = h_ion(&s, &p, t, FrameTag::IonInteraction).unwrap();
        let first = h_ion(&s, &p, t, FrameTag::IonLambDicke).unwrap();
        let factor = (-p.eta * p.eta / 2.0).exp();
        assert!(series.distance(&first.scale(cr(factor))) < 1e-14);
        assert!(h_ion(&s, &p, t, FrameTag::SlowFrame).is_err());
    }

    #[test]
    fn drive_cases() {
        let s = make_space(1, 3, 0, true).unwrap();
        let om = 0.7;
        let h = h0_drive(&s, om).unwrap();
        let mut ev: Vec<f64> = h.matrix().symmetric_eigenvalues().iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] + om).abs() < 1e-14 && ev[1].abs() < 1e-14 && (ev[2] - om).abs() < 1e-14);
        assert_eq!(h0_drive(&s, 0.0).unwrap().max_abs(), 0.0);

        let t = 0.9;
        let u = expm_hermitian(h.matrix(), t).unwrap();
        assert!((u[(0, 0)] - cr((om * t).cos())).norm() < 1e-14);
        assert!((u[(1, 0)] - C64::new(0.0, -(om * t).sin())).norm() < 1e-14);
        assert!(u[(2, 0)].norm() < 1e-15);
    }

    #[test]
    fn no_mode_errors() {
        let s = make_space(2, 2, 0, true).unwrap();
        assert!(matches!(h_interaction(&s, &params(), 0.0), Err(Error::NoMode)));
        assert!(matches!(h_slow(&s, &params(), 0.0), Err(Error::NoMode)));
        assert!(h_effective(&s, 0.1).is_ok());
        let _ = embed_mode_op;
    }
}
