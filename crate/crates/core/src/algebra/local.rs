//! Single-atom matrices and in-place application of local operators to
//! state amplitudes without forming the full embedded matrix.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::space::{Level, Space};
use crate::error::{Error, Result};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `|to><from|` on a `d`-level atom.
pub fn transition(d: usize, to: Level, from: Level) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(d, d);
    m[(to.index(), from.index())] = c(1.0);
    m
}

/// `S+ = |e><g|`
pub fn raising(d: usize) -> DMatrix<C64> {
    transition(d, Level::E, Level::G)
}

/// `S- = |g><e|`
pub fn lowering(d: usize) -> DMatrix<C64> {
    transition(d, Level::G, Level::E)
}

/// `S_z = (|e><e| - |g><g|) / 2`
pub fn sz(d: usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(d, d);
    m[(1, 1)] = c(0.5);
    m[(0, 0)] = c(-0.5);
    m
}

/// `(S+ + S-) / 2`, which is also `sigma_z` of the dressed `|+>, |->` basis.
pub fn sx(d: usize) -> DMatrix<C64> {
    (raising(d) + lowering(d)) * c(0.5)
}

pub fn projector(d: usize, level: Level) -> DMatrix<C64> {
    transition(d, level, level)
}

/// `|g><g| + |e><e|`
pub fn ge_projector(d: usize) -> DMatrix<C64> {
    projector(d, Level::G) + projector(d, Level::E)
}

/// Dressed-basis vectors `|+> = (|g> + |e>)/sqrt2`, `|-> = (|g> - |e>)/sqrt2`.
fn dressed(d: usize, sign: f64) -> DMatrix<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = DMatrix::zeros(d, 1);
    v[(0, 0)] = c(s);
    v[(1, 0)] = c(sign * s);
    v
}

/// `sigma+ = |+><-|` in the g/e block.
pub fn sigma_plus(d: usize) -> DMatrix<C64> {
    dressed(d, 1.0) * dressed(d, -1.0).adjoint()
}

/// `sigma- = |-><+|` in the g/e block.
pub fn sigma_minus(d: usize) -> DMatrix<C64> {
    dressed(d, -1.0) * dressed(d, 1.0).adjoint()
}

/// Eigenbasis of [`sx`]: columns `|+>, |->, |f>, |h>` with eigenvalues
/// `1/2, -1/2, 0, 0`.
pub fn sx_eigenbasis(d: usize) -> (DMatrix<C64>, Vec<f64>) {
    let mut v = DMatrix::zeros(d, d);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    v[(0, 0)] = c(s);
    v[(1, 0)] = c(s);
    v[(0, 1)] = c(s);
    v[(1, 1)] = c(-s);
    for k in 2..d {
        v[(k, k)] = c(1.0);
    }
    let mut vals = vec![0.0; d];
    vals[0] = 0.5;
    vals[1] = -0.5;
    (v, vals)
}

/// Permutation swapping two levels, identity elsewhere.
pub fn swap_levels(d: usize, pairs: &[(Level, Level)]) -> DMatrix<C64> {
    let mut perm: Vec<usize> = (0..d).collect();
    for &(a, b) in pairs {
        perm.swap(a.index(), b.index());
    }
    let mut m = DMatrix::zeros(d, d);
    for (from, &to) in perm.iter().enumerate() {
        m[(to, from)] = c(1.0);
    }
    m
}

/// Apply `local` to atom `atom` of every basis block in `amps`, in place.
pub fn apply_local(space: &Space, atom: usize, local: &DMatrix<C64>, amps: &mut [C64]) -> Result<()> {
    space.check_atom(atom)?;
    let d = space.atom_dim();
    if local.nrows() != d || local.ncols() != d {
        return Err(Error::Shape {
            expected: format!("{d}x{d}"),
            found: format!("{}x{}", local.nrows(), local.ncols()),
        });
    }
    if amps.len() != space.dim() {
        return Err(Error::Shape { expected: space.dim().to_string(), found: amps.len().to_string() });
    }
    let stride = space.atom_stride(atom);
    let block = stride * d;
    let mut buf = vec![C64::new(0.0, 0.0); d];
    for base in (0..amps.len()).step_by(block) {
        for inner in 0..stride {
            for (l, b) in buf.iter_mut().enumerate() {
                *b = amps[base + l * stride + inner];
            }
            for r in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for (l, b) in buf.iter().enumerate() {
                    acc += local[(r, l)] * b;
                }
                amps[base + r * stride + inner] = acc;
            }
        }
    }
    Ok(())
}

/// Apply the same local matrix to every atom.
pub fn apply_local_all(space: &Space, local: &DMatrix<C64>, amps: &mut [C64]) -> Result<()> {
    for j in 0..space.atom_count() {
        apply_local(space, j, local, amps)?;
    }
    Ok(())
}

pub fn is_unitary(m: &DMatrix<C64>, tol: f64) -> bool {
    unitarity_error(m) <= tol
}

pub fn unitarity_error(m: &DMatrix<C64>) -> f64 {
    let p = m.adjoint() * m;
    let id = DMatrix::<C64>::identity(m.nrows(), m.ncols());
    (p - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
