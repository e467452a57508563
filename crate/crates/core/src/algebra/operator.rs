use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::expm::{check_hermitian, hermiticity_error, max_abs};
use super::local;
use super::space::{Level, Space};
use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

pub(crate) fn cr(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Dense operator on a [`Space`].
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    space: Space,
    matrix: DMatrix<C64>,
}

impl Operator {
    pub fn new(space: Space, matrix: DMatrix<C64>) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::Shape {
                expected: format!("{d}x{d}"),
                found: format!("{}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        Ok(Operator { space, matrix })
    }

    pub fn zero(space: Space) -> Self {
        let d = space.dim();
        Operator { space, matrix: DMatrix::zeros(d, d) }
    }

    pub fn identity(space: Space) -> Self {
        let d = space.dim();
        Operator { space, matrix: DMatrix::identity(d, d) }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dagger(&self) -> Operator {
        Operator { space: self.space, matrix: self.matrix.adjoint() }
    }

    pub fn scale(&self, s: C64) -> Operator {
        Operator { space: self.space, matrix: &self.matrix * s }
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        Operator { space: self.space, matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    pub fn distance(&self, other: &Operator) -> f64 {
        max_abs(&(&self.matrix - &other.matrix))
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.matrix)
    }

    pub fn check_hermitian(&self, tol: f64) -> Result<()> {
        check_hermitian(&self.matrix, tol)
    }

    pub fn unitarity_error(&self) -> f64 {
        local::unitarity_error(&self.matrix)
    }

    pub fn element(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        if state.space() != &self.space {
            return Err(Error::Shape { expected: self.space.to_string(), found: state.space().to_string() });
        }
        Ok(StateVector { space: self.space, amps: &self.matrix * state.amplitudes() })
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        SparseMatrix::from_dense(&self.matrix)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator { space: self.space, matrix: &self.matrix + &rhs.matrix }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator { space: self.space, matrix: &self.matrix - &rhs.matrix }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator { space: self.space, matrix: &self.matrix * &rhs.matrix }
    }
}

/// Pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    space: Space,
    amps: DVector<C64>,
}

impl StateVector {
    pub fn from_amplitudes(space: Space, amps: DVector<C64>) -> Result<Self> {
        if amps.len() != space.dim() {
            return Err(Error::Shape { expected: space.dim().to_string(), found: amps.len().to_string() });
        }
        Ok(StateVector { space, amps })
    }

    pub fn basis(space: Space, levels: &[Level], n: usize) -> Result<Self> {
        let idx: Vec<usize> = levels.iter().map(|l| l.index()).collect();
        let i = space.encode(&idx, n)?;
        let mut amps = DVector::zeros(space.dim());
        amps[i] = cr(1.0);
        Ok(StateVector { space, amps })
    }

    /// Every atom in `level`, mode in `|n>`.
    pub fn uniform(space: Space, level: Level, n: usize) -> Result<Self> {
        Self::basis(space, &vec![level; space.atom_count()], n)
    }

    /// `sum_k c_k |level_k ... level_k>` on an atoms-only or mode space (mode in `|0>`).
    pub fn ghz_legs(space: Space, legs: &[(Level, C64)]) -> Result<Self> {
        let mut amps = DVector::zeros(space.dim());
        for &(l, c) in legs {
            amps[space.uniform_index(l, 0)?] += c;
        }
        Ok(StateVector { space, amps })
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut DVector<C64> {
        &mut self.amps
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amps[index]
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::InvalidParameter("cannot normalize a zero vector".into()));
        }
        self.amps /= cr(n);
        Ok(self)
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.space != other.space {
            return Err(Error::Shape { expected: self.space.to_string(), found: other.space.to_string() });
        }
        Ok(self.amps.dotc(&other.amps))
    }

    /// Attach the mode in Fock state `|n>` to an atoms-only state.
    pub fn with_fock(&self, fock_cutoff: usize, n: usize) -> Result<StateVector> {
        if self.space.has_mode() {
            return Err(Error::InvalidSpace("state already carries a mode".into()));
        }
        if n > fock_cutoff {
            return Err(Error::InvalidParameter(format!("Fock state {n} beyond cutoff {fock_cutoff}")));
        }
        let space = self.space.with_mode(fock_cutoff);
        let m = space.mode_dim();
        let mut amps = DVector::zeros(space.dim());
        for (i, a) in self.amps.iter().enumerate() {
            amps[i * m + n] = *a;
        }
        Ok(StateVector { space, amps })
    }

    /// Atoms-only state with the given amplitudes on the mode slice `n`; used
    /// when the mode factor is known to be a product.
    pub fn mode_slice(&self, n: usize) -> StateVector {
        let space = self.space.atoms_only();
        let m = self.space.mode_dim();
        let amps = DVector::from_fn(space.dim(), |i, _| self.amps[i * m + n]);
        StateVector { space, amps }
    }

    pub fn apply_local(&mut self, atom: usize, local: &DMatrix<C64>) -> Result<()> {
        local::apply_local(&self.space, atom, local, self.amps.as_mut_slice())
    }

    pub fn apply_local_all(&mut self, local: &DMatrix<C64>) -> Result<()> {
        local::apply_local_all(&self.space, local, self.amps.as_mut_slice())
    }

    /// Population in the two highest Fock levels.
    pub fn top_fock_population(&self) -> f64 {
        top_fock_population(&self.space, self.amps.as_slice())
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix { space: self.space, matrix: &self.amps * self.amps.adjoint() }
    }
}

pub(crate) fn top_fock_population(space: &Space, amps: &[C64]) -> f64 {
    if !space.has_mode() {
        return 0.0;
    }
    let m = space.mode_dim();
    let lo = m.saturating_sub(2);
    amps.chunks(m).map(|block| block[lo..].iter().map(|a| a.norm_sqr()).sum::<f64>()).sum()
}

/// Mixed state.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: Space,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Wraps a matrix after checking it is a valid density matrix.
    pub fn new(space: Space, matrix: DMatrix<C64>) -> Result<Self> {
        let rho = Self::new_unchecked(space, matrix)?;
        rho.validate(1e-9)?;
        Ok(rho)
    }

    pub(crate) fn new_unchecked(space: Space, matrix: DMatrix<C64>) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::Shape {
                expected: format!("{d}x{d}"),
                found: format!("{}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        Ok(DensityMatrix { space, matrix })
    }

    /// Hermitian within 1e-10, eigenvalues above -1e-9, trace within `trace_tol` of one.
    pub fn validate(&self, trace_tol: f64) -> Result<()> {
        let herm = hermiticity_error(&self.matrix);
        if herm > 1e-10 {
            return Err(Error::InvalidDensity(format!("Hermiticity error {herm:.3e}")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > trace_tol {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let sym = (&self.matrix + self.matrix.adjoint()) * cr(0.5);
        let min = sym.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-9 {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn population(&self, index: usize) -> f64 {
        self.matrix[(index, index)].re
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.matrix)
    }

    pub fn top_fock_population(&self) -> f64 {
        if !self.space.has_mode() {
            return 0.0;
        }
        let m = self.space.mode_dim();
        (0..self.space.dim()).filter(|i| i % m + 2 >= m).map(|i| self.matrix[(i, i)].re).sum()
    }

    /// `U rho U^dagger`
    pub fn conjugate_by(&self, u: &Operator) -> DensityMatrix {
        DensityMatrix { space: self.space, matrix: u.matrix() * &self.matrix * u.matrix().adjoint() }
    }

    /// Weighted sum of pure-state projectors (weights need not sum to one).
    pub fn from_ensemble(space: Space, members: &[(f64, StateVector)]) -> Result<Self> {
        let d = space.dim();
        let mut m = DMatrix::zeros(d, d);
        for (p, psi) in members {
            if psi.space() != &space {
                return Err(Error::Shape { expected: space.to_string(), found: psi.space().to_string() });
            }
            m += psi.amplitudes() * psi.amplitudes().adjoint() * cr(*p);
        }
        Ok(DensityMatrix { space, matrix: m })
    }

    /// Spectral decomposition into weighted pure states; eigenvalues at or
    /// below `cutoff` are dropped.
    pub fn to_ensemble(&self, cutoff: f64) -> Vec<(f64, StateVector)> {
        let sym = (&self.matrix + self.matrix.adjoint()) * cr(0.5);
        let eig = sym.symmetric_eigen();
        let mut out = Vec::new();
        for (k, &p) in eig.eigenvalues.iter().enumerate() {
            if p > cutoff {
                let v = eig.eigenvectors.column(k).into_owned();
                out.push((p, StateVector { space: self.space, amps: v }));
            }
        }
        out.sort_by(|a, b| b.0.total_cmp(&a.0));
        out
    }

    pub fn apply_local(&mut self, atom: usize, local: &DMatrix<C64>) -> Result<()> {
        // rho -> L rho L^dagger, column pass then row pass via the adjoint
        let d = self.space.dim();
        for c in 0..d {
            local::apply_local(&self.space, atom, local, self.matrix.column_mut(c).as_mut_slice())?;
        }
        let mut t = self.matrix.adjoint();
        for c in 0..d {
            local::apply_local(&self.space, atom, local, t.column_mut(c).as_mut_slice())?;
        }
        self.matrix = t.adjoint();
        Ok(())
    }
}

/// Embed a single-atom `d x d` matrix as `I x ... x local x ... x I x I_mode`.
pub fn embed_atom_op(space: &Space, atom_index: usize, local_matrix: &DMatrix<C64>) -> Result<Operator> {
    space.check_atom(atom_index)?;
    let d = space.atom_dim();
    if local_matrix.nrows() != d || local_matrix.ncols() != d {
        return Err(Error::Shape {
            expected: format!("{d}x{d}"),
            found: format!("{}x{}", local_matrix.nrows(), local_matrix.ncols()),
        });
    }
    let dim = space.dim();
    let stride = space.atom_stride(atom_index);
    let mut m = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let l = (col / stride) % d;
        let base = col - l * stride;
        for r in 0..d {
            let v = local_matrix[(r, l)];
            if v != cr(0.0) {
                m[(base + r * stride, col)] = v;
            }
        }
    }
    Ok(Operator { space: *space, matrix: m })
}

/// `sum_j local_j` with the same local matrix on every atom.
pub fn collective(space: &Space, local_matrix: &DMatrix<C64>) -> Result<Operator> {
    let mut total = Operator::zero(*space);
    for j in 0..space.atom_count() {
        total = &total + &embed_atom_op(space, j, local_matrix)?;
    }
    Ok(total)
}

/// `S_x = 1/2 sum_j (S_j^+ + S_j^-)`
pub fn collective_sx(space: &Space) -> Result<Operator> {
    collective(space, &local::sx(space.atom_dim()))
}

/// Mode-only matrix embedded as `I_atoms x m`.
pub fn embed_mode_op(space: &Space, mode_matrix: &DMatrix<C64>) -> Result<Operator> {
    if !space.has_mode() {
        return Err(Error::NoMode);
    }
    let m = space.mode_dim();
    if mode_matrix.nrows() != m || mode_matrix.ncols() != m {
        return Err(Error::Shape { expected: format!("{m}x{m}"), found: format!("{}x{}", mode_matrix.nrows(), mode_matrix.ncols()) });
    }
    let id = DMatrix::<C64>::identity(space.atom_block_dim(), space.atom_block_dim());
    Ok(Operator { space: *space, matrix: id.kronecker(mode_matrix) })
}

/// Truncated annihilation operator on the mode alone, `(n_max+1)` square.
pub fn mode_annihilation(cutoff: usize) -> DMatrix<C64> {
    let m = cutoff + 1;
    let mut a = DMatrix::zeros(m, m);
    for n in 1..m {
        a[(n - 1, n)] = cr((n as f64).sqrt());
    }
    a
}

/// `(a, a^dagger)` on the full space with hard truncation at the cutoff.
pub fn boson_ops(space: &Space) -> Result<(Operator, Operator)> {
    if !space.has_mode() {
        return Err(Error::NoMode);
    }
    let a = mode_annihilation(space.fock_cutoff());
    let ad = a.adjoint();
    Ok((embed_mode_op(space, &a)?, embed_mode_op(space, &ad)?))
}

/// Truncation order of the displacement operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesOrder {
    /// Exact matrix exponential on the truncated space.
    Exact,
    /// Sideband series terms `j = 0..=order`.
    Terms(usize),
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Mode matrix `a^{+p} a^q` on a truncated ladder.
pub(crate) fn normal_ordered(cutoff: usize, creations: usize, annihilations: usize) -> DMatrix<C64> {
    let a = mode_annihilation(cutoff);
    let ad = a.adjoint();
    let m = cutoff + 1;
    let mut out = DMatrix::identity(m, m);
    for _ in 0..creations {
        out = &out * &ad;
    }
    for _ in 0..annihilations {
        out = &out * &a;
    }
    out
}

/// Coefficient `(i eta)^{2j+1} / (j! (j+1)!)` of the first-sideband series.
pub(crate) fn sideband_coefficient(eta: f64, j: usize) -> C64 {
    C64::new(0.0, eta).powu(2 * j as u32 + 1) / (factorial(j) * factorial(j + 1))
}

/// Laser displacement `exp(i eta (a + a^dagger))`, either exact or as the
/// first-sideband series `e^{-eta^2/2} sum_j c_j (a^{+(j+1)} a^j + a^{+j} a^{j+1})`.
pub fn displacement_series(space: &Space, eta: f64, order: SeriesOrder) -> Result<Operator> {
    if !space.has_mode() {
        return Err(Error::NoMode);
    }
    if eta.is_nan() || eta < 0.0 {
        return Err(Error::InvalidParameter(format!("Lamb-Dicke parameter must be non-negative, got {eta}")));
    }
    let cutoff = space.fock_cutoff();
    let mode = match order {
        SeriesOrder::Exact => {
            let a = mode_annihilation(cutoff);
            let x = (&a + a.adjoint()) * cr(eta);
            // exp(i X) = exp(-i (-X) 1)
            super::expm::expm_hermitian(&(-x), 1.0)?
        }
        SeriesOrder::Terms(order) => {
            let m = cutoff + 1;
            let mut s = DMatrix::zeros(m, m);
            for j in 0..=order {
                let c = sideband_coefficient(eta, j);
                s += (normal_ordered(cutoff, j + 1, j) + normal_ordered(cutoff, j, j + 1)) * c;
            }
            s * cr((-eta * eta / 2.0).exp())
        }
    };
    embed_mode_op(space, &mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::space::make_space;

    #[test]
    fn raising_maps_g_to_e() {
        let s = make_space(1, 2, 0, true).unwrap();
        let op = embed_atom_op(&s, 0, &local::raising(2)).unwrap();
        let g = StateVector::basis(s, &[Level::G], 0).unwrap();
        let out = op.apply(&g).unwrap();
        assert_eq!(out, StateVector::basis(s, &[Level::E], 0).unwrap());
    }

    #[test]
    fn embedded_identity_is_identity() {
        let s = make_space(3, 3, 2, false).unwrap();
        let op = embed_atom_op(&s, 1, &DMatrix::identity(3, 3)).unwrap();
        assert_eq!(op, Operator::identity(s));
    }

    #[test]
    fn two_atom_exchange() {
        // (S_1^+)(S_2^-)|g1 e2> = |e1 g2>
        let s = make_space(2, 2, 0, true).unwrap();
        let p1 = embed_atom_op(&s, 0, &local::raising(2)).unwrap();
        let m2 = embed_atom_op(&s, 1, &local::lowering(2)).unwrap();
        let psi = StateVector::basis(s, &[Level::G, Level::E], 0).unwrap();
        let out = (&p1 * &m2).apply(&psi).unwrap();
        assert_eq!(out, StateVector::basis(s, &[Level::E, Level::G], 0).unwrap());
    }

    #[test]
    fn embed_errors() {
        let s = make_space(2, 3, 0, true).unwrap();
        assert!(matches!(embed_atom_op(&s, 2, &local::raising(3)), Err(Error::AtomIndex { .. })));
        assert!(matches!(embed_atom_op(&s, 0, &local::raising(2)), Err(Error::Shape { .. })));
    }

    #[test]
    fn sx_small_cases() {
        let s1 = make_space(1, 2, 0, true).unwrap();
        let sx = collective_sx(&s1).unwrap();
        assert_eq!(sx.element(0, 1), cr(0.5));
        assert_eq!(sx.element(1, 0), cr(0.5));
        assert_eq!(sx.element(0, 0), cr(0.0));

        let s2 = make_space(2, 2, 0, true).unwrap();
        let mut ev: Vec<f64> = collective_sx(&s2).unwrap().into_matrix().symmetric_eigenvalues().iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        for (got, want) in ev.iter().zip([-1.0, 0.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }

        let q = make_space(1, 3, 0, true).unwrap();
        let sxq = collective_sx(&q).unwrap();
        for k in 0..3 {
            assert_eq!(sxq.element(2, k), cr(0.0));
            assert_eq!(sxq.element(k, 2), cr(0.0));
        }
    }

    #[test]
    fn ladder_operators() {
        let s = make_space(1, 2, 4, false).unwrap();
        let (a, ad) = boson_ops(&s).unwrap();
        let vac = StateVector::basis(s, &[Level::G], 0).unwrap();
        assert_eq!(a.apply(&vac).unwrap().norm(), 0.0);
        let one = StateVector::basis(s, &[Level::G], 1).unwrap();
        let two = StateVector::basis(s, &[Level::G], 2).unwrap();
        let out = ad.apply(&one).unwrap();
        assert!((out.inner(&two).unwrap() - cr(2f64.sqrt())).norm() < 1e-15);

        // [a, a+] = I except the top entry, which is -n_max
        let comm = a.commutator(&ad);
        let m = s.mode_dim();
        for i in 0..s.dim() {
            let expect = if i % m == m - 1 { -(s.fock_cutoff() as f64) } else { 1.0 };
            assert!((comm.element(i, i) - cr(expect)).norm() < 1e-12);
        }
        assert!(boson_ops(&make_space(1, 2, 0, true).unwrap()).is_err());
    }

    #[test]
    fn displacement_cases() {
        let s = make_space(1, 2, 6, false).unwrap();
        let exact0 = displacement_series(&s, 0.0, SeriesOrder::Exact).unwrap();
        assert!(exact0.distance(&Operator::identity(s)) < 1e-14);

        // eta sqrt(n_max) <= 0.5
        let eta = 0.5 / (6f64).sqrt();
        let d = displacement_series(&s, eta, SeriesOrder::Exact).unwrap();
        assert!(d.unitarity_error() < 1e-8);

        let eta = 0.05;
        let series0 = displacement_series(&s, eta, SeriesOrder::Terms(0)).unwrap();
        let (a, ad) = boson_ops(&s).unwrap();
        let expect = (&a + &ad).scale(C64::new(0.0, eta) * (-eta * eta / 2.0).exp());
        assert!(series0.distance(&expect) < 1e-15);

        assert!(displacement_series(&s, -0.1, SeriesOrder::Exact).is_err());
    }

    #[test]
    fn ensemble_round_trip() {
        let s = make_space(2, 2, 0, true).unwrap();
        let a = StateVector::basis(s, &[Level::G, Level::G], 0).unwrap();
        let b = StateVector::basis(s, &[Level::E, Level::G], 0).unwrap();
        let rho = DensityMatrix::from_ensemble(s, &[(0.7, a.clone()), (0.3, b)]).unwrap();
        rho.validate(1e-12).unwrap();
        let ens = rho.to_ensemble(1e-14);
        assert_eq!(ens.len(), 2);
        assert!((ens[0].0 - 0.7).abs() < 1e-14);
        assert!((ens[0].1.inner(&a).unwrap().norm() - 1.0).abs() < 1e-12);
    }
}
