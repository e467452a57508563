//! State metrics and signal extraction.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::algebra::{BasisLabel, DensityMatrix, StateVector};
use crate::error::{Error, Result};
use crate::C64;

/// Borrowed pure or mixed state.
#[derive(Clone, Copy, Debug)]
pub enum StateRef<'a> {
    Pure(&'a StateVector),
    Mixed(&'a DensityMatrix),
}

impl<'a> From<&'a StateVector> for StateRef<'a> {
    fn from(s: &'a StateVector) -> Self {
        StateRef::Pure(s)
    }
}

impl<'a> From<&'a DensityMatrix> for StateRef<'a> {
    fn from(s: &'a DensityMatrix) -> Self {
        StateRef::Mixed(s)
    }
}

impl StateRef<'_> {
    fn space(&self) -> &crate::algebra::Space {
        match self {
            StateRef::Pure(s) => s.space(),
            StateRef::Mixed(r) => r.space(),
        }
    }
}

/// `|<b|a>|^2` for pure `a`, `<b|rho|b>` for mixed `a`.
pub fn fidelity<'a>(a: impl Into<StateRef<'a>>, b: &StateVector) -> Result<f64> {
    let a = a.into();
    if a.space() != b.space() {
        return Err(Error::Shape { expected: b.space().to_string(), found: a.space().to_string() });
    }
    Ok(match a {
        StateRef::Pure(psi) => b.inner(psi)?.norm_sqr(),
        StateRef::Mixed(rho) => (b.amplitudes().adjoint() * rho.matrix() * b.amplitudes())[(0, 0)].re,
    })
}

/// Partial trace over the bosonic mode.
pub fn reduce_to_atoms<'a>(state: impl Into<StateRef<'a>>) -> Result<DensityMatrix> {
    let state = state.into();
    let space = *state.space();
    if !space.has_mode() {
        return Err(Error::NoMode);
    }
    let m = space.mode_dim();
    let atoms = space.atoms_only();
    let k = atoms.dim();
    let matrix = match state {
        StateRef::Pure(psi) => {
            // reshape amplitudes to (atoms x mode), rho_A = M M^dagger
            let amps = psi.amplitudes();
            let mm = DMatrix::from_fn(k, m, |i, n| amps[i * m + n]);
            &mm * mm.adjoint()
        }
        StateRef::Mixed(rho) => {
            let r = rho.matrix();
            DMatrix::from_fn(k, k, |i, j| (0..m).map(|n| r[(i * m + n, j * m + n)]).sum::<C64>())
        }
    };
    DensityMatrix::new_unchecked(atoms, matrix)
}

/// `1/2 || rho - sigma ||_1`
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.space() != sigma.space() {
        return Err(Error::Shape { expected: rho.space().to_string(), found: sigma.space().to_string() });
    }
    let diff = rho.matrix() - sigma.matrix();
    let herm = (&diff + diff.adjoint()) * C64::new(0.5, 0.0);
    Ok(0.5 * herm.symmetric_eigenvalues().iter().map(|e| e.abs()).sum::<f64>())
}

/// Squared amplitude (or diagonal population) of each labelled basis state.
pub fn leg_populations<'a>(state: impl Into<StateRef<'a>>, legs: &[BasisLabel]) -> Result<Vec<f64>> {
    let state = state.into();
    let space = *state.space();
    legs.iter()
        .map(|l| {
            let i = l.index_in(&space)?;
            Ok(match state {
                StateRef::Pure(psi) => psi.amplitude(i).norm_sqr(),
                StateRef::Mixed(rho) => rho.population(i),
            })
        })
        .collect()
}

/// Sampled real observable.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Signal(format!("{} times but {} values", times.len(), values.len())));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Signal("times must be strictly increasing".into()));
        }
        Ok(TimeSeries { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn span(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }
}

/// Squared norm captured by the least-squares fit of
/// `A cos(w t) + B sin(w t) + C`.
fn sinusoid_power(series: &TimeSeries, w: f64) -> f64 {
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    let t0 = series.times[0];
    for (&t, &v) in series.times.iter().zip(&series.values) {
        let (s, c) = (w * (t - t0)).sin_cos();
        let row = Vector3::new(c, s, 1.0);
        ata += row * row.transpose();
        atb += row * v;
    }
    match ata.cholesky() {
        Some(ch) => {
            let coef = ch.solve(&atb);
            coef.dot(&atb)
        }
        None => 0.0,
    }
}

/// Dominant angular frequency of a near-sinusoidal series: the peak of a
/// least-squares (sinusoid-plus-offset) periodogram on a fine grid, refined
/// by a parabola through the three samples around the peak and a short
/// golden-section search.
pub fn extract_frequency(series: &TimeSeries) -> Result<f64> {
    let n = series.times.len();
    if n < 8 {
        return Err(Error::Signal(format!("need at least 8 samples, got {n}")));
    }
    let mean = series.values.iter().sum::<f64>() / n as f64;
    let var = series.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let scale = series.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if var <= (1e-12 * scale.max(f64::MIN_POSITIVE)).powi(2) || var == 0.0 {
        return Err(Error::Signal("flat signal".into()));
    }
    let span = series.span();
    let mut gaps: Vec<f64> = series.times.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(f64::total_cmp);
    let nyquist = std::f64::consts::PI / gaps[gaps.len() / 2];
    let base = 2.0 * std::f64::consts::PI / span;
    let dw = base / 5.0;
    let lo = base;
    let steps = ((nyquist - lo) / dw).ceil().max(3.0) as usize;
    let mut best = (0usize, f64::NEG_INFINITY);
    let powers: Vec<f64> = (0..=steps)
        .map(|k| sinusoid_power(series, lo + k as f64 * dw))
        .collect();
    for (k, &p) in powers.iter().enumerate() {
        if p > best.1 {
            best = (k, p);
        }
    }
    let k = best.0;
    let mut w = lo + k as f64 * dw;
    if k > 0 && k < steps {
        let (a, b, c) = (powers[k - 1], powers[k], powers[k + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            w += 0.5 * dw * (a - c) / denom;
        }
    }
    // golden-section polish within one grid cell
    let (mut x0, mut x1) = (w - dw, w + dw);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..40 {
        let a = x1 - g * (x1 - x0);
        let b = x0 + g * (x1 - x0);
        if sinusoid_power(series, a) > sinusoid_power(series, b) {
            x1 = b;
        } else {
            x0 = a;
        }
    }
    w = 0.5 * (x0 + x1);
    if w * span < 4.0 * std::f64::consts::PI {
        return Err(Error::Signal(format!(
            "series covers {:.2} periods of the dominant frequency; at least 2 are required",
            w * span / (2.0 * std::f64::consts::PI)
        )));
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{make_space, Level};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn fidelity_basics() {
        let s = make_space(2, 2, 0, true).unwrap();
        let g = StateVector::uniform(s, Level::G, 0).unwrap();
        let e = StateVector::uniform(s, Level::E, 0).unwrap();
        assert_eq!(fidelity(&g, &g).unwrap(), 1.0);
        assert_eq!(fidelity(&g, &e).unwrap(), 0.0);
        let plus = StateVector::ghz_legs(s, &[(Level::G, c(FRAC_1_SQRT_2)), (Level::E, c(FRAC_1_SQRT_2))]).unwrap();
        let minus = StateVector::ghz_legs(s, &[(Level::G, c(FRAC_1_SQRT_2)), (Level::E, c(-FRAC_1_SQRT_2))]).unwrap();
        assert!(fidelity(&plus, &minus).unwrap().abs() < 1e-15);
        assert!((fidelity(&plus.to_density(), &plus).unwrap() - 1.0).abs() < 1e-15);
        let other = make_space(1, 2, 0, true).unwrap();
        assert!(fidelity(&StateVector::uniform(other, Level::G, 0).unwrap(), &g).is_err());
    }

    #[test]
    fn partial_trace_cases() {
        let atoms = make_space(2, 3, 0, true).unwrap();
        let psi = StateVector::ghz_legs(atoms, &[(Level::G, c(0.6)), (Level::F, C64::new(0.0, 0.8))]).unwrap();
        let full = psi.with_fock(3, 2).unwrap();
        let red = reduce_to_atoms(&full).unwrap();
        assert!(crate::algebra::expm::max_abs(&(red.matrix() - psi.to_density().matrix())) < 1e-15);
        assert!((red.trace() - 1.0).abs() < 1e-12);
        let red_mixed = reduce_to_atoms(&full.to_density()).unwrap();
        assert!(trace_distance(&red, &red_mixed).unwrap() < 1e-14);

        // (|g,0> + |e,1>)/sqrt2 has purity 1/2 on the atom
        let s = make_space(1, 2, 1, false).unwrap();
        let mut amps = nalgebra::DVector::zeros(4);
        amps[s.encode(&[0], 0).unwrap()] = c(FRAC_1_SQRT_2);
        amps[s.encode(&[1], 1).unwrap()] = c(FRAC_1_SQRT_2);
        let bell = StateVector::from_amplitudes(s, amps).unwrap();
        assert!((reduce_to_atoms(&bell).unwrap().purity() - 0.5).abs() < 1e-15);
        assert!(matches!(reduce_to_atoms(&psi), Err(Error::NoMode)));
    }

    #[test]
    fn reduction_commutes_with_atomic_unitaries() {
        let s = make_space(2, 3, 2, false).unwrap();
        let mut amps = nalgebra::DVector::from_fn(s.dim(), |i, _| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()));
        amps /= c(amps.norm());
        let psi = StateVector::from_amplitudes(s, amps).unwrap();
        let u = crate::dynamics::carrier_rotation(3, 0.7, 1.1);
        let mut rotated = psi.clone();
        rotated.apply_local(1, &u).unwrap();
        let lhs = reduce_to_atoms(&rotated).unwrap();
        let mut rhs = reduce_to_atoms(&psi).unwrap();
        rhs.apply_local(1, &u).unwrap();
        assert!(trace_distance(&lhs, &rhs).unwrap() < 1e-12);
    }

    #[test]
    fn legs() {
        let s = make_space(3, 4, 0, true).unwrap();
        let psi = StateVector::ghz_legs(s, &[(Level::G, c(0.5)), (Level::E, c(0.5)), (Level::F, C64::new(0.0, FRAC_1_SQRT_2))]).unwrap();
        let legs: Vec<BasisLabel> = ["ggg", "eee", "fff", "hhh"].iter().map(|l| l.parse().unwrap()).collect();
        let p = leg_populations(&psi, &legs).unwrap();
        for (got, want) in p.iter().zip([0.25, 0.25, 0.5, 0.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(leg_populations(&psi, &["gg".parse().unwrap()]).is_err());
    }

    #[test]
    fn frequency_of_clean_cosine() {
        let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.5).collect();
        let values = times.iter().map(|t| (0.05 * t).cos()).collect();
        let w = extract_frequency(&TimeSeries::new(times, values).unwrap()).unwrap();
        assert!((w - 0.05).abs() / 0.05 < 0.01);
    }

    #[test]
    fn frequency_errors() {
        let times: Vec<f64> = (0..200).map(|k| k as f64 * 0.1).collect();
        let flat = TimeSeries::new(times.clone(), vec![0.3; 200]).unwrap();
        assert!(extract_frequency(&flat).is_err());
        let slow = TimeSeries::new(times.clone(), times.iter().map(|t| (0.3 * t).sin()).collect()).unwrap();
        assert!(extract_frequency(&slow).is_err());
        assert!(TimeSeries::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn frequency_invariant_under_scale_and_offset(amp in 0.05f64..20.0, offset in -5.0f64..5.0, w in 0.35f64..1.5, phase in 0.0f64..6.28) {
            let times: Vec<f64> = (0..600).map(|k| k as f64 * 0.1).collect();
            let raw: Vec<f64> = times.iter().map(|t| (w * t + phase).cos()).collect();
            let base = extract_frequency(&TimeSeries::new(times.clone(), raw.clone()).unwrap()).unwrap();
            let moved = extract_frequency(&TimeSeries::new(times, raw.iter().map(|v| amp * v + offset).collect()).unwrap()).unwrap();
            prop_assert!((base - moved).abs() <= 1e-6 * base);
            prop_assert!((base - w).abs() / w < 0.01);
        }

        #[test]
        fn fidelity_symmetric_and_phase_blind(re in proptest::collection::vec(-1.0f64..1.0, 8), im in proptest::collection::vec(-1.0f64..1.0, 8), ph in 0.0f64..6.3) {
            let s = make_space(3, 2, 0, true).unwrap();
            let a = nalgebra::DVector::from_fn(8, |i, _| C64::new(re[i], im[i]));
            prop_assume!(a.norm() > 1e-3);
            let b = nalgebra::DVector::from_fn(8, |i, _| C64::new(im[(i + 3) % 8], re[(i + 5) % 8]));
            prop_assume!(b.norm() > 1e-3);
            let a = StateVector::from_amplitudes(s, a).unwrap().normalized().unwrap();
            let b = StateVector::from_amplitudes(s, b).unwrap().normalized().unwrap();
            let f_ab = fidelity(&a, &b).unwrap();
            prop_assert!((f_ab - fidelity(&b, &a).unwrap()).abs() < 1e-14);
            let rotated = StateVector::from_amplitudes(s, a.amplitudes() * C64::from_polar(1.0, ph)).unwrap();
            prop_assert!((f_ab - fidelity(&rotated, &b).unwrap()).abs() < 1e-14);
        }
    }
}
