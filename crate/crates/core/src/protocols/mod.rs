//! Staged entanglement protocols: drive schedules, ideal local pulses,
//! measurements, and their closed-form target states.

mod run;

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebra::{local, Level, Space, StateVector};
use crate::error::{Error, Result};
use crate::hamiltonians::{lambda_cavity, lambda_ion, DriveParams, FrameTag};
use crate::C64;

pub use run::{run_plan, run_plan_with, Branch, BranchState, Engine, InitialState, ProtocolResult, RunOptions};

/// Source of the effective coupling `lambda` for a plan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Bare effective coupling; only the effective engine can run such plans.
    Lambda(f64),
    /// Dispersive cavity, `lambda = g^2 / 2 delta`.
    Cavity { g: f64, delta: f64 },
    /// Two-laser ion trap, `lambda = 2 Omega^2 eta^2 / delta`.
    Ion { omega: f64, eta: f64, delta: f64, nu: f64, lamb_dicke_order: usize },
}

impl Coupling {
    pub fn ion(omega: f64, eta: f64, delta: f64) -> Self {
        Coupling::Ion { omega, eta, delta, nu: 0.0, lamb_dicke_order: 2 }
    }

    pub fn lambda(&self) -> Result<f64> {
        let l = match *self {
            Coupling::Lambda(l) => l,
            Coupling::Cavity { g, delta } => lambda_cavity(g, delta)?,
            Coupling::Ion { omega, eta, delta, .. } => lambda_ion(omega, eta, delta)?,
        };
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidParameter(format!("effective coupling must be positive, got {l}")));
        }
        Ok(l)
    }

    /// Lower bound on the carrier Rabi frequency used when picking default
    /// harmonics: `Omega >= 20 |delta|` for the cavity, nothing otherwise.
    /// Around `Omega = 10 |delta|` the exchange rate still depends on the
    /// photon number for `n >= 2`.
    fn carrier_floor(&self) -> f64 {
        match *self {
            Coupling::Cavity { delta, .. } => 20.0 * delta.abs(),
            _ => 0.0,
        }
    }

    fn has_carrier(&self) -> bool {
        !matches!(self, Coupling::Ion { .. })
    }

    fn stage(&self, carrier: f64, duration: f64) -> Result<DriveStage> {
        let lambda = self.lambda()?;
        let (params, frame) = match *self {
            Coupling::Lambda(_) => (DriveParams { omega: carrier, ..Default::default() }, FrameTag::Effective),
            Coupling::Cavity { g, delta } => (DriveParams::cavity(g, delta, carrier), FrameTag::InteractionPicture),
            Coupling::Ion { omega, eta, delta, nu, lamb_dicke_order } => (
                DriveParams { omega, eta, delta, nu, lamb_dicke_order, ..Default::default() },
                FrameTag::IonInteraction,
            ),
        };
        params.validate()?;
        Ok(DriveStage { params, carrier, lambda, duration, frame })
    }
}

/// One collective drive period.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveStage {
    pub params: DriveParams,
    /// Rabi frequency of the resonant classical field entering `H0`.
    pub carrier: f64,
    pub lambda: f64,
    pub duration: f64,
    pub frame: FrameTag,
}

/// Ideal single-atom unitary applied between drive stages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMap {
    /// `|e> -> |f>`, realized as the swap `e <-> f`.
    ExciteToAux,
    /// `g <-> f` together with `e <-> h`.
    PairSwap,
    /// Three-level rotation that prepares the heralding measurement.
    Reduction,
}

impl TransferMap {
    /// Matrix on a `d`-level atom (identity on levels it does not touch).
    pub fn matrix(self, d: usize) -> Result<DMatrix<C64>> {
        let need = match self {
            TransferMap::ExciteToAux | TransferMap::Reduction => 3,
            TransferMap::PairSwap => 4,
        };
        if d < need {
            return Err(Error::Plan(format!("{self:?} needs {need} atomic levels, space has {d}")));
        }
        let m = match self {
            TransferMap::ExciteToAux => local::swap_levels(d, &[(Level::E, Level::F)]),
            TransferMap::PairSwap => local::swap_levels(d, &[(Level::G, Level::F), (Level::E, Level::H)]),
            TransferMap::Reduction => {
                let mut m = DMatrix::identity(d, d);
                m.view_mut((0, 0), (3, 3)).copy_from(&reduction_matrix());
                m
            }
        };
        let err = local::unitarity_error(&m);
        if err > 1e-12 {
            return Err(Error::NotUnitary(err));
        }
        Ok(m)
    }
}

/// Columns are the images of `|g>`, `|e>`, `|f>`.
pub fn reduction_matrix() -> DMatrix<C64> {
    let (a, b, c) = (FRAC_1_SQRT_2, 1.0 / 10f64.sqrt(), (2.0f64 / 5.0).sqrt());
    let (p, q) = (2.0 / 5f64.sqrt(), 1.0 / 5f64.sqrt());
    DMatrix::from_row_slice(3, 3, &[a, -a, 0.0, b, b, p, -c, -c, q]).map(|x| C64::new(x, 0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomSelection {
    All,
    Single(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementMode {
    /// Keep every outcome with its Born probability.
    Enumerate,
    /// Keep only the given outcome (its probability is not renormalized).
    PostSelect(Level),
    /// Draw one outcome from a seeded generator.
    Sample,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseStage {
    CollectiveDrive(DriveStage),
    LocalTransfer { map: TransferMap, atoms: AtomSelection },
    /// Projective measurement of one atom in its level basis.
    Measurement { atom: usize, mode: MeasurementMode },
}

/// Times, Rabi frequencies and harmonics actually scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub t1: f64,
    pub t2: Option<f64>,
    pub omega: f64,
    pub omega_prime: Option<f64>,
    pub k: u64,
    pub k_prime: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct ProtocolPlan {
    pub name: String,
    pub stages: Vec<PulseStage>,
    /// Atomic space of the protocol (no mode).
    pub space: Space,
    /// Closed-form final state on `space`; for measuring protocols it is the
    /// heralded branch, including the measured atom.
    pub target: StateVector,
    /// Outcome label of the branch the target refers to.
    pub target_branch: Option<String>,
    pub timings: Timings,
}

impl ProtocolPlan {
    pub fn validate(&self) -> Result<()> {
        if self.space.has_mode() {
            return Err(Error::Plan("plan space must not carry a mode".into()));
        }
        if self.target.space() != &self.space {
            return Err(Error::Plan("target lives on a different space".into()));
        }
        let d = self.space.atom_dim();
        for stage in &self.stages {
            match stage {
                PulseStage::CollectiveDrive(s) => {
                    if !(s.duration > 0.0 && s.duration.is_finite()) {
                        return Err(Error::Plan(format!("drive duration must be positive, got {}", s.duration)));
                    }
                    s.params.validate()?;
                }
                PulseStage::LocalTransfer { map, atoms } => {
                    map.matrix(d)?;
                    if let AtomSelection::Single(j) = atoms {
                        self.space.check_atom(*j)?;
                    }
                }
                PulseStage::Measurement { atom, mode } => {
                    self.space.check_atom(*atom)?;
                    if let MeasurementMode::PostSelect(l) = mode {
                        if l.index() >= d {
                            return Err(Error::Plan(format!("outcome {} outside {d}-level atom", l.symbol())));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Replace the frame of every drive stage.
    pub fn with_frame(mut self, frame: FrameTag) -> Self {
        for stage in &mut self.stages {
            if let PulseStage::CollectiveDrive(s) = stage {
                s.frame = frame;
            }
        }
        self
    }

    /// Change the measurement mode of every measurement stage.
    pub fn with_measurement_mode(mut self, mode: MeasurementMode) -> Self {
        for stage in &mut self.stages {
            if let PulseStage::Measurement { mode: m, .. } = stage {
                *m = mode;
            }
        }
        self
    }

    /// Embed the plan in atoms with more levels (extra levels stay idle).
    pub fn with_atom_dim(mut self, atom_dim: usize) -> Result<Self> {
        let d = self.space.atom_dim();
        if atom_dim < d {
            return Err(Error::Plan(format!("{} needs at least {d} atomic levels", self.name)));
        }
        if atom_dim == d {
            return Ok(self);
        }
        let space = Space::atoms(self.space.atom_count(), atom_dim)?;
        let mut amps = DVector::zeros(space.dim());
        for (i, a) in self.target.amplitudes().iter().enumerate() {
            let (levels, _) = self.space.decode(i);
            amps[space.encode(&levels, 0)?] = *a;
        }
        self.target = StateVector::from_amplitudes(space, amps)?;
        self.space = space;
        self.validate()?;
        Ok(self)
    }

    /// Initial state `|g...g>` on the plan atoms, optionally with the mode in
    /// Fock state `n`.
    pub fn ground_state(&self, mode: Option<(usize, usize)>) -> Result<StateVector> {
        let atoms = StateVector::uniform(self.space, Level::G, 0)?;
        match mode {
            Some((cutoff, n)) => atoms.with_fock(cutoff, n),
            None => Ok(atoms),
        }
    }

    /// Product of all drive and transfer stages under the effective
    /// propagator, as an operator on the atoms. Measurements are skipped.
    pub fn effective_unitary(&self) -> Result<crate::algebra::Operator> {
        run::effective_unitary(self)
    }
}

fn check_count(n: usize, even: bool, min: usize, name: &str) -> Result<()> {
    if n < min {
        return Err(Error::Plan(format!("{name} needs at least {min} atoms, got {n}")));
    }
    if even && n % 2 != 0 {
        return Err(Error::Plan(format!("{name} needs an even number of atoms, got {n}")));
    }
    Ok(())
}

/// Smallest `m >= start` (stepping by `step`) whose carrier `(a m + b) pi / t`
/// reaches `floor`.
fn smallest_harmonic(start: u64, step: u64, a: f64, b: f64, t: f64, floor: f64) -> u64 {
    let mut m = start;
    while (a * m as f64 + b) * PI / t < floor * (1.0 - 1e-12) {
        m += step;
    }
    m
}

fn legs(space: Space, legs: &[(Level, C64)]) -> Result<StateVector> {
    StateVector::ghz_legs(space, legs)
}

/// `sin(lambda t1) = 1/sqrt3`, `Omega t1 = k pi`; then `e -> f`; then
/// `lambda t2 = pi/4`, `Omega' t2 = 2 k' pi`. Two qutrits.
pub fn plan_two_atom_qutrit(coupling: &Coupling, k: Option<u64>, k_prime: Option<u64>) -> Result<ProtocolPlan> {
    let lambda = coupling.lambda()?;
    let t1 = (1.0 / 3f64.sqrt()).asin() / lambda;
    let t2 = PI / (4.0 * lambda);
    let floor = coupling.carrier_floor();
    let (k, k_prime) = if coupling.has_carrier() {
        let k = k.unwrap_or_else(|| smallest_harmonic(2, 2, 1.0, 0.0, t1, floor));
        let k_prime = k_prime.unwrap_or_else(|| smallest_harmonic(1, 1, 2.0, 0.0, t2, floor));
        if k == 0 || k % 2 != 0 {
            return Err(Error::Plan(format!("k must be a positive even integer, got {k}")));
        }
        if k_prime == 0 {
            return Err(Error::Plan("k' must be a positive integer".into()));
        }
        (k, k_prime)
    } else {
        if k.unwrap_or(0) != 0 || k_prime.unwrap_or(0) != 0 {
            return Err(Error::Plan("the ion scheme has no carrier drive; k and k' must be 0".into()));
        }
        (0, 0)
    };
    let omega = k as f64 * PI / t1;
    let omega_prime = 2.0 * k_prime as f64 * PI / t2;
    let space = Space::atoms(2, 3)?;
    let phase1 = C64::from_polar(1.0, -lambda * t1);
    let phase2 = C64::from_polar(1.0, -lambda * t2);
    let s = 1.0 / 3f64.sqrt();
    let mi = C64::new(0.0, -1.0);
    let target = legs(
        space,
        &[(Level::G, phase1 * phase2 * s), (Level::E, phase1 * phase2 * mi * s), (Level::F, phase1 * mi * s)],
    )?;
    let plan = ProtocolPlan {
        name: "two-atom-qutrit".into(),
        stages: vec![
            PulseStage::CollectiveDrive(coupling.stage(omega, t1)?),
            PulseStage::LocalTransfer { map: TransferMap::ExciteToAux, atoms: AtomSelection::All },
            PulseStage::CollectiveDrive(coupling.stage(omega_prime, t2)?),
        ],
        space,
        target,
        target_branch: None,
        timings: Timings { t1, t2: Some(t2), omega, omega_prime: Some(omega_prime), k, k_prime: Some(k_prime) },
    };
    plan.validate()?;
    Ok(plan)
}

/// Duration, carrier and harmonic of one GHZ drive on `n` atoms.
fn ghz_drive(coupling: &Coupling, n: usize, n_choice: Option<u64>) -> Result<(f64, f64, u64)> {
    let t = PI / (4.0 * coupling.lambda()?);
    let odd = n % 2 == 1;
    if !coupling.has_carrier() {
        if odd {
            return Err(Error::Plan("odd atom numbers need a carrier drive, which the ion scheme lacks".into()));
        }
        if n_choice.unwrap_or(0) != 0 {
            return Err(Error::Plan("the ion scheme has no carrier drive; n must be 0".into()));
        }
        return Ok((t, 0.0, 0));
    }
    let b = if odd { 0.75 } else { 0.0 };
    let a = if odd { 2.0 } else { 1.0 };
    let m = n_choice.unwrap_or_else(|| smallest_harmonic(0, 1, a, b, t, coupling.carrier_floor()));
    Ok((t, (a * m as f64 + b) * PI / t, m))
}

/// GHZ state of `n` two-level atoms: `lambda t = pi/4` with
/// `Omega t = n pi` (even) or `(2n + 3/4) pi` (odd).
pub fn plan_ghz_two_level(n: usize, coupling: &Coupling, n_choice: Option<u64>) -> Result<ProtocolPlan> {
    check_count(n, false, 2, "ghz-two-level")?;
    let (t, omega, m) = ghz_drive(coupling, n, n_choice)?;
    let space = Space::atoms(n, 2)?;
    let r = FRAC_1_SQRT_2;
    let target = if n % 2 == 0 {
        let sign = if (n / 2) % 2 == 0 { 1.0 } else { -1.0 };
        legs(space, &[(Level::G, C64::from_polar(r, -FRAC_PI_4)), (Level::E, C64::from_polar(sign * r, FRAC_PI_4))])?
    } else {
        let sign = if ((n - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let global = C64::from_polar(1.0, 7.0 * PI / 8.0);
        legs(
            space,
            &[
                (Level::G, global * C64::from_polar(r, -FRAC_PI_4)),
                (Level::E, global * C64::from_polar(sign * r, FRAC_PI_4)),
            ],
        )?
    };
    let plan = ProtocolPlan {
        name: "ghz-two-level".into(),
        stages: vec![PulseStage::CollectiveDrive(coupling.stage(omega, t)?)],
        space,
        target,
        target_branch: None,
        timings: Timings { t1: t, omega, k: m, ..Default::default() },
    };
    plan.validate()?;
    Ok(plan)
}

fn three_level_stages(n: usize, coupling: &Coupling, n_choice: Option<u64>) -> Result<(Vec<PulseStage>, Timings)> {
    let (t, omega, m) = ghz_drive(coupling, n, n_choice)?;
    let drive = PulseStage::CollectiveDrive(coupling.stage(omega, t)?);
    let stages = vec![drive, PulseStage::LocalTransfer { map: TransferMap::ExciteToAux, atoms: AtomSelection::All }, drive];
    let timings = Timings { t1: t, t2: Some(t), omega, omega_prime: Some(omega), k: m, k_prime: Some(m) };
    Ok((stages, timings))
}

fn parity_sign(n: usize) -> f64 {
    if (n / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Three-leg entangled state of `n` (even) three-level atoms.
pub fn plan_ghz_three_level(n: usize, coupling: &Coupling, n_choice: Option<u64>) -> Result<ProtocolPlan> {
    check_count(n, true, 2, "ghz-three-level")?;
    let (stages, timings) = three_level_stages(n, coupling, n_choice)?;
    let space = Space::atoms(n, 3)?;
    let s = parity_sign(n);
    let q = C64::from_polar(1.0, -FRAC_PI_4);
    let target = legs(
        space,
        &[
            (Level::G, q * q * 0.5),
            (Level::E, q * C64::from_polar(0.5 * s, FRAC_PI_4)),
            (Level::F, C64::from_polar(s * FRAC_1_SQRT_2, FRAC_PI_4)),
        ],
    )?;
    let plan = ProtocolPlan { name: "ghz-three-level".into(), stages, space, target, target_branch: None, timings };
    plan.validate()?;
    Ok(plan)
}

/// Outcome label of a measurement branch.
pub fn outcome_label(atom: usize, level: Level) -> String {
    format!("a{atom}={}", level.symbol())
}

/// Three-leg GHZ state on `n - 1` atoms heralded by finding the last atom in
/// `|f>` after the reduction pulse.
pub fn plan_measure_reduce(n: usize, coupling: &Coupling, n_choice: Option<u64>) -> Result<ProtocolPlan> {
    check_count(n, true, 4, "measure-reduce")?;
    let (mut stages, timings) = three_level_stages(n, coupling, n_choice)?;
    let last = n - 1;
    stages.push(PulseStage::LocalTransfer { map: TransferMap::Reduction, atoms: AtomSelection::Single(last) });
    stages.push(PulseStage::Measurement { atom: last, mode: MeasurementMode::Enumerate });
    let space = Space::atoms(n, 3)?;
    let s = parity_sign(n);
    let r = 1.0 / 3f64.sqrt();
    let mut amps = DVector::zeros(space.dim());
    let f = Level::F.index();
    for (level, amp) in [
        (Level::G, C64::from_polar(r, -PI / 2.0)),
        (Level::E, C64::new(s * r, 0.0)),
        (Level::F, C64::from_polar(-s * r, FRAC_PI_4)),
    ] {
        let mut levels = vec![level.index(); n];
        levels[last] = f;
        amps[space.encode(&levels, 0)?] = amp;
    }
    let target = StateVector::from_amplitudes(space, amps)?;
    let plan = ProtocolPlan {
        name: "measure-reduce".into(),
        stages,
        space,
        target,
        target_branch: Some(outcome_label(last, Level::F)),
        timings,
    };
    plan.validate()?;
    Ok(plan)
}

/// Four-leg entangled state of `n` (even) four-level atoms.
pub fn plan_ghz_four_level(n: usize, coupling: &Coupling, n_choice: Option<u64>) -> Result<ProtocolPlan> {
    check_count(n, true, 2, "ghz-four-level")?;
    let (mut stages, timings) = three_level_stages(n, coupling, n_choice)?;
    let drive = stages[0];
    stages.push(PulseStage::LocalTransfer { map: TransferMap::PairSwap, atoms: AtomSelection::All });
    stages.push(drive);
    let space = Space::atoms(n, 4)?;
    let s = parity_sign(n);
    let target = legs(
        space,
        &[
            (Level::G, C64::new(0.5 * s, 0.0)),
            (Level::E, C64::new(0.0, 0.5)),
            (Level::F, C64::new(0.0, -0.5)),
            (Level::H, C64::new(0.5 * s, 0.0)),
        ],
    )?;
    let plan = ProtocolPlan { name: "ghz-four-level".into(), stages, space, target, target_branch: None, timings };
    plan.validate()?;
    Ok(plan)
}

/// Names accepted by [`plan_by_name`].
pub const PROTOCOL_NAMES: [&str; 5] = ["two-atom-qutrit", "ghz-two-level", "ghz-three-level", "measure-reduce", "ghz-four-level"];

/// Build a plan from its name. `harmonic` is `k` (or `n` for GHZ plans);
/// `harmonic_prime` is `k'` and only used by the qutrit plan. `atoms` is
/// ignored by the qutrit plan.
pub fn plan_by_name(name: &str, atoms: usize, coupling: &Coupling, harmonic: Option<u64>, harmonic_prime: Option<u64>) -> Result<ProtocolPlan> {
    match name {
        "two-atom-qutrit" => plan_two_atom_qutrit(coupling, harmonic, harmonic_prime),
        "ghz-two-level" => plan_ghz_two_level(atoms, coupling, harmonic),
        "ghz-three-level" => plan_ghz_three_level(atoms, coupling, harmonic),
        "measure-reduce" => plan_measure_reduce(atoms, coupling, harmonic),
        "ghz-four-level" => plan_ghz_four_level(atoms, coupling, harmonic),
        other => Err(Error::Plan(format!("unknown protocol '{other}'; expected one of {}", PROTOCOL_NAMES.join(", ")))),
    }
}

#[cfg(test)]
mod tests;
