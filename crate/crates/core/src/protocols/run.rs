use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{outcome_label, AtomSelection, DriveStage, MeasurementMode, ProtocolPlan, PulseStage, Timings};
use crate::algebra::{DensityMatrix, Level, Operator, Space, StateVector};
use crate::analysis::{fidelity, reduce_to_atoms};
use crate::dynamics::{carrier_rotation, evolve_lindblad, evolve_td, DecaySpec, EffectivePropagator, IntegratorConfig};
use crate::error::{Error, Result};
use crate::hamiltonians::{h_effective, hamiltonian_model, FrameTag, TimeDependentHamiltonian};
use crate::C64;

/// How drive stages are propagated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Closed form `exp(-i H0 t) exp(-i H_e t)`.
    Effective,
    /// Integrate the cavity Hamiltonian of each stage's frame.
    FullCavity,
    /// Integrate the ion Hamiltonian of each stage's frame.
    FullIon,
    /// Master equation with cavity decay.
    Lindblad(DecaySpec),
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Effective => "effective",
            Engine::FullCavity => "full-cavity",
            Engine::FullIon => "full-ion",
            Engine::Lindblad(_) => "lindblad",
        }
    }

    fn accepts(&self, frame: FrameTag) -> bool {
        match self {
            Engine::Effective => true,
            Engine::FullCavity | Engine::Lindblad(_) => !frame.is_ion(),
            Engine::FullIon => frame.is_ion() || frame == FrameTag::Effective,
        }
    }
}

#[derive(Clone, Debug)]
pub enum InitialState {
    Pure(StateVector),
    Mixed(DensityMatrix),
    /// Weighted pure states, e.g. a thermal mode in the Fock basis.
    Ensemble(Vec<(f64, StateVector)>),
}

impl InitialState {
    fn space(&self) -> Result<Space> {
        match self {
            InitialState::Pure(s) => Ok(*s.space()),
            InitialState::Mixed(r) => Ok(*r.space()),
            InitialState::Ensemble(m) => {
                let first = m.first().ok_or_else(|| Error::Plan("empty ensemble".into()))?;
                let space = *first.1.space();
                if m.iter().any(|(p, s)| s.space() != &space || !(*p >= 0.0)) {
                    return Err(Error::Plan("ensemble members must share a space and carry non-negative weights".into()));
                }
                Ok(space)
            }
        }
    }
}

impl From<StateVector> for InitialState {
    fn from(s: StateVector) -> Self {
        InitialState::Pure(s)
    }
}

impl From<DensityMatrix> for InitialState {
    fn from(r: DensityMatrix) -> Self {
        InitialState::Mixed(r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub integrator: IntegratorConfig,
    /// Seed for `MeasurementMode::Sample`.
    pub seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { integrator: IntegratorConfig::default(), seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub enum BranchState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl BranchState {
    pub fn space(&self) -> &Space {
        match self {
            BranchState::Pure(s) => s.space(),
            BranchState::Mixed(r) => r.space(),
        }
    }

    /// Atomic state with the mode traced out.
    pub fn atomic(&self) -> Result<BranchState> {
        Ok(match self {
            BranchState::Pure(s) if !s.space().has_mode() => self.clone(),
            BranchState::Mixed(r) if !r.space().has_mode() => self.clone(),
            BranchState::Pure(s) => BranchState::Mixed(reduce_to_atoms(s)?),
            BranchState::Mixed(r) => BranchState::Mixed(reduce_to_atoms(r)?),
        })
    }

    pub fn atomic_density(&self) -> Result<DensityMatrix> {
        Ok(match self.atomic()? {
            BranchState::Pure(s) => s.to_density(),
            BranchState::Mixed(r) => r,
        })
    }

    /// Fidelity of the atomic state against an atoms-only target.
    pub fn fidelity(&self, target: &StateVector) -> Result<f64> {
        match self.atomic()? {
            BranchState::Pure(s) => fidelity(&s, target),
            BranchState::Mixed(r) => fidelity(&r, target),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Branch {
    pub label: String,
    pub probability: f64,
    /// Normalized post-measurement state.
    pub state: BranchState,
    pub fidelity: f64,
}

#[derive(Clone, Debug)]
pub struct ProtocolResult {
    pub plan: String,
    pub engine: Engine,
    pub branches: Vec<Branch>,
    pub timings: Timings,
}

impl ProtocolResult {
    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }

    pub fn branch(&self, label: &str) -> Option<&Branch> {
        self.branches.iter().find(|b| b.label == label)
    }

    /// The branch the plan target refers to (the only branch for plans
    /// without measurement).
    pub fn target_branch(&self, plan: &ProtocolPlan) -> Option<&Branch> {
        match &plan.target_branch {
            Some(label) => self.branch(label),
            None => self.branches.first(),
        }
    }
}

/// Label of the single branch of a plan without measurements.
pub const UNMEASURED: &str = "all";

/// Run with default integrator settings.
pub fn run_plan(plan: &ProtocolPlan, initial: impl Into<InitialState>, engine: Engine) -> Result<ProtocolResult> {
    run_plan_with(plan, initial, engine, &RunOptions::default())
}

pub fn run_plan_with(plan: &ProtocolPlan, initial: impl Into<InitialState>, engine: Engine, options: &RunOptions) -> Result<ProtocolResult> {
    plan.validate()?;
    options.integrator.validate()?;
    let initial = initial.into();
    let space = initial.space()?;
    if !space.same_atoms(&plan.space) {
        return Err(Error::Shape { expected: plan.space.to_string(), found: space.to_string() });
    }
    if engine != Engine::Effective && !space.has_mode() {
        return Err(Error::Engine(format!("{} engine needs a bosonic mode in the initial state", engine.name())));
    }
    for stage in &plan.stages {
        if let PulseStage::CollectiveDrive(s) = stage {
            if !engine.accepts(s.frame) {
                return Err(Error::Engine(format!("{} engine cannot run a {:?} stage", engine.name(), s.frame)));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    let tracks: Vec<Track> = match (engine, initial) {
        (Engine::Lindblad(_), init) => {
            let rho = match init {
                InitialState::Pure(s) => s.to_density(),
                InitialState::Mixed(r) => r,
                InitialState::Ensemble(m) => DensityMatrix::from_ensemble(space, &m)?,
            };
            execute(plan, Track::root(Evolving::Mixed(rho)), engine, options, &mut rng)?
        }
        (Engine::Effective, InitialState::Mixed(r)) => execute(plan, Track::root(Evolving::Mixed(r)), engine, options, &mut rng)?,
        (_, InitialState::Pure(s)) => execute(plan, Track::root(Evolving::Pure(s)), engine, options, &mut rng)?,
        (_, InitialState::Mixed(r)) => run_ensemble(plan, r.to_ensemble(1e-14), engine, options, &mut rng)?,
        (_, InitialState::Ensemble(m)) => run_ensemble(plan, m, engine, options, &mut rng)?,
    };

    let branches = tracks
        .into_iter()
        .map(|t| {
            let state = match t.state {
                Evolving::Pure(s) => BranchState::Pure(s),
                Evolving::Mixed(r) => BranchState::Mixed(r),
            };
            let fidelity = state.fidelity(&plan.target)?;
            Ok(Branch { label: t.label, probability: t.probability, state, fidelity })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProtocolResult { plan: plan.name.clone(), engine, branches, timings: plan.timings })
}

#[derive(Clone, Debug)]
enum Evolving {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

#[derive(Clone, Debug)]
struct Track {
    label: String,
    probability: f64,
    state: Evolving,
}

impl Track {
    fn root(state: Evolving) -> Self {
        Track { label: UNMEASURED.into(), probability: 1.0, state }
    }
}

/// Branches below this probability are dropped.
const MIN_BRANCH: f64 = 1e-14;

fn execute(plan: &ProtocolPlan, root: Track, engine: Engine, options: &RunOptions, rng: &mut ChaCha8Rng) -> Result<Vec<Track>> {
    let mut tracks = vec![root];
    let mut clock = 0.0;
    for stage in &plan.stages {
        match stage {
            PulseStage::CollectiveDrive(s) => {
                for t in &mut tracks {
                    drive(&mut t.state, s, clock, engine, &options.integrator)?;
                }
                clock += s.duration;
            }
            PulseStage::LocalTransfer { map, atoms } => {
                let d = plan.space.atom_dim();
                let m = map.matrix(d)?;
                for t in &mut tracks {
                    transfer(&mut t.state, &m, *atoms)?;
                }
            }
            PulseStage::Measurement { atom, mode } => {
                let mut next = Vec::new();
                for t in tracks {
                    let outcomes = measure(&t.state, *atom)?;
                    let chosen: Vec<(Level, f64, Evolving)> = match mode {
                        MeasurementMode::Enumerate => outcomes,
                        MeasurementMode::PostSelect(level) => outcomes.into_iter().filter(|o| o.0 == *level).collect(),
                        MeasurementMode::Sample => {
                            let x: f64 = rng.random();
                            let total: f64 = outcomes.iter().map(|o| o.1).sum();
                            let mut acc = 0.0;
                            let mut pick = outcomes.len().saturating_sub(1);
                            for (i, o) in outcomes.iter().enumerate() {
                                acc += o.1 / total;
                                if x < acc {
                                    pick = i;
                                    break;
                                }
                            }
                            outcomes.into_iter().skip(pick).take(1).collect()
                        }
                    };
                    for (level, p, state) in chosen {
                        let label = outcome_label(*atom, level);
                        let label = if t.label == UNMEASURED { label } else { format!("{}&{label}", t.label) };
                        next.push(Track { label, probability: t.probability * p, state });
                    }
                }
                tracks = next;
            }
        }
    }
    Ok(tracks)
}

fn effective_hamiltonian(space: &Space, stage: &DriveStage) -> Result<TimeDependentHamiltonian> {
    let n = space.atom_count() as f64;
    Ok(TimeDependentHamiltonian::constant(&h_effective(space, stage.lambda)?, stage.lambda * n * n))
}

fn drive(state: &mut Evolving, stage: &DriveStage, clock: f64, engine: Engine, cfg: &IntegratorConfig) -> Result<()> {
    let use_closed_form = engine == Engine::Effective
        || (stage.frame == FrameTag::Effective && !matches!(engine, Engine::Lindblad(_)));
    if use_closed_form {
        let space = match state {
            Evolving::Pure(s) => *s.space(),
            Evolving::Mixed(r) => *r.space(),
        };
        let u = EffectivePropagator::new(&space, stage.lambda, stage.carrier, stage.duration)?;
        return match state {
            Evolving::Pure(s) => u.apply(s),
            Evolving::Mixed(r) => {
                *r = u.apply_density(r)?;
                Ok(())
            }
        };
    }
    let space = match state {
        Evolving::Pure(s) => *s.space(),
        Evolving::Mixed(r) => *r.space(),
    };
    if let (Evolving::Mixed(r), Engine::Lindblad(decay)) = (&mut *state, engine) {
        if stage.frame == FrameTag::InteractionPicture && space.has_mode() {
            let h = corotating_hamiltonian(&space, stage)?;
            let phase = stage.params.delta;
            let rho = mode_phase(r, -phase * clock)?;
            *r = mode_phase(&evolve_lindblad(&h, &decay, &rho, 0.0, stage.duration, cfg)?, phase * (clock + stage.duration))?;
            return Ok(());
        }
    }
    let h = if stage.frame == FrameTag::Effective {
        effective_hamiltonian(&space, stage)?
    } else {
        hamiltonian_model(&space, &stage.params, stage.frame, clock)?
    };
    match (&mut *state, engine) {
        (Evolving::Pure(s), Engine::FullCavity | Engine::FullIon) => *s = evolve_td(&h, s, 0.0, stage.duration, cfg)?,
        (Evolving::Mixed(r), Engine::Lindblad(decay)) => *r = evolve_lindblad(&h, &decay, r, 0.0, stage.duration, cfg)?,
        _ => return Err(Error::Engine(format!("{} engine cannot propagate this state kind", engine.name()))),
    }
    if stage.frame.rotates_with_carrier() {
        let rot = carrier_rotation(space.atom_dim(), stage.carrier, stage.duration);
        transfer(state, &rot, AtomSelection::All)?;
    }
    Ok(())
}

/// The cavity interaction picture seen from the frame co-rotating with the
/// mode, `rho = W rho' W^+` with `W(t) = exp(-i delta a^+a t)`. There the
/// generator `H_IP(0) - delta a^+a` is constant and the decay terms keep
/// their form.
fn corotating_hamiltonian(space: &Space, stage: &DriveStage) -> Result<TimeDependentHamiltonian> {
    let h = hamiltonian_model(space, &stage.params, FrameTag::InteractionPicture, 0.0)?;
    let m = space.mode_dim();
    let number = Operator::new(
        *space,
        DMatrix::from_diagonal(&nalgebra::DVector::from_fn(space.dim(), |i, _| C64::new(-stage.params.delta * (i % m) as f64, 0.0))),
    )?;
    Ok(TimeDependentHamiltonian::constant(&(&h.at(0.0) + &number), h.max_frequency()))
}

/// `W rho W^+` with `W = exp(-i theta a^+a)`.
fn mode_phase(rho: &DensityMatrix, theta: f64) -> Result<DensityMatrix> {
    let space = *rho.space();
    let m = space.mode_dim();
    let mut out = rho.matrix().clone();
    for j in 0..space.dim() {
        for i in 0..space.dim() {
            let dn = (i % m) as f64 - (j % m) as f64;
            out[(i, j)] *= C64::from_polar(1.0, -theta * dn);
        }
    }
    DensityMatrix::new_unchecked(space, out)
}

fn transfer(state: &mut Evolving, m: &DMatrix<C64>, atoms: AtomSelection) -> Result<()> {
    match (state, atoms) {
        (Evolving::Pure(s), AtomSelection::All) => s.apply_local_all(m),
        (Evolving::Pure(s), AtomSelection::Single(j)) => s.apply_local(j, m),
        (Evolving::Mixed(r), AtomSelection::All) => {
            for j in 0..r.space().atom_count() {
                r.apply_local(j, m)?;
            }
            Ok(())
        }
        (Evolving::Mixed(r), AtomSelection::Single(j)) => r.apply_local(j, m),
    }
}

/// Outcomes of measuring `atom` in its level basis, as (level, probability,
/// normalized post-measurement state), in level order.
fn measure(state: &Evolving, atom: usize) -> Result<Vec<(Level, f64, Evolving)>> {
    let space = match state {
        Evolving::Pure(s) => *s.space(),
        Evolving::Mixed(r) => *r.space(),
    };
    space.check_atom(atom)?;
    let d = space.atom_dim();
    let stride = space.atom_stride(atom);
    let level_of = |i: usize| (i / stride) % d;
    let mut out = Vec::new();
    for l in 0..d {
        let level = Level::from_index(l).expect("at most four levels");
        match state {
            Evolving::Pure(s) => {
                let mut amps = s.amplitudes().clone();
                for (i, a) in amps.iter_mut().enumerate() {
                    if level_of(i) != l {
                        *a = C64::new(0.0, 0.0);
                    }
                }
                let p = amps.norm_squared();
                if p > MIN_BRANCH {
                    amps /= C64::new(p.sqrt(), 0.0);
                    out.push((level, p, Evolving::Pure(StateVector::from_amplitudes(space, amps)?)));
                }
            }
            Evolving::Mixed(r) => {
                let n = space.dim();
                let mut m = r.matrix().clone();
                for j in 0..n {
                    for i in 0..n {
                        if level_of(i) != l || level_of(j) != l {
                            m[(i, j)] = C64::new(0.0, 0.0);
                        }
                    }
                }
                let p = m.trace().re;
                if p > MIN_BRANCH {
                    m /= C64::new(p, 0.0);
                    out.push((level, p, Evolving::Mixed(DensityMatrix::new_unchecked(space, m)?)));
                }
            }
        }
    }
    Ok(out)
}

/// Run each pure member separately and recombine branch by branch. Each
/// member's leakage budget is scaled by its weight; the weighted total is
/// checked on the final states.
fn run_ensemble(
    plan: &ProtocolPlan,
    members: Vec<(f64, StateVector)>,
    engine: Engine,
    options: &RunOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Track>> {
    let space = *members.first().ok_or_else(|| Error::Plan("empty ensemble".into()))?.1.space();
    let limit = options.integrator.leakage_tol;
    let seeds: Vec<u64> = members.iter().map(|_| rng.random()).collect();
    let runs: Vec<(f64, Vec<Track>)> = members
        .into_par_iter()
        .zip(seeds)
        .map(|((w, psi), seed)| {
            let mut opts = options.clone();
            opts.integrator.leakage_tol = limit.map(|l| if w > 0.0 { l / w } else { f64::INFINITY });
            let mut member_rng = ChaCha8Rng::seed_from_u64(seed);
            let tracks = execute(plan, Track::root(Evolving::Pure(psi)), engine, &opts, &mut member_rng)?;
            Ok((w, tracks))
        })
        .collect::<Result<Vec<_>>>()?;

    if let Some(limit) = limit {
        let mut leaked = 0.0;
        for (w, tracks) in &runs {
            for t in tracks {
                if let Evolving::Pure(s) = &t.state {
                    leaked += w * t.probability * s.top_fock_population();
                }
            }
        }
        if leaked > limit {
            let time = plan.stages.iter().map(|s| if let PulseStage::CollectiveDrive(d) = s { d.duration } else { 0.0 }).sum();
            return Err(Error::Leakage { population: leaked, time });
        }
    }

    let mut labels: Vec<String> = Vec::new();
    for (_, tracks) in &runs {
        for t in tracks {
            if !labels.contains(&t.label) {
                labels.push(t.label.clone());
            }
        }
    }
    let total: f64 = runs.iter().map(|(w, _)| w).sum();
    labels
        .into_iter()
        .map(|label| {
            let mut parts = Vec::new();
            for (w, tracks) in &runs {
                for t in tracks.iter().filter(|t| t.label == label) {
                    if let Evolving::Pure(s) = &t.state {
                        parts.push((w * t.probability, s.clone()));
                    }
                }
            }
            let p: f64 = parts.iter().map(|x| x.0).sum();
            let rho = DensityMatrix::from_ensemble(space, &parts)?;
            let rho = DensityMatrix::new_unchecked(space, rho.into_matrix() / C64::new(p, 0.0))?;
            Ok(Track { label, probability: p / total, state: Evolving::Mixed(rho) })
        })
        .collect()
}

pub(super) fn effective_unitary(plan: &ProtocolPlan) -> Result<Operator> {
    plan.validate()?;
    let space = plan.space;
    let d = space.dim();
    let mut u = DMatrix::<C64>::zeros(d, d);
    for c in 0..d {
        let mut amps = nalgebra::DVector::zeros(d);
        amps[c] = C64::new(1.0, 0.0);
        let mut state = Evolving::Pure(StateVector::from_amplitudes(space, amps)?);
        for stage in &plan.stages {
            match stage {
                PulseStage::CollectiveDrive(s) => drive(&mut state, s, 0.0, Engine::Effective, &IntegratorConfig::default())?,
                PulseStage::LocalTransfer { map, atoms } => transfer(&mut state, &map.matrix(space.atom_dim())?, *atoms)?,
                PulseStage::Measurement { .. } => {}
            }
        }
        if let Evolving::Pure(s) = state {
            u.set_column(c, s.amplitudes());
        }
    }
    Operator::new(space, u)
}
