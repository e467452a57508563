use super::*;
use crate::algebra::{expm::max_abs, make_space, BasisLabel};
use crate::analysis::{leg_populations, trace_distance};
use crate::dynamics::{thermal_ensemble, ThermalSpec};

fn lam(l: f64) -> Coupling {
    Coupling::Lambda(l)
}

fn effective(plan: &ProtocolPlan) -> ProtocolResult {
    run_plan(plan, plan.ground_state(None).unwrap(), Engine::Effective).unwrap()
}

fn uniform_legs(n: usize, levels: &[Level]) -> Vec<BasisLabel> {
    levels.iter().map(|&l| BasisLabel::uniform(l, n)).collect()
}

#[test]
fn qutrit_timings_and_target() {
    let plan = plan_two_atom_qutrit(&lam(0.025), Some(2), Some(1)).unwrap();
    assert!((plan.timings.t1 - 24.619).abs() < 1e-3);
    assert!((plan.timings.t1 * 0.025).sin() - 1.0 / 3f64.sqrt() < 1e-15);
    let r = effective(&plan);
    assert_eq!(r.branches.len(), 1);
    assert!(r.branches[0].fidelity >= 1.0 - 1e-10, "{}", r.branches[0].fidelity);
}

#[test]
fn qutrit_first_stage_amplitudes() {
    let mut plan = plan_two_atom_qutrit(&lam(0.025), Some(2), Some(1)).unwrap();
    plan.stages.truncate(1);
    let r = effective(&plan);
    let BranchState::Pure(psi) = &r.branches[0].state else { panic!("pure expected") };
    let gg = psi.amplitude(0);
    let ee = psi.amplitude(plan.space.uniform_index(Level::E, 0).unwrap());
    assert!((gg.norm_sqr() - 2.0 / 3.0).abs() < 1e-12);
    assert!((ee.norm_sqr() - 1.0 / 3.0).abs() < 1e-12);
    // relative phase -i
    let rel = ee / gg;
    assert!((rel - C64::new(0.0, -1.0 / 2f64.sqrt())).norm() < 1e-12);
}

#[test]
fn qutrit_rejects_odd_k() {
    assert!(matches!(plan_two_atom_qutrit(&lam(0.025), Some(3), Some(1)), Err(Error::Plan(_))));
    assert!(plan_two_atom_qutrit(&lam(0.025), Some(0), Some(1)).is_err());
    assert!(plan_two_atom_qutrit(&lam(0.025), Some(2), Some(0)).is_err());
}

#[test]
fn default_harmonics_follow_hierarchy() {
    let plan = plan_two_atom_qutrit(&Coupling::Cavity { g: 1.0, delta: 10.0 }, None, None).unwrap();
    assert_eq!(plan.timings.k, 784);
    assert_eq!(plan.timings.k_prime, Some(500));
    assert!(plan.timings.omega >= 200.0);
    assert!(plan.timings.omega_prime.unwrap() >= 200.0);
    let ghz = plan_ghz_two_level(3, &Coupling::Cavity { g: 1.0, delta: 10.0 }, None).unwrap();
    assert!(ghz.timings.omega >= 200.0);
    let ion = plan_two_atom_qutrit(&Coupling::ion(1.0, 0.05, 1.0), None, None).unwrap();
    assert_eq!((ion.timings.k, ion.timings.omega), (0, 0.0));
    assert!(plan_ghz_two_level(3, &Coupling::ion(1.0, 0.05, 1.0), None).is_err());
}

#[test]
fn ghz_two_level_all_sizes() {
    for n in 2..=5 {
        for m in [None, Some(1), Some(3)] {
            let plan = plan_ghz_two_level(n, &lam(0.05), m).unwrap();
            let r = effective(&plan);
            assert!(r.branches[0].fidelity >= 1.0 - 1e-10, "n={n} m={m:?}: {}", r.branches[0].fidelity);
        }
    }
    let plan = plan_ghz_two_level(4, &lam(0.05), None).unwrap();
    let r = effective(&plan);
    let p = leg_populations(&r.branches[0].state.atomic_density().unwrap(), &uniform_legs(4, &[Level::G, Level::E])).unwrap();
    assert!((p[0] - 0.5).abs() < 1e-10 && (p[1] - 0.5).abs() < 1e-10);
}

#[test]
fn ghz_three_level_legs() {
    assert!(plan_ghz_three_level(3, &lam(0.05), None).is_err());
    for n in [2, 4] {
        let plan = plan_ghz_three_level(n, &lam(0.05), None).unwrap();
        let r = effective(&plan);
        assert!(r.branches[0].fidelity >= 1.0 - 1e-10);
        assert!((r.total_probability() - 1.0).abs() < 1e-12);
        let p = leg_populations(&r.branches[0].state.atomic_density().unwrap(), &uniform_legs(n, &[Level::G, Level::E, Level::F])).unwrap();
        for (got, want) in p.iter().zip([0.25, 0.25, 0.5]) {
            assert!((got - want).abs() < 1e-10);
        }
    }
}

#[test]
fn reduction_matrix_is_unitary() {
    let m = reduction_matrix();
    assert!(local::unitarity_error(&m) < 1e-12);
    assert!(TransferMap::Reduction.matrix(2).is_err());
    assert!(TransferMap::PairSwap.matrix(3).is_err());
}

#[test]
fn measure_reduce_success_probability() {
    assert!(plan_measure_reduce(2, &lam(0.05), None).is_err());
    assert!(plan_measure_reduce(5, &lam(0.05), None).is_err());
    for n in [4, 6] {
        let plan = plan_measure_reduce(n, &lam(0.05), None).unwrap();
        let r = effective(&plan);
        assert!((r.total_probability() - 1.0).abs() < 1e-10);
        let f = r.target_branch(&plan).unwrap();
        assert!((f.probability - 0.3).abs() < 1e-10, "n={n}: {}", f.probability);
        assert!(f.fidelity >= 1.0 - 1e-10);
    }
}

#[test]
fn measurement_modes() {
    let plan = plan_measure_reduce(4, &lam(0.05), None).unwrap();
    let post = plan.clone().with_measurement_mode(MeasurementMode::PostSelect(Level::F));
    let r = effective(&post);
    assert_eq!(r.branches.len(), 1);
    assert!((r.branches[0].probability - 0.3).abs() < 1e-10);
    let sample = plan.with_measurement_mode(MeasurementMode::Sample);
    let opts = RunOptions { seed: 7, ..Default::default() };
    let a = run_plan_with(&sample, sample.ground_state(None).unwrap(), Engine::Effective, &opts).unwrap();
    let b = run_plan_with(&sample, sample.ground_state(None).unwrap(), Engine::Effective, &opts).unwrap();
    assert_eq!(a.branches.len(), 1);
    assert_eq!(a.branches[0].label, b.branches[0].label);
}

#[test]
fn four_level_ghz() {
    assert!(plan_ghz_four_level(3, &lam(0.05), None).is_err());
    for n in [2, 4] {
        let plan = plan_ghz_four_level(n, &lam(0.05), None).unwrap();
        let r = effective(&plan);
        assert!(r.branches[0].fidelity >= 1.0 - 1e-10);
        let BranchState::Pure(psi) = &r.branches[0].state else { panic!("pure expected") };
        let amp = |l| psi.amplitude(plan.space.uniform_index(l, 0).unwrap());
        for l in Level::ALL {
            assert!((amp(l).norm_sqr() - 0.25).abs() < 1e-10);
        }
        let rel = amp(Level::E) / amp(Level::F);
        assert!((rel + C64::new(1.0, 0.0)).norm() < 1e-10);
    }
}

#[test]
fn lifted_plan_still_reaches_target() {
    let plan = plan_two_atom_qutrit(&lam(0.05), None, None).unwrap().with_atom_dim(4).unwrap();
    assert_eq!(plan.space.atom_dim(), 4);
    assert!(effective(&plan).branches[0].fidelity >= 1.0 - 1e-10);
    assert!(plan_ghz_four_level(2, &lam(0.05), None).unwrap().with_atom_dim(3).is_err());
}

#[test]
fn plans_compose_to_unitaries() {
    let plans = [
        plan_two_atom_qutrit(&lam(0.05), None, None).unwrap(),
        plan_ghz_two_level(3, &lam(0.05), None).unwrap(),
        plan_ghz_three_level(2, &lam(0.05), None).unwrap(),
        plan_measure_reduce(4, &lam(0.05), None).unwrap(),
        plan_ghz_four_level(2, &lam(0.05), None).unwrap(),
    ];
    for plan in &plans {
        let u = plan.effective_unitary().unwrap();
        assert!(u.unitarity_error() <= 1e-10, "{}", plan.name);
    }
}

#[test]
fn targets_are_permutation_symmetric() {
    let plans = [
        plan_two_atom_qutrit(&lam(0.05), None, None).unwrap(),
        plan_ghz_two_level(3, &lam(0.05), None).unwrap(),
        plan_ghz_three_level(4, &lam(0.05), None).unwrap(),
        plan_ghz_four_level(2, &lam(0.05), None).unwrap(),
    ];
    for plan in &plans {
        let s = plan.space;
        let n = s.atom_count();
        // reverse the atom order
        let mut amps = plan.target.amplitudes().clone();
        for i in 0..s.dim() {
            let (mut levels, _) = s.decode(i);
            levels.reverse();
            amps[s.encode(&levels, 0).unwrap()] = plan.target.amplitude(i);
        }
        let permuted = StateVector::from_amplitudes(s, amps).unwrap();
        assert!((fidelity(&permuted, &plan.target) - 1.0).abs() < 1e-12, "{} n={n}", plan.name);
    }
}

fn fidelity(a: &StateVector, b: &StateVector) -> f64 {
    crate::analysis::fidelity(a, b).unwrap()
}

#[test]
fn mode_factor_is_inert_under_effective_engine() {
    let plan = plan_measure_reduce(4, &lam(0.05), None).unwrap();
    let bare = effective(&plan);
    for n in [0, 2] {
        let dressed = run_plan(&plan, plan.ground_state(Some((3, n))).unwrap(), Engine::Effective).unwrap();
        for (a, b) in bare.branches.iter().zip(&dressed.branches) {
            assert_eq!(a.label, b.label);
            let td = trace_distance(&a.state.atomic_density().unwrap(), &b.state.atomic_density().unwrap()).unwrap();
            assert!(td <= 1e-13, "{td}");
        }
    }
    // thermal ensemble under the effective engine is equally inert
    let atoms = plan.ground_state(None).unwrap();
    let spec = ThermalSpec::minimal(1.0).unwrap();
    let thermal = InitialState::Ensemble(thermal_ensemble(&atoms, &spec).unwrap());
    let warm = run_plan(&plan, thermal, Engine::Effective).unwrap();
    let f = warm.target_branch(&plan).unwrap();
    assert!((f.fidelity - bare.target_branch(&plan).unwrap().fidelity).abs() <= 1e-13);
}

#[test]
fn engine_and_space_mismatch() {
    let plan = plan_two_atom_qutrit(&lam(0.05), None, None).unwrap();
    assert!(matches!(run_plan(&plan, plan.ground_state(None).unwrap(), Engine::FullCavity), Err(Error::Engine(_))));
    let wrong = StateVector::uniform(make_space(3, 3, 0, true).unwrap(), Level::G, 0).unwrap();
    assert!(run_plan(&plan, wrong, Engine::Effective).is_err());
    let cav = plan_two_atom_qutrit(&Coupling::Cavity { g: 1.0, delta: 10.0 }, None, None).unwrap();
    let with_mode = cav.ground_state(Some((3, 0))).unwrap();
    assert!(matches!(run_plan(&cav, with_mode, Engine::FullIon), Err(Error::Engine(_))));
    assert!(plan_by_name("nope", 2, &lam(0.1), None, None).is_err());
}

#[test]
fn full_engine_frames_agree_with_effective_in_dispersive_limit() {
    let c = Coupling::Cavity { g: 1.0, delta: 40.0 };
    let cfg = RunOptions { integrator: crate::dynamics::IntegratorConfig::with_tolerance(1e-8, 1e-10), ..Default::default() };
    // without a carrier the slow frame is still the dispersive Sx coupling
    let plan = plan_ghz_two_level(2, &c, Some(0)).unwrap();
    let init = plan.ground_state(Some((6, 0))).unwrap();
    let eff = run_plan(&plan, init.clone(), Engine::Effective).unwrap();
    let slow = run_plan_with(&plan.clone().with_frame(FrameTag::SlowFrame), init, Engine::FullCavity, &cfg).unwrap();
    let td = trace_distance(&eff.branches[0].state.atomic_density().unwrap(), &slow.branches[0].state.atomic_density().unwrap()).unwrap();
    assert!(td < 0.05, "{td}");
    assert!(slow.branches[0].fidelity > 0.95);
    // the interaction picture needs the strong carrier to suppress the dressed-state terms
    let plan = plan_ghz_two_level(2, &Coupling::Cavity { g: 1.0, delta: 20.0 }, None).unwrap();
    let init = plan.ground_state(Some((6, 0))).unwrap();
    let ip = run_plan(&plan, init, Engine::FullCavity).unwrap();
    assert!(ip.branches[0].fidelity > 0.95, "{}", ip.branches[0].fidelity);
}

#[test]
fn rotated_frame_matches_interaction_picture() {
    let c = Coupling::Cavity { g: 1.0, delta: 10.0 };
    let plan = plan_ghz_two_level(2, &c, Some(4)).unwrap();
    let init = plan.ground_state(Some((4, 1))).unwrap();
    let cfg = RunOptions { integrator: crate::dynamics::IntegratorConfig { leakage_tol: None, ..Default::default() }, ..Default::default() };
    let mut short = plan.clone();
    if let PulseStage::CollectiveDrive(s) = &mut short.stages[0] {
        s.duration = 1.3;
    }
    let ip = run_plan_with(&short, init.clone(), Engine::FullCavity, &cfg).unwrap();
    let rot = run_plan_with(&short.clone().with_frame(FrameTag::PlusMinusRotated), init, Engine::FullCavity, &cfg).unwrap();
    let (BranchState::Pure(a), BranchState::Pure(b)) = (&ip.branches[0].state, &rot.branches[0].state) else { panic!() };
    assert!(max_abs(&DMatrix::from_column_slice(a.amplitudes().len(), 1, (a.amplitudes() - b.amplitudes()).as_slice())) < 1e-7);
}

#[test]
fn closed_master_equation_matches_full_engine_with_mode_coherence() {
    let plan = plan_two_atom_qutrit(&Coupling::Cavity { g: 1.0, delta: 10.0 }, Some(2), Some(1)).unwrap();
    let mut short = plan.clone();
    for (stage, dur) in short.stages.iter_mut().filter(|s| matches!(s, PulseStage::CollectiveDrive(_))).zip([0.9, 0.7]) {
        if let PulseStage::CollectiveDrive(s) = stage {
            s.duration = dur;
        }
    }
    // vacuum plus one photon, so the mode-frame phases matter
    let a = short.ground_state(Some((6, 0))).unwrap();
    let b = short.ground_state(Some((6, 1))).unwrap();
    let amps = (a.amplitudes() + b.amplitudes() * C64::new(0.0, 1.0)) * C64::new(0.5f64.sqrt(), 0.0);
    let init = StateVector::from_amplitudes(*a.space(), amps).unwrap();
    let full = run_plan(&short, init.clone(), Engine::FullCavity).unwrap();
    let closed = run_plan(&short, init, Engine::Lindblad(crate::dynamics::DecaySpec::default())).unwrap();
    let (BranchState::Pure(psi), BranchState::Mixed(rho)) = (&full.branches[0].state, &closed.branches[0].state) else { panic!() };
    let td = trace_distance(&psi.to_density(), rho).unwrap();
    assert!(td < 1e-7, "{td}");
}
