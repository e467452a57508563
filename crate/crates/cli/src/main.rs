//! `dghz`: run, sweep and cross-check the entangling protocols.

mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dispersive_ghz::analysis::trace_distance;
use dispersive_ghz::hamiltonians::FrameTag;
use dispersive_ghz::protocols::{run_plan_with, Engine, ProtocolResult, PROTOCOL_NAMES};
use rayon::prelude::*;
use serde::Serialize;

use config::{EngineKind, Format, RunConfig, SweepSpec, System, SWEEP_PARAMS};
use report::{emit, format_or, protocol_report, to_csv, to_json, CsvRow, WithEcho};

#[derive(Debug)]
pub enum CliError {
    /// Bad input; exit code 1.
    Config(String),
    /// A numerical or physical check failed; exit code 2.
    Physics(String),
}

impl From<dispersive_ghz::Error> for CliError {
    fn from(e: dispersive_ghz::Error) -> Self {
        if e.is_physics_failure() {
            CliError::Physics(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "dghz", version, about = "Entangled-state protocols for multi-level atoms in a dispersive cavity or ion trap")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one protocol and report fidelity, branch probabilities and leg populations.
    Protocol(Common),
    /// Run a protocol over a range of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// parameter to vary
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SWEEP_PARAMS))]
        param: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        from: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        to: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Evolve the same initial state in every frame and compare the results.
    CompareFrames(Common),
    /// List the available protocols.
    ListProtocols,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// protocol name (see list-protocols)
    protocol: Option<String>,
    /// JSON run configuration; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    system: Option<System>,
    #[arg(long, value_enum)]
    engine: Option<EngineKind>,
    /// number of atoms
    #[arg(long)]
    n: Option<usize>,
    /// embed the atoms in a larger level space
    #[arg(long)]
    atom_dim: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    g: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// laser Rabi frequency (ion system)
    #[arg(long)]
    omega: Option<f64>,
    /// carrier harmonic k (n for GHZ protocols)
    #[arg(long)]
    omega_k: Option<u64>,
    /// second-stage harmonic k' of the qutrit protocol
    #[arg(long)]
    omega_k_prime: Option<u64>,
    /// Lamb-Dicke parameter
    #[arg(long)]
    eta: Option<f64>,
    /// trap frequency
    #[arg(long)]
    nu: Option<f64>,
    /// mean thermal occupation of the mode
    #[arg(long)]
    nbar: Option<f64>,
    /// cavity decay rate (lindblad engine)
    #[arg(long)]
    kappa: Option<f64>,
    /// thermal occupation of the decay bath
    #[arg(long)]
    nbar_bath: Option<f64>,
    #[arg(long)]
    fock_cutoff: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    /// draw measurement outcomes instead of enumerating them
    #[arg(long)]
    sample: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// overwrite an existing output file
    #[arg(long)]
    force: bool,
}

impl Common {
    fn config(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { c.$($field).+ = Some(v); })*
            };
        }
        set! {
            protocol => protocol, system => system, engine => engine, n => n, atom_dim => atom_dim,
            g => params.g, delta => params.delta, omega => params.omega, eta => params.eta, nu => params.nu,
            omega_k => omega_k, omega_k_prime => omega_k_prime, nbar => thermal.nbar,
            fock_cutoff => thermal.cutoff, seed => seed, out => output.path, format => output.format,
        }
        if let Some(k) = self.kappa {
            c.decay.kappa = k;
        }
        if let Some(n) = self.nbar_bath {
            c.decay.nbar_bath = n;
        }
        if let Some(t) = self.rel_tol {
            c.integrator.rel_tol = t;
        }
        if let Some(t) = self.abs_tol {
            c.integrator.abs_tol = t;
        }
        c.sample |= self.sample;
        Ok(c)
    }
}

fn run(config: &RunConfig) -> Result<(dispersive_ghz::protocols::ProtocolPlan, ProtocolResult), CliError> {
    let plan = config.plan()?;
    let initial = config.initial_state(&plan)?;
    let result = run_plan_with(&plan, initial, config.engine()?, &config.run_options())?;
    Ok((plan, result))
}

fn cmd_protocol(common: &Common) -> Result<(), CliError> {
    let config = common.config()?.resolve()?;
    let (plan, result) = run(&config)?;
    let report = protocol_report(&plan, &result, config.coupling()?.lambda()?)?;
    let text = match format_or(&config, Format::Json) {
        Format::Json => to_json(&WithEcho { body: &report, config_echo: &config })?,
        Format::Csv => to_csv(
            &report
                .branches
                .iter()
                .map(|b| CsvRow { param: "none".into(), value: None, branch: b.outcome.clone(), probability: b.probability, fidelity: b.fidelity })
                .collect::<Vec<_>>(),
        )?,
    };
    emit(&text, config.output.path.as_deref(), common.force)
}

#[derive(Serialize)]
struct SweepPoint {
    value: f64,
    success_probability: f64,
    fidelity: f64,
    branches: Vec<report::BranchRow>,
}

#[derive(Serialize)]
struct SweepReport {
    protocol: String,
    engine: String,
    sweep_param: String,
    points: Vec<SweepPoint>,
}

fn cmd_sweep(common: &Common, param: Option<String>, from: Option<f64>, to: Option<f64>, steps: Option<usize>) -> Result<(), CliError> {
    let mut config = common.config()?;
    let base = config.sweep.clone();
    let spec = SweepSpec {
        param: param.or_else(|| base.as_ref().map(|s| s.param.clone())).ok_or_else(|| CliError::Config("sweep needs --param".into()))?,
        from: from.or(base.as_ref().map(|s| s.from)).ok_or_else(|| CliError::Config("sweep needs --from".into()))?,
        to: to.or(base.as_ref().map(|s| s.to)).ok_or_else(|| CliError::Config("sweep needs --to".into()))?,
        steps: steps.or(base.as_ref().map(|s| s.steps)).ok_or_else(|| CliError::Config("sweep needs --steps".into()))?,
    };
    config.sweep = Some(spec.clone());
    let config = config.resolve()?;
    let values: Vec<f64> =
        (0..spec.steps).map(|i| spec.from + (spec.to - spec.from) * i as f64 / (spec.steps - 1) as f64).collect();
    let points = values
        .par_iter()
        .map(|&v| {
            let c = config.with_param(&spec.param, v)?;
            let (plan, result) = run(&c)?;
            let r = protocol_report(&plan, &result, c.coupling()?.lambda()?)?;
            Ok(SweepPoint { value: v, success_probability: r.success_probability, fidelity: r.fidelity, branches: r.branches })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let text = match format_or(&config, Format::Csv) {
        Format::Csv => to_csv(
            &points
                .iter()
                .flat_map(|p| {
                    p.branches.iter().map(|b| CsvRow {
                        param: spec.param.clone(),
                        value: Some(p.value),
                        branch: b.outcome.clone(),
                        probability: b.probability,
                        fidelity: b.fidelity,
                    })
                })
                .collect::<Vec<_>>(),
        )?,
        Format::Json => {
            let body = SweepReport {
                protocol: config.protocol_name()?.to_string(),
                engine: config.engine()?.name().to_string(),
                sweep_param: spec.param.clone(),
                points,
            };
            to_json(&WithEcho { body, config_echo: &config })?
        }
    };
    emit(&text, config.output.path.as_deref(), common.force)
}

#[derive(Serialize)]
struct FrameRow {
    frame: String,
    fidelity: f64,
    success_probability: f64,
    /// trace distance of the reduced atomic state to the effective-engine prediction
    distance_to_effective: f64,
}

#[derive(Serialize)]
struct PairRow {
    a: String,
    b: String,
    trace_distance: f64,
}

#[derive(Serialize)]
struct CompareReport {
    protocol: String,
    target_branch: String,
    effective_fidelity: f64,
    frames: Vec<FrameRow>,
    pairwise: Vec<PairRow>,
}

fn cmd_compare_frames(common: &Common) -> Result<(), CliError> {
    let mut config = common.config()?;
    if config.engine_kind() == EngineKind::Lindblad {
        return Err(CliError::Config("compare-frames evolves closed systems only".into()));
    }
    config.engine = Some(EngineKind::Full);
    let config = config.resolve()?;
    let (frames, engine) = match config.system() {
        System::Cavity => (
            vec![FrameTag::InteractionPicture, FrameTag::PlusMinusRotated, FrameTag::SlowFrame, FrameTag::Effective],
            Engine::FullCavity,
        ),
        System::Ion => (vec![FrameTag::IonInteraction, FrameTag::IonLambDicke, FrameTag::Effective], Engine::FullIon),
    };
    let plan = config.plan()?;
    let initial = config.initial_state(&plan)?;
    let options = config.run_options();
    let effective = run_plan_with(&plan, initial.clone(), Engine::Effective, &options)?;
    let label_missing = || CliError::Physics(format!("target branch {:?} has zero probability", plan.target_branch));
    let eff_branch = effective.target_branch(&plan).ok_or_else(label_missing)?;
    let eff_rho = eff_branch.state.atomic_density()?;
    let runs = frames
        .par_iter()
        .map(|&f| {
            let p = plan.clone().with_frame(f);
            let r = run_plan_with(&p, initial.clone(), engine, &options)?;
            let b = r.target_branch(&p).ok_or_else(label_missing)?;
            Ok((f, b.probability, b.fidelity, b.state.atomic_density()?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut rows = Vec::new();
    for (f, prob, fid, rho) in &runs {
        rows.push(FrameRow {
            frame: format!("{f:?}"),
            fidelity: *fid,
            success_probability: *prob,
            distance_to_effective: trace_distance(rho, &eff_rho)?,
        });
    }
    let mut pairwise = Vec::new();
    for (i, a) in runs.iter().enumerate() {
        for b in &runs[i + 1..] {
            pairwise.push(PairRow { a: format!("{:?}", a.0), b: format!("{:?}", b.0), trace_distance: trace_distance(&a.3, &b.3)? });
        }
    }
    let text = match format_or(&config, Format::Json) {
        Format::Json => {
            let body = CompareReport {
                protocol: plan.name.clone(),
                target_branch: eff_branch.label.clone(),
                effective_fidelity: eff_branch.fidelity,
                frames: rows,
                pairwise,
            };
            to_json(&WithEcho { body, config_echo: &config })?
        }
        Format::Csv => to_csv(
            &rows
                .iter()
                .map(|r| CsvRow {
                    param: format!("frame={}", r.frame),
                    value: Some(r.distance_to_effective),
                    branch: eff_branch.label.clone(),
                    probability: r.success_probability,
                    fidelity: r.fidelity,
                })
                .collect::<Vec<_>>(),
        )?,
    };
    emit(&text, config.output.path.as_deref(), common.force)
}

fn cmd_list_protocols() -> Result<(), CliError> {
    let notes = [
        "two atoms, qutrit state (|gg> + |ee> + |ff>)/sqrt(3) up to phases",
        "N two-level atoms, GHZ state (N >= 2)",
        "N three-level atoms, even N, three-leg GHZ state",
        "N three-level atoms, even N >= 4, measure one atom in f",
        "N four-level atoms, even N, four-leg GHZ state",
    ];
    let mut text = String::new();
    for (name, note) in PROTOCOL_NAMES.iter().zip(notes) {
        text.push_str(&format!("{name:<18} {note}\n"));
    }
    emit(&text, None, false)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Protocol(c) => cmd_protocol(&c),
        Command::Sweep { common, param, from, to, steps } => cmd_sweep(&common, param, from, to, steps),
        Command::CompareFrames(c) => cmd_compare_frames(&c),
        Command::ListProtocols => cmd_list_protocols(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Physics(msg)) => {
            eprintln!("physics check failed: {msg}");
            ExitCode::from(2)
        }
    }
}
