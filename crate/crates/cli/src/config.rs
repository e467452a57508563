use std::path::PathBuf;

use dispersive_ghz::algebra::{Level, StateVector};
use dispersive_ghz::dynamics::{thermal_ensemble, DecaySpec, IntegratorConfig, ThermalSpec};
use dispersive_ghz::protocols::{plan_by_name, Coupling, Engine, InitialState, MeasurementMode, ProtocolPlan, RunOptions};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum System {
    #[default]
    Cavity,
    Ion,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    #[default]
    Effective,
    Full,
    Lindblad,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

/// Drive parameters as given by the user; unset fields take defaults.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsInput {
    pub g: Option<f64>,
    pub delta: Option<f64>,
    /// laser Rabi frequency (ion system)
    pub omega: Option<f64>,
    pub eta: Option<f64>,
    pub nu: Option<f64>,
    pub phi: Option<f64>,
    pub lamb_dicke_order: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: String,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalInput {
    pub nbar: Option<f64>,
    pub cutoff: Option<usize>,
}

/// Flat run description; the JSON config file uses these field names.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: Option<System>,
    pub protocol: Option<String>,
    #[serde(rename = "N", alias = "n")]
    pub n: Option<usize>,
    pub atom_dim: Option<usize>,
    pub engine: Option<EngineKind>,
    #[serde(default)]
    pub params: ParamsInput,
    /// carrier harmonic `k` (or `n` for GHZ plans)
    pub omega_k: Option<u64>,
    /// second-stage harmonic `k'` of the qutrit plan
    pub omega_k_prime: Option<u64>,
    #[serde(default)]
    pub thermal: ThermalInput,
    #[serde(default)]
    pub decay: DecaySpec,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    pub seed: Option<u64>,
    /// draw measurement outcomes instead of enumerating them
    #[serde(default)]
    pub sample: bool,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn system(&self) -> System {
        self.system.unwrap_or_default()
    }

    pub fn engine_kind(&self) -> EngineKind {
        self.engine.unwrap_or_default()
    }

    pub fn protocol_name(&self) -> Result<&str, CliError> {
        self.protocol.as_deref().ok_or_else(|| CliError::Config("no protocol given".into()))
    }

    /// Fill in the demo defaults. Either all coupling parameters of the
    /// chosen system are left unset (defaults apply) or the essential ones
    /// must be given together.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let system = self.system();
        let p = &mut self.params;
        match system {
            System::Cavity => match (p.g, p.delta) {
                (None, None) => {
                    p.g = Some(1.0);
                    p.delta = Some(20.0);
                }
                (Some(_), None) => return Err(CliError::Config("--delta is required when --g is given".into())),
                (None, Some(_)) => return Err(CliError::Config("--g is required when --delta is given".into())),
                _ => {}
            },
            System::Ion => match (p.omega, p.eta, p.delta) {
                (None, None, None) => {
                    p.omega = Some(1.0);
                    p.eta = Some(0.05);
                    p.delta = Some(1.0);
                }
                (Some(_), Some(_), Some(_)) => {}
                _ => return Err(CliError::Config("the ion system needs --omega, --eta and --delta together".into())),
            },
        }
        self.system = Some(system);
        self.engine = Some(self.engine_kind());
        if self.n.is_none() {
            self.n = Some(if self.protocol.as_deref() == Some("measure-reduce") { 4 } else { 2 });
        }
        if self.seed.is_none() {
            self.seed = Some(0);
        }
        if self.thermal.nbar.is_none() {
            self.thermal.nbar = Some(0.0);
        }
        if let Some(s) = &self.sweep {
            if s.steps < 2 {
                return Err(CliError::Config(format!("sweep needs at least 2 steps, got {}", s.steps)));
            }
            if !SWEEP_PARAMS.contains(&s.param.as_str()) {
                return Err(CliError::Config(format!("unknown sweep parameter '{}'; expected one of {}", s.param, SWEEP_PARAMS.join(", "))));
            }
            if !(s.from.is_finite() && s.to.is_finite()) {
                return Err(CliError::Config("sweep bounds must be finite".into()));
            }
        }
        self.integrator.validate()?;
        self.decay.validate()?;
        Ok(self)
    }

    pub fn coupling(&self) -> Result<Coupling, CliError> {
        let p = &self.params;
        let c = match self.system() {
            System::Cavity => Coupling::Cavity { g: p.g.unwrap_or(0.0), delta: p.delta.unwrap_or(0.0) },
            System::Ion => Coupling::Ion {
                omega: p.omega.unwrap_or(0.0),
                eta: p.eta.unwrap_or(0.0),
                delta: p.delta.unwrap_or(0.0),
                nu: p.nu.unwrap_or(0.0),
                lamb_dicke_order: p.lamb_dicke_order.unwrap_or(2),
            },
        };
        c.lambda()?;
        if let Some(phi) = p.phi {
            if (phi - std::f64::consts::FRAC_PI_2).abs() > 1e-12 {
                return Err(CliError::Config("protocols fix the laser phase at pi/2".into()));
            }
        }
        Ok(c)
    }

    pub fn engine(&self) -> Result<Engine, CliError> {
        Ok(match (self.engine_kind(), self.system()) {
            (EngineKind::Effective, _) => Engine::Effective,
            (EngineKind::Full, System::Cavity) => Engine::FullCavity,
            (EngineKind::Full, System::Ion) => Engine::FullIon,
            (EngineKind::Lindblad, System::Cavity) => Engine::Lindblad(self.decay),
            (EngineKind::Lindblad, System::Ion) => return Err(CliError::Config("the lindblad engine models cavity decay only".into())),
        })
    }

    pub fn plan(&self) -> Result<ProtocolPlan, CliError> {
        let name = self.protocol_name()?;
        let mut plan = plan_by_name(name, self.n.unwrap_or(2), &self.coupling()?, self.omega_k, self.omega_k_prime)?;
        if let Some(d) = self.atom_dim {
            plan = plan.with_atom_dim(d)?;
        }
        if self.sample {
            plan = plan.with_measurement_mode(MeasurementMode::Sample);
        }
        Ok(plan)
    }

    fn nbar(&self) -> f64 {
        self.thermal.nbar.unwrap_or(0.0)
    }

    /// Mode cutoff used for the run, or `None` for atoms only.
    pub fn fock_cutoff(&self) -> Result<Option<usize>, CliError> {
        let nbar = self.nbar();
        let needs_mode = self.engine_kind() != EngineKind::Effective || nbar > 0.0 || self.thermal.cutoff.is_some();
        if !needs_mode {
            return Ok(None);
        }
        let cutoff = match self.thermal.cutoff {
            Some(c) => ThermalSpec::new(nbar, c)?.cutoff,
            None => ThermalSpec::minimal(nbar)?.cutoff.max(DEFAULT_CUTOFF),
        };
        Ok(Some(cutoff))
    }

    pub fn initial_state(&self, plan: &ProtocolPlan) -> Result<InitialState, CliError> {
        let atoms = StateVector::uniform(plan.space, Level::G, 0)?;
        let Some(cutoff) = self.fock_cutoff()? else {
            return Ok(InitialState::Pure(atoms));
        };
        let nbar = self.nbar();
        if nbar == 0.0 {
            return Ok(InitialState::Pure(atoms.with_fock(cutoff, 0)?));
        }
        Ok(InitialState::Ensemble(thermal_ensemble(&atoms, &ThermalSpec::new(nbar, cutoff)?)?))
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions { integrator: self.integrator, seed: self.seed.unwrap_or(0) }
    }

    /// Copy with one sweepable parameter replaced.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self, CliError> {
        let mut c = self.clone();
        match name {
            "g" => c.params.g = Some(value),
            "delta" => c.params.delta = Some(value),
            "omega" => c.params.omega = Some(value),
            "eta" => c.params.eta = Some(value),
            "nu" => c.params.nu = Some(value),
            "nbar" => c.thermal.nbar = Some(value),
            "kappa" => c.decay.kappa = value,
            "nbar_bath" => c.decay.nbar_bath = value,
            other => return Err(CliError::Config(format!("unknown sweep parameter '{other}'"))),
        }
        c.decay.validate()?;
        if c.nbar() < 0.0 {
            return Err(CliError::Config(format!("mean occupation must be non-negative, got {}", c.nbar())));
        }
        Ok(c)
    }
}

/// Mode cutoff for vacuum runs when none is given.
pub const DEFAULT_CUTOFF: usize = 5;

pub const SWEEP_PARAMS: [&str; 8] = ["g", "delta", "omega", "eta", "nu", "nbar", "kappa", "nbar_bath"];
