use std::io::Write;
use std::path::Path;

use dispersive_ghz::algebra::{DensityMatrix, Level, StateVector};
use dispersive_ghz::protocols::{ProtocolPlan, ProtocolResult};
use serde::Serialize;
use serde_json::Value;

use crate::config::{Format, RunConfig};
use crate::CliError;

pub const CSV_HEADER: [&str; 5] = ["sweep_param", "value", "branch", "probability", "fidelity"];

/// Round to 12 significant digits so output is stable across platforms.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            if let Some(x) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round12(x)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

pub fn to_json(report: &impl Serialize) -> Result<String, CliError> {
    let mut v = serde_json::to_value(report).map_err(|e| CliError::Config(format!("serialization failed: {e}")))?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::Config(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchRow {
    pub outcome: String,
    pub probability: f64,
    pub fidelity: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LegRow {
    pub leg: String,
    pub population: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProtocolReport {
    pub protocol: String,
    pub engine: String,
    pub atoms: usize,
    pub lambda: f64,
    pub timings: dispersive_ghz::protocols::Timings,
    /// target branch, or the drawn one when sampling
    pub branch: String,
    pub success_probability: f64,
    pub fidelity: f64,
    pub branches: Vec<BranchRow>,
    pub leg_populations: Vec<LegRow>,
}

/// Basis states carrying the target amplitude.
pub fn target_legs(target: &StateVector) -> Vec<(usize, String)> {
    let space = target.space();
    (0..space.dim())
        .filter(|&i| target.amplitude(i).norm() > 1e-12)
        .map(|i| {
            let (levels, _) = space.decode(i);
            let label = levels.iter().map(|&l| Level::from_index(l).map_or('?', Level::symbol)).collect();
            (i, label)
        })
        .collect()
}

pub fn leg_rows(target: &StateVector, atomic: &DensityMatrix) -> Vec<LegRow> {
    target_legs(target).into_iter().map(|(i, leg)| LegRow { leg, population: atomic.population(i) }).collect()
}

pub fn protocol_report(plan: &ProtocolPlan, result: &ProtocolResult, lambda: f64) -> Result<ProtocolReport, CliError> {
    // a sampled measurement may land outside the target branch
    let target = result
        .target_branch(plan)
        .or(result.branches.first())
        .ok_or_else(|| CliError::Physics("no measurement branch survived".into()))?;
    let atomic = target.state.atomic_density()?;
    Ok(ProtocolReport {
        protocol: plan.name.clone(),
        engine: result.engine.name().to_string(),
        atoms: plan.space.atom_count(),
        lambda,
        timings: result.timings,
        branch: target.label.clone(),
        success_probability: target.probability,
        fidelity: target.fidelity,
        branches: result
            .branches
            .iter()
            .map(|b| BranchRow { outcome: b.label.clone(), probability: b.probability, fidelity: b.fidelity })
            .collect(),
        leg_populations: leg_rows(&plan.target, &atomic),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct WithEcho<'a, T: Serialize> {
    #[serde(flatten)]
    pub body: T,
    pub config_echo: &'a RunConfig,
}

/// One CSV record per `(param, value, branch)`.
pub struct CsvRow {
    pub param: String,
    pub value: Option<f64>,
    pub branch: String,
    pub probability: f64,
    pub fidelity: f64,
}

pub fn to_csv(rows: &[CsvRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Config(format!("csv output failed: {e}"));
    w.write_record(CSV_HEADER).map_err(err)?;
    for r in rows {
        let value = r.value.map(|v| round12(v).to_string()).unwrap_or_default();
        w.write_record([
            r.param.as_str(),
            value.as_str(),
            r.branch.as_str(),
            &round12(r.probability).to_string(),
            &round12(r.fidelity).to_string(),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(format!("csv output failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::Config(e.to_string()))
}

pub fn emit(text: &str, path: Option<&Path>, force: bool) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if p.exists() && !force {
                return Err(CliError::Config(format!("{} exists; pass --force to overwrite", p.display())));
            }
            std::fs::write(p, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display())))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::Config(format!("cannot write output: {e}")))
        }
    }
}

pub fn format_or(config: &RunConfig, fallback: Format) -> Format {
    config.output.format.unwrap_or(fallback)
}
