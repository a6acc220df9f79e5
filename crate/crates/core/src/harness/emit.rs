//! CSV traces and JSON summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::circuits::{DepthState, Direction, Window};
use crate::harness::run::{expected_depth, ComparisonReport, RunArtifacts, RunError};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn spikes_csv(a: &RunArtifacts) -> String {
    let mut rows: Vec<(f64, usize)> =
        a.trace.spikes.iter().enumerate().flat_map(|(id, times)| times.iter().map(move |&t| (t, id))).collect();
    rows.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let mut out = String::from("time_ms,neuron_id,neuron_role\n");
    for (t, id) in rows {
        let _ = writeln!(out, "{t},{id},{}", a.circuit.graph.role(id));
    }
    out
}

pub fn potentials_csv(a: &RunArtifacts) -> String {
    let n = a.trace.potentials.len();
    let mut out = String::from("time_ms");
    for id in 0..n {
        let _ = write!(out, ",{id}");
    }
    out.push('\n');
    let every = a.scenario.potential_subsample.max(1);
    for step in (0..a.trace.steps()).step_by(every) {
        let _ = write!(out, "{}", step as f64 * a.trace.dt);
        for v in &a.trace.potentials {
            let _ = write!(out, ",{}", v[step]);
        }
        out.push('\n');
    }
    out
}

pub fn states_csv(a: &RunArtifacts) -> String {
    let mut out = String::from("window_start_ms,window_end_ms,direction,depth_circuit,depth_correlation\n");
    for (r, c) in a.readouts.iter().zip(&a.correlation) {
        let _ = writeln!(out, "{},{},{},{},{}", r.window.start, r.window.end, r.direction, r.depth, c);
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Assertion { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DominantReading {
    pub window: Option<Window>,
    pub direction: Direction,
    pub depth: DepthState,
    pub correlation_depth: Option<DepthState>,
}

pub fn dominant_reading(a: &RunArtifacts) -> DominantReading {
    let (direction, depth) = a.dominant_reading();
    DominantReading {
        window: a.dominant.map(|i| a.readouts[i].window),
        direction,
        depth,
        correlation_depth: a.dominant.map(|i| a.correlation[i]),
    }
}

/// Checks a single run can make on its own: the expected depth for scripted trajectories.
pub fn run_assertions(a: &RunArtifacts) -> Vec<Assertion> {
    let mut out = Vec::new();
    if let Some(expected) = expected_depth(&a.scenario.trajectory.kind) {
        let (_, got) = a.dominant_reading();
        out.push(Assertion::new("dominant_depth", got == expected, format!("expected {expected}, read {got}")));
    }
    out
}

pub fn summary_json(a: &RunArtifacts, assertions: &[Assertion]) -> Value {
    json!({
        "tool_version": TOOL_VERSION,
        "scenario": a.scenario.doc,
        "variant": a.scenario.variant,
        "neurons": a.circuit.graph.neuron_count(),
        "synapses": a.circuit.graph.synapses().len(),
        "total_spikes": a.trace.total_spikes(),
        "metrics": a.metrics,
        "dominant": dominant_reading(a),
        "assertions": assertions,
    })
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), RunError> {
    fs::write(dir.join(name), body)?;
    Ok(())
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap_or_default();
    s.push('\n');
    s
}

/// Writes spikes.csv, potentials.csv, states.csv and summary.json into `dir`.
pub fn emit_outputs(a: &RunArtifacts, dir: &Path, assertions: &[Assertion]) -> Result<(), RunError> {
    fs::create_dir_all(dir)?;
    write(dir, "spikes.csv", &spikes_csv(a))?;
    write(dir, "potentials.csv", &potentials_csv(a))?;
    write(dir, "states.csv", &states_csv(a))?;
    write(dir, "summary.json", &pretty(&summary_json(a, assertions)))?;
    Ok(())
}

/// Writes each variant's outputs into `ddm/` and `weights/` plus a top-level comparison.json.
pub fn emit_comparison(
    report: &ComparisonReport,
    ddm: &RunArtifacts,
    weights: &RunArtifacts,
    dir: &Path,
    assertions: &[Assertion],
) -> Result<(), RunError> {
    emit_outputs(ddm, &dir.join("ddm"), &run_assertions(ddm))?;
    emit_outputs(weights, &dir.join("weights"), &run_assertions(weights))?;
    let body = json!({
        "tool_version": TOOL_VERSION,
        "scenario": ddm.scenario.doc,
        "comparison": report,
        "assertions": assertions,
    });
    write(dir, "comparison.json", &pretty(&body))
}
