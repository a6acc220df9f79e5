//! Batch runs over a directory of scenarios with suite-wide assertions.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::circuits::{excitatory_feedback_fixture, CtdParams, DepthState, Direction, Variant};
use crate::exec::{self, Execution};
use crate::harness::emit::{self, Assertion};
use crate::harness::run::{
    compare_variants, drive_removal, exclusivity_violations, expected_depth, ComparisonReport, RunError, SeizureReport,
};
use crate::harness::scenario::{parse_scenario, Scenario, ScenarioError};
use crate::spiking::{simulate, SpikeTrain};

/// Fraction of readout windows where the correlation classifier must match the circuit.
pub const AGREEMENT_MIN: f64 = 0.9;
/// Allowed settling time after the drive is withheld (ms).
pub const SEIZURE_SETTLE_MS: f64 = 50.0;
/// Minimum sustained firing of the excitatory-feedback fixture (ms).
pub const FEEDBACK_SUSTAIN_MS: f64 = 500.0;
/// Mean potential of the DDM layer relative to the judges.
pub const MEAN_LEVEL_FACTOR: f64 = 0.8;

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("{path}: {source}")]
    Scenario { path: PathBuf, source: ScenarioError },
    #[error("{name}: {source}")]
    Run { name: String, source: RunError },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("no scenario files in {0}")]
    Empty(PathBuf),
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioOutcome {
    pub name: String,
    pub expected: Option<DepthState>,
    pub direction: Direction,
    pub depth: DepthState,
    pub comparison: ComparisonReport,
    pub seizure: SeizureReport,
    pub exclusivity_violations: usize,
    pub windows: usize,
    pub agreeing_windows: usize,
    /// Name of the scenario whose trajectory is this one's mirror image.
    pub mirror: Option<String>,
}

impl ScenarioOutcome {
    pub fn correct(&self) -> bool {
        self.expected.is_none_or(|e| e == self.depth)
    }

    pub fn smoother_than_weights(&self) -> bool {
        self.comparison.smoother_steps() && self.comparison.smoother_variation()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub outcomes: Vec<ScenarioOutcome>,
    pub mirror_pairs: Vec<(String, String)>,
    pub feedback_sustain_ms: f64,
    pub assertions: Vec<Assertion>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }

    pub fn agreement(&self) -> f64 {
        let total: usize = self.outcomes.iter().map(|o| o.windows).sum();
        let agree: usize = self.outcomes.iter().map(|o| o.agreeing_windows).sum();
        if total == 0 {
            1.0
        } else {
            agree as f64 / total as f64
        }
    }
}

/// Sorted `*.json` files directly inside `dir`.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>, SuiteError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(SuiteError::Empty(dir.to_path_buf()));
    }
    Ok(files)
}

pub fn load_scenarios(dir: &Path, seed: Option<u64>) -> Result<Vec<Scenario>, SuiteError> {
    scenario_files(dir)?
        .into_iter()
        .map(|path| {
            let text = fs::read_to_string(&path)?;
            let s = parse_scenario(&text).map_err(|source| SuiteError::Scenario { path, source })?;
            Ok(match seed {
                Some(seed) => s.with_seed(seed),
                None => s,
            })
        })
        .collect()
}

struct Evaluated {
    outcome: ScenarioOutcome,
    ddm: crate::harness::run::RunArtifacts,
}

fn evaluate(s: &Scenario) -> Result<Evaluated, RunError> {
    let (comparison, ddm, _) = compare_variants(s)?;
    let (direction, depth) = ddm.dominant_reading();
    let cut = ddm
        .dominant
        .map(|i| {
            let w = ddm.readouts[i].window;
            (w.start + w.end) / 2.0
        })
        .unwrap_or(s.duration / 2.0);
    let seizure = drive_removal(&s.with_variant(Variant::Ddm), &ddm.trains, cut)?;
    let agreeing = ddm.readouts.iter().zip(&ddm.correlation).filter(|(r, c)| r.depth == **c).count();
    Ok(Evaluated {
        outcome: ScenarioOutcome {
            name: s.name.clone(),
            expected: expected_depth(&s.trajectory.kind),
            direction,
            depth,
            comparison,
            seizure,
            exclusivity_violations: exclusivity_violations(&ddm.trace, &ddm.circuit),
            windows: ddm.readouts.len(),
            agreeing_windows: agreeing,
            mirror: None,
        },
        ddm,
    })
}

/// How long the excitatory-feedback fixture keeps firing after a single kick (ms).
pub fn feedback_sustain(params: &CtdParams, duration: f64) -> Result<f64, RunError> {
    let (graph, judge) = excitatory_feedback_fixture(params)?;
    let mut drive = std::collections::BTreeMap::new();
    drive.insert(crate::circuits::sensor_port(0), SpikeTrain::new(vec![0.0]));
    let trace = simulate(&graph, &drive, duration, 1.0)?;
    Ok(match (trace.spikes[judge].first(), trace.spikes[judge].last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    })
}

/// Pairs each scenario with the one whose trajectory is its exact mirror image.
pub fn mirror_pairs(scenarios: &[Scenario]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (i, a) in scenarios.iter().enumerate() {
        let m = a.trajectory.mirrored();
        for (j, b) in scenarios.iter().enumerate().skip(i + 1) {
            if b.trajectory == m && a.robot == b.robot && a.sensors == b.sensors {
                pairs.push((i, j));
                break;
            }
        }
    }
    pairs
}

pub fn run_suite(scenarios: &[Scenario], out: Option<&Path>, exec: Execution) -> Result<SuiteReport, SuiteError> {
    let evaluated: Vec<Result<Evaluated, SuiteError>> = exec::map(scenarios, exec, |s| {
        let ev = evaluate(s).map_err(|source| SuiteError::Run { name: s.name.clone(), source })?;
        if let Some(dir) = out {
            emit::emit_outputs(&ev.ddm, &dir.join(&s.name), &emit::run_assertions(&ev.ddm))
                .map_err(|source| SuiteError::Run { name: s.name.clone(), source })?;
        }
        Ok(ev)
    });
    let mut outcomes: Vec<ScenarioOutcome> =
        evaluated.into_iter().map(|e| e.map(|e| e.outcome)).collect::<Result<_, _>>()?;

    let pairs = mirror_pairs(scenarios);
    for &(i, j) in &pairs {
        outcomes[i].mirror = Some(outcomes[j].name.clone());
        outcomes[j].mirror = Some(outcomes[i].name.clone());
    }
    let params = scenarios.first().map(|s| s.ctd).unwrap_or_default();
    let sustain = feedback_sustain(&params, 1000.0)
        .map_err(|source| SuiteError::Run { name: "feedback_fixture".into(), source })?;

    let mut report = SuiteReport {
        mirror_pairs: pairs.iter().map(|&(i, j)| (outcomes[i].name.clone(), outcomes[j].name.clone())).collect(),
        assertions: assertions(&outcomes, &pairs, sustain),
        outcomes,
        feedback_sustain_ms: sustain,
    };
    report.assertions.sort_by(|a, b| a.name.cmp(&b.name));
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let body = json!({
            "tool_version": emit::TOOL_VERSION,
            "passed": report.passed(),
            "agreement": report.agreement(),
            "report": report,
        });
        fs::write(dir.join("suite_summary.json"), emit::pretty(&body))?;
    }
    Ok(report)
}

fn failures(outcomes: &[ScenarioOutcome], bad: impl Fn(&ScenarioOutcome) -> bool) -> Vec<&str> {
    outcomes.iter().filter(|o| bad(o)).map(|o| o.name.as_str()).collect()
}

fn detail(failed: &[&str], total: usize) -> String {
    if failed.is_empty() {
        format!("{total}/{total} scenarios")
    } else {
        format!("{}/{total} scenarios; failing: {}", total - failed.len(), failed.join(", "))
    }
}

fn assertions(outcomes: &[ScenarioOutcome], pairs: &[(usize, usize)], sustain: f64) -> Vec<Assertion> {
    let n = outcomes.len();
    let mut out = Vec::new();

    let wrong = failures(outcomes, |o| !o.correct());
    out.push(Assertion::new("classification", wrong.is_empty(), detail(&wrong, n)));

    let bad_pairs: Vec<String> = pairs
        .iter()
        .filter(|&&(i, j)| {
            let (a, b) = (&outcomes[i], &outcomes[j]);
            a.direction == Direction::Undetermined || b.direction != a.direction.flipped() || a.depth != b.depth
        })
        .map(|&(i, j)| format!("{}~{}", outcomes[i].name, outcomes[j].name))
        .collect();
    out.push(Assertion::new(
        "mirror_pairs",
        bad_pairs.is_empty(),
        format!("{} pairs, {} inconsistent {:?}", pairs.len(), bad_pairs.len(), bad_pairs),
    ));

    let violations: usize = outcomes.iter().map(|o| o.exclusivity_violations).sum();
    out.push(Assertion::new("pdd_exclusivity", violations == 0, format!("{violations} violating 10 ms windows")));

    let runaway = failures(outcomes, |o| !o.seizure.settled_within(SEIZURE_SETTLE_MS));
    out.push(Assertion::new("seizure_settles", runaway.is_empty(), detail(&runaway, n)));
    out.push(Assertion::new(
        "feedback_sustains",
        sustain >= FEEDBACK_SUSTAIN_MS,
        format!("fixture fired for {sustain} ms"),
    ));

    let rough = failures(outcomes, |o| !o.smoother_than_weights());
    out.push(Assertion::new("variation_ordering", rough.is_empty(), detail(&rough, n)));
    let sunk = failures(outcomes, |o| !o.comparison.level_kept(MEAN_LEVEL_FACTOR));
    out.push(Assertion::new("mean_level_kept", sunk.is_empty(), detail(&sunk, n)));

    let total: usize = outcomes.iter().map(|o| o.windows).sum();
    let agree: usize = outcomes.iter().map(|o| o.agreeing_windows).sum();
    let frac = if total == 0 { 1.0 } else { agree as f64 / total as f64 };
    out.push(Assertion::new(
        "correlation_agreement",
        frac >= AGREEMENT_MIN,
        format!("{agree}/{total} windows ({:.1}%)", 100.0 * frac),
    ));
    out
}
