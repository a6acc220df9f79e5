//! End-to-end runs, potential-variation metrics and variant comparison.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuits::{
    build_ctd, classify, ddm_pairs, dominant_window, read_chain_direction, CircuitError, CognitiveReadout, CtdCircuit,
    DepthLayer, DepthState, Direction, Variant, Window,
};
use crate::correlation::{classify_by_correlation, CorrelationError};
use crate::harness::scenario::Scenario;
use crate::spiking::{simulate, NeuronId, SpikeTrain, SpikingError, Trace};
use crate::world::{sense_scenario, TrajectoryKind, WorldError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Spiking(#[from] SpikingError),
    #[error(transparent)]
    Correlation(#[from] CorrelationError),
    #[error("unknown neuron id {0}")]
    UnknownNeuron(NeuronId),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VariationMetrics {
    /// Σ|Δv| per monitored neuron per second.
    pub total_variation: f64,
    pub max_step: f64,
    pub mean_level: f64,
    pub degenerate: bool,
}

pub fn potential_variation(trace: &Trace, monitored: &[NeuronId]) -> Result<VariationMetrics, RunError> {
    if let Some(&bad) = monitored.iter().find(|&&id| id >= trace.potentials.len()) {
        return Err(RunError::UnknownNeuron(bad));
    }
    let samples = trace.steps();
    if monitored.is_empty() || samples == 0 {
        return Ok(VariationMetrics { degenerate: true, ..Default::default() });
    }
    let mut variation = 0.0;
    let mut max_step = 0.0f64;
    let mut level = 0.0;
    for &id in monitored {
        let v = &trace.potentials[id];
        for w in v.windows(2) {
            let step = (w[1] - w[0]).abs();
            variation += step;
            max_step = max_step.max(step);
        }
        level += v.iter().sum::<f64>();
    }
    let n = monitored.len() as f64;
    let seconds = samples as f64 * trace.dt / 1000.0;
    Ok(VariationMetrics {
        total_variation: variation / n / seconds,
        max_step,
        mean_level: level / (n * samples as f64),
        degenerate: false,
    })
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub scenario: Scenario,
    pub circuit: CtdCircuit,
    pub trains: Vec<SpikeTrain>,
    pub trace: Trace,
    pub readouts: Vec<CognitiveReadout>,
    /// Correlation-based depth for each readout window.
    pub correlation: Vec<DepthState>,
    pub metrics: VariationMetrics,
    pub dominant: Option<usize>,
}

impl RunArtifacts {
    /// Direction and depth of the dominant window; silent runs read (Undetermined, M).
    pub fn dominant_reading(&self) -> (Direction, DepthState) {
        self.dominant
            .map(|i| (self.readouts[i].direction, self.readouts[i].depth))
            .unwrap_or((Direction::Undetermined, DepthState::M))
    }
}

/// Depth state a scripted trajectory should produce.
pub fn expected_depth(kind: &TrajectoryKind) -> Option<DepthState> {
    match kind {
        TrajectoryKind::Approach { .. } => Some(DepthState::N),
        TrajectoryKind::Recede { .. } => Some(DepthState::F),
        TrajectoryKind::Tangent { .. } => Some(DepthState::M),
        TrajectoryKind::Waypoints { .. } => None,
    }
}

pub fn sense(s: &Scenario) -> Result<Vec<SpikeTrain>, RunError> {
    Ok(sense_scenario(&s.robot, &s.sensors, &s.trajectory, s.dt, s.encoding, s.seed)?)
}

pub fn drive_map(trains: &[SpikeTrain]) -> BTreeMap<String, SpikeTrain> {
    trains.iter().enumerate().map(|(i, t)| (crate::circuits::sensor_port(i), t.clone())).collect()
}

/// Per-window correlation verdicts over every engaged detector pair, combined like the circuit readout.
pub fn correlation_readouts(
    s: &Scenario,
    circuit: &CtdCircuit,
    trace: &Trace,
    readouts: &[CognitiveReadout],
) -> Result<Vec<DepthState>, RunError> {
    let pairs = ddm_pairs(&circuit.units, s.ctd.bridge_units);
    let trains: Vec<SpikeTrain> = trace.spikes.iter().map(|t| SpikeTrain::new(t.clone())).collect();
    readouts
        .iter()
        .map(|r| {
            let w = r.window;
            let mut verdicts = Vec::new();
            for &(l, rr) in &pairs {
                if trace.spikes_in(l, w.start, w.end) > 0 && trace.spikes_in(rr, w.start, w.end) > 0 {
                    verdicts.push(classify_by_correlation(&trains[l], &trains[rr], r.direction, w, &s.correlation)?);
                }
            }
            Ok(match verdicts.split_first() {
                Some((first, rest)) if rest.iter().all(|v| v == first) => *first,
                _ => DepthState::M,
            })
        })
        .collect()
}

pub fn run_with_trains(s: &Scenario, trains: Vec<SpikeTrain>) -> Result<RunArtifacts, RunError> {
    let circuit = build_ctd(s.sensors.len(), s.variant, &s.ctd)?;
    let trace = simulate(&circuit.graph, &drive_map(&trains), s.duration, s.dt)?;
    let readouts = classify(&trace, &circuit, &s.readout);
    let correlation = correlation_readouts(s, &circuit, &trace, &readouts)?;
    let metrics = potential_variation(&trace, &circuit.depth_layer_neurons())?;
    let dominant = dominant_window(&readouts);
    Ok(RunArtifacts { scenario: s.clone(), circuit, trains, trace, readouts, correlation, metrics, dominant })
}

pub fn run_scenario(s: &Scenario) -> Result<RunArtifacts, RunError> {
    run_with_trains(s, sense(s)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantOutcome {
    pub metrics: VariationMetrics,
    pub direction: Direction,
    pub depth: DepthState,
    pub dominant_window: Option<Window>,
    pub monitored_neurons: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub ddm: VariantOutcome,
    pub weights: VariantOutcome,
    /// DDM value divided by the weights value; absent when the denominator is zero.
    pub ratio_total_variation: Option<f64>,
    pub ratio_max_step: Option<f64>,
    pub ratio_mean_level: Option<f64>,
}

impl ComparisonReport {
    pub fn smoother_steps(&self) -> bool {
        self.ddm.metrics.max_step < self.weights.metrics.max_step
    }

    pub fn smoother_variation(&self) -> bool {
        self.ddm.metrics.total_variation < self.weights.metrics.total_variation
    }

    pub fn level_kept(&self, factor: f64) -> bool {
        self.ddm.metrics.mean_level >= factor * self.weights.metrics.mean_level
    }
}

fn outcome(a: &RunArtifacts) -> VariantOutcome {
    let (direction, depth) = a.dominant_reading();
    VariantOutcome {
        metrics: a.metrics,
        direction,
        depth,
        dominant_window: a.dominant.map(|i| a.readouts[i].window),
        monitored_neurons: a.circuit.depth_layer_neurons().len(),
    }
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b != 0.0).then(|| a / b)
}

/// Runs both variants on identical sensor trains.
pub fn compare_variants(s: &Scenario) -> Result<(ComparisonReport, RunArtifacts, RunArtifacts), RunError> {
    let trains = sense(s)?;
    let ddm = run_with_trains(&s.with_variant(Variant::Ddm), trains.clone())?;
    let weights = run_with_trains(&s.with_variant(Variant::Weights), trains)?;
    let (d, w) = (outcome(&ddm), outcome(&weights));
    let report = ComparisonReport {
        ratio_total_variation: ratio(d.metrics.total_variation, w.metrics.total_variation),
        ratio_max_step: ratio(d.metrics.max_step, w.metrics.max_step),
        ratio_mean_level: ratio(d.metrics.mean_level, w.metrics.mean_level),
        ddm: d,
        weights: w,
    };
    Ok((report, ddm, weights))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeizureReport {
    /// Time (ms) from which all sensor drive is withheld.
    pub cut: f64,
    /// Latest spike at or after the cut, if any.
    pub last_spike: Option<f64>,
}

impl SeizureReport {
    pub fn settled_within(&self, ms: f64) -> bool {
        self.last_spike.is_none_or(|t| t <= self.cut + ms)
    }
}

/// Withholds the drive from `cut` onwards and reports how long the circuit keeps firing.
pub fn drive_removal(s: &Scenario, trains: &[SpikeTrain], cut: f64) -> Result<SeizureReport, RunError> {
    let circuit = build_ctd(s.sensors.len(), s.variant, &s.ctd)?;
    let truncated: Vec<SpikeTrain> =
        trains.iter().map(|t| SpikeTrain::new(t.times.iter().copied().filter(|&x| x < cut).collect())).collect();
    let trace = simulate(&circuit.graph, &drive_map(&truncated), s.duration, s.dt)?;
    let last_spike = trace
        .spikes
        .iter()
        .filter_map(|times| {
            times.iter().copied().filter(|&t| t >= cut).fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.max(t))))
        })
        .fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.max(t))));
    Ok(SeizureReport { cut, last_spike })
}

/// Number of (group, 10 ms window) cases in which more than one member of a group fires more than once.
pub fn crowded_windows(trace: &Trace, groups: &[Vec<NeuronId>]) -> usize {
    let width = 10.0;
    let bins = (trace.duration / width).ceil() as usize;
    let mut violations = 0;
    for group in groups {
        for b in 0..bins {
            let (start, end) = (b as f64 * width, (b + 1) as f64 * width);
            let busy = group.iter().filter(|&&id| trace.spikes_in(id, start, end) > 1).count();
            if busy > 1 {
                violations += 1;
            }
        }
    }
    violations
}

/// Windows in which two detectors of one PDD unit both fire repeatedly.
pub fn exclusivity_violations(trace: &Trace, circuit: &CtdCircuit) -> usize {
    let groups: Vec<Vec<NeuronId>> = circuit.units.iter().map(|u| u.detector_ids.to_vec()).collect();
    crowded_windows(trace, &groups)
}

/// Windows in which both regulatory neurons of one DDM fire repeatedly.
pub fn regulatory_violations(trace: &Trace, circuit: &CtdCircuit) -> usize {
    let groups: Vec<Vec<NeuronId>> = regulatory_pairs(circuit).into_iter().map(|(l, r)| vec![l, r]).collect();
    crowded_windows(trace, &groups)
}

/// Chain direction over the whole run.
pub fn overall_direction(a: &RunArtifacts) -> Direction {
    read_chain_direction(&a.trace, &a.circuit.units, Window::new(0.0, a.trace.duration))
}

/// Regulatory (G_left, G_right) pairs of a DDM circuit; empty for the weights variant.
pub fn regulatory_pairs(circuit: &CtdCircuit) -> Vec<(NeuronId, NeuronId)> {
    match &circuit.depth {
        DepthLayer::Ddm(ddms) => ddms.iter().map(|d| (d.g_left, d.g_right)).collect(),
        DepthLayer::Weights(_) => Vec::new(),
    }
}
