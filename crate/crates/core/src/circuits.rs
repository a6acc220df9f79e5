//! Direction (PDD), depth (DDM) and weight-judge circuits, plus their windowed readouts.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spiking::{CircuitGraph, ConnectionKind, NeuronId, NeuronParams, SpikingError, Trace, DEFAULT_W_EXT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("sensor count {0} is not divisible by 3")]
    BadArity(usize),
    #[error("port `{0}` already declared")]
    DuplicatePort(String),
    #[error("unknown neuron id {0}")]
    UnknownNeuron(NeuronId),
    #[error("judge weight [{row}][{col}] is negative ({value})")]
    NegativeWeight { row: usize, col: usize, value: f64 },
    #[error(transparent)]
    Spiking(#[from] SpikingError),
}

/// Judge weights from the offline grid search over the canonical scenarios.
/// Rows are the N, M and F judges; columns the unit's left, centre and right detectors.
pub const DEFAULT_JUDGE_WEIGHTS: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.5, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CtdParams {
    pub neuron: NeuronParams,
    pub w_ext: f64,
    /// Lateral inhibition between the detectors of one PDD unit.
    pub pdd_inhibition: f64,
    /// Detector to regulatory-neuron excitation.
    pub ddm_input: f64,
    /// Mutual inhibition between the two regulatory neurons.
    pub ddm_mutual: f64,
    pub ddm_cross_excitatory: f64,
    pub ddm_cross_inhibitory: f64,
    /// Adds a DDM across the boundary between neighbouring PDD units.
    pub bridge_units: bool,
    pub judge_weights: [[f64; 3]; 3],
}

impl Default for CtdParams {
    fn default() -> Self {
        CtdParams {
            neuron: NeuronParams::default(),
            w_ext: DEFAULT_W_EXT,
            pdd_inhibition: 0.6,
            ddm_input: 1.1,
            ddm_mutual: 0.8,
            ddm_cross_excitatory: 1.1,
            ddm_cross_inhibitory: 1.1,
            bridge_units: false,
            judge_weights: DEFAULT_JUDGE_WEIGHTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PddUnit {
    pub detector_ids: [NeuronId; 3],
    pub ports: [String; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DdmUnit {
    pub g_left: NeuronId,
    pub g_right: NeuronId,
    pub a_up: NeuronId,
    pub a_down: NeuronId,
    pub left_input: NeuronId,
    pub right_input: NeuronId,
}

impl DdmUnit {
    pub fn neurons(&self) -> [NeuronId; 4] {
        [self.g_left, self.g_right, self.a_up, self.a_down]
    }

    pub fn assessing(&self) -> [NeuronId; 2] {
        [self.a_up, self.a_down]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JudgeBank {
    /// Judges for the N, M and F states, in that order.
    pub judge_ids: [NeuronId; 3],
    pub weights: [[f64; 3]; 3],
    pub inputs: [NeuronId; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LeftToRight,
    RightToLeft,
    Undetermined,
}

impl Direction {
    pub fn flipped(self) -> Direction {
        match self {
            Direction::LeftToRight => Direction::RightToLeft,
            Direction::RightToLeft => Direction::LeftToRight,
            Direction::Undetermined => Direction::Undetermined,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::LeftToRight => "left_to_right",
            Direction::RightToLeft => "right_to_left",
            Direction::Undetermined => "undetermined",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DepthState {
    N,
    M,
    F,
}

impl fmt::Display for DepthState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DepthState::N => "N",
            DepthState::M => "M",
            DepthState::F => "F",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Ddm,
    Weights,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DepthLayer {
    Ddm(Vec<DdmUnit>),
    Weights(Vec<JudgeBank>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtdCircuit {
    pub graph: CircuitGraph,
    pub units: Vec<PddUnit>,
    pub depth: DepthLayer,
}

impl CtdCircuit {
    pub fn variant(&self) -> Variant {
        match self.depth {
            DepthLayer::Ddm(_) => Variant::Ddm,
            DepthLayer::Weights(_) => Variant::Weights,
        }
    }

    pub fn detectors(&self) -> Vec<NeuronId> {
        self.units.iter().flat_map(|u| u.detector_ids).collect()
    }

    /// Neurons whose potentials form the depth layer: assessing neurons or judges.
    pub fn depth_layer_neurons(&self) -> Vec<NeuronId> {
        match &self.depth {
            DepthLayer::Ddm(ddms) => ddms.iter().flat_map(|d| d.assessing()).collect(),
            DepthLayer::Weights(banks) => banks.iter().flat_map(|b| b.judge_ids).collect(),
        }
    }

    /// Every neuron added on top of the PDD chain.
    pub fn depth_circuit_neurons(&self) -> Vec<NeuronId> {
        match &self.depth {
            DepthLayer::Ddm(ddms) => ddms.iter().flat_map(|d| d.neurons()).collect(),
            DepthLayer::Weights(banks) => banks.iter().flat_map(|b| b.judge_ids).collect(),
        }
    }
}

pub fn sensor_port(index: usize) -> String {
    format!("s{index}")
}

pub fn build_pdd_unit(
    circuit: &mut CircuitGraph,
    ports: [&str; 3],
    params: &CtdParams,
) -> Result<PddUnit, CircuitError> {
    for (i, p) in ports.iter().enumerate() {
        if circuit.has_port(p) || ports[..i].contains(p) {
            return Err(CircuitError::DuplicatePort(p.to_string()));
        }
    }
    let mut ids = [0; 3];
    for (slot, port) in ids.iter_mut().zip(ports) {
        *slot = circuit.add_neuron(params.neuron, "detector")?;
        circuit.add_input_port(port, *slot, params.w_ext)?;
    }
    for &a in &ids {
        for &b in &ids {
            if a != b {
                circuit.connect(a, b, ConnectionKind::Inhibitory, params.pdd_inhibition, 1)?;
            }
        }
    }
    Ok(PddUnit { detector_ids: ids, ports: ports.map(str::to_string) })
}

pub fn build_pdd_chain(circuit: &mut CircuitGraph, n: usize, params: &CtdParams) -> Result<Vec<PddUnit>, CircuitError> {
    if !n.is_multiple_of(3) {
        return Err(CircuitError::BadArity(n));
    }
    (0..n / 3)
        .map(|u| {
            let names = [sensor_port(3 * u), sensor_port(3 * u + 1), sensor_port(3 * u + 2)];
            build_pdd_unit(circuit, [&names[0], &names[1], &names[2]], params)
        })
        .collect()
}

pub fn build_ddm_unit(
    circuit: &mut CircuitGraph,
    left: NeuronId,
    right: NeuronId,
    params: &CtdParams,
) -> Result<DdmUnit, CircuitError> {
    for id in [left, right] {
        if id >= circuit.neuron_count() {
            return Err(CircuitError::UnknownNeuron(id));
        }
    }
    let p = params.neuron;
    let g_left = circuit.add_neuron(p, "regulatory_left")?;
    let g_right = circuit.add_neuron(p, "regulatory_right")?;
    let a_up = circuit.add_neuron(p, "assessing_up")?;
    let a_down = circuit.add_neuron(p, "assessing_down")?;
    use ConnectionKind::{Excitatory, Inhibitory};
    circuit.connect(left, g_left, Excitatory, params.ddm_input, 1)?;
    circuit.connect(right, g_right, Excitatory, params.ddm_input, 1)?;
    circuit.connect(g_left, g_right, Inhibitory, params.ddm_mutual, 1)?;
    circuit.connect(g_right, g_left, Inhibitory, params.ddm_mutual, 1)?;
    circuit.connect(g_right, a_up, Excitatory, params.ddm_cross_excitatory, 1)?;
    circuit.connect(g_left, a_up, Inhibitory, params.ddm_cross_inhibitory, 1)?;
    circuit.connect(g_left, a_down, Excitatory, params.ddm_cross_excitatory, 1)?;
    circuit.connect(g_right, a_down, Inhibitory, params.ddm_cross_inhibitory, 1)?;
    Ok(DdmUnit { g_left, g_right, a_up, a_down, left_input: left, right_input: right })
}

pub fn build_judge_bank(
    circuit: &mut CircuitGraph,
    unit: &PddUnit,
    weights: [[f64; 3]; 3],
    params: &CtdParams,
) -> Result<JudgeBank, CircuitError> {
    for (row, ws) in weights.iter().enumerate() {
        for (col, &value) in ws.iter().enumerate() {
            if value.is_nan() || value < 0.0 {
                return Err(CircuitError::NegativeWeight { row, col, value });
            }
        }
    }
    let roles = ["judge_n", "judge_m", "judge_f"];
    let mut judge_ids = [0; 3];
    for (j, slot) in judge_ids.iter_mut().enumerate() {
        *slot = circuit.add_neuron(params.neuron, roles[j])?;
    }
    for (j, &judge) in judge_ids.iter().enumerate() {
        for (k, &det) in unit.detector_ids.iter().enumerate() {
            circuit.connect(det, judge, ConnectionKind::Excitatory, weights[j][k], 1)?;
        }
    }
    Ok(JudgeBank { judge_ids, weights, inputs: unit.detector_ids })
}

/// Adjacent detector pairs that receive a DDM, left to right.
pub fn ddm_pairs(units: &[PddUnit], bridge_units: bool) -> Vec<(NeuronId, NeuronId)> {
    let mut pairs = Vec::new();
    for (u, unit) in units.iter().enumerate() {
        let d = unit.detector_ids;
        pairs.push((d[0], d[1]));
        pairs.push((d[1], d[2]));
        if bridge_units {
            if let Some(next) = units.get(u + 1) {
                pairs.push((d[2], next.detector_ids[0]));
            }
        }
    }
    pairs
}

pub fn build_ctd(n: usize, variant: Variant, params: &CtdParams) -> Result<CtdCircuit, CircuitError> {
    let mut graph = CircuitGraph::new();
    let units = build_pdd_chain(&mut graph, n, params)?;
    let depth = match variant {
        Variant::Ddm => {
            let ddms = ddm_pairs(&units, params.bridge_units)
                .into_iter()
                .map(|(l, r)| build_ddm_unit(&mut graph, l, r, params))
                .collect::<Result<Vec<_>, _>>()?;
            for (i, d) in ddms.iter().enumerate() {
                graph.add_output_port(&format!("ddm{i}.a_up"), d.a_up)?;
                graph.add_output_port(&format!("ddm{i}.a_down"), d.a_down)?;
            }
            DepthLayer::Ddm(ddms)
        }
        Variant::Weights => {
            let banks = units
                .iter()
                .map(|u| build_judge_bank(&mut graph, u, params.judge_weights, params))
                .collect::<Result<Vec<_>, _>>()?;
            for (i, b) in banks.iter().enumerate() {
                for (state, &id) in ["n", "m", "f"].iter().zip(&b.judge_ids) {
                    graph.add_output_port(&format!("judges{i}.{state}"), id)?;
                }
            }
            DepthLayer::Weights(banks)
        }
    };
    Ok(CtdCircuit { graph, units, depth })
}

/// A judge-style neuron closing an excitatory loop onto itself; once kicked it never stops.
pub fn excitatory_feedback_fixture(params: &CtdParams) -> Result<(CircuitGraph, NeuronId), CircuitError> {
    let mut graph = CircuitGraph::new();
    let det = graph.add_neuron(params.neuron, "detector")?;
    graph.add_input_port(&sensor_port(0), det, params.w_ext)?;
    let judge = graph.add_neuron(params.neuron, "judge_n")?;
    graph.connect(det, judge, ConnectionKind::Excitatory, 1.1 * params.neuron.v_threshold, 1)?;
    let delay = params.neuron.refractory.ceil() as u32 + 1;
    graph.connect(judge, judge, ConnectionKind::Excitatory, 1.1 * params.neuron.v_threshold, delay)?;
    Ok((graph, judge))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Self {
        Window { start, end }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutParams {
    /// Window length (ms).
    pub window: f64,
    /// Window stride (ms).
    pub stride: f64,
    /// Minimum assessing-neuron spikes for a depth verdict.
    pub theta_active: usize,
    /// Relative rate difference below which the assessing pair counts as balanced.
    pub rate_margin: f64,
}

impl Default for ReadoutParams {
    fn default() -> Self {
        ReadoutParams { window: 1000.0, stride: 50.0, theta_active: 3, rate_margin: 0.025 }
    }
}

fn order_direction(first: &[Option<f64>]) -> Direction {
    let seen: Vec<f64> = first.iter().flatten().copied().collect();
    if seen.len() < 2 {
        return Direction::Undetermined;
    }
    if seen.windows(2).all(|w| w[0] < w[1]) {
        Direction::LeftToRight
    } else if seen.windows(2).all(|w| w[0] > w[1]) {
        Direction::RightToLeft
    } else {
        Direction::Undetermined
    }
}

pub fn read_direction(trace: &Trace, unit: &PddUnit, window: Window) -> Direction {
    let first: Vec<Option<f64>> =
        unit.detector_ids.iter().map(|&d| trace.first_spike_in(d, window.start, window.end)).collect();
    order_direction(&first)
}

/// First-spike ordering across every detector of the chain.
pub fn read_chain_direction(trace: &Trace, units: &[PddUnit], window: Window) -> Direction {
    let first: Vec<Option<f64>> =
        units.iter().flat_map(|u| u.detector_ids).map(|d| trace.first_spike_in(d, window.start, window.end)).collect();
    order_direction(&first)
}

/// Mean firing rate (Hz) between the first and last spike inside the window.
pub fn span_rate(times: &[f64], window: Window) -> f64 {
    let lo = times.partition_point(|&t| t < window.start);
    let hi = times.partition_point(|&t| t < window.end);
    if hi < lo + 2 {
        return 0.0;
    }
    let span = times[hi - 1] - times[lo];
    (hi - lo - 1) as f64 * 1000.0 / span
}

/// Whether both detectors feeding the DDM fired inside the window.
pub fn ddm_engaged(trace: &Trace, ddm: &DdmUnit, window: Window) -> bool {
    trace.spikes_in(ddm.left_input, window.start, window.end) > 0
        && trace.spikes_in(ddm.right_input, window.start, window.end) > 0
}

fn depth_from_winner(up_wins: bool, direction: Direction) -> DepthState {
    match (up_wins, direction) {
        (true, Direction::LeftToRight) | (false, Direction::RightToLeft) => DepthState::N,
        (false, Direction::LeftToRight) | (true, Direction::RightToLeft) => DepthState::F,
        (_, Direction::Undetermined) => DepthState::M,
    }
}

/// Reads one DDM: the assessing neuron firing at the higher rate, combined with direction.
pub fn read_depth_ddm(
    trace: &Trace,
    ddm: &DdmUnit,
    direction: Direction,
    window: Window,
    params: &ReadoutParams,
) -> DepthState {
    if !ddm_engaged(trace, ddm, window) || direction == Direction::Undetermined {
        return DepthState::M;
    }
    let up = trace.spikes_in(ddm.a_up, window.start, window.end);
    let down = trace.spikes_in(ddm.a_down, window.start, window.end);
    if up < params.theta_active && down < params.theta_active {
        return DepthState::M;
    }
    let rate_up = span_rate(&trace.spikes[ddm.a_up], window);
    let rate_down = span_rate(&trace.spikes[ddm.a_down], window);
    if (rate_up - rate_down).abs() <= params.rate_margin * rate_up.max(rate_down) {
        return DepthState::M;
    }
    depth_from_winner(rate_up > rate_down, direction)
}

/// Argmax over judge spike counts; ties and silence read as M.
pub fn read_depth_judges(trace: &Trace, bank: &JudgeBank, window: Window) -> DepthState {
    let counts = bank.judge_ids.map(|j| trace.spikes_in(j, window.start, window.end));
    let best = *counts.iter().max().unwrap_or(&0);
    if best == 0 || counts.iter().filter(|&&c| c == best).count() > 1 {
        return DepthState::M;
    }
    [DepthState::N, DepthState::M, DepthState::F][counts.iter().position(|&c| c == best).unwrap_or(1)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CognitiveReadout {
    pub window: Window,
    pub direction: Direction,
    pub depth: DepthState,
    /// Spike counts of the depth-circuit neurons active in the window.
    pub evidence: BTreeMap<NeuronId, usize>,
    /// Number of depth units with evidence in the window.
    pub engaged: usize,
    /// Total depth-circuit spikes in the window.
    pub activity: usize,
}

/// Sliding windows of length `window` and step `stride` covering `[0, duration]`.
pub fn windows(duration: f64, params: &ReadoutParams) -> Vec<Window> {
    let mut out = Vec::new();
    if params.window > duration || params.window <= 0.0 || params.stride <= 0.0 {
        return out;
    }
    let mut k = 0usize;
    loop {
        let start = k as f64 * params.stride;
        if start + params.window > duration + 1e-9 {
            break;
        }
        out.push(Window::new(start, start + params.window));
        k += 1;
    }
    out
}

pub fn classify(trace: &Trace, ctd: &CtdCircuit, params: &ReadoutParams) -> Vec<CognitiveReadout> {
    windows(trace.duration, params).into_iter().map(|w| classify_window(trace, ctd, w, params)).collect()
}

pub fn classify_window(trace: &Trace, ctd: &CtdCircuit, window: Window, params: &ReadoutParams) -> CognitiveReadout {
    let direction = read_chain_direction(trace, &ctd.units, window);
    let mut evidence = BTreeMap::new();
    for id in ctd.depth_circuit_neurons() {
        let c = trace.spikes_in(id, window.start, window.end);
        if c > 0 {
            evidence.insert(id, c);
        }
    }
    let activity = evidence.values().sum();
    let (depth, engaged) = match &ctd.depth {
        DepthLayer::Ddm(ddms) => {
            let verdicts: Vec<DepthState> = ddms
                .iter()
                .filter(|d| ddm_engaged(trace, d, window))
                .map(|d| read_depth_ddm(trace, d, direction, window, params))
                .collect();
            let depth = match verdicts.split_first() {
                Some((first, rest)) if rest.iter().all(|v| v == first) => *first,
                _ => DepthState::M,
            };
            (depth, verdicts.len())
        }
        DepthLayer::Weights(banks) => {
            let totals: Vec<usize> = banks
                .iter()
                .map(|b| b.judge_ids.iter().map(|&j| trace.spikes_in(j, window.start, window.end)).sum())
                .collect();
            let engaged = totals.iter().filter(|&&t| t > 0).count();
            let best = totals.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).map(|(i, _)| i);
            let depth = match best {
                Some(i) if totals[i] > 0 => read_depth_judges(trace, &banks[i], window),
                _ => DepthState::M,
            };
            (depth, engaged)
        }
    };
    CognitiveReadout { window, direction, depth, evidence, engaged, activity }
}

/// Index of the most active window with engaged depth units; ties go to the middle of the tied run.
pub fn dominant_window(readouts: &[CognitiveReadout]) -> Option<usize> {
    let best = readouts.iter().filter(|r| r.engaged > 0).map(|r| r.activity).max()?;
    let tied: Vec<usize> =
        readouts.iter().enumerate().filter(|(_, r)| r.engaged > 0 && r.activity == best).map(|(i, _)| i).collect();
    Some(tied[(tied.len() - 1) / 2])
}
