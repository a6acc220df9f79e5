//! Discrete-time leaky integrate-and-fire dynamics over a directed circuit graph.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NeuronId = usize;

/// Lower clamp applied to every membrane potential.
pub const V_FLOOR: f64 = -1.0;

/// Default weight of one external (sensor) spike arriving on an input port.
pub const DEFAULT_W_EXT: f64 = 1.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpikingError {
    #[error("invalid neuron parameters: {0}")]
    InvalidParams(String),
    #[error("unknown neuron id {0}")]
    UnknownNeuron(NeuronId),
    #[error("unknown input port `{0}`")]
    UnknownPort(String),
    #[error("port `{0}` already declared")]
    DuplicatePort(String),
    #[error("synapse delay must be at least one step")]
    ZeroDelay,
    #[error("synapse magnitude must be a finite nonnegative number, got {0}")]
    BadMagnitude(f64),
    #[error("invalid timing: {0}")]
    InvalidTiming(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    pub tau_m: f64,
    pub v_rest: f64,
    pub v_threshold: f64,
    pub v_reset: f64,
    pub refractory: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams { tau_m: 20.0, v_rest: 0.0, v_threshold: 1.0, v_reset: 0.0, refractory: 2.0 }
    }
}

impl NeuronParams {
    pub fn validate(&self) -> Result<(), SpikingError> {
        let all_finite =
            [self.tau_m, self.v_rest, self.v_threshold, self.v_reset, self.refractory].iter().all(|x| x.is_finite());
        if !all_finite {
            return Err(SpikingError::InvalidParams("non-finite value".into()));
        }
        if self.tau_m <= 0.0 {
            return Err(SpikingError::InvalidParams("tau_m must be positive".into()));
        }
        if self.refractory < 0.0 {
            return Err(SpikingError::InvalidParams("refractory must be nonnegative".into()));
        }
        if self.v_reset >= self.v_threshold {
            return Err(SpikingError::InvalidParams("v_reset must lie below v_threshold".into()));
        }
        if self.v_rest > self.v_threshold {
            return Err(SpikingError::InvalidParams("v_rest must not exceed v_threshold".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronState {
    pub v: f64,
    pub refractory_until: f64,
    pub last_spike: Option<f64>,
}

impl NeuronState {
    pub fn at_rest(params: &NeuronParams) -> Self {
        NeuronState { v: params.v_rest, refractory_until: f64::NEG_INFINITY, last_spike: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConnectionKind {
    Excitatory,
    Inhibitory,
}

impl ConnectionKind {
    pub fn sign(self) -> i32 {
        match self {
            ConnectionKind::Excitatory => 1,
            ConnectionKind::Inhibitory => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Synapse {
    pub pre: NeuronId,
    pub post: NeuronId,
    pub kind: ConnectionKind,
    pub magnitude: f64,
    /// Delay in simulation steps.
    pub delay: u32,
}

impl Synapse {
    pub fn signed_weight(&self) -> f64 {
        f64::from(self.kind.sign()) * self.magnitude
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neuron {
    pub params: NeuronParams,
    pub role: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputPort {
    pub neuron: NeuronId,
    pub w_ext: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CircuitGraph {
    neurons: Vec<Neuron>,
    synapses: Vec<Synapse>,
    input_ports: BTreeMap<String, InputPort>,
    output_ports: BTreeMap<String, NeuronId>,
}

impl CircuitGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_neuron(&mut self, params: NeuronParams, role: impl Into<String>) -> Result<NeuronId, SpikingError> {
        params.validate()?;
        self.neurons.push(Neuron { params, role: role.into() });
        Ok(self.neurons.len() - 1)
    }

    pub fn connect(
        &mut self,
        pre: NeuronId,
        post: NeuronId,
        kind: ConnectionKind,
        magnitude: f64,
        delay: u32,
    ) -> Result<(), SpikingError> {
        self.check_neuron(pre)?;
        self.check_neuron(post)?;
        if delay == 0 {
            return Err(SpikingError::ZeroDelay);
        }
        if !(magnitude.is_finite() && magnitude >= 0.0) {
            return Err(SpikingError::BadMagnitude(magnitude));
        }
        self.synapses.push(Synapse { pre, post, kind, magnitude, delay });
        Ok(())
    }

    pub fn add_input_port(&mut self, name: &str, neuron: NeuronId, w_ext: f64) -> Result<(), SpikingError> {
        self.check_neuron(neuron)?;
        if self.input_ports.contains_key(name) {
            return Err(SpikingError::DuplicatePort(name.to_string()));
        }
        self.input_ports.insert(name.to_string(), InputPort { neuron, w_ext });
        Ok(())
    }

    pub fn add_output_port(&mut self, name: &str, neuron: NeuronId) -> Result<(), SpikingError> {
        self.check_neuron(neuron)?;
        if self.output_ports.contains_key(name) {
            return Err(SpikingError::DuplicatePort(name.to_string()));
        }
        self.output_ports.insert(name.to_string(), neuron);
        Ok(())
    }

    pub fn has_port(&self, name: &str) -> bool {
        self.input_ports.contains_key(name) || self.output_ports.contains_key(name)
    }

    fn check_neuron(&self, id: NeuronId) -> Result<(), SpikingError> {
        if id < self.neurons.len() {
            Ok(())
        } else {
            Err(SpikingError::UnknownNeuron(id))
        }
    }

    pub fn neuron_count(&self) -> usize {
        self.neurons.len()
    }

    pub fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    pub fn synapses(&self) -> &[Synapse] {
        &self.synapses
    }

    pub fn input_ports(&self) -> &BTreeMap<String, InputPort> {
        &self.input_ports
    }

    pub fn output_ports(&self) -> &BTreeMap<String, NeuronId> {
        &self.output_ports
    }

    pub fn role(&self, id: NeuronId) -> &str {
        &self.neurons[id].role
    }

    fn max_delay(&self) -> u32 {
        self.synapses.iter().map(|s| s.delay).max().unwrap_or(1)
    }

    fn outgoing(&self) -> Vec<Vec<(NeuronId, f64, u32)>> {
        let mut out = vec![Vec::new(); self.neurons.len()];
        for s in &self.synapses {
            out[s.pre].push((s.post, s.signed_weight(), s.delay));
        }
        out
    }
}

/// Ordered spike times in milliseconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain {
    pub times: Vec<f64>,
}

impl SpikeTrain {
    pub fn new(times: Vec<f64>) -> Self {
        SpikeTrain { times }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn count_in(&self, start: f64, end: f64) -> usize {
        count_in(&self.times, start, end)
    }
}

/// Number of sorted times falling in `[start, end)`.
pub fn count_in(times: &[f64], start: f64, end: f64) -> usize {
    let lo = times.partition_point(|&t| t < start);
    let hi = times.partition_point(|&t| t < end);
    hi.saturating_sub(lo)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub dt: f64,
    pub duration: f64,
    pub spikes: Vec<Vec<f64>>,
    pub potentials: Vec<Vec<f64>>,
}

impl Trace {
    pub fn steps(&self) -> usize {
        self.potentials.first().map_or(0, Vec::len)
    }

    pub fn total_spikes(&self) -> usize {
        self.spikes.iter().map(Vec::len).sum()
    }

    pub fn spikes_in(&self, id: NeuronId, start: f64, end: f64) -> usize {
        count_in(&self.spikes[id], start, end)
    }

    pub fn first_spike_in(&self, id: NeuronId, start: f64, end: f64) -> Option<f64> {
        let times = &self.spikes[id];
        let lo = times.partition_point(|&t| t < start);
        times.get(lo).copied().filter(|&t| t < end)
    }
}

/// One leaky integrate-and-fire update. The returned state carries the post-reset potential.
pub fn step_neuron(state: &NeuronState, params: &NeuronParams, input: f64, t: f64, dt: f64) -> (NeuronState, bool) {
    let decay = (-dt / params.tau_m).exp();
    let (next, fired, _) = integrate(state, params, decay, input, t);
    (next, fired)
}

/// Shared update kernel; also returns the sampled potential for the trace.
#[inline]
fn integrate(state: &NeuronState, params: &NeuronParams, decay: f64, input: f64, t: f64) -> (NeuronState, bool, f64) {
    let mut v = params.v_rest + (state.v - params.v_rest) * decay + input;
    if v < V_FLOOR {
        v = V_FLOOR;
    }
    let sample = v;
    if t >= state.refractory_until && v >= params.v_threshold {
        let next = NeuronState { v: params.v_reset, refractory_until: t + params.refractory, last_spike: Some(t) };
        (next, true, sample)
    } else {
        (NeuronState { v, ..*state }, false, sample)
    }
}

/// Synaptic input is accumulated in integer units of this size so that summation is
/// exact and independent of delivery order.
pub const WEIGHT_QUANTUM: f64 = 1e-9;

fn quantize(w: f64) -> i64 {
    (w / WEIGHT_QUANTUM).round() as i64
}

/// Pending synaptic deliveries, indexed by absolute step number.
#[derive(Debug, Clone)]
pub struct DeliveryQueue {
    slots: Vec<Vec<i64>>,
}

impl DeliveryQueue {
    pub fn new(circuit: &CircuitGraph) -> Self {
        let len = circuit.max_delay() as usize + 1;
        DeliveryQueue { slots: vec![vec![0; circuit.neuron_count()]; len] }
    }

    fn slot_mut(&mut self, step: u64) -> &mut Vec<i64> {
        let len = self.slots.len() as u64;
        &mut self.slots[(step % len) as usize]
    }

    pub fn schedule(&mut self, step: u64, post: NeuronId, weight: f64) {
        self.schedule_quantized(step, post, quantize(weight));
    }

    fn schedule_quantized(&mut self, step: u64, post: NeuronId, units: i64) {
        self.slot_mut(step)[post] += units;
    }

    /// Removes and returns the summed input scheduled for `step`.
    pub fn take(&mut self, step: u64) -> Vec<f64> {
        let slot = self.slot_mut(step);
        let out = slot.iter().map(|&u| u as f64 * WEIGHT_QUANTUM).collect();
        slot.iter_mut().for_each(|u| *u = 0);
        out
    }

    pub fn is_idle(&self) -> bool {
        self.slots.iter().all(|s| s.iter().all(|&u| u == 0))
    }
}

/// Advances every neuron by one step. `external` names the input ports spiking at this step.
pub fn step_circuit(
    circuit: &CircuitGraph,
    states: &mut [NeuronState],
    queue: &mut DeliveryQueue,
    external: &[&str],
    step: u64,
    dt: f64,
) -> Result<Vec<NeuronId>, SpikingError> {
    for name in external {
        let port = circuit.input_ports.get(*name).ok_or_else(|| SpikingError::UnknownPort(name.to_string()))?;
        queue.schedule(step, port.neuron, port.w_ext);
    }
    let input = queue.take(step);
    let t = step as f64 * dt;
    let mut fired = Vec::new();
    for (id, neuron) in circuit.neurons.iter().enumerate() {
        let decay = (-dt / neuron.params.tau_m).exp();
        let (next, spiked, _) = integrate(&states[id], &neuron.params, decay, input[id], t);
        states[id] = next;
        if spiked {
            fired.push(id);
        }
    }
    for &id in &fired {
        for s in circuit.synapses.iter().filter(|s| s.pre == id) {
            queue.schedule(step + u64::from(s.delay), s.post, s.signed_weight());
        }
    }
    Ok(fired)
}

/// Number of steps covering `duration`.
pub fn step_count(duration: f64, dt: f64) -> usize {
    (duration / dt).round() as usize
}

/// Runs the circuit for `duration` ms with the given per-port input spike trains.
pub fn simulate(
    circuit: &CircuitGraph,
    drive: &BTreeMap<String, SpikeTrain>,
    duration: f64,
    dt: f64,
) -> Result<Trace, SpikingError> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(SpikingError::InvalidTiming(format!("duration must be positive, got {duration}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SpikingError::InvalidTiming(format!("dt must be positive, got {dt}")));
    }
    let steps = step_count(duration, dt);
    let n = circuit.neuron_count();

    let mut ext_events: Vec<(usize, NeuronId, i64)> = Vec::new();
    for (name, train) in drive {
        let port = circuit.input_ports.get(name).ok_or_else(|| SpikingError::UnknownPort(name.clone()))?;
        for &time in &train.times {
            if !(time >= 0.0 && time < duration) {
                return Err(SpikingError::InvalidTiming(format!("drive spike at {time} ms outside [0, {duration})")));
            }
            let k = (time / dt).round() as usize;
            if k < steps {
                ext_events.push((k, port.neuron, quantize(port.w_ext)));
            }
        }
    }
    ext_events.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));

    let decay: Vec<f64> = circuit.neurons.iter().map(|nr| (-dt / nr.params.tau_m).exp()).collect();
    let outgoing: Vec<Vec<(NeuronId, i64, u32)>> = circuit
        .outgoing()
        .into_iter()
        .map(|edges| edges.into_iter().map(|(post, w, d)| (post, quantize(w), d)).collect())
        .collect();
    let mut queue = DeliveryQueue::new(circuit);
    let mut states: Vec<NeuronState> = circuit.neurons.iter().map(|nr| NeuronState::at_rest(&nr.params)).collect();
    let mut spikes = vec![Vec::new(); n];
    let mut potentials: Vec<Vec<f64>> = (0..n).map(|_| Vec::with_capacity(steps)).collect();
    let mut fired = Vec::new();
    let mut next_ext = 0;

    for k in 0..steps {
        let step = k as u64;
        while next_ext < ext_events.len() && ext_events[next_ext].0 == k {
            let (_, id, units) = ext_events[next_ext];
            queue.schedule_quantized(step, id, units);
            next_ext += 1;
        }
        let input = queue.take(step);
        let t = k as f64 * dt;
        fired.clear();
        for id in 0..n {
            let (next, spiked, sample) = integrate(&states[id], &circuit.neurons[id].params, decay[id], input[id], t);
            states[id] = next;
            potentials[id].push(sample);
            if spiked {
                fired.push(id);
                spikes[id].push(t);
            }
        }
        for &id in &fired {
            for &(post, w, delay) in &outgoing[id] {
                queue.schedule_quantized(step + u64::from(delay), post, w);
            }
        }
    }

    Ok(Trace { dt, duration, spikes, potentials })
}
