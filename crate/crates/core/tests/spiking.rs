use std::collections::BTreeMap;

use ctd::spiking::{
    simulate, step_circuit, step_neuron, CircuitGraph, ConnectionKind, DeliveryQueue, NeuronId, NeuronParams,
    NeuronState, SpikeTrain, SpikingError, Synapse, Trace, V_FLOOR,
};
use proptest::prelude::*;

fn params() -> NeuronParams {
    NeuronParams::default()
}

fn drive(port: &str, times: Vec<f64>) -> BTreeMap<String, SpikeTrain> {
    BTreeMap::from([(port.to_string(), SpikeTrain::new(times))])
}

#[test]
fn rest_is_a_fixed_point() {
    let s = NeuronState::at_rest(&params());
    let (next, fired) = step_neuron(&s, &params(), 0.0, 0.0, 1.0);
    assert_eq!(next.v, 0.0);
    assert!(!fired);
}

#[test]
fn suprathreshold_input_fires_and_resets() {
    let p = params();
    let (next, fired) = step_neuron(&NeuronState::at_rest(&p), &p, 1.0, 10.0, 1.0);
    assert!(fired);
    assert_eq!(next.v, p.v_reset);
    assert_eq!(next.refractory_until, 10.0 + p.refractory);
    assert_eq!(next.last_spike, Some(10.0));
}

#[test]
fn pure_decay_matches_closed_form_and_finer_steps() {
    let p = params();
    let s = NeuronState { v: 1.0, refractory_until: 0.0, last_spike: None };
    let (next, fired) = step_neuron(&s, &p, 0.0, 0.0, 1.0);
    assert!(!fired);
    assert!((next.v - (-1.0f64 / 20.0).exp()).abs() < 1e-12);
    assert!((next.v - 0.951229).abs() < 1e-6);

    let mut fine = s;
    for k in 0..10 {
        fine = step_neuron(&fine, &p, 0.0, k as f64 * 0.1, 0.1).0;
    }
    assert!((fine.v - next.v).abs() < 1e-3);
}

#[test]
fn refractory_blocks_firing() {
    let p = params();
    let s = NeuronState { v: 0.0, refractory_until: 5.0, last_spike: Some(3.0) };
    let (next, fired) = step_neuron(&s, &p, 2.0, 4.0, 1.0);
    assert!(!fired);
    assert_eq!(next.v, 2.0);
}

#[test]
fn potential_is_clamped_at_floor() {
    let p = params();
    let (next, _) = step_neuron(&NeuronState::at_rest(&p), &p, -5.0, 0.0, 1.0);
    assert_eq!(next.v, V_FLOOR);
}

#[test]
fn invalid_params_are_rejected() {
    let mut g = CircuitGraph::new();
    for bad in [
        NeuronParams { tau_m: 0.0, ..params() },
        NeuronParams { refractory: -1.0, ..params() },
        NeuronParams { v_reset: 1.0, ..params() },
        NeuronParams { v_rest: 2.0, ..params() },
    ] {
        assert!(matches!(g.add_neuron(bad, "x"), Err(SpikingError::InvalidParams(_))));
    }
}

#[test]
fn construction_errors() {
    let mut g = CircuitGraph::new();
    let a = g.add_neuron(params(), "a").unwrap();
    assert_eq!(g.connect(a, a, ConnectionKind::Excitatory, 1.0, 0), Err(SpikingError::ZeroDelay));
    assert_eq!(g.connect(a, 7, ConnectionKind::Excitatory, 1.0, 1), Err(SpikingError::UnknownNeuron(7)));
    assert!(matches!(g.connect(a, a, ConnectionKind::Inhibitory, -0.5, 1), Err(SpikingError::BadMagnitude(_))));
    g.add_input_port("in", a, 1.1).unwrap();
    assert_eq!(g.add_input_port("in", a, 1.1), Err(SpikingError::DuplicatePort("in".into())));
}

#[test]
fn connection_sign_algebra() {
    assert_eq!(ConnectionKind::Excitatory.sign(), 1);
    assert_eq!(ConnectionKind::Inhibitory.sign(), -1);
    let s = Synapse { pre: 0, post: 1, kind: ConnectionKind::Inhibitory, magnitude: 0.4, delay: 1 };
    assert_eq!(s.signed_weight(), -0.4);
}

#[test]
fn empty_circuit_steps_quietly() {
    let g = CircuitGraph::new();
    let mut states = Vec::new();
    let mut queue = DeliveryQueue::new(&g);
    let fired = step_circuit(&g, &mut states, &mut queue, &[], 0, 1.0).unwrap();
    assert!(fired.is_empty());
    assert!(queue.is_idle());
}

#[test]
fn step_circuit_rejects_unknown_port() {
    let mut g = CircuitGraph::new();
    g.add_neuron(params(), "a").unwrap();
    let mut states = vec![NeuronState::at_rest(&params())];
    let mut queue = DeliveryQueue::new(&g);
    let err = step_circuit(&g, &mut states, &mut queue, &["nope"], 0, 1.0).unwrap_err();
    assert_eq!(err, SpikingError::UnknownPort("nope".into()));
}

#[test]
fn excitation_arrives_one_delay_later() {
    let mut g = CircuitGraph::new();
    let a = g.add_neuron(params(), "a").unwrap();
    let b = g.add_neuron(params(), "b").unwrap();
    g.connect(a, b, ConnectionKind::Excitatory, 1.0, 1).unwrap();
    g.add_input_port("in", a, 1.1).unwrap();
    let mut states = vec![NeuronState::at_rest(&params()); 2];
    let mut queue = DeliveryQueue::new(&g);
    assert_eq!(step_circuit(&g, &mut states, &mut queue, &["in"], 4, 1.0).unwrap(), vec![a]);
    assert_eq!(step_circuit(&g, &mut states, &mut queue, &[], 5, 1.0).unwrap(), vec![b]);
}

#[test]
fn inhibition_subtracts() {
    let mut g = CircuitGraph::new();
    let a = g.add_neuron(params(), "a").unwrap();
    let b = g.add_neuron(params(), "b").unwrap();
    g.connect(a, b, ConnectionKind::Inhibitory, 0.5, 1).unwrap();
    g.add_input_port("in", a, 1.1).unwrap();
    let mut states = vec![NeuronState::at_rest(&params()); 2];
    states[b].v = 0.8;
    let mut queue = DeliveryQueue::new(&g);
    step_circuit(&g, &mut states, &mut queue, &["in"], 0, 1.0).unwrap();
    let before = states[b].v;
    step_circuit(&g, &mut states, &mut queue, &[], 1, 1.0).unwrap();
    let decayed = before * (-1.0f64 / 20.0).exp();
    assert!(states[b].v < decayed);
    assert!((states[b].v - (decayed - 0.5)).abs() < 1e-9);
}

#[test]
fn undriven_circuit_stays_flat() {
    let mut g = CircuitGraph::new();
    let a = g.add_neuron(params(), "a").unwrap();
    let b = g.add_neuron(params(), "b").unwrap();
    g.connect(a, b, ConnectionKind::Excitatory, 2.0, 3).unwrap();
    g.add_input_port("in", a, 1.1).unwrap();
    let trace = simulate(&g, &BTreeMap::new(), 200.0, 1.0).unwrap();
    assert_eq!(trace.total_spikes(), 0);
    assert_eq!(trace.steps(), 200);
    assert!(trace.potentials.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn simulate_rejects_bad_inputs() {
    let mut g = CircuitGraph::new();
    let a = g.add_neuron(params(), "a").unwrap();
    g.add_input_port("in", a, 1.1).unwrap();
    assert!(matches!(simulate(&g, &drive("other", vec![1.0]), 10.0, 1.0), Err(SpikingError::UnknownPort(_))));
    assert!(matches!(simulate(&g, &drive("in", vec![10.0]), 10.0, 1.0), Err(SpikingError::InvalidTiming(_))));
    assert!(matches!(simulate(&g, &BTreeMap::new(), 0.0, 1.0), Err(SpikingError::InvalidTiming(_))));
    assert!(matches!(simulate(&g, &BTreeMap::new(), 10.0, -1.0), Err(SpikingError::InvalidTiming(_))));
}

/// Independent scalar walk of one port-driven neuron.
fn walk_single(times: &[f64], w_ext: f64, p: &NeuronParams, duration: usize) -> Vec<f64> {
    let decay = (-1.0 / p.tau_m).exp();
    let mut v = p.v_rest;
    let mut blocked_until = f64::NEG_INFINITY;
    let mut out = Vec::new();
    for k in 0..duration {
        let t = k as f64;
        let hits = times.iter().filter(|&&x| x == t).count() as f64;
        v = (p.v_rest + (v - p.v_rest) * decay + hits * w_ext).max(-1.0);
        if t >= blocked_until && v >= p.v_threshold {
            out.push(t);
            v = p.v_reset;
            blocked_until = t + p.refractory;
        }
    }
    out
}

#[test]
fn driven_neuron_relays_every_input_at_200hz() {
    let p = params();
    let mut g = CircuitGraph::new();
    let a = g.add_neuron(p, "a").unwrap();
    g.add_input_port("in", a, 1.1 * p.v_threshold).unwrap();
    let times: Vec<f64> = (0..200).map(|i| i as f64 * 5.0).collect();
    let trace = simulate(&g, &drive("in", times.clone()), 1000.0, 1.0).unwrap();
    let oracle = walk_single(&times, 1.1, &p, 1000);
    assert_eq!(trace.spikes[a], oracle);
    assert_eq!(trace.spikes[a].len(), 200);
}

#[test]
fn refractory_collisions_drop_inputs() {
    let p = params();
    let mut g = CircuitGraph::new();
    let a = g.add_neuron(p, "a").unwrap();
    g.add_input_port("in", a, 1.1).unwrap();
    let times: Vec<f64> = (0..100u32).map(f64::from).collect();
    let trace = simulate(&g, &drive("in", times.clone()), 100.0, 1.0).unwrap();
    assert_eq!(trace.spikes[a], walk_single(&times, 1.1, &p, 100));
    assert!(trace.spikes[a].len() < times.len());
}

#[test]
fn repeated_runs_are_identical() {
    let mut g = CircuitGraph::new();
    let a = g.add_neuron(params(), "a").unwrap();
    let b = g.add_neuron(params(), "b").unwrap();
    g.connect(a, b, ConnectionKind::Excitatory, 0.6, 2).unwrap();
    g.connect(b, a, ConnectionKind::Inhibitory, 0.3, 1).unwrap();
    g.add_input_port("in", a, 1.1).unwrap();
    let d = drive("in", (0..90).map(|i| f64::from(i) * 7.0).collect());
    assert_eq!(simulate(&g, &d, 700.0, 1.0).unwrap(), simulate(&g, &d, 700.0, 1.0).unwrap());
}

#[derive(Debug, Clone)]
struct RandomNet {
    n: usize,
    synapses: Vec<(usize, usize, bool, f64, u32)>,
    inputs: Vec<Vec<u16>>,
}

fn random_net() -> impl Strategy<Value = RandomNet> {
    (2usize..7).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec((0..n, 0..n, any::<bool>(), 0.0f64..1.5, 1u32..4), 0..20),
            prop::collection::vec(prop::collection::btree_set(0u16..300, 0..40), n),
        )
            .prop_map(|(n, synapses, inputs)| RandomNet {
                n,
                synapses,
                inputs: inputs.into_iter().map(|s| s.into_iter().collect()).collect(),
            })
    })
}

/// Builds `net` with neuron `i` relabelled `perm[i]`; `reverse` also flips the synapse list order.
fn build(net: &RandomNet, perm: &[usize], reverse: bool) -> (CircuitGraph, BTreeMap<String, SpikeTrain>) {
    let mut inverse = vec![0; net.n];
    for (old, &new) in perm.iter().enumerate() {
        inverse[new] = old;
    }
    let mut g = CircuitGraph::new();
    for _ in 0..net.n {
        g.add_neuron(params(), "n").unwrap();
    }
    let mut order: Vec<_> = net.synapses.iter().collect();
    if reverse {
        order.reverse();
    }
    for &&(pre, post, exc, w, d) in &order {
        let kind = if exc { ConnectionKind::Excitatory } else { ConnectionKind::Inhibitory };
        g.connect(perm[pre], perm[post], kind, w, d).unwrap();
    }
    let mut drive = BTreeMap::new();
    for (new, &old) in inverse.iter().enumerate() {
        let name = format!("p{old}");
        g.add_input_port(&name, new, 1.1).unwrap();
        drive.insert(name, SpikeTrain::new(net.inputs[old].iter().map(|&t| f64::from(t)).collect()));
    }
    (g, drive)
}

fn refractory_ok(trace: &Trace, refractory: f64) -> bool {
    trace.spikes.iter().all(|s| s.windows(2).all(|w| w[1] - w[0] >= refractory))
}

proptest! {
    #[test]
    fn order_independence(net in random_net(), seed in any::<u64>()) {
        let mut perm: Vec<usize> = (0..net.n).collect();
        let mut x = seed;
        for i in (1..net.n).rev() {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (x >> 33) as usize % (i + 1));
        }
        let identity: Vec<usize> = (0..net.n).collect();
        let (g0, d0) = build(&net, &identity, false);
        let (g1, d1) = build(&net, &perm, true);
        let t0 = simulate(&g0, &d0, 320.0, 1.0).unwrap();
        let t1 = simulate(&g1, &d1, 320.0, 1.0).unwrap();
        for (old, &new) in perm.iter().enumerate() {
            prop_assert_eq!(&t0.spikes[old], &t1.spikes[new]);
            prop_assert_eq!(&t0.potentials[old], &t1.potentials[new]);
        }
    }

    #[test]
    fn refractory_spacing_and_time_bounds(net in random_net()) {
        let identity: Vec<usize> = (0..net.n).collect();
        let (g, d) = build(&net, &identity, false);
        let trace = simulate(&g, &d, 320.0, 1.0).unwrap();
        prop_assert!(refractory_ok(&trace, params().refractory));
        for s in &trace.spikes {
            prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(s.iter().all(|&t| (0.0..320.0).contains(&t)));
        }
        prop_assert!(trace.potentials.iter().all(|p| p.len() == 320 && p.iter().all(|&v| v >= V_FLOOR)));
    }

    #[test]
    fn spikes_cause_effects_no_earlier_than_one_step(delay in 1u32..6, at in 0u16..100) {
        let mut g = CircuitGraph::new();
        let a = g.add_neuron(params(), "a").unwrap();
        let b = g.add_neuron(params(), "b").unwrap();
        g.connect(a, b, ConnectionKind::Excitatory, 0.3, delay).unwrap();
        g.add_input_port("in", a, 1.1).unwrap();
        let trace = simulate(&g, &drive("in", vec![f64::from(at)]), 200.0, 1.0).unwrap();
        let arrival = usize::from(at) + delay as usize;
        prop_assert!(trace.potentials[b][..arrival].iter().all(|&v| v == 0.0));
        prop_assert!(trace.potentials[b][arrival] > 0.0);
    }

    #[test]
    fn leak_keeps_rest(v_rest in -0.5f64..0.5, steps in 1usize..400) {
        let p = NeuronParams { v_rest, v_reset: v_rest.min(0.0), ..params() };
        let mut s = NeuronState::at_rest(&p);
        for k in 0..steps {
            s = step_neuron(&s, &p, 0.0, k as f64, 1.0).0;
        }
        prop_assert!((s.v - v_rest).abs() < 1e-12);
    }

    #[test]
    fn halving_dt_barely_moves_potentials(times in prop::collection::btree_set(0u16..1000, 0..150)) {
        let p = params();
        let mut g = CircuitGraph::new();
        let a = g.add_neuron(p, "a").unwrap();
        g.add_input_port("in", a, 0.4).unwrap();
        let d = drive("in", times.iter().map(|&t| f64::from(t)).collect());
        let coarse = simulate(&g, &d, 1000.0, 1.0).unwrap();
        let fine = simulate(&g, &d, 1000.0, 0.5).unwrap();
        for (k, v) in coarse.potentials[a].iter().enumerate() {
            prop_assert!((v - fine.potentials[a][2 * k]).abs() < 0.05 * p.v_threshold);
        }
    }
}

#[test]
fn ids_are_dense() {
    let mut g = CircuitGraph::new();
    let ids: Vec<NeuronId> = (0..4).map(|_| g.add_neuron(params(), "n").unwrap()).collect();
    assert_eq!(ids, vec![0, 1, 2, 3]);
    assert_eq!(g.neuron_count(), 4);
}
