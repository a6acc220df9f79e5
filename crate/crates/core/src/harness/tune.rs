//! Grid search for judge-bank weights.
//!
//! Judges only listen to detectors and never feed back, so every judge row can be simulated on its
//! own and the three rows combined afterwards.

use serde::Serialize;

use crate::circuits::{DepthLayer, DepthState, Variant};
use crate::exec::{self, Execution};
use crate::harness::run::{expected_depth, run_with_trains, sense, RunError};
use crate::harness::scenario::Scenario;
use crate::spiking::SpikeTrain;

/// Candidate weights for every judge input.
pub const JUDGE_GRID: [f64; 7] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5];

#[derive(Debug, Clone, Serialize)]
pub struct TuneResult {
    /// Rows for the N, M and F judges.
    pub weights: [[f64; 3]; 3],
    /// Scenarios where the intended judge fired strictly more than both others.
    pub score: usize,
    /// Sum over scenarios of the intended judge's lead over the runner-up.
    pub margin: i64,
}

pub fn grid_rows() -> Vec<[f64; 3]> {
    let mut rows = Vec::new();
    for &a in &JUDGE_GRID {
        for &b in &JUDGE_GRID {
            for &c in &JUDGE_GRID {
                rows.push([a, b, c]);
            }
        }
    }
    rows
}

/// Spikes of one judge row summed over every bank, for each scenario.
fn row_counts(scenarios: &[(Scenario, Vec<SpikeTrain>)], row: [f64; 3]) -> Result<Vec<i64>, RunError> {
    scenarios
        .iter()
        .map(|(s, trains)| {
            let mut s = s.with_variant(Variant::Weights);
            s.ctd.judge_weights = [row; 3];
            let a = run_with_trains(&s, trains.clone())?;
            let DepthLayer::Weights(banks) = &a.circuit.depth else {
                unreachable!("weights variant builds judge banks")
            };
            Ok(banks.iter().map(|b| a.trace.spikes[b.judge_ids[0]].len() as i64).sum())
        })
        .collect()
}

fn judge_index(d: DepthState) -> usize {
    match d {
        DepthState::N => 0,
        DepthState::M => 1,
        DepthState::F => 2,
    }
}

/// Exhaustive search over `JUDGE_GRID` for the rows that best separate the scripted scenarios.
pub fn tune_judges(scenarios: &[Scenario], exec: Execution) -> Result<TuneResult, RunError> {
    let labelled: Vec<(Scenario, Vec<SpikeTrain>, usize)> = scenarios
        .iter()
        .filter_map(|s| expected_depth(&s.trajectory.kind).map(|e| (s, judge_index(e))))
        .map(|(s, e)| sense(s).map(|t| (s.clone(), t, e)))
        .collect::<Result<_, _>>()?;
    let inputs: Vec<(Scenario, Vec<SpikeTrain>)> = labelled.iter().map(|(s, t, _)| (s.clone(), t.clone())).collect();
    let expected: Vec<usize> = labelled.iter().map(|l| l.2).collect();

    let rows = grid_rows();
    let counts: Vec<Vec<i64>> =
        exec::map(&rows, exec, |&r| row_counts(&inputs, r)).into_iter().collect::<Result<_, _>>()?;

    let mut best: Option<(usize, i64, [usize; 3])> = None;
    for n in 0..rows.len() {
        for m in 0..rows.len() {
            for f in 0..rows.len() {
                let pick = [n, m, f];
                let mut score = 0;
                let mut margin = 0;
                for (si, &e) in expected.iter().enumerate() {
                    let own = counts[pick[e]][si];
                    let rival = (0..3).filter(|&j| j != e).map(|j| counts[pick[j]][si]).max().unwrap_or(0);
                    score += usize::from(own > rival);
                    margin += own - rival;
                }
                if best.is_none_or(|(s, g, _)| (score, margin) > (s, g)) {
                    best = Some((score, margin, pick));
                }
            }
        }
    }
    let (score, margin, pick) = best.expect("grid is never empty");
    Ok(TuneResult { weights: pick.map(|i| rows[i]), score, margin })
}
