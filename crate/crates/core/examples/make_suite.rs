//! Writes the scripted scenario suite: five approach paths, each with its mirror and time reverse,
//! and five tangent passes in both sweep directions.
//!
//! Usage: `cargo run --example make_suite -- <out-dir> [seed]`

use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctd::harness::scenario::{emit_scenario, ScenarioDoc, TimeDoc, TrajectoryDoc};
use ctd::world::Sweep;

const HOLD_MS: f64 = 500.0;
const TANGENT_HALF_LENGTH: f64 = 2.0;

fn polar(r: f64, deg: f64) -> [f64; 2] {
    let a = deg * PI / 180.0;
    [r * a.cos(), r * a.sin()]
}

fn round(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

/// Start beyond sensor range on the left, end close in front of one of the right-hand sensors,
/// with the range shrinking the whole way.
fn approach_path(rng: &mut ChaCha8Rng) -> ([f64; 2], [f64; 2], f64) {
    loop {
        let speed = rng.random_range(0.25..1.5);
        let start_bearing = rng.random_range(100.0..165.0);
        let sector = [15.0, 45.0, 75.0][rng.random_range(0..3)];
        let end_bearing = 90.0 - sector + rng.random_range(-7.5..7.5);
        let s = polar(rng.random_range(2.1..2.4), start_bearing).map(round);
        let e = polar(rng.random_range(0.3..0.6), end_bearing).map(round);
        let (vx, vy) = (e[0] - s[0], e[1] - s[1]);
        let closest = -(s[0] * vx + s[1] * vy) / (vx * vx + vy * vy);
        if closest >= 1.05 {
            return (s, e, round(speed));
        }
    }
}

fn doc(name: String, duration: f64, trajectory: TrajectoryDoc) -> ScenarioDoc {
    let mut d = ScenarioDoc { name, time: TimeDoc { dt: 1.0, duration }, trajectory, ..ScenarioDoc::default() };
    d.circuit.bridge_units = true;
    d
}

fn main() {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "scenarios/suite".into()));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed must be an integer"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fs::create_dir_all(&out).expect("create output directory");

    let mut docs = Vec::new();
    for i in 1..=5 {
        let (s, e, speed) = approach_path(&mut rng);
        let travel = (e[0] - s[0]).hypot(e[1] - s[1]) / speed * 1000.0;
        let duration = (travel + HOLD_MS).floor();
        for (side, m) in [("l", 1.0), ("r", -1.0)] {
            let (s, e) = ([m * s[0], s[1]], [m * e[0], e[1]]);
            docs.push(doc(
                format!("approach_{i}{side}"),
                duration,
                TrajectoryDoc::Approach { start: s, target: e, speed },
            ));
            docs.push(doc(
                format!("recede_{i}{side}"),
                duration,
                TrajectoryDoc::Recede { start: e, target: s, speed, delay: HOLD_MS },
            ));
        }
        let speed = round(rng.random_range(0.25..1.5));
        let offset = round(rng.random_range(0.5..1.3));
        let duration = (2.0 * TANGENT_HALF_LENGTH / speed * 1000.0).floor();
        for (side, direction) in [("l", Sweep::LeftToRight), ("r", Sweep::RightToLeft)] {
            docs.push(doc(
                format!("tangent_{i}{side}"),
                duration,
                TrajectoryDoc::Tangent { offset, speed, center_time: Some(duration / 2.0), direction },
            ));
        }
    }
    for d in docs {
        let path = out.join(format!("{}.json", d.name));
        fs::write(&path, emit_scenario(&d) + "\n").expect("write scenario");
    }
}
