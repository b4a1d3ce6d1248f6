//! Beacon-contact simulator for a crowd of staff devices.
//!
//! Nodes move by random waypoint inside a square area and broadcast a beacon
//! every `beacon_period_s`, each with its own random phase. Whenever a node
//! beacons, every other node within `radio_range_m` counts one reception.
//! Per run we report total receptions, nodes that heard nothing at all, and
//! receptions per node; a campaign averages independent seeded runs.
//!
//! Time is integral seconds. Every run is sequential and deterministic in
//! its seed; campaigns fan runs out over rayon and collect them in order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("node_count must be at least 1")]
    NoNodes,
    #[error("area must be positive and finite")]
    BadArea,
    #[error("radio range must be non-negative and finite")]
    BadRange,
    #[error("step_s must be positive")]
    ZeroStep,
    #[error("{field} ({value} s) must be a positive multiple of step_s ({step} s)")]
    NotStepMultiple {
        field: &'static str,
        value: u64,
        step: u64,
    },
    #[error("invalid {0} range")]
    BadInterval(&'static str),
    #[error("runs must be at least 1")]
    NoRuns,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub node_count: usize,
    pub area_km2: f64,
    pub radio_range_m: f64,
    pub duration_s: u64,
    pub step_s: u64,
    pub speed_range_mps: (f64, f64),
    /// Pause at each waypoint, drawn uniformly from this range.
    pub pause_range_s: (u64, u64),
    pub beacon_period_s: u64,
    pub runs: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    /// The crowd scenario: 300 people over 2 km², BLE range. Pause and
    /// beacon period are calibrated so the crowd is mostly stationary within
    /// the hour and each device hears roughly one beacon every few minutes.
    fn default() -> Self {
        SimConfig {
            node_count: 300,
            area_km2: 2.0,
            radio_range_m: 60.0,
            duration_s: 3700,
            step_s: 1,
            speed_range_mps: (0.5, 1.5),
            pause_range_s: (0, 10_800),
            beacon_period_s: 600,
            runs: 10,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn side_m(&self) -> f64 {
        (self.area_km2 * 1e6).sqrt()
    }

    pub fn steps(&self) -> u64 {
        self.duration_s / self.step_s
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.node_count == 0 {
            return Err(SimError::NoNodes);
        }
        if !(self.area_km2.is_finite() && self.area_km2 > 0.0) {
            return Err(SimError::BadArea);
        }
        if !(self.radio_range_m.is_finite() && self.radio_range_m >= 0.0) {
            return Err(SimError::BadRange);
        }
        if self.step_s == 0 {
            return Err(SimError::ZeroStep);
        }
        for (field, value) in [
            ("duration_s", self.duration_s),
            ("beacon_period_s", self.beacon_period_s),
        ] {
            if value == 0 || value % self.step_s != 0 {
                return Err(SimError::NotStepMultiple {
                    field,
                    value,
                    step: self.step_s,
                });
            }
        }
        let (lo, hi) = self.speed_range_mps;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
            return Err(SimError::BadInterval("speed"));
        }
        if self.pause_range_s.0 > self.pause_range_s.1 {
            return Err(SimError::BadInterval("pause"));
        }
        if self.runs == 0 {
            return Err(SimError::NoRuns);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeState {
    pub position: (f64, f64),
    pub waypoint: (f64, f64),
    pub speed: f64,
    /// Seconds left at the current waypoint.
    pub pause_left: u64,
    /// First beacon time; later ones follow every period.
    pub beacon_phase: u64,
    pub received_count: u64,
    pub contacted: bool,
    pub mobile: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub communications_reached: u64,
    pub isolated_nodes: u64,
    pub received_per_node: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub node_count: usize,
    pub communications_reached: f64,
    pub isolated_nodes: f64,
    /// `communications_reached / node_count`, computed from the mean.
    pub received_per_node: f64,
    pub per_run: Vec<RunMetrics>,
}

/// One sampled position, for plotting traces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: u64,
    pub node: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug)]
pub struct Simulation {
    config: SimConfig,
    nodes: Vec<NodeState>,
    rng: ChaCha8Rng,
    step_index: u64,
}

/// Builds a run seeded with `config.seed`.
pub fn sim_new(config: SimConfig) -> Result<Simulation, SimError> {
    let seed = config.seed;
    Simulation::seeded(config, seed)
}

pub fn sim_run(sim: Simulation) -> RunMetrics {
    sim.run()
}

/// Runs `config.runs` simulations with seeds `seed, seed + 1, ...`.
pub fn sim_campaign(config: &SimConfig) -> Result<SimMetrics, SimError> {
    config.validate()?;
    let per_run: Vec<RunMetrics> = (0..config.runs as u64)
        .into_par_iter()
        .map(|i| {
            Simulation::seeded(config.clone(), config.seed.wrapping_add(i))
                .expect("config validated")
                .run()
        })
        .collect();
    let n = per_run.len() as f64;
    let comms = per_run.iter().map(|r| r.communications_reached as f64).sum::<f64>() / n;
    let isolated = per_run.iter().map(|r| r.isolated_nodes as f64).sum::<f64>() / n;
    Ok(SimMetrics {
        node_count: config.node_count,
        communications_reached: comms,
        isolated_nodes: isolated,
        received_per_node: comms / config.node_count as f64,
        per_run,
    })
}

impl Simulation {
    pub fn seeded(config: SimConfig, seed: u64) -> Result<Self, SimError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let side = config.side_m();
        let phases = config.beacon_period_s / config.step_s;
        let nodes = (0..config.node_count)
            .map(|_| {
                let position = (rng.gen_range(0.0..=side), rng.gen_range(0.0..=side));
                let beacon_phase = rng.gen_range(0..phases) * config.step_s;
                let mut node = NodeState {
                    position,
                    waypoint: position,
                    speed: 0.0,
                    pause_left: 0,
                    beacon_phase,
                    received_count: 0,
                    contacted: false,
                    mobile: config.speed_range_mps.1 > 0.0,
                };
                if node.mobile {
                    // start with a pause, as at every later waypoint
                    let (lo, hi) = config.pause_range_s;
                    node.pause_left = rng.gen_range(lo..=hi);
                    if node.pause_left == 0 {
                        next_leg(&mut node, &config, &mut rng);
                    }
                }
                node
            })
            .collect();
        Ok(Simulation {
            config,
            nodes,
            rng,
            step_index: 0,
        })
    }

    /// Nodes that never move and all beacon in phase at `t = 0`.
    pub fn fixed(config: SimConfig, positions: &[(f64, f64)]) -> Result<Self, SimError> {
        let config = SimConfig {
            node_count: positions.len(),
            ..config
        };
        config.validate()?;
        let side = config.side_m();
        if positions
            .iter()
            .any(|&(x, y)| !(0.0..=side).contains(&x) || !(0.0..=side).contains(&y))
        {
            return Err(SimError::BadArea);
        }
        let nodes = positions
            .iter()
            .map(|&position| NodeState {
                position,
                waypoint: position,
                speed: 0.0,
                pause_left: 0,
                beacon_phase: 0,
                received_count: 0,
                contacted: false,
                mobile: false,
            })
            .collect();
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Simulation {
            config,
            nodes,
            rng,
            step_index: 0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn run(mut self) -> RunMetrics {
        while self.step() {}
        self.metrics()
    }

    /// Runs to completion, sampling positions every `sample_every_s` seconds.
    pub fn run_traced(mut self, sample_every_s: u64) -> (RunMetrics, Vec<TraceRow>) {
        let mut trace = Vec::new();
        loop {
            let t = self.time();
            if sample_every_s > 0 && t.is_multiple_of(sample_every_s) && !self.finished() {
                trace.extend(self.nodes.iter().enumerate().map(|(i, n)| TraceRow {
                    t,
                    node: i,
                    x: n.position.0,
                    y: n.position.1,
                }));
            }
            if !self.step() {
                break;
            }
        }
        (self.metrics(), trace)
    }

    /// Current simulated time in seconds.
    pub fn time(&self) -> u64 {
        self.step_index * self.config.step_s
    }

    pub fn finished(&self) -> bool {
        self.step_index >= self.config.steps()
    }

    /// Delivers this step's beacons, then moves everyone. Returns false once
    /// the duration is exhausted.
    pub fn step(&mut self) -> bool {
        if self.finished() {
            return false;
        }
        let t = self.time();
        let range2 = self.config.radio_range_m * self.config.radio_range_m;
        let period = self.config.beacon_period_s;
        for j in 0..self.nodes.len() {
            let phase = self.nodes[j].beacon_phase;
            if t < phase || !(t - phase).is_multiple_of(period) {
                continue;
            }
            let (bx, by) = self.nodes[j].position;
            for (i, node) in self.nodes.iter_mut().enumerate() {
                if i == j {
                    continue;
                }
                let (dx, dy) = (node.position.0 - bx, node.position.1 - by);
                if dx * dx + dy * dy <= range2 {
                    node.received_count += 1;
                    node.contacted = true;
                }
            }
        }
        self.advance();
        self.step_index += 1;
        true
    }

    fn advance(&mut self) {
        let dt = self.config.step_s;
        for node in self.nodes.iter_mut().filter(|n| n.mobile) {
            if node.pause_left > 0 {
                node.pause_left = node.pause_left.saturating_sub(dt);
                if node.pause_left == 0 {
                    next_leg(node, &self.config, &mut self.rng);
                }
                continue;
            }
            let (dx, dy) = (node.waypoint.0 - node.position.0, node.waypoint.1 - node.position.1);
            let dist = dx.hypot(dy);
            let travel = node.speed * dt as f64;
            if travel >= dist {
                node.position = node.waypoint;
                let (lo, hi) = self.config.pause_range_s;
                node.pause_left = self.rng.gen_range(lo..=hi);
                if node.pause_left == 0 {
                    next_leg(node, &self.config, &mut self.rng);
                }
            } else {
                node.position.0 += dx / dist * travel;
                node.position.1 += dy / dist * travel;
            }
        }
    }

    pub fn metrics(&self) -> RunMetrics {
        let total: u64 = self.nodes.iter().map(|n| n.received_count).sum();
        RunMetrics {
            communications_reached: total,
            isolated_nodes: self.nodes.iter().filter(|n| !n.contacted).count() as u64,
            received_per_node: total as f64 / self.nodes.len() as f64,
        }
    }
}

fn next_leg(node: &mut NodeState, config: &SimConfig, rng: &mut ChaCha8Rng) {
    let side = config.side_m();
    node.waypoint = (rng.gen_range(0.0..=side), rng.gen_range(0.0..=side));
    let (lo, hi) = config.speed_range_mps;
    node.speed = if lo == hi { lo } else { rng.gen_range(lo..hi) };
}
