use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use emcoord_netsim::{sim_campaign, SimConfig, SimMetrics, Simulation};

use crate::exit::{CliError, CliResult};
use crate::Out;

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub area_km2: Option<f64>,
    #[arg(long)]
    pub range_m: Option<f64>,
    #[arg(long)]
    pub duration_s: Option<u64>,
    #[arg(long)]
    pub step_s: Option<u64>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub beacon_s: Option<u64>,
    #[arg(long)]
    pub pause_max_s: Option<u64>,
    #[arg(long)]
    pub speed_min: Option<f64>,
    #[arg(long)]
    pub speed_max: Option<f64>,
    /// Stationary node at `x,y` metres. Repeat for each node; replaces the
    /// random crowd with a single run over exactly these positions.
    #[arg(long, value_parser = parse_point)]
    pub fixed: Vec<(f64, f64)>,
    /// Also write the metrics as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_point(s: &str) -> Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let x: f64 = x.trim().parse().map_err(|e| format!("x: {e}"))?;
    let y: f64 = y.trim().parse().map_err(|e| format!("y: {e}"))?;
    Ok((x, y))
}

impl RunArgs {
    fn config(&self, seed: Option<u64>) -> SimConfig {
        let d = SimConfig::default();
        SimConfig {
            node_count: if self.fixed.is_empty() {
                self.nodes.unwrap_or(d.node_count)
            } else {
                self.fixed.len()
            },
            area_km2: self.area_km2.unwrap_or(d.area_km2),
            radio_range_m: self.range_m.unwrap_or(d.radio_range_m),
            duration_s: self.duration_s.unwrap_or(d.duration_s),
            step_s: self.step_s.unwrap_or(d.step_s),
            speed_range_mps: (
                self.speed_min.unwrap_or(d.speed_range_mps.0),
                self.speed_max.unwrap_or(d.speed_range_mps.1),
            ),
            pause_range_s: (d.pause_range_s.0, self.pause_max_s.unwrap_or(d.pause_range_s.1)),
            beacon_period_s: self.beacon_s.unwrap_or(d.beacon_period_s),
            runs: if self.fixed.is_empty() { self.runs.unwrap_or(d.runs) } else { 1 },
            seed: seed.unwrap_or(d.seed),
        }
    }
}

pub fn run(args: &RunArgs, seed: Option<u64>, out: &Out) -> CliResult {
    let config = args.config(seed);
    let metrics = if args.fixed.is_empty() {
        sim_campaign(&config).map_err(|e| CliError::usage(e.to_string()))?
    } else {
        let sim = Simulation::fixed(config.clone(), &args.fixed)
            .map_err(|e| CliError::usage(e.to_string()))?;
        let m = sim.run();
        SimMetrics {
            node_count: config.node_count,
            communications_reached: m.communications_reached as f64,
            isolated_nodes: m.isolated_nodes as f64,
            received_per_node: m.received_per_node,
            per_run: vec![m],
        }
    };
    let report = json!({"config": config, "metrics": metrics});
    if let Some(path) = &args.out {
        let text = serde_json::to_string_pretty(&report).expect("metrics serialize");
        std::fs::write(path, text)?;
    }
    out.emit(&report, || {
        format!(
            "nodes {}, {} run(s), seed {}\nCommunications reached         {:.1}\nIsolated nodes                 {:.1}\nCommunications received by node {:.1}",
            config.node_count,
            config.runs,
            config.seed,
            metrics.communications_reached,
            metrics.isolated_nodes,
            metrics.received_per_node
        )
    });
    Ok(())
}
