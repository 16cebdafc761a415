//! Regenerates the shipped desk fixture: `cargo run --example desk_fixture [dir]`.

use std::fs;
use std::path::PathBuf;

use dhn_core::fixtures::{base_load, desk_network, two_level_prices};
use dhn_core::network::{write_flow_field, write_network};
use dhn_core::scenario::{
    equal_share_targets, synthesize_demands, write_demands, write_load_series, write_price_series, SynthesisConfig,
};

const STATIC: &str = r#"{
  "network": {
    "nodes": "network_nodes.csv",
    "edges": "network_edges.csv",
    "flows": "flows.csv",
    "max_cell_length_m": 100.0
  },
  "demands": "demands.csv",
  "base_load": "base_load.csv",
  "control": { "constant_c": 110.0 },
  "initial_state": "baseline",
  "seed": 0
}
"#;

const DYNAMIC: &str = r#"{
  "network": {
    "nodes": "network_nodes.csv",
    "edges": "network_edges.csv",
    "flows": "flows.csv",
    "max_cell_length_m": 100.0
  },
  "demands": "demands.csv",
  "base_load": "base_load.csv",
  "prices": "prices.csv",
  "alpha": 1.0,
  "beta": 0.0,
  "control": { "constant_c": 110.0 },
  "initial_state": "min-feasible",
  "seed": 0
}
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("fixtures/desk"));
    fs::create_dir_all(&dir)?;
    let (graph, flow) = desk_network::<f64>()?;
    write_network(&graph, &dir.join("network_nodes.csv"), &dir.join("network_edges.csv"))?;
    write_flow_field(&graph, &flow, &dir.join("flows.csv"))?;

    let base = base_load(3, 900.0, 167_000.0)?;
    write_load_series(&base, &dir.join("base_load.csv"))?;
    let ids: Vec<String> = graph
        .edges()
        .iter()
        .filter(|e| e.kind == dhn_core::network::EdgeKind::Consumer)
        .map(|e| e.id.clone())
        .collect();
    let targets = equal_share_targets(&base, ids.len());
    let demands = synthesize_demands(&base, &ids, &targets, &SynthesisConfig::default())?;
    write_demands(&demands, &dir.join("demands.csv"))?;
    write_price_series(&two_level_prices(3, 40.0, 110.0)?, &dir.join("prices.csv"))?;

    fs::write(dir.join("static.json"), STATIC)?;
    fs::write(dir.join("dynamic.json"), DYNAMIC)?;
    println!("desk fixture written to {}", dir.display());
    Ok(())
}
