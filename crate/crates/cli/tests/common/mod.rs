#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use dhn_cli::config::{ControlSource, InitialMode};
use dhn_cli::{Console, RunConfig};
use dhn_core::network::{write_flow_field, write_network, EdgeKind, FlowField, NetworkGraph};
use dhn_core::scenario::{write_demands, write_price_series, DemandSet, LoadSeries, PriceSeries};

pub const QUIET: Console = Console { quiet: true };

pub fn desk_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/desk")
}

/// One of the shipped desk configs, `static.json` or `dynamic.json`.
pub fn desk(name: &str) -> RunConfig {
    RunConfig::load(&desk_dir().join(name)).unwrap()
}

/// Writes `graph` with a constant demand of `power` W per consumer over the
/// default three-day horizon and returns a config pointing at the files.
pub fn constant_demand_case(
    dir: &Path,
    graph: &NetworkGraph<f64>,
    flow: &FlowField<f64>,
    power: f64,
    prices: Option<&PriceSeries>,
) -> RunConfig {
    write_network(graph, &dir.join("nodes.csv"), &dir.join("edges.csv")).unwrap();
    write_flow_field(graph, flow, &dir.join("flows.csv")).unwrap();
    let ids: Vec<String> = graph
        .edges()
        .iter()
        .filter(|e| e.kind == EdgeKind::Consumer)
        .map(|e| e.id.clone())
        .collect();
    let mut cfg = RunConfig::default();
    let samples = (cfg.horizon_s / cfg.dt_s) as usize + 1;
    let series = ids
        .iter()
        .map(|_| LoadSeries::new(0.0, cfg.dt_s, vec![power; samples]).unwrap())
        .collect();
    write_demands(&DemandSet::new(ids, series).unwrap(), &dir.join("demands.csv")).unwrap();
    cfg.network.nodes = Some(dir.join("nodes.csv"));
    cfg.network.edges = Some(dir.join("edges.csv"));
    cfg.network.flows = Some(dir.join("flows.csv"));
    cfg.demands = Some(dir.join("demands.csv"));
    if let Some(p) = prices {
        write_price_series(p, &dir.join("prices.csv")).unwrap();
        cfg.prices = Some(dir.join("prices.csv"));
    }
    cfg
}

/// Config echo written next to a run so the binary can be driven with it.
pub fn write_config(dir: &Path, cfg: &RunConfig) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

pub fn with_control(mut cfg: RunConfig, control: ControlSource, initial: InitialMode) -> RunConfig {
    cfg.control = control;
    cfg.initial_state = initial;
    cfg
}

/// Header and numeric rows of a CSV file.
pub fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

pub fn column(path: &Path, name: &str) -> Vec<f64> {
    let (header, rows) = read_table(path);
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name} in {path:?}"));
    rows.iter().map(|r| r[i]).collect()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Largest relative difference between two JSON documents over all numbers;
/// panics if their shapes or non-numeric values differ.
pub fn json_max_rel_diff(a: &serde_json::Value, b: &serde_json::Value, skip: &[&str]) -> f64 {
    use serde_json::Value;
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => rel_diff(x.as_f64().unwrap(), y.as_f64().unwrap()),
        (Value::Array(x), Value::Array(y)) => {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(p, q)| json_max_rel_diff(p, q, skip)).fold(0.0, f64::max)
        }
        (Value::Object(x), Value::Object(y)) => {
            assert_eq!(x.len(), y.len());
            x.iter()
                .filter(|(k, _)| !skip.contains(&k.as_str()))
                .map(|(k, v)| json_max_rel_diff(v, &y[k], skip))
                .fold(0.0, f64::max)
        }
        _ => {
            assert_eq!(a, b);
            0.0
        }
    }
}
