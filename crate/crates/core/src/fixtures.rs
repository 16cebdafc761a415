//! Synthetic networks, load curves and price curves used by tests, examples and
//! the shipped desk fixture.

use std::f64::consts::PI;

use crate::error::Result;
use crate::network::{Edge, EdgeKind, FlowField, NetworkGraph, Node, PipeParams, Side};
use crate::scalar::Scalar;
use crate::scenario::{LoadSeries, PriceSeries};

/// A plant feeding a straight trunk with branches to consumers at every junction.
#[derive(Debug, Clone, PartialEq)]
pub struct CombSpec {
    /// Prepended to every node and edge id.
    pub prefix: String,
    pub junctions: usize,
    pub branches_per_junction: usize,
    pub trunk_length: f64,
    pub trunk_diameter: f64,
    pub trunk_heat_transfer: f64,
    /// Cycled over the branches in order.
    pub branch_lengths: Vec<f64>,
    pub branch_diameter: f64,
    pub branch_heat_transfer: f64,
    pub consumer_massflow: f64,
    pub origin: (f64, f64),
}

impl CombSpec {
    /// One plant, ten consumers on a 1.5 km trunk.
    pub fn desk() -> Self {
        Self {
            prefix: String::new(),
            junctions: 5,
            branches_per_junction: 2,
            trunk_length: 300.0,
            trunk_diameter: 0.065,
            trunk_heat_transfer: 0.15,
            branch_lengths: vec![100.0, 150.0, 200.0, 250.0, 120.0, 180.0, 220.0, 140.0, 160.0, 240.0],
            branch_diameter: 0.025,
            branch_heat_transfer: 0.12,
            consumer_massflow: 0.16,
            origin: (0.0, 0.0),
        }
    }

    pub fn consumers(&self) -> usize {
        self.junctions * self.branches_per_junction
    }
}

/// Accumulates nodes, edges and their mass flows.
#[derive(Debug, Default)]
pub struct NetworkBuilder {
    nodes: Vec<Node<f64>>,
    edges: Vec<Edge<f64>>,
    flows: Vec<f64>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(&mut self, id: String, side: Side, x: f64, y: f64) -> usize {
        self.nodes.push(Node {
            id,
            side,
            position: Some((x, y)),
        });
        self.nodes.len() - 1
    }

    pub fn edge(&mut self, id: String, tail: usize, head: usize, kind: EdgeKind, pipe: PipeParams<f64>, flow: f64) {
        self.edges.push(Edge {
            id,
            tail,
            head,
            kind,
            pipe,
        });
        self.flows.push(flow);
    }

    /// Adds a comb. `export` kg/s leave the far trunk end on the supply side
    /// through an edge the caller adds (and come back on the return side).
    /// Returns the far supply and return trunk nodes.
    pub fn comb(&mut self, spec: &CombSpec, export: f64) -> Result<(usize, usize)> {
        let p = &spec.prefix;
        let (ox, oy) = spec.origin;
        let trunk = PipeParams::new(spec.trunk_length, spec.trunk_diameter, spec.trunk_heat_transfer)?;
        let exchanger = PipeParams::new(1.0, spec.branch_diameter, 0.0)?;
        let plant_pipe = PipeParams::new(1.0, spec.trunk_diameter, 0.0)?;
        let per_junction = spec.branches_per_junction as f64 * spec.consumer_massflow;

        let mut s_prev = self.node(format!("{p}S0"), Side::Supply, ox, oy);
        let mut r_prev = self.node(format!("{p}R0"), Side::Return, ox, oy - 5.0);
        let total = spec.junctions as f64 * per_junction + export;
        self.edge(format!("{p}plant"), r_prev, s_prev, EdgeKind::Producer, plant_pipe, total);
        let mut branch = 0;
        for j in 1..=spec.junctions {
            let x = ox + j as f64 * spec.trunk_length;
            let s = self.node(format!("{p}S{j}"), Side::Supply, x, oy);
            let r = self.node(format!("{p}R{j}"), Side::Return, x, oy - 5.0);
            let carried = (spec.junctions - j + 1) as f64 * per_junction + export;
            self.edge(format!("{p}st{j}"), s_prev, s, EdgeKind::Supply, trunk, carried);
            self.edge(format!("{p}rt{j}"), r, r_prev, EdgeKind::Return, trunk, carried);
            for b in 0..spec.branches_per_junction {
                let tag = (b'a' + b as u8) as char;
                let len = spec.branch_lengths[branch % spec.branch_lengths.len()];
                branch += 1;
                let pipe = PipeParams::new(len, spec.branch_diameter, spec.branch_heat_transfer)?;
                let sign = if b % 2 == 0 { 1.0 } else { -1.0 };
                let y = oy + sign * (len + (b / 2) as f64 * 20.0);
                let bs = self.node(format!("{p}S{j}{tag}"), Side::Supply, x, y);
                let br = self.node(format!("{p}R{j}{tag}"), Side::Return, x + 5.0, y);
                let m = spec.consumer_massflow;
                self.edge(format!("{p}sb{j}{tag}"), s, bs, EdgeKind::Supply, pipe, m);
                self.edge(format!("{p}c{j}{tag}"), bs, br, EdgeKind::Consumer, exchanger, m);
                self.edge(format!("{p}rb{j}{tag}"), br, r, EdgeKind::Return, pipe, m);
            }
            s_prev = s;
            r_prev = r;
        }
        Ok((s_prev, r_prev))
    }

    pub fn finish<T: Scalar>(self) -> Result<(NetworkGraph<T>, FlowField<T>)> {
        let cast = |v: f64| T::lit(v);
        let nodes = self
            .nodes
            .into_iter()
            .map(|n| Node {
                id: n.id,
                side: n.side,
                position: n.position.map(|(x, y)| (cast(x), cast(y))),
            })
            .collect();
        let edges = self
            .edges
            .into_iter()
            .map(|e| {
                Ok(Edge {
                    id: e.id,
                    tail: e.tail,
                    head: e.head,
                    kind: e.kind,
                    pipe: PipeParams::new(cast(e.pipe.length), cast(e.pipe.diameter), cast(e.pipe.heat_transfer))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let graph = NetworkGraph::new(nodes, edges)?;
        let flow = FlowField::new(&graph, self.flows.into_iter().map(cast).collect())?;
        Ok((graph, flow))
    }
}

/// A single comb network (pipes not yet subdivided).
pub fn comb<T: Scalar>(spec: &CombSpec) -> Result<(NetworkGraph<T>, FlowField<T>)> {
    let mut b = NetworkBuilder::new();
    b.comb(spec, 0.0)?;
    b.finish()
}

/// The desk network: one plant, ten consumers.
pub fn desk_network<T: Scalar>() -> Result<(NetworkGraph<T>, FlowField<T>)> {
    comb(&CombSpec::desk())
}

/// About a hundred computational nodes after subdivision into 40 m cells.
pub fn hundred_node_network<T: Scalar>() -> Result<(NetworkGraph<T>, FlowField<T>)> {
    let spec = CombSpec {
        junctions: 4,
        trunk_length: 240.0,
        branch_lengths: vec![120.0, 90.0, 150.0, 60.0],
        ..CombSpec::desk()
    };
    let (g, f) = comb::<T>(&spec)?;
    g.subdivide(&f, T::lit(40.0))
}

/// Smallest network with a plant and a consumer: the consumer hangs directly on
/// the plant, so every node is a boundary node.
pub fn two_node_network<T: Scalar>() -> Result<(NetworkGraph<T>, FlowField<T>)> {
    let mut b = NetworkBuilder::new();
    let s = b.node("S".into(), Side::Supply, 0.0, 0.0);
    let r = b.node("R".into(), Side::Return, 0.0, -5.0);
    let hx = PipeParams::new(1.0, 0.05, 0.0)?;
    b.edge("c".into(), s, r, EdgeKind::Consumer, hx, 0.5);
    b.edge("plant".into(), r, s, EdgeKind::Producer, hx, 0.5);
    b.finish()
}

/// Two plants, each feeding a comb of 90 consumers, joined at the far trunk
/// ends by a tie pipe; over 1300 computational nodes at 100 m cells.
pub fn large_network<T: Scalar>() -> Result<(NetworkGraph<T>, FlowField<T>)> {
    let base = CombSpec {
        junctions: 30,
        branches_per_junction: 3,
        trunk_length: 300.0,
        trunk_diameter: 0.2,
        branch_lengths: vec![150.0, 220.0, 310.0, 180.0, 260.0, 350.0, 200.0],
        ..CombSpec::desk()
    };
    let tie = 0.2;
    let mut b = NetworkBuilder::new();
    let a = CombSpec {
        prefix: "a.".into(),
        ..base.clone()
    };
    let bspec = CombSpec {
        prefix: "b.".into(),
        origin: (0.0, 2000.0),
        ..base
    };
    let (sa, ra) = b.comb(&a, tie)?;
    let (sb, rb) = b.comb(&bspec, -tie)?;
    let pipe = PipeParams::new(400.0, 0.1, 0.15)?;
    b.edge("tie.s".into(), sa, sb, EdgeKind::Supply, pipe, tie);
    b.edge("tie.r".into(), rb, ra, EdgeKind::Return, pipe, tie);
    let (g, f) = b.finish::<T>()?;
    g.subdivide(&f, T::lit(100.0))
}

/// Synthetic district load over `days` at `interval` seconds with morning and
/// evening peaks and a short-period ripple, scaled to `mean` W.
pub fn base_load(days: usize, interval: f64, mean: f64) -> Result<LoadSeries> {
    let samples = (days as f64 * 86_400.0 / interval).round() as usize + 1;
    let mut values: Vec<f64> = (0..samples)
        .map(|i| {
            let t = i as f64 * interval;
            let h = (t / 3600.0) % 24.0;
            let bump = |c: f64, w: f64| (-((h - c) / w).powi(2)).exp();
            1.0 + 0.35 * bump(7.0, 1.5) + 0.25 * bump(19.0, 2.0) - 0.2 * (2.0 * PI * (h - 3.0) / 24.0).cos().max(0.0)
                + 0.04 * (2.0 * PI * t / 5400.0).sin()
        })
        .collect();
    let m = values.iter().sum::<f64>() / values.len() as f64;
    for v in values.iter_mut() {
        *v *= mean / m;
    }
    LoadSeries::new(0.0, interval, values)
}

/// Hourly two-level price: `cheap` from 10:00 to 16:00 each day, `expensive`
/// otherwise.
pub fn two_level_prices(days: usize, cheap: f64, expensive: f64) -> Result<PriceSeries> {
    let hours = days * 24;
    let times = (0..=hours).map(|h| h as f64 * 3600.0).collect();
    let prices = (0..=hours)
        .map(|h| if (10..16).contains(&(h % 24)) { cheap } else { expensive })
        .collect();
    PriceSeries::new(times, prices)
}
