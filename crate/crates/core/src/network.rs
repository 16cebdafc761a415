//! District heating network graph: duplicated supply/return topology, typed
//! edges with pipe parameters, signed mass flows and nodal control volumes.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{CscMatrix, TripletBuilder};
use crate::scalar::Scalar;

pub const NODES_HEADER: [&str; 4] = ["node_id", "side", "x", "y"];
pub const EDGES_HEADER: [&str; 7] = [
    "edge_id",
    "from_node",
    "to_node",
    "kind",
    "length_m",
    "diameter_m",
    "htc_w_per_m_c",
];
pub const FLOWS_HEADER: [&str; 2] = ["edge_id", "massflow_kg_s"];

/// Absolute nodal mass-balance tolerance in kg/s.
pub const MASS_BALANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Supply,
    Return,
}

impl FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "supply" => Ok(Side::Supply),
            "return" => Ok(Side::Return),
            other => Err(format!("unknown side `{other}` (expected supply|return)")),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Supply => "supply",
            Side::Return => "return",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Supply,
    Return,
    Consumer,
    Producer,
}

impl EdgeKind {
    /// Supply and return edges are insulated pipes that lose heat to the ground.
    pub fn is_pipe(self) -> bool {
        matches!(self, EdgeKind::Supply | EdgeKind::Return)
    }
}

impl FromStr for EdgeKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "supply" => Ok(EdgeKind::Supply),
            "return" => Ok(EdgeKind::Return),
            "consumer" => Ok(EdgeKind::Consumer),
            "producer" => Ok(EdgeKind::Producer),
            other => Err(format!(
                "unknown edge kind `{other}` (expected supply|return|consumer|producer)"
            )),
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Supply => "supply",
            EdgeKind::Return => "return",
            EdgeKind::Consumer => "consumer",
            EdgeKind::Producer => "producer",
        })
    }
}

/// Geometry and insulation of one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipeParams<T> {
    /// m
    pub length: T,
    /// m
    pub diameter: T,
    /// m², always `π d² / 4`
    pub cross_section: T,
    /// W/(m·°C)
    pub heat_transfer: T,
}

impl<T: Scalar> PipeParams<T> {
    pub fn new(length: T, diameter: T, heat_transfer: T) -> Result<Self> {
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::Validation(format!("pipe length must be > 0, got {length}")));
        }
        if !(diameter > T::zero()) || !diameter.is_finite() {
            return Err(Error::Validation(format!(
                "pipe diameter must be > 0, got {diameter}"
            )));
        }
        if !(heat_transfer >= T::zero()) || !heat_transfer.is_finite() {
            return Err(Error::Validation(format!(
                "heat transfer coefficient must be >= 0, got {heat_transfer}"
            )));
        }
        Ok(Self {
            length,
            diameter,
            cross_section: T::lit(std::f64::consts::PI) * diameter * diameter / T::lit(4.0),
            heat_transfer,
        })
    }

    pub fn volume(&self) -> T {
        self.cross_section * self.length
    }
}

/// Mean fluid velocity `v = ṁ / (ρ π d² / 4)` in m/s (signed like `ṁ`).
pub fn velocity<T: Scalar>(massflow: T, pipe: &PipeParams<T>, density: T) -> T {
    massflow / (pipe.cross_section * density)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node<T> {
    pub id: String,
    pub side: Side,
    pub position: Option<(T, T)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge<T> {
    pub id: String,
    pub tail: usize,
    pub head: usize,
    pub kind: EdgeKind,
    pub pipe: PipeParams<T>,
}

impl<T: Scalar> Edge<T> {
    /// Ambient loss conductance `k·l` in W/°C; heat exchangers carry none.
    pub fn loss_conductance(&self) -> T {
        if self.kind.is_pipe() {
            self.pipe.heat_transfer * self.pipe.length
        } else {
            T::zero()
        }
    }
}

/// Validated supply/return network graph. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph<T> {
    nodes: Vec<Node<T>>,
    edges: Vec<Edge<T>>,
    node_index: HashMap<String, usize>,
    edge_index: HashMap<String, usize>,
    incident: Vec<Vec<usize>>,
}

impl<T: Scalar> NetworkGraph<T> {
    pub fn new(nodes: Vec<Node<T>>, edges: Vec<Edge<T>>) -> Result<Self> {
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if node_index.insert(n.id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate node id `{}`", n.id)));
            }
        }
        let mut edge_index = HashMap::with_capacity(edges.len());
        let mut incident = vec![Vec::new(); nodes.len()];
        for (e, edge) in edges.iter().enumerate() {
            if edge_index.insert(edge.id.clone(), e).is_some() {
                return Err(Error::Validation(format!("duplicate edge id `{}`", edge.id)));
            }
            if edge.tail >= nodes.len() || edge.head >= nodes.len() {
                return Err(Error::Validation(format!(
                    "edge `{}` references a node index out of range",
                    edge.id
                )));
            }
            if edge.tail == edge.head {
                return Err(Error::Validation(format!("edge `{}` is a self-loop", edge.id)));
            }
            let (from, to) = (nodes[edge.tail].side, nodes[edge.head].side);
            let expected = match edge.kind {
                EdgeKind::Supply => (Side::Supply, Side::Supply),
                EdgeKind::Return => (Side::Return, Side::Return),
                EdgeKind::Consumer => (Side::Supply, Side::Return),
                EdgeKind::Producer => (Side::Return, Side::Supply),
            };
            if (from, to) != expected {
                return Err(Error::Validation(format!(
                    "{} edge `{}` must go from a {} node to a {} node, but connects `{}` ({from}) to `{}` ({to})",
                    edge.kind,
                    edge.id,
                    expected.0,
                    expected.1,
                    nodes[edge.tail].id,
                    nodes[edge.head].id
                )));
            }
            incident[edge.tail].push(e);
            incident[edge.head].push(e);
        }
        let graph = Self {
            nodes,
            edges,
            node_index,
            edge_index,
            incident,
        };
        graph.check_connected()?;
        Ok(graph)
    }

    fn check_connected(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Validation("network has no nodes".into()));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for &e in &self.incident[n] {
                let edge = &self.edges[e];
                let other = if edge.tail == n { edge.head } else { edge.tail };
                if !seen[other] {
                    seen[other] = true;
                    stack.push(other);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(Error::Validation(format!(
                "network is not connected: node `{}` is unreachable from `{}`",
                self.nodes[i].id, self.nodes[0].id
            ))),
            None => Ok(()),
        }
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_id(&self, i: usize) -> &str {
        &self.nodes[i].id
    }

    pub fn node_by_id(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn edge_by_id(&self, id: &str) -> Option<usize> {
        self.edge_index.get(id).copied()
    }

    /// Edge indices touching node `i`, in file order.
    pub fn incident_edges(&self, i: usize) -> &[usize] {
        &self.incident[i]
    }

    pub fn edges_of_kind(&self, kind: EdgeKind) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.kind == kind)
            .map(|(i, _)| i)
    }

    /// Node–edge incidence matrix: `-1` at the tail, `+1` at the head.
    pub fn incidence(&self) -> CscMatrix<T> {
        let mut b = TripletBuilder::new(self.nodes.len(), self.edges.len());
        for (e, edge) in self.edges.iter().enumerate() {
            b.push(edge.tail, e, -T::one());
            b.push(edge.head, e, T::one());
        }
        b.build()
    }

    /// Splits every supply/return pipe longer than `max_cell_length` into
    /// `⌈l / max_cell_length⌉` equal cells, carrying flows over to the new edges.
    ///
    /// Intermediate nodes are named `<edge>#<k>`; split edges `<edge>#<k>` for
    /// `k = 1..=cells`. Heat exchanger edges are never split.
    pub fn subdivide(&self, flow: &FlowField<T>, max_cell_length: T) -> Result<(Self, FlowField<T>)> {
        if !(max_cell_length > T::zero()) {
            return Err(Error::Input("cell length must be positive".into()));
        }
        let mut nodes = self.nodes.clone();
        let mut edges = Vec::with_capacity(self.edges.len());
        let mut flows = Vec::with_capacity(self.edges.len());
        for (e, edge) in self.edges.iter().enumerate() {
            let ratio = (edge.pipe.length / max_cell_length).as_f64();
            let cells = if edge.kind.is_pipe() {
                // Guard against 300/100 = 3.0000000000000004.
                ((ratio - 1e-9).ceil() as usize).max(1)
            } else {
                1
            };
            if cells == 1 {
                edges.push(edge.clone());
                flows.push(flow.massflow[e]);
                continue;
            }
            let n_cells = T::from_usize_lossy(cells);
            let pipe = PipeParams::new(
                edge.pipe.length / n_cells,
                edge.pipe.diameter,
                edge.pipe.heat_transfer,
            )?;
            let (a, b) = (&self.nodes[edge.tail], &self.nodes[edge.head]);
            let mut prev = edge.tail;
            for k in 1..=cells {
                let next = if k == cells {
                    edge.head
                } else {
                    let frac = T::from_usize_lossy(k) / n_cells;
                    let position = match (a.position, b.position) {
                        (Some((ax, ay)), Some((bx, by))) => {
                            Some((ax + (bx - ax) * frac, ay + (by - ay) * frac))
                        }
                        _ => None,
                    };
                    nodes.push(Node {
                        id: format!("{}#{k}", edge.id),
                        side: a.side,
                        position,
                    });
                    nodes.len() - 1
                };
                edges.push(Edge {
                    id: format!("{}#{k}", edge.id),
                    tail: prev,
                    head: next,
                    kind: edge.kind,
                    pipe,
                });
                flows.push(flow.massflow[e]);
                prev = next;
            }
        }
        let graph = Self::new(nodes, edges)?;
        let flow = FlowField::new(&graph, flows)?;
        Ok((graph, flow))
    }
}

/// Signed mass flow per edge in kg/s; positive means tail → head.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField<T> {
    massflow: Vec<T>,
}

impl<T: Scalar> FlowField<T> {
    /// Validates non-stagnation and nodal mass conservation.
    pub fn new(graph: &NetworkGraph<T>, massflow: Vec<T>) -> Result<Self> {
        if massflow.len() != graph.edge_count() {
            return Err(Error::Flow(format!(
                "expected {} edge flows, got {}",
                graph.edge_count(),
                massflow.len()
            )));
        }
        for (edge, m) in graph.edges().iter().zip(&massflow) {
            if !m.is_finite() || *m == T::zero() {
                return Err(Error::Flow(format!(
                    "edge `{}` has stagnant or non-finite mass flow {m}",
                    edge.id
                )));
            }
        }
        // Balance in f64 so the absolute tolerance means the same for f32 input.
        let mut balance = vec![0.0f64; graph.node_count()];
        for (edge, m) in graph.edges().iter().zip(&massflow) {
            balance[edge.tail] -= m.as_f64();
            balance[edge.head] += m.as_f64();
        }
        // f32 cannot resolve 1e-9 kg/s on kg/s-scale flows; allow a few ulps.
        let largest = massflow.iter().fold(0.0f64, |m, v| m.max(v.as_f64().abs()));
        let tol = MASS_BALANCE_TOL.max(8.0 * T::epsilon().as_f64() * largest);
        for (i, b) in balance.iter().enumerate() {
            if b.abs() > tol {
                return Err(Error::Flow(format!(
                    "mass imbalance of {b:e} kg/s at node `{}`",
                    graph.node_id(i)
                )));
            }
        }
        Ok(Self { massflow })
    }

    pub fn massflow(&self) -> &[T] {
        &self.massflow
    }

    pub fn get(&self, edge: usize) -> T {
        self.massflow[edge]
    }
}

/// Water volume attributed to each node, m³.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVolumes<T> {
    volumes: Vec<T>,
}

impl<T: Scalar> ControlVolumes<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.volumes
    }

    pub fn total(&self) -> T {
        self.volumes.iter().copied().sum()
    }
}

/// Each edge hands half of its volume to either end node.
pub fn control_volumes<T: Scalar>(graph: &NetworkGraph<T>) -> Result<ControlVolumes<T>> {
    let half = T::lit(0.5);
    let mut volumes = vec![T::zero(); graph.node_count()];
    for edge in graph.edges() {
        let v = edge.pipe.volume() * half;
        volumes[edge.tail] = volumes[edge.tail] + v;
        volumes[edge.head] = volumes[edge.head] + v;
    }
    for (i, v) in volumes.iter().enumerate() {
        if !(*v > T::zero()) {
            return Err(Error::Validation(format!(
                "node `{}` has no incident edges and therefore no control volume",
                graph.node_id(i)
            )));
        }
    }
    Ok(ControlVolumes { volumes })
}

fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let found = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect::<Vec<_>>();
    if found != header {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header `{}`, found `{}`", header.join(","), found.join(",")),
        });
    }
    Ok(reader)
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

/// Reads every record of a CSV file with the given header, handing
/// `(line, fields)` to `row`.
pub(crate) fn read_csv_rows(
    path: &Path,
    header: &[&str],
    mut row: impl FnMut(u64, &csv::StringRecord) -> std::result::Result<(), String>,
) -> Result<()> {
    let mut reader = open_csv(path, header)?;
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map(|p| p.line()).unwrap_or(0);
                if record.len() != header.len() {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line,
                        message: format!("expected {} fields, found {}", header.len(), record.len()),
                    });
                }
                row(line, &record).map_err(|message| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message,
                })?;
            }
            Err(e) => return Err(csv_error(path, e)),
        }
    }
    Ok(())
}

pub(crate) fn parse_f64(field: &str, name: &str) -> std::result::Result<f64, String> {
    let v: f64 = field
        .parse()
        .map_err(|_| format!("`{field}` is not a number ({name})"))?;
    if !v.is_finite() {
        return Err(format!("{name} must be finite, got `{field}`"));
    }
    Ok(v)
}

/// Reads and validates a network from its node and edge CSV files.
pub fn parse_network<T: Scalar>(node_file: &Path, edge_file: &Path) -> Result<NetworkGraph<T>> {
    let mut nodes = Vec::new();
    read_csv_rows(node_file, &NODES_HEADER, |_, r| {
        let side = r[1].parse()?;
        let position = match (r[2].is_empty(), r[3].is_empty()) {
            (true, true) => None,
            (false, false) => Some((T::lit(parse_f64(&r[2], "x")?), T::lit(parse_f64(&r[3], "y")?))),
            _ => return Err("x and y must be given together".into()),
        };
        if r[0].is_empty() {
            return Err("empty node id".into());
        }
        nodes.push(Node {
            id: r[0].to_owned(),
            side,
            position,
        });
        Ok(())
    })?;

    let index: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
    let mut edges = Vec::new();
    let mut unknown = None;
    read_csv_rows(edge_file, &EDGES_HEADER, |line, r| {
        let lookup = |id: &str| index.get(id).copied();
        let (Some(tail), Some(head)) = (lookup(&r[1]), lookup(&r[2])) else {
            let missing = if lookup(&r[1]).is_none() { &r[1] } else { &r[2] };
            unknown.get_or_insert_with(|| {
                format!("edge `{}` (line {line}) references unknown node `{missing}`", &r[0])
            });
            return Ok(());
        };
        let kind = r[3].parse()?;
        let pipe = PipeParams::new(
            T::lit(parse_f64(&r[4], "length_m")?),
            T::lit(parse_f64(&r[5], "diameter_m")?),
            T::lit(parse_f64(&r[6], "htc_w_per_m_c")?),
        )
        .map_err(|e| format!("edge `{}`: {e}", &r[0]))?;
        edges.push(Edge {
            id: r[0].to_owned(),
            tail,
            head,
            kind,
            pipe,
        });
        Ok(())
    })?;
    if let Some(msg) = unknown {
        return Err(Error::Validation(msg));
    }
    NetworkGraph::new(nodes, edges)
}

pub(crate) fn write_err(path: &Path, e: impl fmt::Display) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// Writes node and edge files that [`parse_network`] reads back bit-exactly.
pub fn write_network<T: Scalar>(graph: &NetworkGraph<T>, node_file: &Path, edge_file: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(node_file).map_err(|e| write_err(node_file, e))?;
    w.write_record(NODES_HEADER).map_err(|e| write_err(node_file, e))?;
    for n in graph.nodes() {
        let (x, y) = match n.position {
            Some((x, y)) => (x.as_f64().to_string(), y.as_f64().to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([n.id.as_str(), &n.side.to_string(), &x, &y])
            .map_err(|e| write_err(node_file, e))?;
    }
    w.flush().map_err(|e| Error::io(node_file, e))?;

    let mut w = csv::Writer::from_path(edge_file).map_err(|e| write_err(edge_file, e))?;
    w.write_record(EDGES_HEADER).map_err(|e| write_err(edge_file, e))?;
    for e in graph.edges() {
        w.write_record([
            e.id.as_str(),
            graph.node_id(e.tail),
            graph.node_id(e.head),
            &e.kind.to_string(),
            &e.pipe.length.as_f64().to_string(),
            &e.pipe.diameter.as_f64().to_string(),
            &e.pipe.heat_transfer.as_f64().to_string(),
        ])
        .map_err(|err| write_err(edge_file, err))?;
    }
    w.flush().map_err(|e| Error::io(edge_file, e))
}

/// Reads one mass flow per edge and validates it against `graph`.
pub fn load_flow_field<T: Scalar>(flow_file: &Path, graph: &NetworkGraph<T>) -> Result<FlowField<T>> {
    let mut values: Vec<Option<T>> = vec![None; graph.edge_count()];
    let mut problem = None;
    read_csv_rows(flow_file, &FLOWS_HEADER, |line, r| {
        let m = parse_f64(&r[1], "massflow_kg_s")?;
        match graph.edge_by_id(&r[0]) {
            Some(e) if values[e].is_some() => Err(format!("duplicate flow for edge `{}`", &r[0])),
            Some(e) => {
                values[e] = Some(T::lit(m));
                Ok(())
            }
            None => {
                problem.get_or_insert_with(|| format!("line {line}: unknown edge `{}`", &r[0]));
                Ok(())
            }
        }
    })?;
    if let Some(p) = problem {
        return Err(Error::Flow(p));
    }
    let massflow = values
        .into_iter()
        .enumerate()
        .map(|(e, v)| v.ok_or_else(|| Error::Flow(format!("no flow given for edge `{}`", graph.edges()[e].id))))
        .collect::<Result<Vec<_>>>()?;
    FlowField::new(graph, massflow)
}

pub fn write_flow_field<T: Scalar>(graph: &NetworkGraph<T>, flow: &FlowField<T>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| write_err(path, e))?;
    w.write_record(FLOWS_HEADER).map_err(|e| write_err(path, e))?;
    for (edge, m) in graph.edges().iter().zip(flow.massflow()) {
        w.write_record([edge.id.as_str(), &m.as_f64().to_string()])
            .map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
