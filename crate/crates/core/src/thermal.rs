//! Upwinded advection with ambient losses on the network graph, discretized in
//! time by backward Euler.
//!
//! Every node carries one temperature. Three kinds of rows make up the system:
//!
//! * dynamic nodes: `(ρ c_p V_i / Δt) (y_i − y_i⁻) + c_p (Σ_out |ṁ| y_i − Σ_in |ṁ_e| y_up(e)) + S_ii (y_i − y_a) = 0`
//! * plant supply nodes (heads of producer edges): `y_i = u_p`
//! * consumer return nodes (heads of consumer edges): `y_head − y_tail = −y_d`
//!
//! The matrix does not change over time, so it is factorized once and the same
//! factors serve forward steps and adjoint (transposed) steps.

use crate::error::{Error, Result};
use crate::linalg::{CscMatrix, SparseLu, TripletBuilder};
use crate::network::{control_volumes, ControlVolumes, EdgeKind, FlowField, NetworkGraph};
use crate::scalar::Scalar;

/// Relative magnitude below which the diagonal is abandoned as pivot.
const DIAGONAL_PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants<T> {
    /// c_p, J/(kg·°C)
    pub heat_capacity: T,
    /// ρ, kg/m³
    pub density: T,
}

impl<T: Scalar> PhysicalConstants<T> {
    pub fn new(heat_capacity: T, density: T) -> Result<Self> {
        if !(heat_capacity > T::zero()) || !(density > T::zero()) {
            return Err(Error::Input(format!(
                "heat capacity and density must be positive (got {heat_capacity}, {density})"
            )));
        }
        Ok(Self {
            heat_capacity,
            density,
        })
    }
}

impl<T: Scalar> Default for PhysicalConstants<T> {
    fn default() -> Self {
        Self {
            heat_capacity: T::lit(4186.0),
            density: T::lit(1000.0),
        }
    }
}

/// Uniform time grid `t_k = k Δt`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    dt: T,
    steps: usize,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(dt: T, steps: usize) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::Input(format!("time step must be positive, got {dt}")));
        }
        if steps == 0 {
            return Err(Error::Input("time grid needs at least one step".into()));
        }
        Ok(Self { dt, steps })
    }

    /// Grid covering `[0, horizon]`; `dt` must divide the horizon.
    pub fn from_horizon(dt: T, horizon: T) -> Result<Self> {
        let ratio = (horizon / dt).as_f64();
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Input(format!(
                "time step {dt} s does not divide the horizon {horizon} s"
            )));
        }
        Self::new(dt, steps as usize)
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self, k: usize) -> T {
        T::from_usize_lossy(k) * self.dt
    }

    pub fn horizon(&self) -> T {
        self.time(self.steps)
    }

    /// All `steps + 1` grid times.
    pub fn times(&self) -> Vec<T> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }
}

/// Consumer heat extraction expressed as a supply→return temperature drop.
pub fn demand_to_delta<T: Scalar>(power: T, consumer_massflow: T, heat_capacity: T) -> T {
    power / (heat_capacity * consumer_massflow)
}

/// `ρ c_p Σ V_i (y_i − reference)` in joules.
pub fn stored_energy<T: Scalar>(
    state: &[T],
    volumes: &[T],
    constants: &PhysicalConstants<T>,
    reference_temp: T,
) -> T {
    let sum = state
        .iter()
        .zip(volumes)
        .fold(T::zero(), |acc, (y, v)| acc + *v * (*y - reference_temp));
    constants.density * constants.heat_capacity * sum
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRole {
    Dynamic,
    /// Dirichlet node holding the supply temperature of plant `p`.
    Plant(usize),
    /// Return-side end of consumer `c`.
    ConsumerReturn(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantLink<T> {
    pub edge: usize,
    pub edge_id: String,
    pub supply_node: usize,
    pub return_node: usize,
    pub massflow: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsumerLink<T> {
    pub edge: usize,
    pub edge_id: String,
    pub supply_node: usize,
    pub return_node: usize,
    pub massflow: T,
}

/// Boundary structure: which nodes are plant (Dirichlet) nodes and which are
/// consumer return nodes tied to their supply node by a temperature drop.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec<T> {
    pub plants: Vec<PlantLink<T>>,
    pub consumers: Vec<ConsumerLink<T>>,
    pub roles: Vec<NodeRole>,
}

impl<T: Scalar> BoundarySpec<T> {
    /// Derives plants from producer edges and consumers from consumer edges,
    /// both in file order.
    pub fn from_network(graph: &NetworkGraph<T>, flow: &FlowField<T>) -> Result<Self> {
        let mut roles = vec![NodeRole::Dynamic; graph.node_count()];
        let mut inflows = vec![0usize; graph.node_count()];
        for (e, edge) in graph.edges().iter().enumerate() {
            let down = if flow.get(e) > T::zero() { edge.head } else { edge.tail };
            inflows[down] += 1;
        }
        let mut plants = Vec::new();
        for e in graph.edges_of_kind(EdgeKind::Producer) {
            let edge = &graph.edges()[e];
            let m = flow.get(e);
            if !(m > T::zero()) {
                return Err(Error::Flow(format!(
                    "producer edge `{}` must carry flow from return to supply, got {m}",
                    edge.id
                )));
            }
            if roles[edge.head] != NodeRole::Dynamic {
                return Err(Error::Validation(format!(
                    "plant node `{}` is fed by more than one producer edge",
                    graph.node_id(edge.head)
                )));
            }
            if inflows[edge.head] != 1 {
                return Err(Error::Validation(format!(
                    "plant node `{}` may only be fed by its producer edge",
                    graph.node_id(edge.head)
                )));
            }
            roles[edge.head] = NodeRole::Plant(plants.len());
            plants.push(PlantLink {
                edge: e,
                edge_id: edge.id.clone(),
                supply_node: edge.head,
                return_node: edge.tail,
                massflow: m,
            });
        }
        if plants.is_empty() {
            return Err(Error::Validation("network has no producer edge".into()));
        }
        let mut consumers = Vec::new();
        for e in graph.edges_of_kind(EdgeKind::Consumer) {
            let edge = &graph.edges()[e];
            let m = flow.get(e);
            if !(m > T::zero()) {
                return Err(Error::Flow(format!(
                    "consumer edge `{}` must carry flow from supply to return, got {m}",
                    edge.id
                )));
            }
            if roles[edge.head] != NodeRole::Dynamic || inflows[edge.head] != 1 {
                return Err(Error::Validation(format!(
                    "consumer return node `{}` may only be fed by consumer edge `{}`",
                    graph.node_id(edge.head),
                    edge.id
                )));
            }
            roles[edge.head] = NodeRole::ConsumerReturn(consumers.len());
            consumers.push(ConsumerLink {
                edge: e,
                edge_id: edge.id.clone(),
                supply_node: edge.tail,
                return_node: edge.head,
                massflow: m,
            });
        }
        Ok(Self {
            plants,
            consumers,
            roles,
        })
    }
}

/// Prescribed boundary data at one instant.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryValues<'a, T> {
    /// Plant supply temperatures, °C, one per plant.
    pub plant_temps: &'a [T],
    /// Consumer temperature drops y_d, °C, one per consumer.
    pub deltas: &'a [T],
    /// Ambient temperature, °C.
    pub ambient: T,
}

/// Assembled and factorized backward-Euler system.
#[derive(Debug, Clone)]
pub struct ThermalSystem<T> {
    constants: PhysicalConstants<T>,
    dt: T,
    boundary: BoundarySpec<T>,
    volumes: ControlVolumes<T>,
    /// `ρ c_p V_i / Δt` on dynamic rows, zero elsewhere.
    capacity: Vec<T>,
    /// Volume held by each dynamic node, zero on boundary rows.
    storage_volumes: Vec<T>,
    /// `S_ii`: half the `k l` of each incident pipe (plus folded boundary halves),
    /// dynamic rows only.
    loss: Vec<T>,
    matrix: CscMatrix<T>,
    steady_matrix: CscMatrix<T>,
    lu: SparseLu<T>,
    steady_lu: SparseLu<T>,
}

/// Builds `A = (ρ c_p/Δt) V + c_p G + S` with boundary rows replaced, plus the
/// steady matrix without the storage term, and factorizes both.
pub fn assemble<T: Scalar>(
    graph: &NetworkGraph<T>,
    flow: &FlowField<T>,
    volumes: &ControlVolumes<T>,
    constants: &PhysicalConstants<T>,
    dt: T,
    boundary: &BoundarySpec<T>,
) -> Result<ThermalSystem<T>> {
    let n = graph.node_count();
    if !(dt > T::zero()) {
        return Err(Error::Input(format!("time step must be positive, got {dt}")));
    }
    let half = T::lit(0.5);
    let cp = constants.heat_capacity;
    let roles = &boundary.roles;

    // Half of every edge belongs to each end node. Halves that land on a pinned
    // boundary node are folded into the other end when that end is dynamic.
    let dynamic = |i: usize| roles[i] == NodeRole::Dynamic;
    let mut loss = vec![T::zero(); n];
    let mut storage_volumes = vec![T::zero(); n];
    for i in (0..n).filter(|&i| dynamic(i)) {
        storage_volumes[i] = volumes.as_slice()[i];
    }
    let mut outflow = vec![T::zero(); n];
    for (e, edge) in graph.edges().iter().enumerate() {
        let kl = edge.loss_conductance() * half;
        let v = edge.pipe.volume() * half;
        for (end, other) in [(edge.tail, edge.head), (edge.head, edge.tail)] {
            if dynamic(end) {
                loss[end] = loss[end] + kl;
            } else if dynamic(other) {
                loss[other] = loss[other] + kl;
                storage_volumes[other] = storage_volumes[other] + v;
            }
        }
        let m = flow.get(e);
        let up = if m > T::zero() { edge.tail } else { edge.head };
        outflow[up] = outflow[up] + m.abs();
    }
    let capacity: Vec<T> = storage_volumes
        .iter()
        .map(|v| constants.density * cp * *v / dt)
        .collect();

    let mut steady = TripletBuilder::new(n, n);
    let mut transient = TripletBuilder::new(n, n);
    let mut push = |r: usize, c: usize, v: T, storage: T| {
        steady.push(r, c, v);
        transient.push(r, c, v + storage);
    };
    for i in 0..n {
        match roles[i] {
            NodeRole::Dynamic => push(i, i, cp * outflow[i] + loss[i], capacity[i]),
            NodeRole::Plant(_) => push(i, i, T::one(), T::zero()),
            NodeRole::ConsumerReturn(c) => {
                push(i, i, T::one(), T::zero());
                push(i, boundary.consumers[c].supply_node, -T::one(), T::zero());
            }
        }
    }
    for (e, edge) in graph.edges().iter().enumerate() {
        let m = flow.get(e);
        let (up, down) = if m > T::zero() {
            (edge.tail, edge.head)
        } else {
            (edge.head, edge.tail)
        };
        if roles[down] == NodeRole::Dynamic {
            push(down, up, -cp * m.abs(), T::zero());
        }
    }
    let steady_matrix = steady.build();
    let matrix = transient.build();

    let order = flow_order(graph, flow, boundary);
    let tol = T::lit(DIAGONAL_PIVOT_TOL);
    let lu = SparseLu::factorize(&matrix, &order, tol).map_err(|e| {
        Error::Singular(format!("transient system: {e} (inconsistent flow graph?)"))
    })?;
    let steady_lu = SparseLu::factorize(&steady_matrix, &order, tol).map_err(|e| {
        Error::Singular(format!("steady system: {e} (closed flow loop without losses?)"))
    })?;
    Ok(ThermalSystem {
        constants: *constants,
        dt,
        boundary: boundary.clone(),
        volumes: volumes.clone(),
        capacity,
        storage_volumes,
        loss,
        matrix,
        steady_matrix,
        lu,
        steady_lu,
    })
}

/// Upstream-first node order (Kahn). Under it the upwind matrix is lower
/// triangular; nodes on flow cycles, if any, are appended in index order.
fn flow_order<T: Scalar>(graph: &NetworkGraph<T>, flow: &FlowField<T>, boundary: &BoundarySpec<T>) -> Vec<usize> {
    let n = graph.node_count();
    let mut deps: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    let mut add = |from: usize, to: usize, deps: &mut Vec<Vec<usize>>| {
        deps[from].push(to);
        indegree[to] += 1;
    };
    for (e, edge) in graph.edges().iter().enumerate() {
        let (up, down) = if flow.get(e) > T::zero() {
            (edge.tail, edge.head)
        } else {
            (edge.head, edge.tail)
        };
        if boundary.roles[down] == NodeRole::Dynamic {
            add(up, down, &mut deps);
        }
    }
    for c in &boundary.consumers {
        add(c.supply_node, c.return_node, &mut deps);
    }
    let mut order = Vec::with_capacity(n);
    let mut queue: std::collections::VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut placed = vec![false; n];
    while let Some(i) = queue.pop_front() {
        order.push(i);
        placed[i] = true;
        for &j in &deps[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                queue.push_back(j);
            }
        }
    }
    order.extend((0..n).filter(|&i| !placed[i]));
    order
}

impl<T: Scalar> ThermalSystem<T> {
    /// Convenience constructor deriving volumes and boundary structure.
    pub fn build(
        graph: &NetworkGraph<T>,
        flow: &FlowField<T>,
        constants: &PhysicalConstants<T>,
        dt: T,
    ) -> Result<Self> {
        let volumes = control_volumes(graph)?;
        let boundary = BoundarySpec::from_network(graph, flow)?;
        assemble(graph, flow, &volumes, constants, dt, &boundary)
    }

    pub fn node_count(&self) -> usize {
        self.capacity.len()
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn constants(&self) -> &PhysicalConstants<T> {
        &self.constants
    }

    pub fn boundary(&self) -> &BoundarySpec<T> {
        &self.boundary
    }

    pub fn plants(&self) -> &[PlantLink<T>] {
        &self.boundary.plants
    }

    pub fn consumers(&self) -> &[ConsumerLink<T>] {
        &self.boundary.consumers
    }

    pub fn volumes(&self) -> &ControlVolumes<T> {
        &self.volumes
    }

    /// Volume whose heat evolves with each node: the nodal control volume plus
    /// the halves of edges whose other end is a pinned boundary node. Boundary
    /// nodes themselves hold no independent heat.
    pub fn storage_volumes(&self) -> &[T] {
        &self.storage_volumes
    }

    pub fn capacity(&self) -> &[T] {
        &self.capacity
    }

    pub fn loss_diagonal(&self) -> &[T] {
        &self.loss
    }

    pub fn matrix(&self) -> &CscMatrix<T> {
        &self.matrix
    }

    pub fn steady_matrix(&self) -> &CscMatrix<T> {
        &self.steady_matrix
    }

    /// Fill of the transient factors relative to the matrix itself.
    pub fn fill_ratio(&self) -> f64 {
        self.lu.factor_nnz() as f64 / (self.matrix.nnz() + self.node_count()) as f64
    }

    /// Right-hand side without the storage term.
    fn boundary_rhs(&self, bc: &BoundaryValues<'_, T>, out: &mut [T]) {
        assert_eq!(bc.plant_temps.len(), self.boundary.plants.len(), "one temperature per plant");
        assert_eq!(bc.deltas.len(), self.boundary.consumers.len(), "one delta per consumer");
        for (i, role) in self.boundary.roles.iter().enumerate() {
            out[i] = match *role {
                NodeRole::Dynamic => self.loss[i] * bc.ambient,
                NodeRole::Plant(p) => bc.plant_temps[p],
                NodeRole::ConsumerReturn(c) => -bc.deltas[c],
            };
        }
    }

    /// Steady state (no storage term) for the given boundary data.
    pub fn solve_steady(&self, bc: &BoundaryValues<'_, T>) -> Vec<T> {
        let mut y = vec![T::zero(); self.node_count()];
        self.boundary_rhs(bc, &mut y);
        self.steady_lu.solve_in_place(&mut y, &mut Vec::new());
        y
    }

    /// Steady state by dense Gaussian elimination, independent of the sparse factors.
    pub fn solve_steady_dense(&self, bc: &BoundaryValues<'_, T>) -> Result<Vec<T>> {
        let mut rhs = vec![T::zero(); self.node_count()];
        self.boundary_rhs(bc, &mut rhs);
        self.steady_matrix.to_dense().solve(&rhs)
    }

    /// One backward-Euler step from `y_prev`.
    pub fn step(&self, y_prev: &[T], bc: &BoundaryValues<'_, T>) -> Vec<T> {
        let mut y = vec![T::zero(); self.node_count()];
        self.step_into(y_prev, bc, &mut y, &mut Vec::new());
        y
    }

    pub fn step_into(&self, y_prev: &[T], bc: &BoundaryValues<'_, T>, out: &mut [T], work: &mut Vec<T>) {
        self.boundary_rhs(bc, out);
        for (i, c) in self.capacity.iter().enumerate() {
            out[i] = out[i] + *c * y_prev[i];
        }
        self.lu.solve_in_place(out, work);
    }

    /// Solves `Aᵀ x = b` in place with the transient factors.
    pub fn solve_transposed_in_place(&self, b: &mut [T], work: &mut Vec<T>) {
        self.lu.solve_transposed_in_place(b, work);
    }

    /// Solves `A_ssᵀ x = b` in place with the steady factors.
    pub fn solve_steady_transposed_in_place(&self, b: &mut [T], work: &mut Vec<T>) {
        self.steady_lu.solve_transposed_in_place(b, work);
    }
}

/// Plant supply temperatures per step: the control `u`.
///
/// Column `k` (0-based) is the temperature imposed while computing state `k+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTrajectory<T> {
    plants: usize,
    steps: usize,
    values: Vec<T>,
}

impl<T: Scalar> ControlTrajectory<T> {
    pub fn constant(plants: usize, steps: usize, value: T) -> Self {
        Self {
            plants,
            steps,
            values: vec![value; plants * steps],
        }
    }

    /// `values[k * plants + p]`
    pub fn from_values(plants: usize, steps: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != plants * steps || plants == 0 || steps == 0 {
            return Err(Error::Input(format!(
                "control needs {plants}x{steps} values, got {}",
                values.len()
            )));
        }
        Ok(Self {
            plants,
            steps,
            values,
        })
    }

    pub fn plants(&self) -> usize {
        self.plants
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn at(&self, k: usize) -> &[T] {
        &self.values[k * self.plants..(k + 1) * self.plants]
    }

    pub fn get(&self, k: usize, plant: usize) -> T {
        self.values[k * self.plants + plant]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

/// Node temperatures for `k = 0..=steps`, stored state by state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory<T> {
    nodes: usize,
    steps: usize,
    values: Vec<T>,
}

impl<T: Scalar> StateTrajectory<T> {
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn state(&self, k: usize) -> &[T] {
        &self.values[k * self.nodes..(k + 1) * self.nodes]
    }

    pub fn temperature(&self, k: usize, node: usize) -> T {
        self.values[k * self.nodes + node]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Time-varying data other than the control, sampled at all `steps + 1` grid times.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing<T> {
    steps: usize,
    consumers: usize,
    ambient: Vec<T>,
    deltas: Vec<T>,
}

impl<T: Scalar> Forcing<T> {
    /// `deltas[k * consumers + c]` is the drop of consumer `c` at time `t_k`.
    pub fn new(steps: usize, consumers: usize, ambient: Vec<T>, deltas: Vec<T>) -> Result<Self> {
        if ambient.len() != steps + 1 {
            return Err(Error::Input(format!(
                "ambient series needs {} samples, got {}",
                steps + 1,
                ambient.len()
            )));
        }
        if deltas.len() != (steps + 1) * consumers {
            return Err(Error::Input(format!(
                "delta series needs {} values, got {}",
                (steps + 1) * consumers,
                deltas.len()
            )));
        }
        if let Some(d) = deltas.iter().find(|d| !(**d >= T::zero()) || !d.is_finite()) {
            return Err(Error::Input(format!("consumer temperature drops must be >= 0, got {d}")));
        }
        Ok(Self {
            steps,
            consumers,
            ambient,
            deltas,
        })
    }

    pub fn constant(steps: usize, ambient: T, deltas: &[T]) -> Result<Self> {
        let all = (0..=steps).flat_map(|_| deltas.iter().copied()).collect();
        Self::new(steps, deltas.len(), vec![ambient; steps + 1], all)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn ambient(&self, k: usize) -> T {
        self.ambient[k]
    }

    pub fn deltas(&self, k: usize) -> &[T] {
        &self.deltas[k * self.consumers..(k + 1) * self.consumers]
    }

    pub fn boundary<'a>(&'a self, k: usize, plant_temps: &'a [T]) -> BoundaryValues<'a, T> {
        BoundaryValues {
            plant_temps,
            deltas: self.deltas(k),
            ambient: self.ambient[k],
        }
    }
}

/// How the state at `t = 0` is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState<T> {
    /// Steady state under the first control column; depends on `u`.
    SteadyFromControl,
    /// Fixed state, independent of `u`.
    Fixed(Vec<T>),
}

/// The solution operator: control trajectory → state trajectory.
pub fn simulate<T: Scalar>(
    system: &ThermalSystem<T>,
    forcing: &Forcing<T>,
    control: &ControlTrajectory<T>,
    initial: &InitialState<T>,
) -> Result<StateTrajectory<T>> {
    let n = system.node_count();
    let steps = forcing.steps();
    if control.steps() != steps || control.plants() != system.plants().len() {
        return Err(Error::Input(format!(
            "control is {}x{}, scenario needs {}x{}",
            control.plants(),
            control.steps(),
            system.plants().len(),
            steps
        )));
    }
    let mut values = vec![T::zero(); n * (steps + 1)];
    match initial {
        InitialState::SteadyFromControl => {
            let y0 = system.solve_steady(&forcing.boundary(0, control.at(0)));
            values[..n].copy_from_slice(&y0);
        }
        InitialState::Fixed(y0) => {
            if y0.len() != n {
                return Err(Error::Input(format!(
                    "initial state has {} nodes, network has {n}",
                    y0.len()
                )));
            }
            values[..n].copy_from_slice(y0);
        }
    }
    let mut work = Vec::with_capacity(n);
    for k in 1..=steps {
        let (done, rest) = values.split_at_mut(k * n);
        let prev = &done[(k - 1) * n..];
        system.step_into(prev, &forcing.boundary(k, control.at(k - 1)), &mut rest[..n], &mut work);
    }
    let traj = StateTrajectory {
        nodes: n,
        steps,
        values,
    };
    if !traj.is_finite() {
        return Err(Error::Numerical("state trajectory contains non-finite values".into()));
    }
    Ok(traj)
}

/// Per-step energy bookkeeping, every term computed from node temperatures
/// alone (not from the solver).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance<T> {
    /// Σ_plants c_p ṁ_p (y_supply − y_return), W
    pub plant_injection: T,
    /// Σ_consumers c_p ṁ_c y_d, W
    pub consumer_extraction: T,
    /// Σ_nodes S_ii (y_i − y_a), W
    pub ambient_loss: T,
    /// (E_k − E_{k−1}) / Δt, W
    pub storage_rate: T,
    /// Worst-case floating-point error of the four terms, W: the summation
    /// bound n·ε times the magnitudes of everything added or subtracted.
    pub rounding: T,
}

impl<T: Scalar> EnergyBalance<T> {
    pub fn residual(&self) -> T {
        self.plant_injection - self.consumer_extraction - self.ambient_loss - self.storage_rate
    }

    /// Part of the residual beyond [`rounding`](Self::rounding), relative to
    /// the plant injection. Infinite if that part is nonzero with no injection.
    pub fn relative_residual(&self) -> T {
        let excess = (self.residual().abs() - self.rounding).max(T::zero());
        if excess == T::zero() {
            T::zero()
        } else {
            excess / self.plant_injection.abs()
        }
    }
}

/// Instantaneous plant injection power in W.
pub fn plant_power<T: Scalar>(system: &ThermalSystem<T>, state: &[T], plant: usize) -> T {
    let p = &system.plants()[plant];
    system.constants().heat_capacity * p.massflow * (state[p.supply_node] - state[p.return_node])
}

/// Energy balance of steps `1..=steps`.
pub fn energy_balance<T: Scalar>(
    system: &ThermalSystem<T>,
    forcing: &Forcing<T>,
    traj: &StateTrajectory<T>,
) -> Vec<EnergyBalance<T>> {
    let cp = system.constants().heat_capacity;
    let dt = system.dt();
    let energy = |k: usize| stored_energy(traj.state(k), system.storage_volumes(), system.constants(), T::zero());
    let rho_cp = system.constants().density * cp;
    let content = |k: usize| {
        traj.state(k)
            .iter()
            .zip(system.storage_volumes())
            .map(|(y, v)| rho_cp * *v * y.abs())
            .sum::<T>()
    };
    let terms = T::from_usize_lossy(system.node_count() + system.plants().len() + system.consumers().len());
    (1..=traj.steps())
        .map(|k| {
            let y = traj.state(k);
            let plant_injection = (0..system.plants().len()).map(|p| plant_power(system, y, p)).sum();
            let consumer_extraction = system
                .consumers()
                .iter()
                .zip(forcing.deltas(k))
                .map(|(c, d)| cp * c.massflow * *d)
                .sum();
            let ya = forcing.ambient(k);
            let ambient_loss = system
                .loss_diagonal()
                .iter()
                .zip(y)
                .map(|(s, yi)| *s * (*yi - ya))
                .sum();
            let magnitude = system
                .plants()
                .iter()
                .map(|p| cp * p.massflow * (y[p.supply_node].abs() + y[p.return_node].abs()))
                .sum::<T>()
                + consumer_extraction
                + system
                    .loss_diagonal()
                    .iter()
                    .zip(y)
                    .map(|(s, yi)| *s * (yi.abs() + ya.abs()))
                    .sum::<T>()
                + (content(k) + content(k - 1)) / dt;
            EnergyBalance {
                plant_injection,
                consumer_extraction,
                ambient_loss,
                storage_rate: (energy(k) - energy(k - 1)) / dt,
                rounding: terms * T::epsilon() * magnitude,
            }
        })
        .collect()
}
