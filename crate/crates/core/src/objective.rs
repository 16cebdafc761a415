//! Operating cost, smoothness regularizer, constraint penalties and control bounds.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::thermal::{
    simulate, BoundaryValues, ControlTrajectory, Forcing, InitialState, StateTrajectory, ThermalSystem,
};

/// Joules per MWh.
pub const JOULES_PER_MWH: f64 = 3.6e9;

/// Price weighting of the injected heat.
#[derive(Debug, Clone, PartialEq)]
pub enum PriceModel<T> {
    /// p ≡ 1, the loss is plain energy in J.
    Static,
    /// `prices[k]` in €/MWh at grid time `t_k`; the loss is in €.
    Dynamic { prices: Vec<T>, alpha: T, beta: T },
}

impl<T: Scalar> PriceModel<T> {
    pub fn dynamic(prices: Vec<T>, alpha: T, beta: T) -> Result<Self> {
        if !(alpha > T::zero()) {
            return Err(Error::Input(format!("alpha must be positive, got {alpha}")));
        }
        if !(beta >= T::zero()) {
            return Err(Error::Input(format!("beta must be non-negative, got {beta}")));
        }
        if prices.iter().any(|p| !p.is_finite()) {
            return Err(Error::Input("price series contains non-finite values".into()));
        }
        Ok(PriceModel::Dynamic { prices, alpha, beta })
    }

    pub fn is_static(&self) -> bool {
        matches!(self, PriceModel::Static)
    }

    /// Price of one joule at weight 1: 1 for the static model, 1/3.6e9 (€/MWh → €/J) otherwise.
    pub fn unit(&self) -> T {
        match self {
            PriceModel::Static => T::one(),
            PriceModel::Dynamic { .. } => T::lit(1.0 / JOULES_PER_MWH),
        }
    }

    fn check_len(&self, steps: usize) -> Result<()> {
        match self {
            PriceModel::Dynamic { prices, .. } if prices.len() != steps + 1 => Err(Error::Input(format!(
                "price series needs {} samples, got {}",
                steps + 1,
                prices.len()
            ))),
            _ => Ok(()),
        }
    }
}

/// `p̃(t_k)·α` when the plant heats the water, `p̃(t_k)·β` when it cools it.
pub fn price_weight<T: Scalar>(k: usize, y_supply: T, y_return: T, model: &PriceModel<T>) -> T {
    match model {
        PriceModel::Static => T::one(),
        PriceModel::Dynamic { prices, alpha, beta } => {
            if y_supply >= y_return {
                prices[k] * *alpha
            } else {
                prices[k] * *beta
            }
        }
    }
}

/// Temperature limits, °C.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSet<T> {
    pub consumer_supply_min: T,
    pub consumer_return_min: T,
    pub plant_max: T,
    pub plant_min: T,
}

impl<T: Scalar> Default for ConstraintSet<T> {
    fn default() -> Self {
        Self {
            consumer_supply_min: T::lit(80.0),
            consumer_return_min: T::lit(30.0),
            plant_max: T::lit(140.0),
            plant_min: T::lit(30.0),
        }
    }
}

impl<T: Scalar> ConstraintSet<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.plant_max > self.consumer_supply_min
            && self.consumer_supply_min > self.consumer_return_min
            && self.plant_min <= self.plant_max;
        if ok {
            Ok(())
        } else {
            Err(Error::Input(format!(
                "constraint set must satisfy plant_max > consumer_supply_min > consumer_return_min \
                 and plant_min <= plant_max, got {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveConfig<T> {
    /// Weight of the smoothness term; `None` picks [`DEFAULT_TIKHONOV_FACTOR`]`·Δt²`.
    pub tikhonov_weight: Option<T>,
    pub penalty_weight: T,
    /// Multiplies the loss inside the total objective; `None` normalizes it so
    /// that one plant-°C held for one step at the reference price counts 1.
    pub loss_scale: Option<T>,
    pub price: PriceModel<T>,
    pub constraints: ConstraintSet<T>,
}

impl<T: Scalar> ObjectiveConfig<T> {
    pub fn new(price: PriceModel<T>) -> Self {
        Self {
            tikhonov_weight: None,
            penalty_weight: T::lit(10.0),
            loss_scale: None,
            price,
            constraints: ConstraintSet::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tikhonov_weight.is_some_and(|w| !(w >= T::zero())) || !(self.penalty_weight >= T::zero()) {
            return Err(Error::Input("objective weights must be non-negative".into()));
        }
        if self.loss_scale.is_some_and(|s| !(s > T::zero())) {
            return Err(Error::Input("loss scale must be positive".into()));
        }
        self.constraints.validate()
    }
}

/// A control jump of `J` °C between two steps costs `DEFAULT_TIKHONOV_FACTOR·J²`
/// in normalized loss units.
pub const DEFAULT_TIKHONOV_FACTOR: f64 = 0.05;

/// Reciprocal of the loss of every plant running 1 °C above its return for
/// one step at the mean price.
pub fn normalized_loss_scale<T: Scalar>(system: &ThermalSystem<T>, price: &PriceModel<T>) -> T {
    let cp = system.constants().heat_capacity;
    let flow: T = system.plants().iter().map(|p| p.massflow).sum();
    let reference = match price {
        PriceModel::Static => T::one(),
        PriceModel::Dynamic { prices, alpha, .. } => {
            let mean = prices.iter().copied().sum::<T>() / T::from_usize_lossy(prices.len().max(1));
            (mean.abs() * *alpha).max(T::lit(1e-12))
        }
    };
    T::one() / (cp * flow * system.dt() * reference * price.unit())
}

/// Price-weighted plant heat over steps `1..=N`, rectangle rule: J for the
/// static model, € for the dynamic one.
pub fn loss_energy<T: Scalar>(system: &ThermalSystem<T>, traj: &StateTrajectory<T>, price: &PriceModel<T>) -> T {
    step_losses(system, traj, price).into_iter().sum()
}

/// Contribution of each step `1..=N` to [`loss_energy`].
pub fn step_losses<T: Scalar>(system: &ThermalSystem<T>, traj: &StateTrajectory<T>, price: &PriceModel<T>) -> Vec<T> {
    let cp = system.constants().heat_capacity;
    let dt = system.dt();
    (1..=traj.steps())
        .map(|k| {
            let y = traj.state(k);
            let step: T = system
                .plants()
                .iter()
                .map(|p| {
                    let (ys, yr) = (y[p.supply_node], y[p.return_node]);
                    dt * cp * p.massflow * (ys - yr) * price_weight(k, ys, yr, price)
                })
                .sum();
            step * price.unit()
        })
        .collect()
}

/// `Σ_k Σ_p ((u_k − u_{k−1}) / Δt)²`.
pub fn tikhonov<T: Scalar>(u: &ControlTrajectory<T>, dt: T) -> T {
    let mut r = T::zero();
    for k in 1..u.steps() {
        for (a, b) in u.at(k).iter().zip(u.at(k - 1)) {
            let d = (*a - *b) / dt;
            r = r + d * d;
        }
    }
    r
}

/// Adds `weight · ∂R/∂u` to `grad`.
pub fn tikhonov_gradient<T: Scalar>(u: &ControlTrajectory<T>, dt: T, weight: T, grad: &mut [T]) {
    let plants = u.plants();
    let scale = T::lit(2.0) * weight / (dt * dt);
    for k in 1..u.steps() {
        for p in 0..plants {
            let d = scale * (u.get(k, p) - u.get(k - 1, p));
            grad[k * plants + p] = grad[k * plants + p] + d;
            grad[(k - 1) * plants + p] = grad[(k - 1) * plants + p] - d;
        }
    }
}

/// `c = bound − y` for every consumer supply and return temperature at steps
/// `1..=N`, ordered step, consumer, (supply, return). Positive means violated.
pub fn constraint_violations<T: Scalar>(
    system: &ThermalSystem<T>,
    traj: &StateTrajectory<T>,
    constraints: &ConstraintSet<T>,
) -> Vec<T> {
    let mut out = Vec::with_capacity(traj.steps() * system.consumers().len() * 2);
    for k in 1..=traj.steps() {
        let y = traj.state(k);
        for c in system.consumers() {
            out.push(constraints.consumer_supply_min - y[c.supply_node]);
            out.push(constraints.consumer_return_min - y[c.return_node]);
        }
    }
    out
}

/// `(λ/2) Σ max(0, c)²`.
pub fn penalty<T: Scalar>(c: &[T], weight: T) -> T {
    let s: T = c.iter().map(|v| v.max(T::zero()).powi(2)).sum();
    weight * T::lit(0.5) * s
}

/// Largest positive violation, 0 when feasible.
pub fn max_violation<T: Scalar>(c: &[T]) -> T {
    c.iter().fold(T::zero(), |m, v| m.max(*v))
}

/// Clamps every control value into `[plant_min, plant_max]`.
pub fn project_control<T: Scalar>(u: &mut ControlTrajectory<T>, constraints: &ConstraintSet<T>) {
    for v in u.as_mut_slice() {
        *v = v.max(constraints.plant_min).min(constraints.plant_max);
    }
}

/// Everything needed to evaluate the objective of a control trajectory.
#[derive(Debug, Clone)]
pub struct Problem<T> {
    pub system: ThermalSystem<T>,
    pub forcing: Forcing<T>,
    pub initial: InitialState<T>,
    pub config: ObjectiveConfig<T>,
}

/// Parts of one objective evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    /// Unscaled loss (J or €).
    pub loss: T,
    pub tikhonov: T,
    pub penalty: T,
    pub total: T,
    pub max_violation: T,
    pub trajectory: StateTrajectory<T>,
}

impl<T: Scalar> Problem<T> {
    pub fn new(
        system: ThermalSystem<T>,
        forcing: Forcing<T>,
        initial: InitialState<T>,
        config: ObjectiveConfig<T>,
    ) -> Result<Self> {
        config.validate()?;
        config.price.check_len(forcing.steps())?;
        if let InitialState::Fixed(y0) = &initial {
            if y0.len() != system.node_count() {
                return Err(Error::Input(format!(
                    "initial state has {} nodes, network has {}",
                    y0.len(),
                    system.node_count()
                )));
            }
        }
        Ok(Self {
            system,
            forcing,
            initial,
            config,
        })
    }

    pub fn steps(&self) -> usize {
        self.forcing.steps()
    }

    /// Loss multiplier in effect.
    pub fn loss_scale(&self) -> T {
        self.config
            .loss_scale
            .unwrap_or_else(|| normalized_loss_scale(&self.system, &self.config.price))
    }

    /// Smoothness weight in effect.
    pub fn tikhonov_weight(&self) -> T {
        let dt = self.system.dt();
        self.config
            .tikhonov_weight
            .unwrap_or_else(|| T::lit(DEFAULT_TIKHONOV_FACTOR) * dt * dt)
    }

    pub fn plants(&self) -> usize {
        self.system.plants().len()
    }

    pub fn simulate(&self, u: &ControlTrajectory<T>) -> Result<StateTrajectory<T>> {
        simulate(&self.system, &self.forcing, u, &self.initial)
    }

    /// Evaluates the total objective; the simulation runs once and is returned.
    pub fn evaluate(&self, u: &ControlTrajectory<T>) -> Result<Evaluation<T>> {
        let trajectory = self.simulate(u)?;
        Ok(self.evaluate_trajectory(u, trajectory))
    }

    pub fn evaluate_trajectory(&self, u: &ControlTrajectory<T>, trajectory: StateTrajectory<T>) -> Evaluation<T> {
        let cfg = &self.config;
        let loss = loss_energy(&self.system, &trajectory, &cfg.price);
        let reg = tikhonov(u, self.system.dt());
        let c = constraint_violations(&self.system, &trajectory, &cfg.constraints);
        let pen = penalty(&c, cfg.penalty_weight);
        Evaluation {
            loss,
            tikhonov: reg,
            penalty: pen,
            total: self.loss_scale() * loss + self.tikhonov_weight() * reg + pen,
            max_violation: max_violation(&c),
            trajectory,
        }
    }

    pub fn total_objective(&self, u: &ControlTrajectory<T>) -> Result<T> {
        Ok(self.evaluate(u)?.total)
    }
}

/// Lowest uniform plant temperature whose steady state under the forcing at
/// grid time `k` meets every consumer bound, clamped to the plant range.
///
/// The steady state is affine in a uniform plant temperature, so two solves
/// give it exactly.
pub fn min_feasible_plant_temperature<T: Scalar>(
    system: &ThermalSystem<T>,
    forcing: &Forcing<T>,
    k: usize,
    constraints: &ConstraintSet<T>,
) -> T {
    let plants = system.plants().len();
    let steady = |temp: T| {
        let temps = vec![temp; plants];
        system.solve_steady(&BoundaryValues {
            plant_temps: &temps,
            deltas: forcing.deltas(k),
            ambient: forcing.ambient(k),
        })
    };
    let y0 = steady(T::zero());
    let y1 = steady(T::one());
    let mut need = constraints.plant_min;
    for c in system.consumers() {
        for (node, bound) in [
            (c.supply_node, constraints.consumer_supply_min),
            (c.return_node, constraints.consumer_return_min),
        ] {
            let slope = y1[node] - y0[node];
            if slope > T::zero() {
                need = need.max((bound - y0[node]) / slope);
            }
        }
    }
    need.min(constraints.plant_max)
}
