use dhn_core::objective::{constraint_violations, max_violation, step_losses, Problem, JOULES_PER_MWH};
use dhn_core::thermal::{
    energy_balance, plant_power, stored_energy, ControlTrajectory, EnergyBalance, StateTrajectory, ThermalSystem,
};
use serde::Serialize;

/// Consumer supply-temperature quantile levels written per step.
pub const QUANTILE_LEVELS: [f64; 5] = [0.01, 0.10, 0.50, 0.90, 0.99];

/// Tolerated per-step energy-balance residual relative to plant injection.
pub const BALANCE_TOLERANCE: f64 = 1e-6;

/// Empirical quantile of sorted data, linear between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-step distribution of consumer supply temperatures.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileBands {
    pub levels: Vec<f64>,
    pub min: Vec<f64>,
    pub median: Vec<f64>,
    /// `bands[k][i]` is level `i` at step `k + 1`.
    pub bands: Vec<Vec<f64>>,
}

pub fn compute_quantiles(system: &ThermalSystem<f64>, traj: &StateTrajectory<f64>, levels: &[f64]) -> QuantileBands {
    let consumers = system.consumers();
    assert!(!consumers.is_empty(), "quantiles need at least one consumer");
    let mut out = QuantileBands {
        levels: levels.to_vec(),
        min: Vec::with_capacity(traj.steps()),
        median: Vec::with_capacity(traj.steps()),
        bands: Vec::with_capacity(traj.steps()),
    };
    let mut temps = Vec::with_capacity(consumers.len());
    for k in 1..=traj.steps() {
        let y = traj.state(k);
        temps.clear();
        temps.extend(consumers.iter().map(|c| y[c.supply_node]));
        temps.sort_by(f64::total_cmp);
        out.min.push(temps[0]);
        out.median.push(quantile(&temps, 0.5));
        out.bands.push(levels.iter().map(|q| quantile(&temps, *q)).collect());
    }
    out
}

/// Unit of the loss figures in reports: MWh for the static model, € for the dynamic one.
pub fn loss_unit(problem: &Problem<f64>) -> (&'static str, f64) {
    if problem.config.price.is_static() {
        ("MWh", 1.0 / JOULES_PER_MWH)
    } else {
        ("EUR", 1.0)
    }
}

/// Everything written per simulated trajectory, indexed by step `1..=N`.
#[derive(Debug, Clone)]
pub struct RunSeries {
    pub times: Vec<f64>,
    pub control: ControlTrajectory<f64>,
    pub min_supply: Vec<f64>,
    pub min_return: Vec<f64>,
    pub plant_power: Vec<f64>,
    /// Loss contribution of each step in report units.
    pub step_loss: Vec<f64>,
    pub stored_ambient: Vec<f64>,
    pub stored_initial: Vec<f64>,
    pub balance: Vec<EnergyBalance<f64>>,
    pub quantiles: QuantileBands,
    pub initial_energy: f64,
    pub loss: f64,
    pub max_violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub loss: f64,
    pub max_violation_c: f64,
    pub max_balance_residual: f64,
    pub stored_energy_initial_j: f64,
    pub stored_energy_final_j: f64,
    pub stored_energy_change: f64,
    pub min_consumer_supply_c: f64,
    pub min_consumer_return_c: f64,
}

impl RunSeries {
    pub fn new(problem: &Problem<f64>, control: &ControlTrajectory<f64>, traj: &StateTrajectory<f64>) -> Self {
        let system = &problem.system;
        let steps = traj.steps();
        let (_, unit) = loss_unit(problem);
        let ambient = problem.forcing.ambient(0);
        let energy = |k: usize| stored_energy(traj.state(k), system.storage_volumes(), system.constants(), ambient);
        let initial_energy = energy(0);
        let stored_ambient: Vec<f64> = (1..=steps).map(energy).collect();
        let min_of = |k: usize, supply: bool| {
            let y = traj.state(k);
            system
                .consumers()
                .iter()
                .map(|c| y[if supply { c.supply_node } else { c.return_node }])
                .fold(f64::INFINITY, f64::min)
        };
        let step_loss: Vec<f64> = step_losses(system, traj, &problem.config.price)
            .into_iter()
            .map(|v| v * unit)
            .collect();
        RunSeries {
            times: (1..=steps).map(|k| k as f64 * system.dt()).collect(),
            control: control.clone(),
            min_supply: (1..=steps).map(|k| min_of(k, true)).collect(),
            min_return: (1..=steps).map(|k| min_of(k, false)).collect(),
            plant_power: (1..=steps)
                .map(|k| (0..system.plants().len()).map(|p| plant_power(system, traj.state(k), p)).sum())
                .collect(),
            loss: step_loss.iter().sum(),
            step_loss,
            stored_initial: stored_ambient.iter().map(|e| e - initial_energy).collect(),
            stored_ambient,
            balance: energy_balance(system, &problem.forcing, traj),
            quantiles: compute_quantiles(system, traj, &QUANTILE_LEVELS),
            initial_energy,
            max_violation: max_violation(&constraint_violations(system, traj, &problem.config.constraints)),
        }
    }

    pub fn max_balance_residual(&self) -> f64 {
        self.balance.iter().map(|b| b.relative_residual()).fold(0.0, f64::max)
    }

    pub fn summary(&self) -> RunSummary {
        let last = self.stored_ambient.last().copied().unwrap_or(self.initial_energy);
        RunSummary {
            loss: self.loss,
            max_violation_c: self.max_violation,
            max_balance_residual: self.max_balance_residual(),
            stored_energy_initial_j: self.initial_energy,
            stored_energy_final_j: last,
            stored_energy_change: (last - self.initial_energy) / self.initial_energy,
            min_consumer_supply_c: self.min_supply.iter().copied().fold(f64::INFINITY, f64::min),
            min_consumer_return_c: self.min_return.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

/// Pearson correlation; 0 when either series is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}
