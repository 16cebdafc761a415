//! Exact discrete-adjoint gradients and projected L-BFGS with penalty continuation.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::objective::{project_control, tikhonov_gradient, Evaluation, Problem};
use crate::scalar::{dot, Scalar};
use crate::thermal::{ControlTrajectory, InitialState};

/// Objective value and gradient of `problem` at `u` by a backward adjoint sweep
/// through the same factorization used forward.
pub fn gradient<T: Scalar>(problem: &Problem<T>, u: &ControlTrajectory<T>) -> Result<(Evaluation<T>, Vec<T>)> {
    let eval = problem.evaluate(u)?;
    let grad = adjoint(problem, u, &eval)?;
    Ok((eval, grad))
}

fn adjoint<T: Scalar>(problem: &Problem<T>, u: &ControlTrajectory<T>, eval: &Evaluation<T>) -> Result<Vec<T>> {
    let system = &problem.system;
    let cfg = &problem.config;
    let traj = &eval.trajectory;
    let n = system.node_count();
    let steps = problem.steps();
    let plants = system.plants();
    let cap = system.capacity();
    let cp = system.constants().heat_capacity;
    let loss_factor = problem.loss_scale() * cfg.price.unit() * system.dt() * cp;
    let lambda = cfg.penalty_weight;
    let cs = &cfg.constraints;

    let mut grad = vec![T::zero(); steps * plants.len()];
    let mut adj = vec![T::zero(); n];
    let mut work = Vec::with_capacity(n);
    for k in (1..=steps).rev() {
        // rhs = ∂F/∂y_k + cap ⊙ λ_{k+1}
        for (a, c) in adj.iter_mut().zip(cap) {
            *a = *a * *c;
        }
        let y = traj.state(k);
        for p in plants {
            let (ys, yr) = (y[p.supply_node], y[p.return_node]);
            let w = crate::objective::price_weight(k, ys, yr, &cfg.price);
            let d = loss_factor * p.massflow * w;
            adj[p.supply_node] = adj[p.supply_node] + d;
            adj[p.return_node] = adj[p.return_node] - d;
        }
        for c in system.consumers() {
            for (node, bound) in [(c.supply_node, cs.consumer_supply_min), (c.return_node, cs.consumer_return_min)] {
                let v = bound - y[node];
                if v > T::zero() {
                    adj[node] = adj[node] - lambda * v;
                }
            }
        }
        system.solve_transposed_in_place(&mut adj, &mut work);
        for (i, p) in plants.iter().enumerate() {
            grad[(k - 1) * plants.len() + i] = adj[p.supply_node];
        }
    }
    if problem.initial == InitialState::SteadyFromControl && steps > 0 {
        for (a, c) in adj.iter_mut().zip(cap) {
            *a = *a * *c;
        }
        system.solve_steady_transposed_in_place(&mut adj, &mut work);
        for (i, p) in plants.iter().enumerate() {
            grad[i] = grad[i] + adj[p.supply_node];
        }
    }
    tikhonov_gradient(u, system.dt(), problem.tikhonov_weight(), &mut grad);
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical("adjoint gradient is not finite".into()));
    }
    Ok(grad)
}

/// Central finite difference of the total objective along coordinate `index`.
pub fn finite_difference<T: Scalar>(problem: &Problem<T>, u: &ControlTrajectory<T>, index: usize, h: T) -> Result<T> {
    let mut up = u.clone();
    up.as_mut_slice()[index] = up.as_slice()[index] + h;
    let mut down = u.clone();
    down.as_mut_slice()[index] = down.as_slice()[index] - h;
    let fu = problem.total_objective(&up)?;
    let fd = problem.total_objective(&down)?;
    Ok((fu - fd) / (h + h))
}

/// `|a − b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_error<T: Scalar>(a: T, b: T) -> T {
    let scale = a.abs().max(b.abs());
    if scale > T::zero() {
        (a - b).abs() / scale
    } else {
        T::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop once `‖projected gradient‖∞ ≤ tolerance · (1 + |f|)`.
    pub gradient_tolerance: f64,
    pub initial_penalty: f64,
    pub continuation_factor: f64,
    /// Continuation ends after the first round whose weight exceeds this.
    pub penalty_stop: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 200,
            gradient_tolerance: 1e-6,
            initial_penalty: 10.0,
            continuation_factor: 10.0,
            penalty_stop: 1e6,
            armijo: 1e-4,
            max_backtracks: 40,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.memory > 0
            && self.max_iterations > 0
            && self.gradient_tolerance > 0.0
            && self.initial_penalty > 0.0
            && self.penalty_stop > 0.0
            && self.armijo > 0.0
            && self.armijo < 1.0;
        if !positive || !(self.continuation_factor > 1.0) {
            return Err(Error::Input(format!("invalid optimizer settings: {self:?}")));
        }
        Ok(())
    }

    /// Penalty weights of all continuation rounds.
    pub fn schedule(&self) -> Vec<f64> {
        let mut out = vec![self.initial_penalty];
        while *out.last().unwrap() <= self.penalty_stop {
            out.push(out.last().unwrap() * self.continuation_factor);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbfgsStatus {
    Converged,
    MaxIterations,
    /// No further decrease representable in floating point.
    Stalled,
    LineSearchFailed,
}

impl LbfgsStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LbfgsStatus::Converged => "converged",
            LbfgsStatus::MaxIterations => "max_iterations",
            LbfgsStatus::Stalled => "stalled",
            LbfgsStatus::LineSearchFailed => "line_search_failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub projected_gradient_norm: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: LbfgsStatus,
    /// Objective after every accepted iterate, starting with `x0`.
    pub history: Vec<T>,
}

/// Infinity norm of the gradient with components pushing against an active bound removed.
pub fn projected_gradient_norm<T: Scalar>(x: &[T], g: &[T], lower: &[T], upper: &[T]) -> T {
    let mut m = T::zero();
    for i in 0..x.len() {
        let blocked = (x[i] <= lower[i] && g[i] > T::zero()) || (x[i] >= upper[i] && g[i] < T::zero());
        if !blocked {
            m = m.max(g[i].abs());
        }
    }
    m
}

fn active_set<T: Scalar>(x: &[T], g: &[T], lower: &[T], upper: &[T]) -> Vec<bool> {
    (0..x.len())
        .map(|i| (x[i] <= lower[i] && g[i] > T::zero()) || (x[i] >= upper[i] && g[i] < T::zero()))
        .collect()
}

/// Minimizes `f` over the box `[lower, upper]`.
///
/// `f` returns the value and gradient. Trial points are clamped into the box,
/// quasi-Newton steps are restricted to free variables, and the curvature
/// memory is dropped whenever the set of active bounds changes.
pub fn lbfgs_minimize<T, F>(
    mut f: F,
    x0: &[T],
    lower: &[T],
    upper: &[T],
    config: &OptimizerConfig,
) -> Result<LbfgsResult<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
{
    let n = x0.len();
    assert!(lower.len() == n && upper.len() == n, "bounds must match the variable count");
    let clamp = |v: &mut [T]| {
        for i in 0..n {
            v[i] = v[i].max(lower[i]).min(upper[i]);
        }
    };
    let mut x = x0.to_vec();
    clamp(&mut x);
    let (mut fx, mut g) = f(&x)?;
    let mut evaluations = 1;
    let mut history = vec![fx];
    let mut memory: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(config.memory);
    let mut active = active_set(&x, &g, lower, upper);
    let tol = T::lit(config.gradient_tolerance);
    let c1 = T::lit(config.armijo);
    let half = T::lit(0.5);

    let mut status = LbfgsStatus::MaxIterations;
    let mut iterations = 0;
    let mut pg = projected_gradient_norm(&x, &g, lower, upper);
    // Last curvature scale, reused to size steps after a memory reset.
    let mut last_gamma: Option<T> = None;
    while iterations < config.max_iterations {
        if pg <= tol * (T::one() + fx.abs()) {
            status = LbfgsStatus::Converged;
            break;
        }
        iterations += 1;

        // Two-loop recursion on the free variables.
        let mut d: Vec<T> = (0..n).map(|i| if active[i] { T::zero() } else { g[i] }).collect();
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = *rho * dot(s, &d);
            for i in 0..n {
                d[i] = d[i] - a * y[i];
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = memory.back() {
            let gamma = dot(s, y) / dot(y, y);
            last_gamma = Some(gamma);
            for v in d.iter_mut() {
                *v = *v * gamma;
            }
        }
        for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
            let b = *rho * dot(y, &d);
            for i in 0..n {
                d[i] = d[i] + s[i] * (*a - b);
            }
        }
        for i in 0..n {
            d[i] = if active[i] { T::zero() } else { -d[i] };
        }
        let mut slope = dot(&d, &g);
        if memory.is_empty() || !(slope < T::zero()) {
            // Steepest descent, scaled by the last known curvature or to a
            // unit largest move.
            memory.clear();
            let gmax = (0..n)
                .filter(|&i| !active[i])
                .fold(T::zero(), |m, i| m.max(g[i].abs()));
            let scale = last_gamma.unwrap_or(T::one() / gmax);
            for i in 0..n {
                d[i] = if active[i] { T::zero() } else { -g[i] * scale };
            }
            slope = dot(&d, &g);
        }

        // Backtracking along the projected path.
        let mut step = T::one();
        let mut accepted = None;
        let mut trial = vec![T::zero(); n];
        for _ in 0..config.max_backtracks {
            for i in 0..n {
                trial[i] = x[i] + step * d[i];
            }
            clamp(&mut trial);
            let moved: Vec<T> = (0..n).map(|i| trial[i] - x[i]).collect();
            let decrease = dot(&g, &moved);
            if moved.iter().all(|m| *m == T::zero()) {
                break;
            }
            let (ft, gt) = f(&trial)?;
            evaluations += 1;
            if ft.is_finite() && ft <= fx + c1 * decrease.min(slope * step) {
                accepted = Some((ft, gt, moved));
                break;
            }
            step = step * half;
        }
        let Some((ft, gt, s)) = accepted else {
            status = if pg <= tol.sqrt() * (T::one() + fx.abs()) {
                LbfgsStatus::Stalled
            } else {
                LbfgsStatus::LineSearchFailed
            };
            break;
        };
        let y: Vec<T> = (0..n).map(|i| gt[i] - g[i]).collect();
        let sy = dot(&s, &y);
        let previous = fx;
        x.copy_from_slice(&trial);
        fx = ft;
        g = gt;
        history.push(fx);

        let now_active = active_set(&x, &g, lower, upper);
        if now_active != active {
            memory.clear();
            active = now_active;
        }
        if sy > T::epsilon() * dot(&y, &y) {
            if memory.len() == config.memory {
                memory.pop_front();
            }
            memory.push_back((s, y, T::one() / sy));
        }
        pg = projected_gradient_norm(&x, &g, lower, upper);
        if previous - fx <= T::epsilon() * fx.abs() {
            status = if pg <= tol * (T::one() + fx.abs()) {
                LbfgsStatus::Converged
            } else {
                LbfgsStatus::Stalled
            };
            break;
        }
    }
    Ok(LbfgsResult {
        x,
        value: fx,
        projected_gradient_norm: pg,
        iterations,
        evaluations,
        status,
        history,
    })
}

/// One continuation round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub penalty_weight: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Total objective at the end of the round.
    pub objective: f64,
    /// Unscaled loss (J or €) at the end of the round.
    pub loss: f64,
    pub max_violation: f64,
    pub projected_gradient_norm: f64,
    pub status: LbfgsStatus,
}

#[derive(Debug, Clone)]
pub struct OptimizationReport<T> {
    pub rounds: Vec<RoundReport>,
    pub control: ControlTrajectory<T>,
    /// Set when continuation stopped because loss and violation grew together.
    pub aborted: Option<String>,
    pub wall_time: Duration,
}

impl<T: Scalar> OptimizationReport<T> {
    pub fn final_violation(&self) -> f64 {
        self.rounds.last().map_or(f64::NAN, |r| r.max_violation)
    }
}

/// Quadratic-penalty continuation: minimizes at the current weight, warm
/// starts the next round from the result and multiplies the weight.
pub fn optimize<T: Scalar>(
    problem: &Problem<T>,
    u0: &ControlTrajectory<T>,
    config: &OptimizerConfig,
) -> Result<OptimizationReport<T>> {
    config.validate()?;
    let start = Instant::now();
    let plants = problem.plants();
    let steps = problem.steps();
    if u0.plants() != plants || u0.steps() != steps {
        return Err(Error::Input(format!(
            "initial control is {}x{}, problem needs {plants}x{steps}",
            u0.plants(),
            u0.steps()
        )));
    }
    let cs = problem.config.constraints;
    let mut u = u0.clone();
    project_control(&mut u, &cs);
    let lower = vec![cs.plant_min; u.as_slice().len()];
    let upper = vec![cs.plant_max; u.as_slice().len()];

    let mut rounds: Vec<RoundReport> = Vec::new();
    let mut aborted = None;
    let mut round_problem = problem.clone();
    for weight in config.schedule() {
        round_problem.config.penalty_weight = T::lit(weight);
        let p = &round_problem;
        let objective = |x: &[T]| {
            let ctrl = ControlTrajectory::from_values(plants, steps, x.to_vec())?;
            let (e, g) = gradient(p, &ctrl)?;
            Ok((e.total, g))
        };
        let result = lbfgs_minimize(objective, u.as_slice(), &lower, &upper, config)?;
        u = ControlTrajectory::from_values(plants, steps, result.x)?;
        let eval = round_problem.evaluate(&u)?;
        let round = RoundReport {
            penalty_weight: weight,
            iterations: result.iterations,
            evaluations: result.evaluations,
            objective: eval.total.as_f64(),
            loss: eval.loss.as_f64(),
            max_violation: eval.max_violation.as_f64(),
            projected_gradient_norm: result.projected_gradient_norm.as_f64(),
            status: result.status,
        };
        if let Some(prev) = rounds.last() {
            if round.loss > prev.loss && round.max_violation > prev.max_violation + 1e-9 {
                aborted = Some(format!(
                    "round at penalty weight {weight:e} increased both the loss ({} -> {}) and the \
                     constraint violation ({} -> {} °C)",
                    prev.loss, round.loss, prev.max_violation, round.max_violation
                ));
                rounds.push(round);
                break;
            }
        }
        rounds.push(round);
    }
    Ok(OptimizationReport {
        rounds,
        control: u,
        aborted,
        wall_time: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{ObjectiveConfig, PriceModel};
    use crate::thermal::tests::chain;
    use crate::thermal::{Forcing, PhysicalConstants, ThermalSystem};
    use rand::{Rng, SeedableRng};

    fn bowl(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let c = [1.0, -2.0, 3.0, 0.5];
        let f = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b) * 1.0).sum();
        let g = x.iter().zip(&c).map(|(a, b)| 2.0 * (a - b)).collect();
        Ok((f, g))
    }

    #[test]
    fn quadratic_bowl_unbounded() {
        let inf = vec![f64::INFINITY; 4];
        let ninf = vec![f64::NEG_INFINITY; 4];
        let mut cfg = OptimizerConfig::default();
        cfg.gradient_tolerance = 1e-12;
        let r = lbfgs_minimize(bowl, &[0.0; 4], &ninf, &inf, &cfg).unwrap();
        for (x, c) in r.x.iter().zip([1.0, -2.0, 3.0, 0.5]) {
            assert!((x - c).abs() < 1e-8);
        }
        assert!(r.iterations <= 30);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let w: Vec<f64> = (0..x.len()).map(|i| 10f64.powi(i as i32 % 5)).collect();
            let f = x.iter().zip(&w).map(|(a, w)| w * (a - 1.0).powi(2)).sum();
            Ok((f, x.iter().zip(&w).map(|(a, w)| 2.0 * w * (a - 1.0)).collect()))
        };
        let n = 20;
        let r = lbfgs_minimize(f, &vec![0.0; n], &vec![-1e9; n], &vec![1e9; n], &OptimizerConfig::default()).unwrap();
        assert_eq!(r.status, LbfgsStatus::Converged);
        assert!(r.x.iter().all(|x| (x - 1.0).abs() < 1e-5));
    }

    #[test]
    fn penalized_bound_has_closed_form_minimizer() {
        // u² + (λ/2) max(0, 1 − u)²
        let lam = 1e6;
        let f = move |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let v = (1.0 - x[0]).max(0.0);
            Ok((x[0] * x[0] + 0.5 * lam * v * v, vec![2.0 * x[0] - lam * v]))
        };
        let mut cfg = OptimizerConfig::default();
        cfg.gradient_tolerance = 1e-12;
        let r = lbfgs_minimize(f, &[5.0], &[-1e3], &[1e3], &cfg).unwrap();
        let expected = lam / (2.0 + lam);
        assert!((r.x[0] - expected).abs() < 1e-9, "{} vs {expected}", r.x[0]);
    }

    #[test]
    fn active_upper_bound() {
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> { Ok(((x[0] - 150.0).powi(2), vec![2.0 * (x[0] - 150.0)])) };
        let r = lbfgs_minimize(f, &[100.0], &[30.0], &[140.0], &OptimizerConfig::default()).unwrap();
        assert_eq!(r.x[0], 140.0);
        assert_eq!(r.status, LbfgsStatus::Converged);
    }

    #[test]
    fn schedule_has_seven_rounds() {
        let s = OptimizerConfig::default().schedule();
        assert_eq!(s.len(), 7);
        assert_eq!(s[0], 10.0);
        assert!((s[6] - 1e7).abs() < 1e-3);
    }

    fn chain_problem(k: f64, delta: f64, steps: usize, initial: InitialState<f64>, price: PriceModel<f64>) -> Problem<f64> {
        let (g, f) = chain(3, 300.0, k, 0.5);
        let sys = ThermalSystem::build(&g, &f, &PhysicalConstants::default(), 900.0).unwrap();
        let amb: Vec<f64> = (0..=steps).map(|i| 10.0 + (i as f64 * 0.3).sin()).collect();
        let deltas: Vec<f64> = (0..=steps).map(|i| delta * (1.0 + 0.3 * (i as f64 * 0.7).cos())).collect();
        let forcing = Forcing::new(steps, 1, amb, deltas).unwrap();
        let mut cfg = ObjectiveConfig::new(price);
        cfg.penalty_weight = 100.0;
        cfg.tikhonov_weight = Some(500.0);
        Problem::new(sys, forcing, initial, cfg).unwrap()
    }

    fn check_gradient(p: &Problem<f64>, seed: u64, lo: f64, hi: f64) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let steps = p.steps();
        let vals: Vec<f64> = (0..steps * p.plants()).map(|_| rng.random_range(lo..hi)).collect();
        let u = ControlTrajectory::from_values(p.plants(), steps, vals).unwrap();
        let (_, g) = gradient(p, &u).unwrap();
        for i in 0..g.len() {
            let fd = finite_difference(p, &u, i, 1e-3).unwrap();
            let err = relative_error(g[i], fd);
            assert!(err < 1e-5, "coordinate {i}: adjoint {} fd {fd} rel {err}", g[i]);
        }
    }

    #[test]
    fn adjoint_matches_finite_differences_static() {
        let p = chain_problem(0.4, 15.0, 12, InitialState::SteadyFromControl, PriceModel::Static);
        check_gradient(&p, 1, 70.0, 110.0);
    }

    #[test]
    fn adjoint_matches_finite_differences_dynamic_fixed_start() {
        let prices: Vec<f64> = (0..=12).map(|i| 40.0 + 30.0 * ((i / 4) % 2) as f64).collect();
        let model = PriceModel::dynamic(prices, 1.2, 0.3).unwrap();
        let p0 = chain_problem(0.4, 15.0, 12, InitialState::SteadyFromControl, PriceModel::Static);
        let y0 = p0.system.solve_steady(&p0.forcing.boundary(0, &[95.0]));
        let p = chain_problem(0.4, 15.0, 12, InitialState::Fixed(y0), model);
        check_gradient(&p, 2, 70.0, 110.0);
    }

    #[test]
    fn loss_free_gradient_vanishes() {
        // No demand and no losses: the plant sees its own temperature come back.
        let mut p = chain_problem(0.0, 0.0, 6, InitialState::SteadyFromControl, PriceModel::Static);
        let (g_net, f) = chain(3, 300.0, 0.0, 0.5);
        p.system = ThermalSystem::build(&g_net, &f, &PhysicalConstants::default(), 900.0).unwrap();
        p.forcing = Forcing::constant(6, 10.0, &[0.0]).unwrap();
        p.config.tikhonov_weight = Some(0.0);
        let u = ControlTrajectory::constant(1, 6, 100.0);
        let (_, g) = gradient(&p, &u).unwrap();
        let total: f64 = g.iter().sum();
        assert!(total.abs() < 1e-12, "{g:?}");
    }

    #[test]
    fn steady_interior_gradient_is_constant_in_time() {
        let steps = 160;
        let (g_net, f) = chain(3, 300.0, 0.4, 0.5);
        let sys = ThermalSystem::build(&g_net, &f, &PhysicalConstants::default(), 900.0).unwrap();
        let forcing = Forcing::constant(steps, 10.0, &[15.0]).unwrap();
        let mut cfg = ObjectiveConfig::new(PriceModel::Static);
        cfg.tikhonov_weight = Some(0.0);
        let y0 = sys.solve_steady(&forcing.boundary(0, &[110.0]));
        let p = Problem::new(sys, forcing, InitialState::Fixed(y0), cfg).unwrap();
        let (_, g) = gradient(&p, &ControlTrajectory::constant(1, steps, 110.0)).unwrap();
        // Away from the horizon end the whole response of a control change is
        // seen, so every early step has the same sensitivity.
        let early = &g[..steps / 2];
        for v in early {
            assert!(relative_error(*v, early[0]) < 1e-8, "{v} vs {}", early[0]);
        }
        assert!(g.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn continuation_reaches_feasibility_on_chain() {
        let (g_net, f) = chain(3, 300.0, 0.4, 0.5);
        let sys = ThermalSystem::build(&g_net, &f, &PhysicalConstants::default(), 900.0).unwrap();
        let forcing = Forcing::constant(16, 10.0, &[20.0]).unwrap();
        let cfg = ObjectiveConfig::new(PriceModel::Static);
        let y0 = sys.solve_steady(&forcing.boundary(0, &[110.0]));
        let p = Problem::new(sys, forcing, InitialState::Fixed(y0), cfg).unwrap();
        let report = optimize(&p, &ControlTrajectory::constant(1, 16, 110.0), &OptimizerConfig::default()).unwrap();
        assert_eq!(report.rounds.len(), 7);
        assert!(report.aborted.is_none());
        assert!(report.final_violation() < 0.1);
        for w in report.rounds.windows(2) {
            assert!(w[1].max_violation <= w[0].max_violation + 1e-9);
        }
        let base = p.evaluate(&ControlTrajectory::constant(1, 16, 110.0)).unwrap().loss;
        let opt = p.evaluate(&report.control).unwrap().loss;
        assert!(opt < base);
    }
}
