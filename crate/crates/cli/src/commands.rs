use std::path::{Path, PathBuf};
use std::time::Instant;

use dhn_core::network::{FlowField, NetworkGraph};
use dhn_core::objective::{min_feasible_plant_temperature, ObjectiveConfig, PriceModel, Problem};
use dhn_core::optimizer::{optimize, OptimizationReport};
use dhn_core::scenario::{
    equal_share_targets, read_load_series, synthesize_demands, write_demands, DemandSet, Scenario,
};
use dhn_core::thermal::{BoundaryValues, ControlTrajectory, InitialState};
use serde::Serialize;

use crate::config::{InitialMode, RunConfig};
use crate::error::{CliError, CliResult};
use crate::metrics::{correlation, loss_unit, RunSeries, RunSummary, BALANCE_TOLERANCE};
use crate::output::{
    create_dir, read_state, sum_step_loss, write_json, write_run, write_state, write_table, FINAL_STATE_FILE,
    INITIAL_STATE_FILE, TRAJECTORY_FILE,
};

pub const REPORT_FILE: &str = "report.json";
pub const TIMING_FILE: &str = "timing.json";
pub const SIMULATE_FILE: &str = "simulate.json";
pub const VERIFY_FILE: &str = "verify.json";
pub const PRICE_FILE: &str = "price.csv";
pub const DEMAND_FILE: &str = "demands.csv";
pub const DEMAND_SUMMARY_FILE: &str = "demand_summary.csv";
pub const BASELINE_DIR: &str = "baseline";
pub const OPTIMIZED_DIR: &str = "optimized";
pub const STATIC_OPTIMAL_DIR: &str = "static_optimal";

/// Largest tolerated difference between the reported savings and the ratio
/// recomputed from the written series.
pub const SAVINGS_TOLERANCE: f64 = 1e-12;

/// Prints progress lines unless quiet.
#[derive(Debug, Clone, Copy)]
pub struct Console {
    pub quiet: bool,
}

impl Console {
    pub fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioInfo {
    pub nodes: usize,
    pub edges: usize,
    pub consumers: usize,
    pub plants: usize,
    pub steps: usize,
    pub dt_s: f64,
    pub price_model: &'static str,
}

impl ScenarioInfo {
    fn new(graph: &NetworkGraph<f64>, scenario: &Scenario) -> Self {
        ScenarioInfo {
            nodes: graph.node_count(),
            edges: graph.edge_count(),
            consumers: scenario.consumers(),
            plants: scenario.system.plants().len(),
            steps: scenario.grid.steps(),
            dt_s: scenario.grid.dt(),
            price_model: if scenario.price.is_static() { "static" } else { "dynamic" },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InitialInfo {
    pub mode: InitialMode,
    /// Uniform plant temperature of the initial steady state, when it is fixed.
    pub plant_temperature_c: Option<f64>,
}

/// A loaded network plus the scenario built on it.
pub struct Prepared {
    pub graph: NetworkGraph<f64>,
    pub flow: FlowField<f64>,
    pub scenario: Scenario,
}

impl Prepared {
    pub fn load(cfg: &RunConfig) -> CliResult<Self> {
        cfg.validate()?;
        let (graph, flow) = cfg.load_network()?;
        let scenario = cfg.build_scenario(&graph, &flow)?;
        Ok(Prepared { graph, flow, scenario })
    }

    fn node_ids(&self) -> Vec<&str> {
        (0..self.graph.node_count()).map(|i| self.graph.node_id(i)).collect()
    }

    fn plant_ids(&self) -> Vec<&str> {
        self.scenario.system.plants().iter().map(|p| p.edge_id.as_str()).collect()
    }

    fn steady(&self, temps: &[f64], k: usize) -> Vec<f64> {
        let f = &self.scenario.forcing;
        self.scenario.system.solve_steady(&BoundaryValues {
            plant_temps: temps,
            deltas: f.deltas(k),
            ambient: f.ambient(k),
        })
    }

    /// Initial state for `mode`, given the baseline control.
    pub fn initial_state(&self, mode: InitialMode, baseline: &ControlTrajectory<f64>) -> (InitialState<f64>, InitialInfo) {
        let sc = &self.scenario;
        let (initial, temp) = match mode {
            InitialMode::Control => (InitialState::SteadyFromControl, None),
            InitialMode::Baseline => {
                let y0 = self.steady(baseline.at(0), 0);
                let uniform = baseline.at(0).iter().all(|v| *v == baseline.at(0)[0]);
                (InitialState::Fixed(y0), uniform.then(|| baseline.at(0)[0]))
            }
            InitialMode::MinFeasible => {
                let t = min_feasible_plant_temperature(&sc.system, &sc.forcing, 0, &sc.constraints);
                let temps = vec![t; sc.system.plants().len()];
                (InitialState::Fixed(self.steady(&temps, 0)), Some(t))
            }
        };
        (
            initial,
            InitialInfo {
                mode,
                plant_temperature_c: temp,
            },
        )
    }

    pub fn problem(&self, config: ObjectiveConfig<f64>, initial: InitialState<f64>) -> CliResult<Problem<f64>> {
        Ok(self.scenario.problem(config, initial)?)
    }

    /// Writes the per-step price (or the unit static weight) for steps `1..=N`.
    fn write_prices(&self, path: &Path) -> CliResult<()> {
        let grid = &self.scenario.grid;
        let steps = grid.steps();
        match self.scenario.prices() {
            Some(p) => write_table(
                path,
                &["time_s", "price_eur_mwh"],
                (1..=steps).map(|k| vec![grid.time(k), p[k]]),
            ),
            None => write_table(path, &["time_s", "price_weight"], (1..=steps).map(|k| vec![grid.time(k), 1.0])),
        }
    }
}

fn energy_audit(series: &RunSeries, what: &str) -> CliResult<()> {
    let worst = series.max_balance_residual();
    if worst < BALANCE_TOLERANCE {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "{what}: energy balance residual {worst:e} exceeds {BALANCE_TOLERANCE:e} of plant injection"
        )))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub command: &'static str,
    pub scenario: ScenarioInfo,
    pub initial_state: InitialInfo,
    pub loss_unit: &'static str,
    pub summary: RunSummary,
    pub config: RunConfig,
}

/// Simulates the configured control and writes trajectory summaries, the
/// energy-balance audit and the stored-energy series.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path, console: Console) -> CliResult<SimulateReport> {
    let prep = Prepared::load(cfg)?;
    let control = cfg.control(&prep.scenario)?;
    let (initial, info) = prep.initial_state(cfg.initial_state, &control);
    let problem = prep.problem(cfg.objective_config(&prep.scenario), initial)?;
    let traj = problem.simulate(&control)?;
    let series = RunSeries::new(&problem, &control, &traj);

    create_dir(out)?;
    write_run(out, &series, &prep.plant_ids())?;
    prep.write_prices(&out.join(PRICE_FILE))?;
    let ids = prep.node_ids();
    write_state(&out.join(INITIAL_STATE_FILE), &ids, traj.state(0))?;
    write_state(&out.join(FINAL_STATE_FILE), &ids, traj.state(traj.steps()))?;
    let (unit, _) = loss_unit(&problem);
    let report = SimulateReport {
        command: "simulate",
        scenario: ScenarioInfo::new(&prep.graph, &prep.scenario),
        initial_state: info,
        loss_unit: unit,
        summary: series.summary(),
        config: cfg.clone(),
    };
    write_json(&out.join(SIMULATE_FILE), &report)?;
    console.say(format!(
        "simulated {} steps on {} nodes: loss {:.6} {unit}, max balance residual {:.3e}",
        report.scenario.steps, report.scenario.nodes, report.summary.loss, report.summary.max_balance_residual
    ));
    energy_audit(&series, "simulate")?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundTrace {
    pub penalty_weight: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub objective: f64,
    pub loss: f64,
    pub max_violation_c: f64,
    pub projected_gradient_norm: f64,
    pub status: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizerTrace {
    pub rounds: Vec<RoundTrace>,
    pub aborted: Option<String>,
    pub final_violation_c: f64,
}

impl OptimizerTrace {
    /// Round losses are converted to report units with `unit`.
    fn new(rep: &OptimizationReport<f64>, unit: f64) -> Self {
        OptimizerTrace {
            rounds: rep
                .rounds
                .iter()
                .map(|r| RoundTrace {
                    penalty_weight: r.penalty_weight,
                    iterations: r.iterations,
                    evaluations: r.evaluations,
                    objective: r.objective,
                    loss: r.loss * unit,
                    max_violation_c: r.max_violation,
                    projected_gradient_norm: r.projected_gradient_norm,
                    status: r.status.as_str(),
                })
                .collect(),
            aborted: rep.aborted.clone(),
            final_violation_c: rep.final_violation(),
        }
    }
}

/// Optimum of the static-price problem, evaluated under the dynamic prices.
#[derive(Debug, Clone, Serialize)]
pub struct StaticReference {
    pub summary: RunSummary,
    /// `(static-optimal − optimized) / static-optimal`, both under the dynamic prices.
    pub savings: f64,
    pub optimizer: OptimizerTrace,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: &'static str,
    pub scenario: ScenarioInfo,
    pub initial_state: InitialInfo,
    pub loss_unit: &'static str,
    pub baseline: RunSummary,
    pub optimized: RunSummary,
    /// `(baseline − optimized) / baseline`.
    pub savings: f64,
    pub static_optimal: Option<StaticReference>,
    /// Pearson correlation of optimized plant power and price; dynamic prices only.
    pub price_correlation: Option<f64>,
    pub tikhonov_weight: f64,
    /// Regularizer of the optimized control relative to the scaled baseline loss.
    pub tikhonov_share: f64,
    pub loss_scale: f64,
    pub optimizer: OptimizerTrace,
    pub config: RunConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub total_s: f64,
    pub static_optimize_s: Option<f64>,
    pub optimize_s: f64,
}

/// Result of [`cmd_optimize`] kept in memory for callers.
pub struct OptimizeOutcome {
    pub report: RunReport,
    pub timing: Timing,
    pub baseline: RunSeries,
    pub optimized: RunSeries,
    pub static_optimal: Option<RunSeries>,
    pub prices: Option<Vec<f64>>,
}

/// Baseline simulation, optimization and the full set of result files.
pub fn cmd_optimize(cfg: &RunConfig, out: &Path, console: Console) -> CliResult<OptimizeOutcome> {
    let start = Instant::now();
    let prep = Prepared::load(cfg)?;
    let baseline_u = cfg.control(&prep.scenario)?;
    let (initial, info) = prep.initial_state(cfg.initial_state, &baseline_u);
    let problem = prep.problem(cfg.objective_config(&prep.scenario), initial.clone())?;
    let opt_cfg = cfg.optimizer.core();
    let (unit, unit_factor) = loss_unit(&problem);

    let base_eval = problem.evaluate(&baseline_u)?;
    let baseline = RunSeries::new(&problem, &baseline_u, &base_eval.trajectory);
    energy_audit(&baseline, "baseline")?;
    console.say(format!("baseline loss {:.6} {unit}", baseline.loss));

    let mut u0 = baseline_u.clone();
    let mut static_run = None;
    let mut static_time = None;
    if !problem.config.price.is_static() && cfg.optimizer.static_warm_start {
        let mut static_cfg = problem.config.clone();
        static_cfg.price = PriceModel::Static;
        static_cfg.loss_scale = None;
        let static_problem = prep.problem(static_cfg, initial.clone())?;
        let rep = optimize(&static_problem, &baseline_u, &opt_cfg)?;
        static_time = Some(rep.wall_time.as_secs_f64());
        let eval = problem.evaluate(&rep.control)?;
        let series = RunSeries::new(&problem, &rep.control, &eval.trajectory);
        console.say(format!("static-optimal control costs {:.6} {unit}", series.loss));
        u0 = rep.control.clone();
        static_run = Some((series, OptimizerTrace::new(&rep, unit_factor)));
    }

    let rep = optimize(&problem, &u0, &opt_cfg)?;
    let trace = OptimizerTrace::new(&rep, unit_factor);
    for r in &trace.rounds {
        console.say(format!(
            "penalty {:>8.1e}: {:>4} iterations, loss {:.6} {unit}, max violation {:.3e} °C, {}",
            r.penalty_weight,
            r.iterations,
            r.loss,
            r.max_violation_c,
            r.status
        ));
    }
    let opt_eval = problem.evaluate(&rep.control)?;
    let optimized = RunSeries::new(&problem, &rep.control, &opt_eval.trajectory);
    energy_audit(&optimized, "optimized")?;

    let savings = (baseline.loss - optimized.loss) / baseline.loss;
    let prices = prep.scenario.prices().map(|p| p[1..].to_vec());
    let price_correlation = prices.as_ref().map(|p| correlation(&optimized.plant_power, p));
    let tikhonov_weight = problem.tikhonov_weight();
    let report = RunReport {
        command: "optimize",
        scenario: ScenarioInfo::new(&prep.graph, &prep.scenario),
        initial_state: info,
        loss_unit: unit,
        baseline: baseline.summary(),
        optimized: optimized.summary(),
        savings,
        static_optimal: static_run.as_ref().map(|(s, t)| StaticReference {
            summary: s.summary(),
            savings: (s.loss - optimized.loss) / s.loss,
            optimizer: t.clone(),
        }),
        price_correlation,
        tikhonov_weight,
        tikhonov_share: tikhonov_weight * opt_eval.tikhonov / (problem.loss_scale() * base_eval.loss),
        loss_scale: problem.loss_scale(),
        optimizer: trace,
        config: cfg.clone(),
    };

    create_dir(out)?;
    let plants = prep.plant_ids();
    write_run(&out.join(BASELINE_DIR), &baseline, &plants)?;
    write_run(&out.join(OPTIMIZED_DIR), &optimized, &plants)?;
    if let Some((s, _)) = &static_run {
        write_run(&out.join(STATIC_OPTIMAL_DIR), s, &plants)?;
    }
    prep.write_prices(&out.join(PRICE_FILE))?;
    write_state(&out.join(INITIAL_STATE_FILE), &prep.node_ids(), opt_eval.trajectory.state(0))?;
    write_json(&out.join(REPORT_FILE), &report)?;
    let timing = Timing {
        total_s: start.elapsed().as_secs_f64(),
        static_optimize_s: static_time,
        optimize_s: rep.wall_time.as_secs_f64(),
    };
    write_json(&out.join(TIMING_FILE), &timing)?;

    console.say(format!(
        "optimized loss {:.6} {unit}, savings {:.2} %, final max violation {:.3e} °C",
        optimized.loss,
        100.0 * savings,
        report.optimizer.final_violation_c
    ));
    if let Some(s) = &report.static_optimal {
        console.say(format!("savings against the static-optimal control {:.2} %", 100.0 * s.savings));
    }
    if let Some(msg) = &report.optimizer.aborted {
        return Err(CliError::Numerical(format!("optimization aborted: {msg}")));
    }
    Ok(OptimizeOutcome {
        report,
        timing,
        baseline,
        optimized,
        static_optimal: static_run.map(|(s, _)| s),
        prices,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceComparison {
    pub nodes_compared: usize,
    pub mean_abs_mismatch_c: f64,
    pub max_abs_mismatch_c: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub command: &'static str,
    pub nodes: usize,
    pub plant_temperature_c: f64,
    pub dense_max_abs_mismatch_c: f64,
    pub tolerance_c: f64,
    pub reference: Option<ReferenceComparison>,
    pub passed: bool,
}

/// Steady solve checked against a dense direct solve and, optionally, a
/// reference temperature file.
pub fn cmd_verify(cfg: &RunConfig, out: &Path, console: Console) -> CliResult<VerifyReport> {
    cfg.validate()?;
    let v = &cfg.verify;
    let (graph, flow) = cfg.load_network()?;
    let system = dhn_core::thermal::ThermalSystem::build(&graph, &flow, &cfg.constants()?, cfg.dt_s)?;
    let nc = system.consumers().len();
    let deltas = match v.delta_c {
        Some(d) => vec![d; nc],
        None => {
            let sc = cfg.build_scenario(&graph, &flow)?;
            sc.forcing.deltas(0).to_vec()
        }
    };
    let temps = vec![v.plant_temperature_c; system.plants().len()];
    let bc = BoundaryValues {
        plant_temps: &temps,
        deltas: &deltas,
        ambient: cfg.ambient_c,
    };
    let sparse = system.solve_steady(&bc);
    let dense = system.solve_steady_dense(&bc)?;
    let dense_mismatch = sparse.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let ids: Vec<&str> = (0..graph.node_count()).map(|i| graph.node_id(i)).collect();
    let mut reference = vec![f64::NAN; graph.node_count()];
    let comparison = match &v.reference {
        Some(path) => {
            if !path.is_file() {
                return Err(CliError::Input(format!("`verify.reference`: no such file {}", path.display())));
            }
            let mut sum = 0.0;
            let mut max: f64 = 0.0;
            let rows = read_state(path)?;
            for (id, t) in &rows {
                let i = graph.node_by_id(id).ok_or_else(|| {
                    CliError::Input(format!("{}: unknown node `{id}`", path.display()))
                })?;
                reference[i] = *t;
                let d = (sparse[i] - t).abs();
                sum += d;
                max = max.max(d);
            }
            Some(ReferenceComparison {
                nodes_compared: rows.len(),
                mean_abs_mismatch_c: if rows.is_empty() { 0.0 } else { sum / rows.len() as f64 },
                max_abs_mismatch_c: max,
            })
        }
        None => None,
    };

    create_dir(out)?;
    let path = out.join("verify_nodes.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::write(&path, e))?;
    let fail = |e: csv::Error| CliError::write(&path, e);
    w.write_record(["node_id", "sparse_c", "dense_c", "reference_c"]).map_err(fail)?;
    for i in 0..ids.len() {
        let r = if reference[i].is_nan() { String::new() } else { reference[i].to_string() };
        w.write_record([ids[i].to_string(), sparse[i].to_string(), dense[i].to_string(), r])
            .map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::write(&path, e))?;

    // Mismatch histogram against the reference where given, else against the dense solve.
    let mismatch: Vec<f64> = (0..ids.len())
        .map(|i| if reference[i].is_nan() { sparse[i] - dense[i] } else { sparse[i] - reference[i] })
        .collect();
    write_table(&out.join("verify_histogram.csv"), &["bin_low_c", "bin_high_c", "count"], histogram(&mismatch, v.histogram_bins))?;

    let report = VerifyReport {
        command: "verify",
        nodes: graph.node_count(),
        plant_temperature_c: v.plant_temperature_c,
        dense_max_abs_mismatch_c: dense_mismatch,
        tolerance_c: v.tolerance_c,
        reference: comparison,
        passed: dense_mismatch < v.tolerance_c,
    };
    write_json(&out.join(VERIFY_FILE), &report)?;
    console.say(format!(
        "steady solve on {} nodes: dense mismatch {:.3e} °C (tolerance {:.1e})",
        report.nodes, dense_mismatch, v.tolerance_c
    ));
    if let Some(c) = &report.reference {
        console.say(format!(
            "reference: {} nodes, mean |mismatch| {:.4} °C, max {:.4} °C",
            c.nodes_compared, c.mean_abs_mismatch_c, c.max_abs_mismatch_c
        ));
    }
    if !report.passed {
        return Err(CliError::Numerical(format!(
            "sparse and dense steady solves differ by {dense_mismatch:e} °C"
        )));
    }
    Ok(report)
}

/// Equal-width histogram rows `[low, high, count]`.
pub fn histogram(values: &[f64], bins: usize) -> Vec<Vec<f64>> {
    let bins = bins.max(1);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        return Vec::new();
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .iter()
        .enumerate()
        .map(|(b, c)| vec![lo + b as f64 * width, lo + (b + 1) as f64 * width, *c as f64])
        .collect()
}

/// Low-pass filtered, perturbed per-consumer demand curves.
pub fn cmd_synth_demand(cfg: &RunConfig, out: &Path, console: Console) -> CliResult<DemandSet> {
    let base_path = cfg
        .base_load
        .as_deref()
        .ok_or_else(|| CliError::Input("config field `base_load` is required for synth-demand".into()))?;
    if !base_path.is_file() {
        return Err(CliError::Input(format!("`base_load`: no such file {}", base_path.display())));
    }
    let base = read_load_series(base_path)?;
    let ids: Vec<String> = if cfg.synthesis.consumers.is_empty() {
        let (graph, flow) = cfg.load_network()?;
        let system = dhn_core::thermal::ThermalSystem::build(&graph, &flow, &cfg.constants()?, cfg.dt_s)?;
        system.consumers().iter().map(|c| c.edge_id.clone()).collect()
    } else {
        cfg.synthesis.consumers.clone()
    };
    if ids.is_empty() {
        return Err(CliError::Input("no consumers to synthesize demand for".into()));
    }
    let mut targets = equal_share_targets(&base, ids.len());
    for (id, t) in &cfg.synthesis.targets_w {
        let i = ids
            .iter()
            .position(|x| x == id)
            .ok_or_else(|| CliError::Input(format!("`synthesis.targets_w` names unknown consumer `{id}`")))?;
        targets[i] = *t;
    }
    let demands = synthesize_demands(&base, &ids, &targets, &cfg.synthesis())?;

    create_dir(out)?;
    write_demands(&demands, &out.join(DEMAND_FILE))?;
    let path = out.join(DEMAND_SUMMARY_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::write(&path, e))?;
    let fail = |e: csv::Error| CliError::write(&path, e);
    w.write_record(["consumer_edge_id", "mean_w", "min_w", "max_w"]).map_err(fail)?;
    for (id, s) in demands.ids.iter().zip(&demands.series) {
        let min = s.values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = s.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        w.write_record([id.clone(), s.mean().to_string(), min.to_string(), max.to_string()])
            .map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::write(&path, e))?;
    console.say(format!(
        "wrote {} demand curves of {} samples to {}",
        demands.ids.len(),
        base.len(),
        out.join(DEMAND_FILE).display()
    ));
    Ok(demands)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportCheck {
    pub savings: f64,
    pub recomputed_savings: f64,
}

/// Re-reads an optimize output directory and checks the reported savings
/// against the written series.
pub fn cmd_report(out: &Path, console: Console) -> CliResult<ReportCheck> {
    let path = out.join(REPORT_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let report: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let field = |v: &serde_json::Value, name: &str| {
        v.as_f64()
            .ok_or_else(|| CliError::Input(format!("{}: missing number `{name}`", path.display())))
    };
    let savings = field(&report["savings"], "savings")?;
    let unit = report["loss_unit"].as_str().unwrap_or("?").to_string();
    let base = sum_step_loss(&out.join(BASELINE_DIR).join(TRAJECTORY_FILE))?;
    let opt = sum_step_loss(&out.join(OPTIMIZED_DIR).join(TRAJECTORY_FILE))?;
    let recomputed = (base - opt) / base;
    console.say(format!("baseline loss   {base:.6} {unit}"));
    console.say(format!("optimized loss  {opt:.6} {unit}"));
    console.say(format!("savings         {:.4} %", 100.0 * savings));
    if let Some(s) = report["static_optimal"]["savings"].as_f64() {
        console.say(format!("vs static-opt   {:.4} %", 100.0 * s));
    }
    if let Some(c) = report["price_correlation"].as_f64() {
        console.say(format!("price corr.     {c:.4}"));
    }
    let opt_summary = &report["optimized"];
    if let Some(c) = opt_summary["stored_energy_change"].as_f64() {
        console.say(format!("stored energy   {:+.4} % over the horizon", 100.0 * c));
    }
    if let Some(v) = report["optimizer"]["final_violation_c"].as_f64() {
        console.say(format!("max violation   {v:.3e} °C"));
    }
    if (recomputed - savings).abs() > SAVINGS_TOLERANCE {
        return Err(CliError::Numerical(format!(
            "reported savings {savings} differ from the series ratio {recomputed}"
        )));
    }
    Ok(ReportCheck {
        savings,
        recomputed_savings: recomputed,
    })
}

/// Output directory: flag, then config, then `./out`.
pub fn out_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}
