use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dhn_core::network::{load_flow_field, parse_network, FlowField, NetworkGraph};
use dhn_core::objective::{ConstraintSet, ObjectiveConfig, DEFAULT_TIKHONOV_FACTOR};
use dhn_core::optimizer::OptimizerConfig;
use dhn_core::scenario::{
    build_scenario, read_demands, read_price_series, Scenario, ScenarioInputs, SynthesisConfig, VariationConfig,
    DEFAULT_CUTOFF_HZ,
};
use dhn_core::thermal::{ControlTrajectory, PhysicalConstants, TimeGrid};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Network description: node, edge and flow files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkFiles {
    pub nodes: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub flows: Option<PathBuf>,
    /// Pipes longer than this are split into equal cells, m. `null` keeps the file as is.
    pub max_cell_length_m: Option<f64>,
}

/// Where the plant control trajectory comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ControlSource {
    /// Same supply temperature for every plant and step, °C.
    ConstantC(f64),
    /// CSV with header `time_s,<plant edge id>...` and one row per step.
    File(PathBuf),
}

impl Default for ControlSource {
    fn default() -> Self {
        ControlSource::ConstantC(110.0)
    }
}

/// How the state at `t = 0` is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialMode {
    /// Steady state under the first column of the baseline control, held fixed.
    #[default]
    Baseline,
    /// Steady state under the first column of whichever control is evaluated.
    Control,
    /// Steady state at the lowest uniform plant temperature that meets every
    /// consumer bound at `t = 0`, held fixed.
    MinFeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintSettings {
    pub consumer_supply_min_c: f64,
    pub consumer_return_min_c: f64,
    pub plant_min_c: f64,
    pub plant_max_c: f64,
}

impl Default for ConstraintSettings {
    fn default() -> Self {
        let c = ConstraintSet::<f64>::default();
        ConstraintSettings {
            consumer_supply_min_c: c.consumer_supply_min,
            consumer_return_min_c: c.consumer_return_min,
            plant_min_c: c.plant_min,
            plant_max_c: c.plant_max,
        }
    }
}

impl From<ConstraintSettings> for ConstraintSet<f64> {
    fn from(s: ConstraintSettings) -> Self {
        ConstraintSet {
            consumer_supply_min: s.consumer_supply_min_c,
            consumer_return_min: s.consumer_return_min_c,
            plant_min: s.plant_min_c,
            plant_max: s.plant_max_c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    pub memory: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub initial_penalty: f64,
    pub continuation_factor: f64,
    pub penalty_stop: f64,
    /// Dynamic prices only: optimize the static problem first, report its
    /// cost under the dynamic prices, and warm-start from it.
    pub static_warm_start: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        let c = OptimizerConfig::default();
        OptimizerSettings {
            memory: c.memory,
            max_iterations: c.max_iterations,
            gradient_tolerance: c.gradient_tolerance,
            initial_penalty: c.initial_penalty,
            continuation_factor: c.continuation_factor,
            penalty_stop: c.penalty_stop,
            static_warm_start: true,
        }
    }
}

impl OptimizerSettings {
    pub fn core(&self) -> OptimizerConfig {
        OptimizerConfig {
            memory: self.memory,
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            initial_penalty: self.initial_penalty,
            continuation_factor: self.continuation_factor,
            penalty_stop: self.penalty_stop,
            ..OptimizerConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisSettings {
    pub cutoff_hz: f64,
    /// Perturbed frequency band, Hz.
    pub band_hz: [f64; 2],
    pub sigma: f64,
    /// Consumer edge ids; taken from the network when empty.
    pub consumers: Vec<String>,
    /// Mean power per consumer, W; equal shares of the base mean when absent.
    pub targets_w: BTreeMap<String, f64>,
}

impl Default for SynthesisSettings {
    fn default() -> Self {
        let v = VariationConfig::default();
        SynthesisSettings {
            cutoff_hz: DEFAULT_CUTOFF_HZ,
            band_hz: [v.band.0, v.band.1],
            sigma: v.sigma,
            consumers: Vec::new(),
            targets_w: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySettings {
    pub plant_temperature_c: f64,
    /// Uniform consumer temperature drop, °C; the demand at `t = 0` when absent.
    pub delta_c: Option<f64>,
    /// CSV with header `node_id,temperature_c`.
    pub reference: Option<PathBuf>,
    /// Largest tolerated sparse vs dense mismatch, °C.
    pub tolerance_c: f64,
    pub histogram_bins: usize,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            plant_temperature_c: 110.0,
            delta_c: None,
            reference: None,
            tolerance_c: 1e-8,
            histogram_bins: 20,
        }
    }
}

/// One JSON document describing a run. Relative paths are resolved against
/// the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub network: NetworkFiles,
    pub demands: Option<PathBuf>,
    pub prices: Option<PathBuf>,
    pub base_load: Option<PathBuf>,
    pub control: ControlSource,
    pub initial_state: InitialMode,
    pub dt_s: f64,
    pub horizon_s: f64,
    pub heat_capacity_j_kg_k: f64,
    pub density_kg_m3: f64,
    pub ambient_c: f64,
    pub constraints: ConstraintSettings,
    pub alpha: f64,
    pub beta: f64,
    /// Weight of the control-smoothness term; `DEFAULT_TIKHONOV_FACTOR·Δt²` when absent.
    pub tikhonov_weight: Option<f64>,
    /// Multiplier turning J or € into objective units; normalized when absent.
    pub loss_scale: Option<f64>,
    pub optimizer: OptimizerSettings,
    pub synthesis: SynthesisSettings,
    pub verify: VerifySettings,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let c = PhysicalConstants::<f64>::default();
        RunConfig {
            network: NetworkFiles::default(),
            demands: None,
            prices: None,
            base_load: None,
            control: ControlSource::default(),
            initial_state: InitialMode::default(),
            dt_s: 900.0,
            horizon_s: 3.0 * 86_400.0,
            heat_capacity_j_kg_k: c.heat_capacity,
            density_kg_m3: c.density,
            ambient_c: 10.0,
            constraints: ConstraintSettings::default(),
            alpha: 1.0,
            beta: 0.0,
            tikhonov_weight: None,
            loss_scale: None,
            optimizer: OptimizerSettings::default(),
            synthesis: SynthesisSettings::default(),
            verify: VerifySettings::default(),
            out_dir: None,
            seed: 0,
            threads: None,
        }
    }
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    /// Makes every relative path absolute with respect to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.network.nodes);
        resolve(base, &mut self.network.edges);
        resolve(base, &mut self.network.flows);
        resolve(base, &mut self.demands);
        resolve(base, &mut self.prices);
        resolve(base, &mut self.base_load);
        resolve(base, &mut self.verify.reference);
        resolve(base, &mut self.out_dir);
        if let ControlSource::File(p) = &mut self.control {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let positive = [
            ("dt_s", self.dt_s),
            ("horizon_s", self.horizon_s),
            ("heat_capacity_j_kg_k", self.heat_capacity_j_kg_k),
            ("density_kg_m3", self.density_kg_m3),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Input(format!("`{name}` must be positive, got {v}")));
            }
        }
        if let Some(l) = self.network.max_cell_length_m {
            if !(l.is_finite() && l > 0.0) {
                return Err(CliError::Input(format!("`network.max_cell_length_m` must be positive, got {l}")));
            }
        }
        if !self.ambient_c.is_finite() {
            return Err(CliError::Input("`ambient_c` must be finite".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Input("`threads` must be at least 1".into()));
        }
        ConstraintSet::from(self.constraints).validate()?;
        self.optimizer.core().validate()?;
        self.grid()?;
        Ok(())
    }

    pub fn grid(&self) -> CliResult<TimeGrid<f64>> {
        Ok(TimeGrid::from_horizon(self.dt_s, self.horizon_s)?)
    }

    pub fn constants(&self) -> CliResult<PhysicalConstants<f64>> {
        Ok(PhysicalConstants::new(self.heat_capacity_j_kg_k, self.density_kg_m3)?)
    }

    fn required<'a>(&self, field: &str, value: &'a Option<PathBuf>) -> CliResult<&'a Path> {
        let p = value
            .as_deref()
            .ok_or_else(|| CliError::Input(format!("config field `{field}` is required for this command")))?;
        if !p.is_file() {
            return Err(CliError::Input(format!("`{field}`: no such file {}", p.display())));
        }
        Ok(p)
    }

    /// Parsed network and flow field, subdivided into computational cells.
    pub fn load_network(&self) -> CliResult<(NetworkGraph<f64>, FlowField<f64>)> {
        let nodes = self.required("network.nodes", &self.network.nodes)?;
        let edges = self.required("network.edges", &self.network.edges)?;
        let flows = self.required("network.flows", &self.network.flows)?;
        let graph = parse_network(nodes, edges)?;
        let flow = load_flow_field(flows, &graph)?;
        match self.network.max_cell_length_m {
            Some(l) => Ok(graph.subdivide(&flow, l)?),
            None => Ok((graph, flow)),
        }
    }

    pub fn build_scenario(&self, graph: &NetworkGraph<f64>, flow: &FlowField<f64>) -> CliResult<Scenario> {
        let demands = read_demands(self.required("demands", &self.demands)?)?;
        let prices = match &self.prices {
            Some(_) => Some(read_price_series(self.required("prices", &self.prices)?)?),
            None => None,
        };
        let inputs = ScenarioInputs {
            graph,
            flow,
            demands: &demands,
            prices: prices.as_ref(),
            constraints: self.constraints.into(),
            grid: self.grid()?,
            constants: self.constants()?,
            ambient: self.ambient_c,
            alpha: self.alpha,
            beta: self.beta,
        };
        Ok(build_scenario(&inputs)?)
    }

    pub fn objective_config(&self, scenario: &Scenario) -> ObjectiveConfig<f64> {
        let mut cfg = scenario.objective_config();
        cfg.tikhonov_weight = Some(self.tikhonov_weight());
        cfg.loss_scale = self.loss_scale;
        cfg
    }

    pub fn tikhonov_weight(&self) -> f64 {
        self.tikhonov_weight
            .unwrap_or(DEFAULT_TIKHONOV_FACTOR * self.dt_s * self.dt_s)
    }

    pub fn synthesis(&self) -> SynthesisConfig {
        SynthesisConfig {
            cutoff: self.synthesis.cutoff_hz,
            variations: VariationConfig {
                band: (self.synthesis.band_hz[0], self.synthesis.band_hz[1]),
                sigma: self.synthesis.sigma,
                seed: self.seed,
            },
        }
    }

    /// The configured control trajectory, one column per plant of `scenario`.
    pub fn control(&self, scenario: &Scenario) -> CliResult<ControlTrajectory<f64>> {
        let plants = scenario.system.plants();
        let steps = scenario.grid.steps();
        match &self.control {
            ControlSource::ConstantC(v) => Ok(ControlTrajectory::constant(plants.len(), steps, *v)),
            ControlSource::File(path) => {
                let ids: Vec<&str> = plants.iter().map(|p| p.edge_id.as_str()).collect();
                crate::output::read_control(path, &ids, steps)
            }
        }
    }
}
