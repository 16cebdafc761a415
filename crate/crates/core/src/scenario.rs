//! Demand and price scenarios on the simulation grid.
//!
//! Signal processing runs in `f64`; the resulting forcing feeds the `f64`
//! solver.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::network::{csv_error, parse_f64, read_csv_rows, write_err, FlowField, NetworkGraph};
use crate::objective::{ConstraintSet, ObjectiveConfig, PriceModel, Problem};
use crate::thermal::{demand_to_delta, Forcing, InitialState, PhysicalConstants, ThermalSystem, TimeGrid};

pub const LOAD_HEADER: [&str; 2] = ["time_s", "power_w"];
pub const PRICE_HEADER: [&str; 2] = ["time_s", "price_eur_mwh"];
pub const DEMAND_HEADER: [&str; 3] = ["time_s", "consumer_edge_id", "power_w"];

/// Sample interval assumed for load files that carry no time column.
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 900.0;

/// Low-pass cutoff applied to the base load, Hz (about a 4 h period).
pub const DEFAULT_CUTOFF_HZ: f64 = 69.4e-6;

/// Butterworth order used by [`lowpass`].
pub const FILTER_ORDER: usize = 4;

const SPACING_TOL: f64 = 1e-6;

/// Uniformly sampled power, W.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSeries {
    pub start: f64,
    pub interval: f64,
    pub values: Vec<f64>,
}

impl LoadSeries {
    pub fn new(start: f64, interval: f64, values: Vec<f64>) -> Result<Self> {
        if !(interval > 0.0) || !start.is_finite() {
            return Err(Error::Input(format!("sample interval must be positive, got {interval}")));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Input(format!("load values must be finite and >= 0, got {v}")));
        }
        Ok(Self { start, interval, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.interval
    }

    pub fn end(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Linear interpolation at every grid time.
    pub fn resample(&self, grid: &TimeGrid<f64>) -> Result<Vec<f64>> {
        resample_to_grid(&self.times(), &self.values, grid)
    }
}

/// Reads a base load file; a file with only a `power_w` column is taken to be
/// sampled every [`DEFAULT_SAMPLE_INTERVAL`] seconds from 0.
pub fn read_load_series(path: &Path) -> Result<LoadSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let with_time = header == LOAD_HEADER;
    if !with_time && header != ["power_w"] {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header `{}` or `power_w`, found `{}`", LOAD_HEADER.join(","), header.join(",")),
        });
    }
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut times = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let r = record.map_err(|e| csv_error(path, e))?;
        let line = r.position().map(|p| p.line()).unwrap_or(0);
        if r.len() != header.len() {
            return Err(parse_err(line, format!("expected {} fields, found {}", header.len(), r.len())));
        }
        if with_time {
            times.push(parse_f64(&r[0], "time_s").map_err(|m| parse_err(line, m))?);
        }
        let v = parse_f64(&r[header.len() - 1], "power_w").map_err(|m| parse_err(line, m))?;
        if v < 0.0 {
            return Err(parse_err(line, format!("power must be >= 0, got {v}")));
        }
        values.push(v);
    }
    if values.len() < 2 {
        return Err(parse_err(1, "a load series needs at least two samples".into()));
    }
    if !with_time {
        return LoadSeries::new(0.0, DEFAULT_SAMPLE_INTERVAL, values);
    }
    let interval = times[1] - times[0];
    for (i, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - interval).abs() > SPACING_TOL * interval.abs().max(1.0) || !(interval > 0.0) {
            return Err(parse_err(
                i as u64 + 3,
                format!("samples must be uniformly spaced, got step {} after {interval}", w[1] - w[0]),
            ));
        }
    }
    LoadSeries::new(times[0], interval, values)
}

pub fn write_load_series(series: &LoadSeries, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| write_err(path, e))?;
    w.write_record(LOAD_HEADER).map_err(|e| write_err(path, e))?;
    for (i, v) in series.values.iter().enumerate() {
        w.write_record([series.time(i).to_string(), v.to_string()])
            .map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Second-order section `b0 + b1 z⁻¹ + b2 z⁻²` over `1 + a1 z⁻¹ + a2 z⁻²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Transposed direct form II over `x`, starting in the steady state of a
    /// constant input equal to `x[0]`.
    fn run(&self, x: &mut [f64]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let Some(&v) = x.first() else { return };
        // Unit DC gain, so the steady output equals the input.
        let mut z1 = (1.0 - b0) * v;
        let mut z2 = (b2 - a2) * v;
        for s in x.iter_mut() {
            let xin = *s;
            let y = b0 * xin + z1;
            z1 = b1 * xin - a1 * y + z2;
            z2 = b2 * xin - a2 * y;
            *s = y;
        }
    }

    /// `|H(e^{iω})|` at frequency `f` for sample rate `fs`.
    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        let z1 = Complex::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = self.b[0] + z1 * self.b[1] + z2 * self.b[2];
        let den = 1.0 + z1 * self.a[0] + z2 * self.a[1];
        (num / den).norm()
    }
}

/// Sections of a digital Butterworth low-pass of even `order` via the
/// prewarped bilinear transform.
pub fn butterworth_sections(order: usize, cutoff: f64, sample_rate: f64) -> Result<Vec<Biquad>> {
    if order == 0 || order % 2 != 0 {
        return Err(Error::Input(format!("filter order must be even and positive, got {order}")));
    }
    let nyquist = 0.5 * sample_rate;
    if !(cutoff > 0.0 && cutoff < nyquist) {
        return Err(Error::Input(format!(
            "cutoff {cutoff} Hz must lie in (0, {nyquist}) Hz for sampling at {sample_rate} Hz"
        )));
    }
    let w = (PI * cutoff / sample_rate).tan();
    let w2 = w * w;
    Ok((1..=order / 2)
        .map(|k| {
            let zeta = (PI * (2 * k - 1) as f64 / (2 * order) as f64).sin();
            let a0 = 1.0 + 2.0 * zeta * w + w2;
            Biquad {
                b: [w2 / a0, 2.0 * w2 / a0, w2 / a0],
                a: [2.0 * (w2 - 1.0) / a0, (1.0 - 2.0 * zeta * w + w2) / a0],
            }
        })
        .collect())
}

/// Residual start-up transient tolerated after the padding.
pub const SETTLING_TOLERANCE: f64 = 1e-6;

/// Samples until the slowest Butterworth pole, with decay rate
/// `2π fc sin(π / 2N)`, has decayed to [`SETTLING_TOLERANCE`].
pub fn settling_length(cutoff: f64, interval: f64) -> usize {
    let rate = 2.0 * PI * cutoff * (PI / (2 * FILTER_ORDER) as f64).sin();
    (-SETTLING_TOLERANCE.ln() / (rate * interval)).ceil() as usize
}

/// Zero-phase 4th-order Butterworth low-pass (forward and backward pass),
/// negatives clamped to zero.
pub fn lowpass(series: &LoadSeries, cutoff: f64) -> Result<LoadSeries> {
    let fs = 1.0 / series.interval;
    let sections = butterworth_sections(FILTER_ORDER, cutoff, fs)?;
    let pad = settling_length(cutoff, series.interval);
    let n = series.len();
    if n < 8 || n <= pad {
        return Err(Error::Input(format!(
            "series of {n} samples is too short to filter; needs more than {} samples",
            pad.max(7)
        )));
    }
    let mut values = filtfilt(&sections, &series.values, pad);
    for v in values.iter_mut() {
        *v = v.max(0.0);
    }
    LoadSeries::new(series.start, series.interval, values)
}

/// Forward-backward filtering with odd reflective padding of `pad` samples.
pub fn filtfilt(sections: &[Biquad], x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    assert!(pad < n, "padding must be shorter than the signal");
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
    for s in sections {
        s.run(&mut ext);
    }
    ext.reverse();
    for s in sections {
        s.run(&mut ext);
    }
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// Settings of the Fourier-domain demand perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationConfig {
    /// Perturbed frequency band, Hz.
    pub band: (f64, f64),
    pub sigma: f64,
    pub seed: u64,
}

impl Default for VariationConfig {
    fn default() -> Self {
        Self {
            band: (1.0 / 86_400.0, 1.0 / 7_200.0),
            sigma: 0.2,
            seed: 0,
        }
    }
}

/// Deterministic per-consumer random stream from the master seed and the id.
pub fn consumer_rng(seed: u64, id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// One perturbed copy of `base` per id: bins inside the band are scaled by
/// independent factors `exp(N(0, σ²))` (mirrored bins share the factor, the DC
/// bin is untouched), the result is clamped at zero and rescaled to its target mean.
pub fn synthesize_variations(
    base: &LoadSeries,
    ids: &[String],
    targets: &[f64],
    config: &VariationConfig,
) -> Result<Vec<LoadSeries>> {
    if ids.is_empty() {
        return Err(Error::Input("at least one variation is required".into()));
    }
    if ids.len() != targets.len() {
        return Err(Error::Input(format!("{} ids but {} target means", ids.len(), targets.len())));
    }
    if let Some(t) = targets.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(Error::Input(format!("target means must be finite and >= 0, got {t}")));
    }
    if !(config.sigma >= 0.0) {
        return Err(Error::Input(format!("sigma must be >= 0, got {}", config.sigma)));
    }
    let n = base.len();
    let nyquist = 0.5 / base.interval;
    let (lo, hi) = config.band;
    if !(lo > 0.0 && lo < hi && hi <= nyquist) {
        return Err(Error::Input(format!("band ({lo}, {hi}) Hz must lie within (0, {nyquist}] Hz")));
    }
    let df = 1.0 / (n as f64 * base.interval);
    let bins: Vec<usize> = (1..=n / 2)
        .filter(|&j| {
            let f = j as f64 * df;
            f >= lo && f <= hi
        })
        .collect();
    if bins.is_empty() {
        return Err(Error::Input(format!(
            "no frequency bin of a {n}-sample series falls into the band ({lo}, {hi}) Hz"
        )));
    }
    let base_mean = base.mean();
    if !(base_mean > 0.0) {
        return Err(Error::Input("base load must have a positive mean".into()));
    }

    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut spectrum: Vec<Complex<f64>> = base.values.iter().map(|v| Complex::new(*v, 0.0)).collect();
    forward.process(&mut spectrum);
    let noise = Normal::new(0.0, config.sigma).map_err(|e| Error::Input(e.to_string()))?;

    ids.par_iter()
        .zip(targets.par_iter())
        .map(|(id, &target)| {
            let mut rng = consumer_rng(config.seed, id);
            let mut x = spectrum.clone();
            for &j in &bins {
                let factor = noise.sample(&mut rng).exp();
                x[j] *= factor;
                if j != n - j {
                    x[n - j] *= factor;
                }
            }
            inverse.process(&mut x);
            let mut values: Vec<f64> = x.iter().map(|c| c.re / n as f64).collect();
            rescale(&mut values, target);
            for v in values.iter_mut() {
                *v = v.max(0.0);
            }
            rescale(&mut values, target);
            LoadSeries::new(base.start, base.interval, values)
        })
        .collect()
}

fn rescale(values: &mut [f64], target: f64) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if mean > 0.0 {
        let s = target / mean;
        for v in values.iter_mut() {
            *v *= s;
        }
    }
}

/// Per-consumer demand curves.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandSet {
    pub ids: Vec<String>,
    pub series: Vec<LoadSeries>,
}

impl DemandSet {
    pub fn new(ids: Vec<String>, series: Vec<LoadSeries>) -> Result<Self> {
        if ids.len() != series.len() {
            return Err(Error::Input(format!("{} consumer ids but {} series", ids.len(), series.len())));
        }
        let mut seen = HashMap::new();
        for (i, id) in ids.iter().enumerate() {
            if seen.insert(id.as_str(), i).is_some() {
                return Err(Error::Input(format!("duplicate demand series for consumer `{id}`")));
            }
        }
        Ok(Self { ids, series })
    }

    pub fn get(&self, id: &str) -> Option<&LoadSeries> {
        self.ids.iter().position(|i| i == id).map(|i| &self.series[i])
    }
}

/// Settings of demand synthesis from one base curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisConfig {
    pub cutoff: f64,
    pub variations: VariationConfig,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            cutoff: DEFAULT_CUTOFF_HZ,
            variations: VariationConfig::default(),
        }
    }
}

/// Low-pass filters `base` and derives one varied curve per consumer.
pub fn synthesize_demands(
    base: &LoadSeries,
    ids: &[String],
    targets: &[f64],
    config: &SynthesisConfig,
) -> Result<DemandSet> {
    let smooth = lowpass(base, config.cutoff)?;
    let series = synthesize_variations(&smooth, ids, targets, &config.variations)?;
    DemandSet::new(ids.to_vec(), series)
}

/// Equal shares of the base mean.
pub fn equal_share_targets(base: &LoadSeries, consumers: usize) -> Vec<f64> {
    vec![base.mean() / consumers as f64; consumers]
}

pub fn write_demands(demands: &DemandSet, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| write_err(path, e))?;
    w.write_record(DEMAND_HEADER).map_err(|e| write_err(path, e))?;
    for (id, s) in demands.ids.iter().zip(&demands.series) {
        for (i, v) in s.values.iter().enumerate() {
            w.write_record([s.time(i).to_string(), id.clone(), v.to_string()])
                .map_err(|e| write_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads demand curves; every consumer's samples must be uniformly spaced.
pub fn read_demands(path: &Path) -> Result<DemandSet> {
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(f64, f64)>> = HashMap::new();
    read_csv_rows(path, &DEMAND_HEADER, |_, r| {
        let t = parse_f64(&r[0], "time_s")?;
        let v = parse_f64(&r[2], "power_w")?;
        if v < 0.0 {
            return Err(format!("power must be >= 0, got {v}"));
        }
        let id = r[1].to_string();
        if !rows.contains_key(&id) {
            order.push(id.clone());
        }
        rows.entry(id).or_default().push((t, v));
        Ok(())
    })?;
    let mut series = Vec::with_capacity(order.len());
    for id in &order {
        let s = &rows[id];
        if s.len() < 2 {
            return Err(Error::Input(format!("consumer `{id}` needs at least two demand samples")));
        }
        let interval = s[1].0 - s[0].0;
        let uniform = interval > 0.0
            && s.windows(2).all(|w| ((w[1].0 - w[0].0) - interval).abs() <= SPACING_TOL * interval.max(1.0));
        if !uniform {
            return Err(Error::Input(format!("demand samples of consumer `{id}` are not uniformly spaced")));
        }
        series.push(LoadSeries::new(s[0].0, interval, s.iter().map(|p| p.1).collect())?);
    }
    DemandSet::new(order, series)
}

/// Price knots, €/MWh, linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub times: Vec<f64>,
    pub prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(times: Vec<f64>, prices: Vec<f64>) -> Result<Self> {
        if times.len() != prices.len() || times.len() < 2 {
            return Err(Error::Input("a price series needs matching times and prices, at least two".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Input("price knot times must be strictly increasing".into()));
        }
        if prices.iter().any(|p| !p.is_finite()) {
            return Err(Error::Input("prices must be finite".into()));
        }
        Ok(Self { times, prices })
    }

    pub fn resample(&self, grid: &TimeGrid<f64>) -> Result<Vec<f64>> {
        resample_to_grid(&self.times, &self.prices, grid)
    }
}

pub fn read_price_series(path: &Path) -> Result<PriceSeries> {
    let mut times = Vec::new();
    let mut prices = Vec::new();
    read_csv_rows(path, &PRICE_HEADER, |_, r| {
        times.push(parse_f64(&r[0], "time_s")?);
        prices.push(parse_f64(&r[1], "price_eur_mwh")?);
        Ok(())
    })?;
    PriceSeries::new(times, prices).map_err(|e| match e {
        Error::Input(m) => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: m,
        },
        other => other,
    })
}

pub fn write_price_series(series: &PriceSeries, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| write_err(path, e))?;
    w.write_record(PRICE_HEADER).map_err(|e| write_err(path, e))?;
    for (t, p) in series.times.iter().zip(&series.prices) {
        w.write_record([t.to_string(), p.to_string()]).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Piecewise-linear interpolation of `(times, values)` at grid times `t_0..=t_N`.
pub fn resample_to_grid(times: &[f64], values: &[f64], grid: &TimeGrid<f64>) -> Result<Vec<f64>> {
    assert_eq!(times.len(), values.len());
    let (Some(&first), Some(&last)) = (times.first(), times.last()) else {
        return Err(Error::Input("cannot resample an empty series".into()));
    };
    let slack = 1e-9 * grid.dt();
    if first > slack || last < grid.horizon() - slack {
        return Err(Error::Input(format!(
            "series covers [{first}, {last}] s but the grid spans [0, {}] s",
            grid.horizon()
        )));
    }
    let mut j = 0;
    Ok(grid
        .times()
        .into_iter()
        .map(|t| {
            let t = t.clamp(first, last);
            while j + 2 < times.len() && times[j + 1] <= t {
                j += 1;
            }
            if times.len() == 1 {
                return values[0];
            }
            let (t0, t1) = (times[j], times[j + 1]);
            if t == t0 {
                return values[j];
            }
            if t == t1 {
                return values[j + 1];
            }
            let w = (t - t0) / (t1 - t0);
            values[j] + w * (values[j + 1] - values[j])
        })
        .collect())
}

/// Inputs of [`build_scenario`].
#[derive(Debug, Clone)]
pub struct ScenarioInputs<'a> {
    pub graph: &'a NetworkGraph<f64>,
    pub flow: &'a FlowField<f64>,
    pub demands: &'a DemandSet,
    /// `None` selects the static price model.
    pub prices: Option<&'a PriceSeries>,
    pub constraints: ConstraintSet<f64>,
    pub grid: TimeGrid<f64>,
    pub constants: PhysicalConstants<f64>,
    pub ambient: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// A complete time-dependent scenario on the simulation grid.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub grid: TimeGrid<f64>,
    pub system: ThermalSystem<f64>,
    pub forcing: Forcing<f64>,
    pub price: PriceModel<f64>,
    pub constraints: ConstraintSet<f64>,
    /// `demand[k * consumers + c]`, W.
    pub demand: Vec<f64>,
}

pub fn build_scenario(inputs: &ScenarioInputs<'_>) -> Result<Scenario> {
    inputs.constraints.validate()?;
    let grid = inputs.grid;
    let system = ThermalSystem::build(inputs.graph, inputs.flow, &inputs.constants, grid.dt())?;
    let consumers = system.consumers();
    let nc = consumers.len();
    for id in &inputs.demands.ids {
        if !consumers.iter().any(|c| &c.edge_id == id) {
            return Err(Error::Input(format!("demand series for `{id}`, which is not a consumer edge")));
        }
    }
    let mut demand = vec![0.0; (grid.steps() + 1) * nc];
    let mut deltas = vec![0.0; (grid.steps() + 1) * nc];
    let cp = inputs.constants.heat_capacity;
    // Drops beyond this would put the return below absolute zero.
    let max_drop = inputs.constraints.plant_max + 273.15;
    for (c, link) in consumers.iter().enumerate() {
        let series = inputs
            .demands
            .get(&link.edge_id)
            .ok_or_else(|| Error::Input(format!("no demand series for consumer edge `{}`", link.edge_id)))?;
        let on_grid = series.resample(&grid)?;
        for (k, phi) in on_grid.into_iter().enumerate() {
            let d = demand_to_delta(phi, link.massflow, cp);
            if d > max_drop {
                return Err(Error::Input(format!(
                    "demand of consumer `{}` at t = {} s implies a {d:.1} °C drop, below absolute zero",
                    link.edge_id,
                    grid.time(k)
                )));
            }
            demand[k * nc + c] = phi;
            deltas[k * nc + c] = d;
        }
    }
    let forcing = Forcing::new(grid.steps(), nc, vec![inputs.ambient; grid.steps() + 1], deltas)?;
    let price = match inputs.prices {
        None => PriceModel::Static,
        Some(p) => PriceModel::dynamic(p.resample(&grid)?, inputs.alpha, inputs.beta)?,
    };
    Ok(Scenario {
        grid,
        system,
        forcing,
        price,
        constraints: inputs.constraints,
        demand,
    })
}

impl Scenario {
    pub fn consumers(&self) -> usize {
        self.system.consumers().len()
    }

    /// Price at every grid time, €/MWh; `None` for the static model.
    pub fn prices(&self) -> Option<&[f64]> {
        match &self.price {
            PriceModel::Static => None,
            PriceModel::Dynamic { prices, .. } => Some(prices),
        }
    }

    pub fn objective_config(&self) -> ObjectiveConfig<f64> {
        let mut cfg = ObjectiveConfig::new(self.price.clone());
        cfg.constraints = self.constraints;
        cfg
    }

    /// Optimal-control problem on this scenario with the given objective settings.
    pub fn problem(&self, config: ObjectiveConfig<f64>, initial: InitialState<f64>) -> Result<Problem<f64>> {
        Problem::new(self.system.clone(), self.forcing.clone(), initial, config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(n: usize, interval: f64, f: f64, amp: f64, offset: f64) -> LoadSeries {
        let v = (0..n).map(|i| offset + amp * (2.0 * PI * f * i as f64 * interval).sin()).collect();
        LoadSeries::new(0.0, interval, v).unwrap()
    }

    #[test]
    fn constant_series_passes_unchanged() {
        let s = LoadSeries::new(0.0, 900.0, vec![1234.5; 289]).unwrap();
        let out = lowpass(&s, DEFAULT_CUTOFF_HZ).unwrap();
        for v in &out.values {
            assert!((v - 1234.5).abs() < 1e-9 * 1234.5);
        }
    }

    #[test]
    fn section_magnitude_matches_analog_butterworth_at_cutoff() {
        let fs = 1.0 / 900.0;
        let sec = butterworth_sections(4, DEFAULT_CUTOFF_HZ, fs).unwrap();
        let h: f64 = sec.iter().map(|s| s.magnitude(DEFAULT_CUTOFF_HZ, fs)).product();
        assert!((h - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        let dc: f64 = sec.iter().map(|s| s.magnitude(0.0, fs)).product();
        assert!((dc - 1.0).abs() < 1e-14);
    }

    #[test]
    fn daily_cycle_passes_nearly_unattenuated() {
        let fs = 1.0 / 900.0;
        let f = 1.0 / 86_400.0;
        let sec = butterworth_sections(4, DEFAULT_CUTOFF_HZ, fs).unwrap();
        let h: f64 = sec.iter().map(|s| s.magnitude(f, fs)).product();
        let analog = 1.0 / (1.0 + (f / DEFAULT_CUTOFF_HZ).powi(8)).sqrt();
        assert!((f / DEFAULT_CUTOFF_HZ - 0.1667).abs() < 1e-3);
        assert!(h > 0.9999 && (h - analog).abs() < 1e-4);
    }

    #[test]
    fn ten_times_cutoff_is_removed() {
        let interval = 60.0;
        let fc = DEFAULT_CUTOFF_HZ;
        let x: Vec<f64> = (0..6000).map(|i| (2.0 * PI * 10.0 * fc * i as f64 * interval).sin()).collect();
        let raw: Vec<f64> = filtfilt(
            &butterworth_sections(4, fc, 1.0 / interval).unwrap(),
            &x,
            settling_length(fc, interval),
        );
        let amp = raw[1000..5000].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(20.0 * amp.log10() <= -60.0, "{amp}");
    }

    #[test]
    fn band_limited_signal_is_a_fixed_point() {
        let interval = 900.0;
        let s = sine(2000, interval, DEFAULT_CUTOFF_HZ / 8.0, 100.0, 1000.0);
        let once = lowpass(&s, DEFAULT_CUTOFF_HZ).unwrap();
        let twice = lowpass(&once, DEFAULT_CUTOFF_HZ).unwrap();
        for (a, b) in once.values[200..1800].iter().zip(&twice.values[200..1800]) {
            assert!((a - b).abs() <= 1e-6 * a.abs());
        }
    }

    #[test]
    fn short_series_and_bad_cutoff_are_rejected() {
        let s = LoadSeries::new(0.0, 900.0, vec![1.0; 20]).unwrap();
        assert!(lowpass(&s, DEFAULT_CUTOFF_HZ).is_err());
        let s = LoadSeries::new(0.0, 900.0, vec![1.0; 300]).unwrap();
        assert!(lowpass(&s, 1.0).is_err());
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn zero_sigma_reproduces_the_base_shape() {
        let base = sine(289, 900.0, 1.0 / 86_400.0, 300.0, 1000.0);
        let cfg = VariationConfig { sigma: 0.0, ..Default::default() };
        let out = synthesize_variations(&base, &ids(3), &[500.0, 1000.0, 2000.0], &cfg).unwrap();
        for (s, t) in out.iter().zip([0.5, 1.0, 2.0]) {
            for (a, b) in s.values.iter().zip(&base.values) {
                assert!((a - t * b).abs() < 1e-9 * b);
            }
        }
    }

    #[test]
    fn variations_hit_target_means_and_are_seeded() {
        let base = sine(289, 900.0, 1.0 / 86_400.0, 300.0, 1000.0);
        let cfg = VariationConfig { sigma: 0.5, seed: 7, ..Default::default() };
        let targets = [100.0, 200.0, 300.0, 400.0];
        let a = synthesize_variations(&base, &ids(4), &targets, &cfg).unwrap();
        let b = synthesize_variations(&base, &ids(4), &targets, &cfg).unwrap();
        assert_eq!(a, b);
        for (s, t) in a.iter().zip(targets) {
            assert!((s.mean() - t).abs() <= 1e-9 * t);
            assert!(s.values.iter().all(|v| *v >= 0.0));
        }
        let other = synthesize_variations(&base, &ids(4), &targets, &VariationConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a, other);
        assert_ne!(a[0].values, a[1].values.iter().map(|v| v / 2.0).collect::<Vec<_>>());
    }

    #[test]
    fn empty_band_is_an_error() {
        let base = sine(16, 900.0, 1.0 / 86_400.0, 3.0, 10.0);
        let cfg = VariationConfig { band: (1.0 / 14_000.0, 1.0 / 13_000.0), ..Default::default() };
        assert!(synthesize_variations(&base, &ids(1), &[1.0], &cfg).is_err());
    }

    #[test]
    fn resampling_prices() {
        let p = PriceSeries::new(vec![0.0, 3600.0, 7200.0], vec![10.0, 20.0, 20.0]).unwrap();
        let grid = TimeGrid::new(1800.0, 4).unwrap();
        assert_eq!(p.resample(&grid).unwrap(), vec![10.0, 15.0, 20.0, 20.0, 20.0]);
        let long = TimeGrid::new(1800.0, 5).unwrap();
        assert!(p.resample(&long).is_err());
        assert!(PriceSeries::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn three_days_at_quarter_hours() {
        let grid = TimeGrid::from_horizon(900.0, 3.0 * 86_400.0).unwrap();
        assert_eq!(grid.steps(), 288);
    }

    #[test]
    fn demand_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let base = sine(50, 900.0, 1.0 / 86_400.0, 300.0, 1000.0);
        let set = DemandSet::new(ids(2), vec![base.clone(), base]).unwrap();
        let path = dir.path().join("d.csv");
        write_demands(&set, &path).unwrap();
        assert_eq!(read_demands(&path).unwrap(), set);
    }

    #[test]
    fn load_file_without_time_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.csv");
        std::fs::write(&path, "power_w\n1\n2\n3\n").unwrap();
        let s = read_load_series(&path).unwrap();
        assert_eq!(s.interval, DEFAULT_SAMPLE_INTERVAL);
        std::fs::write(&path, "time_s,power_w\n0,1\n900,2\n1900,3\n").unwrap();
        assert!(read_load_series(&path).is_err());
    }

    #[test]
    fn consumer_streams_differ_by_id() {
        use rand::Rng;
        let a: u64 = consumer_rng(1, "a").random();
        let b: u64 = consumer_rng(1, "b").random();
        let a2: u64 = consumer_rng(1, "a").random();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }
}
