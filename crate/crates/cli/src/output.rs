use std::fs;
use std::path::Path;

use dhn_core::thermal::ControlTrajectory;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::metrics::RunSeries;

pub const CONTROL_FILE: &str = "control.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const BALANCE_FILE: &str = "energy_balance.csv";
pub const STORED_ENERGY_FILE: &str = "stored_energy.csv";
pub const QUANTILE_FILE: &str = "quantiles.csv";
pub const INITIAL_STATE_FILE: &str = "initial_state.csv";
pub const FINAL_STATE_FILE: &str = "final_state.csv";
pub const STATE_HEADER: [&str; 2] = ["node_id", "temperature_c"];

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))
}

fn writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::write(path, e))
}

/// Writes a header and rows of numbers; every float in shortest round-trip form.
pub fn write_table<H: AsRef<str>>(path: &Path, header: &[H], rows: impl IntoIterator<Item = Vec<f64>>) -> CliResult<()> {
    let mut w = writer(path)?;
    let fail = |e: csv::Error| CliError::write(path, e);
    w.write_record(header.iter().map(|h| h.as_ref())).map_err(fail)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::write(path, e))
}

pub fn write_json<V: Serialize>(path: &Path, value: &V) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::write(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::write(path, e))
}

pub fn write_state(path: &Path, ids: &[&str], state: &[f64]) -> CliResult<()> {
    let mut w = writer(path)?;
    let fail = |e: csv::Error| CliError::write(path, e);
    w.write_record(STATE_HEADER).map_err(fail)?;
    for (id, t) in ids.iter().zip(state) {
        w.write_record([id.to_string(), t.to_string()]).map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::write(path, e))
}

fn reader(path: &Path) -> CliResult<csv::Reader<fs::File>> {
    csv::Reader::from_path(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn number(path: &Path, line: usize, s: &str) -> CliResult<f64> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Input(format!("{}:{line}: `{s}` is not a number", path.display())))
}

/// Reads `node_id,temperature_c` rows.
pub fn read_state(path: &Path) -> CliResult<Vec<(String, f64)>> {
    let mut r = reader(path)?;
    let header = r.headers().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if header.iter().map(str::trim).ne(STATE_HEADER) {
        return Err(CliError::Input(format!(
            "{}: expected header `{}`",
            path.display(),
            STATE_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if rec.len() != 2 {
            return Err(CliError::Input(format!("{}:{}: expected 2 fields", path.display(), i + 2)));
        }
        out.push((rec[0].trim().to_string(), number(path, i + 2, &rec[1])?));
    }
    Ok(out)
}

/// Reads a control file with header `time_s,<plant id>...` and `steps` rows.
/// Columns are matched by plant id, so their order is free.
pub fn read_control(path: &Path, plant_ids: &[&str], steps: usize) -> CliResult<ControlTrajectory<f64>> {
    let mut r = reader(path)?;
    let header = r
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .clone();
    let mut columns = Vec::with_capacity(plant_ids.len());
    for id in plant_ids {
        let col = header
            .iter()
            .position(|h| h.trim() == *id)
            .ok_or_else(|| CliError::Input(format!("{}: no column for plant edge `{id}`", path.display())))?;
        columns.push(col);
    }
    let mut values = Vec::with_capacity(steps * plant_ids.len());
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        for &c in &columns {
            values.push(number(path, i + 2, &rec[c])?);
        }
        rows += 1;
    }
    if rows != steps {
        return Err(CliError::Input(format!(
            "{}: {rows} control rows, the time grid has {steps} steps",
            path.display()
        )));
    }
    Ok(ControlTrajectory::from_values(plant_ids.len(), steps, values)?)
}

/// Writes the per-step files of one trajectory into `dir`.
pub fn write_run(dir: &Path, series: &RunSeries, plant_ids: &[&str]) -> CliResult<()> {
    create_dir(dir)?;
    let n = series.times.len();
    let t = &series.times;

    let mut header = vec!["time_s"];
    header.extend(plant_ids);
    write_table(
        &dir.join(CONTROL_FILE),
        &header,
        (0..n).map(|k| {
            let mut row = vec![t[k]];
            row.extend(series.control.at(k));
            row
        }),
    )?;

    write_table(
        &dir.join(TRAJECTORY_FILE),
        &["time_s", "min_consumer_supply_c", "min_consumer_return_c", "plant_power_w", "step_loss"],
        (0..n).map(|k| {
            vec![
                t[k],
                series.min_supply[k],
                series.min_return[k],
                series.plant_power[k],
                series.step_loss[k],
            ]
        }),
    )?;

    write_table(
        &dir.join(BALANCE_FILE),
        &[
            "time_s",
            "plant_injection_w",
            "consumer_extraction_w",
            "ambient_loss_w",
            "storage_rate_w",
            "residual_w",
            "rounding_w",
            "relative_residual",
        ],
        series.balance.iter().enumerate().map(|(k, b)| {
            vec![
                t[k],
                b.plant_injection,
                b.consumer_extraction,
                b.ambient_loss,
                b.storage_rate,
                b.residual(),
                b.rounding,
                b.relative_residual(),
            ]
        }),
    )?;

    write_table(
        &dir.join(STORED_ENERGY_FILE),
        &["time_s", "relative_to_ambient_j", "relative_to_initial_j"],
        (0..n).map(|k| vec![t[k], series.stored_ambient[k], series.stored_initial[k]]),
    )?;

    let q = &series.quantiles;
    let mut header = vec!["time_s".to_string(), "min_c".to_string()];
    header.extend(q.levels.iter().map(|l| format!("q{:02}_c", (l * 100.0).round() as u32)));
    header.push("median_c".to_string());
    write_table(
        &dir.join(QUANTILE_FILE),
        &header,
        (0..n).map(|k| {
            let mut row = vec![t[k], q.min[k]];
            row.extend(&q.bands[k]);
            row.push(q.median[k]);
            row
        }),
    )
}

/// Sum of the `step_loss` column of a trajectory file.
pub fn sum_step_loss(path: &Path) -> CliResult<f64> {
    let mut r = reader(path)?;
    let header = r
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .clone();
    let col = header
        .iter()
        .position(|h| h == "step_loss")
        .ok_or_else(|| CliError::Input(format!("{}: no `step_loss` column", path.display())))?;
    let mut total = 0.0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        total += number(path, i + 2, &rec[col])?;
    }
    Ok(total)
}
