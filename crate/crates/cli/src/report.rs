//! CSV and JSON renderings of a [`ResultsTable`].

use std::path::{Path, PathBuf};

use csec_core::SimulatorKind;

use crate::error::CliError;
use crate::sweep::{CellResult, ResultsTable};

pub const FEATURES: [&str; 4] = ["hoof", "h2d", "track", "combined"];
pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_JSON: &str = "results.json";

fn feature_value(cell: &CellResult, feature: &str) -> f64 {
    match feature {
        "hoof" => cell.d_hoof,
        "h2d" => cell.d_h2d,
        "track" => cell.d_track,
        _ => cell.d_combined,
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    w.into_inner().map_err(|e| CliError::runtime(e.to_string()))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::runtime(format!("csv: {e}"))
}

/// One feature for one simulator: rows are agent levels, columns speed
/// levels.
pub fn grid_csv(table: &ResultsTable, kind: SimulatorKind, feature: &str) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["agents".to_string()];
    header.extend(table.speed_levels.iter().map(|s| s.name().to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for &a in &table.agent_levels {
        let mut row = vec![a.name().to_string()];
        for &s in &table.speed_levels {
            let cell = table
                .get(kind, a, s)
                .ok_or_else(|| CliError::runtime(format!("missing cell {}/{}/{}", kind.name(), a.name(), s.name())))?;
            row.push(fmt(feature_value(cell, feature)));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

/// Every cell on one line, with its rank.
pub fn results_csv(table: &ResultsTable) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "simulator",
        "agent_level",
        "speed_level",
        "n_agents",
        "speed_scale",
        "d_hoof",
        "d_h2d",
        "d_track",
        "d_combined",
        "rank",
    ])
    .map_err(csv_err)?;
    for c in &table.cells {
        w.write_record([
            c.simulator.name().to_string(),
            c.agent_level.name().to_string(),
            c.speed_level.name().to_string(),
            c.n_agents.to_string(),
            c.speed_scale.to_string(),
            fmt(c.d_hoof),
            fmt(c.d_h2d),
            fmt(c.d_track),
            fmt(c.d_combined),
            c.rank.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Writes the per-simulator grids, `results.csv` and `results.json`.
/// Returns the CSV paths in write order.
pub fn write_results(table: &ResultsTable, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for &kind in &table.simulators {
        for feature in FEATURES {
            let path = out_dir.join(format!("{}_{feature}.csv", kind.name()));
            std::fs::write(&path, grid_csv(table, kind, feature)?)?;
            written.push(path);
        }
    }
    let path = out_dir.join(RESULTS_CSV);
    std::fs::write(&path, results_csv(table)?)?;
    written.push(path);
    let json = serde_json::to_string_pretty(table).map_err(|e| CliError::runtime(e.to_string()))?;
    std::fs::write(out_dir.join(RESULTS_JSON), json + "\n")?;
    Ok(written)
}
