//! Problem files: one JSON document with top-level keys `network`, `design`,
//! `costs`, `scenario` (and optional `units`). The demand series and each
//! follower's price series are either inlined as arrays of rows or stored in
//! a CSV file referenced relative to the JSON file:
//!
//! ```json
//! "demand": { "csv": "demand.csv" }
//! ```
//!
//! Series CSVs have a header row, `k` as first column and one row per step
//! `k = 0..T-1`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stackgame_core::{CostParams, DesignSpace, LeaderOverride, Matrix, NetworkModel, Problem, Scenario, Units};

use crate::error::{Error, Result};
use crate::table;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Series {
    Inline(Vec<Vec<f64>>),
    Csv { csv: String },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostsFile {
    r_blocks: Vec<Matrix>,
    /// One series per follower.
    alpha: Vec<Series>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q_leader: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v_leader: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    leader_overrides: Vec<LeaderOverride>,
}

fn default_dt() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    horizon: usize,
    #[serde(default = "default_dt")]
    dt: f64,
    x0: Vec<f64>,
    demand: Series,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    u_prev: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    network: NetworkModel,
    design: DesignSpace,
    costs: CostsFile,
    scenario: ScenarioFile,
    #[serde(default)]
    units: Units,
}

/// Where [`save_problem`] puts the demand and price series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesLayout {
    Inline,
    /// `demand.csv` and `prices_<follower>.csv` next to the JSON file.
    Csv,
}

/// Reads, resolves and validates a problem file.
pub fn load_problem(path: &Path) -> Result<Problem> {
    let problem = read_problem(path)?;
    let report = problem.validate();
    if !report.is_ok() {
        return Err(Error::Validation(report));
    }
    Ok(problem)
}

/// Reads and resolves a problem file without validating it.
pub fn read_problem(path: &Path) -> Result<Problem> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let file: ProblemFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        let inner = e.into_inner();
        Error::parse(path, format!("at `{at}`: {inner}"))
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let horizon = file.scenario.horizon;
    let demand = resolve(base, file.scenario.demand, horizon)?;
    let alpha = file
        .costs
        .alpha
        .into_iter()
        .map(|s| resolve(base, s, horizon))
        .collect::<Result<Vec<_>>>()?;
    let l = file.design.n_leaders();
    let mut network = file.network;
    network.normalize_shapes();
    Ok(Problem {
        network,
        design: file.design,
        costs: CostParams {
            r_blocks: file.costs.r_blocks,
            alpha,
            q_leader: file.costs.q_leader.unwrap_or_else(|| Matrix::zeros(l, l)),
            v_leader: file.costs.v_leader.unwrap_or_else(|| CostParams::default_v_leader(l)),
            leader_overrides: file.costs.leader_overrides,
        },
        scenario: Scenario {
            horizon,
            dt: file.scenario.dt,
            x0: file.scenario.x0,
            demand,
            u_prev: file.scenario.u_prev,
        },
        units: file.units,
    })
}

fn resolve(base: &Path, series: Series, horizon: usize) -> Result<Vec<Vec<f64>>> {
    match series {
        Series::Inline(rows) => Ok(rows),
        Series::Csv { csv } => read_series(&base.join(csv), horizon),
    }
}

/// Reads a `k`-indexed series with exactly `horizon` rows.
pub fn read_series(path: &Path, horizon: usize) -> Result<Vec<Vec<f64>>> {
    let (header, rows) = table::read_csv(path)?;
    if header.first().map(String::as_str) != Some("k") {
        return Err(Error::parse(path, "first column must be `k`"));
    }
    let mut out = Vec::with_capacity(horizon);
    for (r, row) in rows.iter().enumerate() {
        if r >= horizon {
            return Err(Error::parse(path, format!("row {r}: more rows than the horizon {horizon}")));
        }
        let k: usize = row[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, format!("row {r}: step `{}` is not an integer", row[0])))?;
        if k != r {
            return Err(Error::parse(path, format!("row {r}: step {k} out of order")));
        }
        let values = row[1..]
            .iter()
            .enumerate()
            .map(|(c, v)| {
                v.trim().parse::<f64>().map_err(|_| {
                    Error::parse(path, format!("row {r}, column `{}`: `{v}` is not a number", header[c + 1]))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(values);
    }
    if out.len() < horizon {
        return Err(Error::parse(
            path,
            format!("row {}: missing (expected {horizon} rows)", out.len()),
        ));
    }
    Ok(out)
}

fn write_series(path: &Path, names: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut header = vec!["k".to_string()];
    header.extend(names.iter().cloned());
    let body = rows
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let mut cells = vec![k.to_string()];
            cells.extend(row.iter().map(|v| v.to_string()));
            cells
        })
        .collect::<Vec<_>>();
    table::write_csv(path, &header, &body)
}

/// Writes `problem` as a JSON file; with [`SeriesLayout::Csv`] the series go
/// to CSV files next to it. Returns every file written.
pub fn save_problem(problem: &Problem, path: &Path, layout: SeriesLayout) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let (demand, alpha) = match layout {
        SeriesLayout::Inline => (
            Series::Inline(problem.scenario.demand.clone()),
            problem.costs.alpha.iter().cloned().map(Series::Inline).collect(),
        ),
        SeriesLayout::Csv => {
            let dir = path.parent().unwrap_or(Path::new("."));
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let demand_names: Vec<String> = (0..problem.network.n_d).map(|d| format!("d{d}")).collect();
            let demand_path = dir.join("demand.csv");
            write_series(&demand_path, &demand_names, &problem.scenario.demand)?;
            written.push(demand_path);
            let mut alpha = Vec::new();
            for (i, series) in problem.costs.alpha.iter().enumerate() {
                let file = format!("prices_{}.csv", table::file_stem(&problem.network.followers[i]));
                let names: Vec<String> = (0..problem.network.n_u(i)).map(|c| format!("u{c}")).collect();
                let p = dir.join(&file);
                write_series(&p, &names, series)?;
                written.push(p);
                alpha.push(Series::Csv { csv: file });
            }
            (Series::Csv { csv: "demand.csv".into() }, alpha)
        }
    };
    let file = ProblemFile {
        network: problem.network.clone(),
        design: problem.design.clone(),
        costs: CostsFile {
            r_blocks: problem.costs.r_blocks.clone(),
            alpha,
            q_leader: Some(problem.costs.q_leader.clone()),
            v_leader: Some(problem.costs.v_leader.clone()),
            leader_overrides: problem.costs.leader_overrides.clone(),
        },
        scenario: ScenarioFile {
            horizon: problem.scenario.horizon,
            dt: problem.scenario.dt,
            x0: problem.scenario.x0.clone(),
            demand,
            u_prev: problem.scenario.u_prev.clone(),
        },
        units: problem.units.clone(),
    };
    let json = serde_json::to_string_pretty(&file).map_err(|e| Error::parse(path, e.to_string()))?;
    table::write_text(path, &(json + "\n"))?;
    written.insert(0, path.to_path_buf());
    Ok(written)
}
