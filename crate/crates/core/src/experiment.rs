//! Scenario runners that turn the analysis into tables, and the CSV / JSON
//! writers for those tables.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::feasibility::{feasibility_dependent, feasibility_independent, optimal_power_independent};
use crate::gp::{build_grid, dependent_minimum_power, discretize, solve_gp_with, GpOptions, DEFAULT_DENSE_CAP, DEFAULT_SPLIT};
use crate::model::{policy_moments, Layer, NetworkParams, PowerPolicy};
use crate::outage::{outage_dependent_approx, outage_dependent_lower_bound, outage_independent};
use crate::sim::{simulate_outage, PowerControl, SimConfig};

/// First token of the CSV metadata line.
pub const META_TAG: &str = "# d2dpl";

/// A numeric table with `key=value` metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Twelve significant digits; non-finite values as `nan`, `inf`, `-inf`.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.11e}")
    }
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(META_TAG);
        for (k, v) in &self.meta {
            let _ = write!(out, " {k}={v}");
        }
        out.push('\n');
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// JSON with non-finite values as strings, matching the CSV spelling.
    pub fn to_json(&self) -> String {
        let meta: serde_json::Map<String, serde_json::Value> =
            self.meta.iter().map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone()))).collect();
        let rows: Vec<Vec<serde_json::Value>> = self
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|v| match serde_json::Number::from_f64(*v) {
                        Some(n) => serde_json::Value::Number(n),
                        None => serde_json::Value::String(format_number(*v)),
                    })
                    .collect()
            })
            .collect();
        let doc = serde_json::json!({ "meta": meta, "columns": self.columns, "rows": rows });
        serde_json::to_string_pretty(&doc).expect("table serializes") + "\n"
    }
}

/// `steps` evenly spaced values on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..steps)
            .map(|i| if i + 1 == steps { hi } else { lo + (hi - lo) * i as f64 / (steps - 1) as f64 })
            .collect(),
    }
}

fn boundary_table(region: crate::feasibility::FeasibilityRegion, points: usize) -> Table {
    let mut t = Table::new(&["lambda_c", "lambda_d"]);
    for (c, d) in region.boundary(points) {
        t.push(vec![c, d]);
    }
    t
}

/// Boundary polyline of the independent-control region.
pub fn feasibility_independent_table(
    params: &NetworkParams,
    policy_c: &PowerPolicy,
    pd_max: f64,
    points: usize,
) -> Result<Table> {
    Ok(boundary_table(feasibility_independent(params, policy_c, pd_max)?, points))
}

/// Boundary polyline of the dependent-control region.
pub fn feasibility_dependent_table(params: &NetworkParams, policy_c: &PowerPolicy, points: usize) -> Result<Table> {
    Ok(boundary_table(feasibility_dependent(params, policy_c)?, points))
}

/// Optimal fixed D2D power, sampled at the midpoints of the `N`-cell grid.
pub fn optimize_independent_table(
    params: &NetworkParams,
    policy_c: &PowerPolicy,
    pd_max: f64,
    n: usize,
    m: f64,
) -> Result<Table> {
    let sol = optimal_power_independent(params, policy_c, pd_max)?;
    if !sol.feasible {
        return Err(Error::InfeasibleDensities(format!(
            "optimal fixed power {} exceeds the peak {pd_max}",
            sol.p_d0
        )));
    }
    let grid = build_grid(n, m, DEFAULT_SPLIT, DEFAULT_DENSE_CAP)?;
    let mut t = Table::new(&["h", "power"]);
    for w in grid.points().windows(2) {
        t.push(vec![0.5 * (w[0] + w[1]), sol.p_d0]);
    }
    Ok(t)
}

/// The optimal dependent D2D policy, one row per grid cell.
pub fn optimize_dependent_table(params: &NetworkParams, policy_c: &PowerPolicy, n: usize, m: f64) -> Result<Table> {
    let opt = dependent_minimum_power(params, policy_c, n, m)?;
    let mut t = Table::new(&["h_lo", "h_hi", "power"]);
    for (w, p) in opt.grid.points().windows(2).zip(&opt.solution.levels) {
        t.push(vec![w[0], w[1], *p]);
    }
    Ok(t)
}

/// Simulated outage for both layers at each `λ_d`, with the matching
/// analytic value: the exact expression under independent control, the
/// lower bound (and its linearization) under dependent control.
pub fn simulate_table(base: &SimConfig, lambda_d: &[f64]) -> Result<Table> {
    let mut t = Table::new(&["lambda_c", "lambda_d", "layer", "p_hat", "half_width_95", "analytic", "approx"]);
    for &ld in lambda_d {
        let mut cfg = base.clone();
        cfg.params = base.params.with_densities(base.params.lambda_c(), ld)?;
        for (code, layer) in [(0.0, Layer::Cellular), (1.0, Layer::D2d)] {
            let est = simulate_outage(&cfg, layer)?;
            let (analytic, approx) = match cfg.control {
                PowerControl::Independent => {
                    (outage_independent(&cfg.params, &cfg.policy_c, &cfg.policy_d, layer)?, f64::NAN)
                }
                PowerControl::Dependent => {
                    let d = cfg.params.delta();
                    let mc = policy_moments(&cfg.policy_c, d)?;
                    let md = policy_moments(&cfg.policy_d, d)?;
                    (
                        outage_dependent_lower_bound(&cfg.params, &cfg.policy_c, &cfg.policy_d, layer)?,
                        outage_dependent_approx(&cfg.params, &mc, &md, layer),
                    )
                }
            };
            t.push(vec![cfg.params.lambda_c(), ld, code, est.p_hat, est.half_width_95, analytic, approx]);
        }
    }
    Ok(t)
}

fn infeasible_as_nan(r: Result<f64>) -> Result<f64> {
    match r {
        Ok(v) => Ok(v),
        Err(Error::InfeasibleDensities(_) | Error::InfeasibleDiscretization(_)) => Ok(f64::NAN),
        Err(e) => Err(e),
    }
}

/// Mean D2D power of the two schemes across `λ_d`. Infeasible points are
/// `nan`.
pub fn compare_table(
    params: &NetworkParams,
    policy_c: &PowerPolicy,
    pd_max: f64,
    lambda_d: &[f64],
    n: usize,
    m: f64,
) -> Result<Table> {
    let rows = lambda_d
        .par_iter()
        .map(|&ld| -> Result<Vec<f64>> {
            let p = params.with_densities(params.lambda_c(), ld)?;
            let ind = infeasible_as_nan(optimal_power_independent(&p, policy_c, pd_max).map(|s| {
                if s.feasible { s.p_d0 } else { f64::NAN }
            }))?;
            let dep = infeasible_as_nan(dependent_minimum_power(&p, policy_c, n, m).map(|o| o.solution.objective))?;
            Ok(vec![ld, ind, dep, dep / ind])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&["lambda_d", "mean_power_independent", "mean_power_dependent", "ratio"]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

/// Minimized dependent objective for each grid size.
pub fn convergence_table(params: &NetworkParams, policy_c: &PowerPolicy, sizes: &[usize], m: f64) -> Result<Table> {
    let moments_c = policy_moments(policy_c, params.delta())?;
    let feasible = feasibility_dependent(params, policy_c)?.contains(params.lambda_c(), params.lambda_d());
    let rows = sizes
        .par_iter()
        .map(|&n| -> Result<Vec<f64>> {
            if !feasible {
                return Ok(vec![n as f64, f64::NAN, f64::NAN, f64::NAN]);
            }
            let grid = build_grid(n, m, DEFAULT_SPLIT, DEFAULT_DENSE_CAP)?;
            let problem = discretize(&grid, params, &moments_c)?;
            match solve_gp_with(&problem, Some(&grid), GpOptions::default()) {
                Ok(s) => Ok(vec![n as f64, s.objective, s.iterations as f64, s.kkt_residual]),
                Err(Error::InfeasibleDiscretization(_)) => Ok(vec![n as f64, f64::NAN, f64::NAN, f64::NAN]),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&["n", "objective", "iterations", "kkt_residual"]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}
