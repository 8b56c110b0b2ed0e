use std::io::Write;

use d2dpl::experiment::{self, Table};
use d2dpl::feasibility::{feasibility_dependent, feasibility_independent, FeasibilityRegion};
use d2dpl::{Error, PowerPolicy, SimConfig};

use crate::config::{ExperimentConfig, Format, PolicyArg, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(String),
    #[error("{message}\n  region: {region}")]
    Infeasible { message: String, region: String },
    #[error("{0}")]
    Numeric(Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) | RunError::Io(_) => 1,
            RunError::Infeasible { .. } => 2,
            RunError::Numeric(_) => 3,
        }
    }
}

fn describe(region: &FeasibilityRegion, lambda_c: f64, lambda_d: f64) -> String {
    format!(
        "{:.6e}*lambda_c + {:.6e}*lambda_d <= {:.6e} ({:?}); load at ({lambda_c}, {lambda_d}) is {:.6}",
        region.coef_c,
        region.coef_d,
        region.bound,
        region.case,
        region.load(lambda_c, lambda_d)
    )
}

impl ExperimentConfig {
    fn classify(&self, e: Error, policy_c: &PowerPolicy) -> RunError {
        match e {
            Error::InfeasibleDensities(message) => {
                let p = &self.params;
                let region = match self.scenario {
                    Scenario::OptimizeIndependent => feasibility_independent(p, policy_c, self.pd_max),
                    _ => feasibility_dependent(p, policy_c),
                };
                let region = region
                    .map(|r| describe(&r, p.lambda_c(), p.lambda_d()))
                    .unwrap_or_else(|e| e.to_string());
                RunError::Infeasible { message: format!("infeasible densities: {message}"), region }
            }
            Error::NumericFailure { .. } | Error::NonConvergence { .. } | Error::InfeasibleDiscretization(_) => {
                RunError::Numeric(e)
            }
            other => RunError::Config(other.to_string()),
        }
    }

    pub fn table(&self) -> Result<Table, RunError> {
        let policy_c = self.pc.build().map_err(|e| RunError::Config(e.to_string()))?;
        let p = &self.params;
        let densities = |range: Option<crate::config::Sweep>| range.map_or_else(|| vec![p.lambda_d()], |s| s.values());
        let result = match self.scenario {
            Scenario::FeasibilityIndependent => {
                experiment::feasibility_independent_table(p, &policy_c, self.pd_max, self.points)
            }
            Scenario::FeasibilityDependent => match self.s_range {
                None => experiment::feasibility_dependent_table(p, &policy_c, self.points),
                Some(sweep) => self.exponent_sweep(sweep.values()),
            },
            Scenario::OptimizeIndependent => {
                experiment::optimize_independent_table(p, &policy_c, self.pd_max, self.n_grid, self.m_trunc)
            }
            Scenario::OptimizeDependent => experiment::optimize_dependent_table(p, &policy_c, self.n_grid, self.m_trunc),
            Scenario::Simulate => {
                let policy_d = self.pd.build().map_err(|e| RunError::Config(e.to_string()))?;
                let mut sim = SimConfig::new(p.clone(), policy_c.clone(), policy_d);
                sim.control = self.control;
                sim.trials = self.trials;
                sim.seed = self.seed;
                sim.window_radius = self.window_radius;
                experiment::simulate_table(&sim, &densities(self.lambda_d_range))
            }
            Scenario::Compare => experiment::compare_table(
                p,
                &policy_c,
                self.pd_max,
                &densities(self.lambda_d_range),
                self.n_grid,
                self.m_trunc,
            ),
            Scenario::Convergence => experiment::convergence_table(p, &policy_c, &self.n_list, self.m_trunc),
        };
        let mut table = result.map_err(|e| self.classify(e, &policy_c))?;
        table.meta = self.header();
        Ok(table)
    }

    /// Dependent-region boundaries for fractional cellular policies with the
    /// scale of `--pc` and each exponent in the sweep.
    fn exponent_sweep(&self, exponents: Vec<f64>) -> d2dpl::Result<Table> {
        let scale = match self.pc {
            PolicyArg::Constant(p) => p,
            PolicyArg::Fractional { scale, .. } => scale,
        };
        let mut t = Table::new(&["s", "lambda_c", "lambda_d"]);
        for s in exponents {
            let pol = PowerPolicy::fractional(scale, s)?;
            let inner = experiment::feasibility_dependent_table(&self.params, &pol, self.points)?;
            for row in inner.rows {
                t.push(vec![s, row[0], row[1]]);
            }
        }
        Ok(t)
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<(), RunError> {
    let table = cfg.table()?;
    let text = match cfg.format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    };
    match &cfg.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
