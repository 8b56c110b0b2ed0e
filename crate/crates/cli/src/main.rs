//! `d2dpl`: run one experiment scenario and emit its table as CSV or JSON.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{ConfigError, ExperimentConfig, Origin, RawSettings, Scenario};

#[derive(Debug, Parser)]
#[command(name = "d2dpl", version, about = "Power control experiments for cellular networks with a D2D underlay")]
struct Cli {
    /// Scenario to run. May instead come from the config file.
    #[arg(value_enum)]
    scenario: Option<Scenario>,

    /// Flat TOML file, or a CSV previously written by this tool.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long, allow_hyphen_values = true)]
    lambda_c: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    lambda_d: Option<String>,
    /// Path-loss exponent.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    theta_c: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    theta_d: Option<String>,
    /// SIR threshold for both layers in dB; --theta-c / --theta-d take precedence.
    #[arg(long, allow_hyphen_values = true)]
    theta_db: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    eps_c: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    eps_d: Option<String>,
    /// Cellular link distance.
    #[arg(long, allow_hyphen_values = true)]
    rc: Option<String>,
    /// D2D link distance.
    #[arg(long, allow_hyphen_values = true)]
    rd: Option<String>,
    /// Cellular policy: const, const:p or frac:k,s.
    #[arg(long)]
    pc: Option<String>,
    /// D2D policy for `simulate`: const, const:p or frac:k,s.
    #[arg(long)]
    pd: Option<String>,
    /// Peak D2D power for independent control (`inf` for none).
    #[arg(long)]
    pdmax: Option<String>,
    /// Number of grid cells N for the dependent optimizer.
    #[arg(long)]
    n_grid: Option<String>,
    /// Grid truncation point M.
    #[arg(long)]
    m_trunc: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Power control assumed by `simulate`: independent or dependent.
    #[arg(long)]
    control: Option<String>,
    #[arg(long)]
    window_radius: Option<String>,
    /// D2D density sweep lo:hi:steps for `compare` and `simulate`.
    #[arg(long)]
    lambda_d_range: Option<String>,
    /// Fractional exponent sweep lo:hi:steps for `feasibility-dependent`.
    #[arg(long)]
    s_range: Option<String>,
    /// Comma-separated grid sizes for `convergence`.
    #[arg(long)]
    n_list: Option<String>,
    /// Points per boundary polyline.
    #[arg(long)]
    points: Option<String>,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<String>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
}

impl Cli {
    fn flag_settings(&self) -> Result<RawSettings, ConfigError> {
        let mut raw = RawSettings::default();
        let flags: [(&str, &Option<String>); 25] = [
            ("lambda_c", &self.lambda_c),
            ("lambda_d", &self.lambda_d),
            ("alpha", &self.alpha),
            ("theta_c", &self.theta_c),
            ("theta_d", &self.theta_d),
            ("theta_db", &self.theta_db),
            ("eps_c", &self.eps_c),
            ("eps_d", &self.eps_d),
            ("rc", &self.rc),
            ("rd", &self.rd),
            ("pc", &self.pc),
            ("pd", &self.pd),
            ("pdmax", &self.pdmax),
            ("n_grid", &self.n_grid),
            ("m_trunc", &self.m_trunc),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("control", &self.control),
            ("window_radius", &self.window_radius),
            ("lambda_d_range", &self.lambda_d_range),
            ("s_range", &self.s_range),
            ("n_list", &self.n_list),
            ("points", &self.points),
            ("out", &self.out),
            ("format", &self.format),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                raw.set(k, v.clone(), Origin::Flag)?;
            }
        }
        if let Some(s) = self.scenario {
            raw.set("scenario", s.name().into(), Origin::Flag)?;
        }
        Ok(raw)
    }

    fn settings(&self) -> Result<RawSettings, ConfigError> {
        let mut raw = match &self.config {
            Some(path) => RawSettings::from_file(path)?,
            None => RawSettings::default(),
        };
        raw.merge(self.flag_settings()?);
        Ok(raw)
    }
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("D2DPL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("D2DPL_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let cfg = match cli.settings().and_then(|raw| ExperimentConfig::from_raw(&raw)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    match run::run(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
