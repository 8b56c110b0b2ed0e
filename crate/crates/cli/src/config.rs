//! Experiment configuration: defaults, config files, flags.
//!
//! Settings are gathered as raw `key=value` strings from a config file and
//! then from flags (flags win), and only then parsed. The same parser reads
//! flat TOML files and the `# d2dpl key=value ...` line at the top of every
//! CSV this tool writes, so an output file can be fed back in as a config.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use d2dpl::experiment::META_TAG;
use d2dpl::gp::default_truncation;
use d2dpl::gp::DEFAULT_TAIL_TOLERANCE;
use d2dpl::{NetworkParams, PowerControl, PowerPolicy};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{origin}: field `{key}`: {reason}")]
    Field { origin: Origin, key: String, reason: String },
    #[error("{path}:{line}: {reason}")]
    Syntax { path: String, line: usize, reason: String },
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Default,
    Flag,
    File { path: String, line: usize },
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Default => write!(f, "default"),
            Origin::Flag => write!(f, "command line"),
            Origin::File { path, line } => write!(f, "{path}:{line}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scenario {
    FeasibilityIndependent,
    FeasibilityDependent,
    OptimizeIndependent,
    OptimizeDependent,
    Simulate,
    Compare,
    Convergence,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::FeasibilityIndependent => "feasibility-independent",
            Scenario::FeasibilityDependent => "feasibility-dependent",
            Scenario::OptimizeIndependent => "optimize-independent",
            Scenario::OptimizeDependent => "optimize-dependent",
            Scenario::Simulate => "simulate",
            Scenario::Compare => "compare",
            Scenario::Convergence => "convergence",
        }
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Scenario as clap::ValueEnum>::from_str(s, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Inclusive sweep `lo:hi:steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        d2dpl::experiment::linspace(self.lo, self.hi, self.steps)
    }
}

impl FromStr for Sweep {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, steps] = parts[..] else {
            return Err(format!("expected lo:hi:steps, got `{s}`"));
        };
        let lo = parse_f64(lo)?;
        let hi = parse_f64(hi)?;
        let steps: usize = steps.parse().map_err(|_| format!("steps must be a positive integer, got `{steps}`"))?;
        if !lo.is_finite() || !hi.is_finite() {
            return Err("sweep bounds must be finite".into());
        }
        if steps == 0 {
            return Err("sweep needs at least one step".into());
        }
        if hi < lo {
            return Err(format!("sweep upper bound {hi} is below lower bound {lo}"));
        }
        if steps > 1 && hi == lo {
            return Err(format!("sweep of {steps} steps over an empty range"));
        }
        Ok(Sweep { lo, hi, steps })
    }
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.steps)
    }
}

/// `const:p` or `frac:k,s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyArg {
    Constant(f64),
    Fractional { scale: f64, exponent: f64 },
}

impl PolicyArg {
    pub fn build(&self) -> d2dpl::Result<PowerPolicy> {
        match *self {
            PolicyArg::Constant(p) => PowerPolicy::constant(p),
            PolicyArg::Fractional { scale, exponent } => PowerPolicy::fractional(scale, exponent),
        }
    }
}

impl FromStr for PolicyArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "const" {
            return Ok(PolicyArg::Constant(1.0));
        }
        if let Some(p) = s.strip_prefix("const:") {
            return Ok(PolicyArg::Constant(parse_f64(p)?));
        }
        if let Some(rest) = s.strip_prefix("frac:") {
            let (k, e) = rest.split_once(',').ok_or_else(|| format!("expected frac:k,s, got `{s}`"))?;
            return Ok(PolicyArg::Fractional { scale: parse_f64(k)?, exponent: parse_f64(e)? });
        }
        Err(format!("expected const, const:p or frac:k,s, got `{s}`"))
    }
}

impl fmt::Display for PolicyArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyArg::Constant(p) => write!(f, "const:{p}"),
            PolicyArg::Fractional { scale, exponent } => write!(f, "frac:{scale},{exponent}"),
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    match s.trim() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        t => t.parse::<f64>().map_err(|_| format!("not a number: `{t}`")),
    }
}

/// Every key a config may set.
pub const KEYS: &[&str] = &[
    "scenario", "lambda_c", "lambda_d", "alpha", "theta_c", "theta_d", "theta_db", "eps_c", "eps_d", "rc", "rd",
    "pc", "pd", "pdmax", "n_grid", "m_trunc", "trials", "seed", "control", "window_radius", "lambda_d_range",
    "s_range", "n_list", "points", "format", "out",
];

/// Raw settings with the place each one came from.
#[derive(Debug, Clone, Default)]
pub struct RawSettings {
    entries: BTreeMap<String, (String, Origin)>,
}

impl RawSettings {
    pub fn set(&mut self, key: &str, value: String, origin: Origin) -> Result<(), ConfigError> {
        let key = key.replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::Field { origin, key, reason: "unknown key".into() });
        }
        self.entries.insert(key, (value, origin));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&(String, Origin)> {
        self.entries.get(key)
    }

    pub fn merge(&mut self, other: RawSettings) {
        self.entries.extend(other.entries);
    }

    /// Reads a flat TOML file, or a file whose first line is an output
    /// header.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Other(format!("cannot read config `{name}`: {e}")))?;
        if let Some(first) = text.lines().next().filter(|l| l.starts_with(META_TAG)) {
            Self::from_header(first, &name)
        } else {
            Self::from_toml(&text, &name)
        }
    }

    pub fn from_header(line: &str, path: &str) -> Result<Self, ConfigError> {
        let mut out = RawSettings::default();
        let origin = Origin::File { path: path.into(), line: 1 };
        for token in line[META_TAG.len()..].split_whitespace() {
            let (k, v) = token.split_once('=').ok_or_else(|| ConfigError::Syntax {
                path: path.into(),
                line: 1,
                reason: format!("expected key=value, got `{token}`"),
            })?;
            out.set(k, v.to_string(), origin.clone())?;
        }
        Ok(out)
    }

    pub fn from_toml(text: &str, path: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(1);
            ConfigError::Syntax { path: path.into(), line, reason: e.message().to_string() }
        })?;
        let mut out = RawSettings::default();
        for (k, v) in table {
            let line = text
                .lines()
                .position(|l| l.trim_start().strip_prefix(k.as_str()).is_some_and(|r| r.trim_start().starts_with('=')))
                .map_or(1, |i| i + 1);
            let origin = Origin::File { path: path.into(), line };
            let value = match v {
                toml::Value::String(s) => s,
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                other => {
                    return Err(ConfigError::Field {
                        origin,
                        key: k,
                        reason: format!("expected a scalar, got {}", other.type_str()),
                    })
                }
            };
            out.set(&k, value, origin)?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub params: NetworkParams,
    pub pc: PolicyArg,
    pub pd: PolicyArg,
    pub pd_max: f64,
    pub n_grid: usize,
    pub m_trunc: f64,
    pub trials: u64,
    pub seed: u64,
    pub control: PowerControl,
    pub window_radius: Option<f64>,
    pub lambda_d_range: Option<Sweep>,
    pub s_range: Option<Sweep>,
    pub n_list: Vec<usize>,
    pub points: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
}

struct Reader<'a> {
    raw: &'a RawSettings,
}

impl Reader<'_> {
    fn get<T>(&self, key: &str, default: T, parse: impl Fn(&str) -> Result<T, String>) -> Result<T, ConfigError> {
        match self.raw.get(key) {
            None => Ok(default),
            Some((v, origin)) => parse(v).map_err(|reason| ConfigError::Field {
                origin: origin.clone(),
                key: key.into(),
                reason,
            }),
        }
    }

    fn opt<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        self.get(key, None, |s| parse(s).map(Some))
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        self.get(key, default, parse_f64)
    }

    fn int<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        self.get(key, default, |s| s.trim().parse().map_err(|_| format!("expected a non-negative integer, got `{s}`")))
    }

    fn origin(&self, key: &str) -> Origin {
        self.raw.get(key).map_or(Origin::Default, |(_, o)| o.clone())
    }
}

fn field_error(origin: Origin, key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field { origin, key: key.into(), reason: reason.into() }
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawSettings) -> Result<Self, ConfigError> {
        let r = Reader { raw };
        let scenario = r
            .opt("scenario", |s| s.parse::<Scenario>())?
            .ok_or_else(|| ConfigError::Other("no scenario given (pass one as the first argument or set `scenario`)".into()))?;

        let d = NetworkParams::builder();
        let theta_db = r.opt("theta_db", parse_f64)?.map(|db| 10f64.powf(db / 10.0));
        let builder = d2dpl::model::ParamsBuilder {
            lambda_c: r.f64("lambda_c", d.lambda_c)?,
            lambda_d: r.f64("lambda_d", d.lambda_d)?,
            r_c: r.f64("rc", d.r_c)?,
            r_d: r.f64("rd", d.r_d)?,
            alpha: r.f64("alpha", d.alpha)?,
            theta_c: r.f64("theta_c", theta_db.unwrap_or(d.theta_c))?,
            theta_d: r.f64("theta_d", theta_db.unwrap_or(d.theta_d))?,
            eps_c: r.f64("eps_c", d.eps_c)?,
            eps_d: r.f64("eps_d", d.eps_d)?,
        };
        let params = builder.build().map_err(|e| match &e {
            d2dpl::Error::InvalidParameter { name, .. } => {
                let key = match *name {
                    "r_c" => "rc",
                    "r_d" => "rd",
                    other => other,
                };
                field_error(r.origin(key), key, e.to_string())
            }
            _ => ConfigError::Other(e.to_string()),
        })?;

        let pc = r.get("pc", PolicyArg::Constant(1.0), str::parse)?;
        let pd = r.get("pd", PolicyArg::Constant(1.0), str::parse)?;
        for (key, arg) in [("pc", pc), ("pd", pd)] {
            arg.build().map_err(|e| field_error(r.origin(key), key, e.to_string()))?;
        }
        let pd_max = r.f64("pdmax", f64::INFINITY)?;
        if pd_max.is_nan() || pd_max <= 0.0 {
            return Err(field_error(r.origin("pdmax"), "pdmax", format!("must be > 0, got {pd_max}")));
        }
        let n_grid: usize = r.int("n_grid", 5000)?;
        if n_grid < 2 || n_grid % 2 != 0 {
            return Err(field_error(r.origin("n_grid"), "n_grid", format!("must be an even number >= 2, got {n_grid}")));
        }
        let m_trunc = r.f64("m_trunc", default_truncation(DEFAULT_TAIL_TOLERANCE))?;
        if !(m_trunc.is_finite() && m_trunc > 0.0) {
            return Err(field_error(r.origin("m_trunc"), "m_trunc", format!("must be finite and > 0, got {m_trunc}")));
        }
        let trials: u64 = r.int("trials", 1_000_000)?;
        if trials == 0 {
            return Err(field_error(r.origin("trials"), "trials", "must be positive"));
        }
        let seed: u64 = r.int("seed", 0)?;
        let control = r.get("control", PowerControl::Independent, |s| match s {
            "independent" => Ok(PowerControl::Independent),
            "dependent" => Ok(PowerControl::Dependent),
            _ => Err(format!("expected independent or dependent, got `{s}`")),
        })?;
        let window_radius = r.opt("window_radius", parse_f64)?;
        if let Some(w) = window_radius {
            if !(w.is_finite() && w > 0.0) {
                return Err(field_error(r.origin("window_radius"), "window_radius", format!("must be finite and > 0, got {w}")));
            }
        }
        let lambda_d_range = r.opt("lambda_d_range", str::parse::<Sweep>)?;
        if let Some(sw) = lambda_d_range {
            if sw.lo < 0.0 {
                return Err(field_error(r.origin("lambda_d_range"), "lambda_d_range", "densities must be >= 0"));
            }
        }
        let s_range = r.opt("s_range", str::parse::<Sweep>)?;
        let n_list = r.get("n_list", vec![500, 1000, 2500, 5000], |s| {
            let v: Vec<usize> = s
                .split(',')
                .map(|t| t.trim().parse::<usize>().map_err(|_| format!("not a grid size: `{t}`")))
                .collect::<Result<_, _>>()?;
            if v.iter().any(|&n| n < 2 || n % 2 != 0) {
                return Err("grid sizes must be even numbers >= 2".into());
            }
            Ok(v)
        })?;
        let points: usize = r.int("points", 101)?;
        if points < 2 {
            return Err(field_error(r.origin("points"), "points", "need at least 2 boundary points"));
        }
        let format = r.get("format", Format::Csv, |s| match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("expected csv or json, got `{s}`")),
        })?;
        let out = r.opt("out", |s| Ok(PathBuf::from(s)))?;

        Ok(Self {
            scenario,
            params,
            pc,
            pd,
            pd_max,
            n_grid,
            m_trunc,
            trials,
            seed,
            control,
            window_radius,
            lambda_d_range,
            s_range,
            n_list,
            points,
            format,
            out,
        })
    }

    /// Every setting that affects the numbers, in a form [`RawSettings`]
    /// reads back to the same values.
    pub fn header(&self) -> Vec<(String, String)> {
        let p = &self.params;
        let mut h: Vec<(&str, String)> = vec![
            ("scenario", self.scenario.name().into()),
            ("lambda_c", p.lambda_c().to_string()),
            ("lambda_d", p.lambda_d().to_string()),
            ("alpha", p.alpha().to_string()),
            ("theta_c", p.theta(d2dpl::Layer::Cellular).to_string()),
            ("theta_d", p.theta(d2dpl::Layer::D2d).to_string()),
            ("eps_c", p.eps(d2dpl::Layer::Cellular).to_string()),
            ("eps_d", p.eps(d2dpl::Layer::D2d).to_string()),
            ("rc", p.r(d2dpl::Layer::Cellular).to_string()),
            ("rd", p.r(d2dpl::Layer::D2d).to_string()),
            ("pc", self.pc.to_string()),
            ("pd", self.pd.to_string()),
            ("pdmax", self.pd_max.to_string()),
            ("n_grid", self.n_grid.to_string()),
            ("m_trunc", self.m_trunc.to_string()),
            ("trials", self.trials.to_string()),
            ("seed", self.seed.to_string()),
            (
                "control",
                match self.control {
                    PowerControl::Independent => "independent".into(),
                    PowerControl::Dependent => "dependent".into(),
                },
            ),
            ("n_list", self.n_list.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")),
            ("points", self.points.to_string()),
        ];
        if let Some(w) = self.window_radius {
            h.push(("window_radius", w.to_string()));
        }
        if let Some(s) = self.lambda_d_range {
            h.push(("lambda_d_range", s.to_string()));
        }
        if let Some(s) = self.s_range {
            h.push(("s_range", s.to_string()));
        }
        h.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}
