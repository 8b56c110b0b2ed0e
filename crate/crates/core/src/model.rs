//! Network parameters, power policies and their moments under Rayleigh
//! fading (unit-mean exponential power gain `h`).

use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, MomentKind, Result};
use crate::quad;
use crate::special::{gamma, incomplete_gamma_between};

/// The two layers sharing the uplink band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Cellular,
    D2d,
}

impl Layer {
    pub const BOTH: [Layer; 2] = [Layer::Cellular, Layer::D2d];
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Layer::Cellular => write!(f, "cellular"),
            Layer::D2d => write!(f, "d2d"),
        }
    }
}

/// `2 / alpha`.
pub fn derive_delta(alpha: f64) -> f64 {
    2.0 / alpha
}

/// Interference-geometry constant of the independent-control outage:
/// `π² / sin(πδ) · δ · θ^δ · r²`.
pub fn phi(theta: f64, r: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::DeltaOutOfRange { delta });
    }
    Ok(PI * PI / (PI * delta).sin() * delta * theta.powf(delta) * r * r)
}

/// Interference-geometry constant of the dependent-control bound:
/// `π r² θ^δ Γ(1 + δ)`.
pub fn psi(theta: f64, r: f64, delta: f64) -> f64 {
    PI * r * r * theta.powf(delta) * gamma(1.0 + delta)
}

/// Validated network parameters. Construct through [`NetworkParams::builder`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkParams {
    lambda_c: f64,
    lambda_d: f64,
    r_c: f64,
    r_d: f64,
    alpha: f64,
    delta: f64,
    theta_c: f64,
    theta_d: f64,
    eps_c: f64,
    eps_d: f64,
}

/// Builder for [`NetworkParams`]. Starts from θ = 0.1, ε = 0.01, r = 1,
/// α = 2/0.75 and densities of 0.001 for both layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamsBuilder {
    pub lambda_c: f64,
    pub lambda_d: f64,
    pub r_c: f64,
    pub r_d: f64,
    pub alpha: f64,
    pub theta_c: f64,
    pub theta_d: f64,
    pub eps_c: f64,
    pub eps_d: f64,
}

impl Default for ParamsBuilder {
    fn default() -> Self {
        Self {
            lambda_c: 1e-3,
            lambda_d: 1e-3,
            r_c: 1.0,
            r_d: 1.0,
            alpha: 2.0 / 0.75,
            theta_c: 0.1,
            theta_d: 0.1,
            eps_c: 0.01,
            eps_d: 0.01,
        }
    }
}

impl ParamsBuilder {
    pub fn densities(mut self, lambda_c: f64, lambda_d: f64) -> Self {
        self.lambda_c = lambda_c;
        self.lambda_d = lambda_d;
        self
    }

    pub fn link_distances(mut self, r_c: f64, r_d: f64) -> Self {
        self.r_c = r_c;
        self.r_d = r_d;
        self
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn delta(mut self, delta: f64) -> Self {
        self.alpha = 2.0 / delta;
        self
    }

    pub fn thresholds(mut self, theta_c: f64, theta_d: f64) -> Self {
        self.theta_c = theta_c;
        self.theta_d = theta_d;
        self
    }

    pub fn outage_targets(mut self, eps_c: f64, eps_d: f64) -> Self {
        self.eps_c = eps_c;
        self.eps_d = eps_d;
        self
    }

    pub fn build(self) -> Result<NetworkParams> {
        fn density(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("density must be finite and >= 0, got {v}")))
            }
        }
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be finite and > 0, got {v}")))
            }
        }
        fn probability(name: &'static str, v: f64) -> Result<()> {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must lie in (0, 1), got {v}")))
            }
        }
        density("lambda_c", self.lambda_c)?;
        density("lambda_d", self.lambda_d)?;
        positive("r_c", self.r_c)?;
        positive("r_d", self.r_d)?;
        positive("alpha", self.alpha)?;
        positive("theta_c", self.theta_c)?;
        positive("theta_d", self.theta_d)?;
        probability("eps_c", self.eps_c)?;
        probability("eps_d", self.eps_d)?;
        Ok(NetworkParams {
            lambda_c: self.lambda_c,
            lambda_d: self.lambda_d,
            r_c: self.r_c,
            r_d: self.r_d,
            alpha: self.alpha,
            delta: derive_delta(self.alpha),
            theta_c: self.theta_c,
            theta_d: self.theta_d,
            eps_c: self.eps_c,
            eps_d: self.eps_d,
        })
    }
}

/// Largest outage target for which fixed power is optimal among
/// independent policies.
pub const EPS_ASSUMPTION_MAX: f64 = 1.0 - 1.0 / std::f64::consts::E;

impl NetworkParams {
    pub fn builder() -> ParamsBuilder {
        ParamsBuilder::default()
    }

    pub fn to_builder(&self) -> ParamsBuilder {
        ParamsBuilder {
            lambda_c: self.lambda_c,
            lambda_d: self.lambda_d,
            r_c: self.r_c,
            r_d: self.r_d,
            alpha: self.alpha,
            theta_c: self.theta_c,
            theta_d: self.theta_d,
            eps_c: self.eps_c,
            eps_d: self.eps_d,
        }
    }

    /// Same parameters at different densities.
    pub fn with_densities(&self, lambda_c: f64, lambda_d: f64) -> Result<Self> {
        self.to_builder().densities(lambda_c, lambda_d).build()
    }

    pub fn lambda_c(&self) -> f64 {
        self.lambda_c
    }
    pub fn lambda_d(&self) -> f64 {
        self.lambda_d
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn lambda(&self, layer: Layer) -> f64 {
        match layer {
            Layer::Cellular => self.lambda_c,
            Layer::D2d => self.lambda_d,
        }
    }

    pub fn r(&self, layer: Layer) -> f64 {
        match layer {
            Layer::Cellular => self.r_c,
            Layer::D2d => self.r_d,
        }
    }

    pub fn theta(&self, layer: Layer) -> f64 {
        match layer {
            Layer::Cellular => self.theta_c,
            Layer::D2d => self.theta_d,
        }
    }

    pub fn eps(&self, layer: Layer) -> f64 {
        match layer {
            Layer::Cellular => self.eps_c,
            Layer::D2d => self.eps_d,
        }
    }

    /// `ln(1 / (1 - ε))` for the layer.
    pub fn log_target(&self, layer: Layer) -> f64 {
        -(-self.eps(layer)).ln_1p()
    }

    pub fn phi(&self, layer: Layer) -> Result<f64> {
        phi(self.theta(layer), self.r(layer), self.delta)
    }

    pub fn psi(&self, layer: Layer) -> f64 {
        psi(self.theta(layer), self.r(layer), self.delta)
    }

    pub(crate) fn require_delta_below_one(&self) -> Result<()> {
        if self.delta < 1.0 {
            Ok(())
        } else {
            Err(Error::DeltaOutOfRange { delta: self.delta })
        }
    }

    pub(crate) fn require_eps_assumption(&self, layer: Layer) -> Result<()> {
        let eps = self.eps(layer);
        if eps <= EPS_ASSUMPTION_MAX {
            Ok(())
        } else {
            Err(Error::AssumptionViolated(format!(
                "eps_{} = {eps} exceeds 1 - 1/e",
                match layer {
                    Layer::Cellular => "c",
                    Layer::D2d => "d",
                }
            )))
        }
    }
}

/// Shape of a power policy. `h` below is the transmitter's own direct-link
/// power gain.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    Constant { level: f64 },
    /// `P = scale · h^{-exponent}`
    Fractional { scale: f64, exponent: f64 },
    /// `P = levels[i]` for `h ∈ [grid[i], grid[i+1])`, zero beyond the last
    /// grid point.
    PiecewiseConstant { grid: Vec<f64>, levels: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerPolicy {
    kind: PolicyKind,
    peak: Option<f64>,
}

impl PowerPolicy {
    pub fn constant(level: f64) -> Result<Self> {
        if !(level.is_finite() && level > 0.0) {
            return Err(Error::param("level", format!("constant power must be > 0, got {level}")));
        }
        Ok(Self {
            kind: PolicyKind::Constant { level },
            peak: None,
        })
    }

    pub fn fractional(scale: f64, exponent: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::param("scale", format!("must be > 0, got {scale}")));
        }
        if !(exponent.is_finite() && exponent >= 0.0) {
            return Err(Error::param("exponent", format!("must be >= 0, got {exponent}")));
        }
        Ok(Self {
            kind: PolicyKind::Fractional { scale, exponent },
            peak: None,
        })
    }

    pub fn piecewise(grid: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() || grid.len() != levels.len() + 1 {
            return Err(Error::InvalidGrid(format!(
                "{} grid points for {} levels",
                grid.len(),
                levels.len()
            )));
        }
        if !(grid[0] >= 0.0) || grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGrid("grid must be finite and start at >= 0".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
        }
        if levels.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::param("levels", "levels must be finite and >= 0"));
        }
        Ok(Self {
            kind: PolicyKind::PiecewiseConstant { grid, levels },
            peak: None,
        })
    }

    /// Attaches a peak-power limit. The limit is a constraint the policy must
    /// already satisfy, not a clipping rule.
    pub fn with_peak(mut self, peak: f64) -> Result<Self> {
        if !(peak > 0.0) {
            return Err(Error::param("peak", format!("must be > 0, got {peak}")));
        }
        if self.max_level() > peak {
            return Err(Error::param(
                "peak",
                format!("policy reaches {} above peak {peak}", self.max_level()),
            ));
        }
        self.peak = Some(peak);
        Ok(self)
    }

    pub fn kind(&self) -> &PolicyKind {
        &self.kind
    }

    pub fn peak(&self) -> Option<f64> {
        self.peak
    }

    pub fn constant_level(&self) -> Option<f64> {
        match self.kind {
            PolicyKind::Constant { level } => Some(level),
            PolicyKind::Fractional { scale, exponent } if exponent == 0.0 => Some(scale),
            _ => None,
        }
    }

    /// Supremum of the power over all fades.
    pub fn max_level(&self) -> f64 {
        match &self.kind {
            PolicyKind::Constant { level } => *level,
            PolicyKind::Fractional { scale, exponent } => {
                if *exponent == 0.0 {
                    *scale
                } else {
                    f64::INFINITY
                }
            }
            PolicyKind::PiecewiseConstant { levels, .. } => levels.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Power transmitted when the direct-link gain is `h`.
    pub fn level(&self, h: f64) -> f64 {
        match &self.kind {
            PolicyKind::Constant { level } => *level,
            PolicyKind::Fractional { scale, exponent } => {
                if *exponent == 0.0 {
                    *scale
                } else {
                    scale * h.powf(-exponent)
                }
            }
            PolicyKind::PiecewiseConstant { grid, levels } => {
                if h < grid[0] || h >= grid[grid.len() - 1] {
                    return 0.0;
                }
                let idx = grid.partition_point(|x| *x <= h) - 1;
                levels[idx]
            }
        }
    }

    /// Same policy with every level multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let scaled = match &self.kind {
            PolicyKind::Constant { level } => Self::constant(level * factor)?,
            PolicyKind::Fractional { scale, exponent } => Self::fractional(scale * factor, *exponent)?,
            PolicyKind::PiecewiseConstant { grid, levels } => {
                Self::piecewise(grid.clone(), levels.iter().map(|p| p * factor).collect())?
            }
        };
        match self.peak {
            Some(peak) => scaled.with_peak(peak * factor),
            None => Ok(scaled),
        }
    }
}

/// A moment that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn finite(self) -> Option<f64> {
        match self {
            Moment::Finite(v) => Some(v),
            Moment::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Moment::Finite(_))
    }

    pub fn or_diverges(self, which: MomentKind) -> Result<f64> {
        self.finite().ok_or(Error::MomentDiverges(which))
    }

    /// The value, with `Infinite` mapped to `f64::INFINITY`.
    pub fn value(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

/// `E[P^δ]`, `E[P^{-δ} h^{-δ}]` and `E[P]` of a policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolicyMoments {
    pub y: f64,
    pub z: Moment,
    pub mean: Moment,
}

fn gamma_moment(arg: f64, factor: f64) -> Moment {
    if arg > 0.0 {
        Moment::Finite(factor * gamma(arg))
    } else {
        Moment::Infinite
    }
}

/// Moments of `policy` when `h ~ Exp(1)`.
///
/// Only a divergent `E[P^δ]` is an error; the other two moments come back
/// tagged [`Moment::Infinite`] and callers that need them decide.
pub fn policy_moments(policy: &PowerPolicy, delta: f64) -> Result<PolicyMoments> {
    match policy.kind() {
        PolicyKind::Constant { level } => Ok(PolicyMoments {
            y: level.powf(delta),
            z: gamma_moment(1.0 - delta, level.powf(-delta)),
            mean: Moment::Finite(*level),
        }),
        PolicyKind::Fractional { scale, exponent } => {
            let y_arg = 1.0 - exponent * delta;
            if y_arg <= 0.0 {
                return Err(Error::MomentDiverges(MomentKind::PowerDelta));
            }
            Ok(PolicyMoments {
                y: scale.powf(delta) * gamma(y_arg),
                z: gamma_moment(1.0 + delta * (exponent - 1.0), scale.powf(-delta)),
                mean: gamma_moment(1.0 - exponent, *scale),
            })
        }
        PolicyKind::PiecewiseConstant { grid, levels } => {
            let cells = CellIntegrals::new(grid, delta)?;
            let mut y = 0.0;
            let mut z = 0.0;
            let mut mean = 0.0;
            for ((a, c), p) in cells.a.iter().zip(&cells.c).zip(levels) {
                y += a * p.powf(delta);
                mean += a * p;
                z += if *p > 0.0 { c * p.powf(-delta) } else { f64::INFINITY };
            }
            Ok(PolicyMoments {
                y,
                z: if z.is_finite() { Moment::Finite(z) } else { Moment::Infinite },
                mean: Moment::Finite(mean),
            })
        }
    }
}

/// Per-cell integrals `a_i = ∫ e^{-h} dh` and `c_i = ∫ h^{-δ} e^{-h} dh`
/// over `[x_i, x_{i+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellIntegrals {
    pub a: Vec<f64>,
    pub c: Vec<f64>,
}

impl CellIntegrals {
    pub fn new(grid: &[f64], delta: f64) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::InvalidGrid("need at least one cell".into()));
        }
        if grid[0] == 0.0 && delta >= 1.0 {
            return Err(Error::InvalidGrid(format!(
                "a cell starting at h = 0 has divergent c_0 when delta = {delta} >= 1"
            )));
        }
        let a = cell_masses(grid);
        let c = grid
            .windows(2)
            .map(|w| inverse_power_cell(w[0], w[1], delta))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { a, c })
    }
}

/// Probability that `h ~ Exp(1)` falls in each grid cell.
pub fn cell_masses(grid: &[f64]) -> Vec<f64> {
    grid.windows(2)
        .map(|w| (-w[0]).exp() * -(-(w[1] - w[0])).exp_m1())
        .collect()
}

fn inverse_power_cell(lo: f64, hi: f64, delta: f64) -> Result<f64> {
    if delta < 1.0 {
        return Ok(incomplete_gamma_between(1.0 - delta, lo, hi));
    }
    // lo > 0 here, so the integrand is smooth on the cell
    quad::fade_expectation_on(|h| h.powf(-delta), lo, hi, 0.0)
}
