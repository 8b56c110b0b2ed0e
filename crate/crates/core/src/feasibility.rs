//! Feasibility regions over `(λ_c, λ_d)`, the policies that attain them, and
//! the closed-form minimum-power fixed D2D level.

use serde::Serialize;

use crate::error::{Error, MomentKind, Result};
use crate::model::{policy_moments, Layer, NetworkParams, PowerPolicy};
use crate::outage::find_qc;
use crate::special::gamma;

/// Relative slack applied to every feasibility comparison.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegionCase {
    /// Independent control, peak power above the region-achieving level.
    IndependentHighPeak,
    /// Independent control, peak power binding.
    IndependentLowPeak,
    /// Dependent control under the linearized outage.
    Dependent,
}

/// The closed half-plane `{λ ≥ 0 : coef_c λ_c + coef_d λ_d ≤ bound}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityRegion {
    pub coef_c: f64,
    pub coef_d: f64,
    pub bound: f64,
    pub case: RegionCase,
}

impl FeasibilityRegion {
    /// `(coef_c λ_c + coef_d λ_d) / bound`; at most one inside the region.
    pub fn load(&self, lambda_c: f64, lambda_d: f64) -> f64 {
        (self.coef_c * lambda_c + self.coef_d * lambda_d) / self.bound
    }

    pub fn contains(&self, lambda_c: f64, lambda_d: f64) -> bool {
        lambda_c >= 0.0 && lambda_d >= 0.0 && self.load(lambda_c, lambda_d) <= 1.0 + FEASIBILITY_SLACK
    }

    pub fn lambda_c_intercept(&self) -> f64 {
        self.bound / self.coef_c
    }

    pub fn lambda_d_intercept(&self) -> f64 {
        self.bound / self.coef_d
    }

    /// `points` evenly spaced points along the boundary segment, from the
    /// `λ_d` axis to the `λ_c` axis.
    pub fn boundary(&self, points: usize) -> Vec<(f64, f64)> {
        let n = points.max(2);
        let (xc, xd) = (self.lambda_c_intercept(), self.lambda_d_intercept());
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                (t * xc, (1.0 - t) * xd)
            })
            .collect()
    }
}

/// The D2D level `(Q_c φ_d / (φ_c ln(1/(1-ε_d))))^{1/δ}` separating the two
/// independent-control cases.
pub fn independent_threshold_power(params: &NetworkParams, q_c: f64) -> Result<f64> {
    let delta = params.delta();
    let ratio = q_c * params.phi(Layer::D2d)? / (params.phi(Layer::Cellular)? * params.log_target(Layer::D2d));
    Ok(ratio.powf(1.0 / delta))
}

fn independent_region_from(params: &NetworkParams, y_c: f64, q_c: f64, pd_max: f64) -> Result<FeasibilityRegion> {
    let threshold = independent_threshold_power(params, q_c)?;
    let phi_c = params.phi(Layer::Cellular)?;
    let phi_d = params.phi(Layer::D2d)?;
    let log_d = params.log_target(Layer::D2d);
    if pd_max > threshold {
        Ok(FeasibilityRegion {
            coef_c: y_c * phi_c / q_c,
            coef_d: phi_d / log_d,
            bound: 1.0,
            case: RegionCase::IndependentHighPeak,
        })
    } else {
        Ok(FeasibilityRegion {
            coef_c: y_c / pd_max.powf(params.delta()),
            coef_d: 1.0,
            bound: log_d / phi_d,
            case: RegionCase::IndependentLowPeak,
        })
    }
}

fn check_pd_max(pd_max: f64) -> Result<()> {
    if pd_max > 0.0 {
        Ok(())
    } else {
        Err(Error::param("pd_max", format!("must be > 0 (or infinite), got {pd_max}")))
    }
}

/// Feasibility region under independent power control for a given
/// cellular policy and D2D peak power (`f64::INFINITY` for none).
pub fn feasibility_independent(
    params: &NetworkParams,
    policy_c: &PowerPolicy,
    pd_max: f64,
) -> Result<FeasibilityRegion> {
    params.require_delta_below_one()?;
    params.require_eps_assumption(Layer::D2d)?;
    check_pd_max(pd_max)?;
    let delta = params.delta();
    let y_c = policy_moments(policy_c, delta)?.y;
    let q_c = find_qc(policy_c, params.eps(Layer::Cellular), delta)?;
    independent_region_from(params, y_c, q_c, pd_max)
}

/// Fixed D2D power that keeps both layers within target anywhere in the
/// independent-control region.
pub fn region_achieving_power_independent(
    params: &NetworkParams,
    y_c: f64,
    q_c: f64,
    pd_max: f64,
) -> Result<f64> {
    params.require_delta_below_one()?;
    params.require_eps_assumption(Layer::D2d)?;
    check_pd_max(pd_max)?;
    let region = independent_region_from(params, y_c, q_c, pd_max)?;
    if !region.contains(params.lambda_c(), params.lambda_d()) {
        return Err(Error::InfeasibleDensities(format!(
            "({}, {}) outside {:?}: load {:.6}",
            params.lambda_c(),
            params.lambda_d(),
            region,
            region.load(params.lambda_c(), params.lambda_d())
        )));
    }
    let threshold = independent_threshold_power(params, q_c)?;
    Ok(if pd_max > threshold { threshold } else { pd_max })
}

/// Minimum-mean fixed D2D power under independent control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndependentSolution {
    pub p_d0: f64,
    /// `E[P_d^δ]` at the optimum, `p_d0^δ`.
    pub y0: f64,
    /// Upper limit on `E[P_d^δ]` imposed by the cellular constraint.
    pub r_c: f64,
    /// False when `p_d0` exceeds the peak power.
    pub feasible: bool,
}

pub fn optimal_power_independent(
    params: &NetworkParams,
    policy_c: &PowerPolicy,
    pd_max: f64,
) -> Result<IndependentSolution> {
    params.require_delta_below_one()?;
    params.require_eps_assumption(Layer::Cellular)?;
    params.require_eps_assumption(Layer::D2d)?;
    check_pd_max(pd_max)?;
    let delta = params.delta();
    let y_c = policy_moments(policy_c, delta)?.y;
    if !(params.lambda_c() > 0.0) {
        return Err(Error::param("lambda_c", "the fixed-power optimum needs lambda_c > 0"));
    }
    let phi_c = params.phi(Layer::Cellular)?;
    let phi_d = params.phi(Layer::D2d)?;
    let budget = params.log_target(Layer::D2d) / phi_d;
    let denom = budget - params.lambda_d();
    if !(denom > budget * FEASIBILITY_SLACK) {
        return Err(Error::InfeasibleDensities(format!(
            "lambda_d = {} must stay below ln(1/(1-eps_d))/phi_d = {budget}",
            params.lambda_d()
        )));
    }
    let cell = params.lambda_c() * y_c;
    let y0 = cell / denom;
    let q_c = find_qc(policy_c, params.eps(Layer::Cellular), delta)?;
    let cellular_room = q_c / phi_c - cell;
    let r_c = if params.lambda_d() > 0.0 {
        cellular_room / params.lambda_d()
    } else if cellular_room >= -FEASIBILITY_SLACK * q_c / phi_c {
        f64::INFINITY
    } else {
        -f64::INFINITY
    };
    if !(y0 <= r_c * (1.0 + FEASIBILITY_SLACK)) {
        return Err(Error::InfeasibleDensities(format!(
            "cellular constraint: E[P_d^delta] = {y0} exceeds R_c = {r_c}"
        )));
    }
    let p_d0 = y0.powf(1.0 / delta);
    Ok(IndependentSolution {
        p_d0,
        y0,
        r_c,
        feasible: p_d0 <= pd_max * (1.0 + FEASIBILITY_SLACK),
    })
}

fn dependent_pieces(params: &NetworkParams, policy_c: &PowerPolicy) -> Result<(f64, f64, f64)> {
    let delta = params.delta();
    let m = policy_moments(policy_c, delta)?;
    let z_c = m.z.or_diverges(MomentKind::InverseFaded)?;
    let g = gamma(1.0 - 0.5 * delta);
    if !(g.is_finite() && g > 0.0) {
        return Err(Error::MomentDiverges(MomentKind::InverseFaded));
    }
    Ok((m.y, z_c, g))
}

/// Feasibility region under dependent power control (linearized outage).
pub fn feasibility_dependent(params: &NetworkParams, policy_c: &PowerPolicy) -> Result<FeasibilityRegion> {
    let (y_c, z_c, g) = dependent_pieces(params, policy_c)?;
    let psi_c = params.psi(Layer::Cellular);
    let psi_d = params.psi(Layer::D2d);
    let log_c = params.log_target(Layer::Cellular);
    let log_d = params.log_target(Layer::D2d);
    Ok(FeasibilityRegion {
        coef_c: y_c,
        coef_d: psi_d * g * g * log_c / (psi_c * z_c * log_d),
        bound: log_c / (psi_c * z_c),
        case: RegionCase::Dependent,
    })
}

/// The fractional policy `k h^{-1/2}` that attains the dependent region.
pub fn region_achieving_power_dependent(params: &NetworkParams, policy_c: &PowerPolicy) -> Result<PowerPolicy> {
    let (_, z_c, g) = dependent_pieces(params, policy_c)?;
    let bracket = params.psi(Layer::D2d) * g * params.log_target(Layer::Cellular)
        / (params.psi(Layer::Cellular) * z_c * params.log_target(Layer::D2d));
    PowerPolicy::fractional(bracket.powf(1.0 / params.delta()), 0.5)
}
