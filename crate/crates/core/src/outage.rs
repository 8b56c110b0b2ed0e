//! Outage probabilities of the typical cellular and D2D links: the exact
//! expression under independent power control, the dominant-interferer
//! lower bound and its linearized approximation under dependent control,
//! and the cellular interference budget `Q_c`.

use crate::error::{Error, Result};
use crate::model::{cell_masses, policy_moments, Layer, NetworkParams, PolicyKind, PolicyMoments, PowerPolicy};
use crate::quad;
use crate::root;

/// Which analytic expression produced an outage value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutageMode {
    IndependentExact,
    DependentLowerBound,
    DependentApprox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageModel {
    pub mode: OutageMode,
    pub value: f64,
}

/// Absolute tolerance on `Q_c`.
pub const QC_TOLERANCE: f64 = 1e-12;

fn policy_for(layer: Layer, policy_c: &PowerPolicy, policy_d: &PowerPolicy) -> PowerPolicy {
    match layer {
        Layer::Cellular => policy_c.clone(),
        Layer::D2d => policy_d.clone(),
    }
}

/// Aggregate interference mass `λ_c y_c + λ_d y_d`.
pub fn interference_mass(params: &NetworkParams, y_c: f64, y_d: f64) -> f64 {
    let c = if params.lambda_c() == 0.0 { 0.0 } else { params.lambda_c() * y_c };
    let d = if params.lambda_d() == 0.0 { 0.0 } else { params.lambda_d() * y_d };
    c + d
}

/// `E[exp(-q / P^δ)]` over the power distribution of `policy` (with the
/// power drawn from an independent unit-mean exponential fade). A silent
/// transmitter contributes `exp(-q/0) = 0` for `q > 0`.
pub fn power_laplace(policy: &PowerPolicy, q: f64, delta: f64) -> Result<f64> {
    if q == 0.0 {
        return Ok(1.0);
    }
    if q.is_infinite() {
        return Ok(0.0);
    }
    match policy.kind() {
        PolicyKind::Constant { level } => Ok((-q / level.powf(delta)).exp()),
        PolicyKind::Fractional { scale, exponent } => {
            if *exponent == 0.0 {
                return Ok((-q / scale.powf(delta)).exp());
            }
            let c = q * scale.powf(-delta);
            let e = exponent * delta;
            quad::fade_expectation(|h| (-c * h.powf(e)).exp(), 0.0)
        }
        PolicyKind::PiecewiseConstant { grid, levels } => {
            Ok(cell_masses(grid)
                .iter()
                .zip(levels)
                .filter(|(_, p)| **p > 0.0)
                .map(|(a, p)| a * (-q / p.powf(delta)).exp())
                .sum())
        }
    }
}

/// Exact outage of the typical `layer` link when both layers transmit at
/// fixed power.
pub fn outage_independent_constant(params: &NetworkParams, p_c: f64, p_d: f64, layer: Layer) -> Result<f64> {
    params.require_delta_below_one()?;
    if !(p_c > 0.0 && p_d > 0.0) {
        return Err(Error::param("power", "constant powers must be > 0"));
    }
    let delta = params.delta();
    let mass = interference_mass(params, p_c.powf(delta), p_d.powf(delta));
    let own = match layer {
        Layer::Cellular => p_c,
        Layer::D2d => p_d,
    };
    let exponent = params.phi(layer)? * mass / own.powf(delta);
    Ok(-(-exponent).exp_m1())
}

/// Exact outage under independent power control for arbitrary policies,
/// with the outer expectation over the typical transmitter's power taken by
/// quadrature.
pub fn outage_independent(
    params: &NetworkParams,
    policy_c: &PowerPolicy,
    policy_d: &PowerPolicy,
    layer: Layer,
) -> Result<f64> {
    params.require_delta_below_one()?;
    let delta = params.delta();
    let y_c = policy_moments(policy_c, delta)?.y;
    let y_d = policy_moments(policy_d, delta)?.y;
    let q = params.phi(layer)? * interference_mass(params, y_c, y_d);
    let own = policy_for(layer, policy_c, policy_d);
    let success = power_laplace(&own, q, delta)?;
    Ok((1.0 - success).clamp(0.0, 1.0))
}

/// Lower bound on the outage under dependent power control: the
/// probability that a single interferer alone breaks the link,
/// `1 - E[exp(-ψ_i (λ_c y_c + λ_d y_d) (h_i P_i(h_i))^{-δ})]`.
pub fn outage_dependent_lower_bound(
    params: &NetworkParams,
    policy_c: &PowerPolicy,
    policy_d: &PowerPolicy,
    layer: Layer,
) -> Result<f64> {
    let delta = params.delta();
    let y_c = policy_moments(policy_c, delta)?.y;
    let y_d = policy_moments(policy_d, delta)?.y;
    let strength = params.psi(layer) * interference_mass(params, y_c, y_d);
    if strength == 0.0 {
        return Ok(0.0);
    }
    let own = policy_for(layer, policy_c, policy_d);
    let success = match own.kind() {
        PolicyKind::Constant { level } => {
            let c = strength * level.powf(-delta);
            quad::fade_expectation(|h| (-c * h.powf(-delta)).exp(), 0.0)?
        }
        PolicyKind::Fractional { scale, exponent } => {
            let c = strength * scale.powf(-delta);
            let e = delta * (1.0 - exponent);
            quad::fade_expectation(|h| (-c * h.powf(-e)).exp(), 0.0)?
        }
        PolicyKind::PiecewiseConstant { grid, levels } => {
            let mut acc = 0.0;
            for (w, p) in grid.windows(2).zip(levels) {
                if *p <= 0.0 {
                    continue;
                }
                let c = strength * p.powf(-delta);
                acc += quad::fade_expectation_on(|h| (-c * h.powf(-delta)).exp(), w[0], w[1], 0.0)?;
            }
            acc
        }
    };
    Ok((1.0 - success).clamp(0.0, 1.0))
}

/// Linearized dependent-control outage
/// `1 - exp(-ψ_i (λ_c y_c + λ_d y_d) E[P_i^{-δ} h_i^{-δ}])`.
pub fn outage_dependent_approx(
    params: &NetworkParams,
    moments_c: &PolicyMoments,
    moments_d: &PolicyMoments,
    layer: Layer,
) -> f64 {
    let mass = interference_mass(params, moments_c.y, moments_d.y);
    if mass == 0.0 {
        return 0.0;
    }
    let z = match layer {
        Layer::Cellular => moments_c.z,
        Layer::D2d => moments_d.z,
    };
    match z.finite() {
        Some(z) => -(-params.psi(layer) * mass * z).exp_m1(),
        None => 1.0,
    }
}

/// The largest `q` with `E[exp(-q / P_c^δ)] >= 1 - ε_c`, found by bisection.
pub fn find_qc(policy_c: &PowerPolicy, eps_c: f64, delta: f64) -> Result<f64> {
    if !(eps_c > 0.0 && eps_c < 1.0) {
        return Err(Error::param("eps_c", format!("must lie in (0, 1), got {eps_c}")));
    }
    let y = policy_moments(policy_c, delta)?.y;
    if !(y > 0.0) {
        return Err(Error::param("policy_c", "E[P_c^delta] must be > 0"));
    }
    let target = 1.0 - eps_c;
    root::solve_non_increasing(|q| power_laplace(policy_c, q, delta), target, y, QC_TOLERANCE)
}
