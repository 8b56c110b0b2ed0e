//! Monte-Carlo estimate of outage at the typical receiver of either layer.
//!
//! Each trial places the typical receiver at the origin with its transmitter
//! at distance `r_i`, drops both layers' interferers as Poisson processes on
//! a disc of radius `R`, and draws Rayleigh fades for every link. Interferer
//! power follows the interferer's own policy driven by its own direct-link
//! fade, which is independent of everything the typical receiver sees.
//!
//! The mean interference from beyond the disc, `Σ 2πλ E[P] R^{2-α}/(α-2)`,
//! is added back as a constant when it is finite.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{policy_moments, Layer, NetworkParams, PowerPolicy};
use crate::outage::{outage_dependent_approx, outage_dependent_lower_bound};

/// Trials per independently seeded RNG stream.
pub const CHUNK_TRIALS: u64 = 1 << 14;

/// Expected number of interferers on the default window.
pub const DEFAULT_TARGET_INTERFERERS: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerControl {
    /// The typical transmitter's power ignores its own link fade.
    Independent,
    /// The typical transmitter's power is its policy evaluated at its link fade.
    Dependent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub params: NetworkParams,
    pub policy_c: PowerPolicy,
    pub policy_d: PowerPolicy,
    pub control: PowerControl,
    /// `None` picks [`default_window_radius`].
    pub window_radius: Option<f64>,
    pub trials: u64,
    pub seed: u64,
    /// Centre of the interferer disc relative to the receiver.
    pub offset: (f64, f64),
    pub far_field: bool,
}

impl SimConfig {
    pub fn new(params: NetworkParams, policy_c: PowerPolicy, policy_d: PowerPolicy) -> Self {
        Self {
            params,
            policy_c,
            policy_d,
            control: PowerControl::Independent,
            window_radius: None,
            trials: 1_000_000,
            seed: 0,
            offset: (0.0, 0.0),
            far_field: true,
        }
    }

    pub fn radius(&self) -> f64 {
        self.window_radius.unwrap_or_else(|| default_window_radius(&self.params))
    }

    fn validate(&self) -> Result<f64> {
        let r = self.radius();
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::param("window_radius", format!("must be finite and > 0, got {r}")));
        }
        if self.trials == 0 {
            return Err(Error::param("trials", "must be >= 1"));
        }
        let (ox, oy) = self.offset;
        if !(ox.is_finite() && oy.is_finite()) || ox.hypot(oy) >= r {
            return Err(Error::param("offset", "the receiver must lie inside the window"));
        }
        Ok(r)
    }
}

/// `max(20 r_max, √(n / (π λ)))` with `n` = [`DEFAULT_TARGET_INTERFERERS`].
pub fn default_window_radius(params: &NetworkParams) -> f64 {
    let r_max = params.r(Layer::Cellular).max(params.r(Layer::D2d));
    let total = params.lambda_c() + params.lambda_d();
    let by_count = if total > 0.0 { (DEFAULT_TARGET_INTERFERERS / (PI * total)).sqrt() } else { 0.0 };
    (20.0 * r_max).max(by_count)
}

/// Mean interference at the centre from a layer's transmitters beyond
/// radius `r`; `None` when it diverges.
pub fn far_field_interference(params: &NetworkParams, policy_c: &PowerPolicy, policy_d: &PowerPolicy, r: f64) -> Option<f64> {
    let alpha = params.alpha();
    if !(alpha > 2.0) {
        return None;
    }
    let mut total = 0.0;
    for (layer, policy) in [(Layer::Cellular, policy_c), (Layer::D2d, policy_d)] {
        let lambda = params.lambda(layer);
        if lambda == 0.0 {
            continue;
        }
        let mean = policy_moments(policy, params.delta()).ok()?.mean.finite()?;
        total += 2.0 * PI * lambda * mean * r.powf(2.0 - alpha) / (alpha - 2.0);
    }
    Some(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutageEstimate {
    pub p_hat: f64,
    /// `1.96 √(p̂(1-p̂)/n)`
    pub half_width_95: f64,
    pub trials: u64,
    pub outages: u64,
    /// Interferers drawn across all trials, both layers.
    pub interferers: u64,
    pub window_radius: f64,
}

impl OutageEstimate {
    /// Binomial standard error `√(p̂(1-p̂)/n)`.
    pub fn std_error(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.trials as f64).sqrt()
    }
}

struct Layout {
    r2: f64,
    offset: (f64, f64),
    centred: bool,
    half_alpha: f64,
    theta: f64,
    signal_path: f64,
    far: f64,
    counts: [Option<Poisson<f64>>; 2],
}

impl Layout {
    /// Squared distance from the receiver to a point uniform on the disc.
    fn distance2<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let rho2 = self.r2 * u;
        if self.centred {
            return rho2;
        }
        let phi = 2.0 * PI * rng.random::<f64>();
        let rho = rho2.sqrt();
        let x = self.offset.0 + rho * phi.cos();
        let y = self.offset.1 + rho * phi.sin();
        x * x + y * y
    }
}

fn fade<R: Rng>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

fn run_chunk(cfg: &SimConfig, layer: Layer, layout: &Layout, chunk: u64, trials: u64) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chunk);
    let own = match layer {
        Layer::Cellular => &cfg.policy_c,
        Layer::D2d => &cfg.policy_d,
    };
    let policies = [&cfg.policy_c, &cfg.policy_d];
    let mut outages = 0;
    let mut drawn = 0;
    for _ in 0..trials {
        let h = fade(&mut rng);
        let power = match cfg.control {
            PowerControl::Dependent => own.level(h),
            PowerControl::Independent => own.level(fade(&mut rng)),
        };
        let signal = power * h * layout.signal_path;
        let mut interference = layout.far;
        for (count, policy) in layout.counts.iter().zip(policies) {
            let Some(count) = count else { continue };
            let n = count.sample(&mut rng) as u64;
            drawn += n;
            for _ in 0..n {
                let d2 = layout.distance2(&mut rng);
                let g = fade(&mut rng);
                let p = policy.level(fade(&mut rng));
                interference += p * g * (-layout.half_alpha * d2.ln()).exp();
            }
        }
        if !(signal > layout.theta * interference) {
            outages += 1;
        }
    }
    (outages, drawn)
}

/// Outage estimate for the typical receiver of `layer`.
pub fn simulate_outage(cfg: &SimConfig, layer: Layer) -> Result<OutageEstimate> {
    let r = cfg.validate()?;
    let params = &cfg.params;
    let area = PI * r * r;
    let count = |lambda: f64| -> Result<Option<Poisson<f64>>> {
        if lambda == 0.0 {
            return Ok(None);
        }
        Poisson::new(lambda * area)
            .map(Some)
            .map_err(|e| Error::param("lambda", format!("Poisson mean {}: {e}", lambda * area)))
    };
    let far = if cfg.far_field {
        far_field_interference(params, &cfg.policy_c, &cfg.policy_d, r).unwrap_or(0.0)
    } else {
        0.0
    };
    let layout = Layout {
        r2: r * r,
        offset: cfg.offset,
        centred: cfg.offset == (0.0, 0.0),
        half_alpha: 0.5 * params.alpha(),
        theta: params.theta(layer),
        signal_path: params.r(layer).powf(-params.alpha()),
        far,
        counts: [count(params.lambda_c())?, count(params.lambda_d())?],
    };
    let chunks = cfg.trials.div_ceil(CHUNK_TRIALS);
    let (outages, interferers) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = CHUNK_TRIALS.min(cfg.trials - c * CHUNK_TRIALS);
            run_chunk(cfg, layer, &layout, c, n)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let p_hat = outages as f64 / cfg.trials as f64;
    Ok(OutageEstimate {
        p_hat,
        half_width_95: 1.96 * (p_hat * (1.0 - p_hat) / cfg.trials as f64).sqrt(),
        trials: cfg.trials,
        outages,
        interferers,
        window_radius: r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub layer: Layer,
    pub simulated: OutageEstimate,
    pub lower_bound: f64,
    pub approx: f64,
    /// `approx - lower_bound`
    pub approx_gap: f64,
    /// `simulated - lower_bound`
    pub simulated_gap: f64,
}

/// Simulates dependent control and checks the analytic lower bound against
/// the estimate: `lower_bound <= p̂ + 3σ`.
pub fn validate_bound(cfg: &SimConfig, layer: Layer) -> Result<BoundReport> {
    let mut dependent = cfg.clone();
    dependent.control = PowerControl::Dependent;
    let simulated = simulate_outage(&dependent, layer)?;
    let params = &cfg.params;
    let lower_bound = outage_dependent_lower_bound(params, &cfg.policy_c, &cfg.policy_d, layer)?;
    let mc = policy_moments(&cfg.policy_c, params.delta())?;
    let md = policy_moments(&cfg.policy_d, params.delta())?;
    let approx = outage_dependent_approx(params, &mc, &md, layer);
    let sigma = simulated.std_error();
    if lower_bound > simulated.p_hat + 3.0 * sigma {
        return Err(Error::BoundViolation {
            layer,
            lower_bound,
            simulated: simulated.p_hat,
            sigma,
        });
    }
    Ok(BoundReport {
        layer,
        simulated,
        lower_bound,
        approx,
        approx_gap: approx - lower_bound,
        simulated_gap: simulated.p_hat - lower_bound,
    })
}
