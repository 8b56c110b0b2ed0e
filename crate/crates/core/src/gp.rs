//! Minimum-mean dependent D2D power over piecewise-constant policies.
//!
//! With `S = Σ a_i p_i^δ` and `T = Σ c_i p_i^{-δ}` the problem is
//!
//! ```text
//! minimize   Σ a_i p_i
//! subject to (A + λ_d S) T <= B
//!            S <= C
//! ```
//!
//! a geometric program. In `u = ln p` both constraints become log-sum-exp
//! functions, and the barrier Hessian is a diagonal plus a rank-two term
//! spanned by the normalized weight vectors of `S` and `T`, so each Newton
//! step costs `O(N)`.

use serde::Serialize;

use crate::error::{Error, MomentKind, Result};
use crate::feasibility::feasibility_dependent;
use crate::model::{policy_moments, CellIntegrals, Layer, NetworkParams, PolicyMoments, PowerPolicy};

pub const DEFAULT_DENSE_CAP: f64 = 1e-3;
pub const DEFAULT_SPLIT: f64 = 0.5;
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-9;

/// Channel-gain breakpoints `0 = x_0 < x_1 < … < x_N = M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid("need at least two points".into()));
        }
        if points[0] != 0.0 {
            return Err(Error::InvalidGrid(format!("must start at 0, got {}", points[0])));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGrid("points must be finite".into()));
        }
        if let Some(w) = points.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!("not strictly increasing at {} -> {}", w[0], w[1])));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn segments(&self) -> usize {
        self.points.len() - 1
    }

    pub fn truncation(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// `P(h > M)` for a unit-mean exponential fade.
    pub fn tail_mass(&self) -> f64 {
        (-self.truncation()).exp()
    }

    /// Every cell split at its midpoint.
    pub fn refined(&self) -> Self {
        let mut points = Vec::with_capacity(2 * self.points.len() - 1);
        for w in self.points.windows(2) {
            points.push(w[0]);
            points.push(0.5 * (w[0] + w[1]));
        }
        points.push(self.truncation());
        Self { points }
    }
}

/// Smallest truncation level whose exponential tail mass is below `tol`.
pub fn default_truncation(tol: f64) -> f64 {
    (1.0 / tol).ln() * (1.0 + 1e-12)
}

/// `N` cells: the first `split · N` uniform on `[0, dense_cap]`, the rest
/// uniform on `[dense_cap, M]`.
pub fn build_grid(n: usize, m: f64, split: f64, dense_cap: f64) -> Result<Grid> {
    if n < 2 {
        return Err(Error::InvalidGrid(format!("N must be >= 2, got {n}")));
    }
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::InvalidGrid(format!("split must lie in (0, 1), got {split}")));
    }
    if !(dense_cap > 0.0 && m.is_finite() && m > dense_cap) {
        return Err(Error::InvalidGrid(format!("need M > dense_cap > 0, got M = {m}, dense_cap = {dense_cap}")));
    }
    let dense = split * n as f64;
    let n_dense = dense.round() as usize;
    if (dense - n_dense as f64).abs() > 1e-9 || n_dense == 0 || n_dense >= n {
        return Err(Error::InvalidGrid(format!("split {split} of N = {n} is not a whole number of cells on each side")));
    }
    let n_sparse = n - n_dense;
    let mut points = Vec::with_capacity(n + 1);
    points.extend((0..n_dense).map(|i| dense_cap * i as f64 / n_dense as f64));
    points.extend((0..n_sparse).map(|i| dense_cap + (m - dense_cap) * i as f64 / n_sparse as f64));
    points.push(m);
    Grid::new(points)
}

/// Coefficients of the discretized program.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretizedProblem {
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    /// `λ_c y_c`
    pub big_a: f64,
    /// `ln(1/(1-ε_d)) / ψ_d`
    pub big_b: f64,
    /// Cellular budget on `S`; infinite when `λ_d = 0`.
    pub big_c: f64,
    pub lambda_d: f64,
    pub delta: f64,
}

pub fn discretize(grid: &Grid, params: &NetworkParams, moments_c: &PolicyMoments) -> Result<DiscretizedProblem> {
    params.require_delta_below_one()?;
    let delta = params.delta();
    let z_c = moments_c.z.or_diverges(MomentKind::InverseFaded)?;
    let cells = CellIntegrals::new(grid.points(), delta)?;
    let big_a = params.lambda_c() * moments_c.y;
    let big_b = params.log_target(Layer::D2d) / params.psi(Layer::D2d);
    let room = params.log_target(Layer::Cellular) / (z_c * params.psi(Layer::Cellular)) - big_a;
    if room < 0.0 {
        return Err(Error::InfeasibleDensities(format!(
            "cellular layer alone exceeds its target: lambda_c y_c = {big_a} > {}",
            big_a + room
        )));
    }
    let big_c = if params.lambda_d() > 0.0 { room / params.lambda_d() } else { f64::INFINITY };
    Ok(DiscretizedProblem {
        a: cells.a,
        c: cells.c,
        big_a,
        big_b,
        big_c,
        lambda_d: params.lambda_d(),
        delta,
    })
}

impl DiscretizedProblem {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn objective(&self, levels: &[f64]) -> f64 {
        self.a.iter().zip(levels).map(|(a, p)| a * p).sum()
    }

    /// `(S, T)` at the given levels.
    pub fn sums(&self, levels: &[f64]) -> (f64, f64) {
        let d = self.delta;
        let s = self.a.iter().zip(levels).map(|(a, p)| a * p.powf(d)).sum();
        let t = self.c.iter().zip(levels).map(|(c, p)| c * p.powf(-d)).sum();
        (s, t)
    }

    fn has_d2d_constraint(&self) -> bool {
        self.big_a > 0.0 || self.lambda_d > 0.0
    }

    fn has_cellular_constraint(&self) -> bool {
        self.big_c.is_finite()
    }

    /// Log-form constraint values `(g_1, g_2)`; feasible iff both are `<= 0`.
    /// An absent constraint reports `-∞`.
    pub fn log_constraints(&self, levels: &[f64]) -> (f64, f64) {
        let (s, t) = self.sums(levels);
        self.log_constraints_from(s, t)
    }

    fn log_constraints_from(&self, s: f64, t: f64) -> (f64, f64) {
        let g1 = if self.has_d2d_constraint() {
            (self.big_a + self.lambda_d * s).ln() + t.ln() - self.big_b.ln()
        } else {
            f64::NEG_INFINITY
        };
        let g2 = if self.has_cellular_constraint() { s.ln() - self.big_c.ln() } else { f64::NEG_INFINITY };
        (g1, g2)
    }

    /// Scales a shape so both constraints hold strictly, if possible.
    /// `S·T` is scale invariant, so the feasible scales form an interval in
    /// `S`.
    fn scale_into_interior(&self, shape: &[f64]) -> Option<Vec<f64>> {
        let (s, t) = self.sums(shape);
        let k = s * t;
        let lo = if self.big_a > 0.0 {
            let slack = self.big_b - self.lambda_d * k;
            if !(slack > 0.0) {
                return None;
            }
            self.big_a * k / slack
        } else if self.lambda_d > 0.0 && self.lambda_d * k >= self.big_b {
            return None;
        } else {
            0.0
        };
        let hi = self.big_c;
        let target = match (lo > 0.0, hi.is_finite()) {
            (true, true) if lo < hi => (lo * hi).sqrt(),
            (true, true) => return None,
            (true, false) => 4.0 * lo,
            (false, true) => 0.5 * hi,
            (false, false) => s,
        };
        let factor = (target / s).powf(1.0 / self.delta);
        let levels: Vec<f64> = shape.iter().map(|p| p * factor).collect();
        let (g1, g2) = self.log_constraints(&levels);
        (g1 < 0.0 && g2 < 0.0 && levels.iter().all(|p| p.is_finite() && *p > 0.0)).then_some(levels)
    }

    /// `min S·T` over all level vectors, attained by `p_i^δ ∝ √(c_i/a_i)`.
    pub fn min_moment_product(&self) -> f64 {
        let r: f64 = self.a.iter().zip(&self.c).map(|(a, c)| (a * c).sqrt()).sum();
        r * r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpOptions {
    pub floor: f64,
    pub max_newton_steps: usize,
    /// Target for `m / t` relative to the objective.
    pub gap_tol: f64,
    pub kkt_tol: f64,
    pub barrier_growth: f64,
}

impl Default for GpOptions {
    fn default() -> Self {
        Self {
            floor: 1e-12,
            max_newton_steps: 500,
            gap_tol: 1e-9,
            kkt_tol: 1e-8,
            barrier_growth: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GpSolution {
    pub levels: Vec<f64>,
    /// `Σ a_i p_i`
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Some level sits at the lower floor.
    pub floor_active: bool,
}

fn seed_levels(problem: &DiscretizedProblem, grid: Option<&Grid>, floor: f64) -> Result<Vec<f64>> {
    let n = problem.len();
    let mut shapes = Vec::new();
    if let Some(grid) = grid {
        shapes.push(grid.points().windows(2).map(|w| (0.5 * (w[0] + w[1])).powf(-0.5)).collect::<Vec<_>>());
    }
    let inv = 1.0 / problem.delta;
    shapes.push(
        problem
            .a
            .iter()
            .zip(&problem.c)
            .map(|(a, c)| (c / a).sqrt().powf(inv))
            .collect(),
    );
    for shape in &shapes {
        if let Some(levels) = problem.scale_into_interior(shape) {
            if levels.iter().all(|p| *p > 4.0 * floor) {
                return Ok(levels);
            }
        }
    }
    let k = problem.min_moment_product();
    Err(Error::InfeasibleDiscretization(format!(
        "min S*T over {n} cells is {k:.9e}; need lambda_d S T + A T <= B = {:.9e} and S <= C = {:.9e} (A = {:.9e}, lambda_d = {})",
        problem.big_b, problem.big_c, problem.big_a, problem.lambda_d
    )))
}

/// Slack below which barrier multipliers are refitted.
const TIGHT_SLACK: f64 = 1e-6;

struct Barrier<'a> {
    p: &'a DiscretizedProblem,
    ell: f64,
    e0: f64,
    has1: bool,
    has2: bool,
    /// Weight on each floor barrier term.
    floor_weight: f64,
    /// Total barrier weight; the duality gap is `m / t`.
    m: f64,
}

/// Quantities at one interior iterate.
struct Point {
    levels: Vec<f64>,
    sigma: Vec<f64>,
    tau: Vec<f64>,
    /// `a_i p_i / E_0`
    pi: Vec<f64>,
    f0: f64,
    s1: f64,
    s2: f64,
    rho: f64,
}

fn solve2(m: [[f64; 2]; 2], r: [f64; 2]) -> [f64; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [
        (r[0] * m[1][1] - m[0][1] * r[1]) / det,
        (m[0][0] * r[1] - m[1][0] * r[0]) / det,
    ]
}

/// `D + W M Wᵀ` with `W = [σ τ]` and a moderate 2×2 `M`, applied inversely
/// through the Woodbury identity.
struct LowRankSystem<'a> {
    diag: Vec<f64>,
    sigma: &'a [f64],
    tau: &'a [f64],
    m: [[f64; 2]; 2],
    /// `I + M K` with `K = Wᵀ D⁻¹ W`
    core: [[f64; 2]; 2],
}

impl<'a> LowRankSystem<'a> {
    fn new(diag: Vec<f64>, sigma: &'a [f64], tau: &'a [f64], m: [[f64; 2]; 2]) -> Self {
        let mut k = [[0.0; 2]; 2];
        for i in 0..diag.len() {
            let (s, t) = (sigma[i], tau[i]);
            k[0][0] += s * s / diag[i];
            k[0][1] += s * t / diag[i];
            k[1][1] += t * t / diag[i];
        }
        k[1][0] = k[0][1];
        let mut core = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                core[r][c] = (r == c) as u8 as f64 + m[r][0] * k[0][c] + m[r][1] * k[1][c];
            }
        }
        Self { diag, sigma, tau, m, core }
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let xb: Vec<f64> = rhs.iter().zip(&self.diag).map(|(b, d)| b / d).collect();
        let mut wt = [0.0; 2];
        for i in 0..xb.len() {
            wt[0] += self.sigma[i] * xb[i];
            wt[1] += self.tau[i] * xb[i];
        }
        let r = [
            self.m[0][0] * wt[0] + self.m[0][1] * wt[1],
            self.m[1][0] * wt[0] + self.m[1][1] * wt[1],
        ];
        let y = solve2(self.core, r);
        xb.iter()
            .enumerate()
            .map(|(i, x)| x - (self.sigma[i] * y[0] + self.tau[i] * y[1]) / self.diag[i])
            .collect()
    }
}

impl<'a> Barrier<'a> {
    fn eval(&self, u: &[f64]) -> Option<Point> {
        let d = self.p.delta;
        if u.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return None;
        }
        let floor = self.ell.exp();
        let levels: Vec<f64> = u.iter().map(|x| floor * x.exp()).collect();
        let mut sigma: Vec<f64> = self.p.a.iter().zip(u).map(|(a, x)| a * floor.powf(d) * (d * x).exp()).collect();
        let mut tau: Vec<f64> = self.p.c.iter().zip(u).map(|(c, x)| c * floor.powf(-d) * (-d * x).exp()).collect();
        let s: f64 = sigma.iter().sum();
        let t: f64 = tau.iter().sum();
        sigma.iter_mut().for_each(|v| *v /= s);
        tau.iter_mut().for_each(|v| *v /= t);
        let pi: Vec<f64> = self.p.a.iter().zip(&levels).map(|(a, p)| a * p / self.e0).collect();
        let f0 = pi.iter().sum();
        let (g1, g2) = self.p.log_constraints_from(s, t);
        let (s1, s2) = (-g1, -g2);
        if (self.has1 && !(s1 > 0.0)) || (self.has2 && !(s2 > 0.0)) {
            return None;
        }
        let rho = if self.has1 { self.p.lambda_d * s / (self.p.big_a + self.p.lambda_d * s) } else { 0.0 };
        Some(Point { levels, sigma, tau, pi, f0, s1, s2, rho })
    }

    fn value(&self, u: &[f64], pt: &Point, t: f64) -> f64 {
        let mut v = t * pt.f0 - self.floor_weight * u.iter().map(|x| x.ln()).sum::<f64>();
        if self.has1 {
            v -= pt.s1.ln();
        }
        if self.has2 {
            v -= pt.s2.ln();
        }
        v
    }

    /// Constraint gradients as coefficients on `(σ, τ)`, with their slacks.
    fn constraint_gradients(&self, pt: &Point) -> Vec<([f64; 2], f64)> {
        let d = self.p.delta;
        let mut out = Vec::with_capacity(2);
        if self.has1 {
            out.push(([d * pt.rho, -d], pt.s1));
        }
        if self.has2 {
            out.push(([d, 0.0], pt.s2));
        }
        out
    }

    /// Barrier gradient and the Newton direction solving `H x = -grad`.
    ///
    /// `H = H_0 + Σ_j g_j g_jᵀ / s_j²`, where the rank-one terms blow up as
    /// the slacks close. Writing `ξ_j = g_jᵀ x / s_j²` gives the
    /// quasi-definite system `H_0 x + G ξ = -grad`, `Gᵀ x - S² ξ = 0`, whose
    /// 2×2 Schur complement `Gᵀ H_0⁻¹ G + S²` stays well conditioned.
    fn newton(&self, u: &[f64], pt: &Point, t: f64) -> (Vec<f64>, Vec<f64>) {
        let d = self.p.delta;
        let n = u.len();
        let cons = self.constraint_gradients(pt);
        let mut coef = [0.0; 2];
        let mut m0 = [[0.0; 2]; 2];
        let mut diag_sigma = 0.0;
        let mut diag_tau = 0.0;
        if self.has1 {
            let inv = 1.0 / pt.s1;
            m0[0][0] -= d * d * pt.rho * pt.rho * inv;
            m0[1][1] -= d * d * inv;
            diag_sigma += d * d * pt.rho * inv;
            diag_tau += d * d * inv;
        }
        if self.has2 {
            let inv = 1.0 / pt.s2;
            m0[0][0] -= d * d * inv;
            diag_sigma += d * d * inv;
        }
        for (v, s) in &cons {
            coef[0] += v[0] / s;
            coef[1] += v[1] / s;
        }

        let mut grad = vec![0.0; n];
        let mut diag = vec![0.0; n];
        for i in 0..n {
            let gap = u[i];
            grad[i] = t * pt.pi[i] + coef[0] * pt.sigma[i] + coef[1] * pt.tau[i] - self.floor_weight / gap;
            diag[i] = t * pt.pi[i]
                + diag_sigma * pt.sigma[i]
                + diag_tau * pt.tau[i]
                + self.floor_weight / (gap * gap);
        }
        let h0 = LowRankSystem::new(diag, &pt.sigma, &pt.tau, m0);
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let xb = h0.solve(&neg);
        if cons.is_empty() {
            return (grad, xb);
        }
        let g: Vec<Vec<f64>> = cons
            .iter()
            .map(|(v, _)| (0..n).map(|i| v[0] * pt.sigma[i] + v[1] * pt.tau[i]).collect())
            .collect();
        let hg: Vec<Vec<f64>> = g.iter().map(|col| h0.solve(col)).collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let xi: Vec<f64> = if cons.len() == 1 {
            vec![dot(&g[0], &xb) / (dot(&g[0], &hg[0]) + cons[0].1 * cons[0].1)]
        } else {
            let schur = [
                [dot(&g[0], &hg[0]) + cons[0].1 * cons[0].1, dot(&g[0], &hg[1])],
                [dot(&g[1], &hg[0]), dot(&g[1], &hg[1]) + cons[1].1 * cons[1].1],
            ];
            solve2(schur, [dot(&g[0], &xb), dot(&g[1], &xb)]).to_vec()
        };
        let step = (0..n)
            .map(|i| xb[i] - hg.iter().zip(&xi).map(|(col, x)| col[i] * x).sum::<f64>())
            .collect();
        (grad, step)
    }

    /// KKT residuals `(stationarity, complementarity, primal)` relative to
    /// the objective.
    ///
    /// Floor multipliers come from the barrier (`u_i - ℓ` is exact), but the
    /// constraint multipliers `1/(t s_j)` inherit the rounding error of the
    /// tiny slacks, so they are refitted by weighted least squares on the
    /// stationarity condition instead.
    fn certificate(&self, u: &[f64], pt: &Point, t: f64) -> (f64, f64, f64) {
        let n = u.len();
        let kappa: Vec<f64> = u.iter().map(|x| self.floor_weight / (t * x)).collect();
        let mut q: Vec<f64> = (0..n).map(|i| pt.pi[i] - kappa[i]).collect();
        let w: Vec<f64> = (0..n).map(|i| 1.0 / (pt.pi[i] + kappa[i])).collect();
        let cons = self.constraint_gradients(pt);
        let col = |v: &[f64; 2]| -> Vec<f64> { (0..n).map(|i| v[0] * pt.sigma[i] + v[1] * pt.tau[i]).collect() };
        // slack constraints keep their barrier multipliers, which are accurate there
        let mut nu = Vec::new();
        let mut tight = Vec::new();
        for (v, s) in &cons {
            if *s >= TIGHT_SLACK {
                let mult = 1.0 / (t * s);
                let c = col(v);
                q.iter_mut().zip(&c).for_each(|(qi, ci)| *qi += mult * ci);
                nu.push((mult, *s));
            } else {
                tight.push((col(v), *s));
            }
        }
        let wdot = |a: &[f64], b: &[f64]| (0..n).map(|i| w[i] * a[i] * b[i]).sum::<f64>();
        let fitted: Vec<f64> = match tight.len() {
            0 => vec![],
            1 => vec![-wdot(&tight[0].0, &q) / wdot(&tight[0].0, &tight[0].0)],
            _ => solve2(
                [
                    [wdot(&tight[0].0, &tight[0].0), wdot(&tight[0].0, &tight[1].0)],
                    [wdot(&tight[1].0, &tight[0].0), wdot(&tight[1].0, &tight[1].0)],
                ],
                [-wdot(&tight[0].0, &q), -wdot(&tight[1].0, &q)],
            )
            .to_vec(),
        };
        for (c, f) in tight.iter().zip(&fitted) {
            q.iter_mut().zip(&c.0).for_each(|(qi, ci)| *qi += f * ci);
            nu.push((*f, c.1));
        }
        // with the constraint multipliers fixed, the best floor multipliers
        // are the positive parts of the remaining stationarity terms
        let mut stationarity = 0.0;
        let mut floor_gap = 0.0;
        for i in 0..n {
            let r = q[i] + kappa[i];
            if r >= 0.0 {
                floor_gap += r * u[i];
            } else {
                stationarity -= r;
            }
        }
        let dual_infeasibility = nu.iter().map(|(v, _)| (-v).max(0.0)).fold(0.0, f64::max);
        let constraint_gap: f64 = nu.iter().map(|(v, s)| v.max(0.0) * s).sum();
        let primal = cons.iter().map(|(_, s)| -s).fold(0.0, f64::max);
        (
            stationarity / pt.f0 + dual_infeasibility,
            (floor_gap + constraint_gap) / pt.f0,
            primal,
        )
    }
}

fn solution(problem: &DiscretizedProblem, pt: &Point, kkt: f64, iterations: usize, floor: f64) -> GpSolution {
    GpSolution {
        objective: problem.objective(&pt.levels),
        floor_active: pt.levels.iter().any(|p| *p <= 2.0 * floor),
        levels: pt.levels.clone(),
        kkt_residual: kkt,
        iterations,
    }
}

pub fn solve_gp(problem: &DiscretizedProblem) -> Result<GpSolution> {
    solve_gp_with(problem, None, GpOptions::default())
}

/// Barrier-method solve. `grid`, when given, supplies cell midpoints for the
/// `h^{-1/2}` starting shape.
pub fn solve_gp_with(problem: &DiscretizedProblem, grid: Option<&Grid>, opts: GpOptions) -> Result<GpSolution> {
    let n = problem.len();
    if n == 0 || problem.c.len() != n {
        return Err(Error::InvalidGrid("empty or mismatched coefficient vectors".into()));
    }
    if problem.a.iter().chain(&problem.c).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidGrid("cell coefficients must be finite and > 0".into()));
    }
    if !(problem.big_a >= 0.0 && problem.big_b > 0.0 && problem.big_c >= 0.0 && problem.lambda_d >= 0.0) {
        return Err(Error::param("problem", "need A >= 0, B > 0, C >= 0, lambda_d >= 0"));
    }
    let seed = seed_levels(problem, grid, opts.floor)?;
    let has1 = problem.has_d2d_constraint();
    let has2 = problem.has_cellular_constraint();
    let barrier = Barrier {
        p: problem,
        ell: opts.floor.ln(),
        e0: problem.objective(&seed),
        has1,
        has2,
        floor_weight: 1.0 / n as f64,
        m: (1 + has1 as usize + has2 as usize) as f64,
    };
    // iterate on the floor gap `ln p - ln p_min`, exact near the floor
    let mut u: Vec<f64> = seed.iter().map(|p| p.ln() - barrier.ell).collect();
    let mut pt = barrier.eval(&u).ok_or(Error::NumericFailure {
        context: "GP seed evaluation",
        achieved: f64::NAN,
    })?;
    let mut t = barrier.m / pt.f0;
    let mut steps = 0;

    loop {
        let mut last_decrement = f64::INFINITY;
        loop {
            let (grad, dir) = barrier.newton(&u, &pt, t);
            let slope: f64 = grad.iter().zip(&dir).map(|(g, x)| g * x).sum();
            let decrement = -slope;
            // rounding floor, or no further progress from Newton
            if !(decrement > 1e-14) || (decrement < 1e-8 && decrement >= 0.5 * last_decrement) {
                break;
            }
            last_decrement = decrement;
            if steps >= opts.max_newton_steps {
                break;
            }
            steps += 1;
            let phi0 = barrier.value(&u, &pt, t);
            let mut s = 1.0;
            let mut accepted = None;
            for _ in 0..80 {
                let trial: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a + s * b).collect();
                if let Some(next) = barrier.eval(&trial) {
                    let phi1 = barrier.value(&trial, &next, t);
                    // near the centre the decrease is below rounding in phi
                    if decrement < 1e-3 || phi1 <= phi0 + 0.25 * s * slope {
                        accepted = Some((trial, next));
                        break;
                    }
                }
                s *= 0.5;
            }
            match accepted {
                Some((trial, next)) => {
                    u = trial;
                    pt = next;
                }
                None => break,
            }
        }
        let (st, co, pr) = barrier.certificate(&u, &pt, t);
        let kkt = st.max(co).max(pr);
        if barrier.m / (t * pt.f0) <= opts.gap_tol && kkt <= opts.kkt_tol {
            return Ok(solution(problem, &pt, kkt, steps, opts.floor));
        }
        if steps >= opts.max_newton_steps {
            return Err(Error::NonConvergence {
                iterations: steps,
                residual: kkt,
                best: Box::new(solution(problem, &pt, kkt, steps, opts.floor)),
            });
        }
        t *= opts.barrier_growth;
    }
}

/// The optimal dependent D2D policy on an `N`-cell grid truncated at `M`,
/// with its moments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependentOptimum {
    pub solution: GpSolution,
    pub policy: PowerPolicy,
    pub moments: PolicyMoments,
    pub grid: Grid,
}

pub fn dependent_minimum_power(
    params: &NetworkParams,
    policy_c: &PowerPolicy,
    n: usize,
    m: f64,
) -> Result<DependentOptimum> {
    let region = feasibility_dependent(params, policy_c)?;
    if !region.contains(params.lambda_c(), params.lambda_d()) {
        return Err(Error::InfeasibleDensities(format!(
            "({}, {}) outside the dependent region {:.6e} lambda_c + {:.6e} lambda_d <= {:.6e} (load {:.6})",
            params.lambda_c(),
            params.lambda_d(),
            region.coef_c,
            region.coef_d,
            region.bound,
            region.load(params.lambda_c(), params.lambda_d())
        )));
    }
    let grid = build_grid(n, m, DEFAULT_SPLIT, DEFAULT_DENSE_CAP)?;
    let moments_c = policy_moments(policy_c, params.delta())?;
    let problem = discretize(&grid, params, &moments_c)?;
    let solution = solve_gp_with(&problem, Some(&grid), GpOptions::default())?;
    let policy = PowerPolicy::piecewise(grid.points().to_vec(), solution.levels.clone())?;
    let moments = policy_moments(&policy, params.delta())?;
    Ok(DependentOptimum { solution, policy, moments, grid })
}
