//! Weighted-kernel density-ratio fitting (WKDRF): learn the kernel log-ratio
//! coefficients by minimizing a variational upper bound on the expected SPRT
//! sampling cost,
//!
//! ```text
//! ω0/D̂01 + ω1/D̂10 + (λ/2)·αᵀKα
//! ```
//!
//! subject to the normalization constraints E[r̂|H0] ≤ 1 and E[r̂⁻¹|H1] ≤ 1
//! taken as sample means over the training data. Here D̂01 = −u0ᵀα and
//! D̂10 = u1ᵀα are empirical per-sample divergence estimates (u0, u1 the
//! per-class feature means) and ω0, ω1 are prior-weighted constants derived
//! from the target error rates. Both denominators are kept positive; the
//! objective is convex on that domain and is solved with a logarithmic
//! barrier method whose inner loop is plain gradient descent with Armijo
//! backtracking — derivative-only, and every accepted iterate stays strictly
//! feasible.

use serde::Serialize;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::kernel::{self, KernelMatrix, KernelModel};
use crate::numeric::{dot, log_sum_exp, norm2};
use crate::rng::{derive_seed, TAG_CENTERS, TAG_SPLIT};
use crate::sprt::{cost_bracket0, cost_bracket1};

/// Tolerances and budgets for the barrier solver. Defaults match the
/// documented contract; everything is overridable.
#[derive(Debug, Clone, Copy)]
pub struct SolverSettings {
    /// Stage exit: ‖∇(barrier objective)‖ at or below this.
    pub grad_tol: f64,
    /// Stage exit: a heavily backtracked accepted step (length ≤ 1e-3, the
    /// curvature-limited regime near a barrier wall) improves the objective
    /// by no more than `rel_obj_tol · (1 + |value|)`. While near-unit steps
    /// are still accepted, termination is left to the gradient criterion.
    pub rel_obj_tol: f64,
    /// Number of barrier stages; μ starts at 1 and shrinks by
    /// `barrier_decrement` each stage (9 stages → final μ = 1e-8).
    pub max_barrier_stages: usize,
    pub barrier_decrement: f64,
    /// Inner gradient-descent iteration budget per stage.
    pub max_inner_iters: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            grad_tol: 1e-6,
            rel_obj_tol: 1e-9,
            max_barrier_stages: 9,
            barrier_decrement: 10.0,
            max_inner_iters: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WkdrfConfig {
    /// Target false-alarm probability P_F, in (0, 0.5).
    pub target_pf: f64,
    /// Target miss probability P_M, in (0, 0.5).
    pub target_pm: f64,
    /// Prior π0 of hypothesis H0; π1 = 1 − π0.
    pub prior0: f64,
    /// Ridge weight λ on αᵀKα.
    pub lambda: f64,
    /// Kernel bandwidth σ (σ² in the exponent denominator).
    pub sigma: f64,
    /// Number of kernel centers drawn from the pooled training data.
    pub num_centers: usize,
    pub seed: u64,
    pub solver: SolverSettings,
}

impl Default for WkdrfConfig {
    fn default() -> Self {
        Self {
            target_pf: 0.1,
            target_pm: 0.1,
            prior0: 0.5,
            lambda: 1e-3,
            sigma: 1.0,
            num_centers: 25,
            seed: 0,
            solver: SolverSettings::default(),
        }
    }
}

impl WkdrfConfig {
    pub fn prior1(&self) -> f64 {
        1.0 - self.prior0
    }

    pub fn validate(&self) -> Result<()> {
        weights_from_targets(self.target_pf, self.target_pm, self.prior0, self.prior1())?;
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if self.num_centers == 0 {
            return Err(Error::InvalidParameter("num_centers must be >= 1".into()));
        }
        Ok(())
    }
}

/// How the strictly feasible starting point was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InitPath {
    /// The normalized equipartition direction −u0/‖u0‖ + u1/‖u1‖ worked.
    Equipartition,
    /// Projected-subgradient search for a direction with both divergence
    /// signs positive was needed first.
    Subgradient,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitDiagnostics {
    /// Final regularized objective ω0/D̂01 + ω1/D̂10 + (λ/2)αᵀKα.
    pub objective: f64,
    /// Final constraint residuals; strictly negative at an interior solution.
    pub c0: f64,
    pub c1: f64,
    pub d01_hat: f64,
    pub d10_hat: f64,
    /// Accepted-iteration count per barrier stage.
    pub stage_iterations: Vec<usize>,
    pub init_path: InitPath,
    /// False when the final barrier stage — the subproblem whose minimizer is
    /// returned — exhausted its iteration budget before reaching a tolerance.
    /// Earlier stages are deliberately solved loosely (warm starts only need
    /// approximate centering); check `stage_iterations` for their budgets.
    pub converged: bool,
}

/// One accepted iterate (or stage entry) of the barrier solve, for
/// diagnostics and tests.
#[derive(Debug, Clone, Copy)]
pub struct TracePoint {
    pub stage: usize,
    pub barrier_value: f64,
    pub c0: f64,
    pub c1: f64,
    pub d01: f64,
    pub d10: f64,
}

/// ω0 = π0·[pf·log(pf/(1−pm)) + (1−pf)·log((1−pf)/pm)] and the mirrored ω1:
/// the prior-weighted expected log-ratio displacements at the target
/// operating point, i.e. the numerators of the SPRT cost.
pub fn weights_from_targets(pf: f64, pm: f64, pi0: f64, pi1: f64) -> Result<(f64, f64)> {
    if !(pf > 0.0 && pf < 0.5 && pm > 0.0 && pm < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "targets must lie in (0, 0.5), got pf={pf}, pm={pm}"
        )));
    }
    if !(pi0 > 0.0 && pi1 > 0.0 && (pi0 + pi1 - 1.0).abs() <= 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "priors must be positive and sum to 1, got pi0={pi0}, pi1={pi1}"
        )));
    }
    Ok((pi0 * cost_bracket0(pf, pm), pi1 * cost_bracket1(pf, pm)))
}

/// (D̂01, D̂10) = (−u0ᵀα, u1ᵀα).
pub fn divergence_estimates(alpha: &[f64], u0: &[f64], u1: &[f64]) -> (f64, f64) {
    (-dot(u0, alpha), dot(u1, alpha))
}

/// The regularized bound ω0/D̂01 + ω1/D̂10 + (λ/2)αᵀKα. Errs if α is outside
/// the open domain (a divergence estimate is not strictly positive).
pub fn objective(
    alpha: &[f64],
    u0: &[f64],
    u1: &[f64],
    omega0: f64,
    omega1: f64,
    lambda: f64,
    k: &KernelMatrix,
) -> Result<f64> {
    let (d01, d10) = divergence_estimates(alpha, u0, u1);
    if !(d01 > 0.0 && d10 > 0.0) {
        return Err(Error::Infeasible(format!(
            "alpha outside the objective domain: D01_hat={d01}, D10_hat={d10}"
        )));
    }
    Ok(omega0 / d01 + omega1 / d10 + 0.5 * lambda * k.quad_form(alpha))
}

/// ∇objective = ω0·u0/D̂01² − ω1·u1/D̂10² + λ·Kα.
pub fn gradient(
    alpha: &[f64],
    u0: &[f64],
    u1: &[f64],
    omega0: f64,
    omega1: f64,
    lambda: f64,
    k: &KernelMatrix,
) -> Result<Vec<f64>> {
    let (d01, d10) = divergence_estimates(alpha, u0, u1);
    if !(d01 > 0.0 && d10 > 0.0) {
        return Err(Error::Infeasible(format!(
            "alpha outside the objective domain: D01_hat={d01}, D10_hat={d10}"
        )));
    }
    let ka = k.mul_vec(alpha);
    Ok((0..alpha.len())
        .map(|c| omega0 * u0[c] / (d01 * d01) - omega1 * u1[c] / (d10 * d10) + lambda * ka[c])
        .collect())
}

/// Constraint residuals (c0, c1) = (mean exp(g) − 1 over class 0,
/// mean exp(−g) − 1 over class 1); feasible iff both are negative. Overflow
/// propagates as +∞ rather than an error.
pub fn constraints(alpha: &[f64], feats0: &[Vec<f64>], feats1: &[Vec<f64>]) -> (f64, f64) {
    let mean_exp = |feats: &[Vec<f64>], sign: f64| {
        let logs: Vec<f64> = feats.iter().map(|f| sign * dot(f, alpha)).collect();
        (log_sum_exp(&logs) - (feats.len() as f64).ln()).exp()
    };
    (mean_exp(feats0, 1.0) - 1.0, mean_exp(feats1, -1.0) - 1.0)
}

fn column_mean(feats: &[Vec<f64>], c: usize) -> Vec<f64> {
    let mut u = vec![0.0; c];
    for f in feats {
        for (ui, fi) in u.iter_mut().zip(f) {
            *ui += fi;
        }
    }
    let n = feats.len() as f64;
    u.iter_mut().for_each(|v| *v /= n);
    u
}

/// Find a strictly feasible starting point deep inside the region: take the
/// normalized equipartition direction −u0/‖u0‖ + u1/‖u1‖ and scale it to the
/// magnitude (over a log-spaced grid) that minimizes the worse of the two
/// constraint residuals. Both residuals tend to 0⁻ as t → 0 and blow up for
/// large t, so the minimizer sits at a comfortable interior magnitude rather
/// than against a wall, which plain gradient descent handles badly. Strict
/// feasibility already implies both divergence estimates are positive, by
/// Jensen's inequality. If the direction itself has a wrong divergence sign,
/// first search for a better one by maximizing min(−u0ᵀd, u1ᵀd) over the
/// unit sphere (projected subgradient, 200 steps).
pub fn init_alpha(
    u0: &[f64],
    u1: &[f64],
    feats0: &[Vec<f64>],
    feats1: &[Vec<f64>],
) -> Result<(Vec<f64>, InitPath)> {
    let (n0, n1) = (norm2(u0), norm2(u1));
    if n0 == 0.0 || n1 == 0.0 {
        return Err(Error::Infeasible("a class feature mean is the zero vector".into()));
    }
    let c = u0.len();
    let mut d: Vec<f64> = (0..c).map(|i| -u0[i] / n0 + u1[i] / n1).collect();
    let nd = norm2(&d);
    if nd > 0.0 {
        d.iter_mut().for_each(|v| *v /= nd);
    }
    let signs_ok = |d: &[f64]| dot(u0, d) < 0.0 && dot(u1, d) > 0.0;

    let path = if signs_ok(&d) {
        InitPath::Equipartition
    } else {
        // maximize h(d) = min(−u0ᵀd, u1ᵀd); a subgradient is −u0 or u1,
        // whichever term currently attains the minimum
        for step in 0..200 {
            let (h0, h1) = (-dot(u0, &d), dot(u1, &d));
            let g: Vec<f64> = if h0 <= h1 {
                u0.iter().map(|v| -v).collect()
            } else {
                u1.to_vec()
            };
            let eta = 0.5 / ((step + 1) as f64).sqrt();
            for i in 0..c {
                d[i] += eta * g[i];
            }
            let n = norm2(&d);
            if n > 0.0 {
                d.iter_mut().for_each(|v| *v /= n);
            }
        }
        if !signs_ok(&d) {
            let (h0, h1) = (-dot(u0, &d), dot(u1, &d));
            return Err(Error::Infeasible(format!(
                "no direction with positive divergence estimates on both sides \
                 (best found: -u0'd = {h0:.3e}, u1'd = {h1:.3e}); \
                 the classes may be indistinguishable in feature space"
            )));
        }
        InitPath::Subgradient
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for k in -40..=6 {
        let t = (k as f64).exp2();
        let alpha: Vec<f64> = d.iter().map(|v| t * v).collect();
        let (c0, c1) = constraints(&alpha, feats0, feats1);
        let (d01, d10) = (-dot(u0, &alpha), dot(u1, &alpha));
        if !(c0 < 0.0 && c1 < 0.0 && d01 > 0.0 && d10 > 0.0) {
            continue;
        }
        let worst = c0.max(c1);
        if best.as_ref().is_none_or(|(w, _)| worst < *w) {
            best = Some((worst, alpha));
        }
    }
    match best {
        Some((_, alpha)) => Ok((alpha, path)),
        None => Err(Error::Infeasible(
            "no strictly feasible scaling of the initialization direction (constraints \
             remain nonnegative at all tested magnitudes)"
                .into(),
        )),
    }
}

/// Everything precomputed for one fit: per-sample feature vectors, their
/// class means, the Gram matrix, and the objective weights.
struct Problem<'a> {
    feats0: &'a [Vec<f64>],
    feats1: &'a [Vec<f64>],
    u0: Vec<f64>,
    u1: Vec<f64>,
    omega0: f64,
    omega1: f64,
    lambda: f64,
    k: &'a KernelMatrix,
}

struct PointEval {
    barrier_value: f64,
    c0: f64,
    c1: f64,
    d01: f64,
    d10: f64,
}

impl Problem<'_> {
    /// Barrier objective at α, or None when α is not strictly feasible (open
    /// domain violated, a constraint nonnegative, or overflow).
    fn eval(&self, alpha: &[f64], mu: f64) -> Option<PointEval> {
        let (d01, d10) = divergence_estimates(alpha, &self.u0, &self.u1);
        if !(d01 > 0.0 && d10 > 0.0) {
            return None;
        }
        let (c0, c1) = constraints(alpha, self.feats0, self.feats1);
        if !(c0 < 0.0 && c1 < 0.0) {
            return None;
        }
        let value = self.omega0 / d01 + self.omega1 / d10 + 0.5 * self.lambda * self.k.quad_form(alpha)
            - mu * ((-c0).ln() + (-c1).ln());
        if !value.is_finite() {
            return None;
        }
        Some(PointEval { barrier_value: value, c0, c1, d01, d10 })
    }

    /// Gradient of the barrier objective at a strictly feasible α:
    /// ∇objective + μ·∇c0/(−c0) + μ·∇c1/(−c1).
    fn barrier_grad(&self, alpha: &[f64], mu: f64, at: &PointEval) -> Vec<f64> {
        let c = alpha.len();
        let ka = self.k.mul_vec(alpha);
        let mut g: Vec<f64> = (0..c)
            .map(|i| {
                self.omega0 * self.u0[i] / (at.d01 * at.d01)
                    - self.omega1 * self.u1[i] / (at.d10 * at.d10)
                    + self.lambda * ka[i]
            })
            .collect();
        // ∇c0 = mean of e^{g(x)}·φ(x) over class 0; ∇c1 = −mean of e^{−g}·φ over class 1
        let m = self.feats0.len() as f64;
        for f in self.feats0 {
            let w = dot(f, alpha).exp() / m;
            for i in 0..c {
                g[i] += mu * w * f[i] / (-at.c0);
            }
        }
        let n = self.feats1.len() as f64;
        for f in self.feats1 {
            let w = (-dot(f, alpha)).exp() / n;
            for i in 0..c {
                g[i] -= mu * w * f[i] / (-at.c1);
            }
        }
        g
    }
}

const ARMIJO_SLOPE: f64 = 1e-4;
const ARMIJO_SHRINK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
/// Accepted step length below which the relative-objective stage exit may
/// fire; near-unit steps leave termination to the gradient test instead.
const REL_OBJ_STEP_GATE: f64 = 1e-3;

/// Fit a model. `fit_traced` additionally records every accepted iterate
/// (plus each stage's entry point) for solver diagnostics.
pub fn fit(train: &LabeledDataset, config: &WkdrfConfig) -> Result<(KernelModel, FitDiagnostics)> {
    let (model, diag, _) = fit_traced(train, config, false)?;
    Ok((model, diag))
}

pub fn fit_traced(
    train: &LabeledDataset,
    config: &WkdrfConfig,
    record: bool,
) -> Result<(KernelModel, FitDiagnostics, Vec<TracePoint>)> {
    config.validate()?;
    let centers = kernel::pick_centers(train, config.num_centers, derive_seed(config.seed, &[TAG_CENTERS]))?;
    let k = KernelMatrix::new(&centers, config.sigma)?;
    let feats0 = batch_features(train.class0(), &centers, config.sigma)?;
    let feats1 = batch_features(train.class1(), &centers, config.sigma)?;
    let u0 = column_mean(&feats0, centers.len());
    let u1 = column_mean(&feats1, centers.len());
    let (omega0, omega1) =
        weights_from_targets(config.target_pf, config.target_pm, config.prior0, config.prior1())?;

    let problem = Problem {
        feats0: &feats0,
        feats1: &feats1,
        u0,
        u1,
        omega0,
        omega1,
        lambda: config.lambda,
        k: &k,
    };
    let (mut alpha, init_path) = init_alpha(&problem.u0, &problem.u1, &feats0, &feats1)?;

    let s = config.solver;
    let mut trace = Vec::new();
    let mut stage_iterations = Vec::with_capacity(s.max_barrier_stages);
    let mut converged = true;
    let mut mu = 1.0;
    for stage in 0..s.max_barrier_stages {
        let mut at = problem
            .eval(&alpha, mu)
            .expect("iterate stays strictly feasible across stages");
        if record {
            trace.push(trace_point(stage, &at));
        }
        let mut iters = 0;
        let mut hit_tolerance = false;
        while iters < s.max_inner_iters {
            let g = problem.barrier_grad(&alpha, mu, &at);
            if norm2(&g) <= s.grad_tol {
                hit_tolerance = true;
                break;
            }
            // backtracking line search along −g, rejecting infeasible points
            let slope: f64 = -dot(&g, &g);
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_BACKTRACKS {
                let cand: Vec<f64> = alpha.iter().zip(&g).map(|(a, gi)| a - t * gi).collect();
                if let Some(e) = problem.eval(&cand, mu) {
                    if e.barrier_value <= at.barrier_value + ARMIJO_SLOPE * t * slope {
                        accepted = Some((cand, e));
                        break;
                    }
                }
                t *= ARMIJO_SHRINK;
            }
            let Some((cand, e)) = accepted else {
                // no acceptable step exists at f64 resolution; the stage is done
                hit_tolerance = true;
                break;
            };
            let drop = at.barrier_value - e.barrier_value;
            alpha = cand;
            at = e;
            iters += 1;
            if record {
                trace.push(trace_point(stage, &at));
            }
            // Relative-objective exit, gated on heavily backtracked steps. When
            // the line search still accepts near-unit steps, a small drop just
            // means the gradient is small, and the gradient test above should
            // decide termination. Once accepted steps are curvature-limited
            // (t far below 1, the barrier-wall regime), per-step drops stall
            // at a floor no matter how long we iterate, and the relative drop
            // is the meaningful stopping signal.
            if iters > 1 && t <= REL_OBJ_STEP_GATE && drop <= s.rel_obj_tol * (1.0 + at.barrier_value.abs()) {
                hit_tolerance = true;
                break;
            }
        }
        stage_iterations.push(iters);
        // Intermediate barrier stages are deliberately solved loosely: the
        // warm start for the next stage only needs approximate centering, and
        // the per-stage iteration counts are reported in the diagnostics. The
        // run is flagged non-converged only if the *final* subproblem (the one
        // whose minimizer we actually return) exhausts its budget.
        if !hit_tolerance && stage + 1 == s.max_barrier_stages {
            converged = false;
        }
        mu /= s.barrier_decrement;
    }

    let (c0, c1) = constraints(&alpha, &feats0, &feats1);
    let (d01_hat, d10_hat) = divergence_estimates(&alpha, &problem.u0, &problem.u1);
    let final_objective = objective(
        &alpha,
        &problem.u0,
        &problem.u1,
        omega0,
        omega1,
        config.lambda,
        &k,
    )?;
    let diagnostics = FitDiagnostics {
        objective: final_objective,
        c0,
        c1,
        d01_hat,
        d10_hat,
        stage_iterations,
        init_path,
        converged,
    };
    Ok((KernelModel::new(config.sigma, centers, alpha)?, diagnostics, trace))
}

fn trace_point(stage: usize, at: &PointEval) -> TracePoint {
    TracePoint {
        stage,
        barrier_value: at.barrier_value,
        c0: at.c0,
        c1: at.c1,
        d01: at.d01,
        d10: at.d10,
    }
}

pub(crate) fn batch_features(
    samples: &[Vec<f64>],
    centers: &[Vec<f64>],
    sigma: f64,
) -> Result<Vec<Vec<f64>>> {
    samples.iter().map(|s| kernel::feature_vec(s, centers, sigma)).collect()
}

/// The unregularized bound ω0/D̂01 + ω1/D̂10 of a model evaluated on held-out
/// data; +∞ when either divergence estimate is not strictly positive.
pub fn holdout_bound(
    model: &KernelModel,
    data: &LabeledDataset,
    omega0: f64,
    omega1: f64,
) -> Result<f64> {
    let f0 = batch_features(data.class0(), &model.centers, model.sigma)?;
    let f1 = batch_features(data.class1(), &model.centers, model.sigma)?;
    let u0 = column_mean(&f0, model.centers.len());
    let u1 = column_mean(&f1, model.centers.len());
    let (d01, d10) = divergence_estimates(&model.alpha, &u0, &u1);
    if d01 > 0.0 && d10 > 0.0 {
        Ok(omega0 / d01 + omega1 / d10)
    } else {
        Ok(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CvPoint {
    pub sigma: f64,
    pub lambda: f64,
    /// Unregularized holdout bound; +∞ for infeasible or degenerate fits.
    pub score: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CvSelection {
    pub sigma: f64,
    pub lambda: f64,
    pub table: Vec<CvPoint>,
}

/// Pick the finite-score point with the smallest score, breaking ties toward
/// smaller σ and then smaller λ. None when every score is infinite.
pub(crate) fn select_best(table: &[CvPoint]) -> Option<CvPoint> {
    table
        .iter()
        .filter(|p| p.score.is_finite())
        .min_by(|a, b| {
            a.score
                .total_cmp(&b.score)
                .then(a.sigma.total_cmp(&b.sigma))
                .then(a.lambda.total_cmp(&b.lambda))
        })
        .copied()
}

/// Single-split cross-validation: fit each (σ, λ) on the training side and
/// score the unregularized bound on the holdout side; refitting on the full
/// data with the winner is the caller's move. Grid points run independently
/// (and in parallel); failures score +∞ rather than aborting the grid.
pub fn cross_validate(
    data: &LabeledDataset,
    base: &WkdrfConfig,
    sigma_grid: &[f64],
    lambda_grid: &[f64],
    holdout_fraction: f64,
) -> Result<CvSelection> {
    if sigma_grid.is_empty() || lambda_grid.is_empty() {
        return Err(Error::InvalidParameter("cross-validation grids must be non-empty".into()));
    }
    base.validate()?;
    let (omega0, omega1) =
        weights_from_targets(base.target_pf, base.target_pm, base.prior0, base.prior1())?;
    let (train, holdout) = data.split(holdout_fraction, derive_seed(base.seed, &[TAG_SPLIT]))?;

    let grid: Vec<(f64, f64)> = sigma_grid
        .iter()
        .flat_map(|&s| lambda_grid.iter().map(move |&l| (s, l)))
        .collect();
    use rayon::prelude::*;
    let table: Vec<CvPoint> = grid
        .par_iter()
        .map(|&(sigma, lambda)| {
            let cfg = WkdrfConfig { sigma, lambda, ..base.clone() };
            let score = match fit(&train, &cfg) {
                Ok((model, _)) => holdout_bound(&model, &holdout, omega0, omega1)
                    .unwrap_or(f64::INFINITY),
                Err(_) => f64::INFINITY,
            };
            CvPoint { sigma, lambda, score }
        })
        .collect();

    match select_best(&table) {
        Some(best) => Ok(CvSelection { sigma: best.sigma, lambda: best.lambda, table }),
        None => Err(Error::Infeasible("all cross-validation grid points are infeasible".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::mixture::{benchmark_specs, gen_mixture_samples};
    use approx::assert_relative_eq;
    use rand::Rng;

    const E_NEG_1: f64 = 0.36787944117144233;

    #[test]
    fn weights_hand_values() {
        let (w0, w1) = weights_from_targets(0.1, 0.1, 0.5, 0.5).unwrap();
        assert_relative_eq!(w0, 0.8788898309344879, max_relative = 1e-14);
        assert_relative_eq!(w1, 0.8788898309344879, max_relative = 1e-14);
        assert_eq!(w0.to_bits(), w1.to_bits(), "symmetric targets give equal weights exactly");

        let (_, w1) = weights_from_targets(0.01, 0.05, 0.5, 0.5).unwrap();
        assert_relative_eq!(w1, 2.0884494750677445, max_relative = 1e-12);
        assert!((w1 - 2.088451).abs() < 1e-4, "matches the hand-rounded value");

        assert!(weights_from_targets(0.5, 0.1, 0.5, 0.5).is_err());
        assert!(weights_from_targets(0.1, 0.1, 0.7, 0.5).is_err());
    }

    /// Two centers √2 apart with σ=√2 (mutual kernel e^{−1}), one training
    /// sample per class sitting exactly on its class's center.
    struct Toy {
        feats0: Vec<Vec<f64>>,
        feats1: Vec<Vec<f64>>,
        u0: Vec<f64>,
        u1: Vec<f64>,
        k: KernelMatrix,
    }

    fn toy() -> Toy {
        let centers = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let sigma = std::f64::consts::SQRT_2;
        let k = KernelMatrix::new(&centers, sigma).unwrap();
        let feats0 = batch_features(&[vec![0.0, 0.0]], &centers, sigma).unwrap();
        let feats1 = batch_features(&[vec![1.0, 1.0]], &centers, sigma).unwrap();
        let u0 = feats0[0].clone();
        let u1 = feats1[0].clone();
        Toy { feats0, feats1, u0, u1, k }
    }

    #[test]
    fn objective_and_gradient_toy_values() {
        let t = toy();
        let alpha = [-1.0, 1.0];
        let (d01, d10) = divergence_estimates(&alpha, &t.u0, &t.u1);
        assert_relative_eq!(d01, 1.0 - E_NEG_1, max_relative = 1e-14);
        assert_relative_eq!(d10, 1.0 - E_NEG_1, max_relative = 1e-14);

        let f0 = objective(&alpha, &t.u0, &t.u1, 1.0, 1.0, 0.0, &t.k).unwrap();
        assert_relative_eq!(f0, 3.163953413738653, max_relative = 1e-13);
        let f1 = objective(&alpha, &t.u0, &t.u1, 1.0, 1.0, 1.0, &t.k).unwrap();
        assert_relative_eq!(f1, 3.7960739725672106, max_relative = 1e-13);

        let g = gradient(&alpha, &t.u0, &t.u1, 1.0, 1.0, 0.0, &t.k).unwrap();
        assert_relative_eq!(g[0], 1.5819767068693265, max_relative = 1e-13);
        assert_relative_eq!(g[1], -1.5819767068693265, max_relative = 1e-13);

        // outside the open domain
        assert!(objective(&[1.0, -1.0], &t.u0, &t.u1, 1.0, 1.0, 0.0, &t.k).is_err());
    }

    #[test]
    fn objective_scaling_homogeneity() {
        let t = toy();
        for s in [0.25, 0.5, 2.0, 7.5] {
            let base = objective(&[-1.0, 1.0], &t.u0, &t.u1, 1.0, 1.0, 0.0, &t.k).unwrap();
            let scaled = objective(&[-s, s], &t.u0, &t.u1, 1.0, 1.0, 0.0, &t.k).unwrap();
            assert_relative_eq!(scaled, base / s, max_relative = 1e-12);
            // gradient scales by 1/s²
            let g1 = gradient(&[-1.0, 1.0], &t.u0, &t.u1, 1.0, 1.0, 0.0, &t.k).unwrap();
            let gs = gradient(&[-s, s], &t.u0, &t.u1, 1.0, 1.0, 0.0, &t.k).unwrap();
            assert_relative_eq!(gs[0], g1[0] / (s * s), max_relative = 1e-12);
        }
    }

    #[test]
    fn constraints_toy_values() {
        let t = toy();
        let (c0, c1) = constraints(&[0.0, 0.0], &t.feats0, &t.feats1);
        assert_eq!((c0, c1), (0.0, 0.0), "zero model sits exactly on the boundary");
        let (c0, c1) = constraints(&[-1.0, 1.0], &t.feats0, &t.feats1);
        assert_relative_eq!(c0, -0.46853639461338437, max_relative = 1e-13);
        assert_relative_eq!(c1, -0.46853639461338437, max_relative = 1e-13);
    }

    /// A modest random problem shared by several solver tests.
    fn random_problem(seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>, Vec<f64>, KernelMatrix) {
        let (p0, p1) = benchmark_specs();
        let x0 = gen_mixture_samples(&p0, 40, seed);
        let x1 = gen_mixture_samples(&p1, 40, seed + 1);
        let data = LabeledDataset::new(x0, x1).unwrap();
        let centers = kernel::pick_centers(&data, 6, seed + 2).unwrap();
        let k = KernelMatrix::new(&centers, 1.0).unwrap();
        let f0 = batch_features(data.class0(), &centers, 1.0).unwrap();
        let f1 = batch_features(data.class1(), &centers, 1.0).unwrap();
        let u0 = column_mean(&f0, 6);
        let u1 = column_mean(&f1, 6);
        (f0, f1, u0, u1, k)
    }

    /// Random strictly feasible alphas, built by perturbing the feasible
    /// initializer and rejecting anything outside the region.
    fn feasible_alphas(count: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>, Vec<f64>, KernelMatrix, Vec<Vec<f64>>) {
        let (f0, f1, u0, u1, k) = random_problem(seed);
        let (base, _) = init_alpha(&u0, &u1, &f0, &f1).unwrap();
        let mut rng = crate::rng::rng_from(seed, &[77]);
        let mut out = Vec::new();
        let mut attempts = 0;
        while out.len() < count && attempts < 100_000 {
            attempts += 1;
            let cand: Vec<f64> = base
                .iter()
                .map(|b| b * rng.random_range(0.2..1.6) + rng.random_range(-0.05..0.05))
                .collect();
            let (c0, c1) = constraints(&cand, &f0, &f1);
            let (d01, d10) = divergence_estimates(&cand, &u0, &u1);
            if c0 < 0.0 && c1 < 0.0 && d01 > 0.0 && d10 > 0.0 {
                out.push(cand);
            }
        }
        assert!(out.len() >= count, "could not generate enough feasible points");
        (f0, f1, u0, u1, k, out)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (f0, f1, u0, u1, k, alphas) = feasible_alphas(10, 3);
        let _ = (&f0, &f1);
        let (w0, w1) = weights_from_targets(0.1, 0.1, 0.5, 0.5).unwrap();
        for alpha in &alphas {
            let g = gradient(alpha, &u0, &u1, w0, w1, 0.05, &k).unwrap();
            let h = 1e-6 * (1.0 + norm2(alpha));
            for i in 0..alpha.len() {
                let mut plus = alpha.clone();
                plus[i] += h;
                let mut minus = alpha.clone();
                minus[i] -= h;
                let fd = (objective(&plus, &u0, &u1, w0, w1, 0.05, &k).unwrap()
                    - objective(&minus, &u0, &u1, w0, w1, 0.05, &k).unwrap())
                    / (2.0 * h);
                let denom = g[i].abs().max(1e-8);
                assert!(
                    ((g[i] - fd) / denom).abs() <= 1e-5,
                    "component {i}: analytic {} vs fd {fd}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn barrier_gradient_matches_finite_differences() {
        let (f0, f1, u0, u1, k, alphas) = feasible_alphas(5, 4);
        let (omega0, omega1) = weights_from_targets(0.1, 0.1, 0.5, 0.5).unwrap();
        let problem = Problem {
            feats0: &f0,
            feats1: &f1,
            u0: u0.clone(),
            u1: u1.clone(),
            omega0,
            omega1,
            lambda: 0.05,
            k: &k,
        };
        let mu = 0.1;
        for alpha in &alphas {
            let at = problem.eval(alpha, mu).unwrap();
            let g = problem.barrier_grad(alpha, mu, &at);
            let h = 1e-6 * (1.0 + norm2(alpha));
            for i in 0..alpha.len() {
                let mut plus = alpha.clone();
                plus[i] += h;
                let mut minus = alpha.clone();
                minus[i] -= h;
                let fd = (problem.eval(&plus, mu).unwrap().barrier_value
                    - problem.eval(&minus, mu).unwrap().barrier_value)
                    / (2.0 * h);
                let denom = g[i].abs().max(1e-6);
                assert!(
                    ((g[i] - fd) / denom).abs() <= 1e-4,
                    "component {i}: analytic {} vs fd {fd}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn strict_constraint_feasibility_implies_positive_divergences() {
        // Jensen: mean e^g < 1 forces mean g < 0 on class 0 (so D̂01 > 0)
        let (_, _, u0, u1, _, alphas) = feasible_alphas(100, 5);
        for alpha in &alphas {
            let (d01, d10) = divergence_estimates(alpha, &u0, &u1);
            assert!(d01 > 0.0 && d10 > 0.0);
        }
    }

    #[test]
    fn midpoint_convexity_probe() {
        let (_, _, u0, u1, k, alphas) = feasible_alphas(200, 6);
        let (w0, w1) = weights_from_targets(0.1, 0.1, 0.5, 0.5).unwrap();
        let value = |a: &[f64]| objective(a, &u0, &u1, w0, w1, 0.05, &k).unwrap();
        for pair in alphas.chunks(2).take(100) {
            let (a, b) = (&pair[0], &pair[1]);
            let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
            // the feasible region is convex, so the midpoint is feasible too
            assert!(
                value(&mid) <= 0.5 * value(a) + 0.5 * value(b) + 1e-9,
                "convexity violated"
            );
        }
    }

    #[test]
    fn init_alpha_equipartition_example() {
        let u0 = vec![1.0, 0.0];
        let u1 = vec![0.0, 1.0];
        let f0 = vec![u0.clone()];
        let f1 = vec![u1.clone()];
        let (alpha, path) = init_alpha(&u0, &u1, &f0, &f1).unwrap();
        assert_eq!(path, InitPath::Equipartition);
        // Direction is the normalized −u0/‖u0‖ + u1/‖u1‖ = (−1, 1)/√2; the
        // scale is then chosen to sit as deep inside the feasible region as
        // the candidate grid allows, so only the direction is pinned here.
        assert!(alpha[0] < 0.0 && alpha[1] > 0.0);
        assert_eq!(alpha[0].to_bits(), (-alpha[1]).to_bits());
        let (c0, c1) = constraints(&alpha, &f0, &f1);
        let (d01, d10) = divergence_estimates(&alpha, &u0, &u1);
        assert!(c0 < 0.0 && c1 < 0.0 && d01 > 0.0 && d10 > 0.0);
        assert_relative_eq!(d01, d10, max_relative = 1e-14);
    }

    #[test]
    fn init_alpha_rejects_identical_classes() {
        let u = vec![0.5, 0.5];
        let f = vec![u.clone()];
        let err = init_alpha(&u, &u, &f, &f).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)), "got: {err}");
    }

    #[test]
    fn init_alpha_postconditions_on_random_problems() {
        for seed in 0..20 {
            let (f0, f1, u0, u1, _) = random_problem(seed);
            let (alpha, _) = init_alpha(&u0, &u1, &f0, &f1).unwrap();
            let (c0, c1) = constraints(&alpha, &f0, &f1);
            let (d01, d10) = divergence_estimates(&alpha, &u0, &u1);
            assert!(c0 < 0.0 && c1 < 0.0 && d01 > 0.0 && d10 > 0.0, "seed {seed}");
        }
    }

    #[test]
    fn fit_toy_problem_converges() {
        // the analytic 2-center toy as an actual dataset
        let data = LabeledDataset::new(vec![vec![0.0, 0.0]], vec![vec![1.0, 1.0]]).unwrap();
        let config = WkdrfConfig {
            sigma: std::f64::consts::SQRT_2,
            lambda: 0.1,
            num_centers: 2,
            ..WkdrfConfig::default()
        };
        let (model, diag) = fit(&data, &config).unwrap();
        assert!(diag.converged, "{diag:?}");
        assert!(diag.d01_hat > 0.0 && diag.d10_hat > 0.0);
        assert!(diag.c0 < 0.0 && diag.c1 < 0.0);

        // final barrier subproblem is solved to the gradient tolerance
        let feats0 = batch_features(data.class0(), &model.centers, model.sigma).unwrap();
        let feats1 = batch_features(data.class1(), &model.centers, model.sigma).unwrap();
        let u0 = column_mean(&feats0, 2);
        let u1 = column_mean(&feats1, 2);
        let (omega0, omega1) = weights_from_targets(0.1, 0.1, 0.5, 0.5).unwrap();
        let k = KernelMatrix::new(&model.centers, model.sigma).unwrap();
        let problem = Problem {
            feats0: &feats0,
            feats1: &feats1,
            u0,
            u1,
            omega0,
            omega1,
            lambda: 0.1,
            k: &k,
        };
        let mu_final = 1e-8;
        let at = problem.eval(&model.alpha, mu_final).unwrap();
        let g = problem.barrier_grad(&model.alpha, mu_final, &at);
        assert!(norm2(&g) <= 1e-6, "final gradient norm {}", norm2(&g));
    }

    #[test]
    fn fit_rejects_identical_classes() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0, 0.3]).collect();
        let data = LabeledDataset::new(xs.clone(), xs).unwrap();
        let config = WkdrfConfig { num_centers: 4, ..WkdrfConfig::default() };
        let err = fit(&data, &config).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)), "got: {err}");
    }

    #[test]
    fn fit_trace_shows_feasible_descent() {
        let (p0, p1) = benchmark_specs();
        let data = LabeledDataset::new(
            gen_mixture_samples(&p0, 200, 31),
            gen_mixture_samples(&p1, 200, 32),
        )
        .unwrap();
        let config = WkdrfConfig { num_centers: 8, lambda: 1e-2, ..WkdrfConfig::default() };
        let (_, diag, trace) = fit_traced(&data, &config, true).unwrap();
        assert!(!trace.is_empty());
        for p in &trace {
            assert!(p.c0 < 0.0 && p.c1 < 0.0 && p.d01 > 0.0 && p.d10 > 0.0, "infeasible iterate {p:?}");
        }
        for w in trace.windows(2) {
            if w[0].stage == w[1].stage {
                assert!(
                    w[1].barrier_value <= w[0].barrier_value + 1e-12,
                    "barrier objective increased within stage {}: {} -> {}",
                    w[0].stage,
                    w[0].barrier_value,
                    w[1].barrier_value
                );
            }
        }
        assert_eq!(diag.stage_iterations.len(), config.solver.max_barrier_stages);
    }

    #[test]
    fn fit_end_to_end_improves_on_initialization() {
        let (p0, p1) = benchmark_specs();
        let data = LabeledDataset::new(
            gen_mixture_samples(&p0, 500, 41),
            gen_mixture_samples(&p1, 500, 42),
        )
        .unwrap();
        let config = WkdrfConfig { num_centers: 10, lambda: 1e-2, ..WkdrfConfig::default() };
        let (_, _, trace) = fit_traced(&data, &config, true).unwrap();
        let first = trace.first().unwrap();
        let (model, diag) = fit(&data, &config).unwrap();
        // compare regularized objective at start vs end (first stage has μ=1;
        // compare its unbarriered part conservatively via the recorded values)
        assert!(
            diag.objective < first.barrier_value,
            "final objective {} should beat the initial barrier value {}",
            diag.objective,
            first.barrier_value
        );
        // and the fitted model generalizes: held-out divergence estimates positive
        let fresh = LabeledDataset::new(
            gen_mixture_samples(&p0, 2000, 43),
            gen_mixture_samples(&p1, 2000, 44),
        )
        .unwrap();
        let (w0, w1) = weights_from_targets(0.1, 0.1, 0.5, 0.5).unwrap();
        let bound = holdout_bound(&model, &fresh, w0, w1).unwrap();
        assert!(bound.is_finite(), "held-out divergences must be positive");
    }

    #[test]
    fn select_best_applies_tie_rules() {
        let p = |sigma, lambda, score| CvPoint { sigma, lambda, score };
        let best = select_best(&[
            p(2.0, 0.1, 5.0),
            p(1.0, 0.1, 5.0),
            p(1.0, 0.01, 5.0),
            p(4.0, 0.1, 7.0),
        ])
        .unwrap();
        assert_eq!((best.sigma, best.lambda), (1.0, 0.01), "smaller sigma, then smaller lambda");

        let best = select_best(&[p(1.0, 0.1, f64::INFINITY), p(2.0, 0.1, 9.0)]).unwrap();
        assert_eq!(best.sigma, 2.0, "infinite scores are never selected");
        assert!(select_best(&[p(1.0, 0.1, f64::INFINITY)]).is_none());
    }

    #[test]
    fn cross_validate_single_point_grid() {
        // Needs enough data that the held-out half still satisfies the fitted
        // model's normalization constraints; tiny splits land every grid
        // point on an infinite holdout score by design.
        let (p0, p1) = benchmark_specs();
        let data = LabeledDataset::new(
            gen_mixture_samples(&p0, 400, 71),
            gen_mixture_samples(&p1, 400, 72),
        )
        .unwrap();
        let base = WkdrfConfig { num_centers: 10, seed: 9, ..WkdrfConfig::default() };
        let sel = cross_validate(&data, &base, &[1.0], &[1e-2], 0.5).unwrap();
        assert_eq!((sel.sigma, sel.lambda), (1.0, 1e-2));
        assert_eq!(sel.table.len(), 1);
        assert!(sel.table[0].score.is_finite());
        assert!(sel.table[0].score > 0.0 && sel.table[0].score < 20.0);
    }

    #[test]
    fn cross_validate_is_deterministic() {
        let (p0, p1) = benchmark_specs();
        let data = LabeledDataset::new(
            gen_mixture_samples(&p0, 150, 61),
            gen_mixture_samples(&p1, 150, 62),
        )
        .unwrap();
        let base = WkdrfConfig { num_centers: 6, seed: 3, ..WkdrfConfig::default() };
        let a = cross_validate(&data, &base, &[0.5, 1.0], &[1e-3, 1e-1], 0.5).unwrap();
        let b = cross_validate(&data, &base, &[0.5, 1.0], &[1e-3, 1e-1], 0.5).unwrap();
        assert_eq!((a.sigma, a.lambda), (b.sigma, b.lambda));
        for (x, y) in a.table.iter().zip(&b.table) {
            assert_eq!(x.score.to_bits(), y.score.to_bits());
        }
    }

    #[test]
    fn cross_validate_errors_when_everything_is_infeasible() {
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 5) as f64, 1.0]).collect();
        let data = LabeledDataset::new(xs.clone(), xs).unwrap();
        let base = WkdrfConfig { num_centers: 4, ..WkdrfConfig::default() };
        let err = cross_validate(&data, &base, &[1.0], &[1e-2], 0.5).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)), "got: {err}");
    }
}
