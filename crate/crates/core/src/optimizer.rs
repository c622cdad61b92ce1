//! Proximal gradient solver for the nuclear-norm regularized BTL estimator.
//!
//! Minimizes `L(theta) + lambda * ||theta||_*` over row-centered matrices,
//! optionally intersected with an entrywise box `|theta_kl| <= b`. Each step
//! takes a gradient step on `L`, applies singular value thresholding, and
//! projects back onto the constraint set.
//!
//! Without the box constraint the projection is exact: the gradient has zero
//! row sums and thresholding keeps the row space orthogonal to the all-ones
//! vector, so iterates never leave the centered subspace. With the box on, the
//! prox-then-project composition is only an approximation of the joint prox.

use faer::{Mat, Scale};
use serde::{Deserialize, Serialize};

use crate::data::ComparisonDataset;
use crate::error::{Error, Result};
use crate::linalg::{self, ThinSvd};
use crate::loss::{evaluate, LossEvaluation};
use crate::matrix::{row_center, PreferenceMatrix, CENTERING_TOL};

/// Relative singular value cutoff used to count the rank of a solution.
pub const RANK_TOL: f64 = 1e-8;
const MAX_PROJECTION_ROUNDS: usize = 100;
const PROJECTION_TOL: f64 = 1e-9;
const MIN_STEP: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRule {
    Fixed {
        step: f64,
    },
    /// Sufficient decrease against the quadratic upper model; the step is
    /// multiplied by `shrink` on rejection and by `growth` after acceptance.
    Backtracking {
        initial: f64,
        shrink: f64,
        growth: f64,
    },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Backtracking {
            initial: 1.0,
            shrink: 0.5,
            growth: 1.2,
        }
    }
}

impl StepRule {
    fn initial(&self) -> f64 {
        match *self {
            StepRule::Fixed { step } => step,
            StepRule::Backtracking { initial, .. } => initial,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            StepRule::Fixed { step } if !(step.is_finite() && step > 0.0) => {
                Err(Error::input(format!("fixed step must be positive, got {step}")))
            }
            StepRule::Backtracking {
                initial,
                shrink,
                growth,
            } => {
                if !(initial.is_finite() && initial > 0.0) {
                    return Err(Error::input(format!(
                        "initial step must be positive, got {initial}"
                    )));
                }
                if !(shrink > 0.0 && shrink < 1.0) {
                    return Err(Error::input(format!("shrink must lie in (0, 1), got {shrink}")));
                }
                if !(growth.is_finite() && growth >= 1.0) {
                    return Err(Error::input(format!("growth must be at least 1, got {growth}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn default_max_iters() -> usize {
    2000
}

fn default_rel_tol() -> f64 {
    1e-7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lambda: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Stop once the relative change of the objective falls below this.
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default)]
    pub step_rule: StepRule,
    /// Entrywise bound on the estimate; off by default.
    #[serde(default)]
    pub enforce_linf: Option<f64>,
    /// Use a rank-limited SVD with this many components when it provably
    /// suffices for the threshold; off by default.
    #[serde(default)]
    pub svd_rank_cap: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::new(0.0)
    }
}

impl SolverConfig {
    pub fn new(lambda: f64) -> Self {
        SolverConfig {
            lambda,
            max_iters: default_max_iters(),
            rel_tol: default_rel_tol(),
            step_rule: StepRule::default(),
            enforce_linf: None,
            svd_rank_cap: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::input(format!(
                "lambda must be a nonnegative number, got {}",
                self.lambda
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::input("max_iters must be positive"));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(Error::input(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if let Some(b) = self.enforce_linf {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::input(format!("linf bound must be positive, got {b}")));
            }
        }
        if self.svd_rank_cap == Some(0) {
            return Err(Error::input("svd_rank_cap must be positive"));
        }
        self.step_rule.validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub theta_hat: PreferenceMatrix,
    /// Accepted proximal steps.
    pub iterations: usize,
    /// Objective at the start point followed by one entry per accepted step.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub final_step: f64,
    pub rank_estimate: usize,
}

/// One accepted iteration, as seen by a [`fit_with_observer`] callback.
pub struct IterateView<'a> {
    pub iteration: usize,
    /// Thresholding output before projection onto the constraint set.
    pub prox_output: &'a PreferenceMatrix,
    pub theta: &'a PreferenceMatrix,
    pub objective: f64,
    pub step: f64,
}

/// Singular value thresholding: the prox of `tau * ||.||_*` at `m`.
pub fn svt(m: &PreferenceMatrix, tau: f64) -> Result<PreferenceMatrix> {
    Ok(prox_nuclear(m, tau, None)?.0)
}

/// SVT plus the nuclear norm of its output.
pub(crate) fn prox_nuclear(
    m: &PreferenceMatrix,
    tau: f64,
    rank_cap: Option<usize>,
) -> Result<(PreferenceMatrix, f64)> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::input(format!("threshold must be nonnegative, got {tau}")));
    }
    let dec = match rank_cap {
        Some(cap) if cap < m.rows().min(m.cols()) => {
            capped_svd(m, cap, tau).map_or_else(|| linalg::svd(m), Ok)?
        }
        _ => linalg::svd(m)?,
    };
    let shrink = |s: f64| (s - tau).max(0.0);
    let nuclear = dec.singular_values.iter().map(|&s| shrink(s)).sum();
    let out = dec.recompose_with(shrink);
    let out = if m.is_centered() {
        out.with_centering_checked()
    } else {
        out
    };
    Ok((out, nuclear))
}

// Rank-limited decomposition, kept only when everything beyond the first
// `cap` components is certifiably below the threshold.
fn capped_svd(m: &PreferenceMatrix, cap: usize, tau: f64) -> Option<ThinSvd> {
    let (mut dec, residual) = linalg::truncated_svd(m, cap + 1)?;
    let tail = dec.singular_values.get(cap).copied().unwrap_or(0.0);
    if tail + residual >= tau {
        return None;
    }
    dec.singular_values.truncate(cap);
    Some(dec)
}

/// Projects onto row-centered matrices, intersected with `|entry| <= bound`
/// when a bound is given.
///
/// The bounded case alternates clipping and centering with Dykstra
/// corrections until both constraints hold.
pub fn project_omega(m: &PreferenceMatrix, linf_bound: Option<f64>) -> Result<PreferenceMatrix> {
    let Some(bound) = linf_bound else {
        return Ok(row_center(m));
    };
    if !(bound.is_finite() && bound > 0.0) {
        return Err(Error::input(format!("linf bound must be positive, got {bound}")));
    }
    let (rows, cols) = m.shape();
    let mut x = m.clone();
    let mut p = PreferenceMatrix::zeros(rows, cols)?;
    let mut q = PreferenceMatrix::zeros(rows, cols)?;
    for _ in 0..MAX_PROJECTION_ROUNDS {
        let xp = &x + &p;
        let y = xp.map(|v| v.clamp(-bound, bound));
        p = &xp - &y;
        let yq = &y + &q;
        x = row_center(&yq);
        q = &yq - &x;
        if x.max_abs() <= bound + PROJECTION_TOL {
            return Ok(x);
        }
    }
    Err(Error::Numerical(format!(
        "box/centering alternation did not reach |entry| <= {bound} within \
         {MAX_PROJECTION_ROUNDS} rounds (max |entry| {:e})",
        x.max_abs()
    )))
}

/// Distance from `-gradient` to `lambda * subdiff ||theta||_*`, in Frobenius norm.
///
/// Uses the SVD characterization of the subdifferential: with `theta = U S V^T`
/// over the singular values above `RANK_TOL * sigma_1`, it is the set of
/// `U V^T + W` with `U^T W = 0`, `W V = 0`, `||W||_op <= 1`.
pub fn optimality_residual(
    theta: &PreferenceMatrix,
    gradient: &PreferenceMatrix,
    lambda: f64,
) -> Result<f64> {
    if theta.shape() != gradient.shape() {
        return Err(Error::dims(theta.shape(), gradient.shape()));
    }
    let dec = linalg::svd(theta)?;
    let top = dec.singular_values.first().copied().unwrap_or(0.0);
    let r = dec
        .singular_values
        .iter()
        .take_while(|&&s| top > 0.0 && s > RANK_TOL * top)
        .count();
    let u = dec.left(r);
    let v = dec.right(r);
    let g = gradient.to_faer();
    let (rows, cols) = gradient.shape();
    let pu = Mat::<f64>::identity(rows, rows) - &u * u.transpose();
    let pv = Mat::<f64>::identity(cols, cols) - &v * v.transpose();
    let off = &pu * &g * &pv;
    let tangent = &g - &off + (&u * v.transpose()) * Scale(lambda);
    let off_excess: f64 = off
        .singular_values()
        .map_err(|_| Error::Numerical("SVD of the off-support gradient did not converge".into()))?
        .iter()
        .map(|&s| (s - lambda).max(0.0).powi(2))
        .sum();
    Ok((tangent.norm_l2().powi(2) + off_excess).sqrt())
}

/// Fits the estimator from `init` (default: zero).
pub fn fit(
    data: &ComparisonDataset,
    config: &SolverConfig,
    init: Option<&PreferenceMatrix>,
) -> Result<SolveResult> {
    fit_with_observer(data, config, init, |_| {})
}

/// As [`fit`], calling `observer` after every accepted step.
pub fn fit_with_observer(
    data: &ComparisonDataset,
    config: &SolverConfig,
    init: Option<&PreferenceMatrix>,
    mut observer: impl FnMut(&IterateView<'_>),
) -> Result<SolveResult> {
    config.validate()?;
    data.require_nonempty()?;
    let (d1, d2) = data.dims();
    let mut theta = match init {
        Some(t) => {
            if t.shape() != (d1, d2) {
                return Err(Error::dims((d1, d2), t.shape()));
            }
            if t.max_abs_row_sum() > CENTERING_TOL * d2 as f64 {
                return Err(Error::input("initial point must be row-centered"));
            }
            t.clone().into_centered()?
        }
        None => PreferenceMatrix::zeros(d1, d2)?,
    };
    let lambda = config.lambda;

    let LossEvaluation {
        value: mut loss,
        gradient: mut grad,
    } = evaluate(&theta, data)?;
    let mut objective = loss + lambda * theta.nuclear_norm()?;
    if !objective.is_finite() {
        return Err(Error::Divergence { iteration: 0 });
    }
    let mut trace = vec![objective];
    let mut step = config.step_rule.initial();
    let mut converged = false;
    let mut iterations = 0;
    let mut last_step = step;

    for iteration in 1..=config.max_iters {
        let (prox, candidate, cand_eval, cand_nuclear) = loop {
            let forward = &theta - &grad.scale(step);
            let (prox, nuclear) = prox_nuclear(&forward, step * lambda, config.svd_rank_cap)?;
            let candidate = project_omega(&prox, config.enforce_linf)?;
            let nuclear = if config.enforce_linf.is_some() {
                candidate.nuclear_norm()?
            } else {
                nuclear
            };
            let eval = evaluate(&candidate, data)?;
            if !eval.value.is_finite() {
                return Err(Error::Divergence { iteration });
            }
            match config.step_rule {
                StepRule::Fixed { .. } => break (prox, candidate, eval, nuclear),
                StepRule::Backtracking { shrink, .. } => {
                    let diff = &candidate - &theta;
                    let model = loss + grad.dot(&diff) + diff.dot(&diff) / (2.0 * step);
                    let slack = 16.0 * f64::EPSILON * loss.abs().max(1.0);
                    if eval.value <= model + slack {
                        break (prox, candidate, eval, nuclear);
                    }
                    step *= shrink;
                    if step < MIN_STEP {
                        return Err(Error::Numerical(format!(
                            "line search step fell below {MIN_STEP:e} at iteration {iteration}"
                        )));
                    }
                }
            }
        };

        let next_objective = cand_eval.value + lambda * cand_nuclear;
        if !next_objective.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        observer(&IterateView {
            iteration,
            prox_output: &prox,
            theta: &candidate,
            objective: next_objective,
            step,
        });

        let rel_change = (objective - next_objective).abs() / objective.abs().max(f64::MIN_POSITIVE);
        theta = candidate;
        loss = cand_eval.value;
        grad = cand_eval.gradient;
        objective = next_objective;
        trace.push(objective);
        iterations = iteration;
        last_step = step;

        if rel_change < config.rel_tol {
            converged = true;
            break;
        }
        if let StepRule::Backtracking { growth, .. } = config.step_rule {
            step *= growth;
        }
    }

    let sv = theta.singular_values()?;
    let top = sv.first().copied().unwrap_or(0.0);
    let rank_estimate = sv.iter().filter(|&&s| top > 0.0 && s > RANK_TOL * top).count();

    Ok(SolveResult {
        theta_hat: theta,
        iterations,
        objective_trace: trace,
        converged,
        final_step: last_step,
        rank_estimate,
    })
}
