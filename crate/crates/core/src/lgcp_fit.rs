//! Laplace approximation to the posterior of the log-intensity field given
//! binned event counts.
//!
//! Model, per cell `i` with width `Δs`:
//!
//! ```text
//! y_i | f ~ Poisson(exp(f_i) · Δs)
//! f     ~ N(m0·1, K)
//! ```
//!
//! The mode is found by Newton's method in the `α` parametrization
//! (`f − m0 = K·α`), which only ever factorizes the well-conditioned
//! `B = I + W^½ K W^½` with `W = diag(exp(f)·Δs)`. Each step is halved (up
//! to 30 times) until the log-posterior does not decrease.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::gp_prior::{build_cov_matrix, GaussianFieldPosterior, MaternParams};
use crate::grid::Grid1D;

pub const MAX_NEWTON_ITERS: usize = 100;
pub const STEP_TOLERANCE: f64 = 1e-8;
const MAX_HALVINGS: usize = 30;

/// Log-posterior changes below this are rounding noise. Near the mode a full
/// Newton step gains less than that, and rejecting it would stall the
/// iteration short of the mode.
pub fn psi_tolerance(psi: f64) -> f64 {
    64.0 * f64::EPSILON * (1.0 + psi.abs())
}

/// Per-cell event counts over a collection window of length `collection_span`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCounts {
    pub grid: Grid1D,
    pub counts: Vec<u64>,
    pub collection_span: f64,
}

impl EventCounts {
    pub fn new(grid: Grid1D, counts: Vec<u64>, collection_span: f64) -> Result<Self> {
        let c = Self { grid, counts, collection_span };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.grid.check_len(self.counts.len())?;
        if !(self.collection_span > 0.0) || !self.collection_span.is_finite() {
            return Err(Error::InvalidParameter(format!("collection span must be > 0, got {}", self.collection_span)));
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts with cell order reversed.
    pub fn mirrored(&self) -> Self {
        let mut counts = self.counts.clone();
        counts.reverse();
        Self { grid: self.grid, counts, collection_span: self.collection_span }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    /// Max-norm of each accepted Newton step in `f`.
    pub step_norms: Vec<f64>,
    /// Log-posterior (up to the prior normalizer) after each step, starting
    /// with the initial point.
    pub log_posterior_trace: Vec<f64>,
    /// Number of halvings applied at each step.
    pub halvings: Vec<usize>,
    /// Gradient max-norm at the returned mode, recomputed via the prior
    /// Cholesky factor.
    pub grad_max_norm: f64,
    pub log_marginal_likelihood: f64,
    pub prior_jitter: f64,
}

#[derive(Debug, Clone)]
pub struct LaplaceFit {
    pub posterior: GaussianFieldPosterior,
    pub prior_cov: DMatrix<f64>,
    pub prior_factor: DMatrix<f64>,
    pub diagnostics: FitDiagnostics,
}

/// Poisson log-likelihood `Σ y_i (f_i + ln Δs) − e^{f_i} Δs − ln y_i!`.
pub fn log_likelihood(counts: &EventCounts, f: &[f64]) -> f64 {
    let ds = counts.grid.spacing();
    let lds = ds.ln();
    counts
        .counts
        .iter()
        .zip(f)
        .map(|(&y, &fi)| {
            let y = y as f64;
            let rate = fi.exp() * ds;
            let obs = if y > 0.0 { y * (fi + lds) - ln_gamma(y + 1.0) } else { 0.0 };
            obs - rate
        })
        .sum()
}

/// Gradient of the unnormalized log-posterior,
/// `(y − e^f Δs) − K⁻¹(f − m0)`, evaluated with the prior's Cholesky factor.
pub fn log_posterior_gradient(
    counts: &EventCounts,
    prior_mean: f64,
    prior_factor: &DMatrix<f64>,
    f: &[f64],
) -> Vec<f64> {
    let ds = counts.grid.spacing();
    let centered = DVector::from_iterator(f.len(), f.iter().map(|v| v - prior_mean));
    let chol = nalgebra::Cholesky::pack_dirty(prior_factor.clone());
    let kinv = chol.solve(&centered);
    counts.counts.iter().zip(f).zip(kinv.iter()).map(|((&y, &fi), ki)| y as f64 - fi.exp() * ds - ki).collect()
}

struct NewtonState {
    f: DVector<f64>,
    alpha: DVector<f64>,
    psi: f64,
}

fn psi_at(counts: &EventCounts, prior_mean: f64, k: &DMatrix<f64>, alpha: &DVector<f64>) -> (DVector<f64>, f64) {
    let g = k * alpha;
    let f = g.map(|v| v + prior_mean);
    let ll = log_likelihood(counts, f.as_slice());
    let psi = ll - 0.5 * alpha.dot(&g);
    (f, if psi.is_nan() { f64::NEG_INFINITY } else { psi })
}

/// `sqrt(W)` and the Cholesky factor of `B = I + W^½ K W^½` at `f`.
fn curvature(
    k: &DMatrix<f64>,
    f: &DVector<f64>,
    ds: f64,
) -> Result<(DVector<f64>, nalgebra::Cholesky<f64, nalgebra::Dyn>)> {
    let n = f.len();
    let sw = f.map(|v| (v.exp() * ds).sqrt());
    if let Some(i) = sw.iter().position(|v| !v.is_finite()) {
        return Err(Error::Overflow { cell: i });
    }
    let mut b = DMatrix::from_fn(n, n, |i, j| sw[i] * k[(i, j)] * sw[j]);
    for i in 0..n {
        b[(i, i)] += 1.0;
    }
    let chol = b.cholesky().ok_or(Error::Factorization { jitter: 0.0 })?;
    Ok((sw, chol))
}

/// Gaussian approximation `N(m̂, Σ̂)` to `p(f | y)`.
pub fn laplace_fit(counts: &EventCounts, prior_mean: f64, prior: &MaternParams, jitter: f64) -> Result<LaplaceFit> {
    counts.validate()?;
    if !prior_mean.is_finite() {
        return Err(Error::InvalidParameter("prior mean must be finite".into()));
    }
    let prior_cf = build_cov_matrix(&counts.grid, prior, jitter)?;
    let k = &prior_cf.cov;
    let n = counts.grid.n_cells();
    let ds = counts.grid.spacing();
    let y = DVector::from_iterator(n, counts.counts.iter().map(|&c| c as f64));

    let alpha0 = DVector::zeros(n);
    let (f0, psi0) = psi_at(counts, prior_mean, k, &alpha0);
    let mut state = NewtonState { f: f0, alpha: alpha0, psi: psi0 };
    let mut step_norms = Vec::new();
    let mut trace = vec![psi0];
    let mut halvings = Vec::new();
    let mut converged = false;

    for _ in 0..MAX_NEWTON_ITERS {
        let (sw, chol_b) = curvature(k, &state.f, ds)?;
        let w = sw.map(|v| v * v);
        let grad_ll = &y - &w;
        let g = state.f.map(|v| v - prior_mean);
        let b = w.component_mul(&g) + grad_ll;
        let kb = k * &b;
        let rhs = sw.component_mul(&kb);
        let solved = chol_b.solve(&rhs);
        let target = &b - sw.component_mul(&solved);
        let dir = &target - &state.alpha;

        let mut t = 1.0;
        let mut accepted = None;
        for h in 0..=MAX_HALVINGS {
            let cand = &state.alpha + &dir * t;
            let (f_new, psi_new) = psi_at(counts, prior_mean, k, &cand);
            if psi_new >= state.psi - psi_tolerance(state.psi) {
                accepted = Some((cand, f_new, psi_new, h));
                break;
            }
            t *= 0.5;
        }
        let Some((alpha_new, f_new, psi_new, h)) = accepted else {
            // No ascent along the Newton direction at machine precision.
            converged = true;
            break;
        };
        let step = (&f_new - &state.f).amax();
        state = NewtonState { f: f_new, alpha: alpha_new, psi: psi_new };
        step_norms.push(step);
        trace.push(psi_new);
        halvings.push(h);
        if step < STEP_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        let tail = step_norms.iter().rev().take(5).rev().copied().collect();
        return Err(Error::NotConverged { iterations: step_norms.len(), trace: tail });
    }

    let (sw, chol_b) = curvature(k, &state.f, ds)?;
    // Σ̂ = K − Vᵀ V with V = L_B⁻¹ W^½ K.
    let swk = DMatrix::from_fn(n, n, |i, j| sw[i] * k[(i, j)]);
    let v = chol_b.l().solve_lower_triangular(&swk).ok_or(Error::Factorization { jitter: 0.0 })?;
    let mut post_cov = k - v.transpose() * &v;
    // Symmetrize against rounding.
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (post_cov[(i, j)] + post_cov[(j, i)]);
            post_cov[(i, j)] = s;
            post_cov[(j, i)] = s;
        }
        post_cov[(i, i)] = post_cov[(i, i)].max(0.0);
    }
    let log_det_b: f64 = 2.0 * chol_b.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let g_hat = state.f.map(|v| v - prior_mean);
    let log_ml = log_likelihood(counts, state.f.as_slice()) - 0.5 * state.alpha.dot(&g_hat) - 0.5 * log_det_b;

    let grad = log_posterior_gradient(counts, prior_mean, &prior_cf.factor, state.f.as_slice());
    let grad_max_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));

    let posterior = GaussianFieldPosterior::new(counts.grid, state.f.as_slice().to_vec(), post_cov)?;
    Ok(LaplaceFit {
        posterior,
        prior_cov: prior_cf.cov.clone(),
        prior_factor: prior_cf.factor,
        diagnostics: FitDiagnostics {
            iterations: step_norms.len(),
            step_norms,
            log_posterior_trace: trace,
            halvings,
            grad_max_norm,
            log_marginal_likelihood: log_ml,
            prior_jitter: prior_cf.jitter,
        },
    })
}

/// Laplace estimate of `log p(y)` under the given prior.
pub fn log_marginal_likelihood(
    counts: &EventCounts,
    prior_mean: f64,
    prior: &MaternParams,
    jitter: f64,
) -> Result<f64> {
    Ok(laplace_fit(counts, prior_mean, prior, jitter)?.diagnostics.log_marginal_likelihood)
}

/// Per-cell `q`-quantile of `λ = exp(f)` from the lognormal marginals.
pub fn posterior_quantiles(posterior: &GaussianFieldPosterior, q: f64) -> Result<Vec<f64>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("quantile must lie in (0, 1), got {q}")));
    }
    let z = if q == 0.5 { 0.0 } else { Normal::standard().inverse_cdf(q) };
    Ok(posterior.mean().iter().enumerate().map(|(i, m)| (m + z * posterior.variance(i).sqrt()).exp()).collect())
}

/// Best prior range by Laplace evidence over `betas`; ties keep the first.
pub fn select_range(
    counts: &EventCounts,
    prior_mean: f64,
    base: &MaternParams,
    betas: &[f64],
    jitter: f64,
) -> Result<(MaternParams, f64)> {
    let mut best: Option<(MaternParams, f64)> = None;
    for &beta in betas {
        let p = base.with_beta(beta)?;
        let lml = log_marginal_likelihood(counts, prior_mean, &p, jitter)?;
        if best.as_ref().is_none_or(|(_, b)| lml > *b) {
            best = Some((p, lml));
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("empty range grid".into()))
}
