//! Void probability of the thinned Cox process and its Jensen bounds.
//!
//! For a placement `a` and one intensity draw, the undetected count is
//! Poisson with mean `Λ̃(a) = ∫ (T/T_c) λ(s) π(s, a) ds`, so the void
//! probability is `E[exp(−Λ̃)]`. Jensen gives the lower bound
//! `exp(−E[Λ̃])`, and the gap between the two is at most
//! `σ_u² (1 − e^{−μ_u} − μ_u e^{−μ_u}) / μ_u²` where `μ_u`, `σ_u²` are the
//! mean and variance of `Λ̃`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::gp_prior::GaussianFieldPosterior;
use crate::grid::Grid1D;
use crate::par;
use crate::placement::{normalize_candidates, GreedyTrace, MeanIntensityField};
use crate::sensor_model::{miss_prob_field, DetectionTable, MissField, Placement, SensorParams};

/// Default number of intensity draws.
pub const DEFAULT_SAMPLES: usize = 10_000;

/// `W` draws of `(T/T_c)·exp(f)` with `f` from a Gaussian field. Draw `j`
/// uses ChaCha stream `j` under the master seed, so the set is identical
/// for any thread count.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensitySampleSet {
    grid: Grid1D,
    seed: u64,
    horizon_ratio: f64,
    samples: Vec<Vec<f64>>,
}

impl IntensitySampleSet {
    pub fn generate(posterior: &GaussianFieldPosterior, horizon_ratio: f64, count: usize, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidParameter("need at least one intensity sample".into()));
        }
        if !(horizon_ratio > 0.0) || !horizon_ratio.is_finite() {
            return Err(Error::InvalidParameter(format!("horizon ratio must be > 0, got {horizon_ratio}")));
        }
        let samples: Vec<Vec<f64>> = par::map_range(count, |j| {
            let mut rng = par::stream_rng(seed, j as u64);
            let mut f = posterior.sample_with(&mut rng);
            for v in f.iter_mut() {
                *v = horizon_ratio * v.exp();
            }
            f
        });
        for s in &samples {
            if let Some(i) = s.iter().position(|v| !v.is_finite()) {
                return Err(Error::Overflow { cell: i });
            }
        }
        Ok(Self { grid: *posterior.grid(), seed, horizon_ratio, samples })
    }

    /// Wraps precomputed draws (each already scaled by `T/T_c`).
    pub fn from_samples(grid: Grid1D, samples: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("need at least one intensity sample".into()));
        }
        for s in &samples {
            grid.check_len(s.len())?;
            if let Some(i) = s.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidParameter(format!("intensity sample entry {i} must be finite and >= 0")));
            }
        }
        Ok(Self { grid, seed, horizon_ratio: 1.0, samples })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn horizon_ratio(&self) -> f64 {
        self.horizon_ratio
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    /// `Λ̃_j` for every draw given a miss field.
    pub fn lambda_tildes(&self, miss: &[f64]) -> Vec<f64> {
        par::map_range(self.samples.len(), |j| lambda_tilde_with_field(&self.grid, &self.samples[j], miss))
    }
}

/// `Λ̃ = ∫ sample · π ds` for an explicit miss field.
pub fn lambda_tilde_with_field(grid: &Grid1D, sample: &[f64], miss: &[f64]) -> f64 {
    let s: f64 = sample.iter().zip(miss).map(|(l, p)| l * p).sum();
    s * grid.spacing()
}

/// `Λ̃(a)` for one scaled intensity draw.
pub fn lambda_tilde(sample: &[f64], params: &SensorParams, placement: &Placement) -> Result<f64> {
    let grid = placement.grid();
    grid.check_len(sample.len())?;
    let miss = miss_prob_field(params, grid, placement);
    Ok(lambda_tilde_with_field(grid, sample, &miss))
}

/// Monte-Carlo void probability and moments of `Λ̃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoidStats {
    pub vp_mc: f64,
    /// Sample standard deviation of `exp(−Λ̃_j)` over `√W`; 0 when `W = 1`.
    pub vp_se: f64,
    pub mu_u: f64,
    /// Unbiased sample variance of `Λ̃_j`; 0 when `W = 1`.
    pub sigma2_u: f64,
}

/// Reduces `Λ̃_j` values in index order (pairwise sums).
pub fn void_stats_from_lambda_tildes(lt: &[f64]) -> VoidStats {
    let w = lt.len() as f64;
    let voids: Vec<f64> = lt.iter().map(|l| (-l).exp()).collect();
    let vp = par::pairwise_sum(&voids) / w;
    let mu = par::pairwise_sum(lt) / w;
    let (se, var) = if lt.len() > 1 {
        let dv: Vec<f64> = voids.iter().map(|v| (v - vp) * (v - vp)).collect();
        let dl: Vec<f64> = lt.iter().map(|l| (l - mu) * (l - mu)).collect();
        let var_v = par::pairwise_sum(&dv) / (w - 1.0);
        (var_v.sqrt() / w.sqrt(), par::pairwise_sum(&dl) / (w - 1.0))
    } else {
        (0.0, 0.0)
    };
    VoidStats { vp_mc: vp, vp_se: se, mu_u: mu, sigma2_u: var }
}

/// `(1/W) Σ_j exp(−Λ̃_j)` over the sample set.
pub fn mc_void_probability(samples: &IntensitySampleSet, params: &SensorParams, placement: &Placement) -> VoidStats {
    assert_eq!(samples.grid, *placement.grid(), "samples and placement live on different grids");
    let miss = miss_prob_field(params, &samples.grid, placement);
    void_stats_from_lambda_tildes(&samples.lambda_tildes(&miss))
}

/// `exp(−∫ λ̄ π ds)`.
pub fn jensen_lower_bound(field: &MeanIntensityField, params: &SensorParams, placement: &Placement) -> f64 {
    let miss = miss_prob_field(params, &field.grid, placement);
    (-field.thinned_total(&miss)).exp()
}

/// `h(y) = (e^{−y} − 1 + y) / y²`, decreasing on ℝ with `h(0) = 1/2`.
pub fn h_function(y: f64) -> f64 {
    let a = y.abs();
    if a < 1e-6 {
        return 0.5 - y / 6.0 + y * y / 24.0;
    }
    if a < 1.0 {
        // Σ_{k≥0} (−y)^k / (k+2)!, exact to rounding for |y| < 1.
        let mut term = 0.5;
        let mut sum = 0.5;
        for k in 1..24 {
            term *= -y / (k as f64 + 2.0);
            sum += term;
        }
        return sum;
    }
    ((-y).exp_m1() + y) / (y * y)
}

/// Closed-form Jensen-gap bound `σ² (1 − e^{−μ} − μ e^{−μ}) / μ²`, the value
/// of the supremum at `Λ̃ = 0`. Evaluated as `σ² e^{−μ} h(−μ)`, which is
/// accurate down to `μ = 0`, where it gives the limit `σ²/2`.
pub fn jensen_gap_upper_bound(mu_u: f64, sigma2_u: f64) -> Result<f64> {
    if !(mu_u >= 0.0) || !(sigma2_u >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gap bound needs mu_u >= 0 and sigma2_u >= 0, got ({mu_u}, {sigma2_u})"
        )));
    }
    Ok(sigma2_u * (-mu_u).exp() * h_function(-mu_u))
}

/// The bracketed expression of the Jensen-gap supremum at one value of `Λ̃`,
/// times `σ²`: `(e^{−Λ̃} − e^{−μ})/d² + e^{−μ}/d` with `d = Λ̃ − μ`. The
/// difference of exponentials is taken as `e^{−μ}·expm1(−d)`, and within
/// `1e-3` of the removable singularity the Taylor expansion
/// `e^{−μ}(1/2 − d/6 + d²/24 − d³/120)` is used.
pub fn gap_bracket(mu_u: f64, sigma2_u: f64, lambda_tilde: f64) -> f64 {
    let d = lambda_tilde - mu_u;
    let em = (-mu_u).exp();
    if d.abs() < 1e-3 {
        return sigma2_u * em * (0.5 - d / 6.0 + d * d / 24.0 - d * d * d / 120.0);
    }
    sigma2_u * em * ((-d).exp_m1() / (d * d) + 1.0 / d)
}

/// Maximum of [`gap_bracket`] over a grid of `Λ̃` values and the maximizer.
pub fn jensen_gap_sup_numeric(mu_u: f64, sigma2_u: f64, lambda_grid: &[f64]) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for &lt in lambda_grid {
        let v = gap_bracket(mu_u, sigma2_u, lt);
        if v > best.0 {
            best = (v, lt);
        }
    }
    best
}

/// Uniform grid of `points` values covering `[0, μ + 50]`.
pub fn default_lambda_grid(mu_u: f64, points: usize) -> Vec<f64> {
    let hi = mu_u + 50.0;
    let n = points.max(2);
    (0..n).map(|i| hi * i as f64 / (n - 1) as f64).collect()
}

/// `P(N = n) = (ΛT)^n e^{−ΛT} / n!`, evaluated in log space.
pub fn arrival_count_pmf(big_lambda: f64, horizon: f64, n: u64) -> f64 {
    let rate = big_lambda * horizon;
    if rate == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    (nf * rate.ln() - rate - ln_gamma(nf + 1.0)).exp()
}

/// Full evaluation at one placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoidEstimate {
    pub vp_mc: f64,
    pub vp_se: f64,
    pub lower_bound: f64,
    pub mu_u: f64,
    pub sigma2_u: f64,
    pub gap: f64,
    pub gap_bound: f64,
}

impl VoidEstimate {
    pub fn from_parts(stats: VoidStats, lower_bound: f64) -> Self {
        let gap_bound =
            jensen_gap_upper_bound(stats.mu_u.max(0.0), stats.sigma2_u.max(0.0)).expect("non-negative moments");
        Self {
            vp_mc: stats.vp_mc,
            vp_se: stats.vp_se,
            lower_bound,
            mu_u: stats.mu_u,
            sigma2_u: stats.sigma2_u,
            gap: stats.vp_mc - lower_bound,
            gap_bound,
        }
    }
}

/// Void probability, Jensen lower bound and gap certificate for one
/// placement, all from the same sample set.
pub fn evaluate_placement(
    samples: &IntensitySampleSet,
    field: &MeanIntensityField,
    params: &SensorParams,
    placement: &Placement,
) -> VoidEstimate {
    let miss = miss_prob_field(params, placement.grid(), placement);
    let stats = void_stats_from_lambda_tildes(&samples.lambda_tildes(&miss));
    let lower = (-field.thinned_total(&miss)).exp();
    VoidEstimate::from_parts(stats, lower)
}

fn mc_void_of_field(samples: &IntensitySampleSet, miss: &[f64]) -> f64 {
    let voids: Vec<f64> =
        samples.samples.iter().map(|x| (-lambda_tilde_with_field(&samples.grid, x, miss)).exp()).collect();
    par::pairwise_sum(&voids) / voids.len() as f64
}

/// Greedy on the Monte-Carlo void probability itself rather than the
/// surrogate. A candidate evaluation costs `O(W·n)` instead of `O(n)`. In the
/// returned trace `gains` and `objective_values` are void probabilities.
pub fn mc_greedy_place(
    samples: &IntensitySampleSet,
    params: &SensorParams,
    candidates: &[usize],
    m: usize,
) -> Result<GreedyTrace> {
    params.validate()?;
    let grid = samples.grid;
    let cands = normalize_candidates(&grid, candidates)?;
    if m > cands.len() {
        return Err(Error::TooManySensors { requested: m, available: cands.len() });
    }
    let table = DetectionTable::new(params, &grid, &cands);
    let k = cands.len();
    let mut miss = MissField::new(grid);
    let mut current = mc_void_of_field(samples, miss.values());
    let mut taken = vec![false; k];
    let mut chosen = Placement::empty(grid);
    let mut gains = Vec::with_capacity(m);
    let mut objective_values = Vec::with_capacity(m);
    for _ in 0..m {
        let round: Vec<Option<f64>> = par::map_range(k, |j| {
            (!taken[j]).then(|| {
                let trial: Vec<f64> = miss.values().iter().zip(table.row(j)).map(|(p, g)| p * (1.0 - g)).collect();
                mc_void_of_field(samples, &trial)
            })
        });
        let mut best: Option<(usize, f64)> = None;
        for (j, v) in round.into_iter().enumerate() {
            if let Some(v) = v {
                if best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
        }
        let (j, v) = best.expect("m <= candidates guarantees a free candidate");
        taken[j] = true;
        miss.apply_row(table.row(j));
        chosen.push_unchecked(cands[j]);
        gains.push(v - current);
        objective_values.push(v);
        current = v;
    }
    Ok(GreedyTrace { chosen, gains, objective_values })
}
