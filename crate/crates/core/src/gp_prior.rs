//! Matérn Gaussian-field prior on the grid: covariance evaluation,
//! jittered Cholesky factorization, and seeded sampling.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::par;

/// Matérn kernel hyperparameters. `kappa` is always derived from
/// `zeta` and `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternParams {
    sigma2: f64,
    zeta: f64,
    #[serde(rename = "beta_m")]
    beta: f64,
}

impl MaternParams {
    pub fn new(sigma2: f64, zeta: f64, beta: f64) -> Result<Self> {
        let p = Self { sigma2, zeta, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma2", self.sigma2), ("zeta", self.zeta), ("beta", self.beta)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kappa(&self) -> f64 {
        (8.0 * self.zeta).sqrt() / self.beta
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.sigma2, self.zeta, beta)
    }
}

/// Matérn covariance at lag `r`. Uses the closed form for ζ = 3/2 and the
/// Bessel route otherwise.
pub fn matern_cov(params: &MaternParams, r: f64) -> Result<f64> {
    check_lag(r)?;
    if r == 0.0 {
        return Ok(params.sigma2);
    }
    if params.zeta == 1.5 {
        let x = params.kappa() * r;
        return Ok(params.sigma2 * (1.0 + x) * (-x).exp());
    }
    Ok(matern_bessel_unchecked(params, r))
}

/// The general Matérn form through `K_ζ`, for any ζ.
pub fn matern_cov_bessel(params: &MaternParams, r: f64) -> Result<f64> {
    check_lag(r)?;
    if r == 0.0 {
        return Ok(params.sigma2);
    }
    Ok(matern_bessel_unchecked(params, r))
}

fn check_lag(r: f64) -> Result<()> {
    if !(r >= 0.0) {
        return Err(Error::InvalidParameter(format!("lag must be non-negative, got {r}")));
    }
    Ok(())
}

fn matern_bessel_unchecked(params: &MaternParams, r: f64) -> f64 {
    let nu = params.zeta;
    let x = params.kappa() * r;
    // x^ν K_ν(x) = x^ν e^{-x} · scaled; combine in log space to avoid overflow at small x.
    let scaled = bessel_k_scaled(nu, x);
    if scaled == 0.0 {
        return 0.0;
    }
    let log_val = (1.0 - nu) * std::f64::consts::LN_2 - gamma(nu).ln() + nu * x.ln() - x + scaled.ln();
    params.sigma2 * log_val.exp()
}

/// `e^x · K_ν(x)` for x > 0, from `K_ν(x) = ∫_0^∞ exp(-x cosh t) cosh(νt) dt`
/// by the trapezoid rule, which converges geometrically for this integrand.
pub fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    assert!(x > 0.0, "bessel_k_scaled needs x > 0");
    const H: f64 = 1.0 / 128.0;
    let nu = nu.abs();
    let term = |t: f64| {
        let s = (0.5 * t).sinh();
        let base = -2.0 * x * s * s;
        0.5 * ((base + nu * t).exp() + (base - nu * t).exp())
    };
    let mut sum = 0.5 * term(0.0);
    let mut k = 1usize;
    loop {
        let t = k as f64 * H;
        let v = term(t);
        sum += v;
        // Past the peak (x sinh t > ν) and negligible.
        if x * t.sinh() > nu && v <= 1e-18 * sum {
            break;
        }
        k += 1;
    }
    sum * H
}

/// Jitter escalation: first `jitter`, then from `1e-10·scale` upward by ×10
/// until `1e-4·scale`.
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

/// Cholesky factor of `cov + jitter·I` under the escalation policy.
/// Returns the factor and the jitter that succeeded.
pub(crate) fn factorize_with_jitter(cov: &DMatrix<f64>, scale: f64, jitter: f64) -> Result<(DMatrix<f64>, f64)> {
    let n = cov.nrows();
    let try_factor = |j: f64| {
        let mut m = cov.clone();
        for i in 0..n {
            m[(i, i)] += j;
        }
        m.cholesky().map(|c| c.l())
    };
    if let Some(l) = try_factor(jitter) {
        return Ok((l, jitter));
    }
    let mut j = (JITTER_START * scale).max(jitter * 10.0);
    let mut last = jitter;
    while j <= JITTER_MAX * scale * (1.0 + 1e-12) {
        last = j;
        if let Some(l) = try_factor(j) {
            return Ok((l, j));
        }
        j *= 10.0;
    }
    Err(Error::Factorization { jitter: last })
}

/// Discretized covariance and its lower factor.
#[derive(Debug, Clone)]
pub struct CovarianceFactor {
    /// Σ including the diagonal jitter actually applied.
    pub cov: DMatrix<f64>,
    pub factor: DMatrix<f64>,
    pub jitter: f64,
}

pub fn build_cov_matrix(grid: &Grid1D, params: &MaternParams, jitter: f64) -> Result<CovarianceFactor> {
    params.validate()?;
    if !(jitter >= 0.0) || !jitter.is_finite() {
        return Err(Error::InvalidParameter(format!("jitter must be >= 0, got {jitter}")));
    }
    let n = grid.n_cells();
    let spacing = grid.spacing();
    let lags: Vec<f64> = (0..n).map(|k| matern_cov(params, k as f64 * spacing)).collect::<Result<_>>()?;
    let base = DMatrix::from_fn(n, n, |i, j| lags[i.abs_diff(j)]);
    let (factor, used) = factorize_with_jitter(&base, params.sigma2, jitter)?;
    let mut cov = base;
    for i in 0..n {
        cov[(i, i)] += used;
    }
    Ok(CovarianceFactor { cov, factor, jitter: used })
}

/// Gaussian distribution of the log-intensity on the grid.
#[derive(Debug, Clone)]
pub struct GaussianFieldPosterior {
    grid: Grid1D,
    mean: Vec<f64>,
    cov: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl GaussianFieldPosterior {
    /// Factorizes `cov` (jitter escalation relative to its largest diagonal).
    /// An all-zero covariance gives a zero factor.
    pub fn new(grid: Grid1D, mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = grid.n_cells();
        grid.check_len(mean.len())?;
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::LengthMismatch { expected: n, got: cov.nrows() });
        }
        if mean.iter().any(|m| !m.is_finite()) || cov.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("posterior mean/covariance must be finite".into()));
        }
        for i in 0..n {
            if cov[(i, i)] < 0.0 {
                return Err(Error::InvalidParameter(format!("negative variance at cell {i}")));
            }
            for j in 0..i {
                let (a, b) = (cov[(i, j)], cov[(j, i)]);
                if (a - b).abs() > 1e-12 * (a.abs().max(b.abs()).max(1e-300)) {
                    return Err(Error::InvalidParameter(format!("covariance not symmetric at ({i},{j})")));
                }
            }
        }
        let scale = (0..n).map(|i| cov[(i, i)]).fold(0.0, f64::max);
        let factor = if scale == 0.0 { DMatrix::zeros(n, n) } else { factorize_with_jitter(&cov, scale, 0.0)?.0 };
        Ok(Self { grid, mean, cov, factor })
    }

    /// Builds from a lower-triangular factor `L`; Σ = L·Lᵀ.
    pub fn from_factor(grid: Grid1D, mean: Vec<f64>, factor: DMatrix<f64>) -> Result<Self> {
        let n = grid.n_cells();
        grid.check_len(mean.len())?;
        if factor.nrows() != n || factor.ncols() != n {
            return Err(Error::LengthMismatch { expected: n, got: factor.nrows() });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if factor[(i, j)] != 0.0 {
                    return Err(Error::InvalidParameter("factor must be lower triangular".into()));
                }
            }
        }
        let cov = &factor * factor.transpose();
        Ok(Self { grid, mean, cov, factor })
    }

    /// Prior `N(m0·1, Σ_matern)`.
    pub fn prior(grid: Grid1D, params: &MaternParams, prior_mean: f64, jitter: f64) -> Result<Self> {
        let cf = build_cov_matrix(&grid, params, jitter)?;
        Ok(Self { grid, mean: vec![prior_mean; grid.n_cells()], cov: cf.cov, factor: cf.factor })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.cov[(i, i)]
    }

    pub fn variances(&self) -> Vec<f64> {
        (0..self.grid.n_cells()).map(|i| self.cov[(i, i)]).collect()
    }

    /// One draw `mean + L·z` with `z` taken from `rng`.
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.grid.n_cells();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut out = self.mean.clone();
        for (i, o) in out.iter_mut().enumerate() {
            *o += z[..=i].iter().enumerate().map(|(k, zk)| self.factor[(i, k)] * zk).sum::<f64>();
        }
        out
    }
}

/// Deterministic draw of the log-intensity field for `seed`.
pub fn sample_field(posterior: &GaussianFieldPosterior, seed: u64) -> Vec<f64> {
    posterior.sample_with(&mut par::stream_rng(seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> MaternParams {
        MaternParams::new(0.25, 1.5, 150.0).unwrap()
    }

    #[test]
    fn zero_lag_is_variance() {
        assert_eq!(matern_cov(&params(), 0.0).unwrap(), 0.25);
        let p = MaternParams::new(0.7, 2.5, 10.0).unwrap();
        assert_eq!(matern_cov(&p, 0.0).unwrap(), 0.7);
    }

    #[test]
    fn negative_lag_rejected() {
        assert!(matern_cov(&params(), -1.0).is_err());
        assert!(matern_cov(&params(), f64::NAN).is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(MaternParams::new(0.0, 1.5, 1.0).is_err());
        assert!(MaternParams::new(1.0, -1.5, 1.0).is_err());
        assert!(MaternParams::new(1.0, 1.5, f64::INFINITY).is_err());
    }

    #[test]
    fn kappa_derived() {
        let p = params();
        assert!((p.kappa() - 12f64.sqrt() / 150.0).abs() < 1e-15);
    }

    #[test]
    fn bessel_route_matches_closed_form_at_three_halves() {
        let p = params();
        for r in [10.0, 100.0, 1000.0] {
            let x = p.kappa() * r;
            let closed = 0.25 * (1.0 + x) * (-x).exp();
            let bessel = matern_cov_bessel(&p, r).unwrap();
            assert!((bessel - closed).abs() <= 1e-10 * closed, "r={r}: {bessel} vs {closed}");
            assert!((matern_cov(&p, r).unwrap() - closed).abs() <= 1e-15 * closed);
        }
    }

    /// Reference values from arbitrary-precision `besselk` (40 digits),
    /// σ² = 0.25, β = 150.
    #[test]
    #[allow(clippy::excessive_precision)]
    fn bessel_route_matches_high_precision_reference() {
        let cases = [
            (0.5, 10.0, 0.2187933297607368635),
            (0.5, 100.0, 0.06589928452893169252),
            (0.5, 1000.0, 4.0489919807815267935e-7),
            (1.25, 10.0, 0.24272737168835968358),
            (1.25, 100.0, 0.079805556199567077955),
            (1.25, 1000.0, 2.0598283160902838082e-9),
            (1.5, 10.0, 0.2442760657702001026),
            (1.5, 100.0, 0.082173023796586124077),
            (1.5, 1000.0, 5.6266210597890212706e-10),
            (2.5, 10.0, 0.24636665419134746653),
            (2.5, 100.0, 0.088055794817422922848),
            (2.5, 1000.0, 9.2145632934108128112e-12),
        ];
        for (zeta, r, want) in cases {
            let p = MaternParams::new(0.25, zeta, 150.0).unwrap();
            let got = matern_cov_bessel(&p, r).unwrap();
            assert!((got - want).abs() <= 1e-10 * want, "zeta={zeta} r={r}: {got} vs {want}");
            let got = matern_cov(&p, r).unwrap();
            assert!((got - want).abs() <= 1e-10 * want);
        }
    }

    #[test]
    fn far_lag_decays() {
        let p = params();
        let r = 50.0 / p.kappa();
        assert!(matern_cov(&p, r).unwrap() < 1e-15 * p.sigma2());
        let g = MaternParams::new(0.25, 2.5, 150.0).unwrap();
        assert!(matern_cov(&g, 60.0 / g.kappa()).unwrap() < 1e-15 * 0.25);
    }

    #[test]
    fn non_increasing_in_lag() {
        let p = params();
        let mut prev = matern_cov(&p, 0.0).unwrap();
        for k in 1..2000 {
            let v = matern_cov(&p, k as f64 * 0.75).unwrap();
            assert!(v <= prev);
            assert!(v <= p.sigma2());
            prev = v;
        }
    }

    #[test]
    fn one_cell_matrix() {
        let g = Grid1D::new(0.0, 50.0, 1).unwrap();
        let cf = build_cov_matrix(&g, &params(), 0.01).unwrap();
        assert_eq!(cf.cov[(0, 0)], 0.26);
        assert!((cf.factor[(0, 0)] - 0.26f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn matrix_symmetric_and_reconstructs() {
        let g = Grid1D::new(0.0, 50.0, 5).unwrap();
        let cf = build_cov_matrix(&g, &params(), 0.0).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(cf.cov[(i, j)], cf.cov[(j, i)]);
            }
        }
        let rec = &cf.factor * cf.factor.transpose();
        let diff = (&rec - &cf.cov).abs().max();
        assert!(diff < 1e-10, "max reconstruction error {diff}");
    }

    #[test]
    fn jitter_escalates_on_fine_grid() {
        // Lag 0.001 m at β = 1e6 m makes neighbours nearly identical.
        let g = Grid1D::new(0.0, 0.001, 200).unwrap();
        let p = MaternParams::new(1.0, 1.5, 1e6).unwrap();
        let cf = build_cov_matrix(&g, &p, 0.0).unwrap();
        assert!(cf.jitter >= 1e-10);
        assert!(cf.jitter <= 1e-4);
    }

    #[test]
    fn factorization_failure_reports_jitter() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match factorize_with_jitter(&m, 1.0, 0.0) {
            Err(Error::Factorization { jitter }) => assert!((jitter - 1e-4).abs() < 1e-12),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn zero_factor_returns_mean() {
        let g = Grid1D::new(0.0, 1.0, 4).unwrap();
        let mean = vec![0.1, -0.2, 0.3, 4.0];
        let post = GaussianFieldPosterior::from_factor(g, mean.clone(), DMatrix::zeros(4, 4)).unwrap();
        assert_eq!(sample_field(&post, 99), mean);
        let post = GaussianFieldPosterior::new(g, mean.clone(), DMatrix::zeros(4, 4)).unwrap();
        assert_eq!(sample_field(&post, 3), mean);
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = Grid1D::new(0.0, 50.0, 6).unwrap();
        let post = GaussianFieldPosterior::prior(g, &params(), 0.0, 0.0).unwrap();
        assert_eq!(sample_field(&post, 5), sample_field(&post, 5));
        assert_ne!(sample_field(&post, 5), sample_field(&post, 6));
    }

    #[test]
    fn sample_moments() {
        let g = Grid1D::new(0.0, 50.0, 3).unwrap();
        let post = GaussianFieldPosterior::prior(g, &params(), 1.0, 0.0).unwrap();
        let n = 10_000;
        let draws: Vec<Vec<f64>> = (0..n).map(|s| sample_field(&post, s as u64)).collect();
        for i in 0..3 {
            let m = draws.iter().map(|d| d[i]).sum::<f64>() / n as f64;
            let v = draws.iter().map(|d| (d[i] - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            let sd = post.variance(i).sqrt();
            assert!((m - 1.0).abs() < 4.0 * sd / (n as f64).sqrt(), "cell {i} mean {m}");
            assert!((v - post.variance(i)).abs() < 0.05 * post.variance(i), "cell {i} var {v}");
        }
    }

    #[test]
    fn lognormal_mean_of_samples() {
        // exp(m + Σ_ii/2) is the closed form used for the mean intensity.
        let g = Grid1D::new(0.0, 50.0, 3).unwrap();
        let post = GaussianFieldPosterior::prior(g, &params(), -0.5, 0.0).unwrap();
        let n = 100_000;
        let mut acc = [0.0; 3];
        for s in 0..n {
            for (a, f) in acc.iter_mut().zip(sample_field(&post, s)) {
                *a += f.exp();
            }
        }
        for (i, a) in acc.iter().enumerate() {
            let emp = a / n as f64;
            let exact = (-0.5 + post.variance(i) / 2.0).exp();
            assert!((emp - exact).abs() < 0.01 * exact, "cell {i}: {emp} vs {exact}");
        }
    }

    #[test]
    fn rejects_asymmetric_covariance() {
        let g = Grid1D::new(0.0, 1.0, 2).unwrap();
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(GaussianFieldPosterior::new(g, vec![0.0; 2], cov).is_err());
    }
}
