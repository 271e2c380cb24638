#![allow(dead_code)]

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voidplace::app::{self, FitArtifact, RunConfig};
use voidplace::gp_prior::build_cov_matrix;
use voidplace::placement::MeanIntensityField;
use voidplace::{GaussianFieldPosterior, Grid1D, MaternParams, SensorParams};

pub const BIMODAL: &str = include_str!("../../configs/bimodal.json");

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Bimodal config with inputs and outputs redirected into `dir`.
pub fn bimodal_config(dir: &Path) -> RunConfig {
    let mut c = RunConfig::from_json(BIMODAL).unwrap();
    c.out_dir = dir.to_path_buf();
    c.inputs.counts = Some(dir.join("counts.json"));
    c
}

/// simulate + fit for the bimodal config, in `dir`.
pub fn bimodal_fit(dir: &Path) -> (RunConfig, FitArtifact) {
    let c = bimodal_config(dir);
    app::cmd_simulate(&c).unwrap();
    let fit = app::cmd_fit(&c).unwrap().artifact;
    (c, fit)
}

/// Random mean-intensity field whose integral is O(1..20) expected events,
/// with a sensor footprint between a fraction of a cell and several cells.
pub fn random_field(rng: &mut ChaCha8Rng, min_cells: usize, max_cells: usize) -> (MeanIntensityField, SensorParams) {
    let n = rng.random_range(min_cells..=max_cells);
    let spacing = rng.random_range(1.0..100.0);
    let grid = Grid1D::new(rng.random_range(-100.0..100.0), spacing, n).unwrap();
    let total = rng.random_range(0.1..20.0);
    let raw: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..1.0) }).collect();
    let sum: f64 = raw.iter().sum::<f64>().max(1e-12);
    let lam = raw.iter().map(|r| r / sum * total / spacing).collect();
    let params =
        SensorParams::new(rng.random_range(0.05..=1.0), spacing * spacing * rng.random_range(0.05..30.0)).unwrap();
    (MeanIntensityField::new(grid, lam).unwrap(), params)
}

/// `k` distinct cells of `0..n`, sorted.
pub fn random_subset(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        all.swap(i, j);
    }
    let mut s = all[..k].to_vec();
    s.sort_unstable();
    s
}

/// Random Gaussian posterior over log-intensity, scaled so the expected count
/// over the horizon is modest.
pub fn random_posterior(rng: &mut ChaCha8Rng) -> (GaussianFieldPosterior, SensorParams) {
    let n = rng.random_range(10..=50);
    let spacing = rng.random_range(20.0..100.0);
    let grid = Grid1D::new(0.0, spacing, n).unwrap();
    let sigma2 = rng.random_range(0.05..1.5);
    let matern = MaternParams::new(sigma2, 1.5, spacing * rng.random_range(1.0..10.0)).unwrap();
    let expected = rng.random_range(0.2..8.0);
    let base = (expected / (n as f64 * spacing)).ln() - sigma2 / 2.0;
    let phase = rng.random_range(0.0..6.3);
    let amp = rng.random_range(0.0..1.5);
    let mean: Vec<f64> = (0..n).map(|i| base + amp * (phase + i as f64 * 0.3).sin()).collect();
    let cf = build_cov_matrix(&grid, &matern, 0.0).unwrap();
    let post = GaussianFieldPosterior::from_factor(grid, mean, cf.factor).unwrap();
    let params =
        SensorParams::new(rng.random_range(0.5..=1.0), spacing * spacing * rng.random_range(0.2..10.0)).unwrap();
    (post, params)
}
