//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each exported function takes and returns JSON strings. The `*_json`
//! functions hold the logic and are plain Rust, so they are tested natively.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use serde::{Deserialize, Serialize};
use voidplace::app::{bump_log_field, void_curve as curve_rows, Bump, EvaluationRow};
use voidplace::gp_prior::build_cov_matrix;
use voidplace::placement::{all_cells, greedy_place, mean_intensity};
use voidplace::void_eval::{default_lambda_grid, gap_bracket, jensen_gap_sup_numeric, jensen_gap_upper_bound};
use voidplace::{GaussianFieldPosterior, Grid1D, IntensitySampleSet, MaternParams, SensorParams};
use wasm_bindgen::prelude::*;

const MAX_CELLS: usize = 400;
const MAX_SAMPLES: usize = 20_000;

/// Corridor scenario: a bump-shaped mean log-intensity with Matérn
/// uncertainty around it.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n_cells: usize,
    pub spacing_m: f64,
    pub baseline_rate: f64,
    pub bumps: Vec<Bump>,
    pub sigma2: f64,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    pub beta_m: f64,
    pub rho: f64,
    pub sigma_l: f64,
    #[serde(default = "default_ratio")]
    pub horizon_ratio: f64,
    pub sensors: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_zeta() -> f64 {
    1.5
}
fn default_ratio() -> f64 {
    1.0
}
fn default_samples() -> usize {
    2000
}

struct Built {
    grid: Grid1D,
    post: GaussianFieldPosterior,
    params: SensorParams,
}

fn build(s: &Scenario) -> Result<Built, String> {
    if s.n_cells == 0 || s.n_cells > MAX_CELLS {
        return Err(format!("n_cells must be in 1..={MAX_CELLS}"));
    }
    if s.samples < 2 || s.samples > MAX_SAMPLES {
        return Err(format!("samples must be in 2..={MAX_SAMPLES}"));
    }
    if !(s.baseline_rate > 0.0) {
        return Err("baseline_rate must be > 0".into());
    }
    let err = |e: voidplace::Error| e.to_string();
    let grid = Grid1D::new(0.0, s.spacing_m, s.n_cells).map_err(err)?;
    let matern = MaternParams::new(s.sigma2, s.zeta, s.beta_m).map_err(err)?;
    let params = SensorParams::new(s.rho, s.sigma_l).map_err(err)?;
    let mean = bump_log_field(&grid, s.baseline_rate, &s.bumps);
    let cf = build_cov_matrix(&grid, &matern, 0.0).map_err(err)?;
    let post = GaussianFieldPosterior::from_factor(grid, mean, cf.factor).map_err(err)?;
    Ok(Built { grid, post, params })
}

#[derive(Debug, Serialize)]
pub struct Layout {
    pub positions_m: Vec<f64>,
    pub lambda_bar: Vec<f64>,
    pub cells: Vec<usize>,
    pub sensor_positions_m: Vec<f64>,
    pub gains: Vec<f64>,
    pub objective_values: Vec<f64>,
    pub total: f64,
    /// Miss probability per cell under the full layout.
    pub miss: Vec<f64>,
}

pub fn greedy_layout_json(scenario: &str) -> Result<String, String> {
    let s: Scenario = serde_json::from_str(scenario).map_err(|e| e.to_string())?;
    let b = build(&s)?;
    let field = mean_intensity(&b.post, s.horizon_ratio).map_err(|e| e.to_string())?;
    let trace = greedy_place(&field, &b.params, &all_cells(&b.grid), s.sensors).map_err(|e| e.to_string())?;
    let miss = voidplace::sensor_model::miss_prob_field(&b.params, &b.grid, &trace.chosen);
    let layout = Layout {
        positions_m: b.grid.centers(),
        lambda_bar: field.lambda_bar.clone(),
        cells: trace.chosen.cells().to_vec(),
        sensor_positions_m: trace.chosen.positions(),
        gains: trace.gains.clone(),
        objective_values: trace.objective_values.clone(),
        total: field.total(),
        miss,
    };
    serde_json::to_string(&layout).map_err(|e| e.to_string())
}

pub fn void_curve_json(scenario: &str) -> Result<String, String> {
    let s: Scenario = serde_json::from_str(scenario).map_err(|e| e.to_string())?;
    let b = build(&s)?;
    let field = mean_intensity(&b.post, s.horizon_ratio).map_err(|e| e.to_string())?;
    let trace = greedy_place(&field, &b.params, &all_cells(&b.grid), s.sensors).map_err(|e| e.to_string())?;
    let samples =
        IntensitySampleSet::generate(&b.post, s.horizon_ratio, s.samples, s.seed).map_err(|e| e.to_string())?;
    let rows: Vec<EvaluationRow> = curve_rows(&samples, &field, &b.params, &trace.chosen, s.sensors);
    serde_json::to_string(&rows).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct Bracket {
    pub lambda: Vec<f64>,
    pub bracket: Vec<f64>,
    pub sup: f64,
    pub argmax: f64,
    pub bound: f64,
}

/// The Jensen gap integrand bracket over `λ̃ ∈ [0, μ + 50]`, its numeric
/// supremum and the closed-form bound.
pub fn gap_bracket_curve_json(mu_u: f64, sigma2_u: f64, points: usize) -> Result<String, String> {
    if !(mu_u >= 0.0) || !mu_u.is_finite() || !(sigma2_u >= 0.0) || !sigma2_u.is_finite() {
        return Err("mu_u and sigma2_u must be finite and >= 0".into());
    }
    let points = points.clamp(2, 20_000);
    let lambda = default_lambda_grid(mu_u, points);
    let bracket: Vec<f64> = lambda.iter().map(|&l| gap_bracket(mu_u, sigma2_u, l)).collect();
    let (sup, argmax) = jensen_gap_sup_numeric(mu_u, sigma2_u, &lambda);
    let bound = jensen_gap_upper_bound(mu_u, sigma2_u).map_err(|e| e.to_string())?;
    serde_json::to_string(&Bracket { lambda, bracket, sup, argmax, bound }).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn greedy_layout(scenario: &str) -> Result<String, JsValue> {
    greedy_layout_json(scenario).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn void_curve(scenario: &str) -> Result<String, JsValue> {
    void_curve_json(scenario).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn gap_bracket_curve(mu_u: f64, sigma2_u: f64, points: usize) -> Result<String, JsValue> {
    gap_bracket_curve_json(mu_u, sigma2_u, points).map_err(|e| JsValue::from_str(&e))
}
