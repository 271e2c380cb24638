//! End-to-end pipeline behind the `voidplace` command line: configuration,
//! the five commands, and their report files.
//!
//! Every command is a pure function of its configuration and input files.
//! Reports are written with shortest round-trip float formatting, so reruns
//! are byte-identical regardless of worker count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp_prior::{sample_field, GaussianFieldPosterior, MaternParams};
use crate::grid::Grid1D;
use crate::ingest::{counts_from_csv, synth_generate, CountsFile, DedupePolicy, SegmentSpec};
use crate::lgcp_fit::{laplace_fit, posterior_quantiles, select_range, FitDiagnostics};
use crate::placement::{
    all_cells, brute_force_search, greedy_place, lazy_greedy_place, mean_intensity, normalize_candidates, GreedyTrace,
    MeanIntensityField, DEFAULT_ENUMERATION_CAP,
};
use crate::sensor_model::{Placement, SensorParams};
use crate::void_eval::{evaluate_placement, mc_void_probability, IntensitySampleSet, DEFAULT_SAMPLES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_ENUMERATION_CAP: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidParameter(_) | Error::Json(_) | Error::MissingColumn(_) => EXIT_CONFIG,
        Error::NotConverged { .. } => EXIT_NOT_CONVERGED,
        Error::EnumerationCap { .. } => EXIT_ENUMERATION_CAP,
        _ => EXIT_FAILURE,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    #[serde(flatten)]
    pub matern: MaternParams,
    #[serde(default)]
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    /// Counts JSON (as written by `simulate`).
    #[serde(default)]
    pub counts: Option<PathBuf>,
    /// AIS CSV; binned onto `grid` using `segment`.
    #[serde(default)]
    pub events: Option<PathBuf>,
    #[serde(default)]
    pub segment: Option<SegmentSpec>,
    #[serde(default)]
    pub dedupe: DedupePolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center_m: f64,
    pub width_m: f64,
    /// Peak added rate, events per meter per collection window.
    pub peak_rate: f64,
}

/// Ground-truth log-intensity for `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TruthSpec {
    /// One draw from the configured prior.
    PriorDraw,
    /// `log(baseline_rate + Σ peak · exp(−(s − c)² / (2 w²)))`.
    Bumps { baseline_rate: f64, bumps: Vec<Bump> },
}

impl TruthSpec {
    pub fn log_field(&self, config: &RunConfig, seed: u64) -> Result<Vec<f64>> {
        match self {
            TruthSpec::PriorDraw => {
                let prior = GaussianFieldPosterior::prior(
                    config.grid,
                    &config.prior.matern,
                    config.prior_mean,
                    config.prior.jitter,
                )?;
                Ok(sample_field(&prior, seed))
            }
            TruthSpec::Bumps { baseline_rate, bumps } => Ok(bump_log_field(&config.grid, *baseline_rate, bumps)),
        }
    }
}

pub fn bump_log_field(grid: &Grid1D, baseline_rate: f64, bumps: &[Bump]) -> Vec<f64> {
    grid.centers()
        .iter()
        .map(|&s| {
            let rate = baseline_rate
                + bumps
                    .iter()
                    .map(|b| b.peak_rate * (-(s - b.center_m).powi(2) / (2.0 * b.width_m * b.width_m)).exp())
                    .sum::<f64>();
            rate.ln()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub truth: TruthSpec,
    #[serde(default = "default_one")]
    pub collection_span: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { truth: TruthSpec::PriorDraw, collection_span: 1.0 }
    }
}

fn default_one() -> f64 {
    1.0
}
fn default_samples() -> usize {
    DEFAULT_SAMPLES
}
fn default_m_max() -> usize {
    10
}
fn default_cap() -> u64 {
    DEFAULT_ENUMERATION_CAP
}
fn default_true() -> bool {
    true
}
fn default_compare() -> Vec<usize> {
    vec![2, 3, 4, 5]
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// A single JSON document driving every command. `seed` has no default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: Grid1D,
    pub prior: PriorConfig,
    #[serde(default)]
    pub prior_mean: f64,
    #[serde(default)]
    pub sensor: SensorParams,
    /// T / T_c.
    #[serde(default = "default_one")]
    pub horizon_ratio: f64,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default = "default_m_max")]
    pub m_max: usize,
    pub seed: u64,
    #[serde(default = "default_cap")]
    pub enum_cap: u64,
    /// Candidate cells; every cell when absent.
    #[serde(default)]
    pub candidates: Option<Vec<usize>>,
    #[serde(default = "default_true")]
    pub lazy: bool,
    #[serde(default)]
    pub brute_force: bool,
    #[serde(default = "default_compare")]
    pub compare_m: Vec<usize>,
    /// Optional grid of prior ranges (m) searched by Laplace evidence in `fit`.
    #[serde(default)]
    pub range_search: Option<Vec<f64>>,
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.grid.validate().map_err(wrap)?;
        self.prior.matern.validate().map_err(wrap)?;
        self.sensor.validate().map_err(wrap)?;
        if !(self.prior.jitter >= 0.0) {
            return Err(Error::Config("prior.jitter must be >= 0".into()));
        }
        if !self.prior_mean.is_finite() {
            return Err(Error::Config("prior_mean must be finite".into()));
        }
        if !(self.horizon_ratio > 0.0) || !self.horizon_ratio.is_finite() {
            return Err(Error::Config("horizon_ratio must be > 0".into()));
        }
        if self.n_samples < 2 {
            return Err(Error::Config("n_samples must be >= 2".into()));
        }
        if let Some(c) = &self.candidates {
            normalize_candidates(&self.grid, c).map_err(wrap)?;
        }
        if let Some(seg) = &self.inputs.segment {
            seg.validate().map_err(wrap)?;
        }
        if !(self.simulate.collection_span > 0.0) {
            return Err(Error::Config("simulate.collection_span must be > 0".into()));
        }
        Ok(())
    }

    pub fn candidates(&self) -> Vec<usize> {
        match &self.candidates {
            Some(c) => normalize_candidates(&self.grid, c).expect("validated"),
            None => all_cells(&self.grid),
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn join_cells(cells: &[usize]) -> String {
    cells.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub counts_path: PathBuf,
    pub truth_path: PathBuf,
    pub counts: CountsFile,
    pub truth: Vec<f64>,
}

/// Draws synthetic counts from the configured ground truth.
pub fn cmd_simulate(config: &RunConfig) -> Result<SimulateOutput> {
    let truth = config.simulate.truth.log_field(config, config.seed)?;
    // Separate stream family for counts so the truth draw and counts are independent.
    let counts = synth_generate(&truth, &config.grid, config.seed ^ 0x5eed_c0de, config.simulate.collection_span)?;
    let file = CountsFile::from_counts(&counts);
    let counts_path = config.out("counts.json");
    write_json(&counts_path, &file)?;

    let mut csv = String::from("cell,position_m,log_intensity,rate\n");
    for (i, f) in truth.iter().enumerate() {
        let _ = writeln!(csv, "{i},{},{f},{}", config.grid.center_unchecked(i), f.exp());
    }
    let truth_path = config.out("truth.csv");
    write_text(&truth_path, &csv)?;
    Ok(SimulateOutput { counts_path, truth_path, counts: file, truth })
}

// ---------------------------------------------------------------- fit

/// Serialized Laplace posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub grid: Grid1D,
    pub prior: MaternParams,
    pub prior_mean: f64,
    pub collection_span: f64,
    pub mean: Vec<f64>,
    /// Dense posterior covariance, row-major.
    pub covariance: Vec<f64>,
    pub diagnostics: FitDiagnostics,
}

impl FitArtifact {
    pub fn posterior(&self) -> Result<GaussianFieldPosterior> {
        let n = self.grid.n_cells();
        if self.covariance.len() != n * n {
            return Err(Error::LengthMismatch { expected: n * n, got: self.covariance.len() });
        }
        GaussianFieldPosterior::new(self.grid, self.mean.clone(), DMatrix::from_row_slice(n, n, &self.covariance))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub artifact_path: PathBuf,
    pub quantiles_path: PathBuf,
    pub artifact: FitArtifact,
}

fn load_counts(config: &RunConfig) -> Result<CountsFile> {
    match (&config.inputs.counts, &config.inputs.events) {
        (Some(path), _) => {
            let file: CountsFile = read_json(path)?;
            if file.grid != config.grid {
                return Err(Error::Config("counts grid differs from config grid".into()));
            }
            Ok(file)
        }
        (None, Some(path)) => {
            let seg = config
                .inputs
                .segment
                .as_ref()
                .ok_or_else(|| Error::Config("inputs.events needs inputs.segment".into()))?;
            counts_from_csv(path, seg, &config.grid, config.inputs.dedupe)
        }
        (None, None) => Err(Error::Config("fit needs inputs.counts or inputs.events".into())),
    }
}

/// Laplace fit of the counts named in `inputs`, plus the 2.5/50/97.5 %
/// intensity quantile table.
pub fn cmd_fit(config: &RunConfig) -> Result<FitOutput> {
    let counts = load_counts(config)?.event_counts()?;
    let prior = match &config.range_search {
        Some(betas) => select_range(&counts, config.prior_mean, &config.prior.matern, betas, config.prior.jitter)?.0,
        None => config.prior.matern,
    };
    let fit = laplace_fit(&counts, config.prior_mean, &prior, config.prior.jitter)?;
    let post = &fit.posterior;
    let n = config.grid.n_cells();
    let artifact = FitArtifact {
        grid: config.grid,
        prior,
        prior_mean: config.prior_mean,
        collection_span: counts.collection_span,
        mean: post.mean().to_vec(),
        covariance: (0..n * n).map(|k| post.cov()[(k / n, k % n)]).collect(),
        diagnostics: fit.diagnostics.clone(),
    };
    let artifact_path = config.out("fit.json");
    write_json(&artifact_path, &artifact)?;

    let lo = posterior_quantiles(post, 0.025)?;
    let med = posterior_quantiles(post, 0.5)?;
    let hi = posterior_quantiles(post, 0.975)?;
    let lam = mean_intensity(post, 1.0)?;
    let mut csv = String::from("cell,position_m,count,q025,q50,q975,mean\n");
    for i in 0..n {
        let _ = writeln!(
            csv,
            "{i},{},{},{},{},{},{}",
            config.grid.center_unchecked(i),
            counts.counts[i],
            lo[i],
            med[i],
            hi[i],
            lam.lambda_bar[i]
        );
    }
    let quantiles_path = config.out("quantiles.csv");
    write_text(&quantiles_path, &csv)?;
    Ok(FitOutput { artifact_path, quantiles_path, artifact })
}

// ---------------------------------------------------------------- place

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub cells: Vec<usize>,
    pub positions_m: Vec<f64>,
    pub gains: Vec<f64>,
    pub objective_values: Vec<f64>,
}

impl From<&GreedyTrace> for TraceReport {
    fn from(t: &GreedyTrace) -> Self {
        Self {
            cells: t.chosen.cells().to_vec(),
            positions_m: t.chosen.positions(),
            gains: t.gains.clone(),
            objective_values: t.objective_values.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalReport {
    pub cells: Vec<usize>,
    pub positions_m: Vec<f64>,
    pub objective: f64,
    pub subsets: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementReport {
    pub config: RunConfig,
    pub m: usize,
    pub total_mean_intensity: f64,
    pub greedy: TraceReport,
    pub lazy: Option<TraceReport>,
    pub lazy_matches_greedy: Option<bool>,
    pub brute_force: Option<OptimalReport>,
    pub brute_force_skipped: Option<String>,
}

impl PlacementReport {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }
}

#[derive(Debug, Clone)]
pub struct PlaceOutput {
    pub report_path: PathBuf,
    pub trace_path: PathBuf,
    pub report: PlacementReport,
}

fn field_from_fit(config: &RunConfig, fit: &FitArtifact) -> Result<(GaussianFieldPosterior, MeanIntensityField)> {
    if fit.grid != config.grid {
        return Err(Error::Config("fit artifact grid differs from config grid".into()));
    }
    let post = fit.posterior()?;
    let field = mean_intensity(&post, config.horizon_ratio)?;
    Ok((post, field))
}

/// Greedy placement of `m` sensors on the surrogate objective, with the
/// lazy-greedy cross-check and (optionally) brute force.
pub fn cmd_place(config: &RunConfig, fit: &FitArtifact, m: usize) -> Result<PlaceOutput> {
    let (_, field) = field_from_fit(config, fit)?;
    let cands = config.candidates();
    let greedy = greedy_place(&field, &config.sensor, &cands, m)?;
    let (lazy, lazy_matches) = if config.lazy {
        let l = lazy_greedy_place(&field, &config.sensor, &cands, m)?;
        let same = l == greedy;
        (Some(TraceReport::from(&l)), Some(same))
    } else {
        (None, None)
    };
    let (brute_force, brute_force_skipped) = if config.brute_force {
        match brute_force_search(&field, &config.sensor, &cands, m, config.enum_cap) {
            Ok(r) => (
                Some(OptimalReport {
                    cells: r.placement.cells().to_vec(),
                    positions_m: r.placement.positions(),
                    objective: r.objective,
                    subsets: r.subsets,
                }),
                None,
            ),
            Err(e @ Error::EnumerationCap { .. }) => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        }
    } else {
        (None, None)
    };
    let report = PlacementReport {
        config: config.clone(),
        m,
        total_mean_intensity: field.total(),
        greedy: TraceReport::from(&greedy),
        lazy,
        lazy_matches_greedy: lazy_matches,
        brute_force,
        brute_force_skipped,
    };
    let report_path = config.out("placement.json");
    write_json(&report_path, &report)?;

    let mut csv = String::from("step,cell,position_m,gain,F\n");
    for (k, ((c, p), (g, f))) in report
        .greedy
        .cells
        .iter()
        .zip(&report.greedy.positions_m)
        .zip(report.greedy.gains.iter().zip(&report.greedy.objective_values))
        .enumerate()
    {
        let _ = writeln!(csv, "{},{c},{p},{g},{f}", k + 1);
    }
    let trace_path = config.out("placement_trace.csv");
    write_text(&trace_path, &csv)?;
    Ok(PlaceOutput { report_path, trace_path, report })
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub m: usize,
    pub vp_mc: f64,
    pub vp_se: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub gap_bound: f64,
    pub mu_u: f64,
    pub sigma2_u: f64,
}

#[derive(Debug, Clone)]
pub struct EvaluateOutput {
    pub csv_path: PathBuf,
    pub rows: Vec<EvaluationRow>,
}

/// Void probability curve along the greedy order, `M = 0..=m_max`, all rows
/// sharing one intensity sample set.
pub fn void_curve(
    samples: &IntensitySampleSet,
    field: &MeanIntensityField,
    params: &SensorParams,
    order: &Placement,
    m_max: usize,
) -> Vec<EvaluationRow> {
    (0..=m_max.min(order.len()))
        .map(|m| {
            let e = evaluate_placement(samples, field, params, &order.prefix(m));
            EvaluationRow {
                m,
                vp_mc: e.vp_mc,
                vp_se: e.vp_se,
                lower_bound: e.lower_bound,
                gap: e.gap,
                gap_bound: e.gap_bound,
                mu_u: e.mu_u,
                sigma2_u: e.sigma2_u,
            }
        })
        .collect()
}

pub fn cmd_evaluate(config: &RunConfig, fit: &FitArtifact, report: &PlacementReport) -> Result<EvaluateOutput> {
    let (post, field) = field_from_fit(config, fit)?;
    let order = Placement::new(config.grid, report.greedy.cells.clone())?;
    let samples = IntensitySampleSet::generate(&post, config.horizon_ratio, config.n_samples, config.seed)?;
    let rows = void_curve(&samples, &field, &config.sensor, &order, config.m_max);
    let mut csv = String::from("M,vp_mc,vp_se,lower_bound,gap,gap_bound,mu_u,sigma2_u\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.m, r.vp_mc, r.vp_se, r.lower_bound, r.gap, r.gap_bound, r.mu_u, r.sigma2_u
        );
    }
    let csv_path = config.out("evaluation.csv");
    write_text(&csv_path, &csv)?;
    Ok(EvaluateOutput { csv_path, rows })
}

// ---------------------------------------------------------------- compare

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub m: usize,
    pub skipped: Option<String>,
    pub greedy_cells: Vec<usize>,
    pub optimal_cells: Vec<usize>,
    pub f_greedy: f64,
    pub f_optimal: f64,
    pub vp_greedy: f64,
    pub se_greedy: f64,
    pub vp_optimal: f64,
    pub se_optimal: f64,
    /// `100 · vp_greedy / vp_optimal`.
    pub ratio_pct: f64,
    /// `100 · sqrt(se_g² + se_o²) / vp_optimal`.
    pub combined_se_pct: f64,
    pub greedy_seconds: f64,
    pub optimal_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct CompareOutput {
    pub csv_path: PathBuf,
    pub timings_path: Option<PathBuf>,
    pub rows: Vec<CompareRow>,
}

/// Greedy against brute force for each `m`, void probability of both on one
/// shared sample set.
pub fn compare_rows(
    samples: &IntensitySampleSet,
    field: &MeanIntensityField,
    params: &SensorParams,
    candidates: &[usize],
    ms: &[usize],
    cap: u64,
) -> Result<Vec<CompareRow>> {
    let mut rows = Vec::with_capacity(ms.len());
    for &m in ms {
        let t0 = Instant::now();
        let greedy = greedy_place(field, params, candidates, m)?;
        let greedy_seconds = t0.elapsed().as_secs_f64();
        let g_stats = mc_void_probability(samples, params, &greedy.chosen);
        let mut row = CompareRow {
            m,
            skipped: None,
            greedy_cells: greedy.chosen.cells().to_vec(),
            optimal_cells: Vec::new(),
            f_greedy: greedy.objective(),
            f_optimal: f64::NAN,
            vp_greedy: g_stats.vp_mc,
            se_greedy: g_stats.vp_se,
            vp_optimal: f64::NAN,
            se_optimal: f64::NAN,
            ratio_pct: f64::NAN,
            combined_se_pct: f64::NAN,
            greedy_seconds,
            optimal_seconds: f64::NAN,
        };
        let t1 = Instant::now();
        match brute_force_search(field, params, candidates, m, cap) {
            Ok(opt) => {
                row.optimal_seconds = t1.elapsed().as_secs_f64();
                let o_stats = mc_void_probability(samples, params, &opt.placement);
                row.optimal_cells = opt.placement.cells().to_vec();
                row.f_optimal = opt.objective;
                row.vp_optimal = o_stats.vp_mc;
                row.se_optimal = o_stats.vp_se;
                row.ratio_pct = 100.0 * g_stats.vp_mc / o_stats.vp_mc;
                row.combined_se_pct = 100.0 * g_stats.vp_se.hypot(o_stats.vp_se) / o_stats.vp_mc;
            }
            Err(e @ Error::EnumerationCap { .. }) => row.skipped = Some(e.to_string()),
            Err(e) => return Err(e),
        }
        rows.push(row);
    }
    Ok(rows)
}

fn fmt_opt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

/// Writes `compare.csv`; wall-clock times go to a separate
/// `compare_timings.csv` only when `timings` is set, since they are not
/// reproducible.
pub fn cmd_compare(config: &RunConfig, fit: &FitArtifact, ms: &[usize], timings: bool) -> Result<CompareOutput> {
    let (post, field) = field_from_fit(config, fit)?;
    let samples = IntensitySampleSet::generate(&post, config.horizon_ratio, config.n_samples, config.seed)?;
    let rows = compare_rows(&samples, &field, &config.sensor, &config.candidates(), ms, config.enum_cap)?;
    let mut csv = String::from(
        "M,status,greedy_cells,optimal_cells,f_greedy,f_optimal,vp_greedy,se_greedy,vp_optimal,se_optimal,ratio_pct,combined_se_pct\n",
    );
    for r in &rows {
        let status = if r.skipped.is_some() { "skipped" } else { "ok" };
        let _ = writeln!(
            csv,
            "{},{status},{},{},{},{},{},{},{},{},{},{}",
            r.m,
            join_cells(&r.greedy_cells),
            join_cells(&r.optimal_cells),
            r.f_greedy,
            fmt_opt(r.f_optimal),
            r.vp_greedy,
            r.se_greedy,
            fmt_opt(r.vp_optimal),
            fmt_opt(r.se_optimal),
            fmt_opt(r.ratio_pct),
            fmt_opt(r.combined_se_pct)
        );
    }
    let csv_path = config.out("compare.csv");
    write_text(&csv_path, &csv)?;
    let timings_path = if timings {
        let mut t = String::from("M,greedy_seconds,optimal_seconds\n");
        for r in &rows {
            let _ = writeln!(t, "{},{},{}", r.m, r.greedy_seconds, fmt_opt(r.optimal_seconds));
        }
        let p = config.out("compare_timings.csv");
        write_text(&p, &t)?;
        Some(p)
    } else {
        None
    };
    Ok(CompareOutput { csv_path, timings_path, rows })
}

/// Runs `f` on a pool of `workers` threads (the global pool when `None`).
#[cfg(feature = "parallel")]
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::Config("--workers must be >= 1".into())),
        Some(n) => {
            let pool =
                rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "grid": {"origin_m": 0, "spacing_m": 50, "n_cells": 8},
        "prior": {"sigma2": 0.25, "zeta": 1.5, "beta_m": 150},
        "seed": 3
    }"#;

    #[test]
    fn defaults_are_filled() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.sensor, SensorParams::default());
        assert_eq!(c.n_samples, 10_000);
        assert_eq!(c.enum_cap, 5_000_000);
        assert_eq!(c.compare_m, vec![2, 3, 4, 5]);
        assert_eq!(c.inputs.dedupe, DedupePolicy::PerVesselPerCell);
        let back = serde_json::to_string(&c).unwrap();
        assert!(back.contains("\"horizon_ratio\":1.0"));
        assert_eq!(RunConfig::from_json(&back).unwrap(), c);
    }

    #[test]
    fn seed_is_required() {
        let text = MINIMAL.replace(",\n        \"seed\": 3", "");
        assert!(matches!(RunConfig::from_json(&text), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let text = MINIMAL.replace("\"seed\": 3", "\"seed\": 3, \"horizon_ratio\": -1");
        let err = RunConfig::from_json(&text).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_CONFIG);
        let text = MINIMAL.replace("\"seed\": 3", "\"seed\": 3, \"bogus\": 1");
        assert!(RunConfig::from_json(&text).is_err());
    }

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [
            exit_code(&Error::Config("x".into())),
            exit_code(&Error::NotConverged { iterations: 1, trace: vec![] }),
            exit_code(&Error::EnumerationCap { required: 2, cap: 1 }),
            exit_code(&Error::Io(std::io::Error::other("x"))),
        ];
        for i in 0..codes.len() {
            assert_ne!(codes[i], EXIT_OK);
            for j in 0..i {
                assert_ne!(codes[i], codes[j]);
            }
        }
    }

    #[test]
    fn bumps_field() {
        let g = Grid1D::new(0.0, 1.0, 3).unwrap();
        let f = bump_log_field(&g, 0.5, &[Bump { center_m: 1.5, width_m: 1.0, peak_rate: 1.5 }]);
        assert!((f[1] - 2f64.ln()).abs() < 1e-15);
        assert!(f[0] < f[1] && f[2] < f[1]);
    }
}
