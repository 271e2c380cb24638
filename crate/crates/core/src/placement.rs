//! Surrogate objective and sensor selection.
//!
//! `F(a) = ∫ λ̄(s) (1 − π(s, a)) ds` is non-negative, monotone and
//! submodular in the placement `a`, so greedy selection is within
//! `1 − 1/e` of the best `M`-subset. The marginal gain of adding cell `c`
//! to a placement with miss field `π` is `∫ λ̄ π γ(·, c) ds`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp_prior::GaussianFieldPosterior;
use crate::grid::Grid1D;
use crate::par;
use crate::sensor_model::{miss_prob_field, DetectionTable, MissField, Placement, SensorParams};

/// Default cap on the number of subsets brute force may enumerate.
pub const DEFAULT_ENUMERATION_CAP: u64 = 5_000_000;

/// `λ̄(s) = E[(T/T_c) λ(s)]` on the grid, events per meter over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanIntensityField {
    pub grid: Grid1D,
    pub lambda_bar: Vec<f64>,
}

impl MeanIntensityField {
    pub fn new(grid: Grid1D, lambda_bar: Vec<f64>) -> Result<Self> {
        grid.check_len(lambda_bar.len())?;
        if let Some(i) = lambda_bar.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("mean intensity at cell {i} must be finite and >= 0")));
        }
        Ok(Self { grid, lambda_bar })
    }

    /// `∫ λ̄ ds`.
    pub fn total(&self) -> f64 {
        self.grid.integrate_unchecked(&self.lambda_bar)
    }

    /// `∫ λ̄ π ds` for a miss field `π`.
    pub fn thinned_total(&self, miss: &[f64]) -> f64 {
        let s: f64 = self.lambda_bar.iter().zip(miss).map(|(l, p)| l * p).sum();
        s * self.grid.spacing()
    }

    /// `∫ λ̄ (1 − π) ds` for a miss field `π`.
    pub fn covered_total(&self, miss: &[f64]) -> f64 {
        let s: f64 = self.lambda_bar.iter().zip(miss).map(|(l, p)| l * (1.0 - p)).sum();
        s * self.grid.spacing()
    }
}

/// Lognormal mean `ratio · exp(m_i + Σ_ii / 2)` per cell.
pub fn mean_intensity(posterior: &GaussianFieldPosterior, horizon_ratio: f64) -> Result<MeanIntensityField> {
    if !(horizon_ratio > 0.0) || !horizon_ratio.is_finite() {
        return Err(Error::InvalidParameter(format!("horizon ratio must be > 0, got {horizon_ratio}")));
    }
    let mut lambda_bar = Vec::with_capacity(posterior.mean().len());
    for (i, m) in posterior.mean().iter().enumerate() {
        let v = horizon_ratio * (m + 0.5 * posterior.variance(i)).exp();
        if !v.is_finite() {
            return Err(Error::Overflow { cell: i });
        }
        lambda_bar.push(v);
    }
    MeanIntensityField::new(*posterior.grid(), lambda_bar)
}

/// Surrogate objective `F(a) = ∫ λ̄ ds − ∫ λ̄ π(·, a) ds`, evaluated as
/// `∫ λ̄ (1 − π) ds` so it is never negative.
pub fn objective_f(field: &MeanIntensityField, params: &SensorParams, placement: &Placement) -> f64 {
    assert_eq!(field.grid, *placement.grid(), "placement and intensity live on different grids");
    field.covered_total(&miss_prob_field(params, &field.grid, placement))
}

/// Greedy selection record: picks in order, the gain of each pick, and `F`
/// after each pick.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyTrace {
    pub chosen: Placement,
    pub gains: Vec<f64>,
    pub objective_values: Vec<f64>,
}

impl GreedyTrace {
    pub fn objective(&self) -> f64 {
        self.objective_values.last().copied().unwrap_or(0.0)
    }
}

/// Sorted, de-duplicated, range-checked candidate list.
pub fn normalize_candidates(grid: &Grid1D, candidates: &[usize]) -> Result<Vec<usize>> {
    let mut c = candidates.to_vec();
    c.sort_unstable();
    c.dedup();
    if let Some(&last) = c.last() {
        if last >= grid.n_cells() {
            return Err(Error::IndexOutOfRange { index: last, len: grid.n_cells() });
        }
    }
    Ok(c)
}

pub fn all_cells(grid: &Grid1D) -> Vec<usize> {
    (0..grid.n_cells()).collect()
}

struct Setup {
    table: DetectionTable,
}

fn setup(field: &MeanIntensityField, params: &SensorParams, candidates: &[usize], m: usize) -> Result<Setup> {
    params.validate()?;
    let cands = normalize_candidates(&field.grid, candidates)?;
    if m > cands.len() {
        return Err(Error::TooManySensors { requested: m, available: cands.len() });
    }
    Ok(Setup { table: DetectionTable::new(params, &field.grid, &cands) })
}

#[inline]
fn marginal_gain(field: &MeanIntensityField, miss: &[f64], row: &[f64]) -> f64 {
    let s: f64 = field.lambda_bar.iter().zip(miss).zip(row).map(|((l, p), g)| l * p * g).sum();
    s * field.grid.spacing()
}

/// Standard greedy: each round adds the candidate with the largest marginal
/// gain, ties going to the lowest cell index.
pub fn greedy_place(
    field: &MeanIntensityField,
    params: &SensorParams,
    candidates: &[usize],
    m: usize,
) -> Result<GreedyTrace> {
    let Setup { table } = setup(field, params, candidates, m)?;
    let k = table.candidates().len();
    let mut miss = MissField::new(field.grid);
    let mut taken = vec![false; k];
    let mut chosen = Placement::empty(field.grid);
    let mut gains = Vec::with_capacity(m);
    let mut objective_values = Vec::with_capacity(m);

    for _ in 0..m {
        let round: Vec<Option<f64>> =
            par::map_range(k, |j| (!taken[j]).then(|| marginal_gain(field, miss.values(), table.row(j))));
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in round.into_iter().enumerate() {
            if let Some(g) = g {
                if best.is_none_or(|(_, bg)| g > bg) {
                    best = Some((j, g));
                }
            }
        }
        let (j, g) = best.expect("m <= candidates guarantees a free candidate");
        taken[j] = true;
        miss.apply_row(table.row(j));
        chosen.push_unchecked(table.candidates()[j]);
        gains.push(g);
        objective_values.push(field.covered_total(miss.values()));
    }
    Ok(GreedyTrace { chosen, gains, objective_values })
}

#[derive(Debug, Clone, Copy)]
struct StaleGain {
    gain: f64,
    index: usize,
    round: usize,
}

impl PartialEq for StaleGain {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for StaleGain {}

impl PartialOrd for StaleGain {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for StaleGain {
    // Max-heap: larger gain first, then lower candidate index.
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain.total_cmp(&other.gain).then_with(|| other.index.cmp(&self.index))
    }
}

/// Lazy greedy. Stale gains are upper bounds on current gains (diminishing
/// returns), so a popped entry that is fresh for this round is the greedy
/// pick. Gains are evaluated with the same arithmetic as `greedy_place`,
/// which keeps the two bitwise identical.
pub fn lazy_greedy_place(
    field: &MeanIntensityField,
    params: &SensorParams,
    candidates: &[usize],
    m: usize,
) -> Result<GreedyTrace> {
    lazy_greedy_counted(field, params, candidates, m).map(|(t, _)| t)
}

/// `lazy_greedy_place` plus the number of gain evaluations performed.
pub fn lazy_greedy_counted(
    field: &MeanIntensityField,
    params: &SensorParams,
    candidates: &[usize],
    m: usize,
) -> Result<(GreedyTrace, usize)> {
    let Setup { table } = setup(field, params, candidates, m)?;
    let k = table.candidates().len();
    let mut miss = MissField::new(field.grid);
    let mut chosen = Placement::empty(field.grid);
    let mut gains = Vec::with_capacity(m);
    let mut objective_values = Vec::with_capacity(m);

    let initial = par::map_range(k, |j| marginal_gain(field, miss.values(), table.row(j)));
    let mut evaluations = k;
    let mut heap: BinaryHeap<StaleGain> =
        initial.into_iter().enumerate().map(|(index, gain)| StaleGain { gain, index, round: 0 }).collect();

    for round in 0..m {
        loop {
            let top = heap.pop().expect("heap holds every unselected candidate");
            if top.round == round {
                miss.apply_row(table.row(top.index));
                chosen.push_unchecked(table.candidates()[top.index]);
                gains.push(top.gain);
                objective_values.push(field.covered_total(miss.values()));
                break;
            }
            let gain = marginal_gain(field, miss.values(), table.row(top.index));
            evaluations += 1;
            heap.push(StaleGain { gain, index: top.index, round });
        }
    }
    Ok((GreedyTrace { chosen, gains, objective_values }, evaluations))
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc·(n−i) is divisible by (i+1) at every step.
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub placement: Placement,
    pub objective: f64,
    pub subsets: u128,
}

/// Exhaustive maximizer of `F` over all `m`-subsets of the candidates;
/// ties go to the lexicographically smallest index tuple. The returned
/// placement lists cells in ascending order.
pub fn brute_force_place(
    field: &MeanIntensityField,
    params: &SensorParams,
    candidates: &[usize],
    m: usize,
    cap: u64,
) -> Result<Placement> {
    brute_force_search(field, params, candidates, m, cap).map(|r| r.placement)
}

pub fn brute_force_search(
    field: &MeanIntensityField,
    params: &SensorParams,
    candidates: &[usize],
    m: usize,
    cap: u64,
) -> Result<BruteForceResult> {
    let cands = normalize_candidates(&field.grid, candidates)?;
    if m > cands.len() {
        return Err(Error::TooManySensors { requested: m, available: cands.len() });
    }
    let required = binomial(cands.len(), m);
    if required > cap as u128 {
        return Err(Error::EnumerationCap { required, cap });
    }
    if m == 0 {
        return Ok(BruteForceResult { placement: Placement::empty(field.grid), objective: 0.0, subsets: 1 });
    }
    let Setup { table } = setup(field, params, &cands, m)?;
    let k = cands.len();
    let firsts = k - m + 1;
    let per_first: Vec<Option<(f64, Vec<usize>)>> = par::map_range(firsts, |j0| {
        let mut search = Dfs::new(field, &table, m);
        search.run_from(j0);
        search.best
    });
    let mut best: Option<(f64, Vec<usize>)> = None;
    for cand in per_first.into_iter().flatten() {
        if best.as_ref().is_none_or(|(bv, _)| cand.0 > *bv) {
            best = Some(cand);
        }
    }
    let (objective, idx) = best.expect("at least one subset");
    let cells = idx.into_iter().map(|j| cands[j]).collect();
    Ok(BruteForceResult { placement: Placement::new(field.grid, cells)?, objective, subsets: required })
}

/// Depth-first enumeration in lexicographic order with the partial miss
/// field cached per depth.
struct Dfs<'a> {
    field: &'a MeanIntensityField,
    table: &'a DetectionTable,
    m: usize,
    levels: Vec<Vec<f64>>,
    current: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
}

impl<'a> Dfs<'a> {
    fn new(field: &'a MeanIntensityField, table: &'a DetectionTable, m: usize) -> Self {
        let n = field.grid.n_cells();
        Self { field, table, m, levels: vec![vec![1.0; n]; m + 1], current: Vec::with_capacity(m), best: None }
    }

    fn run_from(&mut self, first: usize) {
        self.current.push(first);
        self.extend(0, first);
        self.current.pop();
    }

    /// `current` has depth+1 entries; level depth+1 gets the new miss field.
    fn extend(&mut self, depth: usize, j: usize) {
        let (head, tail) = self.levels.split_at_mut(depth + 1);
        let prev = &head[depth];
        let next = &mut tail[0];
        for ((n, p), g) in next.iter_mut().zip(prev).zip(self.table.row(j)) {
            *n = p * (1.0 - g);
        }
        if depth + 1 == self.m {
            let value = self.field.covered_total(&self.levels[depth + 1]);
            if self.best.as_ref().is_none_or(|(bv, _)| value > *bv) {
                self.best = Some((value, self.current.clone()));
            }
            return;
        }
        let k = self.table.candidates().len();
        let remaining = self.m - depth - 1;
        for nj in (j + 1)..=(k - remaining) {
            self.current.push(nj);
            self.extend(depth + 1, nj);
            self.current.pop();
        }
    }
}
