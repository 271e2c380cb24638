//! Detection model: a single sensor's detection probability and the miss
//! probability of a set of sensors placed at cell centers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid1D;

/// `γ(s, a) = ρ · exp(−(a − s)² / σ_l)`. Note that `σ_l` divides the squared
/// distance directly (units of m²), it is not a standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorParams {
    rho: f64,
    sigma_l: f64,
}

impl SensorParams {
    pub fn new(rho: f64, sigma_l: f64) -> Result<Self> {
        let p = Self { rho, sigma_l };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        if !(self.sigma_l > 0.0) || !self.sigma_l.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma_l must be > 0, got {}", self.sigma_l)));
        }
        Ok(())
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn sigma_l(&self) -> f64 {
        self.sigma_l
    }
}

impl Default for SensorParams {
    /// `ρ = 0.95`, `σ_l = 0.9` m².
    fn default() -> Self {
        Self { rho: 0.95, sigma_l: 0.9 }
    }
}

pub fn detect_prob(params: &SensorParams, s: f64, a: f64) -> f64 {
    let d = a - s;
    params.rho * (-(d * d) / params.sigma_l).exp()
}

/// Ordered, duplicate-free set of sensor cells. Order is selection order.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    grid: Grid1D,
    cells: Vec<usize>,
}

impl Placement {
    pub fn new(grid: Grid1D, cells: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; grid.n_cells()];
        for &c in &cells {
            if c >= grid.n_cells() {
                return Err(Error::IndexOutOfRange { index: c, len: grid.n_cells() });
            }
            if std::mem::replace(&mut seen[c], true) {
                return Err(Error::DuplicateCell(c));
            }
        }
        Ok(Self { grid, cells })
    }

    pub fn empty(grid: Grid1D) -> Self {
        Self { grid, cells: Vec::new() }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.cells.iter().map(|&c| self.grid.center_unchecked(c)).collect()
    }

    /// First `m` sensors in selection order.
    pub fn prefix(&self, m: usize) -> Self {
        Self { grid: self.grid, cells: self.cells[..m.min(self.cells.len())].to_vec() }
    }

    pub(crate) fn push_unchecked(&mut self, cell: usize) {
        self.cells.push(cell);
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.cells.contains(&cell)
    }
}

/// `π(s, a) = Π_i (1 − γ(s, a_i))`; 1 for an empty placement.
pub fn miss_prob(params: &SensorParams, s: f64, placement: &Placement) -> f64 {
    placement.cells.iter().fold(1.0, |acc, &c| acc * (1.0 - detect_prob(params, s, placement.grid.center_unchecked(c))))
}

/// `miss_prob` at every cell center.
pub fn miss_prob_field(params: &SensorParams, grid: &Grid1D, placement: &Placement) -> Vec<f64> {
    let mut field = MissField::new(*grid);
    for &c in placement.cells() {
        field.add_sensor(params, c);
    }
    field.into_values()
}

/// Miss probability at each cell center, updated one sensor at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct MissField {
    grid: Grid1D,
    values: Vec<f64>,
}

impl MissField {
    pub fn new(grid: Grid1D) -> Self {
        Self { grid, values: vec![1.0; grid.n_cells()] }
    }

    /// Multiplies in the survival factor `1 − γ(·, center(cell))`.
    pub fn add_sensor(&mut self, params: &SensorParams, cell: usize) {
        let a = self.grid.center_unchecked(cell);
        for (i, v) in self.values.iter_mut().enumerate() {
            *v *= 1.0 - detect_prob(params, self.grid.center_unchecked(i), a);
        }
    }

    /// Same as `add_sensor` with a precomputed detection row.
    pub(crate) fn apply_row(&mut self, row: &[f64]) {
        for (v, g) in self.values.iter_mut().zip(row) {
            *v *= 1.0 - g;
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Detection probabilities `γ(center_i, center_c)` for a set of candidate
/// cells `c`, one row per candidate. Memory is `|candidates| · n_cells`.
#[derive(Debug, Clone)]
pub struct DetectionTable {
    n_cells: usize,
    candidates: Vec<usize>,
    rows: Vec<f64>,
}

impl DetectionTable {
    pub fn new(params: &SensorParams, grid: &Grid1D, candidates: &[usize]) -> Self {
        let n = grid.n_cells();
        let mut rows = Vec::with_capacity(candidates.len() * n);
        for &c in candidates {
            let a = grid.center_unchecked(c);
            rows.extend((0..n).map(|i| detect_prob(params, grid.center_unchecked(i), a)));
        }
        Self { n_cells: n, candidates: candidates.to_vec(), rows }
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    /// Row for the `k`-th candidate.
    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k * self.n_cells..(k + 1) * self.n_cells]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn detect_prob_examples() {
        let p = SensorParams::new(0.95, 0.9).unwrap();
        assert_eq!(detect_prob(&p, 10.0, 10.0), 0.95);
        assert!(detect_prob(&p, 0.0, 1e6) < 1e-300);
        assert_eq!(detect_prob(&p, 0.0, 1e6), 0.0);
    }

    #[test]
    fn invalid_params() {
        assert!(SensorParams::new(1.1, 1.0).is_err());
        assert!(SensorParams::new(-0.1, 1.0).is_err());
        assert!(SensorParams::new(0.5, 0.0).is_err());
        assert!(SensorParams::new(1.0, 1.0).is_ok());
        assert!(SensorParams::new(0.0, 1.0).is_ok());
    }

    #[test]
    fn placement_validation() {
        let g = Grid1D::new(0.0, 1.0, 5).unwrap();
        assert!(matches!(Placement::new(g, vec![1, 1]), Err(Error::DuplicateCell(1))));
        assert!(matches!(Placement::new(g, vec![5]), Err(Error::IndexOutOfRange { .. })));
        let p = Placement::new(g, vec![3, 0]).unwrap();
        assert_eq!(p.positions(), vec![3.5, 0.5]);
    }

    #[test]
    fn miss_prob_examples() {
        let g = Grid1D::new(0.0, 50.0, 10).unwrap();
        let p = SensorParams::new(0.95, 0.9).unwrap();
        assert_eq!(miss_prob(&p, 25.0, &Placement::empty(g)), 1.0);
        let one = Placement::new(g, vec![0]).unwrap();
        assert!((miss_prob(&p, 25.0, &one) - 0.05).abs() < 1e-15);

        // Two sensors, both one cell away, each detecting with γ = 0.5.
        let g1 = Grid1D::new(0.0, 1.0, 3).unwrap();
        let p = SensorParams::new(1.0, 1.0 / 2f64.ln()).unwrap();
        let two = Placement::new(g1, vec![0, 2]).unwrap();
        assert!((detect_prob(&p, 1.5, 0.5) - 0.5).abs() < 1e-15);
        assert!((miss_prob(&p, 1.5, &two) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn empty_field_is_ones() {
        let g = Grid1D::new(0.0, 1.0, 7).unwrap();
        let p = SensorParams::new(0.9, 2.0).unwrap();
        assert_eq!(miss_prob_field(&p, &g, &Placement::empty(g)), vec![1.0; 7]);
    }

    #[test]
    fn table_rows_match_direct_evaluation() {
        let g = Grid1D::new(3.0, 2.0, 9).unwrap();
        let p = SensorParams::new(0.8, 7.0).unwrap();
        let t = DetectionTable::new(&p, &g, &[2, 7]);
        for i in 0..9 {
            assert_eq!(t.row(1)[i], detect_prob(&p, g.center_unchecked(i), g.center_unchecked(7)));
        }
    }

    fn instance() -> impl Strategy<Value = (usize, f64, f64, Vec<usize>, usize)> {
        (2usize..40, 0.0f64..=1.0, 0.05f64..50.0).prop_flat_map(|(n, rho, sl)| {
            (
                Just(n),
                Just(rho),
                Just(sl),
                prop::sample::subsequence((0..n).collect::<Vec<_>>(), 0..n.min(8)).prop_shuffle(),
                0..n,
            )
        })
    }

    proptest! {
        #[test]
        fn incremental_update_matches_recomputation((n, rho, sl, cells, extra) in instance()) {
            let g = Grid1D::new(-4.0, 1.3, n).unwrap();
            let p = SensorParams::new(rho, sl).unwrap();
            let placement = Placement::new(g, cells.clone()).unwrap();
            let mut field = MissField::new(g);
            for &c in &cells {
                field.add_sensor(&p, c);
            }
            for i in 0..n {
                let direct = miss_prob(&p, g.center_unchecked(i), &placement);
                let inc = field.values()[i];
                prop_assert!((direct - inc).abs() <= 1e-15 * direct.abs());
            }
            let before = field.clone();
            field.add_sensor(&p, extra);
            for (a, b) in field.values().iter().zip(before.values()) {
                prop_assert!(a <= b);
            }
        }

        #[test]
        fn miss_prob_order_invariant_and_monotone((n, rho, sl, cells, _e) in instance(), s in -10.0f64..60.0) {
            let g = Grid1D::new(-4.0, 1.3, n).unwrap();
            let p = SensorParams::new(rho, sl).unwrap();
            let fwd = Placement::new(g, cells.clone()).unwrap();
            let mut rev_cells = cells.clone();
            rev_cells.reverse();
            let rev = Placement::new(g, rev_cells).unwrap();
            let a = miss_prob(&p, s, &fwd);
            let b = miss_prob(&p, s, &rev);
            prop_assert!((a - b).abs() <= 1e-14);
            prop_assert!((0.0..=1.0).contains(&a));
            for k in 0..cells.len() {
                prop_assert!(miss_prob(&p, s, &fwd.prefix(k)) >= miss_prob(&p, s, &fwd.prefix(k + 1)));
            }
        }

        #[test]
        fn detect_prob_symmetric_and_bounded(s in -1e4f64..1e4, a in -1e4f64..1e4, rho in 0.0f64..=1.0, sl in 1e-3f64..1e6) {
            let p = SensorParams::new(rho, sl).unwrap();
            let g = detect_prob(&p, s, a);
            prop_assert_eq!(g, detect_prob(&p, a, s));
            prop_assert!((0.0..=rho).contains(&g));
        }
    }
}
