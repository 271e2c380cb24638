//! Uniform 1-D grid over the monitored segment.
//!
//! Cells are indexed `0..n_cells`; cell `i` covers
//! `[origin + i·spacing, origin + (i+1)·spacing)` and its center is the
//! candidate sensor location for that cell. Every spatial integral in the
//! crate is the midpoint rule on this grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    #[serde(rename = "origin_m")]
    origin: f64,
    #[serde(rename = "spacing_m")]
    spacing: f64,
    n_cells: usize,
}

impl Grid1D {
    pub fn new(origin: f64, spacing: f64, n_cells: usize) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidParameter(format!("grid spacing must be > 0, got {spacing}")));
        }
        if n_cells == 0 {
            return Err(Error::InvalidParameter("grid needs at least one cell".into()));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidParameter("grid origin must be finite".into()));
        }
        Ok(Self { origin, spacing, n_cells })
    }

    /// Re-checks invariants after deserialization.
    pub fn validate(&self) -> Result<()> {
        Self::new(self.origin, self.spacing, self.n_cells).map(|_| ())
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn length(&self) -> f64 {
        self.n_cells as f64 * self.spacing
    }

    pub fn cell_center(&self, i: usize) -> Result<f64> {
        if i >= self.n_cells {
            return Err(Error::IndexOutOfRange { index: i, len: self.n_cells });
        }
        Ok(self.center_unchecked(i))
    }

    #[inline]
    pub(crate) fn center_unchecked(&self, i: usize) -> f64 {
        self.origin + (i as f64 + 0.5) * self.spacing
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center_unchecked(i)).collect()
    }

    /// Cell containing `position`, or `None` outside the segment.
    pub fn locate(&self, position: f64) -> Option<usize> {
        let t = ((position - self.origin) / self.spacing).floor();
        if t >= 0.0 && t < self.n_cells as f64 {
            Some(t as usize)
        } else {
            None
        }
    }

    /// Midpoint-rule integral `Σ values[i] · spacing`.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite integrand at cell {i}")));
        }
        Ok(self.integrate_unchecked(values))
    }

    #[inline]
    pub(crate) fn integrate_unchecked(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.spacing
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_cells {
            return Err(Error::LengthMismatch { expected: self.n_cells, got: len });
        }
        Ok(())
    }

    /// The same grid with cell order reversed maps cell `i` to `n - 1 - i`.
    pub fn mirror_index(&self, i: usize) -> usize {
        self.n_cells - 1 - i
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cell_centers() {
        let g = Grid1D::new(0.0, 50.0, 10).unwrap();
        assert_eq!(g.cell_center(0).unwrap(), 25.0);
        assert_eq!(g.cell_center(9).unwrap(), 475.0);
        let g = Grid1D::new(100.0, 50.0, 10).unwrap();
        assert_eq!(g.cell_center(0).unwrap(), 125.0);
    }

    #[test]
    fn out_of_range_center() {
        let g = Grid1D::new(0.0, 50.0, 10).unwrap();
        assert!(matches!(g.cell_center(10), Err(Error::IndexOutOfRange { index: 10, len: 10 })));
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(Grid1D::new(0.0, 0.0, 3).is_err());
        assert!(Grid1D::new(0.0, -1.0, 3).is_err());
        assert!(Grid1D::new(0.0, 1.0, 0).is_err());
        assert!(Grid1D::new(f64::NAN, 1.0, 2).is_err());
    }

    #[test]
    fn integrate_examples() {
        let g = Grid1D::new(0.0, 50.0, 10).unwrap();
        assert_eq!(g.integrate(&[1.0; 10]).unwrap(), 500.0);
        assert_eq!(g.integrate(&[0.0; 10]).unwrap(), 0.0);
        let g = Grid1D::new(0.0, 0.5, 3).unwrap();
        assert_eq!(g.integrate(&[1.0, 2.0, 3.0]).unwrap(), 3.0);
        assert_eq!(g.length(), 1.5);
    }

    #[test]
    fn integrate_rejects_wrong_length_and_nan() {
        let g = Grid1D::new(0.0, 1.0, 3).unwrap();
        assert!(matches!(g.integrate(&[1.0, 2.0]), Err(Error::LengthMismatch { expected: 3, got: 2 })));
        assert!(g.integrate(&[1.0, f64::NAN, 2.0]).is_err());
    }

    #[test]
    fn locate_cells() {
        let g = Grid1D::new(0.0, 50.0, 4).unwrap();
        assert_eq!(g.locate(0.0), Some(0));
        assert_eq!(g.locate(49.999), Some(0));
        assert_eq!(g.locate(50.0), Some(1));
        assert_eq!(g.locate(199.9), Some(3));
        assert_eq!(g.locate(200.0), None);
        assert_eq!(g.locate(-0.1), None);
    }

    #[test]
    fn serde_field_names() {
        let g = Grid1D::new(1.0, 2.0, 3).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"origin_m":1.0,"spacing_m":2.0,"n_cells":3}"#);
    }

    proptest! {
        #[test]
        fn integrate_is_linear(
            u in prop::collection::vec(-1e3f64..1e3, 1..40),
            a in -10.0f64..10.0,
            b in -10.0f64..10.0,
            spacing in 0.01f64..100.0,
            seed in any::<u64>(),
        ) {
            let n = u.len();
            let v: Vec<f64> = (0..n).map(|i| ((seed.wrapping_add(i as u64) % 1000) as f64) - 500.0).collect();
            let g = Grid1D::new(0.0, spacing, n).unwrap();
            let combo: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
            let lhs = g.integrate(&combo).unwrap();
            let rhs = a * g.integrate(&u).unwrap() + b * g.integrate(&v).unwrap();
            let scale = u.iter().chain(&v).map(|x| x.abs()).sum::<f64>() * spacing * (a.abs() + b.abs()) + 1.0;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }

        #[test]
        fn integrate_nonnegative(u in prop::collection::vec(0.0f64..1e6, 1..40)) {
            let g = Grid1D::new(0.0, 1.5, u.len()).unwrap();
            prop_assert!(g.integrate(&u).unwrap() >= 0.0);
        }
    }
}
