use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridMode {
    /// Whole line `[−R_max, R_max]`.
    #[serde(rename = "line-1d", alias = "line", alias = "line1d")]
    Line1d,
    /// Half line `(0, R_max]` acting on `u = r^{(d−1)/2} φ`.
    Radial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Dirichlet,
    Radiation,
}

/// Uniform grid. Nodes sit strictly inside the computational interval; the
/// interval ends carry the boundary condition.
///
/// In Dirichlet mode an optional absorbing layer of width `absorb_width`
/// extends the interval beyond `R_max`. Nodes in the layer are not part of
/// the physical region and are excluded from every norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub mode: GridMode,
    pub spacing: f64,
    pub r_max: f64,
    pub absorb_width: f64,
    pub boundary: Boundary,
    pub dim: usize,
    pub n_points: usize,
}

impl Grid {
    pub fn line(spacing: f64, r_max: f64) -> Result<Self> {
        Self::build(GridMode::Line1d, 1, spacing, r_max, 0.0, Boundary::Dirichlet)
    }

    pub fn radial(dim: usize, spacing: f64, r_max: f64) -> Result<Self> {
        Self::build(GridMode::Radial, dim, spacing, r_max, 0.0, Boundary::Dirichlet)
    }

    pub fn build(
        mode: GridMode,
        dim: usize,
        spacing: f64,
        r_max: f64,
        absorb_width: f64,
        boundary: Boundary,
    ) -> Result<Self> {
        if !(spacing > 0.0) || !(r_max > 2.0 * spacing) {
            return Err(Error::invalid(format!(
                "grid needs spacing > 0 and R_max > 2·spacing (got {spacing}, {r_max})"
            )));
        }
        if dim == 0 || (mode == GridMode::Line1d && dim != 1) {
            return Err(Error::invalid("line-1d mode requires dim = 1"));
        }
        if absorb_width < 0.0 || (absorb_width > 0.0 && boundary == Boundary::Radiation) {
            return Err(Error::invalid(
                "absorbing layer must be non-negative and only used with Dirichlet ends",
            ));
        }
        let half = r_max + absorb_width;
        let cells = match mode {
            GridMode::Line1d => (2.0 * half / spacing).round() as usize,
            GridMode::Radial => (half / spacing).round() as usize,
        };
        Ok(Self {
            mode,
            spacing,
            r_max,
            absorb_width,
            boundary,
            dim,
            n_points: cells - 1,
        })
    }

    pub fn with_absorbing_layer(&self, width: f64) -> Result<Self> {
        Self::build(self.mode, self.dim, self.spacing, self.r_max, width, self.boundary)
    }

    pub fn with_boundary(&self, boundary: Boundary) -> Result<Self> {
        let width = if boundary == Boundary::Radiation {
            0.0
        } else {
            self.absorb_width
        };
        Self::build(self.mode, self.dim, self.spacing, self.r_max, width, boundary)
    }

    pub fn with_r_max(&self, r_max: f64) -> Result<Self> {
        Self::build(self.mode, self.dim, self.spacing, r_max, self.absorb_width, self.boundary)
    }

    pub fn with_spacing(&self, spacing: f64) -> Result<Self> {
        Self::build(self.mode, self.dim, spacing, self.r_max, self.absorb_width, self.boundary)
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    /// Coordinate of node `i`.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        let h = self.spacing;
        match self.mode {
            GridMode::Line1d => -(self.r_max + self.absorb_width) + (i + 1) as f64 * h,
            GridMode::Radial => (i + 1) as f64 * h,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Whether node `i` lies in `|x| ≤ R_max` (outside the absorbing layer).
    #[inline]
    pub fn is_physical(&self, i: usize) -> bool {
        self.x(i).abs() <= self.r_max + 1e-12
    }

    /// Whether node `i` is at least `margin` nodes away from both interval ends.
    pub fn is_interior(&self, i: usize, margin: usize) -> bool {
        i >= margin && i + margin < self.n_points
    }

    /// Cell volume used by the quadrature (`spacing` in both modes; the
    /// radial Jacobian is absorbed by the `u`-substitution).
    pub fn cell(&self) -> f64 {
        self.spacing
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_grid_is_symmetric_and_contains_origin() {
        let g = Grid::line(0.25, 4.0).unwrap();
        assert_eq!(g.len(), 31);
        assert_eq!(g.x(0), -3.75);
        assert_eq!(g.x(30), 3.75);
        assert_eq!(g.x(15), 0.0);
    }

    #[test]
    fn absorbing_layer_is_not_physical() {
        let g = Grid::line(0.5, 4.0).unwrap().with_absorbing_layer(2.0).unwrap();
        let physical = (0..g.len()).filter(|&i| g.is_physical(i)).count();
        assert_eq!(physical, 17);
        assert!(!g.is_physical(0));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Grid::line(0.0, 4.0).is_err());
        assert!(Grid::line(1.0, 1.5).is_err());
        assert!(Grid::build(GridMode::Line1d, 3, 0.1, 4.0, 0.0, Boundary::Dirichlet).is_err());
    }
}
