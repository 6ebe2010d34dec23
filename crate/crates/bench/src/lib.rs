//! Shared fixtures for the criterion benches.

use replab_core::{Config, HamiltonianOptions, Problem};

/// The reference instance (spacing 1/64, `f(R_max) = 64`, absorbing layer).
pub fn reference_problem() -> Problem {
    let cfg = Config::reference();
    Problem::new(cfg.spec().unwrap(), &cfg.grid().unwrap(), &HamiltonianOptions::default()).unwrap()
}

/// The reference potential on a line grid of the given size, no layer.
pub fn line_problem(spacing: f64, r_max: f64) -> Problem {
    let grid = replab_core::Grid::line(spacing, r_max).unwrap();
    Problem::new(replab_core::PotentialSpec::reference(), &grid, &HamiltonianOptions::default()).unwrap()
}
