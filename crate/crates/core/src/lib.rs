//! Numerical laboratory for Schrödinger operators with repulsive
//! potentials `H = −½Δ − |x|^ε + q₁ + q₂`.

pub mod band;
pub mod classical;
pub mod config;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod grid;
pub mod jet;
pub mod model;
pub mod operators;
pub mod radiation;
pub mod resolvent;
pub mod spaces;

pub use band::{BandMatrix, C64};
pub use classical::{asymptotic_rate, integrate_orbit, AsymptoticRate, GrowthClass, Trajectory};
pub use config::Config;
pub use error::{Error, Result};
pub use geometry::{build_geometry, theta_weight, GeometryField, ThetaWeight};
pub use grid::{Boundary, Grid, GridMode};
pub use model::{audit_conditions, build_hamiltonian, DiscreteOperator, HamiltonianOptions, PotentialSpec};
pub use operators::{
    commutator_identity_check, factorization_check, positivity_probe, probe_search, PhaseField, PhaseSign, ProbeLemma,
    ProbeOptions, ProbeReport,
};
pub use radiation::{
    generalized_eigenfunction, radiation_residuals, rellich_probe, sommerfeld_solve, sommerfeld_verify, BoundaryRow,
    EigenfunctionProbe, RadiationReport,
};
pub use resolvent::{
    besov_bound_sweep, holder_exponent, lap_extrapolate, solve, Problem, SpectralQuery, SweepRecord,
};
pub use spaces::{besov_norms, DyadicDecomposition, NormReport};
