//! Resolvent solves, Besov-bound sweeps along `Γ ↓ 0`, extrapolation to the
//! real axis and Hölder-exponent fits.

use std::io::Write;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band::{norm2, BandLu, BandMatrix, C64};
use crate::error::{Error, Result};
use crate::geometry::{self, GeometryField};
use crate::grid::{Grid, GridMode};
use crate::model::{self, DiscreteOperator, HamiltonianOptions, PotentialSpec};
use crate::operators::{central_difference, log_log_slope, PhaseSign};
use crate::radiation::RadiationReport;
use crate::spaces::{besov_norms, DyadicDecomposition};

/// Relative residual a solve must meet.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// `z = λ ± iΓ` with `λ` in the interval `I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralQuery {
    pub lambda: f64,
    pub gamma: f64,
    pub sign: PhaseSign,
    pub interval: (f64, f64),
}

impl SpectralQuery {
    pub fn new(lambda: f64, gamma: f64, sign: PhaseSign, interval: (f64, f64)) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::invalid(format!("Γ = {gamma} outside [0, 1)")));
        }
        if !(interval.0 < lambda && lambda < interval.1) {
            return Err(Error::invalid(format!("λ = {lambda} outside I = {interval:?}")));
        }
        Ok(Self {
            lambda,
            gamma,
            sign,
            interval,
        })
    }

    pub fn z(&self) -> C64 {
        C64::new(self.lambda, self.sign.sigma() * self.gamma)
    }
}

/// Everything a resolvent computation needs, built once per instance.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: PotentialSpec,
    pub geom: GeometryField,
    pub hamiltonian: DiscreteOperator,
    pub decomp: DyadicDecomposition,
}

impl Problem {
    pub fn new(spec: PotentialSpec, grid: &Grid, opts: &HamiltonianOptions) -> Result<Self> {
        let geom = geometry::build_geometry(grid, spec.epsilon, spec.rho)?;
        let hamiltonian = model::build_hamiltonian_with(&spec, &geom, opts)?;
        let decomp = DyadicDecomposition::f_based(&geom);
        Ok(Self {
            spec,
            geom,
            hamiltonian,
            decomp,
        })
    }

    pub fn len(&self) -> usize {
        self.geom.len()
    }

    pub fn is_empty(&self) -> bool {
        self.geom.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.geom.grid.spacing
    }

    /// `H − z` factorized once for repeated solves.
    pub fn shifted(&self, z: C64) -> Result<ShiftedSolver> {
        ShiftedSolver::new(&self.hamiltonian.matrix, z)
    }
}

/// Factorization of `H − z` with residual-checked solves.
#[derive(Debug, Clone)]
pub struct ShiftedSolver {
    pub z: C64,
    matrix: BandMatrix,
    lu: BandLu,
}

impl ShiftedSolver {
    pub fn new(h: &BandMatrix, z: C64) -> Result<Self> {
        Self::from_matrix(h.shifted(z), z)
    }

    /// Wraps an already shifted matrix (for instance one with boundary rows).
    pub fn from_matrix(matrix: BandMatrix, z: C64) -> Result<Self> {
        let lu = matrix.lu()?;
        Ok(Self { z, matrix, lu })
    }

    pub fn min_pivot_ratio(&self) -> f64 {
        self.lu.min_pivot_ratio()
    }

    /// Direct solve plus up to two steps of iterative refinement; fails
    /// with `SingularShift` if the residual stays above tolerance.
    pub fn solve(&self, psi: &[C64]) -> Result<Vec<C64>> {
        let scale = norm2(psi);
        let mut phi = self.lu.solve(psi);
        if scale == 0.0 {
            return Ok(phi);
        }
        for _ in 0..3 {
            let r: Vec<C64> = psi.iter().zip(self.matrix.matvec(&phi)).map(|(a, b)| a - b).collect();
            let rel = norm2(&r) / scale;
            if rel <= SOLVE_TOLERANCE {
                return Ok(phi);
            }
            let dphi = self.lu.solve(&r);
            for (p, d) in phi.iter_mut().zip(dphi) {
                *p += d;
            }
        }
        let r: Vec<C64> = psi.iter().zip(self.matrix.matvec(&phi)).map(|(a, b)| a - b).collect();
        let rel = norm2(&r) / scale;
        if rel <= SOLVE_TOLERANCE {
            Ok(phi)
        } else {
            Err(Error::SingularShift {
                row: 0,
                pivot: self.lu.min_pivot_ratio(),
            })
        }
    }

    /// `(H − z)^{−†} v`, using `Hᵀ = H` for the symmetric discretization.
    pub fn solve_adjoint(&self, v: &[C64]) -> Result<Vec<C64>> {
        let conj: Vec<C64> = v.iter().map(|x| x.conj()).collect();
        Ok(self.solve(&conj)?.into_iter().map(|x| x.conj()).collect())
    }

    pub fn residual(&self, phi: &[C64], psi: &[C64]) -> f64 {
        let r: Vec<C64> = psi.iter().zip(self.matrix.matvec(phi)).map(|(a, b)| a - b).collect();
        norm2(&r) / norm2(psi).max(f64::MIN_POSITIVE)
    }
}

/// `φ = (H − z)^{−1} ψ`.
pub fn solve(h: &DiscreteOperator, z: C64, psi: &[C64]) -> Result<Vec<C64>> {
    ShiftedSolver::new(&h.matrix, z)?.solve(psi)
}

/// Radial derivative of `φ` expressed on the grid unknowns: `u′` in line
/// mode, `u′ − (d−1)/(2r) u` in radial mode (`u = r^{(d−1)/2}φ`).
pub fn radial_derivative(geom: &GeometryField, u: &[C64]) -> Vec<C64> {
    let d = central_difference(geom.len(), geom.grid.spacing);
    let mut du = d.matvec(u);
    if geom.grid.mode == GridMode::Radial && geom.grid.dim > 1 {
        let k = (geom.grid.dim as f64 - 1.0) / 2.0;
        for (i, v) in du.iter_mut().enumerate() {
            *v -= u[i] * (k / geom.x[i]);
        }
    }
    du
}

/// `p^f φ = −i f′ ∂_r φ`.
pub fn pf_apply(geom: &GeometryField, u: &[C64]) -> Vec<C64> {
    radial_derivative(geom, u)
        .into_iter()
        .enumerate()
        .map(|(i, v)| C64::new(0.0, -geom.grad_f[i]) * v)
        .collect()
}

/// `⟨p h p⟩_φ^{1/2}` over the physical region.
pub fn h_form(geom: &GeometryField, u: &[C64]) -> f64 {
    weighted_h_form(geom, u, 0.0)
}

/// `⟨p f^{2β} h p⟩_φ^{1/2}` over the physical region.
pub fn weighted_h_form(geom: &GeometryField, u: &[C64], beta: f64) -> f64 {
    let du = radial_derivative(geom, u);
    let h = geom.grid.spacing;
    (0..geom.len())
        .filter(|&i| geom.grid.is_physical(i))
        .map(|i| geom.f[i].powf(2.0 * beta) * geom.h[i] * du[i].norm_sqr() * h)
        .sum::<f64>()
        .sqrt()
}

/// `p²φ = −Δφ` through the discrete Hamiltonian: `2(Hφ − Vφ)` with `V` the
/// physical potential (no absorbing term). In radial mode the result is
/// `−u″ + c/r² u`, the radial Laplacian on the `u` unknowns.
pub fn kinetic_apply(problem: &Problem, u: &[C64]) -> Vec<C64> {
    let m = &problem.hamiltonian.matrix;
    let hu = m.matvec(u);
    let v = model::potential_values(&problem.spec, &problem.geom);
    let cl = if problem.geom.grid.mode == GridMode::Radial {
        problem.spec.centrifugal()
    } else {
        0.0
    };
    (0..u.len())
        .map(|i| {
            let x = problem.geom.x[i];
            // diagonal minus the kinetic stencil is V − iW
            let diag = C64::new(v[i], m.get(i, i).im);
            (hu[i] - u[i] * diag) * 2.0 + u[i] * (cl / (x * x))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRecord {
    pub query: SpectralQuery,
    pub psi_id: String,
    pub norm_psi_b: f64,
    pub norm_phi_bstar: f64,
    pub norm_pf_phi_bstar: f64,
    pub h_form: f64,
    pub norm_kinetic_bstar: f64,
    pub bound_ratio: f64,
    pub radiation_residuals: Option<RadiationReport>,
    pub solve_residual: f64,
}

impl SweepRecord {
    pub const CSV_HEADER: &'static str = "lambda,gamma,sign,psi_id,norm_psi_B,norm_phi_Bstar,norm_pf_phi_Bstar,h_form,norm_kinetic_Bstar,bound_ratio,out_residual,in_residual,solve_residual";

    pub fn csv_row(&self) -> String {
        let (out, inc) = match &self.radiation_residuals {
            Some(r) => (format!("{:e}", r.out_residual), format!("{:e}", r.in_residual)),
            None => (String::new(), String::new()),
        };
        format!(
            "{},{:e},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{:e}",
            self.query.lambda,
            self.query.gamma,
            match self.query.sign {
                PhaseSign::Upper => "upper",
                PhaseSign::Lower => "lower",
            },
            self.psi_id,
            self.norm_psi_b,
            self.norm_phi_bstar,
            self.norm_pf_phi_bstar,
            self.h_form,
            self.norm_kinetic_bstar,
            self.bound_ratio,
            out,
            inc,
            self.solve_residual
        )
    }
}

pub fn write_sweep_csv<W: Write>(records: &[SweepRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", SweepRecord::CSV_HEADER)?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// The four left-hand quantities of the Besov bound for one solve.
pub fn bound_record(problem: &Problem, query: SpectralQuery, psi_id: &str, psi: &[C64], phi: &[C64], residual: f64) -> SweepRecord {
    let geom = &problem.geom;
    let decomp = &problem.decomp;
    let psi_b = besov_norms(psi, decomp).besov_b;
    let phi_bs = besov_norms(phi, decomp).besov_bstar;
    let pf = besov_norms(&pf_apply(geom, phi), decomp).besov_bstar;
    let hf = h_form(geom, phi);
    let kin: Vec<C64> = kinetic_apply(problem, phi)
        .into_iter()
        .enumerate()
        .map(|(i, v)| v * geom.r[i].powf(-geom.epsilon))
        .collect();
    let kin_bs = besov_norms(&kin, decomp).besov_bstar;
    SweepRecord {
        query,
        psi_id: psi_id.into(),
        norm_psi_b: psi_b,
        norm_phi_bstar: phi_bs,
        norm_pf_phi_bstar: pf,
        h_form: hf,
        norm_kinetic_bstar: kin_bs,
        bound_ratio: (phi_bs + pf + hf + kin_bs) / psi_b,
        radiation_residuals: None,
        solve_residual: residual,
    }
}

/// One record per `Γ`, solved in parallel.
pub fn besov_bound_sweep(
    problem: &Problem,
    lambda: f64,
    gammas: &[f64],
    sign: PhaseSign,
    interval: (f64, f64),
    psi_id: &str,
    psi: &[C64],
) -> Result<Vec<SweepRecord>> {
    gammas
        .par_iter()
        .map(|&g| {
            let q = SpectralQuery::new(lambda, g, sign, interval)?;
            let solver = problem.shifted(q.z())?;
            let phi = solver.solve(psi)?;
            let res = solver.residual(&phi, psi);
            Ok(bound_record(problem, q, psi_id, psi, &phi, res))
        })
        .collect()
}

/// Verdict of a sweep: the ratios at the two smallest `Γ` lie within a
/// factor 2 of each other.
pub fn uniformly_bounded(records: &[SweepRecord]) -> bool {
    let mut v: Vec<(f64, f64)> = records.iter().map(|r| (r.query.gamma, r.bound_ratio)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    match v.as_slice() {
        [a, b, ..] => {
            let (lo, hi) = (a.1.min(b.1), a.1.max(b.1));
            lo > 0.0 && hi <= 2.0 * lo
        }
        _ => false,
    }
}

/// Geometric schedule `Γ₀·2^{−k}`, `k = 0..count`, truncated at `floor`.
pub fn gamma_schedule(gamma0: f64, count: usize, floor: f64) -> Vec<f64> {
    (0..count)
        .map(|k| gamma0 * 0.5f64.powi(k as i32))
        .take_while(|&g| g >= floor)
        .collect()
}

/// Default right-hand sides, both normalized to `‖ψ‖_B = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefaultPsi {
    /// Gaussian `e^{−|x|²}` centred at the origin.
    Gaussian,
    /// Smooth bump in `r` centred at the radius where `f = 4`.
    Ring,
}

impl DefaultPsi {
    pub fn id(self) -> &'static str {
        match self {
            DefaultPsi::Gaussian => "gaussian",
            DefaultPsi::Ring => "ring",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "gaussian" => Ok(DefaultPsi::Gaussian),
            "ring" => Ok(DefaultPsi::Ring),
            _ => Err(Error::invalid(format!("unknown ψ `{name}` (expected gaussian or ring)"))),
        }
    }
}

pub fn default_psi(kind: DefaultPsi, problem: &Problem) -> Vec<C64> {
    let geom = &problem.geom;
    let r_ring = geometry::flow_inverse(4.0, geom.epsilon);
    let radial = geom.grid.mode == GridMode::Radial;
    let k = (geom.grid.dim as f64 - 1.0) / 2.0;
    let raw: Vec<C64> = (0..geom.len())
        .map(|i| {
            let x = geom.x[i];
            let v = match kind {
                DefaultPsi::Gaussian => (-x * x).exp(),
                DefaultPsi::Ring => {
                    let s = (x.abs() - r_ring) / 1.5;
                    if s.abs() < 1.0 {
                        (1.0 - 1.0 / (1.0 - s * s)).exp()
                    } else {
                        0.0
                    }
                }
            };
            let jac = if radial { x.powf(k) } else { 1.0 };
            C64::new(v * jac, 0.0)
        })
        .collect();
    let b = besov_norms(&raw, &problem.decomp).besov_b;
    raw.into_iter().map(|v| v / b).collect()
}

/// `L²` norm restricted to the inner region `f ≤ f_max/2`, optionally
/// weighted by `f^{−s}`.
pub fn inner_norm(geom: &GeometryField, v: &[C64], s: f64) -> f64 {
    let lim = geom.f_max() / 2.0;
    let h = geom.grid.spacing;
    (0..geom.len())
        .filter(|&i| geom.grid.is_physical(i) && geom.f[i] <= lim)
        .map(|i| v[i].norm_sqr() * geom.f[i].powf(-2.0 * s) * h)
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LapResult {
    pub sign: PhaseSign,
    pub gammas: Vec<f64>,
    #[serde(skip)]
    pub phi_limit: Vec<C64>,
    /// `H_{−1}` inner-region differences of consecutive solves.
    pub differences: Vec<f64>,
    /// Fitted order `ω` with `‖φ_Γ − φ_{Γ/2}‖ ∝ Γ^ω`.
    pub order: f64,
    /// `H_{−1}` inner-region difference of the last two extrapolants.
    pub error_estimate: f64,
}

/// Richardson extrapolation of `φ_Γ` to `Γ = 0` along a geometric
/// schedule with ratio 1/2. The order is read off the last two
/// differences and clamped to `[0.1, 2]`.
pub fn lap_extrapolate(problem: &Problem, lambda: f64, psi: &[C64], gammas: &[f64], sign: PhaseSign) -> Result<LapResult> {
    if gammas.len() < 3 {
        return Err(Error::invalid("extrapolation needs at least three Γ values"));
    }
    for w in gammas.windows(2) {
        if (w[1] / w[0] - 0.5).abs() > 1e-12 {
            return Err(Error::invalid("Γ schedule must be geometric with ratio 1/2"));
        }
    }
    let geom = &problem.geom;
    let phis: Vec<Vec<C64>> = gammas
        .par_iter()
        .map(|&g| problem.shifted(C64::new(lambda, sign.sigma() * g))?.solve(psi))
        .collect::<Result<_>>()?;
    let diff = |a: &[C64], b: &[C64]| {
        let d: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        inner_norm(geom, &d, 1.0)
    };
    let differences: Vec<f64> = phis.windows(2).map(|w| diff(&w[0], &w[1])).collect();
    let k = differences.len();
    if differences[k - 1] >= differences[k - 2] {
        return Err(Error::NonConvergent { differences });
    }
    let order = (differences[k - 2] / differences[k - 1]).log2().clamp(0.1, 2.0);
    let q = 0.5f64.powf(order);
    let extrapolant = |a: &[C64], b: &[C64]| -> Vec<C64> { a.iter().zip(b).map(|(x, y)| (y - x * q) / (1.0 - q)).collect() };
    let n = phis.len();
    let e1 = extrapolant(&phis[n - 3], &phis[n - 2]);
    let e2 = extrapolant(&phis[n - 2], &phis[n - 1]);
    let error_estimate = diff(&e1, &e2);
    Ok(LapResult {
        sign,
        gammas: gammas.to_vec(),
        phi_limit: e2,
        differences,
        order,
        error_estimate,
    })
}

/// Mask of physical nodes.
fn physical_mask(geom: &GeometryField) -> Vec<bool> {
    (0..geom.len()).map(|i| geom.grid.is_physical(i)).collect()
}

/// `M = F^{−s}(R(z) − R(z′))F^{−s}` restricted to the physical region, as
/// an operator on grid vectors with the `h`-weighted inner product.
struct ResolventDifference<'a> {
    geom: &'a GeometryField,
    a: ShiftedSolver,
    b: Option<ShiftedSolver>,
    s: f64,
    mask: Vec<bool>,
    /// Apply `r^{−ε/2} p` after the difference (the gradient variant).
    gradient: bool,
}

impl ResolventDifference<'_> {
    fn weight(&self, v: &[C64]) -> Vec<C64> {
        v.iter()
            .enumerate()
            .map(|(i, x)| if self.mask[i] { x * self.geom.f[i].powf(-self.s) } else { C64::new(0.0, 0.0) })
            .collect()
    }

    fn grad(&self, v: &[C64]) -> Vec<C64> {
        let du = radial_derivative(self.geom, v);
        du.into_iter()
            .enumerate()
            .map(|(i, x)| C64::new(0.0, -self.geom.r[i].powf(-self.geom.epsilon / 2.0)) * x)
            .collect()
    }

    fn grad_adjoint(&self, v: &[C64]) -> Vec<C64> {
        // (r^{−ε/2}·(−i)D)† = i Dᵀ r^{−ε/2} = −i D r^{−ε/2} (D antisymmetric)
        let w: Vec<C64> = v
            .iter()
            .enumerate()
            .map(|(i, x)| x * self.geom.r[i].powf(-self.geom.epsilon / 2.0))
            .collect();
        let d = central_difference(self.geom.len(), self.geom.grid.spacing);
        let mut out: Vec<C64> = d.matvec(&w).into_iter().map(|x| C64::new(0.0, -1.0) * x).collect();
        if self.geom.grid.mode == GridMode::Radial && self.geom.grid.dim > 1 {
            let k = (self.geom.grid.dim as f64 - 1.0) / 2.0;
            for (i, o) in out.iter_mut().enumerate() {
                *o += C64::new(0.0, 1.0) * w[i] * (k / self.geom.x[i]);
            }
        }
        out
    }

    fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        let w = self.weight(v);
        let mut d = self.a.solve(&w)?;
        if let Some(b) = &self.b {
            for (x, y) in d.iter_mut().zip(b.solve(&w)?) {
                *x -= y;
            }
        }
        if self.gradient {
            d = self.grad(&d);
        }
        Ok(self.weight(&d))
    }

    fn apply_adjoint(&self, v: &[C64]) -> Result<Vec<C64>> {
        let mut w = self.weight(v);
        if self.gradient {
            w = self.grad_adjoint(&w);
        }
        let mut d = self.a.solve_adjoint(&w)?;
        if let Some(b) = &self.b {
            for (x, y) in d.iter_mut().zip(b.solve_adjoint(&w)?) {
                *x -= y;
            }
        }
        Ok(self.weight(&d))
    }
}

fn standard_complex(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn masked_random(rng: &mut ChaCha8Rng, mask: &[bool]) -> Vec<C64> {
    let mut v: Vec<C64> = mask
        .iter()
        .map(|&m| if m { standard_complex(rng) } else { C64::new(0.0, 0.0) })
        .collect();
    let n = norm2(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// Lower estimate of the operator norm: best of `k` random unit vectors
/// followed by `iterations` steps of power iteration on `M†M`.
fn probe_norm(op: &ResolventDifference, k: usize, iterations: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = (0.0, Vec::new());
    for _ in 0..k {
        let v = masked_random(&mut rng, &op.mask);
        let m = norm2(&op.apply(&v)?);
        if m > best.0 {
            best = (m, v);
        }
    }
    let (mut est, mut v) = best;
    for _ in 0..iterations {
        let w = op.apply_adjoint(&op.apply(&v)?)?;
        let nw = norm2(&w);
        if nw == 0.0 {
            break;
        }
        v = w.into_iter().map(|x| x / nw).collect();
        est = est.max(norm2(&op.apply(&v)?));
    }
    Ok(est)
}

/// Probed operator norms for one pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderSample {
    pub z: [f64; 2],
    pub z_prime: [f64; 2],
    pub distance: f64,
    pub norm: f64,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderReport {
    pub s: f64,
    pub samples: Vec<HolderSample>,
    pub omega: f64,
    pub omega_gradient: f64,
    /// `min{(2s−1)/(2s+1), β_c/(β_c+1)}`.
    pub floor: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProbeSettings {
    pub vectors: usize,
    pub power_iterations: usize,
    pub seed: u64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            vectors: 32,
            power_iterations: 8,
            seed: 17,
        }
    }
}

/// Probed `‖F^{−s}(R(z) − R(z′))F^{−s}‖` (`z′ = None` gives `‖F^{−s}R(z)F^{−s}‖`).
pub fn probe_resolvent_difference(
    problem: &Problem,
    z: C64,
    z_prime: Option<C64>,
    s: f64,
    gradient: bool,
    settings: &ProbeSettings,
) -> Result<f64> {
    if z_prime == Some(z) {
        return Ok(0.0);
    }
    let op = ResolventDifference {
        geom: &problem.geom,
        a: problem.shifted(z)?,
        b: z_prime.map(|w| problem.shifted(w)).transpose()?,
        s,
        mask: physical_mask(&problem.geom),
        gradient,
    };
    probe_norm(&op, settings.vectors, settings.power_iterations, settings.seed)
}

/// Dense oracle of the same norm (largest singular value), for small grids.
pub fn dense_resolvent_difference(problem: &Problem, z: C64, z_prime: Option<C64>, s: f64) -> Result<f64> {
    let n = problem.len();
    if n > 400 {
        return Err(Error::invalid("dense oracle limited to 400 points"));
    }
    let h = problem.hamiltonian.matrix.to_dense();
    let eye = DMatrix::<C64>::identity(n, n);
    let inv = |w: C64| {
        (&h - &eye * w)
            .try_inverse()
            .ok_or(Error::SingularShift { row: 0, pivot: 0.0 })
    };
    let mut m = inv(z)?;
    if let Some(w) = z_prime {
        m -= inv(w)?;
    }
    let mask = physical_mask(&problem.geom);
    let wts: Vec<f64> = (0..n)
        .map(|i| if mask[i] { problem.geom.f[i].powf(-s) } else { 0.0 })
        .collect();
    let weighted = DMatrix::from_fn(n, n, |i, j| m[(i, j)] * wts[i] * wts[j]);
    Ok(weighted.singular_values().iter().cloned().fold(0.0, f64::max))
}

/// Fits `ω` in `‖R(z) − R(z′)‖ ≤ C|z − z′|^ω` from probed norms.
pub fn holder_exponent(problem: &Problem, pairs: &[(C64, C64)], s: f64, settings: &ProbeSettings) -> Result<HolderReport> {
    if !(s > 0.5) {
        return Err(Error::invalid("Hölder fit needs s > 1/2"));
    }
    let samples: Vec<HolderSample> = pairs
        .par_iter()
        .map(|&(z, w)| {
            Ok(HolderSample {
                z: [z.re, z.im],
                z_prime: [w.re, w.im],
                distance: (z - w).norm(),
                norm: probe_resolvent_difference(problem, z, Some(w), s, false, settings)?,
                gradient_norm: probe_resolvent_difference(problem, z, Some(w), s, true, settings)?,
            })
        })
        .collect::<Result<_>>()?;
    let d: Vec<f64> = samples.iter().map(|x| x.distance).collect();
    let n1: Vec<f64> = samples.iter().map(|x| x.norm).collect();
    let n2: Vec<f64> = samples.iter().map(|x| x.gradient_norm).collect();
    let bc = problem.spec.beta_c();
    Ok(HolderReport {
        s,
        omega: log_log_slope(&d, &n1),
        omega_gradient: log_log_slope(&d, &n2),
        floor: ((2.0 * s - 1.0) / (2.0 * s + 1.0)).min(bc / (bc + 1.0)),
        samples,
    })
}

/// `φ = Σ ⟨v_k, ψ⟩ v_k / (λ_k − z)` from a dense eigendecomposition of a
/// Hermitian operator.
pub fn dense_resolvent_oracle(h: &DiscreteOperator, z: C64, psi: &[C64]) -> Result<Vec<C64>> {
    if h.len() > 400 {
        return Err(Error::invalid("dense oracle limited to 400 points"));
    }
    if h.matrix.hermiticity_defect() > 0.0 {
        return Err(Error::invalid("dense eigen oracle needs a Hermitian operator"));
    }
    let eig = h.matrix.to_dense().symmetric_eigen();
    let n = h.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for k in 0..n {
        let v = eig.eigenvectors.column(k);
        let c: C64 = (0..n).map(|i| v[i].conj() * psi[i]).sum::<C64>() / (C64::new(eig.eigenvalues[k], 0.0) - z);
        for i in 0..n {
            out[i] += v[i] * c;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_problem(spec: PotentialSpec, h: f64, r: f64) -> Problem {
        Problem::new(spec, &Grid::line(h, r).unwrap(), &HamiltonianOptions::default()).unwrap()
    }

    fn random_vec(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    #[test]
    fn solve_inverts_on_range_and_obeys_resolvent_bound() {
        let p = small_problem(PotentialSpec::reference(), 1.0 / 16.0, 40.0);
        let xi = random_vec(p.len(), 1);
        let z = C64::new(1.2, 0.05);
        let psi = p.hamiltonian.matrix.shifted(z).matvec(&xi);
        let phi = solve(&p.hamiltonian, z, &psi).unwrap();
        let err = norm2(&phi.iter().zip(&xi).map(|(a, b)| a - b).collect::<Vec<_>>()) / norm2(&xi);
        assert!(err < 1e-10, "{err}");
        let psi = random_vec(p.len(), 2);
        let phi = solve(&p.hamiltonian, z, &psi).unwrap();
        assert!(norm2(&phi) <= norm2(&psi) / z.im * (1.0 + 1e-12));
    }

    #[test]
    fn conjugation_symmetry_and_first_resolvent_identity() {
        let p = small_problem(PotentialSpec::reference(), 1.0 / 16.0, 40.0);
        let psi = random_vec(p.len(), 3);
        let z = C64::new(0.9, 0.1);
        let w = C64::new(1.4, 0.02);
        let a = solve(&p.hamiltonian, z, &psi).unwrap();
        let psi_c: Vec<C64> = psi.iter().map(|v| v.conj()).collect();
        let b = solve(&p.hamiltonian, z.conj(), &psi_c).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.conj() - y).norm() < 1e-9 * norm2(&a));
        }
        let rw = solve(&p.hamiltonian, w, &psi).unwrap();
        let lhs: Vec<C64> = a.iter().zip(&rw).map(|(x, y)| x - y).collect();
        let rhs: Vec<C64> = solve(&p.hamiltonian, z, &rw).unwrap().into_iter().map(|v| v * (z - w)).collect();
        let d = norm2(&lhs.iter().zip(&rhs).map(|(x, y)| x - y).collect::<Vec<_>>());
        assert!(d < 1e-9 * norm2(&lhs), "{d}");
    }

    #[test]
    fn sparse_solve_matches_dense_oracle() {
        let p = small_problem(PotentialSpec::reference(), 0.1, 19.0);
        assert!(p.len() <= 400);
        let psi = random_vec(p.len(), 4);
        let z = C64::new(1.1, 0.03);
        let a = solve(&p.hamiltonian, z, &psi).unwrap();
        let b = dense_resolvent_oracle(&p.hamiltonian, z, &psi).unwrap();
        let d = norm2(&a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>()) / norm2(&b);
        assert!(d < 1e-9, "{d}");
    }

    #[test]
    fn kinetic_identity_and_linearity_of_ratio() {
        let p = small_problem(PotentialSpec::reference(), 1.0 / 16.0, 60.0);
        let psi = default_psi(DefaultPsi::Ring, &p);
        let z = C64::new(1.0, 0.5);
        let phi = solve(&p.hamiltonian, z, &psi).unwrap();
        // p²φ = 2[ψ + (|x|^ε − q + z)φ]
        let kin = kinetic_apply(&p, &phi);
        let v = model::potential_values(&p.spec, &p.geom);
        let mut worst: f64 = 0.0;
        for i in 0..p.len() {
            let want = (psi[i] + phi[i] * (z - v[i])) * 2.0;
            worst = worst.max((kin[i] - want).norm());
        }
        assert!(worst < 1e-8, "{worst}");
        let q = SpectralQuery::new(1.0, 0.5, PhaseSign::Upper, (0.5, 2.0)).unwrap();
        let r1 = bound_record(&p, q, "ring", &psi, &phi, 0.0);
        let psi3: Vec<C64> = psi.iter().map(|x| x * 3.0).collect();
        let phi3: Vec<C64> = phi.iter().map(|x| x * 3.0).collect();
        let r3 = bound_record(&p, q, "ring", &psi3, &phi3, 0.0);
        assert!((r1.bound_ratio - r3.bound_ratio).abs() < 1e-12 * r1.bound_ratio);
        assert!((besov_norms(&psi, &p.decomp).besov_b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn probing_never_exceeds_dense_norm() {
        let spec = PotentialSpec::free(1.0);
        let p = Problem::new(spec, &Grid::line(0.1, 15.0).unwrap().with_absorbing_layer(4.0).unwrap(), &HamiltonianOptions::default()).unwrap();
        assert!(p.len() <= 400);
        let z = C64::new(1.0, 0.05);
        for w in [C64::new(1.0, 0.06), C64::new(1.2, 0.05)] {
            let probe = probe_resolvent_difference(&p, z, Some(w), 1.0, false, &ProbeSettings::default()).unwrap();
            let dense = dense_resolvent_difference(&p, z, Some(w), 1.0).unwrap();
            assert!(probe <= dense * (1.0 + 1e-9), "{probe} > {dense}");
            assert!(probe >= 0.5 * dense, "{probe} ≪ {dense}");
        }
        assert_eq!(probe_resolvent_difference(&p, z, Some(z), 1.0, false, &ProbeSettings::default()).unwrap(), 0.0);
    }

    #[test]
    fn schedule_is_geometric_with_floor() {
        let g = gamma_schedule(0.1, 30, 1e-5);
        assert_eq!(g[0], 0.1);
        assert!(g.iter().all(|&x| x >= 1e-5));
        assert_eq!(g.len(), 14);
    }
}
