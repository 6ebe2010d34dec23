//! Radiation-condition residuals, the radiation-boundary solve at `Γ = 0`,
//! the Sommerfeld verdict and the generalized-eigenfunction probes.

use serde::{Deserialize, Serialize};

use crate::band::{BandMatrix, C64};
use crate::error::{Error, Result};
use crate::geometry::{self, GeometryField};
use crate::grid::{Boundary, GridMode};
use crate::model::{self, PotentialSpec};
use crate::operators::{build_conjugate_a, build_phases_signed, PhaseField, PhaseSign};
use crate::resolvent::{inner_norm, weighted_h_form, Problem, ShiftedSolver};
use crate::spaces::{besov_norms, DyadicDecomposition, TailTest};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiationReport {
    pub beta: f64,
    /// `‖f^β(A − a)φ‖_{B*}`.
    pub out_residual: f64,
    /// `‖f^β(A + a)φ‖_{B*}`.
    pub in_residual: f64,
    /// `⟨p f^{2β} h p⟩_φ^{1/2}`.
    pub weighted_h_form: f64,
    /// `‖f^β ψ‖_B`.
    pub rhs_norm: f64,
    pub tail_of_out_residual: Vec<f64>,
}

impl RadiationReport {
    pub fn out_ratio(&self) -> f64 {
        self.out_residual / self.rhs_norm
    }

    pub fn in_ratio(&self) -> f64 {
        self.in_residual / self.rhs_norm
    }
}

/// `a` with its propagating part evaluated on the discrete dispersion
/// relation of the three-point Laplacian: `√(2w)` becomes
/// `√(2w)·√(1 − h²w/2)`, the symbol of the central-difference `A` on a
/// discrete plane wave. The correction is `O(h²w)` and vanishes as `h → 0`.
pub fn discrete_phase(phases: &PhaseField, spec: &PotentialSpec, geom: &GeometryField) -> Vec<C64> {
    let h = geom.grid.spacing;
    (0..geom.len())
        .map(|i| {
            let a = phases.a[i];
            let w = phases.z - spec.q1.eval_f64(geom.r[i], geom.f[i]) + geom.r[i].powf(geom.epsilon);
            let im_part = C64::new(0.0, phases.sign.sigma() * imaginary_term(geom, i));
            let prop = a - im_part;
            prop * (C64::new(1.0, 0.0) - w * (h * h / 2.0)).sqrt() + im_part
        })
        .collect()
}

/// `(ε/2) r_x² r^{−ε/2−1}`, the sign-independent part of `Im a`.
fn imaginary_term(geom: &GeometryField, i: usize) -> f64 {
    let e = geom.epsilon;
    e / 2.0 * geom.grad_r[i].powi(2) * geom.r[i].powf(-e / 2.0 - 1.0)
}

fn f_weighted(geom: &GeometryField, v: &[C64], beta: f64) -> Vec<C64> {
    v.iter().zip(&geom.f).map(|(x, f)| x * f.powf(beta)).collect()
}

/// Both sign residuals of a solution `φ` of `(H − z)φ = ψ`.
pub fn radiation_residuals(problem: &Problem, phi: &[C64], psi: &[C64], phases: &PhaseField, beta: f64) -> Result<RadiationReport> {
    let bc = problem.spec.beta_c();
    if !(0.0..2.0 * bc).contains(&beta) {
        return Err(Error::invalid(format!("β = {beta} outside [0, 2β_c)")));
    }
    let geom = &problem.geom;
    let d = &problem.decomp;
    let a = discrete_phase(phases, &problem.spec, geom);
    let aphi = build_conjugate_a(geom).apply(phi);
    let out: Vec<C64> = (0..phi.len()).map(|i| aphi[i] - a[i] * phi[i]).collect();
    let inc: Vec<C64> = (0..phi.len()).map(|i| aphi[i] + a[i] * phi[i]).collect();
    let out_report = besov_norms(&f_weighted(geom, &out, beta), d);
    Ok(RadiationReport {
        beta,
        out_residual: out_report.besov_bstar,
        in_residual: besov_norms(&f_weighted(geom, &inc, beta), d).besov_bstar,
        weighted_h_form: weighted_h_form(geom, phi, beta),
        rhs_norm: besov_norms(&f_weighted(geom, psi, beta), d).besov_b,
        tail_of_out_residual: out_report.tail_values(),
    })
}

/// `{0, β_c/4, β_c/2, 3β_c/4}` inside the admissible range plus `1.5β_c`
/// outside it.
pub fn beta_grid(spec: &PotentialSpec) -> Vec<f64> {
    let bc = spec.beta_c();
    vec![0.0, bc / 4.0, bc / 2.0, 0.75 * bc, 1.5 * bc]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiationSweepRow {
    pub gamma: f64,
    pub reports: Vec<RadiationReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaVerdict {
    pub beta: f64,
    /// Out ratios at the two smallest `Γ` lie within a factor 2.
    pub out_bounded: bool,
    /// `in_residual(Γ_min) / in_residual(Γ_max)`.
    pub in_growth: f64,
}

/// Solves along `Γ` (upper sign) and records residuals for every `β`.
pub fn radiation_sweep(problem: &Problem, lambda: f64, gammas: &[f64], psi: &[C64], betas: &[f64]) -> Result<Vec<RadiationSweepRow>> {
    use rayon::prelude::*;
    let r_lambda = model::select_r_lambda(&problem.spec, lambda, &problem.geom)?;
    gammas
        .par_iter()
        .map(|&g| {
            let z = C64::new(lambda, g);
            let phi = problem.shifted(z)?.solve(psi)?;
            let phases = build_phases_signed(z, PhaseSign::Upper, &problem.spec, &problem.geom, r_lambda)?;
            let reports = betas
                .iter()
                .map(|&b| radiation_residuals(problem, &phi, psi, &phases, b))
                .collect::<Result<_>>()?;
            Ok(RadiationSweepRow { gamma: g, reports })
        })
        .collect()
}

pub fn beta_verdicts(rows: &[RadiationSweepRow]) -> Vec<BetaVerdict> {
    let mut rows: Vec<&RadiationSweepRow> = rows.iter().collect();
    rows.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    (0..first.reports.len())
        .map(|k| {
            let out: Vec<f64> = rows.iter().map(|r| r.reports[k].out_ratio()).collect();
            let inc: Vec<f64> = rows.iter().map(|r| r.reports[k].in_residual).collect();
            let out_bounded = out.len() >= 2 && {
                let (lo, hi) = (out[0].min(out[1]), out[0].max(out[1]));
                lo > 0.0 && hi <= 2.0 * lo
            };
            BetaVerdict {
                beta: first.reports[k].beta,
                out_bounded,
                in_growth: inc[0] / inc[inc.len() - 1],
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryRow {
    /// Exact outgoing condition of the discrete Laplacian with the potential
    /// frozen at the end node: `u_{N} = ξ u_{N−1}`.
    Transparent,
    /// `−i f′ (one-sided difference) − (i/2)Δf φ = aφ` at the end node.
    OneSided,
}

/// Outgoing root of `ξ + 1/ξ = 2c`: `|ξ| ≤ 1`, and `Im ξ > 0` when
/// propagating.
fn outgoing_root(c: f64) -> C64 {
    if c.abs() < 1.0 {
        C64::new(c, (1.0 - c * c).sqrt())
    } else {
        let s = (c * c - 1.0).sqrt();
        C64::new(if c > 0.0 { c - s } else { c + s }, 0.0)
    }
}

/// `H − λ` with outgoing boundary rows.
pub fn radiation_matrix(problem: &Problem, lambda: f64, phases: &PhaseField, row: BoundaryRow) -> Result<BandMatrix> {
    let geom = &problem.geom;
    let grid = &geom.grid;
    if grid.boundary != Boundary::Radiation {
        return Err(Error::invalid("radiation solve needs boundary = radiation"));
    }
    let n = geom.len();
    let h = grid.spacing;
    let mut m = problem.hamiltonian.matrix.shifted(C64::new(lambda, 0.0));
    let v = model::potential_values(&problem.spec, geom);
    let ends: Vec<(usize, usize)> = match grid.mode {
        GridMode::Line1d => vec![(0, 1), (n - 1, n - 2)],
        GridMode::Radial => vec![(n - 1, n - 2)],
    };
    let a = discrete_phase(phases, &problem.spec, geom);
    for (e, nb) in ends {
        match row {
            BoundaryRow::Transparent => {
                let xi = outgoing_root(1.0 + h * h * (v[e] - lambda));
                m.add_at(e, e, -xi / (2.0 * h * h));
            }
            BoundaryRow::OneSided => {
                let fp = geom.grad_f[e];
                // (u_e − u_nb)/(x_e − x_nb) one-sided toward the interior
                let dx = geom.x[e] - geom.x[nb];
                let i = C64::new(0.0, 1.0);
                let diag = -i * fp / dx - i * 0.5 * geom.lap_f[e] - a[e];
                let off = i * fp / dx;
                m.set(e, e, diag);
                m.set(e, nb, off);
            }
        }
    }
    Ok(m)
}

/// `φ = R(λ + i0)ψ` through outgoing boundary rows.
pub fn sommerfeld_solve(problem: &Problem, lambda: f64, psi: &[C64], phases: &PhaseField, row: BoundaryRow) -> Result<Vec<C64>> {
    let m = radiation_matrix(problem, lambda, phases, row)?;
    let solver = match ShiftedSolver::from_matrix(m, C64::new(lambda, 0.0)) {
        Ok(s) => s,
        Err(Error::SingularShift { pivot, .. }) => {
            return Err(Error::IllConditioned {
                estimate: 1.0 / pivot.max(f64::MIN_POSITIVE),
            })
        }
        Err(e) => return Err(e),
    };
    let rhs = match row {
        BoundaryRow::Transparent => psi.to_vec(),
        BoundaryRow::OneSided => {
            let mut r = psi.to_vec();
            let n = r.len();
            r[n - 1] = C64::new(0.0, 0.0);
            if problem.geom.grid.mode == GridMode::Line1d {
                r[0] = C64::new(0.0, 0.0);
            }
            r
        }
    };
    let pivot = solver.min_pivot_ratio();
    if pivot < 1e-13 {
        return Err(Error::IllConditioned { estimate: 1.0 / pivot });
    }
    solver.solve(&rhs).map_err(|e| match e {
        Error::SingularShift { pivot, .. } => Error::IllConditioned {
            estimate: 1.0 / pivot.max(f64::MIN_POSITIVE),
        },
        e => e,
    })
}

/// Index offset mapping nodes of `from` onto nodes of `to` at the same
/// coordinate (grids differ only by an absorbing layer).
pub fn node_offset(from: &GeometryField, to: &GeometryField) -> Result<isize> {
    let (a, b) = (&from.grid, &to.grid);
    if (a.spacing - b.spacing).abs() > 1e-15 || a.mode != b.mode || (a.r_max - b.r_max).abs() > 1e-12 {
        return Err(Error::invalid("grids must share spacing, mode and R_max"));
    }
    Ok(match a.mode {
        GridMode::Line1d => ((b.absorb_width - a.absorb_width) / a.spacing).round() as isize,
        GridMode::Radial => 0,
    })
}

/// Relative `L²` difference on the inner region `f ≤ f_max/2` of `ga`.
pub fn inner_relative_difference(ga: &GeometryField, ua: &[C64], gb: &GeometryField, ub: &[C64]) -> Result<f64> {
    let off = node_offset(ga, gb)?;
    let diff: Vec<C64> = (0..ga.len())
        .map(|i| {
            let j = i as isize + off;
            if j < 0 || j as usize >= gb.len() {
                ua[i]
            } else {
                ua[i] - ub[j as usize]
            }
        })
        .collect();
    Ok(inner_norm(ga, &diff, 0.0) / inner_norm(ga, ua, 0.0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SommerfeldVerdict {
    pub beta: f64,
    /// `‖(H − λ)φ − ψ‖_{H_{−1}} / ‖ψ‖_{H_{−1}}` on the inner region.
    pub equation_residual: f64,
    pub condition_i: bool,
    /// `‖f^{−β}φ‖_{B*}`.
    pub weighted_bstar: f64,
    /// Tail of `f^β(A − a)φ` on the interior region `f ≤ 0.8 f_max`.
    pub out_tail: Vec<f64>,
    pub condition_ii: bool,
    pub passed: bool,
}

pub const EQUATION_TOLERANCE: f64 = 1e-6;

/// Both conditions characterizing `R(λ + i0)ψ` among candidate solutions.
pub fn sommerfeld_verify(problem: &Problem, phi: &[C64], lambda: f64, psi: &[C64], phases: &PhaseField, beta: f64) -> SommerfeldVerdict {
    let geom = &problem.geom;
    let hphi = problem.hamiltonian.matrix.matvec(phi);
    let r: Vec<C64> = (0..phi.len()).map(|i| hphi[i] - phi[i] * lambda - psi[i]).collect();
    // the end rows carry the boundary condition, not the equation
    let mut r_inner = r.clone();
    let n = r_inner.len();
    r_inner[n - 1] = C64::new(0.0, 0.0);
    r_inner[0] = C64::new(0.0, 0.0);
    let equation_residual = inner_norm(geom, &r_inner, 1.0) / inner_norm(geom, psi, 1.0).max(f64::MIN_POSITIVE);
    let a = discrete_phase(phases, &problem.spec, geom);
    let aphi = build_conjugate_a(geom).apply(phi);
    // the boundary rows and their consistency layer sit outside the interior region
    let lim = 0.8 * geom.f_max();
    let out: Vec<C64> = (0..n)
        .map(|i| {
            if geom.f[i] <= lim {
                (aphi[i] - a[i] * phi[i]) * geom.f[i].powf(beta)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    let out_report = besov_norms(&out, &problem.decomp);
    let weighted_bstar = besov_norms(&f_weighted(geom, phi, -beta), &problem.decomp).besov_bstar;
    let condition_i = equation_residual <= EQUATION_TOLERANCE;
    let condition_ii = weighted_bstar.is_finite() && out_report.is_bstar0;
    SommerfeldVerdict {
        beta,
        equation_residual,
        condition_i,
        weighted_bstar,
        out_tail: out_report.tail_values(),
        condition_ii,
        passed: condition_i && condition_ii,
    }
}

/// Potential of the one-dimensional radial equation at coordinate `x`.
fn potential_at(spec: &PotentialSpec, geom: &GeometryField, x: f64) -> f64 {
    let (r, f) = geometry::geometry_jets(x, spec.epsilon, &geom.cutoff);
    let mut v = -x.abs().powf(spec.epsilon) + spec.q1.eval_f64(r.v, f.v) + spec.q2.eval_f64(r.v, f.v);
    if geom.grid.mode == GridMode::Radial {
        v += spec.centrifugal() / (2.0 * x * x);
    }
    v
}

/// RK4 integrator for `u″ = 2(V − λ)u` with step `min(h₀, 0.05/k)`, `k`
/// the local wavenumber.
struct RadialOde<'a> {
    spec: &'a PotentialSpec,
    geom: &'a GeometryField,
    lambda: f64,
}

impl RadialOde<'_> {
    fn rhs(&self, x: f64, y: [C64; 2]) -> [C64; 2] {
        [y[1], y[0] * (2.0 * (potential_at(self.spec, self.geom, x) - self.lambda))]
    }

    fn advance(&self, mut x: f64, to: f64, mut y: [C64; 2]) -> [C64; 2] {
        let h0 = self.geom.grid.spacing;
        let k = (2.0 * (potential_at(self.spec, self.geom, x) - self.lambda).abs()).sqrt();
        let k = k.max((2.0 * (potential_at(self.spec, self.geom, to) - self.lambda).abs()).sqrt());
        let step = h0.min(0.05 / k.max(1e-12));
        let steps = ((to - x).abs() / step).ceil().max(1.0) as usize;
        let dt = (to - x) / steps as f64;
        let add = |a: [C64; 2], b: [C64; 2], s: f64| [a[0] + b[0] * s, a[1] + b[1] * s];
        for _ in 0..steps {
            let k1 = self.rhs(x, y);
            let k2 = self.rhs(x + dt / 2.0, add(y, k1, dt / 2.0));
            let k3 = self.rhs(x + dt / 2.0, add(y, k2, dt / 2.0));
            let k4 = self.rhs(x + dt, add(y, k3, dt));
            y = [
                y[0] + (k1[0] + k2[0] * 2.0 + k3[0] * 2.0 + k4[0]) * (dt / 6.0),
                y[1] + (k1[1] + k2[1] * 2.0 + k3[1] * 2.0 + k4[1]) * (dt / 6.0),
            ];
            x += dt;
        }
        y
    }

    /// Values at `nodes` (monotone in the direction of travel) from data at `x0`.
    fn sweep(&self, x0: f64, y0: [C64; 2], nodes: impl Iterator<Item = f64>) -> Vec<C64> {
        let (mut x, mut y) = (x0, y0);
        nodes
            .map(|t| {
                y = self.advance(x, t, y);
                x = t;
                y[0]
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenfunctionProbe {
    pub lambda: f64,
    #[serde(skip)]
    pub phi: Vec<C64>,
    pub matching_radius: f64,
    pub bstar_norm: f64,
    pub tail: Vec<f64>,
    /// Relative `‖(H − λ)φ‖` on the resolved inner region; `None` where the
    /// grid does not resolve the local wavelength.
    pub eq_residual: Option<f64>,
    pub bounded_tail: bool,
    pub non_vanishing: bool,
}

/// Non-vanishing test: the last three tail values all exceed half their
/// mean, and the tail is not `B*₀` under the shared trend test.
pub fn tail_non_vanishing(tail: &[f64]) -> bool {
    if tail.len() < 3 {
        return false;
    }
    let last = &tail[tail.len() - 3..];
    let mean = last.iter().sum::<f64>() / 3.0;
    mean > 0.0 && last.iter().all(|&t| t >= 0.5 * mean) && !TailTest::default().vanishing(tail)
}

/// Bounded tail: the sup sits within a factor 4 of the last value.
fn tail_bounded(tail: &[f64]) -> bool {
    let sup = tail.iter().copied().fold(0.0, f64::max);
    tail.last().is_some_and(|&l| sup.is_finite() && sup <= 4.0 * l)
}

/// Outgoing generalized eigenfunction: WKB data at the matching radius,
/// integrated outward to `R_max` and inward over the rest of the grid.
pub fn generalized_eigenfunction(lambda: f64, spec: &PotentialSpec, geom: &GeometryField) -> Result<EigenfunctionProbe> {
    let r_lambda = model::select_r_lambda(spec, lambda, geom)?;
    let rm = (2.0f64).max(2.0 * r_lambda);
    let w = |r: f64| lambda - spec.q1.eval_f64(r, geometry::flow(r, spec.epsilon)) + r.powf(spec.epsilon);
    let n = geom.len();
    let x_end = geom.x[n - 1];
    if rm >= x_end {
        return Err(Error::invalid("matching radius beyond the grid"));
    }
    // forbidden-region check along the outward integration
    let mut t = rm;
    while t <= x_end {
        let v = w(t);
        if v <= 0.0 {
            return Err(Error::StiffRegion { r: t, value: v });
        }
        t += geom.grid.spacing;
    }
    let phase = simpson(|s| (2.0 * w(s).max(0.0)).sqrt(), 0.0, rm, 4096);
    let w0 = w(rm);
    let dw = (w(rm + 1e-5) - w(rm - 1e-5)) / 2e-5;
    let amp = (2.0 * w0).powf(-0.25);
    let u0 = C64::from_polar(amp, phase);
    let du0 = u0 * C64::new(-0.25 * dw / w0, (2.0 * w0).sqrt());
    let ode = RadialOde { spec, geom, lambda };
    let first_out = (0..n).find(|&i| geom.x[i] >= rm).unwrap();
    let mut phi = vec![C64::new(0.0, 0.0); n];
    let outward = ode.sweep(rm, [u0, du0], (first_out..n).map(|i| geom.x[i]));
    phi[first_out..].copy_from_slice(&outward);
    let inward = ode.sweep(rm, [u0, du0], (0..first_out).rev().map(|i| geom.x[i]));
    for (k, v) in inward.into_iter().enumerate() {
        phi[first_out - 1 - k] = v;
    }
    let decomp = DyadicDecomposition::f_based(geom);
    let report = besov_norms(&phi, &decomp);
    let tail = report.tail_values();
    Ok(EigenfunctionProbe {
        lambda,
        matching_radius: rm,
        bstar_norm: report.besov_bstar,
        eq_residual: resolved_residual(spec, geom, &phi, lambda),
        bounded_tail: tail_bounded(&tail),
        non_vanishing: tail_non_vanishing(&tail),
        tail,
        phi,
    })
}

/// Three-point residual of `(H − λ)φ` relative to `‖(V − λ)φ‖`, over inner
/// nodes with `kh ≤ 1/4`.
fn resolved_residual(spec: &PotentialSpec, geom: &GeometryField, phi: &[C64], lambda: f64) -> Option<f64> {
    let h = geom.grid.spacing;
    let v = model::potential_values(spec, geom);
    let lim = geom.f_max() / 2.0;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 1..geom.len() - 1 {
        let k = (2.0 * (v[i] - lambda).abs()).sqrt();
        if geom.f[i] > lim || k * h > 0.25 || !geom.grid.is_physical(i) {
            continue;
        }
        let lap = (phi[i + 1] - phi[i] * 2.0 + phi[i - 1]) / (h * h);
        num += (-lap * 0.5 + phi[i] * (v[i] - lambda)).norm_sqr();
        den += (phi[i] * (v[i] - lambda)).norm_sqr();
    }
    (den > 0.0).then(|| (num / den).sqrt())
}

fn simpson(g: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = g(a) + g(b);
    for k in 1..n {
        s += g(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Relative `|(A − a)φ| / |aφ|` averaged over each `f`-ring (WKB alignment).
pub fn wkb_alignment(probe: &EigenfunctionProbe, spec: &PotentialSpec, geom: &GeometryField) -> Result<Vec<f64>> {
    let r_lambda = model::select_r_lambda(spec, probe.lambda, geom)?;
    let phases = build_phases_signed(C64::new(probe.lambda, 0.0), PhaseSign::Upper, spec, geom, r_lambda)?;
    let a = discrete_phase(&phases, spec, geom);
    let aphi = build_conjugate_a(geom).apply(&probe.phi);
    let decomp = DyadicDecomposition::f_based(geom);
    Ok(decomp
        .rings
        .iter()
        .take(decomp.nu_max + 1)
        .map(|ring| {
            let nodes: Vec<usize> = ring.iter().copied().filter(|&i| geom.x[i] >= probe.matching_radius).collect();
            let num: f64 = nodes.iter().map(|&i| (aphi[i] - a[i] * probe.phi[i]).norm_sqr()).sum();
            let den: f64 = nodes.iter().map(|&i| (a[i] * probe.phi[i]).norm_sqr()).sum();
            if den > 0.0 {
                (num / den).sqrt()
            } else {
                f64::NAN
            }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RellichReport {
    pub lambda: f64,
    pub angles: Vec<f64>,
    /// Tail per angle.
    pub tails: Vec<Vec<f64>>,
    /// Per angle: min of the last three tail values over their mean.
    pub tail_floor: Vec<f64>,
    pub bstar0_found: bool,
    pub verdict: String,
}

/// Two fundamental solutions of `(H − λ)φ = 0` sampled on the grid. Line
/// mode: even and odd solutions from the origin. Radial mode: the regular
/// solution `u ∼ r^{(d−1)/2}` and the one with `u = 1, u′ = 0` at the first
/// node.
pub fn fundamental_solutions(lambda: f64, spec: &PotentialSpec, geom: &GeometryField) -> [Vec<C64>; 2] {
    let ode = RadialOde { spec, geom, lambda };
    let n = geom.len();
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    match geom.grid.mode {
        GridMode::Line1d => {
            let pos: Vec<usize> = (0..n).filter(|&i| geom.x[i] >= 0.0).collect();
            let even = ode.sweep(0.0, [one, zero], pos.iter().map(|&i| geom.x[i]));
            let odd = ode.sweep(0.0, [zero, one], pos.iter().map(|&i| geom.x[i]));
            let mut e = vec![zero; n];
            let mut o = vec![zero; n];
            for (k, &i) in pos.iter().enumerate() {
                e[i] = even[k];
                o[i] = odd[k];
                // mirror node of a symmetric grid
                let j = n - 1 - i;
                if j != i {
                    e[j] = even[k];
                    o[j] = -odd[k];
                }
            }
            [e, o]
        }
        GridMode::Radial => {
            let x0 = geom.x[0];
            let p = (spec.dim as f64 - 1.0) / 2.0;
            let reg = [C64::new(x0.powf(p), 0.0), C64::new(p * x0.powf(p - 1.0), 0.0)];
            let mut a = vec![reg[0]];
            a.extend(ode.sweep(x0, reg, (1..n).map(|i| geom.x[i])));
            let mut b = vec![one];
            b.extend(ode.sweep(x0, [one, zero], (1..n).map(|i| geom.x[i])));
            [a, b]
        }
    }
}

/// Sweeps `cos θ φ₁ + sin θ φ₂` over `angles` equispaced angles in `[0, π)`
/// and reports whether any combination has a vanishing tail.
pub fn rellich_probe(lambda: f64, spec: &PotentialSpec, geom: &GeometryField, angles: usize) -> RellichReport {
    let [s1, s2] = fundamental_solutions(lambda, spec, geom);
    let decomp = DyadicDecomposition::f_based(geom);
    let thetas: Vec<f64> = (0..angles).map(|k| std::f64::consts::PI * k as f64 / angles as f64).collect();
    let mut tails = Vec::with_capacity(angles);
    let mut floors = Vec::with_capacity(angles);
    let mut found = false;
    for &t in &thetas {
        let (c, s) = (t.cos(), t.sin());
        let phi: Vec<C64> = s1.iter().zip(&s2).map(|(a, b)| a * c + b * s).collect();
        let tail = besov_norms(&phi, &decomp).tail_values();
        let last = &tail[tail.len().saturating_sub(3)..];
        let mean = last.iter().sum::<f64>() / last.len().max(1) as f64;
        floors.push(last.iter().copied().fold(f64::INFINITY, f64::min) / mean);
        found |= !tail_non_vanishing(&tail);
        tails.push(tail);
    }
    RellichReport {
        lambda,
        angles: thetas,
        tails,
        tail_floor: floors,
        bstar0_found: found,
        verdict: if found {
            "candidate B*0 solution found".into()
        } else {
            "no B*0 null vector found".into()
        },
    }
}

/// `B_f*` versus `B_r*` behaviour at `ε = 2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantTrend {
    pub eigen_f_bstar: f64,
    pub eigen_r_bstar: f64,
    /// Growth (`last/first`) of the witness tails.
    pub witness_f_growth: f64,
    pub witness_r_growth: f64,
    /// Witness stays bounded in `B_f*` while its `B_r*` tail grows.
    pub distinction: bool,
}

pub fn variant_trend(geom: &GeometryField, eigen: &[C64]) -> VariantTrend {
    use crate::spaces::{bstar_distinction_witness, tail_growth};
    let fdec = DyadicDecomposition::f_based(geom);
    let rdec = DyadicDecomposition::r_based(geom);
    let witness = bstar_distinction_witness(geom);
    let wf = besov_norms(&witness, &fdec).tail_values();
    let wr = besov_norms(&witness, &rdec).tail_values();
    let witness_f_growth = tail_growth(&wf);
    let witness_r_growth = tail_growth(&wr);
    VariantTrend {
        eigen_f_bstar: besov_norms(eigen, &fdec).besov_bstar,
        eigen_r_bstar: besov_norms(eigen, &rdec).besov_bstar,
        distinction: witness_f_growth <= 1.25 && witness_r_growth >= 1.5 * witness_f_growth,
        witness_f_growth,
        witness_r_growth,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::model::HamiltonianOptions;
    use crate::resolvent::{default_psi, DefaultPsi};

    #[test]
    fn zero_solution_has_zero_residuals() {
        let grid = Grid::line(1.0 / 16.0, 60.0).unwrap().with_absorbing_layer(8.0).unwrap();
        let p = Problem::new(PotentialSpec::free(1.0), &grid, &HamiltonianOptions::default()).unwrap();
        let z = C64::new(1.0, 0.5);
        let r_l = model::select_r_lambda(&p.spec, 1.0, &p.geom).unwrap();
        let ph = build_phases_signed(z, PhaseSign::Upper, &p.spec, &p.geom, r_l).unwrap();
        let psi = default_psi(DefaultPsi::Gaussian, &p);
        let rep = radiation_residuals(&p, &vec![C64::new(0.0, 0.0); p.len()], &psi, &ph, 0.0).unwrap();
        assert_eq!(rep.out_residual, 0.0);
        assert_eq!(rep.in_residual, 0.0);
        assert_eq!(rep.weighted_h_form, 0.0);
        assert!(rep.rhs_norm > 0.0);
    }

    #[test]
    fn outgoing_root_branches() {
        let x = outgoing_root(0.3);
        assert!((x.norm() - 1.0).abs() < 1e-14 && x.im > 0.0);
        assert!((x + 1.0 / x - 0.6).norm() < 1e-14);
        let y = outgoing_root(1.5);
        assert!(y.norm() < 1.0 && (y + 1.0 / y - 3.0).norm() < 1e-13);
    }

    #[test]
    fn sommerfeld_solution_is_outgoing_and_its_conjugate_is_not() {
        let spec = PotentialSpec::free(1.0);
        let grid = Grid::line(1.0 / 32.0, 260.0).unwrap().with_boundary(Boundary::Radiation).unwrap();
        let p = Problem::new(spec, &grid, &HamiltonianOptions::default()).unwrap();
        let lambda = 1.0;
        let r_l = model::select_r_lambda(&p.spec, lambda, &p.geom).unwrap();
        let ph = build_phases_signed(C64::new(lambda, 0.0), PhaseSign::Upper, &p.spec, &p.geom, r_l).unwrap();
        let psi = default_psi(DefaultPsi::Gaussian, &p);
        let phi = sommerfeld_solve(&p, lambda, &psi, &ph, BoundaryRow::Transparent).unwrap();
        let v = sommerfeld_verify(&p, &phi, lambda, &psi, &ph, 0.25);
        assert!(v.passed, "{v:?}");
        let conj: Vec<C64> = phi.iter().map(|x| x.conj()).collect();
        let w = sommerfeld_verify(&p, &conj, lambda, &psi, &ph, 0.25);
        assert!(w.condition_i && !w.condition_ii, "{w:?}");
    }

    #[test]
    fn eigenfunction_is_bstar_with_nonvanishing_tail_and_wkb_aligned() {
        let spec = PotentialSpec::free(1.0);
        let geom = geometry::build_geometry(&Grid::line(1.0 / 32.0, 500.0).unwrap(), 1.0, 1.0).unwrap();
        let probe = generalized_eigenfunction(1.0, &spec, &geom).unwrap();
        assert!(probe.bstar_norm.is_finite() && probe.bstar_norm > 0.0);
        assert!(probe.bounded_tail && probe.non_vanishing, "{:?}", probe.tail);
        assert!(probe.eq_residual.unwrap() < 1e-2);
        let al = wkb_alignment(&probe, &spec, &geom).unwrap();
        let far: Vec<f64> = al.iter().copied().filter(|v| v.is_finite()).collect();
        assert!(far.last().unwrap() < &0.05, "{al:?}");
    }

    #[test]
    fn rellich_probe_finds_no_vanishing_combination() {
        let spec = PotentialSpec::free(1.0);
        let geom = geometry::build_geometry(&Grid::line(1.0 / 16.0, 400.0).unwrap(), 1.0, 1.0).unwrap();
        let rep = rellich_probe(0.0, &spec, &geom, 8);
        assert!(!rep.bstar0_found, "{:?}", rep.tail_floor);
    }
}
