//! Problem instance, discrete Hamiltonian and the audit of the decay
//! conditions on the perturbation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::band::{BandMatrix, C64};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{self, CutoffSpec, GeometryField};
use crate::grid::{Grid, GridMode};
use crate::jet::Jet;

/// `H = −½Δ − |x|^ε + q₁ + q₂` with radial `q₁`, `q₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub epsilon: f64,
    pub dim: usize,
    /// Spherical-harmonic index `l` of the radial reduction; 0 in line mode.
    pub sector: usize,
    pub q1: Expr,
    pub q2: Expr,
    pub rho: f64,
    pub tau: Option<f64>,
}

impl PotentialSpec {
    /// Parses `q1`, `q2` with `epsilon`, `rho` and (if set) `tau` bound as
    /// named constants.
    pub fn new(
        epsilon: f64,
        dim: usize,
        sector: usize,
        q1: &str,
        q2: &str,
        rho: f64,
        tau: Option<f64>,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 2.0) {
            return Err(Error::invalid(format!("ε = {epsilon} outside (0, 2]")));
        }
        if dim == 0 {
            return Err(Error::invalid("dim must be at least 1"));
        }
        if !(rho > 0.0) || tau.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::invalid("ρ and τ must be positive"));
        }
        let mut consts = BTreeMap::from([
            ("epsilon".to_string(), epsilon),
            ("rho".to_string(), rho),
            ("d".to_string(), dim as f64),
        ]);
        if let Some(t) = tau {
            consts.insert("tau".to_string(), t);
        }
        Ok(Self {
            epsilon,
            dim,
            sector,
            q1: Expr::parse(q1, &consts)?,
            q2: Expr::parse(q2, &consts)?,
            rho,
            tau,
        })
    }

    /// `q ≡ 0` with `ρ = τ = 1`.
    pub fn free(epsilon: f64) -> Self {
        Self::new(epsilon, 1, 0, "0", "0", 1.0, Some(1.0)).expect("valid free instance")
    }

    /// The reference instance: `q₁ = 0.3 r^ε f^{−1}`, `q₂ = 0.5 f^{−2} sin r`.
    pub fn reference() -> Self {
        Self::new(1.0, 1, 0, "0.3*r^epsilon/f", "0.5*f^(-2)*sin(r)", 1.0, Some(1.0))
            .expect("valid reference instance")
    }

    /// `ε′`.
    pub fn epsilon_prime(&self) -> f64 {
        geometry::epsilon_prime(self.epsilon)
    }

    /// `β_c = min{ρ, ε′, τ, 1 + ε/2}`; `τ` is treated as `+∞` when absent.
    pub fn beta_c(&self) -> f64 {
        self.rho
            .min(self.epsilon_prime())
            .min(self.tau.unwrap_or(f64::INFINITY))
            .min(1.0 + self.epsilon / 2.0)
    }

    /// `min{ρ, ε′, τ}`.
    pub fn decay_min(&self) -> f64 {
        self.rho.min(self.epsilon_prime()).min(self.tau.unwrap_or(f64::INFINITY))
    }

    /// `q₁` with its `x`-derivatives at a node of `geom`.
    pub fn q1_jet(&self, geom: &GeometryField, i: usize) -> Jet {
        let (r, f) = geometry::geometry_jets(geom.x[i], geom.epsilon, &geom.cutoff);
        self.q1.eval(r, f)
    }

    pub fn q2_at(&self, geom: &GeometryField, i: usize) -> f64 {
        self.q2.eval_f64(geom.r[i], geom.f[i])
    }

    /// Centrifugal coefficient `c` of `c/(2x²)` in the `u = x^{(d−1)/2}φ` reduction.
    pub fn centrifugal(&self) -> f64 {
        let (l, d) = (self.sector as f64, self.dim as f64);
        l * (l + d - 2.0) + (d - 1.0) * (d - 3.0) / 4.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetry {
    Hermitian,
    NonHermitian,
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub matrix: BandMatrix,
    pub grid: Grid,
    pub symmetry: Symmetry,
    pub label: String,
}

impl DiscreteOperator {
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.matrix.matvec(v)
    }

    pub fn len(&self) -> usize {
        self.matrix.n()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.n() == 0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HamiltonianOptions {
    /// Peak strength `W₀` of the absorbing potential `−iW₀((|x|−R_max)/W)²`.
    /// `None` picks `60·k(R_max)/W`, which attenuates an outgoing wave by
    /// about `e^{−20}` on one pass through the layer.
    pub absorb_strength: Option<f64>,
    /// Largest admissible `spacing² · max|V|`.
    pub stability_threshold: f64,
}

impl Default for HamiltonianOptions {
    fn default() -> Self {
        Self {
            absorb_strength: None,
            stability_threshold: 1.0,
        }
    }
}

/// Real potential `−|x|^ε + q₁ + q₂` (+ centrifugal term) at every node.
pub fn potential_values(spec: &PotentialSpec, geom: &GeometryField) -> Vec<f64> {
    let radial = geom.grid.mode == GridMode::Radial;
    let cl = spec.centrifugal();
    (0..geom.len())
        .map(|i| {
            let x = geom.x[i];
            let mut v = -x.abs().powf(spec.epsilon)
                + spec.q1.eval_f64(geom.r[i], geom.f[i])
                + spec.q2.eval_f64(geom.r[i], geom.f[i]);
            if radial && cl != 0.0 {
                v += cl / (2.0 * x * x);
            }
            v
        })
        .collect()
}

/// Absorbing strength profile (non-negative, zero on the physical region).
pub fn absorbing_profile(spec: &PotentialSpec, grid: &Grid, opts: &HamiltonianOptions) -> Vec<f64> {
    if grid.absorb_width == 0.0 {
        return vec![0.0; grid.len()];
    }
    let w = grid.absorb_width;
    let w0 = opts.absorb_strength.unwrap_or_else(|| {
        let k = (2.0 * grid.r_max.powf(spec.epsilon)).sqrt();
        60.0 * k / w
    });
    (0..grid.len())
        .map(|i| {
            let s = (grid.x(i).abs() - grid.r_max).max(0.0) / w;
            w0 * s * s
        })
        .collect()
}

pub fn build_hamiltonian(spec: &PotentialSpec, geom: &GeometryField) -> Result<DiscreteOperator> {
    build_hamiltonian_with(spec, geom, &HamiltonianOptions::default())
}

/// Second-order central differences, zero Dirichlet data beyond both ends.
/// Radiation-mode grids get the same interior rows; the boundary rows are
/// installed by the radiation solver for a given energy.
pub fn build_hamiltonian_with(
    spec: &PotentialSpec,
    geom: &GeometryField,
    opts: &HamiltonianOptions,
) -> Result<DiscreteOperator> {
    let grid = &geom.grid;
    if spec.epsilon != geom.epsilon {
        return Err(Error::invalid("potential and geometry use different ε"));
    }
    if grid.dim != spec.dim {
        return Err(Error::invalid("potential and grid use different dimensions"));
    }
    let n = grid.len();
    let h = grid.spacing;
    let v = potential_values(spec, geom);
    let w = absorbing_profile(spec, grid, opts);
    // The centrifugal barrier contributes `c/2` at the first node for every
    // spacing, so it is left out of the stability measure.
    let cl = if grid.mode == GridMode::Radial { spec.centrifugal() } else { 0.0 };
    let vmax = (0..n)
        .map(|i| (v[i] - cl / (2.0 * geom.x[i] * geom.x[i])).hypot(w[i]))
        .fold(0.0, f64::max);
    let value = h * h * vmax;
    if value > opts.stability_threshold {
        return Err(Error::UnstableGrid {
            value,
            threshold: opts.stability_threshold,
        });
    }
    let mut m = BandMatrix::zeros(n, 1, 1);
    let off = C64::new(-0.5 / (h * h), 0.0);
    for i in 0..n {
        m.set(i, i, C64::new(1.0 / (h * h) + v[i], -w[i]));
        if i + 1 < n {
            m.set(i, i + 1, off);
            m.set(i + 1, i, off);
        }
    }
    let symmetry = if w.iter().all(|&x| x == 0.0) {
        Symmetry::Hermitian
    } else {
        Symmetry::NonHermitian
    };
    Ok(DiscreteOperator {
        matrix: m,
        grid: grid.clone(),
        symmetry,
        label: "H".into(),
    })
}

/// Measured constants of the decay conditions.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    /// `max |q₁| / (r^ε f^{−ρ})`, or `/(r² f^{−1−ρ})` at `ε = 2`.
    pub c_q1: f64,
    /// `max (∇^f q₁)₊ / f^{−1−ρ}`.
    pub c_gradq1: f64,
    /// `max |q₂| / f^{−1−ρ}`.
    pub c_q2: f64,
    /// `max` of `|∇^f q₁| / f^{−1−τ}` and `|ℓ r^{−ε/2} ∇q₁| / f^{−1−τ}`.
    pub c_tau: Option<f64>,
    pub r_lambda_table: BTreeMap<String, f64>,
    pub passed: BTreeMap<String, bool>,
}

impl ConditionReport {
    pub fn all_passed(&self) -> bool {
        self.passed.values().all(|&b| b)
    }
}

pub fn audit_conditions(spec: &PotentialSpec, geom: &GeometryField) -> ConditionReport {
    audit_conditions_with(spec, geom, &[0.5, 1.0, 2.0])
}

pub fn audit_conditions_with(
    spec: &PotentialSpec,
    geom: &GeometryField,
    lambdas: &[f64],
) -> ConditionReport {
    let eps = spec.epsilon;
    let (mut c_q1, mut c_gq1, mut c_q2, mut c_tau) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..geom.len() {
        if !geom.grid.is_physical(i) {
            continue;
        }
        let (r, f) = (geom.r[i], geom.f[i]);
        let q1 = spec.q1_jet(geom, i);
        let q2 = spec.q2_at(geom, i);
        let maj_q1 = if eps == 2.0 {
            r * r * f.powf(-1.0 - spec.rho)
        } else {
            r.powf(eps) * f.powf(-spec.rho)
        };
        c_q1 = c_q1.max(q1.v.abs() / maj_q1);
        let grad_f_q1 = geom.grad_f[i] * q1.d1;
        c_gq1 = c_gq1.max(grad_f_q1 / f.powf(-1.0 - spec.rho));
        c_q2 = c_q2.max(q2.abs() / f.powf(-1.0 - spec.rho));
        if let Some(tau) = spec.tau {
            let maj = f.powf(-1.0 - tau);
            let ell_term = geom.ell[i] * r.powf(-eps / 2.0) * q1.d1;
            c_tau = c_tau.max(grad_f_q1.abs() / maj).max(ell_term.abs() / maj);
        }
    }
    let mut r_lambda_table = BTreeMap::new();
    for &l in lambdas {
        if let Ok(r) = select_r_lambda(spec, l, geom) {
            r_lambda_table.insert(format!("{l}"), r);
        }
    }
    let mut passed = BTreeMap::new();
    passed.insert("q1".to_string(), c_q1.is_finite());
    passed.insert("grad_f_q1".to_string(), c_gq1.is_finite());
    passed.insert("q2".to_string(), c_q2.is_finite());
    if spec.tau.is_some() {
        passed.insert("tau".to_string(), c_tau.is_finite());
    }
    ConditionReport {
        c_q1,
        c_gradq1: c_gq1,
        c_q2,
        c_tau: spec.tau.map(|_| c_tau),
        r_lambda_table,
        passed,
    }
}

/// Smallest grid radius `r_λ ≥ 1` with `λ − q₁ + r^ε > 1` at every grid
/// radius `r ≥ r_λ`.
pub fn select_r_lambda(spec: &PotentialSpec, lambda: f64, geom: &GeometryField) -> Result<f64> {
    let mut radii: Vec<f64> = (0..geom.len())
        .filter(|&i| geom.grid.is_physical(i))
        .map(|i| geom.r[i])
        .collect();
    radii.sort_by(|a, b| a.total_cmp(b));
    radii.dedup();
    let ok = |r: f64| lambda - spec.q1.eval_f64(r, geometry::flow(r, spec.epsilon)) + r.powf(spec.epsilon) > 1.0;
    let last_bad = radii.iter().rposition(|&r| !ok(r));
    match last_bad {
        None => Ok(radii.first().copied().unwrap_or(1.0).max(1.0)),
        Some(k) if k + 1 < radii.len() => Ok(radii[k + 1].max(1.0)),
        Some(_) => Err(Error::NotSatisfiable { lambda }),
    }
}

/// `η_λ = 1 − χ(r/r_λ)` and its `x`-derivative at every node.
pub fn eta_lambda(geom: &GeometryField, r_lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let spec: CutoffSpec = geom.cutoff;
    (0..geom.len())
        .map(|i| {
            let (r, _) = geometry::geometry_jets(geom.x[i], geom.epsilon, &spec);
            let e = Jet::constant(1.0) - geometry::cutoff_jet(r * (1.0 / r_lambda), &spec);
            (e.v, e.d1)
        })
        .unzip()
}

/// Lowest `k` eigenpairs of a real symmetric tridiagonal operator, by Sturm
/// bisection for the eigenvalues and shifted inverse iteration for the
/// (unit-norm) eigenvectors.
pub fn lowest_eigenpairs(op: &DiscreteOperator, k: usize) -> Result<Vec<(f64, Vec<C64>)>> {
    let m = &op.matrix;
    let n = m.n();
    if m.lower_bandwidth() > 1 || m.upper_bandwidth() > 1 || m.hermiticity_defect() > 0.0 {
        return Err(Error::invalid("eigen-solver needs a real symmetric tridiagonal matrix"));
    }
    if (0..n).any(|i| m.get(i, i).im != 0.0) {
        return Err(Error::invalid("eigen-solver needs a real diagonal"));
    }
    let d: Vec<f64> = (0..n).map(|i| m.get(i, i).re).collect();
    let e: Vec<f64> = (0..n.saturating_sub(1)).map(|i| m.get(i, i + 1).re).collect();
    // Number of eigenvalues strictly below x.
    let count_below = |x: f64| -> usize {
        let mut cnt = 0;
        let mut q = d[0] - x;
        if q < 0.0 {
            cnt += 1;
        }
        for i in 1..n {
            let denom = if q == 0.0 { f64::EPSILON * (e[i - 1].abs() + 1.0) } else { q };
            q = d[i] - x - e[i - 1] * e[i - 1] / denom;
            if q < 0.0 {
                cnt += 1;
            }
        }
        cnt
    };
    let bound = (0..n)
        .map(|i| {
            d[i].abs()
                + if i > 0 { e[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { e[i].abs() } else { 0.0 }
        })
        .fold(0.0, f64::max);
    let mut out = Vec::with_capacity(k);
    for j in 0..k.min(n) {
        let (mut lo, mut hi) = (-bound - 1.0, bound + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()).max(1.0) {
                break;
            }
        }
        let lambda = 0.5 * (lo + hi);
        let shift = lambda + 1e-10 * bound.max(1.0);
        let lu = m.shifted(C64::new(shift, 0.0)).lu()?;
        let mut v: Vec<C64> = (0..n).map(|i| C64::new(1.0 + (i % 7) as f64 * 0.1, 0.0)).collect();
        for _ in 0..4 {
            v = lu.solve(&v);
            let nv = crate::band::norm2(&v);
            v.iter_mut().for_each(|x| *x /= nv);
        }
        out.push((lambda, v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_geometry;

    fn line(h: f64, r: f64) -> GeometryField {
        build_geometry(&Grid::line(h, r).unwrap(), 1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_vector_maps_to_zero_and_dirichlet_is_symmetric() {
        let g = line(1.0 / 16.0, 20.0);
        let h = build_hamiltonian(&PotentialSpec::free(1.0), &g).unwrap();
        let y = h.apply(&vec![C64::new(0.0, 0.0); h.len()]);
        assert!(y.iter().all(|v| v.norm() == 0.0));
        assert!(h.matrix.symmetry_defect() == 0.0);
        assert!(h.matrix.hermiticity_defect() == 0.0);
        assert_eq!(h.symmetry, Symmetry::Hermitian);
    }

    #[test]
    fn audit_reports_exact_constants() {
        let g = line(1.0 / 16.0, 50.0);
        let zero = PotentialSpec::free(1.0);
        let rep = audit_conditions(&zero, &g);
        assert_eq!((rep.c_q1, rep.c_gradq1, rep.c_q2), (0.0, 0.0, 0.0));
        assert!(rep.all_passed());
        let s = PotentialSpec::new(1.0, 1, 0, "0.5*r^epsilon*f^(-rho)", "f^(-1-rho)*sin(r)", 1.0, None)
            .unwrap();
        let rep = audit_conditions(&s, &g);
        assert!((rep.c_q1 - 0.5).abs() < 1e-12);
        assert!(rep.c_q2 <= 1.0);
        let s3 = PotentialSpec::new(1.0, 1, 0, "1.5*r^epsilon*f^(-rho)", "0", 1.0, None).unwrap();
        assert!((audit_conditions(&s3, &g).c_q1 / rep.c_q1 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn r_lambda_selection() {
        let g = line(1.0 / 16.0, 50.0);
        let free = PotentialSpec::free(1.0);
        let r0 = select_r_lambda(&free, 0.0, &g).unwrap();
        let smallest_above_one = g.r.iter().copied().filter(|&r| r > 1.0).fold(f64::INFINITY, f64::min);
        assert_eq!(r0, smallest_above_one);
        let r10 = select_r_lambda(&free, -10.0, &g).unwrap();
        assert!((r10 - 11.0).abs() < 0.1);
        assert!(select_r_lambda(&free, 2.0, &g).unwrap() <= r0);
        assert!(matches!(
            select_r_lambda(&free, -100.0, &g),
            Err(Error::NotSatisfiable { .. })
        ));
    }

    #[test]
    fn unstable_grid_is_rejected() {
        let g = build_geometry(&Grid::line(0.02, 3000.0).unwrap(), 1.0, 1.0).unwrap();
        let err = build_hamiltonian_with(
            &PotentialSpec::free(1.0),
            &g,
            &HamiltonianOptions {
                stability_threshold: 0.5,
                ..Default::default()
            },
        );
        assert!(matches!(err, Err(Error::UnstableGrid { .. })));
    }

    #[test]
    fn eigenpairs_match_dense_oracle() {
        // Half-line grid: the whole-line problem has near-degenerate
        // even/odd pairs whose eigenvectors are not individually stable.
        let g = build_geometry(&Grid::radial(3, 0.05, 15.0).unwrap(), 1.0, 1.0).unwrap();
        assert!(g.len() <= 400);
        let spec = PotentialSpec::new(1.0, 3, 1, "0.3*r^epsilon/f", "0.5*f^(-2)*sin(r)", 1.0, Some(1.0)).unwrap();
        let h = build_hamiltonian(&spec, &g).unwrap();
        let dense = h.matrix.to_dense().map(|z| z.re);
        let eig = nalgebra::SymmetricEigen::new(dense);
        let mut idx: Vec<usize> = (0..g.len()).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let ours = lowest_eigenpairs(&h, 6).unwrap();
        for (k, (lam, v)) in ours.iter().enumerate() {
            let j = idx[k];
            assert!((lam - eig.eigenvalues[j]).abs() < 1e-10 * lam.abs().max(1.0));
            let overlap: f64 = (0..g.len()).map(|i| v[i].re * eig.eigenvectors[(i, j)]).sum();
            assert!((overlap.abs() - 1.0).abs() < 1e-10);
        }
        let dense_c = h.matrix.to_dense();
        let ev = dense_c.clone().complex_eigenvalues_check();
        assert!(ev < 1e-10);
    }

    trait ImagCheck {
        fn complex_eigenvalues_check(self) -> f64;
    }
    impl ImagCheck for nalgebra::DMatrix<C64> {
        fn complex_eigenvalues_check(self) -> f64 {
            // Schur form of the (real) Dirichlet matrix: any complex pair
            // would show up as a nonzero subdiagonal 2×2 block.
            let re = self.map(|z| z.re);
            let schur = nalgebra::linalg::Schur::new(re);
            schur
                .complex_eigenvalues()
                .iter()
                .map(|z| z.im.abs())
                .fold(0.0, f64::max)
        }
    }

    #[test]
    fn beta_c_of_reference() {
        let s = PotentialSpec::reference();
        assert_eq!(s.epsilon_prime(), 2.0);
        assert_eq!(s.beta_c(), 1.0);
        assert_eq!(PotentialSpec::free(2.0).epsilon_prime(), 2.0);
    }
}
