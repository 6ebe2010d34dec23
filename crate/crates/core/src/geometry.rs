//! Cutoff, regularized radius, flow coordinate and the weight family `Θ`.
//!
//! All fields are tabulated on a [`Grid`]. Values and derivatives come from
//! [`Jet`] evaluation of the closed-form definitions, so the identities that
//! hold for `r ≥ 2` (`|∇r| = 1`, `Δf = (d − ε/2 − 1) r^{−ε/2−1}`, ...) are
//! satisfied to rounding there and remain smooth through the cutoff region.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridMode};
use crate::jet::Jet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffShape {
    /// Quintic smoothstep, `C²`.
    PolynomialBump,
    /// `g(1−s)/(g(s)+g(1−s))` with `g(u) = e^{−1/u}`, `C^∞`.
    #[default]
    ExponentialBump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub t_lo: f64,
    pub t_hi: f64,
    pub shape: CutoffShape,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        Self {
            t_lo: 1.0,
            t_hi: 2.0,
            shape: CutoffShape::ExponentialBump,
        }
    }
}

/// Support radius of `η = 1 − χ(r/r₀)`.
pub const R0: f64 = 2.0;

fn flat_exp(u: Jet) -> Jet {
    if u.v <= 0.0 {
        Jet::constant(0.0)
    } else {
        (-u.recip()).exp()
    }
}

/// `χ` evaluated on a jet.
pub fn cutoff_jet(t: Jet, spec: &CutoffSpec) -> Jet {
    if t.v <= spec.t_lo {
        return Jet::constant(1.0);
    }
    if t.v >= spec.t_hi {
        return Jet::constant(0.0);
    }
    let s = (t - spec.t_lo) * (1.0 / (spec.t_hi - spec.t_lo));
    match spec.shape {
        CutoffShape::ExponentialBump => {
            let a = flat_exp(Jet::constant(1.0) - s);
            let b = flat_exp(s);
            a / (a + b)
        }
        CutoffShape::PolynomialBump => {
            let s3 = s * s * s;
            let step = s3 * (s * (s * 6.0 - 15.0) + 10.0);
            Jet::constant(1.0) - step
        }
    }
}

pub fn smooth_cutoff(t: f64, spec: &CutoffSpec) -> f64 {
    cutoff_jet(Jet::constant(t), spec).v
}

/// `r = χ(t) + t (1 − χ(t))` for `t = |x|`.
pub fn radius_jet(t: Jet, spec: &CutoffSpec) -> Jet {
    let chi = cutoff_jet(t, spec);
    chi + t * (Jet::constant(1.0) - chi)
}

/// `f(r)`; continuous in `ε` at `ε = 2`.
pub fn flow_jet(r: Jet, epsilon: f64) -> Jet {
    if epsilon == 2.0 {
        r.ln() + 1.0
    } else {
        let k = 1.0 - epsilon / 2.0;
        (r.powf(k) - 1.0) * (1.0 / k) + 1.0
    }
}

pub fn flow(r: f64, epsilon: f64) -> f64 {
    flow_jet(Jet::constant(r), epsilon).v
}

/// Inverse of `f` on `r ≥ 1`.
pub fn flow_inverse(f: f64, epsilon: f64) -> f64 {
    if epsilon == 2.0 {
        (f - 1.0).exp()
    } else {
        let k = 1.0 - epsilon / 2.0;
        ((f - 1.0) * k + 1.0).powf(1.0 / k)
    }
}

/// `ε′`: `ε/(1 − ε/2)` for `ε < 2`, `2` at `ε = 2`.
pub fn epsilon_prime(epsilon: f64) -> f64 {
    if epsilon == 2.0 {
        2.0
    } else {
        epsilon / (1.0 - epsilon / 2.0)
    }
}

/// Tabulated geometry. In line mode derivatives are along `x`; in radial
/// mode `x` is the radius, `grad_*` is the radial derivative and `lap_*` the
/// `d`-dimensional Laplacian of the radial function.
#[derive(Debug, Clone)]
pub struct GeometryField {
    pub grid: Grid,
    pub cutoff: CutoffSpec,
    pub epsilon: f64,
    pub rho: f64,
    /// The constant `C` inside `h`.
    pub c_h: f64,
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    pub f: Vec<f64>,
    pub grad_r: Vec<f64>,
    pub lap_r: Vec<f64>,
    pub grad_f: Vec<f64>,
    pub lap_f: Vec<f64>,
    /// Second and third derivative of `f` along the grid coordinate.
    pub f_xx: Vec<f64>,
    pub f_xxx: Vec<f64>,
    pub r_xx: Vec<f64>,
    /// `x`-derivative of `Δf` (equal to `f_xxx` in line mode).
    pub grad_lap_f: Vec<f64>,
    /// `x`-derivative of `Δr`.
    pub grad_lap_r: Vec<f64>,
    pub eta: Vec<f64>,
    /// `x`-derivative of `η`.
    pub grad_eta: Vec<f64>,
    pub ell: Vec<f64>,
    pub h: Vec<f64>,
}

impl GeometryField {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `f(R_max)`.
    pub fn f_max(&self) -> f64 {
        flow(self.grid.r_max, self.epsilon)
    }

    /// Largest `ν` with `R_{ν+1} = 2^{ν+1} ≤ f(R_max)`.
    pub fn nu_max(&self) -> usize {
        (self.f_max().log2().floor() as i64 - 1).max(0) as usize
    }

    /// `η̃ = η |∇r|^{−2}` (zero where `η` vanishes).
    pub fn eta_tilde(&self, i: usize) -> f64 {
        if self.eta[i] == 0.0 {
            0.0
        } else {
            self.eta[i] / (self.grad_r[i] * self.grad_r[i])
        }
    }

    /// Writes `x, r, f, grad_f, lap_f, ell, h`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,r,f,grad_f,lap_f,ell,h")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.x[i], self.r[i], self.f[i], self.grad_f[i], self.lap_f[i], self.ell[i], self.h[i]
            )?;
        }
        Ok(())
    }
}

/// Per-node jets of `r` and `f` along the grid coordinate.
pub fn geometry_jets(x: f64, epsilon: f64, cutoff: &CutoffSpec) -> (Jet, Jet) {
    let t = Jet::variable(x).abs();
    let r = radius_jet(t, cutoff);
    (r, flow_jet(r, epsilon))
}

pub fn build_geometry(grid: &Grid, epsilon: f64, rho: f64) -> Result<GeometryField> {
    build_geometry_with(grid, epsilon, rho, CutoffSpec::default())
}

pub fn build_geometry_with(
    grid: &Grid,
    epsilon: f64,
    rho: f64,
    cutoff: CutoffSpec,
) -> Result<GeometryField> {
    if !(epsilon > 0.0 && epsilon <= 2.0) {
        return Err(Error::invalid(format!("ε = {epsilon} outside (0, 2]")));
    }
    if !(rho > 0.0) {
        return Err(Error::invalid(format!("ρ = {rho} must be positive")));
    }
    let n = grid.len();
    let radial = grid.mode == GridMode::Radial;
    let dm1 = grid.dim as f64 - 1.0;
    let mut g = GeometryField {
        grid: grid.clone(),
        cutoff,
        epsilon,
        rho,
        c_h: 0.0,
        x: Vec::with_capacity(n),
        r: Vec::with_capacity(n),
        f: Vec::with_capacity(n),
        grad_r: Vec::with_capacity(n),
        lap_r: Vec::with_capacity(n),
        grad_f: Vec::with_capacity(n),
        lap_f: Vec::with_capacity(n),
        f_xx: Vec::with_capacity(n),
        f_xxx: Vec::with_capacity(n),
        r_xx: Vec::with_capacity(n),
        grad_lap_f: Vec::with_capacity(n),
        grad_lap_r: Vec::with_capacity(n),
        eta: Vec::with_capacity(n),
        grad_eta: Vec::with_capacity(n),
        ell: Vec::with_capacity(n),
        h: vec![0.0; n],
    };
    let eta_spec = cutoff;
    for i in 0..n {
        let x = grid.x(i);
        let (r, f) = geometry_jets(x, epsilon, &cutoff);
        g.x.push(x);
        g.r.push(r.v);
        g.f.push(f.v);
        g.grad_r.push(r.d1);
        g.grad_f.push(f.d1);
        g.f_xx.push(f.d2);
        g.f_xxx.push(f.d3);
        g.r_xx.push(r.d2);
        if radial {
            // Δu = u'' + (d−1)/x u' for radial u.
            g.lap_r.push(r.d2 + dm1 / x * r.d1);
            g.lap_f.push(f.d2 + dm1 / x * f.d1);
            g.grad_lap_r.push(r.d3 + dm1 * (r.d2 / x - r.d1 / (x * x)));
            g.grad_lap_f.push(f.d3 + dm1 * (f.d2 / x - f.d1 / (x * x)));
        } else {
            g.lap_r.push(r.d2);
            g.lap_f.push(f.d2);
            g.grad_lap_r.push(r.d3);
            g.grad_lap_f.push(f.d3);
        }
        let eta = Jet::constant(1.0) - cutoff_jet(r * (1.0 / R0), &eta_spec);
        g.eta.push(eta.v);
        g.grad_eta.push(eta.d1);
        // Radial component of ℓ = δ − η̃ ∇r⊗∇r.
        g.ell.push(1.0 - eta.v);
    }

    // Smallest C with h − r^{−ε} f^{−1} ℓ − C r^{−ε} f^{−2−ρ} ≥ 0, then doubled.
    let mut c_min: f64 = 0.0;
    for i in 0..n {
        let (r, f) = (g.r[i], g.f[i]);
        let base = r.powf(-epsilon / 2.0 - 1.0);
        let need = r.powf(-epsilon) / f * g.ell[i] - base * (1.0 - g.grad_r[i] * g.grad_r[i]);
        let per_c = 2.0 * base * f.powf(-1.0 - rho) - r.powf(-epsilon) * f.powf(-2.0 - rho);
        if need > 0.0 {
            c_min = c_min.max(need / per_c);
        }
    }
    g.c_h = if c_min > 0.0 { 2.0 * c_min } else { 1.0 };
    for i in 0..n {
        let (r, f) = (g.r[i], g.f[i]);
        g.h[i] = r.powf(-epsilon / 2.0 - 1.0)
            * (1.0 - g.grad_r[i] * g.grad_r[i] + 2.0 * g.c_h * f.powf(-1.0 - rho));
    }

    let deviation = fd_gradient_deviation(&g);
    let tolerance = 1e-3;
    if deviation > tolerance {
        return Err(Error::GridTooCoarse {
            deviation,
            tolerance,
        });
    }
    Ok(g)
}

/// Max relative deviation of the central difference of tabulated `f` from
/// the analytic `∇f`, over physical nodes with `r ≥ 2`.
pub fn fd_gradient_deviation(g: &GeometryField) -> f64 {
    let h = g.grid.spacing;
    let mut worst: f64 = 0.0;
    for i in 1..g.len().saturating_sub(1) {
        if g.r[i] < 2.0 || !g.grid.is_physical(i) || g.r[i - 1] < 2.0 || g.r[i + 1] < 2.0 {
            continue;
        }
        let fd = (g.f[i + 1] - g.f[i - 1]) / (2.0 * h);
        worst = worst.max((fd - g.grad_f[i]).abs() / g.grad_f[i].abs());
    }
    worst
}

/// Finite-difference errors of the closed-form identities valid for `r ≥ 2`
/// at each spacing, with the fitted log–log order per identity.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityRefinement {
    pub spacings: Vec<f64>,
    /// `(name, errors per spacing, fitted order)`.
    pub identities: Vec<(String, Vec<f64>, f64)>,
}

/// Max abs errors of `∇f = r^{−ε/2}∇r`, `|∇r|² = 1`,
/// `Δf = (d − ε/2 − 1)r^{−ε/2−1}` and `Δr = (d−1)/r`, each left side by
/// central differences of the tabulated `f` and `r`, over physical nodes
/// whose stencil lies in `r ≥ 2`.
pub fn identity_errors(g: &GeometryField) -> [f64; 4] {
    let h = g.grid.spacing;
    let d = g.grid.dim as f64;
    let radial = g.grid.mode == GridMode::Radial;
    let e = g.epsilon;
    let mut worst = [0.0f64; 4];
    for i in 1..g.len().saturating_sub(1) {
        if !g.grid.is_physical(i) || g.r[i - 1] < 2.0 || g.r[i] < 2.0 || g.r[i + 1] < 2.0 {
            continue;
        }
        let r = g.r[i];
        let d1 = |v: &[f64]| (v[i + 1] - v[i - 1]) / (2.0 * h);
        let d2 = |v: &[f64]| (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
        let lap = |v: &[f64]| d2(v) + if radial { (d - 1.0) / g.x[i] * d1(v) } else { 0.0 };
        let rx = d1(&g.r);
        let errs = [
            (d1(&g.f) - r.powf(-e / 2.0) * rx).abs(),
            (rx * rx - 1.0).abs(),
            (lap(&g.f) - (d - e / 2.0 - 1.0) * r.powf(-e / 2.0 - 1.0)).abs(),
            (lap(&g.r) - (d - 1.0) / r).abs(),
        ];
        for (w, v) in worst.iter_mut().zip(errs) {
            *w = w.max(v);
        }
    }
    worst
}

pub fn identity_refinement(grid: &Grid, epsilon: f64, rho: f64, spacings: &[f64]) -> Result<IdentityRefinement> {
    let names = ["grad-f", "grad-r-unit", "lap-f", "lap-r"];
    let mut errs = vec![Vec::new(); 4];
    for &h in spacings {
        let g = build_geometry(&grid.with_spacing(h)?, epsilon, rho)?;
        for (k, v) in identity_errors(&g).into_iter().enumerate() {
            errs[k].push(v);
        }
    }
    let order = |e: &[f64]| {
        let xs: Vec<f64> = spacings.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = e.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        num / den
    };
    Ok(IdentityRefinement {
        spacings: spacings.to_vec(),
        identities: names
            .iter()
            .zip(errs)
            .filter(|(_, e)| e.iter().any(|&v| v > 1e-13))
            .map(|(n, e)| (n.to_string(), e.clone(), order(&e)))
            .collect(),
    })
}

/// Minimal slack of the `h`-positivity inequality (≥ 0 when it holds).
pub fn h_positivity_slack(g: &GeometryField) -> f64 {
    (0..g.len())
        .map(|i| {
            let (r, f) = (g.r[i], g.f[i]);
            g.h[i]
                - r.powf(-g.epsilon) / f * g.ell[i]
                - g.c_h * r.powf(-g.epsilon) * f.powf(-2.0 - g.rho)
        })
        .fold(f64::INFINITY, f64::min)
}

/// `Θ = [1 − (1 + f/R_ν)^{−δ}]/δ` and its first three `f`-derivatives.
#[derive(Debug, Clone)]
pub struct ThetaWeight {
    pub nu: usize,
    pub delta: f64,
    pub r_nu: f64,
    pub values: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
    pub bounds: ThetaBounds,
}

/// Measured constants of the weight bounds, taken over the physical nodes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThetaBounds {
    /// `min Θ R_ν`
    pub c_lower: f64,
    /// `max Θ`
    pub c_upper: f64,
    /// `min Θ′ / ((min{R_ν, f})^δ f^{−1−δ} Θ)`
    pub c_prime: f64,
    /// `max −Θ″ f² / Θ`
    pub c2: f64,
    /// `max Θ‴ f³ / Θ`
    pub c3: f64,
    /// `Θ ≤ f/R_ν`, `Θ′ ≤ f^{−1}Θ`, `−Θ″ ≥ 0`, `Θ‴ ≥ 0` at every node.
    pub pointwise_ok: bool,
}

impl ThetaBounds {
    pub fn all_hold(&self) -> bool {
        self.pointwise_ok
            && self.c_lower > 0.0
            && self.c_prime > 0.0
            && self.c_upper.is_finite()
            && self.c2.is_finite()
            && self.c3.is_finite()
    }
}

/// `Θ` and derivatives at a single value of `f`.
pub fn theta_at(f: f64, r_nu: f64, delta: f64) -> [f64; 4] {
    let u = 1.0 + f / r_nu;
    [
        (1.0 - u.powf(-delta)) / delta,
        u.powf(-1.0 - delta) / r_nu,
        -(1.0 + delta) * u.powf(-2.0 - delta) / (r_nu * r_nu),
        (1.0 + delta) * (2.0 + delta) * u.powf(-3.0 - delta) / (r_nu * r_nu * r_nu),
    ]
}

pub fn theta_weight(geom: &GeometryField, nu: usize, delta: f64) -> ThetaWeight {
    assert!(delta > 0.0, "δ must be positive");
    let r_nu = 2f64.powi(nu as i32);
    let n = geom.len();
    let mut w = ThetaWeight {
        nu,
        delta,
        r_nu,
        values: Vec::with_capacity(n),
        d1: Vec::with_capacity(n),
        d2: Vec::with_capacity(n),
        d3: Vec::with_capacity(n),
        bounds: ThetaBounds {
            c_lower: f64::INFINITY,
            c_upper: 0.0,
            c_prime: f64::INFINITY,
            c2: 0.0,
            c3: 0.0,
            pointwise_ok: true,
        },
    };
    let tol = 1e-12;
    for i in 0..n {
        let f = geom.f[i];
        let [t0, t1, t2, t3] = theta_at(f, r_nu, delta);
        w.values.push(t0);
        w.d1.push(t1);
        w.d2.push(t2);
        w.d3.push(t3);
        if !geom.grid.is_physical(i) {
            continue;
        }
        let b = &mut w.bounds;
        b.c_lower = b.c_lower.min(t0 * r_nu);
        b.c_upper = b.c_upper.max(t0);
        let m = r_nu.min(f);
        b.c_prime = b.c_prime.min(t1 / (m.powf(delta) * f.powf(-1.0 - delta) * t0));
        b.c2 = b.c2.max(-t2 * f * f / t0);
        b.c3 = b.c3.max(t3 * f * f * f / t0);
        let ok = t0 <= f / r_nu * (1.0 + tol)
            && t1 <= t0 / f * (1.0 + tol)
            && t2 <= 0.0
            && t3 >= 0.0;
        b.pointwise_ok &= ok;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_endpoints_and_monotonicity() {
        for shape in [CutoffShape::ExponentialBump, CutoffShape::PolynomialBump] {
            let spec = CutoffSpec {
                shape,
                ..Default::default()
            };
            assert_eq!(smooth_cutoff(0.5, &spec), 1.0);
            assert_eq!(smooth_cutoff(3.0, &spec), 0.0);
            assert!(smooth_cutoff(1.2, &spec) >= smooth_cutoff(1.8, &spec));
            let mut prev = 1.0;
            for k in 0..=1000 {
                let t = 1.0 + k as f64 / 1000.0;
                let v = smooth_cutoff(t, &spec);
                assert!(v <= prev + 1e-15);
                assert!(cutoff_jet(Jet::variable(t), &spec).d1 <= 1e-15);
                prev = v;
            }
        }
    }

    #[test]
    fn exponential_bump_is_flat_at_both_ends() {
        let spec = CutoffSpec::default();
        for t in [1.0 + 1e-3, 2.0 - 1e-3] {
            let j = cutoff_jet(Jet::variable(t), &spec);
            assert!(j.d1.abs() < 1e-12 && j.d2.abs() < 1e-12, "{j:?}");
        }
    }

    #[test]
    fn flow_values() {
        for eps in [0.3, 1.0, 1.7, 2.0] {
            assert!((flow(1.0, eps) - 1.0).abs() < 1e-15);
        }
        assert!((flow(4.0, 1.0) - 3.0).abs() < 1e-14);
        assert!((flow_inverse(3.0, 1.0) - 4.0).abs() < 1e-12);
        assert!((flow_inverse(flow(37.0, 2.0), 2.0) - 37.0).abs() < 1e-10);
    }

    #[test]
    fn flow_is_continuous_at_epsilon_two() {
        let grid = Grid::line(1.0 / 16.0, 200.0).unwrap();
        let f2 = build_geometry(&grid, 2.0, 1.0).unwrap().f;
        let mut prev = f64::INFINITY;
        for k in 2..=5 {
            let eps = 2.0 - 10f64.powi(-k);
            let fe = build_geometry(&grid, eps, 1.0).unwrap().f;
            let d = fe.iter().zip(&f2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(d < prev);
            prev = d;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn laplacian_of_f_at_epsilon_two() {
        // d = 1, r = 2: Δf = (1 − 1 − 1) 2^{−2} = −1/4.
        let grid = Grid::line(1.0 / 16.0, 8.0).unwrap();
        let g = build_geometry(&grid, 2.0, 1.0).unwrap();
        let i = (0..g.len()).find(|&i| g.x[i] == 2.0).unwrap();
        assert!((g.lap_f[i] + 0.25).abs() < 1e-14);
    }

    #[test]
    fn closed_form_identities_for_large_r() {
        for (grid, d) in [
            (Grid::line(1.0 / 32.0, 50.0).unwrap(), 1.0),
            (Grid::radial(3, 1.0 / 32.0, 50.0).unwrap(), 3.0),
        ] {
            for eps in [0.5, 1.0, 2.0] {
                let g = build_geometry(&grid, eps, 1.0).unwrap();
                for i in 0..g.len() {
                    let r = g.r[i];
                    assert!(r >= 1.0 && g.f[i] >= 1.0);
                    assert!((g.grad_f[i] - r.powf(-eps / 2.0) * g.grad_r[i]).abs() < 1e-14);
                    if r >= 2.0 {
                        assert!((g.grad_r[i].powi(2) - 1.0).abs() < 1e-14);
                        let lap_f = (d - eps / 2.0 - 1.0) * r.powf(-eps / 2.0 - 1.0);
                        assert!((g.lap_f[i] - lap_f).abs() < 1e-12);
                        assert!((g.lap_r[i] - (d - 1.0) / r).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn identities_refine_at_second_order() {
        for grid in [Grid::line(0.125, 50.0).unwrap(), Grid::radial(3, 0.125, 50.0).unwrap()] {
            let rep = identity_refinement(&grid, 1.0, 1.0, &[0.125, 0.0625, 0.03125]).unwrap();
            assert!(!rep.identities.is_empty());
            for (name, e, order) in &rep.identities {
                assert!((order - 2.0).abs() < 0.3, "{name}: {e:?} order {order}");
            }
        }
    }

    #[test]
    fn h_positivity_holds() {
        for eps in [0.5, 1.0, 1.5, 2.0] {
            let g = build_geometry(&Grid::line(1.0 / 16.0, 100.0).unwrap(), eps, 1.0).unwrap();
            assert!(h_positivity_slack(&g) >= 0.0);
            assert!(g.c_h > 0.0);
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let grid = Grid::line(1.0, 40.0).unwrap();
        assert!(matches!(
            build_geometry(&grid, 1.0, 1.0),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn theta_values() {
        let [t, t1, _, _] = theta_at(8.0, 8.0, 1.0);
        assert!((t - 0.5).abs() < 1e-15);
        assert!((t1 - 1.0 / 32.0).abs() < 1e-15);
        // ν large with f fixed: Θ ≈ f/R_ν.
        let [t, ..] = theta_at(3.0, 2f64.powi(30), 0.5);
        assert!((t / (3.0 / 2f64.powi(30)) - 1.0).abs() < 1e-8);
    }
}
