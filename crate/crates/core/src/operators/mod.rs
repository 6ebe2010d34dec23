//! Conjugate operators, asymptotic phases and the exact operator identities,
//! each checked against a brute-force discrete assembly.
//!
//! The commutator, factorization and positivity checks act on whole-line
//! grids only: their expansions are written for a one-dimensional `x` and
//! the radial reduction would add its own centrifugal bookkeeping.

mod probe;

pub use probe::{positivity_probe, probe_search, ProbeLemma, ProbeOptions, ProbeReport, TestSpace};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::band::{BandMatrix, C64};
use crate::error::{Error, Result};
use crate::geometry::{self, GeometryField, ThetaWeight};
use crate::grid::{Grid, GridMode};
use crate::jet::Jet;
use crate::model::{self, DiscreteOperator, PotentialSpec, Symmetry};

const I: C64 = C64::new(0.0, 1.0);

fn c(v: f64) -> C64 {
    C64::new(v, 0.0)
}

/// Centered first difference with zero data beyond both ends.
pub fn central_difference(n: usize, h: f64) -> BandMatrix {
    let mut d = BandMatrix::zeros(n, 1, 1);
    for i in 0..n {
        if i + 1 < n {
            d.set(i, i + 1, c(0.5 / h));
        }
        if i > 0 {
            d.set(i, i - 1, c(-0.5 / h));
        }
    }
    d
}

/// `p = −i∂`.
pub fn momentum(n: usize, h: f64) -> BandMatrix {
    central_difference(n, h).scaled(-I)
}

/// `p g p = −∂ g ∂` in divergence form with midpoint averages of `g`.
pub fn divergence_form(g: &[f64], h: f64) -> BandMatrix {
    let n = g.len();
    let mut m = BandMatrix::zeros(n, 1, 1);
    let mid = |i: usize| 0.5 * (g[i] + g[i + 1]);
    for i in 0..n {
        let left = if i > 0 { mid(i - 1) } else { g[0] };
        let right = if i + 1 < n { mid(i) } else { g[n - 1] };
        m.set(i, i, c((left + right) / (h * h)));
        if i + 1 < n {
            m.set(i, i + 1, c(-right / (h * h)));
        }
        if i > 0 {
            m.set(i, i - 1, c(-left / (h * h)));
        }
    }
    m
}

/// `−(i/2)(G∂ + ∂G)` for `G = diag(g)`, i.e. `Re(g p)`.
pub fn symmetrized_first_order(g: &[f64], h: f64) -> BandMatrix {
    let n = g.len();
    let mut m = BandMatrix::zeros(n, 1, 1);
    for i in 0..n {
        if i + 1 < n {
            m.set(i, i + 1, -I * (0.25 * (g[i] + g[i + 1]) / h));
        }
        if i > 0 {
            m.set(i, i - 1, I * (0.25 * (g[i] + g[i - 1]) / h));
        }
    }
    m
}

/// `A = Re p^f`. In radial mode this acts on `u = r^{(d−1)/2}φ`, where it
/// takes the same one-dimensional form.
pub fn build_conjugate_a(geom: &GeometryField) -> DiscreteOperator {
    DiscreteOperator {
        matrix: symmetrized_first_order(&geom.grad_f, geom.grid.spacing),
        grid: geom.grid.clone(),
        symmetry: Symmetry::Hermitian,
        label: "A".into(),
    }
}

/// `B = Re p^r`.
pub fn build_b(geom: &GeometryField) -> DiscreteOperator {
    DiscreteOperator {
        matrix: symmetrized_first_order(&geom.grad_r, geom.grid.spacing),
        grid: geom.grid.clone(),
        symmetry: Symmetry::Hermitian,
        label: "B".into(),
    }
}

/// `h·⟨ψ, Mψ⟩`.
pub fn form_value(m: &BandMatrix, psi: &[C64], h: f64) -> C64 {
    m.quad_form(psi) * h
}

/// Smooth compactly supported test function `exp(1 − 1/(1 − s²)) e^{ikx}`
/// with `s = (x − center)/width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    pub wavenumber: f64,
}

impl Bump {
    pub fn eval(&self, x: f64) -> C64 {
        let s = (x - self.center) / self.width;
        if s.abs() >= 1.0 {
            return C64::new(0.0, 0.0);
        }
        let env = (1.0 - 1.0 / (1.0 - s * s)).exp();
        C64::from_polar(env, self.wavenumber * x)
    }

    pub fn sample(&self, grid: &Grid) -> Vec<C64> {
        (0..grid.len()).map(|i| self.eval(grid.x(i))).collect()
    }

    /// Whether the support stays `margin` nodes inside the physical region.
    pub fn fits(&self, grid: &Grid, margin: usize) -> bool {
        let pad = margin as f64 * grid.spacing;
        let lo = match grid.mode {
            GridMode::Line1d => -grid.r_max + pad,
            GridMode::Radial => pad,
        };
        self.center - self.width >= lo && self.center + self.width <= grid.r_max - pad
    }
}

/// Stencil widths kept between a test vector and the interval ends.
pub const INTERIOR_MARGIN: usize = 5;

/// Random interior bumps with widths in `[w_lo, w_hi]` and wavenumbers in
/// `[−k_max, k_max]`.
pub fn random_bumps(grid: &Grid, count: usize, widths: (f64, f64), k_max: f64, seed: u64) -> Vec<Bump> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pad = INTERIOR_MARGIN as f64 * grid.spacing;
    let lo = match grid.mode {
        GridMode::Line1d => -grid.r_max,
        GridMode::Radial => 0.0,
    };
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let width = rng.gen_range(widths.0..=widths.1);
        let span = (lo + width + pad)..(grid.r_max - width - pad);
        if span.is_empty() {
            continue;
        }
        let b = Bump {
            center: rng.gen_range(span),
            width,
            wavenumber: rng.gen_range(-k_max..=k_max),
        };
        if b.fits(grid, INTERIOR_MARGIN) {
            out.push(b);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseSign {
    /// `z = λ + iΓ`, outgoing.
    Upper,
    /// `z = λ − iΓ`, incoming.
    Lower,
}

impl PhaseSign {
    pub fn of(z: C64) -> Self {
        if z.im < 0.0 {
            PhaseSign::Lower
        } else {
            PhaseSign::Upper
        }
    }

    pub fn sigma(self) -> f64 {
        match self {
            PhaseSign::Upper => 1.0,
            PhaseSign::Lower => -1.0,
        }
    }
}

/// Pointwise checks of the phase inequalities.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseBounds {
    /// `min (±Im a − (ε/2)|∇r|² r^{−ε/2−1})`.
    pub im_a_slack: f64,
    /// `min (±Im b − (ε/4)|∇r|² r^{−1})`.
    pub im_b_slack: f64,
    /// `min Re a` over `η_λ > 0`.
    pub re_a_min: f64,
    /// `sup |a|`.
    pub a_sup: f64,
    /// `sup |b| r^{−ε/2}`.
    pub b_sup: f64,
    /// `sup |(1 − η) ∂a|` over `r ≥ 2r₀`.
    pub ell_grad_a_far: f64,
}

impl PhaseBounds {
    pub fn hold(&self) -> bool {
        let tol = 1e-12;
        self.im_a_slack >= -tol && self.im_b_slack >= -tol && self.re_a_min >= -tol && self.ell_grad_a_far == 0.0
    }
}

/// `a_z`, `b_z` with their `x`-derivatives. The square root is the
/// principal branch, `Re√w > 0` off `(−∞, 0]`.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseField {
    pub z: C64,
    pub sign: PhaseSign,
    pub r_lambda: f64,
    pub eta_lambda: Vec<f64>,
    pub a: Vec<C64>,
    pub b: Vec<C64>,
    pub a_x: Vec<C64>,
    pub b_x: Vec<C64>,
    /// `±p^r b + b² − 2|∇r|²(z − q₁ + r^ε)`.
    pub eikonal_residual: Vec<C64>,
    /// Fitted `e` in `|residual| ~ f^{−e}`.
    pub eikonal_decay: f64,
    /// `sup |residual| f^{1 + min{ρ, ε′, τ}}` over the fit window.
    pub eikonal_constant: f64,
    pub bounds: PhaseBounds,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Nodes used for far-field decay fits: positive side, both cutoffs equal
/// to one, `f` in the upper part of the grid range.
fn far_field_nodes(geom: &GeometryField, r_lambda: f64) -> Vec<usize> {
    let r_min = (2.0 * r_lambda).max(2.0 * geometry::R0);
    let f_lo = (geom.f_max() / 16.0).max(geometry::flow(r_min, geom.epsilon));
    (0..geom.len())
        .filter(|&i| geom.grid.is_physical(i) && geom.x[i] > 0.0 && geom.r[i] >= r_min && geom.f[i] >= f_lo)
        .collect()
}

fn decay_fit(geom: &GeometryField, nodes: &[usize], values: &[C64], m: f64) -> (f64, f64) {
    let fs: Vec<f64> = nodes.iter().map(|&i| geom.f[i]).collect();
    let ys: Vec<f64> = nodes.iter().map(|&i| values[i].norm()).collect();
    let decay = -log_log_slope(&fs, &ys);
    let constant = fs.iter().zip(&ys).map(|(f, y)| y * f.powf(1.0 + m)).fold(0.0, f64::max);
    (decay, constant)
}

/// Phases for `z`, with the sign taken from `Im z` (upper for `Im z ≥ 0`).
pub fn build_phases(z: C64, spec: &PotentialSpec, geom: &GeometryField, r_lambda: f64) -> Result<PhaseField> {
    build_phases_signed(z, PhaseSign::of(z), spec, geom, r_lambda)
}

pub fn build_phases_signed(
    z: C64,
    sign: PhaseSign,
    spec: &PotentialSpec,
    geom: &GeometryField,
    r_lambda: f64,
) -> Result<PhaseField> {
    if sign.sigma() * z.im < 0.0 {
        return Err(Error::invalid("phase sign does not match the sign of Im z"));
    }
    let eps = geom.epsilon;
    let s = sign.sigma();
    let n = geom.len();
    let cutoff = geom.cutoff;
    let mut out = PhaseField {
        z,
        sign,
        r_lambda,
        eta_lambda: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        b: Vec::with_capacity(n),
        a_x: Vec::with_capacity(n),
        b_x: Vec::with_capacity(n),
        eikonal_residual: Vec::with_capacity(n),
        eikonal_decay: f64::NAN,
        eikonal_constant: f64::NAN,
        bounds: PhaseBounds {
            im_a_slack: f64::INFINITY,
            im_b_slack: f64::INFINITY,
            re_a_min: f64::INFINITY,
            a_sup: 0.0,
            b_sup: 0.0,
            ell_grad_a_far: 0.0,
        },
    };
    for i in 0..n {
        let (r, _) = geometry::geometry_jets(geom.x[i], eps, &cutoff);
        let el = Jet::constant(1.0) - geometry::cutoff_jet(r * (1.0 / r_lambda), &cutoff);
        let q1 = spec.q1_jet(geom, i);
        let re = r.powf(eps);
        let w = z - c(q1.v) + c(re.v);
        let w_x = -q1.d1 + re.d1;
        if el.v > 0.0 && w.im == 0.0 && w.re <= 0.0 {
            return Err(Error::BranchCut {
                x: geom.x[i],
                value: format!("{w}"),
            });
        }
        let (rx, rxx) = (r.d1, r.d2);
        let sgn = if rx < 0.0 { -1.0 } else { 1.0 };
        // amplitude η_λ|r_x| and its derivative
        let amp_b = el.v * rx.abs();
        let amp_b_x = el.d1 * rx.abs() + el.v * sgn * rxx;
        let rm = r.powf(-eps / 2.0);
        let amp_a = amp_b * rm.v;
        let amp_a_x = amp_b_x * rm.v + amp_b * rm.d1;
        let root = (w * 2.0).sqrt();
        let root_x = if root.norm() > 0.0 { w_x / root } else { C64::new(0.0, 0.0) };

        let rv = r.v;
        let ib = eps / 4.0 * rx * rx / rv;
        let ib_x = eps / 4.0 * (2.0 * rx * rxx / rv - rx * rx * rx / (rv * rv));
        let ia = eps / 2.0 * rx * rx * rv.powf(-eps / 2.0 - 1.0);
        let ia_x = eps / 2.0
            * (2.0 * rx * rxx * rv.powf(-eps / 2.0 - 1.0)
                + rx * rx * (-eps / 2.0 - 1.0) * rv.powf(-eps / 2.0 - 2.0) * rx);

        let a = root * amp_a + I * (s * ia);
        let b = root * amp_b + I * (s * ib);
        let a_x = root * amp_a_x + root_x * amp_a + I * (s * ia_x);
        let b_x = root * amp_b_x + root_x * amp_b + I * (s * ib_x);
        let pr_b = -I * rx * b_x;
        let res = pr_b * s + b * b - w * (2.0 * rx * rx);

        if geom.grid.is_physical(i) {
            let bd = &mut out.bounds;
            bd.im_a_slack = bd.im_a_slack.min(s * a.im - ia);
            bd.im_b_slack = bd.im_b_slack.min(s * b.im - ib);
            if el.v > 0.0 {
                bd.re_a_min = bd.re_a_min.min(a.re);
            }
            bd.a_sup = bd.a_sup.max(a.norm());
            bd.b_sup = bd.b_sup.max(b.norm() * rm.v);
            if rv >= 2.0 * geometry::R0 {
                bd.ell_grad_a_far = bd.ell_grad_a_far.max(((1.0 - geom.eta[i]) * a_x).norm());
            }
        }
        out.eta_lambda.push(el.v);
        out.a.push(a);
        out.b.push(b);
        out.a_x.push(a_x);
        out.b_x.push(b_x);
        out.eikonal_residual.push(res);
    }
    let nodes = far_field_nodes(geom, r_lambda);
    let (decay, constant) = decay_fit(geom, &nodes, &out.eikonal_residual, spec.decay_min());
    out.eikonal_decay = decay;
    out.eikonal_constant = constant;
    Ok(out)
}

/// Discrepancy of one identity over a family of test vectors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    /// `max_ψ |h⟨ψ, (brute − analytic)ψ⟩|`.
    pub absolute: f64,
    /// `absolute / max_ψ |h⟨ψ, analytic ψ⟩|`.
    pub relative: f64,
}

fn identity_check(name: &str, brute: &BandMatrix, analytic: &BandMatrix, vectors: &[Vec<C64>], h: f64) -> IdentityCheck {
    let diff = brute.sub(analytic);
    let mut abs: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for v in vectors {
        abs = abs.max(form_value(&diff, v, h).norm());
        scale = scale.max(form_value(analytic, v, h).norm());
    }
    IdentityCheck {
        name: name.into(),
        absolute: abs,
        relative: if scale > 0.0 { abs / scale } else { abs },
    }
}

/// Weighted commutator in both assemblies, plus the auxiliary multipliers
/// of the probes and the factorization.
#[derive(Debug, Clone)]
pub struct CommutatorForm {
    pub theta: Option<ThetaWeight>,
    pub beta: f64,
    pub matrix_bruteforce: BandMatrix,
    pub matrix_analytic: BandMatrix,
    pub gamma: Vec<C64>,
    pub q3: Vec<C64>,
    pub q0: Vec<C64>,
    /// First entry compares the two matrices above; the rest are the
    /// companion identities.
    pub checks: Vec<IdentityCheck>,
    /// `sup |q₃| f^{1 + min{ρ, ε′, τ}}` over the far field (factorization only).
    pub q3_constant: Option<f64>,
    pub q3_decay: Option<f64>,
}

impl CommutatorForm {
    pub fn check(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn require_line(geom: &GeometryField) -> Result<()> {
    if geom.grid.mode != GridMode::Line1d {
        return Err(Error::invalid("identity checks are implemented for line-1d grids"));
    }
    if geom.grid.absorb_width > 0.0 {
        return Err(Error::invalid("identity checks need a grid without absorbing layer"));
    }
    Ok(())
}

/// `[Θ, Θ′, Θ″, Θ‴]` per node, or the constant weight.
fn theta_columns(theta: Option<&ThetaWeight>, n: usize) -> [Vec<f64>; 4] {
    match theta {
        Some(t) => [t.values.clone(), t.d1.clone(), t.d2.clone(), t.d3.clone()],
        None => [vec![1.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
    }
}

fn diag(v: impl Iterator<Item = C64>) -> BandMatrix {
    BandMatrix::diagonal(&v.collect::<Vec<_>>())
}

/// Term-by-term assembly of `[H, iA]_Θ` in one dimension.
fn analytic_commutator(spec: &PotentialSpec, geom: &GeometryField, th: &[Vec<f64>; 4], hmat: &BandMatrix) -> BandMatrix {
    let n = geom.len();
    let h = geom.grid.spacing;
    let eps = geom.epsilon;
    let (fp, fpp) = (&geom.grad_f, &geom.f_xx);
    let [t0, t1, t2, t3] = th;
    let p = momentum(n, h);
    let p2 = divergence_form(&vec![1.0; n], h);

    let g: Vec<f64> = (0..n).map(|i| 0.5 * fpp[i] * t0[i] + fp[i] * fp[i] * t1[i]).collect();
    let mut m = divergence_form(&g, h);

    let d3 = diag((0..n).map(|i| c(fpp[i] * t0[i])));
    m = m.add(&d3.matmul(&p2).hermitian_part().scaled(c(0.5)));

    let d5 = diag((0..n).map(|i| c(2.0 * fp[i] * fpp[i] * t1[i])));
    m = m.sub(&d5.matmul(&p).anti_hermitian_part().scaled(c(0.5)));

    let d6 = diag((0..n).map(|i| c(2.0 * spec.q2_at(geom, i) * t0[i] * fp[i])));
    m = m.sub(&d6.matmul(&p).anti_hermitian_part());

    let d7 = diag((0..n).map(|i| c(fp[i] * fp[i] * t1[i])));
    m = m.sub(&d7.matmul(hmat).hermitian_part());

    let pot: Vec<C64> = (0..n)
        .map(|i| {
            let x = geom.x[i];
            let xe_x = if x == 0.0 { 0.0 } else { eps * x.abs().powf(eps - 1.0) * x.signum() };
            let q1p = spec.q1_jet(geom, i).d1;
            let q2 = spec.q2_at(geom, i);
            let f1 = fp[i];
            let f2 = fpp[i];
            let q_theta = -f1 * q1p * t0[i] + q2 * f2 * t0[i] + f1 * f1 * q2 * t1[i]
                - 0.25 * f1 * (2.0 * f1 * f2) * t2[i]
                - 0.25 * f1 * f1 * f2 * t2[i];
            c(f1 * xe_x * t0[i] + q_theta - 0.25 * f1.powi(4) * t3[i])
        })
        .collect();
    m.add(&BandMatrix::diagonal(&pot))
}

/// `i(XY − YX)`.
fn i_commutator(x: &BandMatrix, y: &BandMatrix) -> BandMatrix {
    x.matmul(y).sub(&y.matmul(x)).scaled(I)
}

/// Brute-force vs analytic `[H, iA]_Θ`, the `[p g̃ p, iA]` identity with
/// `g̃ = Θ^{2β}ℓ`, and `i[H, χ_n] = Re(χ_n′ A)` with `n = ν`.
pub fn commutator_identity_check(
    spec: &PotentialSpec,
    geom: &GeometryField,
    theta: Option<&ThetaWeight>,
    beta: f64,
    bumps: &[Bump],
) -> Result<CommutatorForm> {
    require_line(geom)?;
    let n = geom.len();
    let h = geom.grid.spacing;
    let hmat = model::build_hamiltonian(spec, geom)?.matrix;
    let a = build_conjugate_a(geom).matrix;
    let th = theta_columns(theta, n);
    let vectors: Vec<Vec<C64>> = bumps
        .iter()
        .filter(|b| b.fits(&geom.grid, INTERIOR_MARGIN))
        .map(|b| b.sample(&geom.grid))
        .collect();
    if vectors.is_empty() {
        return Err(Error::invalid("no test bump fits inside the grid"));
    }

    let theta_c: Vec<C64> = th[0].iter().map(|&v| c(v)).collect();
    let x = hmat.right_scaled(&theta_c).matmul(&a);
    let brute = x.sub(&x.adjoint()).scaled(I);
    let analytic = analytic_commutator(spec, geom, &th, &hmat);
    let mut checks = vec![identity_check("weighted-commutator", &brute, &analytic, &vectors, h)];

    // [p g̃ p, iA] = p(2g̃f″ − f′g̃′)p − Im(g̃ (Δf)′ p)
    let (fp, fpp) = (&geom.grad_f, &geom.f_xx);
    let gt: Vec<f64> = (0..n).map(|i| th[0][i].powf(2.0 * beta) * geom.ell[i]).collect();
    let gt_x: Vec<f64> = (0..n)
        .map(|i| {
            let t = th[0][i];
            let dt = if beta == 0.0 { 0.0 } else { 2.0 * beta * t.powf(2.0 * beta - 1.0) * th[1][i] * fp[i] };
            dt * geom.ell[i] - t.powf(2.0 * beta) * geom.grad_eta[i]
        })
        .collect();
    let pgp = divergence_form(&gt, h);
    let brute_g = i_commutator(&pgp, &a);
    let inner: Vec<f64> = (0..n).map(|i| 2.0 * gt[i] * fpp[i] - fp[i] * gt_x[i]).collect();
    let tail = diag((0..n).map(|i| c(gt[i] * geom.grad_lap_f[i]))).matmul(&momentum(n, h));
    let analytic_g = divergence_form(&inner, h).sub(&tail.anti_hermitian_part());
    checks.push(identity_check("gtilde-commutator", &brute_g, &analytic_g, &vectors, h));

    // i[H, χ_n] = Re(χ_n′ A), χ_n = χ(f/R_n)
    let r_n = theta.map(|t| t.r_nu).unwrap_or(1.0);
    let (chi, chi_p): (Vec<C64>, Vec<C64>) = geom
        .f
        .iter()
        .map(|&f| {
            let j = geometry::cutoff_jet(Jet::variable(f / r_n), &geom.cutoff);
            (c(j.v), c(j.d1 / r_n))
        })
        .unzip();
    let brute_chi = hmat.right_scaled(&chi).sub(&hmat.left_scaled(&chi)).scaled(I);
    let analytic_chi = BandMatrix::diagonal(&chi_p).matmul(&a).hermitian_part();
    checks.push(identity_check("cutoff-commutator", &brute_chi, &analytic_chi, &vectors, h));

    Ok(CommutatorForm {
        theta: theta.cloned(),
        beta,
        matrix_bruteforce: brute,
        matrix_analytic: analytic,
        gamma: Vec::new(),
        q3: Vec::new(),
        q0: Vec::new(),
        checks,
        q3_constant: None,
        q3_decay: None,
    })
}

/// Discrepancies of every identity over a sequence of spacings and their
/// fitted convergence orders.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementReport {
    pub spacings: Vec<f64>,
    /// `(name, absolute discrepancy per spacing, fitted order)`.
    pub identities: Vec<(String, Vec<f64>, f64)>,
}

/// Repeats `commutator_identity_check` on refined copies of `grid` with the
/// same continuous test bumps.
pub fn commutator_refinement(
    spec: &PotentialSpec,
    grid: &Grid,
    theta: Option<(usize, f64)>,
    beta: f64,
    spacings: &[f64],
    bumps: &[Bump],
) -> Result<RefinementReport> {
    let mut table: Vec<(String, Vec<f64>)> = Vec::new();
    for &h in spacings {
        let g = grid.with_spacing(h)?;
        let geom = geometry::build_geometry(&g, spec.epsilon, spec.rho)?;
        let tw = theta.map(|(nu, delta)| geometry::theta_weight(&geom, nu, delta));
        let form = commutator_identity_check(spec, &geom, tw.as_ref(), beta, bumps)?;
        for chk in form.checks {
            match table.iter_mut().find(|(n, _)| *n == chk.name) {
                Some((_, v)) => v.push(chk.absolute),
                None => table.push((chk.name, vec![chk.absolute])),
            }
        }
    }
    Ok(RefinementReport {
        spacings: spacings.to_vec(),
        identities: table
            .into_iter()
            .map(|(name, d)| {
                let order = log_log_slope(spacings, &d);
                (name, d, order)
            })
            .collect(),
    })
}

/// `q₀` and `q₃` of the factorization at every node.
pub fn factorization_remainder(
    z: C64,
    spec: &PotentialSpec,
    geom: &GeometryField,
    phases: &PhaseField,
) -> (Vec<C64>, Vec<C64>) {
    let eps = geom.epsilon;
    (0..geom.len())
        .map(|i| {
            let rx = geom.grad_r[i];
            let eta = geom.eta[i];
            let et = geom.eta_tilde(i);
            let et_x = if eta == 0.0 {
                0.0
            } else {
                geom.grad_eta[i] / (rx * rx) - 2.0 * eta * geom.r_xx[i] / (rx * rx * rx)
            };
            let gr_et = rx * et_x;
            let lap_r = geom.lap_r[i];
            let q0 = 0.25 * gr_et * lap_r + 0.25 * et * rx * geom.grad_lap_r[i] + 0.125 * et * lap_r * lap_r;
            let re = geom.r[i].powf(eps);
            let w = z - c(spec.q1.eval_f64(geom.r[i], geom.f[i])) + c(re);
            let b = phases.b[i];
            let pr_b = -I * rx * phases.b_x[i];
            let q3 = (pr_b + b * b - w * (2.0 * rx * rx)) * (0.5 * et) - w * (1.0 - eta) - I * (0.5 * gr_et) * b
                + c(re - geom.x[i].abs().powf(eps) + q0 + spec.q2_at(geom, i));
            (c(q0), q3)
        })
        .unzip()
}

/// Applies `H − z` and `½(B + b)η̃(B − b) + ½pℓp + q₃` to interior bumps.
/// The first check reports the worst relative action mismatch
/// `‖(L − R)ψ‖/‖Lψ‖`.
pub fn factorization_check(
    z: C64,
    spec: &PotentialSpec,
    geom: &GeometryField,
    phases: &PhaseField,
    bumps: &[Bump],
) -> Result<CommutatorForm> {
    require_line(geom)?;
    let n = geom.len();
    let h = geom.grid.spacing;
    let lhs = model::build_hamiltonian(spec, geom)?.matrix.shifted(z);
    let (q0, q3) = factorization_remainder(z, spec, geom, phases);
    let bop = build_b(geom).matrix;
    let bdiag = BandMatrix::diagonal(&phases.b);
    let et: Vec<C64> = (0..n).map(|i| c(geom.eta_tilde(i))).collect();
    let rhs = bop
        .add(&bdiag)
        .right_scaled(&et)
        .matmul(&bop.sub(&bdiag))
        .scaled(c(0.5))
        .add(&divergence_form(&geom.ell, h).scaled(c(0.5)))
        .add(&BandMatrix::diagonal(&q3));
    let mut worst: f64 = 0.0;
    let mut worst_abs: f64 = 0.0;
    for b in bumps.iter().filter(|b| b.fits(&geom.grid, INTERIOR_MARGIN)) {
        let v = b.sample(&geom.grid);
        let l = lhs.matvec(&v);
        let r = rhs.matvec(&v);
        let diff: f64 = l.iter().zip(&r).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        let base: f64 = l.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        worst_abs = worst_abs.max(diff * h.sqrt());
        if base > 0.0 {
            worst = worst.max(diff / base);
        }
    }
    let nodes = far_field_nodes(geom, phases.r_lambda);
    let (decay, constant) = decay_fit(geom, &nodes, &q3, spec.decay_min());
    Ok(CommutatorForm {
        theta: None,
        beta: 0.0,
        matrix_bruteforce: lhs,
        matrix_analytic: rhs,
        gamma: Vec::new(),
        q3,
        q0,
        checks: vec![IdentityCheck {
            name: "factorization".into(),
            absolute: worst_abs,
            relative: worst,
        }],
        q3_constant: Some(constant),
        q3_decay: Some(decay),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_geometry;

    fn line_geom(h: f64, r: f64, eps: f64) -> GeometryField {
        build_geometry(&Grid::line(h, r).unwrap(), eps, 1.0).unwrap()
    }

    #[test]
    fn conjugate_operators_are_hermitian() {
        let g = line_geom(1.0 / 16.0, 30.0, 1.0);
        let a = build_conjugate_a(&g).matrix;
        let b = build_b(&g).matrix;
        assert!(a.hermiticity_defect() < 1e-12);
        assert!(b.hermiticity_defect() < 1e-12);
        let psi: Vec<C64> = (0..g.len()).map(|i| c((-(g.x[i] - 10.0).powi(2) / 4.0).exp())).collect();
        assert!(a.quad_form(&psi).norm() < 1e-10);
        assert!(b.quad_form(&psi).norm() < 1e-10);
    }

    /// `Re p^f ψ = −i f′ψ′ − (i/2) f″ψ` for `ψ = e^{if}·bump`, evaluated with
    /// exact derivatives of the smooth bump.
    fn exact_a_action(geom: &GeometryField, bump: &Bump, i: usize) -> C64 {
        let x = geom.x[i];
        let s = (x - bump.center) / bump.width;
        if s.abs() >= 1.0 {
            return C64::new(0.0, 0.0);
        }
        let env = (1.0 - 1.0 / (1.0 - s * s)).exp();
        let env_x = env * (-2.0 * s / (1.0 - s * s).powi(2)) / bump.width;
        let ph = C64::from_polar(1.0, geom.f[i]);
        let psi_x = (env_x + I * geom.grad_f[i] * env) * ph;
        -I * geom.grad_f[i] * psi_x - I * 0.5 * geom.f_xx[i] * env * ph
    }

    #[test]
    fn conjugate_a_matches_analytic_action() {
        let bump = Bump { center: 12.0, width: 4.0, wavenumber: 0.0 };
        let mut errs = Vec::new();
        for h in [1.0 / 16.0, 1.0 / 32.0] {
            let g = line_geom(h, 20.0, 1.0);
            let a = build_conjugate_a(&g).matrix;
            let psi: Vec<C64> = (0..g.len()).map(|i| bump.eval(g.x[i]) * C64::from_polar(1.0, g.f[i])).collect();
            let got = a.matvec(&psi);
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..g.len() {
                let want = exact_a_action(&g, &bump, i);
                num += (got[i] - want).norm_sqr();
                den += want.norm_sqr();
            }
            errs.push((num / den).sqrt());
        }
        assert!(errs[0] < 1e-2, "{errs:?}");
        let order = (errs[0] / errs[1]).log2();
        assert!((order - 2.0).abs() < 0.3, "order {order}");
    }

    #[test]
    fn a_is_r_weighted_b_far_out() {
        // ∇f = r^{−ε/2}∇r, so A = Re(r^{−ε/2} p^r) where r ≥ 2.
        let g = line_geom(1.0 / 32.0, 30.0, 1.0);
        let n = g.len();
        let a = build_conjugate_a(&g).matrix;
        let w: Vec<f64> = (0..n).map(|i| g.r[i].powf(-0.5) * g.grad_r[i]).collect();
        let alt = symmetrized_first_order(&w, g.grid.spacing);
        let bump = Bump { center: 15.0, width: 5.0, wavenumber: 1.0 };
        let psi = bump.sample(&g.grid);
        let d: f64 = a.sub(&alt).matvec(&psi).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn phase_limits_and_inner_region() {
        let spec = PotentialSpec::free(1.0);
        let g = line_geom(1.0 / 16.0, 400.0, 1.0);
        let rl = model::select_r_lambda(&spec, 1.0, &g).unwrap();
        let ph = build_phases(C64::new(1.0, 0.0), &spec, &g, rl).unwrap();
        assert!(ph.bounds.hold(), "{:?}", ph.bounds);
        let last = g.len() - 1;
        assert!((ph.a[last].re - 2f64.sqrt()).abs() < 0.02, "{}", ph.a[last]);
        let mid = g.len() / 2;
        assert_eq!(ph.eta_lambda[mid], 0.0);
        assert_eq!(ph.a[mid].re, 0.0);
        let want = 0.5 * g.grad_r[mid].powi(2) * g.r[mid].powf(-1.5);
        assert!((ph.a[mid].im - want).abs() < 1e-15);
        assert!(ph.eikonal_decay >= 1.9, "decay {}", ph.eikonal_decay);
    }

    #[test]
    fn phases_are_conjugate_symmetric() {
        let spec = PotentialSpec::reference();
        let g = line_geom(1.0 / 16.0, 100.0, 1.0);
        let rl = model::select_r_lambda(&spec, 1.3, &g).unwrap();
        let z = C64::new(1.3, 0.05);
        let up = build_phases(z, &spec, &g, rl).unwrap();
        let down = build_phases(z.conj(), &spec, &g, rl).unwrap();
        for i in 0..g.len() {
            assert!((up.a[i].conj() - down.a[i]).norm() < 1e-14);
            assert!((up.eikonal_residual[i].conj() - down.eikonal_residual[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn commutator_assemblies_agree() {
        let spec = PotentialSpec::reference();
        let grid = Grid::line(1.0 / 16.0, 40.0).unwrap();
        let bumps = random_bumps(&grid, 16, (1.0, 4.0), 1.5, 7);
        let rep = commutator_refinement(&spec, &grid, Some((2, 0.5)), 0.75, &[1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0], &bumps)
            .unwrap();
        for (name, d, order) in &rep.identities {
            assert!((order - 2.0).abs() < 0.3, "{name}: {d:?} order {order}");
        }
    }

    #[test]
    fn constant_weight_reduces_to_plain_commutator() {
        let spec = PotentialSpec::free(1.0);
        let g = line_geom(1.0 / 32.0, 30.0, 1.0);
        let bumps = random_bumps(&g.grid, 8, (1.0, 3.0), 1.0, 3);
        let form = commutator_identity_check(&spec, &g, None, 0.0, &bumps).unwrap();
        assert!(form.checks[0].relative < 1e-2, "{:?}", form.checks[0]);
    }

    #[test]
    fn factorization_holds_on_bumps() {
        let spec = PotentialSpec::free(1.0);
        let g = line_geom(1.0 / 64.0, 300.0, 1.0);
        let z = C64::new(1.0, 0.1);
        let rl = model::select_r_lambda(&spec, 1.0, &g).unwrap();
        let ph = build_phases(z, &spec, &g, rl).unwrap();
        let bumps = random_bumps(&g.grid, 20, (2.0, 6.0), 0.5, 11);
        let form = factorization_check(z, &spec, &g, &ph, &bumps).unwrap();
        assert!(form.checks[0].relative < 1e-3, "{:?}", form.checks[0]);
        assert!(form.q3_decay.unwrap() >= 1.9, "{:?}", form.q3_decay);
        // 1D: q₀ vanishes wherever η > 0, and ℓ = 0 beyond 2r₀.
        for i in 0..g.len() {
            if g.eta[i] > 0.0 {
                assert!(form.q0[i].norm() < 1e-12);
            }
            if g.r[i] >= 2.0 * geometry::R0 {
                assert_eq!(g.ell[i], 0.0);
            }
        }
    }
}
