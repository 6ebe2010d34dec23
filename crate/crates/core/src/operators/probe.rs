//! Rayleigh-quotient probes of the two commutator lower bounds.
//!
//! Every piece of a form difference is projected once onto a family of
//! compactly supported interior vectors. The constants are then searched on
//! the small projected Hermitian pencils: the minimal eigenvalue of an
//! affine family of Hermitian matrices is concave in the coefficients, so
//! coordinate ascent over the free multipliers is reliable.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{build_conjugate_a, divergence_form, INTERIOR_MARGIN};
use crate::band::{BandMatrix, C64};
use crate::error::{Error, Result};
use crate::geometry::{self, GeometryField, ThetaWeight};
use crate::grid::GridMode;
use crate::jet::Jet;
use crate::model::{self, PotentialSpec};

fn c(v: f64) -> C64 {
    C64::new(v, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeLemma {
    /// `Im(AΘ(H−z)) ≥ cΘ′ + cAΘ′A + c pΘhp − Cχ_n²Θ − Re(γ(H−z))`.
    Mourre,
    /// `Im((A−a)*Θ^{2β}(H−z)) ≥ c(A−ā)Θ′Θ^{2β−1}(A−a) + c pΘ^{2β}hp − C f^{−1−2m+2δ}Θ^{2β} − Re(γΘ^{2β}(H−z))`.
    Weighted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub lemma: ProbeLemma,
    pub z: C64,
    pub nu: usize,
    pub delta: f64,
    pub beta: f64,
    pub n_random: usize,
    pub n_wkb: usize,
    pub seed: u64,
    /// Relative tolerance against the spectral radius of the projected left side.
    pub tolerance: f64,
    /// Candidate `c`, tried in decreasing order.
    pub c_grid: Vec<f64>,
    /// Candidate `C`, tried in increasing order.
    pub big_c_grid: Vec<f64>,
    /// Upper end of the box `[0, b]` for the free multipliers inside `γ`.
    pub multiplier_bound: f64,
    /// Further spectral parameters the same constants must cover.
    pub uniform_in: Vec<C64>,
}

impl ProbeOptions {
    pub fn new(lemma: ProbeLemma, z: C64, nu: usize, delta: f64, beta: f64) -> Self {
        Self {
            lemma,
            z,
            nu,
            delta,
            beta,
            n_random: 160,
            n_wkb: 80,
            seed: 0x5eed,
            tolerance: 1e-6,
            c_grid: vec![0.1, 0.03, 0.01, 0.003, 0.001],
            big_c_grid: vec![0.0, 1.0, 10.0, 100.0, 1000.0],
            multiplier_bound: 20.0,
            uniform_in: vec![C64::new(z.re, 0.01), C64::new(z.re, 0.001)],
        }
    }
}

/// Outcome of a probe. `n_cut` is the cutoff index of `χ_n` (Mourre variant only).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    pub lemma: ProbeLemma,
    pub z: [f64; 2],
    pub nu: usize,
    pub delta: f64,
    pub beta: f64,
    pub c: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    pub n_cut: Option<usize>,
    /// Values of the free multipliers inside `γ`.
    pub multipliers: Vec<f64>,
    pub min_rayleigh: f64,
    pub form_scale: f64,
    pub n_samples: usize,
    /// Dimension of the sampled space after removing near-dependencies.
    pub rank: usize,
    pub passed: bool,
}

#[derive(Debug, Clone)]
struct SparseVec {
    start: usize,
    values: Vec<C64>,
}

impl SparseVec {
    fn end(&self) -> usize {
        self.start + self.values.len()
    }
}

/// Interior test vectors stored by support.
#[derive(Debug, Clone)]
pub struct TestSpace {
    vectors: Vec<SparseVec>,
    n: usize,
    h: f64,
}

impl TestSpace {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Random smooth bumps (half centred uniformly in `x`, half uniformly
    /// in `f`) plus bumps modulated by the outgoing and incoming local
    /// phases `e^{±i∫k}` with `k = Re√(2(λ − q₁ + r^ε))`.
    pub fn sample(spec: &PotentialSpec, geom: &GeometryField, z: C64, n_random: usize, n_wkb: usize, seed: u64) -> Self {
        let grid = &geom.grid;
        let n = grid.len();
        let h = grid.spacing;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pad = (INTERIOR_MARGIN + 1) as f64 * h;
        let phase = cumulative_phase(spec, geom, z.re);
        let origin = match grid.mode {
            GridMode::Line1d => -(grid.r_max + grid.absorb_width),
            GridMode::Radial => 0.0,
        };
        let lo = match grid.mode {
            GridMode::Line1d => -grid.r_max,
            GridMode::Radial => 0.0,
        };
        let f_max = geom.f_max();
        let mut vectors = Vec::with_capacity(n_random + n_wkb);
        let mut k = 0usize;
        while vectors.len() < n_random + n_wkb {
            k += 1;
            let width = rng.gen_range(0.5f64..6.0);
            let center = if k % 2 == 0 {
                rng.gen_range(lo..grid.r_max)
            } else {
                let r = geometry::flow_inverse(rng.gen_range(1.0..f_max), geom.epsilon);
                let side = if grid.mode == GridMode::Line1d && rng.gen_bool(0.5) { -1.0 } else { 1.0 };
                side * r
            };
            if center - width < lo + pad || center + width > grid.r_max - pad {
                continue;
            }
            let i0 = (((center - width - origin) / h).ceil() as usize).saturating_sub(1);
            let i1 = ((((center + width - origin) / h).floor() as usize).saturating_sub(1)).min(n - 1);
            let wkb = vectors.len() >= n_random;
            let dir = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let k0 = rng.gen_range(-1.0..1.0);
            let values: Vec<C64> = (i0..=i1)
                .map(|i| {
                    let s = (grid.x(i) - center) / width;
                    let env = if s.abs() < 1.0 { (1.0 - 1.0 / (1.0 - s * s)).exp() } else { 0.0 };
                    let ph = if wkb { dir * phase[i] } else { k0 * grid.x(i) };
                    C64::from_polar(env, ph)
                })
                .collect();
            vectors.push(SparseVec { start: i0, values });
        }
        Self { vectors, n, h }
    }

    /// `P_ij = h⟨v_i, M v_j⟩`.
    pub fn project(&self, m: &BandMatrix) -> DMatrix<C64> {
        assert_eq!(m.n(), self.n);
        let kl = m.lower_bandwidth();
        let ku = m.upper_bandwidth();
        let images: Vec<SparseVec> = self
            .vectors
            .iter()
            .map(|v| {
                let lo = v.start.saturating_sub(ku);
                let hi = (v.end() + kl).min(self.n);
                let values = (lo..hi)
                    .map(|i| {
                        let j0 = i.saturating_sub(kl).max(v.start);
                        let j1 = (i + ku + 1).min(v.end());
                        (j0..j1).map(|j| m.get(i, j) * v.values[j - v.start]).sum()
                    })
                    .collect();
                SparseVec { start: lo, values }
            })
            .collect();
        let k = self.vectors.len();
        DMatrix::from_fn(k, k, |i, j| sparse_dot(&self.vectors[i], &images[j]) * self.h)
    }

    pub fn gram(&self) -> DMatrix<C64> {
        let k = self.vectors.len();
        DMatrix::from_fn(k, k, |i, j| sparse_dot(&self.vectors[i], &self.vectors[j]) * self.h)
    }

    /// `T` with `T†GT = I` on the numerically independent part of the span.
    fn whitening(&self) -> DMatrix<C64> {
        let g = self.gram();
        let dim = g.nrows();
        let eig = g.symmetric_eigen();
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] > 1e-10 * top).collect();
        DMatrix::from_fn(dim, keep.len(), |r, k| {
            eig.eigenvectors[(r, keep[k])] / eig.eigenvalues[keep[k]].sqrt()
        })
    }
}

fn sparse_dot(a: &SparseVec, b: &SparseVec) -> C64 {
    let lo = a.start.max(b.start);
    let hi = a.end().min(b.end());
    (lo..hi).map(|i| a.values[i - a.start].conj() * b.values[i - b.start]).sum()
}

/// `K(x) = ∫ k` from the origin outward, signed so that `e^{iK}` is outgoing
/// on both sides of the line.
fn cumulative_phase(spec: &PotentialSpec, geom: &GeometryField, lambda: f64) -> Vec<f64> {
    let n = geom.len();
    let h = geom.grid.spacing;
    let k: Vec<f64> = (0..n)
        .map(|i| {
            let w = lambda - spec.q1.eval_f64(geom.r[i], geom.f[i]) + geom.r[i].powf(geom.epsilon);
            (2.0 * w).max(0.0).sqrt()
        })
        .collect();
    let start = match geom.grid.mode {
        GridMode::Line1d => (0..n).min_by(|&a, &b| geom.x[a].abs().total_cmp(&geom.x[b].abs())).unwrap_or(0),
        GridMode::Radial => 0,
    };
    let mut out = vec![0.0; n];
    for i in start + 1..n {
        out[i] = out[i - 1] + 0.5 * h * (k[i] + k[i - 1]);
    }
    for i in (0..start).rev() {
        out[i] = out[i + 1] + 0.5 * h * (k[i] + k[i + 1]);
    }
    out
}

/// Smallest eigenvalue of a Hermitian matrix.
fn min_eig(m: &DMatrix<C64>) -> f64 {
    let herm = (m + m.adjoint()) * c(0.5);
    herm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

fn spectral_radius(m: &DMatrix<C64>) -> f64 {
    let herm = (m + m.adjoint()) * c(0.5);
    herm.symmetric_eigenvalues().iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Whitened pieces of `LHS − RHS = L − cP + C X + Σ κ_k Y_k`.
#[derive(Clone)]
struct Pencil {
    l: DMatrix<C64>,
    p: DMatrix<C64>,
    x: DMatrix<C64>,
    y: Vec<DMatrix<C64>>,
    /// Spectral radius of the projected left side.
    scale: f64,
}

impl Pencil {
    fn eval(&self, cc: f64, big_c: f64, kappa: &[f64]) -> f64 {
        let mut m = &self.l - &self.p * c(cc) + &self.x * c(big_c);
        for (y, &k) in self.y.iter().zip(kappa) {
            m += y * c(k);
        }
        min_eig(&m)
    }
}

/// Worst normalized quotient over the family; the constants are shared.
fn family_eval(fam: &[Pencil], cc: f64, big_c: f64, kappa: &[f64]) -> f64 {
    fam.iter()
        .map(|p| p.eval(cc, big_c, kappa) / p.scale)
        .fold(f64::INFINITY, f64::min)
}

/// Maximizes the (concave) normalized minimal eigenvalue over
/// `κ ∈ [0, b]^k`: box corners first, then coordinate-wise golden section
/// from the best corner.
fn best_multipliers(fam: &[Pencil], cc: f64, big_c: f64, bound: f64) -> (Vec<f64>, f64) {
    let dims = fam[0].y.len();
    let mut kappa = vec![0.0; dims];
    let mut best = family_eval(fam, cc, big_c, &kappa);
    for mask in 1..(1usize << dims) {
        let corner: Vec<f64> = (0..dims).map(|k| if mask >> k & 1 == 1 { bound } else { 0.0 }).collect();
        let v = family_eval(fam, cc, big_c, &corner);
        if v > best {
            best = v;
            kappa = corner;
        }
    }
    if best >= 0.0 {
        return (kappa, best);
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..2 {
        for k in 0..dims {
            let mut trial = kappa.clone();
            let mut eval = |t: f64| {
                trial[k] = t;
                family_eval(fam, cc, big_c, &trial)
            };
            let (mut a, mut b) = (0.0, bound);
            let mut x1 = b - g * (b - a);
            let mut x2 = a + g * (b - a);
            let mut f1 = eval(x1);
            let mut f2 = eval(x2);
            for _ in 0..14 {
                if f1 < f2 {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + g * (b - a);
                    f2 = eval(x2);
                } else {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - g * (b - a);
                    f1 = eval(x1);
                }
            }
            let (t, v) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
            if v > best {
                best = v;
                kappa[k] = t;
            }
        }
    }
    (kappa, best)
}

fn whiten(t: &DMatrix<C64>, m: &DMatrix<C64>) -> DMatrix<C64> {
    t.adjoint() * m * t
}

/// Largest `n` with `R_{n+1} ≤ f_max/8`, so `χ_n` leaves a far region.
fn n_cut_max(geom: &GeometryField) -> usize {
    let lim = geom.f_max() / 8.0;
    (0..64).take_while(|&n| 2f64.powi(n as i32 + 1) <= lim).last().unwrap_or(0)
}

/// Projected pieces for the lemma. For the Mourre variant the χ_n term depends on `n`
/// so the closure rebuilds `X` per cutoff index.
fn assemble(
    spec: &PotentialSpec,
    geom: &GeometryField,
    theta: &ThetaWeight,
    opts: &ProbeOptions,
    space: &TestSpace,
    t: &DMatrix<C64>,
    z: C64,
    n_cuts: &[usize],
) -> Result<Vec<Pencil>> {
    let n = geom.len();
    let h = geom.grid.spacing;
    let eps = geom.epsilon;
    let gamma = z.im;
    let hz = model::build_hamiltonian(spec, geom)?.matrix.shifted(z);
    let a = build_conjugate_a(geom).matrix;
    let th = &theta.values;
    let th1 = &theta.d1;
    let diag = |v: Vec<C64>| BandMatrix::diagonal(&v);
    let re_hz = |g: Vec<C64>| diag(g).matmul(&hz).hermitian_part();
    let proj = |m: &BandMatrix| whiten(t, &space.project(m));
    let rm: Vec<f64> = geom.r.iter().map(|r| r.powf(-eps)).collect();
    match opts.lemma {
        ProbeLemma::Mourre => {
            let m = spec.decay_min().min(1.0);
            let left = a.right_scaled(&th.iter().map(|&v| c(v)).collect::<Vec<_>>()).matmul(&hz).anti_hermitian_part();
            let g0: Vec<C64> = (0..n)
                .map(|i| {
                    let fp2 = geom.grad_f[i] * geom.grad_f[i];
                    c(0.5 * (fp2 - rm[i]) * th1[i] + 0.5 * eps * geom.r[i].powf(-eps / 2.0 - 1.0) * th[i])
                })
                .collect();
            let l_full = left.add(&re_hz(g0));
            let th1c: Vec<C64> = th1.iter().map(|&v| c(v)).collect();
            let p_op = BandMatrix::diagonal(&th1c)
                .add(&a.right_scaled(&th1c).matmul(&a))
                .add(&divergence_form(&(0..n).map(|i| geom.h[i] * th[i]).collect::<Vec<_>>(), h));
            let x_of = |n_cut: usize| {
                let r_n = 2f64.powi(n_cut as i32);
                diag(
                    (0..n)
                        .map(|i| {
                            let chi = geometry::cutoff_jet(Jet::constant(geom.f[i] / r_n), &geom.cutoff).v;
                            c(chi * chi * th[i])
                        })
                        .collect(),
                )
            };
            let y4 = re_hz((0..n).map(|i| c(gamma * rm[i] * th[i])).collect());
            let y5 = BandMatrix::identity(n).scaled(c(gamma));
            let y7 = re_hz((0..n).map(|i| c(-2.0 * rm[i] * geom.f[i].powf(-1.0 - m) * th[i])).collect());
            let base = Pencil {
                scale: spectral_radius(&proj(&left)),
                l: proj(&l_full),
                p: proj(&p_op),
                x: DMatrix::zeros(0, 0),
                y: vec![proj(&y4), proj(&y5), proj(&y7)],
            };
            Ok(n_cuts
                .iter()
                .map(|&k| Pencil {
                    x: proj(&x_of(k)),
                    ..base.clone()
                })
                .collect())
        }
        ProbeLemma::Weighted => {
            let rl = model::select_r_lambda(spec, z.re, geom)?;
            let ph = super::build_phases(z, spec, geom, rl)?;
            let m = spec.decay_min();
            let b2 = 2.0 * opts.beta;
            let w: Vec<f64> = th.iter().map(|v| v.powf(b2)).collect();
            let abar = a.sub(&diag(ph.a.iter().map(|v| v.conj()).collect()));
            let a_minus = a.sub(&diag(ph.a.clone()));
            let left = abar
                .right_scaled(&w.iter().map(|&v| c(v)).collect::<Vec<_>>())
                .matmul(&hz)
                .anti_hermitian_part();
            let mid: Vec<C64> = (0..n).map(|i| c(th1[i] * th[i].powf(b2 - 1.0))).collect();
            let p_op = abar
                .right_scaled(&mid)
                .matmul(&a_minus)
                .add(&divergence_form(&(0..n).map(|i| w[i] * geom.h[i]).collect::<Vec<_>>(), h));
            let decay: Vec<f64> = geom.f.iter().map(|f| f.powf(-1.0 - 2.0 * m + 2.0 * opts.delta)).collect();
            let x_op = diag((0..n).map(|i| c(decay[i] * w[i])).collect());
            let y = re_hz((0..n).map(|i| c(rm[i] * decay[i] * w[i])).collect());
            let l = proj(&left);
            Ok(vec![Pencil {
                scale: spectral_radius(&l),
                l,
                p: proj(&p_op),
                x: proj(&x_op),
                y: vec![proj(&y)],
            }])
        }
    }
}

/// Searches `(c, C)` (and, for the Mourre variant, the cutoff index `n`) and returns the
/// outcome whether or not the search succeeded. The constants must work
/// simultaneously for `opts.z` and every entry of `opts.uniform_in`.
///
/// The closed-form part of `γ` is always present. The free multipliers
/// (`C₄`, `C₅`, `C₇` for the Mourre variant, the `f`-decay coefficient for the weighted
/// lemma) stay at zero unless no `(n, c, C)` succeeds without them.
pub fn probe_search(spec: &PotentialSpec, geom: &GeometryField, opts: &ProbeOptions) -> Result<ProbeReport> {
    if geom.grid.mode != GridMode::Line1d || geom.grid.absorb_width > 0.0 {
        return Err(Error::invalid("positivity probes need a line-1d grid without absorbing layer"));
    }
    let m = spec.decay_min();
    match opts.lemma {
        ProbeLemma::Mourre => {
            let lim = 1f64.min(spec.rho).min(spec.epsilon_prime());
            if !(opts.delta > 0.0 && opts.delta < lim) {
                return Err(Error::invalid(format!("δ must lie in (0, {lim})")));
            }
        }
        ProbeLemma::Weighted => {
            if !(opts.delta > 0.0 && opts.delta <= m) {
                return Err(Error::invalid(format!("δ must lie in (0, {m}]")));
            }
            if !(opts.beta > 0.0 && opts.beta < 1.0 + spec.epsilon / 2.0) {
                return Err(Error::invalid("β must lie in (0, 1 + ε/2)"));
            }
        }
    }
    let zs: Vec<C64> = std::iter::once(opts.z).chain(opts.uniform_in.iter().cloned()).collect();
    if zs.iter().any(|z| z.im < 0.0) {
        return Err(Error::invalid("probes are run for z in the upper half plane"));
    }
    let theta = geometry::theta_weight(geom, opts.nu, opts.delta);
    let space = TestSpace::sample(spec, geom, opts.z, opts.n_random, opts.n_wkb, opts.seed);
    let t = space.whitening();
    let cuts: Vec<usize> = match opts.lemma {
        ProbeLemma::Mourre => (0..=n_cut_max(geom)).collect(),
        ProbeLemma::Weighted => vec![0],
    };
    // families[k][j]: cutoff index cuts[k], spectral parameter zs[j]
    let per_z = zs
        .iter()
        .map(|&z| assemble(spec, geom, &theta, opts, &space, &t, z, &cuts))
        .collect::<Result<Vec<_>>>()?;
    let families: Vec<Vec<Pencil>> = (0..cuts.len())
        .map(|k| per_z.iter().map(|v| v[k].clone()).collect())
        .collect();
    let scale = families[0][0].scale;
    let make = |cc: f64, big_c: f64, n_cut: usize, kappa: Vec<f64>, normalized: f64| ProbeReport {
        lemma: opts.lemma,
        z: [opts.z.re, opts.z.im],
        nu: opts.nu,
        delta: opts.delta,
        beta: opts.beta,
        c: cc,
        big_c,
        n_cut: (opts.lemma == ProbeLemma::Mourre).then_some(n_cut),
        multipliers: kappa,
        min_rayleigh: normalized * scale,
        form_scale: scale,
        n_samples: space.len(),
        rank: t.ncols(),
        passed: normalized >= -opts.tolerance,
    };
    let ok = |v: f64| v >= -opts.tolerance;
    // Most permissive setting first: largest cutoff index and C, smallest c.
    let top = families.len() - 1;
    let c_min = opts.c_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let big_c_max = opts.big_c_grid.iter().cloned().fold(0.0, f64::max);
    let zero = vec![0.0; families[top][0].y.len()];
    let mut kappa = zero.clone();
    let mut v = family_eval(&families[top], c_min, big_c_max, &zero);
    if !ok(v) && opts.multiplier_bound > 0.0 {
        (kappa, v) = best_multipliers(&families[top], c_min, big_c_max, opts.multiplier_bound);
    }
    if !ok(v) {
        return Ok(make(c_min, big_c_max, cuts[top], kappa, v));
    }
    // Tighten with the multipliers held fixed: largest c, then smallest C,
    // then smallest n.
    let mut c_desc = opts.c_grid.clone();
    c_desc.sort_by(|a, b| b.total_cmp(a));
    let cc = c_desc
        .into_iter()
        .find(|&cc| ok(family_eval(&families[top], cc, big_c_max, &kappa)))
        .unwrap_or(c_min);
    let mut c_asc = opts.big_c_grid.clone();
    c_asc.sort_by(|a, b| a.total_cmp(b));
    let big_c = c_asc
        .into_iter()
        .find(|&bc| ok(family_eval(&families[top], cc, bc, &kappa)))
        .unwrap_or(big_c_max);
    let k = (0..=top)
        .find(|&k| ok(family_eval(&families[k], cc, big_c, &kappa)))
        .unwrap_or(top);
    let v = family_eval(&families[k], cc, big_c, &kappa);
    Ok(make(cc, big_c, cuts[k], kappa, v))
}

/// Runs the search and fails with `NoAdmissibleConstants` when no tried
/// constants make the minimal quotient reach `−tolerance·scale`.
pub fn positivity_probe(spec: &PotentialSpec, geom: &GeometryField, opts: &ProbeOptions) -> Result<ProbeReport> {
    let r = probe_search(spec, geom, opts)?;
    if r.passed {
        Ok(r)
    } else {
        Err(Error::NoAdmissibleConstants {
            best_min_rayleigh: r.min_rayleigh,
            tolerance: opts.tolerance * r.form_scale,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_geometry;
    use crate::grid::Grid;

    #[test]
    fn projection_matches_dense_quadratic_form() {
        let spec = PotentialSpec::free(1.0);
        let g = build_geometry(&Grid::line(1.0 / 8.0, 30.0).unwrap(), 1.0, 1.0).unwrap();
        let space = TestSpace::sample(&spec, &g, C64::new(1.0, 0.1), 6, 4, 1);
        let a = build_conjugate_a(&g).matrix;
        let p = space.project(&a);
        let dense: Vec<Vec<C64>> = space
            .vectors
            .iter()
            .map(|v| {
                let mut d = vec![C64::new(0.0, 0.0); g.len()];
                d[v.start..v.end()].copy_from_slice(&v.values);
                d
            })
            .collect();
        for i in 0..dense.len() {
            for j in 0..dense.len() {
                let av = a.matvec(&dense[j]);
                let want: C64 = dense[i].iter().zip(&av).map(|(x, y)| x.conj() * y).sum::<C64>() * g.grid.spacing;
                assert!((p[(i, j)] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn free_instance_admits_constants() {
        let spec = PotentialSpec::free(1.0);
        let g = build_geometry(&Grid::line(1.0 / 32.0, 400.0).unwrap(), 1.0, 1.0).unwrap();
        let opts = ProbeOptions::new(ProbeLemma::Mourre, C64::new(1.0, 0.1), 3, 0.5, 0.0);
        let rep = positivity_probe(&spec, &g, &opts).unwrap();
        assert!(rep.c > 0.0 && rep.n_samples >= 200);
        assert!(rep.min_rayleigh >= -1e-6 * rep.form_scale);
        let json = serde_json::to_value(&rep).unwrap();
        for key in ["z", "nu", "delta", "beta", "c", "C", "min_rayleigh", "n_samples"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn rayleigh_quotient_is_scale_invariant_and_monotone_in_c() {
        let spec = PotentialSpec::free(1.0);
        let g = build_geometry(&Grid::line(1.0 / 16.0, 80.0).unwrap(), 1.0, 1.0).unwrap();
        let opts = ProbeOptions::new(ProbeLemma::Mourre, C64::new(1.0, 0.1), 2, 0.5, 0.0);
        let theta = geometry::theta_weight(&g, 2, 0.5);
        let space = TestSpace::sample(&spec, &g, opts.z, 20, 10, 3);
        let t = space.whitening();
        let pencil = assemble(&spec, &g, &theta, &opts, &space, &t, opts.z, &[1]).unwrap().remove(0);
        let mut last = f64::NEG_INFINITY;
        for big_c in [0.0, 1.0, 10.0, 100.0] {
            let v = pencil.eval(0.01, big_c, &[0.0, 0.0, 0.0]);
            assert!(v >= last - 1e-12);
            last = v;
        }
        let scaled = whiten(&(&t * c(3.0)), &space.project(&BandMatrix::identity(g.len())));
        // ψ → 3ψ scales every form by 9, the quotient by 1.
        let id = whiten(&t, &space.project(&BandMatrix::identity(g.len())));
        assert!((min_eig(&scaled) / 9.0 - min_eig(&id)).abs() < 1e-9);
    }
}
