//! Dyadic ring decompositions and the Besov-type norms built on them.
//!
//! Norms act on grid vectors over the physical region of the grid; nodes in
//! an absorbing layer are ignored. In radial mode vectors are in the
//! `u = r^{(d−1)/2}φ` representation, so plain cell sums are the `L²` norm.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::band::C64;
use crate::geometry::GeometryField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coordinate {
    FBased,
    RBased,
}

#[derive(Debug, Clone)]
pub struct DyadicDecomposition {
    pub coordinate: Coordinate,
    /// Node indices of ring `ν`: `R_ν ≤ coord < R_{ν+1}`.
    pub rings: Vec<Vec<usize>>,
    /// `R_ν = 2^ν`.
    pub radii: Vec<f64>,
    /// Last ring lying entirely inside the grid.
    pub nu_max: usize,
    pub weights: Vec<f64>,
    /// `f` at every node, for the `H_s` weights.
    pub f: Vec<f64>,
    pub epsilon: f64,
    pub n: usize,
}

impl DyadicDecomposition {
    pub fn f_based(geom: &GeometryField) -> Self {
        Self::build(geom, Coordinate::FBased)
    }

    pub fn r_based(geom: &GeometryField) -> Self {
        Self::build(geom, Coordinate::RBased)
    }

    pub fn build(geom: &GeometryField, coordinate: Coordinate) -> Self {
        let coord = match coordinate {
            Coordinate::FBased => &geom.f,
            Coordinate::RBased => &geom.r,
        };
        let mut rings: Vec<Vec<usize>> = Vec::new();
        let mut top: f64 = 1.0;
        for (i, &c) in coord.iter().enumerate() {
            if !geom.grid.is_physical(i) || c < 1.0 {
                continue;
            }
            let nu = c.log2().floor() as usize;
            if rings.len() <= nu {
                rings.resize(nu + 1, Vec::new());
            }
            rings[nu].push(i);
            top = top.max(c);
        }
        let c_max = match coordinate {
            Coordinate::FBased => geom.f_max(),
            Coordinate::RBased => geom.grid.r_max,
        }
        .max(top);
        let nu_max = (c_max.log2().floor() as i64 - 1).max(0) as usize;
        let radii = (0..rings.len()).map(|nu| 2f64.powi(nu as i32)).collect();
        Self {
            coordinate,
            nu_max: nu_max.min(rings.len().saturating_sub(1)),
            rings,
            radii,
            weights: vec![geom.grid.cell(); geom.len()],
            f: geom.f.clone(),
            epsilon: geom.epsilon,
            n: geom.len(),
        }
    }

    /// Exponent `e` in `R_ν^{e}` of the `B*` norm (`B` uses `−e`).
    pub fn bstar_exponent(&self) -> f64 {
        match self.coordinate {
            Coordinate::FBased => -0.5,
            Coordinate::RBased => self.epsilon / 4.0 - 0.5,
        }
    }

    /// `‖F_ν ψ‖` for every ring.
    pub fn ring_norms(&self, psi: &[C64]) -> Vec<f64> {
        assert_eq!(psi.len(), self.n, "vector and decomposition sizes differ");
        self.rings
            .iter()
            .map(|ring| {
                ring.iter()
                    .map(|&i| psi[i].norm_sqr() * self.weights[i])
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// Physical-region `L²` norm of `w ψ` for a real node weight `w`.
    pub fn weighted_l2(&self, psi: &[C64], w: impl Fn(usize) -> f64) -> f64 {
        self.rings
            .iter()
            .flatten()
            .map(|&i| (w(i) * psi[i].norm()).powi(2) * self.weights[i])
            .sum::<f64>()
            .sqrt()
    }

    /// `‖f^s ψ‖`.
    pub fn h_s(&self, psi: &[C64], s: f64) -> f64 {
        self.weighted_l2(psi, |i| self.f[i].powf(s))
    }

    pub fn inner(&self, a: &[C64], b: &[C64]) -> C64 {
        self.rings
            .iter()
            .flatten()
            .map(|&i| a[i].conj() * b[i] * self.weights[i])
            .sum()
    }

    /// `(‖ψ‖_B, ‖ψ‖_{B*})` summed over every ring including the partial
    /// last one.
    pub fn full_norms(&self, psi: &[C64]) -> (f64, f64) {
        let e = self.bstar_exponent();
        let rn = self.ring_norms(psi);
        let b = rn.iter().zip(&self.radii).map(|(m, r)| r.powf(-e) * m).sum();
        let bs = rn.iter().zip(&self.radii).map(|(m, r)| r.powf(e) * m).fold(0.0, f64::max);
        (b, bs)
    }
}

/// Numerical `B*₀` trend test shared by every module: the last `window`
/// resolved tail values are strictly decreasing and the last one is at most
/// `threshold` times the sup of the tail.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TailTest {
    pub window: usize,
    pub threshold: f64,
}

impl Default for TailTest {
    fn default() -> Self {
        Self {
            window: 3,
            threshold: 0.5,
        }
    }
}

impl TailTest {
    pub fn vanishing(&self, tail: &[f64]) -> bool {
        if tail.len() < self.window || self.window == 0 {
            return false;
        }
        let last = &tail[tail.len() - self.window..];
        let sup = tail.iter().copied().fold(0.0, f64::max);
        if sup == 0.0 {
            return true;
        }
        last.windows(2).all(|w| w[1] < w[0]) && last[last.len() - 1] <= self.threshold * sup
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailEntry {
    pub nu: usize,
    pub r_nu: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormReport {
    pub coordinate: Coordinate,
    pub besov_b: f64,
    pub besov_bstar: f64,
    pub tail: Vec<TailEntry>,
    /// `s → ‖f^s ψ‖`, keys formatted with `{}`.
    pub weighted: BTreeMap<String, f64>,
    pub is_bstar0: bool,
    /// The last resolved ring is within 10% of the sup.
    pub truncated: bool,
    pub nu_max: usize,
}

impl NormReport {
    pub fn tail_values(&self) -> Vec<f64> {
        self.tail.iter().map(|t| t.value).collect()
    }

    /// Writes `nu, R_nu, tail_value`.
    pub fn write_tail_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "nu,R_nu,tail_value")?;
        for t in &self.tail {
            writeln!(w, "{},{},{}", t.nu, t.r_nu, t.value)?;
        }
        Ok(())
    }
}

pub const DEFAULT_WEIGHTS: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

pub fn besov_norms(psi: &[C64], decomp: &DyadicDecomposition) -> NormReport {
    besov_norms_with(psi, decomp, &DEFAULT_WEIGHTS, &TailTest::default())
}

/// Sums and sups run over `ν ≤ ν_max`.
pub fn besov_norms_with(
    psi: &[C64],
    decomp: &DyadicDecomposition,
    weights: &[f64],
    tail_test: &TailTest,
) -> NormReport {
    let e = decomp.bstar_exponent();
    let rn = decomp.ring_norms(psi);
    let resolved = (decomp.nu_max + 1).min(rn.len());
    let tail: Vec<TailEntry> = (0..resolved)
        .map(|nu| TailEntry {
            nu,
            r_nu: decomp.radii[nu],
            value: decomp.radii[nu].powf(e) * rn[nu],
        })
        .collect();
    let besov_b = (0..resolved).map(|nu| decomp.radii[nu].powf(-e) * rn[nu]).sum();
    let besov_bstar = tail.iter().map(|t| t.value).fold(0.0, f64::max);
    let truncated = tail
        .last()
        .is_some_and(|t| besov_bstar > 0.0 && t.value >= 0.9 * besov_bstar);
    let values: Vec<f64> = tail.iter().map(|t| t.value).collect();
    NormReport {
        coordinate: decomp.coordinate,
        besov_b,
        besov_bstar,
        is_bstar0: tail_test.vanishing(&values),
        tail,
        weighted: weights
            .iter()
            .map(|&s| (format!("{s}"), decomp.h_s(psi, s)))
            .collect(),
        truncated,
        nu_max: decomp.nu_max,
    }
}

/// `(|⟨ψ, φ⟩|, ‖ψ‖_B ‖φ‖_{B*})`, both over every ring.
pub fn duality_check(psi: &[C64], phi: &[C64], decomp: &DyadicDecomposition) -> (f64, f64) {
    let lhs = decomp.inner(psi, phi).norm();
    let (b, _) = decomp.full_norms(psi);
    let (_, bs) = decomp.full_norms(phi);
    (lhs, b * bs)
}

/// One link `lhs ≤ constant · rhs` of the inclusion chain.
#[derive(Debug, Clone, Serialize)]
pub struct Embedding {
    pub name: String,
    pub lhs: f64,
    pub constant: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InclusionReport {
    pub s: f64,
    /// `(‖f^sψ‖, ‖ψ‖_B, ‖f^{1/2}ψ‖, ‖ψ‖, ‖f^{−1/2}ψ‖, ‖ψ‖_{B*}, ‖f^{−s}ψ‖)`
    pub values: [f64; 7],
    /// `(Σ_ν R_ν^{1−2s})^{1/2}`.
    pub c_s: f64,
    pub links: Vec<Embedding>,
}

impl InclusionReport {
    pub fn all_hold(&self) -> bool {
        self.links.iter().all(|l| l.holds)
    }
}

/// Norms along `H_s ⊂ B ⊂ H_{1/2} ⊂ H ⊂ H_{−1/2} ⊂ B* ⊂ H_{−s}` with the
/// constants of each continuous embedding computed from the ring geometry.
pub fn inclusion_chain_check(psi: &[C64], decomp: &DyadicDecomposition, s: f64) -> InclusionReport {
    assert!(s > 0.5, "s must exceed 1/2");
    let (b, bs) = decomp.full_norms(psi);
    let v = [
        decomp.h_s(psi, s),
        b,
        decomp.h_s(psi, 0.5),
        decomp.h_s(psi, 0.0),
        decomp.h_s(psi, -0.5),
        bs,
        decomp.h_s(psi, -s),
    ];
    let c_s = (1.0 / (1.0 - 2f64.powf(1.0 - 2.0 * s))).sqrt();
    let sqrt2 = std::f64::consts::SQRT_2;
    let tol = 1.0 + 1e-12;
    let link = |name: &str, lhs: f64, constant: f64, rhs: f64| Embedding {
        name: name.into(),
        lhs,
        constant,
        rhs,
        holds: lhs <= constant * rhs * tol,
    };
    let links = vec![
        link("B <= c_s H_s", v[1], c_s, v[0]),
        link("H_1/2 <= sqrt2 B", v[2], sqrt2, v[1]),
        link("H <= H_1/2", v[3], 1.0, v[2]),
        link("H_-1/2 <= H", v[4], 1.0, v[3]),
        link("B* <= sqrt2 H_-1/2", v[5], sqrt2, v[4]),
        link("H_-s <= c_s B*", v[6], c_s, v[5]),
    ];
    InclusionReport {
        s,
        values: v,
        c_s,
        links,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantComparison {
    pub r_based: NormReport,
    pub f_based: NormReport,
    /// `‖ψ‖_{B_r*} / ‖ψ‖_{B_f*}`.
    pub ratio: f64,
}

pub fn variant_comparison(psi: &[C64], geom: &GeometryField) -> VariantComparison {
    let r_based = besov_norms(psi, &DyadicDecomposition::r_based(geom));
    let f_based = besov_norms(psi, &DyadicDecomposition::f_based(geom));
    VariantComparison {
        ratio: r_based.besov_bstar / f_based.besov_bstar,
        r_based,
        f_based,
    }
}

/// Growth of a tail over its populated entries: `last / first` of the
/// non-zero values.
pub fn tail_growth(tail: &[f64]) -> f64 {
    let nz: Vec<f64> = tail.iter().copied().filter(|&t| t > 0.0).collect();
    match (nz.first(), nz.last()) {
        (Some(a), Some(b)) => b / a,
        _ => 0.0,
    }
}

/// A function in `B_f*` whose `B_r*` tail grows (meaningful at `ε = 2`).
///
/// In each resolved `f`-ring `ν` the mass `R_ν^{1/2}` is placed inside a
/// single `r`-ring, so every `f`-ring contributes `1` to the `B_f*` tail
/// while the populated `r`-rings contribute `R_ν^{1/2}` with weight `R^0`.
pub fn bstar_distinction_witness(geom: &GeometryField) -> Vec<C64> {
    let fdec = DyadicDecomposition::f_based(geom);
    let rdec = DyadicDecomposition::r_based(geom);
    let mut ring_of_r = vec![usize::MAX; geom.len()];
    for (mu, ring) in rdec.rings.iter().enumerate() {
        for &i in ring {
            ring_of_r[i] = mu;
        }
    }
    let mut psi = vec![C64::new(0.0, 0.0); geom.len()];
    for nu in 0..=fdec.nu_max.min(fdec.rings.len().saturating_sub(1)) {
        let ring = &fdec.rings[nu];
        // Largest r-ring fully contained in this f-ring, on the x ≥ 0 side.
        let mut best: Option<(usize, Vec<usize>)> = None;
        let mut mus: Vec<usize> = ring.iter().map(|&i| ring_of_r[i]).collect();
        mus.sort_unstable();
        mus.dedup();
        for mu in mus {
            let members: Vec<usize> = rdec.rings[mu]
                .iter()
                .copied()
                .filter(|&i| geom.x[i] >= 0.0)
                .collect();
            let inside = members.iter().all(|i| ring.binary_search(i).is_ok());
            if inside && !members.is_empty() && best.as_ref().is_none_or(|(_, b)| members.len() > b.len()) {
                best = Some((mu, members));
            }
        }
        let Some((_, members)) = best.or_else(|| {
            let m: Vec<usize> = ring.iter().copied().filter(|&i| geom.x[i] >= 0.0).collect();
            (!m.is_empty()).then_some((0, m))
        }) else {
            continue;
        };
        let mass: f64 = members.len() as f64 * geom.grid.cell();
        let amp = (fdec.radii[nu].sqrt() / mass.sqrt()).max(0.0);
        for i in members {
            psi[i] = C64::new(amp, 0.0);
        }
    }
    psi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_geometry;
    use crate::grid::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geom() -> GeometryField {
        build_geometry(&Grid::line(1.0 / 16.0, 300.0).unwrap(), 1.0, 1.0).unwrap()
    }

    fn ring_indicator(d: &DyadicDecomposition, nu: usize, mass: f64) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); d.n];
        let m2: f64 = d.rings[nu].iter().map(|&i| d.weights[i]).sum();
        for &i in &d.rings[nu] {
            v[i] = C64::new(mass / m2.sqrt(), 0.0);
        }
        v
    }

    #[test]
    fn single_ring_norms() {
        let g = geom();
        let d = DyadicDecomposition::f_based(&g);
        let rep = besov_norms(&ring_indicator(&d, 0, 1.0), &d);
        assert!((rep.besov_b - 1.0).abs() < 1e-12);
        assert!((rep.besov_bstar - 1.0).abs() < 1e-12);
        let m = 0.7;
        let rep = besov_norms(&ring_indicator(&d, 3, m), &d);
        assert!((rep.besov_b - 8f64.sqrt() * m).abs() < 1e-12);
        assert!((rep.besov_bstar - m / 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ring_partition_and_homogeneity() {
        let g = geom();
        let d = DyadicDecomposition::f_based(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi: Vec<C64> = (0..d.n).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let total: f64 = d.ring_norms(&psi).iter().map(|m| m * m).sum();
        assert!((total - d.h_s(&psi, 0.0).powi(2)).abs() < 1e-10 * total);
        let scaled: Vec<C64> = psi.iter().map(|v| v * 2.5).collect();
        let (a, b) = (besov_norms(&psi, &d), besov_norms(&scaled, &d));
        assert!((b.besov_b - 2.5 * a.besov_b).abs() < 1e-10 * b.besov_b);
        assert!((b.besov_bstar - 2.5 * a.besov_bstar).abs() < 1e-10 * b.besov_bstar);
    }

    #[test]
    fn inverse_f_is_in_bstar0() {
        let g = geom();
        let d = DyadicDecomposition::f_based(&g);
        let psi: Vec<C64> = g.f.iter().map(|&f| C64::new(1.0 / f, 0.0)).collect();
        let rep = besov_norms(&psi, &d);
        // Per-ring oracle: ∑ over the ring of f^{-2} h, directly.
        for t in &rep.tail {
            let direct: f64 = d.rings[t.nu].iter().map(|&i| g.f[i].powi(-2) * g.grid.spacing).sum();
            assert!((t.value - direct.sqrt() / t.r_nu.sqrt()).abs() < 1e-12);
        }
        assert!(rep.is_bstar0);
        let ones: Vec<C64> = g.f.iter().map(|&f| C64::new(f.sqrt(), 0.0)).collect();
        assert!(!besov_norms(&ones, &d).is_bstar0);
    }

    #[test]
    fn duality_and_disjoint_supports() {
        let g = geom();
        let d = DyadicDecomposition::f_based(&g);
        let one = ring_indicator(&d, 2, 1.3);
        let (l, r) = duality_check(&one, &one, &d);
        assert!((l - r).abs() < 1e-12 * r);
        let other = ring_indicator(&d, 4, 1.0);
        assert_eq!(duality_check(&one, &other, &d).0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let a: Vec<C64> = (0..d.n).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>())).collect();
            let b: Vec<C64> = (0..d.n).map(|_| C64::new(rng.gen::<f64>(), rng.gen::<f64>() - 0.3)).collect();
            let (l, r) = duality_check(&a, &b, &d);
            assert!(l <= r * (1.0 + 1e-12));
        }
    }

    #[test]
    fn inclusion_chain_holds() {
        let g = geom();
        let d = DyadicDecomposition::f_based(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let decay = rng.gen_range(0.0..1.5);
            let psi: Vec<C64> = g
                .f
                .iter()
                .map(|&f| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * f.powf(-decay))
                .collect();
            let rep = inclusion_chain_check(&psi, &d, 1.0);
            assert!(rep.all_hold(), "{:?}", rep.links);
        }
        let rep = inclusion_chain_check(&ring_indicator(&d, 3, 1.0), &d, 1.0);
        assert!(rep.all_hold());
        assert!((rep.values[1] - 8f64.sqrt()).abs() < 1e-12);
        assert!((rep.values[5] - 1.0 / 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn variants_agree_up_to_constant_for_eps_one() {
        let g = geom();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for _ in 0..20 {
            let psi: Vec<C64> = g
                .f
                .iter()
                .map(|&f| C64::new(rng.gen::<f64>(), 0.0) * f.powf(rng.gen_range(-0.5..0.5)))
                .collect();
            let c = variant_comparison(&psi, &g);
            lo = lo.min(c.ratio);
            hi = hi.max(c.ratio);
        }
        assert!(lo > 0.1 && hi < 10.0, "{lo} {hi}");
    }

    #[test]
    fn witness_separates_variants_at_eps_two() {
        let g = build_geometry(&Grid::line(1.0 / 16.0, 7f64.exp() + 1.0).unwrap(), 2.0, 1.0).unwrap();
        let psi = bstar_distinction_witness(&g);
        let c = variant_comparison(&psi, &g);
        let ft = c.f_based.tail_values();
        assert!(ft.iter().all(|&t| (t - 1.0).abs() < 1e-9), "{ft:?}");
        assert!(tail_growth(&c.r_based.tail_values()) >= 1.9);
    }
}
