//! Banded complex matrices.
//!
//! Every operator in this crate is a short finite-difference stencil, so a
//! plain band layout (row-major, `kl` sub- and `ku` super-diagonals) covers
//! the Hamiltonian, the conjugate operators, their products and the
//! commutator forms. The direct solver is an LU factorization with partial
//! pivoting in the LAPACK `gbtrf` layout.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<C64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![ZERO; n * (kl + ku + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![C64::new(1.0, 0.0); n])
    }

    pub fn diagonal(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len(), 0, 0);
        m.data.copy_from_slice(d);
        m
    }

    pub fn real_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), 0, 0);
        for (dst, &v) in m.data.iter_mut().zip(d) {
            *dst = C64::new(v, 0.0);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku && i < self.n && j < self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            ZERO
        }
    }

    /// Panics if `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add_at(&mut self, i: usize, j: usize, v: C64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// Column range of row `i` inside the band.
    #[inline]
    fn cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![ZERO; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        let w = self.width();
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &self.data[i * w..(i + 1) * w];
            let mut acc = ZERO;
            for j in self.cols(i) {
                acc += row[j + self.kl - i] * x[j];
            }
            *yi = acc;
        }
    }

    /// Re-bands to at least the given bandwidths.
    pub fn widened(&self, kl: usize, ku: usize) -> Self {
        let (kl, ku) = (kl.max(self.kl), ku.max(self.ku));
        if kl == self.kl && ku == self.ku {
            return self.clone();
        }
        let mut out = Self::zeros(self.n, kl, ku);
        for i in 0..self.n {
            for j in self.cols(i) {
                out.set(i, j, self.get(i, j));
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            for j in self.cols(i) {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            for j in self.cols(i) {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = Self::zeros(self.n, self.kl + other.kl, self.ku + other.ku);
        for i in 0..self.n {
            for k in self.cols(i) {
                let a = self.get(i, k);
                if a == ZERO {
                    continue;
                }
                for j in other.cols(k) {
                    out.add_at(i, j, a * other.get(k, j));
                }
            }
        }
        out
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(C64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(C64::new(-1.0, 0.0), other)
    }

    /// `self + s · other`.
    pub fn axpy(&self, s: C64, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = self.widened(other.kl, other.ku);
        for i in 0..other.n {
            for j in other.cols(i) {
                out.add_at(i, j, s * other.get(i, j));
            }
        }
        out
    }

    /// `diag(d) · self`.
    pub fn left_scaled(&self, d: &[C64]) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for j in self.cols(i) {
                let k = out.idx(i, j);
                out.data[k] *= d[i];
            }
        }
        out
    }

    /// `self · diag(d)`.
    pub fn right_scaled(&self, d: &[C64]) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for j in self.cols(i) {
                let k = out.idx(i, j);
                out.data[k] *= d[j];
            }
        }
        out
    }

    pub fn shifted(&self, z: C64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            out.add_at(i, i, -z);
        }
        out
    }

    /// `(X + X†)/2`.
    pub fn hermitian_part(&self) -> Self {
        self.add(&self.adjoint()).scaled(C64::new(0.5, 0.0))
    }

    /// `(X − X†)/(2i)`.
    pub fn anti_hermitian_part(&self) -> Self {
        self.sub(&self.adjoint()).scaled(C64::new(0.0, -0.5))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |X − X†|` entrywise.
    pub fn hermiticity_defect(&self) -> f64 {
        self.sub(&self.adjoint()).max_abs()
    }

    /// `max |X − Xᵀ|` entrywise.
    pub fn symmetry_defect(&self) -> f64 {
        self.sub(&self.transpose()).max_abs()
    }

    pub fn quad_form(&self, v: &[C64]) -> C64 {
        let mv = self.matvec(v);
        v.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.n, self.n, ZERO);
        for i in 0..self.n {
            for j in self.cols(i) {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }

    pub fn lu(&self) -> Result<BandLu> {
        BandLu::factor(self)
    }
}

/// LU factorization `P A = L U` of a band matrix with partial pivoting.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    /// Upper bandwidth of `U` (`kl + ku` of the input).
    ku: usize,
    data: Vec<C64>,
    pivots: Vec<usize>,
    min_pivot_ratio: f64,
}

impl BandLu {
    fn factor(a: &BandMatrix) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let ku = a.kl + a.ku;
        let w = kl + ku + 1;
        let mut data = vec![ZERO; n * w];
        let idx = |i: usize, j: usize| i * w + (j + kl - i);
        for i in 0..n {
            for j in a.cols(i) {
                data[idx(i, j)] = a.get(i, j);
            }
        }
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        let mut pivots = vec![0usize; n];
        let mut min_ratio = f64::INFINITY;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = data[idx(k, k)].norm();
            for i in k + 1..=last {
                let v = data[idx(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            pivots[k] = p;
            min_ratio = min_ratio.min(best / scale);
            if best <= 1e-14 * scale {
                return Err(Error::SingularShift { row: k, pivot: best });
            }
            let jmax = (k + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    data.swap(idx(k, j), idx(p, j));
                }
            }
            let pivot = data[idx(k, k)];
            for i in k + 1..=last {
                let m = data[idx(i, k)] / pivot;
                data[idx(i, k)] = m;
                if m == ZERO {
                    continue;
                }
                for j in k + 1..=jmax {
                    let u = data[idx(k, j)];
                    data[idx(i, j)] -= m * u;
                }
            }
        }
        Ok(Self {
            n,
            kl,
            ku,
            data,
            pivots,
            min_pivot_ratio: min_ratio,
        })
    }

    /// Smallest `|u_kk| / max|A|` met during elimination; a cheap
    /// conditioning indicator.
    pub fn min_pivot_ratio(&self) -> f64 {
        self.min_pivot_ratio
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let w = kl + ku + 1;
        let idx = |i: usize, j: usize| i * w + (j + kl - i);
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                x[i] -= self.data[idx(i, k)] * xk;
            }
        }
        for k in (0..n).rev() {
            let mut acc = x[k];
            for j in k + 1..=(k + ku).min(n - 1) {
                acc -= self.data[idx(k, j)] * x[j];
            }
            x[k] = acc / self.data[idx(k, k)];
        }
        x
    }
}

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, kl: usize, ku: usize, seed: u64) -> BandMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                m.set(i, j, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
        }
        m
    }

    #[test]
    fn matmul_matches_dense() {
        let a = random_band(12, 1, 2, 1);
        let b = random_band(12, 2, 1, 2);
        let c = a.matmul(&b).to_dense();
        let d = a.to_dense() * b.to_dense();
        assert!((c - d).norm() < 1e-12);
    }

    #[test]
    fn lu_solves_with_pivoting() {
        // Zero diagonal forces row exchanges.
        let mut a = random_band(40, 2, 1, 3);
        for i in 0..40 {
            a.set(i, i, C64::new(0.0, 0.0));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<C64> = (0..40).map(|_| C64::new(rng.gen(), rng.gen())).collect();
        let b = a.matvec(&x);
        let y = a.lu().unwrap().solve(&b);
        let err: f64 = x.iter().zip(&y).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "err {err}");
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = BandMatrix::zeros(5, 1, 1);
        assert!(matches!(a.lu(), Err(Error::SingularShift { .. })));
    }

    #[test]
    fn hermitian_parts() {
        let a = random_band(8, 1, 1, 4);
        let re = a.hermitian_part();
        let im = a.anti_hermitian_part();
        assert!(re.hermiticity_defect() < 1e-15);
        assert!(im.hermiticity_defect() < 1e-15);
        let back = re.axpy(C64::new(0.0, 1.0), &im);
        assert!((back.to_dense() - a.to_dense()).norm() < 1e-14);
    }
}
