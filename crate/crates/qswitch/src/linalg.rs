//! Small dense complex matrices: density matrices, Hermitian eigensolver,
//! Uhlmann fidelity and partial transpose.

use crate::scalar::Real;
use num_complex::Complex;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("matrix is not positive semidefinite (min eigenvalue {0})")]
    NotPsd(f64),
    #[error("matrix is not Hermitian")]
    NotHermitian,
}

/// Row-major square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T: Real> {
    dim: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        CMatrix { dim, data: vec![Complex::new(T::zero(), T::zero()); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, Complex::new(T::one(), T::zero()));
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex<T>>>) -> Result<Self, LinalgError> {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (r, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(LinalgError::Dimension(row.len(), dim));
            }
            for (c, v) in row.into_iter().enumerate() {
                m.set(r, c, v);
            }
        }
        Ok(m)
    }

    /// `|v><v|`.
    pub fn outer(v: &[Complex<T>]) -> Self {
        let dim = v.len();
        let mut m = Self::zeros(dim);
        for r in 0..dim {
            for c in 0..dim {
                m.set(r, c, v[r] * v[c].conj());
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> Complex<T> {
        self.data[r * self.dim + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex<T>) {
        self.data[r * self.dim + c] = v;
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.dim).fold(Complex::new(T::zero(), T::zero()), |a, i| a + self.get(i, i))
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                m.set(c, r, self.get(r, c).conj());
            }
        }
        m
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        CMatrix { dim: self.dim, data: self.data.iter().map(|v| *v * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.same_dim(other)?;
        Ok(CMatrix { dim: self.dim, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.same_dim(other)?;
        Ok(CMatrix { dim: self.dim, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        self.same_dim(other)?;
        let d = self.dim;
        let mut m = Self::zeros(d);
        for r in 0..d {
            for k in 0..d {
                let a = self.get(r, k);
                if a.norm_sqr() == T::zero() {
                    continue;
                }
                for c in 0..d {
                    m.data[r * d + c] = m.data[r * d + c] + a * other.get(k, c);
                }
            }
        }
        Ok(m)
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (a, b) = (self.dim, other.dim);
        let mut m = Self::zeros(a * b);
        for r1 in 0..a {
            for c1 in 0..a {
                let v = self.get(r1, c1);
                for r2 in 0..b {
                    for c2 in 0..b {
                        m.set(r1 * b + r2, c1 * b + c2, v * other.get(r2, c2));
                    }
                }
            }
        }
        m
    }

    /// `(M + M†) / 2`.
    pub fn hermitize(&self) -> Self {
        let half = Complex::new(T::of(0.5), T::zero());
        self.add(&self.adjoint()).expect("same dim").scale(half)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data.iter().zip(&other.data).fold(T::zero(), |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    fn same_dim(&self, other: &Self) -> Result<(), LinalgError> {
        if self.dim != other.dim {
            Err(LinalgError::Dimension(self.dim, other.dim))
        } else {
            Ok(())
        }
    }

    /// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and the
    /// matching orthonormal eigenvectors (as columns of the returned list).
    pub fn eigh(&self) -> (Vec<T>, Vec<Vec<Complex<T>>>) {
        // Real symmetric embedding [[A, -B], [B, A]] of M = A + iB. Each eigenvalue
        // appears twice; pairs (u; v) give complex eigenvectors u + iv.
        let d = self.dim;
        let n = 2 * d;
        let mut a = vec![T::zero(); n * n];
        for r in 0..d {
            for c in 0..d {
                let v = self.get(r, c);
                a[r * n + c] = v.re;
                a[(r + d) * n + c + d] = v.re;
                a[r * n + c + d] = -v.im;
                a[(r + d) * n + c] = v.im;
            }
        }
        let (vals, vecs) = jacobi(&mut a, n);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap_or(std::cmp::Ordering::Equal));
        // Pick d vectors by Gram-Schmidt over the complex candidates.
        let mut out_vals = Vec::with_capacity(d);
        let mut out_vecs: Vec<Vec<Complex<T>>> = Vec::with_capacity(d);
        for &k in &order {
            if out_vecs.len() == d {
                break;
            }
            let mut v: Vec<Complex<T>> = (0..d).map(|r| Complex::new(vecs[r * n + k], vecs[(r + d) * n + k])).collect();
            for u in &out_vecs {
                let ip = u.iter().zip(&v).fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b);
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi = *vi - ip * ui;
                }
            }
            let nrm = v.iter().fold(T::zero(), |acc, x| acc + x.norm_sqr()).sqrt();
            if nrm > T::of(1e-6) {
                for x in v.iter_mut() {
                    *x = *x / nrm;
                }
                out_vals.push(vals[k]);
                out_vecs.push(v);
            }
        }
        (out_vals, out_vecs)
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        self.eigh().0
    }

    /// Apply `f` to the eigenvalues of a Hermitian matrix.
    pub fn map_spectrum(&self, f: impl Fn(T) -> T) -> Self {
        let (vals, vecs) = self.eigh();
        let mut m = Self::zeros(self.dim);
        for (l, v) in vals.iter().zip(&vecs) {
            let fl = Complex::new(f(*l), T::zero());
            m = m.add(&Self::outer(v).scale(fl)).expect("same dim");
        }
        m
    }

    /// Clip eigenvalues above the PSD floor to zero and renormalize to trace 1.
    pub fn clip_to_density(&self) -> Result<Self, LinalgError> {
        let h = self.hermitize();
        let m = h.map_spectrum(|l| if l < T::zero() { T::zero() } else { l });
        let tr = m.trace().re;
        if tr <= T::zero() {
            let min = h.eigenvalues().into_iter().fold(T::infinity(), T::min);
            return Err(LinalgError::NotPsd(min.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(m.scale(Complex::new(T::one() / tr, T::zero())))
    }

    /// Partial transpose on a bipartite `da x db` split, transposing the second factor.
    pub fn partial_transpose(&self, da: usize, db: usize) -> Result<Self, LinalgError> {
        if da * db != self.dim {
            return Err(LinalgError::Dimension(da * db, self.dim));
        }
        let mut m = Self::zeros(self.dim);
        for a1 in 0..da {
            for b1 in 0..db {
                for a2 in 0..da {
                    for b2 in 0..db {
                        m.set(a1 * db + b2, a2 * db + b1, self.get(a1 * db + b1, a2 * db + b2));
                    }
                }
            }
        }
        Ok(m)
    }
}

fn check_density<T: Real>(m: &CMatrix<T>) -> Result<(), LinalgError> {
    if !m.is_hermitian(T::of(1e-8)) {
        return Err(LinalgError::NotHermitian);
    }
    let min = m.eigenvalues().into_iter().fold(T::infinity(), T::min);
    if min < T::psd_floor() {
        return Err(LinalgError::NotPsd(min.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(())
}

/// Uhlmann fidelity `Tr[sqrt(sqrt(r1) r2 sqrt(r1))]^2`.
pub fn fidelity<T: Real>(r1: &CMatrix<T>, r2: &CMatrix<T>) -> Result<T, LinalgError> {
    r1.same_dim(r2)?;
    check_density(r1)?;
    check_density(r2)?;
    let clip = |l: T| if l < T::zero() { T::zero() } else { l };
    let s1 = r1.hermitize().map_spectrum(|l| clip(l).sqrt());
    let inner = s1.matmul(r2)?.matmul(&s1)?.hermitize();
    let tr = inner.eigenvalues().into_iter().fold(T::zero(), |acc, l| acc + clip(l).sqrt());
    Ok((tr * tr).min(T::one()).max(T::zero()))
}

/// Cyclic Jacobi eigenvalue iteration on a real symmetric `n x n` matrix (row-major,
/// destroyed). Returns eigenvalues and the eigenvector matrix (columns).
fn jacobi<T: Real>(a: &mut [T], n: usize) -> (Vec<T>, Vec<T>) {
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut total = T::zero();
        for r in 0..n {
            for c in 0..n {
                let x = a[r * n + c] * a[r * n + c];
                total = total + x;
                if r != c {
                    off = off + x;
                }
            }
        }
        if off <= eps * eps * total || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (T::of(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn eigh_of_pauli_y() {
        let y = CMatrix::from_rows(vec![vec![c(0., 0.), c(0., -1.)], vec![c(0., 1.), c(0., 0.)]]).unwrap();
        let vals = y.eigenvalues();
        assert!((vals[0] + 1.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        let back = y.map_spectrum(|l| l);
        assert!(back.max_abs_diff(&y) < 1e-12);
    }

    #[test]
    fn fidelity_closed_forms() {
        let zero = CMatrix::outer(&[c(1., 0.), c(0., 0.)]);
        let one = CMatrix::outer(&[c(0., 0.), c(1., 0.)]);
        let mixed = CMatrix::<f64>::identity(2).scale(c(0.5, 0.));
        assert!((fidelity(&zero, &zero).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity(&zero, &one).unwrap().abs() < 1e-12);
        assert!((fidelity(&zero, &mixed).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_psd_rejected() {
        let bad = CMatrix::from_rows(vec![vec![c(1.5, 0.), c(0., 0.)], vec![c(0., 0.), c(-0.5, 0.)]]).unwrap();
        let zero = CMatrix::outer(&[c(1., 0.), c(0., 0.)]);
        assert!(matches!(fidelity(&bad, &zero), Err(LinalgError::NotPsd(_))));
    }
}
