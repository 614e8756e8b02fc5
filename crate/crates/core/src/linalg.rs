//! Dense complex matrix arithmetic, Hermitian eigendecomposition and
//! principal PSD square roots.
//!
//! Everything here targets the small dense regime (N ≤ 16 in practice,
//! N ≤ 64 supported) of the simulation kernels, so the eigensolver is a
//! dependency-free complex Jacobi iteration rather than a blocked QR.

use num_complex::Complex64;

use crate::{Error, Result};

/// Maximum Jacobi sweeps before the eigensolver reports failure.
const MAX_SWEEPS: usize = 64;
/// Off-diagonal tolerance for Jacobi convergence, relative to the matrix scale.
const JACOBI_TOL: f64 = 1e-13;

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        m
    }

    /// Diagonal matrix from real entries.
    pub fn diag_real(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &x) in entries.iter().enumerate() {
            m.data[i * entries.len() + i] = Complex64::new(x, 0.0);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.dim + j] = v;
    }

    #[inline]
    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn entries_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Largest entry magnitude (max norm).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| self.get(j, i).conj())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= factor;
        }
        out
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a = Complex64::new(a.re * factor, a.im * factor);
        }
        out
    }

    /// `self += factor * other`, entrywise.
    pub fn add_assign_scaled(&mut self, other: &Self, factor: Complex64) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let mut out = Self::zeros(self.dim);
        self.mul_into(rhs, &mut out);
        out
    }

    /// `out = self * rhs` without allocating.
    pub fn mul_into(&self, rhs: &Self, out: &mut Self) {
        let n = self.dim;
        assert_eq!(rhs.dim, n);
        assert_eq!(out.dim, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self.data[i * n + k] * rhs.data[k * n + j];
                }
                out.data[i * n + j] = acc;
            }
        }
    }

    /// `out = self * rhs†` without forming the adjoint.
    pub fn mul_adjoint_into(&self, rhs: &Self, out: &mut Self) {
        let n = self.dim;
        assert_eq!(rhs.dim, n);
        assert_eq!(out.dim, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self.data[i * n + k] * rhs.data[j * n + k].conj();
                }
                out.data[i * n + j] = acc;
            }
        }
    }

    /// Max-norm distance, convenient in tests and guards.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Determinant and trace in one pass; determinant via LU with partial
    /// pivoting (trace is just the diagonal sum).
    pub fn det_and_trace(&self) -> (Complex64, Complex64) {
        (self.det(), self.trace())
    }

    pub fn det(&self) -> Complex64 {
        let n = self.dim;
        let mut lu = self.data.clone();
        let mut det = Complex64::new(1.0, 0.0);
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_mag = lu[col * n + col].norm();
            for r in (col + 1)..n {
                let mag = lu[r * n + col].norm();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = r;
                }
            }
            if pivot_mag == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            if pivot_row != col {
                for k in 0..n {
                    lu.swap(col * n + k, pivot_row * n + k);
                }
                det = -det;
            }
            let pivot = lu[col * n + col];
            det *= pivot;
            for r in (col + 1)..n {
                let factor = lu[r * n + col] / pivot;
                lu[r * n + col] = factor;
                for k in (col + 1)..n {
                    let sub = factor * lu[col * n + k];
                    lu[r * n + k] -= sub;
                }
            }
        }
        det
    }

    /// Matrix inverse via LU with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.dim;
        let mut lu = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_mag = lu[col * n + col].norm();
            for r in (col + 1)..n {
                let mag = lu[r * n + col].norm();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = r;
                }
            }
            if pivot_mag < 1e-300 {
                return Err(Error::SingularMatrix(pivot_mag));
            }
            if pivot_row != col {
                for k in 0..n {
                    lu.swap(col * n + k, pivot_row * n + k);
                }
                perm.swap(col, pivot_row);
            }
            let pivot = lu[col * n + col];
            for r in (col + 1)..n {
                let factor = lu[r * n + col] / pivot;
                lu[r * n + col] = factor;
                for k in (col + 1)..n {
                    let sub = factor * lu[col * n + k];
                    lu[r * n + k] -= sub;
                }
            }
        }
        let mut inv = Self::zeros(n);
        let mut work = vec![Complex64::new(0.0, 0.0); n];
        for col in 0..n {
            // solve A x = e_col using the stored LU and permutation
            for (i, w) in work.iter_mut().enumerate() {
                *w = if perm[i] == col {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            for i in 1..n {
                let mut acc = work[i];
                for k in 0..i {
                    acc -= lu[i * n + k] * work[k];
                }
                work[i] = acc;
            }
            for i in (0..n).rev() {
                let mut acc = work[i];
                for k in (i + 1)..n {
                    acc -= lu[i * n + k] * work[k];
                }
                work[i] = acc / lu[i * n + i];
            }
            for i in 0..n {
                inv.data[i * n + col] = work[i];
            }
        }
        Ok(inv)
    }
}

/// Hermitian matrix; `entries[i][j] == conj(entries[j][i])` holds exactly
/// because construction always mirrors the upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    inner: ComplexMatrix,
}

impl HermitianMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            inner: ComplexMatrix::zeros(dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: ComplexMatrix::identity(dim),
        }
    }

    pub fn identity_scaled(dim: usize, factor: f64) -> Self {
        let mut m = ComplexMatrix::zeros(dim);
        for i in 0..dim {
            m.set(i, i, Complex64::new(factor, 0.0));
        }
        Self { inner: m }
    }

    pub fn diag_real(entries: &[f64]) -> Self {
        Self {
            inner: ComplexMatrix::diag_real(entries),
        }
    }

    /// Symmetrize an arbitrary square matrix: (A + A†)/2. The mirrored lower
    /// triangle is stored as the exact conjugate of the upper one, so the
    /// Hermitian invariant holds bit-for-bit.
    pub fn symmetrized(a: &ComplexMatrix) -> Self {
        let n = a.dim();
        let mut m = ComplexMatrix::zeros(n);
        for i in 0..n {
            m.set(i, i, Complex64::new(a.get(i, i).re, 0.0));
            for j in (i + 1)..n {
                let z = 0.5 * (a.get(i, j) + a.get(j, i).conj());
                m.set(i, j, z);
                m.set(j, i, z.conj());
            }
        }
        Self { inner: m }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.inner.get(i, j)
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.inner
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.inner
    }

    /// Entrywise sum; conjugate symmetry is preserved exactly by IEEE
    /// addition of conjugate pairs.
    pub fn add(&self, other: &Self) -> Self {
        Self {
            inner: self.inner.add(&other.inner),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            inner: self.inner.sub(&other.inner),
        }
    }

    /// Scaling by a real factor preserves conjugate symmetry exactly.
    pub fn scale_real(&self, factor: f64) -> Self {
        Self {
            inner: self.inner.scale_real(factor),
        }
    }

    /// `self * self`, symmetrized to keep the invariant exact.
    pub fn square(&self) -> Self {
        Self::symmetrized(&self.inner.mul(&self.inner))
    }

    /// Real trace (the imaginary part is identically zero by the invariant).
    pub fn trace_real(&self) -> f64 {
        self.inner.trace().re
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.max_abs()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.inner.max_abs_diff(&other.inner)
    }

    /// Ascending eigenvalues (discarding the eigenvectors).
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(eigh(self)?.eigenvalues)
    }

    /// Worst violation of conjugate symmetry; zero by construction.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }
}

impl AsRef<ComplexMatrix> for HermitianMatrix {
    fn as_ref(&self) -> &ComplexMatrix {
        &self.inner
    }
}

/// (A + A†)/2 of a square matrix.
pub fn hermitian_part(a: &ComplexMatrix) -> HermitianMatrix {
    HermitianMatrix::symmetrized(a)
}

/// Result of a Hermitian eigendecomposition: `H = U diag(λ) U†` with λ
/// ascending and U unitary (columns are eigenvectors).
#[derive(Debug, Clone)]
pub struct Eigh {
    pub eigenvalues: Vec<f64>,
    pub vectors: ComplexMatrix,
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
///
/// Each rotation first phases the (p,q) entry to a nonnegative real and then
/// applies the classical symmetric Jacobi rotation, which keeps the
/// accumulated transform unitary to machine precision.
pub fn eigh(h: &HermitianMatrix) -> Result<Eigh> {
    let n = h.dim();
    let mut a = h.as_matrix().clone();
    let mut u = ComplexMatrix::identity(n);

    if n == 1 {
        return Ok(Eigh {
            eigenvalues: vec![a.get(0, 0).re],
            vectors: u,
        });
    }

    let scale = a.max_abs().max(1e-300);
    let tol = JACOBI_TOL * scale;

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a.get(p, q).norm());
            }
        }
        if off <= tol {
            converged = true;
            break;
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                let r = apq.norm();
                if r <= tol * 1e-3 {
                    continue;
                }
                // phase out: column/row q absorb e^{∓iφ} so the pivot is real
                let phase = apq / r; // e^{iφ}
                let phase_conj = phase.conj();
                for k in 0..n {
                    let v = a.get(k, q) * phase_conj;
                    a.set(k, q, v);
                }
                for k in 0..n {
                    let v = a.get(q, k) * phase;
                    a.set(q, k, v);
                }
                for k in 0..n {
                    let v = u.get(k, q) * phase_conj;
                    u.set(k, q, v);
                }
                // real symmetric rotation annihilating the (p,q) pivot
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, akp.scale(c) - akq.scale(s));
                    a.set(k, q, akp.scale(s) + akq.scale(c));
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, apk.scale(c) - aqk.scale(s));
                    a.set(q, k, apk.scale(s) + aqk.scale(c));
                }
                for k in 0..n {
                    let ukp = u.get(k, p);
                    let ukq = u.get(k, q);
                    u.set(k, p, ukp.scale(c) - ukq.scale(s));
                    u.set(k, q, ukp.scale(s) + ukq.scale(c));
                }
                // scrub rounding drift off the pivot pair
                a.set(p, q, Complex64::new(0.0, 0.0));
                a.set(q, p, Complex64::new(0.0, 0.0));
                let dpp = a.get(p, p).re;
                let dqq = a.get(q, q).re;
                a.set(p, p, Complex64::new(dpp, 0.0));
                a.set(q, q, Complex64::new(dqq, 0.0));
            }
        }
    }
    if !converged {
        // final check: the last sweep may have converged without re-testing
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a.get(p, q).norm());
            }
        }
        if off > tol {
            return Err(Error::ConvergenceFailure(MAX_SWEEPS));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, |i, j| u.get(i, order[j]));
    Ok(Eigh {
        eigenvalues,
        vectors,
    })
}

/// Principal square root of a positive semidefinite Hermitian matrix via
/// eigendecomposition. Eigenvalues below `-1e-10 * max|H|` are rejected;
/// small negative rounding residue is clamped to zero.
pub fn psd_sqrt(h: &HermitianMatrix) -> Result<HermitianMatrix> {
    let n = h.dim();
    let decomp = eigh(h)?;
    let scale = h.max_abs().max(1.0e-300);
    let mut roots = Vec::with_capacity(n);
    for &lambda in &decomp.eigenvalues {
        if lambda < -1e-10 * scale {
            return Err(Error::NegativeEigenvalue(lambda));
        }
        roots.push(lambda.max(0.0).sqrt());
    }
    // U diag(sqrt λ) U†
    let u = &decomp.vectors;
    let mut out = ComplexMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += u.get(i, k) * roots[k] * u.get(j, k).conj();
            }
            out.set(i, j, acc);
        }
    }
    Ok(HermitianMatrix::symmetrized(&out))
}

/// Inverse principal square root of a positive definite Hermitian matrix.
pub fn psd_inv_sqrt(h: &HermitianMatrix) -> Result<HermitianMatrix> {
    let n = h.dim();
    let decomp = eigh(h)?;
    let scale = h.max_abs().max(1.0e-300);
    let mut roots = Vec::with_capacity(n);
    for &lambda in &decomp.eigenvalues {
        if lambda < 1e-14 * scale {
            return Err(Error::NegativeEigenvalue(lambda));
        }
        roots.push(1.0 / lambda.sqrt());
    }
    let u = &decomp.vectors;
    let mut out = ComplexMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += u.get(i, k) * roots[k] * u.get(j, k).conj();
            }
            out.set(i, j, acc);
        }
    }
    Ok(HermitianMatrix::symmetrized(&out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn splitmix(state: &mut u64) -> f64 {
        *state = state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    fn random_matrix(n: usize, state: &mut u64) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, |_, _| Complex64::new(splitmix(state), splitmix(state)))
    }

    fn random_hermitian(n: usize, state: &mut u64) -> HermitianMatrix {
        hermitian_part(&random_matrix(n, state))
    }

    // independent conjugate-transpose for the hermitian_part oracle
    fn adjoint_oracle(a: &ComplexMatrix) -> ComplexMatrix {
        let n = a.dim();
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let z = a.get(i, j);
                out.set(j, i, Complex64::new(z.re, -z.im));
            }
        }
        out
    }

    // brute-force cofactor expansion, usable up to N = 4
    fn det_cofactor(a: &ComplexMatrix) -> Complex64 {
        let n = a.dim();
        if n == 1 {
            return a.get(0, 0);
        }
        let mut det = Complex64::new(0.0, 0.0);
        let mut sign = 1.0;
        for col in 0..n {
            let minor = ComplexMatrix::from_fn(n - 1, |i, j| {
                let jj = if j < col { j } else { j + 1 };
                a.get(i + 1, jj)
            });
            det += a.get(0, col) * det_cofactor(&minor) * sign;
            sign = -sign;
        }
        det
    }

    #[test]
    fn hermitian_part_identity_is_identity() {
        let id = ComplexMatrix::identity(3);
        let h = hermitian_part(&id);
        assert_eq!(h.as_matrix(), &id);
    }

    #[test]
    fn hermitian_part_forced_by_definition() {
        let mut a = ComplexMatrix::zeros(2);
        a.set(0, 1, Complex64::new(2.0, 0.0));
        let h = hermitian_part(&a);
        assert_eq!(h.get(0, 0), Complex64::new(0.0, 0.0));
        assert_eq!(h.get(0, 1), Complex64::new(1.0, 0.0));
        assert_eq!(h.get(1, 0), Complex64::new(1.0, 0.0));
        assert_eq!(h.get(1, 1), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn hermitian_part_symmetry_is_exact() {
        let mut state = 12345u64;
        for _ in 0..50 {
            let a = random_matrix(3, &mut state);
            let h = hermitian_part(&a);
            assert_eq!(h.symmetry_defect(), 0.0);
            // agreement with an independent adjoint implementation
            let expect = a.add(&adjoint_oracle(&a)).scale_real(0.5);
            assert!(h.as_matrix().max_abs_diff(&expect) < 1e-15);
        }
    }

    #[test]
    fn eigh_identity() {
        let h = HermitianMatrix::identity(2);
        let e = eigh(&h).unwrap();
        assert!((e.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigh_sorts_ascending() {
        let h = HermitianMatrix::diag_real(&[3.0, 1.0]);
        let e = eigh(&h).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 3.0]);
    }

    #[test]
    fn eigh_classic_symmetric() {
        let mut a = ComplexMatrix::zeros(2);
        a.set(0, 1, Complex64::new(1.0, 0.0));
        a.set(1, 0, Complex64::new(1.0, 0.0));
        let e = eigh(&HermitianMatrix::symmetrized(&a)).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigh_reconstruction_and_unitarity_random() {
        let mut state = 777u64;
        for trial in 0..1000 {
            let n = 1 + (trial % 6);
            let h = random_hermitian(n, &mut state);
            let e = eigh(&h).unwrap();
            let scale = 1.0 + h.max_abs();
            // U Λ U† = H
            let lam = ComplexMatrix::diag_real(&e.eigenvalues);
            let recon = e.vectors.mul(&lam).mul(&e.vectors.adjoint());
            assert!(
                recon.max_abs_diff(h.as_matrix()) <= 1e-10 * scale,
                "reconstruction failed at trial {trial} (n = {n})"
            );
            // U†U = I
            let gram = e.vectors.adjoint().mul(&e.vectors);
            assert!(gram.max_abs_diff(&ComplexMatrix::identity(n)) <= 1e-12 * n as f64);
            // ascending order
            for w in e.eigenvalues.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn psd_sqrt_trivial_cases() {
        let id = HermitianMatrix::identity(3);
        let s = psd_sqrt(&id).unwrap();
        assert!(s.max_abs_diff(&id) < 1e-14);

        let d = HermitianMatrix::diag_real(&[4.0, 9.0]);
        let s = psd_sqrt(&d).unwrap();
        assert!(s.max_abs_diff(&HermitianMatrix::diag_real(&[2.0, 3.0])) < 1e-13);

        // X = 0: sqrt((I + X^2)/2) = I/sqrt(2)
        let x = HermitianMatrix::zeros(3);
        let arg = x.square().add(&HermitianMatrix::identity(3)).scale_real(0.5);
        let s = psd_sqrt(&arg).unwrap();
        let expect = HermitianMatrix::identity_scaled(3, 1.0 / 2.0f64.sqrt());
        assert!(s.max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn psd_sqrt_squares_back_and_is_consistent() {
        let mut state = 4242u64;
        for _ in 0..100 {
            let a = random_matrix(4, &mut state);
            // build an SPD matrix: A A† + I/2
            let spd = hermitian_part(&a.mul(&a.adjoint()))
                .add(&HermitianMatrix::identity_scaled(4, 0.5));
            let s = psd_sqrt(&spd).unwrap();
            let back = s.square();
            assert!(back.max_abs_diff(&spd) <= 1e-10 * (1.0 + spd.max_abs()));
            // psd_sqrt(S*S) = S
            let again = psd_sqrt(&s.square()).unwrap();
            assert!(again.max_abs_diff(&s) <= 1e-8 * (1.0 + s.max_abs()));
            assert_eq!(s.symmetry_defect(), 0.0);
        }
    }

    #[test]
    fn psd_sqrt_rejects_negative() {
        let d = HermitianMatrix::diag_real(&[1.0, -0.5]);
        assert!(matches!(
            psd_sqrt(&d),
            Err(Error::NegativeEigenvalue(_))
        ));
    }

    #[test]
    fn det_and_trace_trivial() {
        let id = ComplexMatrix::identity(4);
        let (d, t) = id.det_and_trace();
        assert!((d - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((t - Complex64::new(4.0, 0.0)).norm() < 1e-15);

        let mut a = ComplexMatrix::zeros(2);
        a.set(0, 0, Complex64::new(2.0, 0.0));
        a.set(1, 1, Complex64::new(0.0, 3.0));
        let (d, t) = a.det_and_trace();
        assert!((d - Complex64::new(0.0, 6.0)).norm() < 1e-15);
        assert!((t - Complex64::new(2.0, 3.0)).norm() < 1e-15);
    }

    #[test]
    fn det_matches_cofactor_oracle() {
        let mut state = 999u64;
        for _ in 0..50 {
            let a = random_matrix(4, &mut state);
            let lu = a.det();
            let co = det_cofactor(&a);
            assert!((lu - co).norm() <= 1e-10 * co.norm().max(1.0));
        }
    }

    #[test]
    fn inverse_round_trip() {
        let mut state = 31u64;
        for _ in 0..50 {
            let a = random_matrix(3, &mut state).add(&ComplexMatrix::identity(3).scale_real(2.0));
            let inv = a.inverse().unwrap();
            let prod = a.mul(&inv);
            assert!(prod.max_abs_diff(&ComplexMatrix::identity(3)) < 1e-11);
        }
    }

    #[test]
    fn hermitian_add_scale_preserve_exact_symmetry() {
        let mut state = 55u64;
        let a = random_hermitian(5, &mut state);
        let b = random_hermitian(5, &mut state);
        let c = a.add(&b).scale_real(-1.75);
        assert_eq!(c.symmetry_defect(), 0.0);
        assert_eq!(a.square().symmetry_defect(), 0.0);
    }
}
