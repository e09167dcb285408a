//! Dense complex square matrices sized for spin systems (dimension ≤ 9).
//!
//! Everything here is generic over [`Real`], so the same algebra runs in
//! `f32` for quick checks and in `f64` for the dynamics. The Hermitian
//! eigensolver is cyclic Jacobi, which is accurate to working precision on
//! matrices this small and keeps eigenvectors orthonormal, so propagators
//! built from it are unitary to rounding.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
}

/// Row-major `n × n` complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix<T> {
    n: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> fmt::Debug for CMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{}", self.n, self.n)?;
        for i in 0..self.n {
            for j in 0..self.n {
                let z = self[(i, j)];
                write!(f, " {:+.4e}{:+.4e}i", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex::new(T::zero(), T::zero()); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_diag_real(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = Complex::new(x, T::zero());
        }
        m
    }

    pub fn from_diag(d: &[Complex<T>]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    /// Builds from row-major real entries.
    pub fn from_real_rows(n: usize, rows: &[T]) -> Self {
        assert_eq!(rows.len(), n * n, "expected {} entries", n * n);
        Self { n, data: rows.iter().map(|&x| Complex::new(x, T::zero())).collect() }
    }

    pub fn from_rows(n: usize, rows: Vec<Complex<T>>) -> Self {
        assert_eq!(rows.len(), n * n, "expected {} entries", n * n);
        Self { n, data: rows }
    }

    /// `|v⟩⟨v|`.
    pub fn outer(v: &[Complex<T>]) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        m
    }

    /// Matrix unit `|i⟩⟨j|`.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n);
        m[(i, j)] = Complex::new(T::one(), T::zero());
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn scale(&self, s: T) -> Self {
        Self { n: self.n, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_c(&self, s: Complex<T>) -> Self {
        Self { n: self.n, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n, "matmul dimension mismatch");
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] = out.data[i * n + j] + a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| {
                (0..self.n).fold(Complex::new(T::zero(), T::zero()), |acc, j| {
                    acc + self[(i, j)] * v[j]
                })
            })
            .collect()
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &Self) -> Self {
        u.matmul(self).matmul(&u.adjoint())
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Self) -> Self {
        let (a, b) = (self.n, rhs.n);
        let mut out = Self::zeros(a * b);
        for i in 0..a {
            for j in 0..a {
                let s = self[(i, j)];
                for k in 0..b {
                    for l in 0..b {
                        out[(i * b + k, j * b + l)] = s * rhs[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.n).fold(Complex::new(T::zero(), T::zero()), |acc, i| acc + self[(i, i)])
    }

    pub fn commutator(&self, rhs: &Self) -> Self {
        &self.matmul(rhs) - &rhs.matmul(self)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m + z.norm_sqr()).sqrt()
    }

    /// `max |A - A†|` relative to `max |A|` (absolute when `A = 0`).
    pub fn hermiticity_error(&self) -> T {
        let mut err = T::zero();
        for i in 0..self.n {
            for j in i..self.n {
                err = err.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        let scale = self.max_abs();
        if scale > T::zero() {
            err / scale
        } else {
            err
        }
    }

    /// `max |U†U - I|`.
    pub fn unitarity_error(&self) -> T {
        (&self.adjoint().matmul(self) - &Self::identity(self.n)).max_abs()
    }

    /// `(A + A†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale(T::lit(0.5))
    }

    pub fn is_diagonal(&self, tol: T) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| i == j || self[(i, j)].norm() <= tol))
    }

    /// Inverse by Gauss–Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Self, LinalgError> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let scale = self.max_abs().max(T::min_positive_value());
        for col in 0..n {
            let (piv, pmag) = (col..n)
                .map(|r| (r, a[(r, col)].norm()))
                .fold((col, T::zero()), |best, x| if x.1 > best.1 { x } else { best });
            if pmag <= T::epsilon() * scale * T::lit(n as f64) {
                return Err(LinalgError::Singular);
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(piv * n + j, col * n + j);
                    inv.data.swap(piv * n + j, col * n + j);
                }
            }
            let d = a[(col, col)].inv();
            for j in 0..n {
                a[(col, j)] = a[(col, j)] * d;
                inv[(col, j)] = inv[(col, j)] * d;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f.norm() == T::zero() {
                    continue;
                }
                for j in 0..n {
                    let (ac, ic) = (a[(col, j)], inv[(col, j)]);
                    a[(r, j)] = a[(r, j)] - f * ac;
                    inv[(r, j)] = inv[(r, j)] - f * ic;
                }
            }
        }
        Ok(inv)
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi.
    ///
    /// Returns eigenvalues in ascending order and the unitary whose columns
    /// are the matching eigenvectors. Only the Hermitian part of `self` is used.
    pub fn eigh(&self) -> (Vec<T>, Self) {
        let n = self.n;
        let mut a = self.hermitian_part();
        let mut v = Self::identity(n);
        let total = a.frobenius();
        if total == T::zero() {
            return (vec![T::zero(); n], v);
        }
        let tol = T::epsilon() * total;
        for _sweep in 0..64 {
            let mut off = T::zero();
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off + a[(p, q)].norm_sqr();
                }
            }
            if off.sqrt() <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    let g = apq.norm();
                    if g <= T::min_positive_value() {
                        continue;
                    }
                    let phase_conj = (apq / g).conj();
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let theta = (aqq - app) / (T::lit(2.0) * g);
                    let t = if theta.is_infinite() {
                        T::zero()
                    } else {
                        let t = T::one() / (theta.abs() + (theta * theta + T::one()).sqrt());
                        if theta < T::zero() {
                            -t
                        } else {
                            t
                        }
                    };
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    let zero = T::zero();
                    // J = diag(1, e^{-iφ}) · [[c, s], [-s, c]]
                    let jpp = Complex::new(c, zero);
                    let jpq = Complex::new(s, zero);
                    let jqp = phase_conj * (-s);
                    let jqq = phase_conj * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = akp * jpp + akq * jqp;
                        a[(k, q)] = akp * jpq + akq * jqq;
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * jpp + vkq * jqp;
                        v[(k, q)] = vkp * jpq + vkq * jqq;
                    }
                    for k in 0..n {
                        let bpk = a[(p, k)];
                        let bqk = a[(q, k)];
                        a[(p, k)] = jpp.conj() * bpk + jqp.conj() * bqk;
                        a[(q, k)] = jpq.conj() * bpk + jqq.conj() * bqk;
                    }
                    a[(p, q)] = Complex::new(zero, zero);
                    a[(q, p)] = Complex::new(zero, zero);
                    a[(p, p)] = Complex::new(a[(p, p)].re, zero);
                    a[(q, q)] = Complex::new(a[(q, q)].re, zero);
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
        let values = order.iter().map(|&i| a[(i, i)].re).collect();
        let mut vecs = Self::zeros(n);
        for (col, &src) in order.iter().enumerate() {
            for r in 0..n {
                vecs[(r, col)] = v[(r, src)];
            }
        }
        (values, vecs)
    }

    /// `exp(-i·s·H)` for Hermitian `H` (taken from `self`).
    pub fn exp_i_hermitian(&self, s: T) -> Self {
        let (vals, vecs) = self.eigh();
        let phases: Vec<Complex<T>> =
            vals.iter().map(|&l| Complex::from_polar(T::one(), -s * l)).collect();
        vecs.matmul(&Self::from_diag(&phases)).matmul(&vecs.adjoint())
    }

    pub fn column(&self, j: usize) -> Vec<Complex<T>> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }
}

/// Eigendecomposition of a unitary matrix.
#[derive(Debug, Clone)]
pub struct UnitaryEigen<T: Real> {
    /// Eigenphases `θ_j ∈ (-π, π]`, with eigenvalue `e^{iθ_j}`.
    pub phases: Vec<T>,
    /// Columns are eigenvectors.
    pub vectors: CMatrix<T>,
    /// `max_{j≠k} |(V†UV)_{jk}|`; near zero when the diagonalization is exact.
    pub residual: T,
}

/// Diagonalizes a unitary matrix through a Cayley transform.
///
/// `W = e^{-iβ}U` is mapped to the Hermitian `K = i(I − W)(I + W)⁻¹`, whose
/// eigenvalues `tan((θ − β)/2)` are injective in the eigenphase. `β` is chosen
/// so the pole `θ = β + π` sits in the widest gap of the candidate phases
/// `±acos(eig((U + U†)/2))`, a superset of the true eigenphases.
pub fn unitary_eigen<T: Real>(u: &CMatrix<T>) -> UnitaryEigen<T> {
    let n = u.dim();
    let (cosines, _) = u.hermitian_part().eigh();
    let mut cands: Vec<T> = cosines
        .iter()
        .flat_map(|&c| {
            let a = c.max(-T::one()).min(T::one()).acos();
            [a, -a]
        })
        .collect();
    cands.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let two_pi = T::TAU();
    let mut pole = T::PI();
    let mut best_gap = -T::one();
    for i in 0..cands.len() {
        let lo = cands[i];
        let hi = if i + 1 < cands.len() { cands[i + 1] } else { cands[0] + two_pi };
        let gap = hi - lo;
        if gap > best_gap {
            best_gap = gap;
            pole = lo + gap / T::lit(2.0);
        }
    }
    let beta = pole - T::PI();
    let w = u.scale_c(Complex::from_polar(T::one(), -beta));
    let id = CMatrix::<T>::identity(n);
    let i_unit = Complex::new(T::zero(), T::one());
    let k = match (&id + &w).inverse() {
        Ok(inv) => (&id - &w).matmul(&inv).scale_c(i_unit).hermitian_part(),
        Err(_) => u.hermitian_part(),
    };
    let (_, vecs) = k.eigh();
    let d = vecs.adjoint().matmul(u).matmul(&vecs);
    let phases = (0..n).map(|j| d[(j, j)].arg()).collect();
    let mut residual = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                residual = residual.max(d[(i, j)].norm());
            }
        }
    }
    UnitaryEigen { phases, vectors: vecs, residual }
}

/// `U^power` by eigendecomposition, falling back to binary exponentiation
/// when the eigenbasis does not diagonalize `U` to `1e-12`-level accuracy
/// (near-degenerate eigenphases).
pub fn unitary_power<T: Real>(u: &CMatrix<T>, power: u64) -> CMatrix<T> {
    let n = u.dim();
    if power == 0 {
        return CMatrix::identity(n);
    }
    if power == 1 {
        return u.clone();
    }
    let eig = unitary_eigen(u);
    let threshold = T::epsilon() * T::lit(1e4);
    if eig.residual <= threshold {
        let p = T::lit(power as f64);
        let diag: Vec<Complex<T>> =
            eig.phases.iter().map(|&th| Complex::from_polar(T::one(), th * p)).collect();
        return eig.vectors.matmul(&CMatrix::from_diag(&diag)).matmul(&eig.vectors.adjoint());
    }
    binary_power(u, power)
}

/// `U^power` by repeated squaring.
pub fn binary_power<T: Real>(u: &CMatrix<T>, mut power: u64) -> CMatrix<T> {
    let mut result = CMatrix::identity(u.dim());
    let mut base = u.clone();
    while power > 0 {
        if power & 1 == 1 {
            result = result.matmul(&base);
        }
        power >>= 1;
        if power > 0 {
            base = base.matmul(&base);
        }
    }
    result
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.n + j]
    }
}

impl<T: Real> Add for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn add(self, rhs: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!(self.n, rhs.n, "add dimension mismatch");
        CMatrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl<T: Real> Sub for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn sub(self, rhs: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!(self.n, rhs.n, "sub dimension mismatch");
        CMatrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl<T: Real> Neg for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn neg(self) -> CMatrix<T> {
        CMatrix { n: self.n, data: self.data.iter().map(|a| -a).collect() }
    }
}

impl<T: Real> Mul for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn mul(self, rhs: &CMatrix<T>) -> CMatrix<T> {
        self.matmul(rhs)
    }
}

impl<T: Real> AddAssign<&CMatrix<T>> for CMatrix<T> {
    fn add_assign(&mut self, rhs: &CMatrix<T>) {
        assert_eq!(self.n, rhs.n, "add dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a = *a + b;
        }
    }
}
