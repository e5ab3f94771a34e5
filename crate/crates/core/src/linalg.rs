//! Dense complex and Hermitian matrix kernels.
//!
//! Everything here works on small square matrices (dimension up to a few
//! dozen). Hermitian eigenproblems are solved with cyclic complex Jacobi
//! rotations, which converge unconditionally and leave residuals near
//! machine precision.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relative tolerance used for positive-semidefiniteness throughout the crate.
pub const PSD_TOL: f64 = 1e-9;

/// Relative asymmetry accepted when building a [`HermitianOperator`].
pub const HERMITIAN_TOL: f64 = 1e-10;

const MAX_JACOBI_SWEEPS: usize = 100;

#[cfg(test)]
pub(crate) fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A dense `d x d` complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexOperator {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexOperator({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = self[(i, j)];
                    if z.im == 0.0 {
                        format!("{:.6}", z.re)
                    } else {
                        format!("{:.6}{:+.6}i", z.re, z.im)
                    }
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl ComplexOperator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    /// Builds a matrix from rows, rejecting ragged or non-finite input.
    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidInput("matrix must be non-empty".into()));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend(row);
        }
        let m = Self { dim, data };
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(m)
    }

    /// Convenience constructor for real matrices, mostly used in tests.
    pub fn from_real(rows: &[&[f64]]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
                .collect(),
        )
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    /// The matrix unit `e_{ij}`.
    pub fn unit(dim: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(dim);
        m[(i, j)] = C64::new(1.0, 0.0);
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<C64>> {
        self.data.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `sum_{ij} |a_ij|`.
    pub fn entry_abs_sum(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).sum()
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row = &other.data[k * d..(k + 1) * d];
                let dst = &mut out.data[i * d..(i + 1) * d];
                for (o, b) in dst.iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        let d = self.dim;
        (0..d)
            .map(|i| (0..d).map(|j| self.data[i * d + j] * v[j]).sum())
            .collect()
    }

    /// `(A + A*) / 2`.
    pub fn hermitian_part(&self) -> HermitianOperator {
        HermitianOperator::symmetrize(self)
    }

    /// `(A - A*) / 2i`, so that `A = Re A + i Im A` with both parts Hermitian.
    pub fn imaginary_part(&self) -> HermitianOperator {
        let skew = Self::from_fn(self.dim, |i, j| {
            (self[(i, j)] - self[(j, i)].conj()) / C64::new(0.0, 2.0)
        });
        HermitianOperator::symmetrize(&skew)
    }

    /// Largest entrywise deviation from Hermitian symmetry.
    pub fn asymmetry(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.asymmetry() <= tol * (1.0 + self.max_abs())
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim != expected {
            return Err(Error::DimMismatch {
                expected,
                found: self.dim,
            });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexOperator {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexOperator {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &ComplexOperator {
    type Output = ComplexOperator;
    fn add(self, rhs: &ComplexOperator) -> ComplexOperator {
        assert_eq!(self.dim, rhs.dim, "add dimension mismatch");
        ComplexOperator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexOperator {
    type Output = ComplexOperator;
    fn sub(self, rhs: &ComplexOperator) -> ComplexOperator {
        assert_eq!(self.dim, rhs.dim, "sub dimension mismatch");
        ComplexOperator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &ComplexOperator {
    type Output = ComplexOperator;
    fn neg(self) -> ComplexOperator {
        self.scale_real(-1.0)
    }
}

impl Mul for &ComplexOperator {
    type Output = ComplexOperator;
    fn mul(self, rhs: &ComplexOperator) -> ComplexOperator {
        self.matmul(rhs)
    }
}

impl AddAssign<&ComplexOperator> for ComplexOperator {
    fn add_assign(&mut self, rhs: &ComplexOperator) {
        assert_eq!(self.dim, rhs.dim, "add dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

/// Complex scalars are written as `[re, im]`, matrices as row-major nested
/// arrays of those pairs.
impl Serialize for ComplexOperator {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = self
            .rows()
            .into_iter()
            .map(|r| r.into_iter().map(|z| [z.re, z.im]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScalarRepr {
    Pair([f64; 2]),
    Real(f64),
}

impl From<ScalarRepr> for C64 {
    fn from(s: ScalarRepr) -> C64 {
        match s {
            ScalarRepr::Pair([re, im]) => C64::new(re, im),
            ScalarRepr::Real(re) => C64::new(re, 0.0),
        }
    }
}

impl<'de> Deserialize<'de> for ComplexOperator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<ScalarRepr>> = Vec::deserialize(deserializer)?;
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().map(C64::from).collect())
            .collect();
        ComplexOperator::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// A Hermitian matrix. Symmetry is exact: construction mirrors the upper
/// triangle and zeroes the imaginary part of the diagonal.
#[derive(Clone, PartialEq)]
pub struct HermitianOperator(ComplexOperator);

impl fmt::Debug for HermitianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hermitian")?;
        self.0.fmt(f)
    }
}

impl HermitianOperator {
    /// Validates Hermitian symmetry within [`HERMITIAN_TOL`] and stores the
    /// exactly symmetrized matrix.
    pub fn new(op: ComplexOperator) -> Result<Self> {
        if !op.is_finite() {
            return Err(Error::NonFinite);
        }
        let asymmetry = op.asymmetry();
        if asymmetry > HERMITIAN_TOL * (1.0 + op.max_abs()) {
            return Err(Error::NotHermitian { asymmetry });
        }
        Ok(Self::symmetrize(&op))
    }

    fn symmetrize(op: &ComplexOperator) -> Self {
        let d = op.dim();
        let mut m = ComplexOperator::zeros(d);
        for i in 0..d {
            m[(i, i)] = C64::new(op[(i, i)].re, 0.0);
            for j in (i + 1)..d {
                let z = (op[(i, j)] + op[(j, i)].conj()) * 0.5;
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        Self(m)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(ComplexOperator::zeros(dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(ComplexOperator::identity(dim))
    }

    pub fn diag(values: &[f64]) -> Self {
        Self(ComplexOperator::diag(values))
    }

    pub fn from_real(rows: &[&[f64]]) -> Result<Self> {
        Self::new(ComplexOperator::from_real(rows)?)
    }

    /// Rank-one projector `|v><v|` (not normalized).
    pub fn outer(v: &[C64]) -> Self {
        Self::symmetrize(&ComplexOperator::from_fn(v.len(), |i, j| v[i] * v[j].conj()))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_operator(&self) -> &ComplexOperator {
        &self.0
    }

    pub fn into_operator(self) -> ComplexOperator {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(&self.0 - &other.0)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(self.0.scale_real(c))
    }

    pub fn add_scaled_identity(&self, c: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.dim() {
            m[(i, i)] += c;
        }
        Self(m)
    }

    /// `K H K*` for an arbitrary square `K`.
    pub fn congruence(&self, k: &ComplexOperator) -> Self {
        Self::symmetrize(&k.matmul(&self.0).matmul(&k.adjoint()))
    }

    pub fn eigen(&self) -> Eigen {
        hermitian_eigen(self)
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigen().values[0]
    }

    pub fn lambda_min(&self) -> f64 {
        *self.eigen().values.last().expect("non-empty spectrum")
    }

    /// Operator norm, `max |lambda_i|`.
    pub fn norm(&self) -> f64 {
        let e = self.eigen();
        e.values.iter().map(|l| l.abs()).fold(0.0, f64::max)
    }

    /// Trace norm, `sum |lambda_i|`.
    pub fn trace_norm(&self) -> f64 {
        self.eigen().values.iter().map(|l| l.abs()).sum()
    }

    /// Real inner product `tr(self * other)`.
    pub fn inner(&self, other: &Self) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                let a = self.0[(i, j)];
                let b = other.0[(j, i)];
                acc += a.re * b.re - a.im * b.im;
            }
        }
        acc
    }

    /// `<v, H v>` for a vector `v`.
    pub fn expectation(&self, v: &[C64]) -> f64 {
        let hv = self.0.mul_vec(v);
        v.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

impl Serialize for HermitianOperator {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HermitianOperator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let op = ComplexOperator::deserialize(deserializer)?;
        HermitianOperator::new(op).map_err(serde::de::Error::custom)
    }
}

/// Spectral decomposition `A = V diag(values) V*` with eigenvalues sorted in
/// descending order and eigenvectors stored as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: ComplexOperator,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        let d = self.vectors.dim();
        (0..d).map(|i| self.vectors[(i, k)]).collect()
    }

    /// `V diag(f(lambda)) V*`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let d = self.vectors.dim();
        let fl: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let m = ComplexOperator::from_fn(d, |i, j| {
            (0..d)
                .map(|k| self.vectors[(i, k)] * fl[k] * self.vectors[(j, k)].conj())
                .sum()
        });
        HermitianOperator::symmetrize(&m)
    }

    pub fn reconstruct(&self) -> HermitianOperator {
        self.map(|l| l)
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi sweeps.
pub fn hermitian_eigen(a: &HermitianOperator) -> Eigen {
    let n = a.dim();
    let mut m = a.0.clone();
    let mut v = ComplexOperator::identity(n);
    let frob = m.frobenius_norm();
    if frob > 0.0 {
        for _sweep in 0..MAX_JACOBI_SWEEPS {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += m[(p, q)].norm_sqr();
                }
            }
            if off.sqrt() <= 1e-16 * frob {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    jacobi_rotate(&mut m, &mut v, p, q);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = ComplexOperator::from_fn(n, |i, k| v[(i, order[k])]);
    Eigen { values, vectors }
}

fn jacobi_rotate(m: &mut ComplexOperator, v: &mut ComplexOperator, p: usize, q: usize) {
    let g = m[(p, q)];
    let r = g.norm();
    if r == 0.0 {
        return;
    }
    let phase = g / r;
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau == 0.0 {
        1.0
    } else {
        tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // V = [[c, s], [-s conj(phase), c conj(phase)]] acting on coordinates (p, q).
    let v00 = C64::new(c, 0.0);
    let v01 = C64::new(s, 0.0);
    let v10 = -phase.conj() * s;
    let v11 = phase.conj() * c;
    let n = m.dim();
    for k in 0..n {
        let akp = m[(k, p)];
        let akq = m[(k, q)];
        m[(k, p)] = akp * v00 + akq * v10;
        m[(k, q)] = akp * v01 + akq * v11;
    }
    for k in 0..n {
        let apk = m[(p, k)];
        let aqk = m[(q, k)];
        m[(p, k)] = v00.conj() * apk + v10.conj() * aqk;
        m[(q, k)] = v01.conj() * apk + v11.conj() * aqk;
    }
    m[(p, q)] = C64::new(0.0, 0.0);
    m[(q, p)] = C64::new(0.0, 0.0);
    m[(p, p)] = C64::new(app - t * r, 0.0);
    m[(q, q)] = C64::new(aqq + t * r, 0.0);
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * v00 + vkq * v10;
        v[(k, q)] = vkp * v01 + vkq * v11;
    }
}

/// `sqrt(lambda_max(A* A))`.
pub fn operator_norm(a: &ComplexOperator) -> f64 {
    if a.is_hermitian(0.0) {
        return HermitianOperator::symmetrize(a).norm();
    }
    let gram = HermitianOperator::symmetrize(&a.adjoint().matmul(a));
    gram.lambda_max().max(0.0).sqrt()
}

/// Jordan decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct PositiveParts {
    pub positive: HermitianOperator,
    pub negative: HermitianOperator,
    pub abs: HermitianOperator,
}

pub fn positive_parts(a: &HermitianOperator) -> PositiveParts {
    let e = a.eigen();
    PositiveParts {
        positive: e.map(|l| l.max(0.0)),
        negative: e.map(|l| (-l).max(0.0)),
        abs: e.map(f64::abs),
    }
}

/// Absolute value `|A| = (A* A)^{1/2}` of an arbitrary square matrix.
pub fn abs_operator(a: &ComplexOperator) -> HermitianOperator {
    let gram = HermitianOperator::symmetrize(&a.adjoint().matmul(a));
    gram.eigen().map(|l| l.max(0.0).sqrt())
}

/// Whether `lambda_min(A) >= -tol (1 + ||A||)`.
pub fn is_psd(a: &HermitianOperator, tol: f64) -> bool {
    let e = a.eigen();
    let norm = e.values.iter().map(|l| l.abs()).fold(0.0, f64::max);
    *e.values.last().expect("non-empty spectrum") >= -tol * (1.0 + norm)
}

/// Square root of a positive semidefinite matrix. Eigenvalues that are
/// negative but within `tol (1 + ||A||)` of zero are clamped to zero.
///
/// Eigenvalues at rounding level (`8 d eps ||A||`) are also set to zero:
/// the eigensolver cannot resolve them, and their square roots would
/// otherwise inject noise of order `sqrt(eps)` on singular inputs.
pub fn psd_sqrt(a: &HermitianOperator, tol: f64) -> Result<HermitianOperator> {
    let e = a.eigen();
    let norm = e.values.iter().map(|l| l.abs()).fold(0.0, f64::max);
    let min = *e.values.last().expect("non-empty spectrum");
    if min < -tol * (1.0 + norm) {
        return Err(Error::MatrixNotPsd {
            min_eigenvalue: min,
        });
    }
    let noise = 8.0 * a.dim() as f64 * f64::EPSILON * norm;
    Ok(e.map(|l| if l <= noise { 0.0 } else { l.sqrt() }))
}

/// `tr(t A)`.
pub fn trace_pairing(t: &HermitianOperator, a: &ComplexOperator) -> Result<C64> {
    a.check_dim(t.dim())?;
    let d = t.dim();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += t.0[(i, j)] * a[(j, i)];
        }
    }
    Ok(acc)
}

/// Lower Cholesky factor `L` with `A = L L*`, or `None` if `A` is not
/// numerically positive definite.
pub fn cholesky(a: &HermitianOperator) -> Option<ComplexOperator> {
    let n = a.dim();
    let mut l = ComplexOperator::zeros(n);
    for j in 0..n {
        let mut diag = a.0[(j, j)].re;
        for k in 0..j {
            diag -= l[(j, k)].norm_sqr();
        }
        if !(diag > 0.0) {
            return None;
        }
        let ljj = diag.sqrt();
        l[(j, j)] = C64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = a.0[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(l)
}

/// Inverse of a lower-triangular matrix.
pub fn lower_inverse(l: &ComplexOperator) -> ComplexOperator {
    let n = l.dim();
    let mut inv = ComplexOperator::zeros(n);
    for j in 0..n {
        inv[(j, j)] = C64::new(1.0, 0.0) / l[(j, j)];
        for i in (j + 1)..n {
            let mut s = C64::new(0.0, 0.0);
            for k in j..i {
                s += l[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s / l[(i, i)];
        }
    }
    inv
}

/// Inverse of a Hermitian positive definite matrix, `None` if not PD.
pub fn pd_inverse(a: &HermitianOperator) -> Option<HermitianOperator> {
    let l = cholesky(a)?;
    let li = lower_inverse(&l);
    Some(HermitianOperator::symmetrize(&li.adjoint().matmul(&li)))
}

/// Orthonormal basis of the real vector space of `d x d` Hermitian matrices
/// under `<A, B> = tr(AB)`: diagonal units, then for each `i < j` the
/// symmetric and antisymmetric off-diagonal pairs scaled by `1/sqrt 2`.
pub fn hermitian_basis(d: usize) -> Vec<HermitianOperator> {
    (0..d * d)
        .map(|k| {
            let mut coords = vec![0.0; d * d];
            coords[k] = 1.0;
            hermitian_from_coords(d, &coords)
        })
        .collect()
}

/// Coordinates of `h` in the basis of [`hermitian_basis`], so that
/// `tr(AB) = coords(A) . coords(B)`.
pub fn hermitian_coords(h: &HermitianOperator) -> Vec<f64> {
    let d = h.dim();
    let s = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        out.push(h.0[(i, i)].re);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let z = h.0[(i, j)];
            out.push(s * z.re);
            out.push(s * z.im);
        }
    }
    out
}

pub fn hermitian_from_coords(d: usize, coords: &[f64]) -> HermitianOperator {
    assert_eq!(coords.len(), d * d, "coordinate vector has wrong length");
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = ComplexOperator::zeros(d);
    for i in 0..d {
        m[(i, i)] = C64::new(coords[i], 0.0);
    }
    let mut k = d;
    for i in 0..d {
        for j in (i + 1)..d {
            let z = C64::new(coords[k] * s, coords[k + 1] * s);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 2;
        }
    }
    HermitianOperator(m)
}

/// A density operator: positive semidefinite with unit trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct State(HermitianOperator);

impl State {
    pub fn new(h: HermitianOperator) -> Result<Self> {
        if !is_psd(&h, PSD_TOL) {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (minimum eigenvalue {:.3e})",
                h.lambda_min()
            )));
        }
        let tr = h.trace();
        if (tr - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        Ok(Self(h))
    }

    /// Rescales a nonzero positive semidefinite matrix to unit trace.
    pub fn normalized(h: HermitianOperator) -> Result<Self> {
        let tr = h.trace();
        if !(tr > 0.0) {
            return Err(Error::InvalidState("trace must be positive".into()));
        }
        Self::new(h.scale(1.0 / tr))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(HermitianOperator::identity(dim).scale(1.0 / dim as f64))
    }

    /// Pure state `|v><v| / <v, v>`.
    pub fn pure(v: &[C64]) -> Result<Self> {
        let n: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        Ok(Self(HermitianOperator::outer(v).scale(1.0 / n)))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0.lambda_min()
    }

    pub fn is_full_rank(&self, tol: f64) -> bool {
        self.min_eigenvalue() > tol
    }
}

impl<'de> Deserialize<'de> for State {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let h = HermitianOperator::deserialize(deserializer)?;
        State::new(h).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &HermitianOperator, e: &Eigen) -> f64 {
        let d = a.dim();
        let av = a.as_operator().matmul(&e.vectors);
        let vl = ComplexOperator::from_fn(d, |i, k| e.vectors[(i, k)] * e.values[k]);
        (&av - &vl).max_abs()
    }

    #[test]
    fn identity_spectrum() {
        let e = HermitianOperator::identity(2).eigen();
        assert_eq!(e.values, vec![1.0, 1.0]);
    }

    #[test]
    fn diagonal_spectrum_sorted_descending() {
        let e = HermitianOperator::diag(&[-3.0, 3.0]).eigen();
        assert_eq!(e.values, vec![3.0, -3.0]);
    }

    #[test]
    fn seven_four_four_one() {
        let a = HermitianOperator::from_real(&[&[7.0, 4.0], &[4.0, 1.0]]).unwrap();
        let e = a.eigen();
        assert!((e.values[0] - 9.0).abs() < 1e-12);
        assert!((e.values[1] + 1.0).abs() < 1e-12);
        assert!(residual(&a, &e) < 1e-12);
        assert!((operator_norm(a.as_operator()) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn complex_hermitian_residual() {
        let a = HermitianOperator::new(
            ComplexOperator::from_rows(vec![
                vec![c64(2.0, 0.0), c64(1.0, 1.0), c64(0.0, -0.5)],
                vec![c64(1.0, -1.0), c64(-1.0, 0.0), c64(0.3, 0.2)],
                vec![c64(0.0, 0.5), c64(0.3, -0.2), c64(0.5, 0.0)],
            ])
            .unwrap(),
        )
        .unwrap();
        let e = a.eigen();
        assert!(residual(&a, &e) < 1e-12);
        let vv = e.vectors.matmul(&e.vectors.adjoint());
        assert!((&vv - &ComplexOperator::identity(3)).max_abs() < 1e-12);
    }

    #[test]
    fn norms_of_small_examples() {
        assert_eq!(operator_norm(&ComplexOperator::zeros(3)), 0.0);
        let a = ComplexOperator::from_real(&[&[1.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!((operator_norm(&a) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn positive_parts_of_diagonal() {
        let p = positive_parts(&HermitianOperator::diag(&[3.0, -3.0]));
        assert!((&p.positive.into_operator() - &ComplexOperator::diag(&[3.0, 0.0])).max_abs() < 1e-15);
        assert!((&p.negative.into_operator() - &ComplexOperator::diag(&[0.0, 3.0])).max_abs() < 1e-15);
        assert!((&p.abs.into_operator() - &ComplexOperator::diag(&[3.0, 3.0])).max_abs() < 1e-15);
    }

    #[test]
    fn non_hermitian_input_rejected() {
        let a = ComplexOperator::from_real(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(matches!(
            HermitianOperator::new(a),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn sqrt_examples() {
        let i = HermitianOperator::identity(3);
        let r = psd_sqrt(&i, PSD_TOL).unwrap();
        assert!((&r.into_operator() - &ComplexOperator::identity(3)).max_abs() < 1e-15);
        let r = psd_sqrt(&HermitianOperator::diag(&[4.0, 9.0]), PSD_TOL).unwrap();
        assert!((&r.into_operator() - &ComplexOperator::diag(&[2.0, 3.0])).max_abs() < 1e-15);
        assert!(matches!(
            psd_sqrt(&HermitianOperator::diag(&[1.0, -1.0]), PSD_TOL),
            Err(Error::MatrixNotPsd { .. })
        ));
    }

    #[test]
    fn psd_predicate() {
        assert!(is_psd(&HermitianOperator::identity(2), PSD_TOL));
        assert!(is_psd(&HermitianOperator::diag(&[1.0, -1e-15]), 1e-9));
        let a = HermitianOperator::from_real(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(!is_psd(&a, 1e-9));
    }

    #[test]
    fn trace_pairing_examples() {
        let a = ComplexOperator::from_rows(vec![
            vec![c64(1.0, 2.0), c64(5.0, 0.0)],
            vec![c64(-1.0, 0.0), c64(3.0, -1.0)],
        ])
        .unwrap();
        let t = HermitianOperator::identity(2).scale(0.5);
        let z = trace_pairing(&t, &a).unwrap();
        assert!((z - a.trace() / 2.0).norm() < 1e-15);
        let z = trace_pairing(&HermitianOperator::diag(&[1.0, -1.0]), &ComplexOperator::diag(&[5.0, 2.0])).unwrap();
        assert!((z - c64(3.0, 0.0)).norm() < 1e-15);
        assert!(matches!(
            trace_pairing(&HermitianOperator::identity(3), &a),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn coordinates_are_isometric() {
        let a = HermitianOperator::new(
            ComplexOperator::from_rows(vec![
                vec![c64(2.0, 0.0), c64(1.0, 1.0)],
                vec![c64(1.0, -1.0), c64(-1.0, 0.0)],
            ])
            .unwrap(),
        )
        .unwrap();
        let b = HermitianOperator::new(
            ComplexOperator::from_rows(vec![
                vec![c64(0.5, 0.0), c64(-2.0, 0.3)],
                vec![c64(-2.0, -0.3), c64(4.0, 0.0)],
            ])
            .unwrap(),
        )
        .unwrap();
        let ca = hermitian_coords(&a);
        let cb = hermitian_coords(&b);
        let dot: f64 = ca.iter().zip(&cb).map(|(x, y)| x * y).sum();
        assert!((dot - a.inner(&b)).abs() < 1e-12);
        let back = hermitian_from_coords(2, &ca);
        assert!((&back.into_operator() - a.as_operator()).max_abs() < 1e-15);
    }

    #[test]
    fn cholesky_inverse() {
        let a = HermitianOperator::from_real(&[&[4.0, 1.0], &[1.0, 3.0]]).unwrap();
        let inv = pd_inverse(&a).unwrap();
        let prod = a.as_operator().matmul(inv.as_operator());
        assert!((&prod - &ComplexOperator::identity(2)).max_abs() < 1e-14);
        assert!(cholesky(&HermitianOperator::diag(&[1.0, -1.0])).is_none());
    }

    #[test]
    fn state_validation() {
        assert!(State::new(HermitianOperator::identity(2)).is_err());
        assert!(State::new(HermitianOperator::diag(&[1.5, -0.5])).is_err());
        let s = State::maximally_mixed(4);
        assert!(s.is_full_rank(1e-9));
        let p = State::pure(&[c64(1.0, 0.0), c64(0.0, 1.0)]).unwrap();
        assert!(!p.is_full_rank(1e-9));
    }
}
