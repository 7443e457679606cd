//! Dense real-matrix utilities: symmetric eigendecomposition (cyclic Jacobi),
//! Kronecker products, Toeplitz construction and composite Gauss-Legendre
//! quadrature.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{invalid, shape, Error, Result};

/// Dense row-major real matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting inconsistent lengths or
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape(format!(
                "{} entries cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalDomain(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(shape("ragged rows"));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Copies a contiguous range of rows.
    pub fn slice_rows(&self, start: usize, end: usize) -> Matrix {
        Matrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// Copies an arbitrary selection of rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(shape(format!("vector of length {} for {} columns", x.len(), self.cols)));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest |A_ij - A_ji|.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols.min(self.rows) {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Returns (A + Aᵀ)/2.
    pub fn symmetrized(&self) -> Matrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors
/// stored as the columns of `vectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenDecomposition {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k)
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    /// V Λ Vᵀ.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.values.len();
        let mut out = Matrix::zeros(n, n);
        for k in 0..n {
            let lam = self.values[k];
            for i in 0..n {
                let vi = self.vectors[(i, k)] * lam;
                if vi == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += vi * self.vectors[(j, k)];
                }
            }
        }
        out
    }
}

const SYMMETRY_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Eigenvalues come back ascending. Each eigenvector is sign-normalized so
/// that its first component with magnitude above 1e-12 is positive, which
/// keeps CSV output reproducible.
pub fn sym_eig(a: &Matrix) -> Result<EigenDecomposition> {
    if !a.is_square() {
        return Err(shape(format!("eigendecomposition needs a square matrix, got {}x{}", a.rows, a.cols)));
    }
    let n = a.rows;
    if n == 0 {
        return Err(shape("empty matrix"));
    }
    let scale = a.max_abs();
    let asym = a.asymmetry();
    let tol = SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE);
    if asym > tol {
        return Err(Error::NotSymmetric { asymmetry: asym, tolerance: tol });
    }

    let mut w = a.symmetrized();
    let mut v = Matrix::identity(n);
    let abs_floor = 1e-22 * scale;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = w[(p, q)];
                let app = w[(p, p)];
                let aqq = w[(q, q)];
                if apq.abs() <= abs_floor
                    || apq.abs() <= 0.25 * f64::EPSILON * (app.abs() * aqq.abs()).sqrt()
                {
                    w[(p, q)] = 0.0;
                    w[(q, p)] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut w, &mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[(i, i)].total_cmp(&w[(j, j)]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| w[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        let first = (0..n).map(|i| v[(i, src)]).find(|x| x.abs() > 1e-12).unwrap_or(1.0);
        let sign = if first < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, k)] = sign * v[(i, src)];
        }
    }
    Ok(EigenDecomposition { values, vectors })
}

fn rotate(w: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = w.rows;
    for k in 0..n {
        let akp = w[(k, p)];
        let akq = w[(k, q)];
        w[(k, p)] = c * akp - s * akq;
        w[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = w[(p, k)];
        let aqk = w[(q, k)];
        w[(p, k)] = c * apk - s * aqk;
        w[(q, k)] = s * apk + c * aqk;
    }
    w[(p, q)] = 0.0;
    w[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn spectral_norm_sym(a: &Matrix) -> Result<f64> {
    let eig = sym_eig(a)?;
    Ok(eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Kronecker product A ⊗ B.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = Matrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out[(i * b.rows + k, j * b.cols + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Symmetric Toeplitz correlation matrix with entry (j, j') = r[|j - j'|].
pub fn toeplitz_from_acf(r: &[f64]) -> Result<Matrix> {
    if r.is_empty() {
        return Err(invalid("autocorrelation sequence is empty"));
    }
    if r[0] != 1.0 {
        return Err(invalid(format!("r[0] = {} but a correlation function needs r[0] = 1", r[0])));
    }
    if let Some((h, v)) = r.iter().enumerate().find(|(_, v)| !v.is_finite() || v.abs() > 1.0) {
        return Err(invalid(format!("|r[{h}]| = {} exceeds 1", v.abs())));
    }
    let p = r.len();
    let mut m = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            m[(i, j)] = r[i.abs_diff(j)];
        }
    }
    Ok(m)
}

/// Quadrature rule: ∫ f ≈ Σ wᵢ f(xᵢ).
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Points per Gauss-Legendre panel.
pub const GL_ORDER: usize = 10;
pub const DEFAULT_PANELS: usize = 64;

impl Quadrature {
    /// n-point Gauss-Legendre rule on [-1, 1].
    pub fn gauss_legendre(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("Gauss-Legendre rule needs at least one node"));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Ok(Self { nodes, weights })
    }

    /// Composite Gauss-Legendre rule with `panels` equal panels on [a, b].
    pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> Result<Self> {
        if !(a < b) || panels == 0 {
            return Err(invalid(format!("bad composite rule on [{a}, {b}] with {panels} panels")));
        }
        let breaks: Vec<f64> =
            (0..=panels).map(|i| a + (b - a) * i as f64 / panels as f64).collect();
        Self::on_breakpoints(&breaks, 1, order)
    }

    /// Composite rule whose panels subdivide each interval between
    /// consecutive breakpoints into `per_interval` equal pieces.
    pub fn on_breakpoints(breaks: &[f64], per_interval: usize, order: usize) -> Result<Self> {
        if breaks.len() < 2 || per_interval == 0 {
            return Err(invalid("need at least two breakpoints and one panel per interval"));
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("breakpoints must be strictly increasing"));
        }
        let base = Self::gauss_legendre(order)?;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in breaks.windows(2) {
            let step = (w[1] - w[0]) / per_interval as f64;
            for k in 0..per_interval {
                let lo = w[0] + step * k as f64;
                let half = 0.5 * step;
                let mid = lo + half;
                for (x, wt) in base.nodes.iter().zip(&base.weights) {
                    nodes.push(mid + half * x);
                    weights.push(half * wt);
                }
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Legendre polynomial P_n(x) and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, 0.0);
    for j in 1..=n {
        let jf = j as f64;
        let p2 = p1;
        p1 = p0;
        p0 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p2) / jf;
    }
    let d = n as f64 * (x * p0 - p1) / (x * x - 1.0);
    (p0, d)
}

/// Σ wᵢ f(xᵢ); a non-finite integrand value is an error.
pub fn integrate(f: impl Fn(f64) -> f64, quad: &Quadrature) -> Result<f64> {
    let mut acc = 0.0;
    for (&x, &w) in quad.nodes.iter().zip(&quad.weights) {
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::NumericalDomain(format!("integrand is {fx} at x = {x}")));
        }
        acc += w * fx;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym_from(n: usize, raw: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        let mut it = raw.iter();
        for i in 0..n {
            for j in i..n {
                let v = *it.next().unwrap();
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Roots of det(A - λI) for a symmetric 3x3 by bisection on the
    /// characteristic polynomial, independent of the Jacobi path.
    fn char_poly_roots_3x3(a: &Matrix) -> Vec<f64> {
        let det = |l: f64| {
            let m = |i, j| a[(i, j)] - if i == j { l } else { 0.0 };
            m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
                - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
        };
        let (lo, hi) = (-10.0, 10.0);
        let n = 20_000;
        let mut roots = Vec::new();
        let mut prev = lo;
        for k in 1..=n {
            let x = lo + (hi - lo) * k as f64 / n as f64;
            if det(prev).signum() != det(x).signum() {
                let (mut a0, mut b0) = (prev, x);
                for _ in 0..200 {
                    let mid = 0.5 * (a0 + b0);
                    if det(a0).signum() == det(mid).signum() {
                        a0 = mid;
                    } else {
                        b0 = mid;
                    }
                }
                roots.push(0.5 * (a0 + b0));
            }
            prev = x;
        }
        roots
    }

    #[test]
    fn identity_eigenvalues() {
        let e = sym_eig(&Matrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_axis_aligned() {
        let e = sym_eig(&Matrix::diagonal(&[5.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![2.0, 5.0]);
        assert_eq!(e.vector(0), vec![0.0, 1.0]);
        assert_eq!(e.vector(1), vec![1.0, 0.0]);
    }

    #[test]
    fn toeplitz_half_matches_characteristic_polynomial() {
        let r = toeplitz_from_acf(&[1.0, 0.5, 0.25]).unwrap();
        let oracle = char_poly_roots_3x3(&r);
        assert_eq!(oracle.len(), 3);
        // frozen from the bisection oracle
        let frozen = [0.406_929_8, 0.75, 1.843_070_2];
        let e = sym_eig(&r).unwrap();
        for ((got, want), fz) in e.values.iter().zip(&oracle).zip(frozen) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
            assert!((got - fz).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(sym_eig(&Matrix::zeros(2, 3)), Err(Error::Shape(_))));
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eig(&m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn kron_identity_and_zero() {
        let b = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let k = kron(&Matrix::identity(2), &b);
        assert_eq!(k.rows(), 4);
        assert_eq!(k.row(0), &[1.0, 2.0, 0.0, 0.0]);
        assert_eq!(k.row(3), &[0.0, 0.0, 3.0, 4.0]);
        let z = kron(&Matrix::zeros(1, 1), &b);
        assert_eq!(z.max_abs(), 0.0);
        assert_eq!((z.rows(), z.cols()), (2, 2));
    }

    #[test]
    fn kron_spectrum_2x2() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.0, -0.5], vec![-0.5, 4.0]]).unwrap();
        let ea = sym_eig(&a).unwrap();
        let eb = sym_eig(&b).unwrap();
        let mut products: Vec<f64> = ea
            .values
            .iter()
            .flat_map(|x| eb.values.iter().map(move |y| x * y))
            .collect();
        products.sort_by(f64::total_cmp);
        let ek = sym_eig(&kron(&a, &b)).unwrap();
        for (x, y) in ek.values.iter().zip(&products) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn toeplitz_construction() {
        assert_eq!(toeplitz_from_acf(&[1.0, 0.0, 0.0]).unwrap(), Matrix::identity(3));
        assert!(toeplitz_from_acf(&[0.9, 0.1]).is_err());
        assert!(toeplitz_from_acf(&[1.0, 1.5]).is_err());
    }

    #[test]
    fn ar1_toeplitz_min_eigenvalue_positive() {
        let rho: f64 = 0.8;
        let r: Vec<f64> = (0..6).map(|h| rho.powi(h)).collect();
        let t = toeplitz_from_acf(&r).unwrap();
        let lmin = sym_eig(&t).unwrap().min();
        assert!(lmin > 0.0);

        // power iteration on R^{-1} (via Gauss-Jordan inverse)
        let n = 6;
        let mut aug = Matrix::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = t[(i, j)];
            }
            aug[(i, n + i)] = 1.0;
        }
        for c in 0..n {
            let piv = (c..n).max_by(|&a, &b| aug[(a, c)].abs().total_cmp(&aug[(b, c)].abs())).unwrap();
            for k in 0..2 * n {
                let tmp = aug[(c, k)];
                aug[(c, k)] = aug[(piv, k)];
                aug[(piv, k)] = tmp;
            }
            let d = aug[(c, c)];
            for k in 0..2 * n {
                aug[(c, k)] /= d;
            }
            for r2 in 0..n {
                if r2 != c {
                    let f = aug[(r2, c)];
                    for k in 0..2 * n {
                        aug[(r2, k)] -= f * aug[(c, k)];
                    }
                }
            }
        }
        let mut x = vec![1.0; n];
        x[1] = -0.3;
        let mut lam = 0.0;
        for _ in 0..2000 {
            let y: Vec<f64> = (0..n).map(|i| (0..n).map(|j| aug[(i, n + j)] * x[j]).sum()).collect();
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            lam = norm / x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x = y.iter().map(|v| v / norm).collect();
        }
        assert!((1.0 / lam - lmin).abs() < 1e-9, "{} vs {lmin}", 1.0 / lam);
    }

    #[test]
    fn quadrature_basics() {
        let q = Quadrature::composite(-1.0, 1.0, DEFAULT_PANELS, GL_ORDER).unwrap();
        assert!((q.weights.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!(q.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!((integrate(|_| 1.0, &q).unwrap() - 2.0).abs() < 1e-12);
        assert!(integrate(|z| z, &q).unwrap().abs() < 1e-12);
        assert!((integrate(|z| z * z, &q).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        // single panel is exact to degree 19
        let g = Quadrature::gauss_legendre(GL_ORDER).unwrap();
        let exact = 2.0 / 19.0;
        assert!((integrate(|z| z.powi(18), &g).unwrap() - exact).abs() < 1e-13);
    }

    #[test]
    fn integrate_propagates_non_finite() {
        let q = Quadrature::composite(-1.0, 1.0, 4, GL_ORDER).unwrap();
        assert!(matches!(integrate(|z| 1.0 / (z - z), &q), Err(Error::NumericalDomain(_))));
    }

    proptest! {
        #[test]
        fn eig_reconstruction_and_orthonormality(
            n in 1usize..8,
            raw in proptest::collection::vec(-5.0f64..5.0, 36),
        ) {
            let a = sym_from(n, &raw);
            let e = sym_eig(&a).unwrap();
            prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            let err = e.reconstruct().sub(&a).unwrap().max_abs();
            prop_assert!(err <= 1e-9 * a.max_abs().max(1e-300));
            let gram = e.vectors.transpose().matmul(&e.vectors).unwrap();
            prop_assert!(gram.sub(&Matrix::identity(n)).unwrap().max_abs() < 1e-10);
        }

        #[test]
        fn kron_eigen_products(
            na in 3usize..5,
            nb in 3usize..5,
            ra in proptest::collection::vec(-2.0f64..2.0, 10),
            rb in proptest::collection::vec(-2.0f64..2.0, 10),
        ) {
            let a = sym_from(na, &ra);
            let b = sym_from(nb, &rb);
            let ea = sym_eig(&a).unwrap();
            let eb = sym_eig(&b).unwrap();
            let mut products: Vec<f64> = ea.values.iter()
                .flat_map(|x| eb.values.iter().map(move |y| x * y)).collect();
            products.sort_by(f64::total_cmp);
            let ek = sym_eig(&kron(&a, &b)).unwrap();
            for (x, y) in ek.values.iter().zip(&products) {
                prop_assert!((x - y).abs() < 1e-8);
            }
        }

        #[test]
        fn toeplitz_trace_and_lambda_max(rho in -0.95f64..0.95, p in 1usize..16) {
            let r: Vec<f64> = (0..p).map(|h| rho.powi(h as i32)).collect();
            let t = toeplitz_from_acf(&r).unwrap();
            prop_assert_eq!(t.asymmetry(), 0.0);
            prop_assert!((0..p).all(|i| t[(i, i)] == 1.0));
            prop_assert_eq!(t.trace(), p as f64);
            prop_assert!(sym_eig(&t).unwrap().max() <= p as f64 + 1e-12);
        }
    }
}
