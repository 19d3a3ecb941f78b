//! Minimal complex matrix support for the validator: column-major storage,
//! gemm via `matrixmultiply`, and a Cholesky-based Hermitian
//! positive-definite inverse for the zero-forcing combiner.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Column-major complex matrix.
#[derive(Debug, Clone)]
pub struct CMat {
    data: Vec<Complex64>,
    rows: usize,
    cols: usize,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            data: vec![Complex64::ZERO; rows * cols],
            rows,
            cols,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[c * self.rows + r]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[c * self.rows + r] = v;
    }

    /// Contiguous storage of column `c`.
    #[inline]
    pub fn col(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    /// Reshapes in place, discarding contents.
    pub fn reset(&mut self, rows: usize, cols: usize) {
        self.rows = rows;
        self.cols = cols;
        self.data.clear();
        self.data.resize(rows * cols, Complex64::ZERO);
    }

    /// Entrywise conjugate.
    pub fn conjugate(&self) -> CMat {
        CMat {
            data: self.data.iter().map(|z| z.conj()).collect(),
            rows: self.rows,
            cols: self.cols,
        }
    }
}

/// `C = A^H B`, computed as `conj(A)^T B` through strided gemm.
pub fn hermitian_product(a: &CMat, b: &CMat, out: &mut CMat) {
    assert_eq!(a.rows, b.rows);
    let a_conj = a.conjugate();
    out.reset(a.cols, b.cols);
    let (m, k, n) = (a.cols, a.rows, b.cols);
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a_conj.data.as_ptr() as *const [f64; 2],
            a_conj.rows as isize, // the operand is the transpose of the stored matrix
            1,
            b.data.as_ptr() as *const [f64; 2],
            1,
            b.rows as isize,
            [0.0, 0.0],
            out.data.as_mut_ptr() as *mut [f64; 2],
            1,
            out.rows as isize,
        );
    }
}

/// Plain product `C = A B`.
pub fn product(a: &CMat, b: &CMat, out: &mut CMat) {
    assert_eq!(a.cols, b.rows);
    out.reset(a.rows, b.cols);
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.data.as_ptr() as *const [f64; 2],
            1,
            a.rows as isize,
            b.data.as_ptr() as *const [f64; 2],
            1,
            b.rows as isize,
            [0.0, 0.0],
            out.data.as_mut_ptr() as *mut [f64; 2],
            1,
            out.rows as isize,
        );
    }
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky
/// (`A = L L^H`, then `A^{-1} = L^{-H} L^{-1}`).
pub fn hpd_inverse(a: &CMat) -> Result<CMat> {
    let n = a.rows;
    assert_eq!(n, a.cols);
    // Cholesky factor, stored lower-triangular column-major.
    let mut l = a.clone();
    for j in 0..n {
        let mut diag = l.get(j, j).re;
        for k in 0..j {
            diag -= l.get(j, k).norm_sqr();
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::RankDeficient(format!(
                "non-positive pivot {diag} at column {j}"
            )));
        }
        let diag = diag.sqrt();
        l.set(j, j, Complex64::new(diag, 0.0));
        for i in j + 1..n {
            let mut v = l.get(i, j);
            for k in 0..j {
                v -= l.get(i, k) * l.get(j, k).conj();
            }
            l.set(i, j, v / diag);
        }
    }

    // Invert L in place (forward substitution on the identity).
    let mut linv = CMat::zeros(n, n);
    for c in 0..n {
        linv.set(c, c, Complex64::new(1.0 / l.get(c, c).re, 0.0));
        for i in c + 1..n {
            let mut v = Complex64::ZERO;
            for k in c..i {
                v -= l.get(i, k) * linv.get(k, c);
            }
            linv.set(i, c, v / l.get(i, i).re);
        }
    }

    // A^{-1} = L^{-H} L^{-1}; exploit that L^{-1} is lower triangular.
    let mut inv = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut v = Complex64::ZERO;
            for k in i.max(j)..n {
                v += linv.get(k, i).conj() * linv.get(k, j);
            }
            inv.set(i, j, v);
        }
    }
    Ok(inv)
}

/// Hermitian inner product `a^H b`.
#[inline]
pub fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = Complex64::ZERO;
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

/// Squared Euclidean norm.
#[inline]
pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}
