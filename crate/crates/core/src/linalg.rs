//! Small dense matrices.
//!
//! Every model in this crate has at most four states, so a row-major
//! `Vec<f64>` with straightforward loops is all that is needed. Checked
//! constructors and `try_*` methods return [`Error`]; the arithmetic
//! operators panic on shape mismatch and are meant for code paths whose
//! shapes were validated up front.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Column vector.
pub type Vector = Mat;

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::dims(
                "matrix data",
                format!("{} entries", rows * cols),
                format!("{} entries", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix construction".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::dims("matrix rows", format!("{c} columns"), "ragged rows"));
        }
        Self::new(r, c, rows.iter().flat_map(|row| row.iter().copied()).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    /// Column vector from a slice.
    pub fn col(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "vector must be non-empty");
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * k).collect(),
        }
    }

    pub fn try_mul(&self, rhs: &Mat) -> Result<Mat> {
        if self.cols != rhs.rows {
            return Err(Error::dims(
                "matrix product",
                format!("{} rows on the right", self.cols),
                format!("{}x{}", rhs.rows, rhs.cols),
            ));
        }
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn try_add(&self, rhs: &Mat) -> Result<Mat> {
        self.same_shape(rhs, "matrix sum")?;
        Ok(self.zip_with(rhs, |a, b| a + b))
    }

    pub fn try_sub(&self, rhs: &Mat) -> Result<Mat> {
        self.same_shape(rhs, "matrix difference")?;
        Ok(self.zip_with(rhs, |a, b| a - b))
    }

    fn same_shape(&self, rhs: &Mat, what: &str) -> Result<()> {
        if self.shape() != rhs.shape() {
            return Err(Error::dims(
                what,
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", rhs.rows, rhs.cols),
            ));
        }
        Ok(())
    }

    fn zip_with(&self, rhs: &Mat, f: impl Fn(f64, f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    /// Infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn symmetrize(&self) -> Mat {
        let t = self.transpose();
        self.zip_with(&t, |a, b| 0.5 * (a + b))
    }

    /// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
    pub fn cholesky(&self) -> Result<Mat> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                what: "cholesky input".into(),
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPd("cholesky input".into()));
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }

    /// Inverse of a symmetric positive definite matrix via its Cholesky factor.
    pub fn inverse_spd(&self) -> Result<Mat> {
        let l = self.cholesky()?;
        let n = self.rows;
        // invert L by forward substitution, then inv = L^-T L^-1
        let mut linv = Mat::zeros(n, n);
        for c in 0..n {
            for i in 0..n {
                let mut s = if i == c { 1.0 } else { 0.0 };
                for k in 0..i {
                    s -= l[(i, k)] * linv[(k, c)];
                }
                linv[(i, c)] = s / l[(i, i)];
            }
        }
        Ok(&linv.transpose() * &linv)
    }

    /// General inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Mat> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                what: "inverse input".into(),
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Mat::identity(n);
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for c in 0..n {
            let pivot = (c..n)
                .max_by(|&i, &j| a[(i, c)].abs().total_cmp(&a[(j, c)].abs()))
                .unwrap();
            if a[(pivot, c)].abs() <= 1e-14 * scale {
                return Err(Error::Singular("inverse input".into()));
            }
            if pivot != c {
                for j in 0..n {
                    a.data.swap(c * n + j, pivot * n + j);
                    inv.data.swap(c * n + j, pivot * n + j);
                }
            }
            let p = a[(c, c)];
            for j in 0..n {
                a[(c, j)] /= p;
                inv[(c, j)] /= p;
            }
            for i in 0..n {
                if i == c {
                    continue;
                }
                let f = a[(i, c)];
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a[(i, j)] -= f * a[(c, j)];
                    inv[(i, j)] -= f * inv[(c, j)];
                }
            }
        }
        Ok(inv)
    }

    pub fn powi(&self, exp: u32) -> Mat {
        assert!(self.is_square());
        let mut out = Mat::identity(self.rows);
        for _ in 0..exp {
            out = &out * self;
        }
        out
    }

    /// Matrix exponential by scaling and squaring with a Taylor series.
    pub fn expm(&self) -> Result<Mat> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                what: "expm input".into(),
                rows: self.rows,
                cols: self.cols,
            });
        }
        let norm = self.norm_inf();
        let squarings = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as u32
        } else {
            0
        };
        let a = self.scale(0.5f64.powi(squarings as i32));
        let n = self.rows;
        let mut term = Mat::identity(n);
        let mut sum = Mat::identity(n);
        for k in 1..=20 {
            term = (&term * &a).scale(1.0 / k as f64);
            sum = &sum + &term;
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        sum.check_finite("expm")
    }

    /// Principal square root by the Denman-Beavers iteration.
    pub fn sqrtm(&self) -> Result<Mat> {
        let mut y = self.clone();
        let mut z = Mat::identity(self.rows);
        for _ in 0..100 {
            let yi = y.inverse()?;
            let zi = z.inverse()?;
            let y_next = (&y + &zi).scale(0.5);
            let z_next = (&z + &yi).scale(0.5);
            let delta = (&y_next - &y).max_abs();
            y = y_next;
            z = z_next;
            if delta <= 1e-15 * y.max_abs().max(1.0) {
                return y.check_finite("sqrtm");
            }
        }
        Err(Error::NoConvergence {
            what: "matrix square root".into(),
            iters: 100,
        })
    }

    /// Principal logarithm by inverse scaling and squaring.
    ///
    /// Requires no eigenvalues on the closed negative real axis.
    pub fn logm(&self) -> Result<Mat> {
        let n = self.rows;
        let eye = Mat::identity(n);
        let mut x = self.clone();
        let mut roots = 0;
        while (&x - &eye).norm_inf() > 0.05 {
            x = x.sqrtm()?;
            roots += 1;
            if roots > 60 {
                return Err(Error::NoConvergence {
                    what: "matrix logarithm".into(),
                    iters: roots,
                });
            }
        }
        // log(I + E) = E - E^2/2 + E^3/3 - ...
        let e = &x - &eye;
        let mut term = e.clone();
        let mut sum = e.clone();
        for k in 2..=40 {
            term = &term * &e;
            let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
            sum = &sum + &term.scale(sign / k as f64);
        }
        sum.scale(2f64.powi(roots as i32)).check_finite("logm")
    }

    /// Largest eigenvalue modulus.
    pub fn spectral_radius(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                what: "spectral radius input".into(),
                rows: self.rows,
                cols: self.cols,
            });
        }
        let m = nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data);
        Ok(m.complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max))
    }

    pub(crate) fn check_finite(self, what: &str) -> Result<Mat> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite(what.into()))
        }
    }

    /// Dot product of two equally sized vectors (or matrices, entrywise).
    pub fn dot(&self, rhs: &Mat) -> f64 {
        assert_eq!(self.shape(), rhs.shape());
        self.data.iter().zip(&rhs.data).map(|(a, b)| a * b).sum()
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

impl Index<usize> for Mat {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for Mat {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

impl Mul for &Mat {
    type Output = Mat;

    fn mul(self, rhs: &Mat) -> Mat {
        self.try_mul(rhs).expect("matrix product shape mismatch")
    }
}

impl Add for &Mat {
    type Output = Mat;

    fn add(self, rhs: &Mat) -> Mat {
        self.try_add(rhs).expect("matrix sum shape mismatch")
    }
}

impl Sub for &Mat {
    type Output = Mat;

    fn sub(self, rhs: &Mat) -> Mat {
        self.try_sub(rhs).expect("matrix difference shape mismatch")
    }
}

impl Neg for &Mat {
    type Output = Mat;

    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mat{}x{}[", self.rows, self.cols)?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self[(i, j)])?;
            }
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_ragged() {
        assert!(Mat::new(0, 1, vec![]).is_err());
        assert!(Mat::from_rows(&[&[1.0, 2.0], &[3.0]]).is_err());
        assert!(Mat::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn inverse_roundtrip() {
        let a = Mat::from_rows(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, 0.2], &[0.5, 0.2, 2.0]]).unwrap();
        let inv = a.inverse().unwrap();
        let spd = a.inverse_spd().unwrap();
        assert!((&(&a * &inv) - &Mat::identity(3)).max_abs() < 1e-12);
        assert!((&inv - &spd).max_abs() < 1e-12);
    }

    #[test]
    fn singular_inverse_is_error() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        assert!(matches!(a.inverse(), Err(Error::Singular(_))));
    }

    #[test]
    fn expm_of_log_recovers_matrix() {
        let a = Mat::from_rows(&[&[0.0, 1.0], &[-0.6349, 1.6148]]).unwrap();
        let back = a.logm().unwrap().expm().unwrap();
        assert!((&back - &a).max_abs() < 1e-11);
    }

    #[test]
    fn spectral_radius_of_rotation() {
        let a = Mat::from_rows(&[&[0.0, -0.5], &[0.5, 0.0]]).unwrap();
        assert!((a.spectral_radius().unwrap() - 0.5).abs() < 1e-12);
    }
}
