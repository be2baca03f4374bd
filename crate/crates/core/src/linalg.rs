//! Minimal dense complex-matrix arithmetic.
//!
//! Everything the simulator needs from linear algebra lives here: products,
//! sums, Hermitian transpose, squared norms and small determinants. Matrix
//! orders never exceed a few tens of rows, so plain row-major storage and
//! naive accumulation are adequate.

use crate::error::{Error, Result};

/// Complex scalar used throughout the simulator.
pub type Complex = num_complex::Complex64;

/// Column vector of complex entries.
pub type ComplexVector = Vec<Complex>;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex>,
}

impl ComplexMatrix {
    /// All-zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![Complex::new(0.0, 0.0); rows * cols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex::new(1.0, 0.0));
        }
        m
    }

    /// Builds a matrix from row slices. All rows must have the same length.
    pub fn from_rows(rows: &[Vec<Complex>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::InvalidArgument("matrix must be non-empty".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let data: Vec<Complex> = rows.iter().flatten().copied().collect();
        debug_assert!(data.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex) {
        self.data[i * self.cols + j] = v;
    }

    /// Standard matrix product `self * other`.
    pub fn multiply(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Complex::new(0.0, 0.0);
                for k in 0..self.cols {
                    acc += self.get(i, k) * other.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    /// Entrywise sum.
    pub fn add(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Multiplies every entry by a real scalar.
    pub fn scale(&self, s: f64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// Hermitian (conjugate) transpose.
    pub fn conj_transpose(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[Complex]) -> Result<ComplexVector> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "cannot apply {}x{} to vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let mut acc = Complex::new(0.0, 0.0);
            for k in 0..self.cols {
                acc += self.get(i, k) * v[k];
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Extracts `n_rows` consecutive rows starting at `first_row`.
    pub fn row_block(&self, first_row: usize, n_rows: usize) -> Result<ComplexMatrix> {
        if first_row + n_rows > self.rows {
            return Err(Error::DimensionMismatch(format!(
                "row block {}..{} out of range for {} rows",
                first_row,
                first_row + n_rows,
                self.rows
            )));
        }
        let data = self.data[first_row * self.cols..(first_row + n_rows) * self.cols].to_vec();
        Ok(ComplexMatrix {
            rows: n_rows,
            cols: self.cols,
            data,
        })
    }

    /// Determinant by row reduction with partial pivoting.
    pub fn determinant(&self) -> Result<Complex> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "determinant of non-square {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let mut a = self.data.clone();
        let at = |a: &[Complex], i: usize, j: usize| a[i * n + j];
        let mut det = Complex::new(1.0, 0.0);
        for k in 0..n {
            // Pivot on the largest modulus in column k.
            let mut pivot = k;
            let mut best = at(&a, k, k).norm_sqr();
            for i in (k + 1)..n {
                let m = at(&a, i, k).norm_sqr();
                if m > best {
                    best = m;
                    pivot = i;
                }
            }
            if best == 0.0 {
                return Ok(Complex::new(0.0, 0.0));
            }
            if pivot != k {
                for j in 0..n {
                    a.swap(k * n + j, pivot * n + j);
                }
                det = -det;
            }
            let d = at(&a, k, k);
            det *= d;
            for i in (k + 1)..n {
                let f = at(&a, i, k) / d;
                for j in k..n {
                    let v = at(&a, i, j) - f * at(&a, k, j);
                    a[i * n + j] = v;
                }
            }
        }
        Ok(det)
    }
}

/// Squared Euclidean norm, the sum of |entry|^2.
pub fn vector_norm_sq(v: &[Complex]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                m.set(i, j, c(re, im));
            }
        }
        m
    }

    #[test]
    fn multiply_identity_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(2, 2, &mut rng);
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(i2.multiply(&a).unwrap(), a);
    }

    #[test]
    fn multiply_projector_zeroes_second_row() {
        let p = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.0, 0.0)], vec![
            c(0.0, 0.0),
            c(0.0, 0.0),
        ]])
        .unwrap();
        let a = ComplexMatrix::from_rows(&[vec![c(1.0, 2.0), c(3.0, 4.0)], vec![
            c(5.0, 6.0),
            c(7.0, 8.0),
        ]])
        .unwrap();
        let out = p.multiply(&a).unwrap();
        assert_eq!(out.get(0, 0), c(1.0, 2.0));
        assert_eq!(out.get(0, 1), c(3.0, 4.0));
        assert_eq!(out.get(1, 0), c(0.0, 0.0));
        assert_eq!(out.get(1, 1), c(0.0, 0.0));
    }

    #[test]
    fn multiply_permutation_swaps_rows() {
        // [[0,1],[1,0]] * [[a,b],[c,d]] = [[c,d],[a,b]], expanded by hand.
        let p = ComplexMatrix::from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![
            c(1.0, 0.0),
            c(0.0, 0.0),
        ]])
        .unwrap();
        let a = ComplexMatrix::from_rows(&[vec![c(1.0, 2.0), c(3.0, 4.0)], vec![
            c(5.0, 6.0),
            c(7.0, 8.0),
        ]])
        .unwrap();
        let out = p.multiply(&a).unwrap();
        assert_eq!(out.get(0, 0), c(5.0, 6.0));
        assert_eq!(out.get(0, 1), c(7.0, 8.0));
        assert_eq!(out.get(1, 0), c(1.0, 2.0));
        assert_eq!(out.get(1, 1), c(3.0, 4.0));
    }

    #[test]
    fn multiply_rejects_dimension_mismatch() {
        let a = ComplexMatrix::zeros(2, 3);
        let b = ComplexMatrix::zeros(2, 3);
        assert!(a.multiply(&b).is_err());
    }

    #[test]
    fn multiply_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a = random_matrix(3, 4, &mut rng);
            let b = random_matrix(4, 2, &mut rng);
            let d = random_matrix(2, 3, &mut rng);
            let left = a.multiply(&b).unwrap().multiply(&d).unwrap();
            let right = a.multiply(&b.multiply(&d).unwrap()).unwrap();
            for i in 0..left.rows() {
                for j in 0..left.cols() {
                    let x = left.get(i, j);
                    let y = right.get(i, j);
                    assert!(
                        (x - y).norm() <= 1e-12 * x.norm().max(1.0),
                        "associativity violated at ({i},{j}): {x} vs {y}"
                    );
                }
            }
        }
    }

    #[test]
    fn add_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(2, 2, &mut rng);
        let zero = ComplexMatrix::zeros(2, 2);
        assert_eq!(a.add(&zero).unwrap(), a);
        let neg = a.scale(-1.0);
        let sum = a.add(&neg).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(sum.get(i, j), c(0.0, 0.0));
            }
        }
        let one = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0)]]).unwrap();
        let two = ComplexMatrix::from_rows(&[vec![c(2.0, 0.0)]]).unwrap();
        assert_eq!(one.add(&two).unwrap().get(0, 0), c(3.0, 0.0));
    }

    #[test]
    fn add_rejects_dimension_mismatch() {
        let a = ComplexMatrix::zeros(2, 2);
        let b = ComplexMatrix::zeros(2, 3);
        assert!(a.add(&b).is_err());
    }

    #[test]
    fn conj_transpose_cases() {
        let d = ComplexMatrix::from_rows(&[vec![c(2.0, 0.0), c(0.0, 0.0)], vec![
            c(0.0, 0.0),
            c(3.0, 0.0),
        ]])
        .unwrap();
        assert_eq!(d.conj_transpose(), d);

        let i = ComplexMatrix::from_rows(&[vec![c(0.0, 1.0)]]).unwrap();
        assert_eq!(i.conj_transpose().get(0, 0), c(0.0, -1.0));

        let r = ComplexMatrix::zeros(2, 3);
        let rt = r.conj_transpose();
        assert_eq!((rt.rows(), rt.cols()), (3, 2));
    }

    #[test]
    fn conj_transpose_is_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_matrix(3, 5, &mut rng);
        assert_eq!(a.conj_transpose().conj_transpose(), a);
    }

    #[test]
    fn norm_sq_cases() {
        assert_eq!(vector_norm_sq(&[c(0.0, 0.0), c(0.0, 0.0)]), 0.0);
        assert_eq!(vector_norm_sq(&[c(1.0, 0.0), c(0.0, 1.0)]), 2.0);
        // |3+4i|^2 = 9 + 16
        assert_eq!(vector_norm_sq(&[c(3.0, 4.0)]), 25.0);
    }

    #[test]
    fn norm_sq_zero_iff_zero_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            let v = vec![c(0.0, 0.0), c(re, im)];
            let zero = re == 0.0 && im == 0.0;
            assert_eq!(vector_norm_sq(&v) == 0.0, zero);
        }
    }

    #[test]
    fn determinant_cases() {
        for n in 1..5 {
            let det = ComplexMatrix::identity(n).determinant().unwrap();
            assert_eq!(det, c(1.0, 0.0));
        }
        let d = ComplexMatrix::from_rows(&[vec![c(2.0, 0.0), c(0.0, 0.0)], vec![
            c(0.0, 0.0),
            c(2.0, 0.0),
        ]])
        .unwrap();
        assert_eq!(d.determinant().unwrap(), c(4.0, 0.0));
        // [[1, i], [i, 1]]: cofactor expansion gives 1*1 - i*i = 2.
        let m = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.0, 1.0)], vec![
            c(0.0, 1.0),
            c(1.0, 0.0),
        ]])
        .unwrap();
        let det = m.determinant().unwrap();
        assert!((det - c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn determinant_rejects_non_square() {
        assert!(ComplexMatrix::zeros(2, 3).determinant().is_err());
    }

    #[test]
    fn determinant_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let a = random_matrix(3, 3, &mut rng);
            let b = random_matrix(3, 3, &mut rng);
            let lhs = a.multiply(&b).unwrap().determinant().unwrap();
            let rhs = a.determinant().unwrap() * b.determinant().unwrap();
            assert!(
                (lhs - rhs).norm() <= 1e-9 * rhs.norm().max(1.0),
                "det(AB) = {lhs}, det(A)det(B) = {rhs}"
            );
        }
    }

    #[test]
    fn row_block_extracts_sub_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(6, 2, &mut rng);
        let block = a.row_block(2, 2).unwrap();
        assert_eq!(block.get(0, 0), a.get(2, 0));
        assert_eq!(block.get(1, 1), a.get(3, 1));
        assert!(a.row_block(5, 2).is_err());
    }
}
