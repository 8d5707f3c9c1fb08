//! Dense and banded symmetric helpers shared by the pair and the spectral code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Largest `|i - j|` with a nonzero entry.
pub fn bandwidth(a: &Matrix) -> usize {
    let n = a.nrows();
    let mut b = 0;
    for j in 0..n {
        for i in 0..n {
            if a[(i, j)] != 0.0 {
                b = b.max(i.abs_diff(j));
            }
        }
    }
    b
}

/// Symmetric matrix stored densely with a cached half-bandwidth for fast products.
#[derive(Clone, Debug)]
pub struct SymBand {
    dense: Matrix,
    band: usize,
}

impl SymBand {
    pub fn new(dense: Matrix) -> Self {
        let band = bandwidth(&dense);
        SymBand { dense, band }
    }

    pub fn dense(&self) -> &Matrix {
        &self.dense
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn dim(&self) -> usize {
        self.dense.nrows()
    }

    pub fn mul(&self, x: &Vector) -> Vector {
        let n = self.dim();
        if self.band + 1 >= n {
            return &self.dense * x;
        }
        let mut y = Vector::zeros(n);
        for i in 0..n {
            let lo = i.saturating_sub(self.band);
            let hi = (i + self.band).min(n - 1);
            let mut s = 0.0;
            for j in lo..=hi {
                s += self.dense[(i, j)] * x[j];
            }
            y[i] = s;
        }
        y
    }

    pub fn form(&self, a: &Vector, b: &Vector) -> f64 {
        a.dot(&self.mul(b))
    }
}

/// Cholesky factor `A = L L^T` stored in band form (row-major, `band + 1` entries per row).
#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    band: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &Matrix, band: usize) -> Option<Self> {
        let n = a.nrows();
        let band = band.min(n.saturating_sub(1));
        let w = band + 1;
        let mut data = vec![0.0; n * w];
        let at = |i: usize, j: usize| i * w + band + j - i;
        for j in 0..n {
            let lo = j.saturating_sub(band);
            let mut s = a[(j, j)];
            for k in lo..j {
                let l = data[at(j, k)];
                s -= l * l;
            }
            if !(s > 0.0) || !s.is_finite() {
                return None;
            }
            let d = s.sqrt();
            data[at(j, j)] = d;
            for i in (j + 1)..(j + 1 + band).min(n) {
                let lo_i = i.saturating_sub(band);
                let mut s = a[(i, j)];
                for k in lo_i.max(lo)..j {
                    s -= data[at(i, k)] * data[at(j, k)];
                }
                data[at(i, j)] = s / d;
            }
        }
        Some(BandCholesky { n, band, data })
    }

    fn l(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.band + 1) + self.band + j - i]
    }

    /// Solves `L y = b`.
    pub fn solve_lower(&self, b: &Vector) -> Vector {
        let mut y = b.clone();
        for i in 0..self.n {
            let lo = i.saturating_sub(self.band);
            let mut s = y[i];
            for k in lo..i {
                s -= self.l(i, k) * y[k];
            }
            y[i] = s / self.l(i, i);
        }
        y
    }

    /// Solves `L^T x = y`.
    pub fn solve_upper(&self, y: &Vector) -> Vector {
        let mut x = y.clone();
        for i in (0..self.n).rev() {
            let hi = (i + self.band).min(self.n - 1);
            let mut s = x[i];
            for k in (i + 1)..=hi {
                s -= self.l(k, i) * x[k];
            }
            x[i] = s / self.l(i, i);
        }
        x
    }

    pub fn solve(&self, b: &Vector) -> Vector {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `L^{-1} Q L^{-T}` for symmetric `Q`.
    pub fn congruence(&self, q: &Matrix) -> Matrix {
        let n = self.n;
        let mut x = Matrix::zeros(n, n);
        for j in 0..n {
            let col = self.solve_lower(&q.column(j).into_owned());
            x.set_column(j, &col);
        }
        let xt = x.transpose();
        let mut c = Matrix::zeros(n, n);
        for j in 0..n {
            let col = self.solve_lower(&xt.column(j).into_owned());
            c.set_column(j, &col);
        }
        symmetrize(&c)
    }
}

pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

/// Relative asymmetry `max|a_ij - a_ji| / max|a_ij|`.
pub fn asymmetry(a: &Matrix) -> f64 {
    let scale = a.amax().max(f64::MIN_POSITIVE);
    (a - a.transpose()).amax() / scale
}

/// Ascending eigenvalues and matching eigenvectors (columns) of a symmetric matrix.
pub fn sym_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), Matrix::zeros(0, 0)));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigen("non-finite matrix entry".into()));
    }
    let eig = SymmetricEigen::try_new(a.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}
