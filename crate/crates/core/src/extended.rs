//! Double-double complex matrices and truncated power series in them.
//!
//! The Taylor coefficients of a Weyl function grow like `rho^{-k}` when it has
//! a pole at distance `rho` from `z = 0`; series products and quotients then
//! cancel many digits, so both directions of the Taylor map run here.

use std::ops::{Index, IndexMut};

use num_complex::{Complex, Complex64};
use twofloat::TwoFloat;

use crate::linalg::CMat;

pub type Xc = Complex<TwoFloat>;

fn zero() -> Xc {
    Complex::new(TwoFloat::from(0.0), TwoFloat::from(0.0))
}

fn one() -> Xc {
    Complex::new(TwoFloat::from(1.0), TwoFloat::from(0.0))
}

pub fn widen(z: Complex64) -> Xc {
    Complex::new(TwoFloat::from(z.re), TwoFloat::from(z.im))
}

pub fn narrow(z: Xc) -> Complex64 {
    Complex64::new(f64::from(z.re), f64::from(z.im))
}

fn abs2(z: Xc) -> TwoFloat {
    z.re * z.re + z.im * z.im
}

/// Dense row-major matrix of [`Xc`].
#[derive(Debug, Clone, PartialEq)]
pub struct XMat {
    rows: usize,
    cols: usize,
    data: Vec<Xc>,
}

impl Index<(usize, usize)> for XMat {
    type Output = Xc;
    fn index(&self, (r, c): (usize, usize)) -> &Xc {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for XMat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Xc {
        &mut self.data[r * self.cols + c]
    }
}

impl XMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![zero(); rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for k in 0..dim {
            m[(k, k)] = one();
        }
        m
    }

    pub fn from_cmat(m: &CMat) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                out[(r, c)] = widen(m[(r, c)]);
            }
        }
        out
    }

    pub fn to_cmat(&self) -> CMat {
        CMat::from_fn(self.rows, self.cols, |r, c| narrow(self[(r, c)]))
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "XMat product shape");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                for c in 0..other.cols {
                    out[(r, c)] += a * other[(k, c)];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "XMat sum shape"
        );
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "XMat difference shape"
        );
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn view(&self, row: usize, col: usize, rows: usize, cols: usize) -> Self {
        let mut out = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                out[(r, c)] = self[(row + r, col + c)];
            }
        }
        out
    }

    pub fn set_view(&mut self, row: usize, col: usize, m: &Self) {
        for r in 0..m.rows {
            for c in 0..m.cols {
                self[(row + r, col + c)] = m[(r, c)];
            }
        }
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting; `None` when
    /// a pivot vanishes.
    pub fn inverse(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols, "XMat inverse of non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let pivot = (col..n).max_by(|&x, &y| {
                f64::from(abs2(a[(x, col)]))
                    .partial_cmp(&f64::from(abs2(a[(y, col)])))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })?;
            if f64::from(abs2(a[(pivot, col)])) == 0.0 {
                return None;
            }
            if pivot != col {
                for c in 0..n {
                    a.data.swap(pivot * n + c, col * n + c);
                    inv.data.swap(pivot * n + c, col * n + c);
                }
            }
            let d = one() / a[(col, col)];
            for c in 0..n {
                a[(col, c)] *= d;
                inv[(col, c)] *= d;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                for c in 0..n {
                    a[(r, c)] = a[(r, c)] - f * a[(col, c)];
                    inv[(r, c)] = inv[(r, c)] - f * inv[(col, c)];
                }
            }
        }
        Some(inv)
    }

    /// Lower factor `L` of `M = L L^*` for Hermitian positive definite `M`;
    /// `None` on a nonpositive pivot.
    pub fn cholesky(&self) -> Option<Self> {
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)].re;
            for k in 0..j {
                d -= abs2(l[(j, k)]);
            }
            if !(f64::from(d) > 0.0) {
                return None;
            }
            let root = d.sqrt();
            l[(j, j)] = Complex::new(root, TwoFloat::from(0.0));
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = Complex::new(s.re / root, s.im / root);
            }
        }
        Some(l)
    }
}

/// Truncated series `sum_k M_k z^k` with [`XMat`] coefficients.
pub type XSeries = Vec<XMat>;

/// Product truncated to the shorter length.
pub fn series_mul(a: &[XMat], b: &[XMat]) -> XSeries {
    let len = a.len().min(b.len());
    (0..len)
        .map(|k| {
            let mut acc = XMat::zeros(a[0].nrows(), b[0].ncols());
            for j in 0..=k {
                acc = acc.add(&a[j].mul(&b[k - j]));
            }
            acc
        })
        .collect()
}

/// Inverse series; `None` when the constant term is singular.
pub fn series_inverse(a: &[XMat]) -> Option<XSeries> {
    let inv0 = a[0].inverse()?;
    let mut out = vec![inv0.clone()];
    for k in 1..a.len() {
        let mut acc = XMat::zeros(a[0].nrows(), a[0].ncols());
        for j in 1..=k {
            acc = acc.add(&a[j].mul(&out[k - j]));
        }
        out.push(XMat::zeros(acc.nrows(), acc.ncols()).sub(&inv0.mul(&acc)));
    }
    Some(out)
}

/// Right-multiply a `2p x p` pair series by a constant so that its constant
/// term has orthonormal columns. Returns `min/max` of the Cholesky pivots of
/// the constant term's Gram matrix, or `None` if that Gram matrix is singular.
pub fn orthonormalize_pair(pair: &mut [XMat]) -> Option<f64> {
    let gram = pair[0].adjoint().mul(&pair[0]);
    let l = gram.cholesky()?;
    let pivots: Vec<f64> = (0..l.nrows()).map(|k| f64::from(l[(k, k)].re)).collect();
    let hi = pivots.iter().copied().fold(0.0, f64::max);
    let lo = pivots.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = l.adjoint().inverse()?;
    for m in pair.iter_mut() {
        *m = m.mul(&scale);
    }
    Some(if hi > 0.0 { lo / hi } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, identity, max_abs};
    use crate::random::gaussian_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_through_widening() {
        let z = c(0.1, -3.7);
        assert_eq!(narrow(widen(z)), z);
    }

    #[test]
    fn inverse_and_cholesky() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = gaussian_matrix(&mut rng, 4, 4);
        let x = XMat::from_cmat(&g);
        let prod = x.mul(&x.inverse().unwrap()).to_cmat();
        assert!(max_abs(&(prod - identity(4))) < 1e-14);

        let h = XMat::from_cmat(&(&g * g.adjoint() + identity(4)));
        let l = h.cholesky().unwrap();
        assert!(max_abs(&(l.mul(&l.adjoint()).sub(&h)).to_cmat()) < 1e-14);
        assert!(XMat::zeros(2, 2).inverse().is_none());
        assert!(XMat::from_cmat(&(-identity(2))).cholesky().is_none());
    }

    #[test]
    fn geometric_series() {
        // (1 - z)^{-1} = 1 + z + z^2 + ...
        let one = XMat::identity(1);
        let s = vec![
            one.clone(),
            XMat::zeros(1, 1).sub(&one),
            XMat::zeros(1, 1),
            XMat::zeros(1, 1),
        ];
        for m in series_inverse(&s).unwrap() {
            assert!((narrow(m[(0, 0)]) - c(1.0, 0.0)).norm() < 1e-30);
        }
        let prod = series_mul(&s, &series_inverse(&s).unwrap());
        assert!((narrow(prod[3][(0, 0)])).norm() == 0.0);
    }

    #[test]
    fn orthonormalized_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut pair: Vec<XMat> = (0..3)
            .map(|_| XMat::from_cmat(&gaussian_matrix(&mut rng, 4, 2)))
            .collect();
        let margin = orthonormalize_pair(&mut pair).unwrap();
        assert!(margin > 0.0 && margin <= 1.0);
        let gram = pair[0].adjoint().mul(&pair[0]).to_cmat();
        assert!(max_abs(&(gram - identity(2))) < 1e-15);
        let mut flat = vec![XMat::zeros(4, 2)];
        assert!(orthonormalize_pair(&mut flat).is_none());
    }
}
