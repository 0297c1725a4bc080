//! Dense complex block-matrix kernel.
//!
//! Everything here works on `DMatrix<Complex64>` with an explicit block size
//! `p`. The one structured solver is [`solve_displacement`], which handles the
//! identity `A S - S A^* = i Pi Pi^*` for the block lower-triangular Toeplitz
//! operator built by [`structured_operator`].

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

/// Default relative pivot cutoff for positivity decisions.
pub const DEFAULT_POSITIVITY_TOL: f64 = 1e-10;

/// Relative cutoff on `sigma_min / sigma_max` below which a matrix is treated
/// as singular when it has to be inverted.
pub const SINGULAR_RTOL: f64 = 1e-13;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Block decomposition of a matrix into `p x p` blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockStructure {
    pub block_size: usize,
    pub block_rows: usize,
    pub block_cols: usize,
}

impl BlockStructure {
    pub fn of(m: &CMat, p: usize) -> Result<Self> {
        if p == 0 || !m.nrows().is_multiple_of(p) || !m.ncols().is_multiple_of(p) {
            return Err(Error::DimensionMismatch {
                context: "block structure",
                expected: format!("dimensions divisible by p = {p}"),
                found: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        Ok(Self {
            block_size: p,
            block_rows: m.nrows() / p,
            block_cols: m.ncols() / p,
        })
    }

    pub fn rows(&self) -> usize {
        self.block_rows * self.block_size
    }

    pub fn cols(&self) -> usize {
        self.block_cols * self.block_size
    }
}

/// Copy of the `(i, j)` block of size `p x p`.
pub fn block(m: &CMat, p: usize, i: usize, j: usize) -> CMat {
    m.view((i * p, j * p), (p, p)).into_owned()
}

pub fn set_block(m: &mut CMat, p: usize, i: usize, j: usize, b: &CMat) {
    m.view_mut((i * p, j * p), (p, p)).copy_from(b);
}

/// Stack `p x q` blocks vertically.
pub fn vstack(blocks: &[CMat]) -> CMat {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(b);
        r += b.nrows();
    }
    out
}

/// Horizontal concatenation `[left right]`.
pub fn hstack(left: &CMat, right: &CMat) -> CMat {
    let mut out = CMat::zeros(left.nrows(), left.ncols() + right.ncols());
    out.view_mut((0, 0), left.shape()).copy_from(left);
    out.view_mut((0, left.ncols()), right.shape())
        .copy_from(right);
    out
}

/// Entrywise max-norm.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Spectral norm (largest singular value).
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |acc: f64, &s| acc.max(s))
}

/// `(sigma_min, sigma_max)` of a matrix.
pub fn singular_range(m: &CMat) -> (f64, f64) {
    let sv = m.clone().svd(false, false).singular_values;
    let lo = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    let hi = sv.iter().fold(0.0, |a: f64, &s| a.max(s));
    (lo, hi)
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number(m: &CMat) -> f64 {
    let (lo, hi) = singular_range(m);
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub fn ensure_finite(m: &CMat, what: &'static str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn ensure_square(m: &CMat) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// True iff `max |M - M^*| <= tol`.
pub fn is_hermitian(m: &CMat, tol: f64) -> Result<bool> {
    ensure_square(m)?;
    Ok(hermitian_deviation(m) <= tol)
}

pub(crate) fn hermitian_deviation(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// `(M + M^*) / 2`
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Lower-triangular Cholesky factor with an explicit pivot cutoff.
///
/// A pivot `d_k <= tol * max|M|` is reported as [`Error::NotPositive`].
pub fn posdef_factor(m: &CMat, tol: f64) -> Result<CMat> {
    let n = ensure_square(m)?;
    let scale = max_abs(m);
    let dev = hermitian_deviation(m);
    if dev > tol * scale.max(1.0) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let cutoff = tol * scale;
    let mut l = CMat::zeros(n, n);
    for k in 0..n {
        let mut d = m[(k, k)].re;
        for j in 0..k {
            d -= l[(k, j)].norm_sqr();
        }
        if !(d > cutoff) {
            return Err(Error::NotPositive { index: k, pivot: d });
        }
        let dk = d.sqrt();
        l[(k, k)] = re(dk);
        for i in (k + 1)..n {
            let mut s = m[(i, k)];
            for j in 0..k {
                s -= l[(i, j)] * l[(k, j)].conj();
            }
            l[(i, k)] = s / dk;
        }
    }
    Ok(l)
}

/// Eigen-decomposition of the Hermitian part, eigenvalues ascending.
fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = hermitian_part(m).symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Eigenvalues (ascending) of the Hermitian part of `m`.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    hermitian_eigen(m).0
}

/// Orthonormal eigenvectors of a Hermitian matrix, ascending eigenvalue order.
pub fn hermitian_eigenvectors(m: &CMat) -> (Vec<f64>, CMat) {
    hermitian_eigen(m)
}

fn hermitian_function(m: &CMat, f: impl Fn(f64) -> f64) -> Result<CMat> {
    let n = ensure_square(m)?;
    let (vals, vecs) = hermitian_eigen(m);
    let top = vals.last().copied().unwrap_or(0.0);
    if let Some((index, &low)) = vals
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v > DEFAULT_POSITIVITY_TOL * top.abs()))
    {
        return Err(Error::NotPositive { index, pivot: low });
    }
    let mut scaled = vecs.clone();
    for (k, &v) in vals.iter().enumerate().take(n) {
        let fv = f(v);
        scaled.column_mut(k).scale_mut(fv);
    }
    Ok(scaled * vecs.adjoint())
}

/// Principal inverse square root `R` of a Hermitian positive definite `M`,
/// i.e. the Hermitian positive definite matrix with `R M R = I`.
pub fn hermitian_inv_sqrt(m: &CMat) -> Result<CMat> {
    hermitian_function(m, |v| 1.0 / v.sqrt())
}

/// Principal square root of a Hermitian positive definite matrix.
pub fn hermitian_sqrt(m: &CMat) -> Result<CMat> {
    hermitian_function(m, f64::sqrt)
}

/// Unitary factor `U` of the polar decomposition `M = U |M|`, `|M| = (M^* M)^{1/2}`.
pub fn polar_unitary(m: &CMat) -> Result<CMat> {
    ensure_square(m)?;
    let svd = m.clone().svd(true, true);
    if let Some((index, &pivot)) = svd
        .singular_values
        .iter()
        .enumerate()
        .find(|(_, &s)| !(s > 0.0))
    {
        return Err(Error::NotPositive { index, pivot });
    }
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => Ok(u * v_t),
        _ => Err(Error::NonFinite("polar_unitary")),
    }
}

/// Inverse via LU, refusing numerically singular input.
pub fn inverse(m: &CMat) -> Result<CMat> {
    let n = ensure_square(m)?;
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let (lo, hi) = singular_range(m);
    if !(lo > SINGULAR_RTOL * hi) {
        return Err(Error::NumericBreakdown {
            stage: 0,
            condition: if lo == 0.0 { f64::INFINITY } else { hi / lo },
        });
    }
    m.clone().lu().try_inverse().ok_or(Error::NumericBreakdown {
        stage: 0,
        condition: f64::INFINITY,
    })
}

/// The `(n+1)p x (n+1)p` block lower-triangular Toeplitz operator with
/// `(i/2) I_p` on the diagonal and `i I_p` strictly below it.
pub fn structured_operator(n: usize, p: usize) -> CMat {
    let dim = (n + 1) * p;
    CMat::from_fn(dim, dim, |r, col| {
        let (br, bc) = (r / p, col / p);
        if r % p != col % p || bc > br {
            Complex64::new(0.0, 0.0)
        } else if br == bc {
            c(0.0, 0.5)
        } else {
            c(0.0, 1.0)
        }
    })
}

/// Solve `A S - S A^* = i Pi Pi^*` for the structured `A` of [`structured_operator`].
///
/// Blockwise the identity reads `S_jk = G_jk - sum_{m<j} S_mk - sum_{m<k} S_jm`
/// with `G = Pi Pi^*`, so a single row-major sweep with running column and row
/// sums produces `S` in `O(((n+1)p)^2 p)` work. The result is symmetrized.
pub fn solve_displacement(a: &CMat, pi: &CMat) -> Result<CMat> {
    let dim = ensure_square(a)?;
    if pi.ncols() == 0 || !pi.ncols().is_multiple_of(2) {
        return Err(Error::DimensionMismatch {
            context: "solve_displacement: Pi columns",
            expected: "2p".into(),
            found: pi.ncols().to_string(),
        });
    }
    let p = pi.ncols() / 2;
    if pi.nrows() != dim || dim % p != 0 {
        return Err(Error::DimensionMismatch {
            context: "solve_displacement: Pi rows",
            expected: format!("{dim} (a multiple of p = {p})"),
            found: pi.nrows().to_string(),
        });
    }
    let blocks = dim / p;
    let deviation = max_abs(&(a - structured_operator(blocks - 1, p)));
    if deviation > 1e-12 {
        return Err(Error::UnsupportedOperator { deviation });
    }
    Ok(displacement_sweep(&(pi * pi.adjoint()), p))
}

/// Core recursion of [`solve_displacement`] given `G = Pi Pi^*`.
pub(crate) fn displacement_sweep(g: &CMat, p: usize) -> CMat {
    let dim = g.nrows();
    let mut s = CMat::zeros(dim, dim);
    // col_acc[(a % p, b)] = sum over processed block rows m of S[m p + a % p, b]
    let mut col_acc = CMat::zeros(p, dim);
    let mut row_acc = vec![Complex64::new(0.0, 0.0); p];
    for a in 0..dim {
        let ia = a % p;
        row_acc
            .iter_mut()
            .for_each(|z| *z = Complex64::new(0.0, 0.0));
        for b in 0..dim {
            let ib = b % p;
            let v = g[(a, b)] - col_acc[(ia, b)] - row_acc[ib];
            s[(a, b)] = v;
            row_acc[ib] += v;
        }
        for b in 0..dim {
            col_acc[(ia, b)] += s[(a, b)];
        }
    }
    hermitian_part(&s)
}

/// `(W11 R + W12 Q)(W21 R + W22 Q)^{-1}`
pub fn mobius_transform(
    w11: &CMat,
    w12: &CMat,
    w21: &CMat,
    w22: &CMat,
    r: &CMat,
    q: &CMat,
) -> Result<CMat> {
    let p = w11.nrows();
    for (m, name) in [
        (w11, "W11"),
        (w12, "W12"),
        (w21, "W21"),
        (w22, "W22"),
        (r, "R"),
        (q, "Q"),
    ] {
        if m.shape() != (p, p) {
            return Err(Error::DimensionMismatch {
                context: "mobius_transform",
                expected: format!("{p}x{p} block {name}"),
                found: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
    }
    let num = w11 * r + w12 * q;
    let den = w21 * r + w22 * q;
    let (lo, hi) = singular_range(&den);
    let ratio = if hi == 0.0 { 0.0 } else { lo / hi };
    if !(ratio > SINGULAR_RTOL) {
        return Err(Error::SingularDenominator { sigma_ratio: ratio });
    }
    let den_inv = den
        .lu()
        .try_inverse()
        .ok_or(Error::SingularDenominator { sigma_ratio: ratio })?;
    let out = num * den_inv;
    ensure_finite(&out, "mobius_transform")?;
    Ok(out)
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m2(a: [[Complex64; 2]; 2]) -> CMat {
        CMat::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]])
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> CMat {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        CMat::from_fn(rows, cols, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn residual(a: &CMat, s: &CMat, pi: &CMat) -> f64 {
        max_abs(&(a * s - s * a.adjoint() - pi * pi.adjoint() * c(0.0, 1.0)))
    }

    #[test]
    fn hermitian_examples() {
        let z = re(0.0);
        let i = c(0.0, 1.0);
        assert!(is_hermitian(&identity(2), 1e-12).unwrap());
        assert!(is_hermitian(&m2([[z, i], [-i, z]]), 1e-12).unwrap());
        assert!(!is_hermitian(&m2([[z, i], [i, z]]), 1e-12).unwrap());
        assert!(matches!(
            is_hermitian(&CMat::zeros(2, 3), 1e-12),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn posdef_factor_examples() {
        let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![re(1.0), re(2.0)]));
        let l = posdef_factor(&d, DEFAULT_POSITIVITY_TOL).unwrap();
        assert!((l[(1, 1)].re - 2f64.sqrt()).abs() < 1e-15);
        assert!(max_abs(&(&l * l.adjoint() - &d)) < 1e-14);

        let sing = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![re(1.0), re(0.0)]));
        assert!(matches!(
            posdef_factor(&sing, DEFAULT_POSITIVITY_TOL),
            Err(Error::NotPositive { index: 1, .. })
        ));
        assert_eq!(posdef_factor(&identity(3), 1e-10).unwrap(), identity(3));

        let skew = m2([[re(1.0), c(0.0, 1.0)], [c(0.0, 1.0), re(1.0)]]);
        assert!(matches!(
            posdef_factor(&skew, 1e-10),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn inv_sqrt_examples() {
        let half = CMat::from_element(1, 1, re(0.5));
        let r = hermitian_inv_sqrt(&half).unwrap();
        assert!((r[(0, 0)] - re(2f64.sqrt())).norm() < 1e-15);
        assert!(max_abs(&(hermitian_inv_sqrt(&identity(3)).unwrap() - identity(3))) < 1e-15);
        let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![re(4.0), re(9.0)]));
        let r = hermitian_inv_sqrt(&d).unwrap();
        assert!((r[(0, 0)].re - 0.5).abs() < 1e-15 && (r[(1, 1)].re - 1.0 / 3.0).abs() < 1e-15);
        assert!(r[(0, 1)].norm() < 1e-15);
        assert!(matches!(
            hermitian_inv_sqrt(&CMat::from_element(1, 1, re(-1.0))),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn displacement_small_examples() {
        let a0 = structured_operator(0, 1);
        let pi0 = CMat::from_row_slice(1, 2, &[re(1.0), re(0.0)]);
        let s0 = solve_displacement(&a0, &pi0).unwrap();
        assert!((s0[(0, 0)] - re(1.0)).norm() < 1e-15);

        let a1 = structured_operator(1, 1);
        assert_eq!(a1[(1, 0)], c(0.0, 1.0));
        assert_eq!(a1[(0, 1)], re(0.0));
        let pi1 = CMat::from_row_slice(2, 2, &[re(1.0), re(0.0), re(1.0), re(-1.0)]);
        let s1 = solve_displacement(&a1, &pi1).unwrap();
        let expect = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![re(1.0), re(2.0)]));
        assert!(max_abs(&(&s1 - expect)) < 1e-15);
    }

    #[test]
    fn displacement_rejects_bad_input() {
        let a = structured_operator(1, 1);
        let pi = CMat::zeros(2, 3);
        assert!(matches!(
            solve_displacement(&a, &pi),
            Err(Error::DimensionMismatch { .. })
        ));
        let pi = CMat::zeros(3, 2);
        assert!(solve_displacement(&a, &pi).is_err());
        let generic = random_matrix(2, 2, 3);
        assert!(matches!(
            solve_displacement(&generic, &CMat::zeros(2, 2)),
            Err(Error::UnsupportedOperator { .. })
        ));
    }

    #[test]
    fn displacement_random_residual_and_oracle() {
        for seed in 0..20 {
            let (n, p) = (4, 2);
            let a = structured_operator(n, p);
            let pi = random_matrix((n + 1) * p, 2 * p, seed);
            let s = solve_displacement(&a, &pi).unwrap();
            let g = max_abs(&(&pi * pi.adjoint()));
            assert!(residual(&a, &s, &pi) <= 1e-12 * g);
            assert!(hermitian_deviation(&s) <= 1e-12 * max_abs(&s));
            let dense = oracle::displacement_dense(&a, &pi);
            assert!(max_abs(&(&s - dense)) < 1e-8);
        }
    }

    #[test]
    fn mobius_examples() {
        let id = identity(2);
        let z = CMat::zeros(2, 2);
        assert!(max_abs(&mobius_transform(&id, &z, &z, &id, &z, &id).unwrap()) < 1e-15);
        let out = mobius_transform(&id, &z, &z, &id, &id, &id).unwrap();
        assert!(max_abs(&(out - &id)) < 1e-15);
        assert!(matches!(
            mobius_transform(&id, &z, &z, &id, &id, &z),
            Err(Error::SingularDenominator { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn inv_sqrt_squares_back(dim in 1usize..=32, seed in any::<u64>()) {
            let x = random_matrix(dim, dim, seed);
            let m = &x * x.adjoint() + identity(dim).scale(0.1);
            let r = hermitian_inv_sqrt(&m).unwrap();
            let err = max_abs(&(&r * &r * &m - identity(dim)));
            prop_assert!(err <= 1e-10, "err = {err:e}");
        }

        #[test]
        fn displacement_matches_dense(n in 0usize..6, p in 1usize..4, seed in any::<u64>()) {
            prop_assume!((n + 1) * p <= 24);
            let a = structured_operator(n, p);
            let pi = random_matrix((n + 1) * p, 2 * p, seed);
            let s = solve_displacement(&a, &pi).unwrap();
            prop_assert!(max_abs(&(&s - oracle::displacement_dense(&a, &pi))) <= 1e-8);
        }

        #[test]
        fn mobius_gauge_invariance(seed in any::<u64>(), p in 1usize..4) {
            let w = random_matrix(2 * p, 2 * p, seed) + identity(2 * p).scale(3.0);
            let (w11, w12, w21, w22) = (block(&w, p, 0, 0), block(&w, p, 0, 1), block(&w, p, 1, 0), block(&w, p, 1, 1));
            let r = random_matrix(p, p, seed ^ 1);
            let q = random_matrix(p, p, seed ^ 2) + identity(p).scale(2.0);
            let t = random_matrix(p, p, seed ^ 3) + identity(p).scale(2.0);
            let base = mobius_transform(&w11, &w12, &w21, &w22, &r, &q);
            let gauged = mobius_transform(&w11, &w12, &w21, &w22, &(&r * &t), &(&q * &t));
            if let (Ok(b), Ok(g)) = (base, gauged) {
                prop_assert!(max_abs(&(b - g)) <= 1e-10);
            }
        }
    }
}
