//! Seeded random generators for test corpora and the round-trip driver.
//!
//! Rows `beta(k)` come from the QR factor of a Gaussian complex `2p x 2p`
//! matrix, resampled until every nondegeneracy determinant is at least
//! [`GENERATOR_MARGIN`].

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::discrete::BetaSequence;
use crate::linalg::CMat;

pub const GENERATOR_MARGIN: f64 = 1e-3;

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-like random unitary of size `dim` (QR with phase-corrected diagonal).
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMat {
    let qr = gaussian_matrix(rng, dim, dim).qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..dim {
            q[(i, k)] *= phase;
        }
    }
    q
}

/// `beta = [0 I_p] U^*` for a fresh random unitary `U`.
pub fn random_row<R: Rng + ?Sized>(rng: &mut R, p: usize) -> CMat {
    random_unitary(rng, 2 * p).adjoint().rows(p, p).into_owned()
}

fn det_abs(m: &CMat) -> f64 {
    m.clone().lu().determinant().norm()
}

/// Extend `prefix` (possibly empty) to `n + 1` rows with fresh random rows.
pub fn extend_beta<R: Rng + ?Sized>(
    rng: &mut R,
    p: usize,
    prefix: &[CMat],
    n: usize,
) -> BetaSequence {
    let mut rows: Vec<CMat> = prefix.to_vec();
    while rows.len() <= n {
        let candidate = random_row(rng, p);
        let ok = match rows.last() {
            None => det_abs(&candidate.columns(0, p).into_owned()) >= GENERATOR_MARGIN,
            Some(prev) => det_abs(&(prev * candidate.adjoint())) >= GENERATOR_MARGIN,
        };
        if ok {
            rows.push(candidate);
        }
    }
    BetaSequence::new(p, rows).expect("generated rows satisfy both conditions")
}

/// Random valid `beta(0..n)` with block size `p`.
pub fn random_beta_sequence<R: Rng + ?Sized>(rng: &mut R, n: usize, p: usize) -> BetaSequence {
    extend_beta(rng, p, &[], n)
}
