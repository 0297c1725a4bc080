//! Weyl functions of discrete systems and their Taylor data at `lambda = i`.
//!
//! Taylor data are the coefficients `alpha_k` of `phi(i (1+z)/(1-z))` at `z = 0`.
//! In `z` every factor of `calW` is, up to a scalar, `chi^* chi + z beta^* beta`,
//! so the data of a system come from a polynomial product and one series
//! quotient. The same data are also read off from `Phi_2 = V_-^{-1} B_2`:
//! `alpha_0 = -psi_0`, `alpha_k = psi_{k-1} - psi_k`.

use num_complex::Complex64;

use crate::discrete::{calw_blocks, snode_from_system, BetaSequence, DiscreteDiracSystem};
use crate::error::{Error, Result};
use crate::extended::{orthonormalize_pair, series_inverse, series_mul, XMat};
use crate::linalg::{self, block, c, identity, mobius_transform, singular_range, CMat};

/// Relative cutoff used by [`check_pair_admissible`].
pub const ADMISSIBILITY_RTOL: f64 = 1e-10;

/// `z = (lambda - i) / (lambda + i)`
pub fn z_of_lambda(lambda: Complex64) -> Result<Complex64> {
    let den = lambda + c(0.0, 1.0);
    if den.norm() == 0.0 {
        return Err(Error::Pole("lambda = -i"));
    }
    Ok((lambda - c(0.0, 1.0)) / den)
}

/// `lambda = i (1 + z) / (1 - z)`
pub fn lambda_of_z(z: Complex64) -> Result<Complex64> {
    let den = Complex64::new(1.0, 0.0) - z;
    if den.norm() == 0.0 {
        return Err(Error::Pole("z = 1"));
    }
    Ok(c(0.0, 1.0) * (1.0 + z) / den)
}

/// Taylor coefficients `alpha_0..alpha_n`, each `p x p`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylTaylorData {
    p: usize,
    alpha: Vec<CMat>,
}

impl WeylTaylorData {
    pub fn new(p: usize, alpha: Vec<CMat>) -> Result<Self> {
        if p == 0 || alpha.is_empty() {
            return Err(Error::InvalidInput(
                "Taylor data needs p >= 1 and at least one coefficient".into(),
            ));
        }
        for a in &alpha {
            if a.shape() != (p, p) {
                return Err(Error::DimensionMismatch {
                    context: "Taylor coefficient",
                    expected: format!("{p}x{p}"),
                    found: format!("{}x{}", a.nrows(), a.ncols()),
                });
            }
            linalg::ensure_finite(a, "Taylor coefficient")?;
        }
        Ok(Self { p, alpha })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.alpha.len() - 1
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn coefficients(&self) -> &[CMat] {
        &self.alpha
    }

    pub fn truncated(&self, l: usize) -> Self {
        Self {
            p: self.p,
            alpha: self.alpha[..=l].to_vec(),
        }
    }

    /// Largest entry of any coefficient.
    pub fn scale(&self) -> f64 {
        self.alpha.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }

    /// [`Self::max_deviation`] divided by `max(1, scale)`.
    pub fn relative_deviation(&self, other: &Self) -> f64 {
        self.max_deviation(other) / self.scale().max(other.scale()).max(1.0)
    }

    /// Largest entrywise difference over the first `min(len)` coefficients.
    pub fn max_deviation(&self, other: &Self) -> f64 {
        self.alpha
            .iter()
            .zip(&other.alpha)
            .map(|(a, b)| linalg::max_abs(&(a - b)))
            .fold(0.0, f64::max)
    }
}

/// A parameter pair `(R, Q)` given by Taylor polynomials in `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissiblePair {
    p: usize,
    r: Vec<CMat>,
    q: Vec<CMat>,
}

impl AdmissiblePair {
    pub fn new(p: usize, r: Vec<CMat>, q: Vec<CMat>) -> Result<Self> {
        if r.is_empty() || q.is_empty() {
            return Err(Error::InvalidInput(
                "pair polynomials need a constant term".into(),
            ));
        }
        for m in r.iter().chain(&q) {
            if m.shape() != (p, p) {
                return Err(Error::DimensionMismatch {
                    context: "pair coefficient",
                    expected: format!("{p}x{p}"),
                    found: format!("{}x{}", m.nrows(), m.ncols()),
                });
            }
        }
        Ok(Self { p, r, q })
    }

    /// Constant pair.
    pub fn constant(r: CMat, q: CMat) -> Result<Self> {
        let p = r.nrows();
        Self::new(p, vec![r], vec![q])
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn r_coefficients(&self) -> &[CMat] {
        &self.r
    }

    pub fn q_coefficients(&self) -> &[CMat] {
        &self.q
    }

    fn horner(coeffs: &[CMat], z: Complex64) -> CMat {
        coeffs.iter().rev().fold(
            CMat::zeros(coeffs[0].nrows(), coeffs[0].ncols()),
            |acc, k| acc * z + k,
        )
    }

    pub fn eval_at_z(&self, z: Complex64) -> (CMat, CMat) {
        (Self::horner(&self.r, z), Self::horner(&self.q, z))
    }

    pub fn eval(&self, lambda: Complex64) -> Result<(CMat, CMat)> {
        Ok(self.eval_at_z(z_of_lambda(lambda)?))
    }
}

/// Weyl function of `sys` determined by `pair`, evaluated at `lambda`.
pub fn weyl_eval(
    sys: &DiscreteDiracSystem,
    pair: &AdmissiblePair,
    lambda: Complex64,
) -> Result<CMat> {
    if pair.p() != sys.p() {
        return Err(Error::DimensionMismatch {
            context: "weyl_eval pair",
            expected: sys.p().to_string(),
            found: pair.p().to_string(),
        });
    }
    let w = calw_blocks(sys, lambda)?;
    let (r, q) = pair.eval(lambda)?;
    mobius_transform(&w.w11, &w.w12, &w.w21, &w.w22, &r, &q)
}

/// Convert the blocks `psi_k` of `Phi_2` to Taylor coefficients.
pub fn taylor_from_phi2(p: usize, phi2: &CMat) -> Result<WeylTaylorData> {
    let count = phi2.nrows() / p;
    let psi: Vec<CMat> = (0..count).map(|k| block(phi2, p, k, 0)).collect();
    let mut alpha = Vec::with_capacity(count);
    alpha.push(-&psi[0]);
    for k in 1..count {
        alpha.push(&psi[k - 1] - &psi[k]);
    }
    WeylTaylorData::new(p, alpha)
}

/// Taylor data `alpha_0..alpha_n` of the Weyl functions of the system `b`.
///
/// Uses the pair `(R, Q) = chi(n)^*`, for which `calW(i)` times the pair has an
/// invertible lower block whenever the nondegeneracy conditions hold.
pub fn taylor_from_system(b: &BetaSequence) -> Result<WeylTaylorData> {
    b.validate(crate::discrete::NONDEGENERACY_THRESHOLD)?;
    let p = b.p();
    let n = b.n();
    let len = n + 1;
    let last = b.get(n);
    let chi_last = linalg::hstack(&last.adjoint(), &identity(2 * p))
        .qr()
        .q()
        .columns(p, p)
        .into_owned();
    let mut pair = vec![XMat::zeros(2 * p, p); len];
    pair[0] = XMat::from_cmat(&chi_last);
    let id = XMat::identity(2 * p);
    for k in (0..n).rev() {
        let beta = XMat::from_cmat(b.get(k));
        let gram = beta.adjoint().mul(&beta);
        let chi = id.sub(&gram);
        let mut next = Vec::with_capacity(len);
        for j in 0..len {
            let mut m = chi.mul(&pair[j]);
            if j > 0 {
                m = m.add(&gram.mul(&pair[j - 1]));
            }
            next.push(m);
        }
        pair = next;
        orthonormalize_pair(&mut pair).ok_or(Error::NumericBreakdown {
            stage: k,
            condition: f64::INFINITY,
        })?;
    }
    let top: Vec<XMat> = pair.iter().map(|m| m.view(0, 0, p, p)).collect();
    let bottom: Vec<XMat> = pair.iter().map(|m| m.view(p, 0, p, p)).collect();
    let inv = series_inverse(&bottom).ok_or(Error::Pole("calW(i) lower block"))?;
    let alpha = series_mul(&top, &inv).iter().map(XMat::to_cmat).collect();
    WeylTaylorData::new(p, alpha)
}

/// Taylor data through the S-node of the system, from `Phi_2`.
pub fn taylor_from_snode(b: &BetaSequence) -> Result<WeylTaylorData> {
    let node = snode_from_system(b)?;
    taylor_from_phi2(b.p(), &node.phi2())
}

/// Outcome of the nondegeneracy test for a pair at `lambda = i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Admissibility {
    pub admissible: bool,
    pub determinant: Complex64,
    /// `sigma_min / scale` of `W21(i) R(i) + W22(i) Q(i)`.
    pub margin: f64,
}

/// `det(W21(i) R(i) + W22(i) Q(i)) != 0`, decided by the relative smallest
/// singular value against [`ADMISSIBILITY_RTOL`].
pub fn check_pair_admissible(sys: &DiscreteDiracSystem, pair: &AdmissiblePair) -> Admissibility {
    let w = match calw_blocks(sys, c(0.0, 1.0)) {
        Ok(w) => w,
        Err(_) => {
            return Admissibility {
                admissible: false,
                determinant: Complex64::new(0.0, 0.0),
                margin: 0.0,
            }
        }
    };
    let (r, q) = pair.eval_at_z(Complex64::new(0.0, 0.0));
    let den = &w.w21 * &r + &w.w22 * &q;
    let determinant = den.clone().lu().determinant();
    let (lo, _) = singular_range(&den);
    let lower = linalg::hstack(&w.w21, &w.w22);
    let rq = linalg::vstack(&[r, q]);
    let scale = linalg::op_norm(&lower) * linalg::op_norm(&rq);
    let margin = if scale > 0.0 { lo / scale } else { 0.0 };
    Admissibility {
        admissible: margin > ADMISSIBILITY_RTOL,
        determinant,
        margin,
    }
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::*;

    /// Taylor coefficients `0..count` of `f(z)` from samples on `|z| = radius`
    /// by discrete Fourier inversion.
    pub fn circle_fit(
        f: impl Fn(Complex64) -> CMat,
        count: usize,
        points: usize,
        radius: f64,
    ) -> Vec<CMat> {
        let samples: Vec<(Complex64, CMat)> = (0..points)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / points as f64;
                let w = Complex64::from_polar(1.0, theta);
                (w, f(w * radius))
            })
            .collect();
        (0..count)
            .map(|m| {
                let mut acc = CMat::zeros(samples[0].1.nrows(), samples[0].1.ncols());
                for (w, v) in &samples {
                    acc += v * w.powi(-(m as i32));
                }
                acc.unscale(points as f64 * radius.powi(m as i32))
            })
            .collect()
    }

    /// Winding number of `g` around the circle `|z| = radius`.
    pub fn winding_number(g: impl Fn(Complex64) -> Complex64, radius: f64) -> i64 {
        let samples = 512;
        let mut total = 0.0;
        let mut prev = g(Complex64::new(radius, 0.0));
        for k in 1..=samples {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
            let cur = g(Complex64::from_polar(radius, theta));
            total += (cur / prev).arg();
            prev = cur;
        }
        (total / (2.0 * std::f64::consts::PI)).round() as i64
    }

    /// Taylor coefficients of `N D^{-1}` by a circle fit on half the largest
    /// radius (from `0.5, 0.25, ...`) whose disk contains no zero of `det D`.
    pub fn taylor_fit(
        f: impl Fn(Complex64) -> CMat,
        det_d: impl Fn(Complex64) -> Complex64,
        count: usize,
    ) -> Vec<CMat> {
        let mut radius = 0.5;
        while winding_number(&det_d, radius) != 0 && radius > 1e-8 {
            radius *= 0.5;
        }
        circle_fit(f, count, 64, radius * 0.5)
    }
}
