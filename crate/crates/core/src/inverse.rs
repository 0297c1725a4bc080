//! Reconstruction of a discrete system from Taylor data `alpha_0..alpha_n`.
//!
//! `Phi_1` stacks identities, `Phi_2` stacks negated partial sums of `alpha`,
//! `S` solves `A S - S A^* = i Pi Pi^*`, and each row is
//! `beta(r) = (P_r S(r)^{-1} P_r^*)^{-1/2} P_r S(r)^{-1} Pi(r)`, with `S(r)^{-1}`
//! carried from stage to stage by bordered Schur-complement updates
//! ([`solve_inverse_snode`]).
//!
//! `S` is typically very ill-conditioned, so [`solve_inverse`] recovers the rows
//! by layer peeling on the series `[phi; I]` instead: `beta(k)` annihilates the
//! constant term of the current pair, and the factor `chi^* chi + z beta^* beta`
//! is divided out before moving on. `S` is still formed for classification and
//! diagnostics.

use crate::discrete::{
    system_from_beta, BetaSequence, DiscreteDiracSystem, SNode, NONDEGENERACY_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::extended::{orthonormalize_pair, XMat};
use crate::linalg::{
    self, hermitian_eigenvalues, hermitian_inv_sqrt, identity, max_abs, singular_range,
    solve_displacement, structured_operator, CMat,
};
use crate::weyl::WeylTaylorData;

/// `sigma_min(S) / ||S||` at or above this declares Taylor data of a Weyl function.
pub const WEYL_THRESHOLD: f64 = 1e-10;
/// Margins within one decade above [`WEYL_THRESHOLD`] are flagged as marginal.
pub const MARGINAL_BAND: f64 = 10.0;
/// Allowed `max |beta beta^* - I|` on reconstructed rows.
pub const RECOVERED_COISOMETRY_TOL: f64 = 1e-9;

/// `(A, Pi)` for Taylor data.
pub fn build_structured_operators(alpha: &WeylTaylorData) -> (CMat, CMat) {
    let p = alpha.p();
    let n = alpha.n();
    let dim = (n + 1) * p;
    let mut pi = CMat::zeros(dim, 2 * p);
    let mut partial = CMat::zeros(p, p);
    for (k, a) in alpha.coefficients().iter().enumerate() {
        partial += a;
        pi.view_mut((k * p, 0), (p, p)).copy_from(&identity(p));
        pi.view_mut((k * p, p), (p, p)).copy_from(&(-&partial));
    }
    (structured_operator(n, p), pi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Weyl,
    Marginal,
    NotWeyl,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Weyl => "Weyl",
            Classification::Marginal => "Marginal",
            Classification::NotWeyl => "NotWeyl",
        }
    }

    pub fn accepted(self) -> bool {
        !matches!(self, Classification::NotWeyl)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityClass {
    pub class: Classification,
    /// `sigma_min(S) / sigma_max(S)`
    pub margin: f64,
}

/// Invertibility decision on an already computed `S`.
pub fn classify_matrix(s: &CMat) -> AdmissibilityClass {
    classify_matrix_with(s, WEYL_THRESHOLD)
}

/// [`classify_matrix`] with a caller-chosen threshold on `sigma_min / sigma_max`.
pub fn classify_matrix_with(s: &CMat, threshold: f64) -> AdmissibilityClass {
    let (lo, hi) = singular_range(s);
    let margin = if hi > 0.0 && lo.is_finite() {
        lo / hi
    } else {
        0.0
    };
    let class = if !(margin >= threshold) {
        Classification::NotWeyl
    } else if margin < threshold * MARGINAL_BAND {
        Classification::Marginal
    } else {
        Classification::Weyl
    };
    AdmissibilityClass { class, margin }
}

/// Are `alpha_0..alpha_n` Taylor data of a Weyl function of some system?
/// Decided by invertibility of `S`.
pub fn classify_admissible(alpha: &WeylTaylorData) -> AdmissibilityClass {
    classify_admissible_with(alpha, WEYL_THRESHOLD)
}

pub fn classify_admissible_with(alpha: &WeylTaylorData, threshold: f64) -> AdmissibilityClass {
    let (a, pi) = build_structured_operators(alpha);
    match solve_displacement(&a, &pi) {
        Ok(s) => classify_matrix_with(&s, threshold),
        Err(_) => AdmissibilityClass {
            class: Classification::NotWeyl,
            margin: 0.0,
        },
    }
}

/// Inverse of the bordered matrix `[[S_prev, S12], [S21, s]]` from `S_prev^{-1}`:
/// with `t = (s - S21 S_prev^{-1} S12)^{-1}` the blocks are
/// `S_prev^{-1} + S_prev^{-1} S12 t S21 S_prev^{-1}`, `-S_prev^{-1} S12 t`,
/// `-t S21 S_prev^{-1}` and `t`.
pub fn schur_update_inverse(
    s_prev_inv: &CMat,
    s12: &CMat,
    s21: &CMat,
    s: &CMat,
    stage: usize,
) -> Result<CMat> {
    let m = s_prev_inv.nrows();
    let p = s.nrows();
    if s12.shape() != (m, p) || s21.shape() != (p, m) || s.shape() != (p, p) {
        return Err(Error::DimensionMismatch {
            context: "schur_update_inverse",
            expected: format!("S12 {m}x{p}, S21 {p}x{m}, s {p}x{p}"),
            found: format!("{:?}, {:?}, {:?}", s12.shape(), s21.shape(), s.shape()),
        });
    }
    let left = s21 * s_prev_inv; // S21 S_prev^{-1}
    let right = s_prev_inv * s12; // S_prev^{-1} S12
    let complement = s - &left * s12;
    let t = linalg::inverse(&complement).map_err(|_| Error::SingularSchurComplement { stage })?;
    let mut out = CMat::zeros(m + p, m + p);
    let rt = &right * &t;
    out.view_mut((0, 0), (m, m))
        .copy_from(&(s_prev_inv + &rt * &left));
    out.view_mut((0, m), (m, p)).copy_from(&(-&rt));
    out.view_mut((m, 0), (p, m)).copy_from(&(-(&t * &left)));
    out.view_mut((m, m), (p, p)).copy_from(&t);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseDiagnostics {
    pub classification: AdmissibilityClass,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `max |A S - S A^* - i Pi Pi^*|` over `max(|A| |S|, |Pi|^2)`
    pub displacement_residual: f64,
    /// Smallest Cholesky pivot ratio met while peeling.
    pub peel_margin: f64,
    /// Condition numbers of the leading blocks `S(0)..S(n)`.
    pub stage_conditions: Vec<f64>,
    /// `max_r |beta(r) beta(r)^* - I|`
    pub coisometry_deviation: f64,
    /// Nondegeneracy determinants of the reconstructed rows.
    pub nondegeneracy: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct InverseResult {
    pub system: DiscreteDiracSystem,
    pub beta: BetaSequence,
    pub snode: SNode,
    pub diagnostics: InverseDiagnostics,
}

fn stage_condition(s_r: &CMat) -> f64 {
    let eig = hermitian_eigenvalues(s_r);
    let lo = eig.first().copied().unwrap_or(0.0);
    let hi = eig.last().copied().unwrap_or(0.0);
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// `beta(k)^* beta(k)` for `k = 0..n` by layer peeling in double-double
/// arithmetic, with the smallest pivot ratio met along the way.
pub fn peel_grams(alpha: &WeylTaylorData) -> Result<(Vec<CMat>, f64)> {
    let p = alpha.p();
    let mut pair: Vec<XMat> = alpha
        .coefficients()
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let lower = if k == 0 {
                identity(p)
            } else {
                CMat::zeros(p, p)
            };
            XMat::from_cmat(&linalg::vstack(&[a.clone(), lower]))
        })
        .collect();
    let id = XMat::identity(2 * p);
    let mut grams = Vec::with_capacity(alpha.len());
    let mut margin: f64 = 1.0;
    for _ in 0..alpha.len() {
        let step = orthonormalize_pair(&mut pair).ok_or(Error::NotAWeylFunction { margin: 0.0 })?;
        margin = margin.min(step);
        let lead = pair[0].mul(&pair[0].adjoint()); // chi^* chi
        let gram = id.sub(&lead);
        grams.push(gram.to_cmat());
        pair = (0..pair.len() - 1)
            .map(|j| lead.mul(&pair[j]).add(&gram.mul(&pair[j + 1])))
            .collect();
        if pair.is_empty() {
            break;
        }
    }
    Ok((grams, margin))
}

fn stage_conditions(s: &CMat, p: usize) -> Vec<f64> {
    (1..=s.nrows() / p)
        .map(|blocks| stage_condition(&s.view((0, 0), (blocks * p, blocks * p)).into_owned()))
        .collect()
}

/// Recover `beta(0..n)` (in the gauge where every `v_-(k)` is positive) and
/// `C_0..C_n` from Taylor data.
pub fn solve_inverse(alpha: &WeylTaylorData) -> Result<InverseResult> {
    let p = alpha.p();
    let n = alpha.n();
    let (a, pi) = build_structured_operators(alpha);
    let s = solve_displacement(&a, &pi)?;
    linalg::ensure_finite(&s, "solve_inverse")?;
    let classification = classify_matrix(&s);
    let eig = hermitian_eigenvalues(&s);
    let (min_eigenvalue, max_eigenvalue) = (eig[0], eig[eig.len() - 1]);
    let displacement_residual = relative_displacement_residual(&a, &s, &pi);
    let stage_conditions = stage_conditions(&s, p);
    let worst_condition = stage_conditions.iter().copied().fold(0.0, f64::max);

    let (grams, peel_margin) = peel_grams(alpha)?;
    let rows = grams
        .iter()
        .map(|g| {
            let (_, vecs) = linalg::hermitian_eigenvectors(g);
            vecs.columns(p, p).adjoint()
        })
        .collect();
    let raw = BetaSequence::new_unchecked(p, rows)?;
    let (coisometry_deviation, nondegeneracy) = check_recovered(&raw, worst_condition)?;
    let beta = raw.canonical_gauge().map_err(|_| Error::IllConditioned {
        stage: n,
        detail: "gauge fixing met a singular v_-".into(),
        condition: worst_condition,
    })?;
    let system = system_from_beta(&beta)?;
    let snode = SNode::new(p, a, s, pi)?;
    Ok(InverseResult {
        system,
        beta,
        snode,
        diagnostics: InverseDiagnostics {
            classification,
            min_eigenvalue,
            max_eigenvalue,
            displacement_residual,
            peel_margin,
            stage_conditions,
            coisometry_deviation,
            nondegeneracy,
        },
    })
}

fn relative_displacement_residual(a: &CMat, s: &CMat, pi: &CMat) -> f64 {
    let res = max_abs(&(a * s - s * a.adjoint() - pi * pi.adjoint() * linalg::c(0.0, 1.0)));
    let scale = (max_abs(a) * max_abs(s))
        .max(max_abs(pi).powi(2))
        .max(f64::MIN_POSITIVE);
    res / scale
}

fn check_recovered(beta: &BetaSequence, condition: f64) -> Result<(f64, Vec<f64>)> {
    let id = identity(beta.p());
    let deviation = beta
        .rows()
        .iter()
        .map(|b| max_abs(&(b * b.adjoint() - &id)))
        .fold(0.0, f64::max);
    if deviation > RECOVERED_COISOMETRY_TOL {
        return Err(Error::IllConditioned {
            stage: beta.n(),
            detail: format!("recovered rows deviate from coisometry by {deviation:e}"),
            condition,
        });
    }
    let dets = beta.nondegeneracy_dets();
    if let Some((stage, d)) = dets
        .iter()
        .enumerate()
        .find(|(_, &d)| d < NONDEGENERACY_THRESHOLD)
    {
        return Err(Error::IllConditioned {
            stage,
            detail: format!("recovered nondegeneracy determinant {d:e} below threshold"),
            condition,
        });
    }
    Ok((deviation, dets))
}

/// Rows `beta(0..n)` straight from `S` and `Pi`, stage by stage.
pub fn solve_inverse_snode(alpha: &WeylTaylorData) -> Result<BetaSequence> {
    let p = alpha.p();
    let n = alpha.n();
    let (a, pi) = build_structured_operators(alpha);
    let s = solve_displacement(&a, &pi)?;
    linalg::ensure_finite(&s, "solve_inverse_snode")?;
    let classification = classify_matrix(&s);
    if classification.class == Classification::NotWeyl {
        return Err(Error::NotAWeylFunction {
            margin: classification.margin,
        });
    }
    let mut rows = Vec::with_capacity(n + 1);
    let mut s_inv = CMat::zeros(0, 0);
    for r in 0..=n {
        let lead = r * p;
        let s_rr = linalg::block(&s, p, r, r);
        s_inv = if r == 0 {
            linalg::inverse(&s_rr).map_err(|_| Error::SingularSchurComplement { stage: 0 })?
        } else {
            let s12 = s.view((0, lead), (lead, p)).into_owned();
            let s21 = s.view((lead, 0), (p, lead)).into_owned();
            schur_update_inverse(&s_inv, &s12, &s21, &s_rr, r)?
        };
        let dim = lead + p;
        let last_row = s_inv.rows(lead, p).into_owned(); // P_r S(r)^{-1}
        let t = last_row.columns(lead, p).into_owned(); // P_r S(r)^{-1} P_r^*
        let norm = hermitian_inv_sqrt(&t).map_err(|_| Error::IllConditioned {
            stage: r,
            detail: "P S(r)^-1 P^* is not positive definite".into(),
            condition: stage_condition(&s.view((0, 0), (dim, dim)).into_owned()),
        })?;
        rows.push(norm * last_row * pi.rows(0, dim));
    }
    let beta = BetaSequence::new_unchecked(p, rows)?;
    check_recovered(&beta, classification.margin.recip())?;
    Ok(beta)
}

/// Outcome of comparing two data sets on the prefix `0..=l`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixReport {
    pub l: usize,
    /// First index `k <= l` where the data differ, if any.
    pub first_disagreement: Option<usize>,
    /// `max_{k <= l} |C_k - C'_k|`, present only when the data agree up to `l`.
    pub max_c_deviation: Option<f64>,
}

impl PrefixReport {
    pub fn prefix_agrees(&self, tol: f64) -> bool {
        self.first_disagreement.is_none() && self.max_c_deviation.is_some_and(|d| d <= tol)
    }
}

/// Equal Taylor data up to index `l` give equal coefficients `C_0..C_l`.
/// `data_tol` decides coefficient agreement.
pub fn borg_marchenko_check(
    alpha_1: &WeylTaylorData,
    alpha_2: &WeylTaylorData,
    l: usize,
    data_tol: f64,
) -> Result<PrefixReport> {
    if alpha_1.len() <= l || alpha_2.len() <= l || alpha_1.p() != alpha_2.p() {
        return Err(Error::InvalidInput(format!(
            "prefix index {l} needs both data sets longer than {l} with equal p"
        )));
    }
    let first_disagreement = alpha_1.coefficients()[..=l]
        .iter()
        .zip(&alpha_2.coefficients()[..=l])
        .position(|(a, b)| max_abs(&(a - b)) > data_tol);
    if first_disagreement.is_some() {
        return Ok(PrefixReport {
            l,
            first_disagreement,
            max_c_deviation: None,
        });
    }
    let one = solve_inverse(&alpha_1.truncated(l))?;
    let two = solve_inverse(&alpha_2.truncated(l))?;
    let deviation = one
        .system
        .coefficients()
        .iter()
        .zip(two.system.coefficients())
        .map(|(x, y)| max_abs(&(x - y)))
        .fold(0.0, f64::max);
    Ok(PrefixReport {
        l,
        first_disagreement: None,
        max_c_deviation: Some(deviation),
    })
}
