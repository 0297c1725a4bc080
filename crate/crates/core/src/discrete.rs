//! Discrete skew-self-adjoint Dirac systems
//! `W_{k+1}(l) - W_k(l) = -(i/l) C_k W_k(l)` with `C_k = I - 2 beta(k)^* beta(k)`.
//!
//! The S-node `(A, S, Pi)` of a system is built from the block lower-triangular
//! similarity `V_-` with `K(r) = V_-(r) A(r) V_-(r)^{-1}`; `S = V_-^{-1} V_-^{-*}`
//! and `Pi = V_-^{-1} B`.

use num_complex::Complex64;

use crate::error::{BetaCondition, Error, Result};
use crate::linalg::{
    self, block, c, condition_number, hermitian_eigenvectors, hstack, identity, max_abs, op_norm,
    polar_unitary, re, structured_operator, CMat,
};

/// Tolerance for `beta beta^* = I_p` and for the involution checks on `C_k`.
pub const COISOMETRY_TOL: f64 = 1e-10;
/// `|det|` cutoff for the nondegeneracy conditions (rows are orthonormal, so
/// the natural scale of every determinant is 1).
pub const NONDEGENERACY_THRESHOLD: f64 = 1e-8;
/// `V_-` diagonal blocks with condition number above this are a breakdown.
pub const BREAKDOWN_CONDITION: f64 = 1e12;

/// `j = diag(I_p, -I_p)`
pub fn signature(p: usize) -> CMat {
    CMat::from_fn(2 * p, 2 * p, |r, col| {
        if r != col {
            re(0.0)
        } else if r < p {
            re(1.0)
        } else {
            re(-1.0)
        }
    })
}

/// `J = [[0, I_p], [I_p, 0]]`
pub fn exchange(p: usize) -> CMat {
    CMat::from_fn(2 * p, 2 * p, |r, col| {
        if (r + p) % (2 * p) == col {
            re(1.0)
        } else {
            re(0.0)
        }
    })
}

/// `K = (1/sqrt 2) [[I_p, -I_p], [I_p, I_p]]`, the unitary with `J = K j K^*`.
pub fn rotation(p: usize) -> CMat {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(2 * p, 2 * p, |r, col| {
        if r % p != col % p {
            re(0.0)
        } else if r >= p && col < p {
            re(h)
        } else if r < p && col >= p {
            re(-h)
        } else {
            re(h)
        }
    })
}

fn det_abs(m: &CMat) -> f64 {
    m.clone().lu().determinant().norm()
}

/// Rows `beta(0..n)`, each `p x 2p` with orthonormal rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaSequence {
    p: usize,
    beta: Vec<CMat>,
}

impl BetaSequence {
    /// Validates coisometry and nondegeneracy.
    pub fn new(p: usize, beta: Vec<CMat>) -> Result<Self> {
        let seq = Self::new_unchecked(p, beta)?;
        seq.validate(NONDEGENERACY_THRESHOLD)?;
        Ok(seq)
    }

    /// Checks shapes only.
    pub fn new_unchecked(p: usize, beta: Vec<CMat>) -> Result<Self> {
        if p == 0 || beta.is_empty() {
            return Err(Error::InvalidInput(
                "beta sequence needs p >= 1 and at least one row block".into(),
            ));
        }
        for b in &beta {
            if b.shape() != (p, 2 * p) {
                return Err(Error::DimensionMismatch {
                    context: "beta row block",
                    expected: format!("{p}x{}", 2 * p),
                    found: format!("{}x{}", b.nrows(), b.ncols()),
                });
            }
            linalg::ensure_finite(b, "beta")?;
        }
        Ok(Self { p, beta })
    }

    pub fn validate(&self, det_threshold: f64) -> Result<()> {
        let id = identity(self.p);
        for (k, b) in self.beta.iter().enumerate() {
            let dev = max_abs(&(b * b.adjoint() - &id));
            if dev > COISOMETRY_TOL {
                return Err(Error::InvalidBeta {
                    index: k,
                    condition: BetaCondition::Coisometry,
                    value: dev,
                });
            }
        }
        for (k, d) in self.nondegeneracy_dets().into_iter().enumerate() {
            if d < det_threshold {
                return Err(Error::InvalidBeta {
                    index: k,
                    condition: BetaCondition::Nondegeneracy,
                    value: d,
                });
            }
        }
        Ok(())
    }

    /// `[|det beta_1(0)|, |det beta(0) beta(1)^*|, ..., |det beta(n-1) beta(n)^*|]`
    pub fn nondegeneracy_dets(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.beta.len());
        out.push(det_abs(&self.block1(0)));
        for k in 1..self.beta.len() {
            out.push(det_abs(&(&self.beta[k - 1] * self.beta[k].adjoint())));
        }
        out
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Index of the last row block.
    pub fn n(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn rows(&self) -> &[CMat] {
        &self.beta
    }

    pub fn get(&self, k: usize) -> &CMat {
        &self.beta[k]
    }

    pub fn block1(&self, k: usize) -> CMat {
        self.beta[k].columns(0, self.p).into_owned()
    }

    pub fn block2(&self, k: usize) -> CMat {
        self.beta[k].columns(self.p, self.p).into_owned()
    }

    /// `beta(k)^* beta(k)`
    pub fn gram(&self, k: usize) -> CMat {
        self.beta[k].adjoint() * &self.beta[k]
    }

    /// `B(r)`: the first `r + 1` row blocks stacked.
    pub fn stacked(&self, r: usize) -> CMat {
        linalg::vstack(&self.beta[..=r])
    }

    pub fn truncated(&self, l: usize) -> Self {
        Self {
            p: self.p,
            beta: self.beta[..=l].to_vec(),
        }
    }

    /// Representative in which every `v_-(k)` is Hermitian positive definite.
    ///
    /// Left unitary factors `beta(k) -> U_k beta(k)` leave every `C_k`
    /// unchanged; this picks the factors that reconstruction from Taylor data
    /// produces.
    pub fn canonical_gauge(&self) -> Result<Self> {
        let mut out: Vec<CMat> = Vec::with_capacity(self.beta.len());
        let mut v_prev = CMat::zeros(0, 0);
        for (k, b) in self.beta.iter().enumerate() {
            let m = if k == 0 {
                b.columns(0, self.p).into_owned()
            } else {
                b * out[k - 1].adjoint() * &v_prev
            };
            let u = polar_unitary(&m)
                .map_err(|_| Error::InvalidBeta {
                    index: k,
                    condition: BetaCondition::Nondegeneracy,
                    value: 0.0,
                })?
                .adjoint();
            // only the direction of v_- matters here; rescaling avoids underflow
            v_prev = &u * m;
            let size = max_abs(&v_prev);
            v_prev.unscale_mut(size);
            out.push(u * b);
        }
        Ok(Self {
            p: self.p,
            beta: out,
        })
    }
}

/// `chi(k) = [I_p 0] U(k)^*`, the complementary rows to `beta(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiSequence {
    pub p: usize,
    pub chi: Vec<CMat>,
}

/// Split unitaries into `beta(k) = [0 I_p] U(k)^*` and `chi(k) = [I_p 0] U(k)^*`.
///
/// Only unitarity is checked; nondegeneracy is left to the consumer.
pub fn beta_from_unitary(p: usize, us: &[CMat]) -> Result<(BetaSequence, ChiSequence)> {
    let mut beta = Vec::with_capacity(us.len());
    let mut chi = Vec::with_capacity(us.len());
    for (k, u) in us.iter().enumerate() {
        if u.shape() != (2 * p, 2 * p) {
            return Err(Error::DimensionMismatch {
                context: "unitary U(k)",
                expected: format!("{0}x{0}", 2 * p),
                found: format!("{}x{}", u.nrows(), u.ncols()),
            });
        }
        let deviation = max_abs(&(u.adjoint() * u - identity(2 * p)));
        if deviation > COISOMETRY_TOL {
            return Err(Error::NotUnitary {
                index: k,
                deviation,
            });
        }
        let ua = u.adjoint();
        chi.push(ua.rows(0, p).into_owned());
        beta.push(ua.rows(p, p).into_owned());
    }
    Ok((
        BetaSequence::new_unchecked(p, beta)?,
        ChiSequence { p, chi },
    ))
}

/// Coefficients `C_0..C_n`, each a `2p x 2p` Hermitian involution with
/// exactly `p` eigenvalues `-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDiracSystem {
    p: usize,
    c: Vec<CMat>,
}

impl DiscreteDiracSystem {
    pub fn new(p: usize, c: Vec<CMat>) -> Result<Self> {
        if p == 0 || c.is_empty() {
            return Err(Error::InvalidInput(
                "system needs p >= 1 and at least one coefficient".into(),
            ));
        }
        let id = identity(2 * p);
        for (k, ck) in c.iter().enumerate() {
            if ck.shape() != (2 * p, 2 * p) {
                return Err(Error::DimensionMismatch {
                    context: "system coefficient",
                    expected: format!("{0}x{0}", 2 * p),
                    found: format!("{}x{}", ck.nrows(), ck.ncols()),
                });
            }
            linalg::ensure_finite(ck, "system coefficient")?;
            let herm = linalg::hermitian_deviation(ck);
            if herm > COISOMETRY_TOL {
                return Err(Error::InvalidSystem {
                    index: k,
                    reason: format!("not Hermitian (deviation {herm:e})"),
                });
            }
            let inv = max_abs(&(ck * ck - &id));
            if inv > COISOMETRY_TOL {
                return Err(Error::InvalidSystem {
                    index: k,
                    reason: format!("not an involution (deviation {inv:e})"),
                });
            }
            let eig = linalg::hermitian_eigenvalues(ck);
            let neg = eig.iter().filter(|&&e| (e + 1.0).abs() <= 1e-8).count();
            let pos = eig.iter().filter(|&&e| (e - 1.0).abs() <= 1e-8).count();
            if neg != p || pos != p {
                return Err(Error::InvalidSystem {
                    index: k,
                    reason: format!("expected {p} eigenvalues +1 and -1, found {pos} and {neg}"),
                });
            }
        }
        Ok(Self { p, c })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.c.len() - 1
    }

    pub fn coefficients(&self) -> &[CMat] {
        &self.c
    }

    pub fn truncated(&self, l: usize) -> Self {
        Self {
            p: self.p,
            c: self.c[..=l].to_vec(),
        }
    }

    /// Rows `beta(k)` with `beta(k)^* beta(k) = (I - C_k)/2`, in the canonical
    /// gauge of [`BetaSequence::canonical_gauge`].
    pub fn canonical_beta(&self) -> Result<BetaSequence> {
        let p = self.p;
        let id = identity(2 * p);
        let raw = self
            .c
            .iter()
            .map(|ck| {
                let proj = (&id - ck).scale(0.5);
                let (_, vecs) = hermitian_eigenvectors(&proj);
                vecs.columns(p, p).adjoint()
            })
            .collect();
        let seq = BetaSequence::new_unchecked(p, raw)?;
        seq.validate(NONDEGENERACY_THRESHOLD)?;
        seq.canonical_gauge()
    }
}

/// `C_k = I - 2 beta(k)^* beta(k)`
pub fn system_from_beta(b: &BetaSequence) -> Result<DiscreteDiracSystem> {
    b.validate(NONDEGENERACY_THRESHOLD)?;
    let id = identity(2 * b.p());
    let c = (0..b.len()).map(|k| &id - b.gram(k).scale(2.0)).collect();
    Ok(DiscreteDiracSystem { p: b.p(), c })
}

/// `W_{n+1}(lambda)` with `W_0 = I` and `W_{k+1} = (I - (i/lambda) C_k) W_k`.
pub fn fundamental_solution(sys: &DiscreteDiracSystem, lambda: Complex64) -> Result<CMat> {
    if lambda == Complex64::new(0.0, 0.0) {
        return Err(Error::LambdaZero);
    }
    let step = c(0.0, 1.0) / lambda;
    let id = identity(2 * sys.p);
    let w = sys.c.iter().fold(id.clone(), |w, ck| (&id - ck * step) * w);
    linalg::ensure_finite(&w, "fundamental_solution")?;
    Ok(w)
}

/// The four `p x p` blocks of a `2p x 2p` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks2 {
    pub w11: CMat,
    pub w12: CMat,
    pub w21: CMat,
    pub w22: CMat,
}

impl Blocks2 {
    pub fn split(m: &CMat, p: usize) -> Self {
        Self {
            w11: block(m, p, 0, 0),
            w12: block(m, p, 0, 1),
            w21: block(m, p, 1, 0),
            w22: block(m, p, 1, 1),
        }
    }

    pub fn join(&self) -> CMat {
        let top = hstack(&self.w11, &self.w12);
        let bottom = hstack(&self.w21, &self.w22);
        linalg::vstack(&[top, bottom])
    }
}

/// Blocks of `calW(lambda) = W_{n+1}(conj lambda)^*`.
pub fn calw_blocks(sys: &DiscreteDiracSystem, lambda: Complex64) -> Result<Blocks2> {
    let w = fundamental_solution(sys, lambda.conj())?;
    Ok(Blocks2::split(&w.adjoint(), sys.p))
}

/// Triple `(A, S, Pi)` with `A S - S A^* = i Pi Pi^*`. Truncations to the
/// leading `(r+1)p` rows are again S-nodes.
#[derive(Debug, Clone)]
pub struct SNode {
    p: usize,
    a: CMat,
    s: CMat,
    pi: CMat,
}

impl SNode {
    pub fn new(p: usize, a: CMat, s: CMat, pi: CMat) -> Result<Self> {
        let dim = a.nrows();
        if p == 0
            || !dim.is_multiple_of(p)
            || a.shape() != (dim, dim)
            || s.shape() != (dim, dim)
            || pi.shape() != (dim, 2 * p)
        {
            return Err(Error::DimensionMismatch {
                context: "S-node",
                expected: format!("A, S square of size (n+1)p and Pi (n+1)p x 2p with p = {p}"),
                found: format!("A {:?}, S {:?}, Pi {:?}", a.shape(), s.shape(), pi.shape()),
            });
        }
        Ok(Self { p, a, s, pi })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.a.nrows() / self.p - 1
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn s(&self) -> &CMat {
        &self.s
    }

    pub fn pi(&self) -> &CMat {
        &self.pi
    }

    pub fn a_trunc(&self, r: usize) -> CMat {
        let d = (r + 1) * self.p;
        self.a.view((0, 0), (d, d)).into_owned()
    }

    pub fn s_trunc(&self, r: usize) -> CMat {
        let d = (r + 1) * self.p;
        self.s.view((0, 0), (d, d)).into_owned()
    }

    pub fn pi_trunc(&self, r: usize) -> CMat {
        let d = (r + 1) * self.p;
        self.pi.rows(0, d).into_owned()
    }

    pub fn phi1(&self) -> CMat {
        self.pi.columns(0, self.p).into_owned()
    }

    pub fn phi2(&self) -> CMat {
        self.pi.columns(self.p, self.p).into_owned()
    }

    /// `max |A(r) S(r) - S(r) A(r)^* - i Pi(r) Pi(r)^*|`
    pub fn residual(&self, r: usize) -> f64 {
        let (a, s, pi) = (self.a_trunc(r), self.s_trunc(r), self.pi_trunc(r));
        max_abs(&(&a * &s - &s * a.adjoint() - &pi * pi.adjoint() * c(0.0, 1.0)))
    }

    /// [`Self::residual`] over `max(|A(r)| |S(r)|, |Pi(r)|^2)`.
    pub fn relative_residual(&self, r: usize) -> f64 {
        let scale = (max_abs(&self.a_trunc(r)) * max_abs(&self.s_trunc(r)))
            .max(max_abs(&self.pi_trunc(r)).powi(2))
            .max(f64::MIN_POSITIVE);
        self.residual(r) / scale
    }
}

/// The block lower-triangular `V_-(n)` whose inverse maps `B_1(n)` to a
/// column of identity blocks.
pub fn vminus(b: &BetaSequence) -> Result<CMat> {
    let p = b.p();
    let n = b.n();
    let dim = (n + 1) * p;
    let mut v = CMat::zeros(dim, dim);
    let mut v_diag = b.block1(0);
    check_breakdown(&v_diag, 0)?;
    v.view_mut((0, 0), (p, p)).copy_from(&v_diag);
    for k in 1..=n {
        v_diag = b.get(k) * b.get(k - 1).adjoint() * &v_diag;
        check_breakdown(&v_diag, k)?;
        // tilde X(k), p x (k-1)p
        let mut x_tail = CMat::zeros(p, (k - 1) * p);
        if k >= 2 {
            let lead = (k - 1) * p;
            let b_adj = linalg::vstack(&b.rows()[..k]).adjoint();
            let y_left = b.get(k) * b_adj * v.view((0, 0), (k * p, lead));
            let mut y = y_left;
            for j in 0..(k - 1) {
                let mut blk = y.columns_mut(j * p, p);
                blk -= &v_diag;
            }
            // (A(k-2) + (i/2) I)^{-1} = -i L^{-1} with L the block all-ones
            // lower-triangular matrix, so i Y (A(k-2) + (i/2) I)^{-1} = Y L^{-1}.
            for j in 0..(k - 1) {
                let mut col = y.columns(j * p, p).into_owned();
                if j + 1 < k - 1 {
                    col -= y.columns((j + 1) * p, p);
                }
                x_tail.columns_mut(j * p, p).copy_from(&col);
            }
        }
        let mut tail_sum = CMat::zeros(p, p);
        for j in 0..(k - 1) {
            tail_sum += x_tail.columns(j * p, p);
        }
        let x0 = b.block1(k) - &v_diag - tail_sum;
        let row = k * p;
        v.view_mut((row, 0), (p, p)).copy_from(&x0);
        if k >= 2 {
            v.view_mut((row, p), (p, (k - 1) * p)).copy_from(&x_tail);
        }
        v.view_mut((row, row), (p, p)).copy_from(&v_diag);
    }
    Ok(v)
}

fn check_breakdown(v_diag: &CMat, stage: usize) -> Result<()> {
    let cond = condition_number(v_diag);
    if cond > BREAKDOWN_CONDITION {
        return Err(Error::NumericBreakdown {
            stage,
            condition: cond,
        });
    }
    Ok(())
}

/// Inverse of a block lower-triangular matrix by block forward substitution.
fn block_lower_inverse(v: &CMat, p: usize) -> Result<CMat> {
    let nb = v.nrows() / p;
    let mut inv = CMat::zeros(v.nrows(), v.ncols());
    let diag_inv: Vec<CMat> = (0..nb)
        .map(|k| linalg::inverse(&block(v, p, k, k)))
        .collect::<Result<_>>()?;
    for col in 0..nb {
        linalg::set_block(&mut inv, p, col, col, &diag_inv[col]);
        for row in (col + 1)..nb {
            let mut acc = CMat::zeros(p, p);
            for m in col..row {
                acc += block(v, p, row, m) * block(&inv, p, m, col);
            }
            linalg::set_block(&mut inv, p, row, col, &(-(&diag_inv[row]) * acc));
        }
    }
    Ok(inv)
}

/// S-node of a system: `S = V_-^{-1} V_-^{-*}`, `Pi = V_-^{-1} B`.
pub fn snode_from_system(b: &BetaSequence) -> Result<SNode> {
    b.validate(NONDEGENERACY_THRESHOLD)?;
    let p = b.p();
    let v = vminus(b)?;
    let v_inv = block_lower_inverse(&v, p)?;
    let pi = &v_inv * b.stacked(b.n());
    let s = linalg::hermitian_part(&(&v_inv * v_inv.adjoint()));
    linalg::ensure_finite(&s, "snode_from_system")?;
    SNode::new(p, structured_operator(b.n(), p), s, pi)
}

/// `K(r)`, assembled row block by row block:
/// `K_j(r) = i beta(j) [beta(0)^* ... beta(j-1)^*  beta(j)^*/2  0 ... 0]`.
pub fn k_operator(b: &BetaSequence, r: usize) -> CMat {
    let p = b.p();
    let dim = (r + 1) * p;
    let mut k = CMat::zeros(dim, dim);
    let ci = c(0.0, 1.0);
    for j in 0..=r {
        for m in 0..=j {
            let mut blk = b.get(j) * b.get(m).adjoint() * ci;
            if m == j {
                blk.scale_mut(0.5);
            }
            linalg::set_block(&mut k, p, j, m, &blk);
        }
    }
    k
}

fn near_resolvent_pole(lambda: Complex64) -> bool {
    (lambda - c(0.0, 0.5)).norm() <= 1e-14
}

/// `w_A(r, lambda) = I - i Pi(r)^* S(r)^{-1} (A(r) - lambda I)^{-1} Pi(r)`.
pub fn transfer_matrix(node: &SNode, r: usize, lambda: Complex64) -> Result<CMat> {
    if near_resolvent_pole(lambda) {
        return Err(Error::ResolventSingular);
    }
    let p = node.p();
    let a = node.a_trunc(r);
    let s = node.s_trunc(r);
    let pi = node.pi_trunc(r);
    let dim = a.nrows();
    let shifted = a - identity(dim) * lambda;
    let res_pi = shifted
        .solve_lower_triangular(&pi)
        .ok_or(Error::ResolventSingular)?;
    let chol = s.cholesky().ok_or(Error::NotPositive {
        index: 0,
        pivot: f64::NAN,
    })?;
    let w = identity(2 * p) - pi.adjoint() * chol.solve(&res_pi) * c(0.0, 1.0);
    linalg::ensure_finite(&w, "transfer_matrix")?;
    Ok(w)
}

/// `w_A(r, lambda)` through `K(r) = V_-(r) A(r) V_-(r)^{-1}`:
/// `I - i B(r)^* (K(r) - lambda I)^{-1} B(r)`. Needs no inverse of `S`.
pub fn transfer_matrix_k(b: &BetaSequence, r: usize, lambda: Complex64) -> Result<CMat> {
    if near_resolvent_pole(lambda) {
        return Err(Error::ResolventSingular);
    }
    let k = k_operator(b, r);
    let bb = b.stacked(r);
    let shifted = &k - identity(k.nrows()) * lambda;
    let res = shifted
        .solve_lower_triangular(&bb)
        .ok_or(Error::ResolventSingular)?;
    let w = identity(2 * b.p()) - bb.adjoint() * res * c(0.0, 1.0);
    linalg::ensure_finite(&w, "transfer_matrix_k")?;
    Ok(w)
}

/// `I - (2i/(i - lambda)) beta(r)^* beta(r)`, one factor of `w_A(n, lambda/2)`.
pub fn elementary_factor(b: &BetaSequence, r: usize, lambda: Complex64) -> CMat {
    let coef = c(0.0, 2.0) / (c(0.0, 1.0) - lambda);
    identity(2 * b.p()) - b.gram(r) * coef
}

/// Maximum residuals of the structural identities of a system at sample points.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdentityReport {
    /// `W(l) W(conj l)^* = ((l-i)/l)^{n+1} ((l+i)/l)^{n+1} I`, relative to
    /// `max(1, |W(l)| |W(conj l)|, |scalar|)`
    pub determinant_identity: f64,
    /// `W_{n+1}(l) = ((l-i)/l)^{n+1} w_A(n, l/2)`, relative to `max(1, |W_{n+1}(l)|)`
    pub transfer_representation: f64,
    /// `w_A(r, l/2) = (I - (2i/(i-l)) beta(r)^* beta(r)) w_A(r-1, l/2)`
    pub factorization: f64,
    /// `w_A(r, mu)^* w_A(r, l) = I + i (conj mu - l) Pi^* (A^* - conj mu)^{-1} S^{-1} (A - l)^{-1} Pi`
    pub pair_identity: f64,
    /// `K(r) - K(r)^* = i B(r) B(r)^*`
    pub k_identity: f64,
    /// `A(r) S(r) - S(r) A(r)^* = i Pi(r) Pi(r)^*`, relative
    pub snode_identity: f64,
    pub points_used: usize,
}

impl IdentityReport {
    pub fn max(&self) -> f64 {
        [
            self.determinant_identity,
            self.transfer_representation,
            self.factorization,
            self.pair_identity,
            self.k_identity,
            self.snode_identity,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn pair_identity_residual(
    b: &BetaSequence,
    r: usize,
    lambda: Complex64,
    mu: Complex64,
) -> Result<f64> {
    let lhs = transfer_matrix_k(b, r, mu)?.adjoint() * transfer_matrix_k(b, r, lambda)?;
    let k = k_operator(b, r);
    let bb = b.stacked(r);
    let id = identity(k.nrows());
    // Pi^* (A^* - conj mu)^{-1} S^{-1} (A - lambda)^{-1} Pi = B^* (K^* - conj mu)^{-1} (K - lambda)^{-1} B
    let right = (&k - &id * lambda)
        .solve_lower_triangular(&bb)
        .ok_or(Error::ResolventSingular)?;
    let left = (&k - &id * mu)
        .solve_lower_triangular(&bb)
        .ok_or(Error::ResolventSingular)?
        .adjoint();
    let rhs = identity(2 * b.p()) + left * right * (c(0.0, 1.0) * (mu.conj() - lambda));
    Ok(max_abs(&(lhs - rhs)))
}

/// Evaluate all structural identities at the given points. Points where an
/// identity is undefined (`lambda = 0`, `lambda = i`) are skipped for it.
/// Transfer matrices are taken in the `K` form; the S-node identity is
/// reported relative to the size of its terms.
pub fn verify_system_identities(
    sys: &DiscreteDiracSystem,
    lambdas: &[Complex64],
) -> IdentityReport {
    let mut report = IdentityReport::default();
    let p = sys.p();
    let n = sys.n();
    let nodes = sys
        .canonical_beta()
        .and_then(|b| snode_from_system(&b).map(|node| (b, node)));
    let (beta, node) = match nodes {
        Ok(pair) => pair,
        Err(_) => {
            report.transfer_representation = f64::INFINITY;
            report.factorization = f64::INFINITY;
            report.pair_identity = f64::INFINITY;
            report.k_identity = f64::INFINITY;
            report.snode_identity = f64::INFINITY;
            return report;
        }
    };
    let ci = c(0.0, 1.0);
    for r in 0..=n {
        report.snode_identity = report.snode_identity.max(node.relative_residual(r));
        let k = k_operator(&beta, r);
        let bb = beta.stacked(r);
        report.k_identity = report
            .k_identity
            .max(max_abs(&(&k - k.adjoint() - &bb * bb.adjoint() * ci)));
    }
    let id = identity(2 * p);
    let power = (n + 1) as i32;
    for (idx, &lambda) in lambdas.iter().enumerate() {
        if lambda.norm() == 0.0 {
            continue;
        }
        report.points_used += 1;
        let record = |slot: &mut f64, value: Result<f64>| {
            *slot = slot.max(value.unwrap_or(f64::INFINITY));
        };
        record(
            &mut report.determinant_identity,
            (|| {
                let w = fundamental_solution(sys, lambda)?;
                let wc = fundamental_solution(sys, lambda.conj())?;
                let scalar =
                    ((lambda - ci) / lambda).powi(power) * ((lambda + ci) / lambda).powi(power);
                let scale = (op_norm(&w) * op_norm(&wc)).max(scalar.norm()).max(1.0);
                Ok(max_abs(&(&w * wc.adjoint() - &id * scalar)) / scale)
            })(),
        );
        if (lambda - ci).norm() < 1e-12 {
            continue;
        }
        let half = lambda / 2.0;
        record(
            &mut report.transfer_representation,
            (|| {
                let w = fundamental_solution(sys, lambda)?;
                let scalar = ((lambda - ci) / lambda).powi(power);
                let wa = transfer_matrix_k(&beta, n, half)?;
                let scale = op_norm(&w).max(1.0);
                Ok(max_abs(&(w - wa * scalar)) / scale)
            })(),
        );
        record(
            &mut report.factorization,
            (|| {
                let mut worst: f64 = 0.0;
                let mut prev = transfer_matrix_k(&beta, 0, half)?;
                worst = worst.max(max_abs(&(&prev - elementary_factor(&beta, 0, lambda))));
                for r in 1..=n {
                    let cur = transfer_matrix_k(&beta, r, half)?;
                    let predicted = elementary_factor(&beta, r, lambda) * &prev;
                    worst = worst.max(max_abs(&(&cur - predicted)));
                    prev = cur;
                }
                Ok(worst)
            })(),
        );
        let mu = lambdas[(idx + 1) % lambdas.len()] / 2.0;
        if !near_resolvent_pole(mu) && mu.norm() > 0.0 {
            record(
                &mut report.pair_identity,
                (|| {
                    let mut worst: f64 = 0.0;
                    for r in 0..=n {
                        worst = worst.max(pair_identity_residual(&beta, r, half, mu)?);
                    }
                    Ok(worst)
                })(),
            );
        }
    }
    report
}
