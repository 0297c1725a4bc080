//! Continuous system `u' = (i lambda j + j V(x)) u` on `[0, l]` with
//! `V = [[0, v], [v^*, 0]]`.
//!
//! Forward: RK4 for the fundamental solution and the Weyl function of the
//! pair `R = 0, Q = I_p`. Inverse: `s` from a damped Fourier integral of
//! Weyl-function samples, the Nystrom discretization of `S`, then `chi`,
//! `beta^* beta` and, for `p = 1`, the potential. All quadratures are
//! composite trapezoid on the equispaced grid.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{
    c, identity, inverse, max_abs, op_norm, posdef_factor, re, singular_range, CMat,
};
use crate::linalg::{DEFAULT_POSITIVITY_TOL, SINGULAR_RTOL};

/// RK4 substeps are added until `h (|lambda| + M)` is at most this.
pub const SUBSTEP_TARGET: f64 = 0.05;
pub const MAX_SUBSTEPS: usize = 4096;
/// Slack on the declared bound `|v(x)| <= M`.
pub const BOUND_SLACK: f64 = 1e-12;
/// Default L2 budget for the Fourier truncation tail of `s`.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 5e-2;

/// Equispaced nodes `x_k = k l / n`, `k = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub l: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(l: f64, n: usize) -> Result<Self> {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidInput(format!(
                "interval length must be positive, got {l}"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 2 intervals, got {n}"
            )));
        }
        Ok(Self { l, n })
    }

    pub fn h(&self) -> f64 {
        self.l / self.n as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        self.l * k as f64 / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|k| self.x(k)).collect()
    }

    /// Trapezoid weight of node `k` for the integral over `[0, x_upto]`.
    pub fn weight(&self, k: usize, upto: usize) -> f64 {
        if upto == 0 || k > upto {
            0.0
        } else if k == 0 || k == upto {
            0.5 * self.h()
        } else {
            self.h()
        }
    }

    /// Centered differences inside, second-order one-sided at the ends.
    pub fn derivative(&self, f: &[CMat]) -> Vec<CMat> {
        let h = self.h();
        let n = self.n;
        (0..=n)
            .map(|k| {
                if k == 0 {
                    (&f[1] * re(4.0) - &f[0] * re(3.0) - &f[2]).unscale(2.0 * h)
                } else if k == n {
                    (&f[n] * re(3.0) - &f[n - 1] * re(4.0) + &f[n - 2]).unscale(2.0 * h)
                } else {
                    (&f[k + 1] - &f[k - 1]).unscale(2.0 * h)
                }
            })
            .collect()
    }

    /// Trapezoid integral over `[0, l]` of a scalar sampled at the nodes.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter()
            .enumerate()
            .map(|(k, v)| self.weight(k, self.n) * v)
            .sum()
    }
}

/// `p x p` potential `v` sampled on a grid, with declared bound `M`.
#[derive(Debug, Clone)]
pub struct PotentialGrid {
    p: usize,
    grid: Grid,
    v: Vec<CMat>,
    m: f64,
}

impl PotentialGrid {
    pub fn new(p: usize, grid: Grid, v: Vec<CMat>, m: f64) -> Result<Self> {
        if v.len() != grid.n + 1 {
            return Err(Error::DimensionMismatch {
                context: "potential grid",
                expected: format!("{} nodes", grid.n + 1),
                found: format!("{} nodes", v.len()),
            });
        }
        for vk in &v {
            if vk.shape() != (p, p) {
                return Err(Error::DimensionMismatch {
                    context: "potential value",
                    expected: format!("{p}x{p}"),
                    found: format!("{}x{}", vk.nrows(), vk.ncols()),
                });
            }
            crate::linalg::ensure_finite(vk, "potential")?;
        }
        if !(m.is_finite() && m >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "bound M must be finite and nonnegative, got {m}"
            )));
        }
        let pot = Self { p, grid, v, m };
        let max = pot.max_norm();
        if max > m + BOUND_SLACK {
            return Err(Error::InvalidInput(format!(
                "max |v(x)| = {max} exceeds declared bound M = {m}"
            )));
        }
        Ok(pot)
    }

    /// Samples `f` at the nodes and declares `M` as the largest node norm.
    pub fn from_fn(p: usize, grid: Grid, f: impl Fn(f64) -> CMat) -> Result<Self> {
        let v: Vec<CMat> = grid.nodes().into_iter().map(f).collect();
        let m = v.iter().map(op_norm).fold(0.0, f64::max);
        Self::new(p, grid, v, m)
    }

    pub fn constant(grid: Grid, v: CMat) -> Result<Self> {
        let p = v.nrows();
        Self::from_fn(p, grid, |_| v.clone())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[CMat] {
        &self.v
    }

    pub fn bound(&self) -> f64 {
        self.m
    }

    pub fn max_norm(&self) -> f64 {
        self.v.iter().map(op_norm).fold(0.0, f64::max)
    }

    /// Linear interpolation between nodes.
    pub fn at(&self, x: f64) -> CMat {
        let t = (x / self.grid.h()).clamp(0.0, self.grid.n as f64);
        let k = (t.floor() as usize).min(self.grid.n - 1);
        let frac = t - k as f64;
        &self.v[k] * re(1.0 - frac) + &self.v[k + 1] * re(frac)
    }
}

/// Relative L2 distance `|a - b| / |b|` of two potentials on the same grid.
pub fn relative_l2_error(a: &PotentialGrid, b: &PotentialGrid) -> f64 {
    let g = b.grid;
    let diff: Vec<f64> =
        a.v.iter()
            .zip(&b.v)
            .map(|(x, y)| (x - y).norm_squared())
            .collect();
    let base: Vec<f64> = b.v.iter().map(|y| y.norm_squared()).collect();
    let den = g.integrate(&base);
    let num = g.integrate(&diff);
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// `i lambda j + j V` written into `out`.
fn write_generator(out: &mut CMat, p: usize, lambda: Complex64, v: &CMat) {
    out.fill(c(0.0, 0.0));
    let il = c(0.0, 1.0) * lambda;
    for k in 0..p {
        out[(k, k)] = il;
        out[(p + k, p + k)] = -il;
    }
    for r in 0..p {
        for col in 0..p {
            out[(r, p + col)] = v[(r, col)];
            out[(p + r, col)] = -v[(col, r)].conj();
        }
    }
}

fn add_scaled(dst: &mut CMat, alpha: Complex64, src: &CMat) {
    dst.zip_apply(src, |d, s| *d += alpha * s);
}

/// RK4 substeps per grid interval for spectral parameter `lambda`.
pub fn substeps(pot: &PotentialGrid, lambda: Complex64) -> Result<usize> {
    let product = pot.grid.h() * (lambda.norm() + pot.m);
    let count = (product / SUBSTEP_TARGET).ceil().max(1.0);
    if !count.is_finite() || count as usize > MAX_SUBSTEPS {
        return Err(Error::StepSizeTooCoarse {
            product,
            max_substeps: MAX_SUBSTEPS,
        });
    }
    Ok(count as usize)
}

/// `u(l, lambda)` with `u(0, lambda) = I_{2p}`.
pub fn integrate_fundamental(pot: &PotentialGrid, lambda: Complex64) -> Result<CMat> {
    let p = pot.p;
    let m = 2 * p;
    let grid = pot.grid;
    let subs = substeps(pot, lambda)?;
    let dt = grid.h() / subs as f64;
    let mut u = identity(m);
    let mut a = CMat::zeros(m, m);
    let mut k1 = CMat::zeros(m, m);
    let mut k2 = CMat::zeros(m, m);
    let mut k3 = CMat::zeros(m, m);
    let mut k4 = CMat::zeros(m, m);
    let mut tmp = CMat::zeros(m, m);
    let one = re(1.0);
    let zero = re(0.0);
    let half = re(0.5 * dt);
    let full = re(dt);
    for cell in 0..grid.n {
        let (v0, v1) = (&pot.v[cell], &pot.v[cell + 1]);
        let v_at = |frac: f64| v0 * re(1.0 - frac) + v1 * re(frac);
        for sub in 0..subs {
            let f0 = sub as f64 / subs as f64;
            let fm = (sub as f64 + 0.5) / subs as f64;
            let f1 = (sub as f64 + 1.0) / subs as f64;

            write_generator(&mut a, p, lambda, &v_at(f0));
            k1.gemm(one, &a, &u, zero);

            write_generator(&mut a, p, lambda, &v_at(fm));
            tmp.copy_from(&u);
            add_scaled(&mut tmp, half, &k1);
            k2.gemm(one, &a, &tmp, zero);
            tmp.copy_from(&u);
            add_scaled(&mut tmp, half, &k2);
            k3.gemm(one, &a, &tmp, zero);

            write_generator(&mut a, p, lambda, &v_at(f1));
            tmp.copy_from(&u);
            add_scaled(&mut tmp, full, &k3);
            k4.gemm(one, &a, &tmp, zero);

            let sixth = re(dt / 6.0);
            add_scaled(&mut u, sixth, &k1);
            add_scaled(&mut u, sixth * re(2.0), &k2);
            add_scaled(&mut u, sixth * re(2.0), &k3);
            add_scaled(&mut u, sixth, &k4);
        }
    }
    crate::linalg::ensure_finite(&u, "fundamental solution")?;
    Ok(u)
}

/// `phi = W_12 W_22^{-1}` with `W(lambda) = u(l, conj lambda)^*`, the Weyl
/// function of the pair `R = 0, Q = I_p`. Requires `Im lambda < -M`.
pub fn weyl_continuous(pot: &PotentialGrid, lambda: Complex64) -> Result<CMat> {
    if !(lambda.im < -pot.m) {
        return Err(Error::HalfPlaneViolation {
            im: lambda.im,
            neg_bound: -pot.m,
        });
    }
    let p = pot.p;
    let w = integrate_fundamental(pot, lambda.conj())?.adjoint();
    let w12 = w.view((0, p), (p, p)).into_owned();
    let w22 = w.view((p, p), (p, p)).into_owned();
    let (lo, hi) = singular_range(&w22);
    if !(lo > SINGULAR_RTOL * hi) {
        return Err(Error::SingularDenominator {
            sigma_ratio: if hi > 0.0 { lo / hi } else { 0.0 },
        });
    }
    Ok(w12 * inverse(&w22)?)
}

/// Parameters of the damped Fourier integral that recovers `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierParams {
    /// Damping `eta > 2M`.
    pub eta: f64,
    /// Truncation `Xi` of the frequency integral.
    pub xi_max: f64,
    /// Frequency step.
    pub d_xi: f64,
    /// Budget for the L2 tail estimate of `s`.
    pub tail_tolerance: f64,
}

impl FourierParams {
    /// `eta = 2M + eta_offset`; the step keeps the aliasing period at least
    /// `max(16 l, 40 / eta_offset)`.
    pub fn new(m: f64, l: f64, eta_offset: f64, xi_max: f64) -> Self {
        let period = (16.0 * l).max(40.0 / eta_offset);
        Self {
            eta: 2.0 * m + eta_offset,
            xi_max,
            d_xi: 2.0 * std::f64::consts::PI / period,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        }
    }

    /// Symmetric frequency nodes ending exactly at `+-Xi`.
    pub fn nodes(&self) -> Vec<f64> {
        let half = (self.xi_max / self.d_xi).ceil().max(1.0) as i64;
        (-half..=half)
            .map(|k| self.xi_max * k as f64 / half as f64)
            .collect()
    }

    fn validate(&self, m: f64) -> Result<()> {
        if !(self.xi_max > 0.0 && self.d_xi > 0.0 && self.tail_tolerance > 0.0) {
            return Err(Error::InvalidInput(
                "Fourier parameters must be positive".into(),
            ));
        }
        if !(self.eta > 2.0 * m) {
            return Err(Error::HalfPlaneViolation {
                im: -0.5 * self.eta,
                neg_bound: -m,
            });
        }
        Ok(())
    }
}

/// Values `phi(lambda / 2)` at `lambda = xi - i eta`.
#[derive(Debug, Clone)]
pub struct PhiSamples {
    pub p: usize,
    pub eta: f64,
    pub xi: Vec<f64>,
    pub values: Vec<CMat>,
}

impl PhiSamples {
    pub fn new(p: usize, eta: f64, xi: Vec<f64>, values: Vec<CMat>) -> Result<Self> {
        if xi.len() != values.len() || xi.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need matching frequency and value lists of length >= 2, got {} and {}",
                xi.len(),
                values.len()
            )));
        }
        if xi.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "frequencies must be strictly increasing".into(),
            ));
        }
        for v in &values {
            if v.shape() != (p, p) {
                return Err(Error::DimensionMismatch {
                    context: "phi sample",
                    expected: format!("{p}x{p}"),
                    found: format!("{}x{}", v.nrows(), v.ncols()),
                });
            }
        }
        Ok(Self { p, eta, xi, values })
    }
}

/// Evaluates `phi(lambda / 2)` on the frequency nodes of `params`.
pub fn sample_phi<F>(p: usize, m: f64, params: &FourierParams, phi: F) -> Result<PhiSamples>
where
    F: Fn(Complex64) -> Result<CMat> + Sync,
{
    params.validate(m)?;
    let xi = params.nodes();
    let values = xi
        .par_iter()
        .map(|&x| phi(c(x, -params.eta) * 0.5))
        .collect::<Result<Vec<_>>>()?;
    PhiSamples::new(p, params.eta, xi, values)
}

/// Samples the forward Weyl function of `pot`.
pub fn sample_weyl(pot: &PotentialGrid, params: &FourierParams) -> Result<PhiSamples> {
    sample_phi(pot.p, pot.m, params, |lambda| weyl_continuous(pot, lambda))
}

/// `s` and its derivative on a grid, with `s(0) = 0`.
#[derive(Debug, Clone)]
pub struct SKernelGrid {
    pub p: usize,
    pub grid: Grid,
    pub s: Vec<CMat>,
    pub s_prime: Vec<CMat>,
    /// L2 tail estimate of the Fourier truncation, zero when not from samples.
    pub tail_estimate: f64,
}

impl SKernelGrid {
    /// Pins `s(0) = 0` and differentiates numerically.
    pub fn from_values(p: usize, grid: Grid, mut s: Vec<CMat>) -> Result<Self> {
        if s.len() != grid.n + 1 || s.iter().any(|m| m.shape() != (p, p)) {
            return Err(Error::DimensionMismatch {
                context: "kernel grid",
                expected: format!("{} nodes of {p}x{p}", grid.n + 1),
                found: format!("{} nodes", s.len()),
            });
        }
        s[0] = CMat::zeros(p, p);
        let s_prime = grid.derivative(&s);
        Ok(Self {
            p,
            grid,
            s,
            s_prime,
            tail_estimate: 0.0,
        })
    }

    pub fn from_fn(p: usize, grid: Grid, f: impl Fn(f64) -> CMat) -> Result<Self> {
        Self::from_values(p, grid, grid.nodes().into_iter().map(f).collect())
    }
}

/// `e^{-eta x} s(x) = (i / 2 pi) int e^{i xi x} lambda^{-1} phi(lambda / 2) d xi`
/// by the trapezoid rule over the sampled frequencies.
pub fn recover_s_from_samples(
    samples: &PhiSamples,
    grid: Grid,
    tail_tolerance: f64,
) -> Result<SKernelGrid> {
    let p = samples.p;
    let eta = samples.eta;
    let xi = &samples.xi;
    let count = xi.len();
    let f: Vec<CMat> = xi
        .iter()
        .zip(&samples.values)
        .map(|(&x, v)| v / c(x, -eta))
        .collect();

    let xi_max = xi[0].abs().max(xi[count - 1].abs());
    let edge = f[0].norm_squared() + f[count - 1].norm_squared();
    let tail = (grid.l * eta).exp() * (edge * xi_max / (2.0 * std::f64::consts::PI)).sqrt();
    if !(tail <= tail_tolerance) {
        return Err(Error::TruncationBudgetExceeded {
            estimate: tail,
            budget: tail_tolerance,
        });
    }

    let weights: Vec<f64> = (0..count)
        .map(|k| {
            let left = if k > 0 { xi[k] - xi[k - 1] } else { 0.0 };
            let right = if k + 1 < count {
                xi[k + 1] - xi[k]
            } else {
                0.0
            };
            0.5 * (left + right)
        })
        .collect();
    let prefactor = c(0.0, 1.0 / (2.0 * std::f64::consts::PI));
    let s: Vec<CMat> = (0..=grid.n)
        .into_par_iter()
        .map(|i| {
            let x = grid.x(i);
            let mut acc = CMat::zeros(p, p);
            for k in 0..count {
                let phase = Complex64::from_polar(weights[k], xi[k] * x);
                acc += &f[k] * phase;
            }
            acc * (prefactor * (eta * x).exp())
        })
        .collect();
    let mut kernel = SKernelGrid::from_values(p, grid, s)?;
    kernel.tail_estimate = tail;
    Ok(kernel)
}

/// Samples `phi` and recovers `s`.
pub fn recover_s<F>(
    phi: F,
    p: usize,
    m: f64,
    grid: Grid,
    params: &FourierParams,
) -> Result<SKernelGrid>
where
    F: Fn(Complex64) -> Result<CMat> + Sync,
{
    let samples = sample_phi(p, m, params, phi)?;
    recover_s_from_samples(&samples, grid, params.tail_tolerance)
}

/// `G(i, j) = int_{max(0, x_i - x_j)}^{x_i} s'(a) s'(a + x_j - x_i)^* da`, the
/// half kernel of `S - I`, by the trapezoid rule on grid nodes.
fn kernel_blocks(sk: &SKernelGrid) -> CMat {
    let p = sk.p;
    let n = sk.grid.n;
    let h = sk.grid.h();
    let d = &sk.s_prime;
    let dim = (n + 1) * p;
    let mut running = CMat::zeros(dim, dim);
    let mut out = CMat::zeros(dim, dim);
    for i in 0..=n {
        for j in 0..=n {
            let term = &d[i] * d[j].adjoint();
            let sum = if i > 0 && j > 0 {
                running.view((p * (i - 1), p * (j - 1)), (p, p)) + &term
            } else {
                term.clone()
            };
            running.view_mut((p * i, p * j), (p, p)).copy_from(&sum);
            if i.min(j) == 0 {
                continue;
            }
            let first = if i >= j {
                &d[i - j] * d[0].adjoint()
            } else {
                &d[0] * d[j - i].adjoint()
            };
            let g = (sum - (first + term) * re(0.5)) * re(h);
            out.view_mut((p * i, p * j), (p, p)).copy_from(&g);
        }
    }
    out
}

/// Nystrom matrix of `S = I + (half kernel)` in symmetric form
/// `I + W^{1/2} G W^{1/2}` with trapezoid weights `W` on `[0, l]`. Hermitian
/// by construction; positive definiteness is checked.
pub fn build_s_operator(sk: &SKernelGrid) -> Result<CMat> {
    let p = sk.p;
    let n = sk.grid.n;
    let g = kernel_blocks(sk);
    let roots: Vec<f64> = (0..=n).map(|k| sk.grid.weight(k, n).sqrt()).collect();
    let dim = (n + 1) * p;
    let s = CMat::from_fn(dim, dim, |r, col| {
        let delta = if r == col { 1.0 } else { 0.0 };
        re(delta) + g[(r, col)] * (roots[r / p] * roots[col / p])
    });
    posdef_factor(&s, DEFAULT_POSITIVITY_TOL)?;
    Ok(s)
}

/// Per-prefix quadratic forms: `int_0^x (S(x)^{-1} s')^* [I s] dt` (`p x 2p`)
/// and `int_0^x [I s]^* S(x)^{-1} [I s] dt` (`2p x 2p`) for every node `x`.
/// `S(x)` is the Nystrom matrix on `[0, x]` with its own trapezoid weights,
/// obtained by bordering the Cholesky factor of the full matrix.
fn prefix_forms(sk: &SKernelGrid, s_matrix: &CMat) -> Result<(Vec<CMat>, Vec<CMat>)> {
    let p = sk.p;
    let grid = sk.grid;
    let n = grid.n;
    let dim = (n + 1) * p;
    if s_matrix.shape() != (dim, dim) {
        return Err(Error::DimensionMismatch {
            context: "S operator",
            expected: format!("{dim}x{dim}"),
            found: format!("{}x{}", s_matrix.nrows(), s_matrix.ncols()),
        });
    }
    let l = posdef_factor(s_matrix, DEFAULT_POSITIVITY_TOL)?;
    let frame = |k: usize| {
        let mut m = CMat::zeros(p, 2 * p);
        m.view_mut((0, 0), (p, p)).copy_from(&identity(p));
        m.view_mut((0, p), (p, p)).copy_from(&sk.s[k]);
        m
    };
    let mut e = CMat::zeros(dim, p);
    let mut f = CMat::zeros(dim, 2 * p);
    for k in 0..=n {
        let w = grid.weight(k, n).sqrt();
        e.view_mut((k * p, 0), (p, p))
            .copy_from(&(&sk.s_prime[k] * re(w)));
        f.view_mut((k * p, 0), (p, 2 * p))
            .copy_from(&(frame(k) * re(w)));
    }
    let not_positive = || Error::NotPositive {
        index: 0,
        pivot: 0.0,
    };
    let u = l.solve_lower_triangular(&e).ok_or_else(not_positive)?;
    let q = l.solve_lower_triangular(&f).ok_or_else(not_positive)?;

    let mut cross = vec![CMat::zeros(p, 2 * p); n + 1];
    let mut gram = vec![CMat::zeros(2 * p, 2 * p); n + 1];
    for i in 1..=n {
        let k = i - 1;
        let uk = u.view((k * p, 0), (p, p));
        let qk = q.view((k * p, 0), (p, 2 * p));
        cross[i] = &cross[k] + uk.adjoint() * qk;
        gram[i] = &gram[k] + qk.adjoint() * qk;
    }

    let edge = (0.5 * grid.h()).sqrt();
    let tails: Vec<(CMat, CMat)> = (1..=n)
        .into_par_iter()
        .map(|i| {
            let lead = i * p;
            let ratio = edge / grid.weight(i, n).sqrt();
            let b = s_matrix.view((0, lead), (lead, p)) * re(ratio);
            let corner = identity(p)
                + (s_matrix.view((lead, lead), (p, p)) - identity(p)) * re(ratio * ratio);
            let lb = l
                .view((0, 0), (lead, lead))
                .solve_lower_triangular(&b)
                .ok_or_else(not_positive)?;
            let schur = corner - lb.adjoint() * &lb;
            let d = posdef_factor(&schur, DEFAULT_POSITIVITY_TOL).map_err(|err| match err {
                Error::NotPositive { index, pivot } => Error::NotPositive {
                    index: lead + index,
                    pivot,
                },
                other => other,
            })?;
            let u_last = &sk.s_prime[i] * re(edge) - lb.adjoint() * u.view((0, 0), (lead, p));
            let q_last = frame(i) * re(edge) - lb.adjoint() * q.view((0, 0), (lead, 2 * p));
            let u_last = d.solve_lower_triangular(&u_last).ok_or_else(not_positive)?;
            let q_last = d.solve_lower_triangular(&q_last).ok_or_else(not_positive)?;
            Ok((u_last.adjoint() * &q_last, q_last.adjoint() * q_last))
        })
        .collect::<Result<Vec<_>>>()?;
    for (i, (c_tail, g_tail)) in (1..=n).zip(tails) {
        cross[i] += c_tail;
        gram[i] += g_tail;
    }
    Ok((cross, gram))
}

/// `p x 2p` rows `chi(x)` on a grid.
#[derive(Debug, Clone)]
pub struct ChiGrid {
    pub p: usize,
    pub grid: Grid,
    pub chi: Vec<CMat>,
}

impl ChiGrid {
    /// `max_x |chi chi^* - I_p|`.
    pub fn coisometry_deviation(&self) -> f64 {
        self.chi
            .iter()
            .map(|x| max_abs(&(x * x.adjoint() - identity(self.p))))
            .fold(0.0, f64::max)
    }
}

/// `chi(x) = [0 I_p] - int_0^x (S(x)^{-1} s'(t))^* [I_p s(t)] dt`.
pub fn recover_chi(sk: &SKernelGrid, s_matrix: &CMat) -> Result<ChiGrid> {
    let p = sk.p;
    let (cross, _) = prefix_forms(sk, s_matrix)?;
    let mut base = CMat::zeros(p, 2 * p);
    base.view_mut((0, p), (p, p)).copy_from(&identity(p));
    Ok(ChiGrid {
        p,
        grid: sk.grid,
        chi: cross.into_iter().map(|m| &base - m).collect(),
    })
}

/// `beta(x)^* beta(x)` as the derivative of `x -> Pi^* S(x)^{-1} P_x Pi`.
pub fn recover_beta_gram(sk: &SKernelGrid, s_matrix: &CMat) -> Result<Vec<CMat>> {
    let (_, gram) = prefix_forms(sk, s_matrix)?;
    Ok(sk.grid.derivative(&gram))
}

/// `beta = [conj chi_2, -conj chi_1]` for `p = 1`.
pub fn beta_from_chi_p1(chi: &ChiGrid) -> Result<Vec<CMat>> {
    if chi.p != 1 {
        return Err(Error::WrongBlockSize { p: chi.p });
    }
    Ok(chi
        .chi
        .iter()
        .map(|x| CMat::from_row_slice(1, 2, &[x[(0, 1)].conj(), -x[(0, 0)].conj()]))
        .collect())
}

/// `v = beta' chi^*` with `beta` from [`beta_from_chi_p1`].
pub fn recover_potential_p1(chi: &ChiGrid) -> Result<PotentialGrid> {
    let beta = beta_from_chi_p1(chi)?;
    let d = chi.grid.derivative(&beta);
    let v: Vec<CMat> = d
        .iter()
        .zip(&chi.chi)
        .map(|(db, x)| db * x.adjoint())
        .collect();
    let m = v.iter().map(op_norm).fold(0.0, f64::max);
    PotentialGrid::new(1, chi.grid, v, m)
}

/// Everything recovered from one set of Weyl-function samples.
#[derive(Debug, Clone)]
pub struct ContinuousRecovery {
    pub kernel: SKernelGrid,
    pub s_min_eigenvalue: f64,
    pub chi: ChiGrid,
    pub beta_gram: Vec<CMat>,
    /// Only for `p = 1`.
    pub potential: Option<PotentialGrid>,
}

pub fn recover_from_samples(
    samples: &PhiSamples,
    grid: Grid,
    tail_tolerance: f64,
) -> Result<ContinuousRecovery> {
    let kernel = recover_s_from_samples(samples, grid, tail_tolerance)?;
    let s_matrix = build_s_operator(&kernel)?;
    let s_min_eigenvalue = crate::linalg::hermitian_eigenvalues(&s_matrix)[0];
    let chi = recover_chi(&kernel, &s_matrix)?;
    let beta_gram = recover_beta_gram(&kernel, &s_matrix)?;
    let potential = if kernel.p == 1 {
        Some(recover_potential_p1(&chi)?)
    } else {
        None
    };
    Ok(ContinuousRecovery {
        kernel,
        s_min_eigenvalue,
        chi,
        beta_gram,
        potential,
    })
}
