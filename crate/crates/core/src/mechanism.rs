//! Gaussian recommendation mechanisms.
//!
//! The joint vector is ordered `(a_1..a_n, θ_1..θ_n, ω)`. A symmetric mechanism is
//! described by six numbers; the general form carries the full mean and
//! covariance.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Prior;

/// Absolute tolerance on eigenvalues and PSD margins, scaled by the trace.
pub const EPS_PSD: f64 = 1e-9;
/// Relative tolerance used to flag a PSD margin as binding.
pub const EQ_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymMechanism {
    pub mu_a: f64,
    pub var_a: f64,
    pub cov_aa: f64,
    pub cov_atheta_own: f64,
    pub cov_atheta_other: f64,
    pub cov_aomega: f64,
}

impl SymMechanism {
    /// Constant recommendation `μ_a`.
    pub fn constant(mu_a: f64) -> Self {
        SymMechanism { mu_a, var_a: 0.0, cov_aa: 0.0, cov_atheta_own: 0.0, cov_atheta_other: 0.0, cov_aomega: 0.0 }
    }

    fn fields(&self) -> [f64; 6] {
        [self.mu_a, self.var_a, self.cov_aa, self.cov_atheta_own, self.cov_atheta_other, self.cov_aomega]
    }

    pub fn is_finite(&self) -> bool {
        self.fields().iter().all(|x| x.is_finite())
    }

    /// Largest absolute difference over the six fields.
    pub fn max_abs_diff(&self, other: &SymMechanism) -> f64 {
        self.fields().iter().zip(other.fields()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// `x²/var` under the convention `0/0 = 0`.
pub(crate) fn sq_ratio(x: f64, var: f64, what: &str) -> Result<f64> {
    ratio(x, var, what).map(|q| q * x)
}

/// `x/var` under the convention `0/0 = 0`.
pub(crate) fn ratio(x: f64, var: f64, what: &str) -> Result<f64> {
    if var == 0.0 {
        if x == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::Convention(format!("{what} = {x} with a zero prior variance")))
        }
    } else {
        Ok(x / var)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdMargins {
    pub m1: f64,
    pub m2: f64,
    /// `m1 = 0`: conditional correlation of `(a_i, a_j)` given `(θ, ω)` is `+1`.
    pub m1_binding: bool,
    /// `m2 = 0`: conditional correlation is `−1/(n−1)`.
    pub m2_binding: bool,
    /// Scale used for the binding flags and the feasibility tolerance.
    pub scale: f64,
}

impl PsdMargins {
    pub fn feasible(&self) -> bool {
        let tol = EPS_PSD * self.scale;
        self.m1 >= -tol && self.m2 >= -tol
    }

    /// Both margins binding: the recommendation is a deterministic function of `(θ, ω)`.
    pub fn deterministic(&self) -> bool {
        self.m1_binding && self.m2_binding
    }
}

/// The two PSD margins of a symmetric mechanism. The mechanism is feasible iff
/// both are nonnegative.
pub fn psd_margins(sym: &SymMechanism, prior: &Prior, n: usize) -> Result<PsdMargins> {
    if n < 2 {
        return Err(Error::InvalidGame(format!("n = {n} but at least 2 players are required")));
    }
    let nf = n as f64;
    let (vt, vw) = (prior.var_theta, prior.var_omega);
    let m1 = (sym.var_a - sym.cov_aa)
        - sq_ratio(sym.cov_atheta_own - sym.cov_atheta_other, vt, "type covariance")?;
    ratio(sym.cov_atheta_own, vt, "cov_atheta_own")?;
    ratio(sym.cov_atheta_other, vt, "cov_atheta_other")?;
    let m2 = (sym.var_a + (nf - 1.0) * sym.cov_aa)
        - sq_ratio(sym.cov_atheta_own + (nf - 1.0) * sym.cov_atheta_other, vt, "type covariance")?
        - nf * sq_ratio(sym.cov_aomega, vw, "cov_aomega")?;
    let scale = 1f64.max(sym.var_a.abs() + (nf - 1.0) * sym.cov_aa.abs());
    Ok(PsdMargins {
        m1,
        m2,
        m1_binding: m1.abs() <= EQ_REL_TOL * scale,
        m2_binding: m2.abs() <= EQ_REL_TOL * scale,
        scale,
    })
}

/// General Gaussian mechanism `(μ, K)` over `(a, θ, ω)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FullJson", into = "FullJson")]
pub struct FullMechanism {
    n: usize,
    pub mu: DVector<f64>,
    pub k: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct FullJson {
    mu: Vec<f64>,
    #[serde(rename = "K")]
    k: Vec<Vec<f64>>,
}

impl TryFrom<FullJson> for FullMechanism {
    type Error = Error;

    fn try_from(j: FullJson) -> Result<Self> {
        let d = j.mu.len();
        if j.k.len() != d || j.k.iter().any(|row| row.len() != d) {
            return Err(Error::Dimension(format!("K must be {d}×{d} to match mu")));
        }
        let k = DMatrix::from_fn(d, d, |i, c| j.k[i][c]);
        FullMechanism::new(DVector::from_vec(j.mu), k)
    }
}

impl From<FullMechanism> for FullJson {
    fn from(m: FullMechanism) -> Self {
        let d = m.dim();
        FullJson {
            mu: m.mu.iter().copied().collect(),
            k: (0..d).map(|i| (0..d).map(|c| m.k[(i, c)]).collect()).collect(),
        }
    }
}

impl FullMechanism {
    /// Validates the dimension `2n + 1`, symmetry of `K`, a diagonal type block
    /// and a zero type/state block.
    pub fn new(mu: DVector<f64>, k: DMatrix<f64>) -> Result<Self> {
        let d = mu.len();
        if d < 5 || d.is_multiple_of(2) {
            return Err(Error::Dimension(format!("mean vector length {d} is not 2n+1 with n ≥ 2")));
        }
        if k.nrows() != d || k.ncols() != d {
            return Err(Error::Dimension(format!("K is {}×{} but mu has length {d}", k.nrows(), k.ncols())));
        }
        if mu.iter().chain(k.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("mechanism entries must be finite".into()));
        }
        let n = (d - 1) / 2;
        let scale = 1f64.max(k.amax());
        let tol = 1e-12 * scale;
        if (&k - k.transpose()).amax() > tol {
            return Err(Error::InvalidArgument("K is not symmetric".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && k[(n + i, n + j)].abs() > tol {
                    return Err(Error::InvalidArgument("type block of K must be diagonal".into()));
                }
            }
            if k[(n + i, 2 * n)].abs() > tol {
                return Err(Error::InvalidArgument("types must be independent of the state".into()));
            }
        }
        Ok(FullMechanism { n, mu, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    pub fn a(&self, i: usize) -> usize {
        i
    }

    pub fn theta(&self, i: usize) -> usize {
        self.n + i
    }

    pub fn omega(&self) -> usize {
        2 * self.n
    }

    /// Total expected welfare `Σ(μ_{a_i}² + σ_{a_i}²)/2`, valid for obedient mechanisms.
    pub fn welfare(&self) -> f64 {
        (0..self.n).map(|i| 0.5 * (self.mu[i] * self.mu[i] + self.k[(i, i)])).sum()
    }

    /// Smallest eigenvalue of `K`.
    pub fn min_eigenvalue(&self) -> f64 {
        self.k.clone().symmetric_eigenvalues().min()
    }

    pub fn psd_tolerance(&self) -> f64 {
        EPS_PSD * 1f64.max(self.k.trace().abs())
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -self.psd_tolerance()
    }

    /// Whether the `(θ, ω)` marginal equals `prior` to relative `1e-12`.
    pub fn matches_prior(&self, prior: &Prior) -> bool {
        let n = self.n;
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * 1f64.max(y.abs());
        (0..n).all(|i| close(self.mu[n + i], prior.mu_theta) && close(self.k[(n + i, n + i)], prior.var_theta))
            && close(self.mu[2 * n], prior.mu_omega)
            && close(self.k[(2 * n, 2 * n)], prior.var_omega)
    }

    /// Reads the six symmetric parameters, failing if the action blocks are not
    /// permutation-invariant (relative tolerance `1e-9`).
    pub fn to_sym(&self) -> Result<SymMechanism> {
        let s = symmetric_parts(self);
        let back = assemble_with(&s, self.n, |i| self.mu[self.n + i], |i| self.k[(self.n + i, self.n + i)], self.mu[2 * self.n], self.k[(2 * self.n, 2 * self.n)]);
        let tol = 1e-9 * 1f64.max(self.k.amax()).max(self.mu.amax());
        if (&back.k - &self.k).amax() > tol || (&back.mu - &self.mu).amax() > tol {
            return Err(Error::Asymmetric("mechanism is not invariant under player permutations".into()));
        }
        Ok(s)
    }

    /// Multivariate normal draws, one per row. Deterministic given `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<DMatrix<f64>> {
        let sampler = GaussianSampler::new(self)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.dim();
        let mut out = DMatrix::zeros(count, d);
        let mut row = vec![0.0; d];
        let mut z = vec![0.0; d];
        for c in 0..count {
            sampler.draw(&mut rng, &mut z, &mut row);
            for (j, x) in row.iter().enumerate() {
                out[(c, j)] = *x;
            }
        }
        Ok(out)
    }
}

/// `μ + L z` with `L Lᵀ = K`, built from an eigen-decomposition so that
/// rank-deficient covariances factor cleanly.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    mu: DVector<f64>,
    l: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(mech: &FullMechanism) -> Result<Self> {
        Self::from_moments(mech.mu.clone(), mech.k.clone())
    }

    pub fn from_moments(mu: DVector<f64>, k: DMatrix<f64>) -> Result<Self> {
        let tol = EPS_PSD * 1f64.max(k.trace().abs());
        let eig = k.symmetric_eigen();
        let min = eig.eigenvalues.min();
        if min < -tol {
            return Err(Error::Infeasible(format!("covariance has eigenvalue {min:e} < 0")));
        }
        let mut l = eig.eigenvectors;
        for (j, &lam) in eig.eigenvalues.iter().enumerate() {
            let root = lam.max(0.0).sqrt();
            l.column_mut(j).scale_mut(root);
        }
        Ok(GaussianSampler { mu, l })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Fills `out` with one draw; `z` is scratch space of the same length.
    pub fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R, z: &mut [f64], out: &mut [f64]) {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        let d = self.dim();
        for (i, o) in out.iter_mut().enumerate().take(d) {
            let mut acc = self.mu[i];
            for (j, zj) in z.iter().enumerate() {
                acc += self.l[(i, j)] * zj;
            }
            *o = acc;
        }
    }
}

fn assemble_with(
    sym: &SymMechanism,
    n: usize,
    mu_theta: impl Fn(usize) -> f64,
    var_theta: impl Fn(usize) -> f64,
    mu_omega: f64,
    var_omega: f64,
) -> FullMechanism {
    let d = 2 * n + 1;
    let mut mu = DVector::zeros(d);
    let mut k = DMatrix::zeros(d, d);
    for i in 0..n {
        mu[i] = sym.mu_a;
        mu[n + i] = mu_theta(i);
        k[(n + i, n + i)] = var_theta(i);
        k[(i, 2 * n)] = sym.cov_aomega;
        k[(2 * n, i)] = sym.cov_aomega;
        for j in 0..n {
            k[(i, j)] = if i == j { sym.var_a } else { sym.cov_aa };
            let c = if i == j { sym.cov_atheta_own } else { sym.cov_atheta_other };
            k[(i, n + j)] = c;
            k[(n + j, i)] = c;
        }
    }
    mu[2 * n] = mu_omega;
    k[(2 * n, 2 * n)] = var_omega;
    FullMechanism { n, mu, k }
}

pub fn assemble_full(sym: &SymMechanism, prior: &Prior, n: usize) -> Result<FullMechanism> {
    if n < 2 {
        return Err(Error::InvalidGame(format!("n = {n} but at least 2 players are required")));
    }
    Ok(assemble_with(sym, n, |_| prior.mu_theta, |_| prior.var_theta, prior.mu_omega, prior.var_omega))
}

fn symmetric_parts(full: &FullMechanism) -> SymMechanism {
    let n = full.n;
    let nf = n as f64;
    let pairs = nf * (nf - 1.0);
    let (mut var_a, mut cov_aa, mut own, mut other, mut aw, mut mu) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        mu += full.mu[i];
        aw += full.k[(i, 2 * n)];
        for j in 0..n {
            if i == j {
                var_a += full.k[(i, i)];
                own += full.k[(i, n + i)];
            } else {
                cov_aa += full.k[(i, j)];
                other += full.k[(i, n + j)];
            }
        }
    }
    SymMechanism {
        mu_a: mu / nf,
        var_a: var_a / nf,
        cov_aa: cov_aa / pairs,
        cov_atheta_own: own / nf,
        cov_atheta_other: other / pairs,
        cov_aomega: aw / nf,
    }
}

/// Average over all simultaneous permutations of the action and type blocks,
/// computed as diagonal/off-diagonal means.
pub fn symmetrize(full: &FullMechanism) -> Result<FullMechanism> {
    let n = full.n;
    let (mt, vt) = (full.mu[n], full.k[(n, n)]);
    let tol = 1e-12 * 1f64.max(full.k.amax()).max(full.mu.amax());
    for i in 1..n {
        if (full.mu[n + i] - mt).abs() > tol || (full.k[(n + i, n + i)] - vt).abs() > tol {
            return Err(Error::Asymmetric("type marginals differ across players".into()));
        }
    }
    let sym = symmetric_parts(full);
    Ok(assemble_with(&sym, n, |_| mt, |_| vt, full.mu[2 * n], full.k[(2 * n, 2 * n)]))
}

/// `a = α + βω + Γθ + ε` with `ε ~ N(0, K_ε)` independent of `(θ, ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRepresentation {
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub gamma: DMatrix<f64>,
    pub k_eps: DMatrix<f64>,
}

impl LinearRepresentation {
    /// Rebuilds the full mechanism implied by the representation under `prior`.
    pub fn reconstruct(&self, prior: &Prior) -> FullMechanism {
        let n = self.alpha.len();
        let d = 2 * n + 1;
        let (vt, vw) = (prior.var_theta, prior.var_omega);
        let k_aa = &self.beta * self.beta.transpose() * vw + &self.gamma * self.gamma.transpose() * vt + &self.k_eps;
        let k_at = &self.gamma * vt;
        let mut mu = DVector::zeros(d);
        let mut k = DMatrix::zeros(d, d);
        for i in 0..n {
            mu[i] = self.alpha[i] + self.beta[i] * prior.mu_omega + self.gamma.row(i).sum() * prior.mu_theta;
            mu[n + i] = prior.mu_theta;
            k[(n + i, n + i)] = vt;
            k[(i, 2 * n)] = self.beta[i] * vw;
            k[(2 * n, i)] = self.beta[i] * vw;
            for j in 0..n {
                k[(i, j)] = k_aa[(i, j)];
                k[(i, n + j)] = k_at[(i, j)];
                k[(n + j, i)] = k_at[(i, j)];
            }
        }
        mu[2 * n] = prior.mu_omega;
        k[(2 * n, 2 * n)] = vw;
        FullMechanism { n, mu, k }
    }
}

pub fn to_linear(sym: &SymMechanism, prior: &Prior, n: usize) -> Result<LinearRepresentation> {
    let margins = psd_margins(sym, prior, n)?;
    if !margins.feasible() {
        return Err(Error::Infeasible(format!("PSD margins ({:e}, {:e})", margins.m1, margins.m2)));
    }
    let nf = n as f64;
    let (vt, vw) = (prior.var_theta, prior.var_omega);
    let b = ratio(sym.cov_aomega, vw, "cov_aomega")?;
    let g_own = ratio(sym.cov_atheta_own, vt, "cov_atheta_own")?;
    let g_other = ratio(sym.cov_atheta_other, vt, "cov_atheta_other")?;
    let ww = b * sym.cov_aomega;
    let eps_diag = sym.var_a - ww - g_own * sym.cov_atheta_own - (nf - 1.0) * g_other * sym.cov_atheta_other;
    let eps_off = sym.cov_aa - ww - 2.0 * g_own * sym.cov_atheta_other - (nf - 2.0) * g_other * sym.cov_atheta_other;
    let alpha = sym.mu_a - b * prior.mu_omega - (g_own + (nf - 1.0) * g_other) * prior.mu_theta;
    Ok(LinearRepresentation {
        alpha: DVector::from_element(n, alpha),
        beta: DVector::from_element(n, b),
        gamma: DMatrix::from_fn(n, n, |i, j| if i == j { g_own } else { g_other }),
        k_eps: DMatrix::from_fn(n, n, |i, j| if i == j { eps_diag } else { eps_off }),
    })
}
