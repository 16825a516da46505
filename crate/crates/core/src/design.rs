//! Closed-form optimal mechanisms.
//!
//! After eliminating `σ_{aθj}` and `σ_a²` through the obedience equalities, the
//! designer's program has three free covariances `(σ_{aa}, σ_{aω}, σ_{aθi})` and
//! two PSD constraints. The KKT conditions give every covariance as a function
//! of one multiplier `λ`, pinned down by a monotone quartic equation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameSpec, Prior};
use crate::incentives::{expected_payment, obedience_residuals};
use crate::mechanism::{psd_margins, SymMechanism};
use crate::roots::decreasing_root;

/// Slack required by the strict comparisons against the Nash benchmark.
pub const COMPARISON_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Welfare,
    Revenue,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "welfare" => Ok(Objective::Welfare),
            "revenue" => Ok(Objective::Revenue),
            other => Err(Error::InvalidArgument(format!("unknown objective '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Deterministic,
    Randomized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub objective: Objective,
    pub mechanism: SymMechanism,
    pub lambda: f64,
    pub nu: f64,
    pub delta: f64,
    pub branch: Branch,
    /// Whether each PSD constraint holds with equality.
    pub binding: [bool; 2],
    pub psd_margins: [f64; 2],
    /// Value of the reduced program: `σ_a²` for welfare, `σ_a² − tσ_{aθi}` for revenue.
    pub objective_value: f64,
    /// Total expected welfare `n(μ_a² + σ_a²)/2`.
    pub welfare: f64,
    pub expected_payment: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NashBenchmark {
    pub mechanism: SymMechanism,
}

fn require_substitutes(game: &GameSpec) -> Result<()> {
    game.require_stable()?;
    if game.r < 0.0 {
        Ok(())
    } else {
        Err(Error::Domain { r: game.r, domain: "(-1, 0)".into() })
    }
}

/// Deterministic-branch threshold for welfare, defined for substitutes.
pub fn threshold_value(game: &GameSpec) -> Result<f64> {
    require_substitutes(game)?;
    let (n, r, f) = (game.n_f64(), game.r, game.f());
    Ok(-(1.0 + r).powi(3) * (1.0 + (n + 1.0) * r)
        / (n * n * r * r * (2.0 * r + 3.0) * (f * (2.0 * r + 3.0) - r)))
}

/// Deterministic-branch threshold for revenue, defined for substitutes.
pub fn threshold_value_revenue(game: &GameSpec) -> Result<f64> {
    require_substitutes(game)?;
    let (n, r, f) = (game.n_f64(), game.r, game.f());
    Ok(-(1.0 + r).powi(3) * (1.0 + (n + 1.0) * r)
        / (n * n * r * r * (r + 2.0) * (r * r + f * (r + 2.0))))
}

/// `t²σ_θ²/(s²σ_ω²)`, taken as `+∞` when the denominator vanishes.
pub fn information_ratio(game: &GameSpec, prior: &Prior) -> f64 {
    let den = game.s * game.s * prior.var_omega;
    let num = game.t * game.t * prior.var_theta;
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Whether the welfare optimum is a deterministic function of `(θ, ω)`.
/// Always true for `r ≥ 0`.
pub fn is_deterministic_branch(game: &GameSpec, prior: &Prior) -> Result<bool> {
    branch_test(game, prior, Objective::Welfare)
}

fn branch_test(game: &GameSpec, prior: &Prior, objective: Objective) -> Result<bool> {
    game.require_stable()?;
    prior.validate()?;
    if game.r >= 0.0 {
        return Ok(true);
    }
    let threshold = match objective {
        Objective::Welfare => threshold_value(game)?,
        Objective::Revenue => threshold_value_revenue(game)?,
    };
    Ok(threshold <= information_ratio(game, prior))
}

fn quartic_constant(game: &GameSpec, objective: Objective) -> f64 {
    let (r, f) = (game.r, game.f());
    match objective {
        Objective::Welfare => r * r + 2.0 * r * (1.0 - f) - 3.0 * f,
        Objective::Revenue => f * (r + 2.0) - r,
    }
}

fn lambda_domain(game: &GameSpec, lambda: f64) -> Result<()> {
    let (r, f) = (game.r, game.f());
    let ok = if r > 0.0 { lambda > r / (f - r) } else { lambda >= 0.0 };
    if ok && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("lambda = {lambda} is outside the multiplier domain")))
    }
}

fn lhs_unchecked(lambda: f64, game: &GameSpec, prior: &Prior, objective: Objective) -> f64 {
    let (n, r, s, t, f) = (game.n_f64(), game.r, game.s, game.t, game.f());
    let c = quartic_constant(game, objective);
    let d1 = lambda * (f - r) - r;
    let d2 = lambda * n * f * (f - r) - (1.0 + r) * r;
    let first = if s == 0.0 { 0.0 } else { (1.0 + r).powi(3) * f * s * s * prior.var_omega / (n * n * d1 * d1) };
    let second = if r == 0.0 || t == 0.0 { 0.0 } else { r * r * c * c * t * t * prior.var_theta / (d2 * d2) };
    first + second
}

fn quartic_rhs(game: &GameSpec, prior: &Prior) -> f64 {
    let (r, s, t, f) = (game.r, game.s, game.t, game.f());
    f * s * s * prior.var_omega * (1.0 + r) + r * r * t * t * prior.var_theta
}

/// Left side of the welfare multiplier equation. Strictly decreasing in `λ`.
pub fn quartic_lhs(lambda: f64, game: &GameSpec, prior: &Prior) -> Result<f64> {
    game.require_stable()?;
    lambda_domain(game, lambda)?;
    Ok(lhs_unchecked(lambda, game, prior, Objective::Welfare))
}

/// Left side of the revenue multiplier equation.
pub fn quartic_lhs_revenue(lambda: f64, game: &GameSpec, prior: &Prior) -> Result<f64> {
    require_substitutes(game)?;
    lambda_domain(game, lambda)?;
    Ok(lhs_unchecked(lambda, game, prior, Objective::Revenue))
}

/// Right side shared by both multiplier equations.
pub fn quartic_rhs_value(game: &GameSpec, prior: &Prior) -> f64 {
    quartic_rhs(game, prior)
}

fn lambda_root(game: &GameSpec, prior: &Prior, objective: Objective) -> Result<f64> {
    let (r, f) = (game.r, game.f());
    let rhs = quartic_rhs(game, prior);
    let h = |l: f64| lhs_unchecked(l, game, prior, objective) - rhs;
    if r < 0.0 {
        if h(0.0) <= 0.0 {
            return Ok(0.0);
        }
        decreasing_root(h, 0.0, 1.0)
    } else {
        let pole = r / (f - r);
        let lo = pole + 1e-12 * (1.0 + pole.abs());
        decreasing_root(h, lo, 1f64.max(2.0 * lo))
    }
}

/// The welfare multiplier `λ`. Zero for substitutes outside the deterministic
/// region; otherwise the unique root of the multiplier equation.
pub fn solve_lambda(game: &GameSpec, prior: &Prior) -> Result<f64> {
    game.require_stable()?;
    prior.require_nondegenerate()?;
    if game.r == 0.0 {
        return Ok(r0_lambda(game));
    }
    if !is_deterministic_branch(game, prior)? {
        return Ok(0.0);
    }
    lambda_root(game, prior, Objective::Welfare)
}

fn r0_lambda(game: &GameSpec) -> f64 {
    (game.n_f64() - 1.0) / game.n_f64()
}

/// `ν` from the first stationarity equation.
fn nu_of(game: &GameSpec, lambda: f64) -> f64 {
    (lambda * (game.f() - game.r) - game.r) / (1.0 + game.r)
}

struct Stationary {
    cov_aomega: f64,
    cov_atheta_own: f64,
}

fn stationary_point(game: &GameSpec, prior: &Prior, lambda: f64, objective: Objective) -> Stationary {
    let (n, r, s, t, f) = (game.n_f64(), game.r, game.s, game.t, game.f());
    let (vt, vw) = (prior.var_theta, prior.var_omega);
    let cov_aomega = s * vw / (2.0 * n) * (lambda * n * f + 1.0) / (lambda * (f - r) - r);
    let extra = match objective {
        Objective::Welfare => 0.0,
        Objective::Revenue => r * r * (1.0 + r),
    };
    let num = lambda * n * f * (r * r + 2.0 * (f - r) * (1.0 + r)) - (2.0 + r) * r - extra;
    let den = 2.0 * (1.0 + r) * (lambda * n * f * (f - r) - (1.0 + r) * r);
    Stationary { cov_aomega, cov_atheta_own: t * vt * num / den }
}

/// Fills in `σ_{aθj}` from obedience and `(σ_a², σ_{aa})` from obedience plus the
/// binding PSD constraint (the second for `r < 0`, the first for `r > 0`).
fn complete(game: &GameSpec, prior: &Prior, cov_aomega: f64, cov_atheta_own: f64) -> SymMechanism {
    let (n, r, s, t, f) = (game.n_f64(), game.r, game.s, game.t, game.f());
    let (vt, vw) = (prior.var_theta, prior.var_omega);
    let cov_atheta_other = f * (cov_atheta_own - t * vt) / r;
    let b = s * cov_aomega + t * cov_atheta_own;
    let (var_a, cov_aa) = if r < 0.0 {
        let a2 = (cov_atheta_own + (n - 1.0) * cov_atheta_other).powi(2) / vt + n * cov_aomega * cov_aomega / vw;
        let x = (a2 - b) / (1.0 + r);
        (r * x + b, x / (n - 1.0))
    } else {
        let a1 = (cov_atheta_own - cov_atheta_other).powi(2) / vt;
        let cov_aa = (b - a1) / (1.0 - (n - 1.0) * r);
        (a1 + cov_aa, cov_aa)
    };
    SymMechanism {
        mu_a: game.mean_action(prior),
        var_a,
        cov_aa,
        cov_atheta_own,
        cov_atheta_other,
        cov_aomega,
    }
}

fn r0_mechanism(game: &GameSpec, prior: &Prior) -> SymMechanism {
    let (s, t) = (game.s, game.t);
    let (vt, vw) = (prior.var_theta, prior.var_omega);
    SymMechanism {
        mu_a: game.mean_action(prior),
        var_a: t * t * vt + s * s * vw,
        cov_aa: s * s * vw,
        cov_atheta_own: t * vt,
        cov_atheta_other: 0.0,
        cov_aomega: s * vw,
    }
}

/// Printed closed form of the welfare noise variance in the randomized branch.
fn welfare_delta_sq(game: &GameSpec, prior: &Prior) -> f64 {
    let (n, r, s, t, f) = (game.n_f64(), game.r, game.s, game.t, game.f());
    let (vt, vw) = (prior.var_theta, prior.var_omega);
    let num = t * t * vt * (2.0 * r + 3.0) * (f * (2.0 * r + 3.0) - r) * n * n * r * r
        + s * s * vw * (1.0 + (n + 1.0) * r) * (1.0 + r).powi(3);
    -num / (4.0 * (1.0 + r).powi(4) * n * n * r * r)
}

fn finish(
    game: &GameSpec,
    prior: &Prior,
    objective: Objective,
    mechanism: SymMechanism,
    lambda: f64,
    nu: f64,
    branch: Branch,
) -> Result<SolveReport> {
    let margins = psd_margins(&mechanism, prior, game.n)?;
    let nf = game.n_f64();
    let delta = match branch {
        Branch::Deterministic => 0.0,
        Branch::Randomized => {
            // Noise covariance diag δ², off-diag −δ²/(n−1) has eigenvalue nδ²/(n−1) = m1.
            let reconstructed = (nf - 1.0) * margins.m1 / nf;
            if objective == Objective::Welfare {
                let printed = welfare_delta_sq(game, prior);
                if (printed - reconstructed).abs() > 1e-8 * 1f64.max(reconstructed.abs()) {
                    return Err(Error::Internal(format!(
                        "noise variance mismatch: closed form {printed:e}, reconstruction {reconstructed:e}"
                    )));
                }
            }
            reconstructed.max(0.0).sqrt()
        }
    };
    let objective_value = match objective {
        Objective::Welfare => mechanism.var_a,
        Objective::Revenue => mechanism.var_a - game.t * mechanism.cov_atheta_own,
    };
    Ok(SolveReport {
        objective,
        mechanism,
        lambda,
        nu,
        delta,
        branch,
        binding: [margins.m1_binding, margins.m2_binding],
        psd_margins: [margins.m1, margins.m2],
        objective_value,
        welfare: welfare(&mechanism, game.n),
        expected_payment: expected_payment(&mechanism, game),
    })
}

/// Welfare-maximizing obedient mechanism.
pub fn solve_welfare(game: &GameSpec, prior: &Prior) -> Result<SolveReport> {
    game.require_stable()?;
    prior.require_nondegenerate()?;
    let r = game.r;
    if r == 0.0 {
        let lambda = r0_lambda(game);
        let mech = r0_mechanism(game, prior);
        return finish(game, prior, Objective::Welfare, mech, lambda, lambda * game.f(), Branch::Deterministic);
    }
    if game.s == 0.0 && game.t == 0.0 {
        return zero_report(game, prior, Objective::Welfare);
    }
    let deterministic = is_deterministic_branch(game, prior)?;
    let lambda = if deterministic { lambda_root(game, prior, Objective::Welfare)? } else { 0.0 };
    let st = stationary_point(game, prior, lambda, Objective::Welfare);
    let mech = complete(game, prior, st.cov_aomega, st.cov_atheta_own);
    let branch = if deterministic { Branch::Deterministic } else { Branch::Randomized };
    finish(game, prior, Objective::Welfare, mech, lambda, nu_of(game, lambda), branch)
}

/// Revenue-maximizing obedient mechanism, for strategic substitutes.
pub fn solve_revenue(game: &GameSpec, prior: &Prior) -> Result<SolveReport> {
    game.require_stable()?;
    if game.r >= 0.0 {
        return Err(Error::Domain { r: game.r, domain: "(-1, 0): revenue solver requires r<0".into() });
    }
    prior.require_nondegenerate()?;
    if game.s == 0.0 && game.t == 0.0 {
        return zero_report(game, prior, Objective::Revenue);
    }
    let deterministic = branch_test(game, prior, Objective::Revenue)?;
    let lambda = if deterministic { lambda_root(game, prior, Objective::Revenue)? } else { 0.0 };
    let st = stationary_point(game, prior, lambda, Objective::Revenue);
    let mech = complete(game, prior, st.cov_aomega, st.cov_atheta_own);
    let branch = if deterministic { Branch::Deterministic } else { Branch::Randomized };
    finish(game, prior, Objective::Revenue, mech, lambda, nu_of(game, lambda), branch)
}

pub fn solve(game: &GameSpec, prior: &Prior, objective: Objective) -> Result<SolveReport> {
    match objective {
        Objective::Welfare => solve_welfare(game, prior),
        Objective::Revenue => solve_revenue(game, prior),
    }
}

/// With `s = t = 0` the only obedient mechanism is the constant recommendation.
fn zero_report(game: &GameSpec, prior: &Prior, objective: Objective) -> Result<SolveReport> {
    let (r, f) = (game.r, game.f());
    let lambda = if r < 0.0 { 0.0 } else { r / (f - r) + 1.0 };
    let mech = SymMechanism::constant(game.mean_action(prior));
    finish(game, prior, objective, mech, lambda, nu_of(game, lambda), Branch::Deterministic)
}

/// Covariances of the complete-information Nash recommendation.
pub fn nash_covariances(game: &GameSpec, prior: &Prior) -> Result<NashBenchmark> {
    game.require_stable()?;
    prior.validate()?;
    let (n, r, s, t) = (game.n_f64(), game.r, game.s, game.t);
    let (vt, vw) = (prior.var_theta, prior.var_omega);
    let agg = 1.0 - (n - 1.0) * r;
    let cov_aomega = s * vw / agg;
    let cov_atheta_own = t * (1.0 - (n - 2.0) * r) * vt / ((1.0 + r) * agg);
    let cov_atheta_other = r * t * vt / ((1.0 + r) * agg);
    // Zero conditional variance: both PSD margins vanish.
    let a1 = if vt > 0.0 { (cov_atheta_own - cov_atheta_other).powi(2) / vt } else { 0.0 };
    let a2 = if vt > 0.0 { (cov_atheta_own + (n - 1.0) * cov_atheta_other).powi(2) / vt } else { 0.0 }
        + if vw > 0.0 { n * cov_aomega * cov_aomega / vw } else { 0.0 };
    let cov_aa = (a2 - a1) / n;
    Ok(NashBenchmark {
        mechanism: SymMechanism {
            mu_a: game.mean_action(prior),
            var_a: a1 + cov_aa,
            cov_aa,
            cov_atheta_own,
            cov_atheta_other,
            cov_aomega,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NashComparison {
    /// `|σ_{aω}ᵂ| < |σ_{aω}ᴺ|`
    pub omega_smaller: bool,
    /// `|σ_{aθi}ᵂ| > |σ_{aθi}ᴺ|`
    pub own_larger: bool,
    /// `|σ_{aθj}ᵂ| > |σ_{aθj}ᴺ|`
    pub other_larger: bool,
    /// Signed slack of each ordering (positive when it holds).
    pub slack: [f64; 3],
}

impl NashComparison {
    pub fn all(&self) -> bool {
        self.omega_smaller && self.own_larger && self.other_larger
    }
}

/// Compares a welfare optimum with the Nash benchmark. Undefined at `r = 0`,
/// where the two coincide.
pub fn compare_to_nash(report: &SolveReport, game: &GameSpec, prior: &Prior) -> Result<NashComparison> {
    if game.r == 0.0 {
        return Err(Error::Degenerate("at r = 0 the welfare optimum coincides with Nash".into()));
    }
    let w = &report.mechanism;
    let nash = nash_covariances(game, prior)?.mechanism;
    let slack = [
        nash.cov_aomega.abs() - w.cov_aomega.abs(),
        w.cov_atheta_own.abs() - nash.cov_atheta_own.abs(),
        w.cov_atheta_other.abs() - nash.cov_atheta_other.abs(),
    ];
    Ok(NashComparison {
        omega_smaller: slack[0] > COMPARISON_SLACK,
        own_larger: slack[1] > COMPARISON_SLACK,
        other_larger: slack[2] > COMPARISON_SLACK,
        slack,
    })
}

/// Total expected welfare of an obedient mechanism.
pub fn welfare(sym: &SymMechanism, n: usize) -> f64 {
    n as f64 * (sym.mu_a * sym.mu_a + sym.var_a) / 2.0
}

/// Left side minus right side of the canonical ellipse bounding `(σ_{aθi}, σ_{aω})`
/// for substitutes' and complements' optima; nonpositive inside. Undefined at `r = 0`.
pub fn ellipse_value(game: &GameSpec, prior: &Prior, cov_atheta_own: f64, cov_aomega: f64) -> Result<f64> {
    game.require_stable()?;
    prior.require_nondegenerate()?;
    let (r, s, t, f) = (game.r, game.s, game.t, game.f());
    if r == 0.0 {
        return Err(Error::Degenerate("the ellipse collapses at r = 0".into()));
    }
    let (vt, vw) = (prior.var_theta, prior.var_omega);
    let c_theta = t * vt * (r * r + 2.0 * (f - r) * (1.0 + r)) / (2.0 * (f - r) * (1.0 + r));
    let c_omega = f * s * vw / (2.0 * (f - r));
    let lhs = (1.0 + r) / (r * r * vt) * (cov_atheta_own - c_theta).powi(2) + (cov_aomega - c_omega).powi(2) / (f * vw);
    let rhs = r * r * t * t * vt / (4.0 * (1.0 + r) * (f - r).powi(2)) + f * s * s * vw / (4.0 * (f - r).powi(2));
    Ok(lhs - rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// The three stationarity equations, each normalized by the size of its terms.
    pub stationarity: [f64; 3],
    /// Negative parts of `λ` and `ν`.
    pub dual: [f64; 2],
    /// `λ·m1` and `ν·m2`.
    pub slackness: [f64; 2],
    /// Negative parts of the PSD margins.
    pub primal: [f64; 2],
    /// Scaled obedience residuals of the mechanism.
    pub obedience: [f64; 3],
}

impl KktResiduals {
    pub fn max_abs(&self) -> f64 {
        self.stationarity
            .iter()
            .chain(&self.dual)
            .chain(&self.slackness)
            .chain(&self.primal)
            .chain(&self.obedience)
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// KKT certificate of a solver report.
pub fn kkt_residuals(report: &SolveReport, game: &GameSpec, prior: &Prior) -> Result<KktResiduals> {
    game.require_stable()?;
    let (n, r, s, t, f) = (game.n_f64(), game.r, game.s, game.t, game.f());
    let (vt, vw) = (prior.var_theta, prior.var_omega);
    let (l, nu) = (report.lambda, report.nu);
    let m = &report.mechanism;

    let norm = |terms: &[f64]| {
        let sum: f64 = terms.iter().sum();
        let size = terms.iter().fold(0.0f64, |a, x| a + x.abs());
        sum / 1f64.max(size)
    };
    let e1 = norm(&[-r, (f - r) * l, -(1.0 + r) * nu]);
    let e2 = norm(&[-s, -s * l, nu * 2.0 * n * m.cov_aomega / vw, -nu * s]);
    let own_weight = match report.objective {
        Objective::Welfare => l + nu + 1.0,
        Objective::Revenue => l + nu,
    };
    let e3 = norm(&[
        2.0 * l * (f - r) * ((f - r) * m.cov_atheta_own - f * t * vt),
        2.0 * nu * (1.0 + r) * ((1.0 + r) * m.cov_atheta_own - t * vt),
        -r * r * vt * t * own_weight,
    ]);

    let margins = psd_margins(m, prior, game.n)?;
    let scale = margins.scale;
    let obed = obedience_residuals(m, game, prior);
    let oscale = 1f64.max(m.var_a.abs()).max(m.mu_a.abs());
    Ok(KktResiduals {
        stationarity: [e1, e2, e3],
        dual: [l.min(0.0), nu.min(0.0)],
        slackness: [l * margins.m1 / scale, nu * margins.m2 / scale],
        primal: [margins.m1.min(0.0) / scale, margins.m2.min(0.0) / scale],
        obedience: [obed[0] / oscale, obed[1] / oscale, obed[2] / oscale],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::incentives::ic_margin;

    fn unit() -> Prior {
        Prior::standard()
    }

    #[test]
    fn threshold_examples() {
        let g = GameSpec::new(2, -1.0 / 3.0, 1.0, 1.0).unwrap();
        assert!(threshold_value(&g).unwrap().abs() < 1e-15);
        let g = GameSpec::new(2, -0.45, 1.0, 1.0).unwrap();
        assert!((threshold_value(&g).unwrap() - 0.0134).abs() < 1e-3);
        let g = GameSpec::new(2, -0.01, 1.0, 1.0).unwrap();
        assert!(threshold_value(&g).unwrap() < 0.0);
        let g = GameSpec::new(2, 0.2, 1.0, 1.0).unwrap();
        assert!(matches!(threshold_value(&g), Err(Error::Domain { .. })));
    }

    #[test]
    fn branch_examples() {
        let g = GameSpec::new(2, -0.45, 1.0, 1.0).unwrap();
        let p = |vt: f64| Prior::new(0.0, vt, 0.0, 1.0).unwrap();
        assert!(!is_deterministic_branch(&g, &p(0.007)).unwrap());
        assert!(is_deterministic_branch(&g, &p(0.02)).unwrap());
        let g = GameSpec::new(3, -0.2, 1.0, 1.0).unwrap();
        assert!(is_deterministic_branch(&g, &p(1e-6)).unwrap());
        let g = GameSpec::new(2, -0.45, 0.0, 1.0).unwrap();
        assert!(is_deterministic_branch(&g, &p(1e-6)).unwrap());
    }

    #[test]
    fn quartic_examples() {
        let g = GameSpec::new(2, 0.5, 1.0, 1.0).unwrap();
        let p = unit();
        assert!((quartic_lhs(3.0, &g, &p).unwrap() - (0.84375 + 1.890625 / 5.0625)).abs() < 1e-12);
        assert!((quartic_lhs(2.0, &g, &p).unwrap() - 4.585).abs() < 1e-3);
        assert_eq!(quartic_rhs_value(&g, &p), 1.75);
        assert!(quartic_lhs(1.0, &g, &p).is_err());
        let gs = GameSpec::new(2, -0.5, 1.0, 1.0).unwrap();
        assert!(quartic_lhs(1e12, &gs, &p).unwrap() < 1e-20);

        let lambda = solve_lambda(&g, &p).unwrap();
        assert!((lambda - 2.656).abs() < 0.01);
        let lhs = quartic_lhs(lambda, &g, &p).unwrap();
        assert!((lhs - 1.75).abs() <= 1e-10 * 1.75);
    }

    #[test]
    fn lambda_zero_at_threshold() {
        let g = GameSpec::new(2, -0.45, 1.0, 1.0).unwrap();
        let vt = threshold_value(&g).unwrap();
        let lambda = lambda_root(&g, &Prior::new(0.0, vt, 0.0, 1.0).unwrap(), Objective::Welfare).unwrap();
        assert!(lambda.abs() < 1e-6, "{lambda}");
    }

    #[test]
    fn r0_example() {
        let g = GameSpec::new(2, 0.0, 1.0, 1.0).unwrap();
        let rep = solve_welfare(&g, &unit()).unwrap();
        let m = rep.mechanism;
        assert_eq!((m.cov_aomega, m.cov_atheta_own, m.cov_atheta_other, m.var_a, m.cov_aa), (1.0, 1.0, 0.0, 2.0, 1.0));
        assert_eq!(rep.delta, 0.0);
        assert!(kkt_residuals(&rep, &g, &unit()).unwrap().max_abs() < 1e-12);
        assert!(matches!(compare_to_nash(&rep, &g, &unit()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn complements_example() {
        let g = GameSpec::new(2, 0.5, 1.0, 1.0).unwrap();
        let rep = solve_welfare(&g, &unit()).unwrap();
        let m = rep.mechanism;
        assert_eq!(rep.branch, Branch::Deterministic);
        assert!((m.cov_aomega - 1.906).abs() < 5e-3);
        assert!((m.cov_atheta_own - 1.407).abs() < 5e-3);
        assert!((m.cov_atheta_other - 0.814).abs() < 5e-3);
        assert!(rep.lambda > g.r / (g.f() - g.r));
        let cmp = compare_to_nash(&rep, &g, &unit()).unwrap();
        assert!(cmp.all());
        assert!(kkt_residuals(&rep, &g, &unit()).unwrap().max_abs() < 1e-9);
        assert!(ellipse_value(&g, &unit(), m.cov_atheta_own, m.cov_aomega).unwrap().abs() < 1e-9);
    }

    #[test]
    fn randomized_example() {
        let g = GameSpec::new(2, -0.45, 1.0, 1.0).unwrap();
        let p = Prior::new(0.0, 0.007, 0.0, 1.0).unwrap();
        let rep = solve_welfare(&g, &p).unwrap();
        assert_eq!(rep.branch, Branch::Randomized);
        assert!(rep.delta > 0.0);
        assert!((rep.delta.powi(2) - welfare_delta_sq(&g, &p)).abs() < 1e-10);
        let m = rep.mechanism;
        assert!((m.cov_aomega - 1.0 / 1.8).abs() < 1e-12);
        let f = g.f();
        assert!((m.cov_atheta_other + f * 0.007 * (2.0 * g.r + 3.0) / (2.0 * 0.55f64.powi(2))).abs() < 1e-12);
        assert!(kkt_residuals(&rep, &g, &p).unwrap().max_abs() < 1e-9);
        assert!(ellipse_value(&g, &p, m.cov_atheta_own, m.cov_aomega).unwrap() < 0.0);
        assert!(!rep.binding[0] && rep.binding[1]);
    }

    #[test]
    fn nash_examples() {
        let p = unit();
        let g = GameSpec::new(2, 0.5, 1.0, 1.0).unwrap();
        let nb = nash_covariances(&g, &p).unwrap().mechanism;
        assert!((nb.cov_aomega - 2.0).abs() < 1e-12);
        assert!((nb.cov_atheta_own - 4.0 / 3.0).abs() < 1e-12);
        assert!((nb.cov_atheta_other - 2.0 / 3.0).abs() < 1e-12);
        assert!(obedience_residuals(&nb, &g, &p).iter().all(|x| x.abs() < 1e-12));
        let mg = psd_margins(&nb, &p, 2).unwrap();
        assert!(mg.m1.abs() < 1e-12 && mg.m2.abs() < 1e-12);

        // Independent closed forms for the action moments.
        for (n, r) in [(2usize, -0.4), (3, 0.3), (4, -0.2)] {
            let g = GameSpec::new(n, r, 1.3, -0.7).unwrap();
            let p = Prior::new(0.0, 1.7, 0.0, 0.6).unwrap();
            let m = nash_covariances(&g, &p).unwrap().mechanism;
            let nf = n as f64;
            let (s, t) = (g.s, g.t);
            let agg = 1.0 - (nf - 1.0) * r;
            let d = (1.0 + r).powi(2) * agg * agg;
            let var_a = s * s * 0.6 / (agg * agg) + t * t * 1.7 * ((1.0 - (nf - 2.0) * r).powi(2) + (nf - 1.0) * r * r) / d;
            let cov_aa = s * s * 0.6 / (agg * agg)
                + (r * t * t * (1.0 - (nf - 2.0) * r) * 2.0 * 1.7 + r * r * t * t * (nf - 2.0) * 1.7) / d;
            assert!((m.var_a - var_a).abs() < 1e-12);
            assert!((m.cov_aa - cov_aa).abs() < 1e-12);
        }

        let g0 = GameSpec::new(3, 0.0, 2.0, 0.5).unwrap();
        let n0 = nash_covariances(&g0, &p).unwrap().mechanism;
        assert_eq!((n0.cov_aomega, n0.cov_atheta_own, n0.cov_atheta_other), (2.0, 0.5, 0.0));
    }

    #[test]
    fn revenue_examples() {
        let g = GameSpec::new(2, -0.5, 1.0, -1.0).unwrap();
        let p = unit();
        let rep = solve_revenue(&g, &p).unwrap();
        assert!((rep.objective_value - 2.0 * rep.expected_payment).abs() < 1e-12);
        assert!((rep.objective_value - 1.6320992).abs() < 1e-6);
        assert!(kkt_residuals(&rep, &g, &p).unwrap().max_abs() < 1e-9);
        let err = solve_revenue(&GameSpec::new(2, 0.3, 1.0, 1.0).unwrap(), &p).unwrap_err();
        assert!(err.to_string().contains("revenue solver requires r<0"));

        for k in 1..=16 {
            let g = GameSpec::new(2, -0.05 * k as f64 - 0.05, 1.0, 1.0).unwrap();
            for vt in [0.007, 0.1, 1.0] {
                let p = Prior::new(0.0, vt, 0.0, 1.0).unwrap();
                let rev = solve_revenue(&g, &p).unwrap();
                let wel = solve_welfare(&g, &p).unwrap();
                let wel_rev = wel.mechanism.var_a - g.t * wel.mechanism.cov_atheta_own;
                assert!(rev.objective_value >= wel_rev - 1e-10);
                assert!(kkt_residuals(&rev, &g, &p).unwrap().max_abs() < 1e-9);
            }
        }
    }

    #[test]
    fn revenue_randomized_branch_direction() {
        // Small information ratio puts the revenue optimum in the randomized branch.
        let g = GameSpec::new(2, -0.45, 1.0, 1.0).unwrap();
        let p = Prior::new(0.0, 0.007, 0.0, 1.0).unwrap();
        assert!(threshold_value_revenue(&g).unwrap() > 0.007);
        let rep = solve_revenue(&g, &p).unwrap();
        assert_eq!(rep.branch, Branch::Randomized);
        assert!(rep.delta > 0.0);
        let p = Prior::new(0.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(solve_revenue(&g, &p).unwrap().branch, Branch::Deterministic);
    }

    #[test]
    fn zero_sensitivities() {
        for r in [-0.5, 0.5] {
            let g = GameSpec::new(2, r, 0.0, 0.0).unwrap();
            let rep = solve_welfare(&g, &unit()).unwrap();
            assert_eq!(rep.mechanism.var_a, 0.0);
            assert!(kkt_residuals(&rep, &g, &unit()).unwrap().max_abs() < 1e-12);
        }
        for (s, t) in [(0.0, 1.0), (1.0, 0.0)] {
            for r in [-0.6, -0.2, 0.3] {
                let g = GameSpec::new(3, r, s, t).unwrap();
                let rep = solve_welfare(&g, &unit()).unwrap();
                assert!(kkt_residuals(&rep, &g, &unit()).unwrap().max_abs() < 1e-9, "{r} {s} {t}");
                assert!(ic_margin(&rep.mechanism, &g, &unit()) >= -1e-12);
            }
        }
    }

    #[test]
    fn welfare_dominates_benchmarks() {
        for r in [-0.8, -0.45, -0.1, 0.1, 0.4] {
            for vt in [0.007, 0.3, 2.0] {
                let g = GameSpec::new(2, r, 1.0, 1.0).unwrap();
                let p = Prior::new(1.0, vt, 2.0, 1.0).unwrap();
                let w = solve_welfare(&g, &p).unwrap().welfare;
                let nash = welfare(&nash_covariances(&g, &p).unwrap().mechanism, 2);
                let bn = welfare(&crate::game::bayes_nash_mechanism(&g, &p).unwrap(), 2);
                assert!(w >= nash - 1e-10 && w >= bn - 1e-10);
            }
        }
    }
}
