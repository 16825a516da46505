//! Obedience, truthfulness, incentive compatibility, payments and participation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameSpec, Prior};
use crate::mechanism::{psd_margins, ratio, sq_ratio, FullMechanism, SymMechanism};

/// Default certification tolerance.
pub const CERT_TOL: f64 = 1e-8;

/// `(mean, variance, type-covariance)` residuals of the symmetric obedience
/// equations. All zero iff the mechanism is obedient.
pub fn obedience_residuals(sym: &SymMechanism, game: &GameSpec, prior: &Prior) -> [f64; 3] {
    let (r, s, t) = (game.r, game.s, game.t);
    let m = game.n_f64() - 1.0;
    [
        sym.mu_a - game.mean_action(prior),
        sym.var_a - m * r * sym.cov_aa - s * sym.cov_aomega - t * sym.cov_atheta_own,
        sym.cov_atheta_own - m * r * sym.cov_atheta_other - t * prior.var_theta,
    ]
}

/// Per-player residuals of the general obedience equations, laid out as
/// `n` mean residuals, then `n` variance residuals, then `n` type residuals.
pub fn obedience_residuals_full(full: &FullMechanism, game: &GameSpec, prior: &Prior) -> Result<Vec<f64>> {
    let n = full.n();
    if n != game.n {
        return Err(Error::Dimension(format!("mechanism has n = {n}, game has n = {}", game.n)));
    }
    let (r, s, t) = (game.r, game.s, game.t);
    let (k, mu) = (&full.k, &full.mu);
    let w = full.omega();
    let mut out = vec![0.0; 3 * n];
    for i in 0..n {
        let others = |f: &dyn Fn(usize) -> f64| (0..n).filter(|&j| j != i).map(f).sum::<f64>();
        out[i] = mu[i] - r * others(&|j| mu[j]) - s * prior.mu_omega - t * prior.mu_theta;
        out[n + i] = k[(i, i)] - r * others(&|j| k[(i, j)]) - s * k[(i, w)] - t * k[(i, full.theta(i))];
        out[2 * n + i] = k[(full.theta(i), i)] - r * others(&|j| k[(full.theta(i), j)]) - t * prior.var_theta;
    }
    Ok(out)
}

/// `t·σ_{aθi}`; truthful reporting is optimal under obedient play iff `≥ 0`.
pub fn truthfulness_margin(sym: &SymMechanism, game: &GameSpec) -> f64 {
    game.t * sym.cov_atheta_own
}

/// `t·σ_{aθi} − t²σ_θ²`; the mechanism is incentive compatible iff `≥ 0`.
pub fn ic_margin(sym: &SymMechanism, game: &GameSpec, prior: &Prior) -> f64 {
    game.t * sym.cov_atheta_own - game.t * game.t * prior.var_theta
}

/// Best action after reporting `theta_reported` when the true type is `theta_true`.
pub fn optimal_double_deviation(game: &GameSpec, theta_true: f64, theta_reported: f64, a_recommended: f64) -> f64 {
    a_recommended + game.t * (theta_true - theta_reported)
}

/// Payment `p(θ) = c0 + b·x + c·x²` with `x = θ − μ_θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaymentSchedule {
    pub mu_theta: f64,
    pub c0: f64,
    /// `σ_{aθi}/σ_θ² − t`, so that `p'(θ) = slope_factor·E[a|θ]`.
    pub slope_factor: f64,
    pub linear_coeff: f64,
    pub quadratic_coeff: f64,
    /// `E[a|θ] = mu_a + gain·x`.
    pub mu_a: f64,
    pub gain: f64,
}

impl PaymentSchedule {
    /// Builds the schedule without checking incentive compatibility. Useful for
    /// pricing mechanisms that are known to be manipulable.
    pub fn unchecked(sym: &SymMechanism, game: &GameSpec, prior: &Prior, c0: Option<f64>) -> Result<Self> {
        let g = ratio(sym.cov_atheta_own, prior.var_theta, "cov_atheta_own")?;
        let slope_factor = g - game.t;
        let c0 = match c0 {
            Some(c) => c,
            None => max_constant(sym, prior)?,
        };
        Ok(PaymentSchedule {
            mu_theta: prior.mu_theta,
            c0,
            slope_factor,
            linear_coeff: sym.mu_a * slope_factor,
            quadratic_coeff: 0.5 * g * slope_factor,
            mu_a: sym.mu_a,
            gain: g,
        })
    }

    pub fn value(&self, theta: f64) -> f64 {
        let x = theta - self.mu_theta;
        self.c0 + x * (self.linear_coeff + x * self.quadratic_coeff)
    }

    pub fn derivative(&self, theta: f64) -> f64 {
        let x = theta - self.mu_theta;
        self.linear_coeff + 2.0 * self.quadratic_coeff * x
    }

    pub fn conditional_mean_action(&self, theta: f64) -> f64 {
        self.mu_a + self.gain * (theta - self.mu_theta)
    }

    /// Smallest payment over all types, `None` when unbounded below.
    pub fn pointwise_min(&self) -> Option<f64> {
        if self.quadratic_coeff > 0.0 {
            Some(self.c0 - self.linear_coeff * self.linear_coeff / (4.0 * self.quadratic_coeff))
        } else if self.quadratic_coeff == 0.0 && self.linear_coeff == 0.0 {
            Some(self.c0)
        } else {
            None
        }
    }
}

/// IR-maximal constant `½(σ_a² − σ_{aθi}²/σ_θ²) = ½Var(a|θ)`.
pub fn max_constant(sym: &SymMechanism, prior: &Prior) -> Result<f64> {
    Ok(0.5 * (sym.var_a - sq_ratio(sym.cov_atheta_own, prior.var_theta, "cov_atheta_own")?))
}

/// Payment schedule of an incentive-compatible mechanism. Without `constant`,
/// the IR-maximal constant is used.
pub fn payment_schedule(sym: &SymMechanism, game: &GameSpec, prior: &Prior, constant: Option<f64>) -> Result<PaymentSchedule> {
    let margin = ic_margin(sym, game, prior);
    let scale = 1f64.max(game.t * game.t * prior.var_theta);
    if margin < -CERT_TOL * scale {
        return Err(Error::Incentive(format!("ic_margin = {margin:e} < 0")));
    }
    if sym.cov_atheta_own == 0.0 && prior.var_theta > 0.0 && game.t != 0.0 {
        return Err(Error::Incentive("cov_atheta_own = 0 with t ≠ 0 leaves the payment undefined".into()));
    }
    PaymentSchedule::unchecked(sym, game, prior, constant)
}

/// `E[p(θ)] = ½(σ_a² − tσ_{aθi})` at the IR-maximal constant.
pub fn expected_payment(sym: &SymMechanism, game: &GameSpec) -> f64 {
    0.5 * (sym.var_a - game.t * sym.cov_atheta_own)
}

/// Utility from the Bayes-Nash outside option at type `theta`.
pub fn reservation_utility(game: &GameSpec, prior: &Prior, theta: f64) -> f64 {
    let a = game.mean_action(prior) + game.t * (theta - prior.mu_theta);
    0.5 * a * a
}

/// Expected utility of an obedient, truthful player of type `theta`, before payment.
pub fn interim_utility(sym: &SymMechanism, prior: &Prior, theta: f64) -> Result<f64> {
    let g = ratio(sym.cov_atheta_own, prior.var_theta, "cov_atheta_own")?;
    let mean = sym.mu_a + g * (theta - prior.mu_theta);
    let var = sym.var_a - g * sym.cov_atheta_own;
    Ok(0.5 * (mean * mean + var))
}

/// `½Var(a|θ) − c0`; nonnegative iff every type participates.
pub fn ir_headroom(sym: &SymMechanism, prior: &Prior, c0: f64) -> Result<f64> {
    Ok(max_constant(sym, prior)? - c0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncentiveReport {
    pub obedience_mean_residual: f64,
    pub obedience_var_residuals: [f64; 2],
    pub psd_margins: [f64; 2],
    pub truthfulness_margin: f64,
    pub ic_margin: f64,
    pub ir_headroom: f64,
    pub expected_payment: f64,
    pub payment_min: Option<f64>,
    pub certified: bool,
    pub failures: Vec<String>,
}

/// Checks obedience, feasibility, truthfulness, IC and IR. Residuals are
/// compared against `tol·max(1, |σ_a²|)`, margins against `−tol` on the same scale.
pub fn certify(sym: &SymMechanism, game: &GameSpec, prior: &Prior, c0: Option<f64>, tol: f64) -> Result<IncentiveReport> {
    game.validate()?;
    prior.validate()?;
    if !sym.is_finite() {
        return Err(Error::InvalidArgument("mechanism fields must be finite".into()));
    }
    let res = obedience_residuals(sym, game, prior);
    let margins = psd_margins(sym, prior, game.n)?;
    let scale = 1f64.max(sym.var_a.abs());
    let bound = tol * scale;
    let mut failures = Vec::new();
    for (name, v) in ["obedience_mean_residual", "obedience_var_residual", "obedience_type_residual"].iter().zip(res) {
        if v.abs() > bound {
            failures.push(format!("{name} = {v:e}"));
        }
    }
    let margin_bound = -tol * margins.scale.max(scale);
    if margins.m1 < margin_bound {
        failures.push(format!("psd_m1 = {:e} < 0", margins.m1));
    }
    if margins.m2 < margin_bound {
        failures.push(format!("psd_m2 = {:e} < 0", margins.m2));
    }
    let truth = truthfulness_margin(sym, game);
    let ic = ic_margin(sym, game, prior);
    if truth < -bound {
        failures.push(format!("truthfulness_margin = {truth:e} < 0"));
    }
    if ic < -bound {
        failures.push(format!("ic_margin = {ic:e} < 0"));
    }
    let schedule = PaymentSchedule::unchecked(sym, game, prior, c0)?;
    let headroom = ir_headroom(sym, prior, schedule.c0)?;
    if headroom < -bound {
        failures.push(format!("ir_headroom = {headroom:e} < 0"));
    }
    Ok(IncentiveReport {
        obedience_mean_residual: res[0],
        obedience_var_residuals: [res[1], res[2]],
        psd_margins: [margins.m1, margins.m2],
        truthfulness_margin: truth,
        ic_margin: ic,
        ir_headroom: headroom,
        expected_payment: schedule.c0 - max_constant(sym, prior)? + expected_payment(sym, game),
        payment_min: schedule.pointwise_min(),
        certified: failures.is_empty(),
        failures,
    })
}
