//! Quadratic game primitives.
//!
//! Player `i` has utility `-a_i²/2 + r·a_i·Σ_{j≠i} a_j + (s·ω + t·θ_i)·a_i`, so the
//! best response is the linear map `a_i = r·Σ_{j≠i} a_j + s·ω + t·θ_i`. Players
//! are indexed from 0 in this crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::SymMechanism;

/// Payoff primitives `(n, r, s, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub n: usize,
    pub r: f64,
    pub s: f64,
    pub t: f64,
}

impl GameSpec {
    /// Builds a game, rejecting `n < 2`, non-finite coefficients and the two
    /// values `r ∈ {-1, 1/(n-1)}` at which the best-response system is singular.
    pub fn new(n: usize, r: f64, s: f64, t: f64) -> Result<Self> {
        let game = GameSpec { n, r, s, t };
        game.validate()?;
        Ok(game)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidGame(format!("n = {} but at least 2 players are required", self.n)));
        }
        if !(self.r.is_finite() && self.s.is_finite() && self.t.is_finite()) {
            return Err(Error::InvalidGame("coefficients must be finite".into()));
        }
        if self.r == -1.0 || self.r == self.f() {
            return Err(Error::Singular(format!(
                "best-response system is singular at r = {} for n = {}",
                self.r, self.n
            )));
        }
        Ok(())
    }

    /// The aggregation constant `1/(n-1)`.
    pub fn f(&self) -> f64 {
        1.0 / (self.n as f64 - 1.0)
    }

    pub fn n_f64(&self) -> f64 {
        self.n as f64
    }

    /// Solver entry points require `r ∈ (-1, 1/(n-1))`.
    pub fn require_stable(&self) -> Result<()> {
        self.validate()?;
        if self.r > -1.0 && self.r < self.f() {
            Ok(())
        } else {
            Err(Error::Domain { r: self.r, domain: format!("(-1, {})", self.f()) })
        }
    }

    pub fn best_response(&self, sum_others: f64, omega: f64, theta_i: f64) -> f64 {
        self.r * sum_others + self.s * omega + self.t * theta_i
    }

    pub fn utility(&self, actions: &[f64], i: usize, omega: f64, theta_i: f64) -> Result<f64> {
        if actions.len() != self.n {
            return Err(Error::Dimension(format!("{} actions for n = {}", actions.len(), self.n)));
        }
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        let a_i = actions[i];
        let others: f64 = actions.iter().sum::<f64>() - a_i;
        Ok(utility_of(self, a_i, others, omega, theta_i))
    }

    /// Unique Nash equilibrium of the complete-information game.
    pub fn complete_info_nash(&self, theta: &[f64], omega: f64) -> Result<Vec<f64>> {
        self.validate()?;
        if theta.len() != self.n {
            return Err(Error::Dimension(format!("{} types for n = {}", theta.len(), self.n)));
        }
        let (r, s, t) = (self.r, self.s, self.t);
        let agg = 1.0 - (self.n_f64() - 1.0) * r;
        let total: f64 = theta.iter().sum();
        let n = self.n_f64();
        Ok(theta
            .iter()
            .map(|&th| {
                // Σ_{j≠i}(θ_j − θ_i) = total − n·θ_i
                (s * omega + t * th) / agg + r * t * (total - n * th) / ((1.0 + r) * agg)
            })
            .collect())
    }

    /// Mean recommended action forced by obedience under a symmetric prior.
    pub fn mean_action(&self, prior: &Prior) -> f64 {
        (self.s * prior.mu_omega + self.t * prior.mu_theta) / (1.0 - (self.n_f64() - 1.0) * self.r)
    }
}

pub(crate) fn utility_of(game: &GameSpec, a_i: f64, sum_others: f64, omega: f64, theta_i: f64) -> f64 {
    -0.5 * a_i * a_i + game.r * a_i * sum_others + (game.s * omega + game.t * theta_i) * a_i
}

/// Symmetric independent Gaussian prior over types and the state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    pub mu_theta: f64,
    pub var_theta: f64,
    pub mu_omega: f64,
    pub var_omega: f64,
}

impl Prior {
    pub fn new(mu_theta: f64, var_theta: f64, mu_omega: f64, var_omega: f64) -> Result<Self> {
        let prior = Prior { mu_theta, var_theta, mu_omega, var_omega };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.mu_theta, self.var_theta, self.mu_omega, self.var_omega];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidPrior("all prior moments must be finite".into()));
        }
        if self.var_theta < 0.0 || self.var_omega < 0.0 {
            return Err(Error::InvalidPrior("variances must be nonnegative".into()));
        }
        Ok(())
    }

    /// Solvers need a nondegenerate prior.
    pub fn require_nondegenerate(&self) -> Result<()> {
        self.validate()?;
        if self.var_theta > 0.0 && self.var_omega > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidPrior("var_theta and var_omega must be strictly positive".into()))
        }
    }

    /// Standard normal prior on both types and the state.
    pub fn standard() -> Self {
        Prior { mu_theta: 0.0, var_theta: 1.0, mu_omega: 0.0, var_omega: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetKind {
    Cournot,
    Bertrand,
    Beauty,
}

impl std::str::FromStr for PresetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cournot" => Ok(PresetKind::Cournot),
            "bertrand" => Ok(PresetKind::Bertrand),
            "beauty" | "beauty_contest" | "beauty-contest" => Ok(PresetKind::Beauty),
            other => Err(Error::InvalidGame(format!("unknown preset '{other}'"))),
        }
    }
}

/// Classic economies. Cournot and Bertrand take `r` from the caller (it must be
/// negative, respectively positive); the beauty contest fixes `r = 1/(3(n-1))`
/// and ignores `r`.
pub fn preset(kind: PresetKind, n: usize, r: Option<f64>) -> Result<GameSpec> {
    match kind {
        PresetKind::Cournot => {
            let r = r.ok_or_else(|| Error::InvalidGame("cournot preset needs r".into()))?;
            if r >= 0.0 {
                return Err(Error::InvalidGame(format!("cournot requires r < 0, got {r}")));
            }
            GameSpec::new(n, r, 1.0, -1.0)
        }
        PresetKind::Bertrand => {
            let r = r.ok_or_else(|| Error::InvalidGame("bertrand preset needs r".into()))?;
            if r <= 0.0 {
                return Err(Error::InvalidGame(format!("bertrand requires r > 0, got {r}")));
            }
            GameSpec::new(n, r, 1.0, 0.5)
        }
        PresetKind::Beauty => {
            if n < 2 {
                return Err(Error::InvalidGame(format!("n = {n} but at least 2 players are required")));
            }
            GameSpec::new(n, 1.0 / (3.0 * (n as f64 - 1.0)), 1.0 / 3.0, 1.0 / 3.0)
        }
    }
}

/// The mechanism induced by the Bayes-Nash equilibrium in which each player only
/// observes their own type: `a_i = μ_a + t(θ_i − μ_θ)`.
pub fn bayes_nash_mechanism(game: &GameSpec, prior: &Prior) -> Result<SymMechanism> {
    game.require_stable()?;
    prior.validate()?;
    let t = game.t;
    Ok(SymMechanism {
        mu_a: game.mean_action(prior),
        var_a: t * t * prior.var_theta,
        cov_aa: 0.0,
        cov_atheta_own: t * prior.var_theta,
        cov_atheta_other: 0.0,
        cov_aomega: 0.0,
    })
}
