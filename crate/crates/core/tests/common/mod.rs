#![allow(dead_code)]

use infosell::{GameSpec, Prior, SymMechanism};
use rand::Rng;

/// Obedient symmetric mechanism built from free `(σ_{aθi}, σ_{aω}, σ_{aa})`.
/// Requires `r ≠ 0`.
pub fn obedient_from(game: &GameSpec, prior: &Prior, own: f64, aw: f64, aa: f64) -> SymMechanism {
    let (n, r, s, t) = (game.n as f64, game.r, game.s, game.t);
    let other = (own - t * prior.var_theta) / ((n - 1.0) * r);
    SymMechanism {
        mu_a: game.mean_action(prior),
        var_a: (n - 1.0) * r * aa + s * aw + t * own,
        cov_aa: aa,
        cov_atheta_own: own,
        cov_atheta_other: other,
        cov_aomega: aw,
    }
}

/// Range of `σ_{aa}` for which both PSD margins of `obedient_from` are nonnegative.
pub fn aa_interval(game: &GameSpec, prior: &Prior, own: f64, aw: f64) -> (f64, f64) {
    let n = game.n as f64;
    let m = obedient_from(game, prior, own, aw, 0.0);
    // Both margins are affine in σ_{aa}; read off slope and intercept.
    let d1 = m.var_a - (m.cov_atheta_own - m.cov_atheta_other).powi(2) / prior.var_theta;
    let d2 = m.var_a
        - (m.cov_atheta_own + (n - 1.0) * m.cov_atheta_other).powi(2) / prior.var_theta
        - n * aw * aw / prior.var_omega;
    let k1 = (n - 1.0) * game.r - 1.0; // slope of m1, negative
    let k2 = (n - 1.0) * game.r + (n - 1.0); // slope of m2, positive
    (-d2 / k2, -d1 / k1)
}

/// Random game with `r ∈ (−0.9, f − 0.05) \ (−0.02, 0.02)`, random signs of `s, t`.
pub fn random_game<R: Rng>(rng: &mut R) -> GameSpec {
    let n = rng.random_range(2..=5);
    let f = 1.0 / (n as f64 - 1.0);
    let r = loop {
        let r = rng.random_range(-0.9..f - 0.05);
        if r.abs() > 0.02 {
            break r;
        }
    };
    let sign = |rng: &mut R| if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let s = sign(rng) * rng.random_range(0.2..2.0);
    let t = sign(rng) * rng.random_range(0.2..2.0);
    GameSpec::new(n, r, s, t).unwrap()
}

pub fn random_prior<R: Rng>(rng: &mut R) -> Prior {
    Prior::new(
        rng.random_range(-3.0..3.0),
        rng.random_range(0.05..4.0),
        rng.random_range(-3.0..3.0),
        rng.random_range(0.05..4.0),
    )
    .unwrap()
}

/// Rejection sampler over the reduced feasible set. The search box is wide
/// enough to cover every feasible point for the parameter ranges used here.
pub fn random_feasible<R: Rng>(game: &GameSpec, prior: &Prior, rng: &mut R) -> SymMechanism {
    let scale = 1.0 / (1.0 + game.r).min(1.0 / (game.n as f64 - 1.0) - game.r);
    let bx = 6.0 * scale * (game.t.abs() * prior.var_theta + game.s.abs() * (prior.var_omega * prior.var_theta).sqrt());
    let by = 6.0 * scale * game.s.abs() * prior.var_omega;
    loop {
        let own = rng.random_range(-bx..bx);
        let aw = rng.random_range(-by..by);
        let (lo, hi) = aa_interval(game, prior, own, aw);
        if lo <= hi {
            let aa = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            return obedient_from(game, prior, own, aw, aa);
        }
    }
}
