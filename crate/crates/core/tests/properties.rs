mod common;

use infosell::design::{
    compare_to_nash, ellipse_value, is_deterministic_branch, kkt_residuals, nash_covariances, solve, threshold_value,
};
use infosell::game::bayes_nash_mechanism;
use infosell::incentives::{ic_margin, interim_utility, obedience_residuals, reservation_utility};
use infosell::mechanism::{assemble_full, psd_margins};
use infosell::oracle::brute_force_optimize;
use infosell::{Branch, GameSpec, Objective, Prior};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn instance(seed: u64) -> (GameSpec, Prior, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = common::random_game(&mut rng);
    let p = common::random_prior(&mut rng);
    (g, p, rng)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn welfare_optimum_signs_and_comparisons(seed in any::<u64>()) {
        let (g, p, _) = instance(seed);
        let rep = solve(&g, &p, Objective::Welfare).unwrap();
        let m = rep.mechanism;
        prop_assert_eq!(sign(m.cov_aomega), sign(g.s));
        prop_assert_eq!(sign(m.cov_atheta_own), sign(g.t));
        prop_assert_eq!(sign(m.cov_atheta_other), sign(g.r * g.t));
        prop_assert!(ic_margin(&m, &g, &p) >= -1e-9 * (1.0 + g.t * g.t * p.var_theta));
        let cmp = compare_to_nash(&rep, &g, &p).unwrap();
        prop_assert!(cmp.all(), "{:?}", cmp);
    }

    #[test]
    fn branch_report_is_consistent(seed in any::<u64>()) {
        let (g, p, _) = instance(seed);
        let rep = solve(&g, &p, Objective::Welfare).unwrap();
        let m = psd_margins(&rep.mechanism, &p, g.n).unwrap();
        prop_assert!(m.feasible());
        match rep.branch {
            Branch::Deterministic => {
                prop_assert_eq!(rep.delta, 0.0);
                prop_assert!(m.deterministic());
            }
            Branch::Randomized => {
                prop_assert!(rep.delta > 0.0);
                prop_assert!(!m.deterministic());
                prop_assert_eq!(rep.lambda, 0.0);
            }
        }
        if g.r < 0.0 {
            let det = is_deterministic_branch(&g, &p).unwrap();
            prop_assert_eq!(det, rep.branch == Branch::Deterministic);
        } else {
            prop_assert_eq!(rep.branch, Branch::Deterministic);
        }
        let k = kkt_residuals(&rep, &g, &p).unwrap();
        prop_assert!(k.max_abs() <= 1e-9, "{:?}", k);
    }

    #[test]
    fn optimum_dominates_random_feasible_points(seed in any::<u64>()) {
        let (g, p, mut rng) = instance(seed);
        let w = solve(&g, &p, Objective::Welfare).unwrap().mechanism;
        let rev = if g.r < 0.0 { Some(solve(&g, &p, Objective::Revenue).unwrap().mechanism) } else { None };
        for _ in 0..20 {
            let m = common::random_feasible(&g, &p, &mut rng);
            let tol = 1e-9 * (1.0 + m.var_a.abs());
            prop_assert!(m.var_a <= w.var_a + tol);
            if let Some(r) = &rev {
                prop_assert!(m.var_a - g.t * m.cov_atheta_own <= r.var_a - g.t * r.cov_atheta_own + tol);
            }
            // Every feasible obedient point lies inside the ellipse.
            let e = ellipse_value(&g, &p, m.cov_atheta_own, m.cov_aomega).unwrap();
            prop_assert!(e <= 1e-9 * (1.0 + m.var_a.abs()), "ellipse value {}", e);
        }
    }

    #[test]
    fn deterministic_optimum_sits_on_the_ellipse(seed in any::<u64>()) {
        let (g, p, _) = instance(seed);
        let rep = solve(&g, &p, Objective::Welfare).unwrap();
        let m = rep.mechanism;
        let e = ellipse_value(&g, &p, m.cov_atheta_own, m.cov_aomega).unwrap();
        let scale = 1.0 + m.var_a.abs() + m.cov_aomega.powi(2) / p.var_omega;
        match rep.branch {
            Branch::Deterministic => prop_assert!(e.abs() <= 1e-8 * scale, "{}", e),
            Branch::Randomized => prop_assert!(e < 0.0),
        }
    }

    #[test]
    fn solutions_are_obedient(seed in any::<u64>()) {
        let (g, p, _) = instance(seed);
        let mut objs = vec![Objective::Welfare];
        if g.r < 0.0 {
            objs.push(Objective::Revenue);
        }
        for obj in objs {
            let m = solve(&g, &p, obj).unwrap().mechanism;
            let res = obedience_residuals(&m, &g, &p);
            let scale = 1.0 + m.var_a.abs() + m.mu_a.abs();
            prop_assert!(res.iter().all(|x| x.abs() <= 1e-9 * scale), "{:?}", res);
        }
    }

    #[test]
    fn complete_information_nash_is_a_fixed_point(seed in any::<u64>()) {
        let (g, _, mut rng) = instance(seed);
        let theta: Vec<f64> = (0..g.n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let omega = rng.random_range(-5.0..5.0);
        let a = g.complete_info_nash(&theta, omega).unwrap();
        let total: f64 = a.iter().sum();
        for i in 0..g.n {
            let br = g.best_response(total - a[i], omega, theta[i]);
            prop_assert!((br - a[i]).abs() <= 1e-10 * (1.0 + a[i].abs()));
        }
    }

    #[test]
    fn interim_utility_clears_the_outside_option_at_the_optimum(seed in any::<u64>()) {
        let (g, p, _) = instance(seed);
        let m = solve(&g, &p, Objective::Welfare).unwrap().mechanism;
        let c0 = infosell::incentives::max_constant(&m, &p).unwrap();
        for k in -6..=6 {
            let theta = p.mu_theta + k as f64 * p.var_theta.sqrt();
            let sched = infosell::incentives::payment_schedule(&m, &g, &p, Some(c0)).unwrap();
            let net = interim_utility(&m, &p, theta).unwrap() - sched.value(theta) - reservation_utility(&g, &p, theta);
            prop_assert!(net >= -1e-9 * (1.0 + m.var_a.abs() + theta * theta), "θ = {}: {}", theta, net);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solver_matches_the_grid_oracle(seed in any::<u64>()) {
        let (g, p, _) = instance(seed);
        let mut objs = vec![Objective::Welfare];
        if g.r < 0.0 {
            objs.push(Objective::Revenue);
        }
        for obj in objs {
            let rep = solve(&g, &p, obj).unwrap();
            let orc = brute_force_optimize(&g, &p, obj, 12).unwrap();
            let tol = 1e-6 * (1.0 + rep.objective_value.abs());
            prop_assert!((rep.objective_value - orc.best_objective).abs() <= tol,
                "{:?} {:?} {:?}: {} vs {}", obj, g, p, rep.objective_value, orc.best_objective);
        }
    }
}

#[test]
fn best_response_iteration_converges_to_nash() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let n = rng.random_range(2..=5);
        let bound = 0.9 / (n as f64 - 1.0);
        let g = GameSpec::new(n, rng.random_range(-bound..bound), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
            .unwrap();
        let theta: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let omega = rng.random_range(-3.0..3.0);
        let mut a = vec![0.0; n];
        for _ in 0..2000 {
            let total: f64 = a.iter().sum();
            a = (0..n).map(|i| g.best_response(total - a[i], omega, theta[i])).collect();
        }
        let nash = g.complete_info_nash(&theta, omega).unwrap();
        for (x, y) in a.iter().zip(&nash) {
            assert!((x - y).abs() < 1e-9, "{g:?}: {x} vs {y}");
        }
    }
}

#[test]
fn threshold_is_unimodal_for_two_players() {
    let f = |r: f64| threshold_value(&GameSpec::new(2, r, 1.0, 1.0).unwrap()).unwrap();
    let rs: Vec<f64> = (1..2000).map(|k| -1.0 + (2.0 / 3.0) * k as f64 / 2000.0).collect();
    let vals: Vec<f64> = rs.iter().map(|&r| f(r)).collect();
    let turns = vals.windows(3).filter(|w| (w[1] - w[0]).signum() != (w[2] - w[1]).signum()).count();
    assert_eq!(turns, 1);
    assert!(vals.iter().all(|v| *v > 0.0));
}

/// Sample covariance of two columns.
fn cov(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1.0)
}

#[test]
fn nash_covariances_match_simulated_play() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (n, r, s, t) in [(2, -0.5, 1.0, 1.0), (3, 0.3, -0.7, 1.2), (4, -0.2, 1.5, -0.4)] {
        let g = GameSpec::new(n, r, s, t).unwrap();
        let p = Prior::new(0.3, 0.8, -0.5, 1.7).unwrap();
        let draws = 1_000_000;
        let mut cols: Vec<Vec<f64>> = (0..5).map(|_| Vec::with_capacity(draws)).collect();
        for _ in 0..draws {
            let theta: Vec<f64> = (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    p.mu_theta + p.var_theta.sqrt() * z
                })
                .collect();
            let z: f64 = StandardNormal.sample(&mut rng);
            let omega = p.mu_omega + p.var_omega.sqrt() * z;
            let a = g.complete_info_nash(&theta, omega).unwrap();
            for (c, v) in cols.iter_mut().zip([a[0], a[1], theta[0], theta[1], omega]) {
                c.push(v);
            }
        }
        let nash = nash_covariances(&g, &p).unwrap().mechanism;
        let est = [
            (cov(&cols[0], &cols[0]), nash.var_a),
            (cov(&cols[0], &cols[1]), nash.cov_aa),
            (cov(&cols[0], &cols[2]), nash.cov_atheta_own),
            (cov(&cols[0], &cols[3]), nash.cov_atheta_other),
            (cov(&cols[0], &cols[4]), nash.cov_aomega),
        ];
        // Sampling error of a covariance is at most sqrt(var_x var_y · 2 / N).
        let tol = 5.0 * (2.0 * nash.var_a * (nash.var_a + p.var_theta + p.var_omega) / draws as f64).sqrt();
        for (k, (sample, closed)) in est.iter().enumerate() {
            assert!((sample - closed).abs() < tol, "n={n} r={r} entry {k}: {sample} vs {closed} (tol {tol})");
        }
        let mean = cols[0].iter().sum::<f64>() / draws as f64;
        assert!((mean - g.mean_action(&p)).abs() < 5.0 * (nash.var_a / draws as f64).sqrt());
    }
}

#[test]
fn bayes_nash_sample_moments() {
    let g = GameSpec::new(3, -0.3, 1.0, 0.8).unwrap();
    let p = Prior::new(1.0, 2.0, -1.0, 0.5).unwrap();
    let bn = bayes_nash_mechanism(&g, &p).unwrap();
    let full = assemble_full(&bn, &p, 3).unwrap();
    let draws = 400_000;
    let x = full.sample(draws, 4).unwrap();
    let col = |j: usize| x.column(j).iter().copied().collect::<Vec<f64>>();
    let (a0, a1, th0, om) = (col(full.a(0)), col(full.a(1)), col(full.theta(0)), col(full.omega()));
    let se = |vx: f64, vy: f64| 5.0 * (2.0 * vx * vy / draws as f64).sqrt();
    assert!((cov(&a0, &th0) - g.t * p.var_theta).abs() < se(bn.var_a, p.var_theta));
    assert!((cov(&a0, &a0) - g.t * g.t * p.var_theta).abs() < se(bn.var_a, bn.var_a));
    assert!(cov(&a0, &a1).abs() < se(bn.var_a, bn.var_a));
    assert!(cov(&a0, &om).abs() < se(bn.var_a, p.var_omega));
    let mean = a0.iter().sum::<f64>() / draws as f64;
    assert!((mean - g.mean_action(&p)).abs() < 5.0 * (bn.var_a / draws as f64).sqrt());
}
