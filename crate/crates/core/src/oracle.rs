//! Independent checks for the closed forms: a refined grid search over the
//! reduced feasible set, Monte Carlo deviation tests, and random obedient
//! mechanisms.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{nash_covariances, Objective};
use crate::error::{Error, Result};
use crate::game::{bayes_nash_mechanism, utility_of, GameSpec, Prior};
use crate::incentives::PaymentSchedule;
use crate::mechanism::{assemble_full, psd_margins, to_linear, FullMechanism, GaussianSampler, SymMechanism, EPS_PSD};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub levels: usize,
    /// Grid points per axis (odd keeps the incumbent on the grid).
    pub points: usize,
    pub shrink: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { levels: 5, points: 41, shrink: 8.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// `(σ_{aθi}, σ_{aω}, σ_{aa})`
    pub best_point: [f64; 3],
    pub best_mechanism: SymMechanism,
    pub best_objective: f64,
    /// Final grid pitch, largest over the axes.
    pub resolution: f64,
    pub evaluations: u64,
}

/// Reduced parametrization. For `r ≠ 0` the first free coordinate is `σ_{aθi}`
/// and obedience pins `σ_{aθj}`; at `r = 0` obedience pins `σ_{aθi} = tσ_θ²`
/// and `σ_{aθj}` becomes free instead.
struct Reduced<'a> {
    game: &'a GameSpec,
    prior: &'a Prior,
}

impl Reduced<'_> {
    fn type_covs(&self, u: f64) -> (f64, f64) {
        let (r, t, f) = (self.game.r, self.game.t, self.game.f());
        let vt = self.prior.var_theta;
        if r == 0.0 {
            (t * vt, u)
        } else {
            (u, f * (u - t * vt) / r)
        }
    }

    /// Interval of `σ_{aa}` keeping both PSD margins nonnegative, possibly empty.
    fn fibre(&self, u: f64, y: f64) -> (f64, f64) {
        let (n, r, s, t) = (self.game.n_f64(), self.game.r, self.game.s, self.game.t);
        let (vt, vw) = (self.prior.var_theta, self.prior.var_omega);
        let (own, other) = self.type_covs(u);
        let b = s * y + t * own;
        let a1 = (own - other).powi(2) / vt;
        let a2 = (own + (n - 1.0) * other).powi(2) / vt + n * y * y / vw;
        ((a2 - b) / ((n - 1.0) * (1.0 + r)), (b - a1) / (1.0 - (n - 1.0) * r))
    }

    fn mechanism(&self, u: f64, y: f64, z: f64) -> SymMechanism {
        let (n, r, s, t) = (self.game.n_f64(), self.game.r, self.game.s, self.game.t);
        let (own, other) = self.type_covs(u);
        SymMechanism {
            mu_a: self.game.mean_action(self.prior),
            var_a: (n - 1.0) * r * z + s * y + t * own,
            cov_aa: z,
            cov_atheta_own: own,
            cov_atheta_other: other,
            cov_aomega: y,
        }
    }

    /// `(k1, k2)`: the positive denominators of the fibre bounds, so that
    /// `L ≤ U` iff `k1·(A2 − B) − k2·(B − A1) ≤ 0`.
    fn weights(&self) -> (f64, f64) {
        let (n, r) = (self.game.n_f64(), self.game.r);
        (1.0 - (n - 1.0) * r, (n - 1.0) * (1.0 + r))
    }

    /// The fibre condition written as `a·y² + b·y + c(u) ≤ 0`; returns `(a, b)`.
    fn y_quadratic(&self) -> (f64, f64) {
        let (k1, k2) = self.weights();
        (self.game.n_f64() * k1 / self.prior.var_omega, -self.game.s * (k1 + k2))
    }

    /// Coefficients `[c0, c1, c2]` of `c(u)`. Both type covariances are
    /// affine in `u`, so these follow from two evaluations of `type_covs`.
    fn c_coeffs(&self) -> [f64; 3] {
        let (n, t, vt) = (self.game.n_f64(), self.game.t, self.prior.var_theta);
        let (k1, k2) = self.weights();
        let (own0, oth0) = self.type_covs(0.0);
        let (own1, oth1) = self.type_covs(1.0);
        let (p0, p1) = (own0, own1 - own0);
        let (q0, q1) = (oth0, oth1 - oth0);
        let (e0, e1) = (p0 - q0, p1 - q1);
        let (g0, g1) = (p0 + (n - 1.0) * q0, p1 + (n - 1.0) * q1);
        [
            (k1 * g0 * g0 + k2 * e0 * e0) / vt - t * p0 * (k1 + k2),
            2.0 * (k1 * g0 * g1 + k2 * e0 * e1) / vt - t * p1 * (k1 + k2),
            (k1 * g1 * g1 + k2 * e1 * e1) / vt,
        ]
    }

    /// Range of `u` over which some `σ_{aω}` is feasible.
    fn u_range(&self) -> Result<(f64, f64)> {
        let (a, b) = self.y_quadratic();
        let [c0, c1, c2] = self.c_coeffs();
        let c0 = c0 - b * b / (4.0 * a);
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if c2.is_nan() || c2 <= 0.0 || disc < 0.0 {
            return Err(Error::EmptyGrid("feasible set is empty".into()));
        }
        let root = disc.sqrt();
        Ok(((-c1 - root) / (2.0 * c2), (-c1 + root) / (2.0 * c2)))
    }

    /// Feasible `σ_{aω}` interval at `u`, clamped to a point where rounding
    /// makes the discriminant slightly negative.
    fn y_slice(&self, u: f64) -> (f64, f64) {
        let (a, b) = self.y_quadratic();
        let [c0, c1, c2] = self.c_coeffs();
        let c = c0 + u * (c1 + u * c2);
        let root = (b * b - 4.0 * a * c).max(0.0).sqrt();
        ((-b - root) / (2.0 * a), (-b + root) / (2.0 * a))
    }
}

/// `points` values spanning `[lo, hi]`, endpoints included.
fn span(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 || lo.is_nan() || hi.is_nan() || hi <= lo {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|k| if k + 1 == points { hi } else { lo + step * k as f64 }).collect()
}

/// Window of relative half-width `half` around `centre`, clipped to `[lo, hi]`.
fn window(centre: f64, half: f64, lo: f64, hi: f64) -> (f64, f64) {
    ((centre - half).max(lo), (centre + half).min(hi))
}

/// Multi-level grid search for the best obedient feasible symmetric mechanism.
///
/// The grid runs over `u` (`σ_{aθi}`, or `σ_{aθj}` at `r = 0`), then over the
/// position `v ∈ [0, 1]` inside the feasible `σ_{aω}` slice at that `u`, then
/// across the `σ_{aa}` fibre. Slice and fibre endpoints are always grid points,
/// so boundary optima are reached exactly along those axes.
pub fn brute_force_optimize(game: &GameSpec, prior: &Prior, objective: Objective, levels: usize) -> Result<OracleResult> {
    brute_force_optimize_with(game, prior, objective, OracleOptions { levels, ..OracleOptions::default() })
}

pub fn brute_force_optimize_with(game: &GameSpec, prior: &Prior, objective: Objective, opts: OracleOptions) -> Result<OracleResult> {
    game.require_stable()?;
    prior.require_nondegenerate()?;
    if opts.levels == 0 || opts.points < 2 || opts.shrink <= 1.0 {
        return Err(Error::InvalidArgument("oracle needs levels ≥ 1, points ≥ 2, shrink > 1".into()));
    }
    let red = Reduced { game, prior };
    let t = game.t;
    let value = |m: &SymMechanism| match objective {
        Objective::Welfare => m.var_a,
        Objective::Revenue => m.var_a - t * m.cov_atheta_own,
    };

    let (u_min, u_max) = red.u_range()?;
    let pitch = |a: (f64, f64)| (a.1 - a.0) / (opts.points - 1) as f64;

    // Best `(value, [u, v, z])` on the slice at `u`, refining `v` on its own.
    let slice_best = |u: f64| -> (Option<(f64, [f64; 3])>, u64, f64) {
        let (y_lo, y_hi) = red.y_slice(u);
        let mut local: Option<(f64, [f64; 3])> = None;
        let mut evals = 0u64;
        let mut v_box = (0.0, 1.0);
        let mut v_half = 0.5;
        for _ in 0..opts.levels {
            for v in span(v_box.0, v_box.1, opts.points) {
                let y = y_lo + v * (y_hi - y_lo);
                let (lo, hi) = red.fibre(u, y);
                for z in span(lo, hi, opts.points) {
                    evals += 1;
                    let m = red.mechanism(u, y, z);
                    let feasible = psd_margins(&m, prior, game.n).map(|g| g.feasible()).unwrap_or(false);
                    if !feasible {
                        continue;
                    }
                    let val = value(&m);
                    if local.is_none_or(|(bv, _)| val > bv) {
                        local = Some((val, [u, v, z]));
                    }
                }
            }
            let Some((_, p)) = local else { break };
            v_half /= opts.shrink;
            v_box = window(p[1], v_half, 0.0, 1.0);
        }
        (local, evals, pitch(v_box) * opts.shrink * (y_hi - y_lo))
    };

    let mut u_box = (u_min, u_max);
    let mut u_half = 0.5 * (u_max - u_min);
    let mut best: Option<(f64, [f64; 3])> = None;
    let mut evaluations = 0u64;
    let mut resolution = 0.0f64;
    for _ in 0..opts.levels {
        let level = span(u_box.0, u_box.1, opts.points).into_par_iter().map(slice_best).collect::<Vec<_>>();
        let mut y_res = 0.0f64;
        for (cand, evals, res) in level {
            evaluations += evals;
            y_res = y_res.max(res);
            if let Some((val, p)) = cand {
                if best.is_none_or(|(bv, _)| val > bv) {
                    best = Some((val, p));
                }
            }
        }
        let Some((_, p)) = best else {
            return Err(Error::EmptyGrid("no feasible point in the search box".into()));
        };
        resolution = pitch(u_box).max(y_res);
        u_half /= opts.shrink;
        u_box = window(p[0], u_half, u_min, u_max);
    }
    let (val, p) = best.expect("at least one level ran");
    let (y_lo, y_hi) = red.y_slice(p[0]);
    let m = red.mechanism(p[0], y_lo + p[1] * (y_hi - y_lo), p[2]);
    Ok(OracleResult {
        best_point: [m.cov_atheta_own, m.cov_aomega, m.cov_aa],
        best_mechanism: m,
        best_objective: val,
        resolution,
        evaluations,
    })
}

/// Affine deviation for player 0: report `θ + report_shift`, then play
/// `kappa·a + offset` where `a` is the recommendation received.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineDeviation {
    pub kappa: f64,
    pub offset: f64,
    pub report_shift: f64,
}

impl AffineDeviation {
    pub const IDENTITY: AffineDeviation = AffineDeviation { kappa: 1.0, offset: 0.0, report_shift: 0.0 };

    pub fn action(kappa: f64, offset: f64) -> Self {
        AffineDeviation { kappa, offset, report_shift: 0.0 }
    }

    /// Misreport by `shift` and correct the action by `−t·shift`.
    pub fn double(game: &GameSpec, shift: f64) -> Self {
        AffineDeviation { kappa: 1.0, offset: -game.t * shift, report_shift: shift }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl McEstimate {
    /// Whether `mean` exceeds `k` standard errors.
    pub fn significant_above(&self, k: f64) -> bool {
        self.mean > k * self.std_error
    }
}

/// Running mean and sum of squared deviations, merged in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Moments) {
        if o.count == 0.0 {
            return;
        }
        let total = self.count + o.count;
        let d = o.mean - self.mean;
        self.mean += d * o.count / total;
        self.m2 += o.m2 + d * d * self.count * o.count / total;
        self.count = total;
    }

    fn estimate(&self) -> McEstimate {
        let se = if self.count > 1.0 { (self.m2 / (self.count - 1.0) / self.count).sqrt() } else { f64::NAN };
        McEstimate { mean: self.mean, std_error: se }
    }
}

/// Samples per RNG stream. Chunk `k` draws from stream `k` of the root seed, so
/// results do not depend on the number of worker threads.
pub const CHUNK: usize = 1 << 16;

fn chunk_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

/// Draws `(a, θ, ω)` from a symmetric mechanism through its linear representation,
/// which also gives the recommendation under a misreport.
struct LinearSim {
    n: usize,
    alpha: f64,
    beta: f64,
    g_own: f64,
    g_other: f64,
    noise: GaussianSampler,
    sd_theta: f64,
    sd_omega: f64,
    prior: Prior,
}

struct Draw {
    a: Vec<f64>,
    theta: Vec<f64>,
    omega: f64,
    z: Vec<f64>,
    eps: Vec<f64>,
}

impl LinearSim {
    fn new(sym: &SymMechanism, prior: &Prior, n: usize) -> Result<Self> {
        let lin = to_linear(sym, prior, n)?;
        let noise = GaussianSampler::from_moments(DVector::zeros(n), lin.k_eps.clone())?;
        Ok(LinearSim {
            n,
            alpha: lin.alpha[0],
            beta: lin.beta[0],
            g_own: lin.gamma[(0, 0)],
            g_other: if n > 1 { lin.gamma[(0, 1)] } else { 0.0 },
            noise,
            sd_theta: prior.var_theta.sqrt(),
            sd_omega: prior.var_omega.sqrt(),
            prior: *prior,
        })
    }

    fn draw<R: Rng>(&self, rng: &mut R, d: &mut Draw) {
        for th in d.theta.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *th = self.prior.mu_theta + self.sd_theta * z;
        }
        let z: f64 = StandardNormal.sample(rng);
        d.omega = self.prior.mu_omega + self.sd_omega * z;
        self.noise.draw(rng, &mut d.z, &mut d.eps);
        let total: f64 = d.theta.iter().sum();
        for i in 0..self.n {
            d.a[i] = self.alpha + self.beta * d.omega + (self.g_own - self.g_other) * d.theta[i] + self.g_other * total + d.eps[i];
        }
    }

    fn empty(&self) -> Draw {
        Draw { a: vec![0.0; self.n], theta: vec![0.0; self.n], omega: 0.0, z: vec![0.0; self.n], eps: vec![0.0; self.n] }
    }
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < 2 {
        return Err(Error::InvalidArgument("at least 2 samples are required".into()));
    }
    Ok(())
}

/// Expected utility gain of each deviation for player 0 over truthful obedient
/// play, net of payments when a schedule is given. All deviations share the
/// same draws.
pub fn mc_deviation_gains(
    sym: &SymMechanism,
    game: &GameSpec,
    prior: &Prior,
    deviations: &[AffineDeviation],
    schedule: Option<&PaymentSchedule>,
    samples: usize,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    game.validate()?;
    check_samples(samples)?;
    let sim = LinearSim::new(sym, prior, game.n)?;
    let chunks = samples.div_ceil(CHUNK);
    let per_chunk: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = chunk_rng(seed, k);
            let count = CHUNK.min(samples - k * CHUNK);
            let mut acc = vec![Moments::default(); deviations.len()];
            let mut d = sim.empty();
            for _ in 0..count {
                sim.draw(&mut rng, &mut d);
                let others: f64 = d.a.iter().skip(1).sum();
                let base = utility_of(game, d.a[0], others, d.omega, d.theta[0]);
                for (dev, m) in deviations.iter().zip(acc.iter_mut()) {
                    let shift = dev.report_shift;
                    // A misreport moves every recommendation through the type loadings.
                    let a0 = d.a[0] + sim.g_own * shift;
                    let others_dev = others + (game.n as f64 - 1.0) * sim.g_other * shift;
                    let play = dev.kappa * a0 + dev.offset;
                    let mut gain = utility_of(game, play, others_dev, d.omega, d.theta[0]) - base;
                    if let Some(p) = schedule {
                        gain -= p.value(d.theta[0] + shift) - p.value(d.theta[0]);
                    }
                    m.push(gain);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Moments::default(); deviations.len()];
    for chunk in &per_chunk {
        for (t, c) in total.iter_mut().zip(chunk) {
            t.merge(c);
        }
    }
    Ok(total.iter().map(Moments::estimate).collect())
}

pub fn mc_deviation_gain(
    sym: &SymMechanism,
    game: &GameSpec,
    prior: &Prior,
    deviation: AffineDeviation,
    schedule: Option<&PaymentSchedule>,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    Ok(mc_deviation_gains(sym, game, prior, &[deviation], schedule, samples, seed)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    /// Realized total utility per draw under obedient play.
    pub welfare: McEstimate,
    /// Realized payment of player 0 per draw.
    pub payment: McEstimate,
}

/// Monte Carlo welfare and payment under truthful obedient play.
pub fn mc_summary(
    sym: &SymMechanism,
    game: &GameSpec,
    prior: &Prior,
    schedule: &PaymentSchedule,
    samples: usize,
    seed: u64,
) -> Result<McSummary> {
    game.validate()?;
    check_samples(samples)?;
    let sim = LinearSim::new(sym, prior, game.n)?;
    let chunks = samples.div_ceil(CHUNK);
    let per_chunk: Vec<[Moments; 2]> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = chunk_rng(seed, k);
            let count = CHUNK.min(samples - k * CHUNK);
            let mut acc = [Moments::default(); 2];
            let mut d = sim.empty();
            for _ in 0..count {
                sim.draw(&mut rng, &mut d);
                let total_a: f64 = d.a.iter().sum();
                let w: f64 = (0..game.n).map(|i| utility_of(game, d.a[i], total_a - d.a[i], d.omega, d.theta[i])).sum();
                acc[0].push(w);
                acc[1].push(schedule.value(d.theta[0]));
            }
            acc
        })
        .collect();
    let mut total = [Moments::default(); 2];
    for c in &per_chunk {
        total[0].merge(&c[0]);
        total[1].merge(&c[1]);
    }
    Ok(McSummary { welfare: total[0].estimate(), payment: total[1].estimate() })
}

/// Index of the entry `(row, col)` in the flattened perturbation vector of the
/// action blocks: upper triangle of `K_aa`, then `K_aθ`, then `K_aω`.
struct Layout {
    n: usize,
}

impl Layout {
    fn len(&self) -> usize {
        let n = self.n;
        n * (n + 1) / 2 + n * n + n
    }

    fn aa(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // Row-major upper triangle.
        i * self.n - i * (i + 1) / 2 + j
    }

    fn at(&self, i: usize, j: usize) -> usize {
        self.n * (self.n + 1) / 2 + i * self.n + j
    }

    fn aw(&self, i: usize) -> usize {
        self.n * (self.n + 1) / 2 + self.n * self.n + i
    }
}

/// Orthonormal basis of perturbations of the action blocks that keep the
/// general obedience equations satisfied.
fn obedience_null_space(game: &GameSpec) -> DMatrix<f64> {
    let n = game.n;
    let lay = Layout { n };
    let p = lay.len();
    let (r, s, t) = (game.r, game.s, game.t);
    let mut c = DMatrix::zeros(2 * n, p);
    for i in 0..n {
        c[(i, lay.aa(i, i))] += 1.0;
        for j in (0..n).filter(|&j| j != i) {
            c[(i, lay.aa(i, j))] -= r;
            c[(n + i, lay.at(j, i))] -= r;
        }
        c[(i, lay.aw(i))] -= s;
        c[(i, lay.at(i, i))] -= t;
        c[(n + i, lay.at(i, i))] += 1.0;
    }
    let gram: DMatrix<f64> = c.transpose() * &c;
    let eig = gram.symmetric_eigen();
    let cutoff = 1e-10 * eig.eigenvalues.amax().max(1.0);
    let cols: Vec<_> = (0..p).filter(|&k| eig.eigenvalues[k] < cutoff).map(|k| eig.eigenvectors.column(k).into_owned()).collect();
    DMatrix::from_columns(&cols)
}

/// A random, generically asymmetric obedient mechanism.
pub fn random_obedient_mechanism(game: &GameSpec, prior: &Prior, seed: u64) -> Result<FullMechanism> {
    random_obedient_mechanism_scaled(game, prior, seed, 1.0)
}

/// As [`random_obedient_mechanism`], with the initial perturbation multiplied by
/// `scale`. `scale = 0` returns the base point: the even mixture of the
/// complete-information Nash and Bayes-Nash mechanisms, which is obedient and has
/// full-rank conditional noise whenever `r ≠ 0` and `t ≠ 0`.
pub fn random_obedient_mechanism_scaled(game: &GameSpec, prior: &Prior, seed: u64, scale: f64) -> Result<FullMechanism> {
    game.require_stable()?;
    prior.require_nondegenerate()?;
    let n = game.n;
    let nash = assemble_full(&nash_covariances(game, prior)?.mechanism, prior, n)?;
    let bn = assemble_full(&bayes_nash_mechanism(game, prior)?, prior, n)?;
    let mut base = nash.clone();
    base.k = (&nash.k + &bn.k) * 0.5;
    if scale == 0.0 {
        return Ok(base);
    }
    if conditional_noise_min(&base, prior) <= EPS_PSD * base.k.trace().abs().max(1.0) {
        return Err(Error::Degenerate("base mechanism has no room for perturbation (r = 0 or t = 0)".into()));
    }

    let lay = Layout { n };
    let basis = obedience_null_space(game);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DVector::from_fn(lay.len(), |_, _| StandardNormal.sample(&mut rng));
    let amp = scale * (0..n).map(|i| nash.k[(i, i)]).sum::<f64>().abs().max(1e-12);
    let dir = &basis * (basis.transpose() * z) * amp;

    let mut delta = DMatrix::zeros(2 * n + 1, 2 * n + 1);
    for i in 0..n {
        for j in 0..n {
            delta[(i, j)] = dir[lay.aa(i, j)];
            delta[(i, n + j)] = dir[lay.at(i, j)];
            delta[(n + j, i)] = dir[lay.at(i, j)];
        }
        delta[(i, 2 * n)] = dir[lay.aw(i)];
        delta[(2 * n, i)] = dir[lay.aw(i)];
    }
    let mut step = 1.0;
    for _ in 0..80 {
        let mut cand = base.clone();
        cand.k = &base.k + &delta * step;
        if conditional_noise_min(&cand, prior) >= 0.0 {
            return FullMechanism::new(cand.mu, cand.k);
        }
        step *= 0.5;
    }
    Err(Error::Internal("line search failed to restore positive semidefiniteness".into()))
}

/// Smallest eigenvalue of `Cov(a | θ, ω)`, which is PSD iff the whole `K` is,
/// given a nondegenerate prior block.
fn conditional_noise_min(full: &FullMechanism, prior: &Prior) -> f64 {
    let n = full.n();
    let k = &full.k;
    let cond = DMatrix::from_fn(n, n, |i, j| {
        let mut v = k[(i, j)] - k[(i, 2 * n)] * k[(j, 2 * n)] / prior.var_omega;
        for m in 0..n {
            v -= k[(i, n + m)] * k[(j, n + m)] / prior.var_theta;
        }
        v
    });
    cond.symmetric_eigenvalues().min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::solve_welfare;
    use crate::incentives::{obedience_residuals_full, payment_schedule};
    use crate::mechanism::symmetrize;

    #[test]
    fn oracle_r0() {
        let g = GameSpec::new(2, 0.0, 1.0, 1.0).unwrap();
        let p = Prior::new(0.0, 0.5, 0.0, 2.0).unwrap();
        let res = brute_force_optimize(&g, &p, Objective::Welfare, 8).unwrap();
        assert!((res.best_objective - (0.5 + 2.0)).abs() < 1e-4);
        assert!((res.best_point[0] - 0.5).abs() < 1e-12);
        assert!((res.best_point[1] - 2.0).abs() < 1e-3);
        assert!((res.best_point[2] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn oracle_matches_complements_example() {
        let g = GameSpec::new(2, 0.5, 1.0, 1.0).unwrap();
        let p = Prior::standard();
        let res = brute_force_optimize(&g, &p, Objective::Welfare, 8).unwrap();
        let rep = solve_welfare(&g, &p).unwrap();
        assert!((res.best_objective - rep.objective_value).abs() < 1e-4, "{} {}", res.best_objective, rep.objective_value);
    }

    #[test]
    fn identity_deviation_has_zero_gain() {
        let g = GameSpec::new(3, -0.3, 1.0, 1.0).unwrap();
        let p = Prior::standard();
        let rep = solve_welfare(&g, &p).unwrap();
        let est = mc_deviation_gain(&rep.mechanism, &g, &p, AffineDeviation::IDENTITY, None, 1000, 1).unwrap();
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn chunked_streams_are_deterministic() {
        let g = GameSpec::new(2, -0.3, 1.0, 1.0).unwrap();
        let p = Prior::standard();
        let m = solve_welfare(&g, &p).unwrap().mechanism;
        let devs = [AffineDeviation::action(0.9, 0.1), AffineDeviation::double(&g, 0.5)];
        let a = mc_deviation_gains(&m, &g, &p, &devs, None, 3 * CHUNK + 17, 9).unwrap();
        let b = mc_deviation_gains(&m, &g, &p, &devs, None, 3 * CHUNK + 17, 9).unwrap();
        assert_eq!(a, b);
        assert!(mc_deviation_gains(&m, &g, &p, &devs, None, 0, 9).is_err());
    }

    #[test]
    fn random_obedient_basics() {
        let g = GameSpec::new(3, -0.25, 1.0, 0.8).unwrap();
        let p = Prior::new(1.0, 1.5, -0.5, 0.7).unwrap();
        let base = random_obedient_mechanism_scaled(&g, &p, 3, 0.0).unwrap();
        let nash = assemble_full(&nash_covariances(&g, &p).unwrap().mechanism, &p, 3).unwrap();
        let bn = assemble_full(&bayes_nash_mechanism(&g, &p).unwrap(), &p, 3).unwrap();
        assert!((&base.k - (&nash.k + &bn.k) * 0.5).amax() < 1e-15);

        for seed in 0..20 {
            let m = random_obedient_mechanism(&g, &p, seed).unwrap();
            let res = obedience_residuals_full(&m, &g, &p).unwrap();
            assert!(res.iter().all(|x| x.abs() <= 1e-9), "{res:?}");
            assert!(m.is_psd());
            assert!(m.to_sym().is_err(), "expected an asymmetric draw");
            let s = symmetrize(&m).unwrap();
            assert!(obedience_residuals_full(&s, &g, &p).unwrap().iter().all(|x| x.abs() <= 1e-9));
            assert!((s.welfare() - m.welfare()).abs() < 1e-10);
        }
    }

    #[test]
    fn welfare_summary_matches_closed_form() {
        let g = GameSpec::new(2, 0.5, 1.0, 1.0).unwrap();
        let p = Prior::new(0.5, 1.0, 1.0, 1.0).unwrap();
        let rep = solve_welfare(&g, &p).unwrap();
        let sch = payment_schedule(&rep.mechanism, &g, &p, None).unwrap();
        let s = mc_summary(&rep.mechanism, &g, &p, &sch, 200_000, 5).unwrap();
        assert!((s.welfare.mean - rep.welfare).abs() < 4.0 * s.welfare.std_error);
        assert!((s.payment.mean - rep.expected_payment).abs() < 4.0 * s.payment.std_error);
    }
}
