//! Deviation grids shared by `check --mc` and `simulate`.

use infosell::oracle::{mc_deviation_gains, AffineDeviation, McEstimate};
use infosell::{GameSpec, PaymentSchedule, Prior, SymMechanism};
use serde::Serialize;

use crate::error::CliResult;

/// Significance level, in standard errors, for calling a deviation profitable.
pub const Z_CRIT: f64 = 3.0;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DeviationGain {
    pub kappa: f64,
    pub offset: f64,
    pub report_shift: f64,
    pub gain: f64,
    pub std_error: f64,
    pub profitable: bool,
}

/// `k × k` affine action deviations, `κ ∈ [0.5, 1.5]` and offsets within one
/// action standard deviation, plus four double deviations when payments exist.
pub fn grid(sym: &SymMechanism, game: &GameSpec, prior: &Prior, k: usize, with_double: bool) -> Vec<AffineDeviation> {
    let sd_a = sym.var_a.max(0.0).sqrt().max(1e-3);
    let lin = |lo: f64, hi: f64, i: usize| if k == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * i as f64 / (k - 1) as f64 };
    let mut out: Vec<AffineDeviation> =
        (0..k).flat_map(|i| (0..k).map(move |j| AffineDeviation::action(lin(0.5, 1.5, i), lin(-sd_a, sd_a, j)))).collect();
    if with_double {
        let sd_t = prior.var_theta.sqrt();
        out.extend([-1.0, -0.5, 0.5, 1.0].map(|c| AffineDeviation::double(game, c * sd_t)));
    }
    out
}

pub fn evaluate(
    sym: &SymMechanism,
    game: &GameSpec,
    prior: &Prior,
    deviations: &[AffineDeviation],
    schedule: Option<&PaymentSchedule>,
    samples: usize,
    seed: u64,
) -> CliResult<Vec<DeviationGain>> {
    let gains = mc_deviation_gains(sym, game, prior, deviations, schedule, samples, seed)?;
    // Exact cancellations leave rounding noise with a vanishing standard error.
    let floor = 1e-9 * 1f64.max(sym.var_a.abs());
    Ok(deviations
        .iter()
        .zip(gains)
        .map(|(d, McEstimate { mean, std_error })| DeviationGain {
            kappa: d.kappa,
            offset: d.offset,
            report_shift: d.report_shift,
            gain: mean,
            std_error,
            profitable: mean > Z_CRIT * std_error && mean > floor,
        })
        .collect())
}
