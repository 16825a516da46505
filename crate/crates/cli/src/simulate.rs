use infosell::design::solve;
use infosell::incentives::payment_schedule;
use infosell::oracle::{mc_summary, McEstimate};
use infosell::{GameSpec, Objective, Prior};
use serde::Serialize;

use crate::error::CliResult;
use crate::mc::{self, DeviationGain};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClosedForm {
    pub welfare: f64,
    pub expected_payment: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateOutput {
    pub game: GameSpec,
    pub prior: Prior,
    pub objective: Objective,
    pub samples: usize,
    pub seed: u64,
    pub closed_form: ClosedForm,
    pub welfare: McEstimate,
    pub payment: McEstimate,
    pub deviations: Vec<DeviationGain>,
}

impl SimulateOutput {
    pub fn profitable(&self) -> impl Iterator<Item = &DeviationGain> {
        self.deviations.iter().filter(|d| d.profitable)
    }
}

/// Monte Carlo summary of the optimal mechanism with its IR-maximal payments.
pub fn run(sc: &Scenario, grid: usize) -> CliResult<SimulateOutput> {
    let (game, prior) = (sc.game, sc.prior);
    let (samples, seed) = (sc.samples(), sc.seed());
    let report = solve(&game, &prior, sc.objective)?;
    let mech = report.mechanism;
    let schedule = payment_schedule(&mech, &game, &prior, None)?;
    let summary = mc_summary(&mech, &game, &prior, &schedule, samples, seed)?;
    let devs = mc::grid(&mech, &game, &prior, grid, true);
    let deviations = mc::evaluate(&mech, &game, &prior, &devs, Some(&schedule), samples, seed)?;
    Ok(SimulateOutput {
        game,
        prior,
        objective: sc.objective,
        samples,
        seed,
        closed_form: ClosedForm { welfare: report.welfare, expected_payment: report.expected_payment },
        welfare: summary.welfare,
        payment: summary.payment,
        deviations,
    })
}
