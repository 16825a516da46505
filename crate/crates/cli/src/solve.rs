use infosell::design::{solve, SolveReport};
use infosell::incentives::{certify, payment_schedule};
use infosell::{GameSpec, IncentiveReport, Objective, PaymentSchedule, Prior};
use serde::{Deserialize, Serialize};

use crate::error::CliResult;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOutput {
    pub game: GameSpec,
    pub prior: Prior,
    pub objective: Objective,
    pub solution: SolveReport,
    /// IR-maximal schedule; absent when the optimum is not incentive compatible.
    pub payment: Option<PaymentSchedule>,
    pub certificate: IncentiveReport,
}

pub fn run(sc: &Scenario) -> CliResult<SolveOutput> {
    let solution = solve(&sc.game, &sc.prior, sc.objective)?;
    let payment = payment_schedule(&solution.mechanism, &sc.game, &sc.prior, None).ok();
    let certificate = certify(&solution.mechanism, &sc.game, &sc.prior, None, sc.tol())?;
    Ok(SolveOutput { game: sc.game, prior: sc.prior, objective: sc.objective, solution, payment, certificate })
}
