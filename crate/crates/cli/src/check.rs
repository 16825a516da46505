use std::path::Path;

use infosell::incentives::{certify, payment_schedule};
use infosell::oracle::brute_force_optimize;
use infosell::{FullMechanism, GameSpec, IncentiveReport, Objective, Prior, SymMechanism};
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::mc::{self, DeviationGain};
use crate::scenario::{self, Scenario};
use crate::solve::SolveOutput;

pub const ORACLE_LEVELS: usize = 6;
/// Side of the affine deviation grid used by `--mc`.
pub const MC_GRID: usize = 5;

#[derive(Debug, Clone, Serialize)]
pub struct OracleSection {
    pub objective: Objective,
    pub mechanism_objective: f64,
    pub oracle_objective: f64,
    /// Oracle minus mechanism; positive means the mechanism is suboptimal.
    pub gap: f64,
    pub resolution: f64,
    pub evaluations: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct McSection {
    pub samples: usize,
    pub seed: u64,
    pub with_payments: bool,
    pub deviations: Vec<DeviationGain>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutput {
    pub game: GameSpec,
    pub prior: Prior,
    pub mechanism: SymMechanism,
    pub certificate: IncentiveReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSection>,
}

impl CheckOutput {
    /// Everything that makes the check fail, in report order.
    pub fn failures(&self) -> Vec<String> {
        let mut out = self.certificate.failures.clone();
        if let Some(mc) = &self.mc {
            for d in mc.deviations.iter().filter(|d| d.profitable) {
                out.push(format!(
                    "profitable deviation kappa={} offset={} report_shift={}: gain {:e} ± {:e}",
                    d.kappa, d.offset, d.report_shift, d.gain, d.std_error
                ));
            }
        }
        out
    }
}

pub struct CheckArgs<'a> {
    pub mechanism: &'a Path,
    pub scenario: Option<&'a Path>,
    pub oracle: bool,
    pub mc: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

/// A mechanism file is either `solve` output, the six symmetric moments, or
/// a full `{mu, K}` mechanism with symmetric blocks.
enum Loaded {
    Solved(Box<SolveOutput>),
    Sym(SymMechanism),
    Full(FullMechanism),
}

fn load_mechanism(path: &Path) -> CliResult<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("mechanism: {e}")))?;
    let bad = |e: serde_json::Error| CliError::Parse(format!("mechanism: {e}"));
    if value.get("solution").is_some() {
        serde_json::from_value(value).map(|s| Loaded::Solved(Box::new(s))).map_err(bad)
    } else if value.get("K").is_some() {
        serde_json::from_value(value).map(Loaded::Full).map_err(bad)
    } else {
        serde_json::from_value(value).map(Loaded::Sym).map_err(bad)
    }
}

pub fn run(args: &CheckArgs) -> CliResult<CheckOutput> {
    let loaded = load_mechanism(args.mechanism)?;
    let mut sc = match (args.scenario, &loaded) {
        (Some(path), _) => scenario::load(path)?,
        (None, Loaded::Solved(s)) => {
            Scenario { game: s.game, prior: s.prior, objective: s.objective, options: Default::default() }
        }
        (None, _) => return Err(CliError::Usage("--scenario is required unless the mechanism is solve output".into())),
    };
    sc.override_options(args.tol, args.mc, args.seed)?;
    let (game, prior) = (sc.game, sc.prior);
    let mechanism = match loaded {
        Loaded::Solved(s) => s.solution.mechanism,
        Loaded::Sym(m) => m,
        Loaded::Full(full) => {
            if full.n() != game.n {
                return Err(CliError::Usage(format!("mechanism has {} players, scenario has {}", full.n(), game.n)));
            }
            if !full.matches_prior(&prior) {
                return Err(CliError::Usage("mechanism's type and state marginals differ from the prior".into()));
            }
            full.to_sym()?
        }
    };
    if !mechanism.is_finite() {
        return Err(CliError::Parse("mechanism fields must be finite".into()));
    }
    let certificate = certify(&mechanism, &game, &prior, None, sc.tol())?;

    let oracle = if args.oracle {
        let o = brute_force_optimize(&game, &prior, sc.objective, ORACLE_LEVELS)?;
        let own = match sc.objective {
            Objective::Welfare => mechanism.var_a,
            Objective::Revenue => mechanism.var_a - game.t * mechanism.cov_atheta_own,
        };
        Some(OracleSection {
            objective: sc.objective,
            mechanism_objective: own,
            oracle_objective: o.best_objective,
            gap: o.best_objective - own,
            resolution: o.resolution,
            evaluations: o.evaluations,
        })
    } else {
        None
    };

    let mc = match args.mc {
        Some(samples) => {
            let schedule = payment_schedule(&mechanism, &game, &prior, None).ok();
            let devs = mc::grid(&mechanism, &game, &prior, MC_GRID, schedule.is_some());
            let deviations = mc::evaluate(&mechanism, &game, &prior, &devs, schedule.as_ref(), samples, sc.seed())?;
            Some(McSection { samples, seed: sc.seed(), with_payments: schedule.is_some(), deviations })
        }
        None => None,
    };
    Ok(CheckOutput { game, prior, mechanism, certificate, oracle, mc })
}
