//! Scenario files: a TOML document with `[game]`, `[prior]` and `[options]`
//! tables and a top-level `objective`.

use std::path::Path;

use infosell::{game::preset, GameSpec, Objective, PresetKind, Prior};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameSection {
    preset: Option<String>,
    n: Option<usize>,
    r: Option<f64>,
    s: Option<f64>,
    t: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorSection {
    #[serde(default)]
    mu_theta: f64,
    var_theta: f64,
    #[serde(default)]
    mu_omega: f64,
    var_omega: f64,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Options {
    pub tol: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    objective: Option<Objective>,
    game: GameSection,
    prior: PriorSection,
    #[serde(default)]
    options: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scenario {
    pub game: GameSpec,
    pub prior: Prior,
    pub objective: Objective,
    pub options: Options,
}

impl Scenario {
    pub fn tol(&self) -> f64 {
        self.options.tol.unwrap_or(DEFAULT_TOL)
    }

    pub fn samples(&self) -> usize {
        self.options.samples.unwrap_or(DEFAULT_SAMPLES)
    }

    pub fn seed(&self) -> u64 {
        self.options.seed.unwrap_or(0)
    }

    /// Command-line flags take precedence over the file.
    pub fn override_options(&mut self, tol: Option<f64>, samples: Option<usize>, seed: Option<u64>) -> CliResult<()> {
        if let Some(tol) = tol {
            self.options.tol = Some(tol);
        }
        if let Some(samples) = samples {
            self.options.samples = Some(samples);
        }
        if let Some(seed) = seed {
            self.options.seed = Some(seed);
        }
        check_options(&self.options)
    }
}

fn check_options(o: &Options) -> CliResult<()> {
    if let Some(tol) = o.tol {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(CliError::Usage(format!("tol must be positive and finite, got {tol}")));
        }
    }
    if o.samples == Some(0) {
        return Err(CliError::Usage("samples must be at least 1".into()));
    }
    Ok(())
}

fn resolve_game(g: &GameSection) -> CliResult<GameSpec> {
    if let Some(name) = &g.preset {
        if g.s.is_some() || g.t.is_some() {
            return Err(CliError::Parse("a preset fixes s and t; remove them from [game]".into()));
        }
        let kind: PresetKind = name.parse()?;
        return Ok(preset(kind, g.n.unwrap_or(2), g.r)?);
    }
    let missing = |field: &str| CliError::Parse(format!("[game] needs `{field}` (or a preset)"));
    let n = g.n.ok_or_else(|| missing("n"))?;
    let r = g.r.ok_or_else(|| missing("r"))?;
    let s = g.s.ok_or_else(|| missing("s"))?;
    let t = g.t.ok_or_else(|| missing("t"))?;
    Ok(GameSpec::new(n, r, s, t)?)
}

pub fn parse(text: &str) -> CliResult<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| CliError::Parse(format!("scenario: {}", e.message())))?;
    let game = resolve_game(&file.game)?;
    let p = &file.prior;
    let prior = Prior::new(p.mu_theta, p.var_theta, p.mu_omega, p.var_omega)?;
    check_options(&file.options)?;
    Ok(Scenario { game, prior, objective: file.objective.unwrap_or(Objective::Welfare), options: file.options })
}

pub fn load(path: &Path) -> CliResult<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
    parse(&text)
}
