//! Parameter sweeps. Rows follow the axis order given on the command line,
//! first axis outermost.

use std::str::FromStr;

use infosell::design::{compare_to_nash, nash_covariances, solve};
use infosell::{GameSpec, Objective, Prior, SymMechanism};
use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    N,
    R,
    S,
    T,
    VarTheta,
    VarOmega,
}

impl FromStr for Param {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s {
            "n" => Param::N,
            "r" => Param::R,
            "s" => Param::S,
            "t" => Param::T,
            "var_theta" => Param::VarTheta,
            "var_omega" => Param::VarOmega,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown sweep axis '{other}' (expected n, r, s, t, var_theta, var_omega)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub param: Param,
    pub values: Vec<f64>,
}

fn number(s: &str) -> CliResult<f64> {
    let v: f64 = s.trim().parse().map_err(|_| CliError::Usage(format!("not a number: '{s}'")))?;
    if !v.is_finite() {
        return Err(CliError::Usage(format!("not finite: '{s}'")));
    }
    Ok(v)
}

/// `name=start:stop:count` (inclusive, evenly spaced) or `name=v1,v2,...`.
impl FromStr for Axis {
    type Err = CliError;

    fn from_str(spec: &str) -> CliResult<Self> {
        let (name, body) =
            spec.split_once('=').ok_or_else(|| CliError::Usage(format!("axis '{spec}' must look like name=values")))?;
        let param: Param = name.trim().parse()?;
        let parts: Vec<&str> = body.split(':').collect();
        let values = match parts.as_slice() {
            [start, stop, count] => {
                let (a, b) = (number(start)?, number(stop)?);
                let k: usize = count.trim().parse().map_err(|_| CliError::Usage(format!("bad count in '{spec}'")))?;
                match k {
                    0 => return Err(CliError::Usage(format!("axis '{spec}' has zero points"))),
                    1 => vec![a],
                    _ => (0..k).map(|i| if i + 1 == k { b } else { a + (b - a) * i as f64 / (k - 1) as f64 }).collect(),
                }
            }
            [list] => list.split(',').map(number).collect::<CliResult<Vec<_>>>()?,
            _ => return Err(CliError::Usage(format!("axis '{spec}' must be start:stop:count or a comma list"))),
        };
        if param == Param::N && values.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
            return Err(CliError::Usage("n must take nonnegative integer values".into()));
        }
        Ok(Axis { param, values })
    }
}

pub const HEADER: [&str; 30] = [
    "n",
    "r",
    "s",
    "t",
    "mu_theta",
    "var_theta",
    "mu_omega",
    "var_omega",
    "objective",
    "branch",
    "lambda",
    "nu",
    "delta",
    "mu_a",
    "var_a",
    "cov_aa",
    "cov_atheta_own",
    "cov_atheta_other",
    "cov_aomega",
    "nash_var_a",
    "nash_cov_aa",
    "nash_cov_atheta_own",
    "nash_cov_atheta_other",
    "nash_cov_aomega",
    "omega_smaller",
    "own_larger",
    "other_larger",
    "welfare",
    "expected_payment",
    "error",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(usize),
    Num(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(k) => k.to_string(),
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(k) => Value::from(*k),
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Bool(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }
}

/// Raw inputs of one grid point, before validation.
#[derive(Debug, Clone, Copy)]
struct Point {
    n: usize,
    r: f64,
    s: f64,
    t: f64,
    prior: [f64; 4],
}

impl Point {
    fn set(&mut self, p: Param, v: f64) {
        match p {
            Param::N => self.n = v as usize,
            Param::R => self.r = v,
            Param::S => self.s = v,
            Param::T => self.t = v,
            Param::VarTheta => self.prior[1] = v,
            Param::VarOmega => self.prior[3] = v,
        }
    }
}

fn moments(m: &SymMechanism) -> [f64; 6] {
    [m.mu_a, m.var_a, m.cov_aa, m.cov_atheta_own, m.cov_atheta_other, m.cov_aomega]
}

fn row(pt: &Point, objective: Objective) -> Vec<Cell> {
    let mut cells = vec![Cell::Int(pt.n), Cell::Num(pt.r), Cell::Num(pt.s), Cell::Num(pt.t)];
    cells.extend(pt.prior.iter().map(|&v| Cell::Num(v)));
    cells.push(Cell::Text(format!("{objective:?}").to_lowercase()));
    let outputs = (|| -> infosell::Result<Vec<Cell>> {
        let game = GameSpec::new(pt.n, pt.r, pt.s, pt.t)?;
        let [mt, vt, mw, vw] = pt.prior;
        let prior = Prior::new(mt, vt, mw, vw)?;
        let rep = solve(&game, &prior, objective)?;
        let nash = nash_covariances(&game, &prior)?.mechanism;
        let cmp = compare_to_nash(&rep, &game, &prior).ok();
        let mut c = vec![
            Cell::Text(format!("{:?}", rep.branch).to_lowercase()),
            Cell::Num(rep.lambda),
            Cell::Num(rep.nu),
            Cell::Num(rep.delta),
        ];
        c.extend(moments(&rep.mechanism).map(Cell::Num));
        c.extend(moments(&nash)[1..].iter().map(|&v| Cell::Num(v)));
        match cmp {
            Some(k) => c.extend([k.omega_smaller, k.own_larger, k.other_larger].map(Cell::Bool)),
            None => c.extend([Cell::Empty, Cell::Empty, Cell::Empty]),
        }
        c.extend([Cell::Num(rep.welfare), Cell::Num(rep.expected_payment), Cell::Empty]);
        Ok(c)
    })();
    match outputs {
        Ok(c) => cells.extend(c),
        Err(e) => {
            cells.resize(HEADER.len() - 1, Cell::Empty);
            cells.push(Cell::Text(e.to_string()));
        }
    }
    cells
}

fn points(sc: &Scenario, axes: &[Axis]) -> Vec<Point> {
    let p = &sc.prior;
    let base = Point {
        n: sc.game.n,
        r: sc.game.r,
        s: sc.game.s,
        t: sc.game.t,
        prior: [p.mu_theta, p.var_theta, p.mu_omega, p.var_omega],
    };
    axes.iter().fold(vec![base], |acc, axis| {
        acc.iter()
            .flat_map(|pt| {
                axis.values.iter().map(move |&v| {
                    let mut q = *pt;
                    q.set(axis.param, v);
                    q
                })
            })
            .collect()
    })
}

pub fn run(sc: &Scenario, axes: &[Axis]) -> Vec<Vec<Cell>> {
    points(sc, axes).par_iter().map(|pt| row(pt, sc.objective)).collect()
}

pub fn to_csv(rows: &[Vec<Cell>]) -> CliResult<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Parse(format!("csv: {e}"));
    w.write_record(HEADER).map_err(fail)?;
    for r in rows {
        w.write_record(r.iter().map(Cell::csv)).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Parse(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::Parse(e.to_string()))
}

pub fn to_json(rows: &[Vec<Cell>]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| Value::Object(HEADER.iter().zip(r).map(|(k, c)| (k.to_string(), c.json())).collect::<Map<_, _>>()))
            .collect(),
    )
}
