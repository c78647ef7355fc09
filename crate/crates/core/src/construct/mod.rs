//! Constructions of totally balanced designs with control replication `r0 = n`.

pub mod bib;
pub mod search;
mod tally;
pub mod williams;

use serde::Serialize;

pub use bib::{bib_design, BibDesign};
pub use search::{block_array, cyclic_orbits, three_step_construct, SearchOutcome};
pub use williams::balanced_uniform;

use crate::design::{Design, CONTROL};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::verify::verify_totally_balanced;

/// Budget and seed for the shuffle search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    pub seed: u64,
    pub max_restarts: usize,
    pub max_iters_per_restart: usize,
    /// Violation score at which a restart stops.
    pub target: f64,
    /// Annealing temperature at the first and last iteration of a restart.
    pub initial_temperature: f64,
    pub final_temperature: f64,
    /// Move cyclic translates of a block together when the BIB design allows.
    pub symmetric: bool,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            seed: 20_050_101,
            max_restarts: 64,
            max_iters_per_restart: 20_000,
            target: 0.0,
            initial_temperature: 3.0,
            final_temperature: 0.05,
            symmetric: true,
            execution: Execution::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_restarts == 0
            || self.max_iters_per_restart == 0
            || !(self.target >= 0.0)
            || !(self.initial_temperature > 0.0)
            || !(self.final_temperature > 0.0)
        {
            return Err(Error::Infeasible(format!(
                "search budget must be positive (restarts {}, iterations {}, target {})",
                self.max_restarts, self.max_iters_per_restart, self.target
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma7Check {
    pub feasible: bool,
    /// `n(p − 1)/(pt)`.
    pub first: f64,
    /// `(p − 1)(p − 2)n/(pt(t − 1))`.
    pub second: f64,
}

/// Necessary integrality conditions for a totally balanced design with
/// `r0 = n`.
pub fn lemma7_feasible(t: usize, p: usize, n: usize) -> Lemma7Check {
    if t < 2 || p < 2 {
        return Lemma7Check {
            feasible: false,
            first: f64::NAN,
            second: f64::NAN,
        };
    }
    let num1 = n * (p - 1);
    let den1 = p * t;
    let num2 = (p - 1) * (p - 2) * n;
    let den2 = p * t * (t - 1);
    Lemma7Check {
        feasible: num1 % den1 == 0 && num2 % den2 == 0,
        first: num1 as f64 / den1 as f64,
        second: num2 as f64 / den2 as f64,
    }
}

/// `t` test treatments in `t + 1` periods: a balanced uniform design on
/// `t + 1` symbols with one of them playing the control.
pub fn lemma8_construct(t: usize, n: usize) -> Result<Design> {
    balanced_uniform(t + 1, n)
}

/// `t` test treatments in `t` periods: `t` copies of a balanced uniform
/// design on the tests, the `i`-th copy with test `i` replaced by the control.
pub fn lemma9_construct(t: usize, n: usize) -> Result<Design> {
    if t < 2 || n % (t * t) != 0 {
        return Err(Error::Existence(format!("need n divisible by t² = {} (t = {t}, n = {n})", t * t)));
    }
    let q = n / (t * t);
    if is_prime(t) && q % 2 == 1 {
        return Err(Error::Existence(format!(
            "for prime t = {t}, n/t² must be even (n = {n})"
        )));
    }
    let base = balanced_uniform(t, n / t).map_err(|e| match e {
        Error::Existence(msg) => Error::Unsupported(format!(
            "only Williams squares are implemented for balanced uniform designs: {msg}"
        )),
        other => other,
    })?;
    let tests: Vec<Vec<usize>> = base
        .sequences()
        .into_iter()
        .map(|s| s.into_iter().map(|x| x + 1).collect())
        .collect();
    let mut units = Vec::with_capacity(n);
    for i in 1..=t {
        units.extend(
            tests
                .iter()
                .map(|s| s.iter().map(|&x| if x == i { CONTROL } else { x }).collect::<Vec<_>>()),
        );
    }
    Design::from_sequences(t, &units)
}

fn is_prime(x: usize) -> bool {
    x >= 2 && (2..).take_while(|d| d * d <= x).all(|d| x % d != 0)
}

/// Builds a totally balanced design with `r0 = n` and verifies it.
pub fn construct(t: usize, p: usize, n: usize) -> Result<Design> {
    construct_with(t, p, n, &SearchConfig::default())
}

/// Dispatches on `p`: `t + 1` uses a balanced uniform design, `t` uses the
/// relabelled copies when their divisibility condition holds, and smaller
/// `p` (or `p = t` otherwise) uses the block-and-control search.
pub fn construct_with(t: usize, p: usize, n: usize, cfg: &SearchConfig) -> Result<Design> {
    if p < 3 || p > t + 1 {
        return Err(Error::Infeasible(format!("need 3 ≤ p ≤ t + 1 (t = {t}, p = {p})")));
    }
    let check = lemma7_feasible(t, p, n);
    if !check.feasible {
        return Err(Error::Infeasible(format!(
            "no totally balanced design with r0 = n: n(p−1)/(pt) = {} and (p−1)(p−2)n/(pt(t−1)) = {} must both be integers",
            check.first, check.second
        )));
    }
    let d = if p == t + 1 {
        lemma8_construct(t, n)?
    } else if p == t && lemma9_construct(t, n).is_ok() {
        lemma9_construct(t, n)?
    } else {
        let out = three_step_construct(t, p, n, cfg)?;
        if !out.success {
            return Err(Error::Existence(format!(
                "search budget exhausted: best violation score {} after {} restarts (seed {})",
                out.score, cfg.max_restarts, cfg.seed
            )));
        }
        out.design
    };
    let report = verify_totally_balanced(&d);
    if !report.totally_balanced() || !report.in_lambda {
        let ids: Vec<&str> = report.failing().iter().map(|c| c.id).collect();
        return Err(Error::Internal(format!("failing clauses: {}", ids.join(", "))));
    }
    Ok(d)
}
