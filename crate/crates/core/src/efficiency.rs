//! Efficiencies relative to lower bounds under the carryover model and the
//! zero-, one- and two-way elimination models.
//!
//! The reduced-model bounds minimize over integer allocations. Test
//! treatments are taken to appear at most once per unit and the control as
//! evenly as possible over units.

use serde::Serialize;

use crate::bounds::{even_square_sum, optimize_r0};
use crate::design::{is_in_lambda, Design, DesignCounts, CONTROL};
use crate::error::{Error, Result};
use crate::model::{a_criterion, ModelKind};

/// Ratios above 1 by more than this mean the bound or trace is wrong.
const OVERSHOOT_TOL: f64 = 1e-6;

fn ratio(bound: f64, trace: f64) -> Result<f64> {
    let e = bound / trace;
    if e > 1.0 + OVERSHOOT_TOL {
        return Err(Error::Internal(format!(
            "trace {trace} lies below its lower bound {bound}"
        )));
    }
    Ok(e.min(1.0))
}

/// `min bound / Tr(M⁻¹)` under the carryover model, for designs in the
/// evenly-spread-control class with `3 ≤ p ≤ t + 1`.
pub fn efficiency_carryover(d: &Design) -> Result<f64> {
    let (ok, violations) = is_in_lambda(d);
    if !ok {
        let why: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::InapplicableBound(why.join("; ")));
    }
    let profile = optimize_r0(d.t(), d.p(), d.n())?;
    ratio(profile.min_bound, a_criterion(d, ModelKind::Carryover)?)
}

/// Lower bound on `Tr(M⁻¹)` when only direct effects are fitted: the best
/// integer split of `np` plots into `r0` control plots and as-equal-as-possible
/// test replications.
pub fn zero_way_bound(t: usize, p: usize, n: usize) -> Result<f64> {
    let plots = n * p;
    (1..plots)
        .filter(|&r0| plots - r0 >= t)
        .map(|r0| {
            let rest = plots - r0;
            let (q, extra) = (rest / t, rest % t);
            let tests = extra as f64 / (q + 1) as f64 + (t - extra) as f64 / q as f64;
            t as f64 / r0 as f64 + tests
        })
        .reduce(f64::min)
        .ok_or_else(|| Error::Infeasible(format!("np = {plots} leaves no room for {t} test treatments and a control")))
}

/// Lower bound on `Tr(M⁻¹)` under the one-way (units) or two-way (units and
/// periods) elimination model. The two coincide.
pub fn reduced_model_bound(t: usize, p: usize, n: usize, kind: ModelKind) -> Result<f64> {
    if !matches!(kind, ModelKind::OneWay | ModelKind::TwoWay) {
        return Err(Error::Unsupported(format!("reduced-model bound is defined for one-way and two-way models, not {kind}")));
    }
    if t == 0 || n == 0 || p < 2 {
        return Err(Error::Infeasible(format!("need t ≥ 1, n ≥ 1, p ≥ 2 (t = {t}, p = {p}, n = {n})")));
    }
    let (tf, pf, nf) = (t as f64, p as f64, n as f64);
    let plots = n * p;
    (1..plots)
        .filter_map(|r0| {
            let xi1 = even_square_sum(r0 as i64, n as i64) as f64;
            let r0f = r0 as f64;
            let ctrl = r0f - xi1 / pf;
            let y = ctrl / tf;
            if y <= 0.0 {
                return None;
            }
            if t == 1 {
                return Some(1.0 / y);
            }
            let rest = nf * pf - r0f;
            let x = (tf * (rest - rest / pf) - ctrl) / (tf * (tf - 1.0));
            (x > 0.0).then(|| (tf - 1.0) / x + 1.0 / y)
        })
        .reduce(f64::min)
        .ok_or_else(|| Error::Infeasible(format!("no feasible control replication for t = {t}, p = {p}, n = {n}")))
}

/// Per-model values, keyed by model name in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerModel<T> {
    pub carryover: T,
    pub two_way: T,
    pub one_way: T,
    pub zero_way: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyReport {
    pub t: usize,
    pub p: usize,
    pub n: usize,
    pub r0: usize,
    /// `None` when the carryover bound does not apply; see `e_c_note`.
    pub e_c: Option<f64>,
    pub e_0: f64,
    pub e_1: f64,
    pub e_2: f64,
    pub traces: PerModel<f64>,
    pub bounds: PerModel<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_c_note: Option<String>,
}

pub fn efficiency_report(d: &Design) -> Result<EfficiencyReport> {
    let (t, p, n) = (d.t(), d.p(), d.n());
    let traces = PerModel {
        carryover: a_criterion(d, ModelKind::Carryover)?,
        two_way: a_criterion(d, ModelKind::TwoWay)?,
        one_way: a_criterion(d, ModelKind::OneWay)?,
        zero_way: a_criterion(d, ModelKind::ZeroWay)?,
    };
    let zero = zero_way_bound(t, p, n)?;
    let one = reduced_model_bound(t, p, n, ModelKind::OneWay)?;
    let two = reduced_model_bound(t, p, n, ModelKind::TwoWay)?;

    let (carry, e_c, note) = match efficiency_carryover(d) {
        Ok(e) => (Some(optimize_r0(t, p, n)?.min_bound), Some(e), None),
        Err(e @ (Error::InapplicableBound(_) | Error::Infeasible(_))) => (None, None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    Ok(EfficiencyReport {
        t,
        p,
        n,
        r0: DesignCounts::of(d).r[CONTROL],
        e_c,
        e_0: ratio(zero, traces.zero_way)?,
        e_1: ratio(one, traces.one_way)?,
        e_2: ratio(two, traces.two_way)?,
        traces,
        bounds: PerModel {
            carryover: carry,
            two_way: Some(two),
            one_way: Some(one),
            zero_way: Some(zero),
        },
        e_c_note: note,
    })
}
