//! Closed-form lower bounds on `Tr(M⁻¹)` and the optimal control replication.
//!
//! Notation follows the counting statistics in [`DesignCounts`]: `r0` is the
//! control replication, `rt0` its replication in the first `p − 1` periods,
//! and the three control sums are `Σ n₀ᵤ²`, `Σ n₀ᵤ ñ₀ᵤ`, `Σ ñ₀ᵤ²`.
//! Inside the evenly-spread-control class `rt0 = r0 (p − 1) / p`.

use serde::Serialize;

use crate::design::{DesignCounts, CONTROL};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// The three control sums, as real variables so the bound can be studied as
/// a function of them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlSums {
    /// `Σ n₀ᵤ²`
    pub xi1: f64,
    /// `Σ n₀ᵤ ñ₀ᵤ`
    pub xi2: f64,
    /// `Σ ñ₀ᵤ²`
    pub xi3: f64,
}

impl ControlSums {
    pub fn new(xi1: f64, xi2: f64, xi3: f64) -> Self {
        Self { xi1, xi2, xi3 }
    }

    pub fn of_counts(c: &DesignCounts) -> Self {
        let (a, b, d) = c.control_sums();
        Self::new(a as f64, b as f64, d as f64)
    }
}

impl From<MinSums> for ControlSums {
    fn from(m: MinSums) -> Self {
        Self::new(m.xi1 as f64, m.xi2 as f64, m.xi3 as f64)
    }
}

/// Minimum attainable control sums for fixed `(n, p, r0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MinSums {
    pub xi1: u64,
    pub xi2: u64,
    pub xi3: u64,
}

/// Smallest possible `Σ x²` when `total` is spread over `n` non-negative
/// integers: as evenly as possible.
pub(crate) fn even_square_sum(total: i64, n: i64) -> i64 {
    let f = total.div_euclid(n);
    total + (2 * total - n) * f - n * f * f
}

/// Minimum values of the three control sums over evenly-spread-control
/// designs with `r0` control plots.
pub fn min_sums(n: usize, p: usize, r0: usize) -> Result<MinSums> {
    if n == 0 || p < 2 {
        return Err(Error::Infeasible(format!("need n ≥ 1 and p ≥ 2 (n = {n}, p = {p})")));
    }
    if r0 % p != 0 {
        return Err(Error::Infeasible(format!(
            "r0 = {r0} is not a multiple of p = {p}; the control cannot be spread evenly over periods"
        )));
    }
    if r0 > n * p {
        return Err(Error::Infeasible(format!("r0 = {r0} exceeds np = {}", n * p)));
    }
    let (n, p, r0) = (n as i64, p as i64, r0 as i64);
    let rt0 = r0 * (p - 1) / p;
    // rt0 / (p - 1): the number of units ending on the control
    let last = r0 / p;
    let ft = rt0 / n;

    let xi1 = even_square_sum(r0, n);
    let xi3 = even_square_sum(rt0, n);
    let xi2 = if last < n - rt0 + n * ft {
        rt0 + (2 * rt0 - n + last) * ft - n * ft * ft
    } else {
        2 * rt0 + last - n + (2 * rt0 - 2 * n + last) * ft - n * ft * ft
    };
    Ok(MinSums {
        xi1: xi1 as u64,
        xi2: xi2 as u64,
        xi3: xi3 as u64,
    })
}

/// First denominator: `n(p−1)(pt−t−1) − (pt−t+p−2) rt0 + ξ₃`.
fn den1(t: f64, p: f64, n: f64, rt0: f64, xi3: f64) -> f64 {
    n * (p - 1.0) * (p * t - t - 1.0) - (p * t - t + p - 2.0) * rt0 + xi3
}

/// Second denominator: `np(p−1) rt0 − rt0² − n(p−1) ξ₃`.
fn den2(p: f64, n: f64, rt0: f64, xi3: f64) -> f64 {
    n * p * (p - 1.0) * rt0 - rt0 * rt0 - n * (p - 1.0) * xi3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma4Bound {
    pub x0: f64,
    pub y0: f64,
    pub bound: f64,
}

/// Design-specific lower bound `(t−1)/x₀ + 1/y₀` on `Tr(M⁻¹)` under the
/// carryover model. Attained when treatments are spread proportionally over
/// periods, the unit-residual blocks are invariant under test relabelling,
/// and no test appears twice in the first `p − 1` periods of a unit.
pub fn lemma4_bound(c: &DesignCounts) -> Result<Lemma4Bound> {
    let (t, p, n) = (c.t as f64, c.p as f64, c.n as f64);
    let rt0 = c.rt[CONTROL] as f64;
    if c.rt[CONTROL] == 0 || c.rt[CONTROL] >= c.n * (c.p - 1) {
        return Err(Error::InapplicableBound(format!(
            "needs 0 < rt0 < n(p−1), got rt0 = {} with n(p−1) = {}",
            c.rt[CONTROL],
            c.n * (c.p - 1)
        )));
    }
    if c.t == 0 {
        return Err(Error::InapplicableBound("no test treatments".into()));
    }
    let r0 = c.r[CONTROL] as f64;
    let rhat0 = c.rhat0 as f64;
    let m00 = c.m[CONTROL][CONTROL] as f64;
    let s = ControlSums::of_counts(c);

    let test_sq: f64 = (1..=c.t)
        .flat_map(|i| c.n_iu[i].iter().map(|&x| (x * x) as f64))
        .sum();
    let test_self: f64 = (1..=c.t)
        .map(|i| {
            let cross: usize = c.n_iu[i].iter().zip(&c.nt_iu[i]).map(|(a, b)| a * b).sum();
            c.m[i][i] as f64 - cross as f64 / p
        })
        .sum();
    // Control's row of the symmetrized TᵀU⊥F block, off the control column.
    let f = rhat0 - (p - 1.0) / p * r0 - m00 + s.xi2 / p;
    let a_ctrl = r0 - s.xi1 / p;
    let g = test_self + f / t;

    let d1 = den1(t, p, n, rt0, s.xi3);
    let d2 = den2(p, n, rt0, s.xi3);
    if d1 <= 0.0 || d2 <= 0.0 {
        return Err(Error::InapplicableBound(format!(
            "non-positive denominator (D1 = {d1}, D2 = {d2})"
        )));
    }

    let y0 = a_ctrl / t
        - p * ((n * (p - 1.0) - rt0) * (m00 - s.xi2 / p).powi(2) + rt0 * f * f) / (t * d2);
    let (x0, bound) = if c.t == 1 {
        (f64::INFINITY, 1.0 / y0)
    } else {
        let x0 = (t * (n * p - r0 - test_sq / p) - a_ctrl) / (t * (t - 1.0))
            - t * p * g * g / ((t - 1.0) * d1);
        (x0, (t - 1.0) / x0 + 1.0 / y0)
    };
    if !(y0 > 0.0 && x0 > 0.0) {
        return Err(Error::InapplicableBound(format!(
            "bound requires x0, y0 > 0 (x0 = {x0}, y0 = {y0})"
        )));
    }
    Ok(Lemma4Bound { x0, y0, bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaTheta {
    pub delta1: f64,
    pub delta2: f64,
    pub theta1: f64,
    pub theta2: f64,
    /// `t(t−1)²p/Δ̃₁ + tp/Δ̃₂`
    pub h: f64,
}

/// `Δ̃₁, Δ̃₂, Θ̃₁, Θ̃₂` and `H` with the control sums replaced by free
/// variables. `r0` is tied to `rt0` by `r0 = p·rt0/(p−1)`.
pub fn delta_theta(t: usize, p: usize, n: usize, rt0: f64, xs: ControlSums) -> Result<DeltaTheta> {
    let (tf, pf, nf) = (t as f64, p as f64, n as f64);
    if p < 2 {
        return Err(Error::Infeasible("p must be at least 2".into()));
    }
    let r0 = pf * rt0 / (pf - 1.0);
    let d1 = den1(tf, pf, nf, rt0, xs.xi3);
    let d2 = den2(pf, nf, rt0, xs.xi3);
    if d1 == 0.0 || d2 == 0.0 || !d1.is_finite() || !d2.is_finite() {
        return Err(Error::Infeasible(format!(
            "zero denominator at rt0 = {rt0} (D1 = {d1}, D2 = {d2})"
        )));
    }
    let num1 = nf * tf * (pf - 1.0) - tf * rt0 - xs.xi2;
    let delta1 = tf * (pf - 1.0) * (nf * pf - r0) - pf * (r0 - xs.xi1 / pf) - num1 * num1 / d1;
    let delta2 = pf * (r0 - xs.xi1 / pf) - nf * (pf - 1.0) * xs.xi2 * xs.xi2 / d2;
    let theta1 = num1 / d1;
    let theta2 = nf * (pf - 1.0) * xs.xi2 / d2;
    let h = tf * (tf - 1.0).powi(2) * pf / delta1 + tf * pf / delta2;
    Ok(DeltaTheta {
        delta1,
        delta2,
        theta1,
        theta2,
        h,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma5Bound {
    pub r0: usize,
    pub rt0: usize,
    pub x1: f64,
    pub y1: f64,
    pub bound: f64,
}

/// Lower bound `t(t−1)²p/x₁ + tp/y₁` on `Tr(M⁻¹)` over evenly-spread-control,
/// self-adjacency-free designs with control replication `r0`.
pub fn lemma5_bound(t: usize, p: usize, n: usize, r0: usize) -> Result<Lemma5Bound> {
    if t == 0 {
        return Err(Error::Infeasible("no test treatments".into()));
    }
    let ms = min_sums(n, p, r0)?;
    let rt0 = r0 * (p - 1) / p;
    if rt0 == 0 || rt0 >= n * (p - 1) {
        return Err(Error::Infeasible(format!(
            "needs 0 < rt0 < n(p−1), got rt0 = {rt0} with n(p−1) = {}",
            n * (p - 1)
        )));
    }
    let dt = delta_theta(t, p, n, rt0 as f64, ms.into())?;
    let (x1, y1) = (dt.delta1, dt.delta2);
    if !(x1 > 0.0 && y1 > 0.0) {
        return Err(Error::Infeasible(format!(
            "r0 = {r0}: bound terms must be positive (x1 = {x1}, y1 = {y1})"
        )));
    }
    Ok(Lemma5Bound {
        r0,
        rt0,
        x1,
        y1,
        bound: dt.h,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundProfile {
    pub t: usize,
    pub p: usize,
    pub n: usize,
    /// Feasible candidates, sorted by `r0`.
    pub entries: Vec<Lemma5Bound>,
    pub best_r0: usize,
    pub min_bound: f64,
}

impl BoundProfile {
    pub fn at(&self, r0: usize) -> Option<&Lemma5Bound> {
        self.entries.iter().find(|e| e.r0 == r0)
    }
}

/// Sweeps `r0` over the multiples of `p` up to `⌊np/2⌋` and returns the
/// profile of bounds with its minimizer. Ties go to the smaller `r0`.
pub fn optimize_r0(t: usize, p: usize, n: usize) -> Result<BoundProfile> {
    optimize_r0_with(Execution::default(), t, p, n)
}

pub fn optimize_r0_with(mode: Execution, t: usize, p: usize, n: usize) -> Result<BoundProfile> {
    if p < 3 || p > t + 1 {
        return Err(Error::Infeasible(format!("need 3 ≤ p ≤ t + 1 (t = {t}, p = {p})")));
    }
    let candidates: Vec<usize> = (1..).map(|k| k * p).take_while(|&r0| r0 <= n * p / 2).collect();
    let entries: Vec<Lemma5Bound> = par::map(mode, &candidates, |&r0| lemma5_bound(t, p, n, r0).ok())
        .into_iter()
        .flatten()
        .collect();
    let best = entries
        .iter()
        .fold(None::<&Lemma5Bound>, |best, e| match best {
            Some(b) if e.bound >= b.bound * (1.0 - 1e-12) => Some(b),
            _ => Some(e),
        })
        .ok_or_else(|| Error::Infeasible(format!("no feasible r0 for t = {t}, p = {p}, n = {n}")))?;
    Ok(BoundProfile {
        t,
        p,
        n,
        best_r0: best.r0,
        min_bound: best.bound,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{a_criterion, ModelKind};

    #[test]
    fn min_sums_examples() {
        assert_eq!(min_sums(9, 3, 9).unwrap(), MinSums { xi1: 9, xi2: 6, xi3: 6 });
        assert_eq!(min_sums(6, 3, 6).unwrap(), MinSums { xi1: 6, xi2: 4, xi3: 4 });
        assert_eq!(min_sums(5, 4, 0).unwrap(), MinSums { xi1: 0, xi2: 0, xi3: 0 });
        assert!(matches!(min_sums(9, 3, 10), Err(Error::Infeasible(_))));
        assert!(matches!(min_sums(2, 3, 9), Err(Error::Infeasible(_))));
    }

    #[test]
    fn min_sums_match_example_one_counts() {
        let c = DesignCounts::of(&fixtures::example1());
        let ms = min_sums(9, 3, 9).unwrap();
        let (a, b, d) = c.control_sums();
        assert_eq!((a as u64, b as u64, d as u64), (ms.xi1, ms.xi2, ms.xi3));
    }

    #[test]
    fn lemma5_reported_values() {
        let b = lemma5_bound(5, 5, 50, 60).unwrap().bound;
        assert!((b - 0.24179).abs() < 1e-4, "{b}");
        let b = lemma5_bound(5, 5, 50, 50).unwrap().bound;
        assert!((b - 0.24299).abs() < 1e-4, "{b}");
        let b = lemma5_bound(6, 5, 30, 30).unwrap().bound;
        assert!((b - 0.55044).abs() < 1e-4, "{b}");
    }

    #[test]
    fn lemma5_is_attained_by_example_one() {
        let b = lemma5_bound(3, 3, 9, 9).unwrap().bound;
        let a = a_criterion(&fixtures::example1(), ModelKind::Carryover).unwrap();
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn lemma5_rejects_infeasible_r0() {
        assert!(lemma5_bound(3, 3, 9, 10).is_err());
        assert!(lemma5_bound(3, 3, 9, 0).is_err());
    }

    #[test]
    fn lemma4_examples() {
        let d = fixtures::example1();
        let l4 = lemma4_bound(&DesignCounts::of(&d)).unwrap();
        let a = a_criterion(&d, ModelKind::Carryover).unwrap();
        assert!((l4.bound - a).abs() < 1e-6, "{} vs {a}", l4.bound);

        let l4 = lemma4_bound(&DesignCounts::of(&fixtures::example7())).unwrap();
        assert!(l4.bound <= 0.55419 + 1e-9);
        assert!(l4.bound > 0.5);
    }

    #[test]
    fn lemma4_inapplicable_without_control() {
        let d = crate::design::Design::from_rows(2, vec![vec![1, 2], vec![2, 1], vec![1, 2]]).unwrap();
        assert!(matches!(
            lemma4_bound(&DesignCounts::of(&d)),
            Err(Error::InapplicableBound(_))
        ));
    }

    #[test]
    fn optimizer_argmins() {
        let prof = optimize_r0(5, 5, 50).unwrap();
        assert_eq!(prof.best_r0, 60);
        assert!((prof.min_bound - 0.24179).abs() < 1e-4);
        assert_eq!(optimize_r0(6, 5, 30).unwrap().best_r0, 30);
        assert_eq!(optimize_r0(3, 3, 9).unwrap().best_r0, 9);
        assert_eq!(optimize_r0(4, 5, 48).unwrap().best_r0, 60);
        assert!(prof.entries.windows(2).all(|w| w[0].r0 < w[1].r0));
        assert!(prof.entries.iter().all(|e| e.r0 % 5 == 0 && e.r0 <= 125));
    }

    #[test]
    fn optimizer_rejects_bad_periods() {
        assert!(optimize_r0(3, 2, 9).is_err());
        assert!(optimize_r0(3, 5, 9).is_err());
        assert!(optimize_r0(3, 3, 1).is_err());
    }

    #[test]
    fn sequential_and_parallel_profiles_agree() {
        let a = optimize_r0_with(Execution::Sequential, 7, 5, 70).unwrap();
        let b = optimize_r0_with(Execution::Parallel, 7, 5, 70).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn delta_theta_matches_lemma5() {
        let ms = min_sums(50, 5, 60).unwrap();
        let dt = delta_theta(5, 5, 50, 48.0, ms.into()).unwrap();
        let l5 = lemma5_bound(5, 5, 50, 60).unwrap();
        assert_eq!(dt.h, l5.bound);
        assert!(dt.theta1 >= 0.0);
        assert!(dt.delta1 >= 4.0 * dt.delta2);
    }
}
