//! Checks shared by the acceptance runner and the property suites.
//!
//! Each check returns a [`Tally`] so the acceptance runner can print a
//! one-line summary while the suites assert on it directly.

#![allow(dead_code)]

use crossover::bounds::{delta_theta, lemma4_bound, lemma5_bound, min_sums, ControlSums};
use crossover::construct::{construct, lemma8_construct, lemma9_construct};
use crossover::design::{Design, DesignCounts, CONTROL};
use crossover::fixtures;
use crossover::model::{a_criterion, c_matrix, period_free_bound, ModelKind};
use crossover::oracle::{brute_force_min_sums, ols_covariance_oracle, random_design, random_lambda_design};
use crossover::verify::certify_theorem1;
use crossover::Error;

#[derive(Debug, Default)]
pub struct Tally {
    pub checked: usize,
    pub skipped: usize,
    pub failures: Vec<String>,
}

impl Tally {
    pub fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    pub fn ok(&self) -> bool {
        self.failures.is_empty() && self.checked > 0
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{} checked", self.checked);
        if self.skipped > 0 {
            s.push_str(&format!(", {} skipped", self.skipped));
        }
        if !self.failures.is_empty() {
            s.push_str(&format!(", {} failed; first: {}", self.failures.len(), self.failures[0]));
        }
        s
    }

    pub fn assert_ok(&self) {
        assert!(self.ok(), "{}", self.summary());
    }
}

/// Designs that certify as optimal, with a label each.
pub fn certified_designs() -> Vec<(String, Design)> {
    vec![
        ("example 1".into(), fixtures::example1()),
        ("example 2".into(), fixtures::example2()),
        ("example 5".into(), fixtures::example5()),
        ("balanced uniform t=2 n=6".into(), lemma8_construct(2, 6).unwrap()),
        ("balanced uniform t=3 n=4".into(), lemma8_construct(3, 4).unwrap()),
        ("square pair t=4 n=16".into(), lemma9_construct(4, 16).unwrap()),
        ("constructed t=4 p=3 n=36".into(), construct(4, 3, 36).unwrap()),
    ]
}

/// `min_sums` against the sequence-enumerating oracle on every `n ≤ 8`,
/// `p ∈ {3, 4, 5}` and `r0` a multiple of `p` up to `np/2`.
pub fn min_sums_vs_brute_force() -> Tally {
    let mut tally = Tally::default();
    for p in 3..=5 {
        for n in 1..=8 {
            for r0 in (0..=n * p / 2).step_by(p) {
                let fast = min_sums(n, p, r0);
                let slow = brute_force_min_sums(n, p, r0);
                match (fast, slow) {
                    (Ok(a), Ok(b)) => tally.check(a == b, || format!("n={n} p={p} r0={r0}: {a:?} vs oracle {b:?}")),
                    (Err(_), Err(_)) => tally.skipped += 1,
                    (a, b) => tally.check(false, || format!("n={n} p={p} r0={r0}: {a:?} vs oracle {b:?}")),
                }
            }
        }
    }
    tally
}

/// `a_criterion` against the least-squares oracle on `count` connected
/// random designs per model kind.
pub fn oracle_equality(count: usize) -> Tally {
    let mut tally = Tally::default();
    for kind in ModelKind::ALL {
        let mut seed = 0u64;
        let mut done = 0;
        while done < count {
            seed += 1;
            let t = 2 + (seed % 4) as usize;
            let p = 3 + (seed / 4 % 3) as usize;
            let n = 4 + (seed / 12 % 7) as usize;
            let d = random_design(t, p, n, seed ^ 0x5eed).unwrap();
            let fast = a_criterion(&d, kind);
            let oracle = ols_covariance_oracle(&d, kind);
            match (fast, oracle) {
                (Ok(a), Ok(cov)) => {
                    let b = cov.trace();
                    tally.check((a - b).abs() <= 1e-8 * (1.0 + b.abs()), || {
                        format!("{kind} seed {seed}: {a} vs oracle {b}")
                    });
                    done += 1;
                }
                (Err(Error::Disconnected), Err(Error::Disconnected)) => tally.skipped += 1,
                (a, b) => {
                    tally.check(false, || format!("{kind} seed {seed}: {a:?} vs oracle {b:?}"));
                    done += 1;
                }
            }
        }
    }
    tally
}

/// `lemma5(r0) ≤ lemma4 ≤ trace` on `count` seeded designs in the
/// evenly-spread-control class with `3 ≤ p ≤ t + 1`.
pub fn bound_dominance(count: usize) -> Tally {
    let mut tally = Tally::default();
    let mut seed = 0u64;
    let mut done = 0;
    while done < count {
        seed += 1;
        let t = 2 + (seed % 6) as usize;
        let p = 3 + (seed / 6 % 3) as usize;
        if p > t + 1 {
            continue;
        }
        let n = p + (seed / 18 % 9) as usize;
        let d = match random_lambda_design(t, p, n, seed) {
            Ok(d) => d,
            Err(_) => {
                tally.skipped += 1;
                continue;
            }
        };
        let c = DesignCounts::of(&d);
        let trace = match a_criterion(&d, ModelKind::Carryover) {
            Ok(x) => x,
            Err(_) => {
                tally.skipped += 1;
                continue;
            }
        };
        done += 1;
        let l4 = match lemma4_bound(&c) {
            Ok(b) => b.bound,
            Err(e) => {
                tally.check(false, || format!("seed {seed} (t={t} p={p} n={n}): lemma4 {e}"));
                continue;
            }
        };
        tally.check(l4 <= trace + 1e-8, || format!("seed {seed} (t={t} p={p} n={n}): lemma4 {l4} > trace {trace}"));
        let r0 = c.r[CONTROL];
        if let Ok(l5) = lemma5_bound(t, p, n, r0) {
            tally.check(l5.bound <= l4 + 1e-8, || {
                format!("seed {seed} (t={t} p={p} n={n} r0={r0}): lemma5 {} > lemma4 {l4}", l5.bound)
            });
        }
    }
    tally
}

/// Random design closed under cyclic rotation of each unit's sequence, so
/// every treatment is spread evenly over periods.
pub fn random_rotation_design(t: usize, p: usize, bases: usize, seed: u64) -> Design {
    let base = random_design(t, p, bases, seed).unwrap().sequences();
    let seqs: Vec<Vec<usize>> = base
        .iter()
        .flat_map(|s| (0..p).map(move |k| (0..p).map(|j| s[(j + k) % p]).collect()))
        .collect();
    Design::from_sequences(t, &seqs).unwrap()
}

/// Carryover `C` against the period-free bound: equal for period-uniform
/// designs, Loewner-below otherwise. Period-uniform designs also have equal
/// two-way and one-way traces.
pub fn period_free_checks() -> Tally {
    let mut tally = Tally::default();
    let mut uniform: Vec<(String, Design)> = certified_designs();
    uniform.push(("example 7".into(), fixtures::example7()));
    for seed in 0..40u64 {
        let (t, p) = (2 + (seed % 4) as usize, 3 + (seed / 4 % 3) as usize);
        uniform.push((format!("rotation seed {seed}"), random_rotation_design(t, p, 3, seed)));
    }
    for (name, d) in &uniform {
        let c = DesignCounts::of(d);
        let even = (0..=d.t()).all(|i| (0..d.p()).all(|k| c.l_ik[i][k] * d.p() == c.r[i]));
        tally.check(even, || format!("{name}: not period-uniform"));
        let diff = c_matrix(d, ModelKind::Carryover).max_abs_diff(&period_free_bound(d));
        tally.check(diff <= 1e-8, || format!("{name}: C differs from the period-free bound by {diff:e}"));
        match (a_criterion(d, ModelKind::TwoWay), a_criterion(d, ModelKind::OneWay)) {
            (Ok(two), Ok(one)) => {
                tally.check((two - one).abs() <= 1e-8 * (1.0 + one), || format!("{name}: two-way {two} vs one-way {one}"))
            }
            (Err(Error::Disconnected), Err(Error::Disconnected)) => tally.skipped += 1,
            (a, b) => tally.check(false, || format!("{name}: two-way {a:?} vs one-way {b:?}")),
        }
    }
    for seed in 0..60u64 {
        let (t, p, n) = (2 + (seed % 4) as usize, 3 + (seed / 4 % 3) as usize, 5 + (seed % 7) as usize);
        let d = random_design(t, p, n, seed).unwrap();
        let below = c_matrix(&d, ModelKind::Carryover).loewner_leq(&period_free_bound(&d), 1e-8).unwrap();
        tally.check(below, || format!("random seed {seed}: C not below the period-free bound"));
    }
    tally
}

/// The design-specific bound is attained by every certified design.
pub fn lemma4_equality() -> Tally {
    let mut tally = Tally::default();
    for (name, d) in certified_designs() {
        let cert = certify_theorem1(&d);
        tally.check(cert.verdict.is_optimal(), || format!("{name}: {}", cert.verdict.label()));
        let l4 = lemma4_bound(&DesignCounts::of(&d)).unwrap().bound;
        let a = a_criterion(&d, ModelKind::Carryover).unwrap();
        tally.check((l4 - a).abs() <= 1e-6, || format!("{name}: lemma4 {l4} vs trace {a}"));
    }
    tally
}

/// Sample points for the free control sums at one `(t, p, n, r0)`.
fn xi_samples(t: usize, p: usize, n: usize, r0: usize) -> Option<(f64, Vec<ControlSums>)> {
    let ms = min_sums(n, p, r0).ok()?;
    let rt0 = (r0 * (p - 1) / p) as f64;
    let (nf, pf, tf) = (n as f64, p as f64, t as f64);
    // Per-unit control counts are at most ⌈p/2⌉ overall and ⌈(p−1)/2⌉ early
    // when the control never follows itself.
    let (c_all, c_early) = ((pf / 2.0).ceil(), ((pf - 1.0) / 2.0).ceil());
    let xi2_max = (nf * tf * (pf - 1.0) - tf * rt0).min(c_all * rt0);
    let spread = |lo: f64, hi: f64| -> Vec<f64> {
        if hi <= lo {
            return vec![lo];
        }
        vec![lo, lo + 0.25 * (hi - lo), lo + 0.5 * (hi - lo), hi]
    };
    let xi1s = spread(ms.xi1 as f64, r0 as f64 * c_all);
    let xi2s = spread(ms.xi2 as f64, xi2_max);
    let xi3s = spread(ms.xi3 as f64, rt0 * c_early);
    let mut out = Vec::new();
    for &a in &xi1s {
        for &b in &xi2s {
            for &c in &xi3s {
                out.push(ControlSums::new(a, b, c));
            }
        }
    }
    Some((rt0, out))
}

fn appendix_grid_points() -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (2..=8).flat_map(|t| {
        (3..=t + 1).flat_map(move |p| {
            [p, 2 * p, 3 * p + 1, 4 * t].into_iter().flat_map(move |n| {
                (1..=n / 2).map(move |k| k * p).map(move |r0| (t, p, n, r0))
            })
        })
    })
}

/// The inequalities between the free-sum quantities on the grid
/// `t ∈ [2, 8]`, `p ∈ [3, t + 1]`, `0 < rt0 ≤ n(p − 1)/2`.
pub fn appendix_inequalities() -> Tally {
    let mut tally = Tally::default();
    for (t, p, n, r0) in appendix_grid_points() {
        let Some((rt0, samples)) = xi_samples(t, p, n, r0) else {
            tally.skipped += 1;
            continue;
        };
        let (tf, pf, nf) = (t as f64, p as f64, n as f64);
        let frac = rt0 / nf;
        let at = |xs: &ControlSums| format!("t={t} p={p} n={n} r0={r0} xi=({}, {}, {})", xs.xi1, xs.xi2, xs.xi3);

        tally.check(rt0 <= nf * (pf - 1.0) / 2.0, || format!("t={t} p={p} n={n} r0={r0}: rt0 above n(p−1)/2"));
        let ms = min_sums(n, p, r0).unwrap();
        tally.check(ms.xi2 as f64 <= tf * (nf * (pf - 1.0) - rt0), || {
            format!("t={t} p={p} n={n} r0={r0}: minimum Σn₀ñ₀ = {} above t[n(p−1) − rt0]", ms.xi2)
        });

        for xs in samples {
            let Ok(dt) = delta_theta(t, p, n, rt0, xs) else {
                tally.skipped += 1;
                continue;
            };
            if !(dt.delta2 > 0.0) {
                tally.skipped += 1;
                continue;
            }
            let slack = 1e-9 * (1.0 + dt.delta1.abs());
            tally.check(dt.delta1 >= (tf - 1.0) * dt.delta2 - slack, || {
                format!("{}: Δ1 {} < (t−1)Δ2 {}", at(&xs), dt.delta1, (tf - 1.0) * dt.delta2)
            });
            if t >= 2 && frac <= (pf - 1.0) / (tf + 1.0) && (xs.xi1, xs.xi2, xs.xi3) == (ms.xi1 as f64, ms.xi2 as f64, ms.xi3 as f64) {
                let lhs = dt.delta1 / ((tf - 1.0) * dt.delta2);
                let rhs = tf * (pf - 1.0) / (tf * (pf - 1.0) - 1.0);
                tally.check(lhs >= rhs - 1e-9, || format!("{}: Δ1/((t−1)Δ2) {lhs} < {rhs}", at(&xs)));
            }
            tally.check(dt.theta1 >= -1e-12, || format!("{}: Θ1 {} negative", at(&xs), dt.theta1));
            let scaled = (pf * tf - tf - 1.0) / (tf * (pf - 1.0)) * dt.theta1;
            tally.check(scaled <= dt.theta2 + 1e-12, || format!("{}: scaled Θ1 {scaled} > Θ2 {}", at(&xs), dt.theta2));
            if frac >= (pf - 1.0) / (tf + 1.0) {
                tally.check(dt.theta2 >= dt.theta1 - 1e-12, || {
                    format!("{}: Θ2 {} < Θ1 {}", at(&xs), dt.theta2, dt.theta1)
                });
            }
        }
    }
    tally
}

/// `H` is nondecreasing in each free control sum: forward differences over
/// the same grid stay above `−1e−9`.
pub fn h_monotonicity() -> Tally {
    let mut tally = Tally::default();
    for (t, p, n, r0) in appendix_grid_points() {
        let Some((rt0, samples)) = xi_samples(t, p, n, r0) else {
            tally.skipped += 1;
            continue;
        };
        let h = |xs: ControlSums| {
            delta_theta(t, p, n, rt0, xs)
                .ok()
                .filter(|dt| dt.delta1 > 0.0 && dt.delta2 > 0.0)
                .map(|dt| dt.h)
        };
        for xs in samples {
            let Some(base) = h(xs) else {
                tally.skipped += 1;
                continue;
            };
            let step = 1e-3;
            let moves = [
                ControlSums::new(xs.xi1 + step, xs.xi2, xs.xi3),
                ControlSums::new(xs.xi1, xs.xi2 + step, xs.xi3),
                ControlSums::new(xs.xi1, xs.xi2, xs.xi3 + step),
            ];
            for (axis, m) in moves.into_iter().enumerate() {
                let Some(next) = h(m) else {
                    tally.skipped += 1;
                    continue;
                };
                let slope = (next - base) / step;
                tally.check(slope >= -1e-9, || {
                    format!("t={t} p={p} n={n} r0={r0} xi=({}, {}, {}): ∂H/∂ξ{} = {slope:e}", xs.xi1, xs.xi2, xs.xi3, axis + 1)
                });
            }
        }
    }
    tally
}
