//! Balance conditions for totally balanced test-control incomplete crossover
//! designs, and optimality certificates.
//!
//! Every clause is an exact integer identity on [`DesignCounts`]. The same
//! count families drive the construction search through [`violation_score`],
//! which measures how far each family is from satisfying its clause.

use serde::Serialize;

use crate::bounds::optimize_r0;
use crate::design::{lambda_violations, Design, DesignCounts, LambdaViolation, CONTROL};
use crate::error::Error;
use crate::model::{is_completely_symmetric, InfoPair, ModelKind};

/// Tolerance for matching the A-criterion against the minimum bound.
pub const CERTIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Clause {
    /// Short identifier such as `"iii.b"`.
    pub id: &'static str,
    pub description: &'static str,
    pub holds: bool,
    /// Counterexample when the clause fails.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BalanceReport {
    /// Block-design balance of direct effects with units as blocks.
    pub direct_block: Vec<Clause>,
    /// The same conditions on the first `p − 1` periods.
    pub carryover_block: Vec<Clause>,
    /// Balance of immediate predecessors.
    pub carryover_balance: Vec<Clause>,
    /// Period uniformity of tests and control.
    pub proportional_frequency: Vec<Clause>,
    /// Joint unit-level balance between direct and carryover positions.
    pub joint_balance: Vec<Clause>,
    pub in_lambda: bool,
    pub lambda_violations: Vec<LambdaViolation>,
}

impl BalanceReport {
    pub fn clauses(&self) -> impl Iterator<Item = &Clause> {
        self.direct_block
            .iter()
            .chain(&self.carryover_block)
            .chain(&self.carryover_balance)
            .chain(&self.proportional_frequency)
            .chain(&self.joint_balance)
    }

    pub fn totally_balanced(&self) -> bool {
        self.clauses().all(|c| c.holds)
    }

    pub fn failing(&self) -> Vec<&Clause> {
        self.clauses().filter(|c| !c.holds).collect()
    }
}

/// A family of counts that should all be equal. Labels are formatted only
/// when a mismatch is reported.
struct Family {
    keys: Vec<(usize, usize)>,
    values: Vec<usize>,
    label: fn((usize, usize)) -> String,
}

impl Family {
    fn new(label: fn((usize, usize)) -> String) -> Self {
        Self {
            keys: Vec::new(),
            values: Vec::new(),
            label,
        }
    }

    fn push(&mut self, key: (usize, usize), v: usize) {
        self.keys.push(key);
        self.values.push(v);
    }

    fn mismatch(&self) -> Option<String> {
        let first = *self.values.first()?;
        let k = self.values.iter().position(|&v| v != first)?;
        Some(format!(
            "{} = {} but {} = {}",
            (self.label)(self.keys[0]),
            first,
            (self.label)(self.keys[k]),
            self.values[k]
        ))
    }

    /// `Σ |v − mean|`, zero iff all equal.
    fn spread(&self) -> f64 {
        let k = self.values.len();
        if k == 0 {
            return 0.0;
        }
        let total: usize = self.values.iter().sum();
        let dev: usize = self.values.iter().map(|&v| (v * k).abs_diff(total)).sum();
        dev as f64 / k as f64
    }
}

fn clause(id: &'static str, description: &'static str, detail: Option<String>) -> Clause {
    Clause {
        id,
        description,
        holds: detail.is_none(),
        detail,
    }
}

/// Per-unit incidence view: either the whole sequence or its first `p − 1`
/// periods.
struct BlockView<'a> {
    inc: &'a [Vec<usize>],
    control_rep: usize,
    n: usize,
    t: usize,
}

impl BlockView<'_> {
    fn floor(&self) -> usize {
        self.control_rep / self.n
    }

    fn replication(&self) -> Family {
        let mut f = Family::new(|(i, _)| format!("replication of {i}"));
        for i in 1..=self.t {
            f.push((i, 0), self.inc[i].iter().sum());
        }
        f
    }

    fn repeats(&self) -> (usize, Option<String>) {
        let mut excess = 0;
        let mut first = None;
        for i in 1..=self.t {
            for (u, &x) in self.inc[i].iter().enumerate() {
                if x > 1 {
                    excess += x - 1;
                    first.get_or_insert_with(|| format!("test {i} appears {x} times in unit {}", u + 1));
                }
            }
        }
        (excess, first)
    }

    fn concurrence(&self) -> Family {
        let mut lam = vec![vec![0usize; self.t + 1]; self.t + 1];
        let mut present = Vec::with_capacity(self.t);
        for u in 0..self.n {
            present.clear();
            present.extend((1..=self.t).filter(|&i| self.inc[i][u] > 0));
            for (a, &i) in present.iter().enumerate() {
                for &j in &present[a + 1..] {
                    lam[i][j] += 1;
                }
            }
        }
        let mut f = Family::new(|(i, j)| format!("units holding {i} and {j}"));
        for i in 1..=self.t {
            for j in i + 1..=self.t {
                f.push((i, j), lam[i][j]);
            }
        }
        f
    }

    fn control_spread(&self) -> (usize, Option<String>) {
        let lo = self.floor();
        let mut excess = 0;
        let mut first = None;
        for (u, &x) in self.inc[CONTROL].iter().enumerate() {
            let off = if x < lo { lo - x } else { x.saturating_sub(lo + 1) };
            if off > 0 {
                excess += off;
                first.get_or_insert_with(|| {
                    format!("control appears {x} times in unit {} (allowed {lo} or {})", u + 1, lo + 1)
                });
            }
        }
        (excess, first)
    }

    fn control_floor_with_test(&self) -> Family {
        let lo = self.floor();
        let mut f = Family::new(|(i, lo)| format!("units with {lo} controls holding {i}"));
        for i in 1..=self.t {
            let c = (0..self.n)
                .filter(|&u| self.inc[CONTROL][u] == lo && self.inc[i][u] > 0)
                .count();
            f.push((i, lo), c);
        }
        f
    }

    fn clauses(&self, ids: [&'static str; 5]) -> Vec<Clause> {
        vec![
            clause(ids[0], "each test treatment is replicated equally often", self.replication().mismatch()),
            clause(ids[1], "each test treatment appears at most once per unit", self.repeats().1),
            clause(ids[2], "every pair of test treatments shares the same number of units", self.concurrence().mismatch()),
            clause(ids[3], "control appears ⌊r0/n⌋ or ⌊r0/n⌋ + 1 times per unit", self.control_spread().1),
            clause(ids[4], "units with ⌊r0/n⌋ controls hold each test treatment equally often", self.control_floor_with_test().mismatch()),
        ]
    }

    fn score(&self) -> f64 {
        self.replication().spread()
            + self.repeats().0 as f64
            + self.concurrence().spread()
            + self.control_spread().0 as f64
            + self.control_floor_with_test().spread()
    }
}

fn views(c: &DesignCounts) -> (BlockView<'_>, BlockView<'_>) {
    (
        BlockView {
            inc: &c.n_iu,
            control_rep: c.r[CONTROL],
            n: c.n,
            t: c.t,
        },
        BlockView {
            inc: &c.nt_iu,
            control_rep: c.rt[CONTROL],
            n: c.n,
            t: c.t,
        },
    )
}

fn test_after_test(c: &DesignCounts) -> Family {
    let mut f = Family::new(|(i, j)| format!("{i} preceded by {j}"));
    for i in 1..=c.t {
        for j in 1..=c.t {
            if i != j {
                f.push((i, j), c.m[i][j]);
            }
        }
    }
    f
}

fn control_after_test(c: &DesignCounts) -> Family {
    let mut f = Family::new(|(i, _)| format!("control preceded by {i}"));
    for i in 1..=c.t {
        f.push((i, 0), c.m[CONTROL][i]);
    }
    f
}

fn test_after_control(c: &DesignCounts) -> Family {
    let mut f = Family::new(|(i, _)| format!("{i} preceded by control"));
    for i in 1..=c.t {
        f.push((i, 0), c.m[i][CONTROL]);
    }
    f
}

fn self_adjacency(c: &DesignCounts) -> (usize, Option<String>) {
    let total = (0..=c.t).map(|i| c.m[i][i]).sum();
    let first = (0..=c.t)
        .find(|&i| c.m[i][i] > 0)
        .map(|i| format!("treatment {i} follows itself {} times", c.m[i][i]));
    (total, first)
}

/// `(deviation, first counterexample)` for test period uniformity.
fn test_period_spread(c: &DesignCounts) -> (f64, Option<String>) {
    let target = c.n * c.p - c.r[CONTROL];
    let tp = c.t * c.p;
    let mut dev = 0;
    let mut first = None;
    for i in 1..=c.t {
        for k in 0..c.p {
            let d = (c.l_ik[i][k] * tp).abs_diff(target);
            if d > 0 {
                dev += d;
                first.get_or_insert_with(|| {
                    format!(
                        "test {i} appears {} times in period {} (need (np − r0)/(tp) = {}/{tp})",
                        c.l_ik[i][k],
                        k + 1,
                        target
                    )
                });
            }
        }
    }
    (dev as f64 / tp.max(1) as f64, first)
}

fn control_period_spread(c: &DesignCounts) -> (f64, Option<String>) {
    let r0 = c.r[CONTROL];
    let mut dev = 0;
    let mut first = None;
    for k in 0..c.p {
        let d = (c.l_ik[CONTROL][k] * c.p).abs_diff(r0);
        if d > 0 {
            dev += d;
            first.get_or_insert_with(|| {
                format!(
                    "control appears {} times in period {} (need r0/p = {r0}/{})",
                    c.l_ik[CONTROL][k],
                    k + 1,
                    c.p
                )
            });
        }
    }
    (dev as f64 / c.p as f64, first)
}

fn joint_tests(c: &DesignCounts) -> Family {
    let mut f = Family::new(|(i, j)| format!("units with {j} early and {i}"));
    for i in 1..=c.t {
        for j in 1..=c.t {
            if i != j {
                let k = (0..c.n).filter(|&u| c.nt_iu[j][u] == 1 && c.n_iu[i][u] == 1).count();
                f.push((i, j), k);
            }
        }
    }
    f
}

fn joint_early_control(c: &DesignCounts) -> Family {
    let lo = c.rt[CONTROL] / c.n;
    let mut f = Family::new(|(i, lo)| format!("units with {lo} early controls and {i}"));
    for i in 1..=c.t {
        let k = (0..c.n)
            .filter(|&u| c.nt_iu[CONTROL][u] == lo && c.n_iu[i][u] == 1)
            .count();
        f.push((i, lo), k);
    }
    f
}

fn joint_early_test(c: &DesignCounts) -> Family {
    let lo = c.r[CONTROL] / c.n;
    let mut f = Family::new(|(i, lo)| format!("units with {i} early and {lo} controls"));
    for i in 1..=c.t {
        let k = (0..c.n)
            .filter(|&u| c.nt_iu[i][u] == 1 && c.n_iu[CONTROL][u] == lo)
            .count();
        f.push((i, lo), k);
    }
    f
}

pub fn balance_report(c: &DesignCounts) -> BalanceReport {
    let (direct, early) = views(c);
    let lambda = lambda_violations(c);
    let (_, self_adj) = self_adjacency(c);
    let iii_c = test_after_control(c).mismatch().or(self_adj);
    BalanceReport {
        direct_block: direct.clauses(["i.a", "i.b", "i.c", "i.d", "i.e"]),
        carryover_block: early.clauses(["ii.a", "ii.b", "ii.c", "ii.d", "ii.e"]),
        carryover_balance: vec![
            clause("iii.a", "each test treatment is preceded by every other test treatment equally often", test_after_test(c).mismatch()),
            clause("iii.b", "the control is preceded by every test treatment equally often", control_after_test(c).mismatch()),
            clause("iii.c", "every test treatment is preceded by the control equally often and nothing follows itself", iii_c),
        ],
        proportional_frequency: vec![
            clause("iv.test", "each test treatment appears (np − r0)/(tp) times in every period", test_period_spread(c).1),
            clause("iv.control", "the control appears r0/p times in every period", control_period_spread(c).1),
        ],
        joint_balance: vec![
            clause("v.a", "units with test j early and test i are equally many for every pair", joint_tests(c).mismatch()),
            clause("v.b", "units with ⌊rt0/n⌋ early controls hold each test treatment equally often", joint_early_control(c).mismatch()),
            clause("v.c", "units with test i early and ⌊r0/n⌋ controls are equally many for every i", joint_early_test(c).mismatch()),
        ],
        in_lambda: lambda.is_empty(),
        lambda_violations: lambda,
    }
}

pub fn verify_totally_balanced(d: &Design) -> BalanceReport {
    balance_report(&DesignCounts::of(d))
}

/// Total deviation from the balance conditions, zero iff the design is
/// totally balanced. Each unit of count deviation weighs 1.
pub fn violation_score(c: &DesignCounts) -> f64 {
    let (direct, early) = views(c);
    direct.score()
        + early.score()
        + test_after_test(c).spread()
        + control_after_test(c).spread()
        + test_after_control(c).spread()
        + self_adjacency(c).0 as f64
        + test_period_spread(c).0
        + control_period_spread(c).0
        + joint_tests(c).spread()
        + joint_early_control(c).spread()
        + joint_early_test(c).spread()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    /// Simultaneously A- and MV-optimal among evenly-spread-control,
    /// self-adjacency-free designs.
    #[serde(rename = "A+MV-optimal-in-Lambda")]
    OptimalInLambda,
    /// `score = min bound / Tr(M⁻¹)`.
    Efficient { score: f64 },
    NotCertified { reason: String },
}

impl Verdict {
    pub fn label(&self) -> String {
        match self {
            Verdict::OptimalInLambda => "A+MV-optimal-in-Lambda".into(),
            Verdict::Efficient { score } => format!("efficient({score:.5})"),
            Verdict::NotCertified { reason } => format!("not-certified ({reason})"),
        }
    }

    pub fn is_optimal(&self) -> bool {
        matches!(self, Verdict::OptimalInLambda)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub design_id: String,
    pub t: usize,
    pub p: usize,
    pub n: usize,
    pub r0: usize,
    pub in_lambda: bool,
    pub totally_balanced: bool,
    pub bound_at_r0: Option<f64>,
    pub best_r0: Option<usize>,
    pub min_bound: Option<f64>,
    pub a_criterion: Option<f64>,
    pub mv_criterion: Option<f64>,
    pub completely_symmetric: bool,
    pub verdict: Verdict,
}

/// Stable identifier: dimensions plus an FNV-1a hash of the canonical text.
pub fn design_id(d: &Design) -> String {
    let hash = d
        .render()
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    format!("t{}-p{}-n{}-{hash:016x}", d.t(), d.p(), d.n())
}

pub fn certify_theorem1(d: &Design) -> Certificate {
    certify_with_report(d, &verify_totally_balanced(d))
}

pub fn certify_with_report(d: &Design, report: &BalanceReport) -> Certificate {
    let counts = DesignCounts::of(d);
    let r0 = counts.r[CONTROL];
    let mut cert = Certificate {
        design_id: design_id(d),
        t: d.t(),
        p: d.p(),
        n: d.n(),
        r0,
        in_lambda: report.in_lambda,
        totally_balanced: report.totally_balanced(),
        bound_at_r0: None,
        best_r0: None,
        min_bound: None,
        a_criterion: None,
        mv_criterion: None,
        completely_symmetric: false,
        verdict: Verdict::NotCertified { reason: String::new() },
    };

    let info = InfoPair::of(d, ModelKind::Carryover);
    cert.completely_symmetric = is_completely_symmetric(&info.m, 1e-8 * (1.0 + info.m.max_abs()));
    match info.contrast_covariance() {
        Ok(cov) => {
            cert.a_criterion = Some(cov.trace());
            cert.mv_criterion = cov.diagonal().into_iter().reduce(f64::max);
        }
        Err(e) => {
            cert.verdict = Verdict::NotCertified {
                reason: match e {
                    Error::Disconnected => "disconnected design: M is singular".into(),
                    other => other.to_string(),
                },
            };
            return cert;
        }
    }

    if d.p() < 3 || d.p() > d.t() + 1 {
        cert.verdict = Verdict::NotCertified {
            reason: format!("needs 3 ≤ p ≤ t + 1 (t = {}, p = {})", d.t(), d.p()),
        };
        return cert;
    }
    if !report.in_lambda {
        let why: Vec<String> = report.lambda_violations.iter().map(|v| v.to_string()).collect();
        cert.verdict = Verdict::NotCertified {
            reason: format!("outside the evenly-spread, self-adjacency-free class: {}", why.join("; ")),
        };
        return cert;
    }
    let profile = match optimize_r0(d.t(), d.p(), d.n()) {
        Ok(p) => p,
        Err(e) => {
            cert.verdict = Verdict::NotCertified { reason: e.to_string() };
            return cert;
        }
    };
    cert.best_r0 = Some(profile.best_r0);
    cert.min_bound = Some(profile.min_bound);
    cert.bound_at_r0 = profile.at(r0).map(|e| e.bound);

    let a = cert.a_criterion.expect("set above");
    let r0_minimizes = cert
        .bound_at_r0
        .is_some_and(|b| b <= profile.min_bound * (1.0 + 1e-12));
    if cert.totally_balanced
        && r0_minimizes
        && (a - profile.min_bound).abs() <= CERTIFY_TOL
        && cert.completely_symmetric
    {
        cert.verdict = Verdict::OptimalInLambda;
    } else {
        cert.verdict = Verdict::Efficient {
            score: (profile.min_bound / a).min(1.0),
        };
    }
    cert
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::is_in_lambda;
    use crate::fixtures;

    fn is_in_lambda_flag(d: &Design) -> bool {
        is_in_lambda(d).0
    }

    #[test]
    fn example_one_is_totally_balanced() {
        let rep = verify_totally_balanced(&fixtures::example1());
        assert!(rep.totally_balanced(), "{:?}", rep.failing());
        assert!(rep.in_lambda);
        assert_eq!(violation_score(&DesignCounts::of(&fixtures::example1())), 0.0);
    }

    #[test]
    fn example_seven_fails_some_clause() {
        let d = fixtures::example7();
        let rep = verify_totally_balanced(&d);
        assert!(!rep.totally_balanced());
        assert!(rep.in_lambda);
        assert!(violation_score(&DesignCounts::of(&d)) > 0.0);
        for c in rep.failing() {
            assert!(c.detail.is_some());
        }
    }

    #[test]
    fn adjacent_controls_break_carryover_balance() {
        let d = Design::from_rows(2, vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 0]]).unwrap();
        let rep = verify_totally_balanced(&d);
        let iii_c = rep.carryover_balance.iter().find(|c| c.id == "iii.c").unwrap();
        assert!(!iii_c.holds);
        assert!(!rep.in_lambda);
    }

    #[test]
    fn certificates_for_examples() {
        let c1 = certify_theorem1(&fixtures::example1());
        assert_eq!(c1.verdict, Verdict::OptimalInLambda);
        assert_eq!(c1.best_r0, Some(9));

        let c7 = certify_theorem1(&fixtures::example7());
        match c7.verdict {
            Verdict::Efficient { score } => assert!((score - 0.993).abs() < 1e-3, "{score}"),
            other => panic!("unexpected {other:?}"),
        }

        let c5 = certify_theorem1(&fixtures::example5());
        assert_eq!(c5.verdict, Verdict::OptimalInLambda);
        assert!((c5.a_criterion.unwrap() - 1.02327).abs() < 1e-4);
    }

    #[test]
    fn outside_lambda_is_not_certified() {
        let mut d = fixtures::example1();
        let k = (0..3).find(|&k| d.get(k, 0) == CONTROL).unwrap();
        d.swap_in_unit(0, k, (k + 1) % 3);
        assert!(!is_in_lambda_flag(&d));
        let c = certify_theorem1(&d);
        assert!(matches!(c.verdict, Verdict::NotCertified { .. }));
        assert!(c.a_criterion.is_some());
    }

    #[test]
    fn disconnected_is_not_certified() {
        let d = Design::from_rows(2, vec![vec![1, 2], vec![2, 1], vec![1, 2]]).unwrap();
        let c = certify_theorem1(&d);
        match c.verdict {
            Verdict::NotCertified { reason } => assert!(reason.contains("disconnected")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn design_id_is_stable_under_reparse() {
        let d = fixtures::example1();
        let again = Design::parse(&d.render()).unwrap();
        assert_eq!(design_id(&d), design_id(&again));
        assert!(design_id(&d).starts_with("t3-p3-n9-"));
    }
}
