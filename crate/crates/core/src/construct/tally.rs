//! Incremental violation score for moves that keep every control cell fixed.
//!
//! Each count behind the balance clauses is a sum of per-unit contributions,
//! so swapping two cells of one unit only needs that unit removed and added
//! back. [`Tally::score`] equals [`crate::verify::violation_score`] on the same
//! design as long as the control replications `r0` and `rt0` are unchanged.

use crate::design::{Design, CONTROL};

fn spread(values: impl Iterator<Item = i64> + Clone) -> f64 {
    let k = values.clone().count() as i64;
    if k == 0 {
        return 0.0;
    }
    let total: i64 = values.clone().sum();
    let dev: i64 = values.map(|v| (v * k - total).abs()).sum();
    dev as f64 / k as f64
}

/// Counts restricted to one window of periods (all of them, or the first
/// `p − 1`).
#[derive(Debug, Clone)]
struct Block {
    lo: usize,
    rep: Vec<i64>,
    /// Upper triangle, `i < j`.
    pair: Vec<i64>,
    repeats: i64,
    control_off: i64,
    floor_with: Vec<i64>,
}

impl Block {
    fn new(v: usize, lo: usize) -> Self {
        Self {
            lo,
            rep: vec![0; v],
            pair: vec![0; v * v],
            repeats: 0,
            control_off: 0,
            floor_with: vec![0; v],
        }
    }

    fn apply(&mut self, cnt: &[usize], present: &[usize], sign: i64) {
        let v = cnt.len();
        for &i in present {
            if i != CONTROL {
                self.rep[i] += sign * cnt[i] as i64;
                self.repeats += sign * (cnt[i] - 1) as i64;
            }
        }
        for (a, &i) in present.iter().enumerate() {
            for &j in &present[a + 1..] {
                if i != CONTROL && j != CONTROL {
                    let (x, y) = if i < j { (i, j) } else { (j, i) };
                    self.pair[x * v + y] += sign;
                }
            }
        }
        let c0 = cnt[CONTROL];
        let off = if c0 < self.lo { self.lo - c0 } else { c0.saturating_sub(self.lo + 1) };
        self.control_off += sign * off as i64;
        if c0 == self.lo {
            for &i in present {
                if i != CONTROL {
                    self.floor_with[i] += sign;
                }
            }
        }
    }

    fn score(&self, t: usize) -> f64 {
        let v = t + 1;
        spread(self.rep[1..].iter().copied())
            + self.repeats as f64
            + spread((1..=t).flat_map(|i| (i + 1..=t).map(move |j| (i, j))).map(|(i, j)| self.pair[i * v + j]))
            + self.control_off as f64
            + spread(self.floor_with[1..].iter().copied())
    }
}

#[derive(Debug, Clone)]
pub struct Tally {
    t: usize,
    p: usize,
    r0: usize,
    target_test: usize,
    full: Block,
    early: Block,
    /// `m[i * v + j]`: `i` immediately preceded by `j`.
    m: Vec<i64>,
    /// `l[i * p + k]`
    l: Vec<i64>,
    /// `[i * v + j]`: units with `j` once early and `i` once overall.
    joint: Vec<i64>,
    joint_early_control: Vec<i64>,
    joint_early_test: Vec<i64>,
    lo_full: usize,
    lo_early: usize,
    cnt: Vec<usize>,
    cnt_early: Vec<usize>,
    present: Vec<usize>,
    present_early: Vec<usize>,
    seq: Vec<usize>,
}

impl Tally {
    pub fn new(d: &Design) -> Self {
        let (t, p, n) = (d.t(), d.p(), d.n());
        let v = t + 1;
        let r0 = d.control_replication();
        let rt0: usize = (0..n)
            .map(|u| (0..p.saturating_sub(1)).filter(|&k| d.get(k, u) == CONTROL).count())
            .sum();
        let (lo_full, lo_early) = (r0 / n, rt0 / n);
        let mut tally = Self {
            t,
            p,
            r0,
            target_test: n * p - r0,
            full: Block::new(v, lo_full),
            early: Block::new(v, lo_early),
            m: vec![0; v * v],
            l: vec![0; v * p],
            joint: vec![0; v * v],
            joint_early_control: vec![0; v],
            joint_early_test: vec![0; v],
            lo_full,
            lo_early,
            cnt: vec![0; v],
            cnt_early: vec![0; v],
            present: Vec::with_capacity(p),
            present_early: Vec::with_capacity(p),
            seq: Vec::with_capacity(p),
        };
        for u in 0..n {
            tally.apply(d, u, 1);
        }
        tally
    }

    /// Adds (`sign = 1`) or removes (`sign = -1`) unit `u` of `d`.
    pub fn apply(&mut self, d: &Design, u: usize, sign: i64) {
        let (v, p) = (self.t + 1, self.p);
        self.seq.clear();
        self.seq.extend((0..p).map(|k| d.get(k, u)));
        for x in self.present.drain(..).chain(self.present_early.drain(..)) {
            self.cnt[x] = 0;
            self.cnt_early[x] = 0;
        }
        for (k, &x) in self.seq.iter().enumerate() {
            if self.cnt[x] == 0 {
                self.present.push(x);
            }
            self.cnt[x] += 1;
            if k + 1 < p {
                if self.cnt_early[x] == 0 {
                    self.present_early.push(x);
                }
                self.cnt_early[x] += 1;
            }
            self.l[x * p + k] += sign;
            if k > 0 {
                self.m[x * v + self.seq[k - 1]] += sign;
            }
        }
        self.full.apply(&self.cnt, &self.present, sign);
        self.early.apply(&self.cnt_early, &self.present_early, sign);

        for &i in &self.present {
            if i == CONTROL || self.cnt[i] != 1 {
                continue;
            }
            for &j in &self.present_early {
                if j != CONTROL && j != i && self.cnt_early[j] == 1 {
                    self.joint[i * v + j] += sign;
                }
            }
            if self.cnt_early[CONTROL] == self.lo_early {
                self.joint_early_control[i] += sign;
            }
        }
        if self.cnt[CONTROL] == self.lo_full {
            for &i in &self.present_early {
                if i != CONTROL && self.cnt_early[i] == 1 {
                    self.joint_early_test[i] += sign;
                }
            }
        }
    }

    pub fn score(&self) -> f64 {
        let (t, p) = (self.t, self.p);
        let v = t + 1;
        let tests = 1..=t;
        let ordered = move || tests.clone().flat_map(move |i| (1..=t).filter(move |&j| j != i).map(move |j| (i, j)));
        let tp = (t * p) as i64;
        let test_period: i64 = (1..=t)
            .flat_map(|i| (0..p).map(move |k| (i, k)))
            .map(|(i, k)| (self.l[i * p + k] * tp - self.target_test as i64).abs())
            .sum();
        let control_period: i64 = (0..p).map(|k| (self.l[k] * p as i64 - self.r0 as i64).abs()).sum();
        self.full.score(t)
            + self.early.score(t)
            + spread(ordered().map(|(i, j)| self.m[i * v + j]))
            + spread((1..=t).map(|i| self.m[i]))
            + spread((1..=t).map(|i| self.m[i * v]))
            + (0..v).map(|i| self.m[i * v + i]).sum::<i64>() as f64
            + test_period as f64 / tp.max(1) as f64
            + control_period as f64 / p as f64
            + spread(ordered().map(|(i, j)| self.joint[i * v + j]))
            + spread(self.joint_early_control[1..].iter().copied())
            + spread(self.joint_early_test[1..].iter().copied())
    }
}
