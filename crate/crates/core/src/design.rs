//! Crossover designs and their counting statistics.
//!
//! A design assigns one of `t + 1` treatments to each of `p` periods on each
//! of `n` units. Label `0` is the control; `1..=t` are the test treatments.
//! The grid is stored period-major, so `grid[k * n + u]` is the treatment
//! given to unit `u` in period `k` (both zero-based).

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// Label reserved for the control treatment.
pub const CONTROL: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Design {
    t: usize,
    p: usize,
    n: usize,
    grid: Vec<usize>,
}

/// Serializes as `{t, p, n, rows}` with one array per period.
impl Serialize for Design {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let rows: Vec<&[usize]> = (0..self.p).map(|k| self.row(k)).collect();
        let mut st = s.serialize_struct("Design", 4)?;
        st.serialize_field("t", &self.t)?;
        st.serialize_field("p", &self.p)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("rows", &rows)?;
        st.end()
    }
}

impl Design {
    /// Builds a design from period rows. Every row must have the same length
    /// and every label must lie in `0..=t`.
    pub fn from_rows(t: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        let p = rows.len();
        if p == 0 {
            return Err(Error::Dimension("a design needs at least one period".into()));
        }
        let n = rows[0].len();
        if n == 0 {
            return Err(Error::Dimension("a design needs at least one unit".into()));
        }
        let mut grid = Vec::with_capacity(p * n);
        for (k, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "period {} has {} units, expected {n}",
                    k + 1,
                    row.len()
                )));
            }
            if let Some(u) = row.iter().position(|&x| x > t) {
                return Err(Error::Dimension(format!(
                    "label {} at period {}, unit {} exceeds t = {t}",
                    row[u],
                    k + 1,
                    u + 1
                )));
            }
            grid.extend(row);
        }
        Ok(Self { t, p, n, grid })
    }

    /// Builds a design from unit sequences (one `Vec` of length `p` per unit).
    pub fn from_sequences(t: usize, sequences: &[Vec<usize>]) -> Result<Self> {
        let n = sequences.len();
        if n == 0 {
            return Err(Error::Dimension("a design needs at least one unit".into()));
        }
        let p = sequences[0].len();
        if let Some(u) = sequences.iter().position(|s| s.len() != p) {
            return Err(Error::Dimension(format!(
                "unit {} has {} periods, expected {p}",
                u + 1,
                sequences[u].len()
            )));
        }
        let rows = (0..p)
            .map(|k| sequences.iter().map(|s| s[k]).collect())
            .collect();
        Self::from_rows(t, rows)
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Treatment in `period` on `unit` (zero-based).
    #[inline]
    pub fn get(&self, period: usize, unit: usize) -> usize {
        self.grid[period * self.n + unit]
    }

    #[inline]
    pub(crate) fn set(&mut self, period: usize, unit: usize, label: usize) {
        debug_assert!(label <= self.t);
        self.grid[period * self.n + unit] = label;
    }

    #[inline]
    pub(crate) fn swap_in_unit(&mut self, unit: usize, a: usize, b: usize) {
        self.grid.swap(a * self.n + unit, b * self.n + unit);
    }

    pub fn row(&self, period: usize) -> &[usize] {
        &self.grid[period * self.n..(period + 1) * self.n]
    }

    /// The treatment sequence received by `unit`.
    pub fn sequence(&self, unit: usize) -> Vec<usize> {
        (0..self.p).map(|k| self.get(k, unit)).collect()
    }

    pub fn sequences(&self) -> Vec<Vec<usize>> {
        (0..self.n).map(|u| self.sequence(u)).collect()
    }

    /// Total replication of the control.
    pub fn control_replication(&self) -> usize {
        self.grid.iter().filter(|&&x| x == CONTROL).count()
    }

    /// Places the units of `other` after those of `self`.
    pub fn juxtapose(&self, other: &Design) -> Result<Design> {
        if self.p != other.p {
            return Err(Error::Dimension(format!(
                "cannot juxtapose designs with {} and {} periods",
                self.p, other.p
            )));
        }
        let t = self.t.max(other.t);
        let rows = (0..self.p)
            .map(|k| self.row(k).iter().chain(other.row(k)).copied().collect())
            .collect();
        Design::from_rows(t, rows)
    }

    /// Applies `map` to every label. `map[old] = new`.
    pub fn relabel(&self, map: &[usize]) -> Result<Design> {
        let rows = (0..self.p)
            .map(|k| self.row(k).iter().map(|&x| map[x]).collect())
            .collect();
        Design::from_rows(self.t, rows)
    }

    /// Reorders units: unit `u` of the result is unit `order[u]` of `self`.
    pub fn permute_units(&self, order: &[usize]) -> Design {
        let sequences: Vec<Vec<usize>> = order.iter().map(|&u| self.sequence(u)).collect();
        Design::from_sequences(self.t, &sequences).expect("permutation preserves validity")
    }

    /// Canonical text form: a `t p n` header followed by one line per period.
    pub fn render(&self) -> String {
        let mut out = format!("{} {} {}\n", self.t, self.p, self.n);
        for k in 0..self.p {
            let line: Vec<String> = self.row(k).iter().map(|x| x.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parses the design text format. Blank lines and lines starting with `#`
    /// are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 0,
            column: None,
            message: "missing \"t p n\" header".into(),
        })?;
        let header = parse_numbers(hline, header)?;
        let [t, p, n] = header[..] else {
            return Err(Error::Parse {
                line: hline,
                column: None,
                message: format!("header must hold exactly 3 integers, found {}", header.len()),
            });
        };
        if p == 0 || n == 0 {
            return Err(Error::Parse {
                line: hline,
                column: None,
                message: "p and n must be positive".into(),
            });
        }

        let mut grid = Vec::with_capacity(p * n);
        for k in 0..p {
            let (lno, line) = lines.next().ok_or_else(|| Error::Parse {
                line: hline,
                column: None,
                message: format!("expected {p} period rows, found {k}"),
            })?;
            let row = parse_numbers(lno, line)?;
            if row.len() != n {
                return Err(Error::Parse {
                    line: lno,
                    column: Some(row.len().min(n) + 1),
                    message: format!("period row {} has {} entries, expected {n}", k + 1, row.len()),
                });
            }
            if let Some(col) = row.iter().position(|&x| x > t) {
                return Err(Error::Parse {
                    line: lno,
                    column: Some(col + 1),
                    message: format!("label {} out of range 0..={t}", row[col]),
                });
            }
            grid.extend(row);
        }
        if let Some((lno, _)) = lines.next() {
            return Err(Error::Parse {
                line: lno,
                column: None,
                message: format!("unexpected content after {p} period rows"),
            });
        }
        Ok(Self { t, p, n, grid })
    }
}

fn parse_numbers(line: usize, text: &str) -> Result<Vec<usize>> {
    text.split_whitespace()
        .enumerate()
        .map(|(i, tok)| {
            tok.parse::<usize>().map_err(|_| Error::Parse {
                line,
                column: Some(i + 1),
                message: format!("{tok:?} is not a non-negative integer"),
            })
        })
        .collect()
}

impl FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Design::parse(s)
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Replication and adjacency statistics of a design.
///
/// Tables are indexed by treatment first. `m[i][j]` counts how often
/// treatment `i` is immediately preceded by treatment `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DesignCounts {
    pub t: usize,
    pub p: usize,
    pub n: usize,
    /// Occurrences of treatment `i` on unit `u`.
    pub n_iu: Vec<Vec<usize>>,
    /// Occurrences of treatment `i` on unit `u` within the first `p - 1` periods.
    pub nt_iu: Vec<Vec<usize>>,
    /// Occurrences of treatment `i` in period `k`.
    pub l_ik: Vec<Vec<usize>>,
    pub m: Vec<Vec<usize>>,
    pub r: Vec<usize>,
    pub rt: Vec<usize>,
    /// Control replication restricted to periods `2..=p`.
    pub rhat0: usize,
}

impl DesignCounts {
    pub fn of(d: &Design) -> Self {
        let (t, p, n) = (d.t, d.p, d.n);
        let mut n_iu = vec![vec![0; n]; t + 1];
        let mut nt_iu = vec![vec![0; n]; t + 1];
        let mut l_ik = vec![vec![0; p]; t + 1];
        let mut m = vec![vec![0; t + 1]; t + 1];
        for u in 0..n {
            for k in 0..p {
                let i = d.get(k, u);
                n_iu[i][u] += 1;
                l_ik[i][k] += 1;
                if k + 1 < p {
                    nt_iu[i][u] += 1;
                }
                if k > 0 {
                    m[i][d.get(k - 1, u)] += 1;
                }
            }
        }
        let r: Vec<usize> = n_iu.iter().map(|row| row.iter().sum()).collect();
        let rt: Vec<usize> = nt_iu.iter().map(|row| row.iter().sum()).collect();
        let rhat0 = r[CONTROL] - l_ik[CONTROL][0];
        Self {
            t,
            p,
            n,
            n_iu,
            nt_iu,
            l_ik,
            m,
            r,
            rt,
            rhat0,
        }
    }

    /// `(Σ n₀ᵤ², Σ n₀ᵤ ñ₀ᵤ, Σ ñ₀ᵤ²)` for the control.
    pub fn control_sums(&self) -> (usize, usize, usize) {
        let full = &self.n_iu[CONTROL];
        let trunc = &self.nt_iu[CONTROL];
        full.iter().zip(trunc).fold((0, 0, 0), |(a, b, c), (&x, &y)| {
            (a + x * x, b + x * y, c + y * y)
        })
    }
}

pub fn compute_counts(d: &Design) -> DesignCounts {
    DesignCounts::of(d)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaViolation {
    /// The control does not appear `r0 / p` times in this period.
    ControlNotPeriodUniform { period: usize, count: usize, r0: usize },
    /// Treatment is immediately preceded by itself `count` times.
    SelfAdjacency { treatment: usize, count: usize },
}

impl fmt::Display for LambdaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaViolation::ControlNotPeriodUniform { period, count, r0 } => write!(
                f,
                "control appears {count} times in period {period} (r0 = {r0} is not spread evenly)"
            ),
            LambdaViolation::SelfAdjacency { treatment, count } => {
                write!(f, "treatment {treatment} follows itself {count} times")
            }
        }
    }
}

/// Membership in the class of designs where the control is spread evenly over
/// periods and no treatment immediately follows itself. Returns the list of
/// violations, empty iff the design belongs to the class.
pub fn lambda_violations(c: &DesignCounts) -> Vec<LambdaViolation> {
    let mut out = Vec::new();
    let r0 = c.r[CONTROL];
    for (k, &count) in c.l_ik[CONTROL].iter().enumerate() {
        if count * c.p != r0 {
            out.push(LambdaViolation::ControlNotPeriodUniform {
                period: k + 1,
                count,
                r0,
            });
        }
    }
    for i in 0..=c.t {
        if c.m[i][i] > 0 {
            out.push(LambdaViolation::SelfAdjacency {
                treatment: i,
                count: c.m[i][i],
            });
        }
    }
    out
}

pub fn is_in_lambda(d: &Design) -> (bool, Vec<LambdaViolation>) {
    let v = lambda_violations(&DesignCounts::of(d));
    (v.is_empty(), v)
}
