//! Balanced incomplete block designs on treatments `1..=v`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BibDesign {
    pub v: usize,
    pub k: usize,
    pub b: usize,
    pub r: usize,
    pub lambda: usize,
    /// Each block lists its treatments in increasing order.
    pub blocks: Vec<Vec<usize>>,
}

impl BibDesign {
    /// Builds the design from its blocks and checks it is balanced.
    pub fn from_blocks(v: usize, k: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.is_empty() || k < 2 || k > v {
            return Err(Error::Unsupported(format!("no BIB design with v = {v}, k = {k}")));
        }
        let mut rep = vec![0usize; v + 1];
        let mut pairs = vec![vec![0usize; v + 1]; v + 1];
        for blk in &mut blocks {
            blk.sort_unstable();
            if blk.len() != k || blk.windows(2).any(|w| w[0] == w[1]) || blk.iter().any(|&x| x == 0 || x > v) {
                return Err(Error::Internal(format!("malformed block {blk:?}")));
            }
            for (a, &x) in blk.iter().enumerate() {
                rep[x] += 1;
                for &y in &blk[a + 1..] {
                    pairs[x][y] += 1;
                }
            }
        }
        let r = rep[1];
        let lambda = pairs[1][2];
        let balanced = rep[1..].iter().all(|&x| x == r)
            && (1..=v).all(|x| (x + 1..=v).all(|y| pairs[x][y] == lambda));
        if !balanced {
            return Err(Error::Internal(format!("blocks for ({v}, {k}) are not balanced")));
        }
        Ok(Self {
            v,
            k,
            b: blocks.len(),
            r,
            lambda,
            blocks,
        })
    }
}

fn complete(v: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, v: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for x in start..=v {
            if v - x + 1 < k - cur.len() {
                break;
            }
            cur.push(x);
            rec(x + 1, v, k, cur, out);
            cur.pop();
        }
    }
    rec(1, v, k, &mut cur, &mut out);
    out
}

const FANO: [[usize; 3]; 7] = [[1, 2, 4], [2, 3, 5], [3, 4, 6], [4, 5, 7], [5, 6, 1], [6, 7, 2], [7, 1, 3]];

const SIX_THREE: [[usize; 3]; 10] = [
    [1, 2, 3],
    [1, 2, 4],
    [1, 3, 5],
    [1, 4, 6],
    [1, 5, 6],
    [2, 3, 6],
    [2, 4, 5],
    [2, 5, 6],
    [3, 4, 5],
    [3, 4, 6],
];

/// Lines of the affine plane of order 3.
fn affine_plane_3() -> Vec<Vec<usize>> {
    let pt = |x: usize, y: usize| 3 * (x % 3) + (y % 3) + 1;
    let mut out = Vec::new();
    for c in 0..3 {
        out.push((0..3).map(|y| pt(c, y)).collect());
    }
    for slope in 0..3 {
        for c in 0..3 {
            out.push((0..3).map(|x| pt(x, slope * x + c)).collect());
        }
    }
    out
}

fn catalog(v: usize, k: usize) -> Option<Vec<Vec<usize>>> {
    match (v, k) {
        (7, 3) => Some(FANO.iter().map(|b| b.to_vec()).collect()),
        (7, 4) => Some(
            FANO.iter()
                .map(|b| (1..=7).filter(|x| !b.contains(x)).collect())
                .collect(),
        ),
        (9, 3) => Some(affine_plane_3()),
        (6, 3) => Some(SIX_THREE.iter().map(|b| b.to_vec()).collect()),
        _ => None,
    }
}

#[cfg(test)]
fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Backtracking over k-subsets in lexicographic order, returning the first
/// set of `b` blocks with replication `r` and pair count `lambda`.
struct Search<'a> {
    v: usize,
    r: usize,
    lambda: usize,
    b: usize,
    candidates: &'a [Vec<usize>],
    rep: Vec<usize>,
    pairs: Vec<Vec<usize>>,
    chosen: Vec<usize>,
    budget: usize,
}

impl Search<'_> {
    fn fits(&self, blk: &[usize]) -> bool {
        blk.iter().all(|&x| self.rep[x] < self.r)
            && blk
                .iter()
                .enumerate()
                .all(|(a, &x)| blk[a + 1..].iter().all(|&y| self.pairs[x][y] < self.lambda))
    }

    fn apply(&mut self, blk: &[usize], delta: isize) {
        for (a, &x) in blk.iter().enumerate() {
            self.rep[x] = self.rep[x].wrapping_add_signed(delta);
            for &y in &blk[a + 1..] {
                self.pairs[x][y] = self.pairs[x][y].wrapping_add_signed(delta);
            }
        }
    }

    fn run(&mut self, start: usize) -> bool {
        if self.chosen.len() == self.b {
            return true;
        }
        if self.budget == 0 {
            return false;
        }
        self.budget -= 1;
        // The smallest treatment still short of replication must be covered
        // by some later block, and blocks are sorted, so it bounds the scan.
        let Some(need) = (1..=self.v).find(|&x| self.rep[x] < self.r) else {
            return false;
        };
        for idx in start..self.candidates.len() {
            let blk = &self.candidates[idx];
            if blk[0] > need {
                break;
            }
            if !self.fits(blk) {
                continue;
            }
            self.apply(blk, 1);
            self.chosen.push(idx);
            if self.run(idx + 1) {
                return true;
            }
            self.chosen.pop();
            self.apply(blk, -1);
        }
        false
    }
}

fn search(v: usize, k: usize) -> Option<Vec<Vec<usize>>> {
    let candidates = complete(v, k);
    let total = candidates.len();
    for b in 1..total {
        if (b * k) % v != 0 {
            continue;
        }
        let r = b * k / v;
        if (r * (k - 1)) % (v - 1) != 0 {
            continue;
        }
        let lambda = r * (k - 1) / (v - 1);
        if lambda == 0 || b < v {
            continue;
        }
        let mut s = Search {
            v,
            r,
            lambda,
            b,
            candidates: &candidates,
            rep: vec![0; v + 1],
            pairs: vec![vec![0; v + 1]; v + 1],
            chosen: Vec::new(),
            budget: 2_000_000,
        };
        if s.run(0) {
            return Some(s.chosen.iter().map(|&i| candidates[i].clone()).collect());
        }
    }
    None
}

/// A BIB design with `v` treatments in blocks of size `k`.
///
/// Small named designs are used where available. Otherwise the smallest
/// design is searched for when `v ≤ 8`, falling back to all `k`-subsets when
/// `v ≤ 10`.
pub fn bib_design(v: usize, k: usize) -> Result<BibDesign> {
    if k < 2 || k >= v {
        return Err(Error::Unsupported(format!(
            "BIB design needs 2 ≤ k < v, got v = {v}, k = {k}"
        )));
    }
    if let Some(blocks) = catalog(v, k) {
        return BibDesign::from_blocks(v, k, blocks);
    }
    if v <= 8 {
        if let Some(blocks) = search(v, k) {
            return BibDesign::from_blocks(v, k, blocks);
        }
    }
    if v <= 10 {
        return BibDesign::from_blocks(v, k, complete(v, k));
    }
    Err(Error::Unsupported(format!("no BIB design available for v = {v}, k = {k}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: &BibDesign) -> (usize, usize, usize) {
        (d.b, d.r, d.lambda)
    }

    #[test]
    fn steiner_triple_systems() {
        assert_eq!(params(&bib_design(7, 3).unwrap()), (7, 3, 1));
        assert_eq!(params(&bib_design(9, 3).unwrap()), (12, 4, 1));
    }

    #[test]
    fn complete_designs() {
        assert_eq!(params(&bib_design(5, 3).unwrap()), (10, 6, 3));
        assert_eq!(params(&bib_design(4, 2).unwrap()), (6, 3, 1));
        assert_eq!(params(&bib_design(3, 2).unwrap()), (3, 2, 1));
        assert_eq!(params(&bib_design(10, 3).unwrap()).0, binomial(10, 3));
    }

    #[test]
    fn named_and_searched() {
        assert_eq!(params(&bib_design(6, 3).unwrap()), (10, 5, 2));
        assert_eq!(params(&bib_design(7, 4).unwrap()), (7, 4, 2));
        assert_eq!(params(&bib_design(8, 4).unwrap()), (14, 7, 3));
        assert_eq!(params(&bib_design(5, 4).unwrap()), (5, 4, 3));
    }

    #[test]
    fn parameter_identities() {
        for (v, k) in [(4, 2), (5, 2), (5, 3), (6, 3), (7, 3), (7, 4), (8, 4), (9, 3)] {
            let d = bib_design(v, k).unwrap();
            assert_eq!(d.b * d.k, d.v * d.r);
            assert_eq!(d.r * (d.k - 1), d.lambda * (d.v - 1));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(bib_design(5, 5).is_err());
        assert!(bib_design(12, 5).is_err());
        assert!(BibDesign::from_blocks(4, 2, vec![vec![1, 2], vec![3, 4]]).is_err());
    }
}
