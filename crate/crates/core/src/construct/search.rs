//! Block-and-control arrays with a seeded shuffle search.
//!
//! Steps 1 and 2 are deterministic: a BIB design on the test treatments with
//! blocks of size `p − 1`, laid out in `p` arrays where array `k` has the
//! control in row `k`. Step 3 permutes test treatments within columns until
//! every balance clause holds. When the BIB design is cyclic, units whose
//! blocks are translates of each other are moved together so the shift
//! symmetry is kept, which balances most counts automatically.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::bib::{bib_design, BibDesign};
use super::tally::Tally;
use super::SearchConfig;
use crate::design::{Design, CONTROL};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Serialize)]
pub struct SearchOutcome {
    pub design: Design,
    pub score: f64,
    /// Restart that produced `design`.
    pub restart: usize,
    /// Iterations spent in that restart.
    pub iterations: usize,
    /// `true` iff `score` reached the target.
    pub success: bool,
}

/// Groups of blocks that are translates of one another under the cyclic
/// shift `x ↦ x + 1 (mod v)` of the test labels. Each group lists its blocks
/// in developed order: entry `s` is the base block shifted by `s`, position
/// by position. Returns `None` unless every block lies in a full orbit.
pub fn cyclic_orbits(bib: &BibDesign) -> Option<Vec<Vec<Vec<usize>>>> {
    let v = bib.v;
    let shift = |blk: &[usize], s: usize| -> Vec<usize> { blk.iter().map(|&x| (x - 1 + s) % v + 1).collect() };
    let sorted = |mut b: Vec<usize>| {
        b.sort_unstable();
        b
    };
    let mut pool: Vec<Vec<usize>> = bib.blocks.iter().map(|b| sorted(b.clone())).collect();
    let mut orbits = Vec::new();
    while let Some(base) = pool.pop() {
        let mut orbit = vec![base.clone()];
        for s in 1..v {
            let image = shift(&base, s);
            let key = sorted(image.clone());
            if key == base {
                return None;
            }
            let at = pool.iter().position(|b| *b == key)?;
            pool.swap_remove(at);
            orbit.push(image);
        }
        orbits.push(orbit);
    }
    orbits.sort();
    Some(orbits)
}

/// Blocks grouped for the search: cyclic orbits when `symmetric` and the
/// design allows them, otherwise one group per block.
fn block_groups(bib: &BibDesign, symmetric: bool) -> Vec<Vec<Vec<usize>>> {
    symmetric
        .then(|| cyclic_orbits(bib))
        .flatten()
        .unwrap_or_else(|| bib.blocks.iter().map(|b| vec![b.clone()]).collect())
}

/// The Step 2 array: `n / (pb)` copies of `p` arrays, the `k`-th with the
/// control in period `k` and the blocks filling the other periods. Also
/// returns the units of each block group, copy and array.
fn layout(t: usize, p: usize, n: usize, bib: &BibDesign, symmetric: bool) -> Result<(Design, Vec<Vec<usize>>)> {
    let b = bib.b;
    if n % (p * b) != 0 {
        return Err(Error::Infeasible(format!(
            "n = {n} is not a multiple of p·b = {p}·{b} for the BIB({}, {}) design",
            bib.v, bib.k
        )));
    }
    let groups = block_groups(bib, symmetric);
    let copies = n / (p * b);
    let mut units = Vec::with_capacity(n);
    let mut unit_groups = Vec::new();
    for _ in 0..copies {
        for k in 0..p {
            for group in &groups {
                let mut members = Vec::with_capacity(group.len());
                for blk in group {
                    let mut tests = blk.iter();
                    let seq = (0..p)
                        .map(|row| if row == k { CONTROL } else { *tests.next().expect("block has p − 1 entries") })
                        .collect();
                    members.push(units.len());
                    units.push(seq);
                }
                unit_groups.push(members);
            }
        }
    }
    Ok((Design::from_sequences(t, &units)?, unit_groups))
}

/// The Step 2 array for `bib`, blocks in their listed order.
pub fn block_array(t: usize, p: usize, n: usize, bib: &BibDesign) -> Result<Design> {
    Ok(layout(t, p, n, bib, false)?.0)
}

/// Non-control period indices of a unit.
fn test_positions(d: &Design, u: usize) -> Vec<usize> {
    (0..d.p()).filter(|&k| d.get(k, u) != CONTROL).collect()
}

/// Swaps periods `a` and `b` in every unit of `group`, keeping the tally in
/// step.
fn swap_group(d: &mut Design, tally: &mut Tally, group: &[usize], a: usize, b: usize) {
    for &u in group {
        tally.apply(d, u, -1);
        d.swap_in_unit(u, a, b);
        tally.apply(d, u, 1);
    }
}

fn run_restart(
    start: &Design,
    groups: &[Vec<usize>],
    cfg: &SearchConfig,
    restart: usize,
    winner: &AtomicUsize,
) -> Option<SearchOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(restart as u64);

    // Units of a group share their control period, so one permutation of
    // the test periods applies to all of them.
    let positions: Vec<Vec<usize>> = groups.iter().map(|g| test_positions(start, g[0])).collect();
    let mut d = start.clone();
    for (group, pos) in groups.iter().zip(&positions) {
        let mut order = pos.clone();
        order.shuffle(&mut rng);
        for &u in group {
            for (&to, &from) in pos.iter().zip(&order) {
                d.set(to, u, start.get(from, u));
            }
        }
    }
    let movable: Vec<usize> = (0..groups.len()).filter(|&g| positions[g].len() >= 2).collect();
    let mut tally = Tally::new(&d);
    let mut current = tally.score();
    let mut best = (current, d.clone());
    let cooling = (cfg.final_temperature / cfg.initial_temperature).powf(1.0 / cfg.max_iters_per_restart as f64);
    let mut temp = cfg.initial_temperature;
    let mut it = 0;
    while best.0 > cfg.target && it < cfg.max_iters_per_restart && !movable.is_empty() {
        if it % 256 == 0 && winner.load(Ordering::Relaxed) < restart {
            return None;
        }
        it += 1;
        let g = movable[rng.random_range(0..movable.len())];
        let pos = &positions[g];
        let a = rng.random_range(0..pos.len());
        let mut b = rng.random_range(0..pos.len() - 1);
        if b >= a {
            b += 1;
        }
        swap_group(&mut d, &mut tally, &groups[g], pos[a], pos[b]);
        let s = tally.score();
        if s <= current || rng.random::<f64>() < ((current - s) / temp).exp() {
            current = s;
            if s < best.0 {
                best = (s, d.clone());
            }
        } else {
            swap_group(&mut d, &mut tally, &groups[g], pos[a], pos[b]);
        }
        temp *= cooling;
    }
    let (score, design) = best;
    let success = score <= cfg.target;
    if success {
        winner.fetch_min(restart, Ordering::Relaxed);
    }
    Some(SearchOutcome {
        design,
        score,
        restart,
        iterations: it,
        success,
    })
}

/// Runs Steps 1–3 for `p ≤ t` with control replication `r0 = n`.
///
/// The result is the lowest-indexed restart reaching the target score, so it
/// depends only on the parameters and `cfg`, not on scheduling. When no
/// restart succeeds the best design found is returned with `success = false`.
pub fn three_step_construct(t: usize, p: usize, n: usize, cfg: &SearchConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    if p < 3 || p > t {
        return Err(Error::Infeasible(format!(
            "the block-and-control construction needs 3 ≤ p ≤ t (t = {t}, p = {p})"
        )));
    }
    let bib = bib_design(t, p - 1)?;
    let (start, groups) = layout(t, p, n, &bib, cfg.symmetric)?;
    let winner = AtomicUsize::new(usize::MAX);
    let runs = par::map_range(cfg.execution, cfg.max_restarts, |i| {
        if winner.load(Ordering::Relaxed) < i {
            return None;
        }
        run_restart(&start, &groups, cfg, i, &winner)
    });
    let mut outcomes: Vec<SearchOutcome> = runs.into_iter().flatten().collect();
    if let Some(best) = outcomes.iter().position(|o| o.success) {
        return Ok(outcomes.swap_remove(best));
    }
    outcomes
        .into_iter()
        .reduce(|a, b| if b.score < a.score { b } else { a })
        .ok_or_else(|| Error::Internal("search ran no restarts".into()))
}
