//! Balanced uniform designs from Williams squares.

use crate::design::Design;
use crate::error::{Error, Result};

/// First column of a Williams square of order `m`: `0, 1, m−1, 2, m−2, …`.
pub fn williams_sequence(m: usize) -> Vec<usize> {
    let mut seq = Vec::with_capacity(m);
    let (mut lo, mut hi) = (0, m);
    for k in 0..m {
        if k % 2 == 0 {
            seq.push(lo);
            lo += 1;
        } else {
            hi -= 1;
            seq.push(hi);
        }
    }
    seq
}

/// Units of one balancing block: the square's columns, followed by their
/// reversals when `m` is odd.
fn block(m: usize) -> Vec<Vec<usize>> {
    let a = williams_sequence(m);
    let mut units: Vec<Vec<usize>> = (0..m).map(|j| a.iter().map(|&x| (x + j) % m).collect()).collect();
    if m % 2 == 1 {
        let reversed: Vec<Vec<usize>> = units.iter().map(|s| s.iter().rev().copied().collect()).collect();
        units.extend(reversed);
    }
    units
}

/// A design with `m` treatments labelled `0..m`, `m` periods and `n` units,
/// uniform on periods and units, where every ordered pair of distinct
/// treatments is adjacent equally often. The returned design has `t = m − 1`.
pub fn balanced_uniform(m: usize, n: usize) -> Result<Design> {
    if m < 2 {
        return Err(Error::Existence(format!("balanced uniform design needs at least 2 treatments, got {m}")));
    }
    let size = if m % 2 == 0 { m } else { 2 * m };
    if n == 0 || n % size != 0 {
        let need = if m % 2 == 0 {
            format!("a multiple of {m}")
        } else {
            format!("an even multiple of {m}")
        };
        return Err(Error::Existence(format!(
            "balanced uniform design of order {m} needs n to be {need}, got {n}"
        )));
    }
    let unit_block = block(m);
    let units: Vec<Vec<usize>> = unit_block.iter().cycle().take(n).cloned().collect();
    Design::from_sequences(m - 1, &units)
}
