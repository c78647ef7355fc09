//! Bundled reference designs.
//!
//! Only grids whose dimensions check out are shipped. The other published
//! designs for four periods are regenerated by the constructors instead.

use crate::design::Design;

pub const EXAMPLE1: &str = include_str!("../fixtures/ex1.design");
pub const EXAMPLE2: &str = include_str!("../fixtures/ex2.design");
pub const EXAMPLE5: &str = include_str!("../fixtures/ex5.design");
pub const EXAMPLE7: &str = include_str!("../fixtures/ex7.design");

/// `(file name, contents)` for every bundled design.
pub const ALL: [(&str, &str); 4] = [
    ("ex1.design", EXAMPLE1),
    ("ex2.design", EXAMPLE2),
    ("ex5.design", EXAMPLE5),
    ("ex7.design", EXAMPLE7),
];

/// `t = 3, p = 3, n = 9`.
pub fn example1() -> Design {
    Design::parse(EXAMPLE1).expect("bundled fixture parses")
}

/// `t = 5, p = 3, n = 30`.
pub fn example2() -> Design {
    Design::parse(EXAMPLE2).expect("bundled fixture parses")
}

/// `t = 7, p = 4, n = 28`.
pub fn example5() -> Design {
    Design::parse(EXAMPLE5).expect("bundled fixture parses")
}

/// `t = 6, p = 5, n = 30`; efficient but not totally balanced.
pub fn example7() -> Design {
    Design::parse(EXAMPLE7).expect("bundled fixture parses")
}
