//! Crossover designs for comparing `t` test treatments with a control.
//!
//! The crate builds designs ([`construct`]), evaluates their information
//! matrices under the carryover model and three reduced models ([`model`]),
//! computes closed-form lower bounds on the A-criterion ([`bounds`]), checks
//! the combinatorial balance conditions behind optimality ([`verify`]) and
//! reports efficiencies ([`efficiency`]). [`oracle`] holds independent
//! brute-force checks used by the test suites.

pub mod bounds;
pub mod construct;
pub mod design;
pub mod efficiency;
pub mod error;
pub mod fixtures;
pub mod matrix;
pub mod model;
pub mod oracle;
pub mod par;
pub mod table1;
pub mod verify;

pub use bounds::{lemma4_bound, lemma5_bound, min_sums, optimize_r0, BoundProfile, ControlSums, MinSums};
pub use construct::{construct, SearchConfig};
pub use design::{compute_counts, is_in_lambda, Design, DesignCounts, CONTROL};
pub use efficiency::{efficiency_report, EfficiencyReport};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{a_criterion, mv_criterion, ModelKind};
pub use par::Execution;
pub use verify::{certify_theorem1, verify_totally_balanced, BalanceReport, Certificate, Verdict};
