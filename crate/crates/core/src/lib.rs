// Negated comparisons reject NaN alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod budget;
pub mod distribution;
pub mod error;
pub mod golden;
pub mod inner_max;
pub mod learner;
pub mod model;
pub mod oracle_pairs;
pub mod reference;
mod vecops;
