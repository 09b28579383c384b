// NaN-rejecting range checks are written as `!(x > a)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::len_without_is_empty)]

pub mod bounds;
pub mod cli;
pub mod collision;
pub mod config;
pub mod dispersion;
pub mod error;
pub mod grid;
pub mod hierarchy;
pub mod manifold;
pub mod par;
pub mod wke;
