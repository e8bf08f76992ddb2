//! Test-side oracles shared by the integration targets. Nothing here calls
//! into the library's own solvers.
#![allow(dead_code)]

pub mod fixtures;
pub mod matching;
pub mod relations;
pub mod swap_search;
