#![allow(dead_code, clippy::needless_range_loop)]

pub mod instance;
pub mod reference;
