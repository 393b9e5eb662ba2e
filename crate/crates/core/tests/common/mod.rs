#![allow(dead_code)]

pub mod narratives;
pub mod oracles;
