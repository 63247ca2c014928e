//! Command-line and HTTP front ends over `linviz-core`.

pub mod cli;
pub mod render;
pub mod server;
