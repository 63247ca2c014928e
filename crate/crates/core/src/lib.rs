pub mod engine;
pub mod expr;
pub mod gallery;
pub mod program;
pub mod scene;
pub mod table;
