pub mod eval;
pub mod features;
pub mod frame;
pub mod geometry;
pub mod mapping;
pub mod pipelines;
pub mod semantics;
pub mod simworld;
pub mod trajectory;
