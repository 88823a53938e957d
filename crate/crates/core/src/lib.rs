//! Random signal generation from shape expressions.

pub mod ast;
pub mod automaton;
pub mod bench;
pub mod diagnostics;
pub mod genfun;
pub mod initializer;
pub mod param_space;
pub mod parser;
pub mod point_sampler;
pub mod pipeline;
pub mod poly;
pub mod seed;
pub mod signal;
pub mod word_sampler;
