//! Frontend for the toy value-flow language: parsing, loop unrolling,
//! SSA conversion, pointer resolution, and the call graph.

pub mod ast;
pub mod callgraph;
pub mod parser;
pub mod points_to;
pub mod pretty;
pub mod ssa;
pub mod unroll;

pub use ast::Program;
pub use callgraph::{build_call_graph, CallGraph, CallSiteId};
pub use parser::parse;
pub use points_to::{is_direct_flow, resolve_pointers, ResolveOutcome};
pub use pretty::pretty;
pub use ssa::{to_ssa, SsaProgram};
pub use unroll::{unroll_loops, DEFAULT_UNROLL};
