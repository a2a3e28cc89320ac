//! Error types for the analysis pipeline.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrontendError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: u32, col: u32, message: String },
    #[error("duplicate function '{name}' at line {line}")]
    DuplicateFunction { name: String, line: u32 },
    #[error("call to unknown function '{name}' at line {line}")]
    UnknownFunction { name: String, line: u32 },
    #[error("call to '{name}' at line {line} passes {found} arguments, expected {expected}")]
    ArityMismatch {
        name: String,
        line: u32,
        expected: usize,
        found: usize,
    },
    #[error("variable '{variable}' used before definition at line {line}")]
    UseBeforeDef { variable: String, line: u32 },
    #[error("program still contains loops; run loop unrolling first")]
    LoopsRemain,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpecError {
    #[error("client spec parse error at line {line}: {message}")]
    Parse { line: u32, message: String },
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("thread pool failure: {0}")]
    Pool(#[from] vflow_runtime::PoolError),
}
