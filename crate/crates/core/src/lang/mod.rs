//! MiniLang, its stack bytecode (StackIR), the compiler, the assembler and
//! the `.ubc` module format.

pub mod asm;
pub mod check;
pub mod compile;
pub mod ir;
pub mod source;
pub mod ubc;

use thiserror::Error;

pub use asm::{assemble, disassemble};
pub use check::{consumers, leaders, verify_module};
pub use compile::{compile, compile_source};
pub use ir::*;
pub use source::{parse_source, SourceUnit};
pub use ubc::{load_module, save_module};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: type error: {msg}")]
    Type { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: undeclared name `{name}`")]
    Undeclared { line: usize, col: usize, name: String },
    #[error("line {line}: assembly error: {msg}")]
    Asm { line: usize, msg: String },
    #[error("line {line}: format error: {msg}")]
    Format { line: usize, msg: String },
    #[error("{func}@+{offset}: stack discipline violation: {msg}")]
    StackDiscipline { func: String, offset: usize, msg: String },
    #[error("{func}: invalid module: {msg}")]
    Invalid { func: String, msg: String },
}
