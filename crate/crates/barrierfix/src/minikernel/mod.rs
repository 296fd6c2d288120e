//! The MiniKernel language: AST, parser, and pretty-printer.

mod ast;
mod lexer;
mod parser;
mod pretty;

pub use ast::{
    is_builtin, structurally_equal, AssignTarget, BarrierLevel, BarrierOrigin, BarrierVarId, BinOp,
    Expr, ExprKind, Kernel, LaunchConfig, Param, ParamKind, SourceLoc, Stmt, UnOp,
};
pub use parser::{parse, ParseError};
pub use pretty::pretty_print;
