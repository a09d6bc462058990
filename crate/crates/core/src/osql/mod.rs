//! The query language: tokens, syntax tree, parser, builtins and evaluator.

pub mod ast;
pub mod builtins;
pub(crate) mod eval;
pub mod lexer;
pub mod parser;

pub use ast::{DslFunction, Expr, SelectExpr, Statement};
pub use builtins::{Builtin, BuiltinRegistry};
pub use eval::Env;
pub use parser::{parse_expr, parse_script, parse_script_spanned, parse_statement};
