//! Indentation-sensitive behavior language: lexer, parser, printer and the
//! API registry that types its calls.

mod ast;
mod lexer;
mod parser;
mod printer;
mod registry;

pub use ast::{strip_speak, walk_stmts, Behavior, BehaviorProgram, Block, Branch, Stmt};
pub use lexer::{lex, Tok, Token, KEYWORDS};
pub use parser::{parse, parse_condition};
pub use printer::{print, print_cond, print_stmt_header};
pub use registry::{ApiRegistry, ApiSig, ParamKind, ParamSig, RegistryError, RESERVED};

use std::fmt;

use thiserror::Error;

use crate::constraint::Span;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{}:{}: expected {}, found {found}", span.line, span.col, expected.join(" or "))]
    Syntax { span: Span, expected: Vec<String>, found: String },
    #[error("{}:{}: unknown api {name}", span.line, span.col)]
    UnknownApi { span: Span, name: String },
    #[error("{}:{}: {name} takes {}, got {found}", span.line, span.col, ArityText(*min, *max))]
    Arity { span: Span, name: String, min: usize, max: usize, found: usize },
    #[error("{}:{}: argument {param} of {name} must be {expected}, found {found}", span.line, span.col)]
    Kind { span: Span, name: String, param: String, expected: String, found: String },
    #[error("{}:{}: {message}", span.line, span.col)]
    Structure { span: Span, message: String },
}

struct ArityText(usize, usize);

impl fmt::Display for ArityText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let plural = |n: usize| if n == 1 { "argument" } else { "arguments" };
        if self.0 == self.1 {
            write!(f, "{} {}", self.0, plural(self.0))
        } else {
            write!(f, "{} to {} arguments", self.0, self.1)
        }
    }
}

impl ParseError {
    pub fn span(&self) -> Span {
        match self {
            ParseError::Syntax { span, .. }
            | ParseError::UnknownApi { span, .. }
            | ParseError::Arity { span, .. }
            | ParseError::Kind { span, .. }
            | ParseError::Structure { span, .. } => *span,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            ParseError::Syntax { .. } => "syntax",
            ParseError::UnknownApi { .. } => "unknown-api",
            ParseError::Arity { .. } => "arity",
            ParseError::Kind { .. } => "kind",
            ParseError::Structure { .. } => "structure",
        }
    }
}
