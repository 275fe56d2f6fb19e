use serde::{Deserialize, Serialize};

use crate::constraint::{Call, CondExpr, Span};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorProgram {
    /// The first behavior is the entry point.
    pub behaviors: Vec<Behavior>,
}

impl BehaviorProgram {
    pub fn entry(&self) -> &Behavior {
        &self.behaviors[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Behavior {
    pub name: String,
    pub params: Vec<String>,
    pub body: Block,
    pub span: Span,
}

pub type Block = Vec<Stmt>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub cond: CondExpr,
    pub body: Block,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Stmt {
    Do { call: Call, until: Option<CondExpr>, span: Span },
    /// `do Wait() until c`
    Wait { cond: CondExpr, span: Span },
    Speak { text: String, span: Span },
    If { branches: Vec<Branch>, otherwise: Option<Block>, span: Span },
    While { cond: CondExpr, body: Block, span: Span },
    Terminate { span: Span },
}

impl Stmt {
    pub fn span(&self) -> Span {
        match self {
            Stmt::Do { span, .. }
            | Stmt::Wait { span, .. }
            | Stmt::Speak { span, .. }
            | Stmt::If { span, .. }
            | Stmt::While { span, .. }
            | Stmt::Terminate { span } => *span,
        }
    }

    pub fn line_tag(&self) -> String {
        format!("L{}", self.span().line)
    }
}

/// Removes every Speak. A block left empty keeps a no-op `Wait() until True`
/// so the program stays well formed.
pub fn strip_speak(p: &BehaviorProgram) -> BehaviorProgram {
    fn block(b: &Block) -> Block {
        let mut out: Block = b
            .iter()
            .filter(|s| !matches!(s, Stmt::Speak { .. }))
            .map(|s| match s {
                Stmt::If { branches, otherwise, span } => Stmt::If {
                    branches: branches
                        .iter()
                        .map(|br| Branch { cond: br.cond.clone(), body: block(&br.body), span: br.span })
                        .collect(),
                    otherwise: otherwise.as_ref().map(block),
                    span: *span,
                },
                Stmt::While { cond, body, span } => Stmt::While { cond: cond.clone(), body: block(body), span: *span },
                other => other.clone(),
            })
            .collect();
        if out.is_empty() {
            out.push(Stmt::Wait { cond: CondExpr::truth(), span: Span::default() });
        }
        out
    }
    BehaviorProgram {
        behaviors: p
            .behaviors
            .iter()
            .map(|b| Behavior { name: b.name.clone(), params: b.params.clone(), body: block(&b.body), span: b.span })
            .collect(),
    }
}

/// Visits every statement depth-first in source order.
pub fn walk_stmts<'a>(block: &'a Block, f: &mut dyn FnMut(&'a Stmt)) {
    for s in block {
        f(s);
        match s {
            Stmt::If { branches, otherwise, .. } => {
                for b in branches {
                    walk_stmts(&b.body, f);
                }
                if let Some(o) = otherwise {
                    walk_stmts(o, f);
                }
            }
            Stmt::While { body, .. } => walk_stmts(body, f),
            _ => {}
        }
    }
}
