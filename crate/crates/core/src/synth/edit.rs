use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::{Arg, CondExpr, Span};
use crate::dsl::{parse, parse_condition, print, ApiRegistry, BehaviorProgram, Block, Stmt};

use super::{validate, FALLBACK_SIGMA};

#[derive(Debug, Error, PartialEq)]
pub enum EditError {
    #[error("malformed line tag {0:?}")]
    BadTag(String),
    #[error("no statement at {0}")]
    DanglingTag(String),
    #[error("statement at {0} has no guard")]
    NoGuard(String),
    #[error("statement at {0} is not a MoveTo")]
    NotMoveTo(String),
    #[error("deleting {0} would leave an empty block")]
    EmptyBlock(String),
    #[error("set_move_target needs x and y or a region")]
    NoTarget,
    #[error("{0}")]
    Parse(String),
    #[error("edited program is invalid: {0}")]
    Invalid(String),
}

/// One localized edit, addressed by the `L<n>` line tag of the statement in
/// the printed program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum EditOp {
    DeleteStmt {
        line: String,
    },
    ReplaceGuard {
        line: String,
        cond: String,
    },
    SetMoveTarget {
        line: String,
        #[serde(default)]
        x: Option<f64>,
        #[serde(default)]
        y: Option<f64>,
        #[serde(default)]
        sigma: Option<f64>,
        /// A samplable condition, used instead of a point.
        #[serde(default)]
        region: Option<String>,
    },
    /// Inserts a Speak before the tagged statement.
    InsertSpeak {
        line: String,
        text: String,
    },
}

#[derive(Debug, Clone, Copy)]
enum Hop {
    Branch(usize),
    Else,
    Body,
}

fn tag_line(tag: &str) -> Result<u32, EditError> {
    tag.strip_prefix('L').and_then(|n| n.parse().ok()).ok_or_else(|| EditError::BadTag(tag.into()))
}

/// Path to the block holding the statement (or elif branch) on `line`, and
/// its index there. The branch index is set for elif lines.
fn locate(block: &Block, line: u32) -> Option<(Vec<(usize, Hop)>, usize, Option<usize>)> {
    for (i, s) in block.iter().enumerate() {
        if s.span().line == line {
            return Some((vec![], i, None));
        }
        let children: Vec<(Hop, &Block)> = match s {
            Stmt::If { branches, otherwise, .. } => {
                if let Some(k) = branches.iter().skip(1).position(|b| b.span.line == line) {
                    return Some((vec![], i, Some(k + 1)));
                }
                let mut c: Vec<(Hop, &Block)> = branches.iter().enumerate().map(|(k, b)| (Hop::Branch(k), &b.body)).collect();
                if let Some(o) = otherwise {
                    c.push((Hop::Else, o));
                }
                c
            }
            Stmt::While { body, .. } => vec![(Hop::Body, body)],
            _ => vec![],
        };
        for (hop, child) in children {
            if let Some((mut path, idx, br)) = locate(child, line) {
                path.insert(0, (i, hop));
                return Some((path, idx, br));
            }
        }
    }
    None
}

fn block_at<'a>(block: &'a mut Block, path: &[(usize, Hop)]) -> &'a mut Block {
    let Some(((i, hop), rest)) = path.split_first() else { return block };
    let next = match (&mut block[*i], hop) {
        (Stmt::If { branches, .. }, Hop::Branch(k)) => &mut branches[*k].body,
        (Stmt::If { otherwise: Some(o), .. }, Hop::Else) => o,
        (Stmt::While { body, .. }, Hop::Body) => body,
        _ => unreachable!("path built by locate"),
    };
    block_at(next, rest)
}

fn apply(p: &mut BehaviorProgram, op: &EditOp, reg: &ApiRegistry) -> Result<(), EditError> {
    let tag = match op {
        EditOp::DeleteStmt { line } | EditOp::ReplaceGuard { line, .. } | EditOp::SetMoveTarget { line, .. } | EditOp::InsertSpeak { line, .. } => line,
    };
    let line = tag_line(tag)?;
    let (bi, (path, idx, branch)) = p
        .behaviors
        .iter()
        .enumerate()
        .find_map(|(bi, b)| locate(&b.body, line).map(|r| (bi, r)))
        .ok_or_else(|| EditError::DanglingTag(tag.clone()))?;
    let block = block_at(&mut p.behaviors[bi].body, &path);
    let parse_cond = |src: &str| parse_condition(src, reg).map_err(|e| EditError::Parse(e.to_string()));
    match op {
        EditOp::DeleteStmt { .. } => {
            if branch.is_some() {
                return Err(EditError::DanglingTag(tag.clone()));
            }
            if block.len() == 1 {
                return Err(EditError::EmptyBlock(tag.clone()));
            }
            block.remove(idx);
        }
        EditOp::InsertSpeak { text, .. } => {
            if branch.is_some() {
                return Err(EditError::DanglingTag(tag.clone()));
            }
            block.insert(idx, Stmt::Speak { text: text.clone(), span: Span::default() });
        }
        EditOp::ReplaceGuard { cond, .. } => {
            let c = parse_cond(cond)?;
            match (&mut block[idx], branch) {
                (Stmt::If { branches, .. }, Some(k)) => branches[k].cond = c,
                (Stmt::If { branches, .. }, None) => branches[0].cond = c,
                (Stmt::While { cond, .. }, None) | (Stmt::Wait { cond, .. }, None) => *cond = c,
                (Stmt::Do { until: Some(u), .. }, None) => *u = c,
                _ => return Err(EditError::NoGuard(tag.clone())),
            }
        }
        EditOp::SetMoveTarget { x, y, sigma, region, .. } => {
            let target = match (x, y, region) {
                (_, _, Some(r)) => Arg::sample(parse_cond(r)?),
                (Some(x), Some(y), None) => Arg::sample(CondExpr::call(
                    "NearPoint",
                    vec![Arg::name("self"), Arg::point(*x, *y), Arg::num(sigma.unwrap_or(FALLBACK_SIGMA))],
                )),
                _ => return Err(EditError::NoTarget),
            };
            match (&mut block[idx], branch) {
                (Stmt::Do { call, .. }, None) if call.name == "MoveTo" => call.args = vec![target],
                _ => return Err(EditError::NotMoveTo(tag.clone())),
            }
        }
    }
    Ok(())
}

/// Applies `ops` in order. Tags refer to lines of the printed input program
/// and stay valid across the earlier ops of the same call.
pub fn apply_structured_edit(
    program: &BehaviorProgram,
    ops: &[EditOp],
    reg: &ApiRegistry,
) -> Result<BehaviorProgram, EditError> {
    let mut p = parse(&print(program), reg).map_err(|e| EditError::Invalid(e.to_string()))?;
    for op in ops {
        apply(&mut p, op, reg)?;
    }
    validate(&print(&p), reg).map_err(EditError::Invalid)
}
