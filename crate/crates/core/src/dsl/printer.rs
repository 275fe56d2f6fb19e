use crate::constraint::{Arg, Call, CondExpr};

use super::ast::{Block, BehaviorProgram, Stmt};

const INDENT: &str = "    ";

/// Canonical source text. `parse(print(p)) == p` up to spans.
pub fn print(p: &BehaviorProgram) -> String {
    let mut out = String::new();
    for (i, b) in p.behaviors.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("behavior {}({}):\n", b.name, b.params.join(", ")));
        block(&b.body, 1, &mut out);
    }
    out
}

fn block(b: &Block, depth: usize, out: &mut String) {
    let pad = INDENT.repeat(depth);
    for s in b {
        out.push_str(&pad);
        out.push_str(&print_stmt_header(s));
        out.push('\n');
        match s {
            Stmt::If { branches, otherwise, .. } => {
                block(&branches[0].body, depth + 1, out);
                for br in &branches[1..] {
                    out.push_str(&format!("{pad}elif {}:\n", print_cond(&br.cond)));
                    block(&br.body, depth + 1, out);
                }
                if let Some(o) = otherwise {
                    out.push_str(&format!("{pad}else:\n"));
                    block(o, depth + 1, out);
                }
            }
            Stmt::While { body, .. } => block(body, depth + 1, out),
            _ => {}
        }
    }
}

/// First line of a statement without indentation.
pub fn print_stmt_header(s: &Stmt) -> String {
    match s {
        Stmt::Do { call, until: None, .. } => format!("do {}", print_call(call)),
        Stmt::Do { call, until: Some(u), .. } => format!("do {} until {}", print_call(call), print_cond(u)),
        Stmt::Wait { cond, .. } => format!("do Wait() until {}", print_cond(cond)),
        Stmt::Speak { text, .. } => format!("do Speak({})", quote(text)),
        Stmt::If { branches, .. } => format!("if {}:", print_cond(&branches[0].cond)),
        Stmt::While { cond, .. } => format!("while {}:", print_cond(cond)),
        Stmt::Terminate { .. } => "terminate".into(),
    }
}

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn print_arg(a: &Arg) -> String {
    match a {
        Arg::Name(n, _) => n.clone(),
        Arg::Number(v, _) => format!("{v}"),
        Arg::Point(x, y, _) => format!("({x}, {y})"),
        Arg::Text(s, _) => quote(s),
        Arg::Sample(e, _) => format!("Sample({})", print_cond(e)),
    }
}

pub(crate) fn print_call(c: &Call) -> String {
    let args: Vec<String> = c.args.iter().map(print_arg).collect();
    format!("{}({})", c.name, args.join(", "))
}

pub fn print_cond(e: &CondExpr) -> String {
    cond_at(e, false, false)
}

// Nested chains keep their parentheses so the tree round-trips.
fn cond_at(e: &CondExpr, wrap_and: bool, wrap_or: bool) -> String {
    let (text, wrap) = match e {
        CondExpr::Const(true, _) => return "True".into(),
        CondExpr::Const(false, _) => return "False".into(),
        CondExpr::Call(c) => return print_call(c),
        CondExpr::Not(inner, _) => return format!("not {}", cond_at(inner, true, true)),
        CondExpr::And(xs, _) => {
            let parts: Vec<String> = xs.iter().map(|x| cond_at(x, true, true)).collect();
            (parts.join(" and "), wrap_and)
        }
        CondExpr::Or(xs, _) => {
            let parts: Vec<String> = xs.iter().map(|x| cond_at(x, false, true)).collect();
            (parts.join(" or "), wrap_or)
        }
    };
    if wrap {
        format!("({text})")
    } else {
        text
    }
}
