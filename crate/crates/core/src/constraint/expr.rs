use serde::{Deserialize, Serialize};

/// Source location. Spans never take part in structural equality.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Span {
    pub fn new(line: u32, col: u32, end_line: u32, end_col: u32) -> Self {
        Span { line, col, end_line, end_col }
    }

    pub fn to(self, other: Span) -> Span {
        Span::new(self.line, self.col, other.end_line, other.end_col)
    }

    /// True when `(line, col)` falls inside this span (inclusive ends).
    pub fn covers(&self, line: u32, col: u32) -> bool {
        (line, col) >= (self.line, self.col) && (line, col) <= (self.end_line, self.end_col)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Arg {
    Name(String, Span),
    Number(f64, Span),
    Point(f64, f64, Span),
    Text(String, Span),
    Sample(Box<CondExpr>, Span),
}

impl Arg {
    pub fn name(s: &str) -> Arg {
        Arg::Name(s.to_string(), Span::default())
    }

    pub fn num(v: f64) -> Arg {
        Arg::Number(v, Span::default())
    }

    pub fn point(x: f64, y: f64) -> Arg {
        Arg::Point(x, y, Span::default())
    }

    pub fn text(s: &str) -> Arg {
        Arg::Text(s.to_string(), Span::default())
    }

    pub fn sample(e: CondExpr) -> Arg {
        Arg::Sample(Box::new(e), Span::default())
    }

    pub fn span(&self) -> Span {
        match self {
            Arg::Name(_, s) | Arg::Number(_, s) | Arg::Point(_, _, s) | Arg::Text(_, s) | Arg::Sample(_, s) => *s,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Arg::Name(..) => "name",
            Arg::Number(..) => "number",
            Arg::Point(..) => "point",
            Arg::Text(..) => "string",
            Arg::Sample(..) => "sample",
        }
    }

    /// Name or string payload, the two spellings accepted for symbols.
    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            Arg::Name(s, _) | Arg::Text(s, _) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Call {
    pub name: String,
    pub args: Vec<Arg>,
    pub span: Span,
}

impl Call {
    pub fn new(name: &str, args: Vec<Arg>) -> Call {
        Call { name: name.to_string(), args, span: Span::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CondExpr {
    Const(bool, Span),
    Call(Call),
    Not(Box<CondExpr>, Span),
    And(Vec<CondExpr>, Span),
    Or(Vec<CondExpr>, Span),
}

impl CondExpr {
    pub fn truth() -> CondExpr {
        CondExpr::Const(true, Span::default())
    }

    pub fn call(name: &str, args: Vec<Arg>) -> CondExpr {
        CondExpr::Call(Call::new(name, args))
    }

    pub fn not(e: CondExpr) -> CondExpr {
        CondExpr::Not(Box::new(e), Span::default())
    }

    pub fn and(items: Vec<CondExpr>) -> CondExpr {
        CondExpr::And(items, Span::default())
    }

    pub fn or(items: Vec<CondExpr>) -> CondExpr {
        CondExpr::Or(items, Span::default())
    }

    pub fn span(&self) -> Span {
        match self {
            CondExpr::Const(_, s) | CondExpr::Not(_, s) | CondExpr::And(_, s) | CondExpr::Or(_, s) => *s,
            CondExpr::Call(c) => c.span,
        }
    }

    pub fn is_true_literal(&self) -> bool {
        matches!(self, CondExpr::Const(true, _))
    }

    /// Leaf calls in left-to-right order.
    pub fn leaves(&self) -> Vec<&Call> {
        let mut out = Vec::new();
        fn walk<'a>(e: &'a CondExpr, out: &mut Vec<&'a Call>) {
            match e {
                CondExpr::Const(..) => {}
                CondExpr::Call(c) => out.push(c),
                CondExpr::Not(inner, _) => walk(inner, out),
                CondExpr::And(xs, _) | CondExpr::Or(xs, _) => xs.iter().for_each(|x| walk(x, out)),
            }
        }
        walk(self, &mut out);
        out
    }
}

pub(crate) fn fmt_num(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

pub fn canonical_arg(a: &Arg) -> String {
    match a {
        Arg::Name(s, _) | Arg::Text(s, _) => s.clone(),
        Arg::Number(v, _) => fmt_num(*v),
        Arg::Point(x, y, _) => format!("({},{})", fmt_num(*x), fmt_num(*y)),
        Arg::Sample(e, _) => format!("sample({})", canonical_string(e)),
    }
}

/// Lowercased call with canonical arguments, e.g. `moveto((1.000,2.000))`.
pub fn canonical_call(c: &Call) -> String {
    let args: Vec<String> = c.args.iter().map(canonical_arg).collect();
    format!("{}({})", c.name.to_lowercase(), args.join(","))
}

/// Normal form used for hashing, equality and flow labels. `and`/`or`
/// operands are flattened and sorted, numbers carry three decimals.
pub fn canonical_string(e: &CondExpr) -> String {
    match e {
        CondExpr::Const(b, _) => b.to_string(),
        CondExpr::Call(c) => match super::Constraint::from_call(c) {
            Ok(typed) => typed.canonical(),
            Err(_) => canonical_call(c),
        },
        CondExpr::Not(inner, _) => format!("not({})", canonical_string(inner)),
        CondExpr::And(_, _) | CondExpr::Or(_, _) => {
            let is_and = matches!(e, CondExpr::And(..));
            let mut parts = Vec::new();
            flatten(e, is_and, &mut parts);
            parts.sort();
            format!("{}({})", if is_and { "and" } else { "or" }, parts.join(","))
        }
    }
}

fn flatten(e: &CondExpr, is_and: bool, out: &mut Vec<String>) {
    match (e, is_and) {
        (CondExpr::And(xs, _), true) | (CondExpr::Or(xs, _), false) => {
            xs.iter().for_each(|x| flatten(x, is_and, out))
        }
        _ => out.push(canonical_string(e)),
    }
}
