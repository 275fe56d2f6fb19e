use serde::{Deserialize, Serialize};

use crate::dsl::{print_cond, print_stmt_header, Behavior, BehaviorProgram, Block, Stmt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffKind {
    Added,
    Removed,
    Changed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffOp {
    pub kind: DiffKind,
    /// `Behavior/index[/branch/index...]` in the old program (new for additions).
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new: Option<String>,
}

/// Statement-level structural diff. A compound statement added or removed
/// as a whole counts once.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstDiff {
    pub ops: Vec<DiffOp>,
}

impl AstDiff {
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

pub fn diff_programs(old: &BehaviorProgram, new: &BehaviorProgram) -> AstDiff {
    let mut ops = Vec::new();
    for b in &old.behaviors {
        match new.behaviors.iter().find(|n| n.name == b.name) {
            Some(n) if n.params == b.params => diff_block(&b.body, &n.body, &b.name, &mut ops),
            Some(n) => ops.push(changed(&b.name, &header(b), &header(n))),
            None => ops.push(DiffOp { kind: DiffKind::Removed, path: b.name.clone(), old: Some(header(b)), new: None }),
        }
    }
    for n in &new.behaviors {
        if !old.behaviors.iter().any(|b| b.name == n.name) {
            ops.push(DiffOp { kind: DiffKind::Added, path: n.name.clone(), old: None, new: Some(header(n)) });
        }
    }
    AstDiff { ops }
}

fn header(b: &Behavior) -> String {
    format!("behavior {}({}):", b.name, b.params.join(", "))
}

fn changed(path: &str, old: &str, new: &str) -> DiffOp {
    DiffOp { kind: DiffKind::Changed, path: path.into(), old: Some(old.into()), new: Some(new.into()) }
}

fn same_kind(a: &Stmt, b: &Stmt) -> bool {
    std::mem::discriminant(a) == std::mem::discriminant(b)
}

/// Longest common subsequence alignment; returns matched index pairs.
fn lcs(a: &[Stmt], b: &[Stmt]) -> Vec<(usize, usize)> {
    let (n, m) = (a.len(), b.len());
    let mut t = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            t[i][j] = if a[i] == b[j] { t[i + 1][j + 1] + 1 } else { t[i + 1][j].max(t[i][j + 1]) };
        }
    }
    let (mut i, mut j, mut out) = (0, 0, Vec::new());
    while i < n && j < m {
        if a[i] == b[j] {
            out.push((i, j));
            i += 1;
            j += 1;
        } else if t[i + 1][j] >= t[i][j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

fn diff_block(a: &Block, b: &Block, path: &str, ops: &mut Vec<DiffOp>) {
    let mut matches = lcs(a, b);
    matches.push((a.len(), b.len()));
    let (mut i, mut j) = (0, 0);
    for (mi, mj) in matches {
        diff_gap(a, i..mi, b, j..mj, path, ops);
        i = mi + 1;
        j = mj + 1;
    }
}

/// Pairs unmatched statements of the same kind in order; the rest are
/// plain additions and removals.
fn diff_gap(
    a: &Block,
    ar: std::ops::Range<usize>,
    b: &Block,
    br: std::ops::Range<usize>,
    path: &str,
    ops: &mut Vec<DiffOp>,
) {
    let mut used = vec![false; br.len()];
    for i in ar.clone() {
        let at = format!("{path}/{i}");
        let partner = br.clone().enumerate().find(|(k, j)| !used[*k] && same_kind(&a[i], &b[*j]));
        match partner {
            Some((k, j)) => {
                used[k] = true;
                diff_stmt(&a[i], &b[j], &at, ops);
            }
            None => ops.push(DiffOp { kind: DiffKind::Removed, path: at, old: Some(print_stmt_header(&a[i])), new: None }),
        }
    }
    for (k, j) in br.enumerate() {
        if !used[k] {
            ops.push(DiffOp {
                kind: DiffKind::Added,
                path: format!("{path}/+{j}"),
                old: None,
                new: Some(print_stmt_header(&b[j])),
            });
        }
    }
}

fn diff_stmt(x: &Stmt, y: &Stmt, path: &str, ops: &mut Vec<DiffOp>) {
    match (x, y) {
        (Stmt::If { branches: xb, otherwise: xo, .. }, Stmt::If { branches: yb, otherwise: yo, .. })
            if xb.len() == yb.len()
                && xo.is_some() == yo.is_some()
                && xb.iter().zip(yb).all(|(p, q)| p.cond == q.cond) =>
        {
            for (k, (p, q)) in xb.iter().zip(yb).enumerate() {
                diff_block(&p.body, &q.body, &format!("{path}/branch{k}"), ops);
            }
            if let (Some(p), Some(q)) = (xo, yo) {
                diff_block(p, q, &format!("{path}/else"), ops);
            }
        }
        (Stmt::While { cond: xc, body: xb, .. }, Stmt::While { cond: yc, body: yb, .. }) if xc == yc => {
            diff_block(xb, yb, &format!("{path}/body"), ops);
        }
        _ if x == y => {}
        _ => ops.push(changed(path, &describe(x), &describe(y))),
    }
}

fn describe(s: &Stmt) -> String {
    match s {
        Stmt::If { branches, otherwise, .. } => {
            let mut parts: Vec<String> = branches.iter().map(|b| print_cond(&b.cond)).collect();
            if otherwise.is_some() {
                parts.push("else".into());
            }
            format!("if {}", parts.join(" | "))
        }
        other => print_stmt_header(other),
    }
}
