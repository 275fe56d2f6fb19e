use crate::constraint::Span;

use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Name(String),
    Number(f64),
    Str(String),
    LParen,
    RParen,
    Comma,
    Colon,
    Newline,
    Indent,
    Dedent,
    Eof,
    Kw(&'static str),
}

pub const KEYWORDS: [&str; 13] = [
    "behavior", "do", "until", "if", "elif", "else", "while", "terminate", "and", "or", "not", "True", "False",
];

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Name(n) => format!("name `{n}`"),
            Tok::Number(v) => format!("number {v}"),
            Tok::Str(_) => "string".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Newline => "end of line".into(),
            Tok::Indent => "indent".into(),
            Tok::Dedent => "dedent".into(),
            Tok::Eof => "end of input".into(),
            Tok::Kw(k) => format!("`{k}`"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

fn syntax(line: u32, col: u32, end_col: u32, expected: &[&str], found: &str) -> ParseError {
    ParseError::Syntax {
        span: Span::new(line, col, line, end_col),
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found: found.to_string(),
    }
}

/// Splits source into tokens, turning leading spaces into INDENT/DEDENT.
/// Tabs are rejected and every indent step must use the same width.
pub fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut stack = vec![0usize];
    let mut unit: Option<usize> = None;
    let mut last_line = 1u32;
    for (li, raw) in src.lines().enumerate() {
        let line = li as u32 + 1;
        last_line = line;
        let chars: Vec<char> = raw.chars().collect();
        let indent = chars.iter().take_while(|c| **c == ' ').count();
        if chars.get(indent) == Some(&'\t') {
            return Err(syntax(line, indent as u32 + 1, indent as u32 + 1, &["spaces"], "tab"));
        }
        let rest_blank = chars[indent..].iter().all(|c| c.is_whitespace()) || chars.get(indent) == Some(&'#');
        if rest_blank {
            continue;
        }
        let top = *stack.last().unwrap();
        let col = indent as u32 + 1;
        if indent > top {
            let step = indent - top;
            match unit {
                None => unit = Some(step),
                Some(u) if u != step => {
                    return Err(syntax(line, 1, col, &[&format!("indent of {} spaces", top + u)], &format!("{indent} spaces")))
                }
                _ => {}
            }
            stack.push(indent);
            out.push(Token { tok: Tok::Indent, span: Span::new(line, 1, line, col) });
        } else {
            while indent < *stack.last().unwrap() {
                stack.pop();
                out.push(Token { tok: Tok::Dedent, span: Span::new(line, 1, line, col) });
            }
            if indent != *stack.last().unwrap() {
                return Err(syntax(line, 1, col, &["a matching indentation level"], &format!("{indent} spaces")));
            }
        }
        lex_line(&chars, indent, line, &mut out)?;
        let end = chars.len() as u32 + 1;
        out.push(Token { tok: Tok::Newline, span: Span::new(line, end, line, end) });
    }
    let eof_line = last_line + 1;
    for _ in 1..stack.len() {
        out.push(Token { tok: Tok::Dedent, span: Span::new(eof_line, 1, eof_line, 1) });
    }
    out.push(Token { tok: Tok::Eof, span: Span::new(eof_line, 1, eof_line, 1) });
    Ok(out)
}

fn lex_line(chars: &[char], start: usize, line: u32, out: &mut Vec<Token>) -> Result<(), ParseError> {
    let mut i = start;
    let col = |i: usize| i as u32 + 1;
    while i < chars.len() {
        let c = chars[i];
        let begin = i;
        let tok = match c {
            ' ' => {
                i += 1;
                continue;
            }
            '\t' => return Err(syntax(line, col(i), col(i), &["spaces"], "tab")),
            '#' => break,
            '(' => {
                i += 1;
                Tok::LParen
            }
            ')' => {
                i += 1;
                Tok::RParen
            }
            ',' => {
                i += 1;
                Tok::Comma
            }
            ':' => {
                i += 1;
                Tok::Colon
            }
            '"' => {
                i += 1;
                let mut s = String::new();
                loop {
                    match chars.get(i) {
                        None => return Err(syntax(line, col(begin), col(chars.len()), &["closing `\"`"], "end of line")),
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            let e = match chars.get(i + 1) {
                                Some('"') => '"',
                                Some('\\') => '\\',
                                Some('n') => '\n',
                                Some(other) => {
                                    return Err(syntax(line, col(i), col(i + 1), &["escape \\\" \\\\ \\n"], &format!("\\{other}")))
                                }
                                None => return Err(syntax(line, col(begin), col(i), &["closing `\"`"], "end of line")),
                            };
                            s.push(e);
                            i += 2;
                        }
                        Some(ch) => {
                            s.push(*ch);
                            i += 1;
                        }
                    }
                }
                Tok::Str(s)
            }
            c if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit() || *d == '.')) || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) => {
                i += 1;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[begin..i].iter().collect();
                let v: f64 = text
                    .parse()
                    .map_err(|_| syntax(line, col(begin), col(i - 1), &["number"], &text))?;
                Tok::Number(v)
            }
            c if c.is_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let text: String = chars[begin..i].iter().collect();
                match KEYWORDS.iter().find(|k| **k == text) {
                    Some(k) => Tok::Kw(k),
                    None => Tok::Name(text),
                }
            }
            other => return Err(syntax(line, col(i), col(i), &["a token"], &format!("`{other}`"))),
        };
        out.push(Token { tok, span: Span::new(line, col(begin), line, col(i - 1)) });
    }
    Ok(())
}
