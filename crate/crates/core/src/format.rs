//! The line-oriented `.hrs` text format.
//!
//! ```text
//! hrs v1
//! # comment
//! agents:
//! a a1 1 : h2 h1
//! hospitals:
//! h h1 1 : a1 a2
//! ```

use std::fmt::{self, Write as _};

use crate::instance::{Instance, Problem, RawAgent, RawHospital, RawInstance, TextPos};

pub const HEADER: &str = "hrs v1";

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub problem: Problem,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.problem)
    }
}

fn syntax(line: usize, column: usize, msg: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column,
        problem: Problem::Syntax(msg.into()),
    }
}

/// Splits a line into (column, token) pairs. `:`, `(` and `)` are tokens on
/// their own; `#` starts a comment.
pub(crate) fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut start_col = 0;
    let mut col = 0;
    for (byte, ch) in line.char_indices() {
        col += 1;
        if ch == '#' {
            if let Some(s) = start.take() {
                out.push((start_col, &line[s..byte]));
            }
            return out;
        }
        let special = matches!(ch, ':' | '(' | ')');
        if ch.is_whitespace() || special {
            if let Some(s) = start.take() {
                out.push((start_col, &line[s..byte]));
            }
            if special {
                out.push((col, &line[byte..byte + 1]));
            }
        } else if start.is_none() {
            start = Some(byte);
            start_col = col;
        }
    }
    if let Some(s) = start {
        out.push((start_col, &line[s..]));
    }
    out
}

#[derive(PartialEq, Eq, Clone, Copy)]
enum Section {
    Preamble,
    Agents,
    Hospitals,
}

struct Entry {
    label: String,
    number: i64,
    prefs: Vec<String>,
    pos: TextPos,
}

fn parse_entry(lineno: usize, tokens: &[(usize, &str)]) -> Result<Entry, ParseError> {
    let kind_col = tokens[0].0;
    if tokens.len() < 3 {
        return Err(syntax(lineno, kind_col, "expected `<kind> <label> <number> : <prefs>`"));
    }
    let (label_col, label) = tokens[1];
    let (number_col, number) = tokens[2];
    if label == ":" {
        return Err(syntax(lineno, label_col, "missing label"));
    }
    let number: i64 = number
        .parse()
        .map_err(|_| syntax(lineno, number_col, format!("expected an integer, found {number:?}")))?;
    match tokens.get(3) {
        Some((_, ":")) => {}
        Some((c, t)) => return Err(syntax(lineno, *c, format!("expected `:`, found {t:?}"))),
        None => return Err(syntax(lineno, number_col, "expected `:` after the number")),
    }
    let mut prefs = Vec::new();
    let mut pref_cols = Vec::new();
    for &(c, t) in &tokens[4..] {
        if matches!(t, ":" | "(" | ")") {
            return Err(syntax(lineno, c, format!("unexpected {t:?} in preference list")));
        }
        prefs.push(t.to_string());
        pref_cols.push(c);
    }
    Ok(Entry {
        label: label.to_string(),
        number,
        prefs,
        pos: TextPos {
            line: lineno,
            label_col,
            number_col,
            pref_cols,
        },
    })
}

/// Reads the syntax only; no cross-reference checks.
pub fn parse_raw(text: &str) -> Result<RawInstance, ParseError> {
    let mut raw = RawInstance::default();
    let mut section = Section::Preamble;
    let mut seen_header = false;
    let mut last_line = 0;

    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        last_line = lineno;
        let tokens = tokenize(line);
        if tokens.is_empty() {
            continue;
        }
        if !seen_header {
            let words: Vec<&str> = tokens.iter().map(|t| t.1).collect();
            if words != ["hrs", "v1"] {
                return Err(syntax(lineno, tokens[0].0, format!("expected header `{HEADER}`")));
            }
            seen_header = true;
            continue;
        }
        let words: Vec<&str> = tokens.iter().map(|t| t.1).collect();
        match words.as_slice() {
            ["agents", ":"] => {
                if section != Section::Preamble {
                    return Err(syntax(lineno, tokens[0].0, "`agents:` must come first and only once"));
                }
                section = Section::Agents;
            }
            ["hospitals", ":"] => {
                if section == Section::Hospitals {
                    return Err(syntax(lineno, tokens[0].0, "duplicate `hospitals:` section"));
                }
                section = Section::Hospitals;
            }
            ["a", ..] => {
                if section != Section::Agents {
                    return Err(syntax(lineno, tokens[0].0, "agent line outside `agents:` section"));
                }
                let e = parse_entry(lineno, &tokens)?;
                raw.agents.push(RawAgent {
                    label: e.label,
                    size: e.number,
                    prefs: e.prefs,
                    pos: Some(e.pos),
                });
            }
            ["h", ..] => {
                if section != Section::Hospitals {
                    return Err(syntax(lineno, tokens[0].0, "hospital line outside `hospitals:` section"));
                }
                let e = parse_entry(lineno, &tokens)?;
                raw.hospitals.push(RawHospital {
                    label: e.label,
                    capacity: e.number,
                    prefs: e.prefs,
                    pos: Some(e.pos),
                });
            }
            _ => return Err(syntax(lineno, tokens[0].0, format!("unexpected {:?}", tokens[0].1))),
        }
    }
    if !seen_header {
        return Err(syntax(last_line.max(1), 1, format!("missing header `{HEADER}`")));
    }
    Ok(raw)
}

/// Parses and validates a `.hrs` document. The first violated invariant is
/// returned with its position.
pub fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    let raw = parse_raw(text)?;
    Instance::from_raw(raw).map_err(|invalid| {
        let issue = invalid.0.issues.into_iter().next().expect("non-empty report");
        ParseError {
            line: issue.location.line.unwrap_or(0),
            column: issue.location.column.unwrap_or(0),
            problem: issue.problem,
        }
    })
}

/// Canonical text form. `parse_instance(serialize_instance(x)) == x`.
pub fn serialize_instance(inst: &Instance) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    out.push_str("agents:\n");
    for a in inst.agent_ids() {
        let _ = write!(out, "a {} {} :", inst.agent_label(a), inst.size(a));
        for h in inst.agent_prefs(a) {
            out.push(' ');
            out.push_str(inst.hospital_label(*h));
        }
        out.push('\n');
    }
    out.push_str("hospitals:\n");
    for h in inst.hospital_ids() {
        let _ = write!(out, "h {} {} :", inst.hospital_label(h), inst.capacity(h));
        for a in inst.hospital_prefs(h) {
            out.push(' ');
            out.push_str(inst.agent_label(*a));
        }
        out.push('\n');
    }
    out
}
