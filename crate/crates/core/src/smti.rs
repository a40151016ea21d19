//! Stable marriage with ties and incomplete lists, restricted to the form
//! the hardness gadgets start from: `n` men and `n` women, women with strict
//! lists of length at most three, men with either a strict list of length
//! exactly three or a single tie of two women.
//!
//! Text format (`#` comments, optional `smti v1` header, women are indexed in
//! the order of their `w` lines):
//!
//! ```text
//! m m1 : w1 w2 w3
//! m m2 : ( w1 w2 )
//! w w1 : m1 m2
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::format::{tokenize, ParseError};
use crate::instance::{is_valid_label, Problem, ValidationReport};

pub const HEADER: &str = "smti v1";

/// Largest `n` the exhaustive complete-matching search accepts.
pub const MAX_EXHAUSTIVE: usize = 7;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ManPrefs {
    Strict(Vec<usize>),
    /// All listed women are equally good.
    Tie(Vec<usize>),
}

impl ManPrefs {
    pub fn women(&self) -> &[usize] {
        match self {
            ManPrefs::Strict(w) | ManPrefs::Tie(w) => w,
        }
    }

    pub fn is_tie(&self) -> bool {
        matches!(self, ManPrefs::Tie(_))
    }

    /// Rank of `w`; every woman of a tie has rank 0.
    pub fn rank(&self, w: usize) -> Option<usize> {
        match self {
            ManPrefs::Strict(list) => list.iter().position(|&x| x == w),
            ManPrefs::Tie(list) => list.contains(&w).then_some(0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Man {
    pub label: String,
    pub prefs: ManPrefs,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Woman {
    pub label: String,
    pub prefs: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SmtiInstance {
    pub men: Vec<Man>,
    pub women: Vec<Woman>,
}

/// Man index to woman index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SmtiMatching {
    pub partner: Vec<Option<usize>>,
}

impl SmtiMatching {
    pub fn empty(num_men: usize) -> Self {
        SmtiMatching {
            partner: vec![None; num_men],
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.partner
            .iter()
            .enumerate()
            .filter_map(|(m, w)| w.map(|w| (m, w)))
    }

    pub fn is_complete(&self, smti: &SmtiInstance) -> bool {
        self.partner.len() == smti.men.len()
            && self.partner.iter().all(Option::is_some)
            && smti.men.len() == smti.women.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SmtiError {
    #[error("exhaustive search supports at most {max} men, got {got}")]
    TooLarge { max: usize, got: usize },
    #[error("matching is not valid for this instance: {0}")]
    BadMatching(String),
}

impl SmtiInstance {
    pub fn man_index(&self, label: &str) -> Option<usize> {
        self.men.iter().position(|m| m.label == label)
    }

    pub fn woman_index(&self, label: &str) -> Option<usize> {
        self.women.iter().position(|w| w.label == label)
    }

    pub fn woman_rank(&self, w: usize, m: usize) -> Option<usize> {
        self.women[w].prefs.iter().position(|&x| x == m)
    }

    pub fn is_acceptable(&self, m: usize, w: usize) -> bool {
        self.men[m].prefs.rank(w).is_some() && self.woman_rank(w, m).is_some()
    }

    pub fn num_tied(&self) -> usize {
        self.men.iter().filter(|m| m.prefs.is_tie()).count()
    }
}

/// Structural checks: labels, duplicates, references, strictness, mutual
/// acceptability.
pub fn validate_smti(smti: &SmtiInstance) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen = HashSet::new();
    for m in &smti.men {
        if !is_valid_label(&m.label) {
            report.error(format!("man {}", m.label), Problem::BadLabel(m.label.clone()));
        }
        if !seen.insert(("m", m.label.as_str())) {
            report.error(
                format!("man {}", m.label),
                Problem::DuplicateId {
                    kind: "man",
                    label: m.label.clone(),
                },
            );
        }
    }
    for w in &smti.women {
        if !is_valid_label(&w.label) {
            report.error(format!("woman {}", w.label), Problem::BadLabel(w.label.clone()));
        }
        if !seen.insert(("w", w.label.as_str())) {
            report.error(
                format!("woman {}", w.label),
                Problem::DuplicateId {
                    kind: "woman",
                    label: w.label.clone(),
                },
            );
        }
    }
    let nm = smti.men.len();
    let nw = smti.women.len();
    for (i, m) in smti.men.iter().enumerate() {
        let item = format!("man {}", m.label);
        let mut dup = HashSet::new();
        for &w in m.prefs.women() {
            if w >= nw {
                report.error(
                    item.clone(),
                    Problem::DanglingReference {
                        owner: m.label.clone(),
                        target: format!("woman #{w}"),
                    },
                );
                continue;
            }
            if !dup.insert(w) {
                report.error(
                    item.clone(),
                    Problem::NotStrict {
                        owner: m.label.clone(),
                        entry: smti.women[w].label.clone(),
                    },
                );
            }
            if !smti.women[w].prefs.contains(&i) {
                report.error(
                    item.clone(),
                    Problem::NonMutual {
                        agent: m.label.clone(),
                        hospital: smti.women[w].label.clone(),
                    },
                );
            }
        }
    }
    for (j, w) in smti.women.iter().enumerate() {
        let item = format!("woman {}", w.label);
        let mut dup = HashSet::new();
        for &m in &w.prefs {
            if m >= nm {
                report.error(
                    item.clone(),
                    Problem::DanglingReference {
                        owner: w.label.clone(),
                        target: format!("man #{m}"),
                    },
                );
                continue;
            }
            if !dup.insert(m) {
                report.error(
                    item.clone(),
                    Problem::NotStrict {
                        owner: w.label.clone(),
                        entry: smti.men[m].label.clone(),
                    },
                );
            }
            if smti.men[m].prefs.rank(j).is_none() {
                report.error(
                    item.clone(),
                    Problem::NonMutual {
                        agent: smti.men[m].label.clone(),
                        hospital: w.label.clone(),
                    },
                );
            }
        }
    }
    report
}

/// Structural checks plus the restricted form.
pub fn validate_csmti(smti: &SmtiInstance) -> ValidationReport {
    let mut report = validate_smti(smti);
    let bad = |msg: String| Problem::Invariant(msg);
    if smti.men.len() != smti.women.len() {
        report.error(
            "instance",
            bad(format!(
                "{} men but {} women; the restricted form needs equal numbers",
                smti.men.len(),
                smti.women.len()
            )),
        );
    }
    for m in &smti.men {
        match &m.prefs {
            ManPrefs::Strict(list) if list.len() != 3 => report.error(
                format!("man {}", m.label),
                bad(format!("strict list has length {}, expected exactly 3", list.len())),
            ),
            ManPrefs::Tie(list) if list.len() != 2 => report.error(
                format!("man {}", m.label),
                bad(format!("tie has length {}, expected exactly 2", list.len())),
            ),
            _ => {}
        }
    }
    for w in &smti.women {
        if w.prefs.len() > 3 {
            report.error(
                format!("woman {}", w.label),
                bad(format!("list has length {}, expected at most 3", w.prefs.len())),
            );
        }
    }
    report
}

fn syntax(line: usize, column: usize, msg: impl Into<String>) -> ParseError {
    ParseError {
        line,
        column,
        problem: Problem::Syntax(msg.into()),
    }
}

enum PrefTokens {
    Strict(Vec<(usize, String)>),
    Tie(Vec<(usize, String)>),
}

fn parse_line(lineno: usize, tokens: &[(usize, &str)]) -> Result<(String, PrefTokens), ParseError> {
    let (kind_col, _) = tokens[0];
    let Some(&(label_col, label)) = tokens.get(1) else {
        return Err(syntax(lineno, kind_col, "expected a label"));
    };
    if matches!(label, ":" | "(" | ")") {
        return Err(syntax(lineno, label_col, "expected a label"));
    }
    match tokens.get(2) {
        Some((_, ":")) => {}
        Some(&(c, t)) => return Err(syntax(lineno, c, format!("expected `:`, found {t:?}"))),
        None => return Err(syntax(lineno, label_col, "expected `:` after the label")),
    }
    let rest = &tokens[3..];
    if let Some(&(open_col, "(")) = rest.first() {
        let Some(&(_, ")")) = rest.last() else {
            return Err(syntax(lineno, open_col, "unclosed tie"));
        };
        let inner = &rest[1..rest.len() - 1];
        let mut out = Vec::new();
        for &(c, t) in inner {
            if matches!(t, ":" | "(" | ")") {
                return Err(syntax(lineno, c, format!("unexpected {t:?} inside a tie")));
            }
            out.push((c, t.to_string()));
        }
        return Ok((label.to_string(), PrefTokens::Tie(out)));
    }
    let mut out = Vec::new();
    for &(c, t) in rest {
        if matches!(t, ":" | "(" | ")") {
            return Err(syntax(lineno, c, format!("unexpected {t:?} in preference list")));
        }
        out.push((c, t.to_string()));
    }
    Ok((label.to_string(), PrefTokens::Strict(out)))
}

/// Parses and runs the structural checks. The restricted form is checked
/// separately by [`validate_csmti`].
pub fn parse_smti(text: &str) -> Result<SmtiInstance, ParseError> {
    struct Pending {
        line: usize,
        label: String,
        prefs: PrefTokens,
    }
    let mut men = Vec::new();
    let mut women = Vec::new();
    let mut first = true;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let tokens = tokenize(line);
        if tokens.is_empty() {
            continue;
        }
        if first {
            first = false;
            if line.trim() == HEADER {
                continue;
            }
        }
        let (col, kind) = tokens[0];
        match kind {
            "m" => {
                let (label, prefs) = parse_line(lineno, &tokens)?;
                men.push(Pending {
                    line: lineno,
                    label,
                    prefs,
                });
            }
            "w" => {
                let (label, prefs) = parse_line(lineno, &tokens)?;
                if matches!(prefs, PrefTokens::Tie(_)) {
                    return Err(syntax(lineno, col, "women's lists cannot contain ties"));
                }
                women.push(Pending {
                    line: lineno,
                    label,
                    prefs,
                });
            }
            other => return Err(syntax(lineno, col, format!("expected `m` or `w`, found {other:?}"))),
        }
    }
    let man_ix: HashMap<&str, usize> = men.iter().enumerate().map(|(i, m)| (m.label.as_str(), i)).collect();
    let woman_ix: HashMap<&str, usize> = women.iter().enumerate().map(|(i, w)| (w.label.as_str(), i)).collect();
    let resolve = |line: usize, list: &[(usize, String)], ix: &HashMap<&str, usize>, owner: &str| {
        list.iter()
            .map(|(c, t)| {
                ix.get(t.as_str()).copied().ok_or(ParseError {
                    line,
                    column: *c,
                    problem: Problem::DanglingReference {
                        owner: owner.to_string(),
                        target: t.clone(),
                    },
                })
            })
            .collect::<Result<Vec<_>, _>>()
    };
    let mut smti = SmtiInstance::default();
    for m in &men {
        let prefs = match &m.prefs {
            PrefTokens::Strict(list) => ManPrefs::Strict(resolve(m.line, list, &woman_ix, &m.label)?),
            PrefTokens::Tie(list) => ManPrefs::Tie(resolve(m.line, list, &woman_ix, &m.label)?),
        };
        smti.men.push(Man {
            label: m.label.clone(),
            prefs,
        });
    }
    for w in &women {
        let PrefTokens::Strict(list) = &w.prefs else { unreachable!() };
        smti.women.push(Woman {
            label: w.label.clone(),
            prefs: resolve(w.line, list, &man_ix, &w.label)?,
        });
    }
    let report = validate_smti(&smti);
    if let Some(issue) = report.issues.into_iter().next() {
        return Err(ParseError {
            line: 0,
            column: 0,
            problem: issue.problem,
        });
    }
    Ok(smti)
}

pub fn serialize_smti(smti: &SmtiInstance) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for m in &smti.men {
        let names: Vec<&str> = m.prefs.women().iter().map(|&w| smti.women[w].label.as_str()).collect();
        match m.prefs {
            ManPrefs::Strict(_) => writeln!(out, "m {} : {}", m.label, names.join(" ")),
            ManPrefs::Tie(_) => writeln!(out, "m {} : ( {} )", m.label, names.join(" ")),
        }
        .unwrap();
    }
    for w in &smti.women {
        let names: Vec<&str> = w.prefs.iter().map(|&m| smti.men[m].label.as_str()).collect();
        writeln!(out, "w {} : {}", w.label, names.join(" ")).unwrap();
    }
    out
}

fn check_matching(smti: &SmtiInstance, m: &SmtiMatching) -> Result<Vec<Option<usize>>, SmtiError> {
    if m.partner.len() != smti.men.len() {
        return Err(SmtiError::BadMatching(format!(
            "{} entries for {} men",
            m.partner.len(),
            smti.men.len()
        )));
    }
    let mut wife_of = vec![None; smti.women.len()];
    for (man, w) in m.pairs() {
        if w >= smti.women.len() || !smti.is_acceptable(man, w) {
            return Err(SmtiError::BadMatching(format!("pair ({man}, {w}) is not acceptable")));
        }
        if wife_of[w].replace(man).is_some() {
            return Err(SmtiError::BadMatching(format!("woman {} matched twice", smti.women[w].label)));
        }
    }
    Ok(wife_of)
}

/// Pairs `(m, w)` where both strictly prefer each other to their partners.
pub fn weakly_blocking_pairs(smti: &SmtiInstance, m: &SmtiMatching) -> Result<Vec<(usize, usize)>, SmtiError> {
    let husband = check_matching(smti, m)?;
    let mut out = Vec::new();
    for (man, entry) in smti.men.iter().enumerate() {
        for &w in entry.prefs.women() {
            if m.partner[man] == Some(w) {
                continue;
            }
            let man_wants = match m.partner[man] {
                None => true,
                Some(cur) => entry.prefs.rank(w) < entry.prefs.rank(cur),
            };
            let woman_wants = match husband[w] {
                None => true,
                Some(cur) => smti.woman_rank(w, man) < smti.woman_rank(w, cur),
            };
            if man_wants && woman_wants {
                out.push((man, w));
            }
        }
    }
    Ok(out)
}

pub fn is_weakly_stable(smti: &SmtiInstance, m: &SmtiMatching) -> Result<bool, SmtiError> {
    Ok(weakly_blocking_pairs(smti, m)?.is_empty())
}

/// First complete weakly stable matching in search order (men by index,
/// each man's women in list order), if any.
pub fn smti_complete_stable(smti: &SmtiInstance) -> Result<Option<SmtiMatching>, SmtiError> {
    let n = smti.men.len();
    if n > MAX_EXHAUSTIVE || smti.women.len() > MAX_EXHAUSTIVE {
        return Err(SmtiError::TooLarge {
            max: MAX_EXHAUSTIVE,
            got: n.max(smti.women.len()),
        });
    }
    if n != smti.women.len() {
        return Ok(None);
    }
    let mut current = SmtiMatching::empty(n);
    let mut taken = vec![false; n];
    fn go(
        smti: &SmtiInstance,
        man: usize,
        current: &mut SmtiMatching,
        taken: &mut [bool],
    ) -> Option<SmtiMatching> {
        if man == smti.men.len() {
            return is_weakly_stable(smti, current)
                .unwrap_or(false)
                .then(|| current.clone());
        }
        for &w in smti.men[man].prefs.women() {
            if taken[w] || smti.woman_rank(w, man).is_none() {
                continue;
            }
            taken[w] = true;
            current.partner[man] = Some(w);
            if let Some(found) = go(smti, man + 1, current, taken) {
                return Some(found);
            }
            current.partner[man] = None;
            taken[w] = false;
        }
        None
    }
    Ok(go(smti, 0, &mut current, &mut taken))
}

/// Every complete weakly stable matching, in search order.
pub fn all_complete_stable(smti: &SmtiInstance) -> Result<Vec<SmtiMatching>, SmtiError> {
    let n = smti.men.len();
    if n > MAX_EXHAUSTIVE || smti.women.len() > MAX_EXHAUSTIVE {
        return Err(SmtiError::TooLarge {
            max: MAX_EXHAUSTIVE,
            got: n.max(smti.women.len()),
        });
    }
    let mut out = Vec::new();
    if n != smti.women.len() {
        return Ok(out);
    }
    let mut current = SmtiMatching::empty(n);
    let mut taken = vec![false; n];
    fn go(smti: &SmtiInstance, man: usize, current: &mut SmtiMatching, taken: &mut [bool], out: &mut Vec<SmtiMatching>) {
        if man == smti.men.len() {
            if is_weakly_stable(smti, current).unwrap_or(false) {
                out.push(current.clone());
            }
            return;
        }
        for &w in smti.men[man].prefs.women() {
            if taken[w] || smti.woman_rank(w, man).is_none() {
                continue;
            }
            taken[w] = true;
            current.partner[man] = Some(w);
            go(smti, man + 1, current, taken, out);
            current.partner[man] = None;
            taken[w] = false;
        }
    }
    go(smti, 0, &mut current, &mut taken, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strict3() -> SmtiInstance {
        parse_smti(
            "m m1 : w1 w2 w3\nm m2 : w2 w3 w1\nm m3 : w3 w1 w2\n\
             w w1 : m1 m2 m3\nw w2 : m2 m3 m1\nw w3 : m3 m1 m2\n",
        )
        .unwrap()
    }

    #[test]
    fn parse_round_trip() {
        let text = "smti v1\nm x : ( p q )\nm y : q p r\nm z : r q p\nw p : x y z\nw q : y x z\nw r : z y\n";
        let smti = parse_smti(text).unwrap();
        assert_eq!(smti.men[0].prefs, ManPrefs::Tie(vec![0, 1]));
        assert_eq!(serialize_smti(&smti), text);
        assert!(validate_csmti(&smti).is_empty());
    }

    #[test]
    fn parse_errors_carry_positions() {
        let err = parse_smti("m m1 : w9\nw w1 : m1\n").unwrap_err();
        assert_eq!((err.line, err.column), (1, 8));
        let err = parse_smti("m m1 : ( w1\n").unwrap_err();
        assert_eq!(err.line, 1);
        let err = parse_smti("w w1 : ( m1 m2 )\n").unwrap_err();
        assert!(err.to_string().contains("ties"));
        assert!(parse_smti("m m1 : w1\nw w1 :\n").is_err());
    }

    #[test]
    fn csmti_form_checks() {
        assert!(validate_csmti(&strict3()).is_empty());
        let long_tie = parse_smti("m a : ( x y z )\nw x : a\nw y : a\nw z : a\n").unwrap();
        let r = validate_csmti(&long_tie);
        assert!(r.issues.iter().any(|i| i.to_string().contains("tie has length 3")), "{r}");
        let unequal = parse_smti("m a : ( x y )\nw x : a\nw y : a\n").unwrap();
        let r = validate_csmti(&unequal);
        assert!(r.issues.iter().any(|i| i.to_string().contains("equal numbers")), "{r}");
    }

    #[test]
    fn single_pair() {
        let smti = parse_smti("m a : x\nw x : a\n").unwrap();
        let m = smti_complete_stable(&smti).unwrap().unwrap();
        assert_eq!(m.partner, vec![Some(0)]);
    }

    #[test]
    fn tied_man_and_strict_man() {
        // both women rank the tied man first; the strict man takes w1, the
        // tied man takes w2 (and the other way round is also stable: the
        // tied man is indifferent)
        let smti = parse_smti("m t : ( w1 w2 )\nm s : w1 w2\nw w1 : t s\nw w2 : t s\n").unwrap();
        let all = all_complete_stable(&smti).unwrap();
        let brute: Vec<SmtiMatching> = [[Some(0), Some(1)], [Some(1), Some(0)]]
            .into_iter()
            .map(|p| SmtiMatching { partner: p.to_vec() })
            .filter(|m| is_weakly_stable(&smti, m).unwrap())
            .collect();
        assert_eq!(all, brute);
        // (t,w2),(s,w1): s has his first choice, w2 has her first choice
        assert!(all.contains(&SmtiMatching {
            partner: vec![Some(1), Some(0)]
        }));
        // (t,w1),(s,w2): (s,w1) does not block because w1 holds t
        assert_eq!(all.len(), 2);
    }

    #[test]
    fn no_complete_stable_matching() {
        // w1 and w2 both rank the tied man last; each has a strict man on top
        // who wants her most, so the tied man cannot be placed
        let smti = parse_smti(
            "m t : ( w1 w2 )\nm s1 : w1 w2 w3\nm s2 : w2 w1 w3\n\
             w w1 : s1 s2 t\nw w2 : s2 s1 t\nw w3 : s1 s2\n",
        )
        .unwrap();
        assert!(validate_csmti(&smti).is_empty());
        assert_eq!(smti_complete_stable(&smti).unwrap(), None);
    }

    #[test]
    fn weak_blocking_needs_strict_preference_on_both_sides() {
        let smti = strict3();
        let identity = SmtiMatching {
            partner: vec![Some(0), Some(1), Some(2)],
        };
        assert!(is_weakly_stable(&smti, &identity).unwrap());
        let rotated = SmtiMatching {
            partner: vec![Some(1), Some(2), Some(0)],
        };
        assert!(!is_weakly_stable(&smti, &rotated).unwrap());
    }

    #[test]
    fn size_bound() {
        let mut smti = SmtiInstance::default();
        for i in 0..8 {
            smti.men.push(Man {
                label: format!("m{i}"),
                prefs: ManPrefs::Strict(vec![i]),
            });
            smti.women.push(Woman {
                label: format!("w{i}"),
                prefs: vec![i],
            });
        }
        assert!(matches!(smti_complete_stable(&smti), Err(SmtiError::TooLarge { .. })));
    }
}
