//! Instance model: agents carrying integral sizes, hospitals carrying
//! integral capacities, and strict, mutually consistent preference lists.
//!
//! Two layers live here. [`RawInstance`] is label-based and may violate any
//! invariant; it is what the text parser and the generators produce, and what
//! [`validate`] inspects. [`Instance`] is the checked, index-based form every
//! algorithm runs on. Rank lookups in both directions are precomputed at
//! construction so "who does h prefer" is answered in constant time.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Dense index of an agent inside an [`Instance`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentId(pub u32);

/// Dense index of a hospital inside an [`Instance`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HospitalId(pub u32);

impl AgentId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl HospitalId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Position of an item in a text document. Columns are 1-based.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TextPos {
    pub line: usize,
    pub label_col: usize,
    pub number_col: usize,
    pub pref_cols: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawAgent {
    pub label: String,
    pub size: i64,
    pub prefs: Vec<String>,
    pub pos: Option<TextPos>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawHospital {
    pub label: String,
    pub capacity: i64,
    pub prefs: Vec<String>,
    pub pos: Option<TextPos>,
}

/// Unchecked, label-based instance.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawInstance {
    pub agents: Vec<RawAgent>,
    pub hospitals: Vec<RawHospital>,
}

impl RawInstance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn agent(mut self, label: &str, size: i64, prefs: &[&str]) -> Self {
        self.push_agent(label, size, prefs.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn hospital(mut self, label: &str, capacity: i64, prefs: &[&str]) -> Self {
        self.push_hospital(label, capacity, prefs.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn push_agent(&mut self, label: &str, size: i64, prefs: Vec<String>) {
        self.agents.push(RawAgent {
            label: label.to_string(),
            size,
            prefs,
            pos: None,
        });
    }

    pub fn push_hospital(&mut self, label: &str, capacity: i64, prefs: Vec<String>) {
        self.hospitals.push(RawHospital {
            label: label.to_string(),
            capacity,
            prefs,
            pos: None,
        });
    }

    pub fn build(self) -> Result<Instance, InvalidInstance> {
        Instance::from_raw(self)
    }
}

/// What is wrong with an instance or a line of input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Problem {
    Syntax(String),
    BadLabel(String),
    DuplicateId { kind: &'static str, label: String },
    DanglingReference { owner: String, target: String },
    NonMutual { agent: String, hospital: String },
    NotStrict { owner: String, entry: String },
    NonPositive { what: &'static str, label: String, value: i64 },
    /// A structural property of a derived object (partition, trace) fails.
    Invariant(String),
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Problem::Syntax(msg) => write!(f, "syntax error: {msg}"),
            Problem::BadLabel(label) => write!(f, "invalid label {label:?}"),
            Problem::DuplicateId { kind, label } => write!(f, "duplicate {kind} id {label}"),
            Problem::DanglingReference { owner, target } => {
                write!(f, "dangling reference: {owner} lists unknown {target}")
            }
            Problem::NonMutual { agent, hospital } => {
                write!(f, "non-mutual edge between agent {agent} and hospital {hospital}")
            }
            Problem::NotStrict { owner, entry } => {
                write!(f, "preference list of {owner} is not strict: {entry} repeated")
            }
            Problem::NonPositive { what, label, value } => {
                write!(f, "non-positive {what} {value} for {label}")
            }
            Problem::Invariant(msg) => f.write_str(msg),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Location {
    pub line: Option<usize>,
    pub column: Option<usize>,
    /// Human-readable item, e.g. `agent a1`.
    pub item: String,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{}:{} ({})", l, c, self.item),
            (Some(l), None) => write!(f, "line {} ({})", l, self.item),
            _ => f.write_str(&self.item),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Issue {
    pub severity: Severity,
    pub location: Location,
    pub problem: Problem,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.problem)
    }
}

/// Every violated invariant found by a check; empty iff the input is valid.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn len(&self) -> usize {
        self.issues.len()
    }

    pub fn push(&mut self, location: Location, problem: Problem) {
        self.issues.push(Issue {
            severity: Severity::Error,
            location,
            problem,
        });
    }

    pub fn error(&mut self, item: impl Into<String>, problem: Problem) {
        self.push(
            Location {
                line: None,
                column: None,
                item: item.into(),
            },
            problem,
        );
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, thiserror::Error)]
#[error("invalid instance: {}", .0.issues.first().map(|i| i.to_string()).unwrap_or_default())]
pub struct InvalidInstance(pub ValidationReport);

pub(crate) fn is_valid_label(label: &str) -> bool {
    !label.is_empty()
        && !label
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, ':' | '#' | '(' | ')' | ','))
}

fn loc(pos: &Option<TextPos>, col: impl Fn(&TextPos) -> usize, item: String) -> Location {
    Location {
        line: pos.as_ref().map(|p| p.line),
        column: pos.as_ref().map(col),
        item,
    }
}

/// Lists every invariant the raw instance violates.
pub fn validate(raw: &RawInstance) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut agent_lists: HashMap<&str, HashSet<&str>> = HashMap::new();
    for a in &raw.agents {
        let item = format!("agent {}", a.label);
        if !is_valid_label(&a.label) {
            report.push(loc(&a.pos, |p| p.label_col, item.clone()), Problem::BadLabel(a.label.clone()));
        }
        if agent_lists.contains_key(a.label.as_str()) {
            report.push(
                loc(&a.pos, |p| p.label_col, item.clone()),
                Problem::DuplicateId { kind: "agent", label: a.label.clone() },
            );
        } else {
            agent_lists.insert(&a.label, a.prefs.iter().map(String::as_str).collect());
        }
        if a.size < 1 {
            report.push(
                loc(&a.pos, |p| p.number_col, item.clone()),
                Problem::NonPositive { what: "size", label: item.clone(), value: a.size },
            );
        }
    }

    let mut hospital_lists: HashMap<&str, HashSet<&str>> = HashMap::new();
    for h in &raw.hospitals {
        let item = format!("hospital {}", h.label);
        if !is_valid_label(&h.label) {
            report.push(loc(&h.pos, |p| p.label_col, item.clone()), Problem::BadLabel(h.label.clone()));
        }
        if hospital_lists.contains_key(h.label.as_str()) {
            report.push(
                loc(&h.pos, |p| p.label_col, item.clone()),
                Problem::DuplicateId { kind: "hospital", label: h.label.clone() },
            );
        } else {
            hospital_lists.insert(&h.label, h.prefs.iter().map(String::as_str).collect());
        }
        if h.capacity < 1 {
            report.push(
                loc(&h.pos, |p| p.number_col, item.clone()),
                Problem::NonPositive { what: "capacity", label: item.clone(), value: h.capacity },
            );
        }
    }

    for a in &raw.agents {
        let owner = format!("agent {}", a.label);
        let mut seen = HashSet::new();
        for (i, target) in a.prefs.iter().enumerate() {
            let at = loc(&a.pos, |p| p.pref_cols.get(i).copied().unwrap_or(0), owner.clone());
            if !seen.insert(target.as_str()) {
                report.push(at, Problem::NotStrict { owner: owner.clone(), entry: target.clone() });
                continue;
            }
            match hospital_lists.get(target.as_str()) {
                None => report.push(
                    at,
                    Problem::DanglingReference {
                        owner: owner.clone(),
                        target: format!("hospital {target}"),
                    },
                ),
                Some(list) if !list.contains(a.label.as_str()) => report.push(
                    at,
                    Problem::NonMutual { agent: a.label.clone(), hospital: target.clone() },
                ),
                Some(_) => {}
            }
        }
    }

    for h in &raw.hospitals {
        let owner = format!("hospital {}", h.label);
        let mut seen = HashSet::new();
        for (i, target) in h.prefs.iter().enumerate() {
            let at = loc(&h.pos, |p| p.pref_cols.get(i).copied().unwrap_or(0), owner.clone());
            if !seen.insert(target.as_str()) {
                report.push(at, Problem::NotStrict { owner: owner.clone(), entry: target.clone() });
                continue;
            }
            match agent_lists.get(target.as_str()) {
                None => report.push(
                    at,
                    Problem::DanglingReference {
                        owner: owner.clone(),
                        target: format!("agent {target}"),
                    },
                ),
                Some(list) if !list.contains(h.label.as_str()) => report.push(
                    at,
                    Problem::NonMutual { agent: target.clone(), hospital: h.label.clone() },
                ),
                Some(_) => {}
            }
        }
    }

    report
}

/// Lists stored back to back: entry `k` of row `i` is `items[start[i] + k]`.
#[derive(Clone, Debug, Default)]
struct Rows<T> {
    start: Vec<u32>,
    items: Vec<T>,
    /// `rank[j]` is the position of this entry within the opposite side's
    /// list.
    rank: Vec<u32>,
}

impl<T> Rows<T> {
    fn row(&self, i: usize) -> &[T] {
        &self.items[self.start[i] as usize..self.start[i + 1] as usize]
    }

    fn ranks(&self, i: usize) -> &[u32] {
        &self.rank[self.start[i] as usize..self.start[i + 1] as usize]
    }

    fn from_lists(lists: impl Iterator<Item = Vec<T>>) -> Self {
        let mut start = vec![0u32];
        let mut items = Vec::new();
        for list in lists {
            items.extend(list);
            start.push(items.len() as u32);
        }
        Rows {
            start,
            items,
            rank: Vec::new(),
        }
    }
}

/// A validated instance. Immutable once built.
#[derive(Clone, Debug)]
pub struct Instance {
    agent_labels: Vec<String>,
    sizes: Vec<u32>,
    agent_rows: Rows<HospitalId>,
    hospital_labels: Vec<String>,
    capacities: Vec<u32>,
    hospital_rows: Rows<AgentId>,
    agent_lookup: HashMap<String, AgentId>,
    hospital_lookup: HashMap<String, HospitalId>,
    /// (agent, hospital) -> (rank of hospital for agent, rank of agent for hospital)
    ranks: HashMap<(u32, u32), (u32, u32)>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.agent_labels == other.agent_labels
            && self.sizes == other.sizes
            && self.agent_rows.start == other.agent_rows.start
            && self.agent_rows.items == other.agent_rows.items
            && self.hospital_labels == other.hospital_labels
            && self.capacities == other.capacities
            && self.hospital_rows.start == other.hospital_rows.start
            && self.hospital_rows.items == other.hospital_rows.items
    }
}

impl Eq for Instance {}

impl Instance {
    pub fn empty() -> Self {
        Self::from_raw(RawInstance::default()).expect("empty instance is valid")
    }

    pub fn from_raw(raw: RawInstance) -> Result<Self, InvalidInstance> {
        let report = validate(&raw);
        if !report.is_empty() {
            return Err(InvalidInstance(report));
        }

        let agent_lookup: HashMap<String, AgentId> = raw
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| (a.label.clone(), AgentId(i as u32)))
            .collect();
        let hospital_lookup: HashMap<String, HospitalId> = raw
            .hospitals
            .iter()
            .enumerate()
            .map(|(i, h)| (h.label.clone(), HospitalId(i as u32)))
            .collect();

        let agent_rows = Rows::from_lists(
            raw.agents.iter().map(|a| a.prefs.iter().map(|l| hospital_lookup[l]).collect()),
        );
        let hospital_rows = Rows::from_lists(
            raw.hospitals.iter().map(|h| h.prefs.iter().map(|l| agent_lookup[l]).collect()),
        );
        let mut inst = Instance {
            sizes: raw.agents.iter().map(|a| a.size as u32).collect(),
            agent_labels: raw.agents.into_iter().map(|a| a.label).collect(),
            capacities: raw.hospitals.iter().map(|h| h.capacity as u32).collect(),
            hospital_labels: raw.hospitals.into_iter().map(|h| h.label).collect(),
            agent_rows,
            hospital_rows,
            agent_lookup,
            hospital_lookup,
            ranks: HashMap::new(),
        };

        let mut ranks = HashMap::with_capacity(inst.agent_rows.items.len());
        for a in inst.agent_ids() {
            for (k, h) in inst.agent_prefs(a).iter().enumerate() {
                ranks.insert((a.0, h.0), (k as u32, 0));
            }
        }
        for h in inst.hospital_ids() {
            for (i, a) in inst.hospital_prefs(h).iter().enumerate() {
                if let Some(entry) = ranks.get_mut(&(a.0, h.0)) {
                    entry.1 = i as u32;
                }
            }
        }
        inst.agent_rows.rank = inst.edges().map(|(a, h)| ranks[&(a.0, h.0)].1).collect();
        inst.hospital_rows.rank = inst
            .hospital_ids()
            .flat_map(|h| inst.hospital_prefs(h).iter().map(move |a| (*a, h)))
            .map(|(a, h)| ranks[&(a.0, h.0)].0)
            .collect();
        inst.ranks = ranks;
        Ok(inst)
    }

    /// Label-based copy, suitable for editing and re-validation.
    pub fn to_raw(&self) -> RawInstance {
        RawInstance {
            agents: self
                .agent_ids()
                .map(|a| RawAgent {
                    label: self.agent_label(a).to_string(),
                    size: self.size(a) as i64,
                    prefs: self.agent_prefs(a).iter().map(|&h| self.hospital_label(h).to_string()).collect(),
                    pos: None,
                })
                .collect(),
            hospitals: self
                .hospital_ids()
                .map(|h| RawHospital {
                    label: self.hospital_label(h).to_string(),
                    capacity: self.capacity(h) as i64,
                    prefs: self.hospital_prefs(h).iter().map(|&a| self.agent_label(a).to_string()).collect(),
                    pos: None,
                })
                .collect(),
        }
    }

    /// Sub-instance on the given agents and hospitals; edges leaving the
    /// selection are dropped. Relative order is preserved.
    pub fn induced(&self, agents: &[AgentId], hospitals: &[HospitalId]) -> Instance {
        let keep_a: HashSet<AgentId> = agents.iter().copied().collect();
        let keep_h: HashSet<HospitalId> = hospitals.iter().copied().collect();
        let mut raw = RawInstance::default();
        for a in self.agent_ids().filter(|a| keep_a.contains(a)) {
            let prefs = self
                .agent_prefs(a)
                .iter()
                .filter(|h| keep_h.contains(h))
                .map(|h| self.hospital_label(*h).to_string())
                .collect();
            raw.push_agent(self.agent_label(a), self.size(a) as i64, prefs);
        }
        for h in self.hospital_ids().filter(|h| keep_h.contains(h)) {
            let prefs = self
                .hospital_prefs(h)
                .iter()
                .filter(|a| keep_a.contains(a))
                .map(|a| self.agent_label(*a).to_string())
                .collect();
            raw.push_hospital(self.hospital_label(h), self.capacity(h) as i64, prefs);
        }
        Instance::from_raw(raw).expect("induced sub-instance of a valid instance is valid")
    }

    pub fn num_agents(&self) -> usize {
        self.sizes.len()
    }

    pub fn num_hospitals(&self) -> usize {
        self.capacities.len()
    }

    /// Number of mutually acceptable pairs.
    pub fn num_edges(&self) -> usize {
        self.ranks.len()
    }

    pub fn agent_ids(&self) -> impl Iterator<Item = AgentId> + Clone {
        (0..self.sizes.len() as u32).map(AgentId)
    }

    pub fn hospital_ids(&self) -> impl Iterator<Item = HospitalId> + Clone {
        (0..self.capacities.len() as u32).map(HospitalId)
    }

    pub fn size(&self, a: AgentId) -> u32 {
        self.sizes[a.index()]
    }

    pub fn capacity(&self, h: HospitalId) -> u32 {
        self.capacities[h.index()]
    }

    pub fn agent_prefs(&self, a: AgentId) -> &[HospitalId] {
        self.agent_rows.row(a.index())
    }

    pub fn hospital_prefs(&self, h: HospitalId) -> &[AgentId] {
        self.hospital_rows.row(h.index())
    }

    /// For each entry of `a`'s list, `a`'s position in that hospital's list.
    pub fn agent_entry_ranks(&self, a: AgentId) -> &[u32] {
        self.agent_rows.ranks(a.index())
    }

    /// For each entry of `h`'s list, `h`'s position in that agent's list.
    pub fn hospital_entry_ranks(&self, h: HospitalId) -> &[u32] {
        self.hospital_rows.ranks(h.index())
    }

    pub fn agent_label(&self, a: AgentId) -> &str {
        &self.agent_labels[a.index()]
    }

    pub fn hospital_label(&self, h: HospitalId) -> &str {
        &self.hospital_labels[h.index()]
    }

    pub fn agent_id(&self, label: &str) -> Option<AgentId> {
        self.agent_lookup.get(label).copied()
    }

    pub fn hospital_id(&self, label: &str) -> Option<HospitalId> {
        self.hospital_lookup.get(label).copied()
    }

    pub fn is_edge(&self, a: AgentId, h: HospitalId) -> bool {
        self.ranks.contains_key(&(a.0, h.0))
    }

    /// Position of `h` in `a`'s list.
    pub fn agent_rank(&self, a: AgentId, h: HospitalId) -> Option<u32> {
        self.ranks.get(&(a.0, h.0)).map(|r| r.0)
    }

    /// Position of `a` in `h`'s list.
    pub fn hospital_rank(&self, h: HospitalId, a: AgentId) -> Option<u32> {
        self.ranks.get(&(a.0, h.0)).map(|r| r.1)
    }

    /// Does `a` strictly prefer `h` to `current` (where `None` is unmatched)?
    pub fn agent_prefers(&self, a: AgentId, h: HospitalId, current: Option<HospitalId>) -> bool {
        match (self.agent_rank(a, h), current) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(r), Some(c)) => self.agent_rank(a, c).map_or(true, |rc| r < rc),
        }
    }

    /// Does `h` strictly prefer `x` to `y`? Both must be on `h`'s list.
    pub fn hospital_prefers(&self, h: HospitalId, x: AgentId, y: AgentId) -> bool {
        match (self.hospital_rank(h, x), self.hospital_rank(h, y)) {
            (Some(rx), Some(ry)) => rx < ry,
            _ => false,
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (AgentId, HospitalId)> + '_ {
        self.agent_ids()
            .flat_map(move |a| self.agent_prefs(a).iter().map(move |h| (a, *h)))
    }

    pub fn max_size(&self) -> u32 {
        self.sizes.iter().copied().max().unwrap_or(0)
    }

    pub fn total_agent_size(&self) -> u64 {
        self.sizes.iter().map(|&s| s as u64).sum()
    }

    pub fn total_capacity(&self) -> u64 {
        self.capacities.iter().map(|&c| c as u64).sum()
    }
}
