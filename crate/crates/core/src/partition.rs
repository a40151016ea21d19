//! Ordered partitions of the agents into size-homogeneous classes.
//!
//! A partition is a generalized master list when every hospital's list is
//! non-decreasing in class index. Detection works on the precedence graph
//! that has an arc `a -> b` whenever some hospital lists `a` directly before
//! `b`: agents in one strongly connected component must share a class, so a
//! component mixing sizes rules detection out, and otherwise any topological
//! order of the components is a valid class order.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::instance::{AgentId, Instance, Problem, ValidationReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    SizeDescending,
    DetectedGenMl,
    UserSupplied,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderedPartition {
    pub classes: Vec<Vec<AgentId>>,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PartitionError {
    #[error("agent {0:?} appears more than once")]
    Repeated(String),
    #[error("agent {0:?} is missing from the order")]
    Missing(String),
    #[error("unknown agent {0:?}")]
    UnknownAgent(String),
}

impl OrderedPartition {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Class index of every agent; `None` for agents outside the partition.
    pub fn class_index(&self, num_agents: usize) -> Vec<Option<u32>> {
        let mut out = vec![None; num_agents];
        for (k, class) in self.classes.iter().enumerate() {
            for a in class {
                if let Some(slot) = out.get_mut(a.index()) {
                    *slot = Some(k as u32);
                }
            }
        }
        out
    }

    /// One line per class, agent labels separated by spaces.
    pub fn to_text(&self, inst: &Instance) -> String {
        let mut out = String::new();
        for class in &self.classes {
            let labels: Vec<&str> = class.iter().map(|&a| inst.agent_label(a)).collect();
            out.push_str(&labels.join(" "));
            out.push('\n');
        }
        out
    }

    /// Reads the text form; blank lines and `#` comments are skipped. Only
    /// label resolution is checked here; use [`validate_ordered_partition`]
    /// for the structural checks.
    pub fn from_text(inst: &Instance, text: &str) -> Result<Self, PartitionError> {
        let mut classes = Vec::new();
        for line in text.lines() {
            let body = line.split('#').next().unwrap_or("");
            let labels: Vec<&str> = body.split_whitespace().collect();
            if labels.is_empty() {
                continue;
            }
            let class = labels
                .iter()
                .map(|l| inst.agent_id(l).ok_or_else(|| PartitionError::UnknownAgent(l.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            classes.push(class);
        }
        Ok(OrderedPartition {
            classes,
            provenance: Provenance::UserSupplied,
        })
    }
}

/// Groups agents by size, largest size first. Members keep index order.
pub fn size_descending_partition(inst: &Instance) -> OrderedPartition {
    let mut sizes: Vec<u32> = inst.agent_ids().map(|a| inst.size(a)).collect();
    sizes.sort_unstable_by(|x, y| y.cmp(x));
    sizes.dedup();
    let classes = sizes
        .iter()
        .map(|&s| inst.agent_ids().filter(|&a| inst.size(a) == s).collect())
        .collect();
    OrderedPartition {
        classes,
        provenance: Provenance::SizeDescending,
    }
}

/// Singleton classes following a master order on the agents.
pub fn master_list_partition(inst: &Instance, order: &[&str]) -> Result<OrderedPartition, PartitionError> {
    let mut seen = vec![false; inst.num_agents()];
    let mut classes = Vec::with_capacity(order.len());
    for label in order {
        let a = inst
            .agent_id(label)
            .ok_or_else(|| PartitionError::UnknownAgent(label.to_string()))?;
        if std::mem::replace(&mut seen[a.index()], true) {
            return Err(PartitionError::Repeated(label.to_string()));
        }
        classes.push(vec![a]);
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(PartitionError::Missing(inst.agent_label(AgentId(i as u32)).to_string()));
    }
    Ok(OrderedPartition {
        classes,
        provenance: Provenance::UserSupplied,
    })
}

/// Checks disjoint cover and size homogeneity; with `require_gen_ml`, also
/// that every hospital list is non-decreasing in class index.
pub fn validate_ordered_partition(
    inst: &Instance,
    p: &OrderedPartition,
    require_gen_ml: bool,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut class_of: Vec<Option<usize>> = vec![None; inst.num_agents()];
    for (k, class) in p.classes.iter().enumerate() {
        if class.is_empty() {
            report.error(format!("class {k}"), Problem::Invariant("empty class".into()));
            continue;
        }
        for &a in class {
            if a.index() >= inst.num_agents() {
                report.error(format!("class {k}"), Problem::Invariant(format!("unknown agent index {}", a.0)));
                continue;
            }
            if class_of[a.index()].is_some() {
                report.error(
                    format!("class {k}"),
                    Problem::Invariant(format!("agent {} is in more than one class", inst.agent_label(a))),
                );
            }
            class_of[a.index()] = Some(k);
        }
        let valid: Vec<AgentId> = class.iter().copied().filter(|a| a.index() < inst.num_agents()).collect();
        if let Some(&first) = valid.first() {
            if let Some(&odd) = valid.iter().find(|&&a| inst.size(a) != inst.size(first)) {
                report.error(
                    format!("class {k}"),
                    Problem::Invariant(format!(
                        "mixed sizes: {} has size {}, {} has size {}",
                        inst.agent_label(first),
                        inst.size(first),
                        inst.agent_label(odd),
                        inst.size(odd)
                    )),
                );
            }
        }
    }
    for a in inst.agent_ids() {
        if class_of[a.index()].is_none() {
            report.error(
                format!("agent {}", inst.agent_label(a)),
                Problem::Invariant("agent not covered by the partition".into()),
            );
        }
    }
    if require_gen_ml {
        for h in inst.hospital_ids() {
            for pair in inst.hospital_prefs(h).windows(2) {
                if let (Some(x), Some(y)) = (class_of[pair[0].index()], class_of[pair[1].index()]) {
                    if x > y {
                        report.error(
                            format!("hospital {}", inst.hospital_label(h)),
                            Problem::Invariant(format!(
                                "{} (class {x}) is ranked above {} (class {y})",
                                inst.agent_label(pair[0]),
                                inst.agent_label(pair[1])
                            )),
                        );
                    }
                }
            }
        }
    }
    report
}

/// Finds a generalized master list if one exists.
///
/// Components of the precedence graph are emitted in topological order,
/// always taking the ready component with the smallest agent index; adjacent
/// components of equal size are then merged into one class.
pub fn detect_generalized_master_list(inst: &Instance) -> Option<OrderedPartition> {
    let n = inst.num_agents();
    let mut graph: DiGraph<(), ()> = DiGraph::with_capacity(n, inst.num_edges());
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for h in inst.hospital_ids() {
        for pair in inst.hospital_prefs(h).windows(2) {
            graph.add_edge(nodes[pair[0].index()], nodes[pair[1].index()], ());
        }
    }

    let sccs = tarjan_scc(&graph);
    let mut comp_of = vec![0usize; n];
    let mut comps: Vec<Vec<AgentId>> = Vec::with_capacity(sccs.len());
    for (c, scc) in sccs.iter().enumerate() {
        let mut members: Vec<AgentId> = scc.iter().map(|v| AgentId(v.index() as u32)).collect();
        members.sort_unstable();
        let size = inst.size(members[0]);
        if members.iter().any(|&a| inst.size(a) != size) {
            return None;
        }
        for a in &members {
            comp_of[a.index()] = c;
        }
        comps.push(members);
    }

    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); comps.len()];
    let mut indeg = vec![0usize; comps.len()];
    for e in graph.raw_edges() {
        let (x, y) = (comp_of[e.source().index()], comp_of[e.target().index()]);
        if x != y {
            succ[x].push(y);
            indeg[y] += 1;
        }
    }

    let mut ready: BinaryHeap<Reverse<(AgentId, usize)>> = comps
        .iter()
        .enumerate()
        .filter(|(c, _)| indeg[*c] == 0)
        .map(|(c, m)| Reverse((m[0], c)))
        .collect();
    let mut classes: Vec<Vec<AgentId>> = Vec::new();
    while let Some(Reverse((_, c))) = ready.pop() {
        let members = std::mem::take(&mut comps[c]);
        match classes.last_mut() {
            Some(last) if inst.size(last[0]) == inst.size(members[0]) => {
                last.extend(members);
                last.sort_unstable();
            }
            _ => classes.push(members),
        }
        for &d in &succ[c] {
            indeg[d] -= 1;
            if indeg[d] == 0 {
                ready.push(Reverse((comps[d][0], d)));
            }
        }
    }
    Some(OrderedPartition {
        classes,
        provenance: Provenance::DetectedGenMl,
    })
}
