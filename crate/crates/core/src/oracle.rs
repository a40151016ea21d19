//! Exhaustive search over feasible matchings of small instances.
//!
//! The plain strategy assigns agents in index order, trying hospitals in
//! preference order and leaving the agent unmatched last, and prunes only on
//! residual capacity. Stability is checked at the leaves because the absence
//! of blocking pairs is not preserved by extending a partial matching.
//!
//! The decomposition strategy cuts the instance at a set of interface
//! hospitals. Removing them splits the agents into blocks that interact only
//! through the interface. Blocking pairs at a non-interface hospital involve
//! one block only, so each block is enumerated on its own and its matchings
//! are grouped by what they do at the interface. Groups are then combined
//! under the interface capacities, and blocking pairs at interface hospitals
//! are checked per combination. Any matching of a group can stand in for the
//! whole group at that point, since blocking at an interface hospital only
//! depends on the assignments of agents adjacent to it.
//!
//! Every search runs under a [`SearchBudget`]; running out is reported as
//! [`Verdict::BudgetExhausted`], never as a short answer.

use std::collections::HashMap;
use std::ops::ControlFlow;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::instance::{AgentId, HospitalId, Instance};
use crate::matching::{matching_size, Matching};
use crate::verify::{BlockingKind, BlockingScanner};

pub const DEFAULT_MAX_NODES: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchBudget {
    pub max_nodes: u64,
    pub max_solutions: Option<u64>,
    pub deadline: Option<Duration>,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_nodes: DEFAULT_MAX_NODES,
            max_solutions: None,
            deadline: None,
        }
    }
}

impl SearchBudget {
    pub fn nodes(max_nodes: u64) -> Self {
        SearchBudget {
            max_nodes,
            ..Default::default()
        }
    }

    pub fn with_max_solutions(mut self, n: u64) -> Self {
        self.max_solutions = Some(n);
        self
    }

    pub fn with_deadline(mut self, d: Duration) -> Self {
        self.deadline = Some(d);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Complete,
    BudgetExhausted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Query {
    Stable,
    OccStable,
    MaxOcc,
    APerfect,
}

impl Query {
    pub fn name(self) -> &'static str {
        match self {
            Query::Stable => "stable",
            Query::OccStable => "occ-stable",
            Query::MaxOcc => "max-occ",
            Query::APerfect => "a-perfect",
        }
    }

    fn kind(self) -> BlockingKind {
        match self {
            Query::Stable => BlockingKind::Classic,
            _ => BlockingKind::Occupancy,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Strategy {
    Plain,
    /// `None` picks the interface automatically.
    Decompose { interface: Option<Vec<HospitalId>> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleResult {
    pub verdict: Verdict,
    /// Number of matchings satisfying the query that were found.
    pub count: u64,
    /// The matchings themselves, in search order. Filled by the plain
    /// enumeration queries only.
    pub matchings: Vec<Matching>,
    /// Best `s(M)` for `max-occ`.
    pub value: Option<u64>,
    /// A matching satisfying the query (the optimum for `max-occ`).
    pub witness: Option<Matching>,
    pub nodes: u64,
}

impl OracleResult {
    pub fn is_complete(&self) -> bool {
        self.verdict == Verdict::Complete
    }

    /// For decision queries: was a witness found?
    pub fn found(&self) -> bool {
        self.witness.is_some()
    }
}

struct Meter {
    budget: SearchBudget,
    start: Instant,
    nodes: u64,
    exhausted: bool,
}

impl Meter {
    fn new(budget: SearchBudget) -> Self {
        Meter {
            budget,
            start: Instant::now(),
            nodes: 0,
            exhausted: false,
        }
    }

    /// Counts one node; false once any bound is exceeded.
    fn tick(&mut self) -> bool {
        self.nodes += 1;
        if self.nodes > self.budget.max_nodes {
            self.exhausted = true;
        } else if self.nodes % 1024 == 0 {
            if let Some(d) = self.budget.deadline {
                if self.start.elapsed() > d {
                    self.exhausted = true;
                }
            }
        }
        !self.exhausted
    }

    fn verdict(&self) -> Verdict {
        if self.exhausted {
            Verdict::BudgetExhausted
        } else {
            Verdict::Complete
        }
    }
}

struct Search<'a, F> {
    inst: &'a Instance,
    perfect: bool,
    residual: Vec<u64>,
    current: Matching,
    meter: &'a mut Meter,
    visit: F,
}

impl<F: FnMut(&Matching) -> ControlFlow<()>> Search<'_, F> {
    fn go(&mut self, i: usize) -> ControlFlow<()> {
        if !self.meter.tick() {
            return ControlFlow::Break(());
        }
        if i == self.inst.num_agents() {
            return (self.visit)(&self.current);
        }
        let a = AgentId(i as u32);
        let s = self.inst.size(a) as u64;
        for &h in self.inst.agent_prefs(a) {
            if self.residual[h.index()] >= s {
                self.residual[h.index()] -= s;
                self.current.assign(a, Some(h));
                let flow = self.go(i + 1);
                self.current.assign(a, None);
                self.residual[h.index()] += s;
                flow?;
            }
        }
        if !self.perfect {
            self.go(i + 1)?;
        }
        ControlFlow::Continue(())
    }
}

fn search(
    inst: &Instance,
    perfect: bool,
    meter: &mut Meter,
    visit: impl FnMut(&Matching) -> ControlFlow<()>,
) {
    let mut s = Search {
        inst,
        perfect,
        residual: inst.hospital_ids().map(|h| inst.capacity(h) as u64).collect(),
        current: Matching::empty(inst.num_agents()),
        meter,
        visit,
    };
    let _ = s.go(0);
}

/// Calls `visit` on every feasible matching once, in search order. Returns
/// the verdict and the number of search nodes.
pub fn for_each_feasible(
    inst: &Instance,
    budget: SearchBudget,
    visit: impl FnMut(&Matching) -> ControlFlow<()>,
) -> (Verdict, u64) {
    let mut meter = Meter::new(budget);
    search(inst, false, &mut meter, visit);
    (meter.verdict(), meter.nodes)
}

/// Collects matchings passing `keep`, honouring `max_solutions`.
fn collect(inst: &Instance, budget: SearchBudget, mut keep: impl FnMut(&Matching) -> bool) -> OracleResult {
    let mut meter = Meter::new(budget);
    let mut found = Vec::new();
    let mut over = false;
    search(inst, false, &mut meter, |m| {
        if keep(m) {
            if budget.max_solutions.is_some_and(|cap| found.len() as u64 >= cap) {
                over = true;
                return ControlFlow::Break(());
            }
            found.push(m.clone());
        }
        ControlFlow::Continue(())
    });
    OracleResult {
        verdict: if over { Verdict::BudgetExhausted } else { meter.verdict() },
        count: found.len() as u64,
        witness: found.first().cloned(),
        matchings: found,
        value: None,
        nodes: meter.nodes,
    }
}

/// Every feasible matching.
pub fn enumerate_feasible(inst: &Instance, budget: SearchBudget) -> OracleResult {
    collect(inst, budget, |_| true)
}

pub fn stable_matchings(inst: &Instance, budget: SearchBudget) -> OracleResult {
    let mut scanner = BlockingScanner::new(inst);
    collect(inst, budget, |m| !scanner.has_blocking_pair(inst, m, BlockingKind::Classic))
}

pub fn occupancy_stable_matchings(inst: &Instance, budget: SearchBudget) -> OracleResult {
    let mut scanner = BlockingScanner::new(inst);
    collect(inst, budget, |m| !scanner.has_blocking_pair(inst, m, BlockingKind::Occupancy))
}

/// An occupancy-stable matching of maximum total size; the first one in
/// search order among equals.
pub fn max_occupancy_stable(inst: &Instance, budget: SearchBudget) -> OracleResult {
    let mut meter = Meter::new(budget);
    let mut scanner = BlockingScanner::new(inst);
    let mut best: Option<(u64, Matching)> = None;
    let mut count = 0;
    search(inst, false, &mut meter, |m| {
        if !scanner.has_blocking_pair(inst, m, BlockingKind::Occupancy) {
            count += 1;
            let v = matching_size(inst, m);
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, m.clone()));
            }
        }
        ControlFlow::Continue(())
    });
    let (value, witness) = best.map_or((None, None), |(v, m)| (Some(v), Some(m)));
    OracleResult {
        verdict: meter.verdict(),
        count,
        matchings: Vec::new(),
        value,
        witness,
        nodes: meter.nodes,
    }
}

/// Does an occupancy-stable matching that matches every agent exist? Only
/// complete assignments are explored.
pub fn exists_a_perfect_occupancy_stable(inst: &Instance, budget: SearchBudget) -> OracleResult {
    let mut meter = Meter::new(budget);
    let mut scanner = BlockingScanner::new(inst);
    let mut witness = None;
    search(inst, true, &mut meter, |m| {
        if scanner.has_blocking_pair(inst, m, BlockingKind::Occupancy) {
            ControlFlow::Continue(())
        } else {
            witness = Some(m.clone());
            ControlFlow::Break(())
        }
    });
    let verdict = if witness.is_some() { Verdict::Complete } else { meter.verdict() };
    OracleResult {
        verdict,
        count: witness.is_some() as u64,
        matchings: Vec::new(),
        value: None,
        witness,
        nodes: meter.nodes,
    }
}

/// Runs `query` with the chosen strategy.
pub fn run_query(inst: &Instance, query: Query, strategy: &Strategy, budget: SearchBudget) -> OracleResult {
    match strategy {
        Strategy::Plain => match query {
            Query::Stable => stable_matchings(inst, budget),
            Query::OccStable => occupancy_stable_matchings(inst, budget),
            Query::MaxOcc => max_occupancy_stable(inst, budget),
            Query::APerfect => exists_a_perfect_occupancy_stable(inst, budget),
        },
        Strategy::Decompose { interface } => {
            let interface = match interface {
                Some(list) => list.clone(),
                None => auto_interface(inst, AUTO_BLOCK_LIMIT),
            };
            decomposed(inst, query, &interface, budget)
        }
    }
}

/// Blocks of agents left after removing the interface hospitals, each with
/// its non-interface hospitals. Ordered by smallest agent index.
pub fn blocks(inst: &Instance, interface: &[bool]) -> Vec<(Vec<AgentId>, Vec<HospitalId>)> {
    let na = inst.num_agents();
    let mut parent: Vec<usize> = (0..na + inst.num_hospitals()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (a, h) in inst.edges() {
        if !interface[h.index()] {
            let (x, y) = (find(&mut parent, a.index()), find(&mut parent, na + h.index()));
            parent[x.max(y)] = x.min(y);
        }
    }
    let mut slot: HashMap<usize, usize> = HashMap::new();
    let mut out: Vec<(Vec<AgentId>, Vec<HospitalId>)> = Vec::new();
    for a in inst.agent_ids() {
        let r = find(&mut parent, a.index());
        let k = *slot.entry(r).or_insert_with(|| {
            out.push((Vec::new(), Vec::new()));
            out.len() - 1
        });
        out[k].0.push(a);
    }
    for h in inst.hospital_ids() {
        if interface[h.index()] {
            continue;
        }
        let r = find(&mut parent, na + h.index());
        if let Some(&k) = slot.get(&r) {
            out[k].1.push(h);
        }
    }
    out
}

pub const AUTO_BLOCK_LIMIT: usize = 12;

/// Greedy interface choice: while the largest block has more than `limit`
/// agents, move its busiest hospital into the interface.
pub fn auto_interface(inst: &Instance, limit: usize) -> Vec<HospitalId> {
    let mut mark = vec![false; inst.num_hospitals()];
    loop {
        let bs = blocks(inst, &mark);
        let Some((agents, hospitals)) = bs.iter().max_by_key(|(a, _)| a.len()) else { break };
        if agents.len() <= limit || hospitals.is_empty() {
            break;
        }
        let h = *hospitals
            .iter()
            .max_by_key(|&&h| (inst.hospital_prefs(h).len(), std::cmp::Reverse(h)))
            .unwrap();
        mark[h.index()] = true;
    }
    inst.hospital_ids().filter(|h| mark[h.index()]).collect()
}

struct Group {
    count: u64,
    first: Matching,
    best_value: u64,
    best: Matching,
}

struct BlockTable {
    agents: Vec<AgentId>,
    /// Block agents adjacent to the interface; the signature order.
    boundary: Vec<AgentId>,
    signatures: Vec<Vec<Option<HospitalId>>>,
    groups: Vec<Group>,
}

fn enumerate_block(
    inst: &Instance,
    agents: &[AgentId],
    hospitals: &[HospitalId],
    interface: &[bool],
    query: Query,
    meter: &mut Meter,
) -> BlockTable {
    let mut keep_h: Vec<HospitalId> = hospitals.to_vec();
    for &a in agents {
        keep_h.extend(inst.agent_prefs(a).iter().filter(|h| interface[h.index()]));
    }
    keep_h.sort_unstable();
    keep_h.dedup();
    let sub = inst.induced(agents, &keep_h);
    let sub_interface: Vec<bool> = keep_h.iter().map(|h| interface[h.index()]).collect();
    let boundary_local: Vec<usize> = (0..agents.len())
        .filter(|&i| sub.agent_prefs(AgentId(i as u32)).iter().any(|h| sub_interface[h.index()]))
        .collect();
    let boundary = boundary_local.iter().map(|&i| agents[i]).collect();

    let mut scanner = BlockingScanner::new(&sub);
    let mut index: HashMap<Vec<Option<HospitalId>>, usize> = HashMap::new();
    let mut signatures = Vec::new();
    let mut groups: Vec<Group> = Vec::new();
    let to_global = |m: &Matching| -> Matching {
        let mut g = Matching::empty(inst.num_agents());
        for (a, h) in m.pairs() {
            g.assign(agents[a.index()], Some(keep_h[h.index()]));
        }
        g
    };
    search(&sub, query == Query::APerfect, meter, |m| {
        if scanner.has_blocking_pair_at(&sub, m, query.kind(), |h| !sub_interface[h.index()]) {
            return ControlFlow::Continue(());
        }
        let sig: Vec<Option<HospitalId>> = boundary_local
            .iter()
            .map(|&i| m.hospital_of(AgentId(i as u32)).map(|h| keep_h[h.index()]))
            .collect();
        let v = matching_size(&sub, m);
        match index.get(&sig) {
            Some(&k) => {
                let g = &mut groups[k];
                g.count += 1;
                if v > g.best_value {
                    g.best_value = v;
                    g.best = to_global(m);
                }
            }
            None => {
                let gm = to_global(m);
                index.insert(sig.clone(), groups.len());
                signatures.push(sig);
                groups.push(Group {
                    count: 1,
                    first: gm.clone(),
                    best_value: v,
                    best: gm,
                });
            }
        }
        ControlFlow::Continue(())
    });
    BlockTable {
        agents: agents.to_vec(),
        boundary,
        signatures,
        groups,
    }
}

fn decomposed(inst: &Instance, query: Query, interface: &[HospitalId], budget: SearchBudget) -> OracleResult {
    let mut mark = vec![false; inst.num_hospitals()];
    for h in interface {
        mark[h.index()] = true;
    }
    let mut meter = Meter::new(budget);
    let mut tables = Vec::new();
    for (agents, hospitals) in blocks(inst, &mark) {
        let t = enumerate_block(inst, &agents, &hospitals, &mark, query, &mut meter);
        if meter.exhausted {
            return exhausted(meter.nodes);
        }
        tables.push(t);
    }

    struct Combine<'a> {
        inst: &'a Instance,
        query: Query,
        tables: &'a [BlockTable],
        mark: &'a [bool],
        residual: Vec<u64>,
        chosen: Vec<usize>,
        scanner: BlockingScanner,
        count: u64,
        best: Option<(u64, Vec<usize>)>,
        first: Option<Vec<usize>>,
    }

    impl Combine<'_> {
        fn assemble(&self, use_best: bool) -> Matching {
            let mut m = Matching::empty(self.inst.num_agents());
            for (t, &g) in self.tables.iter().zip(&self.chosen) {
                let group = &t.groups[g];
                let src = if use_best { &group.best } else { &group.first };
                for &a in &t.agents {
                    m.assign(a, src.hospital_of(a));
                }
            }
            m
        }

        fn go(&mut self, b: usize, meter: &mut Meter) -> ControlFlow<()> {
            if !meter.tick() {
                return ControlFlow::Break(());
            }
            if b == self.tables.len() {
                let m = self.assemble(false);
                let mark = self.mark;
                if self.scanner.has_blocking_pair_at(self.inst, &m, self.query.kind(), |h| mark[h.index()]) {
                    return ControlFlow::Continue(());
                }
                let mut n = 1u64;
                let mut v = 0u64;
                for (t, &g) in self.tables.iter().zip(&self.chosen) {
                    n = n.saturating_mul(t.groups[g].count);
                    v += t.groups[g].best_value;
                }
                self.count = self.count.saturating_add(n);
                if self.first.is_none() {
                    self.first = Some(self.chosen.clone());
                }
                if self.best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                    self.best = Some((v, self.chosen.clone()));
                }
                return if self.query == Query::APerfect {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                };
            }
            let t = &self.tables[b];
            for g in 0..t.groups.len() {
                let sig = &t.signatures[g];
                let fits = |residual: &mut Vec<u64>| {
                    let mut ok = true;
                    for (&a, h) in t.boundary.iter().zip(sig) {
                        if let Some(h) = h.filter(|h| self.mark[h.index()]) {
                            let s = self.inst.size(a) as u64;
                            if residual[h.index()] < s {
                                ok = false;
                            }
                            residual[h.index()] = residual[h.index()].wrapping_sub(s);
                        }
                    }
                    ok
                };
                let mut residual = self.residual.clone();
                if !fits(&mut residual) {
                    continue;
                }
                let saved = std::mem::replace(&mut self.residual, residual);
                self.chosen.push(g);
                let flow = self.go(b + 1, meter);
                self.chosen.pop();
                self.residual = saved;
                flow?;
            }
            ControlFlow::Continue(())
        }
    }

    let mut c = Combine {
        inst,
        query,
        tables: &tables,
        mark: &mark,
        residual: inst.hospital_ids().map(|h| inst.capacity(h) as u64).collect(),
        chosen: Vec::new(),
        scanner: BlockingScanner::new(inst),
        count: 0,
        best: None,
        first: None,
    };
    let _ = c.go(0, &mut meter);
    let found_early = query == Query::APerfect && c.first.is_some();
    let verdict = if found_early { Verdict::Complete } else { meter.verdict() };
    let (value, witness) = match query {
        Query::MaxOcc => match c.best.take() {
            Some((v, chosen)) => {
                c.chosen = chosen;
                (Some(v), Some(c.assemble(true)))
            }
            None => (None, None),
        },
        _ => match c.first.take() {
            Some(chosen) => {
                c.chosen = chosen;
                (None, Some(c.assemble(false)))
            }
            None => (None, None),
        },
    };
    OracleResult {
        verdict,
        count: c.count,
        matchings: Vec::new(),
        value,
        witness,
        nodes: meter.nodes,
    }
}

fn exhausted(nodes: u64) -> OracleResult {
    OracleResult {
        verdict: Verdict::BudgetExhausted,
        count: 0,
        matchings: Vec::new(),
        value: None,
        witness: None,
        nodes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::matching::{is_feasible, matching_from_labels};
    use crate::partition::detect_generalized_master_list;
    use crate::solver::{solve, solve_occupancy};
    use crate::verify::{is_occupancy_stable, is_stable};
    use crate::RawInstance;

    /// Independent count: all assignment vectors, filtered by feasibility.
    fn naive_feasible(inst: &Instance) -> Vec<Matching> {
        let choices: Vec<Vec<Option<HospitalId>>> = inst
            .agent_ids()
            .map(|a| {
                let mut c: Vec<Option<HospitalId>> = inst.agent_prefs(a).iter().copied().map(Some).collect();
                c.push(None);
                c
            })
            .collect();
        let mut out = Vec::new();
        let mut idx = vec![0usize; choices.len()];
        loop {
            let m = Matching::from_assignment(idx.iter().zip(&choices).map(|(&i, c)| c[i]).collect());
            if is_feasible(inst, &m) {
                out.push(m);
            }
            let mut k = 0;
            loop {
                if k == idx.len() {
                    return out;
                }
                idx[k] += 1;
                if idx[k] < choices[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn feasible_counts() {
        let one = RawInstance::new()
            .agent("x", 1, &["h1", "h2"])
            .hospital("h1", 1, &["x"])
            .hospital("h2", 1, &["x"])
            .build()
            .unwrap();
        assert_eq!(enumerate_feasible(&one, SearchBudget::default()).count, 3);
        let fig1 = fixtures::no_stable_matching();
        let r = enumerate_feasible(&fig1, SearchBudget::default());
        let naive = naive_feasible(&fig1);
        assert_eq!(r.count as usize, naive.len());
        assert_eq!(r.count, 11);
        let empty = enumerate_feasible(&Instance::empty(), SearchBudget::default());
        assert_eq!(empty.matchings, vec![Matching::empty(0)]);
    }

    #[test]
    fn no_stable_matching_but_occupancy_stable_exists() {
        let inst = fixtures::no_stable_matching();
        let r = stable_matchings(&inst, SearchBudget::default());
        assert_eq!((r.count, r.verdict), (0, Verdict::Complete));
        let r = occupancy_stable_matchings(&inst, SearchBudget::default());
        let n = matching_from_labels(&inst, &[("a1", "h1"), ("a3", "h2")]).unwrap();
        assert!(r.matchings.contains(&n));
        let r = max_occupancy_stable(&inst, SearchBudget::default());
        assert_eq!(r.value, Some(3));
        assert!(!exists_a_perfect_occupancy_stable(&inst, SearchBudget::default()).found());
    }

    #[test]
    fn ratio_gap_optimum() {
        let inst = fixtures::ratio_gap();
        let r = max_occupancy_stable(&inst, SearchBudget::default());
        let m_prime = matching_from_labels(&inst, &[("a1", "h2"), ("a2", "h1"), ("a3", "h1")]).unwrap();
        assert_eq!(r.value, Some(7));
        assert_eq!(r.witness, Some(m_prime.clone()));
        let all = occupancy_stable_matchings(&inst, SearchBudget::default());
        assert!(all.matchings.contains(&m_prime));
        assert!(all.matchings.contains(&solve_occupancy(&inst)));
        let r = exists_a_perfect_occupancy_stable(&inst, SearchBudget::default());
        assert_eq!(r.witness, Some(m_prime));
    }

    #[test]
    fn trivial_queries() {
        let empty = Instance::empty();
        assert_eq!(occupancy_stable_matchings(&empty, SearchBudget::default()).count, 1);
        assert!(exists_a_perfect_occupancy_stable(&empty, SearchBudget::default()).found());
        let too_big = RawInstance::new()
            .agent("x", 3, &["h"])
            .hospital("h", 2, &["x"])
            .build()
            .unwrap();
        let r = max_occupancy_stable(&too_big, SearchBudget::default());
        assert_eq!(r.value, Some(0));
        assert_eq!(r.witness, Some(Matching::empty(1)));
    }

    #[test]
    fn unit_sizes_have_stable_matchings() {
        let inst = RawInstance::new()
            .agent("x", 1, &["p", "q"])
            .agent("y", 1, &["q", "p"])
            .hospital("p", 1, &["y", "x"])
            .hospital("q", 1, &["x", "y"])
            .build()
            .unwrap();
        let r = stable_matchings(&inst, SearchBudget::default());
        assert_eq!(r.count, 2);
    }

    #[test]
    fn detected_order_result_is_among_stable_matchings() {
        let inst = fixtures::gen_master_list_demo();
        let p = detect_generalized_master_list(&inst).unwrap();
        let m = solve(&inst, &p).unwrap().matching;
        let r = stable_matchings(&inst, SearchBudget::default());
        assert!(r.matchings.contains(&m));
        for s in &r.matchings {
            assert!(is_stable(&inst, s).unwrap());
            assert!(is_occupancy_stable(&inst, s).unwrap());
        }
    }

    #[test]
    fn budget_is_reported() {
        let inst = fixtures::no_stable_matching();
        let r = enumerate_feasible(&inst, SearchBudget::nodes(5));
        assert_eq!(r.verdict, Verdict::BudgetExhausted);
        let r = enumerate_feasible(&inst, SearchBudget::default().with_max_solutions(4));
        assert_eq!((r.verdict, r.count), (Verdict::BudgetExhausted, 4));
        let r = enumerate_feasible(&inst, SearchBudget::default().with_max_solutions(11));
        assert_eq!((r.verdict, r.count), (Verdict::Complete, 11));
    }

    fn two_blocks() -> Instance {
        // two copies of the no-stable pattern sharing hospital g, which both
        // a1 and b1 list last
        RawInstance::new()
            .agent("a1", 1, &["h2", "h1", "g"])
            .agent("a2", 1, &["h1", "h2"])
            .agent("a3", 2, &["h2"])
            .agent("b1", 1, &["k2", "k1", "g"])
            .agent("b2", 1, &["k1", "k2"])
            .agent("b3", 2, &["k2"])
            .hospital("h1", 1, &["a1", "a2"])
            .hospital("h2", 2, &["a2", "a3", "a1"])
            .hospital("k1", 1, &["b1", "b2"])
            .hospital("k2", 2, &["b2", "b3", "b1"])
            .hospital("g", 1, &["b1", "a1"])
            .build()
            .unwrap()
    }

    #[test]
    fn decomposition_agrees_with_plain_search() {
        let inst = two_blocks();
        let g = inst.hospital_id("g").unwrap();
        let strategy = Strategy::Decompose { interface: Some(vec![g]) };
        for q in [Query::Stable, Query::OccStable, Query::MaxOcc, Query::APerfect] {
            let plain = run_query(&inst, q, &Strategy::Plain, SearchBudget::default());
            let dec = run_query(&inst, q, &strategy, SearchBudget::default());
            assert_eq!(dec.verdict, Verdict::Complete);
            if q != Query::APerfect {
                assert_eq!(plain.count, dec.count, "{q:?}");
            }
            assert_eq!(plain.value, dec.value, "{q:?}");
            assert_eq!(plain.found(), dec.found(), "{q:?}");
            if let Some(w) = dec.witness {
                match q {
                    Query::Stable => assert!(is_stable(&inst, &w).unwrap()),
                    _ => assert!(is_occupancy_stable(&inst, &w).unwrap()),
                }
                if q == Query::MaxOcc {
                    assert_eq!(Some(matching_size(&inst, &w)), dec.value);
                }
            }
        }
    }

    #[test]
    fn block_split() {
        let inst = two_blocks();
        let mut mark = vec![false; inst.num_hospitals()];
        mark[inst.hospital_id("g").unwrap().index()] = true;
        let bs = blocks(&inst, &mark);
        assert_eq!(bs.len(), 2);
        assert_eq!(bs[0].0.len(), 3);
        let auto = auto_interface(&inst, 3);
        let mut mark = vec![false; inst.num_hospitals()];
        for h in &auto {
            mark[h.index()] = true;
        }
        assert!(blocks(&inst, &mark).iter().all(|(a, _)| a.len() <= 3));
        assert!(auto_interface(&inst, 6).is_empty());
    }
}
