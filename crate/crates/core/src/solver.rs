//! Sequential deferred acceptance over an ordered partition of the agents.
//!
//! Classes are processed in order. Each round runs agent-proposing deferred
//! acceptance for one class against the capacities left over by earlier
//! rounds, then adds its matching to the running total. Because every agent
//! of a round has the same size `s`, a hospital with residual `r` behaves
//! exactly like a unit-size hospital with `floor(r / s)` slots, so each round
//! is the classic hospital-residents problem.
//!
//! Hospital lists are regrouped by class once, up front, so each round only
//! ever scans its own sublists and the total work stays linear in the number
//! of edges.

use std::collections::HashSet;

use serde::Serialize;

use crate::instance::{AgentId, HospitalId, Instance, Problem, ValidationReport};
use crate::matching::{check_feasible, occupancies, Matching};
use crate::partition::{size_descending_partition, validate_ordered_partition, OrderedPartition};
use crate::verify::find_blocking_pairs_residual;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Round {
    pub index: usize,
    pub class_size: u32,
    /// Edges of the round subgraph, agent-major in preference order.
    pub edges: Vec<(AgentId, HospitalId)>,
    /// Residual capacity of every hospital adjacent to the class, at the
    /// start of the round.
    pub residual: Vec<(HospitalId, u32)>,
    pub matching: Vec<(AgentId, HospitalId)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveTrace {
    pub partition: OrderedPartition,
    pub rounds: Vec<Round>,
    /// Running union of round matchings after each round.
    pub cumulative: Vec<Matching>,
    pub matching: Matching,
}

#[derive(Clone, Debug, thiserror::Error)]
pub enum SolveError {
    #[error("invalid partition:\n{0}")]
    InvalidPartition(ValidationReport),
}

/// Slot layout of the hospital lists. Hospital `h` owns the slots
/// `offset[h] .. offset[h] + len(h)`. Within that region each class must be
/// contiguous, so lists that interleave classes are regrouped by a stable
/// counting sort; all other lists keep slot = offset + rank.
struct Slots {
    offset: Vec<u32>,
    regrouped: Vec<bool>,
    /// Offset plus rank to slot, for regrouped hospitals.
    slot_of: Vec<u32>,
    /// Slot to agent, for regrouped hospitals.
    agent_at: Vec<AgentId>,
}

const NO_CLASS: u32 = u32::MAX;

impl Slots {
    fn build(inst: &Instance, num_classes: usize, class_of: &[u32]) -> Self {
        let mut offset = Vec::with_capacity(inst.num_hospitals());
        let mut total = 0usize;
        for h in inst.hospital_ids() {
            offset.push(total as u32);
            total += inst.hospital_prefs(h).len();
        }
        assert!(total < u32::MAX as usize, "too many edges");

        let mut closed = vec![u32::MAX; num_classes];
        let regrouped: Vec<bool> = inst
            .hospital_ids()
            .map(|h| {
                let mut prev = NO_CLASS;
                for a in inst.hospital_prefs(h) {
                    let k = class_of[a.index()];
                    if k == NO_CLASS || k == prev {
                        continue;
                    }
                    if closed[k as usize] == h.0 {
                        return true;
                    }
                    if prev != NO_CLASS {
                        closed[prev as usize] = h.0;
                    }
                    prev = k;
                }
                false
            })
            .collect();

        let mut slots = Slots {
            offset,
            regrouped,
            slot_of: Vec::new(),
            agent_at: Vec::new(),
        };
        if !slots.regrouped.contains(&true) {
            return slots;
        }
        slots.slot_of = vec![u32::MAX; total];
        slots.agent_at = vec![AgentId(0); total];
        let mut cursor = vec![0u32; num_classes];
        let mut touched = Vec::new();
        for h in inst.hospital_ids().filter(|h| slots.regrouped[h.index()]) {
            let prefs = inst.hospital_prefs(h);
            for a in prefs {
                let k = class_of[a.index()];
                if k != NO_CLASS {
                    if cursor[k as usize] == 0 {
                        touched.push(k);
                    }
                    cursor[k as usize] += 1;
                }
            }
            let base = slots.offset[h.index()];
            let mut next = base;
            for &k in &touched {
                let c = cursor[k as usize];
                cursor[k as usize] = next;
                next += c;
            }
            for (r, a) in prefs.iter().enumerate() {
                let k = class_of[a.index()];
                if k != NO_CLASS {
                    let p = cursor[k as usize];
                    cursor[k as usize] += 1;
                    slots.slot_of[base as usize + r] = p;
                    slots.agent_at[p as usize] = *a;
                }
            }
            for k in touched.drain(..) {
                cursor[k as usize] = 0;
            }
        }
        slots
    }

    fn slot(&self, h: HospitalId, rank: u32) -> u32 {
        let p = self.offset[h.index()] + rank;
        if self.regrouped[h.index()] {
            self.slot_of[p as usize]
        } else {
            p
        }
    }

    fn agent(&self, inst: &Instance, h: HospitalId, slot: u32) -> AgentId {
        if self.regrouped[h.index()] {
            self.agent_at[slot as usize]
        } else {
            inst.hospital_prefs(h)[(slot - self.offset[h.index()]) as usize]
        }
    }
}

#[derive(Clone, Copy, Default)]
struct HospitalState {
    stamp: u32,
    slots: u32,
    count: u32,
    worst: u32,
}

/// Bitset over regrouped positions.
struct Held(Vec<u64>);

impl Held {
    fn set(&mut self, p: u32) {
        self.0[p as usize / 64] |= 1 << (p % 64);
    }

    fn clear(&mut self, p: u32) {
        self.0[p as usize / 64] &= !(1 << (p % 64));
    }

    /// Highest set position below `p`; one must exist.
    fn prev(&self, p: u32) -> u32 {
        let mut w = p as usize / 64;
        let mut word = self.0[w] & ((1u64 << (p % 64)) - 1);
        while word == 0 {
            w -= 1;
            word = self.0[w];
        }
        (w * 64 + 63 - word.leading_zeros() as usize) as u32
    }
}

/// Per-hospital proposal state, reset lazily by round stamp.
struct Engine<'a> {
    inst: &'a Instance,
    slots: Slots,
    hospitals: Vec<HospitalState>,
    held: Held,
    next: Vec<u32>,
    assigned: Vec<Option<HospitalId>>,
}

impl<'a> Engine<'a> {
    fn new(inst: &'a Instance, classes: &[Vec<AgentId>]) -> Self {
        let mut class_of = vec![NO_CLASS; inst.num_agents()];
        for (k, class) in classes.iter().enumerate() {
            for a in class {
                class_of[a.index()] = k as u32;
            }
        }
        let slots = Slots::build(inst, classes.len(), &class_of);
        let held = Held(vec![0; (inst.num_edges() + 1).div_ceil(64)]);
        Engine {
            inst,
            slots,
            hospitals: vec![HospitalState::default(); inst.num_hospitals()],
            held,
            next: vec![0; inst.num_agents()],
            assigned: vec![None; inst.num_agents()],
        }
    }

    /// Agent-proposing deferred acceptance for one class of common size
    /// `size`. Proposals are issued in `class` order.
    fn run_round(&mut self, round: u32, class: &[AgentId], size: u32, residual: &[u64]) {
        let inst = self.inst;
        let mut free: Vec<AgentId> = class.iter().rev().copied().collect();
        while let Some(a) = free.pop() {
            let prefs = inst.agent_prefs(a);
            let ranks = inst.agent_entry_ranks(a);
            while (self.next[a.index()] as usize) < prefs.len() {
                let k = self.next[a.index()] as usize;
                let h = prefs[k];
                let p = self.slots.slot(h, ranks[k]);
                let st = &mut self.hospitals[h.index()];
                if st.stamp != round {
                    *st = HospitalState {
                        stamp: round,
                        slots: (residual[h.index()] / size as u64).min(u32::MAX as u64) as u32,
                        count: 0,
                        worst: 0,
                    };
                }
                if st.count < st.slots {
                    self.held.set(p);
                    st.worst = if st.count == 0 { p } else { st.worst.max(p) };
                    st.count += 1;
                    self.assigned[a.index()] = Some(h);
                    break;
                }
                if st.slots > 0 && p < st.worst {
                    let old = st.worst;
                    self.held.clear(old);
                    self.held.set(p);
                    st.worst = self.held.prev(old);
                    let loser = self.slots.agent(inst, h, old);
                    self.assigned[loser.index()] = None;
                    self.next[loser.index()] += 1;
                    free.push(loser);
                    self.assigned[a.index()] = Some(h);
                    break;
                }
                self.next[a.index()] += 1;
            }
        }
    }
}

fn check_partition(inst: &Instance, p: &OrderedPartition) -> Result<(), SolveError> {
    let report = validate_ordered_partition(inst, p, false);
    if report.is_empty() {
        Ok(())
    } else {
        Err(SolveError::InvalidPartition(report))
    }
}

fn run(inst: &Instance, p: &OrderedPartition, mut trace: Option<&mut Vec<Round>>) -> Matching {
    let mut engine = Engine::new(inst, &p.classes);
    let mut residual: Vec<u64> = inst.hospital_ids().map(|h| inst.capacity(h) as u64).collect();
    let mut seen = vec![u32::MAX; inst.num_hospitals()];
    let mut result = Matching::empty(inst.num_agents());
    for (k, class) in p.classes.iter().enumerate() {
        let size = inst.size(class[0]);
        let mut round = trace.as_ref().map(|_| Round {
            index: k + 1,
            class_size: size,
            edges: Vec::new(),
            residual: Vec::new(),
            matching: Vec::new(),
        });
        if let Some(r) = round.as_mut() {
            for &a in class {
                for &h in inst.agent_prefs(a) {
                    r.edges.push((a, h));
                    if seen[h.index()] != k as u32 {
                        seen[h.index()] = k as u32;
                        r.residual.push((h, residual[h.index()] as u32));
                    }
                }
            }
            r.residual.sort_unstable();
        }
        engine.run_round(k as u32 + 1, class, size, &residual);
        for &a in class {
            if let Some(h) = engine.assigned[a.index()] {
                residual[h.index()] -= size as u64;
                result.assign(a, Some(h));
                if let Some(r) = round.as_mut() {
                    r.matching.push((a, h));
                }
            }
        }
        if let (Some(t), Some(mut r)) = (trace.as_deref_mut(), round) {
            r.matching.sort_unstable();
            t.push(r);
        }
    }
    result
}

/// Runs the rounds and records everything needed to re-check them.
pub fn solve(inst: &Instance, p: &OrderedPartition) -> Result<SolveTrace, SolveError> {
    check_partition(inst, p)?;
    let mut rounds = Vec::with_capacity(p.len());
    let matching = run(inst, p, Some(&mut rounds));
    let mut cumulative = Vec::with_capacity(rounds.len());
    let mut acc = Matching::empty(inst.num_agents());
    for r in &rounds {
        for &(a, h) in &r.matching {
            acc.assign(a, Some(h));
        }
        cumulative.push(acc.clone());
    }
    Ok(SolveTrace {
        partition: p.clone(),
        rounds,
        cumulative,
        matching,
    })
}

/// Same result as [`solve`] without building a trace.
pub fn solve_matching(inst: &Instance, p: &OrderedPartition) -> Result<Matching, SolveError> {
    check_partition(inst, p)?;
    Ok(run(inst, p, None))
}

/// Occupancy-stable matching from the size-descending class order.
pub fn solve_occupancy(inst: &Instance) -> Matching {
    run(inst, &size_descending_partition(inst), None)
}

/// One uniform-size round on its own: `class` agents (all of one size)
/// propose, in the given order, against `residual` capacities.
pub fn uniform_gs(inst: &Instance, class: &[AgentId], residual: &[u32]) -> Matching {
    let mut m = Matching::empty(inst.num_agents());
    let Some(&first) = class.first() else {
        return m;
    };
    let size = inst.size(first);
    debug_assert!(class.iter().all(|&a| inst.size(a) == size));
    let classes = vec![class.to_vec()];
    let mut engine = Engine::new(inst, &classes);
    let residual: Vec<u64> = residual.iter().map(|&r| r as u64).collect();
    engine.run_round(1, class, size, &residual);
    for &a in class {
        m.assign(a, engine.assigned[a.index()]);
    }
    m
}

/// Re-checks a trace: round edge sets are disjoint, the cumulative
/// matchings are the running unions of the round matchings and their agents
/// belong to the round's class, occupancies never decrease, residuals are
/// consistent, and every round matching has no blocking pair inside its
/// round under the residual capacities.
pub fn check_trace(inst: &Instance, trace: &SolveTrace) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut fail = |item: String, msg: String| report.error(item, Problem::Invariant(msg));
    let class_of = trace.partition.class_index(inst.num_agents());

    let mut owner: std::collections::HashMap<(AgentId, HospitalId), usize> = Default::default();
    for r in &trace.rounds {
        for &e in &r.edges {
            if let Some(prev) = owner.insert(e, r.index) {
                if prev != r.index {
                    fail(
                        format!("round {}", r.index),
                        format!(
                            "round edge sets overlap: ({}, {}) also in round {prev}",
                            inst.agent_label(e.0),
                            inst.hospital_label(e.1)
                        ),
                    );
                }
            }
        }
    }

    if trace.cumulative.len() != trace.rounds.len() {
        fail(
            "trace".into(),
            format!("{} rounds but {} cumulative matchings", trace.rounds.len(), trace.cumulative.len()),
        );
    }
    let mut union = Matching::empty(inst.num_agents());
    let mut prev_occ = vec![0u64; inst.num_hospitals()];
    for (i, r) in trace.rounds.iter().enumerate() {
        let item = format!("round {}", r.index);
        let edge_set: HashSet<(AgentId, HospitalId)> = r.edges.iter().copied().collect();
        for &(a, h) in &r.matching {
            if class_of.get(a.index()).copied().flatten() != Some(i as u32) {
                fail(item.clone(), format!("matched agent {} is not in this round's class", inst.agent_label(a)));
            }
            if !edge_set.contains(&(a, h)) {
                fail(item.clone(), format!("matched pair ({}, {}) is not a round edge", inst.agent_label(a), inst.hospital_label(h)));
            }
            union.assign(a, Some(h));
        }
        let Some(cum) = trace.cumulative.get(i) else { continue };
        if *cum != union {
            fail(item.clone(), "cumulative matching differs from the union of round matchings".into());
        }
        for &(h, res) in &r.residual {
            let expected = inst.capacity(h) as i64 - prev_occ[h.index()] as i64;
            if res as i64 != expected {
                fail(
                    item.clone(),
                    format!("residual of {} is {res}, expected {expected}", inst.hospital_label(h)),
                );
            }
        }
        if check_feasible(inst, cum).is_err() {
            fail(item.clone(), "cumulative matching is infeasible".into());
            continue;
        }
        let occ = occupancies(inst, cum);
        for h in inst.hospital_ids() {
            if occ[h.index()] < prev_occ[h.index()] {
                fail(
                    item.clone(),
                    format!("occupancy of {} decreased from {} to {}", inst.hospital_label(h), prev_occ[h.index()], occ[h.index()]),
                );
            }
        }

        let mut caps = vec![0i64; inst.num_hospitals()];
        for &(h, res) in &r.residual {
            caps[h.index()] = res as i64;
        }
        let round_matching = Matching::from_pairs(inst.num_agents(), r.matching.iter().copied());
        match find_blocking_pairs_residual(inst, &round_matching, &caps, &r.edges) {
            Ok(ws) if ws.is_empty() => {}
            Ok(ws) => fail(
                item.clone(),
                format!(
                    "round matching has {} residual blocking pair(s), first ({}, {})",
                    ws.len(),
                    inst.agent_label(ws[0].agent),
                    inst.hospital_label(ws[0].hospital)
                ),
            ),
            Err(e) => fail(item.clone(), format!("round matching rejected: {e}")),
        }
        prev_occ = occ;
    }
    if trace.matching != union {
        fail("trace".into(), "final matching differs from the union of round matchings".into());
    }
    if let Some(last) = trace.cumulative.last() {
        if *last != trace.matching {
            fail("trace".into(), "final matching differs from the last cumulative matching".into());
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::matching::{matching_from_labels, matching_size};
    use crate::partition::detect_generalized_master_list;
    use crate::verify::{is_occupancy_stable, is_stable};
    use crate::RawInstance;

    #[test]
    fn ratio_gap_trace() {
        let inst = fixtures::ratio_gap();
        let trace = solve(&inst, &size_descending_partition(&inst)).unwrap();
        let expect = matching_from_labels(&inst, &[("a1", "h1")]).unwrap();
        assert_eq!(trace.matching, expect);
        assert_eq!(matching_size(&inst, &trace.matching), 3);
        assert_eq!(trace.rounds.len(), 2);
        assert!(trace.rounds[1].matching.is_empty());
        assert!(check_trace(&inst, &trace).is_empty());
    }

    #[test]
    fn unstable_instance_gets_occupancy_stable_matching() {
        let inst = fixtures::no_stable_matching();
        let m = solve_occupancy(&inst);
        let n = matching_from_labels(&inst, &[("a1", "h1"), ("a3", "h2")]).unwrap();
        assert_eq!(m, n);
        assert!(is_occupancy_stable(&inst, &m).unwrap());
        let trace = solve(&inst, &size_descending_partition(&inst)).unwrap();
        // second round sees h1:1, h2:0
        let h1 = inst.hospital_id("h1").unwrap();
        let h2 = inst.hospital_id("h2").unwrap();
        assert_eq!(trace.rounds[1].residual, vec![(h1, 1), (h2, 0)]);
    }

    #[test]
    fn empty_instance() {
        let inst = Instance::empty();
        let p = size_descending_partition(&inst);
        let trace = solve(&inst, &p).unwrap();
        assert!(trace.rounds.is_empty());
        assert_eq!(trace.matching, Matching::empty(0));
    }

    #[test]
    fn single_pair_that_fits() {
        let inst = RawInstance::new()
            .agent("x", 2, &["h"])
            .hospital("h", 2, &["x"])
            .build()
            .unwrap();
        assert_eq!(solve_occupancy(&inst), matching_from_labels(&inst, &[("x", "h")]).unwrap());
    }

    #[test]
    fn uniform_round_examples() {
        let inst = fixtures::no_stable_matching();
        let a3 = inst.agent_id("a3").unwrap();
        let m = uniform_gs(&inst, &[a3], &[1, 2]);
        assert_eq!(m, matching_from_labels(&inst, &[("a3", "h2")]).unwrap());
        let m = uniform_gs(&inst, &[a3], &[1, 1]);
        assert_eq!(m.num_matched(), 0);
    }

    #[test]
    fn unit_sizes_reduce_to_hospital_residents() {
        // x and y both want p (1 slot); p prefers y. z wants p then q.
        let inst = RawInstance::new()
            .agent("x", 1, &["p", "q"])
            .agent("y", 1, &["p"])
            .agent("z", 1, &["p", "q"])
            .hospital("p", 1, &["y", "z", "x"])
            .hospital("q", 1, &["x", "z"])
            .build()
            .unwrap();
        let all: Vec<_> = inst.agent_ids().collect();
        let caps: Vec<u32> = inst.hospital_ids().map(|h| inst.capacity(h)).collect();
        let m = uniform_gs(&inst, &all, &caps);
        assert_eq!(m, matching_from_labels(&inst, &[("x", "q"), ("y", "p")]).unwrap());
        assert!(is_stable(&inst, &m).unwrap());
    }

    #[test]
    fn invalid_partition_is_rejected() {
        let inst = fixtures::ratio_gap();
        let p = OrderedPartition::from_text(&inst, "a1 a2\na3\n").unwrap();
        assert!(matches!(solve(&inst, &p), Err(SolveError::InvalidPartition(_))));
    }

    #[test]
    fn detected_list_gives_stable_matching() {
        let inst = fixtures::gen_master_list_demo();
        let p = detect_generalized_master_list(&inst).unwrap();
        let trace = solve(&inst, &p).unwrap();
        assert!(is_stable(&inst, &trace.matching).unwrap());
        assert!(check_trace(&inst, &trace).is_empty());
    }

    #[test]
    fn corrupted_traces_are_caught() {
        let inst = fixtures::no_stable_matching();
        let trace = solve(&inst, &size_descending_partition(&inst)).unwrap();
        assert!(check_trace(&inst, &trace).is_empty());

        let mut dup = trace.clone();
        let e = dup.rounds[0].edges[0];
        dup.rounds[1].edges.push(e);
        let report = check_trace(&inst, &dup);
        assert!(report.issues.iter().any(|i| i.to_string().contains("overlap")), "{report}");

        let mut missing = trace.clone();
        let (a, _) = missing.rounds[0].matching[0];
        missing.cumulative[1].assign(a, None);
        let report = check_trace(&inst, &missing);
        assert!(report.issues.iter().any(|i| i.to_string().contains("union")), "{report}");
    }

    #[test]
    fn bucketed_scan_handles_interleaved_classes() {
        // hospital list alternates classes so the regrouping matters
        let inst = RawInstance::new()
            .agent("b1", 2, &["h"])
            .agent("s1", 1, &["h"])
            .agent("b2", 2, &["h"])
            .agent("s2", 1, &["h"])
            .agent("s3", 1, &["h"])
            .hospital("h", 4, &["s1", "b1", "s2", "b2", "s3"])
            .build()
            .unwrap();
        let trace = solve(&inst, &size_descending_partition(&inst)).unwrap();
        assert!(check_trace(&inst, &trace).is_empty());
        assert_eq!(
            trace.matching,
            matching_from_labels(&inst, &[("b1", "h"), ("b2", "h")]).unwrap()
        );
        assert!(is_occupancy_stable(&inst, &trace.matching).unwrap());
    }
}
