//! Blocking-pair detection for both stability notions.
//!
//! A pair `(a, h)` outside the matching blocks when `a` prefers `h` to its
//! current hospital and `h` can take `a` after evicting some set `X` of
//! matched agents it ranks below `a`:
//!
//! * classic: `O(h) - s(X) + s(a) <= q(h)`;
//! * occupancy: additionally `s(X) <= s(a)`, so the occupancy of `h` does
//!   not drop.
//!
//! For the classic notion evicting every lower-ranked agent is the best
//! possible move, so the decision is a single sum. The occupancy notion needs
//! `s(X)` inside `[O(h) + s(a) - q(h), s(a)]`, which is a bounded subset-sum
//! over the lower-ranked agents' sizes. Reported witnesses use the smallest
//! achievable `s(X)`, ties broken by the lexicographically smallest agent
//! index set.

use serde::Serialize;

use crate::instance::{AgentId, HospitalId, Instance};
use crate::matching::{check_feasible, Matching, Violation};
use crate::subset_sum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockingKind {
    Classic,
    Occupancy,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockingWitness {
    pub agent: AgentId,
    pub hospital: HospitalId,
    /// The eviction set `X`, in index order. May be empty.
    pub displaced: Vec<AgentId>,
    pub kind: BlockingKind,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum VerifyError {
    #[error("matching is infeasible: {0}")]
    Infeasible(Violation),
    #[error("residual capacity of hospital #{hospital} is negative ({value})")]
    NegativeResidual { hospital: u32, value: i64 },
    #[error("expected {expected} residual capacities, got {got}")]
    ResidualLength { expected: usize, got: usize },
    #[error("pair (#{agent}, #{hospital}) is not an edge of the instance")]
    UnknownEdge { agent: u32, hospital: u32 },
}

/// Decides whether `(a, h)` can be accommodated at `h` and, if asked, picks
/// the eviction set. `members` is `M(h)` in index order; `occ` its total size.
fn eviction_set(
    inst: &Instance,
    members: &[AgentId],
    occ: u64,
    cap: i64,
    a: AgentId,
    h: HospitalId,
    kind: BlockingKind,
    want_witness: bool,
) -> Option<Vec<AgentId>> {
    let rank_a = inst.hospital_rank(h, a)?;
    let s_a = inst.size(a) as i64;
    let need = occ as i64 + s_a - cap;
    let lo = need.max(0) as u64;
    if lo == 0 {
        return Some(Vec::new());
    }
    let lower: Vec<AgentId> = members
        .iter()
        .copied()
        .filter(|&b| inst.hospital_rank(h, b).is_some_and(|r| r > rank_a))
        .collect();
    let sizes: Vec<u64> = lower.iter().map(|&b| inst.size(b) as u64).collect();
    let hi = match kind {
        BlockingKind::Classic => None,
        BlockingKind::Occupancy => Some(s_a as u64),
    };
    if !want_witness {
        let found = match hi {
            None => sizes.iter().sum::<u64>() >= lo,
            Some(hi) => subset_sum::exists_in_range(&sizes, lo, hi),
        };
        return found.then(Vec::new);
    }
    let (_, picked) = subset_sum::min_subset_in_range(&sizes, lo, hi)?;
    Some(picked.into_iter().map(|i| lower[i]).collect())
}

fn scan<I>(
    inst: &Instance,
    m: &Matching,
    caps: &[i64],
    candidates: I,
    kind: BlockingKind,
) -> Vec<BlockingWitness>
where
    I: IntoIterator<Item = (AgentId, HospitalId)>,
{
    let members = m.by_hospital(inst.num_hospitals());
    let occ: Vec<u64> = members
        .iter()
        .map(|ms| ms.iter().map(|&b| inst.size(b) as u64).sum())
        .collect();
    let mut out = Vec::new();
    for (a, h) in candidates {
        let current = m.hospital_of(a);
        if current == Some(h) || !inst.agent_prefers(a, h, current) {
            continue;
        }
        if let Some(displaced) =
            eviction_set(inst, &members[h.index()], occ[h.index()], caps[h.index()], a, h, kind, true)
        {
            out.push(BlockingWitness {
                agent: a,
                hospital: h,
                displaced,
                kind,
            });
        }
    }
    out
}

fn full_caps(inst: &Instance) -> Vec<i64> {
    inst.hospital_ids().map(|h| inst.capacity(h) as i64).collect()
}

fn require_feasible(inst: &Instance, m: &Matching) -> Result<(), VerifyError> {
    check_feasible(inst, m).map_err(VerifyError::Infeasible)
}

/// Every classic blocking pair, ordered by agent index and then by the
/// agent's preference order.
pub fn find_blocking_pairs(inst: &Instance, m: &Matching) -> Result<Vec<BlockingWitness>, VerifyError> {
    require_feasible(inst, m)?;
    Ok(scan(inst, m, &full_caps(inst), inst.edges(), BlockingKind::Classic))
}

/// Every occupancy-blocking pair, in the same order as [`find_blocking_pairs`].
pub fn find_occupancy_blocking_pairs(
    inst: &Instance,
    m: &Matching,
) -> Result<Vec<BlockingWitness>, VerifyError> {
    require_feasible(inst, m)?;
    Ok(scan(inst, m, &full_caps(inst), inst.edges(), BlockingKind::Occupancy))
}

pub fn is_stable(inst: &Instance, m: &Matching) -> Result<bool, VerifyError> {
    require_feasible(inst, m)?;
    Ok(!has_blocking_pair(inst, m, BlockingKind::Classic))
}

pub fn is_occupancy_stable(inst: &Instance, m: &Matching) -> Result<bool, VerifyError> {
    require_feasible(inst, m)?;
    Ok(!has_blocking_pair(inst, m, BlockingKind::Occupancy))
}

/// Every agent is matched.
pub fn is_a_perfect(inst: &Instance, m: &Matching) -> Result<bool, VerifyError> {
    require_feasible(inst, m)?;
    Ok(m.is_perfect())
}

/// Classic blocking pairs of `m` inside the given edge subset, measured
/// against `residual` instead of the hospitals' capacities. `m` must only
/// use edges of the instance and respect the residual capacities.
pub fn find_blocking_pairs_residual(
    inst: &Instance,
    m: &Matching,
    residual: &[i64],
    subgraph: &[(AgentId, HospitalId)],
) -> Result<Vec<BlockingWitness>, VerifyError> {
    if residual.len() != inst.num_hospitals() {
        return Err(VerifyError::ResidualLength {
            expected: inst.num_hospitals(),
            got: residual.len(),
        });
    }
    if let Some((h, &value)) = residual.iter().enumerate().find(|(_, &v)| v < 0) {
        return Err(VerifyError::NegativeResidual { hospital: h as u32, value });
    }
    if m.num_agents() != inst.num_agents() {
        return Err(VerifyError::Infeasible(Violation::AgentCount {
            expected: inst.num_agents(),
            got: m.num_agents(),
        }));
    }
    let mut occ = vec![0i64; inst.num_hospitals()];
    for (a, h) in m.pairs() {
        if !inst.is_edge(a, h) {
            return Err(VerifyError::Infeasible(Violation::NotAcceptable { agent: a, hospital: h }));
        }
        occ[h.index()] += inst.size(a) as i64;
    }
    for h in inst.hospital_ids() {
        if occ[h.index()] > residual[h.index()] {
            return Err(VerifyError::Infeasible(Violation::OverCapacity {
                hospital: h,
                occupancy: occ[h.index()] as u64,
                capacity: residual[h.index()] as u32,
            }));
        }
    }
    let mut edges = Vec::with_capacity(subgraph.len());
    for &(a, h) in subgraph {
        let rank = inst.agent_rank(a, h).ok_or(VerifyError::UnknownEdge { agent: a.0, hospital: h.0 })?;
        edges.push((a, rank, h));
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(scan(
        inst,
        m,
        residual,
        edges.into_iter().map(|(a, _, h)| (a, h)),
        BlockingKind::Classic,
    ))
}

/// Fast existence check without witnesses. Assumes `m` is feasible.
pub fn has_blocking_pair(inst: &Instance, m: &Matching, kind: BlockingKind) -> bool {
    BlockingScanner::new(inst).has_blocking_pair(inst, m, kind)
}

/// Reusable buffers for repeated stability checks on one instance.
#[derive(Clone, Debug)]
pub struct BlockingScanner {
    members: Vec<Vec<AgentId>>,
    occ: Vec<u64>,
}

impl BlockingScanner {
    pub fn new(inst: &Instance) -> Self {
        BlockingScanner {
            members: vec![Vec::new(); inst.num_hospitals()],
            occ: vec![0; inst.num_hospitals()],
        }
    }

    fn load(&mut self, inst: &Instance, m: &Matching) {
        for ms in &mut self.members {
            ms.clear();
        }
        self.occ.iter_mut().for_each(|o| *o = 0);
        for (a, h) in m.pairs() {
            self.members[h.index()].push(a);
            self.occ[h.index()] += inst.size(a) as u64;
        }
    }

    pub fn has_blocking_pair(&mut self, inst: &Instance, m: &Matching, kind: BlockingKind) -> bool {
        self.load(inst, m);
        inst.agent_ids().any(|a| self.agent_blocks(inst, m, a, kind, |_| true))
    }

    /// Like [`Self::has_blocking_pair`] but only over pairs whose hospital
    /// passes `hospital_filter`.
    pub fn has_blocking_pair_at(
        &mut self,
        inst: &Instance,
        m: &Matching,
        kind: BlockingKind,
        hospital_filter: impl Fn(HospitalId) -> bool + Copy,
    ) -> bool {
        self.load(inst, m);
        inst.agent_ids().any(|a| self.agent_blocks(inst, m, a, kind, hospital_filter))
    }

    fn agent_blocks(
        &self,
        inst: &Instance,
        m: &Matching,
        a: AgentId,
        kind: BlockingKind,
        hospital_filter: impl Fn(HospitalId) -> bool,
    ) -> bool {
        let current = m.hospital_of(a);
        let stop = current.and_then(|c| inst.agent_rank(a, c)).map_or(usize::MAX, |r| r as usize);
        inst.agent_prefs(a)
            .iter()
            .take(stop)
            .filter(|&&h| hospital_filter(h))
            .any(|&h| {
                eviction_set(
                    inst,
                    &self.members[h.index()],
                    self.occ[h.index()],
                    inst.capacity(h) as i64,
                    a,
                    h,
                    kind,
                    false,
                )
                .is_some()
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::matching::matching_from_labels;
    use crate::RawInstance;

    fn pairs_of(inst: &Instance, ws: &[BlockingWitness]) -> Vec<(String, String)> {
        ws.iter()
            .map(|w| (inst.agent_label(w.agent).to_string(), inst.hospital_label(w.hospital).to_string()))
            .collect()
    }

    fn has(inst: &Instance, ws: &[BlockingWitness], a: &str, h: &str) -> bool {
        pairs_of(inst, ws).contains(&(a.to_string(), h.to_string()))
    }

    #[test]
    fn unstable_instance_candidates_are_blocked() {
        let inst = fixtures::no_stable_matching();
        let m = matching_from_labels(&inst, &[("a1", "h2"), ("a2", "h2")]).unwrap();
        assert!(has(&inst, &find_blocking_pairs(&inst, &m).unwrap(), "a2", "h1"));
        let m = matching_from_labels(&inst, &[("a1", "h2"), ("a2", "h1")]).unwrap();
        let ws = find_blocking_pairs(&inst, &m).unwrap();
        assert!(has(&inst, &ws, "a3", "h2"));
        let w = ws.iter().find(|w| inst.agent_label(w.agent) == "a3").unwrap();
        assert_eq!(w.displaced, vec![inst.agent_id("a1").unwrap()]);
    }

    #[test]
    fn everyone_at_first_choice_is_stable() {
        let inst = RawInstance::new()
            .agent("x", 2, &["p", "q"])
            .agent("y", 1, &["q"])
            .hospital("p", 2, &["x"])
            .hospital("q", 3, &["y", "x"])
            .build()
            .unwrap();
        let m = matching_from_labels(&inst, &[("x", "p"), ("y", "q")]).unwrap();
        assert!(find_blocking_pairs(&inst, &m).unwrap().is_empty());
        assert!(find_occupancy_blocking_pairs(&inst, &m).unwrap().is_empty());
    }

    #[test]
    fn occupancy_stable_but_not_stable() {
        let inst = fixtures::no_stable_matching();
        let n = matching_from_labels(&inst, &[("a1", "h1"), ("a3", "h2")]).unwrap();
        let occ = find_occupancy_blocking_pairs(&inst, &n).unwrap();
        assert!(occ.is_empty());
        let classic = find_blocking_pairs(&inst, &n).unwrap();
        // (a2,h2) blocks classically by evicting a3, but s(a3) > s(a2)
        assert!(has(&inst, &classic, "a2", "h2"));
        assert!(is_occupancy_stable(&inst, &n).unwrap());
        assert!(!is_stable(&inst, &n).unwrap());
    }

    #[test]
    fn size_three_agent_alone_is_occupancy_stable() {
        let inst = fixtures::ratio_gap();
        let m = matching_from_labels(&inst, &[("a1", "h1")]).unwrap();
        assert!(find_occupancy_blocking_pairs(&inst, &m).unwrap().is_empty());
        let best = matching_from_labels(&inst, &[("a1", "h2"), ("a2", "h1"), ("a3", "h1")]).unwrap();
        assert!(is_occupancy_stable(&inst, &best).unwrap());
        assert!(is_a_perfect(&inst, &best).unwrap());
    }

    #[test]
    fn free_room_is_reported_by_both_detectors() {
        let inst = RawInstance::new()
            .agent("x", 2, &["p"])
            .hospital("p", 5, &["x"])
            .build()
            .unwrap();
        let m = Matching::empty(1);
        let c = find_blocking_pairs(&inst, &m).unwrap();
        let o = find_occupancy_blocking_pairs(&inst, &m).unwrap();
        assert_eq!(pairs_of(&inst, &c), pairs_of(&inst, &o));
        assert!(c[0].displaced.is_empty() && o[0].displaced.is_empty());
    }

    #[test]
    fn empty_instance_is_trivially_stable() {
        let inst = Instance::empty();
        let m = Matching::empty(0);
        assert!(is_stable(&inst, &m).unwrap());
        assert!(is_occupancy_stable(&inst, &m).unwrap());
        assert!(is_a_perfect(&inst, &m).unwrap());
    }

    #[test]
    fn infeasible_matching_is_an_error() {
        let inst = fixtures::ratio_gap();
        let m = matching_from_labels(&inst, &[("a1", "h1"), ("a2", "h1")]).unwrap();
        assert!(matches!(find_blocking_pairs(&inst, &m), Err(VerifyError::Infeasible(_))));
    }

    #[test]
    fn residual_round_check() {
        let inst = fixtures::no_stable_matching();
        let a1 = inst.agent_id("a1").unwrap();
        let a2 = inst.agent_id("a2").unwrap();
        let h1 = inst.hospital_id("h1").unwrap();
        let round: Vec<_> = inst
            .edges()
            .filter(|&(a, _)| a == a1 || a == a2)
            .collect();
        let m2 = Matching::from_pairs(3, [(a1, h1)]);
        assert!(find_blocking_pairs_residual(&inst, &m2, &[1, 0], &round).unwrap().is_empty());

        assert!(find_blocking_pairs_residual(&inst, &m2, &[1, 0], &[]).unwrap().is_empty());
        assert!(matches!(
            find_blocking_pairs_residual(&inst, &m2, &[1, -1], &round),
            Err(VerifyError::NegativeResidual { .. })
        ));
    }

    #[test]
    fn residual_with_full_parameters_equals_plain() {
        let inst = fixtures::no_stable_matching();
        let all: Vec<_> = inst.edges().collect();
        for pairs in [
            vec![("a1", "h2"), ("a2", "h2")],
            vec![("a1", "h2"), ("a2", "h1")],
            vec![("a1", "h1"), ("a3", "h2")],
            vec![],
        ] {
            let m = matching_from_labels(&inst, &pairs).unwrap();
            assert_eq!(
                find_blocking_pairs_residual(&inst, &m, &[1, 2], &all).unwrap(),
                find_blocking_pairs(&inst, &m).unwrap()
            );
        }
    }

    #[test]
    fn witness_prefers_smallest_eviction() {
        // h holds b (2) and c (1), both below x (size 1); q = 3, so x needs
        // one unit freed: evicting c alone suffices.
        let inst = RawInstance::new()
            .agent("x", 1, &["h"])
            .agent("b", 2, &["h"])
            .agent("c", 1, &["h"])
            .hospital("h", 3, &["x", "b", "c"])
            .build()
            .unwrap();
        let m = matching_from_labels(&inst, &[("b", "h"), ("c", "h")]).unwrap();
        let ws = find_occupancy_blocking_pairs(&inst, &m).unwrap();
        assert_eq!(ws.len(), 1);
        assert_eq!(ws[0].displaced, vec![inst.agent_id("c").unwrap()]);
        let ws = find_blocking_pairs(&inst, &m).unwrap();
        assert_eq!(ws[0].displaced, vec![inst.agent_id("c").unwrap()]);
    }
}
