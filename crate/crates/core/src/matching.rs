//! Many-to-one matchings and occupancy arithmetic.

use std::fmt;

use crate::instance::{AgentId, HospitalId, Instance};

/// Assignment of agents to hospitals. Every agent has an explicit entry;
/// `None` is the unmatched value, ranked below every hospital.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Matching {
    assignment: Vec<Option<HospitalId>>,
}

impl Matching {
    pub fn empty(num_agents: usize) -> Self {
        Matching {
            assignment: vec![None; num_agents],
        }
    }

    pub fn from_pairs(num_agents: usize, pairs: impl IntoIterator<Item = (AgentId, HospitalId)>) -> Self {
        let mut m = Self::empty(num_agents);
        for (a, h) in pairs {
            m.assignment[a.index()] = Some(h);
        }
        m
    }

    pub fn from_assignment(assignment: Vec<Option<HospitalId>>) -> Self {
        Matching { assignment }
    }

    pub fn num_agents(&self) -> usize {
        self.assignment.len()
    }

    #[inline]
    pub fn hospital_of(&self, a: AgentId) -> Option<HospitalId> {
        self.assignment[a.index()]
    }

    pub fn assign(&mut self, a: AgentId, h: Option<HospitalId>) {
        self.assignment[a.index()] = h;
    }

    pub fn contains(&self, a: AgentId, h: HospitalId) -> bool {
        self.assignment.get(a.index()).copied().flatten() == Some(h)
    }

    pub fn assignment(&self) -> &[Option<HospitalId>] {
        &self.assignment
    }

    /// Matched pairs in agent order.
    pub fn pairs(&self) -> impl Iterator<Item = (AgentId, HospitalId)> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(i, h)| h.map(|h| (AgentId(i as u32), h)))
    }

    pub fn num_matched(&self) -> usize {
        self.assignment.iter().filter(|h| h.is_some()).count()
    }

    /// Agents assigned to `h`, in index order.
    pub fn assigned_to(&self, h: HospitalId) -> Vec<AgentId> {
        self.pairs().filter(|&(_, x)| x == h).map(|(a, _)| a).collect()
    }

    /// `M(h)` for every hospital at once.
    pub fn by_hospital(&self, num_hospitals: usize) -> Vec<Vec<AgentId>> {
        let mut out = vec![Vec::new(); num_hospitals];
        for (a, h) in self.pairs() {
            out[h.index()].push(a);
        }
        out
    }

    pub fn is_perfect(&self) -> bool {
        self.assignment.iter().all(Option::is_some)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown hospital index {0}")]
    UnknownHospital(u32),
    #[error("matching covers {got} agents but the instance has {expected}")]
    AgentCount { expected: usize, got: usize },
}

/// First reason a matching fails to be feasible.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    AgentCount { expected: usize, got: usize },
    NotAcceptable { agent: AgentId, hospital: HospitalId },
    OverCapacity { hospital: HospitalId, occupancy: u64, capacity: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::AgentCount { expected, got } => {
                write!(f, "matching covers {got} agents, instance has {expected}")
            }
            Violation::NotAcceptable { agent, hospital } => {
                write!(f, "agent #{} matched to unlisted hospital #{}", agent.0, hospital.0)
            }
            Violation::OverCapacity { hospital, occupancy, capacity } => {
                write!(f, "hospital #{} holds {occupancy} > capacity {capacity}", hospital.0)
            }
        }
    }
}

/// `O_M(h)`: total size of the agents matched to `h`.
pub fn occupancy(inst: &Instance, m: &Matching, h: HospitalId) -> Result<u64, ModelError> {
    if h.index() >= inst.num_hospitals() {
        return Err(ModelError::UnknownHospital(h.0));
    }
    Ok(m.pairs()
        .filter(|&(_, x)| x == h)
        .map(|(a, _)| inst.size(a) as u64)
        .sum())
}

/// Occupancy of every hospital, indexed by hospital.
pub fn occupancies(inst: &Instance, m: &Matching) -> Vec<u64> {
    let mut occ = vec![0u64; inst.num_hospitals()];
    for (a, h) in m.pairs() {
        occ[h.index()] += inst.size(a) as u64;
    }
    occ
}

/// `s(M)`: total size of matched agents.
pub fn matching_size(inst: &Instance, m: &Matching) -> u64 {
    m.pairs().map(|(a, _)| inst.size(a) as u64).sum()
}

pub fn check_feasible(inst: &Instance, m: &Matching) -> Result<(), Violation> {
    if m.num_agents() != inst.num_agents() {
        return Err(Violation::AgentCount {
            expected: inst.num_agents(),
            got: m.num_agents(),
        });
    }
    let mut occ = vec![0u64; inst.num_hospitals()];
    for (a, h) in m.pairs() {
        if h.index() >= inst.num_hospitals() || !inst.is_edge(a, h) {
            return Err(Violation::NotAcceptable { agent: a, hospital: h });
        }
        occ[h.index()] += inst.size(a) as u64;
    }
    for h in inst.hospital_ids() {
        if occ[h.index()] > inst.capacity(h) as u64 {
            return Err(Violation::OverCapacity {
                hospital: h,
                occupancy: occ[h.index()],
                capacity: inst.capacity(h),
            });
        }
    }
    Ok(())
}

pub fn is_feasible(inst: &Instance, m: &Matching) -> bool {
    check_feasible(inst, m).is_ok()
}

/// Builds a matching from label pairs.
pub fn matching_from_labels(inst: &Instance, pairs: &[(&str, &str)]) -> Option<Matching> {
    let mut m = Matching::empty(inst.num_agents());
    for (a, h) in pairs {
        m.assign(inst.agent_id(a)?, Some(inst.hospital_id(h)?));
    }
    Some(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn occupancy_of_sized_agent() {
        let inst = fixtures::no_stable_matching();
        let n = matching_from_labels(&inst, &[("a1", "h1"), ("a3", "h2")]).unwrap();
        let h2 = inst.hospital_id("h2").unwrap();
        assert_eq!(occupancy(&inst, &n, h2).unwrap(), 2);
        assert_eq!(matching_size(&inst, &n), 3);
        assert!(is_feasible(&inst, &n));
    }

    #[test]
    fn empty_matching_has_zero_occupancy() {
        let inst = fixtures::ratio_gap();
        let m = Matching::empty(inst.num_agents());
        for h in inst.hospital_ids() {
            assert_eq!(occupancy(&inst, &m, h).unwrap(), 0);
        }
        assert_eq!(matching_size(&inst, &m), 0);
    }

    #[test]
    fn two_size_two_agents_fill_capacity_four() {
        let inst = fixtures::ratio_gap();
        let m = matching_from_labels(&inst, &[("a1", "h2"), ("a2", "h1"), ("a3", "h1")]).unwrap();
        assert_eq!(occupancy(&inst, &m, inst.hospital_id("h1").unwrap()).unwrap(), 4);
        assert_eq!(matching_size(&inst, &m), 7);
    }

    #[test]
    fn over_capacity_is_infeasible() {
        let inst = fixtures::no_stable_matching();
        let m = matching_from_labels(&inst, &[("a3", "h1")]).unwrap();
        // a3 does not list h1, so acceptability fails first
        assert!(matches!(check_feasible(&inst, &m), Err(Violation::NotAcceptable { .. })));

        let inst = crate::RawInstance::new()
            .agent("a1", 2, &["h1"])
            .hospital("h1", 1, &["a1"])
            .build()
            .unwrap();
        let m = matching_from_labels(&inst, &[("a1", "h1")]).unwrap();
        assert!(matches!(check_feasible(&inst, &m), Err(Violation::OverCapacity { occupancy: 2, .. })));
    }

    #[test]
    fn unknown_hospital_is_an_error() {
        let inst = fixtures::no_stable_matching();
        let m = Matching::empty(inst.num_agents());
        assert_eq!(occupancy(&inst, &m, HospitalId(9)), Err(ModelError::UnknownHospital(9)));
    }
}
