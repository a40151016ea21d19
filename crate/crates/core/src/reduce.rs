//! Gadget reductions from the restricted SMTI form to HRS.
//!
//! Both reductions turn woman `w_i` into hospital `W<i>` and replace every
//! man by a gadget. In a woman's list, a strict man `m_s` becomes his agent
//! `S<s>`; a tied man `m_j` with tie `(w_a, w_b)`, `a < b`, becomes
//! `A<j>_1` in `W<a>`'s list and `A<j>_2` in `W<b>`'s list.
//!
//! * [`reduce_occ`]: an SMTI instance has a complete stable matching iff the
//!   result has an agent-perfect occupancy-stable matching. Sizes and
//!   capacities are at most 2.
//! * [`reduce_stable`]: an SMTI instance has a complete stable matching iff
//!   the result has a stable matching. Every agent of size 3 lists exactly
//!   one hospital.
//!
//! Indices in labels are 1-based man and woman positions.

use serde::Serialize;

use crate::instance::{AgentId, HospitalId, Instance, RawInstance, ValidationReport};
use crate::matching::{Matching, Violation};
use crate::smti::{is_weakly_stable, validate_csmti, ManPrefs, SmtiInstance, SmtiMatching};
use crate::verify::{find_blocking_pairs, find_occupancy_blocking_pairs, is_a_perfect};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// Agent-perfect occupancy-stable matchings.
    Occ,
    /// Stable matchings.
    Stable,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TiedGadget {
    pub man: usize,
    /// `(a, b)` with `a < b`.
    pub women: (usize, usize),
    /// `a^1 ..`: four agents for the occupancy gadget, six for the stability
    /// gadget.
    pub agents: Vec<AgentId>,
    /// `h^1, h^2`.
    pub hospitals: [HospitalId; 2],
    /// Occupancy gadget: `a_alpha^1, a_alpha^2`. Stability gadget:
    /// `q^1_1, q^1_2, q^1_3, q^2_1, q^2_2, q^2_3`.
    pub aux_agents: Vec<AgentId>,
    /// Occupancy gadget: `h_alpha^1, h_alpha^2`. Stability gadget:
    /// `p^1_1, p^1_2, p^1_3, p^2_1, p^2_2, p^2_3`.
    pub aux_hospitals: Vec<HospitalId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrictGadget {
    pub man: usize,
    pub agent: AgentId,
    /// Occupancy gadget: `a_beta`. Stability gadget: `q_1, q_2, q_3`.
    pub aux_agents: Vec<AgentId>,
    /// Occupancy gadget: `h_beta`. Stability gadget: `p_1, p_2, p_3`.
    pub aux_hospitals: Vec<HospitalId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Gadget {
    Tied(TiedGadget),
    Strict(StrictGadget),
}

/// Where every man and woman of the source instance went.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GadgetIndex {
    pub target: Target,
    /// Woman index to her hospital.
    pub women: Vec<HospitalId>,
    /// One gadget per man, in man order.
    pub men: Vec<Gadget>,
}

impl GadgetIndex {
    fn woman_of(&self, h: HospitalId) -> Option<usize> {
        self.women.iter().position(|&x| x == h)
    }

    /// JSON description with labels, for `reduce --index`.
    pub fn to_json(&self, smti: &SmtiInstance, inst: &Instance) -> serde_json::Value {
        use serde_json::json;
        let a = |v: &[AgentId]| v.iter().map(|&x| inst.agent_label(x).to_string()).collect::<Vec<_>>();
        let h = |v: &[HospitalId]| v.iter().map(|&x| inst.hospital_label(x).to_string()).collect::<Vec<_>>();
        let women: serde_json::Map<String, serde_json::Value> = self
            .women
            .iter()
            .enumerate()
            .map(|(i, &x)| (smti.women[i].label.clone(), json!(inst.hospital_label(x))))
            .collect();
        let men: Vec<serde_json::Value> = self
            .men
            .iter()
            .map(|g| match g {
                Gadget::Tied(t) => json!({
                    "man": smti.men[t.man].label,
                    "kind": "tied",
                    "women": [smti.women[t.women.0].label, smti.women[t.women.1].label],
                    "agents": a(&t.agents),
                    "hospitals": h(&t.hospitals),
                    "aux_agents": a(&t.aux_agents),
                    "aux_hospitals": h(&t.aux_hospitals),
                }),
                Gadget::Strict(s) => json!({
                    "man": smti.men[s.man].label,
                    "kind": "strict",
                    "agent": inst.agent_label(s.agent),
                    "aux_agents": a(&s.aux_agents),
                    "aux_hospitals": h(&s.aux_hospitals),
                }),
            })
            .collect();
        json!({ "target": self.target, "women": women, "men": men })
    }
}

#[derive(Clone, Debug, thiserror::Error)]
pub enum ReduceError {
    #[error("not in the restricted SMTI form:\n{0}")]
    NotRestricted(ValidationReport),
    #[error("SMTI matching is not complete")]
    Incomplete,
    #[error("SMTI matching is not weakly stable: ({0}, {1}) blocks")]
    SmtiUnstable(String, String),
    #[error("SMTI matching is invalid: {0}")]
    SmtiInvalid(String),
    #[error("matching is infeasible: {0}")]
    Infeasible(Violation),
    #[error("lifted matching rejected by the verifier: {0}")]
    LiftRejected(String),
    #[error("matching does not satisfy the projection precondition: {0}")]
    NotProjectable(String),
    #[error("gadget index does not match the instance: {0}")]
    IndexMismatch(String),
}

/// Tie `(a, b)` with `a < b`.
fn tie_of(prefs: &ManPrefs) -> Option<(usize, usize)> {
    match prefs {
        ManPrefs::Tie(w) => Some((w[0].min(w[1]), w[0].max(w[1]))),
        ManPrefs::Strict(_) => None,
    }
}

/// Label of the agent that stands for man `m` in woman `w`'s hospital list.
fn proxy_label(smti: &SmtiInstance, m: usize, w: usize) -> String {
    match tie_of(&smti.men[m].prefs) {
        Some((a, _)) if a == w => format!("A{}_1", m + 1),
        Some(_) => format!("A{}_2", m + 1),
        None => format!("S{}", m + 1),
    }
}

fn woman_label(i: usize) -> String {
    format!("W{}", i + 1)
}

fn woman_hospitals(raw: &mut RawInstance, smti: &SmtiInstance, capacity: i64) {
    for (i, w) in smti.women.iter().enumerate() {
        let prefs = w.prefs.iter().map(|&m| proxy_label(smti, m, i)).collect();
        raw.push_hospital(&woman_label(i), capacity, prefs);
    }
}

fn owned(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn check_form(smti: &SmtiInstance) -> Result<(), ReduceError> {
    let report = validate_csmti(smti);
    if report.is_empty() {
        Ok(())
    } else {
        Err(ReduceError::NotRestricted(report))
    }
}

fn ids(inst: &Instance, agents: &[String], hospitals: &[String]) -> (Vec<AgentId>, Vec<HospitalId>) {
    (
        agents.iter().map(|l| inst.agent_id(l).expect("gadget agent")).collect(),
        hospitals.iter().map(|l| inst.hospital_id(l).expect("gadget hospital")).collect(),
    )
}

/// Reduction to agent-perfect occupancy-stable matchings.
pub fn reduce_occ(smti: &SmtiInstance) -> Result<(Instance, GadgetIndex), ReduceError> {
    check_form(smti)?;
    let mut raw = RawInstance::default();
    woman_hospitals(&mut raw, smti, 2);
    let mut layout = Vec::new();
    for (j, man) in smti.men.iter().enumerate() {
        let n = j + 1;
        match tie_of(&man.prefs) {
            Some((a, b)) => {
                let ag: Vec<String> = (1..=4).map(|k| format!("A{n}_{k}")).collect();
                let al: Vec<String> = (1..=2).map(|k| format!("AL{n}_{k}")).collect();
                let hs: Vec<String> = (1..=2).map(|k| format!("H{n}_{k}")).collect();
                let hl: Vec<String> = (1..=2).map(|k| format!("HL{n}_{k}")).collect();
                let (wa, wb) = (woman_label(a), woman_label(b));
                raw.push_agent(&ag[0], 2, owned(&[&hs[0], &wa, &hl[0]]));
                raw.push_agent(&ag[1], 2, owned(&[&hs[1], &wb, &hl[1]]));
                raw.push_agent(&ag[2], 1, owned(&[&hs[0], &hs[1]]));
                raw.push_agent(&ag[3], 1, owned(&[&hs[1], &hs[0]]));
                raw.push_agent(&al[0], 1, owned(&[&hl[0]]));
                raw.push_agent(&al[1], 1, owned(&[&hl[1]]));
                raw.push_hospital(&hs[0], 2, owned(&[&ag[3], &ag[0], &ag[2]]));
                raw.push_hospital(&hs[1], 2, owned(&[&ag[2], &ag[1], &ag[3]]));
                raw.push_hospital(&hl[0], 2, owned(&[&al[0], &ag[0]]));
                raw.push_hospital(&hl[1], 2, owned(&[&al[1], &ag[1]]));
                layout.push((j, Some((a, b)), ag, hs, al, hl));
            }
            None => {
                let s = format!("S{n}");
                let beta = format!("B{n}");
                let hb = format!("HB{n}");
                let mut prefs: Vec<String> = man.prefs.women().iter().map(|&w| woman_label(w)).collect();
                prefs.push(hb.clone());
                raw.push_agent(&s, 2, prefs);
                raw.push_agent(&beta, 1, vec![hb.clone()]);
                raw.push_hospital(&hb, 2, vec![beta.clone(), s.clone()]);
                layout.push((j, None, vec![s], Vec::new(), vec![beta], vec![hb]));
            }
        }
    }
    let inst = raw.build().expect("occupancy reduction builds a valid instance");
    let index = build_index(&inst, smti, Target::Occ, layout);
    assert_occ_bounds(&inst);
    Ok((inst, index))
}

type Layout = Vec<(usize, Option<(usize, usize)>, Vec<String>, Vec<String>, Vec<String>, Vec<String>)>;

fn build_index(inst: &Instance, smti: &SmtiInstance, target: Target, layout: Layout) -> GadgetIndex {
    let women = (0..smti.women.len())
        .map(|i| inst.hospital_id(&woman_label(i)).expect("woman hospital"))
        .collect();
    let men = layout
        .into_iter()
        .map(|(man, tie, agents, hospitals, aux_a, aux_h)| {
            let (agents, hospitals) = ids(inst, &agents, &hospitals);
            let (aux_agents, aux_hospitals) = ids(inst, &aux_a, &aux_h);
            match tie {
                Some(women) => Gadget::Tied(TiedGadget {
                    man,
                    women,
                    agents,
                    hospitals: [hospitals[0], hospitals[1]],
                    aux_agents,
                    aux_hospitals,
                }),
                None => Gadget::Strict(StrictGadget {
                    man,
                    agent: agents[0],
                    aux_agents,
                    aux_hospitals,
                }),
            }
        })
        .collect();
    GadgetIndex { target, women, men }
}

/// Sizes and capacities at most 2, lists at most 4 long.
pub fn occ_bounds_hold(inst: &Instance) -> bool {
    inst.agent_ids()
        .all(|a| inst.size(a) <= 2 && inst.agent_prefs(a).len() <= 4)
        && inst
            .hospital_ids()
            .all(|h| inst.capacity(h) <= 2 && inst.hospital_prefs(h).len() <= 4)
}

fn assert_occ_bounds(inst: &Instance) {
    assert!(occ_bounds_hold(inst), "occupancy reduction exceeded its size/capacity/list bounds");
}

/// Every agent larger than 1 lists exactly one hospital.
pub fn non_unit_degree_one(inst: &Instance) -> bool {
    inst.agent_ids()
        .filter(|&a| inst.size(a) > 1)
        .all(|a| inst.agent_prefs(a).len() == 1)
}

/// The `q`/`p` chain attached to agent `top` through `P..._1`.
fn push_chain(raw: &mut RawInstance, prefix: &str, top: &str) -> (Vec<String>, Vec<String>) {
    let q: Vec<String> = (1..=3).map(|t| format!("Q{prefix}_{t}")).collect();
    let p: Vec<String> = (1..=3).map(|t| format!("P{prefix}_{t}")).collect();
    raw.push_agent(&q[0], 1, owned(&[&p[0], &p[1], &p[2]]));
    raw.push_agent(&q[1], 1, owned(&[&p[2], &p[1]]));
    raw.push_agent(&q[2], 3, owned(&[&p[2]]));
    raw.push_hospital(&p[0], 1, owned(&[top, &q[0]]));
    raw.push_hospital(&p[1], 1, owned(&[&q[1], &q[0]]));
    raw.push_hospital(&p[2], 3, owned(&[&q[0], &q[2], &q[1]]));
    (q, p)
}

/// Reduction to stable matchings.
pub fn reduce_stable(smti: &SmtiInstance) -> Result<(Instance, GadgetIndex), ReduceError> {
    check_form(smti)?;
    let mut raw = RawInstance::default();
    woman_hospitals(&mut raw, smti, 1);
    let mut layout = Vec::new();
    for (j, man) in smti.men.iter().enumerate() {
        let n = j + 1;
        match tie_of(&man.prefs) {
            Some((a, b)) => {
                let ag: Vec<String> = (1..=6).map(|k| format!("A{n}_{k}")).collect();
                let hs: Vec<String> = (1..=2).map(|k| format!("H{n}_{k}")).collect();
                let p1 = |k: usize| format!("P{n}_{k}_1");
                let (wa, wb) = (woman_label(a), woman_label(b));
                raw.push_agent(&ag[0], 1, owned(&[&hs[0], &wa, &p1(1)]));
                raw.push_agent(&ag[1], 1, owned(&[&hs[1], &wb, &p1(2)]));
                raw.push_agent(&ag[2], 1, owned(&[&hs[1], &hs[0]]));
                raw.push_agent(&ag[3], 1, owned(&[&hs[0], &hs[1]]));
                raw.push_agent(&ag[4], 3, owned(&[&hs[0]]));
                raw.push_agent(&ag[5], 3, owned(&[&hs[1]]));
                raw.push_hospital(&hs[0], 3, owned(&[&ag[2], &ag[4], &ag[0], &ag[3]]));
                raw.push_hospital(&hs[1], 3, owned(&[&ag[3], &ag[5], &ag[1], &ag[2]]));
                let mut aux_a = Vec::new();
                let mut aux_h = Vec::new();
                for k in 1..=2 {
                    let (q, p) = push_chain(&mut raw, &format!("{n}_{k}"), &ag[k - 1]);
                    aux_a.extend(q);
                    aux_h.extend(p);
                }
                layout.push((j, Some((a, b)), ag, hs, aux_a, aux_h));
            }
            None => {
                let s = format!("S{n}");
                let mut prefs: Vec<String> = man.prefs.women().iter().map(|&w| woman_label(w)).collect();
                prefs.push(format!("P{n}_1"));
                raw.push_agent(&s, 1, prefs);
                let (q, p) = push_chain(&mut raw, &n.to_string(), &s);
                layout.push((j, None, vec![s], Vec::new(), q, p));
            }
        }
    }
    let inst = raw.build().expect("stability reduction builds a valid instance");
    assert!(non_unit_degree_one(&inst), "stability reduction gave a non-unit agent several hospitals");
    let index = build_index(&inst, smti, Target::Stable, layout);
    Ok((inst, index))
}

fn check_smti_matching(smti: &SmtiInstance, m: &SmtiMatching) -> Result<(), ReduceError> {
    if !m.is_complete(smti) {
        return Err(ReduceError::Incomplete);
    }
    let blocking = crate::smti::weakly_blocking_pairs(smti, m).map_err(|e| ReduceError::SmtiInvalid(e.to_string()))?;
    if let Some(&(man, w)) = blocking.first() {
        return Err(ReduceError::SmtiUnstable(
            smti.men[man].label.clone(),
            smti.women[w].label.clone(),
        ));
    }
    Ok(())
}

fn check_index(inst: &Instance, smti: &SmtiInstance, index: &GadgetIndex, target: Target) -> Result<(), ReduceError> {
    if index.target != target {
        return Err(ReduceError::IndexMismatch(format!("index built for {:?}", index.target)));
    }
    if index.men.len() != smti.men.len() || index.women.len() != smti.women.len() {
        return Err(ReduceError::IndexMismatch("man or woman count differs".into()));
    }
    let bad_agent = |a: &AgentId| a.index() >= inst.num_agents();
    let bad_hospital = |h: &HospitalId| h.index() >= inst.num_hospitals();
    let ok = index.women.iter().all(|h| !bad_hospital(h))
        && index.men.iter().all(|g| match g {
            Gadget::Tied(t) => {
                !t.agents.iter().any(bad_agent)
                    && !t.aux_agents.iter().any(bad_agent)
                    && !t.hospitals.iter().any(bad_hospital)
                    && !t.aux_hospitals.iter().any(bad_hospital)
            }
            Gadget::Strict(s) => {
                !bad_agent(&s.agent) && !s.aux_agents.iter().any(bad_agent) && !s.aux_hospitals.iter().any(bad_hospital)
            }
        });
    if ok {
        Ok(())
    } else {
        Err(ReduceError::IndexMismatch("id out of range".into()))
    }
}

/// `T^a` or `T^b` of the occupancy gadget.
pub fn occ_tied_pairs(index: &GadgetIndex, g: &TiedGadget, to_first: bool) -> Vec<(AgentId, HospitalId)> {
    let a = &g.agents;
    let [h1, h2] = g.hospitals;
    let (wa, wb) = (index.women[g.women.0], index.women[g.women.1]);
    let mut out = if to_first {
        vec![(a[0], wa), (a[1], h2), (a[2], h1), (a[3], h1)]
    } else {
        vec![(a[0], h1), (a[1], wb), (a[2], h2), (a[3], h2)]
    };
    out.push((g.aux_agents[0], g.aux_hospitals[0]));
    out.push((g.aux_agents[1], g.aux_hospitals[1]));
    out
}

/// `T^a` or `T^b` of the stability gadget.
pub fn stable_tied_pairs(index: &GadgetIndex, g: &TiedGadget, to_first: bool) -> Vec<(AgentId, HospitalId)> {
    let a = &g.agents;
    let [h1, h2] = g.hospitals;
    let (wa, wb) = (index.women[g.women.0], index.women[g.women.1]);
    if to_first {
        vec![(a[0], wa), (a[1], h2), (a[2], h2), (a[3], h2), (a[4], h1)]
    } else {
        vec![(a[0], h1), (a[1], wb), (a[2], h1), (a[3], h1), (a[5], h2)]
    }
}

/// The forced `S` pairs `(q_t, p_t)` of every chain in the stability gadget.
pub fn forced_pairs(g: &Gadget) -> Vec<(AgentId, HospitalId)> {
    let (q, p) = match g {
        Gadget::Tied(t) => (&t.aux_agents, &t.aux_hospitals),
        Gadget::Strict(s) => (&s.aux_agents, &s.aux_hospitals),
    };
    q.iter().copied().zip(p.iter().copied()).collect()
}

fn lift(
    inst: &Instance,
    smti: &SmtiInstance,
    m: &SmtiMatching,
    index: &GadgetIndex,
    target: Target,
) -> Result<Matching, ReduceError> {
    check_index(inst, smti, index, target)?;
    check_smti_matching(smti, m)?;
    let mut out = Matching::empty(inst.num_agents());
    for g in &index.men {
        let pairs = match g {
            Gadget::Tied(t) => {
                let w = m.partner[t.man].expect("complete");
                let to_first = w == t.women.0;
                match target {
                    Target::Occ => occ_tied_pairs(index, t, to_first),
                    Target::Stable => {
                        let mut v = stable_tied_pairs(index, t, to_first);
                        v.extend(forced_pairs(g));
                        v
                    }
                }
            }
            Gadget::Strict(s) => {
                let w = m.partner[s.man].expect("complete");
                let mut v = vec![(s.agent, index.women[w])];
                match target {
                    Target::Occ => v.push((s.aux_agents[0], s.aux_hospitals[0])),
                    Target::Stable => v.extend(forced_pairs(g)),
                }
                v
            }
        };
        for (a, h) in pairs {
            out.assign(a, Some(h));
        }
    }
    Ok(out)
}

fn describe_witness(inst: &Instance, w: &crate::verify::BlockingWitness) -> String {
    format!("({}, {}) blocks", inst.agent_label(w.agent), inst.hospital_label(w.hospital))
}

/// Builds the agent-perfect occupancy-stable matching that corresponds to a
/// complete stable SMTI matching, and checks it with the verifier.
pub fn lift_occ(inst: &Instance, smti: &SmtiInstance, m: &SmtiMatching, index: &GadgetIndex) -> Result<Matching, ReduceError> {
    let out = lift(inst, smti, m, index, Target::Occ)?;
    let ws = find_occupancy_blocking_pairs(inst, &out).map_err(|e| ReduceError::LiftRejected(e.to_string()))?;
    if let Some(w) = ws.first() {
        return Err(ReduceError::LiftRejected(describe_witness(inst, w)));
    }
    if !is_a_perfect(inst, &out).map_err(|e| ReduceError::LiftRejected(e.to_string()))? {
        return Err(ReduceError::LiftRejected("some agent is unmatched".into()));
    }
    Ok(out)
}

/// Builds the stable matching that corresponds to a complete stable SMTI
/// matching, and checks it with the verifier.
pub fn lift_stable(inst: &Instance, smti: &SmtiInstance, m: &SmtiMatching, index: &GadgetIndex) -> Result<Matching, ReduceError> {
    let out = lift(inst, smti, m, index, Target::Stable)?;
    let ws = find_blocking_pairs(inst, &out).map_err(|e| ReduceError::LiftRejected(e.to_string()))?;
    if let Some(w) = ws.first() {
        return Err(ReduceError::LiftRejected(describe_witness(inst, w)));
    }
    Ok(out)
}

fn finish_projection(smti: &SmtiInstance, out: SmtiMatching) -> Result<SmtiMatching, ReduceError> {
    if !out.is_complete(smti) {
        return Err(ReduceError::NotProjectable("projection is not complete".into()));
    }
    match is_weakly_stable(smti, &out) {
        Ok(true) => Ok(out),
        Ok(false) => Err(ReduceError::NotProjectable("projection is not weakly stable".into())),
        Err(e) => Err(ReduceError::NotProjectable(e.to_string())),
    }
}

/// Reads a complete stable SMTI matching off an agent-perfect
/// occupancy-stable matching of the reduced instance.
pub fn project_occ(inst: &Instance, smti: &SmtiInstance, m: &Matching, index: &GadgetIndex) -> Result<SmtiMatching, ReduceError> {
    check_index(inst, smti, index, Target::Occ)?;
    let ws = find_occupancy_blocking_pairs(inst, m).map_err(|e| match e {
        crate::verify::VerifyError::Infeasible(v) => ReduceError::Infeasible(v),
        other => ReduceError::NotProjectable(other.to_string()),
    })?;
    if let Some(w) = ws.first() {
        return Err(ReduceError::NotProjectable(format!("not occupancy-stable: {}", describe_witness(inst, w))));
    }
    if !m.is_perfect() {
        return Err(ReduceError::NotProjectable("not agent-perfect".into()));
    }
    let mut out = SmtiMatching::empty(smti.men.len());
    for g in &index.men {
        match g {
            Gadget::Tied(t) => {
                let (wa, wb) = (index.women[t.women.0], index.women[t.women.1]);
                if m.contains(t.agents[0], wa) {
                    out.partner[t.man] = Some(t.women.0);
                } else if m.contains(t.agents[1], wb) {
                    out.partner[t.man] = Some(t.women.1);
                }
            }
            Gadget::Strict(s) => {
                out.partner[s.man] = m.hospital_of(s.agent).and_then(|h| index.woman_of(h));
            }
        }
    }
    finish_projection(smti, out)
}

/// Reads a complete stable SMTI matching off a stable matching of the
/// reduced instance.
pub fn project_stable(inst: &Instance, smti: &SmtiInstance, m: &Matching, index: &GadgetIndex) -> Result<SmtiMatching, ReduceError> {
    check_index(inst, smti, index, Target::Stable)?;
    let ws = find_blocking_pairs(inst, m).map_err(|e| match e {
        crate::verify::VerifyError::Infeasible(v) => ReduceError::Infeasible(v),
        other => ReduceError::NotProjectable(other.to_string()),
    })?;
    if let Some(w) = ws.first() {
        return Err(ReduceError::NotProjectable(format!("not stable: {}", describe_witness(inst, w))));
    }
    let mut out = SmtiMatching::empty(smti.men.len());
    for g in &index.men {
        match g {
            Gadget::Tied(t) => {
                let has = |pairs: Vec<(AgentId, HospitalId)>| pairs.iter().all(|&(a, h)| m.contains(a, h));
                if has(stable_tied_pairs(index, t, true)) {
                    out.partner[t.man] = Some(t.women.0);
                } else if has(stable_tied_pairs(index, t, false)) {
                    out.partner[t.man] = Some(t.women.1);
                } else {
                    return Err(ReduceError::NotProjectable(format!(
                        "gadget of {} contains neither T set",
                        smti.men[t.man].label
                    )));
                }
            }
            Gadget::Strict(s) => {
                out.partner[s.man] = m.hospital_of(s.agent).and_then(|h| index.woman_of(h));
            }
        }
    }
    finish_projection(smti, out)
}

/// The `q`/`p` chain of one gadget with `p_1` removed, as its own instance:
/// three agents of sizes 1, 1, 3 and two hospitals of capacities 1 and 3.
pub fn chain_without_top(inst: &Instance, g: &Gadget, chain: usize) -> Instance {
    let (q, p) = match g {
        Gadget::Tied(t) => (&t.aux_agents[3 * chain..3 * chain + 3], &t.aux_hospitals[3 * chain..3 * chain + 3]),
        Gadget::Strict(s) => (&s.aux_agents[..], &s.aux_hospitals[..]),
    };
    inst.induced(q, &p[1..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::matching_from_labels;
    use crate::smti::{parse_smti, smti_complete_stable};
    use crate::verify::{is_occupancy_stable, is_stable};

    fn two_tied() -> SmtiInstance {
        parse_smti("m x : ( u v )\nm y : ( u v )\nw u : x y\nw v : y x\n").unwrap()
    }

    fn mixed() -> SmtiInstance {
        parse_smti(
            "m m1 : ( w2 w1 )\nm m2 : w1 w2 w3\nm m3 : w3 w1 w2\n\
             w w1 : m2 m1 m3\nw w2 : m1 m2 m3\nw w3 : m3 m2\n",
        )
        .unwrap()
    }

    #[test]
    fn occ_counts() {
        let (inst, index) = reduce_occ(&two_tied()).unwrap();
        assert_eq!(inst.num_agents(), 12);
        assert_eq!(inst.num_hospitals(), 10);
        assert_eq!(index.men.len(), 2);
        let strict = parse_smti(
            "m a : x y z\nm b : y z x\nm c : z x y\nw x : a b c\nw y : b c a\nw z : c a b\n",
        )
        .unwrap();
        let (inst, _) = reduce_occ(&strict).unwrap();
        assert_eq!((inst.num_agents(), inst.num_hospitals()), (6, 6));
        let (inst, _) = reduce_stable(&strict).unwrap();
        // four agents and three hospitals per strict man, plus the woman hospitals
        assert_eq!((inst.num_agents(), inst.num_hospitals()), (12, 12));
    }

    #[test]
    fn empty_reduces_to_empty() {
        let (inst, index) = reduce_occ(&SmtiInstance::default()).unwrap();
        assert_eq!(inst, Instance::empty());
        assert!(index.men.is_empty());
        let m = project_occ(&inst, &SmtiInstance::default(), &Matching::empty(0), &index).unwrap();
        assert_eq!(m, SmtiMatching::empty(0));
    }

    #[test]
    fn woman_hospital_substitution() {
        let smti = mixed();
        let (inst, _) = reduce_occ(&smti).unwrap();
        // m1's tie normalises to (w1, w2): A1_1 stands for him at W1,
        // A1_2 at W2
        let w1 = inst.hospital_id("W1").unwrap();
        let labels: Vec<&str> = inst.hospital_prefs(w1).iter().map(|&a| inst.agent_label(a)).collect();
        assert_eq!(labels, ["S2", "A1_1", "S3"]);
        let w2 = inst.hospital_id("W2").unwrap();
        let labels: Vec<&str> = inst.hospital_prefs(w2).iter().map(|&a| inst.agent_label(a)).collect();
        assert_eq!(labels, ["A1_2", "S2", "S3"]);
        let a11 = inst.agent_id("A1_1").unwrap();
        let labels: Vec<&str> = inst.agent_prefs(a11).iter().map(|&h| inst.hospital_label(h)).collect();
        assert_eq!(labels, ["H1_1", "W1", "HL1_1"]);
    }

    #[test]
    fn occ_lift_and_project_round_trip() {
        for smti in [two_tied(), mixed()] {
            let (inst, index) = reduce_occ(&smti).unwrap();
            let m = smti_complete_stable(&smti).unwrap().expect("has a complete stable matching");
            let lifted = lift_occ(&inst, &smti, &m, &index).unwrap();
            assert!(is_occupancy_stable(&inst, &lifted).unwrap());
            assert!(lifted.is_perfect());
            assert_eq!(project_occ(&inst, &smti, &lifted, &index).unwrap(), m);
        }
    }

    #[test]
    fn occ_lift_uses_the_t_sets() {
        let smti = two_tied();
        let (inst, index) = reduce_occ(&smti).unwrap();
        // x with u (w1), y with v (w2)
        let m = SmtiMatching {
            partner: vec![Some(0), Some(1)],
        };
        let lifted = lift_occ(&inst, &smti, &m, &index).unwrap();
        let expect = matching_from_labels(
            &inst,
            &[
                ("A1_1", "W1"),
                ("A1_2", "H1_2"),
                ("A1_3", "H1_1"),
                ("A1_4", "H1_1"),
                ("AL1_1", "HL1_1"),
                ("AL1_2", "HL1_2"),
                ("A2_1", "H2_1"),
                ("A2_2", "W2"),
                ("A2_3", "H2_2"),
                ("A2_4", "H2_2"),
                ("AL2_1", "HL2_1"),
                ("AL2_2", "HL2_2"),
            ],
        )
        .unwrap();
        assert_eq!(lifted, expect);
    }

    #[test]
    fn stable_lift_and_project_round_trip() {
        for smti in [two_tied(), mixed()] {
            let (inst, index) = reduce_stable(&smti).unwrap();
            for m in crate::smti::all_complete_stable(&smti).unwrap() {
                let lifted = lift_stable(&inst, &smti, &m, &index).unwrap();
                assert!(is_stable(&inst, &lifted).unwrap());
                for g in &index.men {
                    for (a, h) in forced_pairs(g) {
                        assert!(lifted.contains(a, h));
                    }
                }
                assert_eq!(project_stable(&inst, &smti, &lifted, &index).unwrap(), m);
            }
        }
    }

    #[test]
    fn lift_rejects_bad_input() {
        let smti = two_tied();
        let (inst, index) = reduce_occ(&smti).unwrap();
        let partial = SmtiMatching {
            partner: vec![Some(0), None],
        };
        assert!(matches!(lift_occ(&inst, &smti, &partial, &index), Err(ReduceError::Incomplete)));
        assert!(matches!(
            lift_stable(&inst, &smti, &SmtiMatching { partner: vec![Some(0), Some(1)] }, &index),
            Err(ReduceError::IndexMismatch(_))
        ));
    }

    #[test]
    fn bounds_and_degrees() {
        let (inst, _) = reduce_occ(&mixed()).unwrap();
        assert!(occ_bounds_hold(&inst));
        let (inst, index) = reduce_stable(&mixed()).unwrap();
        assert!(non_unit_degree_one(&inst));
        let sub = chain_without_top(&inst, &index.men[0], 0);
        assert_eq!(sub.num_agents(), 3);
        assert_eq!(sub.num_hospitals(), 2);
        let sizes: Vec<u32> = sub.agent_ids().map(|a| sub.size(a)).collect();
        assert_eq!(sizes, [1, 1, 3]);
    }

    #[test]
    fn strict_man_needs_three_women() {
        let smti = parse_smti("m t : ( w1 w2 )\nm s : w1 w2\nw w1 : t s\nw w2 : t s\n").unwrap();
        assert!(matches!(reduce_stable(&smti), Err(ReduceError::NotRestricted(_))));
    }
}
