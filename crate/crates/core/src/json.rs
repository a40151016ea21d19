//! JSON views of matchings, witnesses, traces and oracle results, keyed by
//! labels.

use serde_json::{json, Map, Value};

use crate::instance::{HospitalId, Instance};
use crate::matching::{occupancies, matching_size, Matching};
use crate::oracle::{OracleResult, Query};
use crate::partition::OrderedPartition;
use crate::smti::{SmtiInstance, SmtiMatching};
use crate::solver::SolveTrace;
use crate::verify::BlockingWitness;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum JsonError {
    #[error("malformed JSON: {0}")]
    Syntax(String),
    #[error("expected an object with a \"matched\" map of agent to hospital labels")]
    Shape,
    #[error("unknown agent {0:?}")]
    UnknownAgent(String),
    #[error("unknown hospital {0:?}")]
    UnknownHospital(String),
}

pub fn matching_to_json(inst: &Instance, m: &Matching) -> Value {
    let mut matched = Map::new();
    let mut unmatched = Vec::new();
    for a in inst.agent_ids() {
        match m.hospital_of(a) {
            Some(h) => {
                matched.insert(inst.agent_label(a).to_string(), json!(inst.hospital_label(h)));
            }
            None => unmatched.push(json!(inst.agent_label(a))),
        }
    }
    let occ = occupancies(inst, m);
    let occupancy: Map<String, Value> = inst
        .hospital_ids()
        .map(|h| (inst.hospital_label(h).to_string(), json!(occ[h.index()])))
        .collect();
    json!({
        "matched": matched,
        "unmatched": unmatched,
        "occupancy": occupancy,
        "size": matching_size(inst, m),
    })
}

/// Reads the `matched` map; other keys are ignored.
pub fn matching_from_json(inst: &Instance, text: &str) -> Result<Matching, JsonError> {
    let v: Value = serde_json::from_str(text).map_err(|e| JsonError::Syntax(e.to_string()))?;
    let matched = v.get("matched").and_then(Value::as_object).ok_or(JsonError::Shape)?;
    let mut m = Matching::empty(inst.num_agents());
    for (a, h) in matched {
        let aid = inst.agent_id(a).ok_or_else(|| JsonError::UnknownAgent(a.clone()))?;
        let h = h.as_str().ok_or(JsonError::Shape)?;
        let hid = inst.hospital_id(h).ok_or_else(|| JsonError::UnknownHospital(h.to_string()))?;
        m.assign(aid, Some(hid));
    }
    Ok(m)
}

pub fn witnesses_to_json(inst: &Instance, ws: &[BlockingWitness]) -> Value {
    Value::Array(
        ws.iter()
            .map(|w| {
                json!({
                    "agent": inst.agent_label(w.agent),
                    "hospital": inst.hospital_label(w.hospital),
                    "displaced": w.displaced.iter().map(|&a| inst.agent_label(a)).collect::<Vec<_>>(),
                    "kind": w.kind,
                })
            })
            .collect(),
    )
}

pub fn partition_to_json(inst: &Instance, p: &OrderedPartition) -> Value {
    json!({
        "provenance": p.provenance,
        "classes": p.classes.iter()
            .map(|c| c.iter().map(|&a| inst.agent_label(a)).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    })
}

pub fn trace_to_json(inst: &Instance, trace: &SolveTrace) -> Value {
    let pair = |(a, h): &(crate::AgentId, HospitalId)| json!([inst.agent_label(*a), inst.hospital_label(*h)]);
    let rounds: Vec<Value> = trace
        .rounds
        .iter()
        .map(|r| {
            let residual: Map<String, Value> = r
                .residual
                .iter()
                .map(|&(h, q)| (inst.hospital_label(h).to_string(), json!(q)))
                .collect();
            json!({
                "index": r.index,
                "class_size": r.class_size,
                "edges": r.edges.iter().map(pair).collect::<Vec<_>>(),
                "residual": residual,
                "matching": r.matching.iter().map(pair).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "partition": partition_to_json(inst, &trace.partition),
        "rounds": rounds,
        "cumulative": trace.cumulative.iter().map(|m| matching_to_json(inst, m)).collect::<Vec<_>>(),
        "matching": matching_to_json(inst, &trace.matching),
    })
}

pub fn oracle_to_json(inst: &Instance, query: Query, strategy: &str, r: &OracleResult) -> Value {
    json!({
        "query": query.name(),
        "strategy": strategy,
        "verdict": r.verdict,
        "count": r.count,
        "value": r.value,
        "witness": r.witness.as_ref().map(|m| matching_to_json(inst, m)),
        "nodes": r.nodes,
    })
}

pub fn smti_matching_to_json(smti: &SmtiInstance, m: &SmtiMatching) -> Value {
    let pairs: Map<String, Value> = m
        .pairs()
        .map(|(man, w)| (smti.men[man].label.clone(), json!(smti.women[w].label)))
        .collect();
    Value::Object(pairs)
}
