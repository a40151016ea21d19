//! Seeded generators, approximation-ratio experiments and randomized
//! property suites.
//!
//! Everything here is a pure function of its parameters and seed. Trial `t`
//! of a run seeded with `s` uses seed `s ^ t`, so results do not depend on
//! how trials are spread over worker threads.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::ops::ControlFlow;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::format::serialize_instance;
use crate::instance::{AgentId, Instance, RawInstance};
use crate::matching::{matching_size, Matching};
use crate::oracle::{for_each_feasible, max_occupancy_stable, stable_matchings, SearchBudget, Verdict};
use crate::partition::{
    detect_generalized_master_list, size_descending_partition, validate_ordered_partition, OrderedPartition,
    Provenance,
};
use crate::smti::{validate_csmti, Man, ManPrefs, SmtiInstance, Woman};
use crate::solver::{check_trace, solve, solve_occupancy, uniform_gs};
use crate::verify::{has_blocking_pair, is_occupancy_stable, is_stable, BlockingKind, BlockingScanner};
use crate::fixtures;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    UniformRandom,
    GenMasterList,
    Csmti,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenParams {
    pub agents: usize,
    pub hospitals: usize,
    pub size_min: u32,
    pub size_max: u32,
    pub cap_min: u32,
    pub cap_max: u32,
    /// Probability that a given agent-hospital pair is an edge.
    pub density: f64,
    pub seed: u64,
    /// Number of classes for the master-list family.
    pub classes: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            agents: 6,
            hospitals: 4,
            size_min: 1,
            size_max: 3,
            cap_min: 1,
            cap_max: 6,
            density: 0.6,
            seed: 0,
            classes: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("empty range {0}")]
    EmptyRange(&'static str),
    #[error("density {0} is outside [0, 1]")]
    Density(String),
    #[error("agents need hospitals to list but there are none")]
    NoHospitals,
    #[error("a strict man needs three women but n = {0}")]
    TooFewWomen(usize),
    #[error("{tied} tied men requested but n = {n}")]
    TooManyTied { tied: usize, n: usize },
    #[error("could not place every man within the women's list limit")]
    Unplaceable,
    #[error("the master-list family needs at least one class")]
    NoClasses,
}

impl GenParams {
    fn check(&self) -> Result<(), GenError> {
        if self.size_min == 0 || self.size_min > self.size_max {
            return Err(GenError::EmptyRange("of sizes"));
        }
        if self.cap_min == 0 || self.cap_min > self.cap_max {
            return Err(GenError::EmptyRange("of capacities"));
        }
        if !(0.0..=1.0).contains(&self.density) {
            return Err(GenError::Density(self.density.to_string()));
        }
        if self.hospitals == 0 && self.agents > 0 && self.density > 0.0 {
            return Err(GenError::NoHospitals);
        }
        Ok(())
    }
}

/// Samples the agents' lists: each pair is an edge with probability
/// `density`, and each agent's hospitals come in random order.
fn sample_agent_lists(p: &GenParams, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let binom = (p.hospitals > 0).then(|| Binomial::new(p.hospitals as u64, p.density).expect("checked density"));
    (0..p.agents)
        .map(|_| {
            let deg = binom.as_ref().map_or(0, |b| b.sample(rng) as usize);
            let mut list = index::sample(rng, p.hospitals, deg).into_vec();
            list.shuffle(rng);
            list
        })
        .collect()
}

fn assemble(
    sizes: &[u32],
    caps: &[u32],
    agent_lists: &[Vec<usize>],
    hospital_lists: &[Vec<usize>],
) -> Instance {
    let mut raw = RawInstance::default();
    for (i, list) in agent_lists.iter().enumerate() {
        raw.push_agent(
            &format!("a{}", i + 1),
            sizes[i] as i64,
            list.iter().map(|h| format!("h{}", h + 1)).collect(),
        );
    }
    for (j, list) in hospital_lists.iter().enumerate() {
        raw.push_hospital(
            &format!("h{}", j + 1),
            caps[j] as i64,
            list.iter().map(|a| format!("a{}", a + 1)).collect(),
        );
    }
    raw.build().expect("generator output is valid")
}

fn adjacency(hospitals: usize, agent_lists: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); hospitals];
    for (a, list) in agent_lists.iter().enumerate() {
        for &h in list {
            out[h].push(a);
        }
    }
    out
}

/// Random instance; agents may end up with empty lists.
pub fn gen_random(p: &GenParams) -> Result<Instance, GenError> {
    p.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let sizes: Vec<u32> = (0..p.agents).map(|_| rng.random_range(p.size_min..=p.size_max)).collect();
    let caps: Vec<u32> = (0..p.hospitals).map(|_| rng.random_range(p.cap_min..=p.cap_max)).collect();
    let agent_lists = sample_agent_lists(p, &mut rng);
    let mut hospital_lists = adjacency(p.hospitals, &agent_lists);
    for list in &mut hospital_lists {
        list.shuffle(&mut rng);
    }
    Ok(assemble(&sizes, &caps, &agent_lists, &hospital_lists))
}

/// Random instance whose hospital lists follow a hidden generalized master
/// list: agents get one of `classes` classes (each class with its own size),
/// and every hospital ranks by class position first, randomly within a
/// class.
pub fn gen_master_list(p: &GenParams) -> Result<Instance, GenError> {
    p.check()?;
    if p.classes == 0 {
        return Err(GenError::NoClasses);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let class_size: Vec<u32> = (0..p.classes).map(|_| rng.random_range(p.size_min..=p.size_max)).collect();
    let mut order: Vec<usize> = (0..p.classes).collect();
    order.shuffle(&mut rng);
    let mut position = vec![0; p.classes];
    for (pos, &c) in order.iter().enumerate() {
        position[c] = pos;
    }
    let class_of: Vec<usize> = (0..p.agents).map(|_| rng.random_range(0..p.classes)).collect();
    let sizes: Vec<u32> = class_of.iter().map(|&c| class_size[c]).collect();
    let caps: Vec<u32> = (0..p.hospitals).map(|_| rng.random_range(p.cap_min..=p.cap_max)).collect();
    let agent_lists = sample_agent_lists(p, &mut rng);
    let mut hospital_lists = adjacency(p.hospitals, &agent_lists);
    for list in &mut hospital_lists {
        let mut keyed: Vec<(usize, u64, usize)> = list.iter().map(|&a| (position[class_of[a]], rng.random(), a)).collect();
        keyed.sort_unstable();
        *list = keyed.into_iter().map(|(_, _, a)| a).collect();
    }
    Ok(assemble(&sizes, &caps, &agent_lists, &hospital_lists))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CsmtiParams {
    pub n: usize,
    pub tied: usize,
    pub seed: u64,
}

/// Random instance in the restricted SMTI form with `tied` tied men (chosen
/// at random) and `n - tied` strict men.
pub fn gen_csmti(p: &CsmtiParams) -> Result<SmtiInstance, GenError> {
    if p.tied > p.n {
        return Err(GenError::TooManyTied { tied: p.tied, n: p.n });
    }
    if p.tied < p.n && p.n < 3 {
        return Err(GenError::TooFewWomen(p.n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let tied: HashSet<usize> = index::sample(&mut rng, p.n, p.tied).into_iter().collect();
    'attempt: for _ in 0..1000 {
        let mut suitors: Vec<Vec<usize>> = vec![Vec::new(); p.n];
        let mut men = Vec::with_capacity(p.n);
        for m in 0..p.n {
            let want = if tied.contains(&m) { 2 } else { 3 };
            let open: Vec<usize> = (0..p.n).filter(|&w| suitors[w].len() < 3).collect();
            if open.len() < want {
                continue 'attempt;
            }
            let mut pick: Vec<usize> = index::sample(&mut rng, open.len(), want).into_iter().map(|i| open[i]).collect();
            pick.shuffle(&mut rng);
            for &w in &pick {
                suitors[w].push(m);
            }
            men.push(Man {
                label: format!("m{}", m + 1),
                prefs: if want == 2 { ManPrefs::Tie(pick) } else { ManPrefs::Strict(pick) },
            });
        }
        let women = suitors
            .into_iter()
            .enumerate()
            .map(|(w, mut list)| {
                list.shuffle(&mut rng);
                Woman {
                    label: format!("w{}", w + 1),
                    prefs: list,
                }
            })
            .collect();
        let smti = SmtiInstance { men, women };
        debug_assert!(validate_csmti(&smti).is_empty());
        return Ok(smti);
    }
    Err(GenError::Unplaceable)
}

/// Bounds for the small random instances used by the suites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SmallShape {
    pub max_agents: usize,
    pub max_hospitals: usize,
    pub max_size: u32,
    pub max_cap: u32,
}

impl SmallShape {
    pub const SUITE: SmallShape = SmallShape {
        max_agents: 6,
        max_hospitals: 4,
        max_size: 3,
        max_cap: 6,
    };

    fn params(&self, seed: u64) -> GenParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        GenParams {
            agents: rng.random_range(1..=self.max_agents),
            hospitals: rng.random_range(1..=self.max_hospitals),
            size_min: 1,
            size_max: self.max_size,
            cap_min: 1,
            cap_max: self.max_cap,
            density: rng.random_range(0.25..=1.0),
            seed,
            classes: rng.random_range(1..=3),
        }
    }
}

/// Where the instances of a run come from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Random(GenParams),
    MasterList(GenParams),
    SmallRandom(SmallShape),
    SmallMasterList(SmallShape),
    /// All agents share one size.
    SmallUniform(SmallShape),
}

impl Source {
    pub fn instance(&self, seed: u64) -> Result<Instance, GenError> {
        match self {
            Source::Random(p) => gen_random(&GenParams { seed, ..p.clone() }),
            Source::MasterList(p) => gen_master_list(&GenParams { seed, ..p.clone() }),
            Source::SmallRandom(s) => gen_random(&s.params(seed)),
            Source::SmallMasterList(s) => gen_master_list(&s.params(seed)),
            Source::SmallUniform(s) => {
                let mut p = s.params(seed);
                let size = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED).random_range(1..=s.max_size);
                p.size_min = size;
                p.size_max = size;
                gen_random(&p)
            }
        }
    }
}

pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ trial as u64
}

fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioRow {
    /// `None` for the pinned instance.
    pub seed: Option<u64>,
    pub m: usize,
    pub n_agents: usize,
    pub s_m: u64,
    pub s_m_star: Option<u64>,
    pub ratio: Option<f64>,
    pub verdict: Verdict,
    /// `3 s(M) > s(M*)` fails, or `s(M) = 0 < s(M*)`.
    pub violation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioReport {
    pub pinned: RatioRow,
    pub rows: Vec<RatioRow>,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub complete: usize,
    pub budget_exhausted: usize,
    pub violations: usize,
}

fn ratio_row(inst: &Instance, seed: Option<u64>, budget: SearchBudget) -> RatioRow {
    let s_m = matching_size(inst, &solve_occupancy(inst));
    let opt = max_occupancy_stable(inst, budget);
    let (s_m_star, ratio, violation) = match (opt.verdict, opt.value) {
        (Verdict::Complete, Some(best)) => {
            let ratio = if s_m == 0 { 1.0 } else { best as f64 / s_m as f64 };
            let violation = if s_m == 0 { best > 0 } else { 3 * s_m <= best };
            (Some(best), Some(ratio), violation)
        }
        _ => (None, None, false),
    };
    RatioRow {
        seed,
        m: inst.num_edges(),
        n_agents: inst.num_agents(),
        s_m,
        s_m_star,
        ratio,
        verdict: opt.verdict,
        violation,
    }
}

/// Compares the size-descending solver against the oracle optimum on
/// `trials` instances, plus the pinned ratio-gap instance.
pub fn run_ratio_experiment(source: &Source, seed: u64, trials: usize, budget: SearchBudget, jobs: usize) -> RatioReport {
    let pinned = ratio_row(&fixtures::ratio_gap(), None, budget);
    let rows: Vec<RatioRow> = pool(jobs).install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let s = trial_seed(seed, t);
                let inst = source.instance(s).expect("valid generator parameters");
                ratio_row(&inst, Some(s), budget)
            })
            .collect()
    });
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    RatioReport {
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        mean_ratio: if ratios.is_empty() { 0.0 } else { ratios.iter().sum::<f64>() / ratios.len() as f64 },
        complete: rows.iter().filter(|r| r.verdict == Verdict::Complete).count(),
        budget_exhausted: rows.iter().filter(|r| r.verdict == Verdict::BudgetExhausted).count(),
        violations: rows.iter().filter(|r| r.violation).count() + pinned.violation as usize,
        pinned,
        rows,
    }
}

impl RatioReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,m,n_agents,sM,sMstar,ratio,verdict\n");
        for r in std::iter::once(&self.pinned).chain(&self.rows) {
            let seed = r.seed.map_or("pinned".to_string(), |s| s.to_string());
            let star = r.s_m_star.map_or(String::new(), |v| v.to_string());
            let ratio = r.ratio.map_or(String::new(), |v| format!("{v:.6}"));
            let verdict = match r.verdict {
                Verdict::Complete => "complete",
                Verdict::BudgetExhausted => "budget_exhausted",
            };
            writeln!(out, "{seed},{},{},{},{star},{ratio},{verdict}", r.m, r.n_agents, r.s_m).unwrap();
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        json!({
            "trials": self.rows.len(),
            "complete": self.complete,
            "budget_exhausted": self.budget_exhausted,
            "max_ratio": self.max_ratio,
            "mean_ratio": self.mean_ratio,
            "violations": self.violations,
            "pinned_ratio": self.pinned.ratio,
        })
    }
}

/// Greedily removes agents, hospitals and edges while `fails` keeps
/// holding, until no single removal does.
pub fn shrink(inst: &Instance, fails: impl Fn(&Instance) -> bool) -> Instance {
    let mut cur = inst.clone();
    'outer: loop {
        let agents: Vec<AgentId> = cur.agent_ids().collect();
        let hospitals: Vec<_> = cur.hospital_ids().collect();
        for i in 0..agents.len() {
            let mut keep = agents.clone();
            keep.remove(i);
            let cand = cur.induced(&keep, &hospitals);
            if fails(&cand) {
                cur = cand;
                continue 'outer;
            }
        }
        for j in 0..hospitals.len() {
            let mut keep = hospitals.clone();
            keep.remove(j);
            let cand = cur.induced(&agents, &keep);
            if fails(&cand) {
                cur = cand;
                continue 'outer;
            }
        }
        let edges: Vec<_> = cur.edges().collect();
        for (a, h) in edges {
            let mut raw = cur.to_raw();
            let (al, hl) = (cur.agent_label(a).to_string(), cur.hospital_label(h).to_string());
            raw.agents[a.index()].prefs.retain(|x| *x != hl);
            raw.hospitals[h.index()].prefs.retain(|x| *x != al);
            let cand = raw.build().expect("dropping an edge keeps the instance valid");
            if fails(&cand) {
                cur = cand;
                continue 'outer;
            }
        }
        return cur;
    }
}

pub const SUITES: &[&str] = &[
    "occ-stable-always",
    "gen-ml-stable",
    "stable-implies-occ",
    "approx-bound",
    "trace",
    "round-equivalence",
    "shuffle-invariance",
    "verify-vs-brute",
    "detect-vs-brute",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuiteViolation {
    pub seed: u64,
    pub message: String,
    /// Locally minimal failing instance in `.hrs` form.
    pub instance: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub trials: usize,
    /// Trials skipped because the oracle ran out of budget.
    pub budget_exhausted: usize,
    pub violations: Vec<SuiteViolation>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown suite {0:?}")]
pub struct UnknownSuite(pub String);

enum Outcome {
    Ok,
    Exhausted,
    Fail(String),
}

/// Does any occupancy-stable matching exist? Stops at the first one.
fn occupancy_stable_exists(inst: &Instance, budget: SearchBudget) -> Option<bool> {
    let mut scanner = BlockingScanner::new(inst);
    let mut found = false;
    let (verdict, _) = for_each_feasible(inst, budget, |m| {
        if scanner.has_blocking_pair(inst, m, BlockingKind::Occupancy) {
            ControlFlow::Continue(())
        } else {
            found = true;
            ControlFlow::Break(())
        }
    });
    (found || verdict == Verdict::Complete).then_some(found)
}

/// Brute-force blocking check that tries every eviction set.
pub fn brute_force_blocks(inst: &Instance, m: &Matching, kind: BlockingKind) -> bool {
    for (a, h) in inst.edges() {
        if m.hospital_of(a) == Some(h) || !inst.agent_prefers(a, h, m.hospital_of(a)) {
            continue;
        }
        let members = m.assigned_to(h);
        let occ: u64 = members.iter().map(|&b| inst.size(b) as u64).sum();
        let lower: Vec<AgentId> = members.into_iter().filter(|&b| inst.hospital_prefers(h, a, b)).collect();
        let sa = inst.size(a) as u64;
        for mask in 0u32..1 << lower.len() {
            let x: u64 = (0..lower.len())
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| inst.size(lower[i]) as u64)
                .sum();
            let fits = occ - x + sa <= inst.capacity(h) as u64;
            let occ_ok = kind == BlockingKind::Classic || x <= sa;
            if fits && occ_ok {
                return true;
            }
        }
    }
    false
}

/// Ordered size-homogeneous partition respected by every hospital list,
/// by trying every ordered set partition.
pub fn brute_force_gen_ml(inst: &Instance) -> bool {
    let n = inst.num_agents();
    fn rec(inst: &Instance, rest: &[AgentId], classes: &mut Vec<Vec<AgentId>>) -> bool {
        if rest.is_empty() {
            let p = OrderedPartition {
                classes: classes.clone(),
                provenance: Provenance::UserSupplied,
            };
            return validate_ordered_partition(inst, &p, true).is_empty();
        }
        let a = rest[0];
        for k in 0..classes.len() {
            if inst.size(classes[k][0]) == inst.size(a) {
                classes[k].push(a);
                if rec(inst, &rest[1..], classes) {
                    return true;
                }
                classes[k].pop();
            }
        }
        for pos in 0..=classes.len() {
            classes.insert(pos, vec![a]);
            if rec(inst, &rest[1..], classes) {
                return true;
            }
            classes.remove(pos);
        }
        false
    }
    let agents: Vec<AgentId> = inst.agent_ids().collect();
    n == 0 || rec(inst, &agents, &mut Vec::new())
}

/// Same instance with one unit-size slot per `size` units of capacity;
/// hospitals left with no slot are dropped.
fn slot_instance(inst: &Instance, size: u32) -> Instance {
    let mut raw = RawInstance::default();
    let kept: HashSet<_> = inst.hospital_ids().filter(|&h| inst.capacity(h) >= size).collect();
    for a in inst.agent_ids() {
        let prefs = inst
            .agent_prefs(a)
            .iter()
            .filter(|h| kept.contains(h))
            .map(|&h| inst.hospital_label(h).to_string())
            .collect();
        raw.push_agent(inst.agent_label(a), 1, prefs);
    }
    for h in inst.hospital_ids().filter(|h| kept.contains(h)) {
        let prefs = inst.hospital_prefs(h).iter().map(|&a| inst.agent_label(a).to_string()).collect();
        raw.push_hospital(inst.hospital_label(h), (inst.capacity(h) / size) as i64, prefs);
    }
    raw.build().expect("slot instance is valid")
}

fn label_pairs(inst: &Instance, m: &Matching) -> BTreeSet<(String, String)> {
    m.pairs()
        .map(|(a, h)| (inst.agent_label(a).to_string(), inst.hospital_label(h).to_string()))
        .collect()
}

fn check(suite: &str, inst: &Instance, seed: u64, budget: SearchBudget) -> Outcome {
    let fail = |msg: String| Outcome::Fail(msg);
    match suite {
        "occ-stable-always" => {
            let m = solve_occupancy(inst);
            if !is_occupancy_stable(inst, &m).unwrap() {
                return fail("solver output has an occupancy-blocking pair".into());
            }
            match occupancy_stable_exists(inst, budget) {
                Some(true) => Outcome::Ok,
                Some(false) => fail("oracle found no occupancy-stable matching".into()),
                None => Outcome::Exhausted,
            }
        }
        "gen-ml-stable" => {
            let Some(p) = detect_generalized_master_list(inst) else {
                return fail("generated master-list instance not detected".into());
            };
            let m = solve(inst, &p).unwrap().matching;
            if !is_stable(inst, &m).unwrap() {
                return fail("solver output under the detected order is not stable".into());
            }
            if inst.num_agents() <= 5 {
                let r = stable_matchings(inst, budget);
                if r.verdict != Verdict::Complete {
                    return Outcome::Exhausted;
                }
                if !r.matchings.contains(&m) {
                    return fail("solver output missing from the oracle's stable set".into());
                }
                if r.matchings.iter().any(|s| !is_occupancy_stable(inst, s).unwrap()) {
                    return fail("a stable matching is not occupancy-stable".into());
                }
            }
            Outcome::Ok
        }
        "stable-implies-occ" => {
            let mut bad = None;
            let mut scanner = BlockingScanner::new(inst);
            let (verdict, _) = for_each_feasible(inst, budget, |m| {
                let stable = !scanner.has_blocking_pair(inst, m, BlockingKind::Classic);
                if stable && scanner.has_blocking_pair(inst, m, BlockingKind::Occupancy) {
                    bad = Some(m.clone());
                    return ControlFlow::Break(());
                }
                ControlFlow::Continue(())
            });
            match (bad, verdict) {
                (Some(_), _) => fail("stable matching with an occupancy-blocking pair".into()),
                (None, Verdict::Complete) => Outcome::Ok,
                (None, _) => Outcome::Exhausted,
            }
        }
        "approx-bound" => {
            let row = ratio_row(inst, Some(seed), budget);
            if row.violation {
                fail(format!("3 * {} <= {}", row.s_m, row.s_m_star.unwrap_or(0)))
            } else if row.verdict != Verdict::Complete {
                Outcome::Exhausted
            } else {
                Outcome::Ok
            }
        }
        "trace" => {
            let trace = solve(inst, &size_descending_partition(inst)).unwrap();
            let report = check_trace(inst, &trace);
            if report.is_empty() {
                Outcome::Ok
            } else {
                fail(report.to_string())
            }
        }
        "round-equivalence" => {
            let agents: Vec<AgentId> = inst.agent_ids().collect();
            let Some(&first) = agents.first() else { return Outcome::Ok };
            let size = inst.size(first);
            let caps: Vec<u32> = inst.hospital_ids().map(|h| inst.capacity(h)).collect();
            let m = uniform_gs(inst, &agents, &caps);
            let r = stable_matchings(inst, budget);
            let slots = slot_instance(inst, size);
            let rs = stable_matchings(&slots, budget);
            if r.verdict != Verdict::Complete || rs.verdict != Verdict::Complete {
                return Outcome::Exhausted;
            }
            if !r.matchings.contains(&m) {
                return fail("round matching missing from the oracle's stable set".into());
            }
            let a: BTreeSet<_> = r.matchings.iter().map(|x| label_pairs(inst, x)).collect();
            let b: BTreeSet<_> = rs.matchings.iter().map(|x| label_pairs(&slots, x)).collect();
            if a != b {
                return fail("stable sets differ between the size model and the slot model".into());
            }
            Outcome::Ok
        }
        "shuffle-invariance" => {
            let mut agents: Vec<AgentId> = inst.agent_ids().collect();
            let Some(&first) = agents.first() else { return Outcome::Ok };
            if agents.iter().any(|&a| inst.size(a) != inst.size(first)) {
                return Outcome::Ok;
            }
            let caps: Vec<u32> = inst.hospital_ids().map(|h| inst.capacity(h)).collect();
            let base = uniform_gs(inst, &agents, &caps);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..4 {
                agents.shuffle(&mut rng);
                if uniform_gs(inst, &agents, &caps) != base {
                    return fail("proposal order changed the round matching".into());
                }
            }
            Outcome::Ok
        }
        "verify-vs-brute" => {
            let mut bad = None;
            let (verdict, _) = for_each_feasible(inst, budget, |m| {
                for kind in [BlockingKind::Classic, BlockingKind::Occupancy] {
                    if has_blocking_pair(inst, m, kind) != brute_force_blocks(inst, m, kind) {
                        bad = Some(kind);
                        return ControlFlow::Break(());
                    }
                }
                ControlFlow::Continue(())
            });
            match (bad, verdict) {
                (Some(kind), _) => fail(format!("{kind:?} detector disagrees with brute force")),
                (None, Verdict::Complete) => Outcome::Ok,
                (None, _) => Outcome::Exhausted,
            }
        }
        "detect-vs-brute" => {
            let fast = detect_generalized_master_list(inst);
            if let Some(p) = &fast {
                if !validate_ordered_partition(inst, p, true).is_empty() {
                    return fail("detected partition does not validate".into());
                }
            }
            if inst.num_agents() <= 5 && fast.is_some() != brute_force_gen_ml(inst) {
                return fail("detection disagrees with brute force".into());
            }
            Outcome::Ok
        }
        _ => unreachable!("suite names are checked by the caller"),
    }
}

/// Instances the named suite runs on.
pub fn suite_source(suite: &str) -> Option<Source> {
    let s = SmallShape::SUITE;
    Some(match suite {
        "occ-stable-always" | "approx-bound" | "trace" => Source::SmallRandom(s),
        "gen-ml-stable" => Source::SmallMasterList(s),
        "stable-implies-occ" => Source::SmallRandom(SmallShape { max_agents: 4, ..s }),
        "round-equivalence" | "shuffle-invariance" => Source::SmallUniform(SmallShape { max_agents: 5, ..s }),
        "verify-vs-brute" => Source::SmallRandom(SmallShape { max_agents: 5, ..s }),
        "detect-vs-brute" => Source::SmallRandom(SmallShape { max_agents: 5, max_hospitals: 3, ..s }),
        _ => return None,
    })
}

/// Runs one suite. Violations come with a shrunk instance.
pub fn run_property_suite(
    suite: &str,
    trials: usize,
    seed: u64,
    budget: SearchBudget,
    jobs: usize,
) -> Result<SuiteReport, UnknownSuite> {
    let source = suite_source(suite).ok_or_else(|| UnknownSuite(suite.to_string()))?;
    let outcomes: Vec<(u64, Outcome, Instance)> = pool(jobs).install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let s = trial_seed(seed, t);
                let inst = source.instance(s).expect("valid generator parameters");
                (s, check(suite, &inst, s, budget), inst)
            })
            .collect()
    });
    let mut report = SuiteReport {
        suite: suite.to_string(),
        trials,
        budget_exhausted: 0,
        violations: Vec::new(),
    };
    for (s, outcome, inst) in outcomes {
        match outcome {
            Outcome::Ok => {}
            Outcome::Exhausted => report.budget_exhausted += 1,
            Outcome::Fail(message) => {
                let small = shrink(&inst, |i| matches!(check(suite, i, s, budget), Outcome::Fail(_)));
                report.violations.push(SuiteViolation {
                    seed: s,
                    message,
                    instance: serialize_instance(&small),
                });
            }
        }
    }
    Ok(report)
}
