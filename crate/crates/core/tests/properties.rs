use proptest::prelude::*;

use hrs_core::harness::{brute_force_blocks, brute_force_gen_ml, gen_master_list, gen_random, GenParams};
use hrs_core::verify::{has_blocking_pair, BlockingKind};
use hrs_core::{
    detect_generalized_master_list, find_blocking_pairs, find_occupancy_blocking_pairs, is_feasible,
    is_occupancy_stable, is_stable, matching_size, occupancy, parse_instance, serialize_instance,
    size_descending_partition, solve, solve_occupancy, validate_ordered_partition, Instance, Matching,
};

fn small_params() -> impl Strategy<Value = GenParams> {
    (1usize..=6, 1usize..=4, 1u32..=3, 1u32..=6, 0.2f64..=1.0, any::<u64>(), 1usize..=3).prop_map(
        |(agents, hospitals, size_max, cap_max, density, seed, classes)| GenParams {
            agents,
            hospitals,
            size_min: 1,
            size_max,
            cap_min: 1,
            cap_max,
            density,
            seed,
            classes,
        },
    )
}

fn instance() -> impl Strategy<Value = Instance> {
    small_params().prop_map(|p| gen_random(&p).unwrap())
}

/// An instance with an arbitrary, possibly infeasible, assignment: choice
/// `c` for an agent picks entry `c - 1` of its list, or nothing for 0.
fn instance_and_assignment() -> impl Strategy<Value = (Instance, Matching)> {
    (instance(), prop::collection::vec(0usize..8, 6)).prop_map(|(inst, picks)| {
        let mut m = Matching::empty(inst.num_agents());
        for a in inst.agent_ids() {
            let prefs = inst.agent_prefs(a);
            let c = picks[a.index()] % (prefs.len() + 1);
            m.assign(a, c.checked_sub(1).map(|k| prefs[k]));
        }
        (inst, m)
    })
}

proptest! {
    #[test]
    fn text_format_round_trips(inst in instance()) {
        let text = serialize_instance(&inst);
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(serialize_instance(&back), text);
    }

    #[test]
    fn occupancies_sum_to_matching_size((inst, m) in instance_and_assignment()) {
        let total: u64 = inst.hospital_ids().map(|h| occupancy(&inst, &m, h).unwrap()).sum();
        prop_assert_eq!(total, matching_size(&inst, &m));
    }

    #[test]
    fn detectors_agree_with_brute_force((inst, m) in instance_and_assignment()) {
        prop_assume!(is_feasible(&inst, &m));
        for kind in [BlockingKind::Classic, BlockingKind::Occupancy] {
            prop_assert_eq!(has_blocking_pair(&inst, &m, kind), brute_force_blocks(&inst, &m, kind));
        }
        let classic = find_blocking_pairs(&inst, &m).unwrap();
        let occ = find_occupancy_blocking_pairs(&inst, &m).unwrap();
        prop_assert_eq!(classic.is_empty(), is_stable(&inst, &m).unwrap());
        prop_assert_eq!(occ.is_empty(), is_occupancy_stable(&inst, &m).unwrap());
        // an occupancy-blocking pair is also a classic one
        for w in &occ {
            prop_assert!(classic.iter().any(|c| c.agent == w.agent && c.hospital == w.hospital));
        }
    }

    #[test]
    fn witnesses_are_valid_evictions((inst, m) in instance_and_assignment()) {
        prop_assume!(is_feasible(&inst, &m));
        for w in find_occupancy_blocking_pairs(&inst, &m).unwrap() {
            let evicted: u64 = w.displaced.iter().map(|&b| inst.size(b) as u64).sum();
            prop_assert!(evicted <= inst.size(w.agent) as u64);
            for &b in &w.displaced {
                prop_assert_eq!(m.hospital_of(b), Some(w.hospital));
                prop_assert!(inst.hospital_prefers(w.hospital, w.agent, b));
            }
            let after = occupancy(&inst, &m, w.hospital).unwrap() - evicted + inst.size(w.agent) as u64;
            prop_assert!(after <= inst.capacity(w.hospital) as u64);
        }
    }

    #[test]
    fn size_descending_output_is_occupancy_stable(inst in instance()) {
        let m = solve_occupancy(&inst);
        prop_assert!(is_feasible(&inst, &m));
        prop_assert!(find_occupancy_blocking_pairs(&inst, &m).unwrap().is_empty());
        let trace = solve(&inst, &size_descending_partition(&inst)).unwrap();
        prop_assert_eq!(trace.matching, m);
    }

    #[test]
    fn master_list_output_is_stable(p in small_params()) {
        let inst = gen_master_list(&p).unwrap();
        let part = detect_generalized_master_list(&inst).unwrap();
        prop_assert!(validate_ordered_partition(&inst, &part, true).is_empty());
        let m = solve(&inst, &part).unwrap().matching;
        prop_assert!(find_blocking_pairs(&inst, &m).unwrap().is_empty());
    }

    #[test]
    fn detection_matches_brute_force(inst in instance()) {
        prop_assume!(inst.num_agents() <= 5);
        prop_assert_eq!(detect_generalized_master_list(&inst).is_some(), brute_force_gen_ml(&inst));
    }
}
