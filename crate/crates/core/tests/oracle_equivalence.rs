mod common;

use proptest::prelude::*;

use common::{close, direct_total_cost, tiny_instance};
use edgecache::model::build_milp;
use edgecache::solver::{enumerate_optimal, evaluate_assignment, solve_bnb, PenaltyConfig, SolveLimits, SolveStatus, DEFAULT_ENUMERATION_CAP};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn branch_and_bound_matches_enumeration(seed in any::<u64>()) {
        let (inst, pt) = tiny_instance(seed);
        let oracle = enumerate_optimal(&inst, &pt, DEFAULT_ENUMERATION_CAP).unwrap();
        let m = build_milp(&inst, &pt).unwrap();
        let bnb = solve_bnb(&m, &SolveLimits::default(), None).unwrap();
        prop_assert_eq!(bnb.status, SolveStatus::Optimal);
        prop_assert!(close(bnb.objective, oracle.objective, 1e-6), "bnb {} oracle {}", bnb.objective, oracle.objective);
        prop_assert!(bnb.stats.root_bound <= bnb.objective + 1e-7);

        let ev = evaluate_assignment(&inst, &pt, &bnb.x, &bnb.z, &PenaltyConfig::default());
        prop_assert!(ev.feasible(), "{:?}", ev.violations);
        prop_assert!(close(ev.total_cost, bnb.objective, 1e-7));
        prop_assert!(close(direct_total_cost(&inst, &pt, &bnb.x, &bnb.z), bnb.objective, 1e-7));
        prop_assert!(close(direct_total_cost(&inst, &pt, &oracle.x, &oracle.z), oracle.objective, 1e-7));
    }
}
