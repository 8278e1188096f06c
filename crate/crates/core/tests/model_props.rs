mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{close, default_world, direct_total_cost, links_used, pinned_lp, random_feasible_assignment};
use edgecache::model::{apply_reduction, build_milp, count_variables, PredictionMatrix, VarRef, DEFAULT_EPSILON_CAP};
use edgecache::scenario::{sample_instance, ScenarioParams};
use edgecache::solver::{solve_bnb, LpStatus, SolveLimits};

#[test]
fn pinned_relaxation_reproduces_direct_cost_for_1000_placements() {
    let (t, pt) = default_world();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut checked = 0;
    for i in 0..1000u64 {
        let k = [5, 10, 15, 20][i as usize % 4];
        let inst = sample_instance(&t, &ScenarioParams::default().with_flows(k), 10_000 + i);
        let m = build_milp(&inst, &pt).unwrap();
        let (x, z) = random_feasible_assignment(&inst, &pt, DEFAULT_EPSILON_CAP, &mut rng);
        let y = links_used(&pt, &z);
        let lp = pinned_lp(&m, &x, &z, &y);
        assert_eq!(lp.status, LpStatus::Optimal, "placement {i}");
        let direct = direct_total_cost(&inst, &pt, &x, &z);
        assert!(close(lp.objective, direct, 1e-9), "placement {i}: {} vs {direct}", lp.objective);
        for e in 0..inst.num_edge_clouds() {
            let u: f64 = (0..k).map(|j| x[j][e] as f64 * inst.storage_ratio(j, e)).sum();
            let te = lp.values[m.t(e).unwrap()];
            assert!(close(te, 1.0 / (1.0 - u), 1e-9));
            for j in 0..k {
                let chi = lp.values[m.chi(j, e).unwrap()];
                assert!(close(chi, x[j][e] as f64 * te, 1e-9));
            }
        }
        checked += 1;
    }
    assert_eq!(checked, 1000);
}

#[test]
fn all_miss_point_is_feasible_and_costs_the_miss_term() {
    let (t, pt) = default_world();
    for k in [5, 10, 15, 20] {
        let inst = sample_instance(&t, &ScenarioParams::default().with_flows(k), k as u64);
        let m = build_milp(&inst, &pt).unwrap();
        let mut v = vec![0.0; m.num_vars()];
        for e in 0..inst.num_edge_clouds() {
            v[m.t(e).unwrap()] = 1.0;
        }
        assert!(m.max_violation(&v) <= 1e-12);
        assert!(close(m.objective(&v), inst.beta * k as f64 * inst.miss_hops as f64, 1e-12));
    }
}

#[test]
fn all_ones_reduction_is_identity() {
    let (t, pt) = default_world();
    let inst = sample_instance(&t, &ScenarioParams::default(), 3);
    let m = build_milp(&inst, &pt).unwrap();
    let r = apply_reduction(&m, &PredictionMatrix::all_ones(5, 6)).unwrap();
    assert_eq!(r.vars, m.vars);
    assert_eq!(r.rows, m.rows);
    assert!(r.fixed.is_empty());
}

fn random_mask(bits: &[bool], flows: usize, ecs: usize) -> PredictionMatrix {
    PredictionMatrix {
        rows: (0..flows).map(|k| (0..ecs).map(|e| u8::from(bits[k * ecs + e])).collect()).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Reduction keeps exactly the allowed pairs, and any point of the
    /// reduced model, lifted with zeros, is a point of the full model with
    /// the same objective. So the reduced optimum never beats the full one.
    #[test]
    fn reduction_is_sound(seed in 0u64..10_000, bits in prop::collection::vec(any::<bool>(), 30)) {
        let (t, pt) = default_world();
        let inst = sample_instance(&t, &ScenarioParams::default(), seed);
        let full = build_milp(&inst, &pt).unwrap();
        let o = random_mask(&bits, 5, 6);
        let red = apply_reduction(&full, &o).unwrap();
        let c = count_variables(&red);
        prop_assert_eq!(c.x, o.ones());
        prop_assert_eq!(c.chi, o.ones());
        prop_assert_eq!(c.z, o.ones() * 7);
        prop_assert_eq!(c.total + red.fixed.len(), full.num_vars());

        let limits = SolveLimits::seconds(60.0);
        let rs = solve_bnb(&red, &limits, None).unwrap();
        let fs = solve_bnb(&full, &limits, None).unwrap();
        prop_assert!(rs.objective >= fs.objective - 1e-7);
        for (k, row) in rs.x.iter().enumerate() {
            for (e, &v) in row.iter().enumerate() {
                prop_assert!(v == 0 || o.allows(k, e));
            }
        }
        let mut lifted = vec![0.0; full.num_vars()];
        for (j, v) in full.vars.iter().enumerate() {
            lifted[j] = match v.var {
                VarRef::X { k, e } => rs.x[k][e] as f64,
                VarRef::Z { k, a, e } => rs.z[k][a][e] as f64,
                VarRef::Y { k, l } => rs.y[k][l] as f64,
                VarRef::T { e } => rs.t[e],
                VarRef::Chi { k, e } => rs.chi[k][e],
            };
        }
        prop_assert!(full.max_violation(&lifted) <= 1e-6);
        prop_assert!(close(full.objective(&lifted), rs.objective, 1e-9));
    }
}
