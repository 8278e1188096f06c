use std::time::Instant;

use crate::error::{Error, Result};
use crate::scenario::Instance;
use crate::solver::{evaluate_assignment, PenaltyConfig, Solution, SolveStats};
use crate::topology::PathTables;

pub const DEFAULT_ENUMERATION_CAP: f64 = 1e6;

/// Number of candidates the oracle would visit: `(|E|+1)^|K| * 2^(|K||A|)`.
pub fn enumeration_size(inst: &Instance, pt: &PathTables) -> f64 {
    let k = inst.num_flows() as f64;
    let e = pt.num_edge_clouds() as f64;
    let a = pt.num_access_routers() as f64;
    (e + 1.0).powf(k) * 2f64.powf(k * a)
}

/// Exhaustive search over every placement (each flow at one EC or none) and,
/// for each, every hit/miss retrieval pattern of the cached flows. Costs come
/// from [`evaluate_assignment`], i.e. the fractional hosting cost itself.
pub fn enumerate_optimal(inst: &Instance, pt: &PathTables, cap: f64) -> Result<Solution> {
    inst.check_dimensions(pt)?;
    let size = enumeration_size(inst, pt);
    if size > cap {
        return Err(Error::InstanceTooLarge { size, cap });
    }
    let start = Instant::now();
    let nk = inst.num_flows();
    let ne = pt.num_edge_clouds();
    let na = pt.num_access_routers();
    let penalty = PenaltyConfig::default();

    let mut best: Option<(f64, Vec<Vec<u8>>, Vec<Vec<Vec<u8>>>)> = None;
    let mut visited = 0usize;
    let mut choice = vec![0usize; nk]; // 0 = uncached, e + 1 = EC e
    loop {
        let mut x = vec![vec![0u8; ne]; nk];
        for (k, &c) in choice.iter().enumerate() {
            if c > 0 {
                x[k][c - 1] = 1;
            }
        }
        let cached: Vec<usize> = (0..nk).filter(|&k| choice[k] > 0).collect();
        let bits = cached.len() * na;
        for pattern in 0u64..(1u64 << bits) {
            let mut z = vec![vec![vec![0u8; ne]; na]; nk];
            for (i, &k) in cached.iter().enumerate() {
                for a in 0..na {
                    if pattern >> (i * na + a) & 1 == 1 {
                        z[k][a][choice[k] - 1] = 1;
                    }
                }
            }
            visited += 1;
            let ev = evaluate_assignment(inst, pt, &x, &z, &penalty);
            if !ev.feasible() {
                continue;
            }
            if best.as_ref().map_or(true, |(b, _, _)| ev.total_cost < *b) {
                best = Some((ev.total_cost, x.clone(), z));
            }
        }
        // Odometer increment over placements.
        let mut k = 0;
        while k < nk {
            choice[k] += 1;
            if choice[k] <= ne {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
        if k == nk {
            break;
        }
    }

    let (objective, x, z) = best.ok_or(Error::Infeasible)?;
    let mut sol = evaluate_assignment(inst, pt, &x, &z, &penalty).as_solution();
    sol.objective = objective;
    sol.stats = SolveStats {
        nodes: visited,
        wall_time: start.elapsed().as_secs_f64(),
        ..Default::default()
    };
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Flow;
    use crate::topology::{shortest_paths, Topology};

    fn one_flow_one_ec(alpha: f64) -> (Instance, PathTables) {
        let t = Topology::from_parts(2, &[(0, 1)], &[0], &[1]).unwrap();
        let inst = Instance {
            topology: t.fingerprint(),
            flows: vec![Flow {
                storage: 10.0,
                bandwidth: 1.0,
                mobility: vec![1.0],
            }],
            ec_capacity: vec![100.0],
            link_capacity: vec![50.0],
            alpha,
            beta: 1.0,
            miss_hops: 12,
        };
        (inst, shortest_paths(&t))
    }

    #[test]
    fn cache_and_hit_is_optimal() {
        let (inst, pt) = one_flow_one_ec(1.0);
        let s = enumerate_optimal(&inst, &pt, DEFAULT_ENUMERATION_CAP).unwrap();
        assert!((s.objective - (1.0 / 0.9 + 1.0)).abs() < 1e-9);
        assert_eq!(s.x, vec![vec![1]]);
        assert_eq!(s.z, vec![vec![vec![1]]]);
        assert_eq!(s.stats.nodes, 3);
    }

    #[test]
    fn expensive_hosting_means_no_cache() {
        // alpha / (1 - q) > beta (N^T - N_ae): 1 / 0.9 > 0.1 * 11
        let (mut inst, pt) = one_flow_one_ec(1.0);
        inst.beta = 0.1;
        let s = enumerate_optimal(&inst, &pt, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(s.x, vec![vec![0]]);
        assert!((s.objective - 1.2).abs() < 1e-12);
    }

    #[test]
    fn size_guard() {
        let (mut inst, pt) = one_flow_one_ec(1.0);
        inst.flows = vec![inst.flows[0].clone(); 30];
        assert!(matches!(
            enumerate_optimal(&inst, &pt, DEFAULT_ENUMERATION_CAP),
            Err(Error::InstanceTooLarge { .. })
        ));
    }
}
