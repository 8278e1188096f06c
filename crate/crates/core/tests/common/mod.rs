#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use edgecache::model::{MilpModel, VarRef};
use edgecache::scenario::{sample_instance, Instance, ScenarioParams, WeightMode};
use edgecache::solver::{solve_lp_relaxation, LpResult};
use edgecache::topology::{build_topology, shortest_paths, PathTables, Topology, TopologyConfig};

pub fn default_world() -> (Topology, PathTables) {
    let t = build_topology(&TopologyConfig::default()).unwrap();
    let pt = shortest_paths(&t);
    (t, pt)
}

/// A connected graph on 3 to 5 nodes with at most 3 ARs and 2 ECs, plus an
/// instance on it whose capacities are tight enough to bind.
pub fn tiny_instance(seed: u64) -> (Instance, PathTables) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=5);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.gen_range(0..v), v)).collect();
    if n > 3 && rng.gen_bool(0.5) {
        let (a, b) = (0, n - 1);
        if !edges.contains(&(a, b)) {
            edges.push((a, b));
        }
    }
    let na = rng.gen_range(1..=3.min(n));
    let ne = rng.gen_range(1..=2);
    let ars: Vec<usize> = (0..na).collect();
    let ecs: Vec<usize> = (n - ne..n).collect();
    let t = Topology::from_parts(n, &edges, &ars, &ecs).unwrap();
    let pt = shortest_paths(&t);
    let params = ScenarioParams {
        flows: rng.gen_range(1..=3),
        ec_capacity: (40.0, 120.0),
        link_capacity: (5.0, 20.0),
        weights: WeightMode::Sampled,
        miss_hops: rng.gen_range(3..=12),
        ..ScenarioParams::default()
    };
    (sample_instance(&t, &params, rng.gen()), pt)
}

/// Total cost written out term by term from the placement and retrieval
/// choices, without the linearised model.
pub fn direct_total_cost(inst: &Instance, pt: &PathTables, x: &[Vec<u8>], z: &[Vec<Vec<u8>>]) -> f64 {
    let (nk, ne, na) = (inst.num_flows(), inst.num_edge_clouds(), pt.num_access_routers());
    let mut hosting = 0.0;
    for e in 0..ne {
        let u: f64 = (0..nk).map(|k| x[k][e] as f64 * inst.flows[k].storage / inst.ec_capacity[e]).sum();
        for k in 0..nk {
            hosting += x[k][e] as f64 / (1.0 - u);
        }
    }
    let mut comm = 0.0;
    for k in 0..nk {
        let mut hit = 0.0;
        for a in 0..na {
            let p = inst.flows[k].mobility[a];
            for e in 0..ne {
                comm += p * pt.hop(a, e) as f64 * z[k][a][e] as f64;
                hit += p * z[k][a][e] as f64;
            }
        }
        comm += (1.0 - hit) * inst.miss_hops as f64;
    }
    inst.alpha * hosting + inst.beta * comm
}

/// Link usage implied by the retrieval choices.
pub fn links_used(pt: &PathTables, z: &[Vec<Vec<u8>>]) -> Vec<Vec<u8>> {
    z.iter()
        .map(|plane| {
            (0..pt.num_links())
                .map(|l| {
                    let used = plane
                        .iter()
                        .enumerate()
                        .any(|(a, row)| row.iter().enumerate().any(|(e, &v)| v == 1 && pt.on_path(l, a, e)));
                    u8::from(used)
                })
                .collect()
        })
        .collect()
}

/// A random placement that respects EC storage (with slack `eps`) and link
/// bandwidth: flows are hosted at random, and a flow's retrievals are kept
/// only if its links still fit.
pub fn random_feasible_assignment(inst: &Instance, pt: &PathTables, eps: f64, rng: &mut ChaCha8Rng) -> (Vec<Vec<u8>>, Vec<Vec<Vec<u8>>>) {
    let (nk, ne, na) = (inst.num_flows(), inst.num_edge_clouds(), pt.num_access_routers());
    let mut x = vec![vec![0u8; ne]; nk];
    let mut z = vec![vec![vec![0u8; ne]; na]; nk];
    let mut used = vec![0.0; ne];
    let mut load = vec![0.0; pt.num_links()];
    for k in 0..nk {
        if !rng.gen_bool(0.7) {
            continue;
        }
        let e = rng.gen_range(0..ne);
        if used[e] + inst.flows[k].storage > (1.0 - eps) * inst.ec_capacity[e] {
            continue;
        }
        used[e] += inst.flows[k].storage;
        x[k][e] = 1;
        let mut plane = vec![vec![0u8; ne]; na];
        for row in plane.iter_mut() {
            if rng.gen_bool(0.8) {
                row[e] = 1;
            }
        }
        let y = &links_used(pt, std::slice::from_ref(&plane))[0];
        let b = inst.flows[k].bandwidth;
        if y.iter().enumerate().all(|(l, &u)| u == 0 || load[l] + b <= inst.link_capacity[l]) {
            for (l, &u) in y.iter().enumerate() {
                load[l] += b * u as f64;
            }
            z[k] = plane;
        }
    }
    (x, z)
}

/// Solves the LP relaxation with every integer variable pinned to the given
/// point, leaving only the continuous `t` and `chi`.
pub fn pinned_lp(m: &MilpModel, x: &[Vec<u8>], z: &[Vec<Vec<u8>>], y: &[Vec<u8>]) -> LpResult {
    let bounds: Vec<(f64, f64)> = m
        .vars
        .iter()
        .map(|v| {
            let pin = |b: u8| (b as f64, b as f64);
            match v.var {
                VarRef::X { k, e } => pin(x[k][e]),
                VarRef::Z { k, a, e } => pin(z[k][a][e]),
                VarRef::Y { k, l } => pin(y[k][l]),
                _ => (v.lower, v.upper),
            }
        })
        .collect();
    solve_lp_relaxation(m, &bounds)
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
