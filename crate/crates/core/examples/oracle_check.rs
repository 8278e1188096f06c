//! Cross-check branch-and-bound against brute-force enumeration on tiny
//! random instances.

use edgecache::scenario::{derive_seed, sample_instance, ScenarioParams};
use edgecache::solver::{enumerate_optimal, solve_instance, SolveLimits, DEFAULT_ENUMERATION_CAP};
use edgecache::topology::{build_topology, shortest_paths, TopologyConfig};

fn main() -> edgecache::Result<()> {
    let cfg = TopologyConfig {
        nodes: 5,
        min_degree: 1,
        max_degree: 4,
        access_routers: 3,
        edge_clouds: 2,
        overlap: 0,
        links: 5,
        ..TopologyConfig::default()
    };
    let t = build_topology(&cfg)?;
    let pt = shortest_paths(&t);
    let params = ScenarioParams {
        ec_capacity: (20.0, 80.0),
        link_capacity: (5.0, 15.0),
        ..ScenarioParams::default().with_flows(3)
    };
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let inst = sample_instance(&t, &params, derive_seed(5, i));
        let bnb = solve_instance(&inst, &pt, &SolveLimits::default())?;
        let oracle = enumerate_optimal(&inst, &pt, DEFAULT_ENUMERATION_CAP)?;
        let gap = (bnb.objective - oracle.objective).abs();
        worst = worst.max(gap);
        println!("#{i}: bnb={:.6} oracle={:.6} nodes={}", bnb.objective, oracle.objective, bnb.stats.nodes);
    }
    println!("largest gap {worst:.2e}");
    Ok(())
}
