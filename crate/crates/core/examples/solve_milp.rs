//! Solve a few random instances exactly and print cost, status and effort.
//!
//! `cargo run --release --example solve_milp -- [flows] [count] [seconds]`

use edgecache::scenario::{derive_seed, sample_instance, ScenarioParams};
use edgecache::solver::{solve_instance, SolveLimits};
use edgecache::topology::{build_topology, shortest_paths, TopologyConfig};

fn main() -> edgecache::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let flows = args.first().and_then(|s| s.parse().ok()).unwrap_or(5);
    let count = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let secs = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(60.0);

    let topo = build_topology(&TopologyConfig::default())?;
    let pt = shortest_paths(&topo);
    let params = ScenarioParams::default().with_flows(flows);
    for i in 0..count {
        let inst = sample_instance(&topo, &params, derive_seed(99, i));
        let sol = solve_instance(&inst, &pt, &SolveLimits::seconds(secs))?;
        println!(
            "#{i}: tc={:.4} status={:?} nodes={} iters={} time={:.3}s root={:.4} placement={:?}",
            sol.objective,
            sol.status,
            sol.stats.nodes,
            sol.stats.lp_iterations,
            sol.stats.wall_time,
            sol.stats.root_bound,
            sol.placement()
        );
    }
    Ok(())
}
