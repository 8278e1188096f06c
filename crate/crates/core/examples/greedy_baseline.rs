//! Compare the greedy heuristic with the exact optimum on a handful of
//! instances.

use edgecache::greedy::gca;
use edgecache::scenario::{derive_seed, sample_instance, ScenarioParams};
use edgecache::solver::{solve_instance, PenaltyConfig, SolveLimits};
use edgecache::topology::{build_topology, shortest_paths, TopologyConfig};

fn main() -> edgecache::Result<()> {
    let flows = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let t = build_topology(&TopologyConfig::default())?;
    let pt = shortest_paths(&t);
    let params = ScenarioParams::default().with_flows(flows);
    for i in 0..5 {
        let inst = sample_instance(&t, &params, derive_seed(11, i));
        let g = gca(&inst, &pt, &PenaltyConfig::default());
        let opt = solve_instance(&inst, &pt, &SolveLimits::seconds(60.0))?;
        println!(
            "#{i}: gca={:.4} (violations {}) milp={:.4} gca={:?} milp={:?}",
            g.total_cost,
            g.violations.len(),
            opt.objective,
            g.placement(),
            opt.placement()
        );
    }
    Ok(())
}
