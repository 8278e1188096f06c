//! Solve one instance with a trained bank and compare against the full
//! MILP.
//!
//! `cargo run --release --example cnn_pipeline -- bank.ckpt [flows]`

use edgecache::neural::load_bank;
use edgecache::pipeline::{solve_with_cnn, PipelineConfig};
use edgecache::scenario::{sample_instance, ScenarioParams};
use edgecache::solver::{solve_instance, SolveLimits};
use edgecache::topology::{build_topology, shortest_paths, TopologyConfig};

fn main() -> edgecache::Result<()> {
    let mut args = std::env::args().skip(1);
    let bank = load_bank(args.next().unwrap_or_else(|| "bank.ckpt".into()))?;
    let flows = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let t = build_topology(&TopologyConfig::default())?;
    let pt = shortest_paths(&t);
    let inst = sample_instance(&t, &ScenarioParams::default().with_flows(flows), 42);
    let out = solve_with_cnn(&inst, &pt, &bank, &PipelineConfig::default())?;
    let exact = solve_instance(&inst, &pt, &SolveLimits::seconds(300.0))?;
    println!("O = {:?}", out.o.rows);
    println!(
        "cnn: tc={:.4} vars={} time={:.3}s  milp: tc={:.4} time={:.3}s",
        out.solution.total_cost, out.reduced_variables, out.total_time, exact.objective, exact.stats.wall_time
    );
    Ok(())
}
