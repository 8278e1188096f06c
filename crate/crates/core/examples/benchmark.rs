//! Run the three-method comparison and print the metric table.
//!
//! `cargo run --release --example benchmark -- [bank.ckpt] [samples]`
//! Without a bank, a uniform (untrained) bank is used.

use edgecache::bench::{run_benchmark, BenchConfig};
use edgecache::neural::{load_bank, Architecture, CnnBank, CnnModel};
use edgecache::solver::SolveLimits;
use edgecache::topology::{build_topology, TopologyConfig};

fn main() -> edgecache::Result<()> {
    let mut args = std::env::args().skip(1);
    let bank = match args.next() {
        Some(p) => load_bank(p)?,
        None => {
            let m = CnnModel::zeros(Architecture::standard(5, 33, 6))?;
            CnnBank {
                arch: m.arch.clone(),
                seed: 0,
                epoch: 0,
                models: vec![m; 5],
            }
        }
    };
    let samples = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let t = build_topology(&TopologyConfig::default())?;
    let cfg = BenchConfig {
        flows: vec![5, 10],
        samples,
        limits: SolveLimits::seconds(60.0),
        ..BenchConfig::default()
    };
    let report = run_benchmark(&t, Some(&bank), &cfg)?;
    print!("{}", report.to_csv()?);
    Ok(())
}
