//! Generate a small labelled dataset, train a bank for a few epochs and
//! print the loss curve of every model.
//!
//! `cargo run --release --example train_bank -- [samples] [epochs]`

use edgecache::neural::{init_bank, train_bank, Architecture, TrainHyper, TrainSample};
use edgecache::scenario::{default_label_limits, generate_dataset, ScenarioParams};
use edgecache::topology::{build_topology, shortest_paths, TopologyConfig};

fn main() -> edgecache::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n = args.first().and_then(|s| s.parse().ok()).unwrap_or(200);
    let epochs = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let t = build_topology(&TopologyConfig::default())?;
    let pt = shortest_paths(&t);
    let ds = generate_dataset(&t, &pt, n, &ScenarioParams::default(), &default_label_limits(), 1)?;
    let train: Vec<TrainSample> = ds.train_samples().map(TrainSample::from).collect();
    let test: Vec<TrainSample> = ds.test_samples().map(TrainSample::from).collect();
    let bank = init_bank(&Architecture::standard(5, 33, 6), 5, 1)?;
    let hyper = TrainHyper {
        epochs,
        lr: 0.01,
        ..TrainHyper::default()
    };
    let (_, report) = train_bank(&bank, &train, &test, &hyper)?;
    for (i, m) in report.models.iter().enumerate() {
        let curve: Vec<String> = m.train_loss.iter().map(|l| format!("{l:.3}")).collect();
        println!("model {i}: {} | test acc {:.3}", curve.join(" "), m.test_accuracy);
    }
    Ok(())
}
