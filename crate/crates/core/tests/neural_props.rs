mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::default_world;
use edgecache::neural::{init_bank, train_bank, Architecture, CnnBank, CnnModel, TrainHyper, TrainSample};
use edgecache::scenario::{InstanceSet, ScenarioParams};
use edgecache::solver::SolveLimits;

const ROWS: usize = 3;
const NA: usize = 2;
const NE: usize = 4;
const NL: usize = 3;
const COLS: usize = NA + NE + NL;

fn random_samples(n: usize, seed: u64) -> Vec<TrainSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| TrainSample {
            image: (0..ROWS * COLS).map(|_| rng.gen_range(0.0..1.0)).collect(),
            labels: (0..ROWS).map(|_| rng.gen_bool(0.8).then(|| rng.gen_range(0..NE))).collect(),
        })
        .collect()
}

/// Moves EC column `e` of the q block to `perm[e]` in every row, and the
/// labels with it.
fn permute(s: &TrainSample, perm: &[usize]) -> TrainSample {
    let mut image = s.image.clone();
    for r in 0..ROWS {
        for e in 0..NE {
            image[r * COLS + NA + perm[e]] = s.image[r * COLS + NA + e];
        }
    }
    TrainSample {
        image,
        labels: s.labels.iter().map(|l| l.map(|e| perm[e])).collect(),
    }
}

fn zero_bank() -> CnnBank {
    let arch = Architecture::linear(ROWS, COLS, NE);
    CnnBank {
        arch: arch.clone(),
        seed: 0,
        epoch: 0,
        models: (0..ROWS).map(|_| CnnModel::zeros(arch.clone()).unwrap()).collect(),
    }
}

#[test]
fn linear_model_from_zero_is_equivariant_to_ec_relabelling() {
    let perm = [2, 0, 3, 1];
    let data = random_samples(64, 5);
    let permuted: Vec<TrainSample> = data.iter().map(|s| permute(s, &perm)).collect();
    let hyper = TrainHyper {
        epochs: 15,
        lr: 0.05,
        batch: 8,
        ..TrainHyper::default()
    };
    let (a, _) = train_bank(&zero_bank(), &data, &[], &hyper).unwrap();
    let (b, _) = train_bank(&zero_bank(), &permuted, &[], &hyper).unwrap();
    let mut moved = 0.0f64;
    for probe in random_samples(10, 6) {
        let pa = a.predict(&probe.image).unwrap();
        let pb = b.predict(&permute(&probe, &perm).image).unwrap();
        for (ra, rb) in pa.iter().zip(&pb) {
            for e in 0..NE {
                assert!((ra[e] - rb[perm[e]]).abs() < 1e-9, "{ra:?} vs {rb:?}");
                moved = moved.max((ra[e] - 0.25).abs());
            }
        }
    }
    assert!(moved > 0.05, "training left the model near uniform");
}

#[test]
fn ten_epochs_lower_the_training_loss() {
    let (t, pt) = default_world();
    let set = InstanceSet::sample(&t, &ScenarioParams::default(), 80, 31);
    let ds = set.label(&pt, &SolveLimits::seconds(60.0)).unwrap();
    let train: Vec<TrainSample> = ds.train_samples().map(TrainSample::from).collect();
    let bank = init_bank(&Architecture::standard(5, 33, 6), 5, 1).unwrap();
    let hyper = TrainHyper {
        epochs: 10,
        lr: 0.01,
        ..TrainHyper::default()
    };
    let (_, report) = train_bank(&bank, &train, &[], &hyper).unwrap();
    for m in &report.models {
        assert_eq!(m.train_loss.len(), 11);
        assert!(m.train_loss[10] < m.train_loss[0], "{:?}", m.train_loss);
    }
}
