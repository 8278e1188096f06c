//! CNN-assisted solving: predict a distribution over ECs for every flow,
//! threshold it into a reduction matrix, and solve the reduced MILP.
//!
//! Instances with more flows than the bank has models are handled block by
//! block. After each block every flow in it is tentatively committed to its
//! most likely EC (retrieved from its most likely AR) and the image is
//! updated from the remaining capacities before the next block is predicted.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{encode_image, update_image, FeatureImage};
use crate::greedy::gca;
use crate::model::{apply_reduction, build_milp_with, count_variables, PredictionMatrix};
use crate::neural::{argmax, CnnBank};
use crate::scenario::Instance;
use crate::solver::{evaluate_assignment, solve_bnb, EvaluatedSolution, PenaltyConfig, SolveLimits};
use crate::topology::PathTables;

pub const DEFAULT_DELTA: f64 = 0.001;

/// How the reduction rows of blocks after the first are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OMode {
    /// Thresholded probabilities, as for the first block.
    #[default]
    Threshold,
    /// Only the committed argmax EC.
    Argmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub delta: f64,
    pub o_mode: OMode,
    pub limits: SolveLimits,
    pub penalty: PenaltyConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            o_mode: OMode::Threshold,
            limits: SolveLimits::default(),
            penalty: PenaltyConfig::default(),
        }
    }
}

/// `o_ke = 1` iff `pred_ke >= delta`.
pub fn threshold_filter(pred: &[Vec<f64>], delta: f64) -> PredictionMatrix {
    PredictionMatrix {
        rows: pred
            .iter()
            .map(|row| row.iter().map(|&p| u8::from(p >= delta)).collect())
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockInference {
    pub o: PredictionMatrix,
    /// Predicted distribution of every flow.
    pub probs: Vec<Vec<f64>>,
    /// Image state after the last block's commitments.
    pub final_image: FeatureImage,
    pub blocks: usize,
}

fn check_bank(bank: &CnnBank, img: &FeatureImage) -> Result<()> {
    let arch = &bank.arch;
    if bank.size() == 0 || arch.input_rows != bank.size() || arch.input_cols != img.cols() || arch.outputs != img.edge_clouds {
        return Err(Error::ShapeMismatch(format!(
            "bank of {} models over {}x{} images with {} outputs does not fit images of width {} and {} ECs",
            bank.size(),
            arch.input_rows,
            arch.input_cols,
            arch.outputs,
            img.cols(),
            img.edge_clouds
        )));
    }
    Ok(())
}

/// Runs the bank over consecutive blocks of flow rows (the last one padded
/// with zero rows). A row left all-zero by the threshold gets its argmax set.
pub fn infer_blocks(bank: &CnnBank, inst: &Instance, pt: &PathTables, delta: f64, mode: OMode) -> Result<BlockInference> {
    let mut img = encode_image(inst);
    check_bank(bank, &img)?;
    let bs = bank.size();
    let nk = inst.num_flows();
    let mut rows = Vec::with_capacity(nk);
    let mut probs = Vec::with_capacity(nk);
    let mut blocks = 0;
    for start in (0..nk).step_by(bs) {
        let block = img.block(start, bs);
        let pred = bank.predict(&block.data)?;
        let live = (nk - start).min(bs);
        let mut commits = Vec::with_capacity(live);
        for (i, p) in pred.into_iter().take(live).enumerate() {
            let k = start + i;
            let best = argmax(&p);
            let mut row = if blocks > 0 && mode == OMode::Argmax {
                let mut r = vec![0u8; p.len()];
                r[best] = 1;
                r
            } else {
                threshold_filter(std::slice::from_ref(&p), delta).rows.remove(0)
            };
            if row.iter().all(|&o| o == 0) {
                row[best] = 1;
            }
            rows.push(row);
            commits.push((k, best, argmax(&inst.flows[k].mobility)));
            probs.push(p);
        }
        blocks += 1;
        if start + bs < nk {
            img = update_image(&img, inst, pt, &commits)?;
        }
    }
    Ok(BlockInference {
        o: PredictionMatrix { rows },
        probs,
        final_image: img,
        blocks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnOutcome {
    pub solution: EvaluatedSolution,
    pub o: PredictionMatrix,
    pub reduced_variables: usize,
    /// Image encoding plus network inference.
    pub predict_time: f64,
    /// Model build, reduction and branch-and-bound.
    pub solve_time: f64,
    pub total_time: f64,
}

/// Predict, reduce, solve and evaluate against the original instance.
/// Time runs from encoding the image to the evaluated solution.
pub fn solve_with_cnn(inst: &Instance, pt: &PathTables, bank: &CnnBank, cfg: &PipelineConfig) -> Result<CnnOutcome> {
    let start = Instant::now();
    let inference = infer_blocks(bank, inst, pt, cfg.delta, cfg.o_mode)?;
    let predict_time = start.elapsed().as_secs_f64();
    let o = inference.o;
    let sol_start = Instant::now();
    let reduced = apply_reduction(&build_milp_with(inst, pt, cfg.penalty.epsilon_cap)?, &o)?;
    let reduced_variables = count_variables(&reduced).total;
    let greedy = gca(inst, pt, &cfg.penalty);
    let warm = (greedy.feasible() && greedy.hosted_pairs().iter().all(|&(k, e)| o.allows(k, e))).then(|| greedy.as_solution());
    let sol = solve_bnb(&reduced, &cfg.limits, warm.as_ref())?;
    let solution = evaluate_assignment(inst, pt, &sol.x, &sol.z, &cfg.penalty).with_solver_info(&sol);
    let solve_time = sol_start.elapsed().as_secs_f64();
    Ok(CnnOutcome {
        solution,
        o,
        reduced_variables,
        predict_time,
        solve_time,
        total_time: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{init_bank, Architecture, CnnModel};
    use crate::scenario::{sample_instance, ScenarioParams};
    use crate::solver::solve_instance;
    use crate::topology::{build_topology, shortest_paths, TopologyConfig};

    #[test]
    fn threshold_examples() {
        let pred = vec![vec![0.8, 0.0, 0.2, 0.0, 0.0, 0.0]];
        assert_eq!(threshold_filter(&pred, 0.001).rows, vec![vec![1, 0, 1, 0, 0, 0]]);
        assert_eq!(threshold_filter(&pred, 0.5).rows, vec![vec![1, 0, 0, 0, 0, 0]]);
        assert_eq!(threshold_filter(&[vec![1.0 / 6.0; 6]], 0.001).rows, vec![vec![1; 6]]);
    }

    fn setup(flows: usize, seed: u64) -> (Instance, PathTables, CnnBank) {
        let t = build_topology(&TopologyConfig::default()).unwrap();
        let pt = shortest_paths(&t);
        let inst = sample_instance(&t, &ScenarioParams::default().with_flows(flows), seed);
        let bank = init_bank(&Architecture::standard(5, 33, 6), 5, 3).unwrap();
        (inst, pt, bank)
    }

    #[test]
    fn single_block_equals_plain_prediction() {
        let (inst, pt, bank) = setup(5, 1);
        let inf = infer_blocks(&bank, &inst, &pt, DEFAULT_DELTA, OMode::Threshold).unwrap();
        assert_eq!(inf.blocks, 1);
        let direct = bank.predict(&encode_image(&inst).data).unwrap();
        assert_eq!(inf.probs, direct);
        assert_eq!(inf.final_image, encode_image(&inst));
    }

    #[test]
    fn later_blocks_see_committed_storage() {
        let (inst, pt, bank) = setup(10, 2);
        let inf = infer_blocks(&bank, &inst, &pt, DEFAULT_DELTA, OMode::Threshold).unwrap();
        assert_eq!(inf.blocks, 2);
        let before = encode_image(&inst);
        let committed: Vec<usize> = inf.probs[..5].iter().map(|p| argmax(p)).collect();
        for k in 5..10 {
            for &e in &committed {
                if before.q(k, e) < 1.0 {
                    assert!(inf.final_image.q(k, e) > before.q(k, e));
                }
            }
        }
        let inf15 = infer_blocks(&bank, &inst_with(15), &pt, DEFAULT_DELTA, OMode::Threshold).unwrap();
        assert_eq!(inf15.blocks, 3);
    }

    fn inst_with(flows: usize) -> Instance {
        setup(flows, 3).0
    }

    #[test]
    fn ragged_last_block_is_padded() {
        let (inst, pt, bank) = setup(7, 4);
        let inf = infer_blocks(&bank, &inst, &pt, DEFAULT_DELTA, OMode::Argmax).unwrap();
        assert_eq!(inf.o.flows(), 7);
        assert_eq!(inf.blocks, 2);
        assert!(inf.o.rows[5..].iter().all(|r| r.iter().sum::<u8>() == 1));
    }

    #[test]
    fn bank_shape_checked() {
        let (inst, pt, _) = setup(5, 1);
        let bank = init_bank(&Architecture::standard(5, 30, 6), 5, 3).unwrap();
        assert!(matches!(
            infer_blocks(&bank, &inst, &pt, DEFAULT_DELTA, OMode::Threshold),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn uniform_bank_reproduces_the_optimum() {
        // Zero weights predict 1/6 everywhere, so nothing is eliminated.
        let (inst, pt, _) = setup(5, 6);
        let model = CnnModel::zeros(Architecture::standard(5, 33, 6)).unwrap();
        let bank = CnnBank {
            arch: model.arch.clone(),
            seed: 0,
            epoch: 0,
            models: vec![model; 5],
        };
        let out = solve_with_cnn(&inst, &pt, &bank, &PipelineConfig::default()).unwrap();
        assert_eq!(out.reduced_variables, 376);
        let exact = solve_instance(&inst, &pt, &SolveLimits::default()).unwrap();
        assert!((out.solution.total_cost - exact.objective).abs() < 1e-6);
        assert!(out.solution.feasible());
        assert!(out.total_time >= out.predict_time);
    }
}
