//! Greedy caching baseline: each flow goes to the closest edge cloud that
//! still has room for it.

use crate::scenario::Instance;
use crate::solver::{evaluate_assignment, EvaluatedSolution, PenaltyConfig};
use crate::topology::PathTables;

/// Places flows in index order. Distance is the expected hop count under the
/// flow's mobility distribution; an EC is available when its residual
/// storage (after the `epsilon_cap` slack) fits the flow. Ties go to the
/// lowest EC index and a flow that fits nowhere stays uncached. A cached flow
/// is always retrieved from its EC, whichever AR the user is at.
pub fn gca(inst: &Instance, pt: &PathTables, penalty: &PenaltyConfig) -> EvaluatedSolution {
    let nk = inst.num_flows();
    let ne = inst.num_edge_clouds();
    let na = pt.num_access_routers();
    let mut residual: Vec<f64> = inst
        .ec_capacity
        .iter()
        .map(|w| (1.0 - penalty.epsilon_cap) * w)
        .collect();
    let mut x = vec![vec![0u8; ne]; nk];
    let mut z = vec![vec![vec![0u8; ne]; na]; nk];

    for k in 0..nk {
        let s = inst.flows[k].storage;
        let mut best: Option<(f64, usize)> = None;
        for e in 0..ne {
            if residual[e] < s {
                continue;
            }
            let d = inst.expected_hops(pt, k, e);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, e));
            }
        }
        if let Some((_, e)) = best {
            residual[e] -= s;
            x[k][e] = 1;
            for plane in z[k].iter_mut() {
                plane[e] = 1;
            }
        }
    }
    evaluate_assignment(inst, pt, &x, &z, penalty)
}
