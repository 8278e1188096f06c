//! Exact and reference solvers for the caching MILP.
//!
//! - [`solve_bnb`]: branch-and-bound over the linearised model, bounded by
//!   the dual-simplex LP relaxation in [`lp`].
//! - [`enumerate_optimal`]: brute-force oracle for tiny instances, computed
//!   straight from the fractional cost (no linearisation involved).
//! - [`evaluate_assignment`]: ground-truth cost and constraint check of any
//!   candidate placement.

mod bnb;
mod evaluate;
pub mod lp;
mod oracle;

use serde::{Deserialize, Serialize};

pub use bnb::{solve_bnb, solve_instance};
pub use evaluate::{derive_links, evaluate_assignment, EvaluatedSolution, PenaltyConfig, Violation};
pub use lp::{solve_lp_relaxation, LpResult, LpStatus};
pub use oracle::{enumerate_optimal, enumeration_size, DEFAULT_ENUMERATION_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    TimeoutIncumbent,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveLimits {
    #[serde(with = "opt_secs")]
    pub time: Option<std::time::Duration>,
    pub nodes: Option<usize>,
}

impl SolveLimits {
    pub fn seconds(secs: f64) -> Self {
        Self {
            time: Some(std::time::Duration::from_secs_f64(secs)),
            nodes: None,
        }
    }
}

mod opt_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
        match d {
            Some(d) => s.serialize_some(&d.as_secs_f64()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.map(Duration::from_secs_f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes: usize,
    pub lp_iterations: usize,
    pub wall_time: f64,
    /// LP bound at the root node.
    pub root_bound: f64,
    /// Largest amount by which a child LP bound fell below its parent's.
    pub max_bound_drop: f64,
}

/// A placement in problem indices. Eliminated variables read as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<Vec<u8>>,
    pub z: Vec<Vec<Vec<u8>>>,
    pub y: Vec<Vec<u8>>,
    pub t: Vec<f64>,
    pub chi: Vec<Vec<f64>>,
    pub objective: f64,
    pub status: SolveStatus,
    pub stats: SolveStats,
}

impl Solution {
    /// `placement[k] = Some(e)` if flow `k` is hosted at EC `e`.
    pub fn placement(&self) -> Vec<Option<usize>> {
        self.x.iter().map(|row| row.iter().position(|&v| v == 1)).collect()
    }

    /// Set of (flow, EC) pairs with `x = 1`.
    pub fn hosted_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (k, row) in self.x.iter().enumerate() {
            for (e, &v) in row.iter().enumerate() {
                if v == 1 {
                    out.push((k, e));
                }
            }
        }
        out
    }

    /// JSON form with `x`, `z`, `y` as index lists.
    pub fn to_json(&self) -> crate::Result<String> {
        let ones2 = |m: &Vec<Vec<u8>>| -> Vec<[usize; 2]> {
            let mut v = Vec::new();
            for (i, r) in m.iter().enumerate() {
                for (j, &b) in r.iter().enumerate() {
                    if b == 1 {
                        v.push([i, j]);
                    }
                }
            }
            v
        };
        let mut z = Vec::new();
        for (k, plane) in self.z.iter().enumerate() {
            for (a, r) in plane.iter().enumerate() {
                for (e, &b) in r.iter().enumerate() {
                    if b == 1 {
                        z.push([k, a, e]);
                    }
                }
            }
        }
        let doc = serde_json::json!({
            "x": ones2(&self.x),
            "z": z,
            "y": ones2(&self.y),
            "t": self.t,
            "total_cost": self.objective,
            "status": self.status,
            "stats": self.stats,
        });
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}
