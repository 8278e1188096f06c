use serde::{Deserialize, Serialize};

use crate::model::DEFAULT_EPSILON_CAP;
use crate::scenario::Instance;
use crate::solver::{Solution, SolveStats, SolveStatus};
use crate::topology::PathTables;

const CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    /// Cost added per violated constraint row; `None` means `beta * N^T * |K|`.
    pub per_violation: Option<f64>,
    /// Storage slack used when checking EC capacity.
    pub epsilon_cap: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            per_violation: None,
            epsilon_cap: DEFAULT_EPSILON_CAP,
        }
    }
}

impl PenaltyConfig {
    pub fn per_violation_for(&self, inst: &Instance) -> f64 {
        self.per_violation
            .unwrap_or(inst.beta * inst.miss_hops as f64 * inst.num_flows() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "row")]
pub enum Violation {
    OneHost { k: usize },
    Storage { e: usize },
    OneRoute { k: usize, a: usize },
    RouteNeedsHost { k: usize, a: usize, e: usize },
    Bandwidth { l: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedSolution {
    pub x: Vec<Vec<u8>>,
    pub z: Vec<Vec<Vec<u8>>>,
    pub y: Vec<Vec<u8>>,
    /// `1 / (1 - U_e)`; `None` for a saturated EC.
    pub t: Vec<Option<f64>>,
    pub utilization: Vec<f64>,
    pub hosting_cost: f64,
    pub transmission_cost: f64,
    pub total_cost: f64,
    pub violations: Vec<Violation>,
    /// ECs whose utilization reached 1; their hosting term is replaced by
    /// the storage penalty.
    pub saturated: Vec<usize>,
    pub penalty: f64,
    pub tc_with_penalty: f64,
    pub status: Option<SolveStatus>,
    pub stats: SolveStats,
}

impl EvaluatedSolution {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn placement(&self) -> Vec<Option<usize>> {
        self.x.iter().map(|row| row.iter().position(|&v| v == 1)).collect()
    }

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

    /// Repackages as a `Solution` carrying the exact total cost. Saturated
    /// ECs get `t = inf`.
    pub fn as_solution(&self) -> Solution {
        let t: Vec<f64> = self.t.iter().map(|t| t.unwrap_or(f64::INFINITY)).collect();
        let chi = self
            .x
            .iter()
            .map(|row| row.iter().zip(&t).map(|(&v, &te)| if v == 1 { te } else { 0.0 }).collect())
            .collect();
        Solution {
            x: self.x.clone(),
            z: self.z.clone(),
            y: self.y.clone(),
            t,
            chi,
            objective: self.total_cost,
            status: self.status.unwrap_or(SolveStatus::Optimal),
            stats: self.stats,
        }
    }

    pub fn with_solver_info(mut self, sol: &Solution) -> Self {
        self.status = Some(sol.status);
        self.stats = sol.stats;
        self
    }
}

/// Link usage implied by retrieval choices: `y_kl = 1` iff some chosen
/// (AR, EC) path of flow `k` crosses link `l`.
pub fn derive_links(pt: &PathTables, z: &[Vec<Vec<u8>>]) -> Vec<Vec<u8>> {
    z.iter()
        .map(|plane| {
            let mut y = vec![0u8; pt.num_links()];
            for (a, row) in plane.iter().enumerate() {
                for (e, &v) in row.iter().enumerate() {
                    if v == 1 {
                        for &l in pt.links_on_path(a, e) {
                            y[l] = 1;
                        }
                    }
                }
            }
            y
        })
        .collect()
}

/// Computes the fractional total cost of a placement directly and checks
/// every constraint family. Never fails; infeasible inputs come back flagged
/// with penalties.
pub fn evaluate_assignment(
    inst: &Instance,
    pt: &PathTables,
    x: &[Vec<u8>],
    z: &[Vec<Vec<u8>>],
    penalty: &PenaltyConfig,
) -> EvaluatedSolution {
    let nk = inst.num_flows();
    let ne = inst.num_edge_clouds();
    let na = pt.num_access_routers();
    let n_t = inst.miss_hops as f64;
    let mut violations = Vec::new();

    for (k, row) in x.iter().enumerate() {
        if row.iter().map(|&v| v as u32).sum::<u32>() > 1 {
            violations.push(Violation::OneHost { k });
        }
    }

    let mut utilization = vec![0.0; ne];
    let mut t = vec![None; ne];
    let mut saturated = Vec::new();
    let mut hosting = 0.0;
    for e in 0..ne {
        let used: f64 = (0..nk).filter(|&k| x[k][e] == 1).map(|k| inst.flows[k].storage).sum();
        let u = used / inst.ec_capacity[e];
        utilization[e] = u;
        if used > (1.0 - penalty.epsilon_cap) * inst.ec_capacity[e] + CHECK_TOL {
            violations.push(Violation::Storage { e });
        }
        let hosted = (0..nk).filter(|&k| x[k][e] == 1).count() as f64;
        if u < 1.0 {
            let te = 1.0 / (1.0 - u);
            t[e] = Some(te);
            hosting += hosted * te;
        } else {
            saturated.push(e);
        }
    }

    for k in 0..nk {
        for a in 0..na {
            if z[k][a].iter().map(|&v| v as u32).sum::<u32>() > 1 {
                violations.push(Violation::OneRoute { k, a });
            }
            for e in 0..ne {
                if z[k][a][e] > x[k][e] {
                    violations.push(Violation::RouteNeedsHost { k, a, e });
                }
            }
        }
    }

    let y = derive_links(pt, z);
    for l in 0..pt.num_links() {
        let load: f64 = (0..nk).filter(|&k| y[k][l] == 1).map(|k| inst.flows[k].bandwidth).sum();
        if load > inst.link_capacity[l] + CHECK_TOL {
            violations.push(Violation::Bandwidth { l });
        }
    }

    let mut transmission = 0.0;
    for k in 0..nk {
        let mut hit_prob = 0.0;
        for a in 0..na {
            let p = inst.flows[k].mobility[a];
            for e in 0..ne {
                if z[k][a][e] == 1 {
                    transmission += p * pt.hop(a, e) as f64;
                    hit_prob += p;
                }
            }
        }
        transmission += (1.0 - hit_prob) * n_t;
    }

    let total_cost = inst.alpha * hosting + inst.beta * transmission;
    let pen = penalty.per_violation_for(inst) * violations.len() as f64;
    EvaluatedSolution {
        x: x.to_vec(),
        z: z.to_vec(),
        y,
        t,
        utilization,
        hosting_cost: hosting,
        transmission_cost: transmission,
        total_cost,
        violations,
        saturated,
        penalty: pen,
        tc_with_penalty: total_cost + pen,
        status: None,
        stats: SolveStats::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Flow;
    use crate::topology::{shortest_paths, Topology};

    /// One flow, one EC one hop from the only AR, q = 0.1, alpha = beta = 1.
    pub(crate) fn cache_hit_fixture() -> (Instance, PathTables) {
        let t = Topology::from_parts(2, &[(0, 1)], &[0], &[1]).unwrap();
        let inst = Instance {
            topology: t.fingerprint(),
            flows: vec![Flow {
                storage: 10.0,
                bandwidth: 1.0,
                mobility: vec![1.0],
            }],
            ec_capacity: vec![100.0],
            link_capacity: vec![50.0],
            alpha: 1.0,
            beta: 1.0,
            miss_hops: 12,
        };
        (inst, shortest_paths(&t))
    }

    #[test]
    fn cache_hit_total_cost() {
        let (inst, pt) = cache_hit_fixture();
        let ev = evaluate_assignment(&inst, &pt, &[vec![1]], &[vec![vec![1]]], &PenaltyConfig::default());
        assert!((ev.total_cost - (1.0 / 0.9 + 1.0)).abs() < 1e-9);
        assert!((ev.total_cost - 2.1111).abs() < 1e-4);
        assert!(ev.feasible());
        assert_eq!(ev.penalty, 0.0);
        assert_eq!(ev.y, vec![vec![1]]);
    }

    #[test]
    fn all_miss_costs_beta_times_miss_hops() {
        let (mut inst, pt) = cache_hit_fixture();
        inst.beta = 0.7;
        let ev = evaluate_assignment(&inst, &pt, &[vec![0]], &[vec![vec![0]]], &PenaltyConfig::default());
        assert!((ev.total_cost - 0.7 * 12.0).abs() < 1e-12);
        assert!(ev.feasible());
    }

    #[test]
    fn bandwidth_violation_penalised_once() {
        let (mut inst, pt) = cache_hit_fixture();
        inst.flows[0].bandwidth = 10.0;
        inst.link_capacity[0] = 5.0;
        let cfg = PenaltyConfig {
            per_violation: Some(100.0),
            ..Default::default()
        };
        let ev = evaluate_assignment(&inst, &pt, &[vec![1]], &[vec![vec![1]]], &cfg);
        assert_eq!(ev.violations, vec![Violation::Bandwidth { l: 0 }]);
        assert_eq!(ev.penalty, 100.0);
        assert!((ev.tc_with_penalty - ev.total_cost - 100.0).abs() < 1e-12);
    }

    #[test]
    fn default_penalty_magnitude() {
        let (inst, _) = cache_hit_fixture();
        assert_eq!(PenaltyConfig::default().per_violation_for(&inst), 12.0);
    }

    #[test]
    fn saturated_ec_flagged() {
        let (mut inst, pt) = cache_hit_fixture();
        inst.flows[0].storage = 100.0;
        let ev = evaluate_assignment(&inst, &pt, &[vec![1]], &[vec![vec![0]]], &PenaltyConfig::default());
        assert_eq!(ev.saturated, vec![0]);
        assert_eq!(ev.t, vec![None]);
        assert_eq!(ev.violations, vec![Violation::Storage { e: 0 }]);
        assert_eq!(ev.hosting_cost, 0.0);
    }

    #[test]
    fn route_without_host_flagged() {
        let (inst, pt) = cache_hit_fixture();
        let ev = evaluate_assignment(&inst, &pt, &[vec![0]], &[vec![vec![1]]], &PenaltyConfig::default());
        assert_eq!(ev.violations, vec![Violation::RouteNeedsHost { k: 0, a: 0, e: 0 }]);
    }
}
