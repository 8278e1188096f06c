//! Depth-first branch-and-bound over the binary variables of a `MilpModel`.
//!
//! One dual-simplex tableau is shared by the whole search: moving to another
//! node only changes variable bounds, so each node re-optimises from the
//! previous basis. Branching follows family priority (`x`, then `z`, then
//! `y`) and picks the most fractional variable within a family, ties to the
//! lowest index. Once `x` and `z` are integral the link variables are implied
//! by the chosen paths; if that completion is feasible the node is solved.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::greedy::gca;
use crate::model::{build_milp, Family, MilpModel, Row, RowKind, Sense, VarRef};
use crate::scenario::Instance;
use crate::solver::lp::{DualSimplex, LpStatus};
use crate::solver::{PenaltyConfig, Solution, SolveLimits, SolveStats, SolveStatus};
use crate::topology::PathTables;

const INT_TOL: f64 = 1e-6;
const PRUNE_TOL: f64 = 1e-7;
const FEAS_TOL: f64 = 1e-6;

struct Node {
    fixings: Vec<(u32, bool)>,
    bound: f64,
    depth: usize,
}

fn family_rank(f: Family) -> u8 {
    match f {
        Family::X => 0,
        Family::Z => 1,
        Family::Y => 2,
        Family::T | Family::Chi => 3,
    }
}

/// Sets `t` and `chi` to the unique values the linearisation rows admit for
/// the binaries already in `values`. Returns false if some EC is saturated.
fn complete_continuous(m: &MilpModel, values: &mut [f64]) -> bool {
    for row in &m.rows {
        let RowKind::TDefinition { e } = row.kind else {
            continue;
        };
        let Some(tj) = m.t(e) else { continue };
        let mut used = 0.0;
        let mut hosted = Vec::new();
        for &(j, a) in &row.coeffs {
            if let VarRef::Chi { k, .. } = m.vars[j].var {
                if let Some(xj) = m.x(k, e) {
                    if values[xj] > 0.5 {
                        used += -a;
                        hosted.push(j);
                    }
                }
                values[j] = 0.0;
            }
        }
        if used >= 1.0 {
            return false;
        }
        let t = 1.0 / (1.0 - used);
        values[tj] = t;
        for j in hosted {
            values[j] = t;
        }
    }
    true
}

/// Sets every `y_kl` to 1 exactly when a chosen path of flow `k` crosses `l`.
fn complete_links(m: &MilpModel, values: &mut [f64]) {
    for row in &m.rows {
        let RowKind::LinkLower { k, l } = row.kind else {
            continue;
        };
        let Some(yj) = m.y(k, l) else { continue };
        let crossing: f64 = row
            .coeffs
            .iter()
            .filter(|&&(j, _)| j != yj)
            .map(|&(j, a)| a * values[j])
            .sum();
        values[yj] = if crossing > 0.5 { 1.0 } else { 0.0 };
    }
}

fn round_binaries(m: &MilpModel, values: &mut [f64]) {
    for (v, x) in m.vars.iter().zip(values.iter_mut()) {
        if v.integer {
            *x = x.round();
        }
    }
}

/// Expands a model point into a full-dimension `Solution`.
pub(crate) fn to_solution(m: &MilpModel, values: &[f64], objective: f64, status: SolveStatus, stats: SolveStats) -> Solution {
    let d = m.dims;
    let mut x = vec![vec![0u8; d.edge_clouds]; d.flows];
    let mut y = vec![vec![0u8; d.links]; d.flows];
    let mut z = vec![vec![vec![0u8; d.edge_clouds]; d.access_routers]; d.flows];
    let mut t = vec![1.0; d.edge_clouds];
    let mut chi = vec![vec![0.0; d.edge_clouds]; d.flows];
    for (v, &val) in m.vars.iter().zip(values) {
        let bit = u8::from(val > 0.5);
        match v.var {
            VarRef::X { k, e } => x[k][e] = bit,
            VarRef::Y { k, l } => y[k][l] = bit,
            VarRef::Z { k, a, e } => z[k][a][e] = bit,
            VarRef::T { e } => t[e] = val,
            VarRef::Chi { k, e } => chi[k][e] = val,
        }
    }
    Solution {
        x,
        z,
        y,
        t,
        chi,
        objective,
        status,
        stats,
    }
}

/// Maps a full-dimension placement onto the model's variables; `None` if it
/// uses an eliminated variable.
fn from_placement(m: &MilpModel, x: &[Vec<u8>], z: &[Vec<Vec<u8>>], y: &[Vec<u8>]) -> Option<Vec<f64>> {
    let d = m.dims;
    let mut values = vec![0.0; m.num_vars()];
    for k in 0..d.flows {
        for e in 0..d.edge_clouds {
            if x[k][e] == 1 {
                values[m.x(k, e)?] = 1.0;
            }
            for a in 0..d.access_routers {
                if z[k][a][e] == 1 {
                    values[m.z(k, a, e)?] = 1.0;
                }
            }
        }
        for l in 0..d.links {
            if y[k][l] == 1 {
                values[m.y(k, l)?] = 1.0;
            }
        }
    }
    Some(values)
}

fn feasible_point(m: &MilpModel, mut values: Vec<f64>) -> Option<(f64, Vec<f64>)> {
    if !complete_continuous(m, &mut values) {
        return None;
    }
    (m.max_violation(&values) <= FEAS_TOL).then(|| (m.objective(&values), values))
}

/// Copy of `m` with a `HostingFloor` cut for every surviving (k, e) pair.
/// A hosted flow sees at least its own load, so `t_e >= 1 / (1 - q_ke)`.
fn with_hosting_floors(m: &MilpModel) -> MilpModel {
    let mut out = m.clone();
    for row in &m.rows {
        let RowKind::TDefinition { e } = row.kind else {
            continue;
        };
        for &(j, a) in &row.coeffs {
            let VarRef::Chi { k, .. } = m.vars[j].var else {
                continue;
            };
            let q = -a;
            if let (Some(xj), true) = (m.x(k, e), q < 1.0) {
                out.rows.push(Row {
                    kind: RowKind::HostingFloor { k, e },
                    coeffs: vec![(j, 1.0), (xj, -1.0 / (1.0 - q))],
                    sense: Sense::Ge,
                    rhs: 0.0,
                });
            }
        }
    }
    out
}

fn select_branch(m: &MilpModel, values: &[f64]) -> Option<usize> {
    let mut best: Option<(u8, f64, usize)> = None;
    for (j, v) in m.vars.iter().enumerate() {
        if !v.integer {
            continue;
        }
        let val = values[j];
        let frac = (val - val.floor()).min(val.ceil() - val);
        if frac <= INT_TOL {
            continue;
        }
        let rank = family_rank(v.var.family());
        let better = match best {
            None => true,
            Some((br, bf, _)) => rank < br || (rank == br && frac > bf + 1e-12),
        };
        if better {
            best = Some((rank, frac, j));
        }
    }
    best.map(|(_, _, j)| j)
}

/// Branch-and-bound with LP-relaxation bounds. Returns a provably optimal
/// solution when the search finishes within `limits`; otherwise the best
/// incumbent with status `TimeoutIncumbent`. `warm`, when feasible for this
/// model, seeds the incumbent; failing that the all-miss point is tried.
pub fn solve_bnb(model: &MilpModel, limits: &SolveLimits, warm: Option<&Solution>) -> Result<Solution> {
    let start = Instant::now();
    let strengthened = with_hosting_floors(model);
    let m = &strengthened;
    let mut stats = SolveStats::default();
    let binaries: Vec<usize> = (0..m.num_vars()).filter(|&j| m.vars[j].integer).collect();

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let offer = |inc: &mut Option<(f64, Vec<f64>)>, cand: Option<(f64, Vec<f64>)>| {
        if let Some((obj, vals)) = cand {
            if inc.as_ref().map_or(true, |(best, _)| obj < *best - 1e-12) {
                *inc = Some((obj, vals));
            }
        }
    };
    if let Some(w) = warm {
        let cand = from_placement(m, &w.x, &w.z, &w.y).and_then(|v| feasible_point(m, v));
        offer(&mut incumbent, cand);
    }
    offer(&mut incumbent, feasible_point(m, vec![0.0; m.num_vars()]));

    let mut lp = DualSimplex::new(m);
    let mut stack = vec![Node {
        fixings: Vec::new(),
        bound: f64::NEG_INFINITY,
        depth: 0,
    }];
    let mut timed_out = false;
    let mut desired_lo = vec![0.0; m.num_vars()];
    let mut desired_hi = vec![0.0; m.num_vars()];

    while let Some(node) = stack.pop() {
        let over_time = limits.time.is_some_and(|t| start.elapsed() >= t);
        let over_nodes = limits.nodes.is_some_and(|n| stats.nodes >= n);
        if over_time || over_nodes {
            timed_out = true;
            break;
        }
        let cutoff = incumbent.as_ref().map_or(f64::INFINITY, |(v, _)| v - PRUNE_TOL);
        if node.bound >= cutoff {
            continue;
        }
        stats.nodes += 1;

        for &j in &binaries {
            desired_lo[j] = m.vars[j].lower;
            desired_hi[j] = m.vars[j].upper;
        }
        for &(j, up) in &node.fixings {
            let v = if up { 1.0 } else { 0.0 };
            desired_lo[j as usize] = v;
            desired_hi[j as usize] = v;
        }
        for &j in &binaries {
            lp.set_bounds(j, desired_lo[j], desired_hi[j]);
        }

        let mut res = lp.solve(cutoff);
        if matches!(res.status, LpStatus::NumericalInstability | LpStatus::IterationLimit | LpStatus::Unbounded) {
            if !lp.refactor() {
                // Singular basis: start over from the slack basis.
                stats.lp_iterations += lp.total_iterations();
                lp = DualSimplex::new(m);
                for &j in &binaries {
                    lp.set_bounds(j, desired_lo[j], desired_hi[j]);
                }
            }
            res = lp.solve(cutoff);
        }
        let bound = match res.status {
            LpStatus::Infeasible | LpStatus::Cutoff => continue,
            LpStatus::Optimal => res.objective,
            // No trustworthy bound: keep the parent's and split on any free binary.
            _ => node.bound,
        };
        if node.depth == 0 {
            stats.root_bound = bound;
        }
        if node.bound.is_finite() {
            stats.max_bound_drop = stats.max_bound_drop.max(node.bound - bound);
        }
        if bound >= cutoff {
            continue;
        }

        let branch_var = if res.status == LpStatus::Optimal {
            let values = res.values;
            match select_branch(m, &values) {
                None => {
                    let mut cand = values;
                    round_binaries(m, &mut cand);
                    offer(&mut incumbent, feasible_point(m, cand));
                    continue;
                }
                Some(j) if m.vars[j].var.family() == Family::Y => {
                    let mut cand = values;
                    round_binaries(m, &mut cand);
                    complete_links(m, &mut cand);
                    if let Some((obj, vals)) = feasible_point(m, cand) {
                        let closes = obj <= bound + PRUNE_TOL;
                        offer(&mut incumbent, Some((obj, vals)));
                        if closes {
                            continue;
                        }
                    }
                    j
                }
                Some(j) => j,
            }
        } else {
            let fixed: Vec<bool> = {
                let mut f = vec![false; m.num_vars()];
                node.fixings.iter().for_each(|&(j, _)| f[j as usize] = true);
                f
            };
            let free = binaries
                .iter()
                .copied()
                .filter(|&j| !fixed[j])
                .min_by_key(|&j| (family_rank(m.vars[j].var.family()), j));
            match free {
                Some(j) => j,
                None => {
                    let mut cand = vec![0.0; m.num_vars()];
                    for &(j, up) in &node.fixings {
                        cand[j as usize] = if up { 1.0 } else { 0.0 };
                    }
                    offer(&mut incumbent, feasible_point(m, cand));
                    continue;
                }
            }
        };

        let value = lp.values().get(branch_var).copied().unwrap_or(0.5);
        let prefer_up = value >= 0.5;
        for up in [!prefer_up, prefer_up] {
            let mut fixings = node.fixings.clone();
            fixings.push((branch_var as u32, up));
            stack.push(Node {
                fixings,
                bound,
                depth: node.depth + 1,
            });
        }
    }

    stats.lp_iterations += lp.total_iterations();
    stats.wall_time = start.elapsed().as_secs_f64();
    let status = if timed_out {
        SolveStatus::TimeoutIncumbent
    } else {
        SolveStatus::Optimal
    };
    match incumbent {
        Some((obj, values)) => Ok(to_solution(m, &values, obj, status, stats)),
        None if timed_out => Err(Error::SolverBudgetExhausted("no incumbent before the limit".into())),
        None => Err(Error::Infeasible),
    }
}

/// Builds the full model for an instance and solves it, warm-started from
/// the greedy placement when that placement is feasible.
pub fn solve_instance(inst: &Instance, pt: &PathTables, limits: &SolveLimits) -> Result<Solution> {
    let model = build_milp(inst, pt)?;
    let greedy = gca(inst, pt, &PenaltyConfig::default());
    let warm = greedy.feasible().then(|| greedy.as_solution());
    solve_bnb(&model, limits, warm.as_ref())
}
