//! Dense-tableau, bounded-variable dual simplex.
//!
//! Every row `a.x (<=,=,>=) b` gets a logical column `s` with `a.x + s = b`
//! and bounds `[0, inf)`, `(-inf, 0]` or `[0, 0]`. The all-logical basis is
//! dual feasible as soon as every structural sits at the bound matching the
//! sign of its cost, so no phase one is needed; branch-and-bound changes only
//! bounds, which keeps any basis dual feasible and makes warm starts cheap.
//!
//! Pricing picks the most infeasible row; after a run of dual-degenerate
//! pivots it falls back to Bland's smallest-index rule until progress resumes.

use crate::model::{MilpModel, Sense};

const PIVOT_TOL: f64 = 1e-9;
const RELATIVE_PIVOT_TOL: f64 = 1e-7;
const DUAL_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-8;
const DROP_TOL: f64 = 1e-13;
/// Stand-in for an infinite bound a nonbasic variable is parked at.
const ARTIFICIAL_BOUND: f64 = 1e7;
const DEGENERATE_RUN_FOR_BLAND: usize = 50;
const REFACTOR_EVERY: usize = 2000;
const DEFAULT_ITERATION_LIMIT: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The dual objective reached the caller's cutoff before optimality.
    Cutoff,
    IterationLimit,
    NumericalInstability,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    /// Objective including the model constant. At `Optimal` this is the LP
    /// optimum; at `Cutoff` it is a valid lower bound.
    pub objective: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Position {
    Basic,
    AtLower,
    AtUpper,
}

#[derive(Debug, Clone)]
pub struct DualSimplex {
    rows: usize,
    structurals: usize,
    width: usize,
    row_coeffs: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    cost: Vec<f64>,
    constant: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    tab: Vec<f64>,
    d: Vec<f64>,
    basis: Vec<usize>,
    position: Vec<Position>,
    xb: Vec<f64>,
    pivots_since_refactor: usize,
    iterations: usize,
    pub iteration_limit: usize,
}

impl DualSimplex {
    pub fn new(m: &MilpModel) -> Self {
        let rows = m.rows.len();
        let structurals = m.vars.len();
        let total = structurals + rows;
        let width = total + 1;
        let mut cost = vec![0.0; total];
        let mut lower = vec![0.0; total];
        let mut upper = vec![0.0; total];
        for (j, v) in m.vars.iter().enumerate() {
            cost[j] = v.cost;
            lower[j] = v.lower;
            upper[j] = v.upper;
        }
        for (i, r) in m.rows.iter().enumerate() {
            let (lo, hi) = match r.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lower[structurals + i] = lo;
            upper[structurals + i] = hi;
        }
        let mut lp = DualSimplex {
            rows,
            structurals,
            width,
            row_coeffs: m.rows.iter().map(|r| r.coeffs.clone()).collect(),
            rhs: m.rows.iter().map(|r| r.rhs).collect(),
            cost,
            constant: m.objective_constant,
            lower,
            upper,
            tab: Vec::new(),
            d: Vec::new(),
            basis: (structurals..total).collect(),
            position: vec![Position::AtLower; total],
            xb: vec![0.0; rows],
            pivots_since_refactor: 0,
            iterations: 0,
            iteration_limit: DEFAULT_ITERATION_LIMIT,
        };
        for i in 0..rows {
            lp.position[structurals + i] = Position::Basic;
        }
        lp.load_identity_tableau();
        lp.d = lp.cost.clone();
        for j in 0..structurals {
            lp.place_nonbasic(j);
        }
        lp.recompute_basic_values();
        lp
    }

    pub fn num_structurals(&self) -> usize {
        self.structurals
    }

    pub fn total_iterations(&self) -> usize {
        self.iterations
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    fn load_identity_tableau(&mut self) {
        let w = self.width;
        self.tab = vec![0.0; self.rows * w];
        for (i, coeffs) in self.row_coeffs.iter().enumerate() {
            let row = &mut self.tab[i * w..(i + 1) * w];
            for &(j, a) in coeffs {
                row[j] += a;
            }
            row[self.structurals + i] = 1.0;
            row[w - 1] = self.rhs[i];
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.position[j] {
            Position::AtLower => {
                if self.lower[j].is_finite() {
                    self.lower[j]
                } else {
                    -ARTIFICIAL_BOUND
                }
            }
            Position::AtUpper => {
                if self.upper[j].is_finite() {
                    self.upper[j]
                } else {
                    ARTIFICIAL_BOUND
                }
            }
            Position::Basic => unreachable!("basic variable has no bound position"),
        }
    }

    /// Chooses the bound a nonbasic variable rests at so that its reduced
    /// cost has the dual-feasible sign.
    fn place_nonbasic(&mut self, j: usize) {
        let (lo, hi) = (self.lower[j], self.upper[j]);
        let d = self.d[j];
        self.position[j] = if lo == hi {
            Position::AtLower
        } else if d > 1e-12 {
            Position::AtLower
        } else if d < -1e-12 {
            Position::AtUpper
        } else if lo.is_finite() || !hi.is_finite() {
            Position::AtLower
        } else {
            Position::AtUpper
        };
    }

    fn recompute_basic_values(&mut self) {
        let w = self.width;
        for i in 0..self.rows {
            self.xb[i] = self.tab[i * w + w - 1];
        }
        for j in 0..self.structurals + self.rows {
            if self.position[j] == Position::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                for i in 0..self.rows {
                    let a = self.tab[i * w + j];
                    if a != 0.0 {
                        self.xb[i] -= a * v;
                    }
                }
            }
        }
    }

    /// Changes the bounds of structural `j`, keeping the basis dual feasible.
    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        debug_assert!(lo <= hi);
        if self.lower[j] == lo && self.upper[j] == hi {
            return;
        }
        if self.position[j] == Position::Basic {
            self.lower[j] = lo;
            self.upper[j] = hi;
            return;
        }
        let old = self.nonbasic_value(j);
        self.lower[j] = lo;
        self.upper[j] = hi;
        self.place_nonbasic(j);
        let new = self.nonbasic_value(j);
        if new != old {
            let w = self.width;
            let delta = new - old;
            for i in 0..self.rows {
                let a = self.tab[i * w + j];
                if a != 0.0 {
                    self.xb[i] -= a * delta;
                }
            }
        }
    }

    fn objective_value(&self) -> f64 {
        let mut z = self.constant;
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.structurals {
                z += self.cost[b] * self.xb[i];
            }
        }
        for j in 0..self.structurals {
            if self.position[j] != Position::Basic && self.cost[j] != 0.0 {
                z += self.cost[j] * self.nonbasic_value(j);
            }
        }
        z
    }

    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.structurals];
        for j in 0..self.structurals {
            if self.position[j] != Position::Basic {
                v[j] = self.nonbasic_value(j);
            }
        }
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.structurals {
                v[b] = self.xb[i];
            }
        }
        v
    }

    fn infeasibility(&self, i: usize) -> f64 {
        let b = self.basis[i];
        let x = self.xb[i];
        let tol = PRIMAL_TOL * (1.0 + x.abs().min(1e3));
        if x < self.lower[b] - tol {
            self.lower[b] - x
        } else if x > self.upper[b] + tol {
            x - self.upper[b]
        } else {
            0.0
        }
    }

    /// Runs the dual simplex from the current basis. Stops early with
    /// `Cutoff` once the (monotonically rising) dual objective reaches `cutoff`.
    pub fn solve(&mut self, cutoff: f64) -> LpResult {
        let start = self.iterations;
        let mut degenerate_run = 0usize;
        let status = loop {
            if self.iterations - start >= self.iteration_limit {
                break LpStatus::IterationLimit;
            }
            if self.pivots_since_refactor >= REFACTOR_EVERY && !self.refactor() {
                break LpStatus::NumericalInstability;
            }
            let bland = degenerate_run >= DEGENERATE_RUN_FOR_BLAND;
            let Some(r) = self.choose_leaving(bland) else {
                break LpStatus::Optimal;
            };
            let b = self.basis[r];
            let below = self.xb[r] < self.lower[b];
            let target = if below { self.lower[b] } else { self.upper[b] };
            let entering = match self.choose_entering(r, below, bland) {
                Ok(q) => q,
                // Tiny pivots may be drift; retry once on a fresh factorisation.
                Err(LpStatus::NumericalInstability) if self.pivots_since_refactor > 0 => {
                    if !self.refactor() {
                        break LpStatus::NumericalInstability;
                    }
                    continue;
                }
                Err(status) => break status,
            };
            let ratio = (self.d[entering] / self.tab[r * self.width + entering]).abs();
            if ratio <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, entering, target);
            self.iterations += 1;
            if cutoff.is_finite() && self.objective_value() >= cutoff {
                break LpStatus::Cutoff;
            }
        };
        let status = match status {
            LpStatus::Optimal if self.at_artificial_bound() => LpStatus::Unbounded,
            s => s,
        };
        LpResult {
            status,
            objective: self.objective_value(),
            values: self.values(),
            iterations: self.iterations - start,
        }
    }

    fn at_artificial_bound(&self) -> bool {
        (0..self.structurals + self.rows).any(|j| match self.position[j] {
            Position::AtLower => !self.lower[j].is_finite(),
            Position::AtUpper => !self.upper[j].is_finite(),
            Position::Basic => false,
        })
    }

    fn choose_leaving(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let inf = self.infeasibility(i);
            if inf <= 0.0 {
                continue;
            }
            best = match best {
                None => Some((i, inf)),
                Some((bi, binf)) => {
                    let better = if bland {
                        self.basis[i] < self.basis[bi]
                    } else {
                        inf > binf
                    };
                    if better {
                        Some((i, inf))
                    } else {
                        Some((bi, binf))
                    }
                }
            };
        }
        best.map(|(i, _)| i)
    }

    /// Harris two-pass dual ratio test: the first pass finds the largest step
    /// that keeps every reduced cost within `DUAL_TOL` of its feasible sign,
    /// the second takes the largest pivot among candidates within that step.
    /// Under Bland's rule the smallest eligible index at the minimum ratio wins.
    fn choose_entering(&self, r: usize, below: bool, bland: bool) -> Result<usize, LpStatus> {
        let w = self.width;
        let row = &self.tab[r * w..(r + 1) * w - 1];
        let row_max = row.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let pivot_tol = PIVOT_TOL.max(RELATIVE_PIVOT_TOL * row_max);
        let mut candidates: Vec<(usize, f64, f64)> = Vec::new();
        let mut tiny_candidate = false;
        for (j, &alpha) in row.iter().enumerate() {
            if alpha == 0.0 {
                continue;
            }
            let pos = self.position[j];
            if pos == Position::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let eligible = match (below, pos) {
                (true, Position::AtLower) | (false, Position::AtUpper) => alpha < 0.0,
                _ => alpha > 0.0,
            };
            if !eligible {
                continue;
            }
            if alpha.abs() < pivot_tol {
                tiny_candidate = true;
                continue;
            }
            let d = match pos {
                Position::AtLower => self.d[j].max(0.0),
                _ => -self.d[j].min(0.0),
            };
            candidates.push((j, d, alpha.abs()));
        }
        if candidates.is_empty() {
            return Err(if tiny_candidate {
                LpStatus::NumericalInstability
            } else {
                LpStatus::Infeasible
            });
        }
        if bland {
            let min_ratio = candidates.iter().map(|&(_, d, a)| d / a).fold(f64::INFINITY, f64::min);
            let j = candidates
                .iter()
                .filter(|&&(_, d, a)| d / a <= min_ratio + 1e-12)
                .map(|&(j, _, _)| j)
                .min()
                .expect("non-empty");
            return Ok(j);
        }
        let bound = candidates
            .iter()
            .map(|&(_, d, a)| (d + DUAL_TOL) / a)
            .fold(f64::INFINITY, f64::min);
        let (j, _, _) = candidates
            .iter()
            .filter(|&&(_, d, a)| d / a <= bound)
            .fold(None, |best: Option<(usize, f64, f64)>, &c| match best {
                Some(b) if b.2 >= c.2 => Some(b),
                _ => Some(c),
            })
            .expect("the minimum-ratio candidate passes its own bound");
        Ok(j)
    }

    fn pivot(&mut self, r: usize, q: usize, target: f64) {
        let w = self.width;
        let alpha = self.tab[r * w + q];
        let delta = (self.xb[r] - target) / alpha;
        let entering_value = self.nonbasic_value(q) + delta;
        for i in 0..self.rows {
            let a = self.tab[i * w + q];
            if a != 0.0 {
                self.xb[i] -= a * delta;
            }
        }
        let leaving = self.basis[r];
        self.position[leaving] = if self.lower[leaving] == self.upper[leaving] || target == self.lower[leaving] {
            Position::AtLower
        } else {
            Position::AtUpper
        };
        self.eliminate(r, q);
        let dq = self.d[q];
        if dq != 0.0 {
            let prow = &self.tab[r * w..(r + 1) * w - 1];
            for (dj, &p) in self.d.iter_mut().zip(prow) {
                if p != 0.0 {
                    *dj -= dq * p;
                }
            }
            self.d[q] = 0.0;
        }
        self.basis[r] = q;
        self.position[q] = Position::Basic;
        self.xb[r] = entering_value;
        self.pivots_since_refactor += 1;
    }

    /// Gauss-Jordan elimination of column `q` using row `r` (tableau only).
    fn eliminate(&mut self, r: usize, q: usize) {
        let w = self.width;
        let alpha = self.tab[r * w + q];
        let inv = 1.0 / alpha;
        let mut nz = Vec::with_capacity(64);
        {
            let prow = &mut self.tab[r * w..(r + 1) * w];
            for (c, v) in prow.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v *= inv;
                    nz.push(c);
                }
            }
            prow[q] = 1.0;
        }
        let (before, rest) = self.tab.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        let update = |row: &mut [f64]| {
            let f = row[q];
            if f == 0.0 {
                return;
            }
            for &c in &nz {
                let v = row[c] - f * prow[c];
                row[c] = if v.abs() < DROP_TOL { 0.0 } else { v };
            }
            row[q] = 0.0;
        };
        before.chunks_exact_mut(w).for_each(update);
        after.chunks_exact_mut(w).for_each(update);
    }

    /// Rebuilds the tableau, reduced costs and basic values from the original
    /// rows for the current basis. Returns false if the basis is singular.
    pub fn refactor(&mut self) -> bool {
        let target = self.basis.clone();
        let total = self.structurals + self.rows;
        let mut in_target = vec![false; total];
        target.iter().for_each(|&b| in_target[b] = true);
        self.load_identity_tableau();
        self.basis = (self.structurals..total).collect();
        let w = self.width;
        let mut structural_basics: Vec<usize> = target.iter().copied().filter(|&b| b < self.structurals).collect();
        structural_basics.sort_unstable();
        for j in structural_basics {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let occupant = self.basis[i];
                if occupant < self.structurals || in_target[occupant] {
                    continue;
                }
                let a = self.tab[i * w + j].abs();
                if a > best.map_or(PIVOT_TOL, |(_, b)| b) {
                    best = Some((i, a));
                }
            }
            let Some((i, _)) = best else {
                return false;
            };
            self.eliminate(i, j);
            self.basis[i] = j;
        }
        for j in 0..total {
            if !in_target[j] && self.position[j] == Position::Basic {
                self.position[j] = Position::AtLower;
            }
        }
        self.d = self.cost.clone();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = self.cost[b];
            if cb != 0.0 {
                let row = &self.tab[i * w..(i + 1) * w - 1];
                for (dj, &a) in self.d.iter_mut().zip(row) {
                    if a != 0.0 {
                        *dj -= cb * a;
                    }
                }
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
            self.position[b] = Position::Basic;
        }
        for j in 0..total {
            if self.position[j] != Position::Basic && self.lower[j] != self.upper[j] {
                // Drift can flip a reduced-cost sign; re-park such variables.
                let wrong = match self.position[j] {
                    Position::AtLower => self.d[j] < -1e-9,
                    _ => self.d[j] > 1e-9,
                };
                if wrong {
                    self.place_nonbasic(j);
                }
            }
        }
        self.recompute_basic_values();
        self.pivots_since_refactor = 0;
        true
    }
}

/// Solves the LP relaxation of `m` (binaries relaxed to their bounds) with
/// per-variable bounds `bounds[j] = (lo, hi)` from a cold start.
pub fn solve_lp_relaxation(m: &MilpModel, bounds: &[(f64, f64)]) -> LpResult {
    assert_eq!(bounds.len(), m.vars.len(), "one bound pair per variable");
    let mut lp = DualSimplex::new(m);
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        assert!(lo <= hi, "inconsistent bounds for variable {j}");
        lp.set_bounds(j, lo, hi);
    }
    lp.solve(f64::INFINITY)
}

/// The model's own variable bounds.
pub fn model_bounds(m: &MilpModel) -> Vec<(f64, f64)> {
    m.vars.iter().map(|v| (v.lower, v.upper)).collect()
}
