//! The linearised caching MILP.
//!
//! Variable families:
//!
//! | family | meaning                                   | kind       | count          |
//! |--------|-------------------------------------------|------------|----------------|
//! | `x`    | flow `k` hosted at EC `e`                 | binary     | `K*E`          |
//! | `y`    | flow `k` uses link `l`                    | binary     | `K*L`          |
//! | `z`    | flow `k` at AR `a` retrieves from EC `e`  | binary     | `K*A*E`        |
//! | `t`    | `1 / (1 - U_e)`                           | continuous | `E`            |
//! | `chi`  | `t_e * x_ke`                              | continuous | `K*E`          |
//!
//! The hosting cost `sum_ke x_ke / (1 - U_e)` is linearised through `t` and
//! `chi` with big-M bounds; the storage row is tightened by `epsilon_cap` so
//! that `U_e < 1` strictly and `t_e <= 1 / epsilon_cap`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Instance;
use crate::topology::PathTables;

pub const DEFAULT_EPSILON_CAP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    X,
    Y,
    Z,
    T,
    Chi,
}

/// Identity of a model variable in problem indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarRef {
    X { k: usize, e: usize },
    Y { k: usize, l: usize },
    Z { k: usize, a: usize, e: usize },
    T { e: usize },
    Chi { k: usize, e: usize },
}

impl VarRef {
    pub fn family(&self) -> Family {
        match self {
            VarRef::X { .. } => Family::X,
            VarRef::Y { .. } => Family::Y,
            VarRef::Z { .. } => Family::Z,
            VarRef::T { .. } => Family::T,
            VarRef::Chi { .. } => Family::Chi,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            VarRef::X { k, e } => format!("x_{k}_{e}"),
            VarRef::Y { k, l } => format!("y_{k}_{l}"),
            VarRef::Z { k, a, e } => format!("z_{k}_{a}_{e}"),
            VarRef::T { e } => format!("t_{e}"),
            VarRef::Chi { k, e } => format!("chi_{k}_{e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub var: VarRef,
    pub integer: bool,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// Which constraint family a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowKind {
    /// At most one EC per flow.
    OneHost { k: usize },
    /// EC storage, tightened by `epsilon_cap`.
    Storage { e: usize },
    /// At most one retrieval EC per (flow, AR).
    OneRoute { k: usize, a: usize },
    /// Retrieval only from the hosting EC.
    RouteNeedsHost { k: usize, a: usize, e: usize },
    /// Link bandwidth.
    Bandwidth { l: usize },
    /// Link used only if some chosen path crosses it.
    LinkUpper { k: usize, l: usize },
    /// Link used whenever a chosen path crosses it.
    LinkLower { k: usize, l: usize },
    /// `t_e - sum_k q_ke chi_ke = 1`.
    TDefinition { e: usize },
    ChiBelowT { k: usize, e: usize },
    ChiBelowMx { k: usize, e: usize },
    ChiAboveT { k: usize, e: usize },
    /// `chi_ke >= x_ke / (1 - q_ke)`. Redundant for integer points; added by
    /// the solver to tighten the relaxation.
    HostingFloor { k: usize, e: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub kind: RowKind,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * values[j]).sum()
    }

    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub flows: usize,
    pub access_routers: usize,
    pub edge_clouds: usize,
    pub links: usize,
}

impl Dims {
    pub fn full_variable_count(&self) -> usize {
        let Dims {
            flows: k,
            access_routers: a,
            edge_clouds: e,
            links: l,
        } = *self;
        k * e + k * l + k * a * e + e + k * e
    }
}

/// Binary reduction matrix `o_ke`: `x_ke` may be 1 only where `o_ke = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionMatrix {
    pub rows: Vec<Vec<u8>>,
}

impl PredictionMatrix {
    pub fn all_ones(flows: usize, edge_clouds: usize) -> Self {
        Self {
            rows: vec![vec![1; edge_clouds]; flows],
        }
    }

    pub fn all_zeros(flows: usize, edge_clouds: usize) -> Self {
        Self {
            rows: vec![vec![0; edge_clouds]; flows],
        }
    }

    /// Keeps exactly the given placement (one EC per cached flow).
    pub fn from_placement(placement: &[Option<usize>], edge_clouds: usize) -> Self {
        let rows = placement
            .iter()
            .map(|p| {
                let mut r = vec![0; edge_clouds];
                if let Some(e) = p {
                    r[*e] = 1;
                }
                r
            })
            .collect();
        Self { rows }
    }

    pub fn flows(&self) -> usize {
        self.rows.len()
    }

    pub fn allows(&self, k: usize, e: usize) -> bool {
        self.rows[k][e] == 1
    }

    pub fn ones(&self) -> usize {
        self.rows.iter().flatten().filter(|&&o| o == 1).count()
    }

    /// True when every entry of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &PredictionMatrix) -> bool {
        self.rows
            .iter()
            .flatten()
            .zip(other.rows.iter().flatten())
            .all(|(&a, &b)| a <= b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VariableCounts {
    pub total: usize,
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub t: usize,
    pub chi: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpModel {
    pub dims: Dims,
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
    /// `beta * |K| * N^T`, kept so objective values equal the total cost.
    pub objective_constant: f64,
    pub big_m_chi: f64,
    pub big_m_path: f64,
    pub epsilon_cap: f64,
    /// Variables eliminated by a reduction (fixed to zero).
    pub fixed: Vec<VarRef>,
    x_index: Vec<Option<usize>>,
    y_index: Vec<Option<usize>>,
    z_index: Vec<Option<usize>>,
    t_index: Vec<Option<usize>>,
    chi_index: Vec<Option<usize>>,
}

impl MilpModel {
    /// Assembles a model from raw parts; big-M and slack metadata are zero.
    pub fn from_parts(dims: Dims, vars: Vec<Variable>, rows: Vec<Row>, objective_constant: f64) -> Self {
        let mut m = MilpModel {
            dims,
            vars,
            rows,
            objective_constant,
            big_m_chi: 0.0,
            big_m_path: 0.0,
            epsilon_cap: 0.0,
            fixed: Vec::new(),
            x_index: Vec::new(),
            y_index: Vec::new(),
            z_index: Vec::new(),
            t_index: Vec::new(),
            chi_index: Vec::new(),
        };
        m.rebuild_index();
        m
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn index_of(&self, v: VarRef) -> Option<usize> {
        let d = &self.dims;
        match v {
            VarRef::X { k, e } => self.x_index[k * d.edge_clouds + e],
            VarRef::Y { k, l } => self.y_index[k * d.links + l],
            VarRef::Z { k, a, e } => self.z_index[(k * d.access_routers + a) * d.edge_clouds + e],
            VarRef::T { e } => self.t_index[e],
            VarRef::Chi { k, e } => self.chi_index[k * d.edge_clouds + e],
        }
    }

    pub fn x(&self, k: usize, e: usize) -> Option<usize> {
        self.index_of(VarRef::X { k, e })
    }

    pub fn y(&self, k: usize, l: usize) -> Option<usize> {
        self.index_of(VarRef::Y { k, l })
    }

    pub fn z(&self, k: usize, a: usize, e: usize) -> Option<usize> {
        self.index_of(VarRef::Z { k, a, e })
    }

    pub fn t(&self, e: usize) -> Option<usize> {
        self.index_of(VarRef::T { e })
    }

    pub fn chi(&self, k: usize, e: usize) -> Option<usize> {
        self.index_of(VarRef::Chi { k, e })
    }

    pub fn objective(&self, values: &[f64]) -> f64 {
        self.objective_constant + self.vars.iter().zip(values).map(|(v, x)| v.cost * x).sum::<f64>()
    }

    /// Largest row violation or bound violation of a point.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(values)).fold(0.0, f64::max);
        let bounds = self
            .vars
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    fn rebuild_index(&mut self) {
        let d = self.dims;
        self.x_index = vec![None; d.flows * d.edge_clouds];
        self.y_index = vec![None; d.flows * d.links];
        self.z_index = vec![None; d.flows * d.access_routers * d.edge_clouds];
        self.t_index = vec![None; d.edge_clouds];
        self.chi_index = vec![None; d.flows * d.edge_clouds];
        for (j, v) in self.vars.iter().enumerate() {
            let slot = match v.var {
                VarRef::X { k, e } => &mut self.x_index[k * d.edge_clouds + e],
                VarRef::Y { k, l } => &mut self.y_index[k * d.links + l],
                VarRef::Z { k, a, e } => &mut self.z_index[(k * d.access_routers + a) * d.edge_clouds + e],
                VarRef::T { e } => &mut self.t_index[e],
                VarRef::Chi { k, e } => &mut self.chi_index[k * d.edge_clouds + e],
            };
            *slot = Some(j);
        }
    }

    /// Writes the model in CPLEX LP text format (debug export).
    pub fn to_lp_format(&self) -> String {
        let mut out = String::new();
        let term = |out: &mut String, first: &mut bool, coef: f64, name: &str| {
            if coef == 0.0 {
                return;
            }
            let sign = if coef < 0.0 { "-" } else if *first { "" } else { "+" };
            let _ = write!(out, " {sign} {} {name}", coef.abs());
            *first = false;
        };
        out.push_str("\\ objective constant ");
        let _ = writeln!(out, "{}", self.objective_constant);
        out.push_str("Minimize\n obj:");
        let mut first = true;
        for v in &self.vars {
            term(&mut out, &mut first, v.cost, &v.var.name());
        }
        if first {
            out.push_str(" 0");
        }
        out.push_str("\nSubject To\n");
        for (i, r) in self.rows.iter().enumerate() {
            let _ = write!(out, " r{i}:");
            let mut first = true;
            for &(j, a) in &r.coeffs {
                term(&mut out, &mut first, a, &self.vars[j].var.name());
            }
            let op = match r.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
                Sense::Ge => ">=",
            };
            let _ = writeln!(out, " {op} {}", r.rhs);
        }
        out.push_str("Bounds\n");
        for v in &self.vars {
            if v.upper.is_finite() {
                let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.var.name(), v.upper);
            } else {
                let _ = writeln!(out, " {} >= {}", v.var.name(), v.lower);
            }
        }
        out.push_str("Binaries\n");
        for v in self.vars.iter().filter(|v| v.integer) {
            let _ = writeln!(out, " {}", v.var.name());
        }
        out.push_str("End\n");
        out
    }
}

/// Builds the full linearised model for an instance.
pub fn build_milp(inst: &Instance, pt: &PathTables) -> Result<MilpModel> {
    build_milp_with(inst, pt, DEFAULT_EPSILON_CAP)
}

pub fn build_milp_with(inst: &Instance, pt: &PathTables, epsilon_cap: f64) -> Result<MilpModel> {
    inst.check_dimensions(pt)?;
    if !(epsilon_cap > 0.0 && epsilon_cap < 1.0) {
        return Err(Error::DimensionMismatch(format!("epsilon_cap {epsilon_cap} outside (0, 1)")));
    }
    let dims = Dims {
        flows: inst.num_flows(),
        access_routers: pt.num_access_routers(),
        edge_clouds: pt.num_edge_clouds(),
        links: pt.num_links(),
    };
    let Dims {
        flows: nk,
        access_routers: na,
        edge_clouds: ne,
        links: nl,
    } = dims;
    let big_m_chi = 1.0 / epsilon_cap;
    let big_m_path = (na * ne) as f64;
    let n_t = inst.miss_hops as f64;

    let mut vars = Vec::with_capacity(dims.full_variable_count());
    let binary = |var, cost| Variable {
        var,
        integer: true,
        lower: 0.0,
        upper: 1.0,
        cost,
    };
    for k in 0..nk {
        for e in 0..ne {
            vars.push(binary(VarRef::X { k, e }, 0.0));
        }
    }
    for k in 0..nk {
        for l in 0..nl {
            vars.push(binary(VarRef::Y { k, l }, 0.0));
        }
    }
    for k in 0..nk {
        for a in 0..na {
            let p = inst.flows[k].mobility[a];
            for e in 0..ne {
                // p N_ae z  +  (1 - p z) N^T  ->  p (N_ae - N^T) z + const
                let cost = inst.beta * p * (pt.hop(a, e) as f64 - n_t);
                vars.push(binary(VarRef::Z { k, a, e }, cost));
            }
        }
    }
    for e in 0..ne {
        vars.push(Variable {
            var: VarRef::T { e },
            integer: false,
            lower: 0.0,
            upper: f64::INFINITY,
            cost: 0.0,
        });
    }
    for k in 0..nk {
        for e in 0..ne {
            vars.push(Variable {
                var: VarRef::Chi { k, e },
                integer: false,
                lower: 0.0,
                upper: f64::INFINITY,
                cost: inst.alpha,
            });
        }
    }

    let mut model = MilpModel {
        dims,
        vars,
        rows: Vec::new(),
        objective_constant: inst.beta * nk as f64 * n_t,
        big_m_chi,
        big_m_path,
        epsilon_cap,
        fixed: Vec::new(),
        x_index: Vec::new(),
        y_index: Vec::new(),
        z_index: Vec::new(),
        t_index: Vec::new(),
        chi_index: Vec::new(),
    };
    model.rebuild_index();
    let x = |k, e| model.x(k, e).unwrap();
    let y = |k, l| model.y(k, l).unwrap();
    let z = |k, a, e| model.z(k, a, e).unwrap();
    let t = |e| model.t(e).unwrap();
    let chi = |k, e| model.chi(k, e).unwrap();
    let mut rows = Vec::new();
    let mut push = |kind, coeffs: Vec<(usize, f64)>, sense, rhs| {
        rows.push(Row {
            kind,
            coeffs,
            sense,
            rhs,
        })
    };

    for k in 0..nk {
        push(RowKind::OneHost { k }, (0..ne).map(|e| (x(k, e), 1.0)).collect(), Sense::Le, 1.0);
    }
    for e in 0..ne {
        push(
            RowKind::Storage { e },
            (0..nk).map(|k| (x(k, e), inst.flows[k].storage)).collect(),
            Sense::Le,
            (1.0 - epsilon_cap) * inst.ec_capacity[e],
        );
    }
    for k in 0..nk {
        for a in 0..na {
            push(
                RowKind::OneRoute { k, a },
                (0..ne).map(|e| (z(k, a, e), 1.0)).collect(),
                Sense::Le,
                1.0,
            );
        }
    }
    for k in 0..nk {
        for a in 0..na {
            for e in 0..ne {
                push(
                    RowKind::RouteNeedsHost { k, a, e },
                    vec![(z(k, a, e), 1.0), (x(k, e), -1.0)],
                    Sense::Le,
                    0.0,
                );
            }
        }
    }
    for l in 0..nl {
        push(
            RowKind::Bandwidth { l },
            (0..nk).map(|k| (y(k, l), inst.flows[k].bandwidth)).collect(),
            Sense::Le,
            inst.link_capacity[l],
        );
    }
    let crossing = |k: usize, l: usize| -> Vec<(usize, f64)> {
        let mut c = Vec::new();
        for a in 0..na {
            for e in 0..ne {
                if pt.on_path(l, a, e) {
                    c.push((z(k, a, e), 1.0));
                }
            }
        }
        c
    };
    for k in 0..nk {
        for l in 0..nl {
            let mut coeffs = vec![(y(k, l), 1.0)];
            coeffs.extend(crossing(k, l).into_iter().map(|(j, _)| (j, -1.0)));
            push(RowKind::LinkUpper { k, l }, coeffs, Sense::Le, 0.0);
        }
    }
    for k in 0..nk {
        for l in 0..nl {
            let mut coeffs = crossing(k, l);
            coeffs.push((y(k, l), -big_m_path));
            push(RowKind::LinkLower { k, l }, coeffs, Sense::Le, 0.0);
        }
    }
    for e in 0..ne {
        let mut coeffs = vec![(t(e), 1.0)];
        coeffs.extend((0..nk).map(|k| (chi(k, e), -inst.storage_ratio(k, e))));
        push(RowKind::TDefinition { e }, coeffs, Sense::Eq, 1.0);
    }
    for k in 0..nk {
        for e in 0..ne {
            push(
                RowKind::ChiBelowT { k, e },
                vec![(chi(k, e), 1.0), (t(e), -1.0)],
                Sense::Le,
                0.0,
            );
        }
    }
    for k in 0..nk {
        for e in 0..ne {
            push(
                RowKind::ChiBelowMx { k, e },
                vec![(chi(k, e), 1.0), (x(k, e), -big_m_chi)],
                Sense::Le,
                0.0,
            );
        }
    }
    for k in 0..nk {
        for e in 0..ne {
            // chi >= M (x - 1) + t
            push(
                RowKind::ChiAboveT { k, e },
                vec![(chi(k, e), 1.0), (t(e), -1.0), (x(k, e), -big_m_chi)],
                Sense::Ge,
                -big_m_chi,
            );
        }
    }
    model.rows = rows;
    Ok(model)
}

/// Adds `x_ke <= o_ke` by eliminating, for every `o_ke = 0`, the variables
/// `x_ke`, `chi_ke` and `z_kae` for all `a`. Rows left without variables are
/// dropped.
pub fn apply_reduction(m: &MilpModel, o: &PredictionMatrix) -> Result<MilpModel> {
    let d = m.dims;
    if o.rows.len() != d.flows || o.rows.iter().any(|r| r.len() != d.edge_clouds) {
        return Err(Error::DimensionMismatch(format!(
            "reduction matrix is {}x{}, model needs {}x{}",
            o.rows.len(),
            o.rows.first().map_or(0, |r| r.len()),
            d.flows,
            d.edge_clouds
        )));
    }
    let eliminated = |v: &VarRef| match *v {
        VarRef::X { k, e } | VarRef::Chi { k, e } | VarRef::Z { k, e, .. } => !o.allows(k, e),
        _ => false,
    };
    let mut remap = vec![None; m.vars.len()];
    let mut vars = Vec::new();
    let mut fixed = m.fixed.clone();
    for (j, v) in m.vars.iter().enumerate() {
        if eliminated(&v.var) {
            fixed.push(v.var);
        } else {
            remap[j] = Some(vars.len());
            vars.push(*v);
        }
    }
    let mut rows = Vec::with_capacity(m.rows.len());
    for r in &m.rows {
        let coeffs: Vec<(usize, f64)> = r
            .coeffs
            .iter()
            .filter_map(|&(j, a)| remap[j].map(|nj| (nj, a)))
            .collect();
        if coeffs.is_empty() {
            let ok = match r.sense {
                Sense::Le => 0.0 <= r.rhs,
                Sense::Ge => 0.0 >= r.rhs,
                Sense::Eq => r.rhs == 0.0,
            };
            if ok {
                continue;
            }
        }
        rows.push(Row {
            kind: r.kind,
            coeffs,
            sense: r.sense,
            rhs: r.rhs,
        });
    }
    let mut out = MilpModel {
        vars,
        rows,
        fixed,
        ..m.clone()
    };
    out.rebuild_index();
    Ok(out)
}

/// Counts live (non-eliminated) variables, in total and per family.
pub fn count_variables(m: &MilpModel) -> VariableCounts {
    let mut c = VariableCounts::default();
    for v in &m.vars {
        match v.var.family() {
            Family::X => c.x += 1,
            Family::Y => c.y += 1,
            Family::Z => c.z += 1,
            Family::T => c.t += 1,
            Family::Chi => c.chi += 1,
        }
    }
    c.total = m.vars.len();
    c
}
