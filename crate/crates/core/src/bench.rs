//! Side-by-side evaluation of the exact solver, the CNN pipeline and the
//! greedy baseline over sampled test sets, one block of rows per flow count.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greedy::gca;
use crate::model::Dims;
use crate::neural::CnnBank;
use crate::pipeline::{solve_with_cnn, OMode, PipelineConfig, DEFAULT_DELTA};
use crate::scenario::{derive_seed, sample_instance, Instance, ScenarioParams};
use crate::solver::{evaluate_assignment, solve_instance, PenaltyConfig, SolveLimits, SolveStatus};
use crate::topology::{shortest_paths, PathTables, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Milp,
    Cnn,
    Gca,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Milp => "MILP",
            Method::Cnn => "CNN",
            Method::Gca => "GCA",
        }
    }
}

/// `|X ∩ X̂| / |X̂|`. An empty candidate scores 1 against an empty optimum
/// and 0 otherwise.
pub fn precision(optimal: &[(usize, usize)], candidate: &[(usize, usize)]) -> f64 {
    if candidate.is_empty() {
        return if optimal.is_empty() { 1.0 } else { 0.0 };
    }
    let hits = candidate.iter().filter(|p| optimal.contains(p)).count();
    hits as f64 / candidate.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub flows: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    pub params: ScenarioParams,
    pub delta: f64,
    pub o_mode: OMode,
    pub penalty: PenaltyConfig,
    pub limits: SolveLimits,
    /// Solve samples concurrently. Timing columns are only comparable when
    /// this is off.
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            flows: vec![5, 10, 15, 20],
            samples: 100,
            seed: 2024,
            params: ScenarioParams::default(),
            delta: DEFAULT_DELTA,
            o_mode: OMode::Threshold,
            penalty: PenaltyConfig::default(),
            limits: SolveLimits::seconds(300.0),
            parallel: false,
        }
    }
}

/// Per-sample measurements behind the aggregate rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub flows: usize,
    pub index: usize,
    pub milp_time: f64,
    pub milp_tc: f64,
    pub milp_status: SolveStatus,
    pub milp_variables: usize,
    pub cnn_time: f64,
    pub cnn_tc: f64,
    pub cnn_feasible: bool,
    pub cnn_precision: f64,
    pub cnn_variables: usize,
    pub cnn_status: Option<SolveStatus>,
    pub gca_time: f64,
    pub gca_tc: f64,
    pub gca_feasible: bool,
    pub gca_precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub flows: usize,
    pub method: Method,
    pub mean_time: f64,
    /// Mean of the penalty-inclusive total cost.
    pub mean_tc: f64,
    pub precision: Option<f64>,
    pub feasible_ratio: f64,
    pub max_diff: Option<f64>,
    pub mean_variables: Option<f64>,
    pub samples: usize,
    /// Samples whose exact reference hit the time limit; they are left out
    /// of precision and max-diff.
    pub reference_timeouts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchMeta {
    pub seed: u64,
    pub topology: u64,
    pub config_hash: String,
    pub penalty: PenaltyConfig,
    pub weights: crate::scenario::WeightMode,
    pub delta: f64,
    pub o_mode: OMode,
    pub limits: SolveLimits,
    pub execution: String,
    pub mean_tc_includes_penalty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub meta: BenchMeta,
    pub rows: Vec<MethodRow>,
    pub records: Vec<SampleRecord>,
}

impl BenchReport {
    pub fn row(&self, flows: usize, method: Method) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.flows == flows && r.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record([
            "flows",
            "method",
            "mean_time_s",
            "mean_tc",
            "precision",
            "feasible_ratio",
            "max_diff",
            "mean_variables",
            "samples",
            "reference_timeouts",
        ])
        .map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        for r in &self.rows {
            w.write_record([
                r.flows.to_string(),
                r.method.name().to_string(),
                format!("{:.6}", r.mean_time),
                format!("{:.6}", r.mean_tc),
                opt(r.precision),
                format!("{:.6}", r.feasible_ratio),
                opt(r.max_diff),
                opt(r.mean_variables),
                r.samples.to_string(),
                r.reference_timeouts.to_string(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::MalformedFile(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::MalformedFile(e.to_string())
}

fn fnv_hex(text: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

/// Test instances for every flow count, drawn on the benchmark's own seeds.
pub fn sample_test_sets(topology: &Topology, cfg: &BenchConfig) -> Vec<(usize, Vec<Instance>)> {
    cfg.flows
        .iter()
        .map(|&k| {
            let params = cfg.params.clone().with_flows(k);
            let set = (0..cfg.samples)
                .map(|i| sample_instance(topology, &params, derive_seed(cfg.seed, (k as u64) << 32 | i as u64)))
                .collect();
            (k, set)
        })
        .collect()
}

fn run_sample(inst: &Instance, pt: &PathTables, bank: &CnnBank, cfg: &BenchConfig, index: usize) -> Result<SampleRecord> {
    let flows = inst.num_flows();
    let t0 = Instant::now();
    let exact = solve_instance(inst, pt, &cfg.limits)?;
    let milp_time = t0.elapsed().as_secs_f64();
    let reference = exact.hosted_pairs();
    let milp_eval = evaluate_assignment(inst, pt, &exact.x, &exact.z, &cfg.penalty);

    let pcfg = PipelineConfig {
        delta: cfg.delta,
        o_mode: cfg.o_mode,
        limits: cfg.limits,
        penalty: cfg.penalty,
    };
    let cnn = solve_with_cnn(inst, pt, bank, &pcfg)?;

    let t1 = Instant::now();
    let greedy = gca(inst, pt, &cfg.penalty);
    let gca_time = t1.elapsed().as_secs_f64();

    let dims = Dims {
        flows,
        access_routers: pt.num_access_routers(),
        edge_clouds: pt.num_edge_clouds(),
        links: pt.num_links(),
    };
    Ok(SampleRecord {
        flows,
        index,
        milp_time,
        milp_tc: milp_eval.tc_with_penalty,
        milp_status: exact.status,
        milp_variables: dims.full_variable_count(),
        cnn_time: cnn.total_time,
        cnn_tc: cnn.solution.tc_with_penalty,
        cnn_feasible: cnn.solution.feasible(),
        cnn_precision: precision(&reference, &cnn.solution.hosted_pairs()),
        cnn_variables: cnn.reduced_variables,
        cnn_status: cnn.solution.status,
        gca_time,
        gca_tc: greedy.tc_with_penalty,
        gca_feasible: greedy.feasible(),
        gca_precision: precision(&reference, &greedy.hosted_pairs()),
    })
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn aggregate(flows: usize, records: &[SampleRecord]) -> Vec<MethodRow> {
    let n = records.len();
    let trusted: Vec<&SampleRecord> = records.iter().filter(|r| r.milp_status == SolveStatus::Optimal).collect();
    let timeouts = n - trusted.len();
    let max_diff = |f: fn(&SampleRecord) -> f64| {
        trusted
            .iter()
            .map(|r| f(r) - r.milp_tc)
            .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))))
    };
    let ratio = |f: fn(&SampleRecord) -> bool| {
        if n == 0 {
            0.0
        } else {
            records.iter().filter(|r| f(r)).count() as f64 / n as f64
        }
    };
    vec![
        MethodRow {
            flows,
            method: Method::Milp,
            mean_time: mean(records.iter().map(|r| r.milp_time)),
            mean_tc: mean(records.iter().map(|r| r.milp_tc)),
            precision: Some(1.0),
            feasible_ratio: if n == 0 { 0.0 } else { 1.0 },
            max_diff: None,
            mean_variables: Some(mean(records.iter().map(|r| r.milp_variables as f64))),
            samples: n,
            reference_timeouts: timeouts,
        },
        MethodRow {
            flows,
            method: Method::Cnn,
            mean_time: mean(records.iter().map(|r| r.cnn_time)),
            mean_tc: mean(records.iter().map(|r| r.cnn_tc)),
            precision: Some(mean(trusted.iter().map(|r| r.cnn_precision))),
            feasible_ratio: ratio(|r| r.cnn_feasible),
            max_diff: max_diff(|r| r.cnn_tc),
            mean_variables: Some(mean(records.iter().map(|r| r.cnn_variables as f64))),
            samples: n,
            reference_timeouts: timeouts,
        },
        MethodRow {
            flows,
            method: Method::Gca,
            mean_time: mean(records.iter().map(|r| r.gca_time)),
            mean_tc: mean(records.iter().map(|r| r.gca_tc)),
            precision: Some(mean(trusted.iter().map(|r| r.gca_precision))),
            feasible_ratio: ratio(|r| r.gca_feasible),
            max_diff: max_diff(|r| r.gca_tc),
            mean_variables: None,
            samples: n,
            reference_timeouts: timeouts,
        },
    ]
}

/// Runs all three methods on the given test sets.
pub fn run_benchmark_on(
    topology: &Topology,
    sets: &[(usize, Vec<Instance>)],
    bank: Option<&CnnBank>,
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    let bank = bank.ok_or_else(|| Error::MissingBank("the benchmark needs a trained bank".into()))?;
    let pt = shortest_paths(topology);
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (k, set) in sets {
        let recs: Vec<SampleRecord> = if cfg.parallel {
            set.par_iter()
                .enumerate()
                .map(|(i, inst)| run_sample(inst, &pt, bank, cfg, i))
                .collect::<Result<_>>()?
        } else {
            set.iter()
                .enumerate()
                .map(|(i, inst)| run_sample(inst, &pt, bank, cfg, i))
                .collect::<Result<_>>()?
        };
        rows.extend(aggregate(*k, &recs));
        records.extend(recs);
    }
    let meta = BenchMeta {
        seed: cfg.seed,
        topology: topology.fingerprint(),
        config_hash: fnv_hex(&serde_json::to_string(cfg)?),
        penalty: cfg.penalty,
        weights: cfg.params.weights,
        delta: cfg.delta,
        o_mode: cfg.o_mode,
        limits: cfg.limits,
        execution: if cfg.parallel { "parallel" } else { "serial" }.into(),
        mean_tc_includes_penalty: true,
    };
    Ok(BenchReport { meta, rows, records })
}

/// Samples fresh test sets and runs [`run_benchmark_on`].
pub fn run_benchmark(topology: &Topology, bank: Option<&CnnBank>, cfg: &BenchConfig) -> Result<BenchReport> {
    if bank.is_none() {
        return Err(Error::MissingBank("the benchmark needs a trained bank".into()));
    }
    let sets = sample_test_sets(topology, cfg);
    run_benchmark_on(topology, &sets, bank, cfg)
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn emit_report(report: &BenchReport, dir: impl AsRef<Path>, stem: &str) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    std::fs::write(&csv_path, report.to_csv()?).map_err(|e| Error::io(&csv_path, e))?;
    std::fs::write(&json_path, report.to_json()?).map_err(|e| Error::io(&json_path, e))?;
    Ok((csv_path, json_path))
}
