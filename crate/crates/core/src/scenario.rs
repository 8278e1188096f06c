//! Problem instances (flows, capacities, mobility) and labelled datasets.

use std::path::Path;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::encode_image;
use crate::solver::{solve_instance, SolveLimits, SolveStatus};
use crate::topology::{PathTables, Topology};

pub const DATASET_FORMAT_VERSION: u32 = 1;

/// One content request: storage demand `s_k` (MB), bandwidth demand `b_k`
/// (Mbps) and the probability of attaching to each access router.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub storage: f64,
    pub bandwidth: f64,
    pub mobility: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    /// Fingerprint of the topology this instance was sampled on.
    pub topology: u64,
    pub flows: Vec<Flow>,
    /// Available storage `w_e` per edge cloud, MB.
    pub ec_capacity: Vec<f64>,
    /// Remaining capacity `c_l` per link, Mbps.
    pub link_capacity: Vec<f64>,
    /// Hosting-cost weight.
    pub alpha: f64,
    /// Transmission-cost weight.
    pub beta: f64,
    /// Hop count to the data center on a cache miss.
    pub miss_hops: u32,
}

impl Instance {
    pub fn num_flows(&self) -> usize {
        self.flows.len()
    }

    pub fn num_access_routers(&self) -> usize {
        self.flows.first().map_or(0, |f| f.mobility.len())
    }

    pub fn num_edge_clouds(&self) -> usize {
        self.ec_capacity.len()
    }

    pub fn num_links(&self) -> usize {
        self.link_capacity.len()
    }

    /// Storage ratio `q_ke = s_k / w_e`.
    pub fn storage_ratio(&self, k: usize, e: usize) -> f64 {
        self.flows[k].storage / self.ec_capacity[e]
    }

    /// Expected hop count of flow `k` retrieving from EC `e`.
    pub fn expected_hops(&self, pt: &PathTables, k: usize, e: usize) -> f64 {
        self.flows[k]
            .mobility
            .iter()
            .enumerate()
            .map(|(a, p)| p * pt.hop(a, e) as f64)
            .sum()
    }

    pub fn check_dimensions(&self, pt: &PathTables) -> Result<()> {
        let mismatch = |what: &str, a: usize, b: usize| {
            Err(Error::DimensionMismatch(format!("{what}: instance has {a}, path tables have {b}")))
        };
        if self.num_edge_clouds() != pt.num_edge_clouds() {
            return mismatch("edge clouds", self.num_edge_clouds(), pt.num_edge_clouds());
        }
        if self.num_links() != pt.num_links() {
            return mismatch("links", self.num_links(), pt.num_links());
        }
        if let Some(f) = self.flows.iter().find(|f| f.mobility.len() != pt.num_access_routers()) {
            return mismatch("access routers", f.mobility.len(), pt.num_access_routers());
        }
        Ok(())
    }

    /// Checks the value-range invariants of an instance.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::MalformedFile(msg));
        for (k, f) in self.flows.iter().enumerate() {
            if !(f.storage > 0.0 && f.bandwidth > 0.0) {
                return bad(format!("flow {k} has non-positive demand"));
            }
            if f.mobility.iter().any(|&p| p < 0.0) || (f.mobility.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad(format!("flow {k} mobility is not a distribution"));
            }
        }
        if self.ec_capacity.iter().chain(&self.link_capacity).any(|&c| c <= 0.0) {
            return bad("non-positive capacity".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.beta) {
            return bad("alpha/beta outside [0, 1]".into());
        }
        if self.miss_hops == 0 {
            return bad("miss hop count must be positive".into());
        }
        Ok(())
    }
}

/// How the cost weights are chosen for each sampled instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum WeightMode {
    Fixed { alpha: f64, beta: f64 },
    Sampled,
}

/// Closed sampling ranges for every instance parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub flows: usize,
    pub storage: (f64, f64),
    pub ec_capacity: (f64, f64),
    pub bandwidth: (f64, f64),
    pub link_capacity: (f64, f64),
    pub weights: WeightMode,
    pub miss_hops: u32,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            flows: 5,
            storage: (10.0, 50.0),
            ec_capacity: (100.0, 500.0),
            bandwidth: (1.0, 10.0),
            link_capacity: (50.0, 100.0),
            weights: WeightMode::Fixed {
                alpha: 0.5,
                beta: 0.5,
            },
            miss_hops: 12,
        }
    }
}

impl ScenarioParams {
    pub fn with_flows(mut self, flows: usize) -> Self {
        self.flows = flows;
        self
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Draws one instance: every scalar uniform on its range, mobility vectors
/// as normalised i.i.d. uniform(0, 1) draws.
pub fn sample_instance(t: &Topology, params: &ScenarioParams, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let na = t.num_access_routers();
    let flows = (0..params.flows)
        .map(|_| {
            let storage = uniform(&mut rng, params.storage);
            let bandwidth = uniform(&mut rng, params.bandwidth);
            let mut mobility: Vec<f64> = (0..na).map(|_| rng.gen::<f64>()).collect();
            let total: f64 = mobility.iter().sum();
            mobility.iter_mut().for_each(|p| *p /= total);
            Flow {
                storage,
                bandwidth,
                mobility,
            }
        })
        .collect();
    let ec_capacity = (0..t.num_edge_clouds())
        .map(|_| uniform(&mut rng, params.ec_capacity))
        .collect();
    let link_capacity = (0..t.num_links())
        .map(|_| uniform(&mut rng, params.link_capacity))
        .collect();
    let (alpha, beta) = match params.weights {
        WeightMode::Fixed { alpha, beta } => (alpha, beta),
        WeightMode::Sampled => (rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0)),
    };
    Instance {
        topology: t.fingerprint(),
        flows,
        ec_capacity,
        link_capacity,
        alpha,
        beta,
        miss_hops: params.miss_hops,
    }
}

/// Per-sample seed derivation (SplitMix64 step), shared by every generator.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Optimal placement used as a training label: `placement[k] = Some(e)` when
/// flow `k` is cached at EC `e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub placement: Vec<Option<usize>>,
    pub total_cost: f64,
}

impl Label {
    pub fn x_matrix(&self, num_edge_clouds: usize) -> Vec<Vec<u8>> {
        self.placement
            .iter()
            .map(|p| {
                let mut row = vec![0u8; num_edge_clouds];
                if let Some(e) = p {
                    row[*e] = 1;
                }
                row
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub seed: u64,
    pub instance: Instance,
    pub label: Label,
    /// Row-major encoded feature image, `|K| x (|A| + |E| + |L|)`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub image: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub version: u32,
    pub topology: Topology,
    pub params: ScenarioParams,
    pub samples: Vec<Sample>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Samples that hit the solver budget and were redrawn.
    pub resampled: usize,
}

impl Dataset {
    pub fn train_samples(&self) -> impl Iterator<Item = &Sample> {
        self.train.iter().map(|&i| &self.samples[i])
    }

    pub fn test_samples(&self) -> impl Iterator<Item = &Sample> {
        self.test.iter().map(|&i| &self.samples[i])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::MalformedFile(e.to_string()))?;
        let found = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != DATASET_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: DATASET_FORMAT_VERSION,
                found,
            });
        }
        let mut ds: Dataset = serde_json::from_value(value).map_err(|e| Error::MalformedFile(e.to_string()))?;
        ds.topology.rebuild_adjacency();
        Ok(ds)
    }
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, ds.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Dataset::from_json(&text)
}

/// Unlabelled instances together with the topology they were drawn on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSet {
    pub version: u32,
    pub topology: Topology,
    pub params: ScenarioParams,
    pub seeds: Vec<u64>,
    pub instances: Vec<Instance>,
}

impl InstanceSet {
    pub fn sample(t: &Topology, params: &ScenarioParams, n: usize, seed: u64) -> Self {
        let seeds: Vec<u64> = (0..n as u64).map(|i| derive_seed(seed, i)).collect();
        Self {
            version: DATASET_FORMAT_VERSION,
            topology: t.clone(),
            params: params.clone(),
            instances: seeds.iter().map(|&s| sample_instance(t, params, s)).collect(),
            seeds,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::MalformedFile(e.to_string()))?;
        let found = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != DATASET_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: DATASET_FORMAT_VERSION,
                found,
            });
        }
        let mut set: InstanceSet = serde_json::from_value(value).map_err(|e| Error::MalformedFile(e.to_string()))?;
        set.topology.rebuild_adjacency();
        Ok(set)
    }

    /// Labels every instance exactly. Instances whose solve runs out of budget
    /// are dropped; their count is returned in `Dataset::resampled`.
    pub fn label(&self, pt: &PathTables, limits: &SolveLimits) -> Result<Dataset> {
        let labelled: Vec<Option<Sample>> = self
            .instances
            .par_iter()
            .zip(&self.seeds)
            .map(|(inst, &seed)| {
                Ok(label_instance(inst, pt, limits)?.map(|label| Sample {
                    seed,
                    instance: inst.clone(),
                    label,
                    image: encode_image(inst).data,
                }))
            })
            .collect::<Result<_>>()?;
        let dropped = labelled.iter().filter(|s| s.is_none()).count();
        let samples: Vec<Sample> = labelled.into_iter().flatten().collect();
        let n = samples.len();
        if n < 2 {
            return Err(Error::EmptyDataset);
        }
        let n_test = test_split_size(n);
        Ok(Dataset {
            version: DATASET_FORMAT_VERSION,
            topology: self.topology.clone(),
            params: self.params.clone(),
            samples,
            train: (0..n - n_test).collect(),
            test: (n - n_test..n).collect(),
            resampled: dropped,
        })
    }
}

/// Test-set size for a dataset of `n` samples (10%, rounded up).
pub fn test_split_size(n: usize) -> usize {
    (n as f64 * 0.1).ceil() as usize
}

/// Labels one instance with its exact optimum. Returns `None` if the solver
/// ran out of budget.
pub fn label_instance(inst: &Instance, pt: &PathTables, limits: &SolveLimits) -> Result<Option<Label>> {
    let sol = solve_instance(inst, pt, limits)?;
    if sol.status != SolveStatus::Optimal {
        return Ok(None);
    }
    Ok(Some(Label {
        placement: sol.placement(),
        total_cost: sol.objective,
    }))
}

/// Samples `n` instances and labels each with its exact optimum. Samples whose
/// solve exceeds the budget are redrawn with a fresh seed; more than `n`
/// redraws in total is an error.
pub fn generate_dataset(
    t: &Topology,
    pt: &PathTables,
    n: usize,
    params: &ScenarioParams,
    limits: &SolveLimits,
    seed: u64,
) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::EmptyDataset);
    }
    let attempts_per_sample = 8u64;
    let results: Vec<Result<(Sample, usize)>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            for attempt in 0..attempts_per_sample {
                let s = derive_seed(seed, i * attempts_per_sample + attempt);
                let instance = sample_instance(t, params, s);
                if let Some(label) = label_instance(&instance, pt, limits)? {
                    let image = encode_image(&instance).data;
                    return Ok((
                        Sample {
                            seed: s,
                            instance,
                            label,
                            image,
                        },
                        attempt as usize,
                    ));
                }
            }
            Err(Error::SolverBudgetExhausted(format!(
                "sample {i} timed out {attempts_per_sample} times"
            )))
        })
        .collect();
    let mut samples = Vec::with_capacity(n);
    let mut resampled = 0;
    for r in results {
        let (s, redraws) = r?;
        resampled += redraws;
        samples.push(s);
    }
    if resampled > n {
        return Err(Error::SolverBudgetExhausted(format!("{resampled} redraws for {n} samples")));
    }
    let n_test = test_split_size(n);
    let train = (0..n - n_test).collect();
    let test = (n - n_test..n).collect();
    Ok(Dataset {
        version: DATASET_FORMAT_VERSION,
        topology: t.clone(),
        params: params.clone(),
        samples,
        train,
        test,
        resampled,
    })
}

/// Default labelling budget: generous enough for |K| = 5 instances.
pub fn default_label_limits() -> SolveLimits {
    SolveLimits {
        time: Some(Duration::from_secs(120)),
        nodes: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_topology, shortest_paths, TopologyConfig};

    fn topo() -> Topology {
        build_topology(&TopologyConfig::default()).unwrap()
    }

    #[test]
    fn sampled_values_in_table_ranges() {
        let t = topo();
        let inst = sample_instance(&t, &ScenarioParams::default(), 3);
        inst.validate().unwrap();
        assert_eq!(inst.num_flows(), 5);
        for f in &inst.flows {
            assert!((10.0..=50.0).contains(&f.storage));
            assert!((1.0..=10.0).contains(&f.bandwidth));
        }
        assert!(inst.ec_capacity.iter().all(|w| (100.0..=500.0).contains(w)));
        assert!(inst.link_capacity.iter().all(|c| (50.0..=100.0).contains(c)));
        assert_eq!(inst.miss_hops, 12);
        assert_eq!((inst.alpha, inst.beta), (0.5, 0.5));
    }

    #[test]
    fn single_router_mobility_is_certain() {
        let t = Topology::from_parts(3, &[(0, 1), (1, 2)], &[0], &[1, 2]).unwrap();
        let inst = sample_instance(&t, &ScenarioParams::default(), 9);
        assert!(inst.flows.iter().all(|f| f.mobility == vec![1.0]));
    }

    #[test]
    fn sampling_is_deterministic() {
        let t = topo();
        let p = ScenarioParams::default();
        assert_eq!(sample_instance(&t, &p, 11), sample_instance(&t, &p, 11));
        assert_ne!(sample_instance(&t, &p, 11), sample_instance(&t, &p, 12));
    }

    #[test]
    fn sampled_weights_mode() {
        let t = topo();
        let p = ScenarioParams {
            weights: WeightMode::Sampled,
            ..Default::default()
        };
        let inst = sample_instance(&t, &p, 5);
        inst.validate().unwrap();
        assert_ne!((inst.alpha, inst.beta), (0.5, 0.5));
    }

    #[test]
    fn split_arithmetic() {
        assert_eq!(test_split_size(1000), 100);
        assert_eq!(test_split_size(2), 1);
        assert_eq!(test_split_size(10), 1);
    }

    #[test]
    fn tiny_dataset_split_and_round_trip() {
        let t = topo();
        let pt = shortest_paths(&t);
        let ds = generate_dataset(&t, &pt, 2, &ScenarioParams::default(), &default_label_limits(), 4).unwrap();
        assert_eq!(ds.train, vec![0]);
        assert_eq!(ds.test, vec![1]);
        let back = Dataset::from_json(&ds.to_json().unwrap()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn dataset_errors() {
        let t = topo();
        let pt = shortest_paths(&t);
        assert!(matches!(
            generate_dataset(&t, &pt, 1, &ScenarioParams::default(), &default_label_limits(), 4),
            Err(Error::EmptyDataset)
        ));
        assert!(matches!(Dataset::from_json("{\"version\": 1, \"topo"), Err(Error::MalformedFile(_))));
        assert!(matches!(
            Dataset::from_json("{\"version\": 0}"),
            Err(Error::VersionMismatch { expected: 1, found: 0 })
        ));
    }
}
