//! Run configuration loaded from JSON. Keys follow the network parameter
//! table: degree per node, mobile end users, number of links, and so on.
//! Every key is optional; missing keys take the defaults below.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::BenchConfig;
use crate::error::{Error, Result};
use crate::model::DEFAULT_EPSILON_CAP;
use crate::neural::{Architecture, TrainHyper};
use crate::pipeline::{OMode, PipelineConfig, DEFAULT_DELTA};
use crate::scenario::{ScenarioParams, WeightMode};
use crate::solver::{PenaltyConfig, SolveLimits};
use crate::topology::TopologyConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub degree_per_node: [usize; 2],
    pub mobile_end_users: Vec<usize>,
    pub number_of_links: usize,
    pub number_of_access_routers: usize,
    pub number_of_edge_clouds: usize,
    /// `alpha`; `null` draws it uniformly from [0, 1] per instance.
    pub weight_of_hosting_a_cache: Option<f64>,
    /// `beta`; `null` draws it uniformly from [0, 1] per instance.
    pub weight_of_communication_cost: Option<f64>,
    pub threshold_of_prediction_probability: f64,
    /// MB.
    pub end_user_request_content_size: [f64; 2],
    /// MB.
    pub available_cache_size_in_ec: [f64; 2],
    /// Mbps.
    pub user_request_transmission_bandwidth: [f64; 2],
    /// Mbps.
    pub link_available_capacity: [f64; 2],

    pub number_of_nodes: usize,
    /// Nodes that are both an access router and an edge cloud.
    pub router_cloud_overlap: usize,
    pub topology_seed: u64,
    /// Hop count charged when a request misses every cache.
    pub miss_hops: u32,
    pub epsilon_cap: f64,
    /// Cost per violated constraint row; `null` means `beta * miss_hops * |K|`.
    pub penalty_per_violation: Option<f64>,
    pub time_limit_s: Option<f64>,
    pub dataset_samples: usize,
    pub bench_samples: usize,
    pub seed: u64,
    pub o_mode: OMode,
    pub architecture: ArchConfig,
    pub training: TrainHyper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    pub conv_channels: Vec<usize>,
    pub hidden: Vec<usize>,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            conv_channels: vec![16, 32],
            hidden: vec![128],
        }
    }
}

impl Default for Config {
    fn default() -> Self {
        Self {
            degree_per_node: [2, 5],
            mobile_end_users: vec![5, 10, 15, 20],
            number_of_links: 20,
            number_of_access_routers: 7,
            number_of_edge_clouds: 6,
            weight_of_hosting_a_cache: Some(0.5),
            weight_of_communication_cost: Some(0.5),
            threshold_of_prediction_probability: DEFAULT_DELTA,
            end_user_request_content_size: [10.0, 50.0],
            available_cache_size_in_ec: [100.0, 500.0],
            user_request_transmission_bandwidth: [1.0, 10.0],
            link_available_capacity: [50.0, 100.0],
            number_of_nodes: 13,
            router_cloud_overlap: 1,
            topology_seed: 1,
            miss_hops: 12,
            epsilon_cap: DEFAULT_EPSILON_CAP,
            penalty_per_violation: None,
            time_limit_s: Some(300.0),
            dataset_samples: 1000,
            bench_samples: 100,
            seed: 2024,
            o_mode: OMode::Threshold,
            architecture: ArchConfig::default(),
            training: TrainHyper::default(),
        }
    }
}

impl Config {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn validate(&self) -> Result<()> {
        let ranges = [
            self.end_user_request_content_size,
            self.available_cache_size_in_ec,
            self.user_request_transmission_bandwidth,
            self.link_available_capacity,
        ];
        if ranges.iter().any(|[lo, hi]| !(*lo > 0.0 && lo <= hi)) {
            return Err(Error::InfeasibleConfig("every range needs 0 < low <= high".into()));
        }
        if !(self.threshold_of_prediction_probability > 0.0 && self.threshold_of_prediction_probability < 1.0) {
            return Err(Error::InfeasibleConfig("threshold must lie in (0, 1)".into()));
        }
        for w in [self.weight_of_hosting_a_cache, self.weight_of_communication_cost].into_iter().flatten() {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InfeasibleConfig("cost weights must lie in [0, 1]".into()));
            }
        }
        if self.weight_of_hosting_a_cache.is_some() != self.weight_of_communication_cost.is_some() {
            return Err(Error::InfeasibleConfig("set both cost weights or neither".into()));
        }
        Ok(())
    }

    pub fn topology(&self) -> TopologyConfig {
        TopologyConfig {
            nodes: self.number_of_nodes,
            min_degree: self.degree_per_node[0],
            max_degree: self.degree_per_node[1],
            access_routers: self.number_of_access_routers,
            edge_clouds: self.number_of_edge_clouds,
            overlap: self.router_cloud_overlap,
            links: self.number_of_links,
            seed: self.topology_seed,
            ..TopologyConfig::default()
        }
    }

    pub fn scenario(&self, flows: usize) -> ScenarioParams {
        let pair = |[lo, hi]: [f64; 2]| (lo, hi);
        ScenarioParams {
            flows,
            storage: pair(self.end_user_request_content_size),
            ec_capacity: pair(self.available_cache_size_in_ec),
            bandwidth: pair(self.user_request_transmission_bandwidth),
            link_capacity: pair(self.link_available_capacity),
            weights: match (self.weight_of_hosting_a_cache, self.weight_of_communication_cost) {
                (Some(alpha), Some(beta)) => WeightMode::Fixed { alpha, beta },
                _ => WeightMode::Sampled,
            },
            miss_hops: self.miss_hops,
        }
    }

    /// Flow count the bank is trained on (the smallest configured one).
    pub fn bank_size(&self) -> usize {
        self.mobile_end_users.iter().copied().min().unwrap_or(5)
    }

    pub fn limits(&self) -> SolveLimits {
        self.time_limit_s.map(SolveLimits::seconds).unwrap_or_default()
    }

    pub fn penalty(&self) -> PenaltyConfig {
        PenaltyConfig {
            per_violation: self.penalty_per_violation,
            epsilon_cap: self.epsilon_cap,
        }
    }

    pub fn architecture(&self) -> Architecture {
        let cols = self.number_of_access_routers + self.number_of_edge_clouds + self.number_of_links;
        Architecture {
            input_rows: self.bank_size(),
            input_cols: cols,
            conv_channels: self.architecture.conv_channels.clone(),
            hidden: self.architecture.hidden.clone(),
            outputs: self.number_of_edge_clouds,
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            delta: self.threshold_of_prediction_probability,
            o_mode: self.o_mode,
            limits: self.limits(),
            penalty: self.penalty(),
        }
    }

    pub fn bench(&self) -> BenchConfig {
        BenchConfig {
            flows: self.mobile_end_users.clone(),
            samples: self.bench_samples,
            seed: self.seed,
            params: self.scenario(self.bank_size()),
            delta: self.threshold_of_prediction_probability,
            o_mode: self.o_mode,
            penalty: self.penalty(),
            limits: self.limits(),
            parallel: false,
        }
    }
}
