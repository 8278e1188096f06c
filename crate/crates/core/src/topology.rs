//! Network graphs with designated access routers and edge clouds, plus the
//! shortest-path tables (hop counts and link/path incidence) derived from them.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TOPOLOGY_FORMAT_VERSION: u32 = 1;

/// Generator settings. Defaults follow the reference evaluation network:
/// 7 access routers, 6 edge clouds, 20 links, node degree in 2..=5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    pub nodes: usize,
    pub min_degree: usize,
    pub max_degree: usize,
    pub access_routers: usize,
    pub edge_clouds: usize,
    /// Number of nodes that are both an access router and an edge cloud.
    pub overlap: usize,
    pub links: usize,
    pub seed: u64,
    pub max_attempts: usize,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            nodes: 13,
            min_degree: 2,
            max_degree: 5,
            access_routers: 7,
            edge_clouds: 6,
            overlap: 1,
            links: 20,
            seed: 1,
            max_attempts: 1000,
        }
    }
}

/// An undirected link between two nodes; `id` is its position in `Topology::links`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub id: usize,
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: usize,
    pub links: Vec<Link>,
    pub access_routers: Vec<usize>,
    pub edge_clouds: Vec<usize>,
    pub seed: u64,
    #[serde(skip)]
    adjacency: Vec<Vec<usize>>,
}

impl Topology {
    /// Builds a topology from explicit parts. Links are normalised and
    /// renumbered in lexicographic order of their endpoint pairs.
    pub fn from_parts(
        nodes: usize,
        links: &[(usize, usize)],
        access_routers: &[usize],
        edge_clouds: &[usize],
    ) -> Result<Self> {
        let mut pairs = BTreeSet::new();
        for &(u, v) in links {
            if u >= nodes || v >= nodes || u == v {
                return Err(Error::InfeasibleConfig(format!("invalid link ({u}, {v})")));
            }
            if !pairs.insert((u.min(v), u.max(v))) {
                return Err(Error::InfeasibleConfig(format!("duplicate link ({u}, {v})")));
            }
        }
        let check = |set: &[usize], what: &str| -> Result<Vec<usize>> {
            let sorted: BTreeSet<usize> = set.iter().copied().collect();
            if sorted.len() != set.len() || sorted.iter().any(|&n| n >= nodes) {
                return Err(Error::InfeasibleConfig(format!("invalid {what} set {set:?}")));
            }
            Ok(sorted.into_iter().collect())
        };
        let access_routers = check(access_routers, "access router")?;
        let edge_clouds = check(edge_clouds, "edge cloud")?;
        let links = pairs
            .into_iter()
            .enumerate()
            .map(|(id, (a, b))| Link { id, a, b })
            .collect();
        let mut topo = Topology {
            nodes,
            links,
            access_routers,
            edge_clouds,
            seed: 0,
            adjacency: Vec::new(),
        };
        topo.rebuild_adjacency();
        if !topo.is_connected() {
            return Err(Error::InfeasibleConfig("graph is not connected".into()));
        }
        Ok(topo)
    }

    pub(crate) fn rebuild_adjacency(&mut self) {
        let mut adj = vec![Vec::new(); self.nodes];
        for l in &self.links {
            adj[l.a].push(l.b);
            adj[l.b].push(l.a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        self.adjacency = adj;
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn link_between(&self, u: usize, v: usize) -> Option<usize> {
        let key = (u.min(v), u.max(v));
        self.links
            .binary_search_by(|l| (l.a, l.b).cmp(&key))
            .ok()
            .map(|i| self.links[i].id)
    }

    pub fn is_connected(&self) -> bool {
        if self.nodes == 0 {
            return true;
        }
        bfs_distances(&self.adjacency, 0).iter().all(|d| d.is_some())
    }

    pub fn num_access_routers(&self) -> usize {
        self.access_routers.len()
    }

    pub fn num_edge_clouds(&self) -> usize {
        self.edge_clouds.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    /// Stable 64-bit FNV-1a fingerprint of the graph and the AR/EC designations.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        feed(self.nodes as u64);
        for l in &self.links {
            feed(l.a as u64);
            feed(l.b as u64);
        }
        feed(u64::MAX);
        self.access_routers.iter().for_each(|&a| feed(a as u64));
        feed(u64::MAX);
        self.edge_clouds.iter().for_each(|&e| feed(e as u64));
        h
    }
}

fn bfs_distances(adj: &[Vec<usize>], source: usize) -> Vec<Option<u32>> {
    let mut dist = vec![None; adj.len()];
    let mut queue = VecDeque::new();
    dist[source] = Some(0);
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Generates a random connected topology: a random spanning tree first, then
/// random extra links until the link target is met while respecting the
/// degree band. Whole attempts are rejected and retried on failure.
pub fn build_topology(cfg: &TopologyConfig) -> Result<Topology> {
    validate_config(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.max_attempts {
        if let Some(pairs) = try_generate_links(cfg, &mut rng) {
            let mut ids: Vec<usize> = (0..cfg.nodes).collect();
            ids.shuffle(&mut rng);
            let edge_clouds: Vec<usize> = ids[..cfg.edge_clouds].to_vec();
            let mut access_routers: Vec<usize> = ids[..cfg.overlap].to_vec();
            access_routers.extend_from_slice(
                &ids[cfg.edge_clouds..cfg.edge_clouds + cfg.access_routers - cfg.overlap],
            );
            let mut topo = Topology::from_parts(cfg.nodes, &pairs, &access_routers, &edge_clouds)?;
            topo.seed = cfg.seed;
            return Ok(topo);
        }
    }
    Err(Error::RejectionLimitExceeded(cfg.max_attempts))
}

fn validate_config(cfg: &TopologyConfig) -> Result<()> {
    let n = cfg.nodes;
    let fail = |msg: String| Err(Error::InfeasibleConfig(msg));
    if n == 0 {
        return fail("node count must be positive".into());
    }
    if cfg.access_routers == 0 || cfg.edge_clouds == 0 {
        return fail("need at least one access router and one edge cloud".into());
    }
    if cfg.overlap > cfg.access_routers.min(cfg.edge_clouds) {
        return fail(format!("overlap {} exceeds |A| or |E|", cfg.overlap));
    }
    if cfg.access_routers + cfg.edge_clouds - cfg.overlap > n {
        return fail(format!(
            "{} nodes cannot host {} ARs and {} ECs with overlap {}",
            n, cfg.access_routers, cfg.edge_clouds, cfg.overlap
        ));
    }
    if cfg.min_degree > cfg.max_degree {
        return fail("empty degree band".into());
    }
    if n > 1 && (cfg.max_degree == 0 || cfg.min_degree >= n || cfg.max_degree < 1) {
        return fail("degree band infeasible for node count".into());
    }
    if n > 2 && cfg.max_degree < 2 {
        return fail("max degree 1 cannot connect more than two nodes".into());
    }
    let min_links = (n - 1).max((n * cfg.min_degree).div_ceil(2));
    let max_links = (n * cfg.max_degree / 2).min(n * (n - 1) / 2);
    if cfg.links < min_links || cfg.links > max_links {
        return fail(format!(
            "link target {} outside feasible range [{min_links}, {max_links}]",
            cfg.links
        ));
    }
    Ok(())
}

fn try_generate_links(cfg: &TopologyConfig, rng: &mut ChaCha8Rng) -> Option<Vec<(usize, usize)>> {
    let n = cfg.nodes;
    let mut degree = vec![0usize; n];
    let mut adjacent = vec![vec![false; n]; n];
    let mut pairs = Vec::with_capacity(cfg.links);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    for i in 1..n {
        let open: Vec<usize> = order[..i]
            .iter()
            .copied()
            .filter(|&u| degree[u] < cfg.max_degree)
            .collect();
        let parent = *open.choose(rng)?;
        let child = order[i];
        degree[parent] += 1;
        degree[child] += 1;
        adjacent[parent][child] = true;
        adjacent[child][parent] = true;
        pairs.push((parent, child));
    }

    while pairs.len() < cfg.links {
        let starved: Vec<usize> = (0..n).filter(|&u| degree[u] < cfg.min_degree).collect();
        let sources: Vec<usize> = if starved.is_empty() {
            (0..n).filter(|&u| degree[u] < cfg.max_degree).collect()
        } else {
            starved
        };
        let mut candidates = Vec::new();
        for &u in &sources {
            for v in 0..n {
                if v != u && !adjacent[u][v] && degree[v] < cfg.max_degree && degree[u] < cfg.max_degree {
                    candidates.push((u.min(v), u.max(v)));
                }
            }
        }
        candidates.sort_unstable();
        candidates.dedup();
        let (u, v) = *candidates.choose(rng)?;
        degree[u] += 1;
        degree[v] += 1;
        adjacent[u][v] = true;
        adjacent[v][u] = true;
        pairs.push((u, v));
    }

    let in_band = degree
        .iter()
        .all(|&d| (n == 1 || d >= cfg.min_degree) && d <= cfg.max_degree);
    in_band.then_some(pairs)
}

/// Hop counts `N[a][e]`, link/path incidence `B[l][a][e]` and the stored
/// shortest path for every (access router, edge cloud) pair. Indices `a` and
/// `e` are positions in `Topology::access_routers` / `Topology::edge_clouds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTables {
    pub hops: Vec<Vec<u32>>,
    pub incidence: Vec<Vec<Vec<u8>>>,
    pub paths: Vec<Vec<Vec<usize>>>,
    pub path_links: Vec<Vec<Vec<usize>>>,
}

impl PathTables {
    pub fn num_access_routers(&self) -> usize {
        self.hops.len()
    }

    pub fn num_edge_clouds(&self) -> usize {
        self.hops.first().map_or(0, |r| r.len())
    }

    pub fn num_links(&self) -> usize {
        self.incidence.len()
    }

    pub fn hop(&self, a: usize, e: usize) -> u32 {
        self.hops[a][e]
    }

    pub fn on_path(&self, l: usize, a: usize, e: usize) -> bool {
        self.incidence[l][a][e] == 1
    }

    /// Links on the stored path from AR `a` to EC `e`, in path order.
    pub fn links_on_path(&self, a: usize, e: usize) -> &[usize] {
        &self.path_links[a][e]
    }
}

/// BFS shortest paths for every (AR, EC) pair. Among equal-length paths the
/// lexicographically smallest node sequence (starting at the AR) is stored.
pub fn shortest_paths(t: &Topology) -> PathTables {
    let na = t.num_access_routers();
    let ne = t.num_edge_clouds();
    let nl = t.num_links();
    let mut hops = vec![vec![0u32; ne]; na];
    let mut incidence = vec![vec![vec![0u8; ne]; na]; nl];
    let mut paths = vec![vec![Vec::new(); ne]; na];
    let mut path_links = vec![vec![Vec::new(); ne]; na];

    for (ei, &e) in t.edge_clouds.iter().enumerate() {
        let dist = bfs_distances(&t.adjacency, e);
        for (ai, &a) in t.access_routers.iter().enumerate() {
            let d = dist[a].expect("topology must be connected");
            hops[ai][ei] = d;
            let mut path = vec![a];
            let mut cur = a;
            while cur != e {
                let need = dist[cur].unwrap() - 1;
                // Neighbour lists are sorted, so the first hit is the smallest id.
                let next = *t.adjacency[cur]
                    .iter()
                    .find(|&&v| dist[v] == Some(need))
                    .expect("BFS predecessor exists");
                let l = t.link_between(cur, next).unwrap();
                incidence[l][ai][ei] = 1;
                path_links[ai][ei].push(l);
                path.push(next);
                cur = next;
            }
            paths[ai][ei] = path;
        }
    }

    PathTables {
        hops,
        incidence,
        paths,
        path_links,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyDocument {
    pub version: u32,
    pub topology: Topology,
    pub paths: PathTables,
}

impl TopologyDocument {
    pub fn new(topology: Topology) -> Self {
        let paths = shortest_paths(&topology);
        Self {
            version: TOPOLOGY_FORMAT_VERSION,
            topology,
            paths,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::MalformedFile(e.to_string()))?;
        let found = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != TOPOLOGY_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: TOPOLOGY_FORMAT_VERSION,
                found,
            });
        }
        let mut doc: TopologyDocument =
            serde_json::from_value(value).map_err(|e| Error::MalformedFile(e.to_string()))?;
        doc.topology.rebuild_adjacency();
        Ok(doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

impl Topology {
    /// Restores derived state after deserialising a bare `Topology`.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut t: Topology = serde_json::from_str(text)?;
        t.rebuild_adjacency();
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Topology {
        // a(0) - v(1) - e(2)
        Topology::from_parts(3, &[(0, 1), (1, 2)], &[0], &[1, 2]).unwrap()
    }

    #[test]
    fn table_one_config_counts() {
        let t = build_topology(&TopologyConfig::default()).unwrap();
        assert_eq!(t.num_access_routers(), 7);
        assert_eq!(t.num_edge_clouds(), 6);
        assert_eq!(t.num_links(), 20);
        assert!(t.is_connected());
        for n in 0..t.nodes {
            assert!((2..=5).contains(&t.degree(n)), "degree {}", t.degree(n));
        }
        let overlap = t
            .access_routers
            .iter()
            .filter(|a| t.edge_clouds.contains(a))
            .count();
        assert_eq!(overlap, 1);
        for (i, l) in t.links.iter().enumerate() {
            assert_eq!(l.id, i);
        }
    }

    #[test]
    fn same_seed_same_topology() {
        let cfg = TopologyConfig::default();
        let a = TopologyDocument::new(build_topology(&cfg).unwrap());
        let b = TopologyDocument::new(build_topology(&cfg).unwrap());
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let other = build_topology(&TopologyConfig { seed: 2, ..cfg }).unwrap();
        assert_ne!(a.topology.links, other.links);
    }

    #[test]
    fn infeasible_configs_rejected() {
        let cfg = TopologyConfig {
            nodes: 5,
            ..TopologyConfig::default()
        };
        assert!(matches!(build_topology(&cfg), Err(Error::InfeasibleConfig(_))));
        let cfg = TopologyConfig {
            nodes: 13,
            links: 40,
            ..TopologyConfig::default()
        };
        assert!(matches!(build_topology(&cfg), Err(Error::InfeasibleConfig(_))));
        assert!(Topology::from_parts(3, &[(0, 1)], &[0], &[2]).is_err());
    }

    #[test]
    fn two_hop_line() {
        let t = Topology::from_parts(3, &[(0, 1), (1, 2)], &[0], &[2]).unwrap();
        let pt = shortest_paths(&t);
        assert_eq!(pt.hop(0, 0), 2);
        assert_eq!(pt.incidence[0][0][0], 1);
        assert_eq!(pt.incidence[1][0][0], 1);
        assert_eq!(pt.paths[0][0], vec![0, 1, 2]);
    }

    #[test]
    fn colocated_router_and_cloud() {
        let t = Topology::from_parts(3, &[(0, 1), (1, 2)], &[1], &[1, 2]).unwrap();
        let pt = shortest_paths(&t);
        assert_eq!(pt.hop(0, 0), 0);
        assert!((0..t.num_links()).all(|l| !pt.on_path(l, 0, 0)));
        assert_eq!(pt.hop(0, 1), 1);
    }

    #[test]
    fn diamond_tie_break_is_lexicographic() {
        // 0 -> {1,2} -> 3, both 2-hop paths; 0-1-3 must win.
        let t = Topology::from_parts(4, &[(0, 2), (2, 3), (0, 1), (1, 3)], &[0], &[3]).unwrap();
        let pt = shortest_paths(&t);
        assert_eq!(pt.paths[0][0], vec![0, 1, 3]);
        let l01 = t.link_between(0, 1).unwrap();
        let l13 = t.link_between(1, 3).unwrap();
        assert_eq!(pt.links_on_path(0, 0), &[l01, l13]);
    }

    #[test]
    fn fixture_hops() {
        let t = path3();
        let pt = shortest_paths(&t);
        assert_eq!(pt.hops, vec![vec![1, 2]]);
    }

    #[test]
    fn document_version_checked() {
        let doc = TopologyDocument::new(path3());
        let text = doc.to_json().unwrap().replacen("\"version\": 1", "\"version\": 0", 1);
        assert!(matches!(
            TopologyDocument::from_json(&text),
            Err(Error::VersionMismatch { found: 0, .. })
        ));
        let back = TopologyDocument::from_json(&doc.to_json().unwrap()).unwrap();
        assert_eq!(back.topology.neighbors(1), &[0, 2]);
    }
}
