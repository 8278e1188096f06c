use std::collections::VecDeque;

use edgecache::topology::{build_topology, shortest_paths, Topology, TopologyConfig, TopologyDocument};

/// Plain BFS over an adjacency list rebuilt from the link list.
fn bfs_distances(t: &Topology, src: usize) -> Vec<Option<u32>> {
    let mut adj = vec![Vec::new(); t.nodes];
    for l in &t.links {
        adj[l.a].push(l.b);
        adj[l.b].push(l.a);
    }
    let mut dist = vec![None; t.nodes];
    dist[src] = Some(0);
    let mut queue = VecDeque::from([src]);
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

fn random_config(i: u64) -> TopologyConfig {
    let nodes = 8 + (i % 8) as usize;
    TopologyConfig {
        nodes,
        min_degree: 1,
        max_degree: 5,
        access_routers: 3 + (i % 4) as usize,
        edge_clouds: 2 + (i % 4) as usize,
        overlap: (i % 2) as usize,
        links: nodes + (i % 5) as usize,
        seed: 1000 + i,
        max_attempts: 1000,
    }
}

#[test]
fn hop_counts_match_independent_bfs_on_100_graphs() {
    let mut checked = 0;
    for i in 0..100 {
        let t = build_topology(&random_config(i)).expect("config is satisfiable");
        assert!(t.is_connected());
        let pt = shortest_paths(&t);
        for (a, &an) in t.access_routers.iter().enumerate() {
            let dist = bfs_distances(&t, an);
            for (e, &en) in t.edge_clouds.iter().enumerate() {
                assert_eq!(Some(pt.hop(a, e)), dist[en], "graph {i}, a={a}, e={e}");
                assert_eq!(pt.hop(a, e) == 0, an == en);
                let links: u32 = (0..t.num_links()).map(|l| u32::from(pt.on_path(l, a, e))).sum();
                assert_eq!(links, pt.hop(a, e));
                checked += 1;
            }
        }
    }
    assert!(checked > 100);
}

#[test]
fn stored_paths_are_walks_of_hop_length() {
    let t = build_topology(&TopologyConfig::default()).unwrap();
    let pt = shortest_paths(&t);
    for (a, &an) in t.access_routers.iter().enumerate() {
        for (e, &en) in t.edge_clouds.iter().enumerate() {
            let path = &pt.paths[a][e];
            assert_eq!(path.first(), Some(&an));
            assert_eq!(path.last(), Some(&en));
            assert_eq!(path.len() as u32, pt.hop(a, e) + 1);
            for (w, &l) in path.windows(2).zip(pt.links_on_path(a, e)) {
                assert_eq!(t.link_between(w[0], w[1]), Some(l));
            }
        }
    }
}

#[test]
fn default_topology_meets_table_counts_and_degree_band() {
    let cfg = TopologyConfig::default();
    let t = build_topology(&cfg).unwrap();
    assert_eq!((t.num_access_routers(), t.num_edge_clouds(), t.num_links()), (7, 6, 20));
    assert!((0..t.nodes).all(|v| (2..=5).contains(&t.degree(v))));
    let ids: Vec<usize> = t.links.iter().map(|l| l.id).collect();
    assert_eq!(ids, (0..20).collect::<Vec<_>>());
}

#[test]
fn same_seed_gives_identical_serialisation() {
    let a = TopologyDocument::new(build_topology(&TopologyConfig::default()).unwrap());
    let b = TopologyDocument::new(build_topology(&TopologyConfig::default()).unwrap());
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let c = TopologyDocument::new(
        build_topology(&TopologyConfig {
            seed: 2,
            ..TopologyConfig::default()
        })
        .unwrap(),
    );
    assert_ne!(a.to_json().unwrap(), c.to_json().unwrap());
}
