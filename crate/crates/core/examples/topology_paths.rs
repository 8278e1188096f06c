//! Build the default topology and print its degree profile and the hop
//! table between access routers and edge clouds.

use edgecache::topology::{build_topology, shortest_paths, TopologyConfig};

fn main() -> edgecache::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let t = build_topology(&TopologyConfig {
        seed,
        ..TopologyConfig::default()
    })?;
    let pt = shortest_paths(&t);
    let degrees: Vec<usize> = (0..t.nodes).map(|v| t.degree(v)).collect();
    println!("nodes={} links={} degrees={degrees:?}", t.nodes, t.num_links());
    println!("ARs={:?} ECs={:?}", t.access_routers, t.edge_clouds);
    for a in 0..pt.num_access_routers() {
        let hops: Vec<u32> = (0..pt.num_edge_clouds()).map(|e| pt.hop(a, e)).collect();
        println!("AR {a}: hops {hops:?}");
    }
    Ok(())
}
