//! Encode an instance as a grayscale image, commit one flow, and write both
//! states as PGM files.

use edgecache::features::{encode_image, export_pgm, update_image};
use edgecache::scenario::{sample_instance, ScenarioParams};
use edgecache::topology::{build_topology, shortest_paths, TopologyConfig};

fn main() -> edgecache::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| ".".into());
    let t = build_topology(&TopologyConfig::default())?;
    let pt = shortest_paths(&t);
    let inst = sample_instance(&t, &ScenarioParams::default(), 3);
    let img = encode_image(&inst);
    let (rows, cols) = img.shape();
    println!("image {rows}x{cols}");
    for k in 0..rows {
        let row: Vec<String> = img.row(k).iter().map(|v| format!("{v:.2}")).collect();
        println!("{}", row.join(" "));
    }
    let next = update_image(&img, &inst, &pt, &[(0, 0, 0)])?;
    println!("q after committing flow 0 to EC 0: {:?}", (1..rows).map(|k| next.q(k, 0)).collect::<Vec<_>>());
    for (name, im) in [("before.pgm", &img), ("after.pgm", &next)] {
        let path = std::path::Path::new(&out).join(name);
        std::fs::write(&path, export_pgm(im)).map_err(|e| edgecache::Error::io(&path, e))?;
    }
    Ok(())
}
