//! Grayscale encoding of an instance: one row per flow, columns
//! `[p_ka | q_ke | r_kl]`, every entry in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Instance;
use crate::topology::PathTables;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImage {
    pub rows: usize,
    pub access_routers: usize,
    pub edge_clouds: usize,
    pub links: usize,
    /// Row-major, `rows * cols()` entries.
    pub data: Vec<f64>,
    /// Remaining EC storage after the commitments applied so far.
    pub residual_storage: Vec<f64>,
    /// Remaining link bandwidth after the commitments applied so far.
    pub residual_bandwidth: Vec<f64>,
    pub committed: Vec<bool>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den <= 0.0 {
        1.0
    } else {
        (num / den).min(1.0)
    }
}

impl FeatureImage {
    pub fn cols(&self) -> usize {
        self.access_routers + self.edge_clouds + self.links
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols())
    }

    pub fn get(&self, k: usize, c: usize) -> f64 {
        self.data[k * self.cols() + c]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let c = self.cols();
        &self.data[k * c..(k + 1) * c]
    }

    pub fn q(&self, k: usize, e: usize) -> f64 {
        self.get(k, self.access_routers + e)
    }

    pub fn r(&self, k: usize, l: usize) -> f64 {
        self.get(k, self.access_routers + self.edge_clouds + l)
    }

    fn refresh_row(&mut self, inst: &Instance, k: usize) {
        let c = self.cols();
        let base = k * c;
        let (na, ne) = (self.access_routers, self.edge_clouds);
        let flow = &inst.flows[k];
        for e in 0..ne {
            self.data[base + na + e] = ratio(flow.storage, self.residual_storage[e]);
        }
        for l in 0..self.links {
            self.data[base + na + ne + l] = ratio(flow.bandwidth, self.residual_bandwidth[l]);
        }
    }

    /// Rows `start..start + len` as a fresh image; rows past the end are zero.
    pub fn block(&self, start: usize, len: usize) -> FeatureImage {
        let c = self.cols();
        let mut data = vec![0.0; len * c];
        for i in 0..len {
            if start + i < self.rows {
                data[i * c..(i + 1) * c].copy_from_slice(self.row(start + i));
            }
        }
        FeatureImage {
            rows: len,
            data,
            committed: vec![false; len],
            ..self.clone()
        }
    }
}

pub fn encode_image(inst: &Instance) -> FeatureImage {
    let rows = inst.num_flows();
    let na = inst.flows.first().map_or(0, |f| f.mobility.len());
    let ne = inst.num_edge_clouds();
    let nl = inst.link_capacity.len();
    let mut img = FeatureImage {
        rows,
        access_routers: na,
        edge_clouds: ne,
        links: nl,
        data: vec![0.0; rows * (na + ne + nl)],
        residual_storage: inst.ec_capacity.clone(),
        residual_bandwidth: inst.link_capacity.clone(),
        committed: vec![false; rows],
    };
    let cols = img.cols();
    for k in 0..rows {
        for a in 0..na {
            img.data[k * cols + a] = inst.flows[k].mobility[a].min(1.0);
        }
        img.refresh_row(inst, k);
    }
    img
}

/// Applies commitments `(flow, EC, AR)`: storage leaves the EC, bandwidth
/// leaves every link of the stored path from the AR to the EC, and the `q`
/// and `r` blocks of uncommitted flows are recomputed from the residuals.
/// Committed rows keep their values.
pub fn update_image(img: &FeatureImage, inst: &Instance, pt: &PathTables, commitments: &[(usize, usize, usize)]) -> Result<FeatureImage> {
    let mut out = img.clone();
    if commitments.is_empty() {
        return Ok(out);
    }
    for &(k, e, a) in commitments {
        if k >= img.rows || k >= inst.num_flows() {
            return Err(Error::UnknownFlow(k));
        }
        if e >= img.edge_clouds {
            return Err(Error::UnknownEdgeCloud(e));
        }
        if a >= pt.num_access_routers() {
            return Err(Error::DimensionMismatch(format!("access router {a} out of range")));
        }
        out.residual_storage[e] -= inst.flows[k].storage;
        for &l in pt.links_on_path(a, e) {
            out.residual_bandwidth[l] -= inst.flows[k].bandwidth;
        }
        out.committed[k] = true;
    }
    for k in 0..out.rows {
        if !out.committed[k] {
            out.refresh_row(inst, k);
        }
    }
    Ok(out)
}

/// 8-bit binary PGM, pixel = `round(255 * entry)`. Debug output only.
pub fn export_pgm(img: &FeatureImage) -> Vec<u8> {
    let mut out = format!("P5 {} {} 255\n", img.cols(), img.rows).into_bytes();
    out.extend(img.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}
