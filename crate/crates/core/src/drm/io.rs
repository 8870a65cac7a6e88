//! Binary roadmap file.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic "SHOPDRM\0"            8 bytes
//! version                      u32
//! robot digest                 32 bytes (SHA-256 of the compact robot JSON)
//! dof, nodes, edges            3 x u32
//! roadmap edge step            f64
//! collision-map edge step      f64
//! grid origin, resolution      4 x f64
//! grid lo                      3 x i32
//! grid dims                    3 x u32
//! node array                   nodes x dof x f64
//! edge CSR offsets             (nodes + 1) x u32, edges (a, b) with a < b grouped by a
//! edge CSR targets             edges x u32
//! static voxels                id list
//! self-blocked edges           id list
//! per-voxel node lists         one id list per grid voxel, x-major order
//! per-voxel edge lists         one id list per grid voxel
//! checksum                     SHA-256 of everything above
//! ```
//!
//! An id list is a LEB128 count followed by LEB128 deltas of the ascending ids
//! (the first delta is taken from zero).

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};

use super::cmap::{CollisionMap, GridSpec3};
use super::roadmap::Roadmap;
use super::DrmError;
use crate::geometry::Vec3;
use crate::kinematics::RobotModel;

pub const MAGIC: &[u8; 8] = b"SHOPDRM\0";
pub const FORMAT_VERSION: u32 = 1;

fn put_leb(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn put_list(out: &mut Vec<u8>, ids: &[u32]) {
    put_leb(out, ids.len() as u64);
    let mut prev = 0u32;
    for &id in ids {
        put_leb(out, (id - prev) as u64);
        prev = id;
    }
}

fn bad(msg: impl Into<String>) -> DrmError {
    DrmError::Format(msg.into())
}

fn get_leb(r: &mut Cursor<&[u8]>) -> Result<u64, DrmError> {
    let mut v = 0u64;
    for shift in (0..64).step_by(7) {
        let b = r.read_u8().map_err(|_| bad("truncated file"))?;
        v |= ((b & 0x7f) as u64) << shift;
        if b & 0x80 == 0 {
            return Ok(v);
        }
    }
    Err(bad("malformed varint"))
}

fn get_list(r: &mut Cursor<&[u8]>, bound: usize, out: &mut Vec<u32>) -> Result<usize, DrmError> {
    let n = get_leb(r)? as usize;
    let mut cur = 0u64;
    for i in 0..n {
        let d = get_leb(r)?;
        if i > 0 && d == 0 {
            return Err(bad("id list not strictly ascending"));
        }
        cur += d;
        if cur as usize >= bound {
            return Err(bad("id out of range"));
        }
        out.push(cur as u32);
    }
    Ok(n)
}

/// Serializes the roadmap and its collision map.
pub fn encode(roadmap: &Roadmap, cmap: &CollisionMap) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.write_u32::<LE>(FORMAT_VERSION).unwrap();
    out.extend_from_slice(roadmap.robot_digest());
    let n = roadmap.node_count();
    for v in [roadmap.dof(), n, roadmap.edge_count()] {
        out.write_u32::<LE>(v as u32).unwrap();
    }
    out.write_f64::<LE>(roadmap.edge_step()).unwrap();
    out.write_f64::<LE>(cmap.edge_step).unwrap();
    let g = &cmap.grid;
    for v in [g.origin.x, g.origin.y, g.origin.z, g.resolution] {
        out.write_f64::<LE>(v).unwrap();
    }
    for v in g.lo {
        out.write_i32::<LE>(v).unwrap();
    }
    for v in g.dims {
        out.write_u32::<LE>(v).unwrap();
    }
    for v in roadmap.nodes_flat() {
        out.write_f64::<LE>(*v).unwrap();
    }
    let mut offsets = vec![0u32; n + 1];
    for e in roadmap.edges() {
        offsets[e[0] as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    for v in &offsets {
        out.write_u32::<LE>(*v).unwrap();
    }
    for e in roadmap.edges() {
        out.write_u32::<LE>(e[1]).unwrap();
    }
    put_list(&mut out, &cmap.static_voxels);
    put_list(&mut out, &cmap.self_blocked);
    for w in cmap.node_offsets.windows(2) {
        put_list(&mut out, &cmap.node_ids[w[0] as usize..w[1] as usize]);
    }
    for w in cmap.edge_offsets.windows(2) {
        put_list(&mut out, &cmap.edge_ids[w[0] as usize..w[1] as usize]);
    }
    let sum = Sha256::digest(&out);
    out.extend_from_slice(&sum);
    out
}

/// Parses a roadmap file for `model`. The robot digest in the file must match
/// the model.
pub fn decode(bytes: &[u8], model: &RobotModel<f64>) -> Result<(Roadmap, CollisionMap), DrmError> {
    if bytes.len() < MAGIC.len() + 4 + 32 || &bytes[..8] != MAGIC {
        return Err(bad("not a roadmap file"));
    }
    let (body, sum) = bytes.split_at(bytes.len() - 32);
    let mut r = Cursor::new(body);
    r.set_position(8);
    let version = r.read_u32::<LE>().map_err(|_| bad("truncated header"))?;
    if version != FORMAT_VERSION {
        return Err(DrmError::VersionMismatch { found: version, expected: FORMAT_VERSION });
    }
    if Sha256::digest(body).as_slice() != sum {
        return Err(bad("checksum mismatch"));
    }
    let io = |_| bad("truncated file");
    let mut digest = [0u8; 32];
    r.read_exact(&mut digest).map_err(io)?;
    if digest != model.to_file().digest() {
        return Err(DrmError::ModelMismatch);
    }
    let dof = r.read_u32::<LE>().map_err(io)? as usize;
    let n = r.read_u32::<LE>().map_err(io)? as usize;
    let m = r.read_u32::<LE>().map_err(io)? as usize;
    if dof != model.dof() {
        return Err(DrmError::ModelMismatch);
    }
    let road_step = r.read_f64::<LE>().map_err(io)?;
    let map_step = r.read_f64::<LE>().map_err(io)?;
    let mut f = [0.0; 4];
    for v in &mut f {
        *v = r.read_f64::<LE>().map_err(io)?;
    }
    let mut lo = [0i32; 3];
    for v in &mut lo {
        *v = r.read_i32::<LE>().map_err(io)?;
    }
    let mut dims = [0u32; 3];
    for v in &mut dims {
        *v = r.read_u32::<LE>().map_err(io)?;
    }
    let grid = GridSpec3 { origin: Vec3::new(f[0], f[1], f[2]), resolution: f[3], lo, dims };
    let remaining = body.len().saturating_sub(r.position() as usize);
    if n.saturating_mul(dof).saturating_mul(8) > remaining || grid.len() > remaining {
        return Err(bad("header counts exceed file size"));
    }
    let mut nodes = vec![0.0; n * dof];
    r.read_f64_into::<LE>(&mut nodes).map_err(io)?;
    let mut offsets = vec![0u32; n + 1];
    r.read_u32_into::<LE>(&mut offsets).map_err(io)?;
    if offsets[n] as usize != m || offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(bad("inconsistent edge offsets"));
    }
    let mut targets = vec![0u32; m];
    r.read_u32_into::<LE>(&mut targets).map_err(io)?;
    let mut edges = Vec::with_capacity(m);
    for a in 0..n {
        for &b in &targets[offsets[a] as usize..offsets[a + 1] as usize] {
            if b as usize <= a || b as usize >= n {
                return Err(bad("invalid edge target"));
            }
            edges.push([a as u32, b]);
        }
    }
    let roadmap = Roadmap::from_parts(model, nodes, edges, road_step)?;
    if roadmap.edge_count() != m {
        return Err(bad("duplicate edges"));
    }
    let mut static_voxels = Vec::new();
    get_list(&mut r, grid.len(), &mut static_voxels)?;
    let mut self_blocked = Vec::new();
    get_list(&mut r, m, &mut self_blocked)?;
    let mut read_lists = |bound: usize| -> Result<(Vec<u32>, Vec<u32>), DrmError> {
        let mut offsets = Vec::with_capacity(grid.len() + 1);
        let mut ids = Vec::new();
        offsets.push(0);
        for _ in 0..grid.len() {
            get_list(&mut r, bound, &mut ids)?;
            offsets.push(ids.len() as u32);
        }
        Ok((offsets, ids))
    };
    let (node_offsets, node_ids) = read_lists(n)?;
    let (edge_offsets, edge_ids) = read_lists(m)?;
    if (r.position() as usize) != body.len() {
        return Err(bad("trailing bytes"));
    }
    let cmap = CollisionMap {
        grid,
        edge_step: map_step,
        node_count: n,
        edge_count: m,
        static_voxels,
        node_offsets,
        node_ids,
        edge_offsets,
        edge_ids,
        self_blocked,
    };
    Ok((roadmap, cmap))
}

pub fn save(path: &Path, roadmap: &Roadmap, cmap: &CollisionMap) -> Result<(), DrmError> {
    fs::write(path, encode(roadmap, cmap)).map_err(|e| DrmError::Io(path.display().to_string(), e))
}

pub fn load(path: &Path, model: &RobotModel<f64>) -> Result<(Roadmap, CollisionMap), DrmError> {
    let bytes = fs::read(path).map_err(|e| DrmError::Io(path.display().to_string(), e))?;
    decode(&bytes, model)
}
