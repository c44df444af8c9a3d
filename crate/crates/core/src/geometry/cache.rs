//! On-disk cache of cone stencils keyed by a content hash of the geometry.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::cone::{ConeGeometry, ConeStencil};
use super::strip::StripDomain;
use crate::error::Result;

const MAGIC: &[u8; 4] = b"PCST";

pub struct MaskCache {
    dir: PathBuf,
}

impl MaskCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Hex digest of the strip descriptor and cone parameters.
    pub fn key(domain: &StripDomain, cone: &ConeGeometry) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(domain.spec()).expect("strip spec serializes"));
        h.update(cone.aperture.to_le_bytes());
        h.update(cone.truncation.unwrap_or(f64::INFINITY).to_le_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn get_or_build(&self, domain: &StripDomain, cone: &ConeGeometry) -> Result<ConeStencil> {
        let path = self.dir.join(format!("{}.cone", Self::key(domain, cone)));
        if let Ok(bytes) = fs::read(&path) {
            if let Some(st) = decode(&bytes, cone) {
                return Ok(st);
            }
        }
        let st = ConeStencil::new(domain, cone);
        fs::create_dir_all(&self.dir)?;
        let tmp = path.with_extension("tmp");
        fs::File::create(&tmp)?.write_all(&encode(&st))?;
        fs::rename(tmp, path)?;
        Ok(st)
    }
}

fn encode(st: &ConeStencil) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    out.extend((st.nodes.len() as u64).to_le_bytes());
    out.extend((st.cells.len() as u64).to_le_bytes());
    for &(l, [i, j]) in &st.nodes {
        out.extend((l as u32).to_le_bytes());
        out.extend((i as i32).to_le_bytes());
        out.extend((j as i32).to_le_bytes());
    }
    for &(k, [i, j], c) in &st.cells {
        out.extend((k as u32).to_le_bytes());
        out.extend((i as i32).to_le_bytes());
        out.extend((j as i32).to_le_bytes());
        out.extend(c.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8], cone: &ConeGeometry) -> Option<ConeStencil> {
    let mut r = io::Cursor::new(bytes);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).ok()?;
    if &magic != MAGIC {
        return None;
    }
    let mut u64b = [0u8; 8];
    let mut u32b = [0u8; 4];
    let mut rd_u64 = |r: &mut io::Cursor<&[u8]>| -> Option<u64> {
        r.read_exact(&mut u64b).ok()?;
        Some(u64::from_le_bytes(u64b))
    };
    let nn = rd_u64(&mut r)? as usize;
    let nc = rd_u64(&mut r)? as usize;
    let mut rd = |r: &mut io::Cursor<&[u8]>| -> Option<[u8; 4]> {
        r.read_exact(&mut u32b).ok()?;
        Some(u32b)
    };
    let mut nodes = Vec::with_capacity(nn);
    for _ in 0..nn {
        let l = u32::from_le_bytes(rd(&mut r)?) as usize;
        let i = i32::from_le_bytes(rd(&mut r)?) as isize;
        let j = i32::from_le_bytes(rd(&mut r)?) as isize;
        nodes.push((l, [i, j]));
    }
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let k = u32::from_le_bytes(rd(&mut r)?) as usize;
        let i = i32::from_le_bytes(rd(&mut r)?) as isize;
        let j = i32::from_le_bytes(rd(&mut r)?) as isize;
        let c = f64::from_le_bytes([rd(&mut r)?, rd(&mut r)?].concat().try_into().ok()?);
        cells.push((k, [i, j], c));
    }
    if r.position() as usize != bytes.len() {
        return None;
    }
    Some(ConeStencil {
        cone: *cone,
        nodes,
        cells,
    })
}
