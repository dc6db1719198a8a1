//! Binary chain checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        4 bytes  "FRCK"
//! version      u32
//! m, n         u32, u32
//! Lx, Ly       f64, f64
//! iter, accepted, floor_rejected, degenerate   u64 x4
//! f, t, best_f f64 x3
//! K            m*n f64, node order j*m + i
//! updates      m*n u64
//! rng seed     32 bytes
//! rng stream   u64
//! rng word_pos u128
//! crc32        u32 over every preceding byte
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::chain::ChainState;
use crate::error::{CheckpointError, Result};
use crate::grid::{ConductivityField, MeshSpec};
use crate::proposal::{RngState, RngStream};

pub const MAGIC: &[u8; 4] = b"FRCK";
pub const VERSION: u32 = 1;

pub fn encode(state: &ChainState) -> Vec<u8> {
    let mesh = state.k.mesh();
    let nodes = mesh.node_count();
    let mut buf = Vec::with_capacity(128 + 16 * nodes);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(mesh.m() as u32).to_le_bytes());
    buf.extend_from_slice(&(mesh.n() as u32).to_le_bytes());
    buf.extend_from_slice(&mesh.lx().to_le_bytes());
    buf.extend_from_slice(&mesh.ly().to_le_bytes());
    for v in [state.iter, state.accepted, state.floor_rejected, state.degenerate] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in [state.f, state.t, state.best_f] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in state.k.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in &state.update_counts {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let rng = state.rng.state();
    buf.extend_from_slice(&rng.seed);
    buf.extend_from_slice(&rng.stream.to_le_bytes());
    buf.extend_from_slice(&rng.word_pos.to_le_bytes());
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], CheckpointError> {
        if self.bytes.len() < N {
            return Err(CheckpointError::Truncated);
        }
        let (head, rest) = self.bytes.split_at(N);
        self.bytes = rest;
        Ok(head.try_into().expect("split at N"))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        self.take().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        self.take().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        self.take().map(f64::from_le_bytes)
    }
}

pub fn decode(bytes: &[u8]) -> Result<ChainState> {
    if bytes.len() < 8 {
        return Err(CheckpointError::Truncated.into());
    }
    if &bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic.into());
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(CheckpointError::Version {
            found: version,
            expected: VERSION,
        }
        .into());
    }
    if bytes.len() < 12 {
        return Err(CheckpointError::Truncated.into());
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(CheckpointError::Checksum { stored, computed }.into());
    }

    let mut r = Reader { bytes: &body[8..] };
    let m = r.u32()? as usize;
    let n = r.u32()? as usize;
    let mesh = MeshSpec::new(m, n, r.f64()?, r.f64()?)?;
    let (iter, accepted, floor_rejected, degenerate) = (r.u64()?, r.u64()?, r.u64()?, r.u64()?);
    let (f, t, best_f) = (r.f64()?, r.f64()?, r.f64()?);
    let nodes = mesh.node_count();
    let k = (0..nodes).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    let update_counts = (0..nodes).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
    let seed = r.take::<32>()?;
    let stream = r.u64()?;
    let word_pos = u128::from_le_bytes(r.take::<16>()?);
    if !r.bytes.is_empty() {
        return Err(CheckpointError::Truncated.into());
    }
    Ok(ChainState {
        k: ConductivityField::from_values(mesh, k)?,
        f,
        t,
        iter,
        accepted,
        floor_rejected,
        degenerate,
        best_f,
        update_counts,
        rng: RngStream::from_state(RngState { seed, stream, word_pos }),
    })
}

/// Writes through a temporary sibling and renames, so a crash never leaves a
/// half-written checkpoint under `path`.
pub fn save(state: &ChainState, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(&encode(state))?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ChainState> {
    decode(&fs::read(path)?)
}
