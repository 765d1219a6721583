//! Binary lattice configurations.
//!
//! Layout, all little-endian: the magic `SU2L`, `u32` format version, `u32`
//! number of dimensions, one `u32` extent per dimension, then every link as
//! four `f64` (w, x, y, z). Links are ordered by site (lexicographic, first
//! coordinate most significant) and then by direction.

use std::io::{self, Read, Write};

use secantlab_core::gauge::lattice::LatticeGauge;
use secantlab_core::gauge::quat::Quat;

pub const MAGIC: [u8; 4] = *b"SU2L";
pub const VERSION: u32 = 1;
/// Rejects headers that would ask for absurd allocations.
const MAX_LINKS: usize = 1 << 28;

#[derive(Debug, thiserror::Error)]
pub enum LatFileError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a lattice file (bad magic)")]
    Magic,
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("bad header: {0}")]
    Header(String),
    #[error("invalid configuration: {0}")]
    Config(#[from] secantlab_core::Error),
}

pub fn write_lattice<W: Write>(cfg: &LatticeGauge, mut out: W) -> io::Result<()> {
    out.write_all(&MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(cfg.ndim() as u32).to_le_bytes())?;
    for &d in cfg.dims() {
        out.write_all(&(d as u32).to_le_bytes())?;
    }
    for q in cfg.links() {
        for c in q.to_array() {
            out.write_all(&c.to_le_bytes())?;
        }
    }
    out.flush()
}

fn read_u32<R: Read>(input: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(input: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_lattice<R: Read>(mut input: R) -> Result<LatticeGauge, LatFileError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(LatFileError::Magic);
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(LatFileError::Version(version));
    }
    let ndim = read_u32(&mut input)? as usize;
    if ndim == 0 || ndim > 16 {
        return Err(LatFileError::Header(format!("{ndim} dimensions")));
    }
    let mut dims = Vec::with_capacity(ndim);
    let mut links = ndim;
    for _ in 0..ndim {
        let d = read_u32(&mut input)? as usize;
        links = links
            .checked_mul(d)
            .filter(|&n| n <= MAX_LINKS)
            .ok_or_else(|| LatFileError::Header("lattice too large".into()))?;
        dims.push(d);
    }
    let mut qs = Vec::with_capacity(links);
    for _ in 0..links {
        let w = read_f64(&mut input)?;
        let x = read_f64(&mut input)?;
        let y = read_f64(&mut input)?;
        let z = read_f64(&mut input)?;
        qs.push(Quat::new(w, x, y, z));
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(LatFileError::Header("trailing bytes after the last link".into()));
    }
    Ok(LatticeGauge::from_links(&dims, qs)?)
}
